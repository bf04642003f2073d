//! Finite-dimensional realization of the Gelfand triple V ↪ H ↪ V′ and the
//! interpolation scales between them.
//!
//! A triple is described by the spectral weights of a positive self-adjoint
//! reference operator S in an H-orthonormal basis. Every norm in the chain
//! V ↪ V_γ ↪ H ↪ V′_γ ↪ V′ is then an exactly computable weighted ℓ² norm,
//! and operator norms between any two scales reduce to a largest singular
//! value of a diagonally weighted matrix.

use crate::linalg::{self, C64};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("weights must be nonempty")]
    EmptyWeights,
    #[error("weight {value} at index {index} is below 1")]
    WeightBelowOne { index: usize, value: f64 },
    #[error("weights must be nondecreasing (violation at index {index})")]
    WeightsNotSorted { index: usize },
    #[error("gamma = {0} outside [0, 1)")]
    GammaOutOfRange(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
}

/// The five norm scales of the triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    V,
    H,
    VPrime,
    VGamma,
    VPrimeGamma,
}

impl Scale {
    pub const ALL: [Scale; 5] = [Scale::V, Scale::H, Scale::VPrime, Scale::VGamma, Scale::VPrimeGamma];

    pub fn label(self) -> &'static str {
        match self {
            Scale::V => "V",
            Scale::H => "H",
            Scale::VPrime => "V'",
            Scale::VGamma => "Vg",
            Scale::VPrimeGamma => "Vg'",
        }
    }
}

/// Spectral model of V ↪ H ↪ V′ with interpolation exponent γ.
#[derive(Debug, Clone)]
pub struct GelfandTriple {
    weights: Vec<f64>,
    gamma: f64,
    c_h: f64,
}

impl GelfandTriple {
    /// Validated constructor. Weights must be ≥ 1 and nondecreasing; γ ∈ [0, 1).
    pub fn new(weights: Vec<f64>, gamma: f64) -> Result<Self, SpaceError> {
        if weights.is_empty() {
            return Err(SpaceError::EmptyWeights);
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(w >= 1.0) {
                return Err(SpaceError::WeightBelowOne { index: i, value: w });
            }
            if i > 0 && w < weights[i - 1] {
                return Err(SpaceError::WeightsNotSorted { index: i });
            }
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(SpaceError::GammaOutOfRange(gamma));
        }
        let c_h = weights[0].powf(-0.5);
        Ok(Self { weights, gamma, c_h })
    }

    /// Weights of the first m Dirichlet–Laplacian modes on the unit interval,
    /// s_k = 1 + (kπ)².
    pub fn laplacian_1d(m: usize, gamma: f64) -> Result<Self, SpaceError> {
        let weights = (1..=m)
            .map(|k| 1.0 + (k as f64 * std::f64::consts::PI).powi(2))
            .collect();
        Self::new(weights, gamma)
    }

    /// Log-spaced weights from 1 to `s_max`, useful when operator-norm decay
    /// must be visible across many dyadic scales.
    pub fn geometric(m: usize, s_max: f64, gamma: f64) -> Result<Self, SpaceError> {
        assert!(m >= 1);
        let weights = (0..m)
            .map(|k| {
                if m == 1 {
                    1.0
                } else {
                    s_max.powf(k as f64 / (m - 1) as f64)
                }
            })
            .collect();
        Self::new(weights, gamma)
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Embedding constant of V into H: ‖u‖ ≤ c_H ‖u‖_V.
    pub fn embedding_constant(&self) -> f64 {
        self.c_h
    }

    fn exponent(&self, scale: Scale) -> f64 {
        match scale {
            Scale::V => 1.0,
            Scale::H => 0.0,
            Scale::VPrime => -1.0,
            Scale::VGamma => self.gamma,
            Scale::VPrimeGamma => -self.gamma,
        }
    }

    /// Diagonal of the weight square root D_scale (so ‖u‖_scale = ‖D_scale u‖₂).
    pub fn scale_diag(&self, scale: Scale) -> Array1<f64> {
        let p = 0.5 * self.exponent(scale);
        Array1::from_iter(self.weights.iter().map(|s| s.powf(p)))
    }

    /// The matrix of the reference operator S (diagonal in this basis).
    pub fn reference_matrix(&self) -> Array2<C64> {
        let m = self.dim();
        let mut a = Array2::zeros((m, m));
        for (i, &s) in self.weights.iter().enumerate() {
            a[[i, i]] = C64::new(s, 0.0);
        }
        a
    }

    /// Weighted ℓ² norm of `u` in the requested scale.
    pub fn norm(&self, u: &ArrayView1<C64>, scale: Scale) -> Result<f64, SpaceError> {
        if u.len() != self.dim() {
            return Err(SpaceError::DimensionMismatch { expected: self.dim(), got: u.len() });
        }
        let p = self.exponent(scale);
        let terms: Vec<f64> = u
            .iter()
            .zip(self.weights.iter())
            .map(|(z, s)| s.powf(p) * z.norm_sqr())
            .collect();
        Ok(linalg::pairwise_sum(&terms).sqrt())
    }

    /// Exact operator norm of `a` from one scale into another, as the largest
    /// singular value of D_to · A · D_from⁻¹.
    pub fn op_norm(&self, a: &ArrayView2<C64>, from: Scale, to: Scale) -> Result<f64, SpaceError> {
        let m = self.dim();
        if a.nrows() != m || a.ncols() != m {
            return Err(SpaceError::DimensionMismatch { expected: m, got: a.nrows().max(a.ncols()) });
        }
        let d_to = self.scale_diag(to);
        let d_from = self.scale_diag(from);
        let weighted = Array2::from_shape_fn((m, m), |(i, j)| {
            a[[i, j]] * C64::new(d_to[i] / d_from[j], 0.0)
        });
        Ok(linalg::spectral_norm(&weighted.view())?)
    }

    /// Smallest eigenvalue of the Hermitian part of `a`, measured in the
    /// V-metric: λ_min(S^{-1/2} · (A + Aᴴ)/2 · S^{-1/2}).
    pub fn coercivity_lower_bound(&self, a: &ArrayView2<C64>) -> Result<f64, SpaceError> {
        let m = self.dim();
        if a.nrows() != m || a.ncols() != m {
            return Err(SpaceError::DimensionMismatch { expected: m, got: a.nrows() });
        }
        let d = self.scale_diag(Scale::V);
        let herm = Array2::from_shape_fn((m, m), |(i, j)| {
            0.5 * (a[[i, j]] + a[[j, i]].conj()) / C64::new(d[i] * d[j], 0.0)
        });
        let (vals, _) = linalg::eigh(&herm.view())?;
        Ok(vals[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn rejects_invalid_inputs() {
        assert!(matches!(GelfandTriple::new(vec![], 0.0), Err(SpaceError::EmptyWeights)));
        assert!(matches!(
            GelfandTriple::new(vec![0.5], 0.0),
            Err(SpaceError::WeightBelowOne { .. })
        ));
        assert!(matches!(
            GelfandTriple::new(vec![1.0, 2.0], 1.0),
            Err(SpaceError::GammaOutOfRange(_))
        ));
        assert!(matches!(
            GelfandTriple::new(vec![4.0, 2.0], 0.0),
            Err(SpaceError::WeightsNotSorted { .. })
        ));
    }

    #[test]
    fn identity_weights_collapse_scales() {
        let t = GelfandTriple::new(vec![1.0, 1.0], 0.0).unwrap();
        assert_eq!(t.embedding_constant(), 1.0);
        let u = array![c(3.0, 0.0), c(0.0, 4.0)];
        let v = t.norm(&u.view(), Scale::V).unwrap();
        let h = t.norm(&u.view(), Scale::H).unwrap();
        assert!((v - h).abs() < 1e-15 && (h - 5.0).abs() < 1e-15);
    }

    #[test]
    fn weighted_norms_match_hand_values() {
        let t = GelfandTriple::new(vec![1.0, 4.0, 9.0], 0.5).unwrap();
        let e2 = array![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)];
        assert!((t.norm(&e2.view(), Scale::V).unwrap() - 2.0).abs() < 1e-15);
        assert!((t.norm(&e2.view(), Scale::VGamma).unwrap() - 2.0f64.sqrt()).abs() < 1e-15);

        let t2 = GelfandTriple::new(vec![4.0, 16.0], 0.0).unwrap();
        assert!((t2.embedding_constant() - 0.5).abs() < 1e-15);

        let t3 = GelfandTriple::new(vec![1.0, 4.0], 0.0).unwrap();
        let u = array![c(1.0, 0.0), c(1.0, 0.0)];
        assert!((t3.norm(&u.view(), Scale::V).unwrap() - 5.0f64.sqrt()).abs() < 1e-15);
        assert!((t3.norm(&u.view(), Scale::VPrime).unwrap() - 1.25f64.sqrt()).abs() < 1e-15);
        let zero = array![c(0.0, 0.0), c(0.0, 0.0)];
        for s in Scale::ALL {
            assert_eq!(t3.norm(&zero.view(), s).unwrap(), 0.0);
        }
    }

    #[test]
    fn op_norm_identity_and_zero() {
        let t = GelfandTriple::new(vec![1.0, 4.0], 0.0).unwrap();
        let eye = linalg::identity(2);
        assert!((t.op_norm(&eye.view(), Scale::V, Scale::V).unwrap() - 1.0).abs() < 1e-13);
        // V -> H of the identity is attained on the s = 1 mode.
        assert!((t.op_norm(&eye.view(), Scale::V, Scale::H).unwrap() - 1.0).abs() < 1e-13);
        let zero: Array2<C64> = Array2::zeros((2, 2));
        for from in Scale::ALL {
            for to in Scale::ALL {
                assert_eq!(t.op_norm(&zero.view(), from, to).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let t = GelfandTriple::new(vec![1.0, 2.0], 0.0).unwrap();
        let u = array![c(1.0, 0.0)];
        assert!(matches!(
            t.norm(&u.view(), Scale::H),
            Err(SpaceError::DimensionMismatch { .. })
        ));
    }

    /// Brute force oracle for the operator norm: random probing plus an
    /// independent power iteration on the weighted matrix.
    fn op_norm_oracle(t: &GelfandTriple, a: &Array2<C64>, from: Scale, to: Scale, n_rand: usize) -> f64 {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let m = t.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut best: f64 = 0.0;
        let mut best_vec = Array1::from_elem(m, c(1.0, 0.0));
        for _ in 0..n_rand {
            let u = Array1::from_shape_fn(m, |_| {
                c(rng.sample(rand_distr::StandardNormal), rng.sample(rand_distr::StandardNormal))
            });
            let nf = t.norm(&u.view(), from).unwrap();
            if nf == 0.0 {
                continue;
            }
            let ratio = t.norm(&a.dot(&u).view(), to).unwrap() / nf;
            if ratio > best {
                best = ratio;
                best_vec = u;
            }
        }
        // Polish with plain power iteration on (D_to A D_from^{-1})ᴴ(D_to A D_from^{-1}).
        let d_to = t.scale_diag(to);
        let d_from = t.scale_diag(from);
        let w = Array2::from_shape_fn((m, m), |(i, j)| a[[i, j]] * c(d_to[i] / d_from[j], 0.0));
        let wh = linalg::adjoint(&w.view());
        let mut v = Array1::from_shape_fn(m, |i| best_vec[i] * c(d_from[i], 0.0));
        for _ in 0..2000 {
            let y = wh.dot(&w.dot(&v));
            let n = linalg::vec_norm(&y.view());
            if n == 0.0 {
                break;
            }
            v = y.mapv(|z| z / n);
        }
        let num = linalg::vec_norm(&w.dot(&v).view());
        best.max(num)
    }

    #[test]
    fn op_norm_agrees_with_brute_force() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for m in [2usize, 4, 8] {
            let mut w: Vec<f64> = (0..m).map(|_| 1.0 + 9.0 * rng.gen::<f64>()).collect();
            w.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let t = GelfandTriple::new(w, 0.5).unwrap();
            let a = Array2::from_shape_fn((m, m), |_| {
                c(rng.sample(rand_distr::StandardNormal), rng.sample(rand_distr::StandardNormal))
            });
            for (from, to) in [
                (Scale::V, Scale::VPrime),
                (Scale::V, Scale::VPrimeGamma),
                (Scale::H, Scale::V),
                (Scale::VPrimeGamma, Scale::V),
            ] {
                let exact = t.op_norm(&a.view(), from, to).unwrap();
                let brute = op_norm_oracle(&t, &a, from, to, 10_000);
                assert!(
                    brute <= exact * (1.0 + 1e-6),
                    "sampled ratio exceeded exact norm: {brute} vs {exact}"
                );
                assert!(
                    brute >= exact * (1.0 - 1e-6),
                    "polished brute force too far below: {brute} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn scale_chain_is_nested() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = GelfandTriple::new(vec![1.0, 2.5, 7.0, 30.0], 0.6).unwrap();
        for _ in 0..100 {
            let u = Array1::from_shape_fn(4, |_| {
                c(rng.sample(rand_distr::StandardNormal), rng.sample(rand_distr::StandardNormal))
            });
            let uv = u.view();
            let nv = t.norm(&uv, Scale::V).unwrap();
            let ng = t.norm(&uv, Scale::VGamma).unwrap();
            let nh = t.norm(&uv, Scale::H).unwrap();
            let ngp = t.norm(&uv, Scale::VPrimeGamma).unwrap();
            let np = t.norm(&uv, Scale::VPrime).unwrap();
            assert!(np <= ngp + 1e-12 && ngp <= nh + 1e-12 && nh <= ng + 1e-12 && ng <= nv + 1e-12);
            assert!(nh <= t.embedding_constant() * nv + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn norm_is_homogeneous_and_subadditive(
            re1 in proptest::collection::vec(-5.0f64..5.0, 3),
            re2 in proptest::collection::vec(-5.0f64..5.0, 3),
            scale in -3.0f64..3.0,
        ) {
            let t = GelfandTriple::new(vec![1.0, 3.0, 12.0], 0.4).unwrap();
            let u = Array1::from_iter(re1.iter().map(|&x| c(x, -x * 0.5)));
            let v = Array1::from_iter(re2.iter().map(|&x| c(0.3 * x, x)));
            for s in Scale::ALL {
                let nu = t.norm(&u.view(), s).unwrap();
                let nv = t.norm(&v.view(), s).unwrap();
                let scaled = u.mapv(|z| z * c(scale, 0.0));
                let ns = t.norm(&scaled.view(), s).unwrap();
                prop_assert!((ns - scale.abs() * nu).abs() <= 1e-12 * (1.0 + nu));
                let sum = &u + &v;
                let nsum = t.norm(&sum.view(), s).unwrap();
                prop_assert!(nsum <= nu + nv + 1e-12);
            }
        }
    }
}
