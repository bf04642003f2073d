//! Uniform subdivisions, interval-averaged operators, the piecewise-linear
//! interpolated family, its derived modulus of continuity, and the
//! perturbation/error brackets the convergence theory is built on.

use crate::forms::{dini_integral, sup_ratio, FormError, FormFamily, Modulus};
use crate::linalg::C64;
use crate::quad::{gauss_legendre, QuadError};
use crate::spaces::{Scale, SpaceError};
use ndarray::{Array1, Array2, ArrayView1};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiscretizeError {
    #[error("invalid subdivision: {0}")]
    InvalidSubdivision(String),
    #[error("interval averaging did not converge on [{a:.6}, {b:.6}] (entry deviation {dev:.3e})")]
    QuadratureNotConverged { a: f64, b: f64, dev: f64 },
    #[error("bound violated: {what} at t = {t:.6}{}: ratio {ratio:.6e}", s.map(|v| format!(", s = {v:.6}")).unwrap_or_default())]
    BoundViolated {
        what: &'static str,
        t: f64,
        s: Option<f64>,
        ratio: f64,
    },
    #[error("argument out of range: {0}")]
    OutOfRange(String),
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

/// Uniform subdivision 0 = λ₀ < λ₁ < … < λ_{n+1} = T.
#[derive(Debug, Clone)]
pub struct Subdivision {
    horizon: f64,
    points: Vec<f64>,
    mesh: f64,
}

impl Subdivision {
    /// n interior points, n + 2 points total, mesh T / (n + 1).
    pub fn uniform(horizon: f64, n: usize) -> Result<Self, DiscretizeError> {
        if horizon <= 0.0 {
            return Err(DiscretizeError::InvalidSubdivision(format!(
                "horizon {horizon} must be positive"
            )));
        }
        if n < 1 {
            return Err(DiscretizeError::InvalidSubdivision(
                "need at least one interior point".into(),
            ));
        }
        let cells = n + 1;
        let mesh = horizon / cells as f64;
        let points = (0..=cells)
            .map(|k| {
                if k == cells {
                    horizon
                } else {
                    horizon * k as f64 / cells as f64
                }
            })
            .collect();
        Ok(Self { horizon, points, mesh })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Number of interior points n.
    pub fn interior(&self) -> usize {
        self.points.len() - 2
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    /// Index k with t ∈ [λ_k, λ_{k+1}], clamped to the last cell at t = T.
    pub fn cell_of(&self, t: f64) -> usize {
        let n = self.interior();
        ((t / self.mesh).floor() as usize).min(n)
    }
}

/// The interval-averaged operators A_k and the evaluator of the
/// piecewise-linear interpolated family A_Λ(t).
///
/// `averaged` has n + 2 entries: the last one averages over the phantom
/// interval beyond T under the extension A(r) := A(T) for r > T, hence equals
/// A(T) whenever the base family is continuous there.
#[derive(Clone)]
pub struct InterpolatedFamily {
    subdivision: Subdivision,
    averaged: Vec<Array2<C64>>,
    base: FormFamily,
}

impl std::fmt::Debug for InterpolatedFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InterpolatedFamily")
            .field("base", &self.base.name())
            .field("mesh", &self.subdivision.mesh())
            .field("segments", &self.averaged.len())
            .finish()
    }
}

/// Mean of A(r) over [a, b]: Gauss–Legendre of the given order per panel,
/// refined by adaptive bisection until the cross-check deviation falls below
/// 1e-11 per entry. Bisection grades automatically towards endpoints where
/// the coefficient has a derivative singularity (e.g. t^β at t = 0).
fn average_on_interval(
    form: &FormFamily,
    a: f64,
    b: f64,
    quad_order: usize,
) -> Result<Array2<C64>, DiscretizeError> {
    let m = form.dim();
    let horizon = form.horizon();
    let eval = |r: f64| form.matrix(r.min(horizon));
    let (nodes, weights) = gauss_legendre(quad_order);
    let panel = |lo: f64, hi: f64| -> Array2<C64> {
        let mut acc: Array2<C64> = Array2::zeros((m, m));
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (lo + hi);
        for (x, w) in nodes.iter().zip(weights.iter()) {
            let mat = eval(mid + half * x);
            acc.scaled_add(C64::new(half * w, 0.0), &mat);
        }
        acc
    };
    fn refine(
        panel: &dyn Fn(f64, f64) -> Array2<C64>,
        lo: f64,
        hi: f64,
        whole: Array2<C64>,
        tol: f64,
        depth: usize,
    ) -> Result<Array2<C64>, (f64, f64, f64)> {
        let mid = 0.5 * (lo + hi);
        let left = panel(lo, mid);
        let right = panel(mid, hi);
        let sum = &left + &right;
        let dev = (&sum - &whole).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if dev <= tol {
            return Ok(sum);
        }
        if depth == 0 {
            return Err((lo, hi, dev));
        }
        let l = refine(panel, lo, mid, left, 0.5 * tol, depth - 1)?;
        let r = refine(panel, mid, hi, right, 0.5 * tol, depth - 1)?;
        Ok(&l + &r)
    }
    let whole = panel(a, b);
    // 1e-11 per entry of the average, floored at a few ulps of the entry
    // scale so that large spectral weights stay integrable at all.
    let scale = whole.iter().map(|z| z.norm()).fold(0.0, f64::max) / (b - a);
    let tol = (b - a) * (1e-11 + 24.0 * f64::EPSILON * scale);
    match refine(&panel, a, b, whole, tol, 40) {
        Ok(integral) => Ok(integral / C64::new(b - a, 0.0)),
        Err((lo, hi, dev)) => Err(DiscretizeError::QuadratureNotConverged { a: lo, b: hi, dev }),
    }
}

/// Interval averages A_0 … A_{n+1} of the family over the subdivision cells
/// (the last entry over the phantom cell beyond T).
pub fn average_forms(
    form: &FormFamily,
    sub: &Subdivision,
    quad_order: usize,
) -> Result<Vec<Array2<C64>>, DiscretizeError> {
    assert!(quad_order >= 2);
    let pts = sub.points();
    let mesh = sub.mesh();
    let mut intervals: Vec<(f64, f64)> = pts.windows(2).map(|w| (w[0], w[1])).collect();
    intervals.push((sub.horizon(), sub.horizon() + mesh));
    intervals
        .par_iter()
        .map(|&(a, b)| average_on_interval(form, a, b, quad_order))
        .collect()
}

impl InterpolatedFamily {
    pub fn build(form: &FormFamily, sub: Subdivision, quad_order: usize) -> Result<Self, DiscretizeError> {
        if (sub.horizon() - form.horizon()).abs() > 1e-12 * form.horizon() {
            return Err(DiscretizeError::InvalidSubdivision(
                "subdivision horizon differs from the family horizon".into(),
            ));
        }
        let averaged = average_forms(form, &sub, quad_order)?;
        Ok(Self { subdivision: sub, averaged, base: form.clone() })
    }

    pub fn from_averaged(form: &FormFamily, sub: Subdivision, averaged: Vec<Array2<C64>>) -> Result<Self, DiscretizeError> {
        if averaged.len() != sub.interior() + 2 {
            return Err(DiscretizeError::InvalidSubdivision(format!(
                "expected {} averaged operators, got {}",
                sub.interior() + 2,
                averaged.len()
            )));
        }
        Ok(Self { subdivision: sub, averaged, base: form.clone() })
    }

    pub fn subdivision(&self) -> &Subdivision {
        &self.subdivision
    }

    pub fn averaged(&self) -> &[Array2<C64>] {
        &self.averaged
    }

    pub fn base(&self) -> &FormFamily {
        &self.base
    }

    pub fn mesh(&self) -> f64 {
        self.subdivision.mesh()
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// A_Λ(t): convex combination of the two adjacent averages.
    pub fn eval(&self, t: f64) -> Result<Array2<C64>, DiscretizeError> {
        let (k, theta) = self.locate(t)?;
        let mut out = self.averaged[k].mapv(|z| z * C64::new(1.0 - theta, 0.0));
        out.scaled_add(C64::new(theta, 0.0), &self.averaged[k + 1]);
        Ok(out)
    }

    /// A_Λ(t) · u without materializing the combined matrix.
    pub fn apply(&self, t: f64, u: &ArrayView1<C64>) -> Result<Array1<C64>, DiscretizeError> {
        let (k, theta) = self.locate(t)?;
        let mut out = self.averaged[k].dot(u);
        out.mapv_inplace(|z| z * C64::new(1.0 - theta, 0.0));
        let second = self.averaged[k + 1].dot(u);
        out.scaled_add(C64::new(theta, 0.0), &second);
        Ok(out)
    }

    fn locate(&self, t: f64) -> Result<(usize, f64), DiscretizeError> {
        let t_h = self.subdivision.horizon();
        if !(0.0..=t_h * (1.0 + 1e-12)).contains(&t) {
            return Err(DiscretizeError::OutOfRange(format!("t = {t} outside [0, {t_h}]")));
        }
        let k = self.subdivision.cell_of(t);
        let lambda_k = self.subdivision.points()[k];
        let theta = ((t - lambda_k) / self.subdivision.mesh()).clamp(0.0, 1.0);
        Ok((k, theta))
    }

    /// Derived modulus of continuity of the interpolated family at lag t.
    pub fn modulus(&self, t: f64) -> Result<f64, DiscretizeError> {
        interpolated_modulus(self.base.modulus(), self.mesh(), t)
    }
}

/// The derived modulus ω_Λ of the interpolated family:
/// (t/|Λ|) ω(4|Λ|) for 0 ≤ t ≤ 2|Λ| and 2 ω(2t) for 2|Λ| < t ≤ T,
/// using the extension ω(t) = ω(T) beyond the horizon.
pub fn interpolated_modulus(modulus: &Modulus, mesh: f64, t: f64) -> Result<f64, DiscretizeError> {
    let t_h = modulus.horizon();
    if !(mesh > 0.0 && mesh <= 0.5 * t_h * (1.0 + 1e-12)) {
        return Err(DiscretizeError::OutOfRange(format!(
            "mesh = {mesh} outside (0, T/2] with T = {t_h}"
        )));
    }
    if !(0.0..=t_h * (1.0 + 1e-12)).contains(&t) {
        return Err(DiscretizeError::OutOfRange(format!("t = {t} outside [0, {t_h}]")));
    }
    if t <= 2.0 * mesh {
        Ok(t / mesh * modulus.eval(4.0 * mesh))
    } else {
        Ok(2.0 * modulus.eval(2.0 * t))
    }
}

/// Report of the two perturbation bounds of the interpolated family.
#[derive(Debug, Clone)]
pub struct PerturbationReport {
    /// max over sampled t of ‖A_Λ(t) − A(t)‖_{V→V′_γ} / (2 ω(2|Λ|)).
    pub max_static_ratio: f64,
    /// max over sampled pairs of ‖A_Λ(t) − A_Λ(s)‖_{V→V′_γ} / ω_Λ(|t−s|).
    pub max_modulus_ratio: f64,
}

/// Samples the two perturbation inequalities; both ratios must stay ≤ 1 + 1e-9.
pub fn perturbation_check(
    form: &FormFamily,
    fam: &InterpolatedFamily,
    n_samples: usize,
    seed: u64,
) -> Result<PerturbationReport, DiscretizeError> {
    assert!(n_samples >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t_h = form.horizon();
    let mesh = fam.mesh();
    let static_bound = 2.0 * form.modulus().eval(2.0 * mesh);
    let tol = 1.0 + 1e-9;
    let zero_floor = 1e-12 * (1.0 + form.bound());

    let times: Vec<f64> = (0..n_samples).map(|_| rng.gen::<f64>() * t_h).collect();
    let static_ratios: Vec<(f64, f64)> = times
        .par_iter()
        .map(|&t| {
            let diff = fam.eval(t)? - form.matrix(t);
            let dev = form
                .triple()
                .op_norm(&diff.view(), Scale::V, Scale::VPrimeGamma)?;
            let ratio = if dev <= zero_floor {
                0.0
            } else if static_bound == 0.0 {
                f64::INFINITY
            } else {
                dev / static_bound
            };
            Ok((t, ratio))
        })
        .collect::<Result<_, DiscretizeError>>()?;
    let mut max_static_ratio = 0.0f64;
    for &(t, ratio) in &static_ratios {
        if ratio > tol {
            return Err(DiscretizeError::BoundViolated { what: "static perturbation", t, s: None, ratio });
        }
        max_static_ratio = max_static_ratio.max(ratio);
    }

    let pairs: Vec<(f64, f64)> = (0..n_samples)
        .map(|_| (rng.gen::<f64>() * t_h, rng.gen::<f64>() * t_h))
        .filter(|(t, s)| t != s)
        .collect();
    let pair_ratios: Vec<(f64, f64, f64)> = pairs
        .par_iter()
        .map(|&(t, s)| {
            let diff = fam.eval(t)? - fam.eval(s)?;
            let dev = form
                .triple()
                .op_norm(&diff.view(), Scale::V, Scale::VPrimeGamma)?;
            let bound = fam.modulus((t - s).abs())?;
            let ratio = if dev <= zero_floor {
                0.0
            } else if bound == 0.0 {
                f64::INFINITY
            } else {
                dev / bound
            };
            Ok((t, s, ratio))
        })
        .collect::<Result<_, DiscretizeError>>()?;
    let mut max_modulus_ratio = 0.0f64;
    for &(t, s, ratio) in &pair_ratios {
        if ratio > tol {
            return Err(DiscretizeError::BoundViolated {
                what: "interpolated modulus",
                t,
                s: Some(s),
                ratio,
            });
        }
        max_modulus_ratio = max_modulus_ratio.max(ratio);
    }
    Ok(PerturbationReport { max_static_ratio, max_modulus_ratio })
}

/// The three-term error bracket
/// B(|Λ|) = ω(2|Λ|) + ω(2|Λ|) / |Λ|^{γ/2} + ∫_0^{2|Λ|} ω(s) / s^{1+γ/2} ds.
pub fn bracket_bound(modulus: &Modulus, gamma: f64, mesh: f64) -> Result<f64, DiscretizeError> {
    let t_h = modulus.horizon();
    if !(mesh > 0.0 && mesh <= 0.5 * t_h * (1.0 + 1e-12)) {
        return Err(DiscretizeError::OutOfRange(format!(
            "mesh = {mesh} outside (0, T/2] with T = {t_h}"
        )));
    }
    if modulus.is_zero() {
        return Ok(0.0);
    }
    let w2 = modulus.eval(2.0 * mesh);
    let tail = dini_integral(modulus, gamma, 0.0, 2.0 * mesh)?;
    Ok(w2 + w2 / mesh.powf(0.5 * gamma) + tail)
}

/// Both sides of the two derived-modulus inequalities: the integral bound
/// ∫_0^T ω_Λ(s)/s^{1+γ/2} ds ≤ 4/(1−γ/2) sup ω/t^{γ/2} + 2^{γ/2} ∫_0^{2T} ω/s^{1+γ/2}
/// and the ratio bound sup ω_Λ/t^{γ/2} ≤ 2^{1+γ/2} sup ω/t^{γ/2}.
#[derive(Debug, Clone)]
pub struct DerivedModulusBounds {
    pub integral_lhs: f64,
    pub integral_rhs: f64,
    pub sup_lhs: f64,
    pub sup_rhs: f64,
}

pub fn derived_modulus_bounds(
    modulus: &Modulus,
    gamma: f64,
    mesh: f64,
) -> Result<DerivedModulusBounds, DiscretizeError> {
    let t_h = modulus.horizon();
    if !(mesh > 0.0 && mesh <= 0.5 * t_h * (1.0 + 1e-12)) {
        return Err(DiscretizeError::OutOfRange(format!(
            "mesh = {mesh} outside (0, T/2] with T = {t_h}"
        )));
    }
    let hg = 0.5 * gamma;
    let s_ratio = sup_ratio(modulus, gamma)?;
    // First branch of ω_Λ integrates in closed form; substitution r = 2s turns
    // the second branch into a plain modulus integral on [4|Λ|, 2T].
    let first = modulus.eval(4.0 * mesh) / mesh * (2.0 * mesh).powf(1.0 - hg) / (1.0 - hg);
    let second = 2.0f64.powf(1.0 + hg) * dini_integral(modulus, gamma, 4.0 * mesh, 2.0 * t_h)?;
    let integral_lhs = first + second;
    let integral_rhs = 4.0 / (1.0 - hg) * s_ratio + 2.0f64.powf(hg) * dini_integral(modulus, gamma, 0.0, 2.0 * t_h)?;

    // sup of the first branch sits at t = 2|Λ|; the second branch rescales to
    // the base ratio on (4|Λ|, 2T], dominated by the sup over (0, T].
    let sup_first = modulus.eval(4.0 * mesh) / mesh * (2.0 * mesh).powf(1.0 - hg);
    let sup_second = {
        // Dense evaluation of 2 ω(2t)/t^{γ/2} on (2|Λ|, T].
        let n = 4000;
        let lo = 2.0 * mesh;
        let mut best: f64 = 0.0;
        for i in 1..=n {
            let t = lo + (t_h - lo) * i as f64 / n as f64;
            best = best.max(2.0 * modulus.eval(2.0 * t) / t.powf(hg));
        }
        best
    };
    let sup_lhs = sup_first.max(sup_second);
    let sup_rhs = 2.0f64.powf(1.0 + hg) * s_ratio;
    Ok(DerivedModulusBounds { integral_lhs, integral_rhs, sup_lhs, sup_rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::families;
    use crate::linalg;
    use crate::spaces::GelfandTriple;
    use crate::quad;

    #[test]
    fn uniform_subdivision_points() {
        let sub = Subdivision::uniform(1.0, 3).unwrap();
        assert_eq!(sub.points(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(sub.mesh(), 0.25);
        let sub2 = Subdivision::uniform(2.0, 1).unwrap();
        assert_eq!(sub2.points(), &[0.0, 1.0, 2.0]);
        assert!(Subdivision::uniform(1.0, 0).is_err());
        assert!(Subdivision::uniform(-1.0, 3).is_err());
    }

    #[test]
    fn averaging_constants_and_affine() {
        let triple = GelfandTriple::new(vec![1.0, 4.0], 0.0).unwrap();
        let fam = families::constant_v_form(triple.clone(), 1.0);
        let sub = Subdivision::uniform(1.0, 4).unwrap();
        let avg = average_forms(&fam, &sub, 8).unwrap();
        let s = triple.reference_matrix();
        for a in &avg {
            assert!(linalg::frobenius_norm(&(a - &s).view()) < 1e-13);
        }

        // Affine family averages to the midpoint value.
        let affine = families::affine(triple.clone(), 1.0);
        let mid = average_on_interval(&affine, 0.2, 0.3, 8).unwrap();
        let expect = triple.reference_matrix().mapv(|z| z * C64::new(1.25, 0.0));
        assert!(linalg::frobenius_norm(&(&mid - &expect).view()) < 1e-12);
    }

    #[test]
    fn averaging_sinusoidal_closed_form() {
        use std::sync::Arc;
        let triple = GelfandTriple::new(vec![1.0, 4.0], 0.0).unwrap();
        let s = triple.reference_matrix();
        let s2 = s.clone();
        let fam = crate::forms::FormFamily::new(
            triple.clone(),
            Arc::new(move |t: f64| s2.mapv(|z| z * C64::new(2.0 + t.sin(), 0.0))),
            3.0,
            1.0,
            Modulus::scaled_power(1.0, 1.0, 1.0).unwrap(),
            1.0,
            "sin",
        )
        .unwrap();
        let (a, b) = (0.3, 0.45);
        let avg = average_on_interval(&fam, a, b, 8).unwrap();
        let coeff = 2.0 + (a.cos() - b.cos()) / (b - a);
        let expect = s.mapv(|z| z * C64::new(coeff, 0.0));
        assert!(linalg::frobenius_norm(&(&avg - &expect).view()) < 1e-12);
    }

    #[test]
    fn interpolation_reproduces_nodes_and_shift() {
        let triple = GelfandTriple::new(vec![1.0, 4.0], 0.0).unwrap();
        let fam = families::affine(triple.clone(), 1.0);
        let sub = Subdivision::uniform(1.0, 9).unwrap();
        let interp = InterpolatedFamily::build(&fam, sub, 8).unwrap();
        let h = interp.mesh();
        // Node reproduction for k = 0..n.
        for (k, &lambda) in interp.subdivision().points().iter().enumerate().take(10) {
            let at_node = interp.eval(lambda).unwrap();
            assert!(linalg::frobenius_norm(&(&at_node - &interp.averaged()[k]).view()) < 1e-12);
        }
        // Interior forward shift by half a mesh: A_Λ(t) = (1 + t + h/2) S.
        let s = triple.reference_matrix();
        for &t in &[0.13, 0.5, 0.789] {
            let got = interp.eval(t).unwrap();
            let expect = s.mapv(|z| z * C64::new(1.0 + t + 0.5 * h, 0.0));
            assert!(linalg::frobenius_norm(&(&got - &expect).view()) < 1e-11);
        }
        // At the horizon the extension gives back A(T).
        let end = interp.eval(1.0).unwrap();
        let expect_end = s.mapv(|z| z * C64::new(2.0, 0.0));
        assert!(linalg::frobenius_norm(&(&end - &expect_end).view()) < 1e-11);
        // Constant family: averaging then interpolating is the identity.
        let cfam = families::constant_v_form(triple.clone(), 1.0);
        let cinterp = InterpolatedFamily::build(&cfam, Subdivision::uniform(1.0, 4).unwrap(), 8).unwrap();
        for &t in &[0.0, 0.31, 0.77, 1.0] {
            let got = cinterp.eval(t).unwrap();
            assert!(linalg::frobenius_norm(&(&got - &s).view()) < 1e-13);
        }
        // Out of range is rejected.
        assert!(interp.eval(1.5).is_err());
    }

    #[test]
    fn averaged_operators_keep_constants() {
        let triple = GelfandTriple::laplacian_1d(6, 0.5).unwrap();
        for fam in [
            families::hoelder(triple.clone(), 0.75, 1.0).unwrap(),
            families::rotating(triple.clone(), 0.1, 2.0, 1.0).unwrap(),
        ] {
            let interp = InterpolatedFamily::build(&fam, Subdivision::uniform(1.0, 7).unwrap(), 8).unwrap();
            for a in interp.averaged() {
                let m = triple.op_norm(&a.view(), Scale::V, Scale::VPrime).unwrap();
                let alpha = triple.coercivity_lower_bound(&a.view()).unwrap();
                assert!(m <= fam.bound() + 1e-9);
                assert!(alpha >= fam.coercivity() - 1e-9);
            }
        }
    }

    #[test]
    fn derived_modulus_values() {
        let m = Modulus::power(0.75, 1.0).unwrap();
        let v1 = interpolated_modulus(&m, 0.1, 0.05).unwrap();
        assert!((v1 - 0.5 * 0.4f64.powf(0.75)).abs() < 1e-12);
        let v2 = interpolated_modulus(&m, 0.1, 0.5).unwrap();
        assert!((v2 - 2.0).abs() < 1e-12); // 2 ω(1.0) with T = 1
        let z = Modulus::zero(1.0);
        assert_eq!(interpolated_modulus(&z, 0.1, 0.3).unwrap(), 0.0);
        assert!(interpolated_modulus(&m, 0.6, 0.3).is_err()); // mesh > T/2
        assert!(interpolated_modulus(&m, 0.1, 1.5).is_err());
    }

    #[test]
    fn perturbation_constant_and_affine() {
        let triple = GelfandTriple::new(vec![1.0, 4.0, 9.0], 0.5).unwrap();
        let cfam = families::constant_v_form(triple.clone(), 1.0);
        let cinterp = InterpolatedFamily::build(&cfam, Subdivision::uniform(1.0, 9).unwrap(), 8).unwrap();
        let rep = perturbation_check(&cfam, &cinterp, 200, 3).unwrap();
        assert_eq!(rep.max_static_ratio, 0.0);
        assert_eq!(rep.max_modulus_ratio, 0.0);

        let afam = families::affine(triple.clone(), 1.0);
        let ainterp = InterpolatedFamily::build(&afam, Subdivision::uniform(1.0, 9).unwrap(), 8).unwrap();
        let rep = perturbation_check(&afam, &ainterp, 500, 5).unwrap();
        // Interior static deviation is exactly (h/2) c_ω against the bound
        // 4 c_ω h, ratio 1/8; samples may fall in the last cell where it dips.
        assert!(rep.max_static_ratio <= 0.125 + 1e-9);
        assert!(rep.max_static_ratio >= 0.125 - 0.01);
    }

    #[test]
    fn perturbation_hoelder_at_mesh_005() {
        let triple = GelfandTriple::new(vec![1.0, 2.0, 5.0, 13.0], 0.5).unwrap();
        let fam = families::hoelder(triple, 0.75, 1.0).unwrap();
        let interp = InterpolatedFamily::build(&fam, Subdivision::uniform(1.0, 19).unwrap(), 8).unwrap();
        let rep = perturbation_check(&fam, &interp, 500, 7).unwrap();
        assert!(rep.max_static_ratio <= 1.0 + 1e-9);
        assert!(rep.max_modulus_ratio <= 1.0 + 1e-9);
    }

    #[test]
    fn bracket_values() {
        let z = Modulus::zero(1.0);
        assert_eq!(bracket_bound(&z, 0.0, 0.1).unwrap(), 0.0);

        // ω(t) = t, γ = 0, mesh h: 2h + 2h + 2h.
        let lin = Modulus::power(1.0, 1.0).unwrap();
        let h = 0.05;
        assert!((bracket_bound(&lin, 0.0, h).unwrap() - 6.0 * h).abs() < 1e-10);

        // ω(t) = t^{3/4}, γ = 1/2, mesh 0.01.
        let m = Modulus::power(0.75, 1.0).unwrap();
        let got = bracket_bound(&m, 0.5, 0.01).unwrap();
        let expect = 0.02f64.powf(0.75)
            + 2.0f64.powf(0.75) * 0.01f64.powf(0.5)
            + 2.0f64.powf(1.5) * 0.01f64.powf(0.5);
        assert!((got - expect).abs() < 1e-9, "got {got}, expect {expect}");
    }

    #[test]
    fn bracket_nonincreasing_under_refinement() {
        let m = Modulus::power(0.75, 1.0).unwrap();
        let mut prev = f64::INFINITY;
        let mut mesh = 0.25;
        for _ in 0..8 {
            let b = bracket_bound(&m, 0.5, mesh).unwrap();
            assert!(b <= prev * (1.0 + 1e-12), "bracket grew: {b} > {prev}");
            prev = b;
            mesh *= 0.5;
        }
    }

    #[test]
    fn derived_modulus_inequalities_hold() {
        for &beta in &[0.6, 0.75, 1.0] {
            for &gamma in &[0.0, 0.5] {
                let m = Modulus::power(beta, 1.0).unwrap();
                for &mesh in &[0.1, 0.05, 0.01] {
                    let b = derived_modulus_bounds(&m, gamma, mesh).unwrap();
                    assert!(
                        b.integral_lhs <= b.integral_rhs + 1e-8,
                        "integral bound failed: beta={beta} gamma={gamma} mesh={mesh}: {} vs {}",
                        b.integral_lhs,
                        b.integral_rhs
                    );
                    assert!(
                        b.sup_lhs <= b.sup_rhs + 1e-8,
                        "sup bound failed: beta={beta} gamma={gamma} mesh={mesh}"
                    );
                }
            }
        }
    }

    #[test]
    fn derived_modulus_integral_matches_direct_quadrature() {
        let m = Modulus::power(0.75, 1.0).unwrap();
        let gamma = 0.5;
        let mesh = 0.05;
        let b = derived_modulus_bounds(&m, gamma, mesh).unwrap();
        let f = |s: f64| interpolated_modulus(&m, mesh, s).unwrap() * s.powf(-1.0 - 0.5 * gamma);
        let direct = quad::integrate_to_zero(&f, 1.0, 1e-10).unwrap();
        assert!(
            (direct - b.integral_lhs).abs() < 1e-7 * (1.0 + direct),
            "direct {direct} vs closed {q}",
            q = b.integral_lhs
        );
    }
}
