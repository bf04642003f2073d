//! Time-dependent sesquilinear forms as matrix-valued maps, their declared
//! constants (M, α), moduli of continuity, and samplers that certify the
//! structural hypotheses (boundedness, coercivity, Dini regularity).
//!
//! Declared constants are inputs, verified by sampling rather than inferred:
//! all downstream error brackets are stated in terms of the declared values.

use crate::linalg::C64;
use crate::quad::{self, QuadError};
use crate::spaces::{GelfandTriple, Scale, SpaceError};
use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormError {
    #[error("declared constant violated at t = {t:.6}: {what} (declared {declared:.6e}, observed {observed:.6e})")]
    DeclaredConstantViolated {
        t: f64,
        what: &'static str,
        declared: f64,
        observed: f64,
    },
    #[error("Dini bound violated at (t, s) = ({t:.6}, {s:.6}): ratio {ratio:.6e}")]
    DiniViolated { t: f64, s: f64, ratio: f64 },
    #[error("modulus integral diverges: beta = {beta} <= gamma/2 = {half_gamma} with a = 0")]
    DivergentIntegral { beta: f64, half_gamma: f64 },
    #[error("modulus ratio unbounded: beta = {beta} < gamma/2 = {half_gamma}")]
    Unbounded { beta: f64, half_gamma: f64 },
    #[error("closed-form and quadrature values of the modulus integral disagree: {closed:.12e} vs {quadrature:.12e}")]
    IntegralCrossCheck { closed: f64, quadrature: f64 },
    #[error("invalid modulus: {0}")]
    InvalidModulus(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

/// Modulus of continuity ω on [0, T], extended by ω(t) = ω(T) on [T, 2T].
#[derive(Debug, Clone)]
pub struct Modulus {
    kind: ModulusKind,
    horizon: f64,
}

#[derive(Debug, Clone)]
pub enum ModulusKind {
    /// ω(t) = t^β, β ∈ (0, 1].
    Power { beta: f64 },
    /// ω(t) = c · t^β.
    ScaledPower { c: f64, beta: f64 },
    /// Piecewise-linear interpolation of sorted knots, starting at (0, 0).
    Tabulated { knots: Vec<(f64, f64)> },
}

impl Modulus {
    pub fn power(beta: f64, horizon: f64) -> Result<Self, FormError> {
        Self::scaled_power(1.0, beta, horizon)
    }

    pub fn scaled_power(c: f64, beta: f64, horizon: f64) -> Result<Self, FormError> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(FormError::InvalidModulus(format!("beta = {beta} outside (0, 1]")));
        }
        if c < 0.0 || horizon <= 0.0 {
            return Err(FormError::InvalidModulus(format!("c = {c}, horizon = {horizon}")));
        }
        Ok(Self { kind: ModulusKind::ScaledPower { c, beta }, horizon })
    }

    pub fn zero(horizon: f64) -> Self {
        Self { kind: ModulusKind::ScaledPower { c: 0.0, beta: 1.0 }, horizon }
    }

    pub fn tabulated(knots: Vec<(f64, f64)>, horizon: f64) -> Result<Self, FormError> {
        if knots.len() < 2 {
            return Err(FormError::InvalidModulus("need at least two knots".into()));
        }
        if knots[0] != (0.0, 0.0) {
            return Err(FormError::InvalidModulus("first knot must be (0, 0)".into()));
        }
        for w in knots.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(FormError::InvalidModulus("knot abscissae must increase".into()));
            }
            if w[1].1 < w[0].1 {
                return Err(FormError::InvalidModulus("knot values must be nondecreasing".into()));
            }
        }
        let last = knots.last().unwrap().0;
        if (last - horizon).abs() > 1e-12 * horizon {
            return Err(FormError::InvalidModulus("last knot must sit at the horizon".into()));
        }
        Ok(Self { kind: ModulusKind::Tabulated { knots }, horizon })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn kind(&self) -> &ModulusKind {
        &self.kind
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, ModulusKind::ScaledPower { c, .. } if c == 0.0)
    }

    /// ω(t) with the extension ω(t) = ω(T) for t ≥ T.
    pub fn eval(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        let t = t.min(self.horizon);
        match &self.kind {
            ModulusKind::Power { beta } => t.powf(*beta),
            ModulusKind::ScaledPower { c, beta } => c * t.powf(*beta),
            ModulusKind::Tabulated { knots } => {
                if t <= 0.0 {
                    return 0.0;
                }
                match knots.binary_search_by(|k| k.0.partial_cmp(&t).unwrap()) {
                    Ok(i) => knots[i].1,
                    Err(i) => {
                        let (t0, w0) = knots[i - 1];
                        let (t1, w1) = knots[i];
                        w0 + (w1 - w0) * (t - t0) / (t1 - t0)
                    }
                }
            }
        }
    }

    fn power_params(&self) -> Option<(f64, f64)> {
        match self.kind {
            ModulusKind::Power { beta } => Some((1.0, beta)),
            ModulusKind::ScaledPower { c, beta } => Some((c, beta)),
            ModulusKind::Tabulated { .. } => None,
        }
    }

    /// Hölder exponent β for power moduli with a nonzero scale.
    pub fn power_exponent(&self) -> Option<f64> {
        match self.kind {
            ModulusKind::Power { beta } => Some(beta),
            ModulusKind::ScaledPower { c, beta } if c > 0.0 => Some(beta),
            _ => None,
        }
    }
}

/// ∫_a^b ω(s) / s^{1+γ/2} ds with 0 ≤ a < b ≤ 2T.
///
/// Power moduli use the closed form (split at the horizon where the extension
/// kicks in) cross-checked against adaptive quadrature; tabulated moduli use
/// quadrature alone, with geometric refinement towards a = 0.
pub fn dini_integral(modulus: &Modulus, gamma: f64, a: f64, b: f64) -> Result<f64, FormError> {
    let t_h = modulus.horizon();
    if !(0.0 <= a && a < b && b <= 2.0 * t_h * (1.0 + 1e-12)) {
        return Err(FormError::InvalidArgument(format!(
            "integration bounds [{a}, {b}] outside [0, 2T] with T = {t_h}"
        )));
    }
    let half_gamma = 0.5 * gamma;
    if modulus.is_zero() {
        return Ok(0.0);
    }
    if let Some((c, beta)) = modulus.power_params() {
        if a == 0.0 && beta <= half_gamma {
            return Err(FormError::DivergentIntegral { beta, half_gamma });
        }
        // Closed form on [a, min(b, T)] plus the clamped tail on [T, b].
        let p = beta - half_gamma;
        let core_hi = b.min(t_h);
        let mut closed = if a < core_hi {
            c * (core_hi.powf(p) - a.powf(p)) / p
        } else {
            0.0
        };
        if b > t_h {
            let w_t = c * t_h.powf(beta);
            let lo = a.max(t_h);
            closed += if half_gamma > 0.0 {
                w_t * (lo.powf(-half_gamma) - b.powf(-half_gamma)) / half_gamma
            } else {
                w_t * (b / lo).ln()
            };
        }
        // Cross-check by quadrature.
        let f = |s: f64| modulus.eval(s) * s.powf(-1.0 - half_gamma);
        let quadrature = if a == 0.0 {
            quad::integrate_to_zero(&f, b, 1e-10)?
        } else {
            quad::integrate_adaptive(&f, a, b, 1e-10)?
        };
        if (closed - quadrature).abs() > 1e-7 * (1.0 + closed.abs()) {
            return Err(FormError::IntegralCrossCheck { closed, quadrature });
        }
        return Ok(closed);
    }
    let f = |s: f64| modulus.eval(s) * s.powf(-1.0 - half_gamma);
    let value = if a == 0.0 {
        quad::integrate_to_zero(&f, b, 1e-10)?
    } else {
        quad::integrate_adaptive(&f, a, b, 1e-10)?
    };
    Ok(value)
}

/// sup over (0, T] of ω(t) / t^{γ/2}; exact for power moduli, dense log grid
/// otherwise.
pub fn sup_ratio(modulus: &Modulus, gamma: f64) -> Result<f64, FormError> {
    let half_gamma = 0.5 * gamma;
    let t_h = modulus.horizon();
    if modulus.is_zero() {
        return Ok(0.0);
    }
    if let Some((c, beta)) = modulus.power_params() {
        if beta < half_gamma {
            return Err(FormError::Unbounded { beta, half_gamma });
        }
        return Ok(c * t_h.powf(beta - half_gamma));
    }
    let n = 10_000;
    let lo: f64 = 1e-12 * t_h;
    let mut best: f64 = 0.0;
    for i in 0..=n {
        let t = lo * (t_h / lo).powf(i as f64 / n as f64);
        best = best.max(modulus.eval(t) / t.powf(half_gamma));
    }
    if let ModulusKind::Tabulated { knots } = modulus.kind() {
        for &(t, w) in knots.iter().skip(1) {
            best = best.max(w / t.powf(half_gamma));
        }
    }
    Ok(best)
}

/// Matrix-valued evaluation map t ↦ A(t) of a sesquilinear form a(t, u, v) in
/// the H-orthonormal coordinates of the triple, i.e. a(t,u,v) = vᴴ A(t) u.
pub type AssembleFn = Arc<dyn Fn(f64) -> Array2<C64> + Send + Sync>;

/// A non-autonomous form with declared constants and modulus.
#[derive(Clone)]
pub struct FormFamily {
    triple: GelfandTriple,
    assemble: AssembleFn,
    bound: f64,
    coercivity: f64,
    modulus: Modulus,
    horizon: f64,
    name: String,
}

impl std::fmt::Debug for FormFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FormFamily")
            .field("name", &self.name)
            .field("dim", &self.triple.dim())
            .field("bound", &self.bound)
            .field("coercivity", &self.coercivity)
            .field("horizon", &self.horizon)
            .finish()
    }
}

impl FormFamily {
    pub fn new(
        triple: GelfandTriple,
        assemble: AssembleFn,
        bound: f64,
        coercivity: f64,
        modulus: Modulus,
        horizon: f64,
        name: impl Into<String>,
    ) -> Result<Self, FormError> {
        if bound <= 0.0 || coercivity <= 0.0 {
            return Err(FormError::InvalidArgument(format!(
                "constants must be positive: M = {bound}, alpha = {coercivity}"
            )));
        }
        if (modulus.horizon() - horizon).abs() > 1e-12 * horizon {
            return Err(FormError::InvalidArgument(
                "modulus horizon must equal the family horizon".into(),
            ));
        }
        Ok(Self {
            triple,
            assemble,
            bound,
            coercivity,
            modulus,
            horizon,
            name: name.into(),
        })
    }

    pub fn triple(&self) -> &GelfandTriple {
        &self.triple
    }

    pub fn dim(&self) -> usize {
        self.triple.dim()
    }

    /// Declared boundedness constant M.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Declared coercivity constant α.
    pub fn coercivity(&self) -> f64 {
        self.coercivity
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn gamma(&self) -> f64 {
        self.triple.gamma()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Coordinate matrix A(t).
    pub fn matrix(&self, t: f64) -> Array2<C64> {
        (self.assemble)(t)
    }
}

/// Initial value and inhomogeneity of the Cauchy problem.
#[derive(Clone)]
pub struct SourceData {
    pub u0: Array1<C64>,
    f: Arc<dyn Fn(f64) -> Array1<C64> + Send + Sync>,
    f_is_zero: bool,
}

impl SourceData {
    pub fn new(u0: Array1<C64>, f: Arc<dyn Fn(f64) -> Array1<C64> + Send + Sync>) -> Self {
        Self { u0, f, f_is_zero: false }
    }

    pub fn homogeneous(u0: Array1<C64>) -> Self {
        let m = u0.len();
        Self {
            u0,
            f: Arc::new(move |_| Array1::zeros(m)),
            f_is_zero: true,
        }
    }

    pub fn constant_force(u0: Array1<C64>, g: Array1<C64>) -> Self {
        Self {
            u0,
            f: Arc::new(move |_| g.clone()),
            f_is_zero: false,
        }
    }

    pub fn force(&self, t: f64) -> Array1<C64> {
        (self.f)(t)
    }

    pub fn force_is_zero(&self) -> bool {
        self.f_is_zero
    }

    pub fn dim(&self) -> usize {
        self.u0.len()
    }
}

fn sample_grid(n: usize, horizon: f64) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|i| horizon * i as f64 / (n - 1) as f64).collect()
}

/// Certified sampled constants (M̂, α̂).
///
/// M̂ is the max over a uniform t-grid of the V→V′ operator norm of A(t); α̂
/// the min over the grid of the smallest Hermitian-part eigenvalue in the
/// V-metric. Additionally `n_vec` random vector pairs per time node probe the
/// bilinear bounds directly. An error carries the violating t if the declared
/// constants are contradicted.
pub fn estimate_constants(
    form: &FormFamily,
    n_time: usize,
    n_vec: usize,
    seed: u64,
) -> Result<(f64, f64), FormError> {
    assert!(n_time >= 1 && n_vec >= 1);
    let grid = sample_grid(n_time, form.horizon());
    let per_node: Vec<(f64, f64, f64)> = grid
        .par_iter()
        .map(|&t| {
            let a = form.matrix(t);
            let m_hat = form.triple().op_norm(&a.view(), Scale::V, Scale::VPrime)?;
            let alpha_hat = form.triple().coercivity_lower_bound(&a.view())?;
            Ok((t, m_hat, alpha_hat))
        })
        .collect::<Result<_, FormError>>()?;

    let mut m_hat = 0.0f64;
    let mut alpha_hat = f64::INFINITY;
    let slack = 1e-9;
    for &(t, m_t, a_t) in &per_node {
        if m_t > form.bound() * (1.0 + slack) {
            return Err(FormError::DeclaredConstantViolated {
                t,
                what: "boundedness M",
                declared: form.bound(),
                observed: m_t,
            });
        }
        if a_t < form.coercivity() * (1.0 - slack) {
            return Err(FormError::DeclaredConstantViolated {
                t,
                what: "coercivity alpha",
                declared: form.coercivity(),
                observed: a_t,
            });
        }
        m_hat = m_hat.max(m_t);
        alpha_hat = alpha_hat.min(a_t);
    }

    // Random vector probes of the raw bilinear inequalities.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = form.dim();
    let triple = form.triple();
    for &t in grid.iter() {
        let a = form.matrix(t);
        for _ in 0..n_vec {
            let u = random_vec(&mut rng, m);
            let v = random_vec(&mut rng, m);
            let au = a.dot(&u);
            let val: C64 = v.iter().zip(au.iter()).map(|(vi, wi)| vi.conj() * wi).sum();
            let nu = triple.norm(&u.view(), Scale::V)?;
            let nv = triple.norm(&v.view(), Scale::V)?;
            if val.norm() > form.bound() * nu * nv * (1.0 + slack) {
                return Err(FormError::DeclaredConstantViolated {
                    t,
                    what: "boundedness M (vector probe)",
                    declared: form.bound(),
                    observed: val.norm() / (nu * nv),
                });
            }
            let quad: C64 = u.iter().zip(au.iter()).map(|(ui, wi)| ui.conj() * wi).sum();
            if quad.re < form.coercivity() * nu * nu * (1.0 - slack) {
                return Err(FormError::DeclaredConstantViolated {
                    t,
                    what: "coercivity alpha (vector probe)",
                    declared: form.coercivity(),
                    observed: quad.re / (nu * nu),
                });
            }
        }
    }
    Ok((m_hat, alpha_hat))
}

fn random_vec(rng: &mut ChaCha8Rng, m: usize) -> Array1<C64> {
    // Box-Muller pairs; unit-free direction is all that matters here.
    Array1::from_shape_fn(m, |_| {
        let u1: f64 = rng.gen::<f64>().max(1e-12);
        let u2: f64 = rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        C64::new(r * (2.0 * std::f64::consts::PI * u2).cos(), r * (2.0 * std::f64::consts::PI * u2).sin())
    })
}

/// Result of a Dini sampling pass: the worst ratio and where it occurred.
#[derive(Debug, Clone)]
pub struct DiniReport {
    pub max_ratio: f64,
    pub worst_pair: Option<(f64, f64)>,
    pub n_pairs: usize,
}

/// Samples pairs (t, s) and checks ‖A(t) − A(s)‖_{V→V′_γ} ≤ ω(|t−s|).
///
/// Pairs with t = s are skipped (0/0 convention); a zero modulus with a
/// nonzero increment is a violation.
pub fn verify_dini(form: &FormFamily, n_pairs: usize, seed: u64) -> Result<DiniReport, FormError> {
    assert!(n_pairs >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t_h = form.horizon();
    let pairs: Vec<(f64, f64)> = (0..n_pairs)
        .map(|_| (rng.gen::<f64>() * t_h, rng.gen::<f64>() * t_h))
        .filter(|(t, s)| t != s)
        .collect();
    let ratios: Vec<(f64, f64, f64)> = pairs
        .par_iter()
        .map(|&(t, s)| {
            let diff = form.matrix(t) - form.matrix(s);
            let num = form
                .triple()
                .op_norm(&diff.view(), Scale::V, Scale::VPrimeGamma)?;
            let w = form.modulus().eval((t - s).abs());
            let ratio = if num == 0.0 {
                0.0
            } else if w == 0.0 {
                f64::INFINITY
            } else {
                num / w
            };
            Ok((t, s, ratio))
        })
        .collect::<Result<_, FormError>>()?;
    let mut max_ratio = 0.0f64;
    let mut worst_pair = None;
    for &(t, s, ratio) in &ratios {
        if ratio > max_ratio {
            max_ratio = ratio;
            worst_pair = Some((t, s));
        }
    }
    if max_ratio > 1.0 + 1e-9 {
        let (t, s) = worst_pair.unwrap();
        return Err(FormError::DiniViolated { t, s, ratio: max_ratio });
    }
    Ok(DiniReport { max_ratio, worst_pair, n_pairs: pairs.len() })
}

/// Sampled estimate of the smallest η such that
/// ‖(A(t) − A(s))x‖_{V′} ≤ ε‖x‖_V + η‖x‖ for all |t − s| ≤ δ.
///
/// Projected gradient ascent on the unit H-sphere from `n_samples` random
/// starts; the returned value is a sampled lower bound on the true minimal η,
/// clipped at zero.
pub fn relative_continuity_profile(
    form: &FormFamily,
    epsilon: f64,
    delta: f64,
    n_samples: usize,
    seed: u64,
) -> Result<f64, FormError> {
    assert!(epsilon >= 0.0 && delta > 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t_h = form.horizon();
    let m = form.dim();
    let triple = form.triple();
    let d_v = triple.scale_diag(Scale::V);
    let d_vp = triple.scale_diag(Scale::VPrime);
    let mut eta_hat = 0.0f64;
    for _ in 0..n_samples {
        let t = rng.gen::<f64>() * t_h;
        let lo = (t - delta).max(0.0);
        let hi = (t + delta).min(t_h);
        let s = lo + rng.gen::<f64>() * (hi - lo);
        if t == s {
            continue;
        }
        let diff = form.matrix(t) - form.matrix(s);
        // Weighted difference W x measures the V′ norm of (A(t)-A(s))x.
        let w = Array2::from_shape_fn((m, m), |(i, j)| diff[[i, j]] * C64::new(d_vp[i], 0.0));
        let mut x = random_vec(&mut rng, m);
        normalize(&mut x);
        let mut best = objective(&w, &d_v, &x, epsilon);
        let mut step = 0.5;
        for _ in 0..200 {
            let grad = gradient(&w, &d_v, &x, epsilon);
            let mut cand = &x + &grad.mapv(|g| g * C64::new(step, 0.0));
            normalize(&mut cand);
            let val = objective(&w, &d_v, &cand, epsilon);
            if val > best {
                best = val;
                x = cand;
                step *= 1.2;
            } else {
                step *= 0.5;
                if step < 1e-12 {
                    break;
                }
            }
        }
        eta_hat = eta_hat.max(best);
    }
    Ok(eta_hat.max(0.0))
}

fn normalize(x: &mut Array1<C64>) {
    let n = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        x.mapv_inplace(|z| z / n);
    }
}

fn objective(w: &Array2<C64>, d_v: &Array1<f64>, x: &Array1<C64>, epsilon: f64) -> f64 {
    let wx = w.dot(x);
    let wn = wx.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let vn = x
        .iter()
        .zip(d_v.iter())
        .map(|(z, d)| (d * d) * z.norm_sqr())
        .sum::<f64>()
        .sqrt();
    wn - epsilon * vn
}

fn gradient(w: &Array2<C64>, d_v: &Array1<f64>, x: &Array1<C64>, epsilon: f64) -> Array1<C64> {
    let wx = w.dot(x);
    let wn = wx.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let vn = x
        .iter()
        .zip(d_v.iter())
        .map(|(z, d)| (d * d) * z.norm_sqr())
        .sum::<f64>()
        .sqrt();
    let m = x.len();
    let wh_wx = crate::linalg::adjoint(&w.view()).dot(&wx);
    Array1::from_shape_fn(m, |i| {
        let g1 = if wn > 0.0 { wh_wx[i] / C64::new(wn, 0.0) } else { C64::new(0.0, 0.0) };
        let g2 = if vn > 0.0 {
            x[i] * C64::new(epsilon * d_v[i] * d_v[i] / vn, 0.0)
        } else {
            C64::new(0.0, 0.0)
        };
        g1 - g2
    })
}

/// The built-in example families. Each has closed-form constants.
pub mod families {
    use super::*;

    /// a(t, u, v) = (u, v)_V, i.e. A(t) ≡ S. Constants M = α = 1, ω ≡ 0.
    pub fn constant_v_form(triple: GelfandTriple, horizon: f64) -> FormFamily {
        let s = triple.reference_matrix();
        FormFamily::new(
            triple,
            Arc::new(move |_| s.clone()),
            1.0,
            1.0,
            Modulus::zero(horizon),
            horizon,
            "constant-diag",
        )
        .expect("valid constants")
    }

    /// Constant diagonal family A(t) ≡ diag(d) (d in V-form coordinates must
    /// itself be bounded and coercive; constants are computed from d).
    pub fn constant_diag(triple: GelfandTriple, diag: Vec<f64>, horizon: f64) -> Result<FormFamily, FormError> {
        if diag.len() != triple.dim() {
            return Err(FormError::InvalidArgument("diagonal length mismatch".into()));
        }
        let m = triple.dim();
        let mut a = Array2::zeros((m, m));
        for (i, &d) in diag.iter().enumerate() {
            a[[i, i]] = C64::new(d, 0.0);
        }
        let bound = triple.op_norm(&a.view(), Scale::V, Scale::VPrime)?;
        let alpha = triple.coercivity_lower_bound(&a.view())?;
        if alpha <= 0.0 {
            return Err(FormError::InvalidArgument("diagonal family is not coercive".into()));
        }
        FormFamily::new(
            triple,
            Arc::new(move |_| a.clone()),
            bound,
            alpha,
            Modulus::zero(horizon),
            horizon,
            "constant-diag",
        )
    }

    /// Affine family A(t) = (1 + t) S. Lipschitz modulus with the exact
    /// constant c_ω = ‖S‖_{V→V′_γ} = s_max^{(1−γ)/2}.
    pub fn affine(triple: GelfandTriple, horizon: f64) -> FormFamily {
        let s = triple.reference_matrix();
        let s_max = *triple.weights().last().unwrap();
        let c_omega = s_max.powf(0.5 * (1.0 - triple.gamma()));
        let modulus = Modulus::scaled_power(c_omega, 1.0, horizon).expect("valid modulus");
        FormFamily::new(
            triple,
            Arc::new(move |t| s.mapv(|z| z * C64::new(1.0 + t, 0.0))),
            1.0 + horizon,
            1.0,
            modulus,
            horizon,
            "affine",
        )
        .expect("valid constants")
    }

    /// Hölder family a(t, u, v) = (1 + t^β/2)(u, v)_V with exponent β ∈ (0, 1].
    pub fn hoelder(triple: GelfandTriple, beta: f64, horizon: f64) -> Result<FormFamily, FormError> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(FormError::InvalidArgument(format!("beta = {beta} outside (0, 1]")));
        }
        let s = triple.reference_matrix();
        let s_max = *triple.weights().last().unwrap();
        let c_omega = 0.5 * s_max.powf(0.5 * (1.0 - triple.gamma()));
        let modulus = Modulus::scaled_power(c_omega, beta, horizon)?;
        FormFamily::new(
            triple,
            Arc::new(move |t| s.mapv(|z| z * C64::new(1.0 + 0.5 * t.powf(beta), 0.0))),
            1.0 + 0.5 * horizon.powf(beta),
            1.0,
            modulus,
            horizon,
            "hoelder",
        )
    }

    /// Rotating non-Hermitian perturbation A(t) = S + κ R(t) with
    /// R(t) = S^{(1+γ)/4} (cos(νt) Z₁ + sin(νt) Z₂) S^{(1+γ)/4},
    /// Z₁ real antisymmetric and Z₂ = i (shift + shiftᵀ), both tridiagonal.
    ///
    /// R(t) is skew-Hermitian for every t, so coercivity stays α = 1; the
    /// weighting keeps ‖R(t)‖_{V→V′} ≤ 4 and gives a Lipschitz Dini modulus
    /// with constant 4κν r_max^{(1−γ)/4}, r_max the largest adjacent weight
    /// ratio.
    pub fn rotating(triple: GelfandTriple, kappa: f64, nu: f64, horizon: f64) -> Result<FormFamily, FormError> {
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(FormError::InvalidArgument(format!("kappa = {kappa} outside (0, 1)")));
        }
        let m = triple.dim();
        let s = triple.reference_matrix();
        let gamma = triple.gamma();
        let w = triple.weights().to_vec();
        let r_max = w
            .windows(2)
            .map(|p| p[1] / p[0])
            .fold(1.0f64, f64::max);
        let q = 0.25 * (1.0 + gamma);
        // Precompute the two weighted skew generators.
        let mut z1 = Array2::<C64>::zeros((m, m));
        let mut z2 = Array2::<C64>::zeros((m, m));
        for k in 0..m.saturating_sub(1) {
            let wgt = (w[k].powf(q)) * (w[k + 1].powf(q));
            z1[[k, k + 1]] = C64::new(wgt, 0.0);
            z1[[k + 1, k]] = C64::new(-wgt, 0.0);
            z2[[k, k + 1]] = C64::new(0.0, wgt);
            z2[[k + 1, k]] = C64::new(0.0, wgt);
        }
        let c_omega = 4.0 * kappa * nu * r_max.powf(0.25 * (1.0 - gamma));
        let modulus = Modulus::scaled_power(c_omega, 1.0, horizon)?;
        let assemble: AssembleFn = Arc::new(move |t: f64| {
            let (c0, s0) = ((nu * t).cos(), (nu * t).sin());
            let mut a = s.clone();
            a.scaled_add(C64::new(kappa * c0, 0.0), &z1);
            a.scaled_add(C64::new(kappa * s0, 0.0), &z2);
            a
        });
        FormFamily::new(triple, assemble, 1.0 + 4.0 * kappa, 1.0, modulus, horizon, "rotating")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use ndarray::array;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn v_form_has_unit_constants() {
        let triple = GelfandTriple::new(vec![1.0, 4.0, 9.0], 0.5).unwrap();
        let fam = families::constant_v_form(triple, 1.0);
        let (m_hat, alpha_hat) = estimate_constants(&fam, 11, 3, 1).unwrap();
        assert!((m_hat - 1.0).abs() < 1e-12);
        assert!((alpha_hat - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_constants_match_eigenvalues() {
        let triple = GelfandTriple::new(vec![1.0, 1.0], 0.0).unwrap();
        let fam = families::constant_diag(triple, vec![2.0, 3.0], 1.0).unwrap();
        let (m_hat, alpha_hat) = estimate_constants(&fam, 5, 2, 1).unwrap();
        assert!((m_hat - 3.0).abs() < 1e-12);
        assert!((alpha_hat - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sinusoidal_scalar_constants() {
        // a(t, u, v) = (2 + sin t)(u, v)_V over a full period: extrema 3 and 1.
        let horizon = 2.0 * std::f64::consts::PI;
        let triple = GelfandTriple::new(vec![1.0, 4.0], 0.0).unwrap();
        let s = triple.reference_matrix();
        let fam = FormFamily::new(
            triple,
            Arc::new(move |t: f64| s.mapv(|z| z * c(2.0 + t.sin(), 0.0))),
            3.0,
            1.0,
            Modulus::scaled_power(1.0, 1.0, horizon).unwrap(),
            horizon,
            "sinusoidal",
        )
        .unwrap();
        // 101 nodes include t = pi/2 and t = 3pi/2 where the extrema sit.
        let (m_hat, alpha_hat) = estimate_constants(&fam, 101, 1, 9).unwrap();
        assert!((m_hat - 3.0).abs() < 1e-9, "m_hat = {m_hat}");
        assert!((alpha_hat - 1.0).abs() < 1e-9, "alpha_hat = {alpha_hat}");
    }

    #[test]
    fn declared_violation_is_caught() {
        let triple = GelfandTriple::new(vec![1.0, 1.0], 0.0).unwrap();
        let a = array![[c(5.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
        let fam = FormFamily::new(
            triple,
            Arc::new(move |_| a.clone()),
            2.0, // declared M too small
            0.5,
            Modulus::zero(1.0),
            1.0,
            "bad",
        )
        .unwrap();
        assert!(matches!(
            estimate_constants(&fam, 3, 1, 1),
            Err(FormError::DeclaredConstantViolated { .. })
        ));
    }

    #[test]
    fn dini_constant_family_ratio_zero() {
        let triple = GelfandTriple::new(vec![1.0, 4.0], 0.5).unwrap();
        let fam = families::constant_v_form(triple, 1.0);
        let rep = verify_dini(&fam, 200, 5).unwrap();
        assert_eq!(rep.max_ratio, 0.0);
    }

    #[test]
    fn dini_affine_ratio_is_one() {
        let triple = GelfandTriple::new(vec![1.0, 4.0, 25.0], 0.5).unwrap();
        let fam = families::affine(triple, 1.0);
        let rep = verify_dini(&fam, 500, 11).unwrap();
        assert!((rep.max_ratio - 1.0).abs() < 1e-9, "ratio = {}", rep.max_ratio);
    }

    #[test]
    fn dini_hoelder_ratio_below_one() {
        let triple = GelfandTriple::new(vec![1.0, 4.0, 25.0], 0.5).unwrap();
        let fam = families::hoelder(triple, 0.75, 1.0).unwrap();
        let rep = verify_dini(&fam, 500, 13).unwrap();
        assert!(rep.max_ratio <= 1.0 + 1e-9);
    }

    #[test]
    fn rotating_family_passes_checkers() {
        let triple = GelfandTriple::laplacian_1d(6, 0.5).unwrap();
        let fam = families::rotating(triple, 0.1, std::f64::consts::PI, 1.0).unwrap();
        let (m_hat, alpha_hat) = estimate_constants(&fam, 21, 2, 3).unwrap();
        assert!(m_hat <= fam.bound() + 1e-9);
        assert!(alpha_hat >= fam.coercivity() - 1e-9);
        // Skew perturbation leaves the coercivity at exactly 1.
        assert!((alpha_hat - 1.0).abs() < 1e-10);
        let rep = verify_dini(&fam, 400, 17).unwrap();
        assert!(rep.max_ratio <= 1.0 + 1e-9);
    }

    #[test]
    fn dini_integral_closed_forms() {
        // ∫_0^{0.02} s^{3/4} / s^{5/4} ds = 2 sqrt(0.02).
        let m = Modulus::power(0.75, 1.0).unwrap();
        let v = dini_integral(&m, 0.5, 0.0, 0.02).unwrap();
        assert!((v - 2.0 * 0.02f64.sqrt()).abs() < 1e-9, "v = {v}");

        let z = Modulus::zero(1.0);
        assert_eq!(dini_integral(&z, 0.5, 0.0, 1.0).unwrap(), 0.0);

        // ω(t) = t, γ = 0: ∫_0^x ds = x.
        let lin = Modulus::power(1.0, 1.0).unwrap();
        let x = 0.37;
        assert!((dini_integral(&lin, 0.0, 0.0, x).unwrap() - x).abs() < 1e-10);

        // Divergence detection.
        let m2 = Modulus::power(0.2, 1.0).unwrap();
        assert!(matches!(
            dini_integral(&m2, 0.5, 0.0, 1.0),
            Err(FormError::DivergentIntegral { .. })
        ));
    }

    #[test]
    fn dini_integral_beyond_horizon_uses_extension() {
        // On [T, 2T] the modulus is clamped at ω(T); compare closed form with
        // a direct quadrature of the clamped integrand.
        let m = Modulus::power(0.75, 1.0).unwrap();
        let closed = dini_integral(&m, 0.5, 0.5, 2.0).unwrap();
        let f = |s: f64| m.eval(s) * s.powf(-1.25);
        let q = quad::integrate_adaptive(&f, 0.5, 2.0, 1e-11).unwrap();
        assert!((closed - q).abs() < 1e-9);
    }

    #[test]
    fn sup_ratio_cases() {
        let m = Modulus::power(0.75, 1.0).unwrap();
        assert!((sup_ratio(&m, 0.5).unwrap() - 1.0).abs() < 1e-12);
        let half = Modulus::power(0.25, 1.0).unwrap();
        assert!((sup_ratio(&half, 0.5).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(sup_ratio(&Modulus::zero(1.0), 0.5).unwrap(), 0.0);
        let sub = Modulus::power(0.2, 1.0).unwrap();
        assert!(matches!(sup_ratio(&sub, 0.5), Err(FormError::Unbounded { .. })));
    }

    #[test]
    fn tabulated_modulus_interpolates() {
        let m = Modulus::tabulated(vec![(0.0, 0.0), (0.5, 1.0), (1.0, 1.5)], 1.0).unwrap();
        assert_eq!(m.eval(0.25), 0.5);
        assert_eq!(m.eval(0.75), 1.25);
        assert_eq!(m.eval(1.7), 1.5); // extension
        // ω(t)/t^{1/4} is increasing on both segments, sup = 1.5 at t = 1.
        let sr = sup_ratio(&m, 0.5).unwrap();
        assert!((sr - 1.5).abs() < 1e-6, "sr = {sr}");
    }

    #[test]
    fn relative_continuity_cases() {
        let triple = GelfandTriple::new(vec![1.0, 4.0], 0.0).unwrap();
        let fam = families::constant_v_form(triple.clone(), 1.0);
        let eta = relative_continuity_profile(&fam, 0.5, 0.5, 20, 7).unwrap();
        assert_eq!(eta, 0.0);

        // A(t) = (1 + t) I on identity weights: with eps = 0, delta = 1 the
        // ratio ‖x‖_{V'} / ‖x‖ = 1 is approached as |t - s| -> 1.
        let t2 = GelfandTriple::new(vec![1.0, 1.0], 0.0).unwrap();
        let eye = linalg::identity(2);
        let fam2 = FormFamily::new(
            t2,
            Arc::new(move |t: f64| eye.mapv(|z| z * c(1.0 + t, 0.0))),
            2.0,
            1.0,
            Modulus::scaled_power(1.0, 1.0, 1.0).unwrap(),
            1.0,
            "affine-eye",
        )
        .unwrap();
        let eta2 = relative_continuity_profile(&fam2, 0.0, 1.0, 400, 21).unwrap();
        assert!(eta2 > 0.9 && eta2 <= 1.0 + 1e-9, "eta2 = {eta2}");

        // With eps = C δ the V-term absorbs the whole increment.
        let triple3 = GelfandTriple::new(vec![1.0, 4.0], 0.0).unwrap();
        let fam3 = families::affine(triple3.clone(), 1.0);
        let c_a0 = fam3
            .triple()
            .op_norm(&fam3.matrix(0.0).view(), Scale::V, Scale::VPrime)
            .unwrap();
        let delta = 0.3;
        let eta3 = relative_continuity_profile(&fam3, c_a0 * delta, delta, 100, 23).unwrap();
        assert!(eta3 <= 1e-9, "eta3 = {eta3}");
    }

    #[test]
    fn lax_milgram_inverse_bound() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let triple = GelfandTriple::laplacian_1d(5, 0.5).unwrap();
        for fam in [
            families::affine(triple.clone(), 1.0),
            families::hoelder(triple.clone(), 0.75, 1.0).unwrap(),
            families::rotating(triple.clone(), 0.1, 1.0, 1.0).unwrap(),
        ] {
            for _ in 0..100 {
                let t = rng.gen::<f64>();
                let a = fam.matrix(t);
                let inv = linalg::inverse(&a.view()).unwrap();
                let n = triple.op_norm(&inv.view(), Scale::VPrime, Scale::V).unwrap();
                assert!(
                    n <= 1.0 / fam.coercivity() + 1e-9,
                    "family {} at t = {t}: {n}",
                    fam.name()
                );
            }
        }
    }

    proptest! {
        #[test]
        fn dini_integral_is_additive(split in 0.05f64..0.95) {
            let m = Modulus::power(0.75, 1.0).unwrap();
            let total = dini_integral(&m, 0.5, 0.0, 1.0).unwrap();
            let left = dini_integral(&m, 0.5, 0.0, split).unwrap();
            let right = dini_integral(&m, 0.5, split, 1.0).unwrap();
            prop_assert!((left + right - total).abs() < 1e-9);
        }
    }
}
