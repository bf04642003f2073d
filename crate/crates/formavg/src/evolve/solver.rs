//! Adaptive integrators for the linear Cauchy problems, with forced sample
//! grids: an embedded Dormand–Prince 5(4) pair for the nonstiff regime and an
//! adaptive implicit trapezoidal method (step-doubling error control, direct
//! linear solves) as the stiff fallback.

use super::SolveError;
use crate::discretize::InterpolatedFamily;
use crate::forms::{FormFamily, SourceData};
use crate::linalg::{self, C64};
use crate::quad::gauss_legendre;
use ndarray::{Array1, Array2, ArrayView1};

/// Linear non-autonomous ODE u̇ = f(t) − A(t) u in coordinates.
pub trait LinearOde: Send + Sync {
    fn dim(&self) -> usize;
    /// A(t).
    fn matrix(&self, t: f64) -> Array2<C64>;
    /// f(t).
    fn force(&self, t: f64) -> Array1<C64>;
    /// f(t) − A(t) u. The default goes through `matrix`, implementors can
    /// avoid materializing A(t).
    fn rhs(&self, t: f64, u: &ArrayView1<C64>) -> Array1<C64> {
        let mut out = self.force(t);
        let au = self.matrix(t).dot(u);
        out -= &au;
        out
    }
}

/// The exact family A(t) with its source data.
pub struct FormOde<'a> {
    pub form: &'a FormFamily,
    pub data: &'a SourceData,
}

impl LinearOde for FormOde<'_> {
    fn dim(&self) -> usize {
        self.form.dim()
    }
    fn matrix(&self, t: f64) -> Array2<C64> {
        self.form.matrix(t)
    }
    fn force(&self, t: f64) -> Array1<C64> {
        self.data.force(t)
    }
}

/// The interpolated family A_Λ(t) with its source data.
pub struct InterpOde<'a> {
    pub fam: &'a InterpolatedFamily,
    pub data: &'a SourceData,
}

impl LinearOde for InterpOde<'_> {
    fn dim(&self) -> usize {
        self.fam.dim()
    }
    fn matrix(&self, t: f64) -> Array2<C64> {
        self.fam.eval(t).expect("t within horizon")
    }
    fn force(&self, t: f64) -> Array1<C64> {
        self.data.force(t)
    }
    fn rhs(&self, t: f64, u: &ArrayView1<C64>) -> Array1<C64> {
        let mut out = self.data.force(t);
        let au = self.fam.apply(t, u).expect("t within horizon");
        out -= &au;
        out
    }
}

/// Constant coefficient matrix.
pub struct FrozenOde {
    pub a: Array2<C64>,
    pub data: SourceData,
}

impl LinearOde for FrozenOde {
    fn dim(&self) -> usize {
        self.a.nrows()
    }
    fn matrix(&self, _t: f64) -> Array2<C64> {
        self.a.clone()
    }
    fn force(&self, t: f64) -> Array1<C64> {
        self.data.force(t)
    }
}

const GL4: usize = 4;
const GL8: usize = 8;

/// Output grid: uniform cells over [0, T], each carrying its right endpoint
/// plus the interior 4- and 8-point Gauss–Legendre nodes.
#[derive(Debug, Clone)]
pub struct SampleGrid {
    horizon: f64,
    n_cells: usize,
}

#[derive(Debug, Clone, Copy)]
pub(super) enum Slot {
    Endpoint(usize),
    Gauss4(usize),
    Gauss8(usize),
}

impl SampleGrid {
    pub fn with_cells(horizon: f64, n_cells: usize) -> Self {
        assert!(horizon > 0.0 && n_cells >= 1);
        Self { horizon, n_cells }
    }

    /// `density` cells per unit of time.
    pub fn per_unit(horizon: f64, density: usize) -> Self {
        let n = ((density as f64) * horizon).ceil().max(1.0) as usize;
        Self::with_cells(horizon, n)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn cell_width(&self) -> f64 {
        self.horizon / self.n_cells as f64
    }

    pub fn endpoint(&self, i: usize) -> f64 {
        if i == self.n_cells {
            self.horizon
        } else {
            self.horizon * i as f64 / self.n_cells as f64
        }
    }

    pub fn endpoints(&self) -> Vec<f64> {
        (0..=self.n_cells).map(|i| self.endpoint(i)).collect()
    }

    fn unit_nodes(order: usize) -> Vec<f64> {
        gauss_legendre(order).0.iter().map(|x| 0.5 * (x + 1.0)).collect()
    }

    pub fn gauss4_node(&self, flat: usize) -> f64 {
        let cell = flat / GL4;
        let q = flat % GL4;
        self.endpoint(cell) + Self::unit_nodes(GL4)[q] * self.cell_width()
    }

    pub fn gauss8_node(&self, flat: usize) -> f64 {
        let cell = flat / GL8;
        let q = flat % GL8;
        self.endpoint(cell) + Self::unit_nodes(GL8)[q] * self.cell_width()
    }

    pub fn same_as(&self, other: &SampleGrid) -> bool {
        self.n_cells == other.n_cells
            && (self.horizon - other.horizon).abs() <= 1e-12 * self.horizon.max(other.horizon)
    }

    /// All forced sample times after t = 0, in increasing order.
    pub(super) fn schedule(&self) -> Vec<(f64, Slot)> {
        let u4 = Self::unit_nodes(GL4);
        let u8 = Self::unit_nodes(GL8);
        let w = self.cell_width();
        let mut out = Vec::with_capacity(self.n_cells * (GL4 + GL8 + 1));
        for cell in 0..self.n_cells {
            let a = self.endpoint(cell);
            let mut interior: Vec<(f64, Slot)> = u4
                .iter()
                .enumerate()
                .map(|(q, x)| (a + x * w, Slot::Gauss4(cell * GL4 + q)))
                .chain(
                    u8.iter()
                        .enumerate()
                        .map(|(q, x)| (a + x * w, Slot::Gauss8(cell * GL8 + q))),
                )
                .collect();
            interior.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
            out.extend(interior);
            out.push((self.endpoint(cell + 1), Slot::Endpoint(cell + 1)));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Explicit Runge–Kutta, falling back to the implicit trapezoidal method
    /// when the step budget is exhausted or the problem looks stiff upfront.
    Auto,
    ExplicitRk,
    ImplicitTrapezoid,
    /// Implicit trapezoidal with a fixed number of substeps between
    /// consecutive forced sample times; no error control. Useful when two
    /// solves must share an identical step sequence.
    TrapezoidFixed { substeps: usize },
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tol: f64,
    pub method: Method,
    pub max_steps: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-10, method: Method::Auto, max_steps: 400_000 }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    /// Reference accuracy for oracle solves.
    pub fn reference() -> Self {
        Self::with_tol(1e-12)
    }
}

#[derive(Debug, Clone)]
pub struct SolveMeta {
    pub tol: f64,
    pub method: &'static str,
    pub steps: usize,
    pub rejected: usize,
    pub family: String,
}

/// Solution samples on a [`SampleGrid`]; values and right-hand-side
/// derivatives at every endpoint and interior Gauss node.
#[derive(Debug, Clone)]
pub struct Trajectory {
    grid: SampleGrid,
    endpoint_values: Vec<Array1<C64>>,
    endpoint_derivs: Vec<Array1<C64>>,
    gl4_values: Vec<Array1<C64>>,
    gl4_derivs: Vec<Array1<C64>>,
    gl8_values: Vec<Array1<C64>>,
    gl8_derivs: Vec<Array1<C64>>,
    meta: SolveMeta,
}

impl Trajectory {
    pub fn grid(&self) -> &SampleGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.endpoint_values[0].len()
    }

    pub fn meta(&self) -> &SolveMeta {
        &self.meta
    }

    pub fn endpoint_values(&self) -> &[Array1<C64>] {
        &self.endpoint_values
    }

    pub fn endpoint_derivs(&self) -> &[Array1<C64>] {
        &self.endpoint_derivs
    }

    pub fn gl4_values(&self) -> &[Array1<C64>] {
        &self.gl4_values
    }

    pub fn gl4_derivs(&self) -> &[Array1<C64>] {
        &self.gl4_derivs
    }

    pub fn gl8_values(&self) -> &[Array1<C64>] {
        &self.gl8_values
    }

    pub fn gl8_derivs(&self) -> &[Array1<C64>] {
        &self.gl8_derivs
    }

    pub fn final_value(&self) -> &Array1<C64> {
        self.endpoint_values.last().unwrap()
    }

    /// All samples (t, u, u̇) in increasing time order.
    pub fn samples(&self) -> Vec<(f64, &Array1<C64>, &Array1<C64>)> {
        let mut out = Vec::new();
        out.push((0.0, &self.endpoint_values[0], &self.endpoint_derivs[0]));
        for (t, slot) in self.grid.schedule() {
            let (v, d) = match slot {
                Slot::Endpoint(i) => (&self.endpoint_values[i], &self.endpoint_derivs[i]),
                Slot::Gauss4(i) => (&self.gl4_values[i], &self.gl4_derivs[i]),
                Slot::Gauss8(i) => (&self.gl8_values[i], &self.gl8_derivs[i]),
            };
            out.push((t, v, d));
        }
        out
    }
}

struct Recorder {
    grid: SampleGrid,
    endpoint_values: Vec<Array1<C64>>,
    endpoint_derivs: Vec<Array1<C64>>,
    gl4_values: Vec<Array1<C64>>,
    gl4_derivs: Vec<Array1<C64>>,
    gl8_values: Vec<Array1<C64>>,
    gl8_derivs: Vec<Array1<C64>>,
}

impl Recorder {
    fn new(grid: &SampleGrid, m: usize) -> Self {
        let zeros = Array1::<C64>::zeros(m);
        Self {
            grid: grid.clone(),
            endpoint_values: vec![zeros.clone(); grid.n_cells + 1],
            endpoint_derivs: vec![zeros.clone(); grid.n_cells + 1],
            gl4_values: vec![zeros.clone(); grid.n_cells * GL4],
            gl4_derivs: vec![zeros.clone(); grid.n_cells * GL4],
            gl8_values: vec![zeros.clone(); grid.n_cells * GL8],
            gl8_derivs: vec![zeros; grid.n_cells * GL8],
        }
    }

    fn record(&mut self, slot: Slot, value: &Array1<C64>, deriv: &Array1<C64>) {
        match slot {
            Slot::Endpoint(i) => {
                self.endpoint_values[i] = value.clone();
                self.endpoint_derivs[i] = deriv.clone();
            }
            Slot::Gauss4(i) => {
                self.gl4_values[i] = value.clone();
                self.gl4_derivs[i] = deriv.clone();
            }
            Slot::Gauss8(i) => {
                self.gl8_values[i] = value.clone();
                self.gl8_derivs[i] = deriv.clone();
            }
        }
    }

    fn finish(self, meta: SolveMeta) -> Trajectory {
        Trajectory {
            grid: self.grid,
            endpoint_values: self.endpoint_values,
            endpoint_derivs: self.endpoint_derivs,
            gl4_values: self.gl4_values,
            gl4_derivs: self.gl4_derivs,
            gl8_values: self.gl8_values,
            gl8_derivs: self.gl8_derivs,
            meta,
        }
    }
}

/// Solve u̇ = f(t) − A(t) u, u(0) = u0, sampling on `grid`.
pub fn solve_ode(
    ode: &dyn LinearOde,
    u0: &ArrayView1<C64>,
    grid: &SampleGrid,
    opts: &SolveOptions,
) -> Result<Trajectory, SolveError> {
    if !(1e-13..=1e-6).contains(&opts.tol) {
        return Err(SolveError::ToleranceOutOfRange(opts.tol));
    }
    match opts.method {
        Method::ExplicitRk => run_rk(ode, u0, grid, opts, "dopri5"),
        Method::ImplicitTrapezoid => run_cn_adaptive(ode, u0, grid, opts),
        Method::TrapezoidFixed { substeps } => run_cn_fixed(ode, u0, grid, opts, substeps),
        Method::Auto => {
            // Cheap stiffness screen: an explicit method needs roughly
            // ‖A‖ · T steps just for stability.
            let a0 = ode.matrix(0.0);
            let stiffness = linalg::one_norm(&a0.view()) * grid.horizon();
            if stiffness > 2e4 {
                return run_cn_adaptive(ode, u0, grid, opts);
            }
            match run_rk(ode, u0, grid, opts, "dopri5(auto)") {
                Err(SolveError::StiffnessBudgetExceeded { .. }) => run_cn_adaptive(ode, u0, grid, opts),
                other => other,
            }
        }
    }
}

/// Solve the discretized problem with the interpolated family.
pub fn solve_family(
    fam: &InterpolatedFamily,
    data: &SourceData,
    grid: &SampleGrid,
    opts: &SolveOptions,
) -> Result<Trajectory, SolveError> {
    let ode = InterpOde { fam, data };
    let mut traj = solve_ode(&ode, &data.u0.view(), grid, opts)?;
    traj.meta.family = format!("{}@mesh={:.6e}", fam.base().name(), fam.mesh());
    Ok(traj)
}

/// Solve the exact problem; the oracle in every error measurement.
pub fn solve_reference(
    form: &FormFamily,
    data: &SourceData,
    grid: &SampleGrid,
    opts: &SolveOptions,
) -> Result<Trajectory, SolveError> {
    let ode = FormOde { form, data };
    let mut traj = solve_ode(&ode, &data.u0.view(), grid, opts)?;
    traj.meta.family = format!("{}(reference)", form.name());
    Ok(traj)
}

fn scaled_rms(err: &Array1<C64>, y0: &Array1<C64>, y1: &Array1<C64>, tol: f64) -> f64 {
    let m = err.len() as f64;
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1.iter()))
        .map(|(e, (a, b))| {
            let scale = tol * (1.0 + a.norm().max(b.norm()));
            (e.norm() / scale).powi(2)
        })
        .sum();
    (sum / m).sqrt()
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 35.0 / 384.0 - 5179.0 / 57600.0;
const E3: f64 = 500.0 / 1113.0 - 7571.0 / 16695.0;
const E4: f64 = 125.0 / 192.0 - 393.0 / 640.0;
const E5: f64 = -2187.0 / 6784.0 + 92097.0 / 339200.0;
const E6: f64 = 11.0 / 84.0 - 187.0 / 2100.0;
const E7: f64 = -1.0 / 40.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

fn run_rk(
    ode: &dyn LinearOde,
    u0: &ArrayView1<C64>,
    grid: &SampleGrid,
    opts: &SolveOptions,
    label: &'static str,
) -> Result<Trajectory, SolveError> {
    let m = ode.dim();
    let mut rec = Recorder::new(grid, m);
    let mut t = 0.0;
    let mut y = u0.to_owned();
    let mut k1 = ode.rhs(t, &y.view());
    rec.record(Slot::Endpoint(0), &y, &k1);

    let schedule = grid.schedule();
    let h_min = 1e-14 * grid.horizon();
    let mut h = (schedule[0].0 * 0.5).max(h_min * 10.0);
    let mut steps = 0usize;
    let mut rejected = 0usize;

    let lc = |x: f64| C64::new(x, 0.0);
    for &(t_target, slot) in &schedule {
        while t < t_target {
            let clamped = h >= t_target - t;
            let hs = if clamped { t_target - t } else { h };
            if hs < h_min {
                return Err(SolveError::StepSizeUnderflow { t, h: hs });
            }
            if steps + rejected > opts.max_steps {
                return Err(SolveError::StiffnessBudgetExceeded { t, steps: steps + rejected });
            }
            let hc = lc(hs);
            let k2 = ode.rhs(t + C2 * hs, &(&y + &(&k1 * (hc * lc(A21)))).view());
            let y3 = &y + &(&k1 * (hc * lc(A31))) + &(&k2 * (hc * lc(A32)));
            let k3 = ode.rhs(t + C3 * hs, &y3.view());
            let y4 = &y + &(&k1 * (hc * lc(A41))) + &(&k2 * (hc * lc(A42))) + &(&k3 * (hc * lc(A43)));
            let k4 = ode.rhs(t + C4 * hs, &y4.view());
            let y5 = &y
                + &(&k1 * (hc * lc(A51)))
                + &(&k2 * (hc * lc(A52)))
                + &(&k3 * (hc * lc(A53)))
                + &(&k4 * (hc * lc(A54)));
            let k5 = ode.rhs(t + C5 * hs, &y5.view());
            let y6 = &y
                + &(&k1 * (hc * lc(A61)))
                + &(&k2 * (hc * lc(A62)))
                + &(&k3 * (hc * lc(A63)))
                + &(&k4 * (hc * lc(A64)))
                + &(&k5 * (hc * lc(A65)));
            let k6 = ode.rhs(t + hs, &y6.view());
            let y_new = &y
                + &(&k1 * (hc * lc(B1)))
                + &(&k3 * (hc * lc(B3)))
                + &(&k4 * (hc * lc(B4)))
                + &(&k5 * (hc * lc(B5)))
                + &(&k6 * (hc * lc(B6)));
            let t_new = if clamped { t_target } else { t + hs };
            let k7 = ode.rhs(t_new, &y_new.view());
            let err_vec = (&k1 * lc(E1)
                + &(&k3 * lc(E3))
                + &(&k4 * lc(E4))
                + &(&k5 * lc(E5))
                + &(&k6 * lc(E6))
                + &(&k7 * lc(E7)))
                * hc;
            let err = scaled_rms(&err_vec, &y, &y_new, opts.tol);
            if err <= 1.0 {
                t = t_new;
                y = y_new;
                k1 = k7; // FSAL
                steps += 1;
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h = (hs * factor).max(h_min);
            } else {
                rejected += 1;
                h = (hs * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)).max(h_min);
            }
        }
        rec.record(slot, &y, &k1);
    }
    Ok(rec.finish(SolveMeta {
        tol: opts.tol,
        method: label,
        steps,
        rejected,
        family: String::new(),
    }))
}

/// One implicit trapezoidal step from (t0, y0, rhs0) to t0 + h.
/// Solves (I + h/2 A(t0+h)) y1 = y0 + h/2 (rhs0 + f(t0+h)).
fn cn_step(
    ode: &dyn LinearOde,
    t0: f64,
    y0: &Array1<C64>,
    rhs0: &Array1<C64>,
    h: f64,
    a_next: &Array2<C64>,
    f_next: &Array1<C64>,
) -> Result<Array1<C64>, SolveError> {
    let _ = (ode, t0);
    let m = y0.len();
    let hh = C64::new(0.5 * h, 0.0);
    let mut rhs = y0.clone();
    rhs.scaled_add(hh, rhs0);
    rhs.scaled_add(hh, f_next);
    if linalg::is_diagonal(&a_next.view()) {
        let mut out = rhs;
        for i in 0..m {
            out[i] /= C64::new(1.0, 0.0) + hh * a_next[[i, i]];
        }
        Ok(out)
    } else {
        let mut sys = a_next.mapv(|z| z * hh);
        for i in 0..m {
            sys[[i, i]] += C64::new(1.0, 0.0);
        }
        Ok(linalg::solve(&sys.view(), &rhs.view())?)
    }
}

fn run_cn_adaptive(
    ode: &dyn LinearOde,
    u0: &ArrayView1<C64>,
    grid: &SampleGrid,
    opts: &SolveOptions,
) -> Result<Trajectory, SolveError> {
    let m = ode.dim();
    let mut rec = Recorder::new(grid, m);
    let mut t = 0.0;
    let mut y = u0.to_owned();
    let mut rhs = ode.rhs(t, &y.view());
    rec.record(Slot::Endpoint(0), &y, &rhs);

    let schedule = grid.schedule();
    let h_min = 1e-14 * grid.horizon();
    let mut h = schedule[0].0 * 0.25;
    let mut steps = 0usize;
    let mut rejected = 0usize;

    for &(t_target, slot) in &schedule {
        while t < t_target {
            let clamped = h >= t_target - t;
            let hs = if clamped { t_target - t } else { h };
            if hs < h_min {
                return Err(SolveError::StepSizeUnderflow { t, h: hs });
            }
            if steps + rejected > opts.max_steps {
                return Err(SolveError::StiffnessBudgetExceeded { t, steps: steps + rejected });
            }
            let t_new = if clamped { t_target } else { t + hs };
            let t_mid = t + 0.5 * hs;
            let a_mid = ode.matrix(t_mid);
            let f_mid = ode.force(t_mid);
            let a_new = ode.matrix(t_new);
            let f_new = ode.force(t_new);
            // Full step and two half steps for the doubling estimate.
            let full = cn_step(ode, t, &y, &rhs, hs, &a_new, &f_new)?;
            let half1 = cn_step(ode, t, &y, &rhs, 0.5 * hs, &a_mid, &f_mid)?;
            let rhs_mid = {
                let mut r = f_mid.clone();
                r -= &a_mid.dot(&half1);
                r
            };
            let half2 = cn_step(ode, t_mid, &half1, &rhs_mid, 0.5 * hs, &a_new, &f_new)?;
            // Step-doubling error estimate, controlled per step; the global
            // error scales like (number of steps) · tol.
            let err_vec = (&half2 - &full).mapv(|z| z / C64::new(3.0, 0.0));
            let err = scaled_rms(&err_vec, &y, &half2, opts.tol);
            if err <= 1.0 {
                t = t_new;
                y = half2;
                rhs = {
                    let mut r = f_new;
                    r -= &a_new.dot(&y);
                    r
                };
                steps += 1;
                let factor = if err == 0.0 { 4.0 } else { (0.9 * err.powf(-1.0 / 3.0)).clamp(0.25, 4.0) };
                h = (hs * factor).max(h_min);
            } else {
                rejected += 1;
                h = (hs * (0.9 * err.powf(-1.0 / 3.0)).clamp(0.1, 0.9)).max(h_min);
            }
        }
        rec.record(slot, &y, &rhs);
    }
    Ok(rec.finish(SolveMeta {
        tol: opts.tol,
        method: "trapezoid",
        steps,
        rejected,
        family: String::new(),
    }))
}

fn run_cn_fixed(
    ode: &dyn LinearOde,
    u0: &ArrayView1<C64>,
    grid: &SampleGrid,
    opts: &SolveOptions,
    substeps: usize,
) -> Result<Trajectory, SolveError> {
    assert!(substeps >= 1);
    let m = ode.dim();
    let mut rec = Recorder::new(grid, m);
    let mut t = 0.0;
    let mut y = u0.to_owned();
    let mut rhs = ode.rhs(t, &y.view());
    rec.record(Slot::Endpoint(0), &y, &rhs);
    let mut steps = 0usize;
    for (t_target, slot) in grid.schedule() {
        let h = (t_target - t) / substeps as f64;
        for k in 0..substeps {
            let t_new = if k + 1 == substeps { t_target } else { t + h };
            let a_new = ode.matrix(t_new);
            let f_new = ode.force(t_new);
            y = cn_step(ode, t, &y, &rhs, t_new - t, &a_new, &f_new)?;
            rhs = {
                let mut r = f_new;
                r -= &a_new.dot(&y);
                r
            };
            t = t_new;
            steps += 1;
        }
        rec.record(slot, &y, &rhs);
    }
    Ok(rec.finish(SolveMeta {
        tol: opts.tol,
        method: "trapezoid-fixed",
        steps,
        rejected: 0,
        family: String::new(),
    }))
}
