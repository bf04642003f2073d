//! Decomposition of the discretized solution into a frozen-coefficient
//! semigroup term, a Duhamel term, and a commutator-type Volterra term:
//!
//!   u_Λ(t) = e^{−t A_Λ(t)} u₀
//!          + ∫₀ᵗ e^{−(t−s) A_Λ(t)} f(s) ds
//!          + ∫₀ᵗ e^{−(t−s) A_Λ(t)} (A_Λ(t) − A_Λ(s)) u_Λ(s) ds.
//!
//! The convolution integrals are evaluated by product quadrature on the
//! trajectory's cells (8-point Gauss–Legendre), cross-checked against the
//! 4-point rule, with all exponentials of the frozen operator assembled from
//! one per-cell factor per outer time.

use super::solver::Trajectory;
use super::SolveError;
use crate::discretize::InterpolatedFamily;
use crate::forms::SourceData;
use crate::linalg::{self, C64};
use crate::quad::gauss_legendre;
use crate::spaces::{GelfandTriple, Scale};
use ndarray::{Array1, Array2};
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct Decomposition {
    /// Cell-endpoint times of the trajectory grid.
    pub times: Vec<f64>,
    pub semigroup_term: Vec<Array1<C64>>,
    pub duhamel_term: Vec<Array1<C64>>,
    pub commutator_term: Vec<Array1<C64>>,
    /// sup over the grid of ‖u_Λ − (u₁ + u₂ + u₃)‖_H.
    pub residual: f64,
    /// sup deviation between the 8- and 4-point product quadrature.
    pub quad_deviation: f64,
}

struct RowTerms {
    u1: Array1<C64>,
    u2: Array1<C64>,
    u3: Array1<C64>,
    deviation: f64,
}

fn row_terms(
    fam: &InterpolatedFamily,
    data: &SourceData,
    traj: &Trajectory,
    i: usize,
) -> Result<RowTerms, SolveError> {
    let m = fam.dim();
    let grid = traj.grid();
    let w = grid.cell_width();
    let t_i = grid.endpoint(i);
    let frozen = fam.eval(t_i)?;
    let u1 = linalg::expm(&frozen.mapv(|z| z * C64::new(-t_i, 0.0)).view())?.dot(&data.u0);
    if i == 0 {
        return Ok(RowTerms {
            u1,
            u2: Array1::zeros(m),
            u3: Array1::zeros(m),
            deviation: 0.0,
        });
    }
    let step_factor = linalg::expm(&frozen.mapv(|z| z * C64::new(-w, 0.0)).view())?;
    // Offset exponentials for both quadrature orders, shared across cells.
    let prep = |order: usize| -> Result<(Vec<f64>, Vec<Array2<C64>>), SolveError> {
        let (nodes, weights) = gauss_legendre(order);
        let mut mats = Vec::with_capacity(order);
        let mut wts = Vec::with_capacity(order);
        for (x, wq) in nodes.iter().zip(weights.iter()) {
            let xi = 0.5 * (x + 1.0) * w;
            mats.push(linalg::expm(&frozen.mapv(|z| z * C64::new(-(w - xi), 0.0)).view())?);
            wts.push(0.5 * w * wq);
        }
        Ok((wts, mats))
    };
    let (w8, g8) = prep(8)?;
    let (w4, g4) = prep(4)?;

    let mut u2_8 = Array1::<C64>::zeros(m);
    let mut u3_8 = Array1::<C64>::zeros(m);
    let mut u2_4 = Array1::<C64>::zeros(m);
    let mut u3_4 = Array1::<C64>::zeros(m);
    let mut chain = linalg::identity(m);
    for j in (0..i).rev() {
        for q in 0..8 {
            let flat = j * 8 + q;
            let s = grid.gauss8_node(flat);
            let f_s = data.force(s);
            let u_s = &traj.gl8_values()[flat];
            let mut comm = frozen.dot(u_s);
            comm -= &fam.apply(s, &u_s.view())?;
            let ef = chain.dot(&g8[q].dot(&f_s));
            let ec = chain.dot(&g8[q].dot(&comm));
            u2_8.scaled_add(C64::new(w8[q], 0.0), &ef);
            u3_8.scaled_add(C64::new(w8[q], 0.0), &ec);
        }
        for q in 0..4 {
            let flat = j * 4 + q;
            let s = grid.gauss4_node(flat);
            let f_s = data.force(s);
            let u_s = &traj.gl4_values()[flat];
            let mut comm = frozen.dot(u_s);
            comm -= &fam.apply(s, &u_s.view())?;
            let ef = chain.dot(&g4[q].dot(&f_s));
            let ec = chain.dot(&g4[q].dot(&comm));
            u2_4.scaled_add(C64::new(w4[q], 0.0), &ef);
            u3_4.scaled_add(C64::new(w4[q], 0.0), &ec);
        }
        if j > 0 {
            chain = chain.dot(&step_factor);
        }
    }
    let dev2 = linalg::vec_norm(&(&u2_8 - &u2_4).view());
    let dev3 = linalg::vec_norm(&(&u3_8 - &u3_4).view());
    Ok(RowTerms { u1, u2: u2_8, u3: u3_8, deviation: dev2.max(dev3) })
}

/// Evaluate the three-term decomposition of `traj` (a solution of the
/// discretized problem for `fam` and `data`) on the trajectory's endpoint
/// grid. `quad_tol` bounds the admissible deviation between the 8- and
/// 4-point product quadratures.
pub fn decompose(
    fam: &InterpolatedFamily,
    data: &SourceData,
    traj: &Trajectory,
    triple: &GelfandTriple,
    quad_tol: f64,
) -> Result<Decomposition, SolveError> {
    let n = traj.grid().n_cells();
    let rows: Vec<RowTerms> = (0..=n)
        .into_par_iter()
        .map(|i| row_terms(fam, data, traj, i))
        .collect::<Result<_, _>>()?;
    let mut deviation = 0.0f64;
    let mut residual = 0.0f64;
    let mut times = Vec::with_capacity(n + 1);
    let mut u1 = Vec::with_capacity(n + 1);
    let mut u2 = Vec::with_capacity(n + 1);
    let mut u3 = Vec::with_capacity(n + 1);
    for (i, row) in rows.into_iter().enumerate() {
        deviation = deviation.max(row.deviation);
        let sum = &row.u1 + &row.u2 + &row.u3;
        let diff = &traj.endpoint_values()[i] - &sum;
        residual = residual.max(triple.norm(&diff.view(), Scale::H)?);
        times.push(traj.grid().endpoint(i));
        u1.push(row.u1);
        u2.push(row.u2);
        u3.push(row.u3);
    }
    if deviation > quad_tol {
        return Err(SolveError::QuadratureNotConverged(format!(
            "product quadrature deviation {deviation:.3e} exceeds {quad_tol:.3e}"
        )));
    }
    Ok(Decomposition {
        times,
        semigroup_term: u1,
        duhamel_term: u2,
        commutator_term: u3,
        residual,
        quad_deviation: deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::super::solver::{solve_family, SampleGrid, SolveOptions};
    use super::*;
    use crate::discretize::Subdivision;
    use crate::forms::{families, SourceData};
    use crate::spaces::GelfandTriple;
    use ndarray::array;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn constant_family_homogeneous() {
        let triple = GelfandTriple::new(vec![1.0, 2.0, 5.0], 0.5).unwrap();
        let fam = families::constant_v_form(triple.clone(), 1.0);
        let interp =
            InterpolatedFamily::build(&fam, Subdivision::uniform(1.0, 9).unwrap(), 8).unwrap();
        let data = SourceData::homogeneous(array![c(1.0), c(0.5), c(-0.25)]);
        let grid = SampleGrid::per_unit(1.0, 20);
        let traj = solve_family(&interp, &data, &grid, &SolveOptions::with_tol(1e-11)).unwrap();
        let dec = decompose(&interp, &data, &traj, &triple, 1e-6).unwrap();
        assert!(dec.residual <= 1e-9, "residual = {:.3e}", dec.residual);
        for (u2, u3) in dec.duhamel_term.iter().zip(dec.commutator_term.iter()) {
            assert!(linalg::vec_norm(&u2.view()) < 1e-12);
            assert!(linalg::vec_norm(&u3.view()) < 1e-12);
        }
        // u1 matches the matrix exponential directly.
        let s = triple.reference_matrix();
        for (i, t) in dec.times.iter().enumerate() {
            let e = linalg::expm(&s.mapv(|z| z * c(-t)).view()).unwrap().dot(&data.u0);
            let err = linalg::vec_norm(&(&e - &dec.semigroup_term[i]).view());
            assert!(err < 1e-12);
        }
    }

    #[test]
    fn constant_family_with_constant_force() {
        // u2(t) = A^{-1}(I − e^{−tA}) c and u3 = 0 for a constant family.
        let triple = GelfandTriple::new(vec![1.0, 3.0], 0.0).unwrap();
        let fam = families::constant_v_form(triple.clone(), 1.0);
        let interp =
            InterpolatedFamily::build(&fam, Subdivision::uniform(1.0, 4).unwrap(), 8).unwrap();
        let force = array![c(1.0), c(-2.0)];
        let data = SourceData::constant_force(array![c(0.3), c(0.1)], force.clone());
        let grid = SampleGrid::per_unit(1.0, 16);
        let traj = solve_family(&interp, &data, &grid, &SolveOptions::with_tol(1e-11)).unwrap();
        let dec = decompose(&interp, &data, &traj, &triple, 1e-6).unwrap();
        assert!(dec.residual <= 1e-8, "residual = {:.3e}", dec.residual);
        let s = triple.reference_matrix();
        let s_inv = linalg::inverse(&s.view()).unwrap();
        for (i, t) in dec.times.iter().enumerate() {
            let e = linalg::expm(&s.mapv(|z| z * c(-t)).view()).unwrap();
            let expect = s_inv.dot(&(&linalg::identity(2) - &e).dot(&force));
            let err = linalg::vec_norm(&(&expect - &dec.duhamel_term[i]).view());
            assert!(err < 1e-9, "t = {t}: err = {err:.3e}");
            assert!(linalg::vec_norm(&dec.commutator_term[i].view()) < 1e-12);
        }
    }

    #[test]
    fn scalar_affine_semigroup_term_and_balance() {
        // For the interpolated scalar affine family, u1(t) = e^{−t(1+t+h/2)}
        // away from the last cell, and u3 must equal u_Λ − u1 with f = 0.
        let triple = GelfandTriple::new(vec![1.0], 0.0).unwrap();
        let fam = families::affine(triple.clone(), 1.0);
        let sub = Subdivision::uniform(1.0, 9).unwrap();
        let h = sub.mesh();
        let interp = InterpolatedFamily::build(&fam, sub, 8).unwrap();
        let data = SourceData::homogeneous(array![c(1.0)]);
        let grid = SampleGrid::per_unit(1.0, 30);
        let traj = solve_family(&interp, &data, &grid, &SolveOptions::with_tol(1e-12)).unwrap();
        let dec = decompose(&interp, &data, &traj, &triple, 1e-6).unwrap();
        assert!(dec.residual <= 1e-9, "residual = {:.3e}", dec.residual);
        for (i, &t) in dec.times.iter().enumerate() {
            if t <= 0.9 - 1e-9 {
                let expect = (-t * (1.0 + t + 0.5 * h)).exp();
                assert!((dec.semigroup_term[i][0].re - expect).abs() < 1e-12);
            }
            let balance =
                traj.endpoint_values()[i][0] - dec.semigroup_term[i][0] - dec.commutator_term[i][0];
            assert!(balance.norm() < 1e-9);
        }
    }
}
