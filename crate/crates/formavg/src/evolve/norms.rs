//! Maximal-regularity and sup norms of trajectories.

use super::solver::Trajectory;
use super::SolveError;
use crate::linalg::{pairwise_sum, C64};
use crate::quad::gauss_legendre;
use crate::spaces::{GelfandTriple, Scale};
use ndarray::Array1;
use std::io::Write;

/// Norms of a trajectory (or of a difference of two trajectories): the
/// L²(0,T;V) part, the H¹(0,T;H) part, their sum (the maximal-regularity
/// norm at p = 2), and the grid suprema in V and H.
#[derive(Debug, Clone, Copy)]
pub struct NormReport {
    pub l2v: f64,
    pub h1h: f64,
    pub mr: f64,
    pub c0v: f64,
    pub c0h: f64,
}

fn report_from_samples(
    triple: &GelfandTriple,
    cell_width: f64,
    gl4_samples: &[(Array1<C64>, Array1<C64>)],
    all_values: &[Array1<C64>],
) -> Result<NormReport, SolveError> {
    let (_, w4) = gauss_legendre(4);
    let half = 0.5 * cell_width;
    let mut l2v_terms = Vec::with_capacity(gl4_samples.len());
    let mut l2h_terms = Vec::with_capacity(gl4_samples.len());
    let mut dh_terms = Vec::with_capacity(gl4_samples.len());
    for (i, (v, d)) in gl4_samples.iter().enumerate() {
        let w = half * w4[i % 4];
        let nv = triple.norm(&v.view(), Scale::V)?;
        let nh = triple.norm(&v.view(), Scale::H)?;
        let nd = triple.norm(&d.view(), Scale::H)?;
        l2v_terms.push(w * nv * nv);
        l2h_terms.push(w * nh * nh);
        dh_terms.push(w * nd * nd);
    }
    let l2v = pairwise_sum(&l2v_terms).sqrt();
    let h1h = (pairwise_sum(&l2h_terms) + pairwise_sum(&dh_terms)).sqrt();
    let mut c0v = 0.0f64;
    let mut c0h = 0.0f64;
    for v in all_values {
        c0v = c0v.max(triple.norm(&v.view(), Scale::V)?);
        c0h = c0h.max(triple.norm(&v.view(), Scale::H)?);
    }
    Ok(NormReport { l2v, h1h, mr: l2v + h1h, c0v, c0h })
}

/// Norms of the difference a − b. Both trajectories must have been sampled on
/// the same grid.
pub fn mr_error(a: &Trajectory, b: &Trajectory, triple: &GelfandTriple) -> Result<NormReport, SolveError> {
    if !a.grid().same_as(b.grid()) {
        return Err(SolveError::GridMismatch(format!(
            "{} cells over T = {} vs {} cells over T = {}",
            a.grid().n_cells(),
            a.grid().horizon(),
            b.grid().n_cells(),
            b.grid().horizon()
        )));
    }
    let gl4: Vec<(Array1<C64>, Array1<C64>)> = a
        .gl4_values()
        .iter()
        .zip(b.gl4_values())
        .zip(a.gl4_derivs().iter().zip(b.gl4_derivs()))
        .map(|((va, vb), (da, db))| (va - vb, da - db))
        .collect();
    let mut all: Vec<Array1<C64>> = Vec::new();
    all.extend(a.endpoint_values().iter().zip(b.endpoint_values()).map(|(x, y)| x - y));
    all.extend(a.gl4_values().iter().zip(b.gl4_values()).map(|(x, y)| x - y));
    all.extend(a.gl8_values().iter().zip(b.gl8_values()).map(|(x, y)| x - y));
    report_from_samples(triple, a.grid().cell_width(), &gl4, &all)
}

/// Norms of the trajectory itself.
pub fn norm_report(a: &Trajectory, triple: &GelfandTriple) -> Result<NormReport, SolveError> {
    let gl4: Vec<(Array1<C64>, Array1<C64>)> = a
        .gl4_values()
        .iter()
        .zip(a.gl4_derivs())
        .map(|(v, d)| (v.clone(), d.clone()))
        .collect();
    let mut all: Vec<Array1<C64>> = Vec::new();
    all.extend(a.endpoint_values().iter().cloned());
    all.extend(a.gl4_values().iter().cloned());
    all.extend(a.gl8_values().iter().cloned());
    report_from_samples(triple, a.grid().cell_width(), &gl4, &all)
}

/// CSV export: one row per sample, columns t, Re/Im of each coordinate of u,
/// then Re/Im of each coordinate of u̇.
pub fn write_csv<W: Write>(traj: &Trajectory, out: &mut W) -> std::io::Result<()> {
    let m = traj.dim();
    write!(out, "t")?;
    for k in 0..m {
        write!(out, ",re_u{k},im_u{k}")?;
    }
    for k in 0..m {
        write!(out, ",re_du{k},im_du{k}")?;
    }
    writeln!(out)?;
    for (t, u, du) in traj.samples() {
        write!(out, "{t:.16e}")?;
        for z in u.iter() {
            write!(out, ",{:.16e},{:.16e}", z.re, z.im)?;
        }
        for z in du.iter() {
            write!(out, ",{:.16e},{:.16e}", z.re, z.im)?;
        }
        writeln!(out)?;
    }
    Ok(())
}
