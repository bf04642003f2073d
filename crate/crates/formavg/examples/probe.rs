//! Quick timing probe for solver behavior on the stiff spectral family.

use formavg::discretize::{InterpolatedFamily, Subdivision};
use formavg::evolve::{solve_family, solve_reference, Method, SampleGrid, SolveOptions};
use formavg::forms::{families, SourceData};
use formavg::linalg::C64;
use formavg::{GelfandTriple, Scale};
use ndarray::Array1;
use std::time::Instant;

fn main() {
    let m = 64;
    let triple = GelfandTriple::laplacian_1d(m, 0.5).unwrap();
    let form = families::hoelder(triple.clone(), 0.75, 1.0).unwrap();
    // Flat spectral profiles: equal V-energy per mode for u0, equal H-energy
    // per mode for f, alternating phases.
    let mut u0 = Array1::from_shape_fn(m, |k| {
        let phase = if k % 2 == 0 { 1.0 } else { -1.0 };
        C64::new(phase / triple.weights()[k].sqrt(), 0.0)
    });
    let nrm = triple.norm(&u0.view(), Scale::V).unwrap();
    u0.mapv_inplace(|z| z / C64::new(nrm, 0.0));
    let mut g = Array1::from_shape_fn(m, |k| C64::new(if k % 3 == 0 { -1.0 } else { 1.0 }, 0.0));
    let gn = triple.norm(&g.view(), Scale::H).unwrap();
    g.mapv_inplace(|z| z / C64::new(gn, 0.0));
    let data = SourceData::constant_force(u0, g);

    let grid = SampleGrid::with_cells(1.0, 64);
    let opts = SolveOptions { tol: 1e-7, method: Method::ImplicitTrapezoid, max_steps: 2_000_000 };
    let ref_opts = SolveOptions { tol: 1e-8, method: Method::ImplicitTrapezoid, max_steps: 2_000_000 };
    let t0 = Instant::now();
    let reference = solve_reference(&form, &data, &grid, &ref_opts).unwrap();
    println!("reference: steps = {}, {:.2}s", reference.meta().steps, t0.elapsed().as_secs_f64());
    for n in [7usize, 15, 31, 63, 127] {
        let t1 = Instant::now();
        let sub = Subdivision::uniform(1.0, n).unwrap();
        let mesh = sub.mesh();
        let fam = InterpolatedFamily::build(&form, sub, 8).unwrap();
        let traj = solve_family(&fam, &data, &grid, &opts).unwrap();
        let err = formavg::evolve::mr_error(&traj, &reference, &triple).unwrap();
        let bracket =
            formavg::discretize::bracket_bound(form.modulus(), form.gamma(), mesh).unwrap();
        println!(
            "n = {n:4}: mesh = {mesh:.4}, mr = {:.6e}, bracket = {:.4e}, ratio = {:.4e}, {:.2}s",
            err.mr,
            bracket,
            err.mr / bracket,
            t1.elapsed().as_secs_f64()
        );
    }
}
