//! Dense complex linear algebra kernels used throughout the crate.
//!
//! Everything here operates on small-to-moderate matrices (m ≤ a few hundred),
//! so the implementations favour robustness and verifiable accuracy over
//! asymptotic speed: LU with partial pivoting, cyclic Jacobi for Hermitian
//! eigenproblems, scaling-and-squaring Padé(13) for the matrix exponential
//! (Higham 2005) and a determinant-scaled Denman–Beavers iteration for the
//! principal square root.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is singular to working precision (pivot {pivot:.3e} at step {step})")]
    Singular { step: usize, pivot: f64 },
    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-norm {off:.3e})")]
    JacobiNotConverged { sweeps: usize, off: f64 },
    #[error("matrix square root residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    SqrtResidualTooLarge { residual: f64, tol: f64 },
    #[error("square-root iteration did not converge after {iters} iterations")]
    SqrtNotConverged { iters: usize },
    #[error("power iteration stalled after {iters} iterations (last change {change:.3e})")]
    PowerIterationStalled { iters: usize, change: f64 },
}

pub fn identity(n: usize) -> Array2<C64> {
    Array2::from_diag_elem(n, C64::new(1.0, 0.0))
}

pub fn adjoint(a: &ArrayView2<C64>) -> Array2<C64> {
    let (r, c) = a.dim();
    Array2::from_shape_fn((c, r), |(i, j)| a[[j, i]].conj())
}

pub fn frobenius_norm(a: &ArrayView2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn one_norm(a: &ArrayView2<C64>) -> f64 {
    let (_, c) = a.dim();
    (0..c)
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn vec_norm(v: &ArrayView1<C64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// True if all off-diagonal entries are negligible relative to the diagonal.
pub fn is_diagonal(a: &ArrayView2<C64>) -> bool {
    let n = a.nrows();
    let scale = frobenius_norm(a).max(f64::MIN_POSITIVE);
    let mut off = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                off += a[[i, j]].norm_sqr();
            }
        }
    }
    off.sqrt() <= 1e-14 * scale
}

pub fn is_hermitian(a: &ArrayView2<C64>) -> bool {
    let n = a.nrows();
    let scale = frobenius_norm(a).max(f64::MIN_POSITIVE);
    let mut dev = 0.0;
    for i in 0..n {
        for j in i..n {
            dev += (a[[i, j]] - a[[j, i]].conj()).norm_sqr();
        }
    }
    dev.sqrt() <= 1e-13 * scale
}

/// LU factorization with partial pivoting, kept for repeated solves.
pub struct LuFactors {
    lu: Array2<C64>,
    piv: Vec<usize>,
    det: C64,
}

pub fn lu_factor(a: &ArrayView2<C64>) -> Result<LuFactors, LinalgError> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "lu_factor requires a square matrix");
    let mut lu = a.to_owned();
    let mut piv = Vec::with_capacity(n);
    let mut det = C64::new(1.0, 0.0);
    let scale = one_norm(&lu.view()).max(f64::MIN_POSITIVE);
    for k in 0..n {
        let mut p = k;
        let mut best = lu[[k, k]].norm();
        for i in k + 1..n {
            let v = lu[[i, k]].norm();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best <= 1e-300 * scale {
            return Err(LinalgError::Singular { step: k, pivot: best });
        }
        if p != k {
            for j in 0..n {
                let tmp = lu[[k, j]];
                lu[[k, j]] = lu[[p, j]];
                lu[[p, j]] = tmp;
            }
            det = -det;
        }
        piv.push(p);
        let pivot = lu[[k, k]];
        det *= pivot;
        for i in k + 1..n {
            let factor = lu[[i, k]] / pivot;
            lu[[i, k]] = factor;
            for j in k + 1..n {
                let sub = factor * lu[[k, j]];
                lu[[i, j]] -= sub;
            }
        }
    }
    Ok(LuFactors { lu, piv, det })
}

impl LuFactors {
    pub fn det(&self) -> C64 {
        self.det
    }

    pub fn solve_vec(&self, b: &ArrayView1<C64>) -> Array1<C64> {
        let n = self.lu.nrows();
        let mut x = b.to_owned();
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap(k, p);
            }
            for i in k + 1..n {
                let sub = self.lu[[i, k]] * x[k];
                x[i] -= sub;
            }
        }
        for k in (0..n).rev() {
            for j in k + 1..n {
                let sub = self.lu[[k, j]] * x[j];
                x[k] -= sub;
            }
            x[k] /= self.lu[[k, k]];
        }
        x
    }

    pub fn solve_mat(&self, b: &ArrayView2<C64>) -> Array2<C64> {
        let n = b.ncols();
        let mut out = Array2::zeros(b.raw_dim());
        for j in 0..n {
            let col = self.solve_vec(&b.column(j));
            out.column_mut(j).assign(&col);
        }
        out
    }
}

pub fn solve(a: &ArrayView2<C64>, b: &ArrayView1<C64>) -> Result<Array1<C64>, LinalgError> {
    Ok(lu_factor(a)?.solve_vec(b))
}

pub fn inverse(a: &ArrayView2<C64>) -> Result<Array2<C64>, LinalgError> {
    let n = a.nrows();
    let lu = lu_factor(a)?;
    Ok(lu.solve_mat(&identity(n).view()))
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the corresponding unitary
/// eigenvector matrix (columns). Accuracy is at the level of machine
/// precision times the Frobenius norm of the input.
pub fn eigh(a: &ArrayView2<C64>) -> Result<(Array1<f64>, Array2<C64>), LinalgError> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eigh requires a square matrix");
    let mut m = a.to_owned();
    // Symmetrize to wipe out representation noise in the input.
    for i in 0..n {
        for j in 0..n {
            let avg = 0.5 * (m[[i, j]] + a[[j, i]].conj());
            m[[i, j]] = avg;
        }
    }
    let mut v = identity(n);
    let norm = frobenius_norm(&m.view()).max(f64::MIN_POSITIVE);
    let tol = 1e-15 * norm;
    let max_sweeps = 40;
    let mut converged = false;
    let mut off = 0.0;
    for _ in 0..max_sweeps {
        off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[[p, q]].norm_sqr();
            }
        }
        off = (2.0 * off).sqrt();
        if off <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                let abs = apq.norm();
                if abs <= 1e-300 {
                    continue;
                }
                let phase = apq / abs;
                let app = m[[p, p]].re;
                let aqq = m[[q, q]].re;
                let tau = (aqq - app) / (2.0 * abs);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let se_pos = C64::new(s, 0.0) * phase;
                let se_neg = se_pos.conj();
                // A <- J^H A, rows p and q.
                for k in 0..n {
                    let mp = m[[p, k]];
                    let mq = m[[q, k]];
                    m[[p, k]] = c * mp - se_pos * mq;
                    m[[q, k]] = se_neg * mp + c * mq;
                }
                // A <- A J, columns p and q.
                for k in 0..n {
                    let mp = m[[k, p]];
                    let mq = m[[k, q]];
                    m[[k, p]] = c * mp - se_neg * mq;
                    m[[k, q]] = se_pos * mp + c * mq;
                }
                // Accumulate eigenvectors.
                for k in 0..n {
                    let vp = v[[k, p]];
                    let vq = v[[k, q]];
                    v[[k, p]] = c * vp - se_neg * vq;
                    v[[k, q]] = se_pos * vp + c * vq;
                }
            }
        }
    }
    if !converged {
        return Err(LinalgError::JacobiNotConverged { sweeps: max_sweeps, off });
    }
    let mut pairs: Vec<(f64, usize)> = (0..n).map(|i| (m[[i, i]].re, i)).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let vals = Array1::from_iter(pairs.iter().map(|&(w, _)| w));
    let mut vecs = Array2::zeros((n, n));
    for (col, &(_, src)) in pairs.iter().enumerate() {
        vecs.column_mut(col).assign(&v.column(src));
    }
    Ok((vals, vecs))
}

/// All singular values in ascending order, via the Hermitian eigenproblem of AᴴA.
pub fn singular_values(a: &ArrayView2<C64>) -> Result<Array1<f64>, LinalgError> {
    let aha = adjoint(a).dot(a);
    let (vals, _) = eigh(&aha.view())?;
    Ok(vals.mapv(|w| w.max(0.0).sqrt()))
}

/// Largest eigenvalue of a real symmetric tridiagonal matrix by bisection on
/// Sturm sequence counts.
fn tridiag_max_eigenvalue(diag: &[f64], off: &[f64]) -> f64 {
    let n = diag.len();
    if n == 1 {
        return diag[0];
    }
    let mut hi = f64::MIN;
    let mut lo = f64::MAX;
    for i in 0..n {
        let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let right = if i < n - 1 { off[i].abs() } else { 0.0 };
        hi = hi.max(diag[i] + left + right);
        lo = lo.min(diag[i] - left - right);
    }
    let count_below = |x: f64| -> usize {
        let mut count = 0;
        let mut q = diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..n {
            let e2 = off[i - 1] * off[i - 1];
            let denom = if q.abs() < 1e-300 { 1e-300_f64.copysign(q + 1e-300) } else { q };
            q = diag[i] - x - e2 / denom;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count_below(mid) == n {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    hi
}

/// Largest eigenvalue of a Hermitian positive semidefinite operator given by
/// its application closure, via Lanczos with full reorthogonalization.
///
/// Krylov acceleration keeps clustered spectra tractable; the Ritz value is
/// monitored every step and accepted at relative stagnation `tol`.
pub fn top_eigenvalue_hermitian(
    apply: &dyn Fn(&ArrayView1<C64>) -> Array1<C64>,
    dim: usize,
    tol: f64,
    max_iter: usize,
) -> Result<f64, LinalgError> {
    let mut basis: Vec<Array1<C64>> = Vec::new();
    let mut diag: Vec<f64> = Vec::new();
    let mut off: Vec<f64> = Vec::new();
    let mut v: Array1<C64> = Array1::from_shape_fn(dim, |i| {
        let x = ((i as u64 + 13) * 2654435761 % 1000003) as f64 / 1000003.0;
        C64::new(x - 0.5, (5.1 * x).fract() - 0.5)
    });
    let nrm = vec_norm(&v.view());
    v.mapv_inplace(|z| z / nrm);
    let mut theta_prev = -1.0;
    let mut stagnant = 0;
    for j in 0..max_iter.min(dim) {
        let mut w = apply(&v.view());
        let alpha: f64 = v.iter().zip(w.iter()).map(|(x, y)| (x.conj() * y).re).sum();
        diag.push(alpha);
        basis.push(v.clone());
        // Full reorthogonalization, two passes.
        for _ in 0..2 {
            for b in &basis {
                let proj: C64 = b.iter().zip(w.iter()).map(|(x, y)| x.conj() * y).sum();
                w.iter_mut().zip(b.iter()).for_each(|(wi, bi)| *wi -= proj * bi);
            }
        }
        let beta = vec_norm(&w.view());
        let theta = tridiag_max_eigenvalue(&diag, &off);
        if beta < 1e-14 * theta.abs().max(1.0) {
            // Invariant subspace found: the Ritz value is exact.
            return Ok(theta);
        }
        if j >= 4 {
            let change = (theta - theta_prev).abs() / theta.abs().max(1e-300);
            if change < tol {
                stagnant += 1;
                if stagnant >= 3 {
                    return Ok(theta);
                }
            } else {
                stagnant = 0;
            }
        }
        theta_prev = theta;
        off.push(beta);
        v = w.mapv(|z| z / C64::new(beta, 0.0));
    }
    if max_iter >= dim {
        // Exhausted the whole space: the tridiagonalization is complete.
        return Ok(tridiag_max_eigenvalue(&diag, &off));
    }
    Err(LinalgError::PowerIterationStalled { iters: max_iter, change: (theta_prev).abs() })
}

/// Largest singular value.
///
/// Diagonal matrices are read off directly; small matrices go through the
/// Jacobi eigensolver; larger ones run Lanczos on AᴴA.
pub fn spectral_norm(a: &ArrayView2<C64>) -> Result<f64, LinalgError> {
    let n = a.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    if is_diagonal(a) {
        return Ok(a.diag().iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    if n <= 24 {
        let sv = singular_values(a)?;
        return Ok(sv[sv.len() - 1]);
    }
    let aha = adjoint(a).dot(a);
    if frobenius_norm(&aha.view()) == 0.0 {
        return Ok(0.0);
    }
    let apply = |v: &ArrayView1<C64>| aha.dot(v);
    let theta = top_eigenvalue_hermitian(&apply, n, 1e-13, 600)?;
    Ok(theta.max(0.0).sqrt())
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Matrix exponential by scaling-and-squaring with a Padé(13,13) approximant.
pub fn expm(a: &ArrayView2<C64>) -> Result<Array2<C64>, LinalgError> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm requires a square matrix");
    if n == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    if n == 1 {
        let mut out = Array2::zeros((1, 1));
        out[[0, 0]] = a[[0, 0]].exp();
        return Ok(out);
    }
    if is_diagonal(a) {
        let mut out = Array2::zeros((n, n));
        for i in 0..n {
            out[[i, i]] = a[[i, i]].exp();
        }
        return Ok(out);
    }
    let norm = one_norm(a);
    let theta13 = 5.371920351148152;
    let s = if norm > theta13 {
        (norm / theta13).log2().ceil().max(0.0) as u32
    } else {
        0
    };
    let factor = C64::new((0.5f64).powi(s as i32), 0.0);
    let a_s = a.mapv(|z| z * factor);

    let eye = identity(n);
    let a2 = a_s.dot(&a_s);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);
    let b = &PADE13;
    let u_inner = &a6 * C64::new(b[13], 0.0) + &a4 * C64::new(b[11], 0.0) + &a2 * C64::new(b[9], 0.0);
    let u_poly = a6.dot(&u_inner)
        + &a6 * C64::new(b[7], 0.0)
        + &a4 * C64::new(b[5], 0.0)
        + &a2 * C64::new(b[3], 0.0)
        + &eye * C64::new(b[1], 0.0);
    let u = a_s.dot(&u_poly);
    let v_inner = &a6 * C64::new(b[12], 0.0) + &a4 * C64::new(b[10], 0.0) + &a2 * C64::new(b[8], 0.0);
    let v = a6.dot(&v_inner)
        + &a6 * C64::new(b[6], 0.0)
        + &a4 * C64::new(b[4], 0.0)
        + &a2 * C64::new(b[2], 0.0)
        + &eye * C64::new(b[0], 0.0);
    let num = &v + &u;
    let den = &v - &u;
    let mut r = lu_factor(&den.view())?.solve_mat(&num.view());
    for _ in 0..s {
        r = r.dot(&r);
    }
    Ok(r)
}

/// Principal square root of a matrix with spectrum in the open right half-plane.
///
/// Hermitian positive definite inputs go through the eigendecomposition; the
/// general case uses the Denman–Beavers iteration with determinant scaling.
/// The residual ‖X² − A‖_F is verified against `tol` (relative).
pub fn sqrtm(a: &ArrayView2<C64>, tol: f64) -> Result<Array2<C64>, LinalgError> {
    let n = a.nrows();
    let norm_a = frobenius_norm(a).max(f64::MIN_POSITIVE);
    let root = if is_hermitian(a) {
        let (vals, vecs) = eigh(a)?;
        if vals.iter().any(|&w| w <= 0.0) {
            return Err(LinalgError::SqrtResidualTooLarge { residual: f64::INFINITY, tol });
        }
        let mut d = Array2::zeros((n, n));
        for i in 0..n {
            d[[i, i]] = C64::new(vals[i].sqrt(), 0.0);
        }
        vecs.dot(&d).dot(&adjoint(&vecs.view()))
    } else {
        let mut y = a.to_owned();
        let mut z = identity(n);
        let mut converged = false;
        for _ in 0..80 {
            let lu_y = lu_factor(&y.view())?;
            let lu_z = lu_factor(&z.view())?;
            let det_scale = (lu_y.det().norm() * lu_z.det().norm()).powf(-1.0 / (2.0 * n as f64));
            let mu = if det_scale.is_finite() && det_scale > 0.0 { det_scale } else { 1.0 };
            let y_inv = lu_y.solve_mat(&identity(n).view());
            let z_inv = lu_z.solve_mat(&identity(n).view());
            let mu_c = C64::new(mu, 0.0);
            let mu_inv = C64::new(1.0 / mu, 0.0);
            let y_next = (&y.mapv(|v| v * mu_c) + &z_inv.mapv(|v| v * mu_inv)) * C64::new(0.5, 0.0);
            let z_next = (&z.mapv(|v| v * mu_c) + &y_inv.mapv(|v| v * mu_inv)) * C64::new(0.5, 0.0);
            let change = frobenius_norm(&(&y_next - &y).view()) / frobenius_norm(&y_next.view());
            y = y_next;
            z = z_next;
            if change < 1e-14 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(LinalgError::SqrtNotConverged { iters: 80 });
        }
        y
    };
    let residual = frobenius_norm(&(&root.dot(&root) - a).view()) / norm_a;
    if residual > tol {
        return Err(LinalgError::SqrtResidualTooLarge { residual, tol });
    }
    Ok(root)
}

/// Pairwise (cascade) summation for reproducible reductions.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}
