//! Linear solvers for the assembled systems.
//!
//! The direct path is a sparse LU with partial pivoting (faer) followed by
//! iterative refinement; the Krylov path is restarted GMRES with a Jacobi
//! preconditioner, and a Jacobi-preconditioned CG is available for the
//! symmetric positive definite systems of the symmetric method.

use std::time::Instant;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::Par;

use crate::assembly::LinearSystem;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Direct,
    Krylov,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub method: SolveMethod,
    pub iterations: usize,
    /// `‖b - Ax‖₂ / ‖b‖₂`, or `‖Ax‖₂` when `b = 0`.
    pub residual: f64,
    /// Wall-clock seconds.
    pub elapsed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 20_000,
            restart: 50,
        }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `‖b - Ax‖₂ / ‖b‖₂`; the plain residual norm when `b = 0`.
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let nb = norm2(b);
    if nb > 0.0 {
        norm2(&r) / nb
    } else {
        norm2(&r)
    }
}

fn check_system(system: &LinearSystem) -> Result<()> {
    let n = system.matrix.nrows();
    if system.matrix.ncols() != n {
        return Err(Error::InvalidArgument("matrix is not square".into()));
    }
    if system.rhs.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: system.rhs.len(),
        });
    }
    Ok(())
}

/// Sparse LU factorization that can be reused for several right-hand sides.
pub struct DirectSolver {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl DirectSolver {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::InvalidArgument("matrix is not square".into()));
        }
        // Sequential kernels keep the factors independent of the thread count.
        faer::set_global_parallelism(Par::Seq);
        let mut triplets = Vec::with_capacity(a.nnz());
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                triplets.push(Triplet::new(i, j, v));
            }
        }
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        let lu = mat.sp_lu().map_err(|e| match e {
            faer::sparse::linalg::LuError::SymbolicSingular { index } => Error::SingularMatrix { pivot: Some(index) },
            other => Error::Solver(format!("{other:?}")),
        })?;
        Ok(Self { n, lu })
    }

    /// Solves for several right-hand sides at once.
    pub fn solve_many(&self, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        for b in rhs {
            if b.len() != self.n {
                return Err(Error::LengthMismatch {
                    expected: self.n,
                    found: b.len(),
                });
            }
        }
        let mut m = Mat::<f64>::from_fn(self.n, rhs.len(), |i, j| rhs[j][i]);
        self.lu.solve_in_place(m.as_mut());
        let out: Vec<Vec<f64>> = (0..rhs.len()).map(|j| (0..self.n).map(|i| m[(i, j)]).collect()).collect();
        if let Some(pos) = out.iter().flat_map(|x| x.iter()).position(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix { pivot: Some(pos % self.n.max(1)) });
        }
        Ok(out)
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solve_many(&[rhs.to_vec()])?.pop().expect("one column"))
    }

    /// Solve followed by up to two steps of iterative refinement against `a`.
    pub fn solve_refined(&self, a: &CsrMatrix, b: &[f64]) -> Result<(Vec<f64>, f64)> {
        let mut x = self.solve(b)?;
        let mut res = relative_residual(a, &x, b);
        for _ in 0..2 {
            if res < 1e-14 {
                break;
            }
            let ax = a.mul_vec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            let dx = self.solve(&r)?;
            let candidate: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
            let new_res = relative_residual(a, &candidate, b);
            if new_res >= res {
                break;
            }
            x = candidate;
            res = new_res;
        }
        Ok((x, res))
    }
}

pub fn solve_direct(system: &LinearSystem) -> Result<(Vec<f64>, SolveStats)> {
    check_system(system)?;
    let start = Instant::now();
    let n = system.rhs.len();
    if system.rhs.iter().all(|&b| b == 0.0) {
        return Ok((
            vec![0.0; n],
            SolveStats {
                method: SolveMethod::Direct,
                iterations: 0,
                residual: 0.0,
                elapsed: start.elapsed().as_secs_f64(),
            },
        ));
    }
    let solver = DirectSolver::factor(&system.matrix)?;
    let (x, residual) = solver.solve_refined(&system.matrix, &system.rhs)?;
    Ok((
        x,
        SolveStats {
            method: SolveMethod::Direct,
            iterations: 1,
            residual,
            elapsed: start.elapsed().as_secs_f64(),
        },
    ))
}

fn jacobi(a: &CsrMatrix) -> Vec<f64> {
    a.diagonal()
        .into_iter()
        .map(|d| if d != 0.0 && d.is_finite() { 1.0 / d } else { 1.0 })
        .collect()
}

/// Right-preconditioned restarted GMRES with a diagonal (Jacobi) preconditioner.
pub fn solve_krylov(system: &LinearSystem, opts: KrylovOptions) -> Result<(Vec<f64>, SolveStats)> {
    check_system(system)?;
    if !(opts.tol > 0.0) || opts.restart == 0 {
        return Err(Error::InvalidArgument("tolerance and restart length must be positive".into()));
    }
    let start = Instant::now();
    let a = &system.matrix;
    let b = &system.rhs;
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = norm2(b);
    let stats = |iterations, residual, start: Instant| SolveStats {
        method: SolveMethod::Krylov,
        iterations,
        residual,
        elapsed: start.elapsed().as_secs_f64(),
    };
    if bnorm == 0.0 {
        return Ok((x, stats(0, 0.0, start)));
    }
    let minv = jacobi(a);
    let m = opts.restart;
    let mut iterations = 0;
    let mut r = b.clone();
    let mut z = vec![0.0; n];
    let mut w = vec![0.0; n];

    loop {
        let beta = norm2(&r);
        if beta / bnorm <= opts.tol {
            return Ok((x, stats(iterations, beta / bnorm, start)));
        }
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|ri| ri / beta).collect());
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && iterations < opts.max_iter {
            for ((zi, vi), mi) in z.iter_mut().zip(&v[k]).zip(&minv) {
                *zi = vi * mi;
            }
            a.mul_vec_into(&z, &mut w);
            // modified Gram–Schmidt, applied twice for stability
            for _ in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let hij = dot(&w, vi);
                    h[i][k] += hij;
                    for (wj, vj) in w.iter_mut().zip(vi) {
                        *wj -= hij * vj;
                    }
                }
            }
            let hn = norm2(&w);
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if denom == 0.0 {
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iterations += 1;
            k += 1;
            if g[k].abs() / bnorm <= opts.tol || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|wi| wi / hn).collect());
        }
        // back substitution for the k x k upper triangular system
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (yi, vi) in y.iter().zip(&v) {
            for (u, vj) in update.iter_mut().zip(vi) {
                *u += yi * vj;
            }
        }
        for ((xi, ui), mi) in x.iter_mut().zip(&update).zip(&minv) {
            *xi += ui * mi;
        }
        let ax = a.mul_vec(&x);
        for ((ri, bi), ai) in r.iter_mut().zip(b).zip(&ax) {
            *ri = bi - ai;
        }
        let res = norm2(&r) / bnorm;
        if res <= opts.tol {
            return Ok((x, stats(iterations, res, start)));
        }
        if iterations >= opts.max_iter || k == 0 {
            return Err(Error::NonConvergence {
                iterations,
                residual: res,
            });
        }
    }
}

/// Jacobi-preconditioned conjugate gradients; only valid for SPD matrices.
pub fn solve_cg(system: &LinearSystem, tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveStats)> {
    check_system(system)?;
    let start = Instant::now();
    let a = &system.matrix;
    let b = &system.rhs;
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    let finish = |x: Vec<f64>, iterations, start: Instant| {
        let residual = relative_residual(a, &x, b);
        (
            x,
            SolveStats {
                method: SolveMethod::Krylov,
                iterations,
                residual,
                elapsed: start.elapsed().as_secs_f64(),
            },
        )
    };
    if bnorm == 0.0 {
        return Ok(finish(x, 0, start));
    }
    let minv = jacobi(a);
    let mut r = b.clone();
    let mut z: Vec<f64> = r.iter().zip(&minv).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Solver("matrix is not positive definite".into()));
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        if norm2(&r) / bnorm <= tol {
            return Ok(finish(x, it, start));
        }
        for i in 0..n {
            z[i] = r[i] * minv[i];
        }
        let rz_new = dot(&r, &z);
        let ratio = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + ratio * p[i];
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: norm2(&r) / bnorm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize, lower: f64, diag: f64, upper: f64) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, diag));
            if i > 0 {
                t.push((i, i - 1, lower));
            }
            if i + 1 < n {
                t.push((i, i + 1, upper));
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let sys = LinearSystem {
            matrix: tridiag(5, -1.0, 2.0, -1.0),
            rhs: vec![0.0; 5],
        };
        let (x, s) = solve_direct(&sys).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
        assert_eq!(s.residual, 0.0);
        let (x, s) = solve_krylov(&sys, KrylovOptions::default()).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
        assert_eq!(s.iterations, 0);
    }

    #[test]
    fn diagonal_system() {
        let d = [2.0, 4.0, 0.5, 8.0];
        let t: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        let b = vec![1.0, -2.0, 3.0, 0.25];
        let sys = LinearSystem {
            matrix: CsrMatrix::from_triplets(4, 4, &t).unwrap(),
            rhs: b.clone(),
        };
        let (x, _) = solve_direct(&sys).unwrap();
        for i in 0..4 {
            assert_eq!(x[i], b[i] / d[i]);
        }
    }

    #[test]
    fn gmres_matches_direct_on_nonsymmetric() {
        let n = 200;
        let sys = LinearSystem {
            matrix: tridiag(n, -1.3, 3.0, -0.7),
            rhs: (0..n).map(|i| (i as f64 * 0.37).sin()).collect(),
        };
        let (xd, sd) = solve_direct(&sys).unwrap();
        assert!(sd.residual < 1e-14);
        let (xk, sk) = solve_krylov(&sys, KrylovOptions { restart: 10, ..Default::default() }).unwrap();
        assert!(sk.residual <= 1e-12);
        let diff = xd.iter().zip(&xk).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-9);
        let (xc, _) = solve_cg(
            &LinearSystem {
                matrix: tridiag(n, -1.0, 3.0, -1.0),
                rhs: sys.rhs.clone(),
            },
            1e-12,
            1000,
        )
        .unwrap();
        assert_eq!(xc.len(), n);
    }

    #[test]
    fn reports_non_convergence_and_singularity() {
        let n = 50;
        let sys = LinearSystem {
            matrix: tridiag(n, -1.0, 2.0, -1.0),
            rhs: vec![1.0; n],
        };
        let err = solve_krylov(
            &sys,
            KrylovOptions {
                tol: 1e-14,
                max_iter: 3,
                restart: 2,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonConvergence { iterations: 3, .. }));

        let singular = LinearSystem {
            matrix: CsrMatrix::from_pattern(2, vec![vec![0, 1], vec![0, 1]]),
            rhs: vec![1.0, 1.0],
        };
        assert!(matches!(solve_direct(&singular), Err(Error::SingularMatrix { .. }) | Err(Error::Solver(_))));
    }
}
