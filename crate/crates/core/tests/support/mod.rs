//! Independent reference computations shared by the integration tests.
//!
//! Local matrices are rebuilt from scratch: the nodal basis of a cell is
//! obtained by inverting a Vandermonde matrix of scaled monomials in physical
//! coordinates at the cell's DOF nodes, and face geometry (normal, measure,
//! diameter) is recomputed from the vertices.

#![allow(dead_code)]

use nitsche::assembly::Assembler;
use nitsche::element::volume_quadrature;
use nitsche::mesh::BoundaryFace;
use nitsche::{DofMap, Mesh, NitscheConfig, Point};

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub name: String,
    pub max_abs_discrepancy: f64,
    pub budget: f64,
    pub pass: bool,
}

impl OracleResult {
    pub fn new(name: impl Into<String>, discrepancy: f64, budget: f64) -> Self {
        Self {
            name: name.into(),
            max_abs_discrepancy: discrepancy,
            budget,
            pass: discrepancy <= budget,
        }
    }
}

pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

fn cross(a: Point, b: Point) -> Point {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Solves `A X = B` for square dense `A` by Gaussian elimination with
/// partial pivoting. `b` holds the right-hand sides as columns.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let p = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            for c in 0..b[r].len() {
                b[r][c] -= f * b[col][c];
            }
        }
    }
    for col in (0..n).rev() {
        for c in 0..b[col].len() {
            let s: f64 = (col + 1..n).map(|j| a[col][j] * b[j][c]).sum();
            b[col][c] = (b[col][c] - s) / a[col][col];
        }
    }
    b
}

fn exponents(dim: usize, k: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for a in 0..=k {
        for b in 0..=k - a {
            if dim == 2 {
                out.push([a, b, 0]);
            } else {
                for c in 0..=k - a - b {
                    out.push([a, b, c]);
                }
            }
        }
    }
    out
}

/// Nodal basis of one cell expressed in scaled physical monomials.
pub struct PhysicalBasis {
    dim: usize,
    center: Point,
    scale: f64,
    exps: Vec<[usize; 3]>,
    /// `coeffs[m][i]`: coefficient of monomial `m` in basis function `i`.
    coeffs: Vec<Vec<f64>>,
}

impl PhysicalBasis {
    pub fn new(mesh: &Mesh, space: &DofMap, cell: usize) -> Self {
        let dim = mesh.dim();
        let verts = mesh.cell_points(cell);
        let mut center = [0.0; 3];
        for v in &verts[..=dim] {
            for a in 0..3 {
                center[a] += v[a] / (dim + 1) as f64;
            }
        }
        let scale = mesh.cell_diameter(cell);
        let exps = exponents(dim, space.degree());
        let nodes: Vec<Point> = space
            .cell_dofs(cell)
            .iter()
            .map(|&d| space.dof_coords()[d as usize])
            .collect();
        assert_eq!(nodes.len(), exps.len());
        let mut basis = Self {
            dim,
            center,
            scale,
            exps,
            coeffs: Vec::new(),
        };
        // V[i][m] = monomial m at node i; the basis coefficients solve V C = I.
        let v: Vec<Vec<f64>> = nodes.iter().map(|x| basis.monomials(x)).collect();
        let n = nodes.len();
        let id: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        basis.coeffs = dense_solve(v, id);
        basis
    }

    fn local(&self, x: &Point) -> Point {
        let mut t = [0.0; 3];
        for a in 0..3 {
            t[a] = (x[a] - self.center[a]) / self.scale;
        }
        t
    }

    fn monomials(&self, x: &Point) -> Vec<f64> {
        let t = self.local(x);
        self.exps
            .iter()
            .map(|e| t[0].powi(e[0] as i32) * t[1].powi(e[1] as i32) * t[2].powi(e[2] as i32))
            .collect()
    }

    fn monomial_grads(&self, x: &Point) -> Vec<Point> {
        let t = self.local(x);
        let p = |v: f64, e: usize| if e == 0 { 1.0 } else { v.powi(e as i32) };
        let dp = |v: f64, e: usize| if e == 0 { 0.0 } else { e as f64 * v.powi(e as i32 - 1) };
        self.exps
            .iter()
            .map(|e| {
                [
                    dp(t[0], e[0]) * p(t[1], e[1]) * p(t[2], e[2]) / self.scale,
                    p(t[0], e[0]) * dp(t[1], e[1]) * p(t[2], e[2]) / self.scale,
                    if self.dim == 3 { p(t[0], e[0]) * p(t[1], e[1]) * dp(t[2], e[2]) / self.scale } else { 0.0 },
                ]
            })
            .collect()
    }

    pub fn values(&self, x: &Point) -> Vec<f64> {
        let m = self.monomials(x);
        let n = self.coeffs[0].len();
        (0..n).map(|i| m.iter().zip(&self.coeffs).map(|(mv, c)| mv * c[i]).sum()).collect()
    }

    pub fn grads(&self, x: &Point) -> Vec<Point> {
        let m = self.monomial_grads(x);
        let n = self.coeffs[0].len();
        (0..n)
            .map(|i| {
                let mut g = [0.0; 3];
                for (mg, c) in m.iter().zip(&self.coeffs) {
                    for a in 0..3 {
                        g[a] += mg[a] * c[i];
                    }
                }
                g
            })
            .collect()
    }
}

/// Measure of the simplex spanned by `pts` (2 to 4 points).
pub fn simplex_measure(pts: &[Point]) -> f64 {
    match pts.len() {
        2 => norm(sub(pts[1], pts[0])),
        3 => 0.5 * norm(cross(sub(pts[1], pts[0]), sub(pts[2], pts[0]))),
        4 => dot(sub(pts[1], pts[0]), cross(sub(pts[2], pts[0]), sub(pts[3], pts[0]))).abs() / 6.0,
        _ => panic!("unsupported simplex"),
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Physical quadrature points and weights for a simplex with vertices `pts`.
fn physical_rule(pts: &[Point], degree: usize) -> Vec<(Point, f64)> {
    let d = pts.len() - 1;
    let rule = volume_quadrature(d, degree).unwrap();
    let scale = simplex_measure(pts) * factorial(d);
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(xi, &w)| {
            let mut x = pts[0];
            for j in 0..d {
                for a in 0..3 {
                    x[a] += xi[j] * (pts[j + 1][a] - pts[0][a]);
                }
            }
            (x, w * scale)
        })
        .collect()
}

/// Outward unit normal, measure and diameter of face `face` of `cell`,
/// recomputed from the vertex coordinates.
pub fn face_geometry(mesh: &Mesh, cell: usize, face: usize) -> (Vec<Point>, Point, f64, f64) {
    let dim = mesh.dim();
    let verts = mesh.cell_points(cell);
    let fpts: Vec<Point> = (0..=dim).filter(|&i| i != face).map(|i| verts[i]).collect();
    let mut n = if dim == 2 {
        let t = sub(fpts[1], fpts[0]);
        [t[1], -t[0], 0.0]
    } else {
        cross(sub(fpts[1], fpts[0]), sub(fpts[2], fpts[0]))
    };
    if dot(n, sub(fpts[0], verts[face])) < 0.0 {
        n = [-n[0], -n[1], -n[2]];
    }
    let l = norm(n);
    let n = [n[0] / l, n[1] / l, n[2] / l];
    let mut diam = 0.0f64;
    for a in 0..fpts.len() {
        for b in a + 1..fpts.len() {
            diam = diam.max(norm(sub(fpts[a], fpts[b])));
        }
    }
    let area = simplex_measure(&fpts);
    (fpts, n, area, diam)
}

/// Volume block `∫_T ∇φ_j·∇φ_i` (row-major).
pub fn oracle_cell_matrix(mesh: &Mesh, space: &DofMap, cell: usize, degree: usize) -> Vec<f64> {
    let basis = PhysicalBasis::new(mesh, space, cell);
    let dim = mesh.dim();
    let verts = mesh.cell_points(cell);
    let n = space.dofs_per_cell();
    let mut out = vec![0.0; n * n];
    let rule = physical_rule(&verts[..=dim], degree);
    for (x, w) in rule {
        let g = basis.grads(&x);
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] += w * dot(g[i], g[j]);
            }
        }
    }
    out
}

/// Face block `-<∇φ_j·n, φ_i> + β <φ_j, ∇φ_i·n> + c0 h^-α <φ_j, φ_i>` (row-major).
pub fn oracle_face_matrix(mesh: &Mesh, space: &DofMap, face: &BoundaryFace, cfg: &NitscheConfig, degree: usize) -> Vec<f64> {
    let basis = PhysicalBasis::new(mesh, space, face.cell);
    let (fpts, normal, _, diam) = face_geometry(mesh, face.cell, face.local_face);
    let n = space.dofs_per_cell();
    let beta = cfg.beta.sign();
    let pen = if cfg.c0 == 0.0 { 0.0 } else { cfg.c0 * diam.powf(-cfg.alpha) };
    let mut out = vec![0.0; n * n];
    for (x, w) in physical_rule(&fpts, degree) {
        let phi = basis.values(&x);
        let dn: Vec<f64> = basis.grads(&x).iter().map(|g| dot(*g, normal)).collect();
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] += w * (-dn[j] * phi[i] + beta * phi[j] * dn[i] + pen * phi[j] * phi[i]);
            }
        }
    }
    out
}

fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

/// Compares every cell block and every boundary face block of `mesh` with
/// the oracle at quadrature degree `2k + 6`. The discrepancy is relative to
/// the largest entry of each block.
pub fn oracle_local_matrices(mesh: &Mesh, space: &DofMap, cfg: NitscheConfig) -> OracleResult {
    let k = space.degree();
    let degree = 2 * k + 6;
    let asm = Assembler::new(mesh, space, cfg).unwrap();
    let mut worst = 0.0f64;
    for c in 0..mesh.num_cells() {
        worst = worst.max(relative_gap(&asm.cell_matrix(c), &oracle_cell_matrix(mesh, space, c, degree)));
    }
    for bf in mesh.boundary_faces() {
        worst = worst.max(relative_gap(&asm.face_matrix(bf), &oracle_face_matrix(mesh, space, bf, &cfg, degree)));
        let (_, normal, area, diam) = face_geometry(mesh, bf.cell, bf.local_face);
        worst = worst.max(norm(sub(normal, bf.normal)));
        worst = worst.max((area - bf.area).abs() / area);
        worst = worst.max((diam - bf.diameter).abs() / diam);
    }
    OracleResult::new(
        format!(
            "local matrices {}D k={} beta={:+} alpha={} c0={}",
            mesh.dim(),
            k,
            cfg.beta.sign(),
            cfg.alpha,
            cfg.c0
        ),
        worst,
        1e-12,
    )
}

/// Least-squares slope of `log e` against `log h`.
pub fn oracle_rate_fit(errors: &[f64], h: &[f64]) -> Option<f64> {
    if errors.len() < 3 || errors.len() != h.len() || errors.iter().chain(h).any(|&v| !(v > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}
