//! Reference-simplex Lagrange elements, quadrature and affine cell maps.
//!
//! The reference simplex has vertices `0, e_1, ..., e_d`. Barycentric
//! coordinates are `λ_0 = 1 - Σ ξ_i` and `λ_i = ξ_i`. Nodes sit on the
//! equispaced barycentric lattice `λ = m / k` with `|m| = k`; the basis
//! function attached to multi-index `m` is
//!
//! ```text
//! φ_m(λ) = Π_i Π_{j < m_i} (k λ_i - j) / (j + 1)
//! ```
//!
//! which is one at its own node and vanishes at every other lattice point.

use crate::error::{Error, Result};
use crate::Point;

/// Highest polynomial degree integrated exactly by the quadrature rules.
pub const MAX_QUADRATURE_DEGREE: usize = 16;

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub dim: usize,
    /// Reference coordinates, padded to three components.
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

/// Gauss–Legendre rule with `n` points on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        // Newton iteration on P_n from the Chebyshev-like initial guess.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    // ascending order on [0, 1]
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let pk = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = pk;
    }
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

fn points_for(degree: usize) -> usize {
    degree / 2 + 1
}

/// Collapsed-coordinate Gauss rule exact to `degree` on the reference simplex
/// of dimension `dim` (1: unit interval, 2: triangle, 3: tetrahedron).
pub fn volume_quadrature(dim: usize, degree: usize) -> Result<QuadratureRule> {
    if degree > MAX_QUADRATURE_DEGREE {
        return Err(Error::UnsupportedQuadratureDegree(degree));
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match dim {
        1 => {
            let (x, w) = gauss_legendre_unit(points_for(degree));
            for (xi, wi) in x.into_iter().zip(w) {
                points.push([xi, 0.0, 0.0]);
                weights.push(wi);
            }
        }
        2 => {
            // x = u, y = v (1 - u); Jacobian (1 - u) adds one degree in u.
            let (xu, wu) = gauss_legendre_unit(points_for(degree + 1));
            let (xv, wv) = gauss_legendre_unit(points_for(degree));
            for (&u, &a) in xu.iter().zip(&wu) {
                for (&v, &b) in xv.iter().zip(&wv) {
                    points.push([u, v * (1.0 - u), 0.0]);
                    weights.push(a * b * (1.0 - u));
                }
            }
        }
        3 => {
            // x = u, y = v (1 - u), z = w (1 - u)(1 - v); Jacobian (1 - u)^2 (1 - v).
            let (xu, wu) = gauss_legendre_unit(points_for(degree + 2));
            let (xv, wv) = gauss_legendre_unit(points_for(degree + 1));
            let (xw, ww) = gauss_legendre_unit(points_for(degree));
            for (&u, &a) in xu.iter().zip(&wu) {
                for (&v, &b) in xv.iter().zip(&wv) {
                    for (&w, &c) in xw.iter().zip(&ww) {
                        points.push([u, v * (1.0 - u), w * (1.0 - u) * (1.0 - v)]);
                        weights.push(a * b * c * (1.0 - u) * (1.0 - u) * (1.0 - v));
                    }
                }
            }
        }
        _ => return Err(Error::InvalidArgument(format!("no quadrature for dimension {dim}"))),
    }
    Ok(QuadratureRule {
        dim,
        points,
        weights,
        exact_degree: degree,
    })
}

/// Rule on the reference face of a `dim`-simplex, i.e. the `(dim-1)`-simplex.
pub fn face_quadrature(dim: usize, degree: usize) -> Result<QuadratureRule> {
    if dim < 2 {
        return Err(Error::InvalidArgument(format!("no faces in dimension {dim}")));
    }
    volume_quadrature(dim - 1, degree)
}

/// Measure of the reference simplex: 1, 1/2, 1/6.
pub fn reference_measure(dim: usize) -> f64 {
    match dim {
        1 => 1.0,
        2 => 0.5,
        3 => 1.0 / 6.0,
        _ => 0.0,
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceElement {
    dim: usize,
    degree: usize,
    /// Barycentric multi-indices `m` with `Σ m = degree`; vertices come first.
    nodes: Vec<[u8; 4]>,
}

impl ReferenceElement {
    pub fn new(dim: usize, degree: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidArgument(format!("dimension must be 2 or 3, got {dim}")));
        }
        if !(1..=3).contains(&degree) {
            return Err(Error::InvalidArgument(format!("degree must be 1..=3, got {degree}")));
        }
        let k = degree as u8;
        let mut nodes = Vec::new();
        for a in 0..=k {
            for b in 0..=k - a {
                if dim == 2 {
                    nodes.push([k - a - b, a, b, 0]);
                } else {
                    for c in 0..=k - a - b {
                        nodes.push([k - a - b - c, a, b, c]);
                    }
                }
            }
        }
        // vertices first, in local vertex order, then the rest lexicographically
        nodes.sort_by_key(|m| {
            let vertex = m.iter().position(|&x| x == k);
            (vertex.unwrap_or(usize::MAX), std::cmp::Reverse(*m))
        });
        Ok(Self { dim, degree, nodes })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[[u8; 4]] {
        &self.nodes
    }

    /// Reference coordinates of node `i`.
    pub fn node_point(&self, i: usize) -> Point {
        let m = self.nodes[i];
        let k = self.degree as f64;
        [m[1] as f64 / k, m[2] as f64 / k, if self.dim == 3 { m[3] as f64 / k } else { 0.0 }]
    }

    fn barycentric(&self, xi: &[f64]) -> [f64; 4] {
        let mut l = [0.0; 4];
        let mut s = 0.0;
        for i in 0..self.dim {
            l[i + 1] = xi[i];
            s += xi[i];
        }
        l[0] = 1.0 - s;
        l
    }

    fn check_inside(&self, xi: &[f64]) -> Result<()> {
        if xi.len() < self.dim {
            return Err(Error::LengthMismatch {
                expected: self.dim,
                found: xi.len(),
            });
        }
        let l = self.barycentric(xi);
        if l[..=self.dim].iter().any(|&x| x < -1e-12 || !x.is_finite()) {
            return Err(Error::OutsideReferenceElement {
                point: xi[..self.dim].to_vec(),
            });
        }
        Ok(())
    }

    /// Values of every basis function at a reference point.
    pub fn eval_basis(&self, xi: &[f64]) -> Result<Vec<f64>> {
        self.check_inside(xi)?;
        let mut out = vec![0.0; self.num_nodes()];
        self.basis_into(xi, &mut out);
        Ok(out)
    }

    /// Reference gradients of every basis function at a reference point.
    pub fn eval_basis_grad(&self, xi: &[f64]) -> Result<Vec<Point>> {
        self.check_inside(xi)?;
        let mut out = vec![[0.0; 3]; self.num_nodes()];
        self.grad_into(xi, &mut out);
        Ok(out)
    }

    /// Unchecked evaluation for hot loops.
    pub fn basis_into(&self, xi: &[f64], out: &mut [f64]) {
        let l = self.barycentric(xi);
        let k = self.degree;
        for (o, m) in out.iter_mut().zip(&self.nodes) {
            let mut v = 1.0;
            for i in 0..=self.dim {
                v *= lattice_factor(k, m[i] as usize, l[i]).0;
            }
            *o = v;
        }
    }

    pub fn grad_into(&self, xi: &[f64], out: &mut [Point]) {
        let l = self.barycentric(xi);
        let k = self.degree;
        let nb = self.dim + 1;
        for (o, m) in out.iter_mut().zip(&self.nodes) {
            let mut vals = [0.0; 4];
            let mut ders = [0.0; 4];
            for i in 0..nb {
                let (v, d) = lattice_factor(k, m[i] as usize, l[i]);
                vals[i] = v;
                ders[i] = d;
            }
            // ∂φ/∂λ_i
            let mut dl = [0.0; 4];
            for i in 0..nb {
                let mut p = ders[i];
                for j in 0..nb {
                    if j != i {
                        p *= vals[j];
                    }
                }
                dl[i] = p;
            }
            let mut g = [0.0; 3];
            for j in 0..self.dim {
                g[j] = dl[j + 1] - dl[0];
            }
            *o = g;
        }
    }

    /// Local nodes lying on local face `face` (where `λ_face = 0`).
    pub fn face_nodes(&self, face: usize) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&i| self.nodes[i][face] == 0).collect()
    }
}

/// `Π_{j < m} (k t - j) / (j + 1)` and its derivative in `t`.
fn lattice_factor(k: usize, m: usize, t: f64) -> (f64, f64) {
    let kt = k as f64 * t;
    let mut value = 1.0;
    let mut deriv = 0.0;
    for j in 0..m {
        let c = 1.0 / (j as f64 + 1.0);
        let f = (kt - j as f64) * c;
        deriv = deriv * f + value * k as f64 * c;
        value *= f;
    }
    (value, deriv)
}

/// Affine map `x = B ξ + b` from the reference simplex onto a cell.
#[derive(Debug, Clone, Copy)]
pub struct AffineMap {
    pub dim: usize,
    pub matrix: [[f64; 3]; 3],
    pub offset: Point,
    pub det: f64,
    pub inv_transpose: [[f64; 3]; 3],
}

impl AffineMap {
    /// Map sending reference vertex `i` to `vertices[i]`.
    pub fn new(dim: usize, vertices: &[Point]) -> Result<Self> {
        let mut b = [[0.0; 3]; 3];
        for col in 0..dim {
            for row in 0..dim {
                b[row][col] = vertices[col + 1][row] - vertices[0][row];
            }
        }
        let (det, inv) = if dim == 2 {
            let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
            let inv = [
                [b[1][1] / det, -b[0][1] / det, 0.0],
                [-b[1][0] / det, b[0][0] / det, 0.0],
                [0.0, 0.0, 0.0],
            ];
            (det, inv)
        } else {
            let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
                - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
                + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
            let mut inv = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    // inverse = adjugate / det; adj[i][j] = cofactor[j][i]
                    let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
                    let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
                    inv[i][j] = (b[r0][c0] * b[r1][c1] - b[r0][c1] * b[r1][c0]) / det;
                }
            }
            (det, inv)
        };
        if !(det > 0.0) {
            return Err(Error::InvalidArgument(format!("degenerate or inverted cell (det {det:e})")));
        }
        let mut inv_t = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                inv_t[i][j] = inv[j][i];
            }
        }
        Ok(Self {
            dim,
            matrix: b,
            offset: vertices[0],
            det,
            inv_transpose: inv_t,
        })
    }

    pub fn map(&self, xi: &Point) -> Point {
        let mut x = self.offset;
        for row in 0..self.dim {
            for col in 0..self.dim {
                x[row] += self.matrix[row][col] * xi[col];
            }
        }
        x
    }

    pub fn inverse_map(&self, x: &Point) -> Point {
        let mut xi = [0.0; 3];
        for i in 0..self.dim {
            for j in 0..self.dim {
                // inverse matrix entry (i, j) is inv_transpose[j][i]
                xi[i] += self.inv_transpose[j][i] * (x[j] - self.offset[j]);
            }
        }
        xi
    }

    /// Physical gradient `B^{-T} ĝ` of a reference gradient.
    pub fn push_gradient(&self, g: &Point) -> Point {
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate().take(self.dim) {
            for j in 0..self.dim {
                *o += self.inv_transpose[i][j] * g[j];
            }
        }
        out
    }
}

/// Basis values and reference gradients tabulated at a set of reference points.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub num_points: usize,
    pub num_basis: usize,
    /// `values[q * num_basis + i]`
    pub values: Vec<f64>,
    pub grads: Vec<Point>,
}

impl Tabulation {
    pub fn new(elem: &ReferenceElement, points: &[Point]) -> Self {
        let nb = elem.num_nodes();
        let mut values = vec![0.0; points.len() * nb];
        let mut grads = vec![[0.0; 3]; points.len() * nb];
        for (q, p) in points.iter().enumerate() {
            elem.basis_into(p, &mut values[q * nb..(q + 1) * nb]);
            elem.grad_into(p, &mut grads[q * nb..(q + 1) * nb]);
        }
        Self {
            num_points: points.len(),
            num_basis: nb,
            values,
            grads,
        }
    }

    pub fn values_at(&self, q: usize) -> &[f64] {
        &self.values[q * self.num_basis..(q + 1) * self.num_basis]
    }

    pub fn grads_at(&self, q: usize) -> &[Point] {
        &self.grads[q * self.num_basis..(q + 1) * self.num_basis]
    }
}

/// Face quadrature points lifted into the cell reference coordinates, one set
/// per local face. Face `f` lies opposite reference vertex `f`; its vertices
/// are the remaining reference vertices in increasing order.
pub fn lift_face_points(dim: usize, rule: &QuadratureRule) -> Vec<Vec<Point>> {
    let ref_vertices: Vec<Point> = (0..=dim)
        .map(|i| {
            let mut p = [0.0; 3];
            if i > 0 {
                p[i - 1] = 1.0;
            }
            p
        })
        .collect();
    (0..=dim)
        .map(|f| {
            let fv: Vec<Point> = (0..=dim).filter(|&i| i != f).map(|i| ref_vertices[i]).collect();
            rule.points
                .iter()
                .map(|s| {
                    let mut mu = [0.0; 3];
                    let mut sum = 0.0;
                    for j in 0..dim - 1 {
                        mu[j + 1] = s[j];
                        sum += s[j];
                    }
                    mu[0] = 1.0 - sum;
                    let mut p = [0.0; 3];
                    for (m, v) in mu.iter().zip(&fv) {
                        for c in 0..3 {
                            p[c] += m * v[c];
                        }
                    }
                    p
                })
                .collect()
        })
        .collect()
}
