//! Error norms against exact-solution callbacks.
//!
//! All integrals use per-cell (or per-face) partial sums computed in parallel
//! and reduced sequentially in index order.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::assembly::{cell_map, QuadratureData};
use crate::mesh::{dot, sub, Mesh};
use crate::space::DofMap;
use crate::Point;

pub type ScalarField = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&Point) -> Point + Send + Sync>;

/// A smooth solution with its gradient and Laplacian; the manufactured data
/// are `f = -Δu` and `g = u|_Γ`.
#[derive(Clone)]
pub struct ExactSolution {
    dim: usize,
    name: String,
    value: ScalarField,
    gradient: VectorField,
    laplacian: ScalarField,
}

impl fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExactSolution").field("dim", &self.dim).field("name", &self.name).finish()
    }
}

impl ExactSolution {
    pub fn new(
        dim: usize,
        name: impl Into<String>,
        value: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&Point) -> Point + Send + Sync + 'static,
        laplacian: impl Fn(&Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            name: name.into(),
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            laplacian: Arc::new(laplacian),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self, p: &Point) -> f64 {
        (self.value)(p)
    }

    pub fn gradient(&self, p: &Point) -> Point {
        (self.gradient)(p)
    }

    pub fn laplacian(&self, p: &Point) -> f64 {
        (self.laplacian)(p)
    }

    /// Right-hand side `f = -Δu`.
    pub fn source(&self, p: &Point) -> f64 {
        -(self.laplacian)(p)
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, "zero", |_| 0.0, |_| [0.0; 3], |_| 0.0)
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::new(dim, "constant", move |_| c, |_| [0.0; 3], |_| 0.0)
    }

    /// `Π_i sin(π x_i)`, vanishing on the whole boundary.
    pub fn sine_product(dim: usize) -> Self {
        Self::new(
            dim,
            "sine_product",
            move |p| (0..dim).map(|i| (PI * p[i]).sin()).product(),
            move |p| {
                let mut g = [0.0; 3];
                for i in 0..dim {
                    g[i] = (0..dim)
                        .map(|j| if j == i { PI * (PI * p[j]).cos() } else { (PI * p[j]).sin() })
                        .product();
                }
                g
            },
            move |p| -(dim as f64) * PI * PI * (0..dim).map(|i| (PI * p[i]).sin()).product::<f64>(),
        )
    }

    /// `sin(πx) cos(πy)`, with non-zero Dirichlet data on `y = 0` and `y = 1`.
    pub fn sine2d() -> Self {
        Self::new(
            2,
            "sine2d",
            |p| (PI * p[0]).sin() * (PI * p[1]).cos(),
            |p| {
                [
                    PI * (PI * p[0]).cos() * (PI * p[1]).cos(),
                    -PI * (PI * p[0]).sin() * (PI * p[1]).sin(),
                    0.0,
                ]
            },
            |p| -2.0 * PI * PI * (PI * p[0]).sin() * (PI * p[1]).cos(),
        )
    }

    /// Components of the vector solution on the unit cube:
    /// `(sin πy sin πz, sin πz sin πx, sin πx sin πy)`.
    pub fn sine3d_components() -> [Self; 3] {
        [0usize, 1, 2].map(|c| {
            let (a, b) = ((c + 1) % 3, (c + 2) % 3);
            Self::new(
                3,
                format!("sine3d_u{}", c + 1),
                move |p| (PI * p[a]).sin() * (PI * p[b]).sin(),
                move |p| {
                    let mut g = [0.0; 3];
                    g[a] = PI * (PI * p[a]).cos() * (PI * p[b]).sin();
                    g[b] = PI * (PI * p[a]).sin() * (PI * p[b]).cos();
                    g
                },
                move |p| -2.0 * PI * PI * (PI * p[a]).sin() * (PI * p[b]).sin(),
            )
        })
    }

    /// Global polynomial `(1/2 + x + 0.7 y + 0.3 z)^k` of degree `k`.
    pub fn polynomial(dim: usize, k: usize) -> Self {
        let c = if dim == 2 { [1.0, 0.7, 0.0] } else { [1.0, 0.7, 0.3] };
        let kf = k as f64;
        let s = move |p: &Point| 0.5 + dot(c, *p);
        Self::new(
            dim,
            format!("polynomial_{k}"),
            move |p| s(p).powi(k as i32),
            move |p| {
                let d = kf * s(p).powi(k as i32 - 1);
                [d * c[0], d * c[1], d * c[2]]
            },
            move |p| {
                if k < 2 {
                    0.0
                } else {
                    kf * (kf - 1.0) * s(p).powi(k as i32 - 2) * dot(c, c)
                }
            },
        )
    }

    /// Largest deviations of the gradient and Laplacian callbacks from central
    /// differences (step `1e-6`) at the given points. The Laplacian is checked
    /// against differences of the gradient.
    pub fn consistency_defect(&self, points: &[Point]) -> (f64, f64) {
        let h = 1e-6;
        let mut grad_err = 0.0f64;
        let mut lap_err = 0.0f64;
        for p in points {
            let g = self.gradient(p);
            let mut lap = 0.0;
            for d in 0..self.dim {
                let mut pp = *p;
                let mut pm = *p;
                pp[d] += h;
                pm[d] -= h;
                let fd = (self.value(&pp) - self.value(&pm)) / (2.0 * h);
                grad_err = grad_err.max((fd - g[d]).abs());
                lap += (self.gradient(&pp)[d] - self.gradient(&pm)[d]) / (2.0 * h);
            }
            lap_err = lap_err.max((lap - self.laplacian(p)).abs());
        }
        (grad_err, lap_err)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorReport {
    pub l2_abs: f64,
    pub l2_rel: f64,
    pub h1_abs: f64,
    pub h1_rel: f64,
    /// `‖h^-1/2 (u - u_h)‖_{0,Γ}`.
    pub bnd_abs: f64,
    pub residual: f64,
    /// `‖u‖_0` with the same quadrature.
    pub l2_exact: f64,
    /// `‖∇u‖_0` with the same quadrature.
    pub h1_exact: f64,
}

impl ErrorReport {
    /// Root-sum-of-squares over the components of a vector solution; the
    /// residual is the largest component residual.
    pub fn combine(parts: &[ErrorReport]) -> ErrorReport {
        let rss = |f: fn(&ErrorReport) -> f64| parts.iter().map(|r| f(r).powi(2)).sum::<f64>().sqrt();
        let l2_abs = rss(|r| r.l2_abs);
        let h1_abs = rss(|r| r.h1_abs);
        let l2_exact = rss(|r| r.l2_exact);
        let h1_exact = rss(|r| r.h1_exact);
        ErrorReport {
            l2_abs,
            l2_rel: ratio(l2_abs, l2_exact),
            h1_abs,
            h1_rel: ratio(h1_abs, h1_exact),
            bnd_abs: rss(|r| r.bnd_abs),
            residual: parts.iter().map(|r| r.residual).fold(0.0, f64::max),
            l2_exact,
            h1_exact,
        }
    }
}

fn ratio(err: f64, norm: f64) -> f64 {
    if norm > 0.0 {
        err / norm
    } else {
        err
    }
}

/// Squared volume integrals `(‖u - u_h‖², ‖∇(u - u_h)‖², ‖u‖², ‖∇u‖²)`.
fn volume_integrals(mesh: &Mesh, space: &DofMap, coeffs: &[f64], exact: &ExactSolution, degree: usize) -> [f64; 4] {
    let quad = QuadratureData::new(space, degree).expect("supported quadrature degree");
    let n = space.dofs_per_cell();
    let parts: Vec<[f64; 4]> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let map = cell_map(mesh, c);
            let mut local = vec![0.0; n];
            space.gather(c, coeffs, &mut local);
            let mut acc = [0.0; 4];
            for (q, &w) in quad.volume_weights.iter().enumerate() {
                let x = map.map(&quad.volume_points[q]);
                let uh: f64 = local.iter().zip(quad.volume.values_at(q)).map(|(a, b)| a * b).sum();
                let mut rg = [0.0; 3];
                for (a, g) in local.iter().zip(quad.volume.grads_at(q)) {
                    for d in 0..3 {
                        rg[d] += a * g[d];
                    }
                }
                let guh = map.push_gradient(&rg);
                let u = exact.value(&x);
                let gu = exact.gradient(&x);
                let e = sub(gu, guh);
                let wq = w * map.det;
                acc[0] += wq * (u - uh) * (u - uh);
                acc[1] += wq * dot(e, e);
                acc[2] += wq * u * u;
                acc[3] += wq * dot(gu, gu);
            }
            acc
        })
        .collect();
    let mut total = [0.0; 4];
    for p in &parts {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}

/// What is integrated over boundary faces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryQuantity {
    /// `Σ_F h_F^-w ∫_F (u - u_h)²`
    Value { weight_exponent: f64 },
    /// `Σ_F ∫_F |∇(u - u_h)|²`
    Gradient,
}

/// Square root of the boundary integral selected by `quantity`.
pub fn boundary_error(
    mesh: &Mesh,
    space: &DofMap,
    coeffs: &[f64],
    exact: &ExactSolution,
    quantity: BoundaryQuantity,
    degree: usize,
) -> f64 {
    let quad = QuadratureData::new(space, degree).expect("supported quadrature degree");
    let n = space.dofs_per_cell();
    let parts: Vec<f64> = mesh
        .boundary_faces()
        .par_iter()
        .map(|bf| {
            let map = cell_map(mesh, bf.cell);
            let tab = &quad.faces[bf.local_face];
            let pts = &quad.face_points[bf.local_face];
            let mut local = vec![0.0; n];
            space.gather(bf.cell, coeffs, &mut local);
            let scale = bf.area / quad.face_reference_measure;
            let mut acc = 0.0;
            for (q, &w) in quad.face_weights.iter().enumerate() {
                let x = map.map(&pts[q]);
                let v = match quantity {
                    BoundaryQuantity::Value { .. } => {
                        let uh: f64 = local.iter().zip(tab.values_at(q)).map(|(a, b)| a * b).sum();
                        let e = exact.value(&x) - uh;
                        e * e
                    }
                    BoundaryQuantity::Gradient => {
                        let mut rg = [0.0; 3];
                        for (a, g) in local.iter().zip(tab.grads_at(q)) {
                            for d in 0..3 {
                                rg[d] += a * g[d];
                            }
                        }
                        let e = sub(exact.gradient(&x), map.push_gradient(&rg));
                        dot(e, e)
                    }
                };
                acc += w * scale * v;
            }
            match quantity {
                BoundaryQuantity::Value { weight_exponent } if weight_exponent != 0.0 => {
                    acc * bf.diameter.powf(-weight_exponent)
                }
                _ => acc,
            }
        })
        .collect();
    parts.iter().sum::<f64>().sqrt()
}

pub fn default_error_degree(space: &DofMap) -> usize {
    2 * space.degree() + 2
}

/// `‖u - u_h‖_0` with quadrature degree `2k + 2`.
pub fn l2_error(mesh: &Mesh, space: &DofMap, coeffs: &[f64], exact: &ExactSolution) -> f64 {
    volume_integrals(mesh, space, coeffs, exact, default_error_degree(space))[0].sqrt()
}

/// `‖∇(u - u_h)‖_0` with quadrature degree `2k + 2`.
pub fn h1_semi_error(mesh: &Mesh, space: &DofMap, coeffs: &[f64], exact: &ExactSolution) -> f64 {
    volume_integrals(mesh, space, coeffs, exact, default_error_degree(space))[1].sqrt()
}

/// `‖h^-1/2 (u - u_h)‖_{0,Γ}` with face quadrature degree `2k + 2`.
pub fn boundary_weighted_error(mesh: &Mesh, space: &DofMap, coeffs: &[f64], exact: &ExactSolution) -> f64 {
    boundary_error(
        mesh,
        space,
        coeffs,
        exact,
        BoundaryQuantity::Value { weight_exponent: 1.0 },
        default_error_degree(space),
    )
}

/// All error quantities of one scalar solve. `extra_degree` raises the
/// quadrature degree above `2k + 2`.
pub fn error_report(
    mesh: &Mesh,
    space: &DofMap,
    coeffs: &[f64],
    exact: &ExactSolution,
    extra_degree: usize,
    residual: f64,
) -> ErrorReport {
    let degree = default_error_degree(space) + extra_degree;
    let [e0, e1, n0, n1] = volume_integrals(mesh, space, coeffs, exact, degree);
    let bnd_abs = boundary_error(
        mesh,
        space,
        coeffs,
        exact,
        BoundaryQuantity::Value { weight_exponent: 1.0 },
        degree,
    );
    let (l2_abs, h1_abs, l2_exact, h1_exact) = (e0.sqrt(), e1.sqrt(), n0.sqrt(), n1.sqrt());
    ErrorReport {
        l2_abs,
        l2_rel: ratio(l2_abs, l2_exact),
        h1_abs,
        h1_rel: ratio(h1_abs, h1_exact),
        bnd_abs,
        residual,
        l2_exact,
        h1_exact,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(dim: usize, n: usize) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        (0..n)
            .map(|_| {
                let mut p = [0.0; 3];
                for x in p.iter_mut().take(dim) {
                    *x = rng.gen::<f64>();
                }
                p
            })
            .collect()
    }

    #[test]
    fn exact_solutions_are_consistent() {
        let mut all = vec![ExactSolution::sine2d(), ExactSolution::sine_product(2), ExactSolution::sine_product(3)];
        all.extend(ExactSolution::sine3d_components());
        for k in 1..=3 {
            all.push(ExactSolution::polynomial(2, k));
            all.push(ExactSolution::polynomial(3, k));
        }
        for u in &all {
            let (g, l) = u.consistency_defect(&random_points(u.dim(), 50));
            assert!(g < 1e-6, "{}: gradient defect {g}", u.name());
            assert!(l < 1e-4, "{}: laplacian defect {l}", u.name());
        }
    }

    #[test]
    fn norms_of_sine_with_zero_coefficients() {
        let mesh = build_mesh(2, 4, 1.0).unwrap();
        let space = DofMap::new(&mesh, 2).unwrap();
        let zero = vec![0.0; space.num_dofs()];
        let u = ExactSolution::sine_product(2);
        assert!((l2_error(&mesh, &space, &zero, &u) - 0.5).abs() < 1e-10);
        let h1 = h1_semi_error(&mesh, &space, &zero, &u);
        assert!((h1 - PI / 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn interpolants_of_polynomials_are_exact() {
        for k in 1..=3 {
            let mesh = build_mesh(2, 2, 1.5).unwrap();
            let space = DofMap::new(&mesh, k).unwrap();
            let u = ExactSolution::polynomial(2, k);
            let c = space.nodal_interpolant(|p| u.value(p));
            assert!(l2_error(&mesh, &space, &c, &u) < 1e-12);
            assert!(h1_semi_error(&mesh, &space, &c, &u) < 1e-11);
            assert!(boundary_weighted_error(&mesh, &space, &c, &u) < 1e-11);
        }
    }

    #[test]
    fn weighted_boundary_norm_of_constant() {
        for level in 1..=4u32 {
            let mesh = build_mesh(2, level, 1.0).unwrap();
            let space = DofMap::new(&mesh, 1).unwrap();
            let zero = vec![0.0; space.num_dofs()];
            let got = boundary_weighted_error(&mesh, &space, &zero, &ExactSolution::constant(2, 1.0));
            let want = 2.0 * 2f64.powf(level as f64 / 2.0);
            assert!((got - want).abs() < 1e-12 * want, "{got} vs {want}");
        }
    }

    #[test]
    fn interpolation_error_rates() {
        let u = ExactSolution::sine2d();
        for k in 1..=2usize {
            let errs: Vec<[f64; 3]> = [3u32, 4]
                .iter()
                .map(|&l| {
                    let mesh = build_mesh(2, l, 1.0).unwrap();
                    let space = DofMap::new(&mesh, k).unwrap();
                    let c = space.nodal_interpolant(|p| u.value(p));
                    [
                        l2_error(&mesh, &space, &c, &u),
                        h1_semi_error(&mesh, &space, &c, &u),
                        boundary_weighted_error(&mesh, &space, &c, &u),
                    ]
                })
                .collect();
            let ratio = |i: usize| errs[0][i] / errs[1][i];
            let p = 2f64.powi(k as i32);
            assert!((ratio(0) / (2.0 * p) - 1.0).abs() < 0.15, "L2 ratio {}", ratio(0));
            assert!((ratio(1) / p - 1.0).abs() < 0.10, "H1 ratio {}", ratio(1));
            // nodal interpolation is exact at boundary nodes: the trace error is
            // one order better than the weighted-norm bound
            assert!(ratio(2) >= p * 0.85, "boundary ratio {}", ratio(2));
        }
    }

    #[test]
    fn combine_is_root_sum_of_squares() {
        let a = ErrorReport {
            l2_abs: 3.0,
            l2_exact: 1.0,
            h1_abs: 1.0,
            h1_exact: 2.0,
            residual: 1e-14,
            ..Default::default()
        };
        let b = ErrorReport {
            l2_abs: 4.0,
            l2_exact: 1.0,
            h1_abs: 0.0,
            h1_exact: 0.0,
            residual: 1e-13,
            ..Default::default()
        };
        let c = ErrorReport::combine(&[a, b]);
        assert_eq!(c.l2_abs, 5.0);
        assert!((c.l2_rel - 5.0 / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(c.h1_rel, 0.5);
        assert_eq!(c.residual, 1e-13);
    }

    #[test]
    fn triangle_inequality_on_averages() {
        let mesh = build_mesh(2, 3, 1.0).unwrap();
        let space = DofMap::new(&mesh, 2).unwrap();
        let u = ExactSolution::sine2d();
        let a: Vec<f64> = space.nodal_interpolant(|p| u.value(p));
        let b: Vec<f64> = space.nodal_interpolant(|p| p[0] * p[1]);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        for f in [l2_error, h1_semi_error, boundary_weighted_error] {
            let lhs = f(&mesh, &space, &mid, &u);
            let rhs = 0.5 * (f(&mesh, &space, &a, &u) + f(&mesh, &space, &b, &u));
            assert!(lhs <= rhs + 1e-12);
        }
    }
}
