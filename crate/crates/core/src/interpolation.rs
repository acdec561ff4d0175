//! The boundary-projected interpolant.
//!
//! Interior DOFs take nodal values. The boundary DOFs are fixed by the
//! weighted trace projection
//!
//! ```text
//! <h^-α (u - I_h u), v_h>_Γ = 0   for every v_h in the trace space,
//! ```
//!
//! or its unweighted counterpart, which is what the penalty-free analysis uses.

use std::io::Write;

use crate::assembly::{cell_map, QuadratureData};
use crate::element::MAX_QUADRATURE_DEGREE;
use crate::error::{Error, Result};
use crate::mesh::{build_mesh, Mesh};
use crate::norms::{boundary_error, l2_error, BoundaryQuantity, ExactSolution};
use crate::solver::DirectSolver;
use crate::space::DofMap;
use crate::sparse::CsrMatrix;
use crate::study::{compute_rates, fmt_float, fmt_rate};

/// Condition number above which the boundary projection is rejected.
pub const MAX_BOUNDARY_CONDITION: f64 = 1e14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionVariant {
    /// Face weight `h^-α`.
    Weighted,
    /// Plain boundary L² projection.
    Plain,
}

/// Boundary mass matrix over the boundary DOFs, in the order of
/// [`DofMap::boundary_dofs`].
#[derive(Debug, Clone)]
pub struct BoundaryProjection {
    variant: ProjectionVariant,
    alpha: f64,
    boundary_mass: CsrMatrix,
    boundary_dofs: Vec<usize>,
    local_index: Vec<usize>,
    quadrature_degree: usize,
}

impl BoundaryProjection {
    pub fn new(mesh: &Mesh, space: &DofMap, variant: ProjectionVariant, alpha: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::InvalidArgument(format!("alpha must be finite, got {alpha}")));
        }
        let boundary_dofs: Vec<usize> = space.boundary_dofs().iter().map(|&d| d as usize).collect();
        let mut local_index = vec![usize::MAX; space.num_dofs()];
        for (l, &g) in boundary_dofs.iter().enumerate() {
            local_index[g] = l;
        }
        let mut proj = Self {
            variant,
            alpha,
            boundary_mass: CsrMatrix::identity(0),
            boundary_dofs,
            local_index,
            quadrature_degree: MAX_QUADRATURE_DEGREE,
        };
        let quad = QuadratureData::new(space, proj.quadrature_degree)?;
        let elem = space.element();
        let face_nodes: Vec<Vec<usize>> = (0..=space.dim()).map(|f| elem.face_nodes(f)).collect();

        let mut rows = vec![Vec::new(); proj.boundary_dofs.len()];
        for bf in mesh.boundary_faces() {
            let dofs = space.cell_dofs(bf.cell);
            let local: Vec<usize> = face_nodes[bf.local_face].iter().map(|&i| proj.local_index[dofs[i] as usize]).collect();
            for &i in &local {
                rows[i].extend_from_slice(&local);
            }
        }
        let mut mass = CsrMatrix::from_pattern(proj.boundary_dofs.len(), rows);
        for bf in mesh.boundary_faces() {
            let dofs = space.cell_dofs(bf.cell);
            let nodes = &face_nodes[bf.local_face];
            let tab = &quad.faces[bf.local_face];
            let scale = bf.area / quad.face_reference_measure * proj.weight(bf.diameter);
            for (q, &w) in quad.face_weights.iter().enumerate() {
                let phi = tab.values_at(q);
                for &i in nodes {
                    for &j in nodes {
                        let (gi, gj) = (proj.local_index[dofs[i] as usize], proj.local_index[dofs[j] as usize]);
                        mass.add(gi, gj, w * scale * phi[i] * phi[j]);
                    }
                }
            }
        }
        proj.boundary_mass = mass;
        Ok(proj)
    }

    pub fn variant(&self) -> ProjectionVariant {
        self.variant
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn boundary_mass(&self) -> &CsrMatrix {
        &self.boundary_mass
    }

    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary_dofs
    }

    fn weight(&self, h: f64) -> f64 {
        match self.variant {
            ProjectionVariant::Weighted => h.powf(-self.alpha),
            ProjectionVariant::Plain => 1.0,
        }
    }

    /// `<w (u - v_h), φ_i>_Γ` for every boundary DOF `i`, where `v_h` has
    /// coefficients `coeffs` (or is zero when `coeffs` is `None`).
    fn trace_moments(&self, mesh: &Mesh, space: &DofMap, u: &ExactSolution, coeffs: Option<&[f64]>) -> Result<Vec<f64>> {
        let quad = QuadratureData::new(space, self.quadrature_degree)?;
        let elem = space.element();
        let n = space.dofs_per_cell();
        let mut out = vec![0.0; self.boundary_dofs.len()];
        let mut local = vec![0.0; n];
        for bf in mesh.boundary_faces() {
            let map = cell_map(mesh, bf.cell);
            let dofs = space.cell_dofs(bf.cell);
            let nodes = elem.face_nodes(bf.local_face);
            let tab = &quad.faces[bf.local_face];
            let pts = &quad.face_points[bf.local_face];
            if let Some(c) = coeffs {
                space.gather(bf.cell, c, &mut local);
            }
            let scale = bf.area / quad.face_reference_measure * self.weight(bf.diameter);
            for (q, &w) in quad.face_weights.iter().enumerate() {
                let phi = tab.values_at(q);
                let mut r = u.value(&map.map(&pts[q]));
                if coeffs.is_some() {
                    r -= local.iter().zip(phi).map(|(a, b)| a * b).sum::<f64>();
                }
                for &i in &nodes {
                    out[self.local_index[dofs[i] as usize]] += w * scale * r * phi[i];
                }
            }
        }
        Ok(out)
    }

    /// Ratio of the extreme eigenvalues of the boundary mass matrix, from
    /// power iteration and inverse power iteration.
    pub fn condition_estimate(&self) -> Result<f64> {
        let n = self.boundary_mass.nrows();
        if n == 0 {
            return Ok(1.0);
        }
        let lu = DirectSolver::factor(&self.boundary_mass)?;
        let start: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
        let lambda_max = power_iteration(start.clone(), |x| Ok(self.boundary_mass.mul_vec(x)))?;
        let inv_max = power_iteration(start, |x| lu.solve(x))?;
        Ok(lambda_max * inv_max)
    }

    /// Largest `|<w (u - I_h u), φ_i>_Γ|` over boundary DOFs `i`.
    pub fn orthogonality_residual(&self, mesh: &Mesh, space: &DofMap, u: &ExactSolution, coeffs: &[f64]) -> Result<f64> {
        if coeffs.len() != space.num_dofs() {
            return Err(Error::LengthMismatch {
                expected: space.num_dofs(),
                found: coeffs.len(),
            });
        }
        Ok(self
            .trace_moments(mesh, space, u, Some(coeffs))?
            .into_iter()
            .fold(0.0, |m, r| m.max(r.abs())))
    }
}

fn power_iteration(mut x: Vec<f64>, apply: impl Fn(&[f64]) -> Result<Vec<f64>>) -> Result<f64> {
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut lambda = 0.0;
    for _ in 0..200 {
        let nx = norm(&x);
        x.iter_mut().for_each(|a| *a /= nx);
        let y = apply(&x)?;
        let next = norm(&y);
        x = y;
        if (next - lambda).abs() <= 1e-6 * next {
            return Ok(next);
        }
        lambda = next;
    }
    Ok(lambda)
}

/// Nodal values in the interior, boundary values from the trace projection.
pub fn modified_interpolant(mesh: &Mesh, space: &DofMap, exact: &ExactSolution, proj: &BoundaryProjection) -> Result<Vec<f64>> {
    if proj.local_index.len() != space.num_dofs() {
        return Err(Error::LengthMismatch {
            expected: space.num_dofs(),
            found: proj.local_index.len(),
        });
    }
    let mut coeffs = space.nodal_interpolant(|p| exact.value(p));
    if proj.boundary_dofs.is_empty() {
        return Ok(coeffs);
    }
    let estimate = proj.condition_estimate()?;
    if !(estimate <= MAX_BOUNDARY_CONDITION) {
        return Err(Error::IllConditioned { estimate });
    }
    let rhs = proj.trace_moments(mesh, space, exact, None)?;
    let lu = DirectSolver::factor(&proj.boundary_mass)?;
    let (c, _) = lu.solve_refined(&proj.boundary_mass, &rhs)?;
    for (&g, v) in proj.boundary_dofs.iter().zip(c) {
        coeffs[g] = v;
    }
    Ok(coeffs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationRow {
    pub level: u32,
    pub h: f64,
    pub dofs: usize,
    /// `‖u - I_h u‖_0`
    pub l2: f64,
    pub l2_rate: Option<f64>,
    /// `‖u - I_h u‖_{0,Γ}`
    pub bnd_l2: f64,
    pub bnd_l2_rate: Option<f64>,
    /// `‖∇(u - I_h u)‖_{0,Γ}`
    pub bnd_grad: f64,
    pub bnd_grad_rate: Option<f64>,
    pub orthogonality: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InterpolationTable {
    pub rows: Vec<InterpolationRow>,
}

pub const INTERPOLATION_CSV_HEADER: &str =
    "level,h,dofs,l2,l2_rate,bnd_l2,bnd_l2_rate,bnd_grad,bnd_grad_rate,orthogonality";

impl InterpolationTable {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{INTERPOLATION_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.level,
                fmt_float(r.h),
                r.dofs,
                fmt_float(r.l2),
                fmt_rate(r.l2_rate),
                fmt_float(r.bnd_l2),
                fmt_rate(r.bnd_l2_rate),
                fmt_float(r.bnd_grad),
                fmt_rate(r.bnd_grad_rate),
                fmt_float(r.orthogonality)
            )?;
        }
        Ok(())
    }

    pub fn write_markdown<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "| level | h | DoFs | L2 error | rate | boundary L2 | rate | boundary grad | rate | orthogonality |")?;
        writeln!(out, "|---|---|---|---|---|---|---|---|---|---|")?;
        let rate = |r: Option<f64>| r.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
        for r in &self.rows {
            writeln!(
                out,
                "| {} | 2^-{} | {} | {:.2e} | {} | {:.2e} | {} | {:.2e} | {} | {:.1e} |",
                r.level,
                r.level,
                r.dofs,
                r.l2,
                rate(r.l2_rate),
                r.bnd_l2,
                rate(r.bnd_l2_rate),
                r.bnd_grad,
                rate(r.bnd_grad_rate),
                r.orthogonality
            )?;
        }
        Ok(())
    }
}

/// Interpolation errors of `exact` on uniform meshes at `levels`.
pub fn interpolation_rate_study(
    dim: usize,
    degree: usize,
    levels: std::ops::RangeInclusive<u32>,
    alpha: f64,
    variant: ProjectionVariant,
    exact: &ExactSolution,
) -> Result<InterpolationTable> {
    if exact.dim() != dim {
        return Err(Error::InvalidArgument(format!(
            "solution is {}-dimensional, mesh is {dim}-dimensional",
            exact.dim()
        )));
    }
    if levels.is_empty() {
        return Err(Error::InvalidArgument("empty level range".into()));
    }
    let mut rows = Vec::new();
    for level in levels {
        let at = |e: Error| Error::AtLevel {
            level,
            source: Box::new(e),
        };
        let mesh = build_mesh(dim, level, 1.0).map_err(at)?;
        let space = DofMap::new(&mesh, degree).map_err(at)?;
        let proj = BoundaryProjection::new(&mesh, &space, variant, alpha).map_err(at)?;
        let coeffs = modified_interpolant(&mesh, &space, exact, &proj).map_err(at)?;
        let degree_err = (2 * degree + 4).min(MAX_QUADRATURE_DEGREE);
        rows.push(InterpolationRow {
            level,
            h: mesh.grid_spacing(),
            dofs: space.num_dofs(),
            l2: l2_error(&mesh, &space, &coeffs, exact),
            l2_rate: None,
            bnd_l2: boundary_error(&mesh, &space, &coeffs, exact, BoundaryQuantity::Value { weight_exponent: 0.0 }, degree_err),
            bnd_l2_rate: None,
            bnd_grad: boundary_error(&mesh, &space, &coeffs, exact, BoundaryQuantity::Gradient, degree_err),
            bnd_grad_rate: None,
            orthogonality: proj.orthogonality_residual(&mesh, &space, exact, &coeffs).map_err(at)?,
        });
    }
    let l2 = compute_rates(&rows.iter().map(|r| r.l2).collect::<Vec<_>>());
    let bl2 = compute_rates(&rows.iter().map(|r| r.bnd_l2).collect::<Vec<_>>());
    let bg = compute_rates(&rows.iter().map(|r| r.bnd_grad).collect::<Vec<_>>());
    for (i, r) in rows.iter_mut().enumerate() {
        r.l2_rate = l2[i];
        r.bnd_l2_rate = bl2[i];
        r.bnd_grad_rate = bg[i];
    }
    Ok(InterpolationTable { rows })
}
