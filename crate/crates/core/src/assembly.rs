//! Assembly of the Nitsche system
//!
//! ```text
//! a(u, v) = (∇u, ∇v) - <∇u·n, v>_Γ + β <u, ∇v·n>_Γ + c0 <h^-α u, v>_Γ
//! l(v)    = (f, v) + β <g, ∇v·n>_Γ + c0 <h^-α g, v>_Γ
//! ```
//!
//! Row `i` of the matrix tests against `φ_i`, column `j` is the trial function
//! `φ_j`. The weight `h` on a boundary face is that face's diameter.
//!
//! Local matrices are computed in parallel and scattered into the global
//! pattern in ascending cell and face order, so assembly is bit-reproducible.

use rayon::prelude::*;

use crate::element::{face_quadrature, lift_face_points, reference_measure, volume_quadrature, AffineMap, Tabulation};
use crate::error::{Error, Result};
use crate::mesh::{dot, BoundaryFace, Mesh};
use crate::space::DofMap;
use crate::sparse::CsrMatrix;
use crate::Point;

/// Sign of the boundary consistency term `<u, ∇v·n>_Γ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Beta {
    /// β = -1
    Symmetric,
    /// β = +1
    NonSymmetric,
}

impl Beta {
    pub fn sign(self) -> f64 {
        match self {
            Beta::Symmetric => -1.0,
            Beta::NonSymmetric => 1.0,
        }
    }

    pub fn from_sign(s: f64) -> Result<Self> {
        if s == 1.0 {
            Ok(Beta::NonSymmetric)
        } else if s == -1.0 {
            Ok(Beta::Symmetric)
        } else {
            Err(Error::InvalidConfig(format!("beta must be -1 or +1, got {s}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NitscheConfig {
    pub beta: Beta,
    pub alpha: f64,
    pub c0: f64,
}

impl NitscheConfig {
    pub fn new(beta: Beta, alpha: f64, c0: f64) -> Result<Self> {
        let cfg = Self { beta, alpha, c0 };
        cfg.validate()?;
        Ok(cfg)
    }

    /// β = +1 with penalty `c0 h^-α`.
    pub fn non_symmetric(alpha: f64, c0: f64) -> Result<Self> {
        Self::new(Beta::NonSymmetric, alpha, c0)
    }

    /// Symmetric method with α = 1; the penalty defaults to `10 k²`.
    pub fn symmetric(degree: usize, c0: Option<f64>) -> Result<Self> {
        Self::new(Beta::Symmetric, 1.0, c0.unwrap_or_else(|| default_symmetric_penalty(degree)))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must be >= 1, got {}", self.alpha)));
        }
        if !(self.c0.is_finite() && self.c0 >= 0.0) {
            return Err(Error::InvalidConfig(format!("c0 must be >= 0, got {}", self.c0)));
        }
        if self.beta == Beta::Symmetric && self.c0 <= 0.0 {
            return Err(Error::InvalidConfig("the symmetric method needs c0 > 0".into()));
        }
        Ok(())
    }

    /// Penalty weight `c0 h^-α` on a face of diameter `h`.
    pub fn penalty(&self, h: f64) -> f64 {
        if self.c0 == 0.0 {
            0.0
        } else {
            self.c0 * h.powf(-self.alpha)
        }
    }
}

pub fn default_symmetric_penalty(degree: usize) -> f64 {
    10.0 * (degree * degree) as f64
}

#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

/// Scalar callback evaluated at physical points.
pub type ScalarFn<'a> = &'a (dyn Fn(&Point) -> f64 + Sync);

/// Tabulated reference data for volume and face integrals at one quadrature degree.
#[derive(Debug, Clone)]
pub(crate) struct QuadratureData {
    pub volume_weights: Vec<f64>,
    pub volume_points: Vec<Point>,
    pub volume: Tabulation,
    pub face_weights: Vec<f64>,
    /// Per local face: lifted points in cell reference coordinates.
    pub face_points: Vec<Vec<Point>>,
    pub faces: Vec<Tabulation>,
    pub face_reference_measure: f64,
}

impl QuadratureData {
    pub fn new(space: &DofMap, degree: usize) -> Result<Self> {
        let dim = space.dim();
        let vol = volume_quadrature(dim, degree)?;
        let face = face_quadrature(dim, degree)?;
        let face_points = lift_face_points(dim, &face);
        let faces = face_points.iter().map(|p| Tabulation::new(space.element(), p)).collect();
        Ok(Self {
            volume: Tabulation::new(space.element(), &vol.points),
            volume_weights: vol.weights,
            volume_points: vol.points,
            face_weights: face.weights,
            face_points,
            faces,
            face_reference_measure: reference_measure(dim - 1),
        })
    }
}

pub(crate) fn cell_map(mesh: &Mesh, c: usize) -> AffineMap {
    AffineMap::new(mesh.dim(), &mesh.cell_points(c)).expect("mesh cells have positive volume")
}

/// Computes local matrices and load vectors and scatters them into global storage.
pub struct Assembler<'a> {
    mesh: &'a Mesh,
    space: &'a DofMap,
    config: NitscheConfig,
    quad: QuadratureData,
}

impl<'a> Assembler<'a> {
    /// Assembler with quadrature degree `2k`.
    pub fn new(mesh: &'a Mesh, space: &'a DofMap, config: NitscheConfig) -> Result<Self> {
        Self::with_quadrature_degree(mesh, space, config, 2 * space.degree())
    }

    pub fn with_quadrature_degree(mesh: &'a Mesh, space: &'a DofMap, config: NitscheConfig, degree: usize) -> Result<Self> {
        config.validate()?;
        if mesh.dim() != space.dim() {
            return Err(Error::InvalidArgument("mesh and space dimensions differ".into()));
        }
        Ok(Self {
            mesh,
            space,
            config,
            quad: QuadratureData::new(space, degree)?,
        })
    }

    pub fn config(&self) -> &NitscheConfig {
        &self.config
    }

    /// Volume block `∫_T ∇φ_j · ∇φ_i`, row-major `n × n`.
    pub fn cell_matrix(&self, c: usize) -> Vec<f64> {
        let n = self.space.dofs_per_cell();
        let map = cell_map(self.mesh, c);
        let mut local = vec![0.0; n * n];
        let mut grads = vec![[0.0; 3]; n];
        for (q, &w) in self.quad.volume_weights.iter().enumerate() {
            for (g, rg) in grads.iter_mut().zip(self.quad.volume.grads_at(q)) {
                *g = map.push_gradient(rg);
            }
            let wq = w * map.det;
            for i in 0..n {
                for j in 0..n {
                    local[i * n + j] += wq * dot(grads[i], grads[j]);
                }
            }
        }
        local
    }

    /// Boundary block of one boundary face, row-major `n × n`:
    /// `-<∇φ_j·n, φ_i> + β <φ_j, ∇φ_i·n> + c0 h^-α <φ_j, φ_i>`.
    pub fn face_matrix(&self, face: &BoundaryFace) -> Vec<f64> {
        let n = self.space.dofs_per_cell();
        let map = cell_map(self.mesh, face.cell);
        let tab = &self.quad.faces[face.local_face];
        let scale = face.area / self.quad.face_reference_measure;
        let beta = self.config.beta.sign();
        let pen = self.config.penalty(face.diameter);
        let mut local = vec![0.0; n * n];
        let mut dn = vec![0.0; n];
        for (q, &w) in self.quad.face_weights.iter().enumerate() {
            let phi = tab.values_at(q);
            for (d, rg) in dn.iter_mut().zip(tab.grads_at(q)) {
                *d = dot(map.push_gradient(rg), face.normal);
            }
            let wq = w * scale;
            for i in 0..n {
                for j in 0..n {
                    local[i * n + j] += wq * (-dn[j] * phi[i] + beta * phi[j] * dn[i] + pen * phi[j] * phi[i]);
                }
            }
        }
        local
    }

    /// `∫_T f φ_i`.
    pub fn cell_load(&self, c: usize, f: ScalarFn) -> Vec<f64> {
        let n = self.space.dofs_per_cell();
        let map = cell_map(self.mesh, c);
        let mut local = vec![0.0; n];
        for (q, &w) in self.quad.volume_weights.iter().enumerate() {
            let x = map.map(&self.quad.volume_points[q]);
            let fx = f(&x) * w * map.det;
            for (l, phi) in local.iter_mut().zip(self.quad.volume.values_at(q)) {
                *l += fx * phi;
            }
        }
        local
    }

    /// `β <g, ∇φ_i·n> + c0 h^-α <g, φ_i>` on one boundary face.
    pub fn face_load(&self, face: &BoundaryFace, g: ScalarFn) -> Vec<f64> {
        let n = self.space.dofs_per_cell();
        let map = cell_map(self.mesh, face.cell);
        let tab = &self.quad.faces[face.local_face];
        let pts = &self.quad.face_points[face.local_face];
        let scale = face.area / self.quad.face_reference_measure;
        let beta = self.config.beta.sign();
        let pen = self.config.penalty(face.diameter);
        let mut local = vec![0.0; n];
        for (q, &w) in self.quad.face_weights.iter().enumerate() {
            let gx = g(&map.map(&pts[q])) * w * scale;
            let phi = tab.values_at(q);
            for (i, rg) in tab.grads_at(q).iter().enumerate() {
                let dn = dot(map.push_gradient(rg), face.normal);
                local[i] += gx * (beta * dn + pen * phi[i]);
            }
        }
        local
    }

    /// Sparsity pattern: all DOF pairs sharing a cell. Boundary faces couple
    /// only DOFs of their own cell, so this covers every term.
    pub fn pattern(&self) -> CsrMatrix {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); self.space.num_dofs()];
        for c in 0..self.mesh.num_cells() {
            let dofs = self.space.cell_dofs(c);
            for &i in dofs {
                rows[i as usize].extend(dofs.iter().map(|&j| j as usize));
            }
        }
        CsrMatrix::from_pattern(self.space.num_dofs(), rows)
    }

    pub fn matrix(&self) -> CsrMatrix {
        let mut a = self.pattern();
        let cells: Vec<Vec<f64>> = (0..self.mesh.num_cells()).into_par_iter().map(|c| self.cell_matrix(c)).collect();
        for (c, local) in cells.iter().enumerate() {
            self.scatter_matrix(&mut a, c, local);
        }
        let faces: Vec<Vec<f64>> = self.mesh.boundary_faces().par_iter().map(|f| self.face_matrix(f)).collect();
        for (f, local) in self.mesh.boundary_faces().iter().zip(&faces) {
            self.scatter_matrix(&mut a, f.cell, local);
        }
        a
    }

    pub fn rhs(&self, f: ScalarFn, g: ScalarFn) -> Vec<f64> {
        let mut b = vec![0.0; self.space.num_dofs()];
        let cells: Vec<Vec<f64>> = (0..self.mesh.num_cells()).into_par_iter().map(|c| self.cell_load(c, f)).collect();
        for (c, local) in cells.iter().enumerate() {
            self.scatter_vector(&mut b, c, local);
        }
        let faces: Vec<Vec<f64>> = self.mesh.boundary_faces().par_iter().map(|bf| self.face_load(bf, g)).collect();
        for (bf, local) in self.mesh.boundary_faces().iter().zip(&faces) {
            self.scatter_vector(&mut b, bf.cell, local);
        }
        b
    }

    fn scatter_matrix(&self, a: &mut CsrMatrix, c: usize, local: &[f64]) {
        let dofs = self.space.cell_dofs(c);
        let n = dofs.len();
        for (i, &gi) in dofs.iter().enumerate() {
            for (j, &gj) in dofs.iter().enumerate() {
                a.add(gi as usize, gj as usize, local[i * n + j]);
            }
        }
    }

    fn scatter_vector(&self, b: &mut [f64], c: usize, local: &[f64]) {
        for (&gi, &v) in self.space.cell_dofs(c).iter().zip(local) {
            b[gi as usize] += v;
        }
    }
}

/// Assembles the Nitsche system for `-Δu = f` in Ω, `u = g` on Γ.
pub fn assemble_system(mesh: &Mesh, space: &DofMap, config: NitscheConfig, f: ScalarFn, g: ScalarFn) -> Result<LinearSystem> {
    let asm = Assembler::new(mesh, space, config)?;
    Ok(LinearSystem {
        matrix: asm.matrix(),
        rhs: asm.rhs(f, g),
    })
}

/// Matrix-free evaluation of `a(u_h, v_h)` by quadrature of the finite element
/// functions themselves.
pub fn apply_form(mesh: &Mesh, space: &DofMap, config: NitscheConfig, u: &[f64], v: &[f64]) -> Result<f64> {
    config.validate()?;
    for x in [u, v] {
        if x.len() != space.num_dofs() {
            return Err(Error::LengthMismatch {
                expected: space.num_dofs(),
                found: x.len(),
            });
        }
    }
    let quad = QuadratureData::new(space, 2 * space.degree())?;
    let n = space.dofs_per_cell();
    let beta = config.beta.sign();

    let volume: Vec<f64> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let map = cell_map(mesh, c);
            let (mut ul, mut vl) = (vec![0.0; n], vec![0.0; n]);
            space.gather(c, u, &mut ul);
            space.gather(c, v, &mut vl);
            let mut sum = 0.0;
            for (q, &w) in quad.volume_weights.iter().enumerate() {
                let (gu, gv) = fe_gradients(&map, quad.volume.grads_at(q), &ul, &vl);
                sum += w * map.det * dot(gu, gv);
            }
            sum
        })
        .collect();

    let boundary: Vec<f64> = mesh
        .boundary_faces()
        .par_iter()
        .map(|bf| {
            let map = cell_map(mesh, bf.cell);
            let tab = &quad.faces[bf.local_face];
            let (mut ul, mut vl) = (vec![0.0; n], vec![0.0; n]);
            space.gather(bf.cell, u, &mut ul);
            space.gather(bf.cell, v, &mut vl);
            let scale = bf.area / quad.face_reference_measure;
            let pen = config.penalty(bf.diameter);
            let mut sum = 0.0;
            for (q, &w) in quad.face_weights.iter().enumerate() {
                let phi = tab.values_at(q);
                let uq: f64 = ul.iter().zip(phi).map(|(a, b)| a * b).sum();
                let vq: f64 = vl.iter().zip(phi).map(|(a, b)| a * b).sum();
                let (gu, gv) = fe_gradients(&map, tab.grads_at(q), &ul, &vl);
                let (dnu, dnv) = (dot(gu, bf.normal), dot(gv, bf.normal));
                sum += w * scale * (-dnu * vq + beta * uq * dnv + pen * uq * vq);
            }
            sum
        })
        .collect();

    Ok(volume.iter().sum::<f64>() + boundary.iter().sum::<f64>())
}

fn fe_gradients(map: &AffineMap, ref_grads: &[Point], u: &[f64], v: &[f64]) -> (Point, Point) {
    let mut gu = [0.0; 3];
    let mut gv = [0.0; 3];
    for ((rg, a), b) in ref_grads.iter().zip(u).zip(v) {
        for d in 0..3 {
            gu[d] += a * rg[d];
            gv[d] += b * rg[d];
        }
    }
    (map.push_gradient(&gu), map.push_gradient(&gv))
}

#[derive(Debug, Clone)]
pub struct StructureReport {
    /// `max |A - Aᵀ|` over all entries.
    pub symmetry_defect: f64,
    /// Same, restricted to DOFs of cells without a boundary face.
    pub interior_defect: f64,
    pub pass: bool,
}

/// Checks where the asymmetry of `A` lives. For β = -1 the whole matrix must be
/// symmetric; for β = +1 the block of DOFs not touching a boundary cell must be.
pub fn structure_check(matrix: &CsrMatrix, mesh: &Mesh, space: &DofMap, config: &NitscheConfig) -> StructureReport {
    let mut coupled = vec![false; space.num_dofs()];
    for bf in mesh.boundary_faces() {
        for &d in space.cell_dofs(bf.cell) {
            coupled[d as usize] = true;
        }
    }
    let symmetry_defect = matrix.symmetry_defect();
    let interior_defect = matrix.symmetry_defect_where(|i| !coupled[i]);
    let pass = match config.beta {
        Beta::Symmetric => symmetry_defect < 1e-12,
        Beta::NonSymmetric => interior_defect < 1e-12,
    };
    StructureReport {
        symmetry_defect,
        interior_defect,
        pass,
    }
}
