//! Structured simplicial meshes of the unit square and unit cube.
//!
//! The square is divided into `2^level` by `2^level` cells, each split into two
//! right triangles along the diagonal from `(i, j)` to `(i + 1, j + 1)`. The cube
//! uses the Kuhn (Freudenthal) split of every cell into six tetrahedra along the
//! main diagonal. Both splits have no angle (2D) or dihedral angle (3D) above
//! π/2.
//!
//! A grading `γ > 1` pulls vertices toward the origin with the radial power map
//! `x ↦ x · ‖x‖_∞^(γ-1)`, which keeps the unit box and its faces fixed. Cells
//! near the origin shrink like `2^(-γ ℓ)` while their shape stays bounded.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::Point;

/// Minimal admissible angle (degrees) for graded meshes.
pub const MIN_ANGLE_FLOOR_DEG: f64 = 5.0;

const KUHN_PATHS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFace {
    /// Cell owning the face.
    pub cell: usize,
    /// Local face index; face `f` is the one opposite local vertex `f`.
    pub local_face: usize,
    /// Outward unit normal.
    pub normal: Point,
    /// Face diameter `h_E`.
    pub diameter: f64,
    /// (d-1)-dimensional measure.
    pub area: f64,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    vertices: Vec<Point>,
    cells: Vec<u32>,
    boundary_faces: Vec<BoundaryFace>,
    level: u32,
    grading: f64,
    unit_box: bool,
}

/// Builds the structured mesh of `[0,1]^dim` at the given refinement level.
///
/// `grading = 1` gives the uniform mesh.
pub fn build_mesh(dim: usize, level: u32, grading: f64) -> Result<Mesh> {
    if dim != 2 && dim != 3 {
        return Err(Error::InvalidArgument(format!("dimension must be 2 or 3, got {dim}")));
    }
    if !(grading.is_finite() && grading >= 1.0) {
        return Err(Error::InvalidArgument(format!("grading must be >= 1, got {grading}")));
    }
    if level >= 31 {
        return Err(Error::MeshTooLarge { dim, level });
    }
    let n = 1u64 << level;
    let nv = (n + 1).checked_pow(dim as u32).ok_or(Error::MeshTooLarge { dim, level })?;
    if nv > u32::MAX as u64 {
        return Err(Error::MeshTooLarge { dim, level });
    }
    let n = n as usize;
    let stride = n + 1;
    let graded = grading > 1.0;

    let mut vertices = Vec::with_capacity(nv as usize);
    let k_range = if dim == 3 { n + 1 } else { 1 };
    for k in 0..k_range {
        for j in 0..=n {
            for i in 0..=n {
                let mut p = [i as f64 / n as f64, j as f64 / n as f64, 0.0];
                if dim == 3 {
                    p[2] = k as f64 / n as f64;
                }
                if graded {
                    p = radial_grading(p, grading);
                }
                vertices.push(p);
            }
        }
    }

    let mut cells = Vec::new();
    if dim == 2 {
        cells.reserve(6 * n * n);
        for j in 0..n {
            for i in 0..n {
                let a = (i + stride * j) as u32;
                let b = a + 1;
                let d = a + stride as u32;
                let c = d + 1;
                cells.extend_from_slice(&[a, b, c, a, c, d]);
            }
        }
    } else {
        cells.reserve(24 * n * n * n);
        let step = [1, stride, stride * stride];
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let origin = i + stride * (j + stride * k);
                    for path in KUHN_PATHS {
                        let v0 = origin;
                        let v1 = v0 + step[path[0]];
                        let v2 = v1 + step[path[1]];
                        let v3 = v2 + step[path[2]];
                        if permutation_is_even(path) {
                            cells.extend_from_slice(&[v0 as u32, v1 as u32, v2 as u32, v3 as u32]);
                        } else {
                            cells.extend_from_slice(&[v0 as u32, v1 as u32, v3 as u32, v2 as u32]);
                        }
                    }
                }
            }
        }
    }

    let mut mesh = Mesh::assemble(dim, vertices, cells, level, grading, true)?;
    if graded {
        let (min_angle, _) = mesh.angle_range();
        let min_deg = min_angle.to_degrees();
        if min_deg < MIN_ANGLE_FLOOR_DEG {
            return Err(Error::GradingTooSevere {
                grading,
                min_angle_deg: min_deg,
                floor_deg: MIN_ANGLE_FLOOR_DEG,
            });
        }
    }
    mesh.level = level;
    Ok(mesh)
}

fn radial_grading(p: Point, grading: f64) -> Point {
    let r = p[0].max(p[1]).max(p[2]);
    if r == 0.0 {
        return p;
    }
    let s = r.powf(grading - 1.0);
    [p[0] * s, p[1] * s, p[2] * s]
}

fn permutation_is_even(p: [usize; 3]) -> bool {
    let mut inversions = 0;
    for a in 0..3 {
        for b in a + 1..3 {
            if p[a] > p[b] {
                inversions += 1;
            }
        }
    }
    inversions % 2 == 0
}

impl Mesh {
    /// Builds a mesh from explicit vertices and cells (each cell lists `dim + 1`
    /// vertex indices). Boundary faces are the faces owned by a single cell.
    pub fn from_cells(dim: usize, vertices: Vec<Point>, cells: Vec<[u32; 4]>) -> Result<Mesh> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidArgument(format!("dimension must be 2 or 3, got {dim}")));
        }
        let nv = dim + 1;
        let mut flat = Vec::with_capacity(cells.len() * nv);
        for c in &cells {
            for &v in &c[..nv] {
                if v as usize >= vertices.len() {
                    return Err(Error::InvalidArgument(format!("vertex index {v} out of range")));
                }
            }
            flat.extend_from_slice(&c[..nv]);
        }
        Mesh::assemble(dim, vertices, flat, 0, 1.0, false)
    }

    fn assemble(
        dim: usize,
        vertices: Vec<Point>,
        cells: Vec<u32>,
        level: u32,
        grading: f64,
        unit_box: bool,
    ) -> Result<Mesh> {
        let mut mesh = Mesh {
            dim,
            vertices,
            cells,
            boundary_faces: Vec::new(),
            level,
            grading,
            unit_box,
        };
        for c in 0..mesh.num_cells() {
            let vol = mesh.cell_volume(c);
            if !(vol > 0.0) {
                return Err(Error::InvertedCell { cell: c, volume: vol });
            }
        }
        mesh.boundary_faces = mesh.find_boundary_faces();
        Ok(mesh)
    }

    fn find_boundary_faces(&self) -> Vec<BoundaryFace> {
        let counts = self.face_counts();
        let mut faces = Vec::new();
        for c in 0..self.num_cells() {
            for f in 0..=self.dim {
                if counts[&self.face_key(c, f)] == 1 {
                    faces.push(self.make_boundary_face(c, f));
                }
            }
        }
        faces
    }

    fn face_counts(&self) -> HashMap<[u32; 3], u32> {
        let mut counts = HashMap::with_capacity(self.num_cells() * (self.dim + 1));
        for c in 0..self.num_cells() {
            for f in 0..=self.dim {
                *counts.entry(self.face_key(c, f)).or_insert(0) += 1;
            }
        }
        counts
    }

    fn face_key(&self, cell: usize, face: usize) -> [u32; 3] {
        let mut key = [u32::MAX; 3];
        let fv = self.face_vertices(cell, face);
        key[..self.dim].copy_from_slice(&fv[..self.dim]);
        key[..self.dim].sort_unstable();
        key
    }

    fn make_boundary_face(&self, cell: usize, face: usize) -> BoundaryFace {
        let fv = self.face_vertices(cell, face);
        let pts: Vec<Point> = fv[..self.dim].iter().map(|&v| self.vertices[v as usize]).collect();
        let opposite = self.vertices[self.cell(cell)[face] as usize];
        let (mut normal, area) = if self.dim == 2 {
            let t = sub(pts[1], pts[0]);
            let len = norm(t);
            ([t[1] / len, -t[0] / len, 0.0], len)
        } else {
            let c = cross(sub(pts[1], pts[0]), sub(pts[2], pts[0]));
            let len = norm(c);
            ([c[0] / len, c[1] / len, c[2] / len], 0.5 * len)
        };
        if dot(normal, sub(pts[0], opposite)) < 0.0 {
            normal = [-normal[0], -normal[1], -normal[2]];
        }
        BoundaryFace {
            cell,
            local_face: face,
            normal,
            diameter: diameter(&pts),
            area,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn grading(&self) -> f64 {
        self.grading
    }

    /// Grid spacing `2^-level` of the underlying structured grid.
    pub fn grid_spacing(&self) -> f64 {
        0.5f64.powi(self.level as i32)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn cell(&self, c: usize) -> &[u32] {
        let nv = self.dim + 1;
        &self.cells[c * nv..(c + 1) * nv]
    }

    /// Vertex coordinates of a cell; entries past `dim + 1` are zero.
    pub fn cell_points(&self, c: usize) -> [Point; 4] {
        let mut pts = [[0.0; 3]; 4];
        for (p, &v) in pts.iter_mut().zip(self.cell(c)) {
            *p = self.vertices[v as usize];
        }
        pts
    }

    /// Global vertices of local face `face` (the vertices other than `face`, in
    /// local order). Only the first `dim` entries are meaningful.
    pub fn face_vertices(&self, cell: usize, face: usize) -> [u32; 3] {
        let mut out = [u32::MAX; 3];
        let mut n = 0;
        for (i, &v) in self.cell(cell).iter().enumerate() {
            if i != face {
                out[n] = v;
                n += 1;
            }
        }
        out
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary_faces
    }

    pub fn cell_volume(&self, c: usize) -> f64 {
        let p = self.cell_points(c);
        signed_volume(self.dim, &p)
    }

    /// Cell diameter `h_T` (longest edge).
    pub fn cell_diameter(&self, c: usize) -> f64 {
        let p = self.cell_points(c);
        diameter(&p[..=self.dim])
    }

    /// `(h, h_min)`: largest and smallest cell diameters.
    pub fn mesh_size(&self) -> (f64, f64) {
        let mut h = 0.0f64;
        let mut h_min = f64::INFINITY;
        for c in 0..self.num_cells() {
            let d = self.cell_diameter(c);
            h = h.max(d);
            h_min = h_min.min(d);
        }
        (h, h_min)
    }

    /// Interior angles (2D) or dihedral angles (3D) of one cell, in radians.
    pub fn cell_angles(&self, c: usize) -> Vec<f64> {
        let p = self.cell_points(c);
        if self.dim == 2 {
            (0..3)
                .map(|i| {
                    let a = sub(p[(i + 1) % 3], p[i]);
                    let b = sub(p[(i + 2) % 3], p[i]);
                    angle_between(a, b)
                })
                .collect()
        } else {
            let normals: Vec<Point> = (0..4).map(|f| tet_outward_normal(&p, f)).collect();
            let mut out = Vec::with_capacity(6);
            for k in 0..4 {
                for l in k + 1..4 {
                    let cosine = dot(normals[k], normals[l]).clamp(-1.0, 1.0);
                    out.push(std::f64::consts::PI - cosine.acos());
                }
            }
            out
        }
    }

    fn angle_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for c in 0..self.num_cells() {
            for a in self.cell_angles(c) {
                lo = lo.min(a);
                hi = hi.max(a);
            }
        }
        (lo, hi)
    }

    /// Ratio `h_T / ρ_T` of diameter to inscribed-ball radius.
    pub fn shape_ratio(&self, c: usize) -> f64 {
        let p = self.cell_points(c);
        let vol = signed_volume(self.dim, &p);
        let mut surface = 0.0;
        for f in 0..=self.dim {
            let fv: Vec<Point> = (0..=self.dim).filter(|&i| i != f).map(|i| p[i]).collect();
            surface += simplex_measure(&fv);
        }
        let inradius = self.dim as f64 * vol / surface;
        diameter(&p[..=self.dim]) / inradius
    }

    /// Checks the mesh invariants and gathers geometric statistics.
    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    /// Smallest interior (2D) or dihedral (3D) angle, radians.
    pub min_angle: f64,
    /// Largest interior (2D) or dihedral (3D) angle, radians.
    pub max_angle: f64,
    pub volume_sum: f64,
    pub min_volume: f64,
    pub all_positive: bool,
    pub face_multiplicity_ok: bool,
    pub normals_ok: bool,
    /// Max-abs component of `Σ_F |F| n_F` over boundary faces.
    pub boundary_closure: f64,
    /// `max_T h_T / ρ_T`.
    pub shape_regularity: f64,
    /// Every angle (2D) or dihedral angle (3D) is at most π/2.
    pub max_angle_condition: bool,
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn validate(mesh: &Mesh) -> ValidationReport {
    let mut failures = Vec::new();
    let mut volume_sum = 0.0;
    let mut min_volume = f64::INFINITY;
    let mut shape = 0.0f64;
    for c in 0..mesh.num_cells() {
        let v = mesh.cell_volume(c);
        volume_sum += v;
        min_volume = min_volume.min(v);
        shape = shape.max(mesh.shape_ratio(c));
    }
    let all_positive = min_volume > 0.0;
    if !all_positive {
        failures.push(format!("non-positive cell volume {min_volume:e}"));
    }
    if mesh.unit_box && (volume_sum - 1.0).abs() > 1e-12 {
        failures.push(format!("cell volumes sum to {volume_sum}, not 1"));
    }

    let counts = mesh.face_counts();
    let face_multiplicity_ok = counts.values().all(|&n| n == 1 || n == 2)
        && counts.values().filter(|&&n| n == 1).count() == mesh.boundary_faces.len();
    if !face_multiplicity_ok {
        failures.push("a face is shared by more than two cells".into());
    }

    let mut normals_ok = true;
    let mut closure = [0.0; 3];
    for bf in &mesh.boundary_faces {
        let fv = mesh.face_vertices(bf.cell, bf.local_face);
        let pts: Vec<Point> = fv[..mesh.dim].iter().map(|&v| mesh.vertex(v as usize)).collect();
        let face_centroid = centroid(&pts);
        let cell_pts = mesh.cell_points(bf.cell);
        let cell_centroid = centroid(&cell_pts[..=mesh.dim]);
        if (norm(bf.normal) - 1.0).abs() > 1e-14 || dot(bf.normal, sub(face_centroid, cell_centroid)) <= 0.0 {
            normals_ok = false;
        }
        for (acc, n) in closure.iter_mut().zip(bf.normal) {
            *acc += bf.area * n;
        }
    }
    if !normals_ok {
        failures.push("boundary normal is not an outward unit vector".into());
    }
    let boundary_closure = closure.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if boundary_closure > 1e-12 {
        failures.push(format!("boundary normals do not close: {boundary_closure:e}"));
    }

    if mesh.unit_box {
        let off_box = mesh.boundary_faces.iter().any(|bf| {
            let fv = mesh.face_vertices(bf.cell, bf.local_face);
            fv[..mesh.dim].iter().any(|&v| {
                let p = mesh.vertex(v as usize);
                !p[..mesh.dim].iter().any(|&x| x == 0.0 || x == 1.0)
            })
        });
        if off_box {
            failures.push("a boundary vertex has no coordinate in {0, 1}".into());
        }
    }

    let (min_angle, max_angle) = mesh.angle_range();
    let max_angle_condition = max_angle <= FRAC_PI_2 + 1e-12;
    if mesh.unit_box && mesh.grading == 1.0 && !max_angle_condition {
        failures.push(format!("maximal angle {max_angle} exceeds pi/2"));
    }

    ValidationReport {
        min_angle,
        max_angle,
        volume_sum,
        min_volume,
        all_positive,
        face_multiplicity_ok,
        normals_ok,
        boundary_closure,
        shape_regularity: shape,
        max_angle_condition,
        failures,
    }
}

pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn cross(a: Point, b: Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn angle_between(a: Point, b: Point) -> f64 {
    (dot(a, b) / (norm(a) * norm(b))).clamp(-1.0, 1.0).acos()
}

fn centroid(pts: &[Point]) -> Point {
    let mut c = [0.0; 3];
    for p in pts {
        for (ci, pi) in c.iter_mut().zip(p) {
            *ci += pi;
        }
    }
    c.map(|x| x / pts.len() as f64)
}

fn diameter(pts: &[Point]) -> f64 {
    let mut d = 0.0f64;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d = d.max(norm(sub(pts[i], pts[j])));
        }
    }
    d
}

/// Unsigned measure of a segment, triangle or tetrahedron embedded in 3D.
pub(crate) fn simplex_measure(pts: &[Point]) -> f64 {
    match pts.len() {
        2 => norm(sub(pts[1], pts[0])),
        3 => 0.5 * norm(cross(sub(pts[1], pts[0]), sub(pts[2], pts[0]))),
        4 => signed_volume(3, pts).abs(),
        _ => 0.0,
    }
}

fn signed_volume(dim: usize, p: &[Point]) -> f64 {
    let a = sub(p[1], p[0]);
    let b = sub(p[2], p[0]);
    if dim == 2 {
        0.5 * (a[0] * b[1] - a[1] * b[0])
    } else {
        dot(cross(a, b), sub(p[3], p[0])) / 6.0
    }
}

fn tet_outward_normal(p: &[Point; 4], face: usize) -> Point {
    let idx: Vec<usize> = (0..4).filter(|&i| i != face).collect();
    let c = cross(sub(p[idx[1]], p[idx[0]]), sub(p[idx[2]], p[idx[0]]));
    let len = norm(c);
    let mut n = c.map(|x| x / len);
    if dot(n, sub(p[idx[0]], p[face])) < 0.0 {
        n = n.map(|x| -x);
    }
    n
}
