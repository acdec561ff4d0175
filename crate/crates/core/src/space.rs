//! Continuous P_k Lagrange spaces on a simplicial mesh.
//!
//! A lattice node of a cell is identified globally by the set of mesh vertices
//! it is a combination of, together with their lattice multiplicities. Two
//! cells sharing an edge or face therefore produce the same key for every node
//! on it, independently of local vertex order.

use std::collections::HashMap;

use crate::element::ReferenceElement;
use crate::mesh::Mesh;
use crate::Point;

type NodeKey = [u64; 4];

#[derive(Debug, Clone)]
pub struct DofMap {
    dim: usize,
    degree: usize,
    num_dofs: usize,
    dofs_per_cell: usize,
    cell_dofs: Vec<u32>,
    boundary_dofs: Vec<u32>,
    is_boundary: Vec<bool>,
    dof_coords: Vec<Point>,
    vertex_dofs: Vec<u32>,
    element: ReferenceElement,
}

impl DofMap {
    /// Numbers the P_k DOFs of `mesh` in order of first appearance over cells.
    pub fn new(mesh: &Mesh, degree: usize) -> crate::Result<Self> {
        let dim = mesh.dim();
        let element = ReferenceElement::new(dim, degree)?;
        let nloc = element.num_nodes();
        let mut index: HashMap<NodeKey, u32> = HashMap::new();
        let mut keys: Vec<NodeKey> = Vec::new();
        let mut cell_dofs = Vec::with_capacity(mesh.num_cells() * nloc);
        for c in 0..mesh.num_cells() {
            let verts = mesh.cell(c);
            for m in element.nodes() {
                let key = node_key(verts, m);
                let next = keys.len() as u32;
                let dof = *index.entry(key).or_insert_with(|| {
                    keys.push(key);
                    next
                });
                cell_dofs.push(dof);
            }
        }
        let num_dofs = keys.len();
        let k = degree as f64;
        let dof_coords: Vec<Point> = keys
            .iter()
            .map(|key| {
                let mut p = [0.0; 3];
                for &entry in key.iter().filter(|&&e| e != u64::MAX) {
                    let v = mesh.vertex((entry >> 8) as usize);
                    let w = (entry & 0xff) as f64 / k;
                    for d in 0..3 {
                        p[d] += w * v[d];
                    }
                }
                p
            })
            .collect();

        let mut vertex_dofs = vec![u32::MAX; mesh.num_vertices()];
        for c in 0..mesh.num_cells() {
            for (i, &v) in mesh.cell(c).iter().enumerate() {
                // local nodes 0..=dim are the vertices
                vertex_dofs[v as usize] = cell_dofs[c * nloc + i];
            }
        }

        let mut is_boundary = vec![false; num_dofs];
        for bf in mesh.boundary_faces() {
            for i in element.face_nodes(bf.local_face) {
                is_boundary[cell_dofs[bf.cell * nloc + i] as usize] = true;
            }
        }
        let boundary_dofs = (0..num_dofs as u32).filter(|&i| is_boundary[i as usize]).collect();

        Ok(Self {
            dim,
            degree,
            num_dofs,
            dofs_per_cell: nloc,
            cell_dofs,
            boundary_dofs,
            is_boundary,
            dof_coords,
            vertex_dofs,
            element,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_dofs(&self) -> usize {
        self.num_dofs
    }

    pub fn dofs_per_cell(&self) -> usize {
        self.dofs_per_cell
    }

    pub fn element(&self) -> &ReferenceElement {
        &self.element
    }

    pub fn cell_dofs(&self, c: usize) -> &[u32] {
        &self.cell_dofs[c * self.dofs_per_cell..(c + 1) * self.dofs_per_cell]
    }

    /// Sorted global indices of DOFs whose node lies on the boundary.
    pub fn boundary_dofs(&self) -> &[u32] {
        &self.boundary_dofs
    }

    pub fn is_boundary(&self, dof: usize) -> bool {
        self.is_boundary[dof]
    }

    pub fn dof_coords(&self) -> &[Point] {
        &self.dof_coords
    }

    /// DOF attached to each mesh vertex.
    pub fn vertex_dofs(&self) -> &[u32] {
        &self.vertex_dofs
    }

    /// Coefficients equal to `u` evaluated at every DOF node.
    pub fn nodal_interpolant(&self, u: impl Fn(&Point) -> f64) -> Vec<f64> {
        self.dof_coords.iter().map(u).collect()
    }

    /// Local coefficient vector of cell `c`.
    pub fn gather(&self, c: usize, coeffs: &[f64], out: &mut [f64]) {
        for (o, &d) in out.iter_mut().zip(self.cell_dofs(c)) {
            *o = coeffs[d as usize];
        }
    }
}

/// Sorted `(vertex << 8) | multiplicity` entries, padded with `u64::MAX`.
fn node_key(verts: &[u32], m: &[u8; 4]) -> NodeKey {
    let mut key = [u64::MAX; 4];
    for (slot, (&v, &mult)) in key.iter_mut().zip(verts.iter().zip(m)) {
        if mult > 0 {
            *slot = ((v as u64) << 8) | mult as u64;
        }
    }
    key.sort_unstable();
    key
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::AffineMap;
    use crate::mesh::build_mesh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn edge_count(mesh: &Mesh) -> usize {
        let mut edges = std::collections::BTreeSet::new();
        for c in 0..mesh.num_cells() {
            let v = mesh.cell(c);
            for a in 0..v.len() {
                for b in a + 1..v.len() {
                    edges.insert((v[a].min(v[b]), v[a].max(v[b])));
                }
            }
        }
        edges.len()
    }

    #[test]
    fn dof_counts() {
        let m2 = build_mesh(2, 1, 1.0).unwrap();
        assert_eq!(DofMap::new(&m2, 1).unwrap().num_dofs(), 9);
        assert_eq!(edge_count(&m2), 16);
        assert_eq!(DofMap::new(&m2, 2).unwrap().num_dofs(), 9 + 16);
        // k = 3: vertices + 2 per edge + 1 per triangle
        assert_eq!(DofMap::new(&m2, 3).unwrap().num_dofs(), 9 + 32 + 8);
        let m3 = build_mesh(3, 1, 1.0).unwrap();
        assert_eq!(DofMap::new(&m3, 1).unwrap().num_dofs(), 27);
        assert_eq!(DofMap::new(&m3, 2).unwrap().num_dofs(), 125);
        assert_eq!(DofMap::new(&m3, 3).unwrap().num_dofs(), 343);
    }

    #[test]
    fn boundary_dofs_match_coordinate_test() {
        for (dim, level) in [(2, 3), (3, 2)] {
            for k in 1..=3 {
                let mesh = build_mesh(dim, level, 1.0).unwrap();
                let s = DofMap::new(&mesh, k).unwrap();
                let by_coords: Vec<u32> = (0..s.num_dofs() as u32)
                    .filter(|&i| {
                        let p = s.dof_coords()[i as usize];
                        p[..dim].iter().any(|&x| x.abs() < 1e-12 || (x - 1.0).abs() < 1e-12)
                    })
                    .collect();
                assert_eq!(s.boundary_dofs(), &by_coords[..]);
            }
        }
    }

    #[test]
    fn nodal_interpolant_basic() {
        let mesh = build_mesh(2, 2, 1.0).unwrap();
        let s = DofMap::new(&mesh, 1).unwrap();
        assert!(s.nodal_interpolant(|_| 1.0).iter().all(|&c| c == 1.0));
        let cx = s.nodal_interpolant(|p| p[0]);
        for (c, p) in cx.iter().zip(s.dof_coords()) {
            assert_eq!(*c, p[0]);
        }
    }

    #[test]
    fn dof_coords_agree_with_cell_maps() {
        let mesh = build_mesh(3, 1, 1.5).unwrap();
        let s = DofMap::new(&mesh, 3).unwrap();
        for c in 0..mesh.num_cells() {
            let pts = mesh.cell_points(c);
            let map = AffineMap::new(3, &pts).unwrap();
            for (i, &d) in s.cell_dofs(c).iter().enumerate() {
                let x = map.map(&s.element().node_point(i));
                let y = s.dof_coords()[d as usize];
                for a in 0..3 {
                    assert!((x[a] - y[a]).abs() < 1e-14);
                }
            }
        }
    }

    /// Evaluates a finite element function on both sides of shared faces.
    #[test]
    fn continuity_across_interfaces() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (dim, k) in [(2, 2), (2, 3), (3, 2), (3, 3)] {
            let mesh = build_mesh(dim, 1, 1.0).unwrap();
            let s = DofMap::new(&mesh, k).unwrap();
            let coeffs: Vec<f64> = (0..s.num_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut owners: HashMap<Vec<u32>, Vec<(usize, usize)>> = HashMap::new();
            for c in 0..mesh.num_cells() {
                for f in 0..=dim {
                    let mut key: Vec<u32> = mesh.face_vertices(c, f)[..dim].to_vec();
                    key.sort_unstable();
                    owners.entry(key).or_default().push((c, f));
                }
            }
            let mut checked = 0;
            for (face, cells) in owners.iter().filter(|(_, v)| v.len() == 2) {
                for _ in 0..20 {
                    // random point on the shared face
                    let mut w: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
                    let t: f64 = w.iter().sum();
                    w.iter_mut().for_each(|x| *x /= t);
                    let mut x = [0.0; 3];
                    for (wi, &v) in w.iter().zip(face) {
                        let p = mesh.vertex(v as usize);
                        for a in 0..3 {
                            x[a] += wi * p[a];
                        }
                    }
                    let vals: Vec<f64> = cells
                        .iter()
                        .map(|&(c, _)| {
                            let map = AffineMap::new(dim, &mesh.cell_points(c)).unwrap();
                            let xi = map.inverse_map(&x);
                            let mut phi = vec![0.0; s.dofs_per_cell()];
                            s.element().basis_into(&xi, &mut phi);
                            s.cell_dofs(c).iter().zip(&phi).map(|(&d, p)| coeffs[d as usize] * p).sum()
                        })
                        .collect();
                    assert!((vals[0] - vals[1]).abs() < 1e-12, "{vals:?}");
                    checked += 1;
                }
            }
            assert!(checked >= 100);
        }
    }
}
