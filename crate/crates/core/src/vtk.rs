//! Legacy ASCII VTK export of vertex values.

use std::io::Write;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::space::DofMap;

/// Writes `mesh` as an unstructured grid with one point-data scalar per
/// named field. Each field holds DOF coefficients of `space`; only the vertex
/// values are exported.
pub fn write_vtk<W: Write>(mut out: W, mesh: &Mesh, space: &DofMap, fields: &[(&str, &[f64])]) -> Result<()> {
    for (_, values) in fields {
        if values.len() != space.num_dofs() {
            return Err(Error::LengthMismatch {
                expected: space.num_dofs(),
                found: values.len(),
            });
        }
    }
    let dim = mesh.dim();
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "nitsche solution")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.num_vertices())?;
    for p in mesh.vertices() {
        writeln!(out, "{:e} {:e} {:e}", p[0], p[1], p[2])?;
    }
    let nv = dim + 1;
    writeln!(out, "CELLS {} {}", mesh.num_cells(), mesh.num_cells() * (nv + 1))?;
    for c in 0..mesh.num_cells() {
        let ids: Vec<String> = mesh.cell(c).iter().map(|v| v.to_string()).collect();
        writeln!(out, "{} {}", nv, ids.join(" "))?;
    }
    writeln!(out, "CELL_TYPES {}", mesh.num_cells())?;
    let cell_type = if dim == 2 { 5 } else { 10 };
    for _ in 0..mesh.num_cells() {
        writeln!(out, "{cell_type}")?;
    }
    if !fields.is_empty() {
        writeln!(out, "POINT_DATA {}", mesh.num_vertices())?;
        for (name, values) in fields {
            writeln!(out, "SCALARS {name} double 1")?;
            writeln!(out, "LOOKUP_TABLE default")?;
            for &d in space.vertex_dofs() {
                writeln!(out, "{:e}", values[d as usize])?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;

    #[test]
    fn layout() {
        let mesh = build_mesh(2, 1, 1.0).unwrap();
        let space = DofMap::new(&mesh, 2).unwrap();
        let u = space.nodal_interpolant(|p| p[0] + 2.0 * p[1]);
        let mut buf = Vec::new();
        write_vtk(&mut buf, &mesh, &space, &[("u", &u)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("POINTS 9 double"));
        assert!(text.contains("CELLS 8 32"));
        assert!(text.contains("POINT_DATA 9"));
        let data: Vec<f64> = text
            .split("LOOKUP_TABLE default\n")
            .nth(1)
            .unwrap()
            .lines()
            .map(|l| l.parse().unwrap())
            .collect();
        for (v, p) in data.iter().zip(mesh.vertices()) {
            assert_eq!(*v, p[0] + 2.0 * p[1]);
        }
        assert!(write_vtk(Vec::new(), &mesh, &space, &[("u", &u[..3])]).is_err());
    }
}
