//! Legacy VTK (ASCII v3.0) export of meshes and solution fields.
//!
//! Mesh files carry the tetrahedra plus the boundary triangles, with an
//! integer `region` cell array: `-1` for volume cells, `0..5` for the six
//! bounding-plane labels (x0, x1, y0, y1, z0, z1) and `6` for unlabeled
//! boundary faces (the re-entrant cut planes of the L-shaped domain).
//!
//! Solution files write the displacement as point vectors named `u` and the
//! tensor fields as 9-component cell data named `P`, `CurlP` and `symP`
//! (cell-centroid values; the curl is cellwise constant).

use std::io::{self, Write};
use std::path::Path;

use crate::fespace::FieldDofs;
use crate::mesh::{Mesh, RegionLabel};
use crate::tensor3::Mat3;

fn region_id(label: Option<RegionLabel>) -> i32 {
    match label {
        Some(RegionLabel::FaceX0) => 0,
        Some(RegionLabel::FaceX1) => 1,
        Some(RegionLabel::FaceY0) => 2,
        Some(RegionLabel::FaceY1) => 3,
        Some(RegionLabel::FaceZ0) => 4,
        Some(RegionLabel::FaceZ1) => 5,
        Some(RegionLabel::Boundary) | None => 6,
    }
}

fn write_header(w: &mut impl Write, title: &str) -> io::Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{title}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")
}

fn write_points(w: &mut impl Write, mesh: &Mesh) -> io::Result<()> {
    writeln!(w, "POINTS {} double", mesh.vertex_count())?;
    for v in &mesh.vertices {
        writeln!(w, "{:.17e} {:.17e} {:.17e}", v.0[0], v.0[1], v.0[2])?;
    }
    Ok(())
}

/// Mesh export: tetrahedra (type 10) followed by boundary triangles
/// (type 5) with the `region` label array.
pub fn write_mesh_vtk(path: impl AsRef<Path>, mesh: &Mesh) -> io::Result<()> {
    let mut w = io::BufWriter::new(std::fs::File::create(path)?);
    write_header(&mut w, "tetrahedral mesh with boundary labels")?;
    write_points(&mut w, mesh)?;
    let nc = mesh.cell_count();
    let nb = mesh.boundary_faces.len();
    writeln!(w, "CELLS {} {}", nc + nb, 5 * nc + 4 * nb)?;
    for c in &mesh.cells {
        writeln!(w, "4 {} {} {} {}", c[0], c[1], c[2], c[3])?;
    }
    for f in &mesh.boundary_faces {
        writeln!(w, "3 {} {} {}", f.vertices[0], f.vertices[1], f.vertices[2])?;
    }
    writeln!(w, "CELL_TYPES {}", nc + nb)?;
    for _ in 0..nc {
        writeln!(w, "10")?;
    }
    for _ in 0..nb {
        writeln!(w, "5")?;
    }
    writeln!(w, "CELL_DATA {}", nc + nb)?;
    writeln!(w, "SCALARS region int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for _ in 0..nc {
        writeln!(w, "-1")?;
    }
    for f in &mesh.boundary_faces {
        writeln!(w, "{}", region_id(f.label))?;
    }
    w.flush()
}

fn write_tensor(w: &mut impl Write, m: &Mat3) -> io::Result<()> {
    for r in 0..3 {
        writeln!(w, "{:.17e} {:.17e} {:.17e}", m.0[r][0], m.0[r][1], m.0[r][2])?;
    }
    Ok(())
}

/// Solution export: tetrahedra only, displacement at the points, tensor
/// fields as cell data.
pub fn write_solution_vtk(
    path: impl AsRef<Path>,
    mesh: &Mesh,
    u: Option<&FieldDofs>,
    p: Option<&FieldDofs>,
) -> crate::Result<()> {
    let io_err = |e: io::Error| crate::Error::ShapeMismatch(format!("vtk write failed: {e}"));
    let mut w = io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    write_header(&mut w, "solution fields").map_err(io_err)?;
    write_points(&mut w, mesh).map_err(io_err)?;
    let nc = mesh.cell_count();
    writeln!(w, "CELLS {} {}", nc, 5 * nc).map_err(io_err)?;
    for c in &mesh.cells {
        writeln!(w, "4 {} {} {} {}", c[0], c[1], c[2], c[3]).map_err(io_err)?;
    }
    writeln!(w, "CELL_TYPES {nc}").map_err(io_err)?;
    for _ in 0..nc {
        writeln!(w, "10").map_err(io_err)?;
    }
    if let Some(u) = u {
        writeln!(w, "POINT_DATA {}", mesh.vertex_count()).map_err(io_err)?;
        writeln!(w, "VECTORS u double").map_err(io_err)?;
        for v in 0..mesh.vertex_count() {
            writeln!(
                w,
                "{:.17e} {:.17e} {:.17e}",
                u.values[3 * v],
                u.values[3 * v + 1],
                u.values[3 * v + 2]
            )
            .map_err(io_err)?;
        }
    }
    if let Some(p) = p {
        writeln!(w, "CELL_DATA {nc}").map_err(io_err)?;
        writeln!(w, "TENSORS P double").map_err(io_err)?;
        for cell in 0..nc {
            write_tensor(&mut w, &p.eval_matrix(cell, [0.25; 4])?).map_err(io_err)?;
        }
        writeln!(w, "TENSORS CurlP double").map_err(io_err)?;
        for cell in 0..nc {
            write_tensor(&mut w, &p.eval_curl(cell)?).map_err(io_err)?;
        }
        writeln!(w, "TENSORS symP double").map_err(io_err)?;
        for cell in 0..nc {
            write_tensor(&mut w, &p.eval_matrix(cell, [0.25; 4])?.sym()).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::FeSpace;
    use crate::tensor3::Vec3;
    use std::sync::Arc;

    #[test]
    fn mesh_file_layout() {
        let mesh = Mesh::box_mesh(Vec3::new(1.0, 1.0, 1.0), 1);
        let dir = std::env::temp_dir().join("korncurl_vtk_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("mesh.vtk");
        write_mesh_vtk(&path, &mesh).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 3.0"));
        assert!(text.contains("DATASET UNSTRUCTURED_GRID"));
        assert!(text.contains("POINTS 8 double"));
        assert!(text.contains("CELLS 18 78")); // 6 tets + 12 triangles
        assert!(text.contains("SCALARS region int 1"));
    }

    #[test]
    fn solution_file_layout() {
        let mesh = Arc::new(Mesh::box_mesh(Vec3::new(1.0, 1.0, 1.0), 1));
        let u = FeSpace::vector_p1(mesh.clone()).zero_field();
        let p = FeSpace::edge_matrix(mesh.clone()).zero_field();
        let dir = std::env::temp_dir().join("korncurl_vtk_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("solution.vtk");
        write_solution_vtk(&path, &mesh, Some(&u), Some(&p)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("VECTORS u double"));
        assert!(text.contains("TENSORS P double"));
        assert!(text.contains("TENSORS CurlP double"));
        assert!(text.contains("TENSORS symP double"));
        assert!(text.contains("CELL_TYPES 6"));
    }
}
