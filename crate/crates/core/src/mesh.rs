//! Structured tetrahedral meshes of axis-aligned boxes and of an L-shaped
//! union of boxes, with full vertex/edge/face/cell incidence, outward
//! normals and boundary-region markers.
//!
//! Boxes are partitioned into `k^3` subcubes and each subcube into six
//! tetrahedra around its main diagonal. That subdivision is uniform,
//! orientation-consistent and face-conforming across subcubes, and refining
//! `k -> 2k` nests the coarse cells exactly.
//!
//! A `Mesh` is immutable after construction and safe for concurrent reads.

use std::collections::{BTreeMap, BTreeSet};

use crate::tensor3::{Mat3, Vec3};
use crate::{Error, Result};

/// Boundary region selector. `Boundary` is the whole boundary; the six face
/// labels mark faces lying on the bounding planes of the box. On the
/// L-shaped domain the two re-entrant cut planes belong to `Boundary` only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionLabel {
    Boundary,
    FaceX0,
    FaceX1,
    FaceY0,
    FaceY1,
    FaceZ0,
    FaceZ1,
}

impl RegionLabel {
    pub const FACES: [RegionLabel; 6] = [
        RegionLabel::FaceX0,
        RegionLabel::FaceX1,
        RegionLabel::FaceY0,
        RegionLabel::FaceY1,
        RegionLabel::FaceZ0,
        RegionLabel::FaceZ1,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RegionLabel::Boundary => "all",
            RegionLabel::FaceX0 => "x0",
            RegionLabel::FaceX1 => "x1",
            RegionLabel::FaceY0 => "y0",
            RegionLabel::FaceY1 => "y1",
            RegionLabel::FaceZ0 => "z0",
            RegionLabel::FaceZ1 => "z1",
        }
    }

    pub fn parse(s: &str) -> Option<RegionLabel> {
        match s {
            "all" | "boundary" => Some(RegionLabel::Boundary),
            "x0" => Some(RegionLabel::FaceX0),
            "x1" => Some(RegionLabel::FaceX1),
            "y0" => Some(RegionLabel::FaceY0),
            "y1" => Some(RegionLabel::FaceY1),
            "z0" => Some(RegionLabel::FaceZ0),
            "z1" => Some(RegionLabel::FaceZ1),
            _ => None,
        }
    }
}

impl std::fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A boundary triangle with its unique adjacent cell and outward unit
/// normal. `label` is the bounding-plane marker, if any.
#[derive(Debug, Clone)]
pub struct BoundaryFace {
    pub vertices: [usize; 3],
    pub cell: usize,
    pub normal: Vec3,
    pub label: Option<RegionLabel>,
}

/// Per-cell geometry used all over assembly: signed volume and the constant
/// gradients of the four barycentric coordinates.
#[derive(Debug, Clone)]
pub struct CellGeometry {
    pub volume: f64,
    pub grad_bary: [Vec3; 4],
}

/// Grid provenance of a structured mesh, kept for O(1) point location.
#[derive(Debug, Clone)]
struct StructuredInfo {
    origin: Vec3,
    h: Vec3,
    dims: [usize; 3],
    /// First cell id of each occupied subcube (six consecutive cells per
    /// subcube, in permutation order), `None` for holes.
    subcube_first_cell: Vec<Option<usize>>,
}

/// Tetrahedral complex. `cells` hold vertex indices with positive signed
/// volume; `edges` are sorted vertex pairs; `cell_edges` stores, per cell and
/// local edge, the global edge index and the orientation sign relating the
/// canonical local traversal to the global (ascending-index) direction.
#[derive(Debug)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub cells: Vec<[usize; 4]>,
    pub edges: Vec<[usize; 2]>,
    pub cell_edges: Vec<[(usize, f64); 6]>,
    pub boundary_faces: Vec<BoundaryFace>,
    pub geometry: Vec<CellGeometry>,
    structured: Option<StructuredInfo>,
}

/// Local edges of a tetrahedron, by local vertex pairs.
pub const LOCAL_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// The six permutations used for the subcube split, in a fixed order shared
/// with point location.
const PERMS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

impl Mesh {
    /// Structured mesh of the box `[0, extent_x] x [0, extent_y] x
    /// [0, extent_z]` with `k` subdivisions per axis.
    pub fn box_mesh(extent: Vec3, k: usize) -> Mesh {
        assert!(k >= 1, "subdivision count must be positive");
        assert!(
            extent.0.iter().all(|&e| e > 0.0),
            "extent must be positive componentwise"
        );
        let occupied = |_: [usize; 3]| true;
        build_structured(Vec3::ZERO, extent, [k, k, k], &occupied)
    }

    /// Conforming mesh of the L-shaped domain `[0,1]^3` minus
    /// `[1/2,1] x [1/2,1] x [0,1]`, built on a `2k` grid so the cut planes
    /// align with grid lines for every `k >= 1`.
    pub fn lshape_mesh(k: usize) -> Mesh {
        assert!(k >= 1, "subdivision count must be positive");
        let n = 2 * k;
        let occupied = move |c: [usize; 3]| !(c[0] >= k && c[1] >= k);
        build_structured(Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0), [n, n, n], &occupied)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn cell_volume(&self, cell: usize) -> f64 {
        self.geometry[cell].volume
    }

    pub fn total_volume(&self) -> f64 {
        self.geometry.iter().map(|g| g.volume).sum()
    }

    /// World coordinates of the barycentric point `bary` in `cell`.
    pub fn point_in_cell(&self, cell: usize, bary: [f64; 4]) -> Vec3 {
        let c = self.cells[cell];
        let mut x = Vec3::ZERO;
        for i in 0..4 {
            x = x.add(self.vertices[c[i]].scale(bary[i]));
        }
        x
    }

    /// Barycentric coordinates of `x` relative to `cell` (not clamped).
    pub fn barycentric(&self, cell: usize, x: Vec3) -> [f64; 4] {
        let g = &self.geometry[cell];
        let x0 = self.vertices[self.cells[cell][0]];
        let d = x.sub(x0);
        let l1 = g.grad_bary[1].dot(d);
        let l2 = g.grad_bary[2].dot(d);
        let l3 = g.grad_bary[3].dot(d);
        [1.0 - l1 - l2 - l3, l1, l2, l3]
    }

    /// Locates the cell containing `x` using the structured-grid provenance.
    /// Points on cell interfaces resolve to one adjacent cell; returns
    /// `None` outside the domain (beyond a small tolerance).
    pub fn locate(&self, x: Vec3) -> Option<(usize, [f64; 4])> {
        let info = self.structured.as_ref()?;
        let mut idx = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for d in 0..3 {
            let u = (x.0[d] - info.origin.0[d]) / info.h.0[d];
            if u < -1e-9 || u > info.dims[d] as f64 + 1e-9 {
                return None;
            }
            let i = (u.floor() as isize).clamp(0, info.dims[d] as isize - 1) as usize;
            idx[d] = i;
            frac[d] = u - i as f64;
        }
        let flat = (idx[0] * info.dims[1] + idx[1]) * info.dims[2] + idx[2];
        let first = info.subcube_first_cell[flat]?;
        // Kuhn cell for permutation p covers frac[p0] <= frac[p1] <= frac[p2].
        let perm_idx = PERMS
            .iter()
            .position(|p| frac[p[0]] <= frac[p[1]] + 1e-14 && frac[p[1]] <= frac[p[2]] + 1e-14)
            .expect("fraction ordering always matches one permutation");
        let cell = first + perm_idx;
        Some((cell, self.barycentric(cell, x)))
    }

    /// Uniform refinement of a structured mesh by an integer factor; the
    /// coarse cells are exact unions of fine cells. Returns `None` when the
    /// mesh carries no grid provenance.
    pub fn refined(&self, factor: usize) -> Option<Mesh> {
        assert!(factor >= 1);
        let info = self.structured.as_ref()?;
        let dims = [
            info.dims[0] * factor,
            info.dims[1] * factor,
            info.dims[2] * factor,
        ];
        let extent = Vec3::new(
            info.h.0[0] * info.dims[0] as f64,
            info.h.0[1] * info.dims[1] as f64,
            info.h.0[2] * info.dims[2] as f64,
        );
        let parent = info.clone();
        let occupied = move |c: [usize; 3]| {
            let flat = ((c[0] / factor) * parent.dims[1] + c[1] / factor) * parent.dims[2]
                + c[2] / factor;
            parent.subcube_first_cell[flat].is_some()
        };
        Some(build_structured(info.origin, extent, dims, &occupied))
    }

    /// Index set of edges lying on the faces of `region`: an edge belongs to
    /// the set when it is an edge of a boundary triangle carrying the label.
    pub fn boundary_edges(&self, region: RegionLabel) -> Result<BTreeSet<usize>> {
        let edge_index: BTreeMap<[usize; 2], usize> = self
            .edges
            .iter()
            .enumerate()
            .map(|(i, e)| (*e, i))
            .collect();
        let mut any = false;
        let mut out = BTreeSet::new();
        for face in &self.boundary_faces {
            let selected = match region {
                RegionLabel::Boundary => true,
                lbl => face.label == Some(lbl),
            };
            if !selected {
                continue;
            }
            any = true;
            let v = face.vertices;
            for (a, b) in [(v[0], v[1]), (v[0], v[2]), (v[1], v[2])] {
                let key = [a.min(b), a.max(b)];
                out.insert(edge_index[&key]);
            }
        }
        if !any {
            return Err(Error::UnknownRegion(region.name().to_string()));
        }
        Ok(out)
    }

    /// Vertices lying on faces of `region`.
    pub fn boundary_vertices(&self, region: RegionLabel) -> Result<BTreeSet<usize>> {
        let mut any = false;
        let mut out = BTreeSet::new();
        for face in &self.boundary_faces {
            let selected = match region {
                RegionLabel::Boundary => true,
                lbl => face.label == Some(lbl),
            };
            if !selected {
                continue;
            }
            any = true;
            out.extend(face.vertices);
        }
        if !any {
            return Err(Error::UnknownRegion(region.name().to_string()));
        }
        Ok(out)
    }

    /// Total area of the boundary triangles (optionally of one region).
    pub fn boundary_area(&self, region: Option<RegionLabel>) -> f64 {
        self.boundary_faces
            .iter()
            .filter(|f| match region {
                None | Some(RegionLabel::Boundary) => true,
                Some(lbl) => f.label == Some(lbl),
            })
            .map(|f| triangle_area(&self.vertices, f.vertices))
            .sum()
    }
}

fn triangle_area(vertices: &[Vec3], v: [usize; 3]) -> f64 {
    let a = vertices[v[1]].sub(vertices[v[0]]);
    let b = vertices[v[2]].sub(vertices[v[0]]);
    0.5 * a.cross(b).norm()
}

fn cell_geometry(vertices: &[Vec3], cell: [usize; 4]) -> CellGeometry {
    let x0 = vertices[cell[0]];
    let cols = [
        vertices[cell[1]].sub(x0),
        vertices[cell[2]].sub(x0),
        vertices[cell[3]].sub(x0),
    ];
    // J has the edge vectors as columns; volume = det(J)/6
    let j = Mat3([
        [cols[0].0[0], cols[1].0[0], cols[2].0[0]],
        [cols[0].0[1], cols[1].0[1], cols[2].0[1]],
        [cols[0].0[2], cols[1].0[2], cols[2].0[2]],
    ]);
    let volume = j.det() / 6.0;
    let jinv = j.inverse().expect("non-degenerate tetrahedron");
    // lambda_i(x) = row i of J^{-1} applied to (x - x0), i = 1..3
    let g1 = jinv.row(0);
    let g2 = jinv.row(1);
    let g3 = jinv.row(2);
    let g0 = g1.add(g2).add(g3).scale(-1.0);
    CellGeometry {
        volume,
        grad_bary: [g0, g1, g2, g3],
    }
}

fn build_structured(
    origin: Vec3,
    extent: Vec3,
    dims: [usize; 3],
    occupied: &dyn Fn([usize; 3]) -> bool,
) -> Mesh {
    let h = Vec3::new(
        extent.0[0] / dims[0] as f64,
        extent.0[1] / dims[1] as f64,
        extent.0[2] / dims[2] as f64,
    );
    let mut vertex_ids: BTreeMap<[usize; 3], usize> = BTreeMap::new();
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut vid = |g: [usize; 3], vertices: &mut Vec<Vec3>| -> usize {
        *vertex_ids.entry(g).or_insert_with(|| {
            vertices.push(Vec3::new(
                origin.0[0] + g[0] as f64 * h.0[0],
                origin.0[1] + g[1] as f64 * h.0[1],
                origin.0[2] + g[2] as f64 * h.0[2],
            ));
            vertices.len() - 1
        })
    };

    let mut cells: Vec<[usize; 4]> = Vec::new();
    let mut subcube_first_cell = vec![None; dims[0] * dims[1] * dims[2]];
    for ix in 0..dims[0] {
        for iy in 0..dims[1] {
            for iz in 0..dims[2] {
                if !occupied([ix, iy, iz]) {
                    continue;
                }
                let flat = (ix * dims[1] + iy) * dims[2] + iz;
                subcube_first_cell[flat] = Some(cells.len());
                for p in PERMS {
                    // corners along the staircase 0 -> e_{p2} -> e_{p2}+e_{p1} -> (1,1,1)
                    let mut offs = [[0usize; 3]; 4];
                    offs[1][p[2]] = 1;
                    offs[2] = offs[1];
                    offs[2][p[1]] = 1;
                    offs[3] = [1, 1, 1];
                    let mut cell = [0usize; 4];
                    for (slot, off) in cell.iter_mut().zip(offs) {
                        *slot = vid([ix + off[0], iy + off[1], iz + off[2]], &mut vertices);
                    }
                    // det[e_{p2}, e_{p1}, e_{p0}] alternates with the
                    // permutation parity; swap to keep the volume positive
                    if cell_geometry(&vertices, cell).volume < 0.0 {
                        cell.swap(2, 3);
                    }
                    cells.push(cell);
                }
            }
        }
    }

    // edges: sorted vertex pairs over all cells
    let mut edge_set: BTreeSet<[usize; 2]> = BTreeSet::new();
    for c in &cells {
        for (a, b) in LOCAL_EDGES {
            let (va, vb) = (c[a], c[b]);
            edge_set.insert([va.min(vb), va.max(vb)]);
        }
    }
    let edges: Vec<[usize; 2]> = edge_set.into_iter().collect();
    let edge_index: BTreeMap<[usize; 2], usize> = edges
        .iter()
        .enumerate()
        .map(|(i, e)| (*e, i))
        .collect();

    let cell_edges: Vec<[(usize, f64); 6]> = cells
        .iter()
        .map(|c| {
            let mut entry = [(0usize, 0.0f64); 6];
            for (slot, (a, b)) in entry.iter_mut().zip(LOCAL_EDGES) {
                let (va, vb) = (c[a], c[b]);
                let key = [va.min(vb), va.max(vb)];
                let sign = if va < vb { 1.0 } else { -1.0 };
                *slot = (edge_index[&key], sign);
            }
            entry
        })
        .collect();

    // faces: boundary = incident to exactly one cell
    let mut face_cells: BTreeMap<[usize; 3], Vec<usize>> = BTreeMap::new();
    for (ci, c) in cells.iter().enumerate() {
        for skip in 0..4 {
            let mut f: Vec<usize> = (0..4).filter(|&i| i != skip).map(|i| c[i]).collect();
            f.sort_unstable();
            face_cells.entry([f[0], f[1], f[2]]).or_default().push(ci);
        }
    }
    let geometry: Vec<CellGeometry> = cells
        .iter()
        .map(|c| cell_geometry(&vertices, *c))
        .collect();

    let plane_label = |pts: [Vec3; 3]| -> Option<RegionLabel> {
        let tol = 1e-12;
        for (axis, labels) in [
            (0, (RegionLabel::FaceX0, RegionLabel::FaceX1)),
            (1, (RegionLabel::FaceY0, RegionLabel::FaceY1)),
            (2, (RegionLabel::FaceZ0, RegionLabel::FaceZ1)),
        ] {
            let lo = origin.0[axis];
            let hi = origin.0[axis] + extent.0[axis];
            if pts.iter().all(|p| (p.0[axis] - lo).abs() < tol) {
                return Some(labels.0);
            }
            if pts.iter().all(|p| (p.0[axis] - hi).abs() < tol) {
                return Some(labels.1);
            }
        }
        None
    };

    let mut boundary_faces = Vec::new();
    for (f, adjacent) in &face_cells {
        if adjacent.len() != 1 {
            debug_assert_eq!(adjacent.len(), 2, "conforming mesh: face shared by <= 2 cells");
            continue;
        }
        let cell = adjacent[0];
        let pts = [vertices[f[0]], vertices[f[1]], vertices[f[2]]];
        let mut normal = pts[1].sub(pts[0]).cross(pts[2].sub(pts[0]));
        normal = normal.scale(1.0 / normal.norm());
        // orient outward: away from the opposite vertex of the adjacent cell
        let opposite = cells[cell]
            .iter()
            .copied()
            .find(|v| !f.contains(v))
            .expect("tetrahedron has one vertex off each face");
        let to_face = pts[0].sub(vertices[opposite]);
        if normal.dot(to_face) < 0.0 {
            normal = normal.scale(-1.0);
        }
        boundary_faces.push(BoundaryFace {
            vertices: *f,
            cell,
            normal,
            label: plane_label(pts),
        });
    }

    Mesh {
        vertices,
        cells,
        edges,
        cell_edges,
        boundary_faces,
        geometry,
        structured: Some(StructuredInfo {
            origin,
            h,
            dims,
            subcube_first_cell,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_cube_k1_counts() {
        let m = Mesh::box_mesh(Vec3::new(1.0, 1.0, 1.0), 1);
        assert_eq!(m.vertex_count(), 8);
        assert_eq!(m.cell_count(), 6);
        assert_eq!(m.edge_count(), 19); // 12 cube edges + 6 face diagonals + 1 body diagonal
        assert_eq!(m.boundary_faces.len(), 12);
    }

    #[test]
    fn unit_cube_k2_counts_and_refinement_factor() {
        let m = Mesh::box_mesh(Vec3::new(1.0, 1.0, 1.0), 2);
        assert_eq!(m.vertex_count(), 27);
        assert_eq!(m.cell_count(), 48);
        let m1 = Mesh::box_mesh(Vec3::new(1.0, 1.0, 1.0), 1);
        assert_eq!(m.cell_count(), 8 * m1.cell_count());
    }

    #[test]
    fn volumes_partition_the_box() {
        for k in [1, 2, 3] {
            let extent = Vec3::new(2.0, 1.0, 0.5);
            let m = Mesh::box_mesh(extent, k);
            assert!(m.geometry.iter().all(|g| g.volume > 0.0));
            let vol: f64 = m.total_volume();
            assert!((vol - 1.0).abs() < 1e-13, "k={k}: vol={vol}");
        }
    }

    #[test]
    fn euler_relation_for_box() {
        for k in [1, 2] {
            let m = Mesh::box_mesh(Vec3::new(1.0, 1.0, 1.0), k);
            let mut faces: BTreeSet<[usize; 3]> = BTreeSet::new();
            for c in &m.cells {
                for skip in 0..4 {
                    let mut f: Vec<usize> =
                        (0..4).filter(|&i| i != skip).map(|i| c[i]).collect();
                    f.sort_unstable();
                    faces.insert([f[0], f[1], f[2]]);
                }
            }
            let v = m.vertex_count() as i64;
            let e = m.edge_count() as i64;
            let f = faces.len() as i64;
            let c = m.cell_count() as i64;
            assert_eq!(v - e + f - c, 1);
        }
    }

    #[test]
    fn boundary_faces_unit_outward_normals() {
        for mesh in [Mesh::box_mesh(Vec3::new(1.0, 2.0, 3.0), 2), Mesh::lshape_mesh(2)] {
            for face in &mesh.boundary_faces {
                assert!((face.normal.norm() - 1.0).abs() < 1e-14);
                // outward: positive component against the centroid-to-face direction
                let centroid = face
                    .vertices
                    .iter()
                    .fold(Vec3::ZERO, |acc, &v| acc.add(mesh.vertices[v]))
                    .scale(1.0 / 3.0);
                let cell_centroid = mesh.cells[face.cell]
                    .iter()
                    .fold(Vec3::ZERO, |acc, &v| acc.add(mesh.vertices[v]))
                    .scale(0.25);
                assert!(face.normal.dot(centroid.sub(cell_centroid)) > 0.0);
            }
        }
    }

    #[test]
    fn boundary_area_matches_analytic() {
        let m = Mesh::box_mesh(Vec3::new(1.0, 2.0, 3.0), 2);
        let area = m.boundary_area(None);
        let exact = 2.0 * (1.0 * 2.0 + 1.0 * 3.0 + 2.0 * 3.0);
        assert!((area - exact).abs() < 1e-12);
        let l = Mesh::lshape_mesh(2);
        assert!((l.boundary_area(None) - 5.5).abs() < 1e-12);
    }

    #[test]
    fn lshape_volume_and_conformity() {
        for k in [1, 2] {
            let m = Mesh::lshape_mesh(k);
            assert!((m.total_volume() - 0.75).abs() < 1e-13);
            // every interior face shared by exactly two cells
            let mut face_count: BTreeMap<[usize; 3], usize> = BTreeMap::new();
            for c in &m.cells {
                for skip in 0..4 {
                    let mut f: Vec<usize> =
                        (0..4).filter(|&i| i != skip).map(|i| c[i]).collect();
                    f.sort_unstable();
                    *face_count.entry([f[0], f[1], f[2]]).or_default() += 1;
                }
            }
            assert!(face_count.values().all(|&n| n == 1 || n == 2));
            let n_boundary = face_count.values().filter(|&&n| n == 1).count();
            assert_eq!(n_boundary, m.boundary_faces.len());
        }
    }

    #[test]
    fn boundary_edge_sets_on_unit_cube() {
        let m = Mesh::box_mesh(Vec3::new(1.0, 1.0, 1.0), 1);
        let all = m.boundary_edges(RegionLabel::Boundary).unwrap();
        assert_eq!(all.len(), 18); // everything except the body diagonal
        let z0 = m.boundary_edges(RegionLabel::FaceZ0).unwrap();
        assert_eq!(z0.len(), 5); // 4 sides + 1 diagonal of that face
    }

    #[test]
    fn region_errors() {
        let m = Mesh::box_mesh(Vec3::new(1.0, 1.0, 1.0), 1);
        // strip the labels to simulate a mesh without that region
        let mut m2 = Mesh {
            vertices: m.vertices.clone(),
            cells: m.cells.clone(),
            edges: m.edges.clone(),
            cell_edges: m.cell_edges.clone(),
            boundary_faces: m.boundary_faces.clone(),
            geometry: m.geometry.clone(),
            structured: None,
        };
        for f in &mut m2.boundary_faces {
            if f.label == Some(RegionLabel::FaceX1) {
                f.label = None;
            }
        }
        assert!(matches!(
            m2.boundary_edges(RegionLabel::FaceX1),
            Err(Error::UnknownRegion(_))
        ));
    }

    #[test]
    fn locate_roundtrip() {
        for mesh in [Mesh::box_mesh(Vec3::new(1.0, 2.0, 1.5), 3), Mesh::lshape_mesh(2)] {
            for cell in (0..mesh.cell_count()).step_by(7) {
                let bary = [0.1, 0.2, 0.3, 0.4];
                let x = mesh.point_in_cell(cell, bary);
                let (found, fb) = mesh.locate(x).expect("interior point located");
                let y = mesh.point_in_cell(found, fb);
                assert!(x.sub(y).norm() < 1e-12);
                assert!(fb.iter().all(|&l| l > -1e-12));
            }
            assert!(mesh.locate(Vec3::new(-1.0, 0.0, 0.0)).is_none());
        }
    }

    #[test]
    fn lshape_hole_not_located() {
        let m = Mesh::lshape_mesh(2);
        assert!(m.locate(Vec3::new(0.9, 0.9, 0.5)).is_none());
    }
}
