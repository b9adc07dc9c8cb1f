//! Planar polygonal meshes of the unit square.
//!
//! Two deterministic families are provided: uniformly refined triangulations
//! where every grid square is split along its anti-diagonal, and a cut-corner
//! polygonal family (octagons, diamonds, and truncated boundary squares).
//! Cells are stored with counterclockwise vertex loops; every edge records the
//! cell on its left (the cell whose loop traverses it from `v0` to `v1`) and
//! an outward unit normal with respect to that cell.

mod io;
mod validate;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use io::{read_mesh, read_mesh_str, write_mesh, write_mesh_string};
pub use validate::{validate, Entity, Rule, Violation};

pub const MAX_TRIANGULAR_LEVEL: u32 = 12;
pub const MAX_POLYGONAL_LEVEL: u32 = 10;

/// Fraction of the grid spacing removed at each interior grid vertex by the
/// cut-corner family.
pub const CORNER_CUT_FRACTION: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MeshFamily {
    /// Unit square split by the anti-diagonal, refined by halving.
    ForwardSlashTriangles,
    /// Square grid with the corners around every interior vertex cut off.
    CutCornerPolygons,
    /// Hand-built or externally supplied mesh.
    Custom,
}

impl MeshFamily {
    pub fn token(self) -> &'static str {
        match self {
            MeshFamily::ForwardSlashTriangles => "tri",
            MeshFamily::CutCornerPolygons => "poly",
            MeshFamily::Custom => "custom",
        }
    }
}

impl fmt::Display for MeshFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.token())
    }
}

impl FromStr for MeshFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tri" => Ok(MeshFamily::ForwardSlashTriangles),
            "poly" => Ok(MeshFamily::CutCornerPolygons),
            "custom" => Ok(MeshFamily::Custom),
            other => Err(Error::InvalidArgument(format!(
                "unknown mesh family '{other}' (expected tri, poly or custom)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vertex {
    pub x: f64,
    pub y: f64,
}

impl Vertex {
    pub fn point(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub v0: usize,
    pub v1: usize,
    pub cell_left: usize,
    pub cell_right: Option<usize>,
    pub length: f64,
    /// Unit normal pointing out of `cell_left`.
    pub normal: [f64; 2],
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.cell_right.is_none()
    }

    /// The cell across this edge as seen from `cell`.
    pub fn neighbor_of(&self, cell: usize) -> Option<usize> {
        if cell == self.cell_left {
            self.cell_right
        } else if Some(cell) == self.cell_right {
            Some(self.cell_left)
        } else {
            None
        }
    }

    /// Outward unit normal with respect to `cell`, which must be adjacent.
    pub fn normal_from(&self, cell: usize) -> [f64; 2] {
        if cell == self.cell_left {
            self.normal
        } else {
            [-self.normal[0], -self.normal[1]]
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub vertices: Vec<usize>,
    /// `edges[i]` joins `vertices[i]` and `vertices[(i + 1) % n]`.
    pub edges: Vec<usize>,
    pub centroid: [f64; 2],
    pub diameter: f64,
    /// Signed area; positive for a counterclockwise loop.
    pub area: f64,
    pub n_boundary_edges: usize,
}

impl Cell {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_triangle(&self) -> bool {
        self.vertices.len() == 3
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    pub cells: Vec<Cell>,
    pub level: u32,
    pub family: MeshFamily,
}

impl Mesh {
    /// Builds a mesh from vertex coordinates and cell vertex loops, deriving
    /// edges, adjacency and cell geometry.
    ///
    /// Structural problems that prevent building the incidence (bad indices,
    /// repeated vertices, an edge claimed by more than two cells) are errors;
    /// geometric problems are left for [`validate`] to report.
    pub fn from_cells(
        points: Vec<[f64; 2]>,
        loops: Vec<Vec<usize>>,
        family: MeshFamily,
        level: u32,
    ) -> Result<Mesh> {
        let vertices: Vec<Vertex> = points.iter().map(|p| Vertex { x: p[0], y: p[1] }).collect();
        let mut edges: Vec<Edge> = Vec::new();
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut cells = Vec::with_capacity(loops.len());

        for (cid, verts) in loops.into_iter().enumerate() {
            let n = verts.len();
            if n < 3 {
                return Err(Error::InvalidArgument(format!(
                    "cell {cid} has {n} vertices (need at least 3)"
                )));
            }
            if let Some(&bad) = verts.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::InvalidArgument(format!(
                    "cell {cid} references vertex {bad} but only {} vertices exist",
                    vertices.len()
                )));
            }
            let mut cell_edges = Vec::with_capacity(n);
            for i in 0..n {
                let a = verts[i];
                let b = verts[(i + 1) % n];
                if a == b {
                    return Err(Error::InvalidArgument(format!(
                        "cell {cid} repeats vertex {a} consecutively"
                    )));
                }
                let key = (a.min(b), a.max(b));
                let eid = match lookup.get(&key) {
                    Some(&eid) => {
                        let e = &mut edges[eid];
                        if e.cell_right.is_some() || e.cell_left == cid {
                            return Err(Error::InvalidArgument(format!(
                                "edge ({a}, {b}) is shared by more than two cells"
                            )));
                        }
                        e.cell_right = Some(cid);
                        eid
                    }
                    None => {
                        let pa = vertices[a];
                        let pb = vertices[b];
                        let dx = pb.x - pa.x;
                        let dy = pb.y - pa.y;
                        let length = dx.hypot(dy);
                        let eid = edges.len();
                        edges.push(Edge {
                            v0: a,
                            v1: b,
                            cell_left: cid,
                            cell_right: None,
                            length,
                            normal: [dy / length, -dx / length],
                        });
                        lookup.insert(key, eid);
                        eid
                    }
                };
                cell_edges.push(eid);
            }
            let (area, centroid) = polygon_area_centroid(&vertices, &verts);
            let mut diameter: f64 = 0.0;
            for (i, &a) in verts.iter().enumerate() {
                for &b in &verts[i + 1..] {
                    let d = (vertices[a].x - vertices[b].x).hypot(vertices[a].y - vertices[b].y);
                    diameter = diameter.max(d);
                }
            }
            cells.push(Cell {
                vertices: verts,
                edges: cell_edges,
                centroid,
                diameter,
                area,
                n_boundary_edges: 0,
            });
        }

        for cell in &mut cells {
            cell.n_boundary_edges = cell.edges.iter().filter(|&&e| edges[e].is_boundary()).count();
        }

        Ok(Mesh {
            vertices,
            edges,
            cells,
            level,
            family,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_boundary_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.is_boundary()).count()
    }

    pub fn max_diameter(&self) -> f64 {
        self.cells.iter().map(|c| c.diameter).fold(0.0, f64::max)
    }

    pub fn vertex_point(&self, v: usize) -> [f64; 2] {
        self.vertices[v].point()
    }

    /// Edge-neighbors of a cell, in the order of its edge list.
    pub fn neighbors(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        self.cells[cell]
            .edges
            .iter()
            .filter_map(move |&e| self.edges[e].neighbor_of(cell))
    }

    /// Swaps `cell_left`/`cell_right` on every interior edge, reversing the
    /// stored vertex order and normal so the left-cell convention still holds.
    pub fn with_flipped_interior_edges(&self) -> Mesh {
        let mut out = self.clone();
        for e in out.edges.iter_mut() {
            if let Some(right) = e.cell_right {
                e.cell_right = Some(e.cell_left);
                e.cell_left = right;
                std::mem::swap(&mut e.v0, &mut e.v1);
                e.normal = [-e.normal[0], -e.normal[1]];
            }
        }
        out
    }
}

fn polygon_area_centroid(vertices: &[Vertex], loop_: &[usize]) -> (f64, [f64; 2]) {
    // Shoelace about the first vertex to limit cancellation.
    let o = vertices[loop_[0]];
    let mut a2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    let n = loop_.len();
    for i in 0..n {
        let p = vertices[loop_[i]];
        let q = vertices[loop_[(i + 1) % n]];
        let (px, py) = (p.x - o.x, p.y - o.y);
        let (qx, qy) = (q.x - o.x, q.y - o.y);
        let cross = px * qy - qx * py;
        a2 += cross;
        cx += (px + qx) * cross;
        cy += (py + qy) * cross;
    }
    let area = 0.5 * a2;
    if a2 == 0.0 {
        return (0.0, [o.x, o.y]);
    }
    (area, [o.x + cx / (3.0 * a2), o.y + cy / (3.0 * a2)])
}

/// Triangulation of the unit square: level 1 is the square cut along the
/// diagonal from (1,0) to (0,1); each further level halves the spacing,
/// which is the same as splitting every triangle into four congruent ones.
pub fn gen_triangular(level: u32) -> Result<Mesh> {
    if !(1..=MAX_TRIANGULAR_LEVEL).contains(&level) {
        return Err(Error::InvalidArgument(format!(
            "triangular level must be in 1..={MAX_TRIANGULAR_LEVEL}, got {level}"
        )));
    }
    let n = 1usize << (level - 1);
    let nf = n as f64;
    let mut points = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            points.push([i as f64 / nf, j as f64 / nf]);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut loops = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let sw = id(i, j);
            let se = id(i + 1, j);
            let ne = id(i + 1, j + 1);
            let nw = id(i, j + 1);
            loops.push(vec![sw, se, nw]);
            loops.push(vec![se, ne, nw]);
        }
    }
    Mesh::from_cells(points, loops, MeshFamily::ForwardSlashTriangles, level)
}

/// Cut-corner polygonal mesh on an `N x N` grid with `N = 2^level`.
///
/// Around every interior grid vertex the four incident square corners are
/// cut at a quarter of the spacing. Interior squares become octagons, the
/// cut corners form diamonds, edge squares become hexagons and the four
/// corner squares become pentagons. Boundary grid vertices are never cut, so
/// no cell has more than two boundary edges.
pub fn gen_polygonal(level: u32) -> Result<Mesh> {
    if !(1..=MAX_POLYGONAL_LEVEL).contains(&level) {
        return Err(Error::InvalidArgument(format!(
            "polygonal level must be in 1..={MAX_POLYGONAL_LEVEL}, got {level}"
        )));
    }
    let n = 1i64 << level;
    // Lattice in units of h/4 where h = 1/n; every vertex lies on it.
    let sub = 4i64;
    let m = (n * sub) as f64;
    let cut = (CORNER_CUT_FRACTION * sub as f64) as i64;

    let mut points: Vec<[f64; 2]> = Vec::new();
    let mut index: HashMap<(i64, i64), usize> = HashMap::new();
    let mut vid = |ix: i64, iy: i64, points: &mut Vec<[f64; 2]>| -> usize {
        *index.entry((ix, iy)).or_insert_with(|| {
            points.push([ix as f64 / m, iy as f64 / m]);
            points.len() - 1
        })
    };
    let interior = |i: i64, j: i64| i > 0 && i < n && j > 0 && j < n;

    let mut loops = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let mut lp = Vec::with_capacity(8);
            // (grid corner, offset of the point reached first, offset of the second)
            let corners = [
                ((i, j), (0, cut), (cut, 0)),
                ((i + 1, j), (-cut, 0), (0, cut)),
                ((i + 1, j + 1), (0, -cut), (-cut, 0)),
                ((i, j + 1), (cut, 0), (0, -cut)),
            ];
            for ((gi, gj), first, second) in corners {
                let (bx, by) = (gi * sub, gj * sub);
                if interior(gi, gj) {
                    lp.push(vid(bx + first.0, by + first.1, &mut points));
                    lp.push(vid(bx + second.0, by + second.1, &mut points));
                } else {
                    lp.push(vid(bx, by, &mut points));
                }
            }
            loops.push(lp);
        }
    }
    for j in 1..n {
        for i in 1..n {
            let (bx, by) = (i * sub, j * sub);
            loops.push(vec![
                vid(bx, by - cut, &mut points),
                vid(bx + cut, by, &mut points),
                vid(bx, by + cut, &mut points),
                vid(bx - cut, by, &mut points),
            ]);
        }
    }
    Mesh::from_cells(points, loops, MeshFamily::CutCornerPolygons, level)
}

/// Generates a mesh of the given family and level.
pub fn generate(family: MeshFamily, level: u32) -> Result<Mesh> {
    match family {
        MeshFamily::ForwardSlashTriangles => gen_triangular(level),
        MeshFamily::CutCornerPolygons => gen_polygonal(level),
        MeshFamily::Custom => Err(Error::InvalidArgument(
            "custom meshes cannot be generated".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangular_level_one() {
        let m = gen_triangular(1).unwrap();
        assert_eq!((m.n_vertices(), m.n_edges(), m.n_cells()), (4, 5, 2));
        assert!(m.cells.iter().all(|c| c.n_boundary_edges == 2));
    }

    #[test]
    fn triangular_level_two_areas() {
        let m = gen_triangular(2).unwrap();
        assert_eq!(m.n_cells(), 8);
        for c in &m.cells {
            assert!((c.area - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn triangular_level_six_cells() {
        let m = gen_triangular(6).unwrap();
        assert_eq!(m.n_cells(), 2048);
        assert_eq!(m.n_cells() * 3, 6144);
    }

    #[test]
    fn triangular_corner_cells() {
        for level in 2..=5 {
            let m = gen_triangular(level).unwrap();
            let corners: Vec<&Cell> = m.cells.iter().filter(|c| c.n_boundary_edges == 2).collect();
            assert_eq!(corners.len(), 2);
            let at = |c: &Cell, p: [f64; 2]| c.vertices.iter().any(|&v| m.vertex_point(v) == p);
            assert!(corners.iter().any(|c| at(c, [0.0, 0.0])));
            assert!(corners.iter().any(|c| at(c, [1.0, 1.0])));
            assert!(m.cells.iter().all(|c| c.n_boundary_edges <= 2));
        }
    }

    #[test]
    fn polygonal_level_one() {
        let m = gen_polygonal(1).unwrap();
        assert_eq!(m.n_cells(), 5);
        let sizes: Vec<usize> = m.cells.iter().map(|c| c.n_vertices()).collect();
        assert_eq!(sizes, vec![5, 5, 5, 5, 4]);
        let diamond = &m.cells[4];
        assert!((diamond.area - 2.0 * (0.125f64).powi(2)).abs() < 1e-15);
        assert_eq!(diamond.n_boundary_edges, 0);
    }

    #[test]
    fn polygonal_cell_shapes() {
        let m = gen_polygonal(3).unwrap();
        let n = 8usize;
        assert_eq!(m.n_cells(), n * n + (n - 1) * (n - 1));
        let count = |k: usize| m.cells.iter().filter(|c| c.n_vertices() == k).count();
        assert_eq!(count(8), (n - 2) * (n - 2));
        assert_eq!(count(6), 4 * (n - 2));
        assert_eq!(count(5), 4);
        assert_eq!(count(4), (n - 1) * (n - 1));
    }

    #[test]
    fn level_bounds() {
        assert!(gen_triangular(0).is_err());
        assert!(gen_triangular(13).is_err());
        assert!(gen_polygonal(0).is_err());
        assert!(gen_polygonal(11).is_err());
    }

    #[test]
    fn edge_normals_point_out_of_left_cell() {
        for m in [gen_triangular(3).unwrap(), gen_polygonal(2).unwrap()] {
            for e in &m.edges {
                let c = m.cells[e.cell_left].centroid;
                let p = m.vertex_point(e.v0);
                let d = (p[0] - c[0]) * e.normal[0] + (p[1] - c[1]) * e.normal[1];
                assert!(d > 0.0);
            }
        }
    }

    #[test]
    fn flipping_interior_edges_keeps_left_convention() {
        let m = gen_polygonal(2).unwrap();
        let f = m.with_flipped_interior_edges();
        assert!(validate(&f).is_empty());
        for (a, b) in m.edges.iter().zip(&f.edges) {
            if let Some(r) = a.cell_right {
                assert_eq!(b.cell_left, r);
            }
        }
    }

    #[test]
    fn shared_edge_overuse_rejected() {
        let pts = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, -1.0], [0.5, 2.0]];
        let loops = vec![vec![0, 1, 2], vec![1, 0, 3], vec![0, 1, 4]];
        assert!(Mesh::from_cells(pts, loops, MeshFamily::Custom, 1).is_err());
    }
}
