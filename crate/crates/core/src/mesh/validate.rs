use std::fmt;

use super::Mesh;

const GEOM_TOL: f64 = 1e-12;
const AREA_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Entity {
    Mesh,
    Vertex(usize),
    Edge(usize),
    Cell(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    NonFiniteCoordinate,
    OutsideDomain,
    DegenerateEdge,
    NormalNotUnit,
    BoundaryEdgeOffDomain,
    Orientation,
    DegenerateArea,
    NonConvex,
    TooManyBoundaryEdges,
    AreaSum,
    EulerCharacteristic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub entity: Entity,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.entity {
            Entity::Mesh => write!(f, "mesh: {:?}: {}", self.rule, self.detail),
            Entity::Vertex(i) => write!(f, "vertex {i}: {:?}: {}", self.rule, self.detail),
            Entity::Edge(i) => write!(f, "edge {i}: {:?}: {}", self.rule, self.detail),
            Entity::Cell(i) => write!(f, "cell {i}: {:?}: {}", self.rule, self.detail),
        }
    }
}

fn on_square_side(a: [f64; 2], b: [f64; 2]) -> bool {
    let near = |u: f64, t: f64| (u - t).abs() <= GEOM_TOL;
    (near(a[0], 0.0) && near(b[0], 0.0))
        || (near(a[0], 1.0) && near(b[0], 1.0))
        || (near(a[1], 0.0) && near(b[1], 0.0))
        || (near(a[1], 1.0) && near(b[1], 1.0))
}

/// Checks every structural and geometric mesh invariant and reports the
/// violations found. An empty result means the mesh is admissible.
pub fn validate(mesh: &Mesh) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |entity, rule, detail: String| out.push(Violation { entity, rule, detail });

    for (i, v) in mesh.vertices.iter().enumerate() {
        if !v.x.is_finite() || !v.y.is_finite() {
            push(Entity::Vertex(i), Rule::NonFiniteCoordinate, format!("({}, {})", v.x, v.y));
        } else if v.x < -GEOM_TOL || v.x > 1.0 + GEOM_TOL || v.y < -GEOM_TOL || v.y > 1.0 + GEOM_TOL {
            push(Entity::Vertex(i), Rule::OutsideDomain, format!("({}, {})", v.x, v.y));
        }
    }

    for (i, e) in mesh.edges.iter().enumerate() {
        // written so that NaN lengths and normals are reported too
        if e.length.is_nan() || e.length <= 0.0 {
            push(Entity::Edge(i), Rule::DegenerateEdge, format!("length {}", e.length));
        }
        let nn = e.normal[0].hypot(e.normal[1]);
        if nn.is_nan() || (nn - 1.0).abs() > GEOM_TOL {
            push(Entity::Edge(i), Rule::NormalNotUnit, format!("|n| = {nn}"));
        }
        if e.is_boundary() && !on_square_side(mesh.vertex_point(e.v0), mesh.vertex_point(e.v1)) {
            push(
                Entity::Edge(i),
                Rule::BoundaryEdgeOffDomain,
                format!("edge ({}, {}) has one cell but is not on the square boundary", e.v0, e.v1),
            );
        }
    }

    let mut area_sum = 0.0;
    for (i, c) in mesh.cells.iter().enumerate() {
        area_sum += c.area.abs();
        let scale = c.diameter * c.diameter;
        if c.area.abs() <= GEOM_TOL * scale.max(f64::MIN_POSITIVE) {
            push(Entity::Cell(i), Rule::DegenerateArea, format!("area {}", c.area));
            continue;
        }
        if c.area < 0.0 {
            push(
                Entity::Cell(i),
                Rule::Orientation,
                "vertex loop is clockwise".to_string(),
            );
        }
        let sign = c.area.signum();
        let n = c.vertices.len();
        let convex = (0..n).all(|k| {
            let a = mesh.vertex_point(c.vertices[k]);
            let b = mesh.vertex_point(c.vertices[(k + 1) % n]);
            let d = mesh.vertex_point(c.vertices[(k + 2) % n]);
            let cross = (b[0] - a[0]) * (d[1] - b[1]) - (b[1] - a[1]) * (d[0] - b[0]);
            sign * cross >= -GEOM_TOL * scale
        });
        if !convex {
            push(Entity::Cell(i), Rule::NonConvex, "reflex corner".to_string());
        }
        if c.n_boundary_edges > 2 {
            push(
                Entity::Cell(i),
                Rule::TooManyBoundaryEdges,
                format!("{} boundary edges (at most 2 allowed)", c.n_boundary_edges),
            );
        }
    }

    if (area_sum - 1.0).abs() > AREA_SUM_TOL {
        push(Entity::Mesh, Rule::AreaSum, format!("cell areas sum to {area_sum}"));
    }
    let euler = mesh.n_vertices() as i64 - mesh.n_edges() as i64 + mesh.n_cells() as i64;
    if euler != 1 {
        push(
            Entity::Mesh,
            Rule::EulerCharacteristic,
            format!("V - E + C = {euler}, expected 1"),
        );
    }
    out
}
