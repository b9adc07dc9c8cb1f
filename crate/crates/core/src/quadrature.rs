//! Gauss rules on intervals, triangles and convex polygons.

use crate::error::{Error, Result};
use crate::mesh::Mesh;

pub const MAX_TRIANGLE_ORDER: usize = 30;
pub const MAX_EDGE_POINTS: usize = 30;

/// Two-dimensional rule: physical points and positive weights, exact for
/// polynomials of total degree up to `degree`.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn([f64; 2]) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(*p)).sum()
    }
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct EdgeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl EdgeRule {
    pub fn degree(&self) -> usize {
        2 * self.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Points and weights on the segment `a -> b` (weights sum to its length).
    pub fn on_segment(&self, a: [f64; 2], b: [f64; 2]) -> (Vec<[f64; 2]>, Vec<f64>) {
        let half = 0.5 * (b[0] - a[0]).hypot(b[1] - a[1]);
        let pts = self
            .nodes
            .iter()
            .map(|&t| {
                let s = 0.5 * (1.0 + t);
                [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
            })
            .collect();
        let w = self.weights.iter().map(|w| w * half).collect();
        (pts, w)
    }
}

/// Legendre values `(P_n(x), P_{n-1}(x))` by the three-term recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule (Newton on `P_n`).
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (pn, pm) = legendre_pair(n, x);
            let dp = nf * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (pn, pm) = legendre_pair(n, x);
        let dp = nf * (x * pn - pm) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

pub fn edge_rule(n_points: usize) -> Result<EdgeRule> {
    if !(1..=MAX_EDGE_POINTS).contains(&n_points) {
        return Err(Error::InvalidArgument(format!(
            "edge rule needs 1..={MAX_EDGE_POINTS} points, got {n_points}"
        )));
    }
    let (nodes, weights) = gauss_legendre(n_points);
    Ok(EdgeRule { nodes, weights })
}

/// Collapsed (Duffy) tensor Gauss–Legendre rule on the reference triangle
/// `{(0,0), (1,0), (0,1)}`, exact to total degree `order`.
pub fn triangle_rule(order: usize) -> Result<QuadratureRule> {
    if !(1..=MAX_TRIANGLE_ORDER).contains(&order) {
        return Err(Error::InvalidArgument(format!(
            "triangle rule order must be in 1..={MAX_TRIANGLE_ORDER}, got {order}"
        )));
    }
    // The collapsed direction carries one extra power from the Jacobian.
    let nu = (order + 3) / 2;
    let nv = (order + 2) / 2;
    let (tu, wu) = gauss_legendre(nu);
    let (tv, wv) = gauss_legendre(nv);
    let mut points = Vec::with_capacity(nu * nv);
    let mut weights = Vec::with_capacity(nu * nv);
    for (a, wa) in tu.iter().zip(&wu) {
        let u = 0.5 * (1.0 + a);
        for (b, wb) in tv.iter().zip(&wv) {
            let v = 0.5 * (1.0 + b);
            points.push([u, (1.0 - u) * v]);
            weights.push(0.25 * wa * wb * (1.0 - u));
        }
    }
    Ok(QuadratureRule {
        points,
        weights,
        degree: order,
    })
}

/// Maps a reference-triangle rule onto the triangle `(a, b, c)`.
pub fn map_to_triangle(reference: &QuadratureRule, a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> QuadratureRule {
    let e1 = [b[0] - a[0], b[1] - a[1]];
    let e2 = [c[0] - a[0], c[1] - a[1]];
    let jac = (e1[0] * e2[1] - e1[1] * e2[0]).abs();
    let points = reference
        .points
        .iter()
        .map(|p| [a[0] + e1[0] * p[0] + e2[0] * p[1], a[1] + e1[1] * p[0] + e2[1] * p[1]])
        .collect();
    let weights = reference.weights.iter().map(|w| w * jac).collect();
    QuadratureRule {
        points,
        weights,
        degree: reference.degree,
    }
}

fn is_convex_ccw(pts: &[[f64; 2]]) -> bool {
    let n = pts.len();
    let scale = pts
        .iter()
        .flat_map(|p| pts.iter().map(move |q| (p[0] - q[0]).hypot(p[1] - q[1])))
        .fold(0.0, f64::max);
    (0..n).all(|k| {
        let a = pts[k];
        let b = pts[(k + 1) % n];
        let c = pts[(k + 2) % n];
        (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]) >= -1e-12 * scale * scale
    })
}

/// Rule on a convex polygon given by its counterclockwise vertex loop:
/// triangles use the mapped reference rule directly, other polygons are
/// fan-triangulated about `center`.
pub fn polygon_rule_from_loop(
    reference: &QuadratureRule,
    loop_pts: &[[f64; 2]],
    center: [f64; 2],
) -> QuadratureRule {
    if loop_pts.len() == 3 {
        return map_to_triangle(reference, loop_pts[0], loop_pts[1], loop_pts[2]);
    }
    let n = loop_pts.len();
    let mut points = Vec::with_capacity(n * reference.len());
    let mut weights = Vec::with_capacity(n * reference.len());
    for i in 0..n {
        let sub = map_to_triangle(reference, center, loop_pts[i], loop_pts[(i + 1) % n]);
        points.extend(sub.points);
        weights.extend(sub.weights);
    }
    QuadratureRule {
        points,
        weights,
        degree: reference.degree,
    }
}

/// Rule on mesh cell `cell`, exact to total degree `order`.
pub fn polygon_rule(mesh: &Mesh, cell: usize, order: usize) -> Result<QuadratureRule> {
    let c = &mesh.cells[cell];
    let pts: Vec<[f64; 2]> = c.vertices.iter().map(|&v| mesh.vertex_point(v)).collect();
    if c.area <= 0.0 || !is_convex_ccw(&pts) {
        return Err(Error::NonConvexCell { cell });
    }
    let reference = triangle_rule(order)?;
    Ok(polygon_rule_from_loop(&reference, &pts, c.centroid))
}
