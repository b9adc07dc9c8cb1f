//! Discrete norms, error measures and convergence rates.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::basis::{project_scalar_with, smooth_order, MonomialBasis};
use crate::error::Result;
use crate::field::BrokenPolynomial;
use crate::mesh::Mesh;
use crate::quadrature::{edge_rule, polygon_rule};
use crate::system::Discretization;
use crate::weakgrad::WeakGradOperator;

/// `‖u_h − Q_0 u‖` summed over cells, with `Q_0` the element-wise L²
/// projection onto the degree of `u_h`.
pub fn l2_error(mesh: &Mesh, u_h: &BrokenPolynomial, u: &(dyn Fn([f64; 2]) -> f64 + Sync)) -> Result<f64> {
    let k = u_h.degree;
    let parts: Vec<f64> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let basis = MonomialBasis::for_cell(mesh, c, k);
            let rule = polygon_rule(mesh, c, smooth_order(k))?;
            let q0 = project_scalar_with(u, &basis, &rule)?;
            let d = &u_h.coeffs[c] - q0;
            let m = basis.mass_matrix(&rule)?;
            Ok(d.dot(&(m * &d)))
        })
        .collect::<Result<_>>()?;
    Ok(parts.iter().sum::<f64>().sqrt())
}

/// `|||u − u_h|||`, evaluated as `(Σ_T ‖ℚ_h ∇u − ∇_w u_h‖²_T)^{1/2}`: the
/// weak gradient of the exact solution is the L² projection of its gradient.
pub fn energy_error(
    mesh: &Mesh,
    ops: &[WeakGradOperator],
    u_h: &BrokenPolynomial,
    grad_u: &(dyn Fn([f64; 2]) -> [f64; 2] + Sync),
) -> Result<f64> {
    let parts: Vec<f64> = ops
        .par_iter()
        .map(|op| {
            let rule = polygon_rule(mesh, op.cell, smooth_order(op.j))?;
            let ns = op.basis.scalar.dim();
            let mut moments = DVector::zeros(2 * ns);
            let mut vals = vec![0.0; ns];
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                op.basis.scalar.eval_into(*p, &mut vals);
                let g = grad_u(*p);
                for (a, v) in vals.iter().enumerate() {
                    moments[a] += w * g[0] * v;
                    moments[ns + a] += w * g[1] * v;
                }
            }
            let d = op.whitened_projection(&moments) - op.apply_whitened(u_h);
            Ok(d.norm_squared())
        })
        .collect::<Result<_>>()?;
    Ok(parts.iter().sum::<f64>().sqrt())
}

/// `|||v|||` for a field given by element-wise coefficients.
pub fn energy_norm(ops: &[WeakGradOperator], v: &BrokenPolynomial) -> f64 {
    ops.iter()
        .map(|op| op.apply_whitened(v).norm_squared())
        .sum::<f64>()
        .sqrt()
}

/// Components of the discrete H¹ norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct H1hNorm {
    /// `Σ_T ‖∇v‖²_T`
    pub gradient_sq: f64,
    /// `Σ_e h_e⁻¹ ‖[v]‖²_e`, with `[v] = v` on boundary edges.
    pub jump_sq: f64,
}

impl H1hNorm {
    pub fn total(&self) -> f64 {
        (self.gradient_sq + self.jump_sq).sqrt()
    }
}

/// `‖v‖_{1,h}`. Jumps are taken as `v|_left − v|_right`; only their squares
/// enter, so the edge orientation does not matter.
pub fn h1h_norm(mesh: &Mesh, v: &BrokenPolynomial) -> Result<H1hNorm> {
    let k = v.degree;
    let order = (2 * k).max(1);
    let mut gradient_sq = 0.0;
    for c in 0..mesh.n_cells() {
        let basis = MonomialBasis::for_cell(mesh, c, k);
        let rule = polygon_rule(mesh, c, order)?;
        gradient_sq += rule.integrate(|p| {
            let g = basis.evaluate_grad(v.coeffs[c].as_slice(), p);
            g[0] * g[0] + g[1] * g[1]
        });
    }
    let er = edge_rule(k + 1)?;
    let mut jump_sq = 0.0;
    for e in &mesh.edges {
        let (pts, w) = er.on_segment(mesh.vertex_point(e.v0), mesh.vertex_point(e.v1));
        let s: f64 = pts
            .iter()
            .zip(&w)
            .map(|(p, w)| {
                let left = v.eval(mesh, e.cell_left, *p);
                let right = e.cell_right.map_or(0.0, |r| v.eval(mesh, r, *p));
                w * (left - right) * (left - right)
            })
            .sum();
        jump_sq += s / e.length;
    }
    Ok(H1hNorm { gradient_sq, jump_sq })
}

/// Extremes of `|||v||| / ‖v‖_{1,h}` over sampled trial functions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeResult {
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Samples `n_samples` trial functions with coefficients uniform in
/// `[-1, 1]` (seeded) and records the ratio of the energy seminorm to the
/// discrete H¹ norm.
pub fn norm_equivalence_probe(
    mesh: &Mesh,
    disc: &Discretization,
    n_samples: usize,
    seed: u64,
) -> Result<ProbeResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    for _ in 0..n_samples.max(1) {
        let x: Vec<f64> = (0..disc.n_dofs()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let v = disc.to_broken(&x);
        let energy = energy_norm(&disc.ops, &v);
        let h1h = h1h_norm(mesh, &v)?.total();
        let r = energy / h1h;
        min_ratio = min_ratio.min(r);
        max_ratio = max_ratio.max(r);
    }
    Ok(ProbeResult {
        min_ratio,
        max_ratio,
        samples: n_samples.max(1),
        seed,
    })
}

/// Observed orders `log2(e_{l-1} / e_l)` between consecutive levels of
/// halving mesh size. The first level, and any level whose predecessor has
/// zero error, has no rate.
pub fn rates(errors: &[f64]) -> Vec<Option<f64>> {
    let mut out = Vec::with_capacity(errors.len());
    for (i, &e) in errors.iter().enumerate() {
        if i == 0 || errors[i - 1] == 0.0 || e == 0.0 {
            out.push(None);
        } else {
            out.push(Some((errors[i - 1] / e).log2()));
        }
    }
    out
}

/// One row of a convergence table.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub level: u32,
    pub l2_error: f64,
    pub l2_rate: Option<f64>,
    pub energy_error: f64,
    pub energy_rate: Option<f64>,
    /// `‖u_h − Q_0 u‖_{1,h}`
    pub h1h_error: f64,
    pub dim: usize,
}

/// Fills the rate columns of consecutive-level reports.
pub fn decorate_rates(reports: &mut [ErrorReport]) {
    let l2 = rates(&reports.iter().map(|r| r.l2_error).collect::<Vec<_>>());
    let en = rates(&reports.iter().map(|r| r.energy_error).collect::<Vec<_>>());
    for ((r, a), b) in reports.iter_mut().zip(l2).zip(en) {
        r.l2_rate = a;
        r.energy_rate = b;
    }
}

/// `‖u_h − Q_0 u‖_{1,h}`.
pub fn h1h_error(mesh: &Mesh, u_h: &BrokenPolynomial, u: impl Fn([f64; 2]) -> f64 + Copy) -> Result<f64> {
    let q0 = BrokenPolynomial::project(mesh, u_h.degree, u)?;
    let diff = BrokenPolynomial {
        degree: u_h.degree,
        coeffs: u_h
            .coeffs
            .iter()
            .zip(&q0.coeffs)
            .map(|(a, b)| a - b)
            .collect::<Vec<DVector<f64>>>(),
    };
    Ok(h1h_norm(mesh, &diff)?.total())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{gen_triangular, Mesh, MeshFamily};
    use crate::problem::{Problem, SineProblem};

    #[test]
    fn rates_basic() {
        let r = rates(&[4e-2, 1e-2]);
        assert_eq!(r[0], None);
        assert!((r[1].unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(rates(&[1e-3, 1e-3])[1], Some(0.0));
        assert_eq!(rates(&[0.0, 1e-3])[1], None);
    }

    #[test]
    fn l2_error_of_projection_is_zero() {
        let m = gen_triangular(3).unwrap();
        let u = |p: [f64; 2]| SineProblem.solution(p);
        let uh = BrokenPolynomial::project(&m, 2, u).unwrap();
        assert!(l2_error(&m, &uh, &u).unwrap() < 1e-13);
    }

    #[test]
    fn jump_term_of_single_cell_indicator() {
        // Unit-side square cell in the middle of a 3x3 grid of unit squares.
        let mut pts = Vec::new();
        for j in 0..4 {
            for i in 0..4 {
                pts.push([i as f64 / 3.0, j as f64 / 3.0]);
            }
        }
        let mut loops = Vec::new();
        for j in 0..3 {
            for i in 0..3 {
                let v = j * 4 + i;
                loops.push(vec![v, v + 1, v + 5, v + 4]);
            }
        }
        let m = Mesh::from_cells(pts, loops, MeshFamily::Custom, 1).unwrap();
        let mut v = BrokenPolynomial::zeros(&m, 1);
        v.coeffs[4][0] = 1.0;
        let n = h1h_norm(&m, &v).unwrap();
        assert_eq!(n.gradient_sq, 0.0);
        let expected: f64 = m.cells[4].edges.iter().map(|&e| m.edges[e].length / m.edges[e].length).sum();
        assert!((n.jump_sq - expected).abs() < 1e-13);
    }

    #[test]
    fn energy_of_single_cell_indicator() {
        // Same 3x3 grid. For j = 0 only the four neighbors see the jump:
        // ∇_w v = 1.5 n there, giving 4 · 2.25 / 9 = 1. For j = 1 the cell
        // itself contributes as well and the total is 10.
        let mut pts = Vec::new();
        for j in 0..4 {
            for i in 0..4 {
                pts.push([i as f64 / 3.0, j as f64 / 3.0]);
            }
        }
        let mut loops = Vec::new();
        for j in 0..3 {
            for i in 0..3 {
                let v = j * 4 + i;
                loops.push(vec![v, v + 1, v + 5, v + 4]);
            }
        }
        let m = Mesh::from_cells(pts, loops, MeshFamily::Custom, 1).unwrap();
        let mut v = BrokenPolynomial::zeros(&m, 1);
        v.coeffs[4][0] = 1.0;
        for (j, expected) in [(0, 1.0), (1, 10.0)] {
            let ops = crate::weakgrad::build_all(&m, 1, Some(j), crate::weakgrad::BcMode::Weak).unwrap();
            let e = energy_norm(&ops, &v);
            assert!((e * e - expected).abs() < 1e-11, "j={j}: {}", e * e);
        }
    }

    #[test]
    fn continuous_vanishing_field_has_no_jumps() {
        let m = gen_triangular(3).unwrap();
        let v = BrokenPolynomial::project(&m, 2, |p| p[0] * (1.0 - p[0]) * p[1] * (1.0 - p[1])).unwrap();
        // degree 4 data projected to degree 2 is not continuous; use degree 4.
        let v4 = BrokenPolynomial::project(&m, 4, |p| p[0] * (1.0 - p[0]) * p[1] * (1.0 - p[1])).unwrap();
        assert!(h1h_norm(&m, &v4).unwrap().jump_sq < 1e-24);
        assert!(h1h_norm(&m, &v).unwrap().jump_sq > 0.0);
    }
}
