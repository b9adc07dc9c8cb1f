//! Self-checks of the discretization, run by `polycdg verify` and reused by
//! the acceptance tests.
//!
//! Each check exercises one module contract on small meshes and reports a
//! measured quantity next to its threshold.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{h1h_norm, norm_equivalence_probe};
use crate::basis::{poly_dim, project_scalar, MonomialBasis};
use crate::error::Result;
use crate::field::BrokenPolynomial;
use crate::mesh::{gen_polygonal, gen_triangular, read_mesh_str, validate, write_mesh_string, Mesh, MeshFamily};
use crate::quadrature::{edge_rule, polygon_rule, triangle_rule};
use crate::system::{assemble_with, expected_dofs, solve, sparsity_pattern, Discretization};
use crate::weakgrad::{build_all, check_ibp_identity, volume_order, BcMode, WeakGradOperator};

/// Relative tolerance of the exact identities (projection, integration by parts).
pub const IDENTITY_TOL: f64 = 1e-11;
/// Smallest acceptable `|||v||| / ‖v‖_{1,h}` in the norm-equivalence probe.
pub const MIN_NORM_RATIO: f64 = 1e-3;
/// Largest allowed boundary trace of a strong-mode trial function.
pub const TRACE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        CheckOutcome {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

/// Continuous piecewise-linear function with the given vertex values, as
/// element-wise polynomials of degree `k` on a triangular mesh.
pub fn piecewise_linear(mesh: &Mesh, k: usize, nodal: &[f64]) -> Result<BrokenPolynomial> {
    let coeffs = (0..mesh.n_cells())
        .map(|c| {
            let vs = &mesh.cells[c].vertices;
            let p: Vec<[f64; 2]> = vs.iter().map(|&v| mesh.vertex_point(v)).collect();
            let vals: Vec<f64> = vs.iter().map(|&v| nodal[v]).collect();
            let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
            let interp = move |x: [f64; 2]| {
                let l1 = ((x[0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (x[1] - p[0][1])) / det;
                let l2 = ((p[1][0] - p[0][0]) * (x[1] - p[0][1]) - (x[0] - p[0][0]) * (p[1][1] - p[0][1])) / det;
                vals[0] * (1.0 - l1 - l2) + vals[1] * l1 + vals[2] * l2
            };
            project_scalar(interp, mesh, c, k)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BrokenPolynomial { degree: k, coeffs })
}

/// Global polynomial of degree `k` with the given coefficients in the
/// monomials of `(x − ½, y − ½)`, restricted to every cell.
pub fn global_polynomial(mesh: &Mesh, k: usize, coeffs: &[f64]) -> Result<BrokenPolynomial> {
    let global = MonomialBasis::new(k, [0.5, 0.5], 1.0);
    let c = coeffs.to_vec();
    BrokenPolynomial::project(mesh, k, |p| global.evaluate(&c, p))
}

/// `‖∇_w φ − ℚ_h ∇φ‖_T / (‖ℚ_h ∇φ‖_T + ‖φ‖_T / h_T)` on one cell.
pub fn projection_deviation(mesh: &Mesh, op: &WeakGradOperator, phi: &BrokenPolynomial) -> Result<f64> {
    let cell = op.cell;
    let rule = polygon_rule(mesh, cell, volume_order(op.k, op.j))?;
    let own = MonomialBasis::for_cell(mesh, cell, phi.degree);
    let ns = op.basis.scalar.dim();
    let mut moments = DVector::zeros(2 * ns);
    let mut vals = vec![0.0; ns];
    let mut phi_sq = 0.0;
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        op.basis.scalar.eval_into(*p, &mut vals);
        let g = own.evaluate_grad(phi.coeffs[cell].as_slice(), *p);
        let v = own.evaluate(phi.coeffs[cell].as_slice(), *p);
        phi_sq += w * v * v;
        for (a, s) in vals.iter().enumerate() {
            moments[a] += w * g[0] * s;
            moments[ns + a] += w * g[1] * s;
        }
    }
    let projected = op.whitened_projection(&moments);
    let weak = op.apply_whitened(phi);
    let scale = projected.norm() + phi_sq.sqrt() / mesh.cells[cell].diameter;
    if scale == 0.0 {
        return Ok(weak.norm());
    }
    Ok((weak - projected).norm() / scale)
}

/// Largest relative deviation from `∇_w φ = ℚ_h ∇φ` over `samples` seeded
/// continuous inputs.
///
/// Inputs alternate between global polynomials of degree `k` and, on
/// triangular meshes, continuous piecewise-linear functions vanishing on the
/// boundary. The identity needs `{φ} = φ` on every edge of the cell, so in
/// weak mode global polynomials (which do not vanish on the boundary) are
/// only checked on cells without boundary edges.
pub fn projection_identity(mesh: &Mesh, k: usize, bc: BcMode, samples: usize, seed: u64) -> Result<f64> {
    let ops = build_all(mesh, k, None, bc)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let triangles = mesh.cells.iter().all(|c| c.is_triangle());
    let mut worst: f64 = 0.0;
    for s in 0..samples {
        let (phi, vanishes_on_boundary) = if triangles && s % 2 == 1 {
            let nodal: Vec<f64> = (0..mesh.n_vertices()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let mut nodal = nodal;
            for e in mesh.edges.iter().filter(|e| e.is_boundary()) {
                nodal[e.v0] = 0.0;
                nodal[e.v1] = 0.0;
            }
            (piecewise_linear(mesh, k, &nodal)?, true)
        } else {
            let c: Vec<f64> = (0..poly_dim(k)).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            (global_polynomial(mesh, k, &c)?, false)
        };
        for op in &ops {
            if bc == BcMode::Weak && !vanishes_on_boundary && mesh.cells[op.cell].n_boundary_edges > 0 {
                continue;
            }
            worst = worst.max(projection_deviation(mesh, op, &phi)?);
        }
    }
    Ok(worst)
}

/// Largest `residual / scale` of the integration-by-parts identity over
/// `samples` seeded element-wise polynomials with coefficients in `[-1, 1]`.
pub fn ibp_identity(mesh: &Mesh, k: usize, bc: BcMode, samples: usize, seed: u64) -> Result<f64> {
    let ops = build_all(mesh, k, None, bc)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let mut v = BrokenPolynomial::zeros(mesh, k);
        for c in v.coeffs.iter_mut() {
            for x in c.iter_mut() {
                *x = rng.gen_range(-1.0..=1.0);
            }
        }
        for op in &ops {
            let r = check_ibp_identity(mesh, op, &v, bc)?;
            if r.scale > 0.0 {
                worst = worst.max(r.residual / r.scale);
            }
        }
    }
    Ok(worst)
}

/// Largest boundary-edge trace of the strong-mode local bases, sampled at
/// interior and end points of each boundary edge.
pub fn max_strong_trace(mesh: &Mesh, k: usize) -> Result<f64> {
    let dofs = crate::system::DofMap::new(mesh, k, BcMode::Strong)?;
    let mut worst: f64 = 0.0;
    for (c, cd) in dofs.cells.iter().enumerate() {
        let basis = MonomialBasis::for_cell(mesh, c, k);
        for &e in &mesh.cells[c].edges {
            let edge = &mesh.edges[e];
            if !edge.is_boundary() {
                continue;
            }
            let (a, b) = (mesh.vertex_point(edge.v0), mesh.vertex_point(edge.v1));
            for t in [0.0, 0.21, 0.5, 0.77, 1.0] {
                let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                for col in 0..cd.dim {
                    worst = worst.max(basis.evaluate(cd.basis.column(col).as_slice(), p).abs());
                }
            }
        }
    }
    Ok(worst)
}

fn check_quadrature() -> Result<CheckOutcome> {
    let mut worst: f64 = 0.0;
    for order in 1..=20 {
        let r = triangle_rule(order)?;
        for a in 0..=order {
            for b in 0..=(order - a) {
                let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                let got = r.integrate(|p| p[0].powi(a as i32) * p[1].powi(b as i32));
                worst = worst.max((got - exact).abs() / exact);
            }
        }
    }
    for n in 1..=12 {
        let r = edge_rule(n)?;
        for d in 0..2 * n {
            let exact = if d % 2 == 0 { 2.0 / (d as f64 + 1.0) } else { 0.0 };
            let got: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(d as i32)).sum();
            worst = worst.max((got - exact).abs());
        }
    }
    Ok(CheckOutcome::new(
        "quadrature exactness",
        worst < 1e-12,
        format!("max relative monomial error {worst:.2e} (threshold 1e-12)"),
    ))
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn check_meshes() -> Result<CheckOutcome> {
    let mut issues = Vec::new();
    for level in 1..=4 {
        let t = gen_triangular(level)?;
        if t.n_cells() != 2 * 4usize.pow(level - 1) {
            issues.push(format!("tri level {level}: {} cells", t.n_cells()));
        }
        issues.extend(validate(&t).iter().map(|v| format!("tri level {level}: {v}")));
        let p = gen_polygonal(level)?;
        let n = 1usize << level;
        if p.n_cells() != n * n + (n - 1) * (n - 1) {
            issues.push(format!("poly level {level}: {} cells", p.n_cells()));
        }
        issues.extend(validate(&p).iter().map(|v| format!("poly level {level}: {v}")));
        for m in [&t, &p] {
            let back = read_mesh_str(&write_mesh_string(m))?;
            if back.n_cells() != m.n_cells() || back.n_edges() != m.n_edges() {
                issues.push(format!("{} level {level}: text round trip changed the mesh", m.family));
            }
        }
    }
    Ok(CheckOutcome::new(
        "mesh generation, validation and round trip",
        issues.is_empty(),
        if issues.is_empty() {
            "tri and poly levels 1-4 valid".into()
        } else {
            issues.join("; ")
        },
    ))
}

fn check_identities() -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    for family in [MeshFamily::ForwardSlashTriangles, MeshFamily::CutCornerPolygons] {
        let mesh = crate::mesh::generate(family, 3)?;
        for bc in [BcMode::Strong, BcMode::Weak] {
            for k in 1..=3 {
                let proj = projection_identity(&mesh, k, bc, 4, 7)?;
                out.push(CheckOutcome::new(
                    &format!("weak gradient equals projected gradient ({family}, {bc}, k={k})"),
                    proj <= IDENTITY_TOL,
                    format!("max relative deviation {proj:.2e} (threshold {IDENTITY_TOL:.0e})"),
                ));
                let ibp = ibp_identity(&mesh, k, bc, 2, 11)?;
                out.push(CheckOutcome::new(
                    &format!("integration by parts ({family}, {bc}, k={k})"),
                    ibp <= IDENTITY_TOL,
                    format!("max relative residual {ibp:.2e} (threshold {IDENTITY_TOL:.0e})"),
                ));
            }
        }
    }
    Ok(out)
}

fn check_system() -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    for family in [MeshFamily::ForwardSlashTriangles, MeshFamily::CutCornerPolygons] {
        let mesh = crate::mesh::generate(family, 3)?;
        for bc in [BcMode::Strong, BcMode::Weak] {
            let k = 2;
            let disc = Discretization::new(&mesh, k, bc, None)?;
            let f = |p: [f64; 2]| p[0] * (1.0 - p[0]) + p[1];
            let sys = assemble_with(&mesh, &disc, &f)?;
            let asym = sys.matrix.asymmetry();
            let dims_ok = disc.n_dofs() == expected_dofs(&mesh, k, bc);
            let solved = solve(&sys, 1e-12, None);
            let (cg_ok, cg_detail) = match &solved {
                Ok(s) => (true, format!("CG {} iterations", s.iterations)),
                Err(e) => (false, e.to_string()),
            };
            out.push(CheckOutcome::new(
                &format!("assembly and solve ({family}, {bc}, k={k})"),
                asym == 0.0 && dims_ok && cg_ok,
                format!("asymmetry {asym:.1e}, dims match formula: {dims_ok}, {cg_detail}"),
            ));
            let pattern = sparsity_pattern(&sys, &disc.dofs);
            let j = disc.ops[0].j;
            let wide = Discretization::new(&mesh, k, bc, Some(j + 2))?;
            let wide_sys = assemble_with(&mesh, &wide, &f)?;
            let same = pattern == sparsity_pattern(&wide_sys, &wide.dofs);
            out.push(CheckOutcome::new(
                &format!("sparsity independent of j ({family}, {bc})"),
                same,
                format!("cell-pair pattern at j and j+2 identical: {same}"),
            ));
        }
        let trace = (1..=4).map(|k| max_strong_trace(&mesh, k)).collect::<Result<Vec<_>>>()?;
        let worst = trace.iter().cloned().fold(0.0, f64::max);
        out.push(CheckOutcome::new(
            &format!("strong-mode boundary traces ({family})"),
            worst <= TRACE_TOL,
            format!("max |trace| {worst:.2e} (threshold {TRACE_TOL:.0e})"),
        ));
    }
    Ok(out)
}

fn check_norms() -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    for family in [MeshFamily::ForwardSlashTriangles, MeshFamily::CutCornerPolygons] {
        let mesh = crate::mesh::generate(family, 3)?;
        for bc in [BcMode::Strong, BcMode::Weak] {
            let disc = Discretization::new(&mesh, 1, bc, None)?;
            let probe = norm_equivalence_probe(&mesh, &disc, 10, 3)?;
            // Only the lower end is a property of the method: a single-cell
            // indicator already has ratio sqrt(10)/2 > 1.5 at the default j
            // (see the closed-form test in `analysis`).
            let ok = probe.min_ratio >= MIN_NORM_RATIO;
            out.push(CheckOutcome::new(
                &format!("norm equivalence lower bound ({family}, {bc})"),
                ok,
                format!(
                    "|||v|||/‖v‖_1,h in [{:.3}, {:.3}] (lower threshold {MIN_NORM_RATIO:.0e})",
                    probe.min_ratio, probe.max_ratio
                ),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut v = BrokenPolynomial::zeros(&mesh, 2);
        for c in v.coeffs.iter_mut() {
            for x in c.iter_mut() {
                *x = rng.gen_range(-1.0..=1.0);
            }
        }
        let norm = h1h_norm(&mesh, &v)?.total();
        out.push(CheckOutcome::new(
            &format!("discrete H1 norm positive ({family})"),
            norm > 0.0 && h1h_norm(&mesh, &BrokenPolynomial::zeros(&mesh, 2))?.total() == 0.0,
            format!("random field {norm:.3e}, zero field 0"),
        ));
    }
    Ok(out)
}

fn check_relabeling() -> Result<CheckOutcome> {
    use crate::analysis::{energy_error, l2_error};
    use crate::problem::{Problem, SineProblem};
    let mut worst: f64 = 0.0;
    for family in [MeshFamily::ForwardSlashTriangles, MeshFamily::CutCornerPolygons] {
        let mesh = crate::mesh::generate(family, 3)?;
        let flipped = mesh.with_flipped_interior_edges();
        let mut errs = Vec::new();
        for m in [&mesh, &flipped] {
            let disc = Discretization::new(m, 1, BcMode::Weak, None)?;
            let sys = assemble_with(m, &disc, &|p| SineProblem.source(p))?;
            let sol = solve(&sys, 1e-13, None)?;
            let uh = disc.to_broken(&sol.coeffs);
            errs.push((
                l2_error(m, &uh, &|p| SineProblem.solution(p))?,
                energy_error(m, &disc.ops, &uh, &|p| SineProblem.gradient(p))?,
            ));
        }
        worst = worst.max(((errs[0].0 - errs[1].0) / errs[0].0).abs());
        worst = worst.max(((errs[0].1 - errs[1].1) / errs[0].1).abs());
    }
    Ok(CheckOutcome::new(
        "errors invariant under edge relabeling",
        worst < 1e-9,
        format!("max relative change {worst:.2e} (threshold 1e-9)"),
    ))
}

/// Runs every check; numerical errors inside a check count as a failure of
/// that check.
pub fn run_suite() -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let mut push_one = |name: &str, r: Result<CheckOutcome>| match r {
        Ok(c) => out.push(c),
        Err(e) => out.push(CheckOutcome::new(name, false, e.to_string())),
    };
    push_one("quadrature exactness", check_quadrature());
    push_one("mesh generation, validation and round trip", check_meshes());
    push_one("errors invariant under edge relabeling", check_relabeling());
    for (name, group) in [
        ("weak-gradient identities", check_identities()),
        ("assembly and solve", check_system()),
        ("norms", check_norms()),
    ] {
        match group {
            Ok(list) => out.extend(list),
            Err(e) => out.push(CheckOutcome::new(name, false, e.to_string())),
        }
    }
    out
}
