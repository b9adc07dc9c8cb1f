//! The library's quadrature, projections, weak gradients, norms and solver
//! checked against the independent reference computations in `common`.

mod common;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{Field, Monomials};
use polycdg::analysis::{energy_norm, h1h_norm};
use polycdg::mesh::generate;
use polycdg::quadrature::{edge_rule, polygon_rule, triangle_rule, MAX_EDGE_POINTS, MAX_TRIANGLE_ORDER};
use polycdg::system::{assemble_with, solve, Discretization};
use polycdg::weakgrad::{build_all, build_weak_grad, weak_gradient_degree};
use polycdg::{BcMode, BrokenPolynomial, Mesh, MeshFamily};

const FAMILIES: [MeshFamily; 2] = [MeshFamily::ForwardSlashTriangles, MeshFamily::CutCornerPolygons];
const MODES: [BcMode; 2] = [BcMode::Strong, BcMode::Weak];

fn random_field(mesh: &Mesh, k: usize, rng: &mut ChaCha8Rng) -> Field {
    let bases: Vec<Monomials> = (0..mesh.n_cells()).map(|c| Monomials::for_cell(mesh, c, k)).collect();
    let coeffs = bases
        .iter()
        .map(|b| (0..b.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    Field { bases, coeffs }
}

/// The same element-wise polynomial in the library's representation.
fn to_library(mesh: &Mesh, k: usize, v: &Field) -> BrokenPolynomial {
    let coeffs = (0..mesh.n_cells())
        .map(|c| polycdg::basis::project_scalar(|p| v.eval(c, p), mesh, c, k).unwrap())
        .collect();
    BrokenPolynomial { degree: k, coeffs }
}

/// A few points strictly inside `cell`: its vertices pulled toward the
/// vertex average.
fn interior_points(mesh: &Mesh, cell: usize) -> Vec<[f64; 2]> {
    let vs: Vec<[f64; 2]> = mesh.cells[cell].vertices.iter().map(|&v| mesh.vertex_point(v)).collect();
    let m = vs.len() as f64;
    let o = [vs.iter().map(|p| p[0]).sum::<f64>() / m, vs.iter().map(|p| p[1]).sum::<f64>() / m];
    let mut pts = vec![o];
    pts.extend(vs.iter().map(|p| [o[0] + 0.6 * (p[0] - o[0]), o[1] + 0.6 * (p[1] - o[1])]));
    pts
}

#[test]
fn edge_rules_match_golub_welsch() {
    for n in 1..=MAX_EDGE_POINTS {
        let rule = edge_rule(n).unwrap();
        let (x, w) = common::gauss_legendre(n);
        for i in 0..n {
            assert!((rule.nodes[i] - x[i]).abs() < 1e-14, "n={n} node {i}");
            assert!((rule.weights[i] - w[i]).abs() < 1e-14, "n={n} weight {i}");
        }
    }
}

#[test]
fn golub_welsch_oracle_is_exact_for_legendre_degrees() {
    // ∫_{-1}^{1} x^m = 2/(m+1) for even m, exact up to m = 2n-1
    for n in 1..=12 {
        let (x, w) = common::gauss_legendre(n);
        for m in 0..2 * n {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(m as i32)).sum();
            let exact = if m % 2 == 0 { 2.0 / (m as f64 + 1.0) } else { 0.0 };
            assert!((q - exact).abs() < 1e-13, "n={n} m={m}");
        }
    }
}

#[test]
fn triangle_rules_integrate_monomials_exactly() {
    for order in 1..=MAX_TRIANGLE_ORDER {
        let rule = triangle_rule(order).unwrap();
        for a in 0..=order as u32 {
            for b in 0..=(order as u32 - a) {
                let q = rule.integrate(|p| p[0].powi(a as i32) * p[1].powi(b as i32));
                let exact = common::reference_triangle_moment(a, b);
                assert!((q - exact).abs() <= 1e-13 * exact, "order {order}: x^{a} y^{b}: {q} vs {exact}");
            }
        }
    }
}

#[test]
fn duffy_oracle_agrees_with_closed_form() {
    let pts = common::triangle_points(8, [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]);
    for a in 0..=7 {
        for b in 0..=(7 - a) {
            let q: f64 = pts.iter().map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32)).sum();
            let exact = common::reference_triangle_moment(a, b);
            assert!((q - exact).abs() <= 1e-14 * exact.max(1e-3));
        }
    }
}

#[test]
fn cell_rules_match_greens_theorem_moments() {
    for family in FAMILIES {
        let mesh = generate(family, 2).unwrap();
        for c in 0..mesh.n_cells() {
            let vs: Vec<[f64; 2]> = mesh.cells[c].vertices.iter().map(|&v| mesh.vertex_point(v)).collect();
            for order in [1usize, 4, 9, 14] {
                let rule = polygon_rule(&mesh, c, order).unwrap();
                for a in 0..=order as u32 {
                    for b in 0..=(order as u32 - a) {
                        let q = rule.integrate(|p| p[0].powi(a as i32) * p[1].powi(b as i32));
                        let exact = common::polygon_moment(&vs, a, b);
                        let scale = mesh.cells[c].area.abs();
                        assert!(
                            (q - exact).abs() <= 1e-13 * scale,
                            "{family:?} cell {c} order {order} x^{a}y^{b}: {q} vs {exact}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn weak_gradients_match_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for family in FAMILIES {
        let mesh = generate(family, 3).unwrap();
        for k in 1..=3 {
            let v = random_field(&mesh, k, &mut rng);
            let lib = to_library(&mesh, k, &v);
            for bc in MODES {
                for _ in 0..12 {
                    let cell = rng.gen_range(0..mesh.n_cells());
                    let j = weak_gradient_degree(k, &mesh.cells[cell], None);
                    let op = build_weak_grad(&mesh, cell, k, j, bc).unwrap();
                    let w = op.apply(&lib);
                    let pts = interior_points(&mesh, cell);
                    let expected = common::weak_gradient_at(&mesh, &v, cell, j, bc, &pts);
                    let scale = expected.iter().map(|g| g[0].hypot(g[1])).fold(0.0, f64::max).max(1.0);
                    for (p, e) in pts.iter().zip(&expected) {
                        let got = op.basis.evaluate(w.as_slice(), *p);
                        let err = (got[0] - e[0]).hypot(got[1] - e[1]);
                        assert!(err <= 1e-10 * scale, "{family:?} k={k} {bc} cell {cell}: {err:e}");
                    }
                }
            }
        }
    }
}

#[test]
fn weak_gradient_with_raised_degree_matches_oracle() {
    let mesh = generate(MeshFamily::ForwardSlashTriangles, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let v = random_field(&mesh, 2, &mut rng);
    let lib = to_library(&mesh, 2, &v);
    for j in [1, 3, 5] {
        for cell in 0..mesh.n_cells() {
            let op = build_weak_grad(&mesh, cell, 2, j, BcMode::Weak).unwrap();
            let w = op.apply(&lib);
            let pts = interior_points(&mesh, cell);
            let expected = common::weak_gradient_at(&mesh, &v, cell, j, BcMode::Weak, &pts);
            for (p, e) in pts.iter().zip(&expected) {
                let got = op.basis.evaluate(w.as_slice(), *p);
                assert!((got[0] - e[0]).hypot(got[1] - e[1]) <= 1e-10 * e[0].hypot(e[1]).max(1.0));
            }
        }
    }
}

#[test]
fn energy_norm_matches_oracle_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for family in FAMILIES {
        let mesh = generate(family, 2).unwrap();
        for k in 1..=3 {
            let v = random_field(&mesh, k, &mut rng);
            let lib = to_library(&mesh, k, &v);
            for bc in MODES {
                let ops = build_all(&mesh, k, None, bc).unwrap();
                let mut expected = 0.0;
                for (cell, op) in ops.iter().enumerate() {
                    let (contributors, q, g) = common::weak_gradient(&mesh, cell, k, op.j, bc);
                    let x = DVector::from_iterator(
                        g.ncols(),
                        contributors.iter().flat_map(|&c| v.coeffs[c].iter().copied()),
                    );
                    let w = g * x;
                    let nq = q.len();
                    for (p, wt) in common::cell_points(&mesh, cell, common::ORACLE_POINTS) {
                        let qv = q.value(p);
                        let gx: f64 = (0..nq).map(|a| w[a] * qv[a]).sum();
                        let gy: f64 = (0..nq).map(|a| w[nq + a] * qv[a]).sum();
                        expected += wt * (gx * gx + gy * gy);
                    }
                }
                let got = energy_norm(&ops, &lib).powi(2);
                assert!((got - expected).abs() <= 1e-10 * expected, "{family:?} k={k} {bc}: {got} vs {expected}");
            }
        }
    }
}

#[test]
fn discrete_h1_norm_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for family in FAMILIES {
        let mesh = generate(family, 2).unwrap();
        for k in 1..=3 {
            let v = random_field(&mesh, k, &mut rng);
            let lib = to_library(&mesh, k, &v);
            let got = h1h_norm(&mesh, &lib).unwrap().total().powi(2);
            let expected = common::h1h_squared(&mesh, &v);
            assert!((got - expected).abs() <= 1e-11 * expected, "{family:?} k={k}: {got} vs {expected}");
        }
    }
}

/// Solves the problem densely in the oracle basis and compares the discrete
/// solutions pointwise.
fn compare_with_dense_solve(family: MeshFamily, level: u32, k: usize, bc: BcMode) {
    let mesh = generate(family, level).unwrap();
    let f = |p: [f64; 2]| {
        let pi = std::f64::consts::PI;
        2.0 * pi * pi * (pi * p[0]).sin() * (pi * p[1]).sin()
    };
    let j_of = |c: usize| weak_gradient_degree(k, &mesh.cells[c], None);
    assert!((0..mesh.n_cells()).all(|c| j_of(c) == j_of(0)));
    let (oracle, oracle_dim) = common::dense_solve(&mesh, k, j_of(0), bc, f);

    let disc = Discretization::new(&mesh, k, bc, None).unwrap();
    assert_eq!(disc.n_dofs(), oracle_dim);
    let system = assemble_with(&mesh, &disc, &f).unwrap();
    let sol = solve(&system, 1e-12, None).unwrap();
    assert!(sol.residual <= 1e-12);
    let u_h = disc.to_broken(&sol.coeffs);

    let mut max_u: f64 = 0.0;
    let mut max_diff: f64 = 0.0;
    for c in 0..mesh.n_cells() {
        for p in interior_points(&mesh, c) {
            let e = oracle.eval(c, p);
            max_u = max_u.max(e.abs());
            max_diff = max_diff.max((u_h.eval(&mesh, c, p) - e).abs());
        }
    }
    assert!(max_diff <= 1e-9 * max_u, "{family:?} level {level} k={k} {bc}: {max_diff:e}");
}

#[test]
fn triangular_solutions_match_dense_factorization() {
    for bc in MODES {
        compare_with_dense_solve(MeshFamily::ForwardSlashTriangles, 4, 1, bc);
        compare_with_dense_solve(MeshFamily::ForwardSlashTriangles, 3, 2, bc);
        compare_with_dense_solve(MeshFamily::ForwardSlashTriangles, 3, 3, bc);
    }
}

#[test]
fn polygonal_solutions_match_dense_factorization() {
    // every level-2 cell is a polygon, so j = k + 2 throughout
    let mesh = generate(MeshFamily::CutCornerPolygons, 2).unwrap();
    assert!(mesh.cells.iter().all(|c| !c.is_triangle()));
    for bc in MODES {
        compare_with_dense_solve(MeshFamily::CutCornerPolygons, 2, 1, bc);
        compare_with_dense_solve(MeshFamily::CutCornerPolygons, 2, 2, bc);
    }
}
