//! Reference computations shared by the integration tests.
//!
//! Nothing here calls the library's quadrature, basis or weak-gradient
//! code: Gauss–Legendre nodes come from the Golub–Welsch eigenproblem, cell
//! integrals from a centroid fan of collapsed tensor rules, and the weak
//! gradient from a dense solve in an independently built monomial basis.
//! Only mesh connectivity and geometry are shared.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use polycdg::{BcMode, Mesh};

/// Gauss–Legendre nodes and weights on `[-1, 1]` from the eigen-decomposition
/// of the symmetric Jacobi matrix of the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jac = DMatrix::zeros(n, n);
    for i in 1..n {
        let b = i as f64 / ((4 * i * i - 1) as f64).sqrt();
        jac[(i, i - 1)] = b;
        jac[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// `∫ x^a y^b` over the reference triangle `{(0,0), (1,0), (0,1)}`.
pub fn reference_triangle_moment(a: u32, b: u32) -> f64 {
    let f = |n: u32| (1..=n).map(f64::from).product::<f64>();
    f(a) * f(b) / f(a + b + 2)
}

/// Points and weights integrating exactly up to degree `2n - 2` over the
/// triangle `abc`, from an `n × n` collapsed Gauss–Legendre product.
pub fn triangle_points(n: usize, a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Vec<([f64; 2], f64)> {
    let (x, w) = gauss_legendre(n);
    let jac = ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs();
    let mut out = Vec::with_capacity(n * n);
    for (xi, wi) in x.iter().zip(&w) {
        let s = 0.5 * (xi + 1.0);
        for (xj, wj) in x.iter().zip(&w) {
            let t = 0.5 * (xj + 1.0) * (1.0 - s);
            let p = [
                a[0] + s * (b[0] - a[0]) + t * (c[0] - a[0]),
                a[1] + s * (b[1] - a[1]) + t * (c[1] - a[1]),
            ];
            out.push((p, 0.25 * wi * wj * (1.0 - s) * jac));
        }
    }
    out
}

/// Quadrature over a convex cell by fanning from its vertex average.
pub fn cell_points(mesh: &Mesh, cell: usize, n: usize) -> Vec<([f64; 2], f64)> {
    let vs: Vec<[f64; 2]> = mesh.cells[cell].vertices.iter().map(|&v| mesh.vertex_point(v)).collect();
    let m = vs.len() as f64;
    let o = [
        vs.iter().map(|p| p[0]).sum::<f64>() / m,
        vs.iter().map(|p| p[1]).sum::<f64>() / m,
    ];
    (0..vs.len())
        .flat_map(|i| triangle_points(n, o, vs[i], vs[(i + 1) % vs.len()]))
        .collect()
}

/// Gauss–Legendre points and weights on the segment `pq`.
pub fn segment_points(n: usize, p: [f64; 2], q: [f64; 2]) -> Vec<([f64; 2], f64)> {
    let (x, w) = gauss_legendre(n);
    let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
    x.iter()
        .zip(&w)
        .map(|(t, wt)| {
            let s = 0.5 * (t + 1.0);
            ([p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])], 0.5 * wt * len)
        })
        .collect()
}

/// `∫_P x^a y^b` over a counterclockwise polygon by Green's theorem,
/// `∮ x^{a+1} y^b / (a+1) dy`, with an edge rule exact for the integrand.
pub fn polygon_moment(vertices: &[[f64; 2]], a: u32, b: u32) -> f64 {
    let n = (a + b + 2) as usize / 2 + 1;
    let (x, w) = gauss_legendre(n);
    let mut total = 0.0;
    for i in 0..vertices.len() {
        let p = vertices[i];
        let q = vertices[(i + 1) % vertices.len()];
        for (t, wt) in x.iter().zip(&w) {
            let s = 0.5 * (t + 1.0);
            let px = p[0] + s * (q[0] - p[0]);
            let py = p[1] + s * (q[1] - p[1]);
            total += 0.5 * wt * px.powi(a as i32 + 1) * py.powi(b as i32) / f64::from(a + 1) * (q[1] - p[1]);
        }
    }
    total
}

/// Monomials `((x − x_c)/h)^a ((y − y_c)/h)^b`, `a + b ≤ degree`, about the
/// cell's vertex average with `h` its longest vertex-to-vertex distance.
#[derive(Clone, Debug)]
pub struct Monomials {
    pub center: [f64; 2],
    pub h: f64,
    pub exps: Vec<(i32, i32)>,
}

impl Monomials {
    pub fn for_cell(mesh: &Mesh, cell: usize, degree: usize) -> Self {
        let vs: Vec<[f64; 2]> = mesh.cells[cell].vertices.iter().map(|&v| mesh.vertex_point(v)).collect();
        let m = vs.len() as f64;
        let center = [
            vs.iter().map(|p| p[0]).sum::<f64>() / m,
            vs.iter().map(|p| p[1]).sum::<f64>() / m,
        ];
        let mut h: f64 = 0.0;
        for p in &vs {
            for q in &vs {
                h = h.max(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt());
            }
        }
        let mut exps = Vec::new();
        for d in 0..=degree as i32 {
            for b in 0..=d {
                exps.push((d - b, b));
            }
        }
        Monomials { center, h, exps }
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn value(&self, p: [f64; 2]) -> Vec<f64> {
        let x = (p[0] - self.center[0]) / self.h;
        let y = (p[1] - self.center[1]) / self.h;
        self.exps.iter().map(|&(a, b)| x.powi(a) * y.powi(b)).collect()
    }

    pub fn gradient(&self, p: [f64; 2]) -> Vec<[f64; 2]> {
        let x = (p[0] - self.center[0]) / self.h;
        let y = (p[1] - self.center[1]) / self.h;
        self.exps
            .iter()
            .map(|&(a, b)| {
                let dx = if a > 0 { f64::from(a) * x.powi(a - 1) * y.powi(b) } else { 0.0 };
                let dy = if b > 0 { f64::from(b) * x.powi(a) * y.powi(b - 1) } else { 0.0 };
                [dx / self.h, dy / self.h]
            })
            .collect()
    }

    pub fn eval(&self, coeffs: &[f64], p: [f64; 2]) -> f64 {
        self.value(p).iter().zip(coeffs).map(|(m, c)| m * c).sum()
    }
}

/// Element-wise polynomial in the oracle's own basis.
#[derive(Clone, Debug)]
pub struct Field {
    pub bases: Vec<Monomials>,
    pub coeffs: Vec<Vec<f64>>,
}

impl Field {
    pub fn eval(&self, cell: usize, p: [f64; 2]) -> f64 {
        self.bases[cell].eval(&self.coeffs[cell], p)
    }
}

/// Points per direction for cell and edge rules: exact well beyond the
/// degrees used in the tests.
pub const ORACLE_POINTS: usize = 12;

/// Dense weak gradient on one cell.
///
/// Returns the contributing cells (the cell first), the vector basis on the
/// cell, and the matrix mapping stacked contributor coefficients to the
/// coefficients `[w_x; w_y]` of `∇_w v`, obtained by solving
/// `M w = −(v, ∇·q)_T + ⟨{v}, q·n⟩_∂T` for every monomial `q`.
pub fn weak_gradient(mesh: &Mesh, cell: usize, k: usize, j: usize, bc: BcMode) -> (Vec<usize>, Monomials, DMatrix<f64>) {
    let mut contributors = vec![cell];
    for &e in &mesh.cells[cell].edges {
        if let Some(nb) = mesh.edges[e].neighbor_of(cell) {
            if !contributors.contains(&nb) {
                contributors.push(nb);
            }
        }
    }
    let q = Monomials::for_cell(mesh, cell, j);
    let nq = q.len();
    let scalar: Vec<Monomials> = contributors.iter().map(|&c| Monomials::for_cell(mesh, c, k)).collect();
    let dk = scalar[0].len();
    let slot = |c: usize| contributors.iter().position(|&x| x == c).unwrap();

    let mut mass = DMatrix::zeros(2 * nq, 2 * nq);
    let mut rhs = DMatrix::zeros(2 * nq, dk * contributors.len());
    for (p, w) in cell_points(mesh, cell, ORACLE_POINTS) {
        let qv = q.value(p);
        let qg = q.gradient(p);
        let vv = scalar[0].value(p);
        for a in 0..nq {
            for b in 0..nq {
                mass[(a, b)] += w * qv[a] * qv[b];
            }
            for (i, v) in vv.iter().enumerate() {
                // div of (q_a, 0) is ∂x q_a and of (0, q_a) is ∂y q_a
                rhs[(a, i)] -= w * v * qg[a][0];
                rhs[(nq + a, i)] -= w * v * qg[a][1];
            }
        }
    }
    for b in 0..nq {
        for a in 0..nq {
            mass[(nq + a, nq + b)] = mass[(a, b)];
        }
    }
    for &e in &mesh.cells[cell].edges {
        let edge = &mesh.edges[e];
        let n = edge.normal_from(cell);
        let nb = edge.neighbor_of(cell);
        let share = match (nb, bc) {
            (Some(_), _) => 0.5,
            (None, BcMode::Strong) => 1.0,
            (None, BcMode::Weak) => 0.0,
        };
        for (p, w) in segment_points(ORACLE_POINTS, mesh.vertex_point(edge.v0), mesh.vertex_point(edge.v1)) {
            let qv = q.value(p);
            let mut add = |c: usize, s: f64| {
                let off = slot(c) * dk;
                let vv = scalar[slot(c)].value(p);
                for a in 0..nq {
                    for (i, v) in vv.iter().enumerate() {
                        rhs[(a, off + i)] += s * w * v * qv[a] * n[0];
                        rhs[(nq + a, off + i)] += s * w * v * qv[a] * n[1];
                    }
                }
            };
            add(cell, share);
            if let Some(nb) = nb {
                add(nb, share);
            }
        }
    }
    let g = mass.clone().lu().solve(&rhs).expect("oracle mass matrix is nonsingular");
    (contributors, q, g)
}

/// Weak gradient of `v` on `cell` evaluated at `p`.
pub fn weak_gradient_at(
    mesh: &Mesh,
    v: &Field,
    cell: usize,
    j: usize,
    bc: BcMode,
    points: &[[f64; 2]],
) -> Vec<[f64; 2]> {
    let k = v.bases[cell].exps.iter().map(|&(a, b)| (a + b) as usize).max().unwrap_or(0);
    let (contributors, q, g) = weak_gradient(mesh, cell, k, j, bc);
    let x = DVector::from_iterator(
        g.ncols(),
        contributors.iter().flat_map(|&c| v.coeffs[c].iter().copied()),
    );
    let w = g * x;
    let nq = q.len();
    points
        .iter()
        .map(|&p| {
            let qv = q.value(p);
            [
                (0..nq).map(|a| w[a] * qv[a]).sum(),
                (0..nq).map(|a| w[nq + a] * qv[a]).sum(),
            ]
        })
        .collect()
}

/// Stiffness and load over the full broken space, assembled densely in the
/// oracle basis (`D(k)` unknowns per cell, cell-major) with the boundary
/// average of `bc` inside the weak gradient.
pub fn dense_system(
    mesh: &Mesh,
    k: usize,
    j: usize,
    bc: BcMode,
    f: impl Fn([f64; 2]) -> f64,
) -> (DMatrix<f64>, DVector<f64>, Vec<Monomials>) {
    let bases: Vec<Monomials> = (0..mesh.n_cells()).map(|c| Monomials::for_cell(mesh, c, k)).collect();
    let dk = bases[0].len();
    let n = dk * mesh.n_cells();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for cell in 0..mesh.n_cells() {
        let (contributors, q, g) = weak_gradient(mesh, cell, k, j, bc);
        let nq = q.len();
        let mut mass = DMatrix::zeros(2 * nq, 2 * nq);
        for (p, w) in cell_points(mesh, cell, ORACLE_POINTS) {
            let qv = q.value(p);
            for r in 0..nq {
                for s in 0..nq {
                    mass[(r, s)] += w * qv[r] * qv[s];
                    mass[(nq + r, nq + s)] += w * qv[r] * qv[s];
                }
            }
            let bv = bases[cell].value(p);
            for (i, v) in bv.iter().enumerate() {
                b[cell * dk + i] += w * f(p) * v;
            }
        }
        let local = g.transpose() * mass * &g;
        for (ci, &c) in contributors.iter().enumerate() {
            for (di, &d) in contributors.iter().enumerate() {
                for r in 0..dk {
                    for s in 0..dk {
                        a[(c * dk + r, d * dk + s)] += local[(ci * dk + r, di * dk + s)];
                    }
                }
            }
        }
    }
    (a, b, bases)
}

/// Columns spanning the broken polynomials whose traces vanish on every
/// boundary edge: per boundary cell, the null space of point evaluations at
/// `k + 1` Gauss points of each boundary edge (a degree-`k` trace vanishing
/// there vanishes identically); identity blocks elsewhere.
pub fn boundary_free_columns(mesh: &Mesh, k: usize, bases: &[Monomials]) -> DMatrix<f64> {
    let dk = bases[0].len();
    let mut blocks = Vec::new();
    for (c, basis) in bases.iter().enumerate() {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for &e in &mesh.cells[c].edges {
            let edge = &mesh.edges[e];
            if edge.is_boundary() {
                for (p, _) in segment_points(k + 1, mesh.vertex_point(edge.v0), mesh.vertex_point(edge.v1)) {
                    rows.push(basis.value(p));
                }
            }
        }
        if rows.is_empty() {
            blocks.push(DMatrix::identity(dk, dk));
            continue;
        }
        // pad to a square matrix so the thin SVD exposes the full right basis
        let m = rows.len().max(dk);
        let mut cmat = DMatrix::zeros(m, dk);
        for (i, r) in rows.iter().enumerate() {
            for (jj, v) in r.iter().enumerate() {
                cmat[(i, jj)] = *v;
            }
        }
        let svd = cmat.svd(false, true);
        let vt = svd.v_t.expect("right singular vectors requested");
        let top = svd.singular_values.max();
        let null: Vec<usize> = (0..dk).filter(|&i| svd.singular_values[i] <= 1e-10 * top).collect();
        let mut block = DMatrix::zeros(dk, null.len());
        for (col, &i) in null.iter().enumerate() {
            block.set_column(col, &vt.row(i).transpose());
        }
        blocks.push(block);
    }
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut n = DMatrix::zeros(dk * bases.len(), cols);
    let mut col = 0;
    for (c, block) in blocks.iter().enumerate() {
        n.view_mut((c * dk, col), (dk, block.ncols())).copy_from(block);
        col += block.ncols();
    }
    n
}

/// Dense Galerkin solution in the oracle basis: the full broken space for
/// weak boundary conditions, the trace-free subspace for strong ones.
pub fn dense_solve(mesh: &Mesh, k: usize, j: usize, bc: BcMode, f: impl Fn([f64; 2]) -> f64) -> (Field, usize) {
    let (a, b, bases) = dense_system(mesh, k, j, bc, f);
    let dk = bases[0].len();
    let (x, dim) = match bc {
        BcMode::Weak => (a.lu().solve(&b).expect("dense stiffness is nonsingular"), b.len()),
        BcMode::Strong => {
            let n = boundary_free_columns(mesh, k, &bases);
            let reduced = n.transpose() * &a * &n;
            let y = reduced.lu().solve(&(n.transpose() * &b)).expect("reduced stiffness is nonsingular");
            (&n * y, n.ncols())
        }
    };
    let coeffs = (0..mesh.n_cells()).map(|c| x.rows(c * dk, dk).iter().copied().collect()).collect();
    (Field { bases, coeffs }, dim)
}

/// `‖∇_h v‖² + Σ_e h_e⁻¹ ‖[v]‖²_e`, with the outer trace as the jump on
/// boundary edges.
pub fn h1h_squared(mesh: &Mesh, v: &Field) -> f64 {
    let mut total = 0.0;
    for c in 0..mesh.n_cells() {
        for (p, w) in cell_points(mesh, c, ORACLE_POINTS) {
            let g = v.bases[c].gradient(p);
            let gx: f64 = g.iter().zip(&v.coeffs[c]).map(|(g, x)| g[0] * x).sum();
            let gy: f64 = g.iter().zip(&v.coeffs[c]).map(|(g, x)| g[1] * x).sum();
            total += w * (gx * gx + gy * gy);
        }
    }
    for e in &mesh.edges {
        let (p, q) = (mesh.vertex_point(e.v0), mesh.vertex_point(e.v1));
        let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
        for (x, w) in segment_points(ORACLE_POINTS, p, q) {
            let jump = v.eval(e.cell_left, x) - e.cell_right.map_or(0.0, |r| v.eval(r, x));
            total += w * jump * jump / len;
        }
    }
    total
}
