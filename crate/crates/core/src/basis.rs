//! Scaled monomial bases, Gram matrices and element-wise L² projections.
//!
//! On a cell with centroid `x_T` and diameter `h_T` the scalar basis of
//! `P_m` is `((x - x_T)/h_T)^a ((y - y_T)/h_T)^b` for `a + b <= m`, in
//! graded-lex order (`1, ξ, η, ξ², ξη, η², ...`). The vector basis of
//! `[P_m]²` stacks the x-component block before the y-component block.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::quadrature::{polygon_rule, QuadratureRule};

/// Dimension of `P_m` in two variables.
pub const fn poly_dim(m: usize) -> usize {
    (m + 1) * (m + 2) / 2
}

/// Extra quadrature order used when integrating non-polynomial data.
pub const SMOOTH_MARGIN: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct MonomialBasis {
    pub degree: usize,
    pub center: [f64; 2],
    pub scale: f64,
    exponents: Vec<(usize, usize)>,
}

impl MonomialBasis {
    pub fn new(degree: usize, center: [f64; 2], scale: f64) -> Self {
        let mut exponents = Vec::with_capacity(poly_dim(degree));
        for d in 0..=degree {
            for b in 0..=d {
                exponents.push((d - b, b));
            }
        }
        MonomialBasis {
            degree,
            center,
            scale,
            exponents,
        }
    }

    pub fn for_cell(mesh: &Mesh, cell: usize, degree: usize) -> Self {
        let c = &mesh.cells[cell];
        Self::new(degree, c.centroid, c.diameter)
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn exponents(&self) -> &[(usize, usize)] {
        &self.exponents
    }

    fn powers(&self, p: [f64; 2]) -> ([f64; 16], [f64; 16]) {
        debug_assert!(self.degree < 16);
        let xi = (p[0] - self.center[0]) / self.scale;
        let eta = (p[1] - self.center[1]) / self.scale;
        let mut px = [1.0; 16];
        let mut py = [1.0; 16];
        for i in 1..=self.degree {
            px[i] = px[i - 1] * xi;
            py[i] = py[i - 1] * eta;
        }
        (px, py)
    }

    pub fn eval_into(&self, p: [f64; 2], out: &mut [f64]) {
        let (px, py) = self.powers(p);
        for (o, &(a, b)) in out.iter_mut().zip(&self.exponents) {
            *o = px[a] * py[b];
        }
    }

    pub fn eval(&self, p: [f64; 2]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(p, &mut out);
        out
    }

    /// Partial derivatives of every basis member at `p`.
    pub fn grad_into(&self, p: [f64; 2], dx: &mut [f64], dy: &mut [f64]) {
        let (px, py) = self.powers(p);
        let inv = 1.0 / self.scale;
        for (k, &(a, b)) in self.exponents.iter().enumerate() {
            dx[k] = if a > 0 { a as f64 * inv * px[a - 1] * py[b] } else { 0.0 };
            dy[k] = if b > 0 { b as f64 * inv * px[a] * py[b - 1] } else { 0.0 };
        }
    }

    /// Value at `p` of the polynomial with the given coefficients.
    pub fn evaluate(&self, coeffs: &[f64], p: [f64; 2]) -> f64 {
        let (px, py) = self.powers(p);
        coeffs
            .iter()
            .zip(&self.exponents)
            .map(|(c, &(a, b))| c * px[a] * py[b])
            .sum()
    }

    /// Gradient at `p` of the polynomial with the given coefficients.
    pub fn evaluate_grad(&self, coeffs: &[f64], p: [f64; 2]) -> [f64; 2] {
        let n = self.dim();
        let mut dx = vec![0.0; n];
        let mut dy = vec![0.0; n];
        self.grad_into(p, &mut dx, &mut dy);
        let gx = coeffs.iter().zip(&dx).map(|(c, d)| c * d).sum();
        let gy = coeffs.iter().zip(&dy).map(|(c, d)| c * d).sum();
        [gx, gy]
    }

    /// Gram matrix `(φ_a, φ_b)_T` under `rule`, which must integrate
    /// products of two members exactly.
    pub fn mass_matrix(&self, rule: &QuadratureRule) -> Result<DMatrix<f64>> {
        if rule.degree < 2 * self.degree {
            return Err(Error::QuadratureOrder {
                have: rule.degree,
                need: 2 * self.degree,
            });
        }
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        let mut vals = vec![0.0; n];
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            self.eval_into(*p, &mut vals);
            for a in 0..n {
                let wa = w * vals[a];
                for b in a..n {
                    m[(a, b)] += wa * vals[b];
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                m[(a, b)] = m[(b, a)];
            }
        }
        Ok(m)
    }
}

/// `[P_m]²` as two stacked copies of a scalar basis.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorBasis {
    pub scalar: MonomialBasis,
}

impl VectorBasis {
    pub fn new(scalar: MonomialBasis) -> Self {
        VectorBasis { scalar }
    }

    pub fn for_cell(mesh: &Mesh, cell: usize, degree: usize) -> Self {
        Self::new(MonomialBasis::for_cell(mesh, cell, degree))
    }

    pub fn degree(&self) -> usize {
        self.scalar.degree
    }

    pub fn dim(&self) -> usize {
        2 * self.scalar.dim()
    }

    /// Block-diagonal Gram matrix.
    pub fn mass_matrix(&self, rule: &QuadratureRule) -> Result<DMatrix<f64>> {
        let s = self.scalar.mass_matrix(rule)?;
        let n = s.nrows();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&s);
        m.view_mut((n, n), (n, n)).copy_from(&s);
        Ok(m)
    }

    /// Divergence of every member at `p`: x-block then y-block.
    pub fn divergence_into(&self, p: [f64; 2], out: &mut [f64]) {
        let n = self.scalar.dim();
        let (dx, dy) = out.split_at_mut(n);
        let mut scratch = vec![0.0; n];
        self.scalar.grad_into(p, dx, &mut scratch);
        self.scalar.grad_into(p, &mut scratch, dy);
    }

    /// `q · n` of every member at `p`.
    pub fn normal_trace_into(&self, p: [f64; 2], normal: [f64; 2], out: &mut [f64]) {
        let n = self.scalar.dim();
        let (ox, oy) = out.split_at_mut(n);
        self.scalar.eval_into(p, ox);
        for k in 0..n {
            oy[k] = ox[k] * normal[1];
            ox[k] *= normal[0];
        }
    }

    pub fn evaluate(&self, coeffs: &[f64], p: [f64; 2]) -> [f64; 2] {
        let n = self.scalar.dim();
        [
            self.scalar.evaluate(&coeffs[..n], p),
            self.scalar.evaluate(&coeffs[n..], p),
        ]
    }
}

/// Quadrature order for integrating non-polynomial data against `P_k`.
pub fn smooth_order(k: usize) -> usize {
    2 * k + SMOOTH_MARGIN
}

fn cholesky_solve(m: DMatrix<f64>, rhs: DVector<f64>, context: &str) -> Result<DVector<f64>> {
    let chol = m.cholesky().ok_or_else(|| Error::SingularMatrix {
        context: context.to_string(),
    })?;
    Ok(chol.solve(&rhs))
}

/// Coefficients of the L² projection of `f` onto `P_k(T)` for a given
/// basis and rule.
pub fn project_scalar_with(
    f: impl Fn([f64; 2]) -> f64,
    basis: &MonomialBasis,
    rule: &QuadratureRule,
) -> Result<DVector<f64>> {
    let m = basis.mass_matrix(rule)?;
    let n = basis.dim();
    let mut rhs = DVector::zeros(n);
    let mut vals = vec![0.0; n];
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        basis.eval_into(*p, &mut vals);
        let fw = w * f(*p);
        for a in 0..n {
            rhs[a] += fw * vals[a];
        }
    }
    cholesky_solve(m, rhs, "scalar projection")
}

/// Coefficients (x-block then y-block) of the L² projection of `g` onto
/// `[P_j(T)]²`.
pub fn project_vector_with(
    g: impl Fn([f64; 2]) -> [f64; 2],
    basis: &VectorBasis,
    rule: &QuadratureRule,
) -> Result<DVector<f64>> {
    let s = &basis.scalar;
    let m = s.mass_matrix(rule)?;
    let chol = m.cholesky().ok_or_else(|| Error::SingularMatrix {
        context: "vector projection".into(),
    })?;
    let n = s.dim();
    let mut rx = DVector::zeros(n);
    let mut ry = DVector::zeros(n);
    let mut vals = vec![0.0; n];
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        s.eval_into(*p, &mut vals);
        let gv = g(*p);
        for a in 0..n {
            rx[a] += w * gv[0] * vals[a];
            ry[a] += w * gv[1] * vals[a];
        }
    }
    let cx = chol.solve(&rx);
    let cy = chol.solve(&ry);
    let mut out = DVector::zeros(2 * n);
    out.rows_mut(0, n).copy_from(&cx);
    out.rows_mut(n, n).copy_from(&cy);
    Ok(out)
}

/// `Q_0 f` on cell `cell`: L² projection onto `P_k` using a rule of order
/// `2k + 6`.
pub fn project_scalar(
    f: impl Fn([f64; 2]) -> f64,
    mesh: &Mesh,
    cell: usize,
    k: usize,
) -> Result<DVector<f64>> {
    let basis = MonomialBasis::for_cell(mesh, cell, k);
    let rule = polygon_rule(mesh, cell, smooth_order(k))?;
    project_scalar_with(f, &basis, &rule)
}

/// `ℚ_h g` on cell `cell`: L² projection onto `[P_j]²` using a rule of
/// order `2j + 6`.
pub fn project_vector(
    g: impl Fn([f64; 2]) -> [f64; 2],
    mesh: &Mesh,
    cell: usize,
    j: usize,
) -> Result<DVector<f64>> {
    let basis = VectorBasis::for_cell(mesh, cell, j);
    let rule = polygon_rule(mesh, cell, smooth_order(j))?;
    project_vector_with(g, &basis, &rule)
}
