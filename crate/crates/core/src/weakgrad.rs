//! Per-cell weak gradient.
//!
//! For a cell `T` and an element-wise polynomial `v`, the weak gradient
//! `∇_w v ∈ [P_j(T)]²` is the unique field with
//!
//! ```text
//! (∇_w v, q)_T = -(v, ∇·q)_T + <{v}, q·n>_∂T     for all q ∈ [P_j(T)]²
//! ```
//!
//! where `{v}` is the two-sided mean on interior edges and, on boundary
//! edges, the trace of `v` ([`BcMode::Strong`]) or zero ([`BcMode::Weak`]).
//! The map from the coefficients of `v` on `T` and its edge-neighbors to the
//! coefficients of `∇_w v` is materialized as a dense matrix.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::basis::{MonomialBasis, VectorBasis};
use crate::error::{Error, Result};
use crate::field::BrokenPolynomial;
use crate::mesh::{Cell, Mesh};
use crate::quadrature::{edge_rule, polygon_rule, EdgeRule, QuadratureRule};

/// How the homogeneous Dirichlet condition is imposed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BcMode {
    /// Trial space vanishes on the boundary; `{v} = v` on boundary edges.
    Strong,
    /// Full broken space; `{v} = 0` on boundary edges.
    Weak,
}

impl fmt::Display for BcMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            BcMode::Strong => "strong",
            BcMode::Weak => "weak",
        })
    }
}

impl FromStr for BcMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strong" => Ok(BcMode::Strong),
            "weak" => Ok(BcMode::Weak),
            other => Err(Error::InvalidArgument(format!(
                "unknown boundary mode '{other}' (expected strong or weak)"
            ))),
        }
    }
}

/// Weak-gradient degree: `k + 1` on triangles, `k + 2` on other polygons,
/// unless overridden.
pub fn weak_gradient_degree(k: usize, cell: &Cell, j_override: Option<usize>) -> usize {
    j_override.unwrap_or(if cell.is_triangle() { k + 1 } else { k + 2 })
}

/// Volume rule order for the bilinear terms on a cell.
pub fn volume_order(k: usize, j: usize) -> usize {
    2 * k.max(j) + 2
}

/// Number of Gauss points per edge.
pub fn edge_points(k: usize, j: usize) -> usize {
    k.max(j) + 2
}

#[derive(Clone, Debug)]
pub struct WeakGradOperator {
    pub cell: usize,
    pub k: usize,
    pub j: usize,
    /// The cell itself followed by its distinct edge-neighbors.
    pub contributors: Vec<usize>,
    /// `2·D(j) × (contributors · D(k))`, acting on stacked monomial
    /// coefficients of the contributors.
    pub matrix: DMatrix<f64>,
    /// Gram matrix of `[P_j(T)]²`.
    pub mass: DMatrix<f64>,
    /// Lower Cholesky factor `L` of the scalar Gram matrix of `P_j(T)`.
    pub mass_factor: DMatrix<f64>,
    /// `blockdiag(L, L)ᵀ · matrix`: the weak gradient in coordinates of the
    /// L²-orthonormal basis `φ L⁻ᵀ`, so `‖∇_w v‖²_T = ‖whitened · x‖²`.
    /// Computed as `L⁻¹ r` directly, which avoids the squared conditioning
    /// of forming `M⁻¹ r` and multiplying back by `M`.
    pub whitened: DMatrix<f64>,
    pub basis: VectorBasis,
}

impl WeakGradOperator {
    pub fn local_dim(&self) -> usize {
        crate::basis::poly_dim(self.k)
    }

    /// Stacks the contributor coefficients of `v`.
    pub fn gather(&self, v: &BrokenPolynomial) -> DVector<f64> {
        let d = self.local_dim();
        let mut x = DVector::zeros(d * self.contributors.len());
        for (i, &c) in self.contributors.iter().enumerate() {
            x.rows_mut(i * d, d).copy_from(&v.coeffs[c]);
        }
        x
    }

    /// Coefficients of `∇_w v` on this cell.
    pub fn apply(&self, v: &BrokenPolynomial) -> DVector<f64> {
        &self.matrix * self.gather(v)
    }

    /// `∇_w v` in the orthonormal coordinates of [`Self::whitened`].
    pub fn apply_whitened(&self, v: &BrokenPolynomial) -> DVector<f64> {
        &self.whitened * self.gather(v)
    }

    /// Maps vector-basis coefficients to orthonormal coordinates.
    pub fn whiten(&self, w: &DVector<f64>) -> DVector<f64> {
        let ns = self.mass_factor.nrows();
        let lt = self.mass_factor.transpose();
        let mut out = DVector::zeros(2 * ns);
        out.rows_mut(0, ns).copy_from(&(&lt * w.rows(0, ns)));
        out.rows_mut(ns, ns).copy_from(&(&lt * w.rows(ns, ns)));
        out
    }

    /// Orthonormal coordinates of `ℚ_h g` from the moments `(g, q)_T`.
    pub fn whitened_projection(&self, moments: &DVector<f64>) -> DVector<f64> {
        let ns = self.mass_factor.nrows();
        let mut out = moments.clone();
        for block in 0..2 {
            let mut part = out.rows_mut(block * ns, ns);
            self.mass_factor.solve_lower_triangular_mut(&mut part);
        }
        out
    }

    /// `‖w‖²_T` for coefficients `w` in the cell's vector basis.
    pub fn norm_sq(&self, w: &DVector<f64>) -> f64 {
        w.dot(&(&self.mass * w))
    }
}

/// Points, weights, outward normal and neighbor of one cell edge.
type EdgeQuadrature = (Vec<[f64; 2]>, Vec<f64>, [f64; 2], Option<usize>);

/// Per-cell quadrature shared by the operator build and identity checks.
struct CellQuadrature {
    volume: QuadratureRule,
    edges: Vec<EdgeQuadrature>,
}

impl CellQuadrature {
    fn new(mesh: &Mesh, cell: usize, k: usize, j: usize) -> Result<Self> {
        let volume = polygon_rule(mesh, cell, volume_order(k, j))?;
        let er: EdgeRule = edge_rule(edge_points(k, j))?;
        let edges = mesh.cells[cell]
            .edges
            .iter()
            .map(|&e| {
                let edge = &mesh.edges[e];
                let (pts, w) = er.on_segment(mesh.vertex_point(edge.v0), mesh.vertex_point(edge.v1));
                (pts, w, edge.normal_from(cell), edge.neighbor_of(cell))
            })
            .collect();
        Ok(CellQuadrature { volume, edges })
    }
}

fn contributors_of(mesh: &Mesh, cell: usize) -> Vec<usize> {
    let mut list = vec![cell];
    for n in mesh.neighbors(cell) {
        if !list.contains(&n) {
            list.push(n);
        }
    }
    list
}

/// Builds the weak-gradient operator of `cell` with polynomial degree `k`
/// and gradient degree `j`.
pub fn build_weak_grad(
    mesh: &Mesh,
    cell: usize,
    k: usize,
    j: usize,
    bc: BcMode,
) -> Result<WeakGradOperator> {
    let contributors = contributors_of(mesh, cell);
    let vb = VectorBasis::for_cell(mesh, cell, j);
    let bases: Vec<MonomialBasis> = contributors.iter().map(|&c| MonomialBasis::for_cell(mesh, c, k)).collect();
    let quad = CellQuadrature::new(mesh, cell, k, j)?;

    let nq = vb.dim();
    let dk = bases[0].dim();
    let mut rhs = DMatrix::zeros(nq, dk * contributors.len());
    let mut qv = vec![0.0; nq];
    let mut vv = vec![0.0; dk];

    // -(v, ∇·q)_T, own cell only.
    for (p, w) in quad.volume.points.iter().zip(&quad.volume.weights) {
        vb.divergence_into(*p, &mut qv);
        bases[0].eval_into(*p, &mut vv);
        for b in 0..dk {
            let wv = w * vv[b];
            for a in 0..nq {
                rhs[(a, b)] -= qv[a] * wv;
            }
        }
    }

    // <{v}, q·n>_∂T
    for (pts, wts, normal, nbr) in &quad.edges {
        let targets: Vec<(usize, f64)> = match nbr {
            Some(n) => {
                let slot = contributors.iter().position(|c| c == n).expect("neighbor listed");
                vec![(0, 0.5), (slot, 0.5)]
            }
            None => match bc {
                BcMode::Strong => vec![(0, 1.0)],
                BcMode::Weak => vec![],
            },
        };
        if targets.is_empty() {
            continue;
        }
        for (p, w) in pts.iter().zip(wts) {
            vb.normal_trace_into(*p, *normal, &mut qv);
            for &(slot, factor) in &targets {
                bases[slot].eval_into(*p, &mut vv);
                for (b, v) in vv.iter().enumerate() {
                    let wv = w * factor * v;
                    let col = slot * dk + b;
                    for a in 0..nq {
                        rhs[(a, col)] += qv[a] * wv;
                    }
                }
            }
        }
    }

    let scalar_mass = vb.scalar.mass_matrix(&quad.volume)?;
    let chol = scalar_mass.clone().cholesky().ok_or_else(|| Error::SingularMatrix {
        context: format!("weak-gradient mass matrix on cell {cell}"),
    })?;
    let ns = vb.scalar.dim();
    let mass_factor = chol.l();
    let mut whitened = rhs;
    for block in 0..2 {
        let mut part = whitened.rows_mut(block * ns, ns);
        mass_factor.solve_lower_triangular_mut(&mut part);
    }
    let mut matrix = whitened.clone();
    for block in 0..2 {
        let mut part = matrix.rows_mut(block * ns, ns);
        mass_factor.tr_solve_lower_triangular_mut(&mut part);
    }
    let mass = vb.mass_matrix(&quad.volume)?;

    Ok(WeakGradOperator {
        cell,
        k,
        j,
        contributors,
        matrix,
        mass,
        mass_factor,
        whitened,
        basis: vb,
    })
}

/// Weak-gradient operators for every cell, using the default degree rule
/// unless `j_override` is given.
pub fn build_all(
    mesh: &Mesh,
    k: usize,
    j_override: Option<usize>,
    bc: BcMode,
) -> Result<Vec<WeakGradOperator>> {
    use rayon::prelude::*;
    (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| build_weak_grad(mesh, c, k, weak_gradient_degree(k, &mesh.cells[c], j_override), bc))
        .collect()
}

/// Result of the integration-by-parts check on one cell.
#[derive(Clone, Copy, Debug)]
pub struct IbpResidual {
    /// `max_q |(∇_w v, q) - (∇v, q) + <v - {v}, q·n>|`.
    pub residual: f64,
    /// `max_q` of the summed magnitudes of the three terms.
    pub scale: f64,
}

/// Evaluates `(∇_w v, q)_T − (∇v, q)_T + ⟨v − {v}, q·n⟩_∂T` for every basis
/// member `q` and returns the largest magnitude. The volume term uses `∇v`
/// directly, so this is an independent check on the divergence form used by
/// [`build_weak_grad`].
pub fn check_ibp_identity(
    mesh: &Mesh,
    op: &WeakGradOperator,
    v: &BrokenPolynomial,
    bc: BcMode,
) -> Result<IbpResidual> {
    let cell = op.cell;
    let quad = CellQuadrature::new(mesh, cell, op.k, op.j)?;
    let vb = &op.basis;
    let own = MonomialBasis::for_cell(mesh, cell, v.degree);
    let nq = vb.dim();
    let ns = vb.scalar.dim();

    let wg = op.apply(v);
    let t_weak = &op.mass * &wg;

    let mut t_grad: DVector<f64> = DVector::zeros(nq);
    let mut sv = vec![0.0; ns];
    for (p, w) in quad.volume.points.iter().zip(&quad.volume.weights) {
        vb.scalar.eval_into(*p, &mut sv);
        let g = own.evaluate_grad(v.coeffs[cell].as_slice(), *p);
        for a in 0..ns {
            t_grad[a] += w * g[0] * sv[a];
            t_grad[ns + a] += w * g[1] * sv[a];
        }
    }

    let mut t_jump: DVector<f64> = DVector::zeros(nq);
    let mut qn = vec![0.0; nq];
    for (pts, wts, normal, nbr) in &quad.edges {
        for (p, w) in pts.iter().zip(wts) {
            let mine = v.eval(mesh, cell, *p);
            let avg = match nbr {
                Some(n) => 0.5 * (mine + v.eval(mesh, *n, *p)),
                None => match bc {
                    BcMode::Strong => mine,
                    BcMode::Weak => 0.0,
                },
            };
            vb.normal_trace_into(*p, *normal, &mut qn);
            for a in 0..nq {
                t_jump[a] += w * (mine - avg) * qn[a];
            }
        }
    }

    let mut residual: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for a in 0..nq {
        residual = residual.max((t_weak[a] - t_grad[a] + t_jump[a]).abs());
        scale = scale.max(t_weak[a].abs() + t_grad[a].abs() + t_jump[a].abs());
    }
    Ok(IbpResidual { residual, scale })
}
