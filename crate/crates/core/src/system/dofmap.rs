use nalgebra::DMatrix;

use crate::basis::{poly_dim, MonomialBasis};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::quadrature::edge_rule;
use crate::weakgrad::BcMode;

/// Relative rank tolerance for the boundary trace-sampling matrix.
const RANK_TOL: f64 = 1e-10;

/// Degrees of freedom owned by one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellDofs {
    pub offset: usize,
    pub dim: usize,
    /// `D(k) × dim`: local basis in monomial coordinates.
    pub basis: DMatrix<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    pub k: usize,
    pub bc: BcMode,
    pub cells: Vec<CellDofs>,
    pub n_dofs: usize,
}

/// Local dimension of `{p ∈ P_k : p = 0 on b boundary edges}` for
/// non-parallel edges.
pub fn constrained_dim(k: usize, boundary_edges: usize) -> usize {
    match boundary_edges {
        0 => poly_dim(k),
        1 => k * (k + 1) / 2,
        _ => k.saturating_sub(1) * k / 2,
    }
}

/// Orthonormal basis (columns) of the polynomials in `P_k(T)` whose trace
/// vanishes on every boundary edge of `cell`.
///
/// The trace on an edge is a univariate polynomial of degree `k`, so it is
/// zero iff it vanishes at `k + 1` distinct points; the constraint matrix
/// samples the monomials at `k + 1` Gauss points per boundary edge and its
/// null space is read off a full SVD.
pub fn constrained_boundary_basis(mesh: &Mesh, cell: usize, k: usize) -> Result<DMatrix<f64>> {
    let c = &mesh.cells[cell];
    let b = c.n_boundary_edges;
    if b == 0 {
        return Err(Error::InvalidArgument(format!(
            "cell {cell} has no boundary edge; constrained basis requested"
        )));
    }
    let basis = MonomialBasis::for_cell(mesh, cell, k);
    let d = basis.dim();
    let rule = edge_rule(k + 1)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for &e in &c.edges {
        let edge = &mesh.edges[e];
        if !edge.is_boundary() {
            continue;
        }
        let (pts, _) = rule.on_segment(mesh.vertex_point(edge.v0), mesh.vertex_point(edge.v1));
        for p in pts {
            rows.push(basis.eval(p));
        }
    }
    // Pad to at least square so the SVD returns a complete right basis.
    let m = rows.len().max(d);
    let mut s = DMatrix::zeros(m, d);
    for (i, r) in rows.iter().enumerate() {
        for (jj, v) in r.iter().enumerate() {
            s[(i, jj)] = *v;
        }
    }
    let svd = s.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max();
    let tol = RANK_TOL * smax;
    let null: Vec<usize> = (0..d).filter(|&i| svd.singular_values[i] <= tol).collect();
    let rank = d - null.len();
    let expected = d - constrained_dim(k, b);
    if rank != expected {
        return Err(Error::ConstraintRank {
            cell,
            boundary_edges: b,
            rank,
            expected,
        });
    }
    let mut out = DMatrix::zeros(d, null.len());
    for (col, &i) in null.iter().enumerate() {
        for r in 0..d {
            out[(r, col)] = vt[(i, r)];
        }
    }
    Ok(out)
}

impl DofMap {
    pub fn new(mesh: &Mesh, k: usize, bc: BcMode) -> Result<DofMap> {
        let d = poly_dim(k);
        let mut cells = Vec::with_capacity(mesh.n_cells());
        let mut offset = 0;
        for (ci, c) in mesh.cells.iter().enumerate() {
            let basis = match bc {
                BcMode::Strong if c.n_boundary_edges > 0 => constrained_boundary_basis(mesh, ci, k)?,
                _ => DMatrix::identity(d, d),
            };
            let dim = basis.ncols();
            cells.push(CellDofs { offset, dim, basis });
            offset += dim;
        }
        Ok(DofMap {
            k,
            bc,
            cells,
            n_dofs: offset,
        })
    }

    pub fn range(&self, cell: usize) -> std::ops::Range<usize> {
        let c = &self.cells[cell];
        c.offset..c.offset + c.dim
    }
}

/// DOF count predicted from boundary-edge counts alone.
pub fn expected_dofs(mesh: &Mesh, k: usize, bc: BcMode) -> usize {
    mesh.cells
        .iter()
        .map(|c| match bc {
            BcMode::Weak => poly_dim(k),
            BcMode::Strong => constrained_dim(k, c.n_boundary_edges),
        })
        .sum()
}
