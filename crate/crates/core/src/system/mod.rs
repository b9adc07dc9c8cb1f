//! Global DOF numbering, sparse assembly of `(∇_w u, ∇_w v) = (f, v)` and
//! the linear solve.

mod dofmap;
mod sparse;

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::basis::{smooth_order, MonomialBasis};
use crate::error::Result;
use crate::field::BrokenPolynomial;
use crate::mesh::Mesh;
use crate::quadrature::polygon_rule;
use crate::weakgrad::{build_all, BcMode, WeakGradOperator};

pub use dofmap::{constrained_boundary_basis, constrained_dim, expected_dofs, CellDofs, DofMap};
pub use sparse::{default_max_iterations, pcg, pcg_with, BlockJacobi, CgOutcome, CsrMatrix, Jacobi, Preconditioner};

pub const DEFAULT_TOLERANCE: f64 = 1e-12;

/// Cells per parallel batch during assembly.
const ASSEMBLY_BATCH: usize = 256;

/// Everything needed to assemble on a fixed mesh: DOF map and the weak
/// gradient of every cell, both in monomial coordinates and restricted to
/// the trial space.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub k: usize,
    pub bc: BcMode,
    pub j_override: Option<usize>,
    pub dofs: DofMap,
    pub ops: Vec<WeakGradOperator>,
    /// Per cell: weak-gradient matrix, in the orthonormal coordinates of
    /// [`WeakGradOperator::whitened`], acting on the stacked trial-space
    /// coefficients of its contributors.
    pub reduced: Vec<DMatrix<f64>>,
}

impl Discretization {
    pub fn new(mesh: &Mesh, k: usize, bc: BcMode, j_override: Option<usize>) -> Result<Self> {
        let dofs = DofMap::new(mesh, k, bc)?;
        let ops = build_all(mesh, k, j_override, bc)?;
        let reduced = ops
            .par_iter()
            .map(|op| {
                let d = op.local_dim();
                let total: usize = op.contributors.iter().map(|&c| dofs.cells[c].dim).sum();
                let mut g = DMatrix::zeros(op.whitened.nrows(), total);
                let mut col = 0;
                for (slot, &c) in op.contributors.iter().enumerate() {
                    let cd = &dofs.cells[c];
                    if cd.dim == 0 {
                        continue;
                    }
                    let block = op.whitened.columns(slot * d, d) * &cd.basis;
                    g.columns_mut(col, cd.dim).copy_from(&block);
                    col += cd.dim;
                }
                g
            })
            .collect();
        Ok(Discretization {
            k,
            bc,
            j_override,
            dofs,
            ops,
            reduced,
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs.n_dofs
    }

    /// Global indices matching the columns of `reduced[cell]`.
    pub fn local_indices(&self, cell: usize) -> Vec<usize> {
        self.ops[cell]
            .contributors
            .iter()
            .flat_map(|&c| self.dofs.range(c))
            .collect()
    }

    /// Local stiffness `G̃ᵀ M G̃` (`= YᵀY` in orthonormal coordinates),
    /// mirrored from its upper triangle so it is exactly symmetric.
    pub fn local_stiffness(&self, cell: usize) -> DMatrix<f64> {
        let g = &self.reduced[cell];
        let mut k = g.transpose() * g;
        let n = k.nrows();
        for a in 0..n {
            for b in 0..a {
                k[(a, b)] = k[(b, a)];
            }
        }
        k
    }

    /// `(f, φ_i)_T` for the trial basis functions owned by `cell`.
    pub fn local_load(&self, mesh: &Mesh, cell: usize, f: &(dyn Fn([f64; 2]) -> f64 + Sync)) -> Result<DVector<f64>> {
        let cd = &self.dofs.cells[cell];
        if cd.dim == 0 {
            return Ok(DVector::zeros(0));
        }
        let basis = MonomialBasis::for_cell(mesh, cell, self.k);
        let rule = polygon_rule(mesh, cell, smooth_order(self.k))?;
        let mut m = DVector::zeros(basis.dim());
        let mut vals = vec![0.0; basis.dim()];
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            basis.eval_into(*p, &mut vals);
            let fw = w * f(*p);
            for (a, v) in vals.iter().enumerate() {
                m[a] += fw * v;
            }
        }
        Ok(cd.basis.transpose() * m)
    }

    /// Coefficients of `∇_w v` on `cell` for a global trial vector.
    pub fn weak_gradient_of(&self, cell: usize, x: &[f64]) -> DVector<f64> {
        let idx = self.local_indices(cell);
        let xl = DVector::from_iterator(idx.len(), idx.iter().map(|&i| x[i]));
        let op = &self.ops[cell];
        let ns = op.mass_factor.nrows();
        let mut w = &self.reduced[cell] * xl;
        for block in 0..2 {
            let mut part = w.rows_mut(block * ns, ns);
            op.mass_factor.tr_solve_lower_triangular_mut(&mut part);
        }
        w
    }

    /// Element-wise monomial coefficients of a global trial vector.
    pub fn to_broken(&self, x: &[f64]) -> BrokenPolynomial {
        let coeffs = self
            .dofs
            .cells
            .iter()
            .map(|cd| {
                let xl = DVector::from_column_slice(&x[cd.offset..cd.offset + cd.dim]);
                &cd.basis * xl
            })
            .collect();
        BrokenPolynomial {
            degree: self.k,
            coeffs,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// For each cell, the sorted cells whose DOFs share a matrix block with it.
    pub cell_graph: Vec<Vec<usize>>,
    /// `(offset, size)` of each cell's DOF block.
    pub cell_blocks: Vec<(usize, usize)>,
}

/// Cells coupled through a common weak-gradient stencil.
fn cell_graph(disc: &Discretization, n_cells: usize) -> Vec<Vec<usize>> {
    let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_cells];
    for op in &disc.ops {
        for &a in &op.contributors {
            for &b in &op.contributors {
                sets[a].insert(b);
            }
        }
    }
    sets.into_iter().map(|s| s.into_iter().collect()).collect()
}

/// Assembles the global stiffness matrix and load vector.
///
/// The sparsity pattern is laid out from the cell graph first; local
/// contributions are then added cell by cell in mesh order, so the result is
/// bit-identical for any number of worker threads.
pub fn assemble_with(
    mesh: &Mesh,
    disc: &Discretization,
    f: &(dyn Fn([f64; 2]) -> f64 + Sync),
) -> Result<SparseSystem> {
    let n = disc.n_dofs();
    let graph = cell_graph(disc, mesh.n_cells());
    let dofs = &disc.dofs;

    // Row layout: columns of cell a's rows are the DOFs of graph[a], in order.
    let mut block_start: Vec<Vec<usize>> = Vec::with_capacity(graph.len());
    let mut row_ptr = vec![0usize; n + 1];
    for (a, nbrs) in graph.iter().enumerate() {
        let mut starts = Vec::with_capacity(nbrs.len());
        let mut acc = 0;
        for &b in nbrs {
            starts.push(acc);
            acc += dofs.cells[b].dim;
        }
        block_start.push(starts);
        for i in dofs.range(a) {
            row_ptr[i + 1] = acc;
        }
    }
    for i in 0..n {
        row_ptr[i + 1] += row_ptr[i];
    }
    let nnz = row_ptr[n];
    let mut col_idx = vec![0usize; nnz];
    for (a, nbrs) in graph.iter().enumerate() {
        for i in dofs.range(a) {
            let mut pos = row_ptr[i];
            for &b in nbrs {
                for c in dofs.range(b) {
                    col_idx[pos] = c;
                    pos += 1;
                }
            }
        }
    }
    let mut values = vec![0.0; nnz];
    let mut rhs = vec![0.0; n];

    for batch_start in (0..mesh.n_cells()).step_by(ASSEMBLY_BATCH) {
        let batch_end = (batch_start + ASSEMBLY_BATCH).min(mesh.n_cells());
        let locals: Vec<(DMatrix<f64>, DVector<f64>)> = (batch_start..batch_end)
            .into_par_iter()
            .map(|c| Ok((disc.local_stiffness(c), disc.local_load(mesh, c, f)?)))
            .collect::<Result<_>>()?;
        for (c, (kl, load)) in (batch_start..batch_end).zip(locals) {
            let contributors = &disc.ops[c].contributors;
            let mut row0 = 0;
            for &ca in contributors {
                let da = dofs.cells[ca].dim;
                let mut col0 = 0;
                for &cb in contributors {
                    let db = dofs.cells[cb].dim;
                    if da > 0 && db > 0 {
                        let slot = graph[ca].binary_search(&cb).expect("coupled cells in graph");
                        let start = block_start[ca][slot];
                        for r in 0..da {
                            let gi = dofs.cells[ca].offset + r;
                            let base = row_ptr[gi] + start;
                            for q in 0..db {
                                values[base + q] += kl[(row0 + r, col0 + q)];
                            }
                        }
                    }
                    col0 += db;
                }
                row0 += da;
            }
            for (r, v) in load.iter().enumerate() {
                rhs[dofs.cells[c].offset + r] += v;
            }
        }
    }

    Ok(SparseSystem {
        matrix: CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        },
        rhs,
        cell_graph: graph,
        cell_blocks: dofs.cells.iter().map(|c| (c.offset, c.dim)).collect(),
    })
}

/// Builds the discretization with the default weak-gradient degree and
/// assembles it.
pub fn assemble(
    mesh: &Mesh,
    k: usize,
    bc: BcMode,
    f: &(dyn Fn([f64; 2]) -> f64 + Sync),
) -> Result<(Discretization, SparseSystem)> {
    let disc = Discretization::new(mesh, k, bc, None)?;
    let sys = assemble_with(mesh, &disc, f)?;
    Ok((disc, sys))
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub coeffs: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub history: Vec<f64>,
}

impl Solution {
    /// `u_h` restricted to `cell`, in monomial coordinates.
    pub fn cell_coeffs(&self, dofs: &DofMap, cell: usize) -> DVector<f64> {
        let cd = &dofs.cells[cell];
        &cd.basis * DVector::from_column_slice(&self.coeffs[cd.offset..cd.offset + cd.dim])
    }
}

/// Solves the assembled system with CG, preconditioned by the inverse of
/// each cell's diagonal block (Jacobi at cell granularity).
///
/// Point Jacobi is not enough for k ≥ 5: the scaled-monomial blocks are
/// too ill-conditioned for it to converge within the iteration cap.
pub fn solve(system: &SparseSystem, tol: f64, max_iter: Option<usize>) -> Result<Solution> {
    let maxit = max_iter.unwrap_or_else(|| default_max_iterations(system.matrix.n));
    let precond = BlockJacobi::new(&system.matrix, &system.cell_blocks)?;
    let out = pcg_with(&system.matrix, &system.rhs, tol, maxit, &precond)?;
    Ok(Solution {
        coeffs: out.x,
        iterations: out.iterations,
        residual: out.residual,
        history: out.history,
    })
}

/// Unordered cell pairs `(a <= b)` joined by at least one nonzero matrix
/// entry.
pub fn sparsity_pattern(system: &SparseSystem, dofs: &DofMap) -> BTreeSet<(usize, usize)> {
    let mut owner = vec![0usize; dofs.n_dofs];
    for (c, cd) in dofs.cells.iter().enumerate() {
        owner[cd.offset..cd.offset + cd.dim].fill(c);
    }
    let mut pairs = BTreeSet::new();
    let a = &system.matrix;
    for i in 0..a.n {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if v != 0.0 {
                let (p, q) = (owner[i], owner[j]);
                pairs.insert((p.min(q), p.max(q)));
            }
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{gen_triangular, Mesh, MeshFamily};

    fn unit_square() -> Mesh {
        Mesh::from_cells(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![vec![0, 1, 2, 3]],
            MeshFamily::Custom,
            1,
        )
        .unwrap()
    }

    #[test]
    fn single_cell_self_coupling() {
        let m = unit_square();
        let (disc, sys) = assemble(&m, 1, BcMode::Weak, &|_| 1.0).unwrap();
        let pat = sparsity_pattern(&sys, &disc.dofs);
        assert_eq!(pat.into_iter().collect::<Vec<_>>(), vec![(0, 0)]);
    }

    #[test]
    fn two_cells_mutually_coupled() {
        let m = gen_triangular(1).unwrap();
        let (disc, sys) = assemble(&m, 1, BcMode::Weak, &|_| 1.0).unwrap();
        let pat = sparsity_pattern(&sys, &disc.dofs);
        assert_eq!(pat.into_iter().collect::<Vec<_>>(), vec![(0, 0), (0, 1), (1, 1)]);
    }

    #[test]
    fn matrix_exactly_symmetric_with_positive_diagonal() {
        let m = gen_triangular(3).unwrap();
        for bc in [BcMode::Strong, BcMode::Weak] {
            let (_, sys) = assemble(&m, 2, bc, &|p| p[0] * p[1]).unwrap();
            assert_eq!(sys.matrix.asymmetry(), 0.0);
            assert!(sys.matrix.diagonal().iter().all(|&d| d > 0.0));
        }
    }

    #[test]
    fn strong_boundary_trace_of_trial_functions_vanishes() {
        let m = gen_triangular(2).unwrap();
        let disc = Discretization::new(&m, 2, BcMode::Strong, None).unwrap();
        let x: Vec<f64> = (0..disc.n_dofs()).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let v = disc.to_broken(&x);
        for e in m.edges.iter().filter(|e| e.is_boundary()) {
            let a = m.vertex_point(e.v0);
            let b = m.vertex_point(e.v1);
            for t in [0.0, 0.3, 0.77, 1.0] {
                let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                assert!(v.eval(&m, e.cell_left, p).abs() < 1e-12);
            }
        }
    }
}
