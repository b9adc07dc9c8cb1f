use std::io::Write;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Square matrix in compressed sparse row form with sorted column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed in
    /// `(row, col)` order after a stable sort.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix::from_triplets(n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |p| vals[p])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`. Rows are independent, so the result does not depend on
    /// the number of worker threads.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().with_min_len(256).enumerate().for_each(|(i, yi)| {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&c, v)| v * x[c]).sum();
        });
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `max |A_ij - A_ji|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Writes `i j value` lines with 17 significant digits.
    pub fn write_triplets(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                writeln!(w, "{i} {j} {v:.16e}").map_err(|e| Error::io(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final `‖b - Ax‖ / ‖b‖`, recomputed from scratch.
    pub residual: f64,
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Default iteration cap `20·√N + 1000`.
pub fn default_max_iterations(n: usize) -> usize {
    (20.0 * (n as f64).sqrt()) as usize + 1000
}

/// Symmetric positive definite preconditioner `z = P⁻¹ r`.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

/// Point Jacobi: `P = diag(A)`.
#[derive(Clone, Debug)]
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let diag = a.diagonal();
        if let Some(&d) = diag.iter().find(|&&d| d.is_nan() || d <= 0.0) {
            return Err(Error::Indefinite {
                iteration: 0,
                curvature: d,
            });
        }
        Ok(Jacobi {
            inv_diag: diag.iter().map(|d| 1.0 / d).collect(),
        })
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((z, r), d) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *z = r * d;
        }
    }
}

/// Block Jacobi over contiguous index blocks (one per cell): `P` is the
/// block diagonal of `A`, inverted through dense Cholesky factors.
#[derive(Clone, Debug)]
pub struct BlockJacobi {
    blocks: Vec<(usize, Cholesky<f64, Dyn>)>,
}

impl BlockJacobi {
    /// `blocks` are `(offset, size)` pairs partitioning `0..n`.
    pub fn new(a: &CsrMatrix, blocks: &[(usize, usize)]) -> Result<Self> {
        let mut out = Vec::with_capacity(blocks.len());
        for &(offset, size) in blocks {
            if size == 0 {
                continue;
            }
            let mut m = DMatrix::zeros(size, size);
            for i in 0..size {
                for jj in 0..size {
                    m[(i, jj)] = a.get(offset + i, offset + jj);
                }
            }
            let chol = m.cholesky().ok_or(Error::Indefinite {
                iteration: 0,
                curvature: a.get(offset, offset),
            })?;
            out.push((offset, chol));
        }
        Ok(BlockJacobi { blocks: out })
    }
}

impl Preconditioner for BlockJacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for (offset, chol) in &self.blocks {
            let n = chol.l_dirty().nrows();
            let mut v = DVector::from_column_slice(&r[*offset..offset + n]);
            chol.solve_mut(&mut v);
            z[*offset..offset + n].copy_from_slice(v.as_slice());
        }
    }
}

/// Jacobi-preconditioned conjugate gradients.
///
/// Stops when the true relative residual `‖b − Ax‖/‖b‖` drops to `tol`.
/// A non-positive curvature `pᵀAp` aborts with [`Error::Indefinite`].
pub fn pcg(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<CgOutcome> {
    let jacobi = Jacobi::new(a)?;
    pcg_with(a, b, tol, max_iter, &jacobi)
}

/// Preconditioned conjugate gradients with an arbitrary SPD preconditioner.
pub fn pcg_with(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    precond: &dyn Preconditioner,
) -> Result<CgOutcome> {
    let n = a.n;
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            residual: 0.0,
            history: vec![0.0],
        });
    }

    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut history = vec![1.0];
    let mut iterations = 0;

    while iterations < max_iter {
        a.mul_vec_into(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if curvature.is_nan() || curvature <= 0.0 {
            return Err(Error::Indefinite {
                iteration: iterations,
                curvature,
            });
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        iterations += 1;
        let mut rel = dot(&r, &r).sqrt() / bnorm;
        let mut restart = false;
        if rel <= tol {
            // The recurrence drifts from b - Ax in floating point; only the
            // true residual may end the iteration. Otherwise continue from it
            // with a fresh search direction.
            true_residual(a, b, &x, &mut r);
            rel = dot(&r, &r).sqrt() / bnorm;
            if rel <= tol {
                history.push(rel);
                return Ok(CgOutcome {
                    x,
                    iterations,
                    residual: rel,
                    history,
                });
            }
            restart = true;
        }
        history.push(rel);
        precond.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = if restart { 0.0 } else { rz_new / rz };
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    true_residual(a, b, &x, &mut r);
    Err(Error::NotConverged {
        iterations,
        residual: dot(&r, &r).sqrt() / bnorm,
        history,
    })
}

/// `r = b - A x`, each row summed with error-free product and sum
/// transformations so that the evaluation itself adds no rounding beyond
/// the final store.
fn true_residual(a: &CsrMatrix, b: &[f64], x: &[f64], r: &mut [f64]) {
    r.par_iter_mut().with_min_len(256).enumerate().for_each(|(i, ri)| {
        let (cols, vals) = a.row(i);
        let mut sum = b[i];
        let mut comp = 0.0;
        for (&c, v) in cols.iter().zip(vals) {
            let prod = -v * x[c];
            let prod_err = (-v).mul_add(x[c], -prod);
            let t = sum + prod;
            comp += if sum.abs() >= prod.abs() { (sum - t) + prod } else { (prod - t) + sum };
            comp += prod_err;
            sum = t;
        }
        *ri = sum + comp;
    });
}
