use nalgebra::DVector;

use crate::basis::{poly_dim, project_scalar, MonomialBasis};
use crate::error::Result;
use crate::mesh::Mesh;

/// Element-wise polynomial of fixed degree, stored as scaled-monomial
/// coefficients per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct BrokenPolynomial {
    pub degree: usize,
    pub coeffs: Vec<DVector<f64>>,
}

impl BrokenPolynomial {
    pub fn zeros(mesh: &Mesh, degree: usize) -> Self {
        BrokenPolynomial {
            degree,
            coeffs: vec![DVector::zeros(poly_dim(degree)); mesh.n_cells()],
        }
    }

    /// Element-wise `Q_0 f`.
    pub fn project(mesh: &Mesh, degree: usize, f: impl Fn([f64; 2]) -> f64 + Copy) -> Result<Self> {
        let coeffs = (0..mesh.n_cells())
            .map(|c| project_scalar(f, mesh, c, degree))
            .collect::<Result<Vec<_>>>()?;
        Ok(BrokenPolynomial { degree, coeffs })
    }

    pub fn basis(&self, mesh: &Mesh, cell: usize) -> MonomialBasis {
        MonomialBasis::for_cell(mesh, cell, self.degree)
    }

    /// Value of the restriction to `cell` at `p` (which may lie outside it).
    pub fn eval(&self, mesh: &Mesh, cell: usize, p: [f64; 2]) -> f64 {
        self.basis(mesh, cell).evaluate(self.coeffs[cell].as_slice(), p)
    }
}
