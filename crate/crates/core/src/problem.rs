use std::f64::consts::PI;

/// Exact solution and data of a manufactured Poisson problem on the unit
/// square with homogeneous Dirichlet boundary values.
pub trait Problem: Sync {
    fn solution(&self, p: [f64; 2]) -> f64;
    fn gradient(&self, p: [f64; 2]) -> [f64; 2];
    /// `f = -Δu`.
    fn source(&self, p: [f64; 2]) -> f64;
}

/// `u = sin(πx) sin(πy)`, `f = 2π² sin(πx) sin(πy)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct SineProblem;

impl Problem for SineProblem {
    fn solution(&self, p: [f64; 2]) -> f64 {
        (PI * p[0]).sin() * (PI * p[1]).sin()
    }

    fn gradient(&self, p: [f64; 2]) -> [f64; 2] {
        let (sx, cx) = (PI * p[0]).sin_cos();
        let (sy, cy) = (PI * p[1]).sin_cos();
        [PI * cx * sy, PI * sx * cy]
    }

    fn source(&self, p: [f64; 2]) -> f64 {
        2.0 * PI * PI * self.solution(p)
    }
}
