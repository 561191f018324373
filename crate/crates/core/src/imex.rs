//! Second-order IMEX Runge–Kutta scheme ARS(2,2,2): L-stable SDIRK for the
//! stiff linear part, explicit two-stage for the nonlinearity.

use crate::banded::{BandLu, BandMatrix};
use crate::error::Result;

pub const GAMMA: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
pub const DELTA: f64 = 1.0 - 1.0 / (2.0 * GAMMA);

/// Linear operator together with the factorization of `I - γ dt A`.
pub struct ImplicitPart {
    pub op: BandMatrix,
    pub dt: f64,
    lu: BandLu,
}

impl ImplicitPart {
    pub fn new(op: BandMatrix, dt: f64) -> Result<Self> {
        let lu = op.shifted_identity(GAMMA * dt).lu()?;
        Ok(Self { op, dt, lu })
    }

    /// One step of `u' = A u + N(u)`.
    pub fn step(&self, u: &[f64], nonlinear: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
        let dt = self.dt;
        let n1 = nonlinear(u);
        let mut u2: Vec<f64> = u.iter().zip(&n1).map(|(u, n)| u + dt * GAMMA * n).collect();
        self.lu.solve_in_place(&mut u2);
        let n2 = nonlinear(&u2);
        let a2 = self.op.matvec(&u2);
        let mut u3: Vec<f64> = (0..u.len())
            .map(|i| {
                u[i] + dt * (DELTA * n1[i] + (1.0 - DELTA) * n2[i]) + dt * (1.0 - GAMMA) * a2[i]
            })
            .collect();
        self.lu.solve_in_place(&mut u3);
        u3
    }
}
