use std::sync::Arc;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::{hill, hill_deriv, PlantModel};
use crate::error::{Error, Result};
use crate::rir_param::ParamFamily;
use crate::tf::RationalTF;

/// Three-gene ring `ẋ_i = −α_i x_i + β_i ψ_i(x_{i−1})`, concentrations in nM, time in hr.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepressilatorParams {
    pub alpha: [f64; 3],
    pub beta: [f64; 3],
    #[serde(rename = "K")]
    pub k: [f64; 3],
    pub nu: [f64; 3],
}

impl Default for RepressilatorParams {
    fn default() -> Self {
        Self::nominal()
    }
}

impl RepressilatorParams {
    pub fn nominal() -> Self {
        Self {
            alpha: [0.4621, 0.5545, 0.3697],
            beta: [138.0, 110.4, 165.6],
            k: [5.0, 7.5, 2.5],
            nu: [3.0, 3.0, 3.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = self.alpha.iter().chain(&self.beta).chain(&self.k).all(|&v| v > 0.0);
        if !pos || self.nu.iter().any(|&n| !(n >= 1.0)) {
            return Err(Error::InvalidInput(format!(
                "invalid repressilator parameters {self:?}"
            )));
        }
        Ok(())
    }

    fn psi(&self, i: usize, x: f64) -> Result<f64> {
        hill(x, self.k[i], self.nu[i])
    }

    fn dpsi(&self, i: usize, x: f64) -> Result<f64> {
        hill_deriv(x, self.k[i], self.nu[i])
    }

    /// Equilibrium with the first production gain scaled to `(1 + e)β₁`.
    pub fn equilibrium(&self, e: f64) -> Result<[f64; 3]> {
        self.validate()?;
        if !(1.0 + e > 0.0) {
            return Err(Error::Precondition(format!("1 + e = {} must be positive", 1.0 + e)));
        }
        let [a1, a2, a3] = self.alpha;
        let [b1, b2, b3] = self.beta;
        let b1_hat = (1.0 + e) * b1;
        let chain = |x1: f64| -> Result<[f64; 3]> {
            let x2 = b2 / a2 * self.psi(1, x1)?;
            let x3 = b3 / a3 * self.psi(2, x2)?;
            Ok([x1, x2, x3])
        };
        let h = |x1: f64| -> Result<f64> {
            let [_, _, x3] = chain(x1)?;
            Ok(x1 - b1_hat / a1 * self.psi(0, x3)?)
        };
        let (mut lo, mut hi) = (0.0, b1_hat / a1);
        if !(h(lo)? < 0.0 && h(hi)? >= 0.0) {
            return Err(Error::NoBracket);
        }
        while hi - lo > 1e-12 * (1.0 + hi) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if h(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        chain(0.5 * (lo + hi))
    }

    /// Vector field with loop input `w` entering the first equation.
    pub fn vector_field(&self, x: &[f64; 3], w: f64) -> Result<[f64; 3]> {
        let [a1, a2, a3] = self.alpha;
        let [b1, b2, b3] = self.beta;
        Ok([
            -a1 * x[0] + b1 * self.psi(0, x[2])? + w,
            -a2 * x[1] + b2 * self.psi(1, x[0])?,
            -a3 * x[2] + b3 * self.psi(2, x[1])?,
        ])
    }

    /// Loop output `z = β₁ψ₁(x₃)`.
    pub fn loop_output(&self, x: &[f64; 3]) -> Result<f64> {
        Ok(self.beta[0] * self.psi(0, x[2])?)
    }

    /// Jacobian of the vector field at fixed `w`.
    pub fn jacobian(&self, x: &[f64; 3]) -> Result<Matrix3<f64>> {
        let [a1, a2, a3] = self.alpha;
        let [b1, b2, b3] = self.beta;
        Ok(Matrix3::new(
            -a1,
            0.0,
            b1 * self.dpsi(0, x[2])?,
            b2 * self.dpsi(1, x[0])?,
            -a2,
            0.0,
            0.0,
            b3 * self.dpsi(2, x[1])?,
            -a3,
        ))
    }

    /// Loop gain `k = −β₁β₂β₃ψ₁'(x₃)ψ₂'(x₁)ψ₃'(x₂)` at a state.
    pub fn loop_gain(&self, x: &[f64; 3]) -> Result<f64> {
        let [b1, b2, b3] = self.beta;
        Ok(-b1 * b2 * b3 * self.dpsi(0, x[2])? * self.dpsi(1, x[0])? * self.dpsi(2, x[1])?)
    }
}

/// `g_e(s) = −k/(s³ + ps² + qs + ℓ)` seen by a perturbation on the first
/// production term, linearized at the equilibrium for static gain `e`.
pub fn linearize_repressilator(p: &RepressilatorParams, e: f64) -> Result<(RationalTF, f64)> {
    let x = p.equilibrium(e)?;
    let k = p.loop_gain(&x)?;
    if !(k > 0.0) {
        return Err(Error::Verification(format!("loop gain k = {k} is not positive")));
    }
    let [a1, a2, a3] = p.alpha;
    let pc = a1 + a2 + a3;
    let qc = a1 * a2 + a1 * a3 + a2 * a3;
    let lc = a1 * a2 * a3 + k;
    let g = RationalTF::from_coeffs(&[-k], &[lc, qc, pc, 1.0])?;
    Ok((g, k))
}

/// The linearized family over `e ∈ (−1, 1)`.
pub fn repressilator_family(p: RepressilatorParams) -> ParamFamily {
    ParamFamily::new(
        "repressilator",
        (-1.0, 1.0),
        Arc::new(move |e| linearize_repressilator(&p, e).map(|(g, _)| g)),
    )
}

/// Plant with nominal production gains; a perturbation of static gain `e`
/// moves the equilibrium to [`RepressilatorParams::equilibrium`]`(e)`.
#[derive(Debug, Clone, Copy)]
pub struct Repressilator(pub RepressilatorParams);

impl PlantModel for Repressilator {
    fn dim(&self) -> usize {
        3
    }

    fn loop_output(&self, x: &[f64]) -> f64 {
        self.0.beta[0] * hill(x[2].max(0.0), self.0.k[0], self.0.nu[0]).unwrap_or(f64::NAN)
    }

    fn rhs(&self, x: &[f64], w: f64, dx: &mut [f64]) {
        let p = &self.0;
        let psi = |i: usize, v: f64| hill(v.max(0.0), p.k[i], p.nu[i]).unwrap_or(f64::NAN);
        dx[0] = -p.alpha[0] * x[0] + p.beta[0] * psi(0, x[2]) + w;
        dx[1] = -p.alpha[1] * x[1] + p.beta[1] * psi(1, x[0]);
        dx[2] = -p.alpha[2] * x[2] + p.beta[2] * psi(2, x[1]);
    }

    fn positive_orthant(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nominal_equilibrium() {
        let x = RepressilatorParams::nominal().equilibrium(0.0).unwrap();
        let want = [21.2929328451442, 8.33622346635721, 11.764251256135];
        for i in 0..3 {
            assert!((x[i] - want[i]).abs() < 1e-9, "{x:?}");
        }
        let f = RepressilatorParams::nominal().vector_field(&x, 0.0).unwrap();
        assert!(f.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn shifted_equilibrium() {
        let p = RepressilatorParams::nominal();
        let x = p.equilibrium(0.3218).unwrap();
        let want = [21.5358056570881, 8.06865521646761, 12.9389092760932];
        for i in 0..3 {
            assert!((x[i] - want[i]).abs() < 1e-9);
        }
        // equilibrium of the loop closed with static gain e
        let z = p.loop_output(&x).unwrap();
        let f = p.vector_field(&x, 0.3218 * z).unwrap();
        assert!(f.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn first_coordinate_increases_with_e() {
        let p = RepressilatorParams::nominal();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..50 {
            let e = -0.9 + 0.038 * i as f64;
            let x = p.equilibrium(e).unwrap();
            assert!(x[0] > prev);
            prev = x[0];
        }
    }

    #[test]
    fn linearization_coefficients() {
        let (g, k) = linearize_repressilator(&RepressilatorParams::nominal(), 0.0).unwrap();
        assert!((k - 2.21611287830075).abs() < 1e-9);
        assert!((g.den().coeff(2) - 1.3863).abs() < 1e-12);
        assert!((g.den().coeff(1) - 0.63207147).abs() < 1e-10);
        assert!((g.den().coeff(0) - 2.31084275446575).abs() < 1e-9);
        assert!((g.num().coeff(0) + k).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = RepressilatorParams::nominal();
        p.nu[1] = 0.5;
        assert!(p.equilibrium(0.0).is_err());
        assert!(RepressilatorParams::nominal().equilibrium(-1.0).is_err());
    }
}
