//! Nonlinear case-study systems with an LTI perturbation in the loop.
//!
//! A [`PlantModel`] exposes a loop output `z(x)` and accepts a loop input `w`.
//! [`simulate`] closes the loop `w = δ̂ z` through a [`StateSpaceLTI`]
//! realization of `δ` and integrates plant and perturbation states together
//! with classical fixed-step RK4.

mod fhn;
mod repressilator;

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tf::RationalTF;

pub use fhn::{fhn_equilibrium, fhn_family, linearize_fhn, FhnModel, FhnParams};
pub use repressilator::{linearize_repressilator, repressilator_family, Repressilator, RepressilatorParams};

/// Hill repression `K^ν/(K^ν + x^ν)`.
pub fn hill(x: f64, k: f64, nu: f64) -> Result<f64> {
    check_hill(x, k)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    // (x/K)^ν keeps large K^ν from overflowing
    Ok(1.0 / (1.0 + (x / k).powf(nu)))
}

/// `dψ/dx = −νK^ν x^{ν−1}/(K^ν + x^ν)²`.
pub fn hill_deriv(x: f64, k: f64, nu: f64) -> Result<f64> {
    check_hill(x, k)?;
    if x == 0.0 {
        return Ok(if nu == 1.0 { -1.0 / k } else { 0.0 });
    }
    let r = (x / k).powf(nu);
    Ok(-nu * r / (x * (1.0 + r) * (1.0 + r)))
}

fn check_hill(x: f64, k: f64) -> Result<()> {
    if x < 0.0 || x.is_nan() {
        return Err(Error::DomainError(format!("hill input x = {x} must be nonnegative")));
    }
    if k <= 0.0 {
        return Err(Error::DomainError(format!("hill constant K = {k} must be positive")));
    }
    Ok(())
}

/// `ẋ = Ax + Bu`, `y = Cx + Du` for a single-input single-output system.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceLTI {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub d: f64,
}

impl StateSpaceLTI {
    pub fn zero() -> Self {
        Self::static_gain(0.0)
    }

    pub fn static_gain(d: f64) -> Self {
        Self {
            a: DMatrix::zeros(0, 0),
            b: DVector::zeros(0),
            c: DVector::zeros(0),
            d,
        }
    }

    pub fn order(&self) -> usize {
        self.b.len()
    }

    /// `C(sI − A)⁻¹B + D`.
    pub fn eval(&self, s: Complex64) -> Result<Complex64> {
        let n = self.order();
        if n == 0 {
            return Ok(Complex64::new(self.d, 0.0));
        }
        let m = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
            let diag = if i == j { s } else { Complex64::new(0.0, 0.0) };
            diag - self.a[(i, j)]
        });
        let rhs = DVector::<Complex64>::from_fn(n, |i, _| Complex64::new(self.b[i], 0.0));
        let x = m.lu().solve(&rhs).ok_or(Error::PoleHit(s))?;
        let y: Complex64 = (0..n).map(|i| x[i] * self.c[i]).sum();
        Ok(y + self.d)
    }
}

/// Controllable-canonical realization of a proper transfer function, checked
/// against direct evaluation on a logarithmic frequency grid.
pub fn realize(d: &RationalTF) -> Result<StateSpaceLTI> {
    if !d.is_proper() {
        return Err(Error::Improper);
    }
    let den = d.den();
    let n = den.degree();
    let lead = den.leading();
    let feedthrough = d.num().coeff(n) / lead;
    let a = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == n {
            -den.coeff(j) / lead
        } else if j == i + 1 {
            1.0
        } else {
            0.0
        }
    });
    let mut b = DVector::zeros(n);
    if n > 0 {
        b[n - 1] = 1.0;
    }
    let c = DVector::from_fn(n, |i, _| (d.num().coeff(i) - feedthrough * den.coeff(i)) / lead);
    let ss = StateSpaceLTI {
        a,
        b,
        c,
        d: feedthrough,
    };
    for i in 0..100 {
        let w = 10f64.powf(-3.0 + 6.0 * i as f64 / 99.0);
        let s = Complex64::new(0.0, w);
        let (Ok(want), Ok(got)) = (d.eval(s), ss.eval(s)) else {
            continue;
        };
        if (want - got).norm() > 1e-8 * want.norm().max(1e-300) + 1e-14 {
            return Err(Error::Verification(format!(
                "realization mismatch at omega = {w}: {got} vs {want}"
            )));
        }
    }
    Ok(ss)
}

/// Nonlinear plant with one scalar loop output and one scalar loop input.
pub trait PlantModel: Sync {
    fn dim(&self) -> usize;
    /// Loop output `z` at state `x`.
    fn loop_output(&self, x: &[f64]) -> f64;
    /// Writes `ẋ` given the loop input `w`.
    fn rhs(&self, x: &[f64], w: f64, dx: &mut [f64]);
    /// Whether plant states are expected to stay nonnegative.
    fn positive_orthant(&self) -> bool {
        false
    }
}

/// Time series of a closed-loop simulation; rows are stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub plant_dim: usize,
    pub delta_dim: usize,
    pub t: Vec<f64>,
    /// Row-major `[x; x_δ]` per time step.
    pub states: Vec<f64>,
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    /// Steps at which some plant state was negative.
    pub positivity_violations: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.plant_dim + self.delta_dim;
        &self.states[i * w..(i + 1) * w]
    }

    pub fn plant(&self, i: usize) -> &[f64] {
        &self.row(i)[..self.plant_dim]
    }

    pub fn final_plant(&self) -> &[f64] {
        self.plant(self.len() - 1)
    }

    /// CSV with a units comment line and header `t,x1..,z,w,xd1..`.
    pub fn write_csv<W: Write>(&self, mut out: W, units: &str) -> std::io::Result<()> {
        writeln!(out, "# {units}")?;
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.plant_dim).map(|i| format!("x{i}")));
        header.push("z".into());
        header.push("w".into());
        header.extend((1..=self.delta_dim).map(|i| format!("xd{i}")));
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.len() {
            let row = self.row(i);
            write!(out, "{}", self.t[i])?;
            for v in &row[..self.plant_dim] {
                write!(out, ",{v}")?;
            }
            write!(out, ",{},{}", self.z[i], self.w[i])?;
            for v in &row[self.plant_dim..] {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

const DIVERGENCE_BOUND: f64 = 1e9;

/// Integrates the plant in feedback with `δ̂` by RK4 at fixed step `dt`;
/// perturbation states start at zero. Produces `floor(t_final/dt) + 1` rows.
pub fn simulate<M: PlantModel + ?Sized>(
    model: &M,
    delta: &StateSpaceLTI,
    x0: &[f64],
    t_final: f64,
    dt: f64,
) -> Result<Trajectory> {
    let np = model.dim();
    let nd = delta.order();
    if x0.len() != np {
        return Err(Error::InvalidInput(format!(
            "x0 has {} entries, expected {np}",
            x0.len()
        )));
    }
    if !(dt > 0.0) || !(t_final >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "need dt > 0 and t_final >= 0, got {dt}, {t_final}"
        )));
    }
    let steps = (t_final / dt + 1e-9).floor() as usize;
    let n = np + nd;

    let field = |y: &[f64], dy: &mut [f64]| -> (f64, f64) {
        let (x, xd) = y.split_at(np);
        let z = model.loop_output(x);
        let w = delta.c.iter().zip(xd).map(|(c, v)| c * v).sum::<f64>() + delta.d * z;
        model.rhs(x, w, &mut dy[..np]);
        for i in 0..nd {
            let row: f64 = (0..nd).map(|j| delta.a[(i, j)]).zip(xd).map(|(a, v)| a * v).sum();
            dy[np + i] = delta.b[i] * z + row;
        }
        (z, w)
    };

    let mut tr = Trajectory {
        plant_dim: np,
        delta_dim: nd,
        t: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity((steps + 1) * n),
        z: Vec::with_capacity(steps + 1),
        w: Vec::with_capacity(steps + 1),
        positivity_violations: 0,
    };
    let mut y = x0.to_vec();
    y.resize(n, 0.0);
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for step in 0..=steps {
        let t = step as f64 * dt;
        if y.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_BOUND) {
            return Err(Error::Divergence { t });
        }
        let (z, w) = field(&y, &mut k1);
        if model.positive_orthant() && y[..np].iter().any(|&v| v < 0.0) {
            tr.positivity_violations += 1;
        }
        tr.t.push(t);
        tr.states.extend_from_slice(&y);
        tr.z.push(z);
        tr.w.push(w);
        if step == steps {
            break;
        }
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * dt * k1[i];
        }
        field(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * dt * k2[i];
        }
        field(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + dt * k3[i];
        }
        field(&tmp, &mut k4);
        for i in 0..n {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    Ok(tr)
}

pub const TAU_OSC: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct OscillationReport {
    pub oscillating: bool,
    /// Peak-to-peak range of each plant state over the trailing window.
    pub amplitude: Vec<f64>,
}

/// Peak-to-peak test on the trailing `tail_fraction` of the trajectory.
pub fn detect_oscillation(tr: &Trajectory, tail_fraction: f64, tau_osc: f64) -> Result<OscillationReport> {
    if !(tail_fraction > 0.0 && tail_fraction < 1.0) {
        return Err(Error::InvalidInput(format!("tail_fraction = {tail_fraction}")));
    }
    let len = tr.len();
    let window = (len as f64 * tail_fraction).floor() as usize;
    if window < 2 {
        return Err(Error::WindowTooShort(window));
    }
    let mut lo = vec![f64::INFINITY; tr.plant_dim];
    let mut hi = vec![f64::NEG_INFINITY; tr.plant_dim];
    for i in len - window..len {
        for (j, &v) in tr.plant(i).iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    let amplitude: Vec<f64> = hi.iter().zip(&lo).map(|(h, l)| h - l).collect();
    let oscillating = amplitude.iter().any(|&a| a > tau_osc);
    Ok(OscillationReport { oscillating, amplitude })
}
