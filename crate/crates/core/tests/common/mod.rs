//! Seeded batch checks shared by the property tests and the acceptance suite.
#![allow(dead_code)]

use nalgebra::{DMatrix, Matrix2, Matrix3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rir_core::models::{
    fhn_equilibrium, hill_deriv, linearize_fhn, linearize_repressilator, realize, repressilator_family, FhnModel,
    FhnParams, PlantModel, RepressilatorParams,
};
use rir_core::poly::RealPolynomial;
use rir_core::rir_fixed::{
    internally_stabilizes, lower_bounds, omega_c_stability, sweep_upper_bound, SweepConfig, ThirdOrderCoeffs,
};
use rir_core::rir_param::{construct_delta_e, default_xi_grid, highpass_adjust, ParamConfig};
use rir_core::tf::{feedback_charpoly, NormConfig, RationalTF};

pub type Check = Result<(), String>;

fn collect_failures(failures: Vec<String>) -> Check {
    match failures.first() {
        None => Ok(()),
        Some(first) => Err(format!("{} failures, first: {first}", failures.len())),
    }
}

pub fn random_root(rng: &mut impl Rng, re_min: f64) -> Vec<Complex64> {
    let re = rng.gen_range(re_min..3.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    if rng.gen_bool(0.5) {
        vec![Complex64::new(re, 0.0)]
    } else {
        let im = rng.gen_range(0.1..3.0);
        vec![Complex64::new(re, im), Complex64::new(re, -im)]
    }
}

pub fn random_roots(rng: &mut impl Rng, degree: usize, re_min: f64) -> Vec<Complex64> {
    let mut roots = Vec::new();
    while roots.len() < degree {
        let r = random_root(rng, re_min);
        if roots.len() + r.len() <= degree {
            roots.extend(r);
        }
    }
    roots
}

pub fn random_plant(rng: &mut impl Rng, den_deg: usize, re_min: f64) -> RationalTF {
    let poles = random_roots(rng, den_deg, re_min);
    let num_deg = rng.gen_range(0..den_deg);
    let zeros = random_roots(rng, num_deg, 0.05);
    let gain = rng.gen_range(0.2..5.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    RationalTF::new(
        RealPolynomial::from_roots(&zeros).scale(gain),
        RealPolynomial::from_roots(&poles),
    )
    .unwrap()
}

/// Stationary-point norm against a log-spaced dense sweep over `[1e-4, 1e4]`.
pub fn norm_matches_dense_sweep(seed: u64, n: usize, n_grid: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plants: Vec<RationalTF> = (0..n)
        .map(|_| {
            let deg = rng.gen_range(1..=6);
            random_plant(&mut rng, deg, 0.2)
        })
        .collect();
    let cfg = NormConfig::default();
    let failures = plants
        .par_iter()
        .filter_map(|g| {
            let exact = g.linf_norm(&cfg).unwrap().linf;
            let dense = (0..n_grid)
                .map(|i| 10f64.powf(-4.0 + 8.0 * i as f64 / (n_grid - 1) as f64))
                .map(|w| g.freq_response(w).unwrap().norm())
                .fold(0.0, f64::max);
            ((exact - dense).abs() > 1e-6 * exact).then(|| format!("{exact} vs {dense} for {g:?}"))
        })
        .collect();
    collect_failures(failures)
}

pub fn condition2_triples(seed: u64, n: usize) -> Vec<ThirdOrderCoeffs> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let p: f64 = rng.gen_range(0.2..4.0);
            let q: f64 = rng.gen_range(-2.0..4.0);
            let floor = (p * q).max(q * q / (2.0 * p)).max(0.0);
            let ell = floor + rng.gen_range(0.05..5.0);
            let k = rng.gen_range(0.2..5.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let zeta = if rng.gen_bool(0.5) {
                0.0
            } else {
                rng.gen_range(-1.0..1.0)
            };
            ThirdOrderCoeffs { zeta, k, p, q, ell }
        })
        .collect()
}

/// Positive factorization, marginal stability at the peak and a tight sweep bound.
pub fn condition2_batch(seed: u64, n: usize) -> Check {
    let cfg = SweepConfig::default();
    let failures = condition2_triples(seed, n)
        .par_iter()
        .filter_map(|c| {
            let check = || -> Check {
                if !c.condition2_check() {
                    return Err("generator left the class".into());
                }
                let f = c.marginal_factorization().map_err(|e| e.to_string())?;
                if !(f.a > 0.0 && f.sigma1 > 0.0 && f.sigma0 > 0.0) {
                    return Err("nonpositive".into());
                }
                let g = c.to_tf();
                let st = omega_c_stability(&g, &f.allpass().to_tf(), f.omega_p).map_err(|e| e.to_string())?;
                if !st.omega_c_stable {
                    return Err(format!("not marginal: {:?}", st.roots));
                }
                let r = sweep_upper_bound(&g, &cfg.grid(), &cfg)
                    .map_err(|e| e.to_string())?
                    .result;
                let gap = (r.rho_upper - r.bounds.rho_p) / r.bounds.rho_p;
                if gap.abs() > 1e-8 || gap.is_nan() {
                    return Err(format!("gap {gap}"));
                }
                Ok(())
            };
            check().err().map(|e| format!("{c:?}: {e}"))
        })
        .collect();
    collect_failures(failures)
}

/// Constant certificate `ℓ/k` leaves one root at the origin and the rest Hurwitz.
pub fn condition1_batch(seed: u64, n: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = SweepConfig::default();
    let mut failures = Vec::new();
    for _ in 0..n {
        let p = rng.gen_range(0.1..5.0);
        let ell = -rng.gen_range(0.1..5.0);
        let k = rng.gen_range(0.2..5.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let zeta = if rng.gen_bool(0.5) {
            0.0
        } else {
            rng.gen_range(-2.0..2.0)
        };
        let q = -zeta * ell / k + rng.gen_range(0.05..5.0);
        let c = ThirdOrderCoeffs { zeta, k, p, q, ell };
        let check = || -> Check {
            if !c.condition1_check() {
                return Err("generator left the class".into());
            }
            let g = c.to_tf();
            let d = c.condition1_certificate().to_tf();
            let cp = feedback_charpoly(&g, &d).map_err(|e| e.to_string())?;
            if cp.coeff(0).abs() > 1e-12 * cp.norm() {
                return Err("no root at the origin".into());
            }
            let deflated = RealPolynomial::new(cp.coeffs()[1..].to_vec());
            if !deflated.is_hurwitz().map_err(|e| e.to_string())? {
                return Err("deflated polynomial not Hurwitz".into());
            }
            let rho_o = lower_bounds(&g, &cfg.norm)
                .map_err(|e| e.to_string())?
                .rho_o
                .ok_or("no rho_o")?;
            if (rho_o - (ell / k).abs()).abs() > 1e-12 * rho_o {
                return Err(format!("rho_o = {rho_o}"));
            }
            let r = sweep_upper_bound(&g, &[0.0], &SweepConfig { points: 2, ..cfg })
                .map_err(|e| e.to_string())?
                .result;
            if !(r.exact && (r.rho_upper - rho_o).abs() <= 1e-9 * rho_o) {
                return Err(format!("{r:?}"));
            }
            Ok(())
        };
        if let Err(e) = check() {
            failures.push(format!("{c:?}: {e}"));
        }
    }
    collect_failures(failures)
}

pub fn even_unstable_plant(rng: &mut impl Rng) -> RationalTF {
    let re = rng.gen_range(0.05..1.0);
    let im = rng.gen_range(0.3..3.0);
    let mut poles = vec![Complex64::new(re, im), Complex64::new(re, -im)];
    for _ in 0..rng.gen_range(0..=2) {
        poles.push(Complex64::new(-rng.gen_range(0.3..4.0), 0.0));
    }
    let num = if rng.gen_bool(0.5) {
        RealPolynomial::constant(1.0)
    } else {
        RealPolynomial::new(vec![rng.gen_range(0.2..3.0), 1.0])
    };
    let num = if num.degree() + 1 < poles.len() {
        num
    } else {
        RealPolynomial::constant(1.0)
    };
    let gain = rng.gen_range(0.3..4.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    RationalTF::new(num.scale(gain), RealPolynomial::from_roots(&poles)).unwrap()
}

/// High-pass rescaling of `n` stabilizing perturbations of even-ORHP plants:
/// success on the ξ grid, exact static gain, no norm growth.
pub fn highpass_batch(seed: u64, n: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = SweepConfig::default();
    let cases: Vec<(RationalTF, f64)> = (0..3 * n)
        .map(|_| {
            let g = even_unstable_plant(&mut rng);
            (g, rng.gen_range(-0.9..0.9))
        })
        .collect();
    let outcomes: Vec<Option<Check>> = cases
        .par_iter()
        .map(|(g, u)| {
            let r = sweep_upper_bound(g, &cfg.grid(), &cfg).ok()?.result;
            // scaled certificate, as in the family construction
            let d = r.certificate?.allpass.scaled(1.05).to_tf();
            if !internally_stabilizes(g, &d).ok()? {
                return None;
            }
            let norm = NormConfig::default();
            let d0 = d.static_gain().unwrap();
            let dg = d.mul(g).unwrap().linf_norm(&norm).unwrap().linf;
            let e = u * d0.abs() / dg.max(1.0);
            let dn = d.linf_norm(&norm).unwrap().linf;
            let check = || -> Check {
                let adj = highpass_adjust(&d, e, &default_xi_grid(), g, 1e-4).map_err(|e| e.to_string())?;
                let gain_err = (adj.delta.static_gain().unwrap() - e).abs();
                if gain_err > 1e-12 {
                    return Err(format!("static gain off by {gain_err}"));
                }
                if adj.delta.linf_norm(&norm).unwrap().linf > dn * (1.0 + 1e-9) {
                    return Err("norm increased".into());
                }
                for k in 0..2000 {
                    let w = 10f64.powf(-4.0 + 8.0 * k as f64 / 1999.0);
                    if adj.delta.freq_response(w).unwrap().norm() > dn * (1.0 + 1e-9) {
                        return Err(format!("gain above the original norm at omega = {w}"));
                    }
                }
                Ok(())
            };
            Some(check().map_err(|e| format!("{g:?}: {e}")))
        })
        .collect();
    let tested: Vec<Check> = outcomes.into_iter().flatten().take(n).collect();
    if tested.len() < n {
        return Err(format!("only {} usable plants", tested.len()));
    }
    collect_failures(tested.into_iter().filter_map(Result::err).collect())
}

fn fd_jacobian(p: &RepressilatorParams, x: &[f64; 3]) -> DMatrix<f64> {
    DMatrix::from_fn(3, 3, |i, j| {
        let h = 1e-6 * (1.0 + x[j].abs());
        let (mut xp, mut xm) = (*x, *x);
        xp[j] += h;
        xm[j] -= h;
        (p.vector_field(&xp, 0.0).unwrap()[i] - p.vector_field(&xm, 0.0).unwrap()[i]) / (2.0 * h)
    })
}

/// Ascending coefficients of `det(sI − J)`.
fn charpoly3(j: &Matrix3<f64>) -> [f64; 4] {
    let minors = j.m11 * j.m22 - j.m12 * j.m21 + j.m11 * j.m33 - j.m13 * j.m31 + j.m22 * j.m33 - j.m23 * j.m32;
    [-j.determinant(), minors, -j.trace(), 1.0]
}

fn match_spectra(mut a: Vec<Complex64>, mut b: Vec<Complex64>, tol: f64) -> Check {
    if a.len() != b.len() {
        return Err(format!("{} eigenvalues vs {} roots", a.len(), b.len()));
    }
    let key = |z: &Complex64| (z.re * 1e6).round() as i64 * 1_000_000 + (z.im * 1e3).round() as i64;
    a.sort_by_key(key);
    b.sort_by_key(key);
    for (x, y) in a.iter().zip(&b) {
        if (x - y).norm() >= tol {
            return Err(format!("{x} vs {y}"));
        }
    }
    Ok(())
}

/// Finite-difference Jacobian, transfer-function denominator and the
/// closed-loop spectrum with the family certificate in the loop.
pub fn repressilator_linearization() -> Check {
    let p = RepressilatorParams::nominal();
    for e in [-0.5, 0.0, 0.3218] {
        let x = p.equilibrium(e).map_err(|e| e.to_string())?;
        let j = p.jacobian(&x).map_err(|e| e.to_string())?;
        let fd = fd_jacobian(&p, &x);
        for r in 0..3 {
            for c in 0..3 {
                let scale = j[(r, c)].abs().max(1e-3);
                if (fd[(r, c)] - j[(r, c)]).abs() > 1e-6 * scale {
                    return Err(format!("jacobian entry ({r},{c}) at e = {e}"));
                }
            }
        }
        let (g, _) = linearize_repressilator(&p, e).map_err(|e| e.to_string())?;
        let cp = charpoly3(&j);
        for (i, c) in cp.iter().enumerate() {
            if (c - g.den().coeff(i)).abs() >= 1e-9 {
                return Err(format!("denominator coefficient {i} at e = {e}"));
            }
        }
    }

    let fam = repressilator_family(p);
    let e = 0.3218;
    let c = construct_delta_e(&fam, e, 0.05, &ParamConfig::default()).map_err(|e| e.to_string())?;
    let ss = realize(&c.delta).map_err(|e| e.to_string())?;
    let x = p.equilibrium(e).unwrap();
    let j = p.jacobian(&x).unwrap();
    let dz = p.beta[0] * hill_deriv(x[2], p.k[0], p.nu[0]).unwrap();
    let nd = ss.order();
    let n = 3 + nd;
    // ẋ = Jx + e1·w, w = C xd + D z, ẋd = A xd + B z, z = dz·x3
    let mut m = DMatrix::zeros(n, n);
    for r in 0..3 {
        for cc in 0..3 {
            m[(r, cc)] = j[(r, cc)];
        }
    }
    m[(0, 2)] += ss.d * dz;
    for k in 0..nd {
        m[(0, 3 + k)] = ss.c[k];
        m[(3 + k, 2)] = ss.b[k] * dz;
        for l in 0..nd {
            m[(3 + k, 3 + l)] = ss.a[(k, l)];
        }
    }
    let eig: Vec<_> = m.complex_eigenvalues().iter().copied().collect();
    let g = fam.eval(e).unwrap();
    let roots = feedback_charpoly(&g, &c.delta).unwrap().roots().unwrap().roots;
    match_spectra(eig.clone(), roots, 1e-6)?;
    if !eig.iter().all(|z| z.re < 0.0) {
        return Err("closed loop not stable".into());
    }
    Ok(())
}

pub const FHN: FhnParams = FhnParams {
    c: 1.0,
    tau: 1.0,
    alpha: 0.1,
    beta: 0.5,
};

/// Same checks for the two-state neuron with static gains in the loop.
pub fn fhn_linearization() -> Check {
    let m = FhnModel(FHN);
    for e in [-0.3, 0.0, 0.25] {
        let (v, w) = fhn_equilibrium(&FHN, e).map_err(|e| e.to_string())?;
        // loop closed with the static gain e
        let field = |x: [f64; 2]| {
            let mut dx = [0.0; 2];
            m.rhs(&x, e * m.loop_output(&x), &mut dx);
            dx
        };
        if field([v, w]).iter().any(|d| d.abs() >= 1e-12) {
            return Err(format!("not an equilibrium at e = {e}"));
        }
        let mut fd = Matrix2::zeros();
        for j in 0..2 {
            let h = 1e-6;
            let (mut xp, mut xm) = ([v, w], [v, w]);
            xp[j] += h;
            xm[j] -= h;
            let (fp, fm) = (field(xp), field(xm));
            for i in 0..2 {
                fd[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let mut j = FHN.jacobian(v);
        j[(0, 1)] -= e / FHN.c;
        for (a, b) in fd.iter().zip(j.iter()) {
            if (a - b).abs() > 1e-6 * b.abs().max(1e-3) {
                return Err(format!("jacobian mismatch at e = {e}"));
            }
        }
        // eigenvalues of the static-gain loop are the roots of 1 − e·g_e
        let g = linearize_fhn(&FHN, e).map_err(|e| e.to_string())?;
        let cp = g.den() - &g.num().scale(e);
        let roots = cp.roots().map_err(|e| e.to_string())?.roots;
        let eig: Vec<_> = j.complex_eigenvalues().iter().copied().collect();
        match_spectra(eig, roots, 1e-9)?;
    }
    Ok(())
}
