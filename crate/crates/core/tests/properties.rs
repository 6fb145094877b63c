//! Randomized checks of root finding, norms and fixed-plant bounds.

mod common;

use common::{random_plant, random_roots};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rir_core::poly::{RealPolynomial, RootTag, TAU_AXIS};
use rir_core::rir_fixed::{
    allpass_from_critical, default_eps_grid, omega_c_stability, strictify, sweep_upper_bound, SweepConfig,
};
use rir_core::tf::{NormConfig, RationalTF};

#[test]
fn roots_and_classify_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let deg = rng.gen_range(1..=8);
        let coeffs: Vec<f64> = (0..=deg).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let p = RealPolynomial::new(coeffs);
        if p.degree() == 0 {
            continue;
        }
        let roots = p.roots().unwrap();
        assert_eq!(roots.len(), p.degree());
        let counts = p.classify(TAU_AXIS).unwrap();
        let tags = roots.tags(TAU_AXIS);
        assert_eq!(counts.olhp, tags.iter().filter(|t| **t == RootTag::Olhp).count());
        assert_eq!(counts.orhp, tags.iter().filter(|t| **t == RootTag::Orhp).count());
        assert_eq!(counts.axis, tags.iter().filter(|t| **t == RootTag::Axis).count());
        for r in &roots.roots {
            let backward = p.eval_complex(*r).norm() / p.abs_eval(*r);
            assert!(backward <= 1e-9, "residual {backward} for {p} at {r}");
        }
    }
}

#[test]
fn hurwitz_matches_root_classification() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..500 {
        let deg = rng.gen_range(1..=8);
        let stable: Vec<Complex64> = random_roots(&mut rng, deg, 0.05)
            .into_iter()
            .map(|r| Complex64::new(-r.re.abs(), r.im))
            .collect();
        let p = RealPolynomial::from_roots(&stable).scale(rng.gen_range(0.1..10.0));
        assert!(p.is_hurwitz().unwrap(), "{p}");
        let c = p.classify(TAU_AXIS).unwrap();
        assert_eq!((c.olhp, c.orhp, c.axis), (p.degree(), 0, 0));

        // flipping one real part breaks both
        let mut flipped = stable.clone();
        flipped[0].re = -flipped[0].re;
        if flipped[0].im != 0.0 {
            flipped[1].re = -flipped[1].re;
        }
        let q = RealPolynomial::from_roots(&flipped);
        assert!(!q.is_hurwitz().unwrap());
        assert!(q.classify(TAU_AXIS).unwrap().orhp > 0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn product_roots_recovered(rs in prop::collection::vec(-4.0f64..4.0, 1..7)) {
        let p = RealPolynomial::from_real_roots(&rs);
        let found = p.roots().unwrap();
        for r in &rs {
            let best = found.roots.iter().map(|z| (z - Complex64::new(*r, 0.0)).norm()).fold(f64::INFINITY, f64::min);
            // clustered roots lose accuracy like ε^(1/m)
            prop_assert!(best < 1e-4, "root {} missing from {:?}", r, found.roots);
        }
    }

    #[test]
    fn allpass_is_flat(re in -3.0f64..3.0, im in -3.0f64..3.0, w in 0.01f64..10.0) {
        let dc = Complex64::new(re, im);
        prop_assume!(dc.norm() > 1e-3);
        if let Ok(ap) = allpass_from_critical(dc, w) {
            let tf = ap.to_tf();
            for k in 0..50 {
                let om = 10f64.powf(-3.0 + 6.0 * k as f64 / 49.0);
                let v = tf.freq_response(om).unwrap().norm();
                prop_assert!((v - ap.hinf()).abs() <= 1e-10 * ap.hinf());
            }
            prop_assert!((ap.eval(Complex64::new(0.0, w)) - dc).norm() <= 1e-10 * dc.norm());
        }
    }
}

#[test]
fn norm_dominates_pointwise_gain() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = NormConfig::default();
    for _ in 0..50 {
        let deg = rng.gen_range(1..=6);
        let poles: Vec<Complex64> = random_roots(&mut rng, deg, 0.05)
            .into_iter()
            .map(|r| Complex64::new(-r.re.abs(), r.im))
            .collect();
        let g = RationalTF::new(
            RealPolynomial::constant(rng.gen_range(0.5..3.0)),
            RealPolynomial::from_roots(&poles),
        )
        .unwrap();
        let n = g.linf_norm(&cfg).unwrap().linf;
        for _ in 0..10_000 {
            let w = 10f64.powf(rng.gen_range(-4.0..4.0));
            assert!(g.freq_response(w).unwrap().norm() <= n * (1.0 + 1e-9));
        }
    }
}

#[test]
fn norm_matches_dense_sweep() {
    common::norm_matches_dense_sweep(4, 200, 1_000_000).unwrap();
}

fn unstable_pip_corpus(seed: u64, n: usize) -> Vec<RationalTF> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < n {
        let deg = rng.gen_range(1..=4);
        let g = random_plant(&mut rng, deg, 0.1);
        if g.pole_counts(TAU_AXIS).unwrap().orhp > 0 && g.pip(TAU_AXIS).unwrap() && g.is_strictly_proper() {
            out.push(g);
        }
    }
    out
}

#[test]
fn bound_sandwich_and_certificates() {
    let cfg = SweepConfig::default();
    let corpus = unstable_pip_corpus(5, 100);
    corpus.par_iter().for_each(|g| {
        let r = sweep_upper_bound(g, &cfg.grid(), &cfg).unwrap().result;
        assert!(r.bounds.rho_p <= r.rho_upper * (1.0 + 1e-9), "{g:?}");
        assert!(r.rho_lower <= r.rho_upper * (1.0 + 1e-9));
        if r.rho_upper.is_finite() {
            assert!(r.certificate.is_some());
        }
        if r.exact {
            let c = r.certificate.unwrap();
            let d0 = c.allpass.to_tf();
            assert!(omega_c_stability(g, &d0, c.omega_c).unwrap().omega_c_stable);
            let s = strictify(g, &d0, &default_eps_grid(c.allpass.hinf())).unwrap();
            assert!(s.eps.abs() <= 1e-3 * c.allpass.hinf().max(1.0), "eps {}", s.eps);
            assert!(s.hinf <= r.rho_upper * (1.0 + 2e-3));
        }
    });
}

#[test]
fn scaling_covariance() {
    let cfg = SweepConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for g in unstable_pip_corpus(7, 20) {
        let c: f64 = rng.gen_range(0.1..10.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let r1 = sweep_upper_bound(&g, &cfg.grid(), &cfg).unwrap().result;
        let r2 = sweep_upper_bound(&g.scale(c), &cfg.grid(), &cfg).unwrap().result;
        let s = 1.0 / c.abs();
        assert!((r2.bounds.rho_p - r1.bounds.rho_p * s).abs() <= 1e-9 * r2.bounds.rho_p);
        if r1.rho_upper.is_finite() {
            assert!((r2.rho_upper - r1.rho_upper * s).abs() <= 1e-8 * r2.rho_upper);
            let (a1, a2) = (r1.certificate.unwrap().allpass, r2.certificate.unwrap().allpass);
            assert!((a2.b.abs() - a1.b.abs() * s).abs() <= 1e-8 * a2.b.abs());
        } else {
            assert!(r2.rho_upper.is_infinite());
        }
    }
}

#[test]
fn pip_corpus_matches_finite_bounds() {
    let cfg = SweepConfig::default();
    let mk = |zeros: &[f64], poles: &[f64]| {
        RationalTF::new(
            RealPolynomial::from_real_roots(zeros),
            RealPolynomial::from_real_roots(poles),
        )
        .unwrap()
    };
    let cases = [
        (mk(&[], &[1.0]), true),
        (mk(&[], &[1.0, -2.0]), true),
        (
            RationalTF::new(RealPolynomial::constant(1.0), RealPolynomial::new(vec![1.0, -0.2, 1.0])).unwrap(),
            true,
        ),
        (mk(&[1.0], &[2.0, -1.0]), false),
        (mk(&[1.0], &[2.0, -1.0, -3.0]), false),
        (mk(&[3.0], &[1.0, -2.0]), true),
    ];
    for (g, pip) in cases {
        assert_eq!(g.pip(TAU_AXIS).unwrap(), pip, "{g:?}");
        let r = sweep_upper_bound(&g, &cfg.grid(), &cfg).unwrap().result;
        assert_eq!(r.rho_upper.is_finite(), pip, "{g:?}");
    }
}

#[test]
fn condition2_batch() {
    common::condition2_batch(8, 500).unwrap();
}

#[test]
fn condition1_batch() {
    common::condition1_batch(9, 500).unwrap();
}
