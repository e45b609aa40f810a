mod common;

use std::f64::consts::PI;

use common::{params, skewed_params};
use layered_green::algebra::{branch_y, branching_points, find_pole, Sign};
use layered_green::asymptotics::{c0, f0};
use layered_green::laplace::*;
use layered_green::model::presets;
use layered_green::montecarlo::{estimate, simulate_paths, Functionals, SimConfig};
use layered_green::{ModelParams, Point, C64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn source(z0: Point, x: C64, y: C64, z: C64) -> C64 {
    let mut e = x * z0.a;
    if z0.b > 0.0 {
        e += y * z0.b;
    } else if z0.b < 0.0 {
        e += z * z0.b;
    }
    e.exp()
}

fn random_off_cut(p: &ModelParams, rng: &mut ChaCha8Rng) -> C64 {
    let bp = branching_points(p);
    loop {
        let x = C64::new(6.0 * rng.random::<f64>() - 3.0, 4.0 * rng.random::<f64>() - 2.0);
        let on_cut = x.im.abs() < 1e-3 && (x.re >= bp.x_b - 1e-3 || x.re <= bp.xtilde_b + 1e-3);
        let near_pole = find_pole(p).unwrap().x_star.is_some_and(|s| (x - s).norm() < 1e-2);
        if !on_cut && !near_pole {
            return x;
        }
    }
}

#[test]
fn functional_equation_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for p in [presets::asymmetric(), presets::with_pole(), presets::drifted()] {
        for z0 in [Point::new(0.3, 0.6), Point::new(-0.2, -0.4), Point::new(0.1, 0.0)] {
            for _ in 0..100 {
                let x = random_off_cut(&p, &mut rng);
                let y = C64::new(2.0 * rng.random::<f64>() - 1.0, rng.random::<f64>() - 0.5);
                let z = C64::new(2.0 * rng.random::<f64>() - 1.0, rng.random::<f64>() - 0.5);
                let f = phi(&p, z0, x).unwrap();
                let terms = [
                    p.kernel_minus(x, z) * phi_minus(&p, z0, x, z).unwrap(),
                    p.kernel_plus(x, y) * phi_plus(&p, z0, x, y).unwrap(),
                    p.kernel_gamma(x, y, z) * f,
                    source(z0, x, y, z),
                ];
                let sum: C64 = terms.iter().sum();
                let scale: f64 = terms.iter().map(|t| t.norm()).sum();
                assert!(sum.norm() <= 1e-12 * scale, "{x} {y} {z}: {sum}");
            }
        }
    }
}

#[test]
fn symmetric_reference_values() {
    let p = presets::symmetric();
    let v = phi(&p, Point::new(0.0, 0.0), c(0.0)).unwrap();
    // γ(0, −2, 2) = (y − z)/2 = −2.
    assert!((v - c(0.5)).norm() < 1e-15);
    for x in [c(-0.7), c(0.2), C64::new(0.1, 0.5)] {
        let up = phi(&p, Point::new(0.4, 0.0), x).unwrap();
        let down = phi(&p, Point::new(0.4, -0.0), x).unwrap();
        assert_eq!(up, down);
    }
}

#[test]
fn upper_transform_is_finite_at_the_kernel_zero() {
    let p = presets::asymmetric();
    let z0 = Point::new(0.2, 0.5);
    let x = c(-0.3);
    let ym = branch_y(&p, Sign::Minus, x);
    let vals: Vec<C64> = (2..=6).map(|k| phi_plus(&p, z0, x, ym + 10f64.powi(-k)).unwrap()).collect();
    let diffs: Vec<f64> = vals.windows(2).map(|w| (w[0] - w[1]).norm()).collect();
    assert!(diffs.windows(2).all(|d| d[1] < 0.2 * d[0] || d[1] < 1e-9), "{diffs:?}");
    assert!(vals.iter().all(|v| v.norm() < 1e3));
}

#[test]
fn upper_transform_matches_monte_carlo() {
    let p = presets::symmetric();
    let z0 = Point::new(0.0, 1.0);
    let v = phi_plus(&p, z0, c(-0.1), c(-0.5)).unwrap();
    assert!(v.im == 0.0 && v.re > 0.0);
    let f = Functionals { upper_transform: vec![(-0.1, -0.5)], ..Default::default() };
    let recs = simulate_paths(&p, z0, &SimConfig::new(1e-3, 20_000, 17), &f).unwrap();
    let e = estimate(recs.iter().map(|r| r.upper_transform[0]));
    assert!((e.mean - v.re).abs() < 3.0 * e.stderr, "{e:?} vs {}", v.re);
}

#[test]
fn holomorphy_and_reflection() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for p in [presets::asymmetric(), presets::with_pole()] {
        let z0 = Point::new(0.3, 0.4);
        for _ in 0..200 {
            let x = random_off_cut(&p, &mut rng);
            let h = 1e-5;
            let f = |w: C64| phi(&p, z0, w).unwrap();
            let dx = (f(x + h) - f(x - h)) / (2.0 * h);
            let dy = (f(x + C64::new(0.0, h)) - f(x - C64::new(0.0, h))) / (2.0 * h);
            // Cauchy–Riemann: ∂_y f = i ∂_x f.
            let cr = dy - C64::new(0.0, 1.0) * dx;
            assert!(cr.norm() <= 1e-6 * (1.0 + dx.norm()), "{x}: {cr}");
            assert!((f(x.conj()) - f(x).conj()).norm() <= 1e-12 * f(x).norm());
        }
    }
}

#[test]
fn residue_at_reference_pole() {
    let p = presets::with_pole();
    let r = residue_at_pole(&p, Point::new(0.0, 0.0)).unwrap();
    let xs = 6.0 / 17.0;
    let h = 1e-6;
    let fd = (pole_function(&p, xs + h) - pole_function(&p, xs - h)) / (2.0 * h);
    assert!(fd > 0.0);
    assert!((r + 1.0 / fd).abs() < 1e-8);
    assert!((r + 7.0 / 51.0).abs() < 1e-13);
    for b0 in [40.0, -40.0] {
        assert!(residue_at_pole(&p, Point::new(0.0, b0)).unwrap().abs() < 1e-12);
    }
}

fn pole_function(p: &ModelParams, x: f64) -> f64 {
    layered_green::algebra::pole_function(p, c(x)).re
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 50, ..ProptestConfig::default() })]

    #[test]
    fn transform_is_positive_between_the_branching_points(p in params(), a0 in -1.0f64..1.0, b0 in -1.0f64..1.0) {
        let bp = branching_points(&p);
        for k in 1..100 {
            let x = bp.xtilde_b + (bp.x_b - bp.xtilde_b) * k as f64 / 100.0;
            prop_assert!(pole_function(&p, x) < 0.0);
            prop_assert!(phi(&p, Point::new(a0, b0), c(x)).unwrap().re > 0.0);
        }
    }

    #[test]
    fn sqrt_coefficient_is_the_axis_constant(p in params(), a0 in -1.0f64..1.0, b0 in -1.0f64..1.0) {
        let z0 = Point::new(a0, b0);
        let e = expansion_at_xb(&p, z0).unwrap();
        let expect = -2.0 * PI.sqrt() * 0.5 * p.s22_sum() * c0(&p).unwrap() * f0(&p, z0).unwrap();
        prop_assert!((e.sqrt_coefficient - expect).abs() <= 1e-10 * expect.abs());
    }

    #[test]
    fn general_skew_keeps_the_functional_equation(p in skewed_params(), seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_off_cut(&p, &mut rng);
        let (y, z) = (C64::new(0.3, 0.2), C64::new(-0.4, 0.1));
        let z0 = Point::new(0.1, 0.3);
        if let (Ok(f), Ok(fp), Ok(fm)) = (phi(&p, z0, x), phi_plus(&p, z0, x, y), phi_minus(&p, z0, x, z)) {
            let terms = [p.kernel_minus(x, z) * fm, p.kernel_plus(x, y) * fp, p.kernel_gamma(x, y, z) * f, source(z0, x, y, z)];
            let sum: C64 = terms.iter().sum();
            let scale: f64 = terms.iter().map(|t| t.norm()).sum();
            prop_assert!(sum.norm() <= 1e-12 * scale);
        }
    }
}
