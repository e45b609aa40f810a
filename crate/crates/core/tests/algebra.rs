mod common;

use std::f64::consts::{PI, TAU};

use common::{params, skewed_params};
use layered_green::algebra::*;
use layered_green::model::presets;
use layered_green::{CovMatrix, Drift, Error, Half, ModelParams, C64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Root of a sign change of `f` on `[lo, hi]` by plain bisection.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo) < 0.0;
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if (f(m) < 0.0) == flo {
            lo = m;
        } else {
            hi = m;
        }
    }
    0.5 * (lo + hi)
}

/// Maximum of `cos α·v₁ + sin α·v₂` over the ellipse `½vᵀΣv + μ·v = 0`, by a
/// uniform grid on its Cholesky parametrization with parabolic refinement.
fn grid_argmax(s: &CovMatrix, mu: Drift, alpha: f64, n: usize) -> (f64, f64) {
    let sol = s.solve([mu.m1, mu.m2]);
    let centre = [-sol[0], -sol[1]];
    let radius = (mu.m1 * sol[0] + mu.m2 * sol[1]).sqrt();
    // Σ = LLᵀ and v = centre + radius·L^{−T}u for unit u.
    let l11 = s.s11.sqrt();
    let l21 = s.s12 / l11;
    let l22 = (s.s22 - l21 * l21).sqrt();
    let point = |t: f64| {
        let (u1, u2) = (t.cos(), t.sin());
        let w2 = u2 / l22;
        let w1 = (u1 - l21 * w2) / l11;
        (centre[0] + radius * w1, centre[1] + radius * w2)
    };
    let value = |t: f64| {
        let (x, y) = point(t);
        alpha.cos() * x + alpha.sin() * y
    };
    let h = TAU / n as f64;
    let best = (0..n).max_by(|&i, &j| value(i as f64 * h).total_cmp(&value(j as f64 * h))).unwrap();
    let t = best as f64 * h;
    let (fm, f0, fp) = (value(t - h), value(t), value(t + h));
    let shift = 0.5 * h * (fm - fp) / (fm - 2.0 * f0 + fp);
    point(t + shift)
}

fn random_complex(rng: &mut ChaCha8Rng) -> C64 {
    let r = 10.0 * rng.random::<f64>().sqrt();
    let t = TAU * rng.random::<f64>();
    C64::new(r * t.cos(), r * t.sin())
}

fn off_cut(x: C64, (lo, hi): (f64, f64)) -> bool {
    !(x.im.abs() < 1e-6 && (x.re <= lo + 1e-6 || x.re >= hi - 1e-6))
}

#[test]
fn branches_solve_the_kernels_at_random_complex_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for p in [presets::asymmetric(), presets::with_pole(), presets::drifted()] {
        let (up, low) = (p.upper().branch_interval(), p.lower().branch_interval());
        let mut checked = 0;
        while checked < 1000 {
            let x = random_complex(&mut rng);
            if !off_cut(x, up) || !off_cut(x, low) {
                continue;
            }
            checked += 1;
            for s in [Sign::Plus, Sign::Minus] {
                assert!(p.kernel_plus(x, branch_y(&p, s, x)).norm() <= 1e-10, "{x}");
                assert!(p.kernel_minus(x, branch_z(&p, s, x)).norm() <= 1e-10, "{x}");
            }
            let sp = p.sigma_plus();
            let vieta = (sp.s11 * x * x + 2.0 * p.mu_plus().m1 * x) / sp.s22;
            let prod = branch_y(&p, Sign::Plus, x) * branch_y(&p, Sign::Minus, x);
            assert!((prod - vieta).norm() <= 1e-10 * (1.0 + vieta.norm()));
        }
    }
}

#[test]
fn symmetric_reference_branches() {
    let p = presets::symmetric();
    let y_plus = bisect(|y| p.kernel_plus(c(0.1), c(y)).re, -1.0, 1.0);
    assert!((branch_y(&p, Sign::Plus, c(0.1)).re - y_plus).abs() < 1e-12);
    assert!((y_plus - (-1.0 + 0.79f64.sqrt())).abs() < 1e-12);
    for x in [-2.0f64, -0.3, 0.0, 0.2, 0.4] {
        let r = (1.0 - 2.0 * x - x * x).sqrt();
        assert!((branch_y(&p, Sign::Plus, c(x)).re - (-1.0 + r)).abs() < 1e-12);
        assert!((branch_y(&p, Sign::Minus, c(x)).re - (-1.0 - r)).abs() < 1e-12);
        assert!((branch_z(&p, Sign::Plus, c(x)).re - (1.0 + r)).abs() < 1e-12);
        assert!((branch_z(&p, Sign::Minus, c(x)).re - (1.0 - r)).abs() < 1e-12);
    }
    assert!(branch_x(&p, Sign::Plus, c(0.0)).norm() < 1e-15);
    assert!((branch_x(&p, Sign::Minus, c(0.0)) - c(-2.0)).norm() < 1e-15);
    assert!((branch_x(&p, Sign::Plus, c(-0.5)).re - (-1.0 + 1.75f64.sqrt())).abs() < 1e-12);
}

#[test]
fn lower_branch_at_origin() {
    let p = presets::asymmetric();
    assert_eq!(branch_y(&p, Sign::Plus, c(0.0)), c(0.0));
    let expect = -2.0 * p.mu_plus().m2 / p.sigma_plus().s22;
    assert!((branch_y(&p, Sign::Minus, c(0.0)).re - expect).abs() < 1e-15);
}

#[test]
fn inverse_branch_on_the_first_quarter_arc() {
    for p in [presets::symmetric(), presets::asymmetric(), presets::drifted()] {
        let bp = branching_points(&p);
        let top = saddle_x(&p, PI / 2.0).unwrap();
        for k in 1..100 {
            let x = top + (bp.xp_max - top) * k as f64 / 100.0;
            let y = branch_y(&p, Sign::Plus, c(x));
            assert!((branch_x(&p, Sign::Plus, y).re - x).abs() < 1e-10);
        }
    }
}

#[test]
fn branch_points_match_quadratic_roots() {
    let bp = branching_points(&presets::symmetric());
    assert!((bp.xp_max - (2f64.sqrt() - 1.0)).abs() < 1e-12);
    assert!((bp.xp_min - (-1.0 - 2f64.sqrt())).abs() < 1e-12);
    let bp = branching_points(&presets::asymmetric());
    let r = 5f64.sqrt() / 2.0;
    assert!((bp.xm_max - (r - 1.0)).abs() < 1e-12);
    assert!((bp.xm_min - (-1.0 - r)).abs() < 1e-12);
    assert_eq!(bp.x_b, bp.xm_max);
    assert_eq!(bp.xtilde_b, bp.xm_min);
    // Bisection on the sign change of the radicand −4x² − 8x + 1.
    let root = bisect(|x| -4.0 * x * x - 8.0 * x + 1.0, 0.0, 1.0);
    assert!((bp.xm_max - root).abs() < 1e-12);
}

#[test]
fn saddle_examples() {
    let p = presets::symmetric();
    let s = saddle(&p, PI / 4.0).unwrap();
    assert!(s.x.abs() < 1e-12 && s.second.abs() < 1e-12 && s.half == Half::Upper);
    let s = saddle(&p, PI / 2.0).unwrap();
    assert!((s.x + 1.0).abs() < 1e-12 && (s.second - (2f64.sqrt() - 1.0)).abs() < 1e-12);
    let s = saddle(&p, 5.0 * PI / 4.0).unwrap();
    assert!((s.x + 2.0).abs() < 1e-12 && s.second.abs() < 1e-12 && s.half == Half::Lower);
    let (gx, gy) = grid_argmax(p.sigma_plus(), p.mu_plus(), PI / 2.0, 1_000_000);
    assert!((gx + 1.0).abs() < 1e-6 && (gy - (2f64.sqrt() - 1.0)).abs() < 1e-6);
    assert!(matches!(saddle(&p, 0.0), Err(Error::AngleOnAxis { .. })));
    assert!(matches!(saddle(&p, PI), Err(Error::AngleOnAxis { .. })));
}

#[test]
fn saddle_matches_grid_argmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let cov = |rng: &mut ChaCha8Rng| {
            let (a, b, rho) = (0.3 + 2.7 * rng.random::<f64>(), 0.3 + 2.7 * rng.random::<f64>(), 1.6 * rng.random::<f64>() - 0.8);
            CovMatrix::new(a, rho * (a * b).sqrt(), b)
        };
        let mut d = || 0.2 + 1.8 * rng.random::<f64>();
        let (m1, m2, m3, m4) = (d(), d(), d(), d());
        let p = ModelParams::new(cov(&mut rng), cov(&mut rng), Drift::new(m1, m2), Drift::new(m3, -m4), None).unwrap();
        for _ in 0..50 {
            let alpha = loop {
                let a = TAU * rng.random::<f64>();
                if a.sin().abs() > 1e-3 {
                    break a;
                }
            };
            let s = saddle(&p, alpha).unwrap();
            let (sig, mu) = match s.half {
                Half::Upper => (p.sigma_plus(), p.mu_plus()),
                Half::Lower => (p.sigma_minus(), p.mu_minus()),
            };
            let (gx, gy) = grid_argmax(sig, mu, alpha, 100_000);
            assert!((gx - s.x).abs() < 1e-4 && (gy - s.second).abs() < 1e-4, "{alpha}: ({gx}, {gy}) vs {s:?}");
        }
    }
}

#[test]
fn asymmetric_classification() {
    let p = presets::asymmetric();
    assert_eq!(case_classify(&p).unwrap(), CaseTag::A);
    let k = key_angles(&p).unwrap();
    let expect = (0.75f64.sqrt()).atan2(1.0 + branching_points(&p).xm_max);
    assert!((k.alpha_b - expect).abs() < 1e-10);
    assert!((k.alpha_b - 0.65906).abs() < 1e-5);
    let m = direction_set(&p).unwrap();
    assert_eq!(m.intervals.len(), 2);
    assert!((m.intervals[0].0 - k.alpha_b).abs() < 1e-14 && (m.intervals[0].1 - k.alpha_tilde_b).abs() < 1e-14);
    assert_eq!(m.intervals[1], (PI, TAU));
    assert!(matches!(key_angles(&presets::symmetric()), Err(Error::DegenerateBranchPoints { .. })));
}

#[test]
fn reference_pole() {
    let p = presets::with_pole();
    let info = find_pole(&p).unwrap();
    assert!(info.present);
    let xs = info.x_star.unwrap();
    assert!((xs - 6.0 / 17.0).abs() < 1e-12);
    assert!((branch_y(&p, Sign::Minus, c(xs)).re + 24.0 / 17.0).abs() < 1e-12);
    assert!((branch_z(&p, Sign::Plus, c(xs)).re - 24.0 / 17.0).abs() < 1e-12);
    assert!((info.alpha_star_plus.unwrap() - 7f64.atan2(23.0)).abs() < 1e-10);
    assert!((info.alpha_star_plus.unwrap() - 0.295441).abs() < 1e-6);
    // Oracle: the pole condition reduces to 4x − 1 − √(1 − 2x − x²) = 0.
    let root = bisect(|x| 4.0 * x - 1.0 - (1.0 - 2.0 * x - x * x).sqrt(), 0.0, 0.4142);
    assert!((root - xs).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    #[test]
    fn branch_point_invariants(p in skewed_params()) {
        let bp = branching_points(&p);
        prop_assert!(bp.xp_min < 0.0 && 0.0 < bp.xp_max);
        prop_assert!(bp.xm_min < 0.0 && 0.0 < bp.xm_max);
        prop_assert!(bp.y_min < 0.0 && 0.0 < bp.y_max);
        prop_assert_eq!(bp.x_b, bp.xp_max.min(bp.xm_max));
        prop_assert_eq!(bp.xtilde_b, bp.xp_min.max(bp.xm_min));
        // Discriminant of γ₊(x, ·) vanishes at the branch points.
        let (s, m) = (p.sigma_plus(), p.mu_plus());
        for x in [bp.xp_min, bp.xp_max] {
            let disc = (s.s12 * x + m.m2).powi(2) - s.s22 * (s.s11 * x * x + 2.0 * m.m1 * x);
            let scale = ((s.s12 * x).abs() + m.m2.abs()).powi(2) + s.s22 * (s.s11 * x * x + 2.0 * (m.m1 * x).abs());
            prop_assert!(disc.abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn saddle_is_a_tangency(p in skewed_params(), alpha in 0.01f64..TAU) {
        prop_assume!(alpha.sin().abs() > 1e-3);
        let s = saddle(&p, alpha).unwrap();
        let layer = p.layer(s.half);
        prop_assert!(layer.kernel_re(s.x, s.second).abs() <= 1e-10);
        let g = layer.gradient(s.x, s.second);
        let n = g[0].hypot(g[1]);
        prop_assert!((alpha.cos() * g[1] - alpha.sin() * g[0]).abs() <= 1e-10 * n);
        prop_assert!(alpha.cos() * g[0] + alpha.sin() * g[1] > 0.0);
    }

    #[test]
    fn saddle_abscissa_decreases_on_the_upper_arc(p in skewed_params()) {
        let xs: Vec<f64> = (1..=100).map(|k| saddle_x(&p, PI * k as f64 / 101.0).unwrap()).collect();
        prop_assert!(xs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn key_angle_invariants(p in params()) {
        let bp = branching_points(&p);
        if let Ok(k) = key_angles(&p) {
            prop_assert!((saddle_x(&p, k.alpha_b).unwrap() - bp.x_b).abs() <= 1e-10);
            prop_assert!((saddle_x(&p, k.alpha_tilde_b).unwrap() - bp.xtilde_b).abs() <= 1e-10);
            let m = p.mu_plus();
            prop_assert!((k.alpha_mu_plus - m.m2.atan2(m.m1)).abs() <= 1e-12);
            prop_assert!(k.alpha_mu_plus > 0.0 && k.alpha_mu_plus < PI / 2.0);
            prop_assert!(k.alpha_mu_minus > 1.5 * PI && k.alpha_mu_minus < TAU);
            for a in [k.alpha_mu_plus, k.alpha_mu_minus] {
                let s = saddle(&p, a).unwrap();
                prop_assert!(s.x.abs() <= 1e-10 && s.second.abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn direction_set_agrees_with_the_pointwise_test(p in params()) {
        let bp = branching_points(&p);
        if let Ok(m) = direction_set(&p) {
            for k in 0..1000 {
                let a = TAU * (k as f64 + 0.5) / 1000.0;
                if a.sin().abs() < 1e-9 {
                    continue;
                }
                let x = saddle_x(&p, a).unwrap();
                // Skip angles whose saddle sits on a branching point up to rounding.
                if (x - bp.x_b).abs() < 1e-9 || (x - bp.xtilde_b).abs() < 1e-9 {
                    continue;
                }
                let pointwise = bp.xtilde_b <= x && x <= bp.x_b;
                prop_assert_eq!(m.contains(a), pointwise, "{}", a);
                prop_assert_eq!(in_m(&p, a), pointwise, "{}", a);
            }
        }
    }

    #[test]
    fn divergence_form_has_no_pole(p in params()) {
        prop_assert!(!find_pole(&p).unwrap().present);
    }

    #[test]
    fn pole_is_unique_and_solves_the_system(p in skewed_params()) {
        let bp = branching_points(&p);
        let f = |x: f64| pole_function(&p, c(x)).re;
        let n = 10_000;
        let vals: Vec<f64> = (1..n).map(|k| f(bp.xtilde_b + (bp.x_b - bp.xtilde_b) * k as f64 / n as f64)).collect();
        let changes = vals.windows(2).filter(|w| (w[0] < 0.0) != (w[1] < 0.0)).count();
        prop_assert!(changes <= 1);
        match find_pole(&p) {
            Ok(info) if info.present => {
                let xs = info.x_star.unwrap();
                let (y, z) = (branch_y(&p, Sign::Minus, c(xs)), branch_z(&p, Sign::Plus, c(xs)));
                prop_assert!(p.kernel_gamma(c(xs), y, z).norm() <= 1e-12);
                prop_assert!(p.kernel_plus(c(xs), y).norm() <= 1e-10);
                prop_assert!(p.kernel_minus(c(xs), z).norm() <= 1e-10);
                prop_assert_eq!(changes, 1);
            }
            Ok(_) => prop_assert_eq!(changes, 0),
            Err(e) => {
                let expected = matches!(e, Error::PoleAtBranchPoint { .. } | Error::PoleAtZero);
                prop_assert!(expected);
            }
        }
    }
}
