//! Fast checks of exact identities and elementary properties, run by the
//! `selftest` subcommand.

use std::f64::consts::PI;

use crate::algebra::{branch_x, branching_points, key_angles, Sign};
use crate::asymptotics::{c0, classify_direction, f0, green_asymptotic_fixed, h_alpha, Approach, Regime};
use crate::error::DriftCondition;
use crate::harmonic::{escape_prob_up, martin_kernel, pde_residual_of, represent};
use crate::laplace::phi;
use crate::model::{divergence_skew, presets, validate, SkewInput};
use crate::montecarlo::{boundary_measure, estimate, green_measure, simulate_paths, Functionals, Rect, SimConfig};
use crate::oracle::{green_contour, lemma_integrand, QuadratureSpec};
use crate::{CovMatrix, Drift, Error, Point, SkewVector, C64};

type Check = std::result::Result<(), String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn validation() -> Check {
    let p = presets::symmetric();
    ensure(p.is_divergence_form(), "identity covariances are in divergence form")?;
    let mut raw = p.to_raw();
    raw.mu_minus = Drift::new(1.0, 1.0);
    ensure(
        validate(&raw) == Err(Error::DriftSignViolation(DriftCondition::MinusSecondNegative)),
        "upward lower drift is rejected",
    )?;
    let mut raw = p.to_raw();
    raw.q = SkewInput::Vector(SkewVector::new(0.0, 1.0));
    ensure(matches!(validate(&raw), Err(Error::SkewOutOfRange { .. })), "q2 = 1 is rejected")
}

fn divergence_skew_values() -> Check {
    let i = CovMatrix::IDENTITY;
    ensure(divergence_skew(&i, &i) == SkewVector::new(0.0, 0.0), "equal covariances")?;
    let q = divergence_skew(&i, &CovMatrix::new(1.0, 0.0, 4.0));
    ensure(q.q1 == 0.0 && (q.q2 + 0.6).abs() < 1e-15, "diag(1,4) gives q2 = -0.6")?;
    let q = divergence_skew(&CovMatrix::new(1.0, 0.5, 1.0), &CovMatrix::new(1.0, -0.5, 1.0));
    ensure((q.q1 - 0.5).abs() < 1e-15 && q.q2 == 0.0, "opposite correlations give q1 = 0.5")
}

fn kernel_zeros() -> Check {
    let p = presets::symmetric();
    ensure(p.kernel_plus(c(0.0), c(0.0)) == c(0.0), "no constant term")?;
    ensure(p.kernel_gamma(c(0.3), c(-0.7), c(-0.7)).norm() < 1e-15, "gamma vanishes on y = z")
}

fn inverse_branches() -> Check {
    let p = presets::symmetric();
    ensure(branch_x(&p, Sign::Plus, c(0.0)).norm() < 1e-15, "X+(0) = 0")?;
    ensure((branch_x(&p, Sign::Minus, c(0.0)) - c(-2.0)).norm() < 1e-15, "X-(0) = -2")
}

fn radicand_vanishes_at_branch_points() -> Check {
    let p = presets::asymmetric();
    let bp = branching_points(&p);
    for (layer, xs) in [(p.upper(), [bp.xp_min, bp.xp_max]), (p.lower(), [bp.xm_min, bp.xm_max])] {
        for x in xs {
            let r = layer.sqrt_radicand(c(x)).norm();
            ensure(r * r < 1e-12, format!("radicand {} at {x}", r * r))?;
        }
    }
    Ok(())
}

fn symmetric_key_angles_are_degenerate() -> Check {
    ensure(
        matches!(key_angles(&presets::symmetric()), Err(Error::DegenerateBranchPoints { .. })),
        "fully symmetric parameters have no key angles",
    )
}

fn axis_start_transform() -> Check {
    let p = presets::asymmetric();
    for x in [c(-0.5), C64::new(0.05, 0.3)] {
        let up = phi(&p, Point::new(0.2, 0.0), x).map_err(err)?;
        let down = phi(&p, Point::new(0.2, -0.0), x).map_err(err)?;
        ensure(up == down, "b0 = 0 does not depend on the side")?;
    }
    Ok(())
}

fn axis_constants() -> Check {
    let p = presets::asymmetric();
    ensure(c0(&p).map_err(err)? > 0.0, "C0 > 0")?;
    let above = f0(&p, Point::new(0.3, 1e-300)).map_err(err)?;
    let below = f0(&p, Point::new(0.3, -1e-300)).map_err(err)?;
    ensure((above - below).abs() <= 1e-14 * above, "f0 pieces agree on the axis")?;
    ensure(above > 0.0, "f0 > 0")
}

fn drift_direction_kernel() -> Check {
    let p = presets::symmetric();
    for b0 in [0.0, 0.5, 2.0] {
        let h = h_alpha(&p, PI / 4.0, Point::new(0.4, b0)).map_err(err)?;
        ensure(h <= 1.0 && (h - escape_prob_up(&p, b0).map_err(err)?).abs() < 1e-14, "h equals the escape probability")?;
    }
    let a = green_asymptotic_fixed(&p, Point::new(0.3, 0.7), 10.0, PI / 4.0).map_err(err)?;
    ensure(a.rate.abs() < 1e-14 && a.r_power == -0.5, "pure power law in the drift direction")
}

fn interior_classification() -> Check {
    let p = presets::asymmetric();
    let k = key_angles(&p).map_err(err)?;
    let r = classify_direction(&p, 0.5 * (k.alpha_b + k.alpha_tilde_b), Approach::Fixed).map_err(err)?;
    ensure(matches!(r, Regime::InteriorM { .. }), format!("got {}", r.tag()))?;
    let r = classify_direction(&p, k.alpha_b, Approach::Power { c: -1.0, p: 0.5 }).map_err(err)?;
    ensure(r.tag() == "AlphaB_ii", format!("got {}", r.tag()))
}

fn constants_are_harmonic() -> Check {
    let p = presets::asymmetric();
    let one = |_: Point| Ok(1.0);
    let r = pde_residual_of(&p, &one, Point::new(0.0, 0.0), 1e-3).map_err(err)?;
    let vals = [r.transmission_flux, r.continuity, r.x_derivative_match];
    ensure(vals.iter().all(|v| v.unwrap_or(0.0) == 0.0), "constant has zero residuals")
}

fn escape_limits() -> Check {
    let p = presets::symmetric();
    ensure((escape_prob_up(&p, 0.0).map_err(err)? - 0.5).abs() < 1e-15, "symmetric start escapes up with probability 1/2")?;
    let q = presets::asymmetric();
    let rate = -2.0 * q.mu_minus().m2 / q.sigma_minus().s22;
    let (u1, u2) = (escape_prob_up(&q, -10.0).map_err(err)?, escape_prob_up(&q, -11.0).map_err(err)?);
    ensure(((u1 / u2).ln() - rate).abs() < 1e-10, "exponential decay below the axis")
}

fn martin_kernels() -> Check {
    let p = presets::asymmetric();
    let k = key_angles(&p).map_err(err)?;
    for a in [0.5 * (k.alpha_b + k.alpha_tilde_b), PI, 5.0] {
        ensure((martin_kernel(&p, a, Point::new(0.0, 0.0)).map_err(err)? - 1.0).abs() < 1e-14, "normalized at the origin")?;
    }
    let s = presets::symmetric();
    let z = Point::new(0.4, -0.3);
    let single = represent(&s, &[(1.1, h_alpha(&s, 1.1, Point::new(0.0, 0.0)).map_err(err)?)], z).map_err(err)?;
    ensure((single - h_alpha(&s, 1.1, z).map_err(err)?).abs() < 1e-14, "single atom reproduces its kernel")?;
    for i in -5..=5 {
        for j in -5..=5 {
            let v = represent(&s, &[(PI / 4.0, 1.0), (1.75 * PI, 1.0)], Point::new(i as f64, j as f64)).map_err(err)?;
            ensure(v > 0.0 && v <= 4.0, "two drift-direction atoms stay bounded")?;
        }
    }
    Ok(())
}

fn oracle_positivity() -> Check {
    let p = presets::symmetric();
    let spec = QuadratureSpec::with_tol(1e-8);
    for k in 0..20 {
        let t = Point::polar(0.5 + 0.4 * k as f64, 0.37 + 1.3 * k as f64);
        let g = green_contour(&p, Point::new(0.0, 0.5), t, &spec).map_err(err)?;
        ensure(g.value > 0.0, format!("g at {t:?} = {}", g.value))?;
    }
    Ok(())
}

fn lemma_endpoint() -> Check {
    ensure(lemma_integrand(200.0, 1.0) == 0.0, "integrand vanishes at s = 1")
}

fn simulation_basics() -> Check {
    let p = presets::symmetric();
    let mut cfg = SimConfig::new(1e-3, 2_000, 7);
    cfg.horizon = Some(3.0);
    let recs = simulate_paths(&p, Point::new(0.0, 0.0), &cfg, &Functionals::default()).map_err(err)?;
    let s = estimate(recs.iter().map(|r| r.end.b.signum()));
    ensure(s.mean.abs() <= 3.0 * s.stderr, "no preferred side")?;
    ensure(recs.iter().filter(|r| r.local_time > 0.0).count() > 1_980, "axis start collects local time")?;
    let a = estimate(recs.iter().map(|r| r.end.a));
    ensure(a.mean > 5.0 * a.stderr, "horizontal drift moves paths right")?;
    let far = green_measure(&p, Point::new(0.0, 0.5), &[Rect::new((50.0, 51.0), (50.0, 51.0))], &cfg).map_err(err)?;
    ensure(far.boxes[0].mean == 0.0, "unreachable box")?;
    ensure(boundary_measure(&p, Point::new(0.0, 0.5), (1.0, 1.0), &cfg).map_err(err)?.mean == 0.0, "empty interval")?;
    let boxes = vec![Rect::new((0.0, 1.0), (0.5, 1.0)), Rect::new((1.0, 2.0), (0.5, 1.0)), Rect::new((0.0, 2.0), (0.5, 1.0))];
    let f = Functionals { boxes, intervals: vec![(0.0, 1.0), (-1.0, 2.0)], ..Default::default() };
    for r in simulate_paths(&p, Point::new(0.0, 0.5), &cfg, &f).map_err(err)? {
        ensure((r.box_time[0] + r.box_time[1] - r.box_time[2]).abs() <= 1e-12 * (1.0 + r.box_time[2]), "box additivity")?;
        ensure(r.boundary[0] <= r.boundary[1], "interval monotonicity")?;
    }
    Ok(())
}

pub fn run_all() -> Vec<(&'static str, Check)> {
    let checks: [(&'static str, fn() -> Check); 17] = [
        ("validation", validation),
        ("divergence skew", divergence_skew_values),
        ("kernel zeros", kernel_zeros),
        ("inverse branches", inverse_branches),
        ("radicand at branch points", radicand_vanishes_at_branch_points),
        ("degenerate key angles", symmetric_key_angles_are_degenerate),
        ("transform from the axis", axis_start_transform),
        ("axis constants", axis_constants),
        ("drift-direction kernel", drift_direction_kernel),
        ("direction classification", interior_classification),
        ("constant is harmonic", constants_are_harmonic),
        ("escape limits", escape_limits),
        ("martin kernels", martin_kernels),
        ("oracle positivity", oracle_positivity),
        ("lemma endpoint", lemma_endpoint),
        ("simulation basics", simulation_basics),
        ("pole absent for divergence form", || {
            ensure(!crate::algebra::find_pole(&presets::asymmetric()).map_err(err)?.present, "no pole")
        }),
    ];
    checks.iter().map(|(name, f)| (*name, f())).collect()
}
