//! Branch functions of the kernels, branching points, the saddle map, the key
//! angles, the direction set `M` and the pole of the transform for general `q`.
//!
//! Square roots of the radicands are taken with the principal branch, so every
//! branch function is continuous off the real half-lines outside its branching
//! interval. A real argument lying on a cut returns the limit from the upper
//! half-plane.

use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Half, Layer, ModelParams, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl Layer {
    /// Roots `(w_min, w_max)` in `x` of the radicand of the branches `w(x)`.
    pub fn branch_interval(&self) -> (f64, f64) {
        let s = &self.sigma;
        let det = s.det();
        let b = self.mu.m2 * s.s12 - self.mu.m1 * s.s22;
        let d = (b * b + det * self.mu.m2 * self.mu.m2).sqrt();
        let prod = -self.mu.m2 * self.mu.m2 / det;
        if b >= 0.0 {
            let hi = (b + d) / det;
            (prod / hi, hi)
        } else {
            let lo = (b - d) / det;
            (lo, prod / lo)
        }
    }

    /// Square root of the radicand `det·(x − x_min)(x_max − x)`.
    pub fn sqrt_radicand(&self, x: C64) -> C64 {
        let (lo, hi) = self.branch_interval();
        let det = self.sigma.det();
        if x.im == 0.0 {
            let r = det * (x.re - lo) * (hi - x.re);
            return if x.re > hi {
                C64::new(0.0, -(-r).max(0.0).sqrt())
            } else if x.re < lo {
                C64::new(0.0, (-r).max(0.0).sqrt())
            } else {
                C64::new(r.max(0.0).sqrt(), 0.0)
            };
        }
        det.sqrt() * (x - lo).sqrt() * (hi - x).sqrt()
    }

    fn radicand_derivative(&self, x: C64) -> C64 {
        let s = &self.sigma;
        let b = self.mu.m2 * s.s12 - self.mu.m1 * s.s22;
        -2.0 * s.det() * x + 2.0 * b
    }

    /// Root `w±(x)` of the kernel in its second variable.
    pub fn branch(&self, sign: Sign, x: C64) -> C64 {
        let s = &self.sigma;
        (-s.s12 * x - self.mu.m2 + sign.factor() * self.sqrt_radicand(x)) / s.s22
    }

    /// `d w±/dx`; infinite at the branching points.
    pub fn branch_derivative(&self, sign: Sign, x: C64) -> C64 {
        let s = &self.sigma;
        let r = self.sqrt_radicand(x);
        (-s.s12 + sign.factor() * self.radicand_derivative(x) / (2.0 * r)) / s.s22
    }

    /// Layer with the roles of the two coordinates exchanged.
    pub fn transposed(&self) -> Layer {
        let s = &self.sigma;
        Layer {
            sigma: crate::model::CovMatrix::new(s.s22, s.s12, s.s11),
            mu: crate::model::Drift::new(self.mu.m2, self.mu.m1),
        }
    }

    /// Point of the ellipse `{kernel = 0}` maximising `cos α·x + sin α·w`.
    pub fn saddle_point(&self, alpha: f64) -> (f64, f64) {
        let s = &self.sigma;
        let mu = [self.mu.m1, self.mu.m2];
        let w = s.solve(mu);
        let e = [alpha.cos(), alpha.sin()];
        let u = s.solve(e);
        let t = ((mu[0] * w[0] + mu[1] * w[1]) / (e[0] * u[0] + e[1] * u[1])).sqrt();
        (-w[0] + t * u[0], -w[1] + t * u[1])
    }

    /// Derivative of [`Layer::saddle_point`] with respect to `α`.
    pub fn saddle_derivative(&self, alpha: f64) -> (f64, f64) {
        let s = &self.sigma;
        let mu = [self.mu.m1, self.mu.m2];
        let w = s.solve(mu);
        let k = (mu[0] * w[0] + mu[1] * w[1]).sqrt();
        let e = [alpha.cos(), alpha.sin()];
        let de = [-alpha.sin(), alpha.cos()];
        let u = s.solve(e);
        let du = s.solve(de);
        let es = e[0] * u[0] + e[1] * u[1];
        let t = k / es.sqrt();
        let c = k * (de[0] * u[0] + de[1] * u[1]) / (es * es.sqrt());
        (t * du[0] - c * u[0], t * du[1] - c * u[1])
    }
}

pub fn branch_y(params: &ModelParams, sign: Sign, x: C64) -> C64 {
    params.upper().branch(sign, x)
}

pub fn branch_z(params: &ModelParams, sign: Sign, x: C64) -> C64 {
    params.lower().branch(sign, x)
}

/// Roots in `x` of `γ₊(x, y) = 0`.
pub fn branch_x(params: &ModelParams, sign: Sign, y: C64) -> C64 {
    params.upper().transposed().branch(sign, y)
}

/// `Y⁻(x)` on the real segment, where it is real.
pub(crate) fn y_minus(p: &ModelParams, x: f64) -> f64 {
    p.upper().branch(Sign::Minus, C64::new(x, 0.0)).re
}

pub(crate) fn y_plus(p: &ModelParams, x: f64) -> f64 {
    p.upper().branch(Sign::Plus, C64::new(x, 0.0)).re
}

pub(crate) fn z_plus(p: &ModelParams, x: f64) -> f64 {
    p.lower().branch(Sign::Plus, C64::new(x, 0.0)).re
}

/// `γ(x, Y⁻(x), Z⁺(x))`, the denominator of the transform.
pub fn pole_function(p: &ModelParams, x: C64) -> C64 {
    p.kernel_gamma(x, p.upper().branch(Sign::Minus, x), p.lower().branch(Sign::Plus, x))
}

/// Derivative of [`pole_function`].
pub fn pole_function_derivative(p: &ModelParams, x: C64) -> C64 {
    let q = p.q();
    q.q1 + 0.5
        * ((1.0 + q.q2) * p.upper().branch_derivative(Sign::Minus, x)
            + (q.q2 - 1.0) * p.lower().branch_derivative(Sign::Plus, x))
}

pub(crate) fn pole_function_re(p: &ModelParams, x: f64) -> f64 {
    p.kernel_gamma_re(x, y_minus(p, x), z_plus(p, x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchPoints {
    pub xp_min: f64,
    pub xp_max: f64,
    pub xm_min: f64,
    pub xm_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub x_b: f64,
    pub xtilde_b: f64,
}

pub fn branching_points(params: &ModelParams) -> BranchPoints {
    let (xp_min, xp_max) = params.upper().branch_interval();
    let (xm_min, xm_max) = params.lower().branch_interval();
    let (y_min, y_max) = params.upper().transposed().branch_interval();
    BranchPoints {
        xp_min,
        xp_max,
        xm_min,
        xm_max,
        y_min,
        y_max,
        x_b: xp_max.min(xm_max),
        xtilde_b: xp_min.max(xm_min),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SaddlePoint {
    pub alpha: f64,
    pub x: f64,
    /// `y(α)` on the upper arc, `z(α)` on the lower one.
    pub second: f64,
    pub half: Half,
}

/// Reduce an angle to `[0, 2π)`.
pub fn normalize_angle(alpha: f64) -> f64 {
    let a = alpha.rem_euclid(TAU);
    if a >= TAU {
        0.0
    } else {
        a
    }
}

/// Half-plane of the open arc containing `α`, or `None` on the axis.
pub fn half_of(alpha: f64) -> Option<Half> {
    let a = normalize_angle(alpha);
    if a == 0.0 || a == PI {
        None
    } else if a < PI {
        Some(Half::Upper)
    } else {
        Some(Half::Lower)
    }
}

pub fn saddle(params: &ModelParams, alpha: f64) -> Result<SaddlePoint> {
    let half = half_of(alpha).ok_or(Error::AngleOnAxis { alpha })?;
    let (x, second) = params.layer(half).saddle_point(alpha);
    Ok(SaddlePoint { alpha, x, second, half })
}

/// `x(α)`, the first coordinate of the saddle point.
pub fn saddle_x(params: &ModelParams, alpha: f64) -> Result<f64> {
    saddle(params, alpha).map(|s| s.x)
}

/// The angle on the arc of `half` whose saddle has first coordinate `x`.
/// Bracketed bisection on the monotone map `α ↦ x(α)`, then two Newton steps.
pub fn saddle_inverse(params: &ModelParams, half: Half, x: f64) -> Result<f64> {
    let layer = params.layer(half);
    let (lo_x, hi_x) = layer.branch_interval();
    if !(x > lo_x && x < hi_x) {
        return Err(Error::AngleOutOfSector { alpha: f64::NAN });
    }
    // On the upper arc x(α) decreases from x_max to x_min; on the lower arc it increases.
    let (mut lo, mut hi) = match half {
        Half::Upper => (0.0, PI),
        Half::Lower => (PI, TAU),
    };
    let f = |a: f64| {
        let v = layer.saddle_point(a).0 - x;
        match half {
            Half::Upper => -v,
            Half::Lower => v,
        }
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo < 1e-15 {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut a = 0.5 * (lo + hi);
    for _ in 0..2 {
        let d = layer.saddle_derivative(a).0;
        if d == 0.0 {
            break;
        }
        let next = a - (layer.saddle_point(a).0 - x) / d;
        if next > lo - 1e-13 && next < hi + 1e-13 {
            a = next;
        }
    }
    Ok(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnglesKey {
    pub alpha_b: f64,
    pub alpha_b_half: Half,
    pub alpha_tilde_b: f64,
    pub alpha_tilde_b_half: Half,
    pub alpha_mu_plus: f64,
    pub alpha_mu_minus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaseTag {
    A,
    B,
    C,
    D,
}

impl std::fmt::Display for CaseTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self)
    }
}

fn check_strict(bp: &BranchPoints) -> Result<()> {
    if (bp.xp_max - bp.xm_max).abs() < 1e-10 {
        return Err(Error::DegenerateBranchPoints { side: "right" });
    }
    if (bp.xp_min - bp.xm_min).abs() < 1e-10 {
        return Err(Error::DegenerateBranchPoints { side: "left" });
    }
    Ok(())
}

pub fn case_classify(params: &ModelParams) -> Result<CaseTag> {
    let bp = branching_points(params);
    check_strict(&bp)?;
    Ok(match (bp.xp_max > bp.xm_max, bp.xp_min < bp.xm_min) {
        (true, true) => CaseTag::A,
        (false, true) => CaseTag::B,
        (false, false) => CaseTag::C,
        (true, false) => CaseTag::D,
    })
}

/// Half-plane of the arc carrying `α_b`: upper iff `x_b = x⁻_max`.
pub(crate) fn alpha_b_half(bp: &BranchPoints) -> Half {
    if bp.xp_max > bp.xm_max {
        Half::Upper
    } else {
        Half::Lower
    }
}

pub(crate) fn alpha_tilde_b_half(bp: &BranchPoints) -> Half {
    if bp.xp_min < bp.xm_min {
        Half::Upper
    } else {
        Half::Lower
    }
}

pub fn key_angles(params: &ModelParams) -> Result<AnglesKey> {
    let bp = branching_points(params);
    check_strict(&bp)?;
    let hb = alpha_b_half(&bp);
    let ht = alpha_tilde_b_half(&bp);
    let mp = params.mu_plus();
    let mm = params.mu_minus();
    Ok(AnglesKey {
        alpha_b: saddle_inverse(params, hb, bp.x_b)?,
        alpha_b_half: hb,
        alpha_tilde_b: saddle_inverse(params, ht, bp.xtilde_b)?,
        alpha_tilde_b_half: ht,
        alpha_mu_plus: mp.m2.atan2(mp.m1),
        alpha_mu_minus: mm.m2.atan2(mm.m1) + TAU,
    })
}

/// The set `M` as closed angular intervals inside `[0, 2π]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionSet {
    pub intervals: Vec<(f64, f64)>,
}

impl DirectionSet {
    pub fn contains(&self, alpha: f64) -> bool {
        let a = normalize_angle(alpha);
        self.intervals
            .iter()
            .any(|&(lo, hi)| (a >= lo && a <= hi) || (a == 0.0 && hi == TAU))
    }
}

pub fn direction_set(params: &ModelParams) -> Result<DirectionSet> {
    let k = key_angles(params)?;
    let (ab, at) = (k.alpha_b, k.alpha_tilde_b);
    let intervals = match case_classify(params)? {
        CaseTag::A => vec![(ab, at), (PI, TAU)],
        CaseTag::B => vec![(0.0, at), (PI, ab)],
        CaseTag::C => vec![(0.0, PI), (at, ab)],
        CaseTag::D => vec![(ab, PI), (at, TAU)],
    };
    Ok(DirectionSet { intervals })
}

/// `α ∈ M`, tested directly through `x̃_b ≤ x(α) ≤ x_b`. The axis directions
/// always belong to `M`.
pub fn in_m(params: &ModelParams, alpha: f64) -> bool {
    let a = normalize_angle(alpha);
    if half_of(a).is_none() {
        return true;
    }
    let bp = branching_points(params);
    let x = saddle_x(params, a).expect("off-axis angle");
    let tol = 1e-12 * (1.0 + x.abs());
    x >= bp.xtilde_b - tol && x <= bp.x_b + tol
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoleInfo {
    pub present: bool,
    pub x_star: Option<f64>,
    pub alpha_star_plus: Option<f64>,
    pub alpha_star_minus: Option<f64>,
}

impl PoleInfo {
    pub const ABSENT: PoleInfo =
        PoleInfo { present: false, x_star: None, alpha_star_plus: None, alpha_star_minus: None };
}

fn bisect_root(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) < 0.0) == (flo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Zero `x*` of the convex function `x ↦ γ(x, Y⁻(x), Z⁺(x))` on `[x̃_b, x_b]`.
pub fn find_pole(params: &ModelParams) -> Result<PoleInfo> {
    let bp = branching_points(params);
    let g = |x: f64| pole_function_re(params, x);
    let (g_lo, g_hi) = (g(bp.xtilde_b), g(bp.x_b));
    let g0 = g(0.0);
    if g0 >= 0.0 {
        return Err(Error::PoleAtZero);
    }
    let bracket = match (g_lo >= 0.0, g_hi >= 0.0) {
        (false, false) => return Ok(PoleInfo::ABSENT),
        (false, true) => (0.0, bp.x_b),
        (true, false) => (bp.xtilde_b, 0.0),
        (true, true) => return Err(Error::Unsupported("two sign changes of the pole function")),
    };
    let mut x = bisect_root(g, bracket.0, bracket.1);
    for _ in 0..2 {
        let d = pole_function_derivative(params, C64::new(x, 0.0)).re;
        if !d.is_finite() || d == 0.0 {
            break;
        }
        let next = x - g(x) / d;
        if next > bracket.0 && next < bracket.1 {
            x = next;
        }
    }
    if (x - bp.x_b).abs() < 1e-10 || (x - bp.xtilde_b).abs() < 1e-10 {
        return Err(Error::PoleAtBranchPoint { x_star: x });
    }
    if x.abs() < 1e-14 {
        return Err(Error::PoleAtZero);
    }
    Ok(PoleInfo {
        present: true,
        x_star: Some(x),
        alpha_star_plus: Some(saddle_inverse(params, Half::Upper, x)?),
        alpha_star_minus: Some(saddle_inverse(params, Half::Lower, x)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn symmetric_branch_values() {
        let p = presets::symmetric();
        let y = branch_y(&p, Sign::Plus, c(0.1));
        assert!((y.re - (-1.0 + (1.0f64 - 0.2 - 0.01).sqrt())).abs() < 1e-15);
        assert!((y.re + 0.111181).abs() < 1e-6);
        assert!((branch_y(&p, Sign::Minus, c(0.0)).re + 2.0).abs() < 1e-15);
        assert!(branch_y(&p, Sign::Plus, c(0.0)).norm() < 1e-15);
        assert!((branch_z(&p, Sign::Plus, c(0.0)).re - 2.0).abs() < 1e-15);
        let x0 = [branch_x(&p, Sign::Plus, c(0.0)).re, branch_x(&p, Sign::Minus, c(0.0)).re];
        assert!(x0[0].abs() < 1e-15 && (x0[1] + 2.0).abs() < 1e-15);
        let xm = branch_x(&p, Sign::Plus, c(-0.5)).re;
        assert!((xm - (-1.0 + 1.75f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn cut_limit_from_above() {
        let p = presets::symmetric();
        for x in [0.9, 3.0, -3.0, -10.0] {
            let on = branch_y(&p, Sign::Plus, c(x));
            let above = branch_y(&p, Sign::Plus, C64::new(x, 1e-12));
            assert!((on - above).norm() < 1e-9, "x = {x}: {on} vs {above}");
        }
    }

    #[test]
    fn branch_points_values() {
        let bp = branching_points(&presets::symmetric());
        assert!((bp.xp_max - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!((bp.xp_min + 1.0 + 2f64.sqrt()).abs() < 1e-15);
        let bp = branching_points(&presets::asymmetric());
        let r5 = 5f64.sqrt() / 2.0;
        assert!((bp.xm_max - (r5 - 1.0)).abs() < 1e-15);
        assert!((bp.xm_min - (-1.0 - r5)).abs() < 1e-14);
        assert_eq!(bp.x_b, bp.xm_max);
        assert_eq!(bp.xtilde_b, bp.xm_min);
        assert!(bp.y_min < 0.0 && bp.y_max > 0.0);
    }

    #[test]
    fn saddle_values() {
        let p = presets::symmetric();
        let s = saddle(&p, PI / 4.0).unwrap();
        assert!(s.x.abs() < 1e-15 && s.second.abs() < 1e-15);
        let s = saddle(&p, PI / 2.0).unwrap();
        assert!((s.x + 1.0).abs() < 1e-15 && (s.second - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        let s = saddle(&p, 5.0 * PI / 4.0).unwrap();
        assert_eq!(s.half, Half::Lower);
        assert!((s.x + 2.0).abs() < 1e-14 && s.second.abs() < 1e-14);
        assert!(matches!(saddle(&p, PI), Err(Error::AngleOnAxis { .. })));
        assert!(matches!(saddle(&p, 0.0), Err(Error::AngleOnAxis { .. })));
    }

    #[test]
    fn saddle_derivative_matches_difference() {
        let p = presets::asymmetric();
        for &a in &[0.3, 1.4, 2.9, 3.5, 5.0] {
            let half = half_of(a).unwrap();
            let l = p.layer(half);
            let h = 1e-6;
            let fd = (l.saddle_point(a + h).0 - l.saddle_point(a - h).0) / (2.0 * h);
            assert!((fd - l.saddle_derivative(a).0).abs() < 1e-7);
        }
    }

    #[test]
    fn asymmetric_key_angles() {
        let p = presets::asymmetric();
        assert_eq!(case_classify(&p).unwrap(), CaseTag::A);
        let k = key_angles(&p).unwrap();
        let bp = branching_points(&p);
        let expect = 0.75f64.sqrt().atan2(1.0 + bp.xm_max);
        assert!((k.alpha_b - expect).abs() < 1e-12);
        assert!((k.alpha_b - 0.65906).abs() < 1e-5);
        assert_eq!(k.alpha_b_half, Half::Upper);
        assert!(k.alpha_tilde_b > PI / 2.0 && k.alpha_tilde_b < PI);
        assert!((saddle_x(&p, k.alpha_tilde_b).unwrap() - bp.xtilde_b).abs() < 1e-12);
        let m = direction_set(&p).unwrap();
        assert_eq!(m.intervals, vec![(k.alpha_b, k.alpha_tilde_b), (PI, TAU)]);
        assert!((saddle(&p, k.alpha_mu_plus).unwrap().x).abs() < 1e-12);
        assert!(matches!(key_angles(&presets::symmetric()), Err(Error::DegenerateBranchPoints { .. })));
    }

    #[test]
    fn pole_values() {
        let p = presets::with_pole();
        let info = find_pole(&p).unwrap();
        let xs = info.x_star.unwrap();
        assert!((xs - 6.0 / 17.0).abs() < 1e-14);
        assert!((y_minus(&p, xs) + 24.0 / 17.0).abs() < 1e-13);
        assert!((z_plus(&p, xs) - 24.0 / 17.0).abs() < 1e-13);
        let a = info.alpha_star_plus.unwrap();
        assert!((a - (7.0f64).atan2(23.0)).abs() < 1e-12);
        let am = info.alpha_star_minus.unwrap();
        assert!((am - (TAU - (7.0f64).atan2(23.0))).abs() < 1e-12);
        assert!(!find_pole(&presets::asymmetric()).unwrap().present);
    }
}
