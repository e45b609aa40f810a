//! Asymptotics of the Green's function `g(r cos α, r sin α)` as `r → ∞`:
//! the constants of every regime, the classifier deciding which regime applies
//! to a direction (or a path of directions) and the evaluator of the leading
//! terms.
//!
//! Most statements are written for one canonical configuration: the right axis
//! `α = 0`, a branching angle `α_b` on the upper arc, or a pole with `x* > 0`
//! approached from the upper arc. Every other configuration is brought back to
//! the canonical one by the reflections of [`Frame`].

use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::algebra::{
    alpha_b_half, alpha_tilde_b_half, branching_points, find_pole, half_of, in_m, key_angles,
    normalize_angle, pole_function_derivative, pole_function_re, saddle, y_minus, y_plus, z_plus,
    BranchPoints, PoleInfo,
};
use crate::error::{Error, Result};
use crate::model::{Frame, Half, ModelParams, Point, C64};

const ANGLE_TOL: f64 = 1e-9;

fn check_right(bp: &BranchPoints) -> Result<()> {
    if (bp.xp_max - bp.xm_max).abs() < 1e-10 {
        Err(Error::DegenerateBranchPoints { side: "right" })
    } else {
        Ok(())
    }
}

/// Constant of the axis asymptotics `g(r, 0) ~ C₀ f₀(z₀) e^{−r x_b} r^{−3/2}`.
pub fn c0(params: &ModelParams) -> Result<f64> {
    let bp = branching_points(params);
    check_right(&bp)?;
    let g = pole_function_re(params, bp.x_b);
    let (s, lo) = if bp.xp_max < bp.xm_max {
        (params.sigma_plus(), bp.xp_min)
    } else {
        (params.sigma_minus(), bp.xm_min)
    };
    Ok(-(s.det() * (bp.x_b - lo)).sqrt() / (PI.sqrt() * s.s22 * params.s22_sum() * g))
}

pub fn c_pi(params: &ModelParams) -> Result<f64> {
    c0(&params.flip_horizontal())
}

/// Harmonic function attached to the direction `0`.
///
/// The coefficients `Σ22^±/(Σ22⁺+Σ22⁻)` of the divergence-form statement are
/// written as `(1 ± q₂)/2`, which coincides with them at `q = q₀`.
pub fn f0(params: &ModelParams, z0: Point) -> Result<f64> {
    let bp = branching_points(params);
    check_right(&bp)?;
    let xb = bp.x_b;
    let g = pole_function_re(params, xb);
    let q2 = params.q().q2;
    let (a0, b0) = (z0.a, z0.b);
    Ok(if bp.xp_max < bp.xm_max {
        let w = 0.5 * (1.0 + q2) / g;
        if b0 >= 0.0 {
            (b0 - w) * (xb * a0 + b0 * y_minus(params, xb)).exp()
        } else {
            -w * (xb * a0 + b0 * z_plus(params, xb)).exp()
        }
    } else {
        let w = 0.5 * (1.0 - q2) / g;
        if b0 >= 0.0 {
            -w * (xb * a0 + b0 * y_minus(params, xb)).exp()
        } else {
            (-b0 - w) * (xb * a0 + b0 * z_plus(params, xb)).exp()
        }
    })
}

pub fn f_pi(params: &ModelParams, z0: Point) -> Result<f64> {
    f0(&params.flip_horizontal(), Point::new(-z0.a, z0.b))
}

/// `C^±(α)`, the constant of the saddle-point asymptotics.
pub fn c_alpha(params: &ModelParams, alpha: f64) -> Result<f64> {
    let s = saddle(params, alpha)?;
    let layer = params.layer(s.half);
    let dw = layer.d_second(C64::new(s.x, 0.0), C64::new(s.second, 0.0)).re;
    let form = layer.sigma.angular_form(alpha);
    Ok(((alpha.sin() / dw) / (2.0 * PI * form)).sqrt())
}

/// Harmonic function `h_α` attached to a direction of `M` off the axis.
pub fn h_alpha(params: &ModelParams, alpha: f64, z0: Point) -> Result<f64> {
    let s = saddle(params, alpha)?;
    if !in_m(params, alpha) {
        return Err(Error::OutsideM { alpha });
    }
    Ok(h_alpha_unchecked(params, s.x, s.second, s.half, z0))
}

pub(crate) fn h_alpha_unchecked(p: &ModelParams, x: f64, w: f64, half: Half, z0: Point) -> f64 {
    let (a0, b0) = (z0.a, z0.b);
    let ym = y_minus(p, x);
    let zp = z_plus(p, x);
    let g = p.kernel_gamma_re(x, ym, zp);
    match half {
        Half::Upper => {
            let ratio = p.kernel_gamma_re(x, w, zp) / g;
            if b0 >= 0.0 {
                (a0 * x + b0 * w).exp() - ratio * (a0 * x + b0 * ym).exp()
            } else {
                (1.0 - ratio) * (a0 * x + b0 * zp).exp()
            }
        }
        Half::Lower => {
            let ratio = p.kernel_gamma_re(x, ym, w) / g;
            if b0 >= 0.0 {
                (1.0 - ratio) * (a0 * x + b0 * ym).exp()
            } else {
                (a0 * x + b0 * w).exp() - ratio * (a0 * x + b0 * zp).exp()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Axis {
    Zero,
    Pi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum KeyAngle {
    AlphaB,
    AlphaTildeB,
}

/// Frame in which the right axis sits in cases B/C (`x_b = x⁺_max`).
fn axis_frame(params: &ModelParams, axis: Axis) -> Frame {
    let flip_h = axis == Axis::Pi;
    let p = Frame { flip_h, flip_v: false }.params(params);
    let bp = branching_points(&p);
    Frame { flip_h, flip_v: bp.xp_max > bp.xm_max }
}

/// Frame in which the key angle is an `α_b` lying on the upper arc (cases A/D).
fn key_frame(params: &ModelParams, key: KeyAngle) -> Frame {
    let bp = branching_points(params);
    match key {
        KeyAngle::AlphaB => Frame { flip_h: false, flip_v: alpha_b_half(&bp) == Half::Lower },
        KeyAngle::AlphaTildeB => Frame { flip_h: true, flip_v: alpha_tilde_b_half(&bp) == Half::Lower },
    }
}

/// `κ` in `C(α)h_α(z₀) ~ κ C₀ f₀(z₀) |α|` as `α → 0` (or `π`) inside `M`.
///
/// With `x_b = x⁺_max` this is `κ = −(Σ22⁺+Σ22⁻) γ(x_b, Y(x_b), Z⁺(x_b)) / Σ22⁺`,
/// which follows from `∂_xγ₊ = det Σ⁺ (x⁺_max − x⁺_min) / (2Σ22⁺)` at the
/// rightmost point of the ellipse.
pub fn kappa(params: &ModelParams, axis: Axis) -> Result<f64> {
    let p = axis_frame(params, axis).params(params);
    let bp = branching_points(&p);
    check_right(&bp)?;
    let x = bp.xp_max;
    let g = p.kernel_gamma_re(x, y_minus(&p, x), z_plus(&p, x));
    Ok(-p.s22_sum() * g / p.sigma_plus().s22)
}

/// Key angle and parameters in the canonical frame.
fn canonical_key(params: &ModelParams, key: KeyAngle) -> Result<(Frame, ModelParams, f64)> {
    key_angles(params)?;
    let frame = key_frame(params, key);
    let p = frame.params(params);
    let a = key_angles(&p)?.alpha_b;
    Ok((frame, p, a))
}

/// `K²` controlling the competition between saddle and branching point near
/// the key angle.
pub fn k_squared(params: &ModelParams, key: KeyAngle) -> Result<f64> {
    let (_, p, ab) = canonical_key(params, key)?;
    let s = saddle(&p, ab)?;
    let sp = p.sigma_plus();
    Ok(sp.s22 * (s.second - y_minus(&p, s.x)) / (4.0 * ab.sin().abs() * sp.angular_form(ab)))
}

/// `C_br = |sin α_b|^{3/2} C₀` (or its mirror at `α̃_b`).
pub fn c_br(params: &ModelParams, key: KeyAngle) -> Result<f64> {
    let (_, p, ab) = canonical_key(params, key)?;
    Ok(ab.sin().abs().powf(1.5) * c0(&p)?)
}

/// `C'_br(α₀) = (sin α_b / sin(α_b − α₀))^{3/2} C₀` for `α₀` in the sector
/// outside `M` attached to the key angle.
pub fn c_br_prime(params: &ModelParams, key: KeyAngle, alpha0: f64) -> Result<f64> {
    let (frame, p, ab) = canonical_key(params, key)?;
    let a0 = frame.angle(alpha0);
    if !(a0 >= 0.0 && a0 < ab) {
        return Err(Error::AngleOutOfSector { alpha: alpha0 });
    }
    Ok((ab.sin() / (ab - a0).sin()).powf(1.5) * c0(&p)?)
}

/// Harmonic function attached to the pole.
pub fn f_star(params: &ModelParams, z0: Point) -> Result<f64> {
    let xs = find_pole(params)?.x_star.ok_or(Error::NoPole)?;
    Ok(f_star_at(params, xs, z0))
}

fn f_star_at(p: &ModelParams, xs: f64, z0: Point) -> f64 {
    if z0.b >= 0.0 {
        (xs * z0.a + y_minus(p, xs) * z0.b).exp()
    } else {
        (xs * z0.a + z_plus(p, xs) * z0.b).exp()
    }
}

/// `C*₊ = γ(x*, Y⁺, Z⁺) / (∂_yγ₊(x*, Y⁺) · d/dx γ(x, Y⁻, Z⁺)|_{x*})`.
pub fn c_star_plus(params: &ModelParams) -> Result<f64> {
    let xs = find_pole(params)?.x_star.ok_or(Error::NoPole)?;
    Ok(c_star_at(params, xs))
}

fn c_star_at(p: &ModelParams, xs: f64) -> f64 {
    let yp = y_plus(p, xs);
    let num = p.kernel_gamma_re(xs, yp, z_plus(p, xs));
    let dy = p.upper().d_second(C64::new(xs, 0.0), C64::new(yp, 0.0)).re;
    num / (dy * pole_function_derivative(p, C64::new(xs, 0.0)).re)
}

/// `A(α*)` scaling the error-function argument near the pole direction.
fn pole_erf_scale(p: &ModelParams, alpha: f64) -> Result<f64> {
    let s = saddle(p, alpha)?;
    let dy = p.upper().d_second(C64::new(s.x, 0.0), C64::new(s.second, 0.0)).re;
    let f2 = p.sigma_plus().angular_form(alpha) / (dy * alpha.sin());
    Ok(1.0 / (alpha.sin() * (2.0 * f2).sqrt()))
}

/// How the direction approaches `α₀` as `r → ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Approach {
    /// `α = α₀` for all `r`.
    Fixed,
    /// `α(r) = α₀ + c·r^{−p}` with `p > 0`.
    Power { c: f64, p: f64 },
    /// Distance `√(s ln r / (K² r))` to the key angle on the side outside `M`;
    /// then `e^{K² r δ²} / (r δ^{3/2})` behaves like `r^{s−1/4} (ln r)^{−3/4}`.
    LogWindow { s: f64 },
    /// Prescribed limit of the scale criterion: `c` of the branching blend, or
    /// `lim r(α − α*)²` near a pole direction (the side is taken from `side`).
    Limit { c: f64, side: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BranchCase {
    I,
    Ii,
    Iii,
    Iv,
    V { c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PoleSide {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PoleCase {
    I,
    Ii { c: f64 },
    Iii,
    Iv { c: f64 },
    V,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Regime {
    AxisPos,
    AxisNeg,
    InteriorM { alpha0: f64, half: Half },
    BoundaryOfMAtZero { half: Half },
    BoundaryOfMAtPi { half: Half },
    AlphaB { key: KeyAngle, case: BranchCase },
    OutsideM { anchor: KeyAngle, alpha0: f64 },
    PoleInterior { side: PoleSide },
    PoleBoundary { side: PoleSide, case: PoleCase },
}

impl Regime {
    pub fn tag(&self) -> String {
        let roman = |i: usize| ["i", "ii", "iii", "iv", "v"][i];
        match self {
            Regime::AxisPos => "AxisPos".into(),
            Regime::AxisNeg => "AxisNeg".into(),
            Regime::InteriorM { .. } => "InteriorM".into(),
            Regime::BoundaryOfMAtZero { .. } => "BoundaryOfM_AtZero".into(),
            Regime::BoundaryOfMAtPi { .. } => "BoundaryOfM_AtPi".into(),
            Regime::AlphaB { case, .. } => {
                let i = match case {
                    BranchCase::I => 0,
                    BranchCase::Ii => 1,
                    BranchCase::Iii => 2,
                    BranchCase::Iv => 3,
                    BranchCase::V { .. } => 4,
                };
                format!("AlphaB_{}", roman(i))
            }
            Regime::OutsideM { .. } => "OutsideM".into(),
            Regime::PoleInterior { .. } => "PoleInterior".into(),
            Regime::PoleBoundary { case, .. } => {
                let i = match case {
                    PoleCase::I => 0,
                    PoleCase::Ii { .. } => 1,
                    PoleCase::Iii => 2,
                    PoleCase::Iv { .. } => 3,
                    PoleCase::V => 4,
                };
                format!("PoleBoundary_{}", roman(i))
            }
        }
    }

    /// Tag with the side information, e.g. `AlphaB_iv@alpha_tilde_b`.
    pub fn label(&self) -> String {
        let side = match self {
            Regime::InteriorM { half, .. }
            | Regime::BoundaryOfMAtZero { half }
            | Regime::BoundaryOfMAtPi { half } => match half {
                Half::Upper => "upper",
                Half::Lower => "lower",
            },
            Regime::AlphaB { key, .. } | Regime::OutsideM { anchor: key, .. } => match key {
                KeyAngle::AlphaB => "alpha_b",
                KeyAngle::AlphaTildeB => "alpha_tilde_b",
            },
            Regime::PoleInterior { side } | Regime::PoleBoundary { side, .. } => match side {
                PoleSide::Plus => "alpha_star_plus",
                PoleSide::Minus => "alpha_star_minus",
            },
            _ => return self.tag(),
        };
        format!("{}@{}", self.tag(), side)
    }
}

fn same_angle(a: f64, b: f64) -> bool {
    let d = normalize_angle(a - b);
    d < ANGLE_TOL || TAU - d < ANGLE_TOL
}

/// Side of `α₀` on which the path lies: `+1`, `−1` or `0` for a fixed angle.
fn path_side(approach: &Approach) -> Result<f64> {
    match *approach {
        Approach::Fixed => Ok(0.0),
        Approach::Power { c, p } => {
            if !(p > 0.0) || !p.is_finite() {
                return Err(Error::UnresolvedScale("path exponent must be positive"));
            }
            Ok(if c > 0.0 { 1.0 } else if c < 0.0 { -1.0 } else { 0.0 })
        }
        Approach::LogWindow { .. } => Ok(0.0),
        Approach::Limit { side, .. } => Ok(side.signum()),
    }
}

fn pole_frame(info: &PoleInfo, side: PoleSide) -> Frame {
    let positive = info.x_star.unwrap() > 0.0;
    Frame { flip_h: !positive, flip_v: side == PoleSide::Minus }
}

/// Decide the regime of a direction `α₀` reached along `approach`.
pub fn classify_direction(params: &ModelParams, alpha0: f64, approach: Approach) -> Result<Regime> {
    let a0 = normalize_angle(alpha0);
    let side = path_side(&approach)?;
    let info = find_pole(params)?;
    if info.present {
        if let Some(r) = classify_pole(params, &info, a0, side, &approach)? {
            return Ok(r);
        }
    }
    for (axis, at) in [(Axis::Zero, 0.0), (Axis::Pi, PI)] {
        if same_angle(a0, at) {
            if side == 0.0 && matches!(approach, Approach::Fixed | Approach::Power { .. }) {
                return Ok(if axis == Axis::Zero { Regime::AxisPos } else { Regime::AxisNeg });
            }
            if !matches!(approach, Approach::Power { .. }) {
                return Err(Error::RegimeMismatch("axis directions accept fixed or power paths".into()));
            }
            // The path leaves the axis into the upper arc when the angle increases at 0 and
            // decreases at π.
            let half = if (side > 0.0) == (axis == Axis::Zero) { Half::Upper } else { Half::Lower };
            let probe = at + side * 1e-7;
            return Ok(if in_m(params, probe) {
                match axis {
                    Axis::Zero => Regime::BoundaryOfMAtZero { half },
                    Axis::Pi => Regime::BoundaryOfMAtPi { half },
                }
            } else {
                let anchor = if axis == Axis::Zero { KeyAngle::AlphaB } else { KeyAngle::AlphaTildeB };
                Regime::OutsideM { anchor, alpha0: at }
            });
        }
    }
    let half = half_of(a0).expect("off axis");
    if let Ok(k) = key_angles(params) {
        for (key, ka) in [(KeyAngle::AlphaB, k.alpha_b), (KeyAngle::AlphaTildeB, k.alpha_tilde_b)] {
            if same_angle(a0, ka) {
                return Ok(Regime::AlphaB { key, case: branch_case(params, key, side, &approach)? });
            }
        }
    }
    if in_m(params, a0) {
        return Ok(Regime::InteriorM { alpha0: a0, half });
    }
    let x = saddle(params, a0)?.x;
    let anchor = if x > branching_points(params).x_b { KeyAngle::AlphaB } else { KeyAngle::AlphaTildeB };
    Ok(Regime::OutsideM { anchor, alpha0: a0 })
}

fn branch_case(params: &ModelParams, key: KeyAngle, side: f64, approach: &Approach) -> Result<BranchCase> {
    let frame = key_frame(params, key);
    // In the canonical frame M lies above the key angle.
    let outside = side * frame.orientation() < 0.0;
    Ok(match *approach {
        Approach::Fixed => BranchCase::Ii,
        Approach::Power { p, .. } => {
            if side == 0.0 {
                BranchCase::Ii
            } else if !outside {
                BranchCase::I
            } else if p >= 0.5 {
                BranchCase::Ii
            } else {
                // r(α_b − α)² = c² r^{1−2p} → ∞ and e^{K² c² r^{1−2p}} outgrows every power of r.
                BranchCase::Iv
            }
        }
        Approach::LogWindow { s } => {
            if !(s > 0.0) {
                return Err(Error::UnresolvedScale("log window needs s > 0"));
            }
            if s > 0.25 {
                BranchCase::Iv
            } else {
                BranchCase::Iii
            }
        }
        Approach::Limit { c, .. } => {
            if !(c > 0.0) {
                return Err(Error::UnresolvedScale("blend constant must be positive"));
            }
            BranchCase::V { c }
        }
    })
}

fn classify_pole(
    params: &ModelParams,
    info: &PoleInfo,
    a0: f64,
    side: f64,
    approach: &Approach,
) -> Result<Option<Regime>> {
    let (ap, am) = (info.alpha_star_plus.unwrap(), info.alpha_star_minus.unwrap());
    for (ps, at) in [(PoleSide::Plus, ap), (PoleSide::Minus, am)] {
        if same_angle(a0, at) {
            let frame = pole_frame(info, ps);
            let s = side * frame.orientation();
            let case = match *approach {
                Approach::Fixed => PoleCase::Iii,
                Approach::Power { c, p } => {
                    if s == 0.0 || p > 0.5 {
                        PoleCase::Iii
                    } else if p == 0.5 {
                        if s > 0.0 {
                            PoleCase::Ii { c: c * c }
                        } else {
                            PoleCase::Iv { c: c * c }
                        }
                    } else if s > 0.0 {
                        PoleCase::I
                    } else {
                        PoleCase::V
                    }
                }
                Approach::LogWindow { .. } => {
                    return Err(Error::UnresolvedScale("log window applies to branching angles"))
                }
                Approach::Limit { c, .. } => {
                    if !(c > 0.0) || s == 0.0 {
                        return Err(Error::UnresolvedScale("pole limit needs c > 0 and a side"));
                    }
                    if s > 0.0 {
                        PoleCase::Ii { c }
                    } else {
                        PoleCase::Iv { c }
                    }
                }
            };
            let _ = params;
            return Ok(Some(Regime::PoleBoundary { side: ps, case }));
        }
    }
    let xs = info.x_star.unwrap();
    let inside = if xs > 0.0 { a0 < ap || a0 > am } else { a0 > ap && a0 < am };
    if !inside {
        return Ok(None);
    }
    let ps = if xs > 0.0 {
        if a0 < PI { PoleSide::Plus } else { PoleSide::Minus }
    } else if a0 <= PI {
        PoleSide::Plus
    } else {
        PoleSide::Minus
    };
    Ok(Some(Regime::PoleInterior { side: ps }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondaryTerm {
    pub prefactor: f64,
    pub r_power: f64,
}

/// Leading term `prefactor · r^{r_power} · e^{−r·rate}`, plus an optional
/// second power-law term with the same exponential rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticResult {
    pub regime: Regime,
    pub r: f64,
    pub alpha: f64,
    pub prefactor: f64,
    pub rate: f64,
    pub r_power: f64,
    pub secondary: Option<SecondaryTerm>,
    pub value: f64,
}

impl AsymptoticResult {
    fn new(regime: Regime, r: f64, alpha: f64, prefactor: f64, rate: f64, r_power: f64) -> Self {
        let mut out = AsymptoticResult { regime, r, alpha, prefactor, rate, r_power, secondary: None, value: 0.0 };
        out.value = out.value_at(r);
        out
    }

    fn with_secondary(mut self, prefactor: f64, r_power: f64) -> Self {
        self.secondary = Some(SecondaryTerm { prefactor, r_power });
        self.value = self.value_at(self.r);
        self
    }

    /// The same expression at another radius, holding the direction fixed.
    pub fn value_at(&self, r: f64) -> f64 {
        let mut v = self.prefactor * r.powf(self.r_power);
        if let Some(s) = self.secondary {
            v += s.prefactor * r.powf(s.r_power);
        }
        v * (-r * self.rate).exp()
    }
}

/// `cos α x(α) + sin α w(α)`, the saddle-point rate; on the axis it is the
/// limit `x_b` (resp. `−x̃_b`).
fn saddle_rate(p: &ModelParams, alpha: f64) -> Result<f64> {
    match half_of(alpha) {
        Some(_) => {
            let s = saddle(p, alpha)?;
            Ok(alpha.cos() * s.x + alpha.sin() * s.second)
        }
        None => {
            let bp = branching_points(p);
            Ok(if normalize_angle(alpha) == 0.0 { bp.x_b } else { -bp.xtilde_b })
        }
    }
}

/// Signed angle in `(−π, π]`.
fn signed(a: f64) -> f64 {
    let a = normalize_angle(a);
    if a > PI {
        a - TAU
    } else {
        a
    }
}

pub fn green_asymptotic(params: &ModelParams, z0: Point, r: f64, alpha: f64, regime: Regime) -> Result<AsymptoticResult> {
    let alpha_n = normalize_angle(alpha);
    let mismatch = |m: &str| Error::RegimeMismatch(format!("{}: {m}", regime.tag()));
    let pole = find_pole(params)?;
    match regime {
        Regime::AxisPos => {
            let bp = branching_points(params);
            let pre = c0(params)? * f0(params, z0)?;
            Ok(AsymptoticResult::new(regime, r, alpha, pre, bp.x_b, -1.5))
        }
        Regime::AxisNeg => {
            let bp = branching_points(params);
            let pre = c_pi(params)? * f_pi(params, z0)?;
            Ok(AsymptoticResult::new(regime, r, alpha, pre, -bp.xtilde_b, -1.5))
        }
        Regime::InteriorM { alpha0, half } => {
            if half_of(alpha_n) != Some(half) {
                return Err(mismatch("direction is on the other half-plane"));
            }
            let pre = c_alpha(params, alpha0)? * h_alpha(params, alpha0, z0)?;
            Ok(AsymptoticResult::new(regime, r, alpha, pre, saddle_rate(params, alpha_n)?, -0.5))
        }
        Regime::BoundaryOfMAtZero { .. } | Regime::BoundaryOfMAtPi { .. } => {
            let axis = if matches!(regime, Regime::BoundaryOfMAtZero { .. }) { Axis::Zero } else { Axis::Pi };
            let frame = axis_frame(params, axis);
            let p = frame.params(params);
            let a = signed(frame.angle(alpha));
            if a < 0.0 {
                return Err(mismatch("direction is on the side of the axis outside M"));
            }
            let k = kappa(params, axis)?;
            let base = c0(&p)? * f0(&p, frame.point(z0))?;
            Ok(AsymptoticResult::new(regime, r, alpha, base * k * a, saddle_rate(&p, a)?, -0.5)
                .with_secondary(base, -1.5))
        }
        Regime::AlphaB { key, case } => {
            let (frame, p, ab) = canonical_key(params, key)?;
            let a = frame.angle(alpha);
            let z = frame.point(z0);
            let s = saddle(&p, ab)?;
            let saddle_pre = c_alpha(&p, ab)? * h_alpha_unchecked(&p, s.x, s.second, Half::Upper, z);
            let branch_pre = ab.sin().abs().powf(1.5) * c0(&p)? * f0(&p, z)?;
            match case {
                BranchCase::I | BranchCase::Ii | BranchCase::Iii => {
                    Ok(AsymptoticResult::new(regime, r, alpha, saddle_pre, saddle_rate(&p, a)?, -0.5))
                }
                BranchCase::Iv => {
                    let d = ab - a;
                    if !(d > 0.0) {
                        return Err(mismatch("direction must lie outside M"));
                    }
                    let rate = a.cos() * s.x + a.sin() * s.second;
                    Ok(AsymptoticResult::new(regime, r, alpha, branch_pre / d.powf(1.5), rate, -1.5))
                }
                BranchCase::V { c } => Ok(AsymptoticResult::new(
                    regime,
                    r,
                    alpha,
                    saddle_pre + c * branch_pre,
                    saddle_rate(&p, a)?,
                    -0.5,
                )),
            }
        }
        Regime::OutsideM { anchor, alpha0 } => {
            let (frame, p, ab) = canonical_key(params, anchor)?;
            let a = frame.angle(alpha);
            let s = saddle(&p, ab)?;
            let pre = c_br_prime(params, anchor, alpha0)? * f0(&p, frame.point(z0))?;
            let rate = a.cos() * s.x + a.sin() * s.second;
            Ok(AsymptoticResult::new(regime, r, alpha, pre, rate, -1.5))
        }
        Regime::PoleInterior { side } | Regime::PoleBoundary { side, .. } => {
            if !pole.present {
                return Err(mismatch("no pole for these parameters"));
            }
            let frame = pole_frame(&pole, side);
            let p = frame.params(params);
            let a = frame.angle(alpha);
            let z = frame.point(z0);
            let info = find_pole(&p)?;
            let xs = info.x_star.unwrap();
            let astar = info.alpha_star_plus.unwrap();
            let cstar = c_star_at(&p, xs);
            let fstar = f_star_at(&p, xs, z);
            let pole_rate = a.cos() * xs + a.sin() * y_plus(&p, xs);
            let pole_term = |scale: f64| AsymptoticResult::new(regime, r, alpha, scale * cstar * fstar, pole_rate, 0.0);
            match regime {
                Regime::PoleInterior { .. } => Ok(pole_term(1.0)),
                Regime::PoleBoundary { case, .. } => match case {
                    PoleCase::I => {
                        let sa = saddle(&p, a)?;
                        if !(sa.x < xs) {
                            return Err(mismatch("direction must lie beyond the pole direction"));
                        }
                        let dpole = pole_function_derivative(&p, C64::new(xs, 0.0)).re;
                        let num = p.kernel_gamma_re(xs, y_plus(&p, xs), z_plus(&p, xs));
                        let cprime = -c_alpha(&p, astar)? * num / dpole;
                        let rate = a.cos() * sa.x + a.sin() * sa.second;
                        Ok(AsymptoticResult::new(regime, r, alpha, cprime * fstar / (sa.x - xs), rate, -0.5))
                    }
                    PoleCase::Ii { c } => {
                        let e = libm::erf(c.sqrt() * pole_erf_scale(&p, astar)?);
                        Ok(pole_term(0.5 * (1.0 - e)))
                    }
                    PoleCase::Iii => Ok(pole_term(0.5)),
                    PoleCase::Iv { c } => {
                        let e = libm::erf(c.sqrt() * pole_erf_scale(&p, astar)?);
                        Ok(pole_term(0.5 * (1.0 + e)))
                    }
                    PoleCase::V => Ok(pole_term(1.0)),
                },
                _ => unreachable!(),
            }
        }
    }
}

/// Convenience: classify a fixed direction and evaluate its leading term.
pub fn green_asymptotic_fixed(params: &ModelParams, z0: Point, r: f64, alpha: f64) -> Result<AsymptoticResult> {
    let regime = classify_direction(params, alpha, Approach::Fixed)?;
    green_asymptotic(params, z0, r, alpha, regime)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    #[test]
    fn c_alpha_in_drift_direction() {
        let p = presets::symmetric();
        let v = c_alpha(&p, PI / 4.0).unwrap();
        let expect = (2.0 * PI).powf(-0.5) * (0.5f64.sqrt()).sqrt();
        assert!((v - expect).abs() < 1e-15);
        assert!((v - 0.33547).abs() < 1e-5);
    }

    #[test]
    fn h_alpha_in_drift_direction() {
        let p = presets::symmetric();
        for b0 in [0.0, 0.5, 1.0, 2.0] {
            let h = h_alpha(&p, PI / 4.0, Point::new(0.3, b0)).unwrap();
            assert!((h - (1.0 - (-2.0 * b0).exp() / 2.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn pole_constants() {
        let p = presets::with_pole();
        assert!((c_star_plus(&p).unwrap() - 7.0 / 51.0).abs() < 1e-13);
        let r = classify_direction(&p, 0.1, Approach::Fixed).unwrap();
        assert_eq!(r, Regime::PoleInterior { side: PoleSide::Plus });
    }

    #[test]
    fn asymmetric_classification() {
        let p = presets::asymmetric();
        let k = key_angles(&p).unwrap();
        assert_eq!(classify_direction(&p, 0.0, Approach::Fixed).unwrap(), Regime::AxisPos);
        assert_eq!(classify_direction(&p, PI, Approach::Fixed).unwrap(), Regime::AxisNeg);
        let mid = 0.5 * (k.alpha_b + k.alpha_tilde_b);
        assert!(matches!(classify_direction(&p, mid, Approach::Fixed).unwrap(), Regime::InteriorM { .. }));
        assert_eq!(
            classify_direction(&p, 0.3, Approach::Fixed).unwrap(),
            Regime::OutsideM { anchor: KeyAngle::AlphaB, alpha0: 0.3 }
        );
        let path = Approach::Power { c: -1.0, p: 0.5 };
        assert_eq!(
            classify_direction(&p, k.alpha_b, path).unwrap(),
            Regime::AlphaB { key: KeyAngle::AlphaB, case: BranchCase::Ii }
        );
        let path = Approach::Power { c: -1.0, p: 0.25 };
        assert_eq!(
            classify_direction(&p, k.alpha_b, path).unwrap(),
            Regime::AlphaB { key: KeyAngle::AlphaB, case: BranchCase::Iv }
        );
        let path = Approach::Power { c: 1.0, p: 0.25 };
        assert_eq!(
            classify_direction(&p, k.alpha_b, path).unwrap(),
            Regime::AlphaB { key: KeyAngle::AlphaB, case: BranchCase::I }
        );
        assert!(matches!(
            classify_direction(&p, k.alpha_b, Approach::Power { c: 1.0, p: 0.0 }),
            Err(Error::UnresolvedScale(_))
        ));
        // Case A: M contains the lower arc, so the approach to 0 from below stays in M.
        assert_eq!(
            classify_direction(&p, 0.0, Approach::Power { c: -1.0, p: 0.5 }).unwrap(),
            Regime::BoundaryOfMAtZero { half: Half::Lower }
        );
        assert_eq!(
            classify_direction(&p, 0.0, Approach::Power { c: 1.0, p: 0.5 }).unwrap(),
            Regime::OutsideM { anchor: KeyAngle::AlphaB, alpha0: 0.0 }
        );
    }
}
