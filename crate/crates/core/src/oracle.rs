//! Numerical inversion of the Laplace transforms along vertical lines.
//!
//! The Green's function off the axis is `I₁ + I₂`, two single integrals over
//! vertical lines, and on the axis it is a one-dimensional Bromwich inversion
//! of `φ`. Each line is `c + iℝ`; the integrands are real on the real axis and
//! conjugate-symmetric, so `(1/2πi)∫F dx = (1/π)∫₀^∞ Re F(c + iv) dv`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{branching_points, find_pole, pole_function, BranchPoints, Sign};
use crate::error::{Error, Result};
use crate::laplace::numerator_exponent;
use crate::model::{ModelParams, Point, C64};
use crate::quad::{averaged_limit, integrate_breaks, kronrod_nodes, KahanSum};

/// Which single-integral form is used for the source term `I₂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceForm {
    /// Integral in `x` when `b > b₀` (or `b₀ ≤ 0`), otherwise integral in `y`.
    Auto,
    /// Integral in `x` through `Y⁺`; needs `b > b₀` when `b₀ > 0`.
    OverX,
    /// Integral in `y` through `X±`; needs `b₀ > 0` and `a ≠ a₀`.
    OverY,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Contour `−ε + iℝ` for every line. `None` puts each line where its
    /// integrand is smallest on the real axis, inside the same strip.
    pub epsilon: Option<f64>,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_evals: usize,
    pub source_form: SourceForm,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { epsilon: None, rel_tol: 1e-9, abs_tol: 0.0, max_evals: 2_000_000, source_form: SourceForm::Auto }
    }
}

impl QuadratureSpec {
    pub fn with_tol(rel_tol: f64) -> Self {
        QuadratureSpec { rel_tol, ..Self::default() }
    }

    fn check(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol >= 0.0) || self.max_evals == 0 {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0) || !e.is_finite() {
                return Err(Error::InvalidConfig(format!("contour abscissa epsilon = {e} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreenEstimate {
    pub value: f64,
    /// Quadrature plus truncation error.
    pub error: f64,
    pub evaluations: usize,
    /// Real parts of the line positions, one per integral.
    pub abscissae: Vec<f64>,
    /// Value of each integral.
    pub parts: Vec<f64>,
    pub source_form: SourceForm,
}

/// The abscissa `ε = min(η/2, 0.1·min(|x̃_b|, x_b))`, where `η` bounds the
/// `ε` with `Y⁻(−ε) < −ε` and `Y⁺(−ε) > 0`. It is also kept below half the
/// distance to a negative pole.
pub fn default_epsilon(params: &ModelParams) -> Result<f64> {
    let bp = branching_points(params);
    let up = params.upper();
    let yp = |x: f64| up.branch(Sign::Plus, C64::new(x, 0.0)).re;
    let ym = |x: f64| up.branch(Sign::Minus, C64::new(x, 0.0)).re;
    let limit = bp.xtilde_b.abs() * (1.0 - 1e-12);
    let edge = |ok: &dyn Fn(f64) -> bool| {
        if ok(limit) {
            return limit;
        }
        let (mut lo, mut hi) = (0.0, limit);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let eta = edge(&|e| ym(-e) < -e).min(edge(&|e| yp(-e) > 0.0));
    let mut eps = (0.5 * eta).min(0.1 * bp.xtilde_b.abs().min(bp.x_b));
    if let Some(xs) = find_pole(params)?.x_star {
        if xs < 0.0 {
            eps = eps.min(0.5 * xs.abs());
        }
    }
    Ok(eps)
}

struct LineValue {
    value: f64,
    error: f64,
    evaluations: usize,
}

/// `(1/π)∫₀^∞ Re F(c + iv) dv` for an integrand decaying at least like
/// `e^{−ρv}`. Panels grow geometrically to a width tied to the oscillation
/// frequency and the decay rate; the line stops once `|F|` has dropped below
/// `10⁻¹⁸` of its maximum.
fn vertical_line(f: &(dyn Fn(C64) -> C64 + Sync), c: f64, rho: f64, freq: f64, spec: &QuadratureSpec) -> Result<LineValue> {
    let env = |v: f64| f(C64::new(c, v)).norm();
    let width = (2.0 * PI / freq.max(1e-12)).min(4.0 / rho.max(1e-12)).min(10.0);
    let mut h = width.min(0.25);
    let mut breaks = vec![0.0];
    let mut peak = env(0.0);
    let mut prev = peak;
    let mut v = 0.0;
    let (tail, decay) = loop {
        v += h;
        h = (1.5 * h).min(width);
        let e = env(v);
        if !e.is_finite() {
            return Err(Error::TailBoundFailure("integrand is not finite on the contour"));
        }
        peak = peak.max(e);
        breaks.push(v);
        if e < 1e-18 * peak && prev < 1e-16 * peak {
            let dv = breaks[breaks.len() - 1] - breaks[breaks.len() - 2];
            let rate = (prev / e).ln() / dv;
            if !(rate > 0.0) {
                return Err(Error::TailBoundFailure("integrand does not decay along the contour"));
            }
            break (e / rate, rate);
        }
        if breaks.len() > 20_000 {
            return Err(Error::TailBoundFailure("integrand does not decay along the contour"));
        }
        prev = e;
    };
    let re = |v: f64| f(C64::new(c, v)).re;
    let floor = 1e-14 * peak / decay.max(1.0 / v);
    let q = integrate_breaks(&re, &breaks, spec.rel_tol, (PI * spec.abs_tol).max(floor), spec.max_evals)?;
    Ok(LineValue { value: q.value / PI, error: (q.error + tail) / PI, evaluations: q.evaluations + breaks.len() })
}

/// Same line integral for an integrand decaying only like `1/v` with
/// oscillation `e^{−iωv}`: integrals over half periods, then repeated
/// averaging of the partial sums.
fn vertical_line_oscillatory(
    f: &(dyn Fn(C64) -> C64 + Sync),
    c: f64,
    omega: f64,
    start: f64,
    spec: &QuadratureSpec,
) -> Result<LineValue> {
    let half = PI / omega;
    let re = |v: f64| f(C64::new(c, v)).re;
    let peak = f(C64::new(c, 0.0)).norm();
    let n = ((start / half).ceil() as usize).max(64);
    if n > 200_000 {
        return Err(Error::TailBoundFailure("oscillation too slow for panel summation"));
    }
    let mut sum = KahanSum::default();
    let mut partial = Vec::with_capacity(n);
    let (mut error, mut evals) = (0.0, 0);
    for k in 0..n {
        let (a, b) = (k as f64 * half, (k + 1) as f64 * half);
        let q = integrate_breaks(&re, &[a, b], spec.rel_tol, (PI * spec.abs_tol).max(1e-15 * peak * half), spec.max_evals)?;
        sum.add(q.value);
        error += q.error;
        evals += q.evaluations;
        partial.push(sum.value());
    }
    let (limit, change) = averaged_limit(&partial[n - 32..], 12);
    Ok(LineValue { value: limit / PI, error: (error + change) / PI, evaluations: evals })
}

/// Minimum of a convex function by golden-section search.
fn argmin(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Line position inside `(lo, hi)`: at `−ε` if requested, otherwise at the
/// minimum of the real exponent, kept `min(1/scale, width/20)` from the ends.
fn abscissa(spec: &QuadratureSpec, lo: f64, hi: f64, scale: f64, exponent: impl Fn(f64) -> f64) -> Result<f64> {
    match spec.epsilon {
        Some(e) => {
            let c = -e;
            if c > lo && c < hi {
                Ok(c)
            } else {
                Err(Error::InvalidConfig(format!("contour abscissa -{e} is outside the strip ({lo}, {hi})")))
            }
        }
        None => {
            let m = (1.0 / scale).min(0.05 * (hi - lo));
            Ok(argmin(exponent, lo + m, hi - m))
        }
    }
}

/// Strip where `φ` is analytic on the side of the pole containing small `−ε`.
fn phi_strip(bp: &BranchPoints, x_star: Option<f64>, spec: &QuadratureSpec) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = (bp.xtilde_b, bp.x_b);
    if let Some(xs) = x_star {
        if xs > 0.0 {
            hi = xs;
        } else {
            lo = xs;
            if let Some(e) = spec.epsilon {
                if -e <= xs {
                    return Err(Error::PoleOnContourSide);
                }
            }
        }
    }
    Ok((lo, hi))
}

fn check_point(z: Point, what: &'static str) -> Result<()> {
    if z.a.is_finite() && z.b.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// `g^{z₀}(target)` off the axis. Targets below the axis are evaluated in the
/// vertically reflected model.
pub fn green_contour(params: &ModelParams, z0: Point, target: Point, spec: &QuadratureSpec) -> Result<GreenEstimate> {
    check_point(z0, "z0")?;
    check_point(target, "target")?;
    spec.check()?;
    if target.b == 0.0 {
        return Err(Error::OnAxisTarget);
    }
    if target == z0 {
        return Err(Error::Unsupported("target coincides with the starting point"));
    }
    if target.b < 0.0 {
        let p = params.flip_vertical();
        return green_upper(&p, Point::new(z0.a, -z0.b), Point::new(target.a, -target.b), spec);
    }
    green_upper(params, z0, target, spec)
}

fn resolve_form(spec: &QuadratureSpec, z0: Point, t: Point) -> Result<SourceForm> {
    match spec.source_form {
        SourceForm::Auto => {
            if z0.b <= 0.0 || t.b > z0.b {
                Ok(SourceForm::OverX)
            } else if t.a != z0.a {
                Ok(SourceForm::OverY)
            } else {
                Err(Error::Unsupported("no single-integral form for 0 < b <= b0 with a = a0"))
            }
        }
        SourceForm::OverX if z0.b > 0.0 && t.b <= z0.b => {
            Err(Error::TailBoundFailure("the x-form of the source term needs b > b0"))
        }
        SourceForm::OverY if z0.b <= 0.0 => Err(Error::TailBoundFailure("the y-form of the source term needs b0 > 0")),
        SourceForm::OverY if t.a == z0.a => Err(Error::TailBoundFailure("the y-form of the source term needs a != a0")),
        form => Ok(form),
    }
}

fn green_upper(p: &ModelParams, z0: Point, t: Point, spec: &QuadratureSpec) -> Result<GreenEstimate> {
    let form = resolve_form(spec, z0, t)?;
    let bp = branching_points(p);
    let x_star = find_pole(p)?.x_star;
    let (a, b) = (t.a, t.b);
    let scale = (a - z0.a).hypot(b - z0.b);
    let up = *p.upper();
    let low = *p.lower();
    let root_det = |l: &crate::model::Layer| l.sigma.det().sqrt();
    let freq = (a - z0.a).abs() + (b + z0.b.abs()) * (1.0 + up.sigma.s12.abs() / up.sigma.s22) + 1.0;

    // Term carrying φ.
    let (lo, hi) = phi_strip(&bp, x_star, spec)?;
    let e1 = |x: C64| numerator_exponent(p, z0, x) - a * x - b * up.branch(Sign::Plus, x);
    let c1 = abscissa(spec, lo, hi, scale, |c| e1(C64::new(c, 0.0)).re)?;
    let f1 = |x: C64| {
        let yp = up.branch(Sign::Plus, x);
        let zp = low.branch(Sign::Plus, x);
        -p.kernel_gamma(x, yp, zp) / (pole_function(p, x) * up.d_second(x, yp)) * e1(x).exp()
    };
    let rho1 = b * root_det(&up) / up.sigma.s22;
    let i1 = vertical_line(&f1, c1, rho1, freq, spec)?;

    // Source term.
    let (c2, i2) = match form {
        SourceForm::OverY => {
            let tr = up.transposed();
            let (ylo, yhi) = tr.branch_interval();
            let sign = if a > z0.a { Sign::Plus } else { Sign::Minus };
            let s = if a > z0.a { 1.0 } else { -1.0 };
            let e2 = |y: C64| (z0.a - a) * tr.branch(sign, y) + (z0.b - b) * y;
            let c2 = abscissa(spec, ylo, yhi, scale, |c| e2(C64::new(c, 0.0)).re)?;
            let f2 = |y: C64| s * e2(y).exp() / up.d_first(tr.branch(sign, y), y);
            let rho = (a - z0.a).abs() * root_det(&up) / up.sigma.s11;
            let fy = (b - z0.b).abs() + (a - z0.a).abs() * (1.0 + up.sigma.s12.abs() / up.sigma.s11) + 1.0;
            (c2, vertical_line(&f2, c2, rho, fy, spec)?)
        }
        _ => {
            let (lo2, hi2, rho) = if z0.b >= 0.0 {
                (bp.xp_min, bp.xp_max, (b - z0.b) * root_det(&up) / up.sigma.s22)
            } else {
                let r = b * root_det(&up) / up.sigma.s22 + z0.b.abs() * root_det(&low) / low.sigma.s22;
                (bp.xtilde_b, bp.x_b, r)
            };
            let e2 = |x: C64| {
                let yp = up.branch(Sign::Plus, x);
                let mut e = (z0.a - a) * x - b * yp;
                if z0.b >= 0.0 {
                    e += z0.b * yp;
                } else {
                    e += z0.b * low.branch(Sign::Plus, x);
                }
                e
            };
            let c2 = abscissa(spec, lo2, hi2, scale, |c| e2(C64::new(c, 0.0)).re)?;
            let f2 = |x: C64| e2(x).exp() / up.d_second(x, up.branch(Sign::Plus, x));
            (c2, vertical_line(&f2, c2, rho, freq, spec)?)
        }
    };
    Ok(GreenEstimate {
        value: i1.value + i2.value,
        error: i1.error + i2.error,
        evaluations: i1.evaluations + i2.evaluations,
        abscissae: vec![c1, c2],
        parts: vec![i1.value, i2.value],
        source_form: form,
    })
}

/// `g^{z₀}(u, 0)` from `φ`: `(2/(Σ₂₂⁺+Σ₂₂⁻))·(1/2πi)∫φ(x)e^{−ux}dx`.
pub fn green_axis(params: &ModelParams, z0: Point, u: f64, spec: &QuadratureSpec) -> Result<GreenEstimate> {
    check_point(z0, "z0")?;
    if !u.is_finite() {
        return Err(Error::NonFinite("u"));
    }
    spec.check()?;
    if z0.b == 0.0 && u == z0.a {
        return Err(Error::Unsupported("axis density at the starting point"));
    }
    let p = params;
    let bp = branching_points(p);
    let (lo, hi) = phi_strip(&bp, find_pole(p)?.x_star, spec)?;
    let e = |x: C64| numerator_exponent(p, z0, x) - u * x;
    let scale = (u - z0.a).hypot(z0.b);
    let c = abscissa(spec, lo, hi, scale, |c| e(C64::new(c, 0.0)).re)?;
    let f = |x: C64| -e(x).exp() / pole_function(p, x);
    let line = if z0.b == 0.0 {
        let start = 50.0 * (1.0 + bp.xtilde_b.abs() + bp.x_b + c.abs());
        vertical_line_oscillatory(&f, c, (u - z0.a).abs(), start, spec)?
    } else {
        let l = if z0.b > 0.0 { p.upper() } else { p.lower() };
        let rho = z0.b.abs() * l.sigma.det().sqrt() / l.sigma.s22;
        vertical_line(&f, c, rho, (u - z0.a).abs() + 1.0, spec)?
    };
    let k = 2.0 / p.s22_sum();
    Ok(GreenEstimate {
        value: k * line.value,
        error: k * line.error,
        evaluations: line.evaluations,
        abscissae: vec![c],
        parts: vec![k * line.value],
        source_form: SourceForm::OverX,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaCheck {
    pub q: f64,
    /// `e^{−q}∫₀¹√(1−s)e^{qs²}ds`.
    pub numeric_scaled: f64,
    /// `e^{−q}·(√π/(4√2))e^{q}q^{−3/2}`.
    pub asymptotic_scaled: f64,
    pub ratio: f64,
    pub quadrature_error: f64,
}

/// `√(1−s)e^{q(s²−1)}`, the integrand with `e^q` factored out.
pub fn lemma_integrand(q: f64, s: f64) -> f64 {
    (1.0 - s).max(0.0).sqrt() * (q * (s * s - 1.0)).exp()
}

/// Compares `∫₀¹√(1−s)e^{qs²}ds` with `(√π/(4√2))e^{q}q^{−3/2}`. Both sides
/// are divided by `e^q`, which overflows for large `q`.
pub fn lemma_integral_check(q: f64) -> Result<LemmaCheck> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::InvalidConfig(format!("q = {q} must be positive")));
    }
    // s = 1 − t² removes the square-root endpoint.
    let f = |t: f64| 2.0 * t * t * (q * t * t * (t * t - 2.0)).exp();
    let w = 1.0 / q.sqrt();
    let mut breaks = vec![0.0];
    breaks.extend([0.5, 1.0, 2.0, 4.0, 8.0].iter().map(|k| k * w).filter(|&t| t < 1.0));
    breaks.push(1.0);
    let r = integrate_breaks(&f, &breaks, 1e-13, 0.0, 1_000_000)?;
    let asymptotic = PI.sqrt() / (4.0 * 2f64.sqrt()) * q.powf(-1.5);
    Ok(LemmaCheck {
        q,
        numeric_scaled: r.value,
        asymptotic_scaled: asymptotic,
        ratio: r.value / asymptotic,
        quadrature_error: r.error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxEstimate {
    pub value: f64,
    /// Gauss/Kronrod rule difference plus the propagated pointwise errors.
    pub error: f64,
    pub nodes: usize,
}

/// `∫∫_box g` by a tensor 15-point Kronrod rule over `green_contour`.
pub fn box_integral(
    params: &ModelParams,
    z0: Point,
    a_range: (f64, f64),
    b_range: (f64, f64),
    spec: &QuadratureSpec,
) -> Result<BoxEstimate> {
    if b_range.0 <= 0.0 && b_range.1 >= 0.0 {
        return Err(Error::OnAxisTarget);
    }
    if (a_range.0..=a_range.1).contains(&z0.a) && (b_range.0..=b_range.1).contains(&z0.b) {
        return Err(Error::Unsupported("box contains the starting point"));
    }
    let xa = kronrod_nodes(a_range.0, a_range.1);
    let xb = kronrod_nodes(b_range.0, b_range.1);
    let grid: Vec<_> = xa.iter().flat_map(|&na| xb.iter().map(move |&nb| (na, nb))).collect();
    let values: Vec<Result<GreenEstimate>> =
        grid.par_iter().map(|(na, nb)| green_contour(params, z0, Point::new(na.0, nb.0), spec)).collect();
    let (mut k, mut g, mut err) = (KahanSum::default(), KahanSum::default(), 0.0);
    for ((na, nb), v) in grid.iter().zip(values) {
        let v = v?;
        k.add(na.1 * nb.1 * v.value);
        g.add(na.2 * nb.2 * v.value);
        err += na.1 * nb.1 * v.error;
    }
    Ok(BoxEstimate { value: k.value(), error: (k.value() - g.value()).abs() + err, nodes: grid.len() })
}
