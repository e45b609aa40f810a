//! Explicit Laplace transforms of the Green's measures.
//!
//! `φ(x) = E[∫ e^{x A_t} dL_t]` is the transform of the axis measure and
//! `φ±` those of the occupation measures of each half-plane. They satisfy
//! `γ₋φ₋ + γ₊φ₊ + γφ = −exp(x a₀ + y b₀ 1{b₀>0} + z b₀ 1{b₀<0})`.

use serde::Serialize;

use crate::algebra::{branching_points, find_pole, pole_function, pole_function_derivative, Sign};
use crate::error::{Error, Result};
use crate::model::{Half, ModelParams, Point, C64};

/// Exponent `x a₀ + Y⁻(x) b₀ 1{b₀>0} + Z⁺(x) b₀ 1{b₀<0}` of the numerator of `φ`.
pub(crate) fn numerator_exponent(p: &ModelParams, z0: Point, x: C64) -> C64 {
    let mut e = x * z0.a;
    if z0.b > 0.0 {
        e += p.upper().branch(Sign::Minus, x) * z0.b;
    } else if z0.b < 0.0 {
        e += p.lower().branch(Sign::Plus, x) * z0.b;
    }
    e
}

/// `φ` without domain checks. On the real cuts it returns the upper limit.
pub(crate) fn phi_unchecked(p: &ModelParams, z0: Point, x: C64) -> C64 {
    -numerator_exponent(p, z0, x).exp() / pole_function(p, x)
}

pub fn phi(params: &ModelParams, z0: Point, x: C64) -> Result<C64> {
    let bp = branching_points(params);
    if x.im == 0.0 && (x.re >= bp.x_b || x.re <= bp.xtilde_b) {
        return Err(Error::OnCut { x: x.re });
    }
    if let Some(xs) = find_pole(params)?.x_star {
        if (x - xs).norm() <= 1e-14 * (1.0 + xs.abs()) {
            return Err(Error::AtPole { x_star: xs });
        }
    }
    Ok(phi_unchecked(params, z0, x))
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

/// Transform of the occupation measure of the upper half-plane.
pub fn phi_plus(params: &ModelParams, z0: Point, x: C64, y: C64) -> Result<C64> {
    let k = params.kernel_plus(x, y);
    if k.norm() < 1e-14 {
        return Err(Error::KernelZero);
    }
    let f = phi(params, z0, x)?;
    let zp = params.lower().branch(Sign::Plus, x);
    Ok((-params.kernel_gamma(x, y, zp) * f - source(z0, x, y, zp)) / k)
}

/// Transform of the occupation measure of the lower half-plane.
pub fn phi_minus(params: &ModelParams, z0: Point, x: C64, z: C64) -> Result<C64> {
    let k = params.kernel_minus(x, z);
    if k.norm() < 1e-14 {
        return Err(Error::KernelZero);
    }
    let f = phi(params, z0, x)?;
    let ym = params.upper().branch(Sign::Minus, x);
    Ok((-params.kernel_gamma(x, ym, z) * f - source(z0, x, ym, z)) / k)
}

/// Residue of `φ` at the pole `x*`.
pub fn residue_at_pole(params: &ModelParams, z0: Point) -> Result<f64> {
    let xs = find_pole(params)?.x_star.ok_or(Error::NoPole)?;
    let x = C64::new(xs, 0.0);
    Ok((-numerator_exponent(params, z0, x).exp() / pole_function_derivative(params, x)).re)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionAtBranch {
    /// `φ(x_b)`.
    pub value_at_xb: f64,
    /// `k` in `φ(x) = φ(x_b) + k·√(x_b − x) + O(x_b − x)` for `x < x_b`.
    pub sqrt_coefficient: f64,
    /// Slope constant of the branch that is singular at `x_b`:
    /// `C_y = √(det Σ⁺ (x_b − x⁺_min))/Σ22⁺` or `C_z` for the lower layer.
    pub branch_slope: f64,
    /// Layer whose branching point is `x_b`.
    pub singular_layer: Half,
}

pub fn expansion_at_xb(params: &ModelParams, z0: Point) -> Result<ExpansionAtBranch> {
    if find_pole(params)?.present {
        return Err(Error::PolePresent);
    }
    let bp = branching_points(params);
    let xb = C64::new(bp.x_b, 0.0);
    let g = pole_function(params, xb).re;
    let e = numerator_exponent(params, z0, xb).exp().re;
    let q2 = params.q().q2;
    let (half, slope, coef) = if bp.xp_max <= bp.xm_max {
        // Y⁻(x) = Y(x_b) − C_y √(x_b − x) + …
        let s = params.sigma_plus();
        let cy = (s.det() * (bp.x_b - bp.xp_min)).sqrt() / s.s22;
        let b0 = if z0.b > 0.0 { z0.b } else { 0.0 };
        (Half::Upper, cy, cy / g * (b0 - 0.5 * (1.0 + q2) / g) * e)
    } else {
        // Z⁺(x) = Z(x_b) + C_z √(x_b − x) + …
        let s = params.sigma_minus();
        let cz = (s.det() * (bp.x_b - bp.xm_min)).sqrt() / s.s22;
        let b0 = if z0.b < 0.0 { z0.b } else { 0.0 };
        (Half::Lower, cz, cz / g * (0.5 * (q2 - 1.0) / g - b0) * e)
    };
    Ok(ExpansionAtBranch {
        value_at_xb: -e / g,
        sqrt_coefficient: coef,
        branch_slope: slope,
        singular_layer: half,
    })
}
