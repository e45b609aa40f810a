//! Positive harmonic functions of the process: the Martin kernels `f₀`, `f_π`,
//! `h_α`, `f*`, their finite-difference checks against the generator and the
//! transmission conditions, discrete representations and the escape
//! probabilities.

use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::algebra::{
    branching_points, case_classify, direction_set, find_pole, half_of, in_m, key_angles, normalize_angle,
    CaseTag, PoleInfo,
};
use crate::asymptotics::{f0, f_pi, f_star, h_alpha};
use crate::error::{Error, Result};
use crate::model::{ModelParams, Point};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum HarmonicKind {
    F0,
    FPi,
    HAlpha(f64),
    FStar,
    /// `Σ wᵢ · k(αᵢ, ·)` for Martin kernels `k`.
    Mixture(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicFn {
    params: ModelParams,
    kind: HarmonicKind,
}

impl HarmonicFn {
    pub fn new(params: &ModelParams, kind: HarmonicKind) -> Result<Self> {
        let h = HarmonicFn { params: *params, kind };
        // Surface domain errors up front rather than at the first evaluation.
        h.eval(Point::new(0.0, 0.0))?;
        Ok(h)
    }

    pub fn kind(&self) -> &HarmonicKind {
        &self.kind
    }

    pub fn eval(&self, z: Point) -> Result<f64> {
        let p = &self.params;
        match &self.kind {
            HarmonicKind::F0 => f0(p, z),
            HarmonicKind::FPi => f_pi(p, z),
            HarmonicKind::HAlpha(a) => h_alpha(p, *a, z),
            HarmonicKind::FStar => f_star(p, z),
            HarmonicKind::Mixture(m) => represent(p, m, z),
        }
    }
}

/// Residuals of the harmonicity conditions. Interior channels are filled for
/// off-axis points, interface channels for points on the axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdeResidual {
    pub interior_plus: Option<f64>,
    pub interior_minus: Option<f64>,
    pub transmission_flux: Option<f64>,
    pub continuity: Option<f64>,
    pub x_derivative_match: Option<f64>,
}

pub fn pde_residual(params: &ModelParams, h: &HarmonicFn, z: Point, step: f64) -> Result<PdeResidual> {
    pde_residual_of(params, |p| h.eval(p), z, step)
}

/// [`pde_residual`] for any function of the plane.
pub fn pde_residual_of(
    params: &ModelParams,
    h: impl Fn(Point) -> Result<f64>,
    z: Point,
    step: f64,
) -> Result<PdeResidual> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::StepTooLarge { step });
    }
    let at = |da: f64, db: f64| h(Point::new(z.a + da, z.b + db));
    let s = step;
    let mut out = PdeResidual {
        interior_plus: None,
        interior_minus: None,
        transmission_flux: None,
        continuity: None,
        x_derivative_match: None,
    };
    if z.b != 0.0 {
        if step >= z.b.abs() {
            return Err(Error::StepTooLarge { step });
        }
        let c = at(0.0, 0.0)?;
        let hx = (at(s, 0.0)? - at(-s, 0.0)?) / (2.0 * s);
        let hy = (at(0.0, s)? - at(0.0, -s)?) / (2.0 * s);
        let hxx = (at(s, 0.0)? - 2.0 * c + at(-s, 0.0)?) / (s * s);
        let hyy = (at(0.0, s)? - 2.0 * c + at(0.0, -s)?) / (s * s);
        let hxy = (at(s, s)? - at(s, -s)? - at(-s, s)? + at(-s, -s)?) / (4.0 * s * s);
        let layer = if z.b > 0.0 { params.upper() } else { params.lower() };
        let (sg, mu) = (layer.sigma, layer.mu);
        let r = 0.5 * (sg.s11 * hxx + 2.0 * sg.s12 * hxy + sg.s22 * hyy) + mu.m1 * hx + mu.m2 * hy;
        if z.b > 0.0 {
            out.interior_plus = Some(r);
        } else {
            out.interior_minus = Some(r);
        }
        return Ok(out);
    }
    // One-sided quadratic stencils on the nodes ±s, ±2s, ±3s.
    let side = |sign: f64| -> Result<(f64, f64, f64)> {
        let f = |k: f64, da: f64| at(da, sign * k * s);
        let (f1, f2, f3) = (f(1.0, 0.0)?, f(2.0, 0.0)?, f(3.0, 0.0)?);
        let value = 3.0 * f1 - 3.0 * f2 + f3;
        let db = sign * (-5.0 * f1 + 8.0 * f2 - 3.0 * f3) / (2.0 * s);
        let dx = |k: f64| -> Result<f64> { Ok((f(k, s)? - f(k, -s)?) / (2.0 * s)) };
        let da = 3.0 * dx(1.0)? - 3.0 * dx(2.0)? + dx(3.0)?;
        Ok((value, da, db))
    };
    let (vp, ap, bp) = side(1.0)?;
    let (vm, am, bm) = side(-1.0)?;
    let q = params.q();
    out.transmission_flux = Some((q.q1 * ap + (1.0 + q.q2) * bp) - (-q.q1 * am + (1.0 - q.q2) * bm));
    out.continuity = Some(vp - vm);
    out.x_derivative_match = Some(ap - am);
    Ok(out)
}

/// `P(B_t → +∞)` from `b₀`; available for the divergence-form skew only.
pub fn escape_prob_up(params: &ModelParams, b0: f64) -> Result<f64> {
    if !params.is_divergence_form() {
        return Err(Error::Unsupported("closed-form escape probabilities need the divergence-form skew"));
    }
    let (mp, mm) = (params.mu_plus().m2, params.mu_minus().m2);
    Ok(if b0 >= 0.0 {
        1.0 + mm / (mp - mm) * (-2.0 * b0 * mp / params.sigma_plus().s22).exp()
    } else {
        mp / (mp - mm) * (-2.0 * b0 * mm / params.sigma_minus().s22).exp()
    })
}

pub fn escape_prob_down(params: &ModelParams, b0: f64) -> Result<f64> {
    Ok(1.0 - escape_prob_up(params, b0)?)
}

fn same_angle(a: f64, b: f64) -> bool {
    let d = normalize_angle(a - b);
    d < 1e-12 || TAU - d < 1e-12
}

/// Open pole sector: directions whose Green's function decays like the pole term.
fn in_pole_sector(info: &PoleInfo, alpha: f64) -> bool {
    match (info.x_star, info.alpha_star_plus, info.alpha_star_minus) {
        (Some(xs), Some(ap), Some(am)) => {
            let a = normalize_angle(alpha);
            if xs > 0.0 {
                a < ap || a > am
            } else {
                a > ap && a < am
            }
        }
        _ => false,
    }
}

/// Normalized Martin kernel `h_α(z)/h_α(0)`, with `f₀`, `f_π` and `f*` at the
/// directions `0`, `π` and `α*±`.
pub fn martin_kernel(params: &ModelParams, alpha: f64, z: Point) -> Result<f64> {
    let a = normalize_angle(alpha);
    let origin = Point::new(0.0, 0.0);
    let info = find_pole(params)?;
    if info.present {
        let (ap, am) = (info.alpha_star_plus.unwrap(), info.alpha_star_minus.unwrap());
        if same_angle(a, ap) || same_angle(a, am) {
            return Ok(f_star(params, z)? / f_star(params, origin)?);
        }
        if in_pole_sector(&info, a) {
            return Err(Error::OutsideM { alpha });
        }
    }
    match half_of(a) {
        None if a == 0.0 => Ok(f0(params, z)? / f0(params, origin)?),
        None => Ok(f_pi(params, z)? / f_pi(params, origin)?),
        Some(_) => Ok(h_alpha(params, a, z)? / h_alpha(params, a, origin)?),
    }
}

/// `Σ wᵢ · martin_kernel(αᵢ, z)` for a discrete representing measure.
pub fn represent(params: &ModelParams, measure: &[(f64, f64)], z: Point) -> Result<f64> {
    if let Some(&(_, w)) = measure.iter().find(|(_, w)| !(*w >= 0.0)) {
        return Err(Error::NegativeWeight { weight: w });
    }
    measure.iter().try_fold(0.0, |acc, &(a, w)| Ok(acc + w * martin_kernel(params, a, z)?))
}

/// A segment `{u e^{iα} : u ∈ [1, 2]}` of the full Martin boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GluedSegment {
    /// Direction `α` at which the segment is attached (the `u = 1` end).
    pub attached_at: f64,
    /// Direction whose unit point is identified with the `u = 2` end.
    pub glued_to: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryStructure {
    pub case: CaseTag,
    pub divergence_form: bool,
    /// Arcs of unit directions forming the minimal Martin boundary.
    pub minimal_arcs: Vec<(f64, f64)>,
    /// Pairs of directions identified with each other.
    pub identified: Vec<(f64, f64)>,
    pub segments: Vec<GluedSegment>,
    /// Homeomorphism type of the minimal boundary.
    pub minimal_topology: &'static str,
    /// Homeomorphism type of the full boundary.
    pub full_topology: &'static str,
}

fn intersect(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for &(l1, h1) in a {
        for &(l2, h2) in b {
            let (l, h) = (l1.max(l2), h1.min(h2));
            if l <= h {
                out.push((l, h));
            }
        }
    }
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    out
}

/// Arcs of `M` when branching points coinciding on one side collapse the
/// corresponding key angle onto the axis.
fn direction_arcs(params: &ModelParams) -> Result<(Vec<(f64, f64)>, Option<f64>, Option<f64>)> {
    if let Ok(set) = direction_set(params) {
        let k = key_angles(params)?;
        return Ok((set.intervals, Some(k.alpha_b), Some(k.alpha_tilde_b)));
    }
    // Sample the pointwise membership test on a fine grid and refine every switch.
    let n = 4096;
    let grid: Vec<f64> = (0..=n).map(|i| TAU * i as f64 / n as f64).collect();
    let member = |a: f64| in_m(params, a);
    let mut arcs = Vec::new();
    let mut start: Option<f64> = None;
    let refine = |lo: f64, hi: f64| {
        let (mut lo, mut hi) = (lo, hi);
        let target = member(lo);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if member(mid) == target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        match (start, member(a), member(b)) {
            (None, true, _) => start = Some(a),
            (None, false, true) => start = Some(refine(a, b)),
            _ => {}
        }
        if let (Some(s), true, false) = (start, member(a), member(b)) {
            arcs.push((s, refine(a, b)));
            start = None;
        }
    }
    if let Some(s) = start {
        arcs.push((s, TAU));
    }
    Ok((arcs, None, None))
}

pub fn boundary_structure(params: &ModelParams) -> Result<BoundaryStructure> {
    let bp = branching_points(params);
    let right_degenerate = (bp.xp_max - bp.xm_max).abs() < 1e-10;
    let left_degenerate = (bp.xp_min - bp.xm_min).abs() < 1e-10;
    let info = find_pole(params)?;
    if (right_degenerate || left_degenerate) && !info.present {
        return Err(Error::DegenerateBranchPoints { side: if right_degenerate { "right" } else { "left" } });
    }
    let case = match case_classify(params) {
        Ok(c) => c,
        // Coinciding points: the ordering on the degenerate side is immaterial.
        Err(_) => {
            let right = bp.xp_max > bp.xm_max;
            let left = bp.xp_min < bp.xm_min;
            match (right, left) {
                (true, true) => CaseTag::A,
                (false, true) => CaseTag::B,
                (false, false) => CaseTag::C,
                (true, false) => CaseTag::D,
            }
        }
    };
    let (arcs, ab, atb) = direction_arcs(params)?;
    let mut segments = Vec::new();
    let mut identified = Vec::new();
    let (minimal_arcs, minimal_topology) = if let (true, Some(xs)) = (info.present, info.x_star) {
        let (ap, am) = (info.alpha_star_plus.unwrap(), info.alpha_star_minus.unwrap());
        identified.push((am, ap));
        let keep: Vec<(f64, f64)> = if xs > 0.0 { vec![(ap, am)] } else { vec![(0.0, ap), (am, TAU)] };
        if xs > 0.0 {
            if let Some(a) = atb {
                segments.push(GluedSegment { attached_at: a, glued_to: PI });
            }
        } else if let Some(a) = ab {
            segments.push(GluedSegment { attached_at: a, glued_to: 0.0 });
        }
        (intersect(&arcs, &keep), "segment with identified endpoints")
    } else {
        segments.push(GluedSegment { attached_at: ab.unwrap(), glued_to: 0.0 });
        segments.push(GluedSegment { attached_at: atb.unwrap(), glued_to: PI });
        (arcs, "union of arcs of the circle")
    };
    Ok(BoundaryStructure {
        case,
        divergence_form: params.is_divergence_form(),
        minimal_arcs,
        identified,
        segments,
        minimal_topology,
        full_topology: "circle",
    })
}

/// Direction `α_μ±` of a layer's drift. The saddle there is the origin and
/// `h_α` is the escape probability towards that layer.
pub fn drift_direction(params: &ModelParams, upper: bool) -> f64 {
    let m = if upper { params.mu_plus() } else { params.mu_minus() };
    normalize_angle(m.m2.atan2(m.m1))
}
