//! Parameters of the two-layer diffusion and the three kernel polynomials.
//!
//! The process has covariance `Σ⁺` and drift `μ⁺` in the upper half-plane,
//! `Σ⁻` and `μ⁻` in the lower one, and a singular drift `q` acting through the
//! local time on the horizontal axis.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DriftCondition, Error, Result};

pub type C64 = Complex64;

/// Symmetric 2x2 covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovMatrix {
    pub s11: f64,
    pub s12: f64,
    pub s22: f64,
}

impl CovMatrix {
    pub const IDENTITY: CovMatrix = CovMatrix { s11: 1.0, s12: 0.0, s22: 1.0 };

    pub fn new(s11: f64, s12: f64, s22: f64) -> Self {
        CovMatrix { s11, s12, s22 }
    }

    pub fn det(&self) -> f64 {
        self.s11 * self.s22 - self.s12 * self.s12
    }

    pub fn is_spd(&self) -> bool {
        self.s11 > 0.0 && self.s22 > 0.0 && self.det() > 0.0
    }

    /// `(x, y) Σ (x, y)ᵀ`
    pub fn quad(&self, x: f64, y: f64) -> f64 {
        self.s11 * x * x + 2.0 * self.s12 * x * y + self.s22 * y * y
    }

    /// `Σ⁻¹ v`
    pub fn solve(&self, v: [f64; 2]) -> [f64; 2] {
        let d = self.det();
        [(self.s22 * v[0] - self.s12 * v[1]) / d, (self.s11 * v[1] - self.s12 * v[0]) / d]
    }

    /// Conjugation by `diag(1, -1)`.
    pub fn reflected(&self) -> Self {
        CovMatrix { s12: -self.s12, ..*self }
    }

    /// The quadratic form `Σ11 sin² − 2Σ12 sin cos + Σ22 cos²` that appears in every
    /// saddle-point prefactor; equals `det(Σ) · e·Σ⁻¹e` for `e = (cos α, sin α)`.
    pub fn angular_form(&self, alpha: f64) -> f64 {
        let (s, c) = alpha.sin_cos();
        self.s11 * s * s - 2.0 * self.s12 * s * c + self.s22 * c * c
    }

    fn finite(&self) -> bool {
        self.s11.is_finite() && self.s12.is_finite() && self.s22.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Drift {
    pub m1: f64,
    pub m2: f64,
}

impl Drift {
    pub fn new(m1: f64, m2: f64) -> Self {
        Drift { m1, m2 }
    }
}

impl From<[f64; 2]> for Drift {
    fn from(v: [f64; 2]) -> Self {
        Drift { m1: v[0], m2: v[1] }
    }
}

impl From<Drift> for [f64; 2] {
    fn from(d: Drift) -> Self {
        [d.m1, d.m2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct SkewVector {
    pub q1: f64,
    pub q2: f64,
}

impl SkewVector {
    pub fn new(q1: f64, q2: f64) -> Self {
        SkewVector { q1, q2 }
    }
}

impl From<[f64; 2]> for SkewVector {
    fn from(v: [f64; 2]) -> Self {
        SkewVector { q1: v[0], q2: v[1] }
    }
}

impl From<SkewVector> for [f64; 2] {
    fn from(q: SkewVector) -> Self {
        [q.q1, q.q2]
    }
}

/// A point of the plane; `b > 0` is the upper layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub a: f64,
    pub b: f64,
}

impl Point {
    pub fn new(a: f64, b: f64) -> Self {
        Point { a, b }
    }

    pub fn polar(r: f64, alpha: f64) -> Self {
        Point { a: r * alpha.cos(), b: r * alpha.sin() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Half {
    Upper,
    Lower,
}

/// One half-plane's dynamics. Its kernel is `½ v·Σv + μ·v` with `v = (x, w)`,
/// where `w` stands for `y` in the upper layer and `z` in the lower one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub sigma: CovMatrix,
    pub mu: Drift,
}

impl Layer {
    pub fn kernel(&self, x: C64, w: C64) -> C64 {
        let s = &self.sigma;
        0.5 * (s.s11 * x * x + 2.0 * s.s12 * x * w + s.s22 * w * w) + self.mu.m1 * x + self.mu.m2 * w
    }

    pub fn kernel_re(&self, x: f64, w: f64) -> f64 {
        0.5 * self.sigma.quad(x, w) + self.mu.m1 * x + self.mu.m2 * w
    }

    /// Gradient of the kernel at a real point.
    pub fn gradient(&self, x: f64, w: f64) -> [f64; 2] {
        let s = &self.sigma;
        [s.s11 * x + s.s12 * w + self.mu.m1, s.s12 * x + s.s22 * w + self.mu.m2]
    }

    /// `∂_w` of the kernel.
    pub fn d_second(&self, x: C64, w: C64) -> C64 {
        self.sigma.s12 * x + self.sigma.s22 * w + self.mu.m2
    }

    /// `∂_x` of the kernel.
    pub fn d_first(&self, x: C64, w: C64) -> C64 {
        self.sigma.s11 * x + self.sigma.s12 * w + self.mu.m1
    }

    /// Image under `w → −w`.
    pub fn flipped_second(&self) -> Layer {
        Layer { sigma: self.sigma.reflected(), mu: Drift::new(self.mu.m1, -self.mu.m2) }
    }

    /// Image under `x → −x`.
    pub fn flipped_first(&self) -> Layer {
        Layer { sigma: self.sigma.reflected(), mu: Drift::new(-self.mu.m1, self.mu.m2) }
    }
}

/// JSON input. `q` is either a vector or the string `"divergence"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    pub sigma_plus: CovMatrix,
    pub sigma_minus: CovMatrix,
    pub mu_plus: Drift,
    pub mu_minus: Drift,
    pub q: SkewInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SkewInput {
    Vector(SkewVector),
    Keyword(String),
}

/// Validated parameters. Immutable; cheap to copy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    upper: Layer,
    lower: Layer,
    q: SkewVector,
    divergence_form: bool,
}

pub fn divergence_skew(sigma_plus: &CovMatrix, sigma_minus: &CovMatrix) -> SkewVector {
    let s = sigma_plus.s22 + sigma_minus.s22;
    SkewVector {
        q1: (sigma_plus.s12 - sigma_minus.s12) / s,
        q2: (sigma_plus.s22 - sigma_minus.s22) / s,
    }
}

fn close_rel(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

pub fn validate(raw: &RawParams) -> Result<ModelParams> {
    if !raw.sigma_plus.finite() || !raw.sigma_minus.finite() {
        return Err(Error::NonFinite("covariance"));
    }
    if !raw.sigma_plus.is_spd() {
        return Err(Error::NonSpdCovariance { which: "sigma_plus" });
    }
    if !raw.sigma_minus.is_spd() {
        return Err(Error::NonSpdCovariance { which: "sigma_minus" });
    }
    let (mp, mm) = (raw.mu_plus, raw.mu_minus);
    if ![mp.m1, mp.m2, mm.m1, mm.m2].iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("drift"));
    }
    let checks = [
        (mp.m1 > 0.0, DriftCondition::PlusFirstPositive),
        (mp.m2 > 0.0, DriftCondition::PlusSecondPositive),
        (mm.m1 > 0.0, DriftCondition::MinusFirstPositive),
        (mm.m2 < 0.0, DriftCondition::MinusSecondNegative),
    ];
    if let Some((_, c)) = checks.iter().find(|(ok, _)| !ok) {
        return Err(Error::DriftSignViolation(*c));
    }
    let q0 = divergence_skew(&raw.sigma_plus, &raw.sigma_minus);
    let q = match &raw.q {
        SkewInput::Vector(q) => *q,
        SkewInput::Keyword(k) if k == "divergence" => q0,
        SkewInput::Keyword(_) => return Err(Error::NonFinite("q must be a vector or \"divergence\"")),
    };
    if !q.q1.is_finite() || !q.q2.is_finite() {
        return Err(Error::NonFinite("q"));
    }
    if !(q.q2 > -1.0 && q.q2 < 1.0) {
        return Err(Error::SkewOutOfRange { q2: q.q2 });
    }
    Ok(ModelParams {
        upper: Layer { sigma: raw.sigma_plus, mu: mp },
        lower: Layer { sigma: raw.sigma_minus, mu: mm },
        q,
        divergence_form: close_rel(q.q1, q0.q1) && close_rel(q.q2, q0.q2),
    })
}

impl ModelParams {
    /// Validating constructor. `q = None` selects the divergence-form skew.
    pub fn new(
        sigma_plus: CovMatrix,
        sigma_minus: CovMatrix,
        mu_plus: Drift,
        mu_minus: Drift,
        q: Option<SkewVector>,
    ) -> Result<Self> {
        validate(&RawParams {
            sigma_plus,
            sigma_minus,
            mu_plus,
            mu_minus,
            q: match q {
                Some(q) => SkewInput::Vector(q),
                None => SkewInput::Keyword("divergence".into()),
            },
        })
    }

    pub fn from_json(s: &str) -> std::result::Result<Self, String> {
        let raw: RawParams = serde_json::from_str(s).map_err(|e| e.to_string())?;
        validate(&raw).map_err(|e| e.to_string())
    }

    pub fn to_raw(&self) -> RawParams {
        RawParams {
            sigma_plus: self.upper.sigma,
            sigma_minus: self.lower.sigma,
            mu_plus: self.upper.mu,
            mu_minus: self.lower.mu,
            q: SkewInput::Vector(self.q),
        }
    }

    pub fn sigma_plus(&self) -> &CovMatrix {
        &self.upper.sigma
    }
    pub fn sigma_minus(&self) -> &CovMatrix {
        &self.lower.sigma
    }
    pub fn mu_plus(&self) -> Drift {
        self.upper.mu
    }
    pub fn mu_minus(&self) -> Drift {
        self.lower.mu
    }
    pub fn q(&self) -> SkewVector {
        self.q
    }
    pub fn is_divergence_form(&self) -> bool {
        self.divergence_form
    }
    pub fn upper(&self) -> &Layer {
        &self.upper
    }
    pub fn lower(&self) -> &Layer {
        &self.lower
    }
    pub fn layer(&self, half: Half) -> &Layer {
        match half {
            Half::Upper => &self.upper,
            Half::Lower => &self.lower,
        }
    }

    /// `Σ22⁺ + Σ22⁻`
    pub fn s22_sum(&self) -> f64 {
        self.upper.sigma.s22 + self.lower.sigma.s22
    }

    pub fn kernel_plus(&self, x: C64, y: C64) -> C64 {
        self.upper.kernel(x, y)
    }

    pub fn kernel_minus(&self, x: C64, z: C64) -> C64 {
        self.lower.kernel(x, z)
    }

    pub fn kernel_gamma(&self, x: C64, y: C64, z: C64) -> C64 {
        self.q.q1 * x + 0.5 * (y * (1.0 + self.q.q2) + z * (self.q.q2 - 1.0))
    }

    pub fn kernel_gamma_re(&self, x: f64, y: f64, z: f64) -> f64 {
        self.q.q1 * x + 0.5 * (y * (1.0 + self.q.q2) + z * (self.q.q2 - 1.0))
    }

    /// Parameters of the process `(A, −B)`. Keeps the drift hypothesis.
    pub fn flip_vertical(&self) -> ModelParams {
        ModelParams {
            upper: self.lower.flipped_second(),
            lower: self.upper.flipped_second(),
            q: SkewVector::new(self.q.q1, -self.q.q2),
            divergence_form: self.divergence_form,
        }
    }

    /// Parameters of the process `(−A, B)`. The first drift components become
    /// negative, so the result is only meant for internal evaluation of mirrored
    /// formulas, never for validation.
    pub(crate) fn flip_horizontal(&self) -> ModelParams {
        ModelParams {
            upper: self.upper.flipped_first(),
            lower: self.lower.flipped_first(),
            q: SkewVector::new(-self.q.q1, self.q.q2),
            divergence_form: self.divergence_form,
        }
    }
}

/// Composition of the reflections `a → −a` (applied first) and `b → −b`.
/// Green's functions transform covariantly: `g'(T z₀, T z) = g(z₀, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Frame {
    pub flip_h: bool,
    pub flip_v: bool,
}

impl Frame {
    pub const IDENTITY: Frame = Frame { flip_h: false, flip_v: false };

    pub fn params(&self, p: &ModelParams) -> ModelParams {
        let mut out = *p;
        if self.flip_h {
            out = out.flip_horizontal();
        }
        if self.flip_v {
            out = out.flip_vertical();
        }
        out
    }

    pub fn point(&self, z: Point) -> Point {
        Point {
            a: if self.flip_h { -z.a } else { z.a },
            b: if self.flip_v { -z.b } else { z.b },
        }
    }

    /// Image of a direction, reduced to `[0, 2π)`.
    pub fn angle(&self, alpha: f64) -> f64 {
        let mut a = alpha;
        if self.flip_h {
            a = std::f64::consts::PI - a;
        }
        if self.flip_v {
            a = -a;
        }
        crate::algebra::normalize_angle(a)
    }

    /// `+1` if the frame preserves the orientation of angles, `−1` otherwise.
    pub fn orientation(&self) -> f64 {
        if self.flip_h ^ self.flip_v {
            -1.0
        } else {
            1.0
        }
    }
}

pub fn kernel_plus(params: &ModelParams, x: C64, y: C64) -> C64 {
    params.kernel_plus(x, y)
}

pub fn kernel_minus(params: &ModelParams, x: C64, z: C64) -> C64 {
    params.kernel_minus(x, z)
}

pub fn kernel_gamma(params: &ModelParams, x: C64, y: C64, z: C64) -> C64 {
    params.kernel_gamma(x, y, z)
}

/// Named parameter sets used throughout tests, examples and the CLI self-test.
pub mod presets {
    use super::*;

    /// Identity covariances, `μ⁺ = (1, 1)`, `μ⁻ = (1, −1)`, `q = 0`.
    pub fn symmetric() -> ModelParams {
        ModelParams::new(
            CovMatrix::IDENTITY,
            CovMatrix::IDENTITY,
            Drift::new(1.0, 1.0),
            Drift::new(1.0, -1.0),
            None,
        )
        .unwrap()
    }

    /// Like [`symmetric`] with a stiffer lower layer `Σ⁻ = diag(1, 4)`.
    pub fn asymmetric() -> ModelParams {
        ModelParams::new(
            CovMatrix::IDENTITY,
            CovMatrix::new(1.0, 0.0, 4.0),
            Drift::new(1.0, 1.0),
            Drift::new(1.0, -1.0),
            None,
        )
        .unwrap()
    }

    /// [`symmetric`] with `q = (4, 0)`, which creates a pole at `x* = 6/17`.
    pub fn with_pole() -> ModelParams {
        ModelParams::new(
            CovMatrix::IDENTITY,
            CovMatrix::IDENTITY,
            Drift::new(1.0, 1.0),
            Drift::new(1.0, -1.0),
            Some(SkewVector::new(4.0, 0.0)),
        )
        .unwrap()
    }

    /// Identity covariances with unequal horizontal drifts `μ⁺ = (1, 1)`,
    /// `μ⁻ = (2, −1)`; non-degenerate, `q = 0`.
    pub fn drifted() -> ModelParams {
        ModelParams::new(
            CovMatrix::IDENTITY,
            CovMatrix::IDENTITY,
            Drift::new(1.0, 1.0),
            Drift::new(2.0, -1.0),
            None,
        )
        .unwrap()
    }
}
