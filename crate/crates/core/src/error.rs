use thiserror::Error;

/// Which of the four strict drift sign conditions was violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftCondition {
    PlusFirstPositive,
    PlusSecondPositive,
    MinusFirstPositive,
    MinusSecondNegative,
}

impl std::fmt::Display for DriftCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            DriftCondition::PlusFirstPositive => "mu_plus.m1 > 0",
            DriftCondition::PlusSecondPositive => "mu_plus.m2 > 0",
            DriftCondition::MinusFirstPositive => "mu_minus.m1 > 0",
            DriftCondition::MinusSecondNegative => "mu_minus.m2 < 0",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("covariance {which} is not symmetric positive definite")]
    NonSpdCovariance { which: &'static str },
    #[error("drift sign condition violated: {0}")]
    DriftSignViolation(DriftCondition),
    #[error("skew component q2 = {q2} must lie strictly inside (-1, 1)")]
    SkewOutOfRange { q2: f64 },
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("angle {alpha} lies on the horizontal axis; the saddle map is defined on open arcs only")]
    AngleOnAxis { alpha: f64 },
    #[error("branch points coincide on the {side} side; key angles are undefined")]
    DegenerateBranchPoints { side: &'static str },
    #[error("pole x* = {x_star} coincides with a branching point")]
    PoleAtBranchPoint { x_star: f64 },
    #[error("pole found at x* = 0")]
    PoleAtZero,
    #[error("x = {x} lies on a branch cut")]
    OnCut { x: f64 },
    #[error("x coincides with the pole x* = {x_star}")]
    AtPole { x_star: f64 },
    #[error("the requested point lies on the kernel ellipse")]
    KernelZero,
    #[error("no pole is present for these parameters")]
    NoPole,
    #[error("a pole is present; the requested quantity assumes no pole")]
    PolePresent,
    #[error("branch-point ordering does not match the requested formula: {0}")]
    CaseMismatch(&'static str),
    #[error("angle {alpha} is outside the allowed sector")]
    AngleOutOfSector { alpha: f64 },
    #[error("angle {alpha} is outside the direction set M")]
    OutsideM { alpha: f64 },
    #[error("path description leaves the scale criterion indeterminate: {0}")]
    UnresolvedScale(&'static str),
    #[error("regime does not match the parameters: {0}")]
    RegimeMismatch(String),
    #[error("finite-difference step {step} is larger than the distance to the axis")]
    StepTooLarge { step: f64 },
    #[error("negative weight {weight} in representing measure")]
    NegativeWeight { weight: f64 },
    #[error("target lies on the horizontal axis")]
    OnAxisTarget,
    #[error("integrand decay condition fails for this representation: {0}")]
    TailBoundFailure(&'static str),
    #[error("unsupported configuration: {0}")]
    Unsupported(&'static str),
    #[error("the pole lies between the contour abscissa and the cut")]
    PoleOnContourSide,
    #[error("box is within band_epsilon of the axis")]
    BoxTouchesAxis,
    #[error("unresolved fraction {fraction} exceeds 1%; increase the horizon")]
    HorizonTooShort { fraction: f64 },
    #[error("invalid simulation configuration: {0}")]
    InvalidConfig(String),
    #[error("quadrature did not reach tolerance: estimated error {error} for target {target}")]
    QuadratureFailure { error: f64, target: f64 },
}

impl Error {
    /// True for failures of a numerical target rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadratureFailure { .. } | Error::TailBoundFailure(_) | Error::HorizonTooShort { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
