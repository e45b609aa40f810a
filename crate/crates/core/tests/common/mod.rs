#![allow(dead_code)]

use layered_green::algebra::{case_classify, CaseTag};
use layered_green::{CovMatrix, Drift, ModelParams, SkewVector};
use proptest::prelude::*;

pub fn cov() -> impl Strategy<Value = CovMatrix> {
    (0.3f64..3.0, -0.8f64..0.8, 0.3f64..3.0)
        .prop_map(|(a, rho, c)| CovMatrix::new(a, rho * (a * c).sqrt(), c))
}

/// Divergence-form parameters satisfying the drift sign conditions.
pub fn params() -> impl Strategy<Value = ModelParams> {
    (cov(), cov(), 0.2f64..2.0, 0.2f64..2.0, 0.2f64..2.0, 0.2f64..2.0).prop_map(|(sp, sm, a, b, c, d)| {
        ModelParams::new(sp, sm, Drift::new(a, b), Drift::new(c, -d), None).unwrap()
    })
}

/// Parameters with a small general skew vector.
pub fn skewed_params() -> impl Strategy<Value = ModelParams> {
    (params(), -0.3f64..0.3, -0.5f64..0.5).prop_map(|(p, q1, q2)| {
        ModelParams::new(*p.sigma_plus(), *p.sigma_minus(), p.mu_plus(), p.mu_minus(), Some(SkewVector::new(q1, q2)))
            .unwrap()
    })
}

pub fn params_in_case(tag: CaseTag) -> impl Strategy<Value = ModelParams> {
    params().prop_filter("case", move |p| case_classify(p).ok() == Some(tag))
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
