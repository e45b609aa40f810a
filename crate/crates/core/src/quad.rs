//! Adaptive Gauss–Kronrod (7/15) quadrature with compensated summation.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// 15-point Kronrod estimate of `∫_a^b f` and its difference from the embedded
/// 7-point Gauss rule, plus `∫|f|` on the same nodes.
pub fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    let mut abs = fc.abs() * WGK[7];
    for j in 0..7 {
        let dx = h * XGK[j];
        let (f1, f2) = (f(c - dx), f(c + dx));
        k += WGK[j] * (f1 + f2);
        abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            g += WG[j / 2] * (f1 + f2);
        }
    }
    (k * h, ((k - g) * h).abs(), abs * h.abs())
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&o.error)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    /// `∫|f|` estimate, useful to judge cancellation.
    pub abs: f64,
    pub evaluations: usize,
}

/// Globally adaptive integration over consecutive intervals given by `breaks`.
/// Bisects the piece with the largest error until the total error is below
/// `max(rel_tol·|I|, abs_tol)`.
pub fn integrate_breaks(
    f: &impl Fn(f64) -> f64,
    breaks: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    max_evals: usize,
) -> Result<QuadResult> {
    let mut heap = BinaryHeap::new();
    let mut evals = 0;
    let (mut run_value, mut run_err) = (0.0, 0.0);
    for w in breaks.windows(2) {
        let (v, e, a) = gk15(f, w[0], w[1]);
        evals += 15;
        run_value += v;
        run_err += e;
        heap.push(Piece { a: w[0], b: w[1], value: v, error: e, abs: a });
    }
    loop {
        if !run_value.is_finite() || !run_err.is_finite() {
            return Err(Error::QuadratureFailure { error: f64::INFINITY, target: rel_tol });
        }
        let target = (rel_tol * run_value.abs()).max(abs_tol);
        if run_err <= target || evals >= max_evals {
            // Final sum in a fixed order with compensation, independent of heap layout.
            let mut pieces: Vec<&Piece> = heap.iter().collect();
            pieces.sort_by(|x, y| x.a.total_cmp(&y.a));
            let (mut total, mut err, mut abs) = (KahanSum::default(), KahanSum::default(), 0.0);
            for p in &pieces {
                total.add(p.value);
                err.add(p.error);
                abs += p.abs;
            }
            let (value, error) = (total.value(), err.value());
            let target = (rel_tol * value.abs()).max(abs_tol);
            if error <= target {
                return Ok(QuadResult { value, error, abs, evaluations: evals });
            }
            if evals >= max_evals {
                return Err(Error::QuadratureFailure { error, target });
            }
            run_value = value;
            run_err = error;
        }
        let worst = heap.pop().unwrap();
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            // Interval exhausted at machine precision: accept its error.
            run_err -= worst.error;
            heap.push(Piece { error: 0.0, ..worst });
            continue;
        }
        let (v1, e1, a1) = gk15(f, worst.a, m);
        let (v2, e2, a2) = gk15(f, m, worst.b);
        evals += 30;
        run_value += v1 + v2 - worst.value;
        run_err += e1 + e2 - worst.error;
        heap.push(Piece { a: worst.a, b: m, value: v1, error: e1, abs: a1 });
        heap.push(Piece { a: m, b: worst.b, value: v2, error: e2, abs: a2 });
    }
}

pub fn integrate(f: &impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<QuadResult> {
    integrate_breaks(f, &[a, b], rel_tol, abs_tol, 2_000_000)
}

/// Repeated averaging of consecutive partial sums of an oscillating series.
/// Returns the accelerated limit and the change at the last level.
pub fn averaged_limit(partial: &[f64], levels: usize) -> (f64, f64) {
    let mut row = partial.to_vec();
    let mut prev = *row.last().unwrap_or(&0.0);
    for _ in 0..levels.min(partial.len().saturating_sub(1)) {
        prev = *row.last().unwrap();
        row = row.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    let last = *row.last().unwrap_or(&0.0);
    (last, (last - prev).abs())
}

/// Nodes of the 15-point Kronrod rule on `[a, b]` as `(x, kronrod weight,
/// embedded Gauss weight)`; the Gauss weight is zero on the added nodes.
pub fn kronrod_nodes(a: f64, b: f64) -> Vec<(f64, f64, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut out = vec![(c, WGK[7] * h, WG[3] * h)];
    for j in 0..7 {
        let g = if j % 2 == 1 { WG[j / 2] * h } else { 0.0 };
        out.push((c - h * XGK[j], WGK[j] * h, g));
        out.push((c + h * XGK[j], WGK[j] * h, g));
    }
    out
}
