//! Globally adaptive Gauss–Kronrod (7/15) quadrature with caller-supplied
//! breakpoints and an explicit tail bound for semi-infinite ranges.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature did not converge after {subdivisions} subdivisions: error estimate {achieved:e} > requested {requested:e}")]
    NonConvergence {
        achieved: f64,
        requested: f64,
        subdivisions: usize,
    },
    #[error("tail beyond truncation radius {radius} bounded by {bound:e}, above abs_tol {abs_tol:e}")]
    TailTooLarge { radius: f64, bound: f64, abs_tol: f64 },
    #[error("integrand returned a non-finite value at x = {at}")]
    NonFinite { at: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Meters. For network integrals this is also the edge of the simulated
    /// network disk.
    pub truncation_radius: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 1e-9,
            truncation_radius: 30_000.0,
            max_subdivisions: 4_000,
        }
    }
}

impl QuadratureSpec {
    pub fn tolerance_for(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

/// What is known about the integrand beyond the truncation radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailBound {
    /// The integrand vanishes past the truncation radius.
    Zero,
    /// |f(z)| ≤ coefficient · z^(−exponent) for z ≥ truncation radius, with
    /// exponent > 1.
    PowerLaw { coefficient: f64, exponent: f64 },
}

impl TailBound {
    fn bound(&self, radius: f64) -> f64 {
        match *self {
            TailBound::Zero => 0.0,
            TailBound::PowerLaw {
                coefficient,
                exponent,
            } => {
                if exponent <= 1.0 {
                    f64::INFINITY
                } else {
                    coefficient.abs() * radius.powf(1.0 - exponent) / (exponent - 1.0)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One node of the 15-point rule mapped onto a concrete interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub x: f64,
    pub kronrod_weight: f64,
    /// Zero for Kronrod-only nodes.
    pub gauss_weight: f64,
}

/// The 15 Kronrod nodes of [a, b] with both weight sets, for callers that
/// cache integrand factors per node.
pub fn gk15_nodes(a: f64, b: f64) -> [Node; 15] {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut nodes = [Node {
        x: center,
        kronrod_weight: WGK[7] * half,
        gauss_weight: WG[3] * half,
    }; 15];
    for j in 0..7 {
        let wg = if j % 2 == 1 { WG[j / 2] * half } else { 0.0 };
        let dx = half * XGK[j];
        nodes[2 * j] = Node {
            x: center - dx,
            kronrod_weight: WGK[j] * half,
            gauss_weight: wg,
        };
        nodes[2 * j + 1] = Node {
            x: center + dx,
            kronrod_weight: WGK[j] * half,
            gauss_weight: wg,
        };
    }
    nodes
}

/// QUADPACK's error heuristic from the Kronrod and Gauss estimates.
pub fn kronrod_error(kronrod: f64, gauss: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut err = (kronrod - gauss).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    err
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<Segment, QuadratureError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    if !fc.is_finite() {
        return Err(QuadratureError::NonFinite { at: center });
    }
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut res_abs = fc.abs() * WGK[7];
    let mut fv = [(0.0, 0.0); 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let (x1, x2) = (center - dx, center + dx);
        let f1 = f(x1);
        let f2 = f(x2);
        if !f1.is_finite() {
            return Err(QuadratureError::NonFinite { at: x1 });
        }
        if !f2.is_finite() {
            return Err(QuadratureError::NonFinite { at: x2 });
        }
        fv[j] = (f1, f2);
        kronrod += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = kronrod * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv[j].0 - mean).abs() + (fv[j].1 - mean).abs());
    }
    let h = half.abs();
    Ok(Segment {
        a,
        b,
        value: kronrod * half,
        error: kronrod_error(kronrod * h, gauss * h, res_abs * h, res_asc * h),
    })
}

/// Adaptive integration of `f` over [a, b], split first at every breakpoint
/// strictly inside the interval. Converges when the summed error estimate is
/// at most max(abs_tol, rel_tol·|I|).
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_subdivisions: usize,
) -> Result<Integral, QuadratureError> {
    if b <= a {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let mut edges: Vec<f64> = Vec::with_capacity(breakpoints.len() + 2);
    edges.push(a);
    edges.extend(breakpoints.iter().copied().filter(|&p| p > a && p < b));
    edges.push(b);
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    let mut heap = BinaryHeap::with_capacity(edges.len() * 2);
    let mut evaluations = 0;
    for w in edges.windows(2) {
        heap.push(gk15(&mut f, w[0], w[1])?);
        evaluations += 15;
    }
    let mut subdivisions = heap.len();
    let (mut value, mut error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), s: &Segment| (v + s.value, e + s.error));
    loop {
        let tol = abs_tol.max(rel_tol * value.abs());
        if error <= tol {
            // Re-sum to shed drift from the running totals.
            let (value, error) = heap
                .iter()
                .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
            return Ok(Integral {
                value,
                error,
                evaluations,
            });
        }
        if subdivisions >= max_subdivisions {
            return Err(QuadratureError::NonConvergence {
                achieved: error,
                requested: tol,
                subdivisions,
            });
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval can no longer be split in floating point.
            return Err(QuadratureError::NonConvergence {
                achieved: error,
                requested: tol,
                subdivisions,
            });
        }
        let left = gk15(&mut f, worst.a, mid)?;
        let right = gk15(&mut f, mid, worst.b)?;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        evaluations += 30;
        subdivisions += 1;
    }
}

/// ∫_lower^∞ f, computed as adaptive quadrature over
/// [lower, spec.truncation_radius] plus a verified bound on the remainder.
/// The tail bound is added to the reported error and must itself stay below
/// `abs_tol`.
pub fn integrate_semi_infinite<F: FnMut(f64) -> f64>(
    f: F,
    lower: f64,
    breakpoints: &[f64],
    spec: &QuadratureSpec,
    tail: TailBound,
) -> Result<Integral, QuadratureError> {
    let radius = spec.truncation_radius;
    let tail_bound = if lower >= radius {
        tail.bound(lower)
    } else {
        tail.bound(radius)
    };
    if !(tail_bound <= spec.abs_tol) {
        return Err(QuadratureError::TailTooLarge {
            radius,
            bound: tail_bound,
            abs_tol: spec.abs_tol,
        });
    }
    let remaining = (spec.abs_tol - tail_bound).max(spec.abs_tol * 1e-3);
    let mut body = integrate(
        f,
        lower,
        radius,
        breakpoints,
        remaining,
        spec.rel_tol,
        spec.max_subdivisions,
    )?;
    body.error += tail_bound;
    Ok(body)
}
