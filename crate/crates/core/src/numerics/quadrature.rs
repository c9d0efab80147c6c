//! Globally adaptive Gauss-Kronrod (10/21 point) integration on finite
//! intervals, plus a log-space front end for integrands that would underflow.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 0.0,
            rel_tol: 1e-12,
            max_intervals: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub intervals: usize,
}

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

fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = fc.abs() * WGK[10];
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (result, err)
}

/// Integrates `f` over `[a, b]` by repeatedly bisecting the segment with the
/// largest error estimate.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("integration bounds must be finite"));
    }
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            abs_error: 0.0,
            intervals: 0,
        });
    }
    let (v, e) = gk21(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v, error: e });
    let mut total = v;
    let mut total_err = e;
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total.abs());
        if total_err <= tol {
            break;
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::Quadrature {
                achieved: total_err,
                requested: tol,
            });
        }
        let seg = heap.pop().expect("nonempty heap");
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval cannot be split further in floating point.
            heap.push(seg);
            let achieved = total_err;
            if achieved <= 1e3 * tol {
                break;
            }
            return Err(Error::Quadrature {
                achieved,
                requested: tol,
            });
        }
        let (v1, e1) = gk21(&f, seg.a, mid);
        let (v2, e2) = gk21(&f, mid, seg.b);
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        heap.push(Segment { a: seg.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: seg.b, value: v2, error: e2 });
    }
    // Re-sum to shed accumulated cancellation from the running totals.
    let mut value = 0.0;
    let mut abs_error = 0.0;
    let intervals = heap.len();
    for s in heap {
        value += s.value;
        abs_error += s.error;
    }
    Ok(QuadResult {
        value,
        abs_error,
        intervals,
    })
}

/// Natural log of `∫_a^b exp(log_f(x)) dx` for a nonnegative integrand given
/// in log form.
///
/// The log-integrand is scanned on a grid to find its maximum, which is then
/// factored out before integrating in linear space, so integrands whose values
/// are far outside the double range are handled. `abs_log_tol` bounds the
/// error of the returned logarithm.
pub fn integrate_log<F: Fn(f64) -> f64>(log_f: F, a: f64, b: f64, abs_log_tol: f64) -> Result<f64> {
    const GRID: usize = 256;
    let mut peak = f64::NEG_INFINITY;
    let mut peak_x = a;
    for i in 0..=GRID {
        // Stay strictly inside the interval: endpoints may be singular.
        let t = (i as f64 + 0.5) / (GRID as f64 + 1.0);
        let x = a + (b - a) * t;
        let v = log_f(x);
        if v > peak {
            peak = v;
            peak_x = x;
        }
    }
    if peak == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    // Golden-section refinement of the peak location; only the scale matters,
    // so an approximate maximum is enough.
    let h = (b - a) / (GRID as f64 + 1.0);
    let (mut lo, mut hi) = ((peak_x - h).max(a), (peak_x + h).min(b));
    let g = 0.618_033_988_749_894_9;
    for _ in 0..60 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if log_f(x1) > log_f(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    peak = peak.max(log_f(0.5 * (lo + hi)));

    // Split at the peak so that a narrow spike is resolved from the start.
    let opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol: abs_log_tol.min(1e-6) * 0.5,
        max_intervals: 4000,
    };
    let x_peak = 0.5 * (lo + hi);
    let scaled = |x: f64| {
        let v = log_f(x) - peak;
        if v.is_nan() {
            0.0
        } else {
            v.exp()
        }
    };
    let mut total = 0.0;
    let mut err = 0.0;
    for (l, r) in [(a, x_peak), (x_peak, b)] {
        if r > l {
            let q = integrate(&scaled, l, r, opts)?;
            total += q.value;
            err += q.abs_error;
        }
    }
    if total <= 0.0 {
        return Err(Error::Quadrature {
            achieved: err,
            requested: abs_log_tol,
        });
    }
    let log_err = err / total;
    if log_err > abs_log_tol {
        return Err(Error::Quadrature {
            achieved: log_err,
            requested: abs_log_tol,
        });
    }
    Ok(peak + total.ln())
}

/// Natural log of `∫ exp(log_f(x)) dx` over the whole real line for a
/// unimodal integrand whose tails decay at least exponentially.
///
/// The mode is located by hill climbing from `x0` followed by golden-section
/// refinement; the range is then cut where the log-integrand has dropped 60
/// below its peak and handed to [`integrate_log`].
pub fn integrate_log_real_line<F: Fn(f64) -> f64>(log_f: F, x0: f64, abs_log_tol: f64) -> Result<f64> {
    const DROP: f64 = 60.0;
    let f0 = log_f(x0);
    if !f0.is_finite() {
        return Err(Error::domain(format!("log-integrand is not finite at the starting point {x0}")));
    }
    // Bracket the mode.
    let (mut lo, mut hi);
    let up = log_f(x0 + 1e-3) >= f0;
    let dir = if up { 1.0 } else { -1.0 };
    let mut x = x0;
    let mut fx = f0;
    let mut h = 1e-3;
    loop {
        let next = x + dir * h;
        let fn_ = log_f(next);
        if !(fn_ > fx) {
            lo = (x - dir * h / 2.0).min(next);
            hi = (x - dir * h / 2.0).max(next);
            break;
        }
        x = next;
        fx = fn_;
        h *= 2.0;
        if h > 1e6 {
            return Err(Error::domain("log-integrand has no interior maximum"));
        }
    }
    let g = 0.618_033_988_749_894_9;
    for _ in 0..100 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if log_f(x1) > log_f(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let mode = 0.5 * (lo + hi);
    let peak = log_f(mode).max(fx);
    let edge = |dir: f64| -> Result<f64> {
        let mut h = 1e-3;
        loop {
            let y = mode + dir * h;
            if log_f(y) < peak - DROP {
                return Ok(y);
            }
            h *= 1.5;
            if h > 1e6 {
                return Err(Error::domain("log-integrand tails do not decay"));
            }
        }
    };
    let a = edge(-1.0)?;
    let b = edge(1.0)?;
    integrate_log(log_f, a, b, abs_log_tol)
}
