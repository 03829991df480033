//! Globally adaptive Gauss–Kronrod (10/21 point) quadrature.

// Node and weight tables are quoted to full published precision.
#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

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

// Gauss weights for the nodes XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_intervals: 400,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
}

struct Segment {
    a: f64,
    b: f64,
    value: Vec<f64>,
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

/// One 21-point Kronrod rule on `[a, b]` for a vector-valued integrand.
/// Returns the Kronrod estimate and the max-norm of `K - G`.
fn gk21<F>(f: &mut F, a: f64, b: f64, dim: usize, buf: &mut [f64]) -> (Vec<f64>, f64)
where
    F: FnMut(f64, &mut [f64]),
{
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kron = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];

    f(centre, buf);
    for d in 0..dim {
        kron[d] = WGK[10] * buf[d];
    }
    for j in 0..10 {
        let dx = half * XGK[j];
        let wk = WGK[j];
        let wg = if j % 2 == 1 { WG[j / 2] } else { 0.0 };
        for x in [centre - dx, centre + dx] {
            f(x, buf);
            for d in 0..dim {
                kron[d] += wk * buf[d];
                gauss[d] += wg * buf[d];
            }
        }
    }
    let mut err = 0.0f64;
    for d in 0..dim {
        kron[d] *= half;
        gauss[d] *= half;
        err = err.max((kron[d] - gauss[d]).abs());
    }
    (kron, err)
}

/// Adaptive integration of a vector-valued integrand over the finite `[a, b]`.
/// The tolerance applies to the max-norm of the result.
pub fn integrate_vec<F>(mut f: F, dim: usize, a: f64, b: f64, opts: QuadOptions) -> (Vec<f64>, f64)
where
    F: FnMut(f64, &mut [f64]),
{
    let mut buf = vec![0.0; dim];
    let (value, error) = gk21(&mut f, a, b, dim, &mut buf);
    let mut total = value.clone();
    let mut total_err = error;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });

    while heap.len() < opts.max_intervals {
        let scale = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if total_err <= opts.abs_tol.max(opts.rel_tol * scale) {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let (lv, le) = gk21(&mut f, worst.a, mid, dim, &mut buf);
        let (rv, re) = gk21(&mut f, mid, worst.b, dim, &mut buf);
        for d in 0..dim {
            total[d] += lv[d] + rv[d] - worst.value[d];
        }
        total_err += le + re - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: lv, error: le });
        heap.push(Segment { a: mid, b: worst.b, value: rv, error: re });
    }
    // Re-sum to shed accumulated rounding from the incremental updates.
    let mut value = vec![0.0; dim];
    let mut error = 0.0;
    for seg in heap {
        for d in 0..dim {
            value[d] += seg.value[d];
        }
        error += seg.error;
    }
    (value, error)
}

/// Scalar adaptive integration over the finite `[a, b]`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> QuadResult
where
    F: FnMut(f64) -> f64,
{
    let (v, error) = integrate_vec(
        |x, out: &mut [f64]| {
            out[0] = f(x);
        },
        1,
        a,
        b,
        opts,
    );
    QuadResult { value: v[0], error }
}

/// `∫_{-∞}^{upper} f`, via `x = upper − (1 − s)/s` on `s ∈ (0, 1]`.
pub fn integrate_lower_tail<F>(mut f: F, upper: f64, opts: QuadOptions) -> QuadResult
where
    F: FnMut(f64) -> f64,
{
    integrate(
        |s| {
            if s <= 0.0 {
                return 0.0;
            }
            let t = (1.0 - s) / s;
            f(upper - t) / (s * s)
        },
        0.0,
        1.0,
        opts,
    )
}

/// `∫_{lower}^{∞} f`, via `x = lower + (1 − s)/s`.
pub fn integrate_upper_tail<F>(mut f: F, lower: f64, opts: QuadOptions) -> QuadResult
where
    F: FnMut(f64) -> f64,
{
    integrate(
        |s| {
            if s <= 0.0 {
                return 0.0;
            }
            let t = (1.0 - s) / s;
            f(lower + t) / (s * s)
        },
        0.0,
        1.0,
        opts,
    )
}

/// Vector-valued `∫_{-∞}^{∞} f`, split at `centre`.
pub fn integrate_vec_real_line<F>(mut f: F, dim: usize, centre: f64, opts: QuadOptions) -> Vec<f64>
where
    F: FnMut(f64, &mut [f64]),
{
    let mut left = integrate_vec(
        |s, out: &mut [f64]| {
            let t = (1.0 - s) / s;
            f(centre - t, out);
            let jac = 1.0 / (s * s);
            out.iter_mut().for_each(|v| *v *= jac);
        },
        dim,
        0.0,
        1.0,
        opts,
    )
    .0;
    let right = integrate_vec(
        |s, out: &mut [f64]| {
            let t = (1.0 - s) / s;
            f(centre + t, out);
            let jac = 1.0 / (s * s);
            out.iter_mut().for_each(|v| *v *= jac);
        },
        dim,
        0.0,
        1.0,
        opts,
    )
    .0;
    for (l, r) in left.iter_mut().zip(right) {
        *l += r;
    }
    left
}
