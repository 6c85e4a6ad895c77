//! Globally adaptive 21-point Gauss–Kronrod quadrature for complex integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

#[rustfmt::skip]
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

#[rustfmt::skip]
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[rustfmt::skip]
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

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: Complex64,
    pub error: f64,
    pub intervals: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> Complex64>(f: &F, lo: f64, hi: f64) -> Panel {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let f_center = f(center);
    let mut gauss = Complex64::new(0.0, 0.0);
    let mut kron = f_center * WGK[10];
    let mut abs_sum = f_center.norm() * WGK[10];
    let mut values = [(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)); 10];
    for (j, slot) in values.iter_mut().enumerate() {
        let dx = half * XGK[j];
        let (f1, f2) = (f(center - dx), f(center + dx));
        *slot = (f1, f2);
        kron += (f1 + f2) * WGK[j];
        abs_sum += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            gauss += (f1 + f2) * WG[j / 2];
        }
    }
    let mean = kron * 0.5;
    let mut asc = (f_center - mean).norm() * WGK[10];
    for (j, (f1, f2)) in values.iter().enumerate() {
        asc += ((f1 - mean).norm() + (f2 - mean).norm()) * WGK[j];
    }
    let scale = half.abs();
    let asc = asc * scale;
    let abs_sum = abs_sum * scale;
    let mut error = ((kron - gauss) * half).norm();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    if abs_sum > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * abs_sum);
    }
    Panel {
        lo,
        hi,
        value: kron * half,
        error,
    }
}

/// Integrate `f` over `[points[0], points[last]]`, starting from one panel per
/// consecutive pair of `points` (which must be sorted ascending).
pub fn integrate<F>(f: F, points: &[f64], opts: AdaptiveOptions) -> Integral
where
    F: Fn(f64) -> Complex64,
{
    assert!(points.len() >= 2, "need at least two break points");
    let mut heap: BinaryHeap<Panel> = points
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| kronrod(&f, w[0], w[1]))
        .collect();
    let totals = |heap: &BinaryHeap<Panel>| {
        heap.iter()
            .fold((Complex64::new(0.0, 0.0), 0.0), |(v, e), p| {
                (v + p.value, e + p.error)
            })
    };
    let (mut value, mut error) = totals(&heap);
    while error > opts.abs_tol.max(opts.rel_tol * value.norm()) {
        if heap.len() >= opts.max_intervals {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            heap.push(worst);
            break;
        }
        let left = kronrod(&f, worst.lo, mid);
        let right = kronrod(&f, mid, worst.hi);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    let (value, error) = totals(&heap);
    Integral {
        value,
        error,
        intervals: heap.len(),
        converged: error <= opts.abs_tol.max(opts.rel_tol * value.norm()),
    }
}

/// Sorted, deduplicated break points inside `[lo, hi]`, always including both ends.
pub fn break_points(lo: f64, hi: f64, interior: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut pts: Vec<f64> = interior
        .into_iter()
        .filter(|x| *x > lo && *x < hi)
        .collect();
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));
    pts
}
