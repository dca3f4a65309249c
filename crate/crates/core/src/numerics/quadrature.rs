//! Quadrature rules.
//!
//! * [`TanhSinhRule`]: double-exponential rule on `(0, 1)` whose nodes carry
//!   both the distance to `0` and the distance to `1` without cancellation,
//!   so algebraic end-point singularities like `u^{-0.9}` integrate to full
//!   precision.
//! * [`tanh_sinh`]: level-adaptive driver for the same transformation.
//! * [`gauss_legendre`]: Legendre nodes by Newton iteration.
//! * [`gauss_kronrod`]: globally adaptive G7/K15 with bisection.

use std::f64::consts::PI;

/// Fixed double-exponential rule on `(0, 1)`.
#[derive(Debug, Clone)]
pub struct TanhSinhRule {
    /// Nodes `x_q ∈ (0, 1)`.
    pub x: Vec<f64>,
    /// `1 - x_q`, computed directly.
    pub xc: Vec<f64>,
    pub w: Vec<f64>,
}

impl TanhSinhRule {
    /// Rule with step `h` over `|t| ≤ t_max`.
    pub fn new(h: f64, t_max: f64) -> Self {
        let k_max = (t_max / h).ceil() as i64;
        let mut x = Vec::with_capacity(2 * k_max as usize + 1);
        let mut xc = Vec::with_capacity(x.capacity());
        let mut w = Vec::with_capacity(x.capacity());
        for k in -k_max..=k_max {
            let t = k as f64 * h;
            if let Some((xn, xcn, wn)) = node(t) {
                x.push(xn);
                xc.push(xcn);
                w.push(wn * h);
            }
        }
        Self { x, xc, w }
    }

    /// Rule resolving `∫_0^1 u^{p}` for `p > -1` to about `1e-15` relative
    /// error, for integrands that are otherwise analytic on a neighbourhood
    /// of `[0, 1]`.
    pub fn for_singularity(p: f64, h: f64) -> Self {
        // Truncate where the neglected end mass u_min^{p+1}/(p+1) is negligible.
        let q = (p + 1.0).clamp(1e-3, 1.0);
        let ln_u_min = ((1e-17 * q).ln() / q).max(-700.0);
        // u = 1/(1 + e^{π sinh t}) ≈ e^{-π sinh t}
        let t_max = (-ln_u_min / PI).asinh() + h;
        Self::new(h, t_max)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// `∫_a^b f` where `f(x, x - a, b - x)`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64, f64, f64) -> f64) -> f64 {
        let len = b - a;
        let mut acc = super::NeumaierSum::default();
        for q in 0..self.x.len() {
            let da = len * self.x[q];
            let db = len * self.xc[q];
            let x = if da < db { a + da } else { b - db };
            acc.add(self.w[q] * f(x, da, db));
        }
        acc.sum() * len
    }
}

fn node(t: f64) -> Option<(f64, f64, f64)> {
    let s = PI * t.sinh();
    // x = 1/(1+e^{-s}),  1-x = 1/(1+e^{s})
    let (x, xc) = if s >= 0.0 {
        let e = (-s).exp();
        (1.0 / (1.0 + e), e / (1.0 + e))
    } else {
        let e = s.exp();
        (e / (1.0 + e), 1.0 / (1.0 + e))
    };
    // dx/dt = π cosh t · x (1 - x)
    let w = PI * t.cosh() * x * xc;
    if x <= 0.0 || xc <= 0.0 || !w.is_finite() || w == 0.0 {
        None
    } else {
        Some((x, xc, w))
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Level-adaptive tanh-sinh on `(a, b)`. The integrand receives
/// `(x, x - a, b - x)` with both distances free of cancellation.
///
/// Halves the step until two successive levels agree to
/// `max(abs_tol, rel_tol·|I|)` or `max_level` is reached.
pub fn tanh_sinh(
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    mut f: impl FnMut(f64, f64, f64) -> f64,
) -> Quad {
    const T_MAX: f64 = 6.5;
    const MAX_LEVEL: u32 = 10;
    let len = b - a;
    if len <= 0.0 {
        return Quad {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        };
    }
    let mut eval = |t: f64| -> f64 {
        match node(t) {
            Some((x, xc, w)) => {
                let da = len * x;
                let db = len * xc;
                let xx = if da < db { a + da } else { b - db };
                let v = w * f(xx, da, db);
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            }
            None => 0.0,
        }
    };
    let mut h = 0.5;
    let mut sum = super::NeumaierSum::default();
    let k_max = (T_MAX / h) as i64;
    let mut evaluations = 0;
    for k in -k_max..=k_max {
        sum.add(eval(k as f64 * h));
        evaluations += 1;
    }
    let mut prev = sum.sum() * h * len;
    let mut error = f64::INFINITY;
    for _ in 0..MAX_LEVEL {
        h *= 0.5;
        let k_max = (T_MAX / h) as i64;
        let mut k = if k_max % 2 == 0 { 1 - k_max } else { -k_max };
        while k <= k_max {
            sum.add(eval(k as f64 * h));
            evaluations += 1;
            k += 2;
        }
        let cur = sum.sum() * h * len;
        error = (cur - prev).abs();
        prev = cur;
        if error <= abs_tol.max(rel_tol * cur.abs()) {
            break;
        }
    }
    Quad {
        value: prev,
        error,
        evaluations,
    }
}

/// `n`-point Gauss–Legendre nodes and weights on `(-1, 1)`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to `(a, b)`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    x: Vec<f64>,
    w: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        Self { x, w }
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        let mut s = 0.0;
        for (x, w) in self.x.iter().zip(&self.w) {
            s += w * f(c + r * x);
        }
        s * r
    }

    /// Mapped nodes and weights on `(a, b)`.
    pub fn nodes_on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        self.x.iter().zip(&self.w).map(move |(x, w)| (c + r * x, w * r))
    }
}

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

fn gk15(a: f64, b: f64, f: &mut impl FnMut(f64) -> f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = r * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * r, ((k - g) * r).abs())
}

/// Globally adaptive G7/K15 on `(a, b)`; bisects the interval with the
/// largest error estimate until the total estimate meets the tolerance.
pub fn gauss_kronrod(
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
    mut f: impl FnMut(f64) -> f64,
) -> Quad {
    let mut intervals: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (v, e) = gk15(a, b, &mut f);
    intervals.push((a, b, v, e));
    let mut evaluations = 15;
    loop {
        let (total, err): (f64, f64) = intervals
            .iter()
            .fold((0.0, 0.0), |(s, t), iv| (s + iv.2, t + iv.3));
        if err <= abs_tol.max(rel_tol * total.abs()) || intervals.len() >= max_intervals {
            return Quad {
                value: total,
                error: err,
                evaluations,
            };
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(lo, mid, &mut f);
        let (v2, e2) = gk15(mid, hi, &mut f);
        evaluations += 30;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}
