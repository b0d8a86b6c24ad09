//! Normal tail functions, quadrature and binomial confidence bounds.

use statrs::distribution::{Beta, ContinuousCDF, Normal};

pub const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Survival function of the standard normal law, `P(N(0,1) > x)`.
///
/// Evaluated through the complementary error function, so the relative error
/// stays at the level of a few ulps as long as the result is a normal `f64`
/// (roughly `x <= 37.5`). Beyond that the value is subnormal; use
/// [`log_survival_psi`] there.
pub fn survival_psi(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    survival_psi(-x)
}

/// `ln P(N(0,1) > x)`, accurate far into the upper tail.
pub fn log_survival_psi(x: f64) -> f64 {
    if x < 30.0 {
        return survival_psi(x).ln();
    }
    // Asymptotic Mills-ratio series; at x >= 30 the truncation error is below 1e-15.
    let x2 = x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..8 {
        term *= -((2 * k - 1) as f64) / x2;
        sum += term;
    }
    -0.5 * x2 - x.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + sum.ln()
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Adaptive Gauss-Kronrod (7-15) quadrature of `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if a > b {
        return -integrate(f, b, a, tol);
    }
    gk_adaptive(&f, a, b, tol.max(1e-15))
}

/// Quadrature over `[a, +inf)` by the substitution `x = a + t / (1 - t)`.
pub fn integrate_to_inf<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> f64 {
    integrate(
        |t| {
            if t >= 1.0 {
                return 0.0;
            }
            let s = 1.0 - t;
            let v = f(a + t / s);
            if v == 0.0 { 0.0 } else { v / (s * s) }
        },
        0.0,
        1.0,
        tol,
    )
}

/// Quadrature over the whole real line.
pub fn integrate_real_line<F: Fn(f64) -> f64>(f: F, tol: f64) -> f64 {
    integrate_to_inf(&f, 0.0, tol) + integrate_to_inf(|x| f(-x), 0.0, tol)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const G_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Cap on the number of subintervals of one adaptive integration.
const GK_MAX_INTERVALS: usize = 2000;

fn gk_rule<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kronrod = 0.0;
    let mut gauss = 0.0;
    for (i, (&x, &w)) in GK_NODES.iter().zip(GK_WEIGHTS.iter()).enumerate() {
        if x == 0.0 {
            let v = f(c);
            kronrod += w * v;
            gauss += G_WEIGHTS[3] * v;
        } else {
            let v = f(c - h * x) + f(c + h * x);
            kronrod += w * v;
            if i % 2 == 1 {
                gauss += G_WEIGHTS[i / 2] * v;
            }
        }
    }
    (kronrod * h, (kronrod - gauss).abs() * h)
}

/// Globally adaptive bisection: split the interval with the largest error estimate
/// until the total error is below `tol` (or `1e-14` relative) or the interval cap is hit.
fn gk_adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let (v, e) = gk_rule(f, a, b);
    let mut parts = vec![(a, b, v, e)];
    loop {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= tol.max(1e-14 * total.abs()) || !err.is_finite() || parts.len() >= GK_MAX_INTERVALS {
            return total;
        }
        let (k, _) = parts.iter().enumerate().max_by(|x, y| x.1.3.total_cmp(&y.1.3)).expect("nonempty");
        let (lo, hi, _, _) = parts.swap_remove(k);
        let mid = 0.5 * (lo + hi);
        if !(lo < mid && mid < hi) {
            return total;
        }
        let (v1, e1) = gk_rule(f, lo, mid);
        let (v2, e2) = gk_rule(f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}

/// `∫_{lo}^{hi} exp(-|s|^beta) ds`, with infinite limits allowed.
///
/// Over the whole line the closed form `2 Γ(1 + 1/beta)` is used.
pub fn exp_power_integral(beta: f64, lo: f64, hi: f64) -> f64 {
    assert!(beta > 0.0, "exponent must be positive");
    if lo >= hi {
        return 0.0;
    }
    let half = libm::tgamma(1.0 + 1.0 / beta);
    // ∫_0^x e^{-s^β} ds
    let from_zero = |x: f64| -> f64 {
        if x.is_infinite() {
            half
        } else {
            integrate(|s| (-s.powf(beta)).exp(), 0.0, x, 1e-13)
        }
    };
    let signed = |x: f64| if x >= 0.0 { from_zero(x) } else { -from_zero(-x) };
    signed(hi) - signed(lo)
}

/// Exact Clopper–Pearson interval for `hits` successes out of `n` trials.
pub fn clopper_pearson(hits: u64, n: u64, level: f64) -> (f64, f64) {
    assert!(n > 0 && hits <= n);
    let a = 1.0 - level;
    let lo = if hits == 0 {
        0.0
    } else {
        Beta::new(hits as f64, (n - hits + 1) as f64)
            .map(|b| b.inverse_cdf(a / 2.0))
            .unwrap_or(0.0)
    };
    let hi = if hits == n {
        1.0
    } else {
        Beta::new((hits + 1) as f64, (n - hits) as f64)
            .map(|b| b.inverse_cdf(1.0 - a / 2.0))
            .unwrap_or(1.0)
    };
    (lo, hi)
}

/// One-sided upper Clopper–Pearson bound.
pub fn clopper_pearson_upper(hits: u64, n: u64, level: f64) -> f64 {
    if hits == n {
        return 1.0;
    }
    Beta::new((hits + 1) as f64, (n - hits) as f64)
        .map(|b| b.inverse_cdf(level))
        .unwrap_or(1.0)
}

/// Numerically stable `ln Σ exp(x_i)`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m.is_nan() {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}
