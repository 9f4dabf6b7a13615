//! Two-sample tests and the special functions behind their p-values.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

/// Outcome of a two-sample test.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    /// Welch–Satterthwaite degrees of freedom (Welch only).
    pub df: Option<f64>,
    pub n1: usize,
    pub n2: usize,
    /// The test could not run; `p_value` is reported as 1.
    pub inconclusive: bool,
}

impl TestResult {
    fn inconclusive(n1: usize, n2: usize) -> Self {
        Self {
            statistic: 0.0,
            p_value: 1.0,
            reject: false,
            df: None,
            n1,
            n2,
            inconclusive: true,
        }
    }
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut a = LANCZOS[0];
        let t = x + LANCZOS_G + 0.5;
        for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
    }
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Two-sided Student-t tail probability `P(|T| >= |t|)` with `df` degrees of
/// freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(0.5 * df, 0.5, x).clamp(0.0, 1.0)
}

/// Kolmogorov distribution survival function
/// `Q(λ) = 2 Σ_{k≥1} (-1)^{k-1} exp(-2 k² λ²)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        // Jacobi theta form converges fast for small λ:
        // P(K <= λ) = sqrt(2π)/λ Σ_{k≥1} exp(-(2k-1)² π² / (8 λ²))
        let mut cdf = 0.0;
        let c = PI * PI / (8.0 * lambda * lambda);
        for k in 1..=50 {
            let j = (2 * k - 1) as f64;
            let term = (-j * j * c).exp();
            cdf += term;
            if term < 1e-20 {
                break;
            }
        }
        (1.0 - (2.0 * PI).sqrt() / lambda * cdf).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 1..=100 {
            let k = k as f64;
            let term = (-2.0 * k * k * lambda * lambda).exp();
            sum += sign * term;
            if term < 1e-20 {
                break;
            }
            sign = -sign;
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// Welch's unequal-variance two-sample t-test, two-sided.
///
/// Needs at least two observations per side. When both samples have zero
/// variance the statistic degenerates: equal means give `p = 1`, different
/// means `p = 0`.
pub fn welch_t_test(a: &[f64], b: &[f64], alpha: f64) -> TestResult {
    let (n1, n2) = (a.len(), b.len());
    if n1 < 2 || n2 < 2 {
        return TestResult::inconclusive(n1, n2);
    }
    let (m1, v1) = mean_and_variance(a);
    let (m2, v2) = mean_and_variance(b);
    let s1 = v1 / n1 as f64;
    let s2 = v2 / n2 as f64;
    let diff = m1 - m2;
    let se2 = s1 + s2;
    if se2 == 0.0 {
        let (statistic, p_value) = if diff == 0.0 {
            (0.0, 1.0)
        } else {
            (diff.signum() * f64::INFINITY, 0.0)
        };
        return TestResult {
            statistic,
            p_value,
            reject: p_value < alpha,
            df: None,
            n1,
            n2,
            inconclusive: false,
        };
    }
    let statistic = diff / se2.sqrt();
    let df = se2 * se2 / (s1 * s1 / (n1 as f64 - 1.0) + s2 * s2 / (n2 as f64 - 1.0));
    let p_value = student_t_two_sided(statistic, df);
    TestResult {
        statistic,
        p_value,
        reject: p_value < alpha,
        df: Some(df),
        n1,
        n2,
        inconclusive: false,
    }
}

/// Two-sample Smirnov (Kolmogorov–Smirnov) test with the asymptotic
/// Kolmogorov p-value at effective size `n1 n2 / (n1 + n2)`.
pub fn smirnov_test(a: &[f64], b: &[f64], alpha: f64) -> TestResult {
    let (n1, n2) = (a.len(), b.len());
    if n1 == 0 || n2 == 0 {
        return TestResult::inconclusive(n1, n2);
    }
    let d = ks_statistic(a, b);
    let en = (n1 * n2) as f64 / (n1 + n2) as f64;
    let p_value = kolmogorov_sf(en.sqrt() * d);
    TestResult {
        statistic: d,
        p_value,
        reject: p_value < alpha,
        df: None,
        n1,
        n2,
        inconclusive: false,
    }
}

/// `sup_x |F_a(x) - F_b(x)|` over the empirical CDFs.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut xs: Vec<f64> = a.to_vec();
    let mut ys: Vec<f64> = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n1, n2) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let x = if xs[i] <= ys[j] { xs[i] } else { ys[j] };
        while i < xs.len() && xs[i] <= x {
            i += 1;
        }
        while j < ys.len() && ys[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n1 - j as f64 / n2).abs());
    }
    d
}
