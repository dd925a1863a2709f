//! Independent oracles for the acceptance suite: adaptive quadrature,
//! Kolmogorov–Smirnov and chi-square tests, and fixture helpers. Nothing
//! here calls the implementation paths it is used to check.

#![allow(dead_code)]

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance
/// `tol`, splitting first at the supplied breakpoints (kernel edges).
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    tol: f64,
) -> f64 {
    let mut cuts: Vec<f64> = vec![a];
    for &p in breakpoints {
        if p > a && p < b {
            cuts.push(p);
        }
    }
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += adaptive_simpson(f, w[0], w[1], tol / (cuts.len() - 1) as f64, 48);
    }
    total
}

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let whole = simpson(f, a, b);
    let m = 0.5 * (a + b);
    let left = simpson(f, a, m);
    let right = simpson(f, m, b);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive_simpson(f, a, m, tol / 2.0, depth - 1)
            + adaptive_simpson(f, m, b, tol / 2.0, depth - 1)
    }
}

/// One-sample Kolmogorov–Smirnov statistic against a CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    d
}

/// Asymptotic KS critical value at significance `alpha` for sample size n:
/// `c(α)/√n` with `c(α) = sqrt(-ln(α/2)/2)`.
pub fn ks_critical(alpha: f64, n: usize) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Exp(1) CDF.
pub fn exp1_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        1.0 - (-x).exp()
    }
}

/// Pearson chi-square statistic for observed counts against expected
/// probabilities (draws = Σ observed).
pub fn chi_square_statistic(observed: &[u64], probs: &[f64]) -> f64 {
    let total: u64 = observed.iter().sum();
    observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = p * total as f64;
            (o as f64 - e) * (o as f64 - e) / e
        })
        .sum()
}

/// Wilson–Hilferty approximation of the chi-square quantile.
pub fn chi_square_quantile(p: f64, df: usize) -> f64 {
    let z = standard_normal_quantile(p);
    let k = df as f64;
    let a = 2.0 / (9.0 * k);
    k * (1.0 - a + z * a.sqrt()).powi(3)
}

/// Acklam-style rational approximation of the standard normal quantile,
/// good to ~1.15e-9 over (0, 1).
pub fn standard_normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0);
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let p_low = 0.02425;
    if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -standard_normal_quantile(1.0 - p)
    }
}

/// Mean of a slice.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance (n−1 denominator).
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

#[cfg(test)]
mod self_checks {
    use super::*;

    #[test]
    fn simpson_oracle_on_known_integral() {
        let v = integrate_adaptive(&|x: f64| x.exp(), 0.0, 1.0, &[], 1e-12);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-10);
    }

    #[test]
    fn chi_square_quantiles_match_tables() {
        // published 0.99 quantiles: df=4 → 13.277, df=9 → 21.666
        assert!((chi_square_quantile(0.99, 4) - 13.2767).abs() < 0.06);
        assert!((chi_square_quantile(0.99, 9) - 21.666).abs() < 0.06);
    }

    #[test]
    fn normal_quantile_reference() {
        assert!((standard_normal_quantile(0.99) - 2.3263478740408408).abs() < 1e-8);
        assert!((standard_normal_quantile(0.5)).abs() < 1e-8);
    }
}
