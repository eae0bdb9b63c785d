//! Goodness-of-fit tests, regressions and robust summaries.

/// Survival function of the Kolmogorov distribution, `P(K > t)`.
pub fn kolmogorov_sf(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t < 0.3 {
        // Alternating series converges poorly here; use the theta-function form.
        let s = (2.0 * std::f64::consts::PI).sqrt() / t;
        let mut acc = 0.0;
        for k in 1..=20 {
            let m = (2 * k - 1) as f64;
            acc += (-m * m * std::f64::consts::PI * std::f64::consts::PI / (8.0 * t * t)).exp();
        }
        return (1.0 - s * acc).clamp(0.0, 1.0);
    }
    let mut acc = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * t * t).exp();
        acc += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * acc).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF, with the
/// asymptotic p-value `Q(sqrt(n) D)`.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> TestResult {
    let mut v: Vec<f64> = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    TestResult { statistic: d, p_value: kolmogorov_sf(n.sqrt() * d) }
}

pub fn ks_exponential(samples: &[f64], rate: f64) -> TestResult {
    ks_test(samples, |x| if x <= 0.0 { 0.0 } else { 1.0 - (-rate * x).exp() })
}

pub fn ks_uniform(samples: &[f64], lo: f64, hi: f64) -> TestResult {
    ks_test(samples, |x| ((x - lo) / (hi - lo)).clamp(0.0, 1.0))
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn stderr_of_mean(x: &[f64]) -> f64 {
    (variance(x) / x.len() as f64).sqrt()
}

fn central_moment(x: &[f64], m: f64, k: i32) -> f64 {
    x.iter().map(|v| (v - m).powi(k)).sum::<f64>() / x.len() as f64
}

/// Moment estimator of the excess kurtosis.
pub fn excess_kurtosis(x: &[f64]) -> f64 {
    let m = mean(x);
    central_moment(x, m, 4) / central_moment(x, m, 2).powi(2) - 3.0
}

/// Linear-interpolated quantile, `q` in [0, 1].
pub fn quantile(x: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = x.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn median(x: &[f64]) -> f64 {
    quantile(x, 0.5)
}

pub fn iqr(x: &[f64]) -> f64 {
    quantile(x, 0.75) - quantile(x, 0.25)
}

/// D'Agostino-Pearson omnibus normality test (skewness and kurtosis
/// z-scores combined into a chi-square with two degrees of freedom).
pub fn normality_test(x: &[f64]) -> TestResult {
    let n = x.len() as f64;
    let m = mean(x);
    let m2 = central_moment(x, m, 2);
    let b1 = central_moment(x, m, 3) / m2.powf(1.5);
    let b2 = central_moment(x, m, 4) / (m2 * m2);

    let y = b1 * ((n + 1.0) * (n + 3.0) / (6.0 * (n - 2.0))).sqrt();
    let beta2 = 3.0 * (n * n + 27.0 * n - 70.0) * (n + 1.0) * (n + 3.0)
        / ((n - 2.0) * (n + 5.0) * (n + 7.0) * (n + 9.0));
    let w2 = -1.0 + (2.0 * (beta2 - 1.0)).sqrt();
    let delta = 1.0 / (0.5 * w2.ln()).sqrt();
    let alpha = (2.0 / (w2 - 1.0)).sqrt();
    let y = if y == 0.0 { 1.0 } else { y };
    let zs = delta * (y / alpha + ((y / alpha).powi(2) + 1.0).sqrt()).ln();

    let e = 3.0 * (n - 1.0) / (n + 1.0);
    let varb2 = 24.0 * n * (n - 2.0) * (n - 3.0) / ((n + 1.0).powi(2) * (n + 3.0) * (n + 5.0));
    let xk = (b2 - e) / varb2.sqrt();
    let sqrtbeta1 = 6.0 * (n * n - 5.0 * n + 2.0) / ((n + 7.0) * (n + 9.0))
        * (6.0 * (n + 3.0) * (n + 5.0) / (n * (n - 2.0) * (n - 3.0))).sqrt();
    let a = 6.0 + 8.0 / sqrtbeta1 * (2.0 / sqrtbeta1 + (1.0 + 4.0 / (sqrtbeta1 * sqrtbeta1)).sqrt());
    let term1 = 1.0 - 2.0 / (9.0 * a);
    let denom = 1.0 + xk * (2.0 / (a - 4.0)).sqrt();
    let term2 = denom.signum() * ((1.0 - 2.0 / a) / denom.abs()).cbrt();
    let zk = (term1 - term2) / (2.0 / (9.0 * a)).sqrt();

    let k2 = zs * zs + zk * zk;
    // Chi-square survival with two degrees of freedom.
    TestResult { statistic: k2, p_value: (-0.5 * k2).exp() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub intercept_stderr: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = a + b x`. With `weights` the fit is weighted
/// and standard errors follow from the weights as inverse variances.
pub fn linear_fit(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> LinearFit {
    let n = x.len();
    let w: Vec<f64> = weights.map(|w| w.to_vec()).unwrap_or_else(|| vec![1.0; n]);
    let sw: f64 = w.iter().sum();
    let sx: f64 = x.iter().zip(&w).map(|(a, w)| a * w).sum();
    let sy: f64 = y.iter().zip(&w).map(|(a, w)| a * w).sum();
    let sxx: f64 = x.iter().zip(&w).map(|(a, w)| a * a * w).sum();
    let sxy: f64 = x.iter().zip(y).zip(&w).map(|((a, b), w)| a * b * w).sum();
    let det = sw * sxx - sx * sx;
    let slope = (sw * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / sw;
    let ybar = sy / sw;
    let ss_res: f64 = x.iter().zip(y).zip(&w).map(|((a, b), w)| w * (b - intercept - slope * a).powi(2)).sum();
    let ss_tot: f64 = y.iter().zip(&w).map(|(b, w)| w * (b - ybar).powi(2)).sum();
    // Unweighted fits estimate the noise from the residuals.
    let s2 = if weights.is_some() { 1.0 } else { ss_res / (n as f64 - 2.0) };
    LinearFit {
        intercept,
        slope,
        intercept_stderr: (s2 * sxx / det).sqrt(),
        slope_stderr: (s2 * sw / det).sqrt(),
        r_squared: 1.0 - ss_res / ss_tot,
    }
}

/// Least-squares slope of `y = b x` and its standard error.
pub fn fit_through_origin(x: &[f64], y: &[f64]) -> (f64, f64) {
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let b = x.iter().zip(y).map(|(a, c)| a * c).sum::<f64>() / sxx;
    let res: f64 = x.iter().zip(y).map(|(a, c)| (c - b * a).powi(2)).sum();
    let dof = (x.len() as f64 - 1.0).max(1.0);
    (b, (res / dof / sxx).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quasi_normal() -> Vec<f64> {
        let ph = [0.6180339887, 0.4142135624, 0.7320508076, 0.2360679775, 0.6457513111, 0.1622776602];
        (1..=300).map(|k| ph.iter().map(|p| (k as f64 * p) % 1.0).sum::<f64>() - 3.0).collect()
    }

    #[test]
    fn normality_matches_reference_implementation() {
        // Frozen from scipy.stats.normaltest on the same sequence.
        let r = normality_test(&quasi_normal());
        assert!((r.statistic - 6.5677532316027225).abs() < 1e-9, "{}", r.statistic);
        assert!((r.p_value - 0.03748266888879864).abs() < 1e-10);
    }

    #[test]
    fn ks_matches_reference_implementation() {
        // Frozen from scipy.stats.kstest(method='asymp').
        let e: Vec<f64> = (1..=500).map(|k| -(1.0 - (k as f64 * 0.7548776662) % 1.0).ln()).collect();
        let r = ks_exponential(&e, 1.08);
        assert!((r.statistic - 0.030402337761240794).abs() < 1e-12);
        assert!((r.p_value - 0.7445182637101146).abs() < 1e-9);
    }

    #[test]
    fn kolmogorov_reference_points() {
        // scipy.special.kolmogorov
        assert!((kolmogorov_sf(1.0) - 0.26999967167735456).abs() < 1e-12);
        assert!((kolmogorov_sf(1.36) - 0.049485876755377876).abs() < 1e-12);
        assert!((kolmogorov_sf(0.2) - 1.0).abs() < 1e-6);
        let lo = kolmogorov_sf(0.3 - 1e-9);
        let hi = kolmogorov_sf(0.3 + 1e-9);
        assert!((lo - hi).abs() < 1e-8);
    }

    #[test]
    fn linear_fit_recovers_exact_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let f = linear_fit(&x, &y, None);
        assert!((f.intercept - 2.0).abs() < 1e-12 && (f.slope + 0.5).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let (b, _) = fit_through_origin(&x, &x.iter().map(|v| 3.0 * v).collect::<Vec<_>>());
        assert!((b - 3.0).abs() < 1e-12);
    }

    #[test]
    fn robust_summaries() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(median(&x), 3.0);
        assert_eq!(iqr(&x), 2.0);
        assert!((variance(&x) - 2.5).abs() < 1e-15);
    }
}
