//! Streaming summaries and the goodness-of-fit tests used by the verifiers.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Running mean and central moments up to order four (one pass, numerically stable).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Summary {
    n: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
    min: f64,
    max: f64,
}

impl Summary {
    pub fn new() -> Self {
        Summary {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            ..Default::default()
        }
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        Self::from_iter(xs.iter().copied())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn from_iter<I: IntoIterator<Item = f64>>(xs: I) -> Self {
        let mut s = Summary::new();
        for x in xs {
            s.push(x);
        }
        s
    }

    pub fn push(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n1;
        self.mean += delta_n;
        self.m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * self.m2 - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            f64::INFINITY
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    /// Standard error of the sample variance, from the fourth central moment.
    pub fn variance_stderr(&self) -> f64 {
        if self.n < 4 {
            return f64::INFINITY;
        }
        let n = self.n as f64;
        let mu4 = self.m4 / n;
        let s2 = self.variance();
        ((mu4 - (n - 3.0) / (n - 1.0) * s2 * s2) / n).max(0.0).sqrt()
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }
}

/// Kolmogorov–Smirnov distance between a sample and a distribution function.
///
/// Tied observations are grouped, so distributions with atoms are handled: at
/// each distinct value the empirical function is compared with `F` on both sides
/// of the jump.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == x {
            j += 1;
        }
        let left = cdf(f64::from_bits(x.to_bits().wrapping_sub(1)).min(x));
        let right = cdf(x);
        d = d.max((left - i as f64 / n).abs()).max((j as f64 / n - right).abs());
        i = j;
    }
    d
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.total_cmp(q));
    ys.sort_by(|p, q| p.total_cmp(q));
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

fn ks_coefficient(alpha: f64) -> f64 {
    // c(α) = sqrt(−ln(α/2)/2); c(0.01) ≈ 1.628
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

/// Asymptotic critical distance for the one-sample test at level `alpha`.
pub fn ks_critical_one_sample(n: usize, alpha: f64) -> f64 {
    ks_coefficient(alpha) / (n as f64).sqrt()
}

/// Asymptotic critical distance for the two-sample test at level `alpha`.
pub fn ks_critical_two_sample(n: usize, m: usize, alpha: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    ks_coefficient(alpha) * ((n + m) / (n * m)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Two-sample χ² homogeneity test on integer-valued samples.
///
/// Adjacent values are pooled until every cell expects at least five
/// observations under the pooled distribution.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> ChiSquareTest {
    let top = a.iter().chain(b).copied().max().unwrap_or(0) as usize;
    let mut ca = vec![0.0; top + 1];
    let mut cb = vec![0.0; top + 1];
    for &x in a {
        ca[x as usize] += 1.0;
    }
    for &x in b {
        cb[x as usize] += 1.0;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let total = na + nb;
    let min_share = (5.0 / na.min(nb)).min(1.0);
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for k in 0..=top {
        acc.0 += ca[k];
        acc.1 += cb[k];
        if (acc.0 + acc.1) / total >= min_share {
            cells.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 + acc.1 > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => cells.push(acc),
        }
    }
    let mut statistic = 0.0;
    for &(x, y) in &cells {
        let pooled = (x + y) / total;
        let (ea, eb) = (pooled * na, pooled * nb);
        statistic += (x - ea).powi(2) / ea + (y - eb).powi(2) / eb;
    }
    let dof = cells.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        1.0 - ChiSquared::new(dof as f64).expect("positive dof").cdf(statistic)
    };
    ChiSquareTest {
        statistic,
        dof,
        p_value,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_stderr = if x.len() > 2 {
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    LinearFit {
        slope,
        intercept,
        slope_stderr,
    }
}

/// True when no value rises above its predecessor by more than `k` combined standard errors.
pub fn non_increasing_within(values: &[f64], stderrs: &[f64], k: f64) -> bool {
    values
        .windows(2)
        .zip(stderrs.windows(2))
        .all(|(v, s)| v[1] <= v[0] + k * (s[0] * s[0] + s[1] * s[1]).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn summary_matches_two_pass() {
        let xs = [1.0, 4.0, 2.5, 8.0, -3.0, 0.5];
        let s = Summary::from_slice(&xs);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>();
        assert!((s.mean() - mean).abs() < 1e-14);
        assert!((s.variance() - var).abs() < 1e-12);
        assert!((s.m4 - m4).abs() < 1e-9);
        assert_eq!(s.min(), -3.0);
        assert_eq!(s.max(), 8.0);
    }

    #[test]
    fn ks_critical_value() {
        assert!((ks_coefficient(0.01) - 1.6276).abs() < 1e-3);
        assert!((ks_coefficient(0.05) - 1.3581).abs() < 1e-3);
    }

    #[test]
    fn ks_detects_shift() {
        let a: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 0.2).collect();
        assert!((ks_two_sample(&a, &b) - 0.2).abs() < 2e-3);
        assert!(ks_one_sample(&a, |x| x.clamp(0.0, 1.0)) <= 1e-3 + 1e-12);
    }

    #[test]
    fn chi_square_identical_samples() {
        let a: Vec<u64> = (0..500).map(|i| i % 7).collect();
        let t = chi_square_two_sample(&a, &a);
        assert!(t.statistic.abs() < 1e-12);
        assert!(t.p_value > 0.99);
        assert_eq!(t.dof, 6);
    }

    #[test]
    fn chi_square_rejects_different_counts() {
        let a: Vec<u64> = (0..500).map(|i| i % 3).collect();
        let b: Vec<u64> = (0..500).map(|i| 2 + i % 3).collect();
        assert!(chi_square_two_sample(&a, &b).p_value < 1e-6);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = linear_fit(&x, &y);
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
    }

    #[test]
    fn trend_tolerance() {
        assert!(non_increasing_within(&[3.0, 2.0, 2.05], &[0.1, 0.1, 0.1], 3.0));
        assert!(!non_increasing_within(&[3.0, 2.0, 3.0], &[0.1, 0.1, 0.1], 3.0));
    }

    proptest! {
        #[test]
        fn summary_order_invariant_mean(xs in proptest::collection::vec(-1e3f64..1e3, 2..60)) {
            let a = Summary::from_slice(&xs);
            let mut rev = xs.clone();
            rev.reverse();
            let b = Summary::from_slice(&rev);
            prop_assert!((a.mean() - b.mean()).abs() < 1e-9);
            prop_assert!((a.variance() - b.variance()).abs() < 1e-6 * (1.0 + a.variance()));
        }
    }
}
