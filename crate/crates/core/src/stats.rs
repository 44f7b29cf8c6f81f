//! Goodness-of-fit statistics used by the experiments.
//!
//! Samples may contain `f64::INFINITY` for escaped particles. CDFs are then
//! defective: F(∞) < 1 and the missing mass is the escape probability.

use crate::error::{invalid, Result};
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Empirical distribution of a sample with possible escapes.
#[derive(Debug, Clone)]
pub struct EmpiricalCdf {
    finite: Vec<f64>,
    total: usize,
}

impl EmpiricalCdf {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return invalid("empirical CDF of an empty sample");
        }
        if samples
            .iter()
            .any(|x| x.is_nan() || *x == f64::NEG_INFINITY)
        {
            return invalid("samples must be finite or +inf");
        }
        let mut finite: Vec<f64> = samples.iter().copied().filter(|x| x.is_finite()).collect();
        finite.sort_by(f64::total_cmp);
        Ok(EmpiricalCdf {
            finite,
            total: samples.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn escaped(&self) -> usize {
        self.total - self.finite.len()
    }

    pub fn escape_fraction(&self) -> f64 {
        self.escaped() as f64 / self.total as f64
    }

    /// Sorted finite sample values.
    pub fn finite(&self) -> &[f64] {
        &self.finite
    }

    /// F_N(x) = #{samples ≤ x} / N.
    pub fn eval(&self, x: f64) -> f64 {
        self.finite.partition_point(|&s| s <= x) as f64 / self.total as f64
    }

    /// sup_x |F_N(x) − F(x)| for a continuous, possibly defective F, with the
    /// limit value F(∞) compared against the finite fraction.
    pub fn ks_distance(&self, cdf: impl Fn(f64) -> f64, cdf_at_infinity: f64) -> f64 {
        let n = self.total as f64;
        let mut d: f64 = 0.0;
        for (i, &x) in self.finite.iter().enumerate() {
            let f = cdf(x);
            d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
        }
        d.max((self.finite.len() as f64 / n - cdf_at_infinity).abs())
    }
}

/// A test statistic with its p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Sample size (KS) or degrees of freedom (chi-square).
    pub size: f64,
}

/// Kolmogorov tail Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} exp(−2k²λ²).
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_tail((s + 0.12 + 0.11 / s) * d)
}

/// One-sample Kolmogorov-Smirnov test against a continuous (defective) CDF.
pub fn ks_one_sample(
    samples: &[f64],
    cdf: impl Fn(f64) -> f64,
    cdf_at_infinity: f64,
) -> Result<TestResult> {
    let e = EmpiricalCdf::new(samples)?;
    let d = e.ks_distance(cdf, cdf_at_infinity);
    let n = e.len() as f64;
    Ok(TestResult {
        statistic: d,
        p_value: ks_p_value(d, n),
        size: n,
    })
}

/// Two-sample Kolmogorov-Smirnov test. `+inf` entries are allowed.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestResult> {
    let ea = EmpiricalCdf::new(a)?;
    let eb = EmpiricalCdf::new(b)?;
    let (fa, fb) = (ea.finite(), eb.finite());
    let (na, nb) = (ea.len() as f64, eb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < fa.len() || j < fb.len() {
        let x = match (fa.get(i), fb.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        while i < fa.len() && fa[i] <= x {
            i += 1;
        }
        while j < fb.len() && fb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let n_eff = na * nb / (na + nb);
    Ok(TestResult {
        statistic: d,
        p_value: ks_p_value(d, n_eff),
        size: n_eff,
    })
}

fn chi_square_p(statistic: f64, dof: usize) -> Result<f64> {
    if dof == 0 {
        return invalid("chi-square test with zero degrees of freedom");
    }
    let dist =
        ChiSquared::new(dof as f64).map_err(|e| crate::Error::InvalidInput(e.to_string()))?;
    Ok(dist.sf(statistic))
}

/// Chi-square goodness of fit. Adjacent cells with expected count below
/// `min_expected` are pooled.
pub fn chi_square_gof(
    observed: &[u64],
    probabilities: &[f64],
    min_expected: f64,
) -> Result<TestResult> {
    if observed.len() != probabilities.len() || observed.is_empty() {
        return invalid("observed counts and probabilities must have equal, nonzero length");
    }
    if probabilities.iter().any(|p| !(*p >= 0.0)) {
        return invalid("cell probabilities must be nonnegative");
    }
    let total_p: f64 = probabilities.iter().sum();
    if (total_p - 1.0).abs() > 1e-6 {
        return invalid(format!("cell probabilities sum to {total_p}, expected 1"));
    }
    let n: u64 = observed.iter().sum();
    let n = n as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probabilities) {
        acc.0 += o as f64;
        acc.1 += p * n;
        if acc.1 >= min_expected {
            cells.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.1 > 0.0 || acc.0 > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => cells.push(acc),
        }
    }
    let statistic: f64 = cells
        .iter()
        .map(|(o, e)| if *e > 0.0 { (o - e).powi(2) / e } else { 0.0 })
        .sum();
    let dof = cells.len().saturating_sub(1);
    Ok(TestResult {
        statistic,
        p_value: chi_square_p(statistic, dof)?,
        size: dof as f64,
    })
}

/// Pearson chi-square test of independence on a contingency table.
/// Empty rows and columns are dropped.
pub fn chi_square_independence(table: &[Vec<u64>]) -> Result<TestResult> {
    let cols = table.first().map_or(0, |r| r.len());
    if table.iter().any(|r| r.len() != cols) {
        return invalid("contingency table rows must have equal length");
    }
    let row_sums: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let col_sums: Vec<f64> = (0..cols)
        .map(|j| table.iter().map(|r| r[j]).sum::<u64>() as f64)
        .collect();
    let n: f64 = row_sums.iter().sum();
    let live_rows: Vec<usize> = (0..table.len()).filter(|&i| row_sums[i] > 0.0).collect();
    let live_cols: Vec<usize> = (0..cols).filter(|&j| col_sums[j] > 0.0).collect();
    if live_rows.len() < 2 || live_cols.len() < 2 {
        return invalid("contingency table needs at least two nonempty rows and columns");
    }
    let mut statistic = 0.0;
    for &i in &live_rows {
        for &j in &live_cols {
            let e = row_sums[i] * col_sums[j] / n;
            statistic += (table[i][j] as f64 - e).powi(2) / e;
        }
    }
    let dof = (live_rows.len() - 1) * (live_cols.len() - 1);
    Ok(TestResult {
        statistic,
        p_value: chi_square_p(statistic, dof)?,
        size: dof as f64,
    })
}

/// Fisher's method: −2 Σ ln p_i against χ²(2k).
pub fn fisher_combine(p_values: &[f64]) -> Result<f64> {
    if p_values.is_empty() || p_values.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
        return invalid("Fisher combination needs p-values in (0, 1]");
    }
    let x: f64 = -2.0 * p_values.iter().map(|p| p.ln()).sum::<f64>();
    chi_square_p(x, 2 * p_values.len())
}

/// Equal-count bin edges from the pooled finite values of several samples.
pub fn quantile_edges(values: &[f64], bins: usize) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    if v.is_empty() || bins < 2 {
        return Vec::new();
    }
    let mut edges: Vec<f64> = (1..bins).map(|k| v[k * v.len() / bins]).collect();
    edges.dedup();
    edges
}

/// Index of the bin of x given interior edges; +inf maps past the last bin.
pub fn bin_index(edges: &[f64], x: f64) -> usize {
    if x.is_infinite() {
        return edges.len() + 1;
    }
    edges.partition_point(|&e| e <= x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use proptest::prelude::*;
    use rand::Rng;

    fn brute_ks(samples: &[f64], cdf: impl Fn(f64) -> f64, f_inf: f64) -> f64 {
        let e = EmpiricalCdf::new(samples).unwrap();
        let mut d: f64 = 0.0;
        for &x in e.finite() {
            d = d.max((e.eval(x) - cdf(x)).abs());
            d = d.max((e.eval(x - 1e-12) - cdf(x - 1e-12)).abs());
        }
        d.max((e.eval(f64::MAX) - f_inf).abs())
    }

    #[test]
    fn kolmogorov_tail_values() {
        // Q(1.36) ≈ 0.05 and Q(1.63) ≈ 0.01
        assert!((kolmogorov_tail(1.3581) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_tail(1.6276) - 0.01).abs() < 1e-3);
        assert_eq!(kolmogorov_tail(0.0), 1.0);
    }

    #[test]
    fn uniform_sample_passes_and_shifted_fails() {
        let mut rng = substream(5, 0);
        let x: Vec<f64> = (0..20000).map(|_| rng.random::<f64>()).collect();
        let r = ks_one_sample(&x, |t| t.clamp(0.0, 1.0), 1.0).unwrap();
        assert!(r.p_value > 0.001, "{r:?}");
        let r = ks_one_sample(&x, |t| (t - 0.02).clamp(0.0, 1.0), 1.0).unwrap();
        assert!(r.p_value < 1e-6);
    }

    #[test]
    fn escapes_enter_the_distance() {
        let x = [0.25, 0.5, f64::INFINITY, f64::INFINITY];
        let e = EmpiricalCdf::new(&x).unwrap();
        assert_eq!(e.escaped(), 2);
        assert_eq!(e.eval(1e300), 0.5);
        // F(t) = t on [0,1] is not defective: distance at least 0.5
        assert!((e.ks_distance(|t| t.clamp(0.0, 1.0), 1.0) - 0.5).abs() < 1e-15);
        assert!(EmpiricalCdf::new(&[f64::NAN]).is_err());
    }

    #[test]
    fn two_sample_matches_brute_force() {
        let mut rng = substream(6, 0);
        let a: Vec<f64> = (0..300).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..200).map(|_| rng.random::<f64>().powf(1.2)).collect();
        let r = ks_two_sample(&a, &b).unwrap();
        let (ea, eb) = (
            EmpiricalCdf::new(&a).unwrap(),
            EmpiricalCdf::new(&b).unwrap(),
        );
        let brute = a
            .iter()
            .chain(&b)
            .map(|&t| (ea.eval(t) - eb.eval(t)).abs())
            .fold(0.0, f64::max);
        assert!((r.statistic - brute).abs() < 1e-15);
    }

    #[test]
    fn chi_square_examples() {
        // fair die with 600 throws, perfect counts
        let r = chi_square_gof(&[100; 6], &[1.0 / 6.0; 6], 5.0).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.size, 5.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        // statistic 4 with 1 dof
        let r = chi_square_gof(&[60, 40], &[0.5, 0.5], 5.0).unwrap();
        assert!((r.statistic - 4.0).abs() < 1e-12);
        assert!((r.p_value - 0.045500263896358).abs() < 1e-9);
        let r = chi_square_independence(&[vec![10, 20], vec![20, 40]]).unwrap();
        assert!(r.statistic.abs() < 1e-12);
        assert!(chi_square_gof(&[1, 2], &[0.5, 0.6], 5.0).is_err());
    }

    #[test]
    fn fisher_examples() {
        // −2 ln 0.05 = 5.99 against χ²(2): p = 0.05
        assert!((fisher_combine(&[0.05]).unwrap() - 0.05).abs() < 1e-12);
        assert!(fisher_combine(&[0.01; 10]).unwrap() < 1e-6);
        assert!(fisher_combine(&[0.0]).is_err());
    }

    proptest! {
        #[test]
        fn ks_distance_matches_brute_force(seed in 0u64..500, escapes in 0usize..5) {
            let mut rng = substream(seed, 9);
            let mut x: Vec<f64> = (0..40).map(|_| rng.random::<f64>() * 2.0).collect();
            x.extend(std::iter::repeat_n(f64::INFINITY, escapes));
            let cdf = |t: f64| 0.8 * (1.0 - (-t).exp());
            let f_inf = 0.8;
            let e = EmpiricalCdf::new(&x).unwrap();
            let fast = e.ks_distance(cdf, f_inf);
            prop_assert!((fast - brute_ks(&x, cdf, f_inf)).abs() < 1e-9);
        }
    }
}
