//! Goodness-of-fit helpers for point processes.

use alloc::vec::Vec;

use crate::math::{exp, kolmogorov_sf, sqrt};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov-Smirnov test of `sample` against `cdf`.
///
/// The p-value uses the asymptotic distribution with Stephens' small-sample
/// correction `√n + 0.12 + 0.11/√n`.
pub fn ks_test<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Option<KsResult> {
    if sample.is_empty() {
        return None;
    }
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d = 0.0_f64;
    for (i, &v) in x.iter().enumerate() {
        let f = cdf(v);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    let sn = sqrt(n);
    Some(KsResult { statistic: d, p_value: kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d) })
}

/// KS test of the sample against the unit exponential.
pub fn ks_exp1(sample: &[f64]) -> Option<KsResult> {
    ks_test(sample, |x| if x <= 0.0 { 0.0 } else { 1.0 - exp(-x) })
}

/// Gaps `Λ(t_i) − Λ(t_{i−1})` (with `t_0 = 0`) of ascending event times under
/// a compensator. Under the true model they are i.i.d. unit exponential.
pub fn rescaled_gaps<F: Fn(f64) -> f64>(times: &[f64], compensator: F) -> Vec<f64> {
    let mut prev = 0.0;
    times
        .iter()
        .map(|&t| {
            let c = compensator(t);
            let g = c - prev;
            prev = c;
            g
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::ln;

    #[test]
    fn exact_quantiles_have_small_statistic() {
        let n = 200;
        let s: Vec<f64> = (0..n).map(|i| -ln(1.0 - (i as f64 + 0.5) / n as f64)).collect();
        let r = ks_exp1(&s).unwrap();
        assert!((r.statistic - 0.5 / n as f64).abs() < 1e-12);
        assert!(r.p_value > 0.99);
    }

    #[test]
    fn wrong_scale_is_rejected() {
        let n = 400;
        let s: Vec<f64> = (0..n).map(|i| -3.0 * ln(1.0 - (i as f64 + 0.5) / n as f64)).collect();
        assert!(ks_exp1(&s).unwrap().p_value < 1e-6);
    }

    #[test]
    fn gaps_telescope() {
        let g = rescaled_gaps(&[1.0, 2.0, 4.0], |t| t * t);
        assert_eq!(g, alloc::vec![1.0, 3.0, 12.0]);
    }
}
