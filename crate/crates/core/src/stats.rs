//! Accuracy, Pearson correlation and the Wilcoxon signed-rank test.

use statrs::function::erf::erfc;

use crate::{Error, Result};

/// Fraction of positions where `predictions` and `labels` agree.
pub fn accuracy<T: PartialEq>(predictions: &[T], labels: &[T]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "predictions vs labels",
            expected: labels.len(),
            found: predictions.len(),
        });
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

fn check_series(xs: &[f64], ys: &[f64], min_len: usize) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            context: "paired series lengths",
            expected: xs.len(),
            found: ys.len(),
        });
    }
    if xs.len() < min_len {
        return Err(Error::InvalidInput(format!(
            "need at least {min_len} pairs, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("series contains a non-finite value".into()));
    }
    Ok(())
}

/// Product-moment correlation, computed from centred sums.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_series(xs, ys, 2)?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::UndefinedCorrelation("first series is constant"));
    }
    if syy == 0.0 {
        return Err(Error::UndefinedCorrelation("second series is constant"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Two equal-length series of finite values, compared pairwise.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSeries {
    first: Vec<f64>,
    second: Vec<f64>,
}

impl PairedSeries {
    pub fn new(first: Vec<f64>, second: Vec<f64>) -> Result<Self> {
        check_series(&first, &second, 1)?;
        Ok(Self { first, second })
    }

    /// Pairs with `first - second` equal to `diffs`.
    pub fn from_differences(diffs: &[f64]) -> Result<Self> {
        Self::new(diffs.to_vec(), vec![0.0; diffs.len()])
    }

    pub fn len(&self) -> usize {
        self.first.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first.is_empty()
    }

    pub fn differences(&self) -> Vec<f64> {
        self.first.iter().zip(&self.second).map(|(a, b)| a - b).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PValueMethod {
    /// Exact for up to [`EXACT_LIMIT`] non-zero differences, normal beyond.
    #[default]
    Auto,
    Exact,
    Normal,
}

pub const EXACT_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    /// min(W+, W-).
    pub statistic: f64,
    /// Two-sided.
    pub p_value: f64,
    /// Pairs left after dropping zero differences.
    pub n: usize,
    pub exact: bool,
}

/// Ranks of `values` (1-based), ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // Positions i..j hold ranks i+1..=j.
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

pub fn wilcoxon_signed_rank(pairs: &PairedSeries) -> Result<WilcoxonResult> {
    wilcoxon_signed_rank_with(pairs, PValueMethod::Auto)
}

pub fn wilcoxon_signed_rank_with(
    pairs: &PairedSeries,
    method: PValueMethod,
) -> Result<WilcoxonResult> {
    let diffs: Vec<f64> = pairs.differences().into_iter().filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Err(Error::DegenerateTest("every paired difference is zero"));
    }
    let n = diffs.len();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = ranks.iter().zip(&diffs).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let statistic = w_plus.min(total - w_plus);
    let exact = match method {
        PValueMethod::Auto => n <= EXACT_LIMIT,
        PValueMethod::Exact => true,
        PValueMethod::Normal => false,
    };
    let p_value = if exact {
        exact_p(&ranks, statistic)
    } else {
        normal_p(&abs, statistic)
    };
    Ok(WilcoxonResult {
        statistic,
        p_value,
        n,
        exact,
    })
}

/// P(min(S, T - S) <= w) where S is the positive-rank sum under random
/// signs. Average ranks are half-integers, so the distribution is built
/// over doubled ranks.
fn exact_p(ranks: &[f64], w: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    // counts[s] = number of sign patterns whose doubled positive sum is s.
    let mut counts = vec![0.0f64; total + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let w2 = (2.0 * w).round() as usize;
    let tail: f64 = counts
        .iter()
        .enumerate()
        .filter(|(s, _)| (*s).min(total - *s) <= w2)
        .map(|(_, c)| c)
        .sum();
    (tail / 2f64.powi(ranks.len() as i32)).min(1.0)
}

/// Normal approximation with tie-corrected variance and a continuity
/// correction of ½.
fn normal_p(abs: &[f64], w: f64) -> f64 {
    let n = abs.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = abs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((mean - w).abs() - 0.5).max(0.0) / var.sqrt();
    // Two-sided: 2 * Phi(-z) = erfc(z / sqrt 2).
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_examples() {
        let a = [1, 2, 3, 1];
        assert_eq!(accuracy(&a, &a).unwrap(), 1.0);
        let p: Vec<u8> = (0..10).map(|i| i % 2).collect();
        let l = vec![0u8; 10];
        assert_eq!(accuracy(&p, &l).unwrap(), 0.5);
        assert!(accuracy::<u8>(&[], &[]).is_err());
        assert!(accuracy(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn pearson_examples() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson(&xs, &[2.0, 1.0, 4.0, 3.0]).unwrap() - 0.6).abs() < 1e-12);
        let line: Vec<f64> = xs.iter().map(|x| 2.0 * x + 3.0).collect();
        assert!((pearson(&xs, &line).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson(&xs, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(
            pearson(&xs, &[1.0; 4]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(pearson(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn all_positive_five() {
        let p = PairedSeries::from_differences(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let r = wilcoxon_signed_rank(&p).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 0.0625).abs() < 1e-15);
        assert!(r.exact);
    }

    #[test]
    fn symmetric_differences_give_p_one() {
        let p = PairedSeries::from_differences(&[1.0, -1.0, 2.0, -2.0, 3.0, -3.0]).unwrap();
        let r = wilcoxon_signed_rank(&p).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn zeros_are_dropped() {
        let p = PairedSeries::new(vec![1.0, 2.0, 3.0], vec![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(wilcoxon_signed_rank(&p).unwrap().n, 2);
        let z = PairedSeries::new(vec![1.0, 2.0], vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            wilcoxon_signed_rank(&z),
            Err(Error::DegenerateTest(_))
        ));
    }

    #[test]
    fn rescaling_leaves_p_unchanged() {
        let d = [0.3, -1.2, 2.5, 0.7, -0.1, 4.0, 1.1];
        let scaled: Vec<f64> = d.iter().map(|x| x * 17.5).collect();
        let a = wilcoxon_signed_rank(&PairedSeries::from_differences(&d).unwrap()).unwrap();
        let b = wilcoxon_signed_rank(&PairedSeries::from_differences(&scaled).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn method_override() {
        let d: Vec<f64> = (1..=30).map(|i| i as f64 * if i % 3 == 0 { -1.0 } else { 1.0 }).collect();
        let p = PairedSeries::from_differences(&d).unwrap();
        assert!(!wilcoxon_signed_rank(&p).unwrap().exact);
        let e = wilcoxon_signed_rank_with(&p, PValueMethod::Exact).unwrap();
        let a = wilcoxon_signed_rank_with(&p, PValueMethod::Normal).unwrap();
        assert!(e.exact);
        assert!((e.p_value - a.p_value).abs() < 0.01);
    }

    #[test]
    fn paired_series_validation() {
        assert!(PairedSeries::new(vec![], vec![]).is_err());
        assert!(PairedSeries::new(vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(PairedSeries::new(vec![f64::NAN], vec![1.0]).is_err());
    }
}
