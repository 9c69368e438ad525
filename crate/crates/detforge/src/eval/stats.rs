//! Rank statistics: Spearman and Pearson correlation, mean absolute
//! error, and two-sided p-values (exact permutation for small samples,
//! Student-t approximation otherwise).

use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("series length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
}

fn check_lengths(xs: &[f64], ys: &[f64]) -> Result<(), StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    Ok(())
}

/// Average (fractional) ranks, 1-based; tied values share the mean of
/// the ranks they occupy.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0; values.len()];
    let mut idx = 0;
    while idx < order.len() {
        let mut end = idx + 1;
        while end < order.len() && values[order[end]] == values[order[idx]] {
            end += 1;
        }
        // Positions idx..end hold ranks idx+1 ..= end; share their mean.
        let shared = (idx + 1 + end) as f64 / 2.0;
        for &original in &order[idx..end] {
            ranks[original] = shared;
        }
        idx = end;
    }
    ranks
}

/// Pearson product-moment correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    check_lengths(xs, ys)?;
    if xs.len() < 2 {
        return Err(StatsError::DegenerateInput(
            "need at least two observations",
        ));
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(StatsError::DegenerateInput(
            "constant series has no defined correlation",
        ));
    }
    Ok(cov / (var_x.sqrt() * var_y.sqrt()))
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    check_lengths(xs, ys)?;
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// Mean absolute error between aligned series.
pub fn mean_absolute_error(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    check_lengths(xs, ys)?;
    if xs.is_empty() {
        return Err(StatsError::DegenerateInput("need at least one observation"));
    }
    Ok(xs
        .iter()
        .zip(ys.iter())
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        / xs.len() as f64)
}

const EXACT_PERMUTATION_MAX_N: usize = 12;

/// Spearman rho plus a two-sided p-value.
///
/// For n ≤ 12 the p-value is exact: the null distribution is built by
/// permuting one rank series exhaustively. For larger n it uses the
/// Student-t approximation `t = rho · sqrt((n−2)/(1−rho²))`.
pub fn spearman_with_p(xs: &[f64], ys: &[f64]) -> Result<(f64, f64), StatsError> {
    let rho = spearman(xs, ys)?;
    let n = xs.len();
    let p = if n <= EXACT_PERMUTATION_MAX_N {
        exact_permutation_p(&average_ranks(xs), &average_ranks(ys), rho)
    } else {
        t_approximation_p(rho, n)
    };
    Ok((rho, p))
}

/// Two-sided t-approximation p-value for a correlation of n samples.
fn t_approximation_p(rho: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let denom = 1.0 - rho * rho;
    if denom <= 0.0 {
        return 0.0;
    }
    let t = rho.abs() * (df / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    2.0 * dist.cdf(-t)
}

/// Exact two-sided permutation p-value: the fraction of permutations of
/// `ranks_y` whose correlation with `ranks_x` is at least as extreme as
/// the observed rho.
fn exact_permutation_p(ranks_x: &[f64], ranks_y: &[f64], observed: f64) -> f64 {
    let n = ranks_x.len();
    let nf = n as f64;
    let mean_x = ranks_x.iter().sum::<f64>() / nf;
    let mean_y = ranks_y.iter().sum::<f64>() / nf;
    let sd_x = (ranks_x.iter().map(|r| (r - mean_x).powi(2)).sum::<f64>() / nf).sqrt();
    let sd_y = (ranks_y.iter().map(|r| (r - mean_y).powi(2)).sum::<f64>() / nf).sqrt();
    let threshold = observed.abs() - 1e-9;

    // Heap's algorithm over a mutable copy of ranks_y; means and standard
    // deviations are permutation-invariant, so only the cross products
    // change per permutation.
    let mut perm: Vec<f64> = ranks_y.to_vec();
    let mut counters = vec![0usize; n];
    let mut extreme = 0u64;
    let mut total = 0u64;
    let mut tally = |perm: &[f64]| {
        let dot: f64 = ranks_x.iter().zip(perm.iter()).map(|(x, y)| x * y).sum();
        let rho = (dot / nf - mean_x * mean_y) / (sd_x * sd_y);
        total += 1;
        if rho.abs() >= threshold {
            extreme += 1;
        }
    };
    tally(&perm);
    let mut i = 1;
    while i < n {
        if counters[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(counters[i], i);
            }
            tally(&perm);
            counters[i] += 1;
            i = 1;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
    extreme as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frozen_spearman_values() {
        let xs: Vec<f64> = (1..=10).map(f64::from).collect();
        assert!((spearman(&xs, &xs).unwrap() - 1.0).abs() < 1e-12);
        let reversed: Vec<f64> = xs.iter().rev().cloned().collect();
        assert!((spearman(&xs, &reversed).unwrap() + 1.0).abs() < 1e-12);
        // Rank-difference oracle: ranks x (1,2,3), ranks y (3,1,2),
        // d = (-2,1,1), sum d^2 = 6; 1 - 6*6/(3*8) = -0.5.
        let rho = spearman(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap();
        assert!((rho + 0.5).abs() < 1e-12);
    }

    #[test]
    fn average_ranks_handle_ties() {
        assert_eq!(
            average_ranks(&[10.0, 20.0, 20.0, 30.0]),
            vec![1.0, 2.5, 2.5, 4.0]
        );
        assert_eq!(average_ranks(&[5.0, 5.0, 5.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(average_ranks(&[]), Vec::<f64>::new());
    }

    #[test]
    fn error_paths() {
        assert_eq!(
            spearman(&[1.0], &[1.0, 2.0]),
            Err(StatsError::LengthMismatch { left: 1, right: 2 })
        );
        assert!(matches!(
            spearman(&[1.0], &[1.0]),
            Err(StatsError::DegenerateInput(_))
        ));
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(StatsError::DegenerateInput(_))
        ));
        assert!(matches!(
            mean_absolute_error(&[], &[]),
            Err(StatsError::DegenerateInput(_))
        ));
    }

    #[test]
    fn mae_basics() {
        assert_eq!(mean_absolute_error(&[0.1, 0.5], &[0.1, 0.5]).unwrap(), 0.0);
        let mae = mean_absolute_error(&[0.0, 1.0], &[0.5, 0.5]).unwrap();
        assert!((mae - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pearson_on_linear_data_is_one() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [3.0, 5.0, 7.0, 9.0];
        assert!((pearson(&xs, &ys).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_permutation_p_for_perfect_small_sample() {
        // n = 3: only the identity and full reversal reach |rho| = 1, so
        // the two-sided exact p is 2/6.
        let (rho, p) = spearman_with_p(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap();
        assert!((rho - 1.0).abs() < 1e-12);
        assert!((p - 2.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn exact_permutation_counts_full_distribution_n4() {
        // n = 4, observed rho = 1. Permutations with |rho| = 1 are the
        // identity and the reversal: p = 2/24.
        let (_, p) = spearman_with_p(&[1.0, 2.0, 3.0, 4.0], &[1.0, 4.0, 9.0, 16.0]).unwrap();
        assert!((p - 2.0 / 24.0).abs() < 1e-12);
    }

    #[test]
    fn t_approximation_matches_published_threshold() {
        // rho = 0.64 over 22 paired observations is significant well
        // below 0.002 under the t-approximation.
        let p = t_approximation_p(0.64, 22);
        assert!(p < 0.002, "p = {p}");
        assert!(p > 0.0005, "p = {p}");
        assert_eq!(t_approximation_p(1.0, 30), 0.0);
    }

    #[test]
    fn spearman_ties_use_average_ranks() {
        // With a tie in xs, the rank vector is (1.5, 1.5, 3).
        let rho = spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        // Pearson((1.5,1.5,3),(1,2,3)) = (cov) / ... = 0.866...
        assert!((rho - 0.866_025_403_784_438_6).abs() < 1e-9);
    }
}
