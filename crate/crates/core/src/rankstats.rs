//! Tie-aware Spearman correlation, significance, descriptive statistics and
//! median-consensus aggregation.
//!
//! Spearman's rho is computed as the Pearson correlation of average ranks.
//! The `6 * sum(d^2) / (n (n^2 - 1))` shortcut is exact only without ties,
//! and five-level ordinal scores are mostly ties.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::model::PathosScore;

/// Lower bound on the number of random permutations for a permutation p-value.
pub const MIN_PERMUTATIONS: usize = 10_000;

/// Seed used when the caller does not supply one.
pub const DEFAULT_PERMUTATION_SEED: u64 = 0x5EED_2026;

/// How a p-value is obtained from rho.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PValueMethod {
    /// Student t with `n - 2` degrees of freedom.
    #[default]
    TApprox,
    /// Two-sided Monte Carlo permutation test with a fixed seed.
    Permutation { permutations: usize, seed: u64 },
}

impl PValueMethod {
    pub fn permutation(seed: u64) -> Self {
        PValueMethod::Permutation {
            permutations: MIN_PERMUTATIONS,
            seed,
        }
    }

    pub fn kind(self) -> CorrelationMethod {
        match self {
            PValueMethod::TApprox => CorrelationMethod::TApprox,
            PValueMethod::Permutation { .. } => CorrelationMethod::Permutation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMethod {
    TApprox,
    Permutation,
}

impl CorrelationMethod {
    pub fn name(self) -> &'static str {
        match self {
            CorrelationMethod::TApprox => "t_approx",
            CorrelationMethod::Permutation => "permutation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
    pub method: CorrelationMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::input(format!("{what}: empty input")));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::input(format!(
            "{what}: non-finite value {} at index {i}",
            values[i]
        )));
    }
    Ok(())
}

/// Ranks starting at 1; tied values share the mean of the positions they occupy.
pub fn average_ranks(values: &[f64]) -> Result<Vec<f64>> {
    check_finite(values, "average_ranks")?;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]].total_cmp(&values[order[start]]) == Ordering::Equal {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    Ok(ranks)
}

/// Centered copy of `v` and its Euclidean norm.
fn center(v: &[f64]) -> (Vec<f64>, f64) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let centered: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let norm = centered.iter().map(|x| x * x).sum::<f64>().sqrt();
    (centered, norm)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Clamps to `[-1, 1]` and snaps rounding residue at the ends to exactly +-1.
fn clamp_rho(r: f64) -> f64 {
    if (1.0 - r.abs()) < 1e-12 {
        r.signum()
    } else {
        r.clamp(-1.0, 1.0)
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::input(format!(
            "series lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::Degenerate(format!(
            "need at least 3 paired observations, got {}",
            x.len()
        )));
    }
    Ok(())
}

pub fn spearman(x: &[f64], y: &[f64], method: PValueMethod) -> Result<CorrelationResult> {
    spearman_with(x, y, method, ExecMode::default())
}

/// [`spearman`] with an explicit execution mode for the permutation loop.
pub fn spearman_with(x: &[f64], y: &[f64], method: PValueMethod, mode: ExecMode) -> Result<CorrelationResult> {
    check_pair(x, y)?;
    let rx = average_ranks(x)?;
    let ry = average_ranks(y)?;
    let (cx, nx) = center(&rx);
    let (cy, ny) = center(&ry);
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::Degenerate(
            "constant input series; rank correlation is undefined".into(),
        ));
    }
    let rho = clamp_rho(dot(&cx, &cy) / (nx * ny));
    let n = x.len();
    let p_value = match method {
        PValueMethod::TApprox => t_approx_p(rho, n),
        PValueMethod::Permutation { permutations, seed } => {
            check_permutations(permutations)?;
            permutation_p(&cx, &cy, nx * ny, rho, permutations, seed, mode)
        }
    };
    Ok(CorrelationResult {
        rho,
        p_value,
        n,
        method: method.kind(),
    })
}

fn check_permutations(permutations: usize) -> Result<()> {
    if permutations < MIN_PERMUTATIONS {
        return Err(Error::input(format!(
            "permutation test needs at least {MIN_PERMUTATIONS} permutations, got {permutations}"
        )));
    }
    Ok(())
}

/// Two-sided p-value for a rank correlation `rho` on `n` pairs.
///
/// With [`PValueMethod::Permutation`] the null distribution is simulated by
/// permuting untied ranks `1..=n`.
pub fn p_value(rho: f64, n: usize, method: PValueMethod) -> Result<f64> {
    if !rho.is_finite() || rho.abs() > 1.0 {
        return Err(Error::input(format!("rho = {rho} outside [-1, 1]")));
    }
    if n < 3 {
        return Err(Error::Degenerate(format!("need n >= 3, got {n}")));
    }
    match method {
        PValueMethod::TApprox => Ok(t_approx_p(rho, n)),
        PValueMethod::Permutation { permutations, seed } => {
            check_permutations(permutations)?;
            let ranks: Vec<f64> = (1..=n).map(|r| r as f64).collect();
            let (c, norm) = center(&ranks);
            Ok(permutation_p(
                &c,
                &c,
                norm * norm,
                rho,
                permutations,
                seed,
                ExecMode::default(),
            ))
        }
    }
}

/// `|rho| = 1` gives an infinite t statistic and p = 0 exactly.
fn t_approx_p(rho: f64, n: usize) -> f64 {
    if rho.abs() >= 1.0 {
        return 0.0;
    }
    if rho == 0.0 {
        return 1.0;
    }
    let df = (n - 2) as f64;
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

/// Permutation `i` draws from its own ChaCha stream, so the count is the same
/// for any thread count.
fn permutation_p(cx: &[f64], cy: &[f64], denom: f64, rho: f64, permutations: usize, seed: u64, mode: ExecMode) -> f64 {
    const EPS: f64 = 1e-12;
    let threshold = rho.abs() - EPS;
    let hits = exec::count_range(mode, permutations, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut shuffled = cy.to_vec();
        shuffled.shuffle(&mut rng);
        (dot(cx, &shuffled) / denom).abs() >= threshold
    });
    ((hits + 1) as f64 / (permutations + 1) as f64).min(1.0)
}

/// Mean, sample standard deviation (n - 1 denominator), min and max.
pub fn describe(values: &[f64]) -> Result<DescriptiveStats> {
    check_finite(values, "describe")?;
    let n = values.len();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return Ok(DescriptiveStats {
            mean: min,
            sd: 0.0,
            min,
            max,
            n,
        });
    }
    let mean = (values.iter().sum::<f64>() / n as f64).clamp(min, max);
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(DescriptiveStats { mean, sd, min, max, n })
}

/// Median of advocate scores. An even count averages the two central values
/// and rounds half away from zero.
pub fn median_consensus(scores: &[PathosScore]) -> Result<PathosScore> {
    if scores.is_empty() {
        return Err(Error::input("median_consensus: no scores"));
    }
    let mut sorted: Vec<i64> = scores.iter().map(|s| s.value() as i64).collect();
    sorted.sort_unstable();
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        // f64::round rounds half away from zero
        ((sorted[mid - 1] + sorted[mid]) as f64 / 2.0).round() as i64
    };
    PathosScore::new(median)
}

/// Keeps the positions where both series have a value, preserving order.
pub fn pairwise_complete(a: &[Option<f64>], b: &[Option<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.len() != b.len() {
        return Err(Error::input(format!(
            "pairwise_complete: lengths differ ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).filter_map(|(x, y)| Some(((*x)?, (*y)?))).unzip())
}
