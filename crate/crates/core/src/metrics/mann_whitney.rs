//! One-tailed Mann–Whitney U test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest combined sample size handled by exact enumeration.
pub const EXACT_LIMIT: usize = 20;

/// Smallest sample accepted on either side.
pub const MIN_SAMPLE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alternative {
    /// `a` tends to be smaller than `b`.
    Less,
    /// `a` tends to be larger than `b`.
    Greater,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U statistic of sample `a`.
    pub u: f64,
    pub p: f64,
    pub exact: bool,
}

/// Midranks (1-based) of the pooled sample.
fn midranks(pooled: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..pooled.len()).collect();
    idx.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && pooled[idx[j + 1]] == pooled[idx[i]] {
            j += 1;
        }
        let r = 0.5 * ((i + 1) + (j + 1)) as f64;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn mann_whitney_u(a: &[f64], b: &[f64], alt: Alternative) -> Result<MannWhitney> {
    let (na, nb) = (a.len(), b.len());
    if na == 0 || nb == 0 {
        return Err(Error::Spec(
            "Mann-Whitney needs two non-empty samples".into(),
        ));
    }
    if na < MIN_SAMPLE || nb < MIN_SAMPLE {
        return Err(Error::Spec(format!(
            "Mann-Whitney needs at least {MIN_SAMPLE} points per sample, got {na} and {nb}"
        )));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::Domain("mann_whitney_u"));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let r_a: f64 = ranks[..na].iter().sum();
    let u = r_a - (na * (na + 1)) as f64 / 2.0;
    if na + nb <= EXACT_LIMIT {
        return Ok(MannWhitney {
            u,
            p: exact_p(&ranks, na, r_a, alt),
            exact: true,
        });
    }
    let n = (na + nb) as f64;
    let (naf, nbf) = (na as f64, nb as f64);
    let mean = naf * nbf / 2.0;
    let mut tie_term = 0.0;
    let mut sorted = ranks.clone();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = naf * nbf / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    let p = if var <= 0.0 {
        0.5
    } else {
        let z = (u - mean) / var.sqrt();
        match alt {
            Alternative::Less => normal_cdf(z),
            Alternative::Greater => normal_cdf(-z),
        }
    };
    Ok(MannWhitney { u, p, exact: false })
}

/// Permutation distribution of the rank sum of `na` items drawn from the
/// pooled midranks, counted on doubled (integer) ranks.
fn exact_p(ranks: &[f64], na: usize, r_a: f64, alt: Alternative) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    // ways[k][s]: subsets of size k with doubled rank sum s.
    let mut ways = vec![vec![0f64; max_sum + 1]; na + 1];
    ways[0][0] = 1.0;
    for &r in &doubled {
        for k in (1..=na).rev() {
            for s in (r..=max_sum).rev() {
                ways[k][s] += ways[k - 1][s - r];
            }
        }
    }
    let obs = (2.0 * r_a).round() as usize;
    let total: f64 = ways[na].iter().sum();
    let tail: f64 = match alt {
        Alternative::Less => ways[na][..=obs].iter().sum(),
        Alternative::Greater => ways[na][obs..].iter().sum(),
    };
    tail / total
}

fn normal_cdf(z: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().cdf(z)
}
