//! Plug-in mutual information from an equal-width 2-D histogram.

use crate::error::{Error, Result};

/// Shortest series accepted.
pub const MIN_SAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MutualInformation {
    pub bits: f64,
    /// Set when either series is constant; `bits` is then 0.
    pub degenerate: bool,
}

/// Bins per axis, `ceil(n^(1/3))`.
pub fn bin_count(n: usize) -> usize {
    let b = (n as f64).cbrt().ceil() as usize;
    // cbrt of a perfect cube may land a hair above the integer.
    if (b - 1).pow(3) >= n {
        b - 1
    } else {
        b.max(1)
    }
}

fn bin_index(v: f64, lo: f64, width: f64, bins: usize) -> usize {
    (((v - lo) / width) as usize).min(bins - 1)
}

/// Entropy (bits) of a histogram with total `n`; the counts are summed in
/// sorted order so the result does not depend on bin layout.
fn entropy(mut counts: Vec<u64>, n: f64) -> f64 {
    counts.retain(|&c| c > 0);
    counts.sort_unstable();
    let s: f64 = counts.iter().map(|&c| c as f64 * (c as f64).log2()).sum();
    n.log2() - s / n
}

/// MI between `x` and `y` in bits. Symmetric in its arguments bit for bit.
pub fn mutual_information(x: &[f64], y: &[f64]) -> Result<MutualInformation> {
    if x.len() != y.len() {
        return Err(Error::Spec(format!(
            "series lengths differ ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < MIN_SAMPLES {
        return Err(Error::Spec(format!(
            "need at least {MIN_SAMPLES} samples, got {n}"
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Domain("mutual_information"));
    }
    let range = |s: &[f64]| {
        s.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    };
    let (xlo, xhi) = range(x);
    let (ylo, yhi) = range(y);
    if xhi == xlo || yhi == ylo {
        return Ok(MutualInformation {
            bits: 0.0,
            degenerate: true,
        });
    }
    let bins = bin_count(n);
    let (wx, wy) = ((xhi - xlo) / bins as f64, (yhi - ylo) / bins as f64);
    let mut joint = vec![0u64; bins * bins];
    let mut mx = vec![0u64; bins];
    let mut my = vec![0u64; bins];
    for (&a, &b) in x.iter().zip(y) {
        let i = bin_index(a, xlo, wx, bins);
        let j = bin_index(b, ylo, wy, bins);
        joint[i * bins + j] += 1;
        mx[i] += 1;
        my[j] += 1;
    }
    let nf = n as f64;
    let bits = (entropy(mx, nf) + entropy(my, nf) - entropy(joint, nf)).max(0.0);
    Ok(MutualInformation {
        bits,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal, Uniform};

    #[test]
    fn bins_follow_cube_root() {
        assert_eq!(bin_count(64), 4);
        assert_eq!(bin_count(65), 5);
        assert_eq!(bin_count(100_000), 47);
    }

    #[test]
    fn identity_gives_marginal_entropy() {
        let x: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64).collect();
        let mi = mutual_information(&x, &x).unwrap();
        let bins = bin_count(x.len());
        let (lo, hi) = (0.0, 100.0);
        let w = (hi - lo) / bins as f64;
        let mut c = vec![0u64; bins];
        for &v in &x {
            c[bin_index(v, lo, w, bins)] += 1;
        }
        let h = entropy(c, x.len() as f64);
        assert!((mi.bits - h).abs() < 1e-12);
    }

    #[test]
    fn independent_uniform_is_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = Uniform::new(0.0, 1.0);
        let x: Vec<f64> = (0..100_000).map(|_| u.sample(&mut rng)).collect();
        let y: Vec<f64> = (0..100_000).map(|_| u.sample(&mut rng)).collect();
        let mi = mutual_information(&x, &y).unwrap().bits;
        assert!(mi < 0.05, "{mi}");
    }

    #[test]
    fn gaussian_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho: f64 = 0.9;
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..100_000 {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            x.push(a);
            y.push(rho * a + (1.0 - rho * rho).sqrt() * b);
        }
        let mi = mutual_information(&x, &y).unwrap().bits;
        let exact = -0.5 * (1.0 - rho * rho).ln() / 2f64.ln();
        assert!((mi - exact).abs() < 0.1, "{mi} vs {exact}");
    }

    #[test]
    fn symmetric_bit_for_bit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..500).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y: Vec<f64> = x.iter().map(|v: &f64| v.sin() + 0.1 * v * v).collect();
        let a = mutual_information(&x, &y).unwrap().bits;
        let b = mutual_information(&y, &x).unwrap().bits;
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn constant_series_is_flagged() {
        let x = vec![1.0; 100];
        let y: Vec<f64> = (0..100).map(f64::from).collect();
        let mi = mutual_information(&x, &y).unwrap();
        assert!(mi.degenerate && mi.bits == 0.0);
    }

    #[test]
    fn short_series_rejected() {
        assert!(mutual_information(&[0.0; 10], &[0.0; 10]).is_err());
    }
}
