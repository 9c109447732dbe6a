//! Spectral arc length smoothness of a speed profile.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SparcConfig {
    /// Upper frequency limit of the arc (Hz).
    pub cutoff: f64,
    /// Normalized magnitude below which the band is trimmed.
    pub amplitude_threshold: f64,
    /// Extra doublings of the FFT length beyond the next power of two.
    pub padding: u32,
}

impl Default for SparcConfig {
    fn default() -> Self {
        SparcConfig {
            cutoff: 10.0,
            amplitude_threshold: 0.05,
            padding: 4,
        }
    }
}

/// SPARC value and whether the profile was degenerate (no motion).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sparc {
    pub value: f64,
    pub degenerate: bool,
}

/// Smoothness of `speed` sampled every `dt` seconds; more negative is less
/// smooth. An all-zero profile scores 0 and is flagged.
pub fn sparc(speed: &[f64], dt: f64, cfg: &SparcConfig) -> Sparc {
    let degenerate = Sparc {
        value: 0.0,
        degenerate: true,
    };
    if speed.is_empty() || speed.iter().all(|v| *v == 0.0) || !(dt > 0.0) {
        return degenerate;
    }
    let n = speed.len();
    let nfft = n.next_power_of_two() << cfg.padding;
    let mut buf: Vec<Complex<f64>> = speed.iter().map(|&v| Complex::new(v, 0.0)).collect();
    buf.resize(nfft, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(nfft).process(&mut buf);

    let df = 1.0 / (dt * nfft as f64);
    let n_sel = ((cfg.cutoff / df).floor() as usize + 1).min(nfft);
    let mag: Vec<f64> = buf[..n_sel].iter().map(|c| c.norm()).collect();
    let peak = buf.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if !(peak > 0.0) {
        return degenerate;
    }
    let mag: Vec<f64> = mag.iter().map(|m| m / peak).collect();
    let above: Vec<usize> = (0..n_sel)
        .filter(|&i| mag[i] >= cfg.amplitude_threshold)
        .collect();
    let (lo, hi) = match (above.first(), above.last()) {
        (Some(&lo), Some(&hi)) if hi > lo => (lo, hi),
        _ => {
            return Sparc {
                value: 0.0,
                degenerate: false,
            }
        }
    };
    let span = (hi - lo) as f64 * df;
    let value = -(lo..hi)
        .map(|i| {
            let a = df / span;
            let b = mag[i + 1] - mag[i];
            (a * a + b * b).sqrt()
        })
        .sum::<f64>();
    Sparc {
        value,
        degenerate: false,
    }
}
