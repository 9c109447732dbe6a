//! Synthetic surface EMG: activation-modulated, band-limited Gaussian noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{BandPass, EmgConfig, RawEmg};
use crate::error::Result;

/// Samples discarded to let the noise filter settle.
const PRE_ROLL: usize = 400;

/// Weight of (extensor, flexor) activation seen by each of the eight armband
/// electrodes. Channels 4 and 8 sit over the two muscle groups; the rest pick
/// up a blend.
pub const ARMBAND_MIX: [[f64; 2]; 8] = [
    [0.60, 0.20],
    [0.80, 0.15],
    [0.90, 0.10],
    [1.00, 0.05],
    [0.30, 0.50],
    [0.15, 0.70],
    [0.10, 0.90],
    [0.05, 1.00],
];

/// Per-electrode amplitude profiles from extensor and flexor activation.
pub fn mix_armband(ext: &[f64], flex: &[f64]) -> Vec<Vec<f64>> {
    ARMBAND_MIX
        .iter()
        .map(|w| {
            ext.iter()
                .zip(flex)
                .map(|(&e, &f)| (w[0] * e + w[1] * f).min(1.0))
                .collect()
        })
        .collect()
}

/// Sample-by-sample EMG generator. Each channel draws from its own ChaCha
/// stream, so output does not depend on how many channels are generated
/// alongside it.
#[derive(Debug, Clone)]
pub struct EmgSynth {
    rngs: Vec<ChaCha8Rng>,
    filters: Vec<BandPass>,
    scale: f64,
    sample_rate: f64,
}

impl EmgSynth {
    pub fn new(n_channels: usize, cfg: &EmgConfig, seed: u64) -> Result<Self> {
        let band = cfg.effective_band()?;
        let proto = BandPass::new(band, cfg.sample_rate);
        let scale = proto.noise_gain().sqrt().recip();
        let mut rngs = Vec::with_capacity(n_channels);
        let mut filters = Vec::with_capacity(n_channels);
        for ch in 0..n_channels {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(ch as u64);
            let mut bp = proto.clone();
            for _ in 0..PRE_ROLL {
                bp.process(StandardNormal.sample(&mut rng));
            }
            rngs.push(rng);
            filters.push(bp);
        }
        Ok(EmgSynth {
            rngs,
            filters,
            scale,
            sample_rate: cfg.sample_rate,
        })
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn n_channels(&self) -> usize {
        self.rngs.len()
    }

    /// Next raw sample for per-channel amplitudes (clamped into `[0, 1]`).
    pub fn next_sample(&mut self, amplitude: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for ((rng, bp), &a) in self.rngs.iter_mut().zip(&mut self.filters).zip(amplitude) {
            let carrier = bp.process(StandardNormal.sample(rng)) * self.scale;
            out.push(a.clamp(0.0, 1.0) * carrier);
        }
    }
}

/// Raw EMG whose band-limited carrier has unit RMS, scaled sample-by-sample
/// by the activation profile of each channel (clamped into `[0, 1]`).
pub fn synthesize_emg(profile: &[Vec<f64>], cfg: &EmgConfig, seed: u64) -> Result<RawEmg> {
    let fs = cfg.sample_rate;
    let n = profile.first().map_or(0, Vec::len);
    let mut synth = EmgSynth::new(profile.len(), cfg, seed)?;
    let mut channels = vec![Vec::with_capacity(n); profile.len()];
    let mut amp = vec![0.0; profile.len()];
    let mut sample = Vec::with_capacity(profile.len());
    for i in 0..n {
        for (a, p) in amp.iter_mut().zip(profile) {
            *a = p.get(i).copied().unwrap_or(0.0);
        }
        synth.next_sample(&amp, &mut sample);
        for (c, x) in channels.iter_mut().zip(&sample) {
            c.push(*x);
        }
    }
    Ok(RawEmg {
        sample_rate: fs,
        t: (0..n).map(|i| i as f64 / fs).collect(),
        channels,
    })
}
