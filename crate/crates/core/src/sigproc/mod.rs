//! EMG conditioning: band-pass, full-wave rectification, sliding RMS and
//! normalization into `(0, 1]`, plus synthetic EMG for running without
//! hardware.

pub mod filter;
pub mod io;
pub mod synth;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use filter::{Band, BandPass, Biquad};
pub use synth::{mix_armband, synthesize_emg, EmgSynth, ARMBAND_MIX};

/// Lower clamp of normalized features; activations must stay positive.
pub const FEATURE_FLOOR: f64 = 1e-4;

/// Armband channels (4 and 8) feeding the extensor and flexor MTUs.
pub const MTU_CHANNELS: [usize; 2] = [3, 7];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    /// Causal biquad cascade, usable online.
    #[default]
    Causal,
    /// Forward-backward filtering for offline preprocessing.
    ZeroPhase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmgConfig {
    /// Hz.
    pub sample_rate: f64,
    /// Requested pass band (Hz); the upper edge is capped below Nyquist.
    pub band: (f64, f64),
    /// RMS window length (s).
    pub rms_window: f64,
    /// RMS hop (s).
    pub rms_step: f64,
    /// Per-channel normalization maxima (raw units); empty before calibration.
    pub norm_max: Vec<f64>,
    pub mode: FilterMode,
}

impl Default for EmgConfig {
    fn default() -> Self {
        EmgConfig {
            sample_rate: 200.0,
            band: (20.0, 500.0),
            rms_window: 0.160,
            rms_step: 0.040,
            norm_max: Vec::new(),
            mode: FilterMode::Causal,
        }
    }
}

impl EmgConfig {
    pub fn window_samples(&self) -> usize {
        (self.rms_window * self.sample_rate).round() as usize
    }

    pub fn hop_samples(&self) -> usize {
        (self.rms_step * self.sample_rate).round() as usize
    }

    /// Effective pass band; logs a warning when the upper edge had to be capped.
    pub fn effective_band(&self) -> Result<Band> {
        let band = Band::resolve(self.band.0, self.band.1, self.sample_rate)?;
        if band.capped {
            log::warn!(
                "band upper edge {} Hz exceeds Nyquist at {} Hz sampling; using {} Hz",
                self.band.1,
                self.sample_rate,
                band.high
            );
        }
        Ok(band)
    }

    pub fn validate(&self) -> Result<()> {
        Band::resolve(self.band.0, self.band.1, self.sample_rate)?;
        let (w, h) = (self.window_samples(), self.hop_samples());
        if h == 0 || w < h {
            return Err(Error::Spec(format!(
                "RMS window ({w} samples) must be at least the hop ({h} samples) and the hop positive"
            )));
        }
        if let Some(i) = self
            .norm_max
            .iter()
            .position(|&m| !(m > 0.0 && m.is_finite()))
        {
            return Err(Error::Spec(format!("norm_max[{i}] must be positive")));
        }
        Ok(())
    }
}

/// One normalized feature frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFrame {
    pub t: f64,
    pub ch: Vec<f64>,
}

/// Multichannel raw recording, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RawEmg {
    pub sample_rate: f64,
    pub t: Vec<f64>,
    pub channels: Vec<Vec<f64>>,
}

impl RawEmg {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// Keeps only the listed channels, in the given order.
    pub fn select(&self, idx: &[usize]) -> Result<RawEmg> {
        let channels = idx
            .iter()
            .map(|&i| {
                self.channels.get(i).cloned().ok_or_else(|| {
                    Error::Spec(format!(
                        "channel {} missing ({} present)",
                        i + 1,
                        self.n_channels()
                    ))
                })
            })
            .collect::<Result<_>>()?;
        Ok(RawEmg {
            sample_rate: self.sample_rate,
            t: self.t.clone(),
            channels,
        })
    }

    fn check(&self) -> Result<()> {
        if self.channels.iter().any(|c| c.len() != self.t.len()) {
            return Err(Error::Spec("channel length differs from time base".into()));
        }
        Ok(())
    }
}

/// Divides by the channel maximum and clamps into `[FEATURE_FLOOR, 1]`.
pub fn normalize(rms: f64, norm_max: f64) -> f64 {
    let v = rms / norm_max;
    if v.is_nan() {
        FEATURE_FLOOR
    } else {
        v.clamp(FEATURE_FLOOR, 1.0)
    }
}

/// Streaming conditioner with per-channel filter state.
///
/// A frame is emitted once the first window is full and then every hop; its
/// time stamp is that of the newest sample in the window.
#[derive(Debug, Clone)]
pub struct Conditioner {
    filters: Vec<BandPass>,
    windows: Vec<VecDeque<f64>>,
    norm_max: Vec<f64>,
    window: usize,
    hop: usize,
    seen: usize,
}

impl Conditioner {
    /// `norm_max` may be empty, in which case frames carry raw RMS values.
    pub fn new(cfg: &EmgConfig, n_channels: usize) -> Result<Self> {
        cfg.validate()?;
        if !cfg.norm_max.is_empty() && cfg.norm_max.len() != n_channels {
            return Err(Error::Spec(format!(
                "norm_max has {} entries for {n_channels} channels",
                cfg.norm_max.len()
            )));
        }
        let bp = BandPass::new(cfg.effective_band()?, cfg.sample_rate);
        let window = cfg.window_samples();
        Ok(Conditioner {
            filters: vec![bp; n_channels],
            windows: vec![VecDeque::with_capacity(window); n_channels],
            norm_max: cfg.norm_max.clone(),
            window,
            hop: cfg.hop_samples(),
            seen: 0,
        })
    }

    /// Feeds one already band-passed sample per channel.
    fn push_filtered(&mut self, t: f64, y: impl Iterator<Item = f64>) -> Option<FeatureFrame> {
        for (w, v) in self.windows.iter_mut().zip(y) {
            if w.len() == self.window {
                w.pop_front();
            }
            w.push_back(v.abs());
        }
        self.seen += 1;
        if self.seen < self.window || (self.seen - self.window) % self.hop != 0 {
            return None;
        }
        let ch = self
            .windows
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let rms = (w.iter().map(|v| v * v).sum::<f64>() / self.window as f64).sqrt();
                match self.norm_max.get(i) {
                    Some(&m) => normalize(rms, m),
                    None => rms,
                }
            })
            .collect();
        Some(FeatureFrame { t, ch })
    }

    /// Feeds one raw sample per channel.
    pub fn push(&mut self, t: f64, sample: &[f64]) -> Option<FeatureFrame> {
        let filtered: Vec<f64> = self
            .filters
            .iter_mut()
            .zip(sample)
            .map(|(f, &x)| f.process(x))
            .collect();
        self.push_filtered(t, filtered.into_iter())
    }
}

fn run(raw: &RawEmg, cfg: &EmgConfig) -> Result<Vec<FeatureFrame>> {
    raw.check()?;
    let mut c = Conditioner::new(cfg, raw.n_channels())?;
    let mut out = Vec::with_capacity(raw.len() / cfg.hop_samples().max(1) + 1);
    match cfg.mode {
        FilterMode::Causal => {
            let mut sample = vec![0.0; raw.n_channels()];
            for (n, &t) in raw.t.iter().enumerate() {
                for (s, ch) in sample.iter_mut().zip(&raw.channels) {
                    *s = ch[n];
                }
                out.extend(c.push(t, &sample));
            }
        }
        FilterMode::ZeroPhase => {
            let bp = BandPass::new(cfg.effective_band()?, cfg.sample_rate);
            let filtered: Vec<Vec<f64>> = raw.channels.iter().map(|x| bp.filtfilt(x)).collect();
            for (n, &t) in raw.t.iter().enumerate() {
                out.extend(c.push_filtered(t, filtered.iter().map(|x| x[n])));
            }
        }
    }
    Ok(out)
}

/// Un-normalized RMS feature stream.
pub fn rms_features(raw: &RawEmg, cfg: &EmgConfig) -> Result<Vec<FeatureFrame>> {
    let cfg = EmgConfig {
        norm_max: Vec::new(),
        ..cfg.clone()
    };
    run(raw, &cfg)
}

/// Full conditioning into normalized features; `cfg.norm_max` must be set.
pub fn condition(raw: &RawEmg, cfg: &EmgConfig) -> Result<Vec<FeatureFrame>> {
    if cfg.norm_max.len() != raw.n_channels() {
        return Err(Error::Spec(format!(
            "norm_max has {} entries for {} channels; calibrate first",
            cfg.norm_max.len(),
            raw.n_channels()
        )));
    }
    run(raw, cfg)
}

/// Per-channel maximum of the RMS signal over all training recordings.
pub fn calibrate_norm(streams: &[RawEmg], cfg: &EmgConfig) -> Result<Vec<f64>> {
    let n = streams
        .first()
        .map(RawEmg::n_channels)
        .ok_or_else(|| Error::Spec("calibration needs at least one recording".into()))?;
    let mut max = vec![0.0f64; n];
    for s in streams {
        if s.n_channels() != n {
            return Err(Error::Spec("recordings differ in channel count".into()));
        }
        for frame in rms_features(s, cfg)? {
            for (m, v) in max.iter_mut().zip(frame.ch) {
                *m = m.max(v);
            }
        }
    }
    if let Some(i) = max.iter().position(|&m| !(m > 0.0)) {
        return Err(Error::Calibration(i + 1));
    }
    Ok(max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn raw(channels: Vec<Vec<f64>>, fs: f64) -> RawEmg {
        let n = channels[0].len();
        RawEmg {
            sample_rate: fs,
            t: (0..n).map(|i| i as f64 / fs).collect(),
            channels,
        }
    }

    #[test]
    fn window_and_hop_at_200_hz() {
        let cfg = EmgConfig::default();
        assert_eq!(cfg.window_samples(), 32);
        assert_eq!(cfg.hop_samples(), 8);
    }

    #[test]
    fn zero_and_dc_input_hit_the_floor() {
        let cfg = EmgConfig {
            norm_max: vec![1.0, 1.0],
            ..Default::default()
        };
        let f = condition(&raw(vec![vec![0.0; 400], vec![3.0; 400]], 200.0), &cfg).unwrap();
        assert!(f.iter().all(|fr| fr.ch[0] == FEATURE_FLOOR));
        // The high-pass transient decays; late frames sit on the floor.
        assert!(f[f.len() - 5..].iter().all(|fr| fr.ch[1] == FEATURE_FLOOR));
    }

    #[test]
    fn one_frame_per_hop() {
        let cfg = EmgConfig {
            norm_max: vec![1.0],
            ..Default::default()
        };
        let f = condition(&raw(vec![vec![0.5; 32 + 8 * 10]], 200.0), &cfg).unwrap();
        assert_eq!(f.len(), 11);
        for w in f.windows(2) {
            assert_relative_eq!(w[1].t - w[0].t, 0.040, max_relative = 1e-9);
        }
    }

    #[test]
    fn calibration_is_the_rms_maximum() {
        let cfg = EmgConfig::default();
        let tone = (0..600).map(|i| 0.8 * (std::f64::consts::FRAC_PI_2 * i as f64).sin());
        let s = raw(vec![tone.collect()], 200.0);
        let m = calibrate_norm(&[s.clone()], &cfg).unwrap();
        let peak = rms_features(&s, &cfg)
            .unwrap()
            .iter()
            .map(|f| f.ch[0])
            .fold(0.0, f64::max);
        assert_eq!(m[0], peak);
        let mut cfg = cfg;
        cfg.norm_max = m;
        assert!(condition(&s, &cfg).unwrap().iter().all(|f| f.ch[0] <= 1.0));
    }

    #[test]
    fn calibration_names_a_dead_channel() {
        let s = raw(vec![vec![1.0; 200], vec![0.0; 200]], 200.0);
        let err = calibrate_norm(&[s], &EmgConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Calibration(2)), "{err}");
    }

    #[test]
    fn uncalibrated_condition_is_rejected() {
        let s = raw(vec![vec![1.0; 200]], 200.0);
        assert!(condition(&s, &EmgConfig::default()).is_err());
    }
}
