//! A synthetic subject for headless experiments: EMG calibration from
//! simulated maximal contractions, the envelope gain of the conditioner, and
//! training recordings whose ground-truth angles come from known muscle
//! parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::derive_seed;
use super::user::{min_jerk, Body, BodyMap, BodyMapConfig};
use crate::error::{Error, Result};
use crate::intent::{MusclePair, PipelineConfig};
use crate::optimizer::{simulate, ObjectiveConfig, Output, TrainingSet, Trial};
use crate::sigproc::{self, mix_armband, synthesize_emg, EmgConfig, FeatureFrame, FEATURE_FLOOR};

/// Mean conditioned RMS of unit-amplitude synthetic EMG, measured over
/// `seconds` of signal.
pub fn envelope_gain(emg: &EmgConfig, seconds: f64, seed: u64) -> Result<f64> {
    let n = (seconds * emg.sample_rate).round() as usize;
    let raw = synthesize_emg(&[vec![1.0; n]], emg, seed)?;
    let frames = sigproc::rms_features(&raw, emg)?;
    if frames.is_empty() {
        return Err(Error::Spec(format!(
            "{seconds} s is shorter than one RMS window"
        )));
    }
    Ok(frames.iter().map(|f| f.ch[0]).sum::<f64>() / frames.len() as f64)
}

/// Normalization maxima from a simulated calibration: rest, then maximal
/// extension, flexion and co-contraction of `hold` seconds each.
pub fn calibrate_subject(emg: &EmgConfig, hold: f64, seed: u64) -> Result<Vec<f64>> {
    let fs = emg.sample_rate;
    let rest = (fs * 1.0).round() as usize;
    let on = (fs * hold).round() as usize;
    let mut ext = Vec::new();
    let mut flex = Vec::new();
    for (e, f) in [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
        ext.extend(std::iter::repeat(FEATURE_FLOOR).take(rest));
        flex.extend(std::iter::repeat(FEATURE_FLOOR).take(rest));
        ext.extend(std::iter::repeat(e).take(on));
        flex.extend(std::iter::repeat(f).take(on));
    }
    let raw = synthesize_emg(&mix_armband(&ext, &flex), emg, seed)?;
    sigproc::calibrate_norm(&[raw], emg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubjectConfig {
    /// Conditioning settings; calibration maxima are filled in.
    pub emg: EmgConfig,
    /// Duration of each calibration contraction (s).
    pub calibration_hold: f64,
    /// Signal length used to measure the envelope gain (s).
    pub gain_seconds: f64,
    pub body_map: BodyMapConfig,
    pub seed: u64,
}

impl Default for SubjectConfig {
    fn default() -> Self {
        SubjectConfig {
            emg: EmgConfig::default(),
            calibration_hold: 3.0,
            gain_seconds: 60.0,
            body_map: BodyMapConfig::default(),
            seed: 0,
        }
    }
}

/// A calibrated synthetic subject.
#[derive(Debug, Clone)]
pub struct Subject {
    pub body: Body,
    pub map: BodyMap,
    /// Conditioning settings with the subject's calibration maxima.
    pub emg: EmgConfig,
}

impl Subject {
    /// Calibrates the EMG of a subject whose muscles are `pair`.
    pub fn new(pair: MusclePair, pipeline: PipelineConfig, cfg: &SubjectConfig) -> Result<Self> {
        let mut emg = cfg.emg.clone();
        emg.norm_max = calibrate_subject(&emg, cfg.calibration_hold, derive_seed(cfg.seed, 0))?;
        let gain = envelope_gain(&emg, cfg.gain_seconds, derive_seed(cfg.seed, 1))?;
        let body = Body {
            pair,
            pipeline,
            norm_max: emg.norm_max.clone(),
            gain,
        };
        let map = BodyMap::build(&body, &cfg.body_map)?;
        Ok(Subject { body, map, emg })
    }

    pub fn dataset(&self, cfg: &DatasetConfig, seed: u64) -> Result<TrainingSet> {
        generate_dataset(&self.body, &self.map, &self.emg, cfg, seed)
    }
}

/// Shape of the training recordings: the subject follows a cue of
/// minimum-jerk moves between random postures, each at one co-contraction
/// level, with multiplicative motor noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub trials: usize,
    /// Length of each recording (s).
    pub duration: f64,
    /// Range of move durations (s).
    pub move_time: (f64, f64),
    /// Range of pauses between moves (s).
    pub dwell: (f64, f64),
    /// Largest cue angle (rad).
    pub q_range: f64,
    pub co_levels: Vec<f64>,
    /// Ground-truth sampling rate (Hz).
    pub pose_rate: f64,
    pub motor_noise: f64,
    pub noise_tau: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            trials: 20,
            duration: 10.0,
            move_time: (1.0, 2.0),
            dwell: (0.5, 1.5),
            q_range: 0.7,
            co_levels: vec![0.02, 0.1, 0.25],
            pose_rate: 100.0,
            motor_noise: 0.05,
            noise_tau: 0.1,
        }
    }
}

/// Cue angle and co-contraction at the EMG sample rate.
fn cue(cfg: &DatasetConfig, fs: f64, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let n = (cfg.duration * fs).round() as usize;
    let mut out = Vec::with_capacity(n);
    let mut from = 0.0;
    let mut co = cfg.co_levels.first().copied().unwrap_or(0.0);
    while out.len() < n {
        let to = rng.gen_range(-cfg.q_range..=cfg.q_range);
        let next_co = if cfg.co_levels.is_empty() {
            0.0
        } else {
            cfg.co_levels[rng.gen_range(0..cfg.co_levels.len())]
        };
        let mt = rng.gen_range(cfg.move_time.0..=cfg.move_time.1);
        let dwell = rng.gen_range(cfg.dwell.0..=cfg.dwell.1);
        let m = (mt * fs).round() as usize;
        let d = (dwell * fs).round() as usize;
        for i in 0..m {
            let s = min_jerk(i as f64 / m as f64);
            out.push((from + (to - from) * s, co + (next_co - co) * s));
        }
        out.extend(std::iter::repeat((to, next_co)).take(d));
        from = to;
        co = next_co;
    }
    out.truncate(n);
    out
}

/// Generates training recordings. Features are conditioned synthetic EMG;
/// the pose is what the body's own muscles produce from the noise-free
/// envelope of the same activations.
pub fn generate_dataset(
    body: &Body,
    map: &BodyMap,
    emg: &EmgConfig,
    cfg: &DatasetConfig,
    seed: u64,
) -> Result<TrainingSet> {
    if emg.norm_max.len() != 8 {
        return Err(Error::Spec(
            "dataset generation needs eight calibrated channels".into(),
        ));
    }
    let fs = emg.sample_rate;
    let window = emg.window_samples();
    let obj = ObjectiveConfig {
        pipeline: body.pipeline,
        output: Output::Plant,
        ..Default::default()
    };
    let decay = (-1.0 / (fs * cfg.noise_tau)).exp();
    let drive = cfg.motor_noise * (1.0 - decay * decay).sqrt();
    let mut trials = Vec::with_capacity(cfg.trials);
    for k in 0..cfg.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k as u64));
        let mut noise = [0.0f64; 2];
        let (mut ext, mut flex) = (Vec::new(), Vec::new());
        for (q, co) in cue(cfg, fs, &mut rng) {
            let a = map.activations(q, co);
            for i in 0..2 {
                let z: f64 = StandardNormal.sample(&mut rng);
                noise[i] = decay * noise[i] + drive * z;
            }
            ext.push((a[0] * (1.0 + noise[0])).clamp(FEATURE_FLOOR, 1.0));
            flex.push((a[1] * (1.0 + noise[1])).clamp(FEATURE_FLOOR, 1.0));
        }
        let amp = mix_armband(&ext, &flex);
        let raw = synthesize_emg(&amp, emg, derive_seed(seed, 1_000 + k as u64))?;
        let noisy = sigproc::condition(&raw, emg)?;
        let clean: Vec<FeatureFrame> = noisy
            .iter()
            .map(|f| {
                let end = (f.t * fs).round() as usize + 1;
                let ch = amp
                    .iter()
                    .zip(&emg.norm_max)
                    .map(|(a, &m)| {
                        let ms =
                            a[end - window..end].iter().map(|v| v * v).sum::<f64>() / window as f64;
                        sigproc::normalize(body.gain * ms.sqrt(), m)
                    })
                    .collect();
                FeatureFrame { t: f.t, ch }
            })
            .collect();
        let t0 = clean
            .first()
            .map(|f| f.t)
            .ok_or_else(|| Error::Spec("recording shorter than one RMS window".into()))?;
        let t_end = raw.t.last().copied().unwrap_or(t0);
        let n_pose = ((t_end - t0) * cfg.pose_rate).floor() as usize + 1;
        let mut trial = Trial {
            features: clean,
            pose: (0..n_pose)
                .map(|i| (t0 + i as f64 / cfg.pose_rate, 0.0))
                .collect(),
        };
        let set = TrainingSet {
            trials: vec![trial.clone()],
            ..Default::default()
        };
        let prepared = crate::optimizer::prepare(&set, body.pipeline.dt)?;
        let trace = simulate(&body.pair, &obj, &prepared)?.remove(0);
        for (p, q) in trial.pose.iter_mut().zip(trace.q_f) {
            p.1 = q;
        }
        trial.features = noisy;
        trials.push(trial);
    }
    Ok(TrainingSet {
        subject: "synthetic".into(),
        trials,
        ..Default::default()
    })
}
