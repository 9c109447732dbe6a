//! Prediction error of a candidate parameter pair: the full loop (intent,
//! impedance controller, plant with no external torque) is run over every
//! trial and its joint angle compared with the recorded one.

use serde::{Deserialize, Serialize};

use super::dataset::TrainingSet;
use crate::error::{Error, Result};
use crate::intent::{FrameworkLoop, MusclePair, PipelineConfig};
use crate::joint::GeometryConfig;
use crate::mtu::{ParamBounds, ParamVector};
use crate::sigproc::FEATURE_FLOOR;

/// Which angle is scored against the recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    /// Plant angle `q_f` after the impedance controller.
    #[default]
    Plant,
    /// Controller replaced by a rigid pass-through (`q_f ≡ q_r`).
    PassThrough,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub output: Output,
}

/// A trial resampled onto the physics clock.
#[derive(Debug, Clone)]
pub struct PreparedTrial {
    /// `(first tick, features)` of each feature frame.
    frames: Vec<(usize, [f64; 2])>,
    /// `(tick, t, q_gt)` of each pose sample.
    samples: Vec<(usize, f64, f64)>,
}

impl PreparedTrial {
    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    fn last_tick(&self) -> usize {
        self.samples.last().map_or(0, |s| s.0)
    }
}

/// Prepares every trial of a set for repeated evaluation.
pub fn prepare(set: &TrainingSet, dt: f64) -> Result<Vec<PreparedTrial>> {
    set.trials
        .iter()
        .map(|tr| {
            tr.check()?;
            let frames = tr
                .mtu_features()?
                .into_iter()
                .map(|(t, f)| ((t / dt).round() as usize, f))
                .collect();
            let samples = tr
                .relative_pose()?
                .into_iter()
                .map(|(t, q)| ((t / dt).round().max(0.0) as usize, t, q))
                .collect();
            Ok(PreparedTrial { frames, samples })
        })
        .collect()
}

/// Checks bounds and constraints and builds the muscle pair.
pub fn build_pair(
    v: &[ParamVector; 2],
    bounds: &ParamBounds,
    geometry: &GeometryConfig,
) -> Result<MusclePair> {
    let pair = MusclePair::from_vectors(v, geometry)?;
    for p in &pair.params {
        p.validate(bounds)?;
    }
    Ok(pair)
}

/// Per-sample trace of one simulated trial.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialTrace {
    pub t: Vec<f64>,
    pub q_gt: Vec<f64>,
    pub q_r: Vec<f64>,
    pub q_f: Vec<f64>,
}

/// Runs the loop over one trial, calling `on_sample(t, q_gt, q_r, q_f)` at
/// every pose sample; stops early when the callback returns `false`.
fn run_trial(
    pair: &MusclePair,
    cfg: &ObjectiveConfig,
    trial: &PreparedTrial,
    mut on_sample: impl FnMut(f64, f64, f64, f64) -> bool,
) -> Result<bool> {
    let mut lp = FrameworkLoop::init_rest(pair.clone(), cfg.pipeline)?;
    let mut u = [FEATURE_FLOOR; 2];
    let mut next_frame = 0;
    let mut next_sample = 0;
    // Samples at tick 0 see the rest state.
    while next_sample < trial.samples.len() && trial.samples[next_sample].0 == 0 {
        let (_, t, q) = trial.samples[next_sample];
        if !on_sample(t, q, 0.0, 0.0) {
            return Ok(false);
        }
        next_sample += 1;
    }
    for tick in 0..trial.last_tick() {
        while next_frame < trial.frames.len() && trial.frames[next_frame].0 <= tick {
            u = trial.frames[next_frame].1;
            next_frame += 1;
        }
        let (q_r, q_f) = match cfg.output {
            Output::Plant => {
                let f = lp.tick(u, |_| 0.0)?;
                (f.intent.s_r.q, f.plant.q_f)
            }
            Output::PassThrough => {
                let f = lp.pipeline.tick(u)?;
                (f.s_r.q, f.s_r.q)
            }
        };
        while next_sample < trial.samples.len() && trial.samples[next_sample].0 == tick + 1 {
            let (_, t, q) = trial.samples[next_sample];
            if !on_sample(t, q, q_r, q_f) {
                return Ok(false);
            }
            next_sample += 1;
        }
    }
    Ok(true)
}

/// Simulates every trial and returns the traces.
pub fn simulate(
    pair: &MusclePair,
    cfg: &ObjectiveConfig,
    trials: &[PreparedTrial],
) -> Result<Vec<TrialTrace>> {
    trials
        .iter()
        .map(|tr| {
            let mut trace = TrialTrace::default();
            run_trial(pair, cfg, tr, |t, gt, qr, qf| {
                trace.t.push(t);
                trace.q_gt.push(gt);
                trace.q_r.push(qr);
                trace.q_f.push(qf);
                true
            })?;
            Ok(trace)
        })
        .collect()
}

/// Pooled RMSE, or `None` once the squared-error sum proves it exceeds
/// `cutoff`. Errors mark the candidate infeasible.
pub(crate) fn rmse_bounded(
    pair: &MusclePair,
    cfg: &ObjectiveConfig,
    trials: &[PreparedTrial],
    cutoff: f64,
) -> Result<Option<f64>> {
    let n: usize = trials.iter().map(PreparedTrial::n_samples).sum();
    if n == 0 {
        return Err(Error::Spec("training data has no pose samples".into()));
    }
    let max_sse = if cutoff.is_finite() {
        cutoff * cutoff * n as f64
    } else {
        f64::INFINITY
    };
    let mut sse = 0.0;
    for tr in trials {
        let done = run_trial(pair, cfg, tr, |_, gt, _, qf| {
            sse += (qf - gt).powi(2);
            sse <= max_sse
        })?;
        if !done {
            return Ok(None);
        }
    }
    let rmse = (sse / n as f64).sqrt();
    Ok(if rmse.is_finite() { Some(rmse) } else { None })
}

/// RMSE (rad) of the candidate over all trials; infeasible candidates
/// (bounds, constraints, no rest equilibrium, solver failure) score `+∞`.
pub fn objective(
    v: &[ParamVector; 2],
    trials: &[PreparedTrial],
    bounds: &ParamBounds,
    cfg: &ObjectiveConfig,
) -> f64 {
    build_pair(v, bounds, &cfg.geometry)
        .and_then(|pair| rmse_bounded(&pair, cfg, trials, f64::INFINITY))
        .ok()
        .flatten()
        .unwrap_or(f64::INFINITY)
}
