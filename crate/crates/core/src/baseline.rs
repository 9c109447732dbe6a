//! Data-driven comparison system: a one-hidden-layer tanh network from the
//! eight feature channels to the reference angle, tracked by the fixed-gain
//! PD law.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{TrainingSet, TrialTrace, ValidationReport};
use crate::plant::{baseline_pd_law, plant_step, PlantParams, PlantState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub hidden: usize,
    pub epochs: usize,
    /// Adam step size.
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            hidden: 16,
            epochs: 3000,
            learning_rate: 0.03,
            seed: 0,
        }
    }
}

/// Feedforward regressor `q_r = w2·tanh(W1·x + b1) + b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorModel {
    pub inputs: usize,
    pub hidden: usize,
    /// Row-major `hidden × inputs`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    /// Per-channel input standardization learned from the fitting data;
    /// empty means identity.
    #[serde(default)]
    pub x_mean: Vec<f64>,
    #[serde(default)]
    pub x_scale: Vec<f64>,
    /// Output clamp (rad).
    pub q_min: f64,
    pub q_max: f64,
    pub fit: FitConfig,
    /// RMSE on the fitting data (rad).
    pub train_rmse: f64,
}

impl RegressorModel {
    /// Seeded Glorot-uniform initialization.
    pub fn init(inputs: usize, cfg: &FitConfig, plant: &PlantParams) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let h = cfg.hidden;
        let a1 = (6.0 / (inputs + h) as f64).sqrt();
        let a2 = (6.0 / (h + 1) as f64).sqrt();
        RegressorModel {
            inputs,
            hidden: h,
            w1: (0..h * inputs).map(|_| rng.gen_range(-a1..a1)).collect(),
            b1: vec![0.0; h],
            w2: (0..h).map(|_| rng.gen_range(-a2..a2)).collect(),
            b2: 0.0,
            x_mean: Vec::new(),
            x_scale: Vec::new(),
            q_min: plant.q_min,
            q_max: plant.q_max,
            fit: *cfg,
            train_rmse: f64::NAN,
        }
    }

    fn hidden_layer(&self, x: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let row = &self.w1[j * self.inputs..(j + 1) * self.inputs];
            let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[j];
            *o = z.tanh();
        }
    }

    fn raw(&self, x: &[f64]) -> f64 {
        let mut h = vec![0.0; self.hidden];
        self.hidden_layer(x, &mut h);
        h.iter().zip(&self.w2).map(|(a, w)| a * w).sum::<f64>() + self.b2
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        if self.x_mean.len() != x.len() {
            return x.to_vec();
        }
        x.iter()
            .zip(self.x_mean.iter().zip(&self.x_scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    /// Reference angle for one feature frame, clamped to the joint range.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let y = self.raw(&self.standardize(x));
        if y.is_finite() {
            y.clamp(self.q_min, self.q_max)
        } else {
            0.0
        }
    }

    fn n_weights(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    fn weights_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(std::iter::once(&mut self.b2))
    }

    /// Mean squared error and its gradient (same layout as `weights_mut`).
    pub fn loss_and_grad(&self, xs: &[Vec<f64>], ys: &[f64]) -> (f64, Vec<f64>) {
        let (ni, nh) = (self.inputs, self.hidden);
        let mut g = vec![0.0; self.n_weights()];
        let (gw1, rest) = g.split_at_mut(nh * ni);
        let (gb1, rest) = rest.split_at_mut(nh);
        let (gw2, gb2) = rest.split_at_mut(nh);
        let mut h = vec![0.0; nh];
        let mut loss = 0.0;
        let n = xs.len() as f64;
        for (x, &y) in xs.iter().zip(ys) {
            self.hidden_layer(x, &mut h);
            let out = h.iter().zip(&self.w2).map(|(a, w)| a * w).sum::<f64>() + self.b2;
            let err = out - y;
            loss += err * err;
            let d_out = 2.0 * err / n;
            gb2[0] += d_out;
            for j in 0..nh {
                gw2[j] += d_out * h[j];
                let dz = d_out * self.w2[j] * (1.0 - h[j] * h[j]);
                gb1[j] += dz;
                for (k, v) in x.iter().enumerate() {
                    gw1[j * ni + k] += dz * v;
                }
            }
        }
        (loss / n, g)
    }
}

/// Input/target pairs: each pose sample with the latest feature frame at or
/// before it.
pub fn training_pairs(data: &TrainingSet) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for tr in &data.trials {
        tr.check()?;
        let mut k = 0;
        for &(t, q) in &tr.pose {
            while k + 1 < tr.features.len() && tr.features[k + 1].t <= t + 1e-9 {
                k += 1;
            }
            xs.push(tr.features[k].ch.clone());
            ys.push(q);
        }
    }
    if xs.is_empty() {
        return Err(Error::Spec("no training samples".into()));
    }
    Ok((xs, ys))
}

/// Full-batch Adam on the mean squared error with a cosine-decayed step.
pub fn fit(data: &TrainingSet, cfg: &FitConfig, plant: &PlantParams) -> Result<RegressorModel> {
    let (xs, ys) = training_pairs(data)?;
    let inputs = xs[0].len();
    if xs.iter().any(|x| x.len() != inputs) {
        return Err(Error::Spec("feature frames differ in channel count".into()));
    }
    let mut model = RegressorModel::init(inputs, cfg, plant);
    let n_samples = xs.len() as f64;
    for c in 0..inputs {
        let mean = xs.iter().map(|x| x[c]).sum::<f64>() / n_samples;
        let var = xs.iter().map(|x| (x[c] - mean).powi(2)).sum::<f64>() / n_samples;
        model.x_mean.push(mean);
        model
            .x_scale
            .push(if var > 1e-12 { var.sqrt() } else { 1.0 });
    }
    let xs: Vec<Vec<f64>> = xs.iter().map(|x| model.standardize(x)).collect();
    model.b2 = ys.iter().sum::<f64>() / n_samples;
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let n = model.n_weights();
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut last_finite = 0;
    for epoch in 1..=cfg.epochs {
        let (loss, g) = model.loss_and_grad(&xs, &ys);
        if !loss.is_finite() || g.iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence {
                last_finite_epoch: last_finite,
            });
        }
        last_finite = epoch;
        let c1 = 1.0 - b1.powi(epoch as i32);
        let c2 = 1.0 - b2.powi(epoch as i32);
        // Cosine decay to 1% of the initial rate settles Adam's end-of-run jitter.
        let frac = epoch as f64 / cfg.epochs as f64;
        let lr =
            cfg.learning_rate * (0.01 + 0.99 * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos()));
        for (i, w) in model.weights_mut().enumerate() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            *w -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
        }
    }
    let (loss, _) = model.loss_and_grad(&xs, &ys);
    if !loss.is_finite() {
        return Err(Error::Divergence {
            last_finite_epoch: last_finite,
        });
    }
    model.train_rmse = loss.sqrt();
    Ok(model)
}

/// Regressor plus PD law closing the loop on the plant.
#[derive(Debug, Clone)]
pub struct BaselineLoop {
    pub model: RegressorModel,
    pub plant: PlantState,
    pub params: PlantParams,
    pub dt: f64,
}

impl BaselineLoop {
    pub fn new(model: RegressorModel, params: PlantParams, dt: f64) -> Self {
        BaselineLoop {
            model,
            plant: PlantState::at_rest(0.0),
            params,
            dt,
        }
    }

    /// One physics step; returns the reference angle used.
    pub fn tick(&mut self, features: &[f64], tau_ext: f64) -> Result<f64> {
        let q_r = self.model.predict(features);
        let tau = baseline_pd_law(q_r, &self.plant, &self.params);
        self.plant = plant_step(&self.plant, tau, tau_ext, &self.params, self.dt)?;
        Ok(q_r)
    }
}

/// Closed-loop tracking of recorded trials: features are held between
/// frames, the PD law drives the plant with no external torque, and `q_f` is
/// scored against the recorded angle at every pose sample.
pub fn evaluate(
    model: &RegressorModel,
    data: &TrainingSet,
    plant: &PlantParams,
    dt: f64,
) -> Result<ValidationReport> {
    let mut traces = Vec::with_capacity(data.trials.len());
    for tr in &data.trials {
        tr.check()?;
        let t0 = tr.features[0].t;
        let tick_of = |t: f64| ((t - t0) / dt).round().max(0.0) as usize;
        let mut lp = BaselineLoop::new(model.clone(), *plant, dt);
        let mut trace = TrialTrace::default();
        let push = |trace: &mut TrialTrace, t: f64, gt: f64, q_r: f64, q_f: f64| {
            trace.t.push(t - t0);
            trace.q_gt.push(gt);
            trace.q_r.push(q_r);
            trace.q_f.push(q_f);
        };
        let mut frame = 0;
        let mut sample = 0;
        while sample < tr.pose.len() && tick_of(tr.pose[sample].0) == 0 {
            push(&mut trace, tr.pose[sample].0, tr.pose[sample].1, 0.0, 0.0);
            sample += 1;
        }
        let last = tr.pose.last().map_or(0, |p| tick_of(p.0));
        for tick in 0..last {
            while frame + 1 < tr.features.len() && tick_of(tr.features[frame + 1].t) <= tick {
                frame += 1;
            }
            let q_r = lp.tick(&tr.features[frame].ch, 0.0)?;
            while sample < tr.pose.len() && tick_of(tr.pose[sample].0) == tick + 1 {
                push(
                    &mut trace,
                    tr.pose[sample].0,
                    tr.pose[sample].1,
                    q_r,
                    lp.plant.q_f,
                );
                sample += 1;
            }
        }
        traces.push(trace);
    }
    Ok(ValidationReport::from_traces(traces))
}
