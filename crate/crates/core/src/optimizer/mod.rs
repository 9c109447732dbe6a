//! Bounded simulated-annealing identification of the MTU parameter pair
//! from recorded joint trajectories.

pub mod dataset;
pub mod objective;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mtu::{init_rest, ParamBounds, ParamVector, PARAM_COUNT};
pub use dataset::{AngleUnit, Motion, PoseMapping, TrainingSet, Trial};
pub use objective::{
    build_pair, objective, prepare, simulate, ObjectiveConfig, Output, PreparedTrial, TrialTrace,
};

/// Simulated-annealing schedule and budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaSettings {
    /// Budget of feasible proposals (accepted or rejected).
    pub iterations: usize,
    /// Budget of objective evaluations, infeasible proposals included.
    pub max_evals: usize,
    pub t0: f64,
    /// Iterations between temperature reductions.
    pub interval: usize,
    /// Geometric cooling factor applied every `interval` iterations.
    pub cooling: f64,
    /// Proposal standard deviation at `T = T0`, as a fraction of the bound width.
    pub step_scale: f64,
    /// Radians per unit of annealing energy.
    pub energy_unit: f64,
}

impl Default for SaSettings {
    fn default() -> Self {
        SaSettings {
            iterations: 500,
            max_evals: 5000,
            t0: 300.0,
            interval: 50,
            cooling: 0.95,
            step_scale: 0.1,
            energy_unit: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationSpec {
    #[serde(default)]
    pub bounds: ParamBounds,
    #[serde(default)]
    pub sa: SaSettings,
    /// Fraction of trials used for training.
    #[serde(default = "default_split")]
    pub split: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub objective: ObjectiveConfig,
    /// Starting point; a seeded feasible sample when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<[ParamVector; 2]>,
}

fn default_split() -> f64 {
    0.6
}

impl Default for OptimizationSpec {
    fn default() -> Self {
        OptimizationSpec {
            bounds: ParamBounds::default(),
            sa: SaSettings::default(),
            split: default_split(),
            seed: 0,
            objective: ObjectiveConfig::default(),
            initial: None,
        }
    }
}

impl OptimizationSpec {
    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::Spec(format!(
                "split {} must lie in (0, 1)",
                self.split
            )));
        }
        let sa = &self.sa;
        if !(sa.t0 > 0.0 && sa.cooling > 0.0 && sa.cooling <= 1.0 && sa.interval > 0) {
            return Err(Error::Spec(
                "annealing schedule needs T0 > 0, 0 < cooling ≤ 1, interval > 0".into(),
            ));
        }
        if !(sa.step_scale > 0.0 && sa.energy_unit > 0.0) {
            return Err(Error::Spec(
                "step scale and energy unit must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One row per objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub evaluation: usize,
    pub iteration: usize,
    pub temperature: f64,
    /// Candidate RMSE (rad); `inf` when infeasible or rejected early.
    pub candidate: f64,
    pub accepted: bool,
    /// Best RMSE so far (rad).
    pub best: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealResult {
    pub best: [ParamVector; 2],
    /// RMSE of `best` on the training trials; `inf` if never evaluated.
    pub best_rmse: f64,
    pub history: Vec<HistoryRow>,
    pub iterations: usize,
    pub evaluations: usize,
}

/// Number of optimized variables for the pair.
pub const PAIR_DIM: usize = 2 * PARAM_COUNT;

fn flatten(v: &[ParamVector; 2]) -> [f64; PAIR_DIM] {
    let mut x = [0.0; PAIR_DIM];
    x[..PARAM_COUNT].copy_from_slice(&v[0].0);
    x[PARAM_COUNT..].copy_from_slice(&v[1].0);
    x
}

fn unflatten(x: &[f64; PAIR_DIM]) -> [ParamVector; 2] {
    let mut a = [0.0; PARAM_COUNT];
    let mut b = [0.0; PARAM_COUNT];
    a.copy_from_slice(&x[..PARAM_COUNT]);
    b.copy_from_slice(&x[PARAM_COUNT..]);
    [ParamVector(a), ParamVector(b)]
}

/// Reflects `x` into `[lo, hi]`.
fn reflect(mut x: f64, lo: f64, hi: f64) -> f64 {
    let w = hi - lo;
    if w <= 0.0 {
        return lo;
    }
    // Fold onto a period of 2w, then mirror the upper half.
    x = (x - lo).rem_euclid(2.0 * w);
    if x > w {
        x = 2.0 * w - x;
    }
    lo + x
}

fn feasible(v: &[ParamVector; 2], spec: &OptimizationSpec) -> bool {
    let cfg = &spec.objective;
    match build_pair(v, &spec.bounds, &cfg.geometry) {
        Ok(pair) => (0..2).all(|i| {
            pair.geoms[i]
                .mtu_length(0.0)
                .and_then(|l| init_rest(&pair.params[i], l, cfg.pipeline.activation.floor))
                .is_ok()
        }),
        Err(_) => false,
    }
}

/// Uniform sample from the bounds satisfying all constraints.
pub fn sample_feasible(spec: &OptimizationSpec, rng: &mut impl Rng) -> Result<[ParamVector; 2]> {
    let b = &spec.bounds;
    for _ in 0..100_000 {
        let mut x = [0.0; PAIR_DIM];
        for (i, xi) in x.iter_mut().enumerate() {
            let j = i % PARAM_COUNT;
            *xi = b.lower[j] + rng.gen::<f64>() * b.width(j);
        }
        let v = unflatten(&x);
        if feasible(&v, spec) {
            return Ok(v);
        }
    }
    Err(Error::Spec(
        "no feasible parameter vector found within the bounds".into(),
    ))
}

/// Minimizes the training RMSE with simulated annealing.
///
/// Proposals perturb every component with a Gaussian whose standard
/// deviation is `step_scale·(T/T0)` of its bound width, reflected at the
/// bounds. A candidate is accepted with probability `exp(−ΔE/T)`, the energy
/// being the RMSE in units of `energy_unit`. The acceptance threshold is
/// drawn before the evaluation so that a run can be cut short once the
/// candidate is certain to be rejected; decisions are identical to a full
/// evaluation.
pub fn anneal(spec: &OptimizationSpec, data: &TrainingSet) -> Result<AnnealResult> {
    spec.validate()?;
    if data.is_empty() {
        return Err(Error::Spec("training split is empty".into()));
    }
    let cfg = &spec.objective;
    let trials = prepare(data, cfg.pipeline.dt)?;
    let sa = spec.sa;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let start = match spec.initial {
        Some(v) if feasible(&v, spec) => v,
        Some(_) => return Err(Error::Spec("initial parameter vector is infeasible".into())),
        None => sample_feasible(spec, &mut rng)?,
    };
    let mut result = AnnealResult {
        best: start,
        best_rmse: f64::INFINITY,
        history: Vec::new(),
        iterations: 0,
        evaluations: 0,
    };
    if sa.max_evals == 0 || sa.iterations == 0 {
        return Ok(result);
    }

    let eval = |v: &[ParamVector; 2], cutoff: f64| -> Option<f64> {
        let pair = build_pair(v, &spec.bounds, &cfg.geometry).ok()?;
        objective::rmse_bounded(&pair, cfg, &trials, cutoff)
            .ok()
            .flatten()
    };
    let mut current = flatten(&start);
    let mut e_cur = eval(&start, f64::INFINITY)
        .ok_or_else(|| Error::Spec("initial parameter vector fails on the training data".into()))?;
    result.evaluations = 1;
    result.best_rmse = e_cur;
    result.history.push(HistoryRow {
        evaluation: 1,
        iteration: 0,
        temperature: sa.t0,
        candidate: e_cur,
        accepted: true,
        best: e_cur,
    });

    let b = &spec.bounds;
    while result.evaluations < sa.max_evals && result.iterations < sa.iterations {
        let temp = sa.t0 * sa.cooling.powi((result.iterations / sa.interval) as i32);
        let scale = sa.step_scale * temp / sa.t0;
        let mut x = current;
        for (i, xi) in x.iter_mut().enumerate() {
            let j = i % PARAM_COUNT;
            let z: f64 = rng.sample(StandardNormal);
            *xi = reflect(*xi + z * scale * b.width(j), b.lower[j], b.upper[j]);
        }
        let cand = unflatten(&x);
        // Accept iff E_new < E_cur − T·ln(r).
        let r: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
        let cutoff = e_cur - temp * r.ln() * sa.energy_unit;
        result.evaluations += 1;
        let feasible_cand = build_pair(&cand, b, &cfg.geometry).is_ok();
        let outcome = if feasible_cand {
            eval(&cand, cutoff)
        } else {
            None
        };
        let accepted = matches!(outcome, Some(e) if e <= cutoff);
        if feasible_cand {
            result.iterations += 1;
        }
        if accepted {
            current = x;
            e_cur = outcome.expect("accepted candidates are evaluated");
            if e_cur < result.best_rmse {
                result.best_rmse = e_cur;
                result.best = cand;
            }
        }
        result.history.push(HistoryRow {
            evaluation: result.evaluations,
            iteration: result.iterations,
            temperature: temp,
            candidate: outcome.unwrap_or(f64::INFINITY),
            accepted,
            best: result.best_rmse,
        });
    }
    Ok(result)
}

/// Validation report: pooled and per-trial RMSE plus the trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rmse: f64,
    pub per_trial: Vec<f64>,
    pub traces: Vec<TrialTrace>,
}

impl ValidationReport {
    /// Pooled and per-trial RMSE of `q_f` against the recording.
    pub fn from_traces(traces: Vec<TrialTrace>) -> Self {
        let rmse_of = |tr: &TrialTrace| -> (f64, usize) {
            let sse = tr
                .q_f
                .iter()
                .zip(&tr.q_gt)
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            (sse, tr.t.len())
        };
        let per: Vec<(f64, usize)> = traces.iter().map(rmse_of).collect();
        let (sse, n) = per
            .iter()
            .fold((0.0, 0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
        ValidationReport {
            rmse: if n > 0 { (sse / n as f64).sqrt() } else { 0.0 },
            per_trial: per
                .iter()
                .map(|&(s, k)| if k > 0 { (s / k as f64).sqrt() } else { 0.0 })
                .collect(),
            traces,
        }
    }

    /// Writes one row per validation sample: `trial,t,q_gt,q_r,q_f`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["trial", "t", "q_gt", "q_r", "q_f"])?;
        for (i, tr) in self.traces.iter().enumerate() {
            for k in 0..tr.t.len() {
                wtr.serialize((i, tr.t[k], tr.q_gt[k], tr.q_r[k], tr.q_f[k]))?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Scores a trained pair on held-out trials.
pub fn validate(
    v: &[ParamVector; 2],
    data: &TrainingSet,
    spec: &OptimizationSpec,
) -> Result<ValidationReport> {
    let cfg = &spec.objective;
    let pair = build_pair(v, &spec.bounds, &cfg.geometry)?;
    let traces = simulate(&pair, cfg, &prepare(data, cfg.pipeline.dt)?)?;
    Ok(ValidationReport::from_traces(traces))
}

/// Writes the annealing history as CSV.
pub fn write_history<W: std::io::Write>(w: W, history: &[HistoryRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for row in history {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}
