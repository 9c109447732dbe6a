//! Headless batches of synthetic-user trials, their report and on-disk form.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::trial::{run_trial, SyntheticSource, TrialEngine, TrialEvent, TrialRecord};
use super::user::{BodyMap, SyntheticUser, UserConfig};
use super::{derive_seed, Condition, Models, Protocol, System};
use crate::error::{Error, Result};
use crate::metrics::{mann_whitney_u, Alternative, MetricOptions, TrialOutcome};
use crate::sigproc::EmgConfig;
use crate::telemetry::{read_telemetry_file, write_telemetry_file};

/// Seconds of resting EMG fed to the conditioner before each trial.
const PRIME: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatchSpec {
    pub conditions: Vec<Condition>,
    /// Trials per condition.
    pub trials: usize,
    pub seed: u64,
    pub user: UserConfig,
    pub metrics: MetricOptions,
}

impl Default for BatchSpec {
    fn default() -> Self {
        BatchSpec {
            conditions: Condition::all(),
            trials: 40,
            seed: 0,
            user: UserConfig::default(),
            metrics: MetricOptions::default(),
        }
    }
}

/// Models, the synthetic subject's body map and its EMG calibration.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub models: Models,
    pub map: BodyMap,
    /// Conditioning settings with calibration maxima.
    pub emg: EmgConfig,
}

/// Targets and per-trial seeds, shared by every condition. Targets come in
/// shuffled blocks that each visit every target once.
pub fn plan_trials(protocol: &Protocol, n: usize, seed: u64) -> Vec<(f64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n && !protocol.targets.is_empty() {
        let mut block = protocol.targets.clone();
        block.shuffle(&mut rng);
        for t in block.into_iter().take(n - out.len()) {
            out.push((t, derive_seed(seed, out.len() as u64)));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub protocol: Protocol,
    pub spec: BatchSpec,
    pub records: Vec<TrialRecord>,
}

/// Runs `spec.trials` synthetic-user trials in every condition.
pub fn run_batch(sim: &Simulation, protocol: &Protocol, spec: &BatchSpec) -> Result<Batch> {
    let plant = &sim.models.pipeline.plant;
    protocol.validate(plant.q_min, plant.q_max)?;
    spec.user.validate()?;
    let plan = plan_trials(protocol, spec.trials, spec.seed);
    let mut records = Vec::with_capacity(plan.len() * spec.conditions.len());
    for &condition in &spec.conditions {
        for &(target, seed) in &plan {
            let user = SyntheticUser::new(spec.user, 0.0, target, derive_seed(seed, 1))?;
            let mut source = SyntheticSource::new(user, &sim.map, &sim.emg, derive_seed(seed, 2))?;
            let initial = source.prime(0.0, spec.user.co_base, PRIME)?;
            let mut engine = TrialEngine::new(&sim.models, protocol, condition, target, initial)?;
            run_trial(&mut engine, &mut source)?;
            records.push(engine.finish(seed, spec.metrics)?);
        }
    }
    Ok(Batch {
        protocol: protocol.clone(),
        spec: spec.clone(),
        records,
    })
}

/// One trial in the report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub system: System,
    pub field: bool,
    pub trial: usize,
    pub target: f64,
    pub seed: u64,
    pub valid: bool,
    pub success: bool,
    pub tr: f64,
    pub tp: f64,
    pub pe: f64,
    pub energy: f64,
    pub nm: u32,
    pub sparc: f64,
    pub mi: f64,
}

/// Means over the valid trials of one condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub system: System,
    pub field: bool,
    pub n: usize,
    pub sr: f64,
    pub tr: f64,
    pub tp: f64,
    pub pe: f64,
    pub energy: f64,
    pub nm: f64,
    pub sparc: f64,
    pub mi: f64,
}

/// Framework against baseline on one measure, one-tailed in the direction
/// that favours the framework.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub metric: String,
    pub field: bool,
    pub alternative: Alternative,
    pub u: f64,
    pub p: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub groups: Vec<GroupSummary>,
    pub comparisons: Vec<Comparison>,
}

type Measure = (&'static str, fn(&TrialOutcome) -> f64, Alternative);

const COMPARED: [Measure; 4] = [
    ("nm", |o| o.nm as f64, Alternative::Less),
    ("tr", |o| o.tr, Alternative::Less),
    ("tp", |o| o.tp, Alternative::Greater),
    ("pe", |o| o.pe, Alternative::Greater),
];

impl Report {
    pub fn from_records(records: &[TrialRecord]) -> Result<Report> {
        let mut index: BTreeMap<Condition, usize> = BTreeMap::new();
        let mut rows = Vec::with_capacity(records.len());
        for r in records {
            let i = index.entry(r.condition).or_insert(0);
            let o = &r.outcome;
            rows.push(ReportRow {
                system: r.condition.system,
                field: r.condition.field,
                trial: *i,
                target: r.target,
                seed: r.seed,
                valid: r.valid,
                success: o.success,
                tr: o.tr,
                tp: o.tp,
                pe: o.pe,
                energy: o.energy,
                nm: o.nm,
                sparc: o.sparc,
                mi: o.mi,
            });
            *i += 1;
        }

        let mut by_cond: BTreeMap<Condition, Vec<&TrialOutcome>> = BTreeMap::new();
        for r in records.iter().filter(|r| r.valid) {
            by_cond.entry(r.condition).or_default().push(&r.outcome);
        }
        let mean = |v: &[&TrialOutcome], f: fn(&TrialOutcome) -> f64| {
            if v.is_empty() {
                f64::NAN
            } else {
                v.iter().map(|o| f(o)).sum::<f64>() / v.len() as f64
            }
        };
        let groups = by_cond
            .iter()
            .map(|(c, v)| GroupSummary {
                system: c.system,
                field: c.field,
                n: v.len(),
                sr: mean(v, |o| if o.success { 1.0 } else { 0.0 }),
                tr: mean(v, |o| o.tr),
                tp: mean(v, |o| o.tp),
                pe: mean(v, |o| o.pe),
                energy: mean(v, |o| o.energy),
                nm: mean(v, |o| o.nm as f64),
                sparc: mean(v, |o| o.sparc),
                mi: mean(v, |o| o.mi),
            })
            .collect();

        let mut comparisons = Vec::new();
        for field in [false, true] {
            let m = by_cond.get(&Condition {
                system: System::Framework,
                field,
            });
            let b = by_cond.get(&Condition {
                system: System::Baseline,
                field,
            });
            let (Some(m), Some(b)) = (m, b) else { continue };
            if m.len() < 3 || b.len() < 3 {
                continue;
            }
            for (name, f, alt) in COMPARED {
                let xm: Vec<f64> = m.iter().map(|o| f(o)).collect();
                let xb: Vec<f64> = b.iter().map(|o| f(o)).collect();
                let mw = mann_whitney_u(&xm, &xb, alt)?;
                comparisons.push(Comparison {
                    metric: name.into(),
                    field,
                    alternative: alt,
                    u: mw.u,
                    p: mw.p,
                    exact: mw.exact,
                });
            }
        }
        Ok(Report {
            rows,
            groups,
            comparisons,
        })
    }

    pub fn group(&self, c: Condition) -> Option<&GroupSummary> {
        self.groups
            .iter()
            .find(|g| g.system == c.system && g.field == c.field)
    }

    pub fn comparison(&self, metric: &str, field: bool) -> Option<&Comparison> {
        self.comparisons
            .iter()
            .find(|c| c.metric == metric && c.field == field)
    }
}

impl Batch {
    pub fn report(&self) -> Result<Report> {
        Report::from_records(&self.records)
    }
}

fn write_all<W: std::io::Write, T: Serialize>(w: W, items: &[T]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for it in items {
        wtr.serialize(it)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Per-trial CSV.
pub fn write_rows<W: std::io::Write>(w: W, report: &Report) -> Result<()> {
    write_all(w, &report.rows)
}

/// Per-condition aggregate CSV.
pub fn write_groups<W: std::io::Write>(w: W, report: &Report) -> Result<()> {
    write_all(w, &report.groups)
}

pub fn write_comparisons<W: std::io::Write>(w: W, report: &Report) -> Result<()> {
    write_all(w, &report.comparisons)
}

#[derive(Serialize)]
struct MiTrRow {
    system: System,
    field: bool,
    trial: usize,
    success: bool,
    tr: f64,
    mi: f64,
}

/// Mutual information against time to reach, one row per valid trial.
pub fn write_mi_tr<W: std::io::Write>(w: W, report: &Report) -> Result<()> {
    let rows: Vec<MiTrRow> = report
        .rows
        .iter()
        .filter(|r| r.valid)
        .map(|r| MiTrRow {
            system: r.system,
            field: r.field,
            trial: r.trial,
            success: r.success,
            tr: r.tr,
            mi: r.mi,
        })
        .collect();
    write_all(w, &rows)
}

/// File name of the batch manifest.
pub const BATCH_MANIFEST: &str = "batch.json";

#[derive(Serialize, Deserialize)]
struct TrialEntry {
    telemetry: String,
    condition: Condition,
    target: f64,
    seed: u64,
    dt: f64,
    valid: bool,
    events: Vec<TrialEvent>,
    outcome: TrialOutcome,
}

#[derive(Serialize, Deserialize)]
struct BatchManifest {
    protocol: Protocol,
    spec: BatchSpec,
    trials: Vec<TrialEntry>,
}

/// Writes a manifest plus one telemetry CSV per trial into `dir`.
pub fn save_batch(dir: &Path, batch: &Batch) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut trials = Vec::with_capacity(batch.records.len());
    for (i, r) in batch.records.iter().enumerate() {
        let name = format!(
            "trial_{i:04}_{}_{}.csv",
            r.condition.system.label(),
            if r.condition.field { "field" } else { "free" }
        );
        write_telemetry_file(&dir.join(&name), &r.telemetry)?;
        trials.push(TrialEntry {
            telemetry: name,
            condition: r.condition,
            target: r.target,
            seed: r.seed,
            dt: r.dt,
            valid: r.valid,
            events: r.events.clone(),
            outcome: r.outcome,
        });
    }
    let manifest = BatchManifest {
        protocol: batch.protocol.clone(),
        spec: batch.spec.clone(),
        trials,
    };
    std::fs::write(
        dir.join(BATCH_MANIFEST),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

pub fn load_batch(dir: &Path) -> Result<Batch> {
    let text = std::fs::read_to_string(dir.join(BATCH_MANIFEST))?;
    let m: BatchManifest = serde_json::from_str(&text)?;
    let records = m
        .trials
        .into_iter()
        .map(|e| {
            if e.telemetry.contains(['/', '\\']) {
                return Err(Error::Spec(format!(
                    "telemetry path {} leaves the batch directory",
                    e.telemetry
                )));
            }
            Ok(TrialRecord {
                protocol: m.protocol.clone(),
                condition: e.condition,
                target: e.target,
                seed: e.seed,
                dt: e.dt,
                metrics: m.spec.metrics,
                valid: e.valid,
                telemetry: read_telemetry_file(&dir.join(&e.telemetry))?,
                events: e.events,
                outcome: e.outcome,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Batch {
        protocol: m.protocol,
        spec: m.spec,
        records,
    })
}
