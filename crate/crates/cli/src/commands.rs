use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Serialize;

use myoimp::baseline::{self, RegressorModel};
use myoimp::intent::MusclePair;
use myoimp::optimizer::{self, anneal, build_pair, write_history, TrainingSet, ValidationReport};
use myoimp::session::synthetic::Subject;
use myoimp::session::{
    load_batch, run_batch, save_batch, write_comparisons, write_groups, write_mi_tr, write_rows, Models, Report,
    Simulation, System,
};
use myoimp_service::Service;

use crate::config::{read_json, write_json, Config, ParamsFile};

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

/// `out` with its extension replaced by `suffix`.
fn beside(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}{suffix}"))
}

fn load_data(cfg: &Config, dir: &Path) -> anyhow::Result<TrainingSet> {
    let (set, calibrated) =
        TrainingSet::load(dir, &cfg.emg).with_context(|| format!("loading dataset {}", dir.display()))?;
    if calibrated.is_some() {
        log::info!("calibrated EMG maxima over the raw trials of {}", dir.display());
    }
    if set.is_empty() {
        bail!("dataset {} has no trials", dir.display());
    }
    Ok(set)
}

fn pair_from(cfg: &Config, params: Option<&Path>) -> anyhow::Result<MusclePair> {
    let p = match params {
        Some(path) => read_json::<ParamsFile>(path)?,
        None => ParamsFile::reference(),
    };
    Ok(build_pair(&p.pair(), &cfg.optimization.bounds, &cfg.geometry)?)
}

fn write_report(path: &Path, report: &ValidationReport) -> anyhow::Result<()> {
    report.write_csv(create(path)?)?;
    Ok(())
}

fn print_rmse(label: &str, report: &ValidationReport) {
    println!("{label} RMSE {:.4} rad over {} trials", report.rmse, report.per_trial.len());
    for (i, r) in report.per_trial.iter().enumerate() {
        println!("  trial {i:3}: {r:.4}");
    }
}

#[derive(Serialize)]
struct SubjectInfo<'a> {
    truth: &'a ParamsFile,
    norm_max: &'a [f64],
    envelope_gain: f64,
    seed: u64,
}

pub fn synth(cfg: &Config, out: &Path, truth: Option<&Path>, seed: u64) -> anyhow::Result<()> {
    let truth = match truth {
        Some(p) => read_json::<ParamsFile>(p)?,
        None => ParamsFile::reference(),
    };
    let pair = build_pair(&truth.pair(), &cfg.optimization.bounds, &cfg.geometry)?;
    let subject = Subject::new(pair, cfg.pipeline, &cfg.subject)?;
    let set = subject.dataset(&cfg.dataset, seed)?;
    set.save(out)?;
    write_json(
        &out.join("subject.json"),
        &SubjectInfo {
            truth: &truth,
            norm_max: &subject.emg.norm_max,
            envelope_gain: subject.body.gain,
            seed,
        },
    )?;
    println!("wrote {} trials to {}", set.trials.len(), out.display());
    Ok(())
}

pub fn train(
    cfg: &Config,
    data: &Path,
    out: &Path,
    history: Option<PathBuf>,
    report: Option<PathBuf>,
) -> anyhow::Result<()> {
    let spec = cfg.optimization();
    spec.validate()?;
    let set = load_data(cfg, data)?;
    let (train, val) = set.split(spec.split)?;
    log::info!(
        "annealing on {} trials ({} iterations, {} evaluations max)",
        train.trials.len(),
        spec.sa.iterations,
        spec.sa.max_evals
    );
    let result = anneal(&spec, &train)?;
    if !result.best_rmse.is_finite() {
        bail!("no feasible parameter vector was found");
    }
    let validation = if val.is_empty() {
        None
    } else {
        Some(optimizer::validate(&result.best, &val, &spec)?)
    };
    let params = ParamsFile {
        extensor: result.best[0],
        flexor: result.best[1],
        train_rmse: Some(result.best_rmse),
        validation_rmse: validation.as_ref().map(|v| v.rmse),
    };
    write_json(out, &params)?;
    let history = history.unwrap_or_else(|| beside(out, "_history.csv"));
    write_history(create(&history)?, &result.history)?;
    println!(
        "train RMSE {:.4} rad after {} iterations / {} evaluations",
        result.best_rmse, result.iterations, result.evaluations
    );
    if let Some(v) = &validation {
        let path = report.unwrap_or_else(|| beside(out, "_validation.csv"));
        write_report(&path, v)?;
        print_rmse("validation", v);
    }
    Ok(())
}

pub fn evaluate(cfg: &Config, data: &Path, params: &Path, out: &Path) -> anyhow::Result<()> {
    let set = load_data(cfg, data)?;
    let p: ParamsFile = read_json(params)?;
    let report = optimizer::validate(&p.pair(), &set, &cfg.optimization())?;
    write_report(out, &report)?;
    print_rmse("tracking", &report);
    Ok(())
}

pub fn train_baseline(cfg: &Config, data: &Path, out: &Path, report: Option<PathBuf>) -> anyhow::Result<()> {
    let set = load_data(cfg, data)?;
    let (train, val) = set.split(cfg.optimization.split)?;
    let model = baseline::fit(&train, &cfg.baseline, &cfg.pipeline.plant)?;
    write_json(out, &model)?;
    println!("fit RMSE {:.4} rad on {} trials", model.train_rmse, train.trials.len());
    if !val.is_empty() {
        let v = baseline::evaluate(&model, &val, &cfg.pipeline.plant, cfg.pipeline.dt)?;
        write_report(&report.unwrap_or_else(|| beside(out, "_validation.csv")), &v)?;
        print_rmse("validation", &v);
    }
    Ok(())
}

pub fn eval_baseline(cfg: &Config, data: &Path, model: &Path, out: &Path) -> anyhow::Result<()> {
    let set = load_data(cfg, data)?;
    let model: RegressorModel = read_json(model)?;
    let report = baseline::evaluate(&model, &set, &cfg.pipeline.plant, cfg.pipeline.dt)?;
    write_report(out, &report)?;
    print_rmse("tracking", &report);
    Ok(())
}

pub struct SimulateArgs {
    pub params: Option<PathBuf>,
    pub baseline: Option<PathBuf>,
    pub fit_baseline: bool,
    pub subject: Option<PathBuf>,
}

pub fn simulate(cfg: &Config, args: SimulateArgs, out: &Path) -> anyhow::Result<()> {
    let subject = Subject::new(pair_from(cfg, args.subject.as_deref())?, cfg.pipeline, &cfg.subject)?;
    let pair = match &args.params {
        Some(p) => pair_from(cfg, Some(p))?,
        None => subject.body.pair.clone(),
    };
    let baseline = match (&args.baseline, args.fit_baseline) {
        (Some(path), _) => Some(read_json::<RegressorModel>(path)?),
        (None, true) => {
            log::info!("fitting the baseline on {} synthetic trials", cfg.dataset.trials);
            let set = subject.dataset(&cfg.dataset, cfg.batch.seed)?;
            Some(baseline::fit(&set, &cfg.baseline, &cfg.pipeline.plant)?)
        }
        (None, false) => None,
    };
    if baseline.is_none() && cfg.batch.conditions.iter().any(|c| c.system == System::Baseline) {
        bail!("baseline conditions need --baseline or --fit-baseline");
    }
    let sim = Simulation {
        models: Models {
            pair,
            pipeline: cfg.pipeline,
            baseline,
        },
        map: subject.map,
        emg: subject.emg,
    };
    let batch = run_batch(&sim, &cfg.protocol, &cfg.batch)?;
    save_batch(out, &batch)?;
    let report = batch.report()?;
    export(&report, out)?;
    print_groups(&report);
    Ok(())
}

fn export(report: &Report, dir: &Path) -> anyhow::Result<()> {
    write_rows(create(&dir.join("trials.csv"))?, report)?;
    write_groups(create(&dir.join("groups.csv"))?, report)?;
    write_comparisons(create(&dir.join("comparisons.csv"))?, report)?;
    write_mi_tr(create(&dir.join("mi_tr.csv"))?, report)?;
    Ok(())
}

fn print_groups(report: &Report) {
    println!("condition   n     SR     TR     NM     PE");
    for g in &report.groups {
        println!(
            "{:<3} {:<5} {:4} {:6.3} {:6.2} {:6.2} {:6.3}",
            g.system.label(),
            if g.field { "on" } else { "off" },
            g.n,
            g.sr,
            g.tr,
            g.nm,
            g.pe
        );
    }
    for c in &report.comparisons {
        println!(
            "{:<6} field {:<5} U = {:6.1}  p = {:.4}",
            c.metric,
            if c.field { "on" } else { "off" },
            c.u,
            c.p
        );
    }
}

pub fn metrics(batch_dir: &Path, out: &Path) -> anyhow::Result<()> {
    let batch = load_batch(batch_dir).with_context(|| format!("loading batch {}", batch_dir.display()))?;
    let mut mismatched = 0;
    for (i, r) in batch.records.iter().enumerate() {
        if r.recompute()? != r.outcome {
            log::warn!("trial {i}: recomputed metrics differ from the stored outcome");
            mismatched += 1;
        }
    }
    let report = batch.report()?;
    std::fs::create_dir_all(out)?;
    export(&report, out)?;
    print_groups(&report);
    if mismatched > 0 {
        bail!("{mismatched} stored outcomes do not match their telemetry");
    }
    Ok(())
}

pub fn serve(
    mut cfg: Config,
    params: Option<PathBuf>,
    baseline: Option<PathBuf>,
    port: Option<u16>,
) -> anyhow::Result<()> {
    if let Some(port) = port {
        cfg.service.port = port;
    }
    let models = Models {
        pair: pair_from(&cfg, params.as_deref())?,
        pipeline: cfg.pipeline,
        baseline: baseline.as_deref().map(read_json::<RegressorModel>).transpose()?,
    };
    let service = Service::new(models, cfg.protocol.clone(), cfg.service.clone())?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(service.run())?;
    Ok(())
}
