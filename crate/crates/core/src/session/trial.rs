//! One reach: the tick-by-tick engine, its record, and the sources that feed
//! it features.

use serde::{Deserialize, Serialize};

use super::user::{BodyMap, Observation, SyntheticUser};
use super::{Condition, Features, Models, Protocol, System};
use crate::baseline::BaselineLoop;
use crate::error::{Error, Result};
use crate::intent::FrameworkLoop;
use crate::metrics::{self, HoldEvent, HoldTracker, MetricOptions, Task, TrialOutcome};
use crate::plant::{baseline_damping, field_torque, ForceField, PlantState, K_B};
use crate::sigproc::{mix_armband, Conditioner, EmgConfig, EmgSynth, FeatureFrame};
use crate::telemetry::TelemetryRow;

const T_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    TrialStarted,
    TargetEntered,
    TargetExited,
    Success,
    Failure,
    Aborted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialEvent {
    pub t: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Running,
    Succeeded,
    Failed,
    Aborted,
}

#[derive(Debug, Clone)]
enum Controller {
    Framework(Box<FrameworkLoop>),
    Baseline(BaselineLoop),
}

/// Steps one trial at the physics rate. Features are latest-wins: whatever
/// was last set is held until replaced.
#[derive(Debug, Clone)]
pub struct TrialEngine {
    protocol: Protocol,
    condition: Condition,
    task: Task,
    field: Option<ForceField>,
    controller: Controller,
    hold: HoldTracker,
    features: Features,
    telemetry: Vec<TelemetryRow>,
    events: Vec<TrialEvent>,
    status: TrialStatus,
    dt: f64,
}

impl TrialEngine {
    /// Starts a trial at rest; the first telemetry row is the state at `t = 0`.
    pub fn new(
        models: &Models,
        protocol: &Protocol,
        condition: Condition,
        target: f64,
        initial: Features,
    ) -> Result<Self> {
        let dt = models.pipeline.dt;
        let (controller, row) = match condition.system {
            System::Framework => {
                let lp = FrameworkLoop::init_rest(models.pair.clone(), models.pipeline)?;
                let row = TelemetryRow::from_loop(&lp.snapshot()?, initial.mtu);
                (Controller::Framework(Box::new(lp)), row)
            }
            System::Baseline => {
                let model = models.baseline.clone().ok_or_else(|| {
                    Error::Spec("baseline condition needs a trained regressor".into())
                })?;
                check_width(model.inputs, &initial)?;
                let q_r = model.predict(&initial.all);
                let bl = BaselineLoop::new(model, models.pipeline.plant, dt);
                let row = TelemetryRow::from_baseline(
                    &bl.plant,
                    q_r,
                    K_B,
                    baseline_damping(K_B),
                    initial.mtu,
                );
                (Controller::Baseline(bl), row)
            }
        };
        let task = protocol.task_for(target);
        let mut engine = TrialEngine {
            protocol: protocol.clone(),
            condition,
            task,
            field: condition.field.then(|| protocol.field_for(target)),
            controller,
            hold: HoldTracker::new(task),
            features: initial,
            telemetry: Vec::with_capacity((protocol.timeout.max(0.0) / dt) as usize + 2),
            events: vec![TrialEvent {
                t: 0.0,
                kind: EventKind::TrialStarted,
            }],
            status: TrialStatus::Running,
            dt,
        };
        engine.record(row);
        Ok(engine)
    }

    pub fn status(&self) -> TrialStatus {
        self.status
    }

    pub fn is_running(&self) -> bool {
        self.status == TrialStatus::Running
    }

    pub fn time(&self) -> f64 {
        self.telemetry.last().map_or(0.0, |r| r.t)
    }

    pub fn task(&self) -> &Task {
        &self.task
    }

    pub fn condition(&self) -> Condition {
        self.condition
    }

    pub fn events(&self) -> &[TrialEvent] {
        &self.events
    }

    pub fn telemetry(&self) -> &[TelemetryRow] {
        &self.telemetry
    }

    pub fn last_row(&self) -> &TelemetryRow {
        self.telemetry
            .last()
            .expect("the t = 0 row is always present")
    }

    /// What the subject sees: the plant position and velocity.
    pub fn observation(&self) -> Observation {
        let r = self.last_row();
        Observation {
            q_f: r.q_f,
            qd_f: r.qd_f,
        }
    }

    /// Fraction of the hold completed so far, in `[0, 1]`.
    pub fn hold_progress(&self) -> f64 {
        if self.status == TrialStatus::Succeeded {
            1.0
        } else {
            self.hold.progress(self.time())
        }
    }

    pub fn set_features(&mut self, f: Features) -> Result<()> {
        if let Controller::Baseline(bl) = &self.controller {
            check_width(bl.model.inputs, &f)?;
        }
        self.features = f;
        Ok(())
    }

    /// Advances one physics step and returns the events it raised.
    pub fn step(&mut self) -> Result<&[TrialEvent]> {
        let before = self.events.len();
        if !self.is_running() {
            return Ok(&self.events[before..]);
        }
        let field = self.field;
        let ext = move |p: &PlantState| field.map_or(0.0, |ff| field_torque(p.q_f, &ff));
        let mtu = self.features.mtu;
        let row = match &mut self.controller {
            Controller::Framework(lp) => {
                lp.tick(mtu, ext).map(|f| TelemetryRow::from_loop(&f, mtu))
            }
            Controller::Baseline(bl) => {
                let tau_ext = ext(&bl.plant);
                bl.tick(&self.features.all, tau_ext).map(|q_r| {
                    TelemetryRow::from_baseline(&bl.plant, q_r, K_B, baseline_damping(K_B), mtu)
                })
            }
        };
        match row {
            Ok(row) => self.record(row),
            Err(e) => {
                self.abort();
                return Err(e);
            }
        }
        Ok(&self.events[before..])
    }

    fn record(&mut self, row: TelemetryRow) {
        let t = row.t;
        let was_inside = self.hold.is_inside();
        self.telemetry.push(row);
        match self.hold.update(t, row.q_f) {
            Some(HoldEvent::Entered) => self.push(t, EventKind::TargetEntered),
            Some(HoldEvent::Exited) => self.push(t, EventKind::TargetExited),
            Some(HoldEvent::Completed) => {
                if !was_inside {
                    self.push(t, EventKind::TargetEntered);
                }
                self.push(t, EventKind::Success);
                self.status = TrialStatus::Succeeded;
                return;
            }
            None => {}
        }
        if t >= self.task.timeout - T_EPS {
            self.push(t, EventKind::Failure);
            self.status = TrialStatus::Failed;
        }
    }

    fn push(&mut self, t: f64, kind: EventKind) {
        self.events.push(TrialEvent { t, kind });
    }

    /// Ends a running trial as aborted; its record is flagged invalid.
    pub fn abort(&mut self) {
        if self.is_running() {
            let t = self.time();
            self.push(t, EventKind::Aborted);
            self.status = TrialStatus::Aborted;
        }
    }

    /// Closes the trial and scores it. A trial still running is aborted.
    pub fn finish(mut self, seed: u64, metrics: MetricOptions) -> Result<TrialRecord> {
        self.abort();
        let outcome = metrics::evaluate(&self.telemetry, &self.task, self.dt, &metrics)?;
        Ok(TrialRecord {
            protocol: self.protocol,
            condition: self.condition,
            target: self.task.target,
            seed,
            dt: self.dt,
            metrics,
            valid: self.status != TrialStatus::Aborted,
            telemetry: self.telemetry,
            events: self.events,
            outcome,
        })
    }
}

fn check_width(inputs: usize, f: &Features) -> Result<()> {
    if f.all.len() != inputs {
        return Err(Error::Spec(format!(
            "regressor expects {inputs} channels, got {}",
            f.all.len()
        )));
    }
    Ok(())
}

/// Everything needed to recompute a trial's outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub protocol: Protocol,
    pub condition: Condition,
    pub target: f64,
    pub seed: u64,
    /// Physics step (s).
    pub dt: f64,
    pub metrics: MetricOptions,
    /// False when the trial was aborted.
    pub valid: bool,
    pub telemetry: Vec<TelemetryRow>,
    pub events: Vec<TrialEvent>,
    pub outcome: TrialOutcome,
}

impl TrialRecord {
    pub fn task(&self) -> Task {
        self.protocol.task_for(self.target)
    }

    /// Scores the stored telemetry again.
    pub fn recompute(&self) -> Result<TrialOutcome> {
        metrics::evaluate(&self.telemetry, &self.task(), self.dt, &self.metrics)
    }
}

/// Supplies features to a running trial.
pub trait FeatureSource {
    /// Features that became available up to time `t`, newest only, given
    /// what is currently on screen. Errors with [`Error::Underrun`] when the
    /// input has run dry.
    fn poll(&mut self, t: f64, screen: Observation) -> Result<Option<Features>>;
}

/// Runs `engine` to completion on `source`. An underrun aborts the trial.
pub fn run_trial(engine: &mut TrialEngine, source: &mut dyn FeatureSource) -> Result<()> {
    while engine.is_running() {
        match source.poll(engine.time(), engine.observation()) {
            Ok(Some(f)) => engine.set_features(f)?,
            Ok(None) => {}
            Err(Error::Underrun { .. }) => {
                engine.abort();
                break;
            }
            Err(e) => return Err(e),
        }
        engine.step()?;
    }
    Ok(())
}

/// Synthetic user → muscle activations → armband EMG → conditioner.
#[derive(Debug, Clone)]
pub struct SyntheticSource<'a> {
    user: SyntheticUser,
    map: &'a BodyMap,
    synth: EmgSynth,
    conditioner: Conditioner,
    period: f64,
    n: u64,
    sample: Vec<f64>,
    latest: Option<Features>,
}

impl<'a> SyntheticSource<'a> {
    /// `emg` must carry calibration maxima.
    pub fn new(user: SyntheticUser, map: &'a BodyMap, emg: &EmgConfig, seed: u64) -> Result<Self> {
        if emg.norm_max.len() != 8 {
            return Err(Error::Spec(
                "synthetic EMG needs eight calibrated channels".into(),
            ));
        }
        Ok(SyntheticSource {
            user,
            map,
            synth: EmgSynth::new(8, emg, seed)?,
            conditioner: Conditioner::new(emg, 8)?,
            period: 1.0 / emg.sample_rate,
            n: 0,
            sample: Vec::with_capacity(8),
            latest: None,
        })
    }

    pub fn user(&self) -> &SyntheticUser {
        &self.user
    }

    fn emit(&mut self, t: f64, act: [f64; 2]) -> Result<()> {
        let amp: Vec<f64> = mix_armband(&[act[0]], &[act[1]])
            .into_iter()
            .map(|c| c[0])
            .collect();
        self.synth.next_sample(&amp, &mut self.sample);
        if let Some(frame) = self.conditioner.push(t, &self.sample) {
            self.latest = Some(Features::from_frame(&frame.ch)?);
        }
        Ok(())
    }

    /// Holds the resting posture `(q, co)` before the trial until a first
    /// feature frame is out, and returns it.
    pub fn prime(&mut self, q: f64, co: f64, duration: f64) -> Result<Features> {
        let act = self.map.activations(q, co);
        let n = ((duration / self.period).ceil() as usize).max(1);
        for i in 0..n {
            self.emit(-((n - i) as f64) * self.period, act)?;
        }
        self.latest
            .take()
            .ok_or_else(|| Error::Spec(format!("no feature frame within {duration} s of priming")))
    }
}

impl FeatureSource for SyntheticSource<'_> {
    fn poll(&mut self, t: f64, screen: Observation) -> Result<Option<Features>> {
        while (self.n as f64) * self.period <= t + T_EPS {
            let ts = self.n as f64 * self.period;
            let act = self.user.step(screen, self.map);
            self.emit(ts, act)?;
            self.n += 1;
        }
        Ok(self.latest.take())
    }
}

/// Replays recorded eight-channel feature frames (times relative to the
/// trial start).
#[derive(Debug, Clone)]
pub struct ReplaySource {
    frames: Vec<FeatureFrame>,
    next: usize,
    /// Longest tolerated silence after the last frame (s).
    pub max_gap: f64,
}

impl ReplaySource {
    pub fn new(frames: Vec<FeatureFrame>) -> Self {
        ReplaySource {
            frames,
            next: 0,
            max_gap: 0.1,
        }
    }
}

impl FeatureSource for ReplaySource {
    fn poll(&mut self, t: f64, _screen: Observation) -> Result<Option<Features>> {
        let mut latest = None;
        while self.next < self.frames.len() && self.frames[self.next].t <= t + T_EPS {
            latest = Some(&self.frames[self.next]);
            self.next += 1;
        }
        let out = latest.map(|f| Features::from_frame(&f.ch)).transpose()?;
        let last_t = self.frames.last().map_or(0.0, |f| f.t);
        if out.is_none() && self.next == self.frames.len() && t > last_t + self.max_gap {
            return Err(Error::Underrun { t });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intent::{MusclePair, PipelineConfig};

    fn models() -> Models {
        Models {
            pair: MusclePair::reference(),
            pipeline: PipelineConfig::default(),
            baseline: None,
        }
    }

    fn framework(field: bool) -> Condition {
        Condition {
            system: System::Framework,
            field,
        }
    }

    fn constant(act: [f64; 2]) -> Features {
        Features::from_activations(act, &[1.0; 8])
    }

    #[test]
    fn zero_timeout_fails_immediately() {
        let p = Protocol {
            timeout: 0.0,
            ..Default::default()
        };
        let e = TrialEngine::new(&models(), &p, framework(false), 0.35, Features::rest(8)).unwrap();
        assert_eq!(e.status(), TrialStatus::Failed);
        let r = e.finish(0, MetricOptions::default()).unwrap();
        assert!(r.valid);
        assert!(!r.outcome.success);
        assert_eq!(r.outcome.tr, 0.0);
        assert_eq!(r.telemetry.len(), 1);
        let kinds: Vec<_> = r.events.iter().map(|e| e.kind).collect();
        assert_eq!(kinds, [EventKind::TrialStarted, EventKind::Failure]);
    }

    #[test]
    fn resting_trial_times_out() {
        let p = Protocol {
            timeout: 0.5,
            hold: 0.1,
            ..Default::default()
        };
        let mut e =
            TrialEngine::new(&models(), &p, framework(false), 0.35, Features::rest(8)).unwrap();
        while e.is_running() {
            e.step().unwrap();
        }
        assert_eq!(e.status(), TrialStatus::Failed);
        assert_eq!(e.telemetry().len(), 501);
        let r = e.finish(0, MetricOptions::default()).unwrap();
        assert_eq!(r.outcome.tr, 0.5);
        assert_eq!(r.recompute().unwrap(), r.outcome);
    }

    #[test]
    fn events_follow_the_band() {
        let p = Protocol {
            hold: 0.3,
            ..Default::default()
        };
        let mut e = TrialEngine::new(
            &models(),
            &p,
            framework(false),
            0.35,
            constant([0.02, 0.02]),
        )
        .unwrap();
        e.set_features(constant([0.02, 0.35])).unwrap();
        while e.is_running() {
            e.step().unwrap();
        }
        assert_eq!(e.status(), TrialStatus::Succeeded);
        let r = e.finish(1, MetricOptions::default()).unwrap();
        assert!(r.outcome.success);
        let band = p.band();
        for ev in &r.events {
            let q = r.telemetry.iter().find(|row| row.t == ev.t).unwrap().q_f;
            match ev.kind {
                EventKind::TargetEntered => assert!((q - 0.35).abs() <= band),
                EventKind::TargetExited => assert!((q - 0.35).abs() > band),
                _ => {}
            }
        }
        assert_eq!(r.recompute().unwrap(), r.outcome);
    }

    #[test]
    fn baseline_without_model_is_rejected() {
        let c = Condition {
            system: System::Baseline,
            field: false,
        };
        assert!(
            TrialEngine::new(&models(), &Protocol::default(), c, 0.35, Features::rest(8)).is_err()
        );
    }

    #[test]
    fn replay_underrun_aborts() {
        let frames: Vec<FeatureFrame> = (0..10)
            .map(|i| FeatureFrame {
                t: 0.04 * i as f64,
                ch: vec![0.05; 8],
            })
            .collect();
        let mut src = ReplaySource::new(frames);
        let mut e = TrialEngine::new(
            &models(),
            &Protocol::default(),
            framework(true),
            0.7,
            Features::rest(8),
        )
        .unwrap();
        run_trial(&mut e, &mut src).unwrap();
        assert_eq!(e.status(), TrialStatus::Aborted);
        let r = e.finish(0, MetricOptions::default()).unwrap();
        assert!(!r.valid);
        assert_eq!(r.events.last().unwrap().kind, EventKind::Aborted);
        assert!(r.telemetry.last().unwrap().t < 0.6);
    }
}
