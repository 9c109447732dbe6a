//! One client's session: selected condition, trial sequencing and the
//! physics clock. Nothing here touches the network; the server feeds client
//! messages in and drains frames and finished records out.

use std::sync::Arc;

use myoimp::metrics::MetricOptions;
use myoimp::plant::PlantState;
use myoimp::session::{
    derive_seed, plan_trials, Condition, EventKind, Features, Models, Protocol, System, TrialEngine, TrialRecord,
};
use myoimp::sigproc::ARMBAND_MIX;
use myoimp::telemetry::TelemetryRow;

use crate::error::{Result, ServiceError};
use crate::wire::{ClientMessage, Command, EventFrame, ServerMessage, StateFrame};

const T_EPS: f64 = 1e-9;

/// Per-session settings taken from the service config.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionSettings {
    /// Physics advances to activation timestamps instead of being driven by
    /// [`Session::advance_to`] from outside.
    pub client_clock: bool,
    pub underrun_timeout: f64,
    pub max_advance: f64,
    pub norm_max: Vec<f64>,
    pub metrics: MetricOptions,
}

impl Default for SessionSettings {
    fn default() -> Self {
        SessionSettings {
            client_clock: false,
            underrun_timeout: 0.5,
            max_advance: 5.0,
            norm_max: Vec::new(),
            metrics: MetricOptions::default(),
        }
    }
}

struct Running {
    engine: TrialEngine,
    /// Session tick at which the trial started.
    start: u64,
    seed: u64,
    forwarded: usize,
}

pub struct Session {
    models: Arc<Models>,
    protocol: Protocol,
    settings: SessionSettings,
    seed: u64,
    condition: Condition,
    dt: f64,
    ticks: u64,
    /// Ticks between state frames; zero disables them.
    state_every: u64,
    features: Features,
    /// Session tick of the latest activation frame.
    input_tick: Option<u64>,
    last_input_t: Option<f64>,
    trial: Option<Running>,
    planned: u64,
    last_row: TelemetryRow,
    out: Vec<ServerMessage>,
    finished: Vec<TrialRecord>,
}

impl Session {
    pub fn new(models: Arc<Models>, protocol: Protocol, mut settings: SessionSettings, seed: u64) -> Result<Self> {
        let plant = &models.pipeline.plant;
        protocol.validate(plant.q_min, plant.q_max)?;
        if settings.norm_max.is_empty() {
            settings.norm_max = vec![1.0; ARMBAND_MIX.len()];
        }
        let dt = models.pipeline.dt;
        let state_every = if protocol.state_rate > 0.0 {
            ((1.0 / (protocol.state_rate * dt)).round() as u64).max(1)
        } else {
            0
        };
        let features = Features::from_activations([0.0, 0.0], &settings.norm_max);
        let last_row = rest_row(&features);
        Ok(Session {
            models,
            protocol,
            settings,
            seed,
            condition: Condition {
                system: System::Framework,
                field: false,
            },
            dt,
            ticks: 0,
            state_every,
            features,
            input_tick: None,
            last_input_t: None,
            trial: None,
            planned: 0,
            last_row,
            out: Vec::new(),
            finished: Vec::new(),
        })
    }

    pub fn time(&self) -> f64 {
        self.ticks as f64 * self.dt
    }

    pub fn condition(&self) -> Condition {
        self.condition
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn protocol(&self) -> &Protocol {
        &self.protocol
    }

    pub fn trial_running(&self) -> bool {
        self.trial.is_some()
    }

    /// Applies one client message; a rejected message yields an error frame
    /// and leaves the session as it was.
    pub fn handle(&mut self, msg: ClientMessage) {
        if let Err(e) = self.apply(msg) {
            self.error(e);
        }
    }

    fn apply(&mut self, msg: ClientMessage) -> Result<()> {
        match msg {
            ClientMessage::Activation { t, ch1, ch2 } => self.activation(t, [ch1, ch2]),
            ClientMessage::Cmd { cmd } => match cmd {
                Command::StartTrial { target, seed } => self.start_trial(target, seed),
                Command::Abort => {
                    if self.trial.is_none() {
                        return Err(ServiceError::Rejected("no trial is running".into()));
                    }
                    self.abort_trial();
                    Ok(())
                }
                Command::SelectCondition { system, field } => {
                    if self.trial.is_some() {
                        return Err(ServiceError::Rejected("cannot change condition during a trial".into()));
                    }
                    if system == System::Baseline && self.models.baseline.is_none() {
                        return Err(ServiceError::Rejected("no baseline model is loaded".into()));
                    }
                    self.condition = Condition { system, field };
                    Ok(())
                }
            },
        }
    }

    fn activation(&mut self, t: f64, act: [f64; 2]) -> Result<()> {
        if let Some(prev) = self.last_input_t {
            if t < prev {
                return Err(ServiceError::Malformed(format!("activation time {t} precedes {prev}")));
            }
        }
        if self.settings.client_clock {
            if t - self.time() > self.settings.max_advance {
                return Err(ServiceError::Rejected(format!(
                    "activation at t = {t} jumps more than {} s ahead",
                    self.settings.max_advance
                )));
            }
            self.advance_to(t);
        }
        self.last_input_t = Some(t);
        self.input_tick = Some(self.ticks);
        self.features = Features::from_activations(act, &self.settings.norm_max);
        if let Some(run) = &mut self.trial {
            run.engine.set_features(self.features.clone())?;
        }
        Ok(())
    }

    fn start_trial(&mut self, target: Option<f64>, seed: Option<u64>) -> Result<()> {
        if self.trial.is_some() {
            return Err(ServiceError::Rejected("a trial is already running".into()));
        }
        let (planned_target, planned_seed) = self.next_planned();
        let target = target.unwrap_or(planned_target);
        let plant = &self.models.pipeline.plant;
        if target <= plant.q_min || target >= plant.q_max {
            return Err(ServiceError::Rejected(format!("target {target} is outside the joint range")));
        }
        let engine = TrialEngine::new(&self.models, &self.protocol, self.condition, target, self.features.clone())?;
        self.planned += 1;
        self.trial = Some(Running {
            engine,
            start: self.ticks,
            seed: seed.unwrap_or(planned_seed),
            forwarded: 0,
        });
        self.flush_trial();
        Ok(())
    }

    fn next_planned(&self) -> (f64, u64) {
        let n = self.planned as usize + 1;
        plan_trials(&self.protocol, n, self.seed)
            .pop()
            .unwrap_or((0.0, derive_seed(self.seed, self.planned)))
    }

    fn abort_trial(&mut self) {
        if let Some(run) = &mut self.trial {
            run.engine.abort();
        }
        self.flush_trial();
    }

    /// Ends the session; a running trial is recorded as aborted.
    pub fn disconnect(&mut self) {
        self.abort_trial();
    }

    /// Steps physics until session time reaches `t`.
    pub fn advance_to(&mut self, t: f64) {
        while (self.ticks + 1) as f64 * self.dt <= t + T_EPS {
            self.tick();
        }
    }

    fn tick(&mut self) {
        self.ticks += 1;
        if let Some(run) = &mut self.trial {
            let since_input = self.ticks - self.input_tick.unwrap_or(run.start).max(run.start);
            if since_input as f64 * self.dt > self.settings.underrun_timeout + T_EPS {
                run.engine.abort();
                let t = self.time();
                self.error(ServiceError::Core(myoimp::Error::Underrun { t }));
            } else if let Err(e) = run.engine.step() {
                self.error(e.into());
            }
            self.flush_trial();
        }
        if self.state_every > 0 && self.ticks % self.state_every == 0 {
            let s = self.state();
            self.out.push(ServerMessage::State(s));
        }
    }

    /// Current state as shown to the client.
    pub fn state(&self) -> StateFrame {
        let (row, target, hold) = match &self.trial {
            Some(run) => (run.engine.last_row(), Some(run.engine.task().target), run.engine.hold_progress()),
            None => (&self.last_row, None, 0.0),
        };
        StateFrame {
            t: self.time(),
            q_f: row.q_f,
            q_r: row.q_r,
            k: row.k,
            d: row.d,
            tau_f: row.tau_f,
            tau_ext: if target.is_some() { None } else { Some(row.tau_ext) },
            target,
            hold_progress: hold,
        }
    }

    /// Forwards new trial events and closes the trial once it has ended.
    fn flush_trial(&mut self) {
        let Some(run) = &mut self.trial else { return };
        let events = run.engine.events()[run.forwarded..].to_vec();
        run.forwarded += events.len();
        let start = run.start as f64 * self.dt;
        let target = run.engine.task().target;
        let condition = run.engine.condition();
        let ended = !run.engine.is_running();
        let mut outcome = None;
        if ended {
            let run = self.trial.take().expect("trial present");
            match run.engine.finish(run.seed, self.settings.metrics) {
                Ok(record) => {
                    outcome = Some(record.outcome);
                    if let Some(row) = record.telemetry.last() {
                        self.last_row = *row;
                    }
                    self.finished.push(record);
                }
                Err(e) => self.error(e.into()),
            }
        }
        let field = (ended && condition.field).then(|| self.protocol.field_for(target));
        for e in events {
            let terminal = matches!(e.kind, EventKind::Success | EventKind::Failure | EventKind::Aborted);
            self.out.push(ServerMessage::Event(EventFrame {
                event: e.kind,
                t: start + e.t,
                trial_t: e.t,
                target,
                condition,
                outcome: if terminal { outcome } else { None },
                field: if terminal { field } else { None },
            }));
        }
    }

    fn error(&mut self, e: ServiceError) {
        self.out.push(ServerMessage::Error { message: e.to_string() });
    }

    /// Frames produced since the last call.
    pub fn take_output(&mut self) -> Vec<ServerMessage> {
        std::mem::take(&mut self.out)
    }

    /// Trials finished since the last call.
    pub fn take_records(&mut self) -> Vec<TrialRecord> {
        std::mem::take(&mut self.finished)
    }
}

fn rest_row(f: &Features) -> TelemetryRow {
    TelemetryRow::from_baseline(&PlantState::default(), 0.0, 0.0, 0.0, f.mtu)
}
