//! Reaching-task orchestration: the trial protocol, the per-tick trial
//! engine shared by headless runs and the live service, a synthetic user
//! that stands in for a subject, batch runs with their report, and on-disk
//! trial records.

mod batch;
pub mod synthetic;
mod trial;
pub mod user;

use serde::{Deserialize, Serialize};

use crate::baseline::RegressorModel;
use crate::error::{Error, Result};
use crate::intent::{MusclePair, PipelineConfig};
use crate::metrics::Task;
use crate::plant::{ForceField, FIELD_MAGNITUDE, FIELD_WIDTH};
use crate::sigproc::{FEATURE_FLOOR, MTU_CHANNELS};

pub use batch::{
    load_batch, plan_trials, run_batch, save_batch, write_comparisons, write_groups, write_mi_tr,
    write_rows, Batch, BatchSpec, Comparison, GroupSummary, Report, ReportRow, Simulation,
};
pub use trial::{
    run_trial, EventKind, FeatureSource, ReplaySource, SyntheticSource, TrialEngine, TrialEvent,
    TrialRecord, TrialStatus,
};
pub use user::{Body, BodyMap, BodyMapConfig, Observation, RampConfig, SyntheticUser, UserConfig};

/// Which controller drives the plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    /// EMG-driven intent with variable impedance.
    Framework,
    /// Regressor with the fixed-gain PD law.
    Baseline,
}

impl System {
    /// Short label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            System::Framework => "M",
            System::Baseline => "B",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Condition {
    pub system: System,
    /// Force field on.
    pub field: bool,
}

impl Condition {
    /// The four system × field cells in report order.
    pub fn all() -> Vec<Condition> {
        let mut v = Vec::with_capacity(4);
        for field in [false, true] {
            for system in [System::Framework, System::Baseline] {
                v.push(Condition { system, field });
            }
        }
        v
    }

    pub fn label(&self) -> String {
        format!(
            "{}/{}",
            self.system.label(),
            if self.field { "on" } else { "off" }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSpec {
    pub name: String,
    pub field: bool,
}

/// Task layout and timing. Trials start at rest at `q = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Protocol {
    /// Target joint positions (rad).
    pub targets: Vec<f64>,
    /// Continuous time on target required for success (s).
    pub hold: f64,
    pub timeout: f64,
    /// Display radii (dip).
    pub target_radius: f64,
    pub cursor_radius: f64,
    /// Workspace scale (rad per dip).
    pub rad_per_dip: f64,
    /// Sessions in order; only sessions flagged `field` apply the force field.
    pub sessions: Vec<SessionSpec>,
    pub trials_per_condition: usize,
    /// Rest between trials (s).
    pub inter_trial_pause: f64,
    /// Field width (rad) and magnitude (N·m).
    pub field_width: f64,
    pub field_magnitude: f64,
    /// State frames per second sent to live clients.
    pub state_rate: f64,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            targets: vec![-0.7, -0.35, 0.35, 0.7],
            hold: 3.0,
            timeout: 20.0,
            target_radius: 8.0,
            cursor_radius: 6.0,
            rad_per_dip: 0.01,
            sessions: vec![
                SessionSpec {
                    name: "unperturbed".into(),
                    field: false,
                },
                SessionSpec {
                    name: "perturbed".into(),
                    field: true,
                },
            ],
            trials_per_condition: 40,
            inter_trial_pause: 2.0,
            field_width: FIELD_WIDTH,
            field_magnitude: FIELD_MAGNITUDE,
            state_rate: 50.0,
        }
    }
}

impl Protocol {
    /// Half-width of the on-target band: the cursor circle touches the
    /// target circle.
    pub fn band(&self) -> f64 {
        (self.target_radius + self.cursor_radius) * self.rad_per_dip
    }

    /// Target diameter less cursor diameter, for the index of difficulty.
    pub fn id_width(&self) -> f64 {
        2.0 * (self.target_radius - self.cursor_radius) * self.rad_per_dip
    }

    pub fn task_for(&self, target: f64) -> Task {
        Task {
            start: 0.0,
            target,
            band: self.band(),
            id_width: self.id_width(),
            hold: self.hold,
            timeout: self.timeout,
        }
    }

    pub fn field_for(&self, target: f64) -> ForceField {
        ForceField::between(0.0, target, self.field_width, self.field_magnitude)
    }

    pub fn session(&self, name: &str) -> Option<&SessionSpec> {
        self.sessions.iter().find(|s| s.name == name)
    }

    pub fn validate(&self, q_min: f64, q_max: f64) -> Result<()> {
        if !(self.hold >= 0.0 && self.hold < self.timeout) {
            return Err(Error::Spec(format!(
                "hold ({} s) must be shorter than the timeout ({} s)",
                self.hold, self.timeout
            )));
        }
        if self.targets.is_empty() {
            return Err(Error::Spec("protocol has no targets".into()));
        }
        if let Some(t) = self.targets.iter().find(|&&t| !(t > q_min && t < q_max)) {
            return Err(Error::Spec(format!(
                "target {t} outside the joint range [{q_min}, {q_max}]"
            )));
        }
        if !(self.id_width() > 0.0 && self.rad_per_dip > 0.0) {
            return Err(Error::Spec(
                "target radius must exceed the cursor radius".into(),
            ));
        }
        if !(self.field_width >= 0.0 && self.field_magnitude >= 0.0 && self.state_rate > 0.0) {
            return Err(Error::Spec(
                "field width, magnitude and state rate must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Features for one controller tick: the two MTU inputs and the full frame
/// for the regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub mtu: [f64; 2],
    pub all: Vec<f64>,
}

impl Features {
    /// From an eight-channel conditioned frame.
    pub fn from_frame(ch: &[f64]) -> Result<Self> {
        if ch.len() <= MTU_CHANNELS[1] {
            return Err(Error::Spec(format!(
                "feature frame has {} channels; need 8",
                ch.len()
            )));
        }
        Ok(Features {
            mtu: user::mtu_inputs(ch),
            all: ch.to_vec(),
        })
    }

    /// From a pair of muscle activations `(extensor, flexor)`, spread over the
    /// electrodes with the armband mix and normalized by `norm_max`.
    pub fn from_activations(act: [f64; 2], norm_max: &[f64]) -> Self {
        let act = act.map(|a| {
            if a.is_finite() {
                a.clamp(FEATURE_FLOOR, 1.0)
            } else {
                FEATURE_FLOOR
            }
        });
        let all = user::clean_features(act, norm_max, 1.0);
        Features {
            mtu: user::mtu_inputs(&all),
            all,
        }
    }

    /// Every channel at the feature floor.
    pub fn rest(channels: usize) -> Self {
        Features {
            mtu: [FEATURE_FLOOR; 2],
            all: vec![FEATURE_FLOOR; channels],
        }
    }
}

/// Trained models for both systems.
#[derive(Debug, Clone)]
pub struct Models {
    pub pair: MusclePair,
    pub pipeline: PipelineConfig,
    pub baseline: Option<RegressorModel>,
}

/// Mixes a stream index into a seed (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        ^ stream
            .wrapping_add(0x9E37_79B9_7F4A_7C15)
            .wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
