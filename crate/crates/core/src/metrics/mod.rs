//! Trial evaluation: success, time to reach, throughput, path efficiency,
//! energy and near misses, plus SPARC smoothness, mutual information between
//! torque and position, and the Mann–Whitney comparison.

mod mann_whitney;
mod mi;
mod sparc;

pub use mann_whitney::{mann_whitney_u, Alternative, MannWhitney, EXACT_LIMIT};
pub use mi::{bin_count, mutual_information, MutualInformation, MIN_SAMPLES};
pub use sparc::{sparc, Sparc, SparcConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::telemetry::TelemetryRow;

/// Slack on time comparisons, well below one physics step.
const T_EPS: f64 = 1e-9;

/// Geometry and timing of one reach.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub start: f64,
    pub target: f64,
    /// Half-width of the on-target band (rad).
    pub band: f64,
    /// Target width used in the index of difficulty (rad).
    pub id_width: f64,
    pub hold: f64,
    pub timeout: f64,
}

impl Task {
    pub fn distance(&self) -> f64 {
        (self.target - self.start).abs()
    }

    /// Shannon index of difficulty `log2(D/W + 1)` (bits).
    pub fn index_of_difficulty(&self) -> f64 {
        index_of_difficulty(self.distance(), self.id_width)
    }

    pub fn on_target(&self, q: f64) -> bool {
        (q - self.target).abs() <= self.band
    }
}

pub fn index_of_difficulty(distance: f64, width: f64) -> f64 {
    (distance / width + 1.0).log2()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoldEvent {
    Entered,
    Exited,
    Completed,
}

/// Band entry/exit and hold timing. Shared by the live trial loop and the
/// offline metrics so that both see the same events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoldTracker {
    task: Task,
    entered_at: Option<f64>,
    entries: u32,
    completed_at: Option<f64>,
}

impl HoldTracker {
    pub fn new(task: Task) -> Self {
        HoldTracker {
            task,
            entered_at: None,
            entries: 0,
            completed_at: None,
        }
    }

    /// Feeds one sample; returns the event it triggers, if any. Samples after
    /// completion are ignored.
    pub fn update(&mut self, t: f64, q_f: f64) -> Option<HoldEvent> {
        if self.completed_at.is_some() {
            return None;
        }
        let inside = self.task.on_target(q_f);
        match (self.entered_at, inside) {
            (None, true) => {
                self.entered_at = Some(t);
                self.entries += 1;
                if self.task.hold <= T_EPS {
                    self.completed_at = Some(t);
                    return Some(HoldEvent::Completed);
                }
                Some(HoldEvent::Entered)
            }
            (Some(_), false) => {
                self.entered_at = None;
                Some(HoldEvent::Exited)
            }
            (Some(t0), true) if t - t0 >= self.task.hold - T_EPS => {
                self.completed_at = Some(t);
                Some(HoldEvent::Completed)
            }
            _ => None,
        }
    }

    pub fn completed_at(&self) -> Option<f64> {
        self.completed_at
    }

    pub fn is_inside(&self) -> bool {
        self.entered_at.is_some()
    }

    /// Entries into the band that did not end in a completed hold.
    pub fn near_misses(&self) -> u32 {
        self.entries - u32::from(self.completed_at.is_some())
    }

    /// Fraction of the hold completed at time `t`, in [0, 1].
    pub fn progress(&self, t: f64) -> f64 {
        if self.completed_at.is_some() {
            return 1.0;
        }
        match self.entered_at {
            Some(t0) if self.task.hold > 0.0 => ((t - t0) / self.task.hold).clamp(0.0, 1.0),
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricOptions {
    /// Integrate `|τ_f·q̇_f|` instead of the signed product.
    pub absolute_energy: bool,
    pub sparc: SparcConfig,
}

/// Outcome of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub success: bool,
    /// Time to reach (s); the timeout on failure.
    pub tr: f64,
    /// Throughput (bit/s).
    pub tp: f64,
    pub pe: f64,
    /// Energy (J).
    pub energy: f64,
    pub nm: u32,
    pub sparc: f64,
    /// Mutual information between `τ_f` and `q_f` (bits).
    pub mi: f64,
    pub sparc_degenerate: bool,
    pub mi_degenerate: bool,
}

/// Checks that samples are finite and evenly spaced at `dt`, with no gap
/// longer than one step.
pub fn check_integrity(rows: &[TelemetryRow], dt: f64) -> Result<()> {
    for (i, r) in rows.iter().enumerate() {
        if !(r.t.is_finite() && r.q_f.is_finite() && r.qd_f.is_finite() && r.tau_f.is_finite()) {
            return Err(Error::Integrity(format!("non-finite sample at row {i}")));
        }
    }
    for (i, w) in rows.windows(2).enumerate() {
        let gap = w[1].t - w[0].t;
        if gap > dt * (1.0 + 1e-6) {
            return Err(Error::Integrity(format!(
                "gap of {gap:.6} s after t = {:.6} s (row {i}) exceeds one step",
                w[0].t
            )));
        }
        if gap <= 0.0 {
            return Err(Error::Integrity(format!(
                "time not increasing at row {}",
                i + 1
            )));
        }
    }
    Ok(())
}

/// Path efficiency: the straight distance over the travelled path plus the
/// remaining distance to the target at the end.
pub fn path_efficiency(q: &[f64], task: &Task) -> f64 {
    let d = task.distance();
    if d == 0.0 {
        return 1.0;
    }
    let travelled: f64 = q.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let start_gap = q.first().map_or(0.0, |q0| (q0 - task.start).abs());
    let end_gap = q.last().map_or(d, |q1| (task.target - q1).abs());
    (d / (start_gap + travelled + end_gap)).min(1.0)
}

/// Trapezoidal `∫ τ_f·q̇_f dt`.
pub fn energy(rows: &[TelemetryRow], absolute: bool) -> f64 {
    let power = |r: &TelemetryRow| {
        let p = r.tau_f * r.qd_f;
        if absolute {
            p.abs()
        } else {
            p
        }
    };
    rows.windows(2)
        .map(|w| 0.5 * (power(&w[0]) + power(&w[1])) * (w[1].t - w[0].t))
        .sum()
}

/// Stage-1 measures plus smoothness and mutual information.
pub fn evaluate(
    rows: &[TelemetryRow],
    task: &Task,
    dt: f64,
    opts: &MetricOptions,
) -> Result<TrialOutcome> {
    check_integrity(rows, dt)?;
    let mut hold = HoldTracker::new(*task);
    let t0 = rows.first().map_or(0.0, |r| r.t);
    let mut end = rows.len();
    for (i, r) in rows.iter().enumerate() {
        if r.t - t0 > task.timeout + T_EPS {
            end = i;
            break;
        }
        if hold.update(r.t, r.q_f) == Some(HoldEvent::Completed) {
            end = i + 1;
            break;
        }
    }
    let rows = &rows[..end];
    let success = hold.completed_at().is_some();
    let tr = hold.completed_at().map_or(task.timeout, |t| t - t0);
    let id = task.index_of_difficulty();
    let tp = if tr > 0.0 { id / tr } else { 0.0 };

    let q: Vec<f64> = rows.iter().map(|r| r.q_f).collect();
    let speed: Vec<f64> = rows.iter().map(|r| r.qd_f.abs()).collect();
    let tau: Vec<f64> = rows.iter().map(|r| r.tau_f).collect();
    let s = sparc(&speed, dt, &opts.sparc);
    let mi = if rows.len() >= MIN_SAMPLES {
        mutual_information(&tau, &q)?
    } else {
        MutualInformation {
            bits: 0.0,
            degenerate: true,
        }
    };
    Ok(TrialOutcome {
        success,
        tr,
        tp,
        pe: path_efficiency(&q, task),
        energy: energy(rows, opts.absolute_energy),
        nm: hold.near_misses(),
        sparc: s.value,
        mi: mi.bits,
        sparc_degenerate: s.degenerate,
        mi_degenerate: mi.degenerate,
    })
}
