//! Synthetic user for headless trials. The user plans a minimum-jerk reach,
//! corrects it with a PD law on delayed visual error, and raises common
//! co-contraction when the cursor stalls short of the target.
//!
//! The user's "body" is the muscle pair at the generating parameters: a
//! static table maps (extensor, flexor) activation to the joint angle that
//! pair settles at, and its inverse turns a desired angle and co-contraction
//! level into activations.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intent::{IntentPipeline, MusclePair, PipelineConfig};
use crate::sigproc::{normalize, ARMBAND_MIX, FEATURE_FLOOR, MTU_CHANNELS};

/// Noise-free features of the eight electrodes for muscle activations
/// `(extensor, flexor)`: the armband mix scaled by the conditioner's envelope
/// gain and divided by the calibration maxima.
pub fn clean_features(act: [f64; 2], norm_max: &[f64], gain: f64) -> Vec<f64> {
    ARMBAND_MIX
        .iter()
        .zip(norm_max)
        .map(|(w, &m)| normalize(gain * (w[0] * act[0] + w[1] * act[1]).min(1.0), m))
        .collect()
}

/// The two MTU inputs picked out of an eight-channel frame.
pub fn mtu_inputs(ch: &[f64]) -> [f64; 2] {
    [ch[MTU_CHANNELS[0]], ch[MTU_CHANNELS[1]]]
}

/// The simulated subject's own muscles.
#[derive(Debug, Clone)]
pub struct Body {
    pub pair: MusclePair,
    pub pipeline: PipelineConfig,
    /// Per-electrode calibration maxima (raw units).
    pub norm_max: Vec<f64>,
    /// Mean conditioned RMS per unit of EMG amplitude.
    pub gain: f64,
}

impl Body {
    pub fn clean_features(&self, act: [f64; 2]) -> Vec<f64> {
        clean_features(act, &self.norm_max, self.gain)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BodyMapConfig {
    /// Activation grid shared by both axes, increasing from 0 to 1.
    pub levels: Vec<f64>,
    /// Settling time per grid point (s).
    pub settle: f64,
}

impl Default for BodyMapConfig {
    fn default() -> Self {
        let mut levels = vec![0.0, 0.025, 0.05, 0.1];
        levels.extend((3..=20).map(|i| i as f64 * 0.05));
        BodyMapConfig {
            levels,
            settle: 1.5,
        }
    }
}

/// Static angle reached for each (extensor, flexor) activation pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyMap {
    levels: Vec<f64>,
    /// Row-major, extensor index first.
    q: Vec<f64>,
}

impl BodyMap {
    pub fn build(body: &Body, cfg: &BodyMapConfig) -> Result<Self> {
        let levels = cfg.levels.clone();
        if levels.len() < 2
            || levels[0] != 0.0
            || *levels.last().unwrap() != 1.0
            || levels.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::Spec(
                "body-map levels must rise strictly from 0 to 1".into(),
            ));
        }
        let n = levels.len();
        let steps = (cfg.settle / body.pipeline.dt).round().max(1.0) as usize;
        let tail = (steps / 8).max(1);
        let mut q = Vec::with_capacity(n * n);
        for &e in &levels {
            for &f in &levels {
                let feat = mtu_inputs(&body.clean_features([e, f]));
                let mut p = IntentPipeline::init_rest(body.pair.clone(), body.pipeline)?;
                let mut acc = 0.0;
                for i in 0..steps {
                    let fr = p.tick(feat)?;
                    if i >= steps - tail {
                        acc += fr.s_r.q;
                    }
                }
                q.push(acc / tail as f64);
            }
        }
        Ok(BodyMap { levels, q })
    }

    fn cell(&self, a: f64) -> (usize, f64) {
        let a = a.clamp(0.0, 1.0);
        let i = self
            .levels
            .partition_point(|&l| l <= a)
            .clamp(1, self.levels.len() - 1)
            - 1;
        let w = (a - self.levels[i]) / (self.levels[i + 1] - self.levels[i]);
        (i, w)
    }

    /// Bilinear interpolation of the settled angle.
    pub fn angle(&self, ext: f64, flex: f64) -> f64 {
        let n = self.levels.len();
        let (i, u) = self.cell(ext);
        let (j, v) = self.cell(flex);
        let at = |a: usize, b: usize| self.q[a * n + b];
        (1.0 - u) * ((1.0 - v) * at(i, j) + v * at(i, j + 1))
            + u * ((1.0 - v) * at(i + 1, j) + v * at(i + 1, j + 1))
    }

    /// Largest flexion and extension reachable with the antagonist at `co`.
    pub fn reach(&self, co: f64) -> (f64, f64) {
        (self.angle(1.0, co), self.angle(co, 1.0))
    }

    /// Activations `(extensor, flexor)` that hold `q` with the antagonist at
    /// `co`; saturates at the edge of the reachable range.
    pub fn activations(&self, q: f64, co: f64) -> [f64; 2] {
        let co = co.clamp(0.0, 1.0);
        let q0 = self.angle(co, co);
        let flexing = q >= q0;
        let at = |a: f64| {
            if flexing {
                self.angle(co, a)
            } else {
                self.angle(a, co)
            }
        };
        let beyond = |v: f64| if flexing { v >= q } else { v <= q };
        let agonist = if !beyond(at(1.0)) {
            1.0
        } else {
            let (mut lo, mut hi) = (co, 1.0);
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                if beyond(at(mid)) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        };
        if flexing {
            [co, agonist]
        } else {
            [agonist, co]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RampConfig {
    pub enabled: bool,
    /// Distance to target above which a stall counts (rad).
    pub error_threshold: f64,
    /// Speed below which the cursor counts as stalled (rad/s).
    pub stall_speed: f64,
    /// Stall duration that triggers the ramp (s).
    pub persist: f64,
    /// Co-contraction rise rate (1/s).
    pub rate: f64,
    pub max: f64,
}

impl Default for RampConfig {
    fn default() -> Self {
        RampConfig {
            enabled: true,
            error_threshold: 0.1,
            stall_speed: 0.1,
            persist: 0.5,
            rate: 0.3,
            max: 0.6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UserConfig {
    /// Update rate (Hz).
    pub rate: f64,
    /// Visual reaction delay (s).
    pub reaction_delay: f64,
    /// Duration of the planned reach (s).
    pub movement_time: f64,
    /// Proportional gain on delayed visual error (rad/rad).
    pub gain_p: f64,
    /// Derivative gain on delayed visual error (rad per rad/s).
    pub gain_d: f64,
    /// Integral gain on delayed visual error (1/s); zero gives a pure PD user.
    pub gain_i: f64,
    /// Bound on the integral correction (rad).
    pub integral_limit: f64,
    /// First-order lag between intended and produced command (s).
    pub command_lag: f64,
    /// Resting co-contraction level.
    pub co_base: f64,
    pub ramp: RampConfig,
    /// Relative standard deviation of multiplicative motor noise.
    pub motor_noise: f64,
    /// Correlation time of the motor noise (s).
    pub noise_tau: f64,
}

impl Default for UserConfig {
    fn default() -> Self {
        UserConfig {
            rate: 200.0,
            reaction_delay: 0.15,
            movement_time: 0.8,
            gain_p: 0.5,
            gain_d: 0.05,
            gain_i: 0.0,
            integral_limit: 0.5,
            command_lag: 0.1,
            co_base: 0.02,
            ramp: RampConfig::default(),
            motor_noise: 0.05,
            noise_tau: 0.1,
        }
    }
}

impl UserConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rate > 0.0
            && self.reaction_delay >= 0.0
            && self.movement_time > 0.0
            && self.command_lag >= 0.0
            && self.gain_i >= 0.0
            && self.integral_limit >= 0.0
            && (0.0..=1.0).contains(&self.co_base)
            && (0.0..=1.0).contains(&self.ramp.max)
            && self.motor_noise >= 0.0
            && self.noise_tau > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Spec(format!(
                "invalid synthetic user settings: {self:?}"
            )))
        }
    }
}

/// Minimum-jerk position profile on `[0, 1]`.
pub fn min_jerk(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

fn min_jerk_rate(s: f64) -> f64 {
    if !(0.0..=1.0).contains(&s) {
        return 0.0;
    }
    30.0 * s * s * (1.0 - s) * (1.0 - s)
}

/// What the user sees on screen.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Observation {
    pub q_f: f64,
    pub qd_f: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticUser {
    cfg: UserConfig,
    start: f64,
    target: f64,
    dt: f64,
    t: f64,
    seen: VecDeque<Observation>,
    delay_steps: usize,
    cmd: f64,
    integral: f64,
    co: f64,
    stalled_for: f64,
    ramping: bool,
    noise: [f64; 2],
    rng: ChaCha8Rng,
}

impl SyntheticUser {
    pub fn new(cfg: UserConfig, start: f64, target: f64, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let dt = 1.0 / cfg.rate;
        Ok(SyntheticUser {
            cfg,
            start,
            target,
            dt,
            t: 0.0,
            seen: VecDeque::new(),
            delay_steps: (cfg.reaction_delay / dt).round() as usize,
            cmd: start,
            integral: 0.0,
            co: cfg.co_base,
            stalled_for: 0.0,
            ramping: false,
            noise: [0.0; 2],
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn period(&self) -> f64 {
        self.dt
    }

    pub fn co_contraction(&self) -> f64 {
        self.co
    }

    pub fn is_ramping(&self) -> bool {
        self.ramping
    }

    fn plan(&self, t: f64) -> (f64, f64) {
        let s = (t - self.cfg.reaction_delay) / self.cfg.movement_time;
        let d = self.target - self.start;
        (
            self.start + d * min_jerk(s),
            d * min_jerk_rate(s) / self.cfg.movement_time,
        )
    }

    /// One update: takes the current screen state and returns muscle
    /// activations `(extensor, flexor)`.
    pub fn step(&mut self, now: Observation, map: &BodyMap) -> [f64; 2] {
        let cfg = self.cfg;
        self.seen.push_back(now);
        while self.seen.len() > self.delay_steps + 1 {
            self.seen.pop_front();
        }
        // Until the delay line fills, the user sees the start posture.
        let obs = if self.seen.len() > self.delay_steps {
            self.seen[0]
        } else {
            Observation {
                q_f: self.start,
                qd_f: 0.0,
            }
        };
        let (plan_now, _) = self.plan(self.t);
        let (plan_seen, plan_rate_seen) = self.plan(self.t - cfg.reaction_delay);
        let err = plan_seen - obs.q_f;
        let err_rate = plan_rate_seen - obs.qd_f;
        if self.t >= cfg.reaction_delay {
            self.integral = (self.integral + cfg.gain_i * err * self.dt)
                .clamp(-cfg.integral_limit, cfg.integral_limit);
        }
        let desired = plan_now + cfg.gain_p * err + cfg.gain_d * err_rate + self.integral;
        let alpha = if cfg.command_lag > 0.0 {
            (self.dt / cfg.command_lag).min(1.0)
        } else {
            1.0
        };
        self.cmd += alpha * (desired - self.cmd);

        let settled = self.t >= cfg.reaction_delay + cfg.movement_time;
        if cfg.ramp.enabled && !self.ramping && settled {
            let stalled = (self.target - obs.q_f).abs() > cfg.ramp.error_threshold
                && obs.qd_f.abs() < cfg.ramp.stall_speed;
            self.stalled_for = if stalled {
                self.stalled_for + self.dt
            } else {
                0.0
            };
            if self.stalled_for >= cfg.ramp.persist {
                self.ramping = true;
            }
        }
        if self.ramping {
            self.co = (self.co + cfg.ramp.rate * self.dt).min(cfg.ramp.max.max(cfg.co_base));
        }

        let base = map.activations(self.cmd, self.co);
        let decay = (-self.dt / cfg.noise_tau).exp();
        let drive = cfg.motor_noise * (1.0 - decay * decay).sqrt();
        let mut out = [0.0; 2];
        for i in 0..2 {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            self.noise[i] = decay * self.noise[i] + drive * z;
            out[i] = (base[i] * (1.0 + self.noise[i])).clamp(FEATURE_FLOOR, 1.0);
        }
        self.t += self.dt;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn body() -> Body {
        Body {
            pair: MusclePair::reference(),
            pipeline: PipelineConfig::default(),
            norm_max: vec![1.0; 8],
            gain: 1.0,
        }
    }

    fn small_map() -> BodyMap {
        BodyMap::build(
            &body(),
            &BodyMapConfig {
                levels: vec![0.0, 0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0],
                settle: 1.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn min_jerk_endpoints() {
        assert_eq!(min_jerk(0.0), 0.0);
        assert_eq!(min_jerk(1.0), 1.0);
        assert!((min_jerk(0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn body_map_is_monotone_in_the_agonist() {
        let m = small_map();
        let mut last = f64::NEG_INFINITY;
        for i in 0..=20 {
            let q = m.angle(0.05, i as f64 / 20.0);
            assert!(q >= last - 1e-9, "{q} after {last}");
            last = q;
        }
        let (ext, flex) = m.reach(0.05);
        assert!(ext < -0.5 && flex > 0.5, "{ext} {flex}");
    }

    #[test]
    fn inverse_reproduces_the_angle() {
        let m = small_map();
        for &q in &[-0.6, -0.35, 0.0, 0.2, 0.35, 0.6] {
            let a = m.activations(q, 0.1);
            assert!((m.angle(a[0], a[1]) - q).abs() < 1e-6, "q {q}: {a:?}");
            assert!(a[0].min(a[1]) >= 0.1 - 1e-12);
        }
        let far = m.activations(5.0, 0.0);
        assert_eq!(far[1], 1.0);
    }

    #[test]
    fn user_is_deterministic_and_bounded() {
        let m = small_map();
        let run = |seed| {
            let mut u = SyntheticUser::new(UserConfig::default(), 0.0, 0.35, seed).unwrap();
            (0..400)
                .map(|i| {
                    u.step(
                        Observation {
                            q_f: 0.35 * (i as f64 / 200.0).min(1.0),
                            qd_f: 0.0,
                        },
                        &m,
                    )
                })
                .collect::<Vec<_>>()
        };
        let a = run(3);
        assert_eq!(a, run(3));
        assert!(a.iter().flatten().all(|&x| x > 0.0 && x <= 1.0));
    }

    #[test]
    fn stall_triggers_the_ramp() {
        let m = small_map();
        let mut u = SyntheticUser::new(UserConfig::default(), 0.0, 0.35, 1).unwrap();
        for _ in 0..600 {
            u.step(
                Observation {
                    q_f: 0.1,
                    qd_f: 0.0,
                },
                &m,
            );
        }
        assert!(u.is_ramping());
        assert!(u.co_contraction() > UserConfig::default().co_base);

        let cfg = UserConfig {
            ramp: RampConfig {
                enabled: false,
                ..Default::default()
            },
            ..Default::default()
        };
        let mut u = SyntheticUser::new(cfg, 0.0, 0.35, 1).unwrap();
        for _ in 0..600 {
            u.step(
                Observation {
                    q_f: 0.1,
                    qd_f: 0.0,
                },
                &m,
            );
        }
        assert!(!u.is_ramping());
        assert_eq!(u.co_contraction(), cfg.co_base);
    }
}
