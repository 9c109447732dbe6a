//! Motor-intent estimation: two EMG-driven MTUs drive a simulated copy of the
//! robot, yielding reference kinematics together with joint stiffness and
//! damping. [`FrameworkLoop`] closes the loop through the impedance law and
//! the perturbable plant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::joint::{map_to_joint, AttachmentGeometry, GeometryConfig, JointImpedance, Side};
use crate::mtu::{
    contraction_step, init_rest, ActivationDynamics, MtuParams, MtuState, ParamVector,
    SHORT_RANGE_GAMMA,
};
use crate::plant::{impedance_law, plant_step, PlantParams, PlantState, RefKinematics};

/// Physics step (s).
pub const PHYSICS_DT: f64 = 1e-3;

/// MTU order used throughout: extensor (channel 1) then flexor (channel 2).
pub const EXTENSOR: usize = 0;
pub const FLEXOR: usize = 1;

/// Parameters and attachment geometry of the antagonist pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MusclePair {
    pub params: [MtuParams; 2],
    pub geoms: [AttachmentGeometry; 2],
}

impl MusclePair {
    /// Builds a pair from optimizer vectors; tendon slack follows the geometry.
    pub fn from_vectors(v: &[ParamVector; 2], geom: &GeometryConfig) -> Result<Self> {
        let geoms = [geom.build(Side::Extensor)?, geom.build(Side::Flexor)?];
        let params = [
            v[0].to_params(geoms[0].mtu_length(0.0)?),
            v[1].to_params(geoms[1].mtu_length(0.0)?),
        ];
        Ok(MusclePair { params, geoms })
    }

    /// Both MTUs at the reference parameter vector on the default geometry.
    pub fn reference() -> Self {
        let v = ParamVector::reference();
        Self::from_vectors(&[v, v], &GeometryConfig::default()).expect("reference pair is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub dt: f64,
    pub activation: ActivationDynamics,
    /// Plant parameters shared by the simulated model and the real plant.
    pub plant: PlantParams,
    /// Short-range fiber stiffness gain; zero leaves only the force-curve slope.
    pub short_range_gamma: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            dt: PHYSICS_DT,
            activation: ActivationDynamics::default(),
            plant: PlantParams::default(),
            short_range_gamma: SHORT_RANGE_GAMMA,
        }
    }
}

/// One tick of intent output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntentFrame {
    pub t: f64,
    pub s_r: RefKinematics,
    pub k: f64,
    pub d: f64,
    pub tau_r: f64,
    pub joint: JointImpedance,
    pub mtu: [MtuState; 2],
}

/// Block 1: features in, `(s_r, K, D, τ_r)` out.
#[derive(Debug, Clone)]
pub struct IntentPipeline {
    pair: MusclePair,
    cfg: PipelineConfig,
    mtu: [MtuState; 2],
    model: PlantState,
    last_qdd: f64,
    /// Model angle at which the last joint output was evaluated.
    joint_q: f64,
    tick: u64,
}

impl IntentPipeline {
    /// Places both MTUs at passive equilibrium with the joint at zero.
    pub fn init_rest(pair: MusclePair, cfg: PipelineConfig) -> Result<Self> {
        cfg.plant.validate()?;
        let floor = cfg.activation.floor;
        let mut mtu = [MtuState::evaluate(&pair.params[0], floor, 0.0, 0.0, 0.0, 0.0, false); 2];
        for i in 0..2 {
            let l = pair.geoms[i].mtu_length(0.0)?;
            mtu[i] = init_rest(&pair.params[i], l, floor)?;
        }
        Ok(IntentPipeline {
            pair,
            cfg,
            mtu,
            model: PlantState::at_rest(0.0),
            last_qdd: 0.0,
            joint_q: 0.0,
            tick: 0,
        })
    }

    pub fn pair(&self) -> &MusclePair {
        &self.pair
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn mtu_states(&self) -> &[MtuState; 2] {
        &self.mtu
    }

    pub fn reference(&self) -> RefKinematics {
        RefKinematics {
            q: self.model.q_f,
            qd: self.model.qd_f,
            qdd: self.last_qdd,
        }
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.cfg.dt
    }

    /// Advances one physics step with normalized channel features `(ch1, ch2)`.
    pub fn tick(&mut self, features: [f64; 2]) -> Result<IntentFrame> {
        let tick = self.tick;
        self.step(features).map_err(|e| e.at_tick(tick))
    }

    fn step(&mut self, u: [f64; 2]) -> Result<IntentFrame> {
        let dt = self.cfg.dt;
        let q = self.model.q_f;
        let mut next = self.mtu;
        for i in 0..2 {
            let act = self.cfg.activation.step(u[i], self.mtu[i].act, dt);
            let l = self.pair.geoms[i].mtu_length(q)?;
            let v = (l - self.mtu[i].l_mtu) / dt;
            next[i] = contraction_step(&self.mtu[i], act, l, v, dt, &self.pair.params[i])?;
        }
        let joint = self.joint_at(&next, q)?;

        let p = &self.cfg.plant;
        let qdd = (joint.tau_r - p.gravity_torque(q)) / p.m_inertia;
        self.model = plant_step(&self.model, joint.tau_r, 0.0, p, dt)?;
        // A joint stop zeroes the velocity; report the acceleration actually realized.
        self.last_qdd = if self.model.qd_f == 0.0 && qdd != 0.0 && self.hit_limit() {
            0.0
        } else {
            qdd
        };
        self.mtu = next;
        self.joint_q = q;
        self.tick += 1;
        Ok(IntentFrame {
            t: self.time(),
            s_r: self.reference(),
            k: joint.k,
            d: joint.d,
            tau_r: joint.tau_r,
            joint,
            mtu: next,
        })
    }

    fn joint_at(&self, mtu: &[MtuState; 2], q: f64) -> Result<JointImpedance> {
        let f = [mtu[0].force(), mtu[1].force()];
        let gamma = self.cfg.short_range_gamma;
        let k = [
            mtu[0].stiffness_with_short_range(gamma, &self.pair.params[0]),
            mtu[1].stiffness_with_short_range(gamma, &self.pair.params[1]),
        ];
        let d = [mtu[0].damping(), mtu[1].damping()];
        map_to_joint(&f, &k, &d, q, &self.pair.geoms)
    }

    /// Output for the current state without advancing time.
    pub fn snapshot(&self) -> Result<IntentFrame> {
        let joint = self.joint_at(&self.mtu, self.joint_q)?;
        Ok(IntentFrame {
            t: self.time(),
            s_r: self.reference(),
            k: joint.k,
            d: joint.d,
            tau_r: joint.tau_r,
            joint,
            mtu: self.mtu,
        })
    }

    fn hit_limit(&self) -> bool {
        let p = &self.cfg.plant;
        self.model.q_f <= p.q_min || self.model.q_f >= p.q_max
    }
}

/// One closed-loop tick: intent output and the plant after the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopFrame {
    pub intent: IntentFrame,
    pub plant: PlantState,
}

/// Intent pipeline, impedance law and plant stepped together.
#[derive(Debug, Clone)]
pub struct FrameworkLoop {
    pub pipeline: IntentPipeline,
    pub plant: PlantState,
}

impl FrameworkLoop {
    pub fn init_rest(pair: MusclePair, cfg: PipelineConfig) -> Result<Self> {
        let pipeline = IntentPipeline::init_rest(pair, cfg)?;
        Ok(FrameworkLoop {
            pipeline,
            plant: PlantState::at_rest(0.0),
        })
    }

    /// Current intent output and plant state, before any step.
    pub fn snapshot(&self) -> Result<LoopFrame> {
        Ok(LoopFrame {
            intent: self.pipeline.snapshot()?,
            plant: self.plant,
        })
    }

    /// Advances one physics step; `tau_ext` is evaluated on the plant state
    /// before the step and never reaches the pipeline.
    pub fn tick(
        &mut self,
        features: [f64; 2],
        tau_ext: impl Fn(&PlantState) -> f64,
    ) -> Result<LoopFrame> {
        let intent = self.pipeline.tick(features)?;
        let cfg = self.pipeline.config();
        let tau_f = impedance_law(&intent.s_r, &self.plant, intent.k, intent.d, &cfg.plant);
        let ext = tau_ext(&self.plant);
        self.plant =
            plant_step(&self.plant, tau_f, ext, &cfg.plant, cfg.dt).map_err(|e| match e {
                Error::PlantFault { reason, .. } => Error::PlantFault {
                    t: intent.t,
                    reason,
                },
                other => other,
            })?;
        Ok(LoopFrame {
            intent,
            plant: self.plant,
        })
    }
}

/// Number of physics ticks per feature frame for a given feature period.
pub fn ticks_per_frame(frame_period: f64, dt: f64) -> usize {
    ((frame_period / dt).round() as usize).max(1)
}
