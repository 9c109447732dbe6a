#![allow(dead_code)]

use std::sync::OnceLock;

use myoimp::intent::{MusclePair, PipelineConfig};
use myoimp::session::{Body, BodyMap, BodyMapConfig, Models};
use myoimp::sigproc::ARMBAND_MIX;

pub fn models() -> Models {
    Models {
        pair: MusclePair::reference(),
        pipeline: PipelineConfig::default(),
        baseline: None,
    }
}

/// Settled-angle map of the reference pair under unit calibration, the
/// mapping the service applies to activation frames.
fn map() -> &'static BodyMap {
    static MAP: OnceLock<BodyMap> = OnceLock::new();
    MAP.get_or_init(|| {
        let body = Body {
            pair: MusclePair::reference(),
            pipeline: PipelineConfig::default(),
            norm_max: vec![1.0; ARMBAND_MIX.len()],
            gain: 1.0,
        };
        let cfg = BodyMapConfig {
            levels: vec![0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8, 1.0],
            ..Default::default()
        };
        BodyMap::build(&body, &cfg).unwrap()
    })
}

/// Constant activations `(ch1, ch2)` that settle the joint at `q`.
pub fn hold(q: f64) -> [f64; 2] {
    map().activations(q, 0.05)
}
