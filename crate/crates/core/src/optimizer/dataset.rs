//! Training data: feature streams paired with recorded joint angles, their
//! on-disk layout and the train/validation split.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sigproc::{self, io, EmgConfig, FeatureFrame, MTU_CHANNELS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motion {
    #[default]
    FlexionExtension,
    UlnarRadial,
}

/// One recording: normalized features and ground-truth angles (rad).
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub features: Vec<FeatureFrame>,
    pub pose: Vec<(f64, f64)>,
}

impl Trial {
    /// Extensor/flexor features with times relative to the first frame.
    /// Eight-channel frames are reduced to the two MTU channels.
    pub fn mtu_features(&self) -> Result<Vec<(f64, [f64; 2])>> {
        let t0 = self.start()?;
        self.features
            .iter()
            .map(|f| {
                let ch = match f.ch.len() {
                    2 => [f.ch[0], f.ch[1]],
                    n if n > MTU_CHANNELS[1] => [f.ch[MTU_CHANNELS[0]], f.ch[MTU_CHANNELS[1]]],
                    n => {
                        return Err(Error::Spec(format!(
                            "feature frame has {n} channels; need 2 or 8"
                        )))
                    }
                };
                Ok((f.t - t0, ch))
            })
            .collect()
    }

    /// Pose samples with times relative to the first feature frame.
    pub fn relative_pose(&self) -> Result<Vec<(f64, f64)>> {
        let t0 = self.start()?;
        Ok(self.pose.iter().map(|&(t, q)| (t - t0, q)).collect())
    }

    fn start(&self) -> Result<f64> {
        self.features
            .first()
            .map(|f| f.t)
            .ok_or_else(|| Error::Spec("trial has no feature frames".into()))
    }

    /// Checks that both streams are non-empty, increasing and overlapping.
    pub fn check(&self) -> Result<()> {
        let t0 = self.start()?;
        if !increasing(self.features.iter().map(|f| f.t)) {
            return Err(Error::Spec("feature timestamps must increase".into()));
        }
        if self.pose.is_empty() || !increasing(self.pose.iter().map(|p| p.0)) {
            return Err(Error::Spec(
                "pose timestamps must be non-empty and increasing".into(),
            ));
        }
        if self.pose[0].0 < t0 - 1e-9 {
            return Err(Error::Spec(format!(
                "pose starts at {} s, before the first feature frame at {t0} s",
                self.pose[0].0
            )));
        }
        Ok(())
    }
}

fn increasing(mut t: impl Iterator<Item = f64>) -> bool {
    let mut prev = f64::NEG_INFINITY;
    t.all(|x| {
        let ok = x.is_finite() && x > prev;
        prev = x;
        ok
    })
}

/// Recordings of one subject and motion.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingSet {
    pub subject: String,
    pub motion: Motion,
    pub trials: Vec<Trial>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrialEntry {
    /// Normalized feature CSV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<String>,
    /// Raw EMG CSV, conditioned at load time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    emg: Option<String>,
    pose: String,
}

/// Unit of the recorded pose column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleUnit {
    #[default]
    Rad,
    Deg,
}

/// Maps recorded angles onto the plant axis: `q = sign·unit(raw) + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoseMapping {
    pub unit: AngleUnit,
    /// +1 or −1, flipping the recorded axis onto the plant's flexion-positive axis.
    pub sign: f64,
    /// Added after unit conversion (rad).
    pub offset: f64,
}

impl Default for PoseMapping {
    fn default() -> Self {
        PoseMapping {
            unit: AngleUnit::Rad,
            sign: 1.0,
            offset: 0.0,
        }
    }
}

impl PoseMapping {
    pub fn validate(&self) -> Result<()> {
        if self.sign != 1.0 && self.sign != -1.0 {
            return Err(Error::Spec(format!(
                "pose sign {} must be 1 or -1",
                self.sign
            )));
        }
        if !self.offset.is_finite() {
            return Err(Error::Spec("pose offset must be finite".into()));
        }
        Ok(())
    }

    pub fn apply(&self, raw: f64) -> f64 {
        let q = match self.unit {
            AngleUnit::Rad => raw,
            AngleUnit::Deg => raw.to_radians(),
        };
        self.sign * q + self.offset
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    subject: String,
    motion: Motion,
    #[serde(default)]
    pose_mapping: PoseMapping,
    trials: Vec<TrialEntry>,
}

/// File name of the dataset manifest inside a dataset directory.
pub const MANIFEST: &str = "dataset.json";

impl TrainingSet {
    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    /// First `round(frac·n)` trials for training, the rest for validation.
    /// Each side keeps at least one trial when there are two or more.
    pub fn split(&self, frac: f64) -> Result<(TrainingSet, TrainingSet)> {
        if !(frac > 0.0 && frac < 1.0) {
            return Err(Error::Spec(format!(
                "split fraction {frac} must lie in (0, 1)"
            )));
        }
        let n = self.trials.len();
        let mut k = (frac * n as f64).round() as usize;
        if n >= 2 {
            k = k.clamp(1, n - 1);
        }
        let part = |trials: &[Trial]| TrainingSet {
            subject: self.subject.clone(),
            motion: self.motion,
            trials: trials.to_vec(),
        };
        Ok((part(&self.trials[..k]), part(&self.trials[k..])))
    }

    /// Writes features and pose as CSV plus a manifest.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut entries = Vec::with_capacity(self.trials.len());
        for (i, tr) in self.trials.iter().enumerate() {
            let features = format!("trial_{i:03}_features.csv");
            let pose = format!("trial_{i:03}_pose.csv");
            io::write_features_file(&dir.join(&features), &tr.features)?;
            io::write_pose_file(&dir.join(&pose), &tr.pose)?;
            entries.push(TrialEntry {
                features: Some(features),
                emg: None,
                pose,
            });
        }
        let manifest = Manifest {
            subject: self.subject.clone(),
            motion: self.motion,
            pose_mapping: PoseMapping::default(),
            trials: entries,
        };
        std::fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    /// Loads a dataset directory, mapping recorded angles through the
    /// manifest's `pose_mapping` (radians, unchanged, if absent). Trials given as raw EMG are conditioned
    /// with `emg`; if it carries no normalization maxima, they are calibrated
    /// over all raw trials of the set and returned.
    pub fn load(dir: &Path, emg: &EmgConfig) -> Result<(TrainingSet, Option<Vec<f64>>)> {
        let manifest: Manifest =
            serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST))?)?;
        let mapping = manifest.pose_mapping;
        mapping.validate()?;
        let mut raw = Vec::new();
        for e in &manifest.trials {
            if e.features.is_none() {
                let path = e.emg.as_ref().ok_or_else(|| {
                    Error::Spec(format!(
                        "trial with pose {} names neither features nor emg",
                        e.pose
                    ))
                })?;
                raw.push(io::read_raw_file(&dir.join(path))?);
            }
        }
        let mut cfg = emg.clone();
        let mut calibrated = None;
        if !raw.is_empty() && cfg.norm_max.is_empty() {
            let m = sigproc::calibrate_norm(&raw, &cfg)?;
            cfg.norm_max = m.clone();
            calibrated = Some(m);
        }
        let mut raw = raw.into_iter();
        let mut trials = Vec::with_capacity(manifest.trials.len());
        for e in &manifest.trials {
            let features = match &e.features {
                Some(f) => io::read_features_file(&dir.join(f))?,
                None => {
                    sigproc::condition(&raw.next().expect("one raw stream per emg trial"), &cfg)?
                }
            };
            let trial = Trial {
                features,
                pose: io::read_pose_file(&dir.join(&e.pose))?
                    .into_iter()
                    .map(|(t, q)| (t, mapping.apply(q)))
                    .collect(),
            };
            trial.check()?;
            trials.push(trial);
        }
        Ok((
            TrainingSet {
                subject: manifest.subject,
                motion: manifest.motion,
                trials,
            },
            calibrated,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial(n: usize) -> Trial {
        Trial {
            features: (0..n)
                .map(|i| FeatureFrame {
                    t: 0.16 + 0.04 * i as f64,
                    ch: vec![0.1; 8],
                })
                .collect(),
            pose: (0..n)
                .map(|i| (0.16 + 0.04 * i as f64, 0.01 * i as f64))
                .collect(),
        }
    }

    #[test]
    fn sixty_forty_split() {
        let set = TrainingSet {
            trials: vec![trial(3); 15],
            ..Default::default()
        };
        let (train, val) = set.split(0.6).unwrap();
        assert_eq!((train.trials.len(), val.trials.len()), (9, 6));
        assert!(set.split(1.0).is_err());
    }

    #[test]
    fn eight_channel_frames_use_channels_four_and_eight() {
        let mut t = trial(2);
        t.features[0].ch = (1..=8).map(|c| c as f64 / 10.0).collect();
        let f = t.mtu_features().unwrap();
        assert_eq!(f[0].0, 0.0);
        assert_eq!(f[0].1, [0.4, 0.8]);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let set = TrainingSet {
            subject: "s01".into(),
            motion: Motion::FlexionExtension,
            trials: vec![trial(4), trial(5)],
        };
        set.save(dir.path()).unwrap();
        let (back, cal) = TrainingSet::load(dir.path(), &EmgConfig::default()).unwrap();
        assert!(cal.is_none());
        assert_eq!(back, set);
    }

    #[test]
    fn degree_poses_are_mapped_at_load() {
        let dir = tempfile::tempdir().unwrap();
        let set = TrainingSet {
            subject: "s".into(),
            motion: Motion::FlexionExtension,
            trials: vec![trial(5)],
        };
        set.save(dir.path()).unwrap();
        let path = dir.path().join(MANIFEST);
        let mut m: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        m["pose_mapping"] = serde_json::json!({"unit": "deg", "sign": -1.0});
        std::fs::write(&path, m.to_string()).unwrap();
        let (loaded, _) = TrainingSet::load(dir.path(), &EmgConfig::default()).unwrap();
        for (a, b) in loaded.trials[0].pose.iter().zip(&set.trials[0].pose) {
            assert_eq!(a.0, b.0);
            assert!((a.1 + b.1.to_radians()).abs() < 1e-15);
        }
        m["pose_mapping"] = serde_json::json!({"sign": 2.0});
        std::fs::write(&path, m.to_string()).unwrap();
        assert!(TrainingSet::load(dir.path(), &EmgConfig::default()).is_err());
    }

    #[test]
    fn pose_before_features_is_rejected() {
        let mut t = trial(3);
        t.pose[0].0 = 0.0;
        assert!(t.check().is_err());
    }
}
