//! Per-tick trial telemetry: the joint-space signals used by the metrics plus
//! the muscle-tendon internals shown in trial plots. Muscle columns are NaN
//! for the baseline, which has no muscle model.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::intent::LoopFrame;
use crate::mtu::MtuState;
use crate::plant::PlantState;

/// Muscle-tendon internals of one MTU.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MtuTrace {
    pub f_ce: f64,
    pub f_pe: f64,
    pub f_se: f64,
    pub f_de: f64,
    pub k_m: f64,
    pub k_t: f64,
    pub d_m: f64,
    pub d_t: f64,
}

impl MtuTrace {
    pub const NAN: MtuTrace = MtuTrace {
        f_ce: f64::NAN,
        f_pe: f64::NAN,
        f_se: f64::NAN,
        f_de: f64::NAN,
        k_m: f64::NAN,
        k_t: f64::NAN,
        d_m: f64::NAN,
        d_t: f64::NAN,
    };
}

impl From<&MtuState> for MtuTrace {
    fn from(s: &MtuState) -> Self {
        MtuTrace {
            f_ce: s.f_ce,
            f_pe: s.f_pe,
            f_se: s.f_se,
            f_de: s.f_de,
            k_m: s.k_m,
            k_t: s.k_t,
            d_m: s.d_m,
            d_t: s.d_t,
        }
    }
}

/// One physics tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRow {
    pub t: f64,
    /// Normalized features fed to the extensor and flexor models.
    pub ch1: f64,
    pub ch2: f64,
    pub q_r: f64,
    pub qd_r: f64,
    pub q_f: f64,
    pub qd_f: f64,
    pub k: f64,
    pub d: f64,
    pub k_intrinsic: f64,
    pub k_geom: f64,
    pub tau_f: f64,
    pub tau_ext: f64,
    pub mtu1: MtuTrace,
    pub mtu2: MtuTrace,
}

impl TelemetryRow {
    /// Row for a framework tick.
    pub fn from_loop(frame: &LoopFrame, ch: [f64; 2]) -> Self {
        let i = &frame.intent;
        let p = &frame.plant;
        TelemetryRow {
            t: p.t,
            ch1: ch[0],
            ch2: ch[1],
            q_r: i.s_r.q,
            qd_r: i.s_r.qd,
            q_f: p.q_f,
            qd_f: p.qd_f,
            k: i.k,
            d: i.d,
            k_intrinsic: i.joint.k_intrinsic,
            k_geom: i.joint.k_geom,
            tau_f: p.tau_f,
            tau_ext: p.tau_ext,
            mtu1: MtuTrace::from(&i.mtu[0]),
            mtu2: MtuTrace::from(&i.mtu[1]),
        }
    }

    /// Row for a baseline tick with fixed gains `(k, d)`.
    pub fn from_baseline(p: &PlantState, q_r: f64, k: f64, d: f64, ch: [f64; 2]) -> Self {
        TelemetryRow {
            t: p.t,
            ch1: ch[0],
            ch2: ch[1],
            q_r,
            qd_r: f64::NAN,
            q_f: p.q_f,
            qd_f: p.qd_f,
            k,
            d,
            k_intrinsic: f64::NAN,
            k_geom: f64::NAN,
            tau_f: p.tau_f,
            tau_ext: p.tau_ext,
            mtu1: MtuTrace::NAN,
            mtu2: MtuTrace::NAN,
        }
    }
}

// The csv crate cannot flatten nested structs, so rows go through a flat mirror.
#[derive(Serialize, Deserialize)]
struct FlatRow {
    t: f64,
    ch1: f64,
    ch2: f64,
    q_r: f64,
    qd_r: f64,
    q_f: f64,
    qd_f: f64,
    k: f64,
    d: f64,
    k_intrinsic: f64,
    k_geom: f64,
    tau_f: f64,
    tau_ext: f64,
    f_ce1: f64,
    f_pe1: f64,
    f_se1: f64,
    f_de1: f64,
    k_m1: f64,
    k_t1: f64,
    d_m1: f64,
    d_t1: f64,
    f_ce2: f64,
    f_pe2: f64,
    f_se2: f64,
    f_de2: f64,
    k_m2: f64,
    k_t2: f64,
    d_m2: f64,
    d_t2: f64,
}

impl From<&TelemetryRow> for FlatRow {
    fn from(r: &TelemetryRow) -> Self {
        let (a, b) = (&r.mtu1, &r.mtu2);
        FlatRow {
            t: r.t,
            ch1: r.ch1,
            ch2: r.ch2,
            q_r: r.q_r,
            qd_r: r.qd_r,
            q_f: r.q_f,
            qd_f: r.qd_f,
            k: r.k,
            d: r.d,
            k_intrinsic: r.k_intrinsic,
            k_geom: r.k_geom,
            tau_f: r.tau_f,
            tau_ext: r.tau_ext,
            f_ce1: a.f_ce,
            f_pe1: a.f_pe,
            f_se1: a.f_se,
            f_de1: a.f_de,
            k_m1: a.k_m,
            k_t1: a.k_t,
            d_m1: a.d_m,
            d_t1: a.d_t,
            f_ce2: b.f_ce,
            f_pe2: b.f_pe,
            f_se2: b.f_se,
            f_de2: b.f_de,
            k_m2: b.k_m,
            k_t2: b.k_t,
            d_m2: b.d_m,
            d_t2: b.d_t,
        }
    }
}

impl From<FlatRow> for TelemetryRow {
    fn from(f: FlatRow) -> Self {
        TelemetryRow {
            t: f.t,
            ch1: f.ch1,
            ch2: f.ch2,
            q_r: f.q_r,
            qd_r: f.qd_r,
            q_f: f.q_f,
            qd_f: f.qd_f,
            k: f.k,
            d: f.d,
            k_intrinsic: f.k_intrinsic,
            k_geom: f.k_geom,
            tau_f: f.tau_f,
            tau_ext: f.tau_ext,
            mtu1: MtuTrace {
                f_ce: f.f_ce1,
                f_pe: f.f_pe1,
                f_se: f.f_se1,
                f_de: f.f_de1,
                k_m: f.k_m1,
                k_t: f.k_t1,
                d_m: f.d_m1,
                d_t: f.d_t1,
            },
            mtu2: MtuTrace {
                f_ce: f.f_ce2,
                f_pe: f.f_pe2,
                f_se: f.f_se2,
                f_de: f.f_de2,
                k_m: f.k_m2,
                k_t: f.k_t2,
                d_m: f.d_m2,
                d_t: f.d_t2,
            },
        }
    }
}

/// Writes rows as CSV with round-trip float formatting.
pub fn write_telemetry<W: Write>(w: W, rows: &[TelemetryRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(FlatRow::from(r))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_telemetry<R: Read>(r: R) -> Result<Vec<TelemetryRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for rec in rdr.deserialize::<FlatRow>() {
        rows.push(rec?.into());
    }
    Ok(rows)
}

pub fn write_telemetry_file(path: &Path, rows: &[TelemetryRow]) -> Result<()> {
    write_telemetry(std::io::BufWriter::new(std::fs::File::create(path)?), rows)
}

pub fn read_telemetry_file(path: &Path) -> Result<Vec<TelemetryRow>> {
    read_telemetry(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let p = PlantState {
            t: 0.001,
            q_f: 0.1 + 0.2,
            qd_f: -1.0 / 3.0,
            tau_f: 1e-17,
            tau_ext: -20.0,
        };
        let rows = vec![TelemetryRow::from_baseline(
            &p,
            0.35,
            100.0,
            5.0,
            [1e-4, 0.7],
        )];
        let mut buf = Vec::new();
        write_telemetry(&mut buf, &rows).unwrap();
        let back = read_telemetry(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 1);
        let (a, b) = (&rows[0], &back[0]);
        assert_eq!(a.q_f.to_bits(), b.q_f.to_bits());
        assert_eq!(a.qd_f.to_bits(), b.qd_f.to_bits());
        assert_eq!(a.tau_f.to_bits(), b.tau_f.to_bits());
        assert!(b.mtu1.f_ce.is_nan() && b.k_geom.is_nan());
    }
}
