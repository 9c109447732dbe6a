//! CSV formats: raw EMG (`t,ch1..chN`), feature logs (`t,ch1..chN`) and
//! ground-truth pose (`t,q_gt`).

use std::io::{Read, Write};
use std::path::Path;

use super::{FeatureFrame, RawEmg};
use crate::error::{Error, Result};

fn channel_header(n: usize) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("ch{i}")))
        .collect()
}

fn check_header(h: &csv::StringRecord, expect: &[String]) -> Result<()> {
    let got: Vec<&str> = h.iter().map(str::trim).collect();
    if got.len() != expect.len() || got.iter().zip(expect).any(|(a, b)| a != b) {
        return Err(Error::Spec(format!(
            "unexpected CSV header {:?}, expected {:?}",
            got, expect
        )));
    }
    Ok(())
}

/// Reads rows of `t` followed by one value per channel.
fn read_table<R: Read>(r: R) -> Result<(usize, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let header = rdr.headers()?.clone();
    let n = header.len().saturating_sub(1);
    if n == 0 {
        return Err(Error::Spec(
            "CSV needs a time column and at least one data column".into(),
        ));
    }
    check_header(&header, &channel_header(n))?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::Spec(format!("bad number {s:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((n, rows))
}

/// Sample rate from the median sample spacing.
fn infer_rate(t: &[f64]) -> Result<f64> {
    let mut dt: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    if dt.is_empty() {
        return Err(Error::Spec(
            "need at least two samples to infer the sample rate".into(),
        ));
    }
    dt.sort_by(f64::total_cmp);
    let med = dt[dt.len() / 2];
    if !(med > 0.0) {
        return Err(Error::Spec("time column is not increasing".into()));
    }
    Ok((1.0 / med * 1e6).round() / 1e6)
}

pub fn read_raw<R: Read>(r: R) -> Result<RawEmg> {
    let (n, rows) = read_table(r)?;
    let t: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let channels = (1..=n)
        .map(|c| rows.iter().map(|r| r[c]).collect())
        .collect();
    Ok(RawEmg {
        sample_rate: infer_rate(&t)?,
        t,
        channels,
    })
}

pub fn write_raw<W: Write>(w: W, raw: &RawEmg) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(channel_header(raw.n_channels()))?;
    for (i, t) in raw.t.iter().enumerate() {
        let row = std::iter::once(*t).chain(raw.channels.iter().map(|c| c[i]));
        wtr.write_record(row.map(|v| v.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_features<R: Read>(r: R) -> Result<Vec<FeatureFrame>> {
    let (_, rows) = read_table(r)?;
    Ok(rows
        .into_iter()
        .map(|r| FeatureFrame {
            t: r[0],
            ch: r[1..].to_vec(),
        })
        .collect())
}

pub fn write_features<W: Write>(w: W, frames: &[FeatureFrame]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(channel_header(frames.first().map_or(2, |f| f.ch.len())))?;
    for f in frames {
        let row = std::iter::once(f.t).chain(f.ch.iter().copied());
        wtr.write_record(row.map(|v| v.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Ground-truth joint angle samples `(t, q_gt)`.
pub fn read_pose<R: Read>(r: R) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    check_header(rdr.headers()?, &["t".to_string(), "q_gt".to_string()])?;
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        let (t, q): (f64, f64) = rec?;
        out.push((t, q));
    }
    Ok(out)
}

pub fn write_pose<W: Write>(w: W, pose: &[(f64, f64)]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["t", "q_gt"])?;
    for (t, q) in pose {
        wtr.serialize((t, q))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_raw_file(path: &Path) -> Result<RawEmg> {
    read_raw(std::fs::File::open(path)?)
}

pub fn write_raw_file(path: &Path, raw: &RawEmg) -> Result<()> {
    write_raw(std::fs::File::create(path)?, raw)
}

pub fn read_features_file(path: &Path) -> Result<Vec<FeatureFrame>> {
    read_features(std::fs::File::open(path)?)
}

pub fn write_features_file(path: &Path, frames: &[FeatureFrame]) -> Result<()> {
    write_features(std::fs::File::create(path)?, frames)
}

pub fn read_pose_file(path: &Path) -> Result<Vec<(f64, f64)>> {
    read_pose(std::fs::File::open(path)?)
}

pub fn write_pose_file(path: &Path, pose: &[(f64, f64)]) -> Result<()> {
    write_pose(std::fs::File::create(path)?, pose)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_round_trip() {
        let raw = RawEmg {
            sample_rate: 200.0,
            t: vec![0.0, 0.005, 0.01],
            channels: vec![vec![0.1, -0.2, 0.3], vec![1.0, 2.0, 3.5]],
        };
        let mut buf = Vec::new();
        write_raw(&mut buf, &raw).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("t,ch1,ch2\n"));
        assert_eq!(read_raw(&buf[..]).unwrap(), raw);
    }

    #[test]
    fn pose_round_trip() {
        let pose = vec![(0.0, 0.1), (0.04, -0.25)];
        let mut buf = Vec::new();
        write_pose(&mut buf, &pose).unwrap();
        assert_eq!(read_pose(&buf[..]).unwrap(), pose);
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(read_raw("time,a\n0,1\n0.1,2\n".as_bytes()).is_err());
        assert!(read_pose("t,q\n0,1\n".as_bytes()).is_err());
    }

    #[test]
    fn features_round_trip() {
        let f = vec![FeatureFrame {
            t: 0.16,
            ch: vec![0.25, 1e-4],
        }];
        let mut buf = Vec::new();
        write_features(&mut buf, &f).unwrap();
        assert_eq!(read_features(&buf[..]).unwrap(), f);
    }
}
