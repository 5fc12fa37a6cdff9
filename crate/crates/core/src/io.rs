//! On-disk formats: raw recordings with a text sidecar, the dataset
//! manifest, and feature stores.
//!
//! Recordings are little-endian `f32`, channel after channel, next to a
//! `.hdr` file holding `fs`, `channels` and `length`. Floats in CSV files
//! use Rust's shortest round-trip formatting so files reload bit-exactly.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Class, Condition, FeatureMatrix, RowMeta};
use crate::signal::Signal;

/// One recording listed in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub path: PathBuf,
    pub bearing_id: String,
    pub class: Class,
    pub speed_rpm: f64,
    pub load_nm: f64,
    pub run: u32,
    /// Channel set stored in the file, e.g. `A1+A2`.
    pub channel: String,
    #[serde(default)]
    pub held_out: bool,
}

impl ManifestEntry {
    pub fn condition(&self) -> Condition {
        Condition::new(self.speed_rpm, self.load_nm)
    }
}

fn header_path(path: &Path) -> PathBuf {
    path.with_extension("hdr")
}

pub fn write_recording(path: &Path, channels: &[Signal]) -> Result<()> {
    let Some(first) = channels.first() else {
        return Err(Error::InvalidArgument("recording has no channels".into()));
    };
    if channels
        .iter()
        .any(|c| c.len() != first.len() || c.fs() != first.fs())
    {
        return Err(Error::InvalidArgument(
            "channels differ in length or sampling rate".into(),
        ));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for ch in channels {
        for &v in ch.samples() {
            w.write_all(&(v as f32).to_le_bytes())
                .map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let hdr = header_path(path);
    let text = format!(
        "fs={}\nchannels={}\nlength={}\nformat=f32le\n",
        first.fs(),
        channels.len(),
        first.len()
    );
    std::fs::write(&hdr, text).map_err(|e| Error::io(&hdr, e))
}

pub fn read_recording(path: &Path) -> Result<Vec<Signal>> {
    let hdr = header_path(path);
    let text = std::fs::read_to_string(&hdr).map_err(|e| Error::io(&hdr, e))?;
    let mut fs = None;
    let mut channels = None;
    let mut length = None;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::format(&hdr, format!("bad header line {line:?}")))?;
        let bad = |e: &dyn std::fmt::Display| Error::format(&hdr, format!("{k}: {e}"));
        match k.trim() {
            "fs" => fs = Some(v.trim().parse::<f64>().map_err(|e| bad(&e))?),
            "channels" => channels = Some(v.trim().parse::<usize>().map_err(|e| bad(&e))?),
            "length" => length = Some(v.trim().parse::<usize>().map_err(|e| bad(&e))?),
            "format" if v.trim() != "f32le" => {
                return Err(Error::format(
                    &hdr,
                    format!("unsupported sample format {v}"),
                ));
            }
            _ => {}
        }
    }
    let (Some(fs), Some(channels), Some(length)) = (fs, channels, length) else {
        return Err(Error::format(&hdr, "header needs fs, channels and length"));
    };
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() != channels * length * 4 {
        return Err(Error::format(
            path,
            format!(
                "expected {} bytes, found {}",
                channels * length * 4,
                bytes.len()
            ),
        ));
    }
    let samples: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    samples
        .chunks_exact(length.max(1))
        .take(channels)
        .map(|c| Signal::new(c.to_vec(), fs).map_err(|e| Error::format(path, e.to_string())))
        .collect()
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for e in entries {
        w.serialize(e).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<ManifestEntry>, _>>()
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::format(path, format!("{other:?}")),
        }
    } else {
        Error::format(path, e.to_string())
    }
}

const META_COLUMNS: [&str; 6] = [
    "bearing_id",
    "class",
    "speed_rpm",
    "load_nm",
    "run",
    "segment",
];

/// Metadata columns first, then one column per feature.
pub fn write_feature_store(path: &Path, m: &FeatureMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let header: Vec<&str> = META_COLUMNS
        .iter()
        .copied()
        .chain(m.columns().iter().map(String::as_str))
        .collect();
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    let mut record = Vec::with_capacity(header.len());
    for (meta, row) in m.meta().iter().zip(m.values().rows()) {
        record.clear();
        record.push(meta.bearing_id.clone());
        record.push(meta.class.to_string());
        record.push(format!("{:?}", meta.condition.speed_rpm));
        record.push(format!("{:?}", meta.condition.load_nm));
        record.push(meta.run.to_string());
        record.push(meta.segment.to_string());
        record.extend(row.iter().map(|v| format!("{v:?}")));
        w.write_record(&record).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_feature_store(path: &Path) -> Result<FeatureMatrix> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.len() < META_COLUMNS.len() || header.iter().take(6).ne(META_COLUMNS.iter().copied()) {
        return Err(Error::format(
            path,
            "feature store header must start with the metadata columns",
        ));
    }
    let columns: Vec<String> = header.iter().skip(6).map(str::to_string).collect();
    let mut meta = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let bad = |what: &str| Error::format(path, format!("row {}: bad {what}", line + 2));
        if rec.len() != header.len() {
            return Err(bad("field count"));
        }
        meta.push(RowMeta {
            bearing_id: rec[0].to_string(),
            class: rec[1].parse().map_err(|_| bad("class"))?,
            condition: Condition::new(
                rec[2].parse().map_err(|_| bad("speed_rpm"))?,
                rec[3].parse().map_err(|_| bad("load_nm"))?,
            ),
            run: rec[4].parse().map_err(|_| bad("run"))?,
            segment: rec[5].parse().map_err(|_| bad("segment"))?,
        });
        for v in rec.iter().skip(6) {
            values.push(v.parse::<f64>().map_err(|_| bad("feature value"))?);
        }
    }
    let values = Array2::from_shape_vec((meta.len(), columns.len()), values)
        .map_err(|e| Error::format(path, e.to_string()))?;
    FeatureMatrix::new(values, meta, columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn recording_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.f32");
        let a = Signal::new(vec![0.5, -1.25, 3.0], 1000.0).unwrap();
        let b = Signal::new(vec![1.0, 2.0, 4.0], 1000.0).unwrap();
        write_recording(&p, &[a.clone(), b.clone()]).unwrap();
        let back = read_recording(&p).unwrap();
        assert_eq!(back, vec![a, b]);
        std::fs::write(&p, [0u8; 5]).unwrap();
        assert!(matches!(read_recording(&p), Err(Error::Format { .. })));
        assert!(matches!(
            read_recording(&dir.path().join("missing.f32")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.csv");
        let entries = vec![ManifestEntry {
            path: "recordings/x.f32".into(),
            bearing_id: "AM-01".into(),
            class: Class::Healthy,
            speed_rpm: 2000.0,
            load_nm: 5.0,
            run: 0,
            channel: "A1+A2".into(),
            held_out: true,
        }];
        write_manifest(&p, &entries).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("path,bearing_id,class,speed_rpm,load_nm,run,channel,held_out"));
        assert_eq!(read_manifest(&p).unwrap(), entries);
    }

    #[test]
    fn feature_store_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let meta = vec![
            RowMeta {
                bearing_id: "F3-01".into(),
                class: Class::Faulty,
                condition: Condition::new(3000.0, 20.0),
                run: 1,
                segment: 4,
            },
            RowMeta {
                bearing_id: "AM-01".into(),
                class: Class::Healthy,
                condition: Condition::new(1000.0, 0.0),
                run: 0,
                segment: 0,
            },
        ];
        let m = FeatureMatrix::new(
            array![[0.1, -240.0], [1.0 / 3.0, 1e-300]],
            meta,
            vec!["h0.25".into(), "h0.5".into()],
        )
        .unwrap();
        write_feature_store(&p, &m).unwrap();
        assert_eq!(read_feature_store(&p).unwrap(), m);
    }
}
