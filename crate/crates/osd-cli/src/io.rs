//! Data file formats: CSV exports, the compact OSDB binary dump, and the
//! JSON files that chain experiments together (normalizer tracks and
//! generator certificates).
//!
//! CSV uses a header row, comma separators, `.` decimal points and LF line
//! endings. The binary dump is a 16-byte header — magic `OSDB`, version
//! (u16), dim (u16), replicas (u32), length (u32), all little endian —
//! followed by the path data as little-endian f64 in (replica, time,
//! coordinate) order.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use osd_core::clt::{NormalizerTrack, Samples};
use osd_core::linalg::Mat;
use osd_core::mixing::PathBatch;
use osd_core::semigroup::GeneratorCertificate;

pub const OSDB_MAGIC: [u8; 4] = *b"OSDB";
pub const OSDB_VERSION: u16 = 1;

#[derive(Debug)]
pub enum IoError {
    Io(std::io::Error),
    Format(String),
}

impl std::fmt::Display for IoError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IoError::Io(e) => write!(f, "{e}"),
            IoError::Format(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for IoError {}

impl From<std::io::Error> for IoError {
    fn from(e: std::io::Error) -> Self {
        IoError::Io(e)
    }
}

fn format_err(msg: impl Into<String>) -> IoError {
    IoError::Format(msg.into())
}

/// Path batch as CSV: one row per `(replica, time)` with columns
/// `r, t, x1..xd`; `r` counts from 0 (plus an optional offset for chunked
/// writes), `t` from 1.
pub fn write_batch_csv(path: &Path, batch: &PathBatch, replica_offset: usize) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_batch_csv_to(&mut w, batch, replica_offset, true)
}

pub fn write_batch_csv_to<W: Write>(
    w: &mut W,
    batch: &PathBatch,
    replica_offset: usize,
    header: bool,
) -> Result<(), IoError> {
    let d = batch.dim();
    if header {
        let mut head = String::from("r,t");
        for k in 1..=d {
            head.push_str(&format!(",x{k}"));
        }
        head.push('\n');
        w.write_all(head.as_bytes())?;
    }
    let mut line = String::new();
    for r in 0..batch.replicas() {
        for t in 0..batch.length() {
            line.clear();
            line.push_str(&format!("{},{}", r + replica_offset, t + 1));
            for x in batch.at(r, t) {
                line.push(',');
                line.push_str(&format!("{x}"));
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
    }
    Ok(())
}

/// Sample cloud as CSV: one row per draw with columns `i, x1..xd`.
pub fn write_samples_csv(path: &Path, samples: &Samples) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    let d = samples.dim();
    let mut head = String::from("i");
    for k in 1..=d {
        head.push_str(&format!(",x{k}"));
    }
    head.push('\n');
    w.write_all(head.as_bytes())?;
    let mut line = String::new();
    for i in 0..samples.replicas() {
        line.clear();
        line.push_str(&format!("{i}"));
        for x in samples.at(i) {
            line.push(',');
            line.push_str(&format!("{x}"));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Raw contents of an OSDB dump.
#[derive(Debug, Clone, PartialEq)]
pub struct OsdbData {
    pub replicas: u32,
    pub length: u32,
    pub dim: u16,
    pub data: Vec<f64>,
}

pub fn write_batch_osdb(path: &Path, batch: &PathBatch) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_osdb_header(
        &mut w,
        batch.replicas() as u32,
        batch.length() as u32,
        batch.dim() as u16,
    )?;
    for v in batch.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Sample clouds reuse the dump with `length = 1`.
pub fn write_samples_osdb(path: &Path, samples: &Samples) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_osdb_header(&mut w, samples.replicas() as u32, 1, samples.dim() as u16)?;
    for v in samples.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn write_osdb_header<W: Write>(
    w: &mut W,
    replicas: u32,
    length: u32,
    dim: u16,
) -> Result<(), IoError> {
    w.write_all(&OSDB_MAGIC)?;
    w.write_all(&OSDB_VERSION.to_le_bytes())?;
    w.write_all(&dim.to_le_bytes())?;
    w.write_all(&replicas.to_le_bytes())?;
    w.write_all(&length.to_le_bytes())?;
    Ok(())
}

pub fn read_osdb(path: &Path) -> Result<OsdbData, IoError> {
    let mut f = File::open(path)?;
    let mut header = [0u8; 16];
    f.read_exact(&mut header)?;
    if header[0..4] != OSDB_MAGIC {
        return Err(format_err("bad magic: not an OSDB file"));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != OSDB_VERSION {
        return Err(format_err(format!("unsupported OSDB version {version}")));
    }
    let dim = u16::from_le_bytes([header[6], header[7]]);
    let replicas = u32::from_le_bytes([header[8], header[9], header[10], header[11]]);
    let length = u32::from_le_bytes([header[12], header[13], header[14], header[15]]);
    let count = replicas as usize * length as usize * dim as usize;
    let mut raw = Vec::new();
    f.read_to_end(&mut raw)?;
    if raw.len() != count * 8 {
        return Err(format_err(format!(
            "payload length {} does not match header ({} values expected)",
            raw.len(),
            count
        )));
    }
    let data = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(OsdbData {
        replicas,
        length,
        dim,
        data,
    })
}

/// Per-checkpoint metrics CSV: caller provides the header names and one
/// numeric row per checkpoint.
pub fn write_metrics_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(header.join(",").as_bytes())?;
    w.write_all(b"\n")?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        w.write_all(line.join(",").as_bytes())?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MatDto {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MatDto {
    fn from_mat(m: &Mat) -> MatDto {
        MatDto {
            rows: m.rows(),
            cols: m.cols(),
            data: m.as_slice().to_vec(),
        }
    }

    fn to_mat(&self) -> Result<Mat, IoError> {
        if self.data.len() != self.rows * self.cols || self.rows == 0 {
            return Err(format_err("matrix payload does not match its shape"));
        }
        Ok(Mat::from_vec(self.rows, self.cols, self.data.clone()))
    }
}

/// Normalizer track file: chains `clt-run` into `extract-q`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackFile {
    pub dim: usize,
    pub checkpoints: Vec<usize>,
    a: Vec<MatDto>,
    b: Vec<Vec<f64>>,
    pub regularized: bool,
}

impl TrackFile {
    pub fn from_track(track: &NormalizerTrack, dim: usize) -> TrackFile {
        TrackFile {
            dim,
            checkpoints: track.checkpoints().to_vec(),
            a: (0..track.len()).map(|i| MatDto::from_mat(track.a(i))).collect(),
            b: (0..track.len()).map(|i| track.b(i).to_vec()).collect(),
            regularized: track.regularized(),
        }
    }

    pub fn to_track(&self) -> Result<NormalizerTrack, IoError> {
        let a: Vec<Mat> = self
            .a
            .iter()
            .map(|m| m.to_mat())
            .collect::<Result<_, _>>()?;
        if a.len() != self.checkpoints.len() || self.b.len() != self.checkpoints.len() {
            return Err(format_err("track arrays disagree in length"));
        }
        Ok(NormalizerTrack::from_parts(
            self.checkpoints.clone(),
            a,
            self.b.clone(),
        ))
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        let mut s = serde_json::to_string_pretty(self).expect("track serializes");
        s.push('\n');
        Ok(std::fs::write(path, s)?)
    }

    pub fn read(path: &Path) -> Result<TrackFile, IoError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| format_err(format!("bad track file: {e}")))
    }
}

/// Generator certificate file: chains `extract-q` into `verify`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QFile {
    pub dim: usize,
    q: MatDto,
    pub spectral_margin: f64,
    pub consistency_residual: f64,
    /// `(t, membership margin)` pairs.
    pub membership_margins: Vec<(f64, f64)>,
}

impl QFile {
    pub fn from_certificate(cert: &GeneratorCertificate) -> QFile {
        QFile {
            dim: cert.q.dim(),
            q: MatDto::from_mat(&cert.q),
            spectral_margin: cert.spectral_margin,
            consistency_residual: cert.consistency_residual,
            membership_margins: cert.membership_margins.clone(),
        }
    }

    pub fn q_matrix(&self) -> Result<Mat, IoError> {
        let m = self.q.to_mat()?;
        if !m.is_square() || m.dim() != self.dim {
            return Err(format_err("q matrix shape disagrees with dim"));
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        let mut s = serde_json::to_string_pretty(self).expect("q file serializes");
        s.push('\n');
        Ok(std::fs::write(path, s)?)
    }

    pub fn read(path: &Path) -> Result<QFile, IoError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| format_err(format!("bad q file: {e}")))
    }
}
