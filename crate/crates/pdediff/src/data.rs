//! Dataset synthesis, Global Max-Absolute normalization, and the on-disk
//! formats for datasets, fields, and versioned binary containers.
//!
//! Formats:
//! * dataset — a directory holding `meta.json` (version, equation, grid, n,
//!   seed, scale, coefficients, payload checksum) plus `samples.bin`, raw
//!   little-endian f32 values, sample-major then axis-0 major;
//! * field — one file: 36-byte header (`PDEF`, version, nx, ny, lx, ly,
//!   payload crc32) followed by nx*ny little-endian f32 values;
//! * container — generic framing (`magic`, version, JSON descriptor,
//!   little-endian f64 payload, crc32) used for checkpoints, which
//!   round-trip bit-exactly.
//!
//! All writes go through a temp file and an atomic rename.

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::problem::PdeProblem;
use crate::rng::derive_stream;
use crate::solve;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const DATASET_FORMAT_VERSION: u32 = 1;
pub const FIELD_FORMAT_VERSION: u32 = 1;
pub const FIELD_MAGIC: [u8; 4] = *b"PDEF";

/// Which equation family a dataset was generated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EquationKind {
    Poisson,
    Heat,
    Burgers,
}

impl EquationKind {
    pub fn name(&self) -> &'static str {
        match self {
            EquationKind::Poisson => "poisson",
            EquationKind::Heat => "heat",
            EquationKind::Burgers => "burgers",
        }
    }

    /// Training coefficient range used for dataset sampling.
    pub fn default_coef_range(&self) -> (f64, f64) {
        match self {
            EquationKind::Poisson => (1.0, 2.0),
            EquationKind::Heat => (0.02, 0.05),
            EquationKind::Burgers => (0.01, 0.03),
        }
    }

    /// The canonical benchmark problem at one coefficient.
    pub fn problem(&self, coefficient: f64, grid: GridSpec) -> Result<PdeProblem> {
        match self {
            EquationKind::Poisson => PdeProblem::poisson(coefficient, grid),
            EquationKind::Heat => PdeProblem::heat(coefficient, grid),
            EquationKind::Burgers => PdeProblem::burgers(coefficient, grid),
        }
    }
}

impl std::str::FromStr for EquationKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "poisson" => Ok(EquationKind::Poisson),
            "heat" => Ok(EquationKind::Heat),
            "burgers" => Ok(EquationKind::Burgers),
            other => Err(Error::InvalidParameter(format!(
                "unknown equation '{other}' (expected poisson|heat|burgers)"
            ))),
        }
    }
}

/// A set of solution fields with the coefficients they were solved at.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub equation: EquationKind,
    pub grid: GridSpec,
    pub coefficients: Vec<f64>,
    /// Flat values, sample-major then axis-0 major: `samples[s*nx*ny ..]`.
    pub values: Vec<f64>,
    /// Global max-abs divisor already applied to `values` (1 before
    /// normalization).
    pub scale: f64,
    pub seed: u64,
    pub version: u32,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn sample_field(&self, i: usize) -> Field {
        Field::from_raw(self.grid, self.sample(i).to_vec())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Solve `n` canonical problems at coefficients drawn i.i.d. uniform from
/// `[coef_min, coef_max]`, one derived RNG stream per sample. Deterministic
/// given the seed; samples solve in parallel.
pub fn generate_dataset(
    equation: EquationKind,
    n: usize,
    coef_min: f64,
    coef_max: f64,
    grid: GridSpec,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidParameter("dataset size must be >= 1".into()));
    }
    if !(coef_min < coef_max) || !(coef_min > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "coefficient range [{coef_min}, {coef_max}] must be increasing and positive"
        )));
    }
    let coefficients: Vec<f64> = (0..n)
        .map(|i| {
            let mut rng = derive_stream(seed, i as u64);
            rng.random_range(coef_min..coef_max)
        })
        .collect();

    let fields: Vec<Field> = coefficients
        .par_iter()
        .enumerate()
        .map(|(i, &c)| {
            let p = equation.problem(c, grid)?;
            solve::reference_solution(&p).map_err(|e| match e {
                Error::SolverDiverged { iterations, .. } => Error::InvalidParameter(format!(
                    "sample {i} (coefficient {c}) failed to converge after {iterations} iterations"
                )),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut values = Vec::with_capacity(n * grid.len());
    for f in fields {
        values.extend_from_slice(f.values());
    }
    Ok(Dataset {
        equation,
        grid,
        coefficients,
        values,
        scale: 1.0,
        seed,
        version: DATASET_FORMAT_VERSION,
    })
}

/// Divide all values by the global max-abs and record it. Idempotent: the
/// second application sees a peak of exactly 1.
pub fn normalize(mut d: Dataset) -> Result<Dataset> {
    if d.is_empty() {
        return Err(Error::DegenerateDataset);
    }
    let s = d.max_abs();
    if s == 0.0 {
        return Err(Error::DegenerateDataset);
    }
    for v in &mut d.values {
        *v /= s;
    }
    d.scale = s;
    Ok(d)
}

/// Undo [`normalize`]: multiply values back by the recorded scale.
pub fn denormalize(mut d: Dataset) -> Dataset {
    for v in &mut d.values {
        *v *= d.scale;
    }
    d.scale = 1.0;
    d
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetMeta {
    version: u32,
    equation: EquationKind,
    grid: GridSpec,
    n: usize,
    seed: u64,
    scale: f64,
    coefficients: Vec<f64>,
    payload_crc32: u32,
}

/// Write `bytes` to `path` via a temp file and atomic rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = PathBuf::from(dir);
    tmp.push(format!(
        ".{}.tmp-{}",
        path.file_name().and_then(|s| s.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn f32_payload(values: &[f64]) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    bytes
}

fn parse_f32_payload(bytes: &[u8], expected: usize, what: &str) -> Result<Vec<f64>> {
    if bytes.len() != expected * 4 {
        return Err(Error::Format(format!(
            "{what}: payload is {} bytes, expected {}",
            bytes.len(),
            expected * 4
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

/// Save a dataset as `dir/meta.json` + `dir/samples.bin`.
pub fn save_dataset(d: &Dataset, dir: &Path) -> Result<()> {
    let payload = f32_payload(&d.values);
    let meta = DatasetMeta {
        version: d.version,
        equation: d.equation,
        grid: d.grid,
        n: d.len(),
        seed: d.seed,
        scale: d.scale,
        coefficients: d.coefficients.clone(),
        payload_crc32: crc32fast::hash(&payload),
    };
    atomic_write(&dir.join("samples.bin"), &payload)?;
    atomic_write(&dir.join("meta.json"), &serde_json::to_vec_pretty(&meta)?)?;
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let meta: DatasetMeta = serde_json::from_slice(&fs::read(dir.join("meta.json"))?)?;
    if meta.version != DATASET_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "dataset version {} unsupported (expected {DATASET_FORMAT_VERSION})",
            meta.version
        )));
    }
    if meta.coefficients.len() != meta.n {
        return Err(Error::Format(format!(
            "dataset metadata lists {} coefficients for n = {}",
            meta.coefficients.len(),
            meta.n
        )));
    }
    let payload = fs::read(dir.join("samples.bin"))?;
    if crc32fast::hash(&payload) != meta.payload_crc32 {
        return Err(Error::Format("dataset payload checksum mismatch".into()));
    }
    let values = parse_f32_payload(&payload, meta.n * meta.grid.len(), "dataset")?;
    Ok(Dataset {
        equation: meta.equation,
        grid: meta.grid,
        coefficients: meta.coefficients,
        values,
        scale: meta.scale,
        seed: meta.seed,
        version: meta.version,
    })
}

/// Fixed field-file header size in bytes.
pub const FIELD_HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8 + 8 + 4;

/// Save a single field: fixed binary header + f32 payload.
pub fn save_field(f: &Field, path: &Path) -> Result<()> {
    let spec = f.spec();
    let payload = f32_payload(f.values());
    let mut bytes = Vec::with_capacity(FIELD_HEADER_LEN + payload.len());
    bytes.extend_from_slice(&FIELD_MAGIC);
    bytes.extend_from_slice(&FIELD_FORMAT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(spec.nx as u32).to_le_bytes());
    bytes.extend_from_slice(&(spec.ny as u32).to_le_bytes());
    bytes.extend_from_slice(&spec.lx.to_le_bytes());
    bytes.extend_from_slice(&spec.ly.to_le_bytes());
    bytes.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    bytes.extend_from_slice(&payload);
    atomic_write(path, &bytes)
}

pub fn load_field(path: &Path) -> Result<Field> {
    let bytes = fs::read(path)?;
    if bytes.len() < FIELD_HEADER_LEN {
        return Err(Error::Format(format!(
            "field file truncated: {} bytes < {FIELD_HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if bytes[0..4] != FIELD_MAGIC {
        return Err(Error::Format("field file has wrong magic bytes".into()));
    }
    let u32_at =
        |o: usize| u32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]);
    let f64_at = |o: usize| {
        let mut b = [0u8; 8];
        b.copy_from_slice(&bytes[o..o + 8]);
        f64::from_le_bytes(b)
    };
    let version = u32_at(4);
    if version != FIELD_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "field format version {version} unsupported (expected {FIELD_FORMAT_VERSION})"
        )));
    }
    let nx = u32_at(8) as usize;
    let ny = u32_at(12) as usize;
    let lx = f64_at(16);
    let ly = f64_at(24);
    let crc = u32_at(32);
    let payload = &bytes[FIELD_HEADER_LEN..];
    if crc32fast::hash(payload) != crc {
        return Err(Error::Format("field payload checksum mismatch".into()));
    }
    let spec = GridSpec::new(nx, ny, lx, ly)?;
    let values = parse_f32_payload(payload, spec.len(), "field")?;
    Field::from_values(spec, values)
}

/// Generic versioned container: magic, version, JSON descriptor, f64
/// payload, crc32 over descriptor + payload. Round-trips bit-exactly.
pub fn save_container(
    path: &Path,
    magic: [u8; 4],
    version: u32,
    descriptor_json: &[u8],
    payload: &[f64],
) -> Result<()> {
    let mut body = Vec::with_capacity(descriptor_json.len() + payload.len() * 8);
    body.extend_from_slice(descriptor_json);
    for v in payload {
        body.extend_from_slice(&v.to_le_bytes());
    }
    let mut bytes = Vec::with_capacity(20 + body.len());
    bytes.extend_from_slice(&magic);
    bytes.extend_from_slice(&version.to_le_bytes());
    bytes.extend_from_slice(&(descriptor_json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&crc32fast::hash(&body).to_le_bytes());
    bytes.extend_from_slice(&body);
    atomic_write(path, &bytes)
}

pub fn load_container(path: &Path, magic: [u8; 4], version: u32) -> Result<(Vec<u8>, Vec<f64>)> {
    let bytes = fs::read(path)?;
    if bytes.len() < 20 {
        return Err(Error::Format("container truncated".into()));
    }
    if bytes[0..4] != magic {
        return Err(Error::Format("container has wrong magic bytes".into()));
    }
    let got_version = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]);
    if got_version != version {
        return Err(Error::Format(format!(
            "container version {got_version} unsupported (expected {version})"
        )));
    }
    let mut b8 = [0u8; 8];
    b8.copy_from_slice(&bytes[8..16]);
    let json_len = u64::from_le_bytes(b8) as usize;
    let crc = u32::from_le_bytes([bytes[16], bytes[17], bytes[18], bytes[19]]);
    let body = &bytes[20..];
    if body.len() < json_len || (body.len() - json_len) % 8 != 0 {
        return Err(Error::Format("container body truncated".into()));
    }
    if crc32fast::hash(body) != crc {
        return Err(Error::Format("container checksum mismatch".into()));
    }
    let descriptor = body[..json_len].to_vec();
    let payload = body[json_len..]
        .chunks_exact(8)
        .map(|c| {
            let mut b = [0u8; 8];
            b.copy_from_slice(c);
            f64::from_le_bytes(b)
        })
        .collect();
    Ok((descriptor, payload))
}
