//! The KCX container.
//!
//! ```text
//! "KCX1" | u32 version | u64 len | JSON file header
//! then per section:
//!   8-byte tag (ASCII, zero padded) | u64 len | JSON section header | u64 len | payload
//! ```
//!
//! Integers and floats are little-endian. Sections:
//!
//! * `ENSEMBLE`: header `{n, m, seed, dtype: "f64"}`; payload is `m` row-major
//!   `n×n` matrices of interleaved `(re, im)` pairs.
//! * `DATASET`: header `{meta, split, records, dtype: "f32"}`; payload is, per
//!   record, `u32 sample_id, u32 beta_index, u32 time_index`, then `4·N` f32
//!   features (channel-major) and the f32 target.
//!
//! Readers skip sections with unknown tags.

use std::path::Path;

use krylov_core::dataset::{Dataset, DatasetMeta, Split, CHANNELS};
use krylov_core::ensemble::GueEnsemble;
use krylov_core::numerics::ComplexMatrix;
use krylov_core::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::fsutil;

pub const MAGIC: &[u8; 4] = b"KCX1";
pub const VERSION: u32 = 1;
pub const ENSEMBLE_TAG: &str = "ENSEMBLE";
pub const DATASET_TAG: &str = "DATASET";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FileHeader {
    sections: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EnsembleHeader {
    n: usize,
    m: usize,
    seed: u64,
    dtype: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DatasetHeader {
    meta: DatasetMeta,
    split: Option<Split>,
    records: usize,
    dtype: String,
}

/// Raw ensemble matrices as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSection {
    pub n: usize,
    pub seed: u64,
    pub matrices: Vec<ComplexMatrix>,
}

impl EnsembleSection {
    pub fn from_ensemble(e: &GueEnsemble) -> Self {
        Self { n: e.n, seed: e.seed, matrices: e.samples.iter().map(|s| s.matrix().clone()).collect() }
    }

    /// Re-diagonalises the stored matrices.
    pub fn into_ensemble(self) -> Result<GueEnsemble> {
        let mut e = GueEnsemble::from_matrices(self.seed, self.matrices)?;
        e.n = self.n;
        Ok(e)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KcxFile {
    pub ensemble: Option<EnsembleSection>,
    pub dataset: Option<Dataset>,
}

fn tag_bytes(tag: &str) -> [u8; 8] {
    let mut out = [0u8; 8];
    out[..tag.len()].copy_from_slice(tag.as_bytes());
    out
}

fn put_json(buf: &mut Vec<u8>, value: &impl Serialize) {
    let json = serde_json::to_vec(value).expect("serialisable header");
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
}

pub fn encode(file: &KcxFile) -> Vec<u8> {
    encode_parts(file.ensemble.as_ref(), file.dataset.as_ref())
}

pub fn encode_parts(ensemble: Option<&EnsembleSection>, dataset: Option<&Dataset>) -> Vec<u8> {
    let mut sections = Vec::new();
    if ensemble.is_some() {
        sections.push(ENSEMBLE_TAG.to_string());
    }
    if dataset.is_some() {
        sections.push(DATASET_TAG.to_string());
    }
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    put_json(&mut buf, &FileHeader { sections });

    if let Some(e) = ensemble {
        buf.extend_from_slice(&tag_bytes(ENSEMBLE_TAG));
        let header =
            EnsembleHeader { n: e.n, m: e.matrices.len(), seed: e.seed, dtype: "f64".into() };
        put_json(&mut buf, &header);
        let mut payload = Vec::with_capacity(e.matrices.len() * e.n * e.n * 16);
        for m in &e.matrices {
            for z in m.to_row_major() {
                payload.extend_from_slice(&z.re.to_le_bytes());
                payload.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        buf.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        buf.extend_from_slice(&payload);
    }
    if let Some(d) = dataset {
        buf.extend_from_slice(&tag_bytes(DATASET_TAG));
        let header = DatasetHeader {
            meta: d.meta.clone(),
            split: d.split.clone(),
            records: d.len(),
            dtype: "f32".into(),
        };
        put_json(&mut buf, &header);
        let width = d.record_width();
        let payload_len = d.len() * (12 + 4 * width + 4);
        buf.extend_from_slice(&(payload_len as u64).to_le_bytes());
        buf.reserve(payload_len);
        for r in d.records() {
            buf.extend_from_slice(&r.sample_id.to_le_bytes());
            buf.extend_from_slice(&r.beta_index.to_le_bytes());
            buf.extend_from_slice(&r.time_index.to_le_bytes());
            for x in r.features {
                buf.extend_from_slice(&x.to_le_bytes());
            }
            buf.extend_from_slice(&r.target.to_le_bytes());
        }
    }
    buf
}

/// Byte cursor that reports where things went wrong.
struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(LabError::format(
                self.pos as u64,
                format!("truncated {what}: need {n} bytes, {} left", self.data.len() - self.pos),
            ));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn len(&mut self, what: &str) -> Result<usize> {
        let at = self.pos;
        let n = self.u64(what)?;
        usize::try_from(n).map_err(|_| LabError::format(at as u64, format!("{what} length {n} too large")))
    }

    fn json<T: for<'de> Deserialize<'de>>(&mut self, what: &str) -> Result<T> {
        let n = self.len(what)?;
        let at = self.pos;
        let bytes = self.take(n, what)?;
        serde_json::from_slice(bytes)
            .map_err(|e| LabError::format(at as u64, format!("bad {what} JSON: {e}")))
    }
}

pub fn decode(data: &[u8]) -> Result<KcxFile> {
    let mut r = Reader { data, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(LabError::format(0, format!("bad magic {magic:?}, expected \"KCX1\"")));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(LabError::format(4, format!("unsupported version {version}")));
    }
    let header: FileHeader = r.json("file header")?;
    let mut file = KcxFile::default();
    for _ in 0..header.sections.len() {
        let tag_at = r.pos as u64;
        let raw = r.take(8, "section tag")?;
        let tag = std::str::from_utf8(raw)
            .map_err(|_| LabError::format(tag_at, "section tag is not ASCII"))?
            .trim_end_matches('\0');
        match tag {
            ENSEMBLE_TAG => {
                let h: EnsembleHeader = r.json("ensemble header")?;
                let at = r.pos as u64;
                let len = r.len("ensemble payload")?;
                let payload = r.take(len, "ensemble payload")?;
                file.ensemble = Some(decode_ensemble(&h, payload, at)?);
            }
            DATASET_TAG => {
                let h: DatasetHeader = r.json("dataset header")?;
                let at = r.pos as u64;
                let len = r.len("dataset payload")?;
                let payload = r.take(len, "dataset payload")?;
                file.dataset = Some(decode_dataset(h, payload, at)?);
            }
            _ => {
                r.len("section header").and_then(|n| r.take(n, "section header"))?;
                r.len("section payload").and_then(|n| r.take(n, "section payload"))?;
            }
        }
    }
    if r.pos != data.len() {
        return Err(LabError::format(r.pos as u64, "trailing bytes after last section"));
    }
    Ok(file)
}

fn decode_ensemble(h: &EnsembleHeader, payload: &[u8], at: u64) -> Result<EnsembleSection> {
    if h.dtype != "f64" {
        return Err(LabError::format(at, format!("unsupported ensemble dtype {}", h.dtype)));
    }
    let per = h.n * h.n * 16;
    if payload.len() != h.m * per {
        return Err(LabError::format(
            at,
            format!("ensemble payload is {} bytes, expected {}", payload.len(), h.m * per),
        ));
    }
    let f = |b: &[u8]| f64::from_le_bytes(b.try_into().unwrap());
    let matrices = payload
        .chunks_exact(per.max(1))
        .take(h.m)
        .map(|m| {
            let z: Vec<Complex64> =
                m.chunks_exact(16).map(|c| Complex64::new(f(&c[..8]), f(&c[8..]))).collect();
            ComplexMatrix::from_row_major(h.n, h.n, &z)
        })
        .collect::<krylov_core::Result<Vec<_>>>()?;
    Ok(EnsembleSection { n: h.n, seed: h.seed, matrices })
}

fn decode_dataset(h: DatasetHeader, payload: &[u8], at: u64) -> Result<Dataset> {
    if h.dtype != "f32" {
        return Err(LabError::format(at, format!("unsupported dataset dtype {}", h.dtype)));
    }
    let width = CHANNELS * h.meta.n;
    let per = 12 + 4 * width + 4;
    if payload.len() != h.records * per {
        return Err(LabError::format(
            at,
            format!("dataset payload is {} bytes, expected {}", payload.len(), h.records * per),
        ));
    }
    let u = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
    let f = |b: &[u8]| f32::from_le_bytes(b.try_into().unwrap());
    let mut features = Vec::with_capacity(h.records * width);
    let (mut targets, mut samples, mut betas, mut times) = (
        Vec::with_capacity(h.records),
        Vec::with_capacity(h.records),
        Vec::with_capacity(h.records),
        Vec::with_capacity(h.records),
    );
    for rec in payload.chunks_exact(per) {
        samples.push(u(&rec[0..4]));
        betas.push(u(&rec[4..8]));
        times.push(u(&rec[8..12]));
        features.extend(rec[12..12 + 4 * width].chunks_exact(4).map(f));
        targets.push(f(&rec[per - 4..]));
    }
    Dataset::from_parts(h.meta, h.split, features, targets, samples, betas, times)
        .map_err(|e| LabError::format(at, e.to_string()))
}

pub fn write_kcx(path: &Path, file: &KcxFile) -> Result<()> {
    fsutil::atomic_write(path, &encode(file))
}

pub fn read_kcx(path: &Path) -> Result<KcxFile> {
    decode(&fsutil::read(path)?)
}

pub fn write_ensemble(path: &Path, e: &GueEnsemble) -> Result<()> {
    write_kcx(path, &KcxFile { ensemble: Some(EnsembleSection::from_ensemble(e)), dataset: None })
}

pub fn read_ensemble(path: &Path) -> Result<GueEnsemble> {
    read_kcx(path)?
        .ensemble
        .ok_or_else(|| LabError::format(0, format!("{} has no ENSEMBLE section", path.display())))?
        .into_ensemble()
}

pub fn write_dataset(path: &Path, d: &Dataset) -> Result<()> {
    fsutil::atomic_write(path, &encode_parts(None, Some(d)))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    read_kcx(path)?
        .dataset
        .ok_or_else(|| LabError::format(0, format!("{} has no DATASET section", path.display())))
}
