//! Binary chain container.
//!
//! Layout (little endian throughout):
//!
//! ```text
//! magic      8 bytes  "OHMCHAIN"
//! version    u32
//! hash       str      config hash (u32 length + UTF-8 bytes)
//! label      str      method name
//! n_burn     u64
//! n_groups   u32, then per group: name str, rows u32, cols u32, kind u8
//! n_samples  u64
//! failures   u64
//! samples    n_samples × Σ rows·cols f64, each matrix row-major
//! accepted   n_samples u8 (0 or 1)
//! energies   n_samples × (H_old, H_new) f64
//! wall       n_samples f64
//! sha256     32 bytes over everything above
//! ```

use std::path::Path;

use nalgebra::DMatrix;
use orthohmc::{ChainRecord, GroupKind, GroupSpec};
use sha2::{Digest, Sha256};

use crate::error::{CliError, ContainerError};

pub const MAGIC: &[u8; 8] = b"OHMCHAIN";
pub const VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayoutKind {
    Stiefel,
    Euclidean,
    UpperTriangular,
}

impl LayoutKind {
    fn tag(self) -> u8 {
        match self {
            LayoutKind::Stiefel => 0,
            LayoutKind::Euclidean => 1,
            LayoutKind::UpperTriangular => 2,
        }
    }

    fn from_tag(t: u8) -> Result<Self, ContainerError> {
        match t {
            0 => Ok(LayoutKind::Stiefel),
            1 => Ok(LayoutKind::Euclidean),
            2 => Ok(LayoutKind::UpperTriangular),
            other => Err(ContainerError::Malformed(format!(
                "unknown group kind {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupLayout {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub kind: LayoutKind,
}

impl GroupLayout {
    pub fn from_spec(spec: &GroupSpec) -> Self {
        let kind = match (spec.kind, spec.upper_triangular) {
            (GroupKind::Stiefel, _) => LayoutKind::Stiefel,
            (GroupKind::Euclidean, true) => LayoutKind::UpperTriangular,
            (GroupKind::Euclidean, false) => LayoutKind::Euclidean,
        };
        Self {
            name: spec.name.to_string(),
            rows: spec.rows,
            cols: spec.cols,
            kind,
        }
    }

    fn len(&self) -> usize {
        self.rows * self.cols
    }
}

/// What the container records besides the chain itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainMeta {
    pub config_hash: String,
    pub label: String,
    pub n_burn: usize,
    pub groups: Vec<GroupLayout>,
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

/// Serializes a record; fails if the samples disagree with `meta.groups`.
pub fn encode(record: &ChainRecord, meta: &ChainMeta) -> Result<Vec<u8>, CliError> {
    if !record.is_consistent() {
        return Err(CliError::Contract(
            "chain record fields have different lengths".into(),
        ));
    }
    for (t, s) in record.samples.iter().enumerate() {
        let ok = s.len() == meta.groups.len()
            && s.iter()
                .zip(&meta.groups)
                .all(|(m, g)| m.shape() == (g.rows, g.cols));
        if !ok {
            return Err(CliError::Contract(format!(
                "sample {t} does not match the declared group layout"
            )));
        }
    }
    let per_sample: usize = meta.groups.iter().map(GroupLayout::len).sum();
    let n = record.len();
    let mut buf = Vec::with_capacity(64 + n * (per_sample * 8 + 25) + DIGEST_LEN);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    put_str(&mut buf, &meta.config_hash);
    put_str(&mut buf, &meta.label);
    buf.extend_from_slice(&(meta.n_burn as u64).to_le_bytes());
    buf.extend_from_slice(&(meta.groups.len() as u32).to_le_bytes());
    for g in &meta.groups {
        put_str(&mut buf, &g.name);
        buf.extend_from_slice(&(g.rows as u32).to_le_bytes());
        buf.extend_from_slice(&(g.cols as u32).to_le_bytes());
        buf.push(g.kind.tag());
    }
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    buf.extend_from_slice(&record.failures.to_le_bytes());
    for s in &record.samples {
        for m in s {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    buf.extend_from_slice(&m[(i, j)].to_le_bytes());
                }
            }
        }
    }
    buf.extend(record.accepted.iter().map(|a| u8::from(*a)));
    for (a, b) in &record.hamiltonians {
        buf.extend_from_slice(&a.to_le_bytes());
        buf.extend_from_slice(&b.to_le_bytes());
    }
    for t in &record.wall_times {
        buf.extend_from_slice(&t.to_le_bytes());
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    Ok(buf)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8], ContainerError> {
        let end = self.pos.checked_add(k).filter(|e| *e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(ContainerError::Truncated {
                expected: (self.pos as u64).saturating_add(k as u64),
                found: self.bytes.len() as u64,
            }),
        }
    }

    fn u8(&mut self) -> Result<u8, ContainerError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, ContainerError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64, ContainerError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64, ContainerError> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn string(&mut self) -> Result<String, ContainerError> {
        let len = self.u32()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| ContainerError::Malformed("string field is not UTF-8".into()))
    }
}

fn to_usize(v: u64, what: &str) -> Result<usize, ContainerError> {
    usize::try_from(v).map_err(|_| ContainerError::Malformed(format!("{what} too large")))
}

/// Parses and verifies a container. Nothing is returned unless the whole
/// file is present and its checksum matches.
pub fn decode(bytes: &[u8]) -> Result<(ChainRecord, ChainMeta), ContainerError> {
    let head = &bytes[..bytes.len().min(MAGIC.len())];
    if head != &MAGIC[..head.len()] {
        return Err(ContainerError::BadMagic);
    }
    let mut r = Reader { bytes, pos: 0 };
    r.take(MAGIC.len())?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(ContainerError::Version {
            found: version,
            expected: VERSION,
        });
    }
    let config_hash = r.string()?;
    let label = r.string()?;
    let n_burn = to_usize(r.u64()?, "burn-in")?;
    let n_groups = r.u32()? as usize;
    let mut groups = Vec::with_capacity(n_groups.min(1024));
    for _ in 0..n_groups {
        let name = r.string()?;
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let kind = LayoutKind::from_tag(r.u8()?)?;
        groups.push(GroupLayout {
            name,
            rows,
            cols,
            kind,
        });
    }
    let n = to_usize(r.u64()?, "sample count")?;
    let failures = r.u64()?;

    let per_sample: u64 = groups.iter().map(|g| g.len() as u64).sum();
    let expected = (n as u64)
        .checked_mul(per_sample * 8 + 1 + 16 + 8)
        .and_then(|body| body.checked_add(r.pos as u64 + DIGEST_LEN as u64))
        .ok_or_else(|| ContainerError::Malformed("declared sizes overflow".into()))?;
    let found = bytes.len() as u64;
    if found < expected {
        return Err(ContainerError::Truncated { expected, found });
    }
    if found > expected {
        return Err(ContainerError::Malformed(format!(
            "{} trailing bytes",
            found - expected
        )));
    }
    let split = bytes.len() - DIGEST_LEN;
    if Sha256::digest(&bytes[..split]).as_slice() != &bytes[split..] {
        return Err(ContainerError::Checksum);
    }

    let mut record = ChainRecord::with_capacity(n);
    record.failures = failures;
    for _ in 0..n {
        let mut sample = Vec::with_capacity(groups.len());
        for g in &groups {
            let mut m = DMatrix::zeros(g.rows, g.cols);
            for i in 0..g.rows {
                for j in 0..g.cols {
                    m[(i, j)] = r.f64()?;
                }
            }
            sample.push(m);
        }
        record.samples.push(sample);
    }
    for _ in 0..n {
        record.accepted.push(match r.u8()? {
            0 => false,
            1 => true,
            other => {
                return Err(ContainerError::Malformed(format!(
                    "acceptance flag {other} is not 0 or 1"
                )))
            }
        });
    }
    for _ in 0..n {
        let a = r.f64()?;
        let b = r.f64()?;
        record.hamiltonians.push((a, b));
    }
    for _ in 0..n {
        record.wall_times.push(r.f64()?);
    }
    Ok((
        record,
        ChainMeta {
            config_hash,
            label,
            n_burn,
            groups,
        },
    ))
}

pub fn export_chain(record: &ChainRecord, meta: &ChainMeta, path: &Path) -> Result<(), CliError> {
    let bytes = encode(record, meta)?;
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, &bytes).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn import_chain(path: &Path) -> Result<(ChainRecord, ChainMeta), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes).map_err(|source| CliError::Container {
        path: path.to_path_buf(),
        source,
    })
}
