//! Little-endian binary formats.
//!
//! SQD1 dataset: magic `SQD1`, then u32 version (1), sample count, state
//! width and question count; then per sample the state features as f64
//! followed by one u8 label per question.
//!
//! SQM1 checkpoint: magic `SQM1`, u32 version (1), u32 tensor count; per
//! tensor a u16 name length, the UTF-8 name, u32 rank, u32 dims and f64
//! values. The update index and config digest travel as the tensors
//! `meta.update` and `meta.config_digest`, each a pair of f64-encoded
//! 32-bit halves (high, low).

use std::fs;
use std::path::Path;

use semexp_core::classifier::{Dataset, DatasetMeta, LabeledSample};
use semexp_core::nn::ParamTensor;

use crate::error::{io_err, HarnessError, Result};

pub const DATASET_MAGIC: &[u8; 4] = b"SQD1";
pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SQM1";
pub const FORMAT_VERSION: u32 = 1;

const META_UPDATE: &str = "meta.update";
const META_DIGEST: &str = "meta.config_digest";

/// Cursor that reports the offset of the first unreadable byte.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(HarnessError::Integrity {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return self.fail(format!("truncated while reading {what}"));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        let found = self.take(4, "magic")?;
        if found != magic {
            self.pos = 0;
            return self.fail(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(found),
                String::from_utf8_lossy(magic)
            ));
        }
        let version = self.u32("version")?;
        if version != FORMAT_VERSION {
            self.pos -= 4;
            return self.fail(format!("unsupported version {version}"));
        }
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return self.fail(format!("{} trailing bytes", self.bytes.len() - self.pos));
        }
        Ok(())
    }
}

fn u32_field(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| HarnessError::Usage(format!("{what} {v} does not fit in 32 bits")))
}

pub fn encode_dataset(dataset: &Dataset) -> Result<Vec<u8>> {
    dataset.validate()?;
    let dim = dataset.state_dim();
    let q = dataset.meta.num_questions;
    let mut out = Vec::with_capacity(20 + dataset.len() * (8 * dim + q));
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&u32_field(dataset.len(), "sample count")?.to_le_bytes());
    out.extend_from_slice(&u32_field(dim, "state width")?.to_le_bytes());
    out.extend_from_slice(&u32_field(q, "question count")?.to_le_bytes());
    for s in &dataset.samples {
        for v in &s.state_features {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&s.labels);
    }
    Ok(out)
}

/// The seed and config digest are not stored and decode as zero.
pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut r = Reader::new(bytes);
    r.header(DATASET_MAGIC)?;
    let n = r.u32("sample count")? as usize;
    let dim = r.u32("state width")? as usize;
    if dim % 2 != 0 {
        r.pos -= 4;
        return r.fail(format!("state width {dim} is odd"));
    }
    let q = r.u32("question count")? as usize;
    let per_sample = 8 * dim + q;
    if per_sample == 0 || (bytes.len() - r.pos) / per_sample < n {
        return r.fail(format!("file too short for {n} samples"));
    }
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let state_features = (0..dim)
            .map(|_| r.f64("state feature"))
            .collect::<Result<Vec<_>>>()?;
        let mut labels = Vec::with_capacity(q);
        for _ in 0..q {
            let b = r.u8("label")?;
            if b > 1 {
                r.pos -= 1;
                return r.fail(format!("sample {i} has label byte {b}"));
            }
            labels.push(b);
        }
        samples.push(LabeledSample { state_features, labels });
    }
    r.finish()?;
    Ok(Dataset {
        samples,
        meta: DatasetMeta {
            num_objects: dim / 2,
            num_questions: q,
            seed: 0,
            config_digest: 0,
        },
    })
}

pub fn save_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    write_file(path, &encode_dataset(dataset)?)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    decode_dataset(&fs::read(path).map_err(io_err(path))?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub tensors: Vec<ParamTensor>,
    pub update: Option<u64>,
    pub config_digest: Option<u64>,
}

impl Checkpoint {
    pub fn new(tensors: Vec<ParamTensor>) -> Self {
        Self {
            tensors,
            update: None,
            config_digest: None,
        }
    }
}

fn split_u64(name: &str, v: u64) -> ParamTensor {
    ParamTensor::new(name, vec![2], vec![(v >> 32) as f64, (v & 0xFFFF_FFFF) as f64]).expect("two values")
}

fn join_u64(t: &ParamTensor) -> Option<u64> {
    let [hi, lo] = t.values[..] else { return None };
    let ok = |x: f64| x >= 0.0 && x <= u32::MAX as f64 && x.fract() == 0.0;
    (ok(hi) && ok(lo) && t.shape == [2]).then(|| ((hi as u64) << 32) | lo as u64)
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    if let Some(t) = ckpt.tensors.iter().find(|t| t.name.starts_with("meta.")) {
        return Err(HarnessError::Usage(format!("tensor name {} is reserved", t.name)));
    }
    let mut tensors: Vec<ParamTensor> = Vec::new();
    if let Some(u) = ckpt.update {
        tensors.push(split_u64(META_UPDATE, u));
    }
    if let Some(d) = ckpt.config_digest {
        tensors.push(split_u64(META_DIGEST, d));
    }
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&u32_field(tensors.len() + ckpt.tensors.len(), "tensor count")?.to_le_bytes());
    for t in tensors.iter().chain(&ckpt.tensors) {
        let name = t.name.as_bytes();
        let len = u16::try_from(name.len())
            .map_err(|_| HarnessError::Usage(format!("tensor name {} is too long", t.name)))?;
        if t.shape.iter().product::<usize>() != t.values.len() {
            return Err(HarnessError::Usage(format!("tensor {} has inconsistent shape", t.name)));
        }
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name);
        out.extend_from_slice(&u32_field(t.shape.len(), "rank")?.to_le_bytes());
        for &d in &t.shape {
            out.extend_from_slice(&u32_field(d, "dimension")?.to_le_bytes());
        }
        for v in &t.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader::new(bytes);
    r.header(CHECKPOINT_MAGIC)?;
    let count = r.u32("tensor count")? as usize;
    let mut ckpt = Checkpoint::new(Vec::new());
    for _ in 0..count {
        let start = r.pos;
        let len = r.u16("name length")? as usize;
        let name = match std::str::from_utf8(r.take(len, "name")?) {
            Ok(s) => s.to_string(),
            Err(_) => {
                r.pos = start + 2;
                return r.fail("tensor name is not UTF-8");
            }
        };
        let rank = r.u32("rank")? as usize;
        let mut shape = Vec::with_capacity(rank.min(16));
        for _ in 0..rank {
            shape.push(r.u32("dimension")? as usize);
        }
        let size = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        match size {
            Some(n) if n <= (bytes.len() - r.pos) / 8 => {
                let values = (0..n).map(|_| r.f64("value")).collect::<Result<Vec<_>>>()?;
                let t = ParamTensor { name, shape, values };
                match t.name.as_str() {
                    META_UPDATE | META_DIGEST => {
                        let Some(v) = join_u64(&t) else {
                            r.pos = start;
                            return r.fail(format!("malformed {}", t.name));
                        };
                        if t.name == META_UPDATE {
                            ckpt.update = Some(v);
                        } else {
                            ckpt.config_digest = Some(v);
                        }
                    }
                    _ => ckpt.tensors.push(t),
                }
            }
            _ => return r.fail(format!("truncated values for tensor {name}")),
        }
    }
    r.finish()?;
    Ok(ckpt)
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    write_file(path, &encode_checkpoint(ckpt)?)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&fs::read(path).map_err(io_err(path))?)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}
