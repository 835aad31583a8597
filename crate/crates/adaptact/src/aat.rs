//! `.aat` tensor files and labelled datasets.
//!
//! Layout: magic `AAT1`, `u32` rank, `rank` x `u32` dims, `u8` dtype (0 = FP32),
//! then the little-endian payload. All integers are little-endian.
//!
//! A dataset is an `.aat` tensor of shape `[N, ...]` holding `N` inputs, with
//! labels in a sibling `.labels` file (same stem), one integer per line.

use std::fs;
use std::path::{Path, PathBuf};

use adaptact_core::{Dataset, Tensor};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"AAT1";
pub const DTYPE_F32: u8 = 0;

pub fn encode(t: &Tensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(9 + 4 * t.shape().len() + 4 * t.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
    for &d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.push(DTYPE_F32);
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Parses an `.aat` image. `path` is only used in error messages.
pub fn decode(bytes: &[u8], path: &Path) -> Result<Tensor> {
    let bad = |reason: String| Error::format(path, reason);
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = bytes
            .get(pos..pos + n)
            .ok_or_else(|| bad(format!("truncated header at byte {pos}")))?;
        pos += n;
        Ok(s)
    };
    if take(4)? != MAGIC {
        return Err(bad("bad magic, expected AAT1".into()));
    }
    let u32_at = |s: &[u8]| u32::from_le_bytes([s[0], s[1], s[2], s[3]]) as usize;
    let rank = u32_at(take(4)?);
    if rank == 0 || rank > 8 {
        return Err(bad(format!("unsupported rank {rank}")));
    }
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(u32_at(take(4)?));
    }
    let dtype = take(1)?[0];
    if dtype != DTYPE_F32 {
        return Err(bad(format!("unsupported dtype code {dtype}")));
    }
    let n = shape
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .ok_or_else(|| bad(format!("shape {shape:?} overflows")))?;
    let payload = &bytes[pos..];
    if payload.len() != n * 4 {
        return Err(bad(format!(
            "payload is {} bytes, shape {shape:?} needs {}",
            payload.len(),
            n * 4
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Tensor::new(shape, data).map_err(|e| bad(e.to_string()))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

pub fn write_tensor(path: impl AsRef<Path>, t: &Tensor) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(t)).map_err(|e| Error::io(path, e))
}

pub fn labels_path(dataset: &Path) -> PathBuf {
    dataset.with_extension("labels")
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse()
                .map_err(|_| Error::format(path, format!("line {}: bad label {l:?}", i + 1)))
        })
        .collect()
}

/// Splits a batched tensor `[N, ...]` into `N` tensors of shape `[...]`.
pub fn unbatch(batch: &Tensor) -> Result<Vec<Tensor>> {
    let shape = batch.shape();
    if shape.len() < 2 {
        return Err(Error::Usage(format!(
            "dataset tensor must be [N, ...], got shape {shape:?}"
        )));
    }
    let item: usize = shape[1..].iter().product();
    batch
        .data()
        .chunks_exact(item)
        .map(|c| Tensor::new(shape[1..].to_vec(), c.to_vec()).map_err(Error::from))
        .collect()
}

pub fn read_inputs(path: impl AsRef<Path>) -> Result<Vec<Tensor>> {
    unbatch(&read_tensor(path)?)
}

/// Loads inputs plus labels from the sibling `.labels` file.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let inputs = read_inputs(path)?;
    let lpath = labels_path(path);
    let labels = read_labels(&lpath)?;
    if labels.len() != inputs.len() {
        return Err(Error::format(
            &lpath,
            format!("{} labels for {} inputs", labels.len(), inputs.len()),
        ));
    }
    Ok(Dataset::new(inputs, labels)?)
}

/// Writes `inputs` as one `[N, ...]` tensor and, when given, the labels file.
pub fn write_dataset(
    path: impl AsRef<Path>,
    inputs: &[Tensor],
    labels: Option<&[usize]>,
) -> Result<()> {
    let path = path.as_ref();
    let first = inputs
        .first()
        .ok_or_else(|| Error::Usage("cannot write an empty dataset".into()))?;
    let mut shape = vec![inputs.len()];
    shape.extend_from_slice(first.shape());
    let mut data = Vec::with_capacity(inputs.len() * first.len());
    for x in inputs {
        if x.shape() != first.shape() {
            return Err(Error::Usage(format!(
                "mixed input shapes {:?} and {:?}",
                first.shape(),
                x.shape()
            )));
        }
        data.extend_from_slice(x.data());
    }
    write_tensor(path, &Tensor::new(shape, data)?)?;
    if let Some(labels) = labels {
        let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
        let lpath = labels_path(path);
        fs::write(&lpath, text).map_err(|e| Error::io(&lpath, e))?;
    }
    Ok(())
}
