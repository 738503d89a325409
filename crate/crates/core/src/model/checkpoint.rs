//! Binary checkpoint: magic `GCA1`, length-prefixed canonical config text,
//! then every parameter tensor in declaration order. All integers are u64
//! little-endian; values are f64 little-endian.
//!
//! ```text
//! "GCA1" | u64 text_len | text | u64 n_tensors |
//!   per tensor: u64 rank | u64 dims[rank] | f64 values[prod(dims)]
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::{DtiModel, ModelConfig};
use crate::autodiff::Tensor;
use crate::error::{GcaError, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"GCA1";

// Guards against allocating absurd buffers from a corrupt header.
const MAX_TEXT_LEN: u64 = 1 << 20;
const MAX_RANK: u64 = 8;

pub fn write_checkpoint<W: Write>(model: &DtiModel, mut w: W) -> std::io::Result<()> {
    let text = model.config().to_canonical_text();
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&(text.len() as u64).to_le_bytes())?;
    w.write_all(text.as_bytes())?;
    w.write_all(&(model.params().len() as u64).to_le_bytes())?;
    for t in model.params() {
        w.write_all(&(t.rank() as u64).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for &x in t.data() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()
}

pub fn save_checkpoint(model: &DtiModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| GcaError::io(path, e))?;
    write_checkpoint(model, std::io::BufWriter::new(file)).map_err(|e| GcaError::io(path, e))
}

fn corrupt(msg: impl Into<String>) -> GcaError {
    GcaError::Data(format!("corrupt checkpoint: {}", msg.into()))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|_| corrupt("truncated"))?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<DtiModel> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| corrupt("truncated"))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(corrupt("bad magic number"));
    }
    let len = read_u64(&mut r)?;
    if len > MAX_TEXT_LEN {
        return Err(corrupt(format!("config text length {len}")));
    }
    let mut text = vec![0u8; len as usize];
    r.read_exact(&mut text).map_err(|_| corrupt("truncated"))?;
    let text = String::from_utf8(text).map_err(|_| corrupt("config text is not UTF-8"))?;
    let config = ModelConfig::from_canonical_text(&text)?;
    let n = read_u64(&mut r)?;
    let mut params = Vec::new();
    for _ in 0..n {
        let rank = read_u64(&mut r)?;
        if rank == 0 || rank > MAX_RANK {
            return Err(corrupt(format!("tensor rank {rank}")));
        }
        let shape = (0..rank)
            .map(|_| read_u64(&mut r).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let count = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        let count = count.filter(|&c| c <= 1 << 32).ok_or_else(|| corrupt("tensor too large"))?;
        let mut bytes = vec![0u8; count * 8];
        r.read_exact(&mut bytes).map_err(|_| corrupt("truncated"))?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        params.push(Tensor::new(shape, data)?);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|_| corrupt("unreadable tail"))? != 0 {
        return Err(corrupt("trailing bytes"));
    }
    DtiModel::from_parts(config, params)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<DtiModel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| GcaError::io(path, e))?;
    read_checkpoint(std::io::BufReader::new(file))
}
