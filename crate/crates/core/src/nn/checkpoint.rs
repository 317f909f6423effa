//! Binary parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes   "LSTPNN01"
//! count    u32       number of arrays
//! repeated count times:
//!   name_len u32, name  UTF-8 bytes
//!   rows     u32, cols  u32
//!   data     rows·cols × f64, row-major
//! ```
//!
//! Arrays appear in parameter-visit order. Loading checks every name and
//! shape against the receiving model.

use std::io::{Read, Write};
use std::path::Path;

use super::params::Parameters;
use super::tensor::Tensor2;
use crate::error::{Error, Result};

pub const NN_MAGIC: &[u8; 8] = b"LSTPNN01";

pub fn write_arrays<W: Write>(mut w: W, arrays: &[(String, Tensor2)]) -> Result<()> {
    w.write_all(NN_MAGIC)?;
    w.write_all(&(arrays.len() as u32).to_le_bytes())?;
    for (name, t) in arrays {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.rows() as u32).to_le_bytes())?;
        w.write_all(&(t.cols() as u32).to_le_bytes())?;
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_arrays<R: Read>(mut r: R) -> Result<Vec<(String, Tensor2)>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != NN_MAGIC {
        return Err(Error::Format("not an LSTPNN01 checkpoint".into()));
    }
    let count = read_u32(&mut r)?;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| Error::Format("array name is not UTF-8".into()))?;
        let rows = read_u32(&mut r)? as usize;
        let cols = read_u32(&mut r)? as usize;
        let mut data = vec![0.0; rows * cols];
        let mut b = [0u8; 8];
        for v in &mut data {
            r.read_exact(&mut b)?;
            *v = f64::from_le_bytes(b);
        }
        out.push((name, Tensor2::from_vec(rows, cols, data)?));
    }
    Ok(out)
}

pub fn save_params<P: Parameters + ?Sized>(path: &Path, p: &P) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_arrays(&mut w, &super::params::named_tensors(p))?;
    w.flush()?;
    Ok(())
}

/// Fills `p` from a checkpoint whose names and shapes must match exactly.
pub fn load_params<P: Parameters + ?Sized>(path: &Path, p: &mut P) -> Result<()> {
    let file = std::fs::File::open(path)?;
    let arrays = read_arrays(std::io::BufReader::new(file))?;
    let mut it = arrays.into_iter();
    let mut err = None;
    p.visit_mut("", &mut |name, t| {
        if err.is_some() {
            return;
        }
        match it.next() {
            Some((n, a)) if n == name && a.shape() == t.shape() => *t = a,
            Some((n, a)) => {
                err = Some(Error::Format(format!(
                    "checkpoint array `{n}` {:?} does not match `{name}` {:?}",
                    a.shape(),
                    t.shape()
                )))
            }
            None => err = Some(Error::Format(format!("checkpoint is missing `{name}`"))),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    if it.next().is_some() {
        return Err(Error::Format("checkpoint has extra arrays".into()));
    }
    Ok(())
}
