//! Binary checkpoint format for named parameter matrices.
//!
//! Layout, all integers little-endian:
//!   magic "MMVGCKPT" | version u32 | endianness u8 (1 = little) |
//!   dtype u8 | reserved u16 | section count u64 | sections...
//! Each section: name length u32 | name bytes | rows u64 | cols u64 |
//! row-major payload. Sections are written in name order, so identical
//! stores always serialize to identical bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::num::{Dtype, Scalar};
use crate::tensor::matrix::DenseMatrix;
use crate::tensor::params::ParamStore;

const MAGIC: &[u8; 8] = b"MMVGCKPT";
const VERSION: u32 = 1;
const LITTLE_ENDIAN: u8 = 1;

pub fn save<S: Scalar>(params: &ParamStore<S>, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[LITTLE_ENDIAN, S::DTYPE.code()])?;
    w.write_all(&0u16.to_le_bytes())?;
    w.write_all(&(params.len() as u64).to_le_bytes())?;
    for (name, m) in params.iter() {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(m.rows() as u64).to_le_bytes())?;
        w.write_all(&(m.cols() as u64).to_le_bytes())?;
        let mut payload = Vec::with_capacity(m.len() * S::DTYPE.size_bytes());
        for &v in m.data() {
            v.write_le(&mut payload);
        }
        w.write_all(&payload)?;
    }
    w.flush()?;
    Ok(())
}

/// Read the dtype tag without loading the payload, so callers can
/// dispatch to the right scalar type.
pub fn peek_dtype(path: &Path) -> Result<Dtype> {
    let mut r = BufReader::new(File::open(path)?);
    let header = read_header(&mut r, path)?;
    Ok(header)
}

fn read_header(r: &mut impl Read, path: &Path) -> Result<Dtype> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!("{}: bad magic", path.display())));
    }
    let mut v4 = [0u8; 4];
    r.read_exact(&mut v4)?;
    let version = u32::from_le_bytes(v4);
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "{}: unsupported version {version}",
            path.display()
        )));
    }
    let mut flags = [0u8; 4];
    r.read_exact(&mut flags)?;
    if flags[0] != LITTLE_ENDIAN {
        return Err(Error::Checkpoint(format!(
            "{}: unsupported endianness tag {}",
            path.display(),
            flags[0]
        )));
    }
    Dtype::from_code(flags[1])
        .ok_or_else(|| Error::Checkpoint(format!("{}: unknown dtype code {}", path.display(), flags[1])))
}

pub fn load<S: Scalar>(path: &Path) -> Result<ParamStore<S>> {
    let mut r = BufReader::new(File::open(path)?);
    let dtype = read_header(&mut r, path)?;
    if dtype != S::DTYPE {
        return Err(Error::Checkpoint(format!(
            "{}: stores {} values, requested {}",
            path.display(),
            dtype,
            S::DTYPE
        )));
    }
    let mut n8 = [0u8; 8];
    r.read_exact(&mut n8)?;
    let count = u64::from_le_bytes(n8);

    let mut params = ParamStore::new();
    for _ in 0..count {
        let mut len4 = [0u8; 4];
        r.read_exact(&mut len4)?;
        let name_len = u32::from_le_bytes(len4) as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::Checkpoint(format!("{}: non-utf8 section name", path.display())))?;
        r.read_exact(&mut n8)?;
        let rows = u64::from_le_bytes(n8) as usize;
        r.read_exact(&mut n8)?;
        let cols = u64::from_le_bytes(n8) as usize;
        let width = S::DTYPE.size_bytes();
        let mut payload = vec![0u8; rows * cols * width];
        r.read_exact(&mut payload)?;
        let data: Vec<S> = payload.chunks_exact(width).map(S::read_le).collect();
        params.insert(name, DenseMatrix::from_vec(rows, cols, data)?)?;
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Checkpoint(format!(
            "{}: trailing bytes after last section",
            path.display()
        )));
    }
    Ok(params)
}
