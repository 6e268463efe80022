//! Embedding files.
//!
//! Text: one line per entity, `iri v1 … vd`, values with 9 significant digits.
//! Binary, little-endian: magic `KGLPEMBD`, `u32` version, `u64` rows,
//! `u32` dim, then `rows × dim` `f32` values row-major.

use std::io::{BufRead, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{EmbedError, EmbeddingMatrix};
use crate::kg::Iri;
use crate::scalar::Scalar;

pub const EMBEDDING_MAGIC: &[u8; 8] = b"KGLPEMBD";
pub const EMBEDDING_VERSION: u32 = 1;

/// Shortest-form rendering with `digits` significant digits, positional for
/// moderate exponents and scientific otherwise (like C's `%.9g`).
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        format!("{mantissa}e{exp}")
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_owned()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_text<T: Scalar, W: Write>(m: &EmbeddingMatrix<T>, names: &[Iri], mut w: W) -> Result<(), EmbedError> {
    if names.len() != m.rows() {
        return Err(EmbedError::Format(format!("{} names for {} rows", names.len(), m.rows())));
    }
    for (i, name) in names.iter().enumerate() {
        write!(w, "{name}")?;
        for &x in m.row(i) {
            write!(w, " {}", format_significant(x.as_f64(), 9))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_text<T: Scalar, R: BufRead>(reader: R) -> Result<(Vec<Iri>, EmbeddingMatrix<T>), EmbedError> {
    let mut names = Vec::new();
    let mut data = Vec::new();
    let mut dim = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        let name = parts.next().unwrap_or_default();
        let iri = Iri::new(name).map_err(|e| EmbedError::Format(format!("line {}: {e}", i + 1)))?;
        let before = data.len();
        for tok in parts {
            let v: f64 = tok
                .parse()
                .map_err(|_| EmbedError::Format(format!("line {}: bad value {tok:?}", i + 1)))?;
            data.push(T::of(v));
        }
        let d = data.len() - before;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(EmbedError::Format(format!("line {}: {d} values, expected {expected}", i + 1)))
            }
            _ => {}
        }
        names.push(iri);
    }
    let m = EmbeddingMatrix::from_vec(dim.unwrap_or(0), data)?;
    Ok((names, m))
}

pub fn write_binary<T: Scalar, W: Write>(m: &EmbeddingMatrix<T>, mut w: W) -> Result<(), EmbedError> {
    w.write_all(EMBEDDING_MAGIC)?;
    w.write_u32::<LittleEndian>(EMBEDDING_VERSION)?;
    w.write_u64::<LittleEndian>(m.rows() as u64)?;
    w.write_u32::<LittleEndian>(m.dim() as u32)?;
    for &x in m.as_slice() {
        w.write_f32::<LittleEndian>(x.to_f32().unwrap_or(f32::NAN))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_binary<T: Scalar, R: Read>(mut r: R) -> Result<EmbeddingMatrix<T>, EmbedError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != EMBEDDING_MAGIC {
        return Err(EmbedError::Format("bad magic".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != EMBEDDING_VERSION {
        return Err(EmbedError::Format(format!("unsupported version {version}")));
    }
    let rows = r.read_u64::<LittleEndian>()? as usize;
    let dim = r.read_u32::<LittleEndian>()? as usize;
    let mut data = Vec::with_capacity(rows.saturating_mul(dim).min(1 << 24));
    for _ in 0..rows * dim {
        data.push(T::of(r.read_f32::<LittleEndian>()? as f64));
    }
    EmbeddingMatrix::from_vec(dim, data)
}
