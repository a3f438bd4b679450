//! Field persistence.
//!
//! Binary layout (all integers and floats little-endian):
//!
//! | bytes      | content                                        |
//! |------------|------------------------------------------------|
//! | 4          | magic `BRWF`                                   |
//! | 4          | format version, `u32` (currently 1)            |
//! | 4          | dimension `d`, `u32`                           |
//! | 1          | kind: 0 general, 1 probability                 |
//! | 8 d        | lower corner, `i64` per axis                   |
//! | 8 d        | shape, `u64` per axis                          |
//! | 8 prod     | values, `f64`, row-major (last axis fastest)   |
//!
//! A centred box of radius `r` has lower corner `-r` and shape `2r + 1` on
//! every axis. The CSV form has one row per site, `x1,..,xd,value`.

use std::io::{Read, Write};

use super::field::{FieldKind, LatticeField};
use crate::error::{LabError, Result};

const MAGIC: &[u8; 4] = b"BRWF";
const VERSION: u32 = 1;

pub fn write_field_binary<W: Write>(field: &LatticeField, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(field.dim() as u32).to_le_bytes())?;
    out.write_all(&[match field.kind() {
        FieldKind::General => 0u8,
        FieldKind::Probability => 1u8,
    }])?;
    for lo in field.lower() {
        out.write_all(&lo.to_le_bytes())?;
    }
    for len in field.shape() {
        out.write_all(&(*len as u64).to_le_bytes())?;
    }
    for v in field.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_array<const N: usize, R: Read>(input: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn read_field_binary<R: Read>(mut input: R) -> Result<LatticeField> {
    let magic: [u8; 4] = read_array(&mut input)?;
    if &magic != MAGIC {
        return Err(LabError::Config("not a lattice field file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut input)?);
    if version != VERSION {
        return Err(LabError::Config(format!("unsupported field format version {version}")));
    }
    let dim = u32::from_le_bytes(read_array(&mut input)?) as usize;
    if dim == 0 || dim > 16 {
        return Err(LabError::Config(format!("implausible field dimension {dim}")));
    }
    let kind = match read_array::<1, _>(&mut input)?[0] {
        0 => FieldKind::General,
        1 => FieldKind::Probability,
        other => return Err(LabError::Config(format!("unknown field kind tag {other}"))),
    };
    let mut lower = Vec::with_capacity(dim);
    for _ in 0..dim {
        lower.push(i64::from_le_bytes(read_array(&mut input)?));
    }
    let mut shape = Vec::with_capacity(dim);
    for _ in 0..dim {
        shape.push(u64::from_le_bytes(read_array(&mut input)?) as usize);
    }
    let len = shape
        .iter()
        .try_fold(1usize, |acc, &s| acc.checked_mul(s))
        .ok_or_else(|| LabError::Config("field shape overflows".into()))?;
    let mut values = Vec::with_capacity(len);
    for _ in 0..len {
        values.push(f64::from_le_bytes(read_array(&mut input)?));
    }
    let field = LatticeField::from_values(lower, shape, values)?.with_kind(kind);
    field.check_invariants()?;
    Ok(field)
}

pub fn write_field_csv<W: Write>(field: &LatticeField, mut out: W) -> Result<()> {
    let header: Vec<String> = (1..=field.dim()).map(|i| format!("x{i}")).collect();
    writeln!(out, "{},value", header.join(","))?;
    let mut result = Ok(());
    field.for_each_point(|x, v| {
        if result.is_err() {
            return;
        }
        let coords: Vec<String> = x.iter().map(|c| c.to_string()).collect();
        result = writeln!(out, "{},{v:e}", coords.join(","));
    });
    result?;
    Ok(())
}
