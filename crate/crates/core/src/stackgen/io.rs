//! Binary stack files.
//!
//! Layout (little endian):
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 8    | magic `STCSFSTK`              |
//! | 8      | 4    | nx (u32)                      |
//! | 12     | 4    | ny (u32)                      |
//! | 16     | 4    | nt (u32)                      |
//! | 20     | 4    | dtype tag (1 = f64)           |
//! | 24     | 4    | label (0 absent, 1 present)   |
//! | 28     | 4    | reserved, written as 0        |
//! | 32     | 8    | seed (u64)                    |
//! | 40     | ...  | f64 payload, x fastest, then y, then t |

use std::fs;
use std::path::Path;

use super::{Dims, ImageStack, Label, StackError};

pub const MAGIC: &[u8; 8] = b"STCSFSTK";
pub const HEADER_LEN: usize = 40;
const DTYPE_F64: u32 = 1;

pub fn stack_to_bytes(stack: &ImageStack) -> Vec<u8> {
    let dims = stack.dims();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * dims.len());
    out.extend_from_slice(MAGIC);
    for field in [
        dims.nx as u32,
        dims.ny as u32,
        dims.nt as u32,
        DTYPE_F64,
        stack.label.code(),
        0,
    ] {
        out.extend_from_slice(&field.to_le_bytes());
    }
    out.extend_from_slice(&stack.seed.to_le_bytes());
    for v in stack.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn u32_at(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

pub fn stack_from_bytes(bytes: &[u8]) -> Result<ImageStack, StackError> {
    if bytes.len() < HEADER_LEN {
        return Err(StackError::MalformedHeader(format!(
            "{} bytes is shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[..8] != MAGIC {
        return Err(StackError::MalformedHeader("bad magic".into()));
    }
    let (nx, ny, nt) = (
        u32_at(bytes, 8) as usize,
        u32_at(bytes, 12) as usize,
        u32_at(bytes, 16) as usize,
    );
    let dtype = u32_at(bytes, 20);
    if dtype != DTYPE_F64 {
        return Err(StackError::MalformedHeader(format!(
            "unknown dtype tag {dtype}"
        )));
    }
    let label_code = u32_at(bytes, 24);
    let label = Label::from_code(label_code)
        .ok_or_else(|| StackError::MalformedHeader(format!("unknown label {label_code}")))?;
    if nx == 0 || ny == 0 || nt == 0 {
        return Err(StackError::MalformedHeader(format!(
            "zero dimension in {nx}x{ny}x{nt}"
        )));
    }
    if nx != ny {
        return Err(StackError::DimensionMismatch(format!(
            "slices must be square, header says {nx}x{ny}"
        )));
    }
    let seed = u64::from_le_bytes(bytes[32..40].try_into().unwrap());
    let dims = Dims::new(nx, ny, nt)?;

    let payload = &bytes[HEADER_LEN..];
    let expected = dims
        .len()
        .checked_mul(8)
        .ok_or_else(|| StackError::MalformedHeader("dimensions overflow".into()))?;
    if payload.len() < expected {
        return Err(StackError::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(StackError::DimensionMismatch(format!(
            "payload has {} bytes, header dims need {expected}",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ImageStack::new(data, dims, label, seed)
}

pub fn write_stack(stack: &ImageStack, path: impl AsRef<Path>) -> Result<(), StackError> {
    fs::write(path, stack_to_bytes(stack))?;
    Ok(())
}

pub fn read_stack(path: impl AsRef<Path>) -> Result<ImageStack, StackError> {
    stack_from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stackgen::generate_background;

    fn sample() -> ImageStack {
        generate_background(Dims::new(8, 8, 8).unwrap(), 2.0, 99).unwrap()
    }

    #[test]
    fn standard_file_size() {
        let s = generate_background(Dims::standard(), 3.0, 1).unwrap();
        assert_eq!(stack_to_bytes(&s).len(), HEADER_LEN + 1_048_576);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.stk");
        let s = sample();
        write_stack(&s, &path).unwrap();
        let back = read_stack(&path).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn zero_slices_rejected() {
        let mut bytes = stack_to_bytes(&sample());
        bytes[16..20].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(
            stack_from_bytes(&bytes),
            Err(StackError::MalformedHeader(_))
        ));
    }

    #[test]
    fn distinct_errors() {
        let good = stack_to_bytes(&sample());

        let mut magic = good.clone();
        magic[0] = b'X';
        assert!(matches!(
            stack_from_bytes(&magic),
            Err(StackError::MalformedHeader(_))
        ));

        assert!(matches!(
            stack_from_bytes(&good[..20]),
            Err(StackError::MalformedHeader(_))
        ));

        assert!(matches!(
            stack_from_bytes(&good[..good.len() - 8]),
            Err(StackError::TruncatedPayload { .. })
        ));

        let mut longer = good.clone();
        longer.extend_from_slice(&[0; 8]);
        assert!(matches!(
            stack_from_bytes(&longer),
            Err(StackError::DimensionMismatch(_))
        ));

        let mut rect = good.clone();
        rect[12..16].copy_from_slice(&4u32.to_le_bytes());
        assert!(matches!(
            stack_from_bytes(&rect),
            Err(StackError::DimensionMismatch(_))
        ));
    }
}
