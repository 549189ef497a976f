//! Tensor wire format, used for checkpoints, dataset volumes, and fixtures.
//!
//! Layout: one ASCII header line `shape: d0,d1,...\n` followed by the
//! row-major values as little-endian IEEE-754 f64. The reader treats its
//! input as untrusted: header length is bounded, extents are overflow-checked
//! against the remaining payload, and non-finite values are rejected.

use super::Tensor;
use crate::error::{Error, Result};
use std::io::{Read, Write};

const MAX_HEADER: usize = 4096;

pub fn write_tensor<W: Write>(w: &mut W, t: &Tensor) -> Result<()> {
    let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
    writeln!(w, "shape: {}", dims.join(","))?;
    for v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tensor<R: Read>(r: &mut R) -> Result<Tensor> {
    let header = read_header_line(r)?;
    let rest = header
        .strip_prefix("shape: ")
        .ok_or_else(|| Error::parse("tensor header must start with 'shape: '"))?;
    let mut shape = Vec::new();
    for part in rest.split(',') {
        let d: usize = part
            .trim()
            .parse()
            .map_err(|_| Error::parse(format!("bad extent {part:?} in tensor header")))?;
        if d == 0 {
            return Err(Error::parse("zero extent in tensor header"));
        }
        shape.push(d);
    }
    if shape.is_empty() {
        return Err(Error::parse("empty shape in tensor header"));
    }
    let mut numel: usize = 1;
    for &d in &shape {
        numel = numel
            .checked_mul(d)
            .ok_or_else(|| Error::parse("tensor extent product overflows"))?;
    }
    let bytes = numel
        .checked_mul(8)
        .ok_or_else(|| Error::parse("tensor payload size overflows"))?;
    let mut payload = vec![0u8; bytes];
    r.read_exact(&mut payload)
        .map_err(|_| Error::parse(format!("tensor payload truncated: expected {bytes} bytes")))?;
    let mut data = Vec::with_capacity(numel);
    for chunk in payload.chunks_exact(8) {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::NonFinite("tensor payload"));
        }
        data.push(v);
    }
    Tensor::new(shape, data)
}

fn read_header_line<R: Read>(r: &mut R) -> Result<String> {
    let mut buf = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if buf.len() > MAX_HEADER {
            return Err(Error::parse("tensor header exceeds maximum length"));
        }
        match r.read(&mut byte)? {
            0 => return Err(Error::parse("unexpected end of input in tensor header")),
            _ => {
                if byte[0] == b'\n' {
                    break;
                }
                buf.push(byte[0]);
            }
        }
    }
    String::from_utf8(buf).map_err(|_| Error::parse("tensor header is not valid UTF-8"))
}
