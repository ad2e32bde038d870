//! Plain file formats: the `PGT1` tensor exchange format and the text
//! kernel / mask formats.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linops::Kernel;
use crate::scalar::Real;
use crate::tensor::{ImageTensor, Shape};

pub const TENSOR_MAGIC: &[u8; 4] = b"PGT1";

/// Encodes a tensor as `PGT1` + three little-endian `u32` dims + `f32` LE body.
pub fn encode_tensor<T: Real>(t: &ImageTensor<T>) -> Vec<u8> {
    let s = t.shape();
    let mut out = Vec::with_capacity(16 + 4 * t.len());
    out.extend_from_slice(TENSOR_MAGIC);
    for d in [s.channels, s.height, s.width] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in t.data() {
        out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    out
}

pub fn decode_tensor<T: Real>(bytes: &[u8], origin: &str) -> Result<ImageTensor<T>> {
    let bad = |reason: &str| Error::Format {
        path: origin.to_string(),
        reason: reason.to_string(),
    };
    if bytes.len() < 16 {
        return Err(bad("shorter than the 16-byte header"));
    }
    if &bytes[..4] != TENSOR_MAGIC {
        return Err(bad("missing PGT1 magic"));
    }
    let dim =
        |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let shape = Shape::new(dim(0), dim(1), dim(2)).map_err(|e| bad(&e.to_string()))?;
    let body = &bytes[16..];
    if body.len() != 4 * shape.len() {
        return Err(bad(&format!(
            "body has {} bytes, header {shape} needs {}",
            body.len(),
            4 * shape.len()
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| T::lit(f32::from_le_bytes(c.try_into().unwrap()) as f64))
        .collect();
    ImageTensor::from_vec(shape, data).map_err(|e| bad(&e.to_string()))
}

pub fn write_tensor<T: Real>(path: impl AsRef<Path>, t: &ImageTensor<T>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_tensor(t))?;
    Ok(())
}

pub fn read_tensor<T: Real>(path: impl AsRef<Path>) -> Result<ImageTensor<T>> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_tensor(&bytes, &path.display().to_string())
}

/// Parses `"H W"` followed by `H*W` whitespace-separated reals.
fn parse_grid(text: &str, origin: &str) -> Result<(usize, usize, Vec<f64>)> {
    let bad = |reason: String| Error::Format {
        path: origin.to_string(),
        reason,
    };
    let mut tokens = text.split_whitespace();
    let mut dim = |name: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| bad(format!("missing {name} in header")))?
            .parse::<usize>()
            .map_err(|e| bad(format!("bad {name}: {e}")))
    };
    let h = dim("H")?;
    let w = dim("W")?;
    if h == 0 || w == 0 {
        return Err(bad("dimensions must be positive".into()));
    }
    let vals = tokens
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| bad(format!("bad value {t:?}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if vals.len() != h * w {
        return Err(bad(format!(
            "expected {} values, found {}",
            h * w,
            vals.len()
        )));
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(bad("non-finite value".into()));
    }
    Ok((h, w, vals))
}

pub fn parse_kernel<T: Real>(text: &str, origin: &str) -> Result<Kernel<T>> {
    let (h, w, vals) = parse_grid(text, origin)?;
    Kernel::new(h, w, vals.into_iter().map(T::lit).collect())
}

pub fn read_kernel<T: Real>(path: impl AsRef<Path>) -> Result<Kernel<T>> {
    let path = path.as_ref();
    parse_kernel(&fs::read_to_string(path)?, &path.display().to_string())
}

pub fn format_kernel<T: Real>(k: &Kernel<T>) -> String {
    let mut s = format!("{} {}\n", k.height(), k.width());
    for row in k.data().chunks(k.width()) {
        let line: Vec<String> = row.iter().map(|v| format!("{:e}", v.as_f64())).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

/// Parses a 0/1 mask grid; returns `(height, width, keep)`.
pub fn parse_mask(text: &str, origin: &str) -> Result<(usize, usize, Vec<bool>)> {
    let (h, w, vals) = parse_grid(text, origin)?;
    let keep = vals
        .into_iter()
        .map(|v| {
            if v == 0.0 {
                Ok(false)
            } else if v == 1.0 {
                Ok(true)
            } else {
                Err(Error::Format {
                    path: origin.to_string(),
                    reason: format!("mask entries must be 0 or 1, found {v}"),
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((h, w, keep))
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<bool>)> {
    let path = path.as_ref();
    parse_mask(&fs::read_to_string(path)?, &path.display().to_string())
}
