//! Binary 8-bit PGM (P5) and PPM (P6).

use anyhow::Result;
use pguide::{Image, Shape};

use crate::invalid;

pub fn decode(bytes: &[u8], origin: &str) -> Result<Image> {
    let bad = |reason: &str| invalid(format!("malformed image {origin}: {reason}"));
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(bad("expected P5 or P6 magic")),
    };
    let mut pos = 2;
    let mut header = [0usize; 3];
    for field in header.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad header field"))?;
    }
    let [width, height, maxval] = header;
    if maxval == 0 || maxval > 255 {
        return Err(bad("only maxval 1..=255 is supported"));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(bad("missing separator after header"));
    }
    let raster = &bytes[pos + 1..];
    let shape = Shape::new(channels, height, width).map_err(|e| bad(&e.to_string()))?;
    if raster.len() < shape.len() {
        return Err(bad("truncated raster"));
    }
    // interleaved rgb to planar
    let plane = height * width;
    let mut data = vec![0.0; shape.len()];
    for (i, &b) in raster[..shape.len()].iter().enumerate() {
        data[(i % channels) * plane + i / channels] = b as f64 / maxval as f64;
    }
    Ok(Image::from_vec(shape, data)?)
}

/// Clamps to `[0, 1]` and quantizes to 8 bits.
pub fn encode(img: &Image) -> Result<Vec<u8>> {
    let s = img.shape();
    let magic = match s.channels {
        1 => "P5",
        3 => "P6",
        c => {
            return Err(invalid(format!(
                "8-bit export needs 1 or 3 channels, image has {c}"
            )))
        }
    };
    let mut out = format!("{magic}\n{} {}\n255\n", s.width, s.height).into_bytes();
    let plane = s.height * s.width;
    let data = img.data();
    for p in 0..plane {
        for c in 0..s.channels {
            out.push((data[c * plane + p].clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    Ok(out)
}
