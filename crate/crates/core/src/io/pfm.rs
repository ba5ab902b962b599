//! Portable float map: `PF` (RGB) or `Pf` (grey) header, then little-endian
//! f32 rows stored bottom to top.

use std::fs;
use std::path::Path;

use super::{FormatError, HdrImage};

pub fn encode_pfm(img: &HdrImage) -> Result<Vec<u8>, FormatError> {
    if img.width == 0 || img.height == 0 {
        return Err(FormatError::Invalid("image has zero size".into()));
    }
    if let Some(i) = img.rgb.iter().position(|v| !v.is_finite()) {
        return Err(FormatError::Invalid(format!("non-finite value at pixel {}", i / 3)));
    }
    let mut out = format!("PF\n{} {}\n-1.0\n", img.width, img.height).into_bytes();
    out.reserve(img.rgb.len() * 4);
    for y in (0..img.height).rev() {
        let row = &img.rgb[y * img.width * 3..(y + 1) * img.width * 3];
        row.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
    }
    Ok(out)
}

/// Single-channel map, used for alpha masks.
pub fn encode_pfm_gray(width: usize, height: usize, values: &[f32]) -> Result<Vec<u8>, FormatError> {
    if values.len() != width * height || width == 0 || height == 0 {
        return Err(FormatError::Invalid("grey map size mismatch".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(FormatError::Invalid("non-finite value".into()));
    }
    let mut out = format!("Pf\n{width} {height}\n-1.0\n").into_bytes();
    for y in (0..height).rev() {
        values[y * width..(y + 1) * width].iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
    }
    Ok(out)
}

fn header_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str, FormatError> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(FormatError::Truncated("PFM header incomplete".into()));
    }
    std::str::from_utf8(&bytes[start..*pos]).map_err(|_| FormatError::Malformed("non-ASCII header".into()))
}

/// Decodes `PF` and `Pf` maps; grey maps are replicated into RGB.
pub fn decode_pfm(bytes: &[u8]) -> Result<HdrImage, FormatError> {
    let mut pos = 0;
    let channels = match header_token(bytes, &mut pos)? {
        "PF" => 3,
        "Pf" => 1,
        other => return Err(FormatError::Malformed(format!("unknown PFM type {other:?}"))),
    };
    let parse = |s: &str, what: &str| s.parse::<usize>().map_err(|_| FormatError::Malformed(format!("bad {what} {s:?}")));
    let width = parse(header_token(bytes, &mut pos)?, "width")?;
    let height = parse(header_token(bytes, &mut pos)?, "height")?;
    let scale_tok = header_token(bytes, &mut pos)?;
    let scale: f64 = scale_tok.parse().map_err(|_| FormatError::Malformed(format!("bad scale {scale_tok:?}")))?;
    if scale >= 0.0 {
        return Err(FormatError::Malformed("big-endian PFM (positive scale) is not supported".into()));
    }
    if width == 0 || height == 0 {
        return Err(FormatError::Malformed("zero image size".into()));
    }
    // exactly one whitespace byte separates the header from the data
    pos += 1;
    let n = width * height * channels;
    let data = bytes.get(pos..).unwrap_or(&[]);
    if data.len() < n * 4 {
        return Err(FormatError::Truncated(format!("expected {} data bytes, found {}", n * 4, data.len())));
    }
    if data.len() > n * 4 {
        return Err(FormatError::Malformed(format!("{} trailing bytes", data.len() - n * 4)));
    }
    let vals: Vec<f32> = data.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
    let mut img = HdrImage::new(width, height);
    for y in 0..height {
        let src = &vals[(height - 1 - y) * width * channels..(height - y) * width * channels];
        for x in 0..width {
            let v = if channels == 3 {
                [src[x * 3], src[x * 3 + 1], src[x * 3 + 2]]
            } else {
                [src[x]; 3]
            };
            img.set_pixel(x, y, v);
        }
    }
    Ok(img)
}

pub fn write_pfm(img: &HdrImage, path: &Path) -> Result<(), FormatError> {
    fs::write(path, encode_pfm(img)?).map_err(|e| FormatError::io(path, e))
}

pub fn write_pfm_gray(width: usize, height: usize, values: &[f32], path: &Path) -> Result<(), FormatError> {
    fs::write(path, encode_pfm_gray(width, height, values)?).map_err(|e| FormatError::io(path, e))
}

pub fn read_pfm(path: &Path) -> Result<HdrImage, FormatError> {
    decode_pfm(&fs::read(path).map_err(|e| FormatError::io(path, e))?)
}
