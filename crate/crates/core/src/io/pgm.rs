use std::path::Path;

use super::{read_file, write_file, IoError};
use crate::GrayImage;

/// Binary (P5) PGM with maxval 255.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage, IoError> {
    let mut pos = 0usize;
    let magic = next_token(bytes, &mut pos).ok_or_else(|| IoError::MalformedHeader("missing magic".into()))?;
    if magic != b"P5" {
        return Err(IoError::MalformedHeader(format!("magic {:?}", String::from_utf8_lossy(magic))));
    }
    let mut field = |name: &str| -> Result<u32, IoError> {
        let tok = next_token(bytes, &mut pos).ok_or_else(|| IoError::MalformedHeader(format!("missing {name}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| IoError::MalformedHeader(format!("bad {name} {:?}", String::from_utf8_lossy(tok))))
    };
    let width = field("width")? as usize;
    let height = field("height")? as usize;
    let maxval = field("maxval")?;
    if maxval != 255 {
        return Err(IoError::UnsupportedMaxval(maxval));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(IoError::MalformedHeader("no whitespace after maxval".into())),
    }
    let expected = width * height;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(IoError::TruncatedData { expected, found: payload.len() });
    }
    Ok(GrayImage::from_vec(width, height, payload[..expected].to_vec()).expect("length checked"))
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    out
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayImage, IoError> {
    decode_pgm(&read_file(path.as_ref())?)
}

pub fn save_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<(), IoError> {
    write_file(path.as_ref(), &encode_pgm(img))
}

/// Next whitespace-delimited header token, skipping `#` comments.
fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (*pos > start).then(|| &bytes[start..*pos])
}
