//! Netpbm graymap (PGM) codec, plain (`P2`) and raw (`P5`) variants.
//!
//! Sample values are stored as read; images with `maxval < 255` are not
//! rescaled, so label maps keep their class ids.

use std::io::Write;

use super::{GrayImage, ImageError};

struct Header {
    ascii: bool,
    width: u32,
    height: u32,
    maxval: u32,
    /// Offset of the first byte after the header's terminating whitespace.
    data_start: usize,
}

/// Decodes a `P2` or `P5` graymap.
pub fn load_pgm(bytes: &[u8]) -> Result<GrayImage, ImageError> {
    let header = parse_header(bytes)?;
    let len = header.width as usize * header.height as usize;
    let data = if header.ascii {
        read_ascii_samples(&bytes[header.data_start..], len, header.maxval)?
    } else {
        let raw = &bytes[header.data_start.min(bytes.len())..];
        if raw.len() < len {
            return Err(ImageError::TruncatedData {
                expected: len,
                actual: raw.len(),
            });
        }
        let raw = &raw[..len];
        if let Some(&v) = raw.iter().find(|&&v| u32::from(v) > header.maxval) {
            return Err(ImageError::MalformedHeader(format!(
                "sample {v} exceeds maxval {}",
                header.maxval
            )));
        }
        raw.to_vec()
    };
    GrayImage::new(header.width, header.height, data)
}

/// Encodes as raw `P5` with maxval 255.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    out
}

/// Encodes as plain `P2` with maxval 255, one image row per line.
pub fn encode_pgm_ascii(img: &GrayImage) -> Vec<u8> {
    let mut out = Vec::new();
    write!(out, "P2\n{} {}\n255\n", img.width(), img.height()).expect("write to Vec");
    for row in img.data().chunks(img.width() as usize) {
        let line: Vec<String> = row.iter().map(u8::to_string).collect();
        writeln!(out, "{}", line.join(" ")).expect("write to Vec");
    }
    out
}

fn parse_header(bytes: &[u8]) -> Result<Header, ImageError> {
    let ascii = match bytes.get(..2) {
        Some(b"P2") => true,
        Some(b"P5") => false,
        Some(m) => {
            return Err(ImageError::MalformedHeader(format!(
                "unsupported magic {:?}",
                String::from_utf8_lossy(m)
            )))
        }
        None => return Err(ImageError::MalformedHeader("missing magic".into())),
    };
    let mut pos = 2;
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(ImageError::MalformedHeader("magic not followed by whitespace".into()));
    }

    let mut fields = [0u32; 3];
    for (i, field) in fields.iter_mut().enumerate() {
        let (value, next) = next_header_token(bytes, pos)?;
        *field = value;
        pos = next;
        if i == 2 {
            // Exactly one whitespace byte separates maxval from the samples.
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => {
                    return Err(ImageError::MalformedHeader(
                        "maxval not followed by whitespace".into(),
                    ))
                }
                None => {}
            }
        }
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(ImageError::MalformedHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    if maxval == 0 {
        return Err(ImageError::MalformedHeader("maxval must be positive".into()));
    }
    if maxval > 255 {
        return Err(ImageError::UnsupportedMaxval(maxval));
    }
    Ok(Header {
        ascii,
        width,
        height,
        maxval,
        data_start: pos,
    })
}

/// Skips whitespace and `#` comments, then parses one decimal token.
fn next_header_token(bytes: &[u8], mut pos: usize) -> Result<(u32, usize), ImageError> {
    loop {
        match bytes.get(pos) {
            Some(b'#') => {
                while bytes.get(pos).is_some_and(|&b| b != b'\n' && b != b'\r') {
                    pos += 1;
                }
            }
            Some(b) if b.is_ascii_whitespace() => pos += 1,
            Some(_) => break,
            None => return Err(ImageError::MalformedHeader("header ends early".into())),
        }
    }
    let start = pos;
    while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
        pos += 1;
    }
    if start == pos {
        return Err(ImageError::MalformedHeader(format!(
            "expected a number at byte {start}"
        )));
    }
    let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
    let value = text
        .parse()
        .map_err(|_| ImageError::MalformedHeader(format!("number {text} out of range")))?;
    Ok((value, pos))
}

fn read_ascii_samples(bytes: &[u8], len: usize, maxval: u32) -> Result<Vec<u8>, ImageError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| ImageError::MalformedHeader("non-ASCII sample data".into()))?;
    let mut data = Vec::with_capacity(len);
    let tokens = text
        .lines()
        .map(|line| line.split('#').next().unwrap_or(""))
        .flat_map(str::split_ascii_whitespace);
    for token in tokens.take(len) {
        let v: u32 = token
            .parse()
            .map_err(|_| ImageError::MalformedHeader(format!("bad sample {token:?}")))?;
        if v > maxval {
            return Err(ImageError::MalformedHeader(format!(
                "sample {v} exceeds maxval {maxval}"
            )));
        }
        data.push(v as u8);
    }
    if data.len() < len {
        return Err(ImageError::TruncatedData {
            expected: len,
            actual: data.len(),
        });
    }
    Ok(data)
}
