//! PGM/PPM image I/O (P2/P3/P5/P6, maxval 255 or 65535).
//!
//! Scalars map linearly between [0,1] and [0,maxval]; 16-bit binary samples
//! are big-endian per the netpbm convention.

use std::io::Write;
use std::path::Path;

use super::{FormatError, GrayImage, RgbImage};

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<(), FormatError> {
    write_gray(path, img, 255)
}

pub fn write_pgm_16(path: &Path, img: &GrayImage) -> Result<(), FormatError> {
    write_gray(path, img, 65535)
}

fn write_gray(path: &Path, img: &GrayImage, maxval: u32) -> Result<(), FormatError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "P5\n{} {}\n{}\n", img.width, img.height, maxval)?;
    for &v in &img.data {
        let q = (v.clamp(0.0, 1.0) * maxval as f64).round() as u32;
        if maxval > 255 {
            f.write_all(&(q as u16).to_be_bytes())?;
        } else {
            f.write_all(&[q as u8])?;
        }
    }
    f.flush()?;
    Ok(())
}

pub fn write_ppm(path: &Path, img: &RgbImage) -> Result<(), FormatError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "P6\n{} {}\n255\n", img.width, img.height)?;
    for px in &img.data {
        for &c in px {
            f.write_all(&[(c.clamp(0.0, 1.0) * 255.0).round() as u8])?;
        }
    }
    f.flush()?;
    Ok(())
}

struct PnmHeader {
    magic: u8,
    width: usize,
    height: usize,
    maxval: u64,
    data_start: usize,
}

fn parse_header(bytes: &[u8]) -> Result<PnmHeader, FormatError> {
    if bytes.len() < 2 || bytes[0] != b'P' || !(b'1'..=b'6').contains(&bytes[1]) {
        return Err(FormatError::parse("byte 0", "not a PNM file"));
    }
    let magic = bytes[1] - b'0';
    let mut pos = 2;
    let mut fields = [0u64; 3];
    let n_fields = 3; // width, height, maxval (P1/P4 not supported anyway)
    let mut fi = 0;
    while fi < n_fields {
        // skip whitespace and comments
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if pos == start {
            return Err(FormatError::parse(format!("byte {pos}"), "expected integer in header"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).unwrap();
        fields[fi] = text
            .parse()
            .map_err(|_| FormatError::parse(format!("byte {start}"), "integer overflow in header"))?;
        fi += 1;
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(FormatError::parse(format!("byte {pos}"), "missing whitespace after maxval"));
    }
    pos += 1; // exactly one whitespace byte before binary data
    let maxval = fields[2];
    if maxval != 255 && maxval != 65535 {
        return Err(FormatError::UnsupportedMaxval(maxval));
    }
    if fields[0] == 0 || fields[1] == 0 || fields[0].saturating_mul(fields[1]) > 1 << 30 {
        return Err(FormatError::parse("header", "bad image dimensions"));
    }
    Ok(PnmHeader {
        magic,
        width: fields[0] as usize,
        height: fields[1] as usize,
        maxval,
        data_start: pos,
    })
}

fn read_samples(bytes: &[u8], h: &PnmHeader, channels: usize) -> Result<Vec<f64>, FormatError> {
    let count = h.width * h.height * channels;
    let maxval = h.maxval as f64;
    let ascii = h.magic <= 3;
    let mut out = Vec::with_capacity(count);
    if ascii {
        let text = std::str::from_utf8(&bytes[h.data_start..])
            .map_err(|_| FormatError::parse("body", "non-utf8 ascii payload"))?;
        for tok in text.split_ascii_whitespace() {
            if out.len() == count {
                break;
            }
            let v: u64 = tok
                .parse()
                .map_err(|_| FormatError::parse("body", format!("bad sample '{tok}'")))?;
            if v > h.maxval {
                return Err(FormatError::parse("body", "sample exceeds maxval"));
            }
            out.push(v as f64 / maxval);
        }
    } else {
        let sample_size = if h.maxval > 255 { 2 } else { 1 };
        let need = count * sample_size;
        let data = &bytes[h.data_start.min(bytes.len())..];
        if data.len() < need {
            return Err(FormatError::parse(
                format!("byte {}", h.data_start + data.len()),
                format!("expected {need} payload bytes, found {}", data.len()),
            ));
        }
        for i in 0..count {
            let v = if sample_size == 2 {
                u16::from_be_bytes([data[2 * i], data[2 * i + 1]]) as f64
            } else {
                data[i] as f64
            };
            out.push(v / maxval);
        }
    }
    if out.len() != count {
        return Err(FormatError::parse(
            "body",
            format!("expected {count} samples, found {}", out.len()),
        ));
    }
    Ok(out)
}

pub fn read_pgm(path: &Path) -> Result<GrayImage, FormatError> {
    let bytes = std::fs::read(path)?;
    let h = parse_header(&bytes)?;
    if h.magic != 2 && h.magic != 5 {
        return Err(FormatError::UnsupportedFormat(format!(
            "P{} is not a grayscale map",
            h.magic
        )));
    }
    let data = read_samples(&bytes, &h, 1)?;
    Ok(GrayImage::from_data(h.width, h.height, data))
}

pub fn read_ppm(path: &Path) -> Result<RgbImage, FormatError> {
    let bytes = std::fs::read(path)?;
    let h = parse_header(&bytes)?;
    if h.magic != 3 && h.magic != 6 {
        return Err(FormatError::UnsupportedFormat(format!(
            "P{} is not a pixmap",
            h.magic
        )));
    }
    let data = read_samples(&bytes, &h, 3)?;
    let mut img = RgbImage::new(h.width, h.height);
    for (i, px) in img.data.iter_mut().enumerate() {
        *px = [data[3 * i], data[3 * i + 1], data[3 * i + 2]];
    }
    Ok(img)
}
