//! Binary portable pixmap (P6) images and graymap (P5) class-id masks.

use std::path::Path;

use super::{ImageTile, MaskTile};
use crate::error::{Error, Result};

fn parse_err(offset: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        msg: msg.into(),
    }
}

struct Header {
    width: usize,
    height: usize,
    maxval: usize,
    payload_start: usize,
}

fn skip_space(bytes: &[u8], mut pos: usize) -> usize {
    loop {
        match bytes.get(pos) {
            Some(b) if b.is_ascii_whitespace() => pos += 1,
            Some(b'#') => {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            }
            _ => return pos,
        }
    }
}

fn read_number(bytes: &[u8], pos: usize, what: &str) -> Result<(usize, usize)> {
    let start = skip_space(bytes, pos);
    let mut end = start;
    while end < bytes.len() && bytes[end].is_ascii_digit() {
        end += 1;
    }
    if end == start {
        return Err(parse_err(start, format!("expected {what}")));
    }
    let text = std::str::from_utf8(&bytes[start..end]).expect("ascii digits");
    let v = text
        .parse()
        .map_err(|_| parse_err(start, format!("{what} `{text}` out of range")))?;
    Ok((v, end))
}

fn read_header(bytes: &[u8], magic: &[u8; 2]) -> Result<Header> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(parse_err(
            0,
            format!("bad magic, expected {}", String::from_utf8_lossy(magic)),
        ));
    }
    let (width, pos) = read_number(bytes, 2, "width")?;
    let (height, pos) = read_number(bytes, pos, "height")?;
    let (maxval, pos) = read_number(bytes, pos, "maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(parse_err(pos, format!("maxval {maxval} is not an 8-bit depth")));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => {}
        _ => return Err(parse_err(pos, "expected a single whitespace byte after maxval")),
    }
    Ok(Header {
        width,
        height,
        maxval,
        payload_start: pos + 1,
    })
}

fn payload<'a>(bytes: &'a [u8], h: &Header, channels: usize) -> Result<&'a [u8]> {
    let need = h.width * h.height * channels;
    let have = bytes.len() - h.payload_start;
    if have < need {
        return Err(parse_err(
            bytes.len(),
            format!("truncated payload: header declares {need} bytes, found {have}"),
        ));
    }
    if have > need {
        return Err(parse_err(
            h.payload_start + need,
            format!(
                "{} bytes beyond the {}x{} extent in the header",
                have - need,
                h.width,
                h.height
            ),
        ));
    }
    Ok(&bytes[h.payload_start..])
}

pub fn encode_image(img: &ImageTile) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn decode_image(bytes: &[u8]) -> Result<ImageTile> {
    let h = read_header(bytes, b"P6")?;
    if h.maxval != 255 {
        return Err(parse_err(0, format!("image maxval {} is not 255", h.maxval)));
    }
    let px = payload(bytes, &h, 3)?;
    ImageTile::new(h.height, h.width, px.to_vec())
}

pub fn encode_mask(mask: &MaskTile) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width, mask.height).into_bytes();
    out.extend_from_slice(&mask.labels);
    out
}

/// Decodes a class-id graymap; labels `>= num_classes` are a validation
/// error.
pub fn decode_mask(bytes: &[u8], num_classes: usize) -> Result<MaskTile> {
    let h = read_header(bytes, b"P5")?;
    let px = payload(bytes, &h, 1)?;
    let mask = MaskTile::new(h.height, h.width, px.to_vec())?;
    mask.validate(num_classes)?;
    Ok(mask)
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_image(path: impl AsRef<Path>) -> Result<ImageTile> {
    decode_image(&read_bytes(path.as_ref())?)
}

pub fn write_image(path: impl AsRef<Path>, img: &ImageTile) -> Result<()> {
    write_bytes(path.as_ref(), &encode_image(img))
}

pub fn read_mask(path: impl AsRef<Path>, num_classes: usize) -> Result<MaskTile> {
    decode_mask(&read_bytes(path.as_ref())?, num_classes)
}

pub fn write_mask(path: impl AsRef<Path>, mask: &MaskTile) -> Result<()> {
    write_bytes(path.as_ref(), &encode_mask(mask))
}
