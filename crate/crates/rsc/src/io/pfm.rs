//! Portable float map: `PF` (RGB) or `Pf` (gray), text header, raw `f32`
//! rows stored bottom to top. Negative scale means little-endian.

use std::path::Path;

use rsc_core::Image;

use super::{read_bytes, write_bytes, FormatError};

const FORMAT: &str = "pfm";

pub fn encode(img: &Image) -> Result<Vec<u8>, FormatError> {
    let tag = match img.channels() {
        1 => "Pf",
        3 => "PF",
        c => {
            return Err(FormatError::Unsupported {
                format: FORMAT,
                message: format!("only 1 or 3 channels can be stored, image has {c}"),
            })
        }
    };
    let header = format!("{tag}\n{} {}\n-1.0\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.data().len() * 4);
    out.extend_from_slice(header.as_bytes());
    for y in (0..img.height()).rev() {
        for v in img.row(y) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space(&mut self) {
        while self
            .bytes
            .get(self.pos)
            .is_some_and(u8::is_ascii_whitespace)
        {
            self.pos += 1;
        }
    }

    /// Next whitespace-delimited token and its offset.
    fn token(&mut self, what: &str) -> Result<(&'a str, usize), FormatError> {
        self.skip_space();
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| !b.is_ascii_whitespace())
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(FormatError::malformed(
                FORMAT,
                start,
                format!("missing {what}"),
            ));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map(|s| (s, start))
            .map_err(|_| FormatError::malformed(FORMAT, start, format!("{what} is not ASCII")))
    }

    fn dimension(&mut self, what: &str) -> Result<usize, FormatError> {
        let (tok, at) = self.token(what)?;
        match tok.parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(FormatError::malformed(
                FORMAT,
                at,
                format!("{what} must be a positive integer, found {tok:?}"),
            )),
        }
    }
}

pub fn decode(bytes: &[u8]) -> Result<Image, FormatError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let channels = match bytes.get(..2) {
        Some(b"PF") => 3,
        Some(b"Pf") => 1,
        _ => {
            return Err(FormatError::malformed(
                FORMAT,
                0,
                "bad magic, expected \"PF\" or \"Pf\"",
            ))
        }
    };
    cur.pos = 2;
    if !bytes.get(2).is_some_and(u8::is_ascii_whitespace) {
        return Err(FormatError::malformed(
            FORMAT,
            2,
            "expected whitespace after magic",
        ));
    }
    let width = cur.dimension("width")?;
    let height = cur.dimension("height")?;
    let (tok, at) = cur.token("scale")?;
    let scale: f64 = tok
        .parse()
        .ok()
        .filter(|s: &f64| s.is_finite() && *s != 0.0)
        .ok_or_else(|| {
            FormatError::malformed(
                FORMAT,
                at,
                format!("scale must be a non-zero number, found {tok:?}"),
            )
        })?;
    if !bytes.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(FormatError::malformed(
            FORMAT,
            cur.pos,
            "expected one whitespace byte after scale",
        ));
    }
    let start = cur.pos + 1;
    let count = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .filter(|n| n.checked_mul(4).is_some())
        .ok_or_else(|| {
            FormatError::malformed(FORMAT, 3, format!("{width}x{height} image is too large"))
        })?;
    let payload = &bytes[start.min(bytes.len())..];
    if payload.len() < count * 4 {
        return Err(FormatError::malformed(
            FORMAT,
            bytes.len(),
            format!(
                "truncated pixel data, expected {} bytes from byte {start}, found {}",
                count * 4,
                payload.len()
            ),
        ));
    }
    if payload.len() > count * 4 {
        return Err(FormatError::malformed(
            FORMAT,
            start + count * 4,
            "trailing bytes after pixel data",
        ));
    }
    let little = scale < 0.0;
    let row_len = width * channels;
    let mut data = vec![0.0f32; count];
    for (k, chunk) in payload.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (file_row, col) = (k / row_len, k % row_len);
        data[(height - 1 - file_row) * row_len + col] = v;
    }
    Image::from_vec(width, height, channels, data)
        .map_err(|e| FormatError::malformed(FORMAT, start, e.to_string()))
}

pub fn read(path: &Path) -> Result<Image, FormatError> {
    decode(&read_bytes(path)?).map_err(|e| with_path(e, path))
}

pub fn write(path: &Path, img: &Image) -> Result<(), FormatError> {
    write_bytes(path, &encode(img)?)
}

fn with_path(e: FormatError, path: &Path) -> FormatError {
    match e {
        FormatError::Malformed {
            offset, message, ..
        } => FormatError::Malformed {
            format: FORMAT,
            offset,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    }
}
