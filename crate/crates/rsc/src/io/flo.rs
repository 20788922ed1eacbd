//! Middlebury `.flo`: magic `PIEH`, `i32` width and height, then interleaved
//! `(u, v)` `f32` pairs row by row, all little-endian. Components above
//! [`UNKNOWN_THRESHOLD`] mark unknown flow, which maps to holes.

use std::path::Path;

use rsc_core::FlowField;

use super::{le4, read_bytes, write_bytes, FormatError};

const FORMAT: &str = "flo";
pub const MAGIC: [u8; 4] = *b"PIEH";
/// Written for hole pixels.
pub const UNKNOWN_FLOW: f32 = 1e10;
pub const UNKNOWN_THRESHOLD: f32 = 1e9;

pub fn encode(flow: &FlowField) -> Result<Vec<u8>, FormatError> {
    let dim = |n: usize, what: &str| {
        i32::try_from(n).map_err(|_| FormatError::Unsupported {
            format: FORMAT,
            message: format!("{what} {n} does not fit in a 32-bit header"),
        })
    };
    let (w, h) = (dim(flow.width(), "width")?, dim(flow.height(), "height")?);
    let mut out = Vec::with_capacity(12 + flow.data().len() * 8);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&w.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    let holes = flow.holes();
    for (i, [u, v]) in flow.data().iter().enumerate() {
        let (u, v) = if holes.is_some_and(|m| m[i]) {
            (UNKNOWN_FLOW, UNKNOWN_FLOW)
        } else {
            (*u, *v)
        };
        out.extend_from_slice(&u.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<FlowField, FormatError> {
    if bytes.get(..4) != Some(&MAGIC[..]) {
        return Err(FormatError::malformed(
            FORMAT,
            0,
            "bad magic, expected \"PIEH\"",
        ));
    }
    let dim = |offset: usize, what: &str| -> Result<usize, FormatError> {
        let n = i32::from_le_bytes(le4(bytes, offset, FORMAT, what)?);
        usize::try_from(n).ok().filter(|&n| n > 0).ok_or_else(|| {
            FormatError::malformed(
                FORMAT,
                offset,
                format!("{what} must be positive, found {n}"),
            )
        })
    };
    let (w, h) = (dim(4, "width")?, dim(8, "height")?);
    let need = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| FormatError::malformed(FORMAT, 4, format!("{w}x{h} field is too large")))?;
    let payload = &bytes[12..];
    if payload.len() < need {
        return Err(FormatError::malformed(
            FORMAT,
            bytes.len(),
            format!(
                "truncated flow data, expected {need} bytes from byte 12, found {}",
                payload.len()
            ),
        ));
    }
    if payload.len() > need {
        return Err(FormatError::malformed(
            FORMAT,
            12 + need,
            "trailing bytes after flow data",
        ));
    }
    let f = |b: &[u8]| f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
    let data: Vec<[f32; 2]> = payload
        .chunks_exact(8)
        .map(|c| [f(&c[..4]), f(&c[4..])])
        .collect();
    let holes: Vec<bool> = data
        .iter()
        .map(|[u, v]| u.abs() > UNKNOWN_THRESHOLD || v.abs() > UNKNOWN_THRESHOLD)
        .collect();
    let field = FlowField::from_vec(w, h, data)
        .map_err(|e| FormatError::malformed(FORMAT, 12, e.to_string()))?;
    if holes.iter().any(|&b| b) {
        field
            .with_holes(holes)
            .map_err(|e| FormatError::malformed(FORMAT, 12, e.to_string()))
    } else {
        Ok(field)
    }
}

pub fn read(path: &Path) -> Result<FlowField, FormatError> {
    decode(&read_bytes(path)?).map_err(|e| match e {
        FormatError::Malformed {
            offset, message, ..
        } => FormatError::Malformed {
            format: FORMAT,
            offset,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

pub fn write(path: &Path, flow: &FlowField) -> Result<(), FormatError> {
    write_bytes(path, &encode(flow)?)
}
