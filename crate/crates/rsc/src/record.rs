//! Plain-text `key=value` motion model records.
//!
//! ```text
//! kind=translation
//! params=3,0
//! rows=64
//! cols=64
//! readout=1
//! ```

use std::fmt::Write as _;
use std::path::Path;

use rsc_core::imaging::MotionKind;
use rsc_core::{CameraConfig, MotionModel};

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("model record line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("model record: missing key {0:?}")]
    Missing(&'static str),
    #[error("model record: {0}")]
    Invalid(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

/// A fitted or planted motion model with the camera it applies to.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRecord {
    pub model: MotionModel,
    pub config: CameraConfig,
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

pub fn parse_kind(name: &str) -> Option<MotionKind> {
    match name {
        "translation" => Some(MotionKind::Translation),
        "affine" => Some(MotionKind::Affine),
        _ => None,
    }
}

impl ModelRecord {
    pub fn to_text(&self) -> Result<String, RecordError> {
        if self.model.kind() == MotionKind::Dense {
            return Err(RecordError::Invalid(
                "dense motion cannot be stored as a record".into(),
            ));
        }
        let mut s = String::new();
        let c = &self.config;
        writeln!(s, "kind={}", self.model.kind().name()).unwrap();
        writeln!(s, "params={}", join(&self.model.params())).unwrap();
        writeln!(s, "rows={}", c.rows()).unwrap();
        writeln!(s, "cols={}", c.cols()).unwrap();
        writeln!(s, "readout={}", c.readout()).unwrap();
        Ok(s)
    }

    /// Parses a record. Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self, RecordError> {
        let mut kind = None;
        let mut params = None;
        let (mut rows, mut cols, mut readout) = (None, None, None);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| RecordError::Parse {
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, found {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| err(format!("{key}: {v:?} is not a number")))
            };
            let count = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| err(format!("{key}: {v:?} is not a count")))
            };
            match key {
                "kind" => {
                    kind = Some(
                        parse_kind(value).ok_or_else(|| err(format!("unknown kind {value:?}")))?,
                    )
                }
                "params" => {
                    params = Some(value.split(',').map(num).collect::<Result<Vec<_>, _>>()?)
                }
                "rows" => rows = Some(count(value)?),
                "cols" => cols = Some(count(value)?),
                "readout" => readout = Some(num(value)?),
                _ => return Err(err(format!("unknown key {key:?}"))),
            }
        }
        let kind = kind.ok_or(RecordError::Missing("kind"))?;
        let params = params.ok_or(RecordError::Missing("params"))?;
        let model = MotionModel::from_params(kind, &params)
            .map_err(|e| RecordError::Invalid(e.to_string()))?;
        let config = CameraConfig::new(
            rows.ok_or(RecordError::Missing("rows"))?,
            cols.ok_or(RecordError::Missing("cols"))?,
            readout.ok_or(RecordError::Missing("readout"))?,
            0.0,
        )
        .map_err(|e| RecordError::Invalid(e.to_string()))?;
        Ok(Self { model, config })
    }

    pub fn read(path: &Path) -> Result<Self, RecordError> {
        let text = std::fs::read_to_string(path).map_err(|source| RecordError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let rec = ModelRecord {
            model: MotionModel::Affine([1.0 + 1e-9, 0.1, -3.25, 1.0 / 3.0, 1.0, 0.0]),
            config: CameraConfig::new(48, 64, 8.7e-5, 0.0).unwrap(),
        };
        let text = rec.to_text().unwrap();
        assert!(text.starts_with("kind=affine\nparams="));
        assert_eq!(ModelRecord::parse(&text).unwrap(), rec);
    }

    #[test]
    fn translation_text() {
        let rec = ModelRecord {
            model: MotionModel::translation(3.0, 0.0),
            config: CameraConfig::unit(64, 64).unwrap(),
        };
        assert_eq!(
            rec.to_text().unwrap(),
            "kind=translation\nparams=3,0\nrows=64\ncols=64\nreadout=1\n"
        );
    }

    #[test]
    fn malformed_records() {
        let base = "kind=translation\nparams=1,2\nrows=4\ncols=4\nreadout=1\n";
        assert!(ModelRecord::parse(&format!("# note\n\n{base}")).is_ok());
        assert!(matches!(
            ModelRecord::parse(&base.replace("rows=4\n", "")),
            Err(RecordError::Missing("rows"))
        ));
        assert!(matches!(
            ModelRecord::parse(&base.replace("kind=translation", "kind=spline")),
            Err(RecordError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            ModelRecord::parse(&base.replace("params=1,2", "params=1,2,3")),
            Err(RecordError::Invalid(_))
        ));
        assert!(ModelRecord::parse(&format!("{base}speed=3\n")).is_err());
        assert!(ModelRecord::parse("garbage").is_err());
    }
}
