//! Displacement-field files. JSON is canonical; a `.csv` extension selects
//! a tabular layout with one comment line carrying the metadata:
//!
//! ```text
//! # format_version=1 reference_point=0 0 0
//! px,py,pz,dpx,dpy,dpz
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{DisplacementField, Node};
use crate::geometry::Vector3;
use crate::io::json::{to_canonical_string, write_canonical};

pub const FORMAT_VERSION: &str = "1";
pub const CSV_HEADER: [&str; 6] = ["px", "py", "pz", "dpx", "dpy", "dpz"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub p: [f64; 3],
    pub dp: [f64; 3],
}

/// On-disk field. Positions are absolute; `reference_point` is the point
/// whose deflection is sought.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldFile {
    pub format_version: String,
    pub reference_point: [f64; 3],
    pub nodes: Vec<NodeRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldFormat {
    Json,
    Csv,
}

impl FieldFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => FieldFormat::Csv,
            _ => FieldFormat::Json,
        }
    }
}

impl FieldFile {
    pub fn from_field(field: &DisplacementField) -> Self {
        let origin = field.origin();
        Self {
            format_version: FORMAT_VERSION.to_string(),
            reference_point: origin.into(),
            nodes: field
                .nodes()
                .iter()
                .map(|n| NodeRecord {
                    p: (n.p + origin).into(),
                    dp: n.dp.into(),
                })
                .collect(),
        }
    }

    pub fn to_field(&self) -> Result<DisplacementField> {
        let nodes = self
            .nodes
            .iter()
            .map(|r| Node::new(Vector3::from(r.p), Vector3::from(r.dp)))
            .collect();
        DisplacementField::new(Vector3::from(self.reference_point), nodes)
    }

    fn check(&self, path: &Path) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::format(
                path,
                format!("unsupported format_version '{}'", self.format_version),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        to_canonical_string(self)
    }

    pub fn to_csv(&self) -> Result<String> {
        let rp = self.reference_point;
        let mut out = format!(
            "# format_version={} reference_point={} {} {}\n",
            self.format_version, rp[0], rp[1], rp[2]
        );
        let mut w = csv::Writer::from_writer(Vec::new());
        let io_err = |e: csv::Error| Error::InvalidInput(e.to_string());
        w.write_record(CSV_HEADER).map_err(io_err)?;
        for n in &self.nodes {
            // `Display` for f64 prints the shortest string that parses back
            // to the same value.
            w.write_record(n.p.iter().chain(&n.dp).map(|v| v.to_string()))
                .map_err(io_err)?;
        }
        let body = w
            .into_inner()
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        out.push_str(&String::from_utf8(body).expect("csv emits UTF-8"));
        Ok(out)
    }

    pub fn parse_json(text: &str, path: &Path) -> Result<Self> {
        let file: Self = serde_json::from_str(text).map_err(|e| Error::format(path, e))?;
        file.check(path)?;
        Ok(file)
    }

    /// Parses the CSV layout. Without a metadata line the reference point
    /// defaults to the origin.
    pub fn parse_csv(text: &str, path: &Path) -> Result<Self> {
        let mut format_version = FORMAT_VERSION.to_string();
        let mut reference_point = [0.0; 3];
        if let Some(meta) = text.lines().next().and_then(|l| l.strip_prefix('#')) {
            let mut tokens = meta.split_whitespace().peekable();
            while let Some(tok) = tokens.next() {
                if let Some(v) = tok.strip_prefix("format_version=") {
                    format_version = v.to_string();
                } else if let Some(first) = tok.strip_prefix("reference_point=") {
                    let mut coords = vec![first.to_string()];
                    for _ in 0..2 {
                        coords.push(tokens.next().unwrap_or_default().to_string());
                    }
                    for (slot, c) in reference_point.iter_mut().zip(&coords) {
                        *slot = c.parse().map_err(|_| {
                            Error::format(path, format!("bad reference_point value '{c}'"))
                        })?;
                    }
                }
            }
        }
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::format(path, e))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
            return Err(Error::format(
                path,
                format!("expected header {}", CSV_HEADER.join(",")),
            ));
        }
        let mut nodes = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::format(path, e))?;
            let mut v = [0.0; 6];
            for (slot, field) in v.iter_mut().zip(record.iter()) {
                *slot = field.parse().map_err(|_| {
                    Error::format(path, format!("row {}: bad number '{field}'", row + 1))
                })?;
            }
            nodes.push(NodeRecord {
                p: [v[0], v[1], v[2]],
                dp: [v[3], v[4], v[5]],
            });
        }
        let file = Self {
            format_version,
            reference_point,
            nodes,
        };
        file.check(path)?;
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        match FieldFormat::from_path(path) {
            FieldFormat::Json => Self::parse_json(&text, path),
            FieldFormat::Csv => Self::parse_csv(&text, path),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        match FieldFormat::from_path(path) {
            FieldFormat::Json => write_canonical(path, self),
            FieldFormat::Csv => {
                std::fs::write(path, self.to_csv()?).map_err(|e| Error::io(path, e))
            }
        }
    }
}

pub fn read_field(path: &Path) -> Result<DisplacementField> {
    FieldFile::read(path)?.to_field()
}

pub fn write_field(path: &Path, field: &DisplacementField) -> Result<()> {
    FieldFile::from_field(field).write(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldgen::{make_grid, GridSpec};
    use proptest::prelude::*;

    fn sample() -> FieldFile {
        FieldFile {
            format_version: FORMAT_VERSION.into(),
            reference_point: [1.5, -2.0, 0.1],
            nodes: vec![
                NodeRecord {
                    p: [0.0, 1.0, 2.0],
                    dp: [1e-5, -3.3e-7, 0.1],
                },
                NodeRecord {
                    p: [1.0, 0.0, 2.0],
                    dp: [2e-5, 0.0, -0.25],
                },
                NodeRecord {
                    p: [1.0, 1.0, -2.0],
                    dp: [1.0 / 3.0, 7.0, 1e-300],
                },
            ],
        }
    }

    #[test]
    fn json_and_csv_round_trip() {
        let f = sample();
        let p = Path::new("x");
        assert_eq!(FieldFile::parse_json(&f.to_json().unwrap(), p).unwrap(), f);
        assert_eq!(FieldFile::parse_csv(&f.to_csv().unwrap(), p).unwrap(), f);
    }

    #[test]
    fn csv_without_metadata() {
        let text = "px,py,pz,dpx,dpy,dpz\n0,0,0,1,1,1\n1,0,0,1,1,1\n0,1,0,1,1,1\n";
        let f = FieldFile::parse_csv(text, Path::new("x.csv")).unwrap();
        assert_eq!(f.reference_point, [0.0; 3]);
        assert_eq!(f.nodes.len(), 3);
    }

    #[test]
    fn rejects_bad_header_and_version() {
        let p = Path::new("x.csv");
        assert!(matches!(
            FieldFile::parse_csv("a,b\n1,2\n", p),
            Err(Error::Format { .. })
        ));
        let mut f = sample();
        f.format_version = "9".into();
        assert!(FieldFile::parse_json(&f.to_json().unwrap(), p).is_err());
    }

    #[test]
    fn field_round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let field = make_grid(&GridSpec::cubic(2.0, 1.0)).unwrap();
        for name in ["f.json", "f.csv"] {
            let path = dir.path().join(name);
            write_field(&path, &field).unwrap();
            assert_eq!(read_field(&path).unwrap(), field);
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_field(Path::new("/nonexistent/field.json")).unwrap_err();
        assert_eq!(err.class(), crate::error::ErrorClass::Io);
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![
            -1e6..1e6f64,
            any::<f64>().prop_filter("finite", |v| v.is_finite())
        ]
    }

    proptest! {
        #[test]
        fn lossless(values in prop::collection::vec(finite(), 21..60)) {
            let n = values.len() / 6;
            let nodes = (0..n).map(|i| NodeRecord {
                p: [values[6 * i], values[6 * i + 1], values[6 * i + 2]],
                dp: [values[6 * i + 3], values[6 * i + 4], values[6 * i + 5]],
            }).collect();
            let f = FieldFile {
                format_version: FORMAT_VERSION.into(),
                reference_point: [values[0], values[1], values[2]],
                nodes,
            };
            let p = Path::new("x");
            let from_json = FieldFile::parse_json(&f.to_json().unwrap(), p).unwrap();
            let from_csv = FieldFile::parse_csv(&f.to_csv().unwrap(), p).unwrap();
            prop_assert_eq!(&from_json, &f);
            prop_assert_eq!(&from_csv, &f);
        }
    }
}
