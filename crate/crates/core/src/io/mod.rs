//! File formats and report types.

pub mod field_file;
pub mod json;
pub mod manifest;
pub mod report;

pub use field_file::{read_field, write_field, FieldFile, FieldFormat, NodeRecord};
pub use json::{read_json, to_canonical_string, write_canonical};
pub use manifest::{Manifest, ManifestEntry, MomentUnit};
