//! Experiment manifests: one entry per load case pointing at a field file.
//! Field paths are resolved relative to the manifest's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compliance::LoadCase;
use crate::error::{Error, Result};
use crate::field::DisplacementField;
use crate::geometry::Vector3;
use crate::io::field_file::{read_field, FORMAT_VERSION};
use crate::io::json::{read_json, write_canonical};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum MomentUnit {
    #[default]
    #[serde(rename = "N*mm")]
    NewtonMillimetre,
    #[serde(rename = "N*m")]
    NewtonMetre,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub label: String,
    /// N.
    pub force: [f64; 3],
    pub moment: [f64; 3],
    #[serde(default)]
    pub moment_unit: MomentUnit,
    pub field: PathBuf,
}

impl ManifestEntry {
    pub fn load(&self) -> LoadCase {
        let force = Vector3::from(self.force);
        let moment = Vector3::from(self.moment);
        match self.moment_unit {
            MomentUnit::NewtonMillimetre => LoadCase::new(force, moment, self.label.clone()),
            MomentUnit::NewtonMetre => LoadCase::with_moment_nm(force, moment, self.label.clone()),
        }
    }

    pub fn from_load(load: &LoadCase, field: impl Into<PathBuf>) -> Self {
        Self {
            label: load.label.clone(),
            force: load.force.into(),
            moment: load.moment.into(),
            moment_unit: MomentUnit::NewtonMillimetre,
            field: field.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: String,
    pub experiments: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(experiments: Vec<ManifestEntry>) -> Self {
        Self {
            format_version: FORMAT_VERSION.to_string(),
            experiments,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let manifest: Self = read_json(path)?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::format(
                path,
                format!("unsupported format_version '{}'", manifest.format_version),
            ));
        }
        Ok(manifest)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_canonical(path, self)
    }

    /// Loads every referenced field.
    pub fn load_experiments(
        &self,
        manifest_path: &Path,
    ) -> Result<Vec<(LoadCase, DisplacementField)>> {
        let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
        self.experiments
            .iter()
            .map(|e| {
                let path = if e.field.is_absolute() {
                    e.field.clone()
                } else {
                    base.join(&e.field)
                };
                Ok((e.load(), read_field(&path)?))
            })
            .collect()
    }
}
