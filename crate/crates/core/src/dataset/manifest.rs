use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::format::{read_sample, DType};
use super::split::Split;
use crate::config::PayloadKind;
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest";
pub const SAMPLES_DIR: &str = "samples";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: usize,
    /// Path relative to the dataset root.
    pub file: String,
    pub label: u32,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedSample {
    pub id: usize,
    pub label: u32,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub n_r: usize,
    pub n_t: usize,
    pub k_sel: usize,
    pub n_p: usize,
    pub n_j: usize,
    pub class_names: Vec<String>,
    pub payload: PayloadKind,
    /// Per-sample tensor dims as written in the sample headers.
    pub tensor_dims: Vec<usize>,
    pub sample_count: usize,
    /// Written samples per class, in label order.
    pub class_counts: Vec<usize>,
    pub samples: Vec<ManifestEntry>,
    pub skipped: Vec<SkippedSample>,
    pub config_hash: String,
    pub master_seed: u64,
    pub split_ratios: [f64; 3],
    pub split_seed: u64,
}

pub fn sample_file_name(id: usize) -> String {
    format!("{SAMPLES_DIR}/{id:06}.bin")
}

impl DatasetManifest {
    pub fn path(root: &Path) -> PathBuf {
        root.join(MANIFEST_FILE)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, root: &Path) -> Result<()> {
        std::fs::write(Self::path(root), self.to_json()?)?;
        Ok(())
    }

    pub fn read(root: &Path) -> Result<Self> {
        let path = Self::path(root);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::Format {
            path: path.clone(),
            reason: format!("cannot read manifest: {e}"),
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Format { path, reason: e.to_string() })
    }

    pub fn expected_dtype(&self) -> DType {
        match self.payload {
            PayloadKind::ComplexRaw => DType::Complex32,
            PayloadKind::RealNormalized => DType::Float32,
        }
    }

    /// Checks the manifest against the files on disk: counts, labels, dims
    /// and that no stray sample files exist.
    pub fn verify(&self, root: &Path) -> Result<()> {
        let bad = |reason: String| Error::Format { path: Self::path(root), reason };
        if self.samples.len() != self.sample_count {
            return Err(bad(format!("sample_count {} but {} entries", self.sample_count, self.samples.len())));
        }
        let mut per_class = vec![0usize; self.n_j];
        for e in &self.samples {
            let s = read_sample(&root.join(&e.file))?;
            if s.label != e.label {
                return Err(bad(format!("{} has label {} but the manifest says {}", e.file, s.label, e.label)));
            }
            if s.tensor.dims != self.tensor_dims || s.tensor.dtype != self.expected_dtype() {
                return Err(bad(format!("{} has dims {:?}, manifest says {:?}", e.file, s.tensor.dims, self.tensor_dims)));
            }
            *per_class
                .get_mut(e.label as usize)
                .ok_or_else(|| bad(format!("label {} outside {} classes", e.label, self.n_j)))? += 1;
        }
        if per_class != self.class_counts {
            return Err(bad(format!("class counts {:?} do not match manifest {:?}", per_class, self.class_counts)));
        }
        let on_disk = std::fs::read_dir(root.join(SAMPLES_DIR))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().extension().is_some_and(|x| x == "bin"))
            .count();
        if on_disk != self.sample_count {
            return Err(bad(format!("{on_disk} sample files on disk, manifest lists {}", self.sample_count)));
        }
        Ok(())
    }
}
