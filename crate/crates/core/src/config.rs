//! Experiment configuration file.
//!
//! The file is TOML; every section is optional and unknown keys are
//! rejected. Dotted `key=value` overrides are applied on top of the parsed
//! document before it is checked, so they obey the same schema.
//!
//! ```toml
//! [array]
//! n_tx = 8
//! n_rx = 8
//!
//! [subcarriers]
//! carrier_hz = 1.2e8
//! spacing_hz = 1.2e5
//! count = 64
//!
//! [selection]
//! k_sel = 4            # evenly spaced; or `indices = [0, 16, 32, 48]`
//!
//! [scenario]
//! frames = 4
//! frame_interval_s = 0.01
//!
//! [geometry]
//! pitch_m = 0.25       # [geometry.car], [geometry.motorcycle], [geometry.materials.*]
//!
//! [solver]             # tolerance, max_iterations, mode, self_term, restart, enforce_pitch_bound
//! [noise]              # target_snr_db, reference_range_m, rng_seed, enabled
//!
//! [dataset]
//! samples = 400
//! master_seed = 1
//! class_mix = { car = 0.5, motorcycle = 0.5 }
//! split = [0.7, 0.15, 0.15]
//! split_seed = 7
//! payload = "complex_raw"   # or "real_normalized"
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::array::ArrayGeometry;
use crate::channel::{NoiseConfig, SubcarrierGrid, SubcarrierSet};
use crate::features::SensingSelection;
use crate::scene::{BodyParams, GeometryParams, MaterialTable, ScenarioSampler, TargetClass};
use crate::solver::SolverConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArraySection {
    pub n_tx: usize,
    pub n_rx: usize,
}

impl Default for ArraySection {
    fn default() -> Self {
        Self { n_tx: 8, n_rx: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSection {
    /// Evenly spaced selection of this many subcarriers.
    pub k_sel: usize,
    /// Explicit 0-based indices; overrides `k_sel` when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub indices: Option<Vec<usize>>,
}

impl Default for SelectionSection {
    fn default() -> Self {
        Self { k_sel: 4, indices: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub frames: usize,
    pub frame_interval_s: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self { frames: 4, frame_interval_s: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub pitch_m: f64,
    pub car: BodyParams,
    pub motorcycle: BodyParams,
    pub materials: MaterialTable,
}

impl Default for GeometrySection {
    fn default() -> Self {
        let g = GeometryParams::default();
        Self { pitch_m: 0.25, car: g.car, motorcycle: g.motorcycle, materials: g.materials }
    }
}

impl GeometrySection {
    pub fn params(&self) -> GeometryParams {
        GeometryParams { car: self.car, motorcycle: self.motorcycle, materials: self.materials }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub enabled: bool,
    pub target_snr_db: f64,
    pub reference_range_m: f64,
    pub rng_seed: u64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let n = NoiseConfig::default();
        Self { enabled: true, target_snr_db: n.target_snr_db, reference_range_m: n.reference_range_m, rng_seed: n.rng_seed }
    }
}

impl NoiseSection {
    pub fn noise_config(&self) -> NoiseConfig {
        NoiseConfig { target_snr_db: self.target_snr_db, reference_range_m: self.reference_range_m, rng_seed: self.rng_seed }
    }
}

/// What each sample file stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadKind {
    /// Reduced complex tensor `(N_r, N_t, K_sel, N_p)` before normalization.
    ComplexRaw,
    /// Normalized real stack `(2, N_r, N_t, N_p, K_sel)`.
    RealNormalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub samples: usize,
    pub master_seed: u64,
    /// Class name to fraction; fractions must sum to 1.
    pub class_mix: BTreeMap<String, f64>,
    pub split: [f64; 3],
    pub split_seed: u64,
    pub payload: PayloadKind,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            samples: 400,
            master_seed: 1,
            class_mix: TargetClass::ALL.iter().map(|c| (c.name().to_string(), 0.5)).collect(),
            split: [0.7, 0.15, 0.15],
            split_seed: 7,
            payload: PayloadKind::ComplexRaw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub array: ArraySection,
    pub subcarriers: SubcarrierGrid,
    pub selection: SelectionSection,
    pub scenario: ScenarioSection,
    pub geometry: GeometrySection,
    pub solver: SolverConfig,
    pub noise: NoiseSection,
    pub dataset: DatasetSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            array: ArraySection::default(),
            subcarriers: SubcarrierGrid::default(),
            selection: SelectionSection::default(),
            scenario: ScenarioSection::default(),
            geometry: GeometrySection::default(),
            solver: SolverConfig::default(),
            noise: NoiseSection::default(),
            dataset: DatasetSection::default(),
        }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    // Reuse the TOML grammar for the right-hand side; bare words are strings.
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Applies `a.b.c=value` to a parsed document.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("override `{assignment}` is not of the form key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::InvalidConfig(format!("override key `{path}` is malformed")));
    }
    let mut table = doc;
    for key in &keys[..keys.len() - 1] {
        let entry = table.entry(key.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::InvalidConfig(format!("override key `{path}`: `{key}` is not a table")))?;
    }
    table.insert(keys[keys.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl ExperimentConfig {
    /// Parses a document and applies overrides. Errors carry the offending
    /// key and, for the file itself, its line.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let cfg: Self = if overrides.is_empty() {
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?
        } else {
            let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))?;
            for o in overrides {
                apply_override(&mut doc, o)?;
            }
            toml::Value::Table(doc)
                .try_into()
                .map_err(|e: toml::de::Error| Error::InvalidConfig(format!("after overrides: {e}")))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text, overrides).map_err(|e| match e {
            Error::InvalidConfig(msg) => Error::InvalidConfig(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration is always representable in TOML")
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml_string().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.array.n_tx == 0 || self.array.n_rx == 0 {
            return Err(Error::InvalidConfig("array needs at least one transmitter and one receiver".into()));
        }
        self.subcarriers.validate()?;
        self.subcarrier_set()?;
        if self.scenario.frames == 0 || !(self.scenario.frame_interval_s > 0.0) {
            return Err(Error::InvalidConfig("scenario needs frames >= 1 and a positive frame interval".into()));
        }
        if !(self.geometry.pitch_m > 0.0) {
            return Err(Error::InvalidConfig("geometry.pitch_m must be positive".into()));
        }
        self.geometry.materials.validate()?;
        self.solver.validate()?;
        if self.noise.enabled {
            self.noise.noise_config().validate()?;
        }
        self.class_mix()?;
        let split_sum: f64 = self.dataset.split.iter().sum();
        if self.dataset.split.iter().any(|r| *r < 0.0) || (split_sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("dataset.split must be non-negative and sum to 1, got {:?}", self.dataset.split)));
        }
        Ok(())
    }

    pub fn array_geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::cross(self.array.n_tx, self.array.n_rx, self.subcarriers.carrier_hz)
    }

    pub fn selection(&self) -> Result<SensingSelection> {
        match &self.selection.indices {
            Some(ix) => SensingSelection::new(ix.clone()),
            None => SensingSelection::evenly_spaced(self.selection.k_sel, self.subcarriers.count),
        }
    }

    /// The selected subcarriers; only these are simulated.
    pub fn subcarrier_set(&self) -> Result<SubcarrierSet> {
        let set = SubcarrierSet { grid: self.subcarriers, indices: self.selection()?.indices().to_vec() };
        set.validate()?;
        Ok(set)
    }

    pub fn sampler(&self) -> ScenarioSampler {
        ScenarioSampler { frames: self.scenario.frames, frame_interval_s: self.scenario.frame_interval_s }
    }

    /// Class fractions in class-index order.
    pub fn class_mix(&self) -> Result<Vec<(TargetClass, f64)>> {
        for name in self.dataset.class_mix.keys() {
            if !TargetClass::ALL.iter().any(|c| c.name() == name) {
                return Err(Error::InvalidConfig(format!("dataset.class_mix: unknown class `{name}`")));
            }
        }
        let mix: Vec<(TargetClass, f64)> = TargetClass::ALL
            .iter()
            .map(|c| (*c, self.dataset.class_mix.get(c.name()).copied().unwrap_or(0.0)))
            .collect();
        let total: f64 = mix.iter().map(|(_, f)| f).sum();
        if mix.iter().any(|(_, f)| *f < 0.0 || !f.is_finite()) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("dataset.class_mix must be non-negative and sum to 1, got {:?}", self.dataset.class_mix)));
        }
        Ok(mix)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml_string();
        let back = ExperimentConfig::from_toml_str(&text, &[]).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(ExperimentConfig::from_toml_str("", &[]).unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn unknown_key_is_named_with_its_line() {
        let err = ExperimentConfig::from_toml_str("[array]\nn_tx = 4\nbogus_key = 3\n", &[]).unwrap_err().to_string();
        assert!(err.contains("bogus_key"), "{err}");
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn overrides_apply_and_are_checked() {
        let cfg = ExperimentConfig::from_toml_str(
            "[dataset]\nsamples = 10\n",
            &["dataset.samples=4".into(), "solver.mode=dense_direct".into(), "selection.indices=[1, 5]".into()],
        )
        .unwrap();
        assert_eq!(cfg.dataset.samples, 4);
        assert_eq!(cfg.solver.mode, crate::solver::SolverMode::DenseDirect);
        assert_eq!(cfg.selection().unwrap().indices(), &[1, 5]);

        let err = ExperimentConfig::from_toml_str("", &["solver.nope=1".into()]).unwrap_err().to_string();
        assert!(err.contains("nope"), "{err}");
        assert!(ExperimentConfig::from_toml_str("", &["solver".into()]).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        for bad in [
            "[dataset]\nsplit = [0.5, 0.5, 0.5]\n",
            "[dataset]\nclass_mix = { car = 0.5, truck = 0.5 }\n",
            "[dataset]\nclass_mix = { car = 0.7 }\n",
            "[selection]\nk_sel = 0\n",
            "[solver]\ntolerance = 0.5\n",
        ] {
            assert!(ExperimentConfig::from_toml_str(bad, &[]).is_err(), "{bad}");
        }
    }

    #[test]
    fn hash_changes_with_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.dataset.master_seed += 1;
        assert_ne!(a.hash(), b.hash());
    }
}
