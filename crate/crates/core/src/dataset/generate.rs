use std::path::Path;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::format::{write_sample, DatasetSample, SampleTensor};
use super::manifest::{sample_file_name, DatasetManifest, ManifestEntry, SkippedSample, FORMAT_VERSION, SAMPLES_DIR};
use super::split::{largest_remainder, split_dataset, Split};
use crate::channel::{calibrate_noise, simulate_dwell, ChannelNoise, DwellMetadata};
use crate::config::{ExperimentConfig, PayloadKind};
use crate::features::{normalize, to_real};
use crate::scene::{build_target, TargetClass, TargetModel};
use crate::{par, Error, Result};

/// Seeds of one sample, derived from the master seed and the sample id alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SampleSeeds {
    pub scenario: u64,
    pub noise: u64,
}

pub fn sample_seeds(master_seed: u64, id: usize) -> SampleSeeds {
    // Stream 0 is reserved for the label shuffle.
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(id as u64 + 1);
    SampleSeeds { scenario: rng.next_u64(), noise: rng.next_u64() }
}

/// Class label of every sample id: largest-remainder counts from the class
/// mix, shuffled with the master seed.
pub fn assign_labels(samples: usize, mix: &[(TargetClass, f64)], master_seed: u64) -> Vec<u32> {
    let weights: Vec<f64> = mix.iter().map(|(_, f)| *f).collect();
    let counts = largest_remainder(samples, &weights);
    let mut labels: Vec<u32> = mix
        .iter()
        .zip(counts)
        .flat_map(|((class, _), n)| std::iter::repeat_n(class.index(), n))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    labels.shuffle(&mut rng);
    labels
}

#[derive(Serialize)]
struct SampleMetadata<'a> {
    id: usize,
    seeds: SampleSeeds,
    payload: PayloadKind,
    /// Normalization scalar; 1 for raw payloads.
    scale: f64,
    degenerate: bool,
    #[serde(flatten)]
    dwell: &'a DwellMetadata,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerateReport {
    pub written: usize,
    pub skipped: usize,
    pub class_counts: Vec<usize>,
    /// Train, val, test.
    pub split_counts: [usize; 3],
    pub noise_sigma: Option<f64>,
    pub mean_iterations: f64,
    pub max_residual: f64,
    /// SHA-256 over the manifest followed by every sample file in id order.
    pub digest: String,
}

/// Generates the dataset described by `cfg` under `out`. The output is a
/// pure function of the configuration: rerunning it yields identical bytes.
pub fn generate_dataset(cfg: &ExperimentConfig, out: &Path, overwrite: bool) -> Result<GenerateReport> {
    cfg.validate()?;
    prepare_output(out, overwrite)?;

    let array = cfg.array_geometry()?;
    let subcarriers = cfg.subcarrier_set()?;
    let sampler = cfg.sampler();
    let mix = cfg.class_mix()?;
    let params = cfg.geometry.params();
    let models: Vec<TargetModel> =
        TargetClass::ALL.iter().map(|c| build_target(*c, &params, cfg.geometry.pitch_m)).collect::<Result<_>>()?;

    let sigma = if cfg.noise.enabled {
        let cal = calibrate_noise(&cfg.noise.noise_config(), &array, &cfg.subcarriers, &cfg.solver)?;
        tracing::info!(sigma = cal.sigma_h, power = cal.calibration_power, voxels = cal.calibration_voxels, "noise calibrated");
        Some(cal.sigma_h)
    } else {
        None
    };

    let labels = assign_labels(cfg.dataset.samples, &mix, cfg.dataset.master_seed);
    let mut written: Vec<(usize, u32)> = Vec::new();
    let mut skipped = Vec::new();
    let mut iterations = 0usize;
    let mut cells = 0usize;
    let mut max_residual = 0.0f64;

    // Samples are simulated in parallel and written in id order.
    let jobs: Vec<(usize, u32)> = labels.iter().copied().enumerate().collect();
    let simulated = par::map_slice(&jobs, |&(id, label)| {
        let seeds = sample_seeds(cfg.dataset.master_seed, id);
        let scenario = sampler.sample(seeds.scenario);
        let noise = sigma.map(|s| ChannelNoise { sigma: s, seed: seeds.noise ^ cfg.noise.rng_seed });
        let out = simulate_dwell(&models[label as usize], &scenario, &array, &subcarriers, &cfg.solver, noise);
        (seeds, out)
    });

    for (&(id, label), (seeds, result)) in jobs.iter().zip(simulated) {
        let (tensor, dwell) = match result {
            Ok(v) => v,
            Err(e) => {
                tracing::warn!(id, label, error = %e, "sample skipped");
                skipped.push(SkippedSample { id, label, reason: e.to_string() });
                continue;
            }
        };
        for c in &dwell.cells {
            iterations += c.iterations;
            max_residual = max_residual.max(c.residual);
        }
        cells += dwell.cells.len();

        let (payload, scale, degenerate) = match cfg.dataset.payload {
            PayloadKind::ComplexRaw => (SampleTensor::from_complex(&tensor.data), 1.0, false),
            PayloadKind::RealNormalized => {
                let u = normalize(&to_real(&tensor));
                (SampleTensor::from_features(&u), u.scale, u.degenerate)
            }
        };
        let metadata = serde_json::to_value(SampleMetadata {
            id,
            seeds,
            payload: cfg.dataset.payload,
            scale,
            degenerate,
            dwell: &dwell,
        })?;
        write_sample(&out.join(sample_file_name(id)), &DatasetSample { label, metadata, tensor: payload })?;
        tracing::debug!(id, label, "sample written");
        written.push((id, label));
    }

    let written_labels: Vec<u32> = written.iter().map(|(_, l)| *l).collect();
    let splits = split_dataset(&written_labels, cfg.dataset.split, cfg.dataset.split_seed)?;
    let mut class_counts = vec![0usize; TargetClass::ALL.len()];
    for l in &written_labels {
        class_counts[*l as usize] += 1;
    }
    let mut split_counts = [0usize; 3];
    for s in &splits {
        split_counts[Split::ALL.iter().position(|x| x == s).unwrap_or(0)] += 1;
    }

    let (k_sel, n_p) = (subcarriers.indices.len(), cfg.scenario.frames);
    let (n_r, n_t) = (array.n_rx(), array.n_tx());
    let tensor_dims = match cfg.dataset.payload {
        PayloadKind::ComplexRaw => vec![n_r, n_t, k_sel, n_p],
        PayloadKind::RealNormalized => vec![2, n_r, n_t, n_p, k_sel],
    };
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        n_r,
        n_t,
        k_sel,
        n_p,
        n_j: TargetClass::ALL.len(),
        class_names: TargetClass::ALL.iter().map(|c| c.name().to_string()).collect(),
        payload: cfg.dataset.payload,
        tensor_dims,
        sample_count: written.len(),
        class_counts: class_counts.clone(),
        samples: written
            .iter()
            .zip(&splits)
            .map(|(&(id, label), &split)| ManifestEntry { id, file: sample_file_name(id), label, split })
            .collect(),
        skipped: skipped.clone(),
        config_hash: cfg.hash(),
        master_seed: cfg.dataset.master_seed,
        split_ratios: cfg.dataset.split,
        split_seed: cfg.dataset.split_seed,
    };
    manifest.write(out)?;

    Ok(GenerateReport {
        written: written.len(),
        skipped: skipped.len(),
        class_counts,
        split_counts,
        noise_sigma: sigma,
        mean_iterations: if cells > 0 { iterations as f64 / cells as f64 } else { 0.0 },
        max_residual,
        digest: dataset_digest(out)?,
    })
}

/// SHA-256 over the manifest bytes and then every listed sample file.
pub fn dataset_digest(root: &Path) -> Result<String> {
    let manifest = DatasetManifest::read(root)?;
    let mut h = Sha256::new();
    h.update(std::fs::read(DatasetManifest::path(root))?);
    for e in &manifest.samples {
        h.update(std::fs::read(root.join(&e.file))?);
    }
    Ok(hex::encode(h.finalize()))
}

fn prepare_output(out: &Path, overwrite: bool) -> Result<()> {
    let samples = out.join(SAMPLES_DIR);
    let manifest = DatasetManifest::path(out);
    let occupied = manifest.exists() || samples.read_dir().map(|mut d| d.next().is_some()).unwrap_or(false);
    if occupied {
        if !overwrite {
            return Err(Error::InvalidConfig(format!(
                "{} already holds a dataset; pass overwrite to replace it",
                out.display()
            )));
        }
        if samples.exists() {
            std::fs::remove_dir_all(&samples)?;
        }
        if manifest.exists() {
            std::fs::remove_file(&manifest)?;
        }
    }
    std::fs::create_dir_all(&samples)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_follow_the_mix() {
        let mix = [(TargetClass::Car, 0.5), (TargetClass::Motorcycle, 0.5)];
        let l = assign_labels(11, &mix, 3);
        assert_eq!(l.iter().filter(|x| **x == 0).count(), 6);
        assert_eq!(l, assign_labels(11, &mix, 3));
        assert_ne!(l, assign_labels(11, &mix, 4));
    }

    #[test]
    fn seeds_depend_on_id_only() {
        assert_eq!(sample_seeds(5, 9), sample_seeds(5, 9));
        assert_ne!(sample_seeds(5, 9), sample_seeds(5, 10));
        assert_ne!(sample_seeds(5, 9).scenario, sample_seeds(5, 9).noise);
    }

    #[test]
    fn refuses_to_clobber_without_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("manifest"), "{}").unwrap();
        assert!(prepare_output(dir.path(), false).is_err());
        prepare_output(dir.path(), true).unwrap();
        assert!(!dir.path().join("manifest").exists());
        assert!(dir.path().join("samples").is_dir());
    }
}
