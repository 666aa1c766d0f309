use std::path::Path;

use nearfield_core::config::{ExperimentConfig, PayloadKind};
use nearfield_core::dataset::{dataset_digest, generate_dataset, read_sample, DType, DatasetManifest, Split};

fn tiny(extra: &[&str]) -> ExperimentConfig {
    let text = r#"
        [array]
        n_tx = 2
        n_rx = 3
        [selection]
        k_sel = 2
        [scenario]
        frames = 2
        [solver]
        mode = "dense_direct"
        [dataset]
        samples = 6
        split = [0.5, 0.5, 0.0]
        [dataset.class_mix]
        car = 0.0
        motorcycle = 1.0
    "#;
    let overrides: Vec<String> = extra.iter().map(|s| s.to_string()).collect();
    ExperimentConfig::from_toml_str(text, &overrides).unwrap()
}

fn files(root: &Path) -> Vec<Vec<u8>> {
    let m = DatasetManifest::read(root).unwrap();
    m.samples.iter().map(|e| std::fs::read(root.join(&e.file)).unwrap()).collect()
}

#[test]
fn layout_manifest_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let report = generate_dataset(&tiny(&[]), dir.path(), false).unwrap();
    assert_eq!(report.written, 6);
    assert_eq!(report.class_counts, vec![0, 6]);
    assert_eq!(report.split_counts, [3, 3, 0]);

    let m = DatasetManifest::read(dir.path()).unwrap();
    m.verify(dir.path()).unwrap();
    assert_eq!((m.n_r, m.n_t, m.k_sel, m.n_p, m.n_j), (3, 2, 2, 2, 2));
    assert_eq!(m.tensor_dims, vec![3, 2, 2, 2]);
    assert_eq!(m.config_hash, tiny(&[]).hash());
    assert!(m.samples.iter().all(|e| e.split != Split::Test));

    let s = read_sample(&dir.path().join(&m.samples[0].file)).unwrap();
    assert_eq!(s.tensor.dtype, DType::Complex32);
    assert_eq!(s.label, 1);
    let meta = &s.metadata;
    assert_eq!(meta["class_name"], "motorcycle");
    assert_eq!(meta["subcarrier_indices"], serde_json::json!([0, 32]));
    assert_eq!(meta["cells"].as_array().unwrap().len(), 4);
    assert!(meta["noise"]["sigma"].as_f64().unwrap() > 0.0);
    assert!(meta.get("wall_time").is_none());
    assert_eq!(report.digest, dataset_digest(dir.path()).unwrap());
}

#[test]
fn seed_changes_the_data_and_overwrite_is_explicit() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = generate_dataset(&tiny(&[]), a.path(), false).unwrap();
    let rb = generate_dataset(&tiny(&["dataset.master_seed=2"]), b.path(), false).unwrap();
    assert_ne!(ra.digest, rb.digest);
    assert_ne!(files(a.path()), files(b.path()));

    // A different noise seed keeps the scenarios and redraws only the noise.
    let c = tempfile::tempdir().unwrap();
    generate_dataset(&tiny(&["noise.rng_seed=9"]), c.path(), false).unwrap();
    let sa = read_sample(&a.path().join("samples/000000.bin")).unwrap();
    let sc = read_sample(&c.path().join("samples/000000.bin")).unwrap();
    assert_eq!(sa.metadata["scenario"], sc.metadata["scenario"]);
    assert_ne!(sa.tensor, sc.tensor);

    assert!(generate_dataset(&tiny(&[]), b.path(), false).is_err());
    let again = generate_dataset(&tiny(&[]), b.path(), true).unwrap();
    assert_eq!(again.digest, ra.digest);
}

#[test]
fn normalized_payload_is_bounded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(&["dataset.payload=\"real_normalized\""]);
    assert_eq!(cfg.dataset.payload, PayloadKind::RealNormalized);
    generate_dataset(&cfg, dir.path(), false).unwrap();
    let m = DatasetManifest::read(dir.path()).unwrap();
    assert_eq!(m.tensor_dims, vec![2, 3, 2, 2, 2]);
    for e in &m.samples {
        let s = read_sample(&dir.path().join(&e.file)).unwrap();
        let scale = s.metadata["scale"].as_f64().unwrap();
        let u = s.tensor.to_features(scale, false).unwrap();
        let peak = u.to_complex().iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!((peak - 1.0).abs() < 1e-6, "{peak}");
        assert!(scale > 0.0);
    }
}

#[test]
fn noiseless_generation_matches_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = tiny(&["noise.enabled=false"]);
    let ra = generate_dataset(&cfg, a.path(), false).unwrap();
    let rb = generate_dataset(&cfg, b.path(), false).unwrap();
    assert_eq!(ra.noise_sigma, None);
    assert_eq!(ra.digest, rb.digest);
    let s = read_sample(&a.path().join("samples/000000.bin")).unwrap();
    assert!(s.metadata["noise"].is_null());
}

#[test]
fn verify_catches_tampering() {
    let dir = tempfile::tempdir().unwrap();
    generate_dataset(&tiny(&[]), dir.path(), false).unwrap();
    let m = DatasetManifest::read(dir.path()).unwrap();

    std::fs::copy(dir.path().join(&m.samples[0].file), dir.path().join("samples/999999.bin")).unwrap();
    assert!(m.verify(dir.path()).is_err());
    std::fs::remove_file(dir.path().join("samples/999999.bin")).unwrap();
    m.verify(dir.path()).unwrap();

    let mut wrong = m.clone();
    wrong.class_counts = vec![1, 5];
    assert!(wrong.verify(dir.path()).is_err());

    let path = dir.path().join(&m.samples[1].file);
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
    let err = m.verify(dir.path()).unwrap_err().to_string();
    assert!(err.contains("expected"), "{err}");
}

#[test]
fn too_few_samples_per_split_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(&["dataset.samples=2", "dataset.split=[0.7, 0.15, 0.15]"]);
    let err = generate_dataset(&cfg, dir.path(), false).unwrap_err().to_string();
    assert!(err.contains("split"), "{err}");
}
