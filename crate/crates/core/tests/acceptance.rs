//! Acceptance suite: one pass/fail line per criterion, at its stated
//! tolerance and time budget. Exits nonzero if any criterion fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nearfield_core::config::ExperimentConfig;
use nearfield_core::dataset::{generate_dataset, read_sample, write_sample, DatasetManifest};
use nearfield_core::solver::SolverConfig;
use nearfield_core::validate::{
    born_slope, clausius_mossotti, dipole_green_consistency, fft_matvec_vs_dense, green_reciprocity, iterative_vs_dense,
    phase_checks, zero_contrast, Check,
};

struct Outcome {
    checks: Vec<Check>,
    budget: Option<Duration>,
    elapsed: Duration,
}

fn timed(budget: Option<Duration>, f: impl FnOnce() -> Vec<Check>) -> Outcome {
    let t0 = Instant::now();
    let checks = f();
    Outcome { checks, budget, elapsed: t0.elapsed() }
}

fn ok(res: nearfield_core::Result<Check>, name: &str) -> Check {
    res.unwrap_or_else(|e| Check { name: format!("{name} ({e})"), measured: f64::NAN, bound: 0.0, passed: false })
}

fn tiny_config() -> ExperimentConfig {
    let text = r#"
        [array]
        n_tx = 2
        n_rx = 2
        [selection]
        k_sel = 2
        [scenario]
        frames = 2
        [solver]
        mode = "dense_direct"
        [dataset]
        samples = 6
        split = [0.5, 0.5, 0.0]
        master_seed = 11
        [dataset.class_mix]
        car = 0.0
        motorcycle = 1.0
    "#;
    ExperimentConfig::from_toml_str(text, &[]).expect("tiny config is valid")
}

fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let m = DatasetManifest::read(root).expect("manifest");
    let mut out = vec![("manifest".to_string(), std::fs::read(DatasetManifest::path(root)).unwrap())];
    for e in &m.samples {
        out.push((e.file.clone(), std::fs::read(root.join(&e.file)).unwrap()));
    }
    out
}

fn determinism() -> Vec<Check> {
    let cfg = tiny_config();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (ra, rb) = match (generate_dataset(&cfg, a.path(), false), generate_dataset(&cfg, b.path(), false)) {
        (Ok(x), Ok(y)) => (x, y),
        (Err(e), _) | (_, Err(e)) => return vec![ok(Err(e), "dataset_byte_identical")],
    };
    let (ta, tb) = (tree_bytes(a.path()), tree_bytes(b.path()));
    let mismatched = ta.len().abs_diff(tb.len()) + ta.iter().zip(&tb).filter(|(x, y)| x != y).count();
    let identical = Check::at_most("dataset_byte_identical (differing files)", (mismatched + (ra.digest != rb.digest) as usize) as f64, 0.0);

    // Read every sample, write it back, compare bytes and decoded values.
    let c = tempfile::tempdir().unwrap();
    let mut bad = 0usize;
    for (file, bytes) in ta.iter().skip(1) {
        let s = read_sample(&a.path().join(file)).unwrap();
        let copy = c.path().join("copy.bin");
        write_sample(&copy, &s).unwrap();
        let again = read_sample(&copy).unwrap();
        if std::fs::read(&copy).unwrap() != *bytes || again != s {
            bad += 1;
        }
    }
    let round_trip = Check::at_most("dataset_round_trip (mismatched samples)", bad as f64, 0.0);
    let verified = Check::at_most(
        "dataset_manifest_consistent",
        DatasetManifest::read(a.path()).and_then(|m| m.verify(a.path())).is_err() as u8 as f64,
        0.0,
    );
    vec![identical, round_trip, verified]
}

fn main() -> ExitCode {
    let dense = SolverConfig::dense();
    let secs = |s: u64| Some(Duration::from_secs(s));
    let criteria: Vec<(&str, Outcome)> = vec![
        ("dipole/Green consistency, 1e3 configs", timed(secs(1), || vec![ok(dipole_green_consistency(1000, 1), "dipole_green")])),
        ("Green reciprocity, 1e3 pairs", timed(secs(1), || vec![ok(green_reciprocity(1000, 1), "reciprocity")])),
        ("zero-contrast nulling", timed(None, || vec![ok(zero_contrast(&dense), "zero_contrast")])),
        (
            "Clausius-Mossotti, eps_r in {2,3,5}",
            timed(secs(1), || [2.0, 3.0, 5.0].iter().map(|e| ok(clausius_mossotti(*e, &dense), "cm")).collect()),
        ),
        ("Born-limit slope, 27 voxels", timed(None, || vec![ok(born_slope(&dense), "born_slope")])),
        (
            "fast path vs dense, N_s = 200",
            timed(secs(30), || {
                vec![
                    ok(fft_matvec_vs_dense([5, 5, 8], 1), "fft_matvec"),
                    ok(iterative_vs_dense([5, 5, 8], &SolverConfig::default()), "iterative"),
                ]
            }),
        ),
        (
            "single-voxel phase checks, 8x8 array",
            timed(secs(60), || phase_checks(8, &dense).unwrap_or_else(|e| vec![ok(Err(e), "phase_checks")])),
        ),
        ("dataset determinism and round trip", timed(None, determinism)),
    ];

    let mut all = true;
    for (i, (title, o)) in criteria.iter().enumerate() {
        let in_time = o.budget.is_none_or(|b| o.elapsed <= b);
        let pass = in_time && o.checks.iter().all(|c| c.passed);
        all &= pass;
        let budget = o.budget.map(|b| format!(" (budget {:.0} s)", b.as_secs_f64())).unwrap_or_default();
        println!("{} [{}] {title}: {:.3} s{budget}", if pass { "PASS" } else { "FAIL" }, i + 1, o.elapsed.as_secs_f64());
        for c in &o.checks {
            println!("       {:<44} measured {:.3e}  bound {:.1e}  {}", c.name, c.measured, c.bound, c.status());
        }
    }
    println!("{}", if all { "acceptance: all criteria pass" } else { "acceptance: FAILURES" });
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
