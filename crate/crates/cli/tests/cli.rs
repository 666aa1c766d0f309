use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
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
samples = 4
split = [0.5, 0.5, 0.0]

[dataset.class_mix]
car = 0.0
motorcycle = 1.0
"#;

fn nearfield(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nearfield"))
        .args(args)
        .env("NEARFIELD_THREADS", "2")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn summary_line<'a>(out: &'a str, key: &str) -> &'a str {
    out.lines().find(|l| l.starts_with(&format!("{key},"))).unwrap_or_else(|| panic!("no {key} in\n{out}"))
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("tiny.toml");
    std::fs::write(&path, TINY).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn generate_writes_manifest_and_samples_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let oa = nearfield(&["generate", "-c", &cfg, "--out", a.to_str().unwrap(), "--seed", "3"]);
    assert_eq!(oa.status.code(), Some(0), "{}", String::from_utf8_lossy(&oa.stderr));
    assert!(a.join("manifest").is_file());
    assert_eq!(std::fs::read_dir(a.join("samples")).unwrap().count(), 4);
    let sa = stdout(&oa);
    assert!(sa.contains("# effective configuration"));
    assert!(sa.contains("master_seed = 3"));
    assert_eq!(summary_line(&sa, "samples_written"), "samples_written,4");

    let ob = nearfield(&["generate", "-c", &cfg, "--out", b.to_str().unwrap(), "--seed", "3"]);
    assert_eq!(ob.status.code(), Some(0));
    assert_eq!(summary_line(&sa, "digest"), summary_line(&stdout(&ob), "digest"));

    // Features on the generated dataset.
    let f = dir.path().join("f");
    let o = nearfield(&["features", "--dataset", a.to_str().unwrap(), "--mode", "fft4d", "--out", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(f.join("fft4d_features.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    assert!(table.starts_with("id,label,split,"));
    let map = std::fs::read_to_string(f.join("fft4d/000000.csv")).unwrap();
    assert_eq!(map.lines().next(), Some("doppler_bin,range_bin,magnitude"));

    let o = nearfield(&["features", "--dataset", a.to_str().unwrap(), "--mode", "stf_input", "--out", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_dir(f.join("stf_input")).unwrap().count(), 4);
}

#[test]
fn config_errors_exit_with_two_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[array]\nn_tx = 2\nwhoops = 1\n").unwrap();
    let o = nearfield(&["generate", "-c", bad.to_str().unwrap(), "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("whoops") && err.contains("line 3"), "{err}");

    let o = nearfield(&["generate", "--set", "solver.tolerance=5", "--out", dir.path().join("y").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tolerance"));

    let o = nearfield(&["features", "--dataset", dir.path().join("missing").to_str().unwrap(), "--mode", "fft4d", "--out", "z"]);
    assert_eq!(o.status.code(), Some(2));

    let o = nearfield(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_passes_and_detects_the_injected_fault() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.csv");
    let o = nearfield(&["validate", "--out", report.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = std::fs::read_to_string(&report).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("name,measured,bound,status"));
    for l in lines {
        let fields: Vec<&str> = l.split(',').collect();
        assert_eq!(fields.len(), 4, "{l}");
        fields[1].parse::<f64>().unwrap();
        fields[2].parse::<f64>().unwrap();
        assert_eq!(fields[3], "pass", "{l}");
    }

    let o = nearfield(&["validate", "--inject-self-term-fault"]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    let failed: Vec<&str> = out.lines().filter(|l| l.ends_with(",fail")).collect();
    assert!(!failed.is_empty());
    assert!(failed.iter().all(|l| l.starts_with("clausius_mossotti")), "{failed:?}");
}

#[test]
fn bench_emits_one_row_per_size() {
    let o = nearfield(&["bench", "--sizes", "8,27", "--set", "array.n_tx=2", "--set", "array.n_rx=2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "n_s,dense_s,fft_s,fft_iterations,h_rel_diff,match");
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("8,") && rows[2].starts_with("27,"));
    assert!(rows[1..].iter().all(|r| r.ends_with(",true")));
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_nearfield"))
        .args(["validate"])
        .env("NEARFIELD_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
