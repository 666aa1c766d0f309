use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use nearfield_core::bench::{run_bench, write_bench_csv};
use nearfield_core::config::ExperimentConfig;
use nearfield_core::dataset::{generate_dataset, read_sample, write_sample, DType, DatasetManifest, DatasetSample, SampleTensor};
use nearfield_core::features::{fft4d_features, normalize, real_from_complex, signed_bin, write_map_csv, FftPadding};
use nearfield_core::validate::{run_validation, ValidationOptions};
use tracing_subscriber::EnvFilter;

const THREADS_ENV: &str = "NEARFIELD_THREADS";

/// Near-field MIMO-OFDM channel simulator.
#[derive(Parser)]
#[command(name = "nearfield", version)]
struct Cli {
    /// Emit log records as JSON lines on stderr.
    #[arg(long, global = true)]
    json_logs: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, clap::Args)]
struct ConfigArgs {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,

    /// Override a configuration key, e.g. `--set dataset.samples=40`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a labelled dataset.
    Generate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory.
        #[arg(long, short)]
        out: PathBuf,
        /// Master seed; overrides `dataset.master_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Replace an existing dataset in the output directory.
        #[arg(long)]
        overwrite: bool,
    },
    /// Run the physics validation suite.
    Validate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Flip the self-term sign (mutation test of the suite itself).
        #[arg(long)]
        inject_self_term_fault: bool,
        /// Also write the report to this CSV file.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Turn a dataset into classifier inputs or FFT feature maps.
    Features {
        /// Dataset directory written by `generate`.
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum)]
        mode: FeatureMode,
        #[arg(long, short)]
        out: PathBuf,
        /// Zero-padding factor on every axis (fft4d only).
        #[arg(long, default_value_t = 1)]
        padding: usize,
    },
    /// Time dense against FFT-accelerated solves.
    Bench {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Voxel counts to time.
        #[arg(long, value_delimiter = ',', default_values_t = vec![8usize, 27, 64, 125, 200])]
        sizes: Vec<usize>,
        /// CSV output file; stdout when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum FeatureMode {
    /// Normalized real/imag stacks `(2, N_r, N_t, N_p, K_sel)`.
    StfInput,
    /// Doppler x range magnitude maps, one CSV per sample plus a flat table.
    Fft4d,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.json_logs);
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn init_logging(json: bool) {
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info"));
    let builder = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr);
    if json {
        builder.json().init();
    } else {
        builder.init();
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let n: usize = raw.trim().parse().with_context(|| format!("{THREADS_ENV}={raw:?} is not a thread count"))?;
        if n == 0 {
            bail!("{THREADS_ENV} must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    Ok(())
}

fn load_config(args: &ConfigArgs, extra: &[String]) -> Result<ExperimentConfig> {
    let overrides: Vec<String> = args.overrides.iter().chain(extra).cloned().collect();
    let cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path, &overrides),
        None => ExperimentConfig::from_toml_str("", &overrides),
    };
    Ok(cfg?)
}

fn echo_config(cfg: &ExperimentConfig) {
    println!("# effective configuration (sha256 {})", cfg.hash());
    for line in cfg.to_toml_string().lines() {
        println!("#   {line}");
    }
}

fn run(command: Command) -> Result<ExitCode> {
    configure_threads()?;
    match command {
        Command::Generate { cfg, out, seed, overwrite } => {
            let extra: Vec<String> = seed.map(|s| format!("dataset.master_seed={s}")).into_iter().collect();
            let cfg = load_config(&cfg, &extra)?;
            echo_config(&cfg);
            let t0 = Instant::now();
            let report = generate_dataset(&cfg, &out, overwrite)?;
            std::fs::write(out.join("config.toml"), cfg.to_toml_string())?;
            println!("samples_written,{}", report.written);
            println!("samples_skipped,{}", report.skipped);
            println!("class_counts,{}", join(&report.class_counts));
            println!("split_counts,{}", join(&report.split_counts));
            if let Some(s) = report.noise_sigma {
                println!("noise_sigma,{s:e}");
            }
            println!("mean_iterations,{:.2}", report.mean_iterations);
            println!("max_residual,{:e}", report.max_residual);
            println!("wall_time_s,{:.3}", t0.elapsed().as_secs_f64());
            println!("digest,{}", report.digest);
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { seed, inject_self_term_fault, out } => {
            println!("# validate seed={seed} inject_self_term_fault={inject_self_term_fault}");
            let report = run_validation(&ValidationOptions { seed, inject_self_term_fault });
            let csv = report.to_csv();
            print!("{csv}");
            if let Some(path) = out {
                std::fs::write(&path, &csv).with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Features { dataset, mode, out, padding } => {
            println!("# features dataset={} mode={} padding={padding}", dataset.display(), mode_name(mode));
            let n = features(&dataset, mode, &out, FftPadding(padding))?;
            println!("samples,{n}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench { cfg, sizes, out } => {
            let cfg = load_config(&cfg, &[])?;
            echo_config(&cfg);
            println!("# bench sizes={}", join(&sizes));
            let rows = run_bench(&sizes, &cfg.array_geometry()?, &cfg.solver)?;
            match out {
                Some(path) => {
                    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    write_bench_csv(&rows, BufWriter::new(f))?;
                    write_bench_csv(&rows, std::io::stdout().lock())?;
                }
                None => write_bench_csv(&rows, std::io::stdout().lock())?,
            }
            Ok(if rows.iter().all(|r| r.matches()) { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn mode_name(mode: FeatureMode) -> &'static str {
    match mode {
        FeatureMode::StfInput => "stf_input",
        FeatureMode::Fft4d => "fft4d",
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn features(dataset: &Path, mode: FeatureMode, out: &Path, pad: FftPadding) -> Result<usize> {
    let manifest = DatasetManifest::read(dataset).with_context(|| format!("no dataset at {}", dataset.display()))?;
    let sub = out.join(mode_name(mode));
    std::fs::create_dir_all(&sub)?;
    let mut index = BufWriter::new(File::create(out.join(format!("{}_index.csv", mode_name(mode))))?);
    match mode {
        FeatureMode::StfInput => writeln!(index, "id,label,split,file,scale,degenerate")?,
        FeatureMode::Fft4d => writeln!(index, "id,label,split,file")?,
    }
    let mut table = match mode {
        FeatureMode::Fft4d => Some(BufWriter::new(File::create(out.join("fft4d_features.csv"))?)),
        FeatureMode::StfInput => None,
    };

    for entry in &manifest.samples {
        let sample = read_sample(&dataset.join(&entry.file))?;
        let split = format!("{:?}", entry.split).to_lowercase();
        match mode {
            FeatureMode::StfInput => {
                let (tensor, scale, degenerate) = match sample.tensor.dtype {
                    DType::Complex32 => {
                        let u = normalize(&real_from_complex(&sample.tensor.to_complex()?));
                        (SampleTensor::from_features(&u), u.scale, u.degenerate)
                    }
                    DType::Float32 => {
                        let scale = sample.metadata.get("scale").and_then(|v| v.as_f64()).unwrap_or(1.0);
                        let degenerate = sample.metadata.get("degenerate").and_then(|v| v.as_bool()).unwrap_or(false);
                        (sample.tensor.clone(), scale, degenerate)
                    }
                };
                let file = format!("{:06}.bin", entry.id);
                let metadata = serde_json::json!({ "id": entry.id, "scale": scale, "degenerate": degenerate });
                write_sample(&sub.join(&file), &DatasetSample { label: entry.label, metadata, tensor })?;
                writeln!(index, "{},{},{split},{}/{file},{scale:e},{degenerate}", entry.id, entry.label, mode_name(mode))?;
            }
            FeatureMode::Fft4d => {
                let data = match sample.tensor.dtype {
                    DType::Complex32 => sample.tensor.to_complex()?,
                    DType::Float32 => sample.tensor.to_features(1.0, false)?.to_complex(),
                };
                let map = fft4d_features(&data, pad)?;
                let file = format!("{:06}.csv", entry.id);
                write_map_csv(&map, BufWriter::new(File::create(sub.join(&file))?))?;
                writeln!(index, "{},{},{split},{}/{file}", entry.id, entry.label, mode_name(mode))?;
                if let Some(t) = table.as_mut() {
                    if entry.id == manifest.samples[0].id {
                        let (np, nk) = map.dim();
                        let cols: Vec<String> = (0..np)
                            .flat_map(|m| (0..nk).map(move |k| format!("d{}_r{}", signed_bin(m, np), signed_bin(k, nk))))
                            .collect();
                        writeln!(t, "id,label,split,{}", cols.join(","))?;
                    }
                    let values: Vec<String> = map.iter().map(|v| format!("{v:e}")).collect();
                    writeln!(t, "{},{},{split},{}", entry.id, entry.label, values.join(","))?;
                }
            }
        }
    }
    index.flush()?;
    if let Some(mut t) = table {
        t.flush()?;
    }
    Ok(manifest.samples.len())
}
