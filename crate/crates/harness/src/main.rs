use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use lieopt_harness::config::RunConfig;
use lieopt_harness::export::{export_filters, point_estimate};
use lieopt_harness::metrics::{evaluate, DEFAULT_PREDICTIVE_SAMPLES};
use lieopt_harness::pgm::Image;
use lieopt_harness::state::SavedState;
use lieopt_harness::synth::{synth_dataset, write_csv, SynthKind};
use lieopt_harness::train::{load_data, run};
use lieopt_learn::net::sparsity_metric;

#[derive(Parser)]
#[command(name = "lieopt", version, about = "Lie-group variational learning: training, evaluation and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a network from a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Do not echo metrics rows to stdout.
        #[arg(long)]
        quiet: bool,
    },
    /// Run every reference check; exits non-zero if any fails.
    Verify {
        /// Also write the report as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Score a saved state on the test set named by a config.
    Evaluate {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PREDICTIVE_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write first-layer filters as PGM images.
    ExportFilters {
        #[arg(long)]
        state: PathBuf,
        /// Output directory (default: `filters` next to the state file).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 16)]
        count: usize,
        /// Config whose test-set mean image is the probe.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Probe image (PGM) or whitespace-separated values; overrides --config.
        #[arg(long)]
        probe: Option<PathBuf>,
    },
    /// Generate a two-class dataset in the plane as CSV.
    Synth {
        #[arg(long)]
        kind: SynthKind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read_probe(path: &Path) -> anyhow::Result<Vec<f64>> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.starts_with(b"P5") {
        let img = Image::decode(&bytes, path)?;
        return Ok(img.pixels.iter().map(|&p| p as f64 / 255.0).collect());
    }
    String::from_utf8_lossy(&bytes)
        .split_whitespace()
        .map(|t| t.parse::<f64>().with_context(|| format!("probe value '{t}'")))
        .collect()
}

fn main() -> anyhow::Result<ExitCode> {
    lieopt_core::exec::init_threads_from_env();
    let cli = Cli::parse();
    match cli.command {
        Command::Train { config, quiet } => {
            let cfg = RunConfig::from_file(&config)?;
            let out = run(&cfg, !quiet)?;
            if let Some(dir) = &cfg.out {
                eprintln!("wrote {}", dir.display());
            }
            if let Some(min) = out.state.g.min_scale() {
                eprintln!("final minimum scale {min:e}");
            }
        }
        Command::Verify { csv } => {
            let reports = lieopt_oracle::verify_suite();
            for r in &reports {
                println!("{r}");
            }
            if let Some(path) = csv {
                std::fs::write(&path, lieopt_oracle::to_csv(&reports))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            let failed = reports.iter().filter(|r| !r.pass).count();
            println!("{} checks, {failed} failed", reports.len());
            if failed > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Evaluate { state, config, samples, seed } => {
            let cfg = RunConfig::from_file(&config)?;
            let saved = SavedState::load(&state)?;
            if saved.g.kind() != cfg.group {
                bail!("state holds a {} element but the config names {}", saved.g.kind(), cfg.group);
            }
            let net = saved.net()?;
            let (_, test) = load_data(&cfg)?;
            let s = evaluate(&saved.g, &cfg.base, &net, &saved.mask, &test, samples, seed, cfg.exec)?;
            println!("accuracy = {:.4}", s.accuracy);
            println!("nll = {:.6}", s.nll);
            println!("ece = {:.6}", s.ece);
            for l in 0..net.layers().len() {
                let sp = sparsity_metric(&net, point_estimate(&saved.g), &saved.mask, l)?;
                println!("sparsity.layer{l} = {sp:.4}");
            }
        }
        Command::ExportFilters { state, out, count, config, probe } => {
            let saved = SavedState::load(&state)?;
            let fan_in = saved.layers[0];
            let probe = match (probe, config) {
                (Some(p), _) => read_probe(&p)?,
                (None, Some(c)) => load_data(&RunConfig::from_file(&c)?)?.1.mean_input(),
                (None, None) => vec![1.0; fan_in],
            };
            let dir = out.unwrap_or_else(|| state.parent().unwrap_or(Path::new(".")).join("filters"));
            let paths = export_filters(&saved, &probe, count, &dir)?;
            println!("wrote {} filters to {}", paths.len(), dir.display());
        }
        Command::Synth { kind, n, seed, out } => {
            let data = synth_dataset(kind, n, seed)?;
            let f = std::fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            write_csv(&data, std::io::BufWriter::new(f))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
