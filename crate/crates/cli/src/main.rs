use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use socsim_core::abm::ModelKind;
use socsim_core::annotate::{Annotators, AttitudeAnnotator};
use socsim_core::calibration::{apply_calibrated, calibrate_with, default_grid, CalibrationTarget, ModelSettings, ParameterGrid};
use socsim_core::metrics::macro_report_from_stats;
use socsim_core::runner::synth::{generate, SynthSpec};
use socsim_core::runner::{
    load_dataset, read_core_recording, read_trace_csv, run_frozen_replicate, run_macro, run_micro, RunConfig,
};

#[derive(Parser)]
#[command(name = "socsim", version, about = "Hybrid LLM-agent / agent-based social media simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Dataset directory (users.jsonl, edges.jsonl, news.json, ...).
    #[arg(long)]
    dataset: PathBuf,
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rounds: Option<u32>,
    #[arg(long)]
    workers: Option<usize>,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => RunConfig::default(),
        };
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.rounds {
            cfg.rounds = r;
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Multi-round hybrid simulation.
    Simulate(Common),
    /// Single-round replication of observed core-user responses.
    Micro(Common),
    /// Rerun the ordinary phase against a recorded core trace.
    Replicate {
        #[command(flatten)]
        common: Common,
        /// core_attitudes.jsonl from a previous `simulate`.
        #[arg(long)]
        recording: PathBuf,
        /// Replicate count; defaults to the config value.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Grid-sweep the ordinary-agent model against the dataset's empirical trace.
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// JSON grid, e.g. {"kind": "bc", "alpha": [0.05, 0.1], "epsilon": [0.3]}.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long)]
        model: Option<ModelKind>,
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Macro metrics of an existing trace against an empirical one.
    Evaluate {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        empirical: PathBuf,
    },
    /// Annotate texts (one per line, or JSON objects with a `text` field).
    Annotate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 30)]
        core: usize,
        #[arg(long, default_value_t = 300)]
        ordinary: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        micro_pairs: usize,
    },
    /// Print the default configuration as TOML.
    Config,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Simulate(c) => simulate(&c),
        Command::Micro(c) => micro(&c),
        Command::Replicate { common, recording, n } => replicate(&common, &recording, n),
        Command::Calibrate {
            common,
            grid,
            model,
            replications,
        } => calibrate(&common, grid.as_deref(), model, replications),
        Command::Evaluate { trace, empirical } => {
            let report = macro_report_from_stats(&read_trace_csv(&trace)?, &read_trace_csv(&empirical)?)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Annotate { input, config, out } => annotate(&input, config.as_deref(), out.as_deref()),
        Command::Synth {
            out,
            core,
            ordinary,
            seed,
            micro_pairs,
        } => {
            let d = generate(&SynthSpec {
                core,
                ordinary,
                seed,
                micro_pairs,
                ..SynthSpec::default()
            });
            d.write_to(&out)?;
            log::info!("wrote {} users and {} edges to {}", d.users.len(), d.edges.len(), out.display());
            Ok(())
        }
        Command::Config => {
            print!("{}", RunConfig::default().to_toml()?);
            Ok(())
        }
    }
}

fn simulate(c: &Common) -> Result<()> {
    let cfg = c.config()?;
    let dataset = load_dataset(&c.dataset)?;
    let out = run_macro(&dataset, &cfg)?;
    log::info!(
        "{} rounds, bias {:.4}, diversity {:.4}; outputs in {}",
        out.rounds_completed(),
        out.metrics.bias,
        out.metrics.diversity,
        cfg.output_dir.display()
    );
    Ok(())
}

fn micro(c: &Common) -> Result<()> {
    let cfg = c.config()?;
    let dataset = load_dataset(&c.dataset)?;
    let report = run_micro(&dataset, &cfg)?;
    report.write(&cfg.output_dir)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn replicate(c: &Common, recording: &Path, n: Option<usize>) -> Result<()> {
    let cfg = c.config()?;
    let dataset = load_dataset(&c.dataset)?;
    let rec = read_core_recording(recording)?;
    let report = run_frozen_replicate(&rec, &dataset, &cfg, n.unwrap_or(cfg.replicates))?;
    report.write(&cfg.output_dir)?;
    println!("{}", serde_json::to_string_pretty(&report.mean)?);
    Ok(())
}

fn calibrate(c: &Common, grid: Option<&Path>, model: Option<ModelKind>, replications: Option<usize>) -> Result<()> {
    let mut cfg = c.config()?;
    let dataset = load_dataset(&c.dataset)?;
    let Some(stats) = dataset.empirical.clone() else {
        bail!("calibration needs empirical.csv in the dataset");
    };
    if let Some(kind) = model {
        if kind != cfg.model.kind() {
            cfg.model = socsim_core::calibration::reference_params("metoo", kind)?;
        }
    }
    let grid = match grid {
        Some(p) => ParameterGrid::from_json(&std::fs::read_to_string(p)?)?,
        None => cfg.calibration.grid.clone().unwrap_or_else(|| default_grid(&cfg.model)),
    };
    if grid.kind != cfg.model.kind() {
        cfg.model = socsim_core::calibration::reference_params("metoo", grid.kind)?;
    }
    let target = CalibrationTarget {
        initial: dataset.users.iter().map(|u| (u.id, u.initial_attitude)).collect(),
        stats,
    };
    let settings = ModelSettings {
        signs: cfg.signs,
        schedule: cfg.schedule,
    };
    let reps = replications.unwrap_or(cfg.calibration.replications);
    let result = calibrate_with(grid.kind, &grid, &target, reps, cfg.seed, settings)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    result.write_csv(BufWriter::new(File::create(cfg.output_dir.join("calibration.csv"))?))?;
    let calibrated = apply_calibrated(&result.best, &cfg)?;
    std::fs::write(cfg.output_dir.join("calibrated.toml"), calibrated.to_toml()?)?;
    println!("{}", serde_json::to_string_pretty(&json!({ "best": result.best, "objective": result.objective }))?);
    Ok(())
}

fn annotate(input: &Path, config: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let cfg = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let annotators = Annotators::from_config(&cfg.annotators);
    let reader = BufReader::new(File::open(input).with_context(|| format!("opening {}", input.display()))?);
    let mut w: Box<dyn Write> = match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let text = match serde_json::from_str::<serde_json::Value>(&line) {
            Ok(serde_json::Value::Object(o)) => o
                .get("text")
                .and_then(|t| t.as_str())
                .map(str::to_string)
                .with_context(|| format!("line {}: no `text` field", i + 1))?,
            _ => line,
        };
        let a = annotators.annotate(&text)?;
        let row = json!({
            "text": text,
            "stance": a.stance,
            "intensity": a.intensity,
            "attitude": a.attitude,
            "content_type": annotators.content_type(&text),
            "toxicity": annotators.toxicity(&text)?,
        });
        serde_json::to_writer(&mut w, &row)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
