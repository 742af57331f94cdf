use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gossip_core::oracle::Theorem;
use gossip_harness::figures::{reproduce, Figure, FigureOptions, DEFAULT_SEEDS};
use gossip_harness::record::{read_records, simulate, write_records, write_trace};
use gossip_harness::spec::ConfigFile;
use gossip_harness::sweep::run_sweep;
use gossip_harness::verify::{verify, VerifyOptions};
use gossip_harness::{ensure_dir, HarnessError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "gossip-sim",
    version,
    about = "Multi-piece gossip dissemination simulator"
)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "GOSSIP_SIM_OUT", default_value = "results")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one configuration; writes run.jsonl (and trace.csv if enabled).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `run.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the `[sweep]` grid; writes runs.csv, aggregate.csv, records.jsonl.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `sweep.master_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Check recorded runs against a completion-time bound; writes
    /// report.json. Exits 1 when the bound is not met.
    Verify {
        /// A records file (.jsonl) or a directory holding records.jsonl or
        /// run.jsonl.
        #[arg(long)]
        results: PathBuf,
        /// Theorem number, 1 to 7.
        #[arg(long)]
        theorem: u8,
        /// Bound parameter as name=value (beta, c, delta, eps,
        /// log_constant, required_fraction). Repeatable.
        #[arg(long = "param", value_parser = parse_param)]
        params: Vec<(String, f64)>,
    },
    /// Regenerate the data behind a figure; writes <figure>.csv.
    Reproduce {
        #[arg(long)]
        figure: String,
        /// Multiplies n = 500 and k = 1000.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = DEFAULT_SEEDS)]
        seeds: usize,
        /// Master seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let value: f64 = value
        .parse()
        .map_err(|e| format!("bad value for `{name}`: {e}"))?;
    Ok((name.to_string(), value))
}

fn records_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        let sweep = path.join("records.jsonl");
        if sweep.exists() {
            return sweep;
        }
        return path.join("run.jsonl");
    }
    path.to_path_buf()
}

fn execute(cli: Cli) -> Result<ExitCode> {
    let out = cli.out;
    match cli.command {
        Command::Simulate { config, seed } => {
            let file = ConfigFile::load(&config)?;
            let mut cfg = file.run.to_config(&config.display().to_string())?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let (record, result) = simulate(&cfg)?;
            ensure_dir(&out)?;
            write_records(&out.join("run.jsonl"), std::slice::from_ref(&record))?;
            if let Some(trace) = &result.trace {
                write_trace(&out.join("trace.csv"), trace)?;
            }
            match record.completion_slot {
                Some(t) => println!("completed at slot {t}"),
                None => println!(
                    "not completed after {} slots ({:?})",
                    record.slots_run, record.termination
                ),
            }
        }
        Command::Sweep { config, seed, jobs } => {
            let origin = config.display().to_string();
            let file = ConfigFile::load(&config)?;
            let mut section = file.sweep.ok_or_else(|| HarnessError::Config {
                path: origin.clone(),
                message: "missing [sweep] section".into(),
            })?;
            if let Some(seed) = seed {
                section.master_seed = seed;
            }
            let output = run_sweep(&file.run, &section, &origin, jobs, &out)?;
            println!(
                "{} runs in {} cells written to {}",
                output.rows.len(),
                output.aggregate.len(),
                out.display()
            );
        }
        Command::Verify {
            results,
            theorem,
            params,
        } => {
            let theorem = Theorem::from_number(theorem).ok_or_else(|| {
                HarnessError::Refused(format!("no theorem {theorem}; expected 1 to 7"))
            })?;
            let mut opts = VerifyOptions::default();
            for (name, value) in &params {
                opts.set(name, *value)?;
            }
            let records = read_records(&records_path(&results))?;
            let report = verify(&records, theorem, &opts)?;
            ensure_dir(&out)?;
            let path = out.join("report.json");
            let json = serde_json::to_string_pretty(&report)?;
            std::fs::write(&path, json + "\n").map_err(|e| HarnessError::Io { path, source: e })?;
            println!(
                "theorem {}: bound {:.3}, worst {:.3}, {}/{} satisfied (need {:.4}) -> {:?}",
                report.theorem,
                report.bound,
                report.empirical,
                report.satisfied,
                report.samples,
                report.required_fraction,
                report.verdict
            );
            for note in &report.notes {
                println!("  {note}");
            }
            if !report.passed() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Reproduce {
            figure,
            scale,
            seeds,
            seed,
            jobs,
        } => {
            let figure: Figure = figure.parse()?;
            if scale.is_nan() || scale <= 0.0 || seeds == 0 {
                return Err(HarnessError::Refused(
                    "need scale > 0 and seeds >= 1".into(),
                ));
            }
            let opts = FigureOptions {
                scale,
                seeds,
                master_seed: seed,
                jobs,
            };
            let (path, _) = reproduce(figure, &opts, &out)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
