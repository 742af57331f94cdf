//! Seeded parameter sweeps.

use std::path::Path;
use std::time::Instant;

use gossip_core::{Constraint, ContactModel, InitialState, ProtocolSpec, SimulationConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::record::{simulate, write_records, RunRecord};
use crate::spec::{RunSpec, StartKind, SweepSection};
use crate::{write_csv, HarnessError, Result};

pub const RUNS_SCHEMA: &str = "gossip-sweep-runs/1";
pub const AGGREGATE_SCHEMA: &str = "gossip-sweep-aggregate/1";

/// Seed of one run, a pure function of the master seed, the cell
/// coordinates and the seed index.
pub fn run_seed(master_seed: u64, cell: &str, seed_index: usize) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(b"gossip-sweep\0");
    hasher.update(master_seed.to_le_bytes());
    hasher.update(cell.as_bytes());
    hasher.update([0]);
    hasher.update((seed_index as u64).to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// One grid point: a label such as `n=64,k=8` and its base run.
#[derive(Debug, Clone)]
pub struct Cell {
    pub label: String,
    pub spec: RunSpec,
}

/// Cross product of the non-empty axes, in the fixed order
/// n, k, m, l, protocol, constraint, eta.
pub fn expand_cells(base: &RunSpec, section: &SweepSection) -> Vec<Cell> {
    let axes = &section.axes;
    let mut cells = vec![Cell {
        label: String::new(),
        spec: base.clone(),
    }];

    fn cross<T: Clone + std::fmt::Display>(
        cells: Vec<Cell>,
        name: &str,
        values: &[T],
        apply: impl Fn(&mut RunSpec, &T),
    ) -> Vec<Cell> {
        if values.is_empty() {
            return cells;
        }
        let mut out = Vec::with_capacity(cells.len() * values.len());
        for cell in cells {
            for v in values {
                let mut spec = cell.spec.clone();
                apply(&mut spec, v);
                let sep = if cell.label.is_empty() { "" } else { "," };
                out.push(Cell {
                    label: format!("{}{sep}{name}={v}", cell.label),
                    spec,
                });
            }
        }
        out
    }

    cells = cross(cells, "n", &axes.n, |s, &v| s.n = Some(v));
    cells = cross(cells, "k", &axes.k, |s, &v| s.k = Some(v));
    cells = cross(cells, "m", &axes.m, |s, &v| {
        s.contacts = (v > 0).then_some(v);
    });
    cells = cross(cells, "l", &axes.l, |s, &v| s.spacing = Some(v));
    cells = cross(cells, "protocol", &axes.protocol, |s, v| {
        s.protocol = v.clone();
    });
    let constraints: Vec<String> = axes
        .constraint
        .iter()
        .map(constraint_id)
        .map(String::from)
        .collect();
    cells = cross(cells, "constraint", &constraints, |s, v| {
        s.constraint = if v == "soft" {
            Constraint::Soft
        } else {
            Constraint::Hard
        };
    });
    cells = cross(cells, "eta", &axes.eta, |s, &v| {
        s.eta = Some(v);
        s.initial_state = StartKind::EtaSeeded;
    });
    if cells.len() == 1 && cells[0].label.is_empty() {
        cells[0].label = "base".to_string();
    }
    cells
}

fn constraint_id(c: &Constraint) -> &'static str {
    match c {
        Constraint::Hard => "hard",
        Constraint::Soft => "soft",
    }
}

/// A fully resolved member of the sweep.
#[derive(Debug, Clone)]
pub struct PlannedRun {
    pub run_id: usize,
    pub cell: usize,
    pub seed_index: usize,
    pub config: SimulationConfig,
}

#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub cells: Vec<Cell>,
    pub runs: Vec<PlannedRun>,
}

/// Validates every member run before anything executes.
pub fn plan(base: &RunSpec, section: &SweepSection, origin: &str) -> Result<SweepPlan> {
    if section.seeds == 0 {
        return Err(HarnessError::Config {
            path: origin.to_string(),
            message: "sweep.seeds: must be at least 1".into(),
        });
    }
    let cells = expand_cells(base, section);
    let mut runs = Vec::with_capacity(cells.len() * section.seeds);
    for (ci, cell) in cells.iter().enumerate() {
        let mut spec = cell.spec.clone();
        if spec.protocol != "priority-push" {
            spec.spacing = None;
        }
        let config = spec.to_config(origin).map_err(|e| match e {
            HarnessError::Config { path, message } => HarnessError::Config {
                path,
                message: format!("cell `{}`: {message}", cell.label),
            },
            other => other,
        })?;
        for seed_index in 0..section.seeds {
            let seed = run_seed(section.master_seed, &cell.label, seed_index);
            runs.push(PlannedRun {
                run_id: runs.len(),
                cell: ci,
                seed_index,
                config: config.clone().with_seed(seed).with_trace(false),
            });
        }
    }
    Ok(SweepPlan { cells, runs })
}

/// Runs on a pool of `jobs` threads (0 = all cores) and returns the results
/// in plan order.
pub fn execute(plan: &SweepPlan, jobs: usize) -> Result<Vec<(RunRecord, f64)>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool");
    pool.install(|| {
        plan.runs
            .par_iter()
            .map(|r| {
                let start = Instant::now();
                let (record, _) = simulate(&r.config)?;
                Ok((record, start.elapsed().as_secs_f64() * 1e3))
            })
            .collect()
    })
}

/// Column values shared by the run and aggregate tables.
#[derive(Debug, Clone, PartialEq)]
struct CellColumns {
    pub cell: String,
    pub n: usize,
    pub k: usize,
    pub protocol: String,
    pub spacing: Option<u32>,
    pub constraint: String,
    /// Contact-list size or `full`.
    pub contacts: String,
    pub initial_state: String,
    pub eta: Option<f64>,
}

impl CellColumns {
    fn new(label: &str, config: &SimulationConfig) -> Self {
        let spacing = match config.protocol {
            ProtocolSpec::PriorityPush { spacing } => Some(spacing),
            _ => None,
        };
        let (initial_state, eta) = match config.initial_state {
            InitialState::SingleSource => ("single-source", None),
            InitialState::EtaSeeded { eta } => ("eta-seeded", Some(eta)),
            InitialState::OneUniquePerUser => ("one-unique-per-user", None),
        };
        Self {
            cell: label.to_string(),
            n: config.n,
            k: config.k,
            protocol: config.protocol.id().to_string(),
            spacing,
            constraint: constraint_id(&config.constraint).to_string(),
            contacts: match config.contact_model {
                ContactModel::Uniform => "full".to_string(),
                ContactModel::FixedLists { m } => m.to_string(),
            },
            initial_state: initial_state.to_string(),
            eta,
        }
    }
}

/// One row of `runs.csv`. Every column except `wall_ms` is reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub run_id: usize,
    pub cell: String,
    pub n: usize,
    pub k: usize,
    pub protocol: String,
    pub spacing: Option<u32>,
    pub constraint: String,
    pub contacts: String,
    pub initial_state: String,
    pub eta: Option<f64>,
    pub seed_index: usize,
    pub seed: u64,
    pub completed: bool,
    pub completion_slot: Option<u64>,
    pub slots_run: u64,
    pub failed_pieces: Option<usize>,
    pub wall_ms: f64,
}

/// One row of `aggregate.csv`; completion statistics cover completed runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub cell: String,
    pub n: usize,
    pub k: usize,
    pub protocol: String,
    pub spacing: Option<u32>,
    pub constraint: String,
    pub contacts: String,
    pub initial_state: String,
    pub eta: Option<f64>,
    pub runs: usize,
    pub completed: usize,
    pub mean_completion: Option<f64>,
    pub min_completion: Option<u64>,
    pub max_completion: Option<u64>,
    pub mean_failed_pieces: Option<f64>,
}

pub fn run_rows(plan: &SweepPlan, results: &[(RunRecord, f64)]) -> Vec<RunRow> {
    plan.runs
        .iter()
        .zip(results)
        .map(|(p, (record, wall_ms))| {
            let c = CellColumns::new(&plan.cells[p.cell].label, &p.config);
            RunRow {
                run_id: p.run_id,
                cell: c.cell,
                n: c.n,
                k: c.k,
                protocol: c.protocol,
                spacing: c.spacing,
                constraint: c.constraint,
                contacts: c.contacts,
                initial_state: c.initial_state,
                eta: c.eta,
                seed_index: p.seed_index,
                seed: p.config.seed,
                completed: record.completed,
                completion_slot: record.completion_slot,
                slots_run: record.slots_run,
                failed_pieces: record.summary.failed_pieces,
                wall_ms: *wall_ms,
            }
        })
        .collect()
}

pub fn aggregate(plan: &SweepPlan, rows: &[RunRow]) -> Vec<AggregateRow> {
    plan.cells
        .iter()
        .enumerate()
        .map(|(ci, _)| {
            let members: Vec<&RunRow> = plan
                .runs
                .iter()
                .zip(rows)
                .filter(|(p, _)| p.cell == ci)
                .map(|(_, r)| r)
                .collect();
            let done: Vec<u64> = members.iter().filter_map(|r| r.completion_slot).collect();
            let failed: Vec<usize> = members.iter().filter_map(|r| r.failed_pieces).collect();
            let first = members[0];
            AggregateRow {
                cell: first.cell.clone(),
                n: first.n,
                k: first.k,
                protocol: first.protocol.clone(),
                spacing: first.spacing,
                constraint: first.constraint.clone(),
                contacts: first.contacts.clone(),
                initial_state: first.initial_state.clone(),
                eta: first.eta,
                runs: members.len(),
                completed: done.len(),
                mean_completion: mean(done.iter().map(|&v| v as f64)),
                min_completion: done.iter().copied().min(),
                max_completion: done.iter().copied().max(),
                mean_failed_pieces: mean(failed.iter().map(|&v| v as f64)),
            }
        })
        .collect()
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<RunRow>,
    pub aggregate: Vec<AggregateRow>,
}

/// Plans, runs and writes `runs.csv`, `aggregate.csv` and `records.jsonl`
/// into `out`.
pub fn run_sweep(
    base: &RunSpec,
    section: &SweepSection,
    origin: &str,
    jobs: usize,
    out: &Path,
) -> Result<SweepOutput> {
    let plan = plan(base, section, origin)?;
    let results = execute(&plan, jobs)?;
    let rows = run_rows(&plan, &results);
    let aggregate = aggregate(&plan, &rows);
    crate::ensure_dir(out)?;
    write_csv(&out.join("runs.csv"), RUNS_SCHEMA, &rows)?;
    write_csv(&out.join("aggregate.csv"), AGGREGATE_SCHEMA, &aggregate)?;
    let records: Vec<RunRecord> = results.into_iter().map(|(r, _)| r).collect();
    write_records(&out.join("records.jsonl"), &records)?;
    Ok(SweepOutput { rows, aggregate })
}
