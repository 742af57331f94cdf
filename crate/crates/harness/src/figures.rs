//! Datasets behind the three simulation figures: interleave completion
//! against contact-list size, and average delay profiles for interleave and
//! priority push.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gossip_core::{ContactModel, ProtocolSpec, SimulationConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::record::{simulate, RunRecord};
use crate::sweep::run_seed;
use crate::{write_csv, HarnessError, Result};

/// Population and file size at scale 1.
pub const BASE_N: usize = 500;
pub const BASE_K: usize = 1000;
pub const DEFAULT_SEEDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
}

impl FromStr for Figure {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" | "1" => Ok(Figure::Fig1),
            "fig2" | "2" => Ok(Figure::Fig2),
            "fig3" | "3" => Ok(Figure::Fig3),
            other => Err(HarnessError::Refused(format!(
                "unknown figure `{other}`; expected fig1, fig2 or fig3"
            ))),
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureOptions {
    /// Multiplies `n = 500` and `k = 1000`.
    pub scale: f64,
    pub seeds: usize,
    pub master_seed: u64,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self {
            scale: 1.0,
            seeds: DEFAULT_SEEDS,
            master_seed: 0,
            jobs: 0,
        }
    }
}

impl FigureOptions {
    pub fn n(&self) -> usize {
        ((BASE_N as f64 * self.scale).round() as usize).max(4)
    }

    pub fn k(&self) -> usize {
        ((BASE_K as f64 * self.scale).round() as usize).max(1)
    }
}

/// Contact-list sizes plotted per figure; `None` is the full view.
pub fn contact_cells(figure: Figure) -> Vec<Option<usize>> {
    match figure {
        Figure::Fig1 => vec![
            Some(2),
            Some(3),
            Some(4),
            Some(5),
            Some(8),
            Some(16),
            Some(32),
            None,
        ],
        Figure::Fig2 => vec![Some(2), Some(4), Some(5), None],
        Figure::Fig3 => vec![None],
    }
}

pub const FIG3_SPACINGS: [u32; 4] = [1, 2, 3, 4];

/// All runs of one figure cell.
#[derive(Debug, Clone)]
pub struct FigureCell {
    /// `m=8`, `m=full`, `l=2`, ...
    pub label: String,
    pub config: SimulationConfig,
    pub runs: Vec<RunRecord>,
}

impl FigureCell {
    pub fn completions(&self) -> Vec<Option<u64>> {
        self.runs.iter().map(|r| r.completion_slot).collect()
    }

    /// Mean completion over completed runs.
    pub fn mean_completion(&self) -> Option<f64> {
        let done: Vec<f64> = self
            .runs
            .iter()
            .filter_map(|r| r.completion_slot)
            .map(|t| t as f64)
            .collect();
        (!done.is_empty()).then(|| done.iter().sum::<f64>() / done.len() as f64)
    }

    /// Mean over runs of `D(infinity)`.
    pub fn mean_plateau(&self) -> f64 {
        self.runs
            .iter()
            .map(|r| r.summary.served_fraction)
            .sum::<f64>()
            / self.runs.len() as f64
    }

    /// `(mean, min, max)` of `D(d)` across runs; each run's profile stays
    /// at its plateau past its largest delay.
    pub fn profile_at(&self, d: u64) -> (f64, f64, f64) {
        let values: Vec<f64> = self
            .runs
            .iter()
            .map(|r| {
                let curve = &r.summary.delay_profile;
                curve
                    .get(d as usize)
                    .copied()
                    .unwrap_or(r.summary.served_fraction)
            })
            .collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (mean, min, max)
    }

    pub fn max_delay(&self) -> u64 {
        self.runs
            .iter()
            .filter_map(|r| r.summary.max_delay)
            .max()
            .unwrap_or(0)
    }
}

fn contact_label(m: Option<usize>) -> String {
    match m {
        Some(m) => m.to_string(),
        None => "full".to_string(),
    }
}

/// Configurations of every cell of `figure`, before seeding.
pub fn figure_cells(figure: Figure, opts: &FigureOptions) -> Vec<(String, SimulationConfig)> {
    let (n, k) = (opts.n(), opts.k());
    let contacts = |m: Option<usize>| match m {
        Some(m) => ContactModel::FixedLists { m: m.min(n - 1) },
        None => ContactModel::Uniform,
    };
    match figure {
        Figure::Fig1 | Figure::Fig2 => contact_cells(figure)
            .into_iter()
            .map(|m| {
                let cfg = SimulationConfig::new(n, k, ProtocolSpec::Interleave)
                    .with_contacts(contacts(m));
                (format!("m={}", contact_label(m)), cfg)
            })
            .collect(),
        Figure::Fig3 => FIG3_SPACINGS
            .iter()
            .map(|&l| {
                let cfg = SimulationConfig::new(n, k, ProtocolSpec::PriorityPush { spacing: l });
                (format!("l={l}"), cfg)
            })
            .collect(),
    }
}

/// Runs every cell of a figure with `opts.seeds` seeds each.
pub fn run_figure(figure: Figure, opts: &FigureOptions) -> Result<Vec<FigureCell>> {
    run_cells(figure, figure_cells(figure, opts), opts)
}

/// Runs the given cells; seeds derive from the figure id, cell label and
/// seed index.
pub fn run_cells(
    figure: Figure,
    cells: Vec<(String, SimulationConfig)>,
    opts: &FigureOptions,
) -> Result<Vec<FigureCell>> {
    let jobs: Vec<(usize, SimulationConfig)> = cells
        .iter()
        .enumerate()
        .flat_map(|(ci, (label, cfg))| {
            let key = format!("{figure}/{label}");
            (0..opts.seeds).map(move |s| {
                (
                    ci,
                    cfg.clone().with_seed(run_seed(opts.master_seed, &key, s)),
                )
            })
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .expect("thread pool");
    let records: Vec<(usize, RunRecord)> = pool.install(|| {
        jobs.par_iter()
            .map(|(ci, cfg)| Ok((*ci, simulate(cfg)?.0)))
            .collect::<Result<_>>()
    })?;
    let mut out: Vec<FigureCell> = cells
        .into_iter()
        .map(|(label, config)| FigureCell {
            label,
            config,
            runs: Vec::new(),
        })
        .collect();
    for (ci, record) in records {
        out[ci].runs.push(record);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRow {
    pub contacts: String,
    pub runs: usize,
    pub completed: usize,
    pub mean_completion: Option<f64>,
    pub min_completion: Option<u64>,
    pub max_completion: Option<u64>,
    /// `2 (k + log2 n)`.
    pub reference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    /// `m=...` or `l=...`.
    pub cell: String,
    pub d: u64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

pub fn completion_rows(cells: &[FigureCell]) -> Vec<CompletionRow> {
    cells
        .iter()
        .map(|c| {
            let done: Vec<u64> = c.runs.iter().filter_map(|r| r.completion_slot).collect();
            let (n, k) = (c.config.n as f64, c.config.k as f64);
            CompletionRow {
                contacts: c.label.trim_start_matches("m=").to_string(),
                runs: c.runs.len(),
                completed: done.len(),
                mean_completion: c.mean_completion(),
                min_completion: done.iter().copied().min(),
                max_completion: done.iter().copied().max(),
                reference: 2.0 * (k + n.log2()),
            }
        })
        .collect()
}

/// Pointwise profile statistics for `d = 0..=max delay over the figure`.
pub fn profile_rows(cells: &[FigureCell]) -> Vec<ProfileRow> {
    let horizon = cells.iter().map(FigureCell::max_delay).max().unwrap_or(0);
    cells
        .iter()
        .flat_map(|c| {
            (0..=horizon).map(move |d| {
                let (mean, min, max) = c.profile_at(d);
                ProfileRow {
                    cell: c.label.clone(),
                    d,
                    mean,
                    min,
                    max,
                }
            })
        })
        .collect()
}

/// Runs a figure and writes `<figure>.csv` into `out`.
pub fn reproduce(
    figure: Figure,
    opts: &FigureOptions,
    out: &Path,
) -> Result<(PathBuf, Vec<FigureCell>)> {
    let cells = run_figure(figure, opts)?;
    crate::ensure_dir(out)?;
    let path = out.join(format!("{figure}.csv"));
    let schema = format!(
        "gossip-{figure}/1 n={} k={} seeds={} master_seed={}",
        opts.n(),
        opts.k(),
        opts.seeds,
        opts.master_seed
    );
    match figure {
        Figure::Fig1 => write_csv(&path, &schema, &completion_rows(&cells))?,
        Figure::Fig2 | Figure::Fig3 => write_csv(&path, &schema, &profile_rows(&cells))?,
    }
    Ok((path, cells))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling() {
        let opts = FigureOptions {
            scale: 0.1,
            ..FigureOptions::default()
        };
        assert_eq!((opts.n(), opts.k()), (50, 100));
        assert_eq!(FigureOptions::default().n(), 500);
        let tiny = FigureOptions {
            scale: 0.001,
            ..FigureOptions::default()
        };
        assert_eq!((tiny.n(), tiny.k()), (4, 1));
    }

    #[test]
    fn cells_per_figure() {
        let opts = FigureOptions::default();
        assert_eq!(figure_cells(Figure::Fig1, &opts).len(), 8);
        assert_eq!(figure_cells(Figure::Fig2, &opts).len(), 4);
        let fig3 = figure_cells(Figure::Fig3, &opts);
        assert_eq!(fig3.len(), 4);
        assert_eq!(
            fig3[2].1.protocol,
            ProtocolSpec::PriorityPush { spacing: 3 }
        );
        assert_eq!("fig2".parse::<Figure>().unwrap(), Figure::Fig2);
        assert!("fig9".parse::<Figure>().is_err());
    }
}
