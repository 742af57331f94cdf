//! Per-run JSONL records and transfer-trace CSVs.

use std::io::{BufRead, Write};
use std::path::Path;

use gossip_core::metrics::{
    delay_profile, failed_pieces, failure_window, occupancy, reach_slot, splitting_speedup,
};
use gossip_core::{
    run, Piece, RunResult, SimulationConfig, Slot, Termination, TransferEvent, TransferKind,
};
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

pub const RECORD_SCHEMA: &str = "gossip-run/1";
pub const TRACE_SCHEMA: &str = "gossip-trace/1";

/// Holders needed to count as "spread": `ceil(n / ln n)`.
pub fn sparse_threshold(n: usize) -> usize {
    (n as f64 / (n as f64).ln()).ceil() as usize
}

/// Holders at which fewer than `ceil(n / ln n)` users still miss a piece.
pub fn near_all_threshold(n: usize) -> usize {
    n - sparse_threshold(n).min(n) + 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceStats {
    pub piece: Piece,
    /// First upload by the source.
    pub release: Option<Slot>,
    /// First receipt by a non-source user.
    pub emergence: Option<Slot>,
    /// Holders at the end of the run.
    pub holders: usize,
    /// First slot with at least `ceil(n / ln n)` holders.
    pub reach_sparse: Option<Slot>,
    /// First slot with fewer than `ceil(n / ln n)` users missing the piece.
    pub reach_near_all: Option<Slot>,
    /// First slot with every user holding the piece.
    pub reach_all: Option<Slot>,
    /// Holders after slots `release, release + 1, ...` over the
    /// failed-piece window; only for protocols with a release schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupancy_after_release: Option<Vec<u32>>,
}

impl PieceStats {
    /// Slots from release until `threshold` holders, if seen in the
    /// recorded window.
    pub fn reach_after_release(&self, threshold: usize) -> Option<Slot> {
        self.occupancy_after_release
            .as_ref()?
            .iter()
            .position(|&c| c as usize >= threshold)
            .map(|d| d as Slot)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Fraction of (piece, user) pairs served by the end: `D(infinity)`.
    pub served_fraction: f64,
    pub max_delay: Option<u64>,
    /// `D(0), D(1), ..., D(max_delay)`.
    pub delay_profile: Vec<f64>,
    /// Count of failed pieces, for protocols with a release schedule.
    pub failed_pieces: Option<usize>,
    pub splitting_speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema: String,
    pub config: SimulationConfig,
    pub completed: bool,
    pub completion_slot: Option<Slot>,
    pub slots_run: Slot,
    pub termination: Termination,
    pub summary: Summary,
    pub pieces: Vec<PieceStats>,
}

impl RunRecord {
    pub fn from_result(config: &SimulationConfig, result: &RunResult) -> Self {
        let (n, k) = (result.n, result.k);
        let profile = delay_profile(&result.arrivals, &result.emergence);
        let max_delay = profile.max_delay();
        let delay_curve = max_delay.map(|d| profile.curve(d)).unwrap_or_default();
        let eps = config.failure_epsilon;
        let failed = failed_pieces(result, eps).ok().map(|f| f.len());
        let window = failure_window(n, eps).ceil() as Slot;
        let scheduled = result.protocol.has_release_schedule();

        let pieces = (1..=k as Piece)
            .map(|piece| {
                let release = result.source_release[piece as usize - 1];
                let holders = result.arrivals.for_piece(piece).flatten().count();
                let occupancy_after_release = match (scheduled, release) {
                    (true, Some(r)) => {
                        let series = occupancy(&result.arrivals, piece, r + window);
                        Some(series.counts[r as usize..].to_vec())
                    }
                    _ => None,
                };
                PieceStats {
                    piece,
                    release,
                    emergence: result.emergence[piece as usize - 1],
                    holders,
                    reach_sparse: reach_slot(&result.arrivals, piece, sparse_threshold(n)),
                    reach_near_all: reach_slot(&result.arrivals, piece, near_all_threshold(n)),
                    reach_all: reach_slot(&result.arrivals, piece, n),
                    occupancy_after_release,
                }
            })
            .collect();

        Self {
            schema: RECORD_SCHEMA.to_string(),
            config: config.clone(),
            completed: result.completed,
            completion_slot: result.completion_slot,
            slots_run: result.slots_run,
            termination: result.termination,
            summary: Summary {
                served_fraction: profile.plateau(),
                max_delay,
                delay_profile: delay_curve,
                failed_pieces: failed,
                splitting_speedup: splitting_speedup(k, n),
            },
            pieces,
        }
    }
}

/// Runs one config and summarizes it.
pub fn simulate(config: &SimulationConfig) -> Result<(RunRecord, RunResult)> {
    let result = run(config)?;
    Ok((RunRecord::from_result(config, &result), result))
}

pub fn write_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")
            .map_err(|e| HarnessError::io(path, e))?;
    }
    out.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RunRecord = serde_json::from_str(&line).map_err(|e| HarnessError::Results {
            path: path.display().to_string(),
            message: format!("line {}: {e}", i + 1),
        })?;
        if record.schema != RECORD_SCHEMA {
            return Err(HarnessError::Results {
                path: path.display().to_string(),
                message: format!("line {}: unsupported schema `{}`", i + 1, record.schema),
            });
        }
        records.push(record);
    }
    Ok(records)
}

#[derive(Debug, Serialize)]
struct TraceRow {
    slot: Slot,
    from: usize,
    to: usize,
    piece: Piece,
    kind: &'static str,
}

pub fn write_trace(path: &Path, events: &[TransferEvent]) -> Result<()> {
    let rows: Vec<TraceRow> = events
        .iter()
        .map(|e| TraceRow {
            slot: e.slot,
            from: e.from,
            to: e.to,
            piece: e.piece,
            kind: match e.kind {
                TransferKind::Push => "push",
                TransferKind::Pull => "pull",
            },
        })
        .collect();
    crate::write_csv(path, TRACE_SCHEMA, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gossip_core::ProtocolSpec;

    #[test]
    fn thresholds() {
        // 500 / ln 500 = 80.45
        assert_eq!(sparse_threshold(500), 81);
        assert_eq!(near_all_threshold(500), 420);
        assert_eq!(near_all_threshold(2), 1);
    }

    #[test]
    fn two_user_push_record() {
        let cfg = SimulationConfig::new(2, 1, ProtocolSpec::RandomPush).with_seed(1);
        let (record, _) = simulate(&cfg).unwrap();
        assert!(record.completed);
        assert_eq!(record.completion_slot, Some(1));
        assert_eq!(record.summary.served_fraction, 1.0);
        assert_eq!(record.pieces[0].reach_all, Some(1));
        assert_eq!(record.pieces[0].release, Some(1));
        assert!(record.pieces[0].occupancy_after_release.is_none());
    }

    #[test]
    fn release_window_is_recorded() {
        let cfg = SimulationConfig::new(64, 4, ProtocolSpec::Interleave).with_seed(2);
        let (record, result) = simulate(&cfg).unwrap();
        let window = failure_window(64, 0.1).ceil() as usize;
        for stats in &record.pieces {
            let occ = stats.occupancy_after_release.as_ref().unwrap();
            assert_eq!(occ.len(), window + 1);
            let r = stats.release.unwrap();
            assert_eq!(
                stats.reach_after_release(10).map(|d| d + r),
                reach_slot(&result.arrivals, stats.piece, 10).filter(|&s| s <= r + window as u64)
            );
        }
    }
}
