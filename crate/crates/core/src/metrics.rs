//! Observables computed from run results.

use serde::{Deserialize, Serialize};

use crate::engine::{ArrivalTable, RunResult, Slot};
use crate::error::MetricsError;
use crate::pieces::Piece;

/// Max arrival slot of a completed run.
pub fn completion_time(result: &RunResult) -> Option<Slot> {
    if result.completed {
        result.arrivals.max_slot()
    } else {
        None
    }
}

/// Empirical CDF of per-(piece, user) delays since the piece emerged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayProfile {
    /// `counts[d]` = number of pairs with delay exactly `d`.
    counts: Vec<u64>,
    total: u64,
}

impl DelayProfile {
    /// `D(d)`; pairs never served never count.
    pub fn value(&self, d: u64) -> f64 {
        let upto = (d as usize).min(self.counts.len().saturating_sub(1));
        if self.counts.is_empty() {
            return 0.0;
        }
        let hit: u64 = self.counts[..=upto].iter().sum();
        hit as f64 / self.total as f64
    }

    /// Limit of `D(d)` as `d` grows: the fraction of pairs ever served.
    pub fn plateau(&self) -> f64 {
        self.counts.iter().sum::<u64>() as f64 / self.total as f64
    }

    /// Largest observed delay.
    pub fn max_delay(&self) -> Option<u64> {
        self.counts.iter().rposition(|&c| c > 0).map(|d| d as u64)
    }

    /// `D(0), D(1), ..., D(max_d)`.
    pub fn curve(&self, max_d: u64) -> Vec<f64> {
        let mut acc = 0u64;
        (0..=max_d as usize)
            .map(|d| {
                acc += self.counts.get(d).copied().unwrap_or(0);
                acc as f64 / self.total as f64
            })
            .collect()
    }
}

/// `D(d) = (1/nk) * #{(i, j) : arrival(i, j) - emergence(i) <= d}`.
///
/// Pairs endowed before their piece emerged (the source's own pieces) count
/// with delay 0. Pieces that never emerged contribute only such pairs.
pub fn delay_profile(arrivals: &ArrivalTable, emergence: &[Option<Slot>]) -> DelayProfile {
    let (n, k) = (arrivals.n(), arrivals.k());
    assert_eq!(emergence.len(), k, "one emergence slot per piece");
    let mut counts: Vec<u64> = Vec::new();
    for piece in 1..=k as Piece {
        let emerged = emergence[piece as usize - 1];
        for arrival in arrivals.for_piece(piece).flatten() {
            let delay = match emerged {
                Some(e) => arrival.saturating_sub(e),
                None if arrival == 0 => 0,
                None => continue,
            } as usize;
            if counts.len() <= delay {
                counts.resize(delay + 1, 0);
            }
            counts[delay] += 1;
        }
    }
    DelayProfile {
        counts,
        total: (n * k) as u64,
    }
}

/// Holders of one piece after each slot's commit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupancySeries {
    pub piece: Piece,
    /// `counts[t]` = holders after slot `t` (slot 0 = initial state).
    pub counts: Vec<u32>,
}

impl OccupancySeries {
    /// First slot at which at least `threshold` users hold the piece.
    pub fn first_reaching(&self, threshold: u32) -> Option<Slot> {
        self.counts
            .iter()
            .position(|&c| c >= threshold)
            .map(|t| t as Slot)
    }

    /// Holders after slot `t`, saturating at the last recorded slot.
    pub fn at(&self, t: Slot) -> u32 {
        let i = (t as usize).min(self.counts.len() - 1);
        self.counts[i]
    }
}

/// Cumulative holder count per slot over `0..=horizon`.
pub fn occupancy(arrivals: &ArrivalTable, piece: Piece, horizon: Slot) -> OccupancySeries {
    let mut counts = vec![0u32; horizon as usize + 1];
    for slot in arrivals.for_piece(piece).flatten() {
        if slot <= horizon {
            counts[slot as usize] += 1;
        }
    }
    for t in 1..counts.len() {
        counts[t] += counts[t - 1];
    }
    OccupancySeries { piece, counts }
}

/// Slot at which `piece` first reaches `threshold` holders, if ever.
pub fn reach_slot(arrivals: &ArrivalTable, piece: Piece, threshold: usize) -> Option<Slot> {
    if threshold == 0 {
        return Some(0);
    }
    let mut slots: Vec<Slot> = arrivals.for_piece(piece).flatten().collect();
    if slots.len() < threshold {
        return None;
    }
    let (_, nth, _) = slots.select_nth_unstable(threshold - 1);
    Some(*nth)
}

/// Holders needed for a piece not to count as failed: `ceil(n * e / 5)`.
pub fn failure_threshold(n: usize) -> usize {
    (n as f64 * std::f64::consts::E / 5.0).ceil() as usize
}

/// Slots allowed after release: `2 (1 + eps) log2 n`.
pub fn failure_window(n: usize, epsilon: f64) -> f64 {
    2.0 * (1.0 + epsilon) * (n as f64).log2()
}

/// Pieces that did not reach `ceil(n e / 5)` holders within
/// `2 (1 + eps) log2 n` slots of the source first pushing them.
/// Pieces the source never released are reported as failed.
pub fn failed_pieces(result: &RunResult, epsilon: f64) -> Result<Vec<Piece>, MetricsError> {
    if !result.protocol.has_release_schedule() {
        return Err(MetricsError::UnsupportedProtocol(result.protocol.id()));
    }
    let threshold = failure_threshold(result.n);
    let window = failure_window(result.n, epsilon);
    Ok((1..=result.k as Piece)
        .filter(|&p| {
            let Some(release) = result.source_release[p as usize - 1] else {
                return true;
            };
            match reach_slot(&result.arrivals, p, threshold) {
                Some(reached) => reached.saturating_sub(release) as f64 > window,
                None => true,
            }
        })
        .collect())
}

/// `k log2 n / (k + log2 n)`: unsplit over optimally split dissemination time.
pub fn splitting_speedup(k: usize, n: usize) -> f64 {
    let lg = (n as f64).log2();
    k as f64 * lg / (k as f64 + lg)
}
