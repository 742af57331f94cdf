//! Replays a recorded trace from the initial endowment and checks it
//! against the model's rules, without consulting the engine's own
//! bookkeeping.

use thiserror::Error;

use crate::config::{Constraint, InitialState, ProtocolSpec, SimulationConfig};
use crate::engine::{init_state, RunResult, Slot, TransferKind, UserId};
use crate::error::ConfigError;
use crate::pieces::{Piece, PieceSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("run has no trace; enable record_trace")]
    NoTrace,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("slot {slot}: user {user} sent to itself")]
    SelfTransfer { slot: Slot, user: UserId },
    #[error(
        "slot {slot}: user {from} sent piece {piece} it did not hold at the start of the slot"
    )]
    NotHeld {
        slot: Slot,
        from: UserId,
        piece: Piece,
    },
    #[error("slot {slot}: user {user} uploaded {count} times under the hard constraint")]
    Budget {
        slot: Slot,
        user: UserId,
        count: usize,
    },
    #[error("slot {slot}: piece {piece} went from {before} to {after} holders")]
    Doubling {
        slot: Slot,
        piece: Piece,
        before: u32,
        after: u32,
    },
    #[error("slot {slot}: user {user} holds {held:?}, not a prefix")]
    NotPrefix {
        slot: Slot,
        user: UserId,
        held: PieceSet,
    },
    #[error("slot {slot}: {kind:?} transfer on the wrong interleave channel")]
    Channel { slot: Slot, kind: TransferKind },
    #[error(
        "slot {slot}: user {user} pushed piece {piece} but its odd-slot maximum is {expected:?}"
    )]
    OddChannel {
        slot: Slot,
        user: UserId,
        piece: Piece,
        expected: Option<Piece>,
    },
    #[error("events out of slot order or beyond slot {slots_run}")]
    Ordering { slots_run: Slot },
    #[error("piece {piece} at user {user}: arrival table says {table:?}, replay says {replay:?}")]
    Arrival {
        piece: Piece,
        user: UserId,
        table: Option<Slot>,
        replay: Option<Slot>,
    },
    #[error("completion reported as {reported:?}, replay gives {replay:?}")]
    Completion {
        reported: Option<Slot>,
        replay: Option<Slot>,
    },
}

/// Checks availability delay, self-transfers, the hard upload budget,
/// per-piece occupancy doubling under hard constraints, the sequential-pull
/// prefix property, interleave channel separation, and that the arrival
/// table and completion slot agree with the replay.
pub fn audit_run(config: &SimulationConfig, result: &RunResult) -> Result<(), Violation> {
    let trace = result.trace.as_ref().ok_or(Violation::NoTrace)?;
    let initial = init_state(config)?;
    let (n, k) = (config.n, config.k);
    let source = initial.source();
    let mut held: Vec<PieceSet> = initial.users().iter().map(|u| u.pieces.clone()).collect();
    let mut first: Vec<Option<Slot>> = vec![None; n * k];
    for (u, set) in held.iter().enumerate() {
        for p in set.iter() {
            first[(p as usize - 1) * n + u] = Some(0);
        }
    }
    let mut holders: Vec<u32> = (1..=k as Piece)
        .map(|p| held.iter().filter(|s| s.contains(p)).count() as u32)
        .collect();
    let mut odd_max: Vec<Option<Piece>> = vec![None; n];
    let hard = config.constraint == Constraint::Hard;
    let sequential = config.protocol == ProtocolSpec::SequentialPull
        && config.initial_state == InitialState::SingleSource;
    let interleave = config.protocol == ProtocolSpec::Interleave;

    let mut uploads = vec![0usize; n];
    let mut gained = vec![0u32; k];
    let mut i = 0;
    let mut completed_at = None;
    for slot in 1..=result.slots_run {
        let start = i;
        while i < trace.len() && trace[i].slot == slot {
            let ev = trace[i];
            if ev.from == ev.to {
                return Err(Violation::SelfTransfer {
                    slot,
                    user: ev.from,
                });
            }
            if !held[ev.from].contains(ev.piece) {
                return Err(Violation::NotHeld {
                    slot,
                    from: ev.from,
                    piece: ev.piece,
                });
            }
            if interleave {
                let expected = if slot % 2 == 1 {
                    TransferKind::Push
                } else {
                    TransferKind::Pull
                };
                if ev.kind != expected {
                    return Err(Violation::Channel {
                        slot,
                        kind: ev.kind,
                    });
                }
                if ev.kind == TransferKind::Push
                    && Some(ev.from) != source
                    && odd_max[ev.from] != Some(ev.piece)
                {
                    return Err(Violation::OddChannel {
                        slot,
                        user: ev.from,
                        piece: ev.piece,
                        expected: odd_max[ev.from],
                    });
                }
            }
            uploads[ev.from] += 1;
            i += 1;
        }
        let events = &trace[start..i];
        if hard {
            for ev in events {
                let count = std::mem::take(&mut uploads[ev.from]);
                if count > 1 {
                    return Err(Violation::Budget {
                        slot,
                        user: ev.from,
                        count,
                    });
                }
            }
        } else {
            events.iter().for_each(|ev| uploads[ev.from] = 0);
        }

        for ev in events {
            if held[ev.to].insert(ev.piece) {
                first[(ev.piece as usize - 1) * n + ev.to] = Some(slot);
                gained[ev.piece as usize - 1] += 1;
            }
            if interleave && slot % 2 == 1 {
                odd_max[ev.to] = odd_max[ev.to].max(Some(ev.piece));
            }
        }
        for ev in events {
            let p = ev.piece as usize - 1;
            if gained[p] == 0 {
                continue;
            }
            let (before, after) = (holders[p], holders[p] + gained[p]);
            gained[p] = 0;
            if hard && after > 2 * before {
                return Err(Violation::Doubling {
                    slot,
                    piece: ev.piece,
                    before,
                    after,
                });
            }
            holders[p] = after;
        }
        if sequential {
            for ev in events {
                let set = &held[ev.to];
                if set
                    .lowest_missing()
                    .is_some_and(|m| (m as usize) <= set.len())
                {
                    return Err(Violation::NotPrefix {
                        slot,
                        user: ev.to,
                        held: set.clone(),
                    });
                }
            }
        }
        if completed_at.is_none() && held.iter().all(PieceSet::is_full) {
            completed_at = Some(slot);
        }
    }
    if i != trace.len() {
        return Err(Violation::Ordering {
            slots_run: result.slots_run,
        });
    }
    if completed_at.is_none() && held.iter().all(PieceSet::is_full) {
        completed_at = Some(0);
    }

    for p in 1..=k as Piece {
        for u in 0..n {
            let replay = first[(p as usize - 1) * n + u];
            let table = result.arrivals.get(p, u);
            if table != replay {
                return Err(Violation::Arrival {
                    piece: p,
                    user: u,
                    table,
                    replay,
                });
            }
        }
    }
    if result.completion_slot != completed_at {
        return Err(Violation::Completion {
            reported: result.completion_slot,
            replay: completed_at,
        });
    }
    Ok(())
}
