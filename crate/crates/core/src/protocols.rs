//! Piece-selection rules.
//!
//! Every rule maps (slot, the acting user's committed state, and for the
//! two-sided rule the target's committed state) to a single [`Action`].
//! Staged receipts are never visible here: a piece received in slot `t`
//! only becomes usable in slot `t + 1`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::ProtocolSpec;
use crate::engine::{UserId, UserState};
use crate::error::EngineError;
use crate::pieces::{Piece, PieceSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "piece", rename_all = "lowercase")]
pub enum Action {
    Push(Piece),
    Pull(Piece),
    Idle,
}

/// What a rule may look at when choosing an action.
#[derive(Debug, Clone, Copy)]
pub struct SelectionContext<'a> {
    pub slot: u64,
    pub k: usize,
    pub is_source: bool,
    pub target_id: UserId,
    pub user: &'a UserState,
    pub target: &'a UserState,
}

pub fn random_pull_select<R: Rng + ?Sized>(pieces: &PieceSet, rng: &mut R) -> Action {
    let missing = pieces.missing_len();
    if missing == 0 {
        return Action::Idle;
    }
    let rank = rng.random_range(0..missing);
    Action::Pull(pieces.nth_missing(rank).expect("rank below missing count"))
}

pub fn sequential_pull_select(pieces: &PieceSet) -> Action {
    pieces.lowest_missing().map_or(Action::Idle, Action::Pull)
}

pub fn random_push_select<R: Rng + ?Sized>(pieces: &PieceSet, rng: &mut R) -> Action {
    let held = pieces.len();
    if held == 0 {
        return Action::Idle;
    }
    let rank = rng.random_range(0..held);
    Action::Push(pieces.nth_present(rank).expect("rank below held count"))
}

/// The source sends piece `i` during slots `(i-1)l+1 ..= il` and keeps
/// sending piece `k` afterwards; everyone else relays their highest piece.
pub fn priority_push_select(
    pieces: &PieceSet,
    slot: u64,
    spacing: u32,
    k: usize,
    is_source: bool,
) -> Action {
    debug_assert!(slot >= 1 && spacing >= 1);
    if is_source {
        let scheduled = slot.div_ceil(spacing as u64).min(k as u64);
        Action::Push(scheduled as Piece)
    } else {
        pieces.highest().map_or(Action::Idle, Action::Push)
    }
}

/// Odd slots push on the odd channel; even slots pull the lowest missing
/// piece regardless of how held pieces arrived.
pub fn interleave_action(user: &UserState, slot: u64, is_source: bool) -> Action {
    debug_assert!(slot >= 1);
    if slot % 2 == 1 {
        let piece = if is_source {
            user.next_source_piece
        } else {
            user.odd_channel_max
        };
        piece.map_or(Action::Idle, Action::Push)
    } else {
        sequential_pull_select(&user.pieces)
    }
}

/// Pull the target's initial piece if missing, otherwise a uniform piece
/// the target has and the user lacks. `None` when the target was never
/// endowed with an initial piece.
pub fn advocate_select<R: Rng + ?Sized>(
    user: &UserState,
    target: &UserState,
    rng: &mut R,
) -> Option<Action> {
    let advocated = target.initial_piece?;
    if !user.pieces.contains(advocated) {
        return Some(Action::Pull(advocated));
    }
    let useful = target.pieces.difference_len(&user.pieces);
    if useful == 0 {
        return Some(Action::Idle);
    }
    let rank = rng.random_range(0..useful);
    Some(Action::Pull(
        target
            .pieces
            .nth_in_difference(&user.pieces, rank)
            .expect("rank below difference size"),
    ))
}

impl ProtocolSpec {
    /// Dispatches to the rule for this protocol.
    pub fn choose<R: Rng + ?Sized>(
        &self,
        ctx: &SelectionContext<'_>,
        rng: &mut R,
    ) -> Result<Action, EngineError> {
        let pieces = &ctx.user.pieces;
        Ok(match *self {
            ProtocolSpec::RandomPull => random_pull_select(pieces, rng),
            ProtocolSpec::SequentialPull => sequential_pull_select(pieces),
            ProtocolSpec::RandomPush => random_push_select(pieces, rng),
            ProtocolSpec::PriorityPush { spacing } => {
                priority_push_select(pieces, ctx.slot, spacing, ctx.k, ctx.is_source)
            }
            ProtocolSpec::Interleave => interleave_action(ctx.user, ctx.slot, ctx.is_source),
            ProtocolSpec::Advocate => advocate_select(ctx.user, ctx.target, rng).ok_or(
                EngineError::MissingInitialPiece {
                    target: ctx.target_id,
                },
            )?,
        })
    }
}
