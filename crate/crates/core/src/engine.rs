//! Slot-synchronous simulation loop.
//!
//! Each slot every user (in ascending id order, one PRNG stream) picks a
//! target and asks the protocol for an action. Uploads are arbitrated under
//! the configured constraint, granted pieces are staged at their receivers,
//! and staged pieces are committed at the end of the slot so they can only
//! be forwarded from the next slot on.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Constraint, ContactModel, InitialState, ProtocolSpec, SimulationConfig};
use crate::error::{ConfigError, EngineError, SimError};
use crate::pieces::{Piece, PieceSet};
use crate::protocols::{Action, SelectionContext};

pub type UserId = usize;
pub type Slot = u64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserState {
    /// Pieces usable for uploads in the current slot.
    pub pieces: PieceSet,
    /// Pieces received this slot; merged into `pieces` at commit.
    pub staged: PieceSet,
    /// Highest piece received by push in an odd slot (interleave only).
    pub odd_channel_max: Option<Piece>,
    /// Piece endowed at t = 0 under the one-unique-per-user start.
    pub initial_piece: Option<Piece>,
    /// Next piece the interleave source releases.
    pub next_source_piece: Option<Piece>,
}

impl UserState {
    pub fn new(pieces: PieceSet) -> Self {
        let k = pieces.universe();
        Self {
            pieces,
            staged: PieceSet::new(k),
            odd_channel_max: None,
            initial_piece: None,
            next_source_piece: None,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.pieces.is_full()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransferKind {
    Push,
    Pull,
}

/// One granted upload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TransferEvent {
    pub slot: Slot,
    pub from: UserId,
    pub to: UserId,
    pub piece: Piece,
    pub kind: TransferKind,
}

/// A push `(from -> to)` or a pull request `(from = requester, to = target)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Request {
    pub from: UserId,
    pub to: UserId,
    pub piece: Piece,
}

impl Request {
    pub fn new(from: UserId, to: UserId, piece: Piece) -> Self {
        Self { from, to, piece }
    }
}

/// Fixed per-user contact lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactLists {
    lists: Vec<Vec<UserId>>,
}

impl ContactLists {
    pub fn list(&self, user: UserId) -> &[UserId] {
        &self.lists[user]
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }
}

/// Gives every user `m` distinct other users, sampled without replacement
/// and independently across users.
pub fn build_contact_lists<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    rng: &mut R,
) -> Result<ContactLists, ConfigError> {
    if n < 2 || m < 1 || m > n - 1 {
        return Err(ConfigError::new(
            "m",
            format!(
                "contact list size must be in 1..={}, got {m}",
                n.saturating_sub(1)
            ),
        ));
    }
    let lists = (0..n)
        .map(|owner| {
            index::sample(rng, n - 1, m)
                .into_iter()
                .map(|i| if i >= owner { i + 1 } else { i })
                .collect()
        })
        .collect();
    Ok(ContactLists { lists })
}

/// Uniform over the other `n - 1` users, or over the user's contact list.
pub fn sample_target<R: Rng + ?Sized>(
    user: UserId,
    n: usize,
    contacts: Option<&ContactLists>,
    rng: &mut R,
) -> UserId {
    match contacts {
        Some(lists) => {
            let list = lists.list(user);
            list[rng.random_range(0..list.len())]
        }
        None => {
            let r = rng.random_range(0..n - 1);
            if r >= user {
                r + 1
            } else {
                r
            }
        }
    }
}

/// First-receipt slot for every (piece, user) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrivalTable {
    n: usize,
    k: usize,
    slots: Vec<u32>,
}

impl ArrivalTable {
    const NEVER: u32 = u32::MAX;

    pub fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            k,
            slots: vec![Self::NEVER; n * k],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    fn idx(&self, piece: Piece, user: UserId) -> usize {
        (piece as usize - 1) * self.n + user
    }

    pub fn get(&self, piece: Piece, user: UserId) -> Option<Slot> {
        let s = self.slots[self.idx(piece, user)];
        (s != Self::NEVER).then_some(s as Slot)
    }

    /// Records a first receipt; later receipts of the same pair are ignored.
    pub fn record(&mut self, piece: Piece, user: UserId, slot: Slot) {
        let i = self.idx(piece, user);
        if self.slots[i] == Self::NEVER {
            self.slots[i] = u32::try_from(slot).expect("slot overflow");
        }
    }

    /// Arrival slots of `piece` indexed by user.
    pub fn for_piece(&self, piece: Piece) -> impl Iterator<Item = Option<Slot>> + '_ {
        let start = (piece as usize - 1) * self.n;
        self.slots[start..start + self.n]
            .iter()
            .map(|&s| (s != Self::NEVER).then_some(s as Slot))
    }

    pub fn all_served(&self) -> bool {
        self.slots.iter().all(|&s| s != Self::NEVER)
    }

    pub fn max_slot(&self) -> Option<Slot> {
        self.slots
            .iter()
            .filter(|&&s| s != Self::NEVER)
            .max()
            .map(|&s| s as Slot)
    }
}

/// Reusable upload arbitration buffers.
#[derive(Debug, Clone)]
struct UploadArbiter {
    busy: Vec<bool>,
    incoming: Vec<u32>,
    chosen: Vec<usize>,
    touched: Vec<UserId>,
    granted: Vec<usize>,
}

impl UploadArbiter {
    fn new(n: usize) -> Self {
        Self {
            busy: vec![false; n],
            incoming: vec![0; n],
            chosen: vec![0; n],
            touched: Vec::new(),
            granted: Vec::new(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn resolve<R: Rng + ?Sized>(
        &mut self,
        slot: Slot,
        pushes: &[Request],
        pulls: &[Request],
        constraint: Constraint,
        users: &[UserState],
        rng: &mut R,
        out: &mut Vec<TransferEvent>,
    ) -> Result<(), EngineError> {
        for push in pushes {
            if push.from == push.to {
                return Err(EngineError::SelfTarget { user: push.from });
            }
            if !users[push.from].pieces.contains(push.piece) {
                return Err(EngineError::PushWithoutPiece {
                    user: push.from,
                    piece: push.piece,
                });
            }
        }
        for pull in pulls {
            if pull.from == pull.to {
                return Err(EngineError::SelfTarget { user: pull.from });
            }
            if users[pull.from].pieces.contains(pull.piece) {
                return Err(EngineError::PullOfHeldPiece {
                    user: pull.from,
                    piece: pull.piece,
                });
            }
        }

        out.extend(pushes.iter().map(|p| TransferEvent {
            slot,
            from: p.from,
            to: p.to,
            piece: p.piece,
            kind: TransferKind::Push,
        }));

        let pull_event = |r: &Request| TransferEvent {
            slot,
            from: r.to,
            to: r.from,
            piece: r.piece,
            kind: TransferKind::Pull,
        };

        match constraint {
            Constraint::Soft => {
                out.extend(
                    pulls
                        .iter()
                        .filter(|r| users[r.to].pieces.contains(r.piece))
                        .map(pull_event),
                );
            }
            Constraint::Hard => {
                for push in pushes {
                    self.busy[push.from] = true;
                }
                // Reservoir sampling keeps one uniform winner per target.
                for (i, r) in pulls.iter().enumerate() {
                    if self.busy[r.to] || !users[r.to].pieces.contains(r.piece) {
                        continue;
                    }
                    let seen = &mut self.incoming[r.to];
                    *seen += 1;
                    if *seen == 1 {
                        self.chosen[r.to] = i;
                        self.touched.push(r.to);
                    } else if rng.random_range(0..*seen) == 0 {
                        self.chosen[r.to] = i;
                    }
                }
                self.granted.clear();
                for &t in &self.touched {
                    self.granted.push(self.chosen[t]);
                    self.incoming[t] = 0;
                }
                self.touched.clear();
                self.granted.sort_unstable();
                out.extend(self.granted.iter().map(|&i| pull_event(&pulls[i])));
                for push in pushes {
                    self.busy[push.from] = false;
                }
            }
        }
        Ok(())
    }
}

/// Arbitrates one slot's uploads.
///
/// Under the soft constraint every push is granted, and every pull whose
/// target holds the piece. Under the hard constraint a user that pushes has
/// no budget left for pulls, and otherwise serves exactly one uniformly
/// chosen valid pull request.
pub fn resolve_uploads<R: Rng + ?Sized>(
    slot: Slot,
    pushes: &[Request],
    pulls: &[Request],
    constraint: Constraint,
    users: &[UserState],
    rng: &mut R,
) -> Result<Vec<TransferEvent>, EngineError> {
    let mut out = Vec::new();
    UploadArbiter::new(users.len())
        .resolve(slot, pushes, pulls, constraint, users, rng, &mut out)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// Every user holds every piece.
    Completed,
    /// No further receipt is possible.
    Stalled,
    /// The slot cap was reached first.
    SlotCap,
}

/// Full mutable state of one run.
#[derive(Debug, Clone)]
pub struct SystemState {
    config: SimulationConfig,
    users: Vec<UserState>,
    contacts: Option<ContactLists>,
    source: Option<UserId>,
    slot: Slot,
    arrivals: ArrivalTable,
    emergence: Vec<Option<Slot>>,
    source_release: Vec<Option<Slot>>,
    occupancy: Vec<u32>,
    complete_users: usize,
    rng: ChaCha8Rng,
    arbiter: UploadArbiter,
    pushes: Vec<Request>,
    pulls: Vec<Request>,
    events: Vec<TransferEvent>,
    receivers: Vec<UserId>,
}

/// Builds the initial state: endowments, contact lists and the PRNG.
pub fn init_state(config: &SimulationConfig) -> Result<SystemState, ConfigError> {
    config.validate()?;
    let (n, k) = (config.n, config.k);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut arrivals = ArrivalTable::new(n, k);
    let mut users: Vec<UserState> = (0..n).map(|_| UserState::new(PieceSet::new(k))).collect();

    let source = match config.initial_state {
        InitialState::SingleSource => {
            users[0].pieces = PieceSet::full(k);
            if config.protocol == ProtocolSpec::Interleave {
                users[0].next_source_piece = Some(1);
            }
            Some(0)
        }
        InitialState::EtaSeeded { eta } => {
            let holders = SimulationConfig::eta_holders(eta, n);
            for piece in 1..=k as Piece {
                for u in index::sample(&mut rng, n, holders) {
                    users[u].pieces.insert(piece);
                }
            }
            None
        }
        InitialState::OneUniquePerUser => {
            for (i, user) in users.iter_mut().enumerate() {
                let piece = i as Piece + 1;
                user.pieces.insert(piece);
                user.initial_piece = Some(piece);
            }
            None
        }
    };

    let contacts = match config.contact_model {
        ContactModel::Uniform => None,
        ContactModel::FixedLists { m } => Some(build_contact_lists(n, m, &mut rng)?),
    };

    let mut occupancy = vec![0u32; k];
    for (u, user) in users.iter().enumerate() {
        for p in user.pieces.iter() {
            arrivals.record(p, u, 0);
            occupancy[p as usize - 1] += 1;
        }
    }
    let emergence = match source {
        Some(_) => vec![None; k],
        None => vec![Some(0); k],
    };
    let complete_users = users.iter().filter(|u| u.is_complete()).count();

    Ok(SystemState {
        config: config.clone(),
        users,
        contacts,
        source,
        slot: 0,
        arrivals,
        emergence,
        source_release: vec![None; k],
        occupancy,
        complete_users,
        rng,
        arbiter: UploadArbiter::new(n),
        pushes: Vec::new(),
        pulls: Vec::new(),
        events: Vec::new(),
        receivers: Vec::new(),
    })
}

impl SystemState {
    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    pub fn users(&self) -> &[UserState] {
        &self.users
    }

    pub fn contacts(&self) -> Option<&ContactLists> {
        self.contacts.as_ref()
    }

    pub fn source(&self) -> Option<UserId> {
        self.source
    }

    /// Last completed slot (0 before the first step).
    pub fn slot(&self) -> Slot {
        self.slot
    }

    pub fn arrivals(&self) -> &ArrivalTable {
        &self.arrivals
    }

    /// Current number of holders of `piece`.
    pub fn occupancy(&self, piece: Piece) -> u32 {
        self.occupancy[piece as usize - 1]
    }

    pub fn is_complete(&self) -> bool {
        self.complete_users == self.config.n
    }

    /// True when no future slot can deliver a new piece.
    ///
    /// Priority push is absorbed once everyone holds piece `k`: from then on
    /// every user relays piece `k` forever.
    pub fn is_absorbing(&self) -> bool {
        if self.is_complete() {
            return true;
        }
        match self.config.protocol {
            ProtocolSpec::PriorityPush { .. } => {
                self.occupancy[self.config.k - 1] as usize == self.config.n
            }
            _ => false,
        }
    }

    fn pick_target(&mut self, user: UserId) -> UserId {
        // The source keeps a full view of the network even when everyone
        // else is restricted to a contact list.
        let contacts = if Some(user) == self.source {
            None
        } else {
            self.contacts.as_ref()
        };
        sample_target(user, self.config.n, contacts, &mut self.rng)
    }

    /// Advances one slot and returns the transfers granted in it.
    pub fn step_slot(&mut self) -> Result<&[TransferEvent], EngineError> {
        self.slot += 1;
        let slot = self.slot;
        let (n, k) = (self.config.n, self.config.k);
        let protocol = self.config.protocol;

        self.pushes.clear();
        self.pulls.clear();
        self.events.clear();

        for u in 0..n {
            let target = self.pick_target(u);
            let ctx = SelectionContext {
                slot,
                k,
                is_source: Some(u) == self.source,
                target_id: target,
                user: &self.users[u],
                target: &self.users[target],
            };
            match protocol.choose(&ctx, &mut self.rng)? {
                Action::Push(piece) => self.pushes.push(Request::new(u, target, piece)),
                Action::Pull(piece) => self.pulls.push(Request::new(u, target, piece)),
                Action::Idle => {}
            }
        }

        self.arbiter.resolve(
            slot,
            &self.pushes,
            &self.pulls,
            self.config.constraint,
            &self.users,
            &mut self.rng,
            &mut self.events,
        )?;

        let odd_channel = protocol == ProtocolSpec::Interleave && slot % 2 == 1;
        for ev in &self.events {
            if Some(ev.from) == self.source {
                let release = &mut self.source_release[ev.piece as usize - 1];
                release.get_or_insert(slot);
            }
            let receiver = &mut self.users[ev.to];
            if odd_channel && ev.kind == TransferKind::Push {
                receiver.odd_channel_max = receiver.odd_channel_max.max(Some(ev.piece));
            }
            if receiver.pieces.contains(ev.piece) || receiver.staged.contains(ev.piece) {
                continue;
            }
            if receiver.staged.is_empty() {
                self.receivers.push(ev.to);
            }
            receiver.staged.insert(ev.piece);
            self.arrivals.record(ev.piece, ev.to, slot);
            if Some(ev.to) != self.source {
                self.emergence[ev.piece as usize - 1].get_or_insert(slot);
            }
        }

        if protocol == ProtocolSpec::Interleave && slot % 2 == 1 {
            if let Some(src) = self.source {
                let next = &mut self.users[src].next_source_piece;
                *next = next.map(|p| (p + 1).min(k as Piece));
            }
        }

        for &u in &self.receivers {
            let user = &mut self.users[u];
            for p in user.staged.iter() {
                self.occupancy[p as usize - 1] += 1;
            }
            user.pieces.union_with(&user.staged);
            user.staged.clear();
            if user.is_complete() {
                self.complete_users += 1;
            }
        }
        self.receivers.clear();

        Ok(&self.events)
    }

    fn into_result(self, termination: Termination, trace: Option<Vec<TransferEvent>>) -> RunResult {
        let completed = termination == Termination::Completed;
        RunResult {
            n: self.config.n,
            k: self.config.k,
            protocol: self.config.protocol,
            source: self.source,
            completed,
            completion_slot: if completed {
                self.arrivals.max_slot()
            } else {
                None
            },
            slots_run: self.slot,
            termination,
            emergence: self.emergence,
            source_release: self.source_release,
            arrivals: self.arrivals,
            trace,
        }
    }
}

/// Outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub n: usize,
    pub k: usize,
    pub protocol: ProtocolSpec,
    pub source: Option<UserId>,
    pub completed: bool,
    /// First slot after which all users hold all pieces.
    pub completion_slot: Option<Slot>,
    pub slots_run: Slot,
    pub termination: Termination,
    /// Per piece, the first slot a non-source user received it
    /// (slot 0 for starts without a source).
    pub emergence: Vec<Option<Slot>>,
    /// Per piece, the first slot the source uploaded it.
    pub source_release: Vec<Option<Slot>>,
    pub arrivals: ArrivalTable,
    pub trace: Option<Vec<TransferEvent>>,
}

/// Runs until completion, absorption, or the slot cap.
pub fn run(config: &SimulationConfig) -> Result<RunResult, SimError> {
    let mut state = init_state(config)?;
    let cap = config.effective_max_slots();
    let mut trace = config.record_trace.then(Vec::new);
    let termination = loop {
        if state.is_complete() {
            break Termination::Completed;
        }
        if state.is_absorbing() {
            break Termination::Stalled;
        }
        if state.slot() >= cap {
            break Termination::SlotCap;
        }
        let events = state.step_slot()?;
        if let Some(t) = trace.as_mut() {
            t.extend_from_slice(events);
        }
    };
    Ok(state.into_result(termination, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn holding(k: usize, pieces: &[Piece]) -> UserState {
        UserState::new(PieceSet::from_pieces(k, pieces.iter().copied()))
    }

    #[test]
    fn single_source_endowment() {
        let cfg = SimulationConfig::new(3, 2, ProtocolSpec::RandomPush);
        let state = init_state(&cfg).unwrap();
        assert_eq!(
            state.users()[0].pieces.iter().collect::<Vec<_>>(),
            vec![1, 2]
        );
        assert!(state.users()[1].pieces.is_empty());
        assert!(state.users()[2].pieces.is_empty());
        assert_eq!(state.arrivals().get(1, 0), Some(0));
        assert_eq!(state.arrivals().get(1, 1), None);
    }

    #[test]
    fn unique_endowment() {
        let cfg = SimulationConfig::new(4, 4, ProtocolSpec::Advocate)
            .with_initial_state(InitialState::OneUniquePerUser);
        let state = init_state(&cfg).unwrap();
        for (i, u) in state.users().iter().enumerate() {
            assert_eq!(u.pieces.iter().collect::<Vec<_>>(), vec![i as Piece + 1]);
            assert_eq!(u.initial_piece, Some(i as Piece + 1));
        }
    }

    #[test]
    fn eta_seeded_holder_counts() {
        let mut assignments = std::collections::HashSet::new();
        for seed in 0..100 {
            let cfg = SimulationConfig::new(10, 3, ProtocolSpec::RandomPull)
                .with_initial_state(InitialState::EtaSeeded { eta: 0.5 })
                .with_seed(seed);
            let state = init_state(&cfg).unwrap();
            for p in 1..=3 {
                assert_eq!(state.occupancy(p), 5);
                let holders = state
                    .users()
                    .iter()
                    .filter(|u| u.pieces.contains(p))
                    .count();
                assert_eq!(holders, 5);
            }
            let layout: Vec<Vec<Piece>> = state
                .users()
                .iter()
                .map(|u| u.pieces.iter().collect())
                .collect();
            assignments.insert(layout);
        }
        assert!(assignments.len() > 50, "assignment should vary with seed");
    }

    #[test]
    fn invalid_config_names_field() {
        let err = init_state(&SimulationConfig::new(1, 1, ProtocolSpec::RandomPush)).unwrap_err();
        assert_eq!(err.field, "n");
    }

    #[test]
    fn two_users_target_each_other() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            assert_eq!(sample_target(0, 2, None, &mut rng), 1);
            assert_eq!(sample_target(1, 2, None, &mut rng), 0);
        }
    }

    #[test]
    fn uniform_target_chi_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 100;
        let draws = 100_000;
        let mut counts = vec![0u32; n];
        for _ in 0..draws {
            counts[sample_target(7, n, None, &mut rng)] += 1;
        }
        assert_eq!(counts[7], 0);
        let expected = draws as f64 / 99.0;
        let chi2: f64 = counts
            .iter()
            .enumerate()
            .filter(|&(u, _)| u != 7)
            .map(|(_, &c)| (c as f64 - expected).powi(2) / expected)
            .sum();
        // chi-square, 98 degrees of freedom, upper 1% point
        assert!(chi2 < 133.48, "chi2 = {chi2}");
    }

    #[test]
    fn fixed_list_targets() {
        let lists = ContactLists {
            lists: vec![vec![2, 5, 9]; 10],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = [0u32; 10];
        for _ in 0..10_000 {
            counts[sample_target(0, 10, Some(&lists), &mut rng)] += 1;
        }
        assert_eq!(
            counts.iter().sum::<u32>(),
            counts[2] + counts[5] + counts[9]
        );
        for u in [2, 5, 9] {
            assert!((counts[u] as f64 / 10_000.0 - 1.0 / 3.0).abs() < 0.02);
        }
    }

    #[test]
    fn contact_list_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pair = build_contact_lists(2, 1, &mut rng).unwrap();
        assert_eq!(pair.list(0), &[1]);
        assert_eq!(pair.list(1), &[0]);

        let lists = build_contact_lists(500, 8, &mut rng).unwrap();
        for u in 0..500 {
            let l = lists.list(u);
            assert_eq!(l.len(), 8);
            assert!(!l.contains(&u));
            let distinct: std::collections::HashSet<_> = l.iter().collect();
            assert_eq!(distinct.len(), 8);
        }

        let a = build_contact_lists(500, 8, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = build_contact_lists(500, 8, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_ne!(a, b);
        assert!(build_contact_lists(5, 5, &mut rng).is_err());
        assert!(build_contact_lists(5, 0, &mut rng).is_err());
    }

    #[test]
    fn hard_arbitration_picks_one_uniformly() {
        let users = vec![holding(1, &[]), holding(1, &[]), holding(1, &[1])];
        let pulls = [Request::new(0, 2, 1), Request::new(1, 2, 1)];
        let mut first = 0;
        let trials = 10_000;
        for seed in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ev = resolve_uploads(1, &[], &pulls, Constraint::Hard, &users, &mut rng).unwrap();
            assert_eq!(ev.len(), 1);
            assert_eq!(ev[0].from, 2);
            if ev[0].to == 0 {
                first += 1;
            }
        }
        let freq = first as f64 / trials as f64;
        assert!((freq - 0.5).abs() < 0.03, "freq = {freq}");
    }

    #[test]
    fn soft_arbitration_grants_all_valid() {
        let users = vec![holding(1, &[]), holding(1, &[]), holding(1, &[1])];
        let pulls = [Request::new(0, 2, 1), Request::new(1, 2, 1)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ev = resolve_uploads(1, &[], &pulls, Constraint::Soft, &users, &mut rng).unwrap();
        assert_eq!(ev.len(), 2);
        assert!(
            resolve_uploads(1, &[], &[], Constraint::Hard, &users, &mut rng)
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn own_push_blocks_incoming_pulls() {
        let users = vec![holding(2, &[1, 2]), holding(2, &[]), holding(2, &[])];
        let pushes = [Request::new(0, 1, 1)];
        let pulls = [Request::new(2, 0, 2)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let hard = resolve_uploads(3, &pushes, &pulls, Constraint::Hard, &users, &mut rng).unwrap();
        assert_eq!(
            hard,
            vec![TransferEvent {
                slot: 3,
                from: 0,
                to: 1,
                piece: 1,
                kind: TransferKind::Push
            }]
        );
        let soft = resolve_uploads(3, &pushes, &pulls, Constraint::Soft, &users, &mut rng).unwrap();
        assert_eq!(soft.len(), 2);
    }

    #[test]
    fn pull_from_target_without_piece_fails() {
        let users = vec![holding(2, &[]), holding(2, &[2])];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ev = resolve_uploads(
            1,
            &[],
            &[Request::new(0, 1, 1)],
            Constraint::Hard,
            &users,
            &mut rng,
        )
        .unwrap();
        assert!(ev.is_empty());
    }

    #[test]
    fn precondition_violations_are_reported() {
        let users = vec![holding(2, &[1]), holding(2, &[])];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            resolve_uploads(
                1,
                &[Request::new(1, 0, 1)],
                &[],
                Constraint::Hard,
                &users,
                &mut rng
            ),
            Err(EngineError::PushWithoutPiece { user: 1, piece: 1 })
        );
        assert_eq!(
            resolve_uploads(
                1,
                &[],
                &[Request::new(0, 1, 1)],
                Constraint::Hard,
                &users,
                &mut rng
            ),
            Err(EngineError::PullOfHeldPiece { user: 0, piece: 1 })
        );
    }

    #[test]
    fn two_user_push_hand_trace() {
        let cfg = SimulationConfig::new(2, 1, ProtocolSpec::RandomPush).with_trace(true);
        let mut state = init_state(&cfg).unwrap();
        let events = state.step_slot().unwrap().to_vec();
        assert_eq!(
            events,
            vec![TransferEvent {
                slot: 1,
                from: 0,
                to: 1,
                piece: 1,
                kind: TransferKind::Push
            }]
        );
        assert!(state.is_complete());

        let result = run(&cfg).unwrap();
        assert!(result.completed);
        assert_eq!(result.completion_slot, Some(1));
        assert_eq!(result.emergence, vec![Some(1)]);
    }

    #[test]
    fn staged_pieces_wait_one_slot() {
        // n = 3, k = 1: whoever receives in slot 1 cannot push in slot 1.
        let cfg = SimulationConfig::new(3, 1, ProtocolSpec::RandomPush).with_seed(5);
        let mut state = init_state(&cfg).unwrap();
        let first = state.step_slot().unwrap().to_vec();
        assert_eq!(first.len(), 1);
        assert_eq!(first[0].from, 0);
        let second = state.step_slot().unwrap().to_vec();
        assert_eq!(second.len(), 2);
    }

    #[test]
    fn complete_state_is_a_fixed_point() {
        let cfg = SimulationConfig::new(3, 2, ProtocolSpec::RandomPull);
        let mut state = init_state(&cfg).unwrap();
        while !state.is_complete() {
            state.step_slot().unwrap();
        }
        let before = state.users().to_vec();
        for _ in 0..5 {
            assert!(state.step_slot().unwrap().is_empty());
        }
        assert_eq!(state.users(), &before[..]);
    }

    #[test]
    fn slot_cap_marks_incomplete() {
        let cfg = SimulationConfig::new(50, 20, ProtocolSpec::RandomPull).with_max_slots(3);
        let result = run(&cfg).unwrap();
        assert!(!result.completed);
        assert_eq!(result.termination, Termination::SlotCap);
        assert_eq!(result.completion_slot, None);
        assert_eq!(result.slots_run, 3);
    }

    #[test]
    fn priority_push_stalls_instead_of_spinning() {
        let cfg = SimulationConfig::new(30, 5, ProtocolSpec::PriorityPush { spacing: 1 });
        let result = run(&cfg).unwrap();
        assert_eq!(result.termination, Termination::Stalled);
        assert!(result.slots_run < cfg.effective_max_slots());
    }

    #[test]
    fn interleave_source_advances_on_odd_slots() {
        let cfg = SimulationConfig::new(4, 3, ProtocolSpec::Interleave).with_trace(true);
        let mut state = init_state(&cfg).unwrap();
        let mut released = Vec::new();
        for _ in 0..8 {
            let slot = state.slot() + 1;
            let events = state.step_slot().unwrap();
            if slot % 2 == 1 {
                let from_source: Vec<Piece> = events
                    .iter()
                    .filter(|e| e.from == 0)
                    .map(|e| e.piece)
                    .collect();
                assert_eq!(from_source.len(), 1);
                released.push(from_source[0]);
            } else {
                assert!(events.iter().all(|e| e.kind == TransferKind::Pull));
            }
        }
        assert_eq!(released, vec![1, 2, 3, 3]);
    }
}
