//! Analytic companions to the simulator.
//!
//! The single-message push process `Y_t` (every informed user tells one
//! uniformly random user per round) has one-step mean
//! `G(y) = y + (n - y)(1 - (1 - 1/n)^y)`, and the deterministic proxy
//! `Ybar_0 = 1, Ybar_{t+1} = G(Ybar_t)` tracks it closely. This module also
//! provides geometric-sum samplers for pull counting and numeric
//! calculators for every completion-time bound the harness checks.
//!
//! Logarithms: `ln` for the pull and all-to-all bounds, `log2` wherever the
//! bound is stated in binary logarithms (push spreading and interleave).

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::OracleError;

/// `G(y)` for `y` in `[1, n]`.
pub fn gossip_mean_map(y: f64, n: f64) -> Result<f64, OracleError> {
    if n.is_nan() || n < 1.0 {
        return Err(OracleError::domain("n", n, "[1, inf)"));
    }
    if !(1.0..=n).contains(&y) {
        return Err(OracleError::domain("y", y, "[1, n]"));
    }
    // 1 - (1 - 1/n)^y without cancellation for large n
    let hit = -(y * (-1.0 / n).ln_1p()).exp_m1();
    Ok(y + (n - y) * hit)
}

/// `Ybar_t` for `t = 0..=t_max`; `Ybar_t = 0` for negative `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GossipCurve {
    pub n: u64,
    pub values: Vec<f64>,
}

impl GossipCurve {
    pub fn at(&self, t: i64) -> f64 {
        if t < 0 {
            return 0.0;
        }
        let i = (t as usize).min(self.values.len() - 1);
        self.values[i]
    }

    /// First `t` with `Ybar_t >= level`.
    pub fn first_reaching(&self, level: f64) -> Option<usize> {
        self.values.iter().position(|&v| v >= level)
    }
}

pub fn deterministic_gossip(n: u64, t_max: usize) -> Result<GossipCurve, OracleError> {
    if n < 2 {
        return Err(OracleError::domain("n", n as f64, "[2, inf)"));
    }
    let nf = n as f64;
    let mut values = Vec::with_capacity(t_max + 1);
    let mut y = 1.0;
    values.push(y);
    for _ in 0..t_max {
        y = gossip_mean_map(y, nf)?.min(nf);
        values.push(y);
    }
    Ok(GossipCurve { n, values })
}

/// Uniform over the `n - 1` users other than `sender`.
fn other_user<R: Rng + ?Sized>(sender: u64, n: u64, rng: &mut R) -> u64 {
    let r = rng.random_range(0..n - 1);
    if r >= sender {
        r + 1
    } else {
        r
    }
}

/// One round started by users `0..informed`: returns `Y_{t+1}`.
///
/// Each informed user tells one uniformly chosen other user. `G` is the
/// exact mean when targets may include the sender itself; excluding it
/// changes the mean by `O(y / n^2)`.
pub fn gossip_round<R: Rng + ?Sized>(informed: u64, n: u64, rng: &mut R) -> u64 {
    let mut marked = vec![false; n as usize];
    marked[..informed as usize]
        .iter_mut()
        .for_each(|m| *m = true);
    let mut y = informed;
    for sender in 0..informed {
        let t = other_user(sender, n, rng) as usize;
        if !marked[t] {
            marked[t] = true;
            y += 1;
        }
    }
    y
}

/// A full trajectory `Y_0 = 1, Y_1, ...` ending at the first `Y_t = n`.
pub fn classical_gossip_sample<R: Rng + ?Sized>(n: u64, rng: &mut R) -> Vec<u64> {
    assert!(n >= 2, "classical gossip needs n >= 2");
    let mut informed = vec![false; n as usize];
    let mut order = Vec::with_capacity(n as usize);
    informed[0] = true;
    order.push(0u64);
    let mut path = vec![1u64];
    while order.len() < n as usize {
        let senders = order.len();
        for i in 0..senders {
            let t = other_user(order[i], n, rng);
            if !informed[t as usize] {
                informed[t as usize] = true;
                order.push(t);
            }
        }
        path.push(order.len() as u64);
    }
    path
}

/// `Geo(alpha)` with `P[Geo > m] = (1 - alpha)^m` for `m >= 0`, i.e. the
/// number of Bernoulli(alpha) trials up to and including the first success.
pub fn geo_sample<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> u64 {
    let failures = Geometric::new(alpha)
        .expect("alpha must lie in (0, 1]")
        .sample(rng);
    failures + 1
}

/// One draw of `B_k = sum_{i=1..k} Geo(i / n)`.
pub fn geo_sum_sample<R: Rng + ?Sized>(n: u64, k: u64, rng: &mut R) -> u64 {
    assert!(1 <= k && k <= n, "need 1 <= k <= n");
    (1..=k).map(|i| geo_sample(i as f64 / n as f64, rng)).sum()
}

/// `E[B_k] = sum_{i=1..k} n / i`.
pub fn geo_sum_mean(n: u64, k: u64) -> f64 {
    (1..=k).map(|i| n as f64 / i as f64).sum()
}

/// `Var[B_k] = sum_{i=1..k} (1 - a_i) / a_i^2` with `a_i = i / n`.
pub fn geo_sum_variance(n: u64, k: u64) -> f64 {
    (1..=k)
        .map(|i| {
            let a = i as f64 / n as f64;
            (1.0 - a) / (a * a)
        })
        .sum()
}

/// `2 exp(-k n^{-(1 - eps)})`, an upper bound on `P[B_k <= (1 - eps) n ln n]`.
pub fn pull_count_tail(n: u64, k: u64, eps: f64) -> Result<f64, OracleError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(OracleError::domain("eps", eps, "(0, 1)"));
    }
    if k < 1 || k > n {
        return Err(OracleError::domain("k", k as f64, "[1, n]"));
    }
    Ok(2.0 * (-(k as f64) * (n as f64).powf(-(1.0 - eps))).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Theorem {
    /// Pull-only lower bound on spreading `beta k` pieces to `n / ln n` users.
    PullSpreadLower,
    /// Pull completion from a state where each piece is at `eta n` users.
    PullFromSeeded,
    /// Pull-only completion upper bound from single copies.
    PullUpper,
    /// Push-only lower bound on the final stage.
    PushTailLower,
    /// Priority push reach within `(1 + delta) log2 n` of release.
    PriorityPushReach,
    /// Interleave completion upper bound.
    InterleaveUpper,
    /// Advocate all-to-all completion in `n + O(log n)`.
    AdvocateAllToAll,
}

impl Theorem {
    pub fn number(&self) -> u8 {
        match self {
            Theorem::PullSpreadLower => 1,
            Theorem::PullFromSeeded => 2,
            Theorem::PullUpper => 3,
            Theorem::PushTailLower => 4,
            Theorem::PriorityPushReach => 5,
            Theorem::InterleaveUpper => 6,
            Theorem::AdvocateAllToAll => 7,
        }
    }

    pub fn from_number(number: u8) -> Option<Self> {
        Some(match number {
            1 => Theorem::PullSpreadLower,
            2 => Theorem::PullFromSeeded,
            3 => Theorem::PullUpper,
            4 => Theorem::PushTailLower,
            5 => Theorem::PriorityPushReach,
            6 => Theorem::InterleaveUpper,
            7 => Theorem::AdvocateAllToAll,
            _ => return None,
        })
    }

    /// Whether the bound caps the statistic from above.
    pub fn direction(&self) -> Direction {
        match self {
            Theorem::PullSpreadLower | Theorem::PushTailLower => Direction::AtLeast,
            _ => Direction::AtMost,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    AtMost,
    AtLeast,
}

impl Direction {
    pub fn holds(&self, value: f64, bound: f64) -> bool {
        match self {
            Direction::AtMost => value <= bound,
            Direction::AtLeast => value >= bound,
        }
    }
}

/// Parameters shared by the bound calculators; each theorem reads a subset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub n: f64,
    pub k: f64,
    pub beta: f64,
    pub eta: f64,
    pub c: f64,
    pub delta: f64,
    pub eps: f64,
    pub spacing: f64,
    /// Constant in front of `ln n` for the all-to-all bound.
    pub log_constant: f64,
}

impl BoundParams {
    pub fn new(n: usize, k: usize) -> Self {
        Self {
            n: n as f64,
            k: k as f64,
            beta: 0.5,
            eta: 0.5,
            c: 1.0,
            delta: 0.1,
            eps: 0.1,
            spacing: 1.0,
            log_constant: 0.0,
        }
    }
}

fn open_unit(name: &'static str, v: f64) -> Result<(), OracleError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(OracleError::domain(name, v, "(0, 1)"))
    }
}

fn positive(name: &'static str, v: f64) -> Result<(), OracleError> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(OracleError::domain(name, v, "(0, inf)"))
    }
}

fn population(n: f64) -> Result<(), OracleError> {
    if n >= 2.0 {
        Ok(())
    } else {
        Err(OracleError::domain("n", n, "[2, inf)"))
    }
}

/// `beta (1 - eps) k ln n`.
pub fn pull_spread_lower(beta: f64, eps: f64, k: f64, n: f64) -> Result<f64, OracleError> {
    open_unit("beta", beta)?;
    positive("eps", eps)?;
    population(n)?;
    Ok(beta * (1.0 - eps) * k * n.ln())
}

/// Coefficients `(a, b)` of `T <= a k + b ln n` from the seeded state:
/// `a = ln(1 + e/eta) / ln(1 + eta/e)`, `b = (1 + c) / ln(1 + eta/e)`.
pub fn seeded_pull_coefficients(eta: f64, c: f64) -> Result<(f64, f64), OracleError> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(OracleError::domain("eta", eta, "(0, 1]"));
    }
    positive("c", c)?;
    let e = std::f64::consts::E;
    let denom = (eta / e).ln_1p();
    Ok(((e / eta).ln_1p() / denom, (1.0 + c) / denom))
}

pub fn seeded_pull_upper(eta: f64, c: f64, k: f64, n: f64) -> Result<f64, OracleError> {
    open_unit("eta", eta)?;
    population(n)?;
    let (a, b) = seeded_pull_coefficients(eta, c)?;
    Ok(a * k + b * n.ln())
}

/// `4e (1 + delta)(k ln k + (1 + c) k ln n)`.
pub fn pull_upper(delta: f64, c: f64, k: f64, n: f64) -> Result<f64, OracleError> {
    positive("delta", delta)?;
    positive("c", c)?;
    population(n)?;
    let e = std::f64::consts::E;
    Ok(4.0 * e * (1.0 + delta) * (k * k.ln() + (1.0 + c) * k * n.ln()))
}

/// `(1 + delta) log2 n` slots after release.
pub fn priority_push_window(delta: f64, n: f64) -> Result<f64, OracleError> {
    positive("delta", delta)?;
    population(n)?;
    Ok((1.0 + delta) * n.log2())
}

/// `1 - e^{-l} - delta` of the users.
pub fn priority_push_fraction(spacing: f64, delta: f64) -> Result<f64, OracleError> {
    if spacing.is_nan() || spacing < 1.0 {
        return Err(OracleError::domain("l", spacing, "[1, inf)"));
    }
    if delta.is_nan() || delta < 0.0 {
        return Err(OracleError::domain("delta", delta, "[0, inf)"));
    }
    Ok(1.0 - (-spacing).exp() - delta)
}

/// `9 k1 + 2 (1 + eps) log2 n`.
pub fn interleave_upper(k1: f64, eps: f64, n: f64) -> Result<f64, OracleError> {
    positive("eps", eps)?;
    population(n)?;
    Ok(9.0 * k1 + 2.0 * (1.0 + eps) * n.log2())
}

/// `n + C ln n` with a caller-chosen constant.
pub fn advocate_upper(n: f64, log_constant: f64) -> Result<f64, OracleError> {
    population(n)?;
    Ok(n + log_constant * n.ln())
}

/// Numeric bound for a theorem, in slots.
pub fn thm_bound(theorem: Theorem, p: &BoundParams) -> Result<f64, OracleError> {
    match theorem {
        Theorem::PullSpreadLower | Theorem::PushTailLower => {
            pull_spread_lower(p.beta, p.eps, p.k, p.n)
        }
        Theorem::PullFromSeeded => seeded_pull_upper(p.eta, p.c, p.k, p.n),
        Theorem::PullUpper => pull_upper(p.delta, p.c, p.k, p.n),
        Theorem::PriorityPushReach => priority_push_window(p.delta, p.n),
        Theorem::InterleaveUpper => interleave_upper(p.k, p.eps, p.n),
        Theorem::AdvocateAllToAll => advocate_upper(p.n, p.log_constant),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// An empirical statistic next to the bound it is judged against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub theorem: u8,
    pub params: BoundParams,
    pub bound: f64,
    pub direction: Direction,
    /// Worst observed value in the bound's direction.
    pub empirical: f64,
    pub samples: usize,
    pub satisfied: usize,
    /// Minimum fraction of samples that must satisfy the bound.
    pub required_fraction: f64,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl BoundReport {
    /// Builds a report from per-sample statistics.
    pub fn from_samples(
        theorem: Theorem,
        params: BoundParams,
        bound: f64,
        samples: &[f64],
        required_fraction: f64,
    ) -> Self {
        let direction = theorem.direction();
        let satisfied = samples
            .iter()
            .filter(|&&v| direction.holds(v, bound))
            .count();
        let empirical = match direction {
            Direction::AtMost => samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Direction::AtLeast => samples.iter().copied().fold(f64::INFINITY, f64::min),
        };
        let fraction = if samples.is_empty() {
            0.0
        } else {
            satisfied as f64 / samples.len() as f64
        };
        let verdict = if !samples.is_empty() && fraction >= required_fraction {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Self {
            theorem: theorem.number(),
            params,
            bound,
            direction,
            empirical,
            samples: samples.len(),
            satisfied,
            required_fraction,
            verdict,
            notes: Vec::new(),
        }
    }

    pub fn fraction(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.satisfied as f64 / self.samples as f64
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn fail_with(mut self, note: impl Into<String>) -> Self {
        self.verdict = Verdict::Fail;
        self.notes.push(note.into());
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}
