//! Checks recorded runs against the analytic completion-time bounds.

use gossip_core::oracle::{priority_push_fraction, thm_bound, BoundParams, BoundReport, Theorem};
use gossip_core::{Constraint, ContactModel, InitialState, ProtocolSpec};

use crate::record::{sparse_threshold, RunRecord};
use crate::{HarnessError, Result};

/// Caller overrides of the bound parameters; unset fields keep the
/// defaults of [`BoundParams::new`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyOptions {
    pub beta: Option<f64>,
    pub c: Option<f64>,
    pub delta: Option<f64>,
    pub eps: Option<f64>,
    /// Constant in front of `ln n` for the all-to-all bound. When unset it
    /// is fitted as the smallest constant covering every run.
    pub log_constant: Option<f64>,
    /// Overrides the fraction of samples that must satisfy the bound.
    pub required_fraction: Option<f64>,
}

impl VerifyOptions {
    /// Applies `name=value`.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let slot = match name {
            "beta" => &mut self.beta,
            "c" => &mut self.c,
            "delta" => &mut self.delta,
            "eps" | "epsilon" => &mut self.eps,
            "log_constant" | "C" => &mut self.log_constant,
            "required_fraction" => &mut self.required_fraction,
            other => {
                return Err(HarnessError::Refused(format!(
                    "unknown parameter `{other}`; expected beta, c, delta, eps, log_constant or required_fraction"
                )))
            }
        };
        *slot = Some(value);
        Ok(())
    }
}

/// Per-piece fraction needed by default when checking priority-push reach.
pub const DEFAULT_REACH_FRACTION: f64 = 0.9;

fn refuse(message: impl Into<String>) -> HarnessError {
    HarnessError::Refused(message.into())
}

/// Checks that every run shares the parameters the bound depends on.
fn common_shape(records: &[RunRecord]) -> Result<&RunRecord> {
    let first = records.first().ok_or_else(|| refuse("no runs to verify"))?;
    let c = &first.config;
    for r in records {
        let o = &r.config;
        if (o.n, o.k) != (c.n, c.k)
            || o.protocol != c.protocol
            || o.constraint != c.constraint
            || o.initial_state != c.initial_state
            || o.contact_model != c.contact_model
        {
            return Err(refuse(format!(
                "runs mix configurations ({} n={} k={} vs {} n={} k={}); verify one cell at a time",
                c.protocol, c.n, c.k, o.protocol, o.n, o.k
            )));
        }
    }
    Ok(first)
}

/// Refuses when the runs are not the setting the theorem speaks about.
fn check_applicable(theorem: Theorem, record: &RunRecord) -> Result<()> {
    let cfg = &record.config;
    let protocol = cfg.protocol;
    let single = cfg.initial_state == InitialState::SingleSource;
    let need = |ok: bool, what: &str| -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(refuse(format!(
                "theorem {} is about {what}; these runs use {} from {:?} under {:?} constraints",
                theorem.number(),
                protocol,
                cfg.initial_state,
                cfg.constraint
            )))
        }
    };
    match theorem {
        Theorem::PullSpreadLower | Theorem::PullUpper => need(
            protocol.is_pull_only() && single,
            "pull-only protocols started from a single source",
        ),
        Theorem::PullFromSeeded => need(
            protocol.is_pull_only() && matches!(cfg.initial_state, InitialState::EtaSeeded { .. }),
            "pull-only protocols started from an eta-seeded state",
        ),
        Theorem::PushTailLower => need(
            protocol.is_push_only() && single,
            "push-only protocols started from a single source",
        ),
        Theorem::PriorityPushReach => need(
            matches!(protocol, ProtocolSpec::PriorityPush { .. })
                && cfg.contact_model == ContactModel::Uniform,
            "priority-push with a full view",
        ),
        Theorem::InterleaveUpper => need(protocol == ProtocolSpec::Interleave, "interleave"),
        Theorem::AdvocateAllToAll => need(
            protocol == ProtocolSpec::Advocate
                && cfg.constraint == Constraint::Soft
                && cfg.initial_state == InitialState::OneUniquePerUser,
            "advocate under soft constraints from one unique piece per user",
        ),
    }
}

fn completion_or_inf(r: &RunRecord) -> f64 {
    r.completion_slot.map_or(f64::INFINITY, |t| t as f64)
}

fn slot_or_inf(s: Option<u64>) -> f64 {
    s.map_or(f64::INFINITY, |t| t as f64)
}

/// Slot at which at least `ceil(beta k)` pieces each have `n / ln n`
/// holders.
fn spread_time(r: &RunRecord, beta: f64) -> f64 {
    let need = (beta * r.config.k as f64).ceil().max(1.0) as usize;
    let mut times: Vec<f64> = r
        .pieces
        .iter()
        .map(|p| slot_or_inf(p.reach_sparse))
        .collect();
    times.sort_by(f64::total_cmp);
    times[need - 1]
}

/// Completion time measured from the last slot at which at least
/// `ceil(beta k)` pieces were each missing from `n / ln n` or more users.
fn push_tail_time(r: &RunRecord, beta: f64) -> f64 {
    let need = (beta * r.config.k as f64).ceil().max(1.0) as usize;
    let mut leave: Vec<f64> = r
        .pieces
        .iter()
        .map(|p| slot_or_inf(p.reach_near_all))
        .collect();
    leave.sort_by(|a, b| b.total_cmp(a));
    let start = leave[need - 1] - 1.0;
    completion_or_inf(r) - start
}

/// Runs the check for one theorem over runs that share a configuration.
pub fn verify(
    records: &[RunRecord],
    theorem: Theorem,
    opts: &VerifyOptions,
) -> Result<BoundReport> {
    let first = common_shape(records)?;
    check_applicable(theorem, first)?;
    let cfg = &first.config;
    let mut params = BoundParams::new(cfg.n, cfg.k);
    if let Some(v) = opts.beta {
        params.beta = v;
    }
    if let Some(v) = opts.c {
        params.c = v;
    }
    if let Some(v) = opts.delta {
        params.delta = v;
    }
    if let Some(v) = opts.eps {
        params.eps = v;
    }
    if let InitialState::EtaSeeded { eta } = cfg.initial_state {
        params.eta = eta;
    }
    if let ProtocolSpec::PriorityPush { spacing } = cfg.protocol {
        params.spacing = spacing as f64;
    }
    let n = cfg.n as f64;
    let whp = 1.0 - n.powf(-params.c);

    let mut notes = Vec::new();
    let (samples, default_fraction): (Vec<f64>, f64) = match theorem {
        Theorem::PullSpreadLower => {
            notes.push(format!(
                "statistic: slot when ceil(beta k) pieces each reach {} holders",
                sparse_threshold(cfg.n)
            ));
            (
                records
                    .iter()
                    .map(|r| spread_time(r, params.beta))
                    .collect(),
                whp,
            )
        }
        Theorem::PullFromSeeded => (records.iter().map(completion_or_inf).collect(), whp),
        Theorem::PullUpper => (
            records.iter().map(completion_or_inf).collect(),
            1.0 - 2.0 * n.powf(-params.c),
        ),
        Theorem::PushTailLower => {
            notes.push(
                "statistic: completion minus the last slot with ceil(beta k) pieces each missing from ceil(n / ln n) users"
                    .into(),
            );
            (
                records
                    .iter()
                    .map(|r| push_tail_time(r, params.beta))
                    .collect(),
                whp,
            )
        }
        Theorem::PriorityPushReach => {
            let fraction = priority_push_fraction(params.spacing, params.delta)?;
            let threshold = (fraction * n).ceil().max(1.0) as usize;
            let window = thm_bound(theorem, &params)?;
            let recorded = first
                .pieces
                .iter()
                .filter_map(|p| p.occupancy_after_release.as_ref())
                .map(|o| o.len() as f64 - 1.0)
                .fold(f64::INFINITY, f64::min);
            if recorded.is_finite() && recorded < window.ceil() {
                return Err(refuse(format!(
                    "records cover {recorded} slots after release; the window needs {:.1}",
                    window
                )));
            }
            notes.push(format!(
                "statistic: per-piece slots from release to {threshold} holders ({:.3} of n)",
                fraction
            ));
            let samples = records
                .iter()
                .flat_map(|r| r.pieces.iter())
                .map(|p| slot_or_inf(p.reach_after_release(threshold)))
                .collect();
            (samples, DEFAULT_REACH_FRACTION)
        }
        Theorem::InterleaveUpper => (records.iter().map(completion_or_inf).collect(), 1.0),
        Theorem::AdvocateAllToAll => {
            let samples: Vec<f64> = records.iter().map(completion_or_inf).collect();
            match opts.log_constant {
                Some(c) => params.log_constant = c,
                None => {
                    let worst = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    params.log_constant = ((worst - n) / n.ln()).max(0.0);
                    notes.push(format!(
                        "log constant fitted to the runs: C = {:.4}",
                        params.log_constant
                    ));
                }
            }
            (samples, 1.0)
        }
    };

    let bound = thm_bound(theorem, &params)?;
    let required = opts.required_fraction.unwrap_or(default_fraction);
    let mut report = BoundReport::from_samples(theorem, params, bound, &samples, required);
    for note in notes {
        report = report.note(note);
    }
    if theorem == Theorem::AdvocateAllToAll {
        let short = records
            .iter()
            .filter(|r| r.completion_slot.is_some_and(|t| (t as f64) < n - 1.0))
            .count();
        if short > 0 {
            report = report.fail_with(format!("{short} runs finished before slot n - 1"));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::simulate;
    use gossip_core::SimulationConfig;

    fn records(cfg: SimulationConfig, seeds: u64) -> Vec<RunRecord> {
        (0..seeds)
            .map(|s| simulate(&cfg.clone().with_seed(s)).unwrap().0)
            .collect()
    }

    #[test]
    fn refuses_advocate_bound_on_pull_runs() {
        let runs = records(SimulationConfig::new(32, 4, ProtocolSpec::RandomPull), 2);
        let err = verify(&runs, Theorem::AdvocateAllToAll, &VerifyOptions::default()).unwrap_err();
        assert!(matches!(err, HarnessError::Refused(_)));
        assert!(err.to_string().contains("advocate"));
    }

    #[test]
    fn refuses_mixed_runs() {
        let mut runs = records(SimulationConfig::new(32, 4, ProtocolSpec::RandomPull), 1);
        runs.extend(records(
            SimulationConfig::new(64, 4, ProtocolSpec::RandomPull),
            1,
        ));
        assert!(verify(&runs, Theorem::PullUpper, &VerifyOptions::default()).is_err());
    }

    #[test]
    fn interleave_runs_meet_their_bound() {
        let runs = records(SimulationConfig::new(64, 20, ProtocolSpec::Interleave), 4);
        let report = verify(&runs, Theorem::InterleaveUpper, &VerifyOptions::default()).unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.samples, 4);
        assert!((report.bound - (180.0 + 2.2 * 6.0)).abs() < 1e-9);
    }

    #[test]
    fn one_violation_fails_a_per_run_bound() {
        let mut runs = records(SimulationConfig::new(64, 20, ProtocolSpec::Interleave), 3);
        runs[1].completion_slot = Some(10_000);
        let report = verify(&runs, Theorem::InterleaveUpper, &VerifyOptions::default()).unwrap();
        assert!(!report.passed());
        assert_eq!(report.satisfied, 2);
    }

    #[test]
    fn advocate_constant_is_fitted() {
        let cfg = SimulationConfig::new(32, 32, ProtocolSpec::Advocate)
            .with_constraint(Constraint::Soft)
            .with_initial_state(InitialState::OneUniquePerUser);
        let runs = records(cfg, 5);
        let report = verify(&runs, Theorem::AdvocateAllToAll, &VerifyOptions::default()).unwrap();
        assert!(report.passed(), "{report:?}");
        assert!(report.notes.iter().any(|n| n.contains("fitted")));
    }

    #[test]
    fn spread_and_tail_statistics() {
        let runs = records(SimulationConfig::new(64, 8, ProtocolSpec::RandomPull), 1);
        let r = &runs[0];
        let t = spread_time(r, 0.5);
        let reached = r
            .pieces
            .iter()
            .filter(|p| p.reach_sparse.is_some_and(|s| s as f64 <= t))
            .count();
        assert!(reached >= 4);

        let push = records(SimulationConfig::new(64, 8, ProtocolSpec::RandomPush), 1);
        let tail = push_tail_time(&push[0], 0.5);
        assert!(tail >= 1.0 && tail <= push[0].completion_slot.unwrap() as f64);
    }
}
