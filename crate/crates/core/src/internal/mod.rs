//! Internal layer: between two SYNC slots the network is a decentralized MDP
//! whose state is the occupancy. A policy is a sequence of decision rules
//! `sigma_0..=sigma_T`; its objective is
//! `sum_k (1 - sync_prob)^k (rho(eta_k, sigma_k) + sum_e eta_{k+1}(e) z(e))`.
//!
//! `mps_solve` runs forward trials that pick rules greedily against
//! per-slot sawtooth upper bounds and tightens those bounds on the way back.

mod exhaustive;
mod local;
mod parametric;
mod wcsp;

pub use exhaustive::exhaustive_backup;
pub use parametric::{parametric_backup, parametric_rule};
pub use wcsp::{build_wcsp, wcsp_backup};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounds::{BoundPointSet, DEFAULT_POINT_CAP};
use crate::centralized::corner_tables;
use crate::error::{Error, Result};
use crate::model::{DecisionRule, Model};
use crate::occupancy::{occupancy_reward, propagate_dense, update, Occupancy};

/// Which one-step maximization the planner uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackupKind {
    Exhaustive,
    Wcsp,
    Parametric,
}

impl fmt::Display for BackupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BackupKind::Exhaustive => "exhaustive",
            BackupKind::Wcsp => "wcsp",
            BackupKind::Parametric => "parametric",
        };
        f.write_str(s)
    }
}

impl FromStr for BackupKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(BackupKind::Exhaustive),
            "wcsp" => Ok(BackupKind::Wcsp),
            "parametric" => Ok(BackupKind::Parametric),
            other => Err(Error::InvalidConfig(format!("unknown backup kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Stop when `upper - lower <= gap_tol * |first upper bound|`.
    pub gap_tol: f64,
    pub max_trials: usize,
    /// Points of the per-node slope grid for parametric rules; 0 means the
    /// action-grid size.
    pub theta_levels: usize,
    pub point_cap: usize,
    /// Largest number of rules the exhaustive backup may enumerate.
    pub size_limit: f64,
    /// Branch-and-bound nodes the WCSP backup may expand per call.
    pub node_budget: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            gap_tol: 1e-3,
            max_trials: 200,
            theta_levels: 0,
            point_cap: DEFAULT_POINT_CAP,
            size_limit: 1e7,
            node_budget: 200_000,
        }
    }
}

/// Everything a one-step backup at slot `k` looks at.
#[derive(Clone, Copy)]
pub struct BackupContext<'a> {
    pub model: &'a Model,
    pub k: usize,
    pub z: &'a [f64],
    /// Bound set of slot `k + 1`.
    pub next: &'a BoundPointSet,
}

/// Outcome of a backup: the chosen rule, its objective `phi + sawtooth`, and
/// an upper bound on the best objective over the searched rule family.
#[derive(Debug, Clone, PartialEq)]
pub struct BackupResult {
    pub rule: DecisionRule,
    pub value: f64,
    pub bound: f64,
}

/// `phi_k(eta, sigma) = (1 - sync_prob)^k (rho(eta, sigma) + sum_e omega(eta, sigma)(e) z(e))`.
pub fn phi(model: &Model, eta: &Occupancy, rule: &DecisionRule, k: usize, z: &[f64]) -> f64 {
    let weight = model.slot_weight(k);
    if weight == 0.0 {
        return 0.0;
    }
    let next = update(model, eta, rule);
    weight * (occupancy_reward(model, eta, rule) + next.dot(z))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub upper: f64,
    pub lower: f64,
}

/// Non-stationary policy for one SYNC state with its exact evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySequence {
    pub initial_state: usize,
    /// `sigma_0..=sigma_T`.
    pub rules: Vec<DecisionRule>,
    /// `eta_0..=eta_{T+1}`.
    pub occupancies: Vec<Occupancy>,
    /// Objective including the continuation term `z`.
    pub value: f64,
    /// Expected reward of the window, `sum_k (1 - sync_prob)^k rho_k`.
    pub reward: f64,
    pub upper_bound: f64,
    pub lower_bound: f64,
    pub trials: usize,
    pub converged: bool,
    pub trace: Vec<TrialRecord>,
}

impl PolicySequence {
    pub fn gap(&self) -> f64 {
        self.upper_bound - self.lower_bound
    }

    /// Rule used at internal slot `k`; slots past the horizon reuse the last.
    pub fn rule_at(&self, k: usize) -> &DecisionRule {
        &self.rules[k.min(self.rules.len() - 1)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub reward: f64,
    pub occupancies: Vec<Occupancy>,
    /// `rho(eta_k, sigma_k)` per slot.
    pub slot_rewards: Vec<f64>,
}

/// Exact evaluation of a rule sequence from a SYNC at `initial_state`.
pub fn evaluate_sequence(model: &Model, initial_state: usize, rules: &[DecisionRule], z: &[f64]) -> Evaluation {
    let mut eta = Occupancy::delta(initial_state);
    let mut occupancies = Vec::with_capacity(rules.len() + 1);
    let mut slot_rewards = Vec::with_capacity(rules.len());
    let mut value = 0.0;
    let mut reward = 0.0;
    for (k, rule) in rules.iter().enumerate() {
        let rho = occupancy_reward(model, &eta, rule);
        let next = update(model, &eta, rule);
        let w = model.slot_weight(k);
        value += w * (rho + next.dot(z));
        reward += w * rho;
        slot_rewards.push(rho);
        occupancies.push(std::mem::replace(&mut eta, next));
    }
    occupancies.push(eta);
    Evaluation {
        value,
        reward,
        occupancies,
        slot_rewards,
    }
}

/// Runs the selected backup.
pub fn backup(ctx: &BackupContext<'_>, eta: &Occupancy, kind: BackupKind, opts: &SolverOptions) -> Result<BackupResult> {
    match kind {
        BackupKind::Exhaustive => exhaustive_backup(ctx, eta, opts.size_limit),
        BackupKind::Wcsp => wcsp_backup(ctx, eta, opts.node_budget),
        BackupKind::Parametric => Ok(parametric_backup(ctx, eta, opts.theta_levels)),
    }
}

/// Fresh bound sets for slots `0..=T+1` with corners from the finite-horizon
/// full-knowledge recursion under continuation `z`.
pub fn initial_bounds(model: &Model, z: &[f64], point_cap: usize) -> Vec<BoundPointSet> {
    corner_tables(model, Some(z))
        .into_iter()
        .map(|c| BoundPointSet::with_cap(c, point_cap))
        .collect()
}

/// Solves the internal problem for a SYNC at `initial_state` with
/// continuation values `z`. Reaching the trial cap is not an error; the best
/// sequence found is returned with `converged = false`.
pub fn mps_solve(
    model: &Model,
    initial_state: usize,
    z: &[f64],
    kind: BackupKind,
    opts: &SolverOptions,
) -> Result<PolicySequence> {
    let size = model.num_states();
    if z.len() != size {
        return Err(Error::DimensionMismatch {
            expected: size,
            actual: z.len(),
        });
    }
    if initial_state >= size {
        return Err(Error::InvalidConfig(format!(
            "initial state {initial_state} outside the {size}-state space"
        )));
    }
    let horizon = model.horizon();
    let mut sets = initial_bounds(model, z, opts.point_cap);
    let start = Occupancy::delta(initial_state);
    let mut upper = sets[0].sawtooth(&start);
    let mut first_upper: Option<f64> = None;
    let mut best: Option<(Vec<DecisionRule>, Evaluation)> = None;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut trials = 0;

    while trials < opts.max_trials.max(1) {
        trials += 1;
        // Forward: greedy rules against the current bounds.
        let mut rules = Vec::with_capacity(horizon + 1);
        let mut eta = start.clone();
        let mut dense = vec![0.0; size];
        for k in 0..=horizon {
            let ctx = BackupContext {
                model,
                k,
                z,
                next: &sets[k + 1],
            };
            let res = backup(&ctx, &eta, kind, opts)?;
            propagate_dense(model, &eta, &res.rule, &mut dense);
            eta = Occupancy::from_dense(&dense);
            rules.push(res.rule);
        }
        let eval = evaluate_sequence(model, initial_state, &rules, z);
        // Backward: re-run the backup against the updated successor set and
        // keep any strictly tighter bound.
        for k in (0..=horizon).rev() {
            let eta = &eval.occupancies[k];
            let (head, tail) = sets.split_at_mut(k + 1);
            let ctx = BackupContext {
                model,
                k,
                z,
                next: &tail[0],
            };
            let res = backup(&ctx, eta, kind, opts)?;
            let current = head[k].sawtooth(eta);
            if res.bound < current - 1e-12 {
                head[k].insert(eta.clone(), res.bound);
            }
        }
        if best.as_ref().map_or(true, |(_, b)| eval.value > b.value) {
            best = Some((rules, eval));
        }
        upper = upper.min(sets[0].sawtooth(&start));
        let lower = best.as_ref().unwrap().1.value;
        let first = *first_upper.get_or_insert(upper);
        trace.push(TrialRecord { trial: trials, upper, lower });
        let tol = (opts.gap_tol * first.abs()).max(1e-10);
        if upper - lower <= tol {
            converged = true;
            break;
        }
    }
    let (rules, eval) = best.expect("at least one trial");
    Ok(PolicySequence {
        initial_state,
        rules,
        occupancies: eval.occupancies,
        value: eval.value,
        reward: eval.reward,
        upper_bound: upper,
        lower_bound: eval.value,
        trials,
        converged,
        trace,
    })
}

/// Wraps a fixed rule sequence as an evaluated policy with a zero gap.
pub fn sequence_from_rules(model: &Model, initial_state: usize, rules: Vec<DecisionRule>, z: &[f64]) -> PolicySequence {
    let eval = evaluate_sequence(model, initial_state, &rules, z);
    PolicySequence {
        initial_state,
        rules,
        occupancies: eval.occupancies,
        value: eval.value,
        reward: eval.reward,
        upper_bound: eval.value,
        lower_bound: eval.value,
        trials: 0,
        converged: true,
        trace: Vec::new(),
    }
}
