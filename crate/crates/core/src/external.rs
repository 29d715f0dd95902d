//! External layer: an average-reward MDP whose states are the joint battery
//! levels seen at SYNC slots and whose actions are internal policies.
//! Solved by relative value iteration.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baseline::{orthogonal_rules, symmetric_rules};
use crate::centralized::{solve_centralized, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::internal::{mps_solve, sequence_from_rules, BackupKind, PolicySequence, SolverOptions};
use crate::model::{DecisionRule, Model};

/// Policy family driving the external iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Exhaustive,
    Wcsp,
    Parametric,
    Orthogonal,
    Symmetric,
    /// Full-knowledge upper bound.
    Centralized,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::Exhaustive,
        PolicyKind::Wcsp,
        PolicyKind::Parametric,
        PolicyKind::Orthogonal,
        PolicyKind::Symmetric,
        PolicyKind::Centralized,
    ];

    pub fn backup(self) -> Option<BackupKind> {
        match self {
            PolicyKind::Exhaustive => Some(BackupKind::Exhaustive),
            PolicyKind::Wcsp => Some(BackupKind::Wcsp),
            PolicyKind::Parametric => Some(BackupKind::Parametric),
            _ => None,
        }
    }
}

impl From<BackupKind> for PolicyKind {
    fn from(kind: BackupKind) -> Self {
        match kind {
            BackupKind::Exhaustive => PolicyKind::Exhaustive,
            BackupKind::Wcsp => PolicyKind::Wcsp,
            BackupKind::Parametric => PolicyKind::Parametric,
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PolicyKind::Exhaustive => "exhaustive",
            PolicyKind::Wcsp => "wcsp",
            PolicyKind::Parametric => "parametric",
            PolicyKind::Orthogonal => "orthogonal",
            PolicyKind::Symmetric => "symmetric",
            PolicyKind::Centralized => "centralized",
        };
        f.write_str(s)
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .iter()
            .copied()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown policy kind '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalOptions {
    /// Span tolerance; `None` means `1e-4` times the largest slot reward.
    pub tol: Option<f64>,
    pub max_iters: usize,
    pub solver: SolverOptions,
}

impl Default for ExternalOptions {
    fn default() -> Self {
        ExternalOptions {
            tol: None,
            max_iters: 50,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViaStep {
    pub iteration: usize,
    /// `Th(ref) - h(ref)`, the per-slot gain estimate.
    pub increment: f64,
    /// `span(Th - h)`.
    pub span: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub distribution: Vec<f64>,
    /// More than one closed class: the distribution depends on the start.
    pub degenerate: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalSolution {
    pub kind: PolicyKind,
    /// Relative values, zero at state 0.
    pub z: Vec<f64>,
    /// Per SYNC state policy; for the centralized kind these evaluate the
    /// stationary greedy full-knowledge policy.
    pub policies: Vec<PolicySequence>,
    /// `window_rewards[e]` is the window reward `R_0` from SYNC state `e`.
    pub window_rewards: Vec<f64>,
    pub p_ext: Vec<Vec<f64>>,
    pub ssp: SteadyState,
    /// Long-run reward per slot from the value iteration.
    pub gain: f64,
    /// `sum_e ssp(e) sync_prob R_0(e)`.
    pub gain_ssp: f64,
    pub trace: Vec<ViaStep>,
    /// `Th` of every iteration before normalization.
    pub iterates: Vec<Vec<f64>>,
    pub converged: bool,
}

/// Distribution of the next SYNC state: the geometric mixture of the
/// occupancies `eta_1..=eta_{T+1}`, with the tail mass beyond `T + 1` lumped
/// on `eta_{T+1}`, so energy spent in the last planned slot is charged.
pub fn external_kernel(model: &Model, seq: &PolicySequence) -> Vec<f64> {
    let beta = model.sync_prob();
    let last = seq.occupancies.len() - 1;
    let mut row = vec![0.0; model.num_states()];
    for k in 1..=last {
        let w = beta * (1.0 - beta).powi(k as i32 - 1);
        for &(s, p) in seq.occupancies[k].entries() {
            row[s] += w * p;
        }
    }
    let tail = (1.0 - beta).powi(last as i32);
    if tail > 0.0 {
        for &(s, p) in seq.occupancies[last].entries() {
            row[s] += tail * p;
        }
    }
    row
}

fn closed_class_count(p: &[Vec<f64>]) -> usize {
    let n = p.len();
    let reach: Vec<Vec<bool>> = (0..n)
        .map(|s| {
            let mut seen = vec![false; n];
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(u) = stack.pop() {
                for (v, &q) in p[u].iter().enumerate() {
                    if q > 0.0 && !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            seen
        })
        .collect();
    let recurrent: Vec<bool> = (0..n)
        .map(|s| (0..n).all(|t| !reach[s][t] || reach[t][s]))
        .collect();
    let mut assigned = vec![false; n];
    let mut classes = 0;
    for s in 0..n {
        if recurrent[s] && !assigned[s] {
            classes += 1;
            for t in 0..n {
                if reach[s][t] && reach[t][s] {
                    assigned[t] = true;
                }
            }
        }
    }
    classes
}

/// Stationary distribution by power iteration from the uniform distribution;
/// periodic chains fall back to the lazy chain `(I + P) / 2`, which has the
/// same stationary distributions.
pub fn steady_state(p: &[Vec<f64>]) -> SteadyState {
    let n = p.len();
    let degenerate = closed_class_count(p) > 1;
    let step = |pi: &[f64], lazy: bool| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (s, row) in p.iter().enumerate() {
            if pi[s] == 0.0 {
                continue;
            }
            for (t, &q) in row.iter().enumerate() {
                out[t] += pi[s] * q;
            }
        }
        if lazy {
            for (o, &x) in out.iter_mut().zip(pi) {
                *o = 0.5 * (*o + x);
            }
        }
        let total: f64 = out.iter().sum();
        out.iter_mut().for_each(|x| *x /= total);
        out
    };
    let mut iterations = 0;
    for lazy in [false, true] {
        let mut pi = vec![1.0 / n as f64; n];
        for _ in 0..200_000 {
            iterations += 1;
            let next = step(&pi, lazy);
            let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            pi = next;
            if diff < 1e-10 {
                return SteadyState {
                    distribution: pi,
                    degenerate,
                    iterations,
                };
            }
        }
    }
    SteadyState {
        distribution: vec![1.0 / n as f64; n],
        degenerate: true,
        iterations,
    }
}

fn fixed_policies(model: &Model, kind: PolicyKind) -> Result<Vec<PolicySequence>> {
    let zero = vec![0.0; model.num_states()];
    let orthogonal = if kind == PolicyKind::Orthogonal {
        Some(orthogonal_rules(model)?)
    } else {
        None
    };
    Ok((0..model.num_states())
        .map(|e| {
            let rules = match &orthogonal {
                Some(r) => r.clone(),
                None => symmetric_rules(model, e),
            };
            sequence_from_rules(model, e, rules, &zero)
        })
        .collect())
}

/// Evaluates the stationary greedy full-knowledge policy from every state.
/// Its rules are per-slot joint actions, so they are only meaningful with
/// knowledge of the joint state; the occupancies and rewards are exact.
fn centralized_policies(model: &Model, actions: &[Vec<usize>]) -> Vec<PolicySequence> {
    let size = model.num_states();
    let beta = model.sync_prob();
    (0..size)
        .map(|e| {
            let mut eta = vec![0.0; size];
            eta[e] = 1.0;
            let mut occupancies = vec![crate::occupancy::Occupancy::delta(e)];
            let mut reward = 0.0;
            for k in 0..=model.horizon() {
                let mut next = vec![0.0; size];
                let mut rho = 0.0;
                for s in 0..size {
                    if eta[s] == 0.0 {
                        continue;
                    }
                    rho += eta[s] * model.reward_indices(&actions[s]);
                    model.for_each_successor(s, &actions[s], |t, q| next[t] += eta[s] * q);
                }
                reward += (1.0 - beta).powi(k as i32) * rho;
                occupancies.push(crate::occupancy::Occupancy::from_dense(&next));
                eta = next;
            }
            PolicySequence {
                initial_state: e,
                rules: vec![DecisionRule::idle(model.config()); model.horizon() + 1],
                occupancies,
                value: reward,
                reward,
                upper_bound: reward,
                lower_bound: reward,
                trials: 0,
                converged: true,
                trace: Vec::new(),
            }
        })
        .collect()
}

/// Relative value iteration over SYNC states, starting from `h = 0` so the
/// first iterate is `sync_prob * R_0` of the pure internal layer. Hitting the
/// iteration cap returns the last estimate with `converged = false`.
pub fn via_iterate(model: &Model, kind: PolicyKind, opts: &ExternalOptions) -> Result<ExternalSolution> {
    let size = model.num_states();
    let beta = model.sync_prob();
    let tol = opts.tol.unwrap_or(1e-4 * model.max_reward());
    let mut h = vec![0.0; size];
    let mut trace = Vec::new();
    let mut iterates = Vec::new();
    let mut converged = false;
    let mut policies = match kind {
        PolicyKind::Orthogonal | PolicyKind::Symmetric => fixed_policies(model, kind)?,
        _ => Vec::new(),
    };
    let mut p_ext: Vec<Vec<f64>> = policies.iter().map(|s| external_kernel(model, s)).collect();
    let mut actions = None;

    for iteration in 1..=opts.max_iters.max(1) {
        let low = h.iter().cloned().fold(f64::INFINITY, f64::min);
        let shifted: Vec<f64> = h.iter().map(|v| v - low).collect();
        let th: Vec<f64> = match kind {
            PolicyKind::Centralized => {
                let table = solve_centralized(model, Some(&shifted), DEFAULT_TOL, DEFAULT_MAX_ITERS)?;
                actions = table.actions;
                table.values.iter().map(|v| beta * v + low).collect()
            }
            _ => {
                if let Some(backup) = kind.backup() {
                    // A state keeps its previous policy unless the new one
                    // scores strictly higher against the current h; the
                    // planner is inexact and near ties would otherwise cycle.
                    for e in 0..size {
                        let seq = mps_solve(model, e, &shifted, backup, &opts.solver)?;
                        let kernel = external_kernel(model, &seq);
                        let score = |r: f64, k: &[f64]| beta * r + k.iter().zip(&h).map(|(p, v)| p * v).sum::<f64>();
                        if policies.len() <= e {
                            policies.push(seq);
                            p_ext.push(kernel);
                        } else if score(seq.reward, &kernel) > score(policies[e].reward, &p_ext[e]) {
                            policies[e] = seq;
                            p_ext[e] = kernel;
                        }
                    }
                }
                (0..size)
                    .map(|e| {
                        let future: f64 = p_ext[e].iter().zip(&h).map(|(p, v)| p * v).sum();
                        beta * policies[e].reward + future
                    })
                    .collect()
            }
        };
        let diffs: Vec<f64> = th.iter().zip(&h).map(|(a, b)| a - b).collect();
        let span = diffs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - diffs.iter().cloned().fold(f64::INFINITY, f64::min);
        let increment = th[0] - h[0];
        trace.push(ViaStep {
            iteration,
            increment,
            span,
        });
        h = th.iter().map(|v| v - th[0]).collect();
        iterates.push(th);
        if span < tol {
            converged = true;
            break;
        }
    }

    if kind == PolicyKind::Centralized {
        let actions = actions.expect("centralized iteration ran");
        policies = centralized_policies(model, &actions);
        p_ext = policies.iter().map(|s| external_kernel(model, s)).collect();
    }
    let window_rewards: Vec<f64> = policies.iter().map(|s| s.reward).collect();
    let ssp = steady_state(&p_ext);
    let gain_ssp = ssp
        .distribution
        .iter()
        .zip(&window_rewards)
        .map(|(p, r)| p * beta * r)
        .sum();
    Ok(ExternalSolution {
        kind,
        z: h,
        policies,
        window_rewards,
        p_ext,
        ssp,
        gain: trace.last().map_or(0.0, |s| s.increment),
        gain_ssp,
        trace,
        iterates,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_kernel_is_degenerate() {
        let p = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let ss = steady_state(&p);
        assert!(ss.degenerate);
        assert!((ss.distribution[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn doubly_stochastic_is_uniform() {
        let p = vec![vec![0.3, 0.7], vec![0.7, 0.3]];
        let ss = steady_state(&p);
        assert!(!ss.degenerate);
        assert!((ss.distribution[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn periodic_chain_uses_lazy_fallback() {
        let p = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let ss = steady_state(&p);
        assert!(!ss.degenerate);
        assert!((ss.distribution[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in PolicyKind::ALL {
            assert_eq!(kind.to_string().parse::<PolicyKind>().unwrap(), kind);
        }
        assert!("tdma".parse::<PolicyKind>().is_err());
    }
}
