//! Full-knowledge solver: the access point sees the joint state in every
//! slot and picks a joint action. Its values bound every decentralized
//! policy from above.

use crate::error::{Error, Result};
use crate::model::Model;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: usize = 10_000;

/// Values indexed by state, with the greedy joint action per state when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    pub values: Vec<f64>,
    pub actions: Option<Vec<Vec<usize>>>,
}

impl ValueTable {
    pub fn zeros(len: usize) -> Self {
        ValueTable {
            values: vec![0.0; len],
            actions: None,
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

struct Choice {
    action: Vec<usize>,
    reward: f64,
    successors: Vec<(usize, f64)>,
}

/// Every feasible joint action of every state, with reward and successors.
struct JointKernel {
    choices: Vec<Vec<Choice>>,
}

impl JointKernel {
    fn new(model: &Model) -> Self {
        let n = model.num_nodes();
        let levels = model.action_levels();
        let mut choices = Vec::with_capacity(model.num_states());
        for s in 0..model.num_states() {
            let limits: Vec<usize> = (0..n)
                .map(|i| if model.can_transmit(i, model.level(s, i)) { levels } else { 1 })
                .collect();
            let mut per_state = Vec::new();
            let mut action = vec![0usize; n];
            loop {
                let mut successors = Vec::new();
                model.for_each_successor(s, &action, |t, p| successors.push((t, p)));
                per_state.push(Choice {
                    action: action.clone(),
                    reward: model.reward_indices(&action),
                    successors,
                });
                // Lexicographic increment, last node fastest.
                let mut i = n;
                let done = loop {
                    if i == 0 {
                        break true;
                    }
                    i -= 1;
                    action[i] += 1;
                    if action[i] < limits[i] {
                        break false;
                    }
                    action[i] = 0;
                };
                if done {
                    break;
                }
            }
            choices.push(per_state);
        }
        JointKernel { choices }
    }

    /// One Bellman sweep: `max_a r(a) + sum p (z + discount * next)`.
    fn sweep(&self, z: &[f64], discount: f64, next: &[f64], out: &mut [f64], greedy: Option<&mut Vec<Vec<usize>>>) {
        let mut greedy = greedy;
        for (s, per_state) in self.choices.iter().enumerate() {
            let mut best = f64::NEG_INFINITY;
            let mut best_idx = 0;
            for (c, choice) in per_state.iter().enumerate() {
                let mut q = choice.reward;
                for &(t, p) in &choice.successors {
                    q += p * (z[t] + discount * next[t]);
                }
                if q > best {
                    best = q;
                    best_idx = c;
                }
            }
            out[s] = best;
            if let Some(g) = greedy.as_deref_mut() {
                g[s] = per_state[best_idx].action.clone();
            }
        }
    }
}

/// Discounted full-knowledge values
/// `V(e) = max_a { r(a) + sum_e' p(e'|e,a) [z(e') + (1 - sync_prob) V(e')] }`
/// by value iteration to sup-norm `tol`.
pub fn solve_centralized(model: &Model, z: Option<&[f64]>, tol: f64, max_iters: usize) -> Result<ValueTable> {
    let size = model.num_states();
    let zeros = vec![0.0; size];
    let z = z.unwrap_or(&zeros);
    if z.len() != size {
        return Err(Error::DimensionMismatch {
            expected: size,
            actual: z.len(),
        });
    }
    let kernel = JointKernel::new(model);
    let discount = 1.0 - model.sync_prob();
    let mut values = vec![0.0; size];
    let mut next = vec![0.0; size];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        kernel.sweep(z, discount, &values, &mut next, None);
        residual = values
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut values, &mut next);
        if residual < tol {
            let mut actions = vec![Vec::new(); size];
            kernel.sweep(z, discount, &values.clone(), &mut next, Some(&mut actions));
            return Ok(ValueTable {
                values,
                actions: Some(actions),
            });
        }
    }
    Err(Error::NotConverged {
        what: "centralized value iteration",
        iterations: max_iters,
        residual,
    })
}

/// Finite-horizon full-knowledge values `U_0..=U_{T+1}` with `U_{T+1} = 0`
/// and `U_k = max_a { r + sum p [z + (1 - sync_prob) U_{k+1}] }`.
pub fn finite_horizon_values(model: &Model, z: Option<&[f64]>) -> Vec<Vec<f64>> {
    let size = model.num_states();
    let zeros = vec![0.0; size];
    let z = z.unwrap_or(&zeros);
    let kernel = JointKernel::new(model);
    let discount = 1.0 - model.sync_prob();
    let horizon = model.horizon();
    let mut tables = vec![vec![0.0; size]; horizon + 2];
    for k in (0..=horizon).rev() {
        let (head, tail) = tables.split_at_mut(k + 1);
        kernel.sweep(z, discount, &tail[0], &mut head[k], None);
    }
    tables
}

/// Corner values of the per-slot bound sets: `(1 - sync_prob)^k U_k`.
pub fn corner_tables(model: &Model, z: Option<&[f64]>) -> Vec<Vec<f64>> {
    let mut tables = finite_horizon_values(model, z);
    for (k, table) in tables.iter_mut().enumerate() {
        let w = model.slot_weight(k);
        table.iter_mut().for_each(|v| *v *= w);
    }
    tables
}
