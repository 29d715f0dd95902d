//! Occupancy states: distributions over joint battery levels given the SYNC
//! state and the rules applied since.

use crate::model::{DecisionRule, Model};

/// Entries below this mass are dropped after an update.
pub const DROP_THRESHOLD: f64 = 1e-12;
/// Two occupancies closer than this in sup-norm are treated as equal.
pub const CLOSE_TOL: f64 = 1e-9;

/// Sparse distribution over state indices, sorted by index.
#[derive(Debug, Clone, PartialEq)]
pub struct Occupancy {
    entries: Vec<(usize, f64)>,
}

impl Occupancy {
    pub fn delta(state: usize) -> Self {
        Occupancy {
            entries: vec![(state, 1.0)],
        }
    }

    /// Builds from arbitrary nonnegative masses; merges duplicates, drops tiny
    /// entries and renormalizes.
    pub fn from_entries(mut entries: Vec<(usize, f64)>) -> Self {
        entries.sort_by_key(|&(s, _)| s);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (s, p) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == s => last.1 += p,
                _ => merged.push((s, p)),
            }
        }
        Self::normalized(merged)
    }

    /// Builds from a dense mass vector.
    pub fn from_dense(dense: &[f64]) -> Self {
        let entries = dense
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(s, &p)| (s, p))
            .collect();
        Self::normalized(entries)
    }

    fn normalized(entries: Vec<(usize, f64)>) -> Self {
        let mut entries: Vec<(usize, f64)> =
            entries.into_iter().filter(|&(_, p)| p > DROP_THRESHOLD).collect();
        let total: f64 = entries.iter().map(|&(_, p)| p).sum();
        if total > 0.0 {
            for e in entries.iter_mut() {
                e.1 /= total;
            }
        }
        Occupancy { entries }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, state: usize) -> f64 {
        match self.entries.binary_search_by_key(&state, |&(s, _)| s) {
            Ok(i) => self.entries[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|&(_, p)| p).sum()
    }

    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for &(s, p) in &self.entries {
            out[s] = p;
        }
        out
    }

    /// `sum_e eta(e) f(e)`.
    pub fn dot(&self, values: &[f64]) -> f64 {
        self.entries.iter().map(|&(s, p)| p * values[s]).sum()
    }

    pub fn distance(&self, other: &Occupancy) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j) = (0, 0);
        let mut worst: f64 = 0.0;
        while i < a.len() || j < b.len() {
            let sa = a.get(i).map_or(usize::MAX, |e| e.0);
            let sb = b.get(j).map_or(usize::MAX, |e| e.0);
            if sa == sb {
                worst = worst.max((a[i].1 - b[j].1).abs());
                i += 1;
                j += 1;
            } else if sa < sb {
                worst = worst.max(a[i].1);
                i += 1;
            } else {
                worst = worst.max(b[j].1);
                j += 1;
            }
        }
        worst
    }

    pub fn is_close(&self, other: &Occupancy) -> bool {
        self.distance(other) <= CLOSE_TOL
    }

    /// Mean level of `node`.
    pub fn mean_level(&self, model: &Model, node: usize) -> f64 {
        self.entries
            .iter()
            .map(|&(s, p)| p * model.level(s, node) as f64)
            .sum()
    }

    /// Occupancy-weighted transmit probability of `node` under `rule`.
    pub fn mean_action(&self, model: &Model, rule: &DecisionRule, node: usize) -> f64 {
        let grid = model.grid();
        self.entries
            .iter()
            .map(|&(s, p)| p * grid[rule.index_at(node, model.level(s, node))])
            .sum()
    }
}

/// Unnormalized one-step propagation into a dense buffer; `out` is cleared.
pub fn propagate_dense(model: &Model, eta: &Occupancy, rule: &DecisionRule, out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    let mut actions = vec![0; model.num_nodes()];
    for &(s, p) in eta.entries() {
        model.rule_actions(rule, s, &mut actions);
        model.for_each_successor(s, &actions, |t, q| out[t] += p * q);
    }
}

/// Occupancy update `omega(eta, sigma)`.
pub fn update(model: &Model, eta: &Occupancy, rule: &DecisionRule) -> Occupancy {
    let mut dense = vec![0.0; model.num_states()];
    propagate_dense(model, eta, rule, &mut dense);
    Occupancy::from_dense(&dense)
}

/// Occupancy reward `rho(eta, sigma) = sum_e eta(e) r(sigma(e))`.
pub fn occupancy_reward(model: &Model, eta: &Occupancy, rule: &DecisionRule) -> f64 {
    let mut actions = vec![0; model.num_nodes()];
    eta.entries()
        .iter()
        .map(|&(s, p)| {
            model.rule_actions(rule, s, &mut actions);
            p * model.reward_indices(&actions)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GlobalState, NetworkConfig, NodeParams};

    fn model(pb: f64) -> Model {
        let nodes = vec![NodeParams::new(8, 2, pb, 6.0), NodeParams::new(8, 2, pb, 3.0)];
        Model::new(NetworkConfig::new(nodes, 3, 0.05, 1e-3).unwrap()).unwrap()
    }

    #[test]
    fn frozen_dynamics_keep_occupancy() {
        let m = model(0.0);
        let rule = DecisionRule::idle(m.config());
        let eta = Occupancy::from_entries(vec![(3, 0.25), (40, 0.75)]);
        let next = update(&m, &eta, &rule);
        assert!(next.is_close(&eta));
    }

    #[test]
    fn delta_update_is_kernel_row() {
        let m = model(0.1);
        let mut rule = DecisionRule::idle(m.config());
        rule.set(0, 4, 1);
        let s = m.space().index(&[4, 4]).unwrap();
        let next = update(&m, &Occupancy::delta(s), &rule);
        let row = m.joint_transition(&GlobalState::new(vec![4, 4]), &rule).unwrap();
        assert_eq!(next.entries().len(), row.len());
        for (a, b) in next.entries().iter().zip(&row) {
            assert_eq!(a.0, b.0);
            assert!((a.1 - b.1).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_reward_is_rule_reward() {
        let m = model(0.1);
        let mut rule = DecisionRule::idle(m.config());
        rule.set(0, 4, 2);
        let s = m.space().index(&[4, 4]).unwrap();
        let rho = occupancy_reward(&m, &Occupancy::delta(s), &rule);
        assert_eq!(rho, m.rule_reward(&rule, s));
    }

    #[test]
    fn uniform_pair_reward_is_mean() {
        let m = model(0.1);
        let mut rule = DecisionRule::idle(m.config());
        rule.set(0, 4, 2);
        rule.set(1, 5, 1);
        let s1 = m.space().index(&[4, 0]).unwrap();
        let s2 = m.space().index(&[2, 5]).unwrap();
        let eta = Occupancy::from_entries(vec![(s1, 0.5), (s2, 0.5)]);
        let expected = 0.5 * (m.rule_reward(&rule, s1) + m.rule_reward(&rule, s2));
        assert!((occupancy_reward(&m, &eta, &rule) - expected).abs() < 1e-15);
    }

    #[test]
    fn drop_threshold_renormalizes() {
        let eta = Occupancy::from_entries(vec![(0, 1e-14), (1, 0.5), (2, 0.5)]);
        assert_eq!(eta.support_len(), 2);
        assert!((eta.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn distance_handles_disjoint_supports() {
        let a = Occupancy::delta(0);
        let b = Occupancy::delta(1);
        assert_eq!(a.distance(&b), 1.0);
        assert_eq!(a.distance(&a), 0.0);
    }
}
