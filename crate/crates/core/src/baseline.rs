//! Reference policies: time-orthogonal slot assignment and a symmetric
//! random-access rule shared by all nodes.

use crate::error::{Error, Result};
use crate::model::{DecisionRule, Model};
use crate::occupancy::{occupancy_reward, update, Occupancy};

/// Node 0 owns even internal slots and node 1 odd ones; the owner transmits
/// with probability one whenever it has enough energy.
pub fn orthogonal_rules(model: &Model) -> Result<Vec<DecisionRule>> {
    if model.num_nodes() != 2 {
        return Err(Error::OrthogonalUnsupported(model.num_nodes()));
    }
    let top = model.action_levels() - 1;
    Ok((0..=model.horizon())
        .map(|k| {
            let owner = k % 2;
            let mut rule = DecisionRule::idle(model.config());
            let node = model.node(owner);
            for level in node.tx_cost..=node.capacity {
                rule.set(owner, level, top);
            }
            rule
        })
        .collect())
}

/// Rule where every node uses action-grid index `j` at every level it can
/// transmit from.
pub fn uniform_rule(model: &Model, j: usize) -> DecisionRule {
    let mut rule = DecisionRule::idle(model.config());
    for i in 0..model.num_nodes() {
        let node = model.node(i);
        for level in node.tx_cost..=node.capacity {
            rule.set(i, level, j);
        }
    }
    rule
}

/// Per slot, the common constant probability that maximizes the expected
/// reward of that slot under the current occupancy (myopic; ties go to the
/// smaller probability).
pub fn symmetric_rules(model: &Model, initial_state: usize) -> Vec<DecisionRule> {
    let mut eta = Occupancy::delta(initial_state);
    let mut rules = Vec::with_capacity(model.horizon() + 1);
    for _ in 0..=model.horizon() {
        let mut best = (f64::NEG_INFINITY, 0);
        for j in 0..model.action_levels() {
            let r = occupancy_reward(model, &eta, &uniform_rule(model, j));
            if r > best.0 {
                best = (r, j);
            }
        }
        let rule = uniform_rule(model, best.1);
        eta = update(model, &eta, &rule);
        rules.push(rule);
    }
    rules
}
