use crate::model::{DecisionRule, Model};
use crate::occupancy::Occupancy;

use super::local::LocalProblem;
use super::{BackupContext, BackupResult};

/// Linear rule `sigma^i(e) = round(theta^i e)` on the action grid, idle
/// below the transmission cost, with `theta^i = j_i / ((s_theta - 1) e_max^i)`
/// so that `theta^i e_max^i` is `j_i / (s_theta - 1)`.
pub fn parametric_rule(model: &Model, slopes: &[usize], s_theta: usize) -> DecisionRule {
    let top = (model.action_levels() - 1) as f64;
    let mut rule = DecisionRule::idle(model.config());
    for (i, &j) in slopes.iter().enumerate() {
        let node = model.node(i);
        let theta = j as f64 / ((s_theta - 1) as f64 * node.capacity as f64);
        for level in node.tx_cost..=node.capacity {
            let a = (theta * level as f64).min(1.0);
            rule.set(i, level, (a * top).round() as usize);
        }
    }
    rule
}

/// Scans all slope tuples and keeps the best linear rule. The returned bound
/// equals the value: it bounds the optimum over this rule family only.
pub fn parametric_backup(ctx: &BackupContext<'_>, eta: &Occupancy, theta_levels: usize) -> BackupResult {
    let model = ctx.model;
    let s_theta = if theta_levels >= 2 {
        theta_levels
    } else {
        model.action_levels()
    };
    let local = LocalProblem::new(*ctx, eta);
    let n = model.num_nodes();
    let mut dense = local.scratch();
    let mut x = vec![0usize; local.num_vars()];
    let mut slopes = vec![0usize; n];
    let mut best_value = f64::NEG_INFINITY;
    let mut best_slopes = slopes.clone();
    loop {
        let rule = parametric_rule(model, &slopes, s_theta);
        for (v, var) in local.vars.iter().enumerate() {
            x[v] = rule.index_at(var.node, var.level);
        }
        let value = local.objective(&x, &mut dense);
        if value > best_value {
            best_value = value;
            best_slopes.copy_from_slice(&slopes);
        }
        let mut i = n;
        let done = loop {
            if i == 0 {
                break true;
            }
            i -= 1;
            slopes[i] += 1;
            if slopes[i] < s_theta {
                break false;
            }
            slopes[i] = 0;
        };
        if done {
            break;
        }
    }
    BackupResult {
        rule: parametric_rule(model, &best_slopes, s_theta),
        value: best_value,
        bound: best_value,
    }
}
