use crate::error::{Error, Result};
use crate::occupancy::Occupancy;
use crate::wcsp::{CostFunction, PreparedWcsp, WcspInstance};

use super::local::LocalProblem;
use super::parametric::parametric_backup;
use super::{BackupContext, BackupResult};

/// Offset making every cost `M - eta(e) w(e, a, e'')` nonnegative.
fn big_m(local: &LocalProblem<'_>, points: &[usize]) -> f64 {
    let ctx = &local.ctx;
    let max_z = ctx.z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let max_corner = ctx.next.corners().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut correction = 0.0f64;
    for &l in points {
        let p = &ctx.next.points()[l];
        let min_support = p
            .occupancy
            .entries()
            .iter()
            .fold(f64::INFINITY, |m, &(_, q)| m.min(q));
        correction = correction.max(p.gap() / min_support);
    }
    10.0 * ctx.model.num_states() as f64 * (ctx.model.max_reward() + max_z + max_corner + correction)
}

/// Branching order: all variables of the node with the fewest variables
/// first, so that once they are fixed the remaining functions decouple per
/// variable and the projection bound is exact. Within a node, variables
/// touching more occupancy mass go first.
fn impact_order(local: &LocalProblem<'_>) -> Vec<usize> {
    let mut impact = vec![0.0; local.num_vars()];
    for (e, scope) in local.scopes.iter().enumerate() {
        for &v in scope {
            impact[v] += local.masses[e];
        }
    }
    let n = local.ctx.model.num_nodes();
    let mut count = vec![0usize; n];
    for var in &local.vars {
        count[var.node] += 1;
    }
    let mut order: Vec<usize> = (0..local.num_vars()).collect();
    order.sort_by(|&a, &b| {
        let (na, nb) = (local.vars[a].node, local.vars[b].node);
        (count[na], na)
            .cmp(&(count[nb], nb))
            .then(impact[b].total_cmp(&impact[a]))
            .then(a.cmp(&b))
    });
    order
}

/// WCSP whose minimum cost is `|supp eta| M - max_{sigma, e''} sum_e eta(e) w_l(e, sigma(e), e'')`
/// for stored point `l` of the successor bound set. Variable 0 is `e''`
/// ranging over the point's support (in its index order); variable `1 + v` is
/// the action of the `v`-th (node, level) pair in canonical order.
pub fn build_wcsp(ctx: &BackupContext<'_>, eta: &Occupancy, l: usize) -> Result<WcspInstance> {
    let len = ctx.next.len();
    let point = ctx.next.points().get(l).ok_or(Error::PointOutOfRange { index: l, len })?;
    let local = LocalProblem::new(*ctx, eta);
    let m = big_m(&local, &[l]);
    let c = point.value - point.corner_value;
    let support = point.occupancy.entries();
    let levels = local.levels;
    let mut domains = vec![support.len()];
    domains.extend(std::iter::repeat(levels).take(local.num_vars()));
    let mut functions = Vec::with_capacity(local.states.len());
    for e in 0..local.states.len() {
        let count = local.base[e].len();
        let mut table = Vec::with_capacity(support.len() * count);
        for &(target, q) in support {
            for a in 0..count {
                let p = local
                    .successors(e, a)
                    .iter()
                    .find(|&&(t, _)| t == target)
                    .map_or(0.0, |&(_, p)| p);
                let w = local.base[e][a] + p / q * c;
                table.push(m - local.masses[e] * w);
            }
        }
        let mut scope = vec![0];
        scope.extend(local.scopes[e].iter().map(|&v| v + 1));
        functions.push(CostFunction::new(scope, table, &domains)?);
    }
    let mut order = vec![0];
    order.extend(impact_order(&local).into_iter().map(|v| v + 1));
    Ok(WcspInstance {
        domains,
        functions,
        order,
        big_m: m,
    })
}

/// Backup through one WCSP per stored successor point: each relaxed problem
/// keeps only that point in the sawtooth, so its optimum bounds the exact
/// backup and the smallest of them is returned as `bound`. The chosen rule
/// is the candidate (including the best linear rule, used as warm start)
/// with the largest true objective. Searches share `node_budget` expanded
/// nodes; a search cut short contributes its proven bound instead.
pub fn wcsp_backup(ctx: &BackupContext<'_>, eta: &Occupancy, node_budget: u64) -> Result<BackupResult> {
    let local = LocalProblem::new(*ctx, eta);
    let nvars = local.num_vars();
    let mut dense = local.scratch();
    let points = ctx.next.points();
    let all: Vec<usize> = (0..points.len()).collect();
    let m = big_m(&local, &all);
    let total_m = m * local.states.len() as f64;
    let mut remaining = node_budget;
    let per_solve = (node_budget / 16).max(1);

    // Unconstrained problem: maximize phi + y0(omega).
    let functions = (0..local.states.len())
        .map(|e| {
            let table = local.base[e].iter().map(|b| m - local.masses[e] * b).collect();
            CostFunction {
                scope: local.scopes[e].clone(),
                table,
            }
        })
        .collect();
    let inst = WcspInstance {
        domains: vec![local.levels; nvars],
        functions,
        order: impact_order(&local),
        big_m: m,
    };
    let mut prep = PreparedWcsp::new(&inst)?;
    let warm = parametric_backup(ctx, eta, 0).rule;
    let warm_x: Vec<usize> = local.vars.iter().map(|v| warm.index_at(v.node, v.level)).collect();
    let out = prep.solve_limited(prep.cost(&warm_x), remaining / 2);
    remaining = remaining.saturating_sub(out.nodes);
    let base_x = out.solution.map_or_else(|| warm_x.clone(), |s| s.assignment);
    let (_, base_lin) = local.linear(&base_x, &mut dense);
    let base_ub = (total_m - out.lower_bound).max(base_lin);

    let mut best = (local.objective(&warm_x, &mut dense), warm_x);
    let base_value = local.objective(&base_x, &mut dense);
    if base_value > best.0 {
        best = (base_value, base_x.clone());
    }
    if points.is_empty() {
        return Ok(BackupResult {
            rule: local.rule(&best.1),
            value: best.0,
            bound: base_ub.max(best.0),
        });
    }

    // Successor index: which (state, local action) pairs reach each target.
    let size = ctx.model.num_states();
    let mut hits: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); size];
    for e in 0..local.states.len() {
        for a in 0..local.base[e].len() {
            for &(t, p) in local.successors(e, a) {
                hits[t].push((e, a, p));
            }
        }
    }

    // Relaxed objective against point l: lin + c * xi(omega, eta^l).
    let relaxed = |x: &[usize], l: usize, dense: &mut [f64]| -> f64 {
        let (_, lin) = local.linear(x, dense);
        let p = &points[l];
        let ratio = p
            .occupancy
            .entries()
            .iter()
            .fold(f64::INFINITY, |r, &(t, q)| r.min(dense[t] / q));
        lin - p.gap() * ratio
    };

    // Points that cut hardest at the base solution go first.
    let mut start: Vec<(f64, usize)> = (0..points.len()).map(|l| (relaxed(&base_x, l, &mut dense), l)).collect();
    start.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut bound = base_ub;
    let mut saved: Vec<(usize, usize, f64)> = Vec::new();
    for &(start_value, l) in &start {
        let point = &points[l];
        let c = point.value - point.corner_value;
        let support = point.occupancy.entries();
        if c >= 0.0 || support.iter().any(|&(t, _)| hits[t].is_empty()) || start_value >= base_ub {
            continue;
        }
        let mut x = base_x.clone();
        let mut value = start_value;
        let mut ub = value;
        let mut candidates: Vec<(usize, f64)> = support.to_vec();
        candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for &(target, q) in &candidates {
            saved.clear();
            for &(e, a, p) in &hits[target] {
                let old = prep.entry(e, a);
                saved.push((e, a, old));
                prep.set_entry(e, a, old - local.masses[e] * p / q * c);
            }
            let out = prep.solve_limited(total_m - value, remaining.min(per_solve));
            remaining = remaining.saturating_sub(out.nodes);
            if let Some(sol) = out.solution {
                let v = relaxed(&sol.assignment, l, &mut dense);
                if v > value {
                    value = v;
                    x = sol.assignment;
                }
            }
            ub = ub.max(total_m - out.lower_bound);
            for &(e, a, old) in saved.iter().rev() {
                prep.set_entry(e, a, old);
            }
            if ub >= base_ub {
                break;
            }
        }
        bound = bound.min(ub.max(value));
        let feasible = local.objective(&x, &mut dense);
        if feasible > best.0 {
            best = (feasible, x);
        }
    }
    let (value, x) = best;
    Ok(BackupResult {
        rule: local.rule(&x),
        value,
        bound: bound.max(value),
    })
}
