//! Per-backup tables: for every state in the occupancy support and every
//! local joint action, the linear part of the objective and the successors.

use crate::model::DecisionRule;
use crate::occupancy::Occupancy;

use super::BackupContext;

/// A decision variable: the action of `node` at battery `level`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Var {
    pub node: usize,
    pub level: usize,
}

pub(crate) struct LocalProblem<'a> {
    pub ctx: BackupContext<'a>,
    pub states: Vec<usize>,
    pub masses: Vec<f64>,
    pub vars: Vec<Var>,
    /// Variables (node order) whose values form each state's local action.
    pub scopes: Vec<Vec<usize>>,
    /// `w_k (r(a) + sum p z)` per state and local action.
    pub phi: Vec<Vec<f64>>,
    /// `phi` plus the successor corner interpolation.
    pub base: Vec<Vec<f64>>,
    /// Successors per state and local action, flattened with offsets.
    succ: Vec<(usize, f64)>,
    succ_start: Vec<Vec<usize>>,
    pub levels: usize,
}

impl<'a> LocalProblem<'a> {
    pub fn new(ctx: BackupContext<'a>, eta: &Occupancy) -> Self {
        let model = ctx.model;
        let n = model.num_nodes();
        let levels = model.action_levels();
        let weight = model.slot_weight(ctx.k);
        let corners = ctx.next.corners();
        let mut var_index: Vec<Vec<Option<usize>>> =
            (0..n).map(|i| vec![None; model.node(i).capacity + 1]).collect();
        let mut vars = Vec::new();
        for &(s, _) in eta.entries() {
            for i in 0..n {
                let l = model.level(s, i);
                if model.can_transmit(i, l) && var_index[i][l].is_none() {
                    var_index[i][l] = Some(vars.len());
                    vars.push(Var { node: i, level: l });
                }
            }
        }
        // Canonical (node, level) variable numbering.
        let mut sorted: Vec<usize> = (0..vars.len()).collect();
        sorted.sort_by_key(|&v| (vars[v].node, vars[v].level));
        let vars: Vec<Var> = sorted.iter().map(|&v| vars[v]).collect();
        for (new, var) in vars.iter().enumerate() {
            var_index[var.node][var.level] = Some(new);
        }

        let mut states = Vec::with_capacity(eta.support_len());
        let mut masses = Vec::with_capacity(eta.support_len());
        let mut scopes = Vec::with_capacity(eta.support_len());
        let mut phi = Vec::with_capacity(eta.support_len());
        let mut base = Vec::with_capacity(eta.support_len());
        let mut succ = Vec::new();
        let mut succ_start = Vec::with_capacity(eta.support_len());
        let mut actions = vec![0usize; n];
        for &(s, p) in eta.entries() {
            let scope: Vec<usize> = (0..n)
                .filter_map(|i| var_index[i][model.level(s, i)])
                .collect();
            let count = levels.pow(scope.len() as u32);
            let mut phis = Vec::with_capacity(count);
            let mut bases = Vec::with_capacity(count);
            let mut starts = Vec::with_capacity(count + 1);
            for local in 0..count {
                actions.iter_mut().for_each(|a| *a = 0);
                let mut rest = local;
                for &v in scope.iter().rev() {
                    actions[vars[v].node] = rest % levels;
                    rest /= levels;
                }
                let mut zterm = 0.0;
                let mut cterm = 0.0;
                starts.push(succ.len());
                model.for_each_successor(s, &actions, |t, q| {
                    zterm += q * ctx.z[t];
                    cterm += q * corners[t];
                    succ.push((t, q));
                });
                let f = if weight == 0.0 {
                    0.0
                } else {
                    weight * (model.reward_indices(&actions) + zterm)
                };
                phis.push(f);
                bases.push(f + cterm);
            }
            starts.push(succ.len());
            states.push(s);
            masses.push(p);
            scopes.push(scope);
            phi.push(phis);
            base.push(bases);
            succ_start.push(starts);
        }
        LocalProblem {
            ctx,
            states,
            masses,
            vars,
            scopes,
            phi,
            base,
            succ,
            succ_start,
            levels,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    /// Local action index of support state `e` under variable values `x`.
    #[inline]
    pub fn local_index(&self, e: usize, x: &[usize]) -> usize {
        self.scopes[e].iter().fold(0, |acc, &v| acc * self.levels + x[v])
    }

    #[inline]
    pub fn successors(&self, e: usize, local: usize) -> &[(usize, f64)] {
        &self.succ[self.succ_start[e][local]..self.succ_start[e][local + 1]]
    }

    /// Objective pieces of assignment `x`: returns `(phi, phi + y0(omega))`
    /// and fills `dense` with `omega(eta, sigma)`.
    pub fn linear(&self, x: &[usize], dense: &mut [f64]) -> (f64, f64) {
        dense.iter_mut().for_each(|v| *v = 0.0);
        let mut phi = 0.0;
        let mut lin = 0.0;
        for e in 0..self.states.len() {
            let a = self.local_index(e, x);
            let p = self.masses[e];
            phi += p * self.phi[e][a];
            lin += p * self.base[e][a];
            for &(t, q) in self.successors(e, a) {
                dense[t] += p * q;
            }
        }
        (phi, lin)
    }

    /// `phi + sawtooth(next, omega)` of assignment `x`.
    pub fn objective(&self, x: &[usize], dense: &mut [f64]) -> f64 {
        let (phi, _) = self.linear(x, dense);
        phi + self.ctx.next.sawtooth_dense(dense)
    }

    pub fn rule(&self, x: &[usize]) -> DecisionRule {
        let mut rule = DecisionRule::idle(self.ctx.model.config());
        for (v, var) in self.vars.iter().enumerate() {
            rule.set(var.node, var.level, x[v]);
        }
        rule
    }

    pub fn scratch(&self) -> Vec<f64> {
        vec![0.0; self.ctx.model.num_states()]
    }
}
