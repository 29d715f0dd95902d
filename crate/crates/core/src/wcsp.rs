//! Weighted constraint satisfaction: minimize a sum of table cost functions
//! over discrete variables by depth-first branch and bound.

use crate::error::{Error, Result};

/// Dense cost table; `scope[0]` is the slowest-varying axis.
#[derive(Debug, Clone, PartialEq)]
pub struct CostFunction {
    pub scope: Vec<usize>,
    pub table: Vec<f64>,
}

impl CostFunction {
    pub fn new(scope: Vec<usize>, table: Vec<f64>, domains: &[usize]) -> Result<Self> {
        let mut size = 1usize;
        for &v in &scope {
            let d = *domains.get(v).ok_or(Error::DimensionMismatch {
                expected: domains.len(),
                actual: v + 1,
            })?;
            size *= d;
        }
        if size != table.len() {
            return Err(Error::DimensionMismatch {
                expected: size,
                actual: table.len(),
            });
        }
        Ok(CostFunction { scope, table })
    }

    pub fn cost(&self, domains: &[usize], assignment: &[usize]) -> f64 {
        let mut idx = 0;
        for &v in &self.scope {
            idx = idx * domains[v] + assignment[v];
        }
        self.table[idx]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WcspInstance {
    pub domains: Vec<usize>,
    pub functions: Vec<CostFunction>,
    /// Branching order; a permutation of the variables.
    pub order: Vec<usize>,
    /// Offset that made the costs nonnegative, if any.
    pub big_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WcspSolution {
    pub assignment: Vec<usize>,
    pub cost: f64,
    pub nodes: u64,
}

/// Result of a node-limited search.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitedSearch {
    /// Best assignment found strictly below the cutoff.
    pub solution: Option<WcspSolution>,
    /// Proven lower bound on the minimum cost, or the cutoff when the search
    /// shows nothing cheaper exists.
    pub lower_bound: f64,
    pub complete: bool,
    pub nodes: u64,
}

impl WcspInstance {
    pub fn new(domains: Vec<usize>, functions: Vec<CostFunction>) -> Self {
        let order = (0..domains.len()).collect();
        WcspInstance {
            domains,
            functions,
            order,
            big_m: 0.0,
        }
    }

    /// Total cost, summed in function order.
    pub fn total_cost(&self, assignment: &[usize]) -> f64 {
        let mut total = 0.0;
        for f in &self.functions {
            total += f.cost(&self.domains, assignment);
        }
        total
    }
}

/// A cost function re-laid out with its scope sorted by branching position.
struct Laid {
    vars: Vec<usize>,
    dims: Vec<usize>,
    /// Branching positions of `vars`, ascending.
    positions: Vec<usize>,
    table: Vec<f64>,
    /// `proj[j]` caches, for each assignment of the first `j` variables, the
    /// minimum over the middle variables as a vector over the last one.
    proj: Vec<Vec<f64>>,
    ready: Vec<Vec<bool>>,
}

impl Laid {
    fn new(f: &CostFunction, domains: &[usize], pos: &[usize]) -> (Self, Vec<usize>) {
        let mut perm: Vec<usize> = (0..f.scope.len()).collect();
        perm.sort_by_key(|&i| pos[f.scope[i]]);
        let vars: Vec<usize> = perm.iter().map(|&i| f.scope[i]).collect();
        let dims: Vec<usize> = vars.iter().map(|&v| domains[v]).collect();
        let old_dims: Vec<usize> = f.scope.iter().map(|&v| domains[v]).collect();
        let mut old_strides = vec![1usize; old_dims.len()];
        for i in (0..old_dims.len().saturating_sub(1)).rev() {
            old_strides[i] = old_strides[i + 1] * old_dims[i + 1];
        }
        let size = f.table.len();
        let mut table = vec![0.0; size];
        let mut map = vec![0usize; size];
        let mut digits = vec![0usize; dims.len()];
        for (at, slot) in table.iter_mut().enumerate() {
            let mut old = 0;
            for (j, &p) in perm.iter().enumerate() {
                old += digits[j] * old_strides[p];
            }
            *slot = f.table[old];
            map[old] = at;
            for j in (0..digits.len()).rev() {
                digits[j] += 1;
                if digits[j] < dims[j] {
                    break;
                }
                digits[j] = 0;
            }
        }
        let positions = vars.iter().map(|&v| pos[v]).collect();
        let arity = dims.len();
        let mut proj = Vec::with_capacity(arity);
        let mut ready = Vec::with_capacity(arity);
        let mut prefix = 1usize;
        for j in 0..arity {
            if j + 1 < arity {
                let last = dims[arity - 1];
                proj.push(vec![0.0; prefix * last]);
                ready.push(vec![false; prefix]);
            } else {
                proj.push(Vec::new());
                ready.push(Vec::new());
            }
            prefix *= dims[j];
        }
        let laid = Laid {
            vars,
            dims,
            positions,
            table,
            proj,
            ready,
        };
        (laid, map)
    }

    /// Number of scope variables assigned at `depth`.
    fn assigned(&self, depth: usize) -> usize {
        self.positions.iter().take_while(|&&p| p < depth).count()
    }

    fn prefix_index(&self, j: usize, assignment: &[usize]) -> usize {
        let mut idx = 0;
        for t in 0..j {
            idx = idx * self.dims[t] + assignment[self.vars[t]];
        }
        idx
    }

    /// Projection onto the last scope variable given the first `j` assigned
    /// (`j < arity`); returned as a slice over the last variable's domain.
    fn projection(&mut self, j: usize, assignment: &[usize]) -> &[f64] {
        let arity = self.dims.len();
        let last = self.dims[arity - 1];
        let p = self.prefix_index(j, assignment);
        let block: usize = self.dims[j..].iter().product();
        if j == arity - 1 {
            return &self.table[p * block..(p + 1) * block];
        }
        if !self.ready[j][p] {
            let out = &mut self.proj[j][p * last..(p + 1) * last];
            out.iter_mut().for_each(|x| *x = f64::INFINITY);
            let slice = &self.table[p * block..(p + 1) * block];
            for chunk in slice.chunks_exact(last) {
                for (o, &c) in out.iter_mut().zip(chunk) {
                    if c < *o {
                        *o = c;
                    }
                }
            }
            self.ready[j][p] = true;
        }
        &self.proj[j][p * last..(p + 1) * last]
    }
}

/// Instance compiled for repeated solving; table entries may be patched
/// between solves.
pub struct PreparedWcsp {
    domains: Vec<usize>,
    order: Vec<usize>,
    laid: Vec<Laid>,
    /// Original table index to laid-out index, per function.
    maps: Vec<Vec<usize>>,
    /// Functions whose last variable (in branching order) is each variable.
    by_last: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    agg_len: usize,
    big_m: f64,
}

impl PreparedWcsp {
    pub fn new(inst: &WcspInstance) -> Result<Self> {
        validate(inst)?;
        let n = inst.domains.len();
        let mut pos = vec![0usize; n];
        for (p, &v) in inst.order.iter().enumerate() {
            pos[v] = p;
        }
        let mut laid = Vec::with_capacity(inst.functions.len());
        let mut maps = Vec::with_capacity(inst.functions.len());
        let mut by_last = vec![Vec::new(); n];
        for f in &inst.functions {
            for &v in &f.scope {
                if v >= n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        actual: v + 1,
                    });
                }
            }
            let (l, map) = Laid::new(f, &inst.domains, &pos);
            if !l.dims.is_empty() {
                by_last[l.vars[l.dims.len() - 1]].push(laid.len());
            }
            laid.push(l);
            maps.push(map);
        }
        let mut offsets = vec![0usize; n];
        let mut total = 0;
        for v in 0..n {
            offsets[v] = total;
            total += inst.domains[v];
        }
        Ok(PreparedWcsp {
            domains: inst.domains.clone(),
            order: inst.order.clone(),
            laid,
            maps,
            by_last,
            offsets,
            agg_len: total,
            big_m: inst.big_m,
        })
    }

    pub fn big_m(&self) -> f64 {
        self.big_m
    }

    /// Total cost, summed in function order.
    pub fn cost(&self, assignment: &[usize]) -> f64 {
        let mut total = 0.0;
        for f in &self.laid {
            total += f.table[f.prefix_index(f.dims.len(), assignment)];
        }
        total
    }

    /// Entry `index` (original layout) of function `f`.
    pub fn entry(&self, f: usize, index: usize) -> f64 {
        self.laid[f].table[self.maps[f][index]]
    }

    pub fn set_entry(&mut self, f: usize, index: usize, value: f64) {
        let at = self.maps[f][index];
        let l = &mut self.laid[f];
        l.table[at] = value;
        for r in l.ready.iter_mut() {
            r.iter_mut().for_each(|x| *x = false);
        }
    }

    /// Exact optimum, with the all-zero assignment as initial incumbent.
    pub fn solve(&mut self) -> WcspSolution {
        let zero = vec![0usize; self.domains.len()];
        let cost = self.cost(&zero);
        self.solve_below(cost).unwrap_or(WcspSolution {
            assignment: zero,
            cost,
            nodes: 0,
        })
    }

    /// Optimum among assignments strictly cheaper than `cutoff`, if any.
    pub fn solve_below(&mut self, cutoff: f64) -> Option<WcspSolution> {
        self.solve_limited(cutoff, u64::MAX).solution
    }

    /// Like `solve_below`, but stops expanding after `node_limit` nodes and
    /// reports the smallest bound among the subtrees left open.
    pub fn solve_limited(&mut self, cutoff: f64, node_limit: u64) -> LimitedSearch {
        let scale: f64 = self
            .laid
            .iter()
            .map(|l| l.table.iter().fold(0.0f64, |m, &c| m.max(c.abs())))
            .sum();
        let nfun = self.laid.len() as f64;
        let n = self.domains.len();
        let mut search = Search {
            agg: vec![0.0; self.agg_len],
            prep: self,
            assignment: vec![0; n],
            best: cutoff,
            best_assignment: None,
            // Rounding allowance so that the bound never hides a better leaf.
            slack: 1e-13 * (scale + 1.0) * (nfun + 1.0),
            nodes: 0,
            node_limit,
            open: f64::INFINITY,
        };
        let lb = search.lower_bound(0);
        if lb < search.best + search.slack {
            if node_limit == 0 {
                search.open = lb;
            } else {
                search.dfs(0);
            }
        }
        let nodes = search.nodes;
        let lower_bound = search.best.min(search.open);
        let complete = search.open == f64::INFINITY;
        let found = search.best_assignment.take();
        LimitedSearch {
            solution: found.map(|assignment| WcspSolution {
                cost: self.cost(&assignment),
                assignment,
                nodes,
            }),
            lower_bound,
            complete,
            nodes,
        }
    }
}

struct Search<'a> {
    prep: &'a mut PreparedWcsp,
    assignment: Vec<usize>,
    best: f64,
    best_assignment: Option<Vec<usize>>,
    slack: f64,
    nodes: u64,
    node_limit: u64,
    /// Smallest bound of a subtree abandoned at the node limit.
    open: f64,
    agg: Vec<f64>,
}

impl<'a> Search<'a> {
    fn lower_bound(&mut self, depth: usize) -> f64 {
        let prep = &mut *self.prep;
        for &x in &prep.order[depth..] {
            let off = prep.offsets[x];
            self.agg[off..off + prep.domains[x]].iter_mut().for_each(|v| *v = 0.0);
        }
        let mut fixed = 0.0;
        for f in prep.laid.iter_mut() {
            let j = f.assigned(depth);
            if j == f.dims.len() {
                fixed += f.table[f.prefix_index(j, &self.assignment)];
            } else {
                let last = f.vars[f.dims.len() - 1];
                let off = prep.offsets[last];
                let proj = f.projection(j, &self.assignment);
                for (a, &p) in self.agg[off..off + proj.len()].iter_mut().zip(proj) {
                    *a += p;
                }
            }
        }
        let mut lb = fixed;
        for &x in &prep.order[depth..] {
            let off = prep.offsets[x];
            lb += self.agg[off..off + prep.domains[x]]
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
        }
        lb
    }

    fn dfs(&mut self, depth: usize) {
        self.nodes += 1;
        let n = self.prep.order.len();
        if depth == n {
            let cost = self.prep.cost(&self.assignment);
            if cost < self.best {
                self.best = cost;
                self.best_assignment = Some(self.assignment.clone());
            }
            return;
        }
        let x = self.prep.order[depth];
        let dom = self.prep.domains[x];
        // Value ordering by the exact cost of functions closed by x.
        let mut key = vec![0.0; dom];
        for i in 0..self.prep.by_last[x].len() {
            let fi = self.prep.by_last[x][i];
            let f = &mut self.prep.laid[fi];
            let j = f.dims.len() - 1;
            let proj = f.projection(j, &self.assignment);
            for (k, &p) in key.iter_mut().zip(proj) {
                *k += p;
            }
        }
        let mut values: Vec<usize> = (0..dom).collect();
        values.sort_by(|&a, &b| key[a].total_cmp(&key[b]).then(a.cmp(&b)));
        for v in values {
            self.assignment[x] = v;
            let lb = self.lower_bound(depth + 1);
            if lb >= self.best + self.slack {
                continue;
            }
            if self.nodes >= self.node_limit {
                self.open = self.open.min(lb);
                continue;
            }
            self.dfs(depth + 1);
        }
        self.assignment[x] = 0;
    }
}

fn validate(inst: &WcspInstance) -> Result<()> {
    let n = inst.domains.len();
    let mut seen = vec![false; n];
    if inst.order.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: inst.order.len(),
        });
    }
    for &v in &inst.order {
        if v >= n || seen[v] {
            return Err(Error::InvalidConfig("branching order is not a permutation".into()));
        }
        seen[v] = true;
    }
    if inst.domains.iter().any(|&d| d == 0) {
        return Err(Error::InvalidConfig("empty variable domain".into()));
    }
    Ok(())
}

/// Exact minimum-cost assignment. Ties keep the first assignment found; the
/// search starts from the all-zero assignment as incumbent.
pub fn solve_wcsp(inst: &WcspInstance) -> Result<WcspSolution> {
    Ok(PreparedWcsp::new(inst)?.solve())
}

/// Searches for an assignment whose cost is strictly below `cutoff`; returns
/// the optimum if one exists.
pub fn solve_below(inst: &WcspInstance, cutoff: f64) -> Result<Option<WcspSolution>> {
    Ok(PreparedWcsp::new(inst)?.solve_below(cutoff))
}
