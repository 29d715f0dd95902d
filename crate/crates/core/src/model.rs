//! Network parameters, the joint battery state space, decentralized decision
//! rules and the primitive kernels (per-node battery transitions and the
//! collision-channel reward).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::single_user_reward;

/// Parameters of a single harvesting node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeParams {
    /// Battery capacity in energy quanta.
    pub capacity: usize,
    /// Quanta drained by one transmission.
    pub tx_cost: usize,
    /// Per-slot probability of harvesting one quantum.
    pub harvest_prob: f64,
    /// Mean normalized SNR.
    pub snr: f64,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

fn default_weight() -> f64 {
    1.0
}

impl NodeParams {
    pub fn new(capacity: usize, tx_cost: usize, harvest_prob: f64, snr: f64) -> Self {
        NodeParams {
            capacity,
            tx_cost,
            harvest_prob,
            snr,
            weight: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.capacity == 0 {
            return Err(Error::InvalidConfig("battery capacity must be positive".into()));
        }
        if self.tx_cost == 0 || self.tx_cost > self.capacity {
            return Err(Error::InvalidConfig(format!(
                "tx_cost must lie in 1..={}, got {}",
                self.capacity, self.tx_cost
            )));
        }
        if !(0.0..=1.0).contains(&self.harvest_prob) {
            return Err(Error::InvalidConfig(format!(
                "harvest_prob must lie in [0, 1], got {}",
                self.harvest_prob
            )));
        }
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            return Err(Error::InvalidConfig(format!("snr must be positive, got {}", self.snr)));
        }
        if !(self.weight >= 0.0 && self.weight.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "weight must be nonnegative, got {}",
                self.weight
            )));
        }
        Ok(())
    }
}

/// Smallest horizon whose discounted tail `(1 - sync_prob)^T` is at most
/// `tol`. Always at least one so that slot 1 exists for the external kernel.
pub fn truncation_horizon(sync_prob: f64, tol: f64) -> usize {
    if sync_prob >= 1.0 {
        return 1;
    }
    let t = (tol.ln() / (1.0 - sync_prob).ln()).ceil();
    (t.max(1.0)) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub nodes: Vec<NodeParams>,
    /// Number of points of the uniform action grid on [0, 1].
    pub action_levels: usize,
    pub sync_prob: f64,
    /// Internal horizon: slots 0..=horizon are planned.
    pub horizon: usize,
    pub trunc_tol: f64,
    /// Slot duration in seconds; only carried for reporting.
    pub slot_duration: f64,
}

impl NetworkConfig {
    /// Builds a configuration whose horizon is derived from `trunc_tol`.
    pub fn new(
        nodes: Vec<NodeParams>,
        action_levels: usize,
        sync_prob: f64,
        trunc_tol: f64,
    ) -> Result<Self> {
        let cfg = NetworkConfig {
            horizon: truncation_horizon(sync_prob, trunc_tol),
            nodes,
            action_levels,
            sync_prob,
            trunc_tol,
            slot_duration: 1.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_horizon(mut self, horizon: usize) -> Result<Self> {
        self.horizon = horizon;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::InvalidConfig("at least one node is required".into()));
        }
        for node in &self.nodes {
            node.validate()?;
        }
        if self.action_levels < 2 || self.action_levels > u16::MAX as usize {
            return Err(Error::InvalidConfig(format!(
                "action grid needs at least 2 points, got {}",
                self.action_levels
            )));
        }
        if !(self.sync_prob > 0.0 && self.sync_prob <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "sync_prob must lie in (0, 1], got {}",
                self.sync_prob
            )));
        }
        if !(self.trunc_tol > 0.0 && self.trunc_tol < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "trunc_tol must lie in (0, 1), got {}",
                self.trunc_tol
            )));
        }
        let needed = truncation_horizon(self.sync_prob, self.trunc_tol);
        if self.horizon < needed {
            return Err(Error::InvalidConfig(format!(
                "horizon {} is below the {} slots required by trunc_tol {}",
                self.horizon, needed, self.trunc_tol
            )));
        }
        Ok(())
    }

    /// Action grid value of index `j`.
    pub fn action(&self, j: usize) -> f64 {
        j as f64 / (self.action_levels - 1) as f64
    }
}

/// Per-node transition distribution from level `level` under transmission
/// probability `a`. Masses landing on the same clipped level are merged.
pub fn node_transition(level: usize, a: f64, params: &NodeParams) -> Result<Vec<(usize, f64)>> {
    if level > params.capacity {
        return Err(Error::InvalidConfig(format!(
            "level {level} exceeds capacity {}",
            params.capacity
        )));
    }
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::InvalidConfig(format!("action {a} outside [0, 1]")));
    }
    if a > 0.0 && level < params.tx_cost {
        return Err(Error::InfeasibleAction {
            node: 0,
            level,
            cost: params.tx_cost,
        });
    }
    let pb = params.harvest_prob;
    let cap = params.capacity;
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(3);
    let mut push = |lvl: usize, p: f64| {
        if p <= 0.0 {
            return;
        }
        match out.iter_mut().find(|(l, _)| *l == lvl) {
            Some(entry) => entry.1 += p,
            None => out.push((lvl, p)),
        }
    };
    if a > 0.0 {
        let drained = level - params.tx_cost;
        push(drained, (1.0 - pb) * a);
        push((drained + 1).min(cap), pb * a);
    }
    push(level, (1.0 - pb) * (1.0 - a));
    push((level + 1).min(cap), pb * (1.0 - a));
    out.sort_by_key(|&(l, _)| l);
    Ok(out)
}

/// Collision-channel reward `r(a) = sum_i w_i g_i(a_i) prod_{j != i} (1 - a_j)`.
pub fn global_reward(actions: &[f64], nodes: &[NodeParams]) -> f64 {
    assert_eq!(actions.len(), nodes.len());
    let mut total = 0.0;
    for (i, node) in nodes.iter().enumerate() {
        if actions[i] <= 0.0 {
            continue;
        }
        let others: f64 = actions
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &a)| 1.0 - a)
            .product();
        total += node.weight * single_user_reward(actions[i], node.snr) * others;
    }
    total
}

/// Joint battery levels with a mixed-radix linear index; node 0 is the most
/// significant digit so index order equals lexicographic level order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    dims: Vec<usize>,
    strides: Vec<usize>,
    size: usize,
}

impl StateSpace {
    pub fn new(capacities: &[usize]) -> Self {
        let dims: Vec<usize> = capacities.iter().map(|c| c + 1).collect();
        let mut strides = vec![1; dims.len()];
        for i in (0..dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        let size = dims.iter().product();
        StateSpace {
            dims,
            strides,
            size,
        }
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn num_nodes(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn stride(&self, node: usize) -> usize {
        self.strides[node]
    }

    pub fn index(&self, levels: &[usize]) -> Result<usize> {
        if levels.len() != self.dims.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dims.len(),
                actual: levels.len(),
            });
        }
        let mut idx = 0;
        for (i, &l) in levels.iter().enumerate() {
            if l >= self.dims[i] {
                return Err(Error::InvalidConfig(format!(
                    "level {l} of node {i} exceeds capacity {}",
                    self.dims[i] - 1
                )));
            }
            idx += l * self.strides[i];
        }
        Ok(idx)
    }

    pub fn level(&self, index: usize, node: usize) -> usize {
        (index / self.strides[node]) % self.dims[node]
    }

    pub fn levels(&self, index: usize) -> Vec<usize> {
        (0..self.dims.len()).map(|i| self.level(index, i)).collect()
    }
}

/// A joint battery state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GlobalState {
    pub levels: Vec<usize>,
}

impl GlobalState {
    pub fn new(levels: Vec<usize>) -> Self {
        GlobalState { levels }
    }

    pub fn index(&self, space: &StateSpace) -> Result<usize> {
        space.index(&self.levels)
    }

    pub fn from_index(space: &StateSpace, index: usize) -> Self {
        GlobalState {
            levels: space.levels(index),
        }
    }
}

/// Decentralized decision rule: for every node, one action-grid index per
/// local battery level.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DecisionRule {
    rows: Vec<Vec<u16>>,
}

impl DecisionRule {
    pub fn idle(config: &NetworkConfig) -> Self {
        DecisionRule {
            rows: config
                .nodes
                .iter()
                .map(|n| vec![0; n.capacity + 1])
                .collect(),
        }
    }

    /// Builds a rule from action-grid indices, checking forced idle and the grid.
    pub fn from_rows(config: &NetworkConfig, rows: Vec<Vec<u16>>) -> Result<Self> {
        let rule = DecisionRule { rows };
        rule.validate(config)?;
        Ok(rule)
    }

    pub fn validate(&self, config: &NetworkConfig) -> Result<()> {
        if self.rows.len() != config.nodes.len() {
            return Err(Error::DimensionMismatch {
                expected: config.nodes.len(),
                actual: self.rows.len(),
            });
        }
        for (i, (row, node)) in self.rows.iter().zip(&config.nodes).enumerate() {
            if row.len() != node.capacity + 1 {
                return Err(Error::DimensionMismatch {
                    expected: node.capacity + 1,
                    actual: row.len(),
                });
            }
            for (level, &j) in row.iter().enumerate() {
                if j as usize >= config.action_levels {
                    return Err(Error::InvalidConfig(format!(
                        "action index {j} is off the {}-point grid",
                        config.action_levels
                    )));
                }
                if j > 0 && level < node.tx_cost {
                    return Err(Error::InfeasibleAction {
                        node: i,
                        level,
                        cost: node.tx_cost,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> &[Vec<u16>] {
        &self.rows
    }

    pub fn index_at(&self, node: usize, level: usize) -> usize {
        self.rows[node][level] as usize
    }

    pub fn set(&mut self, node: usize, level: usize, action: usize) {
        self.rows[node][level] = action as u16;
    }

    pub fn probability(&self, config: &NetworkConfig, node: usize, level: usize) -> f64 {
        config.action(self.index_at(node, level))
    }
}

/// Network configuration with precomputed kernels and reward tables.
#[derive(Debug, Clone)]
pub struct Model {
    config: NetworkConfig,
    space: StateSpace,
    /// `levels[s * n + i]` is the level of node `i` in state `s`.
    levels: Vec<usize>,
    /// `kernels[i][level][action]` lists `(next level, probability)`.
    kernels: Vec<Vec<Vec<Vec<(usize, f64)>>>>,
    /// `gains[i][action]` is `w_i g_i(a)`.
    gains: Vec<Vec<f64>>,
    grid: Vec<f64>,
}

impl Model {
    pub fn new(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let capacities: Vec<usize> = config.nodes.iter().map(|n| n.capacity).collect();
        let space = StateSpace::new(&capacities);
        let n = config.nodes.len();
        let mut levels = Vec::with_capacity(space.len() * n);
        for s in 0..space.len() {
            for i in 0..n {
                levels.push(space.level(s, i));
            }
        }
        let grid: Vec<f64> = (0..config.action_levels).map(|j| config.action(j)).collect();
        let mut kernels = Vec::with_capacity(n);
        let mut gains = Vec::with_capacity(n);
        for node in &config.nodes {
            let mut per_level = Vec::with_capacity(node.capacity + 1);
            for level in 0..=node.capacity {
                let mut per_action = Vec::with_capacity(grid.len());
                for &a in &grid {
                    if a > 0.0 && level < node.tx_cost {
                        per_action.push(Vec::new());
                    } else {
                        per_action.push(node_transition(level, a, node)?);
                    }
                }
                per_level.push(per_action);
            }
            kernels.push(per_level);
            gains.push(
                grid.iter()
                    .map(|&a| node.weight * single_user_reward(a, node.snr))
                    .collect(),
            );
        }
        Ok(Model {
            config,
            space,
            levels,
            kernels,
            gains,
            grid,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn num_nodes(&self) -> usize {
        self.config.nodes.len()
    }

    pub fn num_states(&self) -> usize {
        self.space.len()
    }

    pub fn horizon(&self) -> usize {
        self.config.horizon
    }

    pub fn sync_prob(&self) -> f64 {
        self.config.sync_prob
    }

    pub fn action_levels(&self) -> usize {
        self.grid.len()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn node(&self, i: usize) -> &NodeParams {
        &self.config.nodes[i]
    }

    /// Level of node `i` in state `s`.
    #[inline]
    pub fn level(&self, s: usize, i: usize) -> usize {
        self.levels[s * self.config.nodes.len() + i]
    }

    /// Levels of all nodes in state `s`.
    #[inline]
    pub fn levels(&self, s: usize) -> &[usize] {
        let n = self.config.nodes.len();
        &self.levels[s * n..(s + 1) * n]
    }

    #[inline]
    pub fn node_kernel(&self, i: usize, level: usize, action: usize) -> &[(usize, f64)] {
        &self.kernels[i][level][action]
    }

    /// `w_i g_i` on the action grid.
    pub fn gain(&self, i: usize, action: usize) -> f64 {
        self.gains[i][action]
    }

    /// Discount weight `(1 - sync_prob)^k` of internal slot `k`.
    pub fn slot_weight(&self, k: usize) -> f64 {
        (1.0 - self.config.sync_prob).powi(k as i32)
    }

    /// Largest single-slot reward over the action grid.
    pub fn max_reward(&self) -> f64 {
        // Reward is maximized at a corner with one node transmitting w.p. 1.
        (0..self.num_nodes())
            .map(|i| self.gains[i][self.grid.len() - 1])
            .fold(0.0, f64::max)
    }

    /// Collision-channel reward for a vector of action-grid indices.
    #[inline]
    pub fn reward_indices(&self, actions: &[usize]) -> f64 {
        let n = actions.len();
        if n == 2 {
            let (a0, a1) = (self.grid[actions[0]], self.grid[actions[1]]);
            return self.gains[0][actions[0]] * (1.0 - a1) + self.gains[1][actions[1]] * (1.0 - a0);
        }
        let mut total = 0.0;
        for i in 0..n {
            if actions[i] == 0 {
                continue;
            }
            let mut others = 1.0;
            for (j, &aj) in actions.iter().enumerate() {
                if j != i {
                    others *= 1.0 - self.grid[aj];
                }
            }
            total += self.gains[i][actions[i]] * others;
        }
        total
    }

    /// Joint action indices chosen by `rule` in state `s`.
    #[inline]
    pub fn rule_actions(&self, rule: &DecisionRule, s: usize, out: &mut [usize]) {
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = rule.index_at(i, self.level(s, i));
        }
    }

    /// `r(sigma(e))`.
    pub fn rule_reward(&self, rule: &DecisionRule, s: usize) -> f64 {
        let mut actions = vec![0; self.num_nodes()];
        self.rule_actions(rule, s, &mut actions);
        self.reward_indices(&actions)
    }

    /// Calls `f(next_state, probability)` for every successor of `s` under
    /// the joint action indices `actions`.
    #[inline]
    pub fn for_each_successor<F: FnMut(usize, f64)>(&self, s: usize, actions: &[usize], mut f: F) {
        let n = actions.len();
        if n == 2 {
            let k0 = self.node_kernel(0, self.level(s, 0), actions[0]);
            let k1 = self.node_kernel(1, self.level(s, 1), actions[1]);
            let stride0 = self.space.stride(0);
            for &(l0, p0) in k0 {
                for &(l1, p1) in k1 {
                    f(l0 * stride0 + l1, p0 * p1);
                }
            }
            return;
        }
        let kernels: Vec<&[(usize, f64)]> = (0..n)
            .map(|i| self.node_kernel(i, self.level(s, i), actions[i]))
            .collect();
        let mut pos = vec![0usize; n];
        loop {
            let mut idx = 0;
            let mut p = 1.0;
            for i in 0..n {
                let (l, q) = kernels[i][pos[i]];
                idx += l * self.space.stride(i);
                p *= q;
            }
            f(idx, p);
            let mut i = n;
            loop {
                if i == 0 {
                    return;
                }
                i -= 1;
                pos[i] += 1;
                if pos[i] < kernels[i].len() {
                    break;
                }
                pos[i] = 0;
            }
        }
    }

    /// Joint transition distribution of `state` under `rule`, sorted by index.
    pub fn joint_transition(&self, state: &GlobalState, rule: &DecisionRule) -> Result<Vec<(usize, f64)>> {
        rule.validate(&self.config)?;
        let s = state.index(&self.space)?;
        let mut actions = vec![0; self.num_nodes()];
        self.rule_actions(rule, s, &mut actions);
        let mut out: Vec<(usize, f64)> = Vec::new();
        self.for_each_successor(s, &actions, |t, p| out.push((t, p)));
        out.sort_by_key(|&(t, _)| t);
        Ok(out)
    }

    /// Whether node `i` may transmit at `level`.
    #[inline]
    pub fn can_transmit(&self, i: usize, level: usize) -> bool {
        level >= self.config.nodes[i].tx_cost
    }
}
