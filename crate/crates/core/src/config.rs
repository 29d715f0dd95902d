//! Run configuration in TOML.
//!
//! ```toml
//! [network]
//! sync_prob = 0.05
//! action_levels = 19
//! trunc_tol = 1e-3      # optional, default 1e-3
//! horizon = 135         # optional, derived from trunc_tol when absent
//! slot_duration = 0.01  # optional, seconds, reporting only
//!
//! [[network.node]]
//! capacity = 8
//! tx_cost = 2
//! harvest_prob = 0.1
//! snr = 6.0
//! weight = 1.0          # optional, default 1
//!
//! [solver]              # optional
//! gap_tol = 1e-3
//! max_trials = 200
//! theta_levels = 19
//! point_cap = 500
//! size_limit = 1e7
//! node_budget = 200000
//! via_tol = 1e-4        # optional, default 1e-4 times the largest slot reward
//! via_max_iters = 50
//!
//! [run]                 # optional
//! initial_states = [[0, 0], [8, 8]]
//!
//! [sweep]               # optional
//! harvest_probs = [0.1, 0.5, 0.9]
//! sync_probs = [0.05, 0.2, 1.0]
//! kinds = ["wcsp", "parametric", "orthogonal", "symmetric", "centralized"]
//!
//! [simulation]          # optional
//! slots = 200000
//! burn_in = 1000
//! batches = 20
//! windows = 0
//! ```
//!
//! Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::external::{ExternalOptions, PolicyKind};
use crate::internal::SolverOptions;
use crate::model::{truncation_horizon, NetworkConfig, NodeParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub sync_prob: f64,
    pub action_levels: usize,
    #[serde(default = "default_trunc_tol")]
    pub trunc_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default = "default_slot_duration")]
    pub slot_duration: f64,
    pub node: Vec<NodeParams>,
}

fn default_trunc_tol() -> f64 {
    1e-3
}

fn default_slot_duration() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub gap_tol: f64,
    pub max_trials: usize,
    pub theta_levels: usize,
    pub point_cap: usize,
    pub size_limit: f64,
    pub node_budget: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub via_tol: Option<f64>,
    pub via_max_iters: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverOptions::default();
        SolverSection {
            gap_tol: s.gap_tol,
            max_trials: s.max_trials,
            theta_levels: s.theta_levels,
            point_cap: s.point_cap,
            size_limit: s.size_limit,
            node_budget: s.node_budget,
            via_tol: None,
            via_max_iters: ExternalOptions::default().max_iters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_states: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub harvest_probs: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sync_probs: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kinds: Option<Vec<PolicyKind>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub slots: usize,
    pub burn_in: usize,
    pub batches: usize,
    pub windows: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            slots: 200_000,
            burn_in: 1_000,
            batches: 20,
            windows: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub network: NetworkSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub simulation: SimulationSection,
}

impl RunConfig {
    /// Parses and validates; parse errors carry line and column.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.network_config()?;
        let s = &self.solver;
        if !(s.gap_tol >= 0.0) || s.max_trials == 0 || s.point_cap == 0 || s.via_max_iters == 0 {
            return Err(Error::InvalidConfig(
                "solver needs gap_tol >= 0 and positive max_trials, point_cap, via_max_iters".into(),
            ));
        }
        if s.theta_levels == 1 {
            return Err(Error::InvalidConfig("theta_levels must be 0 or at least 2".into()));
        }
        if let Some(tol) = s.via_tol {
            if !(tol > 0.0) {
                return Err(Error::InvalidConfig("via_tol must be positive".into()));
            }
        }
        let check_grid = |name: &str, grid: &Option<Vec<f64>>, lo_open: bool| -> Result<()> {
            if let Some(g) = grid {
                if g.is_empty() {
                    return Err(Error::InvalidConfig(format!("sweep grid '{name}' is empty")));
                }
                for &v in g {
                    let ok = if lo_open { v > 0.0 && v <= 1.0 } else { (0.0..=1.0).contains(&v) };
                    if !ok {
                        return Err(Error::InvalidConfig(format!("{name} entry {v} out of range")));
                    }
                }
            }
            Ok(())
        };
        check_grid("harvest_probs", &self.sweep.harvest_probs, false)?;
        check_grid("sync_probs", &self.sweep.sync_probs, true)?;
        if matches!(&self.sweep.kinds, Some(k) if k.is_empty()) {
            return Err(Error::InvalidConfig("sweep grid 'kinds' is empty".into()));
        }
        if let Some(states) = &self.run.initial_states {
            if states.is_empty() {
                return Err(Error::InvalidConfig("initial_states is empty".into()));
            }
            let net = self.network_config()?;
            let caps: Vec<usize> = net.nodes.iter().map(|n| n.capacity).collect();
            let space = crate::model::StateSpace::new(&caps);
            for st in states {
                space.index(st)?;
            }
        }
        if self.simulation.slots == 0 || self.simulation.batches < 2 {
            return Err(Error::InvalidConfig("simulation needs slots > 0 and batches >= 2".into()));
        }
        Ok(())
    }

    pub fn network_config(&self) -> Result<NetworkConfig> {
        self.network_with(self.network.sync_prob, None)
    }

    /// Network with overridden SYNC probability and, optionally, a common
    /// harvesting probability for every node. An explicit horizon is kept
    /// only when it still satisfies the truncation tolerance.
    pub fn network_with(&self, sync_prob: f64, harvest_prob: Option<f64>) -> Result<NetworkConfig> {
        let n = &self.network;
        let mut nodes = n.node.clone();
        if let Some(p) = harvest_prob {
            nodes.iter_mut().for_each(|node| node.harvest_prob = p);
        }
        let needed = if sync_prob > 0.0 && sync_prob <= 1.0 {
            truncation_horizon(sync_prob, n.trunc_tol)
        } else {
            1
        };
        let horizon = match n.horizon {
            Some(h) if sync_prob == n.sync_prob => h,
            Some(h) => h.max(needed),
            None => needed,
        };
        let cfg = NetworkConfig {
            nodes,
            action_levels: n.action_levels,
            sync_prob,
            horizon,
            trunc_tol: n.trunc_tol,
            slot_duration: n.slot_duration,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            gap_tol: self.solver.gap_tol,
            max_trials: self.solver.max_trials,
            theta_levels: self.solver.theta_levels,
            point_cap: self.solver.point_cap,
            size_limit: self.solver.size_limit,
            node_budget: self.solver.node_budget,
        }
    }

    pub fn external_options(&self) -> ExternalOptions {
        ExternalOptions {
            tol: self.solver.via_tol,
            max_iters: self.solver.via_max_iters,
            solver: self.solver_options(),
        }
    }
}
