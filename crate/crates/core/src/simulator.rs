//! Monte Carlo execution of per-SYNC-state policies on the slotted channel.
//!
//! Every random quantity has its own ChaCha8 stream derived from the seed:
//! stream 0 draws SYNC slots, stream `1 + 2i` the arrivals of node `i` and
//! stream `2 + 2i` its fading. Each stream is consumed once per slot, so
//! traces are reproducible across platforms.
//!
//! A node with transmission probability `a` transmits exactly when its fading
//! gain `H` satisfies `H >= -ln a`, which happens with probability `a` and
//! makes the expected reward of a lone transmitter equal to `g(a)`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::internal::PolicySequence;
use crate::model::Model;

#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: usize,
    pub sync: bool,
    /// Levels at the start of the slot.
    pub levels: Vec<usize>,
    pub tx: Vec<bool>,
    pub collision: bool,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    /// Per-slot records; empty unless recording was requested.
    pub records: Vec<SlotRecord>,
    pub slots: usize,
    pub total_reward: f64,
    pub reward_rate: f64,
    pub tx_freq: Vec<f64>,
    pub mean_level: Vec<f64>,
    pub collisions: usize,
    pub syncs: usize,
}

pub struct SimConfig<'a> {
    pub model: &'a Model,
    /// Policy per SYNC state, indexed by state.
    pub policies: &'a [PolicySequence],
    pub slots: usize,
    pub seed: u64,
    pub initial_state: usize,
    pub record: bool,
}

struct Streams {
    sync: ChaCha8Rng,
    arrival: Vec<ChaCha8Rng>,
    fading: Vec<ChaCha8Rng>,
}

impl Streams {
    fn new(seed: u64, nodes: usize) -> Self {
        let stream = |id: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        Streams {
            sync: stream(0),
            arrival: (0..nodes).map(|i| stream(1 + 2 * i as u64)).collect(),
            fading: (0..nodes).map(|i| stream(2 + 2 * i as u64)).collect(),
        }
    }
}

/// One slot of the network dynamics.
struct Stepper<'a> {
    model: &'a Model,
    levels: Vec<usize>,
    tx: Vec<bool>,
    gains: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(model: &'a Model, state: usize) -> Self {
        let n = model.num_nodes();
        Stepper {
            model,
            levels: model.levels(state).to_vec(),
            tx: vec![false; n],
            gains: vec![0.0; n],
        }
    }

    fn state(&self) -> usize {
        self.model.space().index(&self.levels).expect("levels stay in range")
    }

    /// Applies `rule` for one slot and returns the realized reward.
    fn step(&mut self, rule: &crate::model::DecisionRule, streams: &mut Streams) -> f64 {
        let model = self.model;
        let grid = model.grid();
        let n = model.num_nodes();
        let mut count = 0;
        for i in 0..n {
            let u: f64 = streams.fading[i].gen();
            let h = -(1.0 - u).ln();
            self.gains[i] = h;
            let a = grid[rule.index_at(i, self.levels[i])];
            self.tx[i] = a > 0.0 && self.levels[i] >= model.node(i).tx_cost && h >= -a.ln();
            if self.tx[i] {
                count += 1;
            }
        }
        let mut reward = 0.0;
        if count == 1 {
            let i = self.tx.iter().position(|&t| t).unwrap();
            let node = model.node(i);
            reward = node.weight * (1.0 + node.snr * self.gains[i]).ln();
        }
        for i in 0..n {
            let node = model.node(i);
            let arrival = streams.arrival[i].gen::<f64>() < node.harvest_prob;
            let mut level = self.levels[i];
            if self.tx[i] {
                level -= node.tx_cost;
            }
            if arrival {
                level += 1;
            }
            self.levels[i] = level.min(node.capacity);
        }
        reward
    }
}

fn check_policies(model: &Model, policies: &[PolicySequence]) -> Result<()> {
    if policies.len() != model.num_states() {
        return Err(Error::MissingPolicy(policies.len()));
    }
    Ok(())
}

/// Simulates `slots` slots. Slot 0 is a SYNC; later slots are SYNC with
/// probability `sync_prob`. After a SYNC the policy of the current state is
/// followed, reusing its last rule past the horizon.
pub fn run(cfg: &SimConfig<'_>) -> Result<SimTrace> {
    let model = cfg.model;
    check_policies(model, cfg.policies)?;
    if cfg.initial_state >= model.num_states() {
        return Err(Error::InvalidConfig(format!("initial state {} out of range", cfg.initial_state)));
    }
    let n = model.num_nodes();
    let mut streams = Streams::new(cfg.seed, n);
    let mut stepper = Stepper::new(model, cfg.initial_state);
    let mut records = Vec::new();
    let mut total = 0.0;
    let mut tx_count = vec![0usize; n];
    let mut level_sum = vec![0.0; n];
    let mut collisions = 0;
    let mut syncs = 0;
    let mut policy = &cfg.policies[cfg.initial_state];
    let mut k = 0usize;
    for slot in 0..cfg.slots {
        let draw: f64 = streams.sync.gen();
        let sync = slot == 0 || draw < model.sync_prob();
        if sync {
            let state = stepper.state();
            policy = cfg.policies.get(state).ok_or(Error::MissingPolicy(state))?;
            k = 0;
            syncs += 1;
        }
        let levels = stepper.levels.clone();
        for i in 0..n {
            level_sum[i] += levels[i] as f64;
        }
        let reward = stepper.step(policy.rule_at(k), &mut streams);
        let count = stepper.tx.iter().filter(|&&t| t).count();
        let collision = count >= 2;
        if collision {
            collisions += 1;
        }
        for i in 0..n {
            if stepper.tx[i] {
                tx_count[i] += 1;
            }
        }
        total += reward;
        if cfg.record {
            records.push(SlotRecord {
                slot,
                sync,
                levels,
                tx: stepper.tx.clone(),
                collision,
                reward,
            });
        }
        k += 1;
    }
    let slots = cfg.slots.max(1) as f64;
    Ok(SimTrace {
        records,
        slots: cfg.slots,
        total_reward: total,
        reward_rate: total / slots,
        tx_freq: tx_count.iter().map(|&c| c as f64 / slots).collect(),
        mean_level: level_sum.iter().map(|&s| s / slots).collect(),
        collisions,
        syncs,
    })
}

/// Time averages after a burn-in, with batch-means standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct LongRun {
    pub reward_rate: f64,
    pub reward_se: f64,
    pub tx_freq: Vec<f64>,
    pub tx_freq_se: Vec<f64>,
    pub mean_level: Vec<f64>,
    pub mean_level_se: Vec<f64>,
    pub batches: usize,
}

fn batch_stats(values: &[f64]) -> (f64, f64) {
    let b = values.len() as f64;
    let mean = values.iter().sum::<f64>() / b;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1.0);
    (mean, (var / b).sqrt())
}

/// Runs `burn_in + slots` slots and averages the last `slots` in `batches`
/// equal batches.
pub fn measure_long_run(cfg: &SimConfig<'_>, burn_in: usize, batches: usize) -> Result<LongRun> {
    let model = cfg.model;
    check_policies(model, cfg.policies)?;
    let batches = batches.max(2);
    let per_batch = (cfg.slots / batches).max(1);
    let n = model.num_nodes();
    let mut streams = Streams::new(cfg.seed, n);
    let mut stepper = Stepper::new(model, cfg.initial_state);
    let mut policy = &cfg.policies[cfg.initial_state];
    let mut k = 0usize;
    let mut rewards = Vec::with_capacity(batches);
    let mut tx = vec![Vec::with_capacity(batches); n];
    let mut lv = vec![Vec::with_capacity(batches); n];
    let mut slot = 0usize;
    let mut advance = |stepper: &mut Stepper<'_>, streams: &mut Streams, slot: usize| -> Result<f64> {
        let draw: f64 = streams.sync.gen();
        if slot == 0 || draw < model.sync_prob() {
            let state = stepper.state();
            policy = cfg.policies.get(state).ok_or(Error::MissingPolicy(state))?;
            k = 0;
        }
        let r = stepper.step(policy.rule_at(k), streams);
        k += 1;
        Ok(r)
    };
    for _ in 0..burn_in {
        advance(&mut stepper, &mut streams, slot)?;
        slot += 1;
    }
    for _ in 0..batches {
        let mut r = 0.0;
        let mut t = vec![0usize; n];
        let mut l = vec![0.0; n];
        for _ in 0..per_batch {
            for i in 0..n {
                l[i] += stepper.levels[i] as f64;
            }
            r += advance(&mut stepper, &mut streams, slot)?;
            for i in 0..n {
                if stepper.tx[i] {
                    t[i] += 1;
                }
            }
            slot += 1;
        }
        rewards.push(r / per_batch as f64);
        for i in 0..n {
            tx[i].push(t[i] as f64 / per_batch as f64);
            lv[i].push(l[i] / per_batch as f64);
        }
    }
    let (reward_rate, reward_se) = batch_stats(&rewards);
    let (tx_freq, tx_freq_se): (Vec<f64>, Vec<f64>) = tx.iter().map(|v| batch_stats(v)).unzip();
    let (mean_level, mean_level_se): (Vec<f64>, Vec<f64>) = lv.iter().map(|v| batch_stats(v)).unzip();
    Ok(LongRun {
        reward_rate,
        reward_se,
        tx_freq,
        tx_freq_se,
        mean_level,
        mean_level_se,
        batches,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats {
    pub mean: f64,
    pub se: f64,
    pub windows: usize,
}

/// Discounted window reward `sum_{k=0}^{T} (1 - sync_prob)^k r_k` from a SYNC
/// at the policy's initial state, averaged over independent windows. Its
/// expectation is the policy's window reward `R_0`.
pub fn simulate_windows(model: &Model, policy: &PolicySequence, windows: usize, seed: u64) -> WindowStats {
    let n = model.num_nodes();
    let mut streams = Streams::new(seed, n);
    let horizon = model.horizon();
    let weights: Vec<f64> = (0..=horizon).map(|k| model.slot_weight(k)).collect();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..windows {
        let mut stepper = Stepper::new(model, policy.initial_state);
        let mut total = 0.0;
        for (k, w) in weights.iter().enumerate() {
            let r = stepper.step(policy.rule_at(k), &mut streams);
            total += w * r;
        }
        sum += total;
        sum_sq += total * total;
    }
    let m = windows.max(1) as f64;
    let mean = sum / m;
    let var = if windows > 1 {
        (sum_sq - m * mean * mean) / (m - 1.0)
    } else {
        f64::NAN
    };
    WindowStats {
        mean,
        se: (var.max(0.0) / m).sqrt(),
        windows,
    }
}

/// Writes `slot,sync,level_1..level_N,tx_1..tx_N,collision,reward`.
pub fn write_trace_csv<W: Write>(trace: &SimTrace, nodes: usize, mut out: W) -> std::io::Result<()> {
    let mut header = vec!["slot".to_string(), "sync".to_string()];
    header.extend((1..=nodes).map(|i| format!("level_{i}")));
    header.extend((1..=nodes).map(|i| format!("tx_{i}")));
    header.push("collision".into());
    header.push("reward".into());
    writeln!(out, "{}", header.join(","))?;
    for r in &trace.records {
        let mut row = vec![r.slot.to_string(), (r.sync as u8).to_string()];
        row.extend(r.levels.iter().map(|l| l.to_string()));
        row.extend(r.tx.iter().map(|&t| (t as u8).to_string()));
        row.push((r.collision as u8).to_string());
        row.push(format!("{}", r.reward));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
