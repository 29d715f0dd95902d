use ehdec::baseline::{orthogonal_rules, symmetric_rules};
use ehdec::centralized::{solve_centralized, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use ehdec::config::RunConfig;
use ehdec::external::{via_iterate, ExternalSolution, PolicyKind};
use ehdec::internal::{mps_solve, sequence_from_rules, BackupKind, PolicySequence};
use ehdec::model::Model;
use ehdec::simulator::{measure_long_run, run as simulate, simulate_windows, write_trace_csv, SimConfig};
use serde::Serialize;

use crate::output::{state_label, write_json, Csv, RunManifest};
use crate::{Args, CliError, Command};

type Result<T> = std::result::Result<T, CliError>;

pub fn run(command: &Command) -> Result<()> {
    let args = command.args();
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let config = RunConfig::parse(&text)?;
    std::fs::create_dir_all(&args.out)?;
    let backup = BackupKind::from(args.backup);
    let manifest = RunManifest {
        subcommand: command.name().to_string(),
        config: args.config.display().to_string(),
        out: args.out.display().to_string(),
        seed: args.seed,
        backup: backup.to_string(),
        harvest_probs: harvest_grid(&config),
        sync_probs: sync_grid(&config),
    };
    write_json(&args.out.join("manifest.json"), &manifest)?;
    match command {
        Command::SolveInternal(a) => solve_internal(&config, a, backup),
        Command::SolveExternal(a) => solve_external(&config, a, backup),
        Command::Simulate(a) => simulate_cmd(&config, a, backup),
        Command::Sweep(a) => sweep(&config, a, backup),
    }
}

/// Harvest grid for sweeps; a network whose nodes all share one rate
/// defaults to that rate.
fn harvest_grid(config: &RunConfig) -> Vec<f64> {
    config
        .sweep
        .harvest_probs
        .clone()
        .unwrap_or_else(|| vec![config.network.node[0].harvest_prob])
}

fn sync_grid(config: &RunConfig) -> Vec<f64> {
    config.sweep.sync_probs.clone().unwrap_or_else(|| vec![config.network.sync_prob])
}

/// Override only when a sweep grid is configured.
fn harvest_override(config: &RunConfig, pb: f64) -> Option<f64> {
    config.sweep.harvest_probs.as_ref().map(|_| pb)
}

fn sweep_kinds(config: &RunConfig, backup: BackupKind) -> Vec<PolicyKind> {
    if let Some(kinds) = &config.sweep.kinds {
        return kinds.clone();
    }
    let mut kinds = vec![PolicyKind::from(backup)];
    for k in [
        PolicyKind::Parametric,
        PolicyKind::Orthogonal,
        PolicyKind::Symmetric,
        PolicyKind::Centralized,
    ] {
        if !kinds.contains(&k) {
            kinds.push(k);
        }
    }
    kinds
}

/// Configured initial states, or all-empty and all-full batteries.
fn initial_states(config: &RunConfig, model: &Model) -> Result<Vec<usize>> {
    let levels: Vec<Vec<usize>> = match &config.run.initial_states {
        Some(s) => s.clone(),
        None => {
            let full: Vec<usize> = config.network.node.iter().map(|n| n.capacity).collect();
            vec![vec![0; full.len()], full]
        }
    };
    levels.iter().map(|l| Ok(model.space().index(l)?)).collect()
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn solve_internal(config: &RunConfig, args: &Args, backup: BackupKind) -> Result<()> {
    let model = Model::new(config.network_config()?)?;
    let opts = config.solver_options();
    let z = vec![0.0; model.num_states()];
    let n = model.num_nodes();
    let mut tx = Csv::create(&args.out.join("txprob.csv"), &["initial_state", "slot", "node", "tx_prob"])?;
    let mut lv = Csv::create(&args.out.join("levels.csv"), &["initial_state", "slot", "node", "mean_level"])?;
    let mut bd = Csv::create(&args.out.join("bounds.csv"), &["initial_state", "trial", "upper", "lower"])?;
    for e in initial_states(config, &model)? {
        let seq = mps_solve(&model, e, &z, backup, &opts)?;
        let label = state_label(model.levels(e));
        if !seq.converged {
            eprintln!(
                "ehdec solve-internal: state {label}: gap {:.3e} open after {} trials",
                seq.gap(),
                seq.trials
            );
        }
        for (k, rule) in seq.rules.iter().enumerate() {
            let eta = &seq.occupancies[k];
            for i in 0..n {
                let slot = k.to_string();
                tx.row(&[label.clone(), slot.clone(), (i + 1).to_string(), fmt(eta.mean_action(&model, rule, i))])?;
                lv.row(&[label.clone(), slot, (i + 1).to_string(), fmt(eta.mean_level(&model, i))])?;
            }
        }
        for t in &seq.trace {
            bd.row(&[label.clone(), t.trial.to_string(), fmt(t.upper), fmt(t.lower)])?;
        }
    }
    tx.finish()?;
    lv.finish()?;
    bd.finish()?;
    Ok(())
}

fn not_converged(open: &[String]) -> Result<()> {
    if open.is_empty() {
        Ok(())
    } else {
        Err(CliError::NotConverged(format!("value iteration for {}", open.join(", "))))
    }
}

fn solve_external(config: &RunConfig, args: &Args, backup: BackupKind) -> Result<()> {
    let opts = config.external_options();
    let mut open = Vec::new();

    let mut trace = Csv::create(
        &args.out.join("via_trace.csv"),
        &["sync_prob", "kind", "iteration", "increment", "span"],
    )?;
    for beta in sync_grid(config) {
        let model = Model::new(config.network_with(beta, None)?)?;
        for kind in [PolicyKind::from(backup), PolicyKind::Centralized] {
            let sol = via_iterate(&model, kind, &opts)?;
            if !sol.converged {
                open.push(format!("{kind} at sync_prob {beta}"));
            }
            for step in &sol.trace {
                trace.row(&[
                    fmt(beta),
                    kind.to_string(),
                    step.iteration.to_string(),
                    fmt(step.increment),
                    fmt(step.span),
                ])?;
            }
        }
    }
    trace.finish()?;

    let mut gains = Csv::create(
        &args.out.join("G_vs_pB.csv"),
        &["harvest_prob", "kind", "G", "G_ssp", "iterations", "converged"],
    )?;
    for pb in harvest_grid(config) {
        let model = Model::new(config.network_with(config.network.sync_prob, harvest_override(config, pb))?)?;
        for kind in sweep_kinds(config, backup) {
            let sol = via_iterate(&model, kind, &opts)?;
            if !sol.converged {
                open.push(format!("{kind} at harvest_prob {pb}"));
            }
            gains.row(&[
                fmt(pb),
                kind.to_string(),
                fmt(sol.gain),
                fmt(sol.gain_ssp),
                sol.trace.len().to_string(),
                sol.converged.to_string(),
            ])?;
        }
    }
    gains.finish()?;
    not_converged(&open)
}

#[derive(Debug, Serialize)]
struct WindowSummary {
    initial_state: String,
    windows: usize,
    mean: f64,
    se: f64,
    analytic: f64,
}

#[derive(Debug, Serialize)]
struct Summary {
    kind: String,
    seed: u64,
    slots: usize,
    burn_in: usize,
    batches: usize,
    reward_rate: f64,
    reward_se: f64,
    analytic_rate: f64,
    z_score: f64,
    tx_freq: Vec<f64>,
    tx_freq_se: Vec<f64>,
    mean_level: Vec<f64>,
    mean_level_se: Vec<f64>,
    collisions: usize,
    syncs: usize,
    via_converged: bool,
    windows: Option<WindowSummary>,
}

fn simulate_cmd(config: &RunConfig, args: &Args, backup: BackupKind) -> Result<()> {
    let model = Model::new(config.network_config()?)?;
    let sol: ExternalSolution = via_iterate(&model, PolicyKind::from(backup), &config.external_options())?;
    let start = initial_states(config, &model)?[0];
    let sim = &config.simulation;
    let cfg = SimConfig {
        model: &model,
        policies: &sol.policies,
        slots: sim.slots,
        seed: args.seed,
        initial_state: start,
        record: true,
    };
    let trace = simulate(&cfg)?;
    let file = std::fs::File::create(args.out.join("trace.csv"))?;
    write_trace_csv(&trace, model.num_nodes(), std::io::BufWriter::new(file))?;
    let long = measure_long_run(&cfg, sim.burn_in, sim.batches)?;
    let windows = (sim.windows > 0).then(|| {
        let stats = simulate_windows(&model, &sol.policies[start], sim.windows, args.seed);
        WindowSummary {
            initial_state: state_label(model.levels(start)),
            windows: stats.windows,
            mean: stats.mean,
            se: stats.se,
            analytic: sol.window_rewards[start],
        }
    });
    let summary = Summary {
        kind: sol.kind.to_string(),
        seed: args.seed,
        slots: sim.slots,
        burn_in: sim.burn_in,
        batches: long.batches,
        reward_rate: long.reward_rate,
        reward_se: long.reward_se,
        analytic_rate: sol.gain_ssp,
        z_score: if long.reward_se > 0.0 {
            (long.reward_rate - sol.gain_ssp) / long.reward_se
        } else {
            0.0
        },
        tx_freq: long.tx_freq,
        tx_freq_se: long.tx_freq_se,
        mean_level: long.mean_level,
        mean_level_se: long.mean_level_se,
        collisions: trace.collisions,
        syncs: trace.syncs,
        via_converged: sol.converged,
        windows,
    };
    write_json(&args.out.join("summary.json"), &summary)?;
    if sol.converged {
        Ok(())
    } else {
        not_converged(&[sol.kind.to_string()])
    }
}

/// Internal policy of any kind from a SYNC at `e`, without continuation values.
fn internal_policy(model: &Model, kind: PolicyKind, e: usize, config: &RunConfig) -> Result<Option<PolicySequence>> {
    let z = vec![0.0; model.num_states()];
    Ok(match kind {
        PolicyKind::Orthogonal => Some(sequence_from_rules(model, e, orthogonal_rules(model)?, &z)),
        PolicyKind::Symmetric => Some(sequence_from_rules(model, e, symmetric_rules(model, e), &z)),
        PolicyKind::Centralized => None,
        other => {
            let backup = other.backup().expect("planner kinds have a backup");
            Some(mps_solve(model, e, &z, backup, &config.solver_options())?)
        }
    })
}

fn sweep(config: &RunConfig, args: &Args, backup: BackupKind) -> Result<()> {
    let mut out = Csv::create(
        &args.out.join("internal_sweep.csv"),
        &["harvest_prob", "initial_state", "kind", "reward", "normalized", "gap"],
    )?;
    for pb in harvest_grid(config) {
        let model = Model::new(config.network_with(config.network.sync_prob, harvest_override(config, pb))?)?;
        let upper = solve_centralized(&model, None, DEFAULT_TOL, DEFAULT_MAX_ITERS)?;
        for e in initial_states(config, &model)? {
            let label = state_label(model.levels(e));
            for kind in sweep_kinds(config, backup) {
                let (reward, gap) = match internal_policy(&model, kind, e, config)? {
                    Some(seq) => (seq.reward, seq.gap()),
                    None => (upper.values[e], 0.0),
                };
                let normalized = if upper.values[e] > 0.0 { reward / upper.values[e] } else { 0.0 };
                out.row(&[fmt(pb), label.clone(), kind.to_string(), fmt(reward), fmt(normalized), fmt(gap)])?;
            }
        }
    }
    out.finish()?;
    Ok(())
}
