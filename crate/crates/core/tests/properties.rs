use ehdec::bounds::BoundPointSet;
use ehdec::external::external_kernel;
use ehdec::internal::{
    evaluate_sequence, exhaustive_backup, initial_bounds, mps_solve, parametric_backup, phi, wcsp_backup,
    BackupContext, BackupKind, SolverOptions,
};
use ehdec::model::{node_transition, DecisionRule, Model, NetworkConfig, NodeParams};
use ehdec::occupancy::{update, Occupancy};
use ehdec::reward::single_user_reward;
use ehdec::wcsp::{solve_wcsp, CostFunction, WcspInstance};
use proptest::prelude::*;

fn tiny(caps: (usize, usize), levels: usize, pb: f64, beta: f64) -> Model {
    let nodes = vec![NodeParams::new(caps.0, 1, pb, 6.0), NodeParams::new(caps.1, 1, pb, 3.0)];
    Model::new(NetworkConfig::new(nodes, levels, beta, 0.3).unwrap()).unwrap()
}

fn tiny_model() -> impl Strategy<Value = Model> {
    (1usize..=2, 1usize..=2, 2usize..=3, 0.0f64..=1.0, 0.3f64..=0.9)
        .prop_map(|(c0, c1, levels, pb, beta)| tiny((c0, c1), levels, pb, beta))
}

fn occupancy(size: usize, weights: &[f64]) -> Occupancy {
    Occupancy::from_entries((0..size).map(|s| (s, weights[s % weights.len()])).collect())
}

fn random_rule(model: &Model, picks: &[usize]) -> DecisionRule {
    let mut rule = DecisionRule::idle(model.config());
    let mut it = picks.iter().cycle();
    for i in 0..model.num_nodes() {
        let node = model.node(i);
        for level in node.tx_cost..=node.capacity {
            rule.set(i, level, it.next().unwrap() % model.action_levels());
        }
    }
    rule
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gain_is_increasing_and_concave(snr in 0.5f64..20.0, a in 0.01f64..0.98, d in 0.001f64..0.01) {
        let (lo, mid, hi) = (single_user_reward(a, snr), single_user_reward(a + d, snr), single_user_reward(a + 2.0 * d, snr));
        prop_assert!(lo < mid && mid < hi);
        prop_assert!(lo + hi <= 2.0 * mid + 1e-12);
        prop_assert_eq!(single_user_reward(0.0, snr), 0.0);
    }

    #[test]
    fn node_transition_is_a_distribution(cap in 1usize..10, m in 1usize..4, level in 0usize..10, a in 0.0f64..=1.0, pb in 0.0f64..=1.0) {
        prop_assume!(m <= cap && level <= cap);
        let a = if level < m { 0.0 } else { a };
        let params = NodeParams::new(cap, m, pb, 3.0);
        let next = node_transition(level, a, &params).unwrap();
        let total: f64 = next.iter().map(|&(_, p)| p).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for &(l, p) in &next {
            prop_assert!(l <= cap && p >= 0.0);
            prop_assert!(l + m >= level, "drained more than one cost");
        }
    }

    #[test]
    fn update_is_linear_and_preserves_mass(
        model in tiny_model(),
        w1 in prop::collection::vec(0.01f64..1.0, 9),
        w2 in prop::collection::vec(0.01f64..1.0, 9),
        picks in prop::collection::vec(0usize..3, 8),
        mix in 0.05f64..0.95,
    ) {
        let size = model.num_states();
        let rule = random_rule(&model, &picks);
        let (e1, e2) = (occupancy(size, &w1), occupancy(size, &w2));
        let dense: Vec<f64> = (0..size).map(|s| mix * e1.get(s) + (1.0 - mix) * e2.get(s)).collect();
        let mixed = update(&model, &Occupancy::from_dense(&dense), &rule);
        let (u1, u2) = (update(&model, &e1, &rule), update(&model, &e2, &rule));
        prop_assert!((mixed.total() - 1.0).abs() < 1e-9);
        for s in 0..size {
            prop_assert!((mixed.get(s) - (mix * u1.get(s) + (1.0 - mix) * u2.get(s))).abs() < 1e-9);
        }
    }

    #[test]
    fn sawtooth_stays_between_points_and_corners(
        corners in prop::collection::vec(0.0f64..10.0, 6),
        points in prop::collection::vec((prop::collection::vec(0.0f64..1.0, 6), 0.0f64..1.0), 1..8),
        query in prop::collection::vec(0.0f64..1.0, 6),
    ) {
        let mut set = BoundPointSet::new(corners);
        let eta = Occupancy::from_dense(&query);
        prop_assume!(eta.total() > 0.0);
        let mut last = set.sawtooth(&eta);
        prop_assert!((last - set.y0(&eta)).abs() < 1e-12);
        for (w, frac) in points {
            let p = Occupancy::from_dense(&w);
            if p.total() == 0.0 {
                continue;
            }
            let value = frac * set.y0(&p);
            set.insert(p.clone(), value);
            // Adding information never loosens the bound.
            let now = set.sawtooth(&eta);
            prop_assert!(now <= last + 1e-12);
            prop_assert!(set.sawtooth(&p) <= value + 1e-9);
            prop_assert!(now <= set.y0(&eta) + 1e-12);
            let dense = eta.to_dense(6);
            prop_assert!((set.sawtooth_dense(&dense) - now).abs() < 1e-9);
            last = now;
        }
    }

    #[test]
    fn wcsp_matches_enumeration(
        domains in prop::collection::vec(2usize..4, 2..5),
        seeds in prop::collection::vec(-5.0f64..5.0, 64),
        scopes in prop::collection::vec((0usize..5, 0usize..5), 1..5),
    ) {
        let n = domains.len();
        let mut next = seeds.iter().cycle();
        let mut functions = Vec::new();
        for (a, b) in scopes {
            let (a, b) = (a % n, b % n);
            let scope = if a == b { vec![a] } else { vec![a, b] };
            let size: usize = scope.iter().map(|&v| domains[v]).product();
            let table = (0..size).map(|_| *next.next().unwrap()).collect();
            functions.push(CostFunction::new(scope, table, &domains).unwrap());
        }
        let inst = WcspInstance::new(domains.clone(), functions);
        let mut best = f64::INFINITY;
        let mut x = vec![0usize; n];
        loop {
            best = best.min(inst.total_cost(&x));
            let mut i = 0;
            while i < n && x[i] + 1 == domains[i] {
                x[i] = 0;
                i += 1;
            }
            if i == n {
                break;
            }
            x[i] += 1;
        }
        let sol = solve_wcsp(&inst).unwrap();
        prop_assert!((sol.cost - best).abs() < 1e-9, "{} vs {}", sol.cost, best);
        prop_assert!((inst.total_cost(&sol.assignment) - sol.cost).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn backups_are_ordered_and_honest(
        model in tiny_model(),
        weights in prop::collection::vec(0.0f64..1.0, 9),
        zs in prop::collection::vec(0.0f64..2.0, 9),
        k in 0usize..3,
    ) {
        let size = model.num_states();
        let eta = occupancy(size, &weights);
        prop_assume!(eta.total() > 0.0);
        let z: Vec<f64> = (0..size).map(|s| zs[s]).collect();
        let k = k.min(model.horizon());
        let bounds = initial_bounds(&model, &z, 500);
        let ctx = BackupContext { model: &model, k, z: &z, next: &bounds[k + 1] };
        let exact = exhaustive_backup(&ctx, &eta, 1e7).unwrap();
        let wcsp = wcsp_backup(&ctx, &eta, 200_000).unwrap();
        let param = parametric_backup(&ctx, &eta, 0);
        let tol = 1e-9 * (1.0 + exact.value.abs());
        prop_assert!(exact.value + tol >= wcsp.value);
        prop_assert!(wcsp.value + tol >= param.value);
        prop_assert!(wcsp.bound + tol >= exact.value);
        prop_assert!(exact.bound + tol >= exact.value);
        for r in [&exact, &wcsp, &param] {
            let truth = phi(&model, &eta, &r.rule, k, &z) + bounds[k + 1].sawtooth(&update(&model, &eta, &r.rule));
            prop_assert!((truth - r.value).abs() < tol, "{} vs {}", truth, r.value);
        }
    }

    #[test]
    fn planner_value_is_sandwiched(
        model in tiny_model(),
        zs in prop::collection::vec(0.0f64..2.0, 9),
        start in 0usize..9,
        backup in prop::sample::select(vec![BackupKind::Exhaustive, BackupKind::Wcsp]),
    ) {
        let size = model.num_states();
        let z: Vec<f64> = (0..size).map(|s| zs[s]).collect();
        let start = start % size;
        let opts = SolverOptions { max_trials: 30, ..SolverOptions::default() };
        let seq = mps_solve(&model, start, &z, backup, &opts).unwrap();
        let eval = evaluate_sequence(&model, start, &seq.rules, &z);
        prop_assert!((eval.value - seq.value).abs() < 1e-9);
        prop_assert!(seq.lower_bound <= seq.upper_bound + 1e-9);
        prop_assert!((seq.lower_bound - seq.value).abs() < 1e-9);
        let mut last = f64::INFINITY;
        for t in &seq.trace {
            prop_assert!(t.lower <= t.upper + 1e-9);
            prop_assert!(t.upper <= last + 1e-12);
            last = t.upper;
        }
    }

    #[test]
    fn reward_and_kernel_weights_agree(model in tiny_model(), start in 0usize..9, picks in prop::collection::vec(0usize..3, 8)) {
        let size = model.num_states();
        let start = start % size;
        let rules = vec![random_rule(&model, &picks); model.horizon() + 1];
        let eval = evaluate_sequence(&model, start, &rules, &vec![0.0; size]);
        let weighted: f64 = eval.slot_rewards.iter().enumerate().map(|(k, r)| model.slot_weight(k) * r).sum();
        prop_assert!((weighted - eval.reward).abs() < 1e-12);
        let seq = ehdec::internal::sequence_from_rules(&model, start, rules, &vec![0.0; size]);
        let row = external_kernel(&model, &seq);
        prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
