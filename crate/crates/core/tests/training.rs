use isogm::neural::Checkpoint;
use isogm::trainer::{
    build_tripod, composition_networks, direct_network, pretrain_phi, run_composition, run_direct,
    DataSpec, Preset, Stage, TrainConfig,
};

fn small_config(seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig::desk().with_seed(seed);
    cfg.batch_n = 48;
    cfg.hidden = vec![32, 16, 16];
    cfg.pretrain_iters = 40;
    cfg.k_outer = 2;
    cfg.k_inner = 15;
    cfg.direct_iters = cfg.composition_steps();
    cfg
}

fn small_data(seed: u64) -> DataSpec {
    let mut spec = DataSpec::for_seed(seed);
    spec.n_total = 200;
    spec.n_eval = 100;
    spec
}

#[test]
fn paper_preset_values() {
    let cfg = TrainConfig::preset(Preset::Paper);
    assert_eq!(cfg.lambda_gm, 1.0);
    assert_eq!(cfg.eps_fit_phi, 0.01);
    assert_eq!(cfg.eps_fit_t, 0.001);
    assert_eq!(cfg.eps_gw, 0.001);
    assert_eq!(cfg.eps_eval, 0.1);
    assert_eq!(cfg.eta_phi, 1e-3);
    assert_eq!(cfg.eta_t, 1e-4);
    assert_eq!(cfg.batch_n, 1024);
    assert_eq!(cfg.hidden, vec![128, 64, 64]);
    assert_eq!((cfg.k_outer, cfg.k_inner, cfg.pretrain_iters), (5, 2000, 5000));
}

#[test]
fn desk_budget_is_matched() {
    let cfg = TrainConfig::desk();
    assert_eq!(cfg.composition_steps(), 1500 + 5 * 401);
    assert_eq!(cfg.direct_iters, cfg.composition_steps());
}

#[test]
fn composition_run_is_reproducible() {
    let tripod = build_tripod(&small_data(3)).unwrap();
    let cfg = small_config(3);
    let run = || {
        let (mut phi, mut t) = composition_networks(&cfg).unwrap();
        let out = run_composition(&tripod, &cfg, &mut phi, &mut t).unwrap();
        let cks: Vec<String> = out
            .networks
            .iter()
            .map(|n| serde_json::to_string(&Checkpoint::capture(n, 0)).unwrap())
            .collect();
        let losses: Vec<(f64, f64)> = out.log.records.iter().map(|r| (r.total_loss, r.gm_gap)).collect();
        (cks, losses, out.eval_heldout, out.mapped)
    };
    let a = run();
    let b = run();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
    assert_eq!(a.2.to_bits(), b.2.to_bits());
    assert_eq!(a.3, b.3);
}

#[test]
fn log_follows_the_loop_structure() {
    let tripod = build_tripod(&small_data(4)).unwrap();
    let cfg = small_config(4);
    let (mut phi, mut t) = composition_networks(&cfg).unwrap();
    let out = run_composition(&tripod, &cfg, &mut phi, &mut t).unwrap();
    let count = |s: Stage| out.log.records.iter().filter(|r| r.stage == s).count();
    assert_eq!(count(Stage::Pretrain), cfg.pretrain_iters);
    assert_eq!(count(Stage::Outer), cfg.k_outer);
    assert_eq!(count(Stage::Inner), cfg.k_outer * cfg.k_inner);
    assert_eq!(out.log.records.len(), cfg.composition_steps());

    let mut net = direct_network(&cfg).unwrap();
    let direct = run_direct(&tripod, &cfg, &mut net).unwrap();
    assert_eq!(direct.log.records.len(), cfg.direct_iters);
    assert!(direct.eval_heldout.is_finite() && out.eval_heldout.is_finite());
}

#[test]
fn pretraining_lowers_the_loss() {
    let mut spec = small_data(5);
    spec.n_total = 400;
    let tripod = build_tripod(&spec).unwrap();
    let mut cfg = small_config(5);
    cfg.batch_n = 64;
    let (mut phi, _) = composition_networks(&cfg).unwrap();
    let log = pretrain_phi(&mut phi, &tripod.source, &tripod.reference, &cfg, 300).unwrap();
    let totals: Vec<f64> = log.records.iter().map(|r| r.total_loss).collect();
    let median = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    };
    let k = totals.len() / 10;
    let first = median(&totals[..k]);
    let last = median(&totals[totals.len() - k..]);
    assert!(last < first, "first {first}, last {last}");
}
