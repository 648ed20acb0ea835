use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::sync::Mutex;
use std::time::Instant;

use isogm::geometry::io::{read_csv, read_ply, write_csv, write_ply};
use isogm::geometry::random_rigid;
use isogm::neural::Checkpoint;
use isogm::oracle::{check_decomposition, check_rigid_invariance, gradient_suite, ORACLE_TOL};
use isogm::trainer::{
    build_tripod, composition_networks, direct_network, run_composition, run_direct, RunOutcome,
    TrainConfig,
};
use isogm::{MlpMap, PointCloud};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::args::{ExportArgs, Format, GenerateArgs, GradArgs, Mode, OracleArgs, TrainArgs};
use crate::outputs::*;
use crate::{Failure, Status};

pub fn generate(args: &GenerateArgs) -> Result<(), Failure> {
    let spec = args.data.spec(args.seed);
    let tripod = build_tripod(&spec)?;
    write_tripod(&tripod, &spec, args.seed, &args.out, args.no_ply)?;
    println!("wrote X, Z, Y to {}", args.out.display());
    Ok(())
}

fn train_config(args: &TrainArgs, seed: u64) -> Result<TrainConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => TrainConfig::load(path)?,
        None => TrainConfig::preset(args.preset.into()),
    };
    if let Some(b) = args.batch {
        cfg.batch_n = b;
    }
    if let Some(v) = args.pretrain_iters {
        cfg.pretrain_iters = v;
    }
    if let Some(v) = args.k_outer {
        cfg.k_outer = v;
    }
    if let Some(v) = args.k_inner {
        cfg.k_inner = v;
    }
    if let Some(v) = args.direct_iters {
        cfg.direct_iters = v;
    }
    cfg = cfg.with_seed(seed);
    cfg.validate()?;
    Ok(cfg)
}

pub fn train(args: &TrainArgs) -> Result<(), Failure> {
    match args.seed.as_slice() {
        [seed] => train_one(args, *seed, &args.out),
        seeds => train_many(args, seeds),
    }
}

fn train_one(args: &TrainArgs, seed: u64, out: &Path) -> Result<(), Failure> {
    let cfg = train_config(args, seed)?;
    let spec = args.data.spec(seed);
    let tripod = build_tripod(&spec)?;
    write_tripod(&tripod, &spec, seed, out, false)?;
    let run_dir = out.join(args.mode.as_str());
    let ck_dir = run_dir.join("checkpoints");
    create_dir(&ck_dir)?;
    cfg.save(&run_dir.join("config.json"))?;
    if args.dry_run {
        println!("wrote {}", run_dir.join("config.json").display());
        return Ok(());
    }

    let start = Instant::now();
    let (mut nets, steps, result): (Vec<(&str, MlpMap)>, usize, _) = match args.mode {
        Mode::Composition => {
            let (mut phi, mut tmap) = composition_networks(&cfg)?;
            let r = run_composition(&tripod, &cfg, &mut phi, &mut tmap);
            (vec![("phi", phi), ("t", tmap)], cfg.composition_steps(), r)
        }
        Mode::Direct => {
            let mut net = direct_network(&cfg)?;
            let r = run_direct(&tripod, &cfg, &mut net);
            (vec![("direct", net)], cfg.direct_iters, r)
        }
    };
    let runtime = start.elapsed().as_secs_f64();
    if let Ok(outcome) = &result {
        nets = nets
            .iter()
            .zip(&outcome.networks)
            .map(|((name, _), net)| (*name, net.clone()))
            .collect();
    }
    // checkpoints are written either way; after an abort they hold the last good step
    for (name, net) in &nets {
        Checkpoint::capture(net, steps as u64).save(&ck_dir.join(format!("{name}.json")))?;
    }

    let mut summary = Summary {
        mode: args.mode.as_str().to_string(),
        seed,
        status: "ok".into(),
        error: None,
        eval_divergence: None,
        eval_divergence_train: None,
        gradient_steps: steps,
        solver_warnings: 0,
        final_losses: None,
        runtime_seconds: runtime,
        config: cfg.clone(),
        data: spec.clone(),
    };
    match result {
        Ok(outcome) => {
            finish_run(&outcome, &run_dir, &mut summary)?;
            write_json(&summary, &run_dir.join("summary.json"))?;
            println!(
                "{} seed {seed}: eval divergence {:.6} (training clouds {:.6}), {:.1} s",
                args.mode.as_str(),
                outcome.eval_heldout,
                outcome.eval_train,
                runtime
            );
            Ok(())
        }
        Err(err) => {
            summary.status = "aborted".into();
            summary.error = Some(err.to_string());
            write_json(&summary, &run_dir.join("summary.json"))?;
            Err(Failure::new(
                Status::of(&err),
                format!("{err}; last good checkpoints in {}", ck_dir.display()),
            ))
        }
    }
}

fn finish_run(outcome: &RunOutcome, run_dir: &Path, summary: &mut Summary) -> Result<(), Failure> {
    write_cloud(&outcome.mapped, run_dir, "mapped_points", false)?;
    write_cloud(&outcome.mapped_eval, run_dir, "mapped_points_eval", true)?;
    outcome.log.write_csv(&run_dir.join("train_log.csv"))?;
    summary.eval_divergence = Some(outcome.eval_heldout);
    summary.eval_divergence_train = Some(outcome.eval_train);
    summary.solver_warnings = outcome.log.solver_warnings;
    summary.final_losses = outcome.log.records.last().map(|r| FinalLosses {
        fitting_loss: r.fitting_loss,
        gm_gap: r.gm_gap,
        total_loss: r.total_loss,
    });
    Ok(())
}

/// Runs each seed in its own child process, at most `jobs` at a time.
fn train_many(args: &TrainArgs, seeds: &[u64]) -> Result<(), Failure> {
    let exe = std::env::current_exe().map_err(|e| Failure::new(Status::Io, e.to_string()))?;
    let queue = Mutex::new(seeds.iter().copied());
    let worst = Mutex::new(0u8);
    std::thread::scope(|scope| {
        for _ in 0..args.jobs.max(1).min(seeds.len()) {
            scope.spawn(|| loop {
                let Some(seed) = queue.lock().expect("queue lock").next() else {
                    break;
                };
                let out = args.out.join(format!("seed-{seed}"));
                let code = match Process::new(&exe).args(child_args(args, seed, &out)).status() {
                    Ok(status) => status.code().unwrap_or(Status::Solver as i32) as u8,
                    Err(e) => {
                        eprintln!("seed {seed}: could not start worker: {e}");
                        Status::Io as u8
                    }
                };
                let mut w = worst.lock().expect("status lock");
                *w = (*w).max(code);
            });
        }
    });
    match worst.into_inner().expect("status lock") {
        0 => Ok(()),
        code => {
            let status = [Status::Config, Status::Solver, Status::Oracle, Status::Io]
                .into_iter()
                .find(|s| *s as u8 == code)
                .unwrap_or(Status::Solver);
            Err(Failure::new(status, "at least one seed failed"))
        }
    }
}

fn child_args(args: &TrainArgs, seed: u64, out: &Path) -> Vec<String> {
    let mut v: Vec<String> = vec![
        "train".into(),
        "--seed".into(),
        seed.to_string(),
        "--mode".into(),
        args.mode.as_str().into(),
        "--preset".into(),
        match args.preset {
            crate::args::PresetArg::Paper => "paper".into(),
            crate::args::PresetArg::Desk => "desk".into(),
        },
        "--out".into(),
        out.display().to_string(),
    ];
    if let Some(c) = &args.config {
        v.extend(["--config".into(), c.display().to_string()]);
    }
    let opts = [
        ("--batch", args.batch),
        ("--pretrain-iters", args.pretrain_iters),
        ("--k-outer", args.k_outer),
        ("--k-inner", args.k_inner),
        ("--direct-iters", args.direct_iters),
    ];
    for (flag, value) in opts {
        if let Some(x) = value {
            v.extend([flag.to_string(), x.to_string()]);
        }
    }
    if args.dry_run {
        v.push("--dry-run".into());
    }
    v.extend(args.data.to_flags());
    v
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct OracleInstance {
    index: usize,
    seed: u64,
    gm_source_target: f64,
    gm_reference_target: f64,
    invariance_residual: f64,
    composed_distortion: f64,
    decomposition_residual: f64,
    passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct OracleReport {
    seed: u64,
    n: usize,
    isomorphic: bool,
    tolerance: f64,
    all_passed: bool,
    instances: Vec<OracleInstance>,
}

fn gaussian_cloud(n: usize, rng: &mut ChaCha8Rng) -> Result<PointCloud, Failure> {
    let pts = Array2::from_shape_fn((n, 3), |_| StandardNormal.sample(rng));
    Ok(PointCloud::new(pts)?)
}

pub fn oracle_check(args: &OracleArgs) -> Result<(), Failure> {
    let mut instances = Vec::with_capacity(args.instances);
    for index in 0..args.instances {
        let seed = args.seed.wrapping_add(index as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let source = gaussian_cloud(args.n, &mut rng)?;
        let rigid = random_rigid(3, 1.0, seed.wrapping_add(1 << 32))?;
        let target = if args.isomorphic {
            random_rigid(3, 1.0, seed.wrapping_add(2 << 32))?.apply(&source)?
        } else {
            gaussian_cloud(args.n, &mut rng)?
        };
        let inv = check_rigid_invariance(&source, &rigid, &target)?;
        let dec = check_decomposition(&source, &rigid, &target)?;
        let mut passed = inv.passed && dec.passed;
        if args.isomorphic {
            passed &= inv.gm_source_target.abs() <= ORACLE_TOL;
        }
        instances.push(OracleInstance {
            index,
            seed,
            gm_source_target: inv.gm_source_target,
            gm_reference_target: inv.gm_reference_target,
            invariance_residual: inv.residual,
            composed_distortion: dec.composed_distortion,
            decomposition_residual: dec.residual,
            passed,
        });
    }
    let all_passed = instances.iter().all(|i| i.passed);
    let report = OracleReport {
        seed: args.seed,
        n: args.n,
        isomorphic: args.isomorphic,
        tolerance: ORACLE_TOL,
        all_passed,
        instances,
    };
    if let Some(out) = &args.out {
        write_json(&report, out)?;
    }
    let worst = report
        .instances
        .iter()
        .map(|i| i.invariance_residual.max(i.decomposition_residual))
        .fold(0.0, f64::max);
    println!(
        "{} instances (n = {}): max residual {worst:.3e}, {}",
        report.instances.len(),
        report.n,
        if all_passed { "all passed" } else { "FAILED" }
    );
    if all_passed {
        Ok(())
    } else {
        Err(Failure::new(Status::Oracle, "oracle residual above tolerance"))
    }
}

pub fn gradcheck(args: &GradArgs) -> Result<(), Failure> {
    let checks = gradient_suite(args.seed)?;
    for c in &checks {
        println!(
            "{:<22} rel err {:.3e} (tol {:.0e}) {}",
            c.name,
            c.relative_error,
            c.tolerance,
            if c.passed { "ok" } else { "FAILED" }
        );
    }
    if let Some(out) = &args.out {
        write_json(&checks, out)?;
    }
    if checks.iter().all(|c| c.passed) {
        Ok(())
    } else {
        Err(Failure::new(Status::Oracle, "gradient check failed"))
    }
}

/// Point files every complete run directory holds, relative to it.
const POINT_FILES: [&str; 5] = [
    "X",
    "Z",
    "Y",
    "composition/mapped_points",
    "direct/mapped_points",
];

pub fn export(args: &ExportArgs) -> Result<(), Failure> {
    let run = &args.run;
    let (from, to) = match args.to {
        Format::Ply => ("csv", "ply"),
        Format::Csv => ("ply", "csv"),
    };
    let required: Vec<PathBuf> = POINT_FILES
        .iter()
        .map(|stem| PathBuf::from(format!("{stem}.{from}")))
        .chain(
            ["composition", "direct"]
                .iter()
                .flat_map(|m| [format!("{m}/summary.json"), format!("{m}/train_log.csv")])
                .map(PathBuf::from),
        )
        .collect();
    let missing: Vec<String> = required
        .iter()
        .filter(|p| !run.join(p).is_file())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Failure::new(
            Status::Io,
            format!(
                "{}: missing {}; expected the output of `isogm train` in both modes",
                run.display(),
                missing.join(", ")
            ),
        ));
    }
    for stem in POINT_FILES {
        let src = run.join(format!("{stem}.{from}"));
        let dst = run.join(format!("{stem}.{to}"));
        let cloud = match args.to {
            Format::Ply => read_csv(&src)?,
            Format::Csv => read_ply(&src)?,
        };
        match args.to {
            Format::Ply => write_ply(&cloud, &dst)?,
            Format::Csv => write_csv(&cloud, &dst)?,
        }
    }

    let comp: Summary = read_json(&run.join("composition/summary.json"))?;
    let direct: Summary = read_json(&run.join("direct/summary.json"))?;
    if comp.seed != direct.seed {
        return Err(Failure::new(
            Status::Config,
            format!("composition seed {} differs from direct seed {}", comp.seed, direct.seed),
        ));
    }
    let manifest = Manifest {
        seed: comp.seed,
        source: "X.csv".into(),
        reference: "Z.csv".into(),
        target: "Y.csv".into(),
        panels: Panels {
            target: "Y.csv".into(),
            composed: "composition/mapped_points.csv".into(),
            direct: "direct/mapped_points.csv".into(),
        },
        train_logs: ModePaths {
            composition: "composition/train_log.csv".into(),
            direct: "direct/train_log.csv".into(),
        },
        summaries: ModePaths {
            composition: "composition/summary.json".into(),
            direct: "direct/summary.json".into(),
        },
        eval_divergence: ModeValues {
            composition: comp.eval_divergence,
            direct: direct.eval_divergence,
        },
        config: ModeConfigs {
            composition: comp.config,
            direct: direct.config,
        },
    };
    write_json(&manifest, &run.join("manifest.json"))?;
    println!("wrote {}", run.join("manifest.json").display());
    Ok(())
}
