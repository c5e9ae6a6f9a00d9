use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Args;
use rayon::prelude::*;
use schelling_core::dynamics::{first_divergence, run_observed, RunOptions, RunRecord, UpdateOrder};
use schelling_core::experiments::{
    classify_result, phase_csv, plant_and_run, prediction_name, run_trials, split_seed, sweep_phase, tau_grid,
    trials_csv, Plant, CLAUSE_TAU_PAIRS,
};
use schelling_core::lattice::{build_counts, parse_fraction, ppm_frames, random_config};
use schelling_core::math::{kappa_2d, kappa_3d, min_gap, prob_event_exact, ExactEvent, Relation, GAP_TABLE_TAUS};
use schelling_core::structures::{
    dagger_report, event_scan_csv, scan_events, EventFamily, EventKind, Region, DEFAULT_DIRECTIONS,
};
use schelling_core::{Dim, Fraction, NodeType, VERSION};

use crate::output::{ensure_dir, mark_partial, run_stem, tau_label, write_artifact};
use crate::{dim_of, model_params, parse_tau, ModelArgs, OutArgs, Usage};

fn usage<E: std::fmt::Display>(e: E) -> anyhow::Error {
    Usage(e.to_string()).into()
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(w.into_inner()?)
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stage cap (default 4n).
    #[arg(long)]
    max_stages: Option<u64>,
    /// Visit hopeful nodes in a seeded random order instead of lexicographically.
    #[arg(long)]
    shuffled: bool,
    /// Write PPM frames of the initial and final configurations.
    #[arg(long)]
    ppm: bool,
    /// Also write a frame every k stages (implies --ppm).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    snapshot_every: Option<u64>,
    /// Embed the final configuration in the JSON record.
    #[arg(long)]
    embed_final: bool,
    /// Run this many independent seeds derived from --seed and write a trials CSV.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    trials: Option<u64>,
    /// Tolerance for the behaviour labels.
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[command(flatten)]
    out: OutArgs,
}

fn frame_names(stem: &str, stage: u64, dim: Dim, count: usize) -> Vec<String> {
    match dim {
        Dim::Two => vec![format!("{stem}_stage{stage:05}.ppm")],
        Dim::Three => (0..count).map(|z| format!("{stem}_stage{stage:05}_z{z:03}.ppm")).collect(),
    }
}

pub fn simulate(a: SimulateArgs) -> Result<ExitCode> {
    let params = a.model.params()?;
    if !(a.epsilon > 0.0 && a.epsilon < 0.5) {
        return Err(usage("--epsilon must lie in (0, 1/2)"));
    }
    let dir = a.out.out_dir.as_path();
    ensure_dir(dir)?;
    let order = if a.shuffled { UpdateOrder::Shuffled { seed: a.seed } } else { UpdateOrder::Lexicographic };
    let opts = RunOptions { max_stages: a.max_stages, order };

    if let Some(k) = a.trials {
        let seeds: Vec<u64> = (0..k).map(|i| split_seed(a.seed, i)).collect();
        let stats = run_trials(&params, &seeds, a.epsilon, &opts)?;
        let name = format!("{}_trials{k}.csv", run_stem(&params, a.seed));
        let path = write_artifact(dir, &name, trials_csv(&stats.records).as_bytes())?;
        println!("runs {}", stats.runs);
        println!("mean_unchanged_fraction {:.6}", stats.mean_unchanged_fraction);
        println!("mean_alpha_fraction {:.6}", stats.mean_alpha_fraction_final);
        println!("majority {}", stats.votes.majority());
        println!("wrote {}", path.display());
        return Ok(ExitCode::SUCCESS);
    }

    let stem = run_stem(&params, a.seed);
    let ppm = a.ppm || a.snapshot_every.is_some();
    let initial = random_config(&params, a.seed)?;
    let mut frame_err: Option<anyhow::Error> = None;
    let mut write_frames = |stage: u64, frames: Vec<Vec<u8>>| {
        if frame_err.is_some() {
            return;
        }
        for (name, bytes) in frame_names(&stem, stage, params.dim, frames.len()).iter().zip(&frames) {
            if let Err(e) = write_artifact(dir, name, bytes) {
                frame_err = Some(e);
                return;
            }
        }
    };
    if ppm {
        write_frames(0, ppm_frames(&initial, &build_counts(&initial)));
    }
    let mut last_written = 0;
    let result = run_observed(initial, a.seed, &opts, |v| {
        if let Some(k) = a.snapshot_every {
            if v.report.stage % k == 0 {
                write_frames(v.report.stage, ppm_frames(v.config, v.counts));
                last_written = v.report.stage;
            }
        }
    });
    if ppm && last_written != result.stages() {
        write_frames(result.stages(), ppm_frames(&result.final_config, &build_counts(&result.final_config)));
    }
    if let Some(e) = frame_err {
        return Err(e);
    }

    let record = RunRecord::from_result(&result, a.embed_final);
    let json = write_artifact(dir, &format!("{stem}.json"), record.to_json().as_bytes())?;
    let rows = result
        .reports
        .iter()
        .map(|r| vec![r.stage.to_string(), r.flips.to_string(), r.alpha_count.to_string(), r.lyapunov.to_string()]);
    let stages_csv = csv_text(&["stage", "flips", "alpha_count", "lyapunov"], rows)?;
    if let Err(e) = write_artifact(dir, &format!("{stem}_stages.csv"), &stages_csv) {
        mark_partial(&json);
        return Err(e);
    }
    println!("stages {}", result.stages());
    println!("terminated {}", result.terminated);
    println!("unchanged_fraction {:.6}", result.unchanged_fraction());
    println!("alpha_fraction {:.6}", result.final_config.alpha_fraction());
    println!("label {}", classify_result(&result, a.epsilon)?);
    println!("wrote {}", json.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(2..=3))]
    dim: u8,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    w: usize,
    /// Comma-separated alpha intolerances.
    #[arg(long, value_delimiter = ',', value_parser = parse_tau, required = true)]
    alphas: Vec<Fraction>,
    /// Comma-separated beta intolerances.
    #[arg(long, value_delimiter = ',', value_parser = parse_tau, required = true)]
    betas: Vec<Fraction>,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    seeds_per_cell: u64,
    /// Master seed; per-cell seeds are derived from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long)]
    max_stages: Option<u64>,
    #[command(flatten)]
    out: OutArgs,
}

pub fn sweep(a: SweepArgs) -> Result<ExitCode> {
    let zero = Fraction::from_integer(0);
    let base = model_params(a.dim, a.n, a.w, zero, zero)?;
    if !(a.epsilon > 0.0 && a.epsilon < 0.5) {
        return Err(usage("--epsilon must lie in (0, 1/2)"));
    }
    let dir = a.out.out_dir.as_path();
    ensure_dir(dir)?;
    let grid = tau_grid(&a.alphas, &a.betas);
    let opts = RunOptions { max_stages: a.max_stages, ..RunOptions::default() };
    let cells = sweep_phase(&grid, &base, a.seeds_per_cell as usize, a.epsilon, a.seed, &opts)?;
    let name = format!("sweep_{}d_n{}_w{}_k{}_seed{}.csv", a.dim, a.n, a.w, a.seeds_per_cell, a.seed);
    let path = write_artifact(dir, &name, phase_csv(&cells).as_bytes())?;
    for c in &cells {
        println!(
            "{:>8} {:>8}  {:<12} predicted {}",
            tau_label(c.tau_alpha),
            tau_label(c.tau_beta),
            c.label.name(),
            prediction_name(c.predicted)
        );
    }
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Args, Debug)]
pub struct ThresholdsArgs {
    /// Comma-separated intolerances for the gap table (default: the standard eight).
    #[arg(long, value_delimiter = ',')]
    taus: Vec<f64>,
    /// Also write thresholds.csv to the output directory.
    #[arg(long)]
    csv: bool,
    #[command(flatten)]
    out: OutArgs,
}

fn fmt_gap(g: Option<f64>) -> String {
    g.map_or_else(|| "-".to_string(), |v| format!("{v:.9}"))
}

pub fn thresholds(a: ThresholdsArgs) -> Result<ExitCode> {
    let taus = if a.taus.is_empty() { GAP_TABLE_TAUS.to_vec() } else { a.taus };
    if let Some(t) = taus.iter().find(|t| !(**t > 0.0 && **t < 0.5)) {
        return Err(usage(format!("gap table needs intolerances in (0, 1/2), got {t}")));
    }
    let (k2, k3) = (kappa_2d(), kappa_3d());
    println!("kappa_2d  {:.12}  residual {:.1e}", k2.value, k2.residual);
    println!("kappa_3d  {:.12}  residual {:.1e}", k3.value, k3.residual);
    println!();
    println!("{:>9}  {:>12}  {:>12}", "tau_alpha", "gap_2d", "gap_3d");
    let rows: Vec<(f64, Option<f64>, Option<f64>)> =
        taus.iter().map(|&t| (t, min_gap(t, Relation::TwoD).ok(), min_gap(t, Relation::ThreeD).ok())).collect();
    for (t, g2, g3) in &rows {
        println!("{t:>9}  {:>12}  {:>12}", fmt_gap(*g2), fmt_gap(*g3));
    }
    if a.csv {
        let dir = a.out.out_dir.as_path();
        ensure_dir(dir)?;
        let mut lines = vec![
            vec!["kappa_2d".into(), String::new(), format!("{:.15}", k2.value)],
            vec!["kappa_3d".into(), String::new(), format!("{:.15}", k3.value)],
        ];
        for (t, g2, g3) in &rows {
            for (name, g) in [("gap_2d", g2), ("gap_3d", g3)] {
                if let Some(v) = g {
                    lines.push(vec![name.into(), t.to_string(), format!("{v:.15}")]);
                }
            }
        }
        let path = write_artifact(dir, "thresholds.csv", &csv_text(&["quantity", "tau_alpha", "value"], lines)?)?;
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Args, Debug)]
pub struct EventsArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated event names: uh, ruh, ln, rn, pn, ju, rju, euh, eju, pn3d.
    #[arg(long, value_delimiter = ',', required = true)]
    event: Vec<EventFamily>,
    #[arg(long = "type", default_value = "alpha")]
    node_type: NodeType,
    /// Event threshold (default: the intolerance of --type).
    #[arg(long, value_parser = parse_tau)]
    tau: Option<Fraction>,
    /// Share for the partial-neighbourhood events.
    #[arg(long, value_parser = parse_tau)]
    gamma: Option<Fraction>,
    /// Scan only nodes whose coordinates are multiples of this.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    stride: u64,
    /// Scan the final configuration of a run instead of the initial one.
    #[arg(long)]
    after_run: bool,
    /// Estimate probabilities from this many fresh random patches instead of scanning.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    trials: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_DIRECTIONS)]
    directions: usize,
    #[command(flatten)]
    out: OutArgs,
}

fn exact_event(f: EventFamily) -> Option<ExactEvent> {
    match f {
        EventFamily::Uh => Some(ExactEvent::Uh),
        EventFamily::Ruh => Some(ExactEvent::Ruh),
        EventFamily::Ln => Some(ExactEvent::Ln),
        EventFamily::Euh => Some(ExactEvent::Euh),
        _ => None,
    }
}

pub fn events(a: EventsArgs) -> Result<ExitCode> {
    let params = a.model.params()?;
    let tau = a.tau.unwrap_or_else(|| params.tau(a.node_type));
    let kinds = a
        .event
        .iter()
        .map(|&f| {
            if f.needs_gamma() {
                let g = a.gamma.ok_or_else(|| usage(format!("event {f} needs --gamma")))?;
                EventKind::partial(f, a.node_type, tau, g).map_err(usage)
            } else {
                EventKind::new(f, a.node_type, tau).map_err(usage)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    for k in &kinds {
        if let Some(d) = k.family.required_dim() {
            if d != params.dim {
                return Err(usage(format!("event {} needs a {}D lattice", k.family, d.rank())));
            }
        }
    }
    let dir = a.out.out_dir.as_path();
    ensure_dir(dir)?;
    let stem = run_stem(&params, a.seed);

    if let Some(trials) = a.trials {
        let mut rows = Vec::new();
        println!("{:<6} {:>12} {:>12} {:>12} {:>8}", "event", "estimate", "std_error", "exact", "z");
        for (i, k) in kinds.iter().enumerate() {
            let est =
                schelling_core::experiments::estimate_event_prob(*k, &params, trials, split_seed(a.seed, i as u64))?;
            let exact = exact_event(k.family).map(|e| prob_event_exact(e, params.w as u64, tau));
            let z = exact.map(|p| (est.estimate - p) / (p * (1.0 - p) / trials as f64).sqrt());
            println!(
                "{:<6} {:>12.6} {:>12.6} {:>12} {:>8}",
                k.family.name(),
                est.estimate,
                est.std_error,
                exact.map_or("-".into(), |p| format!("{p:.6}")),
                z.map_or("-".into(), |z| format!("{z:.2}"))
            );
            rows.push(vec![
                k.family.name().to_string(),
                k.ty.to_string(),
                tau_label(k.tau),
                k.gamma.map(tau_label).unwrap_or_default(),
                trials.to_string(),
                est.successes.to_string(),
                format!("{}", est.estimate),
                format!("{}", est.std_error),
                format!("{}", est.ci95.0),
                format!("{}", est.ci95.1),
                exact.map(|p| format!("{p}")).unwrap_or_default(),
            ]);
        }
        let header = [
            "event",
            "type",
            "tau",
            "gamma",
            "trials",
            "successes",
            "estimate",
            "std_error",
            "ci_lo",
            "ci_hi",
            "exact",
        ];
        let path = write_artifact(dir, &format!("{stem}_estimates{trials}.csv"), &csv_text(&header, rows)?)?;
        println!("wrote {}", path.display());
        return Ok(ExitCode::SUCCESS);
    }

    let mut config = random_config(&params, a.seed)?;
    if a.after_run {
        config = schelling_core::dynamics::run_from(config, a.seed, &RunOptions::default()).final_config;
    }
    let torus = config.torus();
    let rank = torus.rank();
    let stride = a.stride as usize;
    let nodes: Vec<usize> =
        (0..torus.len()).filter(|&v| torus.coords(v)[..rank].iter().all(|c| c % stride == 0)).collect();
    let rows = scan_events(&config, &kinds, &nodes, a.directions).map_err(usage)?;
    for k in &kinds {
        let hits = rows.iter().filter(|r| r.kind == *k && r.holds).count();
        println!("{:<6} holds at {hits} of {} nodes", k.family.name(), nodes.len());
    }
    let suffix = if a.after_run { "final" } else { "initial" };
    let path = write_artifact(dir, &format!("{stem}_events_{suffix}.csv"), event_scan_csv(&rows).as_bytes())?;
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Args, Debug)]
pub struct StructuresArgs {
    #[arg(long)]
    w: usize,
    #[arg(long, value_parser = parse_tau)]
    tau_beta: Fraction,
    /// Partial-neighbourhood share, in (1/2, 1).
    #[arg(long, default_value = "0.55")]
    gamma: String,
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u64).range(1..))]
    r_max: u64,
    /// Plant a beta disc of the smallest admissible radius and run the dynamics.
    #[arg(long, requires_all = ["n", "tau_alpha"])]
    plant: bool,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_parser = parse_tau)]
    tau_alpha: Option<Fraction>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of planted runs, seeds derived from --seed.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    runs: u64,
    #[arg(long)]
    max_stages: Option<u64>,
    #[command(flatten)]
    out: OutArgs,
}

pub fn structures(a: StructuresArgs) -> Result<ExitCode> {
    let gamma_exact = parse_fraction(&a.gamma).map_err(usage)?;
    let gamma = *gamma_exact.numer() as f64 / *gamma_exact.denom() as f64;
    if !(gamma > 0.5 && gamma < 1.0) {
        return Err(usage("--gamma must lie in (1/2, 1)"));
    }
    if a.w == 0 {
        return Err(usage("--w must be positive"));
    }
    let dir = a.out.out_dir.as_path();
    ensure_dir(dir)?;
    let reports = (1..=a.r_max)
        .into_par_iter()
        .map(|r| dagger_report(r, a.w as u64, a.tau_beta, gamma))
        .collect::<schelling_core::Result<Vec<_>>>()?;
    let r_star = reports.iter().find(|r| r.passed()).map(|r| r.r);
    println!("{:>4} {:>10} {:>10} {:>5} {:>5}", "r", "min_inside", "max_cap", "a", "b");
    for r in &reports {
        println!("{:>4} {:>10} {:>10.6} {:>5} {:>5}", r.r, r.min_inside, r.max_cap_fraction, r.a, r.b);
    }
    match r_star {
        Some(r) => println!("r_star {r}"),
        None => println!("r_star none up to {}", a.r_max),
    }
    let rows = reports.iter().map(|r| {
        vec![
            r.r.to_string(),
            r.min_inside.to_string(),
            format!("{}", r.max_cap_fraction),
            r.a.to_string(),
            r.b.to_string(),
        ]
    });
    let name = format!("discs_w{}_tb{}_g{}.csv", a.w, tau_label(a.tau_beta), tau_label(gamma_exact));
    let path = write_artifact(dir, &name, &csv_text(&["r", "min_inside", "max_cap_fraction", "a", "b"], rows)?)?;
    println!("wrote {}", path.display());

    if !a.plant {
        return Ok(ExitCode::SUCCESS);
    }
    let Some(r_star) = r_star else {
        bail!("no admissible radius up to {}; nothing to plant", a.r_max);
    };
    let (n, ta) = (a.n.context("--plant needs --n")?, a.tau_alpha.context("--plant needs --tau-alpha")?);
    let params = model_params(2, n, a.w, ta, a.tau_beta)?;
    let radius = r_star * a.w as u64;
    let torus = params.torus();
    let center = torus.index([n / 2, n / 2, 0]);
    let plant = Plant { region: Region::disc(center, radius), ty: NodeType::Beta };
    let opts = RunOptions { max_stages: a.max_stages, ..RunOptions::default() };
    let seeds: Vec<u64> = (0..a.runs).map(|i| split_seed(a.seed, i)).collect();
    let runs = seeds
        .par_iter()
        .map(|&s| plant_and_run(&params, &plant, s, &opts))
        .collect::<schelling_core::Result<Vec<_>>>()?;
    let mut entries = Vec::new();
    for run in &runs {
        let all_beta = run.result.final_config.is_monochrome(NodeType::Beta);
        let monotone = run.radius_trace.windows(2).all(|w| w[0] <= w[1]);
        println!(
            "seed {} stages {} all_beta {} radius_non_decreasing {}",
            run.result.seed,
            run.result.stages(),
            all_beta,
            monotone
        );
        entries.push(serde_json::json!({
            "record": RunRecord::from_result(&run.result, false),
            "radius_trace": run.radius_trace,
            "final_all_beta": all_beta,
            "radius_non_decreasing": monotone,
        }));
    }
    let doc = serde_json::json!({
        "version": VERSION,
        "params": params,
        "r_star": r_star,
        "gamma": tau_label(gamma_exact),
        "plant": plant,
        "center": torus.coords(center),
        "runs": entries,
    });
    let name = format!("{}_planted_r{radius}_runs{}.json", run_stem(&params, a.seed), a.runs);
    let path = write_artifact(dir, &name, serde_json::to_string_pretty(&doc)?.as_bytes())?;
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    instances: u64,
    #[arg(long, default_value_t = 20)]
    n: usize,
    /// Comma-separated neighbourhood radii, used in turn.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    w: Vec<usize>,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(2..=3))]
    dim: u8,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    max_stages: u64,
}

pub fn oracle_check(a: OracleArgs) -> Result<ExitCode> {
    let cases = (0..a.instances)
        .map(|i| {
            let w = a.w[i as usize % a.w.len()];
            let (ta, tb) = CLAUSE_TAU_PAIRS[(i as usize / a.w.len()) % CLAUSE_TAU_PAIRS.len()];
            let p = model_params(a.dim, a.n, w, parse_fraction(ta)?, parse_fraction(tb)?)?;
            Ok((i, p, split_seed(a.seed, i)))
        })
        .collect::<Result<Vec<_>>>()?;
    let failures: Vec<String> = cases
        .par_iter()
        .filter_map(|(i, p, s)| {
            let initial = match random_config(p, *s) {
                Ok(c) => c,
                Err(e) => return Some(format!("instance {i}: {e}")),
            };
            first_divergence(initial, *s, a.max_stages).map(|st| {
                format!(
                    "instance {i}: w={} tau=({}, {}) seed={s} diverges at stage {st}",
                    p.w,
                    tau_label(p.tau_alpha),
                    tau_label(p.tau_beta)
                )
            })
        })
        .collect();
    for f in &failures {
        println!("{f}");
    }
    println!(
        "{} of {} instances agree ({}D, n={})",
        cases.len() - failures.len(),
        cases.len(),
        dim_of(a.dim).rank(),
        a.n
    );
    Ok(if failures.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
