//! Command-line driver: human summary on stderr, machine-readable JSON on
//! stdout, optional side files (CSV / SVG / edge list) under `--out`.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use hthk::{
    analyze_structure, build_digraph, build_matrix, check_theorem1, check_theorem2,
    check_theorem3, convergence_factors, detect_tau, fvct, leader_report, load_scenario,
    neighborhood_spec, simulate, step, Mode, OpinionState, ScenarioFile,
};

#[derive(Parser)]
#[command(name = "hthk", version, about = "Heterogeneous bounded-confidence opinion dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Free,
    Frozen,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Free => Mode::Free,
            ModeArg::Frozen => Mode::Frozen,
        }
    }
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML)
    scenario: PathBuf,
    /// Override the scenario's maximum step count
    #[arg(long)]
    max_steps: Option<usize>,
    /// Override the scenario's convergence tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// Override the scenario's tie tolerance
    #[arg(long)]
    tie_tol: Option<f64>,
    /// Override the scenario's stability window
    #[arg(long)]
    window: Option<usize>,
    /// Override the scenario's update mode
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Directory for side files (created if missing); writes are atomic
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ScenarioFile> {
        let text = std::fs::read_to_string(&self.scenario)
            .with_context(|| format!("reading {}", self.scenario.display()))?;
        let mut sc = load_scenario(&text)?;
        if let Some(v) = self.max_steps {
            sc.max_steps = v;
        }
        if let Some(v) = self.tol {
            sc.convergence_tol = v;
        }
        if let Some(v) = self.tie_tol {
            sc.tie_tol = v;
        }
        if let Some(v) = self.window {
            sc.stability_window = v;
        }
        if let Some(m) = self.mode {
            sc.mode = m.into();
        }
        Ok(sc)
    }

    /// State after `at_step` deterministic free-dynamics steps.
    fn state_at(&self, sc: &ScenarioFile, at_step: usize) -> OpinionState {
        let mut cur = sc.state.clone();
        for _ in 0..at_step {
            cur = step(&cur, sc.tie_tol);
        }
        cur
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the dynamics and report the trajectory
    Simulate(Common),
    /// Agent classes and component structure at a given step
    Classify {
        #[command(flatten)]
        common: Common,
        /// Analyze the state reached after this many steps (default 0)
        #[arg(long, default_value_t = 0)]
        at_step: usize,
    },
    /// Final value under constant topology at a given step
    Fvct {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        at_step: usize,
    },
    /// Equi-topology neighborhood containment check around an equilibrium
    CheckThm1 {
        #[command(flatten)]
        common: Common,
        /// Scenario holding the perturbed start; generated within delta/2
        /// from --seed when omitted
        perturbed: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Verification horizon in steps
        #[arg(long, default_value_t = 500)]
        horizon: usize,
    },
    /// Five-condition constant-topology test at a given step
    CheckThm2 {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        at_step: usize,
    },
    /// Frozen-topology convergence-rate entrainment check
    CheckThm3 {
        #[command(flatten)]
        common: Common,
        /// Verification horizon in steps
        #[arg(long, default_value_t = 10_000)]
        horizon: usize,
    },
    /// Per-component spectral radii and leader assignment
    Leaders {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        at_step: usize,
    },
    /// Randomized scenarios: tau distribution and invariant violations
    Fuzz {
        /// Number of scenarios
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Largest population size sampled
        #[arg(long, default_value_t = 12)]
        max_n: usize,
        #[arg(long, default_value_t = 10_000)]
        max_steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit<T: Serialize>(report: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(report)?);
    Ok(())
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(common) => {
            let sc = common.load()?;
            let report =
                simulate(&sc.state, sc.max_steps, sc.convergence_tol, sc.mode, sc.tie_tol)?;
            let tau = detect_tau(&report, sc.stability_window);
            eprintln!(
                "n = {}, steps run = {}, converged = {}, final residual = {:.3e}",
                sc.state.n(),
                report.steps_run,
                report.converged,
                report.final_residual
            );
            match tau {
                Some(t) => eprintln!("constant-topology time tau = {t}"),
                None => eprintln!(
                    "tau candidate = {:?} (not confirmed within the stability window)",
                    report.tau_candidate
                ),
            }
            if let Some(dir) = &common.out {
                let traj = output::replay(&sc, report.steps_run);
                output::write_atomic(dir, "trajectory.csv", &output::trajectory_csv(&traj))?;
                output::write_atomic(dir, "trajectory.svg", &output::trajectory_svg(&traj))?;
                eprintln!("wrote {}/trajectory.{{csv,svg}}", dir.display());
            }
            #[derive(Serialize)]
            struct Out<'a> {
                tau: Option<usize>,
                report: &'a hthk::TrajectoryReport,
            }
            emit(&Out { tau, report: &report })
        }
        Command::Classify { common, at_step } => {
            let sc = common.load()?;
            let state = common.state_at(&sc, at_step);
            let digraph = build_digraph(&state, sc.tie_tol);
            let st = analyze_structure(&digraph);
            eprintln!(
                "step {at_step}: {} agents, {} SCCs, {} WCCs",
                state.n(),
                st.sccs.len(),
                st.wccs.len()
            );
            for (k, scc) in st.sccs.iter().enumerate() {
                let members: Vec<String> = scc.iter().map(|&i| (i + 1).to_string()).collect();
                eprintln!(
                    "  SCC {k}: {:?} agents {{{}}}",
                    st.class_of[k],
                    members.join(", ")
                );
            }
            if let Some(dir) = &common.out {
                output::write_atomic(dir, "digraph.txt", &output::edge_list(&digraph, &st))?;
                eprintln!("wrote {}/digraph.txt", dir.display());
            }
            emit(&st)
        }
        Command::Fvct { common, at_step } => {
            let sc = common.load()?;
            let state = common.state_at(&sc, at_step);
            let result = fvct(&state, sc.tie_tol)?;
            let rendered: Vec<String> = result.fvct.iter().map(|v| format!("{v:.6}")).collect();
            eprintln!("fvct at step {at_step}: [{}]", rendered.join(", "));
            emit(&result)
        }
        Command::CheckThm1 { common, perturbed, seed, horizon } => {
            let sc = common.load()?;
            let y0 = match perturbed {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    load_scenario(&text)?.state
                }
                None => {
                    let spec = neighborhood_spec(&sc.state, sc.tie_tol)?;
                    if spec.delta.iter().any(|&d| d <= 0.0) {
                        bail!("degenerate neighborhood: some delta_i = 0; supply a perturbed scenario explicitly");
                    }
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let y: Vec<f64> = sc
                        .state
                        .opinions()
                        .iter()
                        .zip(&spec.delta)
                        .map(|(&v, &d)| v + rng.random_range(-1.0..1.0) * 0.499 * d)
                        .collect();
                    sc.state.with_opinions(y)?
                }
            };
            let report = check_theorem1(&sc.state, &y0, horizon, sc.tie_tol)?;
            eprintln!(
                "applicable = {}, conclusions verified = {}{}",
                report.applicable,
                report.conclusions_verified,
                report
                    .first_violation
                    .map(|t| format!(", first violation at step {t}"))
                    .unwrap_or_default()
            );
            emit(&report)
        }
        Command::CheckThm2 { common, at_step } => {
            let sc = common.load()?;
            let state = common.state_at(&sc, at_step);
            let report = check_theorem2(&state, sc.tie_tol)?;
            for (idx, ok) in report.cond.iter().enumerate() {
                eprintln!("condition {}: {}", idx + 1, if *ok { "holds" } else { "fails" });
            }
            eprintln!("all hold = {}", report.all_hold);
            emit(&report)
        }
        Command::CheckThm3 { common, horizon } => {
            let sc = common.load()?;
            let report = check_theorem3(&sc.state, horizon, sc.tie_tol)?;
            eprintln!(
                "fvct constant = {}, no moderate = {}, direction entrained = {}",
                report.fvct_constant, report.no_moderate, report.direction_entrained
            );
            for k in &report.k_limits {
                eprintln!(
                    "agent {}: target rho = {:.6}, final k = {}, achieved = {}",
                    k.agent + 1,
                    k.target_rho,
                    k.final_k.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into()),
                    k.achieved
                );
            }
            emit(&report)
        }
        Command::Leaders { common, at_step } => {
            let sc = common.load()?;
            let state = common.state_at(&sc, at_step);
            let digraph = build_digraph(&state, sc.tie_tol);
            let st = analyze_structure(&digraph);
            let report = leader_report(&build_matrix(&digraph), &st)?;
            for e in &report.entries {
                let members: Vec<String> = e.members.iter().map(|&i| (i + 1).to_string()).collect();
                eprintln!(
                    "SCC {} (agents {{{}}}): rho = {:.6}, leader SCC = {}, leader rho = {:.6}{}",
                    e.scc,
                    members.join(", "),
                    e.rho,
                    e.leader,
                    e.leader_rho,
                    if e.tie { " (tie)" } else { "" }
                );
            }
            emit(&report)
        }
        Command::Fuzz { count, seed, max_n, max_steps, out } => {
            let summary = fuzz(count, seed, max_n, max_steps)?;
            eprintln!(
                "{} scenarios: {} converged, {} confirmed tau, {} invariant violations",
                summary.count, summary.converged, summary.tau_confirmed, summary.violations
            );
            eprintln!(
                "tau quartiles (confirmed runs): {:?}",
                summary.tau_quartiles
            );
            if let Some(dir) = &out {
                output::write_atomic(dir, "fuzz.json", &serde_json::to_string_pretty(&summary)?)?;
                eprintln!("wrote {}/fuzz.json", dir.display());
            }
            emit(&summary)
        }
    }
}

#[derive(Serialize)]
struct FuzzSummary {
    count: usize,
    seed: u64,
    converged: usize,
    tau_confirmed: usize,
    violations: usize,
    violation_seeds: Vec<u64>,
    tau_quartiles: [usize; 3],
}

/// One fuzz trial; returns (converged, confirmed tau, invariants ok).
fn fuzz_one(instance_seed: u64, max_n: usize, max_steps: usize) -> (bool, Option<usize>, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(instance_seed);
    let n = rng.random_range(2..=max_n.max(2));
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let r: Vec<f64> = (0..n).map(|_| rng.random_range(0.02..0.8)).collect();
    let state = OpinionState::new(y, r).expect("generated state is valid");

    let digraph = build_digraph(&state, 0.0);
    let matrix = build_matrix(&digraph);
    let st = analyze_structure(&digraph);
    let mut ok = (0..n).all(|i| {
        digraph.has_edge(i, i) && (matrix.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12
    });
    ok &= st
        .wccs
        .iter()
        .all(|wcc| wcc.iter().any(|&i| st.condensation[st.scc_of[i]].is_empty()));
    ok &= convergence_factors(&state, 0.0, 1e-12).is_ok();

    match simulate(&state, max_steps, 1e-12, Mode::Free, 0.0) {
        Ok(report) => (report.converged, detect_tau(&report, 100), ok),
        Err(_) => (false, None, false),
    }
}

fn fuzz(count: usize, seed: u64, max_n: usize, max_steps: usize) -> Result<FuzzSummary> {
    // instance seeds derived once so the summary is identical regardless of
    // worker count or scheduling
    let splitmix = |mut z: u64| {
        z = z.wrapping_add(0x9e3779b97f4a7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    };
    let seeds: Vec<u64> = (0..count as u64).map(|i| splitmix(seed ^ splitmix(i))).collect();

    let workers = std::thread::available_parallelism().map_or(1, |p| p.get()).min(8);
    let mut results: Vec<(bool, Option<usize>, bool)> = vec![(false, None, false); count];
    std::thread::scope(|scope| {
        for (w, chunk) in results.chunks_mut(count.div_ceil(workers).max(1)).enumerate() {
            let base = w * count.div_ceil(workers).max(1);
            let seeds = &seeds;
            scope.spawn(move || {
                for (off, slot) in chunk.iter_mut().enumerate() {
                    *slot = fuzz_one(seeds[base + off], max_n, max_steps);
                }
            });
        }
    });

    let mut taus: Vec<usize> = results.iter().filter_map(|r| r.1).collect();
    taus.sort_unstable();
    let q = |p: f64| taus.get(((taus.len() as f64 - 1.0) * p) as usize).copied().unwrap_or(0);
    Ok(FuzzSummary {
        count,
        seed,
        converged: results.iter().filter(|r| r.0).count(),
        tau_confirmed: taus.len(),
        violations: results.iter().filter(|r| !r.2).count(),
        violation_seeds: results
            .iter()
            .zip(&seeds)
            .filter(|(r, _)| !r.2)
            .map(|(_, &s)| s)
            .collect(),
        tau_quartiles: [q(0.25), q(0.5), q(0.75)],
    })
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
