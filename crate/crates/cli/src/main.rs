//! `gumdp`: command-line front end for the gumdp toolkit.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use gumdp::baselines::{frank_wolfe_infinite_trials, policy_from_occupancy, solver_policy};
use gumdp::environments::{IllustrativeTask, DEFAULT_SLIP};
use gumdp::estimation::{single_trial_mc_estimate, PolicyHandle};
use gumdp::harness::verify::{verify, Suite};
use gumdp::harness::{emit_plot_data, run_experiment, run_sweep, EnvSpec, ExperimentConfig, SweepKey, ITERATION_GRID};
use gumdp::mcts::{mcts_search, run_planned_episode, PlannerConfig};
use gumdp::occupancy_mdp::{exact_optimal_action, exact_optimal_value, history_to_state, root_distribution};
use gumdp::{OccupancyState, StationaryPolicy, TabularGumdp};

#[derive(Parser)]
#[command(name = "gumdp", version, about = "Single-trial planning for general-utility MDPs")]
struct Cli {
    /// Seed for every random choice of the command.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file. Defaults to standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format for tabular results.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Build and validate environments.
    #[command(subcommand)]
    Env(EnvCommand),
    /// Run one tree search from a given history and print the root statistics.
    Plan(PlanArgs),
    /// Play one episode with the planner, searching at every timestep.
    Episode(EpisodeArgs),
    /// Monte-Carlo estimate of the single-trial objective of a policy.
    Evaluate(EvaluateArgs),
    /// Infinite-trials optimum by Frank-Wolfe over the occupancy polytope.
    SolveInfinite(SolveArgs),
    /// Exact optimal value and action by enumeration.
    Exact(ExactArgs),
    /// Run an experiment config.
    Experiment(ExperimentArgs),
    /// Run verification suites; the exit status reflects the verdict.
    Verify(VerifyArgs),
    /// Run a sweep over a config and emit plot data.
    PlotData(PlotArgs),
}

#[derive(Subcommand)]
enum EnvCommand {
    /// Write a bundled GUMDP as JSON.
    Build(EnvBuildArgs),
    /// Check a GUMDP file and list every violation.
    Validate { gumdp: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum EnvName {
    Illustrative,
    Theorem1,
    SubsetSum,
    Lake,
}

#[derive(Args)]
struct EnvBuildArgs {
    #[arg(value_enum)]
    name: EnvName,
    /// Task of the illustrative environments.
    #[arg(long, default_value = "entropy")]
    task: IllustrativeTask,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    /// Initial mass on `s¹` of the two-branch example.
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// Subset-sum numbers, comma separated.
    #[arg(long, value_delimiter = ',')]
    numbers: Vec<u64>,
    /// Subset-sum target.
    #[arg(long, default_value_t = 0)]
    k: u64,
    /// Horizon the subset-sum weights are scaled for.
    #[arg(long = "horizon", short = 'H')]
    horizon: Option<usize>,
    #[arg(long, default_value_t = 4)]
    side: usize,
    #[arg(long, default_value_t = DEFAULT_SLIP)]
    slip: f64,
}

#[derive(Args)]
struct PlannerArgs {
    #[arg(long, default_value_t = 4000)]
    iterations: usize,
    /// Exploration constant.
    #[arg(long, default_value_t = std::f64::consts::SQRT_2)]
    c: f64,
}

impl PlannerArgs {
    fn config(&self, seed: u64) -> PlannerConfig {
        PlannerConfig {
            iterations: self.iterations,
            exploration_c: self.c,
            seed,
            ..PlannerConfig::default()
        }
    }
}

#[derive(Args)]
struct PlanArgs {
    gumdp: PathBuf,
    #[arg(long = "horizon", short = 'H')]
    horizon: usize,
    /// History `s0,a0,s1,…,st`. Defaults to the most likely initial state.
    #[arg(long, value_delimiter = ',')]
    history: Vec<usize>,
    #[command(flatten)]
    planner: PlannerArgs,
}

#[derive(Args)]
struct EpisodeArgs {
    gumdp: PathBuf,
    #[arg(long = "horizon", short = 'H')]
    horizon: usize,
    #[command(flatten)]
    planner: PlannerArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyKind {
    Random,
    Solver,
    Mcts,
}

#[derive(Args)]
struct EvaluateArgs {
    gumdp: PathBuf,
    #[arg(long = "horizon", short = 'H')]
    horizon: usize,
    #[arg(long, value_enum, default_value_t = PolicyKind::Random)]
    policy: PolicyKind,
    /// Stationary policy JSON; overrides `--policy`.
    #[arg(long)]
    policy_file: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    /// Frank-Wolfe iterations for `--policy solver`.
    #[arg(long, default_value_t = 500)]
    fw_iterations: usize,
    #[command(flatten)]
    planner: PlannerArgs,
}

#[derive(Args)]
struct SolveArgs {
    gumdp: PathBuf,
    #[arg(long, default_value_t = 500)]
    iterations: usize,
    /// Also write the induced stationary policy as JSON.
    #[arg(long)]
    policy_out: Option<PathBuf>,
}

#[derive(Args)]
struct ExactArgs {
    gumdp: PathBuf,
    #[arg(long = "horizon", short = 'H')]
    horizon: usize,
    /// History `s0,a0,s1,…,st`. Without it the root value `F₁,H*` is printed.
    #[arg(long, value_delimiter = ',')]
    history: Vec<usize>,
}

#[derive(Args)]
struct ExperimentArgs {
    config: PathBuf,
    /// Also write `env,task,policy,mean,ci_lo,ci_hi` here.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Report objective values rescaled to [0, 1].
    #[arg(long)]
    normalize: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite name, or `all`.
    suite: String,
}

#[derive(Args)]
struct PlotArgs {
    config: PathBuf,
    #[arg(long, default_value = "iterations")]
    sweep: SweepKey,
    /// Sweep values. Defaults to the iteration grid.
    #[arg(long, value_delimiter = ',')]
    values: Vec<usize>,
    /// Report objective values rescaled to [0, 1].
    #[arg(long)]
    normalize: bool,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load(path: &Path) -> Result<TabularGumdp> {
    let g = TabularGumdp::load(path).with_context(|| format!("cannot read {}", path.display()))?;
    let violations = g.validate();
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
        bail!("{} is not a valid GUMDP:\n  {}", path.display(), list.join("\n  "));
    }
    Ok(g)
}

fn start_state(g: &TabularGumdp, history: &[usize]) -> Result<OccupancyState> {
    if history.is_empty() {
        let (x, _) = root_distribution(g)
            .into_iter()
            .fold(None, |best: Option<(OccupancyState, f64)>, (x, p)| match best {
                Some((_, bp)) if bp >= p => best,
                _ => Some((x, p)),
            })
            .context("p0 has no support")?;
        return Ok(x);
    }
    Ok(history_to_state(history, g.gamma, g.n_states, g.n_actions)?)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let Format::Csv = cli.format;
    let seed = cli.seed.unwrap_or(0);
    let out = cli.out.as_deref();
    match cli.command {
        Command::Env(EnvCommand::Build(a)) => {
            let spec = match a.name {
                EnvName::Illustrative => EnvSpec::Illustrative { task: a.task },
                EnvName::Theorem1 => EnvSpec::Theorem1 { eps: a.eps },
                EnvName::SubsetSum => EnvSpec::SubsetSum {
                    numbers: a.numbers.clone(),
                    k: a.k,
                },
                EnvName::Lake => EnvSpec::Lake {
                    side: a.side,
                    slip: a.slip,
                },
            };
            let horizon = a.horizon.unwrap_or(a.numbers.len());
            let g = spec.build(Some(a.gamma), horizon)?;
            let mut w = output(out)?;
            writeln!(w, "{}", g.to_json()?)?;
            w.flush()?;
        }
        Command::Env(EnvCommand::Validate { gumdp }) => {
            let g = TabularGumdp::load_unchecked(&gumdp)?;
            let violations = g.validate();
            for v in &violations {
                println!("{v}");
            }
            if !violations.is_empty() {
                return Ok(ExitCode::FAILURE);
            }
            println!("ok");
        }
        Command::Plan(a) => {
            let g = load(&a.gumdp)?;
            let x = start_state(&g, &a.history)?;
            let result = mcts_search(&g, a.horizon, &x, &a.planner.config(seed))?;
            let mut w = output(out)?;
            writeln!(w, "t,action,n_a,q_a")?;
            for e in &result.edges {
                writeln!(w, "{},{},{},{}", x.t, e.action, e.visits, e.mean_cost)?;
            }
            w.flush()?;
            eprintln!("action {}", result.action);
        }
        Command::Episode(a) => {
            let g = load(&a.gumdp)?;
            let episode = run_planned_episode(&g, a.horizon, &a.planner.config(seed), seed)?;
            let mut w = output(out)?;
            episode.write_root_stats_csv(&mut w)?;
            w.flush()?;
            eprintln!("f_value {}", episode.value);
        }
        Command::Evaluate(a) => {
            let g = load(&a.gumdp)?;
            let policy = match (&a.policy_file, a.policy) {
                (Some(path), _) => {
                    let text = std::fs::read_to_string(path)?;
                    let pi: StationaryPolicy = serde_json::from_str(&text)
                        .with_context(|| format!("cannot parse {}", path.display()))?;
                    PolicyHandle::Stationary(StationaryPolicy::new(pi.rows().to_vec())?)
                }
                (None, PolicyKind::Random) => PolicyHandle::Random { n_actions: g.n_actions },
                (None, PolicyKind::Solver) => PolicyHandle::Stationary(solver_policy(&g, a.fw_iterations)?),
                (None, PolicyKind::Mcts) => PolicyHandle::Planner(a.planner.config(seed)),
            };
            let est = single_trial_mc_estimate(&g, &policy, a.horizon, a.episodes, seed)?;
            let mut w = output(out)?;
            est.write_csv(&mut w)?;
            w.flush()?;
            eprintln!("mean {} std_error {}", est.mean, est.std_error());
        }
        Command::SolveInfinite(a) => {
            let g = load(&a.gumdp)?;
            let result = frank_wolfe_infinite_trials(&g, a.iterations)?;
            let mut w = output(out)?;
            result.write_trace_csv(&mut w)?;
            w.flush()?;
            if let Some(path) = a.policy_out {
                let pi = policy_from_occupancy(&result.d_star, g.n_states, g.n_actions)?;
                std::fs::write(&path, serde_json::to_string_pretty(&pi)?)?;
            }
        }
        Command::Exact(a) => {
            let g = load(&a.gumdp)?;
            let mut w = output(out)?;
            if a.history.is_empty() {
                let value = gumdp::occupancy_mdp::exact_root_value(&g, a.horizon)?;
                writeln!(w, "value\n{value}")?;
            } else {
                let x = start_state(&g, &a.history)?;
                if x.t >= a.horizon {
                    writeln!(w, "value\n{}", exact_optimal_value(&g, a.horizon, &x)?)?;
                } else {
                    let (action, q) = exact_optimal_action(&g, a.horizon, &x)?;
                    writeln!(w, "action,q_a,optimal")?;
                    for (b, v) in q.iter().enumerate() {
                        writeln!(w, "{b},{v},{}", u8::from(b == action))?;
                    }
                }
            }
            w.flush()?;
        }
        Command::Experiment(a) => {
            let mut cfg = ExperimentConfig::load(&a.config)?;
            if let Some(s) = cli.seed {
                cfg.master_seed = s;
            }
            cfg.normalize_report |= a.normalize;
            let table = run_experiment(&cfg)?;
            let mut w = output(out)?;
            table.write_runs_csv(&mut w)?;
            w.flush()?;
            if let Some(path) = a.summary {
                table.write_summary_csv(BufWriter::new(File::create(path)?))?;
            }
            for s in &table.summaries {
                eprintln!("{}: mean {} ci [{}, {}]", s.policy, s.mean, s.ci_lo, s.ci_hi);
            }
        }
        Command::Verify(a) => {
            let suites = if a.suite == "all" {
                Suite::ALL.to_vec()
            } else {
                vec![a.suite.parse::<Suite>()?]
            };
            let mut w = output(out)?;
            let mut all_passed = true;
            for suite in suites {
                let report = verify(suite);
                writeln!(w, "{report}")?;
                all_passed &= report.passed();
            }
            w.flush()?;
            return Ok(if all_passed { ExitCode::SUCCESS } else { ExitCode::FAILURE });
        }
        Command::PlotData(a) => {
            let mut cfg = ExperimentConfig::load(&a.config)?;
            if let Some(s) = cli.seed {
                cfg.master_seed = s;
            }
            cfg.normalize_report |= a.normalize;
            let values = if !a.values.is_empty() {
                a.values
            } else if a.sweep == SweepKey::Iterations {
                ITERATION_GRID.to_vec()
            } else {
                bail!("--values is required for a horizon sweep");
            };
            let tables = run_sweep(&cfg, a.sweep, &values)?;
            let mut w = output(out)?;
            w.write_all(emit_plot_data(&tables, a.sweep)?.as_bytes())?;
            w.flush()?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
