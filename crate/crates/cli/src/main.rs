use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use infobargain::agents::{
    llm_agent, scripted_agent, AgentRole, ChatBackend, EndpointConfig, HttpBackend, MockBackend, RateLimiter,
    ReplayBackend, RetryPolicy, ScriptedAgentSpec, Strategy,
};
use infobargain::bargaining::{check_axioms, nash_solution, rubinstein_split, ultimatum_spe, BargainingGame, RubinsteinSpec};
use infobargain::engine::{
    run_cheap_talk, run_long_term, run_split, Agent, Bargainer, FirstProposer, GameTrace, LongTermOptions, Procedure,
    RoleDynamics, SplitGame, SplitOptions, StoppingRule,
};
use infobargain::harness::{
    build_grid, bundled_grid, ground_truth, read_records_jsonl, run_experiment_traced, summaries_from_records,
    summary_correlation, write_records_jsonl, write_summaries_csv, AgentFactory, ConfigOverrides, ExperimentConfig,
    GridSpec, LlmFactory, RunSummary, ScriptedFactory,
};
use infobargain::model::Scenario;
use infobargain::persuasion::solve_optimal_scheme;
use infobargain::reduction::{build_bargaining_game, solve_via_nash_product, FeasibilityBuild, SchemeCurve};
use infobargain::{scenarios, PersuasionTask};

#[derive(Parser)]
#[command(name = "infobargain", version, about = "Persuasion and bargaining solvers and game simulator")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long, global = true, value_enum, default_value_t = Backend::Scripted)]
    backend: Backend,
    #[command(flatten)]
    llm: LlmArgs,
}

#[derive(Args, Clone)]
struct LlmArgs {
    /// JSON file `[[agent 0 replies], [agent 1 replies]]` for the mock backend.
    #[arg(long, global = true)]
    mock_replies: Option<PathBuf>,
    /// Trace file (simulate) or directory of traces (experiment) to replay.
    #[arg(long, global = true)]
    replay: Option<PathBuf>,
    #[arg(long, global = true, default_value = "http://127.0.0.1:8000/v1")]
    endpoint: String,
    #[arg(long, global = true, default_value = "default")]
    model: String,
    #[arg(long, global = true)]
    temperature: Option<f64>,
    #[arg(long, global = true, default_value_t = 2)]
    retries: usize,
    #[arg(long, global = true, default_value_t = 2)]
    reprompts: usize,
    /// Requests per second across all live agents.
    #[arg(long, global = true)]
    rate_limit: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Backend {
    Scripted,
    Mock,
    Live,
    Replay,
}

#[derive(Subcommand)]
enum Command {
    /// Sender-optimal scheme of a persuasion task.
    Solve(TaskArgs),
    /// Nash, Rubinstein or ultimatum solutions.
    Bargain(BargainArgs),
    /// Build the induced bargaining game of a task and solve it.
    Reduce(ReduceArgs),
    /// Run one procedure and emit its trace.
    Simulate(SimulateArgs),
    /// Run grid configurations.
    Experiment(ExperimentArgs),
    /// Recompute summaries from run records and correlate them.
    Report(ReportArgs),
}

#[derive(Args)]
struct TaskArgs {
    /// Bundled scenario tag.
    #[arg(long, default_value = "grading_students")]
    scenario: String,
    /// Scenario JSON file; overrides --scenario.
    #[arg(long)]
    file: Option<PathBuf>,
}

impl TaskArgs {
    fn load(&self) -> Result<PersuasionTask> {
        if let Some(path) = &self.file {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let scenario: Scenario = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            return Ok(PersuasionTask::try_from(scenario)?);
        }
        scenarios::by_tag(&self.scenario).ok_or_else(|| anyhow!("unknown scenario {:?}", self.scenario))
    }
}

#[derive(Args)]
struct BargainArgs {
    #[arg(long, group = "solution")]
    rubinstein: bool,
    #[arg(long, group = "solution")]
    nash: bool,
    #[arg(long, group = "solution")]
    ultimatum: bool,
    /// Discount factors of proposer and responder.
    #[arg(long, num_args = 2, value_names = ["D1", "D2"])]
    delta: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1.0)]
    pie: f64,
    #[arg(long, default_value_t = 1.0)]
    unit: f64,
    #[arg(long)]
    accept_at_indifference: bool,
    /// JSON `{"points": [[u1, u2], ...], "disagreement": [d1, d2]}` for --nash.
    #[arg(long)]
    game: Option<PathBuf>,
}

#[derive(Deserialize)]
struct GameFile {
    points: Vec<[f64; 2]>,
    disagreement: [f64; 2],
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BuildKind {
    Grid,
    Curve,
    Full,
}

#[derive(Args)]
struct ReduceArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[arg(long, value_enum, default_value_t = BuildKind::Curve)]
    build: BuildKind,
    #[arg(long)]
    step: Option<f64>,
    /// Frontier points as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProcedureArg {
    OneShot,
    CheapTalk,
    LongTerm,
    Split,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[arg(long, value_enum, default_value_t = ProcedureArg::LongTerm)]
    procedure: ProcedureArg,
    #[arg(long, default_value = "fixed")]
    roles: String,
    /// `0`, `1` or `random`.
    #[arg(long, default_value = "0")]
    first: String,
    #[arg(long, default_value_t = 0.1)]
    stop_probability: f64,
    #[arg(long, default_value_t = 10)]
    max_timestep: usize,
    #[arg(long, default_value = "spe")]
    sender: String,
    #[arg(long, default_value = "spe")]
    receiver: String,
    /// Split game for --procedure split: `unbounded` or `bounded`.
    #[arg(long, default_value = "unbounded")]
    split: String,
    /// Per-agent discount for --procedure split.
    #[arg(long, num_args = 2, value_names = ["D1", "D2"])]
    discount: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10_000)]
    realization_steps: usize,
    /// Also write the full trace here as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Config id; all configs when omitted.
    #[arg(long)]
    id: Option<u32>,
    /// Grid document; the bundled grid when omitted.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    realization_steps: Option<usize>,
    #[arg(long, num_args = 2, value_names = ["D1", "D2"])]
    patience: Option<Vec<f64>>,
    /// Write per-run records (JSON lines) here.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Write each run's trace into this directory.
    #[arg(long)]
    traces: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run records written by `experiment --records`.
    #[arg(long)]
    records: PathBuf,
    /// JSON array of reference values, aligned with the configs in the
    /// records; the ground truth when omitted.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, default_value = "ground truth")]
    label: String,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let text = match &cli.command {
        Command::Solve(a) => solve(g, a)?,
        Command::Bargain(a) => bargain(g, a)?,
        Command::Reduce(a) => reduce(g, a)?,
        Command::Simulate(a) => simulate(g, a)?,
        Command::Experiment(a) => experiment(g, a)?,
        Command::Report(a) => report(g, a)?,
    };
    emit(g.out.as_deref(), &text)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn json<T: serde::Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn solve(g: &Global, a: &TaskArgs) -> Result<String> {
    let task = a.load()?;
    let opt = solve_optimal_scheme(&task)?;
    Ok(match g.format {
        Format::Json => json(&opt)?,
        Format::Csv => {
            let mut s = String::from("state,signal,probability\n");
            for (i, row) in opt.scheme.0.to_rows().iter().enumerate() {
                for (j, p) in row.iter().enumerate() {
                    s += &format!("{i},{j},{p}\n");
                }
            }
            s
        }
        Format::Text => {
            let mut s = format!("sender value {:.6}\nreceiver value {:.6}\n", opt.payoffs.sender, opt.payoffs.receiver);
            for (i, row) in opt.scheme.0.to_rows().iter().enumerate() {
                let cells: Vec<String> = row.iter().map(|p| format!("{p:.6}")).collect();
                s += &format!("state {i}: {}\n", cells.join(" "));
            }
            s
        }
    })
}

fn pair(v: &[f64], what: &str) -> Result<[f64; 2]> {
    match v {
        [a, b] => Ok([*a, *b]),
        _ => bail!("{what} takes two values"),
    }
}

fn bargain(g: &Global, a: &BargainArgs) -> Result<String> {
    let (label, u) = if a.rubinstein {
        let delta = pair(a.delta.as_deref().ok_or_else(|| anyhow!("--rubinstein needs --delta D1 D2"))?, "--delta")?;
        ("rubinstein", rubinstein_split(&RubinsteinSpec { pie: a.pie, delta })?)
    } else if a.ultimatum {
        ("ultimatum", ultimatum_spe(a.pie, a.unit, a.accept_at_indifference)?)
    } else if a.nash {
        let path = a.game.as_ref().ok_or_else(|| anyhow!("--nash needs --game FILE"))?;
        let file: GameFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        let game = BargainingGame::finite(file.points, file.disagreement);
        let sol = nash_solution(&game)?;
        let axioms = check_axioms(&nash_solution, &game)?;
        if g.format == Format::Json {
            return json(&serde_json::json!({ "solution": sol, "axioms": axioms }));
        }
        if !axioms.all() {
            log::warn!("axiom check failed: {axioms:?}");
        }
        ("nash", sol.utilities)
    } else {
        bail!("choose one of --rubinstein, --nash or --ultimatum");
    };
    Ok(match g.format {
        Format::Json => json(&serde_json::json!({ "solution": label, "payoffs": u }))?,
        Format::Csv => format!("player,payoff\n1,{}\n2,{}\n", u[0], u[1]),
        Format::Text => format!("{:.6} / {:.6}\n", u[0], u[1]),
    })
}

fn reduce(g: &Global, a: &ReduceArgs) -> Result<String> {
    let task = a.task.load()?;
    let build = match a.build {
        BuildKind::Grid => FeasibilityBuild::ObedientGrid { step: a.step.unwrap_or(1e-2) },
        BuildKind::Curve => {
            if !task.is_binary() {
                bail!("the curve build needs a binary task");
            }
            FeasibilityBuild::ObedientCurve {
                curve: SchemeCurve::binary_eta(),
                step: a.step.unwrap_or(1e-3),
            }
        }
        BuildKind::Full => FeasibilityBuild::FullProfile { step: a.step.unwrap_or(1.0 / 50.0) },
    };
    let game = build_bargaining_game(&task, &build)?;
    if let Some(path) = &a.csv {
        game.write_csv(File::create(path).with_context(|| format!("creating {}", path.display()))?)?;
    }
    let on_points = nash_solution(&game.game)?;
    let nash = solve_via_nash_product(&task)?;
    Ok(match g.format {
        Format::Json => json(&serde_json::json!({
            "points": game.points.len(),
            "disagreement": game.game.disagreement,
            "nash_on_points": on_points,
            "nash_product_solution": nash,
        }))?,
        Format::Csv => {
            let mut buf = Vec::new();
            game.write_csv(&mut buf)?;
            String::from_utf8(buf)?
        }
        Format::Text => format!(
            "points {}\ndisagreement {:.6} {:.6}\nnash on points {:.6} {:.6}\nnash product scheme {:?} payoffs {:.6} {:.6}\n",
            game.points.len(),
            game.game.disagreement[0],
            game.game.disagreement[1],
            on_points.utilities[0],
            on_points.utilities[1],
            nash.scheme.0.to_rows(),
            nash.payoffs.sender,
            nash.payoffs.receiver,
        ),
    })
}

fn mock_scripts(path: &Path) -> Result<[Vec<String>; 2]> {
    let v: Vec<Vec<String>> = serde_json::from_reader(BufReader::new(File::open(path)?))
        .with_context(|| format!("parsing {}", path.display()))?;
    match <[Vec<String>; 2]>::try_from(v) {
        Ok(s) => Ok(s),
        Err(_) => bail!("mock replies must hold two lists, one per agent"),
    }
}

fn read_trace(path: &Path) -> Result<GameTrace> {
    GameTrace::read_jsonl(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
        .with_context(|| format!("reading trace {}", path.display()))
}

fn retry(l: &LlmArgs) -> RetryPolicy {
    RetryPolicy {
        transport_retries: l.retries,
        reprompts: l.reprompts,
    }
}

/// Backends for both agents of one run. `trace` is the recorded run for replay.
fn backends(g: &Global, trace: Option<&Path>, limiter: Option<&std::sync::Arc<RateLimiter>>) -> Result<[Box<dyn ChatBackend>; 2]> {
    let l = &g.llm;
    Ok(match g.backend {
        Backend::Mock => {
            let path = l.mock_replies.as_ref().ok_or_else(|| anyhow!("--backend mock needs --mock-replies FILE"))?;
            let [a, b] = mock_scripts(path)?;
            [Box::new(MockBackend::replies(a)), Box::new(MockBackend::replies(b))]
        }
        Backend::Replay => {
            let path = trace.ok_or_else(|| anyhow!("--backend replay needs --replay PATH"))?;
            let t = read_trace(path)?;
            [
                Box::new(ReplayBackend::from_trace(&t, 0, true)),
                Box::new(ReplayBackend::from_trace(&t, 1, true)),
            ]
        }
        Backend::Live => {
            let make = || {
                let b = HttpBackend::new(EndpointConfig {
                    base_url: l.endpoint.clone(),
                    ..Default::default()
                });
                match limiter {
                    Some(r) => b.with_rate_limit(r.clone()),
                    None => b,
                }
            };
            [Box::new(make()), Box::new(make())]
        }
        Backend::Scripted => bail!("the scripted backend has no chat transport"),
    })
}

fn persuasion_agents(g: &Global, a: &SimulateArgs) -> Result<[Box<dyn Agent>; 2]> {
    if g.backend == Backend::Scripted {
        return Ok([
            Box::new(scripted_agent(ScriptedAgentSpec::new(AgentRole::Sender, Strategy::from_tag(&a.sender)?))?),
            Box::new(scripted_agent(ScriptedAgentSpec::new(AgentRole::Receiver, Strategy::from_tag(&a.receiver)?))?),
        ]);
    }
    let limiter = g.llm.rate_limit.map(RateLimiter::per_second);
    let [b0, b1] = backends(g, g.llm.replay.as_deref(), limiter.as_ref())?;
    Ok([
        Box::new(llm_agent(b0, g.llm.model.clone(), g.llm.temperature, retry(&g.llm))),
        Box::new(llm_agent(b1, g.llm.model.clone(), g.llm.temperature, retry(&g.llm))),
    ])
}

fn bargainers(g: &Global, a: &SimulateArgs) -> Result<[Box<dyn Bargainer>; 2]> {
    if g.backend == Backend::Scripted {
        return Ok([
            Box::new(scripted_agent(ScriptedAgentSpec::new(AgentRole::Bargainer, Strategy::from_tag(&a.sender)?))?),
            Box::new(scripted_agent(ScriptedAgentSpec::new(AgentRole::Bargainer, Strategy::from_tag(&a.receiver)?))?),
        ]);
    }
    let limiter = g.llm.rate_limit.map(RateLimiter::per_second);
    let [b0, b1] = backends(g, g.llm.replay.as_deref(), limiter.as_ref())?;
    Ok([
        Box::new(llm_agent(b0, g.llm.model.clone(), g.llm.temperature, retry(&g.llm))),
        Box::new(llm_agent(b1, g.llm.model.clone(), g.llm.temperature, retry(&g.llm))),
    ])
}

fn roles(s: &str) -> Result<RoleDynamics> {
    match s {
        "fixed" => Ok(RoleDynamics::Fixed),
        "alternating" => Ok(RoleDynamics::Alternating),
        _ => bail!("--roles must be fixed or alternating"),
    }
}

fn first(s: &str) -> Result<FirstProposer> {
    match s {
        "random" => Ok(FirstProposer::CoinFlip),
        k => Ok(FirstProposer::Agent(k.parse().context("--first must be 0, 1 or random")?)),
    }
}

fn simulate(g: &Global, a: &SimulateArgs) -> Result<String> {
    let stopping = StoppingRule::new(a.stop_probability, a.max_timestep)?;
    let trace = match a.procedure {
        ProcedureArg::Split => {
            let game = match a.split.as_str() {
                "unbounded" => SplitGame::unbounded(1.0).with_unit(0.01),
                "bounded" => SplitGame::bounded(),
                other => bail!("unknown split game {other:?}"),
            };
            let opts = SplitOptions {
                procedure: Procedure::long_term(roles(&a.roles)?, first(&a.first)?, stopping),
                discount: a.discount.as_deref().map(|d| pair(d, "--discount")).transpose()?,
            };
            let [mut x, mut y] = bargainers(g, a)?;
            run_split(&game, [&mut *x, &mut *y], &opts, g.seed)?
        }
        kind => {
            let task = a.task.load()?;
            let [mut x, mut y] = persuasion_agents(g, a)?;
            match kind {
                ProcedureArg::CheapTalk => run_cheap_talk(&task, &mut *x, &mut *y, g.seed)?,
                ProcedureArg::OneShot => {
                    let opts = LongTermOptions {
                        procedure: Procedure {
                            first: first(&a.first)?,
                            ..Procedure::one_shot()
                        },
                        realization_steps: a.realization_steps,
                        log_samples: false,
                    };
                    run_long_term(&task, [&mut *x, &mut *y], &opts, g.seed)?
                }
                _ => {
                    let opts = LongTermOptions::new(roles(&a.roles)?, first(&a.first)?, stopping)
                        .with_realization(a.realization_steps, false);
                    run_long_term(&task, [&mut *x, &mut *y], &opts, g.seed)?
                }
            }
        }
    };
    if let Some(path) = &a.trace {
        fs::write(path, trace.to_jsonl()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(match g.format {
        Format::Text => {
            let o = &trace.outcome;
            let mut s = format!(
                "consensus {}\ndeal timestep {}\npayoffs {:.6} {:.6}\n",
                o.consensus_reached,
                o.deal_timestep.map_or("-".into(), |t| t.to_string()),
                o.payoffs[0],
                o.payoffs[1]
            );
            if let (Some(k), Some(v)) = (o.final_proposer, o.final_proposer_payoff) {
                s += &format!("final proposer {k} payoff {v:.6}\n");
            }
            if let Some(r) = &o.aborted {
                s += &format!("aborted: {r}\n");
            }
            s
        }
        _ => trace.to_jsonl(),
    })
}

fn trace_file(dir: &Path, id: u32, run: usize) -> PathBuf {
    dir.join(format!("config-{id}-run-{run}.jsonl"))
}

fn factory(g: &Global) -> Result<Box<dyn AgentFactory>> {
    if g.backend == Backend::Scripted {
        return Ok(Box::new(ScriptedFactory));
    }
    let l = g.llm.clone();
    let backend = g.backend;
    let mock = match backend {
        Backend::Mock => Some(mock_scripts(
            l.mock_replies.as_deref().ok_or_else(|| anyhow!("--backend mock needs --mock-replies FILE"))?,
        )?),
        _ => None,
    };
    let limiter = l.rate_limit.map(RateLimiter::per_second);
    let make = move |config: &ExperimentConfig, run: usize, k: usize| -> infobargain::Result<Box<dyn ChatBackend>> {
        Ok(match backend {
            Backend::Mock => Box::new(MockBackend::replies(mock.as_ref().expect("mock scripts loaded")[k].clone())),
            Backend::Replay => {
                let dir = l.replay.as_deref().ok_or_else(|| infobargain::Error::Config("--backend replay needs --replay DIR".into()))?;
                let file = File::open(trace_file(dir, config.id, run))?;
                let trace = GameTrace::read_jsonl(BufReader::new(file))?;
                Box::new(ReplayBackend::from_trace(&trace, k, true))
            }
            Backend::Live => {
                let b = HttpBackend::new(EndpointConfig {
                    base_url: l.endpoint.clone(),
                    ..Default::default()
                });
                Box::new(match &limiter {
                    Some(r) => b.with_rate_limit(r.clone()),
                    None => b,
                })
            }
            Backend::Scripted => unreachable!(),
        })
    };
    Ok(Box::new(LlmFactory {
        make_backend: Box::new(make),
        model: g.llm.model.clone(),
        temperature: g.llm.temperature,
        retry: retry(&g.llm),
    }))
}

fn summaries_text(summaries: &[RunSummary]) -> String {
    let mut s = String::new();
    for x in summaries {
        let f = |m: Option<infobargain::harness::MeanSd>| m.map_or("-".into(), |m| format!("{:.2} ± {:.2}", m.mean, m.sd));
        s += &format!(
            "{:<16} payoff {:<14} deal timestep {:<14} consensus rate {:.2}{}\n",
            x.label,
            f(x.final_proposer_payoff),
            f(x.deal_timestep),
            x.consensus_rate,
            if x.failures > 0 { format!(" ({} failed)", x.failures) } else { String::new() }
        );
    }
    s
}

fn render_summaries(g: &Global, summaries: &[RunSummary]) -> Result<String> {
    Ok(match g.format {
        Format::Json => json(&summaries)?,
        Format::Csv => {
            let mut buf = Vec::new();
            write_summaries_csv(summaries, &mut buf)?;
            String::from_utf8(buf)?
        }
        Format::Text => summaries_text(summaries),
    })
}

fn experiment(g: &Global, a: &ExperimentArgs) -> Result<String> {
    let grid = match &a.grid {
        Some(path) => build_grid(&GridSpec::from_json(&fs::read_to_string(path)?)?)?,
        None => bundled_grid(),
    };
    let overrides = ConfigOverrides {
        runs: a.runs,
        patience: a.patience.as_deref().map(|p| pair(p, "--patience")).transpose()?,
        realization_steps: a.realization_steps,
        seed_base: (g.seed != 0).then_some(g.seed),
        ..Default::default()
    };
    let selected: Vec<ExperimentConfig> = match a.id {
        Some(id) => vec![grid
            .iter()
            .find(|c| c.id == id)
            .ok_or_else(|| anyhow!("no config with id {id}"))?
            .clone()],
        None => grid,
    };
    let factory = factory(g)?;
    if let Some(dir) = &a.traces {
        fs::create_dir_all(dir)?;
    }
    let mut summaries = Vec::new();
    for config in &selected {
        let config = overrides.apply(config)?;
        let (summary, traces) = run_experiment_traced(&config, factory.as_ref())?;
        if let Some(dir) = &a.traces {
            for (run, trace) in traces.iter().enumerate() {
                if let Some(t) = trace {
                    t.write_jsonl(File::create(trace_file(dir, config.id, run))?)?;
                }
            }
        }
        summaries.push(summary);
    }
    if let Some(path) = &a.records {
        let records: Vec<_> = summaries.iter().flat_map(|s| s.records.iter().cloned()).collect();
        write_records_jsonl(&records, File::create(path)?)?;
    }
    render_summaries(g, &summaries)
}

fn report(g: &Global, a: &ReportArgs) -> Result<String> {
    let records = read_records_jsonl(BufReader::new(File::open(&a.records)?))?;
    let summaries = summaries_from_records(records);
    let reference: Vec<f64> = match &a.reference {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
        None => {
            let grid = bundled_grid();
            summaries
                .iter()
                .map(|s| {
                    let c = grid.iter().find(|c| c.id == s.config_id).ok_or_else(|| anyhow!("config {} is not in the grid", s.config_id))?;
                    Ok(ground_truth(c)?)
                })
                .collect::<Result<_>>()?
        }
    };
    let corr = if summaries.len() >= 3 {
        Some(summary_correlation(&summaries, &reference, &a.label)?)
    } else {
        None
    };
    Ok(match g.format {
        Format::Json => json(&serde_json::json!({ "summaries": summaries, "correlation": corr }))?,
        Format::Csv => render_summaries(g, &summaries)?,
        Format::Text => {
            let mut s = summaries_text(&summaries);
            if let Some(c) = corr {
                s += &format!("r vs {} = {:.4} (p = {:.4}, n = {})\n", c.label, c.r, c.p_value, c.n);
            }
            s
        }
    })
}
