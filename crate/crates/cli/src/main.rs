use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use markov_ce::driver::{run_dynamics, step_size_warning, MemoryBudget};
use markov_ce::eval::{
    certify_series, exact_swap_gap_normal_form, gap_bound, per_state_regret_series, rate_fit,
};
use markov_ce::{
    default_eta, generate_random_game, MarkovGame, RandomGameSpec, RunArtifact, RunConfig, Variant,
};
use serde_json::json;

/// Schema version stamped on every JSON document this tool writes.
const OUTPUT_VERSION: u32 = 1;
const CSV_HEADER: &str = "t,ceGap,cceGap,boundTheorem2";

#[derive(Parser)]
#[command(name = "markov-ce", version, about = "No-swap-regret dynamics and certified correlated equilibria for Markov games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random game and print its hash.
    Gen(GenArgs),
    /// Run the learning dynamics and write an artifact.
    Run(RunArgs),
    /// Certify the CE/CCE gap of a recorded run.
    Eval(EvalArgs),
    /// Sweep T on one long run and fit the convergence rate.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long = "H")]
    horizon: usize,
    #[arg(long = "S")]
    states: usize,
    /// Comma-separated action counts, one per player.
    #[arg(long = "A", value_delimiter = ',', required = true)]
    actions: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dirichlet concentration of the transition rows.
    #[arg(long, default_value_t = 1.0)]
    concentration: f64,
    #[arg(short = 'o', long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    V,
    Q,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::V => Variant::V,
            VariantArg::Q => Variant::Q,
        }
    }
}

#[derive(Args)]
struct DynamicsArgs {
    #[arg(long)]
    game: PathBuf,
    /// `auto` or a positive number.
    #[arg(long, default_value = "auto")]
    eta: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "v")]
    variant: VariantArg,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    dynamics: DynamicsArgs,
    #[arg(long = "T")]
    episodes: usize,
    /// Progress interval; defaults to T/8.
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Keep every k-th episode only; thinned artifacts cannot be certified.
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(short = 'o', long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    artifact: PathBuf,
    #[arg(long)]
    game: PathBuf,
    /// Episode to certify; defaults to the last one.
    #[arg(long)]
    t: Option<usize>,
    /// Also run the exact single-step oracle and report the discrepancy.
    #[arg(long)]
    exact_h1: bool,
    /// Include the per-state regret table at `t`.
    #[arg(long)]
    regret: bool,
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    dynamics: DynamicsArgs,
    #[arg(long, default_value_t = 64)]
    t_min: usize,
    #[arg(long, default_value_t = 4096)]
    t_max: usize,
    /// Explicit comma-separated grid, strictly increasing; overrides the powers of two.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<markov_ce::Error>() {
        Some(markov_ce::Error::MemoryBudget(_) | markov_ce::Error::WeightOverflow { .. }) => 4,
        Some(markov_ce::Error::Io(_)) | None => 1,
        Some(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Run(args) => cmd_run(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn load_game(path: &Path) -> Result<MarkovGame> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(MarkovGame::from_json(&bytes)?)
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(out.flush()?)
        }
    }
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    if args.actions.len() != args.n {
        return Err(usage("need one action count per player"));
    }
    let game = generate_random_game(&RandomGameSpec {
        players: args.n,
        horizon: args.horizon,
        states: args.states,
        actions: args.actions,
        seed: args.seed,
        concentration: args.concentration,
    })?;
    fs::write(&args.output, game.to_json()).with_context(|| format!("writing {}", args.output.display()))?;
    println!("{}", game.hash());
    Ok(())
}

fn resolve_config(game: &MarkovGame, dynamics: &DynamicsArgs, episodes: usize) -> Result<RunConfig> {
    let eta = if dynamics.eta == "auto" {
        default_eta(game.players(), game.horizon(), game.max_actions())
    } else {
        dynamics
            .eta
            .parse::<f64>()
            .map_err(|_| usage(format!("--eta expects `auto` or a number, got {:?}", dynamics.eta)))?
    };
    if let Some(warning) = step_size_warning(eta, game.max_actions()) {
        eprintln!("warning: {warning}");
    }
    let mut config = RunConfig::new(episodes, eta).with_variant(dynamics.variant.into());
    config.seed = dynamics.seed;
    Ok(config)
}

fn execute(game: &MarkovGame, config: &RunConfig) -> Result<RunArtifact> {
    let run = run_dynamics(game, config, &MemoryBudget::default(), |c| {
        eprintln!("episode {}: max per-state regret {:.6e}", c.episode, c.max_state_regret);
    })?;
    Ok(run)
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let game = load_game(&args.dynamics.game)?;
    let mut config = resolve_config(&game, &args.dynamics, args.episodes)?;
    config.checkpoint_every = args.checkpoint_every.unwrap_or((args.episodes / 8).max(1));
    config.history_stride = args.thin;
    let run = execute(&game, &config)?;
    run.save(&args.output)?;
    eprintln!("wrote {}", args.output.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let game = load_game(&args.game)?;
    let run = RunArtifact::load(&args.artifact)?;
    let t = args.t.unwrap_or(run.last_episode());
    let certificate = certify_series(&game, &run, t)?.pop().expect("t >= 1");
    let mut doc = serde_json::to_value(&certificate)?;
    doc["version"] = json!(OUTPUT_VERSION);
    if args.exact_h1 {
        let exact = exact_swap_gap_normal_form(&game, &run, t)?;
        let discrepancy = certificate
            .per_player
            .iter()
            .zip(&exact)
            .map(|(p, e)| (p.ce_gap - e).abs())
            .fold(0.0, f64::max);
        eprintln!("exact single-step discrepancy {discrepancy:.3e}");
        doc["exactH1"] = json!({ "perPlayer": exact, "discrepancy": discrepancy });
    }
    if args.regret {
        let table = per_state_regret_series(&game, &run, t)?;
        doc["regTable"] = json!({ "max": table.max_at(t), "entries": table.entries_at(t) });
    }
    emit(args.output.as_deref(), &format!("{}\n", serde_json::to_string_pretty(&doc)?))
}

fn bench_grid(args: &BenchArgs) -> Result<Vec<usize>> {
    let grid: Vec<usize> = match &args.grid {
        Some(grid) => grid.clone(),
        None => {
            let mut grid = Vec::new();
            let mut t = args.t_min.max(1).next_power_of_two();
            while t <= args.t_max {
                grid.push(t);
                t *= 2;
            }
            grid
        }
    };
    if grid.is_empty() {
        return Err(usage("empty grid"));
    }
    if grid[0] == 0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(usage("grid must be positive and strictly increasing"));
    }
    Ok(grid)
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let grid = bench_grid(&args)?;
    let game = load_game(&args.dynamics.game)?;
    let last = *grid.last().expect("grid is not empty");
    let mut config = resolve_config(&game, &args.dynamics, last)?;
    config.checkpoint_every = (last / 8).max(1);
    let run = execute(&game, &config)?;
    let series = certify_series(&game, &run, last)?;
    let rows: Vec<(usize, f64, f64, f64)> = grid
        .iter()
        .map(|&t| {
            let c = &series[t - 1];
            (t, c.ce_gap, c.cce_gap, gap_bound(game.horizon(), game.players(), game.max_actions(), t))
        })
        .collect();
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.0 as f64, r.1)).collect();
    let fit = rate_fit(&points);
    if let Ok(fit) = &fit {
        if fit.dropped > 0 {
            eprintln!("note: {} nonpositive gaps dropped from the fit", fit.dropped);
        }
    }
    let text = match args.format {
        Format::Csv => {
            let mut text = format!("{CSV_HEADER}\n");
            for (t, ce, cce, bound) in &rows {
                text.push_str(&format!("{t},{ce:e},{cce:e},{bound:e}\n"));
            }
            match &fit {
                Ok(f) => text.push_str(&format!(
                    "# fit slope={} intercept={} r2={} points={} dropped={}\n",
                    f.slope, f.intercept, f.r_squared, f.points, f.dropped
                )),
                Err(e) => text.push_str(&format!("# fit unavailable: {e}\n")),
            }
            text
        }
        Format::Json => {
            let rows: Vec<_> = rows
                .iter()
                .map(|(t, ce, cce, bound)| json!({ "t": t, "ceGap": ce, "cceGap": cce, "boundTheorem2": bound }))
                .collect();
            let fit = match &fit {
                Ok(f) => serde_json::to_value(f)?,
                Err(e) => json!({ "error": e.to_string() }),
            };
            format!(
                "{}\n",
                serde_json::to_string_pretty(&json!({ "version": OUTPUT_VERSION, "rows": rows, "fit": fit }))?
            )
        }
    };
    emit(args.output.as_deref(), &text)
}
