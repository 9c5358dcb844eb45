//! The `bidcraft` command line: generate -> fit -> eval -> solve -> simulate.
//!
//! Every command takes an optional JSON run config plus flag overrides, with
//! flags winning. Outputs are written atomically (temp file + rename). Exit
//! codes: 0 success, 1 usage or config error, 2 data error. Set
//! `BIDCRAFT_LOG` for logging verbosity.

use crate::bidlog::{
    generate_synthetic, parse_log, write_tsv, CampaignDataset, LogSchema, ParseOptions, PriceLaw,
    SyntheticConfig, DEFAULT_PRICE_LEVELS,
};
use crate::bidopt::{solve_exact, solve_truncated, SolverConfig, TransitionModel, ValueTable};
use crate::error::{Error, Result};
use crate::landscape::{MarketModel, TrainConfig};
use crate::metrics::{evaluate_model, DEFAULT_LOG_EPSILON};
use crate::simulator::{
    compute_episode_budget, run_campaign, Bidder, CampaignReport, ConstantBidder, EpisodeConfig,
    LinearBidder, McpcBidder, PolicyBidder,
};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use std::io::BufReader;
use std::path::{Path, PathBuf};

/// Experiment file shared by the subcommands; any section may be omitted.
/// Command-line flags override whatever the file provides.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub price_levels: Option<usize>,
    pub synthetic: Option<SyntheticConfig>,
    pub train: Option<TrainConfig>,
    pub solver: Option<SolverConfig>,
    pub episode: Option<EpisodeConfig>,
}

impl RunConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(RunConfig::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::config(format!("cannot read config {}: {e}", path.display()))
                })?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::config(format!("bad config {}: {e}", path.display())))
            }
        }
    }
}

#[derive(Parser)]
#[command(
    name = "bidcraft",
    version,
    about = "Budget-constrained real-time-bidding engine"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic bid log with a known market-price law.
    Generate(GenerateArgs),
    /// Fit a market-price model (km, gamma, or forecaster) to a log.
    Fit(FitArgs),
    /// Score fitted models on a test log (AUC, Log Loss, ANLP).
    Eval(EvalArgs),
    /// Solve the bidding MDP against a fitted price model.
    Solve(SolveArgs),
    /// Replay bidders over a test log in budget-capped episodes.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// JSON run config (the `synthetic` section seeds this command).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output TSV path.
    #[arg(long)]
    out: PathBuf,
    /// Where to write the matching column schema (default: `<out>` with a
    /// `.schema.json` extension).
    #[arg(long)]
    schema_out: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Price grid size L.
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    mean_ctr: Option<f64>,
    /// Market-price law: `gamma:K,THETA`, `uniform:LO,HI`, or `point:Z`.
    #[arg(long)]
    price_law: Option<String>,
    /// Optional logging-bid law (same syntax); losses become censored.
    #[arg(long)]
    censor_law: Option<String>,
    /// Draw market prices from a fitted model file instead of a closed-form
    /// law.
    #[arg(long)]
    from_model: Option<PathBuf>,
    #[arg(long)]
    campaign: Option<String>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input TSV log.
    #[arg(long)]
    data: PathBuf,
    /// Column schema JSON for the log.
    #[arg(long)]
    schema: PathBuf,
    /// Model kind: km, gamma, or forecaster.
    #[arg(long)]
    model: String,
    /// Output model JSON path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    levels: Option<usize>,
    /// Skip malformed lines instead of failing.
    #[arg(long)]
    lenient: bool,
    /// Per-epoch loss CSV path (forecaster only; default: `<out>` with a
    /// `.loss.csv` extension).
    #[arg(long)]
    loss_csv: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    minibatch: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    hidden_dim: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    /// Fitted model file; repeat for one table row per model.
    #[arg(long = "model", required = true)]
    models: Vec<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    levels: Option<usize>,
    /// Floor inside the log metrics.
    #[arg(long, default_value_t = DEFAULT_LOG_EPSILON)]
    eps: f64,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Fitted market-price model.
    #[arg(long)]
    model: PathBuf,
    /// Output value-table JSON.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    budget: Option<u32>,
    #[arg(long)]
    horizon: Option<usize>,
    /// clicks or surplus.
    #[arg(long)]
    objective: Option<String>,
    /// second_price, first_price, or literal_bid.
    #[arg(long)]
    payment: Option<String>,
    /// Truncate the budget axis at this point.
    #[arg(long)]
    bmax: Option<u32>,
    /// Discount factor.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    click_value: Option<f64>,
    /// Expected CTR per auction.
    #[arg(long)]
    ctr: Option<f64>,
    /// Derive the expected CTR from this log instead.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    data_schema: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Test log to replay (must be uncensored).
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    /// Output CSV path; a JSON twin is written next to it.
    #[arg(long)]
    out: PathBuf,
    /// Bidder spec; repeat for one row per bidder. Forms: `rlb:TABLE.json`,
    /// `lb:BASE_BID`, `mcpc:MAX_CPC`, `const:BID`.
    #[arg(long = "bidder", required = true)]
    bidders: Vec<String>,
    /// Training log for budget derivation and the linear bidder's average
    /// CTR.
    #[arg(long)]
    train_data: Option<PathBuf>,
    #[arg(long)]
    train_schema: Option<PathBuf>,
    /// Explicit per-episode budget (overrides the derived one).
    #[arg(long)]
    budget: Option<u32>,
    /// Auctions per episode (N).
    #[arg(long)]
    n: Option<usize>,
    /// Budget fraction (c0).
    #[arg(long)]
    c0: Option<f64>,
    #[arg(long)]
    payment: Option<String>,
    #[arg(long)]
    levels: Option<usize>,
}

/// Entry point: parses arguments, runs the command, maps errors to exit
/// codes.
pub fn run() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::new().filter("BIDCRAFT_LOG")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Simulate(args) => cmd_simulate(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => 1,
                _ => 2,
            }
        }
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let config = RunConfig::load(args.config.as_deref())?;
    let mut synth = config.synthetic.unwrap_or_default();
    if let Some(levels) = args.levels.or(config.price_levels) {
        synth.price_levels = levels;
    }
    if let Some(n) = args.n {
        synth.n = n;
    }
    if let Some(seed) = args.seed {
        synth.seed = seed;
    }
    if let Some(ctr) = args.mean_ctr {
        synth.mean_ctr = ctr;
    }
    if let Some(campaign) = args.campaign {
        synth.campaign_id = campaign;
    }
    if let Some(spec) = &args.price_law {
        synth.price_law = parse_law(spec)?;
    }
    if let Some(spec) = &args.censor_law {
        synth.censor_law = Some(parse_law(spec)?);
    }
    if let Some(path) = &args.from_model {
        let model = MarketModel::load(path)?;
        synth.price_levels = model.price_levels();
        synth.price_law = PriceLaw::Empirical {
            pmf: model.baseline_distribution()?.pmf().to_vec(),
        };
    }

    let dataset = generate_synthetic(&synth)?;
    let mut buf = Vec::new();
    write_tsv(&dataset, &mut buf)?;
    write_atomic(&args.out, &buf)?;

    let schema = LogSchema::canonical(synth.feature_vocab.len());
    let schema_path = args
        .schema_out
        .unwrap_or_else(|| args.out.with_extension("schema.json"));
    write_atomic(&schema_path, schema.to_json().as_bytes())?;

    println!(
        "generated {} records (L={}, {} censored) -> {}",
        dataset.len(),
        dataset.price_levels(),
        dataset.censored_count(),
        args.out.display()
    );
    Ok(())
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let config = RunConfig::load(args.config.as_deref())?;
    let levels = args
        .levels
        .or(config.price_levels)
        .unwrap_or(DEFAULT_PRICE_LEVELS);
    let dataset = read_dataset(&args.data, &args.schema, levels, !args.lenient)?;

    let mut train_cfg = config.train.unwrap_or_default();
    if let Some(epochs) = args.epochs {
        train_cfg.epochs = epochs;
    }
    if let Some(lr) = args.learning_rate {
        train_cfg.learning_rate = lr;
    }
    if let Some(mb) = args.minibatch {
        train_cfg.minibatch = mb;
    }
    if let Some(seed) = args.seed {
        train_cfg.seed = seed;
    }
    if let Some(e) = args.embed_dim {
        train_cfg.embed_dim = e;
    }
    if let Some(d) = args.hidden_dim {
        train_cfg.hidden_dim = d;
    }

    let model = match args.model.as_str() {
        "km" => MarketModel::fit_km(&dataset)?,
        "gamma" => MarketModel::fit_gamma(&dataset)?,
        "forecaster" => {
            let (model, history) = MarketModel::fit_forecaster(&dataset, &train_cfg)?;
            let loss_path = args
                .loss_csv
                .clone()
                .unwrap_or_else(|| args.out.with_extension("loss.csv"));
            let mut csv = String::from("epoch,L,L_total\n");
            for stat in &history {
                csv.push_str(&format!("{},{},{}\n", stat.epoch, stat.mse, stat.total));
            }
            write_atomic(&loss_path, csv.as_bytes())?;
            model
        }
        other => {
            return Err(Error::config(format!(
                "unknown model kind {other:?}; expected km, gamma, or forecaster"
            )))
        }
    };
    write_atomic(&args.out, model.to_json()?.as_bytes())?;
    println!(
        "fitted {} on {} records -> {}",
        model.kind(),
        dataset.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let config = RunConfig::load(args.config.as_deref())?;
    let levels = args
        .levels
        .or(config.price_levels)
        .unwrap_or(DEFAULT_PRICE_LEVELS);
    let dataset = read_dataset(&args.data, &args.schema, levels, true)?;

    let mut csv = String::from("Algorithm,AUC,Log Loss,ANLP\n");
    for path in &args.models {
        let model = MarketModel::load(path)?;
        let scores = evaluate_model(&model, &dataset, args.eps)?;
        let auc = scores.auc.map_or("NA".to_string(), |v| format!("{v:.6}"));
        csv.push_str(&format!(
            "{},{auc},{:.6},{:.6}\n",
            model.kind(),
            scores.log_loss,
            scores.anlp,
        ));
    }
    write_atomic(&args.out, csv.as_bytes())?;
    println!(
        "evaluated {} model(s) -> {}",
        args.models.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let config = RunConfig::load(args.config.as_deref())?;
    let model = MarketModel::load(&args.model)?;
    let dist = model.baseline_distribution()?;

    let mean_ctr = match (args.ctr, &args.data) {
        (Some(ctr), _) => ctr,
        (None, Some(path)) => {
            let schema = args.data_schema.as_ref().ok_or_else(|| {
                Error::config("--data requires --data-schema to derive the CTR")
            })?;
            read_dataset(path, schema, model.price_levels(), true)?.mean_pctr()
        }
        (None, None) => {
            return Err(Error::config(
                "provide --ctr or --data to fix the expected CTR",
            ))
        }
    };

    let mut solver = match config.solver {
        Some(solver) => solver,
        None => {
            let (Some(budget), Some(horizon)) = (args.budget, args.horizon) else {
                return Err(Error::config(
                    "provide --budget and --horizon (or a config with a solver section)",
                ));
            };
            SolverConfig::new(budget, horizon)
        }
    };
    if let Some(budget) = args.budget {
        solver.budget = budget;
    }
    if let Some(horizon) = args.horizon {
        solver.horizon = horizon;
    }
    if let Some(objective) = &args.objective {
        solver.objective = parse_enum(objective)?;
    }
    if let Some(payment) = &args.payment {
        solver.payment = parse_enum(payment)?;
    }
    if let Some(bmax) = args.bmax {
        solver.truncate_at = Some(bmax);
    }
    if let Some(gamma) = args.gamma {
        solver.discount = gamma;
    }
    if let Some(v) = args.click_value {
        solver.click_value = v;
    }

    let transition = TransitionModel::new(dist, mean_ctr)?;
    let table = if solver.truncate_at.is_some() {
        solve_truncated(&transition, &solver)?
    } else {
        solve_exact(&transition, &solver)?
    };
    write_atomic(&args.out, serde_json::to_string(&table)?.as_bytes())?;
    println!(
        "solved budget={} horizon={}: V={:.6} -> {}",
        solver.budget,
        solver.horizon,
        table.value(solver.budget, solver.horizon)?,
        args.out.display()
    );
    Ok(())
}

enum BidderSpec {
    Rlb(PathBuf),
    Lb(u32),
    Mcpc(f64),
    Const(u32),
}

fn parse_bidder_spec(spec: &str) -> Result<BidderSpec> {
    let (kind, arg) = spec
        .split_once(':')
        .ok_or_else(|| Error::config(format!("bidder spec {spec:?} needs the form kind:arg")))?;
    let bad = |what: &str| Error::config(format!("bidder spec {spec:?}: bad {what}"));
    Ok(match kind {
        "rlb" => BidderSpec::Rlb(PathBuf::from(arg)),
        "lb" => BidderSpec::Lb(arg.parse().map_err(|_| bad("base bid"))?),
        "mcpc" => BidderSpec::Mcpc(arg.parse().map_err(|_| bad("max cpc"))?),
        "const" => BidderSpec::Const(arg.parse().map_err(|_| bad("bid"))?),
        other => {
            return Err(Error::config(format!(
                "unknown bidder kind {other:?}; expected rlb, lb, mcpc, or const"
            )))
        }
    })
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let config = RunConfig::load(args.config.as_deref())?;
    let levels = args
        .levels
        .or(config.price_levels)
        .unwrap_or(DEFAULT_PRICE_LEVELS);
    let dataset = read_dataset(&args.data, &args.schema, levels, true)?;
    if dataset.censored_count() > 0 {
        return Err(Error::data(
            "replay requires uncensored logs; regenerate the test log without a censor law \
             or filter the censored records out",
        ));
    }

    let mut episode = config.episode.unwrap_or_default();
    if let Some(n) = args.n {
        episode.auctions_per_episode = n;
    }
    if let Some(c0) = args.c0 {
        episode.budget_fraction = c0;
    }
    if let Some(payment) = &args.payment {
        episode.payment = parse_enum(payment)?;
    }
    if let Some(budget) = args.budget {
        episode.budget_override = Some(budget);
    }

    let train_dataset = match (&args.train_data, &args.train_schema) {
        (Some(data), Some(schema)) => Some(read_dataset(data, schema, levels, true)?),
        (Some(data), None) => Some(read_dataset(data, &args.schema, levels, true)?),
        (None, _) => None,
    };
    let budget = match (episode.budget_override, &train_dataset) {
        (Some(b), _) => b,
        (None, Some(train)) => compute_episode_budget(train, &episode)?,
        (None, None) => {
            return Err(Error::config(
                "provide --budget or --train-data to fix the episode budget",
            ))
        }
    };
    let avg_ctr = train_dataset
        .as_ref()
        .map(|d| d.mean_pctr())
        .unwrap_or_else(|| dataset.mean_pctr());
    let campaign = dataset
        .records()
        .first()
        .map(|r| r.campaign_id.clone())
        .unwrap_or_else(|| "unknown".to_string());
    let cap = dataset.price_cap();

    let mut csv = String::from(
        "Campaign,Algorithm,Objective,Auction,Impression,Clicks,Cost,Win Rate,CPM,E-CPC\n",
    );
    let mut rows = Vec::new();
    for spec in &args.bidders {
        let (name, report) = match parse_bidder_spec(spec)? {
            BidderSpec::Rlb(path) => {
                let table = ValueTable::load(&path)?;
                let mut bidder = PolicyBidder::new(&table);
                run_named(&dataset, &mut bidder, &episode, budget)?
            }
            BidderSpec::Lb(base_bid) => {
                let mut bidder = LinearBidder {
                    base_bid,
                    avg_ctr,
                    cap,
                };
                run_named(&dataset, &mut bidder, &episode, budget)?
            }
            BidderSpec::Mcpc(max_cpc) => {
                let mut bidder = McpcBidder { max_cpc, cap };
                run_named(&dataset, &mut bidder, &episode, budget)?
            }
            BidderSpec::Const(bid) => {
                let mut bidder = ConstantBidder { bid };
                run_named(&dataset, &mut bidder, &episode, budget)?
            }
        };
        csv.push_str(&report_csv_row(&campaign, &name, &report));
        rows.push(report_json_row(&campaign, &name, &report));
    }
    write_atomic(&args.out, csv.as_bytes())?;
    let json_path = args.out.with_extension("json");
    write_atomic(
        &json_path,
        serde_json::to_string_pretty(&serde_json::Value::Array(rows))?.as_bytes(),
    )?;
    println!(
        "simulated {} bidder(s) over {} auctions (B0={budget}) -> {} + {}",
        args.bidders.len(),
        dataset.len(),
        args.out.display(),
        json_path.display()
    );
    Ok(())
}

fn run_named(
    dataset: &CampaignDataset,
    bidder: &mut dyn Bidder,
    episode: &EpisodeConfig,
    budget: u32,
) -> Result<(String, CampaignReport)> {
    let name = bidder.name().to_string();
    let report = run_campaign(dataset, bidder, episode, budget)?;
    Ok((name, report))
}

fn report_csv_row(campaign: &str, name: &str, report: &CampaignReport) -> String {
    let fmt_pct = |v: Option<f64>| v.map_or("NA".to_string(), |v| format!("{:.2}%", v * 100.0));
    let fmt = |v: Option<f64>| v.map_or("NA".to_string(), |v| format!("{v:.2}"));
    format!(
        "{},{},{},{},{},{},{},{},{},{}\n",
        campaign,
        name,
        report.clicks,
        report.auctions,
        report.impressions,
        report.clicks,
        report.cost,
        fmt_pct(report.win_rate()),
        fmt(report.cpm()),
        fmt(report.ecpc()),
    )
}

fn report_json_row(campaign: &str, name: &str, report: &CampaignReport) -> serde_json::Value {
    serde_json::json!({
        "campaign": campaign,
        "algorithm": name,
        "objective": report.clicks,
        "auctions": report.auctions,
        "impressions": report.impressions,
        "clicks": report.clicks,
        "cost": report.cost,
        "win_rate": report.win_rate(),
        "cpm": report.cpm(),
        "ecpc": report.ecpc(),
    })
}

fn parse_law(spec: &str) -> Result<PriceLaw> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let bad = || Error::config(format!("bad price-law spec {spec:?}"));
    match kind {
        "gamma" => {
            let (shape, scale) = rest.split_once(',').ok_or_else(bad)?;
            Ok(PriceLaw::Gamma {
                shape: shape.parse().map_err(|_| bad())?,
                scale: scale.parse().map_err(|_| bad())?,
            })
        }
        "uniform" => {
            let (lo, hi) = rest.split_once(',').ok_or_else(bad)?;
            Ok(PriceLaw::Uniform {
                lo: lo.parse().map_err(|_| bad())?,
                hi: hi.parse().map_err(|_| bad())?,
            })
        }
        "point" => Ok(PriceLaw::Point {
            level: rest.parse().map_err(|_| bad())?,
        }),
        _ => Err(Error::config(format!(
            "unknown price law {kind:?}; expected gamma, uniform, or point"
        ))),
    }
}

fn parse_enum<T: serde::de::DeserializeOwned>(name: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(name.to_string()))
        .map_err(|_| Error::config(format!("unrecognized value {name:?}")))
}

fn read_dataset(
    data: &Path,
    schema: &Path,
    levels: usize,
    strict: bool,
) -> Result<CampaignDataset> {
    let schema_text = std::fs::read_to_string(schema)
        .map_err(|e| Error::config(format!("cannot read schema {}: {e}", schema.display())))?;
    let schema = LogSchema::from_json(&schema_text)?;
    let file = std::fs::File::open(data)
        .map_err(|e| Error::data(format!("cannot read data {}: {e}", data.display())))?;
    let opts = ParseOptions {
        price_levels: levels,
        strict,
    };
    let (dataset, stats) = parse_log(BufReader::new(file), &schema, &opts)?;
    if stats.skipped > 0 || stats.clamped > 0 {
        log::warn!(
            "{}: skipped {} malformed line(s), clamped {} price(s)",
            data.display(),
            stats.skipped,
            stats.clamped
        );
    }
    Ok(dataset)
}

/// Writes through a temp file in the target directory and renames, so a
/// partial artifact never lands at the final path.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))?;
    std::io::Write::write_all(&mut tmp, bytes)?;
    tmp.persist(path).map_err(|e| {
        Error::Io(std::io::Error::other(format!(
            "persist {}: {e}",
            path.display()
        )))
    })?;
    Ok(())
}
