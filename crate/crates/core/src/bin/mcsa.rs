use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use mcsa::clearing::{dump_diagnostics, run_auction, AuctionConfig, PricingRule};
use mcsa::evaluation::{compute_metrics, pure_allocation_with_groups};
use mcsa::generate::{BiddingPattern, BuyerDistribution};
use mcsa::harness::{
    csv_row, parse_distribution, run_sweep, run_verify, summarize, write_csv, ExperimentConfig, SweepParameter,
    SweepPlan, VerifyPlan, CSV_HEADER,
};
use mcsa::robustness::{Deviation, Misreport};
use mcsa::{parse_scenario, serialize_scenario, Bidding, Length, Scenario};

#[derive(Parser)]
#[command(name = "mcsa", version, about = "Multi-channel spectrum double auction engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clear one market and print the full diagnostic dump and metrics row.
    Run(RunArgs),
    /// Average metrics over many generated markets per parameter value.
    Sweep(SweepArgs),
    /// Probe generated markets for budget, rationality and truthfulness failures.
    Verify(VerifyArgs),
    /// Write a generated scenario file.
    Gen(GenArgs),
}

#[derive(Args, Clone)]
struct MarketArgs {
    #[arg(long)]
    sellers: Option<u32>,
    #[arg(long)]
    buyers: Option<u32>,
    /// Protection distance.
    #[arg(long)]
    distance: Option<Length>,
    /// Side of the square area.
    #[arg(long)]
    area: Option<Length>,
    /// Bidding pattern `c_max,d_max,b0`.
    #[arg(long)]
    pattern: Option<BiddingPattern>,
    /// `random` or `cluster`.
    #[arg(long, value_parser = distribution_arg)]
    distribution: Option<BuyerDistribution>,
    /// `mmin` or `gmax`.
    #[arg(long, default_value = "mmin")]
    bidding: Bidding,
}

fn distribution_arg(s: &str) -> Result<BuyerDistribution, String> {
    parse_distribution(s).ok_or_else(|| format!("unknown distribution `{s}` (expected random or cluster)"))
}

impl MarketArgs {
    fn config(&self, base: ExperimentConfig) -> ExperimentConfig {
        ExperimentConfig {
            sellers: self.sellers.unwrap_or(base.sellers),
            buyers: self.buyers.unwrap_or(base.buyers),
            distance: self.distance.unwrap_or(base.distance),
            area: self.area.unwrap_or(base.area),
            pattern: self.pattern.unwrap_or(base.pattern),
            distribution: self.distribution.unwrap_or(base.distribution),
            bidding: self.bidding,
            ties: base.ties,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file; without it a market is generated from the flags below.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[command(flatten)]
    market: MarketArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replace one bid before clearing: `B<id>:<bid>:<demand>` or `S<id>:<ask>`.
    #[arg(long)]
    deviate: Vec<Deviation>,
    /// Also write the metrics CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// sellers, buyers, distance, pattern, distribution or bidding.
    #[arg(long)]
    sweep: SweepParameter,
    /// Comma list (`10,20`), count range (`10..100/10`), or `;` list for patterns.
    #[arg(long)]
    values: String,
    #[command(flatten)]
    market: MarketArgs,
    #[arg(long, default_value_t = 500)]
    rounds: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 200)]
    scenarios: u32,
    /// Sampled misreports per bidder.
    #[arg(long, default_value_t = 20)]
    deviations: usize,
    #[command(flatten)]
    market: MarketArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the first counterexample.
    #[arg(long, default_value = "counterexample.scn")]
    counterexample: PathBuf,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Keep every buyer's demand truthful and misreport prices only.
    #[arg(long)]
    price_only: bool,
    #[arg(long, hide = true)]
    pricing_mutant: bool,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    market: MarketArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn load(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_scenario(&text).with_context(|| format!("in {}", path.display()))
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let config = args.market.config(ExperimentConfig::default());
    let mut scenario = match &args.scenario {
        Some(path) => load(path)?,
        None => config.generate(args.seed)?,
    };
    for d in &args.deviate {
        scenario = d.apply(&scenario).with_context(|| format!("cannot apply {d}"))?;
    }
    let auction = AuctionConfig { bidding: args.market.bidding, ..AuctionConfig::default() };
    let outcome = run_auction(&scenario, auction)?;
    print!("{}", dump_diagnostics(&outcome, &scenario));

    let pa = pure_allocation_with_groups(
        &scenario,
        &outcome.diagnostics.groups,
        outcome.settlement.channels_sold(),
        auction.ties,
    );
    let metrics = compute_metrics(&outcome.settlement, &scenario, pa);
    let evaluation = mcsa::evaluation::Evaluation { settlement: outcome.settlement, metrics };
    let point = ExperimentConfig {
        sellers: scenario.asks().len() as u32,
        buyers: scenario.bids().len() as u32,
        distance: scenario.protection_distance(),
        area: scenario.area_side(),
        ..config
    };
    let row = csv_row(scenario.rng_seed(), &summarize(point, std::slice::from_ref(&evaluation)));
    println!("\n== Metrics\n{CSV_HEADER}\n{row}");
    if let Some(out) = &args.out {
        write_file(out, &format!("{CSV_HEADER}\n{row}\n"))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode> {
    let plan = SweepPlan {
        base: args.market.config(ExperimentConfig::default()),
        values: args.sweep.parse_values(&args.values)?,
        rounds: args.rounds,
    };
    let csv = write_csv(args.seed, &run_sweep(&plan, args.seed, args.workers)?);
    match &args.out {
        Some(out) => write_file(out, &csv)?,
        None => print!("{csv}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode> {
    let defaults = VerifyPlan::default();
    let plan = VerifyPlan {
        scenarios: args.scenarios,
        deviations: args.deviations,
        base: args.market.config(defaults.base),
        pricing: if args.pricing_mutant { PricingRule::PayOwnAsk } else { PricingRule::Uniform },
        scope: if args.price_only { Misreport::PriceOnly } else { Misreport::PriceAndDemand },
    };
    let report = run_verify(&plan, args.seed, args.workers)?;
    print!("{}", report.summary());
    for (seed, v) in report.property_failures.iter().take(10) {
        println!("scenario seed {seed}: {v}");
    }
    if let Some(c) = report.counterexamples.first() {
        println!("profitable misreport {} gains {}", c.deviation, c.gain);
        write_file(&args.counterexample, &c.file_text())?;
        println!("counterexample written to {}", args.counterexample.display());
    }
    Ok(if report.is_clean() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_gen(args: GenArgs) -> Result<ExitCode> {
    let scenario = args.market.config(ExperimentConfig::default()).generate(args.seed)?;
    let text = serialize_scenario(&scenario);
    match &args.out {
        Some(out) => write_file(out, &text)?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Gen(a) => cmd_gen(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
