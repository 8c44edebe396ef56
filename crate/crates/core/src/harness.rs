//! Monte Carlo sweeps and robustness campaigns.
//!
//! Round `r` of sweep point `p` draws its market from
//! `derive_seed(master, [p, r])`, so points are independent and a sweep is a
//! pure function of its plan and master seed. Means are accumulated as exact
//! rationals and only rounded when written out, so the worker count never
//! changes the output.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;
use thiserror::Error;

use crate::clearing::{AuctionConfig, PricingRule, SettleError};
use crate::evaluation::{evaluate, Evaluation};
use crate::generate::{generate_scenario, BiddingPattern, BuyerDistribution, DistributionSpec, GenError};
use crate::model::{Length, Scenario, TruthProfile};
use crate::money::{format_rational, SignedMoney};
use crate::rng::{derive_seed, TieBreak};
use crate::robustness::{
    probe_buyer, probe_seller, CaseCounts, Deviation, DeviationBudget, DeviationReport, Misreport, ProbeError,
    PropertyViolation,
};
use crate::scenario_io::serialize_scenario;
use crate::vbg::Bidding;

pub const CSV_HEADER: &str = "seed,mechanism,pattern,sellers,buyers,distance,alpha,nt,beta,eta,alpha_pa,phi";
/// Decimal places of averaged CSV fields.
pub const CSV_PLACES: u32 = 6;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Settle(#[from] SettleError),
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error("a sweep needs at least one value")]
    NoValues,
    #[error("rounds per point must be at least 1")]
    ZeroRounds,
    #[error("scenario count must be at least 1")]
    ZeroScenarios,
    #[error("deviations per bidder must be at least 1")]
    ZeroDeviations,
    #[error("unknown sweep parameter `{0}` (expected sellers, buyers, distance, pattern, distribution or bidding)")]
    UnknownParameter(String),
    #[error("bad {parameter} value `{value}`")]
    BadValue { parameter: SweepParameter, value: String },
    #[error("worker pool: {0}")]
    Pool(String),
}

/// One market configuration; the seed comes per round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub sellers: u32,
    pub buyers: u32,
    pub distance: Length,
    pub area: Length,
    pub pattern: BiddingPattern,
    pub distribution: BuyerDistribution,
    pub bidding: Bidding,
    pub ties: TieBreak,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            sellers: 10,
            buyers: 100,
            distance: Length::from_units(10),
            area: Length::from_units(100),
            pattern: BiddingPattern::default(),
            distribution: BuyerDistribution::Random,
            bidding: Bidding::Mmin,
            ties: TieBreak::ById,
        }
    }
}

impl ExperimentConfig {
    pub fn auction(&self) -> AuctionConfig {
        AuctionConfig { bidding: self.bidding, ties: self.ties, pricing: PricingRule::Uniform }
    }

    pub fn generate(&self, seed: u64) -> Result<Scenario, GenError> {
        let spec = DistributionSpec { kind: self.distribution, sellers: self.sellers, buyers: self.buyers };
        generate_scenario(&self.pattern, &spec, self.area, self.distance, seed)
    }

    /// Bidding rule, plus the buyer layout when it is not uniform.
    pub fn mechanism(&self) -> String {
        match self.distribution {
            BuyerDistribution::Random => self.bidding.to_string(),
            d => format!("{}/{}", self.bidding, d.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    Sellers,
    Buyers,
    Distance,
    Pattern,
    Distribution,
    Bidding,
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParameter::Sellers => "sellers",
            SweepParameter::Buyers => "buyers",
            SweepParameter::Distance => "distance",
            SweepParameter::Pattern => "pattern",
            SweepParameter::Distribution => "distribution",
            SweepParameter::Bidding => "bidding",
        })
    }
}

impl FromStr for SweepParameter {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "sellers" => SweepParameter::Sellers,
            "buyers" => SweepParameter::Buyers,
            "distance" => SweepParameter::Distance,
            "pattern" => SweepParameter::Pattern,
            "distribution" => SweepParameter::Distribution,
            "bidding" => SweepParameter::Bidding,
            _ => return Err(HarnessError::UnknownParameter(s.to_string())),
        })
    }
}

pub fn parse_distribution(text: &str) -> Option<BuyerDistribution> {
    match text.trim().to_ascii_lowercase().as_str() {
        "random" => Some(BuyerDistribution::Random),
        "cluster" | "clustered" => Some(BuyerDistribution::default_clustered()),
        _ => None,
    }
}

impl SweepParameter {
    /// Values are separated by `;`, or by `,` for parameters whose values
    /// contain no commas. Counts also accept `start..end/step` (inclusive).
    pub fn parse_values(self, text: &str) -> Result<Vec<SweepValue>, HarnessError> {
        let items: Vec<&str> = if text.contains(';') || self == SweepParameter::Pattern {
            text.split(';').collect()
        } else {
            text.split(',').collect()
        };
        let mut out = Vec::new();
        for item in items.iter().map(|i| i.trim()).filter(|i| !i.is_empty()) {
            let bad = || HarnessError::BadValue { parameter: self, value: item.to_string() };
            match self {
                SweepParameter::Sellers | SweepParameter::Buyers => {
                    for n in parse_counts(item).ok_or_else(bad)? {
                        out.push(if self == SweepParameter::Sellers {
                            SweepValue::Sellers(n)
                        } else {
                            SweepValue::Buyers(n)
                        });
                    }
                }
                SweepParameter::Distance => out.push(SweepValue::Distance(item.parse().map_err(|_| bad())?)),
                SweepParameter::Pattern => out.push(SweepValue::Pattern(item.parse().map_err(|_| bad())?)),
                SweepParameter::Distribution => {
                    out.push(SweepValue::Distribution(parse_distribution(item).ok_or_else(bad)?))
                }
                SweepParameter::Bidding => out.push(SweepValue::Bidding(item.parse().map_err(|_| bad())?)),
            }
        }
        if out.is_empty() {
            return Err(HarnessError::NoValues);
        }
        Ok(out)
    }
}

fn parse_counts(item: &str) -> Option<Vec<u32>> {
    let Some((start, rest)) = item.split_once("..") else {
        return item.parse().ok().map(|n| vec![n]);
    };
    let (end, step) = rest.split_once('/').unwrap_or((rest, "1"));
    let (start, end, step): (u32, u32, u32) = (start.parse().ok()?, end.parse().ok()?, step.parse().ok()?);
    if step == 0 || start > end {
        return None;
    }
    Some((start..=end).step_by(step as usize).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepValue {
    Sellers(u32),
    Buyers(u32),
    Distance(Length),
    Pattern(BiddingPattern),
    Distribution(BuyerDistribution),
    Bidding(Bidding),
}

impl SweepValue {
    pub fn apply(&self, base: &ExperimentConfig) -> ExperimentConfig {
        let mut c = *base;
        match *self {
            SweepValue::Sellers(n) => c.sellers = n,
            SweepValue::Buyers(n) => c.buyers = n,
            SweepValue::Distance(d) => c.distance = d,
            SweepValue::Pattern(p) => c.pattern = p,
            SweepValue::Distribution(d) => c.distribution = d,
            SweepValue::Bidding(b) => c.bidding = b,
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepPlan {
    pub base: ExperimentConfig,
    pub values: Vec<SweepValue>,
    pub rounds: u32,
}

impl SweepPlan {
    pub fn points(&self) -> Result<Vec<ExperimentConfig>, HarnessError> {
        if self.values.is_empty() {
            return Err(HarnessError::NoValues);
        }
        if self.rounds == 0 {
            return Err(HarnessError::ZeroRounds);
        }
        Ok(self.values.iter().map(|v| v.apply(&self.base)).collect())
    }
}

/// Means over the rounds of one sweep point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointSummary {
    pub config: ExperimentConfig,
    pub rounds: u32,
    pub alpha: BigRational,
    pub nt: BigRational,
    pub beta: BigRational,
    /// Mean over the rounds where degradation is defined.
    pub eta: Option<BigRational>,
    pub eta_rounds: u32,
    pub alpha_pa: BigRational,
    pub phi: BigRational,
}

fn mean(total: BigRational, count: usize) -> BigRational {
    if count == 0 {
        BigRational::zero()
    } else {
        total / BigRational::from_integer(BigInt::from(count))
    }
}

fn money_sum<'a>(items: impl Iterator<Item = &'a Evaluation>, f: impl Fn(&Evaluation) -> SignedMoney) -> BigRational {
    items.map(f).fold(SignedMoney::ZERO, |a, b| a + b).to_rational()
}

/// Pairwise sum. Denominators grow with every distinct term, so a left fold
/// turns quadratic on long runs.
fn rational_sum(mut terms: Vec<BigRational>) -> BigRational {
    while terms.len() > 1 {
        let mut next = Vec::with_capacity(terms.len().div_ceil(2));
        let mut it = terms.into_iter();
        while let Some(a) = it.next() {
            next.push(match it.next() {
                Some(b) => a + b,
                None => a,
            });
        }
        terms = next;
    }
    terms.pop().unwrap_or_else(BigRational::zero)
}

pub fn summarize(config: ExperimentConfig, rounds: &[Evaluation]) -> PointSummary {
    let n = rounds.len();
    let etas: Vec<&BigRational> = rounds.iter().filter_map(|e| e.metrics.degradation.as_ref()).collect();
    let eta_rounds = etas.len();
    let eta_total = rational_sum(etas.into_iter().cloned().collect());
    let nt_total: u64 = rounds.iter().map(|e| e.metrics.channels_traded).sum();
    let beta_total = rational_sum(rounds.iter().map(|e| e.metrics.per_channel_efficiency.clone()).collect());
    PointSummary {
        config,
        rounds: n as u32,
        alpha: mean(money_sum(rounds.iter(), |e| e.metrics.efficiency), n),
        nt: mean(BigRational::from_integer(BigInt::from(nt_total)), n),
        beta: mean(beta_total, n),
        eta: (eta_rounds > 0).then(|| mean(eta_total, eta_rounds)),
        eta_rounds: eta_rounds as u32,
        alpha_pa: mean(money_sum(rounds.iter(), |e| e.metrics.pa_efficiency), n),
        phi: mean(money_sum(rounds.iter(), |e| e.settlement.profit), n),
    }
}

pub fn round_seed(master: u64, point: usize, round: u32) -> u64 {
    derive_seed(master, &[point as u64, u64::from(round)])
}

/// Runs every round of one point on the current rayon pool.
pub fn run_point(
    config: &ExperimentConfig,
    master_seed: u64,
    point: usize,
    rounds: u32,
) -> Result<PointSummary, HarnessError> {
    if rounds == 0 {
        return Err(HarnessError::ZeroRounds);
    }
    let evals = (0..rounds)
        .into_par_iter()
        .map(|r| {
            let scenario = config.generate(round_seed(master_seed, point, r))?;
            Ok(evaluate(&scenario, config.auction())?)
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(summarize(*config, &evals))
}

/// Runs `job` on a pool of `workers` threads, or rayon's default when 0.
pub fn with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T, HarnessError> {
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| HarnessError::Pool(e.to_string()))?;
    Ok(pool.install(job))
}

pub fn run_sweep(plan: &SweepPlan, master_seed: u64, workers: usize) -> Result<Vec<PointSummary>, HarnessError> {
    let points = plan.points()?;
    with_workers(workers, || {
        points.iter().enumerate().map(|(i, c)| run_point(c, master_seed, i, plan.rounds)).collect::<Result<Vec<_>, _>>()
    })?
}

fn dec(value: &BigRational) -> String {
    format_rational(value, CSV_PLACES)
}

/// One CSV line (no newline). The pattern is quoted since it contains commas;
/// an undefined degradation is left empty.
pub fn csv_row(seed: u64, s: &PointSummary) -> String {
    format!(
        "{seed},{},\"{}\",{},{},{},{},{},{},{},{},{}",
        s.config.mechanism(),
        s.config.pattern,
        s.config.sellers,
        s.config.buyers,
        s.config.distance,
        dec(&s.alpha),
        dec(&s.nt),
        dec(&s.beta),
        s.eta.as_ref().map(dec).unwrap_or_default(),
        dec(&s.alpha_pa),
        dec(&s.phi),
    )
}

pub fn write_csv(seed: u64, summaries: &[PointSummary]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for s in summaries {
        out.push_str(&csv_row(seed, s));
        out.push('\n');
    }
    out
}

/// Robustness campaign over generated markets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyPlan {
    pub scenarios: u32,
    /// Sampled misreports per bidder.
    pub deviations: usize,
    pub base: ExperimentConfig,
    pub pricing: PricingRule,
    pub scope: Misreport,
}

impl Default for VerifyPlan {
    fn default() -> Self {
        VerifyPlan {
            scenarios: 200,
            deviations: 20,
            base: ExperimentConfig { sellers: 5, buyers: 30, ..ExperimentConfig::default() },
            pricing: PricingRule::Uniform,
            scope: Misreport::PriceAndDemand,
        }
    }
}

/// A profitable misreport, replayable from its file form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub scenario: Scenario,
    pub deviation: Deviation,
    pub gain: SignedMoney,
    pub bidding: Bidding,
}

impl Counterexample {
    /// A scenario file with the misreport in its leading comments.
    pub fn file_text(&self) -> String {
        format!(
            "# profitable misreport {} gains {} under {}\n# replay: mcsa run --scenario <file> --bidding {} --deviate {}\n{}",
            self.deviation,
            self.gain,
            self.bidding,
            self.bidding,
            self.deviation,
            serialize_scenario(&self.scenario)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VerifyReport {
    pub scenarios: u32,
    pub bidders: u64,
    pub deviations_tried: u64,
    /// Fewest misreports tried for any single bidder.
    pub min_deviations: Option<u64>,
    pub cases: CaseCounts,
    /// Largest deviant-minus-truthful utility seen.
    pub max_gain: Option<SignedMoney>,
    pub counterexamples: Vec<Counterexample>,
    /// Scenario seed and the property it failed.
    pub property_failures: Vec<(u64, PropertyViolation)>,
}

impl VerifyReport {
    pub fn violations(&self) -> usize {
        self.counterexamples.len() + self.property_failures.len()
    }

    pub fn is_clean(&self) -> bool {
        self.violations() == 0
    }

    fn absorb(&mut self, seed: u64, scenario: &Scenario, report: DeviationReport, bidding: Bidding) {
        self.bidders += 1;
        self.deviations_tried += report.deviations_tried;
        self.min_deviations =
            Some(self.min_deviations.map_or(report.deviations_tried, |m| m.min(report.deviations_tried)));
        for (total, n) in self.cases.iter_mut().zip(report.cases) {
            *total += n;
        }
        let gain = report.max_gain();
        self.max_gain = Some(self.max_gain.map_or(gain, |g| g.max(gain)));
        if report.truthful_utility.is_negative() {
            self.property_failures
                .push((seed, PropertyViolation::NegativeUtility(report.bidder, report.truthful_utility)));
        }
        self.property_failures.extend(report.property_violations.into_iter().map(|v| (seed, v)));
        if let Some(v) = report.violation {
            self.counterexamples.push(Counterexample {
                scenario: scenario.clone(),
                deviation: v.deviation,
                gain: v.gain,
                bidding,
            });
        }
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenarios        {}", self.scenarios);
        let _ = writeln!(out, "bidders probed   {}", self.bidders);
        let _ = writeln!(
            out,
            "deviations       {} (min per bidder {})",
            self.deviations_tried,
            self.min_deviations.unwrap_or(0)
        );
        let _ = writeln!(
            out,
            "cases            lose/lose {}  lose/win {}  win/lose {}  win/win {}",
            self.cases[0], self.cases[1], self.cases[2], self.cases[3]
        );
        let _ = writeln!(out, "max gain         {}", self.max_gain.unwrap_or(SignedMoney::ZERO));
        let _ = writeln!(out, "property errors  {}", self.property_failures.len());
        let _ = writeln!(out, "{} violations", self.violations());
        out
    }
}

fn probe_scenario(plan: &VerifyPlan, seed: u64) -> Result<VerifyReport, HarnessError> {
    let scenario = plan.base.generate(seed)?;
    let truths = TruthProfile::truthful(&scenario);
    let config = AuctionConfig { pricing: plan.pricing, ..plan.base.auction() };
    let mut report = VerifyReport { scenarios: 1, ..Default::default() };
    let budget = |tag: u64, id: u32| DeviationBudget::Sample {
        count: plan.deviations,
        seed: derive_seed(seed, &[tag, u64::from(id)]),
    };
    for ask in scenario.asks() {
        let r = probe_seller(&scenario, &truths, ask.seller, budget(1, ask.seller.0), config)?;
        report.absorb(seed, &scenario, r, plan.base.bidding);
    }
    for bid in scenario.bids() {
        let r = probe_buyer(&scenario, &truths, bid.buyer, budget(2, bid.buyer.0), plan.scope, config)?;
        report.absorb(seed, &scenario, r, plan.base.bidding);
    }
    Ok(report)
}

fn merge(mut a: VerifyReport, b: VerifyReport) -> VerifyReport {
    a.scenarios += b.scenarios;
    a.bidders += b.bidders;
    a.deviations_tried += b.deviations_tried;
    a.min_deviations = match (a.min_deviations, b.min_deviations) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, y) => x.or(y),
    };
    for (x, y) in a.cases.iter_mut().zip(b.cases) {
        *x += y;
    }
    a.max_gain = match (a.max_gain, b.max_gain) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, y) => x.or(y),
    };
    a.counterexamples.extend(b.counterexamples);
    a.property_failures.extend(b.property_failures);
    a
}

/// Probes every bidder of `plan.scenarios` generated markets. Scenario `i`
/// uses seed `derive_seed(master, [i])`.
pub fn run_verify(plan: &VerifyPlan, master_seed: u64, workers: usize) -> Result<VerifyReport, HarnessError> {
    if plan.scenarios == 0 {
        return Err(HarnessError::ZeroScenarios);
    }
    if plan.deviations == 0 {
        return Err(HarnessError::ZeroDeviations);
    }
    let reports = with_workers(workers, || {
        (0..plan.scenarios)
            .into_par_iter()
            .map(|i| probe_scenario(plan, derive_seed(master_seed, &[u64::from(i)])))
            .collect::<Result<Vec<_>, _>>()
    })??;
    Ok(reports.into_iter().fold(VerifyReport::default(), merge))
}
