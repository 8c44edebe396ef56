//! Line-oriented scenario files.
//!
//! ```text
//! # comment
//! area 100 protect 10 seed 42
//! S <id> <ask> <supply>
//! B <id> <bid> <demand> <x> <y>
//! ```
//!
//! Numbers are plain decimals read exactly. The serializer writes the header,
//! then sellers, then buyers, each in scenario order, with canonical decimals
//! and a trailing newline.

use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{Ask, Bid, BuyerId, Length, Position, Scenario, SellerId, ValidationError};
use crate::money::{AmountError, Money};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioFileError {
    #[error("line {line}: {field}: {message}")]
    Syntax { line: usize, field: &'static str, message: String },
    #[error("missing `area ... protect ... seed ...` header")]
    MissingHeader,
    #[error("invalid scenario: {0}")]
    Invalid(#[from] ValidationError),
}

fn syntax(line: usize, field: &'static str, message: impl Into<String>) -> ScenarioFileError {
    ScenarioFileError::Syntax { line, field, message: message.into() }
}

pub fn serialize_scenario(scenario: &Scenario) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "area {} protect {} seed {}",
        scenario.area_side(),
        scenario.protection_distance(),
        scenario.rng_seed()
    )
    .unwrap();
    for a in scenario.asks() {
        writeln!(out, "S {} {} {}", a.seller.0, a.per_channel, a.supply).unwrap();
    }
    for b in scenario.bids() {
        writeln!(out, "B {} {} {} {} {}", b.buyer.0, b.per_channel, b.demand, b.position.x, b.position.y).unwrap();
    }
    out
}

struct Fields<'a> {
    line: usize,
    tokens: std::str::SplitWhitespace<'a>,
}

impl<'a> Fields<'a> {
    fn next(&mut self, field: &'static str) -> Result<&'a str, ScenarioFileError> {
        self.tokens.next().ok_or_else(|| syntax(self.line, field, "missing value"))
    }

    fn keyword(&mut self, expected: &'static str) -> Result<(), ScenarioFileError> {
        let tok = self.next(expected)?;
        if tok != expected {
            return Err(syntax(self.line, expected, format!("expected `{expected}`, found `{tok}`")));
        }
        Ok(())
    }

    fn int<T: std::str::FromStr>(&mut self, field: &'static str) -> Result<T, ScenarioFileError> {
        let tok = self.next(field)?;
        tok.parse().map_err(|_| syntax(self.line, field, format!("expected an integer, found `{tok}`")))
    }

    fn money(&mut self, field: &'static str) -> Result<Money, ScenarioFileError> {
        let tok = self.next(field)?;
        tok.parse().map_err(|e: AmountError| syntax(self.line, field, e.to_string()))
    }

    fn length(&mut self, field: &'static str) -> Result<Length, ScenarioFileError> {
        let tok = self.next(field)?;
        tok.parse().map_err(|e: AmountError| syntax(self.line, field, e.to_string()))
    }

    fn finish(mut self) -> Result<(), ScenarioFileError> {
        match self.tokens.next() {
            None => Ok(()),
            Some(extra) => Err(syntax(self.line, "end of line", format!("unexpected `{extra}`"))),
        }
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioFileError> {
    let mut header: Option<(Length, Length, u64)> = None;
    let mut asks = Vec::new();
    let mut bids = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut fields = Fields { line, tokens: content.split_whitespace() };
        let Some(kind) = fields.tokens.next() else { continue };
        match kind {
            "area" => {
                if header.is_some() {
                    return Err(syntax(line, "area", "duplicate header"));
                }
                let side = fields.length("area")?;
                fields.keyword("protect")?;
                let distance = fields.length("protect")?;
                fields.keyword("seed")?;
                let seed = fields.int("seed")?;
                fields.finish()?;
                header = Some((side, distance, seed));
            }
            "S" => {
                if header.is_none() {
                    return Err(syntax(line, "record", "seller before header"));
                }
                let seller = SellerId(fields.int("seller id")?);
                let per_channel = fields.money("ask")?;
                let supply = fields.int("supply")?;
                fields.finish()?;
                asks.push(Ask { seller, per_channel, supply });
            }
            "B" => {
                if header.is_none() {
                    return Err(syntax(line, "record", "buyer before header"));
                }
                let buyer = BuyerId(fields.int("buyer id")?);
                let per_channel = fields.money("bid")?;
                let demand = fields.int("demand")?;
                let x = fields.length("x")?;
                let y = fields.length("y")?;
                fields.finish()?;
                bids.push(Bid { buyer, per_channel, demand, position: Position::new(x, y) });
            }
            other => return Err(syntax(line, "record", format!("unknown record kind `{other}`"))),
        }
    }

    let (side, distance, seed) = header.ok_or(ScenarioFileError::MissingHeader)?;
    Ok(Scenario::new(asks, bids, distance, side, seed)?)
}
