use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ols::RegressionResult;
use crate::persona::Trait;

pub const DEFAULT_ALPHA: f64 = 0.05;

pub const EXPECTED_SIGNS_CSV: &str = include_str!("../../data/expected_signs.csv");

/// The five measured behaviors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Behavior {
    IndependentLearning,
    Impulsivity,
    RiskAppetite,
    EnvInterest,
    EnvInvestment,
}

impl Behavior {
    pub const ALL: [Behavior; 5] = [
        Behavior::IndependentLearning,
        Behavior::Impulsivity,
        Behavior::RiskAppetite,
        Behavior::EnvInterest,
        Behavior::EnvInvestment,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Behavior::IndependentLearning => "independent_learning",
            Behavior::Impulsivity => "impulsivity",
            Behavior::RiskAppetite => "risk_appetite",
            Behavior::EnvInterest => "env_interest",
            Behavior::EnvInvestment => "env_investment",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Behavior::IndependentLearning => "Reflective/Independent Learning Style",
            Behavior::Impulsivity => "Impulsive Decision Making",
            Behavior::RiskAppetite => "Risk Appetite",
            Behavior::EnvInterest => "Interest in environmental products/causes",
            Behavior::EnvInvestment => "Investment in environmental products/causes",
        }
    }

    /// Family of a qualified response name such as `sim.risk_appetite`.
    /// The binary risky-investment response belongs to risk appetite.
    pub fn of_response(name: &str) -> Option<Behavior> {
        let base = name.rsplit('.').next().unwrap_or(name);
        if base == "risky_investment" {
            return Some(Behavior::RiskAppetite);
        }
        Behavior::ALL.into_iter().find(|b| b.key() == base)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExpectedSign {
    Positive,
    Negative,
    None,
}

impl ExpectedSign {
    pub fn symbol(self) -> &'static str {
        match self {
            ExpectedSign::Positive => "+",
            ExpectedSign::Negative => "-",
            ExpectedSign::None => "none",
        }
    }
}

impl FromStr for ExpectedSign {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "+" => Ok(ExpectedSign::Positive),
            "-" => Ok(ExpectedSign::Negative),
            "none" | "" => Ok(ExpectedSign::None),
            other => Err(format!("bad expected sign {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpectedCell {
    pub sign: ExpectedSign,
    pub citation: String,
}

/// Expected direction of every (behavior, trait) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpectedSignTable {
    cells: [[ExpectedCell; 5]; 5],
}

#[derive(Deserialize)]
struct SignRow {
    behavior: String,
    #[serde(rename = "trait")]
    trait_symbol: String,
    expected: String,
    citation: String,
}

impl ExpectedSignTable {
    pub fn builtin() -> Self {
        Self::from_csv(EXPECTED_SIGNS_CSV.as_bytes()).expect("embedded sign table is complete")
    }

    pub fn from_csv<R: std::io::Read>(reader: R) -> Result<Self, String> {
        let mut cells: [[Option<ExpectedCell>; 5]; 5] = Default::default();
        for row in csv::Reader::from_reader(reader).deserialize::<SignRow>() {
            let row = row.map_err(|e| e.to_string())?;
            let b = Behavior::ALL
                .into_iter()
                .find(|b| b.key() == row.behavior)
                .ok_or_else(|| format!("unknown behavior {:?}", row.behavior))?;
            let t = Trait::from_symbol(&row.trait_symbol)
                .ok_or_else(|| format!("unknown trait {:?}", row.trait_symbol))?;
            cells[b as usize][t.index()] = Some(ExpectedCell {
                sign: row.expected.parse()?,
                citation: row.citation,
            });
        }
        let mut out: Vec<[ExpectedCell; 5]> = Vec::with_capacity(5);
        for (bi, row) in cells.into_iter().enumerate() {
            let mut filled = Vec::with_capacity(5);
            for (ti, cell) in row.into_iter().enumerate() {
                filled.push(cell.ok_or_else(|| {
                    format!(
                        "missing cell {} x {}",
                        Behavior::ALL[bi].key(),
                        Trait::ALL[ti].symbol()
                    )
                })?);
            }
            out.push(filled.try_into().expect("five traits"));
        }
        Ok(Self {
            cells: out.try_into().expect("five behaviors"),
        })
    }

    pub fn get(&self, behavior: Behavior, t: Trait) -> &ExpectedCell {
        &self.cells[behavior as usize][t.index()]
    }

    pub fn sign(&self, behavior: Behavior, t: Trait) -> ExpectedSign {
        self.get(behavior, t).sign
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Match,
    Mismatch,
    NoBenchmark,
    NotSignificant,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::Match => "Match",
            Verdict::Mismatch => "Mismatch",
            Verdict::NoBenchmark => "NoBenchmark",
            Verdict::NotSignificant => "NotSignificant",
        };
        f.write_str(s)
    }
}

impl FromStr for Verdict {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Match" => Ok(Verdict::Match),
            "Mismatch" => Ok(Verdict::Mismatch),
            "NoBenchmark" => Ok(Verdict::NoBenchmark),
            "NotSignificant" => Ok(Verdict::NotSignificant),
            other => Err(format!("unknown verdict {other:?}")),
        }
    }
}

/// One coefficient to judge. `p = None` means no significance information
/// is available and the comparison is sign-only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub behavior: String,
    pub trait_: Trait,
    pub beta: f64,
    pub p: Option<f64>,
}

impl CoefficientRow {
    pub fn from_result(result: &RegressionResult) -> Vec<CoefficientRow> {
        result
            .coefficients
            .iter()
            .map(|c| CoefficientRow {
                behavior: result.behavior.clone(),
                trait_: c.trait_,
                beta: c.beta_std,
                p: Some(c.p),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignCell {
    pub behavior: String,
    pub trait_: Trait,
    pub beta: f64,
    pub p: Option<f64>,
    /// -1, 0 or 1.
    pub observed_sign: i8,
    pub significant: Option<bool>,
    pub expected: ExpectedSign,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignReport {
    pub alpha: f64,
    pub cells: Vec<SignCell>,
}

impl SignReport {
    pub fn count(&self, verdict: Verdict) -> usize {
        self.cells.iter().filter(|c| c.verdict == verdict).count()
    }
}

fn sign_of(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Judges each coefficient: `NoBenchmark` where no direction is expected,
/// `NotSignificant` when `p >= alpha`, otherwise `Match` iff the sign agrees.
/// Rows whose behavior is not one of the five families are skipped.
pub fn compare_signs(
    rows: &[CoefficientRow],
    expected: &ExpectedSignTable,
    alpha: f64,
) -> SignReport {
    let cells = rows
        .iter()
        .filter_map(|row| {
            let family = Behavior::of_response(&row.behavior)?;
            let exp = expected.sign(family, row.trait_);
            let observed = sign_of(row.beta);
            let significant = row.p.map(|p| p < alpha);
            let verdict = match (exp, significant) {
                (ExpectedSign::None, _) => Verdict::NoBenchmark,
                (_, Some(false)) => Verdict::NotSignificant,
                (ExpectedSign::Positive, _) if observed == 1 => Verdict::Match,
                (ExpectedSign::Negative, _) if observed == -1 => Verdict::Match,
                _ => Verdict::Mismatch,
            };
            Some(SignCell {
                behavior: row.behavior.clone(),
                trait_: row.trait_,
                beta: row.beta,
                p: row.p,
                observed_sign: observed,
                significant,
                expected: exp,
                verdict,
            })
        })
        .collect();
    SignReport { alpha, cells }
}
