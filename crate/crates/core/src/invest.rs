//! The investment task: company catalog, research accounting, the action
//! state machine, the model-driven run loop, and behavior extraction.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{ActionError, SimError};
use crate::gateway::{extract_json, ChatBackend, CompletionRequest, RequestParams};
use crate::persona::{PersonaId, PersonaProfile};
use crate::prompting::{render_sim_prompt, repair_prompt, ResearchTally, MAX_RESEARCH};
use crate::survey::{BehaviorSource, BehaviorVector};

pub const CATALOG_CSV: &str = include_str!("../data/catalog.csv");

/// Fixed-point fraction in units of 1/10000, so the payoff arithmetic is exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BasisPoints(pub u32);

impl BasisPoints {
    pub const ONE: BasisPoints = BasisPoints(10_000);

    pub fn from_fraction(f: f64) -> Option<Self> {
        if !f.is_finite() || f < 0.0 {
            return None;
        }
        let bp = (f * 10_000.0).round();
        (bp <= u32::MAX as f64).then_some(BasisPoints(bp as u32))
    }

    pub fn fraction(self) -> f64 {
        f64::from(self.0) / 10_000.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompanySpec {
    pub name: String,
    /// Expected return on investment.
    pub roi: BasisPoints,
    /// Probability of losing the whole stake.
    pub risk: BasisPoints,
    pub descriptor: Option<String>,
    /// Exact listing line, when it differs from the generated one.
    pub listing: Option<String>,
}

impl CompanySpec {
    pub fn new(name: &str, roi: f64, risk: f64, descriptor: Option<&str>) -> Self {
        Self {
            name: name.to_string(),
            roi: BasisPoints::from_fraction(roi).expect("roi is a non-negative fraction"),
            risk: BasisPoints::from_fraction(risk).expect("risk is a non-negative fraction"),
            descriptor: descriptor.map(str::to_string),
            listing: None,
        }
    }

    /// The `- Name (descriptor), return: X%, risk: R` line shown to the persona.
    pub fn listing_line(&self) -> String {
        if let Some(line) = &self.listing {
            return line.clone();
        }
        let desc = self
            .descriptor
            .as_deref()
            .map(|d| format!(" ({d})"))
            .unwrap_or_default();
        format!(
            "- {}{desc}, return: {}%, risk: {}",
            self.name,
            self.roi.fraction() * 100.0,
            self.risk.fraction()
        )
    }

    pub fn is_eco(&self) -> bool {
        self.descriptor
            .as_deref()
            .is_some_and(|d| d.to_ascii_lowercase().contains("eco"))
    }
}

#[derive(Debug, Deserialize)]
struct CatalogRow {
    name: String,
    roi: f64,
    risk: f64,
    #[serde(default)]
    descriptor: Option<String>,
    #[serde(default)]
    listing: Option<String>,
}

pub fn parse_catalog<R: std::io::Read>(reader: R) -> Result<Vec<CompanySpec>, SimError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<CatalogRow>() {
        let row = row.map_err(|e| SimError::Catalog(e.to_string()))?;
        let roi = BasisPoints::from_fraction(row.roi)
            .ok_or_else(|| SimError::Catalog(format!("{}: roi must be >= 0", row.name)))?;
        let risk = BasisPoints::from_fraction(row.risk)
            .ok_or_else(|| SimError::Catalog(format!("{}: risk must be >= 0", row.name)))?;
        out.push(CompanySpec {
            name: row.name.trim().to_string(),
            roi,
            risk,
            descriptor: row.descriptor.filter(|d| !d.trim().is_empty()),
            listing: row.listing.filter(|d| !d.trim().is_empty()),
        });
    }
    validate_catalog(&out)?;
    Ok(out)
}

pub fn load_catalog(path: &Path) -> Result<Vec<CompanySpec>, SimError> {
    let file = std::fs::File::open(path)
        .map_err(|e| SimError::Catalog(format!("{}: {e}", path.display())))?;
    parse_catalog(file)
}

pub fn validate_catalog(catalog: &[CompanySpec]) -> Result<(), SimError> {
    if catalog.is_empty() {
        return Err(SimError::Catalog("catalog is empty".into()));
    }
    for (i, c) in catalog.iter().enumerate() {
        if c.name.is_empty() {
            return Err(SimError::Catalog(format!("row {i}: empty name")));
        }
        if c.risk > BasisPoints::ONE {
            return Err(SimError::Catalog(format!("{}: risk above 1", c.name)));
        }
        if catalog[..i].iter().any(|o| o.name == c.name) {
            return Err(SimError::Catalog(format!("duplicate company {}", c.name)));
        }
    }
    Ok(())
}

/// The five companies of the original task.
pub fn default_catalog() -> Vec<CompanySpec> {
    parse_catalog(CATALOG_CSV.as_bytes()).expect("embedded catalog is valid")
}

/// `stake * (1 + roi) * (1 - risk)`: the two-outcome expected value where the
/// failure outcome is a total loss.
pub fn expected_value(company: &CompanySpec, stake: f64) -> f64 {
    debug_assert!(stake >= 0.0);
    let gain = u64::from(BasisPoints::ONE.0 + company.roi.0);
    let keep = u64::from(BasisPoints::ONE.0 - company.risk.0.min(BasisPoints::ONE.0));
    stake * (gain * keep) as f64 / 1e8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ResearchMethod {
    ResearchIndependently,
    TalkToExpert,
    Invest,
}

impl ResearchMethod {
    pub const ALL: [ResearchMethod; 3] = [
        ResearchMethod::ResearchIndependently,
        ResearchMethod::TalkToExpert,
        ResearchMethod::Invest,
    ];

    /// Wire token, spelled as the prompt spells it.
    pub fn token(self) -> &'static str {
        match self {
            ResearchMethod::ResearchIndependently => "research independantly",
            ResearchMethod::TalkToExpert => "talk to expert",
            ResearchMethod::Invest => "invest",
        }
    }

    pub fn parse(token: &str) -> Result<Self, ActionError> {
        let norm = token.trim().to_ascii_lowercase();
        match norm.as_str() {
            "research independantly" | "research independently" => {
                Ok(ResearchMethod::ResearchIndependently)
            }
            "talk to expert" => Ok(ResearchMethod::TalkToExpert),
            "invest" => Ok(ResearchMethod::Invest),
            _ => Err(ActionError::UnknownMethod(token.to_string())),
        }
    }

    pub fn is_research(self) -> bool {
        self != ResearchMethod::Invest
    }
}

impl fmt::Display for ResearchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationAction {
    pub company: String,
    pub method: ResearchMethod,
}

impl SimulationAction {
    pub fn new(company: &str, method: ResearchMethod) -> Self {
        Self {
            company: company.to_string(),
            method,
        }
    }

    /// Reads `{"company": .., "method": ..}`, canonicalizing the company name
    /// against the catalog (case and surrounding whitespace are ignored).
    pub fn from_json(value: &Value, catalog: &[CompanySpec]) -> Result<Self, ActionError> {
        let company = value
            .get("company")
            .and_then(Value::as_str)
            .ok_or(ActionError::MissingField("company"))?;
        let method = value
            .get("method")
            .and_then(Value::as_str)
            .ok_or(ActionError::MissingField("method"))?;
        let method = ResearchMethod::parse(method)?;
        let canonical = catalog
            .iter()
            .find(|c| c.name.eq_ignore_ascii_case(company.trim()))
            .ok_or_else(|| ActionError::UnknownCompany(company.to_string()))?;
        Ok(Self::new(&canonical.name, method))
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({ "company": self.company, "method": self.method.token() })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationState {
    pub tally: ResearchTally,
    pub step_index: usize,
    pub terminated: bool,
    pub invested_company: Option<String>,
}

impl SimulationState {
    pub fn initial(catalog: &[CompanySpec]) -> Self {
        Self {
            tally: ResearchTally::new(catalog),
            step_index: 0,
            terminated: false,
            invested_company: None,
        }
    }

    /// Research is exhausted and the next action must be an investment.
    pub fn forced(&self) -> bool {
        self.tally.exhausted()
    }
}

pub fn apply_action(
    state: &SimulationState,
    action: &SimulationAction,
) -> Result<SimulationState, ActionError> {
    if state.terminated {
        return Err(ActionError::Terminated);
    }
    let count = state
        .tally
        .get(&action.company)
        .ok_or_else(|| ActionError::UnknownCompany(action.company.clone()))?;
    let mut next = state.clone();
    if action.method.is_research() {
        if state.forced() {
            return Err(ActionError::MustInvest);
        }
        if count >= MAX_RESEARCH {
            return Err(ActionError::ResearchCapReached(action.company.clone()));
        }
        next.tally.set(&action.company, count + 1);
    } else {
        next.terminated = true;
        next.invested_company = Some(action.company.clone());
    }
    next.step_index += 1;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptStep {
    /// State the action was chosen from.
    pub state: SimulationState,
    pub action: SimulationAction,
    pub prompt: String,
    pub raw: String,
    /// Completions requested for this step, repairs included.
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTranscript {
    pub persona_id: PersonaId,
    pub steps: Vec<TranscriptStep>,
    pub invested_company: String,
    pub forced_decision: bool,
}

impl SimulationTranscript {
    pub fn research_steps(&self) -> impl Iterator<Item = &TranscriptStep> {
        self.steps.iter().filter(|s| s.action.method.is_research())
    }

    pub fn repairs(&self) -> u32 {
        self.steps
            .iter()
            .map(|s| s.attempts.saturating_sub(1))
            .sum()
    }

    /// Replays every action from the initial state and checks each recorded
    /// snapshot, the single terminal investment, and the forced flag.
    pub fn verify(&self, catalog: &[CompanySpec]) -> Result<(), String> {
        let mut state = SimulationState::initial(catalog);
        let Some(last) = self.steps.last() else {
            return Err("empty transcript".into());
        };
        for (i, step) in self.steps.iter().enumerate() {
            if step.state != state {
                return Err(format!("snapshot {i} diverges from replay"));
            }
            if step.action.method == ResearchMethod::Invest && i + 1 != self.steps.len() {
                return Err(format!("action follows the investment at step {i}"));
            }
            state = apply_action(&state, &step.action).map_err(|e| format!("step {i}: {e}"))?;
        }
        if last.action.method != ResearchMethod::Invest {
            return Err("last action is not an investment".into());
        }
        if state.invested_company.as_deref() != Some(self.invested_company.as_str()) {
            return Err("invested company disagrees with replay".into());
        }
        if self.forced_decision != last.state.forced() {
            return Err("forced flag disagrees with replay".into());
        }
        if state.tally.total() > (catalog.len() as u32) * u32::from(MAX_RESEARCH) {
            return Err("research total above cap".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub repair_limit: u32,
    pub params: RequestParams,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            repair_limit: 3,
            params: RequestParams::default(),
        }
    }
}

/// Drives one persona through the task until it invests.
///
/// Each step is a self-contained prompt. A response that carries no JSON or
/// an illegal action is re-asked with a correction note, at most
/// `repair_limit` times per step.
pub fn run_simulation(
    profile: &PersonaProfile,
    backend: &dyn ChatBackend,
    catalog: &[CompanySpec],
    opts: &SimOptions,
) -> Result<SimulationTranscript, SimError> {
    validate_catalog(catalog)?;
    let mut state = SimulationState::initial(catalog);
    let mut steps = Vec::new();
    // research is capped, so this bounds the loop even for hostile backends
    let max_steps = catalog.len() * usize::from(MAX_RESEARCH) + 1;

    while !state.terminated {
        if steps.len() >= max_steps {
            return Err(SimError::MalformedAction {
                step: steps.len(),
                attempts: 0,
                reason: "step limit exceeded".into(),
            });
        }
        let forced = state.forced();
        let original = render_sim_prompt(profile, catalog, &state.tally, forced)
            .map_err(|e| SimError::Catalog(e.to_string()))?;
        let mut prompt = original.clone();
        let mut attempt = 1;
        loop {
            let request = CompletionRequest::new(prompt.clone(), opts.params, attempt);
            let raw = backend.complete(&request)?.text;
            let outcome = extract_json(&raw)
                .map_err(|_| "no JSON object found".to_string())
                .and_then(|v| SimulationAction::from_json(&v, catalog).map_err(|e| e.to_string()))
                .and_then(|a| {
                    apply_action(&state, &a)
                        .map(|next| (a, next))
                        .map_err(|e| e.to_string())
                });
            match outcome {
                Ok((action, next)) => {
                    steps.push(TranscriptStep {
                        state: state.clone(),
                        action,
                        prompt: original.clone(),
                        raw,
                        attempts: attempt,
                    });
                    state = next;
                    break;
                }
                Err(problem) => {
                    if attempt > opts.repair_limit {
                        return Err(SimError::MalformedAction {
                            step: steps.len(),
                            attempts: attempt,
                            reason: problem,
                        });
                    }
                    log::debug!("step {} attempt {attempt}: {problem}", steps.len());
                    prompt = repair_prompt(&original, &problem);
                    attempt += 1;
                }
            }
        }
    }

    let last = steps.last().expect("terminated implies one step");
    Ok(SimulationTranscript {
        persona_id: profile.persona_id(),
        forced_decision: last.state.forced(),
        invested_company: state
            .invested_company
            .expect("terminated implies investment"),
        steps,
    })
}

/// Simulation-side metrics: the behavior vector plus auxiliary columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SimMetrics {
    pub behaviors: BehaviorVector,
    pub total_research: u32,
    pub independent_research: u32,
    /// Invested in one of the two riskiest companies.
    pub risky: bool,
}

fn riskiest_two(catalog: &[CompanySpec]) -> Vec<&str> {
    let mut by_risk: Vec<&CompanySpec> = catalog.iter().collect();
    by_risk.sort_by_key(|c| std::cmp::Reverse(c.risk));
    by_risk.iter().take(2).map(|c| c.name.as_str()).collect()
}

pub fn sim_behaviors(transcript: &SimulationTranscript, catalog: &[CompanySpec]) -> SimMetrics {
    let cap = catalog.len() as u32 * u32::from(MAX_RESEARCH);
    let total = transcript.research_steps().count() as u32;
    let independent = transcript
        .research_steps()
        .filter(|s| s.action.method == ResearchMethod::ResearchIndependently)
        .count() as u32;
    let expert = total - independent;
    let invested = catalog
        .iter()
        .find(|c| c.name == transcript.invested_company);
    let eco = catalog.iter().find(|c| c.is_eco());
    let eco_interest = eco.map_or(0, |e| {
        transcript
            .research_steps()
            .filter(|s| s.action.company == e.name)
            .count()
    });
    let behaviors = BehaviorVector {
        independent_learning: (total > 0)
            .then(|| (f64::from(independent) - f64::from(expert)) / f64::from(total)),
        impulsivity: f64::from(cap.saturating_sub(total)) / f64::from(cap),
        risk_appetite: invested.map_or(f64::NAN, |c| c.risk.fraction()),
        env_interest: eco_interest as f64,
        env_investment: Some(if invested.is_some_and(CompanySpec::is_eco) {
            1.0
        } else {
            0.0
        }),
        source: BehaviorSource::Simulation,
    };
    SimMetrics {
        behaviors,
        total_research: total,
        independent_research: independent,
        risky: riskiest_two(catalog).contains(&transcript.invested_company.as_str()),
    }
}
