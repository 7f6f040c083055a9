//! Seeded persona policy that answers every workbench prompt offline.
//!
//! Each trait pushes each behavior in the direction the human-research
//! expectations give it, so a full-grid run has a known sign structure for
//! the regression stage to recover. All randomness comes from a generator
//! keyed by `(seed, prompt)`; the research budget is keyed by `(seed,
//! persona)` so it stays fixed across the steps of one run.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde_json::json;
use sha2::{Digest, Sha256};

use super::{BackendKind, ChatBackend, CompletionRequest};
use crate::error::GatewayError;
use crate::invest::ResearchMethod;
use crate::persona::PersonaProfile;
use crate::prompting::{parse_persona_header, trait_lines, BfiInventory};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptKind {
    Survey,
    Simulation,
    Bfi,
}

impl PromptKind {
    pub fn detect(prompt: &str) -> Option<Self> {
        if prompt.contains("<research>") {
            Some(PromptKind::Simulation)
        } else if prompt.contains("I see myself as someone who") {
            Some(PromptKind::Bfi)
        } else if prompt.contains("\nThe questions\n") {
            Some(PromptKind::Survey)
        } else {
            None
        }
    }
}

pub struct MockPolicyBackend {
    seed: u64,
}

impl MockPolicyBackend {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }
}

impl ChatBackend for MockPolicyBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::MockPolicy { seed: self.seed }
    }

    fn respond(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        mock_policy_respond(&request.prompt, self.seed)
    }
}

fn keyed_rng(seed: u64, domain: &str, material: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(domain.as_bytes());
    h.update([0u8]);
    h.update(material.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

fn jitter(rng: &mut ChaCha8Rng) -> i32 {
    rng.gen_range(-1..=1)
}

/// Per-trait codes in O, C, E, A, N order.
struct Codes([i32; 5]);

impl Codes {
    fn of(p: &PersonaProfile) -> Self {
        Codes(p.encoded().map(i32::from))
    }
    fn signed(&self, signs: [i32; 5]) -> i32 {
        self.0.iter().zip(signs).map(|(e, s)| e * s).sum()
    }
}

// Trait sign vectors, O C E A N.
const LEARN_INDEPENDENT: [i32; 5] = [-1, 1, -1, -1, -1];
const RESEARCH_BUDGET: [i32; 5] = [1, 1, -1, -1, 1];
const IMPULSIVE: [i32; 5] = [-1, -1, 1, 1, -1];
const RISK_SEEKING: [i32; 5] = [1, -1, 1, -1, -1];
const ENV_INTEREST: [i32; 5] = [1, 0, -1, 1, 0];
const ECO_TIEBREAK: [i32; 5] = [1, 0, 1, -1, -1];

pub fn mock_policy_respond(prompt: &str, seed: u64) -> Result<String, GatewayError> {
    let kind = PromptKind::detect(prompt).ok_or(GatewayError::UnrecognizedPrompt)?;
    let profile = parse_persona_header(prompt).ok_or(GatewayError::UnrecognizedPrompt)?;
    let mut rng = keyed_rng(seed, "call", prompt);
    match kind {
        PromptKind::Survey => Ok(survey_answers(&profile, &mut rng)),
        PromptKind::Bfi => Ok(bfi_answers(&profile, prompt, &mut rng)),
        PromptKind::Simulation => sim_action(&profile, prompt, seed, &mut rng),
    }
}

/// Midpoint of `[lo, hi]` shifted by `(sum + jitter) / 5` half-widths,
/// rounded half up and clamped.
fn scaled_item(lo: i32, hi: i32, sum: i32, rng: &mut ChaCha8Rng) -> i32 {
    let mid = f64::from(lo + hi) / 2.0;
    let half = f64::from(hi - lo) / 2.0;
    let x = mid + half * f64::from(sum + jitter(rng)) / 5.0;
    ((x + 0.5).floor() as i32).clamp(lo, hi)
}

fn survey_answers(p: &PersonaProfile, rng: &mut ChaCha8Rng) -> String {
    let e = Codes::of(p);
    let learn = e.signed(LEARN_INDEPENDENT);
    let impulsive = e.signed(IMPULSIVE);
    let risk = e.signed(RISK_SEEKING);
    let env = e.signed(ENV_INTEREST);
    let answers = [
        scaled_item(0, 1, learn, rng),
        scaled_item(1, 5, impulsive, rng),
        scaled_item(1, 5, impulsive, rng),
        scaled_item(1, 4, 0, rng),
        scaled_item(1, 4, -risk, rng),
        scaled_item(1, 4, risk, rng),
        scaled_item(1, 3, env, rng),
        scaled_item(1, 3, env, rng),
        scaled_item(1, 3, env, rng),
    ];
    json!({ "answers": answers }).to_string()
}

fn bfi_answers(p: &PersonaProfile, prompt: &str, rng: &mut ChaCha8Rng) -> String {
    let inv = BfiInventory::builtin();
    let listed = prompt
        .lines()
        .filter(|l| {
            l.split_once(". ")
                .is_some_and(|(n, _)| n.parse::<u32>().is_ok())
        })
        .count();
    let answers: Vec<i32> = (0..listed)
        .map(|i| {
            let item = inv.items.get(i);
            let trait_score = item.map_or(3, |it| 3 + i32::from(p.level(it.trait_).encode()));
            let noise = match rng.gen_range(0..4) {
                0 => -1,
                3 => 1,
                _ => 0,
            };
            let agreement = (trait_score + noise).clamp(1, 5);
            if item.is_some_and(|it| it.reversed) {
                6 - agreement
            } else {
                agreement
            }
        })
        .collect();
    json!({ "answers": answers }).to_string()
}

struct Listing {
    name: String,
    /// Hundredths.
    risk: i32,
    eco: bool,
    researched: u32,
    cap: u32,
}

fn listing_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^- (\S+?)(?: \(([^)]*)\))?, return:? ([0-9.]+)%, risk: ([0-9.]+)\s*$").unwrap()
    })
}

fn tally_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(\S+?):\s*(\d+) out of (\d+) times\s*$").unwrap())
}

fn parse_listings(prompt: &str) -> Option<Vec<Listing>> {
    let mut out: Vec<Listing> = Vec::new();
    for line in prompt.lines() {
        if let Some(c) = listing_re().captures(line) {
            let risk: f64 = c[4].parse().ok()?;
            out.push(Listing {
                name: c[1].to_string(),
                risk: (risk * 100.0).round() as i32,
                eco: c
                    .get(2)
                    .is_some_and(|d| d.as_str().to_ascii_lowercase().contains("eco")),
                researched: 0,
                cap: 0,
            });
        }
    }
    let block = prompt
        .split("<research>")
        .nth(1)?
        .split("</research>")
        .next()?;
    for line in block.lines() {
        if let Some(c) = tally_re().captures(line) {
            let entry = out.iter_mut().find(|l| l.name == c[1])?;
            entry.researched = c[2].parse().ok()?;
            entry.cap = c[3].parse().ok()?;
        }
    }
    if out.is_empty() || out.iter().any(|l| l.cap == 0) {
        return None;
    }
    Some(out)
}

fn sim_action(
    p: &PersonaProfile,
    prompt: &str,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<String, GatewayError> {
    let listings = parse_listings(prompt).ok_or(GatewayError::UnrecognizedPrompt)?;
    let e = Codes::of(p);
    let cap_total: u32 = listings.iter().map(|l| l.cap).sum();
    let researched: u32 = listings.iter().map(|l| l.researched).sum();
    let open: Vec<&Listing> = listings.iter().filter(|l| l.researched < l.cap).collect();

    let mut persona_rng = keyed_rng(seed, "budget", &trait_lines(p));
    let budget = (12 + 3 * e.signed(RESEARCH_BUDGET) + jitter(&mut persona_rng))
        .clamp(0, cap_total as i32) as u32;

    let forced = prompt.contains("You must now invest") || open.is_empty();
    if forced || researched >= budget {
        let pick = final_pick(&e, &listings);
        return Ok(action_json(pick, ResearchMethod::Invest));
    }

    let p_independent = 0.5 + 0.12 * f64::from(e.signed(LEARN_INDEPENDENT));
    let method = if rng.gen::<f64>() < p_independent {
        ResearchMethod::ResearchIndependently
    } else {
        ResearchMethod::TalkToExpert
    };
    let eco_weight = (1.0 + 0.5 * f64::from(e.signed(ENV_INTEREST))).max(0.1);
    let weights: Vec<f64> = open
        .iter()
        .map(|l| if l.eco { eco_weight } else { 1.0 })
        .collect();
    let mut u = rng.gen::<f64>() * weights.iter().sum::<f64>();
    let mut target = open[open.len() - 1];
    for (l, w) in open.iter().zip(&weights) {
        if u < *w {
            target = l;
            break;
        }
        u -= w;
    }
    Ok(action_json(&target.name, method))
}

/// Company whose risk is nearest the persona's target risk. Ties go to the
/// eco company when the tie-break score is positive, otherwise to the first
/// tied non-eco company in listing order.
fn final_pick<'a>(e: &Codes, listings: &'a [Listing]) -> &'a str {
    let target = 35 + 10 * e.signed(RISK_SEEKING);
    let best = listings
        .iter()
        .map(|l| (l.risk - target).abs())
        .min()
        .expect("non-empty listings");
    let tied: Vec<&Listing> = listings
        .iter()
        .filter(|l| (l.risk - target).abs() == best)
        .collect();
    let prefer_eco = e.signed(ECO_TIEBREAK) > 0;
    tied.iter()
        .find(|l| l.eco && prefer_eco)
        .or_else(|| tied.iter().find(|l| !l.eco))
        .unwrap_or(&tied[0])
        .name
        .as_str()
}

fn action_json(company: &str, method: ResearchMethod) -> String {
    json!({ "company": company, "method": method.token() }).to_string()
}
