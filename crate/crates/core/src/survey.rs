//! Behavioral survey and BFI administration, validation and scoring.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::SurveyError;
use crate::gateway::{extract_json, ChatBackend, CompletionRequest, RequestParams};
use crate::persona::{PersonaId, PersonaProfile, Trait};
use crate::prompting::{
    render_bfi_prompt_with, render_survey_prompt, repair_prompt, BfiInventory, SURVEY_QUESTIONS,
};

/// Inclusive answer range per survey question, in question order.
pub const SURVEY_RANGES: [(i64, i64); SURVEY_QUESTIONS] = [
    (0, 1),
    (1, 5),
    (1, 5),
    (1, 4),
    (1, 4),
    (1, 4),
    (1, 3),
    (1, 3),
    (1, 3),
];

pub const BFI_RANGE: (i64, i64) = (1, 5);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyResponse {
    pub persona_id: PersonaId,
    pub answers: [u8; SURVEY_QUESTIONS],
}

impl SurveyResponse {
    pub fn new(persona_id: PersonaId, answers: [u8; SURVEY_QUESTIONS]) -> Result<Self, String> {
        for (i, (a, (lo, hi))) in answers.iter().zip(SURVEY_RANGES).enumerate() {
            let a = i64::from(*a);
            if a < lo || a > hi {
                return Err(format!("answer {} is {a}, expected {lo}..={hi}", i + 1));
            }
        }
        Ok(Self {
            persona_id,
            answers,
        })
    }

    /// Trend-predictability answer; recorded but part of no composite.
    pub fn trend_predictability(&self) -> u8 {
        self.answers[3]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BehaviorSource {
    Survey,
    Simulation,
}

/// The five measured behaviors for one persona. `None` marks a behavior the
/// source cannot measure, never zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorVector {
    pub independent_learning: Option<f64>,
    pub impulsivity: f64,
    pub risk_appetite: f64,
    pub env_interest: f64,
    pub env_investment: Option<f64>,
    pub source: BehaviorSource,
}

pub fn survey_behaviors(response: &SurveyResponse) -> BehaviorVector {
    let q = response.answers.map(f64::from);
    BehaviorVector {
        independent_learning: Some(q[0]),
        impulsivity: (q[1] + q[2]) / 2.0,
        risk_appetite: q[5] - q[4],
        env_interest: (q[6] + q[7] + q[8]) / 3.0,
        env_investment: None,
        source: BehaviorSource::Survey,
    }
}

/// Reads `{"answers": [...]}` of exactly `ranges.len()` in-range integers.
pub fn parse_answers(value: &Value, ranges: &[(i64, i64)]) -> Result<Vec<u8>, String> {
    let arr = value
        .get("answers")
        .and_then(Value::as_array)
        .ok_or_else(|| "missing \"answers\" array".to_string())?;
    if arr.len() != ranges.len() {
        return Err(format!(
            "expected {} answers, got {}",
            ranges.len(),
            arr.len()
        ));
    }
    arr.iter()
        .zip(ranges)
        .enumerate()
        .map(|(i, (v, (lo, hi)))| {
            let n = v
                .as_i64()
                .or_else(|| v.as_f64().filter(|f| f.fract() == 0.0).map(|f| f as i64))
                .ok_or_else(|| format!("answer {} is not an integer", i + 1))?;
            if n < *lo || n > *hi {
                return Err(format!("answer {} is {n}, expected {lo}..={hi}", i + 1));
            }
            Ok(n as u8)
        })
        .collect()
}

/// One validated exchange, with what it took to get there.
#[derive(Debug, Clone, PartialEq)]
pub struct Exchange<T> {
    pub value: T,
    pub prompt: String,
    pub raw: String,
    pub attempts: u32,
}

/// Asks, validates, and re-asks with a correction note up to `repair_limit`
/// times. Gateway errors are not retried here.
pub fn ask_validated<T>(
    backend: &dyn ChatBackend,
    prompt: &str,
    params: RequestParams,
    repair_limit: u32,
    validate: impl Fn(&Value) -> Result<T, String>,
) -> Result<Exchange<T>, SurveyError> {
    let mut current = prompt.to_string();
    let mut attempt = 1;
    loop {
        let request = CompletionRequest::new(current.clone(), params, attempt);
        let raw = backend.complete(&request)?.text;
        let checked = extract_json(&raw)
            .map_err(|_| "no JSON object found".to_string())
            .and_then(|v| validate(&v));
        match checked {
            Ok(value) => {
                return Ok(Exchange {
                    value,
                    prompt: prompt.to_string(),
                    raw,
                    attempts: attempt,
                })
            }
            Err(reason) if attempt > repair_limit => {
                return Err(SurveyError::MalformedAnswer {
                    attempts: attempt,
                    reason,
                })
            }
            Err(reason) => {
                current = repair_prompt(prompt, &reason);
                attempt += 1;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurveyOptions {
    pub repair_limit: u32,
    pub params: RequestParams,
}

impl Default for SurveyOptions {
    fn default() -> Self {
        Self {
            repair_limit: 3,
            params: RequestParams::default(),
        }
    }
}

pub fn run_survey(
    profile: &PersonaProfile,
    backend: &dyn ChatBackend,
    opts: &SurveyOptions,
) -> Result<Exchange<SurveyResponse>, SurveyError> {
    let prompt = render_survey_prompt(profile);
    let id = profile.persona_id();
    ask_validated(backend, &prompt, opts.params, opts.repair_limit, |v| {
        let answers = parse_answers(v, &SURVEY_RANGES)?;
        let answers: [u8; SURVEY_QUESTIONS] = answers.try_into().expect("length checked");
        SurveyResponse::new(id.clone(), answers)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BfiScore {
    pub persona_id: PersonaId,
    /// Per-trait mean on the 1-5 scale, O C E A N.
    pub means: [f64; 5],
    pub answers: Vec<u8>,
}

impl BfiScore {
    pub fn mean(&self, t: Trait) -> f64 {
        self.means[t.index()]
    }
}

pub fn reverse_key(answer: u8) -> u8 {
    6 - answer
}

/// Applies reverse-keying and averages items per trait.
pub fn score_bfi(inventory: &BfiInventory, answers: &[u8]) -> Result<[f64; 5], String> {
    if answers.len() != inventory.len() {
        return Err(format!(
            "expected {} answers, got {}",
            inventory.len(),
            answers.len()
        ));
    }
    let mut sums = [0.0; 5];
    let mut counts = [0u32; 5];
    for (item, &a) in inventory.items.iter().zip(answers) {
        if !(1..=5).contains(&a) {
            return Err(format!(
                "answer to item {} is {a}, expected 1..=5",
                item.item
            ));
        }
        let keyed = if item.reversed { reverse_key(a) } else { a };
        sums[item.trait_.index()] += f64::from(keyed);
        counts[item.trait_.index()] += 1;
    }
    let mut means = [0.0; 5];
    for t in 0..5 {
        means[t] = sums[t] / f64::from(counts[t]);
    }
    Ok(means)
}

pub fn run_bfi(
    profile: &PersonaProfile,
    backend: &dyn ChatBackend,
    inventory: &BfiInventory,
    opts: &SurveyOptions,
) -> Result<Exchange<BfiScore>, SurveyError> {
    let prompt = render_bfi_prompt_with(profile, inventory);
    let ranges = vec![BFI_RANGE; inventory.len()];
    let id = profile.persona_id();
    ask_validated(backend, &prompt, opts.params, opts.repair_limit, |v| {
        let answers = parse_answers(v, &ranges)?;
        let means = score_bfi(inventory, &answers)?;
        Ok(BfiScore {
            persona_id: id.clone(),
            means,
            answers,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{MockPolicyBackend, ScriptedBackend};
    use crate::persona::{generate_grid, TraitLevel};
    use proptest::prelude::*;

    fn resp(answers: [u8; 9]) -> SurveyResponse {
        SurveyResponse::new(PersonaId("M-M-M-M-M".into()), answers).unwrap()
    }

    #[test]
    fn composites_midpoint() {
        let b = survey_behaviors(&resp([1, 3, 3, 2, 2, 2, 2, 2, 2]));
        assert_eq!(b.independent_learning, Some(1.0));
        assert_eq!(b.impulsivity, 3.0);
        assert_eq!(b.risk_appetite, 0.0);
        assert_eq!(b.env_interest, 2.0);
        assert_eq!(b.env_investment, None);
        assert_eq!(b.source, BehaviorSource::Survey);
    }

    #[test]
    fn composites_extremes() {
        let b = survey_behaviors(&resp([0, 5, 5, 1, 1, 4, 3, 3, 3]));
        assert_eq!(b.independent_learning, Some(0.0));
        assert_eq!(b.impulsivity, 5.0);
        assert_eq!(b.risk_appetite, 3.0);
        assert_eq!(b.env_interest, 3.0);
        let b = survey_behaviors(&resp([1, 1, 1, 4, 4, 1, 1, 1, 1]));
        assert_eq!(b.impulsivity, 1.0);
        assert_eq!(b.risk_appetite, -3.0);
        assert_eq!(b.env_interest, 1.0);
    }

    #[test]
    fn response_ranges_enforced() {
        let id = PersonaId("M-M-M-M-M".into());
        assert!(SurveyResponse::new(id.clone(), [2, 3, 3, 2, 2, 2, 2, 2, 2]).is_err());
        assert!(SurveyResponse::new(id.clone(), [1, 6, 3, 2, 2, 2, 2, 2, 2]).is_err());
        assert!(SurveyResponse::new(id, [1, 3, 3, 2, 2, 2, 2, 2, 4]).is_err());
    }

    fn arb_answers() -> impl Strategy<Value = [u8; 9]> {
        SURVEY_RANGES
            .map(|(lo, hi)| (lo as u8)..=(hi as u8))
            .prop_map(|a| a)
    }

    proptest! {
        #[test]
        fn composites_stay_in_range(answers in arb_answers()) {
            let b = survey_behaviors(&resp(answers));
            prop_assert!((1.0..=5.0).contains(&b.impulsivity));
            prop_assert!((-3.0..=3.0).contains(&b.risk_appetite));
            prop_assert!((1.0..=3.0).contains(&b.env_interest));
            prop_assert!(b.env_investment.is_none());
        }

        #[test]
        fn reverse_keying_is_an_involution(x in 1u8..=5) {
            prop_assert_eq!(x + reverse_key(x), 6);
            prop_assert_eq!(reverse_key(reverse_key(x)), x);
        }
    }

    #[test]
    fn run_survey_against_mock() {
        let backend = MockPolicyBackend::new(7);
        for p in generate_grid().iter().step_by(17) {
            let ex = run_survey(p, &backend, &SurveyOptions::default()).unwrap();
            assert_eq!(ex.attempts, 1);
            assert_eq!(ex.value.persona_id, p.persona_id());
        }
    }

    #[test]
    fn eight_answers_trigger_one_repair_then_fail() {
        let backend = ScriptedBackend::constant(r#"{"answers": [1,3,3,2,2,2,2,2]}"#);
        let opts = SurveyOptions {
            repair_limit: 1,
            ..Default::default()
        };
        let p = PersonaProfile::uniform(TraitLevel::Low);
        let err = run_survey(&p, &backend, &opts).unwrap_err();
        assert_eq!(
            err,
            SurveyError::MalformedAnswer {
                attempts: 2,
                reason: "expected 9 answers, got 8".into()
            }
        );
        let prompts = backend.prompts();
        assert_eq!(prompts.len(), 2);
        assert!(prompts[1].contains("expected 9 answers, got 8"));
    }

    #[test]
    fn binary_q1_violation_is_repaired() {
        let backend = ScriptedBackend::sequence(vec![
            r#"{"answers": [2,3,3,2,2,2,2,2,2]}"#.into(),
            r#"{"answers": [1,3,3,2,2,2,2,2,2]}"#.into(),
        ]);
        let p = PersonaProfile::uniform(TraitLevel::Low);
        let ex = run_survey(&p, &backend, &SurveyOptions::default()).unwrap();
        assert_eq!(ex.attempts, 2);
        assert!(backend.prompts()[1].contains("answer 1 is 2, expected 0..=1"));
    }

    #[test]
    fn bfi_midpoint_scores_three() {
        let inv = BfiInventory::builtin();
        let means = score_bfi(inv, &vec![3; inv.len()]).unwrap();
        assert_eq!(means, [3.0; 5]);
    }

    #[test]
    fn bfi_all_fives_hand_computed() {
        // (5 * (k - r) + 1 * r) / k with k items and r reverse-keyed items per
        // trait in the 44-item key: O 10/2, C 9/4, E 8/3, A 9/4, N 8/3.
        let inv = BfiInventory::builtin();
        let means = score_bfi(inv, &vec![5; inv.len()]).unwrap();
        assert_eq!(means[Trait::Openness.index()], 42.0 / 10.0);
        assert_eq!(means[Trait::Conscientiousness.index()], 29.0 / 9.0);
        assert_eq!(means[Trait::Extraversion.index()], 28.0 / 8.0);
        assert_eq!(means[Trait::Agreeableness.index()], 29.0 / 9.0);
        assert_eq!(means[Trait::Neuroticism.index()], 28.0 / 8.0);
    }

    #[test]
    fn bfi_rejects_out_of_range() {
        let inv = BfiInventory::builtin();
        let mut answers = vec![3; inv.len()];
        answers[10] = 0;
        assert!(score_bfi(inv, &answers).is_err());
        assert!(score_bfi(inv, &answers[..40]).is_err());
    }

    #[test]
    fn run_bfi_against_mock() {
        let backend = MockPolicyBackend::new(7);
        let inv = BfiInventory::builtin();
        let high = PersonaProfile::uniform(TraitLevel::High);
        let low = PersonaProfile::uniform(TraitLevel::Low);
        let hi = run_bfi(&high, &backend, inv, &SurveyOptions::default())
            .unwrap()
            .value;
        let lo = run_bfi(&low, &backend, inv, &SurveyOptions::default())
            .unwrap()
            .value;
        for t in Trait::ALL {
            assert!((1.0..=5.0).contains(&hi.mean(t)));
            assert!(hi.mean(t) > lo.mean(t));
        }
    }
}
