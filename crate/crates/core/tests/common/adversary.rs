//! Hostile simulation backends and the transcript invariants they must not break.

use std::sync::Mutex;

use persona_workbench::gateway::{mock_policy_respond, PromptKind, ScriptedBackend};
use persona_workbench::invest::{sim_behaviors, CompanySpec, ResearchMethod, SimulationTranscript};
use persona_workbench::prompting::MAX_RESEARCH;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NAMES: [&str; 5] = ["Diamond", "Platinum", "Emerald", "Ruby", "Sapphire"];

/// Relative weights for each kind of reply.
#[derive(Debug, Clone, Copy)]
pub struct Mix {
    pub research: u32,
    pub invest: u32,
    pub unknown_company: u32,
    pub prose: u32,
    pub bad_method: u32,
    pub wrapped: u32,
    pub hammer: u32,
}

impl Mix {
    pub fn uniform() -> Self {
        Self {
            research: 4,
            invest: 1,
            unknown_company: 1,
            prose: 1,
            bad_method: 1,
            wrapped: 1,
            hammer: 2,
        }
    }
}

fn reply(rng: &mut ChaCha8Rng, mix: &Mix) -> String {
    let weights = [
        mix.research,
        mix.invest,
        mix.unknown_company,
        mix.prose,
        mix.bad_method,
        mix.wrapped,
        mix.hammer,
    ];
    let total: u32 = weights.iter().sum::<u32>().max(1);
    let mut pick = rng.gen_range(0..total);
    let mut kind = 0;
    for (i, w) in weights.iter().enumerate() {
        if pick < *w {
            kind = i;
            break;
        }
        pick -= w;
    }
    let company = NAMES[rng.gen_range(0..NAMES.len())];
    let method = if rng.gen_bool(0.5) {
        "research independantly"
    } else {
        "talk to expert"
    };
    match kind {
        0 => format!(r#"{{"company": "{company}", "method": "{method}"}}"#),
        1 => format!(r#"{{"company": "{}", "method": "invest"}}"#, company.to_lowercase()),
        2 => format!(r#"{{"company": "Obsidian{}", "method": "{method}"}}"#, rng.gen::<u8>()),
        3 => ["I would rather not say.", "", "{not json", "[1, 2, 3]", "{\"company\": 5}"]
            [rng.gen_range(0..5)]
        .to_string(),
        4 => format!(r#"{{"company": "{company}", "method": "flip a coin"}}"#),
        5 => format!("Sure!\n```json\n{{\"company\": \" {company} \", \"method\": \"{method}\"}}\n```\nDone."),
        _ => format!(r#"{{"company": "Diamond", "method": "{method}"}}"#),
    }
}

pub fn backend(seed: u64, mix: Mix) -> ScriptedBackend {
    let rng = Mutex::new(ChaCha8Rng::seed_from_u64(seed));
    ScriptedBackend::from_fn(move |_| reply(&mut rng.lock().unwrap(), &mix))
}

/// Hostile on simulation prompts, well behaved on everything else.
pub fn sim_only_backend(seed: u64, mix: Mix) -> ScriptedBackend {
    let rng = Mutex::new(ChaCha8Rng::seed_from_u64(seed));
    ScriptedBackend::from_fn(move |prompt| {
        if PromptKind::detect(prompt) == Some(PromptKind::Simulation) {
            reply(&mut rng.lock().unwrap(), &mix)
        } else {
            mock_policy_respond(prompt, seed).unwrap_or_default()
        }
    })
}

/// Tally bounds, termination and replay.
pub fn check_transcript(t: &SimulationTranscript, catalog: &[CompanySpec]) -> Result<(), String> {
    t.verify(catalog)?;
    let cap = usize::from(MAX_RESEARCH);
    if t.steps.len() > catalog.len() * cap + 1 {
        return Err(format!("{} steps", t.steps.len()));
    }
    for c in catalog {
        let n = t
            .research_steps()
            .filter(|s| s.action.company == c.name)
            .count();
        if n > cap {
            return Err(format!("{} researched {n} times", c.name));
        }
    }
    let invests = t
        .steps
        .iter()
        .filter(|s| s.action.method == ResearchMethod::Invest)
        .count();
    if invests != 1 {
        return Err(format!("{invests} investments"));
    }
    if !catalog.iter().any(|c| c.name == t.invested_company) {
        return Err(format!("invested in unknown {}", t.invested_company));
    }
    for s in &t.steps {
        for (name, n) in s.state.tally.entries() {
            if *n > MAX_RESEARCH {
                return Err(format!("snapshot tally {name}={n}"));
            }
        }
    }
    let m = sim_behaviors(t, catalog);
    if let Some(il) = m.behaviors.independent_learning {
        if !(-1.0..=1.0).contains(&il) {
            return Err(format!("independent share {il}"));
        }
    }
    if m.total_research as usize != t.steps.len() - 1 {
        return Err("research count disagrees with steps".into());
    }
    Ok(())
}
