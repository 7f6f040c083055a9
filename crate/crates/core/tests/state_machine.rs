mod common;

use std::sync::Arc;

use common::adversary::{backend, check_transcript, sim_only_backend, Mix};
use persona_workbench::gateway::{ChatBackend, ScriptedBackend};
use persona_workbench::invest::{default_catalog, run_simulation, SimOptions};
use persona_workbench::workbench::{
    analyze_run, read_records, run_pipeline_with, Phase, RecordPhase, RunConfig, BEHAVIORS,
    TRANSCRIPTS,
};
use persona_workbench::{generate_grid, SimError};
use proptest::prelude::*;

fn mix() -> impl Strategy<Value = Mix> {
    (
        0u32..6,
        0u32..3,
        0u32..3,
        0u32..3,
        0u32..3,
        0u32..3,
        0u32..6,
    )
        .prop_map(
            |(research, invest, unknown_company, prose, bad_method, wrapped, hammer)| Mix {
                research,
                invest,
                unknown_company,
                prose,
                bad_method,
                wrapped,
                hammer,
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn hostile_backends_never_break_the_protocol(
        seed in any::<u64>(),
        mix in mix(),
        repair_limit in 0u32..5,
        persona in 0usize..243,
    ) {
        let catalog = default_catalog();
        let profile = &generate_grid()[persona];
        let b = backend(seed, mix);
        let opts = SimOptions { repair_limit, ..SimOptions::default() };
        match run_simulation(profile, &b, &catalog, &opts) {
            Ok(t) => {
                prop_assert_eq!(check_transcript(&t, &catalog), Ok(()));
                prop_assert_eq!(t.steps.iter().map(|s| s.attempts as usize).sum::<usize>(), b.calls());
                prop_assert!(t.steps.iter().all(|s| s.attempts <= repair_limit + 1));
            }
            Err(SimError::MalformedAction { attempts, .. }) => {
                prop_assert_eq!(attempts, repair_limit + 1);
            }
            Err(e) => prop_assert!(false, "unexpected error {}", e),
        }
        prop_assert!(b.calls() <= (catalog.len() * 5 + 1) * (repair_limit as usize + 1));
    }
}

#[test]
fn exhausting_every_company_forces_the_decision() {
    let catalog = default_catalog();
    let mut replies: Vec<String> = Vec::new();
    for c in &catalog {
        for _ in 0..5 {
            replies.push(format!(
                r#"{{"company": "{}", "method": "talk to expert"}}"#,
                c.name
            ));
        }
    }
    // a sixth look at a capped company, then research while forced, then a valid investment
    replies.insert(
        5,
        format!(
            r#"{{"company": "{}", "method": "talk to expert"}}"#,
            catalog[0].name
        ),
    );
    replies.push(r#"{"company": "Ruby", "method": "research independantly"}"#.into());
    replies.push(r#"{"company": "Ruby", "method": "invest"}"#.into());
    let b = ScriptedBackend::sequence(replies);
    let t = run_simulation(&generate_grid()[0], &b, &catalog, &SimOptions::default()).unwrap();
    check_transcript(&t, &catalog).unwrap();
    assert!(t.forced_decision);
    assert_eq!(t.steps.len(), 26);
    assert_eq!(t.invested_company, "Ruby");
    assert_eq!(t.repairs(), 2);
    let prompts = b.prompts();
    assert_ne!(prompts[24], prompts[25]);
}

#[test]
fn endless_research_is_cut_off() {
    let catalog = default_catalog();
    let b = ScriptedBackend::constant(r#"{"company": "Emerald", "method": "talk to expert"}"#);
    let err =
        run_simulation(&generate_grid()[0], &b, &catalog, &SimOptions::default()).unwrap_err();
    assert!(
        matches!(
            err,
            SimError::MalformedAction {
                step: 5,
                attempts: 4,
                ..
            }
        ),
        "{err}"
    );
    assert_eq!(b.calls(), 5 + 4);
}

#[test]
fn flagged_personas_are_excluded_and_counted() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig {
        out: dir.path().join("run"),
        phases: vec![Phase::Simulate],
        repair_limit: 1,
        ..RunConfig::default()
    };
    let mix = Mix {
        research: 6,
        invest: 1,
        unknown_company: 2,
        prose: 2,
        bad_method: 1,
        wrapped: 1,
        hammer: 1,
    };
    let factory =
        |_r: u32| -> Result<Arc<dyn ChatBackend>, _> { Ok(Arc::new(sim_only_backend(11, mix))) };
    let outcome = run_pipeline_with(&config, &factory).unwrap();
    assert_eq!(outcome.units_run, 243);
    assert!(
        outcome.flagged > 0 && outcome.flagged < 243,
        "flagged {}",
        outcome.flagged
    );

    let records = read_records(&config.out.join(TRANSCRIPTS)).unwrap();
    let finals: Vec<_> = records
        .iter()
        .filter(|r| r.phase == RecordPhase::SimFinal)
        .collect();
    assert_eq!(finals.len(), 243);
    assert_eq!(
        finals.iter().filter(|r| !r.flags.is_empty()).count(),
        outcome.flagged
    );

    let mut reader = csv::Reader::from_path(config.out.join(BEHAVIORS)).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (flags, risk) = (col("flags"), col("sim_risk_factor"));
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 243);
    let flagged: Vec<_> = rows.iter().filter(|r| !r[flags].is_empty()).collect();
    assert_eq!(flagged.len(), outcome.flagged);
    assert!(flagged
        .iter()
        .all(|r| &r[flags] == "sim:malformed_action" && r[risk].is_empty()));
    assert!(rows
        .iter()
        .filter(|r| r[flags].is_empty())
        .all(|r| !r[risk].is_empty()));

    let analysis = analyze_run(&config.out, 0.05).unwrap();
    let fit = analysis.fit("sim.risk_appetite").unwrap().as_ref().unwrap();
    assert_eq!(fit.n_used, 243 - outcome.flagged);

    let summary = std::fs::read_to_string(config.out.join("summary.txt")).unwrap();
    assert!(
        summary.contains(&format!("sim:malformed_action: {}", outcome.flagged)),
        "{summary}"
    );
}
