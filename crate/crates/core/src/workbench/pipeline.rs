use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc, Mutex};

use serde_json::json;

use super::analyze::{analyze_run, collect_behaviors, write_report};
use super::config::{BackendChoice, Phase, RunConfig, CONFIG_SNAPSHOT};
use super::records::{
    completed_units, read_records, RecordPhase, RecordWriter, RunRecord, FLAG_GATEWAY_ERROR,
    FLAG_MALFORMED_ACTION, FLAG_MALFORMED_ANSWER, FLAG_TRANSPORT_ERROR, SCHEMA_VERSION,
    TRANSCRIPTS,
};
use crate::error::{GatewayError, SimError, SurveyError, WorkbenchError};
use crate::gateway::{connect, BudgetGuard, ChatBackend};
use crate::invest::{
    load_catalog, parse_catalog, run_simulation, CompanySpec, SimOptions, CATALOG_CSV,
};
use crate::persona::{generate_grid, PersonaProfile};
use crate::prompting::BfiInventory;
use crate::survey::{run_bfi, run_survey, SurveyOptions};

pub const CATALOG_SNAPSHOT: &str = "catalog.csv";

/// What one invocation did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineOutcome {
    pub run_dir: PathBuf,
    /// Backend requests issued by this invocation, repairs included.
    pub requests: u64,
    /// (persona, replicate, phase) units executed now.
    pub units_run: usize,
    /// Units already complete in the run directory.
    pub units_skipped: usize,
    /// Units executed now that ended flagged.
    pub flagged: usize,
}

/// Supplies the backend for a replicate.
pub type BackendFactory<'a> = dyn Fn(u32) -> Result<Arc<dyn ChatBackend>, GatewayError> + Sync + 'a;

/// Full experiment with the backend the config names.
pub fn run_pipeline(config: &RunConfig) -> Result<PipelineOutcome, WorkbenchError> {
    let factory = backend_factory(config)?;
    run_pipeline_with(config, &*factory)
}

/// Collects every configured phase, then rebuilds behaviors, regressions and
/// the report from the run directory.
pub fn run_pipeline_with(
    config: &RunConfig,
    backends: &BackendFactory<'_>,
) -> Result<PipelineOutcome, WorkbenchError> {
    let outcome = collect(config, backends)?;
    collect_behaviors(&config.out)?;
    analyze_run(&config.out, config.alpha)?;
    write_report(&config.out, config.alpha)?;
    Ok(outcome)
}

/// Builds the config's backend. Mock replicates get derived seeds; an HTTP
/// backend is shared by all replicates.
pub fn backend_factory(config: &RunConfig) -> Result<Box<BackendFactory<'static>>, WorkbenchError> {
    match config.backend {
        BackendChoice::Mock => {
            let config = config.clone();
            Ok(Box::new(move |r| {
                connect(&config.backend_kind(r), config.http_config())
            }))
        }
        BackendChoice::Http => {
            let shared = connect(&config.backend_kind(0), config.http_config())?;
            Ok(Box::new(move |_| Ok(shared.clone())))
        }
    }
}

fn catalog_source(config: &RunConfig) -> Result<(Vec<CompanySpec>, String), WorkbenchError> {
    match &config.catalog {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| WorkbenchError::io(path, e))?;
            let catalog = load_catalog(path).map_err(|e| WorkbenchError::Config(e.to_string()))?;
            Ok((catalog, text))
        }
        None => {
            let catalog = parse_catalog(CATALOG_CSV.as_bytes()).expect("embedded catalog parses");
            Ok((catalog, CATALOG_CSV.to_string()))
        }
    }
}

/// Creates the run directory, or checks that an existing one was produced by
/// a compatible configuration, and snapshots config and catalog into it.
fn prepare_run_dir(config: &RunConfig, catalog_text: &str) -> Result<(), WorkbenchError> {
    let dir = &config.out;
    std::fs::create_dir_all(dir).map_err(|e| WorkbenchError::io(dir, e))?;
    let snapshot = dir.join(CONFIG_SNAPSHOT);
    if snapshot.exists() {
        let previous = RunConfig::load(&snapshot)?;
        if previous.fingerprint() != config.fingerprint() {
            return Err(WorkbenchError::Config(format!(
                "{} was produced by a different configuration; use a fresh --out",
                dir.display()
            )));
        }
    }
    let catalog_path = dir.join(CATALOG_SNAPSHOT);
    match std::fs::read_to_string(&catalog_path) {
        Ok(existing) if existing != catalog_text => {
            return Err(WorkbenchError::Config(format!(
                "{} holds a different catalog",
                dir.display()
            )))
        }
        Ok(_) => {}
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            write_file(&catalog_path, catalog_text)?;
        }
        Err(e) => return Err(WorkbenchError::io(&catalog_path, e)),
    }
    write_file(&snapshot, &config.to_toml())
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), WorkbenchError> {
    std::fs::write(path, contents).map_err(|e| WorkbenchError::io(path, e))
}

struct Unit {
    profile: PersonaProfile,
    replicate: u32,
    phases: Vec<Phase>,
}

struct Worker<'a> {
    run_id: &'a str,
    catalog: &'a [CompanySpec],
    inventory: &'a BfiInventory,
    survey: SurveyOptions,
    sim: SimOptions,
}

enum UnitResult {
    Records {
        records: Vec<RunRecord>,
        flagged: bool,
    },
    Fatal(GatewayError),
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Flag for a per-persona gateway failure, or the error itself when it must
/// stop the whole run.
fn gateway_flag(e: GatewayError) -> Result<&'static str, GatewayError> {
    match e {
        GatewayError::BudgetExceeded(_) | GatewayError::Credential(_) => Err(e),
        GatewayError::Transport { .. } => Ok(FLAG_TRANSPORT_ERROR),
        _ => Ok(FLAG_GATEWAY_ERROR),
    }
}

impl Worker<'_> {
    fn record(&self, unit: &Unit, phase: RecordPhase, step: usize) -> RunRecord {
        RunRecord {
            schema_version: SCHEMA_VERSION,
            run_id: self.run_id.to_string(),
            persona_id: unit.profile.persona_id().0,
            replicate: unit.replicate,
            phase,
            step,
            prompt: String::new(),
            raw_response: String::new(),
            parsed: serde_json::Value::Null,
            flags: Vec::new(),
            attempts: 0,
            timestamp: timestamp(),
        }
    }

    fn failed(&self, unit: &Unit, phase: RecordPhase, flag: &str, error: String) -> UnitResult {
        let mut r = self.record(unit, phase, 0);
        r.flags.push(flag.to_string());
        r.parsed = json!({ "error": error });
        UnitResult::Records {
            records: vec![r],
            flagged: true,
        }
    }

    fn survey_failure(&self, unit: &Unit, phase: RecordPhase, e: SurveyError) -> UnitResult {
        match e {
            SurveyError::MalformedAnswer { .. } => {
                self.failed(unit, phase, FLAG_MALFORMED_ANSWER, e.to_string())
            }
            SurveyError::Gateway(g) => match gateway_flag(g.clone()) {
                Ok(flag) => self.failed(unit, phase, flag, g.to_string()),
                Err(fatal) => UnitResult::Fatal(fatal),
            },
        }
    }

    fn run(&self, unit: &Unit, phase: Phase, backend: &dyn ChatBackend) -> UnitResult {
        match phase {
            Phase::Survey => match run_survey(&unit.profile, backend, &self.survey) {
                Ok(x) => {
                    let mut r = self.record(unit, RecordPhase::Survey, 0);
                    r.prompt = x.prompt;
                    r.raw_response = x.raw;
                    r.parsed = json!({ "answers": x.value.answers });
                    r.attempts = x.attempts;
                    UnitResult::Records {
                        records: vec![r],
                        flagged: false,
                    }
                }
                Err(e) => self.survey_failure(unit, RecordPhase::Survey, e),
            },
            Phase::Bfi => match run_bfi(&unit.profile, backend, self.inventory, &self.survey) {
                Ok(x) => {
                    let mut r = self.record(unit, RecordPhase::Bfi, 0);
                    r.prompt = x.prompt;
                    r.raw_response = x.raw;
                    r.parsed = json!({ "answers": x.value.answers, "means": x.value.means });
                    r.attempts = x.attempts;
                    UnitResult::Records {
                        records: vec![r],
                        flagged: false,
                    }
                }
                Err(e) => self.survey_failure(unit, RecordPhase::Bfi, e),
            },
            Phase::Simulate => {
                match run_simulation(&unit.profile, backend, self.catalog, &self.sim) {
                    Ok(t) => {
                        let mut records: Vec<RunRecord> = t
                            .steps
                            .iter()
                            .enumerate()
                            .map(|(i, s)| {
                                let mut r = self.record(unit, RecordPhase::SimStep, i);
                                r.prompt = s.prompt.clone();
                                r.raw_response = s.raw.clone();
                                r.parsed = s.action.to_json();
                                r.attempts = s.attempts;
                                r
                            })
                            .collect();
                        let mut fin = self.record(unit, RecordPhase::SimFinal, t.steps.len());
                        fin.parsed = json!({
                            "invested_company": t.invested_company,
                            "forced_decision": t.forced_decision,
                            "actions": t.steps.iter().map(|s| s.action.to_json()).collect::<Vec<_>>(),
                        });
                        fin.attempts = t.steps.iter().map(|s| s.attempts).sum();
                        records.push(fin);
                        UnitResult::Records {
                            records,
                            flagged: false,
                        }
                    }
                    Err(SimError::Gateway(g)) => match gateway_flag(g.clone()) {
                        Ok(flag) => self.failed(unit, RecordPhase::SimFinal, flag, g.to_string()),
                        Err(fatal) => UnitResult::Fatal(fatal),
                    },
                    Err(e) => self.failed(
                        unit,
                        RecordPhase::SimFinal,
                        FLAG_MALFORMED_ACTION,
                        e.to_string(),
                    ),
                }
            }
        }
    }
}

/// Runs every pending (persona, replicate, phase) unit and appends its
/// records. Analysis artifacts are not touched.
pub fn collect(
    config: &RunConfig,
    backends: &BackendFactory<'_>,
) -> Result<PipelineOutcome, WorkbenchError> {
    config.validate()?;
    let (catalog, catalog_text) = catalog_source(config)?;
    prepare_run_dir(config, &catalog_text)?;
    let transcripts = config.out.join(TRANSCRIPTS);
    let mut writer = RecordWriter::open(&transcripts)?;
    let done = completed_units(&read_records(&transcripts)?);

    let mut phases = config.phases.clone();
    phases.sort();
    phases.dedup();
    let grid = generate_grid();
    let mut units = Vec::new();
    let mut skipped = 0;
    for replicate in 0..config.replicates {
        for profile in &grid {
            let id = profile.persona_id().0;
            let pending: Vec<Phase> = phases
                .iter()
                .copied()
                .filter(|p| !done.contains(&(id.clone(), replicate, *p)))
                .collect();
            skipped += phases.len() - pending.len();
            if !pending.is_empty() {
                units.push(Unit {
                    profile: *profile,
                    replicate,
                    phases: pending,
                });
            }
        }
    }

    let counter = Arc::new(AtomicU64::new(0));
    let mut guarded: Vec<Arc<dyn ChatBackend>> = Vec::new();
    if !units.is_empty() {
        for r in 0..config.replicates {
            let inner = backends(r)?;
            guarded.push(Arc::new(BudgetGuard::with_counter(
                inner,
                config.max_requests,
                counter.clone(),
            )));
        }
    }

    let run_id = uuid::Uuid::new_v4().to_string();
    let worker = Worker {
        run_id: &run_id,
        catalog: &catalog,
        inventory: BfiInventory::builtin(),
        survey: SurveyOptions {
            repair_limit: config.repair_limit,
            params: config.params(),
        },
        sim: SimOptions {
            repair_limit: config.repair_limit,
            params: config.params(),
        },
    };
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let fatal: Mutex<Option<GatewayError>> = Mutex::new(None);
    let units_run = AtomicUsize::new(0);
    let flagged = AtomicUsize::new(0);

    let write_result = std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<Vec<RunRecord>>();
        let writer_handle = scope.spawn(move || -> Result<(), WorkbenchError> {
            for batch in rx {
                writer.write_batch(&batch)?;
            }
            Ok(())
        });
        for _ in 0..config.concurrency.min(units.len().max(1)) {
            let tx = tx.clone();
            let (worker, units, guarded) = (&worker, &units, &guarded);
            let (next, abort, fatal, units_run, flagged) =
                (&next, &abort, &fatal, &units_run, &flagged);
            scope.spawn(move || loop {
                if abort.load(Ordering::SeqCst) {
                    return;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(unit) = units.get(i) else { return };
                let backend = &*guarded[unit.replicate as usize];
                for phase in &unit.phases {
                    match worker.run(unit, *phase, backend) {
                        UnitResult::Records {
                            records,
                            flagged: f,
                        } => {
                            units_run.fetch_add(1, Ordering::SeqCst);
                            if f {
                                flagged.fetch_add(1, Ordering::SeqCst);
                            }
                            if tx.send(records).is_err() {
                                abort.store(true, Ordering::SeqCst);
                                return;
                            }
                        }
                        UnitResult::Fatal(e) => {
                            log::error!("stopping run: {e}");
                            fatal.lock().unwrap().get_or_insert(e);
                            abort.store(true, Ordering::SeqCst);
                            return;
                        }
                    }
                }
            });
        }
        drop(tx);
        writer_handle.join().expect("writer thread panicked")
    });
    write_result?;
    if let Some(e) = fatal.into_inner().unwrap() {
        return Err(WorkbenchError::Gateway(e));
    }
    Ok(PipelineOutcome {
        run_dir: config.out.clone(),
        requests: counter.load(Ordering::SeqCst),
        units_run: units_run.into_inner(),
        units_skipped: skipped,
        flagged: flagged.into_inner(),
    })
}
