use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::Phase;
use super::pipeline::{write_file, CATALOG_SNAPSHOT};
use super::records::{read_records, RunRecord, SCHEMA_VERSION, TRANSCRIPTS};
use crate::error::{StatsError, WorkbenchError};
use crate::invest::{
    apply_action, default_catalog, load_catalog, sim_behaviors, CompanySpec, SimulationAction,
    SimulationState, SimulationTranscript, TranscriptStep,
};
use crate::persona::{generate_grid, PersonaId, Trait};
use crate::prompting::BfiInventory;
use crate::stats::{
    compare_signs, mean, ols_fit, pearson_matrix, sample_sd, CoefficientRow, DesignMatrix,
    ExpectedSignTable, RegressionResult, SignReport, Verdict,
};
use crate::survey::{score_bfi, survey_behaviors, SurveyResponse};

pub const BEHAVIORS: &str = "behaviors.csv";
pub const BFI_SCORES: &str = "bfi_scores.csv";
pub const COEFFICIENTS: &str = "coefficients.csv";
pub const SIGNREPORT: &str = "signreport.csv";
pub const FITS: &str = "fits.csv";
pub const BFI_SUMMARY: &str = "bfi_summary.csv";
pub const BFI_CORRELATIONS: &str = "bfi_correlations.csv";
pub const SUMMARY: &str = "summary.txt";
pub const PLOTS: &str = "plots";

/// Published human-population BFI means and standard deviations, O C E A N.
pub const HUMAN_NORMS: [(f64, f64); 5] = [
    (3.94, 0.67),
    (3.63, 0.72),
    (3.28, 0.90),
    (3.67, 0.67),
    (3.22, 0.84),
];

/// One row of `behaviors.csv`: a persona replicate with its encoded traits
/// and every metric from both sources. Empty cells mean "not measured".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorRow {
    pub persona_id: String,
    #[serde(rename = "O")]
    pub o: i8,
    #[serde(rename = "C")]
    pub c: i8,
    #[serde(rename = "E")]
    pub e: i8,
    #[serde(rename = "A")]
    pub a: i8,
    #[serde(rename = "N")]
    pub n: i8,
    pub q1: Option<u8>,
    pub q2: Option<u8>,
    pub q3: Option<u8>,
    pub q4: Option<u8>,
    pub q5: Option<u8>,
    pub q6: Option<u8>,
    pub q7: Option<u8>,
    pub q8: Option<u8>,
    pub q9: Option<u8>,
    pub survey_independent: Option<f64>,
    pub survey_impulsivity: Option<f64>,
    pub survey_risk: Option<f64>,
    pub survey_env_interest: Option<f64>,
    pub sim_total_research: Option<u32>,
    pub sim_independent_share: Option<f64>,
    pub sim_impulsivity: Option<f64>,
    pub sim_risk_factor: Option<f64>,
    pub sim_risky_flag: Option<u8>,
    pub sim_env_interest: Option<u32>,
    pub sim_env_invest: Option<u8>,
    pub flags: String,
    pub replicate: u32,
    pub schema_version: u32,
}

impl BehaviorRow {
    fn new(id: &PersonaId, replicate: u32) -> Result<Self, String> {
        let e = id.profile().map_err(|e| e.to_string())?.encoded();
        Ok(Self {
            persona_id: id.0.clone(),
            o: e[0],
            c: e[1],
            e: e[2],
            a: e[3],
            n: e[4],
            q1: None,
            q2: None,
            q3: None,
            q4: None,
            q5: None,
            q6: None,
            q7: None,
            q8: None,
            q9: None,
            survey_independent: None,
            survey_impulsivity: None,
            survey_risk: None,
            survey_env_interest: None,
            sim_total_research: None,
            sim_independent_share: None,
            sim_impulsivity: None,
            sim_risk_factor: None,
            sim_risky_flag: None,
            sim_env_interest: None,
            sim_env_invest: None,
            flags: String::new(),
            replicate,
            schema_version: SCHEMA_VERSION,
        })
    }

    pub fn traits(&self) -> [f64; 5] {
        [self.o, self.c, self.e, self.a, self.n].map(f64::from)
    }

    pub fn flag_list(&self) -> impl Iterator<Item = &str> {
        self.flags.split(';').filter(|f| !f.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BfiRow {
    pub persona_id: String,
    #[serde(rename = "O")]
    pub o: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "N")]
    pub n: f64,
    pub replicate: u32,
    pub schema_version: u32,
}

impl BfiRow {
    pub fn means(&self) -> [f64; 5] {
        [self.o, self.c, self.e, self.a, self.n]
    }
}

type Response = (&'static str, fn(&BehaviorRow) -> Option<f64>);

/// Regressed responses in report order. Names carry their source prefix.
pub const RESPONSES: [Response; 10] = [
    ("survey.independent_learning", |r| r.survey_independent),
    ("survey.impulsivity", |r| r.survey_impulsivity),
    ("survey.risk_appetite", |r| r.survey_risk),
    ("survey.env_interest", |r| r.survey_env_interest),
    ("sim.independent_learning", |r| r.sim_independent_share),
    ("sim.impulsivity", |r| r.sim_impulsivity),
    ("sim.risk_appetite", |r| r.sim_risk_factor),
    ("sim.risky_investment", |r| r.sim_risky_flag.map(f64::from)),
    ("sim.env_interest", |r| r.sim_env_interest.map(f64::from)),
    ("sim.env_investment", |r| r.sim_env_invest.map(f64::from)),
];

fn csv_error(path: &Path, e: csv::Error) -> WorkbenchError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => WorkbenchError::io(path, io),
        other => WorkbenchError::artifact(path, format!("{other:?}")),
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), WorkbenchError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| WorkbenchError::io(path, e))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, WorkbenchError> {
    if !path.exists() {
        return Err(WorkbenchError::MissingArtifact(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| csv_error(path, e)))
        .collect()
}

/// The catalog a run used: its snapshot if present, otherwise the default.
pub fn run_catalog(dir: &Path) -> Result<Vec<CompanySpec>, WorkbenchError> {
    let path = dir.join(CATALOG_SNAPSHOT);
    if path.exists() {
        load_catalog(&path).map_err(|e| WorkbenchError::artifact(&path, e))
    } else {
        Ok(default_catalog())
    }
}

fn answers_of(record: &RunRecord) -> Result<Vec<u8>, String> {
    record
        .parsed
        .get("answers")
        .and_then(Value::as_array)
        .ok_or("record has no answers")?
        .iter()
        .map(|v| {
            v.as_u64()
                .and_then(|n| u8::try_from(n).ok())
                .ok_or("answer is not a small integer")
        })
        .collect::<Result<_, _>>()
        .map_err(str::to_string)
}

/// Rebuilds a simulation transcript from the recorded action list by replay.
pub fn replay_actions(
    persona_id: &PersonaId,
    actions: &[Value],
    catalog: &[CompanySpec],
) -> Result<SimulationTranscript, String> {
    let mut state = SimulationState::initial(catalog);
    let mut steps = Vec::with_capacity(actions.len());
    for (i, a) in actions.iter().enumerate() {
        let action =
            SimulationAction::from_json(a, catalog).map_err(|e| format!("action {i}: {e}"))?;
        let next = apply_action(&state, &action).map_err(|e| format!("action {i}: {e}"))?;
        steps.push(TranscriptStep {
            state,
            action,
            prompt: String::new(),
            raw: String::new(),
            attempts: 1,
        });
        state = next;
    }
    let invested = state
        .invested_company
        .clone()
        .ok_or("transcript never invests")?;
    let transcript = SimulationTranscript {
        persona_id: persona_id.clone(),
        forced_decision: steps.last().is_some_and(|s| s.state.forced()),
        invested_company: invested,
        steps,
    };
    transcript.verify(catalog)?;
    Ok(transcript)
}

fn add_flag(row: &mut BehaviorRow, flag: String) {
    if !row.flags.is_empty() {
        row.flags.push(';');
    }
    row.flags.push_str(&flag);
}

fn fill_survey(row: &mut BehaviorRow, id: &PersonaId, rec: &RunRecord) -> Result<(), String> {
    let answers: [u8; 9] = answers_of(rec)?
        .try_into()
        .map_err(|_| "expected 9 survey answers".to_string())?;
    let response = SurveyResponse::new(id.clone(), answers)?;
    let b = survey_behaviors(&response);
    let q = answers.map(Some);
    [
        row.q1, row.q2, row.q3, row.q4, row.q5, row.q6, row.q7, row.q8, row.q9,
    ] = q;
    row.survey_independent = b.independent_learning;
    row.survey_impulsivity = Some(b.impulsivity);
    row.survey_risk = Some(b.risk_appetite);
    row.survey_env_interest = Some(b.env_interest);
    Ok(())
}

fn fill_sim(
    row: &mut BehaviorRow,
    id: &PersonaId,
    rec: &RunRecord,
    catalog: &[CompanySpec],
) -> Result<(), String> {
    let actions = rec
        .parsed
        .get("actions")
        .and_then(Value::as_array)
        .ok_or("record has no action list")?;
    let transcript = replay_actions(id, actions, catalog)?;
    let m = sim_behaviors(&transcript, catalog);
    row.sim_total_research = Some(m.total_research);
    row.sim_independent_share = m.behaviors.independent_learning;
    row.sim_impulsivity = Some(m.behaviors.impulsivity);
    row.sim_risk_factor = Some(m.behaviors.risk_appetite);
    row.sim_risky_flag = Some(u8::from(m.risky));
    row.sim_env_interest = Some(m.behaviors.env_interest as u32);
    row.sim_env_invest = m.behaviors.env_investment.map(|v| v as u8);
    Ok(())
}

/// The rebuilt behavior and BFI tables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BehaviorTable {
    pub rows: Vec<BehaviorRow>,
    pub bfi: Vec<BfiRow>,
}

/// Rebuilds `behaviors.csv` (and `bfi_scores.csv` when the BFI phase ran)
/// from `transcripts.jsonl`. Rows are in replicate, then grid order. Only
/// the latest terminal record of each unit counts.
pub fn collect_behaviors(dir: &Path) -> Result<BehaviorTable, WorkbenchError> {
    let path = dir.join(TRANSCRIPTS);
    if !path.exists() {
        return Err(WorkbenchError::MissingArtifact(path));
    }
    let records = read_records(&path)?;
    let catalog = run_catalog(dir)?;
    let inventory = BfiInventory::builtin();

    let mut latest: HashMap<(String, u32, Phase), &RunRecord> = HashMap::new();
    let mut replicates = 0;
    for r in &records {
        if let Some(phase) = r.phase.completes() {
            latest.insert((r.persona_id.clone(), r.replicate, phase), r);
            replicates = replicates.max(r.replicate + 1);
        }
    }

    let mut table = BehaviorTable::default();
    for replicate in 0..replicates {
        for profile in generate_grid() {
            let id = profile.persona_id();
            let get = |p: Phase| latest.get(&(id.0.clone(), replicate, p)).copied();
            let (survey, bfi, sim) = (get(Phase::Survey), get(Phase::Bfi), get(Phase::Simulate));
            if survey.is_none() && bfi.is_none() && sim.is_none() {
                continue;
            }
            let mut row =
                BehaviorRow::new(&id, replicate).map_err(|e| WorkbenchError::artifact(&path, e))?;
            if let Some(rec) = survey {
                if let Some(flag) = rec.flags.first() {
                    add_flag(&mut row, format!("survey:{flag}"));
                } else if let Err(e) = fill_survey(&mut row, &id, rec) {
                    return Err(WorkbenchError::artifact(&path, format!("{id}: {e}")));
                }
            }
            if let Some(rec) = sim {
                if let Some(flag) = rec.flags.first() {
                    add_flag(&mut row, format!("sim:{flag}"));
                } else if let Err(e) = fill_sim(&mut row, &id, rec, &catalog) {
                    return Err(WorkbenchError::artifact(&path, format!("{id}: {e}")));
                }
            }
            if let Some(rec) = bfi {
                if let Some(flag) = rec.flags.first() {
                    add_flag(&mut row, format!("bfi:{flag}"));
                } else {
                    let answers =
                        answers_of(rec).map_err(|e| WorkbenchError::artifact(&path, e))?;
                    let m = score_bfi(inventory, &answers)
                        .map_err(|e| WorkbenchError::artifact(&path, e))?;
                    table.bfi.push(BfiRow {
                        persona_id: id.0.clone(),
                        o: m[0],
                        c: m[1],
                        e: m[2],
                        a: m[3],
                        n: m[4],
                        replicate,
                        schema_version: SCHEMA_VERSION,
                    });
                }
            }
            table.rows.push(row);
        }
    }
    write_csv(&dir.join(BEHAVIORS), &table.rows)?;
    if !table.bfi.is_empty() {
        write_csv(&dir.join(BFI_SCORES), &table.bfi)?;
    }
    Ok(table)
}

/// One row of `coefficients.csv`. Numeric cells are empty when the fit
/// failed or the source did not report them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRecord {
    pub schema_version: u32,
    pub behavior: String,
    #[serde(rename = "trait")]
    pub trait_symbol: String,
    pub beta_std: Option<f64>,
    pub beta_raw: Option<f64>,
    pub stderr: Option<f64>,
    pub t: Option<f64>,
    pub p: Option<f64>,
    pub expected_sign: Option<String>,
    pub verdict: Option<String>,
    pub n_used: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignReportRecord {
    pub schema_version: u32,
    pub behavior: String,
    #[serde(rename = "trait")]
    pub trait_symbol: String,
    pub beta_std: f64,
    pub p: Option<f64>,
    pub observed_sign: i8,
    pub significant: Option<bool>,
    pub expected_sign: String,
    pub verdict: String,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub schema_version: u32,
    pub behavior: String,
    pub status: String,
    pub n_used: Option<usize>,
    pub r_squared: Option<f64>,
    pub intercept_raw: Option<f64>,
    pub degenerate_response: Option<bool>,
}

pub fn stats_error_label(e: &StatsError) -> &'static str {
    match e {
        StatsError::Length { .. } => "LengthError",
        StatsError::RankDeficient => "RankDeficient",
        StatsError::InsufficientData { .. } => "InsufficientData",
        StatsError::DegenerateColumn(_) => "DegenerateColumn",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    /// Fit per regressed response, in report order. Empty when the run
    /// directory only held coefficients.
    pub fits: Vec<(String, Result<RegressionResult, StatsError>)>,
    pub report: SignReport,
}

impl Analysis {
    pub fn fit(&self, behavior: &str) -> Option<&Result<RegressionResult, StatsError>> {
        self.fits
            .iter()
            .find(|(b, _)| b == behavior)
            .map(|(_, f)| f)
    }
}

fn sign_records(report: &SignReport) -> Vec<SignReportRecord> {
    report
        .cells
        .iter()
        .map(|c| SignReportRecord {
            schema_version: SCHEMA_VERSION,
            behavior: c.behavior.clone(),
            trait_symbol: c.trait_.symbol().to_string(),
            beta_std: c.beta,
            p: c.p,
            observed_sign: c.observed_sign,
            significant: c.significant,
            expected_sign: c.expected.symbol().to_string(),
            verdict: c.verdict.to_string(),
            alpha: report.alpha,
        })
        .collect()
}

/// Recomputes regressions and sign verdicts from `behaviors.csv`. A directory
/// holding only `coefficients.csv` (such as a published-coefficient fixture)
/// gets a sign report computed from those coefficients.
pub fn analyze_run(dir: &Path, alpha: f64) -> Result<Analysis, WorkbenchError> {
    let behaviors = dir.join(BEHAVIORS);
    let expected = ExpectedSignTable::builtin();
    if !behaviors.exists() {
        let coefficients = dir.join(COEFFICIENTS);
        if !coefficients.exists() {
            return Err(WorkbenchError::MissingArtifact(behaviors));
        }
        let rows = coefficient_rows(&coefficients)?;
        let report = compare_signs(&rows, &expected, alpha);
        write_csv(&dir.join(SIGNREPORT), &sign_records(&report))?;
        return Ok(Analysis {
            fits: Vec::new(),
            report,
        });
    }

    let rows: Vec<BehaviorRow> = read_csv(&behaviors)?;
    let traits: Vec<[f64; 5]> = rows.iter().map(BehaviorRow::traits).collect();
    let mut fits = Vec::new();
    let mut coefficient_records = Vec::new();
    let mut fit_records = Vec::new();
    let mut sign_inputs = Vec::new();
    for (name, get) in RESPONSES {
        let response: Vec<Option<f64>> = rows.iter().map(get).collect();
        if response.iter().all(Option::is_none) {
            continue;
        }
        let design = DesignMatrix::new(traits.clone(), response);
        let fit = ols_fit(name, &design);
        match &fit {
            Ok(result) => {
                let family = crate::stats::Behavior::of_response(name).expect("known response");
                for c in &result.coefficients {
                    let cell = compare_signs(
                        &[CoefficientRow {
                            behavior: name.to_string(),
                            trait_: c.trait_,
                            beta: c.beta_std,
                            p: Some(c.p),
                        }],
                        &expected,
                        alpha,
                    );
                    coefficient_records.push(CoefficientRecord {
                        schema_version: SCHEMA_VERSION,
                        behavior: name.to_string(),
                        trait_symbol: c.trait_.symbol().to_string(),
                        beta_std: Some(c.beta_std),
                        beta_raw: Some(c.beta_raw),
                        stderr: Some(c.stderr),
                        t: Some(c.t),
                        p: Some(c.p),
                        expected_sign: Some(expected.sign(family, c.trait_).symbol().to_string()),
                        verdict: Some(cell.cells[0].verdict.to_string()),
                        n_used: Some(result.n_used),
                    });
                }
                sign_inputs.extend(CoefficientRow::from_result(result));
                fit_records.push(FitRecord {
                    schema_version: SCHEMA_VERSION,
                    behavior: name.to_string(),
                    status: "ok".into(),
                    n_used: Some(result.n_used),
                    r_squared: Some(result.r_squared),
                    intercept_raw: Some(result.intercept_raw),
                    degenerate_response: Some(result.degenerate_response),
                });
            }
            Err(e) => {
                log::warn!("{name}: {e}");
                let family = crate::stats::Behavior::of_response(name).expect("known response");
                for t in Trait::ALL {
                    coefficient_records.push(CoefficientRecord {
                        schema_version: SCHEMA_VERSION,
                        behavior: name.to_string(),
                        trait_symbol: t.symbol().to_string(),
                        beta_std: None,
                        beta_raw: None,
                        stderr: None,
                        t: None,
                        p: None,
                        expected_sign: Some(expected.sign(family, t).symbol().to_string()),
                        verdict: Some(stats_error_label(e).to_string()),
                        n_used: Some(design.n_used()),
                    });
                }
                fit_records.push(FitRecord {
                    schema_version: SCHEMA_VERSION,
                    behavior: name.to_string(),
                    status: stats_error_label(e).to_string(),
                    n_used: Some(design.n_used()),
                    r_squared: None,
                    intercept_raw: None,
                    degenerate_response: None,
                });
            }
        }
        fits.push((name.to_string(), fit));
    }
    let report = compare_signs(&sign_inputs, &expected, alpha);
    write_csv(&dir.join(COEFFICIENTS), &coefficient_records)?;
    write_csv(&dir.join(SIGNREPORT), &sign_records(&report))?;
    write_csv(&dir.join(FITS), &fit_records)?;
    Ok(Analysis { fits, report })
}

/// Coefficients with a standardized beta, as sign-comparison input.
pub fn coefficient_rows(path: &Path) -> Result<Vec<CoefficientRow>, WorkbenchError> {
    let records: Vec<CoefficientRecord> = read_csv(path)?;
    let mut rows = Vec::new();
    for r in records {
        let Some(beta) = r.beta_std else { continue };
        let trait_ = Trait::from_symbol(&r.trait_symbol).ok_or_else(|| {
            WorkbenchError::artifact(path, format!("unknown trait {:?}", r.trait_symbol))
        })?;
        rows.push(CoefficientRow {
            behavior: r.behavior,
            trait_,
            beta,
            p: r.p,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRecord {
    #[serde(rename = "trait")]
    pub trait_symbol: String,
    pub trait_name: String,
    pub beta_std: Option<f64>,
    pub p: Option<f64>,
    /// Set exactly when `p < alpha`; empty when p is unknown.
    pub significant: Option<bool>,
    pub marker: String,
}

/// Writes `plots/<behavior>.csv` per behavior in `coefficients.csv`: five
/// trait rows in O C E A N order with a significance marker.
pub fn emit_plot_data(dir: &Path, alpha: f64) -> Result<Vec<PathBuf>, WorkbenchError> {
    let path = dir.join(COEFFICIENTS);
    let records: Vec<CoefficientRecord> = read_csv(&path)?;
    let mut by_behavior: BTreeMap<&str, Vec<&CoefficientRecord>> = BTreeMap::new();
    let mut order = Vec::new();
    for r in &records {
        let e = by_behavior.entry(&r.behavior).or_default();
        if e.is_empty() {
            order.push(r.behavior.as_str());
        }
        e.push(r);
    }
    let plots = dir.join(PLOTS);
    std::fs::create_dir_all(&plots).map_err(|e| WorkbenchError::io(&plots, e))?;
    let mut written = Vec::new();
    for behavior in order {
        let rows = &by_behavior[behavior];
        let plot_rows: Vec<PlotRecord> = Trait::ALL
            .iter()
            .map(|t| {
                let r = rows.iter().find(|r| r.trait_symbol == t.symbol());
                let p = r.and_then(|r| r.p);
                let significant = p.map(|p| p < alpha);
                PlotRecord {
                    trait_symbol: t.symbol().to_string(),
                    trait_name: t.name().to_string(),
                    beta_std: r.and_then(|r| r.beta_std),
                    p,
                    significant,
                    marker: if significant == Some(true) {
                        "*".into()
                    } else {
                        String::new()
                    },
                }
            })
            .collect();
        let out = plots.join(format!("{behavior}.csv"));
        write_csv(&out, &plot_rows)?;
        written.push(out);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BfiSummaryRecord {
    pub schema_version: u32,
    #[serde(rename = "trait")]
    pub trait_name: String,
    pub human_mean: f64,
    pub human_sd: f64,
    pub model_mean: Option<f64>,
    pub model_sd: Option<f64>,
    pub n: usize,
}

/// Per-trait mean and sample SD of the personas' BFI trait scores next to
/// the human norms.
pub fn bfi_summary(scores: &[BfiRow]) -> Vec<BfiSummaryRecord> {
    Trait::ALL
        .iter()
        .map(|t| {
            let v: Vec<f64> = scores.iter().map(|s| s.means()[t.index()]).collect();
            let (hm, hs) = HUMAN_NORMS[t.index()];
            BfiSummaryRecord {
                schema_version: SCHEMA_VERSION,
                trait_name: t.name().to_string(),
                human_mean: hm,
                human_sd: hs,
                model_mean: (!v.is_empty()).then(|| mean(&v)),
                model_sd: (v.len() >= 2).then(|| sample_sd(&v)),
                n: v.len(),
            }
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"))
}

/// Text rendering of the BFI summary: human population next to model results.
pub fn render_bfi_table(summary: &[BfiSummaryRecord]) -> String {
    let mut s = String::new();
    s.push_str("Means and standard deviations of personality traits\n");
    let _ = writeln!(
        s,
        "{:<20}{:>22}{:>22}",
        "", "Human Population", "Model Results"
    );
    let _ = writeln!(
        s,
        "{:<20}{:>11}{:>11}{:>11}{:>11}",
        "Trait", "Mean", "SD", "Mean", "SD"
    );
    for r in summary {
        let _ = writeln!(
            s,
            "{:<20}{:>11.2}{:>11.2}{:>11}{:>11}",
            r.trait_name,
            r.human_mean,
            r.human_sd,
            opt(r.model_mean),
            opt(r.model_sd)
        );
    }
    s
}

/// Upper-triangular inter-trait correlation table.
pub fn render_correlation_table(m: &[[f64; 5]; 5]) -> String {
    let mut s = String::new();
    s.push_str("Inter-trait correlations\n");
    let _ = write!(s, "{:<20}", "");
    for t in Trait::ALL {
        let _ = write!(s, "{:>19}", t.name());
    }
    s.push('\n');
    for (i, t) in Trait::ALL.iter().enumerate() {
        let _ = write!(s, "{:<20}", t.name());
        for (j, v) in m[i].iter().enumerate() {
            if j < i {
                let _ = write!(s, "{:>19}", "");
            } else if j == i {
                let _ = write!(s, "{:>19}", "1");
            } else {
                let _ = write!(s, "{:>19.4}", v);
            }
        }
        s.push('\n');
    }
    s
}

/// Writes plot data, the BFI summary and correlation tables (when BFI scores
/// exist), and `summary.txt`. Output depends only on the run directory.
pub fn write_report(dir: &Path, alpha: f64) -> Result<String, WorkbenchError> {
    let analysis_path = dir.join(SIGNREPORT);
    if !analysis_path.exists() {
        return Err(WorkbenchError::MissingArtifact(analysis_path));
    }
    let plots = emit_plot_data(dir, alpha)?;
    let mut text = String::new();
    let _ = writeln!(text, "Significance level: {alpha}");

    let behaviors = dir.join(BEHAVIORS);
    if behaviors.exists() {
        let rows: Vec<BehaviorRow> = read_csv(&behaviors)?;
        let _ = writeln!(text, "Persona rows: {}", rows.len());
        let mut flag_counts: BTreeMap<String, usize> = BTreeMap::new();
        for r in &rows {
            for f in r.flag_list() {
                *flag_counts.entry(f.to_string()).or_default() += 1;
            }
        }
        if flag_counts.is_empty() {
            text.push_str("Flagged personas: none\n");
        } else {
            text.push_str("Flagged personas (excluded from the affected regressions):\n");
            for (f, n) in &flag_counts {
                let _ = writeln!(text, "  {f}: {n}");
            }
        }
        let zero = rows
            .iter()
            .filter(|r| r.sim_total_research == Some(0))
            .count();
        if rows.iter().any(|r| r.sim_total_research.is_some()) {
            let _ = writeln!(
                text,
                "Zero-research personas excluded from sim.independent_learning: {zero}"
            );
        }
    }

    let fits_path = dir.join(FITS);
    if fits_path.exists() {
        let fits: Vec<FitRecord> = read_csv(&fits_path)?;
        text.push_str("\nRegressions (standardized OLS on O C E A N):\n");
        for f in &fits {
            let _ = writeln!(
                text,
                "  {:<30} n={:<5} R2={:<8} {}",
                f.behavior,
                f.n_used.map_or("-".into(), |n| n.to_string()),
                f.r_squared.map_or("-".into(), |r| format!("{r:.4}")),
                f.status
            );
        }
    }

    let signs: Vec<SignReportRecord> = read_csv(&analysis_path)?;
    text.push_str("\nSign comparison against human findings:\n");
    let _ = writeln!(
        text,
        "  {:<30}{:>22}{:>22}{:>22}{:>22}{:>22}",
        "behavior", "O", "C", "E", "A", "N"
    );
    let mut order: Vec<&str> = Vec::new();
    for s in &signs {
        if !order.contains(&s.behavior.as_str()) {
            order.push(&s.behavior);
        }
    }
    for b in order {
        let _ = write!(text, "  {b:<30}");
        for t in Trait::ALL {
            let cell = signs
                .iter()
                .find(|s| s.behavior == b && s.trait_symbol == t.symbol());
            let rendered = cell.map_or("-".to_string(), |c| {
                let star = if c.significant == Some(true) { "*" } else { "" };
                format!("{:+.3}{star} {}", c.beta_std, c.verdict)
            });
            let _ = write!(text, "{rendered:>22}");
        }
        text.push('\n');
    }
    let mut totals: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &signs {
        *totals.entry(s.verdict.as_str()).or_default() += 1;
    }
    let verdicts = [
        Verdict::Match,
        Verdict::Mismatch,
        Verdict::NotSignificant,
        Verdict::NoBenchmark,
    ];
    let parts: Vec<String> = verdicts
        .iter()
        .map(|v| {
            format!(
                "{v} {}",
                totals.get(v.to_string().as_str()).copied().unwrap_or(0)
            )
        })
        .collect();
    let _ = writeln!(text, "  totals: {}", parts.join(", "));
    let _ = writeln!(text, "Plot data files: {}", plots.len());

    let bfi_path = dir.join(BFI_SCORES);
    if bfi_path.exists() {
        let scores: Vec<BfiRow> = read_csv(&bfi_path)?;
        let summary = bfi_summary(&scores);
        write_csv(&dir.join(BFI_SUMMARY), &summary)?;
        text.push('\n');
        text.push_str(&render_bfi_table(&summary));
        let means: Vec<[f64; 5]> = scores.iter().map(BfiRow::means).collect();
        match pearson_matrix(&means) {
            Ok(m) => {
                let records: Vec<CorrelationRecord> = Trait::ALL
                    .iter()
                    .map(|t| CorrelationRecord {
                        schema_version: SCHEMA_VERSION,
                        trait_name: t.name().to_string(),
                        o: m[t.index()][0],
                        c: m[t.index()][1],
                        e: m[t.index()][2],
                        a: m[t.index()][3],
                        n: m[t.index()][4],
                    })
                    .collect();
                write_csv(&dir.join(BFI_CORRELATIONS), &records)?;
                text.push('\n');
                text.push_str(&render_correlation_table(&m));
            }
            Err(e) => {
                let _ = writeln!(text, "\nInter-trait correlations unavailable: {e}");
            }
        }
    }
    write_file(&dir.join(SUMMARY), &text)?;
    Ok(text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRecord {
    pub schema_version: u32,
    #[serde(rename = "trait")]
    pub trait_name: String,
    #[serde(rename = "Openness")]
    pub o: f64,
    #[serde(rename = "Conscientiousness")]
    pub c: f64,
    #[serde(rename = "Extraversion")]
    pub e: f64,
    #[serde(rename = "Agreeableness")]
    pub a: f64,
    #[serde(rename = "Neuroticism")]
    pub n: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn replay_builds_verified_transcript() {
        let cat = default_catalog();
        let id = PersonaId("M-M-M-M-M".into());
        let actions = vec![
            json!({"company": "Ruby", "method": "talk to expert"}),
            json!({"company": "Ruby", "method": "research independently"}),
            json!({"company": "Diamond", "method": "invest"}),
        ];
        let t = replay_actions(&id, &actions, &cat).unwrap();
        assert_eq!(t.steps.len(), 3);
        assert_eq!(t.invested_company, "Diamond");
        assert!(!t.forced_decision);
    }

    #[test]
    fn replay_rejects_unterminated_or_illegal() {
        let cat = default_catalog();
        let id = PersonaId("M-M-M-M-M".into());
        let open = vec![json!({"company": "Ruby", "method": "talk to expert"})];
        assert!(replay_actions(&id, &open, &cat).is_err());
        let after = vec![
            json!({"company": "Ruby", "method": "invest"}),
            json!({"company": "Ruby", "method": "invest"}),
        ];
        assert!(replay_actions(&id, &after, &cat).is_err());
    }

    #[test]
    fn bfi_table_layout() {
        let rows: Vec<BfiRow> = (0..3)
            .map(|i| BfiRow {
                persona_id: format!("p{i}"),
                o: 3.0 + f64::from(i),
                c: 3.0,
                e: 2.0,
                a: 4.0,
                n: 1.0 + f64::from(i),
                replicate: 0,
                schema_version: 1,
            })
            .collect();
        let summary = bfi_summary(&rows);
        assert_eq!(summary[0].model_mean, Some(4.0));
        assert_eq!(summary[0].model_sd, Some(1.0));
        let table = render_bfi_table(&summary);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 8);
        assert!(lines[1].contains("Human Population") && lines[1].contains("Model Results"));
        assert!(
            lines[3].starts_with("Openness")
                && lines[3].contains("3.94")
                && lines[3].contains("0.67")
        );
        assert!(
            lines[7].starts_with("Neuroticism")
                && lines[7].contains("3.22")
                && lines[7].contains("0.84")
        );
    }

    #[test]
    fn correlation_table_places_o_n_cell() {
        let mut m = [[0.0; 5]; 5];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        m[0][4] = -0.4303;
        m[4][0] = -0.4303;
        let t = render_correlation_table(&m);
        let openness = t.lines().nth(2).unwrap();
        assert!(openness.starts_with("Openness"));
        assert!(openness.trim_end().ends_with("-0.4303"));
    }
}
