//! C ABI over the persona workbench.
//!
//! Every fallible call returns a [`PwStatus`]; on failure a message is kept
//! per thread and can be read with [`pw_last_error`]. Strings returned
//! through `char **` are owned by the caller and must be released with
//! [`pw_string_free`]. Handles are released with their matching `_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use persona_workbench::error::{GatewayError, StatsError, WorkbenchError};
use persona_workbench::gateway::{extract_json, mock_policy_respond};
use persona_workbench::invest::{default_catalog, expected_value, load_catalog, CompanySpec};
use persona_workbench::persona::{generate_grid, PersonaId, PersonaProfile};
use persona_workbench::prompting::{
    render_bfi_prompt, render_sim_prompt, render_survey_prompt, ResearchTally,
};
use persona_workbench::stats::{ols, student_t_p, Verdict};
use persona_workbench::survey::{survey_behaviors, SurveyResponse};
use persona_workbench::workbench::{analyze_run, run_pipeline, RunConfig};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PwStatus {
    PwOk = 0,
    PwNullArgument = 1,
    PwInvalidArgument = 2,
    PwParseError = 3,
    PwUnrecognizedPrompt = 4,
    PwRankDeficient = 5,
    PwInsufficientData = 6,
    PwConfigError = 7,
    PwIoError = 8,
    PwMissingArtifact = 9,
    PwGatewayError = 10,
    PwBudgetExceeded = 11,
    PwPanic = 99,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

struct Failure(PwStatus, String);

impl Failure {
    fn new(status: PwStatus, message: impl ToString) -> Self {
        Failure(status, message.to_string())
    }
}

impl From<StatsError> for Failure {
    fn from(e: StatsError) -> Self {
        let status = match e {
            StatsError::RankDeficient => PwStatus::PwRankDeficient,
            StatsError::InsufficientData { .. } => PwStatus::PwInsufficientData,
            _ => PwStatus::PwInvalidArgument,
        };
        Failure::new(status, e)
    }
}

impl From<WorkbenchError> for Failure {
    fn from(e: WorkbenchError) -> Self {
        let status = match &e {
            WorkbenchError::Config(_) => PwStatus::PwConfigError,
            WorkbenchError::Io { .. } | WorkbenchError::Artifact { .. } => PwStatus::PwIoError,
            WorkbenchError::MissingArtifact(_) => PwStatus::PwMissingArtifact,
            WorkbenchError::Gateway(GatewayError::BudgetExceeded(_)) => PwStatus::PwBudgetExceeded,
            WorkbenchError::Gateway(_) => PwStatus::PwGatewayError,
            WorkbenchError::Stats(s) => Failure::from(s.clone()).0,
        };
        Failure::new(status, e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PwStatus::PwOk
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PwStatus::PwPanic
        }
    }
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(
            PwStatus::PwNullArgument,
            format!("{what} is null"),
        ));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(PwStatus::PwInvalidArgument, format!("{what} is not UTF-8")))
}

/// # Safety
/// `out` is null or valid for a pointer write.
unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(
            PwStatus::PwNullArgument,
            "output pointer is null",
        ));
    }
    let c = CString::new(s)
        .map_err(|_| Failure::new(PwStatus::PwInvalidArgument, "string holds NUL"))?;
    *out = c.into_raw();
    Ok(())
}

fn check_out<T>(out: *mut T) -> Result<(), Failure> {
    if out.is_null() {
        Err(Failure::new(
            PwStatus::PwNullArgument,
            "output pointer is null",
        ))
    } else {
        Ok(())
    }
}

fn profile_of(id: &str) -> Result<PersonaProfile, Failure> {
    PersonaId(id.to_string())
        .profile()
        .map_err(|e| Failure::new(PwStatus::PwInvalidArgument, e))
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn pw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` was returned by this library and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pw_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Opaque persona grid.
pub struct PwGrid {
    profiles: Vec<PersonaProfile>,
}

/// All 243 personas in lexicographic O C E A N order.
#[no_mangle]
pub extern "C" fn pw_grid_new() -> *mut PwGrid {
    Box::into_raw(Box::new(PwGrid {
        profiles: generate_grid(),
    }))
}

/// # Safety
/// `grid` is null or a live handle from [`pw_grid_new`].
#[no_mangle]
pub unsafe extern "C" fn pw_grid_len(grid: *const PwGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.profiles.len())
}

/// Persona id such as `L-M-H-H-L` for grid position `index`.
///
/// # Safety
/// `grid` is a live handle; `out` is valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn pw_grid_persona_id(
    grid: *const PwGrid,
    index: usize,
    out: *mut *mut c_char,
) -> PwStatus {
    guard(|| {
        let g = grid
            .as_ref()
            .ok_or_else(|| Failure::new(PwStatus::PwNullArgument, "grid is null"))?;
        let p = g
            .profiles
            .get(index)
            .ok_or_else(|| Failure::new(PwStatus::PwInvalidArgument, "index out of range"))?;
        write_string(out, p.persona_id().0)
    })
}

/// Encoded trait levels (-1, 0, +1) in O C E A N order.
///
/// # Safety
/// `grid` is a live handle; `out` points to 5 writable `int8_t`.
#[no_mangle]
pub unsafe extern "C" fn pw_grid_encoded(
    grid: *const PwGrid,
    index: usize,
    out: *mut i8,
) -> PwStatus {
    guard(|| {
        check_out(out)?;
        let g = grid
            .as_ref()
            .ok_or_else(|| Failure::new(PwStatus::PwNullArgument, "grid is null"))?;
        let p = g
            .profiles
            .get(index)
            .ok_or_else(|| Failure::new(PwStatus::PwInvalidArgument, "index out of range"))?;
        ptr::copy_nonoverlapping(p.encoded().as_ptr(), out, 5);
        Ok(())
    })
}

/// # Safety
/// `grid` is null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pw_grid_free(grid: *mut PwGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Opaque company catalog.
pub struct PwCatalog {
    companies: Vec<CompanySpec>,
}

/// The five-company default catalog.
#[no_mangle]
pub extern "C" fn pw_catalog_default() -> *mut PwCatalog {
    Box::into_raw(Box::new(PwCatalog {
        companies: default_catalog(),
    }))
}

/// Loads a catalog CSV (name, roi, risk, descriptor).
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn pw_catalog_load(
    path: *const c_char,
    out: *mut *mut PwCatalog,
) -> PwStatus {
    guard(|| {
        check_out(out)?;
        let path = read_str(path, "path")?;
        let companies =
            load_catalog(Path::new(path)).map_err(|e| Failure::new(PwStatus::PwParseError, e))?;
        *out = Box::into_raw(Box::new(PwCatalog { companies }));
        Ok(())
    })
}

/// # Safety
/// `catalog` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pw_catalog_len(catalog: *const PwCatalog) -> usize {
    catalog.as_ref().map_or(0, |c| c.companies.len())
}

/// # Safety
/// `catalog` is a live handle; `out` is valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn pw_catalog_name(
    catalog: *const PwCatalog,
    index: usize,
    out: *mut *mut c_char,
) -> PwStatus {
    guard(|| {
        let c = company(catalog, index)?;
        write_string(out, c.name.clone())
    })
}

unsafe fn company<'a>(catalog: *const PwCatalog, index: usize) -> Result<&'a CompanySpec, Failure> {
    catalog
        .as_ref()
        .ok_or_else(|| Failure::new(PwStatus::PwNullArgument, "catalog is null"))?
        .companies
        .get(index)
        .ok_or_else(|| Failure::new(PwStatus::PwInvalidArgument, "index out of range"))
}

/// `stake * (1 + roi) * (1 - risk)` for company `index`.
///
/// # Safety
/// `catalog` is a live handle; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn pw_expected_value(
    catalog: *const PwCatalog,
    index: usize,
    stake: f64,
    out: *mut f64,
) -> PwStatus {
    guard(|| {
        check_out(out)?;
        if stake.is_nan() || stake < 0.0 {
            return Err(Failure::new(
                PwStatus::PwInvalidArgument,
                "stake must be >= 0",
            ));
        }
        *out = expected_value(company(catalog, index)?, stake);
        Ok(())
    })
}

/// # Safety
/// `catalog` is null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pw_catalog_free(catalog: *mut PwCatalog) {
    if !catalog.is_null() {
        drop(Box::from_raw(catalog));
    }
}

/// Behavioral survey prompt for a persona id.
///
/// # Safety
/// `persona_id` is a NUL-terminated string; `out` is valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn pw_render_survey_prompt(
    persona_id: *const c_char,
    out: *mut *mut c_char,
) -> PwStatus {
    guard(|| {
        let p = profile_of(read_str(persona_id, "persona_id")?)?;
        write_string(out, render_survey_prompt(&p))
    })
}

/// BFI prompt for a persona id.
///
/// # Safety
/// As [`pw_render_survey_prompt`].
#[no_mangle]
pub unsafe extern "C" fn pw_render_bfi_prompt(
    persona_id: *const c_char,
    out: *mut *mut c_char,
) -> PwStatus {
    guard(|| {
        let p = profile_of(read_str(persona_id, "persona_id")?)?;
        write_string(out, render_bfi_prompt(&p))
    })
}

/// Simulation prompt. `tally` holds one research count per catalog company,
/// in catalog order.
///
/// # Safety
/// `catalog` is a live handle; `tally` points to `pw_catalog_len(catalog)`
/// readable bytes; other pointers as [`pw_render_survey_prompt`].
#[no_mangle]
pub unsafe extern "C" fn pw_render_sim_prompt(
    persona_id: *const c_char,
    catalog: *const PwCatalog,
    tally: *const u8,
    forced: bool,
    out: *mut *mut c_char,
) -> PwStatus {
    guard(|| {
        let p = profile_of(read_str(persona_id, "persona_id")?)?;
        let cat = catalog
            .as_ref()
            .ok_or_else(|| Failure::new(PwStatus::PwNullArgument, "catalog is null"))?;
        if tally.is_null() {
            return Err(Failure::new(PwStatus::PwNullArgument, "tally is null"));
        }
        let counts = std::slice::from_raw_parts(tally, cat.companies.len());
        let tally = ResearchTally::from_counts(
            cat.companies
                .iter()
                .zip(counts)
                .map(|(c, n)| (c.name.clone(), *n))
                .collect(),
        );
        let text = render_sim_prompt(&p, &cat.companies, &tally, forced)
            .map_err(|e| Failure::new(PwStatus::PwInvalidArgument, e))?;
        write_string(out, text)
    })
}

/// First JSON object in free-form model text, re-serialized compactly.
///
/// # Safety
/// `raw` is a NUL-terminated string; `out` is valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn pw_extract_json(raw: *const c_char, out: *mut *mut c_char) -> PwStatus {
    guard(|| {
        let raw = read_str(raw, "raw")?;
        let v = extract_json(raw).map_err(|e| Failure::new(PwStatus::PwParseError, e))?;
        write_string(out, v.to_string())
    })
}

/// Deterministic mock persona reply for a rendered prompt.
///
/// # Safety
/// `prompt` is a NUL-terminated string; `out` is valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn pw_mock_respond(
    prompt: *const c_char,
    seed: u64,
    out: *mut *mut c_char,
) -> PwStatus {
    guard(|| {
        let prompt = read_str(prompt, "prompt")?;
        let text = mock_policy_respond(prompt, seed).map_err(|e| match e {
            GatewayError::UnrecognizedPrompt => Failure::new(PwStatus::PwUnrecognizedPrompt, e),
            other => Failure::new(PwStatus::PwGatewayError, other),
        })?;
        write_string(out, text)
    })
}

/// Survey composites. `independent_learning` is always present for the
/// survey source; environmental investment is not measured there.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PwSurveyBehaviors {
    pub independent_learning: f64,
    pub impulsivity: f64,
    pub risk_appetite: f64,
    pub env_interest: f64,
    pub trend_predictability: u8,
}

/// Composites from nine survey answers.
///
/// # Safety
/// `answers` points to 9 readable bytes; `out` is valid for a write.
#[no_mangle]
pub unsafe extern "C" fn pw_survey_behaviors(
    answers: *const u8,
    out: *mut PwSurveyBehaviors,
) -> PwStatus {
    guard(|| {
        check_out(out)?;
        if answers.is_null() {
            return Err(Failure::new(PwStatus::PwNullArgument, "answers is null"));
        }
        let mut a = [0u8; 9];
        a.copy_from_slice(std::slice::from_raw_parts(answers, 9));
        let r = SurveyResponse::new(PersonaId(String::new()), a)
            .map_err(|e| Failure::new(PwStatus::PwInvalidArgument, e))?;
        let b = survey_behaviors(&r);
        *out = PwSurveyBehaviors {
            independent_learning: b.independent_learning.unwrap_or(f64::NAN),
            impulsivity: b.impulsivity,
            risk_appetite: b.risk_appetite,
            env_interest: b.env_interest,
            trend_predictability: r.trend_predictability(),
        };
        Ok(())
    })
}

/// Two-sided Student-t tail probability. Returns NaN when `df` is 0.
#[no_mangle]
pub extern "C" fn pw_student_t_p(t: f64, df: u32) -> f64 {
    if df == 0 {
        return f64::NAN;
    }
    student_t_p(t, df)
}

/// Least squares on an `n` x `k` row-major design (include an intercept
/// column yourself). Each output array holds `k` values.
///
/// # Safety
/// `x` holds `n * k` doubles, `y` holds `n`; each non-null output holds `k`.
#[no_mangle]
pub unsafe extern "C" fn pw_ols(
    x: *const f64,
    n: usize,
    k: usize,
    y: *const f64,
    beta: *mut f64,
    stderr: *mut f64,
    p: *mut f64,
) -> PwStatus {
    guard(|| {
        if x.is_null() || y.is_null() {
            return Err(Failure::new(
                PwStatus::PwNullArgument,
                "design or response is null",
            ));
        }
        check_out(beta)?;
        let flat = std::slice::from_raw_parts(x, n * k);
        let rows: Vec<Vec<f64>> = flat.chunks(k.max(1)).map(<[f64]>::to_vec).collect();
        let fit = ols(&rows, std::slice::from_raw_parts(y, n))?;
        ptr::copy_nonoverlapping(fit.beta.as_ptr(), beta, k);
        if !stderr.is_null() {
            ptr::copy_nonoverlapping(fit.stderr.as_ptr(), stderr, k);
        }
        if !p.is_null() {
            ptr::copy_nonoverlapping(fit.p.as_ptr(), p, k);
        }
        Ok(())
    })
}

/// Outcome of [`pw_run_pipeline`].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PwRunSummary {
    pub requests: u64,
    pub units_run: usize,
    pub units_skipped: usize,
    pub flagged: usize,
}

/// Runs the full pipeline from TOML configuration text (same keys as the
/// CLI config file). An empty string selects all defaults.
///
/// # Safety
/// `config_toml` is a NUL-terminated string; `out` is null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn pw_run_pipeline(
    config_toml: *const c_char,
    out: *mut PwRunSummary,
) -> PwStatus {
    guard(|| {
        let config = RunConfig::from_toml(read_str(config_toml, "config_toml")?)?;
        let o = run_pipeline(&config)?;
        if !out.is_null() {
            *out = PwRunSummary {
                requests: o.requests,
                units_run: o.units_run,
                units_skipped: o.units_skipped,
                flagged: o.flagged,
            };
        }
        Ok(())
    })
}

/// Verdict counts from [`pw_analyze_run`].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PwVerdictCounts {
    pub matched: usize,
    pub mismatched: usize,
    pub not_significant: usize,
    pub no_benchmark: usize,
}

/// Re-runs analysis on a run directory, rewriting its coefficient and sign
/// report files.
///
/// # Safety
/// `dir` is a NUL-terminated string; `out` is null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn pw_analyze_run(
    dir: *const c_char,
    alpha: f64,
    out: *mut PwVerdictCounts,
) -> PwStatus {
    guard(|| {
        let dir = read_str(dir, "dir")?;
        let a = analyze_run(Path::new(dir), alpha)?;
        if !out.is_null() {
            *out = PwVerdictCounts {
                matched: a.report.count(Verdict::Match),
                mismatched: a.report.count(Verdict::Mismatch),
                not_significant: a.report.count(Verdict::NotSignificant),
                no_benchmark: a.report.count(Verdict::NoBenchmark),
            };
        }
        Ok(())
    })
}
