use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::WorkbenchError;
use crate::gateway::{BackendKind, HttpChatConfig, RequestParams};
use crate::persona::GRID_SIZE;
use crate::stats::DEFAULT_ALPHA;

pub const CONFIG_SNAPSHOT: &str = "config.toml";
pub const ENV_PREFIX: &str = "PERSONA_WB_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Survey,
    Bfi,
    Simulate,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Survey, Phase::Bfi, Phase::Simulate];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Survey => "survey",
            Phase::Bfi => "bfi",
            Phase::Simulate => "simulate",
        }
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Phase::ALL
            .into_iter()
            .find(|p| p.as_str() == s.trim())
            .ok_or_else(|| format!("unknown phase {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendChoice {
    Mock,
    Http,
}

impl FromStr for BackendChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "mock" => Ok(BackendChoice::Mock),
            "http" => Ok(BackendChoice::Http),
            other => Err(format!("unknown backend {other:?} (expected mock or http)")),
        }
    }
}

impl fmt::Display for BackendChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendChoice::Mock => "mock",
            BackendChoice::Http => "http",
        })
    }
}

/// Everything a run depends on. Serialized verbatim into the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub backend: BackendChoice,
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub seed: u64,
    pub concurrency: usize,
    pub repair_limit: u32,
    pub alpha: f64,
    pub out: PathBuf,
    pub phases: Vec<Phase>,
    pub catalog: Option<PathBuf>,
    /// Hard cap on backend requests per invocation.
    pub max_requests: Option<u64>,
    pub replicates: u32,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub timeout_secs: u64,
    pub max_in_flight: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let http = HttpChatConfig::default();
        Self {
            backend: BackendChoice::Mock,
            endpoint: http.endpoint,
            model: http.model,
            api_key_env: http.api_key_env,
            seed: 7,
            concurrency: 8,
            repair_limit: 3,
            alpha: DEFAULT_ALPHA,
            out: PathBuf::from("runs/latest"),
            phases: Phase::ALL.to_vec(),
            catalog: None,
            max_requests: Some(GRID_SIZE as u64 * 30),
            replicates: 1,
            temperature: RequestParams::default().temperature,
            max_output_tokens: RequestParams::default().max_output_tokens,
            max_retries: http.max_retries,
            initial_backoff_ms: http.initial_backoff.as_millis() as u64,
            timeout_secs: http.timeout.as_secs(),
            max_in_flight: http.max_in_flight,
        }
    }
}

/// Values supplied on the command line or through the environment. `None`
/// leaves the lower-precedence value in place.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub backend: Option<BackendChoice>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key_env: Option<String>,
    pub seed: Option<u64>,
    pub concurrency: Option<usize>,
    pub repair_limit: Option<u32>,
    pub alpha: Option<f64>,
    pub out: Option<PathBuf>,
    pub phases: Option<Vec<Phase>>,
    pub catalog: Option<PathBuf>,
    pub max_requests: Option<u64>,
    pub replicates: Option<u32>,
}

fn parse_env<T: FromStr>(key: &str, value: String) -> Result<T, WorkbenchError>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| WorkbenchError::Config(format!("{ENV_PREFIX}{key}={value:?}: {e}")))
}

impl ConfigOverrides {
    /// Reads `PERSONA_WB_*` variables through `lookup`.
    pub fn from_env(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, WorkbenchError> {
        let get = |key: &str| lookup(&format!("{ENV_PREFIX}{key}")).filter(|v| !v.is_empty());
        let mut o = ConfigOverrides::default();
        if let Some(v) = get("BACKEND") {
            o.backend = Some(parse_env("BACKEND", v)?);
        }
        o.endpoint = get("ENDPOINT");
        o.model = get("MODEL");
        o.api_key_env = get("API_KEY_ENV");
        if let Some(v) = get("SEED") {
            o.seed = Some(parse_env("SEED", v)?);
        }
        if let Some(v) = get("CONCURRENCY") {
            o.concurrency = Some(parse_env("CONCURRENCY", v)?);
        }
        if let Some(v) = get("REPAIR_LIMIT") {
            o.repair_limit = Some(parse_env("REPAIR_LIMIT", v)?);
        }
        if let Some(v) = get("ALPHA") {
            o.alpha = Some(parse_env("ALPHA", v)?);
        }
        o.out = get("OUT").map(PathBuf::from);
        if let Some(v) = get("PHASES") {
            let phases = v
                .split(',')
                .map(Phase::from_str)
                .collect::<Result<Vec<_>, _>>()
                .map_err(WorkbenchError::Config)?;
            o.phases = Some(phases);
        }
        o.catalog = get("CATALOG").map(PathBuf::from);
        if let Some(v) = get("MAX_REQUESTS") {
            o.max_requests = Some(parse_env("MAX_REQUESTS", v)?);
        }
        if let Some(v) = get("REPLICATES") {
            o.replicates = Some(parse_env("REPLICATES", v)?);
        }
        Ok(o)
    }

    pub fn apply(&self, c: &mut RunConfig) {
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = &self.$f {
                    c.$f = v.clone();
                }
            )*};
        }
        set!(
            backend,
            endpoint,
            model,
            seed,
            concurrency,
            repair_limit,
            alpha,
            out,
            phases,
            replicates
        );
        if let Some(v) = &self.api_key_env {
            c.api_key_env = Some(v.clone());
        }
        if let Some(v) = &self.catalog {
            c.catalog = Some(v.clone());
        }
        if let Some(v) = self.max_requests {
            c.max_requests = (v > 0).then_some(v);
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, WorkbenchError> {
        toml::from_str(text).map_err(|e| WorkbenchError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, WorkbenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                WorkbenchError::Config(format!("config file {} not found", path.display()))
            }
            _ => WorkbenchError::io(path, e),
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Defaults, then the file, then the environment, then flags.
    pub fn resolve(
        file: Option<&Path>,
        env: &ConfigOverrides,
        flags: &ConfigOverrides,
    ) -> Result<Self, WorkbenchError> {
        let mut c = match file {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        env.apply(&mut c);
        flags.apply(&mut c);
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), WorkbenchError> {
        let fail = |m: &str| Err(WorkbenchError::Config(m.to_string()));
        if self.concurrency == 0 {
            return fail("concurrency must be at least 1");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail("alpha must lie strictly between 0 and 1");
        }
        if self.replicates == 0 {
            return fail("replicates must be at least 1");
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return fail("temperature must be non-negative");
        }
        if self.max_output_tokens == 0 {
            return fail("max_output_tokens must be positive");
        }
        if self.backend == BackendChoice::Http
            && (self.endpoint.is_empty() || self.model.is_empty())
        {
            return fail("the http backend needs an endpoint and a model");
        }
        Ok(())
    }

    pub fn params(&self) -> RequestParams {
        RequestParams {
            temperature: self.temperature,
            max_output_tokens: self.max_output_tokens,
        }
    }

    /// Backend for one replicate. Mock replicates draw from distinct seeds;
    /// replicate 0 uses the configured seed as-is.
    pub fn backend_kind(&self, replicate: u32) -> BackendKind {
        match self.backend {
            BackendChoice::Mock => BackendKind::MockPolicy {
                seed: replicate_seed(self.seed, replicate),
            },
            BackendChoice::Http => BackendKind::HttpChat {
                endpoint: self.endpoint.clone(),
                model: self.model.clone(),
                api_key_env: self.api_key_env.clone(),
            },
        }
    }

    pub fn http_config(&self) -> HttpChatConfig {
        HttpChatConfig {
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
            api_key_env: self.api_key_env.clone(),
            max_retries: self.max_retries,
            initial_backoff: Duration::from_millis(self.initial_backoff_ms),
            timeout: Duration::from_secs(self.timeout_secs),
            max_in_flight: self.max_in_flight,
            ..HttpChatConfig::default()
        }
    }

    /// Fields that change what a backend would answer. Two configs with equal
    /// fingerprints may share a run directory.
    pub fn fingerprint(&self) -> String {
        format!(
            "{}|{}|{}|{}|{}|{:?}|{}|{}|{}",
            self.backend,
            if self.backend == BackendChoice::Http {
                &self.endpoint
            } else {
                ""
            },
            if self.backend == BackendChoice::Http {
                &self.model
            } else {
                ""
            },
            self.seed,
            self.repair_limit,
            self.catalog,
            self.replicates,
            self.temperature,
            self.max_output_tokens,
        )
    }
}

pub fn replicate_seed(seed: u64, replicate: u32) -> u64 {
    seed.wrapping_add(u64::from(replicate).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}
