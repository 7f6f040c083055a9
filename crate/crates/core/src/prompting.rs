//! Prompt templates for the behavioral survey, the investment-simulation step,
//! and the BFI questionnaire.
//!
//! Template bodies and the inventory item list live under `data/` and are
//! compiled in. Placeholders use `{{name}}` so the JSON braces in the output
//! format lines never collide with them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::PromptError;
use crate::invest::CompanySpec;
use crate::persona::{PersonaProfile, Trait, TraitLevel};

pub const SURVEY_TEMPLATE: &str = include_str!("../data/survey_prompt.txt");
pub const SIM_TEMPLATE: &str = include_str!("../data/sim_prompt.txt");
pub const SIM_SELECTION: &str = include_str!("../data/sim_selection.txt");
pub const SIM_FORCED: &str = include_str!("../data/sim_forced.txt");
pub const BFI_TEMPLATE: &str = include_str!("../data/bfi_prompt.txt");
pub const BFI_ITEMS_CSV: &str = include_str!("../data/bfi44.csv");

/// Per-company research cap.
pub const MAX_RESEARCH: u8 = 5;

/// Number of survey questions.
pub const SURVEY_QUESTIONS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TemplateKind {
    Survey,
    SimulationStep,
    ForcedInvest,
    Bfi,
}

/// A template body with `{{name}}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub kind: TemplateKind,
    pub body: String,
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{\{([a-z_]+)\}\}").unwrap())
}

impl PromptTemplate {
    pub fn new(kind: TemplateKind, body: impl Into<String>) -> Self {
        Self {
            kind,
            body: body.into(),
        }
    }

    pub fn builtin(kind: TemplateKind) -> Self {
        let body = match kind {
            TemplateKind::Survey => SURVEY_TEMPLATE,
            TemplateKind::SimulationStep | TemplateKind::ForcedInvest => SIM_TEMPLATE,
            TemplateKind::Bfi => BFI_TEMPLATE,
        };
        Self::new(kind, body)
    }

    pub fn placeholders(&self) -> Vec<String> {
        let mut names: Vec<String> = placeholder_re()
            .captures_iter(&self.body)
            .map(|c| c[1].to_string())
            .collect();
        names.sort();
        names.dedup();
        names
    }

    /// Substitutes every binding. Bindings the template does not use and
    /// placeholders left unbound are both errors.
    pub fn render(&self, bindings: &[(&str, &str)]) -> Result<String, PromptError> {
        let known = self.placeholders();
        let mut values = BTreeMap::new();
        for (name, value) in bindings {
            if !known.iter().any(|k| k == name) {
                return Err(PromptError::UnknownPlaceholder(name.to_string()));
            }
            values.insert(*name, *value);
        }
        if let Some(missing) = known.iter().find(|k| !values.contains_key(k.as_str())) {
            return Err(PromptError::UnboundPlaceholder(missing.clone()));
        }
        // Single pass so bound values are never re-scanned for placeholders.
        let out = placeholder_re().replace_all(&self.body, |caps: &regex::Captures<'_>| {
            values[&caps[1]].to_string()
        });
        Ok(trim_trailing_newline(&out).to_string())
    }
}

fn trim_trailing_newline(s: &str) -> &str {
    s.strip_suffix('\n').unwrap_or(s)
}

/// The five `Trait: Level` lines shared by every prompt header.
pub fn trait_lines(profile: &PersonaProfile) -> String {
    Trait::ALL
        .iter()
        .map(|t| format!("{}: {}", t.prompt_label(), profile.level(*t)))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Recovers the persona from the header lines of any rendered prompt.
pub fn parse_persona_header(text: &str) -> Option<PersonaProfile> {
    let mut levels: [Option<TraitLevel>; 5] = [None; 5];
    for line in text.lines() {
        let Some((label, value)) = line.split_once(':') else {
            continue;
        };
        if let Some(t) = Trait::ALL.iter().find(|t| t.prompt_label() == label.trim()) {
            if levels[t.index()].is_none() {
                levels[t.index()] = Some(value.trim().parse().ok()?);
            }
        }
    }
    let mut out = [TraitLevel::Low; 5];
    for (slot, level) in out.iter_mut().zip(levels) {
        *slot = level?;
    }
    Some(PersonaProfile::new(out))
}

pub fn render_survey_prompt(profile: &PersonaProfile) -> String {
    PromptTemplate::builtin(TemplateKind::Survey)
        .render(&[("trait_lines", &trait_lines(profile))])
        .expect("builtin survey template binds cleanly")
}

/// Research counts per catalog company, in catalog order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResearchTally {
    counts: Vec<(String, u8)>,
}

impl ResearchTally {
    pub fn new(catalog: &[CompanySpec]) -> Self {
        Self {
            counts: catalog.iter().map(|c| (c.name.clone(), 0)).collect(),
        }
    }

    pub fn from_counts(counts: Vec<(String, u8)>) -> Self {
        Self { counts }
    }

    pub fn get(&self, company: &str) -> Option<u8> {
        self.counts
            .iter()
            .find(|(name, _)| name == company)
            .map(|(_, n)| *n)
    }

    pub fn set(&mut self, company: &str, count: u8) -> bool {
        match self.counts.iter_mut().find(|(name, _)| name == company) {
            Some(slot) => {
                slot.1 = count;
                true
            }
            None => false,
        }
    }

    pub fn entries(&self) -> &[(String, u8)] {
        &self.counts
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().map(|(_, n)| u32::from(*n)).sum()
    }

    pub fn exhausted(&self) -> bool {
        self.counts.iter().all(|(_, n)| *n >= MAX_RESEARCH)
    }

    pub fn covers(&self, catalog: &[CompanySpec]) -> bool {
        self.counts.len() == catalog.len()
            && catalog
                .iter()
                .zip(&self.counts)
                .all(|(c, (name, n))| c.name == *name && *n <= MAX_RESEARCH)
    }

    /// Tally block lines. The final line has no space after the colon, as in
    /// the original task prompt.
    pub fn lines(&self) -> String {
        let last = self.counts.len().saturating_sub(1);
        self.counts
            .iter()
            .enumerate()
            .map(|(i, (name, n))| {
                let sep = if i == last { ":" } else { ": " };
                format!("{name}{sep}{n} out of {MAX_RESEARCH} times")
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

pub fn company_names_list(catalog: &[CompanySpec]) -> String {
    let quoted: Vec<String> = catalog.iter().map(|c| format!("\"{}\"", c.name)).collect();
    format!("[{}]", quoted.join(", "))
}

pub fn render_sim_prompt(
    profile: &PersonaProfile,
    catalog: &[CompanySpec],
    tally: &ResearchTally,
    forced: bool,
) -> Result<String, PromptError> {
    if !tally.covers(catalog) {
        let missing = catalog
            .iter()
            .find(|c| tally.get(&c.name).is_none())
            .map(|c| c.name.clone())
            .unwrap_or_default();
        return Err(PromptError::TallyMismatch(missing));
    }
    let company_lines: Vec<String> = catalog.iter().map(CompanySpec::listing_line).collect();
    let kind = if forced {
        TemplateKind::ForcedInvest
    } else {
        TemplateKind::SimulationStep
    };
    let selection = if forced { SIM_FORCED } else { SIM_SELECTION };
    PromptTemplate::builtin(kind).render(&[
        ("trait_lines", &trait_lines(profile)),
        ("company_lines", &company_lines.join("\n")),
        ("tally_lines", &tally.lines()),
        ("selection", trim_trailing_newline(selection)),
        ("company_names", &company_names_list(catalog)),
    ])
}

/// One inventory statement with its scoring key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BfiItem {
    pub item: u32,
    pub text: String,
    pub trait_: Trait,
    pub reversed: bool,
}

#[derive(Debug, Deserialize)]
struct BfiRow {
    item: u32,
    text: String,
    #[serde(rename = "trait")]
    trait_symbol: String,
    reversed: bool,
}

/// A scored questionnaire; the builtin one is the 44-item BFI.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BfiInventory {
    pub items: Vec<BfiItem>,
}

impl BfiInventory {
    pub const BUILTIN_LEN: usize = 44;

    pub fn builtin() -> &'static BfiInventory {
        static INV: OnceLock<BfiInventory> = OnceLock::new();
        INV.get_or_init(|| {
            BfiInventory::from_csv(BFI_ITEMS_CSV.as_bytes()).expect("embedded BFI item list parses")
        })
    }

    pub fn from_csv<R: std::io::Read>(reader: R) -> Result<Self, String> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut items = Vec::new();
        for row in rdr.deserialize::<BfiRow>() {
            let row = row.map_err(|e| e.to_string())?;
            let trait_ = Trait::from_symbol(&row.trait_symbol)
                .ok_or_else(|| format!("unknown trait {:?}", row.trait_symbol))?;
            items.push(BfiItem {
                item: row.item,
                text: row.text,
                trait_,
                reversed: row.reversed,
            });
        }
        if items.is_empty() {
            return Err("inventory has no items".into());
        }
        for t in Trait::ALL {
            if !items.iter().any(|i| i.trait_ == t) {
                return Err(format!("inventory has no items for {}", t.symbol()));
            }
        }
        Ok(Self { items })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let file = std::fs::File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_csv(file)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items_for(&self, t: Trait) -> impl Iterator<Item = &BfiItem> {
        self.items.iter().filter(move |i| i.trait_ == t)
    }
}

pub fn render_bfi_prompt(profile: &PersonaProfile) -> String {
    render_bfi_prompt_with(profile, BfiInventory::builtin())
}

pub fn render_bfi_prompt_with(profile: &PersonaProfile, inventory: &BfiInventory) -> String {
    let mut items = String::new();
    for (i, item) in inventory.items.iter().enumerate() {
        if i > 0 {
            items.push('\n');
        }
        let _ = write!(items, "{}. {}", i + 1, item.text);
    }
    PromptTemplate::builtin(TemplateKind::Bfi)
        .render(&[("trait_lines", &trait_lines(profile)), ("items", &items)])
        .expect("builtin BFI template binds cleanly")
}

/// Correction note prepended to the original prompt on a re-ask.
pub fn repair_prompt(original: &str, problem: &str) -> String {
    let problem = problem.replace('\n', " ");
    format!(
        "Your previous response was invalid: {problem}. Respond again following the output format exactly.\n\n{original}"
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invest::default_catalog;
    use crate::persona::generate_grid;

    fn mixed() -> PersonaProfile {
        PersonaProfile::new([
            TraitLevel::Low,
            TraitLevel::Low,
            TraitLevel::Medium,
            TraitLevel::High,
            TraitLevel::High,
        ])
    }

    #[test]
    fn survey_prompt_carries_header_and_nine_questions() {
        let text = render_survey_prompt(&mixed());
        assert!(
            text.starts_with("You are to take on the personality of the following individual\n")
        );
        assert!(text.contains("\nOpenness to Experience: Low\n"));
        assert!(text.contains("\nNeuroticism: High\n"));
        assert!(text.ends_with("{\"answers\": [an array of integers]}"));
        let block = text.split("The questions\n").nth(1).unwrap();
        let questions: Vec<&str> = block.split("\n\n").next().unwrap().lines().collect();
        assert_eq!(questions.len(), SURVEY_QUESTIONS);
        assert!(questions[0].starts_with("If you needed more information"));
        assert!(questions[8].contains("wind turbines"));
        assert_eq!(text, render_survey_prompt(&mixed()));
    }

    #[test]
    fn sim_prompt_preserves_original_quirks() {
        let catalog = default_catalog();
        let mut tally = ResearchTally::new(&catalog);
        for (name, n) in [
            ("Platinum", 1),
            ("Emerald", 2),
            ("Ruby", 3),
            ("Sapphire", 5),
        ] {
            tally.set(name, n);
        }
        let text = render_sim_prompt(&mixed(), &catalog, &tally, false).unwrap();
        assert!(text.contains("\nDiamond: 0 out of 5 times\n"));
        assert!(text.contains("\nSapphire:5 out of 5 times\n"));
        assert!(text.contains("\n- Emerald, return: 89%, risk: 0.5\n"));
        assert!(text.contains("\n- Ruby (An eco-conscious company), return 25%, risk: 0.3\n"));
        assert!(text.contains(
            "\n- Sapphire (A cutting edge company exploring new technology), return: 80%, risk: 0.6\n"
        ));
        assert!(text.contains(r#"["research independantly", "talk to expert", "invest"]"#));
        assert!(text.contains("the individua should research"));
        assert!(text.contains(
            r#"Company should be one of ["Diamond", "Platinum", "Emerald", "Ruby", "Sapphire"]"#
        ));
        assert!(text.contains("$1000"));
    }

    #[test]
    fn forced_prompt_only_swaps_the_selection_paragraph() {
        let catalog = default_catalog();
        let tally = ResearchTally::new(&catalog);
        let normal = render_sim_prompt(&mixed(), &catalog, &tally, false).unwrap();
        let forced = render_sim_prompt(&mixed(), &catalog, &tally, true).unwrap();
        assert!(forced.contains(
            "All research has been exhausted. You must now invest. Set method to \"invest\" and choose a company."
        ));
        assert!(!forced.contains("Select which company"));
        assert_eq!(
            normal.replace(trim_trailing_newline(SIM_SELECTION), "X"),
            forced.replace(trim_trailing_newline(SIM_FORCED), "X")
        );
    }

    #[test]
    fn sim_prompt_rejects_foreign_tally() {
        let catalog = default_catalog();
        let tally = ResearchTally::from_counts(vec![("Gold".into(), 0)]);
        assert!(matches!(
            render_sim_prompt(&mixed(), &catalog, &tally, false),
            Err(PromptError::TallyMismatch(_))
        ));
    }

    #[test]
    fn five_company_and_tally_lines() {
        let catalog = default_catalog();
        let tally = ResearchTally::new(&catalog);
        let text = render_sim_prompt(&mixed(), &catalog, &tally, false).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("- ")).count(), 5);
        assert_eq!(
            text.lines()
                .filter(|l| l.ends_with("out of 5 times"))
                .count(),
            5
        );
    }

    #[test]
    fn bfi_prompt_shares_survey_header() {
        let p = mixed();
        let bfi = render_bfi_prompt(&p);
        let survey = render_survey_prompt(&p);
        let header = |s: &str| s.lines().take(6).map(str::to_string).collect::<Vec<_>>();
        assert_eq!(header(&bfi), header(&survey));
        assert_eq!(BfiInventory::builtin().len(), BfiInventory::BUILTIN_LEN);
        let numbered = bfi
            .lines()
            .filter(|l| {
                l.split_once(". ")
                    .is_some_and(|(n, _)| n.parse::<u32>().is_ok())
            })
            .count();
        assert_eq!(numbered, 44);
        assert_eq!(bfi, render_bfi_prompt(&p));
    }

    #[test]
    fn header_round_trips_over_the_grid() {
        let catalog = default_catalog();
        let tally = ResearchTally::new(&catalog);
        for p in generate_grid() {
            assert_eq!(parse_persona_header(&render_survey_prompt(&p)), Some(p));
            assert_eq!(parse_persona_header(&render_bfi_prompt(&p)), Some(p));
            let sim = render_sim_prompt(&p, &catalog, &tally, false).unwrap();
            assert_eq!(parse_persona_header(&sim), Some(p));
            for text in [render_survey_prompt(&p), sim] {
                assert!(!placeholder_re().is_match(&text));
            }
        }
    }

    #[test]
    fn template_binding_errors() {
        let t = PromptTemplate::new(TemplateKind::Survey, "a {{x}} b {{y}}");
        assert_eq!(
            t.render(&[("x", "1")]),
            Err(PromptError::UnboundPlaceholder("y".into()))
        );
        assert_eq!(
            t.render(&[("x", "1"), ("y", "2"), ("z", "3")]),
            Err(PromptError::UnknownPlaceholder("z".into()))
        );
        assert_eq!(
            t.render(&[("x", "{{y}}"), ("y", "2")]).unwrap(),
            "a {{y}} b 2"
        );
    }

    #[test]
    fn repair_prompt_keeps_original() {
        let r = repair_prompt("ORIGINAL", "expected 9 answers,\ngot 8");
        assert!(r.ends_with("\n\nORIGINAL"));
        assert_eq!(r.lines().next().unwrap().matches("got 8").count(), 1);
    }
}
