//! Big Five trait levels and the exhaustive persona grid.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ParseLevelError;

/// One of the three admissible levels for a Big Five trait.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TraitLevel {
    Low,
    Medium,
    High,
}

impl TraitLevel {
    pub const ALL: [TraitLevel; 3] = [TraitLevel::Low, TraitLevel::Medium, TraitLevel::High];

    /// Centered numeric coding used by the regression design matrix.
    pub fn encode(self) -> i8 {
        match self {
            TraitLevel::Low => -1,
            TraitLevel::Medium => 0,
            TraitLevel::High => 1,
        }
    }

    pub fn decode(code: i8) -> Option<Self> {
        match code {
            -1 => Some(TraitLevel::Low),
            0 => Some(TraitLevel::Medium),
            1 => Some(TraitLevel::High),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TraitLevel::Low => "Low",
            TraitLevel::Medium => "Medium",
            TraitLevel::High => "High",
        }
    }

    pub fn initial(self) -> char {
        match self {
            TraitLevel::Low => 'L',
            TraitLevel::Medium => 'M',
            TraitLevel::High => 'H',
        }
    }
}

/// Free-function form of [`TraitLevel::encode`].
pub fn encode_level(level: TraitLevel) -> i8 {
    level.encode()
}

impl fmt::Display for TraitLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TraitLevel {
    type Err = ParseLevelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "Low" | "L" => Ok(TraitLevel::Low),
            "Medium" | "M" => Ok(TraitLevel::Medium),
            "High" | "H" => Ok(TraitLevel::High),
            other => Err(ParseLevelError(other.to_string())),
        }
    }
}

/// The five traits in the fixed O, C, E, A, N order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Trait {
    Openness,
    Conscientiousness,
    Extraversion,
    Agreeableness,
    Neuroticism,
}

impl Trait {
    pub const ALL: [Trait; 5] = [
        Trait::Openness,
        Trait::Conscientiousness,
        Trait::Extraversion,
        Trait::Agreeableness,
        Trait::Neuroticism,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Trait::Openness => "O",
            Trait::Conscientiousness => "C",
            Trait::Extraversion => "E",
            Trait::Agreeableness => "A",
            Trait::Neuroticism => "N",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        Trait::ALL.into_iter().find(|t| t.symbol() == s)
    }

    /// Label used in the persona header of every prompt.
    pub fn prompt_label(self) -> &'static str {
        match self {
            Trait::Openness => "Openness to Experience",
            Trait::Conscientiousness => "Conscientiousness",
            Trait::Extraversion => "Extraversion",
            Trait::Agreeableness => "Agreeableness",
            Trait::Neuroticism => "Neuroticism",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Trait::Openness => "Openness",
            other => other.prompt_label(),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// A persona: one level per trait.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PersonaProfile {
    pub openness: TraitLevel,
    pub conscientiousness: TraitLevel,
    pub extraversion: TraitLevel,
    pub agreeableness: TraitLevel,
    pub neuroticism: TraitLevel,
}

impl PersonaProfile {
    pub fn new(levels: [TraitLevel; 5]) -> Self {
        let [openness, conscientiousness, extraversion, agreeableness, neuroticism] = levels;
        Self {
            openness,
            conscientiousness,
            extraversion,
            agreeableness,
            neuroticism,
        }
    }

    pub fn uniform(level: TraitLevel) -> Self {
        Self::new([level; 5])
    }

    pub fn levels(&self) -> [TraitLevel; 5] {
        [
            self.openness,
            self.conscientiousness,
            self.extraversion,
            self.agreeableness,
            self.neuroticism,
        ]
    }

    pub fn level(&self, t: Trait) -> TraitLevel {
        self.levels()[t.index()]
    }

    pub fn with_level(mut self, t: Trait, level: TraitLevel) -> Self {
        match t {
            Trait::Openness => self.openness = level,
            Trait::Conscientiousness => self.conscientiousness = level,
            Trait::Extraversion => self.extraversion = level,
            Trait::Agreeableness => self.agreeableness = level,
            Trait::Neuroticism => self.neuroticism = level,
        }
        self
    }

    pub fn encoded(&self) -> [i8; 5] {
        self.levels().map(TraitLevel::encode)
    }

    /// Stable identifier such as `L-M-H-H-L` (O, C, E, A, N order).
    pub fn persona_id(&self) -> PersonaId {
        let parts: Vec<String> = self
            .levels()
            .iter()
            .map(|l| l.initial().to_string())
            .collect();
        PersonaId(parts.join("-"))
    }

    /// Position of this profile within [`generate_grid`].
    pub fn grid_index(&self) -> usize {
        self.levels()
            .iter()
            .fold(0, |acc, l| acc * 3 + (l.encode() + 1) as usize)
    }
}

/// Textual persona identifier, injective over the five levels.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PersonaId(pub String);

impl PersonaId {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn profile(&self) -> Result<PersonaProfile, ParseLevelError> {
        let parts: Vec<&str> = self.0.split('-').collect();
        if parts.len() != 5 {
            return Err(ParseLevelError(self.0.clone()));
        }
        let mut levels = [TraitLevel::Low; 5];
        for (slot, part) in levels.iter_mut().zip(parts) {
            *slot = part.parse()?;
        }
        Ok(PersonaProfile::new(levels))
    }
}

impl fmt::Display for PersonaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub const GRID_SIZE: usize = 243;

/// All 3^5 profiles in lexicographic (O, C, E, A, N) order, Low < Medium < High.
pub fn generate_grid() -> Vec<PersonaProfile> {
    let mut grid = Vec::with_capacity(GRID_SIZE);
    for o in TraitLevel::ALL {
        for c in TraitLevel::ALL {
            for e in TraitLevel::ALL {
                for a in TraitLevel::ALL {
                    for n in TraitLevel::ALL {
                        grid.push(PersonaProfile::new([o, c, e, a, n]));
                    }
                }
            }
        }
    }
    grid
}
