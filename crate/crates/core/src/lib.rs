//! Big Five persona workbench: persona grid, prompt rendering, model
//! gateway, survey and investment-simulation runners, and trait-behavior
//! regression.

pub mod error;
pub mod gateway;
pub mod invest;
pub mod persona;
pub mod prompting;
pub mod stats;
pub mod survey;
pub mod workbench;

pub use error::*;
pub use persona::{generate_grid, PersonaId, PersonaProfile, Trait, TraitLevel, GRID_SIZE};
