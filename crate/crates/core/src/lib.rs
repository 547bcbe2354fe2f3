//! Gender-aware centrality, glass-ceiling tests and target-ratio influence
//! seeding on interaction graphs.

pub mod centrality;
pub mod cli;
pub mod diffusion;
pub mod embedding_bridge;
pub mod error;
pub mod glass_ceiling;
pub mod graph;
pub mod seeding;

pub use error::{Error, Result};
pub use graph::{Gender, InteractionGraph, InteractionType};
