//! Learnability measures on finite set systems and the online discrepancy game.

use thiserror::Error;

use crate::adversary::GameError;
use crate::samplers::SamplerError;

pub mod discrepancy;
pub mod dims;

pub use dims::{
    littlestone_dimension, littlestone_tree, shatters, vc_dimension, DimensionReport, LdimSolver, MistakeNode,
    MistakeTree,
};
pub use discrepancy::{
    connection_check, disc, disc_coloring, estimate_sequential_rademacher, play_discrepancy_game, ColoringState,
    ItemStrategy, PainterStrategy, RademacherEstimate,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("too large for exhaustive evaluation: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Game(#[from] GameError),
}
