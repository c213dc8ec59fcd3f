//! First-order optimization: Adam, reduce-on-plateau scheduling and the
//! multi-start driver shared by training and inversion.

mod adam;
pub(crate) mod multistart;
mod plateau;

pub use adam::{AdamConfig, AdamState};
pub use multistart::{
    multistart_minimize, run_restarts, standard_normal_sampler, MultiStartConfig, MultiStartOutcome, Objective,
    RestartTrace,
};
pub use plateau::{PlateauConfig, PlateauScheduler};
