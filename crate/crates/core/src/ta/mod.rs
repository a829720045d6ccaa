//! Networks of timed automata and their discrete-time semantics.

pub mod model;
pub mod semantics;

pub use model::{Automaton, Edge, Location, Role, TaNetwork};
pub use semantics::{
    ta_delay, ta_initial_status, ta_run, ta_step, validate_lockstep, validate_ta, EntryKind, StepLabel, TaEngine, TaEntry,
    TaError, TaStatus, TaTrace,
};
pub(crate) use semantics::TaRaw;
