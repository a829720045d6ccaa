//! Statechart networks, their timed-automata encoding, and checks that the
//! two agree.

pub mod action;
pub mod eval;
pub mod export;
pub mod expr;
pub mod fixtures;
pub mod fuzz;
pub mod model;
pub mod equivalence;
pub mod parser;
pub mod sc;
pub mod ta;
pub mod transform;
pub mod verify;

pub use action::{ActionSeq, Update};
pub use eval::{CycleEnv, EvalError};
pub use expr::{BinOp, Expr, Style, Trigger, TriggerKind, Value};
pub use model::{
    ExecutionTrace, Label, StateDef, StatechartDef, StatechartNetwork, SystemStatus, TransitionDef, Valuation, VarDecl,
    VarKind,
};
pub use parser::{check_source, parse_network, DiagCode, Diagnostic};
pub use sc::{EventEnv, ScEngine, ScError, Schedule, TimerState};
pub use ta::{Automaton, Edge, Location, Role, TaEngine, TaError, TaNetwork, TaStatus, TaTrace};
pub use transform::{transform_all, transform_with, TransformError, TransformMap, TransformOptions};
pub use equivalence::{check_model_equivalence, EquivalenceReport, Verdict};
pub use verify::{check_invariant, parse_properties, Counterexample, SafetyProperty, VerifyOptions};
pub use export::{read_uppaal_xml, write_queries, write_uppaal_xml, ExportOptions};
