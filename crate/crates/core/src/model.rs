//! Statechart network model and the status/trace types shared by both
//! semantics.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::action::ActionSeq;
use crate::expr::{Expr, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum VarKind {
    /// `bounds` of `None` means an unbounded (simulation-only) integer.
    Int { bounds: Option<(i64, i64)> },
    Bool,
    Event,
    Channel,
    Clock,
}

impl VarKind {
    pub fn bounded(lo: i64, hi: i64) -> Self {
        VarKind::Int { bounds: Some((lo, hi)) }
    }

    /// Kinds that live in a `Valuation`.
    pub fn is_data(self) -> bool {
        matches!(self, VarKind::Int { .. } | VarKind::Bool)
    }

    pub fn admits(self, v: Value) -> bool {
        match (self, v) {
            (VarKind::Int { bounds: None }, Value::Int(_)) => true,
            (VarKind::Int { bounds: Some((lo, hi)) }, Value::Int(x)) => lo <= x && x <= hi,
            (VarKind::Bool, Value::Bool(_)) => true,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VarDecl {
    pub name: String,
    pub kind: VarKind,
    /// Present exactly for data kinds.
    pub initial: Option<Value>,
}

impl VarDecl {
    pub fn int(name: impl Into<String>, lo: i64, hi: i64, init: i64) -> Self {
        VarDecl { name: name.into(), kind: VarKind::bounded(lo, hi), initial: Some(Value::Int(init)) }
    }

    pub fn boolean(name: impl Into<String>, init: bool) -> Self {
        VarDecl { name: name.into(), kind: VarKind::Bool, initial: Some(Value::Bool(init)) }
    }

    pub fn event(name: impl Into<String>) -> Self {
        VarDecl { name: name.into(), kind: VarKind::Event, initial: None }
    }

    pub fn channel(name: impl Into<String>) -> Self {
        VarDecl { name: name.into(), kind: VarKind::Channel, initial: None }
    }

    pub fn clock(name: impl Into<String>) -> Self {
        VarDecl { name: name.into(), kind: VarKind::Clock, initial: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateDef {
    pub name: String,
    pub entry: ActionSeq,
    pub exit: ActionSeq,
}

impl StateDef {
    pub fn plain(name: impl Into<String>) -> Self {
        StateDef { name: name.into(), entry: ActionSeq::default(), exit: ActionSeq::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TransitionDef {
    pub id: String,
    pub source: String,
    pub target: String,
    pub guard: Expr,
    pub action: ActionSeq,
    /// Smaller is higher priority.
    pub priority: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StatechartDef {
    pub name: String,
    pub priority: u32,
    pub states: Vec<StateDef>,
    pub initial: String,
    pub transitions: Vec<TransitionDef>,
}

impl StatechartDef {
    pub fn state(&self, name: &str) -> Option<&StateDef> {
        self.states.iter().find(|s| s.name == name)
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s.name == name)
    }

    pub fn transition(&self, id: &str) -> Option<&TransitionDef> {
        self.transitions.iter().find(|t| t.id == id)
    }

    /// Outgoing transitions of `state`, highest priority first.
    pub fn outgoing(&self, state: &str) -> Vec<&TransitionDef> {
        let mut out: Vec<&TransitionDef> = self.transitions.iter().filter(|t| t.source == state).collect();
        out.sort_by_key(|t| t.priority);
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StatechartNetwork {
    pub variables: Vec<VarDecl>,
    /// Ordered by chart priority, ascending.
    pub charts: Vec<StatechartDef>,
}

impl StatechartNetwork {
    pub fn var(&self, name: &str) -> Option<&VarDecl> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn chart(&self, name: &str) -> Option<&StatechartDef> {
        self.charts.iter().find(|c| c.name == name)
    }

    pub fn events(&self) -> Vec<&str> {
        self.variables.iter().filter(|v| v.kind == VarKind::Event).map(|v| v.name.as_str()).collect()
    }

    pub fn data_vars(&self) -> impl Iterator<Item = &VarDecl> {
        self.variables.iter().filter(|v| v.kind.is_data())
    }

    pub fn initial_valuation(&self) -> Valuation {
        let mut val = Valuation::default();
        for v in self.data_vars() {
            val.set(&v.name, v.initial.unwrap_or(Value::Int(0)));
        }
        val
    }
}

/// Current values of the data variables (and nothing else).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Valuation(pub BTreeMap<String, Value>);

impl Valuation {
    pub fn get(&self, name: &str) -> Option<Value> {
        self.0.get(name).copied()
    }

    pub fn set(&mut self, name: &str, v: Value) {
        self.0.insert(name.to_string(), v);
    }

    pub fn with(mut self, name: &str, v: Value) -> Self {
        self.set(name, v);
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.0.iter()
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, v) in &self.0 {
            if !first {
                f.write_str(",")?;
            }
            first = false;
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SystemStatus {
    pub states: Vec<String>,
    pub valuation: Valuation,
    /// Lockstep index α in `1..=n`.
    pub exec_index: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Fired(String),
    Stutter,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Fired(t) => f.write_str(t),
            Label::Stutter => f.write_str("STUTTER"),
        }
    }
}

/// A run of the statechart semantics, one status per micro-step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub statuses: Vec<SystemStatus>,
    pub labels: Vec<Label>,
    /// Number of charts, i.e. micro-steps per macro-cycle.
    pub width: usize,
}

impl ExecutionTrace {
    /// Line format `cycle.micro | (state,...) | var=val,... | label`.
    /// The initial status is `0.0` with label `INIT`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, st) in self.statuses.iter().enumerate() {
            let (cycle, micro) = position(i, self.width);
            let label = if i == 0 { "INIT".to_string() } else { self.labels[i - 1].to_string() };
            out.push_str(&format!(
                "{cycle}.{micro} | ({}) | {} | {label}\n",
                st.states.join(","),
                st.valuation
            ));
        }
        out
    }

    pub fn last(&self) -> &SystemStatus {
        self.statuses.last().expect("trace is never empty")
    }
}

/// Maps a status index to `(cycle, micro)`. Index 0 is the initial status;
/// index `k*width + m` (m in 1..=width) is micro-step m of cycle k.
pub fn position(index: usize, width: usize) -> (usize, usize) {
    if index == 0 || width == 0 {
        return (0, 0);
    }
    let i = index - 1;
    (i / width, i % width + 1)
}
