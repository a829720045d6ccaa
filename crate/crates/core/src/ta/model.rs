use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::action::ActionSeq;
use crate::expr::{Expr, Trigger, Value};
use crate::model::{VarDecl, VarKind};

/// Where an automaton came from.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    /// Image of a statechart; `priority` is the chart's ρ.
    Transformed { chart: String, priority: u32 },
    EventAux { event: String },
    TimerAux { trigger: Trigger, channel: String, clock: String },
}

impl Role {
    pub fn is_transformed(&self) -> bool {
        matches!(self, Role::Transformed { .. })
    }

    pub fn describe(&self) -> String {
        match self {
            Role::Transformed { chart, priority } => format!("transformed {chart} {priority}"),
            Role::EventAux { event } => format!("event {event}"),
            Role::TimerAux { trigger, channel, clock } => {
                format!("timer {} {} {channel} {clock}", trigger.kind.keyword(), trigger.period)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Location {
    pub name: String,
    /// Clock upper bound such as `c1<=10`.
    pub invariant: Option<Expr>,
}

impl Location {
    pub fn plain(name: impl Into<String>) -> Self {
        Location { name: name.into(), invariant: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub id: String,
    pub source: String,
    /// `None` until guards are transformed; evaluates as `true`.
    pub guard: Option<Expr>,
    pub action: ActionSeq,
    pub target: String,
}

impl Edge {
    pub fn clock_resets(&self) -> Vec<&str> {
        self.action.clock_resets()
    }

    pub fn guard_or_true(&self) -> Expr {
        self.guard.clone().unwrap_or(Expr::Bool(true))
    }

    /// `(src, guard, action, resets, dst)`.
    pub fn tuple(&self) -> String {
        let guard = self.guard.as_ref().map_or("NULL".to_string(), |g| g.to_string());
        let resets = self.clock_resets();
        let resets = if resets.is_empty() { "NULL".to_string() } else { format!("{{{}}}", resets.join(", ")) };
        format!("({}, {guard}, {}, {resets}, {})", self.source, self.action.compact(), self.target)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Automaton {
    pub name: String,
    pub role: Role,
    pub locations: Vec<Location>,
    pub initial: String,
    pub edges: Vec<Edge>,
}

impl Automaton {
    pub fn location(&self, name: &str) -> Option<&Location> {
        self.locations.iter().find(|l| l.name == name)
    }

    pub fn edge(&self, id: &str) -> Option<&Edge> {
        self.edges.iter().find(|e| e.id == id)
    }

    pub fn outgoing<'a>(&'a self, loc: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| e.source == loc)
    }
}

/// A network of timed automata together with the index of the last
/// transformation rule applied to it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaNetwork {
    pub variables: Vec<VarDecl>,
    pub automata: Vec<Automaton>,
    pub stage: u8,
    /// Lockstep index variable, once declared.
    pub index_var: Option<String>,
}

impl TaNetwork {
    pub fn var(&self, name: &str) -> Option<&VarDecl> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn automaton(&self, name: &str) -> Option<&Automaton> {
        self.automata.iter().find(|a| a.name == name)
    }

    pub fn transformed(&self) -> impl Iterator<Item = &Automaton> {
        self.automata.iter().filter(|a| a.role.is_transformed())
    }

    pub fn clocks(&self) -> impl Iterator<Item = &VarDecl> {
        self.variables.iter().filter(|v| v.kind == VarKind::Clock)
    }

    pub fn edge_count(&self) -> usize {
        self.automata.iter().map(|a| a.edges.len()).sum()
    }

    /// Canonical text used for golden files.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "stage {}", self.stage);
        for v in &self.variables {
            let ty = match v.kind {
                VarKind::Int { bounds: Some((lo, hi)) } => format!("int[{lo}..{hi}]"),
                VarKind::Int { bounds: None } => "int".into(),
                VarKind::Bool => "bool".into(),
                VarKind::Event => "event".into(),
                VarKind::Channel => "chan".into(),
                VarKind::Clock => "clock".into(),
            };
            match v.initial {
                Some(Value::Int(i)) => _ = writeln!(out, "{ty} {} = {i}", v.name),
                Some(Value::Bool(b)) => _ = writeln!(out, "{ty} {} = {b}", v.name),
                None => _ = writeln!(out, "{ty} {}", v.name),
            }
        }
        if let Some(a) = &self.index_var {
            let _ = writeln!(out, "index {a}");
        }
        for a in &self.automata {
            let _ = writeln!(out, "\nautomaton {} ({})", a.name, a.role.describe());
            for l in &a.locations {
                let init = if l.name == a.initial { " initial" } else { "" };
                match &l.invariant {
                    Some(i) => _ = writeln!(out, "  location {}{init} inv {i}", l.name),
                    None => _ = writeln!(out, "  location {}{init}", l.name),
                }
            }
            for e in &a.edges {
                let _ = writeln!(out, "  {} = {}", e.id, e.tuple());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::Update;
    use crate::expr::BinOp;

    #[test]
    fn tuple_notation() {
        let e = Edge {
            id: "every10s_fire".into(),
            source: "s0_every10s".into(),
            guard: Some(Expr::and(Expr::Send("every10s".into()), Expr::cmp(BinOp::Eq, "c1", 10))),
            action: ActionSeq::new(vec![Update::Reset("c1".into())]),
            target: "s0_every10s".into(),
        };
        assert_eq!(e.tuple(), "(s0_every10s, every10s! && c1==10, c1=0, {c1}, s0_every10s)");
        let bare = Edge { guard: None, action: ActionSeq::default(), ..e };
        assert_eq!(bare.tuple(), "(s0_every10s, NULL, NULL, NULL, s0_every10s)");
    }
}
