//! Action sequences: ordered updates applied atomically.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::expr::{Expr, Style};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Update {
    Assign { var: String, expr: Expr },
    /// Clock reset `c = 0`.
    Reset(String),
    /// Lockstep index advance over `1..=n`.
    Inc { var: String, n: u32 },
}

impl Update {
    pub fn assign(var: impl Into<String>, expr: Expr) -> Self {
        Update::Assign { var: var.into(), expr }
    }

    pub fn target(&self) -> &str {
        match self {
            Update::Assign { var, .. } | Update::Reset(var) | Update::Inc { var, .. } => var,
        }
    }

    fn fmt_styled(&self, f: &mut fmt::Formatter<'_>, style: Style) -> fmt::Result {
        match (self, style) {
            (Update::Assign { var, expr }, Style::Compact) => write!(f, "{var}={expr}"),
            (Update::Assign { var, expr }, Style::Spaced) => {
                write!(f, "{var} := {}", expr.display(Style::Spaced))
            }
            (Update::Reset(c), Style::Compact) => write!(f, "{c}=0"),
            (Update::Reset(c), Style::Spaced) => write!(f, "{c} := 0"),
            (Update::Inc { var, .. }, _) => write!(f, "Inc({var})"),
        }
    }
}

/// An empty sequence is the NULL action.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionSeq(pub Vec<Update>);

impl ActionSeq {
    pub fn new(updates: Vec<Update>) -> Self {
        ActionSeq(updates)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Update> {
        self.0.iter()
    }

    /// Sequential composition `<self; other>`.
    pub fn then(&self, other: &ActionSeq) -> ActionSeq {
        let mut v = self.0.clone();
        v.extend(other.0.iter().cloned());
        ActionSeq(v)
    }

    pub fn push(&mut self, u: Update) {
        self.0.push(u);
    }

    /// Clocks reset by this sequence, in order of first reset.
    pub fn clock_resets(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for u in &self.0 {
            if let Update::Reset(c) = u {
                if !out.contains(&c.as_str()) {
                    out.push(c);
                }
            }
        }
        out
    }

    /// Tuple notation: `NULL`, `x=5`, or `<x=2; x=0; x=5>`.
    pub fn compact(&self) -> String {
        match self.0.as_slice() {
            [] => return "NULL".into(),
            [one] => return UpdateDisplay(one, Style::Compact).to_string(),
            _ => {}
        }
        let parts: Vec<String> = self.0.iter().map(|u| UpdateDisplay(u, Style::Compact).to_string()).collect();
        format!("<{}>", parts.join("; "))
    }

    /// DSL block body: `x := 2; x := 0;`.
    pub fn dsl(&self) -> String {
        self.0
            .iter()
            .map(|u| format!("{};", UpdateDisplay(u, Style::Spaced)))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

struct UpdateDisplay<'a>(&'a Update, Style);

impl fmt::Display for UpdateDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt_styled(f, self.1)
    }
}

impl fmt::Display for Update {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_styled(f, Style::Compact)
    }
}

impl fmt::Display for ActionSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.compact())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compact_forms() {
        let a = ActionSeq::new(vec![
            Update::assign("x", Expr::Int(2)),
            Update::assign("x", Expr::Int(0)),
            Update::assign("x", Expr::Int(5)),
        ]);
        assert_eq!(a.compact(), "<x=2; x=0; x=5>");
        assert_eq!(ActionSeq::default().compact(), "NULL");
        let b = ActionSeq::new(vec![Update::assign("x", Expr::Int(5)), Update::Inc { var: "alpha".into(), n: 2 }]);
        assert_eq!(b.compact(), "<x=5; Inc(alpha)>");
    }

    #[test]
    fn resets_are_derived() {
        let a = ActionSeq::new(vec![Update::Reset("c1".into()), Update::Reset("c1".into())]);
        assert_eq!(a.clock_resets(), vec!["c1"]);
    }
}
