//! Guard and value expressions.
//!
//! One AST serves both sides of the pipeline. Statechart guards use `Event`
//! and `Trigger` atoms; after transformation those become `Receive` atoms on
//! channels, and auxiliary automata carry `Send` atoms.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A runtime value. Booleans and integers never mix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Bool(bool),
}

impl Value {
    pub fn as_int(self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(v),
            Value::Bool(_) => None,
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(b),
            Value::Int(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TriggerKind {
    After,
    Every,
}

impl TriggerKind {
    pub fn keyword(self) -> &'static str {
        match self {
            TriggerKind::After => "after",
            TriggerKind::Every => "every",
        }
    }
}

/// A timing trigger atom such as `after 5s`. The period is in time units.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Trigger {
    pub kind: TriggerKind,
    pub period: u64,
}

impl Trigger {
    pub fn after(period: u64) -> Self {
        Trigger { kind: TriggerKind::After, period }
    }

    pub fn every(period: u64) -> Self {
        Trigger { kind: TriggerKind::Every, period }
    }

    /// Channel base name used by the transformation, e.g. `every10s`.
    pub fn channel_stem(&self) -> String {
        format!("{}{}s", self.kind.keyword(), self.period)
    }
}

impl fmt::Display for Trigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}s", self.kind.keyword(), self.period)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Eq => "==",
            BinOp::Ge => ">=",
            BinOp::Gt => ">",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Lt | BinOp::Le | BinOp::Eq | BinOp::Ge | BinOp::Gt | BinOp::Ne => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul | BinOp::Div => 5,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 3
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }

    pub fn is_arithmetic(self) -> bool {
        self.precedence() >= 4
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    /// Data variable or clock reference.
    Var(String),
    /// Presence of a statechart event in the current cycle.
    Event(String),
    Trigger(Trigger),
    /// `ch?`: true when another automaton offers a send on `ch`.
    Receive(String),
    /// `ch!`: marks an edge as the sending side of `ch`.
    Send(String),
    Not(Box<Expr>),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

/// Printing style. `Compact` follows the tuple notation used in golden dumps
/// (`x>1 && !(x>0)`); `Spaced` is the DSL and UPPAAL surface form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Style {
    Compact,
    Spaced,
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Bin(op, Box::new(l), Box::new(r))
    }

    pub fn and(l: Expr, r: Expr) -> Expr {
        Expr::bin(BinOp::And, l, r)
    }

    pub fn or(l: Expr, r: Expr) -> Expr {
        Expr::bin(BinOp::Or, l, r)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    pub fn cmp(op: BinOp, var: &str, k: i64) -> Expr {
        Expr::bin(op, Expr::var(var), Expr::Int(k))
    }

    /// Left-nested conjunction of `parts`; `true` when empty.
    pub fn conjoin(parts: impl IntoIterator<Item = Expr>) -> Expr {
        let mut it = parts.into_iter();
        match it.next() {
            None => Expr::Bool(true),
            Some(first) => it.fold(first, Expr::and),
        }
    }

    /// Flattens the left spine of a conjunction: `(a && b) && c` gives
    /// `[a, b, c]`. Right operands are kept whole, so `conjoin` inverts it.
    pub fn left_conjuncts(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        let mut cur = self;
        let mut rights = Vec::new();
        while let Expr::Bin(BinOp::And, l, r) = cur {
            rights.push(r.as_ref());
            cur = l;
        }
        out.push(cur);
        out.extend(rights.into_iter().rev());
        out
    }

    fn is_atom(&self) -> bool {
        matches!(
            self,
            Expr::Int(_)
                | Expr::Bool(_)
                | Expr::Var(_)
                | Expr::Event(_)
                | Expr::Receive(_)
                | Expr::Send(_)
                | Expr::Not(_)
                | Expr::Neg(_)
        )
    }

    /// Visits every node in pre-order.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Not(e) | Expr::Neg(e) => e.walk(f),
            Expr::Bin(_, l, r) => {
                l.walk(f);
                r.walk(f);
            }
            _ => {}
        }
    }

    /// Rebuilds the tree bottom-up, letting `f` replace any node.
    pub fn rewrite(&self, f: &mut impl FnMut(&Expr) -> Option<Expr>) -> Expr {
        if let Some(e) = f(self) {
            return e;
        }
        match self {
            Expr::Not(e) => Expr::Not(Box::new(e.rewrite(f))),
            Expr::Neg(e) => Expr::Neg(Box::new(e.rewrite(f))),
            Expr::Bin(op, l, r) => Expr::Bin(*op, Box::new(l.rewrite(f)), Box::new(r.rewrite(f))),
            other => other.clone(),
        }
    }

    /// Names of data variables and clocks referenced.
    pub fn vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Var(v) = e {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
        });
        out
    }

    /// Channel atoms that are not under any negation, in left-to-right order.
    pub fn positive_receives(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_positive(&mut |e| {
            if let Expr::Receive(c) = e {
                out.push(c.clone());
            }
        });
        out
    }

    pub fn positive_sends(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_positive(&mut |e| {
            if let Expr::Send(c) = e {
                out.push(c.clone());
            }
        });
        out
    }

    fn collect_positive(&self, f: &mut impl FnMut(&Expr)) {
        match self {
            Expr::Not(_) => {}
            Expr::Neg(e) => e.collect_positive(f),
            Expr::Bin(_, l, r) => {
                l.collect_positive(f);
                r.collect_positive(f);
            }
            leaf => f(leaf),
        }
    }

    pub fn contains(&self, pred: impl Fn(&Expr) -> bool) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= pred(e));
        found
    }

    pub fn display(&self, style: Style) -> ExprDisplay<'_> {
        ExprDisplay { expr: self, style }
    }

    fn fmt_styled(&self, f: &mut fmt::Formatter<'_>, style: Style) -> fmt::Result {
        match self {
            Expr::Int(v) => write!(f, "{v}"),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Var(v) | Expr::Event(v) => write!(f, "{v}"),
            Expr::Trigger(t) => write!(f, "{t}"),
            Expr::Receive(c) => write!(f, "{c}?"),
            Expr::Send(c) => write!(f, "{c}!"),
            Expr::Not(e) | Expr::Neg(e) => {
                f.write_str(if matches!(self, Expr::Not(_)) { "!" } else { "-" })?;
                if e.is_atom() && !matches!(**e, Expr::Int(v) if v < 0) {
                    e.fmt_styled(f, style)
                } else {
                    f.write_str("(")?;
                    e.fmt_styled(f, style)?;
                    f.write_str(")")
                }
            }
            Expr::Bin(op, l, r) => {
                let p = op.precedence();
                let wrap_l = needs_parens(l, *op, p, false);
                let wrap_r = needs_parens(r, *op, p, true);
                write_operand(f, l, wrap_l, style)?;
                if style == Style::Spaced || op.is_logical() {
                    write!(f, " {} ", op.symbol())?;
                } else {
                    f.write_str(op.symbol())?;
                }
                write_operand(f, r, wrap_r, style)
            }
        }
    }
}

fn needs_parens(child: &Expr, parent: BinOp, p: u8, right: bool) -> bool {
    match child {
        Expr::Bin(op, _, _) => {
            let cp = op.precedence();
            if *op == BinOp::And && parent == BinOp::Or {
                return true;
            }
            cp < p || (cp == p && (right || parent.is_comparison()))
        }
        Expr::Trigger(_) => parent != BinOp::And && parent != BinOp::Or,
        Expr::Int(v) => *v < 0 && right,
        _ => false,
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, wrap: bool, style: Style) -> fmt::Result {
    if wrap {
        f.write_str("(")?;
        e.fmt_styled(f, style)?;
        f.write_str(")")
    } else {
        e.fmt_styled(f, style)
    }
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    style: Style,
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.fmt_styled(f, self.style)
    }
}

/// Compact form, as used in tuple dumps.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_styled(f, Style::Compact)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compact_priority_guard() {
        let g = Expr::and(Expr::cmp(BinOp::Gt, "x", 1), Expr::not(Expr::cmp(BinOp::Gt, "x", 0)));
        assert_eq!(g.to_string(), "x>1 && !(x>0)");
        assert_eq!(g.display(Style::Spaced).to_string(), "x > 1 && !(x > 0)");
    }

    #[test]
    fn negated_atoms_print_bare() {
        assert_eq!(Expr::not(Expr::Receive("eventA".into())).to_string(), "!eventA?");
        assert_eq!(Expr::not(Expr::Bool(true)).to_string(), "!true");
    }

    #[test]
    fn and_inside_or_is_parenthesised() {
        let e = Expr::or(
            Expr::cmp(BinOp::Gt, "a", 7),
            Expr::and(Expr::cmp(BinOp::Eq, "a", 7), Expr::cmp(BinOp::Gt, "b", 4)),
        );
        assert_eq!(e.display(Style::Spaced).to_string(), "a > 7 || (a == 7 && b > 4)");
    }

    #[test]
    fn left_conjuncts_inverts_conjoin() {
        let parts = vec![Expr::Receive("e".into()), Expr::var("b"), Expr::cmp(BinOp::Eq, "alpha", 1)];
        let c = Expr::conjoin(parts.clone());
        let back: Vec<Expr> = c.left_conjuncts().into_iter().cloned().collect();
        assert_eq!(back, parts);
    }

    #[test]
    fn right_nested_subtraction_keeps_parens() {
        let e = Expr::bin(BinOp::Sub, Expr::Int(7), Expr::bin(BinOp::Sub, Expr::var("x"), Expr::Int(1)));
        assert_eq!(e.display(Style::Spaced).to_string(), "7 - (x - 1)");
    }

    #[test]
    fn positive_receives_skip_negations() {
        let e = Expr::and(Expr::Receive("a".into()), Expr::not(Expr::Receive("b".into())));
        assert_eq!(e.positive_receives(), vec!["a".to_string()]);
    }
}
