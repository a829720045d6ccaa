//! Expression evaluation and action application.
//!
//! `eval_expr` and `apply_actions` interpret the AST directly over named
//! valuations. The engines use the compiled form in [`compiled`], which
//! resolves names to slots once; the two are checked against each other in
//! property tests.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::action::{ActionSeq, Update};
use crate::expr::{BinOp, Expr, Trigger, Value};
use crate::model::{VarDecl, VarKind, Valuation};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("arithmetic overflow")]
    ArithmeticOverflow,
    #[error("value {value} assigned to `{var}` is outside its domain")]
    DomainOverflow { var: String, value: Value },
}

/// Per-cycle stimulus: events present and timing triggers raised.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CycleEnv {
    pub events: BTreeSet<String>,
    pub triggers: BTreeSet<Trigger>,
}

impl CycleEnv {
    pub fn with_events<I, S>(events: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        CycleEnv { events: events.into_iter().map(Into::into).collect(), triggers: BTreeSet::new() }
    }
}

/// Name-based lookups for the interpreter.
pub trait Lookup {
    fn value(&self, name: &str) -> Option<Value>;
    fn event(&self, name: &str) -> bool;
    fn trigger(&self, t: &Trigger) -> bool;
    /// Whether a send on `ch` is offered. `None` means channel atoms are not
    /// meaningful in this context.
    fn offered(&self, ch: &str) -> Option<bool>;
}

struct ScLookup<'a> {
    val: &'a Valuation,
    env: &'a CycleEnv,
}

impl Lookup for ScLookup<'_> {
    fn value(&self, name: &str) -> Option<Value> {
        self.val.get(name)
    }
    fn event(&self, name: &str) -> bool {
        self.env.events.contains(name)
    }
    fn trigger(&self, t: &Trigger) -> bool {
        self.env.triggers.contains(t)
    }
    fn offered(&self, _: &str) -> Option<bool> {
        None
    }
}

/// Evaluates a statechart expression. Pure.
pub fn eval_expr(expr: &Expr, val: &Valuation, env: &CycleEnv) -> Result<Value, EvalError> {
    eval_with(expr, &ScLookup { val, env })
}

pub fn eval_with(expr: &Expr, lk: &dyn Lookup) -> Result<Value, EvalError> {
    Ok(match expr {
        Expr::Int(v) => Value::Int(*v),
        Expr::Bool(b) => Value::Bool(*b),
        Expr::Var(n) => lk.value(n).ok_or_else(|| EvalError::UnboundVariable(n.clone()))?,
        Expr::Event(n) => Value::Bool(lk.event(n)),
        Expr::Trigger(t) => Value::Bool(lk.trigger(t)),
        Expr::Receive(c) => Value::Bool(
            lk.offered(c).ok_or_else(|| EvalError::TypeMismatch(format!("channel atom `{c}?` outside a timed automaton")))?,
        ),
        Expr::Send(c) => {
            lk.offered(c).ok_or_else(|| EvalError::TypeMismatch(format!("channel atom `{c}!` outside a timed automaton")))?;
            Value::Bool(true)
        }
        Expr::Not(e) => Value::Bool(!as_bool(eval_with(e, lk)?)?),
        Expr::Neg(e) => Value::Int(as_int(eval_with(e, lk)?)?.checked_neg().ok_or(EvalError::ArithmeticOverflow)?),
        Expr::Bin(op, l, r) => {
            let lv = eval_with(l, lk)?;
            match op {
                BinOp::And => {
                    let r = eval_with(r, lk)?;
                    Value::Bool(as_bool(lv)? & as_bool(r)?)
                }
                BinOp::Or => {
                    let r = eval_with(r, lk)?;
                    Value::Bool(as_bool(lv)? | as_bool(r)?)
                }
                BinOp::Eq | BinOp::Ne => {
                    let rv = eval_with(r, lk)?;
                    let same = match (lv, rv) {
                        (Value::Int(a), Value::Int(b)) => a == b,
                        (Value::Bool(a), Value::Bool(b)) => a == b,
                        _ => return Err(EvalError::TypeMismatch(format!("cannot compare {lv} with {rv}"))),
                    };
                    Value::Bool(if *op == BinOp::Eq { same } else { !same })
                }
                _ => {
                    let a = as_int(lv)?;
                    let b = as_int(eval_with(r, lk)?)?;
                    int_op(*op, a, b)?
                }
            }
        }
    })
}

pub(crate) fn int_op(op: BinOp, a: i64, b: i64) -> Result<Value, EvalError> {
    let ovf = EvalError::ArithmeticOverflow;
    Ok(match op {
        BinOp::Add => Value::Int(a.checked_add(b).ok_or(ovf)?),
        BinOp::Sub => Value::Int(a.checked_sub(b).ok_or(ovf)?),
        BinOp::Mul => Value::Int(a.checked_mul(b).ok_or(ovf)?),
        BinOp::Div => {
            if b == 0 {
                return Err(EvalError::DivisionByZero);
            }
            Value::Int(a.checked_div(b).ok_or(ovf)?)
        }
        BinOp::Lt => Value::Bool(a < b),
        BinOp::Le => Value::Bool(a <= b),
        BinOp::Ge => Value::Bool(a >= b),
        BinOp::Gt => Value::Bool(a > b),
        BinOp::Eq => Value::Bool(a == b),
        BinOp::Ne => Value::Bool(a != b),
        BinOp::And | BinOp::Or => unreachable!("logical operators are handled by the caller"),
    })
}

fn as_bool(v: Value) -> Result<bool, EvalError> {
    v.as_bool().ok_or_else(|| EvalError::TypeMismatch(format!("expected bool, found {v}")))
}

fn as_int(v: Value) -> Result<i64, EvalError> {
    v.as_int().ok_or_else(|| EvalError::TypeMismatch(format!("expected int, found {v}")))
}

/// Applies `seq` left to right and returns the new valuation. Every assigned
/// value is checked against its declaration. Clock resets and index updates
/// are ignored here; they only exist on the timed-automata side.
pub fn apply_actions(seq: &ActionSeq, val: &Valuation, decls: &[VarDecl]) -> Result<Valuation, EvalError> {
    let mut out = val.clone();
    let env = CycleEnv::default();
    for u in seq.iter() {
        match u {
            Update::Assign { var, expr } => {
                let v = eval_expr(expr, &out, &env)?;
                let decl = decls
                    .iter()
                    .find(|d| &d.name == var)
                    .ok_or_else(|| EvalError::UnboundVariable(var.clone()))?;
                if !decl.kind.admits(v) {
                    return Err(EvalError::DomainOverflow { var: var.clone(), value: v });
                }
                out.set(var, v);
            }
            Update::Inc { var, n } => {
                let cur = out.get(var).and_then(Value::as_int).ok_or_else(|| EvalError::UnboundVariable(var.clone()))?;
                out.set(var, Value::Int(cur % i64::from(*n) + 1));
            }
            Update::Reset(_) => {}
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ty {
    Int,
    Bool,
}

/// Static type of `expr` given the declarations.
pub fn type_of(expr: &Expr, decls: &[VarDecl]) -> Result<Ty, String> {
    match expr {
        Expr::Int(_) => Ok(Ty::Int),
        Expr::Bool(_) | Expr::Event(_) | Expr::Trigger(_) | Expr::Receive(_) | Expr::Send(_) => Ok(Ty::Bool),
        Expr::Var(n) => match decls.iter().find(|d| &d.name == n).map(|d| d.kind) {
            Some(VarKind::Int { .. }) | Some(VarKind::Clock) => Ok(Ty::Int),
            Some(VarKind::Bool) | Some(VarKind::Event) => Ok(Ty::Bool),
            Some(VarKind::Channel) => Err(format!("channel `{n}` used as a value")),
            None => Err(format!("unknown variable `{n}`")),
        },
        Expr::Not(e) => expect(e, Ty::Bool, decls).map(|_| Ty::Bool),
        Expr::Neg(e) => expect(e, Ty::Int, decls).map(|_| Ty::Int),
        Expr::Bin(op, l, r) => {
            if op.is_logical() {
                expect(l, Ty::Bool, decls)?;
                expect(r, Ty::Bool, decls)?;
                Ok(Ty::Bool)
            } else if matches!(op, BinOp::Eq | BinOp::Ne) {
                let lt = type_of(l, decls)?;
                expect(r, lt, decls)?;
                Ok(Ty::Bool)
            } else {
                expect(l, Ty::Int, decls)?;
                expect(r, Ty::Int, decls)?;
                Ok(if op.is_comparison() { Ty::Bool } else { Ty::Int })
            }
        }
    }
}

fn expect(e: &Expr, want: Ty, decls: &[VarDecl]) -> Result<(), String> {
    let got = type_of(e, decls)?;
    if got == want {
        Ok(())
    } else {
        Err(format!("`{e}` has type {got:?}, expected {want:?}"))
    }
}

pub mod compiled {
    //! Slot-indexed expressions for the stepping engines. Integers and
    //! booleans share one `i64` representation (0/1 for booleans); types were
    //! checked during compilation.

    use std::collections::HashMap;

    use super::{int_op, EvalError, Ty};
    use crate::action::{ActionSeq, Update};
    use crate::expr::{BinOp, Expr, Trigger, Value};
    use crate::model::{VarDecl, VarKind, Valuation};

    #[derive(Clone, Debug)]
    pub struct Slot {
        pub name: String,
        pub kind: VarKind,
        pub initial: i64,
    }

    /// Name resolution for one network.
    #[derive(Clone, Debug, Default)]
    pub struct Layout {
        pub slots: Vec<Slot>,
        slot_of: HashMap<String, usize>,
        pub events: Vec<String>,
        event_of: HashMap<String, usize>,
        pub triggers: Vec<Trigger>,
        pub clocks: Vec<String>,
        clock_of: HashMap<String, usize>,
        pub channels: Vec<String>,
        channel_of: HashMap<String, usize>,
    }

    impl Layout {
        pub fn new(decls: &[VarDecl]) -> Self {
            let mut l = Layout::default();
            for d in decls {
                match d.kind {
                    VarKind::Int { .. } | VarKind::Bool => {
                        let initial = match d.initial {
                            Some(Value::Int(v)) => v,
                            Some(Value::Bool(b)) => i64::from(b),
                            None => 0,
                        };
                        l.slot_of.insert(d.name.clone(), l.slots.len());
                        l.slots.push(Slot { name: d.name.clone(), kind: d.kind, initial });
                    }
                    VarKind::Event => {
                        l.event_of.insert(d.name.clone(), l.events.len());
                        l.events.push(d.name.clone());
                    }
                    VarKind::Clock => {
                        l.clock_of.insert(d.name.clone(), l.clocks.len());
                        l.clocks.push(d.name.clone());
                    }
                    VarKind::Channel => {
                        l.channel_of.insert(d.name.clone(), l.channels.len());
                        l.channels.push(d.name.clone());
                    }
                }
            }
            l
        }

        pub fn slot(&self, name: &str) -> Option<usize> {
            self.slot_of.get(name).copied()
        }

        pub fn event(&self, name: &str) -> Option<usize> {
            self.event_of.get(name).copied()
        }

        pub fn clock(&self, name: &str) -> Option<usize> {
            self.clock_of.get(name).copied()
        }

        pub fn channel(&self, name: &str) -> Option<usize> {
            self.channel_of.get(name).copied()
        }

        /// Registers a trigger value, returning its index.
        pub fn trigger(&mut self, t: Trigger) -> usize {
            if let Some(i) = self.triggers.iter().position(|x| *x == t) {
                return i;
            }
            self.triggers.push(t);
            self.triggers.len() - 1
        }

        pub fn initial_values(&self) -> Vec<i64> {
            self.slots.iter().map(|s| s.initial).collect()
        }

        pub fn to_value(&self, slot: usize, raw: i64) -> Value {
            match self.slots[slot].kind {
                VarKind::Bool => Value::Bool(raw != 0),
                _ => Value::Int(raw),
            }
        }

        pub fn valuation(&self, raw: &[i64]) -> Valuation {
            let mut v = Valuation::default();
            for (i, s) in self.slots.iter().enumerate() {
                v.set(&s.name, self.to_value(i, raw[i]));
            }
            v
        }

        pub fn raw_values(&self, val: &Valuation) -> Option<Vec<i64>> {
            self.slots
                .iter()
                .map(|s| match val.get(&s.name)? {
                    Value::Int(v) => Some(v),
                    Value::Bool(b) => Some(i64::from(b)),
                })
                .collect()
        }

        pub fn compile(&mut self, e: &Expr) -> Result<CExpr, String> {
            let (c, _) = self.compile_typed(e)?;
            Ok(c)
        }

        pub fn compile_bool(&mut self, e: &Expr) -> Result<CExpr, String> {
            let (c, t) = self.compile_typed(e)?;
            if t != Ty::Bool {
                return Err(format!("`{e}` is not boolean"));
            }
            Ok(c)
        }

        fn compile_typed(&mut self, e: &Expr) -> Result<(CExpr, Ty), String> {
            Ok(match e {
                Expr::Int(v) => (CExpr::Const(*v), Ty::Int),
                Expr::Bool(b) => (CExpr::Const(i64::from(*b)), Ty::Bool),
                Expr::Var(n) => {
                    if let Some(i) = self.slot(n) {
                        let ty = if self.slots[i].kind == VarKind::Bool { Ty::Bool } else { Ty::Int };
                        (CExpr::Slot(i), ty)
                    } else if let Some(i) = self.clock(n) {
                        (CExpr::Clock(i), Ty::Int)
                    } else if let Some(i) = self.event(n) {
                        (CExpr::Event(i), Ty::Bool)
                    } else {
                        return Err(format!("unknown variable `{n}`"));
                    }
                }
                Expr::Event(n) => (CExpr::Event(self.event(n).ok_or_else(|| format!("unknown event `{n}`"))?), Ty::Bool),
                Expr::Trigger(t) => (CExpr::Trigger(self.trigger(*t)), Ty::Bool),
                Expr::Receive(c) => {
                    (CExpr::Receive(self.channel(c).ok_or_else(|| format!("unknown channel `{c}`"))?), Ty::Bool)
                }
                Expr::Send(c) => (CExpr::Send(self.channel(c).ok_or_else(|| format!("unknown channel `{c}`"))?), Ty::Bool),
                Expr::Not(x) => {
                    let (c, t) = self.compile_typed(x)?;
                    check(t, Ty::Bool, x)?;
                    (CExpr::Not(Box::new(c)), Ty::Bool)
                }
                Expr::Neg(x) => {
                    let (c, t) = self.compile_typed(x)?;
                    check(t, Ty::Int, x)?;
                    (CExpr::Neg(Box::new(c)), Ty::Int)
                }
                Expr::Bin(op, l, r) => {
                    let (cl, tl) = self.compile_typed(l)?;
                    let (cr, tr) = self.compile_typed(r)?;
                    let ty = if op.is_logical() {
                        check(tl, Ty::Bool, l)?;
                        check(tr, Ty::Bool, r)?;
                        Ty::Bool
                    } else if matches!(op, BinOp::Eq | BinOp::Ne) {
                        check(tr, tl, r)?;
                        Ty::Bool
                    } else {
                        check(tl, Ty::Int, l)?;
                        check(tr, Ty::Int, r)?;
                        if op.is_comparison() {
                            Ty::Bool
                        } else {
                            Ty::Int
                        }
                    };
                    (CExpr::Bin(*op, Box::new(cl), Box::new(cr)), ty)
                }
            })
        }

        pub fn compile_actions(&mut self, seq: &ActionSeq) -> Result<Vec<CUpdate>, String> {
            seq.iter()
                .map(|u| match u {
                    Update::Assign { var, expr } => {
                        let slot = self.slot(var).ok_or_else(|| format!("cannot assign to `{var}`"))?;
                        let (c, t) = self.compile_typed(expr)?;
                        let want = if self.slots[slot].kind == VarKind::Bool { Ty::Bool } else { Ty::Int };
                        check(t, want, expr)?;
                        Ok(CUpdate::Assign { slot, expr: c })
                    }
                    Update::Reset(c) => Ok(CUpdate::Reset(self.clock(c).ok_or_else(|| format!("unknown clock `{c}`"))?)),
                    Update::Inc { var, n } => Ok(CUpdate::Inc {
                        slot: self.slot(var).ok_or_else(|| format!("unknown index variable `{var}`"))?,
                        n: i64::from(*n),
                    }),
                })
                .collect()
        }
    }

    fn check(got: Ty, want: Ty, e: &Expr) -> Result<(), String> {
        if got == want {
            Ok(())
        } else {
            Err(format!("`{e}` has type {got:?}, expected {want:?}"))
        }
    }

    #[derive(Clone, Debug, PartialEq, Eq)]
    pub enum CExpr {
        Const(i64),
        Slot(usize),
        Event(usize),
        Trigger(usize),
        Clock(usize),
        Receive(usize),
        Send(usize),
        Not(Box<CExpr>),
        Neg(Box<CExpr>),
        Bin(BinOp, Box<CExpr>, Box<CExpr>),
    }

    /// Runtime context for compiled evaluation.
    pub trait Ctx {
        fn slot(&self, i: usize) -> i64;
        fn event(&self, _i: usize) -> bool {
            false
        }
        fn trigger(&self, _i: usize) -> bool {
            false
        }
        fn clock(&self, _i: usize) -> i64 {
            0
        }
        fn offered(&self, _ch: usize) -> bool {
            false
        }
    }

    impl Ctx for [i64] {
        fn slot(&self, i: usize) -> i64 {
            self[i]
        }
    }

    impl CExpr {
        pub fn eval(&self, cx: &(impl Ctx + ?Sized)) -> Result<i64, EvalError> {
            Ok(match self {
                CExpr::Const(v) => *v,
                CExpr::Slot(i) => cx.slot(*i),
                CExpr::Event(i) => i64::from(cx.event(*i)),
                CExpr::Trigger(i) => i64::from(cx.trigger(*i)),
                CExpr::Clock(i) => cx.clock(*i),
                CExpr::Receive(i) => i64::from(cx.offered(*i)),
                CExpr::Send(_) => 1,
                CExpr::Not(e) => i64::from(e.eval(cx)? == 0),
                CExpr::Neg(e) => e.eval(cx)?.checked_neg().ok_or(EvalError::ArithmeticOverflow)?,
                CExpr::Bin(BinOp::And, l, r) => {
                    let a = l.eval(cx)?;
                    let b = r.eval(cx)?;
                    i64::from(a != 0 && b != 0)
                }
                CExpr::Bin(BinOp::Or, l, r) => {
                    let a = l.eval(cx)?;
                    let b = r.eval(cx)?;
                    i64::from(a != 0 || b != 0)
                }
                CExpr::Bin(op, l, r) => match int_op(*op, l.eval(cx)?, r.eval(cx)?)? {
                    Value::Int(v) => v,
                    Value::Bool(b) => i64::from(b),
                },
            })
        }

        pub fn holds(&self, cx: &(impl Ctx + ?Sized)) -> Result<bool, EvalError> {
            Ok(self.eval(cx)? != 0)
        }

        /// Channels of positive `Receive` atoms, left to right.
        pub fn positive_receives(&self, out: &mut Vec<usize>) {
            match self {
                CExpr::Receive(c) => out.push(*c),
                CExpr::Not(_) => {}
                CExpr::Neg(e) => e.positive_receives(out),
                CExpr::Bin(_, l, r) => {
                    l.positive_receives(out);
                    r.positive_receives(out);
                }
                _ => {}
            }
        }

        pub fn positive_sends(&self, out: &mut Vec<usize>) {
            match self {
                CExpr::Send(c) => out.push(*c),
                CExpr::Not(_) => {}
                CExpr::Neg(e) => e.positive_sends(out),
                CExpr::Bin(_, l, r) => {
                    l.positive_sends(out);
                    r.positive_sends(out);
                }
                _ => {}
            }
        }
    }

    #[derive(Clone, Debug, PartialEq, Eq)]
    pub enum CUpdate {
        Assign { slot: usize, expr: CExpr },
        Reset(usize),
        Inc { slot: usize, n: i64 },
    }

    /// Applies updates in place. `eval` evaluates an assignment's right-hand
    /// side against the current buffers. On error the partially updated
    /// buffers must be discarded by the caller.
    pub fn apply<F>(updates: &[CUpdate], layout: &Layout, vals: &mut [i64], clocks: &mut [i64], eval: F) -> Result<(), EvalError>
    where
        F: Fn(&CExpr, &[i64], &[i64]) -> Result<i64, EvalError>,
    {
        for u in updates {
            match u {
                CUpdate::Assign { slot, expr } => {
                    let v = eval(expr, vals, clocks)?;
                    store(layout, vals, *slot, v)?;
                }
                CUpdate::Reset(c) => clocks[*c] = 0,
                CUpdate::Inc { slot, n } => vals[*slot] = vals[*slot] % n + 1,
            }
        }
        Ok(())
    }

    /// Writes `v` into `slot` after a domain check.
    pub fn store(layout: &Layout, vals: &mut [i64], slot: usize, v: i64) -> Result<(), EvalError> {
        let s = &layout.slots[slot];
        if let VarKind::Int { bounds: Some((lo, hi)) } = s.kind {
            if v < lo || v > hi {
                return Err(EvalError::DomainOverflow { var: s.name.clone(), value: Value::Int(v) });
            }
        }
        vals[slot] = v;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::BinOp;

    fn x_is(v: i64) -> Valuation {
        Valuation::default().with("x", Value::Int(v))
    }

    #[test]
    fn comparison_and_priority_guard() {
        let env = CycleEnv::default();
        assert_eq!(eval_expr(&Expr::cmp(BinOp::Gt, "x", 0), &x_is(5), &env), Ok(Value::Bool(true)));
        let g = Expr::and(Expr::cmp(BinOp::Gt, "x", 1), Expr::not(Expr::cmp(BinOp::Gt, "x", 0)));
        assert_eq!(eval_expr(&g, &x_is(2), &env), Ok(Value::Bool(false)));
    }

    #[test]
    fn event_presence() {
        let env = CycleEnv::with_events(["eventA"]);
        assert_eq!(eval_expr(&Expr::Event("eventA".into()), &x_is(0), &env), Ok(Value::Bool(true)));
        assert_eq!(eval_expr(&Expr::Event("eventB".into()), &x_is(0), &env), Ok(Value::Bool(false)));
    }

    #[test]
    fn unbound_and_mismatch() {
        let env = CycleEnv::default();
        assert_eq!(eval_expr(&Expr::var("y"), &x_is(0), &env), Err(EvalError::UnboundVariable("y".into())));
        let bad = Expr::and(Expr::var("x"), Expr::Bool(true));
        assert!(matches!(eval_expr(&bad, &x_is(0), &env), Err(EvalError::TypeMismatch(_))));
    }

    #[test]
    fn sequential_actions() {
        let decls = vec![VarDecl::int("x", 0, 15, 0)];
        let seq = ActionSeq::new(vec![
            Update::assign("x", Expr::Int(2)),
            Update::assign("x", Expr::Int(0)),
            Update::assign("x", Expr::Int(5)),
        ]);
        assert_eq!(apply_actions(&seq, &x_is(7), &decls).unwrap(), x_is(5));
        assert_eq!(apply_actions(&ActionSeq::default(), &x_is(7), &decls).unwrap(), x_is(7));
    }

    #[test]
    fn domain_overflow() {
        let decls = vec![VarDecl::int("x", 0, 3, 0)];
        let inc = ActionSeq::new(vec![Update::assign("x", Expr::bin(BinOp::Add, Expr::var("x"), Expr::Int(1)))]);
        assert_eq!(
            apply_actions(&inc, &x_is(3), &decls),
            Err(EvalError::DomainOverflow { var: "x".into(), value: Value::Int(4) })
        );
    }
}
