//! Discrete-time execution of timed-automata networks.
//!
//! A guard atom `ch?` holds when another automaton currently has an enabled
//! edge carrying a positive `ch!`. An edge whose guard holds fires together
//! with the first offerer of its first offered positive receive (binary
//! synchronisation), or alone when none of its receives is offered. Edges
//! carrying `ch!` only ever fire as the partner of a receiver.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::{Role, TaNetwork};
use crate::eval::compiled::{self, CExpr, CUpdate, Ctx, Layout};
use crate::eval::EvalError;
use crate::expr::{BinOp, Expr};
use crate::model::Valuation;
use crate::sc::{eval_class, EventEnv, Schedule};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TaError {
    #[error("network cannot be executed: {0}")]
    Invalid(String),
    #[error("in {automaton} edge {edge}: {source}")]
    Eval { automaton: String, edge: String, source: EvalError },
    #[error("deadlock{}", .automaton.as_ref().map(|a| format!(": no edge of {a} is enabled")).unwrap_or_default())]
    Deadlock { automaton: Option<String> },
    #[error("nondeterministic choice in {automaton} between {}", .edges.join(", "))]
    NondeterministicChoice { automaton: String, edges: Vec<String> },
    #[error("lockstep violation: {automaton} edge {edge} is enabled out of turn")]
    LockstepViolation { automaton: String, edge: String },
    #[error("invariant of {automaton}.{location} violated; at most {max_admissible} time units admissible")]
    InvariantViolation { automaton: String, location: String, max_admissible: u64 },
    #[error("status does not match the network: {0}")]
    BadStatus(String),
}

impl TaError {
    /// Comparable class of a runtime failure, shared with the statechart side.
    pub fn terminal_class(&self) -> String {
        match self {
            TaError::Eval { source, .. } => eval_class(source),
            TaError::Deadlock { automaton } => format!("Deadlock({})", automaton.as_deref().unwrap_or("")),
            TaError::NondeterministicChoice { automaton, .. } => format!("NondeterministicChoice({automaton})"),
            TaError::LockstepViolation { automaton, .. } => format!("LockstepViolation({automaton})"),
            TaError::InvariantViolation { automaton, .. } => format!("InvariantViolation({automaton})"),
            other => other.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaStatus {
    pub locations: Vec<String>,
    /// Data variables including the lockstep index.
    pub valuation: Valuation,
    pub clocks: BTreeMap<String, i64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepLabel {
    /// Fired `(automaton, edge)` pairs; receiver first. `tie` is set when
    /// other edges were enabled too.
    Fired { edges: Vec<(String, String)>, tie: bool },
    Delay(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntryKind {
    Init,
    /// A lockstep step of a transformed automaton.
    Step,
    /// An unconsumed timer offer expiring.
    Lapse,
    Delay(u64),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaEntry {
    pub kind: EntryKind,
    pub cycle: u64,
    pub micro: usize,
    pub status: TaStatus,
    pub edges: Vec<(String, String)>,
}

impl TaEntry {
    pub fn label(&self) -> String {
        let fired = || self.edges.iter().map(|(a, e)| format!("{a}.{e}")).collect::<Vec<_>>().join(" + ");
        match self.kind {
            EntryKind::Init => "INIT".into(),
            EntryKind::Step => fired(),
            EntryKind::Lapse => format!("LAPSE {}", fired()),
            EntryKind::Delay(d) => format!("DELAY {d}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaTrace {
    pub entries: Vec<TaEntry>,
}

impl TaTrace {
    /// `cycle.micro | (locations) | vars | clocks | label`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let clocks: Vec<String> = e.status.clocks.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = writeln!(
                out,
                "{}.{} | ({}) | {} | {} | {}",
                e.cycle,
                e.micro,
                e.status.locations.join(","),
                e.status.valuation,
                clocks.join(","),
                e.label()
            );
        }
        out
    }

    pub fn last(&self) -> &TaStatus {
        &self.entries.last().expect("trace always has an initial entry").status
    }

    pub fn steps(&self) -> impl Iterator<Item = &TaEntry> {
        self.entries.iter().filter(|e| e.kind == EntryKind::Step)
    }
}

struct CEdge {
    id: String,
    guard: CExpr,
    updates: Vec<CUpdate>,
    target: usize,
    sends: Vec<usize>,
    receives: Vec<usize>,
}

struct CAuto {
    name: String,
    role: Role,
    locs: Vec<String>,
    initial: usize,
    edges: Vec<CEdge>,
    out: Vec<Vec<usize>>,
    /// Per location: `(clock, inclusive bound)` conjuncts.
    inv: Vec<Vec<(usize, i64)>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) struct TaRaw {
    pub locs: Vec<usize>,
    pub vals: Vec<i64>,
    pub clocks: Vec<i64>,
}

/// Offering `(automaton, edge)` pairs per channel.
type Offers = Vec<Vec<(usize, usize)>>;

struct GCtx<'a> {
    vals: &'a [i64],
    clocks: &'a [i64],
    offers: &'a Offers,
    me: usize,
}

impl Ctx for GCtx<'_> {
    fn slot(&self, i: usize) -> i64 {
        self.vals[i]
    }
    fn clock(&self, i: usize) -> i64 {
        self.clocks[i]
    }
    fn offered(&self, ch: usize) -> bool {
        self.offers[ch].iter().any(|(a, _)| *a != self.me)
    }
}

/// Parses a supported invariant: a conjunction of `c <= k` / `c < k`.
fn compile_invariant(layout: &Layout, e: &Expr) -> Result<Vec<(usize, i64)>, String> {
    let mut out = Vec::new();
    for c in e.left_conjuncts() {
        match c {
            Expr::Bin(op @ (BinOp::Le | BinOp::Lt), l, r) => match (l.as_ref(), r.as_ref()) {
                (Expr::Var(v), Expr::Int(k)) => {
                    let clock = layout.clock(v).ok_or_else(|| format!("invariant `{e}` does not bound a clock"))?;
                    out.push((clock, if *op == BinOp::Le { *k } else { k - 1 }));
                }
                _ => return Err(format!("unsupported invariant `{e}`")),
            },
            Expr::Bool(true) => {}
            _ => return Err(format!("unsupported invariant `{e}`")),
        }
    }
    Ok(out)
}

/// Structural checks needed before execution. Rejects statechart-only atoms
/// (events, triggers), unsupported invariants and ill-typed labels.
pub fn validate_ta(ta: &TaNetwork) -> Result<(), TaError> {
    TaEngine::new(ta).map(|_| ())
}

/// Additionally requires the lockstep encoding: an index variable and one
/// transformed automaton per priority `1..n`.
pub fn validate_lockstep(ta: &TaNetwork) -> Result<(), TaError> {
    TaEngine::new(ta)?.lockstep().map(|_| ())
}

pub struct TaEngine {
    pub(crate) layout: Layout,
    autos: Vec<CAuto>,
    index_var: Option<String>,
}

impl TaEngine {
    pub fn new(ta: &TaNetwork) -> Result<Self, TaError> {
        let mut layout = Layout::new(&ta.variables);
        let mut autos = Vec::new();
        for a in &ta.automata {
            let err = |m: String| TaError::Invalid(format!("{}: {m}", a.name));
            let locs: Vec<String> = a.locations.iter().map(|l| l.name.clone()).collect();
            let idx = |n: &str| locs.iter().position(|l| l == n).ok_or_else(|| err(format!("unknown location `{n}`")));
            let mut edges = Vec::new();
            let mut out = vec![Vec::new(); locs.len()];
            for e in &a.edges {
                let g = e.guard_or_true();
                if g.contains(|x| matches!(x, Expr::Event(_) | Expr::Trigger(_))) {
                    return Err(err(format!("edge {} guard `{g}` still contains an event or timing trigger", e.id)));
                }
                let guard = layout.compile_bool(&g).map_err(|m| err(format!("edge {}: {m}", e.id)))?;
                let updates = layout.compile_actions(&e.action).map_err(|m| err(format!("edge {}: {m}", e.id)))?;
                let (mut sends, mut receives) = (Vec::new(), Vec::new());
                guard.positive_sends(&mut sends);
                guard.positive_receives(&mut receives);
                out[idx(&e.source)?].push(edges.len());
                edges.push(CEdge { id: e.id.clone(), guard, updates, target: idx(&e.target)?, sends, receives });
            }
            let inv = a
                .locations
                .iter()
                .map(|l| l.invariant.as_ref().map_or(Ok(Vec::new()), |i| compile_invariant(&layout, i)))
                .collect::<Result<_, _>>()
                .map_err(err)?;
            autos.push(CAuto { name: a.name.clone(), role: a.role.clone(), initial: idx(&a.initial)?, locs, edges, out, inv });
        }
        if let Some(ix) = &ta.index_var {
            if layout.slot(ix).is_none() {
                return Err(TaError::Invalid(format!("index variable `{ix}` is not declared")));
            }
        }
        Ok(TaEngine { layout, autos, index_var: ta.index_var.clone() })
    }

    /// Automaton index per lockstep position.
    pub(crate) fn lockstep(&self) -> Result<Vec<usize>, TaError> {
        if self.index_var.is_none() {
            return Err(TaError::Invalid("no lockstep index variable is declared".into()));
        }
        let mut by_prio = BTreeMap::new();
        for (i, a) in self.autos.iter().enumerate() {
            if let Role::Transformed { priority, .. } = a.role {
                if by_prio.insert(priority, i).is_some() {
                    return Err(TaError::Invalid(format!("two transformed automata with priority {priority}")));
                }
            }
        }
        if by_prio.keys().copied().ne(1..=by_prio.len() as u32) {
            return Err(TaError::Invalid("transformed automata priorities are not 1..n".into()));
        }
        Ok(by_prio.into_values().collect())
    }

    pub fn width(&self) -> usize {
        self.autos.iter().filter(|a| a.role.is_transformed()).count()
    }

    pub(crate) fn location_name(&self, a: usize, l: usize) -> &str {
        &self.autos[a].locs[l]
    }

    pub(crate) fn location_index(&self, a: usize, name: &str) -> Option<usize> {
        self.autos[a].locs.iter().position(|l| l == name)
    }

    pub(crate) fn automaton_index(&self, name: &str) -> Option<usize> {
        self.autos.iter().position(|a| a.name == name)
    }

    pub(crate) fn initial_raw(&self) -> TaRaw {
        TaRaw {
            locs: self.autos.iter().map(|a| a.initial).collect(),
            vals: self.layout.initial_values(),
            clocks: vec![0; self.layout.clocks.len()],
        }
    }

    pub(crate) fn status_of(&self, raw: &TaRaw) -> TaStatus {
        TaStatus {
            locations: raw.locs.iter().zip(&self.autos).map(|(l, a)| a.locs[*l].clone()).collect(),
            valuation: self.layout.valuation(&raw.vals),
            clocks: self.layout.clocks.iter().cloned().zip(raw.clocks.iter().copied()).collect(),
        }
    }

    pub(crate) fn raw_of(&self, st: &TaStatus) -> Result<TaRaw, TaError> {
        if st.locations.len() != self.autos.len() {
            return Err(TaError::BadStatus(format!("{} locations for {} automata", st.locations.len(), self.autos.len())));
        }
        let locs = st
            .locations
            .iter()
            .zip(&self.autos)
            .map(|(l, a)| a.locs.iter().position(|x| x == l).ok_or_else(|| TaError::BadStatus(format!("`{l}` is not a location of `{}`", a.name))))
            .collect::<Result<_, _>>()?;
        let vals = self.layout.raw_values(&st.valuation).ok_or_else(|| TaError::BadStatus("valuation is not total".into()))?;
        let clocks = self
            .layout
            .clocks
            .iter()
            .map(|c| st.clocks.get(c).copied().ok_or_else(|| TaError::BadStatus(format!("clock `{c}` missing"))))
            .collect::<Result<_, _>>()?;
        Ok(TaRaw { locs, vals, clocks })
    }

    fn eval_err(&self, a: usize, e: usize, source: EvalError) -> TaError {
        TaError::Eval { automaton: self.autos[a].name.clone(), edge: self.autos[a].edges[e].id.clone(), source }
    }

    fn offers(&self, raw: &TaRaw, may_offer: &[bool]) -> Result<Offers, TaError> {
        let mut offers: Offers = vec![Vec::new(); self.layout.channels.len()];
        let none: Offers = vec![Vec::new(); self.layout.channels.len()];
        for (a, auto) in self.autos.iter().enumerate() {
            if !may_offer[a] {
                continue;
            }
            for &e in &auto.out[raw.locs[a]] {
                let edge = &auto.edges[e];
                if edge.sends.is_empty() {
                    continue;
                }
                let cx = GCtx { vals: &raw.vals, clocks: &raw.clocks, offers: &none, me: a };
                if edge.guard.holds(&cx).map_err(|x| self.eval_err(a, e, x))? {
                    for &ch in &edge.sends {
                        offers[ch].push((a, e));
                    }
                }
            }
        }
        Ok(offers)
    }

    /// Edges of `a` that may initiate a step.
    fn enabled(&self, raw: &TaRaw, offers: &Offers, a: usize) -> Result<Vec<usize>, TaError> {
        let auto = &self.autos[a];
        let mut out = Vec::new();
        for &e in &auto.out[raw.locs[a]] {
            let edge = &auto.edges[e];
            if !edge.sends.is_empty() {
                continue;
            }
            let cx = GCtx { vals: &raw.vals, clocks: &raw.clocks, offers, me: a };
            if edge.guard.holds(&cx).map_err(|x| self.eval_err(a, e, x))? {
                out.push(e);
            }
        }
        Ok(out)
    }

    fn apply_edge(&self, raw: &mut TaRaw, offers: &Offers, a: usize, e: usize) -> Result<(), TaError> {
        let edge = &self.autos[a].edges[e];
        let TaRaw { vals, clocks, .. } = raw;
        compiled::apply(&edge.updates, &self.layout, vals, clocks, |x, v, c| {
            x.eval(&GCtx { vals: v, clocks: c, offers, me: a })
        })
        .map_err(|x| self.eval_err(a, e, x))?;
        raw.locs[a] = edge.target;
        Ok(())
    }

    /// Fires edge `e` of `a`, synchronising when one of its receives is
    /// offered. Receiver updates run before sender updates.
    fn fire(&self, raw: &TaRaw, offers: &Offers, a: usize, e: usize) -> Result<(TaRaw, Vec<(usize, usize)>), TaError> {
        let edge = &self.autos[a].edges[e];
        let partner = edge.receives.iter().find_map(|ch| offers[*ch].iter().find(|(b, _)| *b != a).copied());
        let mut next = raw.clone();
        self.apply_edge(&mut next, offers, a, e)?;
        let mut fired = vec![(a, e)];
        if let Some((b, f)) = partner {
            self.apply_edge(&mut next, offers, b, f)?;
            fired.push((b, f));
        }
        self.check_invariants(&next)?;
        Ok((next, fired))
    }

    fn check_invariants(&self, raw: &TaRaw) -> Result<(), TaError> {
        for (a, auto) in self.autos.iter().enumerate() {
            for &(c, k) in &auto.inv[raw.locs[a]] {
                if raw.clocks[c] > k {
                    return Err(TaError::InvariantViolation {
                        automaton: auto.name.clone(),
                        location: auto.locs[raw.locs[a]].clone(),
                        max_admissible: 0,
                    });
                }
            }
        }
        Ok(())
    }

    /// Largest admissible delay with the automaton that bounds it, or `None`
    /// when no active invariant constrains time.
    fn max_delay(&self, raw: &TaRaw) -> Option<(u64, usize)> {
        let mut best: Option<(u64, usize)> = None;
        for (a, auto) in self.autos.iter().enumerate() {
            for &(c, k) in &auto.inv[raw.locs[a]] {
                let room = (k - raw.clocks[c]).max(0) as u64;
                if best.is_none_or(|(b, _)| room < b) {
                    best = Some((room, a));
                }
            }
        }
        best
    }

    pub(crate) fn delay_raw(&self, raw: &TaRaw, d: u64) -> Result<TaRaw, TaError> {
        if let Some((max, a)) = self.max_delay(raw) {
            if d > max {
                return Err(TaError::InvariantViolation {
                    automaton: self.autos[a].name.clone(),
                    location: self.autos[a].locs[raw.locs[a]].clone(),
                    max_admissible: max,
                });
            }
        }
        let mut next = raw.clone();
        for c in next.clocks.iter_mut() {
            *c += d as i64;
        }
        Ok(next)
    }

    /// One unconstrained step: every automaton may offer, the lowest
    /// `(automaton, edge)` among enabled edges fires, and time advances by
    /// one unit when nothing is enabled.
    pub(crate) fn step_raw(&self, raw: &TaRaw) -> Result<(TaRaw, StepLabel), TaError> {
        let all = vec![true; self.autos.len()];
        let offers = self.offers(raw, &all)?;
        let mut cands = Vec::new();
        for a in 0..self.autos.len() {
            for e in self.enabled(raw, &offers, a)? {
                cands.push((a, e));
            }
        }
        if let Some(&(a, e)) = cands.first() {
            let (next, fired) = self.fire(raw, &offers, a, e)?;
            return Ok((next, StepLabel::Fired { edges: self.names(&fired), tie: cands.len() > 1 }));
        }
        match self.max_delay(raw) {
            Some((0, _)) => Err(TaError::Deadlock { automaton: None }),
            _ => Ok((self.delay_raw(raw, 1)?, StepLabel::Delay(1))),
        }
    }

    fn names(&self, fired: &[(usize, usize)]) -> Vec<(String, String)> {
        fired.iter().map(|&(a, e)| (self.autos[a].name.clone(), self.autos[a].edges[e].id.clone())).collect()
    }

    /// Fires every enabled local edge of the auxiliary automata once.
    fn lapse(&self, raw: &mut TaRaw, visit: &mut impl FnMut(&TaRaw, EntryKind, &[(usize, usize)])) -> Result<bool, TaError> {
        let all = vec![true; self.autos.len()];
        let mut any = false;
        for a in 0..self.autos.len() {
            if self.autos[a].role.is_transformed() {
                continue;
            }
            let offers = self.offers(raw, &all)?;
            if let Some(&e) = self.enabled(raw, &offers, a)?.first() {
                let (next, fired) = self.fire(raw, &offers, a, e)?;
                *raw = next;
                visit(raw, EntryKind::Lapse, &fired);
                any = true;
            }
        }
        Ok(any)
    }

    /// Runs one macro-cycle under the lockstep policy. `may_offer` says which
    /// automata may offer sends this cycle. `visit` sees every new status.
    pub(crate) fn cycle_raw(
        &self,
        raw: &TaRaw,
        order: &[usize],
        may_offer: &[bool],
        period: u64,
        visit: &mut impl FnMut(&TaRaw, EntryKind, &[(usize, usize)]),
    ) -> Result<TaRaw, TaError> {
        let mut cur = raw.clone();
        for &ua in order {
            let offers = self.offers(&cur, may_offer)?;
            for (b, auto) in self.autos.iter().enumerate() {
                if b != ua && auto.role.is_transformed() {
                    if let Some(&e) = self.enabled(&cur, &offers, b)?.first() {
                        return Err(TaError::LockstepViolation { automaton: auto.name.clone(), edge: auto.edges[e].id.clone() });
                    }
                }
            }
            let en = self.enabled(&cur, &offers, ua)?;
            let e = match en.as_slice() {
                [] => return Err(TaError::Deadlock { automaton: Some(self.autos[ua].name.clone()) }),
                [e] => *e,
                many => {
                    return Err(TaError::NondeterministicChoice {
                        automaton: self.autos[ua].name.clone(),
                        edges: many.iter().map(|e| self.autos[ua].edges[*e].id.clone()).collect(),
                    })
                }
            };
            let (next, fired) = self.fire(&cur, &offers, ua, e)?;
            cur = next;
            visit(&cur, EntryKind::Step, &fired);
        }
        self.lapse(&mut cur, visit)?;
        let mut remaining = period;
        while remaining > 0 {
            let d = self.max_delay(&cur).map_or(remaining, |(m, _)| m.min(remaining));
            if d == 0 {
                if !self.lapse(&mut cur, visit)? {
                    return Err(TaError::Deadlock { automaton: None });
                }
                continue;
            }
            cur = self.delay_raw(&cur, d)?;
            visit(&cur, EntryKind::Delay(d), &[]);
            remaining -= d;
        }
        Ok(cur)
    }

    /// Which automata may offer in a cycle raising `events`.
    pub(crate) fn offer_mask(&self, events: Option<&BTreeSet<String>>) -> Vec<bool> {
        self.autos
            .iter()
            .map(|a| match &a.role {
                Role::EventAux { event } => events.is_some_and(|s| s.contains(event)),
                _ => true,
            })
            .collect()
    }

    pub(crate) fn check_schedule(&self, schedule: &Schedule) -> Result<(), TaError> {
        for e in schedule.cycles.values().flatten() {
            if !self.autos.iter().any(|a| matches!(&a.role, Role::EventAux { event } if event == e)) {
                return Err(TaError::Invalid(format!("schedule raises `{e}`, which has no event automaton")));
            }
        }
        Ok(())
    }

    /// Runs `horizon` lockstep cycles, reporting each new status.
    pub(crate) fn run_raw(
        &self,
        env: &EventEnv,
        horizon: u64,
        mut visit: impl FnMut(u64, &TaRaw, EntryKind, &[(usize, usize)]),
    ) -> Result<TaRaw, TaError> {
        let order = self.lockstep()?;
        self.check_schedule(&env.schedule)?;
        if env.cycle_period == 0 {
            return Err(TaError::Invalid("cycle period must be positive".into()));
        }
        let mut raw = self.initial_raw();
        for k in 0..horizon {
            let mask = self.offer_mask(env.schedule.events_at(k));
            raw = self.cycle_raw(&raw, &order, &mask, env.cycle_period, &mut |r, kind, f| visit(k, r, kind, f))?;
        }
        Ok(raw)
    }

    pub fn initial_status(&self) -> TaStatus {
        self.status_of(&self.initial_raw())
    }

    pub fn delay(&self, st: &TaStatus, d: u64) -> Result<TaStatus, TaError> {
        Ok(self.status_of(&self.delay_raw(&self.raw_of(st)?, d)?))
    }

    pub fn step(&self, st: &TaStatus) -> Result<(TaStatus, StepLabel), TaError> {
        let (next, label) = self.step_raw(&self.raw_of(st)?)?;
        Ok((self.status_of(&next), label))
    }

    /// Like [`TaEngine::run`] but keeps the trace recorded before a failure.
    pub fn run_partial(&self, env: &EventEnv, horizon: u64) -> (TaTrace, Option<TaError>) {
        let init = self.initial_raw();
        let mut trace = TaTrace {
            entries: vec![TaEntry { kind: EntryKind::Init, cycle: 0, micro: 0, status: self.status_of(&init), edges: Vec::new() }],
        };
        let mut micro = 0;
        let mut last_cycle = 0;
        let res = self.run_raw(env, horizon, |k, raw, kind, fired| {
            if k != last_cycle {
                last_cycle = k;
                micro = 0;
            }
            if kind == EntryKind::Step {
                micro += 1;
            }
            trace.entries.push(TaEntry { kind, cycle: k, micro, status: self.status_of(raw), edges: self.names(fired) });
        });
        (trace, res.err())
    }

    pub fn run(&self, env: &EventEnv, horizon: u64) -> Result<TaTrace, TaError> {
        match self.run_partial(env, horizon) {
            (t, None) => Ok(t),
            (_, Some(e)) => Err(e),
        }
    }

    /// Largest integer constant compared against each clock, for clamping.
    pub(crate) fn clock_ceilings(&self, ta: &TaNetwork) -> Vec<i64> {
        let mut out = vec![0; self.layout.clocks.len()];
        let mut note = |e: &Expr| {
            e.walk(&mut |x| {
                if let Expr::Bin(_, l, r) = x {
                    if let (Expr::Var(v), Expr::Int(k)) = (l.as_ref(), r.as_ref()) {
                        if let Some(c) = self.layout.clock(v) {
                            out[c] = out[c].max(*k);
                        }
                    }
                }
            })
        };
        for a in &ta.automata {
            for l in &a.locations {
                if let Some(i) = &l.invariant {
                    note(i);
                }
            }
            for e in &a.edges {
                if let Some(g) = &e.guard {
                    note(g);
                }
            }
        }
        out
    }
}

pub fn ta_initial_status(ta: &TaNetwork) -> Result<TaStatus, TaError> {
    Ok(TaEngine::new(ta)?.initial_status())
}

pub fn ta_delay(ta: &TaNetwork, st: &TaStatus, d: u64) -> Result<TaStatus, TaError> {
    TaEngine::new(ta)?.delay(st, d)
}

pub fn ta_step(ta: &TaNetwork, st: &TaStatus) -> Result<(TaStatus, StepLabel), TaError> {
    TaEngine::new(ta)?.step(st)
}

pub fn ta_run(ta: &TaNetwork, env: &EventEnv, horizon: u64) -> Result<TaTrace, TaError> {
    TaEngine::new(ta)?.run(env, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::parser::parse_network;
    use crate::sc::ScEngine;
    use crate::transform::{transform_all, transform_with, TransformOptions};

    fn fig2_ta() -> TaNetwork {
        transform_all(&parse_network(fixtures::FIG2).unwrap()).unwrap().0
    }

    fn env_with(events: &[(u64, &str)]) -> EventEnv {
        let mut s = Schedule::new();
        for (k, e) in events {
            s = s.raise(*k, e);
        }
        EventEnv::new(s)
    }

    #[test]
    fn first_cycle_mirrors_statechart() {
        let t = ta_run(&fig2_ta(), &EventEnv::default(), 1).unwrap();
        let steps: Vec<&TaEntry> = t.steps().collect();
        assert_eq!(steps.len(), 2);
        assert_eq!(steps[0].edges, [("Y1".to_string(), "t1".to_string())]);
        assert_eq!(steps[1].status.locations[..2], ["s1", "s3"]);
        assert_eq!(steps[1].status.valuation.get("x"), Some(crate::expr::Value::Int(5)));
        assert_eq!(steps[1].status.valuation.get("alpha"), Some(crate::expr::Value::Int(1)));
    }

    #[test]
    fn after_trigger_syncs_at_its_deadline() {
        let t = ta_run(&fig2_ta(), &EventEnv::default(), 6).unwrap();
        let fire = t.steps().find(|e| e.status.locations[1] == "s4").unwrap();
        assert_eq!((fire.cycle, fire.micro), (5, 2));
        assert_eq!(fire.edges[0], ("Y2".to_string(), "t6".to_string()));
        assert_eq!(fire.edges[1], ("Timer_after5s".to_string(), "after5s_fire".to_string()));
    }

    #[test]
    fn locations_agree_with_statechart_run() {
        let net = parse_network(fixtures::FIG2).unwrap();
        let env = env_with(&[(1, "eventA"), (4, "eventA"), (12, "eventA")]);
        let sc = ScEngine::new(&net).unwrap().run(&env, 25).unwrap();
        let ta = ta_run(&fig2_ta(), &env, 25).unwrap();
        let ta_states: Vec<Vec<String>> = ta.steps().map(|e| e.status.locations[..2].to_vec()).collect();
        let sc_states: Vec<Vec<String>> = sc.statuses.iter().skip(1).map(|st| st.states.clone()).collect();
        assert_eq!(ta_states, sc_states);
    }

    #[test]
    fn missing_priority_rule_is_nondeterministic() {
        let t = transform_with(&parse_network(fixtures::FIG2).unwrap(), &TransformOptions::skipping(6)).unwrap();
        let err = ta_run(&t.ta, &env_with(&[(1, "eventA")]), 4).unwrap_err();
        assert_eq!(err.terminal_class(), "NondeterministicChoice(Y1)");
    }

    #[test]
    fn missing_lockstep_rule_is_rejected() {
        let t = transform_with(&parse_network(fixtures::FIG2).unwrap(), &TransformOptions::skipping(7)).unwrap();
        assert!(matches!(ta_run(&t.ta, &EventEnv::default(), 1), Err(TaError::Invalid(_))));
    }

    #[test]
    fn delay_respects_invariants() {
        let ta = fig2_ta();
        let st = ta_initial_status(&ta).unwrap();
        let later = ta_delay(&ta, &st, 5).unwrap();
        assert_eq!(later.clocks["c1"], 5);
        let err = ta_delay(&ta, &later, 1).unwrap_err();
        assert!(matches!(err, TaError::InvariantViolation { max_admissible: 0, .. }), "{err:?}");
    }

    #[test]
    fn free_step_fires_lowest_enabled_edge() {
        let ta = fig2_ta();
        let (st, label) = ta_step(&ta, &ta_initial_status(&ta).unwrap()).unwrap();
        assert_eq!(label, StepLabel::Fired { edges: vec![("Y1".into(), "t1".into())], tie: false });
        assert_eq!(st.locations[0], "s1");
    }
}
