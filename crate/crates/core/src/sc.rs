//! Synchronous, deterministic execution of statechart networks.
//!
//! A macro-cycle runs one micro-step per chart in priority order. Each
//! micro-step fires the highest-priority enabled outgoing transition of the
//! active chart (applying `<exit; action; entry>`) or stutters. The lockstep
//! index advances with `Inc(α) = (α mod n) + 1`; the literal `(α+1) mod n`
//! would leave index 0 unreachable by any chart.
//!
//! Timing triggers follow the clocked encoding used by the transformation:
//! clocks start with the system, so `after τ` is raised once, in the cycle
//! whose start time equals τ, and `every τ` in each cycle starting at a
//! positive multiple of τ. Like events, a raised trigger is visible for that
//! one cycle only.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::compiled::{self, CExpr, CUpdate, Ctx, Layout};
use crate::eval::{CycleEnv, EvalError};
use crate::expr::{Trigger, TriggerKind};
use crate::model::{ExecutionTrace, Label, StatechartNetwork, SystemStatus};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ScError {
    #[error("network cannot be executed: {0}")]
    Invalid(String),
    #[error("in {chart}{}: {source}", .transition.as_ref().map(|t| format!(" transition {t}")).unwrap_or_default())]
    Eval { chart: String, transition: Option<String>, source: EvalError },
    #[error("status does not match the network: {0}")]
    BadStatus(String),
}

impl ScError {
    /// Comparable class of a runtime failure, shared with the automata side.
    pub fn terminal_class(&self) -> String {
        match self {
            ScError::Eval { source, .. } => eval_class(source),
            other => other.to_string(),
        }
    }
}

pub(crate) fn eval_class(e: &EvalError) -> String {
    match e {
        EvalError::DomainOverflow { var, .. } => format!("DomainOverflow({var})"),
        EvalError::DivisionByZero => "DivisionByZero".into(),
        EvalError::ArithmeticOverflow => "ArithmeticOverflow".into(),
        other => other.to_string(),
    }
}

/// Events raised per macro-cycle. Cycles not listed raise nothing.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Schedule {
    pub cycles: BTreeMap<u64, BTreeSet<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("schedule line {line}: {message}")]
pub struct ScheduleError {
    pub line: usize,
    pub message: String,
}

impl Schedule {
    pub fn new() -> Self {
        Schedule::default()
    }

    pub fn raise(mut self, cycle: u64, event: &str) -> Self {
        self.cycles.entry(cycle).or_default().insert(event.to_string());
        self
    }

    pub fn events_at(&self, cycle: u64) -> Option<&BTreeSet<String>> {
        self.cycles.get(&cycle)
    }

    /// Keeps only the cycles below `horizon`.
    pub fn truncated(&self, horizon: u64) -> Schedule {
        Schedule { cycles: self.cycles.range(..horizon).map(|(k, v)| (*k, v.clone())).collect() }
    }

    /// Parses lines of the form `cycle <k>: eventA, eventB`.
    pub fn parse(text: &str) -> Result<Schedule, ScheduleError> {
        let mut s = Schedule::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split("//").next().unwrap_or("").split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: &str| ScheduleError { line: i + 1, message: m.to_string() };
            let rest = line.strip_prefix("cycle").ok_or_else(|| err("expected `cycle <k>: events`"))?;
            let (k, evs) = rest.split_once(':').ok_or_else(|| err("missing `:`"))?;
            let k: u64 = k.trim().parse().map_err(|_| err("cycle index must be a non-negative integer"))?;
            let set = s.cycles.entry(k).or_default();
            for e in evs.split(',').map(str::trim).filter(|e| !e.is_empty()) {
                if !e.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(err(&format!("bad event name `{e}`")));
                }
                set.insert(e.to_string());
            }
        }
        Ok(s)
    }

    pub fn to_text(&self) -> String {
        self.cycles
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(k, v)| format!("cycle {k}: {}\n", v.iter().cloned().collect::<Vec<_>>().join(", ")))
            .collect()
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventEnv {
    pub schedule: Schedule,
    /// Time units per macro-cycle.
    pub cycle_period: u64,
}

impl EventEnv {
    pub fn new(schedule: Schedule) -> Self {
        EventEnv { schedule, cycle_period: 1 }
    }
}

impl Default for EventEnv {
    fn default() -> Self {
        EventEnv::new(Schedule::new())
    }
}

/// Per-trigger counters. For `after τ` the counter is the elapsed time,
/// saturated at τ+1. For `every τ` it is 0 before time first passes and
/// `((t-1) mod τ) + 1` afterwards, so it equals τ exactly at multiples.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimerState {
    pub counters: BTreeMap<Trigger, u64>,
}

impl TimerState {
    pub fn new(triggers: impl IntoIterator<Item = Trigger>) -> Self {
        TimerState { counters: triggers.into_iter().map(|t| (t, 0)).collect() }
    }

    pub fn raised(&self, t: &Trigger) -> bool {
        self.counters.get(t).is_some_and(|c| trigger_raised(*t, *c))
    }

    pub fn advance(&mut self, period: u64) {
        for (t, c) in self.counters.iter_mut() {
            *c = trigger_advance(*t, *c, period);
        }
    }

    pub fn raised_set(&self) -> BTreeSet<Trigger> {
        self.counters.keys().filter(|t| self.raised(t)).copied().collect()
    }
}

pub(crate) fn trigger_raised(t: Trigger, c: u64) -> bool {
    c == t.period
}

pub(crate) fn trigger_advance(t: Trigger, c: u64, period: u64) -> u64 {
    match t.kind {
        TriggerKind::After => (c + period).min(t.period + 1),
        TriggerKind::Every => (c + period - 1) % t.period + 1,
    }
}

struct CTrans {
    id: String,
    guard: CExpr,
    updates: Vec<CUpdate>,
    target: usize,
}

struct CChart {
    name: String,
    states: Vec<String>,
    initial: usize,
    /// Outgoing transitions per state, highest priority first.
    out: Vec<Vec<CTrans>>,
}

/// Raw status: state indices, slot values, lockstep index.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) struct Raw {
    pub states: Vec<usize>,
    pub vals: Vec<i64>,
    pub alpha: usize,
}

struct StepCtx<'a> {
    vals: &'a [i64],
    events: &'a [bool],
    raised: &'a [bool],
}

impl Ctx for StepCtx<'_> {
    fn slot(&self, i: usize) -> i64 {
        self.vals[i]
    }
    fn event(&self, i: usize) -> bool {
        self.events[i]
    }
    fn trigger(&self, i: usize) -> bool {
        self.raised[i]
    }
}

/// A network compiled for stepping.
pub struct ScEngine {
    pub(crate) layout: Layout,
    charts: Vec<CChart>,
}

impl ScEngine {
    pub fn new(net: &StatechartNetwork) -> Result<Self, ScError> {
        let mut layout = Layout::new(&net.variables);
        let mut charts = Vec::new();
        for c in &net.charts {
            let states: Vec<String> = c.states.iter().map(|s| s.name.clone()).collect();
            let idx = |n: &str| states.iter().position(|s| s == n).ok_or_else(|| ScError::Invalid(format!("unknown state `{n}`")));
            let initial = idx(&c.initial)?;
            let mut out = Vec::new();
            for s in &c.states {
                let mut ts = Vec::new();
                for t in c.outgoing(&s.name) {
                    let dst = c.state(&t.target).ok_or_else(|| ScError::Invalid(format!("unknown state `{}`", t.target)))?;
                    let seq = s.exit.then(&t.action).then(&dst.entry);
                    let err = |m: String| ScError::Invalid(format!("{}/{}: {m}", c.name, t.id));
                    ts.push(CTrans {
                        id: t.id.clone(),
                        guard: layout.compile_bool(&t.guard).map_err(err)?,
                        updates: layout.compile_actions(&seq).map_err(err)?,
                        target: idx(&t.target)?,
                    });
                }
                out.push(ts);
            }
            charts.push(CChart { name: c.name.clone(), states, initial, out });
        }
        Ok(ScEngine { layout, charts })
    }

    pub fn width(&self) -> usize {
        self.charts.len()
    }

    pub fn triggers(&self) -> &[Trigger] {
        &self.layout.triggers
    }

    pub fn initial_timers(&self) -> TimerState {
        TimerState::new(self.layout.triggers.iter().copied())
    }

    pub(crate) fn initial_raw(&self) -> Raw {
        Raw { states: self.charts.iter().map(|c| c.initial).collect(), vals: self.layout.initial_values(), alpha: 1 }
    }

    pub(crate) fn status_of(&self, raw: &Raw) -> SystemStatus {
        SystemStatus {
            states: raw.states.iter().zip(&self.charts).map(|(s, c)| c.states[*s].clone()).collect(),
            valuation: self.layout.valuation(&raw.vals),
            exec_index: raw.alpha as u32,
        }
    }

    pub(crate) fn raw_of(&self, st: &SystemStatus) -> Result<Raw, ScError> {
        if st.states.len() != self.charts.len() {
            return Err(ScError::BadStatus(format!("{} states for {} charts", st.states.len(), self.charts.len())));
        }
        let states = st
            .states
            .iter()
            .zip(&self.charts)
            .map(|(s, c)| c.states.iter().position(|x| x == s).ok_or_else(|| ScError::BadStatus(format!("`{s}` is not a state of `{}`", c.name))))
            .collect::<Result<_, _>>()?;
        let vals = self.layout.raw_values(&st.valuation).ok_or_else(|| ScError::BadStatus("valuation is not total".into()))?;
        let alpha = st.exec_index as usize;
        if alpha < 1 || alpha > self.charts.len() {
            return Err(ScError::BadStatus(format!("execution index {alpha} out of range")));
        }
        Ok(Raw { states, vals, alpha })
    }

    pub(crate) fn event_mask(&self, events: Option<&BTreeSet<String>>) -> Result<Vec<bool>, ScError> {
        let mut mask = vec![false; self.layout.events.len()];
        for e in events.into_iter().flatten() {
            let i = self.layout.event(e).ok_or_else(|| ScError::Invalid(format!("schedule raises undeclared event `{e}`")))?;
            mask[i] = true;
        }
        Ok(mask)
    }

    pub(crate) fn raised_mask(&self, timers: &[u64]) -> Vec<bool> {
        self.layout.triggers.iter().zip(timers).map(|(t, c)| trigger_raised(*t, *c)).collect()
    }

    pub(crate) fn timers_raw(&self, ts: &TimerState) -> Vec<u64> {
        self.layout.triggers.iter().map(|t| ts.counters.get(t).copied().unwrap_or(0)).collect()
    }

    pub(crate) fn timers_public(&self, raw: &[u64]) -> TimerState {
        TimerState { counters: self.layout.triggers.iter().copied().zip(raw.iter().copied()).collect() }
    }

    pub(crate) fn advance_raw(&self, timers: &mut [u64], period: u64) {
        for (t, c) in self.layout.triggers.iter().zip(timers.iter_mut()) {
            *c = trigger_advance(*t, *c, period);
        }
    }

    /// One micro-step of chart α. Returns the fired transition's id, or
    /// `None` for a stutter.
    pub(crate) fn step_raw(&self, raw: &Raw, events: &[bool], raised: &[bool]) -> Result<(Raw, Option<&str>), ScError> {
        let ci = raw.alpha - 1;
        let chart = &self.charts[ci];
        let n = self.charts.len();
        let mut next = raw.clone();
        next.alpha = raw.alpha % n + 1;
        for t in &chart.out[raw.states[ci]] {
            let cx = StepCtx { vals: &raw.vals, events, raised };
            let on = t.guard.holds(&cx).map_err(|e| self.eval_err(ci, Some(&t.id), e))?;
            if on {
                compiled::apply(&t.updates, &self.layout, &mut next.vals, &mut [], |e, vals, _| {
                    e.eval(&StepCtx { vals, events, raised })
                })
                .map_err(|e| self.eval_err(ci, Some(&t.id), e))?;
                next.states[ci] = t.target;
                return Ok((next, Some(&t.id)));
            }
        }
        Ok((next, None))
    }

    fn eval_err(&self, ci: usize, t: Option<&str>, e: EvalError) -> ScError {
        ScError::Eval { chart: self.charts[ci].name.clone(), transition: t.map(str::to_string), source: e }
    }

    /// Runs one macro-cycle from a status with α = 1, calling `visit` after
    /// every micro-step. Advances `timers` by `period` at the end.
    pub(crate) fn cycle_raw(
        &self,
        raw: &Raw,
        events: &[bool],
        timers: &mut [u64],
        period: u64,
        mut visit: impl FnMut(&Raw, Option<&str>),
    ) -> Result<Raw, ScError> {
        let raised = self.raised_mask(timers);
        let mut cur = raw.clone();
        for _ in 0..self.charts.len() {
            let (next, label) = self.step_raw(&cur, events, &raised)?;
            visit(&next, label);
            cur = next;
        }
        self.advance_raw(timers, period);
        Ok(cur)
    }

    pub fn initial_status(&self) -> SystemStatus {
        self.status_of(&self.initial_raw())
    }

    pub fn micro_step(&self, st: &SystemStatus, env: &CycleEnv) -> Result<(SystemStatus, Label), ScError> {
        let raw = self.raw_of(st)?;
        let events = self.event_mask(Some(&env.events))?;
        let raised: Vec<bool> = self.layout.triggers.iter().map(|t| env.triggers.contains(t)).collect();
        let (next, label) = self.step_raw(&raw, &events, &raised)?;
        Ok((self.status_of(&next), to_label(label)))
    }

    pub fn macro_cycle(
        &self,
        st: &SystemStatus,
        events: &BTreeSet<String>,
        timers: &TimerState,
        period: u64,
    ) -> Result<(SystemStatus, Vec<Label>, TimerState), ScError> {
        let raw = self.raw_of(st)?;
        if raw.alpha != 1 {
            return Err(ScError::BadStatus(format!("macro-cycle must start at α = 1, not {}", raw.alpha)));
        }
        let mask = self.event_mask(Some(events))?;
        let mut t = self.timers_raw(timers);
        let mut labels = Vec::new();
        let end = self.cycle_raw(&raw, &mask, &mut t, period, |_, l| labels.push(to_label(l)))?;
        Ok((self.status_of(&end), labels, self.timers_public(&t)))
    }

    /// Runs `horizon` macro-cycles. A runtime failure ends the trace early
    /// and is returned alongside it.
    pub fn run_partial(&self, env: &EventEnv, horizon: u64) -> (ExecutionTrace, Option<ScError>) {
        let mut raw = self.initial_raw();
        let mut trace = ExecutionTrace { statuses: vec![self.status_of(&raw)], labels: Vec::new(), width: self.charts.len() };
        if env.cycle_period == 0 {
            return (trace, Some(ScError::Invalid("cycle period must be positive".into())));
        }
        let mut timers = vec![0; self.layout.triggers.len()];
        for k in 0..horizon {
            let mask = match self.event_mask(env.schedule.events_at(k)) {
                Ok(m) => m,
                Err(e) => return (trace, Some(e)),
            };
            let res = self.cycle_raw(&raw, &mask, &mut timers, env.cycle_period, |r, l| {
                trace.statuses.push(self.status_of(r));
                trace.labels.push(to_label(l));
            });
            match res {
                Ok(r) => raw = r,
                Err(e) => return (trace, Some(e)),
            }
        }
        (trace, None)
    }

    pub fn run(&self, env: &EventEnv, horizon: u64) -> Result<ExecutionTrace, ScError> {
        match self.run_partial(env, horizon) {
            (t, None) => Ok(t),
            (_, Some(e)) => Err(e),
        }
    }
}

fn to_label(l: Option<&str>) -> Label {
    l.map_or(Label::Stutter, |t| Label::Fired(t.to_string()))
}

pub fn initial_status(net: &StatechartNetwork) -> Result<SystemStatus, ScError> {
    Ok(ScEngine::new(net)?.initial_status())
}

pub fn micro_step(net: &StatechartNetwork, st: &SystemStatus, env: &CycleEnv) -> Result<(SystemStatus, Label), ScError> {
    ScEngine::new(net)?.micro_step(st, env)
}

pub fn macro_cycle(
    net: &StatechartNetwork,
    st: &SystemStatus,
    events: &BTreeSet<String>,
    timers: &TimerState,
    period: u64,
) -> Result<(SystemStatus, Vec<Label>, TimerState), ScError> {
    ScEngine::new(net)?.macro_cycle(st, events, timers, period)
}

pub fn run(net: &StatechartNetwork, env: &EventEnv, horizon: u64) -> Result<ExecutionTrace, ScError> {
    ScEngine::new(net)?.run(env, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Value;
    use crate::fixtures;
    use crate::model::Valuation;
    use crate::parser::parse_network;

    fn fig2() -> StatechartNetwork {
        parse_network(fixtures::FIG2).unwrap()
    }

    fn status(states: [&str; 2], x: i64, alpha: u32) -> SystemStatus {
        SystemStatus {
            states: states.iter().map(|s| s.to_string()).collect(),
            valuation: Valuation::default().with("x", Value::Int(x)),
            exec_index: alpha,
        }
    }

    #[test]
    fn initial() {
        assert_eq!(initial_status(&fig2()).unwrap(), status(["s0_1", "s0_2"], 0, 1));
    }

    #[test]
    fn first_micro_step_runs_entry_action() {
        let (st, l) = micro_step(&fig2(), &status(["s0_1", "s0_2"], 0, 1), &CycleEnv::default()).unwrap();
        assert_eq!(st, status(["s1", "s0_2"], 5, 2));
        assert_eq!(l, Label::Fired("t1".into()));
    }

    #[test]
    fn stutter_without_event() {
        let (st, l) = micro_step(&fig2(), &status(["s1", "s0_2"], 5, 1), &CycleEnv::default()).unwrap();
        assert_eq!(st, status(["s1", "s0_2"], 5, 2));
        assert_eq!(l, Label::Stutter);
    }

    #[test]
    fn higher_priority_wins() {
        let (st, l) = micro_step(&fig2(), &status(["s2", "s3"], 5, 1), &CycleEnv::default()).unwrap();
        assert_eq!(l, Label::Fired("t3".into()));
        // exit x=2, action x=0, entry x=5
        assert_eq!(st, status(["s1", "s3"], 5, 2));
    }

    #[test]
    fn first_macro_cycle() {
        let net = fig2();
        let eng = ScEngine::new(&net).unwrap();
        let (st, labels, _) =
            eng.macro_cycle(&eng.initial_status(), &BTreeSet::new(), &eng.initial_timers(), 1).unwrap();
        assert_eq!(st, status(["s1", "s3"], 5, 1));
        assert_eq!(labels, vec![Label::Fired("t1".into()), Label::Fired("t5".into())]);
    }

    #[test]
    fn event_moves_y1() {
        let trace = run(&fig2(), &EventEnv::new(Schedule::new().raise(2, "eventA")), 3).unwrap();
        assert_eq!(trace.last().states[0], "s2");
        assert_eq!(trace.statuses.len(), 7);
    }

    #[test]
    fn horizon_zero() {
        let trace = run(&fig2(), &EventEnv::default(), 0).unwrap();
        assert_eq!(trace.statuses.len(), 1);
        assert!(trace.labels.is_empty());
    }

    #[test]
    fn after_trigger_fires_at_five() {
        let trace = run(&fig2(), &EventEnv::default(), 20).unwrap();
        let first = trace.statuses.iter().position(|s| s.states[1] == "s4").unwrap();
        // Cycle 5, micro-step 2.
        assert_eq!(crate::model::position(first, 2), (5, 2));
        // every 10s brings Y2 back at cycle 10; after is one-shot.
        assert_eq!(trace.statuses[2 * 10 + 2].states[1], "s3");
        assert_eq!(trace.last().states[1], "s3");
    }

    #[test]
    fn timer_counters() {
        let a = Trigger::after(3);
        let e = Trigger::every(3);
        let mut ts = TimerState::new([a, e]);
        let mut fired = Vec::new();
        for t in 0..10 {
            fired.push((t, ts.raised(&a), ts.raised(&e)));
            ts.advance(1);
        }
        let after: Vec<u64> = fired.iter().filter(|f| f.1).map(|f| f.0).collect();
        let every: Vec<u64> = fired.iter().filter(|f| f.2).map(|f| f.0).collect();
        assert_eq!(after, vec![3]);
        assert_eq!(every, vec![3, 6, 9]);
    }

    #[test]
    fn schedule_round_trip() {
        let s = Schedule::parse("cycle 2: eventA, eventB\n// note\ncycle 0: eventA\n").unwrap();
        assert_eq!(s.to_text(), "cycle 0: eventA\ncycle 2: eventA, eventB\n");
        assert_eq!(Schedule::parse(&s.to_text()).unwrap(), s);
        assert!(Schedule::parse("cycle x: a").is_err());
    }

    #[test]
    fn domain_overflow_is_reported() {
        let src = "var x: int[0..3] = 3;\nstatechart A priority 1 { state a; state b; initial a; transition t: a -> b when true; transition u: b -> b when true do { x := x + 1; }; }";
        let net = parse_network(src).unwrap();
        let (trace, err) = ScEngine::new(&net).unwrap().run_partial(&EventEnv::default(), 5);
        assert_eq!(trace.statuses.len(), 2);
        assert_eq!(err.unwrap().terminal_class(), "DomainOverflow(x)");
    }

    #[test]
    fn dump_format() {
        let trace = run(&fig2(), &EventEnv::default(), 1).unwrap();
        assert_eq!(
            trace.dump(),
            "0.0 | (s0_1,s0_2) | x=0 | INIT\n0.1 | (s1,s0_2) | x=5 | t1\n0.2 | (s1,s3) | x=5 | t5\n"
        );
    }
}
