//! Bounded explicit-state checking of `A[] chart.state imply cond`.
//!
//! Stepping is deterministic once a cycle's events are fixed, so the search
//! branches only on which subset of the declared events each cycle raises.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::compiled::{CExpr, Layout};
use crate::expr::Expr;
use crate::model::{ExecutionTrace, StatechartNetwork, SystemStatus, VarKind};
use crate::parser::{parse_expr, resolve_names};
use crate::sc::{EventEnv, Raw, ScEngine, ScError, Schedule};
use crate::ta::{EntryKind, TaEngine, TaError, TaNetwork, TaRaw};
use crate::transform::TransformMap;

/// Default cap on distinct cycle-boundary statuses.
pub const DEFAULT_BUDGET: usize = 2_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("property line {line}: {message}")]
    Property { line: usize, message: String },
    #[error("property {name}: {message}")]
    UnknownReference { name: String, message: String },
    #[error("variable `{0}` has no bounded domain")]
    Unbounded(String),
    #[error("state space budget of {0} statuses exceeded")]
    StateSpaceBudgetExceeded(usize),
    #[error(transparent)]
    Statechart(#[from] ScError),
    #[error(transparent)]
    Automata(#[from] TaError),
    #[error("automata-side counterexample does not replay on the statechart side: {0}")]
    SideMismatch(String),
}

/// `A[] chart.state imply condition`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafetyProperty {
    pub name: String,
    pub chart: String,
    pub state: String,
    pub condition: Expr,
    /// The query as written, emitted verbatim to query files.
    pub text: String,
}

impl fmt::Display for SafetyProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl SafetyProperty {
    pub fn parse(line: &str, name: &str) -> Result<SafetyProperty, String> {
        let text = line.trim();
        let rest = text.strip_prefix("A[]").ok_or("expected `A[] <chart>.<state> imply <expr>`")?.trim_start();
        let (lhs, cond) = rest.split_once(" imply ").ok_or("missing `imply`")?;
        let (chart, state) = lhs.trim().split_once('.').ok_or("expected `<chart>.<state>` before `imply`")?;
        let ident = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !ident(chart) || !ident(state) {
            return Err(format!("bad state reference `{}`", lhs.trim()));
        }
        let condition = parse_expr(cond).map_err(|d| d.message)?;
        Ok(SafetyProperty {
            name: name.to_string(),
            chart: chart.to_string(),
            state: state.to_string(),
            condition,
            text: text.to_string(),
        })
    }

    /// Checks that the chart, state and variables exist in `net`.
    pub fn check(&self, net: &StatechartNetwork) -> Result<(), VerifyError> {
        let err = |m: String| VerifyError::UnknownReference { name: self.name.clone(), message: m };
        let chart = net.chart(&self.chart).ok_or_else(|| err(format!("unknown chart `{}`", self.chart)))?;
        chart.state(&self.state).ok_or_else(|| err(format!("unknown state `{}.{}`", self.chart, self.state)))?;
        let cond = resolve_names(&self.condition, &net.variables);
        if cond.contains(|x| matches!(x, Expr::Event(_) | Expr::Trigger(_))) {
            return Err(err("condition may only mention data variables".into()));
        }
        for v in cond.vars() {
            if !net.var(&v).is_some_and(|d| d.kind.is_data()) {
                return Err(err(format!("unknown variable `{v}`")));
            }
        }
        Ok(())
    }
}

/// Parses a property file: one query per line, `//` comments. A comment of
/// the form `// P1: ...` names the next query; otherwise queries are named
/// `P<k>` by position.
pub fn parse_properties(text: &str) -> Result<Vec<SafetyProperty>, VerifyError> {
    let mut out = Vec::new();
    let mut pending: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(c) = line.strip_prefix("//") {
            let c = c.trim();
            if let Some((n, _)) = c.split_once(':') {
                if !n.is_empty() && n.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_') {
                    pending = Some(n.to_string());
                }
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let name = pending.take().unwrap_or_else(|| format!("P{}", out.len() + 1));
        out.push(SafetyProperty::parse(line, &name).map_err(|message| VerifyError::Property { line: i + 1, message })?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub property: String,
    /// Events per cycle along the path, in the schedule text format.
    pub schedule: String,
    /// Statechart trace from the initial status to the violating one.
    pub trace: ExecutionTrace,
}

impl Counterexample {
    pub fn violating(&self) -> &SystemStatus {
        self.trace.last()
    }

    /// Property name followed by the trace dump.
    pub fn dump(&self) -> String {
        format!("property {}\n{}", self.property, self.trace.dump())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "lowercase")]
pub enum Outcome {
    Holds,
    Violated(Counterexample),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub property: String,
    pub outcome: Outcome,
    /// Distinct cycle-boundary statuses explored.
    pub explored: usize,
    /// Depth at which the search stopped; less than the bound on a fixpoint.
    pub depth: u64,
}

impl PropertyResult {
    pub fn holds(&self) -> bool {
        self.outcome == Outcome::Holds
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VerifyOptions {
    pub max_cycles: u64,
    pub budget: usize,
}

impl VerifyOptions {
    pub fn new(max_cycles: u64) -> Self {
        VerifyOptions { max_cycles, budget: DEFAULT_BUDGET }
    }
}

fn check_bounded(net: &StatechartNetwork) -> Result<(), VerifyError> {
    match net.variables.iter().find(|v| matches!(v.kind, VarKind::Int { bounds: None })) {
        Some(v) => Err(VerifyError::Unbounded(v.name.clone())),
        None => Ok(()),
    }
}

fn event_masks(width: usize) -> Vec<Vec<bool>> {
    (0..1u64 << width).map(|m| (0..width).map(|b| m >> b & 1 == 1).collect()).collect()
}

fn schedule_of(layout: &Layout, masks: &[Vec<bool>], path: &[usize]) -> Schedule {
    let mut s = Schedule::new();
    for (k, &m) in path.iter().enumerate() {
        for (i, on) in masks[m].iter().enumerate() {
            if *on {
                s = s.raise(k as u64, &layout.events[i]);
            }
        }
    }
    s
}

/// Search tree node: parent index and the event mask that led here.
struct Node<S> {
    key: S,
    parent: usize,
    mask: usize,
}

fn path_to<S>(nodes: &[Node<S>], mut i: usize) -> Vec<usize> {
    let mut path = Vec::new();
    while i != 0 {
        path.push(nodes[i].mask);
        i = nodes[i].parent;
    }
    path.reverse();
    path
}

struct Expansion<S> {
    children: Vec<(usize, S)>,
    /// `(micro index, mask)` of the earliest violation in this cycle.
    violation: Option<(usize, usize)>,
}

/// Layered breadth-first search shared by both sides. `expand` runs one
/// cycle from a status under a mask and reports the successor and the micro
/// index of the first violating status, if any.
fn bfs<S, F>(init: S, init_bad: bool, masks: usize, opts: VerifyOptions, expand: F) -> Result<Search<S>, VerifyError>
where
    S: Clone + Eq + std::hash::Hash + Send + Sync,
    F: Fn(&S, usize) -> Result<(S, Option<usize>), VerifyError> + Sync,
{
    let mut nodes = vec![Node { key: init.clone(), parent: 0, mask: 0 }];
    let mut seen: HashMap<S, usize> = HashMap::from([(init, 0)]);
    if init_bad {
        return Ok(Search { nodes, violation: Some((0, None)), depth: 0 });
    }
    let mut frontier = vec![0usize];
    let mut depth = 0;
    while depth < opts.max_cycles && !frontier.is_empty() {
        depth += 1;
        let expansions: Vec<Expansion<S>> = frontier
            .par_iter()
            .map(|&i| {
                let mut ex = Expansion { children: Vec::with_capacity(masks), violation: None };
                for m in 0..masks {
                    let (next, bad) = expand(&nodes[i].key, m)?;
                    if let Some(micro) = bad {
                        if ex.violation.is_none_or(|(b, _)| micro < b) {
                            ex.violation = Some((micro, m));
                        }
                    }
                    ex.children.push((m, next));
                }
                Ok(ex)
            })
            .collect::<Result<_, VerifyError>>()?;

        // Earliest violating micro-step in this layer; ties go to queue order.
        let best = frontier
            .iter()
            .zip(&expansions)
            .filter_map(|(&i, ex)| ex.violation.map(|(micro, m)| (micro, i, m)))
            .min_by_key(|(micro, _, _)| *micro);
        if let Some((micro, parent, mask)) = best {
            nodes.push(Node { key: nodes[parent].key.clone(), parent, mask });
            return Ok(Search { violation: Some((nodes.len() - 1, Some(micro))), nodes, depth });
        }

        let mut next = Vec::new();
        for (&i, ex) in frontier.iter().zip(expansions) {
            for (m, s) in ex.children {
                if !seen.contains_key(&s) {
                    if nodes.len() >= opts.budget {
                        return Err(VerifyError::StateSpaceBudgetExceeded(opts.budget));
                    }
                    seen.insert(s.clone(), nodes.len());
                    next.push(nodes.len());
                    nodes.push(Node { key: s, parent: i, mask: m });
                }
            }
        }
        frontier = next;
    }
    Ok(Search { nodes, violation: None, depth })
}

struct Search<S> {
    nodes: Vec<Node<S>>,
    /// Node whose incoming cycle violates, and the micro index within it
    /// (`None` for the initial status).
    violation: Option<(usize, Option<usize>)>,
    depth: u64,
}

struct Condition {
    chart: usize,
    state: usize,
    cond: CExpr,
}

impl Condition {
    fn new(net: &StatechartNetwork, layout: &Layout, prop: &SafetyProperty) -> Result<Self, VerifyError> {
        prop.check(net)?;
        let chart = net.charts.iter().position(|c| c.name == prop.chart).expect("checked");
        let state = net.charts[chart].state_index(&prop.state).expect("checked");
        let cond = layout
            .clone()
            .compile_bool(&resolve_names(&prop.condition, &net.variables))
            .map_err(|message| VerifyError::UnknownReference { name: prop.name.clone(), message })?;
        Ok(Condition { chart, state, cond })
    }

    fn violated(&self, state: usize, vals: &[i64]) -> Result<bool, VerifyError> {
        if state != self.state {
            return Ok(false);
        }
        Ok(!self.cond.holds(vals).map_err(|e| ScError::Eval { chart: "property".into(), transition: None, source: e })?)
    }
}

/// Replays `path` on the statechart side and cuts the trace at the first
/// violating status.
fn counterexample(
    eng: &ScEngine,
    net: &StatechartNetwork,
    prop: &SafetyProperty,
    masks: &[Vec<bool>],
    path: &[usize],
) -> Result<Option<Counterexample>, VerifyError> {
    let schedule = schedule_of(&eng.layout, masks, path);
    let mut trace = eng.run(&EventEnv::new(schedule.clone()), path.len() as u64)?;
    let ci = net.charts.iter().position(|c| c.name == prop.chart).expect("checked");
    let cond = resolve_names(&prop.condition, &net.variables);
    let cut = trace.statuses.iter().position(|s| {
        s.states[ci] == prop.state && crate::eval::eval_expr(&cond, &s.valuation, &Default::default()).ok() != Some(crate::expr::Value::Bool(true))
    });
    let Some(cut) = cut else { return Ok(None) };
    trace.statuses.truncate(cut + 1);
    trace.labels.truncate(cut);
    Ok(Some(Counterexample { property: prop.name.clone(), schedule: schedule.to_text(), trace }))
}

/// Every status (including intermediate micro-steps) reachable within
/// `max_cycles` cycles under any choice of events per cycle.
pub fn reachable(net: &StatechartNetwork, opts: VerifyOptions) -> Result<BTreeSet<SystemStatus>, VerifyError> {
    check_bounded(net)?;
    let eng = ScEngine::new(net)?;
    let masks = event_masks(eng.layout.events.len());
    let init = (eng.initial_raw(), vec![0u64; eng.layout.triggers.len()]);
    let s = bfs(init, false, masks.len(), opts, |(raw, timers), m| {
        let mut t = timers.clone();
        let next = eng.cycle_raw(raw, &masks[m], &mut t, 1, |_, _| {})?;
        Ok(((next, t), None))
    })?;
    let mut out: BTreeSet<SystemStatus> = s.nodes.iter().map(|n| eng.status_of(&n.key.0)).collect();
    // Intermediate statuses: re-run every cycle that found a new status.
    for n in s.nodes.iter().skip(1) {
        let (raw, timers) = &s.nodes[n.parent].key;
        let mut t = timers.clone();
        eng.cycle_raw(raw, &masks[n.mask], &mut t, 1, |r, _| {
            out.insert(eng.status_of(r));
        })?;
    }
    Ok(out)
}

/// Checks one property on the statechart side.
pub fn check_invariant(net: &StatechartNetwork, prop: &SafetyProperty, opts: VerifyOptions) -> Result<PropertyResult, VerifyError> {
    check_bounded(net)?;
    let eng = ScEngine::new(net)?;
    let cond = Condition::new(net, &eng.layout, prop)?;
    let masks = event_masks(eng.layout.events.len());
    let init = (eng.initial_raw(), vec![0u64; eng.layout.triggers.len()]);
    let init_bad = cond.violated(init.0.states[cond.chart], &init.0.vals)?;
    let s = bfs(init, init_bad, masks.len(), opts, |(raw, timers): &(Raw, Vec<u64>), m| {
        let mut t = timers.clone();
        let mut micro = 0;
        let mut bad = None;
        let mut err = None;
        let next = eng.cycle_raw(raw, &masks[m], &mut t, 1, |r, _| {
            micro += 1;
            if bad.is_none() {
                match cond.violated(r.states[cond.chart], &r.vals) {
                    Ok(true) => bad = Some(micro),
                    Ok(false) => {}
                    Err(e) => err = Some(e),
                }
            }
        })?;
        if let Some(e) = err {
            return Err(e);
        }
        Ok(((next, t), bad))
    })?;
    finish(&eng, net, prop, &masks, s)
}

fn finish<S>(
    eng: &ScEngine,
    net: &StatechartNetwork,
    prop: &SafetyProperty,
    masks: &[Vec<bool>],
    s: Search<S>,
) -> Result<PropertyResult, VerifyError> {
    let explored = s.nodes.len() - usize::from(s.violation.is_some_and(|(_, m)| m.is_some()));
    let outcome = match s.violation {
        None => Outcome::Holds,
        Some((node, _)) => {
            let path = path_to(&s.nodes, node);
            let cex = counterexample(eng, net, prop, masks, &path)?
                .ok_or_else(|| VerifyError::SideMismatch(schedule_of(&eng.layout, masks, &path).to_text()))?;
            Outcome::Violated(cex)
        }
    };
    Ok(PropertyResult { property: prop.name.clone(), outcome, explored, depth: s.depth })
}

/// Checks one property on the transformed network: the search runs over
/// automata statuses, each lockstep step is projected to chart states
/// through `map`, and a counterexample found there is replayed on the
/// statechart side.
pub fn check_invariant_ta(
    net: &StatechartNetwork,
    ta: &TaNetwork,
    map: &TransformMap,
    prop: &SafetyProperty,
    opts: VerifyOptions,
) -> Result<PropertyResult, VerifyError> {
    check_bounded(net)?;
    let sc = ScEngine::new(net)?;
    let eng = TaEngine::new(ta)?;
    let order = eng.lockstep()?;
    let cond = Condition::new(net, &sc.layout, prop)?;

    let auto_name = map.automaton_of(&prop.chart).ok_or_else(|| VerifyError::SideMismatch(format!("chart `{}` is not mapped", prop.chart)))?;
    let ai = eng.automaton_index(auto_name).ok_or_else(|| VerifyError::SideMismatch(format!("no automaton `{auto_name}`")))?;
    let loc = eng
        .location_index(ai, &prop.state)
        .and_then(|l| map.state_of(auto_name, eng.location_name(ai, l)).map(|_| l))
        .ok_or_else(|| VerifyError::SideMismatch(format!("no location for `{}.{}`", prop.chart, prop.state)))?;
    // Data slots of the original variables, in statechart layout order.
    let slots: Vec<usize> = sc
        .layout
        .slots
        .iter()
        .map(|s| {
            let t = map.variables.iter().find(|(a, _)| *a == s.name).map(|(_, t)| t.as_str()).unwrap_or(&s.name);
            eng.layout.slot(t).ok_or_else(|| VerifyError::SideMismatch(format!("variable `{t}` is missing")))
        })
        .collect::<Result<_, _>>()?;
    let violated = |r: &TaRaw| -> Result<bool, VerifyError> {
        let vals: Vec<i64> = slots.iter().map(|&s| r.vals[s]).collect();
        cond.violated(if r.locs[ai] == loc { cond.state } else { usize::MAX }, &vals)
    };

    let ceilings = eng.clock_ceilings(ta);
    let clamp = |mut r: TaRaw| {
        for (c, k) in r.clocks.iter_mut().zip(&ceilings) {
            *c = (*c).min(k + 1);
        }
        r
    };
    let events: Vec<String> = sc.layout.events.clone();
    let masks = event_masks(events.len());
    let offer: Vec<Vec<bool>> = masks
        .iter()
        .map(|m| {
            let set: BTreeSet<String> = events.iter().zip(m).filter(|(_, on)| **on).map(|(e, _)| e.clone()).collect();
            eng.offer_mask(Some(&set))
        })
        .collect();
    let init = eng.initial_raw();
    let init_bad = violated(&init)?;
    let s = bfs(init, init_bad, masks.len(), opts, |raw: &TaRaw, m| {
        let mut micro = 0;
        let mut bad = None;
        let mut err = None;
        let next = eng.cycle_raw(raw, &order, &offer[m], 1, &mut |r, kind, _| {
            if kind == EntryKind::Step {
                micro += 1;
                if bad.is_none() {
                    match violated(r) {
                        Ok(true) => bad = Some(micro),
                        Ok(false) => {}
                        Err(e) => err = Some(e),
                    }
                }
            }
        })?;
        if let Some(e) = err {
            return Err(e);
        }
        Ok((clamp(next), bad))
    })?;
    finish(&sc, net, prop, &masks, s)
}

/// Checks each property in order.
pub fn check_all(net: &StatechartNetwork, props: &[SafetyProperty], opts: VerifyOptions) -> Result<Vec<PropertyResult>, VerifyError> {
    props.iter().map(|p| check_invariant(net, p, opts)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Value;
    use crate::fixtures;
    use crate::model::Valuation;
    use crate::parser::parse_network;

    fn props() -> Vec<SafetyProperty> {
        parse_properties(fixtures::CARDIAC_PROPS).unwrap()
    }

    #[test]
    fn property_file_names_queries() {
        let p = props();
        assert_eq!(p.len(), 2);
        assert_eq!(p[0].name, "P1");
        assert_eq!(p[0].text, "A[] Treatment.ActivateDefibrillaotr imply Breath == 0 && Rhythm == 0");
        assert_eq!(p[1].state, "InjectEPI");
    }

    #[test]
    fn zero_cycles_reach_only_the_initial_status() {
        let net = parse_network(fixtures::FIG2).unwrap();
        let r = reachable(&net, VerifyOptions::new(0)).unwrap();
        assert_eq!(r.len(), 1);
    }

    #[test]
    fn fig2_reaches_s2_s3() {
        let net = parse_network(fixtures::FIG2).unwrap();
        let r = reachable(&net, VerifyOptions::new(10)).unwrap();
        let want = SystemStatus {
            states: vec!["s2".into(), "s3".into()],
            valuation: Valuation::default().with("x", Value::Int(5)),
            exec_index: 1,
        };
        assert!(r.contains(&want));
    }

    #[test]
    fn unbounded_variable_is_rejected() {
        let net = parse_network("var y: int = 0;\nstatechart A priority 1 { state a; initial a; }").unwrap();
        assert_eq!(reachable(&net, VerifyOptions::new(1)), Err(VerifyError::Unbounded("y".into())));
    }

    #[test]
    fn state_beyond_bound_holds_vacuously() {
        let net = parse_network(fixtures::FIG2).unwrap();
        let p = SafetyProperty::parse("A[] Y2.s4 imply x == 99", "Q").unwrap();
        assert!(check_invariant(&net, &p, VerifyOptions::new(4)).unwrap().holds());
        let p = SafetyProperty::parse("A[] Y2.s4 imply x == 99", "Q").unwrap();
        assert!(!check_invariant(&net, &p, VerifyOptions::new(8)).unwrap().holds());
    }

    #[test]
    fn unknown_state_is_a_validation_error() {
        let net = parse_network(fixtures::FIG2).unwrap();
        let p = SafetyProperty::parse("A[] Y1.nowhere imply x == 0", "Q").unwrap();
        assert!(matches!(check_invariant(&net, &p, VerifyOptions::new(3)), Err(VerifyError::UnknownReference { .. })));
    }

    #[test]
    fn counterexample_replays_and_is_short() {
        let net = parse_network(fixtures::FIG2).unwrap();
        let p = SafetyProperty::parse("A[] Y1.s2 imply x == 0", "Q").unwrap();
        let r = check_invariant(&net, &p, VerifyOptions::new(10)).unwrap();
        let Outcome::Violated(c) = r.outcome else { panic!("expected violation") };
        assert_eq!(c.schedule, "cycle 1: eventA\n");
        assert_eq!(c.violating().states[0], "s2");
        assert_eq!(c.trace.statuses.len(), 4);
    }
}
