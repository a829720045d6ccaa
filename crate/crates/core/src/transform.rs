//! Statechart network to timed-automata network, one rule at a time.
//!
//! Each rule checks the stage marker left by its predecessor, so rules run
//! in order and a finished network cannot be transformed again.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{ActionSeq, Update};
use crate::eval::compiled::{Ctx, Layout};
use crate::expr::{BinOp, Expr, Trigger, TriggerKind};
use crate::model::{StatechartNetwork, VarDecl, VarKind};
use crate::ta::{Automaton, Edge, Location, Role, TaNetwork};

pub const FINAL_STAGE: u8 = 7;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error("rule {rule} expects a stage-{expected} network, got stage {found}")]
    StageMismatch { rule: u8, expected: u8, found: u8 },
    #[error("there is no rule {0}")]
    UnknownRule(u8),
    #[error("rule 1 cannot be skipped")]
    CannotSkipInitialization,
    #[error("{0}")]
    Inconsistent(String),
}

/// `owner.name`: a state of a chart or a location of an automaton, a
/// transition or an edge.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ElemRef {
    pub owner: String,
    pub name: String,
}

impl ElemRef {
    pub fn new(owner: &str, name: &str) -> Self {
        ElemRef { owner: owner.to_string(), name: name.to_string() }
    }
}

/// Target elements with no source counterpart.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AuxElement {
    EventAutomaton(String),
    TimerAutomaton(String),
    SelfLoop(ElemRef),
    IndexVar(String),
    Clock(String),
    Channel(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformMap {
    pub charts: Vec<(String, String)>,
    pub states: Vec<(ElemRef, ElemRef)>,
    pub transitions: Vec<(ElemRef, ElemRef)>,
    pub variables: Vec<(String, String)>,
    pub aux: Vec<AuxElement>,
}

impl TransformMap {
    pub fn automaton_of(&self, chart: &str) -> Option<&str> {
        self.charts.iter().find(|(c, _)| c == chart).map(|(_, a)| a.as_str())
    }

    pub fn chart_of(&self, automaton: &str) -> Option<&str> {
        self.charts.iter().find(|(_, a)| a == automaton).map(|(c, _)| c.as_str())
    }

    pub fn state_of(&self, automaton: &str, location: &str) -> Option<&str> {
        self.states.iter().find(|(_, l)| l.owner == automaton && l.name == location).map(|(s, _)| s.name.as_str())
    }

    pub fn transition_of(&self, automaton: &str, edge: &str) -> Option<&ElemRef> {
        self.transitions.iter().find(|(_, e)| e.owner == automaton && e.name == edge).map(|(t, _)| t)
    }

    pub fn is_self_loop(&self, automaton: &str, edge: &str) -> bool {
        self.aux.iter().any(|x| matches!(x, AuxElement::SelfLoop(r) if r.owner == automaton && r.name == edge))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TransformOptions {
    /// Rules (2..=7) to leave out. Test hook for mutation analysis.
    pub skip: BTreeSet<u8>,
}

impl TransformOptions {
    pub fn skipping(rule: u8) -> Self {
        TransformOptions { skip: [rule].into_iter().collect() }
    }
}

#[derive(Clone, Debug)]
pub struct Transformation {
    pub ta: TaNetwork,
    pub map: TransformMap,
    /// Network after each rule; `stages[k - 1]` is stage k.
    pub stages: Vec<TaNetwork>,
}

pub fn transform_all(net: &StatechartNetwork) -> Result<(TaNetwork, TransformMap), TransformError> {
    let t = transform_with(net, &TransformOptions::default())?;
    Ok((t.ta, t.map))
}

pub fn transform_with(net: &StatechartNetwork, opts: &TransformOptions) -> Result<Transformation, TransformError> {
    if opts.skip.contains(&1) {
        return Err(TransformError::CannotSkipInitialization);
    }
    if let Some(&r) = opts.skip.iter().find(|r| **r > FINAL_STAGE) {
        return Err(TransformError::UnknownRule(r));
    }
    let (mut ta, mut map) = rule_initialize(net);
    let mut stages = vec![ta.clone()];
    for rule in 2..=FINAL_STAGE {
        ta = if opts.skip.contains(&rule) {
            check_stage(rule, &ta)?;
            TaNetwork { stage: rule, ..ta }
        } else {
            apply_rule(rule, net, ta, &mut map)?
        };
        stages.push(ta.clone());
    }
    Ok(Transformation { ta, map, stages })
}

/// Applies rule `rule` (2..=7) to a network at stage `rule - 1`.
pub fn apply_rule(rule: u8, net: &StatechartNetwork, ta: TaNetwork, map: &mut TransformMap) -> Result<TaNetwork, TransformError> {
    match rule {
        2 => rule_actions(net, ta, map),
        3 => rule_guards(net, ta, map),
        4 => rule_events(net, ta, map),
        5 => rule_timing_triggers(net, ta, map),
        6 => rule_transition_priority(net, ta, map),
        7 => rule_sync_lockstep(net, ta, map),
        r => Err(TransformError::UnknownRule(r)),
    }
}

fn check_stage(rule: u8, ta: &TaNetwork) -> Result<(), TransformError> {
    if ta.stage + 1 != rule {
        return Err(TransformError::StageMismatch { rule, expected: rule - 1, found: ta.stage });
    }
    Ok(())
}

/// Rule 1: one automaton per chart with the same locations and bare edges.
pub fn rule_initialize(net: &StatechartNetwork) -> (TaNetwork, TransformMap) {
    let mut map = TransformMap::default();
    let mut automata = Vec::new();
    for c in &net.charts {
        map.charts.push((c.name.clone(), c.name.clone()));
        for s in &c.states {
            map.states.push((ElemRef::new(&c.name, &s.name), ElemRef::new(&c.name, &s.name)));
        }
        for t in &c.transitions {
            map.transitions.push((ElemRef::new(&c.name, &t.id), ElemRef::new(&c.name, &t.id)));
        }
        automata.push(Automaton {
            name: c.name.clone(),
            role: Role::Transformed { chart: c.name.clone(), priority: c.priority },
            locations: c.states.iter().map(|s| Location::plain(&s.name)).collect(),
            initial: c.initial.clone(),
            edges: c
                .transitions
                .iter()
                .map(|t| Edge {
                    id: t.id.clone(),
                    source: t.source.clone(),
                    guard: None,
                    action: ActionSeq::default(),
                    target: t.target.clone(),
                })
                .collect(),
        });
    }
    for v in &net.variables {
        map.variables.push((v.name.clone(), v.name.clone()));
    }
    (TaNetwork { variables: net.variables.clone(), automata, stage: 1, index_var: None }, map)
}

/// Visits every edge of a transformed automaton that images a transition.
fn for_each_mapped_edge(
    net: &StatechartNetwork,
    ta: &mut TaNetwork,
    map: &TransformMap,
    mut f: impl FnMut(&crate::model::StatechartDef, &crate::model::TransitionDef, &mut Edge),
) -> Result<(), TransformError> {
    for a in ta.automata.iter_mut().filter(|a| a.role.is_transformed()) {
        for e in a.edges.iter_mut() {
            let Some(t) = map.transition_of(&a.name, &e.id) else { continue };
            let chart = net.chart(&t.owner).ok_or_else(|| TransformError::Inconsistent(format!("unknown chart `{}`", t.owner)))?;
            let tr = chart
                .transition(&t.name)
                .ok_or_else(|| TransformError::Inconsistent(format!("unknown transition `{}.{}`", t.owner, t.name)))?;
            f(chart, tr, e);
        }
    }
    Ok(())
}

/// Rule 2: edge action is `<source exit; transition action; target entry>`.
pub fn rule_actions(net: &StatechartNetwork, mut ta: TaNetwork, map: &mut TransformMap) -> Result<TaNetwork, TransformError> {
    check_stage(2, &ta)?;
    for_each_mapped_edge(net, &mut ta, map, |chart, t, e| {
        let exit = chart.state(&t.source).map(|s| s.exit.clone()).unwrap_or_default();
        let entry = chart.state(&t.target).map(|s| s.entry.clone()).unwrap_or_default();
        e.action = exit.then(&t.action).then(&entry);
    })?;
    ta.stage = 2;
    Ok(ta)
}

/// Rule 3: edge guard is the transition guard, verbatim.
pub fn rule_guards(net: &StatechartNetwork, mut ta: TaNetwork, map: &mut TransformMap) -> Result<TaNetwork, TransformError> {
    check_stage(3, &ta)?;
    for_each_mapped_edge(net, &mut ta, map, |_, t, e| e.guard = Some(t.guard.clone()))?;
    ta.stage = 3;
    Ok(ta)
}

fn fresh(taken: &HashSet<String>, base: &str) -> String {
    if !taken.contains(base) {
        return base.to_string();
    }
    (2..).map(|i| format!("{base}_{i}")).find(|n| !taken.contains(n)).expect("unbounded range")
}

fn var_names(ta: &TaNetwork) -> HashSet<String> {
    ta.variables.iter().map(|v| v.name.clone()).collect()
}

fn automaton_names(ta: &TaNetwork) -> HashSet<String> {
    ta.automata.iter().map(|a| a.name.clone()).collect()
}

fn rewrite_guards(ta: &mut TaNetwork, mut f: impl FnMut(&Expr) -> Option<Expr>) {
    for a in ta.automata.iter_mut().filter(|a| a.role.is_transformed()) {
        for e in a.edges.iter_mut() {
            if let Some(g) = &e.guard {
                e.guard = Some(g.rewrite(&mut f));
            }
        }
    }
}

/// Rule 4: events become channels, each offered by a one-location automaton,
/// and guard atoms `e` become `e?`.
pub fn rule_events(_net: &StatechartNetwork, mut ta: TaNetwork, map: &mut TransformMap) -> Result<TaNetwork, TransformError> {
    check_stage(4, &ta)?;
    let events: Vec<String> = ta.variables.iter().filter(|v| v.kind == VarKind::Event).map(|v| v.name.clone()).collect();
    for v in ta.variables.iter_mut().filter(|v| v.kind == VarKind::Event) {
        v.kind = VarKind::Channel;
    }
    for ev in &events {
        let name = fresh(&automaton_names(&ta), &format!("Event_{ev}"));
        let loc = format!("s0_{ev}");
        ta.automata.push(Automaton {
            name: name.clone(),
            role: Role::EventAux { event: ev.clone() },
            locations: vec![Location::plain(&loc)],
            initial: loc.clone(),
            edges: vec![Edge {
                id: format!("{ev}_send"),
                source: loc.clone(),
                guard: Some(Expr::Send(ev.clone())),
                action: ActionSeq::default(),
                target: loc,
            }],
        });
        map.aux.push(AuxElement::EventAutomaton(name));
    }
    rewrite_guards(&mut ta, |x| match x {
        Expr::Event(e) => Some(Expr::Receive(e.clone())),
        _ => None,
    });
    ta.stage = 4;
    Ok(ta)
}

/// Rule 5: one clocked automaton per trigger occurrence, offering its
/// channel exactly when the clock reaches τ. `every` occurrences are numbered
/// before `after` occurrences.
pub fn rule_timing_triggers(_net: &StatechartNetwork, mut ta: TaNetwork, map: &mut TransformMap) -> Result<TaNetwork, TransformError> {
    check_stage(5, &ta)?;
    // (automaton, edge, occurrence within guard, trigger)
    let mut occ: Vec<(usize, usize, usize, Trigger)> = Vec::new();
    for (ai, a) in ta.automata.iter().enumerate().filter(|(_, a)| a.role.is_transformed()) {
        for (ei, e) in a.edges.iter().enumerate() {
            let mut k = 0;
            if let Some(g) = &e.guard {
                g.walk(&mut |x| {
                    if let Expr::Trigger(t) = x {
                        occ.push((ai, ei, k, *t));
                        k += 1;
                    }
                });
            }
        }
    }
    occ.sort_by_key(|o| o.3.kind != TriggerKind::Every);

    let mut channel_of: BTreeMap<(usize, usize, usize), String> = BTreeMap::new();
    let mut new_automata = Vec::new();
    for (i, &(ai, ei, k, t)) in occ.iter().enumerate() {
        let clock = fresh(&var_names(&ta), &format!("c{}", i + 1));
        ta.variables.push(VarDecl::clock(&clock));
        let ch = fresh(&var_names(&ta), &t.channel_stem());
        ta.variables.push(VarDecl::channel(&ch));
        channel_of.insert((ai, ei, k), ch.clone());

        let mut taken = automaton_names(&ta);
        taken.extend(new_automata.iter().map(|a: &Automaton| a.name.clone()));
        let name = fresh(&taken, &format!("Timer_{ch}"));
        let s0 = format!("s0_{ch}");
        let target = match t.kind {
            TriggerKind::Every => s0.clone(),
            TriggerKind::After => format!("s1_{ch}"),
        };
        let at_bound = Expr::cmp(BinOp::Eq, &clock, t.period as i64);
        let reset = ActionSeq::new(vec![Update::Reset(clock.clone())]);
        let mut locations = vec![Location { name: s0.clone(), invariant: Some(Expr::cmp(BinOp::Le, &clock, t.period as i64)) }];
        if t.kind == TriggerKind::After {
            locations.push(Location::plain(&target));
        }
        new_automata.push(Automaton {
            name: name.clone(),
            role: Role::TimerAux { trigger: t, channel: ch.clone(), clock: clock.clone() },
            locations,
            initial: s0.clone(),
            edges: vec![
                Edge {
                    id: format!("{ch}_fire"),
                    source: s0.clone(),
                    guard: Some(Expr::and(Expr::Send(ch.clone()), at_bound.clone())),
                    action: reset.clone(),
                    target: target.clone(),
                },
                Edge { id: format!("{ch}_lapse"), source: s0, guard: Some(at_bound), action: reset, target },
            ],
        });
        map.aux.push(AuxElement::TimerAutomaton(name));
        map.aux.push(AuxElement::Clock(clock));
        map.aux.push(AuxElement::Channel(ch));
    }

    for (ai, a) in ta.automata.iter_mut().enumerate() {
        for (ei, e) in a.edges.iter_mut().enumerate() {
            if let Some(g) = &e.guard {
                let mut k = 0;
                e.guard = Some(g.rewrite(&mut |x| match x {
                    Expr::Trigger(_) => {
                        let ch = channel_of.get(&(ai, ei, k)).cloned();
                        k += 1;
                        ch.map(Expr::Receive)
                    }
                    _ => None,
                }));
            }
        }
    }
    ta.automata.extend(new_automata);
    ta.stage = 5;
    Ok(ta)
}

/// Mapped edges leaving `loc`, highest priority first.
fn prioritized<'a>(net: &StatechartNetwork, map: &TransformMap, a: &'a Automaton, loc: &str) -> Vec<(usize, &'a Edge)> {
    let mut out: Vec<(u32, usize, &Edge)> = a
        .edges
        .iter()
        .enumerate()
        .filter(|(_, e)| e.source == loc)
        .filter_map(|(i, e)| {
            let t = map.transition_of(&a.name, &e.id)?;
            let prio = net.chart(&t.owner)?.transition(&t.name)?.priority;
            Some((prio, i, e))
        })
        .collect();
    out.sort_by_key(|(p, i, _)| (*p, *i));
    out.into_iter().map(|(_, i, e)| (i, e)).collect()
}

/// Rule 6: each edge also requires every higher-priority sibling guard to be
/// false.
pub fn rule_transition_priority(net: &StatechartNetwork, mut ta: TaNetwork, map: &mut TransformMap) -> Result<TaNetwork, TransformError> {
    check_stage(6, &ta)?;
    for a in ta.automata.iter_mut().filter(|a| a.role.is_transformed()) {
        let mut updates = Vec::new();
        for l in &a.locations {
            let sibs = prioritized(net, map, a, &l.name);
            for (k, (i, e)) in sibs.iter().enumerate().skip(1) {
                let higher = sibs[..k].iter().map(|(_, h)| Expr::not(h.guard_or_true()));
                updates.push((*i, Expr::conjoin(std::iter::once(e.guard_or_true()).chain(higher))));
            }
        }
        for (i, g) in updates {
            a.edges[i].guard = Some(g);
        }
    }
    ta.stage = 6;
    Ok(ta)
}

/// Rule 7: a stay self-loop per location, then `α == ρ` on every guard and
/// `Inc(α)` on every action of the transformed automata.
pub fn rule_sync_lockstep(net: &StatechartNetwork, mut ta: TaNetwork, map: &mut TransformMap) -> Result<TaNetwork, TransformError> {
    check_stage(7, &ta)?;
    let n = ta.automata.iter().filter(|a| a.role.is_transformed()).count() as u32;
    let alpha = fresh(&var_names(&ta), "alpha");
    ta.variables.push(VarDecl::int(&alpha, 1, i64::from(n.max(1)), 1));
    ta.index_var = Some(alpha.clone());
    map.aux.push(AuxElement::IndexVar(alpha.clone()));
    for a in ta.automata.iter_mut() {
        let Role::Transformed { priority, .. } = a.role else { continue };
        let mut ids: HashSet<String> = a.edges.iter().map(|e| e.id.clone()).collect();
        let mut loops = Vec::new();
        for l in &a.locations {
            let out = prioritized(net, map, a, &l.name);
            let guard = if out.is_empty() {
                Expr::Bool(true)
            } else {
                Expr::conjoin(out.iter().map(|(_, e)| Expr::not(e.guard_or_true())))
            };
            let id = fresh(&ids, &format!("stay_{}", l.name));
            ids.insert(id.clone());
            map.aux.push(AuxElement::SelfLoop(ElemRef::new(&a.name, &id)));
            loops.push(Edge { id, source: l.name.clone(), guard: Some(guard), action: ActionSeq::default(), target: l.name.clone() });
        }
        a.edges.extend(loops);
        for e in a.edges.iter_mut() {
            e.guard = Some(Expr::and(e.guard_or_true(), Expr::cmp(BinOp::Eq, &alpha, i64::from(priority))));
            e.action.push(Update::Inc { var: alpha.clone(), n });
        }
    }
    ta.stage = 7;
    Ok(ta)
}

/// Structural checks of the chart/state/transition/variable maps. Returns
/// one message per violation.
pub fn check_maps(net: &StatechartNetwork, ta: &TaNetwork, map: &TransformMap) -> Vec<String> {
    let mut v = Vec::new();
    let mut bijective = |kind: &str, pairs: Vec<(String, String)>, sources: Vec<String>, targets: Vec<String>, onto: bool| {
        let dom: BTreeSet<&String> = pairs.iter().map(|p| &p.0).collect();
        let img: BTreeSet<&String> = pairs.iter().map(|p| &p.1).collect();
        if dom.len() != pairs.len() {
            v.push(format!("{kind} map is not a function"));
        }
        if img.len() != pairs.len() {
            v.push(format!("{kind} map is not injective"));
        }
        for s in &sources {
            if !dom.contains(s) {
                v.push(format!("{kind} `{s}` is not mapped"));
            }
        }
        for t in &img {
            if !targets.contains(t) {
                v.push(format!("{kind} image `{t}` does not exist"));
            }
        }
        if onto {
            for t in &targets {
                if !img.contains(t) {
                    v.push(format!("{kind} map misses `{t}`"));
                }
            }
        }
    };
    let key = |r: &ElemRef| format!("{}.{}", r.owner, r.name);
    let transformed: Vec<&Automaton> = ta.transformed().collect();

    bijective(
        "chart",
        map.charts.clone(),
        net.charts.iter().map(|c| c.name.clone()).collect(),
        transformed.iter().map(|a| a.name.clone()).collect(),
        true,
    );
    bijective(
        "state",
        map.states.iter().map(|(a, b)| (key(a), key(b))).collect(),
        net.charts.iter().flat_map(|c| c.states.iter().map(move |s| format!("{}.{}", c.name, s.name))).collect(),
        transformed.iter().flat_map(|a| a.locations.iter().map(move |l| format!("{}.{}", a.name, l.name))).collect(),
        true,
    );
    bijective(
        "transition",
        map.transitions.iter().map(|(a, b)| (key(a), key(b))).collect(),
        net.charts.iter().flat_map(|c| c.transitions.iter().map(move |t| format!("{}.{}", c.name, t.id))).collect(),
        transformed.iter().flat_map(|a| a.edges.iter().map(move |e| format!("{}.{}", a.name, e.id))).collect(),
        false,
    );
    bijective(
        "variable",
        map.variables.clone(),
        net.variables.iter().map(|x| x.name.clone()).collect(),
        ta.variables.iter().map(|x| x.name.clone()).collect(),
        false,
    );

    // Every unmapped target element must be classified auxiliary.
    let mapped_edges: HashSet<String> = map.transitions.iter().map(|(_, e)| key(e)).collect();
    for a in &transformed {
        for e in &a.edges {
            if !mapped_edges.contains(&format!("{}.{}", a.name, e.id)) && !map.is_self_loop(&a.name, &e.id) {
                v.push(format!("edge `{}.{}` is neither mapped nor auxiliary", a.name, e.id));
            }
        }
    }
    for a in ta.automata.iter().filter(|a| !a.role.is_transformed()) {
        let listed = map.aux.iter().any(|x| matches!(x, AuxElement::EventAutomaton(n) | AuxElement::TimerAutomaton(n) if *n == a.name));
        if !listed {
            v.push(format!("automaton `{}` is neither mapped nor auxiliary", a.name));
        }
    }
    let mapped_vars: HashSet<&String> = map.variables.iter().map(|(_, t)| t).collect();
    for x in &ta.variables {
        let aux = map.aux.iter().any(|a| matches!(a, AuxElement::IndexVar(n) | AuxElement::Clock(n) | AuxElement::Channel(n) if *n == x.name));
        if !mapped_vars.contains(&x.name) && !aux {
            v.push(format!("variable `{}` is neither mapped nor auxiliary", x.name));
        }
    }
    v
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeterminismRule {
    /// Two rewritten original guards hold at once.
    Exclusion,
    /// Not exactly one outgoing edge holds when α matches.
    Coverage,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeterminismViolation {
    pub rule: DeterminismRule,
    pub automaton: String,
    pub location: String,
    pub enabled: Vec<String>,
    pub witness: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeterminismReport {
    pub locations: usize,
    pub valuations: u64,
    pub violations: Vec<DeterminismViolation>,
}

/// Upper bound on valuations enumerated per location.
pub const DETERMINISM_BUDGET: u64 = 1 << 22;

struct EnumCtx<'a> {
    vals: &'a [i64],
    offered: &'a [bool],
}

impl Ctx for EnumCtx<'_> {
    fn slot(&self, i: usize) -> i64 {
        self.vals[i]
    }
    fn offered(&self, ch: usize) -> bool {
        self.offered[ch]
    }
}

/// Exhaustively evaluates the outgoing guards of every location of every
/// transformed automaton over all valuations of the variables and channel
/// offers they mention, with α set to the automaton's priority. At most one
/// original edge may hold (exclusion) and, once self-loops exist, exactly
/// one edge must hold (coverage). The first violation per location is kept.
pub fn check_determinism(ta: &TaNetwork, map: &TransformMap) -> Result<DeterminismReport, String> {
    let mut layout = Layout::new(&ta.variables);
    let mut report = DeterminismReport::default();
    let coverage = ta.stage >= 7;
    for a in ta.transformed() {
        let Role::Transformed { priority, .. } = a.role else { continue };
        for l in &a.locations {
            report.locations += 1;
            let edges: Vec<&Edge> = a.outgoing(&l.name).collect();
            let mut guards = Vec::new();
            for e in &edges {
                guards.push(layout.compile_bool(&e.guard_or_true()).map_err(|m| format!("{}.{}: {m}", a.name, e.id))?);
            }
            let original: Vec<bool> = edges.iter().map(|e| !map.is_self_loop(&a.name, &e.id)).collect();

            let mut vars: Vec<String> = Vec::new();
            let mut chans: Vec<usize> = Vec::new();
            for e in &edges {
                e.guard_or_true().walk(&mut |x| match x {
                    Expr::Var(v) if Some(v) != ta.index_var.as_ref() && !vars.contains(v) => vars.push(v.clone()),
                    Expr::Receive(c) => {
                        if let Some(i) = layout.channel(c) {
                            if !chans.contains(&i) {
                                chans.push(i);
                            }
                        }
                    }
                    _ => {}
                });
            }
            let mut dims: Vec<(usize, i64, i64)> = Vec::new();
            let mut size: u64 = 1 << chans.len();
            for v in &vars {
                let slot = layout.slot(v).ok_or_else(|| format!("{}.{}: `{v}` is not a data variable", a.name, l.name))?;
                let (lo, hi) = match layout.slots[slot].kind {
                    VarKind::Int { bounds: Some(b) } => b,
                    VarKind::Bool => (0, 1),
                    _ => return Err(format!("`{v}` has no bounded domain")),
                };
                size = size.saturating_mul((hi - lo + 1) as u64);
                dims.push((slot, lo, hi));
            }
            if size > DETERMINISM_BUDGET {
                return Err(format!("{}.{}: {size} valuations exceed the budget", a.name, l.name));
            }

            let mut vals = layout.initial_values();
            if let Some(ix) = ta.index_var.as_ref().and_then(|n| layout.slot(n)) {
                vals[ix] = i64::from(priority);
            }
            let mut offered = vec![false; layout.channels.len()];
            for (slot, lo, _) in &dims {
                vals[*slot] = *lo;
            }
            'all: for mask in 0..(1u64 << chans.len()) {
                for (b, ch) in chans.iter().enumerate() {
                    offered[*ch] = mask >> b & 1 == 1;
                }
                for (slot, lo, _) in &dims {
                    vals[*slot] = *lo;
                }
                loop {
                    report.valuations += 1;
                    let cx = EnumCtx { vals: &vals, offered: &offered };
                    let mut on = Vec::new();
                    for (i, g) in guards.iter().enumerate() {
                        if g.holds(&cx).map_err(|e| format!("{}.{}: {e}", a.name, edges[i].id))? {
                            on.push(i);
                        }
                    }
                    let orig_on = on.iter().filter(|i| original[**i]).count();
                    let bad = if orig_on > 1 {
                        Some(DeterminismRule::Exclusion)
                    } else if coverage && on.len() != 1 {
                        Some(DeterminismRule::Coverage)
                    } else {
                        None
                    };
                    if let Some(rule) = bad {
                        let mut w: Vec<String> = dims.iter().map(|(s, _, _)| format!("{}={}", layout.slots[*s].name, vals[*s])).collect();
                        w.extend(chans.iter().map(|c| format!("{}?={}", layout.channels[*c], offered[*c])));
                        report.violations.push(DeterminismViolation {
                            rule,
                            automaton: a.name.clone(),
                            location: l.name.clone(),
                            enabled: on.iter().map(|i| edges[*i].id.clone()).collect(),
                            witness: w.join(","),
                        });
                        break 'all;
                    }
                    // Odometer over the variable domains.
                    let mut d = 0;
                    loop {
                        if d == dims.len() {
                            continue 'all;
                        }
                        let (slot, lo, hi) = dims[d];
                        if vals[slot] < hi {
                            vals[slot] += 1;
                            break;
                        }
                        vals[slot] = lo;
                        d += 1;
                    }
                }
            }
        }
    }
    Ok(report)
}
