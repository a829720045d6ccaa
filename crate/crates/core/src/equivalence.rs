//! Trace equivalence between a statechart network and its timed-automata
//! image, checked by running both under the same event schedules.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ExecutionTrace, Label, StatechartNetwork, Valuation};
use crate::sc::{EventEnv, ScEngine, ScError, Schedule};
use crate::ta::{EntryKind, Role, TaEngine, TaError, TaNetwork, TaTrace};
use crate::transform::TransformMap;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EquivError {
    #[error("trace does not belong to the mapped network: {0}")]
    MapMismatch(String),
    #[error(transparent)]
    Statechart(#[from] ScError),
    #[error(transparent)]
    Automata(#[from] TaError),
}

/// Chart states and original data variables only.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProjectedStatus {
    pub states: Vec<String>,
    pub valuation: Valuation,
}

impl std::fmt::Display for ProjectedStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}) | {}", self.states.join(","), self.valuation)
    }
}

/// A projected trace plus the error class that ended it, if any.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectedTrace {
    pub statuses: Vec<ProjectedStatus>,
    /// Transition id per step, `STUTTER` for self-loops and stuttering.
    pub labels: Vec<String>,
    pub terminal: Option<String>,
}

pub fn project_sc(trace: &ExecutionTrace, terminal: Option<&ScError>) -> ProjectedTrace {
    ProjectedTrace {
        statuses: trace
            .statuses
            .iter()
            .map(|s| ProjectedStatus { states: s.states.clone(), valuation: s.valuation.clone() })
            .collect(),
        labels: trace
            .labels
            .iter()
            .map(|l| match l {
                Label::Fired(t) => t.clone(),
                Label::Stutter => "STUTTER".into(),
            })
            .collect(),
        terminal: terminal.map(ScError::terminal_class),
    }
}

/// Keeps the initial status and the lockstep steps of `trace`, mapping
/// locations back to chart states and dropping auxiliary automata, clocks,
/// channels and the index variable.
pub fn project(
    trace: &TaTrace,
    net: &StatechartNetwork,
    ta: &TaNetwork,
    map: &TransformMap,
    terminal: Option<&TaError>,
) -> Result<ProjectedTrace, EquivError> {
    let mut columns = Vec::new();
    for c in &net.charts {
        let a = map.automaton_of(&c.name).ok_or_else(|| EquivError::MapMismatch(format!("chart `{}` is not mapped", c.name)))?;
        let i = ta
            .automata
            .iter()
            .position(|x| x.name == a)
            .ok_or_else(|| EquivError::MapMismatch(format!("automaton `{a}` is missing")))?;
        columns.push((a.to_string(), i));
    }
    let vars: Vec<(String, String)> = net
        .data_vars()
        .map(|v| {
            map.variables
                .iter()
                .find(|(s, _)| *s == v.name)
                .map(|(s, t)| (s.clone(), t.clone()))
                .ok_or_else(|| EquivError::MapMismatch(format!("variable `{}` is not mapped", v.name)))
        })
        .collect::<Result<_, _>>()?;

    let mut out = ProjectedTrace { terminal: terminal.map(TaError::terminal_class), ..Default::default() };
    for e in trace.entries.iter().filter(|e| matches!(e.kind, EntryKind::Init | EntryKind::Step)) {
        let mut states = Vec::with_capacity(columns.len());
        for (a, i) in &columns {
            let loc = e.status.locations.get(*i).ok_or_else(|| EquivError::MapMismatch("status is too short".into()))?;
            let s = map
                .state_of(a, loc)
                .ok_or_else(|| EquivError::MapMismatch(format!("location `{a}.{loc}` has no source state")))?;
            states.push(s.to_string());
        }
        let mut valuation = Valuation::default();
        for (s, t) in &vars {
            let v = e.status.valuation.get(t).ok_or_else(|| EquivError::MapMismatch(format!("variable `{t}` is missing")))?;
            valuation.set(s, v);
        }
        out.statuses.push(ProjectedStatus { states, valuation });
        if e.kind == EntryKind::Step {
            let label = e
                .edges
                .iter()
                .find_map(|(a, id)| {
                    let t = map.transition_of(a, id)?;
                    Some(t.name.clone())
                })
                .unwrap_or_else(|| "STUTTER".into());
            out.labels.push(label);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Equivalent,
    Divergent,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Divergence {
    /// Position of the schedule in the checked list.
    pub schedule_index: usize,
    /// Witness schedule in the text format of [`Schedule::parse`].
    pub schedule: String,
    /// Status index; 0 is the initial status.
    pub step: usize,
    pub statechart: Option<ProjectedStatus>,
    pub automata: Option<ProjectedStatus>,
    pub statechart_label: Option<String>,
    pub automata_label: Option<String>,
    pub statechart_terminal: Option<String>,
    pub automata_terminal: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub verdict: Verdict,
    pub first_divergence: Option<Divergence>,
    pub divergent_schedules: usize,
    pub schedules_tested: usize,
    pub horizon: u64,
    pub seed: Option<u64>,
}

impl EquivalenceReport {
    pub fn is_equivalent(&self) -> bool {
        self.verdict == Verdict::Equivalent
    }
}

/// First index where the two traces differ, counting a length mismatch or a
/// different terminal error as a difference.
fn first_difference(a: &ProjectedTrace, b: &ProjectedTrace) -> Option<usize> {
    let common = a.statuses.len().min(b.statuses.len());
    if let Some(i) = (0..common).find(|&i| a.statuses[i] != b.statuses[i]) {
        return Some(i);
    }
    if a.statuses.len() != b.statuses.len() || a.terminal != b.terminal {
        return Some(common);
    }
    None
}

fn divergence(a: &ProjectedTrace, b: &ProjectedTrace, step: usize, schedule_index: usize, schedule: &Schedule) -> Divergence {
    let label = |t: &ProjectedTrace| step.checked_sub(1).and_then(|i| t.labels.get(i).cloned());
    Divergence {
        schedule_index,
        schedule: schedule.to_text(),
        step,
        statechart: a.statuses.get(step).cloned(),
        automata: b.statuses.get(step).cloned(),
        statechart_label: label(a),
        automata_label: label(b),
        statechart_terminal: a.terminal.clone(),
        automata_terminal: b.terminal.clone(),
    }
}

/// Pointwise comparison of two projected traces. Symmetric up to swapping
/// the two sides of the reported divergence.
pub fn check_traces(a: &ProjectedTrace, b: &ProjectedTrace) -> EquivalenceReport {
    let d = first_difference(a, b).map(|i| divergence(a, b, i, 0, &Schedule::new()));
    EquivalenceReport {
        verdict: if d.is_some() { Verdict::Divergent } else { Verdict::Equivalent },
        divergent_schedules: usize::from(d.is_some()),
        first_divergence: d,
        schedules_tested: 1,
        horizon: a.statuses.len().max(b.statuses.len()).saturating_sub(1) as u64,
        seed: None,
    }
}

/// Both engines, built once and shared between schedules.
pub struct CoSimulator<'a> {
    net: &'a StatechartNetwork,
    ta: &'a TaNetwork,
    map: &'a TransformMap,
    sc: ScEngine,
    tu: TaEngine,
}

impl<'a> CoSimulator<'a> {
    /// Fails when either side cannot be executed at all, e.g. an automata
    /// network that still carries event atoms or lacks the lockstep index.
    pub fn new(net: &'a StatechartNetwork, ta: &'a TaNetwork, map: &'a TransformMap) -> Result<Self, EquivError> {
        let sc = ScEngine::new(net)?;
        let tu = TaEngine::new(ta)?;
        tu.lockstep()?;
        for a in ta.automata.iter().filter(|a| matches!(a.role, Role::Transformed { .. })) {
            if map.chart_of(&a.name).is_none() {
                return Err(EquivError::MapMismatch(format!("automaton `{}` has no source chart", a.name)));
            }
        }
        Ok(CoSimulator { net, ta, map, sc, tu })
    }

    /// Runs both sides under one schedule and returns the projected traces.
    pub fn traces(&self, schedule: &Schedule, horizon: u64) -> Result<(ProjectedTrace, ProjectedTrace), EquivError> {
        let env = EventEnv::new(schedule.clone());
        let (st, se) = self.sc.run_partial(&env, horizon);
        let (tt, te) = self.tu.run_partial(&env, horizon);
        if let Some(e @ TaError::Invalid(_)) = &te {
            return Err(e.clone().into());
        }
        if let Some(e @ ScError::Invalid(_)) = &se {
            return Err(e.clone().into());
        }
        Ok((project_sc(&st, se.as_ref()), project(&tt, self.net, self.ta, self.map, te.as_ref())?))
    }

    pub fn compare(&self, schedule: &Schedule, horizon: u64, index: usize) -> Result<Option<Divergence>, EquivError> {
        let (a, b) = self.traces(schedule, horizon)?;
        Ok(first_difference(&a, &b).map(|i| divergence(&a, &b, i, index, schedule)))
    }
}

/// Checks every schedule, in parallel on the current rayon pool. The report
/// does not depend on the number of workers.
pub fn check_model_equivalence(
    net: &StatechartNetwork,
    ta: &TaNetwork,
    map: &TransformMap,
    schedules: &[Schedule],
    horizon: u64,
) -> Result<EquivalenceReport, EquivError> {
    let sim = CoSimulator::new(net, ta, map)?;
    let results: Vec<Option<Divergence>> = schedules
        .par_iter()
        .enumerate()
        .map(|(i, s)| sim.compare(s, horizon, i))
        .collect::<Result<_, _>>()?;
    let divergent_schedules = results.iter().filter(|d| d.is_some()).count();
    let first = results.into_iter().flatten().next();
    Ok(EquivalenceReport {
        verdict: if first.is_some() { Verdict::Divergent } else { Verdict::Equivalent },
        first_divergence: first,
        divergent_schedules,
        schedules_tested: schedules.len(),
        horizon,
        seed: None,
    })
}

/// Seeded schedules over `events`: each event is raised in each cycle with
/// probability one half. Schedule `i` depends only on `(seed, i)`.
pub fn random_schedules(events: &[&str], count: usize, horizon: u64, seed: u64) -> Vec<Schedule> {
    (0..count as u64)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let mut s = Schedule::new();
            for k in 0..horizon {
                for e in events {
                    if rng.gen_bool(0.5) {
                        s = s.raise(k, e);
                    }
                }
            }
            s
        })
        .collect()
}

/// [`check_model_equivalence`] over [`random_schedules`] of the network's
/// events, with the seed recorded in the report.
pub fn check_random(
    net: &StatechartNetwork,
    ta: &TaNetwork,
    map: &TransformMap,
    count: usize,
    horizon: u64,
    seed: u64,
) -> Result<EquivalenceReport, EquivError> {
    let schedules = random_schedules(&net.events(), count, horizon, seed);
    let mut r = check_model_equivalence(net, ta, map, &schedules, horizon)?;
    r.seed = Some(seed);
    Ok(r)
}
