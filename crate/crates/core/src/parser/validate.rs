use std::collections::{BTreeSet, HashSet};

use super::{DiagCode, Diagnostic, Element};
use crate::action::{ActionSeq, Update};
use crate::eval::{type_of, Ty};
use crate::expr::{Expr, TriggerKind};
use crate::model::{StatechartNetwork, VarKind};

/// Well-formedness of a network. Returns an empty list iff every invariant
/// holds. Diagnostics name their element; positions are attached by
/// [`super::SourceMap::locate`].
pub fn validate(net: &StatechartNetwork) -> Vec<Diagnostic> {
    let mut d = Vec::new();
    let mut names = HashSet::new();
    for v in &net.variables {
        let el = Element::Var(v.name.clone());
        if !names.insert(v.name.as_str()) {
            d.push(Diagnostic::on(DiagCode::DuplicateName, el.clone(), format!("variable `{}` declared twice", v.name)));
        }
        if let VarKind::Int { bounds: Some((lo, hi)) } = v.kind {
            if lo > hi {
                d.push(Diagnostic::on(DiagCode::EmptyDomain, el.clone(), format!("domain of `{}` is empty: {lo} > {hi}", v.name)));
                continue;
            }
        }
        match (v.kind.is_data(), v.initial) {
            (true, Some(init)) if !v.kind.admits(init) => d.push(Diagnostic::on(
                DiagCode::InitialOutOfDomain,
                el,
                format!("initial value {init} of `{}` is outside its domain", v.name),
            )),
            (true, None) => {
                d.push(Diagnostic::on(DiagCode::InitialOutOfDomain, el, format!("`{}` has no initial value", v.name)))
            }
            (false, Some(_)) => d.push(Diagnostic::on(
                DiagCode::TypeMismatch,
                el,
                format!("`{}` cannot carry an initial value", v.name),
            )),
            _ => {}
        }
    }

    let mut prios: Vec<u32> = net.charts.iter().map(|c| c.priority).collect();
    prios.sort_unstable();
    let distinct: BTreeSet<u32> = prios.iter().copied().collect();
    if distinct.len() != prios.len() {
        for c in &net.charts {
            if net.charts.iter().filter(|o| o.priority == c.priority).count() > 1 {
                d.push(Diagnostic::on(
                    DiagCode::DuplicateChartPriority,
                    Element::Chart(c.name.clone()),
                    format!("priority {} is shared by several statecharts", c.priority),
                ));
            }
        }
    } else if prios.iter().enumerate().any(|(i, p)| *p as usize != i + 1) {
        let el = net.charts.first().map(|c| Element::Chart(c.name.clone()));
        d.push(Diagnostic {
            code: DiagCode::PriorityGap,
            message: format!("statechart priorities {prios:?} are not exactly 1..{}", prios.len()),
            pos: None,
            element: el,
        });
    }
    if net.charts.is_empty() {
        d.push(Diagnostic { code: DiagCode::SyntaxError, message: "network has no statecharts".into(), pos: None, element: None });
    }

    let mut chart_names = HashSet::new();
    for c in &net.charts {
        let cel = Element::Chart(c.name.clone());
        if !chart_names.insert(c.name.as_str()) {
            d.push(Diagnostic::on(DiagCode::DuplicateName, cel.clone(), format!("statechart `{}` declared twice", c.name)));
        }
        let mut states = HashSet::new();
        for s in &c.states {
            let sel = Element::State { chart: c.name.clone(), state: s.name.clone() };
            if !states.insert(s.name.as_str()) {
                d.push(Diagnostic::on(DiagCode::DuplicateName, sel.clone(), format!("state `{}` declared twice", s.name)));
            }
            check_actions(net, &s.entry, &sel, &mut d);
            check_actions(net, &s.exit, &sel, &mut d);
        }
        if !states.contains(c.initial.as_str()) {
            d.push(Diagnostic::on(
                DiagCode::UnknownState,
                Element::Initial { chart: c.name.clone() },
                format!("unknown initial state `{}`", c.initial),
            ));
        }
        let mut ids = HashSet::new();
        let mut gammas = HashSet::new();
        for t in &c.transitions {
            let tel = Element::Transition { chart: c.name.clone(), id: t.id.clone() };
            if !ids.insert(t.id.as_str()) {
                d.push(Diagnostic::on(DiagCode::DuplicateName, tel.clone(), format!("transition `{}` declared twice", t.id)));
            }
            for s in [&t.source, &t.target] {
                if !states.contains(s.as_str()) {
                    d.push(Diagnostic::on(DiagCode::UnknownState, tel.clone(), format!("unknown state `{s}`")));
                }
            }
            if t.priority == 0 {
                d.push(Diagnostic::on(DiagCode::MissingPriority, tel.clone(), "transition priority must be positive"));
            }
            if !gammas.insert((t.source.as_str(), t.priority)) {
                d.push(Diagnostic::on(
                    DiagCode::DuplicateName,
                    tel.clone(),
                    format!("priority {} used twice among transitions leaving `{}`", t.priority, t.source),
                ));
            }
            check_guard(net, &t.guard, &tel, &mut d);
            check_actions(net, &t.action, &tel, &mut d);
        }

        let init_out: Vec<_> = c.transitions.iter().filter(|t| t.source == c.initial).collect();
        let iel = Element::Initial { chart: c.name.clone() };
        if init_out.len() != 1 {
            d.push(Diagnostic::on(
                DiagCode::InitialOutDegree,
                iel,
                format!("initial state `{}` must have exactly one outgoing transition, found {}", c.initial, init_out.len()),
            ));
        } else {
            let t = init_out[0];
            let tel = Element::Transition { chart: c.name.clone(), id: t.id.clone() };
            if t.guard != Expr::Bool(true) {
                d.push(Diagnostic::on(
                    DiagCode::InitialGuardNotTrue,
                    tel.clone(),
                    format!("transition `{}` leaves the initial state and must be guarded by `true`", t.id),
                ));
            }
            if !t.action.is_empty() {
                d.push(Diagnostic::on(
                    DiagCode::InitialActionNotEmpty,
                    tel,
                    format!("transition `{}` leaves the initial state and must not have actions", t.id),
                ));
            }
        }
    }
    d
}

fn check_guard(net: &StatechartNetwork, g: &Expr, el: &Element, d: &mut Vec<Diagnostic>) {
    check_atoms(net, g, el, d);
    match type_of(g, &net.variables) {
        Ok(Ty::Bool) => {}
        Ok(Ty::Int) => d.push(Diagnostic::on(DiagCode::TypeMismatch, el.clone(), format!("guard `{g}` is not boolean"))),
        Err(m) => d.push(Diagnostic::on(code_for(&m), el.clone(), m)),
    }
}

fn check_actions(net: &StatechartNetwork, a: &ActionSeq, el: &Element, d: &mut Vec<Diagnostic>) {
    for u in a.iter() {
        match u {
            Update::Assign { var, expr } => {
                check_atoms(net, expr, el, d);
                let Some(decl) = net.var(var) else {
                    d.push(Diagnostic::on(DiagCode::UnknownVariable, el.clone(), format!("unknown variable `{var}`")));
                    continue;
                };
                let want = match decl.kind {
                    VarKind::Int { .. } => Ty::Int,
                    VarKind::Bool => Ty::Bool,
                    _ => {
                        d.push(Diagnostic::on(DiagCode::TypeMismatch, el.clone(), format!("`{var}` cannot be assigned")));
                        continue;
                    }
                };
                match type_of(expr, &net.variables) {
                    Ok(t) if t == want => {}
                    Ok(t) => d.push(Diagnostic::on(
                        DiagCode::TypeMismatch,
                        el.clone(),
                        format!("`{var}` expects {want:?} but `{expr}` is {t:?}"),
                    )),
                    Err(m) => d.push(Diagnostic::on(code_for(&m), el.clone(), m)),
                }
            }
            Update::Reset(_) | Update::Inc { .. } => d.push(Diagnostic::on(
                DiagCode::TypeMismatch,
                el.clone(),
                format!("`{u}` is a timed-automaton update"),
            )),
        }
    }
}

fn check_atoms(net: &StatechartNetwork, e: &Expr, el: &Element, d: &mut Vec<Diagnostic>) {
    e.walk(&mut |x| match x {
        Expr::Receive(c) | Expr::Send(c) => d.push(Diagnostic::on(
            DiagCode::ChannelAtomInStatechart,
            el.clone(),
            format!("channel atom on `{c}` is not allowed in a statechart"),
        )),
        Expr::Trigger(t) if t.kind == TriggerKind::Every && t.period == 0 => d.push(Diagnostic::on(
            DiagCode::ZeroPeriod,
            el.clone(),
            "`every 0s` never lets time pass",
        )),
        Expr::Event(n) if net.var(n).map(|v| v.kind) != Some(VarKind::Event) => {
            d.push(Diagnostic::on(DiagCode::UnknownVariable, el.clone(), format!("unknown event `{n}`")))
        }
        _ => {}
    });
}

fn code_for(msg: &str) -> DiagCode {
    if msg.starts_with("unknown variable") {
        DiagCode::UnknownVariable
    } else {
        DiagCode::TypeMismatch
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::parser::{check_source, parse_network};

    #[test]
    fn fig2_is_valid() {
        assert!(validate(&parse_network(fixtures::FIG2).unwrap()).is_empty());
    }

    #[test]
    fn priority_gap() {
        let src = "statechart A priority 1 { state a; state b; initial a; transition t: a -> b when true; }\n\
                   statechart B priority 3 { state a; state b; initial a; transition t: a -> b when true; }";
        let d = check_source(src).unwrap_err();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, DiagCode::PriorityGap);
        assert!(d[0].pos.is_some());
    }

    #[test]
    fn initial_guard_not_true() {
        let src = "var x: int[0..3] = 0;\nstatechart A priority 1 {\n  state a; state b; initial a;\n  transition t: a -> b when x > 0;\n}";
        let d = check_source(src).unwrap_err();
        assert_eq!(d[0].code, DiagCode::InitialGuardNotTrue);
        assert_eq!(d[0].pos.unwrap().line, 4);
    }

    #[test]
    fn every_zero_and_channels() {
        let src = "var ch: event;\nstatechart A priority 1 { state a; state b; initial a; transition t: a -> b when true; transition u: b -> a when every 0s || ch?; }";
        let codes: Vec<DiagCode> = check_source(src).unwrap_err().iter().map(|d| d.code).collect();
        assert!(codes.contains(&DiagCode::ZeroPeriod));
        assert!(codes.contains(&DiagCode::ChannelAtomInStatechart));
    }

    #[test]
    fn domain_checks() {
        let src = "var x: int[3..1] = 2; var y: int[0..3] = 9;\nstatechart A priority 1 { state a; initial a; transition t: a -> a when true; }";
        let codes: Vec<DiagCode> = check_source(src).unwrap_err().iter().map(|d| d.code).collect();
        assert_eq!(codes, vec![DiagCode::EmptyDomain, DiagCode::InitialOutOfDomain]);
    }

    #[test]
    fn initial_out_degree_and_action() {
        let src = "var x: int[0..3] = 0;\nstatechart A priority 1 { state a; state b; initial a; transition t: a -> b when true do { x := 1; }; }\n\
                   statechart B priority 2 { state a; initial a; }";
        let codes: Vec<DiagCode> = check_source(src).unwrap_err().iter().map(|d| d.code).collect();
        assert!(codes.contains(&DiagCode::InitialActionNotEmpty));
        assert!(codes.contains(&DiagCode::InitialOutDegree));
    }
}
