use std::collections::BTreeSet;

use proptest::prelude::*;

use scforge_core::equivalence::{check_traces, random_schedules, CoSimulator};
use scforge_core::eval::{apply_actions, eval_expr, CycleEnv};
use scforge_core::export::{parse_document, read_uppaal_xml, write_uppaal_xml, ExportOptions};
use scforge_core::fuzz::{random_network_source, FuzzLimits};
use scforge_core::parser::check_source;
use scforge_core::parser::print_network;
use scforge_core::sc::{EventEnv, ScEngine};
use scforge_core::ta::{EntryKind, Role, TaEngine, TaNetwork};
use scforge_core::transform::{transform_with, TransformOptions};
use scforge_core::verify::{reachable, VerifyOptions};
use scforge_core::{ActionSeq, Expr, Label, StatechartNetwork, Update, Value, VarDecl, VarKind};

/// Edge ids with endpoints, per transformed automaton.
type Shape = Vec<(String, Vec<(String, String, String)>)>;

fn network(seed: u64) -> (String, StatechartNetwork) {
    let src = random_network_source(seed, &FuzzLimits::default());
    let (net, _) = check_source(&src).unwrap();
    (src, net)
}

fn decls() -> Vec<VarDecl> {
    vec![VarDecl::int("x", 0, 7, 0), VarDecl::int("y", 0, 7, 3), VarDecl::boolean("b", false)]
}

fn int_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![(0i64..9).prop_map(Expr::Int), prop_oneof![Just("x"), Just("y")].prop_map(Expr::var)];
    leaf.prop_recursive(2, 6, 2, |inner| {
        (inner.clone(), prop_oneof![Just(scforge_core::BinOp::Add), Just(scforge_core::BinOp::Sub)], inner)
            .prop_map(|(l, op, r)| Expr::bin(op, l, r))
    })
}

fn update() -> impl Strategy<Value = Update> {
    prop_oneof![
        (prop_oneof![Just("x"), Just("y")], int_expr()).prop_map(|(v, e)| Update::assign(v, e)),
        any::<bool>().prop_map(|b| Update::assign("b", Expr::Bool(b))),
        Just(Update::assign("b", Expr::not(Expr::var("b")))),
    ]
}

fn actions() -> impl Strategy<Value = ActionSeq> {
    prop::collection::vec(update(), 0..4).prop_map(ActionSeq::new)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn actions_compose_sequentially(a in actions(), b in actions(), x in 0i64..8, y in 0i64..8) {
        let d = decls();
        let v = scforge_core::Valuation::default().with("x", Value::Int(x)).with("y", Value::Int(y)).with("b", Value::Bool(false));
        let whole = apply_actions(&a.then(&b), &v, &d);
        let staged = apply_actions(&a, &v, &d).and_then(|m| apply_actions(&b, &m, &d));
        prop_assert_eq!(&whole, &staged);
        if let Ok(out) = whole {
            for decl in &d {
                prop_assert!(decl.kind.admits(out.get(&decl.name).unwrap()));
            }
        }
    }

    #[test]
    fn evaluation_is_repeatable(e in int_expr(), x in 0i64..8, y in 0i64..8) {
        let v = scforge_core::Valuation::default().with("x", Value::Int(x)).with("y", Value::Int(y));
        prop_assert_eq!(eval_expr(&e, &v, &CycleEnv::default()), eval_expr(&e, &v, &CycleEnv::default()));
    }

    #[test]
    fn printing_then_parsing_is_identity(seed in any::<u64>()) {
        let (_, net) = network(seed);
        let (again, _) = check_source(&print_network(&net)).unwrap();
        prop_assert_eq!(again, net);
    }

    #[test]
    fn diagnostics_point_into_the_document(seed in any::<u64>(), cut in 0.0f64..1.0) {
        let (src, _) = network(seed);
        let mut end = (src.len() as f64 * cut) as usize;
        while !src.is_char_boundary(end) {
            end -= 1;
        }
        let broken = &src[..end];
        if let Err(diags) = check_source(broken) {
            let lines = broken.lines().count().max(1);
            for d in diags {
                let p = d.pos.expect("diagnostic without position");
                prop_assert!(p.line >= 1 && p.line <= lines + 1, "{:?} outside {} lines", p, lines);
            }
        }
    }

    #[test]
    fn statechart_runs_are_deterministic_and_synchronous(seed in any::<u64>()) {
        let (_, net) = network(seed);
        let eng = ScEngine::new(&net).unwrap();
        let env = EventEnv::new(random_schedules(&net.events(), 1, 20, seed).remove(0));
        let (a, ea) = eng.run_partial(&env, 20);
        let (b, eb) = eng.run_partial(&env, 20);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(ea, eb);
        let n = net.charts.len();
        for (k, st) in a.statuses.iter().enumerate().skip(1) {
            prop_assert_eq!(st.exec_index as usize, k % n + 1);
            let prev = &a.statuses[k - 1];
            let moved: Vec<usize> = (0..n).filter(|&i| prev.states[i] != st.states[i]).collect();
            prop_assert!(moved.iter().all(|&i| i == (k - 1) % n));
        }
    }

    #[test]
    fn fired_transitions_respect_priority(seed in any::<u64>()) {
        let (_, net) = network(seed);
        let eng = ScEngine::new(&net).unwrap();
        let schedule = random_schedules(&net.events(), 1, 20, seed).remove(0);
        let (trace, _) = eng.run_partial(&EventEnv::new(schedule.clone()), 20);
        let n = net.charts.len();
        let mut timers = eng.initial_timers();
        for (i, label) in trace.labels.iter().enumerate() {
            let (cycle, chart) = (i / n, i % n);
            if chart == 0 && i > 0 {
                timers.advance(1);
            }
            let env = CycleEnv {
                events: schedule.events_at(cycle as u64).cloned().unwrap_or_default(),
                triggers: timers.raised_set(),
            };
            let pre = &trace.statuses[i];
            let c = &net.charts[chart];
            let on = |g: &Expr| eval_expr(g, &pre.valuation, &env).unwrap() == Value::Bool(true);
            let out = c.outgoing(&pre.states[chart]);
            match label {
                Label::Stutter => prop_assert!(out.iter().all(|t| !on(&t.guard))),
                Label::Fired(id) => {
                    let t = c.transition(id).unwrap();
                    prop_assert!(on(&t.guard));
                    prop_assert!(out.iter().filter(|o| o.priority < t.priority).all(|o| !on(&o.guard)));
                }
            }
        }
    }

    #[test]
    fn rules_touch_only_their_fields(seed in any::<u64>()) {
        let (_, net) = network(seed);
        let t = transform_with(&net, &TransformOptions::default()).unwrap();
        let shape = |ta: &TaNetwork| -> Shape {
            ta.transformed()
                .map(|a| (a.name.clone(), a.edges.iter().map(|e| (e.id.clone(), e.source.clone(), e.target.clone())).collect()))
                .collect()
        };
        let s = &t.stages;
        for k in 1..5 {
            prop_assert_eq!(shape(&s[k]), shape(&s[0]));
        }
        let guards = |ta: &TaNetwork| -> Vec<Option<Expr>> { ta.transformed().flat_map(|a| a.edges.iter().map(|e| e.guard.clone())).collect() };
        let acts = |ta: &TaNetwork| -> Vec<ActionSeq> { ta.transformed().flat_map(|a| a.edges.iter().map(|e| e.action.clone())).collect() };
        // Rule 2 sets actions only; rule 3 guards only; rules 4-6 leave actions alone.
        prop_assert_eq!(guards(&s[1]), guards(&s[0]));
        prop_assert_eq!(acts(&s[2]), acts(&s[1]));
        for k in 3..6 {
            prop_assert_eq!(acts(&s[k]), acts(&s[2]));
        }
        prop_assert_eq!(&s[1].variables, &s[0].variables);
        prop_assert_eq!(&s[2].variables, &s[1].variables);
        prop_assert_eq!(&s[5].variables, &s[4].variables);
        prop_assert_eq!(s[5].automata.len(), s[4].automata.len());
        prop_assert_eq!(s[6].automata.len(), s[5].automata.len());
        // Rule 7 keeps every earlier edge as a prefix of each automaton.
        for (a6, a7) in s[5].transformed().zip(s[6].transformed()) {
            prop_assert_eq!(a7.edges.len(), a6.edges.len() + a6.locations.len());
            for (e6, e7) in a6.edges.iter().zip(&a7.edges) {
                prop_assert_eq!((&e6.id, &e6.source, &e6.target), (&e7.id, &e7.source, &e7.target));
            }
        }
    }

    #[test]
    fn automata_runs_keep_clock_and_lockstep_discipline(seed in any::<u64>()) {
        let (_, net) = network(seed);
        let t = transform_with(&net, &TransformOptions::default()).unwrap();
        let ta = &t.ta;
        let eng = TaEngine::new(ta).unwrap();
        let env = EventEnv::new(random_schedules(&net.events(), 1, 20, seed).remove(0));
        let (trace, _) = eng.run_partial(&env, 20);
        let n = ta.transformed().count();
        let alpha = ta.index_var.clone().unwrap();
        let mut step = 0usize;
        for w in trace.entries.windows(2) {
            let (prev, cur) = (&w[0], &w[1]);
            for (c, v) in &cur.status.clocks {
                let reset = cur.edges.iter().any(|(a, e)| ta.automaton(a).unwrap().edge(e).unwrap().clock_resets().contains(&c.as_str()));
                prop_assert!(reset || *v >= prev.status.clocks[c], "clock {} went back", c);
            }
            for (a, loc) in ta.automata.iter().zip(&cur.status.locations) {
                if let Some(inv) = &a.location(loc).unwrap().invariant {
                    let v = scforge_core::Valuation::default();
                    let clocks: Vec<(String, i64)> = cur.status.clocks.iter().map(|(k, v)| (k.clone(), *v)).collect();
                    let inv = clocks.iter().fold(inv.clone(), |e, (k, v)| e.rewrite(&mut |x| matches!(x, Expr::Var(n) if n == k).then(|| Expr::Int(*v))));
                    prop_assert_eq!(eval_expr(&inv, &v, &CycleEnv::default()).unwrap(), Value::Bool(true));
                }
            }
            if cur.kind == EntryKind::Step {
                let before = prev.status.valuation.get(&alpha).unwrap();
                prop_assert_eq!(before, Value::Int((step % n) as i64 + 1));
                let mover = ta.automaton(&cur.edges[0].0).unwrap();
                let Role::Transformed { priority, .. } = mover.role else { panic!("step by auxiliary automaton") };
                prop_assert_eq!(Value::Int(priority as i64), before);
                step += 1;
                let moved: BTreeSet<&String> = cur.edges.iter().map(|(a, _)| a).collect();
                prop_assert!(cur.edges.len() <= 2);
                for (a, (l0, l1)) in ta.automata.iter().zip(prev.status.locations.iter().zip(&cur.status.locations)) {
                    prop_assert!(l0 == l1 || moved.contains(&a.name));
                }
            }
        }
    }

    #[test]
    fn trace_comparison_is_reflexive_and_symmetric(seed in any::<u64>(), other in any::<u64>()) {
        let (_, net) = network(seed);
        let t = transform_with(&net, &TransformOptions::default()).unwrap();
        let sim = CoSimulator::new(&net, &t.ta, &t.map).unwrap();
        let events = net.events();
        let s1 = random_schedules(&events, 1, 15, seed).remove(0);
        let s2 = random_schedules(&events, 1, 15, other).remove(0);
        let (a, _) = sim.traces(&s1, 15).unwrap();
        let (b, _) = sim.traces(&s2, 15).unwrap();
        prop_assert!(check_traces(&a, &a).is_equivalent());
        let ab = check_traces(&a, &b);
        let ba = check_traces(&b, &a);
        prop_assert_eq!(ab.verdict, ba.verdict);
        prop_assert_eq!(ab.first_divergence.map(|d| d.step), ba.first_divergence.map(|d| d.step));
    }

    #[test]
    fn mutated_witnesses_replay(seed in any::<u64>(), rule in 2u8..=6) {
        let (_, net) = network(seed);
        let t = transform_with(&net, &TransformOptions::skipping(rule)).unwrap();
        let Ok(sim) = CoSimulator::new(&net, &t.ta, &t.map) else { return Ok(()) };
        for (i, s) in random_schedules(&net.events(), 5, 20, seed).iter().enumerate() {
            // Mutants may fail validation mid-run; that is a detection, not a witness.
            let Ok(first) = sim.compare(s, 20, i) else { continue };
            prop_assert_eq!(&first, &sim.compare(s, 20, i).unwrap());
            if let Some(d) = first {
                let replay = scforge_core::sc::Schedule::parse(&d.schedule).unwrap();
                prop_assert_eq!(Some(d), sim.compare(&replay, 20, i).unwrap());
            }
        }
    }

    #[test]
    fn explored_sets_are_stable(seed in any::<u64>()) {
        let (_, net) = network(seed);
        let a = format!("{:?}", reachable(&net, VerifyOptions::new(4)));
        prop_assert_eq!(a, format!("{:?}", reachable(&net, VerifyOptions::new(4))));
    }

    #[test]
    fn export_is_well_formed_and_reversible(seed in any::<u64>()) {
        let (_, net) = network(seed);
        let t = transform_with(&net, &TransformOptions::default()).unwrap();
        let x = write_uppaal_xml(&t.ta, ExportOptions::default()).unwrap();
        prop_assert_eq!(&x.xml, &write_uppaal_xml(&t.ta, ExportOptions::default()).unwrap().xml);
        let doc = parse_document(&x.xml).unwrap();
        let ids: BTreeSet<&str> = doc.descendants().filter(|n| n.has_tag_name("location")).filter_map(|n| n.attribute("id")).collect();
        for r in doc.descendants().filter(|n| n.has_tag_name("source") || n.has_tag_name("target") || n.has_tag_name("init")) {
            prop_assert!(ids.contains(r.attribute("ref").unwrap()));
        }
        prop_assert_eq!(read_uppaal_xml(&x.xml).unwrap(), t.ta);
    }
}

#[test]
fn fuzz_domains_stay_small() {
    for seed in 0..50 {
        let (_, net) = network(seed);
        for v in &net.variables {
            if let VarKind::Int { bounds: Some((lo, hi)) } = v.kind {
                assert!(lo == 0 && hi <= 7);
            }
        }
    }
}
