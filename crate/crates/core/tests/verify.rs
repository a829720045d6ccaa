use std::collections::BTreeSet;
use std::time::Instant;

use scforge_core::sc::{EventEnv, ScEngine, Schedule};
use scforge_core::transform::transform_all;
use scforge_core::verify::{check_invariant, check_invariant_ta, parse_properties, reachable, Outcome, SafetyProperty, VerifyOptions};
use scforge_core::{fixtures, parse_network, StatechartNetwork, SystemStatus};

/// Depth-limited DFS over explicit schedules: every status seen within
/// `cycles` cycles under every per-cycle event subset.
fn dfs_reachable(net: &StatechartNetwork, cycles: u64) -> BTreeSet<SystemStatus> {
    let events: Vec<&str> = net.events();
    let eng = ScEngine::new(net).unwrap();
    let mut out = BTreeSet::new();
    let mut stack = vec![Schedule::new()];
    while let Some(s) = stack.pop() {
        let n = schedule_len(&s);
        let trace = eng.run(&EventEnv::new(s.clone()), n).unwrap();
        out.extend(trace.statuses);
        if n < cycles {
            for m in 0..1u32 << events.len() {
                let mut c = s.clone();
                c.cycles.insert(n, BTreeSet::new());
                for (b, e) in events.iter().enumerate() {
                    if m >> b & 1 == 1 {
                        c = c.raise(n, e);
                    }
                }
                stack.push(c);
            }
        }
    }
    out
}

/// Cycles fixed by the schedule, including cycles that raise nothing.
fn schedule_len(s: &Schedule) -> u64 {
    s.cycles.keys().next_back().map_or(0, |k| k + 1)
}

/// Shortest violation length (in statuses) over all schedules, by DFS.
fn dfs_shortest(net: &StatechartNetwork, p: &SafetyProperty, cycles: u64) -> Option<usize> {
    let ci = net.charts.iter().position(|c| c.name == p.chart).unwrap();
    let cond = scforge_core::parser::resolve_names(&p.condition, &net.variables);
    let bad = |s: &SystemStatus| {
        s.states[ci] == p.state
            && scforge_core::eval::eval_expr(&cond, &s.valuation, &Default::default()).unwrap() != scforge_core::Value::Bool(true)
    };
    let events = net.events();
    let eng = ScEngine::new(net).unwrap();
    let mut best: Option<usize> = None;
    let mut stack = vec![Schedule::new()];
    while let Some(s) = stack.pop() {
        let n = schedule_len(&s);
        let trace = eng.run(&EventEnv::new(s.clone()), n).unwrap();
        if let Some(i) = trace.statuses.iter().position(bad) {
            best = Some(best.map_or(i + 1, |b| b.min(i + 1)));
            continue;
        }
        if n < cycles {
            for m in 0..1u32 << events.len() {
                let mut c = s.clone();
                c.cycles.insert(n, BTreeSet::new());
                for (b, e) in events.iter().enumerate() {
                    if m >> b & 1 == 1 {
                        c = c.raise(n, e);
                    }
                }
                stack.push(c);
            }
        }
    }
    best
}

#[test]
fn bfs_matches_dfs_on_fig2() {
    let net = parse_network(fixtures::FIG2).unwrap();
    for cycles in [0, 1, 3, 7] {
        assert_eq!(reachable(&net, VerifyOptions::new(cycles)).unwrap(), dfs_reachable(&net, cycles), "cycles {cycles}");
    }
}

#[test]
fn counterexamples_are_minimal() {
    let net = parse_network(fixtures::FIG2).unwrap();
    for q in ["A[] Y1.s2 imply x == 0", "A[] Y1.s1 imply x == 0", "A[] Y2.s4 imply x == 2", "A[] Y1.s2 imply x == 5"] {
        let p = SafetyProperty::parse(q, "Q").unwrap();
        let r = check_invariant(&net, &p, VerifyOptions::new(7)).unwrap();
        let got = match r.outcome {
            Outcome::Holds => None,
            Outcome::Violated(c) => Some(c.trace.statuses.len()),
        };
        assert_eq!(got, dfs_shortest(&net, &p, 7), "{q}");
    }
}

#[test]
fn cardiac_case_study() {
    let start = Instant::now();
    let props = parse_properties(fixtures::CARDIAC_PROPS).unwrap();
    let net = parse_network(fixtures::CARDIAC).unwrap();
    for p in &props {
        assert!(check_invariant(&net, p, VerifyOptions::new(30)).unwrap().holds(), "{}", p.name);
    }
    let bad = parse_network(fixtures::CARDIAC_MUTATED).unwrap();
    assert!(check_invariant(&bad, &props[0], VerifyOptions::new(30)).unwrap().holds());
    let r = check_invariant(&bad, &props[1], VerifyOptions::new(30)).unwrap();
    let Outcome::Violated(c) = r.outcome else { panic!("P2 should fail on the mutated model") };
    assert_eq!(c.violating().states[0], "InjectEPI");
    let replay = ScEngine::new(&bad)
        .unwrap()
        .run(&EventEnv::new(Schedule::parse(&c.schedule).unwrap()), c.trace.statuses.len() as u64)
        .unwrap();
    assert_eq!(replay.statuses[..c.trace.statuses.len()], c.trace.statuses[..]);
    assert!(start.elapsed().as_secs() < 30);
}

#[test]
fn automata_side_agrees() {
    let props = parse_properties(fixtures::CARDIAC_PROPS).unwrap();
    for src in [fixtures::CARDIAC, fixtures::CARDIAC_MUTATED] {
        let net = parse_network(src).unwrap();
        let (ta, map) = transform_all(&net).unwrap();
        for p in &props {
            let sc = check_invariant(&net, p, VerifyOptions::new(25)).unwrap();
            let tu = check_invariant_ta(&net, &ta, &map, p, VerifyOptions::new(25)).unwrap();
            assert_eq!(sc.outcome, tu.outcome, "{}", p.name);
        }
    }
}
