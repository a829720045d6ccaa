//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use scforge_core::equivalence::check_random;
use scforge_core::export::{parse_document, read_uppaal_xml, write_queries, write_uppaal_xml, ExportOptions};
use scforge_core::fixtures;
use scforge_core::fuzz::{random_network_source, FuzzLimits};
use scforge_core::parser::check_source;
use scforge_core::sc::{EventEnv, ScEngine, Schedule};
use scforge_core::transform::{check_determinism, check_maps, transform_all, transform_with, TransformOptions};
use scforge_core::verify::{check_invariant, parse_properties, Outcome, VerifyOptions};
use scforge_core::{parse_network, StatechartNetwork};

const FUZZ_NETWORKS: u64 = 200;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn fuzz_network(seed: u64) -> StatechartNetwork {
    check_source(&random_network_source(seed, &FuzzLimits::default())).expect("fuzz network validates").0
}

fn fixture_networks() -> Vec<(&'static str, StatechartNetwork)> {
    [("fig2", fixtures::FIG2), ("cardiac", fixtures::CARDIAC), ("cardiac_mutated", fixtures::CARDIAC_MUTATED)]
        .into_iter()
        .map(|(n, s)| (n, parse_network(s).expect("fixture parses")))
        .collect()
}

fn within(limit: Duration, start: Instant, ok: String) -> Check {
    let took = start.elapsed();
    if took < limit {
        Ok(format!("{ok} in {:.2?}", took))
    } else {
        Err(format!("{ok} but took {:.2?} (limit {:?})", took, limit))
    }
}

/// Stage-2, stage-6 and stage-7 edges of the two-chart example, in the
/// compact tuple notation.
const STAGE2_T3: &str = "t3 = (s2, NULL, <x=2; x=0; x=5>, NULL, s1)";
const STAGE6_T4: &str = "t4 = (s2, x>1 && !(x>0), x=2, NULL, s2)";
const STAGE7: [&str; 13] = [
    "t1 = (s0_1, true && alpha==1, <x=5; Inc(alpha)>, NULL, s1)",
    "t2 = (s1, eventA? && alpha==1, Inc(alpha), NULL, s2)",
    "t3 = (s2, x>0 && alpha==1, <x=2; x=0; x=5; Inc(alpha)>, NULL, s1)",
    "t4 = (s2, x>1 && !(x>0) && alpha==1, <x=2; Inc(alpha)>, NULL, s2)",
    "stay_s0_1 = (s0_1, !true && alpha==1, Inc(alpha), NULL, s0_1)",
    "stay_s1 = (s1, !eventA? && alpha==1, Inc(alpha), NULL, s1)",
    "stay_s2 = (s2, !(x>0) && !(x>1 && !(x>0)) && alpha==1, Inc(alpha), NULL, s2)",
    "t5 = (s0_2, true && alpha==2, Inc(alpha), NULL, s3)",
    "t6 = (s3, after5s? && alpha==2, Inc(alpha), NULL, s4)",
    "t7 = (s4, every10s? && alpha==2, Inc(alpha), NULL, s3)",
    "stay_s0_2 = (s0_2, !true && alpha==2, Inc(alpha), NULL, s0_2)",
    "stay_s3 = (s3, !after5s? && alpha==2, Inc(alpha), NULL, s3)",
    "stay_s4 = (s4, !every10s? && alpha==2, Inc(alpha), NULL, s4)",
];

fn golden_transformation() -> Check {
    let start = Instant::now();
    let net = parse_network(fixtures::FIG2).map_err(|e| format!("{e:?}"))?;
    let t = transform_with(&net, &TransformOptions::default()).map_err(|e| e.to_string())?;
    let lines = |k: usize| -> Vec<String> { t.stages[k - 1].dump().lines().map(|l| l.trim().to_string()).collect() };
    let has = |k: usize, want: &str| lines(k).iter().any(|l| l == want);
    if !has(2, STAGE2_T3) {
        return Err(format!("stage 2 lacks `{STAGE2_T3}`"));
    }
    if !has(6, STAGE6_T4) {
        return Err(format!("stage 6 lacks `{STAGE6_T4}`"));
    }
    let ids: Vec<String> = t.stages[6].transformed().flat_map(|a| a.edges.iter().map(|e| format!("{} = (", e.id))).collect();
    let stage7 = lines(7);
    let mut want: Vec<&str> = STAGE7.to_vec();
    let mut got: Vec<&str> = stage7.iter().filter(|l| ids.iter().any(|i| l.starts_with(i.as_str()))).map(String::as_str).collect();
    want.sort_unstable();
    got.sort_unstable();
    if got != want {
        return Err(format!("stage 7 edges differ: {got:#?}"));
    }
    within(Duration::from_secs(1), start, "stage 2/6/7 tuples and 13 lockstep edges match".into())
}

fn fig2_equivalence() -> Check {
    let start = Instant::now();
    let net = parse_network(fixtures::FIG2).map_err(|e| format!("{e:?}"))?;
    let (ta, map) = transform_all(&net).map_err(|e| e.to_string())?;
    let r = check_random(&net, &ta, &map, 100, 50, 1).map_err(|e| e.to_string())?;
    if !r.is_equivalent() || r.schedules_tested != 100 {
        return Err(format!("{} of {} schedules diverge: {:?}", r.divergent_schedules, r.schedules_tested, r.first_divergence));
    }
    within(Duration::from_secs(10), start, "100 schedules x 50 cycles, 0 divergences".into())
}

fn fuzz_equivalence() -> Check {
    let start = Instant::now();
    for seed in 0..FUZZ_NETWORKS {
        let net = fuzz_network(seed);
        let (ta, map) = transform_all(&net).map_err(|e| format!("seed {seed}: {e}"))?;
        let r = check_random(&net, &ta, &map, 10, 30, seed).map_err(|e| format!("seed {seed}: {e}"))?;
        if !r.is_equivalent() {
            return Err(format!("seed {seed} diverges: {:?}", r.first_divergence));
        }
    }
    within(Duration::from_secs(120), start, format!("{FUZZ_NETWORKS} networks x 10 schedules x 30 cycles, 0 divergences"))
}

fn all_models() -> Vec<(String, StatechartNetwork)> {
    let mut out: Vec<(String, StatechartNetwork)> = fixture_networks().into_iter().map(|(n, m)| (n.to_string(), m)).collect();
    out.extend((0..FUZZ_NETWORKS).map(|s| (format!("fuzz {s}"), fuzz_network(s))));
    out
}

fn determinism() -> Check {
    let mut checked = 0;
    for (name, net) in all_models() {
        let (ta, map) = transform_all(&net).map_err(|e| format!("{name}: {e}"))?;
        let r = check_determinism(&ta, &map).map_err(|e| format!("{name}: {e}"))?;
        if let Some(v) = r.violations.first() {
            return Err(format!("{name}: {} violations, first {v:?}", r.violations.len()));
        }
        checked += 1;
    }
    Ok(format!("{checked} models, 0 violations"))
}

fn case_study() -> Check {
    let start = Instant::now();
    let opts = VerifyOptions::new(25);
    let props = parse_properties(fixtures::CARDIAC_PROPS).map_err(|e| e.to_string())?;
    let (p1, p2) = (&props[0], &props[1]);
    let good = parse_network(fixtures::CARDIAC).map_err(|e| format!("{e:?}"))?;
    for p in [p1, p2] {
        if !check_invariant(&good, p, opts).map_err(|e| e.to_string())?.holds() {
            return Err(format!("{} fails on the original model", p.name));
        }
    }
    let bad = parse_network(fixtures::CARDIAC_MUTATED).map_err(|e| format!("{e:?}"))?;
    if !check_invariant(&bad, p1, opts).map_err(|e| e.to_string())?.holds() {
        return Err("P1 fails on the mutated model".into());
    }
    let Outcome::Violated(c) = check_invariant(&bad, p2, opts).map_err(|e| e.to_string())?.outcome else {
        return Err("P2 holds on the mutated model".into());
    };
    let n = c.trace.statuses.len();
    let schedule = Schedule::parse(&c.schedule).map_err(|e| e.to_string())?;
    let replay = ScEngine::new(&bad)
        .map_err(|e| e.to_string())?
        .run(&EventEnv::new(schedule), n as u64)
        .map_err(|e| e.to_string())?;
    if replay.statuses.get(..n) != Some(&c.trace.statuses[..]) {
        return Err("P2 counterexample does not replay".into());
    }
    within(Duration::from_secs(30), start, format!("P1, P2 hold; mutant violates P2 after {} statuses, replayed", n))
}

fn structural_maps() -> Check {
    let mut checked = 0;
    for (name, net) in all_models() {
        let (ta, map) = transform_all(&net).map_err(|e| format!("{name}: {e}"))?;
        let v = check_maps(&net, &ta, &map);
        if !v.is_empty() {
            return Err(format!("{name}: {v:?}"));
        }
        checked += 1;
    }
    Ok(format!("{checked} models, maps bijective/injective, extras auxiliary"))
}

fn export_round_trip() -> Check {
    for (name, net) in fixture_networks() {
        let (ta, _) = transform_all(&net).map_err(|e| format!("{name}: {e}"))?;
        let x = write_uppaal_xml(&ta, ExportOptions::default()).map_err(|e| format!("{name}: {e}"))?;
        parse_document(&x.xml).map_err(|e| format!("{name}: not well-formed: {e}"))?;
        let back = read_uppaal_xml(&x.xml).map_err(|e| format!("{name}: {e}"))?;
        if back != ta {
            return Err(format!("{name}: read-back differs"));
        }
    }
    let q = write_queries(&parse_properties(fixtures::CARDIAC_PROPS).map_err(|e| e.to_string())?);
    let p1 = "A[] Treatment.ActivateDefibrillaotr imply Breath == 0 && Rhythm == 0";
    if !q.lines().any(|l| l == p1) {
        return Err(format!("query file lacks `{p1}`"));
    }
    Ok("3 fixtures round-trip, well-formed, P1 query verbatim".into())
}

fn mutation_sensitivity() -> Check {
    let net = parse_network(fixtures::FIG2).map_err(|e| format!("{e:?}"))?;
    let mut seen = Vec::new();
    for rule in 2..=7 {
        let t = transform_with(&net, &TransformOptions::skipping(rule)).map_err(|e| format!("rule {rule}: {e}"))?;
        match check_random(&net, &t.ta, &t.map, 100, 50, 1) {
            Ok(r) if r.is_equivalent() => return Err(format!("skipping rule {rule} goes undetected")),
            Ok(r) => seen.push(format!("{rule}:divergence@{}", r.first_divergence.map_or(0, |d| d.schedule_index))),
            Err(_) => seen.push(format!("{rule}:invalid")),
        }
    }
    Ok(format!("every skipped rule detected [{}]", seen.join(" ")))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("golden transformation", golden_transformation),
        ("two-chart equivalence", fig2_equivalence),
        ("transformation fuzz", fuzz_equivalence),
        ("determinism of rewritten guards", determinism),
        ("cardiac case study", case_study),
        ("structural maps", structural_maps),
        ("export round trip", export_round_trip),
        ("mutation sensitivity", mutation_sensitivity),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(msg) => println!("criterion {} {name}: PASS ({msg})", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({msg})", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
