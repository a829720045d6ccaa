//! Random valid networks in the DSL, for differential testing of the
//! transformation against both semantics.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FuzzLimits {
    pub max_charts: usize,
    /// States per chart, including the initial one.
    pub max_states: usize,
    pub max_events: usize,
    /// Timing-trigger occurrences per network.
    pub max_triggers: usize,
    /// Largest upper bound of an int domain (domains start at 0).
    pub max_domain: i64,
    pub max_period: u64,
}

impl Default for FuzzLimits {
    fn default() -> Self {
        FuzzLimits { max_charts: 3, max_states: 5, max_events: 2, max_triggers: 1, max_domain: 7, max_period: 6 }
    }
}

struct Gen<'a> {
    rng: ChaCha8Rng,
    ints: Vec<(String, i64)>,
    bools: Vec<String>,
    events: Vec<String>,
    triggers_left: usize,
    limits: &'a FuzzLimits,
}

impl Gen<'_> {
    fn atom(&mut self) -> String {
        loop {
            match self.rng.gen_range(0..6) {
                0 => return "true".into(),
                1 | 2 if !self.ints.is_empty() => {
                    let (v, hi) = self.ints.choose(&mut self.rng).cloned().expect("non-empty");
                    let op = *["<", "<=", "==", "!=", ">=", ">"].choose(&mut self.rng).expect("non-empty");
                    return format!("{v} {op} {}", self.rng.gen_range(0..=hi));
                }
                3 if !self.bools.is_empty() => return self.bools.choose(&mut self.rng).cloned().expect("non-empty"),
                4 if !self.events.is_empty() => return self.events.choose(&mut self.rng).cloned().expect("non-empty"),
                5 if self.triggers_left > 0 && self.rng.gen_bool(0.5) => {
                    self.triggers_left -= 1;
                    let kw = if self.rng.gen_bool(0.5) { "after" } else { "every" };
                    return format!("{kw} {}s", self.rng.gen_range(1..=self.limits.max_period));
                }
                _ => {}
            }
        }
    }

    fn guard(&mut self, depth: u32) -> String {
        if depth == 0 || self.rng.gen_bool(0.5) {
            return self.atom();
        }
        match self.rng.gen_range(0..3) {
            0 => format!("({} && {})", self.guard(depth - 1), self.guard(depth - 1)),
            1 => format!("({} || {})", self.guard(depth - 1), self.guard(depth - 1)),
            _ => format!("!({})", self.guard(depth - 1)),
        }
    }

    fn update(&mut self) -> Option<String> {
        if !self.bools.is_empty() && self.rng.gen_bool(0.25) {
            let b = self.bools.choose(&mut self.rng).cloned().expect("non-empty");
            return Some(format!("{b} := !{b};"));
        }
        let (v, hi) = self.ints.choose(&mut self.rng).cloned()?;
        Some(match self.rng.gen_range(0..10) {
            // Can leave the domain; both sides must then fail alike.
            0 => format!("{v} := {v} + 1;"),
            1 if !self.ints.is_empty() => {
                let (w, _) = self.ints.choose(&mut self.rng).cloned().expect("non-empty");
                format!("{v} := {w};")
            }
            _ => format!("{v} := {};", self.rng.gen_range(0..=hi)),
        })
    }

    fn block(&mut self, p: f64) -> String {
        if !self.rng.gen_bool(p) {
            return String::new();
        }
        let n = self.rng.gen_range(1..=2);
        let items: Vec<String> = (0..n).filter_map(|_| self.update()).collect();
        if items.is_empty() {
            String::new()
        } else {
            format!("{{ {} }}", items.join(" "))
        }
    }
}

/// A random network that passes validation, determined by `seed`.
pub fn random_network_source(seed: u64, limits: &FuzzLimits) -> String {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        ints: Vec::new(),
        bools: Vec::new(),
        events: Vec::new(),
        triggers_left: 0,
        limits,
    };
    g.triggers_left = g.rng.gen_range(0..=limits.max_triggers);
    let mut out = String::new();
    for i in 0..g.rng.gen_range(1..=2) {
        let hi = g.rng.gen_range(1..=limits.max_domain);
        let init = g.rng.gen_range(0..=hi);
        let _ = writeln!(out, "var v{i}: int[0..{hi}] = {init};");
        g.ints.push((format!("v{i}"), hi));
    }
    if g.rng.gen_bool(0.5) {
        let _ = writeln!(out, "var b0: bool = {};", g.rng.gen_bool(0.5));
        g.bools.push("b0".into());
    }
    for i in 0..g.rng.gen_range(0..=limits.max_events) {
        let _ = writeln!(out, "var e{i}: event;");
        g.events.push(format!("e{i}"));
    }

    let charts = g.rng.gen_range(1..=limits.max_charts);
    for c in 0..charts {
        let states = g.rng.gen_range(2..=limits.max_states.max(2));
        let _ = writeln!(out, "\nstatechart C{c} priority {} {{", c + 1);
        for s in 0..states {
            let mut line = format!("  state c{c}s{s}");
            if s > 0 {
                let entry = g.block(0.3);
                if !entry.is_empty() {
                    let _ = write!(line, " entry {entry}");
                }
                let exit = g.block(0.2);
                if !exit.is_empty() {
                    let _ = write!(line, " exit {exit}");
                }
            }
            let _ = writeln!(out, "{line};");
        }
        let _ = writeln!(out, "  initial c{c}s0;");
        let mut tid = 0;
        let target = g.rng.gen_range(1..states);
        let _ = writeln!(out, "  transition c{c}t{tid}: c{c}s0 -> c{c}s{target} when true;");
        tid += 1;
        for s in 1..states {
            for prio in 1..=g.rng.gen_range(0..=3) {
                let target = g.rng.gen_range(1..states);
                let guard = g.guard(2);
                let action = g.block(0.4);
                let action = if action.is_empty() { String::new() } else { format!(" do {action}") };
                let _ = writeln!(out, "  transition c{c}t{tid}: c{c}s{s} -> c{c}s{target} priority {prio} when {guard}{action};");
                tid += 1;
            }
        }
        out.push_str("}\n");
    }
    out
}
