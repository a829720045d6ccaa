use crate::expr::{Style, Value};
use crate::model::{StatechartNetwork, VarKind};

/// Canonical DSL text. Byte-stable: priorities and initial values are always
/// written out, so `parse(print(n)) == n` for parsed networks.
pub fn print_network(net: &StatechartNetwork) -> String {
    let mut out = String::new();
    for v in &net.variables {
        let ty = match v.kind {
            VarKind::Int { bounds: Some((lo, hi)) } => format!("int[{lo}..{hi}]"),
            VarKind::Int { bounds: None } => "int".into(),
            VarKind::Bool => "bool".into(),
            VarKind::Event => "event".into(),
            VarKind::Channel => "chan".into(),
            VarKind::Clock => "clock".into(),
        };
        match v.initial {
            Some(Value::Int(i)) => out.push_str(&format!("var {}: {ty} = {i};\n", v.name)),
            Some(Value::Bool(b)) => out.push_str(&format!("var {}: {ty} = {b};\n", v.name)),
            None => out.push_str(&format!("var {}: {ty};\n", v.name)),
        }
    }
    for c in &net.charts {
        out.push_str(&format!("\nstatechart {} priority {} {{\n", c.name, c.priority));
        for s in &c.states {
            out.push_str(&format!("  state {}", s.name));
            if !s.entry.is_empty() {
                out.push_str(&format!(" entry {{ {} }}", s.entry.dsl()));
            }
            if !s.exit.is_empty() {
                out.push_str(&format!(" exit {{ {} }}", s.exit.dsl()));
            }
            out.push_str(";\n");
        }
        out.push_str(&format!("  initial {};\n", c.initial));
        for t in &c.transitions {
            out.push_str(&format!(
                "  transition {}: {} -> {} priority {} when {}",
                t.id,
                t.source,
                t.target,
                t.priority,
                t.guard.display(Style::Spaced)
            ));
            if !t.action.is_empty() {
                out.push_str(&format!(" do {{ {} }}", t.action.dsl()));
            }
            out.push_str(";\n");
        }
        out.push_str("}\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::parser::parse_network;

    #[test]
    fn round_trip_fixtures() {
        for src in [fixtures::FIG2, fixtures::CARDIAC, fixtures::CARDIAC_MUTATED] {
            let net = parse_network(src).unwrap();
            let printed = print_network(&net);
            assert_eq!(parse_network(&printed).unwrap(), net);
            assert_eq!(print_network(&parse_network(&printed).unwrap()), printed);
        }
    }
}
