//! UPPAAL `<nta>` model and query files, plus read-back of the models this
//! module writes.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{ActionSeq, Update};
use crate::expr::{Expr, Style, Trigger, TriggerKind, Value};
use crate::model::{VarDecl, VarKind};
use crate::parser::{parse_expr, resolve_names};
use crate::ta::{Automaton, Edge, Location, Role, TaNetwork};
use crate::verify::SafetyProperty;

const HEADER: &str = "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n\
<!DOCTYPE nta PUBLIC '-//Uppaal Team//DTD Flat System 1.1//EN' 'http://www.it.uu.se/research/group/darts/uppaal/flat-1_2.dtd'>\n";

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ExportError {
    #[error("{automaton}.{edge}: {message}")]
    UnsupportedConstruct { automaton: String, edge: String, message: String },
    #[error("malformed model document: {0}")]
    Malformed(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportWarning {
    pub automaton: String,
    pub edge: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Exported {
    pub xml: String,
    /// Constructs emitted verbatim that UPPAAL may reject.
    pub warnings: Vec<ExportWarning>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExportOptions {
    /// Fail on the first unsupported construct instead of warning.
    pub strict: bool,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn spaced(e: &Expr) -> String {
    e.display(Style::Spaced).to_string()
}

fn declare(v: &VarDecl, index: Option<&str>) -> String {
    let init = match v.initial {
        Some(Value::Int(i)) => i.to_string(),
        Some(Value::Bool(b)) => b.to_string(),
        None => "0".into(),
    };
    match v.kind {
        VarKind::Int { bounds: Some((lo, hi)) } if index == Some(v.name.as_str()) => {
            format!("int[{lo},{hi}] {} = {init}; // lockstep index", v.name)
        }
        VarKind::Int { bounds: Some((lo, hi)) } => format!("int[{lo},{hi}] {} = {init};", v.name),
        VarKind::Int { bounds: None } => format!("int {} = {init};", v.name),
        VarKind::Bool => format!("bool {} = {init};", v.name),
        VarKind::Event => format!("bool {} = false; // event", v.name),
        VarKind::Channel => format!("chan {};", v.name),
        VarKind::Clock => format!("clock {};", v.name),
    }
}

fn assignment(u: &Update) -> String {
    match u {
        Update::Assign { var, expr } => format!("{var} = {}", spaced(expr)),
        Update::Reset(c) => format!("{c} = 0"),
        Update::Inc { var, n } => format!("{var} = {var} % {n} + 1"),
    }
}

fn is_sync(e: &Expr) -> bool {
    matches!(e, Expr::Receive(_) | Expr::Send(_))
}

/// Splits the first positive sync conjunct off the guard's left spine.
/// Returns the remaining guard and `(sync label, conjunct position, number of
/// remaining conjuncts)`.
fn split_sync(guard: &Expr) -> (Option<Expr>, Option<(String, usize, usize)>) {
    let parts = guard.left_conjuncts();
    let Some(pos) = parts.iter().position(|p| is_sync(p)) else {
        return (Some(guard.clone()), None);
    };
    let label = parts[pos].display(Style::Compact).to_string();
    let rest: Vec<Expr> = parts.iter().enumerate().filter(|(i, _)| *i != pos).map(|(_, p)| (*p).clone()).collect();
    let count = rest.len();
    let rest = if rest.is_empty() { None } else { Some(Expr::conjoin(rest)) };
    (rest, Some((label, pos, count)))
}

/// Serializes `ta`: one template per automaton in network order, global
/// declarations, and a system line instantiating every template once.
pub fn write_uppaal_xml(ta: &TaNetwork, opts: ExportOptions) -> Result<Exported, ExportError> {
    let mut warnings = Vec::new();
    let mut out = String::from(HEADER);
    out.push_str("<nta>\n");

    let mut decl = format!("// stage {}\n", ta.stage);
    for v in &ta.variables {
        decl.push_str(&declare(v, ta.index_var.as_deref()));
        decl.push('\n');
    }
    if let Some(ix) = &ta.index_var {
        let n = ta.transformed().count();
        let _ = writeln!(decl, "void Inc() {{ {ix} = {ix} % {n} + 1; }}");
    }
    let _ = writeln!(out, "  <declaration>{}</declaration>", escape(&decl));

    let mut next_id = 0usize;
    for a in &ta.automata {
        let _ = writeln!(out, "  <template>");
        let _ = writeln!(out, "    <name>{}</name>", escape(&a.name));
        let _ = writeln!(out, "    <declaration>// role: {}</declaration>", escape(&a.role.describe()));
        let base = next_id;
        for (i, l) in a.locations.iter().enumerate() {
            let _ = writeln!(out, "    <location id=\"id{}\" x=\"{}\" y=\"0\">", base + i, 200 * i);
            let _ = writeln!(out, "      <name>{}</name>", escape(&l.name));
            if let Some(inv) = &l.invariant {
                let _ = writeln!(out, "      <label kind=\"invariant\">{}</label>", escape(&spaced(inv)));
            }
            let _ = writeln!(out, "    </location>");
        }
        next_id += a.locations.len();
        let id_of = |name: &str| a.locations.iter().position(|l| l.name == name).map(|i| base + i);
        let init = id_of(&a.initial).ok_or_else(|| ExportError::Malformed(format!("{}: unknown initial location", a.name)))?;
        let _ = writeln!(out, "    <init ref=\"id{init}\"/>");
        for e in &a.edges {
            let src = id_of(&e.source).ok_or_else(|| ExportError::Malformed(format!("{}.{}: unknown source", a.name, e.id)))?;
            let dst = id_of(&e.target).ok_or_else(|| ExportError::Malformed(format!("{}.{}: unknown target", a.name, e.id)))?;
            let (guard, sync) = match &e.guard {
                Some(g) => split_sync(g),
                None => (None, None),
            };
            if let Some(g) = &guard {
                if g.contains(|x| matches!(x, Expr::Trigger(_))) {
                    return Err(ExportError::UnsupportedConstruct {
                        automaton: a.name.clone(),
                        edge: e.id.clone(),
                        message: "timing trigger atoms have no UPPAAL form before their timer automata exist".into(),
                    });
                }
            }
            let mut comments = format!("edge={}", e.id);
            if let Some((_, pos, count)) = &sync {
                let _ = write!(comments, "; sync={pos}");
                // A leading conjunct that is itself a conjunction flattens on read-back.
                if guard.as_ref().is_some_and(|g| g.left_conjuncts().len() != *count) {
                    let _ = write!(comments, "; parts={count}");
                }
            } else if e.guard.is_some() {
                comments.push_str("; guard");
            }
            if guard.as_ref().is_some_and(|g| g.contains(is_sync)) {
                let message = "sync atom kept in guard; UPPAAL accepts at most one positive synchronisation per edge".to_string();
                if opts.strict {
                    return Err(ExportError::UnsupportedConstruct { automaton: a.name.clone(), edge: e.id.clone(), message });
                }
                let _ = write!(comments, "; WARN {message}");
                warnings.push(ExportWarning { automaton: a.name.clone(), edge: e.id.clone(), message });
            }
            let _ = writeln!(out, "    <transition>");
            let _ = writeln!(out, "      <source ref=\"id{src}\"/>");
            let _ = writeln!(out, "      <target ref=\"id{dst}\"/>");
            if let Some(g) = &guard {
                let _ = writeln!(out, "      <label kind=\"guard\">{}</label>", escape(&spaced(g)));
            }
            if let Some((s, _, _)) = &sync {
                let _ = writeln!(out, "      <label kind=\"synchronisation\">{}</label>", escape(s));
            }
            if !e.action.is_empty() {
                let assigns: Vec<String> = e.action.iter().map(assignment).collect();
                let _ = writeln!(out, "      <label kind=\"assignment\">{}</label>", escape(&assigns.join(", ")));
            }
            let _ = writeln!(out, "      <label kind=\"comments\">{}</label>", escape(&comments));
            let _ = writeln!(out, "    </transition>");
        }
        let _ = writeln!(out, "  </template>");
    }
    let names: Vec<&str> = ta.automata.iter().map(|a| a.name.as_str()).collect();
    let _ = writeln!(out, "  <system>system {};</system>", escape(&names.join(", ")));
    out.push_str("</nta>\n");
    Ok(Exported { xml: out, warnings })
}

/// One query per line, as written in the property file.
pub fn write_queries(props: &[SafetyProperty]) -> String {
    props.iter().map(|p| format!("{}\n", p.text)).collect()
}

fn malformed(m: impl Into<String>) -> ExportError {
    ExportError::Malformed(m.into())
}

fn parse_value(s: &str) -> Result<Value, ExportError> {
    match s {
        "true" => Ok(Value::Bool(true)),
        "false" => Ok(Value::Bool(false)),
        _ => s.parse().map(Value::Int).map_err(|_| malformed(format!("bad initial value `{s}`"))),
    }
}

fn parse_declarations(text: &str) -> Result<(u8, Vec<VarDecl>, Option<String>), ExportError> {
    let mut stage = None;
    let mut vars = Vec::new();
    let mut index = None;
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if let Some(s) = line.strip_prefix("// stage ") {
            stage = Some(s.trim().parse().map_err(|_| malformed(format!("bad stage `{s}`")))?);
            continue;
        }
        if line.starts_with("void ") || line.starts_with("//") {
            continue;
        }
        let (body, comment) = match line.split_once("//") {
            Some((b, c)) => (b.trim(), Some(c.trim())),
            None => (line, None),
        };
        let body = body.strip_suffix(';').ok_or_else(|| malformed(format!("declaration `{line}` lacks `;`")))?;
        let (ty, rest) = body.split_once(' ').ok_or_else(|| malformed(format!("bad declaration `{line}`")))?;
        let (name, init) = match rest.split_once('=') {
            Some((n, v)) => (n.trim(), Some(parse_value(v.trim())?)),
            None => (rest.trim(), None),
        };
        let d = match ty {
            "chan" => VarDecl::channel(name),
            "clock" => VarDecl::clock(name),
            "bool" if comment == Some("event") => VarDecl::event(name),
            "bool" => VarDecl { name: name.to_string(), kind: VarKind::Bool, initial: init },
            "int" => VarDecl { name: name.to_string(), kind: VarKind::Int { bounds: None }, initial: init },
            t => {
                let range = t
                    .strip_prefix("int[")
                    .and_then(|r| r.strip_suffix(']'))
                    .and_then(|r| r.split_once(','))
                    .ok_or_else(|| malformed(format!("unknown type `{t}`")))?;
                let lo = range.0.trim().parse().map_err(|_| malformed(format!("bad bound in `{t}`")))?;
                let hi = range.1.trim().parse().map_err(|_| malformed(format!("bad bound in `{t}`")))?;
                VarDecl { name: name.to_string(), kind: VarKind::bounded(lo, hi), initial: init }
            }
        };
        if comment == Some("lockstep index") {
            index = Some(name.to_string());
        }
        vars.push(d);
    }
    Ok((stage.ok_or_else(|| malformed("missing `// stage` line"))?, vars, index))
}

fn parse_role(text: &str) -> Result<Role, ExportError> {
    let desc = text.trim().strip_prefix("// role:").ok_or_else(|| malformed("template lacks a role comment"))?.trim();
    let words: Vec<&str> = desc.split_whitespace().collect();
    let bad = || malformed(format!("bad role `{desc}`"));
    match words.as_slice() {
        ["transformed", chart, prio] => Ok(Role::Transformed { chart: chart.to_string(), priority: prio.parse().map_err(|_| bad())? }),
        ["event", ev] => Ok(Role::EventAux { event: ev.to_string() }),
        ["timer", kind, period, channel, clock] => {
            let period = period.parse().map_err(|_| bad())?;
            let trigger = match *kind {
                "after" => Trigger { kind: TriggerKind::After, period },
                "every" => Trigger { kind: TriggerKind::Every, period },
                _ => return Err(bad()),
            };
            Ok(Role::TimerAux { trigger, channel: channel.to_string(), clock: clock.to_string() })
        }
        _ => Err(bad()),
    }
}

fn parse_assignments(text: &str, vars: &[VarDecl]) -> Result<ActionSeq, ExportError> {
    let mut out = Vec::new();
    for part in text.split(", ").map(str::trim).filter(|p| !p.is_empty()) {
        let (var, rhs) = part.split_once(" = ").ok_or_else(|| malformed(format!("bad assignment `{part}`")))?;
        let var = var.trim();
        if rhs == "0" && vars.iter().any(|v| v.name == var && v.kind == VarKind::Clock) {
            out.push(Update::Reset(var.to_string()));
            continue;
        }
        if let Some(n) = rhs.strip_prefix(&format!("{var} % ")).and_then(|r| r.strip_suffix(" + 1")) {
            if let Ok(n) = n.parse() {
                out.push(Update::Inc { var: var.to_string(), n });
                continue;
            }
        }
        let e = parse_expr(rhs).map_err(|d| malformed(format!("`{rhs}`: {}", d.message)))?;
        out.push(Update::assign(var, resolve_names(&e, vars)));
    }
    Ok(ActionSeq::new(out))
}

fn label<'a>(node: roxmltree::Node<'a, 'a>, kind: &str) -> Option<&'a str> {
    node.children().find(|c| c.has_tag_name("label") && c.attribute("kind") == Some(kind)).and_then(|c| c.text())
}

fn child_text<'a>(node: roxmltree::Node<'a, 'a>, tag: &str) -> Option<&'a str> {
    node.children().find(|c| c.has_tag_name(tag)).map(|c| c.text().unwrap_or(""))
}

/// Parses any XML document, allowing the UPPAAL doctype line.
pub fn parse_document(xml: &str) -> Result<roxmltree::Document<'_>, roxmltree::Error> {
    let opts = roxmltree::ParsingOptions { allow_dtd: true, ..Default::default() };
    roxmltree::Document::parse_with_options(xml, opts)
}

/// Reads a document produced by [`write_uppaal_xml`] back into a network.
pub fn read_uppaal_xml(xml: &str) -> Result<TaNetwork, ExportError> {
    let doc = parse_document(xml).map_err(|e| malformed(e.to_string()))?;
    let root = doc.root_element();
    if !root.has_tag_name("nta") {
        return Err(malformed("root element is not <nta>"));
    }
    let (stage, variables, index_var) = parse_declarations(child_text(root, "declaration").unwrap_or(""))?;
    let expr = |s: &str| -> Result<Expr, ExportError> {
        let e = parse_expr(s).map_err(|d| malformed(format!("`{s}`: {}", d.message)))?;
        Ok(resolve_names(&e, &variables))
    };
    let mut automata = Vec::new();
    for t in root.children().filter(|c| c.has_tag_name("template")) {
        let name = child_text(t, "name").ok_or_else(|| malformed("template without a name"))?.to_string();
        let role = parse_role(child_text(t, "declaration").unwrap_or(""))?;
        let mut ids = Vec::new();
        let mut locations = Vec::new();
        for l in t.children().filter(|c| c.has_tag_name("location")) {
            let id = l.attribute("id").ok_or_else(|| malformed("location without id"))?;
            let lname = child_text(l, "name").ok_or_else(|| malformed(format!("{name}: location {id} has no name")))?;
            let invariant = label(l, "invariant").map(expr).transpose()?;
            ids.push(id.to_string());
            locations.push(Location { name: lname.to_string(), invariant });
        }
        let loc_of = |r: Option<&str>| -> Result<String, ExportError> {
            let r = r.ok_or_else(|| malformed(format!("{name}: missing ref")))?;
            ids.iter()
                .position(|i| i == r)
                .map(|i| locations[i].name.clone())
                .ok_or_else(|| malformed(format!("{name}: reference `{r}` has no location")))
        };
        let init = t.children().find(|c| c.has_tag_name("init")).and_then(|c| c.attribute("ref"));
        let initial = loc_of(init)?;
        let mut edges = Vec::new();
        for tr in t.children().filter(|c| c.has_tag_name("transition")) {
            let src = tr.children().find(|c| c.has_tag_name("source")).and_then(|c| c.attribute("ref"));
            let dst = tr.children().find(|c| c.has_tag_name("target")).and_then(|c| c.attribute("ref"));
            let comments = label(tr, "comments").unwrap_or("");
            let mut id = None;
            let mut sync_pos = None;
            let mut parts_count = None;
            let mut has_guard = false;
            for item in comments.split("; ") {
                if let Some(v) = item.strip_prefix("edge=") {
                    id = Some(v.to_string());
                } else if let Some(v) = item.strip_prefix("sync=") {
                    sync_pos = Some(v.parse::<usize>().map_err(|_| malformed(format!("bad sync position `{v}`")))?);
                } else if let Some(v) = item.strip_prefix("parts=") {
                    parts_count = Some(v.parse::<usize>().map_err(|_| malformed(format!("bad conjunct count `{v}`")))?);
                } else if item == "guard" {
                    has_guard = true;
                }
            }
            let id = id.ok_or_else(|| malformed(format!("{name}: transition without edge id")))?;
            let rest = label(tr, "guard").map(expr).transpose()?;
            let guard = match (label(tr, "synchronisation"), sync_pos) {
                (Some(s), Some(pos)) => {
                    let atom = expr(s)?;
                    let mut parts: Vec<Expr> = rest.as_ref().map(|g| g.left_conjuncts().into_iter().cloned().collect()).unwrap_or_default();
                    if let Some(n) = parts_count {
                        if n == 0 || n > parts.len() {
                            return Err(malformed(format!("{name}.{id}: conjunct count {n} out of range")));
                        }
                        let tail = parts.split_off(parts.len() - n + 1);
                        parts = std::iter::once(Expr::conjoin(parts)).chain(tail).collect();
                    }
                    if pos > parts.len() {
                        return Err(malformed(format!("{name}.{id}: sync position {pos} out of range")));
                    }
                    parts.insert(pos, atom);
                    Some(Expr::conjoin(parts))
                }
                (None, None) if has_guard => rest,
                (None, None) => None,
                _ => return Err(malformed(format!("{name}.{id}: synchronisation label and comment disagree"))),
            };
            let action = label(tr, "assignment").map(|a| parse_assignments(a, &variables)).transpose()?.unwrap_or_default();
            edges.push(Edge { id, source: loc_of(src)?, guard, action, target: loc_of(dst)? });
        }
        automata.push(Automaton { name, role, locations, initial, edges });
    }
    Ok(TaNetwork { variables, automata, stage, index_var })
}
