//! Textual DSL for statechart networks.
//!
//! ```text
//! var x: int[0..15] = 0;
//! var eventA: event;
//! statechart Y1 priority 1 {
//!   state s0_1;
//!   state s1 entry { x := 5; };
//!   initial s0_1;
//!   transition t1: s0_1 -> s1 when true;
//! }
//! ```
//!
//! Parsing and validation report [`Diagnostic`]s with machine-readable codes.
//! Positions for validation findings come from the [`SourceMap`] recorded
//! while parsing.

mod lexer;
mod printer;
mod validate;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::action::{ActionSeq, Update};
use crate::eval::{type_of, Ty};
use crate::expr::{BinOp, Expr, Trigger, TriggerKind, Value};
use crate::model::{StateDef, StatechartDef, StatechartNetwork, TransitionDef, VarDecl, VarKind};
use lexer::{lex, Tok, Token};

pub use printer::print_network;
pub use validate::validate;

/// 1-based line and column.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DiagCode {
    SyntaxError,
    UnknownState,
    UnknownVariable,
    DuplicateName,
    MissingPriority,
    TypeMismatch,
    PriorityGap,
    DuplicateChartPriority,
    InitialGuardNotTrue,
    InitialActionNotEmpty,
    InitialOutDegree,
    InitialOutOfDomain,
    EmptyDomain,
    ChannelAtomInStatechart,
    ZeroPeriod,
}

impl DiagCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagCode::SyntaxError => "SYNTAX_ERROR",
            DiagCode::UnknownState => "UNKNOWN_STATE",
            DiagCode::UnknownVariable => "UNKNOWN_VARIABLE",
            DiagCode::DuplicateName => "DUPLICATE_NAME",
            DiagCode::MissingPriority => "MISSING_PRIORITY",
            DiagCode::TypeMismatch => "TYPE_MISMATCH",
            DiagCode::PriorityGap => "PRIORITY_GAP",
            DiagCode::DuplicateChartPriority => "DUPLICATE_CHART_PRIORITY",
            DiagCode::InitialGuardNotTrue => "INITIAL_GUARD_NOT_TRUE",
            DiagCode::InitialActionNotEmpty => "INITIAL_ACTION_NOT_EMPTY",
            DiagCode::InitialOutDegree => "INITIAL_OUT_DEGREE",
            DiagCode::InitialOutOfDomain => "INITIAL_OUT_OF_DOMAIN",
            DiagCode::EmptyDomain => "EMPTY_DOMAIN",
            DiagCode::ChannelAtomInStatechart => "CHANNEL_ATOM_IN_STATECHART",
            DiagCode::ZeroPeriod => "ZERO_PERIOD",
        }
    }
}

/// Network element a diagnostic refers to.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Element {
    Var(String),
    Chart(String),
    State { chart: String, state: String },
    Initial { chart: String },
    Transition { chart: String, id: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: DiagCode,
    pub message: String,
    pub pos: Option<Pos>,
    pub element: Option<Element>,
}

impl Diagnostic {
    pub fn at(code: DiagCode, pos: Pos, message: impl Into<String>) -> Self {
        Diagnostic { code, message: message.into(), pos: Some(pos), element: None }
    }

    pub fn on(code: DiagCode, element: Element, message: impl Into<String>) -> Self {
        Diagnostic { code, message: message.into(), pos: None, element: Some(element) }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.pos {
            Some(p) => write!(f, "{p}: {}: {}", self.code.as_str(), self.message),
            None => write!(f, "{}: {}", self.code.as_str(), self.message),
        }
    }
}

/// Where each element was declared in the source text.
#[derive(Clone, Debug, Default)]
pub struct SourceMap {
    positions: HashMap<Element, Pos>,
}

impl SourceMap {
    pub fn get(&self, e: &Element) -> Option<Pos> {
        self.positions.get(e).copied()
    }

    /// Fills in missing positions from recorded element locations.
    pub fn locate(&self, diags: &mut [Diagnostic]) {
        for d in diags.iter_mut() {
            if d.pos.is_none() {
                d.pos = d.element.as_ref().and_then(|e| self.get(e)).or(Some(Pos { line: 1, col: 1 }));
            }
        }
    }
}

/// Parses a document. On failure returns every diagnostic found.
pub fn parse_network(src: &str) -> Result<StatechartNetwork, Vec<Diagnostic>> {
    parse_with_map(src).map(|(n, _)| n)
}

pub fn parse_with_map(src: &str) -> Result<(StatechartNetwork, SourceMap), Vec<Diagnostic>> {
    let toks = lex(src).map_err(|(p, m)| vec![Diagnostic::at(DiagCode::SyntaxError, p, m)])?;
    let mut p = Parser::new(toks);
    let doc = p.document().map_err(|d| vec![d])?;
    build(doc)
}

/// Parse followed by validation, with every diagnostic positioned.
pub fn check_source(src: &str) -> Result<(StatechartNetwork, SourceMap), Vec<Diagnostic>> {
    let (net, map) = parse_with_map(src)?;
    let mut diags = validate(&net);
    if diags.is_empty() {
        Ok((net, map))
    } else {
        map.locate(&mut diags);
        Err(diags)
    }
}

/// Parses a standalone expression. Identifiers stay as `Var`; use
/// [`resolve_names`] to turn event references into `Event` atoms.
pub fn parse_expr(src: &str) -> Result<Expr, Diagnostic> {
    let toks = lex(src).map_err(|(p, m)| Diagnostic::at(DiagCode::SyntaxError, p, m))?;
    let mut p = Parser::new(toks);
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

/// Rewrites `Var(n)` to `Event(n)` where `n` is declared as an event.
pub fn resolve_names(e: &Expr, decls: &[VarDecl]) -> Expr {
    let events: HashSet<&str> = decls.iter().filter(|d| d.kind == VarKind::Event).map(|d| d.name.as_str()).collect();
    e.rewrite(&mut |x| match x {
        Expr::Var(n) if events.contains(n.as_str()) => Some(Expr::Event(n.clone())),
        _ => None,
    })
}

struct VarAst {
    decl: VarDecl,
    pos: Pos,
}

struct StateAst {
    def: StateDef,
    pos: Pos,
    entry_pos: Vec<Pos>,
    exit_pos: Vec<Pos>,
}

struct TransAst {
    id: String,
    pos: Pos,
    src: (String, Pos),
    dst: (String, Pos),
    priority: Option<u32>,
    guard: (Expr, Pos),
    action: Vec<(Update, Pos)>,
}

struct ChartAst {
    name: String,
    pos: Pos,
    priority: u32,
    states: Vec<StateAst>,
    initial: Vec<(String, Pos)>,
    transitions: Vec<TransAst>,
}

struct Doc {
    vars: Vec<VarAst>,
    charts: Vec<ChartAst>,
    /// Identifier uses inside expressions.
    uses: Vec<(String, Pos)>,
}

struct Parser {
    toks: Vec<Token>,
    i: usize,
    uses: Vec<(String, Pos)>,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn new(toks: Vec<Token>) -> Self {
        Parser { toks, i: 0, uses: Vec::new() }
    }

    fn peek(&self) -> &Token {
        &self.toks[self.i]
    }

    fn peek_at(&self, k: usize) -> &Token {
        &self.toks[(self.i + k).min(self.toks.len() - 1)]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let t = self.peek();
        let found = match &t.tok {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        };
        Err(Diagnostic::at(DiagCode::SyntaxError, t.pos, format!("{}, found {found}", msg.into())))
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(&self.peek().tok, Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(x) if x == k)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<Pos> {
        if self.is_sym(s) {
            Ok(self.bump().pos)
        } else {
            self.err(format!("expected `{s}`"))
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<Pos> {
        if self.is_kw(k) {
            Ok(self.bump().pos)
        } else {
            self.err(format!("expected `{k}`"))
        }
    }

    fn expect_eof(&mut self) -> PResult<()> {
        if self.peek().tok == Tok::Eof {
            Ok(())
        } else {
            self.err("expected end of input")
        }
    }

    fn ident(&mut self) -> PResult<(String, Pos)> {
        match &self.peek().tok {
            Tok::Ident(s) if !is_reserved(s) => {
                let s = s.clone();
                Ok((s, self.bump().pos))
            }
            _ => self.err("expected identifier"),
        }
    }

    fn int(&mut self) -> PResult<i64> {
        let neg = self.eat_sym("-");
        match self.peek().tok {
            Tok::Int(v) => {
                self.bump();
                Ok(if neg { -v } else { v })
            }
            _ => self.err("expected integer"),
        }
    }

    fn positive(&mut self, what: &str) -> PResult<u32> {
        let pos = self.peek().pos;
        let v = self.int()?;
        if v < 1 || v > i64::from(u32::MAX) {
            return Err(Diagnostic::at(DiagCode::SyntaxError, pos, format!("{what} must be a positive integer")));
        }
        Ok(v as u32)
    }

    fn document(&mut self) -> PResult<Doc> {
        let mut doc = Doc { vars: Vec::new(), charts: Vec::new(), uses: Vec::new() };
        if self.peek().tok == Tok::Eof {
            return self.err("expected `var` or `statechart`");
        }
        while self.peek().tok != Tok::Eof {
            if self.is_kw("var") {
                doc.vars.push(self.var_decl()?);
            } else if self.is_kw("statechart") {
                doc.charts.push(self.chart()?);
            } else {
                return self.err("expected `var` or `statechart`");
            }
        }
        doc.uses = std::mem::take(&mut self.uses);
        Ok(doc)
    }

    fn var_decl(&mut self) -> PResult<VarAst> {
        self.expect_kw("var")?;
        let (name, pos) = self.ident()?;
        self.expect_sym(":")?;
        let kind = if self.eat_kw("int") {
            if self.eat_sym("[") {
                let lo = self.int()?;
                self.expect_sym("..")?;
                let hi = self.int()?;
                self.expect_sym("]")?;
                VarKind::bounded(lo, hi)
            } else {
                VarKind::Int { bounds: None }
            }
        } else if self.eat_kw("bool") {
            VarKind::Bool
        } else if self.eat_kw("event") {
            VarKind::Event
        } else {
            return self.err("expected `int`, `bool` or `event`");
        };
        let initial = if self.eat_sym("=") || self.eat_sym(":=") {
            match kind {
                VarKind::Bool => {
                    if self.eat_kw("true") {
                        Some(Value::Bool(true))
                    } else if self.eat_kw("false") {
                        Some(Value::Bool(false))
                    } else {
                        return self.err("expected `true` or `false`");
                    }
                }
                VarKind::Int { .. } => Some(Value::Int(self.int()?)),
                _ => return self.err("events take no initial value; expected `;`"),
            }
        } else {
            match kind {
                VarKind::Bool => Some(Value::Bool(false)),
                VarKind::Int { bounds } => Some(Value::Int(bounds.map_or(0, |(lo, _)| lo))),
                _ => None,
            }
        };
        self.expect_sym(";")?;
        Ok(VarAst { decl: VarDecl { name, kind, initial }, pos })
    }

    fn chart(&mut self) -> PResult<ChartAst> {
        self.expect_kw("statechart")?;
        let (name, pos) = self.ident()?;
        self.expect_kw("priority")?;
        let priority = self.positive("chart priority")?;
        self.expect_sym("{")?;
        let mut c = ChartAst { name, pos, priority, states: Vec::new(), initial: Vec::new(), transitions: Vec::new() };
        while !self.eat_sym("}") {
            if self.eat_kw("state") {
                let (sname, spos) = self.ident()?;
                let mut st = StateAst { def: StateDef::plain(sname), pos: spos, entry_pos: Vec::new(), exit_pos: Vec::new() };
                loop {
                    if self.eat_kw("entry") {
                        let (a, ps) = self.block()?;
                        st.def.entry = a;
                        st.entry_pos = ps;
                    } else if self.eat_kw("exit") {
                        let (a, ps) = self.block()?;
                        st.def.exit = a;
                        st.exit_pos = ps;
                    } else {
                        break;
                    }
                }
                self.expect_sym(";")?;
                c.states.push(st);
            } else if self.eat_kw("initial") {
                let init = self.ident()?;
                self.expect_sym(";")?;
                c.initial.push(init);
            } else if self.is_kw("transition") {
                c.transitions.push(self.transition()?);
            } else {
                return self.err("expected `state`, `initial`, `transition` or `}`");
            }
        }
        Ok(c)
    }

    fn transition(&mut self) -> PResult<TransAst> {
        self.expect_kw("transition")?;
        let (id, pos) = self.ident()?;
        self.expect_sym(":")?;
        let src = self.ident()?;
        self.expect_sym("->")?;
        let dst = self.ident()?;
        let priority = if self.eat_kw("priority") { Some(self.positive("transition priority")?) } else { None };
        self.expect_kw("when")?;
        let gpos = self.peek().pos;
        let guard = self.expr()?;
        let action = if self.eat_kw("do") {
            let (a, ps) = self.block()?;
            a.0.into_iter().zip(ps).collect()
        } else {
            Vec::new()
        };
        self.expect_sym(";")?;
        Ok(TransAst { id, pos, src, dst, priority, guard: (guard, gpos), action })
    }

    fn block(&mut self) -> PResult<(ActionSeq, Vec<Pos>)> {
        self.expect_sym("{")?;
        let mut seq = ActionSeq::default();
        let mut ps = Vec::new();
        while !self.eat_sym("}") {
            let (var, pos) = self.ident()?;
            self.uses.push((var.clone(), pos));
            if !(self.eat_sym(":=") || self.eat_sym("=")) {
                return self.err("expected `:=`");
            }
            let e = self.expr()?;
            self.expect_sym(";")?;
            seq.push(Update::Assign { var, expr: e });
            ps.push(pos);
        }
        Ok((seq, ps))
    }

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        let mut l = self.and_expr()?;
        while self.eat_sym("||") {
            let r = self.and_expr()?;
            l = Expr::or(l, r);
        }
        Ok(l)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut l = self.cmp_expr()?;
        while self.eat_sym("&&") {
            let r = self.cmp_expr()?;
            l = Expr::and(l, r);
        }
        Ok(l)
    }

    fn cmp_expr(&mut self) -> PResult<Expr> {
        let l = self.add_expr()?;
        let op = match &self.peek().tok {
            Tok::Sym("<") => BinOp::Lt,
            Tok::Sym("<=") => BinOp::Le,
            Tok::Sym("==") => BinOp::Eq,
            Tok::Sym(">=") => BinOp::Ge,
            Tok::Sym(">") => BinOp::Gt,
            Tok::Sym("!=") => BinOp::Ne,
            _ => return Ok(l),
        };
        self.bump();
        let r = self.add_expr()?;
        if matches!(&self.peek().tok, Tok::Sym("<" | "<=" | "==" | ">=" | ">" | "!=")) {
            return self.err("comparisons do not chain; add parentheses");
        }
        Ok(Expr::bin(op, l, r))
    }

    fn add_expr(&mut self) -> PResult<Expr> {
        let mut l = self.mul_expr()?;
        loop {
            let op = if self.is_sym("+") {
                BinOp::Add
            } else if self.is_sym("-") {
                BinOp::Sub
            } else {
                return Ok(l);
            };
            self.bump();
            let r = self.mul_expr()?;
            l = Expr::bin(op, l, r);
        }
    }

    fn mul_expr(&mut self) -> PResult<Expr> {
        let mut l = self.unary()?;
        loop {
            let op = if self.is_sym("*") {
                BinOp::Mul
            } else if self.is_sym("/") {
                BinOp::Div
            } else {
                return Ok(l);
            };
            self.bump();
            let r = self.unary()?;
            l = Expr::bin(op, l, r);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat_sym("!") {
            return Ok(Expr::not(self.unary()?));
        }
        if self.is_sym("-") {
            self.bump();
            if let Tok::Int(v) = self.peek().tok {
                self.bump();
                return Ok(Expr::Int(-v));
            }
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Int(*v))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.bump();
                Ok(Expr::Bool(s == "true"))
            }
            Tok::Ident(s) if (s == "after" || s == "every") && matches!(self.peek_at(1).tok, Tok::Int(_)) => {
                self.bump();
                let kind = if s == "after" { TriggerKind::After } else { TriggerKind::Every };
                let n = self.int()?;
                if matches!(&self.peek().tok, Tok::Ident(u) if u == "s") && self.peek().glued {
                    self.bump();
                }
                Ok(Expr::Trigger(Trigger { kind, period: n as u64 }))
            }
            Tok::Ident(_) => {
                let (name, pos) = self.ident()?;
                if self.peek().glued && self.is_sym("?") {
                    self.bump();
                    Ok(Expr::Receive(name))
                } else if self.peek().glued && self.is_sym("!") && !matches!(self.peek_at(1).tok, Tok::Sym("=")) {
                    self.bump();
                    Ok(Expr::Send(name))
                } else {
                    self.uses.push((name.clone(), pos));
                    Ok(Expr::Var(name))
                }
            }
            _ => self.err("expected expression"),
        }
    }
}

fn is_reserved(s: &str) -> bool {
    matches!(
        s,
        "var" | "int" | "bool" | "event" | "statechart" | "priority" | "state" | "entry" | "exit" | "initial"
            | "transition" | "when" | "do" | "true" | "false"
    )
}

/// Semantic checks that need positions, then construction of the network.
fn build(doc: Doc) -> Result<(StatechartNetwork, SourceMap), Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut map = SourceMap::default();
    let mut variables = Vec::new();
    let mut seen_vars = HashSet::new();
    for v in &doc.vars {
        if !seen_vars.insert(v.decl.name.clone()) {
            diags.push(Diagnostic::at(DiagCode::DuplicateName, v.pos, format!("variable `{}` declared twice", v.decl.name)));
            continue;
        }
        map.positions.insert(Element::Var(v.decl.name.clone()), v.pos);
        variables.push(v.decl.clone());
    }
    let mut reported = HashSet::new();
    for (name, pos) in &doc.uses {
        if !seen_vars.contains(name) && reported.insert(name.clone()) {
            diags.push(Diagnostic::at(DiagCode::UnknownVariable, *pos, format!("unknown variable `{name}`")));
        }
    }

    let mut charts = Vec::new();
    let mut seen_charts = HashSet::new();
    for c in doc.charts {
        if !seen_charts.insert(c.name.clone()) {
            diags.push(Diagnostic::at(DiagCode::DuplicateName, c.pos, format!("statechart `{}` declared twice", c.name)));
            continue;
        }
        map.positions.insert(Element::Chart(c.name.clone()), c.pos);
        let mut states = Vec::new();
        let mut state_names = HashSet::new();
        for s in &c.states {
            if !state_names.insert(s.def.name.clone()) {
                diags.push(Diagnostic::at(DiagCode::DuplicateName, s.pos, format!("state `{}` declared twice in `{}`", s.def.name, c.name)));
                continue;
            }
            map.positions.insert(Element::State { chart: c.name.clone(), state: s.def.name.clone() }, s.pos);
            let mut def = s.def.clone();
            def.entry = resolve_actions(&def.entry, &s.entry_pos, &variables, &mut diags);
            def.exit = resolve_actions(&def.exit, &s.exit_pos, &variables, &mut diags);
            states.push(def);
        }
        let initial = match c.initial.as_slice() {
            [] => {
                diags.push(Diagnostic::at(DiagCode::SyntaxError, c.pos, format!("statechart `{}` has no `initial` declaration", c.name)));
                String::new()
            }
            [(n, p), rest @ ..] => {
                if let Some((_, p2)) = rest.first() {
                    diags.push(Diagnostic::at(DiagCode::DuplicateName, *p2, format!("statechart `{}` declares more than one initial state", c.name)));
                }
                if !state_names.contains(n) {
                    diags.push(Diagnostic::at(DiagCode::UnknownState, *p, format!("unknown state `{n}`")));
                }
                map.positions.insert(Element::Initial { chart: c.name.clone() }, *p);
                n.clone()
            }
        };

        let mut out_degree: BTreeMap<&str, usize> = BTreeMap::new();
        for t in &c.transitions {
            *out_degree.entry(t.src.0.as_str()).or_default() += 1;
        }
        let mut transitions = Vec::new();
        let mut ids = HashSet::new();
        let mut gammas: HashMap<(String, u32), ()> = HashMap::new();
        for t in &c.transitions {
            if !ids.insert(t.id.clone()) {
                diags.push(Diagnostic::at(DiagCode::DuplicateName, t.pos, format!("transition `{}` declared twice in `{}`", t.id, c.name)));
                continue;
            }
            map.positions.insert(Element::Transition { chart: c.name.clone(), id: t.id.clone() }, t.pos);
            for (s, p) in [&t.src, &t.dst] {
                if !state_names.contains(s) {
                    diags.push(Diagnostic::at(DiagCode::UnknownState, *p, format!("unknown state `{s}`")));
                }
            }
            let priority = match t.priority {
                Some(g) => g,
                None if out_degree.get(t.src.0.as_str()).copied().unwrap_or(0) <= 1 => 1,
                None => {
                    diags.push(Diagnostic::at(
                        DiagCode::MissingPriority,
                        t.pos,
                        format!("transition `{}` needs a priority: `{}` has several outgoing transitions", t.id, t.src.0),
                    ));
                    1
                }
            };
            if gammas.insert((t.src.0.clone(), priority), ()).is_some() {
                diags.push(Diagnostic::at(
                    DiagCode::DuplicateName,
                    t.pos,
                    format!("priority {priority} used twice among transitions leaving `{}`", t.src.0),
                ));
            }
            let guard = resolve_names(&t.guard.0, &variables);
            if let Err(m) = type_of(&guard, &variables).and_then(|ty| match ty {
                Ty::Bool => Ok(()),
                Ty::Int => Err(format!("guard `{guard}` is not boolean")),
            }) {
                if seen_all(&guard, &seen_vars) {
                    diags.push(Diagnostic::at(DiagCode::TypeMismatch, t.guard.1, m));
                }
            }
            let ps: Vec<Pos> = t.action.iter().map(|(_, p)| *p).collect();
            let action = resolve_actions(&ActionSeq(t.action.iter().map(|(u, _)| u.clone()).collect()), &ps, &variables, &mut diags);
            transitions.push(TransitionDef {
                id: t.id.clone(),
                source: t.src.0.clone(),
                target: t.dst.0.clone(),
                guard,
                action,
                priority,
            });
        }
        charts.push(StatechartDef { name: c.name, priority: c.priority, states, initial, transitions });
    }
    if !diags.is_empty() {
        diags.sort_by_key(|d| d.pos);
        return Err(diags);
    }
    charts.sort_by_key(|c| c.priority);
    Ok((StatechartNetwork { variables, charts }, map))
}

fn seen_all(e: &Expr, vars: &HashSet<String>) -> bool {
    e.vars().iter().all(|v| vars.contains(v))
}

fn resolve_actions(seq: &ActionSeq, ps: &[Pos], decls: &[VarDecl], diags: &mut Vec<Diagnostic>) -> ActionSeq {
    let names: HashSet<String> = decls.iter().map(|d| d.name.clone()).collect();
    let mut out = ActionSeq::default();
    for (u, p) in seq.iter().zip(ps) {
        if let Update::Assign { var, expr } = u {
            let expr = resolve_names(expr, decls);
            if let Some(d) = decls.iter().find(|d| &d.name == var) {
                if seen_all(&expr, &names) {
                    let want = match d.kind {
                        VarKind::Int { .. } => Some(Ty::Int),
                        VarKind::Bool => Some(Ty::Bool),
                        _ => None,
                    };
                    match (want, type_of(&expr, decls)) {
                        (None, _) => diags.push(Diagnostic::at(DiagCode::TypeMismatch, *p, format!("`{var}` cannot be assigned"))),
                        (Some(w), Ok(t)) if w != t => diags.push(Diagnostic::at(
                            DiagCode::TypeMismatch,
                            *p,
                            format!("`{var}` expects {w:?} but `{expr}` is {t:?}"),
                        )),
                        (_, Err(m)) => diags.push(Diagnostic::at(DiagCode::TypeMismatch, *p, m)),
                        _ => {}
                    }
                }
            }
            out.push(Update::Assign { var: var.clone(), expr });
        } else {
            out.push(u.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn fig2_structure() {
        let net = parse_network(fixtures::FIG2).unwrap();
        let y1 = &net.charts[0];
        assert_eq!(y1.name, "Y1");
        let names: Vec<&str> = y1.states.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["s0_1", "s1", "s2"]);
        assert_eq!(y1.state("s1").unwrap().entry.compact(), "x=5");
        assert_eq!(y1.state("s2").unwrap().exit.compact(), "x=2");
        let summary: Vec<(String, u32)> = y1.transitions.iter().map(|t| (t.guard.to_string(), t.priority)).collect();
        assert_eq!(
            summary,
            vec![("true".into(), 1), ("eventA".into(), 1), ("x>0".into(), 1), ("x>1".into(), 2)]
        );
        assert_eq!(y1.transition("t2").unwrap().guard, Expr::Event("eventA".into()));
        let y2 = &net.charts[1];
        assert_eq!(y2.transition("t6").unwrap().guard, Expr::Trigger(Trigger::after(5)));
        assert_eq!(y2.transition("t7").unwrap().guard, Expr::Trigger(Trigger::every(10)));
    }

    #[test]
    fn duplicate_priority_in_state() {
        let src = "var x: int[0..3] = 0;\nstatechart A priority 1 {\n state a; state b; initial a;\n transition t0: a -> b when true;\n transition t1: b -> a priority 1 when x > 0;\n transition t2: b -> b priority 1 when x > 1;\n}";
        let d = parse_network(src).unwrap_err();
        assert_eq!(d[0].code, DiagCode::DuplicateName);
        assert_eq!(d[0].pos, Some(Pos { line: 6, col: 13 }));
    }

    #[test]
    fn empty_document_is_syntax_error() {
        let d = parse_network("").unwrap_err();
        assert_eq!(d[0].code, DiagCode::SyntaxError);
        assert_eq!(d[0].pos, Some(Pos { line: 1, col: 1 }));
    }

    #[test]
    fn unknown_names() {
        let src = "statechart A priority 1 { state a; initial a; transition t: a -> b when y > 0; }";
        let d = parse_network(src).unwrap_err();
        let codes: Vec<DiagCode> = d.iter().map(|d| d.code).collect();
        assert!(codes.contains(&DiagCode::UnknownState));
        assert!(codes.contains(&DiagCode::UnknownVariable));
        assert!(d.iter().all(|d| d.pos.is_some()));
    }

    #[test]
    fn missing_priority_when_branching() {
        let src = "statechart A priority 1 { state a; initial a; transition t: a -> a when true; transition u: a -> a when false; }";
        let d = parse_network(src).unwrap_err();
        assert!(d.iter().any(|d| d.code == DiagCode::MissingPriority));
    }

    #[test]
    fn type_mismatch() {
        let src = "var x: int[0..3] = 0; var b: bool = false;\nstatechart A priority 1 { state a; initial a; transition t: a -> a when x do { b := 1; }; }";
        let d = parse_network(src).unwrap_err();
        assert_eq!(d.iter().filter(|d| d.code == DiagCode::TypeMismatch).count(), 2);
    }

    #[test]
    fn expression_parsing() {
        assert_eq!(parse_expr("x > 1 && !(x > 0)").unwrap().to_string(), "x>1 && !(x>0)");
        assert_eq!(parse_expr("eventA? && alpha == 1").unwrap().positive_receives(), vec!["eventA".to_string()]);
        assert_eq!(parse_expr("c1 != 0").unwrap(), Expr::cmp(BinOp::Ne, "c1", 0));
        assert_eq!(parse_expr("a!").unwrap(), Expr::Send("a".into()));
        assert_eq!(parse_expr("every 10s").unwrap(), Expr::Trigger(Trigger::every(10)));
        assert_eq!(parse_expr("x - -1").unwrap(), Expr::bin(BinOp::Sub, Expr::var("x"), Expr::Int(-1)));
        assert!(parse_expr("a < b < c").is_err());
    }
}
