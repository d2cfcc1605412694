//! Model description language, its printer, and JSON views of results.
//!
//! ```text
//! param p in [0, 2];
//! clock x, y;
//! const max = 30;
//! loc idle;
//! loc busy stop {y};
//! init idle;
//! edge idle -> busy when x >= p & y == max sync go do { x := p, y := 0 };
//! ```

use std::collections::{BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use serde::Serialize;
use thiserror::Error;

use crate::automaton::{Atom, Automaton, Edge, Location, Parameter, Rel, Value};
use crate::param_region::{ParamBound, ParamRegion, RegionSpace};
use crate::Q;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct Diagnostic {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Nat(u32),
    Sym(&'static str),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Nat(n) => write!(f, "`{n}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
        }
    }
}

const SYMBOLS: [&str; 14] = ["->", ":=", "<=", ">=", "==", "<", ">", "=", ";", ",", "&", "{", "}", "["];

struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, Diagnostic> {
    let mut out = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split("//").next().unwrap_or("");
        let bytes = line.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i] as char;
            let col = i + 1;
            if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Spanned { tok: Tok::Ident(line[start..i].to_string()), line: ln + 1, col });
            } else if c.is_ascii_digit() {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let n = line[start..i].parse().map_err(|_| Diagnostic {
                    line: ln + 1,
                    col,
                    message: "number too large".into(),
                })?;
                out.push(Spanned { tok: Tok::Nat(n), line: ln + 1, col });
            } else if c == ']' {
                out.push(Spanned { tok: Tok::Sym("]"), line: ln + 1, col });
                i += 1;
            } else if let Some(s) = SYMBOLS.iter().find(|s| line[i..].starts_with(**s)) {
                out.push(Spanned { tok: Tok::Sym(s), line: ln + 1, col });
                i += s.len();
            } else {
                return Err(Diagnostic { line: ln + 1, col, message: format!("unexpected character `{c}`") });
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
}

type Loc = (usize, usize);

impl Parser {
    fn here(&self) -> Loc {
        self.toks.get(self.pos).map_or(self.end, |t| (t.line, t.col))
    }

    fn err<T>(&self, expected: &str) -> Result<T, Diagnostic> {
        let (line, col) = self.here();
        let found = self.toks.get(self.pos).map_or("end of input".to_string(), |t| t.tok.to_string());
        Err(Diagnostic { line, col, message: format!("expected {expected}, found {found}") })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn eat(&mut self, sym: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(s)) if *s == sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, sym: &str) -> Result<(), Diagnostic> {
        if self.eat(sym) {
            Ok(())
        } else {
            self.err(&format!("`{sym}`"))
        }
    }

    fn keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<(String, Loc), Diagnostic> {
        let at = self.here();
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok((s, at))
            }
            _ => self.err("an identifier"),
        }
    }

    fn nat(&mut self) -> Result<u32, Diagnostic> {
        match self.peek() {
            Some(Tok::Nat(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(n)
            }
            _ => self.err("a natural number"),
        }
    }
}

enum Operand {
    Nat(u32),
    Name(String, Loc),
}

struct RawEdge {
    src: (String, Loc),
    dst: (String, Loc),
    guard: Vec<((String, Loc), Rel, Operand, bool)>,
    sync: Option<String>,
    update: Vec<((String, Loc), Operand)>,
}

const KEYWORDS: [&str; 10] = ["param", "clock", "const", "loc", "init", "edge", "when", "sync", "do", "stop"];

/// Parses a model. Equality atoms become a pair of `>=` and `<=` atoms.
pub fn parse_model(text: &str) -> Result<Automaton, Diagnostic> {
    let toks = lex(text)?;
    let lines = text.lines().count().max(1);
    let mut p = Parser { toks, pos: 0, end: (lines, text.lines().last().map_or(1, |l| l.len() + 1)) };
    let mut a = Automaton::default();
    let mut consts: HashMap<String, u32> = HashMap::new();
    let mut stops: Vec<Vec<(String, Loc)>> = Vec::new();
    let mut init: Option<(String, Loc)> = None;
    let mut raw_edges = Vec::new();
    let mut names: HashMap<String, Loc> = HashMap::new();
    let declare = |name: &str, at: Loc, names: &mut HashMap<String, Loc>| {
        if KEYWORDS.contains(&name) {
            return Err(Diagnostic { line: at.0, col: at.1, message: format!("`{name}` is a keyword") });
        }
        if let Some(prev) = names.insert(name.to_string(), at) {
            return Err(Diagnostic {
                line: at.0,
                col: at.1,
                message: format!("`{name}` is already declared at {}:{}", prev.0, prev.1),
            });
        }
        Ok(())
    };
    while p.peek().is_some() {
        if p.keyword("param") {
            let (name, at) = p.ident()?;
            declare(&name, at, &mut names)?;
            if !p.keyword("in") {
                return p.err("`in`");
            }
            p.expect("[")?;
            let lo = p.nat()?;
            p.expect(",")?;
            let hi = p.nat()?;
            p.expect("]")?;
            if lo > hi {
                return Err(Diagnostic { line: at.0, col: at.1, message: format!("empty bounds [{lo}, {hi}]") });
            }
            a.params.push(Parameter { name, bound: ParamBound::new(lo, hi), aux: false });
        } else if p.keyword("clock") {
            loop {
                let (name, at) = p.ident()?;
                declare(&name, at, &mut names)?;
                a.clocks.push(name);
                if !p.eat(",") {
                    break;
                }
            }
        } else if p.keyword("const") {
            let (name, at) = p.ident()?;
            declare(&name, at, &mut names)?;
            p.expect("=")?;
            let v = p.nat()?;
            consts.insert(name.clone(), v);
            a.consts.push((name, v));
        } else if p.keyword("loc") {
            let (name, at) = p.ident()?;
            declare(&name, at, &mut names)?;
            let mut stop = Vec::new();
            if p.keyword("stop") {
                p.expect("{")?;
                if !p.eat("}") {
                    loop {
                        stop.push(p.ident()?);
                        if !p.eat(",") {
                            break;
                        }
                    }
                    p.expect("}")?;
                }
            }
            a.locations.push(Location { name, stop: BTreeSet::new() });
            stops.push(stop);
        } else if p.keyword("init") {
            let at = p.here();
            let id = p.ident()?;
            if let Some((_, prev)) = &init {
                return Err(Diagnostic {
                    line: at.0,
                    col: at.1,
                    message: format!("duplicate init (first at {}:{})", prev.0, prev.1),
                });
            }
            init = Some(id);
        } else if p.keyword("edge") {
            raw_edges.push(parse_edge(&mut p)?);
        } else {
            return p.err("a declaration (`param`, `clock`, `const`, `loc`, `init` or `edge`)");
        }
        p.expect(";")?;
    }
    let undeclared = |what: &str, name: &str, at: Loc| Diagnostic {
        line: at.0,
        col: at.1,
        message: format!("undeclared {what} `{name}`"),
    };
    let clock = |n: &(String, Loc), a: &Automaton| {
        a.clocks.iter().position(|c| *c == n.0).ok_or_else(|| undeclared("clock", &n.0, n.1))
    };
    let location = |n: &(String, Loc), a: &Automaton| {
        a.locations.iter().position(|l| l.name == n.0).ok_or_else(|| undeclared("location", &n.0, n.1))
    };
    let value = |o: &Operand, a: &Automaton| match o {
        Operand::Nat(k) => Ok(Value::Const(*k)),
        Operand::Name(n, at) => {
            if let Some(k) = consts.get(n) {
                Ok(Value::Const(*k))
            } else if let Some(i) = a.params.iter().position(|q| q.name == *n) {
                Ok(Value::Param(i))
            } else {
                Err(undeclared("constant or parameter", n, *at))
            }
        }
    };
    for (l, st) in stops.iter().enumerate() {
        for c in st {
            let id = clock(c, &a)?;
            a.locations[l].stop.insert(id);
        }
    }
    let Some(init) = init else {
        let (line, col) = p.end;
        return Err(Diagnostic { line, col, message: "missing init".into() });
    };
    a.init = location(&init, &a)?;
    for e in raw_edges {
        let mut guard = Vec::new();
        for (c, rel, rhs, eq) in &e.guard {
            let clock = clock(c, &a)?;
            let rhs = value(rhs, &a)?;
            if *eq {
                guard.push(Atom { clock, rel: Rel::Ge, rhs });
                guard.push(Atom { clock, rel: Rel::Le, rhs });
            } else {
                guard.push(Atom { clock, rel: *rel, rhs });
            }
        }
        let mut update = Vec::new();
        for (c, v) in &e.update {
            let id = clock(c, &a)?;
            if update.iter().any(|(d, _)| *d == id) {
                return Err(Diagnostic {
                    line: c.1 .0,
                    col: c.1 .1,
                    message: format!("clock `{}` updated twice", c.0),
                });
            }
            update.push((id, value(v, &a)?));
        }
        a.edges.push(Edge {
            src: location(&e.src, &a)?,
            dst: location(&e.dst, &a)?,
            guard,
            action: e.sync,
            update,
        });
    }
    Ok(a)
}

fn parse_edge(p: &mut Parser) -> Result<RawEdge, Diagnostic> {
    let src = p.ident()?;
    p.expect("->")?;
    let dst = p.ident()?;
    let mut e = RawEdge { src, dst, guard: Vec::new(), sync: None, update: Vec::new() };
    if p.keyword("when") {
        loop {
            let c = p.ident()?;
            let (rel, eq) = if p.eat("<=") {
                (Rel::Le, false)
            } else if p.eat(">=") {
                (Rel::Ge, false)
            } else if p.eat("==") {
                (Rel::Ge, true)
            } else if p.eat("<") {
                (Rel::Lt, false)
            } else if p.eat(">") {
                (Rel::Gt, false)
            } else {
                return p.err("a comparison (`<`, `<=`, `==`, `>=`, `>`)");
            };
            e.guard.push((c, rel, operand(p)?, eq));
            if !p.eat("&") {
                break;
            }
        }
    }
    if p.keyword("sync") {
        e.sync = Some(p.ident()?.0);
    }
    if p.keyword("do") {
        p.expect("{")?;
        if !p.eat("}") {
            loop {
                let c = p.ident()?;
                p.expect(":=")?;
                e.update.push((c, operand(p)?));
                if !p.eat(",") {
                    break;
                }
            }
            p.expect("}")?;
        }
    }
    Ok(e)
}

fn operand(p: &mut Parser) -> Result<Operand, Diagnostic> {
    match p.peek() {
        Some(Tok::Nat(_)) => Ok(Operand::Nat(p.nat()?)),
        Some(Tok::Ident(_)) => {
            let (n, at) = p.ident()?;
            Ok(Operand::Name(n, at))
        }
        _ => p.err("a number, constant or parameter"),
    }
}

/// Prints a model in the description language. Auxiliary parameters are
/// left out; atoms print their numeric values.
pub fn print_model(a: &Automaton) -> String {
    let mut out = String::new();
    for p in a.params.iter().filter(|p| !p.aux) {
        let _ = writeln!(out, "param {} in [{}, {}];", p.name, p.bound.lo, p.bound.hi);
    }
    if !a.clocks.is_empty() {
        let _ = writeln!(out, "clock {};", a.clocks.join(", "));
    }
    for (n, v) in &a.consts {
        let _ = writeln!(out, "const {n} = {v};");
    }
    for l in &a.locations {
        if l.stop.is_empty() {
            let _ = writeln!(out, "loc {};", l.name);
        } else {
            let s: Vec<&str> = l.stop.iter().map(|c| a.clocks[*c].as_str()).collect();
            let _ = writeln!(out, "loc {} stop {{{}}};", l.name, s.join(", "));
        }
    }
    if let Some(l) = a.locations.get(a.init) {
        let _ = writeln!(out, "init {};", l.name);
    }
    let val = |v: &Value| match v {
        Value::Const(k) => k.to_string(),
        Value::Param(p) => a.params[*p].name.clone(),
    };
    for e in &a.edges {
        let _ = write!(out, "edge {} -> {}", a.locations[e.src].name, a.locations[e.dst].name);
        if !e.guard.is_empty() {
            let atoms: Vec<String> = e
                .guard
                .iter()
                .map(|g| format!("{} {} {}", a.clocks[g.clock], g.rel.symbol(), val(&g.rhs)))
                .collect();
            let _ = write!(out, " when {}", atoms.join(" & "));
        }
        if let Some(s) = &e.action {
            let _ = write!(out, " sync {s}");
        }
        if !e.update.is_empty() {
            let ups: Vec<String> = e.update.iter().map(|(c, v)| format!("{} := {}", a.clocks[*c], val(v))).collect();
            let _ = write!(out, " do {{ {} }}", ups.join(", "));
        }
        out.push_str(";\n");
    }
    out
}

/// Exact rational as a `"num/den"` string.
pub fn rational(q: &Q) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// Parses `"p1=3/2, p2=5/4"` against the model's parameter names. Missing
/// auxiliary parameters are set to zero.
pub fn parse_valuation(text: &str, a: &Automaton) -> Result<Vec<Q>, String> {
    let mut v: Vec<Option<Q>> = a.params.iter().map(|p| if p.aux { Some(Q::from_integer(0)) } else { None }).collect();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, val) = part.split_once('=').ok_or_else(|| format!("expected name=value, got `{part}`"))?;
        let i = a
            .params
            .iter()
            .position(|p| p.name == name.trim())
            .ok_or_else(|| format!("unknown parameter `{}`", name.trim()))?;
        let val = val.trim();
        let q = match val.split_once('/') {
            Some((n, d)) => {
                let n: i64 = n.trim().parse().map_err(|_| format!("bad number `{val}`"))?;
                let d: i64 = d.trim().parse().map_err(|_| format!("bad number `{val}`"))?;
                if d == 0 {
                    return Err(format!("zero denominator in `{val}`"));
                }
                Q::new(n, d)
            }
            None => Q::from_integer(val.parse().map_err(|_| format!("bad number `{val}`"))?),
        };
        v[i] = Some(q);
    }
    v.into_iter()
        .zip(&a.params)
        .map(|(x, p)| x.ok_or_else(|| format!("no value for parameter `{}`", p.name)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct JsonConstraint {
    pub lhs: Vec<JsonTerm>,
    pub rel: &'static str,
    pub rhs: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct JsonTerm {
    pub param: String,
    pub coeff: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct JsonRegion {
    pub int_parts: std::collections::BTreeMap<String, u32>,
    pub constraints: Vec<JsonConstraint>,
    pub representative: std::collections::BTreeMap<String, String>,
}

/// Region as reported to users: auxiliary parameters are projected out.
pub fn region_json(space: &RegionSpace, r: &ParamRegion, a: &Automaton) -> JsonRegion {
    let visible = |p: usize| !a.params[p].aux;
    let name = |p: usize| a.params[p].name.clone();
    let constraints = space
        .constraints(r)
        .into_iter()
        .filter(|c| c.terms.iter().all(|(p, _)| visible(*p)))
        .map(|c| JsonConstraint {
            lhs: c
                .terms
                .iter()
                .map(|(p, k)| JsonTerm { param: format!("frac({})", name(*p)), coeff: rational(k) })
                .collect(),
            rel: c.rel.symbol(),
            rhs: rational(&c.rhs),
            text: c.display_with(|p| format!("frac({})", name(p))),
        })
        .collect();
    JsonRegion {
        int_parts: (0..a.num_params()).filter(|p| visible(*p)).map(|p| (name(p), r.int_part(p))).collect(),
        constraints,
        representative: (0..a.num_params())
            .filter(|p| visible(*p))
            .map(|p| (name(p), rational(&r.representative[p])))
            .collect(),
    }
}

/// One-line text form of a region.
pub fn region_text(space: &RegionSpace, r: &ParamRegion, a: &Automaton) -> String {
    let j = region_json(space, r, a);
    let ints: Vec<String> = j.int_parts.iter().map(|(n, k)| format!("floor({n}) = {k}")).collect();
    let cons: Vec<String> = j.constraints.iter().map(|c| c.text.clone()).collect();
    let rep: Vec<String> = (0..a.num_params())
        .filter(|p| !a.params[*p].aux)
        .map(|p| format!("{}={}", a.params[p].name, r.representative[p]))
        .collect();
    let mut parts = ints;
    parts.extend(cons);
    format!("{}  @ {}", parts.join(", "), rep.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = "
        // toy model
        param p in [0, 1];
        clock x;
        const c = 2;
        loc a;
        loc b stop {x};
        init a;
        edge a -> b when x >= p & x == c sync go do { x := p };
    ";

    #[test]
    fn parses_and_expands_equality() {
        let a = parse_model(TOY).unwrap();
        assert_eq!(a.locations.len(), 2);
        assert_eq!(a.edges[0].guard.len(), 3);
        assert_eq!(a.edges[0].guard[1], Atom { clock: 0, rel: Rel::Ge, rhs: Value::Const(2) });
        assert_eq!(a.edges[0].guard[2], Atom { clock: 0, rel: Rel::Le, rhs: Value::Const(2) });
        assert_eq!(a.edges[0].action.as_deref(), Some("go"));
        assert!(a.locations[1].stop.contains(&0));
    }

    #[test]
    fn printer_round_trips() {
        let a = parse_model(TOY).unwrap();
        assert_eq!(parse_model(&print_model(&a)).unwrap(), a);
    }

    #[test]
    fn empty_file_misses_init() {
        let e = parse_model("").unwrap_err();
        assert_eq!(e.message, "missing init");
    }

    #[test]
    fn diagnostics_carry_positions() {
        let e = parse_model("clock x;\nedge a -> b when x ! 3;").unwrap_err();
        assert_eq!((e.line, e.col), (2, 20));
        let e = parse_model("clock x;\nloc a;\ninit a;\nedge a -> b;").unwrap_err();
        assert_eq!(e.message, "undeclared location `b`");
        assert_eq!((e.line, e.col), (4, 11));
        let e = parse_model("loc a;\ninit a;\ninit a;").unwrap_err();
        assert!(e.message.starts_with("duplicate init"));
    }

    #[test]
    fn valuation_strings() {
        let a = parse_model(TOY).unwrap();
        assert_eq!(parse_valuation("p=1/2", &a).unwrap(), vec![Q::new(1, 2)]);
        assert!(parse_valuation("q=1", &a).is_err());
        assert!(parse_valuation("", &a).is_err());
    }
}
