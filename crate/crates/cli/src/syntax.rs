//! The query language: an s-expression reader, the script AST, and a printer
//! whose output reads back to the same AST.
//!
//! ```text
//! script  := define* run
//! define  := (define (name param ...) goal ...)
//! run     := (run N (var ...) goal ...) | (run* (var ...) goal ...)
//! goal    := (equalo term term) | (conj goal ...) | (disj goal goal)
//!          | (disj+ goal ...) | (disj+c goal ...) | (conj-sce goal goal)
//!          | (fresh (var ...) goal ...) | (delay goal) | (name term ...)
//! term    := var | integer | () | '() | #oleg(n) | `datum
//! datum   := integer | symbol | (datum ... [. datum]) | ,term
//! ```

use std::collections::HashMap;
use std::fmt;

use kanren_core::RelationTable;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tm {
    Var(String),
    Int(i64),
    Sym(String),
    Nil,
    Pair(Box<Tm>, Box<Tm>),
    Oleg(u64),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Goal {
    Equalo(Tm, Tm),
    Conj(Vec<Goal>),
    Disj(Box<Goal>, Box<Goal>),
    DisjPlus(Vec<Goal>),
    DisjConc(Vec<Goal>),
    ConjSce(Box<Goal>, Box<Goal>),
    Fresh(Vec<String>, Vec<Goal>),
    Delay(Box<Goal>),
    Call(String, Vec<Tm>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Def {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Goal>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunKind {
    Star,
    Count(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Run {
    pub kind: RunKind,
    pub vars: Vec<String>,
    pub goals: Vec<Goal>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Script {
    pub defs: Vec<Def>,
    pub run: Run,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{column}: {message}")]
pub struct SyntaxError {
    pub offset: usize,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

// ---------------------------------------------------------------------------
// Reader

#[derive(Clone, Debug)]
enum Sx {
    Int(i64),
    Ident(String),
    List(Vec<Node>, Option<Box<Node>>),
    Quasi(Box<Node>),
    Unquote(Box<Node>),
    Quote(Box<Node>),
    Oleg(u64),
}

#[derive(Clone, Debug)]
struct Node {
    sx: Sx,
    at: usize,
}

struct Reader<'a> {
    src: &'a str,
    pos: usize,
}

type PResult<T> = Result<T, (usize, String)>;

fn is_delim(c: char) -> bool {
    c.is_whitespace() || matches!(c, '(' | ')' | '`' | ',' | '\'' | ';' | '"')
}

impl<'a> Reader<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_blank(&mut self) {
        while let Some(c) = self.peek() {
            if c == ';' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.pos += c.len_utf8();
                }
            } else if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_blank();
        self.pos >= self.src.len()
    }

    fn read(&mut self) -> PResult<Node> {
        self.skip_blank();
        let at = self.pos;
        let Some(c) = self.peek() else {
            return Err((at, "unexpected end of input".into()));
        };
        let sx = match c {
            '(' => {
                self.pos += 1;
                self.read_list(at)?
            }
            ')' => return Err((at, "unexpected `)`".into())),
            '`' => {
                self.pos += 1;
                Sx::Quasi(Box::new(self.read()?))
            }
            ',' => {
                self.pos += 1;
                Sx::Unquote(Box::new(self.read()?))
            }
            '\'' => {
                self.pos += 1;
                Sx::Quote(Box::new(self.read()?))
            }
            '#' => self.read_hash(at)?,
            _ => self.read_atom(at)?,
        };
        Ok(Node { sx, at })
    }

    fn read_list(&mut self, open: usize) -> PResult<Sx> {
        let mut items = Vec::new();
        loop {
            self.skip_blank();
            match self.peek() {
                None => return Err((open, "unbalanced `(`".into())),
                Some(')') => {
                    self.pos += 1;
                    return Ok(Sx::List(items, None));
                }
                Some('.') if self.dot_alone() => {
                    let dot = self.pos;
                    self.pos += 1;
                    if items.is_empty() {
                        return Err((dot, "`.` needs an element before it".into()));
                    }
                    let tail = self.read()?;
                    self.skip_blank();
                    if self.peek() != Some(')') {
                        return Err((self.pos, "expected `)` after dotted tail".into()));
                    }
                    self.pos += 1;
                    return Ok(Sx::List(items, Some(Box::new(tail))));
                }
                Some(_) => items.push(self.read()?),
            }
        }
    }

    fn dot_alone(&self) -> bool {
        self.src[self.pos + 1..].chars().next().is_none_or(is_delim)
    }

    fn read_hash(&mut self, at: usize) -> PResult<Sx> {
        let rest = &self.src[self.pos..];
        if !rest.starts_with("#oleg(") {
            return Err((at, "unknown `#` syntax; expected #oleg(n)".into()));
        }
        let digits_at = self.pos + "#oleg(".len();
        let close = self.src[digits_at..]
            .find(')')
            .map(|i| digits_at + i)
            .ok_or((at, "unterminated #oleg(".to_string()))?;
        let n = self.src[digits_at..close]
            .trim()
            .parse::<u64>()
            .map_err(|_| (digits_at, "#oleg needs a non-negative integer".to_string()))?;
        self.pos = close + 1;
        Ok(Sx::Oleg(n))
    }

    fn read_atom(&mut self, at: usize) -> PResult<Sx> {
        let end = self.src[at..]
            .char_indices()
            .find(|&(_, c)| is_delim(c))
            .map_or(self.src.len(), |(i, _)| at + i);
        let text = &self.src[at..end];
        self.pos = end;
        if text.starts_with('"') {
            return Err((at, "strings are not supported".into()));
        }
        let numeric = text.strip_prefix('-').unwrap_or(text);
        if !numeric.is_empty() && numeric.bytes().all(|b| b.is_ascii_digit()) {
            return text
                .parse::<i64>()
                .map(Sx::Int)
                .map_err(|_| (at, format!("integer `{text}` out of range")));
        }
        if text.starts_with(|c: char| c.is_ascii_digit()) {
            return Err((at, format!("malformed number `{text}`")));
        }
        Ok(Sx::Ident(text.to_string()))
    }
}

// ---------------------------------------------------------------------------
// Parser

const KEYWORDS: &[&str] = &[
    "define", "run", "run*", "equalo", "conj", "disj", "disj+", "disj+c", "conj-sce", "fresh",
    "delay",
];

struct Parser<'t> {
    scope: Vec<String>,
    calls: Vec<(String, usize, usize)>,
    table: &'t RelationTable,
}

fn err<T>(at: usize, msg: impl Into<String>) -> PResult<T> {
    Err((at, msg.into()))
}

impl Parser<'_> {
    fn ident<'n>(&self, n: &'n Node, what: &str) -> PResult<&'n str> {
        match &n.sx {
            Sx::Ident(s) => Ok(s),
            _ => err(n.at, format!("expected {what}")),
        }
    }

    fn binder_list(&self, n: &Node, what: &str) -> PResult<Vec<String>> {
        let Sx::List(items, None) = &n.sx else {
            return err(n.at, format!("expected a list of {what}"));
        };
        let mut names = Vec::new();
        for item in items {
            let name = self.ident(item, what)?;
            if KEYWORDS.contains(&name) {
                return err(item.at, format!("`{name}` is reserved"));
            }
            if names.iter().any(|x| x == name) {
                return err(item.at, format!("`{name}` bound twice"));
            }
            names.push(name.to_string());
        }
        Ok(names)
    }

    fn goals(&mut self, ns: &[Node]) -> PResult<Vec<Goal>> {
        ns.iter().map(|n| self.goal(n)).collect()
    }

    fn goal(&mut self, n: &Node) -> PResult<Goal> {
        let Sx::List(items, None) = &n.sx else {
            return err(n.at, "expected a goal");
        };
        let Some((head, args)) = items.split_first() else {
            return err(n.at, "empty goal");
        };
        let name = self.ident(head, "a goal name")?;
        let exact = |k: usize| -> PResult<()> {
            if args.len() == k {
                Ok(())
            } else {
                err(
                    n.at,
                    format!("`{name}` takes {k} arguments, found {}", args.len()),
                )
            }
        };
        let at_least = |k: usize| -> PResult<()> {
            if args.len() >= k {
                Ok(())
            } else {
                err(n.at, format!("`{name}` needs at least {k} arguments"))
            }
        };
        Ok(match name {
            "equalo" => {
                exact(2)?;
                Goal::Equalo(self.term(&args[0])?, self.term(&args[1])?)
            }
            "conj" => {
                at_least(1)?;
                Goal::Conj(self.goals(args)?)
            }
            "disj" => {
                exact(2)?;
                Goal::Disj(
                    Box::new(self.goal(&args[0])?),
                    Box::new(self.goal(&args[1])?),
                )
            }
            "disj+" => {
                at_least(1)?;
                Goal::DisjPlus(self.goals(args)?)
            }
            "disj+c" => {
                at_least(1)?;
                Goal::DisjConc(self.goals(args)?)
            }
            "conj-sce" => {
                exact(2)?;
                Goal::ConjSce(
                    Box::new(self.goal(&args[0])?),
                    Box::new(self.goal(&args[1])?),
                )
            }
            "fresh" => {
                at_least(2)?;
                let vars = self.binder_list(&args[0], "variable names")?;
                let mark = self.scope.len();
                self.scope.extend(vars.iter().cloned());
                let body = self.goals(&args[1..]);
                self.scope.truncate(mark);
                Goal::Fresh(vars, body?)
            }
            "delay" => {
                exact(1)?;
                Goal::Delay(Box::new(self.goal(&args[0])?))
            }
            "define" | "run" | "run*" => return err(n.at, format!("`{name}` is not a goal")),
            _ => {
                let terms = args
                    .iter()
                    .map(|a| self.term(a))
                    .collect::<PResult<Vec<_>>>()?;
                self.calls.push((name.to_string(), terms.len(), n.at));
                Goal::Call(name.to_string(), terms)
            }
        })
    }

    fn term(&self, n: &Node) -> PResult<Tm> {
        match &n.sx {
            Sx::Int(i) => Ok(Tm::Int(*i)),
            Sx::Oleg(k) => Ok(Tm::Oleg(*k)),
            Sx::Ident(name) => {
                if self.scope.iter().any(|v| v == name) {
                    Ok(Tm::Var(name.clone()))
                } else {
                    err(n.at, format!("unbound variable `{name}`"))
                }
            }
            Sx::List(items, None) if items.is_empty() => Ok(Tm::Nil),
            Sx::Quote(inner) => match &inner.sx {
                Sx::List(items, None) if items.is_empty() => Ok(Tm::Nil),
                _ => err(n.at, "only '() may be quoted; use ` for data"),
            },
            Sx::Quasi(inner) => self.datum(inner),
            Sx::Unquote(_) => err(n.at, "`,` outside a quasiquote"),
            Sx::List(..) => err(n.at, "expected a term; lists are written `(...)"),
        }
    }

    fn datum(&self, n: &Node) -> PResult<Tm> {
        match &n.sx {
            Sx::Int(i) => Ok(Tm::Int(*i)),
            Sx::Oleg(k) => Ok(Tm::Oleg(*k)),
            Sx::Ident(s) => Ok(Tm::Sym(s.clone())),
            Sx::Unquote(inner) => self.term(inner),
            Sx::List(items, tail) => {
                let mut acc = match tail {
                    Some(t) => self.datum(t)?,
                    None => Tm::Nil,
                };
                for item in items.iter().rev() {
                    acc = Tm::Pair(Box::new(self.datum(item)?), Box::new(acc));
                }
                Ok(acc)
            }
            Sx::Quasi(_) | Sx::Quote(_) => err(n.at, "nested quotation is not supported"),
        }
    }

    fn define(&mut self, n: &Node, args: &[Node]) -> PResult<Def> {
        if args.len() < 2 {
            return err(n.at, "`define` needs a header and a body");
        }
        let Sx::List(header, None) = &args[0].sx else {
            return err(args[0].at, "expected (name param ...)");
        };
        let Some((name, params)) = header.split_first() else {
            return err(args[0].at, "expected (name param ...)");
        };
        let name = self.ident(name, "a relation name")?.to_string();
        if KEYWORDS.contains(&name.as_str()) {
            return err(args[0].at, format!("`{name}` is reserved"));
        }
        let params_node = Node {
            sx: Sx::List(params.to_vec(), None),
            at: args[0].at,
        };
        let params = self.binder_list(&params_node, "parameter names")?;
        self.scope = params.clone();
        let body = self.goals(&args[1..]);
        self.scope.clear();
        Ok(Def {
            name,
            params,
            body: body?,
        })
    }

    fn run(&mut self, n: &Node, head: &str, args: &[Node]) -> PResult<Run> {
        let (kind, rest) = if head == "run*" {
            (RunKind::Star, args)
        } else {
            let Some(first) = args.first() else {
                return err(n.at, "`run` needs a count");
            };
            match first.sx {
                Sx::Int(k) if k >= 0 => (RunKind::Count(k as usize), &args[1..]),
                _ => return err(first.at, "`run` needs a non-negative count"),
            }
        };
        if rest.len() < 2 {
            return err(
                n.at,
                format!("`{head}` needs variables and at least one goal"),
            );
        }
        let vars = self.binder_list(&rest[0], "query variables")?;
        if vars.is_empty() {
            return err(rest[0].at, "a query needs at least one variable");
        }
        self.scope = vars.clone();
        let goals = self.goals(&rest[1..]);
        self.scope.clear();
        Ok(Run {
            kind,
            vars,
            goals: goals?,
        })
    }
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before
        .rfind('\n')
        .map_or(before.len(), |i| before.len() - i - 1)
        + 1;
    (line, column)
}

fn syntax_error(src: &str, (offset, message): (usize, String)) -> SyntaxError {
    let (line, column) = line_col(src, offset);
    SyntaxError {
        offset,
        line,
        column,
        message,
    }
}

/// Parses a script. Relation calls must name a relation defined in the script
/// or present in `library`, with matching arity.
pub fn parse(src: &str, library: &RelationTable) -> Result<Script, SyntaxError> {
    parse_inner(src, library).map_err(|e| syntax_error(src, e))
}

fn parse_inner(src: &str, library: &RelationTable) -> PResult<Script> {
    let mut reader = Reader { src, pos: 0 };
    let mut p = Parser {
        scope: Vec::new(),
        calls: Vec::new(),
        table: library,
    };
    let mut defs: Vec<Def> = Vec::new();
    let mut run: Option<Run> = None;
    while !reader.at_end() {
        let form = reader.read()?;
        let Sx::List(items, None) = &form.sx else {
            return err(form.at, "expected (define ...) or (run ...)");
        };
        let head = match items.first().map(|h| &h.sx) {
            Some(Sx::Ident(h)) => h.as_str(),
            _ => return err(form.at, "expected (define ...) or (run ...)"),
        };
        match head {
            "define" => {
                if run.is_some() {
                    return err(form.at, "definitions must come before the query");
                }
                let def = p.define(&form, &items[1..])?;
                if defs.iter().any(|d| d.name == def.name) || p.table.contains(&def.name) {
                    return err(
                        form.at,
                        format!("relation `{}` is already defined", def.name),
                    );
                }
                defs.push(def);
            }
            "run" | "run*" => {
                if run.is_some() {
                    return err(form.at, "a script holds one query");
                }
                run = Some(p.run(&form, head, &items[1..])?);
            }
            other => return err(form.at, format!("unexpected top-level form `{other}`")),
        }
    }
    let Some(run) = run else {
        return err(src.len(), "no (run ...) query found");
    };

    let arities: HashMap<&str, usize> = defs
        .iter()
        .map(|d| (d.name.as_str(), d.params.len()))
        .collect();
    for (name, found, at) in &p.calls {
        let expected = match arities.get(name.as_str()) {
            Some(&a) => a,
            None => match p.table.get(kanren_core::Symbol::intern(name)) {
                Some(rel) => rel.arity,
                None => return err(*at, format!("unknown relation `{name}`")),
            },
        };
        if expected != *found {
            return err(
                *at,
                format!("`{name}` takes {expected} arguments, found {found}"),
            );
        }
    }
    Ok(Script { defs, run })
}

// ---------------------------------------------------------------------------
// Printer

struct Datum<'a>(&'a Tm);

impl fmt::Display for Datum<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Tm::Var(v) => write!(f, ",{v}"),
            Tm::Int(i) => write!(f, "{i}"),
            Tm::Sym(s) => write!(f, "{s}"),
            Tm::Nil => write!(f, "()"),
            Tm::Oleg(n) => write!(f, "#oleg({n})"),
            Tm::Pair(h, t) => {
                write!(f, "({}", Datum(h))?;
                let mut rest: &Tm = t;
                loop {
                    match rest {
                        Tm::Nil => break,
                        Tm::Pair(h, t) => {
                            write!(f, " {}", Datum(h))?;
                            rest = t;
                        }
                        other => {
                            write!(f, " . {}", Datum(other))?;
                            break;
                        }
                    }
                }
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for Tm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tm::Var(v) => write!(f, "{v}"),
            Tm::Int(i) => write!(f, "{i}"),
            Tm::Nil => write!(f, "'()"),
            Tm::Oleg(n) => write!(f, "#oleg({n})"),
            Tm::Sym(_) | Tm::Pair(..) => write!(f, "`{}", Datum(self)),
        }
    }
}

fn write_all<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: &[T]) -> fmt::Result {
    for item in items {
        write!(f, " {item}")?;
    }
    Ok(())
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Goal::Equalo(u, v) => write!(f, "(equalo {u} {v})"),
            Goal::Conj(gs) => {
                write!(f, "(conj")?;
                write_all(f, gs)?;
                write!(f, ")")
            }
            Goal::Disj(a, b) => write!(f, "(disj {a} {b})"),
            Goal::DisjPlus(gs) => {
                write!(f, "(disj+")?;
                write_all(f, gs)?;
                write!(f, ")")
            }
            Goal::DisjConc(gs) => {
                write!(f, "(disj+c")?;
                write_all(f, gs)?;
                write!(f, ")")
            }
            Goal::ConjSce(a, b) => write!(f, "(conj-sce {a} {b})"),
            Goal::Fresh(vs, gs) => {
                write!(f, "(fresh ({})", vs.join(" "))?;
                write_all(f, gs)?;
                write!(f, ")")
            }
            Goal::Delay(g) => write!(f, "(delay {g})"),
            Goal::Call(name, args) => {
                write!(f, "({name}")?;
                write_all(f, args)?;
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for Def {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(define ({}", self.name)?;
        for p in &self.params {
            write!(f, " {p}")?;
        }
        write!(f, ")")?;
        write_all(f, &self.body)?;
        write!(f, ")")
    }
}

impl fmt::Display for Run {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            RunKind::Star => write!(f, "(run*")?,
            RunKind::Count(n) => write!(f, "(run {n}")?,
        }
        write!(f, " ({})", self.vars.join(" "))?;
        write_all(f, &self.goals)?;
        write!(f, ")")
    }
}

impl fmt::Display for Script {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.defs {
            writeln!(f, "{d}")?;
        }
        write!(f, "{}", self.run)
    }
}
