//! Two-phase front end: tokens are parsed into a raw tree carrying source
//! names and spans, which is then resolved against the declarations.

use std::collections::BTreeSet;
use std::sync::Arc;

use super::ast::{ChorAst, ComponentDecl, GuardedSend, Program, Receive, SystemDecl, VarDecl};
use super::lexer::{lex, Tok, Token};
use crate::diag::{Diagnostic, Diagnostics, Span};
use crate::model::{
    name, Assignment, BinOp, DataType, Expr, Port, PortType, UnOp, Update, Valuation, Value,
    VarId, Variable,
};

const RESERVED: &[&str] = &[
    "comp", "var", "port", "choreography", "nil", "skip", "choice", "while", "true", "false", "and",
    "or", "not",
];

#[derive(Clone, Debug)]
pub(crate) enum RawExpr {
    Lit(Value),
    Var {
        owner: Option<String>,
        name: String,
        span: Span,
    },
    Unary(UnOp, Box<RawExpr>),
    Binary(BinOp, Box<RawExpr>, Box<RawExpr>),
}

#[derive(Clone, Debug)]
pub(crate) enum RawUpdate {
    Skip,
    Named(String),
    Assigns(Vec<(Option<String>, String, Span, RawExpr)>),
}

#[derive(Clone, Debug)]
struct RawPortRef {
    comp: String,
    port: String,
    span: Span,
}

#[derive(Clone, Debug)]
struct RawSend {
    port: RawPortRef,
    guard: Option<RawExpr>,
    update: Option<RawUpdate>,
}

#[derive(Clone, Debug)]
enum RawTerm {
    Nil,
    Comm {
        send: RawSend,
        rcvs: Vec<(RawPortRef, Option<RawUpdate>)>,
        annot: Option<(String, Span)>,
    },
    Choice {
        master: String,
        span: Span,
        conts: Vec<(RawSend, RawTerm)>,
    },
    While {
        cond: RawSend,
        body: Box<RawTerm>,
    },
    Seq(Box<RawTerm>, Box<RawTerm>),
    Par(Box<RawTerm>, Box<RawTerm>),
}

#[derive(Clone, Debug)]
struct RawVar {
    name: String,
    dtype: String,
    init: Option<RawExpr>,
    span: Span,
}

#[derive(Clone, Debug)]
struct RawPort {
    name: String,
    ctype: String,
    dtype: String,
    binds: Option<String>,
    span: Span,
}

#[derive(Clone, Debug)]
struct RawComp {
    name: String,
    span: Span,
    vars: Vec<RawVar>,
    ports: Vec<RawPort>,
}

#[derive(Clone, Debug, Default)]
struct RawFile {
    comps: Vec<RawComp>,
    chors: Vec<(String, Span, RawTerm)>,
}

pub(crate) struct Cursor {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl Cursor {
    pub(crate) fn new(src: &str) -> PResult<Cursor> {
        Ok(Cursor { toks: lex(src)?, pos: 0 })
    }

    pub(crate) fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    pub(crate) fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    pub(crate) fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect(&mut self, t: &Tok) -> PResult<Span> {
        if self.peek() == t {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&t.describe()))
        }
    }

    pub(crate) fn unexpected(&self, wanted: &str) -> Diagnostic {
        Diagnostic::new(
            "syntax",
            format!("expected {wanted}, found {}", self.peek().describe()),
        )
        .at(self.span())
    }

    pub(crate) fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    pub(crate) fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect_kw(&mut self, kw: &str) -> PResult<Span> {
        if self.is_kw(kw) {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    /// Any identifier, reserved words included.
    pub(crate) fn word(&mut self) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let sp = self.bump().span;
                Ok((s, sp))
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    /// A non-reserved identifier.
    pub(crate) fn ident(&mut self) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                let sp = self.bump().span;
                Ok((s, sp))
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    pub(crate) fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    // ---- expressions ----

    pub(crate) fn expr(&mut self) -> PResult<RawExpr> {
        self.expr_prec(1)
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::Ident(s) if s == "or" => BinOp::Or,
            Tok::Ident(s) if s == "and" => BinOp::And,
            Tok::AndAnd => BinOp::And,
            Tok::EqEq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            Tok::Star => BinOp::Mul,
            Tok::Slash => BinOp::Div,
            Tok::Percent => BinOp::Mod,
            _ => return None,
        })
    }

    fn expr_prec(&mut self, min: u8) -> PResult<RawExpr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            let p = op.precedence();
            if p < min {
                break;
            }
            self.bump();
            let rhs = self.expr_prec(p + 1)?;
            if op.is_comparison() && self.binop().is_some_and(|o| o.is_comparison()) {
                return Err(Diagnostic::new("syntax", "comparison operators do not chain").at(self.span()));
            }
            lhs = RawExpr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<RawExpr> {
        if self.eat_kw("not") || self.eat(&Tok::Bang) {
            return Ok(RawExpr::Unary(UnOp::Not, Box::new(self.unary()?)));
        }
        if self.peek() == &Tok::Minus {
            let sp = self.span();
            self.bump();
            if let Tok::Int(n) = *self.peek() {
                self.bump();
                return neg_literal(n).ok_or_else(|| {
                    Diagnostic::new("lex", format!("integer literal -{n} out of range")).at(sp)
                });
            }
            return Ok(RawExpr::Unary(UnOp::Neg, Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<RawExpr> {
        let sp = self.span();
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                let v = i64::try_from(n)
                    .map_err(|_| Diagnostic::new("lex", format!("integer literal {n} out of range")).at(sp))?;
                Ok(RawExpr::Lit(Value::Int(v)))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(RawExpr::Lit(Value::Str(name(&s))))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.bump();
                Ok(RawExpr::Lit(Value::Bool(s == "true")))
            }
            Tok::Ident(_) => {
                let (first, sp) = self.ident()?;
                if self.peek() == &Tok::Dot {
                    self.bump();
                    let (second, _) = self.ident()?;
                    Ok(RawExpr::Var {
                        owner: Some(first),
                        name: second,
                        span: sp,
                    })
                } else {
                    Ok(RawExpr::Var {
                        owner: None,
                        name: first,
                        span: sp,
                    })
                }
            }
            _ => Err(self.unexpected("expression")),
        }
    }

    /// `skip`, `name()`, or `x := e; y := e`.
    pub(crate) fn update(&mut self) -> PResult<RawUpdate> {
        if self.eat_kw("skip") {
            return Ok(RawUpdate::Skip);
        }
        if matches!(self.peek(), Tok::Ident(_)) && self.peek_at(1) == &Tok::LParen {
            let (n, _) = self.ident()?;
            self.expect(&Tok::LParen)?;
            self.expect(&Tok::RParen)?;
            return Ok(RawUpdate::Named(n));
        }
        let mut items = Vec::new();
        loop {
            let (first, sp) = self.ident()?;
            let (owner, var) = if self.eat(&Tok::Dot) {
                (Some(first), self.ident()?.0)
            } else {
                (None, first)
            };
            self.expect(&Tok::Assign)?;
            let e = self.expr()?;
            items.push((owner, var, sp, e));
            if !self.eat(&Tok::Semi) {
                break;
            }
        }
        Ok(RawUpdate::Assigns(items))
    }

    // ---- choreography terms ----

    fn port_ref(&mut self) -> PResult<RawPortRef> {
        let (comp, span) = self.ident()?;
        self.expect(&Tok::Dot)?;
        let (port, _) = self.word()?;
        Ok(RawPortRef { comp, port, span })
    }

    fn send(&mut self) -> PResult<RawSend> {
        let port = self.port_ref()?;
        let (mut guard, mut update) = (None, None);
        if self.eat(&Tok::LBracket) {
            guard = Some(self.expr()?);
            self.expect(&Tok::Comma)?;
            update = Some(self.update()?);
            self.expect(&Tok::RBracket)?;
        }
        Ok(RawSend { port, guard, update })
    }

    fn term(&mut self) -> PResult<RawTerm> {
        let left = self.seq()?;
        if self.eat(&Tok::ParBar) {
            let right = self.term()?;
            return Ok(RawTerm::Par(Box::new(left), Box::new(right)));
        }
        Ok(left)
    }

    fn seq(&mut self) -> PResult<RawTerm> {
        let left = self.atom()?;
        if self.eat(&Tok::Semi) {
            let right = self.seq()?;
            return Ok(RawTerm::Seq(Box::new(left), Box::new(right)));
        }
        Ok(left)
    }

    fn atom(&mut self) -> PResult<RawTerm> {
        if self.eat_kw("nil") {
            return Ok(RawTerm::Nil);
        }
        if self.eat(&Tok::LParen) {
            let t = self.term()?;
            self.expect(&Tok::RParen)?;
            return Ok(t);
        }
        if self.is_kw("choice") {
            self.bump();
            let (master, span) = self.ident()?;
            self.expect(&Tok::LBrace)?;
            let mut conts = Vec::new();
            loop {
                let s = self.send()?;
                self.expect(&Tok::FatArrow)?;
                let body = self.term()?;
                conts.push((s, body));
                if !self.eat(&Tok::Bar) {
                    break;
                }
            }
            self.expect(&Tok::RBrace)?;
            return Ok(RawTerm::Choice { master, span, conts });
        }
        if self.eat_kw("while") {
            self.expect(&Tok::LParen)?;
            let cond = self.send()?;
            self.expect(&Tok::RParen)?;
            self.expect(&Tok::LBrace)?;
            let body = self.term()?;
            self.expect(&Tok::RBrace)?;
            return Ok(RawTerm::While {
                cond,
                body: Box::new(body),
            });
        }
        if !matches!(self.peek(), Tok::Ident(_)) {
            return Err(self.unexpected("choreography term"));
        }
        let send = self.send()?;
        self.expect(&Tok::Arrow)?;
        let open = self.expect(&Tok::LBrace)?;
        let mut rcvs = Vec::new();
        if self.peek() == &Tok::RBrace {
            return Err(Diagnostic::new("empty-receivers", "empty receiver list").at(open));
        }
        loop {
            let p = self.port_ref()?;
            let mut f = None;
            if self.eat(&Tok::LBracket) {
                if self.peek() != &Tok::RBracket {
                    f = Some(self.update()?);
                }
                self.expect(&Tok::RBracket)?;
            }
            rcvs.push((p, f));
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(&Tok::RBrace)?;
        let mut annot = None;
        if self.eat(&Tok::Colon) {
            let lt = self.eat(&Tok::Lt);
            annot = Some(self.word()?);
            if lt {
                self.expect(&Tok::Gt)?;
            }
        }
        Ok(RawTerm::Comm { send, rcvs, annot })
    }

    // ---- declarations ----

    fn comp(&mut self) -> PResult<RawComp> {
        let (name, span) = self.ident()?;
        self.expect(&Tok::LBrace)?;
        let mut comp = RawComp {
            name,
            span,
            vars: Vec::new(),
            ports: Vec::new(),
        };
        loop {
            if self.eat(&Tok::RBrace) {
                break;
            }
            if self.eat_kw("var") {
                let (n, sp) = self.ident()?;
                self.expect(&Tok::Colon)?;
                let (t, _) = self.word()?;
                let init = if self.eat(&Tok::Eq) { Some(self.expr()?) } else { None };
                self.expect(&Tok::Semi)?;
                comp.vars.push(RawVar {
                    name: n,
                    dtype: t,
                    init,
                    span: sp,
                });
            } else if self.eat_kw("port") {
                let (n, sp) = self.word()?;
                self.expect(&Tok::Colon)?;
                let (ct, _) = self.word()?;
                self.expect_kw("of")?;
                let (dt, _) = self.word()?;
                let binds = if self.eat_kw("binds") { Some(self.ident()?.0) } else { None };
                self.expect(&Tok::Semi)?;
                comp.ports.push(RawPort {
                    name: n,
                    ctype: ct,
                    dtype: dt,
                    binds,
                    span: sp,
                });
            } else {
                return Err(self.unexpected("`var`, `port` or `}`"));
            }
        }
        Ok(comp)
    }

    fn file(&mut self) -> PResult<RawFile> {
        let mut f = RawFile::default();
        while !self.at_eof() {
            if self.eat_kw("comp") {
                f.comps.push(self.comp()?);
            } else if self.is_kw("choreography") {
                let sp = self.bump().span;
                let (n, _) = self.ident()?;
                self.expect(&Tok::Eq)?;
                let t = self.term()?;
                f.chors.push((n, sp, t));
            } else {
                return Err(self.unexpected("`comp` or `choreography`"));
            }
        }
        Ok(f)
    }
}

fn neg_literal(n: u64) -> Option<RawExpr> {
    let v = if n == 1u64 << 63 {
        i64::MIN
    } else {
        -(i64::try_from(n).ok()?)
    };
    Some(RawExpr::Lit(Value::Int(v)))
}

// ---- resolution ----

struct Resolver<'a> {
    decl: &'a SystemDecl,
    diags: Vec<Diagnostic>,
}

pub(crate) fn resolve_expr(
    raw: &RawExpr,
    default_owner: Option<&str>,
    known: &dyn Fn(&VarId) -> bool,
    diags: &mut Vec<Diagnostic>,
) -> Expr {
    match raw {
        RawExpr::Lit(v) => Expr::Lit(v.clone()),
        RawExpr::Var { owner, name: n, span } => {
            let owner = owner.as_deref().or(default_owner).unwrap_or("");
            let id = VarId::new(owner, n);
            if !known(&id) {
                diags.push(Diagnostic::new("resolve", format!("unknown variable {id}")).at(*span));
            }
            Expr::Var(id)
        }
        RawExpr::Unary(op, e) => Expr::Unary(*op, Box::new(resolve_expr(e, default_owner, known, diags))),
        RawExpr::Binary(op, l, r) => Expr::Binary(
            *op,
            Box::new(resolve_expr(l, default_owner, known, diags)),
            Box::new(resolve_expr(r, default_owner, known, diags)),
        ),
    }
}

pub(crate) fn resolve_update(
    raw: &RawUpdate,
    default_owner: Option<&str>,
    known: &dyn Fn(&VarId) -> bool,
    diags: &mut Vec<Diagnostic>,
) -> Update {
    match raw {
        RawUpdate::Skip => Update::skip(),
        RawUpdate::Named(n) => Update {
            label: Some(name(n)),
            assigns: Vec::new(),
        },
        RawUpdate::Assigns(items) => Update {
            label: None,
            assigns: items
                .iter()
                .map(|(owner, var, sp, e)| {
                    let owner = owner.as_deref().or(default_owner).unwrap_or("");
                    let target = VarId::new(owner, var);
                    if !known(&target) {
                        diags.push(Diagnostic::new("resolve", format!("unknown variable {target}")).at(*sp));
                    }
                    Assignment {
                        target,
                        rhs: resolve_expr(e, default_owner, known, diags),
                    }
                })
                .collect(),
        },
    }
}

impl Resolver<'_> {
    fn port(&mut self, r: &RawPortRef) -> Option<Port> {
        let Some(c) = self.decl.component(&r.comp) else {
            self.diags
                .push(Diagnostic::new("resolve", format!("unknown component {}", r.comp)).at(r.span));
            return None;
        };
        match c.port(&r.port) {
            Some(p) => Some(p.clone()),
            None => {
                self.diags.push(
                    Diagnostic::new("resolve", format!("unknown port {}.{}", r.comp, r.port)).at(r.span),
                );
                None
            }
        }
    }

    fn expr(&mut self, raw: &RawExpr, owner: &str) -> Expr {
        let decl = self.decl;
        resolve_expr(raw, Some(owner), &|v| decl.var_type(v).is_some(), &mut self.diags)
    }

    fn update(&mut self, raw: &Option<RawUpdate>, owner: &str) -> Update {
        let decl = self.decl;
        match raw {
            None => Update::skip(),
            Some(u) => resolve_update(u, Some(owner), &|v| decl.var_type(v).is_some(), &mut self.diags),
        }
    }

    fn send(&mut self, s: &RawSend) -> Option<GuardedSend> {
        let port = self.port(&s.port)?;
        let guard = match &s.guard {
            Some(g) => self.expr(g, &port.owner),
            None => Expr::tt(),
        };
        let update = self.update(&s.update, &port.owner);
        Some(GuardedSend {
            port,
            guard,
            update,
            span: s.port.span,
        })
    }

    fn term(&mut self, t: &RawTerm) -> Option<ChorAst> {
        Some(match t {
            RawTerm::Nil => ChorAst::Nil,
            RawTerm::Comm { send, rcvs, annot } => {
                let s = self.send(send);
                let mut out = Vec::new();
                let mut ok = true;
                for (p, f) in rcvs {
                    match self.port(p) {
                        Some(port) => {
                            let update = self.update(f, &port.owner);
                            out.push(Receive {
                                port,
                                update,
                                span: p.span,
                            });
                        }
                        None => ok = false,
                    }
                }
                let annotation = match annot {
                    None => None,
                    Some((t, sp)) => match DataType::from_keyword(t) {
                        Some(d) => Some(d),
                        None => {
                            self.diags
                                .push(Diagnostic::new("resolve", format!("unknown type {t}")).at(*sp));
                            None
                        }
                    },
                };
                if !ok {
                    return None;
                }
                ChorAst::Comm {
                    send: s?,
                    rcvs: out,
                    annotation,
                }
            }
            RawTerm::Choice { master, span, conts } => {
                if self.decl.component(master).is_none() {
                    self.diags
                        .push(Diagnostic::new("resolve", format!("unknown component {master}")).at(*span));
                }
                let mut out = Vec::new();
                let mut ok = true;
                for (s, body) in conts {
                    let s = self.send(s);
                    let b = self.term(body);
                    match (s, b) {
                        (Some(s), Some(b)) => out.push((s, Arc::new(b))),
                        _ => ok = false,
                    }
                }
                if !ok || self.decl.component(master).is_none() {
                    return None;
                }
                ChorAst::Branch {
                    master: name(master),
                    conts: out,
                }
            }
            RawTerm::While { cond, body } => {
                let c = self.send(cond);
                let b = self.term(body);
                ChorAst::Loop {
                    cond: c?,
                    body: Arc::new(b?),
                }
            }
            RawTerm::Seq(a, b) => {
                let (a, b) = (self.term(a), self.term(b));
                ChorAst::Seq(Arc::new(a?), Arc::new(b?))
            }
            RawTerm::Par(a, b) => {
                let (a, b) = (self.term(a), self.term(b));
                ChorAst::Par(Arc::new(a?), Arc::new(b?))
            }
        })
    }
}

fn resolve_decl(comps: &[RawComp], diags: &mut Vec<Diagnostic>) -> SystemDecl {
    let mut decl = SystemDecl::default();
    let mut seen = BTreeSet::new();
    for c in comps {
        if !seen.insert(c.name.clone()) {
            diags.push(Diagnostic::new("duplicate", format!("component {} declared twice", c.name)).at(c.span));
            continue;
        }
        let mut cd = ComponentDecl {
            id: name(&c.name),
            vars: Vec::new(),
            ports: Vec::new(),
            span: c.span,
        };
        for v in &c.vars {
            if cd.var(&v.name).is_some() {
                diags.push(
                    Diagnostic::new("duplicate", format!("variable {}.{} declared twice", c.name, v.name))
                        .at(v.span),
                );
                continue;
            }
            let Some(dt) = DataType::from_keyword(&v.dtype) else {
                diags.push(Diagnostic::new("resolve", format!("unknown type {}", v.dtype)).at(v.span));
                continue;
            };
            let init = match &v.init {
                None => dt.default_value(),
                Some(e) => {
                    let mut local = Vec::new();
                    let ex = resolve_expr(e, Some(&c.name), &|_| false, &mut local);
                    if !local.is_empty() {
                        diags.push(
                            Diagnostic::new("type-error", "initializer must be a constant").at(v.span),
                        );
                        continue;
                    }
                    match ex.eval(&Valuation::new()) {
                        Ok(val) if val.dtype() == Some(dt) => val,
                        Ok(val) => {
                            diags.push(
                                Diagnostic::new(
                                    "type-error",
                                    format!("initializer {val} does not have type {dt}"),
                                )
                                .at(v.span),
                            );
                            continue;
                        }
                        Err(e) => {
                            diags.push(Diagnostic::new("type-error", e.to_string()).at(v.span));
                            continue;
                        }
                    }
                }
            };
            cd.vars.push(VarDecl {
                var: Variable {
                    id: VarId::new(&c.name, &v.name),
                    dtype: dt,
                },
                init,
                span: v.span,
            });
        }
        for p in &c.ports {
            if cd.port(&p.name).is_some() {
                diags.push(
                    Diagnostic::new("duplicate", format!("port {}.{} declared twice", c.name, p.name)).at(p.span),
                );
                continue;
            }
            let Some(ct) = PortType::from_keyword(&p.ctype) else {
                diags.push(
                    Diagnostic::new("resolve", format!("unknown port type {} (expected ss, as, r or in)", p.ctype))
                        .at(p.span),
                );
                continue;
            };
            let Some(dt) = DataType::from_keyword(&p.dtype) else {
                diags.push(Diagnostic::new("resolve", format!("unknown type {}", p.dtype)).at(p.span));
                continue;
            };
            let var = match &p.binds {
                Some(v) => match cd.var(v) {
                    Some(vd) if vd.var.dtype == dt => vd.var.id.clone(),
                    Some(vd) => {
                        diags.push(
                            Diagnostic::new(
                                "port-binding",
                                format!("port {}.{} of {dt} binds {} of {}", c.name, p.name, v, vd.var.dtype),
                            )
                            .at(p.span),
                        );
                        continue;
                    }
                    None => {
                        diags.push(
                            Diagnostic::new("resolve", format!("unknown variable {}.{}", c.name, v)).at(p.span),
                        );
                        continue;
                    }
                },
                None if ct == PortType::Internal => VarId::new(&c.name, "$eps"),
                None => {
                    diags.push(
                        Diagnostic::new("port-binding", format!("port {}.{} must bind a variable", c.name, p.name))
                            .at(p.span),
                    );
                    continue;
                }
            };
            cd.ports.push(Port {
                id: name(&format!("{}.{}", c.name, p.name)),
                owner: name(&c.name),
                var,
                dtype: dt,
                ctype: ct,
            });
        }
        decl.components.push(cd);
    }
    decl
}

fn tag(mut ds: Vec<Diagnostic>, file: Option<&str>) -> Vec<Diagnostic> {
    if let Some(f) = file {
        ds = ds.into_iter().map(|d| d.in_file(f)).collect();
    }
    ds
}

fn parse_raw(src: &str, file: Option<&str>) -> Result<RawFile, Diagnostics> {
    let mut c = Cursor::new(src).map_err(|d| Diagnostics(tag(vec![d], file)))?;
    c.file().map_err(|d| Diagnostics(tag(vec![d], file)))
}

fn assemble(comps: &[RawComp], chors: &[(String, Span, RawTerm)]) -> Result<Program, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let decl = resolve_decl(comps, &mut diags);
    let (cname, term) = match chors {
        [] => {
            diags.push(Diagnostic::new("syntax", "missing `choreography` definition"));
            return Err(diags);
        }
        [(n, _, t)] => (n.clone(), t),
        [_, (_, sp, _), ..] => {
            diags.push(Diagnostic::new("syntax", "more than one choreography definition").at(*sp));
            return Err(diags);
        }
    };
    let mut r = Resolver { decl: &decl, diags };
    let chor = r.term(term);
    let diags = r.diags;
    match chor {
        Some(chor) if diags.is_empty() => Ok(Program {
            decl,
            name: name(&cname),
            chor,
        }),
        _ => Err(diags),
    }
}

/// Parse one file holding declarations and a single choreography.
pub fn parse(src: &str) -> Result<Program, Diagnostics> {
    let raw = parse_raw(src, None)?;
    assemble(&raw.comps, &raw.chors).map_err(Diagnostics)
}

/// Two-file layout: component declarations in `config`, the choreography in `chor`.
pub fn parse_split(
    config: &str,
    config_name: &str,
    chor: &str,
    chor_name: &str,
) -> Result<Program, Diagnostics> {
    let a = parse_raw(config, Some(config_name))?;
    let b = parse_raw(chor, Some(chor_name))?;
    if !a.chors.is_empty() {
        return Err(Diagnostics(vec![Diagnostic::new(
            "syntax",
            "configuration file must not define a choreography",
        )
        .in_file(config_name)]));
    }
    let mut comps = a.comps;
    comps.extend(b.comps);
    assemble(&comps, &b.chors).map_err(Diagnostics)
}

/// Parse an expression where every variable is written `Comp.var`.
pub fn parse_qualified_expr(src: &str, known: &dyn Fn(&VarId) -> bool) -> Result<Expr, Diagnostics> {
    let mut c = Cursor::new(src).map_err(|d| Diagnostics(vec![d]))?;
    let raw = c.expr().map_err(|d| Diagnostics(vec![d]))?;
    if !c.at_eof() {
        return Err(Diagnostics(vec![c.unexpected("end of expression")]));
    }
    let mut diags = Vec::new();
    let e = resolve_expr(&raw, None, known, &mut diags);
    if diags.is_empty() {
        Ok(e)
    } else {
        Err(Diagnostics(diags))
    }
}

/// Parse `<guard> do <update>` with fully qualified variables.
pub fn parse_guarded_update(src: &str, known: &dyn Fn(&VarId) -> bool) -> Result<(Expr, Update), Diagnostics> {
    let one = |d| Diagnostics(vec![d]);
    let mut c = Cursor::new(src).map_err(one)?;
    let g = c.expr().map_err(one)?;
    c.expect_kw("do").map_err(one)?;
    let u = c.update().map_err(one)?;
    if !c.at_eof() {
        return Err(one(c.unexpected("end of line")));
    }
    let mut diags = Vec::new();
    let g = resolve_expr(&g, None, known, &mut diags);
    let u = resolve_update(&u, None, known, &mut diags);
    if diags.is_empty() {
        Ok((g, u))
    } else {
        Err(Diagnostics(diags))
    }
}

/// Parse a literal value; `neutral` denotes the internal-port payload.
pub fn parse_value(src: &str) -> Result<Value, Diagnostics> {
    if src.trim() == "neutral" {
        return Ok(Value::Neutral);
    }
    let e = parse_qualified_expr(src, &|_| false)?;
    e.eval(&Valuation::new())
        .map_err(|e| Diagnostics(vec![Diagnostic::new("syntax", format!("not a constant: {e}"))]))
}
