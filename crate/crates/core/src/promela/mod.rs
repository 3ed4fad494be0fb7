//! Promela rendering of a component system.
//!
//! One channel per receive port of every interaction, one proctype per
//! component. Each proctype is a `do` loop over `currentLocation` with one
//! arm per location plus a final arm that breaks out.

mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use thiserror::Error;

use crate::cbs::{check_structure, Component, CompositeSystem, Interaction, Transition};
use crate::diag::Diagnostics;
use crate::model::{BinOp, DataType, Expr, PortType, UnOp, Update, Value, VarId};
use crate::synth::base_port;

pub use validate::validate;

pub const MACROS: &str = "\
#define recv(ch) ch?value
#define recvAck(ch) ch?(_)
#define send(ch) ch!value
#define sendAck(ch) ch!ack
#define synchRecv(ch) ch?value; sendAck(ch)
";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromelaOptions {
    pub max_len: usize,
    /// Acknowledge on the payload channel itself instead of a dedicated one.
    pub paper_ack: bool,
    /// Reject `str` data instead of interning it.
    pub strict: bool,
    /// Named formulas pasted into `ltl` blocks.
    pub ltl: Vec<(String, String)>,
}

impl Default for PromelaOptions {
    fn default() -> PromelaOptions {
        PromelaOptions {
            max_len: 8,
            paper_ack: false,
            strict: false,
            ltl: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromelaError {
    #[error("{0} has type str, which --strict rejects")]
    UnsupportedType(String),
    #[error("system violates structural checks:\n{0}")]
    Structure(Diagnostics),
}

pub fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

/// Observable symbol of a port. Copies share the symbol of their base port.
pub fn port_symbol(port: &str) -> String {
    sanitize(base_port(port))
}

pub fn end_symbol(component: &str) -> String {
    format!("{}_E", sanitize(component))
}

pub fn current_port_var(component: &str) -> String {
    format!("currPort_{}", sanitize(component))
}

pub fn channel_name(recv_port: &str) -> String {
    format!("ch_{}", sanitize(recv_port))
}

pub fn ack_channel_name(recv_port: &str) -> String {
    format!("ack_{}", sanitize(recv_port))
}

const KEYWORDS: &[&str] = &[
    "active", "assert", "atomic", "bit", "bool", "break", "byte", "chan", "d_step", "do", "else", "empty", "enabled",
    "fi", "full", "goto", "hidden", "if", "init", "int", "len", "mtype", "nempty", "never", "nfull", "od", "of", "pc_value",
    "printf", "priority", "proctype", "provided", "run", "short", "skip", "timeout", "typedef", "unless", "unsigned",
    "xr", "xs", "ltl", "true", "false",
];

pub fn proctype_name(component: &str) -> String {
    let s = sanitize(component);
    if KEYWORDS.contains(&s.as_str()) || s.starts_with(|c: char| c.is_ascii_digit()) {
        format!("P_{s}")
    } else {
        s
    }
}

/// Integer code of every port and end symbol, starting at 1. Code 0 means
/// no port has fired yet.
pub fn symbols(sys: &CompositeSystem) -> BTreeMap<String, u32> {
    let mut names = BTreeSet::new();
    for c in &sys.components {
        names.insert(end_symbol(&c.id));
        for p in &c.ports {
            names.insert(port_symbol(&p.id));
        }
    }
    names.into_iter().zip(1..).collect()
}

fn var_name(v: &VarId) -> String {
    match v.name.strip_prefix('$') {
        Some(ctl) => format!("ctl_{}", sanitize(ctl)),
        None => format!("v_{}", sanitize(&v.name)),
    }
}

fn is_eps(v: &VarId) -> bool {
    &*v.name == "$eps"
}

struct Strings(BTreeMap<String, usize>);

impl Strings {
    fn collect(sys: &CompositeSystem) -> Strings {
        fn walk(e: &Expr, out: &mut BTreeSet<String>) {
            match e {
                Expr::Lit(Value::Str(s)) => {
                    out.insert(s.to_string());
                }
                Expr::Lit(_) | Expr::Var(_) => {}
                Expr::Unary(_, a) => walk(a, out),
                Expr::Binary(_, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
        let mut all = BTreeSet::from([String::new()]);
        for c in &sys.components {
            for (_, init) in &c.vars {
                if let Value::Str(s) = init {
                    all.insert(s.to_string());
                }
            }
            for t in &c.transitions {
                walk(&t.guard, &mut all);
                for a in &t.update.assigns {
                    walk(&a.rhs, &mut all);
                }
            }
        }
        Strings(all.into_iter().zip(0..).collect())
    }

    fn code(&self, s: &str) -> usize {
        self.0[s]
    }
}

fn value(v: &Value, strs: &Strings) -> String {
    match v {
        Value::Int(i) if *i < 0 => format!("({i})"),
        Value::Int(i) => i.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Str(s) => strs.code(s).to_string(),
        Value::Neutral => "0".into(),
    }
}

fn expr(e: &Expr, strs: &Strings) -> String {
    match e {
        Expr::Lit(v) => value(v, strs),
        Expr::Var(v) => var_name(v),
        Expr::Unary(UnOp::Not, a) => format!("!({})", expr(a, strs)),
        Expr::Unary(UnOp::Neg, a) => format!("-({})", expr(a, strs)),
        Expr::Binary(op, a, b) => {
            let sym = match op {
                BinOp::And => "&&",
                BinOp::Or => "||",
                other => other.symbol(),
            };
            format!("({} {sym} {})", expr(a, strs), expr(b, strs))
        }
    }
}

fn type_name(t: DataType) -> &'static str {
    match t {
        DataType::Bool => "bool",
        DataType::Int | DataType::Str => "int",
    }
}

fn check_strict(sys: &CompositeSystem) -> Result<(), PromelaError> {
    for c in &sys.components {
        if let Some((v, _)) = c.vars.iter().find(|(v, _)| v.dtype == DataType::Str && !v.id.is_control()) {
            return Err(PromelaError::UnsupportedType(format!("variable {}", v.id)));
        }
        if let Some(p) = c.ports.iter().find(|p| p.dtype == DataType::Str) {
            return Err(PromelaError::UnsupportedType(format!("port {}", p.id)));
        }
    }
    Ok(())
}

fn sorted_gamma(sys: &CompositeSystem) -> Vec<&Interaction> {
    let mut g: Vec<&Interaction> = sys.gamma.iter().collect();
    g.sort();
    g
}

pub fn emit_channels(sys: &CompositeSystem, opts: &PromelaOptions) -> String {
    let mut out = String::new();
    for a in sorted_gamma(sys) {
        let Some(sp) = sys.port(&a.send) else { continue };
        let sync = sp.ctype == PortType::SyncSend;
        let cap = if sync { "0" } else { "MAX_LEN" };
        for r in &a.receivers {
            writeln!(out, "chan {} = [{cap}] of {{ {} }};", channel_name(r), type_name(sp.dtype)).unwrap();
            if sync && !opts.paper_ack {
                writeln!(out, "chan {} = [0] of {{ mtype }};", ack_channel_name(r)).unwrap();
            }
        }
    }
    out
}

struct Ctx<'a> {
    sys: &'a CompositeSystem,
    comp: &'a Component,
    opts: &'a PromelaOptions,
    strs: Strings,
}

impl Ctx<'_> {
    fn finish(&self, t: &Transition, update: &Update, out: &mut Vec<String>) {
        out.push(format!("{} = {}", current_port_var(&self.comp.id), port_symbol(&t.port)));
        for a in &update.assigns {
            out.push(format!("{} = {}", var_name(&a.target), expr(&a.rhs, &self.strs)));
        }
        out.push(format!("currentLocation = {}", t.dst));
    }

    /// Guard prefix and statements of one transition, plus whether the
    /// statements already begin with a blocking channel read.
    fn option(&self, t: &Transition, alone: bool) -> (Option<String>, Vec<String>) {
        let guard = (!t.guard.is_true_lit()).then(|| format!("({})", expr(&t.guard, &self.strs)));
        let mut st = Vec::new();
        let Some(p) = self.comp.port(&t.port) else {
            return (guard, vec!["false".into()]);
        };
        match p.ctype {
            PortType::SyncSend | PortType::AsyncSend => {
                let Some(a) = self.sys.gamma.iter().find(|a| a.send == p.id) else {
                    return (guard, vec!["false".into()]);
                };
                st.push(format!("value = {}", var_name(&p.var)));
                for r in &a.receivers {
                    st.push(if self.opts.paper_ack {
                        format!("send({})", channel_name(r))
                    } else {
                        format!("{}!value", channel_name(r))
                    });
                }
                if p.ctype == PortType::SyncSend {
                    for r in &a.receivers {
                        st.push(if self.opts.paper_ack {
                            format!("recvAck({})", channel_name(r))
                        } else {
                            format!("{}?ack", ack_channel_name(r))
                        });
                    }
                }
            }
            PortType::Recv => {
                let Some(a) = self.sys.gamma.iter().find(|a| a.receivers.contains(&p.id)) else {
                    return (guard, vec!["false".into()]);
                };
                let sync = self.sys.is_sync(a);
                let ch = channel_name(&p.id);
                match (self.opts.paper_ack, sync, alone) {
                    (true, true, true) => st.push(format!("synchRecv({ch})")),
                    (true, false, _) => st.push(format!("recv({ch})")),
                    (true, true, false) => {
                        st.push(format!("recv({ch})"));
                        st.push(format!("sendAck({ch})"));
                    }
                    (false, _, _) => {
                        st.push(format!("{ch}?value"));
                        if sync {
                            st.push(format!("{}!ack", ack_channel_name(&p.id)));
                        }
                    }
                }
                if !is_eps(&p.var) {
                    st.push(format!("{} = value", var_name(&p.var)));
                }
            }
            PortType::Internal => {}
        }
        self.finish(t, &t.update, &mut st);
        (guard, st)
    }

    fn arm(&self, loc: usize) -> String {
        let ts: Vec<&Transition> = self.comp.outgoing(loc).collect();
        let end = self.comp.end == Some(loc);
        let n = self.comp.locations.len();
        let mut opts: Vec<(Option<String>, Vec<String>)> = ts.iter().map(|t| self.option(t, ts.len() == 1 && !end)).collect();
        if end {
            opts.push((
                None,
                vec![
                    format!("{} = {}", current_port_var(&self.comp.id), end_symbol(&self.comp.id)),
                    format!("currentLocation = {n}"),
                ],
            ));
        }
        let head = format!("    :: (currentLocation == {loc}) ->");
        let join = |(g, st): &(Option<String>, Vec<String>)| match g {
            Some(g) => format!("{g} -> {}", st.join("; ")),
            None => st.join("; "),
        };
        match opts.as_slice() {
            [] => format!("{head} false"),
            [one @ (None, _)] => format!("{head} {}", join(one)),
            many => {
                let mut s = format!("{head}\n      if\n");
                for o in many {
                    writeln!(s, "      :: {}", join(o)).unwrap();
                }
                s.push_str("      fi");
                s
            }
        }
    }

    fn process(&self) -> String {
        let c = self.comp;
        let mut out = format!("proctype {}() {{\n", proctype_name(&c.id));
        writeln!(out, "  int currentLocation = {};", c.init).unwrap();
        out.push_str("  int value;\n");
        for (v, init) in &c.vars {
            if is_eps(&v.id) {
                continue;
            }
            writeln!(out, "  {} {} = {};", type_name(v.dtype), var_name(&v.id), value(init, &self.strs)).unwrap();
        }
        out.push_str("  do\n  :: if\n");
        for l in 0..c.locations.len() {
            writeln!(out, "{} /* {} */", self.arm(l), c.locations[l]).unwrap();
        }
        writeln!(out, "    :: (currentLocation == {}) -> break", c.locations.len()).unwrap();
        out.push_str("    fi\n  od\n}\n");
        out
    }
}

pub fn emit_process(sys: &CompositeSystem, component: usize, opts: &PromelaOptions) -> String {
    Ctx {
        sys,
        comp: &sys.components[component],
        opts,
        strs: Strings::collect(sys),
    }
    .process()
}

pub fn emit_model(sys: &CompositeSystem, opts: &PromelaOptions) -> Result<String, PromelaError> {
    let diags = check_structure(sys);
    if !diags.is_empty() {
        return Err(PromelaError::Structure(Diagnostics(diags)));
    }
    if opts.strict {
        check_strict(sys)?;
    }
    let strs = Strings::collect(sys);
    let mut out = String::from("/* generated by chorc */\n");
    writeln!(out, "#define MAX_LEN {}", opts.max_len).unwrap();
    out.push_str("mtype = { ack };\n");
    out.push_str(MACROS);
    if strs.0.len() > 1 {
        out.push_str("/* string codes:");
        for (s, k) in &strs.0 {
            write!(out, " {k}={s:?}").unwrap();
        }
        out.push_str(" */\n");
    }
    for (sym, code) in symbols(sys) {
        writeln!(out, "#define {sym} {code}").unwrap();
    }
    for c in &sys.components {
        writeln!(out, "int {} = 0;", current_port_var(&c.id)).unwrap();
    }
    out.push_str(&emit_channels(sys, opts));
    for c in &sys.components {
        out.push('\n');
        let ctx = Ctx { sys, comp: c, opts, strs: Strings(strs.0.clone()) };
        out.push_str(&ctx.process());
    }
    out.push_str("\ninit {\n");
    if sys.components.is_empty() {
        out.push_str("  skip\n");
    } else {
        out.push_str("  atomic {\n");
        for c in &sys.components {
            writeln!(out, "    run {}();", proctype_name(&c.id)).unwrap();
        }
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    for (name, f) in &opts.ltl {
        writeln!(out, "\nltl {} {{ {f} }}", sanitize(name)).unwrap();
    }
    Ok(out)
}
