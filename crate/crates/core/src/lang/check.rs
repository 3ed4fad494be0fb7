//! Static well-formedness: locality, ownership, independence and typing.

use std::collections::BTreeSet;

use super::ast::{ChorAst, GuardedSend, Receive, SystemDecl};
use super::sets::participants;
use crate::diag::{Diagnostic, Span};
use crate::model::{DataType, Expr, Name, PortType, Update, VarId};

/// Every violation found in `ch`, one diagnostic each. Empty means clean.
pub fn check_well_formed(decl: &SystemDecl, ch: &ChorAst) -> Vec<Diagnostic> {
    let mut c = Checker { decl, out: Vec::new() };
    c.term(ch);
    c.out
}

struct Checker<'a> {
    decl: &'a SystemDecl,
    out: Vec<Diagnostic>,
}

impl Checker<'_> {
    fn emit(&mut self, rule: &str, msg: String, span: Span) {
        self.out.push(Diagnostic::new(rule, msg).at(span));
    }

    fn env(&self) -> impl Fn(&VarId) -> Option<DataType> + '_ {
        |v| self.decl.var_type(v)
    }

    fn guard(&mut self, g: &Expr, owner: &Name, port: &Name, span: Span) {
        for v in g.vars() {
            if v.owner != *owner {
                self.emit(
                    "guard-locality",
                    format!("guard of {port} reads {v}, which is not owned by {owner}"),
                    span,
                );
            }
        }
        let ty = g.type_of(&self.env());
        match ty {
            Ok(DataType::Bool) => {}
            Ok(t) => self.emit("type-error", format!("guard of {port} has type {t}, expected bool"), span),
            Err(e) => self.emit("type-error", format!("guard of {port}: {e}"), span),
        }
    }

    fn update(&mut self, f: &Update, owner: &Name, port: &Name, span: Span) {
        for v in f.vars() {
            if v.owner != *owner {
                self.emit(
                    "update-locality",
                    format!("update of {port} uses {v}, which is not owned by {owner}"),
                    span,
                );
            }
        }
        for a in &f.assigns {
            let Some(want) = self.decl.var_type(&a.target) else {
                self.emit("type-error", format!("update of {port} assigns unknown {}", a.target), span);
                continue;
            };
            let ty = a.rhs.type_of(&self.env());
            match ty {
                Ok(t) if t == want => {}
                Ok(t) => self.emit(
                    "type-error",
                    format!("update of {port} assigns {t} to {} of type {want}", a.target),
                    span,
                ),
                Err(e) => self.emit("type-error", format!("update of {port}: {e}"), span),
            }
        }
    }

    fn send(&mut self, s: &GuardedSend) {
        let p = &s.port;
        if !p.ctype.is_send() {
            self.emit(
                "port-kind",
                format!("{} is a {} port, expected ss or as", p.id, p.ctype),
                s.span,
            );
        }
        self.guard(&s.guard, &p.owner, &p.id, s.span);
        self.update(&s.update, &p.owner, &p.id, s.span);
    }

    fn receive(&mut self, r: &Receive) {
        if r.port.ctype != PortType::Recv {
            self.emit(
                "port-kind",
                format!("{} is a {} port, expected r", r.port.id, r.port.ctype),
                r.span,
            );
        }
        self.update(&r.update, &r.port.owner, &r.port.id, r.span);
    }

    fn term(&mut self, ch: &ChorAst) {
        match ch {
            ChorAst::Nil => {}
            ChorAst::Comm { send, rcvs, annotation } => {
                self.send(send);
                if rcvs.is_empty() {
                    self.emit("empty-receivers", "empty receiver list".into(), send.span);
                }
                let mut owners = BTreeSet::new();
                for r in rcvs {
                    self.receive(r);
                    if r.port.dtype != send.port.dtype {
                        self.emit(
                            "dtype-mismatch",
                            format!(
                                "{} carries {} but {} expects {}",
                                send.port.id, send.port.dtype, r.port.id, r.port.dtype
                            ),
                            r.span,
                        );
                    }
                    if r.port.owner == send.port.owner || !owners.insert(r.port.owner.clone()) {
                        self.emit(
                            "receiver-distinct",
                            format!("receiver {} repeats component {}", r.port.id, r.port.owner),
                            r.span,
                        );
                    }
                }
                if let Some(t) = annotation {
                    if *t != send.port.dtype {
                        self.emit(
                            "dtype-mismatch",
                            format!("annotation {t} does not match {} of {}", send.port.dtype, send.port.id),
                            send.span,
                        );
                    }
                }
            }
            ChorAst::Branch { master, conts } => {
                for (g, body) in conts {
                    if g.port.owner != *master {
                        self.emit(
                            "branch-port-ownership",
                            format!("continuation port {} is not owned by master {master}", g.port.id),
                            g.span,
                        );
                    }
                    self.send(g);
                    self.term(body);
                }
            }
            ChorAst::Loop { cond, body } => {
                self.send(cond);
                self.term(body);
            }
            ChorAst::Seq(a, b) => {
                self.term(a);
                self.term(b);
            }
            ChorAst::Par(a, b) => {
                let shared: Vec<_> = participants(a).intersection(&participants(b)).cloned().collect();
                if !shared.is_empty() {
                    let names: Vec<&str> = shared.iter().map(|n| &**n).collect();
                    self.out.push(Diagnostic::new(
                        "parallel-independence",
                        format!("parallel operands share components {}", names.join(", ")),
                    ));
                }
                self.term(a);
                self.term(b);
            }
        }
    }
}
