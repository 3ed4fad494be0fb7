//! Pretty-printer producing text the parser reads back to the same tree.

use std::fmt::Write;

use super::ast::{ChorAst, GuardedSend, Program, Receive};
use crate::model::{Expr, UnOp, Update, Value, VarId};

fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub fn print_value(v: &Value) -> String {
    match v {
        Value::Int(i) => i.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Str(s) => quote(s),
        Value::Neutral => "neutral".into(),
    }
}

fn var(v: &VarId, owner: Option<&str>) -> String {
    match owner {
        Some(o) if o == &*v.owner => v.name.to_string(),
        _ => v.to_string(),
    }
}

/// Render `e`, leaving variables of `owner` unqualified.
pub fn print_expr(e: &Expr, owner: Option<&str>) -> String {
    expr_at(e, owner, 0)
}

fn expr_at(e: &Expr, owner: Option<&str>, min: u8) -> String {
    match e {
        Expr::Lit(v) => print_value(v),
        Expr::Var(v) => var(v, owner),
        Expr::Unary(UnOp::Not, x) => format!("not {}", expr_at(x, owner, 6)),
        Expr::Unary(UnOp::Neg, x) => format!("-({})", expr_at(x, owner, 0)),
        Expr::Binary(op, l, r) => {
            let p = op.precedence();
            let lmin = if op.is_comparison() { p + 1 } else { p };
            let s = format!("{} {} {}", expr_at(l, owner, lmin), op.symbol(), expr_at(r, owner, p + 1));
            if p < min {
                format!("({s})")
            } else {
                s
            }
        }
    }
}

pub fn print_update(f: &Update, owner: Option<&str>) -> String {
    if f.assigns.is_empty() {
        return match &f.label {
            Some(l) => format!("{l}()"),
            None => "skip".into(),
        };
    }
    f.assigns
        .iter()
        .map(|a| format!("{} := {}", var(&a.target, owner), print_expr(&a.rhs, owner)))
        .collect::<Vec<_>>()
        .join("; ")
}

fn send(s: &GuardedSend) -> String {
    let o = Some(&*s.port.owner);
    format!("{}[{}, {}]", s.port.id, print_expr(&s.guard, o), print_update(&s.update, o))
}

fn receive(r: &Receive) -> String {
    if r.update.is_skip() && r.update.label.is_none() {
        r.port.id.to_string()
    } else {
        format!("{}[{}]", r.port.id, print_update(&r.update, Some(&r.port.owner)))
    }
}

/// 0 = par position, 1 = seq position, 2 = atom position.
fn term_at(ch: &ChorAst, ctx: u8) -> String {
    let (s, level) = match ch {
        ChorAst::Nil => ("nil".to_string(), 2),
        ChorAst::Comm { send: s, rcvs, annotation } => {
            let rs: Vec<String> = rcvs.iter().map(receive).collect();
            let mut out = format!("{} -> {{ {} }}", send(s), rs.join(", "));
            if let Some(t) = annotation {
                write!(out, " : {t}").unwrap();
            }
            (out, 2)
        }
        ChorAst::Branch { master, conts } => {
            let cs: Vec<String> = conts
                .iter()
                .map(|(g, c)| format!("{} => {}", send(g), term_at(c, 0)))
                .collect();
            (format!("choice {master} {{ {} }}", cs.join(" | ")), 2)
        }
        ChorAst::Loop { cond, body } => (format!("while ({}) {{ {} }}", send(cond), term_at(body, 0)), 2),
        ChorAst::Seq(a, b) => (format!("{} ; {}", term_at(a, 2), term_at(b, 1)), 1),
        ChorAst::Par(a, b) => (format!("{} || {}", term_at(a, 1), term_at(b, 0)), 0),
    };
    if level < ctx {
        format!("({s})")
    } else {
        s
    }
}

pub fn print_term(ch: &ChorAst) -> String {
    term_at(ch, 0)
}

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for c in &p.decl.components {
        writeln!(out, "comp {} {{", c.id).unwrap();
        for v in &c.vars {
            writeln!(out, "    var {}: {} = {};", v.var.id.name, v.var.dtype, print_value(&v.init)).unwrap();
        }
        for port in &c.ports {
            write!(out, "    port {}: {} of {}", port.local(), port.ctype, port.dtype).unwrap();
            if !port.var.is_control() {
                write!(out, " binds {}", port.var.name).unwrap();
            }
            out.push_str(";\n");
        }
        out.push_str("}\n");
    }
    writeln!(out, "choreography {} =\n    {}", p.name, print_term(&p.chor)).unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::ast::SystemDecl;
    use crate::lang::parse;
    use crate::model::{Assignment, BinOp, DataType, Port, PortType};
    use proptest::prelude::*;
    use std::sync::Arc;

    const DECL: &str = r#"
comp A { var a: int = 1; var b: bool; var s: str = "q\"x"; port s1: ss of int binds a; port s2: as of int binds a; port r1: r of int binds a; port e: in of int; }
comp B { var x: int; var c: bool = true; port s1: ss of int binds x; port r1: r of int binds x; port r2: r of bool binds c; }
comp C { var y: int = -4; port r1: r of int binds y; port s1: as of int binds y; }
choreography main = nil
"#;

    fn decl() -> SystemDecl {
        parse(DECL).unwrap().decl
    }

    #[test]
    fn expressions_keep_structure() {
        let d = decl();
        let known = |v: &VarId| d.var_type(v).is_some();
        for src in [
            "A.a - (A.a - 1)",
            "(A.a + 1) * 2",
            "not (A.b and B.c)",
            "-(A.a) + -3",
            "(A.a < 1) == (B.x > 2)",
            "A.b or B.c and not A.b",
        ] {
            let e = crate::lang::parse_qualified_expr(src, &known).unwrap();
            let back = crate::lang::parse_qualified_expr(&print_expr(&e, None), &known).unwrap();
            assert_eq!(e, back, "{src}");
        }
    }

    #[test]
    fn program_round_trip() {
        let p = parse(DECL).unwrap();
        assert_eq!(parse(&print_program(&p)).unwrap(), p);
    }

    fn port(d: &SystemDecl, id: &str) -> Port {
        d.port(id).unwrap().clone()
    }

    fn arb_int_expr(owner: &'static str, vars: &'static [&'static str]) -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-20i64..20).prop_map(Expr::int),
            proptest::sample::select(vars).prop_map(move |v| Expr::var(owner, v)),
        ];
        leaf.prop_recursive(3, 10, 2, |inner| {
            prop_oneof![
                (
                    proptest::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Mod]),
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, l, r)| Expr::bin(op, l, r)),
                inner.prop_map(|e| Expr::Unary(UnOp::Neg, Box::new(e))),
            ]
        })
    }

    fn arb_guard(owner: &'static str, vars: &'static [&'static str]) -> impl Strategy<Value = Expr> {
        let cmp = (
            proptest::sample::select(vec![BinOp::Lt, BinOp::Le, BinOp::Eq, BinOp::Ne, BinOp::Gt, BinOp::Ge]),
            arb_int_expr(owner, vars),
            arb_int_expr(owner, vars),
        )
            .prop_map(|(op, l, r)| Expr::bin(op, l, r));
        let leaf = prop_oneof![Just(Expr::tt()), Just(Expr::Lit(Value::Bool(false))), cmp];
        leaf.prop_recursive(2, 8, 2, |inner| {
            prop_oneof![
                (proptest::sample::select(vec![BinOp::And, BinOp::Or]), inner.clone(), inner.clone())
                    .prop_map(|(op, l, r)| Expr::bin(op, l, r)),
                inner.prop_map(Expr::not),
            ]
        })
    }

    fn arb_update(owner: &'static str, vars: &'static [&'static str]) -> impl Strategy<Value = Update> {
        prop_oneof![
            Just(Update::skip()),
            Just(Update { label: Some("f".into()), assigns: vec![] }),
            proptest::collection::vec((proptest::sample::select(vars), arb_int_expr(owner, vars)), 1..3).prop_map(
                move |xs| Update {
                    label: None,
                    assigns: xs
                        .into_iter()
                        .map(|(t, rhs)| Assignment { target: VarId::new(owner, t), rhs })
                        .collect(),
                }
            ),
        ]
    }

    fn arb_term() -> impl Strategy<Value = ChorAst> {
        let d = Arc::new(decl());
        let d1 = d.clone();
        let comm = (arb_guard("A", &["a"]), arb_update("A", &["a"]), arb_update("B", &["x"]), any::<bool>())
            .prop_map(move |(g, f, fr, annot)| ChorAst::Comm {
                send: GuardedSend::new(port(&d1, "A.s1"), g, f),
                rcvs: vec![Receive::new(port(&d1, "B.r1"), fr), Receive::new(port(&d1, "C.r1"), Update::skip())],
                annotation: annot.then_some(DataType::Int),
            });
        let leaf = prop_oneof![Just(ChorAst::Nil), comm];
        leaf.prop_recursive(4, 24, 3, move |inner| {
            let d2 = d.clone();
            let d3 = d.clone();
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| ChorAst::seq(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| ChorAst::par(a, b)),
                (arb_guard("A", &["a"]), inner.clone()).prop_map(move |(g, b)| ChorAst::looping(
                    GuardedSend::new(port(&d2, "A.s2"), g, Update::skip()),
                    b
                )),
                proptest::collection::vec((arb_guard("A", &["a"]), arb_update("A", &["a"]), inner), 1..3).prop_map(
                    move |cs| ChorAst::branch(
                        "A",
                        cs.into_iter()
                            .map(|(g, f, c)| (GuardedSend::new(port(&d3, "A.s1"), g, f), c))
                            .collect()
                    )
                ),
            ]
        })
    }

    proptest! {
        #[test]
        fn parse_after_print_is_identity(t in arb_term()) {
            let p = Program { decl: decl(), name: "main".into(), chor: t };
            let text = print_program(&p);
            let back = parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
            prop_assert_eq!(back, p);
        }
    }

    #[test]
    fn receive_without_update_prints_bare() {
        let d = decl();
        let r = Receive::new(port(&d, "B.r1"), Update::skip());
        assert_eq!(receive(&r), "B.r1");
        let p = Port::new("Z", "q", "v", DataType::Int, PortType::Recv);
        assert_eq!(p.local(), "q");
    }
}
