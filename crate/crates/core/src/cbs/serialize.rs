//! Canonical line-oriented text form of a system.
//!
//! ```text
//! component B1
//!   var x : int = 0
//!   port B1.S#1 : ss of int binds x
//!   location L0_0 init
//!   location L0_1 end
//!   trans L0_0 -> L0_1 on B1.S#1 when true do skip
//! end
//! interaction B1.S#1 -> S.R#1, Bk.R#1
//! ```
//!
//! Components, ports, locations, transitions and interactions are sorted, so
//! equal systems print to identical bytes.

use std::collections::BTreeSet;
use std::fmt::Write;

use super::system::{Component, CompositeSystem, Interaction, Transition};
use crate::diag::{Diagnostic, Diagnostics, Span};
use crate::lang::print::print_value;
use crate::lang::{parse_guarded_update, parse_value, print_expr, print_update};
use crate::model::{name, DataType, Port, PortType, VarId, Variable};

fn transition_line(c: &Component, t: &Transition) -> String {
    format!(
        "  trans {} -> {} on {} when {} do {}",
        c.locations[t.src],
        c.locations[t.dst],
        t.port,
        print_expr(&t.guard, None),
        print_update(&t.update, None)
    )
}

pub fn to_text(sys: &CompositeSystem) -> String {
    let mut out = String::new();
    let mut comps: Vec<&Component> = sys.components.iter().collect();
    comps.sort_by(|a, b| a.id.cmp(&b.id));
    for c in comps {
        writeln!(out, "component {}", c.id).unwrap();
        let mut vars: Vec<_> = c.vars.iter().collect();
        vars.sort_by(|a, b| a.0.id.name.cmp(&b.0.id.name));
        for (v, init) in vars {
            writeln!(out, "  var {} : {} = {}", v.id.name, v.dtype, print_value(init)).unwrap();
        }
        let mut ports: Vec<&Port> = c.ports.iter().collect();
        ports.sort_by(|a, b| a.id.cmp(&b.id));
        for p in ports {
            writeln!(out, "  port {} : {} of {} binds {}", p.id, p.ctype, p.dtype, p.var.name).unwrap();
        }
        let mut locs: Vec<usize> = (0..c.locations.len()).collect();
        locs.sort_by(|a, b| c.locations[*a].cmp(&c.locations[*b]));
        for l in locs {
            let mut line = format!("  location {}", c.locations[l]);
            if l == c.init {
                line.push_str(" init");
            }
            if Some(l) == c.end {
                line.push_str(" end");
            }
            writeln!(out, "{line}").unwrap();
        }
        let lines: BTreeSet<String> = c.transitions.iter().map(|t| transition_line(c, t)).collect();
        for l in lines {
            writeln!(out, "{l}").unwrap();
        }
        out.push_str("end\n");
    }
    let mut gamma: Vec<&Interaction> = sys.gamma.iter().collect();
    gamma.sort();
    for a in gamma {
        let rs: Vec<&str> = a.receivers.iter().map(|r| &**r).collect();
        writeln!(out, "interaction {} -> {}", a.send, rs.join(", ")).unwrap();
    }
    out
}

struct RawTrans {
    comp: usize,
    src: String,
    dst: String,
    port: String,
    rest: String,
    line: u32,
}

fn err(line: u32, msg: impl Into<String>) -> Diagnostic {
    Diagnostic::new("system-syntax", msg).at(Span::new(line, 1))
}

/// Read back the output of [`to_text`].
pub fn from_text(src: &str) -> Result<CompositeSystem, Diagnostics> {
    let mut sys = CompositeSystem::default();
    let mut raw = Vec::new();
    let mut current: Option<usize> = None;
    let mut diags = Vec::new();
    for (n, line) in src.lines().enumerate() {
        let ln = n as u32 + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with("//") {
            continue;
        }
        let (kw, rest) = line.split_once(' ').unwrap_or((line, ""));
        match (kw, current) {
            ("component", None) => {
                sys.components.push(Component {
                    id: name(rest.trim()),
                    vars: Vec::new(),
                    ports: Vec::new(),
                    locations: Vec::new(),
                    transitions: Vec::new(),
                    init: usize::MAX,
                    end: None,
                });
                current = Some(sys.components.len() - 1);
            }
            ("end", Some(i)) => {
                if sys.components[i].init == usize::MAX {
                    diags.push(err(ln, format!("component {} has no init location", sys.components[i].id)));
                    sys.components[i].init = 0;
                }
                current = None;
            }
            ("var", Some(i)) => {
                let parsed = (|| {
                    let (lhs, val) = rest.split_once('=')?;
                    let (vname, ty) = lhs.split_once(':')?;
                    Some((vname.trim(), DataType::from_keyword(ty.trim())?, val.trim()))
                })();
                let Some((vname, ty, val)) = parsed else {
                    diags.push(err(ln, "expected `var <name> : <type> = <value>`"));
                    continue;
                };
                match parse_value(val) {
                    Ok(v) => {
                        let c = &mut sys.components[i];
                        c.vars.push((
                            Variable {
                                id: VarId::new(&c.id, vname),
                                dtype: ty,
                            },
                            v,
                        ))
                    }
                    Err(e) => diags.extend(e.0.into_iter().map(|d| d.at(Span::new(ln, 1)))),
                }
            }
            ("port", Some(i)) => {
                let w: Vec<&str> = rest.split_whitespace().collect();
                let parsed = match w.as_slice() {
                    [id, ":", ct, "of", dt, "binds", var] => {
                        PortType::from_keyword(ct).zip(DataType::from_keyword(dt)).map(|(c, d)| (*id, c, d, *var))
                    }
                    _ => None,
                };
                let Some((id, ct, dt, var)) = parsed else {
                    diags.push(err(ln, "expected `port <id> : <ctype> of <dtype> binds <var>`"));
                    continue;
                };
                let c = &mut sys.components[i];
                c.ports.push(Port {
                    id: name(id),
                    owner: c.id.clone(),
                    var: VarId::new(&c.id, var),
                    dtype: dt,
                    ctype: ct,
                });
            }
            ("location", Some(i)) => {
                let mut w = rest.split_whitespace();
                let Some(lname) = w.next() else {
                    diags.push(err(ln, "location needs a name"));
                    continue;
                };
                let c = &mut sys.components[i];
                let l = c.add_location(name(lname));
                for flag in w {
                    match flag {
                        "init" => c.init = l,
                        "end" => c.end = Some(l),
                        other => diags.push(err(ln, format!("unknown location flag {other}"))),
                    }
                }
            }
            ("trans", Some(i)) => {
                let w: Vec<&str> = rest.splitn(6, ' ').collect();
                match w.as_slice() {
                    [src, "->", dst, "on", port, tail] if tail.starts_with("when ") => raw.push(RawTrans {
                        comp: i,
                        src: src.to_string(),
                        dst: dst.to_string(),
                        port: port.to_string(),
                        rest: tail["when ".len()..].to_string(),
                        line: ln,
                    }),
                    _ => diags.push(err(ln, "expected `trans <src> -> <dst> on <port> when <guard> do <update>`")),
                }
            }
            ("interaction", None) => {
                let Some((s, rs)) = rest.split_once("->") else {
                    diags.push(err(ln, "expected `interaction <send> -> <receivers>`"));
                    continue;
                };
                sys.gamma.push(Interaction {
                    send: name(s.trim()),
                    receivers: rs.split(',').map(|r| name(r.trim())).filter(|r| !r.is_empty()).collect(),
                });
            }
            _ => diags.push(err(ln, format!("unexpected `{kw}`"))),
        }
    }
    if current.is_some() {
        diags.push(err(src.lines().count() as u32, "missing `end`"));
    }
    let known: BTreeSet<VarId> = sys
        .components
        .iter()
        .flat_map(|c| c.vars.iter().map(|(v, _)| v.id.clone()))
        .collect();
    for r in raw {
        let c = &sys.components[r.comp];
        let (Some(src), Some(dst)) = (c.location(&r.src), c.location(&r.dst)) else {
            diags.push(err(r.line, "transition refers to an undeclared location"));
            continue;
        };
        match parse_guarded_update(&r.rest, &|v| known.contains(v)) {
            Ok((guard, update)) => sys.components[r.comp].transitions.push(Transition {
                src,
                port: name(&r.port),
                guard,
                update,
                dst,
            }),
            Err(e) => diags.extend(e.0.into_iter().map(|d| d.at(Span::new(r.line, 1)))),
        }
    }
    if diags.is_empty() {
        Ok(sys)
    } else {
        Err(Diagnostics(diags))
    }
}
