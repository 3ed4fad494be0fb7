//! Agreement between a choreography and its synthesized system, structural
//! invariants, and LTL property templates over the Promela observables.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::cbs::{check_structure, sys_explore, CompositeSystem, SemError, SysState};
use crate::diag::Diagnostic;
use crate::exec::{explore, ExecError, Limits};
use crate::lang::ast::{ChorAst, SystemDecl};
use crate::model::{PortType, Valuation};
use crate::promela::{current_port_var, end_symbol, port_symbol, symbols};
use crate::synth::base_port;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("choreography execution failed: {0}")]
    Exec(#[from] ExecError),
    #[error("system execution failed: {0}")]
    Sem(#[from] SemError),
    #[error("unknown port {0}")]
    UnknownPort(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Equivalent,
    Mismatch,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Equivalent => "equivalent",
            Verdict::Mismatch => "mismatch",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EquivReport {
    pub verdict: Verdict,
    pub chor_finals: BTreeSet<Valuation>,
    pub sys_finals: BTreeSet<Valuation>,
    pub chor_deadlocks: usize,
    #[serde(skip)]
    pub sys_deadlocks: Vec<SysState>,
    pub truncated: bool,
    /// Human-readable reasons for a mismatch.
    pub witnesses: Vec<String>,
}

impl fmt::Display for EquivReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "verdict: {}", self.verdict)?;
        writeln!(f, "choreography finals: {}", self.chor_finals.len())?;
        for v in &self.chor_finals {
            writeln!(f, "  {v}")?;
        }
        writeln!(f, "system finals: {}", self.sys_finals.len())?;
        for v in &self.sys_finals {
            writeln!(f, "  {v}")?;
        }
        for w in &self.witnesses {
            writeln!(f, "witness: {w}")?;
        }
        Ok(())
    }
}

/// Restriction of a system valuation to the declared user variables.
pub fn project(decl: &SystemDecl, v: &Valuation) -> Valuation {
    v.restrict(|id| !id.is_control() && decl.var_type(id).is_some())
}

pub fn equiv_check(decl: &SystemDecl, ch: &ChorAst, sys: &CompositeSystem, limits: Limits) -> Result<EquivReport, VerifyError> {
    let sigma0 = decl.initial_valuation();
    let chor = explore(ch, &sigma0, limits)?;
    let s0 = SysState::initial(sys);
    let sysx = sys_explore(sys, &s0, limits)?;
    let sys_finals: BTreeSet<Valuation> = sysx.terminals.iter().map(|s| project(decl, &s.vals)).collect();
    let mut witnesses = Vec::new();
    for c in chor.deadlocks.iter().take(3) {
        witnesses.push(format!("choreography deadlock at {}", c.valuation()));
    }
    for s in sysx.deadlocks.iter().take(3) {
        let locs: Vec<String> = sys
            .components
            .iter()
            .zip(&s.locs)
            .map(|(c, l)| format!("{}@{}", c.id, c.locations[*l]))
            .collect();
        witnesses.push(format!("system deadlock at [{}] with {}", locs.join(", "), project(decl, &s.vals)));
    }
    for v in chor.finals.difference(&sys_finals) {
        witnesses.push(format!("only the choreography reaches {v}"));
    }
    for v in sys_finals.difference(&chor.finals) {
        witnesses.push(format!("only the system reaches {v}"));
    }
    let truncated = chor.truncated || sysx.truncated;
    let deadlocked = !chor.deadlocks.is_empty() || !sysx.deadlocks.is_empty();
    let verdict = if deadlocked {
        Verdict::Mismatch
    } else if truncated {
        Verdict::Inconclusive
    } else if chor.finals == sys_finals {
        Verdict::Equivalent
    } else {
        Verdict::Mismatch
    };
    Ok(EquivReport {
        verdict,
        chor_finals: chor.finals,
        sys_finals,
        chor_deadlocks: chor.deadlocks.len(),
        sys_deadlocks: sysx.deadlocks,
        truncated,
        witnesses,
    })
}

/// Canned corruptions of a synthesized system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mutation {
    DropEpsilonEdge,
    SwapBreakGuards,
    MergePortCopies,
    DropInteraction,
    UnmarkEnd,
}

impl Mutation {
    pub const ALL: [Mutation; 5] = [
        Mutation::DropEpsilonEdge,
        Mutation::SwapBreakGuards,
        Mutation::MergePortCopies,
        Mutation::DropInteraction,
        Mutation::UnmarkEnd,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Mutation::DropEpsilonEdge => "drop-eps",
            Mutation::SwapBreakGuards => "swap-break",
            Mutation::MergePortCopies => "merge-copies",
            Mutation::DropInteraction => "drop-interaction",
            Mutation::UnmarkEnd => "unmark-end",
        }
    }

    pub fn from_tag(s: &str) -> Option<Mutation> {
        Mutation::ALL.into_iter().find(|m| m.tag() == s)
    }
}

fn local(port: &str) -> &str {
    port.split_once('.').map_or(port, |(_, l)| l)
}

/// `None` when the system has nothing the mutation could touch.
pub fn mutate(sys: &CompositeSystem, m: Mutation) -> Option<CompositeSystem> {
    let mut out = sys.clone();
    match m {
        Mutation::DropEpsilonEdge => {
            let (ci, ti) = out.components.iter().enumerate().find_map(|(ci, c)| {
                let eps: Vec<usize> = (0..c.transitions.len())
                    .filter(|&i| local(&c.transitions[i].port).starts_with("eps@"))
                    .collect();
                let back = eps.iter().find(|&&i| c.transitions[i].dst < c.transitions[i].src);
                back.or(eps.first()).map(|&ti| (ci, ti))
            })?;
            out.components[ci].transitions.remove(ti);
        }
        Mutation::SwapBreakGuards => {
            let (ci, a, b) = out.components.iter().enumerate().find_map(|(ci, c)| {
                c.transitions.iter().enumerate().find_map(|(a, t)| {
                    if !local(&t.port).starts_with("brk@") || t.guard.is_true_lit() {
                        return None;
                    }
                    let b = c.transitions.iter().position(|u| u.src == t.src && u.port != t.port)?;
                    Some((ci, a, b))
                })
            })?;
            let ts = &mut out.components[ci].transitions;
            let g = ts[a].guard.clone();
            ts[a].guard = ts[b].guard.clone();
            ts[b].guard = g;
        }
        Mutation::MergePortCopies => {
            let (ci, keep, drop) = out.components.iter().enumerate().find_map(|(ci, c)| {
                let mut sends: Vec<&crate::model::Port> = c.ports.iter().filter(|p| p.ctype.is_send() && p.id.contains('#')).collect();
                sends.sort_by(|a, b| a.id.cmp(&b.id));
                sends.iter().enumerate().find_map(|(i, p)| {
                    sends[i + 1..]
                        .iter()
                        .find(|q| base_port(&q.id) == base_port(&p.id))
                        .map(|q| (ci, p.id.clone(), q.id.clone()))
                })
            })?;
            let c = &mut out.components[ci];
            c.ports.retain(|p| p.id != drop);
            for t in &mut c.transitions {
                if t.port == drop {
                    t.port = keep.clone();
                }
            }
            for a in &mut out.gamma {
                if a.send == drop {
                    a.send = keep.clone();
                }
            }
        }
        Mutation::DropInteraction => {
            if out.gamma.is_empty() {
                return None;
            }
            out.gamma.remove(0);
        }
        Mutation::UnmarkEnd => {
            let c = out.components.iter_mut().find(|c| c.end.is_some())?;
            c.end = None;
        }
    }
    Some(out)
}

/// Structural checks plus the shape every synthesized system has.
pub fn invariant_suite(sys: &CompositeSystem) -> Vec<Diagnostic> {
    let mut out = check_structure(sys);
    for c in &sys.components {
        match c.end {
            None => out.push(Diagnostic::new("end-location", format!("component {} has no end location", c.id))),
            Some(e) if c.outgoing(e).next().is_some() => out.push(Diagnostic::new(
                "end-location",
                format!("end location {} of {} has outgoing transitions", c.locations[e], c.id),
            )),
            Some(_) => {}
        }
        for t in &c.transitions {
            let recv = c.port(&t.port).is_some_and(|p| p.ctype == PortType::Recv);
            if recv && !t.guard.is_true_lit() {
                out.push(Diagnostic::new(
                    "receive-guard",
                    format!("receive transition of {} on {} is guarded", c.id, t.port),
                ));
            }
        }
    }
    out
}

/// Which property templates to instantiate.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LtlSelection {
    pub termination: bool,
    /// Port whose infinite recurrence counts as livelock.
    pub livelock: Option<String>,
    /// Ports that may fire at most once.
    pub unique: Vec<String>,
    /// `(guarded, required)`: the first may not fire before the second.
    pub transactions: Vec<(String, String)>,
}

impl LtlSelection {
    pub fn is_empty(&self) -> bool {
        !self.termination && self.livelock.is_none() && self.unique.is_empty() && self.transactions.is_empty()
    }
}

/// `currPort_<C> == <symbol>` for a user-level port name such as `Bk.MS1`
/// or a component end marker `Bk.E`.
fn observe(sys: &CompositeSystem, port: &str) -> Result<String, VerifyError> {
    let unknown = || VerifyError::UnknownPort(port.to_string());
    let (comp, _) = port.split_once('.').ok_or_else(unknown)?;
    let c = sys.component(comp).ok_or_else(unknown)?;
    let sym = if port == format!("{comp}.E") {
        end_symbol(comp)
    } else if c.ports.iter().any(|p| &*p.id == port || base_port(&p.id) == port) {
        port_symbol(port)
    } else {
        return Err(unknown());
    };
    Ok(format!("({} == {sym})", current_port_var(comp)))
}

/// Named formulas in Promela LTL syntax, one per selected template.
pub fn ltl_formulas(sys: &CompositeSystem, sel: &LtlSelection) -> Result<Vec<(String, String)>, VerifyError> {
    let mut out = Vec::new();
    if sel.termination && !sys.components.is_empty() {
        let ends: Vec<String> = sys
            .components
            .iter()
            .map(|c| format!("({} == {})", current_port_var(&c.id), end_symbol(&c.id)))
            .collect();
        out.push((
            "termination".to_string(),
            format!("[] (({}) -> <> ({}))", ends.join(" || "), ends.join(" && ")),
        ));
    }
    if let Some(p) = &sel.livelock {
        out.push(("no_livelock".to_string(), format!("! ([] <> {})", observe(sys, p)?)));
    }
    if !sel.unique.is_empty() {
        let parts = sel
            .unique
            .iter()
            .map(|p| observe(sys, p).map(|o| format!("[] ({o} -> X [] ! {o})")))
            .collect::<Result<Vec<_>, _>>()?;
        out.push(("uniqueness".to_string(), parts.join(" && ")));
    }
    if !sel.transactions.is_empty() {
        let parts = sel
            .transactions
            .iter()
            .map(|(p, q)| Ok(format!("[] ((! {}) U {})", observe(sys, p)?, observe(sys, q)?)))
            .collect::<Result<Vec<_>, VerifyError>>()?;
        out.push(("transaction".to_string(), parts.join(" && ")));
    }
    Ok(out)
}

/// Property file text, one `name : formula` line per template.
pub fn emit_ltl(sys: &CompositeSystem, sel: &LtlSelection) -> Result<String, VerifyError> {
    Ok(ltl_formulas(sys, sel)?
        .into_iter()
        .map(|(n, f)| format!("{n} : {f}\n"))
        .collect())
}

/// Read back `name : formula` lines.
pub fn parse_ltl(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once(" : "))
        .map(|(n, f)| (n.trim().to_string(), f.trim().to_string()))
        .collect()
}

/// Every symbol the formulas may reference.
pub fn ltl_symbols(sys: &CompositeSystem) -> BTreeSet<String> {
    let mut s: BTreeSet<String> = symbols(sys).into_keys().collect();
    s.extend(sys.components.iter().map(|c| current_port_var(&c.id)));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;
    use crate::synth::synthesize;

    const LOOP: &str = "comp A { var i: int; var x: int; port c: ss of int binds i; port s: ss of int binds x; }
        comp B { var y: int; port r: r of int binds y; }
        choreography main = while (A.c[i < 2, i := i + 1]) { A.s[true, x := x + 1] -> { B.r } } ; A.s -> { B.r }";

    fn setup(src: &str) -> (SystemDecl, ChorAst, CompositeSystem) {
        let p = parse(src).unwrap();
        let sys = synthesize(&p.decl, &p.chor).unwrap();
        (p.decl, p.chor, sys)
    }

    #[test]
    fn synthesized_loop_is_equivalent() {
        let (d, ch, sys) = setup(LOOP);
        let r = equiv_check(&d, &ch, &sys, Limits::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Equivalent, "{r}");
        assert_eq!(r.chor_finals.len(), 1);
        let f = r.chor_finals.iter().next().unwrap();
        assert_eq!(f.get(&crate::model::VarId::new("A", "x")), Some(&crate::model::Value::Int(2)));
    }

    #[test]
    fn nil_is_equivalent_with_initial_finals() {
        let (d, ch, sys) = setup("comp A { var x: int = 4; port s: ss of int binds x; }\nchoreography main = nil");
        let r = equiv_check(&d, &ch, &sys, Limits::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Equivalent);
        assert_eq!(r.chor_finals, BTreeSet::from([d.initial_valuation()]));
    }

    #[test]
    fn every_mutation_breaks_the_loop_example() {
        let (d, ch, sys) = setup(LOOP);
        for m in Mutation::ALL {
            let bad = mutate(&sys, m).unwrap_or_else(|| panic!("{m:?} not applicable"));
            let r = equiv_check(&d, &ch, &bad, Limits::default()).unwrap();
            assert_ne!(r.verdict, Verdict::Equivalent, "{m:?}");
        }
    }

    #[test]
    fn invariant_suite_flags_shared_ports_and_mixed_locations() {
        let (_, _, sys) = setup(LOOP);
        assert!(invariant_suite(&sys).is_empty());
        let merged = mutate(&sys, Mutation::MergePortCopies).unwrap();
        assert!(invariant_suite(&merged).iter().any(|d| d.rule == "port-conflict"));
        let unmarked = mutate(&sys, Mutation::UnmarkEnd).unwrap();
        assert!(invariant_suite(&unmarked).iter().any(|d| d.rule == "end-location"));
    }

    #[test]
    fn ltl_templates() {
        let (_, _, sys) = setup(LOOP);
        let sel = LtlSelection {
            termination: true,
            livelock: Some("A.c".into()),
            unique: vec!["A.s".into(), "B.r".into()],
            transactions: vec![("B.r".into(), "A.s".into())],
        };
        let text = emit_ltl(&sys, &sel).unwrap();
        let f = parse_ltl(&text);
        assert_eq!(f.len(), 4);
        assert_eq!(f[0].1, "[] (((currPort_A == A_E) || (currPort_B == B_E)) -> <> ((currPort_A == A_E) && (currPort_B == B_E)))");
        assert_eq!(f[2].1.matches("X []").count(), 2);
        assert!(emit_ltl(&sys, &LtlSelection::default()).unwrap().is_empty());
        let bad = LtlSelection { unique: vec!["A.nope".into()], ..Default::default() };
        assert!(matches!(emit_ltl(&sys, &bad), Err(VerifyError::UnknownPort(_))));
    }
}
