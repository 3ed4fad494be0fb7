//! Synthesis of a controller-free component system from a choreography.
//!
//! The system is grown in place. Every component has a unique context
//! location where the next piece of behavior is attached.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::cbs::{check_structure, Component, CompositeSystem, Interaction, Transition};
use crate::diag::Diagnostics;
use crate::lang::ast::{ChorAst, GuardedSend, Receive, SystemDecl};
use crate::lang::sets::{end_set, participants, start_set};
use crate::model::{name, DataType, Expr, Name, Port, PortType, Update, Value, VarId, Variable};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("unknown component {0}")]
    UnknownComponent(Name),
    #[error("context of {component} is invalid after {op}")]
    Context { component: Name, op: &'static str },
    #[error("synthesized system violates structural checks:\n{0}")]
    Structure(Diagnostics),
}

pub struct SynthContext {
    pub system: CompositeSystem,
    pub context: Vec<usize>,
    index: HashMap<Name, usize>,
    copies: HashMap<Name, usize>,
    classes: HashMap<&'static str, usize>,
    locs: Vec<usize>,
    /// Number of context checks performed so far.
    pub checks: usize,
}

/// One component per declaration, each with a single initial location.
pub fn init_skeleton(decl: &SystemDecl) -> SynthContext {
    let mut system = CompositeSystem::default();
    let mut index = HashMap::new();
    for (i, c) in decl.components.iter().enumerate() {
        let vars = c.vars.iter().map(|v| (v.var.clone(), v.init.clone())).collect();
        system.components.push(Component::skeleton(&c.id, vars, &format!("L{i}_0")));
        index.insert(c.id.clone(), i);
    }
    let n = system.components.len();
    SynthContext {
        system,
        context: vec![0; n],
        index,
        copies: HashMap::new(),
        classes: HashMap::new(),
        locs: vec![1; n],
        checks: 0,
    }
}

impl SynthContext {
    fn comp(&self, id: &Name) -> Result<usize, SynthError> {
        self.index.get(id).copied().ok_or_else(|| SynthError::UnknownComponent(id.clone()))
    }

    fn new_location(&mut self, c: usize) -> usize {
        let k = self.locs[c];
        self.locs[c] += 1;
        self.system.components[c].add_location(name(&format!("L{c}_{k}")))
    }

    fn next_class(&mut self, class: &'static str) -> usize {
        let k = self.classes.entry(class).or_insert(0);
        *k += 1;
        *k
    }

    fn register(&mut self, c: usize, p: Port) -> Port {
        self.system.components[c].ports.push(p.clone());
        p
    }

    /// Control variable `$<kind>` of component `c`, created on first use.
    fn control_var(&mut self, c: usize, kind: &str, dtype: DataType) -> VarId {
        let comp = &mut self.system.components[c];
        let vname = format!("${kind}");
        let id = VarId::new(&comp.id, &vname);
        if !comp.has_var(&vname) {
            let init = if kind == "eps" { Value::Neutral } else { dtype.default_value() };
            comp.vars.push((Variable { id: id.clone(), dtype }, init));
        }
        id
    }

    /// `p#k` with a per-port counter; same owner, variable and types.
    pub fn fresh_copy(&mut self, p: &Port) -> Port {
        let k = self.copies.entry(p.id.clone()).or_insert(0);
        *k += 1;
        let copy = Port {
            id: name(&format!("{}#{k}", p.id)),
            ..p.clone()
        };
        let c = self.index[&p.owner];
        self.register(c, copy)
    }

    fn internal_copy(&mut self, p: &Port) -> Port {
        let c = self.index[&p.owner];
        let var = self.control_var(c, "eps", DataType::Int);
        let k = self.copies.entry(p.id.clone()).or_insert(0);
        *k += 1;
        let copy = Port {
            id: name(&format!("{}#{k}", p.id)),
            owner: p.owner.clone(),
            var,
            dtype: p.dtype,
            ctype: PortType::Internal,
        };
        self.register(c, copy)
    }

    fn control_port(&mut self, c: usize, local: &str, dtype: DataType, ctype: PortType) -> Port {
        let kind = match ctype {
            PortType::Internal => "eps",
            _ => dtype.keyword(),
        };
        let var = self.control_var(c, kind, dtype);
        let owner = self.system.components[c].id.clone();
        let p = Port {
            id: name(&format!("{owner}.{local}")),
            owner,
            var,
            dtype,
            ctype,
        };
        self.register(c, p)
    }

    /// Attach a transition at the context of `c` leading to a fresh location.
    fn step(&mut self, c: usize, port: &Port, guard: Expr, update: Update) {
        let src = self.context[c];
        let dst = self.new_location(c);
        self.system.components[c].transitions.push(Transition {
            src,
            port: port.id.clone(),
            guard,
            update,
            dst,
        });
        self.context[c] = dst;
    }

    fn epsilon(&mut self, c: usize, src: usize, dst: usize) {
        let k = self.next_class("eps");
        let p = self.control_port(c, &format!("eps@{k}"), DataType::Int, PortType::Internal);
        self.system.components[c].transitions.push(Transition {
            src,
            port: p.id,
            guard: Expr::tt(),
            update: Update::skip(),
            dst,
        });
    }

    fn check(&mut self, op: &'static str) -> Result<(), SynthError> {
        self.checks += 1;
        for (c, &l) in self.context.iter().enumerate() {
            let comp = &self.system.components[c];
            if l >= comp.locations.len() || comp.outgoing(l).next().is_some() {
                return Err(SynthError::Context {
                    component: comp.id.clone(),
                    op,
                });
            }
        }
        Ok(())
    }

    fn comm_ports(&mut self, snd: Port, guard: Expr, update: Update, rcvs: Vec<(Port, Update)>) -> Result<(), SynthError> {
        let s = self.comp(&snd.owner)?;
        self.step(s, &snd, guard, update);
        let mut receivers = Vec::new();
        for (p, f) in rcvs {
            let r = self.comp(&p.owner)?;
            self.step(r, &p, Expr::tt(), f);
            receivers.push(p.id);
        }
        self.system.gamma.push(Interaction {
            send: snd.id,
            receivers,
        });
        Ok(())
    }

    pub fn synth_comm(&mut self, send: &GuardedSend, rcvs: &[Receive]) -> Result<(), SynthError> {
        let snd = self.fresh_copy(&send.port);
        let rs = rcvs
            .iter()
            .map(|r| (self.fresh_copy(&r.port), r.update.clone()))
            .collect();
        self.comm_ports(snd, send.guard.clone(), send.update.clone(), rs)?;
        self.check("comm")
    }

    /// Join every component whose context differs from `base` in some branch.
    pub fn synth_union(&mut self, base: &[usize], branches: &[Vec<usize>]) -> Result<(), SynthError> {
        for c in 0..base.len() {
            let sources: BTreeSet<usize> = branches.iter().map(|ctx| ctx[c]).collect();
            if sources.len() == 1 && sources.contains(&base[c]) {
                self.context[c] = base[c];
                continue;
            }
            let join = self.new_location(c);
            for src in sources {
                self.epsilon(c, src, join);
            }
            self.context[c] = join;
        }
        self.check("union")
    }

    fn others(&self, ch: &ChorAst, master: &Name) -> Result<Vec<usize>, SynthError> {
        let mut k: Vec<usize> = participants(ch)
            .iter()
            .filter(|c| *c != master)
            .map(|c| self.comp(c))
            .collect::<Result<_, _>>()?;
        k.sort_unstable();
        Ok(k)
    }

    pub fn synth_branch(&mut self, master: &Name, conts: &[(GuardedSend, std::sync::Arc<ChorAst>)]) -> Result<(), SynthError> {
        let whole = ChorAst::Branch {
            master: master.clone(),
            conts: conts.to_vec(),
        };
        let k = self.others(&whole, master)?;
        let m = self.comp(master)?;
        let base = self.context.clone();
        let mut ends = Vec::new();
        for (g, body) in conts {
            self.context = base.clone();
            if k.is_empty() {
                let p = self.internal_copy(&g.port);
                self.step(m, &p, g.guard.clone(), g.update.clone());
            } else {
                let n = self.next_class("br");
                let snd = self.fresh_copy(&g.port);
                let rs = k
                    .iter()
                    .map(|&c| (self.control_port(c, &format!("br@{n}"), g.port.dtype, PortType::Recv), Update::skip()))
                    .collect();
                self.comm_ports(snd, g.guard.clone(), g.update.clone(), rs)?;
            }
            self.synth(body)?;
            ends.push(self.context.clone());
        }
        self.synth_union(&base, &ends)?;
        self.check("branch")
    }

    pub fn synth_loop(&mut self, cond: &GuardedSend, body: &ChorAst) -> Result<(), SynthError> {
        let master = cond.port.owner.clone();
        let m = self.comp(&master)?;
        let k = self.others(body, &master)?;
        let head = self.context.clone();
        let not_g = Expr::not(cond.guard.clone());
        if k.is_empty() {
            let p = self.internal_copy(&cond.port);
            self.step(m, &p, cond.guard.clone(), cond.update.clone());
        } else {
            let n = self.next_class("cont");
            let snd = self.fresh_copy(&cond.port);
            let rs = k
                .iter()
                .map(|&c| (self.control_port(c, &format!("cont@{n}"), cond.port.dtype, PortType::Recv), Update::skip()))
                .collect();
            self.comm_ports(snd, cond.guard.clone(), cond.update.clone(), rs)?;
        }
        self.synth(body)?;
        let group: Vec<usize> = std::iter::once(m).chain(k.iter().copied()).collect();
        for &c in &group {
            let after = self.context[c];
            self.epsilon(c, after, head[c]);
            self.context[c] = head[c];
        }
        let n = self.next_class("brk");
        let brk = format!("brk@{n}");
        if k.is_empty() {
            let p = self.control_port(m, &brk, DataType::Int, PortType::Internal);
            self.step(m, &p, not_g, Update::skip());
        } else {
            let snd = self.control_port(m, &brk, DataType::Int, PortType::SyncSend);
            let rs = k
                .iter()
                .map(|&c| (self.control_port(c, &brk, DataType::Int, PortType::Recv), Update::skip()))
                .collect();
            self.comm_ports(snd, not_g, Update::skip(), rs)?;
        }
        self.check("loop")
    }

    pub fn synth_seq(&mut self, first: &ChorAst, second: &ChorAst) -> Result<(), SynthError> {
        self.synth(first)?;
        let ends = self.ordered(&end_set(first))?;
        if let Some(&i) = ends.first() {
            let mut j: BTreeSet<usize> = ends.iter().copied().collect();
            j.extend(self.ordered(&start_set(second))?);
            j.remove(&i);
            if !j.is_empty() {
                let n = self.next_class("cs");
                let snd = self.control_port(i, &format!("cs@{n}"), DataType::Int, PortType::SyncSend);
                let rs = j
                    .into_iter()
                    .map(|c| (self.control_port(c, &format!("cr@{n}"), DataType::Int, PortType::Recv), Update::skip()))
                    .collect();
                self.comm_ports(snd, Expr::tt(), Update::skip(), rs)?;
                self.check("seq-sync")?;
            }
        }
        self.synth(second)?;
        self.check("seq")
    }

    fn ordered(&self, s: &BTreeSet<Name>) -> Result<Vec<usize>, SynthError> {
        let mut v: Vec<usize> = s.iter().map(|c| self.comp(c)).collect::<Result<_, _>>()?;
        v.sort_unstable();
        Ok(v)
    }

    pub fn synth_par(&mut self, left: &ChorAst, right: &ChorAst) -> Result<(), SynthError> {
        self.synth(left)?;
        self.synth(right)?;
        self.check("par")
    }

    pub fn synth(&mut self, ch: &ChorAst) -> Result<(), SynthError> {
        match ch {
            ChorAst::Nil => self.check("nil"),
            ChorAst::Comm { send, rcvs, .. } => self.synth_comm(send, rcvs),
            ChorAst::Branch { master, conts } => self.synth_branch(master, conts),
            ChorAst::Loop { cond, body } => self.synth_loop(cond, body),
            ChorAst::Seq(a, b) => self.synth_seq(a, b),
            ChorAst::Par(a, b) => self.synth_par(a, b),
        }
    }

    /// Mark context locations as end locations and run the structural checks.
    pub fn finish(mut self) -> Result<CompositeSystem, SynthError> {
        for (c, &l) in self.context.iter().enumerate() {
            self.system.components[c].end = Some(l);
        }
        let diags = check_structure(&self.system);
        if diags.is_empty() {
            Ok(self.system)
        } else {
            Err(SynthError::Structure(Diagnostics(diags)))
        }
    }
}

/// Synthesis outcome with the number of context checks that passed.
pub struct Synthesized {
    pub system: CompositeSystem,
    pub context_checks: usize,
}

pub fn synthesize_traced(decl: &SystemDecl, ch: &ChorAst) -> Result<Synthesized, SynthError> {
    let mut ctx = init_skeleton(decl);
    ctx.synth(ch)?;
    let context_checks = ctx.checks;
    Ok(Synthesized {
        system: ctx.finish()?,
        context_checks,
    })
}

pub fn synthesize(decl: &SystemDecl, ch: &ChorAst) -> Result<CompositeSystem, SynthError> {
    synthesize_traced(decl, ch).map(|s| s.system)
}

/// Declared port a synthesized port was copied from, if any.
pub fn base_port(id: &str) -> &str {
    match id.rfind('#') {
        Some(i) => &id[..i],
        None => id,
    }
}

/// Per-component count of each port class, keyed by class name.
pub fn port_classes(c: &Component) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for p in &c.ports {
        let local = p.local();
        let class = if let Some((cls, _)) = local.split_once('@') {
            cls.to_string()
        } else {
            base_port(local).to_string()
        };
        *out.entry(class).or_insert(0) += 1;
    }
    out
}
