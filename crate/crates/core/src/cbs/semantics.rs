use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::{self, Write};

use serde::Serialize;
use thiserror::Error;

use super::system::{CompositeSystem, Transition};
use crate::exec::Limits;
use crate::model::{EvalError, Name, Port, PortType, Valuation, Value, VarId};

/// Joint state: one location per component, every variable, and the
/// nonempty receive buffers.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SysState {
    pub locs: Vec<usize>,
    pub vals: Valuation,
    pub buffers: BTreeMap<Name, VecDeque<Value>>,
}

impl SysState {
    pub fn initial(sys: &CompositeSystem) -> SysState {
        SysState {
            locs: sys.components.iter().map(|c| c.init).collect(),
            vals: sys.initial_valuation(),
            buffers: BTreeMap::new(),
        }
    }

    pub fn buffers_empty(&self) -> bool {
        self.buffers.values().all(|b| b.is_empty())
    }

    pub fn buffer(&self, port: &str) -> Option<&VecDeque<Value>> {
        self.buffers.get(port)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum SysLabel {
    Interaction(usize),
    Tau { component: Name, port: Name },
}

impl fmt::Display for SysLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SysLabel::Interaction(k) => write!(f, "a{k}"),
            SysLabel::Tau { port, .. } => write!(f, "tau({port})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum SysRule {
    SynchSend,
    AsynchSend,
    Recv,
    Internal,
}

impl SysRule {
    pub const ALL: [SysRule; 4] = [SysRule::SynchSend, SysRule::AsynchSend, SysRule::Recv, SysRule::Internal];

    pub fn tag(self) -> &'static str {
        match self {
            SysRule::SynchSend => "synch-send",
            SysRule::AsynchSend => "asynch-send",
            SysRule::Recv => "recv",
            SysRule::Internal => "internal",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SysStep {
    pub label: SysLabel,
    pub rule: SysRule,
    pub target: SysState,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemError {
    #[error("in component {component}: {source}")]
    Eval {
        component: Name,
        #[source]
        source: EvalError,
    },
    #[error("transition uses undeclared port {0}")]
    UnknownPort(Name),
}

/// Precomputed lookup tables over a system.
pub struct Semantics<'a> {
    sys: &'a CompositeSystem,
    ports: HashMap<Name, (usize, Port)>,
    by_send: HashMap<Name, usize>,
}

impl<'a> Semantics<'a> {
    pub fn new(sys: &'a CompositeSystem) -> Semantics<'a> {
        let ports = sys
            .port_table()
            .into_iter()
            .map(|(k, (i, p))| (k, (i, p.clone())))
            .collect();
        let mut by_send = HashMap::new();
        for (k, a) in sys.gamma.iter().enumerate() {
            by_send.entry(a.send.clone()).or_insert(k);
        }
        Semantics { sys, ports, by_send }
    }

    pub fn system(&self) -> &CompositeSystem {
        self.sys
    }

    fn port(&self, id: &Name) -> Result<&(usize, Port), SemError> {
        self.ports.get(id).ok_or_else(|| SemError::UnknownPort(id.clone()))
    }

    fn eval_err(&self, comp: usize) -> impl Fn(EvalError) -> SemError + '_ {
        move |source| SemError::Eval {
            component: self.sys.components[comp].id.clone(),
            source,
        }
    }

    fn enabled<'t>(&'t self, comp: usize, loc: usize, port: &'t str, vals: &'t Valuation) -> impl Iterator<Item = Result<&'t Transition, SemError>> + 't {
        self.sys.components[comp]
            .outgoing(loc)
            .filter(move |t| &*t.port == port)
            .filter_map(move |t| match t.guard.holds(vals) {
                Ok(true) => Some(Ok(t)),
                Ok(false) => None,
                Err(e) => Some(Err(self.eval_err(comp)(e))),
            })
    }

    /// Every successor of `s` under the four composite rules.
    pub fn steps(&self, s: &SysState) -> Result<Vec<SysStep>, SemError> {
        let mut out = Vec::new();
        for (i, c) in self.sys.components.iter().enumerate() {
            for t in c.outgoing(s.locs[i]) {
                let (_, p) = self.port(&t.port)?;
                if !t.guard.holds(&s.vals).map_err(self.eval_err(i))? {
                    continue;
                }
                match p.ctype {
                    PortType::SyncSend => self.synch(i, t, p, s, &mut out)?,
                    PortType::AsyncSend => {
                        let Some(&k) = self.by_send.get(&p.id) else { continue };
                        let d = read(&s.vals, &p.var).map_err(self.eval_err(i))?;
                        let mut next = s.clone();
                        fire(&mut next, i, t, &p.var, d.clone()).map_err(self.eval_err(i))?;
                        for r in &self.sys.gamma[k].receivers {
                            next.buffers.entry(r.clone()).or_default().push_back(d.clone());
                        }
                        out.push(SysStep {
                            label: SysLabel::Interaction(k),
                            rule: SysRule::AsynchSend,
                            target: next,
                        });
                    }
                    PortType::Recv => {
                        let Some(d) = s.buffers.get(&p.id).and_then(|b| b.front()) else { continue };
                        let mut next = s.clone();
                        let buf = next.buffers.get_mut(&p.id).expect("buffer present");
                        buf.pop_front();
                        if buf.is_empty() {
                            next.buffers.remove(&p.id);
                        }
                        fire(&mut next, i, t, &p.var, d.clone()).map_err(self.eval_err(i))?;
                        out.push(SysStep {
                            label: SysLabel::Tau {
                                component: c.id.clone(),
                                port: p.id.clone(),
                            },
                            rule: SysRule::Recv,
                            target: next,
                        });
                    }
                    PortType::Internal => {
                        let mut next = s.clone();
                        fire(&mut next, i, t, &p.var, Value::Neutral).map_err(self.eval_err(i))?;
                        out.push(SysStep {
                            label: SysLabel::Tau {
                                component: c.id.clone(),
                                port: p.id.clone(),
                            },
                            rule: SysRule::Internal,
                            target: next,
                        });
                    }
                }
            }
        }
        Ok(out)
    }

    fn synch(&self, i: usize, t: &Transition, p: &Port, s: &SysState, out: &mut Vec<SysStep>) -> Result<(), SemError> {
        let Some(&k) = self.by_send.get(&p.id) else { return Ok(()) };
        let a = &self.sys.gamma[k];
        let d = read(&s.vals, &p.var).map_err(self.eval_err(i))?;
        // Receiver choices: one enabled transition per receive port.
        let mut choices: Vec<(usize, &Port, Vec<&Transition>)> = Vec::new();
        for r in &a.receivers {
            if s.buffers.get(r).is_some_and(|b| !b.is_empty()) {
                return Ok(());
            }
            let (j, rp) = self.port(r)?;
            let ts = self.enabled(*j, s.locs[*j], r, &s.vals).collect::<Result<Vec<_>, _>>()?;
            if ts.is_empty() {
                return Ok(());
            }
            choices.push((*j, rp, ts));
        }
        let mut combo = vec![0usize; choices.len()];
        loop {
            let mut next = s.clone();
            fire(&mut next, i, t, &p.var, d.clone()).map_err(self.eval_err(i))?;
            for (n, (j, rp, ts)) in choices.iter().enumerate() {
                fire(&mut next, *j, ts[combo[n]], &rp.var, d.clone()).map_err(self.eval_err(*j))?;
            }
            out.push(SysStep {
                label: SysLabel::Interaction(k),
                rule: SysRule::SynchSend,
                target: next,
            });
            // advance the mixed-radix counter
            let mut n = 0;
            loop {
                if n == combo.len() {
                    return Ok(());
                }
                combo[n] += 1;
                if combo[n] < choices[n].2.len() {
                    break;
                }
                combo[n] = 0;
                n += 1;
            }
        }
    }

    pub fn is_terminal_shape(&self, s: &SysState) -> bool {
        s.buffers_empty()
            && self
                .sys
                .components
                .iter()
                .zip(&s.locs)
                .all(|(c, l)| c.end == Some(*l))
    }
}

fn read(vals: &Valuation, v: &VarId) -> Result<Value, EvalError> {
    vals.get(v).cloned().ok_or_else(|| EvalError::Unbound(v.clone()))
}

/// Take transition `t` of component `i`, binding the port variable to `d`.
fn fire(s: &mut SysState, i: usize, t: &Transition, var: &VarId, d: Value) -> Result<(), EvalError> {
    if !s.vals.contains(var) {
        return Err(EvalError::Unbound(var.clone()));
    }
    s.vals.set(var.clone(), d);
    t.update.apply_in_place(&mut s.vals)?;
    s.locs[i] = t.dst;
    Ok(())
}

pub fn sys_steps(sys: &CompositeSystem, s: &SysState) -> Result<Vec<SysStep>, SemError> {
    Semantics::new(sys).steps(s)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SysEdge {
    pub from: usize,
    pub label: SysLabel,
    pub rule: SysRule,
    pub to: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SysGraph {
    pub nodes: Vec<SysState>,
    pub edges: Vec<SysEdge>,
}

impl SysGraph {
    pub fn rules_used(&self) -> BTreeSet<SysRule> {
        self.edges.iter().map(|e| e.rule).collect()
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph states {\n");
        for (i, n) in self.nodes.iter().enumerate() {
            writeln!(out, "  s{i} [label=\"{:?}\"];", n.locs).unwrap();
        }
        for e in &self.edges {
            writeln!(out, "  s{} -> s{} [label=\"{}\"];", e.from, e.to, e.label).unwrap();
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SysExploration {
    pub terminals: Vec<SysState>,
    pub deadlocks: Vec<SysState>,
    pub graph: SysGraph,
    pub truncated: bool,
}

/// Breadth-first closure of the composite semantics from `s0`.
pub fn sys_explore(sys: &CompositeSystem, s0: &SysState, limits: Limits) -> Result<SysExploration, SemError> {
    let sem = Semantics::new(sys);
    let mut index: HashMap<SysState, usize> = HashMap::new();
    let mut graph = SysGraph::default();
    let mut depth = vec![0usize];
    index.insert(s0.clone(), 0);
    graph.nodes.push(s0.clone());
    let mut queue = VecDeque::from([0usize]);
    let (mut terminals, mut deadlocks, mut truncated) = (Vec::new(), Vec::new(), false);
    while let Some(i) = queue.pop_front() {
        if depth[i] >= limits.max_depth {
            truncated = true;
            continue;
        }
        let s = graph.nodes[i].clone();
        let steps = sem.steps(&s)?;
        if steps.is_empty() {
            if sem.is_terminal_shape(&s) {
                terminals.push(s);
            } else {
                deadlocks.push(s);
            }
            continue;
        }
        for st in steps {
            let j = match index.get(&st.target) {
                Some(&j) => j,
                None => {
                    if graph.nodes.len() >= limits.max_configs {
                        truncated = true;
                        continue;
                    }
                    let j = graph.nodes.len();
                    index.insert(st.target.clone(), j);
                    graph.nodes.push(st.target);
                    depth.push(depth[i] + 1);
                    queue.push_back(j);
                    j
                }
            };
            graph.edges.push(SysEdge {
                from: i,
                label: st.label,
                rule: st.rule,
                to: j,
            });
        }
    }
    Ok(SysExploration {
        terminals,
        deadlocks,
        graph,
        truncated,
    })
}
