//! Reference interpreter for choreographies: one-step successors, exhaustive
//! exploration and seeded random traces.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::{self, Write};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::lang::ast::{ChorAst, Receive};
use crate::model::{transfer, EvalError, Name, PortType, TransferError, Valuation};

/// Runtime term: a choreography extended with the pending receives left by
/// an asynchronous send.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Node(Arc<ChorAst>),
    Residual(Vec<Receive>),
    Seq(Arc<Term>, Arc<Term>),
    Par(Arc<Term>, Arc<Term>),
}

impl Term {
    pub fn of(ch: &ChorAst) -> Term {
        Term::Node(Arc::new(ch.clone()))
    }

    /// Owners of pending receives when the term consists only of residuals.
    fn pending_owners(&self) -> Option<BTreeSet<Name>> {
        match self {
            Term::Residual(rs) => Some(rs.iter().map(|r| r.port.owner.clone()).collect()),
            Term::Par(a, b) => {
                let mut s = a.pending_owners()?;
                s.extend(b.pending_owners()?);
                Some(s)
            }
            _ => None,
        }
    }
}

fn mk_seq(a: Term, b: Term) -> Term {
    match (a, b) {
        (Term::Node(a), Term::Node(b)) => Term::Node(Arc::new(ChorAst::Seq(a, b))),
        (a, b) => Term::Seq(Arc::new(a), Arc::new(b)),
    }
}

fn mk_par(a: Term, b: Term) -> Term {
    match (a, b) {
        (Term::Node(a), Term::Node(b)) => Term::Node(Arc::new(ChorAst::Par(a, b))),
        (a, b) => Term::Par(Arc::new(a), Arc::new(b)),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Config {
    Running(Term, Valuation),
    Final(Valuation),
}

impl Config {
    pub fn start(ch: &ChorAst, sigma: Valuation) -> Config {
        Config::Running(Term::of(ch), sigma)
    }

    pub fn valuation(&self) -> &Valuation {
        match self {
            Config::Running(_, v) | Config::Final(v) => v,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Label {
    Tau,
    Ports(BTreeSet<Name>),
}

impl Label {
    fn ports<'a>(ids: impl IntoIterator<Item = &'a Name>) -> Label {
        Label::Ports(ids.into_iter().cloned().collect())
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Tau => f.write_str("tau"),
            Label::Ports(ps) => {
                let v: Vec<&str> = ps.iter().map(|p| &**p).collect();
                write!(f, "{{{}}}", v.join(", "))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Rule {
    Nil,
    SynchSendRcv,
    AsynchSendRcv1,
    AsynchSendRcv2,
    MasterBranching,
    IterativeTt,
    IterativeFf,
    Sequential1,
    Sequential2,
    Parallel1,
    Parallel2,
    Parallel3,
    Parallel4,
    /// A step of the right operand of a sequence whose left operand only
    /// has pending receives left.
    SequentialLift,
}

impl Rule {
    pub const ALL: [Rule; 14] = [
        Rule::Nil,
        Rule::SynchSendRcv,
        Rule::AsynchSendRcv1,
        Rule::AsynchSendRcv2,
        Rule::MasterBranching,
        Rule::IterativeTt,
        Rule::IterativeFf,
        Rule::Sequential1,
        Rule::Sequential2,
        Rule::Parallel1,
        Rule::Parallel2,
        Rule::Parallel3,
        Rule::Parallel4,
        Rule::SequentialLift,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Rule::Nil => "nil",
            Rule::SynchSendRcv => "synch-sendrcv",
            Rule::AsynchSendRcv1 => "asynch-sendrcv-1",
            Rule::AsynchSendRcv2 => "asynch-sendrcv-2",
            Rule::MasterBranching => "master-branching",
            Rule::IterativeTt => "iterative-tt",
            Rule::IterativeFf => "iterative-ff",
            Rule::Sequential1 => "sequential-1",
            Rule::Sequential2 => "sequential-2",
            Rule::Parallel1 => "parallel-1",
            Rule::Parallel2 => "parallel-2",
            Rule::Parallel3 => "parallel-3",
            Rule::Parallel4 => "parallel-4",
            Rule::SequentialLift => "sequential-lift",
        }
    }
}

/// One successor together with the rules used to derive it, innermost first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub label: Label,
    pub rules: Vec<Rule>,
    pub actors: BTreeSet<Name>,
    pub target: Config,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error("configuration is final")]
    Final,
}

fn pure(rule: Rule, label: Label, actors: BTreeSet<Name>, target: Config) -> Step {
    Step {
        label,
        rules: vec![rule],
        actors,
        target,
    }
}

fn wrap(mut s: Step, rule: Rule, f: impl FnOnce(Config) -> Config) -> Step {
    s.rules.push(rule);
    s.target = f(s.target);
    s
}

/// All successors of a running configuration.
pub fn chor_steps(c: &Config) -> Result<Vec<Step>, ExecError> {
    match c {
        Config::Final(_) => Err(ExecError::Final),
        Config::Running(t, s) => term_steps(t, s),
    }
}

fn term_steps(t: &Term, s: &Valuation) -> Result<Vec<Step>, ExecError> {
    match t {
        Term::Node(ch) => node_steps(ch, s),
        Term::Residual(rs) => {
            if rs.is_empty() {
                return Ok(vec![pure(Rule::Nil, Label::Tau, BTreeSet::new(), Config::Final(s.clone()))]);
            }
            let mut out = Vec::new();
            for (i, r) in rs.iter().enumerate() {
                let next = r.update.apply(s)?;
                let mut rest = rs.clone();
                rest.remove(i);
                let target = if rest.is_empty() {
                    Config::Running(Term::Node(Arc::new(ChorAst::Nil)), next)
                } else {
                    Config::Running(Term::Residual(rest), next)
                };
                out.push(pure(
                    Rule::AsynchSendRcv2,
                    Label::ports([&r.port.id]),
                    BTreeSet::from([r.port.owner.clone()]),
                    target,
                ));
            }
            Ok(out)
        }
        Term::Seq(a, b) => seq_steps(a, b, s),
        Term::Par(a, b) => par_steps(a, b, s),
    }
}

fn seq_steps(a: &Term, b: &Term, s: &Valuation) -> Result<Vec<Step>, ExecError> {
    let mut out = Vec::new();
    for st in term_steps(a, s)? {
        let b = b.clone();
        out.push(match st.target {
            Config::Final(_) => wrap(st, Rule::Sequential2, |c| Config::Running(b, final_of(c))),
            Config::Running(..) => wrap(st, Rule::Sequential1, |c| match c {
                Config::Running(t, v) => Config::Running(mk_seq(t, b), v),
                f => f,
            }),
        });
    }
    if let Some(blocked) = a.pending_owners() {
        for st in term_steps(b, s)? {
            if !st.actors.is_disjoint(&blocked) {
                continue;
            }
            let left = a.clone();
            out.push(wrap(st, Rule::SequentialLift, move |c| match c {
                Config::Running(t, v) => Config::Running(mk_seq(left, t), v),
                Config::Final(v) => Config::Running(left, v),
            }));
        }
    }
    Ok(out)
}

fn final_of(c: Config) -> Valuation {
    match c {
        Config::Final(v) | Config::Running(_, v) => v,
    }
}

fn par_steps(a: &Term, b: &Term, s: &Valuation) -> Result<Vec<Step>, ExecError> {
    let mut out = Vec::new();
    for st in term_steps(a, s)? {
        out.push(match st.target {
            Config::Final(_) => {
                let b = b.clone();
                wrap(st, Rule::Parallel3, move |c| Config::Running(b, final_of(c)))
            }
            Config::Running(..) => {
                let b = b.clone();
                wrap(st, Rule::Parallel1, move |c| match c {
                    Config::Running(t, v) => Config::Running(mk_par(t, b), v),
                    f => f,
                })
            }
        });
    }
    for st in term_steps(b, s)? {
        out.push(match st.target {
            Config::Final(_) => {
                let a = a.clone();
                wrap(st, Rule::Parallel4, move |c| Config::Running(a, final_of(c)))
            }
            Config::Running(..) => {
                let a = a.clone();
                wrap(st, Rule::Parallel2, move |c| match c {
                    Config::Running(t, v) => Config::Running(mk_par(a, t), v),
                    f => f,
                })
            }
        });
    }
    Ok(out)
}

fn node_steps(ch: &Arc<ChorAst>, s: &Valuation) -> Result<Vec<Step>, ExecError> {
    match &**ch {
        ChorAst::Nil => Ok(vec![pure(Rule::Nil, Label::Tau, BTreeSet::new(), Config::Final(s.clone()))]),
        ChorAst::Comm { send, rcvs, .. } => {
            if !send.guard.holds(s)? {
                return Ok(vec![]);
            }
            let ports: Vec<_> = rcvs.iter().map(|r| &r.port).collect();
            let moved = transfer(s, &send.port, &ports)?;
            let mut actors: BTreeSet<Name> = rcvs.iter().map(|r| r.port.owner.clone()).collect();
            actors.insert(send.port.owner.clone());
            if send.port.ctype == PortType::SyncSend {
                let mut v = moved;
                for r in rcvs {
                    r.update.apply_in_place(&mut v)?;
                }
                send.update.apply_in_place(&mut v)?;
                let label = Label::ports(std::iter::once(&send.port.id).chain(rcvs.iter().map(|r| &r.port.id)));
                Ok(vec![pure(Rule::SynchSendRcv, label, actors, Config::Final(v))])
            } else {
                let v = send.update.apply(&moved)?;
                Ok(vec![pure(
                    Rule::AsynchSendRcv1,
                    Label::ports([&send.port.id]),
                    actors,
                    Config::Running(Term::Residual(rcvs.clone()), v),
                )])
            }
        }
        ChorAst::Branch { master, conts } => {
            let mut out = Vec::new();
            for (g, body) in conts {
                if g.guard.holds(s)? {
                    let v = g.update.apply(s)?;
                    out.push(pure(
                        Rule::MasterBranching,
                        Label::ports([&g.port.id]),
                        BTreeSet::from([master.clone()]),
                        Config::Running(Term::Node(body.clone()), v),
                    ));
                }
            }
            Ok(out)
        }
        ChorAst::Loop { cond, body } => {
            let actors = BTreeSet::from([cond.port.owner.clone()]);
            if cond.guard.holds(s)? {
                let v = cond.update.apply(s)?;
                let next = ChorAst::Seq(body.clone(), ch.clone());
                Ok(vec![pure(
                    Rule::IterativeTt,
                    Label::ports([&cond.port.id]),
                    actors,
                    Config::Running(Term::Node(Arc::new(next)), v),
                )])
            } else {
                Ok(vec![pure(Rule::IterativeFf, Label::Tau, actors, Config::Final(s.clone()))])
            }
        }
        ChorAst::Seq(a, b) => seq_steps(&Term::Node(a.clone()), &Term::Node(b.clone()), s),
        ChorAst::Par(a, b) => par_steps(&Term::Node(a.clone()), &Term::Node(b.clone()), s),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub max_configs: usize,
    pub max_depth: usize,
}

impl Default for Limits {
    fn default() -> Limits {
        Limits {
            max_configs: 200_000,
            max_depth: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub label: Label,
    pub rules: Vec<Rule>,
    pub to: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Lts {
    pub nodes: Vec<Config>,
    pub edges: Vec<Edge>,
}

impl Lts {
    pub fn rules_used(&self) -> BTreeSet<Rule> {
        self.edges.iter().flat_map(|e| e.rules.iter().copied()).collect()
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph lts {\n  node [shape=circle];\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let shape = match n {
                Config::Final(_) => "doublecircle",
                Config::Running(..) => "circle",
            };
            writeln!(out, "  n{i} [shape={shape}, tooltip=\"{}\"];", n.valuation().to_string().replace('"', "'")).unwrap();
        }
        for e in &self.edges {
            writeln!(out, "  n{} -> n{} [label=\"{}\"];", e.from, e.to, e.label).unwrap();
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Exploration {
    pub finals: BTreeSet<Valuation>,
    pub deadlocks: Vec<Config>,
    pub graph: Lts,
    pub truncated: bool,
}

/// Breadth-first closure of `chor_steps` from `(ch, sigma0)`.
pub fn explore(ch: &ChorAst, sigma0: &Valuation, limits: Limits) -> Result<Exploration, ExecError> {
    let start = Config::start(ch, sigma0.clone());
    let mut index: HashMap<Config, usize> = HashMap::new();
    let mut graph = Lts::default();
    let mut depth = vec![0usize];
    index.insert(start.clone(), 0);
    graph.nodes.push(start);
    let mut queue = VecDeque::from([0usize]);
    let (mut finals, mut deadlocks, mut truncated) = (BTreeSet::new(), Vec::new(), false);
    while let Some(i) = queue.pop_front() {
        let c = graph.nodes[i].clone();
        if let Config::Final(v) = &c {
            finals.insert(v.clone());
            continue;
        }
        if depth[i] >= limits.max_depth {
            truncated = true;
            continue;
        }
        let steps = chor_steps(&c)?;
        if steps.is_empty() {
            deadlocks.push(c);
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
            graph.edges.push(Edge {
                from: i,
                label: st.label,
                rules: st.rules,
                to: j,
            });
        }
    }
    Ok(Exploration {
        finals,
        deadlocks,
        graph,
        truncated,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub labels: Vec<Label>,
    pub terminal: Config,
    pub truncated: bool,
}

/// One run resolving every choice with a generator seeded by `seed`.
pub fn random_trace(ch: &ChorAst, sigma0: &Valuation, seed: u64, max_steps: usize) -> Result<Trace, ExecError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Config::start(ch, sigma0.clone());
    let mut labels = Vec::new();
    while let Config::Running(..) = c {
        if labels.len() >= max_steps {
            return Ok(Trace {
                labels,
                terminal: c,
                truncated: true,
            });
        }
        let mut steps = chor_steps(&c)?;
        if steps.is_empty() {
            break;
        }
        let k = rng.random_range(0..steps.len());
        let st = steps.swap_remove(k);
        labels.push(st.label);
        c = st.target;
    }
    Ok(Trace {
        labels,
        terminal: c,
        truncated: false,
    })
}
