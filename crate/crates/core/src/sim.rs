//! Execution of a component system as independent units exchanging
//! messages over bounded queues. Each unit only sees its own location and
//! variables; the queues are the sole shared state.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::{Condvar, Mutex};

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::cbs::{CompositeSystem, Transition};
use crate::model::{EvalError, Name, Port, PortType, Valuation, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("in component {component}: {source}")]
    Eval {
        component: Name,
        #[source]
        source: EvalError,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Completed,
    Deadlock,
    StepLimit,
}

/// One completed transition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Event {
    pub step: usize,
    pub component: Name,
    pub port: Name,
    pub value: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunResult {
    pub outcome: Outcome,
    pub locs: Vec<usize>,
    pub vals: Valuation,
    pub trace: Vec<Event>,
    /// Number of execution units, one per component.
    pub units: usize,
}

impl RunResult {
    /// One JSON object per line.
    pub fn trace_jsonl(&self) -> String {
        self.trace
            .iter()
            .map(|e| serde_json::to_string(e).expect("event serializes") + "\n")
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimOptions {
    pub seed: u64,
    pub max_steps: usize,
    /// Capacity of every asynchronous queue.
    pub queue_capacity: usize,
    /// Run each unit on its own thread. Traces are then not reproducible.
    pub threads: bool,
}

impl Default for SimOptions {
    fn default() -> SimOptions {
        SimOptions {
            seed: 0,
            max_steps: 100_000,
            queue_capacity: 8,
            threads: false,
        }
    }
}

pub fn value_json(v: &Value) -> serde_json::Value {
    match v {
        Value::Int(i) => serde_json::Value::from(*i),
        Value::Bool(b) => serde_json::Value::from(*b),
        Value::Str(s) => serde_json::Value::from(&**s),
        Value::Neutral => serde_json::Value::Null,
    }
}

/// Read-only wiring shared by all units.
struct Wiring<'a> {
    sys: &'a CompositeSystem,
    ports: HashMap<Name, Port>,
    /// Receivers of each send port and whether the interaction is synchronous.
    sends: HashMap<Name, (Vec<Name>, bool)>,
    /// Whether each receive port is fed by a synchronous sender.
    sync_recv: HashMap<Name, bool>,
    capacity: usize,
}

impl<'a> Wiring<'a> {
    fn new(sys: &'a CompositeSystem, capacity: usize) -> Wiring<'a> {
        let ports: HashMap<Name, Port> = sys.components.iter().flat_map(|c| c.ports.iter().map(|p| (p.id.clone(), p.clone()))).collect();
        let mut sends = HashMap::new();
        let mut sync_recv = HashMap::new();
        for a in &sys.gamma {
            let sync = sys.is_sync(a);
            sends.entry(a.send.clone()).or_insert_with(|| (a.receivers.clone(), sync));
            for r in &a.receivers {
                sync_recv.entry(r.clone()).or_insert(sync);
            }
        }
        Wiring {
            sys,
            ports,
            sends,
            sync_recv,
            capacity,
        }
    }
}

/// Message queues plus the acknowledgement counters of synchronous ports.
#[derive(Default)]
struct Queues {
    data: BTreeMap<Name, VecDeque<Value>>,
    acks: BTreeMap<Name, usize>,
    trace: Vec<Event>,
    steps: usize,
}

impl Queues {
    fn quiet(&self) -> bool {
        self.data.values().all(|q| q.is_empty()) && self.acks.values().all(|&n| n == 0)
    }
}

enum Phase {
    Ready,
    /// A synchronous send has been delivered; waiting for every receiver.
    AwaitAcks { t: usize, value: Value, pending: Vec<Name> },
}

struct Unit {
    idx: usize,
    loc: usize,
    vals: Valuation,
    rng: ChaCha8Rng,
    phase: Phase,
}

enum Progress {
    Moved,
    Blocked,
}

impl Unit {
    fn new(sys: &CompositeSystem, idx: usize, seed: u64) -> Unit {
        let c = &sys.components[idx];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(idx as u64);
        Unit {
            idx,
            loc: c.init,
            vals: c.vars.iter().map(|(v, x)| (v.id.clone(), x.clone())).collect(),
            rng,
            phase: Phase::Ready,
        }
    }

    fn err(&self, w: &Wiring, source: EvalError) -> SimError {
        SimError::Eval {
            component: w.sys.components[self.idx].id.clone(),
            source,
        }
    }

    fn at_end(&self, w: &Wiring) -> bool {
        matches!(self.phase, Phase::Ready) && w.sys.components[self.idx].end == Some(self.loc)
    }

    fn complete(&mut self, w: &Wiring, q: &mut Queues, t: &Transition, port: &Port, d: Value) -> Result<(), SimError> {
        self.vals.set(port.var.clone(), d.clone());
        t.update.apply_in_place(&mut self.vals).map_err(|e| self.err(w, e))?;
        self.loc = t.dst;
        q.trace.push(Event {
            step: q.steps,
            component: w.sys.components[self.idx].id.clone(),
            port: port.id.clone(),
            value: value_json(&d),
        });
        q.steps += 1;
        Ok(())
    }

    /// Take at most one action.
    fn step(&mut self, w: &Wiring, q: &mut Queues) -> Result<Progress, SimError> {
        let comp = &w.sys.components[self.idx];
        if let Phase::AwaitAcks { t, value, pending } = &mut self.phase {
            pending.retain(|r| match q.acks.get_mut(r) {
                Some(n) if *n > 0 => {
                    *n -= 1;
                    false
                }
                _ => true,
            });
            if !pending.is_empty() {
                return Ok(Progress::Blocked);
            }
            let (t, value) = (*t, value.clone());
            self.phase = Phase::Ready;
            let tr = &comp.transitions[t];
            self.complete(w, q, tr, &w.ports[&tr.port], value)?;
            return Ok(Progress::Moved);
        }
        let mut options = Vec::new();
        for (i, t) in comp.transitions.iter().enumerate().filter(|(_, t)| t.src == self.loc) {
            let Some(p) = w.ports.get(&t.port) else { continue };
            if !t.guard.holds(&self.vals).map_err(|e| self.err(w, e))? {
                continue;
            }
            let ready = match p.ctype {
                PortType::Internal => true,
                PortType::Recv => q.data.get(&p.id).is_some_and(|b| !b.is_empty()),
                PortType::SyncSend | PortType::AsyncSend => match w.sends.get(&p.id) {
                    None => false,
                    Some((rs, true)) => rs.iter().all(|r| q.data.get(r).is_none_or(|b| b.is_empty())),
                    Some((rs, false)) => rs.iter().all(|r| q.data.get(r).is_none_or(|b| b.len() < w.capacity)),
                },
            };
            if ready {
                options.push(i);
            }
        }
        let Some(&i) = options.choose(&mut self.rng) else {
            return Ok(Progress::Blocked);
        };
        let t = &comp.transitions[i];
        let p = &w.ports[&t.port];
        match p.ctype {
            PortType::Internal => self.complete(w, q, t, p, Value::Neutral)?,
            PortType::Recv => {
                let d = q.data.get_mut(&p.id).and_then(|b| b.pop_front()).expect("ready queue");
                if w.sync_recv.get(&p.id).copied().unwrap_or(false) {
                    *q.acks.entry(p.id.clone()).or_default() += 1;
                }
                self.complete(w, q, t, p, d)?;
            }
            PortType::SyncSend | PortType::AsyncSend => {
                let d = self.vals.get(&p.var).cloned().ok_or_else(|| self.err(w, EvalError::Unbound(p.var.clone())))?;
                let (rs, sync) = &w.sends[&p.id];
                for r in rs {
                    q.data.entry(r.clone()).or_default().push_back(d.clone());
                }
                if *sync {
                    self.phase = Phase::AwaitAcks {
                        t: i,
                        value: d,
                        pending: rs.clone(),
                    };
                } else {
                    self.complete(w, q, t, p, d)?;
                }
            }
        }
        Ok(Progress::Moved)
    }
}

fn result(units: Vec<Unit>, q: Queues, outcome: Outcome) -> RunResult {
    let mut vals = Valuation::new();
    let mut locs = Vec::new();
    let n = units.len();
    for u in units {
        locs.push(u.loc);
        vals = vals.merge(&u.vals);
    }
    RunResult {
        outcome,
        locs,
        vals,
        trace: q.trace,
        units: n,
    }
}

fn finished(units: &[Unit], w: &Wiring, q: &Queues) -> bool {
    units.iter().all(|u| u.at_end(w)) && q.quiet()
}

/// Round-robin stepping: each unit gets one action per round until every
/// unit is at its end location or no unit can move.
pub fn run(sys: &CompositeSystem, opts: SimOptions) -> Result<RunResult, SimError> {
    if opts.threads {
        return run_threads(sys, opts);
    }
    let w = Wiring::new(sys, opts.queue_capacity.max(1));
    let mut units: Vec<Unit> = (0..sys.components.len()).map(|i| Unit::new(sys, i, opts.seed)).collect();
    let mut q = Queues::default();
    loop {
        if finished(&units, &w, &q) {
            return Ok(result(units, q, Outcome::Completed));
        }
        let mut moved = false;
        for u in &mut units {
            if q.steps >= opts.max_steps {
                return Ok(result(units, q, Outcome::StepLimit));
            }
            if let Progress::Moved = u.step(&w, &mut q)? {
                moved = true;
            }
        }
        if !moved {
            let outcome = if finished(&units, &w, &q) { Outcome::Completed } else { Outcome::Deadlock };
            return Ok(result(units, q, outcome));
        }
    }
}

struct Shared {
    q: Queues,
    /// Bumped on every action so blocked units know to retry.
    version: u64,
    /// Units that found nothing to do since the last action.
    idle: usize,
    stop: Option<Outcome>,
    error: Option<SimError>,
}

/// One thread per unit. Quiescence (every unit idle at the same version)
/// ends the run.
fn run_threads(sys: &CompositeSystem, opts: SimOptions) -> Result<RunResult, SimError> {
    let w = Wiring::new(sys, opts.queue_capacity.max(1));
    let n = sys.components.len();
    let shared = Mutex::new(Shared {
        q: Queues::default(),
        version: 0,
        idle: 0,
        stop: None,
        error: None,
    });
    let cv = Condvar::new();
    let units: Vec<Unit> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..n)
            .map(|i| {
                let (w, shared, cv) = (&w, &shared, &cv);
                s.spawn(move || {
                    let mut u = Unit::new(sys, i, opts.seed);
                    let mut g = shared.lock().expect("queue lock");
                    loop {
                        if g.stop.is_some() {
                            return u;
                        }
                        if g.q.steps >= opts.max_steps {
                            g.stop = Some(Outcome::StepLimit);
                            cv.notify_all();
                            return u;
                        }
                        match u.step(w, &mut g.q) {
                            Err(e) => {
                                g.error = Some(e);
                                g.stop = Some(Outcome::Deadlock);
                                cv.notify_all();
                                return u;
                            }
                            Ok(Progress::Moved) => {
                                g.version += 1;
                                g.idle = 0;
                                cv.notify_all();
                            }
                            Ok(Progress::Blocked) => {
                                let seen = g.version;
                                g.idle += 1;
                                if g.idle == n {
                                    g.stop = Some(Outcome::Deadlock);
                                    cv.notify_all();
                                    return u;
                                }
                                while g.version == seen && g.stop.is_none() {
                                    g = cv.wait(g).expect("queue lock");
                                }
                            }
                        }
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("unit thread")).collect()
    });
    let sh = shared.into_inner().expect("queue lock");
    if let Some(e) = sh.error {
        return Err(e);
    }
    let outcome = match sh.stop {
        Some(Outcome::StepLimit) => Outcome::StepLimit,
        _ if finished(&units, &w, &sh.q) => Outcome::Completed,
        _ => Outcome::Deadlock,
    };
    Ok(result(units, sh.q, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cbs::{sys_explore, SysState};
    use crate::exec::Limits;
    use crate::lang::parse;
    use crate::synth::synthesize;

    fn sys(src: &str) -> CompositeSystem {
        let p = parse(src).unwrap();
        synthesize(&p.decl, &p.chor).unwrap()
    }

    const PAIR: &str = "comp A { var i: int; var x: int; port c: ss of int binds i; port s: as of int binds x; port r: r of int binds x; }
        comp B { var y: int; var sum: int; port r: r of int binds y; port t: ss of int binds sum; }
        choreography main = while (A.c[i < 3, i := i + 1]) { A.s[true, x := x + 1] -> { B.r[sum := sum + y] } } ; B.t -> { A.r }";

    #[test]
    fn skeleton_completes_with_empty_trace() {
        let s = sys("comp A { var x: int; port s: ss of int binds x; }\nchoreography main = nil");
        let r = run(&s, SimOptions::default()).unwrap();
        assert_eq!(r.outcome, Outcome::Completed);
        assert!(r.trace.is_empty());
        assert_eq!(r.units, 1);
    }

    #[test]
    fn finals_are_reachable_terminals() {
        let s = sys(PAIR);
        let ex = sys_explore(&s, &SysState::initial(&s), Limits::default()).unwrap();
        for seed in 0..5 {
            let r = run(&s, SimOptions { seed, ..Default::default() }).unwrap();
            assert_eq!(r.outcome, Outcome::Completed);
            assert!(ex.terminals.iter().any(|t| t.locs == r.locs && t.vals == r.vals));
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let s = sys(PAIR);
        let a = run(&s, SimOptions { seed: 7, ..Default::default() }).unwrap();
        let b = run(&s, SimOptions { seed: 7, ..Default::default() }).unwrap();
        assert_eq!(a.trace_jsonl(), b.trace_jsonl());
        assert!(a.trace_jsonl().lines().all(|l| l.starts_with("{\"step\":")));
    }

    #[test]
    fn threads_reach_the_same_final_state() {
        let s = sys(PAIR);
        let a = run(&s, SimOptions::default()).unwrap();
        let b = run(&s, SimOptions { threads: true, ..Default::default() }).unwrap();
        assert_eq!(b.outcome, Outcome::Completed);
        assert_eq!(a.vals, b.vals);
    }

    #[test]
    fn missing_interaction_deadlocks() {
        let mut s = sys(PAIR);
        s.gamma.clear();
        let r = run(&s, SimOptions::default()).unwrap();
        assert_eq!(r.outcome, Outcome::Deadlock);
    }

    #[test]
    fn step_limit_is_reported() {
        let s = sys(PAIR);
        let r = run(&s, SimOptions { max_steps: 3, ..Default::default() }).unwrap();
        assert_eq!(r.outcome, Outcome::StepLimit);
        assert_eq!(r.trace.len(), 3);
    }
}
