//! One test per reduction rule. Each expected successor set is written out
//! by hand from the rule's premises and compared against the interpreter.

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use chorc_core::cbs::{from_text, sys_explore, sys_steps, CompositeSystem, SysLabel, SysRule, SysState};
use chorc_core::exec::{chor_steps, explore, Config, Label, Limits, Rule, Term};
use chorc_core::lang::{ChorAst, Receive};
use chorc_core::model::{name, Valuation, Value, VarId};
use chorc_core::{parse, Program};

const DECL: &str = "
comp A { var x: int = 1; var y: int = 0;
         port s: ss of int binds x; port a: as of int binds x;
         port c: ss of int binds x; port d: ss of int binds x; }
comp B { var u: int = 0; port r: r of int binds u; port s: ss of int binds u; }
comp C { var w: int = 0; port r: r of int binds w; }
";

fn prog(chor: &str) -> Program {
    parse(&format!("{DECL}\nchoreography main = {chor}")).unwrap()
}

fn v(p: &Program, sets: &[(&str, &str, i64)]) -> Valuation {
    let mut s = p.decl.initial_valuation();
    for (o, n, i) in sets {
        s.set(VarId::new(o, n), Value::Int(*i));
    }
    s
}

fn ports(ids: &[&str]) -> Label {
    Label::Ports(ids.iter().map(|s| name(s)).collect())
}

type Succ = (Vec<Rule>, Label, Config);

fn actual(c: &Config) -> HashSet<Succ> {
    chor_steps(c).unwrap().into_iter().map(|s| (s.rules, s.label, s.target)).collect()
}

fn start(p: &Program) -> Config {
    Config::start(&p.chor, p.decl.initial_valuation())
}

fn node(ch: &Arc<ChorAst>) -> Term {
    Term::Node(ch.clone())
}

fn parts(ch: &ChorAst) -> (Arc<ChorAst>, Arc<ChorAst>) {
    match ch {
        ChorAst::Seq(a, b) | ChorAst::Par(a, b) => (a.clone(), b.clone()),
        other => panic!("not binary: {other:?}"),
    }
}

fn rcvs(ch: &ChorAst) -> Vec<Receive> {
    match ch {
        ChorAst::Comm { rcvs, .. } => rcvs.clone(),
        other => panic!("not a comm: {other:?}"),
    }
}

#[test]
fn nil_terminates_without_change() {
    let p = prog("nil");
    let want = HashSet::from([(vec![Rule::Nil], Label::Tau, Config::Final(p.decl.initial_valuation()))]);
    assert_eq!(actual(&start(&p)), want);
}

#[test]
fn synch_sendrcv_binds_then_runs_receiver_and_sender_updates() {
    let p = prog("A.s[x > 0, x := x + 5] -> { B.r[u := u + 1] }");
    // u := x (=1), then u := u + 1, then x := x + 5.
    let want = HashSet::from([(
        vec![Rule::SynchSendRcv],
        ports(&["A.s", "B.r"]),
        Config::Final(v(&p, &[("B", "u", 2), ("A", "x", 6)])),
    )]);
    assert_eq!(actual(&start(&p)), want);
    assert!(actual(&start(&prog("A.s[x > 1, skip] -> { B.r }"))).is_empty());
}

#[test]
fn asynch_sendrcv_1_binds_all_receivers_and_leaves_residuals() {
    let p = prog("A.a[true, x := x + 1] -> { B.r, C.r[w := w + 5] }");
    let want = HashSet::from([(
        vec![Rule::AsynchSendRcv1],
        ports(&["A.a"]),
        Config::Running(Term::Residual(rcvs(&p.chor)), v(&p, &[("B", "u", 1), ("C", "w", 1), ("A", "x", 2)])),
    )]);
    assert_eq!(actual(&start(&p)), want);
}

#[test]
fn asynch_sendrcv_2_consumes_one_residual_at_a_time() {
    let p = prog("A.a -> { B.r[u := u + 3], C.r[w := w + 5] }");
    let rs = rcvs(&p.chor);
    let sigma = v(&p, &[("B", "u", 1), ("C", "w", 1)]);
    let c = Config::Running(Term::Residual(rs.clone()), sigma);
    let want = HashSet::from([
        (
            vec![Rule::AsynchSendRcv2],
            ports(&["B.r"]),
            Config::Running(Term::Residual(vec![rs[1].clone()]), v(&p, &[("B", "u", 4), ("C", "w", 1)])),
        ),
        (
            vec![Rule::AsynchSendRcv2],
            ports(&["C.r"]),
            Config::Running(Term::Residual(vec![rs[0].clone()]), v(&p, &[("B", "u", 1), ("C", "w", 6)])),
        ),
    ]);
    assert_eq!(actual(&c), want);

    let last = Config::Running(Term::Residual(vec![rs[0].clone()]), v(&p, &[("B", "u", 1)]));
    let want = HashSet::from([(
        vec![Rule::AsynchSendRcv2],
        ports(&["B.r"]),
        Config::Running(Term::Node(Arc::new(ChorAst::Nil)), v(&p, &[("B", "u", 4)])),
    )]);
    assert_eq!(actual(&last), want);
}

#[test]
fn master_branching_offers_every_enabled_guard() {
    let p = prog("choice A { A.s[x > 0, y := 7] => B.s -> { C.r } | A.c[x > 5, skip] => nil | A.d[true, skip] => nil }");
    let ChorAst::Branch { conts, .. } = &p.chor else { panic!() };
    let want = HashSet::from([
        (vec![Rule::MasterBranching], ports(&["A.s"]), Config::Running(node(&conts[0].1), v(&p, &[("A", "y", 7)]))),
        (vec![Rule::MasterBranching], ports(&["A.d"]), Config::Running(node(&conts[2].1), p.decl.initial_valuation())),
    ]);
    assert_eq!(actual(&start(&p)), want);
}

#[test]
fn iterative_tt_unfolds_body_before_loop() {
    let p = prog("while (A.s[x < 3, x := x + 1]) { B.s -> { C.r } }");
    let ChorAst::Loop { body, .. } = &p.chor else { panic!() };
    let unfolded = ChorAst::Seq(body.clone(), Arc::new(p.chor.clone()));
    let want = HashSet::from([(
        vec![Rule::IterativeTt],
        ports(&["A.s"]),
        Config::Running(Term::Node(Arc::new(unfolded)), v(&p, &[("A", "x", 2)])),
    )]);
    assert_eq!(actual(&start(&p)), want);
}

#[test]
fn iterative_ff_exits_silently() {
    let p = prog("while (A.s[x > 5, x := x + 1]) { B.s -> { C.r } }");
    let want = HashSet::from([(vec![Rule::IterativeFf], Label::Tau, Config::Final(p.decl.initial_valuation()))]);
    assert_eq!(actual(&start(&p)), want);
}

#[test]
fn sequential_1_keeps_running_left_operand() {
    let p = prog("A.a -> { B.r } ; B.s -> { C.r }");
    let (l, r) = parts(&p.chor);
    let want = HashSet::from([(
        vec![Rule::AsynchSendRcv1, Rule::Sequential1],
        ports(&["A.a"]),
        Config::Running(
            Term::Seq(Arc::new(Term::Residual(rcvs(&l))), Arc::new(node(&r))),
            v(&p, &[("B", "u", 1)]),
        ),
    )]);
    assert_eq!(actual(&start(&p)), want);
}

#[test]
fn sequential_2_hands_over_to_right_operand() {
    let p = prog("A.s -> { B.r } ; B.s -> { C.r }");
    let (_, r) = parts(&p.chor);
    let want = HashSet::from([(
        vec![Rule::SynchSendRcv, Rule::Sequential2],
        ports(&["A.s", "B.r"]),
        Config::Running(node(&r), v(&p, &[("B", "u", 1)])),
    )]);
    assert_eq!(actual(&start(&p)), want);
}

#[test]
fn sequential_lift_runs_right_operand_past_foreign_residuals() {
    let p = prog("A.a -> { B.r } ; A.s -> { C.r }");
    let (l, r) = parts(&p.chor);
    let left = Term::Residual(rcvs(&l));
    let sigma = v(&p, &[("B", "u", 1)]);
    let c = Config::Running(Term::Seq(Arc::new(left.clone()), Arc::new(node(&r))), sigma.clone());
    let drained = ChorAst::Seq(Arc::new(ChorAst::Nil), r.clone());
    let want = HashSet::from([
        (
            vec![Rule::AsynchSendRcv2, Rule::Sequential1],
            ports(&["B.r"]),
            Config::Running(Term::Node(Arc::new(drained)), sigma.clone()),
        ),
        (
            vec![Rule::SynchSendRcv, Rule::SequentialLift],
            ports(&["A.s", "C.r"]),
            Config::Running(left, sigma.clone().with(VarId::new("C", "w"), Value::Int(1))),
        ),
    ]);
    assert_eq!(actual(&c), want);

    // B still owes a receive, so a step involving B must wait.
    let p = prog("A.a -> { B.r } ; B.s -> { C.r }");
    let (l, r) = parts(&p.chor);
    let c = Config::Running(Term::Seq(Arc::new(Term::Residual(rcvs(&l))), Arc::new(node(&r))), sigma);
    assert!(actual(&c).iter().all(|(rules, ..)| !rules.contains(&Rule::SequentialLift)));
}

/// `A.a -> {B.r} || A.s -> {C.r}`: the left step stays running, the right
/// one finishes.
fn par_async_left() -> (Program, HashSet<Succ>) {
    let p = prog("A.a -> { B.r } || A.s -> { C.r }");
    let (l, r) = parts(&p.chor);
    let want = HashSet::from([
        (
            vec![Rule::AsynchSendRcv1, Rule::Parallel1],
            ports(&["A.a"]),
            Config::Running(Term::Par(Arc::new(Term::Residual(rcvs(&l))), Arc::new(node(&r))), v(&p, &[("B", "u", 1)])),
        ),
        (
            vec![Rule::SynchSendRcv, Rule::Parallel4],
            ports(&["A.s", "C.r"]),
            Config::Running(node(&l), v(&p, &[("C", "w", 1)])),
        ),
    ]);
    (p, want)
}

/// Mirror image: the left step finishes, the right one stays running.
fn par_async_right() -> (Program, HashSet<Succ>) {
    let p = prog("A.s -> { C.r } || A.a -> { B.r }");
    let (l, r) = parts(&p.chor);
    let want = HashSet::from([
        (
            vec![Rule::SynchSendRcv, Rule::Parallel3],
            ports(&["A.s", "C.r"]),
            Config::Running(node(&r), v(&p, &[("C", "w", 1)])),
        ),
        (
            vec![Rule::AsynchSendRcv1, Rule::Parallel2],
            ports(&["A.a"]),
            Config::Running(Term::Par(Arc::new(node(&l)), Arc::new(Term::Residual(rcvs(&r)))), v(&p, &[("B", "u", 1)])),
        ),
    ]);
    (p, want)
}

#[test]
fn parallel_1_left_step_keeps_composition() {
    let (p, want) = par_async_left();
    let got = actual(&start(&p));
    assert_eq!(got, want);
    assert!(got.iter().any(|(r, ..)| r.last() == Some(&Rule::Parallel1)));
}

#[test]
fn parallel_2_right_step_keeps_composition() {
    let (p, want) = par_async_right();
    let got = actual(&start(&p));
    assert_eq!(got, want);
    assert!(got.iter().any(|(r, ..)| r.last() == Some(&Rule::Parallel2)));
}

#[test]
fn parallel_3_finished_left_leaves_right() {
    let (p, want) = par_async_right();
    let got = actual(&start(&p));
    assert_eq!(got, want);
    assert!(got.iter().any(|(r, ..)| r.last() == Some(&Rule::Parallel3)));
}

#[test]
fn parallel_4_finished_right_leaves_left() {
    let (p, want) = par_async_left();
    let got = actual(&start(&p));
    assert_eq!(got, want);
    assert!(got.iter().any(|(r, ..)| r.last() == Some(&Rule::Parallel4)));
}

const SYS: &str = "
component A
  var x : int = 4
  port A.s : ss of int binds x
  port A.a : as of int binds x
  port A.e : in of int binds x
  location l0 init
  location l1
  location l2
  location l3 end
  trans l0 -> l1 on A.s when A.x > 0 do A.x := A.x + 1
  trans l1 -> l2 on A.a when true do skip
  trans l2 -> l3 on A.e when true do skip
end
component B
  var u : int = 0
  var k : int = 0
  port B.r : r of int binds u
  location m0 init
  location m1
  location m2 end
  trans m0 -> m1 on B.r when true do B.k := 1
  trans m0 -> m1 on B.r when B.u == 0 do B.k := 2
  trans m1 -> m2 on B.r when true do skip
end
component C
  var w : int = 0
  port C.r : r of int binds w
  location n0 init
  location n1 end
  trans n0 -> n1 on C.r when true do C.w := C.w * 10
end
interaction A.s -> B.r
interaction A.a -> C.r
";

fn system() -> CompositeSystem {
    from_text(SYS).unwrap()
}

fn state(sys: &CompositeSystem, locs: [usize; 3], vals: &[(&str, &str, i64)], bufs: &[(&str, &[i64])]) -> SysState {
    let mut s = SysState::initial(sys);
    s.locs = locs.to_vec();
    for (o, n, i) in vals {
        s.vals.set(VarId::new(o, n), Value::Int(*i));
    }
    for (p, items) in bufs {
        s.buffers.insert(name(p), items.iter().map(|i| Value::Int(*i)).collect());
    }
    s
}

fn sys_actual(sys: &CompositeSystem, s: &SysState) -> HashSet<(SysRule, SysLabel, SysState)> {
    sys_steps(sys, s).unwrap().into_iter().map(|st| (st.rule, st.label, st.target)).collect()
}

#[test]
fn synch_send_moves_sender_and_every_receiver_choice() {
    let sys = system();
    let s0 = SysState::initial(&sys);
    // Sender guard holds on the pre-state; u := 4 is bound before receiver
    // guards would matter, but guards are checked on the pre-state (u = 0),
    // so both receive transitions are enabled.
    let want = HashSet::from([
        (
            SysRule::SynchSend,
            SysLabel::Interaction(0),
            state(&sys, [1, 1, 0], &[("A", "x", 5), ("B", "u", 4), ("B", "k", 1)], &[]),
        ),
        (
            SysRule::SynchSend,
            SysLabel::Interaction(0),
            state(&sys, [1, 1, 0], &[("A", "x", 5), ("B", "u", 4), ("B", "k", 2)], &[]),
        ),
    ]);
    assert_eq!(sys_actual(&sys, &s0), want);

    // A pending value on a receive port blocks the rendezvous.
    let blocked = state(&sys, [0, 0, 0], &[], &[("B.r", &[9])]);
    assert!(sys_actual(&sys, &blocked).iter().all(|(r, ..)| *r != SysRule::SynchSend));
}

#[test]
fn asynch_send_appends_to_each_receiver_buffer() {
    let sys = system();
    // C sits at its end location so only the send is enabled.
    let s = state(&sys, [1, 2, 1], &[("A", "x", 7)], &[("C.r", &[3])]);
    let want = HashSet::from([(
        SysRule::AsynchSend,
        SysLabel::Interaction(1),
        state(&sys, [2, 2, 1], &[("A", "x", 7)], &[("C.r", &[3, 7])]),
    )]);
    assert_eq!(sys_actual(&sys, &s), want);
}

#[test]
fn recv_pops_the_oldest_value() {
    let sys = system();
    let s = state(&sys, [3, 2, 0], &[("C", "w", 1)], &[("C.r", &[3, 7])]);
    let want = HashSet::from([(
        SysRule::Recv,
        SysLabel::Tau { component: name("C"), port: name("C.r") },
        state(&sys, [3, 2, 1], &[("C", "w", 30)], &[("C.r", &[7])]),
    )]);
    assert_eq!(sys_actual(&sys, &s), want);
}

#[test]
fn internal_binds_the_neutral_value() {
    let sys = system();
    let s = state(&sys, [2, 2, 1], &[], &[]);
    let mut next = state(&sys, [3, 2, 1], &[], &[]);
    next.vals.set(VarId::new("A", "x"), Value::Neutral);
    let want = HashSet::from([(SysRule::Internal, SysLabel::Tau { component: name("A"), port: name("A.e") }, next)]);
    assert_eq!(sys_actual(&sys, &s), want);
}

#[test]
fn every_rule_tag_is_exercised() {
    let mut chor_rules = BTreeSet::new();
    let fixtures = [
        "nil",
        "A.s -> { B.r }",
        "A.a -> { B.r, C.r }",
        "choice A { A.s[x > 0, skip] => nil | A.c[x <= 0, skip] => nil }",
        "while (A.s[x < 3, x := x + 1]) { B.s -> { C.r } }",
        "A.a -> { B.r } ; B.s -> { C.r }",
        "A.a -> { B.r } ; A.s -> { C.r }",
        "A.a -> { B.r } || A.s -> { C.r }",
        "A.s -> { C.r } || A.a -> { B.r }",
    ];
    for f in fixtures {
        let p = prog(f);
        let e = explore(&p.chor, &p.decl.initial_valuation(), Limits::default()).unwrap();
        chor_rules.extend(e.graph.rules_used());
    }
    assert_eq!(chor_rules, Rule::ALL.into_iter().collect::<BTreeSet<_>>());

    let sys = system();
    let e = sys_explore(&sys, &SysState::initial(&sys), Limits::default()).unwrap();
    assert_eq!(e.graph.rules_used(), SysRule::ALL.into_iter().collect::<BTreeSet<_>>());
}
