//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use chorc_core::cbs::{sys_explore, CompositeSystem, SysRule, SysState};
use chorc_core::exec::{explore, Limits, Rule};
use chorc_core::model::{DataType, PortType};
use chorc_core::promela::{channel_name, validate};
use chorc_core::sim::{self, Outcome, SimOptions};
use chorc_core::synth::{synthesize, synthesize_traced};
use chorc_core::verify::{equiv_check, invariant_suite, mutate, Mutation, Verdict};
use chorc_core::{parse, Program};

/// Interactions produced for the buying system. The derivation is in the
/// README: 11 user communications, 4 branch notifications, one loop
/// continue, one loop break and 3 sequencing syncs.
const BUYING_INTERACTIONS: usize = 20;

/// Per-arm channel operations of the reference Seller listing, in order.
const SELLER_LISTING: [&str; 15] = [
    "synchRecv",
    "synchRecv",
    "send send recvAck recvAck",
    "send recvAck",
    "if[recv sendAck | recv sendAck]",
    "synchRecv",
    "synchRecv",
    "send send recvAck recvAck",
    "send recvAck",
    "if[recv sendAck | recv sendAck]",
    "synchRecv",
    "synchRecv",
    "synchRecv",
    "",
    "break",
];

type Verdict_ = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict_);

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn corpus_file(name: &str) -> PathBuf {
    root().join("corpus").join(format!("{name}.chor"))
}

fn corpus() -> Vec<(String, Program)> {
    let mut files: Vec<_> = std::fs::read_dir(root().join("corpus"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "chor"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            (name, parse(&std::fs::read_to_string(&p).unwrap()).unwrap())
        })
        .collect()
}

fn chorc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chorc")).args(args).output().expect("chorc runs")
}

fn stdout(o: &Output) -> Result<String, String> {
    if o.status.success() {
        Ok(String::from_utf8_lossy(&o.stdout).into_owned())
    } else {
        Err(format!("exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)))
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    if took <= limit {
        Ok(())
    } else {
        Err(format!("took {took:?}, limit {limit:?}"))
    }
}

fn criterion_1() -> Verdict_ {
    let t = Instant::now();
    let text = stdout(&chorc(&["synth", corpus_file("buying").to_str().unwrap()]))?;
    within(t, Duration::from_secs(1))?;
    let n = text.lines().filter(|l| l.starts_with("interaction ")).count();
    if n == BUYING_INTERACTIONS {
        Ok(format!("{n} interactions (reference tool reports 27, see README)"))
    } else {
        Err(format!("{n} interactions, expected {BUYING_INTERACTIONS}"))
    }
}

fn criterion_2() -> Verdict_ {
    let t = Instant::now();
    let p = parse(&std::fs::read_to_string(corpus_file("producer_consumer")).unwrap()).unwrap();
    let sys = synthesize(&p.decl, &p.chor).map_err(|e| e.to_string())?;
    within(t, Duration::from_secs(1))?;
    let p1 = sys.component("P1").ok_or("no P1")?;
    if p1.locations.len() != 6 {
        return Err(format!("P1 has {} locations", p1.locations.len()));
    }
    let iface: BTreeSet<&str> = p1
        .ports
        .iter()
        .filter(|p| p.ctype != PortType::Internal)
        .map(|p| p.local().split(['#', '@']).next().unwrap())
        .collect();
    if iface != BTreeSet::from(["ack", "brk", "cond", "cs", "s"]) {
        return Err(format!("P1 ports {iface:?}"));
    }
    let side = |port: &str| port.split_once('.').unwrap().0.ends_with('1');
    for a in &sys.gamma {
        if a.receivers.iter().any(|r| side(r) != side(&a.send)) {
            return Err(format!("{} crosses the pairs", a.send));
        }
    }
    Ok("P1: 6 locations, ports {cond, brk, s, cs, ack}; pairs interaction-disjoint".into())
}

fn criterion_3() -> Verdict_ {
    let t = Instant::now();
    let limits = Limits {
        max_configs: 200_000,
        max_depth: 10_000,
    };
    let all = corpus();
    if all.len() < 13 {
        return Err(format!("only {} corpus entries", all.len()));
    }
    let mut systems = Vec::new();
    for (name, p) in &all {
        let sys = synthesize(&p.decl, &p.chor).map_err(|e| format!("{name}: {e}"))?;
        let r = equiv_check(&p.decl, &p.chor, &sys, limits).map_err(|e| format!("{name}: {e}"))?;
        if r.verdict != Verdict::Equivalent {
            return Err(format!("{name}: {}", r.verdict));
        }
        systems.push(sys);
    }
    let mut flips = Vec::new();
    for m in Mutation::ALL {
        let hit = all.iter().zip(&systems).find(|((_, p), sys)| {
            mutate(sys, m).is_some_and(|bad| {
                equiv_check(&p.decl, &p.chor, &bad, limits).is_ok_and(|r| r.verdict != Verdict::Equivalent)
            })
        });
        match hit {
            Some(((name, _), _)) => flips.push(format!("{}@{name}", m.tag())),
            None => return Err(format!("mutation {} never flips a verdict", m.tag())),
        }
    }
    within(t, Duration::from_secs(60))?;
    Ok(format!("{} entries equivalent; mutations flip: {}", all.len(), flips.join(" ")))
}

fn criterion_4() -> Verdict_ {
    let decl = "comp A { var x: int = 1; port s: ss of int binds x; port a: as of int binds x; port c: ss of int binds x; }
        comp B { var u: int = 0; port r: r of int binds u; port s: ss of int binds u; }
        comp C { var w: int = 0; port r: r of int binds w; }";
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
    let mut chor_rules = BTreeSet::new();
    let mut sys_rules = BTreeSet::new();
    for f in fixtures {
        let p = parse(&format!("{decl}\nchoreography main = {f}")).map_err(|e| e.to_string())?;
        let x = explore(&p.chor, &p.decl.initial_valuation(), Limits::default()).map_err(|e| e.to_string())?;
        chor_rules.extend(x.graph.rules_used());
        let sys = synthesize(&p.decl, &p.chor).map_err(|e| e.to_string())?;
        let y = sys_explore(&sys, &SysState::initial(&sys), Limits::default()).map_err(|e| e.to_string())?;
        sys_rules.extend(y.graph.rules_used());
    }
    let missing: Vec<&str> = Rule::ALL
        .iter()
        .filter(|r| !chor_rules.contains(r))
        .map(|r| r.tag())
        .chain(SysRule::ALL.iter().filter(|r| !sys_rules.contains(r)).map(|r| r.tag()))
        .collect();
    if !missing.is_empty() {
        return Err(format!("rules never fired: {missing:?}"));
    }
    let suite = include_str!("../../core/tests/semantics_rules.rs");
    let tags = Rule::ALL.iter().map(|r| r.tag()).chain(SysRule::ALL.iter().map(|r| r.tag()));
    let undedicated: Vec<&str> = tags
        .filter(|t| !suite.contains(&format!("fn {}_", t.replace('-', "_"))))
        .collect();
    if !undedicated.is_empty() {
        return Err(format!("no dedicated oracle test for {undedicated:?}"));
    }
    Ok(format!(
        "{} choreography rules and {} composite rules fired and have oracle tests",
        Rule::ALL.len(),
        SysRule::ALL.len()
    ))
}

/// Arms of one proctype, each reduced to its sequence of channel macros.
fn arm_ops(model: &str, proctype: &str) -> Result<Vec<String>, String> {
    let start = model.find(&format!("proctype {proctype}()")).ok_or("no Seller proctype")?;
    let body = &model[start..];
    let body = &body[..body.find("\n}").unwrap_or(body.len())];
    let mut arms: Vec<Vec<&str>> = Vec::new();
    for line in body.lines() {
        let trimmed = line.trim_start();
        if trimmed.starts_with(":: (currentLocation ==") {
            arms.push(vec![line]);
        } else if let Some(a) = arms.last_mut() {
            a.push(line);
        }
    }
    let ops = |text: &str| -> Vec<&'static str> {
        text.split(|c: char| !c.is_alphanumeric() && c != '_')
            .filter_map(|w| ["synchRecv", "recvAck", "sendAck", "recv", "send", "break"].into_iter().find(|k| *k == w))
            .collect()
    };
    Ok(arms
        .iter()
        .map(|lines| {
            let alts: Vec<&&str> = lines[1..].iter().filter(|l| l.trim_start().starts_with(":: ")).collect();
            if alts.is_empty() {
                ops(&lines.join("\n")).join(" ")
            } else {
                let alts: Vec<String> = alts.iter().map(|l| ops(l).join(" ")).collect();
                format!("if[{}]", alts.join(" | "))
            }
        })
        .collect())
}

fn seller_model() -> Result<String, String> {
    stdout(&chorc(&["promela", "--paper-ack-encoding", corpus_file("buying").to_str().unwrap()]))
}

fn criterion_5a() -> Verdict_ {
    let t = Instant::now();
    let model = seller_model()?;
    within(t, Duration::from_secs(1))?;
    let arms = arm_ops(&model, "S")?;
    let ends_with_break = arms.last().is_some_and(|a| a == "break");
    if arms.len() == 15 && ends_with_break {
        Ok("Seller: 14 location arms plus the end arm".into())
    } else {
        Err(format!("Seller has {} arms, last `{}`", arms.len(), arms.last().cloned().unwrap_or_default()))
    }
}

fn criterion_5b() -> Verdict_ {
    let arms = arm_ops(&seller_model()?, "S")?;
    let diffs: Vec<String> = arms
        .iter()
        .zip(SELLER_LISTING)
        .enumerate()
        .filter(|(_, (got, want))| got.as_str() != *want)
        .map(|(i, (got, want))| format!("q{}: `{got}` vs `{want}`", i + 1))
        .collect();
    if diffs.is_empty() && arms.len() == SELLER_LISTING.len() {
        Ok("per-arm channel operations match the reference listing".into())
    } else {
        Err(format!("{} arms differ: {}", diffs.len(), diffs.join("; ")))
    }
}

fn type_name(t: DataType) -> &'static str {
    match t {
        DataType::Bool => "bool",
        DataType::Int | DataType::Str => "int",
    }
}

fn expected_channels(sys: &CompositeSystem) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for a in &sys.gamma {
        let sp = sys.port(&a.send).unwrap();
        let cap = if sp.ctype == PortType::SyncSend { "0" } else { "MAX_LEN" };
        for r in &a.receivers {
            out.insert(format!("chan {} = [{cap}] of {{ {} }};", channel_name(r), type_name(sp.dtype)));
        }
    }
    out
}

fn criterion_5c() -> Verdict_ {
    let mut total = 0;
    for (name, p) in corpus() {
        let sys = synthesize(&p.decl, &p.chor).map_err(|e| e.to_string())?;
        let model = stdout(&chorc(&["promela", "--paper-ack-encoding", corpus_file(&name).to_str().unwrap()]))?;
        let got: BTreeSet<String> = model.lines().filter(|l| l.starts_with("chan ")).map(str::to_string).collect();
        let want = expected_channels(&sys);
        let receivers: usize = sys.gamma.iter().map(|a| a.receivers.len()).sum();
        if got != want || got.len() != receivers {
            return Err(format!("{name}: channel declarations differ"));
        }
        total += got.len();
    }
    Ok(format!("{total} channel declarations: [0] for ss, [MAX_LEN] for as"))
}

fn criterion_5d() -> Verdict_ {
    let mut n = 0;
    for (name, _) in corpus() {
        let f = corpus_file(&name);
        for extra in [None, Some("--paper-ack-encoding")] {
            let mut args = vec!["promela", f.to_str().unwrap()];
            args.extend(extra);
            let model = stdout(&chorc(&args))?;
            validate(&model).map_err(|e| format!("{name} {extra:?}: {e}"))?;
            n += 1;
        }
    }
    Ok(format!("{n} emitted models accepted by the validator"))
}

fn criterion_6() -> Verdict_ {
    let t = Instant::now();
    let mut runs = 0;
    for (name, p) in corpus() {
        let sys = synthesize(&p.decl, &p.chor).map_err(|e| e.to_string())?;
        let x = sys_explore(&sys, &SysState::initial(&sys), Limits::default()).map_err(|e| e.to_string())?;
        let terminals: BTreeSet<_> = x.terminals.iter().map(|s| (s.locs.clone(), s.vals.clone())).collect();
        for seed in 0..10 {
            let opts = SimOptions { seed, ..SimOptions::default() };
            let a = sim::run(&sys, opts).map_err(|e| e.to_string())?;
            let b = sim::run(&sys, opts).map_err(|e| e.to_string())?;
            if a.outcome != Outcome::Completed {
                return Err(format!("{name} seed {seed}: {:?}", a.outcome));
            }
            if !terminals.contains(&(a.locs.clone(), a.vals.clone())) {
                return Err(format!("{name} seed {seed}: final state not an explored terminal"));
            }
            if a.trace_jsonl() != b.trace_jsonl() {
                return Err(format!("{name} seed {seed}: traces differ"));
            }
            runs += 1;
        }
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let traces: Vec<PathBuf> = (0..2).map(|i| dir.path().join(format!("t{i}.jsonl"))).collect();
    for tr in &traces {
        stdout(&chorc(&["simulate", "--seed", "5", "--trace", tr.to_str().unwrap(), corpus_file("buying").to_str().unwrap()]))?;
    }
    if std::fs::read(&traces[0]).unwrap() != std::fs::read(&traces[1]).unwrap() {
        return Err("CLI traces differ for the same seed".into());
    }
    within(t, Duration::from_secs(120))?;
    Ok(format!("{runs} runs completed in explored terminals, traces reproducible"))
}

fn defined_symbols(model: &str) -> BTreeSet<String> {
    model
        .lines()
        .filter_map(|l| {
            let w: Vec<&str> = l.split_whitespace().collect();
            match w.as_slice() {
                ["#define", name, ..] => Some(name.split('(').next().unwrap().to_string()),
                ["int", name, ..] => Some(name.trim_end_matches(';').to_string()),
                _ => None,
            }
        })
        .collect()
}

fn criterion_7() -> Verdict_ {
    let golden_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/buying.ltl");
    let golden = std::fs::read_to_string(&golden_path).map_err(|e| e.to_string())?;
    let buying = corpus_file("buying");
    let got = stdout(&chorc(&[
        "ltl",
        "--termination",
        "--livelock",
        "Bk.InfR",
        "--unique",
        "Bk.MS1",
        "--unique",
        "Bk.MS2",
        "--transaction",
        "Bk.MS1,B1.MS",
        "--transaction",
        "Bk.MS2,B2.MS",
        buying.to_str().unwrap(),
    ]))?;
    if got != golden {
        return Err(format!("output differs from golden file:\n{got}"));
    }
    let model = stdout(&chorc(&["promela", "--inline-ltl", golden_path.to_str().unwrap(), buying.to_str().unwrap()]))?;
    validate(&model).map_err(|e| format!("model with inlined formulas: {e}"))?;
    let defined = defined_symbols(&model);
    let keywords = ["X", "U", "V", "W"];
    let mut names = 0;
    for line in golden.lines() {
        let (_, formula) = line.split_once(" : ").ok_or("line without `name : formula`")?;
        for w in formula.split(|c: char| !c.is_alphanumeric() && c != '_') {
            if w.is_empty() || keywords.contains(&w) || w.chars().all(|c| c.is_ascii_digit()) {
                continue;
            }
            if !defined.contains(w) {
                return Err(format!("`{w}` is not defined by the emitted model"));
            }
            names += 1;
        }
    }
    Ok(format!("{} formulas match the golden file; {names} symbol uses all defined", golden.lines().count()))
}

fn criterion_8() -> Verdict_ {
    let mut checks = 0;
    for (name, p) in corpus() {
        let out = synthesize_traced(&p.decl, &p.chor).map_err(|e| format!("{name}: {e}"))?;
        let diags = invariant_suite(&out.system);
        if !diags.is_empty() {
            return Err(format!("{name}: {}", diags[0]));
        }
        checks += out.context_checks;
    }
    Ok(format!("invariant suite clean; {checks} context checks passed during synthesis"))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("1", criterion_1),
        ("2", criterion_2),
        ("3", criterion_3),
        ("4", criterion_4),
        ("5a", criterion_5a),
        ("5b", criterion_5b),
        ("5c", criterion_5c),
        ("5d", criterion_5d),
        ("6", criterion_6),
        ("7", criterion_7),
        ("8", criterion_8),
    ];
    let mut failed = 0;
    for (id, f) in criteria {
        match f() {
            Ok(msg) => println!("criterion {id}: PASS: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("criterion {id}: FAIL: {msg}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
