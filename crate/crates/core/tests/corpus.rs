//! Whole-pipeline checks over the shipped corpus.

mod common;

use std::collections::BTreeSet;

use chorc_core::cbs::{from_text, sys_explore, to_text, SysState};
use chorc_core::exec::Limits;
use chorc_core::sim::{self, Outcome, SimOptions};
use chorc_core::synth::{synthesize, synthesize_traced};
use chorc_core::verify::{equiv_check, invariant_suite, mutate, project, Mutation, Verdict};
use chorc_core::check_well_formed;

use common::corpus;

#[test]
fn corpus_is_large_enough_and_well_formed() {
    let all = corpus();
    assert!(all.len() >= 13, "only {} corpus entries", all.len());
    for (name, p) in &all {
        let diags = check_well_formed(&p.decl, &p.chor);
        assert!(diags.is_empty(), "{name}: {diags:?}");
    }
}

#[test]
fn every_corpus_entry_is_equivalent_to_its_synthesis() {
    for (name, p) in corpus() {
        let sys = synthesize(&p.decl, &p.chor).unwrap();
        let r = equiv_check(&p.decl, &p.chor, &sys, Limits::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Equivalent, "{name}\n{r}");
        assert!(!r.chor_finals.is_empty(), "{name}");
    }
}

#[test]
fn each_mutation_breaks_some_corpus_entry() {
    let all = corpus();
    for m in Mutation::ALL {
        let flipped: Vec<&str> = all
            .iter()
            .filter(|(_, p)| {
                let sys = synthesize(&p.decl, &p.chor).unwrap();
                let Some(bad) = mutate(&sys, m) else { return false };
                let r = equiv_check(&p.decl, &p.chor, &bad, Limits::default()).unwrap();
                r.verdict != Verdict::Equivalent
            })
            .map(|(n, _)| n.as_str())
            .collect();
        assert!(!flipped.is_empty(), "{} never changes a verdict", m.tag());
    }
}

#[test]
fn invariant_suite_is_clean_and_context_was_checked_after_each_step() {
    for (name, p) in corpus() {
        let out = synthesize_traced(&p.decl, &p.chor).unwrap();
        let diags = invariant_suite(&out.system);
        assert!(diags.is_empty(), "{name}: {diags:?}");
        // One check per choreography node, plus one per inserted sync.
        assert!(out.context_checks >= p.chor.size(), "{name}: {} checks", out.context_checks);
    }
}

#[test]
fn serialization_round_trips_byte_for_byte() {
    for (name, p) in corpus() {
        let sys = synthesize(&p.decl, &p.chor).unwrap();
        let text = to_text(&sys);
        let back = from_text(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(to_text(&back), text, "{name}");
        assert_eq!(to_text(&synthesize(&p.decl, &p.chor).unwrap()), text, "{name}: synthesis not deterministic");
    }
}

#[test]
fn simulated_runs_end_in_explored_terminals() {
    let limits = Limits::default();
    for (name, p) in corpus() {
        let sys = synthesize(&p.decl, &p.chor).unwrap();
        let x = sys_explore(&sys, &SysState::initial(&sys), limits).unwrap();
        assert!(!x.truncated, "{name}");
        let terminals: BTreeSet<_> = x.terminals.iter().map(|s| (s.locs.clone(), s.vals.clone())).collect();
        for seed in 0..10 {
            let opts = SimOptions { seed, ..SimOptions::default() };
            let r = sim::run(&sys, opts).unwrap();
            assert_eq!(r.outcome, Outcome::Completed, "{name} seed {seed}");
            assert_eq!(r.units, sys.components.len());
            assert!(terminals.contains(&(r.locs.clone(), r.vals.clone())), "{name} seed {seed}: {}", r.vals);
            let again = sim::run(&sys, opts).unwrap();
            assert_eq!(again.trace_jsonl(), r.trace_jsonl(), "{name} seed {seed}");
        }
    }
}

#[test]
fn threaded_runs_also_end_in_explored_terminals() {
    for (name, p) in corpus() {
        let sys = synthesize(&p.decl, &p.chor).unwrap();
        let x = sys_explore(&sys, &SysState::initial(&sys), Limits::default()).unwrap();
        let finals: BTreeSet<_> = x.terminals.iter().map(|s| project(&p.decl, &s.vals)).collect();
        let r = sim::run(&sys, SimOptions { seed: 3, threads: true, ..SimOptions::default() }).unwrap();
        assert_eq!(r.outcome, Outcome::Completed, "{name}");
        assert!(finals.contains(&project(&p.decl, &r.vals)), "{name}");
    }
}
