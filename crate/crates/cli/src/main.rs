//! `chorc`: check, synthesize, explore, compare, simulate and export
//! choreographies.
//!
//! Exit codes: 0 on success, 1 when the input is rejected or a check fails
//! (diagnostics, mismatch, deadlock), 2 on usage or I/O errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chorc_core::cbs::{from_text, to_text, CompositeSystem};
use chorc_core::exec::{explore, Limits};
use chorc_core::promela::{emit_model, PromelaOptions};
use chorc_core::sim::{self, Outcome, SimOptions};
use chorc_core::synth::synthesize;
use chorc_core::verify::{emit_ltl, equiv_check, mutate, parse_ltl, project, LtlSelection, Mutation, Verdict};
use chorc_core::{check_well_formed, parse, parse_split, Diagnostic, Program};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chorc", version, about = "Choreography compiler toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Input {
    /// Choreography source (`.chor`).
    file: PathBuf,
    /// Component declarations kept in a separate file; FILE then holds only
    /// the choreography.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct LimitArgs {
    #[arg(long, default_value_t = 200_000, value_parser = clap::value_parser!(u64).range(1..))]
    max_configs: u64,
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    max_depth: u64,
}

impl LimitArgs {
    fn limits(&self) -> Limits {
        Limits {
            max_configs: self.max_configs as usize,
            max_depth: self.max_depth as usize,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and check well-formedness.
    Check {
        #[command(flatten)]
        input: Input,
    },
    /// Synthesize the component system and print its canonical form.
    Synth {
        #[command(flatten)]
        input: Input,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write a Graphviz rendering of the system.
        #[arg(long, value_name = "FILE")]
        emit_dot: Option<PathBuf>,
    },
    /// Explore the choreography's own state space.
    Explore {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        limits: LimitArgs,
        /// Write the explored transition system as Graphviz.
        #[arg(long, value_name = "FILE")]
        emit_dot: Option<PathBuf>,
        /// Write the explored transition system as JSON.
        #[arg(long, value_name = "FILE")]
        dump_lts: Option<PathBuf>,
    },
    /// Compare final states of the choreography and of its synthesized system.
    Equiv {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        limits: LimitArgs,
        /// Use this serialized system instead of synthesizing one.
        #[arg(long, value_name = "FILE")]
        system: Option<PathBuf>,
        /// Corrupt the system first (drop-eps, swap-break, merge-copies,
        /// drop-interaction, unmark-end).
        #[arg(long, value_name = "KIND")]
        mutate: Option<String>,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run the synthesized components as independent units.
    Simulate {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
        max_steps: u64,
        /// Capacity of asynchronous queues.
        #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
        max_chan_len: u64,
        /// Write the event trace, one JSON object per line.
        #[arg(long, value_name = "FILE")]
        trace: Option<PathBuf>,
        /// One thread per component; traces are then not reproducible.
        #[arg(long)]
        threads: bool,
    },
    /// Emit a Promela model of the synthesized system.
    Promela {
        #[command(flatten)]
        input: Input,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
        max_chan_len: u64,
        /// Acknowledge on the payload channel through the recv/send macros.
        #[arg(long)]
        paper_ack_encoding: bool,
        /// Reject string-typed data instead of interning it.
        #[arg(long)]
        strict: bool,
        /// Append the formulas of this `.ltl` file as `ltl` blocks.
        #[arg(long, value_name = "FILE")]
        inline_ltl: Option<PathBuf>,
    },
    /// Emit LTL properties over the Promela observables.
    Ltl {
        #[command(flatten)]
        input: Input,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// All components terminate once one does.
        #[arg(long)]
        termination: bool,
        /// Port that must not fire infinitely often.
        #[arg(long, value_name = "PORT")]
        livelock: Option<String>,
        /// Port that fires at most once (repeatable).
        #[arg(long, value_name = "PORT")]
        unique: Vec<String>,
        /// `P,Q`: P may not fire before Q (repeatable).
        #[arg(long, value_name = "P,Q")]
        transaction: Vec<String>,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn report(diags: &[Diagnostic], file: &Path) {
    let name = file.display().to_string();
    for d in diags {
        let d = if d.file.is_none() { d.clone().in_file(&name) } else { d.clone() };
        eprintln!("{d}");
    }
}

/// Parsed and checked input, or `None` after reporting diagnostics.
fn load(input: &Input) -> Result<Option<Program>> {
    let src = read(&input.file)?;
    let parsed = match &input.config {
        Some(cfg) => {
            let decls = read(cfg)?;
            parse_split(&decls, &cfg.display().to_string(), &src, &input.file.display().to_string())
        }
        None => parse(&src),
    };
    let prog = match parsed {
        Ok(p) => p,
        Err(e) => {
            report(&e.0, &input.file);
            return Ok(None);
        }
    };
    let diags = check_well_formed(&prog.decl, &prog.chor);
    if !diags.is_empty() {
        report(&diags, &input.file);
        return Ok(None);
    }
    Ok(Some(prog))
}

fn synth(prog: &Program) -> Result<CompositeSystem> {
    synthesize(&prog.decl, &prog.chor).context("synthesis failed")
}

macro_rules! load_or_fail {
    ($input:expr) => {
        match load($input)? {
            Some(p) => p,
            None => return Ok(1),
        }
    };
}

fn run(cli: Cli) -> Result<u8> {
    match cli.cmd {
        Cmd::Check { input } => {
            let p = load_or_fail!(&input);
            println!("{}: ok ({} components)", input.file.display(), p.decl.components.len());
            Ok(0)
        }
        Cmd::Synth { input, output, emit_dot } => {
            let p = load_or_fail!(&input);
            let sys = synth(&p)?;
            write_out(output.as_deref(), &to_text(&sys))?;
            if let Some(dot) = emit_dot {
                write_out(Some(&dot), &sys.to_dot())?;
            }
            if output.is_some() {
                println!(
                    "{} components, {} locations, {} transitions, {} interactions",
                    sys.components.len(),
                    sys.location_count(),
                    sys.transition_count(),
                    sys.gamma.len()
                );
            }
            Ok(0)
        }
        Cmd::Explore {
            input,
            limits,
            emit_dot,
            dump_lts,
        } => {
            let p = load_or_fail!(&input);
            let x = explore(&p.chor, &p.decl.initial_valuation(), limits.limits())?;
            println!("configurations: {}", x.graph.nodes.len());
            println!("transitions: {}", x.graph.edges.len());
            let rules: Vec<&str> = x.graph.rules_used().into_iter().map(|r| r.tag()).collect();
            println!("rules: {}", rules.join(" "));
            println!("finals: {}", x.finals.len());
            for v in &x.finals {
                println!("  {v}");
            }
            println!("deadlocks: {}", x.deadlocks.len());
            if x.truncated {
                println!("truncated: limits reached");
            }
            if let Some(path) = emit_dot {
                write_out(Some(&path), &x.graph.to_dot())?;
            }
            if let Some(path) = dump_lts {
                let edges: Vec<_> = x
                    .graph
                    .edges
                    .iter()
                    .map(|e| {
                        serde_json::json!({
                            "from": e.from,
                            "to": e.to,
                            "label": e.label.to_string(),
                            "rules": e.rules.iter().map(|r| r.tag()).collect::<Vec<_>>(),
                        })
                    })
                    .collect();
                let nodes: Vec<_> = x.graph.nodes.iter().map(|n| n.valuation().to_string()).collect();
                let doc = serde_json::json!({ "nodes": nodes, "edges": edges });
                write_out(Some(&path), &(serde_json::to_string_pretty(&doc)? + "\n"))?;
            }
            Ok(if x.deadlocks.is_empty() { 0 } else { 1 })
        }
        Cmd::Equiv {
            input,
            limits,
            system,
            mutate: kind,
            json,
        } => {
            let p = load_or_fail!(&input);
            let mut sys = match &system {
                Some(path) => match from_text(&read(path)?) {
                    Ok(s) => s,
                    Err(e) => {
                        report(&e.0, path);
                        return Ok(1);
                    }
                },
                None => synth(&p)?,
            };
            if let Some(kind) = kind {
                let Some(m) = Mutation::from_tag(&kind) else {
                    let tags: Vec<&str> = Mutation::ALL.iter().map(|m| m.tag()).collect();
                    bail!("unknown mutation `{kind}` (expected one of {})", tags.join(", "));
                };
                sys = mutate(&sys, m).with_context(|| format!("mutation `{kind}` does not apply to this system"))?;
            }
            let r = equiv_check(&p.decl, &p.chor, &sys, limits.limits())?;
            if json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            } else {
                print!("{r}");
            }
            Ok(if r.verdict == Verdict::Equivalent { 0 } else { 1 })
        }
        Cmd::Simulate {
            input,
            seed,
            max_steps,
            max_chan_len,
            trace,
            threads,
        } => {
            let p = load_or_fail!(&input);
            let sys = synth(&p)?;
            let opts = SimOptions {
                seed,
                max_steps: max_steps as usize,
                queue_capacity: max_chan_len as usize,
                threads,
            };
            let r = sim::run(&sys, opts)?;
            if let Some(path) = trace {
                write_out(Some(&path), &r.trace_jsonl())?;
            }
            println!("outcome: {}", serde_json::to_value(r.outcome)?.as_str().unwrap_or("?"));
            println!("steps: {}", r.trace.len());
            println!("final: {}", project(&p.decl, &r.vals));
            Ok(if r.outcome == Outcome::Completed { 0 } else { 1 })
        }
        Cmd::Promela {
            input,
            output,
            max_chan_len,
            paper_ack_encoding,
            strict,
            inline_ltl,
        } => {
            let p = load_or_fail!(&input);
            let sys = synth(&p)?;
            let ltl = match inline_ltl {
                Some(path) => parse_ltl(&read(&path)?),
                None => Vec::new(),
            };
            let opts = PromelaOptions {
                max_len: max_chan_len as usize,
                paper_ack: paper_ack_encoding,
                strict,
                ltl,
            };
            match emit_model(&sys, &opts) {
                Ok(text) => write_out(output.as_deref(), &text)?,
                Err(e) => {
                    eprintln!("{}: {e}", input.file.display());
                    return Ok(1);
                }
            }
            Ok(0)
        }
        Cmd::Ltl {
            input,
            output,
            termination,
            livelock,
            unique,
            transaction,
        } => {
            let p = load_or_fail!(&input);
            let sys = synth(&p)?;
            let transactions = transaction
                .iter()
                .map(|t| match t.split_once(',') {
                    Some((a, b)) => Ok((a.trim().to_string(), b.trim().to_string())),
                    None => bail!("--transaction expects `P,Q`, got `{t}`"),
                })
                .collect::<Result<Vec<_>>>()?;
            let sel = LtlSelection {
                termination,
                livelock,
                unique,
                transactions,
            };
            match emit_ltl(&sys, &sel) {
                Ok(text) => write_out(output.as_deref(), &text)?,
                Err(e) => {
                    eprintln!("{}: {e}", input.file.display());
                    return Ok(1);
                }
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
