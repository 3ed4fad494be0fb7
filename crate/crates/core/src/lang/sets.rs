//! Participant, start and end sets of a choreography.

use std::collections::BTreeSet;

use super::ast::ChorAst;
use crate::model::{Name, PortType};

pub fn participants(ch: &ChorAst) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    collect(ch, &mut out);
    out
}

fn collect(ch: &ChorAst, out: &mut BTreeSet<Name>) {
    match ch {
        ChorAst::Nil => {}
        ChorAst::Comm { send, rcvs, .. } => {
            out.insert(send.port.owner.clone());
            out.extend(rcvs.iter().map(|r| r.port.owner.clone()));
        }
        ChorAst::Branch { master, conts } => {
            out.insert(master.clone());
            for (g, c) in conts {
                out.insert(g.port.owner.clone());
                collect(c, out);
            }
        }
        ChorAst::Loop { cond, body } => {
            out.insert(cond.port.owner.clone());
            collect(body, out);
        }
        ChorAst::Seq(a, b) | ChorAst::Par(a, b) => {
            collect(a, out);
            collect(b, out);
        }
    }
}

/// Components that must be notified for `ch` to begin.
pub fn start_set(ch: &ChorAst) -> BTreeSet<Name> {
    match ch {
        ChorAst::Nil => BTreeSet::new(),
        ChorAst::Comm { send, .. } => BTreeSet::from([send.port.owner.clone()]),
        ChorAst::Branch { master, .. } => BTreeSet::from([master.clone()]),
        ChorAst::Loop { cond, .. } => BTreeSet::from([cond.port.owner.clone()]),
        ChorAst::Seq(a, _) => start_set(a),
        ChorAst::Par(a, b) => &start_set(a) | &start_set(b),
    }
}

/// Components that must finish for `ch` to be finished. A branch ends at
/// its master.
pub fn end_set(ch: &ChorAst) -> BTreeSet<Name> {
    match ch {
        ChorAst::Nil => BTreeSet::new(),
        ChorAst::Comm { send, rcvs, .. } => match send.port.ctype {
            PortType::SyncSend => rcvs.iter().map(|r| r.port.owner.clone()).collect(),
            _ => BTreeSet::from([send.port.owner.clone()]),
        },
        ChorAst::Branch { master, .. } => BTreeSet::from([master.clone()]),
        ChorAst::Loop { cond, .. } => BTreeSet::from([cond.port.owner.clone()]),
        ChorAst::Seq(_, b) => end_set(b),
        ChorAst::Par(a, b) => &end_set(a) | &end_set(b),
    }
}
