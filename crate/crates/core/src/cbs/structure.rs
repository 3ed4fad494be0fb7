use std::collections::{BTreeMap, BTreeSet};

use super::system::CompositeSystem;
use crate::diag::Diagnostic;
use crate::model::{Name, PortType};

/// Structural conditions that make a system executable without controllers.
pub fn check_structure(sys: &CompositeSystem) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let table = sys.port_table();
    let mut uses: BTreeMap<Name, usize> = BTreeMap::new();
    for a in &sys.gamma {
        for p in std::iter::once(&a.send).chain(&a.receivers) {
            *uses.entry(p.clone()).or_default() += 1;
        }
        let Some((si, sp)) = table.get(&a.send) else {
            out.push(Diagnostic::new("unknown-port", format!("interaction sends on undeclared port {}", a.send)));
            continue;
        };
        if !sp.ctype.is_send() {
            out.push(Diagnostic::new("port-kind", format!("interaction sender {} is a {} port", a.send, sp.ctype)));
        }
        if a.receivers.is_empty() {
            out.push(Diagnostic::new("empty-receivers", format!("interaction of {} has no receivers", a.send)));
        }
        let mut owners = BTreeSet::from([*si]);
        for r in &a.receivers {
            let Some((ri, rp)) = table.get(r) else {
                out.push(Diagnostic::new("unknown-port", format!("interaction receives on undeclared port {r}")));
                continue;
            };
            if rp.ctype != PortType::Recv {
                out.push(Diagnostic::new("port-kind", format!("interaction receiver {r} is a {} port", rp.ctype)));
            }
            if rp.dtype != sp.dtype {
                out.push(Diagnostic::new(
                    "dtype-mismatch",
                    format!("{} carries {} but {r} expects {}", a.send, sp.dtype, rp.dtype),
                ));
            }
            if !owners.insert(*ri) {
                out.push(Diagnostic::new(
                    "receiver-distinct",
                    format!("interaction of {} reaches component {} twice", a.send, sys.components[*ri].id),
                ));
            }
        }
    }
    for c in &sys.components {
        for p in &c.ports {
            let n = uses.get(&p.id).copied().unwrap_or(0);
            match p.ctype {
                PortType::Internal if n > 0 => out.push(Diagnostic::new(
                    "internal-in-interaction",
                    format!("internal port {} appears in an interaction", p.id),
                )),
                PortType::Internal => {}
                _ if n == 0 => out.push(Diagnostic::new(
                    "port-unconnected",
                    format!("port {} appears in no interaction", p.id),
                )),
                _ if n > 1 => out.push(Diagnostic::new(
                    "port-conflict",
                    format!("port {} appears in {n} interactions", p.id),
                )),
                _ => {}
            }
            if p.owner != c.id || p.var.owner != c.id {
                out.push(Diagnostic::new("port-ownership", format!("port {} is not owned by {}", p.id, c.id)));
            }
        }
        for t in &c.transitions {
            if c.port(&t.port).is_none() {
                out.push(Diagnostic::new(
                    "foreign-port",
                    format!("transition of {} uses port {} it does not own", c.id, t.port),
                ));
            }
            if t.src >= c.locations.len() || t.dst >= c.locations.len() {
                out.push(Diagnostic::new("bad-location", format!("transition of {} on {} leaves the location set", c.id, t.port)));
            }
        }
        for (l, name) in c.locations.iter().enumerate() {
            let kinds: BTreeSet<bool> = c
                .outgoing(l)
                .filter_map(|t| c.port(&t.port))
                .filter(|p| p.ctype != PortType::Internal)
                .map(|p| p.ctype.is_send())
                .collect();
            if kinds.len() > 1 {
                out.push(Diagnostic::new(
                    "mixed-location",
                    format!("location {name} of {} has outgoing send and receive transitions", c.id),
                ));
            }
        }
    }
    out
}
