use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use crate::model::{Expr, Name, Port, PortType, Update, Valuation, Value, Variable};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Transition {
    pub src: usize,
    pub port: Name,
    pub guard: Expr,
    pub update: Update,
    pub dst: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Component {
    pub id: Name,
    pub vars: Vec<(Variable, Value)>,
    pub ports: Vec<Port>,
    pub locations: Vec<Name>,
    pub transitions: Vec<Transition>,
    pub init: usize,
    pub end: Option<usize>,
}

impl Component {
    /// A component with a single initial location and no behavior.
    pub fn skeleton(id: &str, vars: Vec<(Variable, Value)>, init_location: &str) -> Component {
        Component {
            id: Name::from(id),
            vars,
            ports: Vec::new(),
            locations: vec![Name::from(init_location)],
            transitions: Vec::new(),
            init: 0,
            end: None,
        }
    }

    pub fn port(&self, id: &str) -> Option<&Port> {
        self.ports.iter().find(|p| &*p.id == id)
    }

    pub fn location(&self, name: &str) -> Option<usize> {
        self.locations.iter().position(|l| &**l == name)
    }

    pub fn add_location(&mut self, name: Name) -> usize {
        self.locations.push(name);
        self.locations.len() - 1
    }

    pub fn outgoing(&self, loc: usize) -> impl Iterator<Item = &Transition> {
        self.transitions.iter().filter(move |t| t.src == loc)
    }

    pub fn has_var(&self, name: &str) -> bool {
        self.vars.iter().any(|(v, _)| &*v.id.name == name)
    }
}

/// One send port wired to a set of receive ports.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Interaction {
    pub send: Name,
    pub receivers: Vec<Name>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CompositeSystem {
    pub components: Vec<Component>,
    pub gamma: Vec<Interaction>,
}

impl CompositeSystem {
    pub fn component(&self, id: &str) -> Option<&Component> {
        self.components.iter().find(|c| &*c.id == id)
    }

    pub fn component_index(&self, id: &str) -> Option<usize> {
        self.components.iter().position(|c| &*c.id == id)
    }

    /// Owning component index and declaration of every port.
    pub fn port_table(&self) -> BTreeMap<Name, (usize, &Port)> {
        let mut out = BTreeMap::new();
        for (i, c) in self.components.iter().enumerate() {
            for p in &c.ports {
                out.insert(p.id.clone(), (i, p));
            }
        }
        out
    }

    pub fn port(&self, id: &str) -> Option<&Port> {
        self.components.iter().find_map(|c| c.port(id))
    }

    /// Index of the interaction using `port`, first match.
    pub fn interaction_of(&self, port: &str) -> Option<usize> {
        self.gamma
            .iter()
            .position(|a| &*a.send == port || a.receivers.iter().any(|r| &**r == port))
    }

    pub fn initial_valuation(&self) -> Valuation {
        self.components
            .iter()
            .flat_map(|c| c.vars.iter().map(|(v, x)| (v.id.clone(), x.clone())))
            .collect()
    }

    pub fn is_sync(&self, a: &Interaction) -> bool {
        self.port(&a.send).is_some_and(|p| p.ctype == PortType::SyncSend)
    }

    pub fn location_count(&self) -> usize {
        self.components.iter().map(|c| c.locations.len()).sum()
    }

    pub fn transition_count(&self) -> usize {
        self.components.iter().map(|c| c.transitions.len()).sum()
    }

    /// Per-component automata as clusters plus dashed edges for interactions.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph system {\n  compound=true;\n");
        let node = |c: &Component, l: usize| format!("\"{}:{}\"", c.id, c.locations[l]);
        for (i, c) in self.components.iter().enumerate() {
            writeln!(out, "  subgraph cluster_{i} {{\n    label=\"{}\";", c.id).unwrap();
            for l in 0..c.locations.len() {
                let shape = if Some(l) == c.end { "doublecircle" } else { "circle" };
                let style = if l == c.init { ", style=bold" } else { "" };
                writeln!(out, "    {} [label=\"{}\", shape={shape}{style}];", node(c, l), c.locations[l]).unwrap();
            }
            for t in &c.transitions {
                let guard = if t.guard.is_true_lit() {
                    String::new()
                } else {
                    format!(" [{}]", crate::lang::print_expr(&t.guard, Some(&c.id)).replace('"', "\\\""))
                };
                writeln!(out, "    {} -> {} [label=\"{}{guard}\"];", node(c, t.src), node(c, t.dst), t.port).unwrap();
            }
            out.push_str("  }\n");
        }
        for (k, a) in self.gamma.iter().enumerate() {
            writeln!(out, "  \"a{k}\" [shape=box, label=\"{}\"];", a.send).unwrap();
            for r in &a.receivers {
                writeln!(out, "  \"a{k}\" -> \"a{k}:{r}\" [style=dashed];\n  \"a{k}:{r}\" [shape=plaintext, label=\"{r}\"];").unwrap();
            }
        }
        out.push_str("}\n");
        out
    }
}
