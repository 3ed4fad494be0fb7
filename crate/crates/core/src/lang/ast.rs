use std::collections::BTreeMap;
use std::sync::Arc;

use crate::diag::Span;
use crate::model::{DataType, Expr, Name, Port, Update, Valuation, Value, VarId, Variable};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VarDecl {
    pub var: Variable,
    pub init: Value,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ComponentDecl {
    pub id: Name,
    pub vars: Vec<VarDecl>,
    pub ports: Vec<Port>,
    pub span: Span,
}

impl ComponentDecl {
    pub fn var(&self, name: &str) -> Option<&VarDecl> {
        self.vars.iter().find(|v| &*v.var.id.name == name)
    }

    pub fn port(&self, local: &str) -> Option<&Port> {
        self.ports.iter().find(|p| p.local() == local)
    }
}

/// Declared components with their variables and ports, in declaration order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SystemDecl {
    pub components: Vec<ComponentDecl>,
}

impl SystemDecl {
    pub fn component(&self, id: &str) -> Option<&ComponentDecl> {
        self.components.iter().find(|c| &*c.id == id)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.components.iter().position(|c| &*c.id == id)
    }

    pub fn port(&self, id: &str) -> Option<&Port> {
        let (comp, local) = id.split_once('.')?;
        self.component(comp)?.port(local)
    }

    pub fn var_type(&self, v: &VarId) -> Option<DataType> {
        self.component(&v.owner)?.var(&v.name).map(|d| d.var.dtype)
    }

    /// Declared initial values for every variable.
    pub fn initial_valuation(&self) -> Valuation {
        self.components
            .iter()
            .flat_map(|c| c.vars.iter().map(|v| (v.var.id.clone(), v.init.clone())))
            .collect()
    }

    /// Declaration rank of each component, used for deterministic tie-breaks.
    pub fn ranks(&self) -> BTreeMap<Name, usize> {
        self.components
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id.clone(), i))
            .collect()
    }
}

/// A send port together with its guard and update function.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GuardedSend {
    pub port: Port,
    pub guard: Expr,
    pub update: Update,
    pub span: Span,
}

impl GuardedSend {
    pub fn new(port: Port, guard: Expr, update: Update) -> GuardedSend {
        GuardedSend {
            port,
            guard,
            update,
            span: Span::default(),
        }
    }
}

/// A receive port with its update function.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Receive {
    pub port: Port,
    pub update: Update,
    pub span: Span,
}

impl Receive {
    pub fn new(port: Port, update: Update) -> Receive {
        Receive {
            port,
            update,
            span: Span::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChorAst {
    Nil,
    Comm {
        send: GuardedSend,
        rcvs: Vec<Receive>,
        annotation: Option<DataType>,
    },
    Branch {
        master: Name,
        conts: Vec<(GuardedSend, Arc<ChorAst>)>,
    },
    Loop {
        cond: GuardedSend,
        body: Arc<ChorAst>,
    },
    Seq(Arc<ChorAst>, Arc<ChorAst>),
    Par(Arc<ChorAst>, Arc<ChorAst>),
}

impl ChorAst {
    pub fn comm(send: GuardedSend, rcvs: Vec<Receive>) -> ChorAst {
        ChorAst::Comm {
            send,
            rcvs,
            annotation: None,
        }
    }

    pub fn seq(a: ChorAst, b: ChorAst) -> ChorAst {
        ChorAst::Seq(Arc::new(a), Arc::new(b))
    }

    pub fn par(a: ChorAst, b: ChorAst) -> ChorAst {
        ChorAst::Par(Arc::new(a), Arc::new(b))
    }

    pub fn looping(cond: GuardedSend, body: ChorAst) -> ChorAst {
        ChorAst::Loop {
            cond,
            body: Arc::new(body),
        }
    }

    pub fn branch(master: &str, conts: Vec<(GuardedSend, ChorAst)>) -> ChorAst {
        ChorAst::Branch {
            master: Name::from(master),
            conts: conts.into_iter().map(|(g, c)| (g, Arc::new(c))).collect(),
        }
    }

    /// Right-nested sequence of the given terms; `Nil` when empty.
    pub fn seq_all(items: Vec<ChorAst>) -> ChorAst {
        let mut it = items.into_iter().rev();
        let Some(mut acc) = it.next() else {
            return ChorAst::Nil;
        };
        for x in it {
            acc = ChorAst::seq(x, acc);
        }
        acc
    }

    /// Number of nodes, for test sizing.
    pub fn size(&self) -> usize {
        match self {
            ChorAst::Nil | ChorAst::Comm { .. } => 1,
            ChorAst::Branch { conts, .. } => 1 + conts.iter().map(|(_, c)| c.size()).sum::<usize>(),
            ChorAst::Loop { body, .. } => 1 + body.size(),
            ChorAst::Seq(a, b) | ChorAst::Par(a, b) => 1 + a.size() + b.size(),
        }
    }

    /// Every port mentioned by the term.
    pub fn ports(&self) -> Vec<&Port> {
        let mut out = Vec::new();
        self.collect_ports(&mut out);
        out
    }

    fn collect_ports<'a>(&'a self, out: &mut Vec<&'a Port>) {
        match self {
            ChorAst::Nil => {}
            ChorAst::Comm { send, rcvs, .. } => {
                out.push(&send.port);
                out.extend(rcvs.iter().map(|r| &r.port));
            }
            ChorAst::Branch { conts, .. } => {
                for (g, c) in conts {
                    out.push(&g.port);
                    c.collect_ports(out);
                }
            }
            ChorAst::Loop { cond, body } => {
                out.push(&cond.port);
                body.collect_ports(out);
            }
            ChorAst::Seq(a, b) | ChorAst::Par(a, b) => {
                a.collect_ports(out);
                b.collect_ports(out);
            }
        }
    }
}

/// A parsed file: declarations plus one named choreography.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub decl: SystemDecl,
    pub name: Name,
    pub chor: ChorAst,
}
