//! Values, variables, expressions, update functions and valuations shared by
//! both the choreography interpreter and the component semantics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

/// Interned-ish identifier.
pub type Name = Arc<str>;

pub fn name(s: &str) -> Name {
    Arc::from(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataType {
    Int,
    Bool,
    Str,
}

impl DataType {
    pub fn default_value(self) -> Value {
        match self {
            DataType::Int => Value::Int(0),
            DataType::Bool => Value::Bool(false),
            DataType::Str => Value::Str(name("")),
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            DataType::Int => "int",
            DataType::Bool => "bool",
            DataType::Str => "str",
        }
    }

    pub fn from_keyword(s: &str) -> Option<DataType> {
        match s {
            "int" => Some(DataType::Int),
            "bool" => Some(DataType::Bool),
            "str" => Some(DataType::Str),
            _ => None,
        }
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// A runtime datum. `Neutral` is the payload delivered on internal ports.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Str(Name),
    Neutral,
}

impl Value {
    pub fn dtype(&self) -> Option<DataType> {
        match self {
            Value::Int(_) => Some(DataType::Int),
            Value::Bool(_) => Some(DataType::Bool),
            Value::Str(_) => Some(DataType::Str),
            Value::Neutral => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Neutral => f.write_str("neutral"),
        }
    }
}

/// Variable identity: owning component plus local name.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId {
    pub owner: Name,
    pub name: Name,
}

impl VarId {
    pub fn new(owner: &str, name_: &str) -> VarId {
        VarId {
            owner: name(owner),
            name: name(name_),
        }
    }

    /// Generated control variables start with `$` and never appear in user code.
    pub fn is_control(&self) -> bool {
        self.name.starts_with('$')
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.owner, self.name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Variable {
    pub id: VarId,
    pub dtype: DataType,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivByZero,
    #[error("arithmetic overflow")]
    Overflow,
    #[error("unbound variable {0}")]
    Unbound(VarId),
    #[error("operator {op} applied to {got}")]
    Type { op: &'static str, got: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("unknown variable {0}")]
    UnknownVar(VarId),
    #[error("operator {op} expects {expected}, found {found}")]
    Operand {
        op: &'static str,
        expected: &'static str,
        found: DataType,
    },
    #[error("operands of {op} have different types {left} and {right}")]
    Mismatch {
        op: &'static str,
        left: DataType,
        right: DataType,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransferError {
    #[error("port {0} cannot send")]
    NotSend(Name),
    #[error("port {0} is not a receive port")]
    NotReceive(Name),
    #[error("receiver {rcv} expects {expected}, sender carries {found}")]
    Dtype {
        rcv: Name,
        expected: DataType,
        found: DataType,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Total mapping from a declared variable set to values.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Valuation(BTreeMap<VarId, Value>);

impl Valuation {
    pub fn new() -> Valuation {
        Valuation(BTreeMap::new())
    }

    pub fn get(&self, v: &VarId) -> Option<&Value> {
        self.0.get(v)
    }

    pub fn set(&mut self, v: VarId, val: Value) {
        self.0.insert(v, val);
    }

    pub fn with(mut self, v: VarId, val: Value) -> Valuation {
        self.set(v, val);
        self
    }

    pub fn contains(&self, v: &VarId) -> bool {
        self.0.contains_key(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VarId, &Value)> {
        self.0.iter()
    }

    pub fn domain(&self) -> BTreeSet<VarId> {
        self.0.keys().cloned().collect()
    }

    /// Keep only bindings satisfying `keep`.
    pub fn restrict(&self, keep: impl Fn(&VarId) -> bool) -> Valuation {
        Valuation(
            self.0
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        )
    }

    /// Pointwise union; `other` wins on overlap.
    pub fn merge(&self, other: &Valuation) -> Valuation {
        let mut out = self.clone();
        for (k, v) in other.iter() {
            out.set(k.clone(), v.clone());
        }
        out
    }
}

impl FromIterator<(VarId, Value)> for Valuation {
    fn from_iter<I: IntoIterator<Item = (VarId, Value)>>(iter: I) -> Self {
        Valuation(iter.into_iter().collect())
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str("}")
    }
}

impl Serialize for Valuation {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            m.serialize_entry(&k.to_string(), v)?;
        }
        m.end()
    }
}

/// `hi` overrides `lo` on the domain of `lo`; keys outside that domain are dropped.
pub fn override_valuation(hi: &Valuation, lo: &Valuation) -> Valuation {
    lo.0.iter()
        .map(|(k, v)| (k.clone(), hi.get(k).unwrap_or(v).clone()))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "and",
            BinOp::Or => "or",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 5,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 3
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Expr {
    Lit(Value),
    Var(VarId),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn tt() -> Expr {
        Expr::Lit(Value::Bool(true))
    }

    pub fn int(i: i64) -> Expr {
        Expr::Lit(Value::Int(i))
    }

    pub fn var(owner: &str, n: &str) -> Expr {
        Expr::Var(VarId::new(owner, n))
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Unary(UnOp::Not, Box::new(e))
    }

    pub fn is_true_lit(&self) -> bool {
        matches!(self, Expr::Lit(Value::Bool(true)))
    }

    pub fn eval(&self, v: &Valuation) -> Result<Value, EvalError> {
        match self {
            Expr::Lit(x) => Ok(x.clone()),
            Expr::Var(id) => v.get(id).cloned().ok_or_else(|| EvalError::Unbound(id.clone())),
            Expr::Unary(op, e) => {
                let x = e.eval(v)?;
                match (op, &x) {
                    (UnOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                    (UnOp::Neg, Value::Int(i)) => {
                        i.checked_neg().map(Value::Int).ok_or(EvalError::Overflow)
                    }
                    (UnOp::Not, _) => Err(type_err("not", &x)),
                    (UnOp::Neg, _) => Err(type_err("-", &x)),
                }
            }
            Expr::Binary(op, l, r) => {
                let a = l.eval(v)?;
                // Short-circuit boolean connectives.
                match (op, &a) {
                    (BinOp::And, Value::Bool(false)) => return Ok(Value::Bool(false)),
                    (BinOp::Or, Value::Bool(true)) => return Ok(Value::Bool(true)),
                    _ => {}
                }
                let b = r.eval(v)?;
                eval_binary(*op, &a, &b)
            }
        }
    }

    /// Boolean evaluation used for guards.
    pub fn holds(&self, v: &Valuation) -> Result<bool, EvalError> {
        match self.eval(v)? {
            Value::Bool(b) => Ok(b),
            other => Err(type_err("guard", &other)),
        }
    }

    pub fn type_of(&self, env: &dyn Fn(&VarId) -> Option<DataType>) -> Result<DataType, TypeError> {
        match self {
            Expr::Lit(v) => Ok(v.dtype().unwrap_or(DataType::Int)),
            Expr::Var(id) => env(id).ok_or_else(|| TypeError::UnknownVar(id.clone())),
            Expr::Unary(UnOp::Not, e) => expect(e.type_of(env)?, DataType::Bool, "not", "bool"),
            Expr::Unary(UnOp::Neg, e) => expect(e.type_of(env)?, DataType::Int, "-", "int"),
            Expr::Binary(op, l, r) => {
                let a = l.type_of(env)?;
                let b = r.type_of(env)?;
                let sym = op.symbol();
                match op {
                    BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod => {
                        expect(a, DataType::Int, sym, "int")?;
                        expect(b, DataType::Int, sym, "int")
                    }
                    BinOp::And | BinOp::Or => {
                        expect(a, DataType::Bool, sym, "bool")?;
                        expect(b, DataType::Bool, sym, "bool")
                    }
                    BinOp::Eq | BinOp::Ne => {
                        if a != b {
                            return Err(TypeError::Mismatch { op: sym, left: a, right: b });
                        }
                        Ok(DataType::Bool)
                    }
                    BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        if a != b {
                            return Err(TypeError::Mismatch { op: sym, left: a, right: b });
                        }
                        if a == DataType::Bool {
                            return Err(TypeError::Operand {
                                op: sym,
                                expected: "int or str",
                                found: a,
                            });
                        }
                        Ok(DataType::Bool)
                    }
                }
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<VarId> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<VarId>) {
        match self {
            Expr::Lit(_) => {}
            Expr::Var(id) => {
                out.insert(id.clone());
            }
            Expr::Unary(_, e) => e.collect_vars(out),
            Expr::Binary(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }
}

fn expect(
    got: DataType,
    want: DataType,
    op: &'static str,
    expected: &'static str,
) -> Result<DataType, TypeError> {
    if got == want {
        Ok(got)
    } else {
        Err(TypeError::Operand { op, expected, found: got })
    }
}

fn type_err(op: &'static str, got: &Value) -> EvalError {
    EvalError::Type {
        op,
        got: got.to_string(),
    }
}

fn eval_binary(op: BinOp, a: &Value, b: &Value) -> Result<Value, EvalError> {
    use Value::*;
    let sym = op.symbol();
    match op {
        BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod => {
            let (x, y) = match (a, b) {
                (Int(x), Int(y)) => (*x, *y),
                (Int(_), other) | (other, _) => return Err(type_err(sym, other)),
            };
            let r = match op {
                BinOp::Add => x.checked_add(y),
                BinOp::Sub => x.checked_sub(y),
                BinOp::Mul => x.checked_mul(y),
                BinOp::Div | BinOp::Mod if y == 0 => return Err(EvalError::DivByZero),
                BinOp::Div => x.checked_div(y),
                _ => x.checked_rem(y),
            };
            r.map(Int).ok_or(EvalError::Overflow)
        }
        BinOp::And | BinOp::Or => match (a, b) {
            (Bool(x), Bool(y)) => Ok(Bool(if op == BinOp::And { *x && *y } else { *x || *y })),
            (Bool(_), other) | (other, _) => Err(type_err(sym, other)),
        },
        BinOp::Eq | BinOp::Ne => {
            if a.dtype() != b.dtype() {
                return Err(type_err(sym, b));
            }
            let eq = a == b;
            Ok(Bool(if op == BinOp::Eq { eq } else { !eq }))
        }
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            let ord = match (a, b) {
                (Int(x), Int(y)) => x.cmp(y),
                (Str(x), Str(y)) => x.cmp(y),
                (_, other) => return Err(type_err(sym, other)),
            };
            let r = match op {
                BinOp::Lt => ord.is_lt(),
                BinOp::Le => ord.is_le(),
                BinOp::Gt => ord.is_gt(),
                _ => ord.is_ge(),
            };
            Ok(Bool(r))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assignment {
    pub target: VarId,
    pub rhs: Expr,
}

/// Ordered sequence of assignments. An empty sequence is `skip`; `label`
/// keeps the name of a placeholder function such as `f()`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Update {
    pub label: Option<Name>,
    pub assigns: Vec<Assignment>,
}

impl Update {
    pub fn skip() -> Update {
        Update::default()
    }

    pub fn assign(target: VarId, rhs: Expr) -> Update {
        Update {
            label: None,
            assigns: vec![Assignment { target, rhs }],
        }
    }

    pub fn then(mut self, target: VarId, rhs: Expr) -> Update {
        self.assigns.push(Assignment { target, rhs });
        self
    }

    pub fn is_skip(&self) -> bool {
        self.assigns.is_empty()
    }

    /// Apply assignments left to right, each reading the latest valuation.
    pub fn apply(&self, v: &Valuation) -> Result<Valuation, EvalError> {
        let mut out = v.clone();
        self.apply_in_place(&mut out)?;
        Ok(out)
    }

    pub fn apply_in_place(&self, v: &mut Valuation) -> Result<(), EvalError> {
        for a in &self.assigns {
            if !v.contains(&a.target) {
                return Err(EvalError::Unbound(a.target.clone()));
            }
            let x = a.rhs.eval(v)?;
            v.set(a.target.clone(), x);
        }
        Ok(())
    }

    pub fn reads(&self) -> BTreeSet<VarId> {
        self.assigns.iter().flat_map(|a| a.rhs.vars()).collect()
    }

    pub fn writes(&self) -> BTreeSet<VarId> {
        self.assigns.iter().map(|a| a.target.clone()).collect()
    }

    pub fn vars(&self) -> BTreeSet<VarId> {
        let mut s = self.reads();
        s.extend(self.writes());
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PortType {
    #[serde(rename = "ss")]
    SyncSend,
    #[serde(rename = "as")]
    AsyncSend,
    #[serde(rename = "r")]
    Recv,
    #[serde(rename = "in")]
    Internal,
}

impl PortType {
    pub fn keyword(self) -> &'static str {
        match self {
            PortType::SyncSend => "ss",
            PortType::AsyncSend => "as",
            PortType::Recv => "r",
            PortType::Internal => "in",
        }
    }

    pub fn from_keyword(s: &str) -> Option<PortType> {
        match s {
            "ss" => Some(PortType::SyncSend),
            "as" => Some(PortType::AsyncSend),
            "r" => Some(PortType::Recv),
            "in" => Some(PortType::Internal),
            _ => None,
        }
    }

    pub fn is_send(self) -> bool {
        matches!(self, PortType::SyncSend | PortType::AsyncSend)
    }
}

impl fmt::Display for PortType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Typed communication endpoint. `id` is globally unique, e.g. `S.R` or `S.R#2`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Port {
    pub id: Name,
    pub owner: Name,
    pub var: VarId,
    pub dtype: DataType,
    pub ctype: PortType,
}

impl Port {
    pub fn new(owner: &str, local: &str, var: &str, dtype: DataType, ctype: PortType) -> Port {
        Port {
            id: name(&format!("{owner}.{local}")),
            owner: name(owner),
            var: VarId::new(owner, var),
            dtype,
            ctype,
        }
    }

    /// Name after the owner prefix, e.g. `R#2` for `S.R#2`.
    pub fn local(&self) -> &str {
        self.id
            .strip_prefix(&*self.owner)
            .and_then(|s| s.strip_prefix('.'))
            .unwrap_or(&self.id)
    }
}

/// `σ` with every receiver variable rebound to the sender's variable value.
pub fn transfer(sigma: &Valuation, snd: &Port, rcvs: &[&Port]) -> Result<Valuation, TransferError> {
    if !snd.ctype.is_send() {
        return Err(TransferError::NotSend(snd.id.clone()));
    }
    let d = sigma
        .get(&snd.var)
        .cloned()
        .ok_or_else(|| EvalError::Unbound(snd.var.clone()))?;
    let mut out = sigma.clone();
    for r in rcvs {
        if r.ctype != PortType::Recv {
            return Err(TransferError::NotReceive(r.id.clone()));
        }
        if r.dtype != snd.dtype {
            return Err(TransferError::Dtype {
                rcv: r.id.clone(),
                expected: r.dtype,
                found: snd.dtype,
            });
        }
        out.set(r.var.clone(), d.clone());
    }
    Ok(out)
}
