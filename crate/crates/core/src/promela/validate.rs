//! Syntactic smoke check for the Promela subset the generator emits.

use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num,
    Sym(&'static str),
}

const SYMS: &[&str] = &[
    "::", "->", "==", "!=", "<=", ">=", "&&", "||", "[]", "<>", "!", "?", "[", "]", "{", "}", "(", ")", ";", "=", "<",
    ">", "+", "-", "*", "/", "%", ",",
];

const TYPES: &[&str] = &["int", "bool", "byte", "short", "bit", "mtype"];

struct Lexed {
    toks: Vec<(Tok, usize)>,
    macros: BTreeMap<String, usize>,
}

fn lex(src: &str) -> Result<Lexed, String> {
    let mut toks = Vec::new();
    let mut macros = BTreeMap::new();
    let mut in_comment = false;
    for (n, raw) in src.lines().enumerate() {
        let line_no = n + 1;
        let mut line = raw.to_string();
        if !in_comment && line.trim_start().starts_with("#define") {
            let rest = line.trim_start()["#define".len()..].trim_start();
            let name: String = rest.chars().take_while(|c| c.is_ascii_alphanumeric() || *c == '_').collect();
            if name.is_empty() {
                return Err(format!("line {line_no}: #define without a name"));
            }
            let after = &rest[name.len()..];
            let arity = if after.starts_with('(') {
                let close = after.find(')').ok_or(format!("line {line_no}: unterminated macro parameters"))?;
                after[1..close].split(',').filter(|s| !s.trim().is_empty()).count()
            } else {
                usize::MAX
            };
            macros.insert(name, arity);
            continue;
        }
        let mut chars: Vec<char> = Vec::new();
        let mut i = 0;
        let bytes: Vec<char> = line.drain(..).collect();
        while i < bytes.len() {
            if in_comment {
                if bytes[i] == '*' && bytes.get(i + 1) == Some(&'/') {
                    in_comment = false;
                    i += 2;
                    chars.push(' ');
                } else {
                    i += 1;
                }
                continue;
            }
            if bytes[i] == '/' && bytes.get(i + 1) == Some(&'*') {
                in_comment = true;
                i += 2;
                continue;
            }
            if bytes[i] == '/' && bytes.get(i + 1) == Some(&'/') {
                break;
            }
            chars.push(bytes[i]);
            i += 1;
        }
        let mut i = 0;
        'outer: while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                toks.push((Tok::Ident(chars[start..i].iter().collect()), line_no));
                continue;
            }
            if c.is_ascii_digit() {
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                toks.push((Tok::Num, line_no));
                continue;
            }
            for s in SYMS {
                let sc: Vec<char> = s.chars().collect();
                if chars[i..].starts_with(&sc) {
                    toks.push((Tok::Sym(s), line_no));
                    i += sc.len();
                    continue 'outer;
                }
            }
            return Err(format!("line {line_no}: unexpected character {c:?}"));
        }
    }
    if in_comment {
        return Err("unterminated comment".into());
    }
    Ok(Lexed { toks, macros })
}

struct P {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    macros: BTreeMap<String, usize>,
    chans: BTreeSet<String>,
    globals: BTreeSet<String>,
    locals: BTreeSet<String>,
    procs: BTreeSet<String>,
    runs: Vec<(String, usize)>,
}

type R<T> = Result<T, String>;

impl P {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn line(&self) -> usize {
        self.toks.get(self.pos).or(self.toks.last()).map_or(0, |t| t.1)
    }

    fn err<T>(&self, msg: &str) -> R<T> {
        Err(format!("line {}: {msg}, found {:?}", self.line(), self.peek()))
    }

    fn is(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(x)) if x == k)
    }

    fn eat(&mut self, s: &str) -> bool {
        let hit = self.is(s) || self.is_kw(s);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn expect(&mut self, s: &str) -> R<()> {
        if self.eat(s) {
            Ok(())
        } else {
            self.err(&format!("expected `{s}`"))
        }
    }

    fn ident(&mut self) -> R<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn known(&self, name: &str) -> bool {
        self.locals.contains(name)
            || self.globals.contains(name)
            || self.chans.contains(name)
            || self.macros.contains_key(name)
            || matches!(name, "true" | "false" | "ack" | "_" | "value" | "timeout")
    }

    fn spec(&mut self) -> R<()> {
        while self.peek().is_some() {
            if self.eat("mtype") {
                self.expect("=")?;
                self.expect("{")?;
                loop {
                    let n = self.ident()?;
                    self.globals.insert(n);
                    if !self.eat(",") {
                        break;
                    }
                }
                self.expect("}")?;
                self.eat(";");
            } else if self.eat("chan") {
                let n = self.ident()?;
                self.expect("=")?;
                self.expect("[")?;
                match self.peek() {
                    Some(Tok::Num) => self.pos += 1,
                    Some(Tok::Ident(m)) if self.macros.contains_key(m) => self.pos += 1,
                    _ => return self.err("expected channel capacity"),
                }
                self.expect("]")?;
                self.expect("of")?;
                self.expect("{")?;
                loop {
                    let t = self.ident()?;
                    if !TYPES.contains(&t.as_str()) {
                        return self.err("expected channel element type");
                    }
                    if !self.eat(",") {
                        break;
                    }
                }
                self.expect("}")?;
                self.eat(";");
                self.chans.insert(n);
            } else if self.eat("proctype") {
                let n = self.ident()?;
                self.expect("(")?;
                self.expect(")")?;
                self.procs.insert(n);
                self.locals.clear();
                self.block()?;
            } else if self.eat("init") {
                self.locals.clear();
                self.block()?;
            } else if self.eat("ltl") {
                self.ident()?;
                self.expect("{")?;
                self.ltl()?;
                self.expect("}")?;
            } else if matches!(self.peek(), Some(Tok::Ident(t)) if TYPES.contains(&t.as_str())) {
                self.pos += 1;
                let n = self.ident()?;
                if self.eat("=") {
                    self.expr()?;
                }
                self.eat(";");
                self.globals.insert(n);
            } else {
                return self.err("expected a top-level declaration");
            }
        }
        for (r, line) in &self.runs {
            if !self.procs.contains(r) {
                return Err(format!("line {line}: run of undeclared proctype {r}"));
            }
        }
        Ok(())
    }

    fn block(&mut self) -> R<()> {
        self.expect("{")?;
        self.sequence(&["}"])?;
        self.expect("}")
    }

    fn at_any(&self, ends: &[&str]) -> bool {
        ends.iter().any(|e| self.is(e) || self.is_kw(e))
    }

    fn sequence(&mut self, ends: &[&str]) -> R<()> {
        self.step()?;
        loop {
            while self.eat(";") || self.eat("->") {}
            if self.at_any(ends) || self.peek().is_none() {
                return Ok(());
            }
            self.step()?;
        }
    }

    fn options(&mut self, close: &str) -> R<()> {
        if !self.is("::") {
            return self.err("expected `::` option");
        }
        while self.eat("::") {
            self.sequence(&["::", close])?;
        }
        self.expect(close)
    }

    fn step(&mut self) -> R<()> {
        if matches!(self.peek(), Some(Tok::Ident(t)) if TYPES.contains(&t.as_str())) {
            self.pos += 1;
            let n = self.ident()?;
            if self.eat("=") {
                self.expr()?;
            }
            self.locals.insert(n);
            return Ok(());
        }
        if self.eat("do") {
            return self.options("od");
        }
        if self.eat("if") {
            return self.options("fi");
        }
        if self.eat("atomic") {
            return self.block();
        }
        if self.eat("break") || self.eat("skip") || self.eat("else") {
            return Ok(());
        }
        if self.eat("run") {
            let line = self.line();
            let n = self.ident()?;
            self.expect("(")?;
            self.expect(")")?;
            self.runs.push((n, line));
            return Ok(());
        }
        if let Some(Tok::Ident(name)) = self.peek().cloned() {
            let next = self.toks.get(self.pos + 1).map(|t| &t.0);
            match next {
                Some(Tok::Sym("=")) => {
                    if !self.known(&name) {
                        return self.err(&format!("assignment to undeclared {name}"));
                    }
                    self.pos += 2;
                    return self.expr();
                }
                Some(Tok::Sym("!")) if !matches!(self.toks.get(self.pos + 2).map(|t| &t.0), Some(Tok::Sym("="))) => {
                    self.chan_ref(&name)?;
                    self.pos += 2;
                    return self.expr();
                }
                Some(Tok::Sym("?")) => {
                    self.chan_ref(&name)?;
                    self.pos += 2;
                    if self.eat("(") {
                        self.recv_arg()?;
                        return self.expect(")");
                    }
                    return self.recv_arg();
                }
                Some(Tok::Sym("(")) if self.macros.contains_key(&name) => {
                    let arity = self.macros[&name];
                    self.pos += 2;
                    let mut n = 0;
                    if !self.is(")") {
                        loop {
                            self.expr()?;
                            n += 1;
                            if !self.eat(",") {
                                break;
                            }
                        }
                    }
                    if arity != usize::MAX && n != arity {
                        return self.err(&format!("macro {name} takes {arity} arguments"));
                    }
                    return self.expect(")");
                }
                _ => {}
            }
        }
        self.expr()
    }

    fn chan_ref(&self, name: &str) -> R<()> {
        if self.chans.contains(name) || self.locals.contains(name) {
            Ok(())
        } else {
            self.err(&format!("undeclared channel {name}"))
        }
    }

    fn recv_arg(&mut self) -> R<()> {
        match self.peek() {
            Some(Tok::Num) => {
                self.pos += 1;
                Ok(())
            }
            Some(Tok::Ident(n)) if self.known(n) => {
                self.pos += 1;
                Ok(())
            }
            _ => self.err("expected receive argument"),
        }
    }

    fn expr(&mut self) -> R<()> {
        self.binary(0)
    }

    fn binary(&mut self, min: u8) -> R<()> {
        self.unary()?;
        loop {
            let prec = match self.peek() {
                Some(Tok::Sym("||")) => 1,
                Some(Tok::Sym("&&")) => 2,
                Some(Tok::Sym("==" | "!=")) => 3,
                Some(Tok::Sym("<" | "<=" | ">" | ">=")) => 4,
                Some(Tok::Sym("+" | "-")) => 5,
                Some(Tok::Sym("*" | "/" | "%")) => 6,
                _ => return Ok(()),
            };
            if prec < min {
                return Ok(());
            }
            self.pos += 1;
            self.binary(prec + 1)?;
        }
    }

    fn unary(&mut self) -> R<()> {
        if self.eat("!") || self.eat("-") {
            return self.unary();
        }
        match self.peek().cloned() {
            Some(Tok::Num) => {
                self.pos += 1;
                Ok(())
            }
            Some(Tok::Ident(n)) => {
                if !self.known(&n) {
                    return self.err(&format!("undeclared name {n}"));
                }
                self.pos += 1;
                Ok(())
            }
            Some(Tok::Sym("(")) => {
                self.pos += 1;
                self.expr()?;
                self.expect(")")
            }
            _ => self.err("expected expression"),
        }
    }

    /// LTL over global observables with `[]`, `<>`, `X`, `U`, `->`.
    fn ltl(&mut self) -> R<()> {
        self.ltl_unary()?;
        while self.eat("->") || self.eat("U") || self.eat("&&") || self.eat("||") || self.eat("==") || self.eat("!=") {
            self.ltl_unary()?;
        }
        Ok(())
    }

    fn ltl_unary(&mut self) -> R<()> {
        if self.eat("[]") || self.eat("<>") || self.eat("X") || self.eat("!") {
            return self.ltl_unary();
        }
        match self.peek().cloned() {
            Some(Tok::Num) => {
                self.pos += 1;
                Ok(())
            }
            Some(Tok::Ident(n)) => {
                if !(self.globals.contains(&n) || self.macros.contains_key(&n) || n == "true" || n == "false") {
                    return self.err(&format!("LTL refers to unknown symbol {n}"));
                }
                self.pos += 1;
                Ok(())
            }
            Some(Tok::Sym("(")) => {
                self.pos += 1;
                self.ltl()?;
                self.expect(")")
            }
            _ => self.err("expected LTL operand"),
        }
    }
}

/// Accept or reject `src` with the first syntax problem found.
pub fn validate(src: &str) -> Result<(), String> {
    let Lexed { toks, macros } = lex(src)?;
    let mut p = P {
        toks,
        pos: 0,
        macros,
        chans: BTreeSet::new(),
        globals: BTreeSet::new(),
        locals: BTreeSet::new(),
        procs: BTreeSet::new(),
        runs: Vec::new(),
    };
    p.spec()
}
