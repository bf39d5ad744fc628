//! Python adapter (2.x and 3.x surface syntax).

use super::ast::{AstNode, LiteralType};
use super::lexer::{lex, LexConfig, Tk};
use super::parser::{Core, PErr, PResult};
use super::{deadline, AdapterOutput, Budget, LanguageAdapter};
use crate::langid::LanguageLabel;

pub struct PythonAdapter;

impl LanguageAdapter for PythonAdapter {
    fn language(&self) -> LanguageLabel {
        LanguageLabel::Python
    }

    fn parse(&self, code: &str, budget: &Budget) -> AdapterOutput {
        let cfg = LexConfig {
            python: true,
            hash_comments: true,
            ..Default::default()
        };
        let toks = lex(code, cfg);
        let mut p = Py {
            c: Core::new(toks, deadline(budget), budget.max_depth),
            stray_indents: 0,
        };
        let statements = p.module();
        AdapterOutput {
            statements,
            attempted: p.c.attempted,
            parsed: p.c.parsed,
            errors: p.c.errors,
            error_lines: p.c.error_lines.clone(),
            timed_out: p.c.timed_out,
        }
    }
}

const RESERVED: &[&str] = &[
    "def", "class", "if", "elif", "else", "while", "for", "try", "except", "finally", "with", "return", "pass",
    "break", "continue", "import", "from", "raise", "global", "nonlocal", "del", "assert", "in", "is", "and", "or",
    "not", "as",
];

const AUGMENTED: &[&str] = &[
    "+=", "-=", "*=", "/=", "//=", "%=", "**=", ">>=", "<<=", "&=", "^=", "|=", "@=",
];

const BINARY_LEVELS: &[&[&str]] = &[
    &["|"],
    &["^"],
    &["&"],
    &["<<", ">>"],
    &["+", "-"],
    &["*", "/", "//", "%", "@"],
];

struct Py {
    c: Core,
    stray_indents: u32,
}

impl Py {
    fn module(&mut self) -> Vec<AstNode> {
        let mut out = Vec::new();
        while !self.c.at_eof() && !self.c.timed_out {
            match self.c.peek().kind {
                Tk::Newline | Tk::Indent | Tk::Dedent => {
                    self.c.bump();
                }
                _ => self.statement_into(&mut out),
            }
        }
        out
    }

    /// Parses one statement, recovering at the next logical line on error.
    fn statement_into(&mut self, out: &mut Vec<AstNode>) {
        let start = self.c.pos;
        self.c.attempted += 1;
        match self.statement() {
            Ok(nodes) => {
                self.c.parsed += 1;
                out.extend(nodes);
            }
            Err(PErr::Budget) => {}
            Err(PErr::Syntax) => {
                self.c.record_error();
                let at_line_start = self.c.pos > start && self.c.prev().map(|t| t.kind == Tk::Newline).unwrap_or(false);
                if at_line_start {
                    return;
                }
                while !matches!(self.c.peek().kind, Tk::Newline | Tk::Eof) {
                    self.c.bump();
                }
                self.c.bump();
                if self.c.pos == start {
                    self.c.bump();
                }
            }
        }
    }

    fn statement(&mut self) -> PResult<Vec<AstNode>> {
        self.c.enter()?;
        let r = self.statement_inner();
        self.c.leave();
        r
    }

    fn statement_inner(&mut self) -> PResult<Vec<AstNode>> {
        let t = self.c.peek().clone();
        if t.is_punct("@") {
            return Ok(vec![self.decorated()?]);
        }
        if t.kind == Tk::Ident {
            let node = match t.text.as_str() {
                "def" => Some(self.funcdef(Vec::new())?),
                "class" => Some(self.classdef(Vec::new())?),
                "if" => Some(self.if_stmt()?),
                "for" => Some(self.for_stmt()?),
                "while" => Some(self.while_stmt()?),
                "try" => Some(self.try_stmt()?),
                "with" => Some(self.with_stmt()?),
                "async" if matches!(self.c.peek_at(1).text.as_str(), "def" | "for" | "with") => {
                    self.c.bump();
                    return self.statement_inner();
                }
                _ => None,
            };
            if let Some(n) = node {
                return Ok(vec![n]);
            }
        }
        self.simple_stmts()
    }

    fn suite(&mut self) -> PResult<AstNode> {
        self.c.expect_punct(":")?;
        if self.c.peek().kind != Tk::Newline {
            let stmts = self.simple_stmts()?;
            return Ok(AstNode::new("block", stmts));
        }
        if self.c.peek_at(1).kind != Tk::Indent {
            return Err(PErr::Syntax);
        }
        self.c.bump();
        self.c.bump();
        let mut stmts = Vec::new();
        loop {
            if self.c.timed_out {
                break;
            }
            match self.c.peek().kind {
                Tk::Eof => break,
                Tk::Dedent => {
                    self.c.bump();
                    if self.stray_indents > 0 {
                        self.stray_indents -= 1;
                        continue;
                    }
                    break;
                }
                Tk::Indent => {
                    self.stray_indents += 1;
                    self.c.bump();
                }
                Tk::Newline => {
                    self.c.bump();
                }
                _ => self.statement_into(&mut stmts),
            }
        }
        Ok(AstNode::new("block", stmts))
    }

    fn decorated(&mut self) -> PResult<AstNode> {
        let mut decorators = Vec::new();
        while self.c.eat_punct("@") {
            let e = self.test()?;
            self.c.expect_kind(Tk::Newline)?;
            decorators.push(AstNode::new("decorator", vec![e]));
        }
        self.c.eat_ident("async");
        match self.c.peek().text.as_str() {
            "def" => self.funcdef(decorators),
            "class" => self.classdef(decorators),
            _ => Err(PErr::Syntax),
        }
    }

    fn name(&mut self) -> PResult<String> {
        let t = self.c.peek();
        if t.kind == Tk::Ident && !RESERVED.contains(&t.text.as_str()) {
            Ok(self.c.bump().text)
        } else {
            Err(PErr::Syntax)
        }
    }

    fn funcdef(&mut self, mut children: Vec<AstNode>) -> PResult<AstNode> {
        self.c.bump();
        let name = self.name()?;
        self.c.expect_punct("(")?;
        let params = self.params(")")?;
        self.c.expect_punct(")")?;
        children.push(params);
        if self.c.eat_punct("->") {
            let r = self.test()?;
            children.push(AstNode::new("returns", vec![r]));
        }
        children.push(self.suite()?);
        Ok(AstNode::named("fn_def", name, children))
    }

    /// Parameter list up to (not including) `close`.
    fn params(&mut self, close: &str) -> PResult<AstNode> {
        let mut params = Vec::new();
        while !self.c.peek().is_punct(close) {
            if self.c.eat_punct("*") || self.c.eat_punct("**") {
                if self.c.peek().kind != Tk::Ident {
                    self.c.eat_punct(",");
                    continue;
                }
            } else if self.c.eat_punct("/") {
                self.c.eat_punct(",");
                continue;
            } else if self.c.peek().is_punct("(") {
                // Python 2 tuple parameter
                let e = self.atom()?;
                params.push(AstNode::named("param", "<tuple>", vec![e]));
                if !self.c.eat_punct(",") {
                    break;
                }
                continue;
            }
            let name = self.name()?;
            let mut ch = Vec::new();
            if close == ")" && self.c.eat_punct(":") {
                ch.push(self.test()?);
            }
            if self.c.eat_punct("=") {
                ch.push(self.test()?);
            }
            params.push(AstNode::named("param", name, ch));
            if !self.c.eat_punct(",") {
                break;
            }
        }
        Ok(AstNode::new("params", params))
    }

    fn classdef(&mut self, mut children: Vec<AstNode>) -> PResult<AstNode> {
        self.c.bump();
        let name = self.name()?;
        if self.c.eat_punct("(") {
            let bases = self.arglist()?;
            children.push(AstNode::new("bases", bases));
        }
        children.push(self.suite()?);
        Ok(AstNode::named("class_def", name, children))
    }

    fn if_stmt(&mut self) -> PResult<AstNode> {
        self.c.bump();
        let cond = self.test()?;
        let body = self.suite()?;
        let mut children = vec![cond, body];
        while self.c.peek().is_ident("elif") {
            self.c.bump();
            let cond = self.test()?;
            let body = self.suite()?;
            children.push(AstNode::new("elif", vec![cond, body]));
        }
        if let Some(e) = self.else_clause()? {
            children.push(e);
        }
        Ok(AstNode::new("if", children))
    }

    fn else_clause(&mut self) -> PResult<Option<AstNode>> {
        if self.c.eat_ident("else") {
            let body = self.suite()?;
            Ok(Some(AstNode::new("else", vec![body])))
        } else {
            Ok(None)
        }
    }

    fn for_stmt(&mut self) -> PResult<AstNode> {
        self.c.bump();
        let target = self.target_list()?;
        if !self.c.eat_ident("in") {
            return Err(PErr::Syntax);
        }
        let iter = self.testlist()?;
        let body = self.suite()?;
        let mut children = vec![target, iter, body];
        children.extend(self.else_clause()?);
        Ok(AstNode::new("loop", children))
    }

    fn while_stmt(&mut self) -> PResult<AstNode> {
        self.c.bump();
        let cond = self.test()?;
        let body = self.suite()?;
        let mut children = vec![cond, body];
        children.extend(self.else_clause()?);
        Ok(AstNode::new("loop", children))
    }

    fn try_stmt(&mut self) -> PResult<AstNode> {
        self.c.bump();
        let mut children = vec![self.suite()?];
        while self.c.peek().is_ident("except") {
            self.c.bump();
            let mut ch = Vec::new();
            if !self.c.peek().is_punct(":") {
                ch.push(self.test()?);
                if self.c.eat_ident("as") || self.c.eat_punct(",") {
                    ch.push(AstNode::ident(self.name()?));
                }
            }
            ch.push(self.suite()?);
            children.push(AstNode::new("catch", ch));
        }
        children.extend(self.else_clause()?);
        if self.c.eat_ident("finally") {
            children.push(AstNode::new("finally", vec![self.suite()?]));
        }
        if children.len() == 1 {
            return Err(PErr::Syntax);
        }
        Ok(AstNode::new("try", children))
    }

    fn with_stmt(&mut self) -> PResult<AstNode> {
        self.c.bump();
        let mut children = Vec::new();
        loop {
            children.push(self.test()?);
            if self.c.eat_ident("as") {
                children.push(self.target_list()?);
            }
            if !self.c.eat_punct(",") {
                break;
            }
        }
        children.push(self.suite()?);
        Ok(AstNode::new("with", children))
    }

    fn simple_stmts(&mut self) -> PResult<Vec<AstNode>> {
        let mut out = vec![self.small_stmt()?];
        while self.c.eat_punct(";") {
            if matches!(self.c.peek().kind, Tk::Newline | Tk::Eof) {
                break;
            }
            out.push(self.small_stmt()?);
        }
        match self.c.peek().kind {
            Tk::Newline => {
                self.c.bump();
                Ok(out)
            }
            Tk::Eof => Ok(out),
            _ => Err(PErr::Syntax),
        }
    }

    fn at_line_end(&self) -> bool {
        matches!(self.c.peek().kind, Tk::Newline | Tk::Eof) || self.c.peek().is_punct(";")
    }

    fn small_stmt(&mut self) -> PResult<AstNode> {
        let t = self.c.peek().clone();
        if t.kind == Tk::Ident {
            match t.text.as_str() {
                "pass" => {
                    self.c.bump();
                    return Ok(AstNode::leaf("pass"));
                }
                "break" | "continue" => {
                    self.c.bump();
                    return Ok(AstNode::leaf(t.text));
                }
                "return" => {
                    self.c.bump();
                    let ch = if self.at_line_end() {
                        Vec::new()
                    } else {
                        vec![self.testlist()?]
                    };
                    return Ok(AstNode::new("return", ch));
                }
                "raise" => {
                    self.c.bump();
                    let mut ch = Vec::new();
                    if !self.at_line_end() {
                        ch.push(self.test()?);
                        if self.c.eat_ident("from") {
                            ch.push(self.test()?);
                        }
                        while self.c.eat_punct(",") {
                            ch.push(self.test()?);
                        }
                    }
                    return Ok(AstNode::new("throw", ch));
                }
                "global" | "nonlocal" => {
                    self.c.bump();
                    let mut ch = vec![AstNode::ident(self.name()?)];
                    while self.c.eat_punct(",") {
                        ch.push(AstNode::ident(self.name()?));
                    }
                    return Ok(AstNode::new("global", ch));
                }
                "del" => {
                    self.c.bump();
                    let e = self.testlist()?;
                    return Ok(AstNode::new("del", vec![e]));
                }
                "assert" => {
                    self.c.bump();
                    let mut ch = vec![self.test()?];
                    if self.c.eat_punct(",") {
                        ch.push(self.test()?);
                    }
                    return Ok(AstNode::new("assert", ch));
                }
                "import" => {
                    self.c.bump();
                    let mut ch = Vec::new();
                    loop {
                        let m = self.dotted()?;
                        let mut bound = AstNode::ident(m.clone());
                        if self.c.eat_ident("as") {
                            bound = AstNode::ident(self.name()?);
                        }
                        ch.push(bound);
                        if !self.c.eat_punct(",") {
                            break;
                        }
                    }
                    return Ok(AstNode::new("import", ch));
                }
                "from" => return self.import_from(),
                "print" | "exec" if !self.c.peek_at(1).is_punct("(") && !self.c.peek_at(1).is_punct("=") => {
                    // Python 2 print / exec statements
                    self.c.bump();
                    let mut ch = vec![AstNode::ident(t.text.clone())];
                    if self.c.eat_punct(">>") {
                        ch.push(self.test()?);
                        self.c.eat_punct(",");
                    }
                    while !self.at_line_end() {
                        ch.push(self.test()?);
                        if !self.c.eat_punct(",") && !self.c.eat_ident("in") {
                            break;
                        }
                    }
                    return Ok(AstNode::named("call", t.text, ch));
                }
                _ => {}
            }
        }
        self.expr_stmt()
    }

    fn dotted(&mut self) -> PResult<String> {
        let mut s = self.name()?;
        while self.c.eat_punct(".") {
            s.push('.');
            s.push_str(&self.name()?);
        }
        Ok(s)
    }

    fn import_from(&mut self) -> PResult<AstNode> {
        self.c.bump();
        let mut module = String::new();
        while self.c.peek().is_punct(".") || self.c.peek().is_punct("...") {
            module.push_str(&self.c.bump().text);
        }
        if !self.c.peek().is_ident("import") {
            module.push_str(&self.dotted()?);
        }
        if !self.c.eat_ident("import") {
            return Err(PErr::Syntax);
        }
        let mut ch = Vec::new();
        if !self.c.eat_punct("*") {
            let paren = self.c.eat_punct("(");
            loop {
                if paren && self.c.peek().is_punct(")") {
                    break;
                }
                let mut n = self.name()?;
                if self.c.eat_ident("as") {
                    n = self.name()?;
                }
                ch.push(AstNode::ident(n));
                if !self.c.eat_punct(",") {
                    break;
                }
            }
            if paren {
                self.c.expect_punct(")")?;
            }
        }
        Ok(AstNode::named("import", module, ch))
    }

    fn expr_stmt(&mut self) -> PResult<AstNode> {
        let lhs = self.testlist_star()?;
        if self.c.peek().is_punct("=") {
            let mut parts = vec![lhs];
            while self.c.eat_punct("=") {
                parts.push(if self.c.peek().is_ident("yield") {
                    self.atom()?
                } else {
                    self.testlist_star()?
                });
            }
            return Ok(AstNode::op("assign", "=", parts));
        }
        let t = self.c.peek().clone();
        if t.kind == Tk::Punct && AUGMENTED.contains(&t.text.as_str()) {
            self.c.bump();
            let rhs = self.testlist()?;
            return Ok(AstNode::op("assign", &t.text, vec![lhs, rhs]));
        }
        if self.c.eat_punct(":") {
            let ann = self.test()?;
            let mut ch = vec![lhs, ann];
            if self.c.eat_punct("=") {
                ch.push(self.testlist()?);
            }
            return Ok(AstNode::new("decl", ch));
        }
        Ok(AstNode::new("expr_stmt", vec![lhs]))
    }

    /// Comma-separated expressions; a trailing or inner comma makes a tuple.
    fn list_of(&mut self, star: bool, item: fn(&mut Self) -> PResult<AstNode>) -> PResult<AstNode> {
        let first = if star && self.c.peek().is_punct("*") {
            self.c.bump();
            AstNode::new("starred", vec![item(self)?])
        } else {
            item(self)?
        };
        if !self.c.peek().is_punct(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.c.eat_punct(",") {
            if self.at_line_end()
                || matches!(self.c.peek().text.as_str(), "=" | ")" | "]" | "}" | ":" | "in")
                || AUGMENTED.contains(&self.c.peek().text.as_str())
            {
                break;
            }
            if star && self.c.eat_punct("*") {
                items.push(AstNode::new("starred", vec![item(self)?]));
            } else {
                items.push(item(self)?);
            }
        }
        Ok(AstNode::new("tuple", items))
    }

    fn testlist(&mut self) -> PResult<AstNode> {
        self.list_of(false, Self::test)
    }

    fn testlist_star(&mut self) -> PResult<AstNode> {
        self.list_of(true, Self::test)
    }

    fn target_list(&mut self) -> PResult<AstNode> {
        self.list_of(true, Self::bitor)
    }

    fn test(&mut self) -> PResult<AstNode> {
        self.c.enter()?;
        let r = self.test_inner();
        self.c.leave();
        r
    }

    fn test_inner(&mut self) -> PResult<AstNode> {
        if self.c.peek().is_ident("lambda") {
            self.c.bump();
            let params = self.params(":")?;
            self.c.expect_punct(":")?;
            let body = self.test()?;
            return Ok(AstNode::new("lambda", vec![params, body]));
        }
        if self.c.peek().kind == Tk::Ident && self.c.peek_at(1).is_punct(":=") {
            let n = AstNode::ident(self.name()?);
            self.c.bump();
            let v = self.test()?;
            return Ok(AstNode::op("assign", ":=", vec![n, v]));
        }
        let e = self.or_test()?;
        if self.c.peek().is_ident("if") && self.c.peek_at(1).text != ":" {
            self.c.bump();
            let cond = self.or_test()?;
            if !self.c.eat_ident("else") {
                return Err(PErr::Syntax);
            }
            let other = self.test()?;
            return Ok(AstNode::new("ternary", vec![cond, e, other]));
        }
        Ok(e)
    }

    fn or_test(&mut self) -> PResult<AstNode> {
        let mut lhs = self.and_test()?;
        while self.c.eat_ident("or") {
            let rhs = self.and_test()?;
            lhs = AstNode::op("binop", "||", vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    fn and_test(&mut self) -> PResult<AstNode> {
        let mut lhs = self.not_test()?;
        while self.c.eat_ident("and") {
            let rhs = self.not_test()?;
            lhs = AstNode::op("binop", "&&", vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    fn not_test(&mut self) -> PResult<AstNode> {
        if self.c.eat_ident("not") {
            self.c.enter()?;
            let e = self.not_test();
            self.c.leave();
            return Ok(AstNode::op("unop", "!", vec![e?]));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult<AstNode> {
        let mut lhs = self.bitor()?;
        loop {
            let t = self.c.peek().clone();
            let op = match (t.kind, t.text.as_str()) {
                (Tk::Punct, "<" | ">" | "==" | ">=" | "<=" | "!=" | "<>") => {
                    self.c.bump();
                    t.text.clone()
                }
                (Tk::Ident, "in") => {
                    self.c.bump();
                    "in".to_string()
                }
                (Tk::Ident, "not") if self.c.peek_at(1).is_ident("in") => {
                    self.c.bump();
                    self.c.bump();
                    "not in".to_string()
                }
                (Tk::Ident, "is") => {
                    self.c.bump();
                    if self.c.eat_ident("not") {
                        "is not".to_string()
                    } else {
                        "is".to_string()
                    }
                }
                _ => break,
            };
            let rhs = self.bitor()?;
            lhs = AstNode::op("binop", &op, vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    fn bitor(&mut self) -> PResult<AstNode> {
        self.binary(0)
    }

    fn binary(&mut self, level: usize) -> PResult<AstNode> {
        if level == BINARY_LEVELS.len() {
            return self.factor();
        }
        let mut lhs = self.binary(level + 1)?;
        loop {
            let t = self.c.peek();
            if t.kind != Tk::Punct || !BINARY_LEVELS[level].contains(&t.text.as_str()) {
                break;
            }
            let op = self.c.bump().text;
            let rhs = self.binary(level + 1)?;
            lhs = AstNode::op("binop", &op, vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> PResult<AstNode> {
        let t = self.c.peek();
        if t.kind == Tk::Punct && matches!(t.text.as_str(), "+" | "-" | "~") {
            let op = self.c.bump().text;
            self.c.enter()?;
            let e = self.factor();
            self.c.leave();
            return Ok(AstNode::op("unop", &op, vec![e?]));
        }
        self.power()
    }

    fn power(&mut self) -> PResult<AstNode> {
        let awaited = self.c.peek().is_ident("await") && !self.c.peek_at(1).is_punct("=");
        if awaited {
            self.c.bump();
        }
        let mut base = self.atom_expr()?;
        if awaited {
            base = AstNode::new("await", vec![base]);
        }
        if self.c.eat_punct("**") {
            self.c.enter()?;
            let e = self.factor();
            self.c.leave();
            return Ok(AstNode::op("binop", "**", vec![base, e?]));
        }
        Ok(base)
    }

    fn atom_expr(&mut self) -> PResult<AstNode> {
        let mut e = self.atom()?;
        loop {
            if self.c.eat_punct("(") {
                let args = self.arglist()?;
                let name = dotted_name(&e);
                let mut ch = vec![e];
                ch.extend(args);
                e = AstNode::new("call", ch);
                e.name = name;
            } else if self.c.eat_punct("[") {
                let mut ch = vec![e];
                ch.extend(self.subscripts()?);
                e = AstNode::new("index", ch);
            } else if self.c.peek().is_punct(".") && self.c.peek_at(1).kind == Tk::Ident {
                self.c.bump();
                let attr = self.c.bump().text;
                e = AstNode::named("member", attr, vec![e]);
            } else {
                break;
            }
        }
        Ok(e)
    }

    /// Arguments after `(`, consuming the closing parenthesis.
    fn arglist(&mut self) -> PResult<Vec<AstNode>> {
        let mut args = Vec::new();
        while !self.c.eat_punct(")") {
            if self.c.eat_punct("*") || self.c.eat_punct("**") {
                args.push(AstNode::new("starred", vec![self.test()?]));
            } else if self.c.peek().kind == Tk::Ident && self.c.peek_at(1).is_punct("=") {
                let n = self.name()?;
                self.c.bump();
                args.push(AstNode::named("keyword_arg", n, vec![self.test()?]));
            } else {
                let e = self.test()?;
                if self.c.peek().is_ident("for") || self.c.peek().is_ident("async") {
                    args.push(self.comprehension(e)?);
                } else {
                    args.push(e);
                }
            }
            if !self.c.eat_punct(",") {
                self.c.expect_punct(")")?;
                break;
            }
        }
        Ok(args)
    }

    /// Subscript items after `[`, consuming the closing bracket.
    fn subscripts(&mut self) -> PResult<Vec<AstNode>> {
        let mut items = Vec::new();
        while !self.c.eat_punct("]") {
            let mut parts = Vec::new();
            let mut slice = false;
            loop {
                if self.c.eat_punct(":") {
                    slice = true;
                    continue;
                }
                if self.c.peek().is_punct(",") || self.c.peek().is_punct("]") {
                    break;
                }
                parts.push(self.test()?);
                if !self.c.peek().is_punct(":") {
                    break;
                }
            }
            if slice {
                items.push(AstNode::new("slice", parts));
            } else if let Some(p) = parts.pop() {
                items.push(p);
            } else {
                return Err(PErr::Syntax);
            }
            if !self.c.eat_punct(",") {
                self.c.expect_punct("]")?;
                break;
            }
        }
        Ok(items)
    }

    fn comprehension(&mut self, elt: AstNode) -> PResult<AstNode> {
        let mut ch = vec![elt];
        loop {
            self.c.eat_ident("async");
            if !self.c.eat_ident("for") {
                break;
            }
            ch.push(self.target_list()?);
            if !self.c.eat_ident("in") {
                return Err(PErr::Syntax);
            }
            ch.push(self.or_test()?);
            while self.c.eat_ident("if") {
                ch.push(self.or_test()?);
            }
        }
        Ok(AstNode::new("comprehension", ch))
    }

    /// Elements of a bracketed display up to `close` (consumed).
    fn display(&mut self, close: &str, kind: &str, dict_ok: bool) -> PResult<AstNode> {
        let mut items = Vec::new();
        let mut is_dict = false;
        while !self.c.eat_punct(close) {
            let item = if self.c.eat_punct("**") {
                is_dict = true;
                AstNode::new("starred", vec![self.bitor()?])
            } else if self.c.eat_punct("*") {
                AstNode::new("starred", vec![self.bitor()?])
            } else {
                let k = self.test()?;
                if dict_ok && self.c.eat_punct(":") {
                    is_dict = true;
                    let v = self.test()?;
                    AstNode::new("pair", vec![k, v])
                } else {
                    k
                }
            };
            if self.c.peek().is_ident("for") || self.c.peek().is_ident("async") {
                let comp = self.comprehension(item)?;
                self.c.expect_punct(close)?;
                return Ok(comp);
            }
            items.push(item);
            if !self.c.eat_punct(",") {
                self.c.expect_punct(close)?;
                break;
            }
        }
        let kind = if dict_ok && (is_dict || items.is_empty()) {
            "dict"
        } else {
            kind
        };
        Ok(AstNode::new(kind, items))
    }

    fn atom(&mut self) -> PResult<AstNode> {
        let t = self.c.peek().clone();
        match t.kind {
            Tk::Int => {
                self.c.bump();
                Ok(AstNode::literal(LiteralType::Int))
            }
            Tk::Float => {
                self.c.bump();
                Ok(AstNode::literal(LiteralType::Float))
            }
            Tk::Str => {
                while self.c.peek().kind == Tk::Str {
                    self.c.bump();
                }
                Ok(AstNode::literal(LiteralType::String))
            }
            Tk::Ident => match t.text.as_str() {
                "True" | "False" => {
                    self.c.bump();
                    Ok(AstNode::literal(LiteralType::Bool))
                }
                "None" => {
                    self.c.bump();
                    Ok(AstNode::literal(LiteralType::Null))
                }
                "yield" => {
                    self.c.bump();
                    let from = self.c.eat_ident("from");
                    let closes = matches!(self.c.peek().text.as_str(), ")" | "]" | "}");
                    let ch = if self.at_line_end() || closes {
                        Vec::new()
                    } else {
                        vec![self.testlist()?]
                    };
                    let mut n = AstNode::new("yield", ch);
                    if from {
                        n.name = Some("from".into());
                    }
                    Ok(n)
                }
                _ => Ok(AstNode::ident(self.name()?)),
            },
            Tk::Punct => match t.text.as_str() {
                "(" => {
                    self.c.bump();
                    self.c.enter()?;
                    let r = self.paren();
                    self.c.leave();
                    r
                }
                "[" => {
                    self.c.bump();
                    self.c.enter()?;
                    let r = self.display("]", "list", false);
                    self.c.leave();
                    r
                }
                "{" => {
                    self.c.bump();
                    self.c.enter()?;
                    let r = self.display("}", "set", true);
                    self.c.leave();
                    r
                }
                "..." => {
                    self.c.bump();
                    Ok(AstNode::ident("Ellipsis"))
                }
                _ => Err(PErr::Syntax),
            },
            _ => Err(PErr::Syntax),
        }
    }

    fn paren(&mut self) -> PResult<AstNode> {
        if self.c.eat_punct(")") {
            return Ok(AstNode::new("tuple", Vec::new()));
        }
        if self.c.peek().is_ident("yield") {
            let y = self.atom()?;
            self.c.expect_punct(")")?;
            return Ok(y);
        }
        let first = if self.c.eat_punct("*") {
            AstNode::new("starred", vec![self.bitor()?])
        } else {
            self.test()?
        };
        if self.c.peek().is_ident("for") || self.c.peek().is_ident("async") {
            let comp = self.comprehension(first)?;
            self.c.expect_punct(")")?;
            return Ok(comp);
        }
        if self.c.eat_punct(")") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.c.eat_punct(",") {
            if self.c.peek().is_punct(")") {
                break;
            }
            if self.c.eat_punct("*") {
                items.push(AstNode::new("starred", vec![self.bitor()?]));
            } else {
                items.push(self.test()?);
            }
        }
        self.c.expect_punct(")")?;
        Ok(AstNode::new("tuple", items))
    }
}

/// Dotted name of an identifier / attribute chain, e.g. `self.run`.
pub(crate) fn dotted_name(n: &AstNode) -> Option<String> {
    match n.kind.as_str() {
        "ident" => n.name.clone(),
        "member" => {
            let base = dotted_name(n.children.first()?)?;
            Some(format!("{base}.{}", n.name.as_deref()?))
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse_robust, ParseResult};
    use crate::langid::LanguageLabel;

    fn py(src: &str) -> ParseResult {
        parse_robust(src, LanguageLabel::Python)
    }

    fn kinds(pr: &ParseResult) -> Vec<String> {
        pr.root.walk().into_iter().map(|(n, _)| n.kind.clone()).collect()
    }

    #[test]
    fn empty_program() {
        let pr = py("");
        assert!(pr.root.children.is_empty());
        assert_eq!(pr.error_count, 0);
        assert_eq!(pr.sloc, 0);
        assert_eq!(pr.parsed_fraction, 1.0);
    }

    #[test]
    fn three_statements_parse_cleanly() {
        let pr = py("import socket\ns = socket.socket()\ns.connect(('10.0.0.1', 80))\n");
        assert_eq!(pr.error_count, 0);
        assert_eq!(pr.parsed_fraction, 1.0);
        assert_eq!(pr.root.children.len(), 3);
    }

    #[test]
    fn garbage_line_costs_one_statement() {
        let pr = py("x = 1\ny = 2\n$$$ !! ?\nz = x + y\nprint(z)\n");
        assert!(pr.error_count >= 1);
        assert!((pr.parsed_fraction - 0.8).abs() < 1e-12);
    }

    #[test]
    fn compound_statements() {
        let src = "\
@dec(1)
def f(a, b=2, *args, **kw) -> int:
    if a and not b:
        return a
    elif a > b:
        pass
    else:
        for i in range(10):
            while True:
                break
    try:
        x = [i for i in y if i]
    except (ValueError, KeyError) as e:
        raise
    finally:
        del x
    with open(p) as fh, lock:
        d = {k: v for k, v in fh}
    return lambda q: q if q else None

class C(Base, metaclass=M):
    x: int = 3
    def m(self):
        self.x += 1
";
        let pr = py(src);
        assert_eq!(pr.error_count, 0, "{:#?}", pr.root);
        let k = kinds(&pr);
        for want in [
            "fn_def",
            "if",
            "elif",
            "else",
            "loop",
            "try",
            "catch",
            "finally",
            "with",
            "ternary",
            "class_def",
            "assign:+=",
            "decorator",
            "lambda",
            "comprehension",
            "binop:&&",
            "unop:!",
        ] {
            assert!(k.iter().any(|x| x == want), "missing {want}");
        }
    }

    #[test]
    fn python2_syntax() {
        let pr = py("print 'hello %s' % name\nprint\nexec code in ns\ntry:\n    pass\nexcept Exception, e:\n    print >>sys.stderr, e\n");
        assert_eq!(pr.error_count, 0, "{:#?}", pr.root);
    }

    #[test]
    fn error_inside_block_is_local() {
        let pr = py("def f():\n    x = 1\n    ))(\n    return x\nf()\n");
        assert_eq!(pr.error_count, 1);
        assert_eq!(pr.statements, 5);
        let f = &pr.root.children[0];
        assert_eq!(f.kind, "fn_def");
    }

    #[test]
    fn deep_nesting_is_bounded() {
        let src = format!("x = {}1{}\n", "(".repeat(5000), ")".repeat(5000));
        let pr = py(&src);
        assert!(pr.error_count >= 1);
    }

    #[test]
    fn call_names() {
        let pr = py("self.run(1)\nos.path.join(a, b)\n");
        let calls: Vec<_> = pr
            .root
            .walk()
            .into_iter()
            .filter(|(n, _)| n.kind == "call")
            .map(|(n, _)| n.name.clone().unwrap_or_default())
            .collect();
        assert_eq!(calls, vec!["self.run", "os.path.join"]);
    }
}
