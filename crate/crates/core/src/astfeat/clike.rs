//! Adapter for the brace-and-semicolon family: C, C++, Java, JavaScript, PHP.

use serde::{Deserialize, Serialize};

use super::ast::{AstNode, LiteralType};
use super::lexer::{lex, LexConfig, Tk, Token};
use super::parser::{Core, PErr, PResult};
use super::{deadline, AdapterOutput, Budget, LanguageAdapter};
use crate::langid::LanguageLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dialect {
    C,
    Cpp,
    Java,
    JavaScript,
    Php,
}

impl Dialect {
    fn typed(self) -> bool {
        matches!(self, Dialect::C | Dialect::Cpp | Dialect::Java)
    }

    fn generics(self) -> bool {
        matches!(self, Dialect::Cpp | Dialect::Java)
    }
}

pub struct CLikeAdapter {
    dialect: Dialect,
}

impl CLikeAdapter {
    pub fn new(dialect: Dialect) -> Self {
        Self { dialect }
    }
}

impl LanguageAdapter for CLikeAdapter {
    fn language(&self) -> LanguageLabel {
        match self.dialect {
            Dialect::C => LanguageLabel::C,
            Dialect::Cpp => LanguageLabel::Cpp,
            Dialect::Java => LanguageLabel::Java,
            Dialect::JavaScript => LanguageLabel::JavaScript,
            Dialect::Php => LanguageLabel::Php,
        }
    }

    fn parse(&self, code: &str, budget: &Budget) -> AdapterOutput {
        let d = self.dialect;
        let cfg = LexConfig {
            slash_comments: true,
            preproc: matches!(d, Dialect::C | Dialect::Cpp),
            hash_comments: d == Dialect::Php,
            dollar_idents: d == Dialect::Php,
            backtick_strings: matches!(d, Dialect::JavaScript | Dialect::Php),
            php_tags: d == Dialect::Php,
            python: false,
        };
        let toks = lex(code, cfg);
        let mut p = Cl {
            c: Core::new(toks, deadline(budget), budget.max_depth),
            d,
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

/// Words that can never be part of a declaration's type or name.
const NON_DECL_WORDS: &[&str] = &[
    "return",
    "new",
    "delete",
    "throw",
    "sizeof",
    "typeof",
    "case",
    "default",
    "goto",
    "else",
    "if",
    "for",
    "foreach",
    "while",
    "do",
    "switch",
    "break",
    "continue",
    "true",
    "false",
    "null",
    "NULL",
    "nullptr",
    "this",
    "yield",
    "await",
    "instanceof",
    "in",
    "of",
    "as",
    "echo",
    "print",
    "try",
    "catch",
    "finally",
    "function",
    "class",
    "interface",
    "trait",
    "and",
    "or",
    "xor",
    "undefined",
];

const TYPE_KEYWORDS: &[&str] = &[
    "void", "char", "short", "int", "long", "float", "double", "signed", "unsigned", "bool", "_Bool", "boolean",
    "byte", "size_t", "ssize_t", "wchar_t", "const", "volatile", "struct", "union", "enum", "auto", "register",
    "static", "extern", "final",
];

const MODIFIERS: &[&str] = &[
    "public",
    "private",
    "protected",
    "static",
    "abstract",
    "final",
    "async",
    "readonly",
    "var",
];

const ASSIGN_OPS: &[&str] = &[
    "=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=", ">>>=", "**=", "??=", ".=",
];

struct Cl {
    c: Core,
    d: Dialect,
}

impl Cl {
    fn binary_levels(&self) -> Vec<Vec<&'static str>> {
        let mut lv: Vec<Vec<&'static str>> = vec![
            vec!["||", "??", "or"],
            vec!["&&", "and"],
            vec!["|"],
            vec!["^", "xor"],
            vec!["&"],
            vec!["==", "!=", "===", "!==", "<>"],
            vec!["<", ">", "<=", ">=", "<=>", "instanceof"],
            vec!["<<", ">>", ">>>"],
            vec!["+", "-"],
            vec!["*", "/", "%"],
        ];
        if self.d == Dialect::JavaScript {
            lv[6].push("in");
        }
        if self.d == Dialect::Php {
            lv[8].push(".");
        }
        if matches!(self.d, Dialect::JavaScript | Dialect::Php) {
            lv.push(vec!["**"]);
        }
        lv
    }

    fn module(&mut self) -> Vec<AstNode> {
        let mut out = Vec::new();
        while !self.c.at_eof() && !self.c.timed_out {
            if self.c.peek().is_punct("}") {
                self.c.bump();
                continue;
            }
            self.statement_into(&mut out);
        }
        out
    }

    /// Parses one statement; on error skips to `;` (consumed), a brace, or
    /// the next line, whichever comes first.
    fn statement_into(&mut self, out: &mut Vec<AstNode>) {
        if self.c.eat_punct(";") {
            return;
        }
        let start = self.c.pos;
        self.c.attempted += 1;
        match self.statement() {
            Ok(n) => {
                self.c.parsed += 1;
                out.push(n);
            }
            Err(PErr::Budget) => {}
            Err(PErr::Syntax) => {
                self.c.record_error();
                let line = self.c.peek().line;
                loop {
                    let t = self.c.peek();
                    if t.kind == Tk::Eof || t.is_punct("}") || t.is_punct("{") || t.line > line {
                        break;
                    }
                    if t.is_punct(";") {
                        self.c.bump();
                        break;
                    }
                    self.c.bump();
                }
                if self.c.pos == start {
                    self.c.bump();
                }
            }
        }
    }

    fn statement(&mut self) -> PResult<AstNode> {
        self.c.enter()?;
        let r = self.statement_inner();
        self.c.leave();
        r
    }

    /// Statement used as the body of a control construct.
    fn body(&mut self) -> PResult<AstNode> {
        if self.c.peek().is_punct("{") {
            return self.block();
        }
        let mut stmts = Vec::new();
        if self.c.eat_punct(";") {
            return Ok(AstNode::new("block", stmts));
        }
        if self.c.at_eof() || self.c.peek().is_punct("}") {
            return Err(PErr::Syntax);
        }
        self.statement_into(&mut stmts);
        if self.c.timed_out {
            return Err(PErr::Budget);
        }
        Ok(AstNode::new("block", stmts))
    }

    fn block(&mut self) -> PResult<AstNode> {
        self.c.expect_punct("{")?;
        let mut stmts = Vec::new();
        loop {
            if self.c.timed_out {
                return Err(PErr::Budget);
            }
            if self.c.eat_punct("}") {
                break;
            }
            if self.c.at_eof() {
                // unclosed brace: keep what we have
                self.c.record_error();
                break;
            }
            self.statement_into(&mut stmts);
        }
        Ok(AstNode::new("block", stmts))
    }

    fn end_stmt(&mut self) -> PResult<()> {
        if self.c.eat_punct(";") {
            return Ok(());
        }
        let t = self.c.peek();
        let asi = matches!(self.d, Dialect::JavaScript)
            && (t.kind == Tk::Eof || t.is_punct("}") || self.c.prev().map(|p| t.line > p.line).unwrap_or(true));
        if asi {
            Ok(())
        } else {
            Err(PErr::Syntax)
        }
    }

    fn statement_inner(&mut self) -> PResult<AstNode> {
        let t = self.c.peek().clone();
        if t.kind == Tk::Preproc {
            self.c.bump();
            return Ok(AstNode::named("preproc", t.text, Vec::new()));
        }
        if t.is_punct("{") {
            return self.block();
        }
        if t.is_punct("@") && matches!(self.d, Dialect::Java) {
            // annotation
            self.c.bump();
            self.c.expect_kind(Tk::Ident)?;
            while self.c.eat_punct(".") {
                self.c.expect_kind(Tk::Ident)?;
            }
            if self.c.peek().is_punct("(") {
                self.skip_balanced("(", ")")?;
            }
            return self.statement_inner();
        }
        if t.kind != Tk::Ident {
            return self.expr_or_decl();
        }
        let next = self.c.peek_at(1).clone();
        match t.text.as_str() {
            "if" => return self.if_stmt("if"),
            "while" => {
                self.c.bump();
                let cond = self.paren_expr()?;
                let body = self.body()?;
                return Ok(AstNode::new("loop", vec![cond, body]));
            }
            "do" => {
                self.c.bump();
                let body = self.body()?;
                if !self.c.eat_ident("while") {
                    return Err(PErr::Syntax);
                }
                let cond = self.paren_expr()?;
                self.end_stmt()?;
                return Ok(AstNode::new("loop", vec![body, cond]));
            }
            "for" | "foreach" => return self.for_stmt(),
            "switch" => return self.switch_stmt(),
            "try" => return self.try_stmt(),
            "return" => {
                self.c.bump();
                let ch = if self.stmt_ends_here() {
                    Vec::new()
                } else {
                    vec![self.expr()?]
                };
                self.end_stmt()?;
                return Ok(AstNode::new("return", ch));
            }
            "break" | "continue" => {
                self.c.bump();
                if matches!(self.c.peek().kind, Tk::Ident | Tk::Int) && !self.stmt_ends_here() {
                    self.c.bump();
                }
                self.end_stmt()?;
                return Ok(AstNode::leaf(t.text));
            }
            "goto" => {
                self.c.bump();
                let target = self.c.expect_kind(Tk::Ident)?.text;
                self.end_stmt()?;
                return Ok(AstNode::named("goto", target, Vec::new()));
            }
            "throw" => {
                self.c.bump();
                let e = self.expr()?;
                self.end_stmt()?;
                return Ok(AstNode::new("throw", vec![e]));
            }
            "else" | "case" | "default" | "catch" | "finally" if !next.is_punct("(") || t.text != "default" => {
                return Err(PErr::Syntax);
            }
            "function" if self.function_keyword() && (next.kind == Tk::Ident || next.is_punct("&")) => {
                return self.function_def();
            }
            "class" | "interface" | "trait" | "struct" | "union" | "enum" if self.is_type_definition() => {
                return self.type_definition();
            }
            "typedef" => {
                self.c.bump();
                if self.is_type_definition() {
                    let def = self.type_definition_body()?;
                    while !self.c.peek().is_punct(";") && !self.c.at_eof() && !self.c.peek().is_punct("}") {
                        self.c.bump();
                    }
                    self.end_stmt()?;
                    return Ok(def);
                }
                return self.expr_or_decl();
            }
            "template" if self.d == Dialect::Cpp => {
                self.c.bump();
                if self.c.peek().is_punct("<") {
                    self.skip_angles()?;
                }
                return self.statement_inner();
            }
            "namespace" if next.kind == Tk::Ident || next.is_punct("{") => {
                self.c.bump();
                while !self.c.peek().is_punct("{") && !self.c.peek().is_punct(";") && !self.c.at_eof() {
                    self.c.bump();
                }
                if self.c.peek().is_punct("{") {
                    let b = self.block()?;
                    return Ok(AstNode::new("namespace", vec![b]));
                }
                self.end_stmt()?;
                return Ok(AstNode::leaf("namespace"));
            }
            "extern" if next.kind == Tk::Str && self.c.peek_at(2).is_punct("{") => {
                self.c.bump();
                self.c.bump();
                return self.block();
            }
            "using" | "package" | "use" | "import" | "require" | "require_once" | "include" | "include_once"
                if self.is_import(&t.text, &next) =>
            {
                return self.import_stmt();
            }
            "export" if self.d == Dialect::JavaScript => {
                self.c.bump();
                self.c.eat_ident("default");
                return self.statement_inner();
            }
            "echo" | "print" if self.d == Dialect::Php => {
                self.c.bump();
                let mut ch = vec![AstNode::ident(t.text.clone())];
                loop {
                    ch.push(self.assignment()?);
                    if !self.c.eat_punct(",") {
                        break;
                    }
                }
                self.end_stmt()?;
                return Ok(AstNode::new("expr_stmt", vec![AstNode::named("call", t.text, ch)]));
            }
            "global" if self.d == Dialect::Php => {
                self.c.bump();
                let mut ch = Vec::new();
                loop {
                    ch.push(AstNode::ident(self.c.expect_kind(Tk::Ident)?.text));
                    if !self.c.eat_punct(",") {
                        break;
                    }
                }
                self.end_stmt()?;
                return Ok(AstNode::new("global", ch));
            }
            "var" | "let" | "const" if self.d == Dialect::JavaScript => {
                self.c.bump();
                let d = self.js_declarators(false)?;
                self.end_stmt()?;
                return Ok(d);
            }
            _ => {}
        }
        if self.d.typed() && (next.is_punct("(") || (t.is_punct("~") && self.d == Dialect::Cpp)) {
            // constructors, destructors and untyped definitions: `Name(...) {`
            let off = usize::from(t.is_punct("~"));
            if let Some(close) = self.matching_paren_at(1 + off) {
                let after = self.c.peek_at(close + 1);
                if after.is_punct("{") || (self.d == Dialect::Cpp && after.is_punct(":")) || after.is_ident("throws") {
                    for _ in 0..off {
                        self.c.bump();
                    }
                    let name = self.c.bump().text;
                    return self.function_after_name(name);
                }
            }
        }
        if self.d.typed() || self.d == Dialect::Php {
            // modifiers before a class-like definition
            let mut k = 0;
            while matches!(
                self.c.peek_at(k).text.as_str(),
                "public" | "private" | "protected" | "static" | "abstract" | "final" | "sealed" | "strictfp"
            ) {
                k += 1;
            }
            if k > 0
                && matches!(
                    self.c.peek_at(k).text.as_str(),
                    "class" | "interface" | "enum" | "trait" | "record"
                )
            {
                for _ in 0..k {
                    self.c.bump();
                }
                if self.is_type_definition() {
                    return self.type_definition();
                }
                return Err(PErr::Syntax);
            }
        }
        if next.is_punct(":") && !NON_DECL_WORDS.contains(&t.text.as_str()) {
            self.c.bump();
            self.c.bump();
            return Ok(AstNode::named("label", t.text, Vec::new()));
        }
        if matches!(self.d, Dialect::Php | Dialect::JavaScript) && MODIFIERS.contains(&t.text.as_str()) {
            // class members: `public function f()`, `static async m()`
            let mut k = 0;
            while matches!(self.c.peek_at(k).text.as_str(), s if MODIFIERS.contains(&s)) {
                k += 1;
            }
            if self.c.peek_at(k).is_ident("function") {
                for _ in 0..k {
                    self.c.bump();
                }
                return self.function_def();
            }
            if self.d == Dialect::Php && self.c.peek_at(k).kind == Tk::Ident && self.c.peek_at(k).text.starts_with('$')
            {
                for _ in 0..k {
                    self.c.bump();
                }
                let d = self.php_properties()?;
                self.end_stmt()?;
                return Ok(d);
            }
            if self.d == Dialect::JavaScript
                && self.c.peek_at(k).kind == Tk::Ident
                && self.c.peek_at(k + 1).is_punct("(")
            {
                for _ in 0..k {
                    self.c.bump();
                }
            }
        }
        self.expr_or_decl()
    }

    fn function_keyword(&self) -> bool {
        matches!(self.d, Dialect::JavaScript | Dialect::Php)
    }

    fn is_import(&self, word: &str, next: &Token) -> bool {
        match (self.d, word) {
            (Dialect::Cpp, "using") => true,
            (Dialect::Java, "package" | "import") => true,
            (Dialect::JavaScript, "import") => !next.is_punct("("),
            (Dialect::Php, "use" | "require" | "require_once" | "include" | "include_once") => true,
            _ => false,
        }
    }

    fn import_stmt(&mut self) -> PResult<AstNode> {
        self.c.bump();
        let mut name = None;
        let line = self.c.peek().line;
        while !self.c.peek().is_punct(";") && !self.c.at_eof() && !self.c.peek().is_punct("}") {
            let t = self.c.peek();
            if self.d == Dialect::JavaScript
                && t.line > line
                && !self
                    .c
                    .prev()
                    .map(|p| p.is_punct(",") || p.is_punct("{"))
                    .unwrap_or(false)
            {
                break;
            }
            let t = self.c.bump();
            if name.is_none() && matches!(t.kind, Tk::Ident | Tk::Str) {
                name = Some(t.text);
            }
        }
        self.end_stmt()?;
        let mut n = AstNode::new("import", Vec::new());
        n.name = name;
        Ok(n)
    }

    fn stmt_ends_here(&self) -> bool {
        let t = self.c.peek();
        t.is_punct(";")
            || t.is_punct("}")
            || t.kind == Tk::Eof
            || (self.d == Dialect::JavaScript && self.c.prev().map(|p| t.line > p.line).unwrap_or(false))
    }

    fn paren_expr(&mut self) -> PResult<AstNode> {
        self.c.expect_punct("(")?;
        let e = self.expr()?;
        self.c.expect_punct(")")?;
        Ok(e)
    }

    fn if_stmt(&mut self, kind: &str) -> PResult<AstNode> {
        self.c.bump();
        let cond = self.paren_expr()?;
        let then = self.body()?;
        let mut children = vec![cond, then];
        if self.c.peek().is_ident("elseif") {
            children.push(self.if_stmt("elif")?);
        } else if self.c.eat_ident("else") {
            if self.c.peek().is_ident("if") {
                children.push(self.if_stmt("elif")?);
            } else {
                let e = self.body()?;
                children.push(AstNode::new("else", vec![e]));
            }
        }
        Ok(AstNode::new(kind, children))
    }

    fn for_stmt(&mut self) -> PResult<AstNode> {
        self.c.bump();
        self.c.eat_ident("await");
        self.c.expect_punct("(")?;
        let mut children = Vec::new();
        loop {
            let t = self.c.peek().clone();
            if t.is_punct(")") {
                self.c.bump();
                break;
            }
            if t.kind == Tk::Eof {
                return Err(PErr::Syntax);
            }
            if t.is_punct(";") || t.is_punct(":") || t.is_punct("=>") || t.is_punct(",") {
                self.c.bump();
                continue;
            }
            if t.kind == Tk::Ident && matches!(t.text.as_str(), "of" | "as" | "in") {
                self.c.bump();
                continue;
            }
            let start = self.c.pos;
            let item = if self.d == Dialect::JavaScript && matches!(t.text.as_str(), "var" | "let" | "const") {
                self.c.bump();
                self.js_declarators(true)?
            } else if let Some(d) = self.try_declaration(true)? {
                d
            } else {
                self.expr()?
            };
            children.push(item);
            if self.c.pos == start {
                return Err(PErr::Syntax);
            }
        }
        children.push(self.body()?);
        Ok(AstNode::new("loop", children))
    }

    fn switch_stmt(&mut self) -> PResult<AstNode> {
        self.c.bump();
        let subject = self.paren_expr()?;
        self.c.expect_punct("{")?;
        let mut children = vec![subject];
        let mut current: Option<AstNode> = None;
        loop {
            if self.c.timed_out {
                return Err(PErr::Budget);
            }
            let t = self.c.peek().clone();
            if t.kind == Tk::Eof {
                self.c.record_error();
                break;
            }
            if t.is_punct("}") {
                self.c.bump();
                break;
            }
            if t.is_ident("case")
                || (t.is_ident("default") && (self.c.peek_at(1).is_punct(":") || self.c.peek_at(1).is_punct(";")))
            {
                children.extend(current.take());
                self.c.bump();
                let mut ch = Vec::new();
                if t.text == "case" {
                    match self.conditional() {
                        Ok(v) => ch.push(v),
                        Err(PErr::Budget) => return Err(PErr::Budget),
                        Err(PErr::Syntax) => self.c.record_error(),
                    }
                }
                if !self.c.eat_punct(":") && !self.c.eat_punct(";") {
                    self.c.record_error();
                }
                current = Some(AstNode::new(t.text.as_str(), ch));
                continue;
            }
            let mut stmts = Vec::new();
            self.statement_into(&mut stmts);
            match current.as_mut() {
                Some(c) => c.children.extend(stmts),
                None => children.extend(stmts),
            }
        }
        children.extend(current.take());
        Ok(AstNode::new("switch", children))
    }

    fn try_stmt(&mut self) -> PResult<AstNode> {
        self.c.bump();
        let mut children = Vec::new();
        if self.c.peek().is_punct("(") {
            // try-with-resources
            self.c.bump();
            while !self.c.eat_punct(")") {
                if self.c.at_eof() {
                    return Err(PErr::Syntax);
                }
                if self.c.eat_punct(";") {
                    continue;
                }
                let start = self.c.pos;
                let r = match self.try_declaration(true)? {
                    Some(d) => d,
                    None => self.expr()?,
                };
                children.push(r);
                if self.c.pos == start {
                    return Err(PErr::Syntax);
                }
            }
        }
        children.push(self.block()?);
        let mut handlers = 0;
        while self.c.eat_ident("catch") {
            let mut ch = Vec::new();
            if self.c.eat_punct("(") {
                ch.push(self.params_after_open()?);
            }
            ch.push(self.block()?);
            children.push(AstNode::new("catch", ch));
            handlers += 1;
        }
        if self.c.eat_ident("finally") {
            children.push(AstNode::new("finally", vec![self.block()?]));
            handlers += 1;
        }
        if handlers == 0 {
            return Err(PErr::Syntax);
        }
        Ok(AstNode::new("try", children))
    }

    fn function_def(&mut self) -> PResult<AstNode> {
        self.c.bump();
        self.c.eat_punct("&");
        self.c.eat_punct("*");
        let name = self.c.expect_kind(Tk::Ident)?.text;
        self.c.expect_punct("(")?;
        let params = self.params_after_open()?;
        if self.c.eat_punct(":") {
            // PHP return type
            self.c.eat_punct("?");
            self.c.expect_kind(Tk::Ident)?;
        }
        if self.c.peek().is_punct(";") {
            // abstract / interface method
            self.c.bump();
            return Ok(AstNode::named("decl", name, vec![params]));
        }
        let body = self.block()?;
        Ok(AstNode::named("fn_def", name, vec![params, body]))
    }

    fn is_type_definition(&self) -> bool {
        let w = self.c.peek().text.as_str();
        let class_like = matches!(w, "class" | "interface" | "trait" | "struct" | "union" | "enum");
        if !class_like {
            return false;
        }
        let mut k = 1;
        if self.c.peek_at(k).is_ident("class") {
            k += 1; // `enum class`
        }
        let t = self.c.peek_at(k);
        if t.is_punct("{") {
            return true;
        }
        if t.kind != Tk::Ident {
            return false;
        }
        let after = self.c.peek_at(k + 1);
        after.is_punct("{")
            || after.is_punct(":") && w != "struct"
            || after.is_punct(":") && self.d == Dialect::Cpp
            || after.is_punct("<")
            || matches!(after.text.as_str(), "extends" | "implements" | "final")
            || (matches!(w, "class" | "interface" | "trait") && after.kind != Tk::Punct)
    }

    fn type_definition(&mut self) -> PResult<AstNode> {
        let def = self.type_definition_body()?;
        // trailing declarators: `struct s { ... } a, *b;`
        if matches!(self.d, Dialect::C | Dialect::Cpp) {
            while !self.c.peek().is_punct(";") && !self.c.at_eof() && !self.c.peek().is_punct("}") {
                if self.c.peek().line > self.c.prev().map(|p| p.line).unwrap_or(0)
                    && !self.c.peek().is_punct(",")
                    && self.c.peek().kind == Tk::Ident
                    && self.c.peek_at(1).kind != Tk::Punct
                {
                    break;
                }
                self.c.bump();
            }
            self.c.eat_punct(";");
        } else {
            self.c.eat_punct(";");
        }
        Ok(def)
    }

    fn type_definition_body(&mut self) -> PResult<AstNode> {
        let kw = self.c.bump().text;
        self.c.eat_ident("class");
        let name = if self.c.peek().kind == Tk::Ident {
            Some(self.c.bump().text)
        } else {
            None
        };
        let mut children = Vec::new();
        let mut bases = Vec::new();
        while !self.c.peek().is_punct("{") {
            let t = self.c.peek();
            if t.kind == Tk::Eof || t.is_punct(";") || t.is_punct("}") {
                return Err(PErr::Syntax);
            }
            if t.is_punct("<") {
                self.skip_angles()?;
                continue;
            }
            let t = self.c.bump();
            if t.kind == Tk::Ident
                && !matches!(
                    t.text.as_str(),
                    "extends" | "implements" | "public" | "private" | "protected" | "virtual" | "final"
                )
            {
                bases.push(AstNode::ident(t.text));
            }
        }
        if !bases.is_empty() {
            children.push(AstNode::new("bases", bases));
        }
        if kw == "enum" && matches!(self.d, Dialect::C | Dialect::Cpp) {
            self.c.bump();
            let mut items = Vec::new();
            while !self.c.eat_punct("}") {
                if self.c.at_eof() {
                    return Err(PErr::Syntax);
                }
                items.push(self.assignment()?);
                if !self.c.eat_punct(",") {
                    self.c.expect_punct("}")?;
                    break;
                }
            }
            children.push(AstNode::new("block", items));
        } else {
            children.push(self.member_block()?);
        }
        let mut n = AstNode::new("class_def", children);
        n.name = name;
        Ok(n)
    }

    /// Class body; C++ access labels (`public:`) are skipped.
    fn member_block(&mut self) -> PResult<AstNode> {
        self.c.expect_punct("{")?;
        let mut stmts = Vec::new();
        loop {
            if self.c.timed_out {
                return Err(PErr::Budget);
            }
            if self.c.eat_punct("}") {
                break;
            }
            if self.c.at_eof() {
                self.c.record_error();
                break;
            }
            let t = self.c.peek();
            if matches!(t.text.as_str(), "public" | "private" | "protected") && self.c.peek_at(1).is_punct(":") {
                self.c.bump();
                self.c.bump();
                continue;
            }
            self.statement_into(&mut stmts);
        }
        Ok(AstNode::new("block", stmts))
    }

    fn php_properties(&mut self) -> PResult<AstNode> {
        let mut vars = Vec::new();
        loop {
            let name = self.c.expect_kind(Tk::Ident)?.text;
            let mut ch = Vec::new();
            if self.c.eat_punct("=") {
                ch.push(self.assignment()?);
            }
            vars.push(AstNode::named("var", name, ch));
            if !self.c.eat_punct(",") {
                break;
            }
        }
        Ok(AstNode::new("decl", vars))
    }

    fn js_declarators(&mut self, in_header: bool) -> PResult<AstNode> {
        let mut vars = Vec::new();
        loop {
            let t = self.c.peek().clone();
            let mut var = if t.kind == Tk::Ident && !NON_DECL_WORDS.contains(&t.text.as_str()) {
                self.c.bump();
                AstNode::named("var", t.text, Vec::new())
            } else if t.is_punct("{") || t.is_punct("[") {
                let pat = self.primary()?;
                AstNode::named("var", "<pattern>", vec![pat])
            } else {
                return Err(PErr::Syntax);
            };
            if self.c.eat_punct("=") {
                var.children.push(self.assignment()?);
            }
            vars.push(var);
            if !self.c.eat_punct(",") {
                break;
            }
        }
        let _ = in_header;
        Ok(AstNode::new("decl", vars))
    }

    /// Skips a balanced `open ... close` group starting at `open`.
    fn skip_balanced(&mut self, open: &str, close: &str) -> PResult<()> {
        self.c.expect_punct(open)?;
        let mut depth = 1;
        while depth > 0 {
            let t = self.c.bump();
            match t.kind {
                Tk::Eof => return Err(PErr::Syntax),
                Tk::Punct if t.text == open => depth += 1,
                Tk::Punct if t.text == close => depth -= 1,
                _ => {}
            }
        }
        Ok(())
    }

    fn skip_angles(&mut self) -> PResult<()> {
        match self.generic_len(self.c.pos) {
            Some(n) => {
                self.c.pos += n;
                Ok(())
            }
            None => Err(PErr::Syntax),
        }
    }

    /// Length in tokens of a generic argument list starting at `<` at `at`.
    fn generic_len(&self, at: usize) -> Option<usize> {
        let base = at - self.c.pos;
        if !self.c.peek_at(base).is_punct("<") {
            return None;
        }
        let mut depth: i32 = 0;
        let mut k = base;
        loop {
            let t = self.c.peek_at(k);
            match (t.kind, t.text.as_str()) {
                (Tk::Punct, "<") => depth += 1,
                (Tk::Punct, ">") => depth -= 1,
                (Tk::Punct, ">>") => depth -= 2,
                (Tk::Punct, ">>>") => depth -= 3,
                (Tk::Punct, "," | "::" | "." | "?" | "*" | "&" | "[" | "]" | "...") => {}
                (Tk::Ident, _) | (Tk::Int, _) => {}
                _ => return None,
            }
            k += 1;
            if depth <= 0 {
                return (depth == 0).then_some(k - base);
            }
            if k - base > 64 {
                return None;
            }
        }
    }

    /// Detects `Type [*&] name` at the cursor. Returns the token offset of the
    /// declarator name if the prefix is a declaration.
    fn declaration_name_offset(&self) -> Option<usize> {
        if !self.d.typed() && self.d != Dialect::Php {
            return None;
        }
        let mut k = 0;
        let mut words = 0;
        let mut last_ident = None;
        let mut qualified = false;
        loop {
            let t = self.c.peek_at(k);
            match t.kind {
                Tk::Ident => {
                    if NON_DECL_WORDS.contains(&t.text.as_str()) {
                        break;
                    }
                    if !qualified {
                        words += 1;
                    }
                    qualified = false;
                    last_ident = Some(k);
                    k += 1;
                    if self.d.generics() && self.c.peek_at(k).is_punct("<") {
                        match self.generic_len(self.c.pos + k) {
                            Some(n) => {
                                k += n;
                                last_ident = None;
                            }
                            None => break,
                        }
                    }
                }
                Tk::Punct => match t.text.as_str() {
                    "::" if self.d == Dialect::Cpp => {
                        qualified = true;
                        k += 1;
                    }
                    "." if self.d == Dialect::Java && last_ident == Some(k.wrapping_sub(1)) && words == 1 => {
                        qualified = true;
                        k += 1;
                    }
                    "*" | "&" | "&&" if words >= 1 && self.d != Dialect::Java => {
                        last_ident = None;
                        k += 1;
                    }
                    "[" if self.d == Dialect::Java && self.c.peek_at(k + 1).is_punct("]") && words >= 1 => {
                        last_ident = None;
                        k += 2;
                    }
                    "?" if self.d == Dialect::Php && words == 0 => k += 1,
                    _ => break,
                },
                _ => break,
            }
            if k > 48 {
                return None;
            }
        }
        let name_at = last_ident?;
        if words < 2 || name_at + 1 != k {
            return None;
        }
        let term = self.c.peek_at(k);
        let ok = term.kind == Tk::Punct && matches!(term.text.as_str(), "=" | ";" | "," | "(" | "[" | ")" | ":");
        if !ok {
            return None;
        }
        if self.d == Dialect::Php && !self.c.peek_at(name_at).text.starts_with('$') && term.text != "(" {
            return None;
        }
        Some(name_at)
    }

    fn try_declaration(&mut self, in_header: bool) -> PResult<Option<AstNode>> {
        let Some(name_at) = self.declaration_name_offset() else {
            return Ok(None);
        };
        let mut type_words = Vec::new();
        for _ in 0..name_at {
            let t = self.c.bump();
            if t.kind == Tk::Ident {
                type_words.push(t.text);
            }
        }
        let name = self.c.bump().text;
        if self.c.peek().is_punct("(") && !in_header {
            return self.function_after_name(name).map(Some);
        }
        let mut vars = Vec::new();
        let mut var_name = name;
        loop {
            let mut ch = Vec::new();
            while self.c.eat_punct("[") {
                if !self.c.eat_punct("]") {
                    ch.push(self.expr()?);
                    self.c.expect_punct("]")?;
                }
            }
            if self.c.peek().is_punct(":") && !in_header {
                self.c.bump();
                ch.push(self.conditional()?);
            }
            if self.c.eat_punct("=") {
                ch.push(self.assignment()?);
            } else if self.c.peek().is_punct("(") {
                // constructor-style initialisation: `Foo f(1, 2);`
                self.c.bump();
                ch.extend(self.args_after_open()?);
            }
            vars.push(AstNode::named("var", var_name, ch));
            if !self.c.eat_punct(",") {
                break;
            }
            while self.c.eat_punct("*") || self.c.eat_punct("&") {}
            var_name = self.c.expect_kind(Tk::Ident)?.text;
        }
        if !in_header {
            self.end_stmt()?;
        }
        let mut n = AstNode::new("decl", vars);
        n.name = type_words.last().cloned();
        Ok(Some(n))
    }

    fn function_after_name(&mut self, name: String) -> PResult<AstNode> {
        self.c.expect_punct("(")?;
        let params = self.params_after_open()?;
        // trailing qualifiers, exception specs, initialiser lists
        loop {
            let t = self.c.peek().clone();
            if t.is_punct("{") {
                let body = self.block()?;
                return Ok(AstNode::named("fn_def", name, vec![params, body]));
            }
            if t.is_punct(";") {
                self.c.bump();
                return Ok(AstNode::named("decl", name, vec![params]));
            }
            if t.kind == Tk::Eof || t.is_punct("}") {
                return Err(PErr::Syntax);
            }
            if t.is_punct("=") {
                // `= 0;`, `= default;`
                self.c.bump();
                self.c.bump();
                continue;
            }
            if t.is_punct(":")
                || t.is_punct("->")
                || t.is_punct(",")
                || t.is_punct("(")
                || t.is_punct(")")
                || t.kind == Tk::Ident
                || t.is_punct("::")
                || t.is_punct("<")
                || t.is_punct(">")
                || t.is_punct("&")
                || t.is_punct("*")
            {
                self.c.bump();
                continue;
            }
            return Err(PErr::Syntax);
        }
    }

    /// Parameters after `(`, consuming the closing parenthesis.
    fn params_after_open(&mut self) -> PResult<AstNode> {
        let mut params = Vec::new();
        loop {
            if self.c.eat_punct(")") {
                break;
            }
            let mut name: Option<String> = None;
            let mut ch = Vec::new();
            let mut n_tokens = 0;
            let mut only_void = true;
            let mut angle = 0i32;
            loop {
                let t = self.c.peek().clone();
                if t.kind == Tk::Eof {
                    return Err(PErr::Syntax);
                }
                if angle == 0 && (t.is_punct(",") || t.is_punct(")")) {
                    break;
                }
                if angle == 0 && t.is_punct("=") {
                    self.c.bump();
                    ch.push(self.assignment()?);
                    continue;
                }
                match (t.kind, t.text.as_str()) {
                    (Tk::Punct, "(") => {
                        self.skip_balanced("(", ")")?;
                    }
                    (Tk::Punct, "{") | (Tk::Punct, "[") if n_tokens == 0 || self.d == Dialect::JavaScript => {
                        let pat = self.primary()?;
                        ch.push(pat);
                        name = Some("<pattern>".into());
                    }
                    (Tk::Punct, "<") if self.d.generics() => {
                        angle += 1;
                        self.c.bump();
                    }
                    (Tk::Punct, ">") if angle > 0 => {
                        angle -= 1;
                        self.c.bump();
                    }
                    (Tk::Punct, ">>") if angle > 0 => {
                        angle = (angle - 2).max(0);
                        self.c.bump();
                    }
                    (Tk::Punct, "...") => {
                        self.c.bump();
                        if name.is_none() {
                            name = Some("...".into());
                        }
                    }
                    (Tk::Ident, w) => {
                        if w != "void" {
                            only_void = false;
                        }
                        name = Some(w.to_string());
                        self.c.bump();
                    }
                    (Tk::Punct, ";" | "{" | "}") => return Err(PErr::Syntax),
                    _ => {
                        self.c.bump();
                    }
                }
                n_tokens += 1;
                if self.c.timed_out {
                    return Err(PErr::Budget);
                }
            }
            if let Some(n) = name {
                if !(only_void && n == "void") {
                    params.push(AstNode::named("param", n, ch));
                }
            }
            if !self.c.eat_punct(",") {
                self.c.expect_punct(")")?;
                break;
            }
        }
        Ok(AstNode::new("params", params))
    }

    fn expr_or_decl(&mut self) -> PResult<AstNode> {
        if let Some(d) = self.try_declaration(false)? {
            return Ok(d);
        }
        let e = self.expr()?;
        // `name(a, b) { ... }`: K&R-style definition or a class method
        if self.c.peek().is_punct("{")
            && e.kind == "call"
            && e.children.first().map(|c| c.kind == "ident").unwrap_or(false)
        {
            let name = e.name.clone().unwrap_or_default();
            let params = e.children[1..]
                .iter()
                .map(|a| match a.kind.as_str() {
                    "ident" => Ok(AstNode::named("param", a.name.clone().unwrap_or_default(), Vec::new())),
                    "assign:=" => Ok(AstNode::named(
                        "param",
                        a.children[0].name.clone().unwrap_or_default(),
                        a.children[1..].to_vec(),
                    )),
                    _ => Err(PErr::Syntax),
                })
                .collect::<PResult<Vec<_>>>()?;
            let body = self.block()?;
            return Ok(AstNode::named(
                "fn_def",
                name,
                vec![AstNode::new("params", params), body],
            ));
        }
        self.end_stmt()?;
        Ok(AstNode::new("expr_stmt", vec![e]))
    }

    fn expr(&mut self) -> PResult<AstNode> {
        let first = self.assignment()?;
        if !self.c.peek().is_punct(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.c.eat_punct(",") {
            items.push(self.assignment()?);
        }
        Ok(AstNode::new("sequence", items))
    }

    fn assignment(&mut self) -> PResult<AstNode> {
        self.c.enter()?;
        let r = self.assignment_inner();
        self.c.leave();
        r
    }

    fn assignment_inner(&mut self) -> PResult<AstNode> {
        let lhs = self.conditional()?;
        let t = self.c.peek();
        if t.kind == Tk::Punct && ASSIGN_OPS.contains(&t.text.as_str()) {
            let op = self.c.bump().text;
            if op == "=" && self.d == Dialect::Php && self.c.eat_punct("&") {
                // PHP reference assignment
            }
            let rhs = self.assignment()?;
            return Ok(AstNode::op("assign", &op, vec![lhs, rhs]));
        }
        Ok(lhs)
    }

    fn conditional(&mut self) -> PResult<AstNode> {
        let levels = self.binary_levels();
        let cond = self.binary(&levels, 0)?;
        if self.c.eat_punct("?") {
            if self.c.eat_punct(":") {
                let b = self.assignment()?;
                return Ok(AstNode::new("ternary", vec![cond, b]));
            }
            let a = self.assignment()?;
            self.c.expect_punct(":")?;
            let b = self.assignment()?;
            return Ok(AstNode::new("ternary", vec![cond, a, b]));
        }
        Ok(cond)
    }

    fn binary(&mut self, levels: &[Vec<&'static str>], level: usize) -> PResult<AstNode> {
        if level == levels.len() {
            return self.unary();
        }
        let mut lhs = self.binary(levels, level + 1)?;
        loop {
            let t = self.c.peek();
            let is_op = match t.kind {
                Tk::Punct => levels[level].contains(&t.text.as_str()),
                Tk::Ident => {
                    matches!(t.text.as_str(), "instanceof" | "in" | "and" | "or" | "xor")
                        && levels[level].contains(&t.text.as_str())
                }
                _ => false,
            };
            if !is_op {
                break;
            }
            let mut op = self.c.bump().text;
            if op == "and" {
                op = "&&".into();
            } else if op == "or" {
                op = "||".into();
            }
            let rhs = self.binary(levels, level + 1)?;
            lhs = AstNode::op("binop", &op, vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<AstNode> {
        self.c.enter()?;
        let r = self.unary_inner();
        self.c.leave();
        r
    }

    fn unary_inner(&mut self) -> PResult<AstNode> {
        let t = self.c.peek().clone();
        if t.kind == Tk::Punct {
            match t.text.as_str() {
                "!" | "~" | "-" | "+" | "*" | "&" | "++" | "--" => {
                    self.c.bump();
                    let e = self.unary()?;
                    return Ok(AstNode::op("unop", &t.text, vec![e]));
                }
                "@" if self.d == Dialect::Php => {
                    self.c.bump();
                    return self.unary();
                }
                "(" if self.d.typed() && self.looks_like_cast() => {
                    self.skip_balanced("(", ")")?;
                    let e = self.unary()?;
                    return Ok(AstNode::new("cast", vec![e]));
                }
                _ => {}
            }
        }
        if t.kind == Tk::Ident {
            match t.text.as_str() {
                "sizeof" | "typeof" | "delete" | "void" | "await" | "clone" | "alignof"
                    if !(self.d == Dialect::C && t.text != "sizeof") || t.text == "sizeof" =>
                {
                    if t.text == "void" && self.d != Dialect::JavaScript {
                        return Err(PErr::Syntax);
                    }
                    self.c.bump();
                    if t.text == "sizeof" && self.c.peek().is_punct("(") && self.paren_holds_type() {
                        self.skip_balanced("(", ")")?;
                        return Ok(AstNode::new("sizeof", Vec::new()));
                    }
                    if t.text == "delete" && self.c.peek().is_punct("[") {
                        self.c.bump();
                        self.c.expect_punct("]")?;
                    }
                    let e = self.unary()?;
                    return Ok(AstNode::new(t.text.as_str(), vec![e]));
                }
                "new" => return self.postfix_from_new(),
                _ => {}
            }
        }
        self.postfix()
    }

    fn paren_holds_type(&self) -> bool {
        let t = self.c.peek_at(1);
        t.kind == Tk::Ident && (TYPE_KEYWORDS.contains(&t.text.as_str()) || self.c.peek_at(2).is_punct("*"))
    }

    fn looks_like_cast(&self) -> bool {
        let mut k = 1;
        let mut idents = 0;
        let mut has_type_kw = false;
        let mut has_ptr = false;
        let mut single = String::new();
        loop {
            let t = self.c.peek_at(k);
            match t.kind {
                Tk::Ident => {
                    if TYPE_KEYWORDS.contains(&t.text.as_str()) {
                        has_type_kw = true;
                    } else if NON_DECL_WORDS.contains(&t.text.as_str()) {
                        return false;
                    }
                    idents += 1;
                    single = t.text.clone();
                }
                Tk::Punct if matches!(t.text.as_str(), "*" | "&") && idents > 0 => has_ptr = true,
                Tk::Punct if t.text == "::" || (t.text == "[" && self.c.peek_at(k + 1).is_punct("]")) => {}
                Tk::Punct if t.text == "]" => {}
                Tk::Punct if t.text == ")" => break,
                _ => return false,
            }
            k += 1;
            if k > 16 {
                return false;
            }
        }
        if idents == 0 {
            return false;
        }
        let after = self.c.peek_at(k + 1);
        let operand = match after.kind {
            Tk::Ident | Tk::Int | Tk::Float | Tk::Str => true,
            Tk::Punct => matches!(after.text.as_str(), "(" | "!" | "~" | "&" | "*" | "-"),
            _ => false,
        };
        if !operand {
            return false;
        }
        if has_type_kw || has_ptr {
            return true;
        }
        if idents != 1 {
            return false;
        }
        let typedef_like = single.ends_with("_t")
            || (single.len() >= 2
                && single
                    .chars()
                    .all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
                && single.chars().any(|c| c.is_ascii_uppercase()));
        let class_like = self.d == Dialect::Java
            && single.chars().next().map(|c| c.is_ascii_uppercase()).unwrap_or(false)
            && !matches!(after.text.as_str(), "-" | "*" | "&");
        typedef_like || class_like
    }

    fn postfix_from_new(&mut self) -> PResult<AstNode> {
        self.c.bump();
        let mut name = String::new();
        if self.c.peek().kind == Tk::Ident {
            name = self.c.bump().text;
            while self.c.peek().is_punct(".") || self.c.peek().is_punct("::") || self.c.peek().is_punct("\\") {
                self.c.bump();
                name = self.c.expect_kind(Tk::Ident)?.text;
            }
        } else if self.c.peek().is_punct("(") {
            let e = self.paren_group()?;
            return Ok(AstNode::new("new", vec![e]));
        } else if !self.c.peek().is_ident("class") {
            return Err(PErr::Syntax);
        }
        if self.d.generics() && self.c.peek().is_punct("<") {
            self.skip_angles()?;
        }
        let mut ch = Vec::new();
        if self.c.eat_punct("(") {
            ch.extend(self.args_after_open()?);
        }
        while self.c.eat_punct("[") {
            if !self.c.eat_punct("]") {
                ch.push(self.expr()?);
                self.c.expect_punct("]")?;
            }
        }
        if self.c.peek().is_punct("{") {
            // anonymous class body or array initialiser
            if self.d == Dialect::Java && ch.iter().all(|c| c.kind != "lit:int") {
                ch.push(self.member_block()?);
            } else {
                ch.push(self.primary()?);
            }
        }
        let mut n = AstNode::new("new", ch);
        n.name = Some(name);
        self.postfix_ops(n)
    }

    fn postfix(&mut self) -> PResult<AstNode> {
        let p = self.primary()?;
        self.postfix_ops(p)
    }

    fn postfix_ops(&mut self, mut e: AstNode) -> PResult<AstNode> {
        loop {
            let t = self.c.peek().clone();
            if t.kind != Tk::Punct {
                break;
            }
            match t.text.as_str() {
                "(" => {
                    self.c.bump();
                    let args = self.args_after_open()?;
                    let name = dotted_name(&e);
                    let mut ch = vec![e];
                    ch.extend(args);
                    e = AstNode::new("call", ch);
                    e.name = name;
                }
                "[" => {
                    self.c.bump();
                    let mut ch = vec![e];
                    if !self.c.peek().is_punct("]") {
                        ch.push(self.expr()?);
                    }
                    self.c.expect_punct("]")?;
                    e = AstNode::new("index", ch);
                }
                "." | "->" | "?." | "::" => {
                    if t.text == "." && self.d == Dialect::Php {
                        break; // concatenation
                    }
                    self.c.bump();
                    let m = self.c.peek().clone();
                    if m.kind == Tk::Ident {
                        self.c.bump();
                        e = AstNode::named("member", m.text, vec![e]);
                    } else if t.text == "?." && (m.is_punct("(") || m.is_punct("[")) {
                        continue;
                    } else if t.text == "->" && m.is_punct("{") {
                        self.c.bump();
                        let inner = self.expr()?;
                        self.c.expect_punct("}")?;
                        e = AstNode::new("member", vec![e, inner]);
                    } else {
                        return Err(PErr::Syntax);
                    }
                }
                "++" | "--" => {
                    self.c.bump();
                    e = AstNode::op("unop", &t.text, vec![e]);
                }
                _ => break,
            }
        }
        Ok(e)
    }

    /// Call arguments after `(`, consuming the closing parenthesis.
    fn args_after_open(&mut self) -> PResult<Vec<AstNode>> {
        let mut args = Vec::new();
        while !self.c.eat_punct(")") {
            if self.c.eat_punct("...") {
                args.push(AstNode::new("starred", vec![self.assignment()?]));
            } else if self.d == Dialect::Php
                && self.c.peek().kind == Tk::Ident
                && self.c.peek_at(1).is_punct(":")
                && !self.c.peek_at(1).is_punct("::")
            {
                let n = self.c.bump().text;
                self.c.bump();
                args.push(AstNode::named("keyword_arg", n, vec![self.assignment()?]));
            } else {
                args.push(self.assignment()?);
            }
            if !self.c.eat_punct(",") {
                self.c.expect_punct(")")?;
                break;
            }
        }
        Ok(args)
    }

    fn lambda_body(&mut self) -> PResult<AstNode> {
        if self.c.peek().is_punct("{") {
            self.block()
        } else {
            self.assignment()
        }
    }

    /// Offset of the `)` matching the `(` at the cursor, if balanced nearby.
    fn matching_paren(&self) -> Option<usize> {
        self.matching_paren_at(0)
    }

    fn matching_paren_at(&self, start: usize) -> Option<usize> {
        if !self.c.peek_at(start).is_punct("(") {
            return None;
        }
        let mut depth = 0;
        for k in start..start + 512 {
            let t = self.c.peek_at(k);
            match (t.kind, t.text.as_str()) {
                (Tk::Eof, _) => return None,
                (Tk::Punct, "(") => depth += 1,
                (Tk::Punct, ")") => {
                    depth -= 1;
                    if depth == 0 {
                        return Some(k);
                    }
                }
                _ => {}
            }
        }
        None
    }

    fn paren_group(&mut self) -> PResult<AstNode> {
        self.c.expect_punct("(")?;
        let e = self.expr()?;
        self.c.expect_punct(")")?;
        Ok(e)
    }

    fn primary(&mut self) -> PResult<AstNode> {
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
                let single = t.text.chars().count() == 1;
                self.c.bump();
                while self.c.peek().kind == Tk::Str {
                    self.c.bump();
                }
                let _ = single;
                Ok(AstNode::literal(LiteralType::String))
            }
            Tk::Ident => self.primary_ident(t),
            Tk::Punct => match t.text.as_str() {
                "(" => {
                    let arrow = self.matching_paren().map(|k| {
                        let after = self.c.peek_at(k + 1);
                        (self.d == Dialect::JavaScript && after.is_punct("=>"))
                            || (self.d == Dialect::Java && after.is_punct("->"))
                    });
                    if arrow == Some(true) {
                        self.c.bump();
                        let params = self.params_after_open()?;
                        self.c.bump();
                        let body = self.lambda_body()?;
                        return Ok(AstNode::new("lambda", vec![params, body]));
                    }
                    self.c.enter()?;
                    let r = self.paren_group();
                    self.c.leave();
                    r
                }
                "[" => {
                    if self.d == Dialect::Cpp {
                        // lambda: [captures](params) { body }
                        self.skip_balanced("[", "]")?;
                        let mut ch = Vec::new();
                        if self.c.eat_punct("(") {
                            ch.push(self.params_after_open()?);
                        }
                        while !self.c.peek().is_punct("{") {
                            if self.c.at_eof() || self.c.peek().is_punct(";") {
                                return Err(PErr::Syntax);
                            }
                            self.c.bump();
                        }
                        ch.push(self.block()?);
                        return Ok(AstNode::new("lambda", ch));
                    }
                    self.c.bump();
                    self.c.enter()?;
                    let r = self.array_items("]");
                    self.c.leave();
                    Ok(AstNode::new("list", r?))
                }
                "{" => {
                    self.c.bump();
                    self.c.enter()?;
                    let r = self.array_items("}");
                    self.c.leave();
                    Ok(AstNode::new("dict", r?))
                }
                "/" | "/=" if self.d == Dialect::JavaScript => {
                    let line = t.line;
                    self.c.bump();
                    loop {
                        let n = self.c.peek();
                        if n.kind == Tk::Eof || n.line != line {
                            return Err(PErr::Syntax);
                        }
                        if n.is_punct("/") || n.is_punct("/=") {
                            self.c.bump();
                            break;
                        }
                        self.c.bump();
                    }
                    if self.c.peek().kind == Tk::Ident
                        && self.c.peek().line == line
                        && self.c.peek().text.chars().all(|c| "gimsuyd".contains(c))
                    {
                        self.c.bump();
                    }
                    Ok(AstNode::literal(LiteralType::Regex))
                }
                "..." => {
                    self.c.bump();
                    Ok(AstNode::new("starred", vec![self.assignment()?]))
                }
                "." if self.d == Dialect::C || self.d == Dialect::Cpp => {
                    // designated initialiser `.field = v`
                    self.c.bump();
                    let f = self.c.expect_kind(Tk::Ident)?.text;
                    Ok(AstNode::named("member", f, Vec::new()))
                }
                "\\" if self.d == Dialect::Php => {
                    self.c.bump();
                    self.primary()
                }
                "&" if self.d == Dialect::Php => {
                    self.c.bump();
                    self.primary()
                }
                _ => Err(PErr::Syntax),
            },
            _ => Err(PErr::Syntax),
        }
    }

    fn primary_ident(&mut self, t: Token) -> PResult<AstNode> {
        let w = t.text.as_str();
        match w {
            "true" | "false" | "TRUE" | "FALSE" | "True" | "False" => {
                self.c.bump();
                return Ok(AstNode::literal(LiteralType::Bool));
            }
            "null" | "NULL" | "nullptr" | "undefined" | "None" => {
                self.c.bump();
                return Ok(AstNode::literal(LiteralType::Null));
            }
            "function" | "fn" if self.function_keyword() && (w == "function" || self.d == Dialect::Php) => {
                self.c.bump();
                self.c.eat_punct("&");
                self.c.eat_punct("*");
                if self.c.peek().kind == Tk::Ident {
                    self.c.bump();
                }
                self.c.expect_punct("(")?;
                let params = self.params_after_open()?;
                if self.c.eat_ident("use") {
                    self.c.expect_punct("(")?;
                    self.params_after_open()?;
                }
                if self.c.eat_punct(":") {
                    self.c.eat_punct("?");
                    self.c.expect_kind(Tk::Ident)?;
                }
                let body = if self.c.eat_punct("=>") {
                    self.assignment()?
                } else {
                    self.block()?
                };
                return Ok(AstNode::new("lambda", vec![params, body]));
            }
            "async"
                if self.d == Dialect::JavaScript
                    && !self.c.peek_at(1).is_punct("=")
                    && !self.c.peek_at(1).is_punct(";") =>
            {
                self.c.bump();
                return self.primary();
            }
            "array" | "list" | "isset" | "empty" | "unset"
                if self.d == Dialect::Php && self.c.peek_at(1).is_punct("(") =>
            {
                self.c.bump();
                return Ok(AstNode::ident(w));
            }
            _ => {}
        }
        if NON_DECL_WORDS.contains(&w) && !matches!(w, "this" | "print" | "of" | "as") {
            return Err(PErr::Syntax);
        }
        if matches!(
            w,
            "if" | "while" | "for" | "return" | "else" | "switch" | "case" | "do" | "break" | "continue" | "goto"
        ) {
            return Err(PErr::Syntax);
        }
        self.c.bump();
        if self.d == Dialect::JavaScript && self.c.peek().is_punct("=>") {
            self.c.bump();
            let params = AstNode::new("params", vec![AstNode::named("param", t.text, Vec::new())]);
            let body = self.lambda_body()?;
            return Ok(AstNode::new("lambda", vec![params, body]));
        }
        if self.d == Dialect::Java && self.c.peek().is_punct("->") {
            self.c.bump();
            let params = AstNode::new("params", vec![AstNode::named("param", t.text, Vec::new())]);
            let body = self.lambda_body()?;
            return Ok(AstNode::new("lambda", vec![params, body]));
        }
        Ok(AstNode::ident(t.text))
    }

    /// Items of an array / object / initialiser literal up to `close`.
    fn array_items(&mut self, close: &str) -> PResult<Vec<AstNode>> {
        let mut items = Vec::new();
        while !self.c.eat_punct(close) {
            if self.c.eat_punct(",") {
                continue; // hole
            }
            // JS shorthand methods `name(args) { ... }`
            let k = self.assignment()?;
            let item = if self.c.eat_punct(":") || self.c.eat_punct("=>") {
                let v = self.assignment()?;
                AstNode::new("pair", vec![k, v])
            } else if close == "}" && self.c.peek().is_punct("{") && k.kind == "call" {
                let body = self.block()?;
                AstNode::new("lambda", vec![k, body])
            } else {
                k
            };
            items.push(item);
            if !self.c.eat_punct(",") {
                self.c.expect_punct(close)?;
                break;
            }
        }
        Ok(items)
    }
}

/// Dotted callee name, normalising `->`, `::` and `?.` member access to `.`.
fn dotted_name(n: &AstNode) -> Option<String> {
    super::python::dotted_name(n)
}
