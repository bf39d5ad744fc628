//! Tokenizer shared by the Python and C-family adapters.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tk {
    Ident,
    Int,
    Float,
    Str,
    Punct,
    /// Preprocessor directive line (text is the directive name).
    Preproc,
    Newline,
    Indent,
    Dedent,
    Eof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: Tk,
    pub text: String,
    pub line: u32,
}

impl Token {
    pub fn is(&self, kind: Tk, text: &str) -> bool {
        self.kind == kind && self.text == text
    }

    pub fn is_punct(&self, text: &str) -> bool {
        self.is(Tk::Punct, text)
    }

    pub fn is_ident(&self, text: &str) -> bool {
        self.is(Tk::Ident, text)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LexConfig {
    pub python: bool,
    pub dollar_idents: bool,
    pub hash_comments: bool,
    pub slash_comments: bool,
    pub preproc: bool,
    pub backtick_strings: bool,
    pub php_tags: bool,
}

const PUNCTS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "===", "!==", "**=", "//=", "...", "<=>", "??=", "->", "::", "=>", "++", "--", "&&",
    "||", "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<", ">>", "**", "//", "?.", "??",
    ".=", ":=", "@=",
];

/// Python statement keywords used to recover from unclosed brackets.
const PY_STMT_KEYWORDS: &[&str] = &[
    "def", "class", "if", "for", "while", "return", "import", "from", "try", "with", "print", "elif", "else", "except",
    "finally", "raise", "pass", "break", "continue",
];

struct Lexer<'a> {
    s: &'a [char],
    i: usize,
    line: u32,
    cfg: LexConfig,
    out: Vec<Token>,
    /// A token has been emitted on the current physical line.
    code_on_line: bool,
}

impl<'a> Lexer<'a> {
    fn peek(&self, k: usize) -> Option<char> {
        self.s.get(self.i + k).copied()
    }

    fn starts_with(&self, pat: &str) -> bool {
        pat.chars().enumerate().all(|(k, c)| self.peek(k) == Some(c))
    }

    fn push(&mut self, kind: Tk, text: String) {
        self.code_on_line = true;
        self.out.push(Token {
            kind,
            text,
            line: self.line,
        });
    }

    fn advance(&mut self, n: usize) {
        for _ in 0..n {
            if self.peek(0) == Some('\n') {
                self.line += 1;
                self.code_on_line = false;
            }
            self.i += 1;
        }
    }

    fn skip_to_eol(&mut self) {
        while let Some(c) = self.peek(0) {
            if c == '\n' {
                break;
            }
            self.i += 1;
        }
    }

    /// Lexes a quoted literal starting at the opening quote.
    fn string(&mut self, quote: char, triple: bool) {
        let start_line = self.line;
        let open = if triple { 3 } else { 1 };
        self.advance(open);
        let mut body = String::new();
        loop {
            match self.peek(0) {
                None => break,
                Some('\\') => {
                    body.push('\\');
                    self.advance(1);
                    if let Some(c) = self.peek(0) {
                        body.push(c);
                        self.advance(1);
                    }
                }
                Some(c) if c == quote => {
                    if !triple {
                        self.advance(1);
                        break;
                    }
                    if self.peek(1) == Some(quote) && self.peek(2) == Some(quote) {
                        self.advance(3);
                        break;
                    }
                    body.push(c);
                    self.advance(1);
                }
                // unterminated single-line strings end at the newline
                Some('\n') if !triple && quote != '`' => break,
                Some(c) => {
                    body.push(c);
                    self.advance(1);
                }
            }
        }
        self.code_on_line = true;
        self.out.push(Token {
            kind: Tk::Str,
            text: body,
            line: start_line,
        });
    }

    fn number(&mut self) {
        let start = self.i;
        let mut float = false;
        if self.starts_with("0x") || self.starts_with("0X") {
            self.i += 2;
            while matches!(self.peek(0), Some(c) if c.is_ascii_hexdigit() || c == '_') {
                self.i += 1;
            }
        } else {
            while let Some(c) = self.peek(0) {
                if c.is_ascii_digit() || c == '_' {
                    self.i += 1;
                } else if c == '.' && matches!(self.peek(1), Some(d) if d.is_ascii_digit()) && !float {
                    float = true;
                    self.i += 1;
                } else if (c == 'e' || c == 'E')
                    && (matches!(self.peek(1), Some(d) if d.is_ascii_digit())
                        || (matches!(self.peek(1), Some('+' | '-'))
                            && matches!(self.peek(2), Some(d) if d.is_ascii_digit())))
                {
                    float = true;
                    self.i += 2;
                } else {
                    break;
                }
            }
        }
        // suffixes: 10L, 1.5f, 0x10ULL, 3j
        while matches!(self.peek(0), Some(c) if c.is_ascii_alphabetic()) {
            if matches!(self.peek(0), Some('f' | 'F' | 'j' | 'J'))
                && !self.s[start..self.i].iter().any(|c| *c == 'x' || *c == 'X')
            {
                float = true;
            }
            self.i += 1;
        }
        let text: String = self.s[start..self.i].iter().collect();
        self.push(if float { Tk::Float } else { Tk::Int }, text);
    }

    fn ident_at(&self, k: usize) -> bool {
        matches!(self.peek(k), Some(c) if c.is_alphabetic() || c == '_')
    }

    fn run(mut self) -> Vec<Token> {
        let mut depth: i32 = 0;
        let mut line_has_tokens = false;
        let mut indents: Vec<usize> = vec![0];
        let mut at_line_start = true;
        let mut bracket_open_indent = 0usize;
        let mut cur_indent = 0usize;

        while self.i < self.s.len() {
            if self.cfg.python && at_line_start && depth == 0 {
                // measure indentation of a logical line
                let mut col = 0usize;
                let mut k = 0;
                while let Some(c) = self.peek(k) {
                    match c {
                        ' ' => col += 1,
                        '\t' => col = (col / 8 + 1) * 8,
                        '\x0c' | '\r' => {}
                        _ => break,
                    }
                    k += 1;
                }
                let next = self.peek(k);
                if next.is_none() || next == Some('\n') || next == Some('#') {
                    // blank or comment-only line
                    self.i += k;
                    if next == Some('#') {
                        self.skip_to_eol();
                    }
                    if self.peek(0) == Some('\n') {
                        self.advance(1);
                    }
                    continue;
                }
                self.i += k;
                cur_indent = col;
                let top = *indents.last().expect("non-empty");
                if col > top {
                    indents.push(col);
                    self.push(Tk::Indent, String::new());
                } else {
                    while col < *indents.last().expect("non-empty") {
                        indents.pop();
                        self.push(Tk::Dedent, String::new());
                    }
                    if col > *indents.last().expect("non-empty") {
                        indents.push(col);
                        self.push(Tk::Indent, String::new());
                    }
                }
                at_line_start = false;
                continue;
            }
            let c = self.s[self.i];
            if c == '\n' {
                if self.cfg.python {
                    if depth > 0 && self.bracket_should_close(bracket_open_indent) {
                        depth = 0;
                    }
                    if depth == 0 {
                        if line_has_tokens {
                            self.push(Tk::Newline, String::new());
                        }
                        line_has_tokens = false;
                        at_line_start = true;
                    }
                }
                self.advance(1);
                continue;
            }
            if c.is_whitespace() {
                self.i += 1;
                continue;
            }
            if c == '\\' && self.peek(1) == Some('\n') {
                self.advance(2);
                continue;
            }
            if self.cfg.php_tags && (self.starts_with("<?php") || self.starts_with("<?=")) {
                self.i += if self.starts_with("<?php") { 5 } else { 3 };
                continue;
            }
            if self.cfg.php_tags && self.starts_with("?>") {
                self.i += 2;
                continue;
            }
            if self.cfg.slash_comments && self.starts_with("//") && !self.cfg.python {
                self.skip_to_eol();
                continue;
            }
            if self.cfg.slash_comments && self.starts_with("/*") {
                self.advance(2);
                while self.i < self.s.len() && !self.starts_with("*/") {
                    self.advance(1);
                }
                self.advance(2.min(self.s.len() - self.i));
                continue;
            }
            if c == '#' {
                if self.cfg.preproc && !self.code_on_line {
                    self.i += 1;
                    while matches!(self.peek(0), Some(' ' | '\t')) {
                        self.i += 1;
                    }
                    let start = self.i;
                    while matches!(self.peek(0), Some(c) if c.is_alphanumeric() || c == '_') {
                        self.i += 1;
                    }
                    let name: String = self.s[start..self.i].iter().collect();
                    // directive body, honouring line continuations
                    while let Some(ch) = self.peek(0) {
                        if ch == '\\' && self.peek(1) == Some('\n') {
                            self.advance(2);
                        } else if ch == '\n' {
                            break;
                        } else {
                            self.i += 1;
                        }
                    }
                    self.push(Tk::Preproc, name);
                    continue;
                }
                if self.cfg.hash_comments {
                    self.skip_to_eol();
                    continue;
                }
            }
            line_has_tokens = true;
            if self.cfg.python && matches!(c, 'r' | 'b' | 'f' | 'u' | 'R' | 'B' | 'F' | 'U') {
                // string prefixes
                let mut k = 1;
                if matches!(self.peek(1), Some('r' | 'b' | 'f' | 'R' | 'B' | 'F')) {
                    k = 2;
                }
                if let Some(q @ ('"' | '\'')) = self.peek(k) {
                    self.i += k;
                    let triple = self.peek(1) == Some(q) && self.peek(2) == Some(q);
                    self.string(q, triple);
                    continue;
                }
            }
            if c == '"' || c == '\'' || (c == '`' && self.cfg.backtick_strings) {
                let triple = self.cfg.python && self.peek(1) == Some(c) && self.peek(2) == Some(c);
                self.string(c, triple);
                continue;
            }
            if c.is_ascii_digit() || (c == '.' && matches!(self.peek(1), Some(d) if d.is_ascii_digit())) {
                self.number();
                continue;
            }
            if self.ident_at(0) || (c == '$' && self.cfg.dollar_idents && self.ident_at(1)) {
                let start = self.i;
                self.i += 1;
                while matches!(self.peek(0), Some(c) if c.is_alphanumeric() || c == '_') {
                    self.i += 1;
                }
                let text: String = self.s[start..self.i].iter().collect();
                self.push(Tk::Ident, text);
                continue;
            }
            let p = PUNCTS.iter().find(|p| self.starts_with(p));
            let text = match p {
                Some(p) => {
                    self.i += p.chars().count();
                    p.to_string()
                }
                None => {
                    self.i += 1;
                    c.to_string()
                }
            };
            match text.as_str() {
                "(" | "[" | "{" => {
                    if depth == 0 {
                        bracket_open_indent = cur_indent;
                    }
                    depth += 1;
                }
                ")" | "]" | "}" => depth = (depth - 1).max(0),
                _ => {}
            }
            self.push(Tk::Punct, text);
        }
        if self.cfg.python {
            if line_has_tokens {
                self.push(Tk::Newline, String::new());
            }
            while indents.len() > 1 {
                indents.pop();
                self.push(Tk::Dedent, String::new());
            }
        }
        self.push(Tk::Eof, String::new());
        self.out
    }

    /// Inside an unclosed bracket at a newline: does the next line look like a
    /// fresh statement at or left of the opening line's indentation?
    fn bracket_should_close(&self, open_indent: usize) -> bool {
        let mut k = self.i + 1;
        let mut col = 0;
        while k < self.s.len() && (self.s[k] == ' ' || self.s[k] == '\t') {
            col += if self.s[k] == '\t' { 8 } else { 1 };
            k += 1;
        }
        if col > open_indent {
            return false;
        }
        let start = k;
        while k < self.s.len() && (self.s[k].is_alphanumeric() || self.s[k] == '_') {
            k += 1;
        }
        let word: String = self.s[start..k].iter().collect();
        PY_STMT_KEYWORDS.contains(&word.as_str())
    }
}

pub fn lex(src: &str, cfg: LexConfig) -> Vec<Token> {
    let chars: Vec<char> = src.chars().collect();
    Lexer {
        s: &chars,
        i: 0,
        line: 1,
        cfg,
        out: Vec::new(),
        code_on_line: false,
    }
    .run()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str, cfg: LexConfig) -> Vec<(Tk, String)> {
        lex(src, cfg).into_iter().map(|t| (t.kind, t.text)).collect()
    }

    #[test]
    fn python_indentation() {
        let cfg = LexConfig {
            python: true,
            hash_comments: true,
            ..Default::default()
        };
        let t: Vec<Tk> = lex("if x:\n    y = 1\n\n    # c\nz\n", cfg)
            .into_iter()
            .map(|t| t.kind)
            .collect();
        use Tk::*;
        assert_eq!(
            t,
            vec![Ident, Ident, Punct, Newline, Indent, Ident, Punct, Int, Newline, Dedent, Ident, Newline, Eof]
        );
    }

    #[test]
    fn c_tokens() {
        let cfg = LexConfig {
            slash_comments: true,
            preproc: true,
            ..Default::default()
        };
        let t = kinds("#include <stdio.h>\nx->y += 0x1fUL; // c\n/* b */ 1.5e3f", cfg);
        assert_eq!(t[0], (Tk::Preproc, "include".into()));
        assert_eq!(t[2], (Tk::Punct, "->".into()));
        assert_eq!(t[4], (Tk::Punct, "+=".into()));
        assert_eq!(t[5], (Tk::Int, "0x1fUL".into()));
        assert_eq!(t[7], (Tk::Float, "1.5e3f".into()));
    }

    #[test]
    fn unclosed_bracket_recovers_at_statement_keyword() {
        let cfg = LexConfig {
            python: true,
            hash_comments: true,
            ..Default::default()
        };
        let n = lex("x = foo(1,\nimport os\n", cfg)
            .iter()
            .filter(|t| t.kind == Tk::Newline)
            .count();
        assert_eq!(n, 2);
    }
}
