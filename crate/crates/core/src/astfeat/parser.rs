//! Cursor, budget and statement bookkeeping shared by the adapters.

use std::time::Instant;

use super::lexer::{Tk, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum PErr {
    Syntax,
    Budget,
}

pub(crate) type PResult<T> = Result<T, PErr>;

pub(crate) struct Core {
    toks: Vec<Token>,
    pub pos: usize,
    deadline: Instant,
    max_depth: usize,
    depth: usize,
    ticks: u32,
    pub timed_out: bool,
    pub attempted: u64,
    pub parsed: u64,
    pub errors: u64,
    /// Line numbers where recovery kicked in.
    pub error_lines: Vec<u32>,
}

impl Core {
    pub fn new(toks: Vec<Token>, deadline: Instant, max_depth: usize) -> Self {
        debug_assert!(toks.last().map(|t| t.kind == Tk::Eof).unwrap_or(false));
        Self {
            toks,
            pos: 0,
            deadline,
            max_depth,
            depth: 0,
            ticks: 0,
            timed_out: false,
            attempted: 0,
            parsed: 0,
            errors: 0,
            error_lines: Vec::new(),
        }
    }

    pub fn peek(&self) -> &Token {
        self.peek_at(0)
    }

    pub fn peek_at(&self, k: usize) -> &Token {
        let last = self.toks.len() - 1;
        &self.toks[(self.pos + k).min(last)]
    }

    pub fn prev(&self) -> Option<&Token> {
        self.pos.checked_sub(1).and_then(|p| self.toks.get(p))
    }

    pub fn at_eof(&self) -> bool {
        self.peek().kind == Tk::Eof
    }

    pub fn bump(&mut self) -> Token {
        let t = self.peek().clone();
        if t.kind != Tk::Eof {
            self.pos += 1;
        }
        t
    }

    pub fn eat_punct(&mut self, p: &str) -> bool {
        if self.peek().is_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn eat_ident(&mut self, w: &str) -> bool {
        if self.peek().is_ident(w) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(PErr::Syntax)
        }
    }

    pub fn expect_kind(&mut self, kind: Tk) -> PResult<Token> {
        if self.peek().kind == kind {
            Ok(self.bump())
        } else {
            Err(PErr::Syntax)
        }
    }

    /// Enters one nesting level, checking the depth cap and the deadline.
    pub fn enter(&mut self) -> PResult<()> {
        if self.timed_out {
            return Err(PErr::Budget);
        }
        self.ticks = self.ticks.wrapping_add(1);
        if self.ticks.is_multiple_of(32) && Instant::now() >= self.deadline {
            self.timed_out = true;
            return Err(PErr::Budget);
        }
        if self.depth >= self.max_depth {
            return Err(PErr::Syntax);
        }
        self.depth += 1;
        Ok(())
    }

    pub fn record_error(&mut self) {
        self.errors += 1;
        let line = self.peek().line;
        if self.error_lines.len() < 64 {
            self.error_lines.push(line);
        }
    }

    pub fn leave(&mut self) {
        self.depth -= 1;
    }
}
