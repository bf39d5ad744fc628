//! Template-based source generator for the PoC languages.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::words::{pick_words, IDENTS};
use crate::langid::LanguageLabel;

enum Stmt {
    Assign(String, String, i64),
    Call(String, String),
    Print(String),
    If(String, i64, Vec<Stmt>),
    Loop(String, i64, Vec<Stmt>),
    Comment(String),
}

fn block(rng: &mut ChaCha8Rng, vars: &mut Vec<String>, len: usize, nest: usize, words: &[&str]) -> Vec<Stmt> {
    let mut out = Vec::new();
    for k in 0..len {
        let v = vars.choose(rng).expect("vars").clone();
        let choice = rng.gen_range(0..10);
        let s = match choice {
            0..=3 => {
                let name = IDENTS.choose(rng).expect("idents").to_string();
                if !vars.contains(&name) {
                    vars.push(name.clone());
                }
                Stmt::Assign(name, v, rng.gen_range(1..100))
            }
            4..=5 => Stmt::Call(IDENTS.choose(rng).expect("idents").to_string(), v),
            6 => Stmt::Print(v),
            7 if k > 0 && !words.is_empty() => Stmt::Comment(pick_words(rng, words, 4).join(" ")),
            _ => Stmt::Print(v),
        };
        out.push(s);
        if nest > 0 && k == len / 2 {
            let inner = block(rng, vars, 2, nest - 1, words);
            let v = vars.choose(rng).expect("vars").clone();
            out.push(if rng.gen_bool(0.5) {
                Stmt::If(v, rng.gen_range(1..50), inner)
            } else {
                Stmt::Loop(format!("i{nest}"), rng.gen_range(2..9), inner)
            });
        }
    }
    out
}

struct Out {
    lines: Vec<String>,
    unit: &'static str,
}

impl Out {
    fn line(&mut self, depth: usize, s: impl AsRef<str>) {
        self.lines.push(format!("{}{}", self.unit.repeat(depth), s.as_ref()));
    }
}

fn var(lang: LanguageLabel, v: &str) -> String {
    match lang {
        LanguageLabel::Php | LanguageLabel::Perl | LanguageLabel::Shell => format!("${v}"),
        _ => v.to_string(),
    }
}

fn comment_prefix(lang: LanguageLabel) -> &'static str {
    match lang {
        LanguageLabel::Python | LanguageLabel::Ruby | LanguageLabel::Perl | LanguageLabel::Shell => "# ",
        LanguageLabel::VisualBasic => "' ",
        _ => "// ",
    }
}

fn render(lang: LanguageLabel, stmts: &[Stmt], depth: usize, o: &mut Out) {
    use LanguageLabel as L;
    for s in stmts {
        match s {
            Stmt::Assign(a, b, n) => {
                let (a, b) = (var(lang, a), var(lang, b));
                match lang {
                    L::Python | L::Ruby => o.line(depth, format!("{a} = {b} + {n}")),
                    L::C | L::Cpp | L::Java => o.line(depth, format!("{a} = {b} + {n};")),
                    L::JavaScript => o.line(depth, format!("{a} = {b} + {n};")),
                    L::Php => o.line(depth, format!("{a} = {b} + {n};")),
                    L::Perl => o.line(depth, format!("my {a} = {b} + {n};")),
                    L::Shell => o.line(depth, format!("{}=$(( {b} + {n} ))", &a[1..])),
                    _ => o.line(depth, format!("{a} = {b} + {n}")),
                }
            }
            Stmt::Call(f, x) => {
                let x = var(lang, x);
                match lang {
                    L::Python | L::Ruby => o.line(depth, format!("{f}({x})")),
                    L::Shell => o.line(depth, format!("{f} \"{x}\"")),
                    L::Perl => o.line(depth, format!("{f}({x});")),
                    _ => o.line(depth, format!("{f}({x});")),
                }
            }
            Stmt::Print(x) => {
                let x = var(lang, x);
                match lang {
                    L::Python => o.line(depth, format!("print({x})")),
                    L::Ruby => o.line(depth, format!("puts {x}")),
                    L::C => o.line(depth, format!("printf(\"%d\\n\", {x});")),
                    L::Cpp => o.line(depth, format!("std::cout << {x} << std::endl;")),
                    L::Java => o.line(depth, format!("System.out.println({x});")),
                    L::JavaScript => o.line(depth, format!("console.log({x});")),
                    L::Php => o.line(depth, format!("echo {x};")),
                    L::Perl => o.line(depth, format!("print \"{x}\\n\";")),
                    L::Shell => o.line(depth, format!("echo \"{x}\"")),
                    _ => o.line(depth, x),
                }
            }
            Stmt::Comment(t) => o.line(depth, format!("{}{t}", comment_prefix(lang))),
            Stmt::If(v, n, body) => {
                let v = var(lang, v);
                match lang {
                    L::Python => o.line(depth, format!("if {v} > {n}:")),
                    L::Ruby => o.line(depth, format!("if {v} > {n}")),
                    L::Shell => o.line(depth, format!("if [ \"{v}\" -gt {n} ]; then")),
                    _ => o.line(depth, format!("if ({v} > {n}) {{")),
                }
                render(lang, body, depth + 1, o);
                match lang {
                    L::Python => {}
                    L::Ruby => o.line(depth, "end"),
                    L::Shell => o.line(depth, "fi"),
                    _ => o.line(depth, "}"),
                }
            }
            Stmt::Loop(i, n, body) => {
                match lang {
                    L::Python => o.line(depth, format!("for {i} in range({n}):")),
                    L::Ruby => o.line(depth, format!("{n}.times do |{i}|")),
                    L::Shell => o.line(depth, format!("for {i} in $(seq 1 {n}); do")),
                    L::Perl => o.line(depth, format!("for my ${i} (0..{n}) {{")),
                    L::Php => o.line(depth, format!("for (${i} = 0; ${i} < {n}; ${i}++) {{")),
                    L::JavaScript => o.line(depth, format!("for (let {i} = 0; {i} < {n}; {i}++) {{")),
                    _ => o.line(depth, format!("for (int {i} = 0; {i} < {n}; {i}++) {{")),
                }
                render(lang, body, depth + 1, o);
                match lang {
                    L::Python => {}
                    L::Ruby => o.line(depth, "end"),
                    L::Shell => o.line(depth, "done"),
                    _ => o.line(depth, "}"),
                }
            }
        }
    }
}

/// A small program in `lang` whose main function has `len` statements and
/// `nest` levels of nested control blocks. Comment lines draw from `words`.
/// For [`LanguageLabel::Text`] a paragraph of `words` is returned.
pub fn program(rng: &mut ChaCha8Rng, lang: LanguageLabel, len: usize, nest: usize, words: &[&str]) -> String {
    use LanguageLabel as L;
    if lang.is_prose()
        || !matches!(
            lang,
            L::Python | L::Ruby | L::C | L::Cpp | L::Java | L::JavaScript | L::Php | L::Perl | L::Shell
        )
    {
        let mut s = pick_words(rng, words, len.max(8) * 3).join(" ");
        s.push('\n');
        return s;
    }
    let mut vars = vec!["target".to_string(), "port".to_string()];
    let body = block(rng, &mut vars, len.max(2), nest, words);
    let fname = IDENTS.choose(rng).expect("idents").to_string();
    let unit = if lang == L::Python { "    " } else { "  " };
    let mut o = Out {
        lines: Vec::new(),
        unit,
    };
    let decls: Vec<String> = vars
        .iter()
        .filter(|v| *v != "target" && *v != "port")
        .cloned()
        .collect();
    match lang {
        L::Python => {
            o.line(0, "import socket");
            o.line(0, "import sys");
            o.line(0, "");
            o.line(0, format!("def {fname}(target, port):"));
            for d in &decls {
                o.line(1, format!("{d} = 0"));
            }
            render(lang, &body, 1, &mut o);
            o.line(1, "return port");
            o.line(0, "");
            o.line(0, "if __name__ == '__main__':");
            o.line(1, format!("{fname}(sys.argv[1], 80)"));
        }
        L::Ruby => {
            o.line(0, "require 'socket'");
            o.line(0, "");
            o.line(0, format!("def {fname}(target, port)"));
            for d in &decls {
                o.line(1, format!("{d} = 0"));
            }
            render(lang, &body, 1, &mut o);
            o.line(1, "port");
            o.line(0, "end");
            o.line(0, "");
            o.line(0, format!("{fname}(ARGV[0], 80)"));
        }
        L::C | L::Cpp => {
            if lang == L::C {
                o.line(0, "#include <stdio.h>");
                o.line(0, "#include <string.h>");
            } else {
                o.line(0, "#include <iostream>");
                o.line(0, "#include <string>");
            }
            o.line(0, "");
            for f in IDENTS {
                if body_calls(&body, f) {
                    o.line(0, format!("void {f}(int v) {{ (void)v; }}"));
                }
            }
            o.line(0, format!("int {fname}(int target, int port) {{"));
            for d in &decls {
                o.line(1, format!("int {d} = 0;"));
            }
            render(lang, &body, 1, &mut o);
            o.line(1, "return port;");
            o.line(0, "}");
            o.line(0, "");
            o.line(0, "int main(int argc, char **argv) {");
            o.line(1, format!("return {fname}(argc, 80);"));
            o.line(0, "}");
        }
        L::Java => {
            o.line(0, "import java.net.Socket;");
            o.line(0, "");
            o.line(0, "public class Exploit {");
            for f in IDENTS {
                if body_calls(&body, f) {
                    o.line(1, format!("static void {f}(int v) {{ }}"));
                }
            }
            o.line(1, format!("static int {fname}(int target, int port) {{"));
            for d in &decls {
                o.line(2, format!("int {d} = 0;"));
            }
            render(lang, &body, 2, &mut o);
            o.line(2, "return port;");
            o.line(1, "}");
            o.line(0, "");
            o.line(1, "public static void main(String[] args) {");
            o.line(2, format!("{fname}(args.length, 80);"));
            o.line(1, "}");
            o.line(0, "}");
        }
        L::JavaScript => {
            o.line(0, "const net = require('net');");
            o.line(0, "");
            o.line(0, format!("function {fname}(target, port) {{"));
            for d in &decls {
                o.line(1, format!("let {d} = 0;"));
            }
            render(lang, &body, 1, &mut o);
            o.line(1, "return port;");
            o.line(0, "}");
            o.line(0, "");
            o.line(0, format!("{fname}(process.argv[2], 80);"));
        }
        L::Php => {
            o.line(0, "<?php");
            o.line(0, format!("function {fname}($target, $port) {{"));
            for d in &decls {
                o.line(1, format!("${d} = 0;"));
            }
            render(lang, &body, 1, &mut o);
            o.line(1, "return $port;");
            o.line(0, "}");
            o.line(0, format!("{fname}($argv[1], 80);"));
            o.line(0, "?>");
        }
        L::Perl => {
            o.line(0, "#!/usr/bin/perl");
            o.line(0, "use strict;");
            o.line(0, "use IO::Socket;");
            o.line(0, "");
            o.line(0, format!("sub {fname} {{"));
            o.line(1, "my ($target, $port) = @_;");
            render(lang, &body, 1, &mut o);
            o.line(1, "return $port;");
            o.line(0, "}");
            o.line(0, format!("{fname}($ARGV[0], 80);"));
        }
        L::Shell => {
            o.line(0, "#!/bin/bash");
            o.line(0, "target=$1");
            o.line(0, "port=80");
            o.line(0, format!("{fname}() {{"));
            render(lang, &body, 1, &mut o);
            o.line(0, "}");
            o.line(0, format!("{fname} \"$target\""));
        }
        _ => unreachable!("prose handled above"),
    }
    let mut s = o.lines.join("\n");
    s.push('\n');
    s
}

fn body_calls(stmts: &[Stmt], f: &str) -> bool {
    stmts.iter().any(|s| match s {
        Stmt::Call(g, _) => g == f,
        Stmt::If(_, _, b) | Stmt::Loop(_, _, b) => body_calls(b, f),
        _ => false,
    })
}

/// Prepends a comment header in `lang`'s syntax.
pub fn with_header(lang: LanguageLabel, header: &str, code: &str) -> String {
    if lang.is_prose() || header.is_empty() {
        return format!("{header}\n{code}");
    }
    let p = comment_prefix(lang);
    let lines: Vec<String> = header.lines().map(|l| format!("{p}{l}")).collect();
    match lang {
        // keep the opening tag / shebang first
        LanguageLabel::Php => code.replacen("<?php\n", &format!("<?php\n{}\n", lines.join("\n")), 1),
        LanguageLabel::Perl | LanguageLabel::Shell => {
            let (first, rest) = code.split_once('\n').unwrap_or((code, ""));
            format!("{first}\n{}\n{rest}", lines.join("\n"))
        }
        _ => format!("{}\n{code}", lines.join("\n")),
    }
}

pub fn extension(lang: LanguageLabel) -> Option<&'static str> {
    use LanguageLabel as L;
    Some(match lang {
        L::Python => "py",
        L::Ruby => "rb",
        L::C => "c",
        L::Cpp => "cpp",
        L::Java => "java",
        L::JavaScript => "js",
        L::Php => "php",
        L::Perl => "pl",
        L::Shell => "sh",
        L::Text => "txt",
        L::Html => "html",
        L::VisualBasic => "vb",
        L::None => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::astfeat::parse_robust;
    use crate::synth::words::background_words;
    use rand::SeedableRng;

    #[test]
    fn generated_programs_parse_cleanly() {
        let words = background_words();
        let w: Vec<&str> = words.iter().map(String::as_str).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for lang in [
            LanguageLabel::Python,
            LanguageLabel::C,
            LanguageLabel::Cpp,
            LanguageLabel::Java,
            LanguageLabel::JavaScript,
            LanguageLabel::Php,
        ] {
            for nest in 0..4 {
                let code = with_header(
                    lang,
                    "proof of concept\nby someone",
                    &program(&mut rng, lang, 8, nest, &w),
                );
                let sep = crate::langid::separate(&code, lang, 1.0);
                let pr = parse_robust(&sep.code, lang);
                assert_eq!(pr.error_count, 0, "{lang:?} nest {nest}: {:?}\n{code}", pr.error_lines);
            }
        }
    }

    #[test]
    fn nesting_raises_cyclomatic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let flat = program(&mut rng, LanguageLabel::C, 6, 0, &[]);
        let deep = program(&mut rng, LanguageLabel::C, 6, 3, &[]);
        let cc = |s: &str| crate::astfeat::cyclomatic(&parse_robust(s, LanguageLabel::C));
        assert!(cc(&deep) > cc(&flat));
    }
}
