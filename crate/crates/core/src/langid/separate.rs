use serde::{Deserialize, Serialize};

use super::LanguageLabel;

/// A PoC split into code and comment/prose text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatedPoC {
    pub language: LanguageLabel,
    pub code: String,
    /// Comment bodies (without delimiters), one per line.
    pub comments: String,
    pub confidence: f64,
    /// A block comment ran to end of file without being closed.
    pub unbalanced_comment: bool,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum HashRule {
    None,
    Anywhere,
    /// `#` not preceded by `$` (Perl's `$#array`).
    NotAfterDollar,
    /// `#` only at line start or after whitespace or `;` (shell).
    WordStart,
}

struct Syntax {
    line: &'static [&'static str],
    hash: HashRule,
    blocks: &'static [(&'static str, &'static str)],
    /// Line-anchored block comments (`=begin`..`=end`, POD).
    line_blocks: &'static [(&'static str, &'static str)],
    quotes: &'static [char],
    docstrings: bool,
}

fn syntax(lang: LanguageLabel) -> Syntax {
    use LanguageLabel::*;
    const C_BLOCKS: &[(&str, &str)] = &[("/*", "*/")];
    match lang {
        C | Cpp | Java => Syntax {
            line: &["//"],
            hash: HashRule::None,
            blocks: C_BLOCKS,
            line_blocks: &[],
            quotes: &['"', '\''],
            docstrings: false,
        },
        JavaScript | Php => Syntax {
            line: &["//"],
            hash: HashRule::None,
            blocks: C_BLOCKS,
            line_blocks: &[],
            quotes: &['"', '\'', '`'],
            docstrings: false,
        },
        Python => Syntax {
            line: &[],
            hash: HashRule::Anywhere,
            blocks: &[],
            line_blocks: &[],
            quotes: &['"', '\''],
            docstrings: true,
        },
        Perl => Syntax {
            line: &[],
            hash: HashRule::NotAfterDollar,
            blocks: &[],
            line_blocks: &[("=pod", "=cut"), ("=head", "=cut"), ("=begin", "=cut")],
            quotes: &['"', '\''],
            docstrings: false,
        },
        Ruby => Syntax {
            line: &[],
            hash: HashRule::Anywhere,
            blocks: &[],
            line_blocks: &[("=begin", "=end")],
            quotes: &['"', '\''],
            docstrings: false,
        },
        Shell => Syntax {
            line: &[],
            hash: HashRule::WordStart,
            blocks: &[],
            line_blocks: &[],
            quotes: &['"', '\''],
            docstrings: false,
        },
        Html => Syntax {
            line: &[],
            hash: HashRule::None,
            blocks: &[("<!--", "-->")],
            line_blocks: &[],
            quotes: &[],
            docstrings: false,
        },
        VisualBasic => Syntax {
            line: &["'"],
            hash: HashRule::None,
            blocks: &[],
            line_blocks: &[],
            quotes: &['"'],
            docstrings: false,
        },
        Text | None => unreachable!("prose has no comment syntax"),
    }
}

struct Scanner<'a> {
    s: &'a [char],
    code: Vec<char>,
    comments: Vec<String>,
    /// Per output line: did a comment touch it.
    touched: Vec<bool>,
    unbalanced: bool,
}

impl<'a> Scanner<'a> {
    fn starts_with(&self, i: usize, pat: &str) -> bool {
        let mut k = i;
        pat.chars().all(|pc| {
            let hit = k < self.s.len() && self.s[k] == pc;
            k += 1;
            hit
        })
    }

    fn push_code(&mut self, c: char) {
        self.code.push(c);
        if c == '\n' {
            self.touched.push(false);
        }
    }

    fn mark(&mut self) {
        *self.touched.last_mut().expect("at least one line") = true;
    }

    /// Consumes a comment body from `i` up to (not including) `end`; newlines
    /// are kept in the code stream so line structure survives.
    fn comment(&mut self, from: usize, to: usize) {
        self.mark();
        let body: String = self.s[from..to].iter().collect();
        for line in body.lines() {
            let l = line.trim();
            if !l.is_empty() {
                self.comments.push(l.to_string());
            }
        }
        for &c in &self.s[from..to] {
            if c == '\n' {
                self.push_code('\n');
                self.mark();
            }
        }
    }

    fn find(&self, from: usize, pat: &str) -> Option<usize> {
        (from..self.s.len()).find(|&k| self.starts_with(k, pat))
    }

    fn line_end(&self, from: usize) -> usize {
        (from..self.s.len())
            .find(|&k| self.s[k] == '\n')
            .unwrap_or(self.s.len())
    }
}

/// Splits `content` into code and comments using `lang`'s comment grammar.
/// String literals are skipped so quote-embedded markers do not start comments.
/// For prose classes, everything is comment text.
pub fn separate(content: &str, lang: LanguageLabel, confidence: f64) -> SeparatedPoC {
    if lang.is_prose() {
        return SeparatedPoC {
            language: lang,
            code: String::new(),
            comments: content.to_string(),
            confidence,
            unbalanced_comment: false,
        };
    }
    let syn = syntax(lang);
    let chars: Vec<char> = content.chars().collect();
    let mut sc = Scanner {
        s: &chars,
        code: Vec::with_capacity(chars.len()),
        comments: Vec::new(),
        touched: vec![false],
        unbalanced: false,
    };
    let mut i = 0;
    let mut at_line_start = true;
    let mut only_ws_since_line_start = true;
    'outer: while i < chars.len() {
        let c = chars[i];
        if at_line_start {
            for (open, close) in syn.line_blocks {
                if sc.starts_with(i, open) {
                    // runs to the end of the first line starting with `close`
                    let mut k = sc.line_end(i);
                    let mut end = None;
                    while k < chars.len() {
                        let ls = k + 1;
                        if sc.starts_with(ls, close) {
                            end = Some(sc.line_end(ls));
                            break;
                        }
                        k = sc.line_end(ls);
                    }
                    let stop = end.unwrap_or_else(|| {
                        sc.unbalanced = true;
                        chars.len()
                    });
                    let body_start = (i + open.len()).min(stop);
                    sc.mark();
                    let body_end = end.map(|_| {
                        // exclude the closing marker line
                        (i..stop).rev().find(|&k| chars[k] == '\n').unwrap_or(i)
                    });
                    sc.comment(body_start, body_end.unwrap_or(stop).max(body_start));
                    // keep the newlines that belonged to the closing line
                    if let Some(be) = body_end {
                        for &ch in &chars[be.max(body_start)..stop] {
                            if ch == '\n' {
                                sc.push_code('\n');
                                sc.mark();
                            }
                        }
                    }
                    i = stop;
                    at_line_start = false;
                    continue 'outer;
                }
            }
        }
        if syn.docstrings && only_ws_since_line_start && (sc.starts_with(i, "\"\"\"") || sc.starts_with(i, "'''")) {
            let delim: String = chars[i..i + 3].iter().collect();
            let (end, next) = match sc.find(i + 3, &delim) {
                Some(e) => (e, e + 3),
                None => {
                    sc.unbalanced = true;
                    (chars.len(), chars.len())
                }
            };
            sc.comment(i + 3, end);
            i = next;
            only_ws_since_line_start = false;
            at_line_start = false;
            continue;
        }
        for (open, close) in syn.blocks {
            if sc.starts_with(i, open) {
                let from = i + open.chars().count();
                let (end, next) = match sc.find(from, close) {
                    Some(e) => (e, e + close.chars().count()),
                    None => {
                        sc.unbalanced = true;
                        (chars.len(), chars.len())
                    }
                };
                sc.comment(from, end);
                i = next;
                at_line_start = false;
                continue 'outer;
            }
        }
        let line_marker = syn
            .line
            .iter()
            .find(|m| sc.starts_with(i, m))
            .map(|m| m.chars().count());
        let hash_marker = c == '#'
            && match syn.hash {
                HashRule::None => false,
                HashRule::Anywhere => true,
                HashRule::NotAfterDollar => i == 0 || chars[i - 1] != '$',
                HashRule::WordStart => i == 0 || chars[i - 1].is_whitespace() || chars[i - 1] == ';',
            };
        if let Some(len) = line_marker.or(if hash_marker { Some(1) } else { None }) {
            let end = sc.line_end(i);
            sc.comment(i + len, end);
            i = end;
            continue;
        }
        if syn.quotes.contains(&c) {
            let triple = syn.docstrings && i + 2 < chars.len() && chars[i + 1] == c && chars[i + 2] == c;
            let mut k = if triple { i + 3 } else { i + 1 };
            while k < chars.len() {
                if chars[k] == '\\' {
                    k += 2;
                    continue;
                }
                if triple {
                    if chars[k] == c && k + 2 < chars.len() && chars[k + 1] == c && chars[k + 2] == c {
                        k += 3;
                        break;
                    }
                } else if chars[k] == c {
                    k += 1;
                    break;
                } else if chars[k] == '\n' {
                    break;
                }
                k += 1;
            }
            let k = k.min(chars.len());
            for &ch in &chars[i..k] {
                sc.push_code(ch);
            }
            i = k;
            at_line_start = false;
            only_ws_since_line_start = false;
            continue;
        }
        sc.push_code(c);
        if c == '\n' {
            at_line_start = true;
            only_ws_since_line_start = true;
        } else {
            at_line_start = false;
            if !c.is_whitespace() {
                only_ws_since_line_start = false;
            }
        }
        i += 1;
    }

    let code: String = sc.code.iter().collect();
    let mut kept = Vec::new();
    for (line, touched) in code.split('\n').zip(sc.touched.iter()) {
        if *touched && line.trim().is_empty() {
            continue;
        }
        kept.push(line);
    }
    SeparatedPoC {
        language: lang,
        code: kept.join("\n"),
        comments: sc.comments.join("\n"),
        confidence,
        unbalanced_comment: sc.unbalanced,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use LanguageLabel::*;

    #[test]
    fn c_line_comment() {
        let s = separate("int x; // note", C, 1.0);
        assert_eq!(s.code, "int x; ");
        assert_eq!(s.comments, "note");
    }

    #[test]
    fn python_hash_comment() {
        let s = separate("# a\nx=1", Python, 1.0);
        assert_eq!(s.comments, "a");
        assert_eq!(s.code, "x=1");
    }

    #[test]
    fn text_is_all_comment() {
        let s = separate("hello world", Text, 1.0);
        assert_eq!(s.code, "");
        assert_eq!(s.comments, "hello world");
    }

    #[test]
    fn strings_mask_comment_markers() {
        let s = separate("char *u = \"http://x\"; /* real */", C, 1.0);
        assert_eq!(s.code, "char *u = \"http://x\"; ");
        assert_eq!(s.comments, "real");
        let s = separate("x = '# not a comment'  # yes", Python, 1.0);
        assert_eq!(s.comments, "yes");
    }

    #[test]
    fn block_comments_keep_line_structure() {
        let s = separate("int a;\n/* one\ntwo */\nint b;", C, 1.0);
        assert_eq!(s.code, "int a;\nint b;");
        assert_eq!(s.comments, "one\ntwo");
        assert!(!s.unbalanced_comment);
    }

    #[test]
    fn unbalanced_block_comment_flagged() {
        let s = separate("int a; /* never closed\nint b;", C, 1.0);
        assert_eq!(s.code, "int a; ");
        assert!(s.unbalanced_comment);
        assert!(s.comments.contains("int b;"));
    }

    #[test]
    fn python_docstring_at_statement_start() {
        let s = separate(
            "def f():\n    \"\"\"Doc\n    more\"\"\"\n    x = \"\"\"data\"\"\"\n",
            Python,
            1.0,
        );
        assert_eq!(s.comments, "Doc\nmore");
        assert!(s.code.contains("x = \"\"\"data\"\"\""));
    }

    #[test]
    fn perl_pod_and_dollar_hash() {
        let src = "my $n = $#arr; # count\n=pod\nUsage notes\n=cut\nprint $n;";
        let s = separate(src, Perl, 1.0);
        assert_eq!(s.comments, "count\nUsage notes");
        assert_eq!(s.code, "my $n = $#arr; \nprint $n;");
    }

    #[test]
    fn ruby_begin_end() {
        let s = separate("=begin\nheader\n=end\nputs 1 # hi", Ruby, 1.0);
        assert_eq!(s.comments, "header\nhi");
        assert_eq!(s.code, "puts 1 ");
    }

    #[test]
    fn shell_hash_rules() {
        let s = separate("echo ${#v} # len", Shell, 1.0);
        assert_eq!(s.comments, "len");
        assert_eq!(s.code, "echo ${#v} ");
    }

    #[test]
    fn html_and_vb() {
        let s = separate("<p>don't</p><!-- hidden -->", Html, 1.0);
        assert_eq!(s.code, "<p>don't</p>");
        assert_eq!(s.comments, "hidden");
        let s = separate("Dim s ' greeting\ns = \"it's\"", VisualBasic, 1.0);
        assert_eq!(s.comments, "greeting");
        assert_eq!(s.code, "Dim s \ns = \"it's\"");
    }

    proptest! {
        #[test]
        fn code_has_no_residual_comments(src in "[a-z ;=#/*'\"\\n]{0,80}",
                                         lang in prop::sample::select(vec![C, Python, Perl, Ruby, Shell, JavaScript, VisualBasic, Html])) {
            let first = separate(&src, lang, 1.0);
            let again = separate(&first.code, lang, 1.0);
            if !first.unbalanced_comment {
                prop_assert_eq!(again.comments, "");
            }
        }
    }
}
