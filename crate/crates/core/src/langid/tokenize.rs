/// Multi-character punctuation kept as single tokens; these carry most of the
/// language signal that identifiers do not.
const PUNCT_BIGRAMS: &[&str] = &[
    "->", "::", "<?", "?>", "#!", "=>", "==", "!=", "&&", "||", "<<", ">>", "++", "--", "+=", "-=", "**", "//", "/*",
    "*/", "<!", "<%", "%>", ":=", "$_", "@_", "${", "$(", "</", "/>", "#{", "#[",
];

/// Punctuation that rarely appears in prose.
const CODE_PUNCT: &[&str] = &["{", "}", ";", "=", "$", "@", "<", ">", "[", "]", "(", ")", "&", "|"];

/// Identifier-like words that are strong code markers and uncommon in prose.
const CODE_WORDS: &[&str] = &[
    "def",
    "elif",
    "elsif",
    "endif",
    "fi",
    "esac",
    "done",
    "var",
    "const",
    "let",
    "function",
    "int",
    "char",
    "void",
    "unsigned",
    "struct",
    "include",
    "printf",
    "malloc",
    "sizeof",
    "return",
    "import",
    "require",
    "self",
    "this",
    "null",
    "nil",
    "None",
    "True",
    "False",
    "true",
    "false",
    "echo",
    "my",
    "sub",
    "foreach",
    "Dim",
    "End",
    "Sub",
    "puts",
    "print",
    "public",
    "static",
    "class",
    "new",
    "then",
    "end",
    "lambda",
    "pass",
    "unless",
    "local",
    "typeof",
    "undefined",
];

/// Tokens used by the language model: identifier runs, known punctuation
/// bigrams and single punctuation characters. Case is preserved.
pub fn lang_tokens(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_alphanumeric() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            if i - start <= 32 {
                out.push(chars[start..i].iter().collect());
            }
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if i + 1 < chars.len() {
            let pair: String = [c, chars[i + 1]].iter().collect();
            if PUNCT_BIGRAMS.contains(&pair.as_str()) {
                out.push(pair);
                i += 2;
                continue;
            }
        }
        out.push(c.to_string());
        i += 1;
    }
    out
}

/// Number of tokens that look like code rather than prose.
pub fn code_like_count(tokens: &[String]) -> usize {
    tokens
        .iter()
        .filter(|t| {
            let t = t.as_str();
            PUNCT_BIGRAMS.contains(&t) || CODE_PUNCT.contains(&t) || CODE_WORDS.contains(&t)
        })
        .count()
}
