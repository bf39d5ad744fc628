use serde::{Deserialize, Serialize};

/// Literal categories shared by every adapter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiteralType {
    Int,
    Float,
    String,
    Bool,
    Null,
    Regex,
}

impl LiteralType {
    pub fn as_str(self) -> &'static str {
        match self {
            LiteralType::Int => "int",
            LiteralType::Float => "float",
            LiteralType::String => "string",
            LiteralType::Bool => "bool",
            LiteralType::Null => "null",
            LiteralType::Regex => "regex",
        }
    }
}

/// Node kinds that are control statements.
pub const CONTROL_KINDS: &[&str] = &[
    "if", "elif", "else", "loop", "switch", "case", "default", "try", "catch", "finally", "return", "break",
    "continue", "throw", "goto", "ternary",
];

/// A syntax-tree node in the shared taxonomy (`call`, `fn_def`, `if`, `loop`,
/// `binop:<op>`, `lit:<type>`, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AstNode {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<AstNode>,
    pub is_control: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub literal: Option<LiteralType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<String>,
    /// Identifier, callee or definition name, when the node has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl AstNode {
    pub fn new(kind: impl Into<String>, children: Vec<AstNode>) -> Self {
        let kind = kind.into();
        let is_control = CONTROL_KINDS.contains(&kind.as_str());
        Self {
            kind,
            children,
            is_control,
            literal: None,
            operator: None,
            name: None,
        }
    }

    pub fn leaf(kind: impl Into<String>) -> Self {
        Self::new(kind, Vec::new())
    }

    pub fn named(kind: impl Into<String>, name: impl Into<String>, children: Vec<AstNode>) -> Self {
        let mut n = Self::new(kind, children);
        n.name = Some(name.into());
        n
    }

    pub fn ident(name: impl Into<String>) -> Self {
        Self::named("ident", name, Vec::new())
    }

    pub fn literal(t: LiteralType) -> Self {
        let mut n = Self::leaf(format!("lit:{}", t.as_str()));
        n.literal = Some(t);
        n
    }

    /// Operator node; `family` is `binop`, `unop` or `assign`.
    pub fn op(family: &str, op: &str, children: Vec<AstNode>) -> Self {
        let mut n = Self::new(format!("{family}:{op}"), children);
        n.operator = Some(op.to_string());
        n
    }

    pub fn root(children: Vec<AstNode>) -> Self {
        Self::new("module", children)
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Pre-order walk yielding `(node, depth)`; the receiver has depth 0.
    pub fn walk(&self) -> Vec<(&AstNode, usize)> {
        let mut out = Vec::new();
        let mut stack = vec![(self, 0usize)];
        while let Some((n, d)) = stack.pop() {
            out.push((n, d));
            for c in n.children.iter().rev() {
                stack.push((c, d + 1));
            }
        }
        out
    }
}
