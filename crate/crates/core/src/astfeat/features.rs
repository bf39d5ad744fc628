//! Structural features over a parsed syntax tree.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ast::AstNode;
use super::ParseResult;
use crate::corpus::Date;
use crate::langid::LanguageLabel;
use crate::SparseVector;

pub const NS_CODE: &str = "code";

/// Node kinds counted as decision points.
const DECISION_KINDS: &[&str] = &["if", "elif", "ternary", "loop", "case", "catch", "binop:&&", "binop:||"];

/// Receivers that refer to the enclosing object or class.
const SELF_RECEIVERS: &[&str] = &["self", "this", "$this", "cls", "static", "parent"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    /// Lower median for even-sized samples.
    pub median: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Stats> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        Some(Stats {
            mean,
            median: v[(v.len() - 1) / 2],
            max: v[v.len() - 1],
        })
    }
}

/// Features of the code written in one language.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CodeBlock {
    /// False when no parser exists for the language; only length and
    /// keyword features are then meaningful.
    pub parsed: bool,
    pub parsed_fraction: f64,
    pub n_nodes: u64,
    pub n_internal_nodes: u64,
    pub n_leaf_nodes: u64,
    pub n_identifiers: u64,
    pub n_ext_fun: u64,
    pub n_ext_fun_calls: u64,
    pub n_udf: u64,
    pub n_udf_calls: u64,
    pub n_operators: u64,
    pub cyclomatic: u64,
    pub nodes_count: BTreeMap<String, u64>,
    pub ctrl_nodes_count: BTreeMap<String, u64>,
    pub literal_types_count: BTreeMap<String, u64>,
    pub operator_count: BTreeMap<String, u64>,
    pub nodes_depth: BTreeMap<String, Stats>,
    pub nodes_depth_ctrl: BTreeMap<String, Stats>,
    pub branching_factor: Option<Stats>,
    pub branching_factor_ctrl: Option<Stats>,
    pub n_params_udf: Option<Stats>,
    pub chars: u64,
    pub loc: u64,
    pub sloc: u64,
    pub keyword_count: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CodeFeatureSet {
    pub blocks: BTreeMap<LanguageLabel, CodeBlock>,
}

impl CodeFeatureSet {
    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Flattens into `code:<lang>:<feature>` entries; zero counts are omitted.
    pub fn to_sparse(&self) -> SparseVector {
        let mut v = SparseVector::new();
        for (lang, b) in &self.blocks {
            let p = format!("{NS_CODE}:{}", lang.slug());
            let mut put = |name: &str, x: f64| v.insert(format!("{p}:{name}"), x);
            put("len:chars", b.chars as f64);
            put("len:loc", b.loc as f64);
            put("len:sloc", b.sloc as f64);
            for (k, n) in &b.keyword_count {
                put(&format!("keyword:{k}"), *n as f64);
            }
            if !b.parsed {
                continue;
            }
            for (name, x) in [
                ("n_nodes", b.n_nodes),
                ("n_internal_nodes", b.n_internal_nodes),
                ("n_leaf_nodes", b.n_leaf_nodes),
                ("n_identifiers", b.n_identifiers),
                ("n_ext_fun", b.n_ext_fun),
                ("n_ext_fun_calls", b.n_ext_fun_calls),
                ("n_udf", b.n_udf),
                ("n_udf_calls", b.n_udf_calls),
                ("n_operators", b.n_operators),
                ("cyclomatic", b.cyclomatic),
            ] {
                put(name, x as f64);
            }
            for (prefix, map) in [
                ("nodes_count", &b.nodes_count),
                ("ctrl_nodes_count", &b.ctrl_nodes_count),
                ("literal_types_count", &b.literal_types_count),
                ("operator_count", &b.operator_count),
            ] {
                for (k, n) in map {
                    put(&format!("{prefix}:{k}"), *n as f64);
                }
            }
            let mut put_stats = |name: &str, s: &Stats| {
                v.insert(format!("{p}:{name}:mean"), s.mean);
                v.insert(format!("{p}:{name}:median"), s.median);
                v.insert(format!("{p}:{name}:max"), s.max);
            };
            for (k, s) in &b.nodes_depth {
                put_stats(&format!("nodes_depth:{k}"), s);
            }
            for (k, s) in &b.nodes_depth_ctrl {
                put_stats(&format!("nodes_depth_ctrl:{k}"), s);
            }
            if let Some(s) = &b.branching_factor {
                put_stats("branching_factor", s);
            }
            if let Some(s) = &b.branching_factor_ctrl {
                put_stats("branching_factor_ctrl", s);
            }
            if let Some(s) = &b.n_params_udf {
                put_stats("n_params_udf", s);
            }
        }
        v
    }
}

pub fn cyclomatic(pr: &ParseResult) -> u64 {
    cyclomatic_of(&pr.root)
}

fn cyclomatic_of(root: &AstNode) -> u64 {
    1 + root
        .walk()
        .into_iter()
        .filter(|(n, _)| DECISION_KINDS.contains(&n.kind.as_str()))
        .count() as u64
}

fn bump(map: &mut BTreeMap<String, u64>, key: &str) {
    *map.entry(key.to_string()).or_insert(0) += 1;
}

fn stats_map(m: BTreeMap<String, Vec<f64>>) -> BTreeMap<String, Stats> {
    m.into_iter()
        .filter_map(|(k, v)| Stats::of(&v).map(|s| (k, s)))
        .collect()
}

/// Computes the feature block for one parsed file. The root container node
/// itself is not counted.
pub fn extract_code_features(pr: &ParseResult) -> CodeFeatureSet {
    let mut blocks = BTreeMap::new();
    if !matches!(pr.language, LanguageLabel::Text | LanguageLabel::None) {
        blocks.insert(pr.language, block_for(pr));
    }
    CodeFeatureSet { blocks }
}

fn block_for(pr: &ParseResult) -> CodeBlock {
    let mut b = CodeBlock {
        parsed: pr.supported,
        parsed_fraction: pr.parsed_fraction,
        chars: pr.char_count,
        loc: pr.loc,
        sloc: pr.sloc,
        keyword_count: pr.keyword_counts.clone(),
        cyclomatic: cyclomatic_of(&pr.root),
        ..Default::default()
    };
    if !pr.supported {
        return b;
    }

    let mut depths: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut branching = Vec::new();
    let mut identifiers = BTreeSet::new();
    let mut operators = BTreeSet::new();
    let mut udfs = BTreeSet::new();
    let mut classes = BTreeSet::new();
    let mut params = Vec::new();
    let mut calls: Vec<Option<String>> = Vec::new();

    for (n, d) in pr.root.walk() {
        if d == 0 {
            continue;
        }
        b.n_nodes += 1;
        if n.is_leaf() {
            b.n_leaf_nodes += 1;
        } else {
            b.n_internal_nodes += 1;
            branching.push(n.children.len() as f64);
        }
        bump(&mut b.nodes_count, &n.kind);
        depths.entry(n.kind.clone()).or_default().push(d as f64);
        if n.is_control {
            bump(&mut b.ctrl_nodes_count, &n.kind);
        }
        if let Some(t) = n.literal {
            bump(&mut b.literal_types_count, t.as_str());
        }
        if let Some(op) = &n.operator {
            bump(&mut b.operator_count, op);
            operators.insert(op.clone());
        }
        match n.kind.as_str() {
            "ident" | "param" | "var" | "member" | "keyword_arg" => {
                if let Some(name) = &n.name {
                    identifiers.insert(name.clone());
                }
            }
            "fn_def" => {
                if let Some(name) = &n.name {
                    identifiers.insert(name.clone());
                    udfs.insert(name.clone());
                }
                b.n_udf += 1;
                let np = n
                    .children
                    .iter()
                    .find(|c| c.kind == "params")
                    .map(|c| c.children.len())
                    .unwrap_or(0);
                params.push(np as f64);
            }
            "class_def" => {
                if let Some(name) = &n.name {
                    identifiers.insert(name.clone());
                    classes.insert(name.clone());
                }
            }
            "call" => calls.push(n.name.clone()),
            _ => {}
        }
    }

    let mut external = BTreeSet::new();
    for callee in &calls {
        let is_udf = callee
            .as_deref()
            .map(|c| resolves_to_udf(c, &udfs, &classes))
            .unwrap_or(false);
        if is_udf {
            b.n_udf_calls += 1;
        } else {
            b.n_ext_fun_calls += 1;
            if let Some(c) = callee {
                external.insert(c.clone());
            }
        }
    }
    b.n_ext_fun = external.len() as u64;
    b.n_identifiers = identifiers.len() as u64;
    b.n_operators = operators.len() as u64;
    b.nodes_depth = stats_map(depths);
    b.branching_factor = Stats::of(&branching);
    b.n_params_udf = Stats::of(&params);

    let (ctrl_depths, ctrl_branching) = control_tree(&pr.root);
    b.nodes_depth_ctrl = stats_map(ctrl_depths);
    b.branching_factor_ctrl = Stats::of(&ctrl_branching);
    b
}

fn resolves_to_udf(callee: &str, udfs: &BTreeSet<String>, classes: &BTreeSet<String>) -> bool {
    if udfs.contains(callee) {
        return true;
    }
    match callee.rsplit_once('.') {
        Some((recv, name)) => udfs.contains(name) && (SELF_RECEIVERS.contains(&recv) || classes.contains(recv)),
        None => false,
    }
}

/// Depths and branching factors in the tree obtained by keeping only control
/// nodes (each attached to its nearest control ancestor, or the root).
fn control_tree(root: &AstNode) -> (BTreeMap<String, Vec<f64>>, Vec<f64>) {
    let mut depths: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut child_counts: Vec<usize> = Vec::new();
    // (node, index of nearest control ancestor, control depth of that ancestor)
    let mut stack: Vec<(&AstNode, Option<usize>, usize)> = root.children.iter().rev().map(|c| (c, None, 0)).collect();
    while let Some((n, parent, pdepth)) = stack.pop() {
        let (next_parent, next_depth) = if n.is_control {
            let depth = pdepth + 1;
            depths.entry(n.kind.clone()).or_default().push(depth as f64);
            if let Some(p) = parent {
                child_counts[p] += 1;
            }
            child_counts.push(0);
            (Some(child_counts.len() - 1), depth)
        } else {
            (parent, pdepth)
        };
        for c in n.children.iter().rev() {
            stack.push((c, next_parent, next_depth));
        }
    }
    let branching = child_counts.into_iter().filter(|c| *c > 0).map(|c| c as f64).collect();
    (depths, branching)
}

/// Code features of one PoC file, with the metadata used for tie-breaking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PocCode {
    pub date: Date,
    pub source: String,
    pub features: CodeFeatureSet,
}

/// Per language, keeps the block of the PoC with the most source lines
/// (ties: earliest date, then source name).
pub fn aggregate_poc_code_features(pocs: &[PocCode]) -> CodeFeatureSet {
    let mut best: BTreeMap<LanguageLabel, (&CodeBlock, &PocCode)> = BTreeMap::new();
    for poc in pocs {
        for (lang, block) in &poc.features.blocks {
            let replace = match best.get(lang) {
                None => true,
                Some((cur, cur_poc)) => {
                    block.sloc > cur.sloc
                        || (block.sloc == cur.sloc && (poc.date, &poc.source) < (cur_poc.date, &cur_poc.source))
                }
            };
            if replace {
                best.insert(*lang, (block, poc));
            }
        }
    }
    CodeFeatureSet {
        blocks: best.into_iter().map(|(l, (b, _))| (l, b.clone())).collect(),
    }
}
