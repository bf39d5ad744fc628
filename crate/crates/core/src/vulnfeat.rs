//! One-hot structured features from vulnerability records: CVSS components,
//! CWE ids and affected products.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{CvssComponents, Date, VulnRecord};
use crate::SparseVector;

pub const NS_CVSS: &str = "cvss";
pub const NS_CWE: &str = "cwe";
pub const NS_CPE: &str = "cpe";

pub const DEFAULT_TOP_PRODUCTS: usize = 10;
pub const DEFAULT_CWE_MIN_COUNT: usize = 5;

/// Valid values per CVSS v2 base metric.
pub const CVSS_V2_VALUES: &[(&str, &[&str])] = &[
    ("AV", &["L", "A", "N"]),
    ("AC", &["H", "M", "L"]),
    ("Au", &["M", "S", "N"]),
    ("C", &["N", "P", "C"]),
    ("I", &["N", "P", "C"]),
    ("A", &["N", "P", "C"]),
];

/// Valid values per CVSS v3 base metric.
pub const CVSS_V3_VALUES: &[(&str, &[&str])] = &[
    ("AV", &["N", "A", "L", "P"]),
    ("AC", &["L", "H"]),
    ("PR", &["N", "L", "H"]),
    ("UI", &["N", "R"]),
    ("S", &["U", "C"]),
    ("C", &["H", "L", "N"]),
    ("I", &["H", "L", "N"]),
    ("A", &["H", "L", "N"]),
];

/// All CVSS feature ids, in a fixed order.
pub fn cvss_feature_ids() -> Vec<String> {
    let mut out = Vec::new();
    for (ver, table) in [("v2", CVSS_V2_VALUES), ("v3", CVSS_V3_VALUES)] {
        for (metric, values) in table {
            for v in *values {
                out.push(format!("{NS_CVSS}:{ver}:{metric}={v}"));
            }
        }
    }
    out
}

/// `CWE-79` → `79`; other ids (`NVD-CWE-Other`) are lowercased as-is.
pub fn normalize_cwe(id: &str) -> String {
    let t = id.trim();
    match t.get(..4) {
        Some(p) if p.eq_ignore_ascii_case("cwe-") => t[4..].to_string(),
        _ => t.to_ascii_lowercase(),
    }
}

pub fn normalize_product(p: &str) -> String {
    p.trim().to_lowercase()
}

/// Category lists learned from training records.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredVocab {
    pub cwes: BTreeSet<String>,
    pub products: BTreeSet<String>,
    pub cwe_min_count: usize,
    pub top_products: usize,
}

/// CWEs listed by at least `cwe_min_count` records and the `top_products`
/// most frequently affected products (ties broken by name).
pub fn build_structured_vocab<'a, I>(records: I, cwe_min_count: usize, top_products: usize) -> StructuredVocab
where
    I: IntoIterator<Item = &'a VulnRecord>,
{
    let mut cwe_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut product_counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in records {
        let cwes: BTreeSet<String> = r.cwe_ids.iter().map(|c| normalize_cwe(c)).collect();
        for c in cwes {
            *cwe_counts.entry(c).or_insert(0) += 1;
        }
        let products: BTreeSet<String> = r
            .products
            .iter()
            .map(|p| normalize_product(p))
            .filter(|p| !p.is_empty())
            .collect();
        for p in products {
            *product_counts.entry(p).or_insert(0) += 1;
        }
    }
    let cwes = cwe_counts
        .into_iter()
        .filter(|(_, n)| *n >= cwe_min_count.max(1))
        .map(|(c, _)| c)
        .collect();
    let mut ranked: Vec<(String, usize)> = product_counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let products = ranked.into_iter().take(top_products).map(|(p, _)| p).collect();
    StructuredVocab {
        cwes,
        products,
        cwe_min_count,
        top_products,
    }
}

fn encode_cvss(out: &mut SparseVector, version: &str, table: &[(&str, &[&str])], c: &CvssComponents) {
    for (metric, value) in c.metrics() {
        let value = value.trim().to_ascii_uppercase();
        let valid = table
            .iter()
            .find(|(m, _)| *m == metric)
            .map(|(_, vals)| vals.contains(&value.as_str()))
            .unwrap_or(false);
        if valid {
            out.set(format!("{NS_CVSS}:{version}:{metric}={value}"));
        }
    }
}

/// Structured features visible at date `z`. CVSS components are included
/// only once `cvss_published ≤ z`; CWE and product fields only once
/// `nvd_published ≤ z` (records without an NVD date are treated as visible).
pub fn encode_structured(vuln: &VulnRecord, vocab: &StructuredVocab, z: Date) -> SparseVector {
    let mut out = SparseVector::new();
    if vuln.cvss_published.map(|d| d <= z).unwrap_or(false) {
        if let Some(c) = &vuln.cvss_v2 {
            encode_cvss(&mut out, "v2", CVSS_V2_VALUES, c);
        }
        if let Some(c) = &vuln.cvss_v3 {
            encode_cvss(&mut out, "v3", CVSS_V3_VALUES, c);
        }
    }
    if vuln.nvd_published.map(|d| d <= z).unwrap_or(true) {
        for c in &vuln.cwe_ids {
            let c = normalize_cwe(c);
            if vocab.cwes.contains(&c) {
                out.set(format!("{NS_CWE}:{c}"));
            }
        }
        for p in &vuln.products {
            let p = normalize_product(p);
            if vocab.products.contains(&p) {
                out.set(format!("{NS_CPE}:{p}"));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(m: u32, day: u32) -> Date {
        Date::from_ymd_opt(2020, m, day).unwrap()
    }

    fn record() -> VulnRecord {
        let mut v = VulnRecord::new("CVE-1");
        v.cvss_v3 = Some(CvssComponents {
            av: Some("N".into()),
            ac: Some("L".into()),
            pr: Some("X".into()),
            ..Default::default()
        });
        v.cvss_v2 = Some(CvssComponents {
            au: Some("n".into()),
            ..Default::default()
        });
        v.cvss_published = Some(d(3, 1));
        v.cwe_ids = vec!["CWE-79".into(), "CWE-89".into()];
        v.products = vec!["Linux_Kernel".into(), "obscure".into()];
        v
    }

    fn vocab() -> StructuredVocab {
        StructuredVocab {
            cwes: ["79".to_string()].into(),
            products: ["linux_kernel".to_string()].into(),
            cwe_min_count: 5,
            top_products: 10,
        }
    }

    #[test]
    fn forty_cvss_dimensions() {
        let ids = cvss_feature_ids();
        assert_eq!(ids.len(), 40);
        assert_eq!(ids.iter().filter(|i| i.starts_with("cvss:v2:")).count(), 18);
    }

    #[test]
    fn encodes_visible_fields() {
        let v = encode_structured(&record(), &vocab(), d(4, 1));
        assert!(v.contains("cvss:v3:AV=N"));
        assert!(v.contains("cvss:v3:AC=L"));
        assert!(v.contains("cvss:v2:Au=N"));
        assert!(!v.keys().any(|k| k.starts_with("cvss:v3:PR")), "invalid value dropped");
        assert!(v.contains("cwe:79"));
        assert!(!v.contains("cwe:89"));
        assert!(v.contains("cpe:linux_kernel"));
        assert!(!v.contains("cpe:obscure"));
    }

    #[test]
    fn cvss_is_time_gated() {
        let v = encode_structured(&record(), &vocab(), d(2, 1));
        assert!(!v.keys().any(|k| k.starts_with("cvss:")));
        assert!(v.contains("cwe:79"));
        let mut r = record();
        r.cvss_published = None;
        assert!(!encode_structured(&r, &vocab(), d(12, 1))
            .keys()
            .any(|k| k.starts_with("cvss:")));
        r.nvd_published = Some(d(6, 1));
        assert!(encode_structured(&r, &vocab(), d(5, 31)).is_empty());
    }

    #[test]
    fn gating_is_monotone() {
        let r = record();
        let early = encode_structured(&r, &vocab(), d(2, 1));
        let late = encode_structured(&r, &vocab(), d(9, 1));
        assert!(early.keys().all(|k| late.contains(k)));
    }

    #[test]
    fn vocab_thresholds_and_top_k() {
        let mut recs = Vec::new();
        for i in 0..12 {
            let mut v = VulnRecord::new(format!("V{i}"));
            v.cwe_ids = if i < 5 {
                vec!["CWE-20".into()]
            } else {
                vec!["CWE-22".into(), "cwe-22".into()]
            };
            if i < 4 {
                v.cwe_ids.push("CWE-1".into());
            }
            v.products = vec![format!("p{}", i % 3), "Common".into()];
            recs.push(v);
        }
        let sv = build_structured_vocab(&recs, 5, 2);
        assert_eq!(sv.cwes, ["20".to_string(), "22".to_string()].into());
        assert_eq!(sv.products, ["common".to_string(), "p0".to_string()].into());
    }

    #[test]
    fn cwe_normalization() {
        assert_eq!(normalize_cwe("CWE-79"), "79");
        assert_eq!(normalize_cwe(" cwe-120 "), "120");
        assert_eq!(normalize_cwe("NVD-CWE-Other"), "nvd-cwe-other");
    }
}
