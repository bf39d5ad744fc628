use base64::Engine;
use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// CVSS base-metric components as carried by NVD, one string value per metric.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CvssComponents {
    #[serde(rename = "AV", default, skip_serializing_if = "Option::is_none")]
    pub av: Option<String>,
    #[serde(rename = "AC", default, skip_serializing_if = "Option::is_none")]
    pub ac: Option<String>,
    /// v2 only.
    #[serde(rename = "Au", default, skip_serializing_if = "Option::is_none")]
    pub au: Option<String>,
    /// v3 only.
    #[serde(rename = "PR", default, skip_serializing_if = "Option::is_none")]
    pub pr: Option<String>,
    #[serde(rename = "UI", default, skip_serializing_if = "Option::is_none")]
    pub ui: Option<String>,
    #[serde(rename = "S", default, skip_serializing_if = "Option::is_none")]
    pub s: Option<String>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<String>,
    #[serde(rename = "I", default, skip_serializing_if = "Option::is_none")]
    pub i: Option<String>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exploitability_score: Option<f64>,
}

impl CvssComponents {
    /// `(metric, value)` pairs for every metric that is set.
    pub fn metrics(&self) -> Vec<(&'static str, &str)> {
        [
            ("AV", &self.av),
            ("AC", &self.ac),
            ("Au", &self.au),
            ("PR", &self.pr),
            ("UI", &self.ui),
            ("S", &self.s),
            ("C", &self.c),
            ("I", &self.i),
            ("A", &self.a),
        ]
        .into_iter()
        .filter_map(|(m, v)| v.as_deref().map(|v| (m, v)))
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnRecord {
    pub id: String,
    #[serde(default)]
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cvss_v2: Option<CvssComponents>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cvss_v3: Option<CvssComponents>,
    #[serde(default)]
    pub cvss_published: Option<NaiveDate>,
    #[serde(default)]
    pub cwe_ids: Vec<String>,
    #[serde(default)]
    pub products: Vec<String>,
    #[serde(default)]
    pub nvd_published: Option<NaiveDate>,
}

impl VulnRecord {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            description: String::new(),
            cvss_v2: None,
            cvss_v3: None,
            cvss_published: None,
            cwe_ids: Vec::new(),
            products: Vec::new(),
            nvd_published: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Writeup,
    Poc,
    NvdDescription,
}

/// One dated document attached to a vulnerability. Content is raw bytes:
/// PoCs are frequently not valid UTF-8.
#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactRecord {
    pub vuln_id: String,
    pub kind: ArtifactKind,
    pub date: NaiveDate,
    pub source: String,
    pub content: Vec<u8>,
    pub declared_extension: Option<String>,
}

impl ArtifactRecord {
    /// Lossy UTF-8 view of the content.
    pub fn text(&self) -> std::borrow::Cow<'_, str> {
        String::from_utf8_lossy(&self.content)
    }
}

#[derive(Serialize, Deserialize)]
struct ArtifactWire {
    vuln_id: String,
    kind: ArtifactKind,
    date: NaiveDate,
    source: String,
    content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    encoding: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ext: Option<String>,
}

impl Serialize for ArtifactRecord {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let (content, encoding) = match std::str::from_utf8(&self.content) {
            Ok(t) => (t.to_string(), None),
            Err(_) => (
                base64::engine::general_purpose::STANDARD.encode(&self.content),
                Some("b64".to_string()),
            ),
        };
        ArtifactWire {
            vuln_id: self.vuln_id.clone(),
            kind: self.kind,
            date: self.date,
            source: self.source.clone(),
            content,
            encoding,
            ext: self.declared_extension.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ArtifactRecord {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = ArtifactWire::deserialize(d)?;
        let content = match w.encoding.as_deref() {
            None | Some("utf8") | Some("utf-8") => w.content.into_bytes(),
            Some("b64") => base64::engine::general_purpose::STANDARD
                .decode(w.content.as_bytes())
                .map_err(serde::de::Error::custom)?,
            Some(other) => return Err(serde::de::Error::custom(format!("unknown encoding {other:?}"))),
        };
        Ok(ArtifactRecord {
            vuln_id: w.vuln_id,
            kind: w.kind,
            date: w.date,
            source: w.source,
            content,
            declared_extension: w.ext,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceKind {
    Functional,
    InTheWild,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExploitEvidence {
    pub vuln_id: String,
    pub source: String,
    pub kind: EvidenceKind,
    pub date: Option<NaiveDate>,
}

/// Estimated lifecycle timestamps for one vulnerability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifecycleDates {
    pub disclosure: NaiveDate,
    pub exploit_available: Option<NaiveDate>,
    pub label_horizon_days: i64,
}
