use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use super::{ArtifactKind, ArtifactRecord, CorpusError, CorpusStore, LifecycleDates};

/// Label derivation settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelConfig {
    pub horizon_days: i64,
    /// Count evidence without a date as positive. Off by default: such
    /// evidence cannot be confirmed to fall within the horizon.
    pub accept_undated_evidence: bool,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            horizon_days: 365,
            accept_undated_evidence: false,
        }
    }
}

/// Outcome of exploit-date estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExploitTiming {
    /// No dated evidence.
    Absent,
    /// Earliest evidence precedes disclosure; excluded from imminence analysis.
    ZeroDay(NaiveDate),
    Dated(NaiveDate),
}

impl ExploitTiming {
    pub fn date(self) -> Option<NaiveDate> {
        match self {
            ExploitTiming::Dated(d) => Some(d),
            _ => None,
        }
    }
}

/// `d` shifted by a signed number of days.
pub fn add_days(d: NaiveDate, days: i64) -> NaiveDate {
    if days >= 0 {
        d.checked_add_days(Days::new(days as u64)).expect("date in range")
    } else {
        d.checked_sub_days(Days::new(days.unsigned_abs()))
            .expect("date in range")
    }
}

impl CorpusStore {
    /// Earliest of all write-up dates and the NVD publication date.
    pub fn estimate_disclosure(&self, id: &str) -> Result<NaiveDate, CorpusError> {
        let v = self.vuln(id).ok_or_else(|| CorpusError::UnknownVuln(id.to_string()))?;
        self.artifacts(id)
            .iter()
            .filter(|a| a.kind == ArtifactKind::Writeup)
            .map(|a| a.date)
            .chain(v.nvd_published)
            .min()
            .ok_or_else(|| CorpusError::Undatable(id.to_string()))
    }

    /// Earliest dated exploit evidence, provided it does not precede disclosure.
    pub fn estimate_exploit_date(&self, id: &str) -> ExploitTiming {
        let Some(first) = self.evidence(id).iter().filter_map(|e| e.date).min() else {
            return ExploitTiming::Absent;
        };
        match self.estimate_disclosure(id) {
            Ok(disclosure) if first < disclosure => ExploitTiming::ZeroDay(first),
            Ok(_) => ExploitTiming::Dated(first),
            Err(_) => ExploitTiming::Absent,
        }
    }

    /// 1 iff some exploit evidence is confirmed within `horizon_days` of disclosure.
    pub fn label(&self, id: &str, cfg: &LabelConfig) -> Result<u8, CorpusError> {
        let disclosure = self.estimate_disclosure(id)?;
        let deadline = add_days(disclosure, cfg.horizon_days);
        let hit = self.evidence(id).iter().any(|e| match e.date {
            Some(d) => d <= deadline,
            None => cfg.accept_undated_evidence,
        });
        Ok(hit as u8)
    }

    pub fn lifecycle(&self, id: &str, cfg: &LabelConfig) -> Result<LifecycleDates, CorpusError> {
        Ok(LifecycleDates {
            disclosure: self.estimate_disclosure(id)?,
            exploit_available: self.estimate_exploit_date(id).date(),
            label_horizon_days: cfg.horizon_days,
        })
    }

    /// Artifacts dated on or before `z`, ordered by (date, source).
    pub fn snapshot(&self, id: &str, z: NaiveDate) -> Vec<&ArtifactRecord> {
        let mut out: Vec<&ArtifactRecord> = self.artifacts(id).iter().filter(|a| a.date <= z).collect();
        out.sort_by(|a, b| (a.date, &a.source).cmp(&(b.date, &b.source)));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{EvidenceKind, ExploitEvidence, VulnRecord};

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn art(id: &str, kind: ArtifactKind, date: &str, source: &str) -> ArtifactRecord {
        ArtifactRecord {
            vuln_id: id.into(),
            kind,
            date: d(date),
            source: source.into(),
            content: b"x".to_vec(),
            declared_extension: None,
        }
    }

    fn ev(id: &str, date: Option<NaiveDate>) -> ExploitEvidence {
        ExploitEvidence {
            vuln_id: id.into(),
            source: "metasploit".into(),
            kind: EvidenceKind::Functional,
            date,
        }
    }

    fn store_with(nvd: Option<&str>, writeups: &[&str]) -> CorpusStore {
        let mut s = CorpusStore::new();
        let mut v = VulnRecord::new("CVE-1");
        v.nvd_published = nvd.map(d);
        s.add_vuln(v);
        for (k, w) in writeups.iter().enumerate() {
            s.add_artifact(art("CVE-1", ArtifactKind::Writeup, w, &format!("src{k}")))
                .unwrap();
        }
        s
    }

    #[test]
    fn disclosure_is_min_over_writeups_and_nvd() {
        let s = store_with(Some("2018-05-09"), &["2018-05-08", "2018-05-10"]);
        assert_eq!(s.estimate_disclosure("CVE-1").unwrap(), d("2018-05-08"));
        let s = store_with(Some("2019-01-01"), &[]);
        assert_eq!(s.estimate_disclosure("CVE-1").unwrap(), d("2019-01-01"));
        let s = store_with(None, &[]);
        assert!(matches!(s.estimate_disclosure("CVE-1"), Err(CorpusError::Undatable(_))));
    }

    #[test]
    fn poc_dates_do_not_move_disclosure() {
        let mut s = store_with(Some("2019-01-10"), &[]);
        s.add_artifact(art("CVE-1", ArtifactKind::Poc, "2019-01-01", "edb"))
            .unwrap();
        assert_eq!(s.estimate_disclosure("CVE-1").unwrap(), d("2019-01-10"));
    }

    #[test]
    fn exploit_date_rules() {
        let disc = d("2019-03-01");
        let mut s = store_with(Some("2019-03-01"), &[]);
        assert_eq!(s.estimate_exploit_date("CVE-1"), ExploitTiming::Absent);
        s.add_evidence(ev("CVE-1", Some(add_days(disc, 125)))).unwrap();
        s.add_evidence(ev("CVE-1", Some(add_days(disc, 8)))).unwrap();
        s.add_evidence(ev("CVE-1", None)).unwrap();
        assert_eq!(
            s.estimate_exploit_date("CVE-1"),
            ExploitTiming::Dated(add_days(disc, 8))
        );

        let mut s = store_with(Some("2019-03-01"), &[]);
        s.add_evidence(ev("CVE-1", Some(add_days(disc, -3)))).unwrap();
        let t = s.estimate_exploit_date("CVE-1");
        assert_eq!(t, ExploitTiming::ZeroDay(add_days(disc, -3)));
        assert_eq!(t.date(), None);
    }

    #[test]
    fn labels_respect_horizon_and_undated_flag() {
        let disc = d("2019-03-05");
        let cfg = LabelConfig::default();
        let mut s = store_with(Some("2019-03-05"), &[]);
        assert_eq!(s.label("CVE-1", &cfg).unwrap(), 0);
        s.add_evidence(ev("CVE-1", Some(add_days(disc, 412)))).unwrap();
        assert_eq!(s.label("CVE-1", &cfg).unwrap(), 0);
        s.add_evidence(ev("CVE-1", None)).unwrap();
        assert_eq!(s.label("CVE-1", &cfg).unwrap(), 0);
        let lax = LabelConfig {
            accept_undated_evidence: true,
            ..cfg
        };
        assert_eq!(s.label("CVE-1", &lax).unwrap(), 1);
        s.add_evidence(ev("CVE-1", Some(add_days(disc, 86)))).unwrap();
        assert_eq!(s.label("CVE-1", &cfg).unwrap(), 1);
        // boundary: exactly at the horizon counts
        let mut s = store_with(Some("2019-03-05"), &[]);
        s.add_evidence(ev("CVE-1", Some(add_days(disc, 365)))).unwrap();
        assert_eq!(s.label("CVE-1", &cfg).unwrap(), 1);
    }

    #[test]
    fn snapshot_filters_and_orders() {
        let mut s = store_with(Some("2020-01-01"), &[]);
        let base = d("2020-01-01");
        for (off, src) in [(40, "c"), (0, "b"), (10, "a"), (0, "a")] {
            let date = add_days(base, off).to_string();
            s.add_artifact(art("CVE-1", ArtifactKind::Poc, &date, src)).unwrap();
        }
        let snap = s.snapshot("CVE-1", add_days(base, 30));
        assert_eq!(snap.len(), 3);
        let order: Vec<_> = snap.iter().map(|a| (a.date, a.source.as_str())).collect();
        assert_eq!(order, vec![(base, "a"), (base, "b"), (add_days(base, 10), "a")]);
        assert_eq!(s.snapshot("CVE-1", base).len(), 2);
    }
}
