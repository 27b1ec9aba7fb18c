use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::CauseRule;
use crate::vqa::TemplateId;

/// Evidence gathered for one cause over the analysed images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauseEvidence {
    pub cause_name: String,
    pub related_member: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proxy_for: Option<String>,
    pub events: Vec<String>,
    /// Images in which the related member was seen.
    pub n: usize,
    /// Of those, images in which at least one event was seen.
    pub m: usize,
    /// `m / n`, absent when `n == 0`.
    pub ratio: Option<f64>,
    /// `ratio` to two decimals, or `N/A`.
    pub ratio_display: String,
    /// Questions that failed and were counted as "no".
    pub degraded_questions: usize,
}

impl CauseEvidence {
    pub(crate) fn from_counts(rule: &CauseRule, n: usize, m: usize, degraded: usize) -> Self {
        debug_assert!(m <= n);
        let ratio = (n > 0).then(|| m as f64 / n as f64);
        Self {
            cause_name: rule.cause_name.clone(),
            related_member: rule.related_member.clone(),
            proxy_for: rule.proxy_for.clone(),
            events: rule.events.clone(),
            n,
            m,
            ratio,
            ratio_display: format_ratio(ratio),
            degraded_questions: degraded,
        }
    }
}

pub fn format_ratio(ratio: Option<f64>) -> String {
    match ratio {
        Some(r) => format!("{r:.2}"),
        None => "N/A".to_string(),
    }
}

/// Highest ratio first, causes without evidence (`N/A`) last, then by name.
pub fn rank_evidence(evidence: &mut [CauseEvidence]) {
    evidence.sort_by(|a, b| match (a.ratio, b.ratio) {
        (Some(x), Some(y)) => y
            .total_cmp(&x)
            .then_with(|| a.cause_name.cmp(&b.cause_name)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.cause_name.cmp(&b.cause_name),
    });
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Damage and member on the image of interest.
    Identify,
    /// Member and event questions for a cause.
    Evidence,
}

/// One question asked during a diagnosis and what came back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub stage: Stage,
    pub image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause_name: Option<String>,
    pub template_id: TemplateId,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    /// Set when the oracle failed or replied off-type; the answer is then
    /// taken as "no".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TranscriptEntry {
    pub fn answered_yes(&self) -> bool {
        self.error.is_none() && self.answer.as_deref() == Some(crate::vqa::YES)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventMode {
    /// Stop asking event questions on an image after the first "yes".
    #[default]
    ShortCircuit,
    /// Ask every event question, for a complete transcript.
    Full,
}

/// Settings that shaped a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub radius: f64,
    pub oracle: String,
    pub event_mode: EventMode,
    pub rules: Vec<CauseRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
    pub interest_image: String,
    pub identified_damage: String,
    pub identified_member: String,
    /// Interest image first, then surrounding images by distance.
    pub analysed_images: Vec<String>,
    pub surrounding_count: usize,
    pub excluded_count: usize,
    pub missed_count: usize,
    /// No configured rule is triggered by the identified damage.
    pub no_applicable_rules: bool,
    pub evidence: Vec<CauseEvidence>,
    pub degraded_questions: usize,
    pub transcript: Vec<TranscriptEntry>,
    pub config: ConfigEcho,
}

impl DiagnosisReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn evidence_for(&self, cause_name: &str) -> Option<&CauseEvidence> {
        self.evidence.iter().find(|e| e.cause_name == cause_name)
    }

    /// Plain-text cause table.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Image of interest: {}", self.interest_image);
        let _ = writeln!(out, "Damage:            {}", self.identified_damage);
        let _ = writeln!(out, "Member:            {}", self.identified_member);
        let _ = writeln!(
            out,
            "Analysed images:   {} (interest + {} surrounding within {} m)",
            self.analysed_images.len(),
            self.surrounding_count,
            self.config.radius
        );
        out.push('\n');
        if self.no_applicable_rules {
            let _ = writeln!(out, "No cause rules apply to {:?}.", self.identified_damage);
            return out;
        }

        let causes: Vec<String> = self
            .evidence
            .iter()
            .map(|e| match &e.proxy_for {
                Some(p) => format!("{} [{} for {}]", e.cause_name, e.related_member, p),
                None => format!("{} [{}]", e.cause_name, e.related_member),
            })
            .collect();
        let width = causes
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max("Damage cause".len());
        let _ = writeln!(
            out,
            "{:<width$}  {:>5}  {:>5}  {:>5}",
            "Damage cause", "N", "M", "M/N"
        );
        let _ = writeln!(out, "{}", "-".repeat(width + 21));
        for (label, e) in causes.iter().zip(&self.evidence) {
            let _ = writeln!(
                out,
                "{:<width$}  {:>5}  {:>5}  {:>5}",
                label, e.n, e.m, e.ratio_display
            );
        }
        if self.degraded_questions > 0 {
            let _ = writeln!(
                out,
                "\n{} question(s) failed and were counted as \"no\".",
                self.degraded_questions
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(name: &str, n: usize, m: usize) -> CauseEvidence {
        CauseEvidence::from_counts(
            &CauseRule::new(name, "corrosion", "slab", ["leaking"]),
            n,
            m,
            0,
        )
    }

    #[test]
    fn ratio_formatting_rounds_to_two_places() {
        assert_eq!(ev("a", 61, 58).ratio_display, "0.95");
        assert_eq!(ev("a", 22, 18).ratio_display, "0.82");
        assert_eq!(ev("a", 0, 0).ratio_display, "N/A");
        assert_eq!(ev("a", 0, 0).ratio, None);
        assert_eq!(ev("a", 3, 3).ratio_display, "1.00");
    }

    #[test]
    fn ranking() {
        let mut e = vec![
            ev("z", 0, 0),
            ev("b", 4, 2),
            ev("c", 22, 18),
            ev("a", 2, 1),
            ev("y", 0, 0),
        ];
        rank_evidence(&mut e);
        let names: Vec<_> = e.iter().map(|e| e.cause_name.as_str()).collect();
        assert_eq!(names, ["c", "a", "b", "y", "z"]);
    }
}
