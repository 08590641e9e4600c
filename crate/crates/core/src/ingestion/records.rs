use std::collections::HashSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::IngestionError;
use crate::model::{char_len, Document, DocumentId, DocumentStatus, Section, Span};

/// Free-text fields, in the order they are concatenated.
pub const FREE_TEXT_FIELDS: [&str; 8] = [
    "main-complaint",
    "history-of-disease",
    "past-history",
    "family-history",
    "physical-examination",
    "main-diagnosis-hypothesis",
    "initial-plan",
    "observations",
];

/// One EHR entry as exported by the hospital system.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SourceRecord {
    pub occurrence_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patient_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub birth_date: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inclusion_date: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discharge_date: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discharge_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discharge_reason: Option<String>,
    #[serde(default, rename = "icd-10", skip_serializing_if = "Option::is_none")]
    pub icd_10: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub medical_specialty: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub care_reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub main_complaint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history_of_disease: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub past_history: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family_history: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub physical_examination: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub main_diagnosis_hypothesis: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_plan: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observations: Option<String>,
}

impl SourceRecord {
    /// Free-text fields paired with their names, in concatenation order.
    pub fn free_text(&self) -> [(&'static str, Option<&str>); 8] {
        fn f(v: &Option<String>) -> Option<&str> {
            v.as_deref()
        }
        [
            (FREE_TEXT_FIELDS[0], f(&self.main_complaint)),
            (FREE_TEXT_FIELDS[1], f(&self.history_of_disease)),
            (FREE_TEXT_FIELDS[2], f(&self.past_history)),
            (FREE_TEXT_FIELDS[3], f(&self.family_history)),
            (FREE_TEXT_FIELDS[4], f(&self.physical_examination)),
            (FREE_TEXT_FIELDS[5], f(&self.main_diagnosis_hypothesis)),
            (FREE_TEXT_FIELDS[6], f(&self.initial_plan)),
            (FREE_TEXT_FIELDS[7], f(&self.observations)),
        ]
    }

    /// Metadata copy without the free-text bodies (they live in the document text).
    pub fn metadata(&self) -> SourceRecord {
        SourceRecord {
            main_complaint: None,
            history_of_disease: None,
            past_history: None,
            family_history: None,
            physical_examination: None,
            main_diagnosis_hypothesis: None,
            initial_plan: None,
            observations: None,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportWarning {
    pub occurrence_id: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportReport {
    pub documents: Vec<Document>,
    pub warnings: Vec<ImportWarning>,
}

/// Parses a JSON Lines batch. Blank lines are skipped.
pub fn parse_jsonl(input: &str) -> Result<Vec<SourceRecord>, IngestionError> {
    input
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| IngestionError::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Builds one document per record by concatenating its non-empty free-text
/// fields, each under a `## <field>` header line.
pub fn import_records(batch: Vec<SourceRecord>) -> Result<ImportReport, IngestionError> {
    if batch.is_empty() {
        return Err(IngestionError::EmptyBatch);
    }
    let mut seen = HashSet::new();
    for rec in &batch {
        if !seen.insert(rec.occurrence_id) {
            return Err(IngestionError::DuplicateOccurrence(rec.occurrence_id));
        }
    }

    let mut documents = Vec::new();
    let mut warnings = Vec::new();
    for rec in batch {
        let mut text = String::new();
        let mut sections = Vec::new();
        let mut len = 0;
        for (name, body) in rec.free_text() {
            let Some(body) = body.filter(|b| !b.trim().is_empty()) else {
                continue;
            };
            let header = if text.is_empty() {
                format!("## {name}\n")
            } else {
                format!("\n## {name}\n")
            };
            text.push_str(&header);
            len += char_len(&header);
            let body_len = char_len(body);
            text.push_str(body);
            sections.push(Section {
                name: name.to_string(),
                span: Span {
                    start: len,
                    end: len + body_len,
                },
            });
            len += body_len;
        }
        if sections.is_empty() {
            warnings.push(ImportWarning {
                occurrence_id: rec.occurrence_id,
                message: "all free-text fields are empty; record skipped".to_string(),
            });
            continue;
        }
        documents.push(Document {
            id: DocumentId(rec.occurrence_id.to_string()),
            source: rec.metadata(),
            text,
            sections,
            status: DocumentStatus::Imported,
        });
    }
    Ok(ImportReport { documents, warnings })
}
