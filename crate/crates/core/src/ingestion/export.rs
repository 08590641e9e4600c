use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::{Deserialize, Serialize};

use super::IngestionError;
use crate::adjudication::GoldDocument;
use crate::agreement::{DocumentAgreement, SegmentLabel};
use crate::model::{char_slice, Document, DocumentStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Json,
    Xml,
}

impl FromStr for ExportFormat {
    type Err = IngestionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ExportFormat::Json),
            "xml" => Ok(ExportFormat::Xml),
            other => Err(IngestionError::Malformed(format!("unknown export format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldSection {
    pub name: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct GoldDocumentRecord {
    pub id: String,
    pub occurrence_id: u64,
    pub medical_specialty: Option<String>,
    pub sections: Vec<GoldSection>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldAnnotationRecord {
    pub id: String,
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub types: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expansion: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRelationRecord {
    pub id: String,
    pub source: String,
    pub target: String,
    pub rtype: String,
}

/// Per-document agreement carried along with the gold annotations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IaaSummary {
    pub strict: Option<f64>,
    pub lenient: Option<f64>,
    pub flexible: Option<f64>,
    pub relaxed: Option<f64>,
    pub relations: Option<f64>,
}

impl From<&DocumentAgreement> for IaaSummary {
    fn from(a: &DocumentAgreement) -> Self {
        IaaSummary {
            strict: a.concepts.strict.value,
            lenient: a.concepts.lenient.value,
            flexible: a.concepts.flexible.value,
            relaxed: a.concepts.relaxed.value,
            relations: a.relations.value,
        }
    }
}

/// Standoff export of one adjudicated document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub document: GoldDocumentRecord,
    pub annotations: Vec<GoldAnnotationRecord>,
    pub relations: Vec<GoldRelationRecord>,
    pub segment: SegmentLabel,
    pub iaa: IaaSummary,
}

impl GoldRecord {
    pub fn assemble(doc: &Document, gold: &GoldDocument, iaa: IaaSummary) -> Result<Self, IngestionError> {
        if doc.status != DocumentStatus::Adjudicated {
            return Err(IngestionError::NotAdjudicated(doc.id.clone()));
        }
        if gold.document != doc.id {
            return Err(IngestionError::Malformed(format!(
                "gold result for {} does not belong to document {}",
                gold.document, doc.id
            )));
        }
        let annotations = gold
            .annotations
            .iter()
            .map(|a| {
                let surface = char_slice(&doc.text, a.span)
                    .ok_or_else(|| IngestionError::Malformed(format!("annotation {} is out of bounds", a.id)))?;
                Ok(GoldAnnotationRecord {
                    id: a.id.to_string(),
                    start: a.span.start,
                    end: a.span.end,
                    surface: surface.to_string(),
                    types: a.types.iter().cloned().collect(),
                    expansion: a.expansion.clone(),
                })
            })
            .collect::<Result<Vec<_>, IngestionError>>()?;
        let relations = gold
            .relations
            .iter()
            .map(|r| GoldRelationRecord {
                id: r.id.to_string(),
                source: r.source.to_string(),
                target: r.target.to_string(),
                rtype: r.rtype.code().to_string(),
            })
            .collect();
        let mut record = GoldRecord {
            document: GoldDocumentRecord {
                id: doc.id.to_string(),
                occurrence_id: doc.source.occurrence_id,
                medical_specialty: doc.source.medical_specialty.clone(),
                sections: doc
                    .sections
                    .iter()
                    .map(|s| GoldSection {
                        name: s.name.clone(),
                        start: s.span.start,
                        end: s.span.end,
                    })
                    .collect(),
                text: doc.text.clone(),
            },
            annotations,
            relations,
            segment: gold.segment,
            iaa,
        };
        record.normalize();
        Ok(record)
    }

    /// Puts annotations and relations into export order.
    pub fn normalize(&mut self) {
        for a in &mut self.annotations {
            a.types.sort();
            a.types.dedup();
        }
        self.annotations
            .sort_by(|x, y| (x.start, x.end, x.types.first(), &x.id).cmp(&(y.start, y.end, y.types.first(), &y.id)));
        self.relations
            .sort_by(|x, y| (&x.source, &x.target, &x.id).cmp(&(&y.source, &y.target, &y.id)));
    }
}

pub fn export_gold(record: &GoldRecord, format: ExportFormat) -> Vec<u8> {
    let mut record = record.clone();
    record.normalize();
    match format {
        ExportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(&record).expect("gold record serializes");
            out.push(b'\n');
            out
        }
        ExportFormat::Xml => to_xml(&record).into_bytes(),
    }
}

pub fn parse_gold(bytes: &[u8], format: ExportFormat) -> Result<GoldRecord, IngestionError> {
    match format {
        ExportFormat::Json => serde_json::from_slice(bytes).map_err(|e| IngestionError::Malformed(e.to_string())),
        ExportFormat::Xml => {
            let mut records = from_xml(std::str::from_utf8(bytes).map_err(malformed)?)?;
            if records.len() != 1 {
                return Err(malformed(format!(
                    "expected one <gold> element, found {}",
                    records.len()
                )));
            }
            Ok(records.remove(0))
        }
    }
}

/// Several documents in one stream: a JSON array, or `<gold>` elements under
/// a `<corpus>` root.
pub fn export_corpus(records: &[GoldRecord], format: ExportFormat) -> Vec<u8> {
    let mut records = records.to_vec();
    records.iter_mut().for_each(GoldRecord::normalize);
    match format {
        ExportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(&records).expect("gold records serialize");
            out.push(b'\n');
            out
        }
        ExportFormat::Xml => {
            let mut out = String::from(XML_DECL);
            out.push_str("<corpus>\n");
            for r in &records {
                out.push_str(&to_xml(r)[XML_DECL.len()..]);
            }
            out.push_str("</corpus>\n");
            out.into_bytes()
        }
    }
}

pub fn parse_corpus(bytes: &[u8], format: ExportFormat) -> Result<Vec<GoldRecord>, IngestionError> {
    match format {
        ExportFormat::Json => serde_json::from_slice(bytes).map_err(malformed),
        ExportFormat::Xml => from_xml(std::str::from_utf8(bytes).map_err(malformed)?),
    }
}

const XML_DECL: &str = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";

fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
    out
}

fn fmt_opt(v: Option<f64>) -> Option<String> {
    v.map(|x| x.to_string())
}

fn attrs(out: &mut String, pairs: &[(&str, Option<String>)]) {
    for (k, v) in pairs {
        if let Some(v) = v {
            let _ = write!(out, " {k}=\"{}\"", escape_attr(v));
        }
    }
}

fn to_xml(r: &GoldRecord) -> String {
    let mut out = String::from(XML_DECL);
    let _ = writeln!(out, "<gold segment=\"{}\">", r.segment.as_str());
    out.push_str("  <document");
    attrs(
        &mut out,
        &[
            ("id", Some(r.document.id.clone())),
            ("occurrence-id", Some(r.document.occurrence_id.to_string())),
            ("medical-specialty", r.document.medical_specialty.clone()),
        ],
    );
    out.push_str(">\n    <sections>\n");
    for s in &r.document.sections {
        out.push_str("      <section");
        attrs(
            &mut out,
            &[
                ("name", Some(s.name.clone())),
                ("start", Some(s.start.to_string())),
                ("end", Some(s.end.to_string())),
            ],
        );
        out.push_str("/>\n");
    }
    out.push_str("    </sections>\n    <text>");
    if !r.document.text.is_empty() {
        out.push_str("<![CDATA[");
        out.push_str(&r.document.text.replace("]]>", "]]]]><![CDATA[>"));
        out.push_str("]]>");
    }
    out.push_str("</text>\n  </document>\n  <annotations>\n");
    for a in &r.annotations {
        out.push_str("    <annotation");
        attrs(
            &mut out,
            &[
                ("id", Some(a.id.clone())),
                ("start", Some(a.start.to_string())),
                ("end", Some(a.end.to_string())),
                ("surface", Some(a.surface.clone())),
                ("types", Some(a.types.join(" "))),
                ("expansion", a.expansion.clone()),
            ],
        );
        out.push_str("/>\n");
    }
    out.push_str("  </annotations>\n  <relations>\n");
    for rel in &r.relations {
        out.push_str("    <relation");
        attrs(
            &mut out,
            &[
                ("id", Some(rel.id.clone())),
                ("source", Some(rel.source.clone())),
                ("target", Some(rel.target.clone())),
                ("rtype", Some(rel.rtype.clone())),
            ],
        );
        out.push_str("/>\n");
    }
    out.push_str("  </relations>\n  <iaa");
    attrs(
        &mut out,
        &[
            ("strict", fmt_opt(r.iaa.strict)),
            ("lenient", fmt_opt(r.iaa.lenient)),
            ("flexible", fmt_opt(r.iaa.flexible)),
            ("relaxed", fmt_opt(r.iaa.relaxed)),
            ("relations", fmt_opt(r.iaa.relations)),
        ],
    );
    out.push_str("/>\n</gold>\n");
    out
}

fn malformed(msg: impl std::fmt::Display) -> IngestionError {
    IngestionError::Malformed(msg.to_string())
}

struct Attrs(HashMap<String, String>, String);

impl Attrs {
    fn read(e: &BytesStart<'_>) -> Result<Self, IngestionError> {
        let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
        let mut map = HashMap::new();
        for attr in e.attributes() {
            let attr = attr.map_err(malformed)?;
            let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
            let value = attr.unescape_value().map_err(malformed)?.into_owned();
            map.insert(key, value);
        }
        Ok(Attrs(map, name))
    }

    fn opt(&mut self, key: &str) -> Option<String> {
        self.0.remove(key)
    }

    fn req(&mut self, key: &str) -> Result<String, IngestionError> {
        self.opt(key)
            .ok_or_else(|| malformed(format!("<{}> is missing attribute `{key}`", self.1)))
    }

    fn num<T: FromStr>(&mut self, key: &str) -> Result<T, IngestionError> {
        let raw = self.req(key)?;
        raw.parse()
            .map_err(|_| malformed(format!("<{}> attribute `{key}` is not a number: {raw}", self.1)))
    }

    fn opt_f64(&mut self, key: &str) -> Result<Option<f64>, IngestionError> {
        match self.opt(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| malformed(format!("<iaa> attribute `{key}` is not a number: {raw}"))),
        }
    }
}

/// Parses every `<gold>` element of `input`, in order.
fn from_xml(input: &str) -> Result<Vec<GoldRecord>, IngestionError> {
    let mut reader = Reader::from_str(input);
    let mut out = Vec::new();
    let mut segment = None;
    let mut document: Option<GoldDocumentRecord> = None;
    let mut annotations = Vec::new();
    let mut relations = Vec::new();
    let mut iaa = None;
    let mut in_text = false;

    loop {
        let event = reader.read_event().map_err(malformed)?;
        match event {
            Event::Eof => break,
            Event::Start(ref e) | Event::Empty(ref e) => {
                let mut a = Attrs::read(e)?;
                match a.1.as_str() {
                    "gold" => {
                        if segment.is_some() {
                            return Err(malformed("nested <gold>"));
                        }
                        let raw = a.req("segment")?;
                        segment =
                            Some(SegmentLabel::parse(&raw).ok_or_else(|| malformed(format!("bad segment {raw}")))?);
                        if matches!(event, Event::Empty(_)) {
                            return Err(malformed("empty <gold>"));
                        }
                    }
                    "corpus" => {}
                    "document" => {
                        document = Some(GoldDocumentRecord {
                            id: a.req("id")?,
                            occurrence_id: a.num("occurrence-id")?,
                            medical_specialty: a.opt("medical-specialty"),
                            sections: Vec::new(),
                            text: String::new(),
                        });
                    }
                    "section" => {
                        let doc = document
                            .as_mut()
                            .ok_or_else(|| malformed("<section> outside <document>"))?;
                        doc.sections.push(GoldSection {
                            name: a.req("name")?,
                            start: a.num("start")?,
                            end: a.num("end")?,
                        });
                    }
                    "text" => in_text = matches!(event, Event::Start(_)),
                    "annotation" => annotations.push(GoldAnnotationRecord {
                        id: a.req("id")?,
                        start: a.num("start")?,
                        end: a.num("end")?,
                        surface: a.req("surface")?,
                        types: a
                            .req("types")?
                            .split(' ')
                            .filter(|t| !t.is_empty())
                            .map(str::to_string)
                            .collect(),
                        expansion: a.opt("expansion"),
                    }),
                    "relation" => relations.push(GoldRelationRecord {
                        id: a.req("id")?,
                        source: a.req("source")?,
                        target: a.req("target")?,
                        rtype: a.req("rtype")?,
                    }),
                    "iaa" => {
                        iaa = Some(IaaSummary {
                            strict: a.opt_f64("strict")?,
                            lenient: a.opt_f64("lenient")?,
                            flexible: a.opt_f64("flexible")?,
                            relaxed: a.opt_f64("relaxed")?,
                            relations: a.opt_f64("relations")?,
                        })
                    }
                    "sections" | "annotations" | "relations" => {}
                    other => return Err(malformed(format!("unexpected element <{other}>"))),
                }
            }
            Event::CData(data) if in_text => {
                let chunk = std::str::from_utf8(&data).map_err(malformed)?;
                document
                    .as_mut()
                    .ok_or_else(|| malformed("<text> outside <document>"))?
                    .text
                    .push_str(chunk);
            }
            Event::Text(t) if in_text => {
                let chunk = t.unescape().map_err(malformed)?;
                document
                    .as_mut()
                    .ok_or_else(|| malformed("<text> outside <document>"))?
                    .text
                    .push_str(&chunk);
            }
            Event::End(ref e) if e.name().as_ref() == b"text" => in_text = false,
            Event::End(ref e) if e.name().as_ref() == b"gold" => out.push(GoldRecord {
                document: document.take().ok_or_else(|| malformed("missing <document>"))?,
                annotations: std::mem::take(&mut annotations),
                relations: std::mem::take(&mut relations),
                segment: segment.take().ok_or_else(|| malformed("missing <gold segment>"))?,
                iaa: iaa.take().ok_or_else(|| malformed("missing <iaa>"))?,
            }),
            _ => {}
        }
    }
    if segment.is_some() {
        return Err(malformed("unterminated <gold>"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> GoldRecord {
        let text = "## history-of-disease\nPaciente nega algia & \"febre\" <38> ]]> fim\n\tUTI";
        GoldRecord {
            document: GoldDocumentRecord {
                id: "42".into(),
                occurrence_id: 42,
                medical_specialty: Some("Cardiologia".into()),
                sections: vec![GoldSection {
                    name: "history-of-disease".into(),
                    start: 22,
                    end: text.chars().count(),
                }],
                text: text.into(),
            },
            annotations: vec![
                GoldAnnotationRecord {
                    id: "a2".into(),
                    start: 36,
                    end: 41,
                    surface: "algia".into(),
                    types: vec!["sosy".into()],
                    expansion: None,
                },
                GoldAnnotationRecord {
                    id: "a1".into(),
                    start: 31,
                    end: 35,
                    surface: "nega".into(),
                    types: vec!["negt".into()],
                    expansion: None,
                },
                GoldAnnotationRecord {
                    id: "a3".into(),
                    start: 66,
                    end: 69,
                    surface: "UTI".into(),
                    types: vec!["hcro".into(), "abbr".into()],
                    expansion: Some("Unidade de Terapia Intensiva <UTI>".into()),
                },
            ],
            relations: vec![GoldRelationRecord {
                id: "r1".into(),
                source: "a1".into(),
                target: "a2".into(),
                rtype: "negation_of".into(),
            }],
            segment: SegmentLabel::Gold,
            iaa: IaaSummary {
                strict: Some(0.1 + 0.2),
                lenient: Some(2.0 / 3.0),
                flexible: Some(1.0),
                relaxed: Some(1.0),
                relations: None,
            },
        }
    }

    #[test]
    fn json_has_expected_top_level_keys() {
        let bytes = export_gold(&record(), ExportFormat::Json);
        let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["annotations", "document", "iaa", "relations", "segment"]);
        assert_eq!(v["segment"], "gold");
        assert_eq!(v["document"]["occurrence-id"], 42);
        assert!(v["annotations"][0].get("expansion").is_none());
        assert!(v["iaa"]["relations"].is_null());
    }

    #[test]
    fn export_order_is_stable() {
        let r = record();
        let mut shuffled = r.clone();
        shuffled.annotations.reverse();
        assert_eq!(
            export_gold(&r, ExportFormat::Json),
            export_gold(&shuffled, ExportFormat::Json)
        );
        let parsed = parse_gold(&export_gold(&r, ExportFormat::Json), ExportFormat::Json).unwrap();
        let ids: Vec<_> = parsed.annotations.iter().map(|a| a.id.as_str()).collect();
        assert_eq!(ids, ["a1", "a2", "a3"]);
        assert_eq!(parsed.annotations[2].types, ["abbr", "hcro"]);
    }

    #[test]
    fn round_trips_are_byte_identical() {
        for format in [ExportFormat::Json, ExportFormat::Xml] {
            let first = export_gold(&record(), format);
            let again = export_gold(&parse_gold(&first, format).unwrap(), format);
            assert_eq!(first, again, "{format:?}");
        }
    }

    #[test]
    fn json_and_xml_parse_to_same_model() {
        let r = record();
        let from_json = parse_gold(&export_gold(&r, ExportFormat::Json), ExportFormat::Json).unwrap();
        let from_xml = parse_gold(&export_gold(&r, ExportFormat::Xml), ExportFormat::Xml).unwrap();
        assert_eq!(from_json, from_xml);
        assert_eq!(from_xml.document.text, r.document.text);
        assert_eq!(from_xml.iaa.strict, Some(0.1 + 0.2));
    }

    #[test]
    fn corpus_round_trip() {
        let mut second = record();
        second.document.id = "43".into();
        second.segment = SegmentLabel::Platinum;
        let corpus = vec![record(), second];
        for format in [ExportFormat::Json, ExportFormat::Xml] {
            let bytes = export_corpus(&corpus, format);
            let parsed = parse_corpus(&bytes, format).unwrap();
            assert_eq!(parsed.len(), 2);
            assert_eq!(parsed[1].segment, SegmentLabel::Platinum);
            assert_eq!(export_corpus(&parsed, format), bytes);
        }
        assert!(parse_gold(&export_corpus(&corpus, ExportFormat::Xml), ExportFormat::Xml).is_err());
    }

    #[test]
    fn xml_rejects_missing_parts() {
        assert!(parse_gold(b"<gold segment=\"gold\"></gold>", ExportFormat::Xml).is_err());
        assert!(parse_gold(b"<gold segment=\"silver\"/>", ExportFormat::Xml).is_err());
        assert!(parse_gold(b"{}", ExportFormat::Json).is_err());
    }
}
