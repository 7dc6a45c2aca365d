//! Shared record types.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Lang {
    #[serde(rename = "EN")]
    En,
    #[serde(rename = "ES")]
    Es,
}

impl Lang {
    pub const ALL: [Lang; 2] = [Lang::En, Lang::Es];

    pub fn code(self) -> &'static str {
        match self {
            Lang::En => "EN",
            Lang::Es => "ES",
        }
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Lang {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "EN" => Ok(Lang::En),
            "ES" => Ok(Lang::Es),
            other => Err(Error::invalid(format!("unknown language {other:?}"))),
        }
    }
}

/// Narrative element category. Serialized as its single-letter code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    Agent,
    Facilitator,
    Campaigner,
    Victim,
    Objective,
    NegativeEffect,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Agent,
        Category::Facilitator,
        Category::Campaigner,
        Category::Victim,
        Category::Objective,
        Category::NegativeEffect,
    ];

    pub fn letter(self) -> char {
        match self {
            Category::Agent => 'A',
            Category::Facilitator => 'F',
            Category::Campaigner => 'C',
            Category::Victim => 'V',
            Category::Objective => 'O',
            Category::NegativeEffect => 'E',
        }
    }

    pub fn from_letter(c: char) -> Option<Category> {
        Category::ALL.into_iter().find(|cat| cat.letter() == c)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Category::from_letter(c),
            _ => match s {
                "AGENT" | "AGENTS" => Some(Category::Agent),
                "FACILITATOR" | "FACILITATORS" => Some(Category::Facilitator),
                "CAMPAIGNER" | "CAMPAIGNERS" => Some(Category::Campaigner),
                "VICTIM" | "VICTIMS" => Some(Category::Victim),
                "OBJECTIVE" | "OBJECTIVES" => Some(Category::Objective),
                "NEGATIVE_EFFECT" | "NEGATIVE_EFFECTS" => Some(Category::NegativeEffect),
                _ => None,
            },
        }
        .ok_or_else(|| Error::invalid(format!("unknown category {s:?}")))
    }
}

impl Serialize for Category {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.letter().to_string())
    }
}

impl<'de> Deserialize<'de> for Category {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A categorized character range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub category: Category,
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(category: Category, start: usize, end: usize) -> Self {
        Span {
            category,
            start,
            end,
        }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of shared characters.
    pub fn overlap(&self, other: &Span) -> usize {
        self.end
            .min(other.end)
            .saturating_sub(self.start.max(other.start))
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn check_bounds(&self, text_len: usize) -> Result<()> {
        if self.start < self.end && self.end <= text_len {
            Ok(())
        } else {
            Err(Error::OffsetOutOfRange {
                start: self.start,
                end: self.end,
                len: text_len,
            })
        }
    }
}

impl PartialOrd for Span {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Span {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.start, self.end, self.category).cmp(&(other.start, other.end, other.category))
    }
}

/// Sorts, deduplicates and drops spans nested inside a same-category span.
pub fn normalize_spans(mut spans: Vec<Span>) -> Vec<Span> {
    // outer spans first: start ascending, end descending
    spans.sort_by(|a, b| {
        (a.category, a.start, std::cmp::Reverse(a.end)).cmp(&(
            b.category,
            b.start,
            std::cmp::Reverse(b.end),
        ))
    });
    spans.dedup();
    let mut kept: Vec<Span> = Vec::with_capacity(spans.len());
    // per category, the furthest end seen so far; since starts are sorted a
    // span is nested iff some earlier span of its category reaches its end
    let mut reach: [Option<usize>; 6] = [None; 6];
    for s in spans {
        let r = &mut reach[s.category.index()];
        match *r {
            Some(end) if end >= s.end => continue,
            _ => {
                *r = Some(r.map_or(s.end, |e| e.max(s.end)));
                kept.push(s);
            }
        }
    }
    kept.sort();
    kept
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TextClass {
    Conspiracy,
    Critical,
}

impl TextClass {
    pub const ALL: [TextClass; 2] = [TextClass::Conspiracy, TextClass::Critical];

    pub fn name(self) -> &'static str {
        match self {
            TextClass::Conspiracy => "CONSPIRACY",
            TextClass::Critical => "CRITICAL",
        }
    }
}

impl fmt::Display for TextClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "RawMessage")]
pub struct Message {
    pub id: String,
    pub lang: Lang,
    pub text: String,
    pub channel_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author_id: Option<String>,
    pub token_count: usize,
    #[serde(skip)]
    declared_token_count: Option<usize>,
}

impl PartialEq for Message {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.lang == other.lang
            && self.text == other.text
            && self.channel_id == other.channel_id
            && self.author_id == other.author_id
            && self.token_count == other.token_count
    }
}

impl Eq for Message {}

#[derive(Deserialize)]
struct RawMessage {
    id: String,
    lang: Lang,
    text: String,
    channel_id: String,
    #[serde(default)]
    author_id: Option<String>,
    #[serde(default)]
    token_count: Option<usize>,
}

impl From<RawMessage> for Message {
    fn from(raw: RawMessage) -> Self {
        let token_count = text::token_count(&raw.text);
        Message {
            id: raw.id,
            lang: raw.lang,
            text: raw.text,
            channel_id: raw.channel_id,
            author_id: raw.author_id,
            token_count,
            declared_token_count: raw.token_count,
        }
    }
}

impl Message {
    pub fn new(
        id: impl Into<String>,
        lang: Lang,
        text: impl Into<String>,
        channel_id: impl Into<String>,
        author_id: Option<String>,
    ) -> Self {
        let text = text.into();
        Message {
            id: id.into(),
            lang,
            token_count: text::token_count(&text),
            text,
            channel_id: channel_id.into(),
            author_id,
            declared_token_count: None,
        }
    }

    /// Replaces the text and recomputes the token count.
    pub fn with_text(mut self, text: String) -> Self {
        self.token_count = text::token_count(&text);
        self.text = text;
        self.declared_token_count = None;
        self
    }
}

mod binary {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Flag {
            Int(u64),
            Bool(bool),
        }
        match Flag::deserialize(d)? {
            Flag::Int(0) | Flag::Bool(false) => Ok(false),
            Flag::Int(1) | Flag::Bool(true) => Ok(true),
            Flag::Int(n) => Err(serde::de::Error::custom(format!(
                "binary label must be 0 or 1, got {n}"
            ))),
        }
    }
}

/// One annotator's judgment of one message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub doc_id: String,
    pub annotator: String,
    #[serde(with = "binary")]
    pub conspiracy: bool,
    #[serde(with = "binary")]
    pub critical: bool,
    #[serde(default)]
    pub spans: Vec<Span>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl AnnotationRecord {
    pub fn class(&self) -> Option<TextClass> {
        match (self.conspiracy, self.critical) {
            (true, false) => Some(TextClass::Conspiracy),
            (false, true) => Some(TextClass::Critical),
            _ => None,
        }
    }
}

/// Merged ground truth for one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldDocument {
    pub doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<Lang>,
    #[serde(rename = "class")]
    pub klass: TextClass,
    #[serde(default)]
    pub spans: Vec<Span>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl GoldDocument {
    pub fn has_category(&self, cat: Category) -> bool {
        self.spans.iter().any(|s| s.category == cat)
    }
}

/// System output for one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub doc_id: String,
    #[serde(rename = "class", default, skip_serializing_if = "Option::is_none")]
    pub klass: Option<TextClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spans: Option<Vec<Span>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category_flags: Option<BTreeMap<Category, bool>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl PredictionSet {
    /// Text-level presence: explicit flags win over spans.
    pub fn has_category(&self, cat: Category) -> bool {
        if let Some(flags) = &self.category_flags {
            if let Some(&v) = flags.get(&cat) {
                return v;
            }
        }
        self.spans
            .as_ref()
            .is_some_and(|s| s.iter().any(|s| s.category == cat))
    }
}

/// Validation and normalization applied to every parsed record.
pub trait Record: Sized {
    /// Key that must be unique within one file.
    fn key(&self) -> String;

    fn validate(&mut self) -> std::result::Result<(), String>;

    /// Documents whose spans land only on whitespace. Not an error; reported
    /// by `validate` tooling.
    fn whitespace_spans(&self) -> Vec<Span> {
        Vec::new()
    }
}

fn validate_spans(
    spans: &mut Vec<Span>,
    text: Option<&str>,
) -> std::result::Result<(), String> {
    let len = text.map(text::char_len);
    for s in spans.iter() {
        if s.start >= s.end {
            return Err(format!("empty or inverted span [{}, {})", s.start, s.end));
        }
        if let Some(len) = len {
            s.check_bounds(len).map_err(|e| e.to_string())?;
        }
    }
    *spans = normalize_spans(std::mem::take(spans));
    Ok(())
}

fn whitespace_only(spans: &[Span], text: Option<&str>) -> Vec<Span> {
    let Some(text) = text else {
        return Vec::new();
    };
    let idx = text::CharIndex::new(text);
    spans
        .iter()
        .filter(|s| {
            idx.slice(text, s.start, s.end)
                .is_some_and(|sub| sub.trim().is_empty())
        })
        .copied()
        .collect()
}

impl Record for Message {
    fn key(&self) -> String {
        self.id.clone()
    }

    fn validate(&mut self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if let Some(declared) = self.declared_token_count {
            if declared != self.token_count {
                return Err(format!(
                    "token_count {declared} does not match text ({} whitespace tokens)",
                    self.token_count
                ));
            }
        }
        Ok(())
    }
}

impl Record for AnnotationRecord {
    fn key(&self) -> String {
        format!("{}\u{1f}{}", self.doc_id, self.annotator)
    }

    fn validate(&mut self) -> std::result::Result<(), String> {
        if self.conspiracy && self.critical {
            return Err("conspiracy and critical are mutually exclusive labels".into());
        }
        validate_spans(&mut self.spans, self.text.as_deref())
    }

    fn whitespace_spans(&self) -> Vec<Span> {
        whitespace_only(&self.spans, self.text.as_deref())
    }
}

impl Record for GoldDocument {
    fn key(&self) -> String {
        self.doc_id.clone()
    }

    fn validate(&mut self) -> std::result::Result<(), String> {
        validate_spans(&mut self.spans, self.text.as_deref())
    }

    fn whitespace_spans(&self) -> Vec<Span> {
        whitespace_only(&self.spans, self.text.as_deref())
    }
}

impl Record for PredictionSet {
    fn key(&self) -> String {
        self.doc_id.clone()
    }

    fn validate(&mut self) -> std::result::Result<(), String> {
        if self.klass.is_none() && self.spans.is_none() && self.category_flags.is_none() {
            return Err("prediction carries none of class, spans, category_flags".into());
        }
        if let Some(spans) = &mut self.spans {
            validate_spans(spans, self.text.as_deref())?;
        }
        Ok(())
    }

    fn whitespace_spans(&self) -> Vec<Span> {
        self.spans
            .as_deref()
            .map(|s| whitespace_only(s, self.text.as_deref()))
            .unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn category_letters_roundtrip() {
        for c in Category::ALL {
            assert_eq!(Category::from_letter(c.letter()), Some(c));
            assert_eq!(c.letter().to_string().parse::<Category>().unwrap(), c);
        }
        assert_eq!("NEGATIVE_EFFECT".parse::<Category>().unwrap(), Category::NegativeEffect);
        assert!("X".parse::<Category>().is_err());
    }

    #[test]
    fn nested_same_category_keeps_outer() {
        use Category::*;
        let spans = vec![
            Span::new(Agent, 5, 8),
            Span::new(Agent, 0, 10),
            Span::new(Victim, 5, 8),
            Span::new(Agent, 0, 10),
            Span::new(Agent, 9, 14),
        ];
        assert_eq!(
            normalize_spans(spans),
            vec![
                Span::new(Agent, 0, 10),
                Span::new(Victim, 5, 8),
                Span::new(Agent, 9, 14),
            ]
        );
    }

    #[test]
    fn nested_with_shared_start() {
        use Category::*;
        let spans = vec![Span::new(Agent, 0, 4), Span::new(Agent, 0, 10)];
        assert_eq!(normalize_spans(spans), vec![Span::new(Agent, 0, 10)]);
    }

    #[test]
    fn overlap_counts_chars() {
        let a = Span::new(Category::Agent, 0, 10);
        let b = Span::new(Category::Agent, 5, 15);
        assert_eq!(a.overlap(&b), 5);
        assert_eq!(a.overlap(&Span::new(Category::Agent, 10, 12)), 0);
    }

    #[test]
    fn mutually_exclusive_labels_rejected() {
        let mut r: AnnotationRecord = serde_json::from_str(
            r#"{"doc_id":"d","annotator":"a","conspiracy":1,"critical":1,"spans":[]}"#,
        )
        .unwrap();
        let err = r.validate().unwrap_err();
        assert!(err.contains("mutually exclusive"), "{err}");
    }

    #[test]
    fn span_offset_checked_against_text() {
        let text = "x".repeat(100);
        let mut g = GoldDocument {
            doc_id: "d".into(),
            lang: None,
            klass: TextClass::Critical,
            spans: vec![Span::new(Category::Agent, 10, 500)],
            text: Some(text),
        };
        assert!(g.validate().unwrap_err().contains("out of range"));
    }

    #[test]
    fn message_token_count_is_computed_and_checked() {
        let m: Message = serde_json::from_str(
            r#"{"id":"m1","lang":"EN","text":"a b  c","channel_id":"ch"}"#,
        )
        .unwrap();
        assert_eq!(m.token_count, 3);
        let mut bad: Message = serde_json::from_str(
            r#"{"id":"m1","lang":"EN","text":"a b","channel_id":"ch","token_count":5}"#,
        )
        .unwrap();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn prediction_presence_prefers_flags() {
        let p = PredictionSet {
            doc_id: "d".into(),
            klass: None,
            spans: Some(vec![Span::new(Category::Agent, 0, 3)]),
            category_flags: Some(BTreeMap::from([(Category::Agent, false)])),
            text: None,
        };
        assert!(!p.has_category(Category::Agent));
        assert!(!p.has_category(Category::Victim));
    }

    #[test]
    fn whitespace_only_spans_are_flagged() {
        let g = GoldDocument {
            doc_id: "d".into(),
            lang: None,
            klass: TextClass::Critical,
            spans: vec![Span::new(Category::Agent, 1, 3), Span::new(Category::Victim, 0, 1)],
            text: Some("a   b".into()),
        };
        assert_eq!(g.whitespace_spans(), vec![Span::new(Category::Agent, 1, 3)]);
    }
}
