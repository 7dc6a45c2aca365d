//! Gold-standard construction.
//!
//! Class labels come from a strict-majority vote over the label annotators.
//! Spans from the two span annotators are merged per category: overlapping
//! same-category spans from both annotators are joined into their hull,
//! spans only one annotator marked are dropped, and spans that collide with
//! a differently-labelled span of the other annotator are dropped unless
//! they also have same-category support.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    normalize_spans, AnnotationRecord, Category, GoldDocument, Lang, Message, Span, TextClass,
};
use crate::par::ExecMode;

pub const DEFAULT_ANNOTATORS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Vote {
    Conspiracy,
    Critical,
    Neither,
}

impl Vote {
    pub fn of(record: &AnnotationRecord) -> Vote {
        match record.class() {
            Some(TextClass::Conspiracy) => Vote::Conspiracy,
            Some(TextClass::Critical) => Vote::Critical,
            None => Vote::Neither,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VoteClass {
    Conspiracy,
    Critical,
    Neither,
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteOutcome {
    pub doc_id: String,
    #[serde(rename = "class")]
    pub klass: VoteClass,
    pub votes: BTreeMap<String, Vote>,
}

impl VoteOutcome {
    /// Documents with a neutral majority are left out of the gold corpus.
    pub fn excluded(&self) -> bool {
        self.klass == VoteClass::Neither
    }

    pub fn needs_adjudication(&self) -> bool {
        self.klass == VoteClass::Unresolved
    }

    pub fn text_class(&self) -> Option<TextClass> {
        match self.klass {
            VoteClass::Conspiracy => Some(TextClass::Conspiracy),
            VoteClass::Critical => Some(TextClass::Critical),
            _ => None,
        }
    }
}

/// Strict-majority vote over exactly `expected` annotators of one document.
pub fn majority_vote(records: &[&AnnotationRecord], expected: usize) -> Result<VoteOutcome> {
    let first = records
        .first()
        .ok_or_else(|| Error::invalid("majority vote over zero records"))?;
    if records.len() != expected {
        return Err(Error::invalid(format!(
            "document {}: expected {expected} annotators, got {}",
            first.doc_id,
            records.len()
        )));
    }
    let mut votes = BTreeMap::new();
    for r in records {
        if r.doc_id != first.doc_id {
            return Err(Error::invalid(format!(
                "majority vote mixes documents {} and {}",
                first.doc_id, r.doc_id
            )));
        }
        if votes.insert(r.annotator.clone(), Vote::of(r)).is_some() {
            return Err(Error::invalid(format!(
                "document {}: duplicate annotator {}",
                first.doc_id, r.annotator
            )));
        }
    }
    let mut tally: BTreeMap<Vote, usize> = BTreeMap::new();
    for v in votes.values() {
        *tally.entry(*v).or_default() += 1;
    }
    let klass = tally
        .iter()
        .find(|(_, &n)| 2 * n > expected)
        .map(|(v, _)| match v {
            Vote::Conspiracy => VoteClass::Conspiracy,
            Vote::Critical => VoteClass::Critical,
            Vote::Neither => VoteClass::Neither,
        })
        .unwrap_or(VoteClass::Unresolved);
    Ok(VoteOutcome {
        doc_id: first.doc_id.clone(),
        klass,
        votes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    First,
    Second,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::First => Side::Second,
            Side::Second => Side::First,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RejectReason {
    SingleAnnotator,
    LabelConflict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedSpan {
    pub side: Side,
    pub span: Span,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MergeResult {
    pub gold: Vec<Span>,
    pub rejected: Vec<RejectedSpan>,
    /// Gold spans kept although their hull overlaps a label conflict.
    pub retained_near_conflict: Vec<Span>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MergeConfig {
    /// Minimum shared characters for two differently-labelled spans to count
    /// as a label conflict.
    pub conflict_overlap: usize,
}

impl Default for MergeConfig {
    fn default() -> Self {
        MergeConfig {
            conflict_overlap: 1,
        }
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

pub fn merge_spans(first: &[Span], second: &[Span], cfg: &MergeConfig) -> MergeResult {
    let first = normalize_spans(first.to_vec());
    let second = normalize_spans(second.to_vec());
    let min_conflict = cfg.conflict_overlap.max(1);
    let conflicted = |s: &Span, others: &[Span]| {
        others
            .iter()
            .any(|o| o.category != s.category && s.overlap(o) >= min_conflict)
    };
    let first_conflicted: Vec<bool> = first.iter().map(|s| conflicted(s, &second)).collect();
    let second_conflicted: Vec<bool> = second.iter().map(|s| conflicted(s, &first)).collect();
    // conflict regions: the overlapping extents of conflicting pairs
    let mut conflict_regions: Vec<(usize, usize)> = Vec::new();
    for a in &first {
        for b in &second {
            if a.category != b.category && a.overlap(b) >= min_conflict {
                conflict_regions.push((a.start.max(b.start), a.end.min(b.end)));
            }
        }
    }

    let mut result = MergeResult::default();
    let mut hulls = Vec::new();
    for cat in Category::ALL {
        let a: Vec<usize> = (0..first.len()).filter(|&i| first[i].category == cat).collect();
        let b: Vec<usize> = (0..second.len()).filter(|&j| second[j].category == cat).collect();
        if a.is_empty() && b.is_empty() {
            continue;
        }
        let n = a.len() + b.len();
        let mut ds = DisjointSet::new(n);
        for (ia, &i) in a.iter().enumerate() {
            for (jb, &j) in b.iter().enumerate() {
                if first[i].overlap(&second[j]) >= 1 {
                    ds.union(ia, a.len() + jb);
                }
            }
        }
        // root -> (has first, has second, min start, max end)
        let mut comps: BTreeMap<usize, (bool, bool, usize, usize)> = BTreeMap::new();
        for node in 0..n {
            let (span, is_first) = if node < a.len() {
                (first[a[node]], true)
            } else {
                (second[b[node - a.len()]], false)
            };
            let root = ds.find(node);
            let c = comps
                .entry(root)
                .or_insert((false, false, usize::MAX, 0));
            if is_first {
                c.0 = true;
            } else {
                c.1 = true;
            }
            c.2 = c.2.min(span.start);
            c.3 = c.3.max(span.end);
        }
        for node in 0..n {
            let root = ds.find(node);
            let (has_a, has_b, _, _) = comps[&root];
            if has_a && has_b {
                continue;
            }
            let (side, span, is_conflicted) = if node < a.len() {
                (Side::First, first[a[node]], first_conflicted[a[node]])
            } else {
                let j = b[node - a.len()];
                (Side::Second, second[j], second_conflicted[j])
            };
            result.rejected.push(RejectedSpan {
                side,
                span,
                reason: if is_conflicted {
                    RejectReason::LabelConflict
                } else {
                    RejectReason::SingleAnnotator
                },
            });
        }
        for (has_a, has_b, start, end) in comps.into_values() {
            if has_a && has_b {
                hulls.push(Span::new(cat, start, end));
            }
        }
    }
    result.gold = normalize_spans(hulls);
    result.retained_near_conflict = result
        .gold
        .iter()
        .filter(|g| {
            conflict_regions
                .iter()
                .any(|&(s, e)| g.start.max(s) < g.end.min(e))
        })
        .copied()
        .collect();
    result
        .rejected
        .sort_by_key(|r| (r.span, r.side == Side::Second));
    result
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IgcCategory {
    C1,
    C2,
    C3,
    C4,
}

impl IgcCategory {
    pub const ALL: [IgcCategory; 4] = [
        IgcCategory::C1,
        IgcCategory::C2,
        IgcCategory::C3,
        IgcCategory::C4,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_presence(campaigners: bool, facilitators: bool) -> Self {
        match (campaigners, facilitators) {
            (false, false) => IgcCategory::C1,
            (true, false) => IgcCategory::C2,
            (false, true) => IgcCategory::C3,
            (true, true) => IgcCategory::C4,
        }
    }
}

/// Intergroup-conflict level from the presence of campaigner and
/// facilitator spans.
pub fn derive_igc(gold: &GoldDocument) -> IgcCategory {
    IgcCategory::from_presence(
        gold.has_category(Category::Campaigner),
        gold.has_category(Category::Facilitator),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanStatRow {
    /// `None` for the all-classes row.
    pub class: Option<TextClass>,
    pub documents: usize,
    pub counts: BTreeMap<Category, u64>,
    pub total: u64,
    /// Row-normalized, in percent.
    pub percentages: BTreeMap<Category, f64>,
    /// Set when the row has no spans and percentages are reported as zero.
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanStatistics {
    /// Keyed by language code, or `"UNSPECIFIED"`.
    pub by_language: BTreeMap<String, Vec<SpanStatRow>>,
}

fn stat_row(class: Option<TextClass>, docs: &[&GoldDocument]) -> SpanStatRow {
    let mut counts: BTreeMap<Category, u64> = Category::ALL.iter().map(|&c| (c, 0)).collect();
    for d in docs {
        for s in &d.spans {
            *counts.get_mut(&s.category).expect("all categories present") += 1;
        }
    }
    let total: u64 = counts.values().sum();
    let percentages = counts
        .iter()
        .map(|(&c, &n)| {
            (
                c,
                if total == 0 {
                    0.0
                } else {
                    100.0 * n as f64 / total as f64
                },
            )
        })
        .collect();
    SpanStatRow {
        class,
        documents: docs.len(),
        counts,
        total,
        percentages,
        empty: total == 0,
    }
}

/// Span counts and percentages per language, for all texts and per class.
pub fn span_statistics(gold: &[GoldDocument]) -> SpanStatistics {
    let mut groups: BTreeMap<String, Vec<&GoldDocument>> = BTreeMap::new();
    for d in gold {
        let key = d.lang.map_or("UNSPECIFIED".to_string(), |l| l.code().to_string());
        groups.entry(key).or_default().push(d);
    }
    if groups.is_empty() {
        groups.insert("UNSPECIFIED".to_string(), Vec::new());
    }
    let by_language = groups
        .into_iter()
        .map(|(lang, docs)| {
            let mut rows = vec![stat_row(None, &docs)];
            for class in TextClass::ALL {
                let sub: Vec<&GoldDocument> =
                    docs.iter().copied().filter(|d| d.klass == class).collect();
                rows.push(stat_row(Some(class), &sub));
            }
            (lang, rows)
        })
        .collect();
    SpanStatistics { by_language }
}

/// All records of one annotator.
#[derive(Debug, Clone)]
pub struct AnnotatorSet {
    pub name: String,
    pub records: Vec<AnnotationRecord>,
}

impl AnnotatorSet {
    /// Groups records by their `annotator` field.
    pub fn split(records: Vec<AnnotationRecord>) -> Vec<AnnotatorSet> {
        let mut by: BTreeMap<String, Vec<AnnotationRecord>> = BTreeMap::new();
        for r in records {
            by.entry(r.annotator.clone()).or_default().push(r);
        }
        by.into_iter()
            .map(|(name, records)| AnnotatorSet { name, records })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GoldConfig {
    pub annotators: usize,
    pub merge: MergeConfig,
}

impl Default for GoldConfig {
    fn default() -> Self {
        GoldConfig {
            annotators: DEFAULT_ANNOTATORS,
            merge: MergeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectionEntry {
    pub doc_id: String,
    pub annotator: String,
    pub span: Span,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConflictNote {
    pub doc_id: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoldBuild {
    pub gold: Vec<GoldDocument>,
    pub votes: Vec<VoteOutcome>,
    /// Neutral-majority documents.
    pub excluded: Vec<String>,
    /// Documents without a majority, for human adjudication.
    pub adjudication: Vec<VoteOutcome>,
    pub rejections: Vec<RejectionEntry>,
    pub conflict_notes: Vec<ConflictNote>,
}

fn index_by_doc(
    set: &AnnotatorSet,
) -> Result<HashMap<&str, &AnnotationRecord>> {
    let mut idx = HashMap::with_capacity(set.records.len());
    for r in &set.records {
        if r.annotator != set.name {
            return Err(Error::invalid(format!(
                "annotator set {} contains a record by {}",
                set.name, r.annotator
            )));
        }
        if idx.insert(r.doc_id.as_str(), r).is_some() {
            return Err(Error::invalid(format!(
                "annotator {} labelled document {} twice",
                set.name, r.doc_id
            )));
        }
    }
    Ok(idx)
}

/// Builds the gold corpus from the label annotators and, optionally, the two
/// span annotators. Outputs are ordered by document id.
pub fn build_gold(
    label_sets: &[AnnotatorSet],
    span_sets: Option<&[AnnotatorSet; 2]>,
    messages: Option<&HashMap<String, Message>>,
    cfg: &GoldConfig,
    mode: ExecMode,
) -> Result<GoldBuild> {
    if label_sets.len() != cfg.annotators {
        return Err(Error::invalid(format!(
            "expected {} label annotators, got {} ({})",
            cfg.annotators,
            label_sets.len(),
            label_sets
                .iter()
                .map(|s| s.name.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        )));
    }
    let names: BTreeSet<&str> = label_sets.iter().map(|s| s.name.as_str()).collect();
    if names.len() != label_sets.len() {
        return Err(Error::invalid("duplicate label annotator names"));
    }
    let label_idx: Vec<_> = label_sets.iter().map(index_by_doc).collect::<Result<_>>()?;
    let doc_ids: BTreeSet<&str> = label_idx.iter().flat_map(|m| m.keys().copied()).collect();
    let doc_ids: Vec<&str> = doc_ids.into_iter().collect();

    let span_idx = match span_sets {
        Some(sets) => {
            if sets[0].name == sets[1].name {
                return Err(Error::invalid("the two span annotators must differ"));
            }
            Some([index_by_doc(&sets[0])?, index_by_doc(&sets[1])?])
        }
        None => None,
    };

    struct DocOut {
        vote: VoteOutcome,
        gold: Option<GoldDocument>,
        rejections: Vec<RejectionEntry>,
        notes: Vec<ConflictNote>,
    }

    let per_doc = mode.try_map(&doc_ids, |&doc_id| -> Result<DocOut> {
        let mut records = Vec::with_capacity(label_sets.len());
        for (set, idx) in label_sets.iter().zip(&label_idx) {
            match idx.get(doc_id) {
                Some(r) => records.push(*r),
                None => {
                    return Err(Error::invalid(format!(
                        "document {doc_id}: missing label from annotator {}",
                        set.name
                    )))
                }
            }
        }
        let vote = majority_vote(&records, cfg.annotators)?;
        let Some(klass) = vote.text_class() else {
            return Ok(DocOut {
                vote,
                gold: None,
                rejections: Vec::new(),
                notes: Vec::new(),
            });
        };
        let message = messages.and_then(|m| m.get(doc_id));
        let text = message
            .map(|m| m.text.clone())
            .or_else(|| records.iter().find_map(|r| r.text.clone()));
        let lang: Option<Lang> = message.map(|m| m.lang);
        let mut rejections = Vec::new();
        let mut notes = Vec::new();
        let spans = match (&span_idx, span_sets) {
            (Some([i0, i1]), Some(sets)) => match (i0.get(doc_id), i1.get(doc_id)) {
                (Some(r0), Some(r1)) => {
                    let merged = merge_spans(&r0.spans, &r1.spans, &cfg.merge);
                    for rej in merged.rejected {
                        rejections.push(RejectionEntry {
                            doc_id: doc_id.to_string(),
                            annotator: match rej.side {
                                Side::First => sets[0].name.clone(),
                                Side::Second => sets[1].name.clone(),
                            },
                            span: rej.span,
                            reason: rej.reason,
                        });
                    }
                    notes.extend(merged.retained_near_conflict.iter().map(|&span| {
                        ConflictNote {
                            doc_id: doc_id.to_string(),
                            span,
                        }
                    }));
                    merged.gold
                }
                (None, None) => Vec::new(),
                (None, Some(_)) | (Some(_), None) => {
                    let missing = if i0.contains_key(doc_id) {
                        &sets[1].name
                    } else {
                        &sets[0].name
                    };
                    return Err(Error::invalid(format!(
                        "document {doc_id}: missing span annotation from annotator {missing}"
                    )));
                }
            },
            _ => Vec::new(),
        };
        if let Some(t) = &text {
            let len = crate::text::char_len(t);
            for s in &spans {
                s.check_bounds(len)?;
            }
        }
        Ok(DocOut {
            gold: Some(GoldDocument {
                doc_id: doc_id.to_string(),
                lang,
                klass,
                spans,
                text,
            }),
            vote,
            rejections,
            notes,
        })
    })?;

    let mut out = GoldBuild {
        gold: Vec::new(),
        votes: Vec::new(),
        excluded: Vec::new(),
        adjudication: Vec::new(),
        rejections: Vec::new(),
        conflict_notes: Vec::new(),
    };
    for d in per_doc {
        if d.vote.excluded() {
            out.excluded.push(d.vote.doc_id.clone());
        }
        if d.vote.needs_adjudication() {
            out.adjudication.push(d.vote.clone());
        }
        out.gold.extend(d.gold);
        out.rejections.extend(d.rejections);
        out.conflict_notes.extend(d.notes);
        out.votes.push(d.vote);
    }
    Ok(out)
}
