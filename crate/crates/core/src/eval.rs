//! Scoring predictions against gold.
//!
//! Text classification metrics, overlap-aware span F1, text-level category
//! presence, and outcome-variable crosstabs for error analysis.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Category, GoldDocument, PredictionSet, Span, TextClass};
use crate::par::ExecMode;
use crate::stats::{chi_square_independence, ContingencyResult};
use crate::text::tokenize;

/// Square matrix over `classes`; rows are predicted, columns actual.
/// Counts are real-valued so fold averages stay representable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<f64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>, counts: Vec<Vec<f64>>) -> Result<Self> {
        let n = classes.len();
        if counts.len() != n || counts.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("confusion matrix dimensions do not match classes"));
        }
        if counts.iter().flatten().any(|&x| x.is_nan() || x < 0.0) {
            return Err(Error::invalid("confusion counts must be non-negative"));
        }
        Ok(ConfusionMatrix { classes, counts })
    }

    /// Element-wise mean, e.g. over cross-validation folds.
    pub fn mean(ms: &[ConfusionMatrix]) -> Result<Self> {
        let first = ms.first().ok_or_else(|| Error::invalid("mean of zero matrices"))?;
        if ms.iter().any(|m| m.classes != first.classes) {
            return Err(Error::invalid("confusion matrices over different classes"));
        }
        let n = first.classes.len();
        let k = ms.len() as f64;
        let counts = (0..n)
            .map(|i| (0..n).map(|j| ms.iter().map(|m| m.counts[i][j]).sum::<f64>() / k).collect())
            .collect();
        Ok(ConfusionMatrix {
            classes: first.classes.clone(),
            counts,
        })
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prf {
    #[serde(with = "crate::na")]
    pub precision: Option<f64>,
    #[serde(with = "crate::na")]
    pub recall: Option<f64>,
    #[serde(with = "crate::na")]
    pub f1: Option<f64>,
}

impl Prf {
    /// From true positives, false positives and false negatives. F1 is 0
    /// when both P and R are 0 and undefined only when nothing is positive.
    pub fn from_counts(tp: f64, fp: f64, fneg: f64) -> Prf {
        let precision = (tp + fp > 0.0).then(|| tp / (tp + fp));
        let recall = (tp + fneg > 0.0).then(|| tp / (tp + fneg));
        let f1 = (tp + fp + fneg > 0.0).then(|| 2.0 * tp / (2.0 * tp + fp + fneg));
        Prf {
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinaryEval {
    pub conspiracy: Prf,
    pub critical: Prf,
    #[serde(with = "crate::na")]
    pub macro_f1: Option<f64>,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

fn index_predictions<'a>(
    preds: &'a [PredictionSet],
    gold: &[GoldDocument],
) -> Result<HashMap<&'a str, &'a PredictionSet>> {
    let gold_ids: HashSet<&str> = gold.iter().map(|g| g.doc_id.as_str()).collect();
    let mut idx = HashMap::with_capacity(preds.len());
    for p in preds {
        if !gold_ids.contains(p.doc_id.as_str()) {
            return Err(Error::invalid(format!("prediction for unknown document {}", p.doc_id)));
        }
        if idx.insert(p.doc_id.as_str(), p).is_some() {
            return Err(Error::invalid(format!("duplicate prediction for {}", p.doc_id)));
        }
    }
    Ok(idx)
}

/// Binary text classification with CONSPIRACY as the positive class.
pub fn binary_eval(preds: &[PredictionSet], gold: &[GoldDocument]) -> Result<BinaryEval> {
    if gold.is_empty() {
        return Err(Error::invalid("empty gold corpus"));
    }
    let idx = index_predictions(preds, gold)?;
    // rows predicted, columns actual; index 0 = conspiracy
    let mut counts = vec![vec![0.0; 2]; 2];
    let pos = |c: TextClass| usize::from(c == TextClass::Critical);
    for g in gold {
        let p = idx
            .get(g.doc_id.as_str())
            .ok_or_else(|| Error::invalid(format!("missing prediction for {}", g.doc_id)))?;
        let k = p
            .klass
            .ok_or_else(|| Error::invalid(format!("prediction for {} has no class", g.doc_id)))?;
        counts[pos(k)][pos(g.klass)] += 1.0;
    }
    let conspiracy = Prf::from_counts(counts[0][0], counts[0][1], counts[1][0]);
    let critical = Prf::from_counts(counts[1][1], counts[1][0], counts[0][1]);
    let macro_f1 = match (conspiracy.f1, critical.f1) {
        (Some(a), Some(b)) => Some((a + b) / 2.0),
        _ => None,
    };
    let total = gold.len() as f64;
    Ok(BinaryEval {
        conspiracy,
        critical,
        macro_f1,
        accuracy: (counts[0][0] + counts[1][1]) / total,
        confusion: ConfusionMatrix::new(
            TextClass::ALL.iter().map(|c| c.name().to_string()).collect(),
            counts,
        )?,
    })
}

/// Unit in which span overlap is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlapUnit {
    #[default]
    Char,
    Token,
}

/// Numerators and denominators of span precision and recall for one
/// category, summable across documents.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SpanCounts {
    pub precision_num: f64,
    pub predicted: usize,
    pub recall_num: f64,
    pub gold: usize,
}

impl SpanCounts {
    fn add(&mut self, o: &SpanCounts) {
        self.precision_num += o.precision_num;
        self.predicted += o.predicted;
        self.recall_num += o.recall_num;
        self.gold += o.gold;
    }
}

pub fn span_counts(pred: &[Span], gold: &[Span]) -> [SpanCounts; 6] {
    let mut out = [SpanCounts::default(); 6];
    for cat in Category::ALL {
        let s: Vec<&Span> = pred.iter().filter(|x| x.category == cat && !x.is_empty()).collect();
        let t: Vec<&Span> = gold.iter().filter(|x| x.category == cat && !x.is_empty()).collect();
        let c = &mut out[cat.index()];
        c.predicted = s.len();
        c.gold = t.len();
        for a in &s {
            for b in &t {
                let inter = a.overlap(b) as f64;
                if inter > 0.0 {
                    c.precision_num += inter / a.len() as f64;
                    c.recall_num += inter / b.len() as f64;
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryScore {
    #[serde(flatten)]
    pub prf: Prf,
    pub predicted: usize,
    pub gold: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanEvalResult {
    pub per_category: BTreeMap<Category, CategoryScore>,
    /// Unweighted means over categories with predicted or gold spans.
    #[serde(with = "crate::na")]
    pub macro_precision: Option<f64>,
    #[serde(with = "crate::na")]
    pub macro_recall: Option<f64>,
    #[serde(with = "crate::na")]
    pub macro_f1: Option<f64>,
}

fn score_counts(counts: &[SpanCounts; 6]) -> SpanEvalResult {
    let mut per_category = BTreeMap::new();
    let mut macro_sums = [0.0; 3];
    let mut included = 0usize;
    for cat in Category::ALL {
        let c = counts[cat.index()];
        let prf = if c.predicted == 0 && c.gold == 0 {
            Prf {
                precision: None,
                recall: None,
                f1: None,
            }
        } else {
            let p = if c.predicted == 0 {
                0.0
            } else {
                (c.precision_num / c.predicted as f64).clamp(0.0, 1.0)
            };
            let r = if c.gold == 0 {
                0.0
            } else {
                (c.recall_num / c.gold as f64).clamp(0.0, 1.0)
            };
            let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
            macro_sums[0] += p;
            macro_sums[1] += r;
            macro_sums[2] += f;
            included += 1;
            Prf {
                precision: Some(p),
                recall: Some(r),
                f1: Some(f),
            }
        };
        per_category.insert(
            cat,
            CategoryScore {
                prf,
                predicted: c.predicted,
                gold: c.gold,
            },
        );
    }
    let avg = |x: f64| (included > 0).then(|| x / included as f64);
    SpanEvalResult {
        per_category,
        macro_precision: avg(macro_sums[0]),
        macro_recall: avg(macro_sums[1]),
        macro_f1: avg(macro_sums[2]),
    }
}

/// Overlap-aware span F1 for a single document.
pub fn span_f1(pred: &[Span], gold: &[Span]) -> SpanEvalResult {
    score_counts(&span_counts(pred, gold))
}

/// Re-expresses character spans as token-index spans over `text`. A span
/// covers every token it overlaps; spans covering no token are dropped.
pub fn to_token_spans(text: &str, spans: &[Span]) -> Vec<Span> {
    let tokens = tokenize(text);
    spans
        .iter()
        .filter_map(|s| {
            let first = tokens.iter().position(|t| t.end > s.start && t.start < s.end)?;
            let last = tokens.iter().rposition(|t| t.end > s.start && t.start < s.end)?;
            Some(Span::new(s.category, first, last + 1))
        })
        .collect()
}

/// Corpus span F1, micro-aggregated over documents. Gold documents without a
/// prediction count as having no predicted spans.
pub fn span_f1_corpus(
    preds: &[PredictionSet],
    gold: &[GoldDocument],
    unit: OverlapUnit,
    mode: ExecMode,
) -> Result<SpanEvalResult> {
    let idx = index_predictions(preds, gold)?;
    let per_doc = mode.try_map(gold, |g| -> Result<[SpanCounts; 6]> {
        let empty = Vec::new();
        let predicted = idx
            .get(g.doc_id.as_str())
            .and_then(|p| p.spans.as_ref())
            .unwrap_or(&empty);
        match unit {
            OverlapUnit::Char => Ok(span_counts(predicted, &g.spans)),
            OverlapUnit::Token => {
                let text = g.text.as_deref().ok_or_else(|| {
                    Error::invalid(format!("{}: token overlap needs the gold text", g.doc_id))
                })?;
                Ok(span_counts(
                    &to_token_spans(text, predicted),
                    &to_token_spans(text, &g.spans),
                ))
            }
        }
    })?;
    let mut total = [SpanCounts::default(); 6];
    for doc in &per_doc {
        for (t, c) in total.iter_mut().zip(doc) {
            t.add(c);
        }
    }
    Ok(score_counts(&total))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PresenceScore {
    #[serde(flatten)]
    pub prf: Prf,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fneg: usize,
    pub tn: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PresenceEval {
    pub per_category: BTreeMap<Category, PresenceScore>,
    #[serde(with = "crate::na")]
    pub macro_f1: Option<f64>,
}

/// Binary detection of each category at text level. Documents without a
/// prediction are treated as predicting no category.
pub fn category_presence_eval(
    preds: &[PredictionSet],
    gold: &[GoldDocument],
) -> Result<PresenceEval> {
    let idx = index_predictions(preds, gold)?;
    let mut per_category = BTreeMap::new();
    for cat in Category::ALL {
        let (mut tp, mut fp, mut fneg, mut tn) = (0, 0, 0, 0);
        for g in gold {
            let p = idx.get(g.doc_id.as_str()).is_some_and(|p| p.has_category(cat));
            match (p, g.has_category(cat)) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                (false, false) => tn += 1,
            }
        }
        per_category.insert(
            cat,
            PresenceScore {
                prf: Prf::from_counts(tp as f64, fp as f64, fneg as f64),
                tp,
                fp,
                fneg,
                tn,
            },
        );
    }
    let f1s: Vec<f64> = per_category.values().filter_map(|s| s.prf.f1).collect();
    let macro_f1 = (!f1s.is_empty()).then(|| f1s.iter().sum::<f64>() / f1s.len() as f64);
    Ok(PresenceEval {
        per_category,
        macro_f1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    FalseNegative,
    Correct,
    FalsePositive,
}

impl Outcome {
    pub const ALL: [Outcome; 3] = [Outcome::FalseNegative, Outcome::Correct, Outcome::FalsePositive];

    pub fn from_presence(predicted: bool, gold: bool) -> Outcome {
        match (predicted, gold) {
            (false, true) => Outcome::FalseNegative,
            (true, false) => Outcome::FalsePositive,
            _ => Outcome::Correct,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeVariable {
    pub doc_id: String,
    pub category: Category,
    pub outcome: Outcome,
}

pub fn outcome_variables(
    preds: &[PredictionSet],
    gold: &[GoldDocument],
    category: Category,
) -> Result<Vec<OutcomeVariable>> {
    let idx = index_predictions(preds, gold)?;
    Ok(gold
        .iter()
        .map(|g| OutcomeVariable {
            doc_id: g.doc_id.clone(),
            category,
            outcome: Outcome::from_presence(
                idx.get(g.doc_id.as_str()).is_some_and(|p| p.has_category(category)),
                g.has_category(category),
            ),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Crosstab {
    pub row_category: Category,
    pub col_category: Category,
    #[serde(flatten)]
    pub result: ContingencyResult,
}

/// 3×3 outcome crosstab of two categories with χ² and adjusted residuals.
pub fn crosstab_residuals(rows: &[OutcomeVariable], cols: &[OutcomeVariable]) -> Result<Crosstab> {
    let (Some(r0), Some(c0)) = (rows.first(), cols.first()) else {
        return Err(Error::invalid("crosstab over zero documents"));
    };
    if rows.iter().any(|o| o.category != r0.category)
        || cols.iter().any(|o| o.category != c0.category)
    {
        return Err(Error::invalid("each outcome set must cover a single category"));
    }
    let col_idx: HashMap<&str, Outcome> =
        cols.iter().map(|o| (o.doc_id.as_str(), o.outcome)).collect();
    if col_idx.len() != rows.len() || cols.len() != rows.len() {
        return Err(Error::invalid("outcome sets cover different documents"));
    }
    let mut table = vec![vec![0.0; 3]; 3];
    for o in rows {
        let c = col_idx
            .get(o.doc_id.as_str())
            .ok_or_else(|| Error::invalid(format!("{} missing from column outcomes", o.doc_id)))?;
        table[o.outcome.index()][c.index()] += 1.0;
    }
    Ok(Crosstab {
        row_category: r0.category,
        col_category: c0.category,
        result: chi_square_independence(&table)?,
    })
}
