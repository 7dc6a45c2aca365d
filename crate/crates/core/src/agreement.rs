//! Inter-annotator agreement.
//!
//! Nominal Krippendorff α and observed agreement over a reliability matrix,
//! a two-annotator γ for span unitizing, and pairwise F1 between annotators.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gold::AnnotatorSet;
use crate::model::{AnnotationRecord, Span, TextClass};
use crate::par::ExecMode;

pub const DEFAULT_RESAMPLES: usize = 30;
pub const MIN_RESAMPLES: usize = 10;

/// Items × annotators table of nominal labels; `None` marks a missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityMatrix<L> {
    items: Vec<String>,
    annotators: Vec<String>,
    values: Vec<Vec<Option<L>>>,
}

impl<L: Ord + Clone> ReliabilityMatrix<L> {
    pub fn new(
        items: Vec<String>,
        annotators: Vec<String>,
        values: Vec<Vec<Option<L>>>,
    ) -> Result<Self> {
        if annotators.len() < 2 {
            return Err(Error::invalid("reliability matrix needs at least 2 annotators"));
        }
        if values.len() != items.len() {
            return Err(Error::invalid("one row of values per item expected"));
        }
        if let Some(i) = values.iter().position(|r| r.len() != annotators.len()) {
            return Err(Error::invalid(format!(
                "item {} has {} values for {} annotators",
                items[i],
                values[i].len(),
                annotators.len()
            )));
        }
        if !values
            .iter()
            .any(|r| r.iter().filter(|v| v.is_some()).count() >= 2)
        {
            return Err(Error::invalid("no item has two or more values"));
        }
        Ok(ReliabilityMatrix {
            items,
            annotators,
            values,
        })
    }

    /// Builds a matrix from annotator sets, labelling each record with `f`.
    /// Documents an annotator did not label are missing values.
    pub fn from_annotations(
        sets: &[AnnotatorSet],
        f: impl Fn(&AnnotationRecord) -> L,
    ) -> Result<Self> {
        let items: BTreeSet<&str> = sets
            .iter()
            .flat_map(|s| s.records.iter().map(|r| r.doc_id.as_str()))
            .collect();
        let lookup: Vec<HashMap<&str, &AnnotationRecord>> = sets
            .iter()
            .map(|s| s.records.iter().map(|r| (r.doc_id.as_str(), r)).collect())
            .collect();
        let values = items
            .iter()
            .map(|doc| lookup.iter().map(|m| m.get(doc).map(|r| f(r))).collect())
            .collect();
        Self::new(
            items.into_iter().map(String::from).collect(),
            sets.iter().map(|s| s.name.clone()).collect(),
            values,
        )
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn annotators(&self) -> &[String] {
        &self.annotators
    }

    fn pairable_rows(&self) -> impl Iterator<Item = Vec<&L>> {
        self.values.iter().filter_map(|row| {
            let present: Vec<&L> = row.iter().flatten().collect();
            (present.len() >= 2).then_some(present)
        })
    }
}

/// Nominal α from the coincidence matrix of pairable values.
pub fn krippendorff_alpha<L: Ord + Clone>(m: &ReliabilityMatrix<L>) -> Result<f64> {
    let mut coincidence: BTreeMap<(&L, &L), f64> = BTreeMap::new();
    for row in m.pairable_rows() {
        let w = 1.0 / (row.len() - 1) as f64;
        for (i, a) in row.iter().enumerate() {
            for (j, b) in row.iter().enumerate() {
                if i != j {
                    *coincidence.entry((*a, *b)).or_default() += w;
                }
            }
        }
    }
    let mut marginals: BTreeMap<&L, f64> = BTreeMap::new();
    let mut disagree = 0.0;
    for (&(a, b), &o) in &coincidence {
        *marginals.entry(a).or_default() += o;
        if a != b {
            disagree += o;
        }
    }
    let n: f64 = marginals.values().sum();
    let total: f64 = marginals.values().sum::<f64>().powi(2)
        - marginals.values().map(|x| x * x).sum::<f64>();
    if total <= 0.0 {
        return Err(Error::degenerate(
            "expected disagreement is zero: every value is identical",
        ));
    }
    Ok(1.0 - (n - 1.0) * disagree / total)
}

/// Mean over items of agreeing annotator pairs / all annotator pairs.
pub fn observed_agreement<L: Ord + Clone>(m: &ReliabilityMatrix<L>) -> f64 {
    let mut sum = 0.0;
    let mut items = 0usize;
    for row in m.pairable_rows() {
        let mut agree = 0usize;
        let mut pairs = 0usize;
        for i in 0..row.len() {
            for j in i + 1..row.len() {
                pairs += 1;
                agree += usize::from(row[i] == row[j]);
            }
        }
        sum += agree as f64 / pairs as f64;
        items += 1;
    }
    sum / items as f64
}

/// One document's units from each annotator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Continuum {
    pub doc_id: String,
    /// Document length in characters.
    pub len: usize,
    pub annotators: Vec<(String, Vec<Span>)>,
}

impl Continuum {
    fn pair(&self) -> Result<(&[Span], &[Span])> {
        match self.annotators.as_slice() {
            [(_, a), (_, b)] => Ok((a, b)),
            [_] | [] => Err(Error::invalid(format!(
                "{}: gamma needs two annotators",
                self.doc_id
            ))),
            more => Err(Error::invalid(format!(
                "{}: gamma supports exactly two annotators, got {}",
                self.doc_id,
                more.len()
            ))),
        }
    }

    fn validate(&self) -> Result<()> {
        let (a, b) = self.pair()?;
        if self.len == 0 {
            return Err(Error::invalid(format!("{}: zero-length document", self.doc_id)));
        }
        for s in a.iter().chain(b) {
            s.check_bounds(self.len)?;
        }
        Ok(())
    }
}

pub fn positional_dissimilarity(u: &Span, v: &Span) -> f64 {
    let shift = u.start.abs_diff(v.start) + u.end.abs_diff(v.end);
    let ratio = shift as f64 / (u.len() + v.len()) as f64;
    (ratio * ratio).min(1.0)
}

pub fn unit_dissimilarity(u: &Span, v: &Span) -> f64 {
    positional_dissimilarity(u, v) + if u.category == v.category { 0.0 } else { 1.0 }
}

/// Cost of leaving a unit unaligned.
pub const EMPTY_COST: f64 = 1.0;

/// Minimum-cost assignment on a square matrix (Hungarian method, O(n³)).
/// Returns the column assigned to each row.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // potentials and matching use 1-based indexing with a sentinel column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[row_of[j] - 1] = j - 1;
    }
    assignment
}

/// Cost of the best alignment between two unit sets, where any unit may be
/// left unaligned at [`EMPTY_COST`].
pub fn alignment_cost(a: &[Span], b: &[Span]) -> f64 {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return (n + m) as f64 * EMPTY_COST;
    }
    // rows: a units then m dummies; columns: b units then n dummies
    let size = n + m;
    let mut cost = vec![vec![0.0; size]; size];
    for (i, row) in cost.iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            *c = match (i < n, j < m) {
                (true, true) => unit_dissimilarity(&a[i], &b[j]),
                (true, false) | (false, true) => EMPTY_COST,
                (false, false) => 0.0,
            };
        }
    }
    min_cost_assignment(&cost)
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i][j])
        .sum()
}

fn shuffle_units(units: &[Span], len: usize, rng: &mut ChaCha8Rng) -> Vec<Span> {
    units
        .iter()
        .map(|s| {
            let start = rng.random_range(0..=len - s.len());
            Span::new(s.category, start, start + s.len())
        })
        .collect()
}

fn unit_key(units: &[Span]) -> Vec<(usize, usize, usize)> {
    let mut k: Vec<_> = units.iter().map(|s| (s.category.index(), s.start, s.end)).collect();
    k.sort_unstable();
    k
}

/// Generator stream for a document, so results do not depend on where the
/// document sits in the corpus.
fn doc_stream(doc_id: &str) -> u64 {
    let d = Sha256::digest(doc_id.as_bytes());
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Observed and mean resampled alignment cost for one continuum. The two
/// unit lists are put in a canonical order first, so swapping or renaming
/// annotators leaves the draws unchanged.
fn continuum_costs(c: &Continuum, resamples: usize, seed: u64) -> (f64, f64) {
    let (a, b) = c.pair().expect("validated");
    let (a, b) = if unit_key(a) <= unit_key(b) { (a, b) } else { (b, a) };
    let observed = alignment_cost(a, b);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(doc_stream(&c.doc_id));
    let expected = (0..resamples)
        .map(|_| {
            let ra = shuffle_units(a, c.len, &mut rng);
            let rb = shuffle_units(b, c.len, &mut rng);
            alignment_cost(&ra, &rb)
        })
        .sum::<f64>()
        / resamples as f64;
    (observed, expected)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaConfig {
    pub resamples: usize,
    pub seed: u64,
}

impl Default for GammaConfig {
    fn default() -> Self {
        GammaConfig {
            resamples: DEFAULT_RESAMPLES,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaResult {
    pub gamma: f64,
    pub observed: f64,
    pub expected: f64,
}

fn gamma_from(costs: &[(f64, f64)]) -> Result<GammaResult> {
    let observed: f64 = costs.iter().map(|c| c.0).sum();
    let expected: f64 = costs.iter().map(|c| c.1).sum();
    if expected <= 0.0 {
        return Err(Error::degenerate("expected alignment cost is zero"));
    }
    Ok(GammaResult {
        gamma: 1.0 - observed / expected,
        observed,
        expected,
    })
}

fn all_costs(continua: &[Continuum], cfg: &GammaConfig, mode: ExecMode) -> Result<Vec<(f64, f64)>> {
    if cfg.resamples < MIN_RESAMPLES {
        return Err(Error::invalid(format!(
            "gamma needs at least {MIN_RESAMPLES} resamples, got {}",
            cfg.resamples
        )));
    }
    if continua.is_empty() {
        return Err(Error::invalid("gamma over zero documents"));
    }
    for c in continua {
        c.validate()?;
    }
    Ok(mode.map(continua, |c| continuum_costs(c, cfg.resamples, cfg.seed)))
}

/// γ = 1 − δ_obs/δ_exp with both costs summed over all continua.
pub fn gamma_agreement(
    continua: &[Continuum],
    cfg: &GammaConfig,
    mode: ExecMode,
) -> Result<GammaResult> {
    gamma_from(&all_costs(continua, cfg, mode)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchGamma {
    pub first_doc: String,
    pub documents: usize,
    #[serde(with = "crate::na")]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchedGamma {
    pub batches: Vec<BatchGamma>,
    /// Mean of the defined per-batch values.
    #[serde(with = "crate::na")]
    pub mean: Option<f64>,
}

/// γ per consecutive batch of `batch_size` continua. A batch with no
/// expected disagreement is reported as NA.
pub fn gamma_batches(
    continua: &[Continuum],
    cfg: &GammaConfig,
    batch_size: usize,
    mode: ExecMode,
) -> Result<BatchedGamma> {
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let costs = all_costs(continua, cfg, mode)?;
    let batches: Vec<BatchGamma> = continua
        .chunks(batch_size)
        .zip(costs.chunks(batch_size))
        .map(|(docs, c)| BatchGamma {
            first_doc: docs[0].doc_id.clone(),
            documents: docs.len(),
            gamma: gamma_from(c).ok().map(|g| g.gamma),
        })
        .collect();
    let defined: Vec<f64> = batches.iter().filter_map(|b| b.gamma).collect();
    let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok(BatchedGamma { batches, mean })
}

/// Builds continua from two span annotators. Document lengths come from
/// `lengths`, falling back to the record text.
pub fn continua_from_annotations(
    first: &AnnotatorSet,
    second: &AnnotatorSet,
    lengths: &HashMap<String, usize>,
) -> Result<Vec<Continuum>> {
    let b: HashMap<&str, &AnnotationRecord> = second
        .records
        .iter()
        .map(|r| (r.doc_id.as_str(), r))
        .collect();
    let mut out = Vec::new();
    for ra in &first.records {
        let Some(rb) = b.get(ra.doc_id.as_str()) else {
            continue;
        };
        let len = lengths
            .get(&ra.doc_id)
            .copied()
            .or_else(|| {
                ra.text
                    .as_deref()
                    .or(rb.text.as_deref())
                    .map(crate::text::char_len)
            })
            .ok_or_else(|| {
                Error::invalid(format!("{}: document length unknown", ra.doc_id))
            })?;
        out.push(Continuum {
            doc_id: ra.doc_id.clone(),
            len,
            annotators: vec![
                (first.name.clone(), ra.spans.clone()),
                (second.name.clone(), rb.spans.clone()),
            ],
        });
    }
    out.sort_by(|x, y| x.doc_id.cmp(&y.doc_id));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairwiseMode {
    HumanVsHuman,
    HumanVsGold,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseF1 {
    #[serde(rename = "f1_conspiracy", with = "crate::na")]
    pub conspiracy: Option<f64>,
    #[serde(rename = "f1_critical", with = "crate::na")]
    pub critical: Option<f64>,
    pub pairs: usize,
}

/// Binary F1 for `class`; `None` when the class never occurs in the truth.
fn binary_f1(pairs: &[(bool, bool)]) -> Option<f64> {
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for &(pred, truth) in pairs {
        match (pred, truth) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            _ => {}
        }
    }
    (tp + fneg > 0).then(|| 2.0 * tp as f64 / (2 * tp + fp + fneg) as f64)
}

fn flag(r: &AnnotationRecord, class: TextClass) -> bool {
    match class {
        TextClass::Conspiracy => r.conspiracy,
        TextClass::Critical => r.critical,
    }
}

/// Mean binary F1 per class over (prediction, truth) pairs. Pairs where a
/// class is absent from the truth do not contribute to that class.
pub fn pairwise_f1_agreement(
    sets: &[AnnotatorSet],
    mode: PairwiseMode,
    gold: Option<&HashMap<String, Option<TextClass>>>,
) -> Result<PairwiseF1> {
    if sets.len() < 2 {
        return Err(Error::invalid("pairwise F1 needs at least 2 annotators"));
    }
    let lookup: Vec<HashMap<&str, &AnnotationRecord>> = sets
        .iter()
        .map(|s| s.records.iter().map(|r| (r.doc_id.as_str(), r)).collect())
        .collect();
    // each comparison: per class, (pred, truth) per shared doc
    let mut comparisons: Vec<[Vec<(bool, bool)>; 2]> = Vec::new();
    match (mode, gold) {
        (PairwiseMode::HumanVsHuman, None) => {
            #[allow(clippy::needless_range_loop)]
            for i in 0..sets.len() {
                for j in 0..sets.len() {
                    if i == j {
                        continue;
                    }
                    let mut cmp = [Vec::new(), Vec::new()];
                    for r in &sets[i].records {
                        if let Some(t) = lookup[j].get(r.doc_id.as_str()) {
                            for (k, class) in TextClass::ALL.into_iter().enumerate() {
                                cmp[k].push((flag(r, class), flag(t, class)));
                            }
                        }
                    }
                    comparisons.push(cmp);
                }
            }
        }
        (PairwiseMode::HumanVsGold, Some(gold)) => {
            for set in sets {
                let mut cmp = [Vec::new(), Vec::new()];
                for r in &set.records {
                    if let Some(t) = gold.get(&r.doc_id) {
                        for (k, class) in TextClass::ALL.into_iter().enumerate() {
                            cmp[k].push((flag(r, class), *t == Some(class)));
                        }
                    }
                }
                comparisons.push(cmp);
            }
        }
        (PairwiseMode::HumanVsHuman, Some(_)) => {
            return Err(Error::invalid("gold labels given in human-vs-human mode"))
        }
        (PairwiseMode::HumanVsGold, None) => {
            return Err(Error::invalid("human-vs-gold mode needs gold labels"))
        }
    }
    let mean_for = |k: usize| {
        let scores: Vec<f64> = comparisons.iter().filter_map(|c| binary_f1(&c[k])).collect();
        (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64)
    };
    Ok(PairwiseF1 {
        conspiracy: mean_for(0),
        critical: mean_for(1),
        pairs: comparisons.len(),
    })
}
