//! Lexicon scoring and the hypothesis tests comparing conspiracy and
//! critical messages.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gold::{derive_igc, IgcCategory};
use crate::model::{GoldDocument, Lang, TextClass};
use crate::par::ExecMode;
use crate::stats::{
    chi_square_independence, kruskal_wallis, ks_normality, mann_whitney_u, pearson_r,
    ContingencyResult, TestReport,
};
use crate::text::{normalize_word, tokenize};

/// Word list with literal entries and trailing-`*` prefix patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    pub name: String,
    literals: HashSet<String>,
    prefixes: Vec<String>,
}

impl Lexicon {
    /// One entry per line; `#` starts a comment; a trailing `*` marks a
    /// prefix pattern. Entries are lowercased.
    pub fn parse(name: &str, src: &str) -> Result<Self> {
        let mut literals = HashSet::new();
        let mut prefixes = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in src.lines().enumerate() {
            let entry = line.split('#').next().unwrap_or("").trim().to_lowercase();
            if entry.is_empty() {
                continue;
            }
            if entry.split_whitespace().count() > 1 {
                return Err(Error::invalid(format!(
                    "lexicon {name}, line {}: entries are single words",
                    i + 1
                )));
            }
            if !seen.insert(entry.clone()) {
                return Err(Error::invalid(format!(
                    "lexicon {name}, line {}: duplicate entry {entry:?}",
                    i + 1
                )));
            }
            match entry.strip_suffix('*') {
                Some("") => {
                    return Err(Error::invalid(format!(
                        "lexicon {name}, line {}: bare wildcard",
                        i + 1
                    )))
                }
                Some(p) => prefixes.push(p.to_string()),
                None => {
                    literals.insert(entry);
                }
            }
        }
        if literals.is_empty() && prefixes.is_empty() {
            return Err(Error::invalid(format!("lexicon {name} has no entries")));
        }
        prefixes.sort();
        Ok(Lexicon {
            name: name.to_string(),
            literals,
            prefixes,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let name = path
            .file_stem()
            .map_or_else(|| "lexicon".to_string(), |s| s.to_string_lossy().into_owned());
        Self::parse(&name, &src)
    }

    pub fn len(&self) -> usize {
        self.literals.len() + self.prefixes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `word` must already be normalized.
    pub fn matches(&self, word: &str) -> bool {
        !word.is_empty()
            && (self.literals.contains(word) || self.prefixes.iter().any(|p| word.starts_with(p.as_str())))
    }
}

/// Surface form to lemma, from a two-column tab-separated file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LemmaMap(HashMap<String, String>);

impl LemmaMap {
    pub fn parse(src: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for (i, line) in src.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (surface, lemma) = line.split_once('\t').ok_or_else(|| {
                Error::invalid(format!("lemma map line {}: expected surface<TAB>lemma", i + 1))
            })?;
            map.insert(normalize_word(surface), normalize_word(lemma));
        }
        Ok(LemmaMap(map))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&src)
    }

    pub fn lemma<'a>(&'a self, word: &'a str) -> &'a str {
        self.0.get(word).map_or(word, String::as_str)
    }
}

/// Percentage of tokens matching `lexicon`. A token matches when its
/// normalized form, or its lemma, is in the lexicon.
pub fn lexicon_score(text: &str, lexicon: &Lexicon, lemmas: Option<&LemmaMap>) -> Result<f64> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(Error::EmptyText);
    }
    let hits = tokens
        .iter()
        .filter(|t| {
            let w = normalize_word(t.text);
            lexicon.matches(&w) || lemmas.is_some_and(|m| lexicon.matches(m.lemma(&w)))
        })
        .count();
    Ok(100.0 * hits as f64 / tokens.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRecord {
    pub doc_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lang: Option<Lang>,
    pub anger_pct: f64,
    pub violence_pct: f64,
    pub igc: IgcCategory,
    #[serde(rename = "class")]
    pub klass: TextClass,
}

pub struct Lexicons<'a> {
    pub anger: &'a Lexicon,
    pub violence: &'a Lexicon,
    /// Applied to violence matching only.
    pub lemmas: Option<&'a LemmaMap>,
}

pub fn score_corpus(
    gold: &[GoldDocument],
    lex: &Lexicons<'_>,
    mode: ExecMode,
) -> Result<Vec<ScoreRecord>> {
    mode.try_map(gold, |g| {
        let text = g
            .text
            .as_deref()
            .ok_or_else(|| Error::invalid(format!("{}: gold record has no text", g.doc_id)))?;
        let score = |lexicon, lemmas| {
            lexicon_score(text, lexicon, lemmas)
                .map_err(|e| Error::invalid(format!("{}: {e}", g.doc_id)))
        };
        Ok(ScoreRecord {
            doc_id: g.doc_id.clone(),
            lang: g.lang,
            anger_pct: score(lex.anger, None)?,
            violence_pct: score(lex.violence, lex.lemmas)?,
            igc: derive_igc(g),
            klass: g.klass,
        })
    })
}

/// A test result, or why it could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Finding<T> {
    Computed(T),
    Unavailable { unavailable: String },
}

impl<T> Finding<T> {
    fn from(r: Result<T>) -> Self {
        match r {
            Ok(v) => Finding::Computed(v),
            Err(e) => Finding::Unavailable {
                unavailable: e.to_string(),
            },
        }
    }

    pub fn computed(&self) -> Option<&T> {
        match self {
            Finding::Computed(v) => Some(v),
            Finding::Unavailable { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IgcTable {
    /// Rows C1..C4, columns CONSPIRACY, CRITICAL.
    pub counts: BTreeMap<IgcCategory, [u64; 2]>,
    /// Percent of each class column, plus the all-documents column.
    pub shares: BTreeMap<IgcCategory, IgcShares>,
    pub test: Finding<ContingencyResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IgcShares {
    pub conspiracy: f64,
    pub critical: f64,
    pub all: f64,
}

pub fn igc_table(scores: &[ScoreRecord]) -> IgcTable {
    let mut counts: BTreeMap<IgcCategory, [u64; 2]> =
        IgcCategory::ALL.iter().map(|&c| (c, [0, 0])).collect();
    for s in scores {
        let col = usize::from(s.klass == TextClass::Critical);
        counts.get_mut(&s.igc).expect("all levels present")[col] += 1;
    }
    let col_totals = [0, 1].map(|j| counts.values().map(|r| r[j]).sum::<u64>());
    let total = col_totals[0] + col_totals[1];
    let pct = |n: u64, d: u64| if d == 0 { 0.0 } else { 100.0 * n as f64 / d as f64 };
    let shares = counts
        .iter()
        .map(|(&c, r)| {
            (
                c,
                IgcShares {
                    conspiracy: pct(r[0], col_totals[0]),
                    critical: pct(r[1], col_totals[1]),
                    all: pct(r[0] + r[1], total),
                },
            )
        })
        .collect();
    let table: Vec<Vec<f64>> = counts
        .values()
        .map(|r| vec![r[0] as f64, r[1] as f64])
        .collect();
    IgcTable {
        test: Finding::from(chi_square_independence(&table)),
        counts,
        shares,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableNormality {
    pub conspiracy: Finding<TestReport>,
    pub critical: Finding<TestReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScopeReport {
    pub documents: usize,
    pub h1_anger_by_class: Finding<TestReport>,
    pub h2_violence_by_class: Finding<TestReport>,
    pub h3_igc_by_class: IgcTable,
    pub h4_anger_by_igc: Finding<TestReport>,
    pub h4_violence_by_igc: Finding<TestReport>,
    pub normality_anger: VariableNormality,
    pub normality_violence: VariableNormality,
    pub anger_violence_correlation: Finding<TestReport>,
}

impl ScopeReport {
    /// Number of findings that could not be computed.
    pub fn unavailable(&self) -> usize {
        let tests = [
            &self.h1_anger_by_class,
            &self.h2_violence_by_class,
            &self.h4_anger_by_igc,
            &self.h4_violence_by_igc,
            &self.normality_anger.conspiracy,
            &self.normality_anger.critical,
            &self.normality_violence.conspiracy,
            &self.normality_violence.critical,
            &self.anger_violence_correlation,
        ];
        tests.iter().filter(|t| t.computed().is_none()).count()
            + usize::from(self.h3_igc_by_class.test.computed().is_none())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    /// Keyed by language code, plus `"ALL"` for the combined corpus.
    pub scopes: BTreeMap<String, ScopeReport>,
}

impl HypothesisReport {
    pub fn unavailable(&self) -> usize {
        self.scopes.values().map(ScopeReport::unavailable).sum()
    }
}

fn by_class(scores: &[&ScoreRecord], f: fn(&ScoreRecord) -> f64) -> [Vec<f64>; 2] {
    let pick = |k| scores.iter().filter(|s| s.klass == k).map(|s| f(s)).collect();
    [pick(TextClass::Conspiracy), pick(TextClass::Critical)]
}

fn class_test(scores: &[&ScoreRecord], f: fn(&ScoreRecord) -> f64) -> Result<TestReport> {
    let [cn, cr] = by_class(scores, f);
    let mut r = mann_whitney_u(&cn, &cr)?;
    r.groups[0].name = TextClass::Conspiracy.name().to_string();
    r.groups[1].name = TextClass::Critical.name().to_string();
    Ok(r)
}

fn igc_test(scores: &[&ScoreRecord], f: fn(&ScoreRecord) -> f64) -> Result<TestReport> {
    let groups: Vec<(String, Vec<f64>)> = IgcCategory::ALL
        .iter()
        .map(|&c| {
            (
                format!("{c:?}"),
                scores.iter().filter(|s| s.igc == c).map(|s| f(s)).collect(),
            )
        })
        .filter(|(_, v): &(String, Vec<f64>)| !v.is_empty())
        .collect();
    let refs: Vec<(&str, &[f64])> = groups.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect();
    kruskal_wallis(&refs)
}

fn normality(scores: &[&ScoreRecord], f: fn(&ScoreRecord) -> f64) -> VariableNormality {
    let [cn, cr] = by_class(scores, f);
    VariableNormality {
        conspiracy: Finding::from(ks_normality(&cn)),
        critical: Finding::from(ks_normality(&cr)),
    }
}

fn scope_report(scores: &[&ScoreRecord]) -> ScopeReport {
    let anger: fn(&ScoreRecord) -> f64 = |s| s.anger_pct;
    let violence: fn(&ScoreRecord) -> f64 = |s| s.violence_pct;
    let owned: Vec<ScoreRecord> = scores.iter().map(|s| (*s).clone()).collect();
    let xs: Vec<f64> = scores.iter().map(|s| s.anger_pct).collect();
    let ys: Vec<f64> = scores.iter().map(|s| s.violence_pct).collect();
    ScopeReport {
        documents: scores.len(),
        h1_anger_by_class: Finding::from(class_test(scores, anger)),
        h2_violence_by_class: Finding::from(class_test(scores, violence)),
        h3_igc_by_class: igc_table(&owned),
        h4_anger_by_igc: Finding::from(igc_test(scores, anger)),
        h4_violence_by_igc: Finding::from(igc_test(scores, violence)),
        normality_anger: normality(scores, anger),
        normality_violence: normality(scores, violence),
        anger_violence_correlation: Finding::from(pearson_r(&xs, &ys)),
    }
}

/// Runs every hypothesis test per language and on the combined corpus.
pub fn run_hypothesis_suite(scores: &[ScoreRecord]) -> Result<HypothesisReport> {
    if scores.is_empty() {
        return Err(Error::invalid("hypothesis suite over zero documents"));
    }
    let mut scopes = BTreeMap::new();
    for lang in Lang::ALL {
        let subset: Vec<&ScoreRecord> = scores.iter().filter(|s| s.lang == Some(lang)).collect();
        if !subset.is_empty() {
            scopes.insert(lang.code().to_string(), scope_report(&subset));
        }
    }
    let all: Vec<&ScoreRecord> = scores.iter().collect();
    scopes.insert("ALL".to_string(), scope_report(&all));
    Ok(HypothesisReport { scopes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lex(src: &str) -> Lexicon {
        Lexicon::parse("t", src).unwrap()
    }

    #[test]
    fn score_examples() {
        let l = lex("hate\nevil\n");
        assert_eq!(lexicon_score("I hate this evil scam", &l, None).unwrap(), 40.0);
        assert_eq!(lexicon_score("Hate, HATE!", &lex("hate"), None).unwrap(), 100.0);
        assert_eq!(lexicon_score("nothing to see", &l, None).unwrap(), 0.0);
        assert!(matches!(lexicon_score("  \n", &l, None), Err(Error::EmptyText)));
    }

    #[test]
    fn prefix_and_comments() {
        let l = lex("# anger words\nkill*  # prefix\nRage\n");
        assert_eq!(l.len(), 2);
        assert_eq!(lexicon_score("killers rage on", &l, None).unwrap(), 200.0 / 3.0);
        assert!(Lexicon::parse("t", "a\nA\n").is_err());
        assert!(Lexicon::parse("t", "# nothing\n").is_err());
        assert!(Lexicon::parse("t", "*\n").is_err());
    }

    #[test]
    fn lemma_map_extends_matching() {
        let l = lex("fight\n");
        let m = LemmaMap::parse("fought\tfight\nFighting\tfight\n").unwrap();
        assert_eq!(lexicon_score("they fought back", &l, None).unwrap(), 0.0);
        let s = lexicon_score("they fought back", &l, Some(&m)).unwrap();
        assert!((s - 100.0 / 3.0).abs() < 1e-12);
        assert!(LemmaMap::parse("no tab here").is_err());
    }

    #[test]
    fn score_invariant_to_order_and_case() {
        let l = lex("plan\nelite*\n");
        let a = lexicon_score("The elites PLAN everything here", &l, None).unwrap();
        let b = lexicon_score("here everything plan the ELITES", &l, None).unwrap();
        assert_eq!(a, b);
    }

    fn synthetic(n: usize, anger_shift: f64, seed: u64) -> Vec<ScoreRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..2 * n)
            .map(|i| {
                let klass = if i < n { TextClass::Conspiracy } else { TextClass::Critical };
                let shift = if klass == TextClass::Conspiracy { anger_shift } else { 0.0 };
                let anger = rng.random_range(0.0..6.0) + shift;
                ScoreRecord {
                    doc_id: format!("d{i:05}"),
                    lang: Some(if i % 2 == 0 { Lang::En } else { Lang::Es }),
                    anger_pct: anger,
                    violence_pct: 0.5 * anger + rng.random_range(0.0..3.0),
                    igc: IgcCategory::ALL[rng.random_range(0..4)],
                    klass,
                }
            })
            .collect()
    }

    #[test]
    fn shifted_anger_is_significant() {
        let scores = synthetic(1000, 2.0, 1);
        let report = run_hypothesis_suite(&scores).unwrap();
        let h1 = report.scopes["ALL"].h1_anger_by_class.computed().unwrap();
        assert!(h1.p < 0.001);
        assert!(report.scopes.contains_key("EN") && report.scopes.contains_key("ES"));
    }

    #[test]
    fn independent_igc_is_not_significant() {
        let scores = synthetic(1000, 0.0, 2);
        let report = run_hypothesis_suite(&scores).unwrap();
        let h3 = report.scopes["ALL"].h3_igc_by_class.test.computed().unwrap();
        assert!(h3.report.p > 0.01, "{}", h3.report.p);
        let shares = &report.scopes["ALL"].h3_igc_by_class.shares;
        let total: f64 = shares.values().map(|s| s.all).sum();
        assert!((total - 100.0).abs() < 1e-9);
    }

    #[test]
    fn suite_is_deterministic() {
        let scores = synthetic(200, 1.0, 3);
        let a = serde_json::to_string(&run_hypothesis_suite(&scores).unwrap()).unwrap();
        let b = serde_json::to_string(&run_hypothesis_suite(&scores).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_groups_are_reported_unavailable() {
        let mut scores = synthetic(10, 0.0, 4);
        scores.retain(|s| s.klass == TextClass::Conspiracy);
        let report = run_hypothesis_suite(&scores).unwrap();
        let all = &report.scopes["ALL"];
        assert!(all.h1_anger_by_class.computed().is_none());
        assert!(report.unavailable() > 0);
        let json = serde_json::to_string(all).unwrap();
        assert!(json.contains("unavailable"));
    }

    #[test]
    fn score_corpus_requires_text() {
        let anger = lex("angry\n");
        let violence = lex("kill\n");
        let lx = Lexicons { anger: &anger, violence: &violence, lemmas: None };
        let mut g = GoldDocument {
            doc_id: "d".into(),
            lang: Some(Lang::En),
            klass: TextClass::Critical,
            spans: Vec::new(),
            text: None,
        };
        assert!(score_corpus(std::slice::from_ref(&g), &lx, ExecMode::Sequential).is_err());
        g.text = Some("so angry they kill".into());
        let s = score_corpus(&[g], &lx, ExecMode::Parallel).unwrap();
        assert_eq!((s[0].anger_pct, s[0].violence_pct), (25.0, 25.0));
        assert_eq!(s[0].igc, IgcCategory::C1);
    }
}
