//! Message filtering, six-criterion quality scoring and top-k selection.
//!
//! Each criterion is mapped to its empirical percentile rank over the corpus
//! (fraction of corpus messages whose raw value is `<=` the message's value),
//! and the quality score is the sum of the six ranks.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Message;
use crate::par::ExecMode;
use crate::text;

pub const DEFAULT_MIN_TOKENS: usize = 12;
pub const N_CRITERIA: usize = 6;

pub const CRITERIA_NAMES: [&str; N_CRITERIA] = [
    "audience",
    "author_count",
    "messages_per_author_mean",
    "messages_per_author_std",
    "message_count",
    "message_tokens",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DropReason {
    Duplicate,
    Short,
    LinkHeavy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dropped {
    pub id: String,
    pub reason: DropReason,
    /// For duplicates, the id of the message that was kept.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duplicate_of: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub kept: Vec<Message>,
    pub dropped: Vec<Dropped>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub min_tokens: usize,
    pub max_link_ratio: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_tokens: DEFAULT_MIN_TOKENS,
            max_link_ratio: 0.5,
        }
    }
}

pub fn is_url(token: &str) -> bool {
    ["http://", "https://", "www.", "t.me/"]
        .iter()
        .any(|p| token.starts_with(p))
}

pub fn is_mention(token: &str) -> bool {
    token.len() > 1 && token.starts_with('@')
}

/// Fraction of whitespace tokens that are URLs or @-mentions.
pub fn link_ratio(text: &str) -> f64 {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.is_empty() {
        return 0.0;
    }
    let links = tokens
        .iter()
        .filter(|t| is_url(t) || is_mention(t))
        .count();
    links as f64 / tokens.len() as f64
}

/// Drops duplicates (after whitespace collapsing and lowercasing), short
/// messages and link-heavy messages. The first occurrence of a duplicate is
/// kept; checks apply in that order.
pub fn filter_messages(messages: &[Message], cfg: &FilterConfig) -> Result<FilterOutcome> {
    if cfg.min_tokens < 1 {
        return Err(Error::invalid("min_tokens must be at least 1"));
    }
    if !(0.0..=1.0).contains(&cfg.max_link_ratio) {
        return Err(Error::invalid("max_link_ratio must lie in [0, 1]"));
    }
    let mut first_seen: HashMap<String, &str> = HashMap::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for m in messages {
        let key = text::normalize_for_dedup(&m.text);
        if let Some(orig) = first_seen.get(&key) {
            dropped.push(Dropped {
                id: m.id.clone(),
                reason: DropReason::Duplicate,
                duplicate_of: Some(orig.to_string()),
            });
            continue;
        }
        first_seen.insert(key, &m.id);
        let reason = if m.token_count < cfg.min_tokens {
            Some(DropReason::Short)
        } else if link_ratio(&m.text) > cfg.max_link_ratio {
            Some(DropReason::LinkHeavy)
        } else {
            None
        };
        match reason {
            Some(reason) => dropped.push(Dropped {
                id: m.id.clone(),
                reason,
                duplicate_of: None,
            }),
            None => kept.push(m.clone()),
        }
    }
    Ok(FilterOutcome { kept, dropped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub channel_id: String,
    pub audience: u64,
    pub author_count: u64,
    pub messages_per_author_mean: f64,
    pub messages_per_author_std: f64,
    pub message_count: u64,
}

impl ChannelStats {
    pub fn validate(&self) -> Result<()> {
        if self.message_count > 0 && self.author_count > self.message_count {
            return Err(Error::invalid(format!(
                "channel {}: author_count {} exceeds message_count {}",
                self.channel_id, self.author_count, self.message_count
            )));
        }
        for (name, v) in [
            ("messages_per_author_mean", self.messages_per_author_mean),
            ("messages_per_author_std", self.messages_per_author_std),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!(
                    "channel {}: {name} must be finite and >= 0",
                    self.channel_id
                )));
            }
        }
        Ok(())
    }

    /// Derives author statistics from the messages of one channel; audience
    /// is not observable from messages and must be supplied.
    pub fn from_messages<'a>(
        channel_id: &str,
        audience: u64,
        messages: impl IntoIterator<Item = &'a Message>,
    ) -> ChannelStats {
        let mut per_author: HashMap<&str, u64> = HashMap::new();
        let mut count = 0u64;
        for m in messages {
            if m.channel_id != channel_id {
                continue;
            }
            count += 1;
            *per_author
                .entry(m.author_id.as_deref().unwrap_or(""))
                .or_default() += 1;
        }
        let n = per_author.len() as f64;
        let (mean, std) = if per_author.is_empty() {
            (0.0, 0.0)
        } else {
            let mean = count as f64 / n;
            let var = per_author
                .values()
                .map(|&c| (c as f64 - mean).powi(2))
                .sum::<f64>()
                / n;
            (mean, var.sqrt())
        };
        ChannelStats {
            channel_id: channel_id.to_string(),
            audience,
            author_count: per_author.len() as u64,
            messages_per_author_mean: mean,
            messages_per_author_std: std,
            message_count: count,
        }
    }
}

pub type ChannelIndex = HashMap<String, ChannelStats>;

pub fn index_channels(stats: Vec<ChannelStats>) -> Result<ChannelIndex> {
    let mut idx = HashMap::with_capacity(stats.len());
    for s in stats {
        s.validate()?;
        let id = s.channel_id.clone();
        if idx.insert(id.clone(), s).is_some() {
            return Err(Error::invalid(format!("duplicate channel {id:?}")));
        }
    }
    Ok(idx)
}

pub fn raw_criteria(message: &Message, channels: &ChannelIndex) -> Result<[f64; N_CRITERIA]> {
    let s = channels.get(&message.channel_id).ok_or_else(|| {
        Error::invalid(format!(
            "message {}: unknown channel_id {:?}",
            message.id, message.channel_id
        ))
    })?;
    Ok([
        s.audience as f64,
        s.author_count as f64,
        s.messages_per_author_mean,
        s.messages_per_author_std,
        s.message_count as f64,
        message.token_count as f64,
    ])
}

/// Per-criterion sorted raw values over a corpus snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusDistributions {
    sorted: [Vec<f64>; N_CRITERIA],
}

impl CorpusDistributions {
    pub fn build(messages: &[Message], channels: &ChannelIndex) -> Result<Self> {
        let mut sorted: [Vec<f64>; N_CRITERIA] = Default::default();
        for m in messages {
            let raw = raw_criteria(m, channels)?;
            for (col, v) in sorted.iter_mut().zip(raw) {
                col.push(v);
            }
        }
        for col in &mut sorted {
            col.sort_by(f64::total_cmp);
        }
        Ok(CorpusDistributions { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Fraction of corpus values `<= value` for the given criterion.
    pub fn percentile(&self, criterion: usize, value: f64) -> Result<f64> {
        let col = &self.sorted[criterion];
        if col.is_empty() {
            return Err(Error::invalid(format!(
                "empty distribution for criterion {}",
                CRITERIA_NAMES[criterion]
            )));
        }
        let at_or_below = col.partition_point(|&v| v <= value);
        Ok(at_or_below as f64 / col.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityScore {
    pub doc_id: String,
    pub per_criterion: [f64; N_CRITERIA],
    pub total: f64,
}

pub fn quality_score(
    message: &Message,
    channels: &ChannelIndex,
    dists: &CorpusDistributions,
) -> Result<QualityScore> {
    let raw = raw_criteria(message, channels)?;
    let mut per_criterion = [0.0; N_CRITERIA];
    for (i, v) in raw.into_iter().enumerate() {
        per_criterion[i] = dists.percentile(i, v)?;
    }
    Ok(QualityScore {
        doc_id: message.id.clone(),
        per_criterion,
        total: per_criterion.iter().sum(),
    })
}

pub fn score_all(
    messages: &[Message],
    channels: &ChannelIndex,
    dists: &CorpusDistributions,
    mode: ExecMode,
) -> Result<Vec<QualityScore>> {
    mode.try_map(messages, |m| quality_score(m, channels, dists))
}

/// Top-k by total descending, ties by id ascending.
pub fn rank_and_select<'a>(
    messages: &'a [Message],
    scores: &[QualityScore],
    k: usize,
) -> Result<Vec<(&'a Message, f64)>> {
    let by_id: HashMap<&str, f64> = scores.iter().map(|s| (s.doc_id.as_str(), s.total)).collect();
    let mut ranked = Vec::with_capacity(messages.len());
    let mut seen = HashSet::new();
    for m in messages {
        let total = *by_id
            .get(m.id.as_str())
            .ok_or_else(|| Error::invalid(format!("message {} has no score", m.id)))?;
        if seen.insert(m.id.as_str()) {
            ranked.push((m, total));
        }
    }
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.id.cmp(&b.0.id)));
    ranked.truncate(k);
    Ok(ranked)
}
