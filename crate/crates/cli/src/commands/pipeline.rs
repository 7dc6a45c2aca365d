use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};
use oppo_core::pipeline::{
    filter_messages, index_channels, rank_and_select, score_all, ChannelStats, CorpusDistributions,
    DropReason, FilterConfig, CRITERIA_NAMES,
};
use oppo_core::Message;
use serde::Serialize;
use serde_json::json;

use crate::cli::PipelineArgs;
use crate::output::{read_lines, Ctx};

#[derive(Serialize)]
struct PipelineSummary {
    input_messages: usize,
    kept: usize,
    dropped: BTreeMap<DropReason, usize>,
    selected: usize,
}

pub fn run(ctx: &Ctx, args: &PipelineArgs) -> Result<()> {
    let th = &ctx.config.thresholds;
    let messages_path = ctx.config.require_path(&args.messages, "messages")?;
    let channels_path = ctx.config.require_path(&args.channels, "channels")?;
    let cfg = FilterConfig {
        min_tokens: args.min_tokens.or(th.min_tokens).unwrap_or(FilterConfig::default().min_tokens),
        max_link_ratio: args
            .max_link_ratio
            .or(th.max_link_ratio)
            .unwrap_or(FilterConfig::default().max_link_ratio),
    };
    if cfg.min_tokens == 0 {
        bail!("--min-tokens must be at least 1");
    }
    if !(0.0..=1.0).contains(&cfg.max_link_ratio) {
        bail!("--max-link-ratio must lie in [0, 1]");
    }
    let top_k = args.top_k.or(th.top_k);

    let mut messages: Vec<Message> = ctx.read(&messages_path)?;
    if let Some(lang) = ctx.config.language {
        messages.retain(|m| m.lang == lang);
    }
    let stats: Vec<ChannelStats> = read_lines(ctx, &channels_path)?;
    let channels = index_channels(stats).context("invalid channel statistics")?;

    let outcome = filter_messages(&messages, &cfg)?;
    let dists = CorpusDistributions::build(&outcome.kept, &channels)?;
    let scores = if outcome.kept.is_empty() {
        Vec::new()
    } else {
        score_all(&outcome.kept, &channels, &dists, ctx.mode)?
    };
    let ranked = rank_and_select(&outcome.kept, &scores, top_k.unwrap_or(usize::MAX))?;
    let selected: Vec<Message> = ranked.iter().map(|(m, _)| (*m).clone()).collect();

    ctx.write_records("selected.jsonl", &selected)?;
    ctx.write_lines("scores.jsonl", &scores)?;
    ctx.write_lines("dropped.jsonl", &outcome.dropped)?;

    if args.export_review {
        let by_id: BTreeMap<&str, &oppo_core::pipeline::QualityScore> =
            scores.iter().map(|s| (s.doc_id.as_str(), s)).collect();
        let path = ctx.out_path("review.csv")?;
        let mut w = csv::Writer::from_path(&path)
            .with_context(|| format!("cannot write {}", path.display()))?;
        let mut header = vec!["rank", "id", "lang", "channel_id", "total"];
        header.extend(CRITERIA_NAMES);
        header.extend(["text", "relevant"]);
        w.write_record(&header)?;
        for (rank, (m, total)) in ranked.iter().enumerate() {
            let mut row = vec![
                (rank + 1).to_string(),
                m.id.clone(),
                m.lang.code().to_string(),
                m.channel_id.clone(),
                format!("{total:.6}"),
            ];
            row.extend(by_id[m.id.as_str()].per_criterion.iter().map(|v| format!("{v:.6}")));
            row.push(m.text.clone());
            row.push(String::new());
            w.write_record(&row)?;
        }
        w.flush()?;
    }

    let mut dropped: BTreeMap<DropReason, usize> = BTreeMap::new();
    for d in &outcome.dropped {
        *dropped.entry(d.reason).or_default() += 1;
    }
    let summary = PipelineSummary {
        input_messages: messages.len(),
        kept: outcome.kept.len(),
        dropped,
        selected: selected.len(),
    };
    let prov = ctx.provenance(
        "pipeline",
        json!({
            "messages": messages_path,
            "channels": channels_path,
            "min_tokens": cfg.min_tokens,
            "max_link_ratio": cfg.max_link_ratio,
            "top_k": top_k,
            "language": ctx.config.language,
            "export_review": args.export_review,
            "seed": ctx.seed,
        }),
    );
    ctx.write_report("pipeline_report.json", &prov, &summary)?;
    ctx.summary(format!(
        "pipeline: {} in, {} kept, {} dropped, {} selected",
        summary.input_messages,
        summary.kept,
        outcome.dropped.len(),
        summary.selected
    ));
    Ok(())
}
