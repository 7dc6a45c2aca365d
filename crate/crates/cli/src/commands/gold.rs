use std::collections::{BTreeMap, HashMap};

use anyhow::{bail, Result};
use oppo_core::gold::{build_gold, span_statistics, AnnotatorSet, GoldConfig, MergeConfig, VoteClass};
use oppo_core::{Message, TextClass};
use serde::Serialize;
use serde_json::json;

use crate::cli::GoldArgs;
use crate::commands::read_annotator_sets;
use crate::output::Ctx;

#[derive(Serialize)]
struct GoldSummary {
    documents: usize,
    gold: usize,
    classes: BTreeMap<TextClass, usize>,
    excluded: usize,
    adjudication: usize,
    rejected_spans: usize,
    conflict_notes: usize,
    label_annotators: Vec<String>,
    span_annotators: Vec<String>,
}

pub fn run(ctx: &Ctx, args: &GoldArgs) -> Result<()> {
    let th = &ctx.config.thresholds;
    let expected = args.annotators.or(th.annotators).unwrap_or(oppo_core::gold::DEFAULT_ANNOTATORS);
    let ids: Vec<String> = if args.annotator_ids.is_empty() {
        ctx.config.annotator_ids.clone()
    } else {
        args.annotator_ids.clone()
    };
    if !ids.is_empty() && ids.len() != expected {
        bail!("{} annotator ids given but {expected} annotators expected", ids.len());
    }
    let cfg = GoldConfig {
        annotators: expected,
        merge: MergeConfig {
            conflict_overlap: args
                .conflict_overlap
                .or(th.conflict_overlap)
                .unwrap_or(MergeConfig::default().conflict_overlap),
        },
    };
    if cfg.merge.conflict_overlap == 0 {
        bail!("--conflict-overlap must be at least 1");
    }

    let labels = read_annotator_sets(ctx, &args.labels)?;
    if !ids.is_empty() {
        let missing: Vec<&str> = ids
            .iter()
            .filter(|id| !labels.iter().any(|s| &s.name == *id))
            .map(String::as_str)
            .collect();
        if !missing.is_empty() {
            bail!("missing label annotations from annotator(s): {}", missing.join(", "));
        }
        let extra: Vec<&str> = labels
            .iter()
            .filter(|s| !ids.contains(&s.name))
            .map(|s| s.name.as_str())
            .collect();
        if !extra.is_empty() {
            bail!("unexpected label annotator(s): {}", extra.join(", "));
        }
    }

    let spans: Option<[AnnotatorSet; 2]> = if args.spans.is_empty() {
        None
    } else {
        let sets = read_annotator_sets(ctx, &args.spans)?;
        let names: Vec<String> = sets.iter().map(|s| s.name.clone()).collect();
        match <[AnnotatorSet; 2]>::try_from(sets) {
            Ok(pair) => Some(pair),
            Err(_) => bail!(
                "span files must hold exactly 2 annotators, found {} ({})",
                names.len(),
                names.join(", ")
            ),
        }
    };

    let messages_path = ctx.config.path(&args.messages, "messages");
    let messages: Option<HashMap<String, Message>> = match &messages_path {
        Some(p) => Some(
            ctx.read::<Message>(p)?
                .into_iter()
                .map(|m| (m.id.clone(), m))
                .collect(),
        ),
        None => None,
    };

    let build = build_gold(&labels, spans.as_ref(), messages.as_ref(), &cfg, ctx.mode)?;

    ctx.write_records("gold.jsonl", &build.gold)?;
    ctx.write_lines("votes.jsonl", &build.votes)?;
    ctx.write_lines("adjudication.jsonl", &build.adjudication)?;
    ctx.write_lines("rejections.jsonl", &build.rejections)?;
    ctx.write_lines("conflict_notes.jsonl", &build.conflict_notes)?;
    if spans.is_some() {
        ctx.write_json("span_statistics.json", &span_statistics(&build.gold))?;
    }

    let mut classes = BTreeMap::new();
    for g in &build.gold {
        *classes.entry(g.klass).or_default() += 1;
    }
    let summary = GoldSummary {
        documents: build.votes.len(),
        gold: build.gold.len(),
        classes,
        excluded: build.excluded.len(),
        adjudication: build
            .votes
            .iter()
            .filter(|v| v.klass == VoteClass::Unresolved)
            .count(),
        rejected_spans: build.rejections.len(),
        conflict_notes: build.conflict_notes.len(),
        label_annotators: labels.iter().map(|s| s.name.clone()).collect(),
        span_annotators: spans
            .as_ref()
            .map(|s| s.iter().map(|a| a.name.clone()).collect())
            .unwrap_or_default(),
    };
    let prov = ctx.provenance(
        "gold",
        json!({
            "labels": args.labels,
            "spans": args.spans,
            "messages": messages_path,
            "annotators": cfg.annotators,
            "annotator_ids": ids,
            "conflict_overlap": cfg.merge.conflict_overlap,
            "seed": ctx.seed,
        }),
    );
    ctx.write_report("gold_report.json", &prov, &summary)?;
    ctx.summary(format!(
        "gold: {} documents, {} gold, {} excluded, {} to adjudicate, {} spans rejected",
        summary.documents, summary.gold, summary.excluded, summary.adjudication, summary.rejected_spans
    ));
    Ok(())
}
