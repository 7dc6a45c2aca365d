use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use anyhow::{bail, Result};
use oppo_core::anonymizer::{
    anonymize_corpus, detect_sensitive, Anonymized, DecisionEntry, Decisions, EntityKind, OffsetMap,
    SensitiveEntity,
};
use oppo_core::io::{read_manifest, Schema};
use oppo_core::model::normalize_spans;
use oppo_core::{AnnotationRecord, GoldDocument, Message, Span};
use serde::Serialize;
use serde_json::json;

use crate::cli::AnonArgs;
use crate::output::{read_lines, Ctx};

#[derive(Serialize)]
struct OffsetRecord<'a> {
    doc_id: &'a str,
    #[serde(flatten)]
    offsets: &'a OffsetMap,
}

#[derive(Serialize)]
struct AnonSummary {
    messages: usize,
    changed: usize,
    replacements: BTreeMap<EntityKind, usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    remapped_records: Option<usize>,
}

fn remap(spans: &[Span], map: &OffsetMap) -> Vec<Span> {
    normalize_spans(spans.iter().map(|s| map.map_span(s)).collect())
}

pub fn run(ctx: &Ctx, args: &AnonArgs) -> Result<()> {
    if args.salt.is_empty() {
        bail!("--salt must not be empty");
    }
    let messages_path = ctx.config.require_path(&args.messages, "messages")?;
    let entities_path = ctx.config.path(&args.entities, "entities");
    let decisions_path = ctx.config.path(&args.decisions, "decisions");

    let messages: Vec<Message> = ctx.read(&messages_path)?;
    let candidates: Vec<SensitiveEntity> = match &entities_path {
        Some(p) => read_lines(ctx, p)?,
        None => Vec::new(),
    };
    let mut decisions = Decisions::new();
    if let Some(p) = &decisions_path {
        for d in read_lines::<DecisionEntry>(ctx, p)? {
            if decisions.insert(d.entity.clone(), d.decision).is_some() {
                bail!("{}: duplicate decision for {}", p.display(), d.entity);
            }
        }
    }
    // every decision must name an entity that exists
    let mut known: HashSet<String> = candidates.iter().map(SensitiveEntity::id).collect();
    for m in &messages {
        known.extend(detect_sensitive(m).iter().map(SensitiveEntity::id));
    }
    let mut unknown: Vec<&String> = decisions.keys().filter(|k| !known.contains(*k)).collect();
    unknown.sort();
    if let Some(first) = unknown.first() {
        bail!("decision for unknown entity {first} ({} unknown in total)", unknown.len());
    }

    let out: Vec<Anonymized> = anonymize_corpus(&messages, &candidates, &decisions, &args.salt, ctx.mode)?;
    let anonymized: Vec<Message> = out.iter().map(|a| a.message.clone()).collect();
    ctx.write_records("anonymized.jsonl", &anonymized)?;
    let offsets: Vec<OffsetRecord> = out
        .iter()
        .map(|a| OffsetRecord {
            doc_id: &a.message.id,
            offsets: &a.offsets,
        })
        .collect();
    ctx.write_lines("offsets.jsonl", &offsets)?;
    let applied: Vec<_> = out.iter().flat_map(|a| a.applied.iter()).collect();
    ctx.write_lines("replacements.jsonl", &applied)?;

    let remapped_records = match &args.spans {
        Some(p) => Some(remap_file(ctx, p, &out)?),
        None => None,
    };

    let mut replacements: BTreeMap<EntityKind, usize> = BTreeMap::new();
    for a in &applied {
        *replacements.entry(a.kind).or_default() += 1;
    }
    let summary = AnonSummary {
        messages: messages.len(),
        changed: out.iter().filter(|a| !a.applied.is_empty()).count(),
        replacements,
        remapped_records,
    };
    let prov = ctx.provenance(
        "anon",
        json!({
            "messages": messages_path,
            "entities": entities_path,
            "decisions": decisions_path,
            "spans": args.spans,
            "salt_sha256": crate::output::sha256_hex(args.salt.as_bytes()),
            "seed": ctx.seed,
        }),
    );
    ctx.write_report("anon_report.json", &prov, &summary)?;
    ctx.summary(format!(
        "anon: {} messages, {} changed, {} replacements",
        summary.messages,
        summary.changed,
        applied.len()
    ));
    Ok(())
}

/// Rewrites the spans (and text, when present) of a gold or annotation
/// file to the anonymized offsets.
fn remap_file(ctx: &Ctx, path: &Path, out: &[Anonymized]) -> Result<usize> {
    let by_doc: HashMap<&str, &Anonymized> = out.iter().map(|a| (a.message.id.as_str(), a)).collect();
    let stem = path
        .file_stem()
        .map_or_else(|| "spans".to_string(), |s| s.to_string_lossy().into_owned());
    let name = format!("{stem}.anonymized.jsonl");
    let lookup = |doc: &str| {
        by_doc
            .get(doc)
            .copied()
            .ok_or_else(|| anyhow::anyhow!("{}: document {doc} is not among the messages", path.display()))
    };
    match read_manifest(path)?.schema {
        Schema::Gold => {
            let mut docs: Vec<GoldDocument> = ctx.read(path)?;
            for d in &mut docs {
                let a = lookup(&d.doc_id)?;
                d.spans = remap(&d.spans, &a.offsets);
                if d.text.is_some() {
                    d.text = Some(a.message.text.clone());
                }
            }
            ctx.write_records(&name, &docs)?;
            Ok(docs.len())
        }
        Schema::Annotations => {
            let mut recs: Vec<AnnotationRecord> = ctx.read(path)?;
            for r in &mut recs {
                let a = lookup(&r.doc_id)?;
                r.spans = remap(&r.spans, &a.offsets);
                if r.text.is_some() {
                    r.text = Some(a.message.text.clone());
                }
            }
            ctx.write_records(&name, &recs)?;
            Ok(recs.len())
        }
        other => bail!("{}: cannot remap spans of a {other} file", path.display()),
    }
}
