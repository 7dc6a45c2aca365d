use std::path::PathBuf;

use anyhow::Result;
use oppo_core::analysis::{run_hypothesis_suite, score_corpus, LemmaMap, Lexicon, Lexicons};
use oppo_core::GoldDocument;
use serde_json::json;

use crate::cli::AnalyzeArgs;
use crate::output::Ctx;

pub fn run(ctx: &Ctx, args: &AnalyzeArgs) -> Result<()> {
    let gold_path = ctx.config.require_path(&args.gold, "gold")?;
    let anger_path = ctx.config.require_path(&args.anger_lexicon, "anger_lexicon")?;
    let violence_path = ctx.config.require_path(&args.violence_lexicon, "violence_lexicon")?;
    let lemma_path = ctx.config.path(&args.lemma_map, "lemma_map");

    let gold: Vec<GoldDocument> = ctx.read(&gold_path)?;
    ctx.input(&anger_path)?;
    ctx.input(&violence_path)?;
    let anger = Lexicon::from_file(&anger_path)?;
    let violence = Lexicon::from_file(&violence_path)?;
    let lemmas = match &lemma_path {
        Some(p) => {
            ctx.input(p)?;
            Some(LemmaMap::from_file(p)?)
        }
        None => None,
    };
    let lex = Lexicons {
        anger: &anger,
        violence: &violence,
        lemmas: lemmas.as_ref(),
    };

    let scores = score_corpus(&gold, &lex, ctx.mode)?;
    ctx.write_lines("lexicon_scores.jsonl", &scores)?;
    let report = run_hypothesis_suite(&scores)?;

    let name = args
        .report
        .clone()
        .unwrap_or_else(|| PathBuf::from("analysis_report.json"));
    let prov = ctx.provenance(
        "analyze",
        json!({
            "gold": gold_path,
            "anger_lexicon": anger_path,
            "violence_lexicon": violence_path,
            "lemma_map": lemma_path,
            "anger_entries": anger.len(),
            "violence_entries": violence.len(),
            "seed": ctx.seed,
        }),
    );
    ctx.write_report(&name, &prov, &report)?;
    let unavailable = report.unavailable();
    ctx.summary(format!(
        "analyze: {} documents scored, {} finding(s) unavailable",
        scores.len(),
        unavailable
    ));
    if unavailable > 0 {
        return Err(oppo_core::Error::degenerate(format!(
            "{unavailable} finding(s) could not be computed; see the report"
        ))
        .into());
    }
    Ok(())
}
