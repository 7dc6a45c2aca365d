use std::collections::HashSet;
use std::path::PathBuf;

use anyhow::{Context, Result};
use oppo_core::eval::{
    binary_eval, category_presence_eval, crosstab_residuals, outcome_variables, span_f1_corpus,
    BinaryEval, ConfusionMatrix, OverlapUnit,
};
use oppo_core::{Category, GoldDocument, PredictionSet};
use serde::Serialize;
use serde_json::json;

use crate::cli::{EvalArgs, EvalCommon, EvalKind, Unit};
use crate::output::Ctx;

#[derive(Serialize)]
struct Fold {
    predictions: String,
    documents: usize,
    #[serde(flatten)]
    eval: BinaryEval,
}

#[derive(Serialize)]
struct FoldedBinary {
    folds: Vec<Fold>,
    #[serde(with = "oppo_core::na")]
    mean_macro_f1: Option<f64>,
    mean_accuracy: f64,
    mean_confusion: ConfusionMatrix,
}

struct Inputs {
    gold_path: PathBuf,
    gold: Vec<GoldDocument>,
    preds: Vec<(PathBuf, Vec<PredictionSet>)>,
}

fn load(ctx: &Ctx, common: &EvalCommon) -> Result<Inputs> {
    let gold_path = ctx.config.require_path(&common.gold, "gold")?;
    let gold = ctx.read(&gold_path)?;
    let preds = common
        .pred
        .iter()
        .map(|p| Ok((p.clone(), ctx.read(p)?)))
        .collect::<Result<_>>()?;
    Ok(Inputs { gold_path, gold, preds })
}

fn all_predictions(inputs: &Inputs) -> Vec<PredictionSet> {
    inputs.preds.iter().flat_map(|(_, p)| p.iter().cloned()).collect()
}

fn parse_category(s: &str) -> Result<Category> {
    s.trim()
        .to_uppercase()
        .replace([' ', '-'], "_")
        .parse()
        .with_context(|| format!("invalid category {s:?}"))
}

pub fn run(ctx: &Ctx, args: &EvalArgs) -> Result<()> {
    let (kind, common) = match &args.kind {
        EvalKind::Binary(c) => ("binary", c),
        EvalKind::Spans { common, .. } => ("spans", common),
        EvalKind::Categories(c) => ("categories", c),
        EvalKind::ErrorCrosstab { common, .. } => ("error_crosstab", common),
    };
    let inputs = load(ctx, common)?;
    let mut params = json!({
        "kind": kind,
        "gold": inputs.gold_path,
        "pred": common.pred,
        "seed": ctx.seed,
    });

    let (result, line) = match &args.kind {
        EvalKind::Binary(_) if inputs.preds.len() == 1 => {
            let r = binary_eval(&inputs.preds[0].1, &inputs.gold)?;
            let line = format!("binary: macro F1 {}", fmt_opt(r.macro_f1));
            (serde_json::to_value(r)?, line)
        }
        EvalKind::Binary(_) => {
            let mut folds = Vec::new();
            for (path, preds) in &inputs.preds {
                let ids: HashSet<&str> = preds.iter().map(|p| p.doc_id.as_str()).collect();
                let covered: Vec<GoldDocument> = inputs
                    .gold
                    .iter()
                    .filter(|g| ids.contains(g.doc_id.as_str()))
                    .cloned()
                    .collect();
                let eval = binary_eval(preds, &covered)
                    .with_context(|| format!("fold {}", path.display()))?;
                folds.push(Fold {
                    predictions: path.display().to_string(),
                    documents: covered.len(),
                    eval,
                });
            }
            let confusions: Vec<ConfusionMatrix> = folds.iter().map(|f| f.eval.confusion.clone()).collect();
            let f1s: Option<Vec<f64>> = folds.iter().map(|f| f.eval.macro_f1).collect();
            let n = folds.len() as f64;
            let r = FoldedBinary {
                mean_macro_f1: f1s.map(|v| v.iter().sum::<f64>() / n),
                mean_accuracy: folds.iter().map(|f| f.eval.accuracy).sum::<f64>() / n,
                mean_confusion: ConfusionMatrix::mean(&confusions)?,
                folds,
            };
            let line = format!("binary: {} folds, mean macro F1 {}", r.folds.len(), fmt_opt(r.mean_macro_f1));
            (serde_json::to_value(r)?, line)
        }
        EvalKind::Spans { unit, .. } => {
            let unit = match unit {
                Unit::Char => OverlapUnit::Char,
                Unit::Token => OverlapUnit::Token,
            };
            params["unit"] = json!(unit);
            let r = span_f1_corpus(&all_predictions(&inputs), &inputs.gold, unit, ctx.mode)?;
            let line = format!("spans: macro F1 {}", fmt_opt(r.macro_f1));
            (serde_json::to_value(r)?, line)
        }
        EvalKind::Categories(_) => {
            let r = category_presence_eval(&all_predictions(&inputs), &inputs.gold)?;
            let line = format!("categories: macro F1 {}", fmt_opt(r.macro_f1));
            (serde_json::to_value(r)?, line)
        }
        EvalKind::ErrorCrosstab { row, col, .. } => {
            let (row, col) = (parse_category(row)?, parse_category(col)?);
            params["row"] = json!(row);
            params["col"] = json!(col);
            let preds = all_predictions(&inputs);
            let rows = outcome_variables(&preds, &inputs.gold, row)?;
            let cols = outcome_variables(&preds, &inputs.gold, col)?;
            ctx.write_lines(&format!("outcomes_{row}.jsonl"), &rows)?;
            if col != row {
                ctx.write_lines(&format!("outcomes_{col}.jsonl"), &cols)?;
            }
            let r = crosstab_residuals(&rows, &cols)?;
            let line = format!(
                "error crosstab {row} x {col}: chi2 {:.3}, p {:.4}",
                r.result.report.statistic, r.result.report.p
            );
            (serde_json::to_value(r)?, line)
        }
    };

    let name = common
        .report
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("eval_{kind}.json")));
    let prov = ctx.provenance("eval", params);
    ctx.write_report(&name, &prov, &result)?;
    ctx.summary(line);
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"))
}
