use std::collections::HashMap;

use anyhow::{bail, Result};
use oppo_core::agreement::{
    continua_from_annotations, gamma_agreement, gamma_batches, krippendorff_alpha, observed_agreement,
    pairwise_f1_agreement, GammaConfig, PairwiseMode, ReliabilityMatrix, DEFAULT_RESAMPLES,
};
use oppo_core::gold::AnnotatorSet;
use oppo_core::{GoldDocument, Message, TextClass};
use serde::Serialize;
use serde_json::json;

use crate::cli::{IaaArgs, Metric, PairMode};
use crate::commands::read_annotator_sets;
use crate::output::Ctx;

#[derive(Serialize)]
struct PerClass {
    #[serde(with = "oppo_core::na")]
    conspiracy: Option<f64>,
    #[serde(with = "oppo_core::na")]
    critical: Option<f64>,
    items: usize,
    annotators: Vec<String>,
}

fn per_class(
    sets: &[AnnotatorSet],
    mut f: impl FnMut(&ReliabilityMatrix<bool>) -> Option<f64>,
) -> Result<PerClass> {
    let con = ReliabilityMatrix::from_annotations(sets, |r| r.conspiracy)?;
    let crit = ReliabilityMatrix::from_annotations(sets, |r| r.critical)?;
    Ok(PerClass {
        conspiracy: f(&con),
        critical: f(&crit),
        items: con.items().len(),
        annotators: con.annotators().to_vec(),
    })
}

pub fn run(ctx: &Ctx, args: &IaaArgs) -> Result<()> {
    let th = &ctx.config.thresholds;
    let sets = read_annotator_sets(ctx, &args.annotations)?;
    let metric_name = match args.metric {
        Metric::Alpha => "alpha",
        Metric::Observed => "observed",
        Metric::Gamma => "gamma",
        Metric::PairwiseF1 => "pairwise_f1",
    };
    let mut params = json!({
        "metric": metric_name,
        "annotations": args.annotations,
        "seed": ctx.seed,
    });
    let mut degenerate: Option<String> = None;

    let result = match args.metric {
        Metric::Alpha => {
            let mut errors = Vec::new();
            let r = per_class(&sets, |m| match krippendorff_alpha(m) {
                Ok(a) => Some(a),
                Err(e) => {
                    errors.push(e.to_string());
                    None
                }
            })?;
            if let Some(e) = errors.first() {
                degenerate = Some(e.clone());
            }
            serde_json::to_value(r)?
        }
        Metric::Observed => serde_json::to_value(per_class(&sets, |m| Some(observed_agreement(m)))?)?,
        Metric::Gamma => {
            let [first, second] = <&[AnnotatorSet; 2]>::try_from(sets.as_slice()).map_err(|_| {
                anyhow::anyhow!(
                    "gamma needs exactly 2 annotators, found {}",
                    sets.len()
                )
            })?;
            let mut lengths = HashMap::new();
            let messages_path = ctx.config.path(&args.messages, "messages");
            if let Some(p) = &messages_path {
                for m in ctx.read::<Message>(p)? {
                    lengths.insert(m.id.clone(), m.text.chars().count());
                }
            }
            let continua = continua_from_annotations(first, second, &lengths)?;
            let cfg = GammaConfig {
                resamples: args.resamples.or(th.resamples).unwrap_or(DEFAULT_RESAMPLES),
                seed: ctx.seed,
            };
            let batch_size = args.batch_size.or(th.batch_size);
            params["resamples"] = json!(cfg.resamples);
            params["batch_size"] = json!(batch_size);
            params["messages"] = json!(messages_path);
            match batch_size {
                Some(b) => {
                    let r = gamma_batches(&continua, &cfg, b, ctx.mode)?;
                    if r.mean.is_none() {
                        degenerate = Some("no batch has a defined gamma".into());
                    }
                    serde_json::to_value(r)?
                }
                None => serde_json::to_value(gamma_agreement(&continua, &cfg, ctx.mode)?)?,
            }
        }
        Metric::PairwiseF1 => {
            let (mode, gold) = match args.mode {
                PairMode::HumanVsHuman => (PairwiseMode::HumanVsHuman, None),
                PairMode::HumanVsGold => {
                    let Some(path) = ctx.config.path(&args.gold, "gold") else {
                        bail!("--mode human-vs-gold needs --gold");
                    };
                    params["gold"] = json!(path);
                    let gold: HashMap<String, Option<TextClass>> = ctx
                        .read::<GoldDocument>(&path)?
                        .into_iter()
                        .map(|g| (g.doc_id, Some(g.klass)))
                        .collect();
                    (PairwiseMode::HumanVsGold, Some(gold))
                }
            };
            params["mode"] = json!(mode);
            serde_json::to_value(pairwise_f1_agreement(&sets, mode, gold.as_ref())?)?
        }
    };

    let prov = ctx.provenance("iaa", params);
    ctx.write_report("iaa_report.json", &prov, &result)?;
    ctx.summary(format!("iaa {metric_name}: {result}"));
    if let Some(msg) = degenerate {
        return Err(oppo_core::Error::degenerate(msg).into());
    }
    Ok(())
}
