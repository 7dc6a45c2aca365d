use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use oppo_core::io::{parse_corpus, whitespace_span_warnings, Corpus, Schema};
use oppo_core::pipeline::{index_channels, ChannelStats};

use crate::cli::ValidateArgs;
use crate::output::{read_lines, Ctx};

fn check(path: &Path, schema: Schema) -> Result<(usize, Vec<String>)> {
    let corpus = parse_corpus(path, schema)?;
    let warnings = match &corpus {
        Corpus::Messages(_) => Vec::new(),
        Corpus::Annotations(v) => whitespace_span_warnings(v),
        Corpus::Gold(v) => whitespace_span_warnings(v),
        Corpus::Predictions(v) => whitespace_span_warnings(v),
    };
    Ok((corpus.len(), warnings))
}

/// Parses every file and prints one status line per file. Writes nothing.
pub fn run(ctx: &Ctx, args: &ValidateArgs) -> Result<()> {
    let jobs: Vec<(&PathBuf, Option<Schema>)> = args
        .messages
        .iter()
        .map(|p| (p, Some(Schema::Messages)))
        .chain(args.annotations.iter().map(|p| (p, Some(Schema::Annotations))))
        .chain(args.gold.iter().map(|p| (p, Some(Schema::Gold))))
        .chain(args.predictions.iter().map(|p| (p, Some(Schema::Predictions))))
        .chain(args.channels.iter().map(|p| (p, None)))
        .collect();
    if jobs.is_empty() {
        bail!("nothing to validate; pass at least one file");
    }
    let mut failed = 0;
    for (path, schema) in jobs {
        let outcome = match schema {
            Some(s) => check(path, s),
            None => read_lines::<ChannelStats>(ctx, path)
                .and_then(|v| Ok((index_channels(v)?.len(), Vec::new()))),
        };
        match outcome {
            Ok((n, warnings)) => {
                println!("ok {}: {n} records", path.display());
                for w in warnings {
                    println!("warning {}: {w}", path.display());
                }
            }
            Err(e) => {
                failed += 1;
                println!("invalid {}: {e:#}", path.display());
            }
        }
    }
    if failed > 0 {
        bail!("{failed} file(s) failed validation");
    }
    Ok(())
}
