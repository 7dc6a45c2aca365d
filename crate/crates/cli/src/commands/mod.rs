use std::path::PathBuf;

use anyhow::Result;
use oppo_core::gold::AnnotatorSet;
use oppo_core::AnnotationRecord;

use crate::output::Ctx;

pub mod analyze;
pub mod anon;
pub mod eval;
pub mod gold;
pub mod iaa;
pub mod pipeline;
pub mod validate;

/// Reads annotation files and groups their records by annotator. One file
/// may hold several annotators and one annotator may span several files.
pub fn read_annotator_sets(ctx: &Ctx, paths: &[PathBuf]) -> Result<Vec<AnnotatorSet>> {
    let mut records: Vec<AnnotationRecord> = Vec::new();
    for p in paths {
        records.extend(ctx.read::<AnnotationRecord>(p)?);
    }
    Ok(AnnotatorSet::split(records))
}
