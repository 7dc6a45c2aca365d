//! Toolkit for building and analysing oppositional-discourse corpora:
//! message filtering and anonymization, gold-standard construction from
//! multiple annotators, agreement measures, span- and text-level evaluation,
//! and the nonparametric statistics used to compare conspiracy and critical
//! messages.

pub mod agreement;
pub mod analysis;
pub mod anonymizer;
pub mod error;
pub mod eval;
pub mod gold;
pub mod io;
pub mod model;
pub mod na;
pub mod par;
pub mod pipeline;
pub mod stats;
pub mod text;

pub use error::{Error, Result};
pub use model::{
    AnnotationRecord, Category, GoldDocument, Lang, Message, PredictionSet, Span, TextClass,
};
pub use par::ExecMode;
