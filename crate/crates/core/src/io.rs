//! Line-delimited JSON record files and their manifests.
//!
//! Every record file `X` is accompanied by `X.manifest.json`:
//!
//! ```json
//! {"format_version": 1, "offsets": "unicode_scalar", "schema": "gold"}
//! ```

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AnnotationRecord, GoldDocument, Message, PredictionSet, Record};

pub const FORMAT_VERSION: u32 = 1;
pub const OFFSET_CONVENTION: &str = "unicode_scalar";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schema {
    Messages,
    Annotations,
    Gold,
    Predictions,
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Schema::Messages => "messages",
            Schema::Annotations => "annotations",
            Schema::Gold => "gold",
            Schema::Predictions => "predictions",
        })
    }
}

impl FromStr for Schema {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "messages" => Ok(Schema::Messages),
            "annotations" => Ok(Schema::Annotations),
            "gold" => Ok(Schema::Gold),
            "predictions" => Ok(Schema::Predictions),
            _ => Err(Error::invalid(format!("unknown schema {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub offsets: String,
    pub schema: Schema,
}

impl Manifest {
    pub fn new(schema: Schema) -> Self {
        Manifest {
            format_version: FORMAT_VERSION,
            offsets: OFFSET_CONVENTION.to_string(),
            schema,
        }
    }
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let mpath = manifest_path(path);
    let raw = std::fs::read_to_string(&mpath).map_err(|e| Error::Manifest {
        path: mpath.clone(),
        message: format!("cannot read manifest: {e}"),
    })?;
    let m: Manifest = serde_json::from_str(&raw).map_err(|e| Error::Manifest {
        path: mpath.clone(),
        message: e.to_string(),
    })?;
    if m.format_version != FORMAT_VERSION {
        return Err(Error::Manifest {
            path: mpath,
            message: format!("unsupported format_version {}", m.format_version),
        });
    }
    if m.offsets != OFFSET_CONVENTION {
        return Err(Error::Manifest {
            path: mpath,
            message: format!("unsupported offset convention {:?}", m.offsets),
        });
    }
    Ok(m)
}

pub trait SchemaRecord: Record + Serialize + DeserializeOwned {
    const SCHEMA: Schema;
}

impl SchemaRecord for Message {
    const SCHEMA: Schema = Schema::Messages;
}
impl SchemaRecord for AnnotationRecord {
    const SCHEMA: Schema = Schema::Annotations;
}
impl SchemaRecord for GoldDocument {
    const SCHEMA: Schema = Schema::Gold;
}
impl SchemaRecord for PredictionSet {
    const SCHEMA: Schema = Schema::Predictions;
}

/// Parses line-delimited records, failing on the first bad line.
/// `label` is used in error messages only.
pub fn parse_records<T: SchemaRecord, R: Read>(reader: R, label: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(io_err(label))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec_err = |message: String| Error::Record {
            path: label.to_path_buf(),
            line: lineno,
            message,
        };
        let mut rec: T = serde_json::from_str(&line).map_err(|e| rec_err(e.to_string()))?;
        rec.validate().map_err(rec_err)?;
        if !seen.insert(rec.key()) {
            return Err(rec_err(format!(
                "duplicate id {:?}",
                rec.key().replace('\u{1f}', "/")
            )));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Reads a record file, checking its manifest declares the expected schema.
pub fn read_records<T: SchemaRecord>(path: &Path) -> Result<Vec<T>> {
    let manifest = read_manifest(path)?;
    if manifest.schema != T::SCHEMA {
        return Err(Error::Manifest {
            path: manifest_path(path),
            message: format!("expected schema {}, found {}", T::SCHEMA, manifest.schema),
        });
    }
    let file = File::open(path).map_err(io_err(path))?;
    parse_records(file, path)
}

pub fn write_records_to<T: Serialize, W: Write>(records: &[T], writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::invalid(e.to_string()))?;
        w.write_all(b"\n").map_err(io_err(Path::new("<writer>")))?;
    }
    w.flush().map_err(io_err(Path::new("<writer>")))
}

/// Writes records plus the manifest sidecar.
pub fn write_records<T: SchemaRecord>(path: &Path, records: &[T]) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    write_records_to(records, file)?;
    write_manifest(path, T::SCHEMA)
}

pub fn write_manifest(path: &Path, schema: Schema) -> Result<()> {
    let mpath = manifest_path(path);
    let body = serde_json::to_string(&Manifest::new(schema)).expect("manifest serializes");
    std::fs::write(&mpath, body + "\n").map_err(io_err(&mpath))
}

/// Records of any schema, for schema-agnostic tooling.
#[derive(Debug, Clone, PartialEq)]
pub enum Corpus {
    Messages(Vec<Message>),
    Annotations(Vec<AnnotationRecord>),
    Gold(Vec<GoldDocument>),
    Predictions(Vec<PredictionSet>),
}

impl Corpus {
    pub fn len(&self) -> usize {
        match self {
            Corpus::Messages(v) => v.len(),
            Corpus::Annotations(v) => v.len(),
            Corpus::Gold(v) => v.len(),
            Corpus::Predictions(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn parse_corpus(path: &Path, schema: Schema) -> Result<Corpus> {
    Ok(match schema {
        Schema::Messages => Corpus::Messages(read_records(path)?),
        Schema::Annotations => Corpus::Annotations(read_records(path)?),
        Schema::Gold => Corpus::Gold(read_records(path)?),
        Schema::Predictions => Corpus::Predictions(read_records(path)?),
    })
}

/// Non-fatal findings for a parsed corpus: documents whose spans cover only
/// whitespace, which usually means offsets were taken over normalized text.
pub fn whitespace_span_warnings<T: Record>(records: &[T]) -> Vec<String> {
    records
        .iter()
        .filter_map(|r| {
            let ws = r.whitespace_spans();
            (!ws.is_empty()).then(|| {
                format!(
                    "{}: {} span(s) cover only whitespace",
                    r.key().replace('\u{1f}', "/"),
                    ws.len()
                )
            })
        })
        .collect()
}
