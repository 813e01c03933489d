//! JSON Lines dataset files: one `{"tokens": [...], "tags": [...]}` per line.

use std::io::Write;
use std::path::Path;

use serde::Deserialize;

use super::iob::{validate_iob, IobMode};
use super::types::{DomainDataset, DomainSchema, IobTag, TaggedUtterance};
use crate::error::{Error, Result};

#[derive(Deserialize)]
struct RawRecord {
    tokens: Vec<String>,
    tags: Vec<String>,
}

/// Parses JSON Lines text, validating each record against `schema`.
pub fn parse_utterances(text: &str, schema: &DomainSchema, mode: IobMode) -> Result<Vec<TaggedUtterance>> {
    let mut out = Vec::new();
    for (index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| Error::Record {
            index,
            message: e.to_string(),
        })?;
        if raw.tokens.len() != raw.tags.len() {
            return Err(Error::Record {
                index,
                message: format!("{} tokens but {} tags", raw.tokens.len(), raw.tags.len()),
            });
        }
        let tags = raw
            .tags
            .iter()
            .map(|t| t.parse::<IobTag>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|message| Error::Record { index, message })?;
        schema.check_tags(&tags)?;
        let (tags, _) = validate_iob(&tags, mode).map_err(|e| Error::Record {
            index,
            message: e.to_string(),
        })?;
        out.push(TaggedUtterance {
            tokens: raw.tokens,
            tags,
        });
    }
    Ok(out)
}

/// Reads a JSON Lines dataset with lenient IOB repair.
pub fn parse_dataset(path: impl AsRef<Path>, schema: &DomainSchema) -> Result<Vec<TaggedUtterance>> {
    parse_dataset_with(path, schema, IobMode::Lenient)
}

pub fn parse_dataset_with(
    path: impl AsRef<Path>,
    schema: &DomainSchema,
    mode: IobMode,
) -> Result<Vec<TaggedUtterance>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_utterances(&text, schema, mode)
}

pub fn write_utterances(path: impl AsRef<Path>, utterances: &[TaggedUtterance]) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    for u in utterances {
        serde_json::to_writer(&mut buf, u)?;
        buf.push(b'\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Loads `<dir>/schema.json`, `<dir>/train.jsonl` and, when present,
/// `<dir>/test.jsonl`.
pub fn load_domain_dir(dir: impl AsRef<Path>) -> Result<DomainDataset> {
    let dir = dir.as_ref();
    let schema = DomainSchema::load(dir.join("schema.json"))?;
    let train = parse_dataset(dir.join("train.jsonl"), &schema)?;
    let test_path = dir.join("test.jsonl");
    let test = if test_path.exists() {
        parse_dataset(&test_path, &schema)?
    } else {
        Vec::new()
    };
    Ok(DomainDataset {
        schema,
        train,
        test,
    })
}

pub fn save_domain_dir(dir: impl AsRef<Path>, dataset: &DomainDataset) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let schema_path = dir.join("schema.json");
    std::fs::write(&schema_path, serde_json::to_string_pretty(&dataset.schema)?)
        .map_err(|e| Error::io(&schema_path, e))?;
    write_utterances(dir.join("train.jsonl"), &dataset.train)?;
    write_utterances(dir.join("test.jsonl"), &dataset.test)
}

/// Loads every domain directory under `root`, sorted by directory name.
pub fn load_suite(root: impl AsRef<Path>) -> Result<Vec<DomainDataset>> {
    let root = root.as_ref();
    let mut dirs = Vec::new();
    for entry in std::fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let path = entry.path();
        if path.join("schema.json").is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Schema(format!(
            "{}: no domain directories with a schema.json",
            root.display()
        )));
    }
    dirs.iter().map(load_domain_dir).collect()
}
