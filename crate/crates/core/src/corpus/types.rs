use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::preprocess;

/// One IOB label: `O`, `B-<slot>` or `I-<slot>`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum IobTag {
    O,
    B(String),
    I(String),
}

impl IobTag {
    pub fn slot(&self) -> Option<&str> {
        match self {
            IobTag::O => None,
            IobTag::B(s) | IobTag::I(s) => Some(s),
        }
    }

    pub fn is_outside(&self) -> bool {
        matches!(self, IobTag::O)
    }
}

impl fmt::Display for IobTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IobTag::O => f.write_str("O"),
            IobTag::B(s) => write!(f, "B-{s}"),
            IobTag::I(s) => write!(f, "I-{s}"),
        }
    }
}

impl FromStr for IobTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s == "O" {
            return Ok(IobTag::O);
        }
        match s.split_once('-') {
            Some(("B", slot)) if !slot.is_empty() => Ok(IobTag::B(slot.to_string())),
            Some(("I", slot)) if !slot.is_empty() => Ok(IobTag::I(slot.to_string())),
            _ => Err(format!("'{s}' is not an IOB tag")),
        }
    }
}

impl TryFrom<String> for IobTag {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<IobTag> for String {
    fn from(t: IobTag) -> String {
        t.to_string()
    }
}

/// Per-slot label used by the concept tagger. Class indices: B=0, I=1, O=2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Bio {
    B,
    I,
    O,
}

impl Bio {
    pub const ALL: [Bio; 3] = [Bio::B, Bio::I, Bio::O];

    pub fn index(self) -> usize {
        match self {
            Bio::B => 0,
            Bio::I => 1,
            Bio::O => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Bio> {
        Bio::ALL.get(i).copied()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedUtterance {
    pub tokens: Vec<String>,
    pub tags: Vec<IobTag>,
}

impl TaggedUtterance {
    pub fn new(tokens: Vec<String>, tags: Vec<IobTag>) -> Result<Self> {
        if tokens.len() != tags.len() {
            return Err(Error::Record {
                index: 0,
                message: format!("{} tokens but {} tags", tokens.len(), tags.len()),
            });
        }
        Ok(TaggedUtterance { tokens, tags })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotDef {
    pub name: String,
    pub description: String,
}

impl SlotDef {
    pub fn new(name: impl Into<String>, description: impl Into<String>) -> Self {
        SlotDef {
            name: name.into(),
            description: description.into(),
        }
    }

    /// Preprocessed description tokens.
    pub fn description_tokens(&self) -> Vec<String> {
        preprocess(&self.description)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSchema {
    pub domain: String,
    pub slots: Vec<SlotDef>,
}

impl DomainSchema {
    pub fn new(domain: impl Into<String>, slots: Vec<SlotDef>) -> Result<Self> {
        let schema = DomainSchema {
            domain: domain.into(),
            slots,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.domain.is_empty() {
            return Err(Error::Schema("domain name is empty".into()));
        }
        let mut seen = HashSet::new();
        for slot in &self.slots {
            if slot.name.is_empty() {
                return Err(Error::Schema(format!("{}: empty slot name", self.domain)));
            }
            if !seen.insert(slot.name.as_str()) {
                return Err(Error::Schema(format!(
                    "{}: duplicate slot '{}'",
                    self.domain, slot.name
                )));
            }
            if slot.description_tokens().is_empty() {
                return Err(Error::Schema(format!(
                    "{}: slot '{}' has an empty description",
                    self.domain, slot.name
                )));
            }
        }
        Ok(())
    }

    pub fn slot(&self, name: &str) -> Option<&SlotDef> {
        self.slots.iter().find(|s| s.name == name)
    }

    pub fn slot_index(&self, name: &str) -> Option<usize> {
        self.slots.iter().position(|s| s.name == name)
    }

    pub fn slot_names(&self) -> impl Iterator<Item = &str> {
        self.slots.iter().map(|s| s.name.as_str())
    }

    /// Checks that every tag names a slot of this schema.
    pub fn check_tags(&self, tags: &[IobTag]) -> Result<()> {
        for (i, tag) in tags.iter().enumerate() {
            if let Some(slot) = tag.slot() {
                if self.slot(slot).is_none() {
                    return Err(Error::Schema(format!(
                        "{}: unknown slot '{slot}' at position {i}",
                        self.domain
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schema: DomainSchema = serde_json::from_str(&text)?;
        schema.validate()?;
        Ok(schema)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainDataset {
    pub schema: DomainSchema,
    pub train: Vec<TaggedUtterance>,
    pub test: Vec<TaggedUtterance>,
}

impl DomainDataset {
    pub fn name(&self) -> &str {
        &self.schema.domain
    }
}
