use log::warn;

use super::types::{Bio, IobTag};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IobMode {
    Strict,
    #[default]
    Lenient,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IobWarning {
    pub position: usize,
    pub slot: String,
}

impl std::fmt::Display for IobWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "orphan I-{} at position {} rewritten to B-{}",
            self.slot, self.position, self.slot
        )
    }
}

/// Checks that every `I-s` continues a `B-s`/`I-s`. Strict mode fails on the
/// first orphan; lenient mode rewrites it to `B-s` and records a warning.
pub fn validate_iob(tags: &[IobTag], mode: IobMode) -> Result<(Vec<IobTag>, Vec<IobWarning>)> {
    let mut out = Vec::with_capacity(tags.len());
    let mut warnings = Vec::new();
    for (pos, tag) in tags.iter().enumerate() {
        let fixed = match tag {
            IobTag::I(slot) => {
                let continues = matches!(
                    out.last(),
                    Some(IobTag::B(prev) | IobTag::I(prev)) if prev == slot
                );
                if continues {
                    tag.clone()
                } else if mode == IobMode::Strict {
                    return Err(Error::Iob {
                        position: pos,
                        message: format!("I-{slot} does not follow B-{slot} or I-{slot}"),
                    });
                } else {
                    let w = IobWarning {
                        position: pos,
                        slot: slot.clone(),
                    };
                    warn!("{w}");
                    warnings.push(w);
                    IobTag::B(slot.clone())
                }
            }
            other => other.clone(),
        };
        out.push(fixed);
    }
    Ok((out, warnings))
}

/// Per-token B/I/O view of a single slot, plus whether the slot occurs.
pub fn project_slot(tags: &[IobTag], slot: &str) -> (Vec<Bio>, bool) {
    let labels: Vec<Bio> = tags
        .iter()
        .map(|t| match t {
            IobTag::B(s) if s == slot => Bio::B,
            IobTag::I(s) if s == slot => Bio::I,
            _ => Bio::O,
        })
        .collect();
    let positive = labels.iter().any(|&b| b != Bio::O);
    (labels, positive)
}
