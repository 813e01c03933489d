use crate::corpus::{DomainSchema, IobTag, SlotDef};
use crate::error::{Error, Result};
use crate::nn::{softmax, Tape, Tensor, Var};
use crate::text::{lookup, EmbeddingTable};

/// The `{O} ∪ {B-s, I-s}` label space of one domain. Index 0 is `O`; slot `i`
/// owns `2i + 1` (B) and `2i + 2` (I).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelSet {
    slots: Vec<String>,
}

impl LabelSet {
    pub fn new(schema: &DomainSchema) -> Self {
        LabelSet {
            slots: schema.slot_names().map(str::to_string).collect(),
        }
    }

    pub fn len(&self) -> usize {
        2 * self.slots.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, tag: &IobTag) -> Result<usize> {
        let slot_pos = |s: &str| {
            self.slots
                .iter()
                .position(|x| x == s)
                .ok_or_else(|| Error::Schema(format!("tag {tag} names an unknown slot")))
        };
        Ok(match tag {
            IobTag::O => 0,
            IobTag::B(s) => 2 * slot_pos(s)? + 1,
            IobTag::I(s) => 2 * slot_pos(s)? + 2,
        })
    }

    pub fn tag(&self, index: usize) -> Result<IobTag> {
        if index >= self.len() {
            return Err(Error::Index {
                index,
                size: self.len(),
            });
        }
        Ok(match index {
            0 => IobTag::O,
            i if i % 2 == 1 => IobTag::B(self.slots[(i - 1) / 2].clone()),
            i => IobTag::I(self.slots[(i - 2) / 2].clone()),
        })
    }

    pub fn encode(&self, tags: &[IobTag]) -> Result<Vec<usize>> {
        tags.iter().map(|t| self.index(t)).collect()
    }
}

/// Mean of the description-token embeddings.
pub fn slot_encoding(slot: &SlotDef, table: &EmbeddingTable) -> Result<Tensor> {
    let mut tokens = slot.description_tokens();
    // canonical summation order makes the result bitwise order-free
    tokens.sort();
    if tokens.is_empty() {
        return Err(Error::Schema(format!(
            "slot '{}' has an empty description",
            slot.name
        )));
    }
    let mut acc = vec![0.0; table.dim()];
    for tok in &tokens {
        for (a, v) in acc.iter_mut().zip(table.vector(tok)) {
            *a += v;
        }
    }
    let n = tokens.len() as f64;
    Ok(Tensor::vector(acc.into_iter().map(|a| a / n).collect()))
}

/// Embeds `tokens` as constants on `tape`, checking the table width.
pub fn embed_tokens(
    tape: &mut Tape,
    tokens: &[impl AsRef<str>],
    table: &EmbeddingTable,
    expected_dim: usize,
) -> Result<Vec<Var>> {
    if table.dim() != expected_dim {
        return Err(Error::Dimension(format!(
            "embedding table has width {}, model expects {expected_dim}",
            table.dim()
        )));
    }
    Ok(lookup(tokens, table)?
        .into_iter()
        .map(|t| tape.constant(t))
        .collect())
}

pub(crate) fn distributions(tape: &Tape, logits: &[Var]) -> Vec<Vec<f64>> {
    logits.iter().map(|&l| softmax(tape.value(l).data())).collect()
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}
