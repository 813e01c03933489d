use rand::Rng;

use super::common::{distributions, embed_tokens, slot_encoding};
use super::config::ModelConfig;
use crate::corpus::{validate_iob, Bio, DomainSchema, IobMode, IobTag, TaggedUtterance};
use crate::error::{Error, Result};
use crate::nn::{BiLstmLayer, Dense, ParamStore, Tape, Tensor, Var};
use crate::text::EmbeddingTable;

const LSTM1: &str = "ct.lstm1";
const COMBINER: &str = "ct.combine";
const LSTM2: &str = "ct.lstm2";
const HEAD: &str = "ct.head";

/// Slot-conditioned tagger. A bi-LSTM encodes the utterance, each token state
/// is concatenated with the slot encoding and squashed through an affine+tanh
/// layer, and a second bi-LSTM feeds a B/I/O softmax. No parameter depends on
/// the domain or the slot inventory.
#[derive(Clone, Debug)]
pub struct ConceptTaggerModel {
    pub params: ParamStore,
    lstm1: BiLstmLayer,
    combiner: Dense,
    lstm2: BiLstmLayer,
    head: Dense,
}

impl ConceptTaggerModel {
    pub fn new<R: Rng>(config: &ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let d = config.embedding_dim;
        let mut params = ParamStore::new();
        let lstm1 = BiLstmLayer::init(&mut params, LSTM1, d, config.ct_hidden1, rng)?;
        let combiner = Dense::init(&mut params, COMBINER, lstm1.output_dim() + d, config.ct_combined, rng)?;
        let lstm2 = BiLstmLayer::init(&mut params, LSTM2, config.ct_combined, config.ct_hidden2, rng)?;
        let head = Dense::init(&mut params, HEAD, lstm2.output_dim(), Bio::ALL.len(), rng)?;
        Ok(ConceptTaggerModel {
            params,
            lstm1,
            combiner,
            lstm2,
            head,
        })
    }

    pub fn from_params(params: ParamStore) -> Result<Self> {
        let lstm1 = BiLstmLayer::find(&params, LSTM1)?;
        let combiner = Dense::find(&params, COMBINER)?;
        let lstm2 = BiLstmLayer::find(&params, LSTM2)?;
        let head = Dense::find(&params, HEAD)?;
        let d = lstm1.fwd.input_dim;
        if combiner.input_dim != lstm1.output_dim() + d
            || lstm2.fwd.input_dim != combiner.output_dim
            || head.input_dim != lstm2.output_dim()
            || head.output_dim != Bio::ALL.len()
        {
            return Err(Error::Dimension("concept tagger layer widths disagree".into()));
        }
        Ok(ConceptTaggerModel {
            params,
            lstm1,
            combiner,
            lstm2,
            head,
        })
    }

    pub fn embedding_dim(&self) -> usize {
        self.lstm1.fwd.input_dim
    }

    /// Contextual token representations, shared by every slot query.
    pub fn trunk(&self, tape: &mut Tape, inputs: &[Var]) -> Result<Vec<Var>> {
        self.lstm1.forward(tape, inputs)
    }

    /// B/I/O logits per token for one slot encoding.
    pub fn conditioned_logits(&self, tape: &mut Tape, trunk: &[Var], slot: Var) -> Result<Vec<Var>> {
        let width = tape.value(slot).len();
        if width != self.embedding_dim() {
            return Err(Error::Dimension(format!(
                "slot encoding has width {width}, model expects {}",
                self.embedding_dim()
            )));
        }
        let mut combined = Vec::with_capacity(trunk.len());
        for &h in trunk {
            let joined = tape.concat(&[h, slot])?;
            let z = self.combiner.forward(tape, joined)?;
            combined.push(tape.tanh(z));
        }
        let states = self.lstm2.forward(tape, &combined)?;
        states.into_iter().map(|h| self.head.forward(tape, h)).collect()
    }
}

/// Per-token `[B, I, O]` distributions for one slot encoding.
pub fn ct_forward(
    model: &ConceptTaggerModel,
    tokens: &[impl AsRef<str>],
    table: &EmbeddingTable,
    slot_enc: &Tensor,
) -> Result<Vec<Vec<f64>>> {
    Ok(ct_forward_slots(model, tokens, table, std::slice::from_ref(slot_enc))?.remove(0))
}

/// [`ct_forward`] for several slot encodings, encoding the utterance once.
pub fn ct_forward_slots(
    model: &ConceptTaggerModel,
    tokens: &[impl AsRef<str>],
    table: &EmbeddingTable,
    slot_encs: &[Tensor],
) -> Result<Vec<Vec<Vec<f64>>>> {
    let mut tape = Tape::with_params(&model.params);
    let xs = embed_tokens(&mut tape, tokens, table, model.embedding_dim())?;
    let trunk = model.trunk(&mut tape, &xs)?;
    let mut out = Vec::with_capacity(slot_encs.len());
    for enc in slot_encs {
        let s = tape.constant(enc.clone());
        let logits = model.conditioned_logits(&mut tape, &trunk, s)?;
        out.push(distributions(&tape, &logits));
    }
    Ok(out)
}

/// Merges independent per-slot `[B, I, O]` predictions into one tag
/// sequence. A token goes to the slot with the highest `B + I` probability
/// among slots where that exceeds `O`; the first slot in schema order wins
/// ties. The result is repaired so every `I` continues its slot.
pub fn merge_slot_predictions(schema: &DomainSchema, per_slot: &[Vec<Vec<f64>>]) -> Result<Vec<IobTag>> {
    if per_slot.len() != schema.slots.len() {
        return Err(Error::Dimension(format!(
            "{} slot predictions for {} slots",
            per_slot.len(),
            schema.slots.len()
        )));
    }
    let n = per_slot.first().map_or(0, Vec::len);
    if per_slot.iter().any(|p| p.len() != n) {
        return Err(Error::Dimension("slot predictions differ in length".into()));
    }
    let (b, i, o) = (Bio::B.index(), Bio::I.index(), Bio::O.index());
    let mut tags = Vec::with_capacity(n);
    for t in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for (s, dists) in per_slot.iter().enumerate() {
            let p = &dists[t];
            let inside = p[b] + p[i];
            if inside > p[o] && best.map_or(true, |(_, v)| inside > v) {
                best = Some((s, inside));
            }
        }
        tags.push(match best {
            None => IobTag::O,
            Some((s, _)) => {
                let name = schema.slots[s].name.clone();
                let p = &per_slot[s][t];
                if p[b] >= p[i] {
                    IobTag::B(name)
                } else {
                    IobTag::I(name)
                }
            }
        });
    }
    Ok(validate_iob(&tags, IobMode::Lenient)?.0)
}

/// Tags an utterance with every slot of `schema`, using only the slot
/// descriptions.
pub fn ct_tag_frame(
    model: &ConceptTaggerModel,
    tokens: &[impl AsRef<str>],
    schema: &DomainSchema,
    table: &EmbeddingTable,
) -> Result<TaggedUtterance> {
    if schema.slots.is_empty() {
        return Err(Error::Schema(format!("schema {} has no slots", schema.domain)));
    }
    let encs = schema
        .slots
        .iter()
        .map(|s| slot_encoding(s, table))
        .collect::<Result<Vec<_>>>()?;
    let per_slot = ct_forward_slots(model, tokens, table, &encs)?;
    let tags = merge_slot_predictions(schema, &per_slot)?;
    TaggedUtterance::new(tokens.iter().map(|t| t.as_ref().to_string()).collect(), tags)
}
