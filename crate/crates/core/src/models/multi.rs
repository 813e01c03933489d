use std::collections::BTreeMap;

use rand::Rng;

use super::common::{distributions, embed_tokens, LabelSet};
use super::config::ModelConfig;
use crate::corpus::DomainSchema;
use crate::error::{Error, Result};
use crate::nn::{BiLstmLayer, Dense, ParamStore, Tape, Var};
use crate::text::EmbeddingTable;

const LAYER1: &str = "mt.lstm1";
const LAYER2: &str = "mt.lstm2";

fn head_prefix(domain: &str) -> String {
    format!("mt.head.{domain}")
}

/// Two stacked bidirectional LSTMs shared by every domain, with one softmax
/// head per domain.
#[derive(Clone, Debug)]
pub struct MultiTaskModel {
    pub params: ParamStore,
    schemas: Vec<DomainSchema>,
    layer1: BiLstmLayer,
    layer2: BiLstmLayer,
    heads: BTreeMap<String, (Dense, LabelSet)>,
}

impl MultiTaskModel {
    pub fn new<R: Rng>(schemas: &[DomainSchema], config: &ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        if schemas.is_empty() {
            return Err(Error::Config("multi-task model needs at least one domain".into()));
        }
        let mut params = ParamStore::new();
        let layer1 = BiLstmLayer::init(&mut params, LAYER1, config.embedding_dim, config.mt_hidden, rng)?;
        let layer2 = BiLstmLayer::init(&mut params, LAYER2, layer1.output_dim(), config.mt_hidden, rng)?;
        let mut heads = BTreeMap::new();
        for schema in schemas {
            schema.validate()?;
            let labels = LabelSet::new(schema);
            let head = Dense::init(&mut params, &head_prefix(&schema.domain), layer2.output_dim(), labels.len(), rng)?;
            heads.insert(schema.domain.clone(), (head, labels));
        }
        Ok(MultiTaskModel {
            params,
            schemas: schemas.to_vec(),
            layer1,
            layer2,
            heads,
        })
    }

    pub fn from_params(schemas: &[DomainSchema], params: ParamStore) -> Result<Self> {
        let layer1 = BiLstmLayer::find(&params, LAYER1)?;
        let layer2 = BiLstmLayer::find(&params, LAYER2)?;
        let mut heads = BTreeMap::new();
        for schema in schemas {
            let labels = LabelSet::new(schema);
            let head = Dense::find(&params, &head_prefix(&schema.domain))?;
            if head.output_dim != labels.len() || head.input_dim != layer2.output_dim() {
                return Err(Error::Dimension(format!(
                    "head for {} is {}x{}, expected {}x{}",
                    schema.domain,
                    head.input_dim,
                    head.output_dim,
                    layer2.output_dim(),
                    labels.len()
                )));
            }
            heads.insert(schema.domain.clone(), (head, labels));
        }
        Ok(MultiTaskModel {
            params,
            schemas: schemas.to_vec(),
            layer1,
            layer2,
            heads,
        })
    }

    pub fn schemas(&self) -> &[DomainSchema] {
        &self.schemas
    }

    pub fn domains(&self) -> impl Iterator<Item = &str> {
        self.heads.keys().map(String::as_str)
    }

    pub fn labels(&self, domain: &str) -> Result<&LabelSet> {
        self.heads
            .get(domain)
            .map(|(_, l)| l)
            .ok_or_else(|| Error::MissingHead(domain.to_string()))
    }

    pub fn embedding_dim(&self) -> usize {
        self.layer1.fwd.input_dim
    }

    /// Shared two-layer encoding of the utterance.
    pub fn trunk(&self, tape: &mut Tape, inputs: &[Var]) -> Result<Vec<Var>> {
        let h1 = self.layer1.forward(tape, inputs)?;
        self.layer2.forward(tape, &h1)
    }

    pub fn head_logits(&self, tape: &mut Tape, domain: &str, trunk: &[Var]) -> Result<Vec<Var>> {
        let (head, _) = self
            .heads
            .get(domain)
            .ok_or_else(|| Error::MissingHead(domain.to_string()))?;
        trunk.iter().map(|&h| head.forward(tape, h)).collect()
    }
}

/// Per-token distributions over `domain`'s labels.
pub fn mt_forward(
    model: &MultiTaskModel,
    domain: &str,
    tokens: &[impl AsRef<str>],
    table: &EmbeddingTable,
) -> Result<Vec<Vec<f64>>> {
    model.labels(domain)?;
    let mut tape = Tape::with_params(&model.params);
    let xs = embed_tokens(&mut tape, tokens, table, model.embedding_dim())?;
    let trunk = model.trunk(&mut tape, &xs)?;
    let logits = model.head_logits(&mut tape, domain, &trunk)?;
    Ok(distributions(&tape, &logits))
}

/// Output of the shared layers, independent of any head.
pub fn mt_trunk_activations(
    model: &MultiTaskModel,
    tokens: &[impl AsRef<str>],
    table: &EmbeddingTable,
) -> Result<Vec<Vec<f64>>> {
    let mut tape = Tape::with_params(&model.params);
    let xs = embed_tokens(&mut tape, tokens, table, model.embedding_dim())?;
    let trunk = model.trunk(&mut tape, &xs)?;
    Ok(trunk.iter().map(|&h| tape.value(h).data().to_vec()).collect())
}
