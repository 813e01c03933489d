use rand::Rng;

use super::common::{distributions, embed_tokens, LabelSet};
use super::config::ModelConfig;
use crate::corpus::DomainSchema;
use crate::error::{Error, Result};
use crate::nn::{BiLstmLayer, Dense, ParamStore, Tape, Var};
use crate::text::EmbeddingTable;

const ENCODER: &str = "st.lstm";
const HEAD: &str = "st.head";

/// One bidirectional LSTM and a softmax over the domain's IOB labels.
#[derive(Clone, Debug)]
pub struct SingleTaskModel {
    pub params: ParamStore,
    schema: DomainSchema,
    labels: LabelSet,
    encoder: BiLstmLayer,
    head: Dense,
}

impl SingleTaskModel {
    pub fn new<R: Rng>(schema: &DomainSchema, config: &ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        schema.validate()?;
        let labels = LabelSet::new(schema);
        let mut params = ParamStore::new();
        let encoder = BiLstmLayer::init(&mut params, ENCODER, config.embedding_dim, config.st_hidden, rng)?;
        let head = Dense::init(&mut params, HEAD, encoder.output_dim(), labels.len(), rng)?;
        Ok(SingleTaskModel {
            params,
            schema: schema.clone(),
            labels,
            encoder,
            head,
        })
    }

    /// Rebinds a model to parameters restored from disk.
    pub fn from_params(schema: &DomainSchema, params: ParamStore) -> Result<Self> {
        let labels = LabelSet::new(schema);
        let encoder = BiLstmLayer::find(&params, ENCODER)?;
        let head = Dense::find(&params, HEAD)?;
        if head.output_dim != labels.len() || head.input_dim != encoder.output_dim() {
            return Err(Error::Dimension(format!(
                "single-task head is {}x{}, expected {}x{}",
                head.input_dim,
                head.output_dim,
                encoder.output_dim(),
                labels.len()
            )));
        }
        Ok(SingleTaskModel {
            params,
            schema: schema.clone(),
            labels,
            encoder,
            head,
        })
    }

    pub fn schema(&self) -> &DomainSchema {
        &self.schema
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn embedding_dim(&self) -> usize {
        self.encoder.fwd.input_dim
    }

    pub fn logits(&self, tape: &mut Tape, inputs: &[Var]) -> Result<Vec<Var>> {
        let states = self.encoder.forward(tape, inputs)?;
        states.into_iter().map(|h| self.head.forward(tape, h)).collect()
    }
}

/// Per-token distributions over the `2S + 1` labels.
pub fn st_forward(
    model: &SingleTaskModel,
    tokens: &[impl AsRef<str>],
    table: &EmbeddingTable,
) -> Result<Vec<Vec<f64>>> {
    let mut tape = Tape::with_params(&model.params);
    let xs = embed_tokens(&mut tape, tokens, table, model.embedding_dim())?;
    let logits = model.logits(&mut tape, &xs)?;
    Ok(distributions(&tape, &logits))
}
