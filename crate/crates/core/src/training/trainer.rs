use log::{debug, info};
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::examples::ct_make_examples;
use super::schedule::{make_schedule, BatchSampler};
use crate::corpus::{DomainSchema, TaggedUtterance};
use crate::error::{Error, Result};
use crate::evaluation::{dev_weighted_score, evaluate, Weighting};
use crate::models::{slot_encoding, LabelSet, Model, ModelKind};
use crate::nn::{ParamStore, RmsProp, Tape, Tensor, Var};
use crate::text::{lookup, EmbeddingTable};

/// Training and dev utterances of one domain.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainSplit {
    pub schema: DomainSchema,
    pub train: Vec<TaggedUtterance>,
    pub dev: Vec<TaggedUtterance>,
}

impl DomainSplit {
    pub fn new(schema: DomainSchema, train: Vec<TaggedUtterance>, dev: Vec<TaggedUtterance>) -> Self {
        DomainSplit { schema, train, dev }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DevPoint {
    pub step: usize,
    pub score: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Mean token cross-entropy of each step's batch.
    pub losses: Vec<f64>,
    pub dev: Vec<DevPoint>,
    /// Step whose parameters were kept; `None` means the final ones.
    pub best_step: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct Trained {
    pub model: Model,
    pub log: TrainLog,
}

struct Utterance {
    inputs: Vec<Tensor>,
    gold: Vec<usize>,
}

struct SlotExample {
    utterance: usize,
    slot: usize,
    gold: Vec<usize>,
}

/// One domain's training data, embedded once up front.
struct Prepared {
    name: String,
    utterances: Vec<Utterance>,
    slot_encs: Vec<Tensor>,
    /// Concept-tagger examples, utterance-major.
    examples: Vec<SlotExample>,
}

impl Prepared {
    fn new(kind: ModelKind, split: &DomainSplit, table: &EmbeddingTable) -> Result<Self> {
        let schema = &split.schema;
        schema.validate()?;
        let labels = LabelSet::new(schema);
        let mut utterances = Vec::with_capacity(split.train.len());
        let mut examples = Vec::new();
        for (i, u) in split.train.iter().enumerate() {
            schema.check_tags(&u.tags)?;
            let inputs = lookup(&u.tokens, table)?;
            let gold = if kind == ModelKind::Ct {
                for (slot, ex) in ct_make_examples(u, schema).into_iter().enumerate() {
                    examples.push(SlotExample {
                        utterance: i,
                        slot,
                        gold: ex.labels.iter().map(|b| b.index()).collect(),
                    });
                }
                Vec::new()
            } else {
                labels.encode(&u.tags)?
            };
            utterances.push(Utterance { inputs, gold });
        }
        let slot_encs = if kind == ModelKind::Ct {
            schema.slots.iter().map(|s| slot_encoding(s, table)).collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        Ok(Prepared {
            name: schema.domain.clone(),
            utterances,
            slot_encs,
            examples,
        })
    }

    fn sampling_size(&self, kind: ModelKind) -> usize {
        if kind == ModelKind::Ct {
            self.examples.len()
        } else {
            self.utterances.len()
        }
    }
}

fn xent_sum(tape: &mut Tape, logits: &[Var], gold: &[usize], losses: &mut Vec<Var>) -> Result<()> {
    for (&l, &g) in logits.iter().zip(gold) {
        losses.push(tape.softmax_xent(l, g)?);
    }
    Ok(())
}

/// Builds one tape for `batch` entries sharing an utterance, backpropagates,
/// and adds the gradients into the model's store. Returns the summed loss
/// and token count.
fn accumulate_group(model: &mut Model, data: &Prepared, group: &[usize]) -> Result<(f64, usize)> {
    let (loss, tokens, grads) = {
        let mut tape = Tape::with_params(model.params());
        let mut losses = Vec::new();
        let mut tokens = 0;
        match &*model {
            Model::St(m) => {
                for &i in group {
                    let u = &data.utterances[i];
                    let xs: Vec<Var> = u.inputs.iter().map(|t| tape.constant(t.clone())).collect();
                    let logits = m.logits(&mut tape, &xs)?;
                    xent_sum(&mut tape, &logits, &u.gold, &mut losses)?;
                    tokens += u.gold.len();
                }
            }
            Model::Mt(m) => {
                for &i in group {
                    let u = &data.utterances[i];
                    let xs: Vec<Var> = u.inputs.iter().map(|t| tape.constant(t.clone())).collect();
                    let trunk = m.trunk(&mut tape, &xs)?;
                    let logits = m.head_logits(&mut tape, &data.name, &trunk)?;
                    xent_sum(&mut tape, &logits, &u.gold, &mut losses)?;
                    tokens += u.gold.len();
                }
            }
            Model::Ct(m) => {
                let u = &data.utterances[data.examples[group[0]].utterance];
                let xs: Vec<Var> = u.inputs.iter().map(|t| tape.constant(t.clone())).collect();
                let trunk = m.trunk(&mut tape, &xs)?;
                for &e in group {
                    let ex = &data.examples[e];
                    let s = tape.constant(data.slot_encs[ex.slot].clone());
                    let logits = m.conditioned_logits(&mut tape, &trunk, s)?;
                    xent_sum(&mut tape, &logits, &ex.gold, &mut losses)?;
                    tokens += ex.gold.len();
                }
            }
        }
        let total = tape.sum(&losses)?;
        let loss = tape.value(total).data()[0];
        (loss, tokens, tape.backward(total)?)
    };
    model.params_mut().accumulate(&grads);
    Ok((loss, tokens))
}

/// Splits a batch into runs that can share one tape: consecutive
/// concept-tagger examples of the same utterance, otherwise singletons.
fn groups(model: &Model, data: &Prepared, batch: &[usize]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for &e in batch {
        let joins = match (model, out.last()) {
            (Model::Ct(_), Some(g)) => {
                data.examples[g[g.len() - 1]].utterance == data.examples[e].utterance && !g.contains(&e)
            }
            _ => false,
        };
        if joins {
            out.last_mut().expect("checked").push(e);
        } else {
            out.push(vec![e]);
        }
    }
    out
}

fn dev_score(model: &Model, splits: &[DomainSplit], table: &EmbeddingTable) -> Result<Option<f64>> {
    let mut entries = Vec::new();
    for split in splits.iter().filter(|s| !s.dev.is_empty()) {
        if let Model::St(m) = model {
            if m.schema().domain != split.schema.domain {
                continue;
            }
        }
        let report = evaluate(model, &split.schema, &split.dev, table, Weighting::Support)?;
        if let Some(score) = report.weighted_f1 {
            entries.push((score, split.train.len()));
        }
    }
    if entries.is_empty() {
        return Ok(None);
    }
    dev_weighted_score(&entries).map(Some)
}

/// Trains a fresh model of `cfg.kind` on `splits` with RMSProp. Each step
/// draws one domain by log-proportional weight and a batch from it; the loss
/// is the mean token cross-entropy of the batch. With dev data and a
/// non-zero `dev_period`, the parameters with the best dev score are kept.
pub fn train(splits: &[DomainSplit], table: &EmbeddingTable, cfg: &TrainConfig) -> Result<Trained> {
    cfg.validate()?;
    let kind = cfg.kind;
    if table.dim() != cfg.model.embedding_dim {
        return Err(Error::Dimension(format!(
            "embedding table has width {}, config expects {}",
            table.dim(),
            cfg.model.embedding_dim
        )));
    }
    let active: Vec<&DomainSplit> = splits.iter().filter(|s| !s.train.is_empty()).collect();
    if active.is_empty() {
        return Err(Error::EmptyTraining);
    }
    let schemas: Vec<DomainSchema> = match kind {
        ModelKind::St => {
            if active.len() != 1 {
                return Err(Error::Config(format!(
                    "single-task training takes one domain, got {}",
                    active.len()
                )));
            }
            vec![active[0].schema.clone()]
        }
        _ => splits.iter().map(|s| s.schema.clone()).collect(),
    };
    let prepared = splits
        .iter()
        .map(|s| Prepared::new(kind, s, table))
        .collect::<Result<Vec<_>>>()?;
    let sizes: Vec<(String, usize)> = splits.iter().map(|s| (s.schema.domain.clone(), s.train.len())).collect();
    let schedule = make_schedule(&sizes)?;
    let sampling: Vec<usize> = prepared.iter().map(|p| p.sampling_size(kind)).collect();
    let mut sampler = BatchSampler::new(&schedule, &sampling, cfg.batch_size, cfg.seed)?;

    let mut model = Model::new(kind, &cfg.model, &schemas, cfg.seed)?;
    let mut optimizer = RmsProp::new(cfg.optimizer, model.params());
    let mut log = TrainLog::default();
    let mut best: Option<(f64, usize, ParamStore)> = None;
    info!(
        "training {kind} for {} steps, batch {}, seed {}, {} parameters",
        cfg.steps,
        cfg.batch_size,
        cfg.seed,
        model.params().num_scalars()
    );

    for step in 1..=cfg.steps {
        let (d, batch) = sampler.next_batch();
        let data = &prepared[d];
        let mut loss = 0.0;
        let mut tokens = 0;
        for group in groups(&model, data, &batch) {
            let (l, t) = accumulate_group(&mut model, data, &group)?;
            loss += l;
            tokens += t;
        }
        let mean = loss / tokens as f64;
        if !mean.is_finite() {
            return Err(Error::Numeric(format!("loss became {mean} at step {step}")));
        }
        model.params_mut().scale_grads(1.0 / tokens as f64);
        optimizer.step(model.params_mut());
        log.losses.push(mean);

        let report_every = (cfg.steps / 10).max(1);
        if step % report_every == 0 {
            info!("step {step}/{}: loss {mean:.4}", cfg.steps);
        }
        if cfg.dev_period > 0 && (step % cfg.dev_period == 0 || step == cfg.steps) {
            if let Some(score) = dev_score(&model, splits, table)? {
                debug!("step {step}: dev {score:.4}");
                log.dev.push(DevPoint { step, score });
                // ties go to the later, longer-trained parameters
                if best.as_ref().map_or(true, |(b, _, _)| score >= *b) {
                    best = Some((score, step, model.params().clone()));
                }
            }
        }
    }
    if let Some((score, step, params)) = best {
        info!("keeping step {step} (dev {score:.4})");
        model.params_mut().copy_values_from(&params)?;
        log.best_step = Some(step);
    }
    Ok(Trained { model, log })
}
