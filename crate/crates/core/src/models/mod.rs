//! The three taggers: single-task bi-LSTM, multi-task stacked bi-LSTM with
//! per-domain heads, and the slot-description-conditioned concept tagger.

mod common;
mod concept;
mod config;
mod diagnostics;
mod multi;
mod single;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use common::{argmax, embed_tokens, slot_encoding, LabelSet};
pub use concept::{ct_forward, ct_forward_slots, ct_tag_frame, merge_slot_predictions, ConceptTaggerModel};
pub use config::{ModelConfig, ModelKind};
pub use diagnostics::{gradient_suite, GradCheckRow};
pub use multi::{mt_forward, mt_trunk_activations, MultiTaskModel};
pub use single::{st_forward, SingleTaskModel};

use crate::corpus::{validate_iob, DomainSchema, IobMode, TaggedUtterance};
use crate::error::{Error, Result};
use crate::nn::ParamStore;
use crate::text::EmbeddingTable;

#[derive(Clone, Debug)]
pub enum Model {
    St(SingleTaskModel),
    Mt(MultiTaskModel),
    Ct(ConceptTaggerModel),
}

impl Model {
    /// Freshly initialised model. Single-task takes exactly one schema; the
    /// concept tagger ignores schemas.
    pub fn new(kind: ModelKind, config: &ModelConfig, schemas: &[DomainSchema], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(match kind {
            ModelKind::St => Model::St(SingleTaskModel::new(single_schema(schemas)?, config, &mut rng)?),
            ModelKind::Mt => Model::Mt(MultiTaskModel::new(schemas, config, &mut rng)?),
            ModelKind::Ct => Model::Ct(ConceptTaggerModel::new(config, &mut rng)?),
        })
    }

    pub fn from_params(kind: ModelKind, schemas: &[DomainSchema], params: ParamStore) -> Result<Self> {
        Ok(match kind {
            ModelKind::St => Model::St(SingleTaskModel::from_params(single_schema(schemas)?, params)?),
            ModelKind::Mt => Model::Mt(MultiTaskModel::from_params(schemas, params)?),
            ModelKind::Ct => Model::Ct(ConceptTaggerModel::from_params(params)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::St(_) => ModelKind::St,
            Model::Mt(_) => ModelKind::Mt,
            Model::Ct(_) => ModelKind::Ct,
        }
    }

    pub fn params(&self) -> &ParamStore {
        match self {
            Model::St(m) => &m.params,
            Model::Mt(m) => &m.params,
            Model::Ct(m) => &m.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        match self {
            Model::St(m) => &mut m.params,
            Model::Mt(m) => &mut m.params,
            Model::Ct(m) => &mut m.params,
        }
    }

    pub fn embedding_dim(&self) -> usize {
        match self {
            Model::St(m) => m.embedding_dim(),
            Model::Mt(m) => m.embedding_dim(),
            Model::Ct(m) => m.embedding_dim(),
        }
    }

    /// Schemas with dedicated output layers; empty for the concept tagger.
    pub fn schemas(&self) -> &[DomainSchema] {
        match self {
            Model::St(m) => std::slice::from_ref(m.schema()),
            Model::Mt(m) => m.schemas(),
            Model::Ct(_) => &[],
        }
    }

    /// Predicted frame for `tokens` under `schema`: per-token argmax for the
    /// baselines, merged per-slot predictions for the concept tagger.
    pub fn tag(&self, tokens: &[impl AsRef<str>], schema: &DomainSchema, table: &EmbeddingTable) -> Result<TaggedUtterance> {
        let (dists, labels) = match self {
            Model::Ct(m) => return ct_tag_frame(m, tokens, schema, table),
            Model::St(m) => {
                if m.schema().domain != schema.domain {
                    return Err(Error::MissingHead(schema.domain.clone()));
                }
                (st_forward(m, tokens, table)?, m.labels())
            }
            Model::Mt(m) => (mt_forward(m, &schema.domain, tokens, table)?, m.labels(&schema.domain)?),
        };
        let tags = dists
            .iter()
            .map(|p| labels.tag(argmax(p)))
            .collect::<Result<Vec<_>>>()?;
        let (tags, _) = validate_iob(&tags, IobMode::Lenient)?;
        TaggedUtterance::new(tokens.iter().map(|t| t.as_ref().to_string()).collect(), tags)
    }
}

fn single_schema(schemas: &[DomainSchema]) -> Result<&DomainSchema> {
    match schemas {
        [one] => Ok(one),
        _ => Err(Error::Config(format!(
            "single-task model takes one schema, got {}",
            schemas.len()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Bio, IobTag, SlotDef};
    use crate::nn::{Tensor, Var};

    const DIM: usize = 4;

    fn small() -> ModelConfig {
        ModelConfig {
            embedding_dim: DIM,
            st_hidden: 3,
            mt_hidden: 3,
            ct_hidden1: 3,
            ct_combined: 4,
            ct_hidden2: 2,
        }
    }

    fn schema(domain: &str, n: usize) -> DomainSchema {
        let slots = (0..n)
            .map(|i| SlotDef::new(format!("s{i}"), format!("slot number {i}")))
            .collect();
        DomainSchema::new(domain, slots).unwrap()
    }

    fn table() -> EmbeddingTable {
        let words = ["find", "flights", "to", "boston", "slot", "number", "#"];
        let rows = words
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let v = (0..DIM).map(|j| ((i * DIM + j) as f64 * 0.37).sin()).collect();
                (w.to_string(), v)
            })
            .collect();
        EmbeddingTable::from_rows(DIM, rows, None).unwrap()
    }

    const TOKENS: [&str; 4] = ["find", "flights", "to", "boston"];

    fn zero_all(store: &mut ParamStore) {
        for p in store.iter_mut() {
            p.value.fill(0.0);
        }
    }

    fn assert_distributions(dists: &[Vec<f64>], width: usize) {
        for p in dists {
            assert_eq!(p.len(), width);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn st_shapes_and_zero_params() {
        let s = schema("a", 4);
        let mut model = Model::new(ModelKind::St, &small(), &[s], 1).unwrap();
        let Model::St(m) = &model else { unreachable!() };
        let dists = st_forward(m, &TOKENS, &table()).unwrap();
        assert_eq!(dists.len(), 4);
        assert_distributions(&dists, 9);
        assert_eq!(dists, st_forward(m, &TOKENS, &table()).unwrap());

        zero_all(model.params_mut());
        let Model::St(m) = &model else { unreachable!() };
        for p in st_forward(m, &TOKENS, &table()).unwrap() {
            assert!(p.iter().all(|&x| (x - 1.0 / 9.0).abs() < 1e-15));
        }
        let empty: [&str; 0] = [];
        assert!(matches!(st_forward(m, &empty, &table()), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn st_takes_one_schema() {
        let two = [schema("a", 1), schema("b", 1)];
        assert!(matches!(Model::new(ModelKind::St, &small(), &two, 0), Err(Error::Config(_))));
    }

    #[test]
    fn mt_heads_share_the_trunk() {
        let schemas = [schema("a", 2), schema("b", 3)];
        let model = Model::new(ModelKind::Mt, &small(), &schemas, 2).unwrap();
        let Model::Mt(m) = &model else { unreachable!() };
        let t = table();
        assert_distributions(&mt_forward(m, "a", &TOKENS, &t).unwrap(), 5);
        assert_distributions(&mt_forward(m, "b", &TOKENS, &t).unwrap(), 7);
        assert!(matches!(mt_forward(m, "c", &TOKENS, &t), Err(Error::MissingHead(_))));
        let trunk = mt_trunk_activations(m, &TOKENS, &t).unwrap();
        assert_eq!(trunk, mt_trunk_activations(m, &TOKENS, &t).unwrap());
        assert_eq!(trunk[0].len(), 6);
        assert!(matches!(
            model.tag(&TOKENS, &schema("c", 1), &t),
            Err(Error::MissingHead(_))
        ));
    }

    #[test]
    fn ct_zero_params_uniform() {
        let mut model = Model::new(ModelKind::Ct, &small(), &[], 3).unwrap();
        zero_all(model.params_mut());
        let Model::Ct(m) = &model else { unreachable!() };
        let enc = Tensor::vector(vec![0.3; DIM]);
        for p in ct_forward(m, &TOKENS, &table(), &enc).unwrap() {
            assert!(p.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        }
        let bad = Tensor::vector(vec![0.3; DIM + 1]);
        assert!(matches!(ct_forward(m, &TOKENS, &table(), &bad), Err(Error::Dimension(_))));
    }

    #[test]
    fn ct_parameter_count_ignores_domains() {
        let a = Model::new(ModelKind::Ct, &small(), &[schema("a", 1)], 0).unwrap();
        let b = Model::new(ModelKind::Ct, &small(), &[schema("a", 9), schema("b", 4)], 0).unwrap();
        assert_eq!(a.params().num_scalars(), b.params().num_scalars());
        assert_eq!(a.params().len(), b.params().len());
    }

    #[test]
    fn ct_slot_conditioning_is_live() {
        // Combiner sees only the first slot coordinate; the head reads the
        // second LSTM's state, so the two encodings must diverge.
        let mut model = Model::new(ModelKind::Ct, &small(), &[], 4).unwrap();
        let store = model.params_mut();
        let id = store.id("ct.combine.W").unwrap();
        let w = &mut store.get_mut(id).value;
        w.fill(0.0);
        let (_, cols) = w.dims2().unwrap();
        // rows: 6 trunk coordinates, then the DIM slot coordinates
        w.data_mut()[6 * cols] = 3.0;
        let Model::Ct(m) = &model else { unreachable!() };
        let t = table();
        let a = ct_forward(m, &TOKENS, &t, &Tensor::vector(vec![1.0, 0.0, 0.0, 0.0])).unwrap();
        let b = ct_forward(m, &TOKENS, &t, &Tensor::vector(vec![-1.0, 0.0, 0.0, 0.0])).unwrap();
        assert_ne!(a, b);
        let c = ct_forward(m, &TOKENS, &t, &Tensor::vector(vec![1.0, 0.0, 0.0, 5.0])).unwrap();
        assert_eq!(a, c);
    }

    fn bio(b: f64, i: f64, o: f64) -> Vec<f64> {
        let mut p = vec![0.0; 3];
        p[Bio::B.index()] = b;
        p[Bio::I.index()] = i;
        p[Bio::O.index()] = o;
        p
    }

    #[test]
    fn merge_rules() {
        let s = DomainSchema::new("d", vec![SlotDef::new("A", "a"), SlotDef::new("B", "b")]).unwrap();
        let all_o = vec![vec![bio(0.1, 0.1, 0.8); 3], vec![bio(0.0, 0.2, 0.8); 3]];
        assert_eq!(merge_slot_predictions(&s, &all_o).unwrap(), vec![IobTag::O; 3]);

        let picks = vec![vec![bio(0.9, 0.0, 0.1)], vec![bio(0.6, 0.0, 0.4)]];
        assert_eq!(merge_slot_predictions(&s, &picks).unwrap(), vec![IobTag::B("A".into())]);

        let orphan = vec![vec![bio(0.0, 0.1, 0.9), bio(0.1, 0.8, 0.1)], vec![bio(0.0, 0.0, 1.0); 2]];
        assert_eq!(
            merge_slot_predictions(&s, &orphan).unwrap(),
            vec![IobTag::O, IobTag::B("A".into())]
        );

        let tie = vec![vec![bio(0.7, 0.0, 0.3)], vec![bio(0.7, 0.0, 0.3)]];
        assert_eq!(merge_slot_predictions(&s, &tie).unwrap(), vec![IobTag::B("A".into())]);
        assert!(merge_slot_predictions(&s, &tie[..1]).is_err());
    }

    #[test]
    fn tag_frames_are_strictly_valid() {
        let s = schema("a", 3);
        let t = table();
        for kind in ModelKind::ALL {
            let model = Model::new(kind, &small(), std::slice::from_ref(&s), 11).unwrap();
            let u = model.tag(&TOKENS, &s, &t).unwrap();
            assert_eq!(u.tokens, TOKENS);
            validate_iob(&u.tags, IobMode::Strict).unwrap();
            s.check_tags(&u.tags).unwrap();
        }
    }

    #[test]
    fn rebinding_params_keeps_predictions() {
        let s = [schema("a", 2), schema("b", 2)];
        let t = table();
        for kind in ModelKind::ALL {
            let schemas = if kind == ModelKind::St { &s[..1] } else { &s[..] };
            let model = Model::new(kind, &small(), schemas, 5).unwrap();
            let again = Model::from_params(kind, schemas, model.params().clone()).unwrap();
            assert_eq!(
                model.tag(&TOKENS, &s[0], &t).unwrap(),
                again.tag(&TOKENS, &s[0], &t).unwrap()
            );
        }
        let st = Model::new(ModelKind::St, &small(), &s[..1], 0).unwrap();
        assert!(Model::from_params(ModelKind::St, &[schema("a", 5)], st.params().clone()).is_err());
    }

    #[test]
    fn logits_only_via_tape_vars() {
        // logits are tape nodes, so the loss path is differentiable end to end
        let model = Model::new(ModelKind::Ct, &small(), &[], 0).unwrap();
        let Model::Ct(m) = &model else { unreachable!() };
        let mut tape = crate::nn::Tape::with_params(&m.params);
        let xs = embed_tokens(&mut tape, &TOKENS, &table(), DIM).unwrap();
        let trunk = m.trunk(&mut tape, &xs).unwrap();
        let s = tape.constant(Tensor::vector(vec![0.1; DIM]));
        let logits: Vec<Var> = m.conditioned_logits(&mut tape, &trunk, s).unwrap();
        let losses = logits
            .iter()
            .map(|&l| tape.softmax_xent(l, Bio::O.index()))
            .collect::<Result<Vec<_>>>()
            .unwrap();
        let total = tape.sum(&losses).unwrap();
        let grads = tape.backward(total).unwrap();
        assert!(grads.param_grads().any(|(_, g)| g.iter().any(|&x| x != 0.0)));
    }
}
