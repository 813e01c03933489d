use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ConceptTaggerModel, ModelConfig, MultiTaskModel, SingleTaskModel};
use crate::corpus::{DomainSchema, SlotDef};
use crate::error::Result;
use crate::nn::{bilstm, grad_check, grad_check_params, lstm_cell, LstmCellParams, ParamStore, Tape, Tensor, Var};

/// Largest relative error seen for one operation across all seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckRow {
    pub name: String,
    pub max_relative_error: f64,
}

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-1.0..1.0) * scale).collect();
    Tensor::new(shape.to_vec(), data).expect("non-empty shape")
}

/// Reduces a vector to a scalar with fixed pseudo-random weights so every
/// output coordinate contributes a distinct gradient.
fn project(tape: &mut Tape, y: Var, seed: u64) -> Result<Var> {
    let n = tape.value(y).len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let r = tape.constant(uniform(&mut rng, &[n], 1.0));
    let weighted = tape.mul(y, r)?;
    Ok(tape.mean(weighted))
}

fn cell(v: &[Var], at: usize) -> LstmCellParams {
    LstmCellParams {
        w_ih: v[at],
        w_hh: v[at + 1],
        bias: v[at + 2],
    }
}

fn lstm_shapes(d: usize, k: usize) -> [Vec<usize>; 3] {
    [vec![4 * k, d], vec![4 * k, k], vec![4 * k]]
}

fn primitive_checks(seed: u64, step: f64) -> Result<Vec<(&'static str, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |shapes: &[Vec<usize>], scale: f64| -> Vec<Tensor> {
        shapes.iter().map(|s| uniform(&mut rng, s, scale)).collect()
    };
    let v = |n: usize| vec![n];
    let mut out = Vec::new();

    let inputs = draw(&[v(4), vec![4, 3], v(3)], 1.0);
    out.push(("affine", grad_check(|t, x| { let y = t.affine(x[0], x[1], x[2])?; project(t, y, seed) }, &inputs, step)?));

    let inputs = draw(&[vec![3, 4], v(4), v(3)], 1.0);
    out.push(("linear", grad_check(|t, x| { let y = t.linear(x[0], x[1], Some(x[2]))?; project(t, y, seed) }, &inputs, step)?));

    let inputs = draw(&[v(5), v(5)], 1.0);
    out.push(("add", grad_check(|t, x| { let y = t.add(x[0], x[1])?; project(t, y, seed) }, &inputs, step)?));
    out.push(("mul", grad_check(|t, x| { let y = t.mul(x[0], x[1])?; project(t, y, seed) }, &inputs, step)?));

    let inputs = draw(&[v(5)], 3.0);
    out.push(("sigmoid", grad_check(|t, x| { let y = t.sigmoid(x[0]); project(t, y, seed) }, &inputs, step)?));
    out.push(("tanh", grad_check(|t, x| { let y = t.tanh(x[0]); project(t, y, seed) }, &inputs, step)?));
    out.push(("scale", grad_check(|t, x| { let y = t.scale(x[0], -1.7); project(t, y, seed) }, &inputs, step)?));
    out.push(("mean", grad_check(|t, x| Ok(t.mean(x[0])), &inputs, step)?));
    let gold = (seed % 5) as usize;
    out.push(("softmax_xent", grad_check(|t, x| t.softmax_xent(x[0], gold), &inputs, step)?));

    let inputs = draw(&[v(6)], 1.0);
    out.push(("slice", grad_check(|t, x| { let y = t.slice(x[0], 1, 3)?; project(t, y, seed) }, &inputs, step)?));

    let inputs = draw(&[v(2), v(3)], 1.0);
    out.push(("concat", grad_check(|t, x| { let y = t.concat(&[x[0], x[1], x[0]])?; project(t, y, seed) }, &inputs, step)?));

    let inputs = draw(&[v(4), v(4), v(4)], 1.0);
    out.push(("sum", grad_check(|t, x| { let y = t.sum(&[x[0], x[1], x[2], x[1]])?; project(t, y, seed) }, &inputs, step)?));

    let (d, k) = (3, 2);
    let mut shapes = vec![v(d), v(k), v(k)];
    shapes.extend(lstm_shapes(d, k));
    let inputs = draw(&shapes, 1.0);
    out.push((
        "lstm_cell",
        grad_check(
            |t, x| {
                let (h, c) = lstm_cell(t, x[0], x[1], x[2], &cell(x, 3))?;
                let y = t.concat(&[h, c])?;
                project(t, y, seed)
            },
            &inputs,
            step,
        )?,
    ));

    let len = 4;
    let mut shapes: Vec<Vec<usize>> = (0..len).map(|_| v(d)).collect();
    shapes.extend(lstm_shapes(d, k));
    shapes.extend(lstm_shapes(d, k));
    let inputs = draw(&shapes, 1.0);
    out.push((
        "bilstm",
        grad_check(
            |t, x| {
                let states = bilstm(t, &x[..len], &cell(x, len), &cell(x, len + 3))?;
                let y = t.concat(&states)?;
                project(t, y, seed)
            },
            &inputs,
            step,
        )?,
    ));
    Ok(out)
}

fn mean_xent(tape: &mut Tape, logits: &[Var], gold: &[usize]) -> Result<Var> {
    let losses = logits
        .iter()
        .zip(gold)
        .map(|(&l, &g)| tape.softmax_xent(l, g))
        .collect::<Result<Vec<_>>>()?;
    let total = tape.sum(&losses)?;
    Ok(tape.scale(total, 1.0 / losses.len() as f64))
}

fn model_checks(seed: u64, step: f64) -> Result<Vec<(&'static str, f64)>> {
    let config = ModelConfig {
        embedding_dim: 5,
        st_hidden: 3,
        mt_hidden: 3,
        ct_hidden1: 3,
        ct_combined: 4,
        ct_hidden2: 3,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1000));
    let n_tokens = 6;
    let tokens: Vec<Tensor> = (0..n_tokens).map(|_| uniform(&mut rng, &[config.embedding_dim], 1.0)).collect();
    let schema = |name: &str| {
        DomainSchema::new(name, vec![SlotDef::new("x", "first slot"), SlotDef::new("y", "second slot")])
            .expect("valid schema")
    };
    let (a, b) = (schema("a"), schema("b"));
    let gold5: Vec<usize> = (0..n_tokens).map(|_| rng.gen_range(0..5)).collect();
    let gold3: Vec<usize> = (0..n_tokens).map(|_| rng.gen_range(0..3)).collect();
    let embed = |tape: &mut Tape| -> Vec<Var> { tokens.iter().map(|t| tape.constant(t.clone())).collect() };
    let mut out = Vec::new();

    let st = SingleTaskModel::new(&a, &config, &mut rng)?;
    let mut store: ParamStore = st.params.clone();
    let err = grad_check_params(
        &mut store,
        |tape| {
            let xs = embed(tape);
            let logits = st.logits(tape, &xs)?;
            mean_xent(tape, &logits, &gold5)
        },
        step,
    )?;
    out.push(("single_task_model", err));

    let mt = MultiTaskModel::new(&[a.clone(), b.clone()], &config, &mut rng)?;
    let mut store = mt.params.clone();
    let err = grad_check_params(
        &mut store,
        |tape| {
            let xs = embed(tape);
            let trunk = mt.trunk(tape, &xs)?;
            let la = mt.head_logits(tape, "a", &trunk)?;
            let lb = mt.head_logits(tape, "b", &trunk)?;
            let ea = mean_xent(tape, &la, &gold5)?;
            let eb = mean_xent(tape, &lb, &gold5)?;
            tape.add(ea, eb)
        },
        step,
    )?;
    out.push(("multi_task_model", err));

    let ct = ConceptTaggerModel::new(&config, &mut rng)?;
    let encs = [uniform(&mut rng, &[config.embedding_dim], 1.0), uniform(&mut rng, &[config.embedding_dim], 1.0)];
    let mut store = ct.params.clone();
    let err = grad_check_params(
        &mut store,
        |tape| {
            let xs = embed(tape);
            let trunk = ct.trunk(tape, &xs)?;
            let mut parts = Vec::new();
            for enc in &encs {
                let s = tape.constant(enc.clone());
                let logits = ct.conditioned_logits(tape, &trunk, s)?;
                parts.push(mean_xent(tape, &logits, &gold3)?);
            }
            tape.sum(&parts)
        },
        step,
    )?;
    out.push(("concept_tagger_model", err));
    Ok(out)
}

/// Finite-difference check of every tape primitive, the LSTM layers and one
/// forward pass of each model, over `seeds` random instances. Returns the
/// worst relative error per operation.
pub fn gradient_suite(seeds: u64, step: f64) -> Result<Vec<GradCheckRow>> {
    let mut rows: Vec<GradCheckRow> = Vec::new();
    for seed in 0..seeds {
        let mut results = primitive_checks(seed, step)?;
        results.extend(model_checks(seed, step)?);
        for (name, err) in results {
            match rows.iter_mut().find(|r| r.name == name) {
                Some(row) => row.max_relative_error = row.max_relative_error.max(err),
                None => rows.push(GradCheckRow {
                    name: name.to_string(),
                    max_relative_error: err,
                }),
            }
        }
    }
    Ok(rows)
}
