//! Layer primitives built on the tape: affine maps, LSTM cells and
//! bidirectional sequence encoders.

use rand::Rng;

use super::param::{glorot_uniform, ParamId, ParamStore};
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Bound LSTM weights. Gate rows are ordered input, forget, candidate, output.
#[derive(Clone, Copy, Debug)]
pub struct LstmCellParams {
    /// `4k x d`
    pub w_ih: Var,
    /// `4k x k`
    pub w_hh: Var,
    /// `4k`
    pub bias: Var,
}

impl LstmCellParams {
    /// `(input_dim, hidden_dim)`, checking that all three shapes agree.
    pub fn dims(&self, tape: &Tape) -> Result<(usize, usize)> {
        let (r_ih, d) = tape
            .value(self.w_ih)
            .dims2()
            .ok_or_else(|| Error::Dimension("W_ih must be a matrix".into()))?;
        let (r_hh, k) = tape
            .value(self.w_hh)
            .dims2()
            .ok_or_else(|| Error::Dimension("W_hh must be a matrix".into()))?;
        let b = tape.value(self.bias).shape();
        if r_ih != 4 * k || r_hh != 4 * k || b != [4 * k] {
            return Err(Error::Dimension(format!(
                "LSTM params W_ih {:?}, W_hh {:?}, b {:?} disagree",
                tape.value(self.w_ih).shape(),
                tape.value(self.w_hh).shape(),
                b
            )));
        }
        Ok((d, k))
    }
}

pub fn affine(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var> {
    tape.affine(x, w, b)
}

/// One LSTM step, returning `(h_t, c_t)`.
pub fn lstm_cell(
    tape: &mut Tape,
    x: Var,
    h_prev: Var,
    c_prev: Var,
    p: &LstmCellParams,
) -> Result<(Var, Var)> {
    let (d, k) = p.dims(tape)?;
    let xd = tape.value(x).len();
    if xd != d || tape.value(h_prev).len() != k || tape.value(c_prev).len() != k {
        return Err(Error::Dimension(format!(
            "lstm_cell: x {:?}, h {:?}, c {:?} for d={d}, k={k}",
            tape.value(x).shape(),
            tape.value(h_prev).shape(),
            tape.value(c_prev).shape()
        )));
    }
    let from_x = tape.linear(p.w_ih, x, Some(p.bias))?;
    let from_h = tape.linear(p.w_hh, h_prev, None)?;
    let gates = tape.add(from_x, from_h)?;
    let i = tape.slice(gates, 0, k)?;
    let f = tape.slice(gates, k, k)?;
    let g = tape.slice(gates, 2 * k, k)?;
    let o = tape.slice(gates, 3 * k, k)?;
    let i = tape.sigmoid(i);
    let f = tape.sigmoid(f);
    let g = tape.tanh(g);
    let o = tape.sigmoid(o);
    let keep = tape.mul(f, c_prev)?;
    let write = tape.mul(i, g)?;
    let c = tape.add(keep, write)?;
    let squashed = tape.tanh(c);
    let h = tape.mul(o, squashed)?;
    Ok((h, c))
}

/// Runs a unidirectional LSTM from zero state, returning every hidden state.
pub fn lstm_sequence(tape: &mut Tape, seq: &[Var], p: &LstmCellParams) -> Result<Vec<Var>> {
    if seq.is_empty() {
        return Err(Error::EmptyInput("LSTM over an empty sequence".into()));
    }
    let (_, k) = p.dims(tape)?;
    let mut h = tape.constant(Tensor::zeros(&[k]));
    let mut c = tape.constant(Tensor::zeros(&[k]));
    let mut out = Vec::with_capacity(seq.len());
    for &x in seq {
        let (h_t, c_t) = lstm_cell(tape, x, h, c, p)?;
        out.push(h_t);
        h = h_t;
        c = c_t;
    }
    Ok(out)
}

/// Bidirectional LSTM: output `t` is `[h_fwd_t ; h_bwd_t]`.
pub fn bilstm(
    tape: &mut Tape,
    seq: &[Var],
    fwd: &LstmCellParams,
    bwd: &LstmCellParams,
) -> Result<Vec<Var>> {
    let forward = lstm_sequence(tape, seq, fwd)?;
    let reversed: Vec<Var> = seq.iter().rev().copied().collect();
    let mut backward = lstm_sequence(tape, &reversed, bwd)?;
    backward.reverse();
    forward
        .into_iter()
        .zip(backward)
        .map(|(f, b)| tape.concat(&[f, b]))
        .collect()
}

pub fn softmax_xent(tape: &mut Tape, logits: Var, gold: usize) -> Result<Var> {
    tape.softmax_xent(logits, gold)
}

/// LSTM weights registered in a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct LstmLayer {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub bias: ParamId,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl LstmLayer {
    /// Glorot-uniform weights, zero biases, forget-gate bias 1.0.
    pub fn init<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let k4 = 4 * hidden_dim;
        let w_ih = store.add(
            format!("{prefix}.W_ih"),
            glorot_uniform(rng, &[k4, input_dim], input_dim, k4),
        )?;
        let w_hh = store.add(
            format!("{prefix}.W_hh"),
            glorot_uniform(rng, &[k4, hidden_dim], hidden_dim, k4),
        )?;
        let mut b = vec![0.0; k4];
        b[hidden_dim..2 * hidden_dim].fill(1.0);
        let bias = store.add(format!("{prefix}.b"), Tensor::vector(b))?;
        Ok(LstmLayer {
            w_ih,
            w_hh,
            bias,
            input_dim,
            hidden_dim,
        })
    }

    /// Looks up an existing layer by name prefix.
    pub fn find(store: &ParamStore, prefix: &str) -> Result<Self> {
        let get = |suffix: &str| {
            store
                .id(&format!("{prefix}.{suffix}"))
                .ok_or_else(|| Error::Config(format!("missing parameter {prefix}.{suffix}")))
        };
        let w_ih = get("W_ih")?;
        let w_hh = get("W_hh")?;
        let bias = get("b")?;
        let (k4, input_dim) = store
            .get(w_ih)
            .value
            .dims2()
            .ok_or_else(|| Error::Dimension(format!("{prefix}.W_ih must be a matrix")))?;
        Ok(LstmLayer {
            w_ih,
            w_hh,
            bias,
            input_dim,
            hidden_dim: k4 / 4,
        })
    }

    pub fn bind(&self, tape: &mut Tape) -> Result<LstmCellParams> {
        Ok(LstmCellParams {
            w_ih: tape.param(self.w_ih)?,
            w_hh: tape.param(self.w_hh)?,
            bias: tape.param(self.bias)?,
        })
    }
}

#[derive(Clone, Debug)]
pub struct BiLstmLayer {
    pub fwd: LstmLayer,
    pub bwd: LstmLayer,
}

impl BiLstmLayer {
    pub fn init<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden_per_direction: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(BiLstmLayer {
            fwd: LstmLayer::init(store, &format!("{prefix}.fwd"), input_dim, hidden_per_direction, rng)?,
            bwd: LstmLayer::init(store, &format!("{prefix}.bwd"), input_dim, hidden_per_direction, rng)?,
        })
    }

    pub fn find(store: &ParamStore, prefix: &str) -> Result<Self> {
        Ok(BiLstmLayer {
            fwd: LstmLayer::find(store, &format!("{prefix}.fwd"))?,
            bwd: LstmLayer::find(store, &format!("{prefix}.bwd"))?,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.fwd.hidden_dim + self.bwd.hidden_dim
    }

    pub fn forward(&self, tape: &mut Tape, seq: &[Var]) -> Result<Vec<Var>> {
        let fwd = self.fwd.bind(tape)?;
        let bwd = self.bwd.bind(tape)?;
        bilstm(tape, seq, &fwd, &bwd)
    }
}

/// Affine layer `y = x W + b` registered in a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl Dense {
    pub fn init<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        output_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let w = store.add(
            format!("{prefix}.W"),
            glorot_uniform(rng, &[input_dim, output_dim], input_dim, output_dim),
        )?;
        let b = store.add(format!("{prefix}.b"), Tensor::zeros(&[output_dim]))?;
        Ok(Dense {
            w,
            b,
            input_dim,
            output_dim,
        })
    }

    pub fn find(store: &ParamStore, prefix: &str) -> Result<Self> {
        let w = store
            .id(&format!("{prefix}.W"))
            .ok_or_else(|| Error::Config(format!("missing parameter {prefix}.W")))?;
        let b = store
            .id(&format!("{prefix}.b"))
            .ok_or_else(|| Error::Config(format!("missing parameter {prefix}.b")))?;
        let (input_dim, output_dim) = store
            .get(w)
            .value
            .dims2()
            .ok_or_else(|| Error::Dimension(format!("{prefix}.W must be a matrix")))?;
        Ok(Dense {
            w,
            b,
            input_dim,
            output_dim,
        })
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let w = tape.param(self.w)?;
        let b = tape.param(self.b)?;
        tape.affine(x, w, b)
    }
}
