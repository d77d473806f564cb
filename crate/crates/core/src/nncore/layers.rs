//! Layer forward passes.
//!
//! LSTM cells use the forget-gate formulation without peepholes. Gate
//! blocks are stacked in the order input, forget, candidate, output:
//!
//! ```text
//! a = W·x + b + U·h
//! i = σ(a_i)   f = σ(a_f)   g = tanh(a_g)   o = σ(a_o)
//! c' = f ⊙ c + i ⊙ g
//! h' = o ⊙ tanh(c')
//! ```

use serde::{Deserialize, Serialize};

use super::tensor::Tensor2;
use super::ModelError;
use crate::encoding::VOCAB_SIZE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    None,
    Softmax,
}

/// Parameters of one LSTM direction.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// Input to gates, `4H × D`.
    pub w: Tensor2,
    /// Hidden to gates, `4H × H`.
    pub u: Tensor2,
    /// Gate bias, `4H`.
    pub b: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w: Tensor2::zeros(4 * hidden, input),
            u: Tensor2::zeros(4 * hidden, hidden),
            b: vec![0.0; 4 * hidden],
        }
    }

    pub fn hidden(&self) -> usize {
        self.u.cols()
    }

    pub fn input(&self) -> usize {
        self.w.cols()
    }

    pub fn param_count(&self) -> usize {
        self.w.data().len() + self.u.data().len() + self.b.len()
    }

    pub(crate) fn dims_consistent(&self) -> bool {
        let h = self.hidden();
        self.w.rows() == 4 * h && self.u.rows() == 4 * h && self.b.len() == 4 * h
    }

    /// Precomputes the transposed weights used by the recurrence.
    pub(crate) fn kernel(&self) -> LstmKernel<'_> {
        LstmKernel {
            params: self,
            wt: self.w.transpose(),
            ut: self.u.transpose(),
        }
    }
}

/// Forward-pass view of [`LstmParams`] holding `Wᵀ` and `Uᵀ`, so every
/// matrix-vector product is a sequence of contiguous `axpy`s over the gate
/// vector. Summation order is fixed (input index ascending).
pub(crate) struct LstmKernel<'a> {
    params: &'a LstmParams,
    wt: Tensor2,
    ut: Tensor2,
}

impl<'a> LstmKernel<'a> {
    pub(crate) fn params(&self) -> &'a LstmParams {
        self.params
    }

    /// `W·x + b` for every row of `seq`, as a `T × 4H` matrix.
    pub(crate) fn project_inputs(&self, seq: &Tensor2) -> Tensor2 {
        let mut proj = Tensor2::zeros(seq.rows(), self.wt.cols());
        for t in 0..seq.rows() {
            proj.row_mut(t).copy_from_slice(&self.params.b);
        }
        self.wt.matmul_t_acc(seq, &mut proj);
        proj
    }

    /// One recurrence step from a precomputed input projection. Writes the
    /// activated gates into `gates` (length 4H) and the new state into
    /// `h_out`/`c_out`.
    #[inline]
    pub(crate) fn step(
        &self,
        proj: &[f64],
        h: &[f64],
        c: &[f64],
        gates: &mut [f64],
        h_out: &mut [f64],
        c_out: &mut [f64],
    ) {
        let n = self.ut.rows();
        gates.copy_from_slice(proj);
        self.ut.matvec_t_acc(h, gates);
        for k in 0..n {
            let i = sigmoid(gates[k]);
            let f = sigmoid(gates[n + k]);
            let g = gates[2 * n + k].tanh();
            let o = sigmoid(gates[3 * n + k]);
            gates[k] = i;
            gates[n + k] = f;
            gates[2 * n + k] = g;
            gates[3 * n + k] = o;
            let cn = f * c[k] + i * g;
            c_out[k] = cn;
            h_out[k] = o * cn.tanh();
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Looks up one embedding row per index.
///
/// # Panics
///
/// If an index is outside the table; encoded names never contain one.
pub fn embedding_forward(indices: &[u8], table: &Tensor2) -> Tensor2 {
    let mut out = Tensor2::zeros(indices.len(), table.cols());
    for (t, &ix) in indices.iter().enumerate() {
        assert!(
            (ix as usize) < table.rows(),
            "character index {ix} outside embedding table of {} rows",
            table.rows()
        );
        out.row_mut(t).copy_from_slice(table.row(ix as usize));
    }
    out
}

/// A single LSTM step, returning `(h', c')`.
pub fn lstm_cell_step(x: &[f64], h: &[f64], c: &[f64], p: &LstmParams) -> (Vec<f64>, Vec<f64>) {
    let n = p.hidden();
    assert_eq!(x.len(), p.input(), "input width does not match W");
    assert_eq!(h.len(), n, "hidden width does not match U");
    assert_eq!(c.len(), n, "cell width does not match U");
    let kernel = p.kernel();
    let proj = kernel.project_inputs(&Tensor2::from_vec(1, x.len(), x.to_vec()).expect("one row"));
    let mut gates = vec![0.0; 4 * n];
    let (mut h_out, mut c_out) = (vec![0.0; n], vec![0.0; n]);
    kernel.step(proj.row(0), h, c, &mut gates, &mut h_out, &mut c_out);
    (h_out, c_out)
}

/// Runs one direction over `seq` from a zero state and returns the hidden
/// state for every position (in sequence order, not scan order).
fn scan_direction(seq: &Tensor2, kernel: &LstmKernel<'_>, reverse: bool) -> Tensor2 {
    let n = kernel.params.hidden();
    let steps = seq.rows();
    let proj = kernel.project_inputs(seq);
    let mut hs = Tensor2::zeros(steps, n);
    let mut h = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut h_next = vec![0.0; n];
    let mut c_next = vec![0.0; n];
    let mut gates = vec![0.0; 4 * n];
    for s in 0..steps {
        let t = if reverse { steps - 1 - s } else { s };
        kernel.step(proj.row(t), &h, &c, &mut gates, &mut h_next, &mut c_next);
        std::mem::swap(&mut h, &mut h_next);
        std::mem::swap(&mut c, &mut c_next);
        hs.row_mut(t).copy_from_slice(&h);
    }
    hs
}

/// Bidirectional LSTM over a `T × D` sequence.
///
/// With `return_sequences` the result is `T × 2H`, row `t` being
/// `[h_fwd[t], h_bwd[t]]`. Otherwise it is `1 × 2H`: the final state of each
/// direction, `[h_fwd[T-1], h_bwd[0]]`.
pub fn bilstm_forward(
    seq: &Tensor2,
    fwd: &LstmParams,
    bwd: &LstmParams,
    return_sequences: bool,
) -> Result<Tensor2, ModelError> {
    bilstm_with(seq, &fwd.kernel(), &bwd.kernel(), return_sequences)
}

/// [`bilstm_forward`] with prebuilt kernels.
pub(crate) fn bilstm_with(
    seq: &Tensor2,
    fwd_k: &LstmKernel<'_>,
    bwd_k: &LstmKernel<'_>,
    return_sequences: bool,
) -> Result<Tensor2, ModelError> {
    let (fwd, bwd) = (fwd_k.params, bwd_k.params);
    if seq.rows() == 0 {
        return Err(ModelError::EmptySequence);
    }
    if seq.cols() != fwd.input() || seq.cols() != bwd.input() {
        return Err(ModelError::Shape(format!(
            "sequence width {} does not match LSTM input widths {}/{}",
            seq.cols(),
            fwd.input(),
            bwd.input()
        )));
    }
    let hf = scan_direction(seq, fwd_k, false);
    let hb = scan_direction(seq, bwd_k, true);
    let (nf, nb) = (fwd.hidden(), bwd.hidden());
    let steps = seq.rows();
    if return_sequences {
        let mut out = Tensor2::zeros(steps, nf + nb);
        for t in 0..steps {
            let row = out.row_mut(t);
            row[..nf].copy_from_slice(hf.row(t));
            row[nf..].copy_from_slice(hb.row(t));
        }
        Ok(out)
    } else {
        let mut out = Tensor2::zeros(1, nf + nb);
        let row = out.row_mut(0);
        row[..nf].copy_from_slice(hf.row(steps - 1));
        row[nf..].copy_from_slice(hb.row(0));
        Ok(out)
    }
}

/// `activation(W·x + b)`.
pub fn dense_forward(x: &[f64], w: &Tensor2, b: &[f64], activation: Activation) -> Vec<f64> {
    assert_eq!(x.len(), w.cols(), "dense input width mismatch");
    assert_eq!(b.len(), w.rows(), "dense bias length mismatch");
    let mut y = b.to_vec();
    w.matvec_acc(x, &mut y);
    match activation {
        Activation::None => y,
        Activation::Softmax => softmax(&y),
    }
}

/// Numerically stable softmax (max-shifted).
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `ln Σ exp(z)`, max-shifted.
pub fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

pub fn log_softmax(z: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(z);
    z.iter().map(|&v| v - lse).collect()
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// An embedding table must have one row per dictionary symbol.
pub(crate) fn embedding_table_ok(table: &Tensor2) -> bool {
    table.rows() == VOCAB_SIZE && table.cols() > 0
}
