//! A deliberately naive reference implementation of the classifier's
//! forward pass. It shares no code with the engine: weights are copied out
//! into nested vectors and every operation is an explicit scalar loop.

use ethnoname_core::Model;

pub struct Cell {
    /// Per gate (i, f, g, o): `hidden × input` input weights.
    pub w: [Vec<Vec<f64>>; 4],
    /// Per gate: `hidden × hidden` recurrent weights.
    pub u: [Vec<Vec<f64>>; 4],
    pub b: [Vec<f64>; 4],
}

pub struct Layer {
    pub fwd: Cell,
    pub bwd: Cell,
    pub return_sequences: bool,
}

pub struct Net {
    pub table: Vec<Vec<f64>>,
    pub layers: Vec<Layer>,
    pub head_w: Vec<Vec<f64>>,
    pub head_b: Vec<f64>,
}

fn rows(data: &[f64], cols: usize) -> Vec<Vec<f64>> {
    data.chunks(cols).map(|r| r.to_vec()).collect()
}

fn cell(w: &[f64], u: &[f64], b: &[f64], input: usize, hidden: usize) -> Cell {
    let w = rows(w, input);
    let u = rows(u, hidden);
    let block = |m: &Vec<Vec<f64>>, g: usize| m[g * hidden..(g + 1) * hidden].to_vec();
    Cell {
        w: [block(&w, 0), block(&w, 1), block(&w, 2), block(&w, 3)],
        u: [block(&u, 0), block(&u, 1), block(&u, 2), block(&u, 3)],
        b: [0, 1, 2, 3].map(|g| b[g * hidden..(g + 1) * hidden].to_vec()),
    }
}

impl Net {
    pub fn from_model(model: &Model) -> Self {
        let table = &model.embedding().table;
        let layers = model
            .lstms()
            .iter()
            .map(|l| {
                let (d, h) = (l.forward.w.cols(), l.forward.u.cols());
                Layer {
                    fwd: cell(l.forward.w.data(), l.forward.u.data(), &l.forward.b, d, h),
                    bwd: cell(l.backward.w.data(), l.backward.u.data(), &l.backward.b, d, h),
                    return_sequences: l.return_sequences,
                }
            })
            .collect();
        let head = model.head();
        Net {
            table: rows(table.data(), table.cols()),
            layers,
            head_w: rows(head.w.data(), head.w.cols()),
            head_b: head.b.clone(),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn affine(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| {
            let mut s = 0.0;
            for j in 0..x.len() {
                s += row[j] * x[j];
            }
            s
        })
        .collect()
}

fn run(cell: &Cell, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = cell.b[0].len();
    let mut h = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut out = Vec::new();
    for x in xs {
        let pre: Vec<Vec<f64>> = (0..4)
            .map(|g| {
                let a = affine(&cell.w[g], x);
                let r = affine(&cell.u[g], &h);
                (0..n).map(|k| a[k] + r[k] + cell.b[g][k]).collect()
            })
            .collect();
        for k in 0..n {
            let i = sigmoid(pre[0][k]);
            let f = sigmoid(pre[1][k]);
            let g = pre[2][k].tanh();
            let o = sigmoid(pre[3][k]);
            c[k] = f * c[k] + i * g;
            h[k] = o * c[k].tanh();
        }
        out.push(h.clone());
    }
    out
}

/// Class probabilities for an index sequence.
pub fn probs(net: &Net, indices: &[u8]) -> Vec<f64> {
    let mut seq: Vec<Vec<f64>> = indices.iter().map(|&i| net.table[i as usize].clone()).collect();
    for layer in &net.layers {
        let fwd = run(&layer.fwd, &seq);
        let reversed: Vec<Vec<f64>> = seq.iter().rev().cloned().collect();
        let mut bwd = run(&layer.bwd, &reversed);
        bwd.reverse();
        let t = seq.len();
        seq = if layer.return_sequences {
            (0..t).map(|s| [fwd[s].clone(), bwd[s].clone()].concat()).collect()
        } else {
            vec![[fwd[t - 1].clone(), bwd[0].clone()].concat()]
        };
    }
    let z: Vec<f64> = affine(&net.head_w, &seq[0])
        .iter()
        .zip(&net.head_b)
        .map(|(a, b)| a + b)
        .collect();
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Largest elementwise relative error between two probability vectors.
pub fn max_rel_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}
