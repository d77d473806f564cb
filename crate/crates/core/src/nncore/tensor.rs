use std::fmt;

/// Dense row-major matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct Tensor2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Returns `None` when `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Option<Self> {
        (data.len() == rows * cols).then_some(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return None;
        }
        Some(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Tensor2 {
        let data = (0..self.cols)
            .flat_map(|c| self.data.iter().skip(c).step_by(self.cols).copied())
            .collect();
        Tensor2 {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    /// `out[r] += self.row(r) · x`
    pub fn matvec_acc(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            *o += dot(self.row(r), x);
        }
    }

    /// `out += selfᵀ · v`, accumulating rows in ascending order.
    ///
    /// Outputs are processed in register-held blocks while every row streams
    /// past. Uses AVX when the CPU has it.
    pub fn matvec_t_acc(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        #[cfg(target_arch = "x86_64")]
        if std::arch::is_x86_feature_detected!("avx") {
            // SAFETY: the CPU supports AVX, checked just above.
            unsafe { matvec_t_avx(&self.data, self.cols, v, out) };
            return;
        }
        matvec_t_blocked::<8>(&self.data, self.cols, v, out);
    }

    /// `self += a ⊗ x`
    pub fn outer_acc(&mut self, a: &[f64], x: &[f64]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        for (r, &ar) in a.iter().enumerate() {
            if ar != 0.0 {
                axpy(ar, x, self.row_mut(r));
            }
        }
    }
}

impl Tensor2 {
    /// `out.row(t) += selfᵀ · xs.row(t)` for every row, with the same
    /// per-element summation order as [`Tensor2::matvec_t_acc`]. Rows are
    /// processed four at a time so each weight load is shared.
    pub fn matmul_t_acc(&self, xs: &Tensor2, out: &mut Tensor2) {
        assert_eq!(xs.cols, self.rows, "input width mismatch");
        assert_eq!((out.rows, out.cols), (xs.rows, self.cols), "output shape mismatch");
        if self.cols == 0 {
            return;
        }
        let mut xrows = xs.data.chunks_exact(xs.cols.max(1));
        let mut orows = out.data.chunks_exact_mut(self.cols);
        loop {
            match (xrows.next(), xrows.next(), xrows.next(), xrows.next()) {
                (Some(a), Some(b), Some(c), Some(d)) => {
                    let o = [(); 4].map(|_| orows.next().expect("one output row per input row"));
                    self.matvec_t_acc4([a, b, c, d], o);
                }
                (a, b, c, _) => {
                    for x in [a, b, c].into_iter().flatten() {
                        self.matvec_t_acc(x, orows.next().expect("one output row per input row"));
                    }
                    return;
                }
            }
        }
    }

    fn matvec_t_acc4(&self, v: [&[f64]; 4], out: [&mut [f64]; 4]) {
        #[cfg(target_arch = "x86_64")]
        if std::arch::is_x86_feature_detected!("avx") {
            // SAFETY: the CPU supports AVX, checked just above.
            unsafe { matvec_t4_avx(&self.data, self.cols, v, out) };
            return;
        }
        matvec_t4_blocked::<4>(&self.data, self.cols, v, out);
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx")]
unsafe fn matvec_t4_avx(data: &[f64], cols: usize, v: [&[f64]; 4], out: [&mut [f64]; 4]) {
    matvec_t4_blocked::<8>(data, cols, v, out);
}

#[inline(always)]
fn matvec_t4_blocked<const BLOCK: usize>(data: &[f64], cols: usize, v: [&[f64]; 4], mut out: [&mut [f64]; 4]) {
    let full = cols / BLOCK * BLOCK;
    let rows = data.len() / cols;
    let v = v.map(|x| &x[..rows]);
    for o in (0..full).step_by(BLOCK) {
        let mut acc = [[0.0f64; BLOCK]; 4];
        for (a, y) in acc.iter_mut().zip(&out) {
            a.copy_from_slice(&y[o..o + BLOCK]);
        }
        for (r, row) in data.chunks_exact(cols).enumerate() {
            let row: &[f64; BLOCK] = row[o..o + BLOCK].try_into().expect("block in bounds");
            for (a, x) in acc.iter_mut().zip(&v) {
                let xr = x[r];
                for k in 0..BLOCK {
                    a[k] += xr * row[k];
                }
            }
        }
        for (a, y) in acc.iter().zip(out.iter_mut()) {
            y[o..o + BLOCK].copy_from_slice(a);
        }
    }
    if full < cols {
        for (x, y) in v.iter().zip(out) {
            for (row, &xr) in data.chunks_exact(cols).zip(x.iter()) {
                axpy(xr, &row[full..], &mut y[full..]);
            }
        }
    }
}

// Same arithmetic as the portable path, only wider registers. No FMA, so
// results are bitwise identical on every x86-64 CPU.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx")]
unsafe fn matvec_t_avx(data: &[f64], cols: usize, v: &[f64], out: &mut [f64]) {
    matvec_t_blocked::<16>(data, cols, v, out);
}

#[inline(always)]
fn matvec_t_blocked<const BLOCK: usize>(data: &[f64], cols: usize, v: &[f64], out: &mut [f64]) {
    let full = cols / BLOCK * BLOCK;
    for o in (0..full).step_by(BLOCK) {
        let mut acc = [0.0f64; BLOCK];
        acc.copy_from_slice(&out[o..o + BLOCK]);
        for (row, &vr) in data.chunks_exact(cols).zip(v) {
            let row: &[f64; BLOCK] = row[o..o + BLOCK].try_into().expect("block in bounds");
            for k in 0..BLOCK {
                acc[k] += vr * row[k];
            }
        }
        out[o..o + BLOCK].copy_from_slice(&acc);
    }
    if full < cols {
        for (row, &vr) in data.chunks_exact(cols).zip(v) {
            axpy(vr, &row[full..], &mut out[full..]);
        }
    }
}

impl fmt::Debug for Tensor2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor2({}x{})", self.rows, self.cols)
    }
}

/// Dot product with four independent accumulators. The summation order is
/// fixed, so results are reproducible bit for bit.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    let mut acc = [0.0f64; 4];
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
