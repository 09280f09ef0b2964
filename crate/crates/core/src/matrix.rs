//! Small dense and block-diagonal matrices with a Taylor scaling-and-squaring
//! exponential and its Fréchet derivative.

use serde::{Deserialize, Serialize};

/// Highest Taylor order used inside the scaling-and-squaring exponential.
pub const EXPM_ORDER: usize = 14;
/// The scaled matrix satisfies `‖M‖₁ / 2^s < EXPM_SCALED_NORM`.
pub const EXPM_SCALED_NORM: f64 = 0.5;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat {
            rows: r,
            cols: c,
            data,
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        let mut out = Mat::zeros(self.rows, other.cols);
        matmul_into(self, other, &mut out);
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// `selfᵀ v`.
    pub fn tmatvec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (o, &a) in out.iter_mut().zip(row) {
                *o += a * vi;
            }
        }
        out
    }

    pub fn add_scaled(&mut self, other: &Mat, s: f64) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|a| *a *= s);
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.at(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `self·other − other·self`.
    pub fn commutator(&self, other: &Mat) -> Mat {
        let mut c = self.matmul(other);
        c.add_scaled(&other.matmul(self), -1.0);
        c
    }
}

pub fn matmul_into(a: &Mat, b: &Mat, out: &mut Mat) {
    debug_assert_eq!(a.cols, b.rows);
    debug_assert_eq!((out.rows, out.cols), (a.rows, b.cols));
    let n = b.cols;
    out.data.iter_mut().for_each(|x| *x = 0.0);
    for i in 0..a.rows {
        let orow = &mut out.data[i * n..(i + 1) * n];
        for p in 0..a.cols {
            let aip = a.data[i * a.cols + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b.data[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
}

/// `out += s · a·b`.
pub fn matmul_acc(a: &Mat, b: &Mat, s: f64, out: &mut Mat) {
    let n = b.cols;
    for i in 0..a.rows {
        let orow = &mut out.data[i * n..(i + 1) * n];
        for p in 0..a.cols {
            let aip = s * a.data[i * a.cols + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b.data[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
}

fn squaring_count(m: &Mat) -> u32 {
    let norm = m.norm1();
    if !norm.is_finite() || norm < EXPM_SCALED_NORM {
        return 0;
    }
    let mut s = 0u32;
    let mut scaled = norm;
    while scaled >= EXPM_SCALED_NORM {
        scaled *= 0.5;
        s += 1;
    }
    s
}

/// Smallest order `q` with `θ^q / q!` below double rounding, capped at `EXPM_ORDER`.
fn taylor_order(theta: f64) -> usize {
    let mut term = 1.0;
    for q in 1..EXPM_ORDER {
        term *= theta / q as f64;
        if term < 1e-17 {
            return q;
        }
    }
    EXPM_ORDER
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
pub fn expm(m: &Mat) -> Mat {
    assert_eq!(m.rows, m.cols, "expm needs a square matrix");
    let n = m.rows;
    let s = squaring_count(m);
    let mut a = m.clone();
    a.scale(0.5f64.powi(s as i32));
    let order = taylor_order(a.norm1());
    // Horner: I + A(I + A/2(I + … ))
    let mut r = Mat::identity(n);
    let mut tmp = Mat::zeros(n, n);
    for k in (1..=order).rev() {
        matmul_into(&a, &r, &mut tmp);
        tmp.scale(1.0 / k as f64);
        for i in 0..n {
            tmp.data[i * n + i] += 1.0;
        }
        std::mem::swap(&mut r, &mut tmp);
    }
    for _ in 0..s {
        matmul_into(&r, &r, &mut tmp);
        std::mem::swap(&mut r, &mut tmp);
    }
    r
}

/// `exp(M)` together with its Fréchet derivative at `M` in direction `E`.
///
/// This is the exponential of the block matrix `[[M, E], [0, M]]`: the
/// diagonal blocks give `exp(M)` and the top-right block gives the
/// derivative. Only the two distinct blocks are carried through the series
/// and the squarings.
pub fn expm_frechet(m: &Mat, e: &Mat) -> (Mat, Mat) {
    assert_eq!(m.rows, m.cols, "expm needs a square matrix");
    let n = m.rows;
    let s = squaring_count(m);
    let f = 0.5f64.powi(s as i32);
    let mut a = m.clone();
    a.scale(f);
    let mut b = e.clone();
    b.scale(f);
    let order = taylor_order(a.norm1());
    // Horner on the pair (R, D) representing [[R, D], [0, R]]:
    // [[A, B], [0, A]]·[[R, D], [0, R]] = [[AR, AD + BR], [0, AR]].
    let mut r = Mat::identity(n);
    let mut d = Mat::zeros(n, n);
    let mut r2 = Mat::zeros(n, n);
    let mut d2 = Mat::zeros(n, n);
    for k in (1..=order).rev() {
        let inv = 1.0 / k as f64;
        matmul_into(&a, &r, &mut r2);
        matmul_into(&a, &d, &mut d2);
        matmul_acc(&b, &r, 1.0, &mut d2);
        r2.scale(inv);
        d2.scale(inv);
        for i in 0..n {
            r2.data[i * n + i] += 1.0;
        }
        std::mem::swap(&mut r, &mut r2);
        std::mem::swap(&mut d, &mut d2);
    }
    // [[R, D], [0, R]]² = [[R², RD + DR], [0, R²]]
    for _ in 0..s {
        matmul_into(&r, &r, &mut r2);
        matmul_into(&r, &d, &mut d2);
        matmul_acc(&d, &r, 1.0, &mut d2);
        std::mem::swap(&mut r, &mut r2);
        std::mem::swap(&mut d, &mut d2);
    }
    (r, d)
}

/// Square block-diagonal matrix stored as its diagonal blocks only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockDiag {
    pub blocks: Vec<Mat>,
}

impl BlockDiag {
    pub fn zeros(n_blocks: usize, block: usize) -> Self {
        BlockDiag {
            blocks: vec![Mat::zeros(block, block); n_blocks],
        }
    }

    pub fn identity(n_blocks: usize, block: usize) -> Self {
        BlockDiag {
            blocks: vec![Mat::identity(block); n_blocks],
        }
    }

    pub fn block_size(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.rows)
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Total side length.
    pub fn size(&self) -> usize {
        self.n_blocks() * self.block_size()
    }

    pub fn matmul(&self, other: &BlockDiag) -> BlockDiag {
        BlockDiag {
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a.matmul(b))
                .collect(),
        }
    }

    pub fn commutator(&self, other: &BlockDiag) -> BlockDiag {
        BlockDiag {
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a.commutator(b))
                .collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &BlockDiag, s: f64) {
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            a.add_scaled(b, s);
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.blocks.iter_mut().for_each(|b| b.scale(s));
    }

    pub fn expm(&self) -> BlockDiag {
        BlockDiag {
            blocks: self.blocks.iter().map(expm).collect(),
        }
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let b = self.block_size();
        let mut out = Vec::with_capacity(v.len());
        for (k, blk) in self.blocks.iter().enumerate() {
            out.extend(blk.matvec(&v[k * b..(k + 1) * b]));
        }
        out
    }

    pub fn tmatvec(&self, v: &[f64]) -> Vec<f64> {
        let b = self.block_size();
        let mut out = Vec::with_capacity(v.len());
        for (k, blk) in self.blocks.iter().enumerate() {
            out.extend(blk.tmatvec(&v[k * b..(k + 1) * b]));
        }
        out
    }

    /// Dense expansion with explicit zeros off the blocks.
    pub fn to_dense(&self) -> Mat {
        let b = self.block_size();
        let n = self.size();
        let mut m = Mat::zeros(n, n);
        for (k, blk) in self.blocks.iter().enumerate() {
            for i in 0..b {
                for j in 0..b {
                    m.data[(k * b + i) * n + k * b + j] = blk.at(i, j);
                }
            }
        }
        m
    }

    pub fn max_abs_diff(&self, other: &BlockDiag) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(Mat::is_finite)
    }
}
