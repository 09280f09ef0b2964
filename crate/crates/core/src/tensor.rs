//! Dense truncated tensor algebra `T^N(R^d)`.
//!
//! Coefficients are stored level by level in one flat buffer. Within level
//! `k` a word `i_1 … i_k` (letters `0..d`) sits at the base-`d` positional
//! index `i_1·d^{k-1} + … + i_k`, most significant letter first. Concatenating
//! words `J K` therefore maps to `idx(J)·d^{|K|} + idx(K)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on truncation depth. Storage grows like `d^N`.
pub const DEFAULT_MAX_DEPTH: usize = 6;

/// Number of coefficients in level `k`.
pub fn level_len(dim: usize, k: usize) -> usize {
    dim.pow(k as u32)
}

/// Offset of level `k` in the flat buffer.
pub fn level_offset(dim: usize, k: usize) -> usize {
    (0..k).map(|j| level_len(dim, j)).sum()
}

/// Total number of coefficients for levels `0..=depth`.
pub fn total_len(dim: usize, depth: usize) -> usize {
    level_offset(dim, depth + 1)
}

/// Flat index of a word inside its level.
pub fn word_index(dim: usize, word: &[usize]) -> usize {
    word.iter().fold(0, |acc, &l| acc * dim + l)
}

/// Element of the truncated tensor algebra.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TensorRepr", into = "TensorRepr")]
pub struct TruncatedTensor {
    dim: usize,
    depth: usize,
    coeffs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TensorRepr {
    dim: usize,
    depth: usize,
    levels: Vec<Vec<f64>>,
}

impl From<TruncatedTensor> for TensorRepr {
    fn from(t: TruncatedTensor) -> Self {
        let levels = (0..=t.depth).map(|k| t.level(k).to_vec()).collect();
        TensorRepr {
            dim: t.dim,
            depth: t.depth,
            levels,
        }
    }
}

impl TryFrom<TensorRepr> for TruncatedTensor {
    type Error = Error;

    fn try_from(r: TensorRepr) -> Result<Self> {
        if r.levels.len() != r.depth + 1 {
            return Err(Error::Shape(format!(
                "expected {} levels, found {}",
                r.depth + 1,
                r.levels.len()
            )));
        }
        TruncatedTensor::from_levels(r.dim, r.levels)
    }
}

fn check_shape(dim: usize, depth: usize, max_depth: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::Shape("channel count must be positive".into()));
    }
    if depth == 0 {
        return Err(Error::Shape("depth must be positive".into()));
    }
    if depth > max_depth {
        return Err(Error::DepthCap {
            depth,
            max: max_depth,
        });
    }
    Ok(())
}

impl TruncatedTensor {
    /// Zero tensor, rejecting depths above [`DEFAULT_MAX_DEPTH`].
    pub fn zeros(dim: usize, depth: usize) -> Result<Self> {
        Self::zeros_with_cap(dim, depth, DEFAULT_MAX_DEPTH)
    }

    /// Zero tensor with an explicit depth cap.
    pub fn zeros_with_cap(dim: usize, depth: usize, max_depth: usize) -> Result<Self> {
        check_shape(dim, depth, max_depth)?;
        Ok(Self::zeros_unchecked(dim, depth))
    }

    pub(crate) fn zeros_unchecked(dim: usize, depth: usize) -> Self {
        TruncatedTensor {
            dim,
            depth,
            coeffs: vec![0.0; total_len(dim, depth)],
        }
    }

    /// The unit `1`.
    pub fn unit(dim: usize, depth: usize) -> Result<Self> {
        let mut t = Self::zeros(dim, depth)?;
        t.coeffs[0] = 1.0;
        Ok(t)
    }

    pub(crate) fn unit_unchecked(dim: usize, depth: usize) -> Self {
        let mut t = Self::zeros_unchecked(dim, depth);
        t.coeffs[0] = 1.0;
        t
    }

    /// Degree-one element carrying `v`.
    pub fn from_vector(v: &[f64], depth: usize) -> Result<Self> {
        let mut t = Self::zeros(v.len(), depth)?;
        t.level_mut(1).copy_from_slice(v);
        t.check_finite("degree-one element")?;
        Ok(t)
    }

    /// Builds a tensor from explicit levels `0..=N`.
    pub fn from_levels(dim: usize, levels: Vec<Vec<f64>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Shape("a tensor needs at least level 0".into()));
        }
        let depth = levels.len() - 1;
        check_shape(dim, depth, DEFAULT_MAX_DEPTH)?;
        let mut coeffs = Vec::with_capacity(total_len(dim, depth));
        for (k, lvl) in levels.into_iter().enumerate() {
            if lvl.len() != level_len(dim, k) {
                return Err(Error::Shape(format!(
                    "level {k} has {} coefficients, expected {}",
                    lvl.len(),
                    level_len(dim, k)
                )));
            }
            coeffs.extend(lvl);
        }
        let t = TruncatedTensor { dim, depth, coeffs };
        t.check_finite("tensor levels")?;
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Level-0 coefficient.
    pub fn scalar(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn level(&self, k: usize) -> &[f64] {
        let off = level_offset(self.dim, k);
        &self.coeffs[off..off + level_len(self.dim, k)]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        let off = level_offset(self.dim, k);
        let len = level_len(self.dim, k);
        &mut self.coeffs[off..off + len]
    }

    /// Coefficient of a word (letters `0..dim`); words longer than the depth read as zero.
    pub fn get(&self, word: &[usize]) -> f64 {
        if word.len() > self.depth {
            return 0.0;
        }
        self.level(word.len())[word_index(self.dim, word)]
    }

    pub fn set(&mut self, word: &[usize], value: f64) {
        let idx = word_index(self.dim, word);
        self.level_mut(word.len())[idx] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub(crate) fn check_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim || self.depth != other.depth {
            return Err(Error::Shape(format!(
                "tensor shapes (d={}, N={}) and (d={}, N={}) differ",
                self.dim, self.depth, other.dim, other.depth
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        out.coeffs
            .iter_mut()
            .zip(&other.coeffs)
            .for_each(|(a, b)| *a += b);
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        out.coeffs
            .iter_mut()
            .zip(&other.coeffs)
            .for_each(|(a, b)| *a -= b);
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    /// Truncated product `(a⊗b)^I = Σ_{I=JK} a^J b^K`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(self.mul_unchecked(other))
    }

    pub(crate) fn mul_unchecked(&self, other: &Self) -> Self {
        let d = self.dim;
        let n = self.depth;
        let mut out = Self::zeros_unchecked(d, n);
        for k in 0..=n {
            let out_off = level_offset(d, k);
            for j in 0..=k {
                let a = self.level(j);
                let b = other.level(k - j);
                let blen = b.len();
                for (ia, &av) in a.iter().enumerate() {
                    if av == 0.0 {
                        continue;
                    }
                    let dst = &mut out.coeffs[out_off + ia * blen..out_off + (ia + 1) * blen];
                    for (o, &bv) in dst.iter_mut().zip(b) {
                        *o += av * bv;
                    }
                }
            }
        }
        out
    }

    /// Exponential of an element with zero scalar part. The series stops at `m = N`.
    pub fn exp(&self) -> Result<Self> {
        if self.scalar() != 0.0 {
            return Err(Error::Domain(format!(
                "exp needs a zero level-0 coefficient, found {}",
                self.scalar()
            )));
        }
        let mut r = Self::unit_unchecked(self.dim, self.depth);
        for m in (1..=self.depth).rev() {
            r = self.mul_unchecked(&r).scale(1.0 / m as f64);
            r.coeffs[0] += 1.0;
        }
        Ok(r)
    }

    /// Logarithm of an element with unit scalar part.
    pub fn log(&self) -> Result<Self> {
        if self.scalar() != 1.0 {
            return Err(Error::Domain(format!(
                "log needs a unit level-0 coefficient, found {}",
                self.scalar()
            )));
        }
        let mut x = self.clone();
        x.coeffs[0] = 0.0;
        let n = self.depth;
        // log(1+x) = x (1 − x (1/2 − x (1/3 − …)))
        let mut r = Self::zeros_unchecked(self.dim, n);
        r.coeffs[0] = 1.0 / n as f64;
        for m in (1..n).rev() {
            r = x.mul_unchecked(&r).scale(-1.0);
            r.coeffs[0] += 1.0 / m as f64;
        }
        Ok(x.mul_unchecked(&r))
    }

    /// Signature of a straight segment with the given increment, `exp(v)`.
    pub fn segment_signature(increment: &[f64], depth: usize) -> Result<Self> {
        let mut t = Self::zeros(increment.len(), depth)?;
        if increment.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("segment increment".into()));
        }
        t.fill_segment(increment);
        Ok(t)
    }

    /// Overwrites `self` with `exp(v)`; level `k` is `v^{⊗k}/k!`.
    pub(crate) fn fill_segment(&mut self, v: &[f64]) {
        let d = self.dim;
        debug_assert_eq!(v.len(), d);
        self.coeffs.iter_mut().for_each(|c| *c = 0.0);
        self.coeffs[0] = 1.0;
        for k in 1..=self.depth {
            let prev_off = level_offset(d, k - 1);
            let prev_len = level_len(d, k - 1);
            let off = level_offset(d, k);
            let inv = 1.0 / k as f64;
            for p in 0..prev_len {
                let pv = self.coeffs[prev_off + p] * inv;
                for (l, &vl) in v.iter().enumerate() {
                    self.coeffs[off + p * d + l] = pv * vl;
                }
            }
        }
    }

    /// Re-expresses the tensor over a larger alphabet: letter `l` becomes `map[l]`.
    pub fn embed_letters(&self, new_dim: usize, depth: usize, map: &[usize]) -> Result<Self> {
        if map.len() != self.dim || map.iter().any(|&m| m >= new_dim) {
            return Err(Error::Shape("letter map does not fit the target alphabet".into()));
        }
        let mut out = Self::zeros(new_dim, depth)?;
        let mut word = Vec::with_capacity(depth);
        for k in 0..=depth.min(self.depth) {
            for (idx, &c) in self.level(k).iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                word.clear();
                let mut rest = idx;
                for _ in 0..k {
                    word.push(map[rest % self.dim]);
                    rest /= self.dim;
                }
                word.reverse();
                let dst = word_index(new_dim, &word);
                out.level_mut(k)[dst] += c;
            }
        }
        Ok(out)
    }

    /// Drops all levels above `depth`.
    pub fn truncate(&self, depth: usize) -> Result<Self> {
        let depth = depth.min(self.depth);
        check_shape(self.dim, depth, DEFAULT_MAX_DEPTH.max(self.depth))?;
        Ok(TruncatedTensor {
            dim: self.dim,
            depth,
            coeffs: self.coeffs[..total_len(self.dim, depth)].to_vec(),
        })
    }

    /// Largest absolute coefficient difference; infinite on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.dim != other.dim || self.depth != other.depth {
            return f64::INFINITY;
        }
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).fold(0.0, f64::max)
    }
}

/// Ordered product of factors; the empty product is the unit.
pub fn product<'a, I>(dim: usize, depth: usize, factors: I) -> Result<TruncatedTensor>
where
    I: IntoIterator<Item = &'a TruncatedTensor>,
{
    let mut acc = TruncatedTensor::unit(dim, depth)?;
    for f in factors {
        acc = acc.mul(f)?;
    }
    Ok(acc)
}
