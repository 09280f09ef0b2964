//! Free Lie algebra `𝔏^N(R^d)` in the Lyndon basis.
//!
//! Basis words are ordered by length, then lexicographically. Each word `w`
//! of length ≥ 2 carries its standard factorization `w = uv`, where `v` is
//! the longest proper suffix of `w` that is itself Lyndon; the basis element
//! is the bracket `[P_u, P_v]`.

use std::collections::HashMap;
use std::ops::Range;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{level_len, word_index, TruncatedTensor, DEFAULT_MAX_DEPTH};

/// Residual tolerance used when projecting tensors onto the basis.
pub const LIE_RESIDUAL_TOL: f64 = 1e-9;

/// Möbius function.
pub fn mobius(mut n: usize) -> i64 {
    let mut result = 1;
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            n /= p;
            if n.is_multiple_of(p) {
                return 0;
            }
            result = -result;
        }
        p += 1;
    }
    if n > 1 {
        result = -result;
    }
    result
}

/// Dimension of level `k` of the free Lie algebra on `d` generators.
pub fn witt_dim(d: usize, k: usize) -> usize {
    assert!(d >= 1 && k >= 1, "witt_dim needs d ≥ 1 and k ≥ 1");
    let total: i128 = (1..=k)
        .filter(|m| k.is_multiple_of(*m))
        .map(|m| mobius(m) as i128 * (d as i128).pow((k / m) as u32))
        .sum();
    (total / k as i128) as usize
}

/// Strictly smaller than every proper rotation.
pub fn is_lyndon(word: &[usize]) -> bool {
    let n = word.len();
    if n == 0 {
        return false;
    }
    (1..n).all(|i| {
        let rot = word[i..].iter().chain(&word[..i]);
        word.iter().cmp(rot) == std::cmp::Ordering::Less
    })
}

/// Lyndon words of length ≤ `n` over `d` letters, in lexicographic order (Duval).
fn duval(d: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut w = vec![0usize];
    loop {
        out.push(w.clone());
        let m = w.len();
        while w.len() < n {
            let c = w[w.len() - m];
            w.push(c);
        }
        while w.last() == Some(&(d - 1)) {
            w.pop();
        }
        match w.last_mut() {
            Some(last) => *last += 1,
            None => break,
        }
    }
    out
}

/// Lyndon basis of `𝔏^N(R^d)` with cached bracket expansions.
#[derive(Debug)]
pub struct LyndonBasis {
    dim: usize,
    depth: usize,
    words: Vec<Vec<usize>>,
    factors: Vec<Option<(usize, usize)>>,
    levels: Vec<Range<usize>>,
    /// Homogeneous expansion of each basis element inside level `|w|`.
    brackets: Vec<Vec<f64>>,
    /// Position of each word inside its level, base-`d` with the first letter most significant.
    leads: Vec<usize>,
}

impl LyndonBasis {
    /// Builds the basis for `d` letters up to length `N`.
    pub fn new(dim: usize, depth: usize) -> Result<Self> {
        if dim == 0 || depth == 0 {
            return Err(Error::Shape("basis needs d ≥ 1 and N ≥ 1".into()));
        }
        if depth > DEFAULT_MAX_DEPTH {
            return Err(Error::DepthCap {
                depth,
                max: DEFAULT_MAX_DEPTH,
            });
        }
        let mut words = duval(dim, depth);
        words.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        let index: HashMap<&[usize], usize> = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.as_slice(), i))
            .collect();

        let factors: Vec<Option<(usize, usize)>> = words
            .iter()
            .map(|w| {
                (1..w.len())
                    .find(|&i| is_lyndon(&w[i..]))
                    .map(|i| (index[&w[..i]], index[&w[i..]]))
            })
            .collect();

        let mut levels = vec![0..0; depth + 1];
        let mut start = 0;
        for (k, range) in levels.iter_mut().enumerate().skip(1) {
            let end = start + words[start..].iter().take_while(|w| w.len() == k).count();
            *range = start..end;
            start = end;
        }

        let mut brackets: Vec<Vec<f64>> = Vec::with_capacity(words.len());
        for (w, f) in words.iter().zip(&factors) {
            let exp = match *f {
                None => {
                    let mut v = vec![0.0; dim];
                    v[w[0]] = 1.0;
                    v
                }
                Some((u, v)) => {
                    let pu = &brackets[u];
                    let pv = &brackets[v];
                    let mut out = vec![0.0; level_len(dim, w.len())];
                    for (i, &a) in pu.iter().enumerate() {
                        if a == 0.0 {
                            continue;
                        }
                        for (j, &b) in pv.iter().enumerate() {
                            out[i * pv.len() + j] += a * b;
                        }
                    }
                    for (j, &b) in pv.iter().enumerate() {
                        if b == 0.0 {
                            continue;
                        }
                        for (i, &a) in pu.iter().enumerate() {
                            out[j * pu.len() + i] -= b * a;
                        }
                    }
                    out
                }
            };
            brackets.push(exp);
        }

        let leads = words.iter().map(|w| word_index(dim, w)).collect();
        Ok(LyndonBasis {
            leads,
            dim,
            depth,
            words,
            factors,
            levels,
            brackets,
        })
    }

    /// Process-wide shared basis for `(d, N)`.
    pub fn shared(dim: usize, depth: usize) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<LyndonBasis>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("basis cache poisoned");
        if let Some(b) = guard.get(&(dim, depth)) {
            return Ok(b.clone());
        }
        let b = Arc::new(LyndonBasis::new(dim, depth)?);
        guard.insert((dim, depth), b.clone());
        Ok(b)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[Vec<usize>] {
        &self.words
    }

    /// Standard factorization `(u, v)` as basis indices; `None` for letters.
    pub fn factorization(&self, i: usize) -> Option<(usize, usize)> {
        self.factors[i]
    }

    /// Index range of the words of length `k`.
    pub fn level_range(&self, k: usize) -> Range<usize> {
        self.levels[k].clone()
    }

    pub fn index_of(&self, word: &[usize]) -> Option<usize> {
        if word.is_empty() || word.len() > self.depth {
            return None;
        }
        let r = self.level_range(word.len());
        self.words[r.clone()]
            .binary_search_by(|w| w.as_slice().cmp(word))
            .ok()
            .map(|i| r.start + i)
    }

    /// Bracket expansion of basis element `i` as a full tensor.
    pub fn bracket_tensor(&self, i: usize) -> TruncatedTensor {
        let mut t = TruncatedTensor::zeros_unchecked(self.dim, self.depth);
        let k = self.words[i].len();
        t.level_mut(k).copy_from_slice(&self.brackets[i]);
        t
    }

    /// Expands Lyndon coordinates to a tensor.
    pub fn expand(&self, coeffs: &[f64]) -> TruncatedTensor {
        let mut t = TruncatedTensor::zeros_unchecked(self.dim, self.depth);
        for k in 1..=self.depth {
            let lvl = t.level_mut(k);
            for i in self.level_range(k) {
                let c = coeffs[i];
                if c == 0.0 {
                    continue;
                }
                for (o, &b) in lvl.iter_mut().zip(&self.brackets[i]) {
                    *o += c * b;
                }
            }
        }
        t
    }

    /// Lyndon coordinates of a Lie tensor, level by level.
    ///
    /// `P_w` is `w` plus lexicographically larger words, so sweeping the Lyndon
    /// words of a level in increasing order peels off one coordinate at a time.
    /// Whatever is left over measures the distance from the free Lie algebra.
    pub fn project(&self, t: &TruncatedTensor) -> Result<Vec<f64>> {
        if t.dim() != self.dim || t.depth() != self.depth {
            return Err(Error::Shape(format!(
                "tensor (d={}, N={}) does not match basis (d={}, N={})",
                t.dim(),
                t.depth(),
                self.dim,
                self.depth
            )));
        }
        let scale = t.max_abs().max(1.0);
        let tol = LIE_RESIDUAL_TOL * scale;
        if t.scalar().abs() > tol {
            return Err(Error::NotLie {
                level: 0,
                residual: t.scalar().abs(),
            });
        }
        let mut coeffs = vec![0.0; self.len()];
        for k in 1..=self.depth {
            let mut rest = t.level(k).to_vec();
            for i in self.level_range(k) {
                let lead = self.leads[i];
                let c = rest[lead];
                coeffs[i] = c;
                if c == 0.0 {
                    continue;
                }
                for (o, &b) in rest[lead..].iter_mut().zip(&self.brackets[i][lead..]) {
                    *o -= c * b;
                }
                rest[lead] = 0.0;
            }
            let residual = rest.iter().map(|x| x.abs()).fold(0.0, f64::max);
            if residual > tol || !residual.is_finite() {
                return Err(Error::NotLie { level: k, residual });
            }
        }
        Ok(coeffs)
    }

    /// Human-readable bracket form of word `i`, e.g. `[1,[1,2]]` (letters 1-based).
    pub fn bracket_string(&self, i: usize) -> String {
        match self.factors[i] {
            None => format!("{}", self.words[i][0] + 1),
            Some((u, v)) => format!("[{},{}]", self.bracket_string(u), self.bracket_string(v)),
        }
    }
}

/// `[a, b] = a⊗b − b⊗a`.
pub fn lie_bracket(a: &TruncatedTensor, b: &TruncatedTensor) -> Result<TruncatedTensor> {
    a.mul(b)?.sub(&b.mul(a)?)
}

/// Element of `𝔏^N(R^d)` in Lyndon coordinates.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "LieRecord", into = "LieRecord")]
pub struct LieElement {
    basis: Arc<LyndonBasis>,
    coeffs: Vec<f64>,
}

/// Wire form `{dim, depth, coeffs}` with words in (length, lex) order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LieRecord {
    pub dim: usize,
    pub depth: usize,
    pub coeffs: Vec<f64>,
}

impl From<LieElement> for LieRecord {
    fn from(x: LieElement) -> Self {
        LieRecord {
            dim: x.basis.dim,
            depth: x.basis.depth,
            coeffs: x.coeffs,
        }
    }
}

impl TryFrom<LieRecord> for LieElement {
    type Error = Error;

    fn try_from(r: LieRecord) -> Result<Self> {
        LieElement::new(LyndonBasis::shared(r.dim, r.depth)?, r.coeffs)
    }
}

impl PartialEq for LieElement {
    fn eq(&self, other: &Self) -> bool {
        self.basis.dim == other.basis.dim
            && self.basis.depth == other.basis.depth
            && self.coeffs == other.coeffs
    }
}

impl LieElement {
    pub fn new(basis: Arc<LyndonBasis>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::Shape(format!(
                "{} coefficients for a basis of size {}",
                coeffs.len(),
                basis.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("Lie coefficients".into()));
        }
        Ok(LieElement { basis, coeffs })
    }

    pub fn zero(basis: Arc<LyndonBasis>) -> Self {
        let n = basis.len();
        LieElement {
            basis,
            coeffs: vec![0.0; n],
        }
    }

    /// Projects a Lie tensor onto the basis.
    pub fn from_tensor(t: &TruncatedTensor, basis: Arc<LyndonBasis>) -> Result<Self> {
        let coeffs = basis.project(t)?;
        Ok(LieElement { basis, coeffs })
    }

    pub fn to_tensor(&self) -> TruncatedTensor {
        self.basis.expand(&self.coeffs)
    }

    pub fn basis(&self) -> &Arc<LyndonBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Coefficient on a word, zero if the word is not in the basis.
    pub fn get(&self, word: &[usize]) -> f64 {
        self.basis.index_of(word).map_or(0.0, |i| self.coeffs[i])
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.basis.dim != other.basis.dim || self.basis.depth != other.basis.depth {
            return f64::INFINITY;
        }
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Projects `t` onto the basis.
pub fn to_lyndon(t: &TruncatedTensor, basis: &Arc<LyndonBasis>) -> Result<LieElement> {
    LieElement::from_tensor(t, basis.clone())
}

/// Expands Lyndon coordinates into tensor coordinates.
pub fn from_lyndon(x: &LieElement) -> TruncatedTensor {
    x.to_tensor()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(b: &LyndonBasis) -> Vec<Vec<usize>> {
        b.words().to_vec()
    }

    #[test]
    fn small_bases() {
        let b = LyndonBasis::new(2, 2).unwrap();
        assert_eq!(words(&b), vec![vec![0], vec![1], vec![0, 1]]);
        let b = LyndonBasis::new(2, 3).unwrap();
        assert_eq!(
            words(&b),
            vec![vec![0], vec![1], vec![0, 1], vec![0, 0, 1], vec![0, 1, 1]]
        );
        assert_eq!(b.bracket_string(3), "[1,[1,2]]");
        assert_eq!(b.bracket_string(4), "[[1,2],2]");
        let b = LyndonBasis::new(1, 5).unwrap();
        assert_eq!(b.len(), 1);
    }

    #[test]
    fn witt_values() {
        assert_eq!(witt_dim(2, 2), 1);
        assert_eq!(witt_dim(3, 2), 3);
        assert_eq!(witt_dim(2, 3), 2);
        assert_eq!(witt_dim(1, 1), 1);
        assert_eq!(witt_dim(1, 4), 0);
        assert_eq!(witt_dim(4, 2), 6);
    }

    #[test]
    fn bracket_of_generators() {
        let e1 = TruncatedTensor::from_vector(&[1.0, 0.0], 2).unwrap();
        let e2 = TruncatedTensor::from_vector(&[0.0, 1.0], 2).unwrap();
        let br = lie_bracket(&e1, &e2).unwrap();
        assert_eq!(br.get(&[0, 1]), 1.0);
        assert_eq!(br.get(&[1, 0]), -1.0);
        assert_eq!(br.level(1), &[0.0, 0.0]);
        assert_eq!(lie_bracket(&e1, &e1).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn brackets_are_unitriangular() {
        let b = LyndonBasis::new(3, 6).unwrap();
        for i in 0..b.len() {
            let lead = b.leads[i];
            let p = &b.brackets[i];
            assert_eq!(p[lead], 1.0, "{:?}", b.words()[i]);
            assert!(p[..lead].iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn bch_projection() {
        let basis = LyndonBasis::shared(2, 2).unwrap();
        let mut t = TruncatedTensor::zeros(2, 2).unwrap();
        t.set(&[0], 1.0);
        t.set(&[1], 1.0);
        t.set(&[0, 1], 0.5);
        t.set(&[1, 0], -0.5);
        let x = to_lyndon(&t, &basis).unwrap();
        assert_eq!(x.coeffs(), &[1.0, 1.0, 0.5]);
        let e1 = TruncatedTensor::from_vector(&[1.0, 0.0], 2).unwrap();
        assert_eq!(to_lyndon(&e1, &basis).unwrap().coeffs(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn expansion_of_unit_bracket() {
        let basis = LyndonBasis::shared(2, 2).unwrap();
        let x = LieElement::new(basis.clone(), vec![0.0, 0.0, 1.0]).unwrap();
        let t = from_lyndon(&x);
        assert_eq!(t.get(&[0, 1]), 1.0);
        assert_eq!(t.get(&[1, 0]), -1.0);
        assert_eq!(from_lyndon(&LieElement::zero(basis.clone())).max_abs(), 0.0);
        let y = LieElement::new(basis, vec![2.0, -3.0, 0.0]).unwrap();
        assert_eq!(from_lyndon(&y).level(1), &[2.0, -3.0]);
    }

    #[test]
    fn non_lie_tensor_is_rejected() {
        let basis = LyndonBasis::shared(2, 2).unwrap();
        let mut t = TruncatedTensor::zeros(2, 2).unwrap();
        t.set(&[0, 1], 1.0);
        assert!(matches!(
            to_lyndon(&t, &basis),
            Err(Error::NotLie { level: 2, .. })
        ));
        let sig = TruncatedTensor::segment_signature(&[1.0, 2.0], 2).unwrap();
        assert!(matches!(
            to_lyndon(&sig, &basis),
            Err(Error::NotLie { level: 0, .. })
        ));
    }

    #[test]
    fn json_record() {
        let basis = LyndonBasis::shared(2, 3).unwrap();
        let x = LieElement::new(basis, vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let s = serde_json::to_string(&x).unwrap();
        assert_eq!(s, r#"{"dim":2,"depth":3,"coeffs":[1.0,2.0,3.0,4.0,5.0]}"#);
        let back: LieElement = serde_json::from_str(&s).unwrap();
        assert_eq!(back, x);
        assert!(serde_json::from_str::<LieElement>(r#"{"dim":2,"depth":3,"coeffs":[1.0]}"#).is_err());
    }

    #[test]
    fn mobius_values() {
        let expect = [1, -1, -1, 0, -1, 1, -1, 0, 0, 1];
        for (n, &m) in (1..=10).zip(&expect) {
            assert_eq!(mobius(n), m, "mu({n})");
        }
    }

    #[test]
    fn index_lookup() {
        let b = LyndonBasis::new(3, 3).unwrap();
        for (i, w) in b.words().iter().enumerate() {
            assert_eq!(b.index_of(w), Some(i));
        }
        assert_eq!(b.index_of(&[1, 0]), None);
    }
}
