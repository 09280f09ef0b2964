//! Linear controlled flow driven by interval log-signatures.
//!
//! Each channel `i` of the driving space acts on the hidden state through a
//! matrix `A^i`. Bracket words act through nested commutators with a flipped
//! sign, `Ā_[u,v] = Ā_v Ā_u − Ā_u Ā_v`, so that the flow over an interval is
//! `exp(Σ_w Φ_w Ā_w)`. Matrices are stored block by block; a dense model is
//! the single-block case.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{LieElement, LyndonBasis};
use crate::matrix::{BlockDiag, Mat};
use crate::scan::scan_chunked;

/// Chunk length for the hidden-state scan.
pub const SCAN_CHUNK: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Structure {
    Dense,
    BlockDiagonal { block: usize },
}

impl Structure {
    pub fn block_size(&self, d_h: usize) -> usize {
        match *self {
            Structure::Dense => d_h,
            Structure::BlockDiagonal { block } => block,
        }
    }

    fn check(&self, d_h: usize) -> Result<()> {
        if d_h == 0 {
            return Err(Error::Shape("hidden dimension must be positive".into()));
        }
        if let Structure::BlockDiagonal { block } = *self {
            if block == 0 || !d_h.is_multiple_of(block) {
                return Err(Error::Shape(format!(
                    "hidden dimension {d_h} is not a multiple of block size {block}"
                )));
            }
        }
        Ok(())
    }
}

/// How the initial hidden state is formed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Init {
    Fixed { h0: Vec<f64> },
    /// `h_0 = W·tanh(v) + b` from an input vector `v`.
    Tanh { weight: Mat, bias: Vec<f64> },
}

/// Shape of a model to build.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub d_x: usize,
    pub d_h: usize,
    pub d_out: usize,
    pub structure: Structure,
    /// Length of the input vector for a learned initial state.
    #[serde(default)]
    pub init_inputs: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogSliceModel {
    pub d_x: usize,
    pub d_h: usize,
    pub d_out: usize,
    pub structure: Structure,
    pub channels: Vec<BlockDiag>,
    pub readout: Mat,
    pub readout_bias: Vec<f64>,
    pub init: Init,
}

fn first_unit(d_h: usize) -> Vec<f64> {
    let mut h = vec![0.0; d_h];
    h[0] = 1.0;
    h
}

impl LogSliceModel {
    /// Channel and readout entries uniform in `±1/√d_h`, zero readout bias.
    /// A learned initial state starts from `W` uniform in `±1/√d_in` and `b = e_1`.
    pub fn init(spec: &ModelSpec, seed: u64) -> Result<Self> {
        spec.structure.check(spec.d_h)?;
        if spec.d_x == 0 || spec.d_out == 0 {
            return Err(Error::Shape("d_x and d_out must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = spec.structure.block_size(spec.d_h);
        let nb = spec.d_h / b;
        let scale = 1.0 / (spec.d_h as f64).sqrt();
        let mut uniform = |rows: usize, cols: usize, s: f64| {
            let data = (0..rows * cols).map(|_| rng.random_range(-s..s)).collect();
            Mat { rows, cols, data }
        };
        let channels = (0..spec.d_x)
            .map(|_| BlockDiag {
                blocks: (0..nb).map(|_| uniform(b, b, scale)).collect(),
            })
            .collect();
        let readout = uniform(spec.d_out, spec.d_h, scale);
        let init = match spec.init_inputs {
            None => Init::Fixed {
                h0: first_unit(spec.d_h),
            },
            Some(d_in) => Init::Tanh {
                weight: uniform(spec.d_h, d_in, 1.0 / (d_in.max(1) as f64).sqrt()),
                bias: first_unit(spec.d_h),
            },
        };
        let model = LogSliceModel {
            d_x: spec.d_x,
            d_h: spec.d_h,
            d_out: spec.d_out,
            structure: spec.structure,
            channels,
            readout,
            readout_bias: vec![0.0; spec.d_out],
            init,
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks every stored shape against the declared dimensions.
    pub fn validate(&self) -> Result<()> {
        self.structure.check(self.d_h)?;
        let b = self.structure.block_size(self.d_h);
        let nb = self.d_h / b;
        if self.channels.len() != self.d_x {
            return Err(Error::Shape(format!(
                "{} channel matrices for d_x = {}",
                self.channels.len(),
                self.d_x
            )));
        }
        for (i, c) in self.channels.iter().enumerate() {
            if c.blocks.len() != nb
                || c.blocks.iter().any(|m| m.rows != b || m.cols != b || m.data.len() != b * b)
            {
                return Err(Error::Shape(format!("channel {i} does not have {nb} blocks of {b}×{b}")));
            }
        }
        let r = &self.readout;
        if r.rows != self.d_out || r.cols != self.d_h || r.data.len() != r.rows * r.cols {
            return Err(Error::Shape("readout must be d_out × d_h".into()));
        }
        if self.readout_bias.len() != self.d_out {
            return Err(Error::Shape("readout bias must have length d_out".into()));
        }
        match &self.init {
            Init::Fixed { h0 } if h0.len() != self.d_h => {
                Err(Error::Shape("h0 must have length d_h".into()))
            }
            Init::Tanh { weight, bias }
                if weight.rows != self.d_h
                    || weight.data.len() != weight.rows * weight.cols
                    || bias.len() != self.d_h =>
            {
                Err(Error::Shape("init map must produce d_h values".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn block_size(&self) -> usize {
        self.structure.block_size(self.d_h)
    }

    pub fn n_blocks(&self) -> usize {
        self.d_h / self.block_size()
    }

    /// Input length expected by the learned initial state, if any.
    pub fn init_inputs(&self) -> Option<usize> {
        match &self.init {
            Init::Fixed { .. } => None,
            Init::Tanh { weight, .. } => Some(weight.cols),
        }
    }

    pub fn initial_state(&self, input: Option<&[f64]>) -> Result<Vec<f64>> {
        match (&self.init, input) {
            (Init::Fixed { h0 }, _) => Ok(h0.clone()),
            (Init::Tanh { weight, bias }, Some(v)) => {
                if v.len() != weight.cols {
                    return Err(Error::Shape(format!(
                        "init input has length {}, expected {}",
                        v.len(),
                        weight.cols
                    )));
                }
                let sq: Vec<f64> = v.iter().map(|x| x.tanh()).collect();
                Ok(weight
                    .matvec(&sq)
                    .iter()
                    .zip(bias)
                    .map(|(a, b)| a + b)
                    .collect())
            }
            (Init::Tanh { .. }, None) => Err(Error::Shape("model needs an init input vector".into())),
        }
    }

    /// Named parameter groups and their ranges in the flat parameter vector.
    pub fn param_groups(&self) -> Vec<(&'static str, std::ops::Range<usize>)> {
        let b = self.block_size();
        let n_ch = self.d_x * self.n_blocks() * b * b;
        let mut groups = vec![("channels", 0..n_ch)];
        let mut at = n_ch;
        let mut push = |name, len| {
            groups.push((name, at..at + len));
            at += len;
        };
        push("readout", self.d_out * self.d_h);
        push("readout_bias", self.d_out);
        if let Init::Tanh { weight, bias } = &self.init {
            push("init_weight", weight.data.len());
            push("init_bias", bias.len());
        }
        groups
    }

    pub fn n_params(&self) -> usize {
        self.param_groups().last().map_or(0, |(_, r)| r.end)
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for c in &self.channels {
            for blk in &c.blocks {
                out.extend_from_slice(&blk.data);
            }
        }
        out.extend_from_slice(&self.readout.data);
        out.extend_from_slice(&self.readout_bias);
        if let Init::Tanh { weight, bias } = &self.init {
            out.extend_from_slice(&weight.data);
            out.extend_from_slice(bias);
        }
        out
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.n_params() {
            return Err(Error::Shape(format!(
                "{} parameters given, model has {}",
                p.len(),
                self.n_params()
            )));
        }
        let mut it = p.iter().copied();
        let mut fill = |dst: &mut [f64]| dst.iter_mut().for_each(|x| *x = it.next().unwrap());
        for c in &mut self.channels {
            for blk in &mut c.blocks {
                fill(&mut blk.data);
            }
        }
        fill(&mut self.readout.data);
        fill(&mut self.readout_bias);
        if let Init::Tanh { weight, bias } = &mut self.init {
            fill(&mut weight.data);
            fill(bias);
        }
        Ok(())
    }
}

/// Per-word matrices `Ā_w` over a Lyndon basis.
#[derive(Clone, Debug)]
pub struct LiftedField {
    pub basis: Arc<LyndonBasis>,
    pub mats: Vec<BlockDiag>,
}

/// Extends the channel matrices to every Lyndon word.
pub fn lift(model: &LogSliceModel, basis: &Arc<LyndonBasis>) -> Result<LiftedField> {
    if basis.dim() != model.d_x {
        return Err(Error::Shape(format!(
            "basis over {} letters, model has d_x = {}",
            basis.dim(),
            model.d_x
        )));
    }
    let mut mats: Vec<BlockDiag> = Vec::with_capacity(basis.len());
    for i in 0..basis.len() {
        let m = match basis.factorization(i) {
            None => model.channels[basis.words()[i][0]].clone(),
            Some((u, v)) => mats[v].commutator(&mats[u]),
        };
        mats.push(m);
    }
    Ok(LiftedField {
        basis: basis.clone(),
        mats,
    })
}

impl LiftedField {
    fn check(&self, phi: &[f64]) -> Result<()> {
        if phi.len() != self.basis.len() {
            return Err(Error::Shape(format!(
                "log-signature has {} coordinates, lift has {}",
                phi.len(),
                self.basis.len()
            )));
        }
        if phi.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("log-signature coordinates".into()));
        }
        Ok(())
    }

    /// `Σ_w Φ_w Ā_w`.
    pub fn generator(&self, phi: &[f64]) -> Result<BlockDiag> {
        self.check(phi)?;
        let first = &self.mats[0];
        let mut g = BlockDiag::zeros(first.n_blocks(), first.block_size());
        for (c, m) in phi.iter().zip(&self.mats) {
            if *c != 0.0 {
                g.add_scaled(m, *c);
            }
        }
        Ok(g)
    }
}

/// `exp(Σ_w Φ_w Ā_w)`.
pub fn interval_flow(lifted: &LiftedField, phi: &LieElement) -> Result<BlockDiag> {
    check_basis(lifted, phi)?;
    let f = lifted.generator(phi.coeffs())?.expm();
    if !f.is_finite() {
        return Err(Error::NonFinite("interval flow".into()));
    }
    Ok(f)
}

fn check_basis(lifted: &LiftedField, phi: &LieElement) -> Result<()> {
    let (a, b) = (phi.basis(), &lifted.basis);
    if a.dim() != b.dim() || a.depth() != b.depth() {
        return Err(Error::Shape(format!(
            "log-signature basis (d={}, N={}) does not match lift (d={}, N={})",
            a.dim(),
            a.depth(),
            b.dim(),
            b.depth()
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForwardMode {
    Sequential,
    Scan,
}

/// Hidden states `h_{r_1}, …, h_{r_M}` from `h_0`.
pub fn forward(
    lifted: &LiftedField,
    logsigs: &[LieElement],
    h0: &[f64],
    mode: ForwardMode,
) -> Result<Vec<Vec<f64>>> {
    let size = lifted.mats.first().map_or(0, BlockDiag::size);
    if h0.len() != size {
        return Err(Error::Shape(format!("h0 has length {}, expected {size}", h0.len())));
    }
    match mode {
        ForwardMode::Sequential => {
            let mut h = h0.to_vec();
            let mut out = Vec::with_capacity(logsigs.len());
            for phi in logsigs {
                h = interval_flow(lifted, phi)?.matvec(&h);
                out.push(h.clone());
            }
            Ok(out)
        }
        ForwardMode::Scan => {
            let flows: Vec<BlockDiag> = logsigs
                .par_iter()
                .map(|phi| interval_flow(lifted, phi))
                .collect::<Result<_>>()?;
            let prefix = scan_chunked(&flows, SCAN_CHUNK, |earlier, later| later.matmul(earlier));
            Ok(prefix.par_iter().map(|p| p.matvec(h0)).collect())
        }
    }
}

/// `W·h + b`.
pub fn readout(model: &LogSliceModel, h: &[f64]) -> Vec<f64> {
    model
        .readout
        .matvec(h)
        .iter()
        .zip(&model.readout_bias)
        .map(|(a, b)| a + b)
        .collect()
}

/// Readouts at every query point.
pub fn predict(
    model: &LogSliceModel,
    lifted: &LiftedField,
    logsigs: &[LieElement],
    init_input: Option<&[f64]>,
    mode: ForwardMode,
) -> Result<Vec<Vec<f64>>> {
    let h0 = model.initial_state(init_input)?;
    let hs = forward(lifted, logsigs, &h0, mode)?;
    Ok(hs.iter().map(|h| readout(model, h)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(d_x: usize, d_h: usize, structure: Structure, seed: u64) -> LogSliceModel {
        let spec = ModelSpec {
            d_x,
            d_h,
            d_out: 2,
            structure,
            init_inputs: None,
        };
        LogSliceModel::init(&spec, seed).unwrap()
    }

    fn dense(rows: &[Vec<f64>]) -> BlockDiag {
        BlockDiag {
            blocks: vec![Mat::from_rows(rows)],
        }
    }

    #[test]
    fn lift_of_word_12() {
        let mut m = model(2, 2, Structure::Dense, 1);
        m.channels[0] = dense(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        m.channels[1] = dense(&[vec![0.0, 1.0], vec![3.0, 0.0]]);
        let basis = LyndonBasis::shared(2, 3).unwrap();
        let l = lift(&m, &basis).unwrap();
        let a1 = m.channels[0].to_dense();
        let a2 = m.channels[1].to_dense();
        let mut want = a2.matmul(&a1);
        want.add_scaled(&a1.matmul(&a2), -1.0);
        let i12 = basis.index_of(&[0, 1]).unwrap();
        assert_eq!(l.mats[i12].to_dense(), want);
        assert_eq!(l.mats[0], m.channels[0]);
    }

    #[test]
    fn commuting_channels_lift_to_zero_brackets() {
        let mut m = model(2, 2, Structure::Dense, 2);
        m.channels[0] = dense(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        m.channels[1] = dense(&[vec![2.0, 4.0], vec![0.0, 2.0]]);
        let basis = LyndonBasis::shared(2, 4).unwrap();
        let l = lift(&m, &basis).unwrap();
        for i in basis.level_range(2).start..basis.len() {
            assert_eq!(l.mats[i].to_dense().data.iter().map(|x| x.abs()).sum::<f64>(), 0.0);
        }
    }

    #[test]
    fn block_structure_survives_lift_flow_and_scan() {
        let m = model(3, 8, Structure::BlockDiagonal { block: 2 }, 3);
        let basis = LyndonBasis::shared(3, 3).unwrap();
        let l = lift(&m, &basis).unwrap();
        assert!(l.mats.iter().all(|x| x.n_blocks() == 4 && x.block_size() == 2));
        let phi = LieElement::new(basis.clone(), (0..basis.len()).map(|i| 0.1 * i as f64).collect()).unwrap();
        let f = interval_flow(&l, &phi).unwrap();
        assert_eq!((f.n_blocks(), f.block_size()), (4, 2));
        // block flow matches the dense exponential of the expanded generator
        let g = l.generator(phi.coeffs()).unwrap().to_dense();
        assert!(crate::matrix::expm(&g).max_abs_diff(&f.to_dense()) < 1e-12);
    }

    #[test]
    fn flow_examples() {
        let mut m = model(1, 2, Structure::Dense, 4);
        m.channels[0] = dense(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        let basis = LyndonBasis::shared(1, 1).unwrap();
        let l = lift(&m, &basis).unwrap();
        let f = interval_flow(&l, &LieElement::new(basis.clone(), vec![2.5]).unwrap()).unwrap();
        assert_eq!(f.to_dense(), Mat::from_rows(&[vec![1.0, 2.5], vec![0.0, 1.0]]));
        let f = interval_flow(&l, &LieElement::zero(basis.clone())).unwrap();
        assert_eq!(f.to_dense(), Mat::identity(2));
        assert!(matches!(l.generator(&[f64::NAN]), Err(Error::NonFinite(_))));
        m.channels[0] = dense(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        let l = lift(&m, &basis).unwrap();
        assert!(matches!(
            interval_flow(&l, &LieElement::new(basis, vec![1e4]).unwrap()),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn scan_matches_sequential() {
        let m = model(2, 8, Structure::BlockDiagonal { block: 4 }, 5);
        let basis = LyndonBasis::shared(2, 2).unwrap();
        let l = lift(&m, &basis).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let phis: Vec<LieElement> = (0..40)
            .map(|_| {
                LieElement::new(basis.clone(), (0..3).map(|_| rng.random_range(-0.5..0.5)).collect()).unwrap()
            })
            .collect();
        let h0 = m.initial_state(None).unwrap();
        let a = forward(&l, &phis, &h0, ForwardMode::Sequential).unwrap();
        let b = forward(&l, &phis, &h0, ForwardMode::Scan).unwrap();
        for (x, y) in a.iter().zip(&b) {
            for (p, q) in x.iter().zip(y) {
                assert!((p - q).abs() < 1e-10);
            }
        }
        // two intervals compose as the product of their flows
        let f0 = interval_flow(&l, &phis[0]).unwrap();
        let f1 = interval_flow(&l, &phis[1]).unwrap();
        assert_eq!(f1.matvec(&f0.matvec(&h0)), a[1]);
        let zeros = vec![LieElement::zero(basis); 3];
        let hs = forward(&l, &zeros, &h0, ForwardMode::Scan).unwrap();
        assert!(hs.iter().all(|h| *h == h0));
    }

    #[test]
    fn readout_examples() {
        let mut m = model(1, 2, Structure::Dense, 6);
        m.readout = Mat::identity(2);
        assert_eq!(readout(&m, &[3.0, -1.0]), vec![3.0, -1.0]);
        m.readout = Mat::zeros(2, 2);
        m.readout_bias = vec![0.5, 1.5];
        assert_eq!(readout(&m, &[3.0, -1.0]), vec![0.5, 1.5]);
    }

    #[test]
    fn params_round_trip_and_checkpoint_json() {
        let spec = ModelSpec {
            d_x: 2,
            d_h: 4,
            d_out: 1,
            structure: Structure::BlockDiagonal { block: 2 },
            init_inputs: Some(3),
        };
        let mut m = LogSliceModel::init(&spec, 7).unwrap();
        let p = m.params();
        assert_eq!(p.len(), 2 * 2 * 4 + 4 + 1 + 12 + 4);
        let names: Vec<&str> = m.param_groups().iter().map(|g| g.0).collect();
        assert_eq!(names, ["channels", "readout", "readout_bias", "init_weight", "init_bias"]);
        let q: Vec<f64> = p.iter().map(|x| x + 1.0).collect();
        m.set_params(&q).unwrap();
        assert_eq!(m.params(), q);
        let js = serde_json::to_string(&m).unwrap();
        let back: LogSliceModel = serde_json::from_str(&js).unwrap();
        assert_eq!(back, m);
        back.validate().unwrap();
        assert!(LogSliceModel::init(&ModelSpec { d_h: 5, ..spec }, 0).is_err());
    }
}
