//! Masked regression loss, reverse-mode gradients and Adam.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{LieElement, LyndonBasis};
use crate::matrix::{expm_frechet, BlockDiag, Mat};
use crate::slice::{forward, lift, predict, ForwardMode, Init, LiftedField, LogSliceModel};

/// One training example: interval log-signatures with a target per interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub logsigs: Vec<LieElement>,
    pub targets: Vec<Vec<f64>>,
    /// 1 for intervals that count towards the loss, 0 for padding.
    pub mask: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_input: Option<Vec<f64>>,
}

impl Sample {
    pub fn new(logsigs: Vec<LieElement>, targets: Vec<Vec<f64>>) -> Self {
        let mask = vec![1.0; targets.len()];
        Sample {
            logsigs,
            targets,
            mask,
            init_input: None,
        }
    }

    pub fn check(&self, d_out: usize) -> Result<()> {
        let m = self.logsigs.len();
        if self.targets.len() != m || self.mask.len() != m {
            return Err(Error::Shape(format!(
                "{m} intervals, {} targets, {} mask entries",
                self.targets.len(),
                self.mask.len()
            )));
        }
        if self.targets.iter().any(|y| y.len() != d_out) {
            return Err(Error::Shape(format!("targets must have length {d_out}")));
        }
        if self.mask.iter().any(|&w| w != 0.0 && w != 1.0) {
            return Err(Error::Shape("mask entries must be 0 or 1".into()));
        }
        Ok(())
    }

    /// Appends `extra` masked intervals with zero log-signature.
    pub fn padded(&self, extra: usize, basis: &std::sync::Arc<LyndonBasis>) -> Self {
        let mut s = self.clone();
        let d_out = self.targets.first().map_or(0, Vec::len);
        for _ in 0..extra {
            s.logsigs.push(LieElement::zero(basis.clone()));
            s.targets.push(vec![0.0; d_out]);
            s.mask.push(0.0);
        }
        s
    }
}

/// `Σ m‖ŷ−y‖² / (d_out·Σ m)` over flattened (sample, interval) pairs.
pub fn masked_mse(preds: &[Vec<f64>], targets: &[Vec<f64>], mask: &[f64], d_out: usize) -> Result<f64> {
    if preds.len() != targets.len() || preds.len() != mask.len() {
        return Err(Error::Shape("predictions, targets and mask differ in length".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for ((p, y), &m) in preds.iter().zip(targets).zip(mask) {
        if p.len() != d_out || y.len() != d_out {
            return Err(Error::Shape(format!("expected vectors of length {d_out}")));
        }
        if m != 0.0 {
            num += m * sq_dist(p, y);
            den += m;
        }
    }
    if den == 0.0 {
        return Err(Error::DegenerateBatch);
    }
    Ok(num / (d_out as f64 * den))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sum of squared masked errors and the mask weight of one sample.
fn sample_sse(
    model: &LogSliceModel,
    lifted: &LiftedField,
    s: &Sample,
    mode: ForwardMode,
) -> Result<(f64, f64)> {
    s.check(model.d_out)?;
    let preds = predict(model, lifted, &s.logsigs, s.init_input.as_deref(), mode)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for ((p, y), &m) in preds.iter().zip(&s.targets).zip(&s.mask) {
        if m != 0.0 {
            num += sq_dist(p, y);
            den += 1.0;
        }
    }
    if !num.is_finite() {
        return Err(Error::NonFinite("prediction error".into()));
    }
    Ok((num, den))
}

/// Masked MSE of the model over a set of samples.
pub fn evaluate(model: &LogSliceModel, samples: &[Sample], mode: ForwardMode) -> Result<f64> {
    let refs: Vec<&Sample> = samples.iter().collect();
    batch_loss(model, &refs, mode)
}

pub fn batch_loss(model: &LogSliceModel, batch: &[&Sample], mode: ForwardMode) -> Result<f64> {
    let basis = batch_basis(model, batch)?;
    let lifted = lift(model, &basis)?;
    let parts: Vec<(f64, f64)> = batch
        .par_iter()
        .map(|s| sample_sse(model, &lifted, s, mode))
        .collect::<Result<_>>()?;
    let (num, den) = parts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    if den == 0.0 {
        return Err(Error::DegenerateBatch);
    }
    Ok(num / (model.d_out as f64 * den))
}

fn batch_basis(model: &LogSliceModel, batch: &[&Sample]) -> Result<std::sync::Arc<LyndonBasis>> {
    let basis = batch
        .iter()
        .find_map(|s| s.logsigs.first())
        .map(|phi| phi.basis().clone())
        .ok_or(Error::DegenerateBatch)?;
    if basis.dim() != model.d_x {
        return Err(Error::Shape(format!(
            "log-signatures over {} letters, model has d_x = {}",
            basis.dim(),
            model.d_x
        )));
    }
    Ok(basis)
}

/// Gradient pieces of one sample before the lift is unwound.
struct SampleGrad {
    sse: f64,
    weight: f64,
    lifted: Vec<BlockDiag>,
    readout: Vec<f64>,
    bias: Vec<f64>,
    init_weight: Vec<f64>,
    init_bias: Vec<f64>,
}

fn sample_grad(model: &LogSliceModel, lifted: &LiftedField, s: &Sample) -> Result<SampleGrad> {
    s.check(model.d_out)?;
    let d_h = model.d_h;
    let b = model.block_size();
    let nb = model.n_blocks();
    let h0 = model.initial_state(s.init_input.as_deref())?;

    let mut gens = Vec::with_capacity(s.logsigs.len());
    let mut flows = Vec::with_capacity(s.logsigs.len());
    let mut hs = vec![h0];
    for (k, phi) in s.logsigs.iter().enumerate() {
        let g = lifted.generator(phi.coeffs())?;
        let f = g.expm();
        let h = f.matvec(&hs[k]);
        if h.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("hidden state after interval {k}")));
        }
        gens.push(g);
        flows.push(f);
        hs.push(h);
    }

    let mut out = SampleGrad {
        sse: 0.0,
        weight: 0.0,
        lifted: vec![BlockDiag::zeros(nb, b); lifted.mats.len()],
        readout: vec![0.0; model.d_out * d_h],
        bias: vec![0.0; model.d_out],
        init_weight: Vec::new(),
        init_bias: Vec::new(),
    };

    let mut gh = vec![0.0; d_h];
    for k in (0..s.logsigs.len()).rev() {
        let h = &hs[k + 1];
        if s.mask[k] != 0.0 {
            let pred = crate::slice::readout(model, h);
            let gy: Vec<f64> = pred.iter().zip(&s.targets[k]).map(|(p, y)| 2.0 * (p - y)).collect();
            out.sse += sq_dist(&pred, &s.targets[k]);
            out.weight += 1.0;
            for (o, &g) in gy.iter().enumerate() {
                for (j, &hj) in h.iter().enumerate() {
                    out.readout[o * d_h + j] += g * hj;
                }
                out.bias[o] += g;
            }
            for (x, y) in gh.iter_mut().zip(model.readout.tmatvec(&gy)) {
                *x += y;
            }
        }
        if gh.iter().all(|&x| x == 0.0) {
            continue;
        }
        // dL/dF = gh·h_{k}ᵀ restricted to the blocks, pulled back through exp.
        let prev = &hs[k];
        let phi = s.logsigs[k].coeffs();
        for blk in 0..nb {
            let r = blk * b..(blk + 1) * b;
            let mut gf = Mat::zeros(b, b);
            for (i, &gi) in gh[r.clone()].iter().enumerate() {
                for (j, &pj) in prev[r.clone()].iter().enumerate() {
                    gf.data[i * b + j] = gi * pj;
                }
            }
            let (_, gm) = expm_frechet(&gens[k].blocks[blk].transpose(), &gf);
            for (w, &c) in phi.iter().enumerate() {
                if c != 0.0 {
                    out.lifted[w].blocks[blk].add_scaled(&gm, c);
                }
            }
        }
        gh = flows[k].tmatvec(&gh);
    }

    if let Init::Tanh { weight, .. } = &model.init {
        let v = s.init_input.as_deref().expect("checked by initial_state");
        let sq: Vec<f64> = v.iter().map(|x| x.tanh()).collect();
        out.init_weight = vec![0.0; weight.data.len()];
        for (i, &g) in gh.iter().enumerate() {
            for (j, &q) in sq.iter().enumerate() {
                out.init_weight[i * weight.cols + j] = g * q;
            }
        }
        out.init_bias = gh;
    }
    if !out.sse.is_finite() {
        return Err(Error::NonFinite("prediction error".into()));
    }
    Ok(out)
}

/// Pulls gradients on the lifted matrices back to the channel matrices.
fn unwind_lift(lifted: &LiftedField, mut g: Vec<BlockDiag>) -> Vec<BlockDiag> {
    let basis = &lifted.basis;
    let d = basis.dim();
    for i in (0..basis.len()).rev() {
        let Some((u, v)) = basis.factorization(i) else {
            continue;
        };
        let gw = g[i].clone();
        let au = &lifted.mats[u];
        let av = &lifted.mats[v];
        for blk in 0..gw.n_blocks() {
            let gb = &gw.blocks[blk];
            let aut = au.blocks[blk].transpose();
            let avt = av.blocks[blk].transpose();
            // Ā_w = Ā_v Ā_u − Ā_u Ā_v
            let mut du = avt.matmul(gb);
            du.add_scaled(&gb.matmul(&avt), -1.0);
            let mut dv = gb.matmul(&aut);
            dv.add_scaled(&aut.matmul(gb), -1.0);
            g[u].blocks[blk].add_scaled(&du, 1.0);
            g[v].blocks[blk].add_scaled(&dv, 1.0);
        }
    }
    let mut channels = vec![BlockDiag::zeros(0, 0); d];
    for i in basis.level_range(1) {
        channels[basis.words()[i][0]] = g[i].clone();
    }
    channels
}

/// Loss and its gradient in the flat parameter layout of the model.
pub fn grad(model: &LogSliceModel, batch: &[&Sample]) -> Result<(f64, Vec<f64>)> {
    let basis = batch_basis(model, batch)?;
    let lifted = lift(model, &basis)?;
    let parts: Vec<SampleGrad> = batch
        .par_iter()
        .map(|s| sample_grad(model, &lifted, s))
        .collect::<Result<_>>()?;

    let nb = model.n_blocks();
    let b = model.block_size();
    let mut sse = 0.0;
    let mut weight = 0.0;
    let mut g_lift = vec![BlockDiag::zeros(nb, b); basis.len()];
    let mut g_readout = vec![0.0; model.d_out * model.d_h];
    let mut g_bias = vec![0.0; model.d_out];
    let mut g_iw = Vec::new();
    let mut g_ib = Vec::new();
    for p in parts {
        sse += p.sse;
        weight += p.weight;
        for (acc, x) in g_lift.iter_mut().zip(&p.lifted) {
            acc.add_scaled(x, 1.0);
        }
        add_into(&mut g_readout, &p.readout);
        add_into(&mut g_bias, &p.bias);
        if g_iw.is_empty() {
            g_iw = vec![0.0; p.init_weight.len()];
            g_ib = vec![0.0; p.init_bias.len()];
        }
        add_into(&mut g_iw, &p.init_weight);
        add_into(&mut g_ib, &p.init_bias);
    }
    if weight == 0.0 {
        return Err(Error::DegenerateBatch);
    }
    let norm = 1.0 / (model.d_out as f64 * weight);
    let channels = unwind_lift(&lifted, g_lift);
    let mut flat = Vec::with_capacity(model.n_params());
    for c in &channels {
        for blk in &c.blocks {
            flat.extend_from_slice(&blk.data);
        }
    }
    flat.extend_from_slice(&g_readout);
    flat.extend_from_slice(&g_bias);
    if matches!(model.init, Init::Tanh { .. }) {
        flat.extend_from_slice(&g_iw);
        flat.extend_from_slice(&g_ib);
    }
    flat.iter_mut().for_each(|x| *x *= norm);
    if flat.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("gradient".into()));
    }
    Ok((sse * norm, flat))
}

fn add_into(acc: &mut [f64], x: &[f64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

/// Central finite differences of the batch loss, step `max(1e-5, 1e-7·|θ|)`.
pub fn finite_difference_grad(model: &LogSliceModel, batch: &[&Sample]) -> Result<Vec<f64>> {
    let p = model.params();
    let mut work = model.clone();
    let mut out = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        let h = 1e-5f64.max(1e-7 * p[i].abs());
        let mut q = p.clone();
        q[i] = p[i] + h;
        work.set_params(&q)?;
        let up = batch_loss(&work, batch, ForwardMode::Sequential)?;
        q[i] = p[i] - h;
        work.set_params(&q)?;
        let down = batch_loss(&work, batch, ForwardMode::Sequential)?;
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

/// Adam with global-norm gradient clipping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub lr: f64,
    pub clip_norm: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(n_params: usize, lr: f64, clip_norm: f64) -> Self {
        OptimizerState {
            lr,
            clip_norm,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }
}

/// Scales `g` in place so its Euclidean norm is at most `max_norm`; returns the original norm.
pub fn clip_global_norm(g: &mut [f64], max_norm: f64) -> f64 {
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        g.iter_mut().for_each(|x| *x *= s);
    }
    norm
}

pub fn adam_step(state: &mut OptimizerState, params: &mut [f64], grads: &[f64]) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Shape(format!(
            "{} parameters, {} gradients, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    let mut g = grads.to_vec();
    clip_global_norm(&mut g, state.clip_norm);
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g[i] * g[i];
        let mh = state.m[i] / c1;
        let vh = state.v[i] / c2;
        params[i] -= state.lr * mh / (vh.sqrt() + state.eps);
    }
    Ok(())
}

/// Hyperparameters of a training run. Missing JSON fields take their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub clip_norm: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub depth: usize,
    pub hidden_dim: usize,
    /// `None` trains a dense model.
    pub block_size: Option<usize>,
    pub include_counts: bool,
    pub include_time: bool,
    pub mode: ForwardMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            clip_norm: 1.0,
            batch_size: 32,
            epochs: 20,
            seed: 0,
            depth: 2,
            hidden_dim: 64,
            block_size: Some(8),
            include_counts: false,
            include_time: true,
            mode: ForwardMode::Scan,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: Option<f64>,
    pub wall_time: f64,
}

pub struct TrainOutcome {
    pub model: LogSliceModel,
    pub metrics: Vec<EpochMetrics>,
}

/// Batch order for one epoch, drawn from the `(seed, epoch)` stream.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx
}

/// Runs `config.epochs` epochs of shuffled mini-batch Adam.
pub fn train(
    mut model: LogSliceModel,
    train_set: &[Sample],
    test_set: &[Sample],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    if train_set.is_empty() {
        return Err(Error::DegenerateBatch);
    }
    if config.batch_size == 0 {
        return Err(Error::Shape("batch size must be positive".into()));
    }
    let start = Instant::now();
    let mut params = model.params();
    let mut opt = OptimizerState::new(params.len(), config.lr, config.clip_norm);
    let mut metrics = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let order = epoch_order(train_set.len(), config.seed, epoch);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (_, g) = match grad(&model, &batch) {
                Err(Error::DegenerateBatch) => continue,
                r => r?,
            };
            adam_step(&mut opt, &mut params, &g)?;
            model.set_params(&params)?;
        }
        let train_loss = evaluate(&model, train_set, config.mode)?;
        let test_loss = if test_set.is_empty() {
            None
        } else {
            Some(evaluate(&model, test_set, config.mode)?)
        };
        log::info!("epoch {epoch}: train {train_loss:e} test {test_loss:?}");
        metrics.push(EpochMetrics {
            epoch: epoch + 1,
            train_loss,
            test_loss,
            wall_time: start.elapsed().as_secs_f64(),
        });
    }
    Ok(TrainOutcome { model, metrics })
}

/// Hidden states for each sample, computed through the lifted field once.
pub fn hidden_states(
    model: &LogSliceModel,
    samples: &[Sample],
    mode: ForwardMode,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let refs: Vec<&Sample> = samples.iter().collect();
    let basis = batch_basis(model, &refs)?;
    let lifted = lift(model, &basis)?;
    samples
        .iter()
        .map(|s| {
            let h0 = model.initial_state(s.init_input.as_deref())?;
            forward(&lifted, &s.logsigs, &h0, mode)
        })
        .collect()
}
