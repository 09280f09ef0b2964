//! Synthetic datasets: coupled sinusoids under four sampling regimes, and a
//! linear system driven by a 4-dimensional Brownian motion.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{
    ComposeMode, ContinuousChannels, Embedder, EmbeddingConfig, Event, ObservationStream,
    QueryPartition,
};
use crate::error::{Error, Result};
use crate::lie::{LieElement, LyndonBasis};
use crate::matrix::{expm, Mat};
use crate::tensor::TruncatedTensor;
use crate::train::Sample;

pub const SINUSOID_HORIZON: f64 = 10.0;
pub const SINUSOID_CHANNELS: usize = 2;
pub const REGULAR_POINTS: usize = 128;
pub const QUERY_INTERVALS: std::ops::RangeInclusive<usize> = 16..=32;

pub const BROWNIAN_CELLS: usize = 2048;
pub const BROWNIAN_DIM: usize = 4;
pub const DEFAULT_SUBGRID: usize = 16;
pub const BROWNIAN_INTERVALS: [usize; 6] = [2, 4, 8, 16, 32, 64];

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    SyncRegular,
    SyncIrregular,
    AsyncIrregular,
    AsyncSparse,
}

impl Regime {
    pub const ALL: [Regime; 4] = [
        Regime::SyncRegular,
        Regime::SyncIrregular,
        Regime::AsyncIrregular,
        Regime::AsyncSparse,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Regime::SyncRegular => "sync_regular",
            Regime::SyncIrregular => "sync_irregular",
            Regime::AsyncIrregular => "async_irregular",
            Regime::AsyncSparse => "async_sparse",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown regime {s:?}")))
    }
}

/// Latent parameters of `x_i(t) = A_i sin(ωt + φ + δ_i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinusoidParams {
    pub omega: f64,
    pub phi: f64,
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
}

impl SinusoidParams {
    pub fn draw(rng: &mut impl Rng) -> Self {
        let omega = rng.random_range(0.8..1.6);
        let phi = rng.random_range(0.0..2.0 * PI);
        let mut amplitudes = Vec::with_capacity(SINUSOID_CHANNELS);
        let mut phases = Vec::with_capacity(SINUSOID_CHANNELS);
        for _ in 0..SINUSOID_CHANNELS {
            amplitudes.push(rng.random_range(0.7..1.3));
            phases.push(rng.random_range(0.0..2.0 * PI));
        }
        SinusoidParams {
            omega,
            phi,
            amplitudes,
            phases,
        }
    }

    pub fn value(&self, channel: usize, t: f64) -> f64 {
        self.amplitudes[channel] * (self.omega * t + self.phi + self.phases[channel]).sin()
    }

    pub fn state(&self, t: f64) -> Vec<f64> {
        (0..self.amplitudes.len()).map(|i| self.value(i, t)).collect()
    }

    /// Per-channel angular frequencies; all equal by construction.
    pub fn frequencies(&self) -> Vec<f64> {
        vec![self.omega; self.amplitudes.len()]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SinusoidSample {
    pub index: usize,
    pub params: SinusoidParams,
    pub stream: ObservationStream,
    pub partition: QueryPartition,
    pub targets: Vec<Vec<f64>>,
    pub first_values: Vec<f64>,
}

/// Arrival times of a Poisson process with rate `rate` on `(0, horizon)`.
pub fn poisson_times(rng: &mut impl Rng, rate: f64, horizon: f64) -> Vec<f64> {
    let exp = Exp::new(rate).expect("positive rate");
    let mut t = 0.0;
    let mut out = Vec::new();
    loop {
        t += exp.sample(rng);
        if t >= horizon {
            break;
        }
        if t > 0.0 {
            out.push(t);
        }
    }
    out
}

/// Poisson times with the two-uniform-draws fallback for sparse channels.
fn poisson_with_fallback(rng: &mut impl Rng, rate: f64, horizon: f64) -> Vec<f64> {
    let times = poisson_times(rng, rate, horizon);
    if times.len() >= 2 {
        return times;
    }
    sorted_distinct_uniform(rng, 2, horizon)
}

fn sorted_distinct_uniform(rng: &mut impl Rng, n: usize, horizon: f64) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0.0..horizon))
            .filter(|&t| t > 0.0)
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        if v.len() == n {
            return v;
        }
    }
}

/// Observation times per channel for one regime.
pub fn observation_times(regime: Regime, rng: &mut impl Rng, horizon: f64) -> Vec<Vec<f64>> {
    match regime {
        Regime::SyncRegular => {
            let grid: Vec<f64> = (1..=REGULAR_POINTS)
                .map(|j| j as f64 * horizon / (REGULAR_POINTS + 1) as f64)
                .collect();
            vec![grid; SINUSOID_CHANNELS]
        }
        Regime::SyncIrregular => {
            let rate = rng.random_range(8.0..10.0);
            vec![poisson_with_fallback(rng, rate, horizon); SINUSOID_CHANNELS]
        }
        Regime::AsyncIrregular => (0..SINUSOID_CHANNELS)
            .map(|_| {
                let rate = rng.random_range(8.0..10.0);
                poisson_with_fallback(rng, rate, horizon)
            })
            .collect(),
        Regime::AsyncSparse => {
            let dense = rng.random_range(12.0..20.0);
            let a = poisson_with_fallback(rng, dense, horizon);
            let sparse = rng.random_range(2.0..4.0);
            let b = poisson_with_fallback(rng, sparse, horizon);
            vec![a, b]
        }
    }
}

/// Merges per-channel observation times into one event stream.
pub fn merge_observations(
    horizon: f64,
    times: &[Vec<f64>],
    value: impl Fn(usize, f64) -> f64,
) -> Result<ObservationStream> {
    let mut all: Vec<(f64, usize)> = times
        .iter()
        .enumerate()
        .flat_map(|(k, ts)| ts.iter().map(move |&t| (t, k)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut events: Vec<Event> = Vec::new();
    for (t, k) in all {
        match events.last_mut() {
            Some(ev) if ev.t == t => {
                if ev.channels.last() != Some(&k) {
                    ev.channels.push(k);
                    ev.values.push(value(k, t));
                }
            }
            _ => events.push(Event::new(t, vec![k], vec![value(k, t)])),
        }
    }
    ObservationStream::new(horizon, times.len(), events)
}

/// Sinusoid samples with indices in `indices`; the latent system and query grid
/// of a given index do not depend on the regime.
pub fn gen_sinusoid_range(regime: Regime, indices: Range<usize>, seed: u64) -> Result<Vec<SinusoidSample>> {
    let horizon = SINUSOID_HORIZON;
    indices
        .into_par_iter()
        .map(|index| {
            let base = 4 * index as u64;
            let params = SinusoidParams::draw(&mut rng_for(seed, base));
            let times = observation_times(regime, &mut rng_for(seed, base + 1), horizon);
            let stream = merge_observations(horizon, &times, |k, t| params.value(k, t))?;
            let mut qrng = rng_for(seed, base + 2);
            let m = qrng.random_range(QUERY_INTERVALS);
            let mut points = vec![0.0];
            points.extend(sorted_distinct_uniform(&mut qrng, m - 1, horizon));
            points.push(horizon);
            let partition = QueryPartition::new(points)?;
            let targets = partition.points()[1..].iter().map(|&q| params.state(q)).collect();
            let first_values = times
                .iter()
                .enumerate()
                .map(|(k, ts)| params.value(k, ts[0]))
                .collect();
            Ok(SinusoidSample {
                index,
                params,
                stream,
                partition,
                targets,
                first_values,
            })
        })
        .collect()
}

pub fn gen_sinusoid(regime: Regime, n_samples: usize, seed: u64) -> Result<Vec<SinusoidSample>> {
    gen_sinusoid_range(regime, 0..n_samples, seed)
}

/// Training sample from a stream, its partition and per-interval targets.
pub fn embed_sample(
    stream: &ObservationStream,
    cont: &ContinuousChannels,
    partition: &QueryPartition,
    targets: Vec<Vec<f64>>,
    config: &EmbeddingConfig,
) -> Result<Sample> {
    let emb = Embedder::new(stream, cont, config)?;
    let logsigs = emb.partition_log_signatures(partition, ComposeMode::Sequential)?;
    Ok(Sample::new(logsigs, targets))
}

/// Sinusoid inputs: time appended when `include_time`, first values fed to the init map.
pub fn sinusoid_training_set(
    samples: &[SinusoidSample],
    config: &EmbeddingConfig,
    include_time: bool,
) -> Result<Vec<Sample>> {
    samples
        .par_iter()
        .map(|s| {
            let cont = if include_time {
                ContinuousChannels::time_only(s.stream.horizon())
            } else {
                ContinuousChannels::none()
            };
            let mut out = embed_sample(&s.stream, &cont, &s.partition, s.targets.clone(), config)?;
            out.init_input = Some(s.first_values.clone());
            Ok(out)
        })
        .collect()
}

/// `dX = V_1 X ∘ dW¹ + V_2 X ∘ dW²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrownianSystem {
    pub v1: Mat,
    pub v2: Mat,
    pub x0: Vec<f64>,
}

impl Default for BrownianSystem {
    fn default() -> Self {
        let s = |rows: [[f64; 2]; 2]| {
            let mut m = Mat::from_rows(&[rows[0].to_vec(), rows[1].to_vec()]);
            m.scale(0.15);
            m
        };
        BrownianSystem {
            v1: s([[-0.5, -1.0], [1.0, -0.5]]),
            v2: s([[-0.2, 0.8], [0.3, -0.7]]),
            x0: vec![1.0, 0.0],
        }
    }
}

impl BrownianSystem {
    /// Flow over one cell from its depth-2 log-signature: `exp(c₁V₁ + c₂V₂ − c₁₂[V₁,V₂])`.
    pub fn cell_flow(&self, cell: &LieElement) -> Mat {
        let b = cell.basis();
        let c1 = cell.coeffs()[0];
        let c2 = cell.coeffs()[1];
        let c12 = b.index_of(&[0, 1]).map_or(0.0, |i| cell.coeffs()[i]);
        let mut m = self.v1.clone();
        m.scale(c1);
        m.add_scaled(&self.v2, c2);
        m.add_scaled(&self.v1.commutator(&self.v2), -c12);
        expm(&m)
    }

    /// Flow along one straight sub-step with increments `dw` (area vanishes).
    pub fn step_flow(&self, dw: &[f64]) -> Mat {
        let mut m = self.v1.clone();
        m.scale(dw[0]);
        m.add_scaled(&self.v2, dw[1]);
        expm(&m)
    }
}

/// One simulated Brownian path: per-cell log-signatures and the state at every grid index.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianPath {
    pub index: usize,
    pub cells: Vec<LieElement>,
    pub states: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BrownianSample {
    pub cells: Vec<LieElement>,
    /// Grid indices `0 = c_0 < … < c_m = 2048`.
    pub cuts: Vec<usize>,
    pub targets: Vec<Vec<f64>>,
}

impl BrownianPath {
    pub fn sample(&self, cuts: &[usize]) -> BrownianSample {
        BrownianSample {
            cells: self.cells.clone(),
            cuts: cuts.to_vec(),
            targets: cuts[1..].iter().map(|&c| self.states[c].clone()).collect(),
        }
    }
}

/// Depth-2 log-signature of one cell from its `F` piecewise-linear sub-steps.
pub fn cell_log_signature(steps: &[Vec<f64>], basis: &Arc<LyndonBasis>) -> Result<LieElement> {
    let d = basis.dim();
    let mut sig = TruncatedTensor::unit_unchecked(d, 2);
    for s in steps {
        let mut f = TruncatedTensor::zeros_unchecked(d, 2);
        f.fill_segment(s);
        sig = sig.mul_unchecked(&f);
    }
    LieElement::from_tensor(&sig.log()?, basis.clone())
}

pub fn brownian_paths(
    indices: Range<usize>,
    seed: u64,
    subgrid: usize,
    system: &BrownianSystem,
) -> Result<Vec<BrownianPath>> {
    if subgrid < 4 {
        return Err(Error::Domain(format!("subgrid factor must be at least 4, got {subgrid}")));
    }
    let basis = LyndonBasis::shared(BROWNIAN_DIM, 2)?;
    let sd = (1.0 / (BROWNIAN_CELLS * subgrid) as f64).sqrt();
    indices
        .into_par_iter()
        .map(|index| {
            let mut rng = rng_for(seed, index as u64);
            let mut cells = Vec::with_capacity(BROWNIAN_CELLS);
            let mut states = Vec::with_capacity(BROWNIAN_CELLS + 1);
            let mut x = system.x0.clone();
            states.push(x.clone());
            let mut steps = vec![vec![0.0; BROWNIAN_DIM]; subgrid];
            for _ in 0..BROWNIAN_CELLS {
                for s in steps.iter_mut() {
                    for v in s.iter_mut() {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *v = sd * z;
                    }
                }
                let cell = cell_log_signature(&steps, &basis)?;
                for s in &steps {
                    x = system.step_flow(s).matvec(&x);
                }
                states.push(x.clone());
                cells.push(cell);
            }
            Ok(BrownianPath {
                index,
                cells,
                states,
            })
        })
        .collect()
}

/// Query cuts shared by every sample of a run: `m − 1` distinct interior grid indices.
pub fn brownian_cuts(m: usize, seed: u64) -> Result<Vec<usize>> {
    if m == 0 || m > BROWNIAN_CELLS {
        return Err(Error::Domain(format!("cannot cut {BROWNIAN_CELLS} cells into {m} intervals")));
    }
    let mut rng = rng_for(seed, (1u64 << 48) + m as u64);
    let mut cuts: Vec<usize> = sample_indices(&mut rng, BROWNIAN_CELLS - 1, m - 1)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    cuts.sort_unstable();
    cuts.insert(0, 0);
    cuts.push(BROWNIAN_CELLS);
    Ok(cuts)
}

pub fn gen_brownian(n_samples: usize, m: usize, seed: u64, subgrid: usize) -> Result<Vec<BrownianSample>> {
    if !BROWNIAN_INTERVALS.contains(&m) {
        return Err(Error::Domain(format!(
            "m must be one of {BROWNIAN_INTERVALS:?}, got {m}"
        )));
    }
    let cuts = brownian_cuts(m, seed)?;
    Ok(brownian_paths(0..n_samples, seed, subgrid, &BrownianSystem::default())?
        .iter()
        .map(|p| p.sample(&cuts))
        .collect())
}

/// Zeroes every level-2 coefficient of every cell.
pub fn truncate_to_level1(sample: &BrownianSample) -> BrownianSample {
    let cells = sample
        .cells
        .iter()
        .map(|c| {
            let b = c.basis();
            let mut coeffs = c.coeffs().to_vec();
            for i in b.level_range(1).end..coeffs.len() {
                coeffs[i] = 0.0;
            }
            LieElement::new(b.clone(), coeffs).expect("same basis")
        })
        .collect();
    BrownianSample {
        cells,
        cuts: sample.cuts.clone(),
        targets: sample.targets.clone(),
    }
}

impl BrownianSample {
    pub fn horizon(&self) -> f64 {
        1.0
    }

    /// Lie dimension of the stored per-cell records, counting only nonzero levels.
    pub fn input_dim(&self) -> usize {
        let Some(first) = self.cells.first() else {
            return 0;
        };
        let b = first.basis();
        let has_area = self
            .cells
            .iter()
            .any(|c| c.coeffs()[b.level_range(1).end..].iter().any(|&x| x != 0.0));
        if has_area {
            b.len()
        } else {
            b.level_range(1).len()
        }
    }

    /// One event per cell at the cell's start time carrying the running value of
    /// `W`, with the cell's level-2 part as the extra record when present.
    pub fn stream(&self) -> Result<ObservationStream> {
        let n = self.cells.len();
        let mut w = vec![0.0; BROWNIAN_DIM];
        let mut events = Vec::with_capacity(n);
        for (j, c) in self.cells.iter().enumerate() {
            let b = c.basis();
            for (k, wk) in w.iter_mut().enumerate() {
                *wk += c.coeffs()[k];
            }
            let mut ev = Event::new(j as f64 / n as f64, (0..BROWNIAN_DIM).collect(), w.clone());
            let lvl = b.level_range(1).end;
            if c.coeffs()[lvl..].iter().any(|&x| x != 0.0) {
                let mut coeffs = c.coeffs().to_vec();
                coeffs[..lvl].iter_mut().for_each(|x| *x = 0.0);
                ev = ev.with_extra(LieElement::new(b.clone(), coeffs)?);
            }
            events.push(ev);
        }
        ObservationStream::new(self.horizon(), BROWNIAN_DIM, events)
    }

    pub fn partition(&self) -> Result<QueryPartition> {
        let n = self.cells.len() as f64;
        QueryPartition::new(self.cuts.iter().map(|&c| c as f64 / n).collect())
    }

    /// Model input with physical time appended and counts off.
    pub fn training_sample(&self, depth: usize) -> Result<Sample> {
        let stream = self.stream()?;
        let cont = ContinuousChannels::time_only(self.horizon());
        let config = EmbeddingConfig::new(depth, false);
        embed_sample(&stream, &cont, &self.partition()?, self.targets.clone(), &config)
    }
}

pub fn brownian_training_set(samples: &[BrownianSample], depth: usize) -> Result<Vec<Sample>> {
    samples.par_iter().map(|s| s.training_sample(depth)).collect()
}
