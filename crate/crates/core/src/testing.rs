//! Random inputs for property tests and benchmarks.

use std::sync::Arc;

use rand::Rng;

use crate::embedding::{ContinuousChannels, Event, Knot, ObservationStream, QueryPartition};
use crate::lie::{LieElement, LyndonBasis};
use crate::tensor::{product, TruncatedTensor};

/// Tensor with zero scalar part and entries uniform in `±scale`.
pub fn random_tensor(rng: &mut impl Rng, dim: usize, depth: usize, scale: f64) -> TruncatedTensor {
    let mut t = TruncatedTensor::zeros(dim, depth).expect("valid shape");
    for k in 1..=depth {
        for x in t.level_mut(k) {
            *x = rng.random_range(-scale..=scale);
        }
    }
    t
}

pub fn random_vector(rng: &mut impl Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-scale..=scale)).collect()
}

/// Increments of a random piecewise-linear path.
pub fn random_path(rng: &mut impl Rng, dim: usize, segments: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..segments).map(|_| random_vector(rng, dim, scale)).collect()
}

/// Signature of a piecewise-linear path given by its increments.
pub fn path_signature(increments: &[Vec<f64>], dim: usize, depth: usize) -> TruncatedTensor {
    let factors: Vec<TruncatedTensor> = increments
        .iter()
        .map(|v| TruncatedTensor::segment_signature(v, depth).expect("finite increment"))
        .collect();
    product(dim, depth, &factors).expect("matching shapes")
}

pub fn random_lie(rng: &mut impl Rng, basis: &Arc<LyndonBasis>, scale: f64) -> LieElement {
    let coeffs = random_vector(rng, basis.len(), scale);
    LieElement::new(basis.clone(), coeffs).expect("basis length")
}

#[derive(Clone, Debug)]
pub struct StreamShape {
    pub horizon: f64,
    pub d_disc: usize,
    /// Continuous channels besides time.
    pub extra_cont: usize,
    pub with_time: bool,
    pub max_events: usize,
    /// Integer values and dyadic times, so decoding is exact.
    pub integer_valued: bool,
}

impl StreamShape {
    pub fn new(d_disc: usize, max_events: usize) -> Self {
        StreamShape {
            horizon: 4.0,
            d_disc,
            extra_cont: 0,
            with_time: true,
            max_events,
            integer_valued: false,
        }
    }
}

fn random_time(rng: &mut impl Rng, shape: &StreamShape) -> f64 {
    if shape.integer_valued {
        let ticks = (shape.horizon * 64.0) as u32;
        rng.random_range(1..=ticks) as f64 / 64.0
    } else {
        rng.random_range(0.0..=shape.horizon)
    }
}

fn random_value(rng: &mut impl Rng, shape: &StreamShape) -> f64 {
    if shape.integer_valued {
        rng.random_range(-5..=5) as f64
    } else {
        rng.random_range(-2.0..=2.0)
    }
}

/// Random event times in `(0, T]`, one or more channels per event. Events at `t = 0` are excluded.
pub fn random_stream(rng: &mut impl Rng, shape: &StreamShape) -> ObservationStream {
    let n = rng.random_range(0..=shape.max_events);
    let mut times: Vec<f64> = (0..n)
        .map(|_| random_time(rng, shape))
        .filter(|&t| t > 0.0)
        .collect();
    if shape.max_events > 0 && rng.random_bool(0.2) {
        times.push(shape.horizon);
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    let events = times
        .into_iter()
        .map(|t| {
            let mut channels: Vec<usize> = (0..shape.d_disc).filter(|_| rng.random_bool(0.6)).collect();
            if channels.is_empty() {
                channels.push(rng.random_range(0..shape.d_disc));
            }
            let values = channels.iter().map(|_| random_value(rng, shape)).collect();
            Event::new(t, channels, values)
        })
        .collect();
    ObservationStream::new(shape.horizon, shape.d_disc, events).expect("valid stream")
}

/// Piecewise-linear continuous channels on `[0, T]`, time last when requested.
pub fn random_continuous(rng: &mut impl Rng, shape: &StreamShape) -> ContinuousChannels {
    let d_cont = shape.extra_cont + usize::from(shape.with_time);
    if d_cont == 0 {
        return ContinuousChannels::none();
    }
    let mut times = vec![0.0, shape.horizon];
    for _ in 0..rng.random_range(0..4) {
        times.push(random_time(rng, shape));
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    let knots = times
        .into_iter()
        .map(|t| {
            let mut values: Vec<f64> = (0..shape.extra_cont).map(|_| random_value(rng, shape)).collect();
            if shape.with_time {
                values.push(t);
            }
            Knot { t, values }
        })
        .collect();
    let time = shape.with_time.then_some(shape.extra_cont);
    ContinuousChannels::new(d_cont, knots, time).expect("valid knots")
}

/// Interval `[α, β)` inside `[0, T]`; sometimes anchored at either end.
pub fn random_interval(rng: &mut impl Rng, horizon: f64) -> (f64, f64) {
    loop {
        let mut a = rng.random_range(0.0..horizon);
        let mut b = rng.random_range(0.0..=horizon);
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        if rng.random_bool(0.25) {
            a = 0.0;
        }
        if rng.random_bool(0.25) {
            b = horizon;
        }
        if a < b {
            return (a, b);
        }
    }
}

/// `0 = r_0 < … < r_m = T` with `m − 1` uniform interior points.
pub fn random_partition(rng: &mut impl Rng, horizon: f64, m: usize) -> QueryPartition {
    loop {
        let mut p: Vec<f64> = (1..m).map(|_| rng.random_range(0.0..horizon)).collect();
        p.push(0.0);
        p.push(horizon);
        p.sort_by(f64::total_cmp);
        p.dedup();
        if p.len() == m + 1 {
            return QueryPartition::new(p).expect("strictly increasing");
        }
    }
}
