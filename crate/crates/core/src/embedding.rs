//! Interval log-signatures of irregular observation streams.
//!
//! The driving space `R^{d_X}` is laid out as value coordinates
//! `0..d_disc`, then (optionally) count coordinates `d_disc..2·d_disc`, then
//! the continuously observed channels. Every event contributes a factor
//! `exp(Δ_i)`; the continuous channels contribute the signature of their
//! piecewise-linear path over each gap between events; an interval starting
//! at 0 is prefixed with the base-point factor `exp(C̃_0)`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{LieElement, LyndonBasis};
use crate::scan::{reduce_chunked, DEFAULT_CHUNK};
use crate::tensor::{TruncatedTensor, DEFAULT_MAX_DEPTH};

/// One observation event. Channels are 0-based and strictly increasing;
/// `values[j]` is the observation of `channels[j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub channels: Vec<usize>,
    pub values: Vec<f64>,
    /// Higher-order local record, over the value (and count) letters, with no level-1 part.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra: Option<LieElement>,
}

impl Event {
    pub fn new(t: f64, channels: Vec<usize>, values: Vec<f64>) -> Self {
        Event {
            t,
            channels,
            values,
            extra: None,
        }
    }

    pub fn with_extra(mut self, extra: LieElement) -> Self {
        self.extra = Some(extra);
        self
    }
}

/// Time-stamped events on `[0, T]` over `d_disc` discretely observed channels.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationStream {
    horizon: f64,
    d_disc: usize,
    events: Vec<Event>,
}

impl ObservationStream {
    pub fn new(horizon: f64, d_disc: usize, events: Vec<Event>) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Stream(format!("horizon must be positive, got {horizon}")));
        }
        let mut prev = f64::NEG_INFINITY;
        for (i, ev) in events.iter().enumerate() {
            if !ev.t.is_finite() || ev.t < 0.0 || ev.t > horizon {
                return Err(Error::Stream(format!(
                    "event {i} at t={} lies outside [0, {horizon}]",
                    ev.t
                )));
            }
            if ev.t <= prev {
                return Err(Error::Stream(format!(
                    "event times must be strictly increasing (event {i} at t={})",
                    ev.t
                )));
            }
            prev = ev.t;
            if ev.channels.is_empty() {
                return Err(Error::Stream(format!("event {i} observes no channel")));
            }
            if ev.channels.len() != ev.values.len() {
                return Err(Error::Stream(format!(
                    "event {i} has {} channels but {} values",
                    ev.channels.len(),
                    ev.values.len()
                )));
            }
            if ev.channels.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Stream(format!(
                    "event {i} channels must be strictly increasing"
                )));
            }
            if ev.channels.iter().any(|&k| k >= d_disc) {
                return Err(Error::Stream(format!(
                    "event {i} references a channel ≥ d_disc = {d_disc}"
                )));
            }
            if ev.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Stream(format!("event {i} has a non-finite value")));
            }
        }
        Ok(ObservationStream {
            horizon,
            d_disc,
            events,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn d_disc(&self) -> usize {
        self.d_disc
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    /// Events strictly before `t`, keeping the horizon.
    pub fn truncated_before(&self, t: f64) -> Self {
        ObservationStream {
            horizon: self.horizon,
            d_disc: self.d_disc,
            events: self.events.iter().filter(|e| e.t < t).cloned().collect(),
        }
    }
}

/// A knot of a piecewise-linear continuous path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    pub t: f64,
    pub values: Vec<f64>,
}

/// Continuously observed channels, given as a piecewise-linear path.
#[derive(Clone, Debug, PartialEq)]
pub struct ContinuousChannels {
    d_cont: usize,
    knots: Vec<Knot>,
    time_channel: Option<usize>,
}

impl ContinuousChannels {
    /// No continuous channels.
    pub fn none() -> Self {
        ContinuousChannels {
            d_cont: 0,
            knots: Vec::new(),
            time_channel: None,
        }
    }

    /// A single channel equal to physical time on `[0, T]`.
    pub fn time_only(horizon: f64) -> Self {
        ContinuousChannels {
            d_cont: 1,
            knots: vec![
                Knot {
                    t: 0.0,
                    values: vec![0.0],
                },
                Knot {
                    t: horizon,
                    values: vec![horizon],
                },
            ],
            time_channel: Some(0),
        }
    }

    pub fn new(d_cont: usize, knots: Vec<Knot>, time_channel: Option<usize>) -> Result<Self> {
        if d_cont == 0 {
            if time_channel.is_some() {
                return Err(Error::Stream("time channel set without continuous channels".into()));
            }
            return Ok(Self::none());
        }
        if knots.len() < 2 {
            return Err(Error::Stream("continuous channels need at least two knots".into()));
        }
        for (i, k) in knots.iter().enumerate() {
            if k.values.len() != d_cont {
                return Err(Error::Stream(format!(
                    "knot {i} has {} values, expected {d_cont}",
                    k.values.len()
                )));
            }
            if !k.t.is_finite() || k.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Stream(format!("knot {i} is not finite")));
            }
        }
        if knots.windows(2).any(|w| w[0].t >= w[1].t) {
            return Err(Error::Stream("knot times must be strictly increasing".into()));
        }
        if let Some(tau) = time_channel {
            if tau >= d_cont {
                return Err(Error::Stream(format!("time channel {tau} ≥ d_cont {d_cont}")));
            }
            for k in &knots {
                if (k.values[tau] - k.t).abs() > 1e-12 * k.t.abs().max(1.0) {
                    return Err(Error::Stream(format!(
                        "time channel reads {} at t={}",
                        k.values[tau], k.t
                    )));
                }
            }
        }
        Ok(ContinuousChannels {
            d_cont,
            knots,
            time_channel,
        })
    }

    pub fn d_cont(&self) -> usize {
        self.d_cont
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    pub fn time_channel(&self) -> Option<usize> {
        self.time_channel
    }

    fn check_covers(&self, horizon: f64) -> Result<()> {
        if self.d_cont == 0 {
            return Ok(());
        }
        let first = self.knots[0].t;
        let last = self.knots[self.knots.len() - 1].t;
        if first > 0.0 || last < horizon {
            return Err(Error::Stream(format!(
                "continuous knots span [{first}, {last}], need [0, {horizon}]"
            )));
        }
        Ok(())
    }

    /// Value of the path at `t` by linear interpolation.
    pub fn value_at(&self, t: f64) -> Vec<f64> {
        if self.d_cont == 0 {
            return Vec::new();
        }
        let j = self.knots.partition_point(|k| k.t <= t);
        if j == 0 {
            return self.knots[0].values.clone();
        }
        if j == self.knots.len() {
            return self.knots[j - 1].values.clone();
        }
        let a = &self.knots[j - 1];
        let b = &self.knots[j];
        if t == a.t {
            return a.values.clone();
        }
        let w = (t - a.t) / (b.t - a.t);
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| x + w * (y - x))
            .collect()
    }

    /// Breakpoints of `[u, v]`: `u`, the knots strictly inside, then `v`.
    pub fn breakpoints(&self, u: f64, v: f64) -> Vec<f64> {
        let mut pts = vec![u];
        pts.extend(self.knots.iter().map(|k| k.t).filter(|&t| t > u && t < v));
        if v > u {
            pts.push(v);
        }
        pts
    }

    /// Appends a physical-time channel and returns the extended path.
    pub fn with_time_channel(&self, horizon: f64) -> Result<Self> {
        if self.time_channel.is_some() {
            return Ok(self.clone());
        }
        if self.d_cont == 0 {
            return Ok(Self::time_only(horizon));
        }
        let knots = self
            .knots
            .iter()
            .map(|k| {
                let mut values = k.values.clone();
                values.push(k.t);
                Knot { t: k.t, values }
            })
            .collect();
        Self::new(self.d_cont + 1, knots, Some(self.d_cont))
    }

    /// Removes the time channel, if present.
    pub fn without_time_channel(&self) -> Result<Self> {
        let Some(tau) = self.time_channel else {
            return Ok(self.clone());
        };
        if self.d_cont == 1 {
            return Ok(Self::none());
        }
        let knots = self
            .knots
            .iter()
            .map(|k| {
                let mut values = k.values.clone();
                values.remove(tau);
                Knot { t: k.t, values }
            })
            .collect();
        Self::new(self.d_cont - 1, knots, None)
    }

    /// Compares two paths as functions on `[0, T]` by evaluating at the union of knots.
    pub fn max_abs_diff(&self, other: &Self, horizon: f64) -> f64 {
        if self.d_cont != other.d_cont {
            return f64::INFINITY;
        }
        if self.d_cont == 0 {
            return 0.0;
        }
        let mut ts: Vec<f64> = self
            .knots
            .iter()
            .chain(&other.knots)
            .map(|k| k.t.clamp(0.0, horizon))
            .collect();
        ts.push(0.0);
        ts.push(horizon);
        ts.iter()
            .map(|&t| {
                self.value_at(t)
                    .iter()
                    .zip(other.value_at(t))
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

/// Layout of the driving space `R^{d_X}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelLayout {
    pub d_disc: usize,
    pub d_cont: usize,
    pub include_counts: bool,
}

impl ChannelLayout {
    pub fn d_x(&self) -> usize {
        if self.include_counts {
            2 * self.d_disc + self.d_cont
        } else {
            self.d_disc + self.d_cont
        }
    }

    pub fn value_index(&self, k: usize) -> usize {
        k
    }

    pub fn count_index(&self, k: usize) -> Option<usize> {
        self.include_counts.then_some(self.d_disc + k)
    }

    pub fn cont_offset(&self) -> usize {
        if self.include_counts {
            2 * self.d_disc
        } else {
            self.d_disc
        }
    }
}

/// Embedding parameters that do not depend on the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub depth: usize,
    pub include_counts: bool,
    #[serde(default = "default_chunk")]
    pub chunk_size: usize,
    #[serde(default = "default_max_depth")]
    pub max_depth: usize,
}

fn default_chunk() -> usize {
    DEFAULT_CHUNK
}

fn default_max_depth() -> usize {
    DEFAULT_MAX_DEPTH
}

impl EmbeddingConfig {
    pub fn new(depth: usize, include_counts: bool) -> Self {
        EmbeddingConfig {
            depth,
            include_counts,
            chunk_size: DEFAULT_CHUNK,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }

    pub fn with_chunk_size(mut self, chunk: usize) -> Self {
        self.chunk_size = chunk.max(1);
        self
    }

    pub fn layout(&self, d_disc: usize, d_cont: usize) -> ChannelLayout {
        ChannelLayout {
            d_disc,
            d_cont,
            include_counts: self.include_counts,
        }
    }
}

/// Query points `0 = r_0 < … < r_M = T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct QueryPartition {
    points: Vec<f64>,
}

impl TryFrom<Vec<f64>> for QueryPartition {
    type Error = Error;

    fn try_from(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Interval("a partition needs at least two points".into()));
        }
        if points[0] != 0.0 {
            return Err(Error::Interval(format!(
                "partition must start at 0, starts at {}",
                points[0]
            )));
        }
        if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Interval("partition points must be strictly increasing".into()));
        }
        Ok(QueryPartition { points })
    }
}

impl From<QueryPartition> for Vec<f64> {
    fn from(p: QueryPartition) -> Self {
        p.points
    }
}

impl QueryPartition {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        Self::try_from(points)
    }

    /// The trivial partition `{0, T}`.
    pub fn whole(horizon: f64) -> Result<Self> {
        Self::new(vec![0.0, horizon])
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn horizon(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Number of intervals `M`.
    pub fn len(&self) -> usize {
        self.points.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.windows(2).map(|w| (w[0], w[1]))
    }
}

/// Sequential fold or chunked parallel reduction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComposeMode {
    Sequential,
    Parallel,
}

/// Precomputed per-event data for one `(stream, C, config)` triple.
pub struct Embedder<'a> {
    stream: &'a ObservationStream,
    cont: &'a ContinuousChannels,
    config: &'a EmbeddingConfig,
    layout: ChannelLayout,
    basis: Arc<LyndonBasis>,
    increments: Vec<Vec<f64>>,
}

impl<'a> Embedder<'a> {
    pub fn new(
        stream: &'a ObservationStream,
        cont: &'a ContinuousChannels,
        config: &'a EmbeddingConfig,
    ) -> Result<Self> {
        if config.depth == 0 {
            return Err(Error::Shape("depth must be positive".into()));
        }
        if config.depth > config.max_depth {
            return Err(Error::DepthCap {
                depth: config.depth,
                max: config.max_depth,
            });
        }
        cont.check_covers(stream.horizon())?;
        let layout = config.layout(stream.d_disc(), cont.d_cont());
        if layout.d_x() == 0 {
            return Err(Error::Shape("driving space is empty".into()));
        }
        let basis = LyndonBasis::shared(layout.d_x(), config.depth)?;
        let mut last = vec![0.0; stream.d_disc()];
        let increments = stream
            .events()
            .iter()
            .map(|ev| {
                let mut delta = vec![0.0; layout.d_x()];
                for (&k, &x) in ev.channels.iter().zip(&ev.values) {
                    delta[layout.value_index(k)] = x - last[k];
                    if let Some(c) = layout.count_index(k) {
                        delta[c] = 1.0;
                    }
                    last[k] = x;
                }
                delta
            })
            .collect();
        Ok(Embedder {
            stream,
            cont,
            config,
            layout,
            basis,
            increments,
        })
    }

    pub fn layout(&self) -> ChannelLayout {
        self.layout
    }

    pub fn basis(&self) -> &Arc<LyndonBasis> {
        &self.basis
    }

    fn depth(&self) -> usize {
        self.config.depth
    }

    pub fn increment(&self, i: usize) -> Result<&[f64]> {
        self.increments
            .get(i)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Domain(format!("event index {i} out of range")))
    }

    /// `Δ_i` as a tensor: `δ_i` in degree one plus the embedded extra record.
    pub fn event_lie_tensor(&self, i: usize) -> Result<TruncatedTensor> {
        let d_x = self.layout.d_x();
        let mut t = TruncatedTensor::zeros_with_cap(d_x, self.depth(), self.config.max_depth)?;
        t.level_mut(1).copy_from_slice(self.increment(i)?);
        if let Some(extra) = &self.stream.events()[i].extra {
            let higher = self.embed_extra(extra)?;
            t = t.add(&higher)?;
        }
        Ok(t)
    }

    fn embed_extra(&self, extra: &LieElement) -> Result<TruncatedTensor> {
        let b = extra.basis();
        let allowed = self.layout.cont_offset();
        if b.dim() > self.layout.d_x() {
            return Err(Error::Domain(format!(
                "extra record over {} letters exceeds d_X = {}",
                b.dim(),
                self.layout.d_x()
            )));
        }
        for i in b.level_range(1) {
            if extra.coeffs()[i] != 0.0 {
                return Err(Error::Domain(
                    "extra record must not carry a level-1 part".into(),
                ));
            }
        }
        for (w, &c) in b.words().iter().zip(extra.coeffs()) {
            if c != 0.0 && w.iter().any(|&l| l >= allowed) {
                return Err(Error::Domain(format!(
                    "extra record uses coordinate {} outside the first {allowed}",
                    w.iter().max().copied().unwrap_or(0)
                )));
            }
        }
        let map: Vec<usize> = (0..b.dim()).collect();
        extra
            .to_tensor()
            .embed_letters(self.layout.d_x(), self.depth(), &map)
    }

    /// `E_i = exp(Δ_i)`.
    pub fn event_factor(&self, i: usize) -> Result<TruncatedTensor> {
        if self.stream.events().get(i).is_none() {
            return Err(Error::Domain(format!("event index {i} out of range")));
        }
        if self.stream.events()[i].extra.is_none() {
            let mut t = TruncatedTensor::zeros_unchecked(self.layout.d_x(), self.depth());
            t.fill_segment(&self.increments[i]);
            return Ok(t);
        }
        self.event_lie_tensor(i)?.exp()
    }

    fn embed_cont(&self, c: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.layout.d_x()];
        let off = self.layout.cont_offset();
        v[off..off + c.len()].copy_from_slice(c);
        v
    }

    /// Segment factors of `C̃` over `[u, v]`, one per linear piece.
    fn gap_pieces(&self, u: f64, v: f64, out: &mut Vec<TruncatedTensor>) {
        if self.cont.d_cont() == 0 || v <= u {
            return;
        }
        let pts = self.cont.breakpoints(u, v);
        let mut prev = self.cont.value_at(pts[0]);
        for &t in &pts[1..] {
            let cur = self.cont.value_at(t);
            let inc: Vec<f64> = cur.iter().zip(&prev).map(|(a, b)| a - b).collect();
            let mut f = TruncatedTensor::zeros_unchecked(self.layout.d_x(), self.depth());
            f.fill_segment(&self.embed_cont(&inc));
            out.push(f);
            prev = cur;
        }
    }

    /// `Γ_{u,v}`, the signature of `C̃` over `[u, v]`.
    pub fn gap_factor(&self, u: f64, v: f64) -> Result<TruncatedTensor> {
        if !(u <= v) || u < 0.0 || v > self.stream.horizon() {
            return Err(Error::Interval(format!("gap [{u}, {v}] is not inside [0, T]")));
        }
        let mut pieces = Vec::new();
        self.gap_pieces(u, v, &mut pieces);
        crate::tensor::product(self.layout.d_x(), self.depth(), &pieces)
    }

    /// `B_C = exp(C̃_0)`.
    pub fn base_point_factor(&self) -> TruncatedTensor {
        let mut f = TruncatedTensor::zeros_unchecked(self.layout.d_x(), self.depth());
        f.fill_segment(&self.embed_cont(&self.cont.value_at(0.0)));
        f
    }

    /// Indices of the events assigned to `[α, β)`; events at `T` go to the final interval.
    pub fn events_in(&self, alpha: f64, beta: f64) -> std::ops::Range<usize> {
        let ev = self.stream.events();
        let lo = ev.partition_point(|e| e.t < alpha);
        let hi = if beta >= self.stream.horizon() {
            ev.partition_point(|e| e.t <= beta)
        } else {
            ev.partition_point(|e| e.t < beta)
        };
        lo..hi.max(lo)
    }

    fn check_interval(&self, alpha: f64, beta: f64) -> Result<()> {
        if !(alpha >= 0.0 && alpha < beta && beta <= self.stream.horizon()) {
            return Err(Error::Interval(format!(
                "[{alpha}, {beta}) is not a valid query interval in [0, {}]",
                self.stream.horizon()
            )));
        }
        Ok(())
    }

    /// Ordered elementary factors whose product is `G_{α,β}`.
    pub fn interval_factors(&self, alpha: f64, beta: f64) -> Result<Vec<TruncatedTensor>> {
        self.check_interval(alpha, beta)?;
        let mut out = Vec::new();
        if alpha == 0.0 && self.cont.d_cont() > 0 {
            out.push(self.base_point_factor());
        }
        let mut cursor = alpha;
        for i in self.events_in(alpha, beta) {
            let t = self.stream.events()[i].t;
            self.gap_pieces(cursor, t, &mut out);
            out.push(self.event_factor(i)?);
            cursor = t;
        }
        self.gap_pieces(cursor, beta, &mut out);
        Ok(out)
    }

    fn compose(&self, factors: &[TruncatedTensor], mode: ComposeMode) -> TruncatedTensor {
        let unit = || TruncatedTensor::unit_unchecked(self.layout.d_x(), self.depth());
        let combine = |a: &TruncatedTensor, b: &TruncatedTensor| a.mul_unchecked(b);
        let prod = match mode {
            ComposeMode::Sequential => crate::scan::fold_sequential(factors, combine),
            ComposeMode::Parallel => reduce_chunked(factors, self.config.chunk_size, combine),
        };
        prod.unwrap_or_else(unit)
    }

    /// `G_{α,β}`.
    pub fn interval_signature(&self, alpha: f64, beta: f64, mode: ComposeMode) -> Result<TruncatedTensor> {
        let factors = self.interval_factors(alpha, beta)?;
        let g = self.compose(&factors, mode);
        g.check_finite("interval signature")?;
        Ok(g)
    }

    /// `Φ_{α,β} = log G_{α,β}` in Lyndon coordinates.
    pub fn interval_log_signature(&self, alpha: f64, beta: f64, mode: ComposeMode) -> Result<LieElement> {
        let g = self.interval_signature(alpha, beta, mode)?;
        LieElement::from_tensor(&g.log()?, self.basis.clone())
    }

    /// `(Φ_{r_0,r_1}, …, Φ_{r_{M-1},r_M})`.
    pub fn partition_log_signatures(
        &self,
        partition: &QueryPartition,
        mode: ComposeMode,
    ) -> Result<Vec<LieElement>> {
        if partition.horizon() != self.stream.horizon() {
            return Err(Error::Interval(format!(
                "partition ends at {}, stream horizon is {}",
                partition.horizon(),
                self.stream.horizon()
            )));
        }
        let intervals: Vec<(f64, f64)> = partition.intervals().collect();
        match mode {
            ComposeMode::Sequential => intervals
                .iter()
                .map(|&(a, b)| self.interval_log_signature(a, b, mode))
                .collect(),
            ComposeMode::Parallel => intervals
                .par_iter()
                .map(|&(a, b)| self.interval_log_signature(a, b, mode))
                .collect(),
        }
    }
}

/// `δ_i` for event `i`.
pub fn event_increment(
    stream: &ObservationStream,
    i: usize,
    config: &EmbeddingConfig,
    cont: &ContinuousChannels,
) -> Result<Vec<f64>> {
    Ok(Embedder::new(stream, cont, config)?.increment(i)?.to_vec())
}

/// `E_i = exp(Δ_i)` for event `i`.
pub fn event_factor(
    stream: &ObservationStream,
    i: usize,
    config: &EmbeddingConfig,
    cont: &ContinuousChannels,
) -> Result<TruncatedTensor> {
    Embedder::new(stream, cont, config)?.event_factor(i)
}

/// `Γ_{u,v}` for the continuous channels embedded after `d_disc` discrete channels.
pub fn gap_factor(
    cont: &ContinuousChannels,
    u: f64,
    v: f64,
    d_disc: usize,
    config: &EmbeddingConfig,
) -> Result<TruncatedTensor> {
    let horizon = cont.knots().last().map_or(v, |k| k.t).max(v);
    let stream = ObservationStream::new(horizon.max(f64::MIN_POSITIVE), d_disc, Vec::new())?;
    if u > v {
        return Err(Error::Interval(format!("gap start {u} exceeds end {v}")));
    }
    Embedder::new(&stream, cont, config)?.gap_factor(u, v)
}

pub fn interval_signature(
    stream: &ObservationStream,
    cont: &ContinuousChannels,
    alpha: f64,
    beta: f64,
    config: &EmbeddingConfig,
) -> Result<TruncatedTensor> {
    Embedder::new(stream, cont, config)?.interval_signature(alpha, beta, ComposeMode::Sequential)
}

pub fn interval_log_signature(
    stream: &ObservationStream,
    cont: &ContinuousChannels,
    alpha: f64,
    beta: f64,
    config: &EmbeddingConfig,
) -> Result<LieElement> {
    Embedder::new(stream, cont, config)?.interval_log_signature(alpha, beta, ComposeMode::Sequential)
}

pub fn partition_log_signatures(
    stream: &ObservationStream,
    cont: &ContinuousChannels,
    partition: &QueryPartition,
    config: &EmbeddingConfig,
    mode: ComposeMode,
) -> Result<Vec<LieElement>> {
    Embedder::new(stream, cont, config)?.partition_log_signatures(partition, mode)
}
