//! Continuous realization of an observation stream on an auxiliary time axis.
//!
//! The realized path starts at the origin, moves to the continuous base
//! point over `[0, 1]`, then alternates between stretches where only the
//! continuous channels move (unit speed in time) and unit-length event
//! segments where only the value and count coordinates move. Brute-force
//! signatures of this path are the reference for the algebraic embedding.

use serde::{Deserialize, Serialize};

use crate::embedding::{
    ChannelLayout, ContinuousChannels, Embedder, EmbeddingConfig, Event, Knot, ObservationStream,
};
use crate::error::{Error, Result};
use crate::tensor::TruncatedTensor;

/// Time-channel plateau tolerance.
pub const PLATEAU_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Initial,
    Gap,
    Event,
}

/// A linear piece `start → end` over auxiliary times `[a0, a1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a0: f64,
    pub a1: f64,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub kind: SegmentKind,
}

impl Segment {
    fn point_at(&self, u: f64) -> Vec<f64> {
        if u <= self.a0 {
            return self.start.clone();
        }
        if u >= self.a1 {
            return self.end.clone();
        }
        let w = (u - self.a0) / (self.a1 - self.a0);
        self.start
            .iter()
            .zip(&self.end)
            .map(|(x, y)| x + w * (y - x))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizedPath {
    pub aux_horizon: f64,
    pub horizon: f64,
    pub layout: ChannelLayout,
    pub time_index: usize,
    pub segments: Vec<Segment>,
    /// Auxiliary interval of each event.
    pub event_markers: Vec<(f64, f64)>,
}

impl RealizedPath {
    pub fn d_x(&self) -> usize {
        self.layout.d_x()
    }

    /// The path at auxiliary time `u`.
    pub fn point_at(&self, u: f64) -> Vec<f64> {
        let i = self.segments.partition_point(|s| s.a1 < u);
        match self.segments.get(i) {
            Some(s) => s.point_at(u),
            None => self
                .segments
                .last()
                .map(|s| s.end.clone())
                .unwrap_or_else(|| vec![0.0; self.d_x()]),
        }
    }

    /// Splits every event segment in two halves of equal duration, the first
    /// covering `fraction` of the displacement.
    pub fn reparameterize_events(&self, fraction: f64) -> Self {
        let mut segments = Vec::with_capacity(self.segments.len() + self.event_markers.len());
        for s in &self.segments {
            if s.kind != SegmentKind::Event {
                segments.push(s.clone());
                continue;
            }
            let mid_a = 0.5 * (s.a0 + s.a1);
            let mid: Vec<f64> = s
                .start
                .iter()
                .zip(&s.end)
                .map(|(x, y)| x + fraction * (y - x))
                .collect();
            segments.push(Segment {
                a0: s.a0,
                a1: mid_a,
                start: s.start.clone(),
                end: mid.clone(),
                kind: SegmentKind::Event,
            });
            segments.push(Segment {
                a0: mid_a,
                a1: s.a1,
                start: mid,
                end: s.end.clone(),
                kind: SegmentKind::Event,
            });
        }
        RealizedPath {
            segments,
            ..self.clone()
        }
    }
}

/// Builds the realized path of `(stream, C)`; `C` must carry a time channel.
pub fn realize(
    stream: &ObservationStream,
    cont: &ContinuousChannels,
    config: &EmbeddingConfig,
) -> Result<RealizedPath> {
    let tau = cont
        .time_channel()
        .ok_or_else(|| Error::Unsupported("realization requires a time channel".into()))?;
    if stream.events().iter().any(|e| e.extra.is_some()) {
        return Err(Error::Unsupported(
            "realization covers degree-one events only".into(),
        ));
    }
    let emb = Embedder::new(stream, cont, config)?;
    let layout = emb.layout();
    let d_x = layout.d_x();
    let off = layout.cont_offset();
    let horizon = stream.horizon();
    let m = stream.len();

    let with_cont = |disc: &[f64], t: f64| {
        let mut p = disc.to_vec();
        p[off..].copy_from_slice(&cont.value_at(t));
        p
    };

    let mut segments = Vec::new();
    let mut markers = Vec::with_capacity(m);
    let origin = vec![0.0; d_x];
    let mut cur = with_cont(&origin, 0.0);
    segments.push(Segment {
        a0: 0.0,
        a1: 1.0,
        start: origin,
        end: cur.clone(),
        kind: SegmentKind::Initial,
    });

    let push_gap = |segments: &mut Vec<Segment>, cur: &mut Vec<f64>, u: f64, v: f64, shift: f64| {
        let pts = cont.breakpoints(u, v);
        for w in pts.windows(2) {
            let end = with_cont(cur, w[1]);
            segments.push(Segment {
                a0: w[0] + shift,
                a1: w[1] + shift,
                start: cur.clone(),
                end: end.clone(),
                kind: SegmentKind::Gap,
            });
            *cur = end;
        }
    };

    let mut t_prev = 0.0;
    for (i, ev) in stream.events().iter().enumerate() {
        let shift = 1.0 + i as f64;
        push_gap(&mut segments, &mut cur, t_prev, ev.t, shift);
        let a0 = 1.0 + ev.t + i as f64;
        let mut end = cur.clone();
        for (e, d) in end.iter_mut().zip(emb.increment(i)?) {
            *e += d;
        }
        segments.push(Segment {
            a0,
            a1: a0 + 1.0,
            start: cur.clone(),
            end: end.clone(),
            kind: SegmentKind::Event,
        });
        markers.push((a0, a0 + 1.0));
        cur = end;
        t_prev = ev.t;
    }
    push_gap(&mut segments, &mut cur, t_prev, horizon, 1.0 + m as f64);

    Ok(RealizedPath {
        aux_horizon: horizon + m as f64 + 1.0,
        horizon,
        layout,
        time_index: off + tau,
        segments,
        event_markers: markers,
    })
}

/// Auxiliary times `(a, b)` bracketing the physical interval `[α, β)`.
pub fn aux_bounds(path: &RealizedPath, alpha: f64, beta: f64) -> Result<(f64, f64)> {
    if !(alpha >= 0.0 && alpha < beta && beta <= path.horizon) {
        return Err(Error::Interval(format!(
            "[{alpha}, {beta}) is not inside [0, {}]",
            path.horizon
        )));
    }
    let a = first_hit(path, alpha)?;
    let b = if beta == path.horizon {
        path.aux_horizon
    } else {
        first_hit(path, beta)?
    };
    Ok((a, b))
}

/// Infimum of the auxiliary times at which the time channel equals `t`.
fn first_hit(path: &RealizedPath, t: f64) -> Result<f64> {
    let k = path.time_index;
    for s in &path.segments {
        let (t0, t1) = (s.start[k], s.end[k]);
        if t0 == t {
            return Ok(s.a0);
        }
        if t0 < t && t <= t1 {
            return Ok(s.a0 + (t - t0) / (t1 - t0) * (s.a1 - s.a0));
        }
    }
    Err(Error::Interval(format!("time channel never reaches {t}")))
}

/// Signature of the path restricted to `[a, b]`, one factor per linear piece.
pub fn brute_signature(path: &RealizedPath, a: f64, b: f64, depth: usize) -> Result<TruncatedTensor> {
    if !(0.0 <= a && a <= b && b <= path.aux_horizon) {
        return Err(Error::Interval(format!(
            "[{a}, {b}] is not inside [0, {}]",
            path.aux_horizon
        )));
    }
    let d = path.d_x();
    let mut sig = TruncatedTensor::unit(d, depth)?;
    for s in &path.segments {
        let lo = s.a0.max(a);
        let hi = s.a1.min(b);
        if hi <= lo {
            continue;
        }
        let p = s.point_at(lo);
        let q = s.point_at(hi);
        let inc: Vec<f64> = q.iter().zip(&p).map(|(x, y)| x - y).collect();
        sig = sig.mul(&TruncatedTensor::segment_signature(&inc, depth)?)?;
    }
    Ok(sig)
}

/// Recovers the stream and the continuous channels from a realized path.
pub fn decode(path: &RealizedPath) -> Result<(ObservationStream, ContinuousChannels)> {
    let layout = path.layout;
    if !layout.include_counts {
        return Err(Error::Unsupported("decoding requires count coordinates".into()));
    }
    let k = path.time_index;
    let off = layout.cont_offset();
    if k < off || k >= layout.d_x() {
        return Err(Error::NotRealization(format!("time index {k} is not a continuous coordinate")));
    }
    let bad = |msg: String| Error::NotRealization(msg);
    let first = path
        .segments
        .first()
        .ok_or_else(|| bad("path has no segments".into()))?;
    if first.start.iter().any(|&x| x != 0.0) || first.end[k].abs() > PLATEAU_TOL {
        return Err(bad("path does not start with an initial segment at the origin".into()));
    }
    if first.end[..off].iter().any(|&x| x != 0.0) {
        return Err(bad("initial segment moves discrete coordinates".into()));
    }

    let d_disc = layout.d_disc;
    let mut knots = vec![Knot {
        t: 0.0,
        values: first.end[off..].to_vec(),
    }];
    let mut events: Vec<Event> = Vec::new();
    let mut values = vec![0.0; d_disc];
    let mut pending: Option<(f64, Vec<f64>)> = None;

    let mut flush = |pending: &mut Option<(f64, Vec<f64>)>, events: &mut Vec<Event>| -> Result<()> {
        let Some((t, delta)) = pending.take() else {
            return Ok(());
        };
        let mut channels = Vec::new();
        let mut vals = Vec::new();
        for ch in 0..d_disc {
            let count = delta[d_disc + ch];
            if (count - 1.0).abs() <= PLATEAU_TOL {
                values[ch] += delta[ch];
                channels.push(ch);
                vals.push(values[ch]);
            } else if count.abs() <= PLATEAU_TOL {
                if delta[ch] != 0.0 {
                    return Err(bad(format!("channel {ch} moves without being observed at t={t}")));
                }
            } else {
                return Err(bad(format!("count increment {count} at t={t}")));
            }
        }
        if channels.is_empty() {
            return Err(bad(format!("event at t={t} observes no channel")));
        }
        events.push(Event::new(t, channels, vals));
        Ok(())
    };

    for s in &path.segments[1..] {
        let dt = s.end[k] - s.start[k];
        if dt.abs() <= PLATEAU_TOL {
            if s.end[off..]
                .iter()
                .zip(&s.start[off..])
                .any(|(x, y)| (x - y).abs() > PLATEAU_TOL)
            {
                return Err(bad("continuous coordinates move on a time plateau".into()));
            }
            let sig = TruncatedTensor::segment_signature(
                &s.end.iter().zip(&s.start).map(|(x, y)| x - y).collect::<Vec<_>>(),
                1,
            )?;
            let inc = sig.log()?.level(1).to_vec();
            match &mut pending {
                Some((_, delta)) => {
                    for (d, x) in delta.iter_mut().zip(&inc) {
                        *d += x;
                    }
                }
                None => pending = Some((s.start[k], inc)),
            }
        } else if dt > 0.0 {
            flush(&mut pending, &mut events)?;
            if s.start[..off] != s.end[..off] {
                return Err(bad("discrete coordinates move between events".into()));
            }
            let t = s.end[k];
            if knots.last().is_none_or(|kn| kn.t < t) {
                knots.push(Knot {
                    t,
                    values: s.end[off..].to_vec(),
                });
            }
        } else {
            return Err(bad("time channel decreases".into()));
        }
    }
    flush(&mut pending, &mut events)?;

    let stream = ObservationStream::new(path.horizon, d_disc, events)?;
    if knots.len() < 2 {
        return Err(bad("path never advances the time channel".into()));
    }
    let cont = ContinuousChannels::new(layout.d_cont, knots, Some(k - off))?;
    Ok((stream, cont))
}
