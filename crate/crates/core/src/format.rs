//! Stream files (JSON Lines) and partition files (JSON arrays).
//!
//! The first line of a stream file is a header
//! `{"T": .., "d_disc": .., "d_cont": .., "continuous_knots": [{"t": .., "values": [..]}, ..], "time_channel": ..}`;
//! every further non-empty line is one event
//! `{"t": .., "channels": [..], "values": [..], "extra": {"dim": .., "depth": .., "coeffs": [..]}}`.
//! Channel indices are 0-based.

use serde::{Deserialize, Serialize};

use crate::embedding::{ContinuousChannels, Event, Knot, ObservationStream, QueryPartition};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamHeader {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub d_disc: usize,
    pub d_cont: usize,
    #[serde(default)]
    pub continuous_knots: Vec<Knot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_channel: Option<usize>,
}

pub fn write_stream(stream: &ObservationStream, cont: &ContinuousChannels) -> Result<String> {
    let header = StreamHeader {
        horizon: stream.horizon(),
        d_disc: stream.d_disc(),
        d_cont: cont.d_cont(),
        continuous_knots: cont.knots().to_vec(),
        time_channel: cont.time_channel(),
    };
    let mut out = to_json(&header)?;
    out.push('\n');
    for ev in stream.events() {
        out.push_str(&to_json(ev)?);
        out.push('\n');
    }
    Ok(out)
}

fn to_json<T: Serialize>(x: &T) -> Result<String> {
    serde_json::to_string(x).map_err(|e| Error::Stream(e.to_string()))
}

pub fn read_stream(text: &str) -> Result<(ObservationStream, ContinuousChannels)> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (hl, header) = lines
        .next()
        .ok_or_else(|| Error::Stream("stream file is empty".into()))?;
    let header: StreamHeader = serde_json::from_str(header)
        .map_err(|e| Error::Stream(format!("line {}: bad header: {e}", hl + 1)))?;
    let cont = ContinuousChannels::new(header.d_cont, header.continuous_knots, header.time_channel)
        .map_err(|e| Error::Stream(format!("line {}: {e}", hl + 1)))?;
    let mut events = Vec::new();
    for (i, line) in lines {
        let ev: Event = serde_json::from_str(line)
            .map_err(|e| Error::Stream(format!("line {}: bad event: {e}", i + 1)))?;
        events.push(ev);
    }
    let stream = ObservationStream::new(header.horizon, header.d_disc, events)?;
    Ok((stream, cont))
}

pub fn write_partition(p: &QueryPartition) -> Result<String> {
    to_json(p)
}

pub fn read_partition(text: &str) -> Result<QueryPartition> {
    serde_json::from_str(text).map_err(|e| Error::Interval(format!("bad partition file: {e}")))
}
