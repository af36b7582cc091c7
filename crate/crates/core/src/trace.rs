//! Uniform read access to simulation traces and their CSV export.
//!
//! Columns are addressed by channel name and one-based node id, the layout
//! used in every exported file: `time`, then `<channel>_<id>` for each
//! channel and node.

use std::io::Write;

use crate::error::{Error, Result};

pub trait TraceView {
    fn node_count(&self) -> usize;
    fn sample_times(&self) -> &[f64];
    /// Channel names in export order.
    fn channels(&self) -> &'static [&'static str];
    /// Value of `channel` at sample `k` for zero-based `node`.
    fn value(&self, channel: &str, k: usize, node: usize) -> Option<f64>;
}

fn header(channels: &[&str], nodes: &[usize]) -> Vec<String> {
    let mut h = vec!["time".to_string()];
    for ch in channels {
        h.extend(nodes.iter().map(|id| format!("{ch}_{id}")));
    }
    h
}

fn write_rows<T: TraceView + ?Sized, W: Write>(
    trace: &T,
    channels: &[&str],
    nodes: &[usize],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(channels, nodes)).map_err(csv_err)?;
    for (k, t) in trace.sample_times().iter().enumerate() {
        let mut row = Vec::with_capacity(1 + channels.len() * nodes.len());
        row.push(t.to_string());
        for ch in channels {
            for &id in nodes {
                let v = trace
                    .value(ch, k, id - 1)
                    .ok_or_else(|| Error::invalid("channel", format!("unknown channel {ch:?}")))?;
                row.push(v.to_string());
            }
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Full trace: every channel for every node.
pub fn write_trace_csv<T: TraceView + ?Sized, W: Write>(trace: &T, out: W) -> Result<()> {
    let nodes: Vec<usize> = (1..=trace.node_count()).collect();
    write_rows(trace, trace.channels(), &nodes, out)
}

/// One channel for selected one-based node ids.
pub fn write_panel_csv<T: TraceView + ?Sized, W: Write>(
    trace: &T,
    channel: &str,
    nodes: &[usize],
    out: W,
) -> Result<()> {
    if !trace.channels().contains(&channel) {
        return Err(Error::invalid(
            "channel",
            format!("unknown channel {channel:?}"),
        ));
    }
    if let Some(&bad) = nodes.iter().find(|&&id| id == 0 || id > trace.node_count()) {
        return Err(Error::UnknownNode(bad));
    }
    write_rows(trace, &[channel], nodes, out)
}
