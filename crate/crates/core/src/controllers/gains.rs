//! Plain-text gains file: a header line `n gamma`, then the `K`, `F`, `L`
//! and `C` matrices, `n` rows each, whitespace-separated and row-major.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use super::HinfController;
use crate::error::{Error, Result};

pub fn write_gains<W: Write>(ctrl: &HinfController, mut out: W) -> Result<()> {
    let n = ctrl.n();
    writeln!(out, "{n} {}", ctrl.gamma)?;
    for m in [&ctrl.gain, &ctrl.drift, &ctrl.innovation, &ctrl.measurement] {
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| m[(i, j)].to_string()).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
    }
    Ok(())
}

pub fn read_gains<R: BufRead>(input: R) -> Result<HinfController> {
    let mut lines = input
        .lines()
        .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()));
    let header = lines
        .next()
        .ok_or_else(|| Error::GainsFormat("missing header".into()))??;
    let mut fields = header.split_whitespace();
    let n: usize = fields
        .next()
        .and_then(|s| s.parse().ok())
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::GainsFormat(format!("bad dimension in header {header:?}")))?;
    let gamma: f64 = fields
        .next()
        .and_then(|s| s.parse().ok())
        .filter(|g: &f64| *g > 0.0)
        .ok_or_else(|| Error::GainsFormat(format!("bad gamma in header {header:?}")))?;

    let mut blocks = Vec::with_capacity(4);
    for name in ["K", "F", "L", "C"] {
        let mut entries = Vec::with_capacity(n * n);
        for row in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| Error::GainsFormat(format!("{name}: missing row {}", row + 1)))??;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::GainsFormat(format!("{name} row {}: {e}", row + 1)))?;
            if vals.len() != n {
                return Err(Error::GainsFormat(format!(
                    "{name} row {}: expected {n} entries, got {}",
                    row + 1,
                    vals.len()
                )));
            }
            entries.extend(vals);
        }
        blocks.push(DMatrix::from_row_slice(n, n, &entries));
    }
    if let Some(extra) = lines.next() {
        return Err(Error::GainsFormat(format!("trailing content {:?}", extra?)));
    }
    let measurement = blocks.pop().unwrap();
    let innovation = blocks.pop().unwrap();
    let drift = blocks.pop().unwrap();
    let gain = blocks.pop().unwrap();
    Ok(HinfController {
        gain,
        drift,
        innovation,
        measurement,
        gamma,
        x_hat: DVector::zeros(n),
    })
}
