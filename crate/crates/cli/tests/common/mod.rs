#![allow(dead_code)]

use std::path::Path;

use filterlab::{parse_config, ScenarioConfig};

pub fn config(text: &str, out: &Path) -> ScenarioConfig {
    let mut cfg = parse_config(text).expect("test config parses");
    cfg.output.dir = out.to_path_buf();
    cfg
}

/// Header and rows of a numeric CSV.
pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| {
            rec.unwrap()
                .iter()
                .map(|v| v.parse::<f64>().unwrap())
                .collect()
        })
        .collect();
    (header, rows)
}

fn channel_sq(header: &[String], row: &[f64], prefixes: &[&str]) -> f64 {
    header
        .iter()
        .zip(row)
        .filter(|(h, _)| {
            prefixes.iter().any(|p| {
                h.strip_prefix(p)
                    .is_some_and(|rest| rest.parse::<usize>().is_ok())
            })
        })
        .map(|(_, v)| v * v)
        .sum()
}

/// `(||z||^2, ||w||^2)` from a fluid trace file: trapezoid over samples.
pub fn fluid_costs_from_trace(path: &Path) -> (f64, f64) {
    let (h, rows) = read_csv(path);
    let (mut z, mut w) = (0.0, 0.0);
    for k in 1..rows.len() {
        let dt = rows[k][0] - rows[k - 1][0];
        z += 0.5 * dt * (channel_sq(&h, &rows[k - 1], &["z_"]) + channel_sq(&h, &rows[k], &["z_"]));
        w += 0.5
            * dt
            * (channel_sq(&h, &rows[k - 1], &["wa_", "wn_"])
                + channel_sq(&h, &rows[k], &["wa_", "wn_"]));
    }
    (z, w)
}

/// `(||z||^2, ||w||^2)` from a packet trace file: per-interval sums.
pub fn packet_costs_from_trace(path: &Path, interval: f64) -> (f64, f64) {
    let (h, rows) = read_csv(path);
    let z = rows
        .iter()
        .map(|r| interval * channel_sq(&h, r, &["z_"]))
        .sum();
    let w = rows
        .iter()
        .map(|r| interval * channel_sq(&h, r, &["w_", "m_"]))
        .sum();
    (z, w)
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
