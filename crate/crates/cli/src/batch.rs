use std::io::Write;
use std::path::{Path, PathBuf};

use filterlab_core::controllers::{ControllerPolicy, ResponseKind};
use filterlab_core::fluidsim::{run_scenario, AttackKind, Disturbance, SimTrace};
use filterlab_core::packetsim::{PacketRunner, PacketSimTrace};
use filterlab_core::riccati::find_gamma_star;
use filterlab_core::trace::{write_panel_csv, write_trace_csv, TraceView};
use rayon::prelude::*;

use crate::config::{Grid, ScenarioConfig, Simulator};
use crate::CliError;

/// One synthesized grid cell, replayable for any seed.
#[derive(Debug, Clone)]
pub enum CellRun {
    Fluid {
        attack: AttackKind,
        response: ResponseKind,
        policy: Box<ControllerPolicy>,
        gamma_star: Option<f64>,
    },
    Packet(Box<PacketRunner>),
}

/// A finished run, either simulator.
pub enum Trace {
    Fluid(SimTrace),
    Packet(PacketSimTrace),
}

impl Trace {
    pub fn view(&self) -> &dyn TraceView {
        match self {
            Self::Fluid(t) => t,
            Self::Packet(t) => t,
        }
    }

    fn costs(&self) -> (f64, f64) {
        match self {
            Self::Fluid(t) => (t.z_sq_integral, t.w_sq_integral),
            Self::Packet(t) => (t.z_sq, t.w_sq),
        }
    }
}

impl CellRun {
    /// `<row>_<column>` label used in file names and error messages.
    pub fn name(&self) -> String {
        let (a, b) = self.labels();
        format!("{a}_{b}")
    }

    pub fn labels(&self) -> (&'static str, &'static str) {
        match self {
            Self::Fluid {
                attack, response, ..
            } => (attack.label(), response.label()),
            Self::Packet(r) => (r.scenario.label(), r.mode.label()),
        }
    }

    pub fn gamma_star(&self) -> Option<f64> {
        match self {
            Self::Fluid { gamma_star, .. } => *gamma_star,
            Self::Packet(r) => Some(r.gamma_star),
        }
    }

    pub fn run(&self, cfg: &ScenarioConfig, seed: u64) -> Result<Trace, filterlab_core::Error> {
        match self {
            Self::Fluid { attack, policy, .. } => {
                let sys = cfg.plant_params().build()?;
                let mut policy = (**policy).clone();
                let trace = run_scenario(
                    &sys,
                    &Disturbance::Worm(cfg.attack_spec(*attack)),
                    &mut policy,
                    &cfg.noise_spec(seed),
                    cfg.horizon,
                    cfg.dt,
                )?;
                Ok(Trace::Fluid(trace))
            }
            Self::Packet(r) => Ok(Trace::Packet(r.run(seed)?)),
        }
    }
}

/// Synthesizes every cell of the grid, in summary order.
pub fn prepare_cells(cfg: &ScenarioConfig) -> Result<Vec<CellRun>, CliError> {
    match &cfg.grid {
        Grid::Fluid { attacks, responses } => {
            let sys = cfg.system()?;
            let needs_gamma = responses.iter().any(|r| r.needs_synthesis());
            let gamma_star = if needs_gamma {
                Some(find_gamma_star(&sys, 1e-4)?)
            } else {
                None
            };
            let mut policies = Vec::with_capacity(responses.len());
            for &r in responses {
                let mut policy =
                    ControllerPolicy::build(r, &sys, cfg.gamma_margin).map_err(|source| {
                        CliError::Cell {
                            cell: format!("response {}", r.label()),
                            source,
                        }
                    })?;
                if let ControllerPolicy::Threshold {
                    trigger_level,
                    fixed_rate,
                } = &mut policy
                {
                    *trigger_level = cfg.threshold.trigger_level;
                    *fixed_rate = cfg.threshold.fixed_rate;
                }
                policies.push(policy);
            }
            Ok(attacks
                .iter()
                .flat_map(|&attack| {
                    responses
                        .iter()
                        .zip(&policies)
                        .map(move |(&response, policy)| CellRun::Fluid {
                            attack,
                            response,
                            policy: Box::new(policy.clone()),
                            gamma_star: gamma_star.filter(|_| {
                                matches!(response, ResponseKind::R2 | ResponseKind::R2d)
                            }),
                        })
                })
                .collect())
        }
        Grid::Packet { scenarios, modes } => {
            let pcfg = cfg.packet_config();
            let mut cells = Vec::with_capacity(scenarios.len() * modes.len());
            for &s in scenarios {
                for &m in modes {
                    let runner =
                        PacketRunner::new(s, m, &pcfg).map_err(|source| CliError::Cell {
                            cell: format!("{}_{}", s.label(), m.label()),
                            source,
                        })?;
                    cells.push(CellRun::Packet(Box::new(runner)));
                }
            }
            Ok(cells)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub cell: String,
    pub seed: u64,
    pub l: f64,
    pub z_sq: f64,
    pub w_sq: f64,
    pub trace_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub row: String,
    pub column: String,
    pub runs: usize,
    /// Mean cost ratio over seeds.
    pub mean_l: f64,
    pub mean_z_sq: f64,
    pub gamma_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchReport {
    pub simulator: Simulator,
    pub rows: Vec<SummaryRow>,
    pub runs: Vec<RunRecord>,
    pub summary_path: PathBuf,
    pub runs_path: PathBuf,
}

impl BatchReport {
    pub fn row(&self, row: &str, column: &str) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.row == row && r.column == column)
    }
}

pub fn trace_file_name(cell: &str, seed: u64) -> String {
    format!("{cell}_seed{seed}.csv")
}

/// Writes `path` through a temporary file in the same directory.
pub(crate) fn write_atomic(
    path: &Path,
    fill: impl FnOnce(&mut dyn Write) -> Result<(), filterlab_core::Error>,
) -> Result<(), filterlab_core::Error> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf)?;
        buf.flush()?;
    }
    tmp.persist(path)
        .map_err(|e| filterlab_core::Error::Io(e.error))?;
    Ok(())
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| {
            CliError::Core(filterlab_core::Error::Io(std::io::Error::other(
                e.to_string(),
            )))
        })
}

fn cost(z_sq: f64, w_sq: f64) -> Result<f64, filterlab_core::Error> {
    if !(w_sq > 0.0) {
        return Err(filterlab_core::Error::UndefinedRatio);
    }
    Ok((z_sq / w_sq).sqrt())
}

/// Runs every (cell, seed) pair and writes traces, `summary.csv` and
/// `runs.csv` under the output directory.
pub fn run_batch(cfg: &ScenarioConfig) -> Result<BatchReport, CliError> {
    cfg.validate()?;
    let cells = prepare_cells(cfg)?;
    let out = &cfg.output.dir;
    let trace_dir = out.join("traces");
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| cfg.seeds.iter().map(move |&s| (c, s)))
        .collect();

    let results: Vec<Result<RunRecord, CliError>> = pool(cfg.workers)?.install(|| {
        jobs.par_iter()
            .map(|&(c, seed)| {
                let cell = &cells[c];
                let name = cell.name();
                let wrap = |source| CliError::Cell {
                    cell: format!("{name} seed {seed}"),
                    source,
                };
                let trace = cell.run(cfg, seed).map_err(wrap)?;
                let (z_sq, w_sq) = trace.costs();
                let l = cost(z_sq, w_sq).map_err(wrap)?;
                let trace_path = if cfg.output.traces {
                    let p = trace_dir.join(trace_file_name(&name, seed));
                    write_atomic(&p, |w| write_trace_csv(trace.view(), w)).map_err(wrap)?;
                    Some(p)
                } else {
                    None
                };
                Ok(RunRecord {
                    cell: name,
                    seed,
                    l,
                    z_sq,
                    w_sq,
                    trace_path,
                })
            })
            .collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::new();
    let per_cell = cfg.seeds.len();
    if per_cell > 0 {
        for (c, cell) in cells.iter().enumerate() {
            let chunk = &runs[c * per_cell..(c + 1) * per_cell];
            let (row, column) = cell.labels();
            rows.push(SummaryRow {
                row: row.to_string(),
                column: column.to_string(),
                runs: chunk.len(),
                mean_l: chunk.iter().map(|r| r.l).sum::<f64>() / per_cell as f64,
                mean_z_sq: chunk.iter().map(|r| r.z_sq).sum::<f64>() / per_cell as f64,
                gamma_star: cell.gamma_star(),
            });
        }
    }

    let simulator = cfg.simulator();
    let summary_path = out.join("summary.csv");
    let runs_path = out.join("runs.csv");
    write_atomic(&summary_path, |w| write_summary(simulator, &rows, w))?;
    write_atomic(&runs_path, |w| write_runs(&runs, w))?;
    Ok(BatchReport {
        simulator,
        rows,
        runs,
        summary_path,
        runs_path,
    })
}

fn csv_io(e: csv::Error) -> filterlab_core::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => filterlab_core::Error::Io(io),
        other => filterlab_core::Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|g| g.to_string()).unwrap_or_default()
}

pub fn write_summary(
    simulator: Simulator,
    rows: &[SummaryRow],
    out: &mut dyn Write,
) -> Result<(), filterlab_core::Error> {
    let mut w = csv::Writer::from_writer(out);
    let header = match simulator {
        Simulator::Fluid => [
            "attack",
            "response",
            "runs",
            "L",
            "z_sq_integral",
            "gamma_star",
        ],
        Simulator::Packet => ["scenario", "mode", "runs", "L", "z_sq", "gamma_star"],
    };
    w.write_record(header).map_err(csv_io)?;
    for r in rows {
        w.write_record([
            r.row.clone(),
            r.column.clone(),
            r.runs.to_string(),
            r.mean_l.to_string(),
            r.mean_z_sq.to_string(),
            opt(r.gamma_star),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn write_runs(runs: &[RunRecord], out: &mut dyn Write) -> Result<(), filterlab_core::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cell", "seed", "L", "z_sq", "w_sq"])
        .map_err(csv_io)?;
    for r in runs {
        w.write_record([
            r.cell.clone(),
            r.seed.to_string(),
            r.l.to_string(),
            r.z_sq.to_string(),
            r.w_sq.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// First cell of the grid at one seed; writes its trace and returns the record.
pub fn run_single(cfg: &ScenarioConfig, seed: u64) -> Result<(RunRecord, Trace), CliError> {
    cfg.validate()?;
    let cell = prepare_cells(cfg)?
        .into_iter()
        .next()
        .expect("validated grid is non-empty");
    let name = cell.name();
    let wrap = |source| CliError::Cell {
        cell: format!("{name} seed {seed}"),
        source,
    };
    let trace = cell.run(cfg, seed).map_err(wrap)?;
    let (z_sq, w_sq) = trace.costs();
    let l = cost(z_sq, w_sq).map_err(wrap)?;
    let p = cfg
        .output
        .dir
        .join("traces")
        .join(trace_file_name(&name, seed));
    write_atomic(&p, |w| write_trace_csv(trace.view(), w)).map_err(wrap)?;
    Ok((
        RunRecord {
            cell: name,
            seed,
            l,
            z_sq,
            w_sq,
            trace_path: Some(p),
        },
        trace,
    ))
}

/// One CSV per channel panel, `<dir>/<stem>_<channel>.csv`, holding the
/// selected one-based nodes.
pub fn emit_figure_data(
    trace: &dyn TraceView,
    nodes: &[usize],
    dir: &Path,
    stem: &str,
) -> Result<Vec<PathBuf>, filterlab_core::Error> {
    if let Some(&bad) = nodes.iter().find(|&&id| id == 0 || id > trace.node_count()) {
        return Err(filterlab_core::Error::UnknownNode(bad));
    }
    let mut written = Vec::new();
    for ch in trace.channels() {
        let p = dir.join(format!("{stem}_{ch}.csv"));
        write_atomic(&p, |w| write_panel_csv(trace, ch, nodes, w))?;
        written.push(p);
    }
    Ok(written)
}

/// Figure panels for every cell at the first configured seed.
pub fn emit_figures(cfg: &ScenarioConfig, seed: u64) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate()?;
    let dir = cfg.output.dir.join("figures");
    let mut written = Vec::new();
    for cell in prepare_cells(cfg)? {
        let name = cell.name();
        let wrap = |source| CliError::Cell {
            cell: format!("{name} seed {seed}"),
            source,
        };
        let trace = cell.run(cfg, seed).map_err(wrap)?;
        let stem = format!("{name}_seed{seed}");
        written
            .extend(emit_figure_data(trace.view(), &cfg.figures.nodes, &dir, &stem).map_err(wrap)?);
    }
    Ok(written)
}
