use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use filterlab::{config::Simulator, load_config, CliError, ScenarioConfig};
use filterlab_core::controllers::{synthesize_hinf, write_gains};
use filterlab_core::riccati::find_gamma_star;

#[derive(Parser)]
#[command(
    name = "filterlab",
    version,
    about = "Robust malware-filtering control experiments"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario configuration (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory; overrides `[output] dir`.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    /// Run this seed only.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Verb {
    /// Synthesize the H-infinity filter and write its gains file.
    Synthesize(Common),
    /// Run the first grid cell for one seed.
    Run(Common),
    /// Run the full grid and write the summary.
    Batch(Common),
    /// Write per-panel figure CSVs.
    Figures(Common),
}

fn load(common: &Common) -> Result<ScenarioConfig, CliError> {
    let mut cfg = load_config(&common.config)?;
    if let Some(out) = &common.out {
        cfg.output.dir = out.clone();
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    if let Some(s) = common.seed {
        cfg.seeds = vec![s];
    }
    Ok(cfg)
}

fn synthesize(cfg: &ScenarioConfig) -> Result<(), CliError> {
    let sys = match cfg.simulator() {
        Simulator::Fluid => cfg.system()?,
        Simulator::Packet => {
            let mut p = cfg.plant_params();
            if let filterlab::Grid::Packet { scenarios, .. } = &cfg.grid {
                p.cost_ratio = scenarios[0].cost_ratio();
            }
            p.build()?
        }
    };
    let gamma_star = find_gamma_star(&sys, 1e-4)?;
    let ctrl = synthesize_hinf(&sys, cfg.gamma_margin)?;
    let path = cfg.output.dir.join("gains.txt");
    std::fs::create_dir_all(&cfg.output.dir).map_err(filterlab_core::Error::from)?;
    let file = std::fs::File::create(&path).map_err(filterlab_core::Error::from)?;
    write_gains(&ctrl, std::io::BufWriter::new(file))?;
    println!("gamma_star {gamma_star}");
    println!("gamma {}", ctrl.gamma);
    println!("gains {}", path.display());
    Ok(())
}

fn dispatch(verb: &Verb) -> Result<(), CliError> {
    match verb {
        Verb::Synthesize(c) => synthesize(&load(c)?),
        Verb::Run(c) => {
            let cfg = load(c)?;
            let seed = cfg.seeds.first().copied().unwrap_or(0);
            let (rec, _) = filterlab::run_single(&cfg, seed)?;
            println!(
                "{} seed {} L {} z_sq {}",
                rec.cell, rec.seed, rec.l, rec.z_sq
            );
            if let Some(p) = rec.trace_path {
                println!("trace {}", p.display());
            }
            Ok(())
        }
        Verb::Batch(c) => {
            let cfg = load(c)?;
            let report = filterlab::run_batch(&cfg)?;
            for r in &report.rows {
                println!("{} {} L {:.4}", r.row, r.column, r.mean_l);
            }
            println!("summary {}", report.summary_path.display());
            Ok(())
        }
        Verb::Figures(c) => {
            let cfg = load(c)?;
            let seed = cfg.seeds.first().copied().unwrap_or(0);
            for p in filterlab::emit_figures(&cfg, seed)? {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.verb) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
