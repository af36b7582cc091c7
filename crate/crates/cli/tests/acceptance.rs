//! Exit-gate checks, run without the libtest harness so that every
//! criterion prints its `PASS`/`FAIL` line.

// Checks are written so that a NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use common::{config, read_csv};
use filterlab::{run_batch, BatchReport};
use filterlab_core::controllers::{
    synthesize_hinf, synthesize_hinf_at, synthesize_lqg, ControllerPolicy, ResponseKind,
};
use filterlab_core::fluidsim::{run_scenario, AttackKind, AttackSpec, Disturbance, NoiseSpec};
use filterlab_core::riccati::{
    find_gamma_star, solve_controller_gare, solve_estimator_gare, synthesis_at, Feasibility,
    PlantParams, SystemMatrices,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(id: &str, ok: bool, detail: String) {
    println!("{} {id}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{id} failed: {detail}");
}

fn within(id: &str, start: Instant, limit: Duration) -> bool {
    let took = start.elapsed();
    if took > limit {
        println!("{id}: runtime {took:?} over {limit:?}");
    }
    took <= limit
}

fn random_stable_system(n: usize, rng: &mut ChaCha8Rng) -> SystemMatrices {
    let mut a = DMatrix::from_fn(n, n, |_, _| 0.4 * (rng.random::<f64>() - 0.5) / n as f64);
    for i in 0..n {
        a[(i, i)] = -0.2 - 2.0 * rng.random::<f64>();
    }
    let diag = |rng: &mut ChaCha8Rng, lo: f64, span: f64| {
        DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| lo + span * rng.random::<f64>()))
    };
    let b = -diag(rng, 0.2, 0.8);
    let c = diag(rng, 0.5, 2.0);
    let d = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.3);
    let noise = diag(rng, 0.5, 1.0);
    let h = diag(rng, 0.5, 9.0);
    let g = diag(rng, 0.5, 1.5);
    SystemMatrices {
        a,
        b,
        c,
        d,
        noise,
        h,
        g,
    }
}

fn symmetric_pd(x: &DMatrix<f64>) -> bool {
    let asym = (x - x.transpose()).norm() / x.norm().max(f64::MIN_POSITIVE);
    asym <= 1e-10 && x.clone().symmetric_eigen().eigenvalues.min() > 0.0
}

// Stabilizing root of 2 a x - r x^2 + q = 0.
fn scalar_root(a: f64, r: f64, q: f64) -> f64 {
    if r == 0.0 {
        -q / (2.0 * a)
    } else {
        (a + (a * a + r * q).sqrt()) / r
    }
}

fn c1_riccati_correctness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for k in 0..200 {
        let n = [1, 2, 4, 9][k % 4];
        let sys = random_stable_system(n, &mut rng);
        let gs = find_gamma_star(&sys, 1e-4).unwrap();
        let gamma = if gs > 0.0 { 1.5 * gs } else { f64::INFINITY };
        match synthesis_at(&sys, gamma).unwrap() {
            Feasibility::Feasible(sol) => {
                worst = worst.max(sol.residual_z).max(sol.residual_sigma);
                if sol.residual_z > 1e-8
                    || sol.residual_sigma > 1e-8
                    || !symmetric_pd(&sol.z)
                    || !symmetric_pd(&sol.sigma)
                {
                    bad.push(k);
                }
            }
            Feasibility::Infeasible(why) => {
                println!("system {k} (n = {n}) infeasible at 1.5 gamma*: {why}");
                bad.push(k);
            }
        }
    }

    let mut scalar_err = 0.0f64;
    for &(a, b, c, d, h, g, gamma) in &[
        (-1.0, -0.5, 2.0, 1.0, 10.0, 1.0, 5.0),
        (-0.3, -1.0, 1.0, 0.5, 2.0, 2.0, 3.0),
        (-2.0, -0.1, 0.7, 1.5, 0.4, 0.5, 2.5),
        (-1.0, -0.5, 2.0, 1.0, 10.0, 1.0, f64::INFINITY),
    ] {
        let m = |v| DMatrix::from_element(1, 1, v);
        let sys = SystemMatrices {
            a: m(a),
            b: m(b),
            c: m(c),
            d: m(d),
            noise: m(1.0),
            h: m(h),
            g: m(g),
        };
        let k = if gamma.is_finite() {
            gamma.powi(-2)
        } else {
            0.0
        };
        let z = solve_controller_gare(&sys, gamma)
            .unwrap()
            .into_solution()
            .unwrap()[(0, 0)];
        let s = solve_estimator_gare(&sys, gamma)
            .unwrap()
            .into_solution()
            .unwrap()[(0, 0)];
        let z_ref = scalar_root(a, b * b / (g * g) - d * d * k, h * h);
        let s_ref = scalar_root(a, c * c - h * h * k, d * d);
        scalar_err = scalar_err.max((z - z_ref).abs()).max((s - s_ref).abs());
    }
    let fast = within("C1", start, Duration::from_secs(10));
    verdict(
        "C1",
        bad.is_empty() && scalar_err <= 1e-10 && fast,
        format!(
            "200 random systems, worst residual {worst:.2e}, failures {bad:?}; scalar error {scalar_err:.1e}; {:?}",
            start.elapsed()
        ),
    );
}

fn c2_gamma_star_reproduction() {
    let start = Instant::now();
    let sys = PlantParams::with_cost_ratio(100.0).build().unwrap();
    let g = find_gamma_star(&sys, 1e-4).unwrap();
    let ok = (g - 4.52).abs() <= 0.15 * 4.52 && within("C2", start, Duration::from_secs(5));
    verdict(
        "C2",
        ok,
        format!("gamma* = {g:.4} (band 3.842..5.198), {:?}", start.elapsed()),
    );
}

fn c3_hinf_bound() {
    let sys = PlantParams::with_cost_ratio(100.0).build().unwrap();
    let ctrl = synthesize_hinf(&sys, 1.05).unwrap();
    let gamma = ctrl.gamma;
    let Feasibility::Feasible(sol) = synthesis_at(&sys, gamma).unwrap() else {
        panic!("infeasible at 1.05 gamma*")
    };
    let mut disturbances: Vec<(String, Disturbance)> = AttackKind::ALL
        .iter()
        .map(|&k| {
            (
                k.label().to_string(),
                Disturbance::Worm(AttackSpec::preset(k)),
            )
        })
        .collect();
    disturbances.push((
        "worst".into(),
        Disturbance::WorstCase {
            z: sol.z.clone(),
            gamma,
        },
    ));
    let mut worst = f64::NEG_INFINITY;
    let mut runs = 0;
    for (name, dist) in &disturbances {
        for seed in 0..10u64 {
            let mut policy = ControllerPolicy::Hinf(ctrl.clone());
            let noise = NoiseSpec {
                seed,
                ..NoiseSpec::default()
            };
            let tr = run_scenario(&sys, dist, &mut policy, &noise, 50.0, 0.01).unwrap();
            let rel = tr.j_gamma(gamma) / (gamma * gamma * tr.w_sq_integral);
            if rel > worst {
                worst = rel;
            }
            if rel > 0.1 {
                println!("C3: {name} seed {seed} J/(gamma^2 |w|^2) = {rel:.4}");
            }
            runs += 1;
        }
    }
    verdict(
        "C3",
        runs == 50 && worst <= 0.1,
        format!(
            "{runs} runs at gamma = {gamma:.4}, max J/(gamma^2 |w|^2) = {worst:.4} (limit 0.1)"
        ),
    );
}

fn c4_table_ordering() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(
        "simulator = \"fluid\"\ncost_ratio = 100.0\nseeds = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]\n",
        dir.path(),
    );
    cfg.output.traces = false;
    let report = run_batch(&cfg).unwrap();
    let l = |a: &str, r: &str| report.row(a, r).unwrap().mean_l;
    let mut problems = Vec::new();
    for a in ["A2", "A3", "A4"] {
        let r2 = l(a, "R2");
        for r in ["R1", "R3", "R4", "R5"] {
            if !(r2 < l(a, r)) {
                problems.push(format!("{a}: R2 {r2:.3} not below {r} {:.3}", l(a, r)));
            }
        }
    }
    if l("A1", "R1") != 0.0 || l("A1", "R3") != 0.0 || !(l("A1", "R2") > 0.0) {
        problems.push("A1 row pattern".into());
    }
    for a in ["A1", "A2", "A3", "A4"] {
        let row: Vec<String> = ["R1", "R2", "R3", "R4", "R5"]
            .iter()
            .map(|r| format!("{:.2}", l(a, r)))
            .collect();
        println!("C4: {a} {}", row.join(" "));
    }
    let fast = within("C4", start, Duration::from_secs(120));
    verdict(
        "C4",
        problems.is_empty() && fast,
        format!("10-seed means: R2 lowest under A2..A4, A1 has R1 = R3 = 0 and R2 > 0; problems {problems:?}; {:?}", start.elapsed()),
    );
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn c5_lqg_limit() {
    let sys = PlantParams::with_cost_ratio(100.0).build().unwrap();
    let big = synthesize_hinf_at(&sys, 1e6).unwrap();
    let lqg = synthesize_lqg(&sys).unwrap();
    let err = rel(&big.gain, &lqg.gain)
        .max(rel(&big.innovation, &lqg.innovation))
        .max(rel(&big.drift, &lqg.drift));
    verdict(
        "C5",
        err <= 1e-3,
        format!("max relative gain difference {err:.2e} (limit 1e-3)"),
    );
}

struct PacketBatch {
    report: BatchReport,
    _dir: tempfile::TempDir,
    took: Duration,
}

fn packet_batch() -> &'static PacketBatch {
    static CELL: OnceLock<PacketBatch> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let dir = tempfile::tempdir().unwrap();
        let cfg = config("simulator = \"packet\"\nseeds = [0, 1, 2]\n", dir.path());
        let report = run_batch(&cfg).unwrap();
        PacketBatch {
            report,
            _dir: dir,
            took: start.elapsed(),
        }
    })
}

fn max_filtering(report: &BatchReport, cell: &str) -> f64 {
    report
        .runs
        .iter()
        .filter(|r| r.cell == cell)
        .map(|r| {
            let (h, rows) = read_csv(r.trace_path.as_deref().unwrap());
            rows.iter()
                .flat_map(|row| {
                    h.iter()
                        .zip(row)
                        .filter(|(c, _)| c.starts_with("u_"))
                        .map(|(_, v)| *v)
                })
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

fn c6_packet_directionals() {
    let b = packet_batch();
    let r = &b.report;
    let l = |s: &str, m: &str| r.row(s, m).unwrap().mean_l;
    let z = |s: &str, m: &str| r.row(s, m).unwrap().mean_z_sq;
    let mut problems = Vec::new();
    for s in ["S1", "S2", "S3", "S4", "S5"] {
        println!(
            "C6: {s} hinf L {:.3} heuristic L {:.3}",
            l(s, "hinf"),
            l(s, "heuristic")
        );
        if !(l(s, "hinf") < l(s, "heuristic")) {
            problems.push(format!("{s}: hinf not below heuristic"));
        }
    }
    let inf_heur = z("S2", "heuristic") / z("S1", "heuristic");
    let inf_hinf = z("S2", "hinf") / z("S1", "hinf");
    if !(inf_heur > inf_hinf) {
        problems.push("S1 to S2 inflation".into());
    }
    let (u5, u1) = (max_filtering(r, "S5_hinf"), max_filtering(r, "S1_hinf"));
    if !(u5 < u1) {
        problems.push("max filtering S5 vs S1".into());
    }
    let fast = b.took <= Duration::from_secs(300);
    verdict(
        "C6",
        problems.is_empty() && fast,
        format!(
            "inflation heuristic {inf_heur:.3} vs hinf {inf_hinf:.3}; max filtering S5 {u5} vs S1 {u1}; {problems:?}; batch {:?}",
            b.took
        ),
    );
}

fn c7_near_bound() {
    let r = &packet_batch().report;
    let mut problems = Vec::new();
    for s in ["S1", "S2", "S3", "S4", "S5"] {
        let row = r.row(s, "hinf").unwrap();
        let g = row.gamma_star.unwrap();
        let ratio = row.mean_l / g;
        println!("C7: {s} L {:.3} gamma* {g:.3} ratio {ratio:.3}", row.mean_l);
        if !(0.5..=1.3).contains(&ratio) {
            problems.push(s);
        }
    }
    verdict(
        "C7",
        problems.is_empty(),
        format!("L / gamma* within [0.5, 1.3]; outside: {problems:?}"),
    );
}

// Sign changes of the smoothed second difference, ignoring a dead band.
fn inflections(series: &[f64]) -> usize {
    let smooth: Vec<f64> = series
        .windows(10)
        .map(|w| w.iter().sum::<f64>() / 10.0)
        .collect();
    let d2: Vec<f64> = smooth
        .windows(3)
        .map(|w| w[2] - 2.0 * w[1] + w[0])
        .collect();
    let band = 0.1 * d2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let signs: Vec<f64> = d2
        .iter()
        .filter(|v| v.abs() > band)
        .map(|v| v.signum())
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

fn c8_s_curve() {
    let sys = PlantParams::with_cost_ratio(100.0).build().unwrap();
    let attack = AttackSpec::preset(AttackKind::A2);
    let source = attack.initial_infected.unwrap();
    let group = 3;
    let n = sys.n();
    // the source and every node outside its group; index n is the network total
    let watched: Vec<usize> = (0..n)
        .filter(|&i| i == source || i / group != source / group)
        .chain([n])
        .collect();
    let seeds = 10u64;
    let mut mean = vec![vec![0.0; 100]; n + 1];
    let mut single_runs = 0;
    for seed in 0..seeds {
        let mut policy = ControllerPolicy::build(ResponseKind::R1, &sys, 1.05).unwrap();
        let noise = NoiseSpec {
            seed,
            ..NoiseSpec::default()
        };
        let tr = run_scenario(
            &sys,
            &Disturbance::Worm(attack.clone()),
            &mut policy,
            &noise,
            50.0,
            0.01,
        )
        .unwrap();
        // half-unit samples
        let sampled: Vec<&DVector<f64>> = tr.x.iter().step_by(50).collect();
        for &node in &watched {
            let series: Vec<f64> = sampled
                .iter()
                .map(|x| if node == n { x.sum() } else { x[node] })
                .collect();
            if inflections(&series) == 1 {
                single_runs += 1;
            }
            for (acc, v) in mean[node].iter_mut().zip(&series) {
                *acc += v / seeds as f64;
            }
        }
    }
    let bad: Vec<usize> = watched
        .iter()
        .copied()
        .filter(|&i| inflections(&mean[i]) != 1)
        .collect();
    println!(
        "C8: single inflection in {single_runs} of {} individual (seed, series) runs",
        seeds as usize * watched.len()
    );
    verdict(
        "C8",
        bad.is_empty(),
        format!("seed-mean arrival curves with one smoothed inflection; exceptions (index {n} = total) {bad:?}"),
    );
}

fn bytes(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

fn c9_determinism() {
    let mut same = true;
    for text in [
        "simulator = \"fluid\"\nattack = [\"A2\", \"A4\"]\nresponse = [\"R2\", \"R3\"]\nseeds = [11, 12]\nhorizon = 20.0\n",
        "simulator = \"packet\"\nattack = [\"S1\", \"S4\"]\nseeds = [5]\nhorizon = 10.0\n",
    ] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ra = run_batch(&config(text, a.path())).unwrap();
        let rb = run_batch(&config(text, b.path())).unwrap();
        same &= bytes(&ra.summary_path) == bytes(&rb.summary_path);
        same &= bytes(&ra.runs_path) == bytes(&rb.runs_path);
        for (x, y) in ra.runs.iter().zip(&rb.runs) {
            same &= bytes(x.trace_path.as_deref().unwrap()) == bytes(y.trace_path.as_deref().unwrap());
        }
    }
    verdict(
        "C9",
        same,
        "repeated batches give byte-identical traces and summaries".into(),
    );
}

fn main() {
    let checks: [(&str, fn()); 9] = [
        ("C1", c1_riccati_correctness),
        ("C2", c2_gamma_star_reproduction),
        ("C3", c3_hinf_bound),
        ("C4", c4_table_ordering),
        ("C5", c5_lqg_limit),
        ("C6", c6_packet_directionals),
        ("C7", c7_near_bound),
        ("C8", c8_s_curve),
        ("C9", c9_determinism),
    ];
    let mut failed = Vec::new();
    for (id, check) in checks {
        if std::panic::catch_unwind(check).is_err() {
            failed.push(id);
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        checks.len() - failed.len(),
        checks.len()
    );
    if !failed.is_empty() {
        println!("acceptance: failing {failed:?}");
        std::process::exit(1);
    }
}
