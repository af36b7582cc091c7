use filterlab::config::Simulator;
use filterlab::{load_config, parse_config, write_config, Grid, ScenarioConfig};
use filterlab_core::controllers::ResponseKind;
use filterlab_core::fluidsim::AttackKind;
use filterlab_core::packetsim::{FilterMode, PacketScenario};
use filterlab_core::Error;

fn validation_field(text: &str) -> String {
    match parse_config(text) {
        Err(filterlab::CliError::Core(Error::Validation { field, .. })) => field,
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn minimal_fluid_config_is_fully_defaulted() {
    let cfg = parse_config(
        "simulator = \"fluid\"\nattack = \"A2\"\nresponse = \"R2\"\ncost_ratio = 100\n",
    )
    .unwrap();
    assert_eq!(
        cfg.grid,
        Grid::Fluid {
            attacks: vec![AttackKind::A2],
            responses: vec![ResponseKind::R2],
        }
    );
    assert_eq!(cfg.seeds, vec![0]);
    assert_eq!((cfg.f_l, cfg.f_a, cfg.b), (1.8, 0.1, 0.5));
    assert!((cfg.control_weight() - 1.0).abs() < 1e-15);
    assert_eq!(cfg.gamma_margin, 1.05);
    assert_eq!((cfg.horizon, cfg.dt), (50.0, 0.01));
    assert_eq!(cfg.figures.nodes, vec![1, 2]);
    assert_eq!(cfg.plant.nodes, 9);
    let sys = cfg.system().unwrap();
    assert!((sys.h[(0, 0)] - 10.0).abs() < 1e-12);
    assert!((sys.g[(0, 0)] - 1.0).abs() < 1e-15);
}

#[test]
fn omitted_grid_axes_cover_the_tables() {
    let cfg = parse_config("simulator = \"packet\"").unwrap();
    assert_eq!(cfg.simulator(), Simulator::Packet);
    assert_eq!(cfg.grid.cell_count(), 10);
    assert_eq!(cfg.gamma_margin, 1.001);
    let cfg = parse_config("simulator = \"fluid\"").unwrap();
    assert_eq!(cfg.grid.cell_count(), 20);
}

#[test]
fn g_follows_the_cost_split() {
    let cfg = parse_config("simulator = \"fluid\"\nf_l = 2.0\nf_a = 0.5\nb = 0.25\n").unwrap();
    assert!((cfg.control_weight() - 2.0).abs() < 1e-15);
    assert!((cfg.system().unwrap().g[(3, 3)] - 2.0).abs() < 1e-15);
}

#[test]
fn zero_b_is_a_named_validation_error() {
    assert_eq!(validation_field("simulator = \"fluid\"\nb = 0.0\n"), "b");
}

#[test]
fn bad_values_name_their_field() {
    assert_eq!(
        validation_field("simulator = \"fluid\"\nattack = \"A9\"\n"),
        "attack"
    );
    assert_eq!(
        validation_field("simulator = \"packet\"\nresponse = \"R2\"\n"),
        "response"
    );
    assert_eq!(
        validation_field("simulator = \"fluid\"\ncost_ratio = -1.0\n"),
        "cost_ratio"
    );
    assert_eq!(
        validation_field("simulator = \"fluid\"\ngamma_margin = 1.0\n"),
        "gamma_margin"
    );
    assert_eq!(validation_field("simulator = \"fluid\"\ndt = 0.0\n"), "dt");
    assert_eq!(
        validation_field("simulator = \"fluid\"\n[plant]\nvaluable_nodes = [[10, 2.0]]\n"),
        "plant.valuable_nodes"
    );
    assert_eq!(
        validation_field("simulator = \"fluid\"\n[figures]\nnodes = [0]\n"),
        "figures.nodes"
    );
    assert_eq!(
        validation_field("simulator = \"fluid\"\n[noise]\nstd = -1.0\n"),
        "noise.std"
    );
    assert_eq!(validation_field("attack = \"A1\"\n"), "simulator");
}

#[test]
fn unknown_keys_are_parse_errors() {
    let err = parse_config("simulator = \"fluid\"\nhorizom = 3.0\n").unwrap_err();
    assert!(matches!(err, filterlab::CliError::Parse(_)));
    assert_eq!(err.exit_code(), 2);
}

fn assert_round_trip(cfg: &ScenarioConfig) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.toml");
    write_config(cfg, &path).unwrap();
    let back = load_config(&path).unwrap();
    assert_eq!(&back, cfg);
}

#[test]
fn write_then_load_round_trips() {
    assert_round_trip(&parse_config("simulator = \"fluid\"").unwrap());
    assert_round_trip(&parse_config("simulator = \"packet\"\nattack = [\"S2\", \"S5\"]").unwrap());
    let text = r#"
simulator = "fluid"
attack = ["A3", "A2"]
response = ["R2d", "R4"]
cost_ratio = 37.5
f_l = 1.2
f_a = 0.3
b = 0.7
seeds = [5, 18446744073709551615]
horizon = 12.5
dt = 0.005
workers = 3
gamma_margin = 1.2

[plant]
valuable_nodes = [[5, 2.0], [9, 0.5]]

[noise]
mean = 0.1
std = 0.3

[threshold]
trigger_level = 2.5
fixed_rate = 7.0

[attack_overrides.A3]
per_infected_rate = 8.0
initial_infected = 4

[output]
dir = "somewhere/else"
traces = false

[figures]
nodes = []
"#;
    let cfg = parse_config(text).unwrap();
    assert_eq!(cfg.attack_spec(AttackKind::A3).per_infected_rate, 8.0);
    assert_eq!(cfg.attack_spec(AttackKind::A3).initial_infected, Some(3));
    assert_eq!(cfg.seeds[1], u64::MAX);
    assert_round_trip(&cfg);
}

#[test]
fn packet_grid_parses_modes() {
    let cfg = parse_config("simulator = \"packet\"\nattack = \"S3\"\nresponse = [\"heuristic\"]\n")
        .unwrap();
    assert_eq!(
        cfg.grid,
        Grid::Packet {
            scenarios: vec![PacketScenario::S3],
            modes: vec![FilterMode::Heuristic],
        }
    );
    assert_eq!(cfg.packet_config().initial_infected, 0);
}

#[test]
fn shipped_configs_load() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 4);
}
