use std::path::Path;

use peridyn::deck::{load_deck, load_deck_with, Deck, DeckError, IntegratorSpec, OutputFormat};
use peridyn::discretization::{generate_uniform_grid, Dim, NodeCloud, Placement};
use peridyn::linalg::SolverKind;
use peridyn::material::{FieldState, MaterialModel};
use peridyn::output::{snapshot_csv, snapshot_vtk, write_snapshot, CSV_HEADER};
use peridyn::simulation::Simulation;
use peridyn::validate::{BENCH_2D_DECK, CONVERGENCE_1D_DECK, TENSILE_1D_DECK, TENSILE_2D_DECK};
use peridyn::Runtime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ALL_DECKS: [&str; 4] = [TENSILE_1D_DECK, TENSILE_2D_DECK, CONVERGENCE_1D_DECK, BENCH_2D_DECK];

/// The 2D plate deck written directly in metres and pascals.
const PLATE_SI: &str = r#"
units: { length: m, stress: Pa, force: N }
geometry: { dim: 2, bounds: [[0, 0.375], [0, 0.375]], h: 0.025, placement: cell_center, cross_section: 0.001 }
horizon: { m_d: 4 }
material: { kind: state_based, youngs_modulus: 4.0e9, poissons_ratio: 0.3 }
integrator: { kind: implicit, n_load_steps: 1, tau: 1.0e-2, max_newton_iters: 10, solver: bicgstab, solver_tol: 1.0e-3 }
boundary_conditions:
  clamped: [{ box: { lo: [0.35, 0], hi: [0.375, 0.375] }, axes: [0, 1] }]
  loads: [{ box: { lo: [0, 0], hi: [0.025, 0.375] }, total_force: [-50, 0] }]
"#;

fn write_deck(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn bar_deck_loads_in_metres() {
    let dir = tempfile::tempdir().unwrap();
    let deck = load_deck(&write_deck(dir.path(), "bar.yaml", TENSILE_1D_DECK)).unwrap();
    assert_eq!(deck.geometry.h, 0.5);
    assert_eq!(deck.delta(), 1.0);
    assert_eq!(deck.geometry.bounds, vec![[0.0, 16.0]]);
    match &deck.integrator {
        IntegratorSpec::Implicit(c) => {
            assert_eq!(c.tau, 1e-9);
            assert_eq!(c.solver, SolverKind::Bicgstab);
        }
        other => panic!("unexpected {other:?}"),
    }
    match deck.material_model().unwrap() {
        MaterialModel::StateBased(p) => assert_eq!(p.k, 4e9 / 9.0),
        other => panic!("unexpected {other:?}"),
    }
    let sim = Simulation::from_deck(deck, &Runtime::serial()).unwrap();
    assert_eq!(sim.body.len(), 33);
}

#[test]
fn nodal_forces_become_densities() {
    let rt = Runtime::serial();
    let bar = Simulation::from_deck(Deck::parse(TENSILE_1D_DECK, &[]).unwrap(), &rt).unwrap();
    let last = bar.body.len() - 1;
    assert_eq!(bar.initial.b[last] * bar.body.cloud.volumes()[last], 40.0);
    assert!(bar.initial.b[..last].iter().all(|&b| b == 0.0));

    let plate = Simulation::from_deck(Deck::parse(TENSILE_2D_DECK, &[]).unwrap(), &rt).unwrap();
    let vol = plate.body.cloud.volumes();
    let thickness = plate.deck.geometry.cross_section;
    let (mut fx, mut fy, mut loaded) = (0.0, 0.0, 0);
    for (b, v) in plate.initial.b.chunks(2).zip(vol) {
        let (bx, by) = (b[0], b[1]);
        if bx != 0.0 {
            loaded += 1;
        }
        fx += bx * v * thickness;
        fy += by * v * thickness;
    }
    assert_eq!(loaded, 15);
    assert!((fx + 50.0).abs() < 1e-12);
    assert_eq!(fy, 0.0);
}

#[test]
fn millimetre_deck_matches_si_twin() {
    let rt = Runtime::serial();
    let mm = Simulation::from_deck(Deck::parse(TENSILE_2D_DECK, &[]).unwrap(), &rt).unwrap();
    let si = Simulation::from_deck(Deck::parse(PLATE_SI, &[]).unwrap(), &rt).unwrap();
    assert_eq!(mm.body.cloud, si.body.cloud);
    assert_eq!(mm.material, si.material);
    assert_eq!(mm.initial, si.initial);
}

#[test]
fn horizon_below_spacing_rejected() {
    let err = Deck::parse(TENSILE_1D_DECK, &["horizon.delta=400".into()]).unwrap_err();
    assert!(matches!(err, DeckError::Invalid(_)), "{err}");
    assert!(Deck::parse(TENSILE_2D_DECK, &["horizon.m_d=0.5".into()]).is_err());
}

#[test]
fn every_deck_round_trips() {
    for text in ALL_DECKS {
        let deck = Deck::parse(text, &[]).unwrap();
        let again = Deck::parse(&deck.to_yaml(), &[]).unwrap();
        assert_eq!(deck, again);
    }
}

#[test]
fn overrides_are_type_checked() {
    let deck = Deck::parse(CONVERGENCE_1D_DECK, &["geometry.h=0.005".into(), "integrator.n_steps=10".into()]).unwrap();
    assert_eq!(deck.geometry.h, 0.005);
    match &deck.integrator {
        IntegratorSpec::Explicit(c) => assert_eq!(c.n_steps, 10),
        other => panic!("unexpected {other:?}"),
    }
    match Deck::parse(CONVERGENCE_1D_DECK, &["integrator.n_steps=many".into()]).unwrap_err() {
        DeckError::Schema { path, .. } => assert_eq!(path, "integrator.n_steps"),
        other => panic!("unexpected {other}"),
    }
    assert!(matches!(
        Deck::parse(CONVERGENCE_1D_DECK, &["=3".into()]).unwrap_err(),
        DeckError::Override(_)
    ));
    assert!(Deck::parse(CONVERGENCE_1D_DECK, &["geometry.colour=red".into()]).is_err());
    match Deck::parse(CONVERGENCE_1D_DECK, &["integrator.dT=1".into()]).unwrap_err() {
        DeckError::Schema { path, message } => {
            assert_eq!(path, "integrator.dT");
            assert!(message.contains("dT"), "{message}");
        }
        other => panic!("unexpected {other}"),
    }
    match Deck::parse(TENSILE_1D_DECK, &["material.youngs_modulus=stiff".into()]).unwrap_err() {
        DeckError::Schema { path, .. } => assert_eq!(path, "material.youngs_modulus"),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn overrides_apply_to_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_deck(dir.path(), "bar.yaml", TENSILE_1D_DECK);
    let deck = load_deck_with(&path, &["geometry.h=250".into()]).unwrap();
    assert_eq!(deck.geometry.h, 0.25);
}

#[test]
fn errors_locate_the_problem() {
    match Deck::parse("geometry: { dim: 1\nhorizon: [", &[]).unwrap_err() {
        DeckError::Parse { location, .. } => assert!(location.unwrap().0 >= 1),
        other => panic!("unexpected {other}"),
    }
    let text = TENSILE_1D_DECK.replace("kind: state_based", "kind: plastic");
    match Deck::parse(&text, &[]).unwrap_err() {
        DeckError::Schema { path, .. } => assert!(path.starts_with("material"), "{path}"),
        other => panic!("unexpected {other}"),
    }
    let text: String = TENSILE_1D_DECK.lines().filter(|l| !l.starts_with("units")).collect::<Vec<_>>().join("\n");
    let err = Deck::parse(&text, &[]).unwrap_err();
    assert!(err.to_string().contains("units"), "{err}");
    assert!(matches!(load_deck(Path::new("/nonexistent/deck.yaml")), Err(DeckError::Io { .. })));
}

#[test]
fn two_material_kinds_rejected() {
    let text = format!("{TENSILE_1D_DECK}\nmaterial: {{ kind: bond_based, c: 1, beta: 1 }}\n");
    assert!(Deck::parse(&text, &[]).is_err());
}

#[test]
fn single_node_csv_has_one_row() {
    let cloud = NodeCloud::from_parts(Dim::ONE, vec![[0.0; 3]], vec![1.0], vec![1.0], 1.0).unwrap();
    let state = FieldState::zeros(1, Dim::ONE);
    let text = snapshot_csv(&state, &cloud);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines, vec![CSV_HEADER, "0,0,0,0,0,0,0,0,0,0,0,0,0,0"]);
}

#[test]
fn csv_round_trips_full_precision() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cloud = generate_uniform_grid(&[[0.0, 1.0], [0.0, 0.5]], 0.1, Dim::TWO, Placement::Lattice).unwrap();
    let mut state = FieldState::zeros(cloud.len(), Dim::TWO);
    for x in state.u.iter_mut().chain(state.v.iter_mut()).chain(state.f.iter_mut()) {
        *x = rng.gen_range(-1.0..1.0) * 10f64.powi(rng.gen_range(-20..20));
    }
    let text = snapshot_csv(&state, &cloud);
    for (i, line) in text.lines().skip(1).enumerate() {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols.len(), 14);
        assert_eq!(cols[0], i as f64);
        assert_eq!(cols[4], state.u[2 * i]);
        assert_eq!(cols[5], state.u[2 * i + 1]);
        assert_eq!(cols[6], 0.0);
        assert_eq!(cols[7], state.v[2 * i]);
        assert_eq!(cols[11], state.f[2 * i + 1]);
    }
}

#[test]
fn vtk_reparses_as_points() {
    let cloud = generate_uniform_grid(&[[0.0, 1.0]], 0.25, Dim::ONE, Placement::Lattice).unwrap();
    let mut state = FieldState::zeros(cloud.len(), Dim::ONE);
    state.u = vec![0.5, 1.0, 1.5, 2.0, 2.5];
    let text = snapshot_vtk(&state, &cloud, 7);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# vtk DataFile Version 3.0");
    let at = lines.iter().position(|l| *l == "POINTS 5 double").unwrap();
    for (k, line) in lines[at + 1..at + 6].iter().enumerate() {
        let p: Vec<f64> = line.split_whitespace().map(|c| c.parse().unwrap()).collect();
        assert_eq!(p, vec![0.25 * k as f64, 0.0, 0.0]);
    }
    let at = lines.iter().position(|l| *l == "VECTORS displacement double").unwrap();
    assert_eq!(lines[at + 2], "1 0 0");
    assert!(lines.contains(&"POINT_DATA 5"));
}

#[test]
fn output_is_byte_identical_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let overrides = ["integrator.n_steps=50".to_string(), "geometry.h=0.005".to_string()];
    let mut texts = Vec::new();
    for threads in [1, 2, 3] {
        let rt = Runtime::new(threads).unwrap();
        let sim = Simulation::from_deck(Deck::parse(CONVERGENCE_1D_DECK, &overrides).unwrap(), &rt).unwrap();
        let result = sim.run(&rt).unwrap();
        let out = dir.path().join(format!("t{threads}"));
        let path = write_snapshot(result.last(), &sim.body.cloud, 50, OutputFormat::Csv, &out).unwrap();
        texts.push(std::fs::read(path).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
    assert_eq!(texts[0], texts[2]);
}

#[test]
fn unwritable_directory_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let cloud = generate_uniform_grid(&[[0.0, 1.0]], 0.5, Dim::ONE, Placement::Lattice).unwrap();
    let state = FieldState::zeros(cloud.len(), Dim::ONE);
    let err = write_snapshot(&state, &cloud, 0, OutputFormat::Csv, &blocker.join("sub")).unwrap_err();
    assert!(matches!(err, peridyn::Error::Io { .. }), "{err}");
}
