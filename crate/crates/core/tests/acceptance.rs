//! Acceptance criteria, one printed line each. Runs without the libtest
//! harness so the report reads top to bottom; the process fails when any
//! gating criterion fails.

use std::time::{Duration, Instant};

use peridyn::analysis::{convergence_rate, rate_from_norms, ConvergenceInput, MeshSeries};
use peridyn::deck::{Deck, IntegratorSpec};
use peridyn::discretization::{build_neighborhoods, generate_uniform_grid, Dim, NodeCloud, Placement};
use peridyn::integrator::{
    assemble_tangent_stiffness, clamped_dofs, newton_load_step, residual_at, run_explicit, total_energy,
    ExplicitConfig, ImplicitConfig, Scheme,
};
use peridyn::linalg::{solve, SolverKind, SparseMatrix};
use peridyn::material::{Body, BondBasedParams, FieldState, Influence, Material, StateBasedParams};
use peridyn::simulation::Simulation;
use peridyn::study::{run_bench, run_convergence};
use peridyn::validate::{
    run_case, tangent_diagnostics, Case, ValidationReport, BENCH_2D_DECK, CONVERGENCE_1D_DECK, TENSILE_2D_DECK,
};
use peridyn::{Error, Runtime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::*;

const BAR_RUNTIME: Duration = Duration::from_secs(30);
const PLATE_RUNTIME: Duration = Duration::from_secs(600);
const CONVERGENCE_RUNTIME: Duration = Duration::from_secs(900);
const TANGENT_NNZ: f64 = 20436.0;
const TANGENT_NNZ_TOL: f64 = 0.05;
const TANGENT_CONDITION: f64 = 90.688;
const TANGENT_CONDITION_TOL: f64 = 0.10;
const MIN_MEAN_RATE: f64 = 0.9;
const LINEARITY_TOL: f64 = 1e-6;
const SYMMETRY_TOL: f64 = 1e-6;
const ENERGY_DRIFT_TOL: f64 = 1e-3;
const MOMENTUM_TOL: f64 = 1e-10;
const SCHEME_TOL: f64 = 1e-8;
const GATHER_TOL: f64 = 1e-14;
const KRYLOV_TOL: f64 = 1e-8;
const RATE_TOL: f64 = 1e-10;
const MIN_EFFICIENCY: f64 = 0.5;

enum Verdict {
    Pass,
    Fail,
    /// Reported but not gating.
    Diagnostic(bool),
}

struct Outcome {
    verdict: Verdict,
    detail: String,
}

impl Outcome {
    fn gate(ok: bool, detail: String) -> Self {
        Outcome {
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            detail,
        }
    }
}

type CriterionResult = peridyn::Result<Outcome>;

fn validation(case: Case, rt: &Runtime, limit: Duration) -> CriterionResult {
    let start = Instant::now();
    let report: ValidationReport = run_case(case, &[], rt)?;
    let elapsed = start.elapsed();
    let mut parts: Vec<String> = report
        .checks
        .iter()
        .map(|c| format!("{} {:.3e} (tol {:.0e})", c.name, c.value, c.tolerance))
        .collect();
    parts.push(format!("runtime {:.2} s (limit {} s)", elapsed.as_secs_f64(), limit.as_secs()));
    Ok(Outcome::gate(report.passed() && elapsed < limit, parts.join("; ")))
}

fn criterion_1() -> CriterionResult {
    validation(Case::Tensile1d, &Runtime::serial(), BAR_RUNTIME)
}

fn criterion_2() -> CriterionResult {
    validation(Case::Tensile2d, &Runtime::new(4)?, PLATE_RUNTIME)
}

fn criterion_3() -> CriterionResult {
    let rt = Runtime::new(4)?;
    let sim = Simulation::from_deck(Deck::parse(TENSILE_2D_DECK, &[])?, &rt)?;
    let result = sim.run(&rt)?;
    let diag = tangent_diagnostics(&sim, &result.last().u, &rt)?;
    let nnz_err = (diag.free_nnz as f64 - TANGENT_NNZ).abs() / TANGENT_NNZ;
    let cond_err = (diag.free_condition - TANGENT_CONDITION).abs() / TANGENT_CONDITION;
    let within = nnz_err <= TANGENT_NNZ_TOL && cond_err <= TANGENT_CONDITION_TOL;
    Ok(Outcome {
        verdict: Verdict::Diagnostic(within),
        detail: format!(
            "free block {} dofs, nnz {} ({:+.1}% vs {TANGENT_NNZ}), condition {:.3} ({:+.1}% vs {TANGENT_CONDITION}); \
             interior block {} dofs, nnz {}, condition {:.3}; asymmetry {:.2e}",
            diag.free_dofs,
            diag.free_nnz,
            100.0 * (diag.free_nnz as f64 / TANGENT_NNZ - 1.0),
            diag.free_condition,
            100.0 * (diag.free_condition / TANGENT_CONDITION - 1.0),
            diag.interior_dofs,
            diag.interior_nnz,
            diag.interior_condition,
            diag.asymmetry
        ),
    })
}

fn criterion_4() -> CriterionResult {
    let rt = Runtime::from_env()?;
    let deck = Deck::parse(CONVERGENCE_1D_DECK, &[])?;
    let delta = deck.delta();
    let spacings: Vec<f64> = [2.0, 4.0, 8.0, 16.0].iter().map(|k| delta / k).collect();
    let start = Instant::now();
    let study = run_convergence(&deck, &spacings, &rt)?;
    let elapsed = start.elapsed();
    // Waves leaving the pulse reach the collars and merge after the sampled
    // window at this scale, so no time mask is applied.
    let means = study.means(None);
    let ok = means.iter().all(|m| m.is_some_and(|a| a >= MIN_MEAN_RATE)) && elapsed < CONVERGENCE_RUNTIME;
    let shown: Vec<String> = means
        .iter()
        .enumerate()
        .map(|(k, m)| match m {
            Some(a) => format!("set {} mean rate {a:.4}", k + 1),
            None => format!("set {} undefined", k + 1),
        })
        .collect();
    Ok(Outcome::gate(
        ok,
        format!(
            "{} (min {MIN_MEAN_RATE}); {} samples; runtime {:.1} s (limit {} s)",
            shown.join(", "),
            study.times.len(),
            elapsed.as_secs_f64(),
            CONVERGENCE_RUNTIME.as_secs()
        ),
    ))
}

fn plate_body(rng: &mut ChaCha8Rng, max_nodes: usize) -> peridyn::Result<(Body, f64)> {
    let h = 0.1;
    let nx = rng.gen_range(4..=14usize);
    let ny = rng.gen_range(2..=(max_nodes / nx).min(14));
    let bounds = [[0.0, (nx - 1) as f64 * h], [0.0, (ny - 1) as f64 * h]];
    let mut cloud = generate_uniform_grid(&bounds, h, Dim::TWO, Placement::Lattice)?;
    for i in cloud.select_box(&[0.0, 0.0], &[0.0, bounds[1][1]]) {
        cloud.tag_mut(i).clamped = [true, true, false];
    }
    let delta = rng.gen_range(1.0..3.0) * h;
    Ok((Body::new(cloud, delta, &Runtime::serial())?, delta))
}

fn relative(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

fn criterion_5() -> CriterionResult {
    let rt = Runtime::from_env()?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_dir, mut worst_sym) = (0.0f64, 0.0f64);
    let mut iterations = Vec::new();
    for _ in 0..8 {
        let (body, delta) = plate_body(&mut rng, 200)?;
        let dofs = body.dofs();
        let clamped = clamped_dofs(&body.cloud);
        let state = StateBasedParams {
            k: rng.gen_range(1e3..1e4),
            mu: rng.gen_range(1e3..1e4),
            delta,
        };
        // Linearise about a perturbed configuration, not only the reference.
        let u: Vec<f64> = (0..dofs).map(|k| if clamped[k] { 0.0 } else { rng.gen_range(-1e-4..1e-4) }).collect();
        let w: Vec<f64> = (0..dofs).map(|k| if clamped[k] { 0.0 } else { rng.gen_range(-1e-9..1e-9) }).collect();
        let uw: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a + b).collect();
        let k = assemble_tangent_stiffness(&body, &state, &u, 1e-7, &rt)?;
        let kw = k.spmv(&w, &rt)?;
        let zero = vec![0.0; dofs];
        let (r0, _) = residual_at(&body, &state, &u, &zero, &rt)?;
        let (r1, _) = residual_at(&body, &state, &uw, &zero, &rt)?;
        let free = |v: &[f64]| -> Vec<f64> { (0..dofs).map(|i| if clamped[i] { 0.0 } else { v[i] }).collect() };
        let oracle: Vec<f64> = (0..dofs).map(|i| -(r1[i] - r0[i])).collect();
        worst_dir = worst_dir.max(relative(&free(&kw), &free(&oracle)));
        worst_sym = worst_sym.max(k.asymmetry());

        // Linearised bond-based material: the residual is affine in u.
        let lp = BondBasedParams {
            c: rng.gen_range(1e3..1e4),
            beta: 1.0,
            delta,
            influence: Influence::default(),
            linearized: true,
        };
        let mut b = vec![0.0; dofs];
        let right = body.cloud.positions().iter().fold(0.0f64, |m, p| m.max(p[0]));
        for i in body.cloud.select_box(&[right, 0.0], &[right, f64::MAX]) {
            b[2 * i] = rng.gen_range(1.0..10.0);
            b[2 * i + 1] = rng.gen_range(-1.0..1.0);
        }
        let (_, r_initial) = residual_at(&body, &lp, &zero, &b, &rt)?;
        let cfg = ImplicitConfig {
            n_load_steps: 1,
            tau: 1e-6 * r_initial,
            upsilon: None,
            max_newton_iters: 5,
            solver: SolverKind::Bicgstab,
            solver_tol: 1e-10,
            solver_max_iters: None,
        };
        let mut u = zero.clone();
        iterations.push(newton_load_step(&body, &lp, &mut u, &b, &cfg, &rt)?.iterations);
    }
    let bar = Simulation::from_deck(Case::Tensile1d.deck(&[])?, &rt)?;
    if let IntegratorSpec::Implicit(cfg) = &bar.deck.integrator {
        let mut u = vec![0.0; bar.body.dofs()];
        iterations.push(newton_load_step(&bar.body, &bar.material, &mut u, &bar.initial.b, cfg, &rt)?.iterations);
    }
    let ok = worst_dir <= LINEARITY_TOL && worst_sym <= SYMMETRY_TOL && iterations.iter().all(|&n| n == 1);
    Ok(Outcome::gate(
        ok,
        format!(
            "directional error {worst_dir:.2e} (tol {LINEARITY_TOL:.0e}); asymmetry {worst_sym:.2e} (tol \
             {SYMMETRY_TOL:.0e}); Newton iterations {iterations:?}"
        ),
    ))
}

type PulseSetup = (Body, Box<dyn Material>, FieldState, ExplicitConfig);

fn pulse_deck(overrides: &[&str]) -> peridyn::Result<PulseSetup> {
    let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    let rt = Runtime::serial();
    let sim = Simulation::from_deck(Deck::parse(CONVERGENCE_1D_DECK, &overrides)?, &rt)?;
    let IntegratorSpec::Explicit(cfg) = sim.deck.integrator.clone() else {
        return Err(Error::Parameter("pulse deck must be explicit".into()));
    };
    Ok((sim.body, Box::new(sim.material), sim.initial, cfg))
}

fn criterion_6() -> CriterionResult {
    let rt = Runtime::from_env()?;
    let (body, material, initial, cfg) = pulse_deck(&[
        "geometry.h=0.005",
        "integrator.n_steps=10000",
        "integrator.output_stride=250",
        "integrator.energy=true",
    ])?;
    let snaps = run_explicit(&body, material.as_ref(), initial.clone(), &cfg, &rt)?;
    let e0 = total_energy(&body, &snaps[0].state);
    let drift = snaps.iter().map(|s| (total_energy(&body, &s.state) - e0).abs() / e0).fold(0.0, f64::max);
    let d = body.dim().get();
    let vol = body.cloud.volumes();
    let mut momentum = 0.0f64;
    for s in &snaps {
        for a in 0..d {
            let terms: Vec<f64> = (0..body.len()).map(|i| s.state.f[i * d + a] * vol[i]).collect();
            let peak = terms.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if peak > 0.0 {
                momentum = momentum.max(terms.iter().sum::<f64>().abs() / peak);
            }
        }
    }
    let short = ExplicitConfig {
        n_steps: 100,
        output_stride: 1,
        energy: false,
        ..cfg.clone()
    };
    let vv = run_explicit(&body, material.as_ref(), initial.clone(), &short, &rt)?;
    let cd = run_explicit(
        &body,
        material.as_ref(),
        initial,
        &ExplicitConfig {
            scheme: Scheme::CentralDifference,
            ..short
        },
        &rt,
    )?;
    let schemes = vv.iter().zip(&cd).skip(1).map(|(a, b)| relative(&a.state.u, &b.state.u)).fold(0.0, f64::max);
    let ok = drift <= ENERGY_DRIFT_TOL && momentum <= MOMENTUM_TOL && schemes <= SCHEME_TOL;
    Ok(Outcome::gate(
        ok,
        format!(
            "(a) energy drift {drift:.2e} over {} steps (tol {ENERGY_DRIFT_TOL:.0e}); (b) momentum {momentum:.2e} (tol \
             {MOMENTUM_TOL:.0e}); (c) Verlet vs central difference {schemes:.2e} (tol {SCHEME_TOL:.0e})",
            cfg.n_steps
        ),
    ))
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize, dim: Dim) -> peridyn::Result<NodeCloud> {
    let positions: Vec<[f64; 3]> = (0..n)
        .map(|_| {
            let mut p = [0.0; 3];
            for x in p.iter_mut().take(dim.get()) {
                *x = rng.gen_range(0.0..1.0);
            }
            p
        })
        .collect();
    NodeCloud::from_parts(dim, positions, vec![1e-3; n], vec![1.0; n], 0.05)
}

fn criterion_7() -> CriterionResult {
    let rt = Runtime::from_env()?;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut mismatched_rows = 0usize;
    let mut clouds = 0usize;
    for _ in 0..12 {
        let dim = Dim::new(rng.gen_range(1..=3))?;
        let n = rng.gen_range(2..=500);
        let cloud = random_cloud(&mut rng, n, dim)?;
        let delta = rng.gen_range(0.05..0.2);
        let nbrs = match build_neighborhoods(&cloud, delta, &rt) {
            Ok(nb) => nb,
            Err(Error::ZeroLengthBond(..)) => continue,
            Err(e) => return Err(e),
        };
        clouds += 1;
        let oracle = brute_force(&cloud, delta);
        mismatched_rows += (0..cloud.len()).filter(|&i| nbrs.row(i).neighbors != oracle[i].as_slice()).count();
    }

    let mut gather = 0.0f64;
    for dim in [Dim::ONE, Dim::TWO, Dim::THREE] {
        let bounds = vec![[0.0, 0.5]; dim.get()];
        let cloud = generate_uniform_grid(&bounds, 0.05, dim, Placement::Lattice)?;
        let delta = 0.151;
        let body = Body::new(cloud, delta, &rt)?;
        let u: Vec<f64> = (0..body.dofs()).map(|_| rng.gen_range(-1e-3..1e-3)).collect();
        let state = StateBasedParams { k: 3.0, mu: 2.0, delta };
        let mut f = vec![0.0; body.dofs()];
        state.internal_force(&body, &u, &rt, &mut f, None)?;
        gather = gather.max(max_rel_diff(&f, &scatter_state_forces(&body.cloud, &state, &u)));
        let bond = BondBasedParams {
            c: 2.0,
            beta: 50.0,
            delta,
            influence: Influence::default(),
            linearized: false,
        };
        bond.internal_force(&body, &u, &rt, &mut f, None)?;
        gather = gather.max(max_rel_diff(&f, &scatter_bond_forces(&body.cloud, &bond, &u)));
    }

    let mut krylov = 0.0f64;
    for _ in 0..10 {
        let n = rng.gen_range(5..60);
        let a = random_spd(n, &mut rng);
        let k = SparseMatrix::from_dense(n, n, &a)?;
        let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let exact = dense_solve(&a, n, &rhs);
        let scale = exact.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
        for kind in [SolverKind::Cg, SolverKind::Bicgstab] {
            let (x, report) = solve(kind, &k, &rhs, 1e-12, 20 * n, &rt)?;
            report.require("oracle solve", 1e-12)?;
            let err = x.iter().zip(&exact).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
            krylov = krylov.max(err / scale);
        }
    }

    let mut rate = 0.0f64;
    rate = rate.max((rate_from_norms(0.7, 0.7, 2.0).unwrap_or(f64::NAN) - 0.0).abs());
    rate = rate.max((rate_from_norms(0.7, 0.35, 2.0).unwrap_or(f64::NAN) - 1.0).abs());
    rate = rate.max((rate_from_norms(0.8, 0.2, 2.0).unwrap_or(f64::NAN) - 2.0).abs());
    let times = vec![0.0, 0.25];
    let meshes = [0.1, 0.05, 0.025].map(|h| {
        let cloud = generate_uniform_grid(&[[0.0, 1.0]], h, Dim::ONE, Placement::Lattice).expect("grid");
        let fields = times
            .iter()
            .map(|&t| cloud.positions().iter().map(|x| (x[0] + t).sin() + h * h * (2.0 * x[0]).cos()).collect())
            .collect();
        MeshSeries { cloud, fields }
    });
    for point in convergence_rate(&ConvergenceInput { meshes, ratio: 2.0, times })? {
        rate = rate.max((point.alpha.unwrap_or(f64::NAN) - 2.0).abs());
    }

    let ok = mismatched_rows == 0 && clouds > 0 && gather <= GATHER_TOL && krylov <= KRYLOV_TOL && rate <= RATE_TOL;
    Ok(Outcome::gate(
        ok,
        format!(
            "neighbour rows differing from scan {mismatched_rows} over {clouds} clouds; gather vs scatter \
             {gather:.2e} (tol {GATHER_TOL:.0e}); Krylov vs dense {krylov:.2e} (tol {KRYLOV_TOL:.0e}); rate \
             plug-in {rate:.2e} (tol {RATE_TOL:.0e})"
        ),
    ))
}

fn criterion_8() -> CriterionResult {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let max_threads = cores.max(4);
    let mut identical = true;
    for case in Case::ALL {
        let deck = case.deck(&[])?;
        let mut reference: Option<Vec<u64>> = None;
        for threads in [1, 2, max_threads] {
            let rt = Runtime::new(threads)?;
            let sim = Simulation::from_deck(deck.clone(), &rt)?;
            let bits: Vec<u64> = sim.run(&rt)?.last().u.iter().map(|x| x.to_bits()).collect();
            match &reference {
                None => reference = Some(bits),
                Some(r) => identical &= *r == bits,
            }
        }
    }
    let deck = Deck::parse(BENCH_2D_DECK, &[])?;
    let nodes = Simulation::from_deck(deck.clone(), &Runtime::serial())?.body.len();
    let bench = run_bench(&deck, &[1, 2, 3, 4])?;
    identical &= bench.identical;
    let walls: Vec<f64> = bench.rows.iter().map(|r| r.wall_s).collect();
    let decreasing = walls.windows(2).all(|w| w[1] < w[0]);
    let efficiency = bench.rows.last().map_or(0.0, |r| r.efficiency);
    let ok = identical && decreasing && efficiency >= MIN_EFFICIENCY;
    let shown: Vec<String> = bench.rows.iter().map(|r| format!("{}:{:.3}s", r.threads, r.wall_s)).collect();
    Ok(Outcome::gate(
        ok,
        format!(
            "bitwise identical at 1/2/{max_threads} threads: {identical}; bench {nodes} nodes wall {}; strictly \
             decreasing: {decreasing}; efficiency at 4 threads {efficiency:.2} (min {MIN_EFFICIENCY}); {cores} \
             core(s) available",
            shown.join(" ")
        ),
    ))
}

type Criterion = (&'static str, fn() -> CriterionResult);

fn main() {
    let criteria: [Criterion; 8] = [
        ("1d implicit tensile", criterion_1),
        ("2d implicit tensile", criterion_2),
        ("tangent matrix reproduction", criterion_3),
        ("explicit 1d convergence", criterion_4),
        ("state material linearity", criterion_5),
        ("explicit scheme physics", criterion_6),
        ("oracle equivalence", criterion_7),
        ("determinism and scaling", criterion_8),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let label = format!("criterion {} ({name})", k + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        match run() {
            Ok(Outcome { verdict, detail }) => {
                let tag = match verdict {
                    Verdict::Pass => "PASS",
                    Verdict::Fail => {
                        failed += 1;
                        "FAIL"
                    }
                    Verdict::Diagnostic(true) => "DIAGNOSTIC within tolerance",
                    Verdict::Diagnostic(false) => "DIAGNOSTIC outside tolerance",
                };
                println!("{label}: {tag}: {detail}");
            }
            Err(e) => {
                failed += 1;
                println!("{label}: FAIL: error: {e}");
            }
        }
    }
    println!("acceptance: {failed} gating criteria failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
