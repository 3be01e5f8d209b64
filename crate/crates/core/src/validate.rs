//! Built-in tensile cases checked against classical elasticity.

use std::fmt;
use std::str::FromStr;

use crate::analysis::{ccm_1d_tensile, ccm_2d_tensile, comparison_csv, Comparison};
use crate::deck::{Deck, MaterialSpec, StateBasedSpec, DEFAULT_POISSON};
use crate::error::{Error, Result};
use crate::integrator::{assemble_tangent_stiffness, clamped_dofs, NewtonReport};
use crate::linalg::{condition_number, SparseMatrix};
use crate::material::{compute_dilatation, compute_weighted_volumes};
use crate::runtime::Runtime;
use crate::simulation::Simulation;

pub const TENSILE_1D_DECK: &str = include_str!("../decks/tensile_1d.yaml");
pub const TENSILE_2D_DECK: &str = include_str!("../decks/tensile_2d.yaml");
pub const CONVERGENCE_1D_DECK: &str = include_str!("../decks/convergence_1d.yaml");
pub const BENCH_2D_DECK: &str = include_str!("../decks/bench_2d.yaml");

/// Strain and stress tolerance of the bar case, relative.
pub const BAR_FIELD_TOL: f64 = 0.05;
/// Energy density tolerance of the bar case, relative.
pub const BAR_ENERGY_TOL: f64 = 0.10;
/// Centre-node x-position tolerance of the plate case, relative.
pub const PLATE_POSITION_TOL: f64 = 5e-4;
/// Centre-node y-position tolerance of the plate case, absolute.
pub const PLATE_SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    Tensile1d,
    Tensile2d,
}

impl Case {
    pub const ALL: [Case; 2] = [Case::Tensile1d, Case::Tensile2d];

    pub fn name(self) -> &'static str {
        match self {
            Case::Tensile1d => "1d-tensile",
            Case::Tensile2d => "2d-tensile",
        }
    }

    pub fn deck_text(self) -> &'static str {
        match self {
            Case::Tensile1d => TENSILE_1D_DECK,
            Case::Tensile2d => TENSILE_2D_DECK,
        }
    }

    pub fn deck(self, overrides: &[String]) -> Result<Deck> {
        Ok(Deck::parse(self.deck_text(), overrides)?)
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Case {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Case::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown case '{s}', expected one of 1d-tensile, 2d-tensile"))
    }
}

/// One tolerance check of a validation case.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance,
        }
    }

    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub case: Case,
    pub rows: Vec<Comparison>,
    pub checks: Vec<Check>,
    pub newton: Vec<NewtonReport>,
    /// Informational lines that do not gate the result.
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn csv(&self) -> String {
        comparison_csv(&self.rows)
    }

    pub fn summary(&self) -> String {
        let mut out = format!("case {}\n", self.case);
        for (s, report) in self.newton.iter().enumerate() {
            let trace: Vec<String> = report.residuals.iter().map(|r| format!("{r:.3e}")).collect();
            out.push_str(&format!(
                "load step {}: {} Newton iterations, |r| = [{}]\n",
                s + 1,
                report.iterations,
                trace.join(", ")
            ));
        }
        for c in &self.checks {
            let verdict = if c.passed() { "PASS" } else { "FAIL" };
            out.push_str(&format!("{verdict} {}: {:.3e} (tolerance {:.1e})\n", c.name, c.value, c.tolerance));
        }
        for n in &self.notes {
            out.push_str(n);
            out.push('\n');
        }
        out.push_str(if self.passed() { "result: PASS\n" } else { "result: FAIL\n" });
        out
    }
}

fn youngs_modulus(deck: &Deck) -> Result<(f64, f64)> {
    match &deck.material {
        MaterialSpec::StateBased(StateBasedSpec {
            youngs_modulus: Some(e),
            poissons_ratio,
            ..
        }) => Ok((*e, poissons_ratio.unwrap_or(DEFAULT_POISSON))),
        _ => Err(Error::Parameter("validation cases need a state-based material given by E".into())),
    }
}

/// Sum of the applied forces along axis 0.
fn total_axial_force(deck: &Deck, sim: &Simulation) -> f64 {
    let d = sim.body.dim().get();
    let vol = sim.body.cloud.volumes();
    let cs = deck.geometry.cross_section;
    (0..sim.body.len()).map(|i| sim.initial.b[i * d] * vol[i] * cs).sum()
}

pub fn run_case(case: Case, overrides: &[String], rt: &Runtime) -> Result<ValidationReport> {
    let deck = case.deck(overrides)?;
    let sim = Simulation::from_deck(deck, rt)?;
    match case {
        Case::Tensile1d => tensile_1d(sim, rt),
        Case::Tensile2d => tensile_2d(sim, rt),
    }
}

fn tensile_1d(sim: Simulation, rt: &Runtime) -> Result<ValidationReport> {
    let deck = &sim.deck;
    let (e, _) = youngs_modulus(deck)?;
    let force = total_axial_force(deck, &sim);
    let exact = ccm_1d_tensile(force, deck.geometry.cross_section, e);
    let result = sim.run(rt)?;
    let state = result.last();
    let body = &sim.body;
    let m = compute_weighted_volumes(body, rt)?;
    let theta = compute_dilatation(body, &m, &state.u, rt)?;
    let [lo, hi] = deck.geometry.bounds[0];
    let margin = 2.0 * deck.delta();
    let tol = 1e-9 * body.cloud.spacing();
    let mut rows = Vec::new();
    let (mut strain_err, mut stress_err, mut energy_err) = (0.0_f64, 0.0_f64, 0.0_f64);
    for (i, p) in body.cloud.positions().iter().enumerate() {
        if p[0] - lo < margin - tol || hi - p[0] < margin - tol {
            continue;
        }
        let strain = theta[i] / 3.0;
        let cmp = [
            Comparison::new(i, "strain", strain, exact.strain),
            Comparison::new(i, "stress", e * strain, exact.stress),
            Comparison::new(i, "energy", state.energy[i], exact.energy),
        ];
        strain_err = strain_err.max(cmp[0].rel_error());
        stress_err = stress_err.max(cmp[1].rel_error());
        energy_err = energy_err.max(cmp[2].rel_error());
        rows.extend(cmp);
    }
    if rows.is_empty() {
        return Err(Error::Geometry("no node lies two horizons away from both ends".into()));
    }
    Ok(ValidationReport {
        case: Case::Tensile1d,
        rows,
        checks: vec![
            Check::new("max interior strain error", strain_err, BAR_FIELD_TOL),
            Check::new("max interior stress error", stress_err, BAR_FIELD_TOL),
            Check::new("max interior energy error", energy_err, BAR_ENERGY_TOL),
        ],
        newton: result.newton,
        notes: Vec::new(),
    })
}

fn tensile_2d(sim: Simulation, rt: &Runtime) -> Result<ValidationReport> {
    let deck = &sim.deck;
    let (e, nu) = youngs_modulus(deck)?;
    let [x0, x1] = deck.geometry.bounds[0];
    let [y0, y1] = deck.geometry.bounds[1];
    let width = x1 - x0;
    // Tension is positive: the load pulls the free edge away from the clamp.
    let force = -total_axial_force(deck, &sim);
    let t = deck.geometry.cross_section;
    let result = sim.run(rt)?;
    let state = result.last();
    let cloud = &sim.body.cloud;
    let centre = cloud.nearest(&[0.5 * (x0 + x1), 0.5 * (y0 + y1)]);
    let p = cloud.positions()[centre];
    let (ux, uy) = ccm_2d_tensile(force, e, nu, width, t, [p[0] - x0, p[1] - y0]);
    let rows = vec![
        Comparison::new(centre, "x_position", p[0] + state.u[2 * centre], p[0] + ux),
        Comparison::new(centre, "y_position", p[1] + state.u[2 * centre + 1], p[1] + uy),
        Comparison::new(centre, "u_x", state.u[2 * centre], ux),
        Comparison::new(centre, "u_y", state.u[2 * centre + 1], uy),
    ];
    let y_error = (rows[1].pd - rows[1].ccm).abs();
    let mut notes = vec![format!(
        "centre node {centre} at ({}, {}): displacement error {:.3e} relative",
        p[0],
        p[1],
        rows[2].rel_error()
    )];
    let diag = tangent_diagnostics(&sim, &state.u, rt)?;
    notes.push(diag.summary());
    Ok(ValidationReport {
        case: Case::Tensile2d,
        checks: vec![
            Check::new("centre x-position error", rows[0].rel_error(), PLATE_POSITION_TOL),
            Check::new("centre y-position error", y_error, PLATE_SYMMETRY_TOL),
        ],
        rows,
        newton: result.newton,
        notes,
    })
}

/// Size and conditioning of the assembled tangent.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentDiagnostics {
    pub dofs: usize,
    /// Nonzeros including the identity rows of clamped DOFs.
    pub nnz: usize,
    pub free_dofs: usize,
    pub free_nnz: usize,
    pub free_condition: f64,
    /// Block left after also removing the DOFs of loaded nodes.
    pub interior_dofs: usize,
    pub interior_nnz: usize,
    pub interior_condition: f64,
    /// `||K - K^T||_F / ||K||_F` over the free block.
    pub asymmetry: f64,
}

impl TangentDiagnostics {
    pub fn summary(&self) -> String {
        format!(
            "tangent: {} DOFs, nnz {}; free block {} DOFs, nnz {}, condition {:.4}; \
             interior block {} DOFs, nnz {}, condition {:.4}; asymmetry {:.2e}",
            self.dofs,
            self.nnz,
            self.free_dofs,
            self.free_nnz,
            self.free_condition,
            self.interior_dofs,
            self.interior_nnz,
            self.interior_condition,
            self.asymmetry
        )
    }
}

pub fn tangent_diagnostics(sim: &Simulation, u: &[f64], rt: &Runtime) -> Result<TangentDiagnostics> {
    let body = &sim.body;
    let d = body.dim().get();
    let upsilon = match &sim.deck.integrator {
        crate::deck::IntegratorSpec::Implicit(cfg) => cfg.perturbation(body.cloud.spacing()),
        crate::deck::IntegratorSpec::Explicit(_) => 1e-6 * body.cloud.spacing(),
    };
    let k = assemble_tangent_stiffness(body, &sim.material, u, upsilon, rt)?;
    let clamped = clamped_dofs(&body.cloud);
    let tags = body.cloud.bc_tags();
    let free: Vec<usize> = (0..k.rows()).filter(|&r| !clamped[r]).collect();
    let interior: Vec<usize> = free.iter().copied().filter(|&r| !tags[r / d].loaded).collect();
    let free_k = k.submatrix(&free);
    let interior_k = k.submatrix(&interior);
    Ok(TangentDiagnostics {
        dofs: k.rows(),
        nnz: k.nnz(),
        free_dofs: free.len(),
        free_nnz: free_k.nnz(),
        free_condition: dense_condition(&free_k),
        interior_dofs: interior.len(),
        interior_nnz: interior_k.nnz(),
        interior_condition: dense_condition(&interior_k),
        asymmetry: free_k.asymmetry(),
    })
}

fn dense_condition(k: &SparseMatrix) -> f64 {
    if k.rows() == 0 {
        return f64::NAN;
    }
    condition_number(k)
}
