//! Simulation decks.
//!
//! A deck is a YAML document with the top-level keys `units`, `geometry`,
//! `horizon`, `material`, `integrator`, `boundary_conditions`,
//! `initial_conditions` and `output`. Loading converts every dimensional
//! quantity to SI (m, Pa, N) and rewrites `units` accordingly, so a loaded
//! deck serialises to an equivalent SI deck.
//!
//! ```yaml
//! units: { length: mm, stress: GPa, force: N }
//! geometry: { dim: 1, bounds: [[0, 16000]], h: 500, cross_section: 1.0e6 }
//! horizon: { delta: 1000 }
//! material: { kind: state_based, youngs_modulus: 4, poissons_ratio: 0.3 }
//! integrator: { kind: implicit, tau: 1.0e-9, solver: bicgstab }
//! boundary_conditions:
//!   clamped: [{ box: { lo: [0], hi: [0] }, axes: [0] }]
//!   loads: [{ box: { lo: [16000], hi: [16000] }, force_per_node: [40] }]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_yaml::Value;

use crate::analysis::GaussianIc;
use crate::discretization::{Dim, Placement};
use crate::integrator::{ExplicitConfig, ImplicitConfig};
use crate::material::{BondBasedParams, Influence, MaterialModel, StateBasedParams};

#[derive(Debug, thiserror::Error)]
pub enum DeckError {
    #[error("cannot read deck {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("YAML syntax error{}: {message}", location.map(|(l, c)| format!(" at line {l}, column {c}")).unwrap_or_default())]
    Parse {
        location: Option<(usize, usize)>,
        message: String,
    },
    #[error("invalid deck field `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invalid override `{0}`: expected key.path=value")]
    Override(String),
    #[error("invalid deck: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LengthUnit {
    #[serde(rename = "m")]
    Meter,
    #[serde(rename = "mm")]
    Millimeter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StressUnit {
    Pa,
    #[serde(rename = "kPa")]
    KiloPa,
    #[serde(rename = "MPa")]
    MegaPa,
    #[serde(rename = "GPa")]
    GigaPa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ForceUnit {
    #[default]
    N,
    #[serde(rename = "kN")]
    KiloN,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    pub length: LengthUnit,
    pub stress: StressUnit,
    #[serde(default)]
    pub force: ForceUnit,
}

impl Units {
    pub const SI: Units = Units {
        length: LengthUnit::Meter,
        stress: StressUnit::Pa,
        force: ForceUnit::N,
    };

    fn length(&self, x: f64) -> f64 {
        match self.length {
            LengthUnit::Meter => x,
            LengthUnit::Millimeter => x / 1000.0,
        }
    }

    fn length_pow(&self, x: f64, power: i32) -> f64 {
        match self.length {
            LengthUnit::Meter => x,
            LengthUnit::Millimeter => x / 1000f64.powi(power),
        }
    }

    fn stress(&self, x: f64) -> f64 {
        match self.stress {
            StressUnit::Pa => x,
            StressUnit::KiloPa => x * 1e3,
            StressUnit::MegaPa => x * 1e6,
            StressUnit::GigaPa => x * 1e9,
        }
    }

    fn force(&self, x: f64) -> f64 {
        match self.force {
            ForceUnit::N => x,
            ForceUnit::KiloN => x * 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub dim: usize,
    /// One `[lo, hi]` pair per axis.
    pub bounds: Vec<[f64; 2]>,
    pub h: f64,
    #[serde(default)]
    pub placement: Placement,
    /// Cross-section area in 1D, thickness in 2D, unused in 3D.
    #[serde(default = "unit_value")]
    pub cross_section: f64,
    #[serde(default = "unit_value")]
    pub density: f64,
}

fn unit_value() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Horizon {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Horizon as a multiple of the spacing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_d: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaterialSpec {
    BondBased(BondBasedSpec),
    StateBased(StateBasedSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BondBasedSpec {
    pub c: f64,
    pub beta: f64,
    #[serde(default)]
    pub influence: Influence,
    #[serde(default)]
    pub linearized: bool,
}

/// Either `E` (with optional `nu`) or `K` and `mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateBasedSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub youngs_modulus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poissons_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bulk_modulus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shear_modulus: Option<f64>,
}

/// Poisson ratio assumed when a state-based block gives only `E`.
pub const DEFAULT_POISSON: f64 = 0.3;

/// Bulk and shear modulus of the state-based model matching `E` and `nu`
/// in `dim` dimensions (plane stress in 2D).
pub fn elastic_constants(dim: Dim, e: f64, nu: f64) -> (f64, f64) {
    match dim.get() {
        1 => (e / 9.0, e / (2.0 * (1.0 + nu))),
        2 => (2.0 * e / (9.0 * (1.0 - nu)), 4.0 * e / (15.0 * (1.0 + nu))),
        _ => (e / (3.0 * (1.0 - 2.0 * nu)), e / (2.0 * (1.0 + nu))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntegratorSpec {
    Explicit(ExplicitConfig),
    Implicit(ImplicitConfig),
}

/// Axis-aligned closed box over reference coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSelector {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Clamp {
    #[serde(rename = "box")]
    pub region: BoxSelector,
    pub axes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Load {
    #[serde(rename = "box")]
    pub region: BoxSelector,
    /// Force vector applied to every selected node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force_per_node: Option<Vec<f64>>,
    /// Force vector shared equally among the selected nodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_force: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConditions {
    #[serde(default)]
    pub clamped: Vec<Clamp>,
    #[serde(default)]
    pub loads: Vec<Load>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialConditions {
    #[default]
    Zero,
    Gaussian(GaussianIc),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Vtk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub format: OutputFormat,
}

fn one() -> usize {
    1
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            directory: None,
            stride: 1,
            format: OutputFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Deck {
    pub units: Units,
    pub geometry: Geometry,
    pub horizon: Horizon,
    pub material: MaterialSpec,
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub boundary_conditions: BoundaryConditions,
    #[serde(default)]
    pub initial_conditions: InitialConditions,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Reads, converts and validates a deck file.
pub fn load_deck(path: &Path) -> Result<Deck, DeckError> {
    load_deck_with(path, &[])
}

/// [`load_deck`] with `key.path=value` overrides applied before validation.
pub fn load_deck_with(path: &Path, overrides: &[String]) -> Result<Deck, DeckError> {
    let text = std::fs::read_to_string(path).map_err(|source| DeckError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Deck::parse(&text, overrides)
}

impl Deck {
    pub fn parse(text: &str, overrides: &[String]) -> Result<Deck, DeckError> {
        let mut value: Value = serde_yaml::from_str(text).map_err(|e| DeckError::Parse {
            location: e.location().map(|l| (l.line(), l.column())),
            message: e.to_string(),
        })?;
        for item in overrides {
            apply_override(&mut value, item)?;
        }
        let raw: Deck = serde_path_to_error::deserialize(value.clone()).map_err(|e| {
            let path = e.path().to_string();
            refine_tagged(&value, &path).unwrap_or(DeckError::Schema {
                path,
                message: e.inner().to_string(),
            })
        })?;
        let deck = raw.into_si();
        deck.validate()?;
        Ok(deck)
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("decks always serialise")
    }

    pub fn dim(&self) -> Result<Dim, DeckError> {
        Dim::new(self.geometry.dim).map_err(|e| DeckError::Invalid(e.to_string()))
    }

    /// Horizon in metres.
    pub fn delta(&self) -> f64 {
        match (self.horizon.delta, self.horizon.m_d) {
            (Some(d), _) => d,
            (None, Some(m)) => m * self.geometry.h,
            (None, None) => f64::NAN,
        }
    }

    fn into_si(mut self) -> Deck {
        let u = self.units;
        let d = self.geometry.dim as i32;
        let g = &mut self.geometry;
        for b in &mut g.bounds {
            *b = [u.length(b[0]), u.length(b[1])];
        }
        g.h = u.length(g.h);
        g.cross_section = u.length_pow(g.cross_section, 3 - d);
        self.horizon.delta = self.horizon.delta.map(|x| u.length(x));
        if let MaterialSpec::StateBased(m) = &mut self.material {
            for m in [&mut m.youngs_modulus, &mut m.bulk_modulus, &mut m.shear_modulus] {
                *m = m.map(|x| u.stress(x));
            }
        }
        let bc = &mut self.boundary_conditions;
        let boxes = bc
            .clamped
            .iter_mut()
            .map(|c| &mut c.region)
            .chain(bc.loads.iter_mut().map(|l| &mut l.region));
        for region in boxes {
            region.lo.iter_mut().chain(region.hi.iter_mut()).for_each(|x| *x = u.length(*x));
        }
        for load in &mut bc.loads {
            for f in load.force_per_node.iter_mut().chain(load.total_force.iter_mut()) {
                f.iter_mut().for_each(|x| *x = u.force(*x));
            }
        }
        if let InitialConditions::Gaussian(ic) = &mut self.initial_conditions {
            ic.width = u.length_pow(ic.width, 2);
            for p in &mut ic.pulses {
                p.center.iter_mut().chain(p.amplitude.iter_mut()).for_each(|x| *x = u.length(*x));
            }
        }
        self.units = Units::SI;
        self
    }

    fn validate(&self) -> Result<(), DeckError> {
        let invalid = |m: String| Err(DeckError::Invalid(m));
        let dim = self.dim()?.get();
        let g = &self.geometry;
        if g.bounds.len() != dim {
            return invalid(format!("geometry.bounds has {} axes for dim {dim}", g.bounds.len()));
        }
        if !(g.h > 0.0 && g.h.is_finite()) {
            return invalid(format!("geometry.h must be positive, got {}", g.h));
        }
        if !(g.cross_section > 0.0 && g.density > 0.0) {
            return invalid("geometry.cross_section and geometry.density must be positive".into());
        }
        match (self.horizon.delta, self.horizon.m_d) {
            (Some(_), Some(_)) | (None, None) => {
                return invalid("horizon needs exactly one of delta or m_d".into());
            }
            _ => {}
        }
        let delta = self.delta();
        if !(delta >= g.h) {
            return invalid(format!("horizon {delta} m is smaller than the spacing {} m", g.h));
        }
        self.material_model().map_err(|e| DeckError::Invalid(e.to_string()))?;
        match &self.integrator {
            IntegratorSpec::Explicit(c) => c.validate(),
            IntegratorSpec::Implicit(c) => c.validate(),
        }
        .map_err(|e| DeckError::Invalid(e.to_string()))?;
        for clamp in &self.boundary_conditions.clamped {
            check_box(&clamp.region, dim)?;
            if clamp.axes.is_empty() || clamp.axes.iter().any(|&a| a >= dim) {
                return invalid(format!("clamp axes {:?} invalid for dim {dim}", clamp.axes));
            }
        }
        for load in &self.boundary_conditions.loads {
            check_box(&load.region, dim)?;
            match (&load.force_per_node, &load.total_force) {
                (Some(f), None) | (None, Some(f)) if f.len() == dim => {}
                _ => return invalid(format!("each load needs one force vector of length {dim}")),
            }
        }
        if let InitialConditions::Gaussian(ic) = &self.initial_conditions {
            ic.validate(dim).map_err(|e| DeckError::Invalid(e.to_string()))?;
        }
        if self.output.stride == 0 {
            return invalid("output.stride must be at least 1".into());
        }
        Ok(())
    }

    /// Constitutive model in SI units.
    pub fn material_model(&self) -> crate::Result<MaterialModel> {
        let delta = self.delta();
        let dim = Dim::new(self.geometry.dim)?;
        let model = match &self.material {
            MaterialSpec::BondBased(b) => MaterialModel::BondBased(BondBasedParams {
                c: b.c,
                beta: b.beta,
                delta,
                influence: b.influence,
                linearized: b.linearized,
            }),
            MaterialSpec::StateBased(s) => {
                let poissons_ratio = s.poissons_ratio;
                let (k, mu) = match (s.youngs_modulus, s.bulk_modulus, s.shear_modulus) {
                    (Some(e), None, None) => {
                        let nu = poissons_ratio.unwrap_or(DEFAULT_POISSON);
                        if !(-1.0 < nu && nu < 0.5) {
                            return Err(crate::Error::Parameter(format!("Poisson ratio {nu} outside (-1, 0.5)")));
                        }
                        elastic_constants(dim, e, nu)
                    }
                    (None, Some(k), Some(mu)) if poissons_ratio.is_none() => (k, mu),
                    _ => {
                        return Err(crate::Error::Parameter(
                            "state-based material needs youngs_modulus (and poissons_ratio) or bulk_modulus and shear_modulus"
                                .into(),
                        ))
                    }
                };
                MaterialModel::StateBased(StateBasedParams { k, mu, delta })
            }
        };
        model.validate()?;
        Ok(model)
    }
}

fn schema_error<T: serde::de::DeserializeOwned>(body: Value, key: &str) -> Option<DeckError> {
    let err = serde_path_to_error::deserialize::<_, T>(body).err()?;
    let inner = err.path().to_string();
    let path = if inner == "." { key.to_string() } else { format!("{key}.{inner}") };
    Some(DeckError::Schema {
        path,
        message: err.inner().to_string(),
    })
}

/// Locates a schema error inside a `kind`-tagged block, whose field path
/// the tagged-enum deserializer does not track.
fn refine_tagged(root: &Value, path: &str) -> Option<DeckError> {
    let block = root.get(path)?.as_mapping()?;
    let kind = block.get("kind")?.as_str()?;
    let mut body = block.clone();
    body.remove("kind");
    let body = Value::Mapping(body);
    match (path, kind) {
        ("material", "bond_based") => schema_error::<BondBasedSpec>(body, path),
        ("material", "state_based") => schema_error::<StateBasedSpec>(body, path),
        ("integrator", "explicit") => schema_error::<ExplicitConfig>(body, path),
        ("integrator", "implicit") => schema_error::<ImplicitConfig>(body, path),
        ("initial_conditions", "gaussian") => schema_error::<GaussianIc>(body, path),
        _ => None,
    }
}

fn check_box(b: &BoxSelector, dim: usize) -> Result<(), DeckError> {
    if b.lo.len() != dim || b.hi.len() != dim {
        return Err(DeckError::Invalid(format!("box selectors need {dim} lower and upper bounds")));
    }
    if b.lo.iter().zip(&b.hi).any(|(l, h)| l > h || l.is_nan() || h.is_nan()) {
        return Err(DeckError::Invalid(format!("box selector {:?}..{:?} is empty", b.lo, b.hi)));
    }
    Ok(())
}

/// Sets `key.path=value` in a YAML tree; numeric segments index sequences.
pub fn apply_override(root: &mut Value, item: &str) -> Result<(), DeckError> {
    let (key, raw) = item.split_once('=').ok_or_else(|| DeckError::Override(item.to_string()))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(DeckError::Override(item.to_string()));
    }
    let value: Value = serde_yaml::from_str(raw.trim()).map_err(|_| DeckError::Override(item.to_string()))?;
    let mut node = root;
    for segment in key.split('.') {
        if let (Value::Sequence(seq), Ok(idx)) = (&*node, segment.parse::<usize>()) {
            if idx >= seq.len() {
                return Err(DeckError::Override(item.to_string()));
            }
            let Value::Sequence(seq) = node else { unreachable!() };
            node = &mut seq[idx];
            continue;
        }
        if !node.is_mapping() {
            *node = Value::Mapping(Default::default());
        }
        let Value::Mapping(map) = node else { unreachable!() };
        node = map.entry(Value::String(segment.to_string())).or_insert(Value::Null);
    }
    *node = value;
    Ok(())
}
