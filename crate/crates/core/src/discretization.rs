//! Uniform node clouds, horizon neighbourhoods and partial-volume weights.

use std::fmt;

use crate::error::{Error, Result};
use crate::runtime::Runtime;

/// Spatial dimension, 1 to 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dim(usize);

impl Dim {
    pub const ONE: Dim = Dim(1);
    pub const TWO: Dim = Dim(2);
    pub const THREE: Dim = Dim(3);

    pub fn new(d: usize) -> Result<Self> {
        match d {
            1..=3 => Ok(Dim(d)),
            _ => Err(Error::Dimension(format!("dimension must be 1, 2 or 3, got {d}"))),
        }
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Measure of the unit-radius ball scaled to radius `delta`.
    pub fn ball_measure(self, delta: f64) -> f64 {
        match self.0 {
            1 => 2.0 * delta,
            2 => std::f64::consts::PI * delta * delta,
            _ => 4.0 / 3.0 * std::f64::consts::PI * delta.powi(3),
        }
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl TryFrom<usize> for Dim {
    type Error = Error;
    fn try_from(d: usize) -> Result<Self> {
        Dim::new(d)
    }
}

/// Where nodes sit inside the cells of the uniform grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Nodes on the lattice points, including the domain boundary.
    #[default]
    Lattice,
    /// Nodes at the centres of the `extent / h` cells.
    CellCenter,
}

/// Boundary-condition role of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BcTag {
    pub clamped: [bool; 3],
    pub loaded: bool,
}

impl BcTag {
    pub fn is_free(&self) -> bool {
        !self.loaded && !self.clamped.iter().any(|&c| c)
    }

    pub fn is_clamped(&self, axis: usize) -> bool {
        self.clamped[axis]
    }
}

/// Discrete material points of a body.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeCloud {
    dim: Dim,
    positions: Vec<[f64; 3]>,
    volumes: Vec<f64>,
    densities: Vec<f64>,
    spacing: f64,
    measure: f64,
    bc_tags: Vec<BcTag>,
}

impl NodeCloud {
    /// Builds a cloud from explicit node data. Unused coordinates of
    /// `positions` must be zero.
    pub fn from_parts(
        dim: Dim,
        positions: Vec<[f64; 3]>,
        volumes: Vec<f64>,
        densities: Vec<f64>,
        spacing: f64,
    ) -> Result<Self> {
        let n = positions.len();
        if n == 0 {
            return Err(Error::Geometry("a node cloud needs at least one node".into()));
        }
        if volumes.len() != n || densities.len() != n {
            return Err(Error::Geometry(format!(
                "{n} positions but {} volumes and {} densities",
                volumes.len(),
                densities.len()
            )));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Geometry(format!("spacing must be positive, got {spacing}")));
        }
        if let Some(i) = volumes.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Geometry(format!("node {i} has non-positive volume {}", volumes[i])));
        }
        if let Some(i) = densities.iter().position(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::Geometry(format!("node {i} has non-positive density {}", densities[i])));
        }
        for (i, p) in positions.iter().enumerate() {
            if p.iter().any(|c| !c.is_finite()) || p[dim.get()..].iter().any(|&c| c != 0.0) {
                return Err(Error::Geometry(format!("node {i} has invalid coordinates {p:?}")));
            }
        }
        let measure = volumes.iter().sum();
        Ok(NodeCloud {
            dim,
            bc_tags: vec![BcTag::default(); n],
            positions,
            volumes,
            densities,
            spacing,
            measure,
        })
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i][..self.dim.get()]
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn bc_tags(&self) -> &[BcTag] {
        &self.bc_tags
    }

    /// Number of degrees of freedom, `d * n`.
    pub fn dofs(&self) -> usize {
        self.dim.get() * self.len()
    }

    /// Measure of the region covered by the node cells.
    pub fn domain_measure(&self) -> f64 {
        self.measure
    }

    pub fn set_density(&mut self, rho: f64) -> Result<()> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Parameter(format!("density must be positive, got {rho}")));
        }
        self.densities.iter_mut().for_each(|r| *r = rho);
        Ok(())
    }

    pub fn tag_mut(&mut self, i: usize) -> &mut BcTag {
        &mut self.bc_tags[i]
    }

    /// Index of the node closest to `point`; ties resolve to the lower index.
    pub fn nearest(&self, point: &[f64]) -> usize {
        let d = self.dim.get();
        let mut best = (f64::INFINITY, 0);
        for (i, p) in self.positions.iter().enumerate() {
            let dist: f64 = (0..d).map(|a| (p[a] - point.get(a).copied().unwrap_or(0.0)).powi(2)).sum();
            if dist < best.0 {
                best = (dist, i);
            }
        }
        best.1
    }

    /// Indices of nodes inside the closed box `[lo, hi]`, padded by a small
    /// fraction of the spacing to absorb lattice round-off.
    pub fn select_box(&self, lo: &[f64], hi: &[f64]) -> Vec<usize> {
        let pad = 1e-6 * self.spacing;
        let d = self.dim.get();
        (0..self.len())
            .filter(|&i| {
                (0..d).all(|a| {
                    let x = self.positions[i][a];
                    let l = lo.get(a).copied().unwrap_or(f64::NEG_INFINITY);
                    let h = hi.get(a).copied().unwrap_or(f64::INFINITY);
                    x >= l - pad && x <= h + pad
                })
            })
            .collect()
    }
}

/// Nodes of a uniform grid with spacing `h` over `bounds` (one `[lo, hi]`
/// pair per axis). Axis 0 varies fastest.
pub fn generate_uniform_grid(bounds: &[[f64; 2]], h: f64, dim: Dim, placement: Placement) -> Result<NodeCloud> {
    let d = dim.get();
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Geometry(format!("spacing h must be positive and finite, got {h}")));
    }
    if bounds.len() != d {
        return Err(Error::Geometry(format!("{d}-dimensional grid needs {d} bounds, got {}", bounds.len())));
    }
    let mut counts = [1usize; 3];
    let mut measure = 1.0;
    for (a, &[lo, hi]) in bounds.iter().enumerate() {
        let extent = hi - lo;
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::Geometry(format!("axis {a}: degenerate domain [{lo}, {hi}]")));
        }
        let cells = (extent / h).round();
        if cells < 1.0 || (cells * h - extent).abs() > 1e-9 * extent {
            return Err(Error::Geometry(format!(
                "axis {a}: spacing {h} does not divide the extent {extent}"
            )));
        }
        let cells = cells as usize;
        counts[a] = match placement {
            Placement::Lattice => cells + 1,
            Placement::CellCenter => cells,
        };
        measure *= counts[a] as f64 * h;
    }
    let n: usize = counts.iter().product();
    let offset = match placement {
        Placement::Lattice => 0.0,
        Placement::CellCenter => 0.5,
    };
    let mut positions = Vec::with_capacity(n);
    for k in 0..counts[2] {
        for j in 0..counts[1] {
            for i in 0..counts[0] {
                let mut p = [0.0; 3];
                for (a, &idx) in [i, j, k].iter().enumerate().take(d) {
                    p[a] = bounds[a][0] + (idx as f64 + offset) * h;
                }
                positions.push(p);
            }
        }
    }
    let mut cloud = NodeCloud::from_parts(dim, positions, vec![h.powi(d as i32); n], vec![1.0; n], h)?;
    cloud.measure = measure;
    Ok(cloud)
}

/// Partial-volume factor of a bond of length `bond_length`.
pub fn volume_correction(bond_length: f64, delta: f64, h: f64) -> f64 {
    if bond_length <= delta - 0.5 * h {
        1.0
    } else if bond_length <= delta + 0.5 * h {
        ((delta + 0.5 * h - bond_length) / h).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Borrowed view of one neighbourhood row.
#[derive(Debug, Clone, Copy)]
pub struct Row<'a> {
    pub neighbors: &'a [usize],
    pub lengths: &'a [f64],
    pub corrections: &'a [f64],
}

impl Row<'_> {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }
}

/// Horizon neighbourhoods in compressed row form.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    horizon: f64,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    bond_lengths: Vec<f64>,
    vol_corrections: Vec<f64>,
}

impl NeighborList {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of rows (nodes).
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bond_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn neighbors(&self) -> &[usize] {
        &self.neighbors
    }

    pub fn bond_lengths(&self) -> &[f64] {
        &self.bond_lengths
    }

    pub fn vol_corrections(&self) -> &[f64] {
        &self.vol_corrections
    }

    pub fn row(&self, i: usize) -> Row<'_> {
        let r = self.offsets[i]..self.offsets[i + 1];
        Row {
            neighbors: &self.neighbors[r.clone()],
            lengths: &self.bond_lengths[r.clone()],
            corrections: &self.vol_corrections[r],
        }
    }

    /// Position of `j` inside row `i`.
    pub fn position_in_row(&self, i: usize, j: usize) -> Option<usize> {
        self.row(i).neighbors.binary_search(&j).ok()
    }

    pub fn max_row_len(&self) -> usize {
        self.offsets.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }

    /// Whether `j` in row `i` implies `i` in row `j` for every bond.
    pub fn is_symmetric(&self) -> bool {
        (0..self.len()).all(|i| self.row(i).neighbors.iter().all(|&j| self.position_in_row(j, i).is_some()))
    }
}

/// Euclidean distance between two padded positions.
#[inline]
pub fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2)).sqrt()
}

/// Uniform bins of edge `size` over the bounding box of the cloud.
struct Bins {
    origin: [f64; 3],
    size: f64,
    shape: [usize; 3],
    starts: Vec<usize>,
    members: Vec<usize>,
}

impl Bins {
    fn new(cloud: &NodeCloud, size: f64) -> Self {
        let d = cloud.dim().get();
        let mut origin = [0.0; 3];
        let mut upper = [0.0; 3];
        for a in 0..d {
            origin[a] = cloud.positions.iter().map(|p| p[a]).fold(f64::INFINITY, f64::min);
            upper[a] = cloud.positions.iter().map(|p| p[a]).fold(f64::NEG_INFINITY, f64::max);
        }
        let mut shape = [1; 3];
        for a in 0..d {
            shape[a] = (((upper[a] - origin[a]) / size).floor() as usize) + 1;
        }
        let mut bins = Bins {
            origin,
            size,
            shape,
            starts: Vec::new(),
            members: Vec::new(),
        };
        let keys: Vec<usize> = cloud.positions.iter().map(|p| bins.flat(bins.coords(p))).collect();
        let total = shape.iter().product::<usize>();
        let mut counts = vec![0usize; total + 1];
        for &k in &keys {
            counts[k + 1] += 1;
        }
        for b in 0..total {
            counts[b + 1] += counts[b];
        }
        let mut fill = counts.clone();
        let mut members = vec![0; keys.len()];
        for (i, &k) in keys.iter().enumerate() {
            members[fill[k]] = i;
            fill[k] += 1;
        }
        bins.starts = counts;
        bins.members = members;
        bins
    }

    fn coords(&self, p: &[f64; 3]) -> [usize; 3] {
        let mut c = [0; 3];
        for a in 0..3 {
            if self.shape[a] > 1 {
                c[a] = (((p[a] - self.origin[a]) / self.size).floor().max(0.0) as usize).min(self.shape[a] - 1);
            }
        }
        c
    }

    fn flat(&self, c: [usize; 3]) -> usize {
        c[0] + self.shape[0] * (c[1] + self.shape[1] * c[2])
    }

    fn candidates(&self, p: &[f64; 3], out: &mut Vec<usize>) {
        out.clear();
        let c = self.coords(p);
        let range = |a: usize| c[a].saturating_sub(1)..=(c[a] + 1).min(self.shape[a] - 1);
        for z in range(2) {
            for y in range(1) {
                for x in range(0) {
                    let b = self.flat([x, y, z]);
                    out.extend_from_slice(&self.members[self.starts[b]..self.starts[b + 1]]);
                }
            }
        }
        out.sort_unstable();
    }
}

/// Every `j != i` with `|X_j - X_i| <= delta + h/2`, in ascending order.
pub fn build_neighborhoods(cloud: &NodeCloud, delta: f64, rt: &Runtime) -> Result<NeighborList> {
    let h = cloud.spacing();
    if !delta.is_finite() || delta < h {
        return Err(Error::Horizon(format!("horizon {delta} must be at least the spacing {h}")));
    }
    let radius = delta + 0.5 * h;
    let bins = Bins::new(cloud, radius);
    let pos = &cloud.positions;
    let rows: Vec<Vec<(usize, f64)>> = rt.map(cloud.len(), |i| {
        let mut candidates = Vec::new();
        bins.candidates(&pos[i], &mut candidates);
        candidates
            .into_iter()
            .filter(|&j| j != i)
            .map(|j| (j, distance(&pos[i], &pos[j])))
            .filter(|&(_, l)| l <= radius)
            .collect()
    });
    let mut offsets = Vec::with_capacity(rows.len() + 1);
    offsets.push(0);
    for row in &rows {
        offsets.push(offsets.last().unwrap() + row.len());
    }
    let total = *offsets.last().unwrap();
    let mut neighbors = Vec::with_capacity(total);
    let mut bond_lengths = Vec::with_capacity(total);
    let mut vol_corrections = Vec::with_capacity(total);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, l) in row {
            if l == 0.0 {
                return Err(Error::ZeroLengthBond(i, j));
            }
            neighbors.push(j);
            bond_lengths.push(l);
            vol_corrections.push(volume_correction(l, delta, h));
        }
    }
    Ok(NeighborList {
        horizon: delta,
        offsets,
        neighbors,
        bond_lengths,
        vol_corrections,
    })
}
