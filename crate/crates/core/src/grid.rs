//! Truncated cell-centred lattice with region classification.

use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometric description of a region. Membership is by cell centre;
/// boxes are half-open `[a, b)` per axis, discs are open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Interval { a: f64, b: f64 },
    Rect { lo: [f64; 2], hi: [f64; 2] },
    Disc { center: [f64; 2], radius: f64 },
    Annulus { center: [f64; 2], inner: f64, outer: f64 },
}

impl Shape {
    pub fn dim(&self) -> usize {
        match self {
            Shape::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        match *self {
            Shape::Interval { a, b } => p[0] >= a && p[0] < b,
            Shape::Rect { lo, hi } => p[0] >= lo[0] && p[0] < hi[0] && p[1] >= lo[1] && p[1] < hi[1],
            Shape::Disc { center, radius } => dist(p, center) < radius,
            Shape::Annulus {
                center,
                inner,
                outer,
            } => {
                let r = dist(p, center);
                r >= inner && r < outer
            }
        }
    }

    fn contains_closed(&self, p: [f64; 2], eps: f64) -> bool {
        match *self {
            Shape::Interval { a, b } => p[0] >= a - eps && p[0] <= b + eps,
            Shape::Rect { lo, hi } => {
                p[0] >= lo[0] - eps && p[0] <= hi[0] + eps && p[1] >= lo[1] - eps && p[1] <= hi[1] + eps
            }
            Shape::Disc { center, radius } => dist(p, center) <= radius + eps,
            Shape::Annulus {
                center,
                inner,
                outer,
            } => {
                let r = dist(p, center);
                r >= inner - eps && r <= outer + eps
            }
        }
    }

    /// Points on the boundary, dense enough for containment checks.
    fn boundary_samples(&self) -> Vec<[f64; 2]> {
        match *self {
            Shape::Interval { a, b } => vec![[a, 0.0], [b, 0.0]],
            Shape::Rect { lo, hi } => {
                let mut v = Vec::new();
                for k in 0..=64 {
                    let t = k as f64 / 64.0;
                    let x = lo[0] + t * (hi[0] - lo[0]);
                    let y = lo[1] + t * (hi[1] - lo[1]);
                    v.extend([[x, lo[1]], [x, hi[1]], [lo[0], y], [hi[0], y]]);
                }
                v
            }
            Shape::Disc { center, radius } => circle(center, radius),
            Shape::Annulus { center, outer, .. } => circle(center, outer),
        }
    }

    /// Axis-aligned bounding box `(lo, hi)`; 1D shapes use the first axis only.
    pub fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        match *self {
            Shape::Interval { a, b } => ([a, 0.0], [b, 0.0]),
            Shape::Rect { lo, hi } => (lo, hi),
            Shape::Disc { center, radius } | Shape::Annulus { center, outer: radius, .. } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
        }
    }

    fn valid(&self) -> bool {
        match *self {
            Shape::Interval { a, b } => a.is_finite() && b.is_finite() && a < b,
            Shape::Rect { lo, hi } => lo[0] < hi[0] && lo[1] < hi[1],
            Shape::Disc { radius, .. } => radius > 0.0,
            Shape::Annulus { inner, outer, .. } => inner >= 0.0 && inner < outer,
        }
    }
}

fn dist(p: [f64; 2], c: [f64; 2]) -> f64 {
    ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt()
}

fn circle(c: [f64; 2], r: f64) -> Vec<[f64; 2]> {
    (0..720)
        .map(|k| {
            let t = k as f64 * std::f64::consts::PI / 360.0;
            [c[0] + r * t.cos(), c[1] + r * t.sin()]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub name: String,
    pub shape: Shape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub h: f64,
    pub box_radius: f64,
    pub omega: Shape,
    pub support: Shape,
    #[serde(default)]
    pub windows: Vec<WindowSpec>,
}

impl GridSpec {
    /// The 1D desk configuration: `Omega = (-1,1)`, `Omega_1 = (-2,2)`, `R = 4`,
    /// windows `W1 = (1.2,1.8)` and `W2 = (-1.8,-1.2)`.
    pub fn desk_1d(h: f64) -> Self {
        GridSpec {
            dim: 1,
            h,
            box_radius: 4.0,
            omega: Shape::Interval { a: -1.0, b: 1.0 },
            support: Shape::Interval { a: -2.0, b: 2.0 },
            windows: vec![
                WindowSpec {
                    name: "W1".into(),
                    shape: Shape::Interval { a: 1.2, b: 1.8 },
                },
                WindowSpec {
                    name: "W2".into(),
                    shape: Shape::Interval { a: -1.8, b: -1.2 },
                },
            ],
        }
    }

    pub fn with_window(mut self, name: &str, shape: Shape) -> Self {
        self.windows.retain(|w| w.name != name);
        self.windows.push(WindowSpec {
            name: name.to_string(),
            shape,
        });
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Region {
    Interior,
    ExteriorSupport,
    ExteriorFar,
}

impl Region {
    pub fn code(self) -> u8 {
        match self {
            Region::Interior => 0,
            Region::ExteriorSupport => 1,
            Region::ExteriorFar => 2,
        }
    }
}

/// Region selector for restriction and zero-extension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sel {
    Interior,
    ExteriorSupport,
    Far,
    Window(String),
}

impl Sel {
    pub fn window(name: &str) -> Self {
        Sel::Window(name.to_string())
    }
}

/// Lattice of cell centres `x_i = -R + h (i + 1/2)` on `[-R, R]^dim`, ordered
/// lexicographically (first coordinate slowest).
///
/// Degrees of freedom live on the non-FAR ("active") nodes. Index lists
/// other than `active` are positions in the active numbering.
#[derive(Debug, Clone)]
pub struct Grid {
    spec: GridSpec,
    id: u64,
    per_axis: usize,
    coords: Vec<[f64; 2]>,
    regions: Vec<Region>,
    active: Vec<usize>,
    active_pos: Vec<Option<usize>>,
    interior: Vec<usize>,
    exterior: Vec<usize>,
    windows: BTreeMap<String, Vec<usize>>,
}

pub fn build_grid(spec: GridSpec) -> Result<Grid> {
    Grid::new(spec)
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        let GridSpec {
            dim, h, box_radius, ..
        } = spec;
        if dim != 1 && dim != 2 {
            return Err(Error::Geometry(format!("dim must be 1 or 2, got {dim}")));
        }
        if !(h > 0.0 && h.is_finite()) || !(box_radius > 0.0) {
            return Err(Error::Geometry("need h > 0 and R > 0".into()));
        }
        for (what, sh) in [("omega", &spec.omega), ("support", &spec.support)]
            .into_iter()
            .chain(spec.windows.iter().map(|w| ("window", &w.shape)))
        {
            if sh.dim() != dim || !sh.valid() {
                return Err(Error::Geometry(format!("{what} shape {sh:?} invalid for dim {dim}")));
            }
        }
        let eps = 1e-12 * box_radius;
        if !spec
            .omega
            .boundary_samples()
            .iter()
            .all(|&p| spec.support.contains_closed(p, eps))
        {
            return Err(Error::Geometry("omega is not contained in the support set".into()));
        }
        if !spec
            .support
            .boundary_samples()
            .iter()
            .all(|&p| p[0].abs() < box_radius && p[1].abs() < box_radius)
        {
            return Err(Error::Geometry("support set is not strictly inside the box".into()));
        }

        let n = (2.0 * box_radius / h).round() as usize;
        if ((n as f64) * h - 2.0 * box_radius).abs() > 1e-9 * box_radius {
            return Err(Error::Geometry(format!("2R = {} is not a multiple of h = {h}", 2.0 * box_radius)));
        }
        let axis: Vec<f64> = (0..n).map(|i| -box_radius + h * (i as f64 + 0.5)).collect();
        let coords: Vec<[f64; 2]> = if dim == 1 {
            axis.iter().map(|&x| [x, 0.0]).collect()
        } else {
            axis.iter()
                .flat_map(|&x| axis.iter().map(move |&y| [x, y]))
                .collect()
        };

        let regions: Vec<Region> = coords
            .iter()
            .map(|&p| {
                if spec.omega.contains(p) {
                    Region::Interior
                } else if spec.support.contains(p) {
                    Region::ExteriorSupport
                } else {
                    Region::ExteriorFar
                }
            })
            .collect();
        // Omega nodes must also be support nodes
        if coords
            .iter()
            .any(|&p| spec.omega.contains(p) && !spec.support.contains(p))
        {
            return Err(Error::Geometry("omega nodes outside the support set".into()));
        }

        let mut active = Vec::new();
        let mut active_pos = vec![None; coords.len()];
        let mut interior = Vec::new();
        let mut exterior = Vec::new();
        for (g, r) in regions.iter().enumerate() {
            if *r == Region::ExteriorFar {
                continue;
            }
            let k = active.len();
            active_pos[g] = Some(k);
            active.push(g);
            match r {
                Region::Interior => interior.push(k),
                _ => exterior.push(k),
            }
        }
        if interior.is_empty() {
            return Err(Error::EmptyRegion("omega captures no nodes".into()));
        }
        if exterior.is_empty() {
            return Err(Error::EmptyRegion("support minus omega captures no nodes".into()));
        }

        let mut windows = BTreeMap::new();
        for w in &spec.windows {
            let mut idx = Vec::new();
            for (k, &g) in active.iter().enumerate() {
                if w.shape.contains(coords[g]) {
                    if regions[g] != Region::ExteriorSupport {
                        return Err(Error::Geometry(format!(
                            "window {} reaches a node outside support minus omega",
                            w.name
                        )));
                    }
                    idx.push(k);
                }
            }
            // nodes beyond the support also disqualify the window
            if coords
                .iter()
                .zip(&regions)
                .any(|(&p, &r)| r == Region::ExteriorFar && w.shape.contains(p))
            {
                return Err(Error::Geometry(format!(
                    "window {} reaches beyond the support set",
                    w.name
                )));
            }
            if idx.is_empty() {
                return Err(Error::EmptyRegion(format!("window {} captures no nodes", w.name)));
            }
            windows.insert(w.name.clone(), idx);
        }

        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        serde_json::to_string(&spec).unwrap_or_default().hash(&mut hasher);
        let id = hasher.finish();

        Ok(Grid {
            spec,
            id,
            per_axis: n,
            coords,
            regions,
            active,
            active_pos,
            interior,
            exterior,
            windows,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }
    pub fn id(&self) -> u64 {
        self.id
    }
    pub fn dim(&self) -> usize {
        self.spec.dim
    }
    pub fn h(&self) -> f64 {
        self.spec.h
    }
    pub fn box_radius(&self) -> f64 {
        self.spec.box_radius
    }
    /// Nodes per axis.
    pub fn per_axis(&self) -> usize {
        self.per_axis
    }
    /// Quadrature weight `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.spec.h.powi(self.spec.dim as i32)
    }
    pub fn len(&self) -> usize {
        self.coords.len()
    }
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }
    pub fn region(&self, node: usize) -> Region {
        self.regions[node]
    }
    pub fn regions(&self) -> &[Region] {
        &self.regions
    }
    /// Global indices of non-FAR nodes.
    pub fn active(&self) -> &[usize] {
        &self.active
    }
    pub fn n_active(&self) -> usize {
        self.active.len()
    }
    pub fn active_pos(&self, node: usize) -> Option<usize> {
        self.active_pos[node]
    }
    /// Coordinates of active node `k`.
    pub fn active_coord(&self, k: usize) -> [f64; 2] {
        self.coords[self.active[k]]
    }
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }
    pub fn exterior(&self) -> &[usize] {
        &self.exterior
    }
    pub fn window(&self, name: &str) -> Result<&[usize]> {
        self.windows
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::UnknownRegion(name.to_string()))
    }
    pub fn window_names(&self) -> impl Iterator<Item = &str> {
        self.windows.keys().map(|s| s.as_str())
    }

    /// Active-index list of a region. FAR nodes have no active positions.
    pub fn select(&self, sel: &Sel) -> Result<&[usize]> {
        match sel {
            Sel::Interior => Ok(&self.interior),
            Sel::ExteriorSupport => Ok(&self.exterior),
            Sel::Far => Ok(&[]),
            Sel::Window(name) => self.window(name),
        }
    }

    /// Node counts per region: (interior, exterior support, far).
    pub fn counts(&self) -> (usize, usize, usize) {
        (
            self.interior.len(),
            self.exterior.len(),
            self.len() - self.active.len(),
        )
    }

    /// Active-index list of nodes inside an ad-hoc shape (must lie in support minus omega).
    pub fn nodes_in(&self, shape: &Shape) -> Result<Vec<usize>> {
        let idx: Vec<usize> = self
            .exterior
            .iter()
            .copied()
            .filter(|&k| shape.contains(self.active_coord(k)))
            .collect();
        if idx.is_empty() {
            return Err(Error::EmptyRegion(format!("{shape:?} captures no exterior nodes")));
        }
        Ok(idx)
    }

    pub fn zeros(&self) -> GridFunction {
        GridFunction {
            grid_id: self.id,
            values: DVector::zeros(self.len()),
        }
    }

    /// Samples `f` at node centres, zero on FAR nodes.
    pub fn sample<F: Fn([f64; 2]) -> f64>(&self, f: F) -> GridFunction {
        let values = DVector::from_iterator(
            self.len(),
            self.coords.iter().zip(&self.regions).map(|(&p, &r)| {
                if r == Region::ExteriorFar {
                    0.0
                } else {
                    f(p)
                }
            }),
        );
        GridFunction {
            grid_id: self.id,
            values,
        }
    }

    pub fn function(&self, values: DVector<f64>) -> Result<GridFunction> {
        if values.len() != self.len() {
            return Err(Error::Domain(format!(
                "length {} does not match node count {}",
                values.len(),
                self.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite grid values".into()));
        }
        if self
            .regions
            .iter()
            .zip(values.iter())
            .any(|(r, v)| *r == Region::ExteriorFar && *v != 0.0)
        {
            return Err(Error::Domain("grid function must vanish on FAR nodes".into()));
        }
        Ok(GridFunction {
            grid_id: self.id,
            values,
        })
    }

    pub fn check(&self, u: &GridFunction) -> Result<()> {
        if u.grid_id != self.id || u.values.len() != self.len() {
            return Err(Error::GridMismatch("grid function belongs to another grid".into()));
        }
        Ok(())
    }

    /// Values on active nodes.
    pub fn to_active(&self, u: &GridFunction) -> Result<DVector<f64>> {
        self.check(u)?;
        Ok(DVector::from_iterator(
            self.active.len(),
            self.active.iter().map(|&g| u.values[g]),
        ))
    }

    pub fn from_active(&self, v: &DVector<f64>) -> GridFunction {
        assert_eq!(v.len(), self.active.len());
        let mut u = self.zeros();
        for (k, &g) in self.active.iter().enumerate() {
            u.values[g] = v[k];
        }
        u
    }

    /// Restriction to a region: the subvector on its nodes.
    pub fn restrict(&self, u: &GridFunction, sel: &Sel) -> Result<DVector<f64>> {
        self.check(u)?;
        if *sel == Sel::Far {
            let far: Vec<f64> = self
                .regions
                .iter()
                .zip(u.values.iter())
                .filter(|(r, _)| **r == Region::ExteriorFar)
                .map(|(_, v)| *v)
                .collect();
            return Ok(DVector::from_vec(far));
        }
        let idx = self.select(sel)?;
        Ok(DVector::from_iterator(
            idx.len(),
            idx.iter().map(|&k| u.values[self.active[k]]),
        ))
    }

    /// Zero-extension of a subvector living on a region.
    pub fn embed(&self, v: &DVector<f64>, sel: &Sel) -> Result<GridFunction> {
        if *sel == Sel::Far {
            return Err(Error::Domain("FAR nodes carry no degrees of freedom".into()));
        }
        let idx = self.select(sel)?;
        if v.len() != idx.len() {
            return Err(Error::Domain(format!(
                "subvector length {} does not match region size {}",
                v.len(),
                idx.len()
            )));
        }
        let mut u = self.zeros();
        for (i, &k) in idx.iter().enumerate() {
            u.values[self.active[k]] = v[i];
        }
        Ok(u)
    }

    /// `chi_Omega u`.
    pub fn chi_omega(&self, u: &GridFunction) -> Result<GridFunction> {
        let v = self.restrict(u, &Sel::Interior)?;
        self.embed(&v, &Sel::Interior)
    }

    /// Weighted `L^2` inner product over a list of active indices.
    pub fn dot_on(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        self.cell_volume() * a.dot(b)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "dim": self.spec.dim,
            "h": self.spec.h,
            "box_radius": self.spec.box_radius,
            "omega": self.spec.omega,
            "support": self.spec.support,
            "windows": self.spec.windows,
            "regions": self.regions.iter().map(|r| r.code()).collect::<Vec<_>>(),
        })
    }
}

/// Real values on all lattice nodes, identically zero on FAR nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid_id: u64,
    pub values: DVector<f64>,
}

impl GridFunction {
    pub fn grid_id(&self) -> u64 {
        self.grid_id
    }

    pub fn scale(&self, a: f64) -> GridFunction {
        GridFunction {
            grid_id: self.grid_id,
            values: &self.values * a,
        }
    }

    pub fn axpy(&self, a: f64, other: &GridFunction) -> GridFunction {
        assert_eq!(self.grid_id, other.grid_id);
        GridFunction {
            grid_id: self.grid_id,
            values: &self.values + &other.values * a,
        }
    }
}
