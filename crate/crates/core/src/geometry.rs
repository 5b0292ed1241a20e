//! Uniform lattices, domain masks, balls, condensers and space-time cylinders.
//!
//! All node coordinates are integer multiples of the spacing `h`, so two
//! lattices with the same spacing agree exactly on shared nodes. One-dimensional
//! points use the first coordinate and keep the second at zero.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

/// A point in R^N, N <= 2. In 1-D the second coordinate is zero.
pub type Point = [f64; 2];

/// Relative tolerance used for strict ball membership on the lattice.
const MEMBERSHIP_EPS: f64 = 1e-12;

pub fn distance(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// A rectangular block of lattice nodes with spacing `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    dim: usize,
    h: f64,
    lo: [i64; 2],
    shape: [usize; 2],
}

impl Lattice {
    pub fn new(dim: usize, h: f64, lo: [i64; 2], shape: [usize; 2]) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(invalid("dim", format!("{dim} is not 1 or 2")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid("h", format!("{h} must be positive")));
        }
        let shape = if dim == 1 { [shape[0], 1] } else { shape };
        let lo = if dim == 1 { [lo[0], 0] } else { lo };
        if shape[0] == 0 || shape[1] == 0 {
            return Err(invalid("shape", "empty lattice"));
        }
        Ok(Self { dim, h, lo, shape })
    }

    /// Smallest block covering the closed ball of `radius` around `center`,
    /// padded by `margin` extra layers.
    pub fn covering(dim: usize, h: f64, center: &Point, radius: f64, margin: i64) -> Result<Self> {
        let mut lo = [0i64; 2];
        let mut shape = [1usize; 2];
        for a in 0..dim {
            let a_lo = ((center[a] - radius) / h).floor() as i64 - margin;
            let a_hi = ((center[a] + radius) / h).ceil() as i64 + margin;
            lo[a] = a_lo;
            shape[a] = (a_hi - a_lo + 1) as usize;
        }
        Self::new(dim, h, lo, shape)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    pub fn lo(&self) -> [i64; 2] {
        self.lo
    }

    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume element h^N.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn index(&self, ij: [usize; 2]) -> usize {
        ij[1] * self.shape[0] + ij[0]
    }

    pub fn multi(&self, idx: usize) -> [usize; 2] {
        [idx % self.shape[0], idx / self.shape[0]]
    }

    /// Global integer coordinates of a node.
    pub fn global(&self, idx: usize) -> [i64; 2] {
        let [i, j] = self.multi(idx);
        [self.lo[0] + i as i64, self.lo[1] + j as i64]
    }

    /// Local index of the node with the given global coordinates.
    pub fn locate(&self, g: [i64; 2]) -> Option<usize> {
        let i = g[0] - self.lo[0];
        let j = g[1] - self.lo[1];
        if i < 0 || j < 0 || i >= self.shape[0] as i64 || j >= self.shape[1] as i64 {
            return None;
        }
        Some(self.index([i as usize, j as usize]))
    }

    pub fn coords(&self, idx: usize) -> Point {
        let g = self.global(idx);
        [g[0] as f64 * self.h, g[1] as f64 * self.h]
    }

    /// Whether the block contains every node of `other` (same spacing assumed).
    pub fn contains_lattice(&self, other: &Lattice) -> bool {
        (0..self.dim).all(|a| {
            other.lo[a] >= self.lo[a]
                && other.lo[a] + other.shape[a] as i64 <= self.lo[a] + self.shape[a] as i64
        })
    }

    /// Axis neighbours (2N of them), `None` where the neighbour is off the block.
    pub fn axis_neighbors(&self, idx: usize) -> impl Iterator<Item = Option<usize>> + '_ {
        let g = self.global(idx);
        let dim = self.dim;
        (0..2 * dim).map(move |k| {
            let mut n = g;
            n[k / 2] += if k % 2 == 0 { -1 } else { 1 };
            self.locate(n)
        })
    }

    /// Nodes strictly inside the open ball.
    pub fn nodes_in_ball(&self, center: &Point, radius: f64) -> Vec<usize> {
        (0..self.len()).filter(|&i| in_open_ball(&self.coords(i), center, radius)).collect()
    }

    /// Cells of the block, each listed by its lower-left node.
    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        let [nx, ny] = self.shape;
        let cy = if self.dim == 2 { ny - 1 } else { 1 };
        (0..cy).flat_map(move |j| (0..nx - 1).map(move |i| j * nx + i))
    }

    /// Corner nodes of the cell with lower-left node `c`: `[c, c+e1]` in 1-D,
    /// `[c, c+e1, c+e2, c+e1+e2]` in 2-D.
    pub fn cell_corners(&self, c: usize) -> [usize; 4] {
        let nx = self.shape[0];
        if self.dim == 1 {
            [c, c + 1, c, c + 1]
        } else {
            [c, c + 1, c + nx, c + nx + 1]
        }
    }

    pub fn cell_center(&self, c: usize) -> Point {
        let x = self.coords(c);
        let half = 0.5 * self.h;
        if self.dim == 1 {
            [x[0] + half, 0.0]
        } else {
            [x[0] + half, x[1] + half]
        }
    }
}

pub(crate) fn in_open_ball(x: &Point, center: &Point, radius: f64) -> bool {
    let d2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
    d2 < radius * radius * (1.0 - MEMBERSHIP_EPS)
}

pub(crate) fn in_closed_ball(x: &Point, center: &Point, radius: f64) -> bool {
    let d2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
    d2 <= radius * radius * (1.0 + MEMBERSHIP_EPS)
}

/// Named domain shapes. Each variant describes the complement R^N \ Ω near
/// the origin; the computational domain is the open box minus that set.
#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    /// Complement {x1 <= 0}.
    FlatHalfspace,
    /// Closed cone with vertex at the origin, axis -e1 and full opening `angle`.
    ExteriorCone { angle: f64 },
    /// Complement {x2 = 0, x1 <= 0}; in 1-D the single point {0}.
    Slit,
    /// Complement {x1 <= 0} union {x1 > 0, |x2| <= x1^width_exponent}.
    Spike { width_exponent: f64 },
    /// Complement is the closed ball of `radius` around the origin.
    FullBallComplement { radius: f64 },
}

impl Scenario {
    pub const NAMES: [&'static str; 5] =
        ["flat-halfspace", "exterior-cone", "slit", "spike", "full-ball-complement"];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::FlatHalfspace => "flat-halfspace",
            Scenario::ExteriorCone { .. } => "exterior-cone",
            Scenario::Slit => "slit",
            Scenario::Spike { .. } => "spike",
            Scenario::FullBallComplement { .. } => "full-ball-complement",
        }
    }

    /// Build a scenario from its name and a single optional shape parameter.
    pub fn from_name(name: &str, parameter: Option<f64>) -> Result<Self> {
        let s = match name {
            "flat-halfspace" => Scenario::FlatHalfspace,
            "exterior-cone" => Scenario::ExteriorCone { angle: parameter.unwrap_or(std::f64::consts::FRAC_PI_2) },
            "slit" => Scenario::Slit,
            "spike" => Scenario::Spike { width_exponent: parameter.unwrap_or(3.0) },
            "full-ball-complement" => Scenario::FullBallComplement { radius: parameter.unwrap_or(0.5) },
            other => return Err(Error::UnknownScenario(other.to_string())),
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Scenario::ExteriorCone { angle } if !(angle > 0.0 && angle < 2.0 * std::f64::consts::PI) => {
                Err(invalid("angle", format!("{angle} outside (0, 2*pi)")))
            }
            Scenario::Spike { width_exponent } if !(width_exponent > 0.0) => {
                Err(invalid("width_exponent", format!("{width_exponent} must be positive")))
            }
            Scenario::FullBallComplement { radius } if !(radius > 0.0) => {
                Err(invalid("radius", format!("{radius} must be positive")))
            }
            _ => Ok(()),
        }
    }

    /// Whether `x` belongs to the closed complement of the scenario.
    pub fn complement_contains(&self, x: &Point, dim: usize) -> bool {
        let [x1, x2] = *x;
        match *self {
            Scenario::FlatHalfspace => x1 <= 0.0,
            Scenario::ExteriorCone { angle } => {
                if dim == 1 {
                    return x1 <= 0.0;
                }
                let r = (x1 * x1 + x2 * x2).sqrt();
                r == 0.0 || -x1 >= r * (0.5 * angle).cos() - 1e-12 * r
            }
            Scenario::Slit => {
                if dim == 1 {
                    x1 == 0.0
                } else {
                    x2 == 0.0 && x1 <= 0.0
                }
            }
            Scenario::Spike { width_exponent } => {
                if x1 <= 0.0 {
                    true
                } else {
                    dim == 2 && x2.abs() <= x1.powf(width_exponent)
                }
            }
            Scenario::FullBallComplement { radius } => in_closed_ball(x, &[0.0, 0.0], radius),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::ExteriorCone { angle } => write!(f, "exterior-cone({angle})"),
            Scenario::Spike { width_exponent } => write!(f, "spike({width_exponent})"),
            Scenario::FullBallComplement { radius } => write!(f, "full-ball-complement({radius})"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    /// Accepts `name` or `name(parameter)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.find('(') {
            None => Scenario::from_name(s, None),
            Some(open) => {
                let inner = s[open + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| Error::UnknownScenario(s.to_string()))?;
                let value: f64 = inner
                    .trim()
                    .parse()
                    .map_err(|_| invalid("scenario parameter", format!("cannot parse `{inner}`")))?;
                Scenario::from_name(s[..open].trim(), Some(value))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeLabel {
    Interior,
    Boundary,
    Exterior,
}

/// Lattice discretization of a bounded open set Ω inside the box
/// [-L, L]^N. Nodes on the outer ring of the box always belong to the
/// complement, which keeps Ω bounded.
#[derive(Debug, Clone)]
pub struct GridDomain {
    lattice: Lattice,
    name: String,
    inside: Vec<bool>,
    labels: Vec<NodeLabel>,
    periodic: bool,
}

/// Shape, dimension and box half-width of a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub scenario: Scenario,
    pub dim: usize,
    pub half_extent: f64,
}

impl DomainSpec {
    pub fn new(scenario: Scenario, dim: usize) -> Self {
        Self { scenario, dim, half_extent: 1.0 }
    }

    pub fn with_half_extent(mut self, half_extent: f64) -> Self {
        self.half_extent = half_extent;
        self
    }
}

/// Sample a scenario on the lattice of spacing `h`.
pub fn build_domain(spec: &DomainSpec, h: f64) -> Result<GridDomain> {
    let scenario = spec.scenario.clone();
    let dim = spec.dim;
    GridDomain::from_complement(dim, h, spec.half_extent, &scenario.to_string(), move |x| {
        scenario.complement_contains(x, dim)
    })
}

impl GridDomain {
    /// Domain whose closed complement inside the box is given by a predicate.
    pub fn from_complement(
        dim: usize,
        h: f64,
        half_extent: f64,
        name: &str,
        complement: impl Fn(&Point) -> bool,
    ) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid("h", format!("{h} must be positive")));
        }
        if !(half_extent > 0.0) {
            return Err(invalid("half_extent", format!("{half_extent} must be positive")));
        }
        let m = (half_extent / h - 1e-9).ceil() as i64;
        let nodes = (2 * m + 1) as usize;
        if nodes < 8 {
            return Err(Error::TooCoarse { h, nodes });
        }
        let lattice = Lattice::new(dim, h, [-m, -m], [nodes, nodes])?;
        let inside: Vec<bool> = (0..lattice.len())
            .map(|i| {
                let g = lattice.global(i);
                let on_ring = (0..dim).any(|a| g[a].abs() == m);
                !on_ring && !complement(&lattice.coords(i))
            })
            .collect();
        let domain = Self::with_mask(lattice, name, inside, false)?;
        if domain.inside.iter().all(|&b| !b) {
            return Err(Error::InvalidDomain(format!("{name}: empty interior at h = {h}")));
        }
        Ok(domain)
    }

    /// Periodic box with `n` nodes per axis; every node is interior.
    pub fn torus(dim: usize, h: f64, n: usize) -> Result<Self> {
        if n < 8 {
            return Err(Error::TooCoarse { h, nodes: n });
        }
        let lattice = Lattice::new(dim, h, [0, 0], [n, n])?;
        let len = lattice.len();
        Self::with_mask(lattice, "torus", vec![true; len], true)
    }

    fn with_mask(lattice: Lattice, name: &str, inside: Vec<bool>, periodic: bool) -> Result<Self> {
        let labels: Vec<NodeLabel> = (0..lattice.len())
            .map(|i| {
                if inside[i] {
                    NodeLabel::Interior
                } else if lattice.axis_neighbors(i).flatten().any(|n| inside[n]) {
                    NodeLabel::Boundary
                } else {
                    NodeLabel::Exterior
                }
            })
            .collect();
        let domain = Self { lattice, name: name.to_string(), inside, labels, periodic };
        domain.check_labels()?;
        Ok(domain)
    }

    /// A boundary node needs an interior neighbour and a non-interior
    /// neighbour; off-grid positions count as non-interior.
    fn check_labels(&self) -> Result<()> {
        for i in 0..self.len() {
            if self.labels[i] != NodeLabel::Boundary {
                continue;
            }
            let outward = self.lattice.axis_neighbors(i).any(|n| n.map_or(true, |n| !self.inside[n]));
            if !outward {
                return Err(Error::InvalidDomain(format!(
                    "boundary node at {:?} has no exterior neighbour",
                    self.lattice.coords(i)
                )));
            }
        }
        Ok(())
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim
    }

    pub fn h(&self) -> f64 {
        self.lattice.h
    }

    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn inside(&self, idx: usize) -> bool {
        self.inside[idx]
    }

    pub fn inside_mask(&self) -> &[bool] {
        &self.inside
    }

    pub fn label(&self, idx: usize) -> NodeLabel {
        self.labels[idx]
    }

    pub fn labels(&self) -> &[NodeLabel] {
        &self.labels
    }

    pub fn coords(&self, idx: usize) -> Point {
        self.lattice.coords(idx)
    }

    /// Half-width of the box.
    pub fn half_extent(&self) -> f64 {
        (self.lattice.shape[0] - 1) as f64 * 0.5 * self.lattice.h
    }

    /// Node at exactly the given point, if it is a lattice node of the domain.
    pub fn node_at(&self, x: &Point) -> Option<usize> {
        let h = self.lattice.h;
        let g = [(x[0] / h).round() as i64, (x[1] / h).round() as i64];
        let idx = self.lattice.locate(g)?;
        (distance(&self.coords(idx), x) <= 1e-9 * h).then_some(idx)
    }

    pub fn nodes_with(&self, label: NodeLabel) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == label).collect()
    }

    /// Coordinates of boundary-labeled nodes.
    pub fn boundary_points(&self) -> Vec<Point> {
        self.nodes_with(NodeLabel::Boundary).into_iter().map(|i| self.coords(i)).collect()
    }

    /// Whether the closed ball lies inside the lattice block.
    pub fn contains_ball(&self, center: &Point, radius: f64) -> bool {
        match Lattice::covering(self.dim(), self.h(), center, radius, 0) {
            Ok(w) => self.lattice.contains_lattice(&w),
            Err(_) => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("radius", format!("{radius} must be positive")));
        }
        Ok(Self { center, radius })
    }

    pub fn contains(&self, x: &Point) -> bool {
        in_open_ball(x, &self.center, self.radius)
    }

    pub fn closure_contains(&self, x: &Point) -> bool {
        in_closed_ball(x, &self.center, self.radius)
    }
}

/// A node mask K inside an open ball B, posed on a lattice block covering B.
#[derive(Debug, Clone)]
pub struct Condenser {
    lattice: Lattice,
    k: Vec<bool>,
    ball: Ball,
}

impl Condenser {
    /// Validates that every K node sits strictly inside B together with its
    /// whole cell neighbourhood, so a layer of free nodes separates K from ∂B.
    pub fn new(lattice: Lattice, k: Vec<bool>, ball: Ball) -> Result<Self> {
        if k.len() != lattice.len() {
            return Err(Error::InvalidCondenser(format!(
                "mask has {} entries, lattice has {}",
                k.len(),
                lattice.len()
            )));
        }
        let cover = Lattice::covering(lattice.dim, lattice.h, &ball.center, ball.radius, 1)?;
        if !lattice.contains_lattice(&cover) {
            return Err(Error::InvalidCondenser("lattice block does not cover the ball".into()));
        }
        let dim = lattice.dim as i64;
        for i in (0..lattice.len()).filter(|&i| k[i]) {
            let g = lattice.global(i);
            for dj in -1..=1i64 {
                if dim == 1 && dj != 0 {
                    continue;
                }
                for di in -1..=1i64 {
                    let n = [g[0] + di, g[1] + dj];
                    let x = [n[0] as f64 * lattice.h, n[1] as f64 * lattice.h];
                    if !ball.contains(&x) {
                        return Err(Error::InvalidCondenser(format!(
                            "K node at {:?} is not separated from the sphere of radius {} by a free layer",
                            lattice.coords(i),
                            ball.radius
                        )));
                    }
                }
            }
        }
        Ok(Self { lattice, k, ball })
    }

    /// Condenser on the covering block of `ball` with K given by a predicate
    /// on node coordinates (evaluated only at nodes strictly inside B).
    pub fn from_predicate(dim: usize, h: f64, ball: Ball, in_k: impl Fn(&Point) -> bool) -> Result<Self> {
        let lattice = Lattice::covering(dim, h, &ball.center, ball.radius, 1)?;
        let k = (0..lattice.len())
            .map(|i| {
                let x = lattice.coords(i);
                ball.contains(&x) && in_k(&x)
            })
            .collect();
        Self::new(lattice, k, ball)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn ball(&self) -> &Ball {
        &self.ball
    }

    pub fn k_mask(&self) -> &[bool] {
        &self.k
    }

    pub fn k_count(&self) -> usize {
        self.k.iter().filter(|&&b| b).count()
    }

    /// Nodes carrying an unknown: strictly inside B and not in K.
    pub fn free_nodes(&self) -> Vec<usize> {
        (0..self.lattice.len())
            .filter(|&i| !self.k[i] && self.ball.contains(&self.lattice.coords(i)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Backward,
    Forward,
    Full,
}

/// Space-time cylinder B_ρ(x) × (t − η⁻, t + η⁺].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cylinder {
    pub center: Point,
    pub time: f64,
    pub radius: f64,
    pub eta_minus: f64,
    pub eta_plus: f64,
    pub orientation: Orientation,
}

impl Cylinder {
    pub fn backward(center: Point, time: f64, radius: f64, eta: f64) -> Result<Self> {
        Self::validated(center, time, radius, eta, 0.0, Orientation::Backward)
    }

    pub fn forward(center: Point, time: f64, radius: f64, eta: f64) -> Result<Self> {
        Self::validated(center, time, radius, 0.0, eta, Orientation::Forward)
    }

    pub fn full(center: Point, time: f64, radius: f64, eta: f64) -> Result<Self> {
        Self::validated(center, time, radius, eta, eta, Orientation::Full)
    }

    fn validated(
        center: Point,
        time: f64,
        radius: f64,
        eta_minus: f64,
        eta_plus: f64,
        orientation: Orientation,
    ) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(invalid("radius", format!("{radius} must be positive")));
        }
        if !(eta_minus >= 0.0 && eta_plus >= 0.0 && eta_minus + eta_plus > 0.0) {
            return Err(invalid("eta", format!("lengths ({eta_minus}, {eta_plus}) invalid")));
        }
        Ok(Self { center, time, radius, eta_minus, eta_plus, orientation })
    }

    pub fn t_start(&self) -> f64 {
        self.time - self.eta_minus
    }

    pub fn t_end(&self) -> f64 {
        self.time + self.eta_plus
    }

    /// Whether time `t` lies in the half-open interval (t − η⁻, t + η⁺].
    pub fn contains_time(&self, t: f64, tol: f64) -> bool {
        t > self.t_start() + tol && t <= self.t_end() + tol
    }

    pub fn contains_point(&self, x: &Point) -> bool {
        in_open_ball(x, &self.center, self.radius)
    }
}

/// Lattice points (node, k) with |x − center| < ρ and t_k = k·dt in the
/// cylinder's time interval, k >= 0. With `only_omega` the nodes are
/// restricted to Ω.
pub fn cylinder_nodes(d: &GridDomain, c: &Cylinder, dt: f64, only_omega: bool) -> Result<Vec<(usize, usize)>> {
    if !(dt > 0.0) {
        return Err(invalid("dt", format!("{dt} must be positive")));
    }
    let tol = 1e-9 * dt;
    let k_lo = ((c.t_start() / dt).floor().max(0.0)) as usize;
    let k_hi = (c.t_end() / dt + 1e-9).floor();
    if k_hi < 0.0 {
        return Ok(Vec::new());
    }
    let times: Vec<usize> = (k_lo..=k_hi as usize).filter(|&k| c.contains_time(k as f64 * dt, tol)).collect();
    let nodes: Vec<usize> = d
        .lattice()
        .nodes_in_ball(&c.center, c.radius)
        .into_iter()
        .filter(|&i| !only_omega || d.inside(i))
        .collect();
    Ok(nodes.iter().flat_map(|&n| times.iter().map(move |&k| (n, k))).collect())
}
