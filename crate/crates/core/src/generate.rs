//! Synthetic physical topologies: square grids, Waxman graphs and spatial
//! scale-free graphs grown by preferential attachment.
//!
//! Every generator is a pure function of its spec and the supplied random
//! stream.

use rand::Rng;
use thiserror::Error;

use crate::graph::{GraphError, NodeId, PhysicalTopology, Point};

/// Waxman distance scale `alpha * L` fitted to the US fiber network, in km.
pub const DEFAULT_ALPHA_L_KM: f64 = 226.0;

/// Distance floor for the scale-free attachment weight.
pub const MIN_ATTACH_DISTANCE_KM: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("invalid topology spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), SpecError> {
    if cond {
        Ok(())
    } else {
        Err(SpecError::Invalid(msg()))
    }
}

fn check_region(region: f64) -> Result<(), SpecError> {
    check(region.is_finite() && region > 0.0, || {
        format!("region size must be positive, got {region}")
    })
}

/// `side x side` lattice over `[0, region]^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub side: usize,
    pub region: f64,
}

impl GridSpec {
    pub fn new(side: usize, region: f64) -> Result<Self, SpecError> {
        let spec = GridSpec { side, region };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        check(self.side >= 2, || format!("grid side must be >= 2, got {}", self.side))?;
        check_region(self.region)
    }

    pub fn spacing(&self) -> f64 {
        self.region / (self.side - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaxmanSpec {
    pub nodes: usize,
    pub region: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl WaxmanSpec {
    pub fn new(nodes: usize, region: f64, alpha: f64, beta: f64) -> Result<Self, SpecError> {
        let spec = WaxmanSpec {
            nodes,
            region,
            alpha,
            beta,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Spec with `alpha` chosen so that `alpha * sqrt(2) * region == alpha_l`.
    pub fn with_alpha_l(
        nodes: usize,
        region: f64,
        alpha_l: f64,
        beta: f64,
    ) -> Result<Self, SpecError> {
        check_region(region)?;
        Self::new(nodes, region, alpha_l / (std::f64::consts::SQRT_2 * region), beta)
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        check(self.nodes >= 2, || format!("waxman needs >= 2 nodes, got {}", self.nodes))?;
        check_region(self.region)?;
        check(self.alpha.is_finite() && self.alpha > 0.0, || {
            format!("alpha must be positive, got {}", self.alpha)
        })?;
        // beta = 0 is accepted as the degenerate edgeless model
        check((0.0..=1.0).contains(&self.beta), || {
            format!("beta must lie in [0, 1], got {}", self.beta)
        })
    }

    /// `L = sqrt(2) R`, the diagonal of the region.
    pub fn max_distance(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.region
    }

    pub fn alpha_l(&self) -> f64 {
        self.alpha * self.max_distance()
    }

    pub fn edge_probability(&self, d: f64) -> f64 {
        self.beta * (-d / self.alpha_l()).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleFreeSpec {
    pub nodes: usize,
    pub region: f64,
    /// Edges added by every new node.
    pub m: usize,
    /// Size of the complete seed graph.
    pub m0: usize,
    /// Degree exponent of the attachment weight.
    pub mu: f64,
    /// Distance exponent of the attachment weight.
    pub nu: f64,
}

impl ScaleFreeSpec {
    pub fn new(
        nodes: usize,
        region: f64,
        m: usize,
        m0: usize,
        mu: f64,
        nu: f64,
    ) -> Result<Self, SpecError> {
        let spec = ScaleFreeSpec {
            nodes,
            region,
            m,
            m0,
            mu,
            nu,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `m = 5`, `m0 = 6`, `mu = nu = 1`.
    pub fn with_defaults(nodes: usize, region: f64) -> Result<Self, SpecError> {
        Self::new(nodes, region, 5, 6, 1.0, 1.0)
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        check_region(self.region)?;
        check(self.m >= 1, || "m must be >= 1".to_string())?;
        check(self.m <= self.m0, || {
            format!("m ({}) must not exceed m0 ({})", self.m, self.m0)
        })?;
        check(self.m0 <= self.nodes, || {
            format!("m0 ({}) must not exceed the node count ({})", self.m0, self.nodes)
        })?;
        check(self.nodes >= 2, || format!("need >= 2 nodes, got {}", self.nodes))?;
        check(self.mu >= 0.0 && self.nu >= 0.0, || {
            format!("exponents must be non-negative, got mu={} nu={}", self.mu, self.nu)
        })
    }

    pub fn expected_edges(&self) -> usize {
        self.m0 * (self.m0 - 1) / 2 + self.m * (self.nodes - self.m0)
    }
}

fn uniform_point<R: Rng + ?Sized>(region: f64, rng: &mut R) -> Point {
    let x = rng.gen::<f64>() * region;
    let y = rng.gen::<f64>() * region;
    Point::new(x, y)
}

/// Node `row * side + col` sits at `(col * s, row * s)` with `s = R / (side - 1)`.
pub fn square_grid(spec: &GridSpec) -> Result<PhysicalTopology, SpecError> {
    spec.validate()?;
    let n = spec.side;
    let last = (n - 1) as f64;
    let coord = |i: usize| (i as f64 * spec.region / last).min(spec.region);
    let positions = (0..n * n)
        .map(|id| Point::new(coord(id % n), coord(id / n)))
        .collect();
    let mut edges = Vec::with_capacity(2 * n * (n - 1));
    for row in 0..n {
        for col in 0..n {
            let id = row * n + col;
            if col + 1 < n {
                edges.push((id, id + 1));
            }
            if row + 1 < n {
                edges.push((id, id + n));
            }
        }
    }
    Ok(PhysicalTopology::new(spec.region, positions, edges)?)
}

/// Uniform node placement; each pair joined independently with probability
/// `beta * exp(-d / (alpha L))`. The result may be disconnected.
pub fn waxman<R: Rng + ?Sized>(spec: &WaxmanSpec, rng: &mut R) -> Result<PhysicalTopology, SpecError> {
    spec.validate()?;
    let positions: Vec<Point> = (0..spec.nodes)
        .map(|_| uniform_point(spec.region, rng))
        .collect();
    let mut edges = Vec::new();
    for i in 0..spec.nodes {
        for j in i + 1..spec.nodes {
            let p = spec.edge_probability(positions[i].distance(&positions[j]));
            if rng.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Ok(PhysicalTopology::new(spec.region, positions, edges)?)
}

/// Spatial preferential attachment. Starts from a complete graph on `m0`
/// uniformly placed nodes; each later node attaches to `m` distinct existing
/// nodes drawn without replacement with weight
/// `k_j^mu / max(d_ij, MIN_ATTACH_DISTANCE_KM)^nu`. Degrees are updated only
/// once the new node has picked all of its targets.
pub fn scale_free<R: Rng + ?Sized>(
    spec: &ScaleFreeSpec,
    rng: &mut R,
) -> Result<PhysicalTopology, SpecError> {
    spec.validate()?;
    let mut positions = Vec::with_capacity(spec.nodes);
    let mut degree = vec![0usize; spec.nodes];
    let mut edges = Vec::with_capacity(spec.expected_edges());

    for i in 0..spec.m0 {
        positions.push(uniform_point(spec.region, rng));
        for j in 0..i {
            edges.push((j, i));
            degree[i] += 1;
            degree[j] += 1;
        }
    }

    let mut weights = Vec::with_capacity(spec.nodes);
    let mut targets: Vec<NodeId> = Vec::with_capacity(spec.m);
    for i in spec.m0..spec.nodes {
        let p = uniform_point(spec.region, rng);
        weights.clear();
        weights.extend(positions.iter().enumerate().map(|(j, q): (usize, &Point)| {
            let d = p.distance(q).max(MIN_ATTACH_DISTANCE_KM);
            (degree[j] as f64).powf(spec.mu) / d.powf(spec.nu)
        }));
        targets.clear();
        for _ in 0..spec.m {
            let j = draw_weighted(&weights, rng);
            weights[j] = f64::NAN;
            targets.push(j);
        }
        for &j in &targets {
            edges.push((j, i));
            degree[j] += 1;
        }
        degree[i] += targets.len();
        positions.push(p);
    }
    Ok(PhysicalTopology::new(spec.region, positions, edges)?)
}

/// Index drawn proportionally to `weights`; NaN entries are excluded. Falls
/// back to a uniform choice among non-excluded entries when all weights are
/// zero.
fn draw_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().filter(|w| !w.is_nan()).sum();
    if total > 0.0 && total.is_finite() {
        let mut target = rng.gen::<f64>() * total;
        let mut last = 0;
        for (j, &w) in weights.iter().enumerate() {
            if w.is_nan() || w == 0.0 {
                continue;
            }
            last = j;
            if target < w {
                return j;
            }
            target -= w;
        }
        // rounding left a sliver past the final bucket
        return last;
    }
    let open: Vec<usize> = (0..weights.len()).filter(|&j| !weights[j].is_nan()).collect();
    open[rng.gen_range(0..open.len())]
}
