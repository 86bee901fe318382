//! One routing cycle for each of the five entanglement-routing protocols,
//! plus an exhaustive-enumeration oracle for small instances.
//!
//! Random draws are laid out so that runs with different `q` (and, for the
//! GHZ family, different protocol variants) consume the stream identically:
//!
//! * link sampling draws one uniform per physical edge, in edge order;
//! * BSM routing then draws one uniform per selected path of two or more hops;
//! * the GHZ variants draw one uniform per helper node, in id order, whatever
//!   the helper's virtual degree;
//! * hybrid routing draws exactly one uniform per physical edge.
//!
//! Sharing a stream across strategies therefore couples them: a helper that
//! survives under an exponential-decay measurement also survives under a
//! uniform-success one, and raising `q` never undoes a delivery.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::graph::{NodePair, NodeSet, PhysicalTopology, VirtualTopology};
use crate::link::LinkParams;

/// Largest `edges + helpers` accepted by [`exact_rate_bruteforce`].
pub const BRUTEFORCE_LIMIT: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrategyError {
    #[error("measurement success probability must lie in [0, 1], got {0}")]
    InvalidQ(f64),
    #[error("unknown strategy '{0}' (expected BSM, GHZ_UNIFORM, GHZ_EXP, GHZ_23 or HYBRID)")]
    UnknownStrategy(String),
    #[error("instance too large to enumerate: {elements} elements (limit {limit})")]
    TooLarge { elements: usize, limit: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strategy {
    /// Greedy edge-disjoint shortest paths joined by Bell state measurements.
    Bsm,
    /// k-GHZ measurements succeeding with probability q for every k >= 2.
    GhzUniform,
    /// k-GHZ measurements succeeding with probability q^(k-1).
    GhzExp,
    /// Only 2- and 3-qubit GHZ measurements, cascaded for larger degree.
    Ghz23,
    /// Local GHZ preparation plus one BSM per link.
    Hybrid,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Bsm,
        Strategy::GhzUniform,
        Strategy::GhzExp,
        Strategy::Ghz23,
        Strategy::Hybrid,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Bsm => "BSM",
            Strategy::GhzUniform => "GHZ_UNIFORM",
            Strategy::GhzExp => "GHZ_EXP",
            Strategy::Ghz23 => "GHZ_23",
            Strategy::Hybrid => "HYBRID",
        }
    }

    pub fn is_ghz(&self) -> bool {
        matches!(self, Strategy::GhzUniform | Strategy::GhzExp | Strategy::Ghz23)
    }

    /// Most end-to-end pairs a single cycle can deliver, given the number of
    /// edge-disjoint paths available to BSM routing.
    pub fn max_per_cycle(&self, disjoint_paths: usize) -> usize {
        match self {
            Strategy::Bsm => disjoint_paths,
            _ => 1,
        }
    }

    /// Probability that a helper of virtual degree `k >= 2` completes its
    /// GHZ measurement. Degree-1 helpers are measured out deterministically
    /// and are not covered here.
    ///
    /// For the (2,3) variant a degree-k merge needs `t3` three-qubit and `t2`
    /// two-qubit fusions with `2 t3 + t2 = k - 1`; the minimal cascade uses
    /// `ceil((k - 1) / 2)` fusions, all of which must succeed.
    pub fn ghz_survival(&self, k: usize, q: f64) -> f64 {
        debug_assert!(k >= 2);
        let fusions = match self {
            Strategy::GhzUniform => 1,
            Strategy::GhzExp => k - 1,
            Strategy::Ghz23 => k / 2,
            Strategy::Bsm | Strategy::Hybrid => panic!("{self} has no GHZ measurement"),
        };
        q.powi(fusions as i32)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_uppercase().replace('-', "_");
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == key)
            .ok_or_else(|| StrategyError::UnknownStrategy(s.to_string()))
    }
}

/// Everything a single routing cycle needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyParams {
    strategy: Strategy,
    q: f64,
    link: LinkParams,
}

impl StrategyParams {
    pub fn new(strategy: Strategy, q: f64, link: LinkParams) -> Result<Self, StrategyError> {
        if !(0.0..=1.0).contains(&q) {
            return Err(StrategyError::InvalidQ(q));
        }
        Ok(StrategyParams { strategy, q, link })
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn link(&self) -> &LinkParams {
        &self.link
    }

    pub fn with_strategy(&self, strategy: Strategy) -> Self {
        StrategyParams { strategy, ..*self }
    }

    pub fn with_q(&self, q: f64) -> Result<Self, StrategyError> {
        Self::new(self.strategy, q, self.link)
    }
}

/// Result of one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CycleOutcome {
    pub pairs_delivered: u32,
    /// Edge-disjoint paths selected (BSM routing only).
    pub paths_found: Option<u32>,
}

/// Per-edge elementary link probabilities for `topo` under `link`.
pub fn link_probabilities(topo: &PhysicalTopology, link: &LinkParams) -> Vec<f64> {
    (0..topo.edge_count())
        .map(|e| {
            link.success(topo.edge_length(e))
                .expect("edge lengths are finite and non-negative")
        })
        .collect()
}

/// Samples a virtual topology: each physical edge is alive independently
/// with its link-success probability.
pub fn sample_virtual<'a, R: Rng + ?Sized>(
    topo: &'a PhysicalTopology,
    link: &LinkParams,
    rng: &mut R,
) -> VirtualTopology<'a> {
    let probs = link_probabilities(topo, link);
    let mut vt = topo.empty_virtual();
    fill_alive(&mut vt, &probs, 1.0, rng);
    vt
}

fn fill_alive<R: Rng + ?Sized>(vt: &mut VirtualTopology, probs: &[f64], scale: f64, rng: &mut R) {
    for (e, &p) in probs.iter().enumerate() {
        let u: f64 = rng.gen();
        vt.set_alive(e, u < p * scale);
    }
}

/// Reusable per-topology state for running many cycles of one strategy.
#[derive(Debug, Clone)]
pub struct Router<'a> {
    topo: &'a PhysicalTopology,
    params: StrategyParams,
    link_prob: Vec<f64>,
    vt: VirtualTopology<'a>,
    nodes: NodeSet,
}

impl<'a> Router<'a> {
    pub fn new(topo: &'a PhysicalTopology, params: StrategyParams) -> Self {
        Router {
            topo,
            params,
            link_prob: link_probabilities(topo, &params.link),
            vt: topo.empty_virtual(),
            nodes: NodeSet::all(topo.node_count()),
        }
    }

    pub fn params(&self) -> &StrategyParams {
        &self.params
    }

    pub fn topology(&self) -> &'a PhysicalTopology {
        self.topo
    }

    pub fn run_cycle<R: Rng + ?Sized>(&mut self, pair: NodePair, rng: &mut R) -> CycleOutcome {
        match self.params.strategy {
            Strategy::Bsm => self.cycle_bsm(pair, rng),
            Strategy::GhzUniform | Strategy::GhzExp | Strategy::Ghz23 => self.cycle_ghz(pair, rng),
            Strategy::Hybrid => self.cycle_hybrid(pair, rng),
        }
    }

    fn cycle_bsm<R: Rng + ?Sized>(&mut self, pair: NodePair, rng: &mut R) -> CycleOutcome {
        fill_alive(&mut self.vt, &self.link_prob, 1.0, rng);
        self.nodes.fill(true);
        let q = self.params.q;
        let (mut paths, mut delivered) = (0u32, 0u32);
        while let Some(path) = self.vt.fewest_hops_path(pair, &self.nodes) {
            self.vt
                .remove_path_edges_in_place(&path)
                .expect("path found over alive edges");
            paths += 1;
            let hops = path.len() - 1;
            let ok = hops == 1 || rng.gen::<f64>() < q.powi(hops as i32 - 1);
            delivered += ok as u32;
        }
        CycleOutcome {
            pairs_delivered: delivered,
            paths_found: Some(paths),
        }
    }

    fn cycle_ghz<R: Rng + ?Sized>(&mut self, pair: NodePair, rng: &mut R) -> CycleOutcome {
        fill_alive(&mut self.vt, &self.link_prob, 1.0, rng);
        let (strategy, q) = (self.params.strategy, self.params.q);
        for n in 0..self.topo.node_count() {
            if pair.contains(n) {
                self.nodes.insert(n);
                continue;
            }
            let u: f64 = rng.gen();
            let k = self.vt.virtual_degree(n);
            // k = 0 is inert and k = 1 is an X measurement; neither can lie
            // on a path between the users.
            let survives = k >= 2 && u < strategy.ghz_survival(k, q);
            if survives {
                self.nodes.insert(n);
            } else {
                self.nodes.remove(n);
            }
        }
        CycleOutcome {
            pairs_delivered: self.vt.connected(pair, &self.nodes) as u32,
            paths_found: None,
        }
    }

    fn cycle_hybrid<R: Rng + ?Sized>(&mut self, pair: NodePair, rng: &mut R) -> CycleOutcome {
        fill_alive(&mut self.vt, &self.link_prob, self.params.q, rng);
        self.nodes.fill(true);
        CycleOutcome {
            pairs_delivered: self.vt.connected(pair, &self.nodes) as u32,
            paths_found: None,
        }
    }
}

/// One cycle of whichever strategy `params` names.
pub fn run_cycle<R: Rng + ?Sized>(
    topo: &PhysicalTopology,
    pair: NodePair,
    params: &StrategyParams,
    rng: &mut R,
) -> CycleOutcome {
    Router::new(topo, *params).run_cycle(pair, rng)
}

/// BSM routing: sample links, greedily peel off fewest-hop paths until none
/// remain, and deliver along each path of `h` hops with probability
/// `q^(h-1)`.
pub fn run_cycle_bsm<R: Rng + ?Sized>(
    topo: &PhysicalTopology,
    pair: NodePair,
    params: &StrategyParams,
    rng: &mut R,
) -> CycleOutcome {
    Router::new(topo, params.with_strategy(Strategy::Bsm)).run_cycle(pair, rng)
}

/// GHZ routing in the variant named by `params`: every helper of virtual
/// degree `k >= 2` survives its measurement with the variant's probability,
/// failed or dangling helpers are removed with their links, and one pair is
/// delivered iff the users remain connected.
///
/// # Panics
///
/// If `params` does not name a GHZ variant.
pub fn run_cycle_ghz<R: Rng + ?Sized>(
    topo: &PhysicalTopology,
    pair: NodePair,
    params: &StrategyParams,
    rng: &mut R,
) -> CycleOutcome {
    assert!(params.strategy.is_ghz(), "{} is not a GHZ variant", params.strategy);
    Router::new(topo, *params).run_cycle(pair, rng)
}

/// Hybrid GHZ-BSM routing: every link survives transmission and its BSM with
/// probability `p_link * q`, helpers never fail, and one pair is delivered iff
/// the users are connected.
pub fn run_cycle_hybrid<R: Rng + ?Sized>(
    topo: &PhysicalTopology,
    pair: NodePair,
    params: &StrategyParams,
    rng: &mut R,
) -> CycleOutcome {
    Router::new(topo, params.with_strategy(Strategy::Hybrid)).run_cycle(pair, rng)
}

/// Exact expected pairs per cycle, by enumerating every link outcome and
/// every helper/swap outcome. Needs `edges + helpers <= BRUTEFORCE_LIMIT`.
pub fn exact_rate_bruteforce(
    topo: &PhysicalTopology,
    pair: NodePair,
    params: &StrategyParams,
) -> Result<f64, StrategyError> {
    let n = topo.node_count();
    let m = topo.edge_count();
    let elements = m + n - 2;
    if elements > BRUTEFORCE_LIMIT {
        return Err(StrategyError::TooLarge {
            elements,
            limit: BRUTEFORCE_LIMIT,
        });
    }
    let q = params.q;
    let base = link_probabilities(topo, &params.link);
    let probs: Vec<f64> = match params.strategy {
        Strategy::Hybrid => base.iter().map(|p| p * q).collect(),
        _ => base,
    };

    let mut total = 0.0;
    let mut alive = vec![false; m];
    for mask in 0u32..(1u32 << m) {
        let mut weight = 1.0;
        for e in 0..m {
            alive[e] = mask >> e & 1 == 1;
            weight *= if alive[e] { probs[e] } else { 1.0 - probs[e] };
        }
        if weight == 0.0 {
            continue;
        }
        let value = match params.strategy {
            Strategy::Bsm => {
                let mut vt = VirtualTopology::from_alive(topo, alive.clone());
                let all = NodeSet::all(n);
                let mut expected = 0.0;
                while let Some(path) = vt.fewest_hops_path(pair, &all) {
                    vt.remove_path_edges_in_place(&path).expect("alive path");
                    expected += q.powi(path.len() as i32 - 2);
                }
                expected
            }
            Strategy::Hybrid => reachable(topo, &alive, pair, &vec![true; n]) as u8 as f64,
            ghz => {
                let degree: Vec<usize> = (0..n)
                    .map(|x| topo.neighbors(x).iter().filter(|&&(_, e)| alive[e]).count())
                    .collect();
                let measured: Vec<usize> = (0..n)
                    .filter(|&x| !pair.contains(x) && degree[x] >= 2)
                    .collect();
                let mut expected = 0.0;
                let mut present = vec![false; n];
                for outcome in 0u32..(1u32 << measured.len()) {
                    present.iter_mut().for_each(|p| *p = false);
                    present[pair.u()] = true;
                    present[pair.v()] = true;
                    let mut w = 1.0;
                    for (i, &x) in measured.iter().enumerate() {
                        let s = ghz.ghz_survival(degree[x], q);
                        if outcome >> i & 1 == 1 {
                            present[x] = true;
                            w *= s;
                        } else {
                            w *= 1.0 - s;
                        }
                    }
                    if w > 0.0 && reachable(topo, &alive, pair, &present) {
                        expected += w;
                    }
                }
                expected
            }
        };
        total += weight * value;
    }
    Ok(total)
}

// Plain depth-first reachability, kept separate from the union-find used by
// the sampled cycles.
fn reachable(topo: &PhysicalTopology, alive: &[bool], pair: NodePair, present: &[bool]) -> bool {
    let mut seen = vec![false; topo.node_count()];
    let mut stack = vec![pair.u()];
    seen[pair.u()] = true;
    while let Some(x) = stack.pop() {
        if x == pair.v() {
            return true;
        }
        for &(y, e) in topo.neighbors(x) {
            if alive[e] && present[y] && !seen[y] {
                seen[y] = true;
                stack.push(y);
            }
        }
    }
    false
}
