//! Seeded, parallel experiment engine for average rates and
//! rate-vs-distance curves.
//!
//! All randomness is addressed by index: a topology stream per topology
//! index, a pair-selection stream per topology index and a cycle stream per
//! `(topology, pair, strategy)` tuple. Work units run on the ambient rayon
//! pool and results are reduced in index order, so the output does not
//! depend on the number of worker threads.

use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::generate::{self, GridSpec, ScaleFreeSpec, SpecError, WaxmanSpec};
use crate::graph::{NodePair, PhysicalTopology};
use crate::link::LinkParams;
use crate::strategy::{Router, Strategy, StrategyError, StrategyParams};

/// Random stream type handed to every work unit.
pub type Stream = ChaCha8Rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("invalid experiment config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
}

/// Which kind of work a derived stream feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Purpose {
    Cycles = 0,
    Topology = 1,
    PairSelection = 2,
    Analytics = 3,
}

fn stream_for(purpose: Purpose, master_seed: u64, indices: [u64; 3]) -> Stream {
    let mut h = Sha256::new();
    h.update(b"entroute/stream/v1");
    h.update([purpose as u8]);
    h.update(master_seed.to_le_bytes());
    for i in indices {
        h.update(i.to_le_bytes());
    }
    Stream::from_seed(h.finalize().into())
}

/// Cycle stream for one `(topology, pair, strategy)` work unit. Distinct
/// tuples hash to unrelated ChaCha keys.
pub fn derive_stream(
    master_seed: u64,
    topology_index: u64,
    pair_index: u64,
    strategy_index: u64,
) -> Stream {
    stream_for(
        Purpose::Cycles,
        master_seed,
        [topology_index, pair_index, strategy_index],
    )
}

/// Stream used to generate the physical topology with the given index.
pub fn topology_stream(master_seed: u64, topology_index: u64) -> Stream {
    stream_for(Purpose::Topology, master_seed, [topology_index, 0, 0])
}

/// Stream used to choose node pairs on the given topology.
pub fn pair_stream(master_seed: u64, topology_index: u64) -> Stream {
    stream_for(Purpose::PairSelection, master_seed, [topology_index, 0, 0])
}

/// Stream for batch `batch` of the analytic estimator `estimator`.
pub fn analytics_stream(master_seed: u64, estimator: u64, batch: u64) -> Stream {
    stream_for(Purpose::Analytics, master_seed, [estimator, batch, 0])
}

/// Physical topology source of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum TopologySpec {
    Grid(GridSpec),
    Waxman(WaxmanSpec),
    ScaleFree(ScaleFreeSpec),
    /// A fixed topology, e.g. one read from a GML file.
    Fixed { name: String, topology: Arc<PhysicalTopology> },
}

impl TopologySpec {
    pub fn kind(&self) -> &str {
        match self {
            TopologySpec::Grid(_) => "grid",
            TopologySpec::Waxman(_) => "waxman",
            TopologySpec::ScaleFree(_) => "scalefree",
            TopologySpec::Fixed { name, .. } => name,
        }
    }

    /// Whether repeated instantiation yields different topologies.
    pub fn is_random(&self) -> bool {
        matches!(self, TopologySpec::Waxman(_) | TopologySpec::ScaleFree(_))
    }

    pub fn node_count(&self) -> usize {
        match self {
            TopologySpec::Grid(g) => g.side * g.side,
            TopologySpec::Waxman(w) => w.nodes,
            TopologySpec::ScaleFree(s) => s.nodes,
            TopologySpec::Fixed { topology, .. } => topology.node_count(),
        }
    }

    /// Instantiates topology number `index` for this master seed.
    pub fn instantiate(
        &self,
        master_seed: u64,
        index: u64,
    ) -> Result<Arc<PhysicalTopology>, SpecError> {
        let mut rng = topology_stream(master_seed, index);
        Ok(match self {
            TopologySpec::Grid(g) => Arc::new(generate::square_grid(g)?),
            TopologySpec::Waxman(w) => Arc::new(generate::waxman(w, &mut rng)?),
            TopologySpec::ScaleFree(s) => Arc::new(generate::scale_free(s, &mut rng)?),
            TopologySpec::Fixed { topology, .. } => Arc::clone(topology),
        })
    }
}

/// How pairs are chosen on each topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairSelection {
    /// This many uniformly random unordered pairs, without replacement while
    /// the budget does not exceed the number of distinct pairs.
    Sample(usize),
    /// Every unordered pair exactly once.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingPlan {
    pub topologies: usize,
    pub pairs: PairSelection,
    pub samples_per_pair: usize,
}

impl SamplingPlan {
    /// Average-rate plan: 10 topologies x 20 pairs x 500 cycles for random
    /// models, 100 pairs x 500 cycles for grids, all pairs x 500 cycles for
    /// fixed topologies.
    pub fn average_default(spec: &TopologySpec) -> Self {
        match spec {
            TopologySpec::Waxman(_) | TopologySpec::ScaleFree(_) => SamplingPlan {
                topologies: 10,
                pairs: PairSelection::Sample(20),
                samples_per_pair: 500,
            },
            TopologySpec::Grid(_) => SamplingPlan {
                topologies: 1,
                pairs: PairSelection::Sample(100),
                samples_per_pair: 500,
            },
            TopologySpec::Fixed { .. } => SamplingPlan {
                topologies: 1,
                pairs: PairSelection::All,
                samples_per_pair: 500,
            },
        }
    }

    /// Rate-vs-distance plan: 100 pairs x 1000 cycles on one topology.
    pub fn distance_default() -> Self {
        SamplingPlan {
            topologies: 1,
            pairs: PairSelection::Sample(100),
            samples_per_pair: 1000,
        }
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        let bad = self.topologies == 0
            || self.samples_per_pair == 0
            || self.pairs == PairSelection::Sample(0);
        if bad {
            return Err(ExperimentError::Invalid(
                "sampling counts must all be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Fully determines an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub topology: TopologySpec,
    pub strategies: Vec<Strategy>,
    pub q_values: Vec<f64>,
    pub link: LinkParams,
    pub plan: SamplingPlan,
    pub master_seed: u64,
    /// Restrict pair sampling to pairs in the same physical component.
    pub same_component_only: bool,
}

impl ExperimentConfig {
    pub fn new(
        topology: TopologySpec,
        strategies: Vec<Strategy>,
        q_values: Vec<f64>,
        plan: SamplingPlan,
        master_seed: u64,
    ) -> Self {
        ExperimentConfig {
            topology,
            strategies,
            q_values,
            link: LinkParams::default(),
            plan,
            master_seed,
            same_component_only: false,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.strategies.is_empty() {
            return Err(ExperimentError::Invalid("strategy list is empty".into()));
        }
        if self.q_values.is_empty() {
            return Err(ExperimentError::Invalid("q sweep is empty".into()));
        }
        if self.topology.node_count() < 2 {
            return Err(ExperimentError::Invalid(
                "topology needs at least two nodes".into(),
            ));
        }
        for &q in &self.q_values {
            StrategyParams::new(Strategy::Bsm, q, self.link)?;
        }
        self.plan.validate()
    }

    fn params(&self) -> Result<Vec<StrategyParams>, ExperimentError> {
        let mut out = Vec::new();
        for &q in &self.q_values {
            for &s in &self.strategies {
                out.push(StrategyParams::new(s, q, self.link)?);
            }
        }
        Ok(out)
    }
}

/// Monte Carlo estimate of the rate between one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub pair: NodePair,
    pub distance: f64,
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

/// Running count, sum and sum of squares; mergeable across workers.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    pub count: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &Moments) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    /// Unbiased sample variance; zero with fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let mean = self.sum / n;
        ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Mean and standard error of pairs delivered over `n_samples` cycles drawn
/// sequentially from `stream`.
pub fn estimate_rate<R: Rng + ?Sized>(
    topo: &PhysicalTopology,
    pair: NodePair,
    params: &StrategyParams,
    n_samples: usize,
    stream: &mut R,
) -> RateEstimate {
    assert!(n_samples >= 1, "need at least one sample");
    let mut router = Router::new(topo, *params);
    let mut m = Moments::default();
    for _ in 0..n_samples {
        m.push(router.run_cycle(pair, stream).pairs_delivered as f64);
    }
    RateEstimate {
        pair,
        distance: topo
            .euclidean_distance(pair.u(), pair.v())
            .expect("pair validated against topology"),
        mean: m.mean(),
        stderr: m.stderr(),
        n_samples,
    }
}

/// Node pairs for one topology under `selection`.
pub fn select_pairs<R: Rng + ?Sized>(
    topo: &PhysicalTopology,
    selection: PairSelection,
    same_component_only: bool,
    rng: &mut R,
) -> Vec<NodePair> {
    let n = topo.node_count();
    let component = same_component_only.then(|| topo.components());
    let eligible = |a: usize, b: usize| component.as_ref().map_or(true, |c| c[a] == c[b]);

    let candidates: Vec<(usize, usize)> = if component.is_some() {
        (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|&(a, b)| eligible(a, b))
            .collect()
    } else {
        Vec::new()
    };
    let total = if component.is_some() {
        candidates.len()
    } else {
        n * (n - 1) / 2
    };
    let decode = |k: usize| -> (usize, usize) {
        if component.is_some() {
            candidates[k]
        } else {
            unrank_pair(k, n)
        }
    };
    let picks: Vec<usize> = match selection {
        PairSelection::All => (0..total).collect(),
        _ if total == 0 => Vec::new(),
        PairSelection::Sample(budget) if budget <= total => {
            index::sample(rng, total, budget).into_vec()
        }
        PairSelection::Sample(budget) => (0..budget).map(|_| rng.gen_range(0..total)).collect(),
    };
    picks
        .into_iter()
        .map(|k| {
            let (a, b) = decode(k);
            NodePair::new(a, b, topo).expect("pair index in range")
        })
        .collect()
}

// k-th pair (a, b), a < b, in row-major order of the upper triangle.
fn unrank_pair(mut k: usize, n: usize) -> (usize, usize) {
    for a in 0..n {
        let row = n - 1 - a;
        if k < row {
            return (a, a + 1 + k);
        }
        k -= row;
    }
    unreachable!("pair index out of range")
}

/// Average rate for one `(strategy, q)` combination.
#[derive(Debug, Clone, PartialEq)]
pub struct AverageRate {
    pub topology: String,
    pub nodes: usize,
    pub strategy: Strategy,
    pub q: f64,
    pub mean: f64,
    pub stderr: f64,
    /// Number of (topology, pair) units averaged.
    pub n_pairs: usize,
    pub samples_per_pair: usize,
}

struct Unit {
    topology_index: usize,
    pair_index: usize,
    topo: Arc<PhysicalTopology>,
    pair: NodePair,
}

fn build_units(config: &ExperimentConfig, topologies: usize) -> Result<Vec<Unit>, ExperimentError> {
    let topos: Vec<Arc<PhysicalTopology>> = (0..topologies)
        .into_par_iter()
        .map(|t| config.topology.instantiate(config.master_seed, t as u64))
        .collect::<Result<_, _>>()?;
    let mut units = Vec::new();
    for (t, topo) in topos.into_iter().enumerate() {
        let mut rng = pair_stream(config.master_seed, t as u64);
        let pairs = select_pairs(&topo, config.plan.pairs, config.same_component_only, &mut rng);
        for (p, pair) in pairs.into_iter().enumerate() {
            units.push(Unit {
                topology_index: t,
                pair_index: p,
                topo: Arc::clone(&topo),
                pair,
            });
        }
    }
    Ok(units)
}

// Every strategy and q value reuses the unit's stream, giving common random
// numbers across the comparison.
fn unit_stream(config: &ExperimentConfig, unit: &Unit) -> Stream {
    derive_stream(
        config.master_seed,
        unit.topology_index as u64,
        unit.pair_index as u64,
        0,
    )
}

fn run_units(
    config: &ExperimentConfig,
    units: &[Unit],
    params: &[StrategyParams],
    samples: usize,
) -> Vec<Vec<RateEstimate>> {
    units
        .par_iter()
        .map(|unit| {
            params
                .iter()
                .map(|p| {
                    let mut rng = unit_stream(config, unit);
                    estimate_rate(&unit.topo, unit.pair, p, samples, &mut rng)
                })
                .collect()
        })
        .collect()
}

/// Average rate over node pairs for every `(strategy, q)` in the config.
///
/// When pairs are sampled, the reported error is the standard error of the
/// per-pair means, covering both pair-sampling and Monte Carlo noise. When
/// every pair is visited, it is the propagated Monte Carlo error alone.
pub fn average_rate(config: &ExperimentConfig) -> Result<Vec<AverageRate>, ExperimentError> {
    config.validate()?;
    let params = config.params()?;
    let topologies = if config.topology.is_random() {
        config.plan.topologies
    } else {
        1
    };
    let units = build_units(config, topologies)?;
    let per_unit = run_units(config, &units, &params, config.plan.samples_per_pair);
    let exhaustive = config.plan.pairs == PairSelection::All;

    Ok(params
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let mut between = Moments::default();
            let mut mc_var = 0.0;
            for est in per_unit.iter().map(|row| &row[k]) {
                between.push(est.mean);
                mc_var += est.stderr * est.stderr;
            }
            let n = between.count;
            let stderr = if exhaustive {
                if n == 0 {
                    0.0
                } else {
                    mc_var.sqrt() / n as f64
                }
            } else {
                between.stderr()
            };
            AverageRate {
                topology: config.topology.kind().to_string(),
                nodes: config.topology.node_count(),
                strategy: p.strategy(),
                q: p.q(),
                mean: between.mean(),
                stderr,
                n_pairs: n,
                samples_per_pair: config.plan.samples_per_pair,
            }
        })
        .collect())
}

/// One point of a rate-vs-distance curve.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceRecord {
    pub strategy: Strategy,
    pub q: f64,
    pub estimate: RateEstimate,
}

/// Rate against distance for pairs sampled on topology 0. Records are sorted
/// by distance, then pair, strategy and q.
pub fn rate_vs_distance(config: &ExperimentConfig) -> Result<Vec<DistanceRecord>, ExperimentError> {
    config.validate()?;
    let params = config.params()?;
    let units = build_units(config, 1)?;
    let per_unit = run_units(config, &units, &params, config.plan.samples_per_pair);
    let mut out: Vec<DistanceRecord> = per_unit
        .into_iter()
        .flat_map(|row| {
            row.into_iter()
                .zip(&params)
                .map(|(estimate, p)| DistanceRecord {
                    strategy: p.strategy(),
                    q: p.q(),
                    estimate,
                })
                .collect::<Vec<_>>()
        })
        .collect();
    out.sort_by(|a, b| {
        a.estimate
            .distance
            .total_cmp(&b.estimate.distance)
            .then(a.estimate.pair.ordered().cmp(&b.estimate.pair.ordered()))
            .then(a.strategy.cmp(&b.strategy))
            .then(a.q.total_cmp(&b.q))
    });
    Ok(out)
}

/// Runs `f` on a dedicated pool with `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .expect("thread pool")
        .install(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Point;
    use crate::strategy::exact_rate_bruteforce;

    fn fixed(topo: PhysicalTopology) -> TopologySpec {
        TopologySpec::Fixed {
            name: "test".into(),
            topology: Arc::new(topo),
        }
    }

    fn line(n: usize, edges: &[(usize, usize)]) -> PhysicalTopology {
        let pos = (0..n).map(|i| Point::new(i as f64, 0.0)).collect();
        PhysicalTopology::new(n as f64, pos, edges.iter().copied()).unwrap()
    }

    fn lossless() -> LinkParams {
        LinkParams::new(0.0, 1).unwrap()
    }

    #[test]
    fn derived_streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = derive_stream(1, 2, 3, 4).sample_iter(rand::distributions::Standard).take(4).collect();
        let b: Vec<u64> = derive_stream(1, 2, 3, 4).sample_iter(rand::distributions::Standard).take(4).collect();
        assert_eq!(a, b);
        for other in [derive_stream(1, 2, 3, 5), derive_stream(1, 3, 2, 4), derive_stream(2, 2, 3, 4)] {
            let c: Vec<u64> = other.sample_iter(rand::distributions::Standard).take(4).collect();
            assert_ne!(a, c);
        }
        let t: Vec<u64> = topology_stream(1, 2).sample_iter(rand::distributions::Standard).take(4).collect();
        let p: Vec<u64> = pair_stream(1, 2).sample_iter(rand::distributions::Standard).take(4).collect();
        assert_ne!(t, p);
    }

    #[test]
    fn moments_merge() {
        let mut a = Moments::default();
        let mut b = Moments::default();
        let mut all = Moments::default();
        for (i, x) in [1.0, 0.0, 2.0, 1.0, 1.0].iter().enumerate() {
            if i < 2 { a.push(*x) } else { b.push(*x) }
            all.push(*x);
        }
        a.merge(&b);
        assert_eq!(a, all);
        assert!((all.variance() - 0.5).abs() < 1e-12);
        assert_eq!(Moments::default().stderr(), 0.0);
    }

    #[test]
    fn disconnected_pair_has_zero_rate() {
        let t = line(3, &[(0, 1)]);
        let pair = NodePair::new(0, 2, &t).unwrap();
        let p = StrategyParams::new(Strategy::Hybrid, 0.9, lossless()).unwrap();
        let est = estimate_rate(&t, pair, &p, 1000, &mut derive_stream(0, 0, 0, 0));
        assert_eq!((est.mean, est.stderr), (0.0, 0.0));
    }

    #[test]
    fn perfect_single_edge_rate_is_one() {
        let t = line(2, &[(0, 1)]);
        let pair = NodePair::new(0, 1, &t).unwrap();
        for s in Strategy::ALL {
            let p = StrategyParams::new(s, 1.0, lossless()).unwrap();
            let est = estimate_rate(&t, pair, &p, 200, &mut derive_stream(0, 0, 0, 0));
            assert_eq!((est.mean, est.stderr, est.n_samples), (1.0, 0.0, 200), "{s}");
            assert_eq!(est.distance, 1.0);
        }
    }

    #[test]
    fn chain_bsm_matches_oracle() {
        // edges of length 1 km with eta = 0.5
        let t = line(3, &[(0, 1), (1, 2)]);
        let link = LinkParams::new(-10.0 * 0.5f64.log10(), 1).unwrap();
        let pair = NodePair::new(0, 2, &t).unwrap();
        let p = StrategyParams::new(Strategy::Bsm, 0.9, link).unwrap();
        let exact = exact_rate_bruteforce(&t, pair, &p).unwrap();
        let est = estimate_rate(&t, pair, &p, 100_000, &mut derive_stream(3, 0, 0, 0));
        assert!((est.mean - exact).abs() < 4.0 * est.stderr);
        assert!((exact - 0.225).abs() < 1e-12);
    }

    #[test]
    fn stderr_shrinks_with_more_samples() {
        let t = line(3, &[(0, 1), (1, 2)]);
        let pair = NodePair::new(0, 2, &t).unwrap();
        let p = StrategyParams::new(Strategy::GhzUniform, 0.5, lossless()).unwrap();
        let a = estimate_rate(&t, pair, &p, 20_000, &mut derive_stream(1, 0, 0, 0));
        let b = estimate_rate(&t, pair, &p, 80_000, &mut derive_stream(2, 0, 0, 0));
        let ratio = a.stderr / b.stderr;
        assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn pair_selection_rules() {
        let t = line(5, &[(0, 1), (3, 4)]);
        let mut rng = pair_stream(0, 0);
        let all = select_pairs(&t, PairSelection::All, false, &mut rng);
        assert_eq!(all.len(), 10);
        let mut seen: Vec<_> = all.iter().map(|p| p.ordered()).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 10);

        let some = select_pairs(&t, PairSelection::Sample(10), false, &mut rng);
        let mut s: Vec<_> = some.iter().map(|p| p.ordered()).collect();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 10, "without replacement when the budget fits");

        let many = select_pairs(&t, PairSelection::Sample(25), false, &mut rng);
        assert_eq!(many.len(), 25);

        let same = select_pairs(&t, PairSelection::All, true, &mut rng);
        let got: Vec<_> = same.iter().map(|p| p.ordered()).collect();
        assert_eq!(got, vec![(0, 1), (3, 4)]);
    }

    #[test]
    fn unrank_covers_upper_triangle() {
        let n = 6;
        let pairs: Vec<_> = (0..15).map(|k| unrank_pair(k, n)).collect();
        let expected: Vec<_> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        assert_eq!(pairs, expected);
    }

    fn all_pairs_config(topo: PhysicalTopology, strategies: Vec<Strategy>) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(
            fixed(topo),
            strategies,
            vec![1.0],
            SamplingPlan {
                topologies: 1,
                pairs: PairSelection::All,
                samples_per_pair: 50,
            },
            7,
        );
        c.link = lossless();
        c
    }

    #[test]
    fn two_node_average_is_one() {
        let rates = average_rate(&all_pairs_config(line(2, &[(0, 1)]), Strategy::ALL.to_vec())).unwrap();
        assert_eq!(rates.len(), 5);
        for r in rates {
            assert_eq!((r.mean, r.stderr, r.n_pairs), (1.0, 0.0, 1), "{}", r.strategy);
        }
    }

    #[test]
    fn triangle_bsm_uses_both_routes() {
        let k3 = line(3, &[(0, 1), (1, 2), (0, 2)]);
        let rates = average_rate(&all_pairs_config(k3, vec![Strategy::Bsm, Strategy::Hybrid])).unwrap();
        assert_eq!(rates[0].mean, 2.0);
        assert_eq!(rates[1].mean, 1.0);
    }

    #[test]
    fn empty_lists_are_rejected() {
        let mut c = all_pairs_config(line(2, &[(0, 1)]), vec![]);
        assert!(matches!(average_rate(&c), Err(ExperimentError::Invalid(_))));
        c.strategies = vec![Strategy::Bsm];
        c.q_values.clear();
        assert!(matches!(average_rate(&c), Err(ExperimentError::Invalid(_))));
        c.q_values = vec![1.2];
        assert!(matches!(average_rate(&c), Err(ExperimentError::Strategy(_))));
    }

    #[test]
    fn grid_distances_on_two_by_two() {
        let spec = TopologySpec::Grid(GridSpec::new(2, 100.0).unwrap());
        let mut c = ExperimentConfig::new(
            spec,
            vec![Strategy::GhzUniform],
            vec![0.9],
            SamplingPlan {
                topologies: 1,
                pairs: PairSelection::Sample(12),
                samples_per_pair: 20,
            },
            1,
        );
        c.link = LinkParams::default();
        let recs = rate_vs_distance(&c).unwrap();
        assert_eq!(recs.len(), 12);
        let mut d: Vec<f64> = recs.iter().map(|r| r.estimate.distance).collect();
        assert!(d.windows(2).all(|w| w[0] <= w[1]));
        d.dedup();
        assert_eq!(d.len(), 2);
        assert_eq!(rate_vs_distance(&c).unwrap(), recs);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let spec = TopologySpec::Waxman(WaxmanSpec::with_alpha_l(20, 100.0, 226.0, 1.0).unwrap());
        let c = ExperimentConfig::new(
            spec,
            Strategy::ALL.to_vec(),
            vec![0.6, 0.9],
            SamplingPlan {
                topologies: 3,
                pairs: PairSelection::Sample(5),
                samples_per_pair: 40,
            },
            11,
        );
        let one = with_threads(1, || average_rate(&c).unwrap());
        let four = with_threads(4, || average_rate(&c).unwrap());
        assert_eq!(one, four);
        for pair in one.chunks(5) {
            // GHZ_UNIFORM then GHZ_EXP under common random numbers
            assert!(pair[1].mean >= pair[2].mean);
        }
    }
}
