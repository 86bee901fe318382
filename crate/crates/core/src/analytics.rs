//! Semi-analytic quantities for Waxman networks: edge probabilities, the
//! expected number of paths between two nodes with its bounds, the
//! leading-order connectivity threshold and the path-length heuristic.

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::generate::{SpecError, WaxmanSpec};
use crate::graph::Point;
use crate::link::{LinkError, LinkParams};
use crate::montecarlo::{analytics_stream, Moments};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Link(#[from] LinkError),
}

fn invalid(msg: impl Into<String>) -> AnalyticsError {
    AnalyticsError::Invalid(msg.into())
}

/// Waxman connection model combined with the fiber link model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaxmanAnalyticParams {
    pub waxman: WaxmanSpec,
    pub link: LinkParams,
}

impl WaxmanAnalyticParams {
    pub fn new(waxman: WaxmanSpec, link: LinkParams) -> Result<Self, AnalyticsError> {
        waxman.validate()?;
        Ok(WaxmanAnalyticParams { waxman, link })
    }

    pub fn region(&self) -> f64 {
        self.waxman.region
    }

    pub fn nodes(&self) -> usize {
        self.waxman.nodes
    }

    /// Edge probability for two points a distance `d` apart.
    pub fn edge_prob(&self, d: f64) -> f64 {
        // d is a Euclidean distance, so the link model cannot reject it
        self.waxman.edge_probability(d) * self.link.success(d).unwrap_or(0.0)
    }
}

/// `beta e^{-d/(alpha L)} [1 - (1 - 10^{-gamma d/10})^m]` with `d = |x1 - x2|`.
pub fn waxman_edge_prob(x1: Point, x2: Point, params: &WaxmanAnalyticParams) -> f64 {
    params.edge_prob(x1.distance(&x2))
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
}

const MEAN_EDGE: u64 = 0;
const CORRELATION: u64 = 1;
const CORRELATION_CONTROL: u64 = 2;

/// Splits `n` samples into at most 64 batches of at least 100 samples.
/// The split depends on `n` only, never on the thread count.
fn batches(n: u64) -> Vec<u64> {
    let k = (n / 100).clamp(1, 64);
    (0..k).map(|i| n / k + u64::from(i < n % k)).collect()
}

fn uniform_point<R: Rng + ?Sized>(rng: &mut R, region: f64) -> Point {
    let (u, v): (f64, f64) = (rng.gen(), rng.gen());
    Point::new(u * region, v * region)
}

/// `E[p(x1, x2)]` for independent uniform points on the region.
pub fn mean_edge_prob(
    params: &WaxmanAnalyticParams,
    n_mc: u64,
    seed: u64,
) -> Result<Estimate, AnalyticsError> {
    if n_mc == 0 {
        return Err(invalid("mean_edge_prob needs at least one sample"));
    }
    let r = params.region();
    let parts: Vec<Moments> = batches(n_mc)
        .into_par_iter()
        .enumerate()
        .map(|(b, size)| {
            let mut rng = analytics_stream(seed, MEAN_EDGE, b as u64);
            let mut m = Moments::default();
            for _ in 0..size {
                let x1 = uniform_point(&mut rng, r);
                let x2 = uniform_point(&mut rng, r);
                m.push(waxman_edge_prob(x1, x2, params));
            }
            m
        })
        .collect();
    let mut total = Moments::default();
    for m in &parts {
        total.merge(m);
    }
    Ok(Estimate {
        value: total.mean(),
        stderr: total.stderr(),
        samples: n_mc,
    })
}

/// Streaming means and co-moments of a pair of variables.
#[derive(Debug, Clone, Copy, Default)]
struct CoMoments {
    n: f64,
    mean_x: f64,
    mean_y: f64,
    m2x: f64,
    m2y: f64,
    cxy: f64,
}

impl CoMoments {
    fn push(&mut self, x: f64, y: f64) {
        self.n += 1.0;
        let dx = x - self.mean_x;
        self.mean_x += dx / self.n;
        let dy = y - self.mean_y;
        self.mean_y += dy / self.n;
        self.m2x += dx * (x - self.mean_x);
        self.m2y += dy * (y - self.mean_y);
        self.cxy += dx * (y - self.mean_y);
    }

    fn merge(&mut self, o: &CoMoments) {
        if o.n == 0.0 {
            return;
        }
        let n = self.n + o.n;
        let dx = o.mean_x - self.mean_x;
        let dy = o.mean_y - self.mean_y;
        let w = self.n * o.n / n;
        self.m2x += o.m2x + dx * dx * w;
        self.m2y += o.m2y + dy * dy * w;
        self.cxy += o.cxy + dx * dy * w;
        self.mean_x += dx * o.n / n;
        self.mean_y += dy * o.n / n;
        self.n = n;
    }

    fn correlation(&self) -> Option<f64> {
        if self.m2x <= 0.0 || self.m2y <= 0.0 {
            return None;
        }
        Some(self.cxy / (self.m2x * self.m2y).sqrt())
    }
}

fn correlation(
    params: &WaxmanAnalyticParams,
    n_mc: u64,
    seed: u64,
    estimator: u64,
) -> Result<Option<Estimate>, AnalyticsError> {
    if n_mc < 1000 {
        return Err(invalid(format!(
            "correlation needs at least 1000 samples, got {n_mc}"
        )));
    }
    let r = params.region();
    let shared = estimator == CORRELATION;
    let parts: Vec<CoMoments> = batches(n_mc)
        .into_par_iter()
        .enumerate()
        .map(|(b, size)| {
            let mut rng = analytics_stream(seed, estimator, b as u64);
            let mut m = CoMoments::default();
            for _ in 0..size {
                let x1 = uniform_point(&mut rng, r);
                let x2 = uniform_point(&mut rng, r);
                let x3 = uniform_point(&mut rng, r);
                let x2b = if shared { x2 } else { uniform_point(&mut rng, r) };
                m.push(
                    waxman_edge_prob(x1, x2, params),
                    waxman_edge_prob(x2b, x3, params),
                );
            }
            m
        })
        .collect();
    let mut total = CoMoments::default();
    for m in &parts {
        total.merge(m);
    }
    let Some(rho) = total.correlation() else {
        return Ok(None);
    };
    let mut batch_means = Moments::default();
    for m in &parts {
        batch_means.push(m.correlation().unwrap_or(f64::NAN));
    }
    Ok(Some(Estimate {
        value: rho,
        stderr: batch_means.stderr(),
        samples: n_mc,
    }))
}

/// Pearson correlation of `p(x1, x2)` and `p(x2, x3)` over independent
/// uniform triples; the standard error comes from batch means. `None` when
/// either variable is constant.
pub fn path_prob_correlation(
    params: &WaxmanAnalyticParams,
    n_mc: u64,
    seed: u64,
) -> Result<Option<Estimate>, AnalyticsError> {
    correlation(params, n_mc, seed, CORRELATION)
}

/// Same estimator with an independent copy of `x2` in the second factor,
/// so the true correlation is zero.
pub fn path_prob_correlation_control(
    params: &WaxmanAnalyticParams,
    n_mc: u64,
    seed: u64,
) -> Result<Option<Estimate>, AnalyticsError> {
    correlation(params, n_mc, seed, CORRELATION_CONTROL)
}

/// `ln n!`.
pub fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Expected path count between two nodes and its bounds.
///
/// With `A = (N-2)! E^{N-1} e^{1/E}` the bounds read
/// `A - EN/((EN-1)(N-1)) < series < A - (EN+1)/(EN(N-1))`.
/// Linear fields are `inf` when they overflow; the log fields and
/// `residual = A - series` stay accurate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathCountResult {
    pub n: u64,
    pub e: f64,
    pub e_paths: f64,
    pub log_e_paths: f64,
    pub asymptotic: f64,
    pub log_asymptotic: f64,
    /// `A - series`, summed as a positive tail series.
    pub residual: f64,
    /// `None` when `EN <= 1`.
    pub lower: Option<f64>,
    pub upper: f64,
}

impl PathCountResult {
    /// `A - lower`, or `None` when the lower bound is undefined.
    pub fn lower_offset(&self) -> Option<f64> {
        let en = self.e * self.n as f64;
        (en > 1.0).then(|| en / ((en - 1.0) * (self.n as f64 - 1.0)))
    }

    /// `A - upper`.
    pub fn upper_offset(&self) -> f64 {
        let en = self.e * self.n as f64;
        (en + 1.0) / (en * (self.n as f64 - 1.0))
    }

    /// Whether the series lies strictly inside the bounds, decided on the
    /// residual so that it stays exact when `A` is huge.
    pub fn bounds_hold(&self) -> bool {
        let above_lower = self.lower_offset().map_or(true, |off| self.residual < off);
        above_lower && self.residual > self.upper_offset()
    }
}

/// Evaluates `sum_{j=1}^{N-1} (N-2)!/(N-j-1)! E^j` and its bounds.
pub fn expected_paths(n: u64, e: f64) -> Result<PathCountResult, AnalyticsError> {
    if n < 2 {
        return Err(invalid(format!("expected_paths needs N >= 2, got {n}")));
    }
    if !(e > 0.0 && e <= 1.0) {
        return Err(invalid(format!("edge probability must lie in (0, 1], got {e}")));
    }
    let nf = n as f64;

    // t_1 = E, t_{j+1} = t_j (N-j-1) E
    let mut term = e;
    let mut sum = 0.0;
    let ln_e = e.ln();
    let mut ln_term = ln_e;
    let mut ln_terms = Vec::with_capacity(n as usize - 1);
    for j in 1..n {
        sum += term;
        ln_terms.push(ln_term);
        let ratio = (n - j - 1) as f64;
        term *= ratio * e;
        ln_term += ratio.ln() + ln_e;
    }
    let ln_max = ln_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_e_paths = ln_max + ln_terms.iter().map(|l| (l - ln_max).exp()).sum::<f64>().ln();
    let e_paths = if sum.is_finite() { sum } else { f64::INFINITY };

    let log_asymptotic = ln_factorial(n - 2) + (nf - 1.0) * ln_e + 1.0 / e;
    let asymptotic = log_asymptotic.exp();
    let residual = tail_residual(n, e)
        .unwrap_or_else(|| log_asymptotic.exp() * -(log_e_paths - log_asymptotic).exp_m1());

    let mut result = PathCountResult {
        n,
        e,
        e_paths,
        log_e_paths,
        asymptotic,
        log_asymptotic,
        residual,
        lower: None,
        upper: 0.0,
    };
    result.upper = asymptotic - result.upper_offset();
    result.lower = result.lower_offset().map(|off| asymptotic - off);
    Ok(result)
}

/// `(1/(N-1)) sum_{i>=0} x^i (N-1)!/(N-1+i)!` with `x = 1/E`; `None` if
/// the partial sums overflow.
fn tail_residual(n: u64, e: f64) -> Option<f64> {
    let x = 1.0 / e;
    let mut term = 1.0;
    let mut sum = 0.0;
    let mut i = 0u64;
    loop {
        sum += term;
        let ratio = x / (n + i) as f64;
        term *= ratio;
        i += 1;
        if !sum.is_finite() {
            return None;
        }
        if ratio < 1.0 && term <= sum * 1e-18 {
            return Some(sum / (n - 1) as f64);
        }
    }
}

/// Leading-order mean edge probability above which two nodes expect at
/// least one path: `(1/N)(1 + sqrt((2/N) ln(N/(2 pi))))`. The radicand is
/// negative for `N <= 6`, where the expression is undefined.
pub fn connectivity_threshold(n: u64) -> Result<f64, AnalyticsError> {
    let nf = n as f64;
    let radicand = 2.0 / nf * (nf / std::f64::consts::TAU).ln();
    if n < 3 || radicand < 0.0 {
        return Err(invalid(format!(
            "connectivity threshold is undefined for N = {n} (needs N >= 7)"
        )));
    }
    Ok((1.0 + radicand.sqrt()) / nf)
}

/// `ln n / ln <k>`, the small-world estimate of the mean hop count.
pub fn avg_path_length_heuristic(n: f64, mean_degree: f64) -> Result<f64, AnalyticsError> {
    if !(mean_degree > 1.0) {
        return Err(invalid(format!("mean degree must exceed 1, got {mean_degree}")));
    }
    if !(n >= 1.0) {
        return Err(invalid(format!("node count must be at least 1, got {n}")));
    }
    Ok(n.ln() / mean_degree.ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(region: f64, beta: f64, attempts: u32) -> WaxmanAnalyticParams {
        let w = WaxmanSpec::with_alpha_l(50, region, 226.0, beta).unwrap();
        WaxmanAnalyticParams::new(w, LinkParams::new(0.2, attempts).unwrap()).unwrap()
    }

    #[test]
    fn edge_prob_examples() {
        let p = params(100.0, 1.0, 1);
        let o = Point::new(0.0, 0.0);
        assert_eq!(waxman_edge_prob(o, o, &p), 1.0);
        assert_eq!(waxman_edge_prob(o, o, &params(100.0, 0.4, 1)), 0.4);
        let v = waxman_edge_prob(o, Point::new(30.0, 40.0), &p);
        assert!((v - (-50.0f64 / 226.0).exp() * 0.1).abs() < 1e-15);
        assert!((v - 0.08015).abs() < 1e-5, "{v}");
        let lossy = WaxmanAnalyticParams::new(p.waxman, LinkParams::new(1e6, 1).unwrap()).unwrap();
        assert_eq!(waxman_edge_prob(o, Point::new(1.0, 0.0), &lossy), 0.0);
    }

    /// 2-D Simpson rule over the density of the coordinate differences.
    fn quadrature(p: &WaxmanAnalyticParams, cells: usize) -> f64 {
        let r = p.region();
        let h = r / cells as f64;
        let w = |i: usize| match i {
            0 => 1.0,
            i if i == cells => 1.0,
            i if i % 2 == 1 => 4.0,
            _ => 2.0,
        };
        let mut s = 0.0;
        for i in 0..=cells {
            let a = i as f64 * h;
            for j in 0..=cells {
                let b = j as f64 * h;
                let f = p.edge_prob(a.hypot(b)) * (r - a) * (r - b);
                s += w(i) * w(j) * f;
            }
        }
        4.0 * s * h * h / 9.0 / r.powi(4)
    }

    #[test]
    fn mean_edge_prob_matches_quadrature() {
        let p = params(100.0, 1.0, 1);
        let exact = quadrature(&p, 2000);
        assert!((exact - quadrature(&p, 1000)).abs() < 1e-7);
        let est = mean_edge_prob(&p, 2_000_000, 7).unwrap();
        assert!(est.stderr < 1.25e-4, "{est:?}");
        assert!((est.value - exact).abs() < 4.0 * est.stderr, "{est:?} vs {exact}");
        // three significant figures: within half a unit of the third digit
        assert!((0.1..1.0).contains(&exact));
        assert!((est.value - exact).abs() < 5e-4, "{est:?} vs {exact}");
    }

    #[test]
    fn mean_edge_prob_limits() {
        let tiny = mean_edge_prob(&params(1e-6, 0.7, 1), 1000, 1).unwrap();
        assert!((tiny.value - 0.7).abs() < 1e-6);
        let none = mean_edge_prob(&params(100.0, 0.0, 1), 1000, 1).unwrap();
        assert_eq!((none.value, none.stderr), (0.0, 0.0));
        assert!(mean_edge_prob(&params(100.0, 1.0, 1), 0, 1).is_err());
    }

    #[test]
    fn mean_edge_prob_decreases_with_region() {
        // common seed: every sample is the same pair of unit points scaled by R
        let mut prev = f64::INFINITY;
        for r in [1.0, 10.0, 50.0, 100.0, 200.0, 1000.0] {
            let e = mean_edge_prob(&params(r, 1.0, 1), 5000, 3).unwrap().value;
            assert!(e < prev, "R={r}: {e} >= {prev}");
            prev = e;
        }
    }

    #[test]
    fn estimators_ignore_thread_count() {
        let p = params(100.0, 1.0, 2);
        let one = crate::montecarlo::with_threads(1, || path_prob_correlation(&p, 20_000, 5));
        let many = crate::montecarlo::with_threads(8, || path_prob_correlation(&p, 20_000, 5));
        assert_eq!(one, many);
        let one = crate::montecarlo::with_threads(1, || mean_edge_prob(&p, 20_000, 5));
        let many = crate::montecarlo::with_threads(8, || mean_edge_prob(&p, 20_000, 5));
        assert_eq!(one, many);
    }

    #[test]
    fn correlation_degenerate_and_control() {
        let flat = params(1e-300, 1.0, 1);
        assert_eq!(path_prob_correlation(&flat, 1000, 1).unwrap(), None);
        assert_eq!(path_prob_correlation(&params(100.0, 0.0, 1), 1000, 1).unwrap(), None);
        assert!(path_prob_correlation(&flat, 999, 1).is_err());

        let c = path_prob_correlation_control(&params(100.0, 1.0, 1), 400_000, 11)
            .unwrap()
            .unwrap();
        assert!(c.value.abs() < 4.0 * c.stderr, "{c:?}");
        assert!(c.stderr < 0.005);
    }

    #[test]
    fn comoments_merge_matches_sequential() {
        let xs: Vec<(f64, f64)> = (0..50)
            .map(|i| ((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos() + i as f64 * 0.01))
            .collect();
        let mut all = CoMoments::default();
        xs.iter().for_each(|&(x, y)| all.push(x, y));
        let (mut a, mut b) = (CoMoments::default(), CoMoments::default());
        xs[..17].iter().for_each(|&(x, y)| a.push(x, y));
        xs[17..].iter().for_each(|&(x, y)| b.push(x, y));
        a.merge(&b);
        assert!((a.correlation().unwrap() - all.correlation().unwrap()).abs() < 1e-12);

        // two-pass oracle
        let n = xs.len() as f64;
        let mx = xs.iter().map(|p| p.0).sum::<f64>() / n;
        let my = xs.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = xs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = xs.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let syy: f64 = xs.iter().map(|p| (p.1 - my).powi(2)).sum();
        assert!((all.correlation().unwrap() - sxy / (sxx * syy).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn batches_cover_samples() {
        for n in [1, 99, 100, 1000, 6399, 6400, 1_000_003] {
            let b = batches(n);
            assert_eq!(b.iter().sum::<u64>(), n);
            assert!(b.len() <= 64);
        }
    }

    #[test]
    fn expected_paths_small_n() {
        let r = expected_paths(2, 0.3).unwrap();
        assert_eq!(r.e_paths, 0.3);
        let r = expected_paths(3, 0.3).unwrap();
        assert!((r.e_paths - (0.3 + 0.09)).abs() < 1e-15);
        assert!((r.log_e_paths - 0.39f64.ln()).abs() < 1e-14);
        assert!(expected_paths(1, 0.3).is_err());
        assert!(expected_paths(10, 0.0).is_err());
        assert!(expected_paths(10, 1.5).is_err());
    }

    // (N, E, ln series, residual A - series), from 50-digit arithmetic
    // (residual cross-checked by direct subtraction at 1200 digits).
    const FROZEN: [(u64, f64, f64, f64); 7] = [
        (5, 0.3, -0.24769242423562246052, 0.581736969873970118),
        (10, 0.3, 3.0948029085211358057, 0.163532023253982436),
        (20, 0.1, 2.6391159892297312739, 0.101345284789030648),
        (50, 0.05, 13.88304221255430265, 0.0337375217365030862),
        (50, 0.6, 117.31013475036738259, 0.0211114021444946193),
        (200, 0.01, 36.211497989502762182, 0.0100018900425237661),
        (1000, 0.005, 805.29461924904401753, 0.00125117321857767305),
    ];

    #[test]
    fn expected_paths_frozen_values() {
        for (n, e, ln_s, t) in FROZEN {
            let r = expected_paths(n, e).unwrap();
            assert!((r.log_e_paths - ln_s).abs() < 1e-12 * ln_s.abs().max(1.0), "{n} {e}: {}", r.log_e_paths);
            assert!((r.residual - t).abs() < 1e-13 * t, "{n} {e}: {}", r.residual);
            if r.e_paths.is_finite() {
                assert!((r.e_paths.ln() - ln_s).abs() < 1e-12 * ln_s.abs().max(1.0));
            }
        }
        let r = expected_paths(50, 0.05).unwrap();
        assert!((r.e_paths - 1069864.1251721673594).abs() < 1e-6);
        assert_eq!(expected_paths(1000, 0.005).unwrap().e_paths, f64::INFINITY);
    }

    #[test]
    fn bounds_sandwich_series() {
        let r = expected_paths(10, 0.3).unwrap();
        assert!(r.bounds_hold());
        let (lo, hi) = (r.lower.unwrap(), r.upper);
        assert!(lo < r.e_paths && r.e_paths < hi, "{lo} {} {hi}", r.e_paths);

        let r = expected_paths(10, 0.05).unwrap();
        assert_eq!(r.lower, None);
        assert!(r.bounds_hold());
        assert!(r.e_paths < r.upper);

        for n in [5u64, 8, 13, 40, 100, 400, 3000] {
            for e in [0.002, 0.01, 0.05, 0.2, 0.5, 0.9, 1.0] {
                let r = expected_paths(n, e).unwrap();
                assert!(r.bounds_hold(), "{n} {e}: {r:?}");
            }
        }
    }

    #[test]
    fn residual_scales_as_inverse_n() {
        for c in [1.5, 3.0, 10.0] {
            let mut prev: Option<f64> = None;
            for n in [20u64, 40, 80, 160, 320, 640] {
                let nt = n as f64 * expected_paths(n, c / n as f64).unwrap().residual;
                let limit = c / (c - 1.0);
                assert!(nt > 1.0 && nt < limit * n as f64 / (n - 1) as f64, "{c} {n}: {nt}");
                if let Some(p) = prev {
                    assert!((nt - limit).abs() < (p - limit).abs() + 1e-12, "{c} {n}");
                }
                prev = Some(nt);
            }
        }
    }

    #[test]
    fn threshold_values() {
        let t = connectivity_threshold(100).unwrap();
        assert!((t - 0.012352570134801).abs() < 1e-13, "{t}");
        assert!((t - 0.01235).abs() < 5e-6);
        for n in [1, 2, 3, 6] {
            assert!(connectivity_threshold(n).is_err());
        }
        assert!(connectivity_threshold(7).is_ok());
        let mut prev = connectivity_threshold(8).unwrap();
        for n in 9..5000 {
            let t = connectivity_threshold(n).unwrap();
            assert!(t < prev, "N={n}");
            prev = t;
        }
    }

    #[test]
    fn threshold_implies_a_path() {
        for (n, frozen) in [(50u64, 14.39059648), (100, 156.9380161), (200, 8378.054839)] {
            let e = 1.2 * connectivity_threshold(n).unwrap();
            let r = expected_paths(n, e).unwrap();
            assert!(r.e_paths >= 1.0);
            assert!((r.e_paths / frozen - 1.0).abs() < 1e-8, "{n}: {}", r.e_paths);
        }
    }

    #[test]
    fn path_length_heuristic() {
        assert_eq!(avg_path_length_heuristic(7.0, 7.0).unwrap(), 1.0);
        assert!((avg_path_length_heuristic(1e6, 1e3).unwrap() - 2.0).abs() < 1e-12);
        assert!(avg_path_length_heuristic(10.0, 1.0).is_err());
        assert!(avg_path_length_heuristic(10.0, f64::NAN).is_err());
    }

    #[test]
    fn ln_factorial_small() {
        assert_eq!(ln_factorial(0), 0.0);
        assert_eq!(ln_factorial(1), 0.0);
        assert!((ln_factorial(5) - 120f64.ln()).abs() < 1e-14);
        assert!((ln_factorial(20) - 2432902008176640000f64.ln()).abs() < 1e-12);
    }
}
