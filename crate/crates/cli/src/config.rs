//! Experiment configuration files.
//!
//! ```toml
//! seed = 42
//!
//! [topology]
//! kind = "waxman"          # grid | waxman | scalefree | file
//! nodes = [50, 100, 150]   # or side = ... for grids; a list means a sweep
//! region_km = 100
//! alpha_l_km = 226
//! beta = 1.0
//!
//! [link]
//! gamma = 0.2
//! attempts = 1
//!
//! [strategies]
//! names = "BSM, GHZ_UNIFORM, HYBRID"
//! q = [0.7, 0.8, 0.9]
//!
//! [sampling]
//! topologies = 10
//! pairs = 20               # or "all"
//! samples_per_pair = 500
//!
//! [outputs]
//! average = true
//! distance = false
//! ```
//!
//! List-valued keys accept a single value, an array, or a comma-separated
//! string.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use entroute::generate::{GridSpec, ScaleFreeSpec, WaxmanSpec, DEFAULT_ALPHA_L_KM};
use entroute::io::{parse_gml, parse_topology};
use entroute::montecarlo::{ExperimentConfig, PairSelection, SamplingPlan, TopologySpec};
use entroute::{LinkParams, PhysicalTopology, Strategy};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawList<T>", into = "Vec<T>")]
#[serde(bound(
    deserialize = "T: Deserialize<'de> + FromStr, T::Err: Display",
    serialize = "T: Serialize + Clone"
))]
pub struct List<T: Clone>(pub Vec<T>);

#[derive(Deserialize)]
#[serde(untagged)]
enum RawList<T> {
    Many(Vec<T>),
    Text(String),
    One(T),
}

impl<T: FromStr + Clone> TryFrom<RawList<T>> for List<T>
where
    T::Err: Display,
{
    type Error = String;

    fn try_from(raw: RawList<T>) -> Result<Self, String> {
        let items = match raw {
            RawList::Many(v) => v,
            RawList::One(x) => vec![x],
            RawList::Text(s) => s
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<T>().map_err(|e| format!("bad list item '{t}': {e}")))
                .collect::<Result<_, _>>()?,
        };
        Ok(List(items))
    }
}

impl<T: Clone> From<List<T>> for Vec<T> {
    fn from(l: List<T>) -> Vec<T> {
        l.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: Option<u64>,
    pub topology: TopologySection,
    #[serde(default)]
    pub link: LinkSection,
    pub strategies: StrategySection,
    #[serde(default)]
    pub sampling: SamplingSection,
    #[serde(default)]
    pub outputs: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<List<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<List<usize>>,
    #[serde(default = "default_region")]
    pub region_km: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_l_km: Option<f64>,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m0: Option<usize>,
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default = "one")]
    pub nu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

fn default_region() -> f64 {
    100.0
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    pub gamma: f64,
    pub attempts: u32,
}

impl Default for LinkSection {
    fn default() -> Self {
        let d = LinkParams::default();
        LinkSection {
            gamma: d.gamma(),
            attempts: d.attempts(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySection {
    pub names: List<String>,
    pub q: List<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Pairs {
    Count(usize),
    Keyword(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topologies: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Pairs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_per_pair: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_pairs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_samples: Option<usize>,
    #[serde(default)]
    pub same_component_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "yes")]
    pub average: bool,
    #[serde(default)]
    pub distance: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            average: true,
            distance: false,
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Config, CliError> {
        toml::from_str(text).map_err(|e| invalid(format!("config: {}", e.message())))
    }

    /// Loads a TOML config, or the config echoed in a run manifest when the
    /// file ends in `.json`. Relative topology paths resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut config = if path.extension().is_some_and(|e| e == "json") {
            let manifest: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
            let echo = manifest
                .get("config")
                .ok_or_else(|| invalid(format!("{}: no 'config' entry", path.display())))?;
            serde_json::from_value(echo.clone())
                .map_err(|e| invalid(format!("{}: {e}", path.display())))?
        } else {
            Config::from_toml(&text)?
        };
        if let Some(p) = &config.topology.path {
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                let joined = base.join(p);
                config.topology.path = Some(joined.canonicalize().unwrap_or(joined));
            }
        }
        Ok(config)
    }

    pub fn strategies(&self) -> Result<Vec<Strategy>, CliError> {
        if self.strategies.names.0.is_empty() {
            return Err(invalid("strategy list is empty"));
        }
        self.strategies
            .names
            .0
            .iter()
            .map(|n| n.parse::<Strategy>().map_err(|e| invalid(e.to_string())))
            .collect()
    }

    pub fn link(&self) -> Result<LinkParams, CliError> {
        LinkParams::new(self.link.gamma, self.link.attempts).map_err(|e| invalid(e.to_string()))
    }

    pub fn sizes(&self) -> Result<Vec<usize>, CliError> {
        self.topology.sizes()
    }

    pub fn topology_spec(&self, size: usize) -> Result<TopologySpec, CliError> {
        self.topology.spec(size)
    }

    pub fn average_plan(&self, spec: &TopologySpec) -> Result<SamplingPlan, CliError> {
        let d = SamplingPlan::average_default(spec);
        let s = &self.sampling;
        let pairs = match &s.pairs {
            None => d.pairs,
            Some(Pairs::Count(n)) => PairSelection::Sample(*n),
            Some(Pairs::Keyword(k)) if k == "all" => PairSelection::All,
            Some(Pairs::Keyword(k)) => {
                return Err(invalid(format!("pairs must be a count or \"all\", got '{k}'")))
            }
        };
        Ok(SamplingPlan {
            topologies: s.topologies.unwrap_or(d.topologies),
            pairs,
            samples_per_pair: s.samples_per_pair.unwrap_or(d.samples_per_pair),
        })
    }

    pub fn distance_plan(&self) -> SamplingPlan {
        let d = SamplingPlan::distance_default();
        let s = &self.sampling;
        SamplingPlan {
            topologies: 1,
            pairs: s.distance_pairs.map_or(d.pairs, PairSelection::Sample),
            samples_per_pair: s.distance_samples.unwrap_or(d.samples_per_pair),
        }
    }

    /// Engine config for one topology size.
    pub fn experiment(
        &self,
        size: usize,
        plan: impl FnOnce(&TopologySpec) -> Result<SamplingPlan, CliError>,
        seed: u64,
    ) -> Result<ExperimentConfig, CliError> {
        let topology = self.topology_spec(size)?;
        let plan = plan(&topology)?;
        let mut cfg = ExperimentConfig::new(
            topology,
            self.strategies()?,
            self.strategies.q.0.clone(),
            plan,
            seed,
        );
        cfg.link = self.link()?;
        cfg.same_component_only = self.sampling.same_component_only;
        cfg.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(cfg)
    }
}

impl TopologySection {
    /// Topology sizes to run: grid sides, node counts, or the single fixed
    /// topology.
    pub fn sizes(&self) -> Result<Vec<usize>, CliError> {
        let t = self;
        let list = match t.kind.as_str() {
            "grid" => t.side.as_ref().ok_or_else(|| invalid("grid topology needs 'side'"))?,
            "waxman" | "scalefree" => t
                .nodes
                .as_ref()
                .ok_or_else(|| invalid(format!("{} topology needs 'nodes'", t.kind)))?,
            "file" => return Ok(vec![0]),
            other => {
                return Err(invalid(format!(
                    "unknown topology kind '{other}' (expected grid, waxman, scalefree or file)"
                )))
            }
        };
        if list.0.is_empty() {
            return Err(invalid("topology size list is empty"));
        }
        Ok(list.0.clone())
    }

    pub fn spec(&self, size: usize) -> Result<TopologySpec, CliError> {
        let t = self;
        let r = t.region_km;
        let spec_err = |e: entroute::generate::SpecError| invalid(e.to_string());
        Ok(match t.kind.as_str() {
            "grid" => TopologySpec::Grid(GridSpec::new(size, r).map_err(spec_err)?),
            "waxman" => {
                let w = match (t.alpha, t.alpha_l_km) {
                    (Some(_), Some(_)) => {
                        return Err(invalid("give either 'alpha' or 'alpha_l_km', not both"))
                    }
                    (Some(a), None) => WaxmanSpec::new(size, r, a, t.beta),
                    (None, l) => WaxmanSpec::with_alpha_l(size, r, l.unwrap_or(DEFAULT_ALPHA_L_KM), t.beta),
                };
                TopologySpec::Waxman(w.map_err(spec_err)?)
            }
            "scalefree" => {
                let s = ScaleFreeSpec::new(size, r, t.m.unwrap_or(5), t.m0.unwrap_or(6), t.mu, t.nu);
                TopologySpec::ScaleFree(s.map_err(spec_err)?)
            }
            "file" => {
                let path = t.path.as_ref().ok_or_else(|| invalid("file topology needs 'path'"))?;
                let topology = load_topology(path)?;
                let name = t.name.clone().unwrap_or_else(|| {
                    path.file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| "file".into())
                });
                TopologySpec::Fixed {
                    name,
                    topology: Arc::new(topology),
                }
            }
            other => return Err(invalid(format!("unknown topology kind '{other}'"))),
        })
    }
}

/// Reads a Topology Zoo GML file (by `.gml` extension) or a native
/// topology file. GML warnings go to stderr.
pub fn load_topology(path: &Path) -> Result<PhysicalTopology, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let is_gml = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("gml"));
    if is_gml {
        let g = parse_gml(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        for w in &g.warnings {
            eprintln!("warning: {}: {w}", path.display());
        }
        Ok(g.topology)
    } else {
        parse_topology(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
    }
}
