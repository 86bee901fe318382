//! Topology and result file formats.
//!
//! * Topology Zoo GML (read only): nested `key value` / `key [ ... ]`
//!   blocks with `node [ id .. Longitude .. Latitude .. ]` and
//!   `edge [ source .. target .. ]` entries.
//! * Native topology text: `R <km>`, then `N <id> <x> <y>` and `E <u> <v>`
//!   lines. Coordinates are written in shortest round-trip form, so reading
//!   a written file reproduces the topology exactly.
//! * CSV for rate-vs-distance and average-rate results.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, NodeId, PhysicalTopology, Point};
use crate::montecarlo::{AverageRate, DistanceRecord};

/// Mean Earth radius in km.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("no node carries coordinates; cannot place the topology")]
    NoLocatedNodes,
    #[error("invalid topology: {0}")]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn syntax(line: usize, message: impl Into<String>) -> IoError {
    IoError::Syntax {
        line,
        message: message.into(),
    }
}

// ---------------------------------------------------------------------------
// GML

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Key(String),
    Num(f64),
    Str(String),
    Open,
    Close,
}

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>, IoError> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    let mut line = 1;
    while let Some(&(start, c)) = chars.peek() {
        match c {
            '\n' => {
                line += 1;
                chars.next();
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            '#' => {
                while let Some(&(_, c)) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '[' => {
                out.push((Token::Open, line));
                chars.next();
            }
            ']' => {
                out.push((Token::Close, line));
                chars.next();
            }
            '"' => {
                let open_line = line;
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some((_, '"')) => break,
                        Some((_, ch)) => {
                            if ch == '\n' {
                                line += 1;
                            }
                            s.push(ch);
                        }
                        None => return Err(syntax(open_line, "unterminated string")),
                    }
                }
                out.push((Token::Str(decode_entities(&s)), open_line));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut end = start;
                while let Some(&(i, ch)) = chars.peek() {
                    if ch.is_ascii_alphanumeric() || ch == '_' {
                        end = i + ch.len_utf8();
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push((Token::Key(text[start..end].to_string()), line));
            }
            c if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                let mut end = start;
                while let Some(&(i, ch)) = chars.peek() {
                    if ch.is_ascii_alphanumeric() || matches!(ch, '.' | '-' | '+') {
                        end = i + ch.len_utf8();
                        chars.next();
                    } else {
                        break;
                    }
                }
                let raw = &text[start..end];
                let v: f64 = raw
                    .parse()
                    .map_err(|_| syntax(line, format!("malformed number '{raw}'")))?;
                out.push((Token::Num(v), line));
            }
            other => return Err(syntax(line, format!("unexpected character '{other}'"))),
        }
    }
    Ok(out)
}

fn decode_entities(s: &str) -> String {
    s.replace("&quot;", "\"").replace("&amp;", "&")
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Num(f64),
    Str(String),
    List(Vec<Entry>),
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    key: String,
    value: Value,
    line: usize,
}

fn find<'a>(entries: &'a [Entry], key: &str) -> Option<&'a Entry> {
    entries.iter().find(|e| e.key == key)
}

fn parse_list<I>(tokens: &mut std::iter::Peekable<I>, nested: Option<usize>) -> Result<Vec<Entry>, IoError>
where
    I: Iterator<Item = (Token, usize)>,
{
    let mut entries = Vec::new();
    loop {
        let Some((tok, line)) = tokens.next() else {
            return match nested {
                Some(open) => Err(syntax(open, "unbalanced '[': block is never closed")),
                None => Ok(entries),
            };
        };
        let key = match tok {
            Token::Close if nested.is_some() => return Ok(entries),
            Token::Close => return Err(syntax(line, "unbalanced ']'")),
            Token::Key(k) => k,
            other => return Err(syntax(line, format!("expected a key, found {other:?}"))),
        };
        let value = match tokens.next() {
            Some((Token::Num(v), _)) => Value::Num(v),
            Some((Token::Str(s), _)) => Value::Str(s),
            Some((Token::Open, l)) => Value::List(parse_list(tokens, Some(l))?),
            Some((Token::Key(k), l)) => {
                return Err(syntax(l, format!("key '{key}' has no value (found key '{k}')")))
            }
            Some((Token::Close, l)) => return Err(syntax(l, format!("key '{key}' has no value"))),
            None => return Err(syntax(line, format!("key '{key}' has no value"))),
        };
        entries.push(Entry { key, value, line });
    }
}

/// A node of a geographic topology.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoNode {
    /// Identifier used in the source file.
    pub id: i64,
    pub label: String,
    pub longitude: f64,
    pub latitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GmlWarning {
    /// Node placed at the centroid of the located nodes.
    MissingCoordinates { id: i64, label: String },
    DuplicateEdge { source: i64, target: i64, line: usize },
    SelfLoop { node: i64, line: usize },
}

impl std::fmt::Display for GmlWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GmlWarning::MissingCoordinates { id, label } => {
                write!(f, "node {id} ({label}) has no coordinates; placed at the centroid")
            }
            GmlWarning::DuplicateEdge { source, target, line } => {
                write!(f, "line {line}: duplicate edge {source}-{target} dropped")
            }
            GmlWarning::SelfLoop { node, line } => write!(f, "line {line}: self-loop on node {node} dropped"),
        }
    }
}

/// Parsed geographic topology. `nodes[i]` describes topology node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct GmlTopology {
    pub topology: PhysicalTopology,
    pub nodes: Vec<GeoNode>,
    pub warnings: Vec<GmlWarning>,
    /// Edge blocks in the source, before duplicates and self-loops were dropped.
    pub edge_blocks: usize,
}

fn integer(entry: &Entry, what: &str) -> Result<i64, IoError> {
    match entry.value {
        Value::Num(v) if v.fract() == 0.0 && v.is_finite() => Ok(v as i64),
        _ => Err(syntax(entry.line, format!("{what} must be an integer"))),
    }
}

fn number(entries: &[Entry], key: &str) -> Result<Option<f64>, IoError> {
    match find(entries, key) {
        None => Ok(None),
        Some(Entry {
            value: Value::Num(v),
            ..
        }) => Ok(Some(*v)),
        Some(e) => Err(syntax(e.line, format!("{key} must be numeric"))),
    }
}

/// Parses a Topology Zoo GML document. Nodes are re-indexed in order of
/// appearance; duplicate edges and self-loops are dropped with a warning;
/// nodes without coordinates are placed at the centroid of the located ones.
/// Positions are projected to km and shifted so the bounding box starts at
/// the origin; the region size is the larger bounding-box side.
pub fn parse_gml(text: &str) -> Result<GmlTopology, IoError> {
    let mut tokens = tokenize(text)?.into_iter().peekable();
    let top = parse_list(&mut tokens, None)?;
    let graph = match find(&top, "graph") {
        Some(Entry {
            value: Value::List(items),
            ..
        }) => items,
        Some(e) => return Err(syntax(e.line, "'graph' must be a block")),
        None => return Err(syntax(1, "no 'graph [ ... ]' block")),
    };

    let mut raw_nodes: Vec<(i64, String, Option<(f64, f64)>)> = Vec::new();
    let mut index: HashMap<i64, NodeId> = HashMap::new();
    for entry in graph.iter().filter(|e| e.key == "node") {
        let Value::List(fields) = &entry.value else {
            return Err(syntax(entry.line, "'node' must be a block"));
        };
        let id_entry =
            find(fields, "id").ok_or_else(|| syntax(entry.line, "node block without id"))?;
        let id = integer(id_entry, "node id")?;
        if index.insert(id, raw_nodes.len()).is_some() {
            return Err(syntax(id_entry.line, format!("duplicate node id {id}")));
        }
        let label = match find(fields, "label") {
            Some(Entry {
                value: Value::Str(s),
                ..
            }) => s.clone(),
            Some(Entry {
                value: Value::Num(v),
                ..
            }) => v.to_string(),
            _ => id.to_string(),
        };
        let lon = number(fields, "Longitude")?;
        let lat = number(fields, "Latitude")?;
        let coords = match (lon, lat) {
            (Some(lon), Some(lat)) => {
                if lat.abs() > 90.0 || lon.abs() > 180.0 {
                    return Err(syntax(
                        entry.line,
                        format!("coordinates ({lon}, {lat}) out of range"),
                    ));
                }
                Some((lon, lat))
            }
            _ => None,
        };
        raw_nodes.push((id, label, coords));
    }

    let mut warnings = Vec::new();
    let mut seen = HashSet::new();
    let mut edges = Vec::new();
    let mut edge_blocks = 0;
    for entry in graph.iter().filter(|e| e.key == "edge") {
        edge_blocks += 1;
        let Value::List(fields) = &entry.value else {
            return Err(syntax(entry.line, "'edge' must be a block"));
        };
        let end = |key: &str| -> Result<(i64, NodeId), IoError> {
            let e = find(fields, key)
                .ok_or_else(|| syntax(entry.line, format!("edge block without {key}")))?;
            let id = integer(e, key)?;
            let idx = *index
                .get(&id)
                .ok_or_else(|| syntax(e.line, format!("edge {key} refers to unknown node {id}")))?;
            Ok((id, idx))
        };
        let (s_id, s) = end("source")?;
        let (t_id, t) = end("target")?;
        if s == t {
            warnings.push(GmlWarning::SelfLoop {
                node: s_id,
                line: entry.line,
            });
            continue;
        }
        if !seen.insert((s.min(t), s.max(t))) {
            warnings.push(GmlWarning::DuplicateEdge {
                source: s_id,
                target: t_id,
                line: entry.line,
            });
            continue;
        }
        edges.push((s, t));
    }

    let located: Vec<(f64, f64)> = raw_nodes.iter().filter_map(|n| n.2).collect();
    if located.is_empty() {
        return Err(IoError::NoLocatedNodes);
    }
    let k = located.len() as f64;
    let centroid = (
        located.iter().map(|c| c.0).sum::<f64>() / k,
        located.iter().map(|c| c.1).sum::<f64>() / k,
    );
    let nodes: Vec<GeoNode> = raw_nodes
        .into_iter()
        .map(|(id, label, coords)| {
            let (longitude, latitude) = coords.unwrap_or_else(|| {
                warnings.push(GmlWarning::MissingCoordinates {
                    id,
                    label: label.clone(),
                });
                centroid
            });
            GeoNode {
                id,
                label,
                longitude,
                latitude,
            }
        })
        .collect();

    let (positions, region) = project_to_km(&nodes);
    let topology = PhysicalTopology::new(region, positions, edges)?;
    Ok(GmlTopology {
        topology,
        nodes,
        warnings,
        edge_blocks,
    })
}

/// Equirectangular projection about the mean latitude, translated so the
/// bounding box's lower-left corner is the origin. Returns the positions and
/// the larger side of the bounding box.
pub fn project_to_km(nodes: &[GeoNode]) -> (Vec<Point>, f64) {
    if nodes.is_empty() {
        return (Vec::new(), 0.0);
    }
    let mean_lat =
        nodes.iter().map(|n| n.latitude).sum::<f64>() / nodes.len() as f64;
    let kx = EARTH_RADIUS_KM * mean_lat.to_radians().cos();
    let raw: Vec<(f64, f64)> = nodes
        .iter()
        .map(|n| {
            (
                kx * n.longitude.to_radians(),
                EARTH_RADIUS_KM * n.latitude.to_radians(),
            )
        })
        .collect();
    let min_x = raw.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let min_y = raw.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let points: Vec<Point> = raw
        .iter()
        .map(|&(x, y)| Point::new(x - min_x, y - min_y))
        .collect();
    let region = points
        .iter()
        .map(|p| p.x.max(p.y))
        .fold(0.0, f64::max);
    (points, region)
}

/// Great-circle distance in km.
pub fn haversine_km(a: &GeoNode, b: &GeoNode) -> f64 {
    let (p1, p2) = (a.latitude.to_radians(), b.latitude.to_radians());
    let dp = p2 - p1;
    let dl = (b.longitude - a.longitude).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().asin()
}

// ---------------------------------------------------------------------------
// Native topology format

pub fn write_topology<W: Write>(topo: &PhysicalTopology, mut out: W) -> std::io::Result<()> {
    out.write_all(topology_to_string(topo).as_bytes())
}

pub fn topology_to_string(topo: &PhysicalTopology) -> String {
    let mut s = String::new();
    writeln!(s, "R {}", topo.region_size()).unwrap();
    for (id, p) in topo.positions().iter().enumerate() {
        writeln!(s, "N {id} {} {}", p.x, p.y).unwrap();
    }
    for e in topo.edges() {
        writeln!(s, "E {} {}", e.a, e.b).unwrap();
    }
    s
}

pub fn read_topology<R: Read>(mut input: R) -> Result<PhysicalTopology, IoError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    parse_topology(&text)
}

/// Parses the native format. `#` starts a comment line.
pub fn parse_topology(text: &str) -> Result<PhysicalTopology, IoError> {
    let mut region = None;
    let mut positions = Vec::new();
    let mut edges = Vec::new();
    let mut edge_lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        let num = |s: &str| -> Result<f64, IoError> {
            s.parse::<f64>()
                .map_err(|_| syntax(line, format!("malformed number '{s}'")))
        };
        let id = |s: &str| -> Result<usize, IoError> {
            s.parse::<usize>()
                .map_err(|_| syntax(line, format!("malformed node id '{s}'")))
        };
        match (fields[0], fields.len()) {
            ("R", 2) if region.is_none() => region = Some(num(fields[1])?),
            ("R", _) if region.is_some() => return Err(syntax(line, "duplicate R header")),
            ("R", _) => return Err(syntax(line, "expected 'R <km>'")),
            (_, _) if region.is_none() => {
                return Err(syntax(line, "first record must be the 'R <km>' header"))
            }
            ("N", 4) => {
                let n = id(fields[1])?;
                if n != positions.len() {
                    return Err(syntax(
                        line,
                        format!("expected node id {}, found {n}", positions.len()),
                    ));
                }
                positions.push(Point::new(num(fields[2])?, num(fields[3])?));
            }
            ("N", _) => return Err(syntax(line, "expected 'N <id> <x> <y>'")),
            ("E", 3) => {
                edges.push((id(fields[1])?, id(fields[2])?));
                edge_lines.push(line);
            }
            ("E", _) => return Err(syntax(line, "expected 'E <u> <v>'")),
            (tag, _) => return Err(syntax(line, format!("unknown record type '{tag}'"))),
        }
    }
    let region = region.ok_or_else(|| syntax(1, "missing 'R <km>' header"))?;
    let n = positions.len();
    let mut seen = HashSet::new();
    for (&(u, v), &line) in edges.iter().zip(&edge_lines) {
        if u >= n || v >= n {
            return Err(syntax(line, format!("edge {u}-{v} refers to an unknown node")));
        }
        if u == v {
            return Err(syntax(line, format!("self-loop on node {u}")));
        }
        if !seen.insert((u.min(v), u.max(v))) {
            return Err(syntax(line, format!("duplicate edge {u}-{v}")));
        }
    }
    Ok(PhysicalTopology::new(region, positions, edges)?)
}

// ---------------------------------------------------------------------------
// CSV

pub const RATE_CSV_HEADER: [&str; 8] = [
    "pair_u",
    "pair_v",
    "distance_km",
    "strategy",
    "q",
    "rate",
    "stderr",
    "n_samples",
];

pub const AVERAGE_CSV_HEADER: [&str; 8] = [
    "topology",
    "n_nodes",
    "strategy",
    "q",
    "avg_rate",
    "stderr",
    "n_pairs",
    "samples_per_pair",
];

/// One row of a rate-vs-distance CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub pair_u: usize,
    pub pair_v: usize,
    pub distance_km: f64,
    pub strategy: String,
    pub q: f64,
    pub rate: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

/// One row of an average-rate CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageRow {
    pub topology: String,
    pub n_nodes: usize,
    pub strategy: String,
    pub q: f64,
    pub avg_rate: f64,
    pub stderr: f64,
    pub n_pairs: usize,
    pub samples_per_pair: usize,
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// Writes rate-vs-distance records sorted by pair, then strategy, then q.
pub fn write_rate_csv<W: Write>(records: &[DistanceRecord], out: W) -> Result<(), IoError> {
    let mut rows: Vec<&DistanceRecord> = records.iter().collect();
    rows.sort_by(|a, b| {
        a.estimate
            .pair
            .ordered()
            .cmp(&b.estimate.pair.ordered())
            .then(a.strategy.cmp(&b.strategy))
            .then(a.q.total_cmp(&b.q))
    });
    let mut w = csv_writer(out);
    w.write_record(RATE_CSV_HEADER)?;
    for r in rows {
        let (u, v) = r.estimate.pair.ordered();
        w.serialize(RateRow {
            pair_u: u,
            pair_v: v,
            distance_km: r.estimate.distance,
            strategy: r.strategy.name().to_string(),
            q: r.q,
            rate: r.estimate.mean,
            stderr: r.estimate.stderr,
            n_samples: r.estimate.n_samples,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Writes average rates sorted by topology, size, strategy and q.
pub fn write_average_csv<W: Write>(records: &[AverageRate], out: W) -> Result<(), IoError> {
    let mut rows: Vec<&AverageRate> = records.iter().collect();
    rows.sort_by(|a, b| {
        a.topology
            .cmp(&b.topology)
            .then(a.nodes.cmp(&b.nodes))
            .then(a.strategy.cmp(&b.strategy))
            .then(a.q.total_cmp(&b.q))
    });
    let mut w = csv_writer(out);
    w.write_record(AVERAGE_CSV_HEADER)?;
    for r in rows {
        w.serialize(AverageRow {
            topology: r.topology.clone(),
            n_nodes: r.nodes,
            strategy: r.strategy.name().to_string(),
            q: r.q,
            avg_rate: r.mean,
            stderr: r.stderr,
            n_pairs: r.n_pairs,
            samples_per_pair: r.samples_per_pair,
        })?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>, R: Read>(input: R) -> Result<Vec<T>, IoError> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(IoError::from)).collect()
}

pub fn read_rate_csv<R: Read>(input: R) -> Result<Vec<RateRow>, IoError> {
    read_rows(input)
}

pub fn read_average_csv<R: Read>(input: R) -> Result<Vec<AverageRow>, IoError> {
    read_rows(input)
}
