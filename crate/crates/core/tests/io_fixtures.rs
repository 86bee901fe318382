use std::collections::HashSet;
use std::path::PathBuf;

use entroute::io::{haversine_km, parse_gml, parse_topology, topology_to_string, GmlWarning, IoError};
use proptest::prelude::*;

fn fixture(name: &str) -> String {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "fixtures", name]
        .iter()
        .collect();
    std::fs::read_to_string(path).unwrap()
}

const FIXTURES: [&str; 5] = [
    "Surfnet.gml",
    "Abilene.gml",
    "Aconet.gml",
    "Ai3.gml",
    "Geant2012.gml",
];

/// Counts straight from the text: node blocks, edge blocks and distinct
/// unordered source/target pairs (excluding self-loops).
fn text_counts(text: &str) -> (usize, usize, usize) {
    let nodes = text.matches("node [").count();
    let blocks = text.matches("edge [").count();
    let mut pairs = HashSet::new();
    for block in text.split("edge [").skip(1) {
        let field = |key: &str| -> i64 {
            block
                .lines()
                .map(str::trim)
                .find_map(|l| l.strip_prefix(key))
                .unwrap()
                .trim()
                .parse()
                .unwrap()
        };
        let (s, t) = (field("source "), field("target "));
        if s != t {
            pairs.insert((s.min(t), s.max(t)));
        }
    }
    (nodes, blocks, pairs.len())
}

#[test]
fn fixture_counts_match_text() {
    for name in FIXTURES {
        let text = fixture(name);
        let (nodes, blocks, distinct) = text_counts(&text);
        match parse_gml(&text) {
            Ok(g) => {
                assert_eq!(g.topology.node_count(), nodes, "{name}");
                assert_eq!(g.edge_blocks, blocks, "{name}");
                assert_eq!(g.topology.edge_count(), distinct, "{name}");
                let dropped = g
                    .warnings
                    .iter()
                    .filter(|w| !matches!(w, GmlWarning::MissingCoordinates { .. }))
                    .count();
                assert_eq!(dropped, blocks - distinct, "{name}");
            }
            Err(IoError::NoLocatedNodes) => assert_eq!(name, "Ai3.gml"),
            Err(e) => panic!("{name}: {e}"),
        }
    }
}

#[test]
fn surfnet_shape() {
    let g = parse_gml(&fixture("Surfnet.gml")).unwrap();
    assert_eq!(g.topology.node_count(), 50);
    assert_eq!(g.edge_blocks, 73);
    assert_eq!(g.topology.edge_count(), 68);
    assert!(g.warnings.iter().all(|w| matches!(w, GmlWarning::DuplicateEdge { .. })));
    // Netherlands spans roughly 200 x 300 km
    let r = g.topology.region_size();
    assert!((150.0..400.0).contains(&r), "{r}");
}

#[test]
fn surfnet_native_round_trip() {
    let g = parse_gml(&fixture("Surfnet.gml")).unwrap();
    let text = topology_to_string(&g.topology);
    let back = parse_topology(&text).unwrap();
    assert_eq!(back, g.topology);
    assert_eq!(topology_to_string(&back), text);
}

#[test]
fn projection_preserves_distance_order() {
    let g = parse_gml(&fixture("Surfnet.gml")).unwrap();
    let n = g.nodes.len();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let planar = g.topology.euclidean_distance(i, j).unwrap();
            pairs.push((haversine_km(&g.nodes[i], &g.nodes[j]), planar));
        }
    }
    let distortion = pairs
        .iter()
        .map(|&(h, p)| (p / h - 1.0).abs())
        .fold(0.0, f64::max);
    assert!(distortion < 0.03, "{distortion}");

    // Pairs whose great-circle distances differ by more than the distortion
    // band must keep their order; near-ties may swap.
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let band = (1.0 + distortion) / (1.0 - distortion);
    let mut discordant = 0usize;
    let mut total = 0usize;
    for (k, a) in pairs.iter().enumerate() {
        for b in &pairs[k + 1..] {
            total += 1;
            if b.1 < a.1 {
                discordant += 1;
                assert!(b.0 <= a.0 * band, "{a:?} vs {b:?}");
            }
        }
    }
    let frac = discordant as f64 / total as f64;
    println!("max distortion {distortion:.4}, discordant {discordant}/{total}");
    assert!(frac < 0.005, "{frac}");
}

#[test]
fn projection_distortion_grows_with_extent() {
    for (name, limit) in [("Abilene.gml", 0.25), ("Geant2012.gml", 0.6)] {
        let g = parse_gml(&fixture(name)).unwrap();
        let n = g.nodes.len();
        for i in 0..n {
            for j in i + 1..n {
                let h = haversine_km(&g.nodes[i], &g.nodes[j]);
                if h > 1.0 {
                    let p = g.topology.euclidean_distance(i, j).unwrap();
                    assert!((p / h - 1.0).abs() < limit, "{name} {i}-{j}: {p} vs {h}");
                }
            }
        }
    }
}

#[test]
fn every_prefix_parses_or_fails_cleanly() {
    for name in FIXTURES {
        let text = fixture(name);
        let bytes = text.as_bytes();
        for cut in (0..bytes.len()).step_by(7) {
            if let Ok(prefix) = std::str::from_utf8(&bytes[..cut]) {
                let _ = parse_gml(prefix);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]
    #[test]
    fn corrupted_fixture_never_panics(
        which in 0usize..5,
        edits in prop::collection::vec((any::<prop::sample::Index>(), prop::sample::select(vec!['[', ']', '"', '#', 'x', '-', '9', ' ', '\n'])), 1..6),
    ) {
        let mut chars: Vec<char> = fixture(FIXTURES[which]).chars().collect();
        for (at, c) in edits {
            let i = at.index(chars.len());
            chars[i] = c;
        }
        let text: String = chars.into_iter().collect();
        let _ = parse_gml(&text);
    }
}
