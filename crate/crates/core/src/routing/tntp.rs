use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RoutingError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

/// A directed link with its TNTP attributes. Node ids are 1-based as in the
/// files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub capacity: f64,
    pub length: f64,
    pub free_flow_time: f64,
    pub b: f64,
    pub power: f64,
    pub speed: f64,
    pub toll: f64,
    pub link_type: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub num_nodes: usize,
    pub num_zones: usize,
    pub first_thru_node: usize,
    pub edges: Vec<Edge>,
    /// Coordinates, when a node file was supplied.
    pub nodes: Vec<Node>,
}

impl Network {
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn capacities(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.capacity).collect()
    }

    pub fn free_flow_times(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.free_flow_time).collect()
    }
}

/// Positive demand between two distinct nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdDemand {
    pub origin: usize,
    pub destination: usize,
    pub demand: f64,
}

fn perr(line: usize, msg: impl Into<String>) -> RoutingError {
    RoutingError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Splits off `<KEY> value` metadata up to `<END OF METADATA>`. Returns the
/// metadata pairs and the 1-based number of the first body line.
fn metadata(text: &str) -> Result<(Vec<(String, String)>, usize), RoutingError> {
    let mut meta = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('~') {
            continue;
        }
        if !line.starts_with('<') {
            return Err(perr(n + 1, "expected a <TAG> metadata line"));
        }
        let close = line.find('>').ok_or_else(|| perr(n + 1, "unterminated metadata tag"))?;
        let key = line[1..close].trim().to_uppercase();
        if key == "END OF METADATA" {
            return Ok((meta, n + 2));
        }
        meta.push((key, line[close + 1..].trim().to_string()));
    }
    Err(perr(text.lines().count(), "missing <END OF METADATA>"))
}

fn meta_usize(meta: &[(String, String)], key: &str) -> Option<Result<usize, String>> {
    meta.iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.parse::<usize>().map_err(|e| format!("{key}: {e}")))
}

/// Body lines with comments (`~`) and blanks removed, paired with their
/// 1-based line number.
fn body(text: &str, first: usize) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .skip(first - 1)
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('~'))
}

pub fn parse_net(text: &str) -> Result<Network, RoutingError> {
    let (meta, first) = metadata(text)?;
    let mut edges = Vec::new();
    for (n, line) in body(text, first) {
        let line = line.trim_end_matches(';');
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 5 {
            return Err(perr(n, format!("expected at least 5 columns, found {}", fields.len())));
        }
        let num = |i: usize| -> Result<f64, RoutingError> {
            match fields.get(i) {
                None => Ok(0.0),
                Some(s) => s
                    .parse::<f64>()
                    .map_err(|_| perr(n, format!("column {}: not a number: {s:?}", i + 1))),
            }
        };
        let node = |i: usize| -> Result<usize, RoutingError> {
            fields[i]
                .parse::<usize>()
                .ok()
                .filter(|v| *v > 0)
                .ok_or_else(|| perr(n, format!("column {}: not a node id: {:?}", i + 1, fields[i])))
        };
        let link_type = num(9)?;
        let edge = Edge {
            from: node(0)?,
            to: node(1)?,
            capacity: num(2)?,
            length: num(3)?,
            free_flow_time: num(4)?,
            b: num(5)?,
            power: num(6)?,
            speed: num(7)?,
            toll: num(8)?,
            link_type: link_type as i64,
        };
        if !(edge.capacity > 0.0) || !(edge.free_flow_time > 0.0) {
            return Err(perr(n, "capacity and free-flow time must be positive"));
        }
        edges.push(edge);
    }
    let max_node = edges.iter().map(|e| e.from.max(e.to)).max().unwrap_or(0);
    let num_nodes = match meta_usize(&meta, "NUMBER OF NODES") {
        Some(v) => v.map_err(|e| perr(1, e))?,
        None => max_node,
    };
    if max_node > num_nodes {
        return Err(perr(first, format!("node {max_node} exceeds the declared {num_nodes} nodes")));
    }
    if let Some(links) = meta_usize(&meta, "NUMBER OF LINKS") {
        let links = links.map_err(|e| perr(1, e))?;
        if links != edges.len() {
            return Err(perr(first, format!("declared {links} links, found {}", edges.len())));
        }
    }
    Ok(Network {
        num_nodes,
        num_zones: meta_usize(&meta, "NUMBER OF ZONES")
            .transpose()
            .map_err(|e| perr(1, e))?
            .unwrap_or(num_nodes),
        first_thru_node: meta_usize(&meta, "FIRST THRU NODE")
            .transpose()
            .map_err(|e| perr(1, e))?
            .unwrap_or(1),
        edges,
        nodes: Vec::new(),
    })
}

/// Trip table as OD pairs with positive demand, ordered by origin then
/// destination. Zero entries and diagonal entries are dropped.
pub fn parse_trips(text: &str) -> Result<Vec<OdDemand>, RoutingError> {
    let (_, first) = metadata(text)?;
    let mut origin: Option<usize> = None;
    let mut out = Vec::new();
    for (n, line) in body(text, first) {
        if let Some(rest) = line.strip_prefix("Origin") {
            let o = rest
                .trim()
                .parse::<usize>()
                .map_err(|_| perr(n, format!("bad origin {:?}", rest.trim())))?;
            origin = Some(o);
            continue;
        }
        let o = origin.ok_or_else(|| perr(n, "destination entries before any Origin line"))?;
        for entry in line.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let (d, v) = entry
                .split_once(':')
                .ok_or_else(|| perr(n, format!("expected `dest : demand`, found {entry:?}")))?;
            let d = d
                .trim()
                .parse::<usize>()
                .map_err(|_| perr(n, format!("bad destination {:?}", d.trim())))?;
            let v = v
                .trim()
                .parse::<f64>()
                .map_err(|_| perr(n, format!("bad demand {:?}", v.trim())))?;
            if !(v >= 0.0) {
                return Err(perr(n, format!("negative demand {v}")));
            }
            if v > 0.0 && d != o {
                out.push(OdDemand {
                    origin: o,
                    destination: d,
                    demand: v,
                });
            }
        }
    }
    out.sort_by(|a, b| (a.origin, a.destination).cmp(&(b.origin, b.destination)));
    Ok(out)
}

/// Node coordinate file: a header line then `id x y ;` rows.
pub fn parse_nodes(text: &str) -> Result<Vec<Node>, RoutingError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim().trim_end_matches(';').trim();
        if line.is_empty() || line.starts_with('~') || n == 0 && line.to_lowercase().starts_with("node") {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() < 3 {
            return Err(perr(n + 1, "expected `node x y`"));
        }
        let id = f[0].parse().map_err(|_| perr(n + 1, format!("bad node id {:?}", f[0])))?;
        let x = f[1].parse().map_err(|_| perr(n + 1, format!("bad x {:?}", f[1])))?;
        let y = f[2].parse().map_err(|_| perr(n + 1, format!("bad y {:?}", f[2])))?;
        out.push(Node { id, x, y });
    }
    Ok(out)
}

pub fn write_net(net: &Network) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "<NUMBER OF ZONES> {}", net.num_zones);
    let _ = writeln!(s, "<NUMBER OF NODES> {}", net.num_nodes);
    let _ = writeln!(s, "<FIRST THRU NODE> {}", net.first_thru_node);
    let _ = writeln!(s, "<NUMBER OF LINKS> {}", net.edges.len());
    let _ = writeln!(s, "<END OF METADATA>\n");
    let _ = writeln!(
        s,
        "~\tinit_node\tterm_node\tcapacity\tlength\tfree_flow_time\tb\tpower\tspeed\ttoll\tlink_type\t;"
    );
    for e in &net.edges {
        let _ = writeln!(
            s,
            "\t{}\t{}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{}\t;",
            e.from, e.to, e.capacity, e.length, e.free_flow_time, e.b, e.power, e.speed, e.toll, e.link_type
        );
    }
    s
}

pub fn write_trips(trips: &[OdDemand], num_zones: usize) -> String {
    let mut s = String::new();
    let total: f64 = trips.iter().map(|t| t.demand).sum();
    let _ = writeln!(s, "<NUMBER OF ZONES> {num_zones}");
    let _ = writeln!(s, "<TOTAL OD FLOW> {total:?}");
    let _ = writeln!(s, "<END OF METADATA>\n");
    let mut current = None;
    for t in trips {
        if current != Some(t.origin) {
            let _ = writeln!(s, "\nOrigin\t{}", t.origin);
            current = Some(t.origin);
        }
        let _ = writeln!(s, "{} : {:?};", t.destination, t.demand);
    }
    s
}

fn read(path: &Path) -> Result<String, RoutingError> {
    std::fs::read_to_string(path).map_err(|e| RoutingError::Io(format!("{}: {e}", path.display())))
}

/// Reads a network, its trip table and optionally node coordinates.
pub fn load_tntp(
    net_path: &Path,
    trips_path: &Path,
    node_path: Option<&Path>,
) -> Result<(Network, Vec<OdDemand>), RoutingError> {
    let with_file = |path: &Path, e: RoutingError| match e {
        RoutingError::Parse { line, msg } => RoutingError::Parse {
            line,
            msg: format!("{}: {msg}", path.display()),
        },
        other => other,
    };
    let mut net = parse_net(&read(net_path)?).map_err(|e| with_file(net_path, e))?;
    let trips = parse_trips(&read(trips_path)?).map_err(|e| with_file(trips_path, e))?;
    if let Some(p) = node_path {
        net.nodes = parse_nodes(&read(p)?).map_err(|e| with_file(p, e))?;
    }
    for t in &trips {
        if t.origin > net.num_nodes || t.destination > net.num_nodes {
            return Err(RoutingError::Input(format!(
                "OD pair {}→{} references a node outside the network",
                t.origin, t.destination
            )));
        }
    }
    Ok((net, trips))
}

#[cfg(test)]
mod tests {
    use super::*;

    const NET: &str = "<NUMBER OF ZONES> 2\n<NUMBER OF NODES> 3\n<FIRST THRU NODE> 1\n<NUMBER OF LINKS> 2\n<END OF METADATA>\n\n~ init term cap len fft b power speed toll type ;\n\t1\t2\t100.5\t3\t2\t0.15\t4\t0\t0\t1\t;\n~ a comment\n\t2\t3\t50\t1\t1\t0.15\t4\t0\t0\t1\t;\n";

    #[test]
    fn parses_metadata_and_links() {
        let net = parse_net(NET).unwrap();
        assert_eq!(net.num_nodes, 3);
        assert_eq!(net.num_edges(), 2);
        assert_eq!(net.edges[0].capacity, 100.5);
        assert_eq!(net.edges[1].free_flow_time, 1.0);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = NET.replace("\t2\t3\t50", "\t2\tx\t50");
        match parse_net(&bad) {
            Err(RoutingError::Parse { line, .. }) => assert_eq!(line, 10),
            other => panic!("{other:?}"),
        }
        let short = NET.replace("<NUMBER OF LINKS> 2", "<NUMBER OF LINKS> 3");
        assert!(matches!(parse_net(&short), Err(RoutingError::Parse { .. })));
        assert!(matches!(parse_net("1 2 3"), Err(RoutingError::Parse { line: 1, .. })));
    }

    #[test]
    fn net_round_trip() {
        let net = parse_net(NET).unwrap();
        assert_eq!(parse_net(&write_net(&net)).unwrap(), net);
    }

    #[test]
    fn trips_drop_zero_and_diagonal() {
        let text = "<NUMBER OF ZONES> 2\n<END OF METADATA>\n\nOrigin 1\n 1 : 5.0; 2 : 3.0;\nOrigin 2\n 1 : 0.0; 2 : 1.0;\n";
        let trips = parse_trips(text).unwrap();
        assert_eq!(
            trips,
            vec![OdDemand {
                origin: 1,
                destination: 2,
                demand: 3.0
            }]
        );
        assert_eq!(parse_trips(&write_trips(&trips, 2)).unwrap(), trips);
        let bad = "<END OF METADATA>\n 1 : 5.0;\n";
        assert!(matches!(parse_trips(bad), Err(RoutingError::Parse { line: 2, .. })));
    }

    #[test]
    fn node_coordinates() {
        let nodes = parse_nodes("Node\tX\tY\t;\n1\t-96.7\t43.6\t;\n2\t0\t1\t;\n").unwrap();
        assert_eq!(nodes.len(), 2);
        assert_eq!(nodes[0].x, -96.7);
    }
}
