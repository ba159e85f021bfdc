//! Directed follower networks.
//!
//! An edge `(source, target, rate)` means `target` follows `source`; `rate` is
//! the number of posts per unit time that `source` delivers to `target`.
//! Node identifiers in files are arbitrary strings and are interned to dense
//! indices `0..N`; the original labels are kept on the network.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub rate: f64,
}

/// Immutable follower graph with initial opinions.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    labels: Vec<String>,
    opinions: Vec<f64>,
    edges: Vec<Edge>,
    // CSR over incoming edges, grouped by target; edge order inside a group
    // follows `edges`, which fixes the drift summation order.
    in_offsets: Vec<usize>,
    in_edges: Vec<usize>,
    out_degree: Vec<usize>,
}

impl Network {
    /// Builds a network over nodes `0..opinions.len()` labelled by index.
    pub fn new(opinions: Vec<f64>, edges: Vec<Edge>) -> Result<Self> {
        let labels = (0..opinions.len()).map(|i| i.to_string()).collect();
        Self::with_labels(labels, opinions, edges)
    }

    pub fn with_labels(labels: Vec<String>, opinions: Vec<f64>, edges: Vec<Edge>) -> Result<Self> {
        let n = opinions.len();
        if labels.len() != n {
            return Err(Error::InvalidNetwork(format!(
                "{} labels for {} nodes",
                labels.len(),
                n
            )));
        }
        for (i, &op) in opinions.iter().enumerate() {
            if !(0.0..=1.0).contains(&op) {
                return Err(Error::OpinionOutOfRange {
                    node: labels[i].clone(),
                    opinion: op,
                });
            }
        }
        let mut seen = HashSet::with_capacity(edges.len());
        for e in &edges {
            if e.source >= n || e.target >= n {
                return Err(Error::InvalidNetwork(format!(
                    "edge ({}, {}) references a node outside 0..{}",
                    e.source, e.target, n
                )));
            }
            if e.source == e.target {
                return Err(Error::SelfLoop(labels[e.source].clone()));
            }
            if !(e.rate >= 0.0) || !e.rate.is_finite() {
                return Err(Error::InvalidNetwork(format!(
                    "edge ({}, {}) has invalid rate {}",
                    labels[e.source], labels[e.target], e.rate
                )));
            }
            if !seen.insert((e.source, e.target)) {
                return Err(Error::DuplicateEdge {
                    source_node: labels[e.source].clone(),
                    target_node: labels[e.target].clone(),
                });
            }
        }

        let mut in_count = vec![0usize; n];
        let mut out_degree = vec![0usize; n];
        for e in &edges {
            in_count[e.target] += 1;
            out_degree[e.source] += 1;
        }
        let mut in_offsets = Vec::with_capacity(n + 1);
        in_offsets.push(0);
        for c in &in_count {
            in_offsets.push(in_offsets.last().unwrap() + c);
        }
        let mut cursor = in_offsets.clone();
        let mut in_edges = vec![0usize; edges.len()];
        for (k, e) in edges.iter().enumerate() {
            in_edges[cursor[e.target]] = k;
            cursor[e.target] += 1;
        }

        Ok(Network {
            labels,
            opinions,
            edges,
            in_offsets,
            in_edges,
            out_degree,
        })
    }

    /// Builds a network from per-node posting rates: every out-edge of a node
    /// carries that node's rate.
    pub fn from_node_rates(
        opinions: Vec<f64>,
        follows: &[(usize, usize)],
        node_rates: &[f64],
    ) -> Result<Self> {
        if node_rates.len() != opinions.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} node rates for {} nodes",
                node_rates.len(),
                opinions.len()
            )));
        }
        let edges = follows
            .iter()
            .map(|&(source, target)| Edge {
                source,
                target,
                rate: node_rates.get(source).copied().unwrap_or(f64::NAN),
            })
            .collect();
        Self::new(opinions, edges)
    }

    pub fn node_count(&self) -> usize {
        self.opinions.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn initial_opinions(&self) -> &[f64] {
        &self.opinions
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, node: usize) -> &str {
        &self.labels[node]
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.out_degree[node]
    }

    /// Incoming edges of `node` (the accounts it follows).
    pub fn in_edges(&self, node: usize) -> impl Iterator<Item = &Edge> + '_ {
        self.in_edges[self.in_offsets[node]..self.in_offsets[node + 1]]
            .iter()
            .map(move |&k| &self.edges[k])
    }

    /// Same graph, different starting opinions.
    pub fn with_opinions(&self, opinions: Vec<f64>) -> Result<Self> {
        Self::with_labels(self.labels.clone(), opinions, self.edges.clone())
    }

    /// The `k` nodes with the most followers, by (out-degree desc, id asc).
    pub fn top_out_degree(&self, k: usize) -> Vec<usize> {
        let mut nodes: Vec<usize> = (0..self.node_count()).collect();
        nodes.sort_by(|&a, &b| self.out_degree[b].cmp(&self.out_degree[a]).then(a.cmp(&b)));
        nodes.truncate(k);
        nodes
    }

    /// Uniformly samples `k` nodes (deterministic under `seed`) and keeps every
    /// edge between them. New ids follow the ascending order of old ids.
    pub fn sample_induced_subgraph(&self, k: usize, seed: u64) -> Result<Subgraph> {
        let n = self.node_count();
        if k == 0 || k > n {
            return Err(Error::InvalidParameter(format!(
                "sample size {k} must be in 1..={n}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut old_ids = rand::seq::index::sample(&mut rng, n, k).into_vec();
        old_ids.sort_unstable();
        self.induced(old_ids)
    }

    /// Subgraph induced by `old_ids` (which must be sorted and unique).
    pub fn induced(&self, old_ids: Vec<usize>) -> Result<Subgraph> {
        let mut new_of = vec![usize::MAX; self.node_count()];
        for (new, &old) in old_ids.iter().enumerate() {
            new_of[old] = new;
        }
        let edges = self
            .edges
            .iter()
            .filter(|e| new_of[e.source] != usize::MAX && new_of[e.target] != usize::MAX)
            .map(|e| Edge {
                source: new_of[e.source],
                target: new_of[e.target],
                rate: e.rate,
            })
            .collect();
        let labels = old_ids.iter().map(|&o| self.labels[o].clone()).collect();
        let opinions = old_ids.iter().map(|&o| self.opinions[o]).collect();
        Ok(Subgraph {
            network: Network::with_labels(labels, opinions, edges)?,
            old_ids,
        })
    }
}

/// A sampled subgraph and the mapping from its node ids back to the parent's.
#[derive(Debug, Clone)]
pub struct Subgraph {
    pub network: Network,
    /// `old_ids[new] = old`.
    pub old_ids: Vec<usize>,
}

/// Path `0 - 1 - ... - (n-1)` with edges in both directions and opinions
/// evenly spaced over [0, 1] (0.5 for a single node).
pub fn path_network(n: usize, rate: f64) -> Result<Network> {
    if n == 0 {
        return Err(Error::InvalidParameter("path network needs n >= 1".into()));
    }
    let opinions = if n == 1 {
        vec![0.5]
    } else {
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    };
    let mut edges = Vec::with_capacity(2 * n.saturating_sub(1));
    for i in 0..n.saturating_sub(1) {
        edges.push(Edge {
            source: i,
            target: i + 1,
            rate,
        });
        edges.push(Edge {
            source: i + 1,
            target: i,
            rate,
        });
    }
    Network::new(opinions, edges)
}

/// Result of reading a network from disk.
#[derive(Debug, Clone)]
pub struct LoadedNetwork {
    pub network: Network,
    pub warnings: Vec<String>,
}

/// Reads `source,target,rate` edges and `node,opinion` rows.
pub fn load_network(edge_file: &Path, opinion_file: &Path) -> Result<Network> {
    Ok(load_network_with_report(edge_file, opinion_file)?.network)
}

pub fn load_network_with_report(edge_file: &Path, opinion_file: &Path) -> Result<LoadedNetwork> {
    let opinion_rows = read_rows(opinion_file, "node")?;
    let edge_rows = read_rows(edge_file, "source")?;

    let mut opinions_by_label = HashMap::new();
    for row in &opinion_rows {
        expect_fields(opinion_file, row, 2)?;
        let op = parse_f64(opinion_file, row, 1)?;
        if !(0.0..=1.0).contains(&op) {
            return Err(Error::OpinionOutOfRange {
                node: row.fields[0].clone(),
                opinion: op,
            });
        }
        if opinions_by_label.insert(row.fields[0].clone(), op).is_some() {
            return Err(Error::Parse {
                path: opinion_file.into(),
                line: row.line,
                message: format!("node {} listed twice", row.fields[0]),
            });
        }
    }
    let mut raw_edges = Vec::with_capacity(edge_rows.len());
    for row in &edge_rows {
        expect_fields(edge_file, row, 3)?;
        raw_edges.push((
            row.fields[0].clone(),
            row.fields[1].clone(),
            parse_f64(edge_file, row, 2)?,
        ));
    }
    build_from_labels(&opinion_rows, &opinions_by_label, raw_edges)
}

/// Like [`load_network`] but with a follow list (`source,target`) and a
/// per-node rate file (`node,rate`); each edge takes its source's rate.
pub fn load_network_per_node_rates(
    follow_file: &Path,
    rate_file: &Path,
    opinion_file: &Path,
) -> Result<LoadedNetwork> {
    let opinion_rows = read_rows(opinion_file, "node")?;
    let mut opinions_by_label = HashMap::new();
    for row in &opinion_rows {
        expect_fields(opinion_file, row, 2)?;
        let op = parse_f64(opinion_file, row, 1)?;
        if !(0.0..=1.0).contains(&op) {
            return Err(Error::OpinionOutOfRange {
                node: row.fields[0].clone(),
                opinion: op,
            });
        }
        opinions_by_label.insert(row.fields[0].clone(), op);
    }
    let mut rates = HashMap::new();
    for row in read_rows(rate_file, "node")? {
        expect_fields(rate_file, &row, 2)?;
        rates.insert(row.fields[0].clone(), parse_f64(rate_file, &row, 1)?);
    }
    let mut raw_edges = Vec::new();
    for row in read_rows(follow_file, "source")? {
        expect_fields(follow_file, &row, 2)?;
        let rate = *rates.get(&row.fields[0]).ok_or_else(|| Error::Parse {
            path: follow_file.into(),
            line: row.line,
            message: format!("no posting rate for node {}", row.fields[0]),
        })?;
        raw_edges.push((row.fields[0].clone(), row.fields[1].clone(), rate));
    }
    build_from_labels(&opinion_rows, &opinions_by_label, raw_edges)
}

fn build_from_labels(
    opinion_rows: &[Row],
    opinions_by_label: &HashMap<String, f64>,
    raw_edges: Vec<(String, String, f64)>,
) -> Result<LoadedNetwork> {
    // Union of ids in first-appearance order; purely numeric ids sort numerically
    // so that files written with dense ids load back onto the same indices.
    let mut order: Vec<String> = Vec::new();
    let mut seen = HashSet::new();
    for label in opinion_rows
        .iter()
        .map(|r| &r.fields[0])
        .chain(raw_edges.iter().flat_map(|(s, t, _)| [s, t]))
    {
        if seen.insert(label.clone()) {
            order.push(label.clone());
        }
    }
    if order.iter().all(|l| l.parse::<u64>().is_ok()) {
        order.sort_by_key(|l| l.parse::<u64>().unwrap());
    }
    let index: HashMap<&str, usize> = order.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();

    let mut opinions = Vec::with_capacity(order.len());
    for label in &order {
        match opinions_by_label.get(label) {
            Some(&op) => opinions.push(op),
            None => {
                return Err(Error::InvalidNetwork(format!(
                    "node {label} appears in the edge file but has no opinion"
                )))
            }
        }
    }
    let edges: Vec<Edge> = raw_edges
        .iter()
        .map(|(s, t, rate)| Edge {
            source: index[s.as_str()],
            target: index[t.as_str()],
            rate: *rate,
        })
        .collect();

    let mut touched = vec![false; order.len()];
    for e in &edges {
        touched[e.source] = true;
        touched[e.target] = true;
    }
    let warnings: Vec<String> = order
        .iter()
        .zip(&touched)
        .filter(|(_, &t)| !t)
        .map(|(l, _)| format!("node {l} has an opinion but no edges"))
        .collect();
    if !edges.is_empty() {
        for w in &warnings {
            log::warn!("{w}");
        }
    }

    Ok(LoadedNetwork {
        network: Network::with_labels(order, opinions, edges)?,
        warnings,
    })
}

/// Writes the network in the format read by [`load_network`].
pub fn save_network(network: &Network, edge_file: &Path, opinion_file: &Path) -> Result<()> {
    let write = |path: &Path, body: &mut dyn FnMut(&mut BufWriter<File>) -> std::io::Result<()>| {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        body(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
    };
    write(edge_file, &mut |w| {
        writeln!(w, "source,target,rate")?;
        for e in network.edges() {
            writeln!(w, "{},{},{}", network.label(e.source), network.label(e.target), e.rate)?;
        }
        Ok(())
    })?;
    write(opinion_file, &mut |w| {
        writeln!(w, "node,opinion")?;
        for (i, op) in network.initial_opinions().iter().enumerate() {
            writeln!(w, "{},{}", network.label(i), op)?;
        }
        Ok(())
    })
}

struct Row {
    line: usize,
    fields: Vec<String>,
}

fn read_rows(path: &Path, header_first: &str) -> Result<Vec<Row>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file);
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::other(e.to_string())),
            _ => Error::Parse {
                path: path.into(),
                line: i + 1,
                message: e.to_string(),
            },
        })?;
        let fields: Vec<String> = record.iter().map(str::to_owned).collect();
        if fields.iter().all(|f| f.is_empty()) {
            continue;
        }
        if rows.is_empty() && i == 0 && fields[0].eq_ignore_ascii_case(header_first) {
            continue;
        }
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        rows.push(Row { line, fields });
    }
    Ok(rows)
}

fn expect_fields(path: &Path, row: &Row, n: usize) -> Result<()> {
    if row.fields.len() != n {
        return Err(Error::Parse {
            path: path.into(),
            line: row.line,
            message: format!("expected {n} fields, found {}", row.fields.len()),
        });
    }
    Ok(())
}

fn parse_f64(path: &Path, row: &Row, col: usize) -> Result<f64> {
    row.fields[col].parse::<f64>().map_err(|e| Error::Parse {
        path: path.into(),
        line: row.line,
        message: format!("{:?}: {e}", row.fields[col]),
    })
}
