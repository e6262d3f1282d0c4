//! Weighted simple graphs, the edge-list text format, and the generated
//! instance families.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QmcError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

/// Simple undirected graph with non-negative edge weights. Edges are stored
/// with `i < j` in insertion order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<Edge>,
}

impl WeightedGraph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (a, b, w) in edges {
            if a == b {
                return Err(QmcError::Graph(format!("loop at vertex {a}")));
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if j >= n {
                return Err(QmcError::Graph(format!("edge ({a}, {b}) out of range for {n} vertices")));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(QmcError::Graph(format!("edge ({a}, {b}) has weight {w}")));
            }
            if !seen.insert((i, j)) {
                return Err(QmcError::Graph(format!("duplicate edge ({i}, {j})")));
            }
            out.push(Edge { i, j, w });
        }
        Ok(Self { n, edges: out })
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.w).sum()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.edges.iter().find(|e| e.i == a && e.j == b).map_or(0.0, |e| e.w)
    }

    /// Relabels vertex `v` as `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(QmcError::Argument("permutation length mismatch".into()));
        }
        Self::new(self.n, self.edges.iter().map(|e| (perm[e.i], perm[e.j], e.w)))
    }

    pub fn star(leaves: usize) -> Self {
        Self::new(leaves + 1, (1..=leaves).map(|l| (0, l, 1.0))).expect("star is simple")
    }

    pub fn path(n: usize) -> Self {
        Self::new(n, (1..n).map(|v| (v - 1, v, 1.0))).expect("path is simple")
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(QmcError::Argument(format!("cycle needs n >= 3, got {n}")));
        }
        Self::new(n, (0..n).map(|v| (v, (v + 1) % n, 1.0)))
    }

    pub fn complete(n: usize) -> Self {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j, 1.0));
            }
        }
        Self::new(n, edges).expect("complete graph is simple")
    }

    /// Erdős–Rényi graph: each pair present with probability `p`, weight
    /// uniform in (0, 1] unless `unit_weights`.
    pub fn gnp(n: usize, p: f64, seed: u64, unit_weights: bool) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(QmcError::Argument(format!("edge probability {p} outside [0, 1]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let keep = rng.random::<f64>() < p;
                let w = 1.0 - rng.random::<f64>();
                if keep {
                    edges.push((i, j, if unit_weights { 1.0 } else { w }));
                }
            }
        }
        Self::new(n, edges)
    }

    /// Renders the edge-list format with an explicit `n` header.
    pub fn to_text(&self) -> String {
        let mut s = format!("n {}\n", self.n);
        for e in &self.edges {
            let _ = writeln!(s, "{} {} {}", e.i, e.j, e.w);
        }
        s
    }
}

/// Parses the edge-list format: one `i j w` edge per line (0-indexed,
/// whitespace separated), `#` comments, and an optional `n <count>` header.
/// Without a header the vertex count is one more than the largest index.
pub fn parse_graph(text: &str) -> Result<WeightedGraph> {
    let mut header: Option<usize> = None;
    let mut edges = Vec::new();
    let mut seen = HashSet::new();
    let mut max_index: Option<usize> = None;
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let err = |msg: String| QmcError::Parse { line: line_no, msg };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0] == "n" {
            if fields.len() != 2 || header.is_some() || !edges.is_empty() {
                return Err(err("header must be a single leading `n <count>` line".into()));
            }
            header = Some(fields[1].parse().map_err(|_| err(format!("bad vertex count `{}`", fields[1])))?);
            continue;
        }
        if fields.len() != 3 {
            return Err(err(format!("expected `i j w`, got `{line}`")));
        }
        let i: usize = fields[0].parse().map_err(|_| err(format!("bad vertex `{}`", fields[0])))?;
        let j: usize = fields[1].parse().map_err(|_| err(format!("bad vertex `{}`", fields[1])))?;
        let w: f64 = fields[2].parse().map_err(|_| err(format!("bad weight `{}`", fields[2])))?;
        if i == j {
            return Err(err(format!("loop at vertex {i}")));
        }
        if !w.is_finite() || w < 0.0 {
            return Err(err(format!("negative or non-finite weight {w}")));
        }
        if !seen.insert((i.min(j), i.max(j))) {
            return Err(err(format!("duplicate edge ({i}, {j})")));
        }
        if let Some(n) = header {
            if i.max(j) >= n {
                return Err(err(format!("vertex {} out of range for n = {n}", i.max(j))));
            }
        }
        max_index = Some(max_index.map_or(i.max(j), |m: usize| m.max(i).max(j)));
        edges.push((i, j, w));
    }
    let n = header.unwrap_or_else(|| max_index.map_or(0, |m| m + 1));
    WeightedGraph::new(n, edges)
}

pub fn parse_graph_file(path: &Path) -> Result<WeightedGraph> {
    let text = std::fs::read_to_string(path)?;
    parse_graph(&text)
}

pub fn write_graph(g: &WeightedGraph, path: &Path) -> Result<()> {
    std::fs::write(path, g.to_text())?;
    Ok(())
}

/// Named instance families used by the CLI and the benchmark harness.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Star { leaves: usize },
    Path { n: usize },
    Cycle { n: usize },
    Complete { n: usize },
    Gnp { n: usize, p: f64, unit_weights: bool },
}

impl Family {
    /// Parses `star:5`, `path:4`, `cycle:5`, `complete:4`, `gnp:8:0.5` or
    /// `gnp:8:0.5:unit`.
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').collect();
        let bad = || QmcError::Argument(format!("unrecognized family `{spec}`"));
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad());
        match parts.as_slice() {
            ["star", k] => Ok(Family::Star { leaves: int(k)? }),
            ["path", k] => Ok(Family::Path { n: int(k)? }),
            ["cycle", k] => Ok(Family::Cycle { n: int(k)? }),
            ["complete", k] => Ok(Family::Complete { n: int(k)? }),
            ["gnp", k, p] | ["gnp", k, p, "weighted"] => {
                Ok(Family::Gnp { n: int(k)?, p: p.parse().map_err(|_| bad())?, unit_weights: false })
            }
            ["gnp", k, p, "unit"] => {
                Ok(Family::Gnp { n: int(k)?, p: p.parse().map_err(|_| bad())?, unit_weights: true })
            }
            _ => Err(bad()),
        }
    }

    pub fn generate(&self, seed: u64) -> Result<WeightedGraph> {
        match *self {
            Family::Star { leaves } if leaves >= 1 => Ok(WeightedGraph::star(leaves)),
            Family::Path { n } if n >= 2 => Ok(WeightedGraph::path(n)),
            Family::Cycle { n } => WeightedGraph::cycle(n),
            Family::Complete { n } if n >= 2 => Ok(WeightedGraph::complete(n)),
            Family::Gnp { n, p, unit_weights } if n >= 1 => WeightedGraph::gnp(n, p, seed, unit_weights),
            _ => Err(QmcError::Argument(format!("invalid family parameters {self:?}"))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Family::Star { leaves } => format!("star:{leaves}"),
            Family::Path { n } => format!("path:{n}"),
            Family::Cycle { n } => format!("cycle:{n}"),
            Family::Complete { n } => format!("complete:{n}"),
            Family::Gnp { n, p, unit_weights } => {
                format!("gnp:{n}:{p}{}", if *unit_weights { ":unit" } else { "" })
            }
        }
    }
}
