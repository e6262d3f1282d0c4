//! Thresholding the level-2 edge values and rounding to a matching state.

use log::warn;
use serde::Serialize;

use crate::error::{QmcError, Result};
use crate::exact::RoundedState;
use crate::graph::WeightedGraph;
use crate::moment::{Entry, Level, MomentProblem};
use crate::pauli::{PauliLetter, PauliString};
use crate::sdp::SdpSolution;

/// Slack for the strict comparison `x > α`.
pub const THRESHOLD_SLACK: f64 = 1e-9;

/// Largest brute-force instance.
pub const MAX_BRUTE_FORCE_EDGES: usize = 20;

/// Averaged two-point moments `v_ij` on every vertex pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeValues {
    n: usize,
    v: Vec<f64>,
}

impl EdgeValues {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut v = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                v.push(f(i, j));
            }
        }
        Self { n, v }
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        assert!(a != b && b < self.n, "pair ({i}, {j}) out of range");
        a * (2 * self.n - a - 1) / 2 + (b - a - 1)
    }

    pub fn v(&self, i: usize, j: usize) -> f64 {
        self.v[self.slot(i, j)]
    }

    pub fn x(&self, i: usize, j: usize) -> f64 {
        -self.v(i, j)
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.slot(i, j);
        self.v[k] = v;
    }

    /// All pairs `(i, j, v_ij)` with `i < j`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n;
        (0..n)
            .flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
            .zip(self.v.iter())
            .map(|((i, j), &v)| (i, j, v))
    }
}

/// Reads `v_ij = (M(X_iX_j, I) + M(Y_iY_j, I) + M(Z_iZ_j, I)) / 3`.
///
/// Levels 1 and 1.5 have no `(σ_iσ_j, I)` entries; there the equal moment
/// `M(σ_i, σ_j)` is read instead.
pub fn edge_values(sol: &SdpSolution, p: &MomentProblem) -> Result<EdgeValues> {
    p.check_dims(&sol.blocks)?;
    let n = p.graph.num_vertices();
    let mut err = None;
    let vals = EdgeValues::from_fn(n, |i, j| {
        let mut s = 0.0;
        for l in PauliLetter::XYZ {
            let entry = match p.level {
                Level::Two => {
                    let pair = PauliString::pair(n, (i, l), (j, l));
                    match p.basis.canonical_index(&pair) {
                        Ok(idx) => Entry::new(0, 0, idx),
                        Err(e) => {
                            err.get_or_insert(e);
                            return 0.0;
                        }
                    }
                }
                _ => Entry::new(0, p.basis.single_index(i, l), p.basis.single_index(j, l)),
            };
            s += sol.entry(entry);
        }
        s / 3.0
    });
    match err {
        Some(e) => Err(e),
        None => Ok(vals),
    }
}

/// `α(d) = (d + 3) / (3 (d + 1))`.
pub fn alpha(d: usize) -> f64 {
    (d as f64 + 3.0) / (3.0 * (d as f64 + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LargeEdge {
    pub i: usize,
    pub j: usize,
    pub x: f64,
    pub w: f64,
}

/// Edges of `G` with `x_e > α(d)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LargeEdgeGraph {
    pub n: usize,
    pub d: usize,
    pub alpha: f64,
    pub edges: Vec<LargeEdge>,
}

impl LargeEdgeGraph {
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for e in &self.edges {
            deg[e.i] += 1;
            deg[e.j] += 1;
        }
        deg
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        let (a, b) = (i.min(j), i.max(j));
        self.edges.iter().any(|e| e.i == a && e.j == b)
    }

    pub fn weighted_edges(&self) -> Vec<(usize, usize, f64)> {
        self.edges.iter().map(|e| (e.i, e.j, e.w)).collect()
    }
}

fn snap(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

pub fn threshold(vals: &EdgeValues, g: &WeightedGraph, d: usize) -> Result<LargeEdgeGraph> {
    if d == 0 {
        return Err(QmcError::Argument("d must be at least 1".into()));
    }
    if vals.num_vertices() != g.num_vertices() {
        return Err(QmcError::Dimension(format!(
            "edge values on {} vertices, graph on {}",
            vals.num_vertices(),
            g.num_vertices()
        )));
    }
    let a = alpha(d);
    let edges = g
        .edges()
        .iter()
        .filter_map(|e| {
            let x = snap(vals.x(e.i, e.j));
            (x > a + THRESHOLD_SLACK).then_some(LargeEdge { i: e.i, j: e.j, x, w: e.w })
        })
        .collect();
    Ok(LargeEdgeGraph { n: g.num_vertices(), d, alpha: a, edges })
}

/// Fails if some vertex has more than `d` incident edges with
/// `x > α + slack`. Edges within `slack` of the threshold are treated as
/// solver noise and left to [`repair_degree_bound`].
pub fn assert_degree_bound(gl: &LargeEdgeGraph, slack: f64) -> Result<()> {
    for v in 0..gl.n {
        let star: Vec<&LargeEdge> =
            gl.edges.iter().filter(|e| (e.i == v || e.j == v) && e.x > gl.alpha + slack).collect();
        if star.len() > gl.d {
            return Err(QmcError::DegreeBound {
                vertex: v,
                degree: star.len(),
                d: gl.d,
                edges: star.iter().map(|e| (e.i, e.j)).collect(),
            });
        }
    }
    Ok(())
}

/// Drops the lowest-`x` edge at an over-full vertex until every degree is at
/// most `d`. Returns the dropped edges.
pub fn repair_degree_bound(gl: &mut LargeEdgeGraph) -> Vec<LargeEdge> {
    let mut dropped = Vec::new();
    loop {
        let deg = gl.degrees();
        let Some(v) = (0..gl.n).find(|&v| deg[v] > gl.d) else {
            break;
        };
        let k = gl
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.i == v || e.j == v)
            .min_by(|a, b| a.1.x.total_cmp(&b.1.x))
            .map(|(k, _)| k)
            .expect("over-full vertex has edges");
        let e = gl.edges.remove(k);
        warn!(
            "vertex {v} has degree {} > d = {} in the large-edge graph; dropping ({}, {}) with x = {:.3e}",
            deg[v], gl.d, e.i, e.j, e.x
        );
        dropped.push(e);
    }
    dropped
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchingResult {
    pub edges: Vec<(usize, usize)>,
    pub weight: f64,
    /// 0/1 per input edge, in input order.
    pub indicator: Vec<u8>,
}

impl MatchingResult {
    fn from_indicator(edges: &[(usize, usize, f64)], indicator: Vec<u8>) -> Self {
        let mut chosen = Vec::new();
        let mut weight = 0.0;
        for (k, &(i, j, w)) in edges.iter().enumerate() {
            if indicator[k] == 1 {
                chosen.push((i.min(j), i.max(j)));
                weight += w;
            }
        }
        Self { edges: chosen, weight, indicator }
    }
}

fn check_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Vec<Vec<usize>>> {
    let mut inc = vec![Vec::new(); n];
    for (k, &(i, j, w)) in edges.iter().enumerate() {
        if i == j || i >= n || j >= n {
            return Err(QmcError::Argument(format!("bad edge ({i}, {j}) on {n} vertices")));
        }
        if !w.is_finite() {
            return Err(QmcError::Argument(format!("edge ({i}, {j}) has weight {w}")));
        }
        inc[i].push(k);
        inc[j].push(k);
    }
    Ok(inc)
}

/// Best subset of a chain of edges where consecutive edges conflict.
fn chain_dp(ws: &[f64]) -> Vec<bool> {
    let m = ws.len();
    let mut best = vec![0.0; m + 1];
    for k in 0..m {
        let take = ws[k] + if k >= 1 { best[k - 1] } else { 0.0 };
        best[k + 1] = if take > best[k] { take } else { best[k] };
    }
    let mut pick = vec![false; m];
    let mut k = m;
    while k > 0 {
        if best[k] != best[k - 1] {
            pick[k - 1] = true;
            k = k.saturating_sub(2);
        } else {
            k -= 1;
        }
    }
    pick
}

/// Maximum-weight matching by dynamic programming on a graph whose
/// components are paths and cycles.
pub fn max_weight_matching_deg2(n: usize, edges: &[(usize, usize, f64)]) -> Result<MatchingResult> {
    let inc = check_edges(n, edges)?;
    if let Some(v) = (0..n).find(|&v| inc[v].len() > 2) {
        return Err(QmcError::UnsupportedStructure(format!("vertex {v} has degree {} > 2", inc[v].len())));
    }
    let other = |k: usize, v: usize| {
        let (a, b, _) = edges[k];
        if a == v {
            b
        } else {
            a
        }
    };
    let mut indicator = vec![0u8; edges.len()];
    let mut seen = vec![false; edges.len()];
    // Walks from `start` along unseen edges, returning the edge chain.
    let walk = |start: usize, first: usize, seen: &mut Vec<bool>| {
        let mut chain = vec![first];
        seen[first] = true;
        let mut v = other(first, start);
        while let Some(&k) = inc[v].iter().find(|&&k| !seen[k]) {
            seen[k] = true;
            chain.push(k);
            v = other(k, v);
        }
        chain
    };
    // Paths first, starting from their degree-1 ends.
    for v in 0..n {
        if inc[v].len() == 1 && !seen[inc[v][0]] {
            let chain = walk(v, inc[v][0], &mut seen);
            let ws: Vec<f64> = chain.iter().map(|&k| edges[k].2).collect();
            for (p, &k) in chain_dp(&ws).iter().zip(&chain) {
                indicator[k] = *p as u8;
            }
        }
    }
    // Whatever remains lies on cycles.
    for k0 in 0..edges.len() {
        if seen[k0] {
            continue;
        }
        let chain = walk(edges[k0].0, k0, &mut seen);
        let ws: Vec<f64> = chain.iter().map(|&k| edges[k].2).collect();
        let m = chain.len();
        // Either the first edge is unused, or it is used and both of its
        // neighbours on the cycle are not.
        let without = chain_dp(&ws[1..]);
        let w_without: f64 = without.iter().zip(&ws[1..]).filter(|(p, _)| **p).map(|(_, w)| w).sum();
        let (with, w_with) = if m >= 3 {
            let inner = chain_dp(&ws[2..m - 1]);
            let w: f64 =
                ws[0] + inner.iter().zip(&ws[2..m - 1]).filter(|(p, _)| **p).map(|(_, w)| w).sum::<f64>();
            (inner, w)
        } else {
            (Vec::new(), ws[0])
        };
        if w_with > w_without {
            indicator[chain[0]] = 1;
            for (p, &k) in with.iter().zip(&chain[2..m - 1]) {
                indicator[k] = *p as u8;
            }
        } else {
            for (p, &k) in without.iter().zip(&chain[1..]) {
                indicator[k] = *p as u8;
            }
        }
    }
    Ok(MatchingResult::from_indicator(edges, indicator))
}

/// Exact maximum-weight matching by subset enumeration.
pub fn brute_force_matching(n: usize, edges: &[(usize, usize, f64)]) -> Result<MatchingResult> {
    check_edges(n, edges)?;
    if edges.len() > MAX_BRUTE_FORCE_EDGES {
        return Err(QmcError::SizeCap(format!(
            "brute-force matching limited to {MAX_BRUTE_FORCE_EDGES} edges, got {}",
            edges.len()
        )));
    }
    // Compact vertex ids so the used-set fits in a word.
    let mut id = vec![usize::MAX; n];
    let mut next = 0;
    let compact: Vec<(usize, usize, f64)> = edges
        .iter()
        .map(|&(i, j, w)| {
            for v in [i, j] {
                if id[v] == usize::MAX {
                    id[v] = next;
                    next += 1;
                }
            }
            (id[i], id[j], w)
        })
        .collect();
    let mut best = (0.0, 0u32);
    for mask in 1u32..(1u32 << edges.len()) {
        let mut used = 0u64;
        let mut w = 0.0;
        let mut ok = true;
        for (k, &(i, j, wk)) in compact.iter().enumerate() {
            if mask >> k & 1 == 1 {
                let bits = (1u64 << i) | (1u64 << j);
                if used & bits != 0 {
                    ok = false;
                    break;
                }
                used |= bits;
                w += wk;
            }
        }
        if ok && w > best.0 {
            best = (w, mask);
        }
    }
    let indicator = (0..edges.len()).map(|k| (best.1 >> k & 1) as u8).collect();
    Ok(MatchingResult::from_indicator(edges, indicator))
}

/// Uses the path/cycle DP when the maximum degree allows it and brute force
/// otherwise.
pub fn max_weight_matching(n: usize, edges: &[(usize, usize, f64)]) -> Result<MatchingResult> {
    match max_weight_matching_deg2(n, edges) {
        Err(QmcError::UnsupportedStructure(_)) => brute_force_matching(n, edges),
        r => r,
    }
}

pub fn assemble_matching_state(m: &MatchingResult, n: usize) -> Result<RoundedState> {
    let mut used = vec![false; n];
    for &(i, j) in &m.edges {
        if i >= n || j >= n || used[i] || used[j] {
            return Err(QmcError::Argument(format!("({i}, {j}) breaks the matching")));
        }
        used[i] = true;
        used[j] = true;
    }
    Ok(RoundedState::Matching {
        n,
        edges: m.edges.clone(),
        unmatched: (0..n).filter(|&v| !used[v]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::state_energy;
    use crate::moment::build_lasserre;
    use proptest::prelude::*;

    fn solution_from_blocks(p: &MomentProblem, blocks: Vec<nalgebra::DMatrix<f64>>) -> SdpSolution {
        let values = p.values_from_blocks(&blocks);
        SdpSolution {
            objective: p.evaluate_objective(&blocks).unwrap(),
            dual_objective: 0.0,
            primal_residual: 0.0,
            psd_residual: 0.0,
            iterations: 0,
            trace: Vec::new(),
            values,
            blocks,
        }
    }

    #[test]
    fn identity_gives_zero_values() {
        let g = WeightedGraph::path(3);
        let p = build_lasserre(&g, Level::Two).unwrap();
        let blocks = p.blocks.iter().map(|&d| nalgebra::DMatrix::identity(d, d)).collect();
        let vals = edge_values(&solution_from_blocks(&p, blocks), &p).unwrap();
        assert!(vals.pairs().all(|(_, _, v)| v == 0.0));
    }

    #[test]
    fn singlet_moments_give_minus_one() {
        let g = WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap();
        let p = build_lasserre(&g, Level::Two).unwrap();
        let mut values = vec![0.0; p.num_classes()];
        for l in PauliLetter::XYZ {
            let k = p.class_index(&PauliString::pair(2, (0, l), (1, l))).unwrap();
            values[k] = -1.0;
        }
        let blocks = p.blocks_from_values(&values);
        let vals = edge_values(&solution_from_blocks(&p, blocks), &p).unwrap();
        assert_eq!(vals.v(0, 1), -1.0);
        assert_eq!(vals.x(1, 0), 1.0);
    }

    #[test]
    fn pair_indexing() {
        let vals = EdgeValues::from_fn(5, |i, j| (10 * i + j) as f64);
        for (i, j, v) in vals.pairs() {
            assert_eq!(v, (10 * i + j) as f64);
            assert_eq!(vals.v(j, i), v);
        }
        assert_eq!(vals.pairs().count(), 10);
    }

    #[test]
    fn alpha_values() {
        assert!((alpha(2) - 5.0 / 9.0).abs() < 1e-15);
        assert!((alpha(1) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn threshold_is_strict() {
        let g = WeightedGraph::path(4);
        let mut vals = EdgeValues::from_fn(4, |_, _| 0.0);
        vals.set(0, 1, -5.0 / 9.0);
        vals.set(1, 2, -0.6);
        vals.set(2, 3, -1.2);
        let gl = threshold(&vals, &g, 2).unwrap();
        let picked: Vec<(usize, usize)> = gl.edges.iter().map(|e| (e.i, e.j)).collect();
        assert_eq!(picked, vec![(1, 2), (2, 3)]);
        assert_eq!(gl.edges[1].x, 1.0);
        assert!(threshold(&vals, &g, 0).is_err());
    }

    #[test]
    fn degree_bound_and_repair() {
        let g = WeightedGraph::star(3);
        let vals = EdgeValues::from_fn(4, |i, _| if i == 0 { -0.8 } else { 0.0 });
        let mut gl = threshold(&vals, &g, 2).unwrap();
        match assert_degree_bound(&gl, 1e-6) {
            Err(QmcError::DegreeBound { vertex, degree, d, edges }) => {
                assert_eq!((vertex, degree, d), (0, 3, 2));
                assert_eq!(edges.len(), 3);
            }
            other => panic!("expected degree error, got {other:?}"),
        }
        let empty = LargeEdgeGraph { n: 3, d: 2, alpha: alpha(2), edges: vec![] };
        assert!(assert_degree_bound(&empty, 0.0).is_ok());

        gl.edges[1].x = 0.56;
        assert!(assert_degree_bound(&gl, 1e-2).is_ok());
        let dropped = repair_degree_bound(&mut gl);
        assert_eq!(dropped.len(), 1);
        assert_eq!((dropped[0].i, dropped[0].j), (0, 2));
        assert_eq!(gl.max_degree(), 2);
    }

    #[test]
    fn path_dp() {
        let edges = [(0, 1, 3.0), (1, 2, 5.0), (2, 3, 4.0)];
        let m = max_weight_matching_deg2(4, &edges).unwrap();
        assert_eq!(m.weight, 7.0);
        assert_eq!(m.edges, vec![(0, 1), (2, 3)]);
        assert_eq!(m.indicator, vec![1, 0, 1]);
        assert_eq!(brute_force_matching(4, &edges).unwrap().weight, 7.0);
    }

    #[test]
    fn single_edge_and_cycles() {
        let m = max_weight_matching_deg2(2, &[(0, 1, 1.5)]).unwrap();
        assert_eq!(m.edges, vec![(0, 1)]);
        let c5: Vec<_> = (0..5).map(|v| (v, (v + 1) % 5, 1.0)).collect();
        let m = max_weight_matching_deg2(5, &c5).unwrap();
        assert_eq!(m.weight, 2.0);
        assert_eq!(m.edges.len(), 2);
        let tri = [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)];
        assert_eq!(brute_force_matching(3, &tri).unwrap().weight, 1.0);
        assert_eq!(max_weight_matching_deg2(3, &tri).unwrap().weight, 1.0);
        assert_eq!(brute_force_matching(3, &[]).unwrap().weight, 0.0);
    }

    #[test]
    fn degree_three_rejected() {
        let star = [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)];
        assert!(matches!(max_weight_matching_deg2(4, &star), Err(QmcError::UnsupportedStructure(_))));
        assert_eq!(max_weight_matching(4, &star).unwrap().weight, 1.0);
        let big: Vec<_> = (0..21).map(|v| (v, v + 1, 1.0)).collect();
        assert!(matches!(brute_force_matching(22, &big), Err(QmcError::SizeCap(_))));
    }

    #[test]
    fn matching_states() {
        let m = MatchingResult { edges: vec![(0, 1)], weight: 1.0, indicator: vec![1] };
        match assemble_matching_state(&m, 2).unwrap() {
            RoundedState::Matching { unmatched, .. } => assert!(unmatched.is_empty()),
            _ => unreachable!(),
        }
        let g = WeightedGraph::new(3, [(0, 1, 0.5), (1, 2, 2.0)]).unwrap();
        let none = MatchingResult { edges: vec![], weight: 0.0, indicator: vec![] };
        assert_eq!(state_energy(&assemble_matching_state(&none, 3).unwrap(), &g).unwrap(), 2.5);
        let s = assemble_matching_state(&m, 3).unwrap();
        assert_eq!(state_energy(&s, &g).unwrap(), 4.0 * 0.5 + 2.0);
        let bad = MatchingResult { edges: vec![(0, 1), (1, 2)], weight: 2.0, indicator: vec![1, 1] };
        assert!(assemble_matching_state(&bad, 3).is_err());
    }

    /// Random graph of paths and cycles on shuffled vertices, integer weights.
    pub(crate) fn arb_deg2_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>)> {
        (prop::collection::vec((1usize..6, any::<bool>()), 1..6), any::<u64>()).prop_map(|(parts, seed)| {
            use rand::{seq::SliceRandom, Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut edges = Vec::new();
            let mut next = 0;
            for (len, closed) in parts {
                if edges.len() + len + 1 > 16 {
                    break;
                }
                let closed = closed && len >= 3;
                let verts = if closed { len } else { len + 1 };
                for k in 0..len {
                    let a = next + k;
                    let b = next + (k + 1) % verts;
                    edges.push((a, b, rng.random_range(0..10) as f64));
                }
                next += verts;
            }
            let mut perm: Vec<usize> = (0..next.max(1)).collect();
            perm.shuffle(&mut rng);
            let mut e: Vec<_> = edges.into_iter().map(|(a, b, w)| (perm[a], perm[b], w)).collect();
            e.shuffle(&mut rng);
            (next.max(1), e)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn dp_matches_brute_force((n, edges) in arb_deg2_graph()) {
            let dp = max_weight_matching_deg2(n, &edges).unwrap();
            let bf = brute_force_matching(n, &edges).unwrap();
            prop_assert_eq!(dp.weight, bf.weight);
            prop_assert!(assemble_matching_state(&dp, n).is_ok());
        }
    }
}
