//! Numerical certificates for solved relaxations and the end-to-end
//! approximation report.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{QmcError, Result};
use crate::exact::{qmc_value, state_energy, MAX_EXACT_QUBITS};
use crate::graph::WeightedGraph;
use crate::moment::{build_lasserre, Level, MomentProblem};
use crate::product::{
    expected_product_energy, local_vectors, sample_best, sample_product_state, LocalVectorSystem,
};
use crate::rounding::{
    assemble_matching_state, assert_degree_bound, edge_values, max_weight_matching, repair_degree_bound,
    threshold, EdgeValues, LargeEdge, LargeEdgeGraph, MatchingResult,
};
use crate::sdp::{solve_with, SdpSolution, SolverOptions};

pub const DEFAULT_CERT_TOL: f64 = 1e-5;

/// Matching guarantee on large edges and its small-edge counterpart.
pub const MATCHING_LARGE: f64 = 0.75;
pub const MATCHING_SMALL: f64 = 0.375;
/// Product-rounding guarantees on large and small edges.
pub const PRODUCT_LARGE: f64 = 0.498766;
pub const PRODUCT_SMALL: f64 = 0.557931;

const MAX_LISTED_VIOLATIONS: usize = 16;
const MAX_CYCLE_VERTICES: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    None,
    Pair { i: usize, j: usize },
    Cycle { vertices: Vec<usize> },
    Star { center: usize, leaves: Vec<usize> },
    Vertex { v: usize },
    Edges { edges: Vec<(usize, usize)> },
}

/// Outcome of one family of inequalities. `margin` is the smallest signed
/// slack over all instances checked, and `witness` the structure attaining it.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub property: String,
    pub checked: usize,
    pub passed: bool,
    pub margin: Option<f64>,
    pub witness: Witness,
    pub violations: Vec<Witness>,
}

impl Check {
    fn new(name: &str, property: &str) -> Self {
        Self {
            name: name.into(),
            property: property.into(),
            checked: 0,
            passed: true,
            margin: None,
            witness: Witness::None,
            violations: Vec::new(),
        }
    }

    fn record(&mut self, margin: f64, tol: f64, witness: impl FnOnce() -> Witness) {
        self.checked += 1;
        let worse = self.margin.is_none_or(|m| margin < m);
        let failed = !(margin >= -tol);
        if !worse && !failed {
            return;
        }
        let w = witness();
        if failed {
            self.passed = false;
            if self.violations.len() < MAX_LISTED_VIOLATIONS {
                self.violations.push(w.clone());
            }
        }
        if worse {
            self.margin = Some(margin);
            self.witness = w;
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub tol: f64,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl CertificateReport {
    pub fn new(tol: f64, checks: Vec<Check>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Self { tol, checks, passed }
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// `-1 ≤ v_ij ≤ 1/3` on every pair.
pub fn check_edge_bounds(vals: &EdgeValues, tol: f64) -> Check {
    let mut c = Check::new("edge_bounds", "-1 <= v_ij <= 1/3");
    for (i, j, v) in vals.pairs() {
        c.record((v + 1.0).min(1.0 / 3.0 - v), tol, || Witness::Pair { i, j });
    }
    c
}

/// `Σ_{e∈C} v_e ≥ 2 − |C|` over every cycle of length `len` in the complete
/// graph.
pub fn check_odd_cycles(vals: &EdgeValues, len: usize, tol: f64) -> Result<Check> {
    if !matches!(len, 3 | 5 | 7) {
        return Err(QmcError::Argument(format!("cycle length must be 3, 5 or 7, got {len}")));
    }
    let n = vals.num_vertices();
    if len == 7 && n > MAX_CYCLE_VERTICES {
        return Err(QmcError::SizeCap(format!(
            "7-cycle enumeration limited to {MAX_CYCLE_VERTICES} vertices, got {n}"
        )));
    }
    let mut c = Check::new(
        &format!("odd_cycles_{len}"),
        &format!("sum of v over a {len}-cycle >= {}", 2 - len as i64),
    );
    let bound = 2.0 - len as f64;
    let mut path = Vec::with_capacity(len);
    let mut used = vec![false; n];
    // The smallest vertex starts the cycle and the second vertex is smaller
    // than the last, so each cycle is visited once.
    fn extend(
        vals: &EdgeValues,
        len: usize,
        bound: f64,
        tol: f64,
        path: &mut Vec<usize>,
        used: &mut [bool],
        sum: f64,
        c: &mut Check,
    ) {
        let last = *path.last().expect("non-empty path");
        if path.len() == len {
            if path[1] < path[len - 1] {
                let total = sum + vals.v(last, path[0]);
                c.record(total - bound, tol, || Witness::Cycle { vertices: path.clone() });
            }
            return;
        }
        for next in path[0] + 1..used.len() {
            if !used[next] {
                used[next] = true;
                path.push(next);
                extend(vals, len, bound, tol, path, used, sum + vals.v(last, next), c);
                path.pop();
                used[next] = false;
            }
        }
    }
    for s in 0..n {
        path.push(s);
        used[s] = true;
        extend(vals, len, bound, tol, &mut path, &mut used, 0.0, &mut c);
        used[s] = false;
        path.pop();
    }
    Ok(c)
}

/// `Σ_{e∈star} (1 + 3x_e) ≤ 2(m + 1)` for every star with `m` leaves in the
/// complete graph. For a fixed centre the tightest `m`-leaf star takes the
/// `m` largest `x`, so sorted prefixes cover all sub-stars.
pub fn check_star_bounds(vals: &EdgeValues, tol: f64) -> Check {
    let n = vals.num_vertices();
    let mut c = Check::new("star_bounds", "sum over an m-leaf star of (1 + 3x) <= 2(m + 1)");
    for center in 0..n {
        let mut leaves: Vec<(usize, f64)> =
            (0..n).filter(|&j| j != center).map(|j| (j, 1.0 + 3.0 * vals.x(center, j))).collect();
        leaves.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut sum = 0.0;
        for m in 1..=leaves.len() {
            sum += leaves[m - 1].1;
            c.record(2.0 * (m as f64 + 1.0) - sum, tol, || Witness::Star {
                center,
                leaves: leaves[..m].iter().map(|l| l.0).collect(),
            });
        }
    }
    c
}

/// Connected components of a graph of maximum degree two, as vertex lists
/// with a flag for cycles.
fn components(gl: &LargeEdgeGraph) -> Vec<(Vec<usize>, bool)> {
    let mut adj = vec![Vec::new(); gl.n];
    for e in &gl.edges {
        adj[e.i].push(e.j);
        adj[e.j].push(e.i);
    }
    let mut seen = vec![false; gl.n];
    let mut out = Vec::new();
    for s in 0..gl.n {
        if seen[s] || adj[s].is_empty() {
            continue;
        }
        let mut comp = Vec::new();
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(v) = stack.pop() {
            comp.push(v);
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        let edges = gl.edges.iter().filter(|e| comp.contains(&e.i)).count();
        comp.sort_unstable();
        let cyclic = edges == comp.len();
        out.push((comp, cyclic));
    }
    out
}

/// Checks that `(9/14)·x` restricted to the large-edge graph lies in the
/// matching polytope: degree sums at most 1 and odd-cycle sums at most
/// `(|S| − 1)/2`.
pub fn check_matching_scaling(gl: &LargeEdgeGraph, tol: f64) -> Result<(Check, Check)> {
    if gl.max_degree() > 2 {
        return Err(QmcError::UnsupportedStructure(format!(
            "large-edge graph has maximum degree {}",
            gl.max_degree()
        )));
    }
    let scale = 9.0 / 14.0;
    let mut deg = Check::new("matching_degree", "sum over delta(i) of (9/14) x <= 1");
    for v in 0..gl.n {
        let star: Vec<&LargeEdge> = gl.edges.iter().filter(|e| e.i == v || e.j == v).collect();
        if star.is_empty() {
            continue;
        }
        let s: f64 = star.iter().map(|e| scale * e.x).sum();
        deg.record(1.0 - s, tol, || Witness::Star {
            center: v,
            leaves: star.iter().map(|e| if e.i == v { e.j } else { e.i }).collect(),
        });
    }
    let mut odd = Check::new("matching_odd_sets", "sum over E(S) of (9/14) x <= (|S| - 1)/2 on odd cycles");
    for (comp, cyclic) in components(gl) {
        if !cyclic || comp.len() % 2 == 0 {
            continue;
        }
        let s: f64 = gl.edges.iter().filter(|e| comp.contains(&e.i)).map(|e| scale * e.x).sum();
        odd.record((comp.len() as f64 - 1.0) / 2.0 - s, tol, || Witness::Cycle { vertices: comp.clone() });
    }
    Ok((deg, odd))
}

/// No triangle has all three `x` above the threshold.
pub fn check_large_triangle_free(gl: &LargeEdgeGraph, vals: &EdgeValues, tol: f64) -> Check {
    let mut c = Check::new("large_edges_triangle_free", "no triangle has all x above alpha");
    let n = vals.num_vertices();
    for a in 0..n {
        for b in a + 1..n {
            for d in b + 1..n {
                let m = [vals.x(a, b), vals.x(b, d), vals.x(a, d)]
                    .into_iter()
                    .map(|x| gl.alpha - x)
                    .fold(f64::NEG_INFINITY, f64::max);
                // Triangles are only forbidden at the d = 2 threshold.
                if gl.d == 2 {
                    c.record(m, tol, || Witness::Cycle { vertices: vec![a, b, d] });
                }
            }
        }
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LpCombination {
    pub s: f64,
    pub value: f64,
}

/// `min_{s∈[0,1]} max(a1·s + b1·(1−s), a2·s + b2·(1−s))`.
pub fn lp_combine(a1: f64, b1: f64, a2: f64, b2: f64) -> LpCombination {
    let f1 = |s: f64| a1 * s + b1 * (1.0 - s);
    let f2 = |s: f64| a2 * s + b2 * (1.0 - s);
    let h = |s: f64| f1(s).max(f2(s));
    let mut best = LpCombination { s: 0.0, value: h(0.0) };
    let mut consider = |s: f64| {
        let v = h(s);
        if v < best.value {
            best = LpCombination { s, value: v };
        }
    };
    consider(1.0);
    // Slopes of the two lines in s.
    let (m1, m2) = (a1 - b1, a2 - b2);
    if m1 != m2 {
        let s = (b2 - b1) / (m1 - m2);
        if (0.0..=1.0).contains(&s) {
            consider(s);
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub d: usize,
    pub seed: u64,
    pub samples: usize,
    pub solver: SolverOptions,
    pub cert_tol: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self { d: 2, seed: 0, samples: 1024, solver: SolverOptions::default(), cert_tol: DEFAULT_CERT_TOL }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InstanceInfo {
    pub n: usize,
    pub edges: usize,
    pub total_weight: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SdpSection {
    pub level: String,
    pub objective: f64,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub psd_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundingSection {
    pub d: usize,
    pub alpha: f64,
    #[serde(rename = "L")]
    pub large: Vec<LargeEdge>,
    pub repaired: Vec<LargeEdge>,
    pub matching: MatchingResult,
    pub energies: MatchingEnergies,
}

#[derive(Debug, Clone, Serialize)]
pub struct MatchingEnergies {
    pub matching_state: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProductSection {
    pub expected: f64,
    pub best_sample: f64,
    pub mean_sample: f64,
    pub std_error: f64,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactSection {
    pub lambda_max: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Ratios {
    pub best_energy: f64,
    pub best_vs_sdp: f64,
    pub best_vs_exact: Option<f64>,
    pub matching_vs_sdp: f64,
    pub product_expected_vs_sdp: f64,
    pub sdp_vs_exact: Option<f64>,
    pub guarantee: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproximationReport {
    pub instance: InstanceInfo,
    pub sdp: SdpSection,
    pub rounding: RoundingSection,
    pub product: ProductSection,
    pub exact: ExactSection,
    pub checks: Vec<Check>,
    pub ratios: Ratios,
    pub passed: bool,
}

impl ApproximationReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "n = {}, |E| = {}, W = {:.6}",
            self.instance.n, self.instance.edges, self.instance.total_weight
        );
        let _ = writeln!(
            s,
            "level-{} objective {:.6} ({} iterations)",
            self.sdp.level, self.sdp.objective, self.sdp.iterations
        );
        if let Some(l) = self.exact.lambda_max {
            let _ = writeln!(s, "lambda_max {l:.6}");
        }
        let _ = writeln!(
            s,
            "matching energy {:.6}, product best {:.6} (expected {:.6})",
            self.rounding.energies.matching_state, self.product.best_sample, self.product.expected
        );
        let _ = writeln!(s, "best / sdp = {:.6}", self.ratios.best_vs_sdp);
        if let Some(r) = self.ratios.best_vs_exact {
            let _ = writeln!(s, "best / exact = {r:.6}");
        }
        for c in &self.checks {
            let _ = writeln!(
                s,
                "[{}] {} ({} checked, margin {})",
                if c.passed { "pass" } else { "FAIL" },
                c.name,
                c.checked,
                c.margin.map_or("-".to_string(), |m| format!("{m:.3e}"))
            );
        }
        let _ = writeln!(s, "verdict: {}", if self.passed { "pass" } else { "FAIL" });
        s
    }
}

/// Per-sample energies restricted to large and small edges.
fn partition_statistics(
    v: &LocalVectorSystem,
    g: &WeightedGraph,
    large: &[bool],
    seed: u64,
    samples: usize,
) -> Result<[(f64, f64); 2]> {
    let mut acc = [(0.0, 0.0); 2];
    for k in 0..samples {
        let s = sample_product_state(v, seed, k as u64)?;
        let crate::exact::RoundedState::Product { bloch } = &s else {
            unreachable!("product rounding returns product states")
        };
        let mut e = [0.0; 2];
        for (edge, &is_large) in g.edges().iter().zip(large) {
            let (a, b) = (bloch[edge.i], bloch[edge.j]);
            e[usize::from(!is_large)] += edge.w * (1.0 - (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]));
        }
        for p in 0..2 {
            acc[p].0 += e[p];
            acc[p].1 += e[p] * e[p];
        }
    }
    let n = samples as f64;
    Ok(acc.map(|(sum, sq)| {
        let mean = sum / n;
        let var = if samples > 1 { ((sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
        (mean, (var / n).sqrt())
    }))
}

fn ratio_check(name: &str, property: &str, num: f64, den: f64, bound: f64, sigma: f64, tol: f64) -> Check {
    let mut c = Check::new(name, property);
    if den > tol {
        c.record(num / den - bound + 3.0 * sigma / den, tol, || Witness::None);
    }
    c
}

/// Runs the level-2 relaxation, both roundings, the exact oracle (when small
/// enough) and every certificate on one weighted graph.
pub fn approximation_report(g: &WeightedGraph, opts: &PipelineOptions) -> Result<ApproximationReport> {
    let p = build_lasserre(g, Level::Two)?;
    let sol = solve_with(&p, &opts.solver)?;
    report_for_solution(&p, &sol, opts)
}

/// Same as [`approximation_report`] for an already solved level-2 problem.
pub fn report_for_solution(
    p: &MomentProblem,
    sol: &SdpSolution,
    opts: &PipelineOptions,
) -> Result<ApproximationReport> {
    if p.level != Level::Two {
        return Err(QmcError::UnsupportedLevel(format!(
            "the pipeline needs the level-2 relaxation, got {}",
            p.level
        )));
    }
    let g = &p.graph;
    let n = g.num_vertices();
    let tol = opts.cert_tol;
    let vals = edge_values(sol, p)?;

    let mut gl = threshold(&vals, g, opts.d)?;
    let mut degree = Check::new("degree_bound", "large-edge graph has maximum degree <= d");
    if let Err(QmcError::DegreeBound { degree: k, d, edges, .. }) = assert_degree_bound(&gl, tol) {
        degree.record(d as f64 - k as f64, tol, || Witness::Edges { edges });
    } else {
        degree.record(0.0, tol, || Witness::None);
    }
    let repaired = repair_degree_bound(&mut gl);
    let matching = max_weight_matching(n, &gl.weighted_edges())?;
    let matching_state = assemble_matching_state(&matching, n)?;
    let matching_energy = state_energy(&matching_state, g)?;

    let vectors = local_vectors(sol, p)?;
    let sampled = sample_best(&vectors, g, opts.seed, opts.samples)?;
    let expected = expected_product_energy(&vals, g)?;
    let lambda_max = if n <= MAX_EXACT_QUBITS { Some(qmc_value(g)?) } else { None };

    let mut checks = vec![check_edge_bounds(&vals, tol)];
    for len in [3, 5, 7] {
        if len == 7 && n > MAX_CYCLE_VERTICES {
            continue;
        }
        checks.push(check_odd_cycles(&vals, len, tol)?);
    }
    checks.push(check_star_bounds(&vals, tol));
    checks.push(degree);
    if opts.d == 2 {
        let (deg, odd) = check_matching_scaling(&gl, tol)?;
        checks.push(deg);
        checks.push(odd);
        checks.push(check_large_triangle_free(&gl, &vals, tol));
    }

    // Split of the SDP objective and of the rounded energies between large
    // and small edges.
    let large: Vec<bool> = g.edges().iter().map(|e| gl.contains(e.i, e.j)).collect();
    let mut sdp_part = [0.0; 2];
    let mut matched_part = 0.0;
    let mut small_mixed = 0.0;
    for (e, &is_large) in g.edges().iter().zip(&large) {
        let share = e.w * (1.0 + 3.0 * vals.x(e.i, e.j));
        if is_large {
            sdp_part[0] += share;
            let y = matching.edges.contains(&(e.i, e.j));
            matched_part += e.w * if y { 4.0 } else { 1.0 };
        } else {
            sdp_part[1] += share;
            small_mixed += e.w;
        }
    }
    checks.push(ratio_check(
        "large_edge_ratio",
        "matching energy over L >= 3/4 of the SDP share of L",
        matched_part,
        sdp_part[0],
        MATCHING_LARGE,
        0.0,
        tol,
    ));
    checks.push(ratio_check(
        "small_edge_ratio",
        "matching energy over S >= 3/8 of the SDP share of S",
        small_mixed,
        sdp_part[1],
        MATCHING_SMALL,
        0.0,
        tol,
    ));
    let [(mean_l, se_l), (mean_s, se_s)] =
        partition_statistics(&vectors, g, &large, opts.seed, opts.samples)?;
    checks.push(ratio_check(
        "product_large_ratio",
        "mean product energy over L >= 0.498766 of the SDP share of L, within 3 sigma",
        mean_l,
        sdp_part[0],
        PRODUCT_LARGE,
        se_l,
        tol,
    ));
    checks.push(ratio_check(
        "product_small_ratio",
        "mean product energy over S >= 0.557931 of the SDP share of S, within 3 sigma",
        mean_s,
        sdp_part[1],
        PRODUCT_SMALL,
        se_s,
        tol,
    ));

    let best = matching_energy.max(sampled.best_energy);
    let guarantee = lp_combine(MATCHING_SMALL, MATCHING_LARGE, PRODUCT_SMALL, PRODUCT_LARGE).value;
    let div = |a: f64, b: f64| if b > 0.0 { a / b } else { 1.0 };
    let passed = checks.iter().all(|c| c.passed);
    Ok(ApproximationReport {
        instance: InstanceInfo { n, edges: g.edges().len(), total_weight: g.total_weight() },
        sdp: SdpSection {
            level: Level::Two.to_string(),
            objective: sol.objective,
            dual_objective: sol.dual_objective,
            primal_residual: sol.primal_residual,
            psd_residual: sol.psd_residual,
            iterations: sol.iterations,
        },
        rounding: RoundingSection {
            d: opts.d,
            alpha: gl.alpha,
            large: gl.edges.clone(),
            repaired,
            matching,
            energies: MatchingEnergies { matching_state: matching_energy },
        },
        product: ProductSection {
            expected,
            best_sample: sampled.best_energy,
            mean_sample: sampled.mean_energy,
            std_error: sampled.std_error,
            samples: sampled.samples,
            seed: opts.seed,
        },
        exact: ExactSection { lambda_max },
        ratios: Ratios {
            best_energy: best,
            best_vs_sdp: div(best, sol.objective),
            best_vs_exact: lambda_max.map(|l| div(best, l)),
            matching_vs_sdp: div(matching_energy, sol.objective),
            product_expected_vs_sdp: div(expected, sol.objective),
            sdp_vs_exact: lambda_max.map(|l| div(sol.objective, l)),
            guarantee,
        },
        checks,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn edge_bound_examples() {
        let singlet = EdgeValues::from_fn(2, |_, _| -1.0);
        let c = check_edge_bounds(&singlet, 1e-5);
        assert!(c.passed);
        assert_eq!(c.margin, Some(0.0));
        let over = EdgeValues::from_fn(2, |_, _| 0.5);
        let c = check_edge_bounds(&over, 1e-5);
        assert!(!c.passed);
        assert_eq!(c.violations, vec![Witness::Pair { i: 0, j: 1 }]);
    }

    #[test]
    fn odd_cycle_examples() {
        let tri = EdgeValues::from_fn(3, |_, _| -1.0 / 3.0);
        let c = check_odd_cycles(&tri, 3, 1e-5).unwrap();
        assert!(c.passed);
        assert_eq!(c.checked, 1);
        assert!(c.margin.unwrap().abs() < 1e-12);
        let bad = EdgeValues::from_fn(3, |_, _| -1.0);
        assert!(!check_odd_cycles(&bad, 3, 1e-5).unwrap().passed);
        assert!(check_odd_cycles(&tri, 4, 1e-5).is_err());
        assert!(matches!(
            check_odd_cycles(&EdgeValues::from_fn(13, |_, _| 0.0), 7, 1e-5),
            Err(QmcError::SizeCap(_))
        ));
    }

    #[test]
    fn cycle_counts() {
        // Distinct k-cycles in K_n: C(n, k) (k - 1)! / 2.
        let vals = EdgeValues::from_fn(7, |_, _| 0.0);
        let count = |k| check_odd_cycles(&vals, k, 1e-5).unwrap().checked;
        assert_eq!(count(3), 35);
        assert_eq!(count(5), 21 * 12);
        assert_eq!(count(7), 360);
    }

    #[test]
    fn star_bound_examples() {
        let edge = EdgeValues::from_fn(2, |_, _| -1.0);
        let c = check_star_bounds(&edge, 1e-5);
        assert!(c.passed);
        assert_eq!(c.margin, Some(0.0));
        // Level-1 style values on a 3-leaf star: x = 1 on every edge.
        let star = EdgeValues::from_fn(4, |i, _| if i == 0 { -1.0 } else { 0.0 });
        let c = check_star_bounds(&star, 1e-5);
        assert!(!c.passed);
        assert_eq!(c.witness, Witness::Star { center: 0, leaves: vec![1, 2, 3] });
        assert!((c.margin.unwrap() - (8.0 - 12.0)).abs() < 1e-12);
    }

    fn large(n: usize, edges: &[(usize, usize, f64)]) -> LargeEdgeGraph {
        LargeEdgeGraph {
            n,
            d: 2,
            alpha: 5.0 / 9.0,
            edges: edges.iter().map(|&(i, j, x)| LargeEdge { i, j, x, w: 1.0 }).collect(),
        }
    }

    #[test]
    fn matching_scaling_examples() {
        let two = large(3, &[(0, 1, 7.0 / 9.0), (0, 2, 5.0 / 9.0 + 1e-3)]);
        let (deg, _) = check_matching_scaling(&two, 1e-5).unwrap();
        assert!(deg.passed);
        assert!(deg.margin.unwrap() > 0.0);
        let c5: Vec<_> = (0..5).map(|v| (v.min((v + 1) % 5), v.max((v + 1) % 5), 0.6)).collect();
        let (deg, odd) = check_matching_scaling(&large(5, &c5), 1e-5).unwrap();
        assert!(deg.passed);
        assert_eq!(odd.checked, 1);
        assert!((odd.margin.unwrap() - (2.0 - 27.0 / 14.0)).abs() < 1e-12);
        let (deg, _) = check_matching_scaling(&large(2, &[(0, 1, 1.0)]), 1e-5).unwrap();
        assert!((deg.margin.unwrap() - 5.0 / 14.0).abs() < 1e-12);
        let claw = large(4, &[(0, 1, 0.9), (0, 2, 0.9), (0, 3, 0.9)]);
        assert!(matches!(check_matching_scaling(&claw, 1e-5), Err(QmcError::UnsupportedStructure(_))));
    }

    #[test]
    fn lp_combine_values() {
        let r = lp_combine(0.375, 0.75, PRODUCT_SMALL, PRODUCT_LARGE);
        let s = (0.75 - PRODUCT_LARGE) / (0.75 - PRODUCT_LARGE + PRODUCT_SMALL - 0.375);
        assert!((r.s - s).abs() < 1e-12);
        assert!((r.value - (0.75 - 0.375 * s)).abs() < 1e-12);
        assert!(r.value >= 0.533);
        let same = lp_combine(0.2, 0.6, 0.2, 0.6);
        assert_eq!(same.value, 0.2);
        let flat = lp_combine(0.3, 0.3, 0.7, 0.7);
        assert_eq!(flat.value, 0.7);
    }

    proptest! {
        #[test]
        fn lp_combine_scale_covariant(
            a1 in 0.0f64..1.0, b1 in 0.0f64..1.0, a2 in 0.0f64..1.0, b2 in 0.0f64..1.0,
            c in 0.1f64..10.0,
        ) {
            let r = lp_combine(a1, b1, a2, b2);
            let q = lp_combine(c * a1, c * b1, c * a2, c * b2);
            prop_assert!((q.value - c * r.value).abs() <= 1e-9 * c);
            prop_assert!((q.s - r.s).abs() <= 1e-9 || (q.value - c * r.value).abs() <= 1e-12);
        }

        #[test]
        fn lp_combine_is_minimax(a1 in 0.0f64..1.0, b1 in 0.0f64..1.0, a2 in 0.0f64..1.0, b2 in 0.0f64..1.0) {
            let r = lp_combine(a1, b1, a2, b2);
            for k in 0..=100 {
                let s = k as f64 / 100.0;
                let h = (a1 * s + b1 * (1.0 - s)).max(a2 * s + b2 * (1.0 - s));
                prop_assert!(r.value <= h + 1e-12);
            }
        }
    }

    #[test]
    fn single_edge_pipeline() {
        let g = WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap();
        let opts = PipelineOptions {
            samples: 64,
            solver: SolverOptions { tol: 1e-7, ..SolverOptions::default() },
            ..PipelineOptions::default()
        };
        let r = approximation_report(&g, &opts).unwrap();
        assert_eq!(r.rounding.matching.edges, vec![(0, 1)]);
        assert_eq!(r.rounding.energies.matching_state, 4.0);
        assert!((r.ratios.best_vs_exact.unwrap() - 1.0).abs() < 1e-12);
        assert!(r.passed, "{}", r.summary_text());
    }
}
