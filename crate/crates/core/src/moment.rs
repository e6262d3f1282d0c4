//! Moment-matrix relaxations of Quantum Max Cut.
//!
//! A [`MomentProblem`] describes a block-PSD program over real symmetric
//! blocks. Block 0 is always the moment matrix indexed by a [`PauliBasis`];
//! the level-1.5 relaxation appends one 8×8 block per vertex pair holding the
//! real embedding of a 4×4 two-qubit density matrix.
//!
//! Entry constraints come in three kinds:
//! - fixed entries (unit diagonal, zeros where the Pauli product is not
//!   Hermitian),
//! - signed entry classes: every moment entry `(Γ, Φ)` with `ΓΦ = ±Θ` is
//!   tied to one variable per product string `Θ`, with the sign of the phase,
//! - linked entries: density-block entries that are affine combinations of
//!   class variables.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{QmcError, Result};
use crate::graph::WeightedGraph;
use crate::pauli::{PauliBasis, PauliLetter, PauliString};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Level {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "1.5")]
    OneAndHalf,
    #[serde(rename = "2")]
    Two,
}

impl Level {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(Level::One),
            "1.5" => Ok(Level::OneAndHalf),
            "2" => Ok(Level::Two),
            _ => Err(QmcError::UnsupportedLevel(format!("`{s}` (expected 1, 1.5 or 2)"))),
        }
    }

    /// Maximum Pauli weight of the moment-matrix index set.
    pub fn basis_weight(self) -> usize {
        match self {
            Level::One | Level::OneAndHalf => 1,
            Level::Two => 2,
        }
    }
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Level::One => "1",
            Level::OneAndHalf => "1.5",
            Level::Two => "2",
        })
    }
}

/// Upper-triangle position `(row <= col)` in a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Entry {
    pub block: usize,
    pub row: usize,
    pub col: usize,
}

impl Entry {
    pub fn new(block: usize, a: usize, b: usize) -> Self {
        Self { block, row: a.min(b), col: a.max(b) }
    }

    pub fn is_diagonal(&self) -> bool {
        self.row == self.col
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignedEntry {
    pub entry: Entry,
    pub sign: f64,
}

/// Moment entries constrained equal up to sign. The class value is the value
/// of `members[0]`, whose sign is always `+1`.
#[derive(Debug, Clone, Serialize)]
pub struct EntryClass {
    pub key: PauliString,
    pub members: Vec<SignedEntry>,
}

impl EntryClass {
    pub fn representative(&self) -> Entry {
        self.members[0].entry
    }
}

/// Entry equal to `constant + Σ coeff · class_value`.
#[derive(Debug, Clone, Serialize)]
pub struct LinkedEntry {
    pub entry: Entry,
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

/// Two-qubit density block for the vertex pair `(i, j)`, stored as the real
/// symmetric embedding `[[Re, -Im], [Im, Re]]` of `4ρ_ij`.
#[derive(Debug, Clone, Serialize)]
pub struct DensityBlockSpec {
    pub pair: (usize, usize),
    pub block: usize,
    pub entries: Vec<LinkedEntry>,
}

#[derive(Debug, Clone)]
pub struct MomentProblem {
    pub level: Level,
    pub graph: WeightedGraph,
    pub basis: PauliBasis,
    pub blocks: Vec<usize>,
    pub classes: Vec<EntryClass>,
    pub fixed: Vec<(Entry, f64)>,
    pub density: Vec<DensityBlockSpec>,
    /// Coefficient of each listed upper-triangle entry, already counting both
    /// symmetric positions: `-w/2` at `(r, c)` plus `-w/2` at `(c, r)`.
    pub objective: Vec<(Entry, f64)>,
    pub constant_term: f64,
    class_of: HashMap<PauliString, usize>,
    entry_class: HashMap<Entry, (usize, f64)>,
}

/// Compact, serializable shape of a problem for snapshots and reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemSummary {
    pub level: String,
    pub blocks: Vec<usize>,
    pub classes: usize,
    pub fixed: usize,
    pub linked: usize,
    pub objective_terms: usize,
    pub constant_term: f64,
}

impl MomentProblem {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Class index of the variable attached to product string `s`.
    pub fn class_index(&self, s: &PauliString) -> Option<usize> {
        self.class_of.get(s).copied()
    }

    /// `(class, sign)` for a constrained entry, `None` for fixed entries.
    pub fn entry_class(&self, e: &Entry) -> Option<(usize, f64)> {
        self.entry_class.get(e).copied()
    }

    pub fn summary(&self) -> ProblemSummary {
        ProblemSummary {
            level: self.level.to_string(),
            blocks: self.blocks.clone(),
            classes: self.classes.len(),
            fixed: self.fixed.len(),
            linked: self.density.iter().map(|d| d.entries.len()).sum(),
            objective_terms: self.objective.len(),
            constant_term: self.constant_term,
        }
    }

    /// `constant_term + Σ coefficient · entry` with each coefficient split
    /// evenly across the two symmetric positions.
    pub fn evaluate_objective(&self, blocks: &[DMatrix<f64>]) -> Result<f64> {
        self.check_dims(blocks)?;
        let mut value = self.constant_term;
        for (e, coeff) in &self.objective {
            let m = &blocks[e.block];
            value += 0.5 * coeff * (m[(e.row, e.col)] + m[(e.col, e.row)]);
        }
        Ok(value)
    }

    pub fn check_dims(&self, blocks: &[DMatrix<f64>]) -> Result<()> {
        if blocks.len() != self.blocks.len() {
            return Err(QmcError::Dimension(format!(
                "expected {} blocks, got {}",
                self.blocks.len(),
                blocks.len()
            )));
        }
        for (k, (m, &d)) in blocks.iter().zip(&self.blocks).enumerate() {
            if m.nrows() != d || m.ncols() != d {
                return Err(QmcError::Dimension(format!(
                    "block {k} is {}x{}, expected {d}x{d}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(())
    }

    /// Block matrices realized by a vector of class values.
    pub fn blocks_from_values(&self, values: &[f64]) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self.blocks.iter().map(|&d| DMatrix::zeros(d, d)).collect();
        let mut set = |e: Entry, v: f64| {
            out[e.block][(e.row, e.col)] = v;
            out[e.block][(e.col, e.row)] = v;
        };
        for (e, v) in &self.fixed {
            set(*e, *v);
        }
        for (c, class) in self.classes.iter().enumerate() {
            for m in &class.members {
                set(m.entry, m.sign * values[c]);
            }
        }
        for d in &self.density {
            for le in &d.entries {
                let v = le.constant + le.terms.iter().map(|&(c, a)| a * values[c]).sum::<f64>();
                set(le.entry, v);
            }
        }
        out
    }

    /// Reads class values off the representatives of symmetric blocks.
    pub fn values_from_blocks(&self, blocks: &[DMatrix<f64>]) -> Vec<f64> {
        self.classes
            .iter()
            .map(|c| {
                let e = c.representative();
                blocks[e.block][(e.row, e.col)]
            })
            .collect()
    }

    /// Objective as a linear function of class values: `(constant, gradient)`.
    pub fn objective_in_values(&self) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.classes.len()];
        let mut constant = self.constant_term;
        let fixed: HashMap<Entry, f64> = self.fixed.iter().copied().collect();
        for (e, coeff) in &self.objective {
            if let Some((c, s)) = self.entry_class(e) {
                grad[c] += coeff * s;
            } else if let Some(v) = fixed.get(e) {
                constant += coeff * v;
            }
        }
        (constant, grad)
    }
}

/// Lasserre relaxation of level 1 or 2 for `graph`.
pub fn build_lasserre(graph: &WeightedGraph, level: Level) -> Result<MomentProblem> {
    match level {
        Level::One | Level::Two => build_moment_only(graph, level),
        Level::OneAndHalf => build_lasserre_15(graph),
    }
}

fn build_moment_only(graph: &WeightedGraph, level: Level) -> Result<MomentProblem> {
    let n = graph.num_vertices();
    if n == 0 {
        return Err(QmcError::Graph("graph has no vertices".into()));
    }
    let basis = PauliBasis::new(n, level.basis_weight())?;
    let dim = basis.len();
    let mut classes: Vec<EntryClass> = Vec::new();
    let mut class_of: HashMap<PauliString, usize> = HashMap::new();
    let mut entry_class = HashMap::new();
    let mut fixed = Vec::new();
    for r in 0..dim {
        fixed.push((Entry::new(0, r, r), 1.0));
        for c in r + 1..dim {
            let p = basis.get(r).multiply(basis.get(c))?;
            let entry = Entry::new(0, r, c);
            match p.real_sign() {
                None => fixed.push((entry, 0.0)),
                Some(sign) => {
                    let idx = *class_of.entry(p.string.clone()).or_insert_with(|| {
                        classes.push(EntryClass { key: p.string.clone(), members: Vec::new() });
                        classes.len() - 1
                    });
                    classes[idx].members.push(SignedEntry { entry, sign });
                    entry_class.insert(entry, (idx, sign));
                }
            }
        }
    }
    normalize_class_signs(&mut classes, &mut entry_class);

    let mut objective = Vec::new();
    for e in graph.edges() {
        for l in PauliLetter::XYZ {
            let entry = if level == Level::Two {
                let s = PauliString::pair(n, (e.i, l), (e.j, l));
                Entry::new(0, basis.canonical_index(&s)?, 0)
            } else {
                Entry::new(0, basis.single_index(e.i, l), basis.single_index(e.j, l))
            };
            objective.push((entry, -e.w));
        }
    }

    Ok(MomentProblem {
        level,
        graph: graph.clone(),
        basis,
        blocks: vec![dim],
        classes,
        fixed,
        density: Vec::new(),
        objective,
        constant_term: graph.total_weight(),
        class_of,
        entry_class,
    })
}

/// Flips member signs so every class representative has sign `+1`; the class
/// variable is then literally the value of its representative entry.
fn normalize_class_signs(classes: &mut [EntryClass], entry_class: &mut HashMap<Entry, (usize, f64)>) {
    for (idx, class) in classes.iter_mut().enumerate() {
        let s0 = class.members[0].sign;
        if s0 < 0.0 {
            for m in &mut class.members {
                m.sign = -m.sign;
                entry_class.insert(m.entry, (idx, m.sign));
            }
        }
    }
}

type C = (f64, f64);

fn pauli_2x2(l: PauliLetter) -> [[C; 2]; 2] {
    match l {
        PauliLetter::I => [[(1.0, 0.0), (0.0, 0.0)], [(0.0, 0.0), (1.0, 0.0)]],
        PauliLetter::X => [[(0.0, 0.0), (1.0, 0.0)], [(1.0, 0.0), (0.0, 0.0)]],
        PauliLetter::Y => [[(0.0, 0.0), (0.0, -1.0)], [(0.0, 1.0), (0.0, 0.0)]],
        PauliLetter::Z => [[(1.0, 0.0), (0.0, 0.0)], [(0.0, 0.0), (-1.0, 0.0)]],
    }
}

/// `a ⊗ b` with `a` on the high-order index bit.
fn kron_2x2(a: PauliLetter, b: PauliLetter) -> [[C; 4]; 4] {
    let (pa, pb) = (pauli_2x2(a), pauli_2x2(b));
    let mut out = [[(0.0, 0.0); 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            let (x, y) = pa[r / 2][c / 2];
            let (u, v) = pb[r % 2][c % 2];
            out[r][c] = (x * u - y * v, x * v + y * u);
        }
    }
    out
}

/// Level-1 moment matrix plus a two-qubit density block for every vertex
/// pair, with all fifteen non-trivial Pauli expectations of each block tied to
/// moment entries and unit trace built in.
pub fn build_lasserre_15(graph: &WeightedGraph) -> Result<MomentProblem> {
    let mut p = build_moment_only(graph, Level::One)?;
    p.level = Level::OneAndHalf;
    let n = graph.num_vertices();
    let all = [PauliLetter::I, PauliLetter::X, PauliLetter::Y, PauliLetter::Z];
    for i in 0..n {
        for j in i + 1..n {
            let block = p.blocks.len();
            p.blocks.push(8);
            // Coefficient source for each (P, Q): None means the constant 1.
            let mut sources: Vec<(PauliLetter, PauliLetter, Option<usize>)> = Vec::new();
            for &a in &all {
                for &b in &all {
                    let src = match (a, b) {
                        (PauliLetter::I, PauliLetter::I) => None,
                        (a, PauliLetter::I) => Some(PauliString::single(n, i, a)),
                        (PauliLetter::I, b) => Some(PauliString::single(n, j, b)),
                        (a, b) => Some(PauliString::pair(n, (i, a), (j, b))),
                    };
                    let class = match src {
                        None => None,
                        Some(s) => Some(
                            p.class_index(&s)
                                .ok_or_else(|| QmcError::NotInBasis(format!("no moment variable for {s}")))?,
                        ),
                    };
                    sources.push((a, b, class));
                }
            }
            let mats: Vec<[[C; 4]; 4]> = sources.iter().map(|&(a, b, _)| kron_2x2(a, b)).collect();
            let mut entries = Vec::new();
            for r in 0..8 {
                for c in r..8 {
                    // Real embedding: top-left/bottom-right Re, top-right -Im, bottom-left Im.
                    let pick = |m: &[[C; 4]; 4]| -> f64 {
                        match (r < 4, c < 4) {
                            (true, true) => m[r][c].0,
                            (false, false) => m[r - 4][c - 4].0,
                            (true, false) => -m[r][c - 4].1,
                            (false, true) => m[r - 4][c].1,
                        }
                    };
                    let mut constant = 0.0;
                    let mut terms: Vec<(usize, f64)> = Vec::new();
                    for (k, &(_, _, class)) in sources.iter().enumerate() {
                        let coeff = pick(&mats[k]);
                        if coeff == 0.0 {
                            continue;
                        }
                        match class {
                            None => constant += coeff,
                            Some(cl) => terms.push((cl, coeff)),
                        }
                    }
                    if constant != 0.0 || !terms.is_empty() {
                        entries.push(LinkedEntry { entry: Entry::new(block, r, c), constant, terms });
                    }
                }
            }
            p.density.push(DensityBlockSpec { pair: (i, j), block, entries });
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::PauliLetter::*;

    fn identity_blocks(p: &MomentProblem) -> Vec<DMatrix<f64>> {
        p.blocks_from_values(&vec![0.0; p.num_classes()])
    }

    #[test]
    fn single_edge_level2_objective_layout() {
        let g = WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap();
        let p = build_lasserre(&g, Level::Two).unwrap();
        assert_eq!(p.blocks, vec![16]);
        assert_eq!(p.constant_term, 1.0);
        assert_eq!(p.objective.len(), 3);
        for (l, (e, coeff)) in [X, Y, Z].iter().zip(&p.objective) {
            let s = PauliString::pair(2, (0, *l), (1, *l));
            assert_eq!(*e, Entry::new(0, 0, p.basis.canonical_index(&s).unwrap()));
            assert_eq!(*coeff, -1.0);
        }
    }

    #[test]
    fn star_level1_block_size() {
        let p = build_lasserre(&WeightedGraph::star(3), Level::One).unwrap();
        assert_eq!(p.blocks, vec![13]);
    }

    #[test]
    fn anticommuting_single_site_entries_fixed_zero() {
        let g = WeightedGraph::path(3);
        for level in [Level::One, Level::Two] {
            let p = build_lasserre(&g, level).unwrap();
            let e = Entry::new(0, p.basis.single_index(1, X), p.basis.single_index(1, Y));
            assert!(p.fixed.contains(&(e, 0.0)));
            assert!(p.entry_class(&e).is_none());
        }
    }

    #[test]
    fn identity_evaluates_to_total_weight() {
        let g = WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap();
        for level in [Level::One, Level::OneAndHalf, Level::Two] {
            let p = build_lasserre(&g, level).unwrap();
            let m = identity_blocks(&p);
            assert_eq!(p.evaluate_objective(&m).unwrap(), 1.0);
            for b in &m {
                assert_eq!(*b, DMatrix::identity(b.nrows(), b.nrows()));
            }
        }
    }

    #[test]
    fn singlet_moments_evaluate_to_four() {
        let g = WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap();
        let p = build_lasserre(&g, Level::Two).unwrap();
        let mut v = vec![0.0; p.num_classes()];
        for l in [X, Y, Z] {
            let c = p.class_index(&PauliString::pair(2, (0, l), (1, l))).unwrap();
            v[c] = -1.0;
        }
        let m = p.blocks_from_values(&v);
        assert!((p.evaluate_objective(&m).unwrap() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn objective_dimension_mismatch() {
        let p = build_lasserre(&WeightedGraph::path(2), Level::One).unwrap();
        assert!(matches!(p.evaluate_objective(&[DMatrix::zeros(3, 3)]), Err(QmcError::Dimension(_))));
    }

    #[test]
    fn level15_block_layout() {
        let p = build_lasserre_15(&WeightedGraph::star(2)).unwrap();
        assert_eq!(p.blocks, vec![10, 8, 8, 8]);
        assert_eq!(p.density.len(), 3);
        assert_eq!(p.density[2].pair, (1, 2));
    }

    #[test]
    fn class_representatives_have_positive_sign() {
        let p = build_lasserre(&WeightedGraph::complete(3), Level::Two).unwrap();
        for c in &p.classes {
            assert_eq!(c.members[0].sign, 1.0);
        }
        // X1X2 * Y1Y2 = -Z1Z2, so (X1X2, Y1Y2) sits in the Z1Z2 class with sign -1.
        let b = &p.basis;
        let xx = b.canonical_index(&PauliString::pair(3, (0, X), (1, X))).unwrap();
        let yy = b.canonical_index(&PauliString::pair(3, (0, Y), (1, Y))).unwrap();
        let zz = p.class_index(&PauliString::pair(3, (0, Z), (1, Z))).unwrap();
        assert_eq!(p.entry_class(&Entry::new(0, xx, yy)), Some((zz, -1.0)));
    }

    #[test]
    fn summary_counts() {
        let s = build_lasserre(&WeightedGraph::path(2), Level::One).unwrap().summary();
        assert_eq!(s.blocks, vec![7]);
        assert_eq!(s.fixed, 7 + 6);
        assert_eq!(s.classes, 6 + 9);
        assert_eq!(s.objective_terms, 3);
    }
}
