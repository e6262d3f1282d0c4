//! First-order solver for the block-PSD moment programs.
//!
//! The feasible set is the intersection of an affine subspace (fixed, class
//! and linked entries of a [`MomentProblem`]) with the product of PSD cones.
//! We parametrize the subspace by class values `y`, so every block is
//! `B_k(y) = I + F_k y`, and run ADMM on
//!
//! ```text
//! max  gᵀy   s.t.  B(y) = Z,  Z ⪰ 0
//! ```
//!
//! with over-relaxation and residual-balanced penalty updates. The dual
//! iterate `S = -ρU` is PSD at convergence and `Σ tr(S_k)` upper-bounds the
//! optimum, which gives a duality-gap stopping test.
//!
//! The program is invariant under conjugation by global Pauli strings, and
//! the iteration started from the identity stays in the invariant subspace.
//! The solver therefore works on that subspace directly: charged classes are
//! zero and the moment block splits into up to four charge sectors.
//!
//! On exit the affine projection of `Z` is mixed with the identity (which is
//! strictly feasible) just enough to make every block PSD, so the returned
//! moment matrix is exactly feasible and its objective a certified lower
//! bound on the optimum.

use std::fmt::Write as _;

use faer::{Mat, Side};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::Serialize;

use crate::error::{QmcError, Result};
use crate::moment::{Entry, MomentProblem};
use crate::pauli::{PauliLetter, PauliString};

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Initial penalty parameter (objective normalized to unit norm).
    pub rho: f64,
    pub over_relaxation: f64,
    /// Record one trace row per iteration.
    pub trace: bool,
    /// Search only moment matrices invariant under global Pauli conjugation.
    pub symmetry: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 200_000, rho: 1.0, over_relaxation: 1.6, trace: false, symmetry: true }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub rho: f64,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub blocks: Vec<DMatrix<f64>>,
    /// Class values realizing `blocks`.
    pub values: Vec<f64>,
    pub objective: f64,
    /// Upper bound from the final dual iterate (approximate: the dual
    /// equality constraints hold only to solver tolerance).
    pub dual_objective: f64,
    /// Largest violation of fixed, class and linked entries.
    pub primal_residual: f64,
    /// Most negative block eigenvalue, clamped at 0.
    pub psd_residual: f64,
    pub iterations: usize,
    pub trace: Vec<TraceRow>,
}

impl SdpSolution {
    pub fn entry(&self, e: Entry) -> f64 {
        self.blocks[e.block][(e.row, e.col)]
    }

    pub fn moment_matrix(&self) -> &DMatrix<f64> {
        &self.blocks[0]
    }

    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iteration,objective,primal_residual,dual_residual,gap,rho\n");
        for r in &self.trace {
            let _ = writeln!(
                s,
                "{},{:.12e},{:.6e},{:.6e},{:.6e},{:.6e}",
                r.iteration, r.objective, r.primal_residual, r.dual_residual, r.gap, r.rho
            );
        }
        s
    }
}

/// Euclidean projection of a symmetric matrix onto the PSD cone.
pub fn project_psd(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = s.nrows();
    if n != s.ncols() {
        return Err(QmcError::Dimension(format!("{}x{} is not square", n, s.ncols())));
    }
    if n == 0 {
        return Ok(s.clone());
    }
    let a = Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
    let eig = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| QmcError::Numeric(format!("eigensolver failed: {e:?}")))?;
    let vals = eig.S().column_vector();
    let vecs = eig.U();
    if (0..n).any(|k| !vals[k].is_finite()) {
        return Err(QmcError::Numeric("eigensolver produced non-finite values".into()));
    }
    // Eigenvalues come sorted ascending.
    let first_pos = (0..n).find(|&k| vals[k] > 0.0).unwrap_or(n);
    let npos = n - first_pos;
    if npos == n {
        return Ok(DMatrix::from_fn(n, n, |i, j| a[(i, j)]));
    }
    // Rebuild from whichever eigenspace is smaller.
    let out = if 2 * npos <= n {
        let q = Mat::<f64>::from_fn(n, npos, |i, c| {
            let k = first_pos + c;
            vecs[(i, k)] * vals[k].sqrt()
        });
        &q * q.transpose()
    } else {
        let q = Mat::<f64>::from_fn(n, first_pos, |i, k| vecs[(i, k)] * (-vals[k]).sqrt());
        &a + &q * q.transpose()
    };
    Ok(DMatrix::from_fn(n, n, |i, j| 0.5 * (out[(i, j)] + out[(j, i)])))
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    let a = Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    match a.self_adjoint_eigenvalues(Side::Lower) {
        Ok(v) => v.into_iter().fold(f64::INFINITY, f64::min),
        Err(_) => f64::NAN,
    }
}

/// Euclidean (Frobenius) projection of symmetric blocks onto the affine
/// subspace of `p`: fixed entries take their values, each class takes the
/// sign-weighted mean of its members, linked entries follow by least squares.
pub fn project_affine(blocks: &[DMatrix<f64>], p: &MomentProblem) -> Result<Vec<DMatrix<f64>>> {
    p.check_dims(blocks)?;
    let map = AffineMap::new(p)?;
    let y = map.project(blocks, None);
    Ok(map.apply(&y))
}

/// Largest violation of the entry constraints of `p` by `blocks`.
pub fn affine_residual(blocks: &[DMatrix<f64>], p: &MomentProblem) -> f64 {
    let mut worst: f64 = 0.0;
    let mut check = |e: &Entry, v: f64| {
        let m = &blocks[e.block];
        worst = worst.max((m[(e.row, e.col)] - v).abs()).max((m[(e.col, e.row)] - v).abs());
    };
    for (e, v) in &p.fixed {
        check(e, *v);
    }
    for class in &p.classes {
        let rep = class.representative();
        let base = blocks[rep.block][(rep.row, rep.col)];
        for m in &class.members {
            check(&m.entry, m.sign * base);
        }
    }
    let values = p.values_from_blocks(blocks);
    for d in &p.density {
        for le in &d.entries {
            let v = le.constant + le.terms.iter().map(|&(c, a)| a * values[c]).sum::<f64>();
            check(&le.entry, v);
        }
    }
    worst
}

#[derive(Debug, Clone)]
struct AffineEntry {
    block: usize,
    row: usize,
    col: usize,
    weight: f64,
    constant: f64,
    terms: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
enum Normal {
    Diagonal(Vec<f64>),
    Dense(Cholesky<f64, Dyn>),
}

/// Parametrization `y ↦ B(y)` of the affine subspace. Entries not listed
/// are fixed at zero.
#[derive(Debug, Clone)]
struct AffineMap {
    dims: Vec<usize>,
    entries: Vec<AffineEntry>,
    normal: Normal,
    m: usize,
}

/// Fixed, class and linked entries of `p`, each with its constraint weight.
fn raw_entries(p: &MomentProblem) -> Vec<AffineEntry> {
    let weight = |e: &Entry| if e.is_diagonal() { 1.0 } else { 2.0 };
    let mut entries = Vec::new();
    for (e, v) in &p.fixed {
        if *v != 0.0 {
            entries.push(AffineEntry {
                block: e.block,
                row: e.row,
                col: e.col,
                weight: weight(e),
                constant: *v,
                terms: Vec::new(),
            });
        }
    }
    for (c, class) in p.classes.iter().enumerate() {
        for mem in &class.members {
            let e = mem.entry;
            entries.push(AffineEntry {
                block: e.block,
                row: e.row,
                col: e.col,
                weight: weight(&e),
                constant: 0.0,
                terms: vec![(c, mem.sign)],
            });
        }
    }
    for d in &p.density {
        for le in &d.entries {
            let e = le.entry;
            entries.push(AffineEntry {
                block: e.block,
                row: e.row,
                col: e.col,
                weight: weight(&e),
                constant: le.constant,
                terms: le.terms.clone(),
            });
        }
    }
    entries
}

/// Charge of a Pauli string under conjugation by the global `Z…Z` and
/// `X…X` strings: bit 0 is the parity of `#X + #Y`, bit 1 of `#Y + #Z`.
fn charge(s: &PauliString) -> usize {
    let (mut x, mut y, mut z) = (0, 0, 0);
    for &(_, l) in s.letters() {
        match l {
            PauliLetter::X => x += 1,
            PauliLetter::Y => y += 1,
            PauliLetter::Z => z += 1,
            PauliLetter::I => {}
        }
    }
    ((x + y) % 2) | (((y + z) % 2) << 1)
}

/// Restriction of a problem to the moment matrices that are invariant under
/// global Pauli conjugation. Such a matrix vanishes on charged classes, and
/// its moment block splits by the charge of the basis elements.
#[derive(Debug, Clone)]
struct Reduction {
    /// Reduced `(block, index)` of every row of every original block.
    place: Vec<Vec<(usize, usize)>>,
    dims: Vec<usize>,
    /// Original class of each reduced variable.
    active: Vec<usize>,
    /// Reduced variable of each original class.
    slot: Vec<Option<usize>>,
}

impl Reduction {
    fn identity(p: &MomentProblem) -> Self {
        Self {
            place: p.blocks.iter().enumerate().map(|(b, &d)| (0..d).map(|r| (b, r)).collect()).collect(),
            dims: p.blocks.clone(),
            active: (0..p.num_classes()).collect(),
            slot: (0..p.num_classes()).map(Some).collect(),
        }
    }

    fn by_charge(p: &MomentProblem) -> Self {
        let mut dims = Vec::new();
        let mut place = Vec::with_capacity(p.blocks.len());
        let charges: Vec<usize> = p.basis.elements().iter().map(charge).collect();
        let mut moment = vec![(0, 0); p.blocks[0]];
        for q in 0..4 {
            let rows: Vec<usize> = (0..p.blocks[0]).filter(|&r| charges[r] == q).collect();
            if rows.is_empty() {
                continue;
            }
            for (k, &r) in rows.iter().enumerate() {
                moment[r] = (dims.len(), k);
            }
            dims.push(rows.len());
        }
        place.push(moment);
        for &d in &p.blocks[1..] {
            place.push((0..d).map(|r| (dims.len(), r)).collect());
            dims.push(d);
        }
        let mut active = Vec::new();
        let slot = p
            .classes
            .iter()
            .enumerate()
            .map(|(c, class)| {
                (charge(&class.key) == 0).then(|| {
                    active.push(c);
                    active.len() - 1
                })
            })
            .collect();
        Self { place, dims, active, slot }
    }

    /// Entries of the reduced problem. Entries joining different charge
    /// sectors vanish on invariant matrices and are dropped.
    fn entries(&self, p: &MomentProblem) -> Vec<AffineEntry> {
        raw_entries(p)
            .into_iter()
            .filter_map(|e| {
                let (b, r) = self.place[e.block][e.row];
                let (b2, c) = self.place[e.block][e.col];
                let terms: Vec<(usize, f64)> =
                    e.terms.iter().filter_map(|&(k, a)| self.slot[k].map(|s| (s, a))).collect();
                if b != b2 {
                    debug_assert!(e.constant == 0.0 && terms.is_empty());
                    return None;
                }
                Some(AffineEntry { block: b, row: r, col: c, terms, ..e })
            })
            .collect()
    }

    /// Full class values from reduced ones.
    fn lift(&self, y: &[f64], num_classes: usize) -> Vec<f64> {
        let mut out = vec![0.0; num_classes];
        for (&c, &v) in self.active.iter().zip(y) {
            out[c] = v;
        }
        out
    }
}

impl AffineMap {
    fn new(p: &MomentProblem) -> Result<Self> {
        Self::from_entries(p.blocks.clone(), raw_entries(p), p.num_classes())
    }

    fn from_entries(dims: Vec<usize>, entries: Vec<AffineEntry>, m: usize) -> Result<Self> {
        let diagonal = entries.iter().all(|e| e.terms.len() <= 1);
        let normal = if diagonal {
            let mut g = vec![0.0; m];
            for e in &entries {
                for &(c, a) in &e.terms {
                    g[c] += e.weight * a * a;
                }
            }
            if g.iter().any(|&v| v <= 0.0) {
                return Err(QmcError::Numeric("class without members".into()));
            }
            Normal::Diagonal(g)
        } else {
            let mut g = DMatrix::<f64>::zeros(m, m);
            for e in &entries {
                for &(c1, a1) in &e.terms {
                    for &(c2, a2) in &e.terms {
                        g[(c1, c2)] += e.weight * a1 * a2;
                    }
                }
            }
            let chol =
                Cholesky::new(g).ok_or_else(|| QmcError::Numeric("singular normal equations".into()))?;
            Normal::Dense(chol)
        };
        Ok(Self { dims, entries, normal, m })
    }

    fn apply(&self, y: &[f64]) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self.dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
        for e in &self.entries {
            let v = e.constant + e.terms.iter().map(|&(c, a)| a * y[c]).sum::<f64>();
            let b = &mut out[e.block];
            b[(e.row, e.col)] = v;
            b[(e.col, e.row)] = v;
        }
        out
    }

    fn solve_normal(&self, rhs: Vec<f64>) -> Vec<f64> {
        match &self.normal {
            Normal::Diagonal(g) => rhs.iter().zip(g).map(|(r, d)| r / d).collect(),
            Normal::Dense(chol) => chol.solve(&DVector::from_vec(rhs)).as_slice().to_vec(),
        }
    }

    /// `argmin_y ||B(y) - V||² - 2·extraᵀy`, i.e. the projection of `V`
    /// shifted by `G⁻¹ extra`.
    fn project(&self, v: &[DMatrix<f64>], extra: Option<&[f64]>) -> Vec<f64> {
        let mut rhs = match extra {
            Some(x) => x.to_vec(),
            None => vec![0.0; self.m],
        };
        for e in &self.entries {
            if e.terms.is_empty() {
                continue;
            }
            let b = &v[e.block];
            let target = 0.5 * (b[(e.row, e.col)] + b[(e.col, e.row)]) - e.constant;
            for &(c, a) in &e.terms {
                rhs[c] += e.weight * a * target;
            }
        }
        self.solve_normal(rhs)
    }

    /// `sqrt(gᵀ G⁻¹ g)`: Frobenius norm of the matrix representing `g` on the
    /// subspace.
    fn dual_norm(&self, g: &[f64]) -> f64 {
        let x = self.solve_normal(g.to_vec());
        x.iter().zip(g).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
    }
}

fn frob_diff(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_squared()).sum::<f64>().sqrt()
}

/// Iterations between checks of the repaired objective.
const CERTIFY_INTERVAL: usize = 10;

fn frob(a: &[DMatrix<f64>]) -> f64 {
    a.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

pub fn solve(p: &MomentProblem, tol: f64, max_iter: usize) -> Result<SdpSolution> {
    solve_with(p, &SolverOptions { tol, max_iter, ..SolverOptions::default() })
}

pub fn solve_with(p: &MomentProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    if !(opts.tol > 0.0) {
        return Err(QmcError::Argument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let red = if opts.symmetry { Reduction::by_charge(p) } else { Reduction::identity(p) };
    let map = AffineMap::from_entries(red.dims.clone(), red.entries(p), red.active.len())?;
    let (constant, full_grad) = p.objective_in_values();
    let grad: Vec<f64> = red.active.iter().map(|&c| full_grad[c]).collect();
    let cnorm = map.dual_norm(&grad);
    let scale = if cnorm > 0.0 { 1.0 / cnorm } else { 1.0 };
    let g: Vec<f64> = grad.iter().map(|v| v * scale).collect();

    let alpha = opts.over_relaxation;
    let mut rho = opts.rho;
    let zeros = vec![0.0; map.m];
    // ADMM state: the pre-projection point `W`, with `Z = Π(W)` and the
    // scaled dual `U = W - Z`.
    let mut w = map.apply(&zeros);
    let mut z_prev: Option<Vec<DMatrix<f64>>> = None;
    let mut u: Vec<DMatrix<f64>> = p.blocks.iter().map(|&d| DMatrix::zeros(d, d)).collect();
    let mut z = w.clone();
    let mut trace = Vec::new();
    let mut last_rho_change = 0usize;
    let mut status = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut iterations = 0;
    let mut converged = false;
    let mut next_certify = 0usize;
    let mut result = None;

    for it in 1..=opts.max_iter {
        iterations = it;
        z = w.iter().map(project_psd).collect::<Result<Vec<_>>>()?;
        u = w.iter().zip(&z).map(|(a, b)| a - b).collect();
        // y-update: projection of Z - U pushed along the objective.
        let v: Vec<DMatrix<f64>> = z.iter().zip(&u).map(|(a, b)| a - b).collect();
        let push: Vec<f64> = g.iter().map(|x| x / rho).collect();
        let y = map.project(&v, Some(&push));
        let x = map.apply(&y);
        let w_next: Vec<DMatrix<f64>> =
            x.iter().zip(&z).zip(&u).map(|((xk, zk), uk)| xk * alpha + zk * (1.0 - alpha) + uk).collect();

        let r_p = frob_diff(&x, &z);
        let r_d = z_prev.as_ref().map_or(f64::INFINITY, |zp| rho * frob_diff(&z, zp));
        let primal = g.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
        // S = -ρU; objective relative to B0 = I is Σ tr(S_k).
        let dual: f64 = -rho * u.iter().map(|m| m.trace()).sum::<f64>();
        let gap = (primal - dual).abs() / (1.0 + primal.abs() + dual.abs());
        let xnorm = frob(&x).max(frob(&z));
        let unorm = rho * frob(&u);
        let eps_p = opts.tol * (1.0 + xnorm);
        let eps_d = opts.tol * (1.0 + unorm);
        status = (r_p / (1.0 + xnorm), r_d / (1.0 + unorm), gap);
        if opts.trace {
            trace.push(TraceRow {
                iteration: it,
                objective: constant + primal / scale,
                primal_residual: status.0,
                dual_residual: status.1,
                gap,
                rho,
            });
        }
        if r_p <= eps_p && r_d <= eps_d && gap <= opts.tol && it >= next_certify {
            // The repaired point must also be within tolerance of the dual
            // estimate, so that the returned lower bound is accurate.
            let candidate = finish(p, &red, &map, map.project(&z, None), constant, &grad, it)?;
            let dual_obj = constant + dual / scale;
            let cert =
                (dual_obj - candidate.objective).abs() / (1.0 + dual_obj.abs() + candidate.objective.abs());
            if cert <= opts.tol {
                result = Some((candidate, dual_obj));
                converged = true;
                break;
            }
            next_certify = it + CERTIFY_INTERVAL;
        }
        z_prev = Some(z.clone());

        // Residual balancing, at most every 20 iterations.
        let mut factor = 1.0;
        if it - last_rho_change >= 20 {
            let (np, nd) = (status.0, status.1);
            if np > 10.0 * nd {
                factor = 2.0;
            } else if nd > 10.0 * np {
                factor = 0.5;
            }
        }
        if factor != 1.0 {
            // Keep Z and rescale U = W - Π(W) to the new penalty.
            rho *= factor;
            w = w_next
                .into_iter()
                .map(|wk| {
                    let zk = project_psd(&wk)?;
                    let uk = &wk - &zk;
                    Ok(zk + uk / factor)
                })
                .collect::<Result<Vec<_>>>()?;
            last_rho_change = it;
        } else {
            w = w_next;
        }
    }

    let (mut best, dual_objective) = match result {
        Some(r) => r,
        None => {
            let dual_scaled = -rho * u.iter().map(|m| m.trace()).sum::<f64>();
            let y = map.project(&z, None);
            (finish(p, &red, &map, y, constant, &grad, iterations)?, constant + dual_scaled / scale)
        }
    };
    best.dual_objective = dual_objective;
    best.trace = trace;
    if converged {
        Ok(best)
    } else {
        Err(QmcError::NonConvergence {
            iterations,
            primal_residual: status.0,
            dual_residual: status.1,
            gap: status.2,
            best: Box::new(best),
        })
    }
}

/// Mixes `B(y)` with the identity until every block is PSD, lifts the result
/// to the full problem and packages it.
fn finish(
    p: &MomentProblem,
    red: &Reduction,
    map: &AffineMap,
    y: Vec<f64>,
    constant: f64,
    grad: &[f64],
    iterations: usize,
) -> Result<SdpSolution> {
    let lam = map.apply(&y).iter().map(min_eigenvalue).fold(f64::INFINITY, f64::min);
    let shift = (-lam).max(0.0);
    let theta = 1.0 / (1.0 + shift);
    let y: Vec<f64> = y.iter().map(|v| v * theta).collect();
    let psd = map.apply(&y).iter().map(min_eigenvalue).fold(f64::INFINITY, f64::min);
    let objective = constant + grad.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
    let values = red.lift(&y, p.num_classes());
    let blocks = p.blocks_from_values(&values);
    Ok(SdpSolution {
        primal_residual: affine_residual(&blocks, p),
        psd_residual: (-psd).max(0.0),
        blocks,
        values,
        objective,
        dual_objective: f64::NAN,
        iterations,
        trace: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::WeightedGraph;
    use crate::moment::{build_lasserre, EntryClass, Level, SignedEntry};
    use crate::pauli::PauliString;

    #[test]
    fn psd_projection_clips() {
        let d = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -1.0]);
        let p = project_psd(&d).unwrap();
        assert!((p - DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0])).norm() < 1e-14);
        let o = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let p = project_psd(&o).unwrap();
        assert!((p - DMatrix::from_element(2, 2, 0.5)).norm() < 1e-14);
    }

    #[test]
    fn psd_projection_idempotent_on_psd_input() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.5, -1.0, 3.0, 0.0, 1.0, 1.0]);
        let s = &a * a.transpose();
        let p = project_psd(&s).unwrap();
        assert!((&p - &s).norm() < 1e-12);
        let pp = project_psd(&p).unwrap();
        assert!((&pp - &p).norm() < 1e-12);
        assert!(min_eigenvalue(&pp) > -1e-12);
    }

    fn toy_problem() -> MomentProblem {
        // A 4x4 block with one class {(0,1,+1),(2,3,-1)} and everything else
        // fixed; built by hand on top of a real problem for its bookkeeping.
        let mut p = build_lasserre(&WeightedGraph::new(1, []).unwrap(), Level::One).unwrap();
        p.blocks = vec![4];
        p.fixed = (0..4).map(|r| (Entry::new(0, r, r), 1.0)).collect();
        p.fixed.push((Entry::new(0, 0, 2), 0.0));
        p.fixed.push((Entry::new(0, 0, 3), 0.0));
        p.fixed.push((Entry::new(0, 1, 2), 0.0));
        p.fixed.push((Entry::new(0, 1, 3), 0.0));
        p.classes = vec![EntryClass {
            key: PauliString::identity(1),
            members: vec![
                SignedEntry { entry: Entry::new(0, 0, 1), sign: 1.0 },
                SignedEntry { entry: Entry::new(0, 2, 3), sign: -1.0 },
            ],
        }];
        p.objective.clear();
        p
    }

    #[test]
    fn affine_projection_signed_mean() {
        let p = toy_problem();
        let mut m = DMatrix::from_element(4, 4, 7.0);
        m[(0, 1)] = 3.0;
        m[(1, 0)] = 3.0;
        m[(2, 3)] = -1.0;
        m[(3, 2)] = -1.0;
        let out = project_affine(&[m], &p).unwrap();
        assert!((out[0][(0, 1)] - 2.0).abs() < 1e-15);
        assert!((out[0][(2, 3)] + 2.0).abs() < 1e-15);
        assert_eq!(out[0][(0, 0)], 1.0);
        assert_eq!(out[0][(0, 3)], 0.0);
        let again = project_affine(&out, &p).unwrap();
        assert!((&again[0] - &out[0]).norm() < 1e-12);
    }

    #[test]
    fn affine_projection_all_fixed_is_constant() {
        let mut p = toy_problem();
        p.classes.clear();
        p.fixed.push((Entry::new(0, 0, 1), 0.0));
        p.fixed.push((Entry::new(0, 2, 3), 0.0));
        let a = project_affine(&[DMatrix::from_element(4, 4, 3.0)], &p).unwrap();
        let b = project_affine(&[DMatrix::from_element(4, 4, -9.0)], &p).unwrap();
        assert_eq!(a[0], b[0]);
        assert_eq!(a[0], DMatrix::identity(4, 4));
    }

    #[test]
    fn single_edge_level2_is_four() {
        let g = WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap();
        let p = build_lasserre(&g, Level::Two).unwrap();
        let sol = solve(&p, 1e-8, 20_000).unwrap();
        assert!((sol.objective - 4.0).abs() < 1e-4, "{}", sol.objective);
        assert!(sol.primal_residual < 1e-12);
        assert!(sol.psd_residual < 1e-10);
    }

    #[test]
    fn nonconvergence_carries_best_iterate() {
        let p = build_lasserre(&WeightedGraph::star(3), Level::Two).unwrap();
        match solve(&p, 1e-12, 3) {
            Err(QmcError::NonConvergence { iterations, best, .. }) => {
                assert_eq!(iterations, 3);
                assert!(best.psd_residual < 1e-10);
            }
            other => panic!("expected non-convergence, got {:?}", other.map(|s| s.objective)),
        }
    }

    #[test]
    fn rejects_bad_tolerance() {
        let p = build_lasserre(&WeightedGraph::star(1), Level::One).unwrap();
        assert!(matches!(solve(&p, 0.0, 10), Err(QmcError::Argument(_))));
    }

    fn traced() -> SolverOptions {
        SolverOptions { tol: 1e-6, trace: true, ..Default::default() }
    }

    #[test]
    fn solver_is_deterministic() {
        let g = WeightedGraph::gnp(6, 0.6, 11, false).unwrap();
        let p = build_lasserre(&g, Level::OneAndHalf).unwrap();
        let a = solve_with(&p, &traced()).unwrap();
        let b = solve_with(&p, &traced()).unwrap();
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn residual_trend_has_no_blowup() {
        for (n, seed, level) in [(5, 3, Level::Two), (6, 4, Level::OneAndHalf), (7, 5, Level::One)] {
            let g = WeightedGraph::gnp(n, 0.5, seed, false).unwrap();
            let p = build_lasserre(&g, level).unwrap();
            let sol = solve_with(&p, &traced()).unwrap();
            let combined: Vec<f64> =
                sol.trace.iter().map(|r| r.primal_residual.max(r.dual_residual)).collect();
            for (i, &start) in combined.iter().enumerate() {
                let end = (i + 100).min(combined.len() - 1);
                let peak = combined[i..=end].iter().cloned().fold(0.0, f64::max);
                assert!(
                    peak <= 10.0 * start + 1e-12,
                    "n={n} level={level}: residual {start:e} -> {peak:e} after iteration {i}"
                );
            }
        }
    }

    #[test]
    fn charge_sectors() {
        let p = build_lasserre(&WeightedGraph::complete(8), Level::Two).unwrap();
        let red = Reduction::by_charge(&p);
        assert_eq!(red.dims, vec![85, 64, 64, 64]);
        let p = build_lasserre(&WeightedGraph::path(4), Level::OneAndHalf).unwrap();
        let red = Reduction::by_charge(&p);
        assert_eq!(red.dims[..4], [1, 4, 4, 4]);
        assert_eq!(red.dims.len(), 4 + 6);
    }

    #[test]
    fn reduced_solve_matches_full_solve() {
        let g = WeightedGraph::gnp(5, 0.6, 7, false).unwrap();
        for level in [Level::One, Level::OneAndHalf, Level::Two] {
            let p = build_lasserre(&g, level).unwrap();
            let full = solve_with(&p, &SolverOptions { symmetry: false, ..traced() }).unwrap();
            let reduced = solve_with(&p, &traced()).unwrap();
            assert!((full.objective - reduced.objective).abs() < 1e-9, "{level}");
            assert!(reduced.primal_residual < 1e-12);
            assert!(reduced.psd_residual < 1e-10);
            assert_eq!(reduced.blocks.len(), p.blocks.len());
        }
    }
}
