//! Product-state rounding from the one-local part of the moment matrix.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{QmcError, Result};
use crate::exact::{state_energy, RoundedState};
use crate::graph::WeightedGraph;
use crate::moment::{Entry, MomentProblem};
use crate::pauli::PauliLetter;
use crate::rounding::EdgeValues;
use crate::sdp::SdpSolution;

/// Eigenvalues below this are an error rather than noise.
const PSD_TOLERANCE: f64 = 1e-6;
const SERIES_CUTOFF: f64 = 1e-14;
const MAX_RESAMPLES: u64 = 64;

/// Unit vectors `u(X_i), u(Y_i), u(Z_i)` whose Gram matrix is the one-local
/// moment submatrix.
#[derive(Debug, Clone)]
pub struct LocalVectorSystem {
    pub identity: DVector<f64>,
    pub vectors: Vec<[DVector<f64>; 3]>,
}

impl LocalVectorSystem {
    pub fn num_vertices(&self) -> usize {
        self.vectors.len()
    }

    pub fn dim(&self) -> usize {
        self.identity.len()
    }

    /// Factors a PSD Gram matrix ordered as `I, X_0, Y_0, Z_0, X_1, ...`.
    pub fn from_gram(gram: &DMatrix<f64>) -> Result<Self> {
        let m = gram.nrows();
        if m == 0 || !(m - 1).is_multiple_of(3) || gram.ncols() != m {
            return Err(QmcError::Dimension(format!(
                "Gram matrix of size {}x{} is not 1 + 3n square",
                gram.nrows(),
                gram.ncols()
            )));
        }
        let eig = gram.clone().symmetric_eigen();
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -PSD_TOLERANCE {
            return Err(QmcError::Numeric(format!("one-local moment block has eigenvalue {min:.3e}")));
        }
        let mut f = eig.eigenvectors;
        for (k, &l) in eig.eigenvalues.iter().enumerate() {
            let s = if l > 0.0 { l.sqrt() } else { 0.0 };
            f.column_mut(k).scale_mut(s);
        }
        let row = |r: usize| -> DVector<f64> {
            let v = f.row(r).transpose();
            let norm = v.norm();
            if norm > 0.0 {
                v / norm
            } else {
                v
            }
        };
        let n = (m - 1) / 3;
        Ok(Self {
            identity: row(0),
            vectors: (0..n).map(|i| [row(1 + 3 * i), row(2 + 3 * i), row(3 + 3 * i)]).collect(),
        })
    }

    pub fn gram(&self) -> DMatrix<f64> {
        let mut rows = vec![&self.identity];
        for v in &self.vectors {
            rows.extend(v.iter());
        }
        DMatrix::from_fn(rows.len(), rows.len(), |a, b| rows[a].dot(rows[b]))
    }

    /// `(1/3) Σ_σ u(σ_i)·u(σ_j)`.
    pub fn correlation(&self, i: usize, j: usize) -> f64 {
        (0..3).map(|s| self.vectors[i][s].dot(&self.vectors[j][s])).sum::<f64>() / 3.0
    }
}

/// Factors the principal submatrix of the moment matrix on `I` and the
/// single-qubit Paulis.
pub fn local_vectors(sol: &SdpSolution, p: &MomentProblem) -> Result<LocalVectorSystem> {
    p.check_dims(&sol.blocks)?;
    let n = p.graph.num_vertices();
    let mut idx = vec![0usize];
    for q in 0..n {
        for l in PauliLetter::XYZ {
            idx.push(p.basis.single_index(q, l));
        }
    }
    let gram = DMatrix::from_fn(idx.len(), idx.len(), |a, b| sol.entry(Entry::new(0, idx[a], idx[b])));
    LocalVectorSystem::from_gram(&gram)
}

fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws one product state.
///
/// Each vertex gets the unit vector `w_i = (u(X_i) ⊕ u(Y_i) ⊕ u(Z_i)) / √3`,
/// and a shared `3 × 3l` Gaussian matrix `R` maps it to
/// `b_i = R w_i / ‖R w_i‖`. Sample `k` uses its own counter-based
/// substream, so results do not depend on evaluation order.
pub fn sample_product_state(v: &LocalVectorSystem, seed: u64, k: u64) -> Result<RoundedState> {
    let l = v.dim();
    for attempt in 0..MAX_RESAMPLES {
        let mut rng = substream(seed, k.wrapping_mul(MAX_RESAMPLES).wrapping_add(attempt));
        let r: Vec<f64> = (0..9 * l).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut bloch = Vec::with_capacity(v.num_vertices());
        let mut degenerate = false;
        for u in &v.vectors {
            let mut b = [0.0; 3];
            for (c, bc) in b.iter_mut().enumerate() {
                let row = &r[3 * l * c..3 * l * (c + 1)];
                *bc = (0..3)
                    .map(|s| u[s].iter().zip(&row[s * l..(s + 1) * l]).map(|(a, g)| a * g).sum::<f64>())
                    .sum::<f64>()
                    / 3f64.sqrt();
            }
            let norm = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
            if norm < 1e-12 {
                degenerate = true;
                break;
            }
            bloch.push([b[0] / norm, b[1] / norm, b[2] / norm]);
        }
        if !degenerate {
            return Ok(RoundedState::Product { bloch });
        }
    }
    Err(QmcError::Numeric("product rounding kept hitting degenerate projections".into()))
}

#[derive(Debug, Clone, Serialize)]
pub struct ProductSampling {
    pub samples: usize,
    pub seed: u64,
    pub mean_energy: f64,
    pub std_error: f64,
    pub best_energy: f64,
    pub best_index: usize,
    #[serde(skip)]
    pub best: RoundedState,
}

/// Draws `samples` product states and keeps the one with the highest energy.
pub fn sample_best(
    v: &LocalVectorSystem,
    g: &WeightedGraph,
    seed: u64,
    samples: usize,
) -> Result<ProductSampling> {
    if samples == 0 {
        return Err(QmcError::Argument("need at least one sample".into()));
    }
    let mut best: Option<(usize, f64, RoundedState)> = None;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for k in 0..samples {
        let s = sample_product_state(v, seed, k as u64)?;
        let e = state_energy(&s, g)?;
        sum += e;
        sum_sq += e * e;
        if best.as_ref().is_none_or(|b| e > b.1) {
            best = Some((k, e, s));
        }
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = if samples > 1 { ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    let (best_index, best_energy, best) = best.expect("at least one sample");
    Ok(ProductSampling {
        samples,
        seed,
        mean_energy: mean,
        std_error: (var / n).sqrt(),
        best_energy,
        best_index,
        best,
    })
}

fn series(a: f64, b: f64, c: f64, z: f64) -> f64 {
    let mut term: f64 = 1.0;
    let mut sum = 1.0;
    let mut m = 0.0;
    while term.abs() >= SERIES_CUTOFF {
        term *= (a + m) * (b + m) / ((c + m) * (m + 1.0)) * z;
        sum += term;
        m += 1.0;
    }
    sum
}

/// `₂F₁(1/2, 1/2; 5/2; z)` on `[0, 1]`.
///
/// Near `z = 1` the series is slow, so it is continued through
/// `₂F₁(1/2,1/2;−1/2;1−z) · 3π/8 + (1−z)^{3/2} ₂F₁(2,2;5/2;1−z)`.
pub fn hyp2f1_half_half_52(z: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&z) {
        return Err(QmcError::Domain(format!("z = {z} outside [0, 1]")));
    }
    if z == 1.0 {
        return Ok(3.0 * PI / 8.0);
    }
    if z <= 0.75 {
        return Ok(series(0.5, 0.5, 2.5, z));
    }
    let w = 1.0 - z;
    Ok(3.0 * PI / 8.0 * series(0.5, 0.5, -0.5, w) + w.powf(1.5) * series(2.0, 2.0, 2.5, w))
}

/// `F(t) = (8 / 3π) · t · ₂F₁(1/2, 1/2; 5/2; t²)`, the expected inner product
/// of two rounded Bloch vectors whose vectors have correlation `t`.
pub fn ratio_f(t: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&t) {
        return Err(QmcError::Domain(format!("t = {t} outside [-1, 1]")));
    }
    Ok(8.0 / (3.0 * PI) * t * hyp2f1_half_half_52(t * t)?)
}

/// `(1 − F(t)) / (1 − 3t)`, infinite at `t = 1/3`.
pub fn edge_ratio(t: f64) -> f64 {
    let den = 1.0 - 3.0 * t;
    if den <= 0.0 {
        return f64::INFINITY;
    }
    (1.0 - ratio_f(t).unwrap_or(f64::NAN)) / den
}

/// Minimum of [`edge_ratio`] over `[lo, hi]`: a `10⁴`-point grid followed by
/// golden-section refinement around the best grid point.
pub fn worst_case_ratio(lo: f64, hi: f64) -> Result<(f64, f64)> {
    if !(-1.0 <= lo && lo < hi && hi <= 1.0 / 3.0) {
        return Err(QmcError::Domain(format!("bad interval [{lo}, {hi}]")));
    }
    const GRID: usize = 10_000;
    let step = (hi - lo) / (GRID - 1) as f64;
    let at = |k: usize| if k == GRID - 1 { hi } else { lo + step * k as f64 };
    let (kbest, _) =
        (0..GRID).map(|k| (k, edge_ratio(at(k)))).min_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty grid");
    let mut a = at(kbest.saturating_sub(1));
    let mut b = at((kbest + 1).min(GRID - 1));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (edge_ratio(c), edge_ratio(d));
    while b - a > 1e-10 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = edge_ratio(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = edge_ratio(d);
        }
    }
    let candidates = [a, b, at(kbest)];
    let (t, r) =
        candidates.iter().map(|&t| (t, edge_ratio(t))).min_by(|x, y| x.1.total_cmp(&y.1)).expect("non-empty");
    Ok((t, r))
}

/// `Σ_ij w_ij (1 − F(v_ij))`, the expected energy of one rounded sample.
pub fn expected_product_energy(vals: &EdgeValues, g: &WeightedGraph) -> Result<f64> {
    if vals.num_vertices() != g.num_vertices() {
        return Err(QmcError::Dimension("edge values and graph disagree".into()));
    }
    g.edges().iter().map(|e| Ok(e.w * (1.0 - ratio_f(vals.v(e.i, e.j).clamp(-1.0, 1.0))?))).sum()
}
