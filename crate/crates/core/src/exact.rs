//! Dense ground truth for small instances.
//!
//! Basis states are indexed little-endian: qubit `q` is bit `q` of the
//! computational-basis index.

use faer::{Mat, Side};
use nalgebra::{Complex, DMatrix};
use serde::Serialize;

use crate::error::{QmcError, Result};
use crate::graph::WeightedGraph;
use crate::pauli::{PauliLetter, PauliString};

pub const MAX_EXACT_QUBITS: usize = 12;
pub const MAX_DENSITY_QUBITS: usize = 8;

pub type C64 = Complex<f64>;

/// `Σ_ij w_ij (I - X_iX_j - Y_iY_j - Z_iZ_j)` as a dense real matrix.
#[derive(Debug, Clone)]
pub struct DenseHamiltonian {
    pub n: usize,
    pub h: DMatrix<f64>,
}

/// Output of a rounding step.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RoundedState {
    /// Singlets on `edges`, maximally mixed qubits on `unmatched`.
    Matching { n: usize, edges: Vec<(usize, usize)>, unmatched: Vec<usize> },
    /// Pure product state given by one unit Bloch vector per qubit.
    Product { bloch: Vec<[f64; 3]> },
}

impl RoundedState {
    pub fn num_qubits(&self) -> usize {
        match self {
            RoundedState::Matching { n, .. } => *n,
            RoundedState::Product { bloch } => bloch.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            RoundedState::Matching { n, edges, unmatched } => {
                let mut seen = vec![0u8; *n];
                for &(i, j) in edges {
                    if i == j || i >= *n || j >= *n {
                        return Err(QmcError::Argument(format!("bad matching edge ({i}, {j})")));
                    }
                    seen[i] += 1;
                    seen[j] += 1;
                }
                for &u in unmatched {
                    if u >= *n {
                        return Err(QmcError::Argument(format!("unmatched vertex {u} out of range")));
                    }
                    seen[u] += 1;
                }
                if seen.iter().any(|&c| c != 1) {
                    return Err(QmcError::Argument(
                        "matching and unmatched set must partition the vertices".into(),
                    ));
                }
                Ok(())
            }
            RoundedState::Product { bloch } => {
                for (v, b) in bloch.iter().enumerate() {
                    let norm = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
                    if (norm - 1.0).abs() > 1e-9 {
                        return Err(QmcError::Argument(format!("Bloch vector of qubit {v} has norm {norm}")));
                    }
                }
                Ok(())
            }
        }
    }
}

pub fn build_hamiltonian(g: &WeightedGraph) -> Result<DenseHamiltonian> {
    let n = g.num_vertices();
    if n > MAX_EXACT_QUBITS {
        return Err(QmcError::SizeCap(format!(
            "exact Hamiltonian limited to {MAX_EXACT_QUBITS} qubits, got {n}"
        )));
    }
    let dim = 1usize << n;
    let mut h = DMatrix::zeros(dim, dim);
    // On |..a..b..⟩: I - ZZ is 0 if a = b, else 2; XX + YY swaps differing
    // bits with amplitude 2 and annihilates equal ones.
    for e in g.edges() {
        let mask = (1usize << e.i) | (1usize << e.j);
        for s in 0..dim {
            let a = (s >> e.i) & 1;
            let b = (s >> e.j) & 1;
            if a != b {
                h[(s, s)] += 2.0 * e.w;
                h[(s ^ mask, s)] -= 2.0 * e.w;
            }
        }
    }
    Ok(DenseHamiltonian { n, h })
}

/// Largest eigenvalue of a dense Hamiltonian.
pub fn max_eigenvalue(h: &DenseHamiltonian) -> Result<f64> {
    let dim = h.h.nrows();
    let a = Mat::<f64>::from_fn(dim, dim, |i, j| h.h[(i, j)]);
    let vals = a
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| QmcError::Numeric(format!("eigensolver failed: {e:?}")))?;
    Ok(vals.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// `QMC(G, w)`: the largest eigenvalue of the graph's Hamiltonian.
pub fn qmc_value(g: &WeightedGraph) -> Result<f64> {
    max_eigenvalue(&build_hamiltonian(g)?)
}

/// Closed-form energy `Tr(Hρ)` of a rounded state.
///
/// Matching states earn `4w` on matched edges and `w` elsewhere (maximally
/// mixed or distinct singlets carry no correlation). Product states earn
/// `w (1 - b_i·b_j)`.
pub fn state_energy(s: &RoundedState, g: &WeightedGraph) -> Result<f64> {
    if s.num_qubits() != g.num_vertices() {
        return Err(QmcError::Argument(format!(
            "state on {} qubits, graph on {} vertices",
            s.num_qubits(),
            g.num_vertices()
        )));
    }
    s.validate()?;
    Ok(match s {
        RoundedState::Matching { edges, .. } => g
            .edges()
            .iter()
            .map(|e| {
                let matched = edges.iter().any(|&(a, b)| (a.min(b), a.max(b)) == (e.i, e.j));
                e.w * if matched { 4.0 } else { 1.0 }
            })
            .sum(),
        RoundedState::Product { bloch } => g
            .edges()
            .iter()
            .map(|e| {
                let (a, b) = (bloch[e.i], bloch[e.j]);
                e.w * (1.0 - (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]))
            })
            .sum(),
    })
}

/// Dense matrix of a Pauli string on `s.num_qubits()` qubits.
pub fn pauli_matrix(s: &PauliString) -> DMatrix<C64> {
    let dim = 1usize << s.num_qubits();
    let mut m = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
    for col in 0..dim {
        let mut row = col;
        let mut amp = C64::new(1.0, 0.0);
        for &(q, l) in s.letters() {
            let bit = (col >> q) & 1;
            match l {
                PauliLetter::I => {}
                PauliLetter::X => row ^= 1 << q,
                PauliLetter::Y => {
                    row ^= 1 << q;
                    // Y|0⟩ = i|1⟩, Y|1⟩ = -i|0⟩
                    amp *= if bit == 0 { C64::new(0.0, 1.0) } else { C64::new(0.0, -1.0) };
                }
                PauliLetter::Z => {
                    if bit == 1 {
                        amp = -amp;
                    }
                }
            }
        }
        m[(row, col)] = amp;
    }
    m
}

fn pauli_2x2(l: PauliLetter) -> [[C64; 2]; 2] {
    let o = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match l {
        PauliLetter::I => [[one, o], [o, one]],
        PauliLetter::X => [[o, one], [one, o]],
        PauliLetter::Y => [[o, -i], [i, o]],
        PauliLetter::Z => [[one, o], [o, -one]],
    }
}

/// Explicit density matrix of a rounded state (at most 8 qubits).
pub fn density_matrix(s: &RoundedState) -> Result<DMatrix<C64>> {
    let n = s.num_qubits();
    if n > MAX_DENSITY_QUBITS {
        return Err(QmcError::SizeCap(format!(
            "explicit density matrices limited to {MAX_DENSITY_QUBITS} qubits, got {n}"
        )));
    }
    s.validate()?;
    let dim = 1usize << n;
    let zero = C64::new(0.0, 0.0);
    match s {
        RoundedState::Product { bloch } => {
            // Single-qubit factors (I + b·σ)/2.
            let factors: Vec<[[C64; 2]; 2]> = bloch
                .iter()
                .map(|b| {
                    let mut f = [[zero; 2]; 2];
                    let terms = [
                        (PauliLetter::I, 1.0),
                        (PauliLetter::X, b[0]),
                        (PauliLetter::Y, b[1]),
                        (PauliLetter::Z, b[2]),
                    ];
                    for (l, c) in terms {
                        let p = pauli_2x2(l);
                        for r in 0..2 {
                            for k in 0..2 {
                                f[r][k] += p[r][k] * (0.5 * c);
                            }
                        }
                    }
                    f
                })
                .collect();
            Ok(DMatrix::from_fn(dim, dim, |r, c| {
                let mut v = C64::new(1.0, 0.0);
                for (q, f) in factors.iter().enumerate() {
                    v *= f[(r >> q) & 1][(c >> q) & 1];
                }
                v
            }))
        }
        RoundedState::Matching { edges, unmatched, .. } => {
            // Singlet projector (I - XX - YY - ZZ)/4 on a pair, indexed by
            // (bit_i + 2 bit_j).
            let mut singlet = [[zero; 4]; 4];
            singlet[0b01][0b01] = C64::new(0.5, 0.0);
            singlet[0b10][0b10] = C64::new(0.5, 0.0);
            singlet[0b01][0b10] = C64::new(-0.5, 0.0);
            singlet[0b10][0b01] = C64::new(-0.5, 0.0);
            Ok(DMatrix::from_fn(dim, dim, |r, c| {
                let mut v = C64::new(1.0, 0.0);
                for &(i, j) in edges {
                    let a = ((r >> i) & 1) | (((r >> j) & 1) << 1);
                    let b = ((c >> i) & 1) | (((c >> j) & 1) << 1);
                    v *= singlet[a][b];
                }
                for &u in unmatched {
                    if (r >> u) & 1 != (c >> u) & 1 {
                        return zero;
                    }
                    v *= 0.5;
                }
                v
            }))
        }
    }
}

/// `Re Tr(H ρ)`.
pub fn energy_from_density(h: &DenseHamiltonian, rho: &DMatrix<C64>) -> Result<f64> {
    if rho.nrows() != h.h.nrows() || rho.ncols() != h.h.ncols() {
        return Err(QmcError::Dimension("density matrix does not match Hamiltonian".into()));
    }
    let dim = h.h.nrows();
    let mut t = 0.0;
    for a in 0..dim {
        for b in 0..dim {
            let hv = h.h[(a, b)];
            if hv != 0.0 {
                t += hv * rho[(b, a)].re;
            }
        }
    }
    Ok(t)
}
