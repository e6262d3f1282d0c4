//! Pauli strings of bounded weight with exact phase tracking.
//!
//! Phases are kept as an exponent of `i` (mod 4), never as floats. Strings are
//! stored sparsely as a qubit-sorted list of non-identity letters, which makes
//! low-weight strings cheap to hash and compare.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{QmcError, Result};

/// Single-qubit Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PauliLetter {
    I,
    X,
    Y,
    Z,
}

impl PauliLetter {
    pub const XYZ: [PauliLetter; 3] = [PauliLetter::X, PauliLetter::Y, PauliLetter::Z];

    /// Product `self * other = i^phase * letter`.
    pub fn mul(self, other: PauliLetter) -> (u8, PauliLetter) {
        use PauliLetter::*;
        match (self, other) {
            (I, p) | (p, I) => (0, p),
            (a, b) if a == b => (0, I),
            (X, Y) => (1, Z),
            (Y, Z) => (1, X),
            (Z, X) => (1, Y),
            (Y, X) => (3, Z),
            (Z, Y) => (3, X),
            (X, Z) => (3, Y),
            _ => unreachable!(),
        }
    }

    pub fn symbol(self) -> char {
        match self {
            PauliLetter::I => 'I',
            PauliLetter::X => 'X',
            PauliLetter::Y => 'Y',
            PauliLetter::Z => 'Z',
        }
    }
}

/// Tensor product of Pauli letters on `n` qubits, identity factors omitted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliString {
    n: usize,
    letters: Vec<(usize, PauliLetter)>,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        Self { n, letters: Vec::new() }
    }

    /// Builds a string from `(qubit, letter)` pairs. Identity letters are
    /// dropped; repeated or out-of-range qubits are rejected.
    pub fn new(n: usize, letters: &[(usize, PauliLetter)]) -> Result<Self> {
        let mut sorted: Vec<(usize, PauliLetter)> =
            letters.iter().copied().filter(|&(_, l)| l != PauliLetter::I).collect();
        sorted.sort_by_key(|&(q, _)| q);
        for w in sorted.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(QmcError::Argument(format!("qubit {} appears twice in Pauli string", w[0].0)));
            }
        }
        if let Some(&(q, _)) = sorted.last() {
            if q >= n {
                return Err(QmcError::Argument(format!("qubit {q} out of range for {n} qubits")));
            }
        }
        Ok(Self { n, letters: sorted })
    }

    pub fn single(n: usize, qubit: usize, letter: PauliLetter) -> Self {
        Self::new(n, &[(qubit, letter)]).expect("valid single-site Pauli")
    }

    pub fn pair(n: usize, a: (usize, PauliLetter), b: (usize, PauliLetter)) -> Self {
        Self::new(n, &[a, b]).expect("valid two-site Pauli")
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn weight(&self) -> usize {
        self.letters.len()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letters(&self) -> &[(usize, PauliLetter)] {
        &self.letters
    }

    pub fn letter_at(&self, qubit: usize) -> PauliLetter {
        self.letters.iter().find(|&&(q, _)| q == qubit).map_or(PauliLetter::I, |&(_, l)| l)
    }

    /// `self * other` as a phased Pauli.
    pub fn multiply(&self, other: &PauliString) -> Result<PhasedPauli> {
        if self.n != other.n {
            return Err(QmcError::Argument(format!(
                "cannot multiply Pauli strings on {} and {} qubits",
                self.n, other.n
            )));
        }
        let (a, b) = (&self.letters, &other.letters);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let mut phase = 0u8;
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
                out.push(a[i]);
                i += 1;
            } else if i == a.len() || b[j].0 < a[i].0 {
                out.push(b[j]);
                j += 1;
            } else {
                let (p, l) = a[i].1.mul(b[j].1);
                phase = (phase + p) % 4;
                if l != PauliLetter::I {
                    out.push((a[i].0, l));
                }
                i += 1;
                j += 1;
            }
        }
        Ok(PhasedPauli { phase_exp: phase, string: PauliString { n: self.n, letters: out } })
    }

    /// Whether the two strings commute (an even number of anticommuting sites).
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let mut anti = 0;
        for &(q, l) in &self.letters {
            let m = other.letter_at(q);
            if m != PauliLetter::I && m != l {
                anti += 1;
            }
        }
        anti % 2 == 0
    }
}

impl fmt::Display for PauliString {
    /// Renders as `X1*Y3` with 1-based qubit labels; identity renders as `I`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "I");
        }
        for (k, &(q, l)) in self.letters.iter().enumerate() {
            if k > 0 {
                write!(f, "*")?;
            }
            write!(f, "{}{}", l.symbol(), q + 1)?;
        }
        Ok(())
    }
}

/// Pauli string with a phase `i^phase_exp`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PhasedPauli {
    pub phase_exp: u8,
    pub string: PauliString,
}

impl PhasedPauli {
    /// The product is Hermitian exactly when the phase is real.
    pub fn is_hermitian(&self) -> bool {
        self.phase_exp.is_multiple_of(2)
    }

    /// `+1` or `-1` for Hermitian products, `None` otherwise.
    pub fn real_sign(&self) -> Option<f64> {
        match self.phase_exp {
            0 => Some(1.0),
            2 => Some(-1.0),
            _ => None,
        }
    }
}

/// Ordered moment-matrix index set: all Pauli strings on `n` qubits of weight
/// at most `k`.
///
/// Order: identity, then weight-1 strings by `(qubit, letter)` with
/// `X < Y < Z`, then weight-2 strings by `(q1, q2, letter1, letter2)` with
/// `q1 < q2`.
#[derive(Debug, Clone)]
pub struct PauliBasis {
    n: usize,
    k: usize,
    elements: Vec<PauliString>,
    index: HashMap<PauliString, usize>,
}

impl PauliBasis {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n == 0 {
            return Err(QmcError::Argument("basis needs at least one qubit".into()));
        }
        if k == 0 || k > 2 {
            return Err(QmcError::UnsupportedLevel(format!("Pauli basis weight {k} (supported: 1, 2)")));
        }
        let mut elements = vec![PauliString::identity(n)];
        for q in 0..n {
            for l in PauliLetter::XYZ {
                elements.push(PauliString::single(n, q, l));
            }
        }
        if k == 2 {
            for q1 in 0..n {
                for q2 in q1 + 1..n {
                    for l1 in PauliLetter::XYZ {
                        for l2 in PauliLetter::XYZ {
                            elements.push(PauliString::pair(n, (q1, l1), (q2, l2)));
                        }
                    }
                }
            }
        }
        let index = elements.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(Self { n, k, elements, index })
    }

    /// `sum_{t <= k} C(n, t) 3^t`.
    pub fn expected_len(n: usize, k: usize) -> usize {
        let mut total = 0;
        let mut binom = 1usize;
        let mut pow3 = 1usize;
        for t in 0..=k.min(n) {
            total += binom * pow3;
            binom = binom * (n - t) / (t + 1);
            pow3 *= 3;
        }
        total
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn max_weight(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[PauliString] {
        &self.elements
    }

    pub fn get(&self, i: usize) -> &PauliString {
        &self.elements[i]
    }

    pub fn canonical_index(&self, s: &PauliString) -> Result<usize> {
        if s.num_qubits() != self.n {
            return Err(QmcError::NotInBasis(format!(
                "{s} acts on {} qubits, basis on {}",
                s.num_qubits(),
                self.n
            )));
        }
        self.index
            .get(s)
            .copied()
            .ok_or_else(|| QmcError::NotInBasis(format!("{s} has weight {} > {}", s.weight(), self.k)))
    }

    /// Index of the single-site string `letter` on `qubit`.
    pub fn single_index(&self, qubit: usize, letter: PauliLetter) -> usize {
        1 + 3 * qubit + letter_offset(letter)
    }
}

fn letter_offset(l: PauliLetter) -> usize {
    match l {
        PauliLetter::X => 0,
        PauliLetter::Y => 1,
        PauliLetter::Z => 2,
        PauliLetter::I => panic!("identity has no single-site index"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use PauliLetter::*;

    #[test]
    fn single_site_products() {
        let x1 = PauliString::single(1, 0, X);
        let y1 = PauliString::single(1, 0, Y);
        let p = x1.multiply(&y1).unwrap();
        assert_eq!(p.phase_exp, 1);
        assert_eq!(p.string, PauliString::single(1, 0, Z));
        assert!(!p.is_hermitian());
    }

    #[test]
    fn involution_and_pair_product() {
        let xx = PauliString::pair(2, (0, X), (1, X));
        let yy = PauliString::pair(2, (0, Y), (1, Y));
        let sq = xx.multiply(&xx).unwrap();
        assert_eq!(sq.phase_exp, 0);
        assert!(sq.string.is_identity());
        let p = xx.multiply(&yy).unwrap();
        assert_eq!(p.phase_exp, 2);
        assert_eq!(p.string, PauliString::pair(2, (0, Z), (1, Z)));
        assert_eq!(p.real_sign(), Some(-1.0));
    }

    #[test]
    fn mismatched_qubit_counts() {
        let a = PauliString::single(2, 0, X);
        let b = PauliString::single(3, 0, X);
        assert!(matches!(a.multiply(&b), Err(QmcError::Argument(_))));
    }

    #[test]
    fn basis_sizes() {
        assert_eq!(PauliBasis::new(4, 2).unwrap().len(), 67);
        assert_eq!(PauliBasis::new(2, 2).unwrap().len(), 16);
        assert_eq!(PauliBasis::new(3, 1).unwrap().len(), 10);
        for n in 1..8 {
            for k in 1..=2 {
                assert_eq!(PauliBasis::new(n, k).unwrap().len(), PauliBasis::expected_len(n, k));
            }
        }
        assert!(matches!(PauliBasis::new(3, 3), Err(QmcError::UnsupportedLevel(_))));
    }

    #[test]
    fn canonical_indices() {
        let b = PauliBasis::new(2, 2).unwrap();
        assert_eq!(b.canonical_index(&PauliString::identity(2)).unwrap(), 0);
        assert_eq!(b.canonical_index(b.get(5)).unwrap(), 5);
        // I, X1 Y1 Z1, X2 Y2 Z2, then X1X2 at position 7.
        let xx = PauliString::pair(2, (0, X), (1, X));
        assert_eq!(b.canonical_index(&xx).unwrap(), 7);
        assert_eq!(b.single_index(1, Z), 6);
        let b1 = PauliBasis::new(2, 1).unwrap();
        assert!(matches!(b1.canonical_index(&xx), Err(QmcError::NotInBasis(_))));
    }

    #[test]
    fn basis_has_no_duplicates() {
        let b = PauliBasis::new(5, 2).unwrap();
        let set: std::collections::HashSet<_> = b.elements().iter().collect();
        assert_eq!(set.len(), b.len());
        assert!(b.elements().iter().all(|s| s.weight() <= 2));
    }

    #[test]
    fn display() {
        let s = PauliString::pair(4, (2, Y), (0, X));
        assert_eq!(s.to_string(), "X1*Y3");
        assert_eq!(PauliString::identity(3).to_string(), "I");
    }

    #[test]
    fn commutation() {
        let xx = PauliString::pair(2, (0, X), (1, X));
        let zz = PauliString::pair(2, (0, Z), (1, Z));
        let z1 = PauliString::single(2, 0, Z);
        assert!(xx.commutes_with(&zz));
        assert!(!xx.commutes_with(&z1));
    }
}
