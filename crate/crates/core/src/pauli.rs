//! Signed Pauli strings in symplectic (x|z) form.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    fn from_char(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'I' => Some(Letter::I),
            'X' => Some(Letter::X),
            'Y' => Some(Letter::Y),
            'Z' => Some(Letter::Z),
            _ => None,
        }
    }

    fn as_char(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }

    fn bits(self) -> (bool, bool) {
        match self {
            Letter::I => (false, false),
            Letter::X => (true, false),
            Letter::Y => (true, true),
            Letter::Z => (false, true),
        }
    }
}

/// `sign * P_0 ⊗ P_1 ⊗ ... ⊗ P_{n-1}` with `sign = ±1`.
///
/// Bit `n-1-q` of `x`/`z` carries the X/Z component of qubit `q`, matching
/// the basis-index convention of [`crate::linalg`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PauliString {
    n_qubits: usize,
    x: u64,
    z: u64,
    negative: bool,
}

impl PauliString {
    pub fn new(letters: &[Letter], sign: i8) -> Result<Self> {
        let n = letters.len();
        if n == 0 || n > 32 {
            return Err(Error::InvalidInput(format!("Pauli string length {n} unsupported")));
        }
        if sign != 1 && sign != -1 {
            return Err(Error::InvalidInput(format!("Pauli sign must be ±1, got {sign}")));
        }
        let (mut x, mut z) = (0u64, 0u64);
        for (q, l) in letters.iter().enumerate() {
            let (bx, bz) = l.bits();
            let bit = 1u64 << (n - 1 - q);
            if bx {
                x |= bit;
            }
            if bz {
                z |= bit;
            }
        }
        Ok(Self {
            n_qubits: n,
            x,
            z,
            negative: sign < 0,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_qubits: n,
            x: 0,
            z: 0,
            negative: false,
        }
    }

    /// Decodes the `idx`-th string of the `4^n` enumeration, one base-4 digit
    /// per qubit (qubit 0 most significant) with digits `I, X, Y, Z`.
    pub fn from_index(n: usize, idx: usize) -> Self {
        let mut x = 0u64;
        let mut z = 0u64;
        for q in 0..n {
            let digit = (idx >> (2 * (n - 1 - q))) & 3;
            let bit = 1u64 << (n - 1 - q);
            match digit {
                1 => x |= bit,
                2 => {
                    x |= bit;
                    z |= bit;
                }
                3 => z |= bit,
                _ => {}
            }
        }
        Self {
            n_qubits: n,
            x,
            z,
            negative: false,
        }
    }

    /// Single-qubit-letter placement helper, e.g. `Z_{q-1} X_q Z_{q+1}`.
    pub fn from_sites(n: usize, sites: &[(usize, Letter)]) -> Result<Self> {
        let mut letters = vec![Letter::I; n];
        for &(q, l) in sites {
            if q >= n {
                return Err(Error::InvalidInput(format!("site {q} out of range for {n} qubits")));
            }
            letters[q] = l;
        }
        Self::new(&letters, 1)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn sign(&self) -> i8 {
        if self.negative {
            -1
        } else {
            1
        }
    }

    pub fn with_sign(mut self, sign: i8) -> Self {
        self.negative = sign < 0;
        self
    }

    pub fn letter(&self, q: usize) -> Letter {
        let bit = 1u64 << (self.n_qubits - 1 - q);
        match (self.x & bit != 0, self.z & bit != 0) {
            (false, false) => Letter::I,
            (true, false) => Letter::X,
            (true, true) => Letter::Y,
            (false, true) => Letter::Z,
        }
    }

    /// Bitmask over basis-index bits of non-identity sites.
    pub fn support_mask(&self) -> u64 {
        self.x | self.z
    }

    /// Non-identity qubits, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n_qubits)
            .filter(|&q| self.letter(q) != Letter::I)
            .collect()
    }

    pub fn weight(&self) -> usize {
        self.support_mask().count_ones() as usize
    }

    pub fn is_identity(&self) -> bool {
        self.support_mask() == 0
    }

    pub fn commutes_with(&self, other: &Self) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// Symplectic vector `(x | z)` packed into one word.
    pub fn symplectic(&self) -> u64 {
        (self.x << self.n_qubits) | self.z
    }

    fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// Coefficient of `P|c>`, which equals `coeff * |c ^ x>`.
    fn column_coefficient(&self, c: usize) -> C64 {
        let mut phase = match self.y_count() % 4 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        };
        if (c as u64 & self.z).count_ones() % 2 == 1 {
            phase = -phase;
        }
        if self.negative {
            phase = -phase;
        }
        phase
    }

    /// Nonzero entries as `(row, col, value)`, one per column.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        let d = 1usize << self.n_qubits;
        (0..d).map(move |c| (c ^ self.x as usize, c, self.column_coefficient(c)))
    }

    pub fn matrix(&self) -> CMatrix {
        let d = 1usize << self.n_qubits;
        let mut m = CMatrix::zeros(d, d);
        for (r, c, v) in self.entries() {
            m[(r, c)] = v;
        }
        m
    }

    /// The string restricted to its support, as a `2^w x 2^w` matrix.
    pub fn local_matrix(&self) -> CMatrix {
        let letters: Vec<Letter> = self.support().iter().map(|&q| self.letter(q)).collect();
        if letters.is_empty() {
            return CMatrix::identity(1, 1).map(|z| if self.negative { -z } else { z });
        }
        PauliString::new(&letters, self.sign())
            .expect("nonempty support")
            .matrix()
    }

    /// `P * M` without forming `P`.
    pub fn apply_left(&self, m: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(m.nrows(), m.ncols());
        for (r, c, v) in self.entries() {
            // row r of P*M = v * row c of M
            for j in 0..m.ncols() {
                out[(r, j)] = v * m[(c, j)];
            }
        }
        out
    }

    pub fn apply_to_vector(&self, v: &DVector<C64>) -> DVector<C64> {
        let mut out = DVector::zeros(v.len());
        for (r, c, coeff) in self.entries() {
            out[r] = coeff * v[c];
        }
        out
    }

    /// `Re Tr(P M)`; real for Hermitian `M`.
    pub fn expectation(&self, m: &CMatrix) -> f64 {
        // Tr(P M) = sum_c P_{rc} M_{cr}
        self.entries().map(|(r, c, v)| (v * m[(c, r)]).re).sum()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", if self.negative { '-' } else { '+' })?;
        for q in 0..self.n_qubits {
            write!(f, "{}", self.letter(q).as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (sign, body) = match s.chars().next() {
            Some('+') => (1, &s[1..]),
            Some('-') => (-1, &s[1..]),
            _ => (1, s),
        };
        let letters = body
            .chars()
            .map(|c| {
                Letter::from_char(c)
                    .ok_or_else(|| Error::InvalidInput(format!("bad Pauli letter {c:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        PauliString::new(&letters, sign)
    }
}

impl TryFrom<String> for PauliString {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PauliString> for String {
    fn from(p: PauliString) -> Self {
        p.to_string()
    }
}

/// Rank over GF(2) of the symplectic vectors.
pub fn symplectic_rank(paulis: &[PauliString]) -> usize {
    let mut rows: Vec<u64> = paulis.iter().map(PauliString::symplectic).collect();
    let mut rank = 0;
    for bit in (0..64).rev() {
        let pivot = (rank..rows.len()).find(|&i| (rows[i] >> bit) & 1 == 1);
        if let Some(p) = pivot {
            rows.swap(rank, p);
            let pivot_row = rows[rank];
            for (i, row) in rows.iter_mut().enumerate() {
                if i != rank && (*row >> bit) & 1 == 1 {
                    *row ^= pivot_row;
                }
            }
            rank += 1;
        }
    }
    rank
}
