//! Exact algebra of Pauli strings in the symplectic bit-pair representation.
//!
//! An N-site Pauli string is stored as two bit masks `(x_mask, z_mask)`:
//! bit `i` of `x_mask` (`z_mask`) records an X (Z) component on site `i`,
//! and a set bit in both masks is a Y. Site operators are the Hermitian
//! matrices I, X, Y, Z themselves; all phase bookkeeping lives in products.
//!
//! Products, commutation checks and traces of ordered products are computed
//! with word-level bit operations, so moments of operator sums never require
//! a dense matrix. A dense Hermitian realization is available for small site
//! counts through [`to_dense`].
//!
//! Pauli words are one concrete choice of trace-orthogonal operator basis;
//! the moment machinery downstream only relies on that orthogonality, but
//! no other operator family is implemented here.

mod model;

pub use model::{build_model, Boundary, Couplings, ModelKind, ModelSpec};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Hard limit on the number of sites representable by the bit masks.
pub const MAX_SITES: usize = 128;

/// Default cap on dense realizations (dimension `2^14`).
pub const DEFAULT_DENSE_CAP: usize = 14;

/// A power of the imaginary unit: one of `{+1, +i, -1, -i}`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    /// Exponent `k` such that the phase equals `i^k`, with `k` in `0..4`.
    pub fn exponent(self) -> u8 {
        self.0
    }

    pub fn from_exponent(k: i64) -> Phase {
        Phase(k.rem_euclid(4) as u8)
    }

    pub fn compose(self, other: Phase) -> Phase {
        Phase((self.0 + other.0) % 4)
    }

    pub fn to_complex(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self.0 {
            0 => "+1",
            1 => "+i",
            2 => "-1",
            _ => "-i",
        })
    }
}

/// Single-site Pauli operator label.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SitePauli {
    I,
    X,
    Y,
    Z,
}

/// An N-site Pauli word in symplectic bit-pair representation.
///
/// The represented operator is Hermitian by construction: a site with both
/// the X and Z bit set is the operator Y itself, not the product XZ.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct PauliString {
    n_sites: u32,
    x_mask: u128,
    z_mask: u128,
}

impl PauliString {
    /// The identity string on `n_sites` sites.
    pub fn identity(n_sites: usize) -> Result<PauliString> {
        Self::from_masks(n_sites, 0, 0)
    }

    /// Build a string from raw masks. Masks must fit in `n_sites` bits.
    pub fn from_masks(n_sites: usize, x_mask: u128, z_mask: u128) -> Result<PauliString> {
        if n_sites == 0 || n_sites > MAX_SITES {
            return Err(Error::InvalidOptions(format!(
                "n_sites must be in 1..={MAX_SITES}, got {n_sites}"
            )));
        }
        let valid = if n_sites == MAX_SITES {
            u128::MAX
        } else {
            (1u128 << n_sites) - 1
        };
        if x_mask & !valid != 0 || z_mask & !valid != 0 {
            return Err(Error::InvalidOptions(format!(
                "mask has bits beyond site {n_sites}"
            )));
        }
        Ok(PauliString {
            n_sites: n_sites as u32,
            x_mask,
            z_mask,
        })
    }

    /// Build a string from per-site labels, e.g. `[(0, X), (3, Z)]`.
    /// Unlisted sites are identity.
    pub fn from_ops(
        n_sites: usize,
        ops: impl IntoIterator<Item = (usize, SitePauli)>,
    ) -> Result<PauliString> {
        let mut x = 0u128;
        let mut z = 0u128;
        for (site, op) in ops {
            if site >= n_sites {
                return Err(Error::InvalidOptions(format!(
                    "site {site} out of range for {n_sites} sites"
                )));
            }
            let bit = 1u128 << site;
            // Later entries overwrite earlier ones on the same site.
            x &= !bit;
            z &= !bit;
            match op {
                SitePauli::I => {}
                SitePauli::X => x |= bit,
                SitePauli::Y => {
                    x |= bit;
                    z |= bit;
                }
                SitePauli::Z => z |= bit,
            }
        }
        Self::from_masks(n_sites, x, z)
    }

    /// Parse a label such as `"XIZY"`; site 0 is the leftmost character.
    pub fn from_label(label: &str) -> Result<PauliString> {
        let ops = label
            .chars()
            .enumerate()
            .map(|(i, c)| {
                let op = match c {
                    'I' | '1' => SitePauli::I,
                    'X' => SitePauli::X,
                    'Y' => SitePauli::Y,
                    'Z' => SitePauli::Z,
                    _ => return Err(Error::Parse(format!("bad Pauli label char `{c}`"))),
                };
                Ok((i, op))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_ops(label.len(), ops)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites as usize
    }

    pub fn x_mask(&self) -> u128 {
        self.x_mask
    }

    pub fn z_mask(&self) -> u128 {
        self.z_mask
    }

    pub fn is_identity(&self) -> bool {
        self.x_mask == 0 && self.z_mask == 0
    }

    /// Number of non-identity sites.
    pub fn weight(&self) -> usize {
        (self.x_mask | self.z_mask).count_ones() as usize
    }

    /// Number of Y sites (sites with both bits set).
    pub fn y_count(&self) -> usize {
        (self.x_mask & self.z_mask).count_ones() as usize
    }

    pub fn site(&self, i: usize) -> SitePauli {
        let x = self.x_mask >> i & 1 != 0;
        let z = self.z_mask >> i & 1 != 0;
        match (x, z) {
            (false, false) => SitePauli::I,
            (true, false) => SitePauli::X,
            (true, true) => SitePauli::Y,
            (false, true) => SitePauli::Z,
        }
    }

    fn check_sites(&self, other: &PauliString) -> Result<()> {
        if self.n_sites != other.n_sites {
            return Err(Error::SiteMismatch {
                left: self.n_sites(),
                right: other.n_sites(),
            });
        }
        Ok(())
    }
}

impl std::fmt::Display for PauliString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in 0..self.n_sites() {
            let c = match self.site(i) {
                SitePauli::I => 'I',
                SitePauli::X => 'X',
                SitePauli::Y => 'Y',
                SitePauli::Z => 'Z',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Multiply two Pauli strings: `a · b = phase · product`.
///
/// The product masks are the XOR of the input masks; the phase accumulates
/// the per-site factors (e.g. `X·Y = +i Z`), evaluated word-wise with
/// popcounts.
pub fn pauli_mul(a: &PauliString, b: &PauliString) -> Result<(PauliString, Phase)> {
    a.check_sites(b)?;
    Ok(mul_unchecked(a, b))
}

fn mul_unchecked(a: &PauliString, b: &PauliString) -> (PauliString, Phase) {
    let x = a.x_mask ^ b.x_mask;
    let z = a.z_mask ^ b.z_mask;
    // Writing each site operator as W(x,z) = i^{xz} X^x Z^z, the product
    // W(x1,z1)·W(x2,z2) carries i^{x1·z1 + x2·z2 + 2·z1·x2 - x3·z3} W(x3,z3).
    let exp = (a.x_mask & a.z_mask).count_ones() as i64
        + (b.x_mask & b.z_mask).count_ones() as i64
        + 2 * (a.z_mask & b.x_mask).count_ones() as i64
        - (x & z).count_ones() as i64;
    (
        PauliString {
            n_sites: a.n_sites,
            x_mask: x,
            z_mask: z,
        },
        Phase::from_exponent(exp),
    )
}

/// Whether two strings commute, via the symplectic form
/// `popcount(a.x & b.z) + popcount(a.z & b.x) mod 2`.
pub fn commutes(a: &PauliString, b: &PauliString) -> Result<bool> {
    a.check_sites(b)?;
    let sym = (a.x_mask & b.z_mask).count_ones() + (a.z_mask & b.x_mask).count_ones();
    Ok(sym % 2 == 0)
}

/// Trace of an ordered product of Pauli strings.
///
/// Returns `phase · 2^N` when the ordered product is proportional to the
/// identity and exactly zero otherwise.
pub fn trace_product(strings: &[PauliString]) -> Result<Complex64> {
    let first = strings.first().ok_or(Error::Empty("trace_product"))?;
    let mut acc = *first;
    let mut phase = Phase::ONE;
    for s in &strings[1..] {
        acc.check_sites(s)?;
        let (p, ph) = mul_unchecked(&acc, s);
        acc = p;
        phase = phase.compose(ph);
    }
    if acc.is_identity() {
        let dim = (first.n_sites() as f64).exp2();
        Ok(phase.to_complex() * dim)
    } else {
        Ok(Complex64::new(0.0, 0.0))
    }
}

/// A weighted sum of Pauli strings with real coefficients: `H = Σ h_i τ_i`.
///
/// Duplicate strings are merged on construction and zero coefficients are
/// dropped, so the term list is a proper orthogonal decomposition.
#[derive(Clone, Debug)]
pub struct OperatorSum {
    n_sites: usize,
    terms: Vec<(f64, PauliString)>,
}

impl OperatorSum {
    pub fn new(n_sites: usize) -> Result<OperatorSum> {
        if n_sites == 0 || n_sites > MAX_SITES {
            return Err(Error::InvalidOptions(format!(
                "n_sites must be in 1..={MAX_SITES}, got {n_sites}"
            )));
        }
        Ok(OperatorSum {
            n_sites,
            terms: Vec::new(),
        })
    }

    pub fn from_terms(
        n_sites: usize,
        terms: impl IntoIterator<Item = (f64, PauliString)>,
    ) -> Result<OperatorSum> {
        let mut op = Self::new(n_sites)?;
        for (coeff, string) in terms {
            op.add_term(coeff, string)?;
        }
        Ok(op)
    }

    /// Add `coeff · string`, merging with an existing identical string.
    pub fn add_term(&mut self, coeff: f64, string: PauliString) -> Result<()> {
        if string.n_sites() != self.n_sites {
            return Err(Error::SiteMismatch {
                left: self.n_sites,
                right: string.n_sites(),
            });
        }
        if let Some(entry) = self.terms.iter_mut().find(|(_, s)| *s == string) {
            entry.0 += coeff;
            if entry.0 == 0.0 {
                self.terms.retain(|(_, s)| *s != string);
            }
            return Ok(());
        }
        if coeff != 0.0 {
            self.terms.push((coeff, string));
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Number of terms `M`.
    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    /// Coefficient of the identity string (0 if absent).
    pub fn identity_coefficient(&self) -> f64 {
        self.terms
            .iter()
            .find(|(_, s)| s.is_identity())
            .map_or(0.0, |(c, _)| *c)
    }

    /// Hilbert-space dimension `2^N`.
    pub fn dim(&self) -> usize {
        1usize << self.n_sites
    }

    /// Whether the dense realization has real entries (even Y-count in every
    /// term).
    pub fn is_real(&self) -> bool {
        self.terms.iter().all(|(_, s)| s.y_count() % 2 == 0)
    }
}

/// Dense Hermitian realization of an operator sum, `DEFAULT_DENSE_CAP` sites.
pub fn to_dense(op: &OperatorSum) -> Result<DMatrix<Complex64>> {
    to_dense_with_cap(op, DEFAULT_DENSE_CAP)
}

/// Dense realization with an explicit site cap.
///
/// Site `i` maps to bit `N-1-i` of the basis index, so the matrix equals the
/// Kronecker product of the site operators taken left to right.
pub fn to_dense_with_cap(op: &OperatorSum, cap: usize) -> Result<DMatrix<Complex64>> {
    let n = op.n_sites;
    if n > cap {
        return Err(Error::DenseCapExceeded { n_sites: n, cap });
    }
    let dim = 1usize << n;
    let mut mat = DMatrix::<Complex64>::zeros(dim, dim);
    for (coeff, string) in &op.terms {
        let rx = reverse_mask(string.x_mask, n);
        let rz = reverse_mask(string.z_mask, n);
        let amp = Phase::from_exponent(string.y_count() as i64).to_complex() * *coeff;
        for col in 0..dim {
            let row = col ^ rx;
            let sign = if ((rz & col).count_ones()) % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            mat[(row, col)] += amp * sign;
        }
    }
    Ok(mat)
}

/// Real dense realization; available when every term has an even Y-count.
pub fn to_dense_real(op: &OperatorSum, cap: usize) -> Result<Option<DMatrix<f64>>> {
    if !op.is_real() {
        return Ok(None);
    }
    let n = op.n_sites;
    if n > cap {
        return Err(Error::DenseCapExceeded { n_sites: n, cap });
    }
    let dim = 1usize << n;
    let mut mat = DMatrix::<f64>::zeros(dim, dim);
    for (coeff, string) in &op.terms {
        let rx = reverse_mask(string.x_mask, n);
        let rz = reverse_mask(string.z_mask, n);
        // Even Y-count: i^{y_count} is +/-1.
        let amp = if string.y_count() % 2 == 0 && string.y_count() % 4 != 0 {
            -*coeff
        } else {
            *coeff
        };
        for col in 0..dim {
            let row = col ^ rx;
            let sign = if ((rz & col).count_ones()) % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            mat[(row, col)] += amp * sign;
        }
    }
    Ok(Some(mat))
}

fn reverse_mask(mask: u128, n: usize) -> usize {
    let mut out = 0usize;
    for i in 0..n {
        if mask >> i & 1 != 0 {
            out |= 1 << (n - 1 - i);
        }
    }
    out
}
