//! Standard 1D spin-chain models as operator sums.

use serde::{Deserialize, Serialize};

use super::{OperatorSum, PauliString, SitePauli};
use crate::error::{Error, Result};

/// Named chain models buildable through [`build_model`].
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// `H = J Σ Z_i Z_{i+1}` (no field).
    ClassicalIsing,
    /// `H = J Σ Z_i Z_{i+1} + g Σ X_i`.
    TransverseIsing,
    /// `H = J Σ (X_i X_{i+1} + Y_i Y_{i+1} + Z_i Z_{i+1})`.
    Xxx,
    /// `H = Σ (XX + YY + Δ ZZ) nearest + j2 Σ (XX + YY + Δ ZZ) next-nearest`.
    XxzNnn,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::ClassicalIsing => "classical-ising",
            ModelKind::TransverseIsing => "transverse-ising",
            ModelKind::Xxx => "xxx",
            ModelKind::XxzNnn => "xxz-nnn",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<ModelKind> {
        match s {
            "classical-ising" => Ok(ModelKind::ClassicalIsing),
            "transverse-ising" => Ok(ModelKind::TransverseIsing),
            "xxx" => Ok(ModelKind::Xxx),
            "xxz-nnn" => Ok(ModelKind::XxzNnn),
            other => Err(Error::UnknownModel(other.to_string())),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Boundary condition of the chain.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

/// Coupling constants; fields not relevant to a model are ignored.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct Couplings {
    /// Exchange / bond coupling.
    pub j: f64,
    /// Transverse field strength.
    pub g: f64,
    /// ZZ anisotropy of the XXZ model.
    pub delta: f64,
    /// Next-nearest-neighbor coupling.
    pub j2: f64,
}

impl Default for Couplings {
    fn default() -> Self {
        Couplings {
            j: 1.0,
            g: 1.0,
            delta: 0.5,
            j2: 0.5,
        }
    }
}

/// Deserializable description of a chain model.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model: ModelKind,
    pub length: usize,
    #[serde(default)]
    pub couplings: Couplings,
    #[serde(default)]
    pub boundary: Boundary,
}

impl ModelSpec {
    pub fn new(model: ModelKind, length: usize) -> Self {
        ModelSpec {
            model,
            length,
            couplings: Couplings::default(),
            boundary: Boundary::Open,
        }
    }
}

/// Build the operator sum for a named chain model.
///
/// The term count scales linearly with the chain length for every model.
pub fn build_model(spec: &ModelSpec) -> Result<OperatorSum> {
    let l = spec.length;
    if l < 2 {
        return Err(Error::ChainTooShort(l));
    }
    let c = &spec.couplings;
    let mut op = OperatorSum::new(l)?;

    let bonds = |range: usize| -> Vec<(usize, usize)> {
        let mut v: Vec<(usize, usize)> = (0..l.saturating_sub(range))
            .map(|i| (i, i + range))
            .collect();
        if spec.boundary == Boundary::Periodic {
            // Wrap-around bonds, skipping duplicates on tiny chains.
            for i in (l - range)..l {
                let j = (i + range) % l;
                if j != i && !v.contains(&(j, i)) && !v.contains(&(i, j)) {
                    v.push((i, j));
                }
            }
        }
        v
    };

    let add_pair = |op: &mut OperatorSum, coeff: f64, i: usize, j: usize, p: SitePauli| {
        let s = PauliString::from_ops(l, [(i, p), (j, p)]).expect("sites in range");
        op.add_term(coeff, s).expect("matching site count");
    };

    match spec.model {
        ModelKind::ClassicalIsing => {
            for (i, j) in bonds(1) {
                add_pair(&mut op, c.j, i, j, SitePauli::Z);
            }
        }
        ModelKind::TransverseIsing => {
            for (i, j) in bonds(1) {
                add_pair(&mut op, c.j, i, j, SitePauli::Z);
            }
            for i in 0..l {
                let s = PauliString::from_ops(l, [(i, SitePauli::X)])?;
                op.add_term(c.g, s)?;
            }
        }
        ModelKind::Xxx => {
            for (i, j) in bonds(1) {
                add_pair(&mut op, c.j, i, j, SitePauli::X);
                add_pair(&mut op, c.j, i, j, SitePauli::Y);
                add_pair(&mut op, c.j, i, j, SitePauli::Z);
            }
        }
        ModelKind::XxzNnn => {
            for (i, j) in bonds(1) {
                add_pair(&mut op, 1.0, i, j, SitePauli::X);
                add_pair(&mut op, 1.0, i, j, SitePauli::Y);
                add_pair(&mut op, c.delta, i, j, SitePauli::Z);
            }
            for (i, j) in bonds(2) {
                add_pair(&mut op, c.j2, i, j, SitePauli::X);
                add_pair(&mut op, c.j2, i, j, SitePauli::Y);
                add_pair(&mut op, c.j2 * c.delta, i, j, SitePauli::Z);
            }
        }
    }
    Ok(op)
}
