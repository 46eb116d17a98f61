//! Spin-1/2 Hilbert spaces and sparse Hamiltonians for the four chain families.
//!
//! Basis convention: site `j` (0-based) is bit `j` of the basis-state index,
//! spin-up is bit value 1. All chains are periodic.

use std::fmt;
use std::sync::Arc;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{QptError, Result};

/// Largest chain handled by the bitmask basis.
pub const MAX_SITES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Xxz,
    Ssh,
    SshXy,
    Xymi,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Xxz => "xxz",
            Family::Ssh => "ssh",
            Family::SshXy => "sshxy",
            Family::Xymi => "xymi",
        }
    }

    /// Names of the tunable couplings, in canonical order.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Family::Xxz => &["delta"],
            Family::Ssh => &["eta"],
            Family::SshXy => &["gamma1", "gamma2"],
            Family::Xymi => &["gamma", "lambda", "alpha", "beta"],
        }
    }

    pub fn conserves_sz(self) -> bool {
        matches!(self, Family::Xxz | Family::Ssh)
    }

    /// Translation period of the Hamiltonian in sites.
    pub fn unit_cell(self) -> usize {
        match self {
            Family::Xxz | Family::Xymi => 1,
            Family::Ssh | Family::SshXy => 2,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = QptError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "xxz" => Ok(Family::Xxz),
            "ssh" => Ok(Family::Ssh),
            "sshxy" | "ssh-xy" | "ssh_xy" => Ok(Family::SshXy),
            "xymi" => Ok(Family::Xymi),
            other => Err(QptError::InvalidModel(format!("unknown model family '{other}'"))),
        }
    }
}

/// Family tag plus couplings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ModelParams {
    Xxz {
        delta: f64,
    },
    Ssh {
        eta: f64,
    },
    #[serde(rename = "sshxy")]
    SshXy {
        gamma1: f64,
        gamma2: f64,
    },
    Xymi {
        gamma: f64,
        lambda: f64,
        alpha: f64,
        beta: f64,
    },
}

impl ModelParams {
    pub fn family(&self) -> Family {
        match self {
            ModelParams::Xxz { .. } => Family::Xxz,
            ModelParams::Ssh { .. } => Family::Ssh,
            ModelParams::SshXy { .. } => Family::SshXy,
            ModelParams::Xymi { .. } => Family::Xymi,
        }
    }

    /// All-zero couplings for a family.
    pub fn zeros(family: Family) -> Self {
        match family {
            Family::Xxz => ModelParams::Xxz { delta: 0.0 },
            Family::Ssh => ModelParams::Ssh { eta: 0.0 },
            Family::SshXy => ModelParams::SshXy { gamma1: 0.0, gamma2: 0.0 },
            Family::Xymi => ModelParams::Xymi { gamma: 0.0, lambda: 0.0, alpha: 0.0, beta: 0.0 },
        }
    }

    fn values(&self) -> Vec<f64> {
        match *self {
            ModelParams::Xxz { delta } => vec![delta],
            ModelParams::Ssh { eta } => vec![eta],
            ModelParams::SshXy { gamma1, gamma2 } => vec![gamma1, gamma2],
            ModelParams::Xymi { gamma, lambda, alpha, beta } => vec![gamma, lambda, alpha, beta],
        }
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        let names = self.family().param_names();
        names
            .iter()
            .position(|n| *n == name)
            .map(|i| self.values()[i])
            .ok_or_else(|| unknown_param(self.family(), name))
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let family = self.family();
        let slot = match (self, name) {
            (ModelParams::Xxz { delta }, "delta") => delta,
            (ModelParams::Ssh { eta }, "eta") => eta,
            (ModelParams::SshXy { gamma1, .. }, "gamma1") => gamma1,
            (ModelParams::SshXy { gamma2, .. }, "gamma2") => gamma2,
            (ModelParams::Xymi { gamma, .. }, "gamma") => gamma,
            (ModelParams::Xymi { lambda, .. }, "lambda") => lambda,
            (ModelParams::Xymi { alpha, .. }, "alpha") => alpha,
            (ModelParams::Xymi { beta, .. }, "beta") => beta,
            _ => return Err(unknown_param(family, name)),
        };
        *slot = value;
        Ok(())
    }
}

fn unknown_param(family: Family, name: &str) -> QptError {
    QptError::InvalidModel(format!(
        "family {family} has no parameter '{name}' (expected one of {:?})",
        family.param_names()
    ))
}

/// A periodic spin-1/2 chain of one of the supported families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub params: ModelParams,
    pub n_sites: usize,
}

impl ModelSpec {
    pub fn new(params: ModelParams, n_sites: usize) -> Result<Self> {
        let spec = ModelSpec { params, n_sites };
        spec.validate()?;
        Ok(spec)
    }

    pub fn xxz(delta: f64, n_sites: usize) -> Result<Self> {
        Self::new(ModelParams::Xxz { delta }, n_sites)
    }

    pub fn ssh(eta: f64, n_sites: usize) -> Result<Self> {
        Self::new(ModelParams::Ssh { eta }, n_sites)
    }

    pub fn sshxy(gamma1: f64, gamma2: f64, n_sites: usize) -> Result<Self> {
        Self::new(ModelParams::SshXy { gamma1, gamma2 }, n_sites)
    }

    pub fn xymi(gamma: f64, lambda: f64, alpha: f64, beta: f64, n_sites: usize) -> Result<Self> {
        Self::new(ModelParams::Xymi { gamma, lambda, alpha, beta }, n_sites)
    }

    pub fn family(&self) -> Family {
        self.params.family()
    }

    pub fn validate(&self) -> Result<()> {
        let family = self.family();
        if self.n_sites < 3 {
            return Err(QptError::InvalidModel(format!("n_sites must be at least 3, got {}", self.n_sites)));
        }
        if family.unit_cell() == 2 && self.n_sites % 2 != 0 {
            return Err(QptError::InvalidModel(format!(
                "{family} needs an even number of sites, got {}",
                self.n_sites
            )));
        }
        if let Some(bad) = self.params.values().iter().find(|v| !v.is_finite()) {
            return Err(QptError::InvalidModel(format!("non-finite coupling {bad}")));
        }
        Ok(())
    }

    /// Copy with one named coupling replaced.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self> {
        let mut next = *self;
        next.params.set(name, value)?;
        next.validate()?;
        Ok(next)
    }

    /// The Hamiltonian as a sum of real-coefficient Pauli strings.
    pub fn pauli_terms(&self) -> Vec<PauliTerm> {
        use Pauli::{X, Y, Z};
        let n = self.n_sites;
        let site = |j: usize, k: isize| ((j as isize + k).rem_euclid(n as isize)) as usize;
        let mut terms = Vec::new();
        match self.params {
            ModelParams::Xxz { delta } => {
                for j in 0..n {
                    let k = site(j, 1);
                    terms.push(PauliTerm::new(1.0, &[(j, X), (k, X)]));
                    terms.push(PauliTerm::new(1.0, &[(j, Y), (k, Y)]));
                    terms.push(PauliTerm::new(delta, &[(j, Z), (k, Z)]));
                }
            }
            ModelParams::Ssh { eta } => {
                for j in 0..n {
                    let k = site(j, 1);
                    // even j: intra-cell (A,B) bond; odd j: inter-cell bond
                    let c = if j % 2 == 0 { (1.0 + eta) / 2.0 } else { (1.0 - eta) / 2.0 };
                    terms.push(PauliTerm::new(-c, &[(j, X), (k, X)]));
                    terms.push(PauliTerm::new(-c, &[(j, Y), (k, Y)]));
                }
            }
            ModelParams::SshXy { gamma1, gamma2 } => {
                for j in 0..n {
                    let k = site(j, 1);
                    let g = if j % 2 == 0 { gamma1 } else { gamma2 };
                    terms.push(PauliTerm::new(-(1.0 + g) / 2.0, &[(j, X), (k, X)]));
                    terms.push(PauliTerm::new(-(1.0 - g) / 2.0, &[(j, Y), (k, Y)]));
                }
            }
            ModelParams::Xymi { gamma, lambda, alpha, beta } => {
                for j in 0..n {
                    let (jm, jp, jpp) = (site(j, -1), site(j, 1), site(j, 2));
                    terms.push(PauliTerm::new(-(1.0 + gamma) / 2.0, &[(j, X), (jp, X)]));
                    terms.push(PauliTerm::new(-(1.0 - gamma) / 2.0, &[(j, Y), (jp, Y)]));
                    terms.push(PauliTerm::new(-lambda, &[(j, Z)]));
                    terms.push(PauliTerm::new(-alpha, &[(jm, X), (j, Z), (jp, X)]));
                    terms.push(PauliTerm::new(-alpha, &[(jm, Y), (j, Z), (jp, Y)]));
                    terms.push(PauliTerm::new(-beta, &[(jm, X), (j, Z), (jp, Z), (jpp, X)]));
                    terms.push(PauliTerm::new(-beta, &[(jm, Y), (j, Z), (jp, Z), (jpp, Y)]));
                }
            }
        }
        terms.retain(|t| t.coeff != 0.0);
        terms
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

/// `coeff * P_{s1} P_{s2} ...`; operators are applied right to left, so a
/// site may appear more than once (short rings wrap the four-spin term).
#[derive(Debug, Clone, PartialEq)]
pub struct PauliTerm {
    pub coeff: f64,
    pub ops: Vec<(usize, Pauli)>,
}

impl PauliTerm {
    pub fn new(coeff: f64, ops: &[(usize, Pauli)]) -> Self {
        PauliTerm { coeff, ops: ops.to_vec() }
    }

    /// Image of basis state `state` and the complex amplitude picked up.
    pub fn apply_to_basis(&self, state: u64) -> (u64, Complex<f64>) {
        let mut s = state;
        // phase = sign * i^quarter
        let mut sign = 1.0;
        let mut quarter = 0u32;
        for &(site, op) in self.ops.iter().rev() {
            let up = (s >> site) & 1 == 1;
            match op {
                Pauli::X => s ^= 1 << site,
                Pauli::Y => {
                    // Y|up> = i|down>, Y|down> = -i|up>
                    quarter += 1;
                    if !up {
                        sign = -sign;
                    }
                    s ^= 1 << site;
                }
                Pauli::Z => {
                    if !up {
                        sign = -sign;
                    }
                }
            }
        }
        let phase = match quarter % 4 {
            0 => Complex::new(sign, 0.0),
            1 => Complex::new(0.0, sign),
            2 => Complex::new(-sign, 0.0),
            _ => Complex::new(0.0, -sign),
        };
        (s, phase * self.coeff)
    }
}

/// Fixed total-S_z block, labelled by the number of up spins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sector {
    pub n_up: usize,
}

impl Sector {
    pub fn new(n_up: usize) -> Self {
        Sector { n_up }
    }

    /// Zero magnetization block; requires even `n_sites`.
    pub fn zero_magnetization(n_sites: usize) -> Result<Self> {
        if n_sites % 2 != 0 {
            return Err(QptError::InvalidModel(format!("S_z = 0 needs an even number of sites, got {n_sites}")));
        }
        Ok(Sector { n_up: n_sites / 2 })
    }

    /// Total S_z (spin-1/2 units) for a chain of `n_sites`.
    pub fn sz(&self, n_sites: usize) -> f64 {
        self.n_up as f64 - n_sites as f64 / 2.0
    }
}

/// Ascending list of bitmasks with a fixed number of up spins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisMap {
    n_sites: usize,
    sector: Sector,
    states: Vec<u64>,
}

impl BasisMap {
    pub fn new(n_sites: usize, sector: Sector) -> Result<Self> {
        if n_sites > MAX_SITES {
            return Err(QptError::InvalidModel(format!("at most {MAX_SITES} sites supported")));
        }
        if sector.n_up > n_sites {
            return Err(QptError::InvalidModel(format!("sector with {} up spins on {n_sites} sites", sector.n_up)));
        }
        let k = sector.n_up;
        let mut states = Vec::with_capacity(binomial(n_sites, k));
        if k == 0 {
            states.push(0);
        } else {
            let limit = 1u64 << n_sites;
            let mut v: u64 = (1u64 << k) - 1;
            // Gosper's hack enumerates same-popcount masks in ascending order
            while v < limit {
                states.push(v);
                let c = v & v.wrapping_neg();
                let r = v + c;
                v = (((r ^ v) >> 2) / c) | r;
            }
        }
        Ok(BasisMap { n_sites, sector, states })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn state(&self, index: usize) -> u64 {
        self.states[index]
    }

    pub fn index_of(&self, state: u64) -> Option<usize> {
        self.states.binary_search(&state).ok()
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Real symmetric Hamiltonian in compressed-row form.
///
/// All four families have real matrix elements in the S_z basis, so values
/// are stored as `f64`; [`SparseHamiltonian::entries`] exposes them as
/// complex triplets for generic consumers.
#[derive(Debug, Clone)]
pub struct SparseHamiltonian {
    dim: usize,
    n_sites: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    basis: Option<Arc<BasisMap>>,
}

impl SparseHamiltonian {
    /// Finalizes coordinate-list entries: sorted by row then column,
    /// duplicates summed, exact zeros dropped.
    pub fn from_triplets(
        dim: usize,
        n_sites: usize,
        mut triplets: Vec<(usize, usize, f64)>,
        basis: Option<Arc<BasisMap>>,
    ) -> Self {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|t| t.2 != 0.0);
        let mut row_ptr = vec![0usize; dim + 1];
        for t in &merged {
            row_ptr[t.0 + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = merged.iter().map(|t| t.1).collect();
        let values = merged.iter().map(|t| t.2).collect();
        SparseHamiltonian { dim, n_sites, row_ptr, col_idx, values, basis }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn sector(&self) -> Option<Sector> {
        self.basis.as_ref().map(|b| b.sector())
    }

    pub fn basis(&self) -> Option<&Arc<BasisMap>> {
        self.basis.as_ref()
    }

    /// Bitmask of the basis state behind row/column `index`.
    pub fn basis_state(&self, index: usize) -> u64 {
        match &self.basis {
            Some(b) => b.state(index),
            None => index as u64,
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex<f64>)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], Complex::new(self.values[k], 0.0)))
        })
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|(cc, _)| *cc == c).map(|(_, v)| v).unwrap_or(0.0)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (0..self.dim).all(|r| self.row(r).all(|(c, v)| (self.get(c, r) - v).abs() <= tol))
    }

    /// `out = H v`.
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(QptError::DimensionMismatch { expected: self.dim, got: v.len() });
        }
        if out.len() != self.dim {
            return Err(QptError::DimensionMismatch { expected: self.dim, got: out.len() });
        }
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * v[self.col_idx[k]];
            }
            *o = acc;
        }
        Ok(())
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.apply_into(v, &mut out)?;
        Ok(out)
    }

    pub fn apply_complex(&self, v: &[Complex<f64>]) -> Result<Vec<Complex<f64>>> {
        if v.len() != self.dim {
            return Err(QptError::DimensionMismatch { expected: self.dim, got: v.len() });
        }
        Ok((0..self.dim).map(|r| self.row(r).map(|(c, x)| v[c] * x).sum()).collect())
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }
}

/// Assembles the Hamiltonian of `spec`, optionally restricted to a sector.
pub fn build_hamiltonian(spec: &ModelSpec, sector: Option<Sector>) -> Result<SparseHamiltonian> {
    spec.validate()?;
    let n = spec.n_sites;
    if n > MAX_SITES {
        return Err(QptError::InvalidModel(format!("at most {MAX_SITES} sites supported")));
    }
    let family = spec.family();
    let basis = match sector {
        Some(s) => {
            if !family.conserves_sz() {
                return Err(QptError::UnsupportedSector { family: family.name() });
            }
            Some(Arc::new(BasisMap::new(n, s)?))
        }
        None => None,
    };
    let dim = basis.as_ref().map_or(1usize << n, |b| b.len());
    let terms = spec.pauli_terms();
    let mut triplets = Vec::with_capacity(dim * (terms.len() / 2 + 1));
    // XX and YY move states out of a sector individually; only their sum
    // conserves S_z, so images are merged per column before sector lookup.
    let mut images: Vec<(u64, Complex<f64>)> = Vec::with_capacity(terms.len());
    for col in 0..dim {
        let state = basis.as_ref().map_or(col as u64, |b| b.state(col));
        images.clear();
        for term in &terms {
            let (image, amp) = term.apply_to_basis(state);
            match images.iter_mut().find(|(s, _)| *s == image) {
                Some(slot) => slot.1 += amp,
                None => images.push((image, amp)),
            }
        }
        for &(image, amp) in &images {
            if amp.norm() <= 1e-14 * (1.0 + amp.re.abs()) {
                continue;
            }
            if amp.im.abs() > 1e-12 {
                return Err(QptError::NumericalIntegrity(format!(
                    "imaginary matrix element {amp} in a real Hamiltonian"
                )));
            }
            let row = match &basis {
                Some(b) => b.index_of(image).ok_or_else(|| {
                    QptError::NumericalIntegrity(format!("term maps basis state {state:#b} outside its sector"))
                })?,
                None => image as usize,
            };
            triplets.push((row, col, amp.re));
        }
    }
    Ok(SparseHamiltonian::from_triplets(dim, n, triplets, basis))
}

/// Cyclic translation by `shift` sites (site j -> j + shift) of a basis state.
pub fn translate_state(state: u64, n_sites: usize, shift: usize) -> u64 {
    let shift = shift % n_sites;
    if shift == 0 {
        return state;
    }
    let mask = (1u64 << n_sites) - 1;
    ((state << shift) | (state >> (n_sites - shift))) & mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lowest_dense(h: &SparseHamiltonian) -> (f64, nalgebra::DVector<f64>) {
        let eig = SymmetricEigen::new(h.to_dense());
        let i = eig.eigenvalues.argmin().0;
        (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned())
    }

    #[test]
    fn xxz_three_sites_ground_energy() {
        let h = build_hamiltonian(&ModelSpec::xxz(1.0, 3).unwrap(), None).unwrap();
        assert_eq!(h.dim(), 8);
        let (e0, _) = lowest_dense(&h);
        assert!((e0 + 3.0).abs() < 1e-12, "{e0}");
    }

    #[test]
    fn ssh_eta_one_decouples_dimers() {
        let spec = ModelSpec::ssh(1.0, 4).unwrap();
        let terms = spec.pauli_terms();
        // inter-cell bonds start on odd sites and carry (1 - eta)/2 = 0
        assert!(terms.iter().all(|t| t.ops[0].0 % 2 == 0));
        let h = build_hamiltonian(&spec, None).unwrap();
        for r in 0..h.dim() {
            for (c, _) in h.row(r) {
                let flipped = h.basis_state(r) ^ h.basis_state(c);
                assert!(flipped == 0 || flipped == 0b0011 || flipped == 0b1100);
            }
        }
    }

    #[test]
    fn xx_limit_of_xymi_conserves_magnetization() {
        let h = build_hamiltonian(&ModelSpec::xymi(0.0, 0.0, 0.0, 0.0, 5).unwrap(), None).unwrap();
        for (r, c, _) in h.entries() {
            assert_eq!((r as u64).count_ones(), (c as u64).count_ones(), "entry ({r},{c}) changes S_z");
        }
    }

    #[test]
    fn apply_zero_and_eigenvector() {
        let h = build_hamiltonian(&ModelSpec::xxz(1.0, 3).unwrap(), None).unwrap();
        assert!(h.apply(&[0.0; 8]).unwrap().iter().all(|x| *x == 0.0));
        let (e0, v) = lowest_dense(&h);
        let hv = h.apply(v.as_slice()).unwrap();
        for (a, b) in hv.iter().zip(v.iter()) {
            assert!((a - e0 * b).abs() < 1e-10);
        }
        assert!((e0 + 3.0).abs() < 1e-10);
    }

    #[test]
    fn apply_twice_matches_dense_square() {
        let h = build_hamiltonian(&ModelSpec::xymi(0.3, 0.7, 0.4, -0.2, 4).unwrap(), None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let v: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let twice = h.apply(&h.apply(&v).unwrap()).unwrap();
        let d = h.to_dense();
        let dense = &d * &d * nalgebra::DVector::from_vec(v);
        for (a, b) in twice.iter().zip(dense.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let h = build_hamiltonian(&ModelSpec::xxz(1.0, 3).unwrap(), None).unwrap();
        assert_eq!(h.apply(&[1.0; 4]).unwrap_err(), QptError::DimensionMismatch { expected: 8, got: 4 });
    }

    #[test]
    fn invalid_models_are_rejected() {
        assert!(matches!(ModelSpec::ssh(0.0, 5), Err(QptError::InvalidModel(_))));
        assert!(matches!(ModelSpec::sshxy(0.0, 0.0, 7), Err(QptError::InvalidModel(_))));
        assert!(matches!(ModelSpec::xxz(1.0, 2), Err(QptError::InvalidModel(_))));
        assert!(matches!(ModelSpec::xxz(f64::NAN, 4), Err(QptError::InvalidModel(_))));
        let spec = ModelSpec::xymi(0.1, 0.2, 0.3, 0.4, 5).unwrap();
        assert_eq!(
            build_hamiltonian(&spec, Some(Sector::new(2))).unwrap_err(),
            QptError::UnsupportedSector { family: "xymi" }
        );
        let spec = ModelSpec::sshxy(0.1, 0.2, 6).unwrap();
        assert!(matches!(build_hamiltonian(&spec, Some(Sector::new(3))), Err(QptError::UnsupportedSector { .. })));
    }

    #[test]
    fn basis_map_is_ascending_and_bijective() {
        let b = BasisMap::new(8, Sector::new(3)).unwrap();
        assert_eq!(b.len(), binomial(8, 3));
        assert!(b.states().windows(2).all(|w| w[0] < w[1]));
        for (i, &s) in b.states().iter().enumerate() {
            assert_eq!(s.count_ones(), 3);
            assert_eq!(b.index_of(s), Some(i));
        }
        assert_eq!(BasisMap::new(5, Sector::new(0)).unwrap().states(), &[0]);
        assert_eq!(BasisMap::new(5, Sector::new(5)).unwrap().states(), &[31]);
    }

    #[test]
    fn sector_blocks_match_full_space() {
        for n in [4usize, 6, 8] {
            for delta in [-1.3, 0.4, 1.7] {
                let spec = ModelSpec::xxz(delta, n).unwrap();
                let full = build_hamiltonian(&spec, None).unwrap();
                for n_up in 0..=n {
                    let h = build_hamiltonian(&spec, Some(Sector::new(n_up))).unwrap();
                    assert_eq!(h.dim(), binomial(n, n_up));
                    for r in 0..h.dim() {
                        for c in 0..h.dim() {
                            let (sr, sc) = (h.basis_state(r) as usize, h.basis_state(c) as usize);
                            assert_eq!(h.get(r, c), full.get(sr, sc));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn pauli_products_on_repeated_sites() {
        // X_0 X_0 = identity, Y_0 Z_0 = i X_0
        let t = PauliTerm::new(1.0, &[(0, Pauli::X), (0, Pauli::X)]);
        assert_eq!(t.apply_to_basis(0b1), (0b1, Complex::new(1.0, 0.0)));
        let t = PauliTerm::new(1.0, &[(0, Pauli::Y), (0, Pauli::Z)]);
        assert_eq!(t.apply_to_basis(0b1), (0b0, Complex::new(0.0, 1.0)));
        assert_eq!(t.apply_to_basis(0b0), (0b1, Complex::new(0.0, 1.0)));
    }

    #[test]
    fn translate_state_wraps() {
        assert_eq!(translate_state(0b1001, 4, 1), 0b0011);
        assert_eq!(translate_state(0b1001, 4, 4), 0b1001);
    }
}
