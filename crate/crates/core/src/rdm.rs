//! Pure many-qubit states and their one- and two-site reduced density matrices.
//!
//! Sites are 0-based. The one-site basis is `(|up>, |down>)` and the two-site
//! basis is `(|up up>, |up down>, |down up>, |down down>)` with the first
//! slot belonging to site `i`.

use nalgebra::{Complex, Matrix2, Matrix4, SymmetricEigen};
use rand::Rng;

use crate::error::{QptError, Result};

type C64 = Complex<f64>;

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;

/// Normalized state vector over `2^N` basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    n_sites: usize,
    amplitudes: Vec<C64>,
}

impl PureState {
    /// Checks the length and normalizes.
    pub fn new(n_sites: usize, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != 1usize << n_sites {
            return Err(QptError::DimensionMismatch { expected: 1 << n_sites, got: amplitudes.len() });
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(QptError::NumericalIntegrity(format!("state norm {norm}")));
        }
        Ok(PureState { n_sites, amplitudes: amplitudes.into_iter().map(|a| a / norm).collect() })
    }

    pub(crate) fn from_amplitudes_unchecked(n_sites: usize, amplitudes: Vec<C64>) -> Self {
        PureState { n_sites, amplitudes }
    }

    pub fn from_real(n_sites: usize, amplitudes: &[f64]) -> Result<Self> {
        Self::new(n_sites, amplitudes.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Computational basis state; bit `j` set means site `j` is up.
    pub fn basis(n_sites: usize, state: u64) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n_sites];
        amps[state as usize] = C64::new(1.0, 0.0);
        PureState { n_sites, amplitudes: amps }
    }

    pub fn all_up(n_sites: usize) -> Self {
        Self::basis(n_sites, (1u64 << n_sites) - 1)
    }

    /// `(|up...up> + |down...down>) / sqrt 2`.
    pub fn ghz(n_sites: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n_sites];
        amps[0] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        amps[(1 << n_sites) - 1] = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        PureState { n_sites, amplitudes: amps }
    }

    /// Equal superposition of the single-up-spin states.
    pub fn w(n_sites: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n_sites];
        let a = 1.0 / (n_sites as f64).sqrt();
        for j in 0..n_sites {
            amps[1 << j] = C64::new(a, 0.0);
        }
        PureState { n_sites, amplitudes: amps }
    }

    /// Haar-random state (normalized complex Gaussian vector).
    pub fn random<R: Rng + ?Sized>(n_sites: usize, rng: &mut R) -> Self {
        let mut gauss = || {
            // Box-Muller
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        };
        let amps = (0..1usize << n_sites).map(|_| C64::new(gauss(), gauss())).collect();
        Self::new(n_sites, amps).expect("gaussian vector is nonzero")
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn with_global_phase(&self, phase: f64) -> Self {
        let p = C64::from_polar(1.0, phase);
        PureState { n_sites: self.n_sites, amplitudes: self.amplitudes.iter().map(|a| a * p).collect() }
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.n_sites {
            return Err(QptError::IndexOutOfRange { index: site, n_sites: self.n_sites });
        }
        Ok(())
    }
}

/// Anything with a spectrum that entropies can be taken of.
pub trait DensityMatrix {
    fn eigenvalues(&self) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rdm1 {
    pub matrix: Matrix2<C64>,
    pub site: usize,
}

impl Rdm1 {
    pub fn from_matrix(matrix: Matrix2<C64>, site: usize) -> Result<Self> {
        let rho = Rdm1 { matrix, site };
        check_density(&matrix, rho.eigenvalues(), "one-site")?;
        Ok(rho)
    }

    pub fn diag(p_up: f64, site: usize) -> Result<Self> {
        Self::from_matrix(
            Matrix2::new(C64::new(p_up, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0 - p_up, 0.0)),
            site,
        )
    }
}

impl DensityMatrix for Rdm1 {
    fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues_2(&self.matrix)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rdm2 {
    pub matrix: Matrix4<C64>,
    pub i: usize,
    pub j: usize,
    /// `j - i` as recorded at extraction.
    pub distance: isize,
}

impl Rdm2 {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn from_matrix(matrix: Matrix4<C64>, i: usize, j: usize) -> Result<Self> {
        let rho = Rdm2 { matrix, i, j, distance: j as isize - i as isize };
        check_density(&matrix, rho.eigenvalues(), "two-site")?;
        Ok(rho)
    }

    /// Real X-shaped matrix: diagonal `(u+, z, z, u-)`, anti-diagonal
    /// `(y-, y+, y+, y-)`.
    pub fn x_form(u_plus: f64, u_minus: f64, z: f64, y_plus: f64, y_minus: f64) -> Matrix4<C64> {
        let r = |x: f64| C64::new(x, 0.0);
        let mut m = Matrix4::zeros();
        m[(0, 0)] = r(u_plus);
        m[(1, 1)] = r(z);
        m[(2, 2)] = r(z);
        m[(3, 3)] = r(u_minus);
        m[(0, 3)] = r(y_minus);
        m[(3, 0)] = r(y_minus);
        m[(1, 2)] = r(y_plus);
        m[(2, 1)] = r(y_plus);
        m
    }

    /// Projector onto a normalized two-qubit pure state.
    pub fn projector(amps: [C64; 4]) -> Result<Self> {
        let n: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let v = nalgebra::Vector4::from_iterator(amps.iter().map(|a| a / n));
        Self::from_matrix(v * v.adjoint(), 0, 1)
    }

    /// Trace over the second slot.
    pub fn marginal_first(&self) -> Rdm1 {
        let m = &self.matrix;
        Rdm1 {
            matrix: Matrix2::new(
                m[(0, 0)] + m[(1, 1)],
                m[(0, 2)] + m[(1, 3)],
                m[(2, 0)] + m[(3, 1)],
                m[(2, 2)] + m[(3, 3)],
            ),
            site: self.i,
        }
    }

    /// Trace over the first slot.
    pub fn marginal_second(&self) -> Rdm1 {
        let m = &self.matrix;
        Rdm1 {
            matrix: Matrix2::new(
                m[(0, 0)] + m[(2, 2)],
                m[(0, 1)] + m[(2, 3)],
                m[(1, 0)] + m[(3, 2)],
                m[(1, 1)] + m[(3, 3)],
            ),
            site: self.j,
        }
    }

    /// Swap of the two slots.
    pub fn swapped(&self) -> Rdm2 {
        let perm = [0usize, 2, 1, 3];
        let m = Matrix4::from_fn(|r, c| self.matrix[(perm[r], perm[c])]);
        Rdm2 { matrix: m, i: self.j, j: self.i, distance: -self.distance }
    }

    /// Largest magnitude outside the X pattern.
    pub fn off_x_magnitude(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..4 {
            for c in 0..4 {
                if r != c && r + c != 3 {
                    worst = worst.max(self.matrix[(r, c)].norm());
                }
            }
        }
        worst
    }
}

impl DensityMatrix for Rdm2 {
    fn eigenvalues(&self) -> Vec<f64> {
        SymmetricEigen::new(self.matrix).eigenvalues.iter().copied().collect()
    }
}

fn hermitian_eigenvalues_2(m: &Matrix2<C64>) -> Vec<f64> {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = m[(0, 1)];
    let mean = 0.5 * (a + d);
    let half = (0.25 * (a - d).powi(2) + b.norm_sqr()).sqrt();
    vec![mean - half, mean + half]
}

fn check_density<const D: usize>(m: &nalgebra::SMatrix<C64, D, D>, eigenvalues: Vec<f64>, what: &str) -> Result<()> {
    let hermitian_err = (m - m.adjoint()).iter().map(|x| x.norm()).fold(0.0, f64::max);
    if hermitian_err > HERMITIAN_TOL {
        return Err(QptError::NumericalIntegrity(format!("{what} density matrix not Hermitian ({hermitian_err:.2e})")));
    }
    let trace = m.trace();
    if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
        return Err(QptError::NumericalIntegrity(format!("{what} density matrix trace {trace}")));
    }
    let min = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -PSD_TOL || !min.is_finite() {
        return Err(QptError::NumericalIntegrity(format!("{what} density matrix eigenvalue {min:.3e}")));
    }
    Ok(())
}

/// One-site reduced density matrix by partial trace.
pub fn rdm1(state: &PureState, site: usize) -> Result<Rdm1> {
    state.check_site(site)?;
    let bit = 1usize << site;
    let amps = &state.amplitudes;
    let (mut up, mut down, mut coh) = (0.0, 0.0, C64::new(0.0, 0.0));
    for rest in 0..amps.len() {
        if rest & bit != 0 {
            continue;
        }
        let a_up = amps[rest | bit];
        let a_down = amps[rest];
        up += a_up.norm_sqr();
        down += a_down.norm_sqr();
        coh += a_up * a_down.conj();
    }
    Rdm1::from_matrix(Matrix2::new(C64::new(up, 0.0), coh, coh.conj(), C64::new(down, 0.0)), site)
}

/// Two-site reduced density matrix of sites `i` (first slot) and `j`.
pub fn rdm2(state: &PureState, i: usize, j: usize) -> Result<Rdm2> {
    state.check_site(i)?;
    state.check_site(j)?;
    if i == j {
        return Err(QptError::InvalidConfig(format!("two-site density matrix needs distinct sites, got {i} twice")));
    }
    let (bi, bj) = (1usize << i, 1usize << j);
    // slot index 0..4 -> bits set for (up up, up down, down up, down down)
    let offsets = [bi | bj, bi, bj, 0];
    let amps = &state.amplitudes;
    let mut acc = [[C64::new(0.0, 0.0); 4]; 4];
    for rest in 0..amps.len() {
        if rest & (bi | bj) != 0 {
            continue;
        }
        let a = offsets.map(|o| amps[rest | o]);
        for p in 0..4 {
            if a[p] == C64::new(0.0, 0.0) {
                continue;
            }
            for q in 0..4 {
                acc[p][q] += a[p] * a[q].conj();
            }
        }
    }
    Rdm2::from_matrix(Matrix4::from_fn(|r, c| acc[r][c]), i, j)
}
