//! Jordan-Wigner solution of the XY chain with multiple interactions.
//!
//! For odd `N` both momentum grids `x_k = 2 pi (k + off) / N`, `off` in
//! `{0, 1/2}`, carry one unpaired mode (`x = 0` resp. `x = pi`) whose
//! occupation is fixed by the fermion-parity boundary condition: occupied on
//! the integer grid, empty on the half-integer one. The grid with the lower
//! ground energy is the physical ground state.

use std::f64::consts::PI;

use nalgebra::{Complex, Matrix2, Matrix4};
use serde::{Deserialize, Serialize};

use crate::error::{QptError, Result};
use crate::hilbert::{ModelParams, ModelSpec};
use crate::measures::{tau_sef_from, LogBase, PairSource, TauConfig};
use crate::rdm::{Rdm1, Rdm2};

/// `epsilon_k` below this counts as a gapless grid point.
pub const GAPLESS_EPS: f64 = 1e-14;

/// Negative eigenvalues of an assembled pair matrix down to this are clipped.
pub const PSD_CLIP: f64 = 1e-8;

/// Momentum-grid choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KOffset {
    /// Whichever grid has the lower ground energy.
    #[default]
    Auto,
    /// `x_k = 2 pi k / N`.
    Integer,
    /// `x_k = 2 pi (k + 1/2) / N`.
    Half,
}

impl std::str::FromStr for KOffset {
    type Err = QptError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(KOffset::Auto),
            "0" | "integer" => Ok(KOffset::Integer),
            "0.5" | "1/2" | "half" => Ok(KOffset::Half),
            other => Err(QptError::InvalidConfig(format!("unknown k offset '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FfParams {
    pub gamma: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub n_sites: usize,
    #[serde(default)]
    pub k_offset: KOffset,
}

impl FfParams {
    pub fn new(gamma: f64, lambda: f64, alpha: f64, beta: f64, n_sites: usize) -> Result<Self> {
        let p = FfParams { gamma, lambda, alpha, beta, n_sites, k_offset: KOffset::Auto };
        p.validate()?;
        Ok(p)
    }

    pub fn with_offset(mut self, k_offset: KOffset) -> Self {
        self.k_offset = k_offset;
        self
    }

    /// XYMI couplings of a model spec; other families have no free-fermion form here.
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        match spec.params {
            ModelParams::Xymi { gamma, lambda, alpha, beta } => Self::new(gamma, lambda, alpha, beta, spec.n_sites),
            _ => Err(QptError::InvalidModel(format!("free-fermion engine only handles xymi, not {}", spec.family()))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 3 || self.n_sites % 2 == 0 {
            return Err(QptError::InvalidModel(format!("free-fermion chains need odd N >= 3, got {}", self.n_sites)));
        }
        for (name, v) in [("gamma", self.gamma), ("lambda", self.lambda), ("alpha", self.alpha), ("beta", self.beta)] {
            if !v.is_finite() {
                return Err(QptError::InvalidModel(format!("{name} = {v} is not finite")));
            }
        }
        Ok(())
    }

    /// `epsilon(x) = lambda - cos x - 2 alpha cos 2x - 2 beta cos 3x`.
    pub fn epsilon_bare(&self, x: f64) -> f64 {
        self.lambda - x.cos() - 2.0 * self.alpha * (2.0 * x).cos() - 2.0 * self.beta * (3.0 * x).cos()
    }

    fn momentum(&self, k: usize, half: bool) -> f64 {
        let off = if half { 0.5 } else { 0.0 };
        2.0 * PI * (k as f64 + off) / self.n_sites as f64
    }
}

/// `(epsilon_k, varepsilon_k)` at grid index `k` in `1..=N`.
///
/// With `KOffset::Auto` the grid of the ground state is used.
pub fn dispersion(p: &FfParams, k: usize) -> Result<(f64, f64)> {
    p.validate()?;
    if k == 0 || k > p.n_sites {
        return Err(QptError::IndexOutOfRange { index: k, n_sites: p.n_sites });
    }
    let half = match p.k_offset {
        KOffset::Integer => false,
        KOffset::Half => true,
        KOffset::Auto => select_half_grid(p),
    };
    let x = p.momentum(k, half);
    let e = p.epsilon_bare(x);
    Ok((e, e.hypot(p.gamma * x.sin())))
}

/// Ground energy of one grid sector (up to the constant shared by both).
fn sector_energy(p: &FfParams, half: bool) -> f64 {
    let n = p.n_sites;
    let unpaired = if half { (n - 1) / 2 } else { n };
    let mut energy = 0.0;
    for k in 1..=n {
        let x = p.momentum(k, half);
        let e = p.epsilon_bare(x);
        if k == unpaired {
            // occupied on the integer grid, empty on the half grid
            let t = if half { 1.0 } else { -1.0 };
            energy -= e * t;
        } else {
            energy -= e.hypot(p.gamma * x.sin());
        }
    }
    energy
}

fn select_half_grid(p: &FfParams) -> bool {
    sector_energy(p, true) < sector_energy(p, false)
}

/// Mode data and the cached `a_r` table at one parameter point.
#[derive(Debug, Clone)]
pub struct FfSolution {
    params: FfParams,
    half: bool,
    /// `2k + 2 off`, the momentum in units of `pi / N`.
    modes: Vec<usize>,
    /// `epsilon_k / varepsilon_k` (sign convention at gapless points).
    ratio: Vec<f64>,
    /// `gamma sin x_k / varepsilon_k`.
    skew: Vec<f64>,
    cos_table: Vec<f64>,
    sin_table: Vec<f64>,
    sz: f64,
    energy: f64,
    gapless_points: usize,
    r_table: usize,
    a_table: Vec<f64>,
}

impl FfSolution {
    /// Solves at `p` and tabulates `a_r` for `|r| <= r_max + 1`.
    pub fn new(p: &FfParams, r_max: usize) -> Result<Self> {
        p.validate()?;
        let n = p.n_sites;
        let half = match p.k_offset {
            KOffset::Integer => false,
            KOffset::Half => true,
            KOffset::Auto => select_half_grid(p),
        };
        let unpaired = if half { (n - 1) / 2 } else { n };
        let two_n = 2 * n;
        let cos_table: Vec<f64> = (0..two_n).map(|j| (PI * j as f64 / n as f64).cos()).collect();
        let sin_table: Vec<f64> = (0..two_n).map(|j| (PI * j as f64 / n as f64).sin()).collect();

        let mut modes = Vec::with_capacity(n);
        let mut ratio = Vec::with_capacity(n);
        let mut skew = Vec::with_capacity(n);
        let mut gapless_points = 0;
        for k in 1..=n {
            let m = (2 * k + usize::from(half)) % two_n;
            let x = p.momentum(k, half);
            let e = p.epsilon_bare(x);
            let s = p.gamma * sin_table[m];
            let big = e.hypot(s);
            let (t, g) = if k == unpaired {
                (if half { 1.0 } else { -1.0 }, 0.0)
            } else if big < GAPLESS_EPS {
                gapless_points += 1;
                (
                    if e > 0.0 {
                        1.0
                    } else if e < 0.0 {
                        -1.0
                    } else {
                        0.0
                    },
                    0.0,
                )
            } else {
                (e / big, s / big)
            };
            modes.push(m);
            ratio.push(t);
            skew.push(g);
        }
        let sz = ratio.iter().sum::<f64>() / n as f64;
        let mut sol = FfSolution {
            params: *p,
            half,
            modes,
            ratio,
            skew,
            cos_table,
            sin_table,
            sz,
            energy: sector_energy(p, half),
            gapless_points,
            r_table: 0,
            a_table: Vec::new(),
        };
        let r_table = (r_max + 1).min(n);
        sol.a_table = (-(r_table as isize)..=r_table as isize).map(|r| sol.a_direct(r)).collect();
        sol.r_table = r_table;
        Ok(sol)
    }

    pub fn params(&self) -> &FfParams {
        &self.params
    }

    /// The grid in use.
    pub fn k_offset(&self) -> KOffset {
        if self.half {
            KOffset::Half
        } else {
            KOffset::Integer
        }
    }

    pub fn n_sites(&self) -> usize {
        self.params.n_sites
    }

    pub fn magnetization(&self) -> f64 {
        self.sz
    }

    /// Sector ground energy, comparable between grids at the same couplings.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Grid points where `varepsilon_k < 1e-14` and the sign convention applied.
    pub fn gapless_points(&self) -> usize {
        self.gapless_points
    }

    fn a_direct(&self, r: isize) -> f64 {
        let two_n = 2 * self.params.n_sites as i64;
        let mut acc = 0.0;
        for ((&m, &t), &g) in self.modes.iter().zip(&self.ratio).zip(&self.skew) {
            let idx = (m as i64 * r as i64).rem_euclid(two_n) as usize;
            acc += self.cos_table[idx] * t + self.sin_table[idx] * g;
        }
        -acc / self.params.n_sites as f64
    }

    /// `a_r`, from the table when cached.
    pub fn a(&self, r: isize) -> f64 {
        if r.unsigned_abs() <= self.r_table {
            self.a_table[(r + self.r_table as isize) as usize]
        } else {
            self.a_direct(r)
        }
    }

    /// `<sigma^x_0 sigma^x_r>`, `<sigma^y_0 sigma^y_r>`, `<sigma^z_0 sigma^z_r>`.
    pub fn correlators(&self, r: usize) -> Result<Correlators> {
        if r == 0 {
            return Err(QptError::InvalidConfig("correlators need r >= 1".into()));
        }
        let xx = toeplitz_det(r, |d| self.a(d - 1))?;
        let yy = toeplitz_det(r, |d| self.a(d + 1))?;
        let ri = r as isize;
        let zz = self.sz * self.sz - self.a(ri) * self.a(-ri);
        Ok(Correlators { r, xx, yy, zz })
    }

    /// X-form pair matrix of sites `0` and `r`.
    pub fn rdm2(&self, r: usize) -> Result<Rdm2> {
        let c = self.correlators(r)?;
        let u_plus = 0.25 * (1.0 + 2.0 * self.sz + c.zz);
        let u_minus = 0.25 * (1.0 - 2.0 * self.sz + c.zz);
        let z = 0.25 * (1.0 - c.zz);
        let y_plus = 0.25 * (c.xx + c.yy);
        let y_minus = 0.25 * (c.xx - c.yy);
        let m = clip_x_form(u_plus, u_minus, z, y_plus, y_minus)?;
        Rdm2::from_matrix(m, 0, r % self.params.n_sites)
    }

    pub fn rdm1(&self) -> Result<Rdm1> {
        Rdm1::diag(0.5 * (1.0 + self.sz), 0)
    }

    /// Residual entanglement using translation and reflection symmetry.
    pub fn tau_sef(&self, cfg: &TauConfig) -> Result<f64> {
        Ok(tau_sef_from(self, cfg)?.tau)
    }
}

impl PairSource for FfSolution {
    fn ring_size(&self) -> usize {
        self.params.n_sites
    }

    fn anchor_rdm(&self) -> Result<Rdm1> {
        self.rdm1()
    }

    fn pair(&self, r: usize) -> Result<Rdm2> {
        self.rdm2(r)
    }

    fn reflection_symmetric(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlators {
    pub r: usize,
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
}

/// Determinant of the `n x n` matrix with entries `entry(i - j)`, by LU
/// with partial pivoting and log-magnitude accumulation.
pub fn toeplitz_det(n: usize, entry: impl Fn(isize) -> f64) -> Result<f64> {
    let mut m: Vec<f64> = (0..n * n).map(|k| entry((k / n) as isize - (k % n) as isize)).collect();
    let mut log_mag = 0.0;
    let mut sign = 1.0;
    for col in 0..n {
        let (piv, &best) = m[col * n..]
            .chunks(n)
            .map(|row| &row[col])
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .expect("non-empty column");
        if best == 0.0 {
            return Ok(0.0);
        }
        let piv = piv + col;
        if piv != col {
            for j in 0..n {
                m.swap(col * n + j, piv * n + j);
            }
            sign = -sign;
        }
        let p = m[col * n + col];
        log_mag += p.abs().ln();
        if p < 0.0 {
            sign = -sign;
        }
        for row in col + 1..n {
            let f = m[row * n + col] / p;
            if f != 0.0 {
                for j in col + 1..n {
                    m[row * n + j] -= f * m[col * n + j];
                }
            }
        }
    }
    if !(f64::MIN_POSITIVE.ln()..=f64::MAX.ln()).contains(&log_mag) {
        return Err(QptError::NumericalIntegrity(format!(
            "Toeplitz determinant magnitude e^{log_mag:.1} outside the representable range"
        )));
    }
    Ok(sign * log_mag.exp())
}

/// Builds the X-form matrix, clipping slightly negative eigenvalues of its
/// two 2x2 blocks and restoring unit trace.
fn clip_x_form(u_plus: f64, u_minus: f64, z: f64, y_plus: f64, y_minus: f64) -> Result<Matrix4<Complex<f64>>> {
    let outer = clip_block(Matrix2::new(u_plus, y_minus, y_minus, u_minus))?;
    let inner = clip_block(Matrix2::new(z, y_plus, y_plus, z))?;
    let trace = outer.trace() + inner.trace();
    let m = Rdm2::x_form(
        outer[(0, 0)] / trace,
        outer[(1, 1)] / trace,
        0.5 * (inner[(0, 0)] + inner[(1, 1)]) / trace,
        inner[(0, 1)] / trace,
        outer[(0, 1)] / trace,
    );
    Ok(m)
}

fn clip_block(b: Matrix2<f64>) -> Result<Matrix2<f64>> {
    let eig = b.symmetric_eigen();
    let lowest = eig.eigenvalues.min();
    if lowest >= 0.0 {
        return Ok(b);
    }
    if lowest < -PSD_CLIP {
        return Err(QptError::NumericalIntegrity(format!("free-fermion pair matrix has eigenvalue {lowest:.3e}")));
    }
    let clipped = eig.eigenvalues.map(|x| x.max(0.0));
    Ok(eig.eigenvectors * Matrix2::from_diagonal(&clipped) * eig.eigenvectors.transpose())
}

/// `<sigma^z>` on the selected grid.
pub fn magnetization(p: &FfParams) -> Result<f64> {
    Ok(FfSolution::new(p, 0)?.magnetization())
}

pub fn a_coeff(p: &FfParams, r: isize) -> Result<f64> {
    Ok(FfSolution::new(p, 0)?.a(r))
}

pub fn correlators(p: &FfParams, r: usize) -> Result<Correlators> {
    FfSolution::new(p, r)?.correlators(r)
}

pub fn rdm2_ff(p: &FfParams, r: usize) -> Result<Rdm2> {
    FfSolution::new(p, r)?.rdm2(r)
}

/// Default truncation for the free-fermion residual entanglement: every
/// distance up to 50, no early stop.
pub fn ff_tau_config() -> TauConfig {
    TauConfig { anchor: 0, r_max: Some(50), tail_tol: 0.0, base: LogBase::Two }
}

pub fn tau_sef_ff(p: &FfParams, cfg: &TauConfig) -> Result<f64> {
    let r = cfg.r_max.unwrap_or(p.n_sites / 2).min(p.n_sites / 2);
    FfSolution::new(p, r)?.tau_sef(cfg)
}
