//! Entanglement and correlation detectors built on reduced density matrices.

use std::f64::consts::{FRAC_PI_2, LN_2, PI};

use nalgebra::{Complex, Matrix4, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{QptError, Result};
use crate::rdm::{rdm1, rdm2, DensityMatrix, PureState, Rdm1, Rdm2};

type C64 = Complex<f64>;

/// Eigenvalues below this contribute nothing to an entropy.
pub const ENTROPY_CUTOFF: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Two,
    E,
}

impl LogBase {
    /// Converts a quantity measured in nats.
    pub fn from_nats(self, nats: f64) -> f64 {
        match self {
            LogBase::Two => nats / LN_2,
            LogBase::E => nats,
        }
    }
}

/// `-sum p ln p` over the given weights, dropping those below the cutoff.
fn shannon_nats(weights: impl IntoIterator<Item = f64>) -> f64 {
    weights.into_iter().filter(|&p| p > ENTROPY_CUTOFF).map(|p| -p * p.ln()).sum::<f64>().max(0.0)
}

/// Binary entropy in bits, with `0 log 0 = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    LogBase::Two.from_nats(shannon_nats([p, 1.0 - p]))
}

pub fn vn_entropy<D: DensityMatrix + ?Sized>(rho: &D, base: LogBase) -> f64 {
    base.from_nats(shannon_nats(rho.eigenvalues()))
}

/// Wootters concurrence.
///
/// With `rho = V V^dagger` from the eigendecomposition, the square roots of
/// the eigenvalues of `rho rho~` are the singular values of
/// `V^T (sigma_y x sigma_y) V`. Eigenvalues of `rho` at or below the entropy
/// cutoff are dropped from `V`.
pub fn concurrence(rho: &Rdm2) -> f64 {
    let eig = SymmetricEigen::new(rho.matrix);
    let weights =
        eig.eigenvalues.map(|p| if p > ENTROPY_CUTOFF { C64::new(p.sqrt(), 0.0) } else { C64::new(0.0, 0.0) });
    let v = eig.eigenvectors * Matrix4::from_diagonal(&weights);
    // sigma_y (x) sigma_y in the (uu, ud, du, dd) basis
    let mut yy = Matrix4::<C64>::zeros();
    yy[(0, 3)] = C64::new(-1.0, 0.0);
    yy[(3, 0)] = C64::new(-1.0, 0.0);
    yy[(1, 2)] = C64::new(1.0, 0.0);
    yy[(2, 1)] = C64::new(1.0, 0.0);
    let tau = v.transpose() * yy * v;
    let mut lambdas: Vec<f64> = tau.singular_values().iter().copied().collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    (lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).clamp(0.0, 1.0)
}

/// Entanglement of formation (bits) for a given concurrence.
pub fn eof_from_concurrence(c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    binary_entropy((1.0 + (1.0 - c * c).sqrt()) / 2.0)
}

pub fn eof(rho: &Rdm2) -> f64 {
    eof_from_concurrence(concurrence(rho))
}

/// Entropy (bits) between `site` and the rest of a pure state.
pub fn one_vs_rest(state: &PureState, site: usize) -> Result<f64> {
    Ok(vn_entropy(&rdm1(state, site)?, LogBase::Two))
}

/// Which qubit of the pair the projective measurement acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasuredSlot {
    First,
    #[default]
    Second,
}

/// Whose marginal entropy enters the discord.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscordMarginal {
    /// Entropy of the measured qubit.
    #[default]
    Measured,
    Unmeasured,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscordConfig {
    pub n_theta: usize,
    pub n_phi: usize,
    pub levels: usize,
    pub shrink: f64,
    pub tol: f64,
    pub base: LogBase,
    pub measured: MeasuredSlot,
    pub marginal: DiscordMarginal,
    /// Origin of the azimuthal coarse grid.
    pub phi_offset: f64,
}

impl Default for DiscordConfig {
    fn default() -> Self {
        DiscordConfig {
            n_theta: 64,
            n_phi: 128,
            levels: 6,
            shrink: 5.0,
            tol: 1e-10,
            base: LogBase::Two,
            measured: MeasuredSlot::Second,
            marginal: DiscordMarginal::Measured,
            phi_offset: 0.0,
        }
    }
}

impl DiscordConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_theta < 16 || self.n_phi < 16 {
            return Err(QptError::InvalidConfig(format!(
                "discord grid {}x{} below the 16x16 minimum",
                self.n_theta, self.n_phi
            )));
        }
        if !(self.tol > 0.0) || !(self.shrink > 1.0) {
            return Err(QptError::InvalidConfig("discord tolerance must be > 0 and shrink factor > 1".into()));
        }
        Ok(())
    }
}

/// Conditional entropy of the unmeasured qubit after a projective
/// measurement along `(theta, phi)` on the measured one, in nats.
///
/// `blocks[a][a2][b][b2]` holds `rho[(a b), (a2 b2)]` with `b` the measured index.
struct ConditionalEntropy {
    blocks: [[[[C64; 2]; 2]; 2]; 2],
}

impl ConditionalEntropy {
    fn new(rho: &Rdm2, measured: MeasuredSlot) -> Self {
        let mut blocks = [[[[C64::new(0.0, 0.0); 2]; 2]; 2]; 2];
        for (x, x2, y, y2) in itertools_product() {
            let v = rho.matrix[(2 * x + y, 2 * x2 + y2)];
            match measured {
                MeasuredSlot::Second => blocks[x][x2][y][y2] = v,
                MeasuredSlot::First => blocks[y][y2][x][x2] = v,
            }
        }
        ConditionalEntropy { blocks }
    }

    fn eval(&self, theta: f64, phi: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        let e = C64::from_polar(1.0, phi);
        let basis = [[C64::new(c, 0.0), e * s], [e.conj() * s, C64::new(-c, 0.0)]];
        let mut total = 0.0;
        for v in &basis {
            // sigma = (I (x) <v|) rho (I (x) |v>)
            let mut sigma = [[C64::new(0.0, 0.0); 2]; 2];
            for (a, row) in sigma.iter_mut().enumerate() {
                for (a2, out) in row.iter_mut().enumerate() {
                    let blk = &self.blocks[a][a2];
                    let mut acc = C64::new(0.0, 0.0);
                    for b in 0..2 {
                        for b2 in 0..2 {
                            acc += v[b].conj() * blk[b][b2] * v[b2];
                        }
                    }
                    *out = acc;
                }
            }
            let (p00, p11) = (sigma[0][0].re, sigma[1][1].re);
            let p = p00 + p11;
            if p <= ENTROPY_CUTOFF {
                continue;
            }
            let mean = 0.5 * p;
            let half = (0.25 * (p00 - p11).powi(2) + sigma[0][1].norm_sqr()).sqrt();
            for mu in [mean + half, mean - half] {
                let q = mu / p;
                if q > ENTROPY_CUTOFF {
                    total -= mu * q.ln();
                }
            }
        }
        total
    }
}

fn itertools_product() -> impl Iterator<Item = (usize, usize, usize, usize)> {
    (0..16).map(|k| (k >> 3 & 1, k >> 2 & 1, k >> 1 & 1, k & 1))
}

/// Result of the measurement-angle search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscordOptimum {
    pub discord: f64,
    pub theta: f64,
    pub phi: f64,
    /// Minimized conditional entropy in the configured base.
    pub conditional_entropy: f64,
}

/// Quantum discord with the measurement minimized over `theta in [0, pi/2]`,
/// `phi in [0, 2 pi)`: a coarse grid, then local grids that shrink around
/// the incumbent until it stops improving.
pub fn quantum_discord(rho: &Rdm2, cfg: &DiscordConfig) -> Result<f64> {
    Ok(quantum_discord_detailed(rho, cfg)?.discord)
}

pub fn quantum_discord_detailed(rho: &Rdm2, cfg: &DiscordConfig) -> Result<DiscordOptimum> {
    cfg.validate()?;
    let f = ConditionalEntropy::new(rho, cfg.measured);
    let d_theta = FRAC_PI_2 / (cfg.n_theta - 1) as f64;
    let d_phi = 2.0 * PI / cfg.n_phi as f64;

    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..cfg.n_theta {
        let theta = i as f64 * d_theta;
        for j in 0..cfg.n_phi {
            let phi = cfg.phi_offset + j as f64 * d_phi;
            let v = f.eval(theta, phi);
            if v < best.0 {
                best = (v, theta, phi);
            }
        }
    }

    const HALF_POINTS: i32 = 4;
    let (mut h_theta, mut h_phi) = (d_theta, d_phi);
    for level in 0..cfg.levels {
        let before = best.0;
        let (theta0, phi0) = (best.1, best.2);
        for i in -HALF_POINTS..=HALF_POINTS {
            let theta = (theta0 + h_theta * i as f64 / HALF_POINTS as f64).clamp(0.0, FRAC_PI_2);
            for j in -HALF_POINTS..=HALF_POINTS {
                let phi = phi0 + h_phi * j as f64 / HALF_POINTS as f64;
                let v = f.eval(theta, phi);
                if v < best.0 {
                    best = (v, theta, phi);
                }
            }
        }
        h_theta /= cfg.shrink;
        h_phi /= cfg.shrink;
        if level >= 1 && before - best.0 < cfg.tol {
            break;
        }
    }

    let marginal = match (cfg.measured, cfg.marginal) {
        (MeasuredSlot::Second, DiscordMarginal::Measured) | (MeasuredSlot::First, DiscordMarginal::Unmeasured) => {
            rho.marginal_second()
        }
        _ => rho.marginal_first(),
    };
    let s_marginal = vn_entropy(&marginal, LogBase::E);
    let s_joint = vn_entropy(rho, LogBase::E);
    let discord = cfg.base.from_nats(s_marginal + best.0 - s_joint);
    if !discord.is_finite() {
        return Err(QptError::NumericalIntegrity(format!("non-finite discord {discord}")));
    }
    let discord = if discord < 0.0 && discord > -1e-8 { 0.0 } else { discord };
    Ok(DiscordOptimum {
        discord,
        theta: best.1,
        phi: best.2.rem_euclid(2.0 * PI),
        conditional_entropy: cfg.base.from_nats(best.0),
    })
}

/// Configuration of the residual-entanglement sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TauConfig {
    /// 0-based anchor qubit.
    pub anchor: usize,
    /// Largest ring distance summed; `None` means all.
    pub r_max: Option<usize>,
    /// Reflection-symmetric sources stop once a pair term drops below this.
    pub tail_tol: f64,
    pub base: LogBase,
}

impl Default for TauConfig {
    fn default() -> Self {
        TauConfig { anchor: 0, r_max: None, tail_tol: 0.0, base: LogBase::Two }
    }
}

impl TauConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r_max == Some(0) {
            return Err(QptError::InvalidConfig("r_max must be at least 1".into()));
        }
        if !(self.tail_tol >= 0.0) {
            return Err(QptError::InvalidConfig("tail tolerance must be non-negative".into()));
        }
        Ok(())
    }
}

/// Supplies the anchor marginal and anchor-partner pair matrices.
pub trait PairSource {
    fn ring_size(&self) -> usize;
    fn anchor_rdm(&self) -> Result<Rdm1>;
    /// Pair of the anchor with the site `r` steps ahead on the ring.
    fn pair(&self, r: usize) -> Result<Rdm2>;
    /// Whether `pair(r)` and `pair(N - r)` carry the same entanglement.
    fn reflection_symmetric(&self) -> bool;
}

/// A pure state seen from one anchor site.
pub struct AnchoredState<'a> {
    pub state: &'a PureState,
    pub anchor: usize,
}

impl PairSource for AnchoredState<'_> {
    fn ring_size(&self) -> usize {
        self.state.n_sites()
    }

    fn anchor_rdm(&self) -> Result<Rdm1> {
        rdm1(self.state, self.anchor)
    }

    fn pair(&self, r: usize) -> Result<Rdm2> {
        let n = self.state.n_sites();
        rdm2(self.state, self.anchor, (self.anchor + r) % n)
    }

    fn reflection_symmetric(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauBreakdown {
    pub tau: f64,
    pub one_vs_rest: f64,
    /// `(ring distance, EOF, multiplicity)` for each evaluated pair class.
    pub pairs: Vec<(usize, f64, usize)>,
}

/// Residual entanglement `E(A|rest)^2 - sum_k EOF(A,k)^2`.
///
/// Sources without reflection symmetry sum every partner exactly; symmetric
/// ones walk `r = 1, 2, ...` with multiplicity 2 and stop at `r_max` or once
/// a term falls below the tail tolerance.
pub fn tau_sef_from<S: PairSource + ?Sized>(source: &S, cfg: &TauConfig) -> Result<TauBreakdown> {
    cfg.validate()?;
    let n = source.ring_size();
    let scale = match cfg.base {
        LogBase::Two => 1.0,
        LogBase::E => LN_2,
    };
    let e1 = vn_entropy(&source.anchor_rdm()?, cfg.base);
    let limit = cfg.r_max.unwrap_or(n);
    let mut pairs = Vec::new();
    let mut sum = 0.0;
    if source.reflection_symmetric() {
        for r in 1..=n / 2 {
            if r > limit {
                break;
            }
            let mult = if 2 * r == n { 1 } else { 2 };
            let e = eof(&source.pair(r)?) * scale;
            pairs.push((r, e, mult));
            sum += mult as f64 * e * e;
            if e * e < cfg.tail_tol {
                break;
            }
        }
    } else {
        for r in 1..n {
            if r.min(n - r) > limit {
                continue;
            }
            let e = eof(&source.pair(r)?) * scale;
            pairs.push((r, e, 1));
            sum += e * e;
        }
    }
    Ok(TauBreakdown { tau: e1 * e1 - sum, one_vs_rest: e1, pairs })
}

/// Residual entanglement of a pure state anchored at `cfg.anchor`, in bits squared.
pub fn tau_sef(state: &PureState, cfg: &TauConfig) -> Result<f64> {
    let source = AnchoredState { state, anchor: cfg.anchor };
    if cfg.anchor >= state.n_sites() {
        return Err(QptError::IndexOutOfRange { index: cfg.anchor, n_sites: state.n_sites() });
    }
    Ok(tau_sef_from(&source, cfg)?.tau)
}
