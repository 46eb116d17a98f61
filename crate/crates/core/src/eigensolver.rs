//! Lowest eigenpairs of a [`SparseHamiltonian`].
//!
//! Small blocks are diagonalized densely. Larger ones use Lanczos with full
//! reorthogonalization and thick restarts; additional eigenpairs are found
//! by deflating against the ones already locked, so degenerate copies are
//! resolved individually.

use std::sync::Arc;

use nalgebra::{Complex, DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{QptError, Result};
use crate::hilbert::{build_hamiltonian, BasisMap, ModelSpec, Sector, SparseHamiltonian};
use crate::rdm::PureState;

/// Blocks up to this dimension are diagonalized densely.
pub const DENSE_LIMIT: usize = 512;

/// Krylov vectors kept per Lanczos cycle before restarting.
const CYCLE_LEN: usize = 40;

/// Ritz vectors carried over a restart.
const KEEP_ON_RESTART: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Residual target `||H v - E v||`.
    pub tol: f64,
    pub seed: u64,
    pub dense_limit: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-10, seed: 0x5eed, dense_limit: DENSE_LIMIT }
    }
}

/// Normalized lowest eigenvector with its energy and the gap to the next level.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub amplitudes: Vec<Complex<f64>>,
    pub energy: f64,
    /// `E1 - E0`; infinite for a one-dimensional space.
    pub gap: f64,
    pub degenerate: bool,
    pub residual: f64,
    pub n_sites: usize,
    basis: Option<Arc<BasisMap>>,
}

impl GroundState {
    pub fn sector(&self) -> Option<Sector> {
        self.basis.as_ref().map(|b| b.sector())
    }

    /// The state on the full `2^N` space (sector states are scattered back).
    pub fn to_pure_state(&self) -> PureState {
        match &self.basis {
            None => PureState::from_amplitudes_unchecked(self.n_sites, self.amplitudes.clone()),
            Some(b) => {
                let mut full = vec![Complex::new(0.0, 0.0); 1usize << self.n_sites];
                for (i, a) in self.amplitudes.iter().enumerate() {
                    full[b.state(i) as usize] = *a;
                }
                PureState::from_amplitudes_unchecked(self.n_sites, full)
            }
        }
    }
}

/// Whether a level spacing counts as a degeneracy.
pub fn is_degenerate(gap: f64, energy: f64) -> bool {
    gap < 1e-8 * energy.abs().max(1.0)
}

pub fn ground_state(h: &SparseHamiltonian, tol: f64, seed: u64) -> Result<GroundState> {
    ground_state_with(h, &SolverOptions { tol, seed, ..SolverOptions::default() })
}

pub fn ground_state_with(h: &SparseHamiltonian, opts: &SolverOptions) -> Result<GroundState> {
    if !(opts.tol > 0.0 && opts.tol <= 1e-6) {
        return Err(QptError::InvalidConfig(format!("solver tolerance {} outside (0, 1e-6]", opts.tol)));
    }
    let want = h.dim().min(2);
    let pairs = lowest_pairs(h, want, opts)?;
    let (energy, vector, residual) = pairs[0].clone();
    let gap = if pairs.len() > 1 { pairs[1].0 - energy } else { f64::INFINITY };
    Ok(GroundState {
        amplitudes: vector.into_iter().map(|x| Complex::new(x, 0.0)).collect(),
        energy,
        gap,
        degenerate: is_degenerate(gap, energy),
        residual,
        n_sites: h.n_sites(),
        basis: h.basis().cloned(),
    })
}

/// The `k` lowest eigenvalues in ascending order (`k <= 8`).
pub fn low_spectrum(h: &SparseHamiltonian, k: usize) -> Result<Vec<f64>> {
    low_spectrum_with(h, k, &SolverOptions::default())
}

pub fn low_spectrum_with(h: &SparseHamiltonian, k: usize, opts: &SolverOptions) -> Result<Vec<f64>> {
    if k == 0 || k > 8 {
        return Err(QptError::InvalidConfig(format!("low_spectrum supports 1..=8 levels, got {k}")));
    }
    if k > h.dim() {
        return Err(QptError::InvalidConfig(format!("{k} levels requested from a {}-dimensional space", h.dim())));
    }
    let mut energies: Vec<f64> = lowest_pairs(h, k, opts)?.into_iter().map(|p| p.0).collect();
    energies.sort_by(f64::total_cmp);
    Ok(energies)
}

/// Which S_z block(s) to diagonalize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SectorPolicy {
    /// Whole `2^N` space.
    #[default]
    Full,
    Fixed(Sector),
    /// Lowest energy over all blocks with `n_up >= N/2`; blocks with
    /// `S_z != 0` imply a spin-flipped partner, so winning there marks the
    /// ground state degenerate.
    Lowest,
}

/// Builds and solves the model under a sector policy.
pub fn solve_model(spec: &ModelSpec, policy: SectorPolicy, opts: &SolverOptions) -> Result<GroundState> {
    match policy {
        SectorPolicy::Full => ground_state_with(&build_hamiltonian(spec, None)?, opts),
        SectorPolicy::Fixed(s) => ground_state_with(&build_hamiltonian(spec, Some(s))?, opts),
        SectorPolicy::Lowest => {
            if !spec.family().conserves_sz() {
                return Err(QptError::UnsupportedSector { family: spec.family().name() });
            }
            let n = spec.n_sites;
            let mut best: Option<GroundState> = None;
            let mut runner_up = f64::INFINITY;
            for n_up in n.div_ceil(2)..=n {
                let gs = ground_state_with(&build_hamiltonian(spec, Some(Sector::new(n_up)))?, opts)?;
                match &best {
                    Some(b) if gs.energy >= b.energy => runner_up = runner_up.min(gs.energy),
                    _ => {
                        if let Some(b) = best.take() {
                            runner_up = runner_up.min(b.energy);
                        }
                        best = Some(gs);
                    }
                }
            }
            let mut gs = best.expect("at least one sector");
            let mirrored = 2 * gs.sector().map_or(0, |s| s.n_up) != n;
            let gap = if mirrored { 0.0 } else { gs.gap.min(runner_up - gs.energy) };
            gs.gap = gap;
            gs.degenerate = is_degenerate(gap, gs.energy);
            Ok(gs)
        }
    }
}

/// `(energy, vector, residual)` for the `k` lowest states.
fn lowest_pairs(h: &SparseHamiltonian, k: usize, opts: &SolverOptions) -> Result<Vec<(f64, Vec<f64>, f64)>> {
    if h.dim() == 0 {
        return Err(QptError::InvalidModel("empty Hilbert space".into()));
    }
    if h.dim() <= opts.dense_limit {
        let pairs = dense_lowest(h, k);
        // the dense QR iteration occasionally returns a poor eigenvector; the
        // Krylov path below is the fallback
        if pairs.iter().all(|p| p.2 < opts.tol) {
            return Ok(pairs);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut locked: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let (e, v, res) = lanczos_lowest(h, &locked, opts.tol, &mut rng)?;
        locked.push(v.clone());
        out.push((e, v, res));
    }
    Ok(out)
}

fn dense_lowest(h: &SparseHamiltonian, k: usize) -> Vec<(f64, Vec<f64>, f64)> {
    let (values, vecs) = small_eigen(&h.to_dense(), k);
    (0..k)
        .map(|i| {
            let mut v: Vec<f64> = vecs.column(i).iter().copied().collect();
            fix_sign(&mut v);
            let e = values[i];
            let res = residual(h, &v, e);
            (e, v, res)
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn residual(h: &SparseHamiltonian, v: &[f64], e: f64) -> f64 {
    let hv = h.apply(v).expect("dimension checked");
    hv.iter().zip(v).map(|(a, b)| (a - e * b).powi(2)).sum::<f64>().sqrt()
}

/// Largest-magnitude component made positive so output is reproducible.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn orthogonalize(w: &mut [f64], against: &[Vec<f64>]) {
    orthogonalize_once(w, against);
    orthogonalize_once(w, against);
}

fn orthogonalize_once(w: &mut [f64], against: &[Vec<f64>]) {
    for q in against {
        let c = dot(w, q);
        axpy(-c, q, w);
    }
}

fn random_start(dim: usize, locked: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        orthogonalize(&mut v, locked);
        let n = norm(&v);
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            return v;
        }
    }
}

/// Ascending eigenpairs of a small symmetric matrix with orthonormal
/// eigenvectors; the lowest `polish` vectors are refined by inverse iteration,
/// since the QR-based decomposition alone can leave residuals far above
/// round-off.
fn small_eigen(a: &DMatrix<f64>, polish: usize) -> (Vec<f64>, DMatrix<f64>) {
    let m = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let mut values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
    let scale = a.amax().max(1e-300);
    for j in 0..m {
        let mut z = vecs.column(j).into_owned();
        if j < polish {
            for _ in 0..2 {
                let shift = values[j] - 1e-13 * scale;
                let lu = (a - DMatrix::identity(m, m) * shift).lu();
                match lu.solve(&z) {
                    Some(next) if next.iter().all(|x| x.is_finite()) => z = next,
                    _ => break,
                }
                let n = z.norm();
                z /= n;
            }
        }
        for _ in 0..2 {
            for k in 0..j {
                let c = vecs.column(k).dot(&z);
                z -= vecs.column(k) * c;
            }
        }
        let n = z.norm();
        z /= n;
        if j < polish {
            values[j] = (a * &z).dot(&z);
        }
        vecs.set_column(j, &z);
    }
    (values, vecs)
}

fn lanczos_lowest(
    h: &SparseHamiltonian,
    locked: &[Vec<f64>],
    tol: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Vec<f64>, f64)> {
    let dim = h.dim();
    let avail = dim - locked.len();
    let max_basis = avail.min(CYCLE_LEN);
    let keep = KEEP_ON_RESTART.min(max_basis / 2).max(1);
    let cap = (10.0 * (dim as f64).sqrt()).ceil() as usize;

    // basis, its image under H, and the projected matrix (row-major, max_basis^2)
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(max_basis);
    let mut hv: Vec<Vec<f64>> = Vec::with_capacity(max_basis);
    let mut t = vec![0.0; max_basis * max_basis];
    // `next` is orthogonal to the basis and to `locked`; `beta` is its norm
    let mut next = random_start(dim, locked, rng);
    let mut beta = 1.0;
    let mut steps = 0usize;
    // best verified residual, else best estimate, for the error report
    let mut best_checked = f64::INFINITY;
    let mut best_estimate = f64::INFINITY;
    let failure = |steps: usize, checked: f64, estimate: f64| QptError::Convergence {
        iterations: steps,
        best_residual: if checked.is_finite() { checked } else { estimate },
    };

    loop {
        let mut exhausted = v.len() == avail;
        if !exhausted {
            let mut q = std::mem::take(&mut next);
            let mut nq = beta;
            if nq < 1e-10 {
                // the Krylov space is invariant; continue with a fresh direction
                q = random_start(dim, locked, rng);
                orthogonalize(&mut q, &v);
                nq = norm(&q);
            }
            if nq < 1e-10 {
                exhausted = true;
                beta = 0.0;
            } else {
                q.iter_mut().for_each(|x| *x /= nq);
                let w = h.apply(&q)?;
                steps += 1;
                v.push(q);
                let m = v.len() - 1;
                // classical Gram-Schmidt; the first pass doubles as the
                // projected matrix row
                let mut f = w.clone();
                for (i, vi) in v.iter().enumerate() {
                    let c = dot(vi, &w);
                    t[i * max_basis + m] = c;
                    t[m * max_basis + i] = c;
                    axpy(-c, vi, &mut f);
                }
                orthogonalize_once(&mut f, locked);
                orthogonalize_once(&mut f, &v);
                orthogonalize_once(&mut f, locked);
                beta = norm(&f);
                next = f;
                hv.push(w);
            }
        }

        let m = v.len();
        if !(m % 4 == 0 || m == max_basis || exhausted || steps >= cap) {
            continue;
        }

        let proj = DMatrix::from_fn(m, m, |i, j| 0.5 * (t[i * max_basis + j] + t[j * max_basis + i]));
        let restart = m == max_basis && !exhausted;
        let (_, ritz) = small_eigen(&proj, if restart { keep } else { 1 });
        let combine = |vecs: &[Vec<f64>], col: usize| {
            let mut out = vec![0.0; dim];
            for (i, x) in vecs.iter().enumerate() {
                axpy(ritz[(i, col)], x, &mut out);
            }
            out
        };
        // H V = V T + f e_m^T, so the Ritz residual is |s_m| * beta
        let estimate = ritz[(m - 1, 0)].abs() * beta;
        best_estimate = best_estimate.min(estimate);
        if estimate < tol || exhausted {
            let mut y = combine(&v, 0);
            let ny = norm(&y);
            y.iter_mut().for_each(|x| *x /= ny);
            let hy = h.apply(&y)?;
            let energy = dot(&hy, &y);
            // residual of the deflated operator: components along locked
            // vectors only reflect their own residuals
            let mut r: Vec<f64> = hy.iter().zip(&y).map(|(a, b)| a - energy * b).collect();
            orthogonalize(&mut r, locked);
            let res = norm(&r);
            if res < tol {
                fix_sign(&mut y);
                return Ok((energy, y, res));
            }
            best_checked = best_checked.min(res);
            if exhausted {
                return Err(failure(steps, best_checked, best_estimate));
            }
        }
        if steps >= cap {
            return Err(failure(steps, best_checked, best_estimate));
        }
        if restart {
            // thick restart on the lowest Ritz vectors; their residuals all
            // point along `next`, which continues the Krylov sequence
            let new_v: Vec<Vec<f64>> = (0..keep).map(|c| combine(&v, c)).collect();
            let new_hv: Vec<Vec<f64>> = (0..keep).map(|c| combine(&hv, c)).collect();
            let s_keep = ritz.columns(0, keep);
            let t_keep = s_keep.transpose() * &proj * s_keep;
            t.iter_mut().for_each(|x| *x = 0.0);
            for i in 0..keep {
                for j in 0..keep {
                    t[i * max_basis + j] = t_keep[(i, j)];
                }
            }
            v = new_v;
            hv = new_hv;
        }
    }
}
