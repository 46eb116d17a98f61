//! Free-fermion correlators checked against exact diagonalization of the
//! same XYMI ring.

use crate::csvio::VERSION;
use crate::error::{CliError, CliResult};
use nalgebra::{Complex, Matrix2, Matrix4};
use qpt_core::eigensolver::{ground_state_with, SolverOptions};
use qpt_core::freefermion::{ff_tau_config, FfParams, FfSolution, KOffset};
use qpt_core::hilbert::{build_hamiltonian, ModelSpec};
use qpt_core::measures::{tau_sef, TauConfig};
use qpt_core::par::{map_ordered, Execution};
use qpt_core::rdm::{rdm1, rdm2, Rdm2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;

/// Draws with a smaller gap are replaced; the ground state is then unique
/// enough for the comparison to be meaningful.
pub const MIN_GAP: f64 = 1e-3;
const MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OffsetChoice {
    Fixed(KOffset),
    /// The grid the automatic choice rejects, to show the check has teeth.
    Flipped,
}

impl std::str::FromStr for OffsetChoice {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "flipped" | "wrong" => Ok(OffsetChoice::Flipped),
            other => Ok(OffsetChoice::Fixed(other.parse()?)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValidateOptions {
    pub sizes: Vec<usize>,
    pub draws: usize,
    pub tol: f64,
    pub seed: u64,
    pub k_offset: OffsetChoice,
    pub solver_tol: f64,
    /// Fixed `(gamma, lambda, alpha, beta)` checked at every size.
    pub points: Vec<[f64; 4]>,
    pub execution: Execution,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions {
            sizes: vec![7, 9, 11],
            draws: 20,
            tol: 1e-6,
            seed: crate::config::DEFAULT_SEED,
            k_offset: OffsetChoice::Fixed(KOffset::Auto),
            solver_tol: 1e-12,
            points: Vec::new(),
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseReport {
    pub n_sites: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gap: f64,
    pub k_offset: KOffset,
    pub deviations: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub version: String,
    pub seed: u64,
    pub tolerance: f64,
    pub sizes: Vec<usize>,
    pub draws: usize,
    pub rejected_draws: usize,
    pub cases: Vec<CaseReport>,
    /// Largest deviation of each quantity over all cases.
    pub max_deviation: BTreeMap<String, f64>,
    /// Quantities above tolerance, worst first.
    pub failing: Vec<String>,
    pub passed: bool,
}

fn pauli(c: char) -> Matrix2<Complex<f64>> {
    let (o, i) = (Complex::new(0.0, 0.0), Complex::new(1.0, 0.0));
    let j = Complex::new(0.0, 1.0);
    match c {
        'x' => Matrix2::new(o, i, i, o),
        'y' => Matrix2::new(o, -j, j, o),
        _ => Matrix2::new(i, o, o, -i),
    }
}

fn expect(rho: &Rdm2, c: char) -> f64 {
    let p = pauli(c);
    let op: Matrix4<Complex<f64>> = p.kronecker(&p);
    (rho.matrix * op).trace().re
}

/// Compares one coupling set; `None` when the exact gap is below [`MIN_GAP`]
/// and `reject_small_gap` is set.
pub fn compare(
    n: usize,
    c: [f64; 4],
    choice: OffsetChoice,
    solver_tol: f64,
    seed: u64,
    reject_small_gap: bool,
) -> CliResult<Option<CaseReport>> {
    let [gamma, lambda, alpha, beta] = c;
    let spec = ModelSpec::xymi(gamma, lambda, alpha, beta, n)?;
    let opts = SolverOptions { tol: solver_tol, seed, ..SolverOptions::default() };
    let gs = ground_state_with(&build_hamiltonian(&spec, None)?, &opts)?;
    if reject_small_gap && gs.gap < MIN_GAP {
        return Ok(None);
    }
    let psi = gs.to_pure_state();
    let params = FfParams::new(gamma, lambda, alpha, beta, n)?;
    let offset = match choice {
        OffsetChoice::Fixed(k) => k,
        OffsetChoice::Flipped => match FfSolution::new(&params, 0)?.k_offset() {
            KOffset::Half => KOffset::Integer,
            _ => KOffset::Half,
        },
    };
    let sol = FfSolution::new(&params.with_offset(offset), n)?;

    let mut dev = BTreeMap::new();
    let m = rdm1(&psi, 0)?.matrix;
    dev.insert("sz".to_string(), (sol.magnetization() - (m[(0, 0)].re - m[(1, 1)].re)).abs());
    for r in 1..=n / 2 {
        let ed = rdm2(&psi, 0, r)?;
        let ff = sol.correlators(r)?;
        dev.insert(format!("xx({r})"), (ff.xx - expect(&ed, 'x')).abs());
        dev.insert(format!("yy({r})"), (ff.yy - expect(&ed, 'y')).abs());
        dev.insert(format!("zz({r})"), (ff.zz - expect(&ed, 'z')).abs());
    }
    let ff_tau = sol.tau_sef(&TauConfig { r_max: None, ..ff_tau_config() })?;
    dev.insert("tau_sef".to_string(), (ff_tau - tau_sef(&psi, &TauConfig::default())?).abs());
    Ok(Some(CaseReport {
        n_sites: n,
        gamma,
        lambda,
        alpha,
        beta,
        gap: gs.gap,
        k_offset: sol.k_offset(),
        deviations: dev,
    }))
}

fn draw(rng: &mut ChaCha8Rng) -> [f64; 4] {
    [rng.gen_range(-1.0..1.0), rng.gen_range(-2.0..2.0), rng.gen_range(-0.8..0.8), rng.gen_range(-0.5..0.5)]
}

/// Seeded draws at every size plus the fixed points.
pub fn run(opts: &ValidateOptions) -> CliResult<ValidationReport> {
    if opts.sizes.is_empty() {
        return Err(CliError::usage("sizes: at least one ring size is needed"));
    }
    if let Some(&n) = opts.sizes.iter().find(|&&n| !(3..=16).contains(&n)) {
        return Err(CliError::usage(format!("sizes: {n} is outside 3..=16")));
    }
    let per_size = map_ordered(&opts.sizes, opts.execution, |_, &n| -> CliResult<(Vec<CaseReport>, usize)> {
        let mut cases = Vec::new();
        for &p in &opts.points {
            cases.extend(compare(n, p, opts.k_offset, opts.solver_tol, opts.seed, false)?);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(n as u64);
        let mut rejected = 0;
        let mut accepted = 0;
        while accepted < opts.draws {
            if rejected >= MAX_ATTEMPTS {
                return Err(CliError::Numerical(format!("N = {n}: no gapped draw in {MAX_ATTEMPTS} attempts")));
            }
            match compare(n, draw(&mut rng), opts.k_offset, opts.solver_tol, opts.seed, true)? {
                Some(case) => {
                    cases.push(case);
                    accepted += 1;
                }
                None => rejected += 1,
            }
        }
        Ok((cases, rejected))
    });

    let mut cases = Vec::new();
    let mut rejected_draws = 0;
    for res in per_size {
        let (c, r) = res?;
        cases.extend(c);
        rejected_draws += r;
    }
    let mut max_deviation: BTreeMap<String, f64> = BTreeMap::new();
    for case in &cases {
        for (k, v) in &case.deviations {
            let slot = max_deviation.entry(k.clone()).or_insert(0.0);
            // NaN counts as a failure
            if !(*v <= *slot) {
                *slot = *v;
            }
        }
    }
    let mut failing: Vec<(String, f64)> =
        max_deviation.iter().filter(|(_, v)| !(**v <= opts.tol)).map(|(k, v)| (k.clone(), *v)).collect();
    failing.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(ValidationReport {
        version: VERSION.to_string(),
        seed: opts.seed,
        tolerance: opts.tol,
        sizes: opts.sizes.clone(),
        draws: opts.draws,
        rejected_draws,
        cases,
        max_deviation,
        passed: failing.is_empty(),
        failing: failing.into_iter().map(|f| f.0).collect(),
    })
}

/// Parses `gamma,lambda,alpha,beta`.
pub fn parse_point(s: &str) -> CliResult<[f64; 4]> {
    let v: Vec<f64> = s.split(',').map(crate::csvio::parse_f64).collect::<CliResult<_>>()?;
    v.try_into().map_err(|_| CliError::usage(format!("points: expected gamma,lambda,alpha,beta, got '{s}'")))
}
