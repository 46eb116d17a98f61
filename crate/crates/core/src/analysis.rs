//! Parameter sweeps, finite differences, extremum detection, finite-size
//! scaling and two-parameter maps.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::eigensolver::{solve_model, SectorPolicy, SolverOptions};
use crate::error::{QptError, Result};
use crate::freefermion::{ff_tau_config, FfParams, FfSolution, KOffset};
use crate::hilbert::{Family, ModelSpec, Sector};
use crate::measures::{
    eof, one_vs_rest, quantum_discord, tau_sef_from, vn_entropy, AnchoredState, DiscordConfig, LogBase, TauConfig,
};
use crate::par::{for_each_ordered, map_ordered, Execution};
use crate::rdm::{rdm2, Rdm2};

/// Inclusive uniform grid `lo, lo + step, ..., <= hi`, optionally shifted by `offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    #[serde(default)]
    pub offset: f64,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        let g = Grid { lo, hi, step, offset: 0.0 };
        g.validate()?;
        Ok(g)
    }

    /// Shifts every point by half a step, keeping points `<= hi`.
    pub fn half_step_offset(mut self) -> Self {
        self.offset = 0.5 * self.step;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.step.is_finite() && self.offset.is_finite()) {
            return Err(QptError::InvalidGrid("grid bounds must be finite".into()));
        }
        if !(self.step > 0.0) {
            return Err(QptError::InvalidGrid(format!("step {} must be positive", self.step)));
        }
        if self.hi < self.lo {
            return Err(QptError::InvalidGrid(format!("hi {} below lo {}", self.hi, self.lo)));
        }
        if self.len() > 10_000_000 {
            return Err(QptError::InvalidGrid("more than 10^7 grid points".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        let span = (self.hi - self.lo - self.offset) / self.step;
        if span < -1e-9 {
            0
        } else {
            (span + 1e-9).floor() as usize + 1
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Points rounded to 12 decimals so `-1.5 + 250 * 0.01` prints as `1`.
    pub fn points(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let x = self.lo + self.offset + i as f64 * self.step;
                let r = (x * 1e12).round() / 1e12;
                if r == 0.0 {
                    0.0
                } else {
                    r
                }
            })
            .collect()
    }
}

impl FromStr for Grid {
    type Err = QptError;

    /// `lo:hi:step`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(QptError::InvalidGrid(format!("expected lo:hi:step, got '{s}'")));
        }
        let num = |t: &str| {
            t.trim().parse::<f64>().map_err(|_| QptError::InvalidGrid(format!("'{t}' is not a number in '{s}'")))
        };
        Grid::new(num(parts[0])?, num(parts[1])?, num(parts[2])?)
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.step)
    }
}

/// Quantity evaluated at each grid point. Pair measures carry the distance `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    TauSef,
    OneVsRest,
    Eof(usize),
    E2v(usize),
    Qd(usize),
}

impl Measure {
    /// CSV column name.
    pub fn column(&self) -> String {
        match self {
            Measure::TauSef => "tau_sef".into(),
            Measure::OneVsRest => "one_vs_rest".into(),
            Measure::Eof(r) => format!("eof_r{r}"),
            Measure::E2v(r) => format!("e2v_r{r}"),
            Measure::Qd(r) => format!("qd_r{r}"),
        }
    }

    pub fn distance(&self) -> Option<usize> {
        match *self {
            Measure::Eof(r) | Measure::E2v(r) | Measure::Qd(r) => Some(r),
            _ => None,
        }
    }

    /// Parses a comma-separated list such as `tau_sef,eof@2,qd`.
    pub fn parse_list(s: &str) -> Result<Vec<Measure>> {
        let list: Vec<Measure> =
            s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(str::parse).collect::<Result<_>>()?;
        if list.is_empty() {
            return Err(QptError::InvalidConfig("empty measure set".into()));
        }
        Ok(list)
    }
}

impl FromStr for Measure {
    type Err = QptError;

    /// Accepts `tau_sef`, `one_vs_rest`, `eof`, `eof@2` and the column names `eof_r2`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (name, r) = if let Some((n, r)) = s.split_once('@') {
            (n.to_string(), Some(r.to_string()))
        } else if let Some(pos) = s.rfind("_r") {
            if s[pos + 2..].chars().all(|c| c.is_ascii_digit()) && pos + 2 < s.len() {
                (s[..pos].to_string(), Some(s[pos + 2..].to_string()))
            } else {
                (s.clone(), None)
            }
        } else {
            (s.clone(), None)
        };
        let r = match r {
            None => 1,
            Some(t) => match t.parse::<usize>() {
                Ok(r) if r >= 1 => r,
                _ => return Err(QptError::InvalidConfig(format!("bad pair distance in measure '{s}'"))),
            },
        };
        match name.as_str() {
            "tau_sef" | "tau" if !s.contains('@') => Ok(Measure::TauSef),
            "one_vs_rest" | "e1" if !s.contains('@') => Ok(Measure::OneVsRest),
            "eof" => Ok(Measure::Eof(r)),
            "e2v" => Ok(Measure::E2v(r)),
            "qd" => Ok(Measure::Qd(r)),
            _ => Err(QptError::InvalidConfig(format!("unknown measure '{s}'"))),
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Measure::TauSef => write!(f, "tau_sef"),
            Measure::OneVsRest => write!(f, "one_vs_rest"),
            Measure::Eof(r) => write!(f, "eof@{r}"),
            Measure::E2v(r) => write!(f, "e2v@{r}"),
            Measure::Qd(r) => write!(f, "qd@{r}"),
        }
    }
}

impl Serialize for Measure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Measure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Which S_z block the exact solver diagonalizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SectorChoice {
    /// Per family: lowest block for XXZ, S_z = 0 for SSH, full space otherwise.
    #[default]
    Auto,
    Full,
    Zero,
    Lowest,
    NUp(usize),
}

impl SectorChoice {
    pub fn policy(&self, spec: &ModelSpec) -> Result<SectorPolicy> {
        let n = spec.n_sites;
        Ok(match self {
            SectorChoice::Auto => match spec.family() {
                Family::Xxz => SectorPolicy::Lowest,
                Family::Ssh => SectorPolicy::Fixed(Sector::zero_magnetization(n)?),
                Family::SshXy | Family::Xymi => SectorPolicy::Full,
            },
            SectorChoice::Full => SectorPolicy::Full,
            SectorChoice::Zero => SectorPolicy::Fixed(Sector::zero_magnetization(n)?),
            SectorChoice::Lowest => SectorPolicy::Lowest,
            SectorChoice::NUp(k) => {
                if *k > n {
                    return Err(QptError::InvalidConfig(format!("n_up {k} exceeds N = {n}")));
                }
                SectorPolicy::Fixed(Sector::new(*k))
            }
        })
    }
}

impl FromStr for SectorChoice {
    type Err = QptError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(SectorChoice::Auto),
            "full" => Ok(SectorChoice::Full),
            "zero" | "sz0" => Ok(SectorChoice::Zero),
            "lowest" => Ok(SectorChoice::Lowest),
            other => match other.strip_prefix("nup=").map(str::parse::<usize>) {
                Some(Ok(k)) => Ok(SectorChoice::NUp(k)),
                _ => Err(QptError::InvalidConfig(format!("unknown sector '{other}'"))),
            },
        }
    }
}

impl fmt::Display for SectorChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SectorChoice::Auto => write!(f, "auto"),
            SectorChoice::Full => write!(f, "full"),
            SectorChoice::Zero => write!(f, "zero"),
            SectorChoice::Lowest => write!(f, "lowest"),
            SectorChoice::NUp(k) => write!(f, "nup={k}"),
        }
    }
}

impl Serialize for SectorChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SectorChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Engine {
    Ed { sector: SectorChoice, solver: SolverOptions },
    FreeFermion { k_offset: KOffset },
}

impl Default for Engine {
    fn default() -> Self {
        Engine::Ed { sector: SectorChoice::Auto, solver: SolverOptions::default() }
    }
}

impl Engine {
    pub fn name(&self) -> &'static str {
        match self {
            Engine::Ed { .. } => "ed",
            Engine::FreeFermion { .. } => "ff",
        }
    }
}

/// Detector options shared by all grid points of a scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeasureSettings {
    /// Residual entanglement on the exact path; its anchor also anchors pair measures.
    pub tau: TauConfig,
    /// Residual entanglement on the free-fermion path.
    pub ff_tau: TauConfig,
    pub discord: DiscordConfig,
    pub e2v_base: LogBase,
}

impl Default for MeasureSettings {
    fn default() -> Self {
        MeasureSettings {
            tau: TauConfig::default(),
            ff_tau: ff_tau_config(),
            discord: DiscordConfig::default(),
            e2v_base: LogBase::E,
        }
    }
}

/// A one-parameter sweep.
#[derive(Debug, Clone)]
pub struct ScanPlan {
    pub template: ModelSpec,
    pub axis: String,
    pub grid: Grid,
    pub measures: Vec<Measure>,
    pub engine: Engine,
    pub settings: MeasureSettings,
    pub execution: Execution,
}

impl ScanPlan {
    pub fn new(template: ModelSpec, axis: &str, grid: Grid, measures: Vec<Measure>, engine: Engine) -> Self {
        ScanPlan {
            template,
            axis: axis.to_string(),
            grid,
            measures,
            engine,
            settings: MeasureSettings::default(),
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.measures.is_empty() {
            return Err(QptError::InvalidConfig("empty measure set".into()));
        }
        self.template.with_param(&self.axis, self.grid.lo)?;
        self.settings.tau.validate()?;
        self.settings.ff_tau.validate()?;
        if self.measures.iter().any(|m| matches!(m, Measure::Qd(_))) {
            self.settings.discord.validate()?;
        }
        let n = self.template.n_sites;
        if self.settings.tau.anchor >= n {
            return Err(QptError::IndexOutOfRange { index: self.settings.tau.anchor, n_sites: n });
        }
        for m in &self.measures {
            if let Some(r) = m.distance() {
                if r % n == 0 {
                    return Err(QptError::InvalidConfig(format!(
                        "pair distance {r} wraps onto the anchor for N = {n}"
                    )));
                }
            }
        }
        match self.engine {
            Engine::FreeFermion { .. } => {
                FfParams::from_spec(&self.template)?;
            }
            Engine::Ed { sector, .. } => {
                sector.policy(&self.template)?;
            }
        }
        Ok(())
    }
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub param: String,
    pub value: f64,
    pub n_sites: usize,
    /// In the order of the plan's measures; NaN when the point failed.
    pub values: Vec<f64>,
    pub energy: f64,
    /// NaN on the free-fermion path.
    pub gap: f64,
    pub degenerate: bool,
    /// 0-based anchor site of pair measures.
    pub anchor: usize,
    pub error: Option<String>,
    /// Seconds spent on this point.
    pub wall_time: f64,
}

impl ScanRecord {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Runs the scan, returning records in grid order.
pub fn scan(plan: &ScanPlan) -> Result<Vec<ScanRecord>> {
    let mut out = Vec::new();
    scan_with_sink(plan, |rec| {
        out.push(rec.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Runs the scan, handing each record to `sink` in grid order as soon as
/// all earlier points are done.
pub fn scan_with_sink(plan: &ScanPlan, mut sink: impl FnMut(&ScanRecord) -> Result<()>) -> Result<()> {
    plan.validate()?;
    let points = plan.grid.points();
    for_each_ordered(&points, plan.execution, |_, &x| evaluate_point(plan, x), |_, rec| sink(&rec))
}

/// Evaluates every measure at one parameter value; failures become error markers.
pub fn evaluate_point(plan: &ScanPlan, value: f64) -> ScanRecord {
    let start = Instant::now();
    let n = plan.template.n_sites;
    let mut rec = ScanRecord {
        param: plan.axis.clone(),
        value,
        n_sites: n,
        values: vec![f64::NAN; plan.measures.len()],
        energy: f64::NAN,
        gap: f64::NAN,
        degenerate: false,
        anchor: plan.settings.tau.anchor,
        error: None,
        wall_time: 0.0,
    };
    let result = plan.template.with_param(&plan.axis, value).and_then(|spec| match plan.engine {
        Engine::Ed { sector, solver } => evaluate_ed(plan, &spec, sector, &solver, &mut rec),
        Engine::FreeFermion { k_offset } => evaluate_ff(plan, &spec, k_offset, &mut rec),
    });
    match result {
        Ok(values) => {
            if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
                rec.error = Some(format!("non-finite {}", plan.measures[bad].column()));
            } else {
                rec.values = values;
            }
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec.wall_time = start.elapsed().as_secs_f64();
    rec
}

fn evaluate_ed(
    plan: &ScanPlan,
    spec: &ModelSpec,
    sector: SectorChoice,
    solver: &SolverOptions,
    rec: &mut ScanRecord,
) -> Result<Vec<f64>> {
    let gs = solve_model(spec, sector.policy(spec)?, solver)?;
    rec.energy = gs.energy;
    rec.gap = gs.gap;
    rec.degenerate = gs.degenerate;
    let psi = gs.to_pure_state();
    let anchor = plan.settings.tau.anchor;
    let mut pairs: HashMap<usize, Rdm2> = HashMap::new();
    let mut pair = |r: usize| -> Result<Rdm2> {
        if let Some(p) = pairs.get(&r) {
            return Ok(*p);
        }
        let p = rdm2(&psi, anchor, (anchor + r) % spec.n_sites)?;
        pairs.insert(r, p);
        Ok(p)
    };
    plan.measures
        .iter()
        .map(|m| match *m {
            Measure::TauSef => Ok(tau_sef_from(&AnchoredState { state: &psi, anchor }, &plan.settings.tau)?.tau),
            Measure::OneVsRest => one_vs_rest(&psi, anchor),
            Measure::Eof(r) => Ok(eof(&pair(r)?)),
            Measure::E2v(r) => Ok(vn_entropy(&pair(r)?, plan.settings.e2v_base)),
            Measure::Qd(r) => quantum_discord(&pair(r)?, &plan.settings.discord),
        })
        .collect()
}

fn evaluate_ff(plan: &ScanPlan, spec: &ModelSpec, k_offset: KOffset, rec: &mut ScanRecord) -> Result<Vec<f64>> {
    let p = FfParams::from_spec(spec)?.with_offset(k_offset);
    let tau_cfg = &plan.settings.ff_tau;
    let needs_tau = plan.measures.contains(&Measure::TauSef);
    let mut r_needed = plan.measures.iter().filter_map(Measure::distance).max().unwrap_or(1);
    if needs_tau {
        r_needed = r_needed.max(tau_cfg.r_max.unwrap_or(spec.n_sites / 2).min(spec.n_sites / 2));
    }
    let sol = FfSolution::new(&p, r_needed)?;
    rec.energy = sol.energy();
    let mut pairs: HashMap<usize, Rdm2> = HashMap::new();
    let mut pair = |r: usize| -> Result<Rdm2> {
        if let Some(m) = pairs.get(&r) {
            return Ok(*m);
        }
        let m = sol.rdm2(r)?;
        pairs.insert(r, m);
        Ok(m)
    };
    plan.measures
        .iter()
        .map(|m| match *m {
            Measure::TauSef => sol.tau_sef(tau_cfg),
            Measure::OneVsRest => Ok(vn_entropy(&sol.rdm1()?, LogBase::Two)),
            Measure::Eof(r) => Ok(eof(&pair(r)?)),
            Measure::E2v(r) => Ok(vn_entropy(&pair(r)?, plan.settings.e2v_base)),
            Measure::Qd(r) => quantum_discord(&pair(r)?, &plan.settings.discord),
        })
        .collect()
}

/// `(param, value)` series of one measure column.
pub fn series(records: &[ScanRecord], index: usize) -> (Vec<f64>, Vec<f64>) {
    records.iter().map(|r| (r.value, r.values.get(index).copied().unwrap_or(f64::NAN))).unzip()
}

/// Finite-difference derivative on a uniform grid: central in the interior,
/// third-order one-sided stencils at the ends (second order with only three points).
pub fn derivative(xs: &[f64], ys: &[f64]) -> Result<Vec<f64>> {
    let n = xs.len();
    if ys.len() != n {
        return Err(QptError::DimensionMismatch { expected: n, got: ys.len() });
    }
    if n < 3 {
        return Err(QptError::InsufficientData { needed: 3, got: n });
    }
    let h = (xs[n - 1] - xs[0]) / (n - 1) as f64;
    if !(h > 0.0) {
        return Err(QptError::InvalidGrid("derivative needs ascending abscissae".into()));
    }
    for w in xs.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-6 * h {
            return Err(QptError::InvalidGrid("derivative needs a uniform grid".into()));
        }
    }
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        d[i] = (ys[i + 1] - ys[i - 1]) / (2.0 * h);
    }
    if n >= 4 {
        d[0] = (-11.0 * ys[0] + 18.0 * ys[1] - 9.0 * ys[2] + 2.0 * ys[3]) / (6.0 * h);
        d[n - 1] = (11.0 * ys[n - 1] - 18.0 * ys[n - 2] + 9.0 * ys[n - 3] - 2.0 * ys[n - 4]) / (6.0 * h);
    } else {
        d[0] = (-3.0 * ys[0] + 4.0 * ys[1] - ys[2]) / (2.0 * h);
        d[n - 1] = (3.0 * ys[n - 1] - 4.0 * ys[n - 2] + ys[n - 3]) / (2.0 * h);
    }
    Ok(d)
}

/// Derivative of one measure column of a scan.
pub fn records_derivative(records: &[ScanRecord], index: usize) -> Result<Vec<(f64, f64)>> {
    let (xs, ys) = series(records, index);
    Ok(xs.iter().copied().zip(derivative(&xs, &ys)?).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumKind {
    Min,
    Max,
    Jump,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    /// Refined location; for jumps the midpoint of the two grid points.
    pub location: f64,
    /// Refined value; for jumps the signed step.
    pub value: f64,
    pub kind: ExtremumKind,
    /// Grid index of the discrete extremum (left point of a jump).
    pub index: usize,
    /// Height above the higher of the two bounding valleys (maxima) or
    /// below the lower bounding peak (minima); the step size for jumps.
    pub prominence: f64,
}

/// Half-width, in grid steps, of the neighbourhood used for jump detection.
pub const JUMP_WINDOW: usize = 8;

/// Local extrema refined by a three-point parabola, plus jumps (see
/// [`is_jump`]). Extrema next to a jump keep their grid location.
/// NaN points break the series; nothing is reported next to them.
pub fn find_extrema(xs: &[f64], ys: &[f64]) -> Vec<Extremum> {
    let n = xs.len().min(ys.len());
    let mut out = Vec::new();
    if n < 2 {
        return out;
    }

    let diffs: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]).abs()).collect();
    let scale = ys.iter().filter(|y| y.is_finite()).fold(0.0f64, |m, y| m.max(y.abs()));
    let floor = 1e-12 * scale.max(1e-300);
    let jumps: Vec<bool> = (0..n - 1).map(|i| is_jump(&diffs, i, floor)).collect();

    for i in 1..n - 1 {
        let (a, b, c) = (ys[i - 1], ys[i], ys[i + 1]);
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            continue;
        }
        let kind = if b > a && b >= c {
            ExtremumKind::Max
        } else if b < a && b <= c {
            ExtremumKind::Min
        } else {
            continue;
        };
        // a plateau end counts once, at its first point
        if b == c && i + 2 < n && plateau_continues(ys, i, kind) {
            continue;
        }
        let h = xs[i + 1] - xs[i];
        let curv = a - 2.0 * b + c;
        let beside_jump = jumps[i - 1] || jumps[i];
        let (location, value) = if curv != 0.0 && !beside_jump {
            let delta = (0.5 * (a - c) / curv).clamp(-1.0, 1.0);
            (xs[i] + delta * h, b - 0.25 * (a - c) * delta)
        } else {
            (xs[i], b)
        };
        out.push(Extremum { location, value, kind, index: i, prominence: prominence(ys, i, kind) });
    }
    for i in 0..n - 1 {
        if jumps[i] {
            out.push(Extremum {
                location: 0.5 * (xs[i] + xs[i + 1]),
                value: ys[i + 1] - ys[i],
                kind: ExtremumKind::Jump,
                index: i,
                prominence: diffs[i],
            });
        }
    }
    out.sort_by(|p, q| p.location.total_cmp(&q.location));
    out
}

/// A step is a jump when it exceeds ten times the median of the neighbouring
/// steps within [`JUMP_WINDOW`] points on either side. Using a local median
/// keeps long flat stretches from making every later step look like a jump.
fn is_jump(diffs: &[f64], i: usize, floor: f64) -> bool {
    let d = diffs[i];
    if !d.is_finite() || d <= floor {
        return false;
    }
    let lo = i.saturating_sub(JUMP_WINDOW);
    let hi = (i + JUMP_WINDOW + 1).min(diffs.len());
    let mut near: Vec<f64> =
        (lo..hi).filter(|&j| j != i && diffs[j].is_finite()).map(|j| diffs[j].max(floor)).collect();
    if near.is_empty() {
        return false;
    }
    near.sort_by(f64::total_cmp);
    d > 10.0 * near[near.len() / 2]
}

/// Whether the flat run starting at `i` ends on the same side it started,
/// i.e. the plateau is a shelf rather than a flat-topped extremum.
fn plateau_continues(ys: &[f64], i: usize, kind: ExtremumKind) -> bool {
    let b = ys[i];
    let mut j = i + 1;
    while j < ys.len() && ys[j] == b {
        j += 1;
    }
    match ys.get(j) {
        None => false,
        Some(&next) => match kind {
            ExtremumKind::Max => next > b,
            ExtremumKind::Min => next < b,
            ExtremumKind::Jump => false,
        },
    }
}

/// Topographic prominence of the extremum at `i`.
fn prominence(ys: &[f64], i: usize, kind: ExtremumKind) -> f64 {
    let sign = if kind == ExtremumKind::Max { 1.0 } else { -1.0 };
    let v = sign * ys[i];
    let side = |range: &mut dyn Iterator<Item = usize>| {
        let mut lowest = v;
        for j in range {
            let y = sign * ys[j];
            if !y.is_finite() {
                break;
            }
            if y > v {
                break;
            }
            lowest = lowest.min(y);
        }
        lowest
    };
    let left = side(&mut (0..i).rev());
    let right = side(&mut (i + 1..ys.len()));
    v - left.max(right)
}

/// The deepest minimum or highest maximum of a series, or `None` if it has
/// no interior extremum of that kind.
pub fn dominant_extremum(xs: &[f64], ys: &[f64], kind: ExtremumKind) -> Option<Extremum> {
    let sign = if kind == ExtremumKind::Max { -1.0 } else { 1.0 };
    find_extrema(xs, ys)
        .into_iter()
        .filter(|e| e.kind == kind)
        .min_by(|a, b| (sign * a.value).total_cmp(&(sign * b.value)))
}

/// Linear fit of extremum values against `1 / N^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FssResult {
    /// `(N, extremum location, extremum value)`.
    pub points: Vec<(usize, f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square deviation of the points from the line.
    pub residual: f64,
    /// Value at `1 / N^2 = 0` (equal to the intercept).
    pub extrapolated: f64,
}

/// Unweighted least squares of value vs `1 / N^2` over at least three sizes.
pub fn finite_size_scaling(points: &[(usize, f64, f64)]) -> Result<FssResult> {
    let mut sizes: Vec<usize> = points.iter().map(|p| p.0).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 3 {
        return Err(QptError::InsufficientData { needed: 3, got: sizes.len() });
    }
    if points.iter().any(|p| p.0 == 0 || !p.2.is_finite()) {
        return Err(QptError::InvalidConfig("scaling points need N > 0 and finite values".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| 1.0 / (p.0 as f64).powi(2)).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.2).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / m).sqrt();
    Ok(FssResult { points: points.to_vec(), slope, intercept, residual, extrapolated: intercept })
}

/// Derivative map over two parameters and the ridge lines running through it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub x_name: String,
    pub y_name: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `values[ix][iy]`: d tau_SEF / d y; NaN where a point failed.
    pub values: Vec<Vec<f64>>,
    /// Polylines of `(x, y)` derivative extrema, one point per column.
    pub ridges: Vec<Vec<(f64, f64)>>,
}

impl PhaseDiagram {
    /// Ridges spanning at least half the columns.
    pub fn long_ridges(&self) -> Vec<&Vec<(f64, f64)>> {
        let need = self.xs.len().div_ceil(2).max(2);
        self.ridges.iter().filter(|l| l.len() >= need).collect()
    }

    /// Regions separated by the long ridges of a map whose ridges run across it.
    pub fn region_count(&self) -> usize {
        self.long_ridges().len() + 1
    }
}

/// Options of the ridge extraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RidgeOptions {
    /// Largest y displacement, in grid steps, between consecutive ridge points.
    pub max_jump_steps: f64,
    /// Peaks with prominence below this fraction of the column's range are ignored.
    pub min_relative_prominence: f64,
}

impl Default for RidgeOptions {
    fn default() -> Self {
        RidgeOptions { max_jump_steps: 3.0, min_relative_prominence: 0.05 }
    }
}

/// Scans `y` at each `x`, differentiates tau_SEF along `y` and chains the
/// derivative extrema of neighbouring columns into ridge lines.
pub fn phase_diagram(
    template: &ModelSpec,
    x_axis: (&str, Grid),
    y_axis: (&str, Grid),
    engine: Engine,
    settings: &MeasureSettings,
    execution: Execution,
    ridge: &RidgeOptions,
) -> Result<PhaseDiagram> {
    let (x_name, x_grid) = x_axis;
    let (y_name, y_grid) = y_axis;
    x_grid.validate()?;
    y_grid.validate()?;
    if x_name == y_name {
        return Err(QptError::InvalidConfig("the two axes must differ".into()));
    }
    let xs = x_grid.points();
    let ys = y_grid.points();
    let cells: Vec<(f64, f64)> = xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).collect();
    let mut base = ScanPlan::new(template.with_param(x_name, xs[0])?, y_name, y_grid, vec![Measure::TauSef], engine);
    base.settings = *settings;
    base.validate()?;
    let taus: Vec<f64> = map_ordered(&cells, execution, |_, &(x, y)| {
        let mut plan = base.clone();
        match template.with_param(x_name, x) {
            Ok(t) => plan.template = t,
            Err(_) => return f64::NAN,
        }
        let rec = evaluate_point(&plan, y);
        rec.values[0]
    });

    let values: Vec<Vec<f64>> = taus
        .chunks(ys.len())
        .map(|col| if ys.len() >= 3 { derivative(&ys, col).expect("uniform grid") } else { vec![f64::NAN; col.len()] })
        .collect();
    let ridges = if ys.len() >= 3 { chain_ridges(&xs, &ys, &values, ridge) } else { Vec::new() };
    Ok(PhaseDiagram { x_name: x_name.to_string(), y_name: y_name.to_string(), xs, ys, values, ridges })
}

/// Links per-column peaks of the magnitude into polylines by nearest-neighbour
/// continuation.
pub fn chain_ridges(xs: &[f64], ys: &[f64], values: &[Vec<f64>], opts: &RidgeOptions) -> Vec<Vec<(f64, f64)>> {
    let step = if ys.len() > 1 { ys[1] - ys[0] } else { 1.0 };
    let max_jump = opts.max_jump_steps * step;
    let mut lines: Vec<Vec<(f64, f64)>> = Vec::new();
    // lines that received a point in the previous column
    let mut active: Vec<usize> = Vec::new();
    for (ix, col) in values.iter().enumerate() {
        // ridges and valleys alike are peaks of |d tau / d y|; the shoulder
        // beside a sharp valley is then a dip instead of a second line
        let magnitude: Vec<f64> = col.iter().map(|v| v.abs()).collect();
        let finite: Vec<f64> = magnitude.iter().copied().filter(|v| v.is_finite()).collect();
        let range = finite.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
            - finite.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        let threshold = opts.min_relative_prominence * range;
        let mut picks: Vec<f64> = find_extrema(ys, &magnitude)
            .into_iter()
            .filter(|e| e.kind == ExtremumKind::Max && e.prominence > threshold && range > 0.0)
            .map(|e| e.location)
            .collect();
        picks.sort_by(f64::total_cmp);

        let mut next_active = Vec::new();
        let mut taken = vec![false; picks.len()];
        // candidate links sorted by distance, greedy
        let mut links: Vec<(f64, usize, usize)> = Vec::new();
        for &li in &active {
            let last = lines[li].last().expect("non-empty line").1;
            for (pi, &y) in picks.iter().enumerate() {
                let d = (y - last).abs();
                if d <= max_jump + 1e-12 {
                    links.push((d, li, pi));
                }
            }
        }
        links.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut used_line = vec![false; lines.len()];
        for (_, li, pi) in links {
            if !used_line[li] && !taken[pi] {
                used_line[li] = true;
                taken[pi] = true;
                lines[li].push((xs[ix], picks[pi]));
                next_active.push(li);
            }
        }
        for (pi, &y) in picks.iter().enumerate() {
            if !taken[pi] {
                lines.push(vec![(xs[ix], y)]);
                next_active.push(lines.len() - 1);
            }
        }
        active = next_active;
    }
    lines
}
