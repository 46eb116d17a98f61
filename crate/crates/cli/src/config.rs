//! Run configuration: command-line flags layered over an optional TOML file.
//!
//! Every flag has a config key of the same name (dashes become underscores).
//! A CSV written by `qpt` can stand in for the TOML file, since its `#`
//! header echoes the effective configuration.

use crate::error::{CliError, CliResult};
use clap::Args;
use qpt_core::analysis::{Engine, Grid, Measure, MeasureSettings, RidgeOptions, ScanPlan, SectorChoice};
use qpt_core::eigensolver::SolverOptions;
use qpt_core::freefermion::KOffset;
use qpt_core::hilbert::{Family, ModelParams, ModelSpec};
use qpt_core::par::Execution;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const DEFAULT_SEED: u64 = 24301;
pub const THREADS_ENV: &str = "QPT_THREADS";

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// Model family: xxz, ssh, sshxy or xymi.
    #[arg(long)]
    pub model: Option<String>,
    /// Number of sites N.
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub eta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// ed (exact diagonalization) or ff (free fermions, xymi only).
    #[arg(long)]
    pub engine: Option<String>,
    /// S_z block for ed: auto, full, zero, lowest or nup=K.
    #[arg(long)]
    pub sector: Option<String>,
    /// Momentum grid for ff: auto, integer or half.
    #[arg(long)]
    pub k_offset: Option<String>,
    /// Seeds the Lanczos start vector and the validate draws.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Eigensolver residual target.
    #[arg(long)]
    pub tol: Option<f64>,
    /// 1-based anchor qubit of tau_SEF and of the pair measures.
    #[arg(long)]
    pub anchor: Option<usize>,
    /// Largest pair distance summed in tau_SEF.
    #[arg(long)]
    pub tau_r_max: Option<usize>,
    /// Stop the tau_SEF sum once a pair term falls below this.
    #[arg(long)]
    pub tau_tail_tol: Option<f64>,
    /// Polar points of the coarse discord grid.
    #[arg(long)]
    pub qd_theta: Option<usize>,
    /// Azimuthal points of the coarse discord grid.
    #[arg(long)]
    pub qd_phi: Option<usize>,
    /// Refinement levels of the discord search.
    #[arg(long)]
    pub qd_levels: Option<usize>,
    /// Window shrink factor per discord refinement level.
    #[arg(long)]
    pub qd_shrink: Option<f64>,
    /// Worker threads; falls back to QPT_THREADS, then to every core.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    /// Swept coupling (the y axis of a phase diagram).
    #[arg(long)]
    pub param: Option<String>,
    /// Grid as lo:hi:step.
    #[arg(long, allow_hyphen_values = true)]
    pub range: Option<String>,
    /// Shift every grid point by half a step.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub half_step: Option<bool>,
    /// Comma-separated measures, e.g. tau_sef,eof@1,e2v@2,qd,one_vs_rest.
    #[arg(long)]
    pub measures: Option<String>,
    /// Add a per-point wall_time column (makes the CSV run-dependent).
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub timings: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct PhaseArgs {
    /// Coupling along the x axis.
    #[arg(long)]
    pub x_param: Option<String>,
    /// x grid as lo:hi:step.
    #[arg(long, allow_hyphen_values = true)]
    pub x_range: Option<String>,
    /// Largest ridge step between columns, in y grid steps.
    #[arg(long)]
    pub ridge_jump: Option<f64>,
    /// Peaks below this fraction of a column's range are not ridge points.
    #[arg(long)]
    pub ridge_prominence: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct FssArgs {
    /// Scan CSVs, one per size.
    #[arg(long, value_delimiter = ',')]
    pub inputs: Option<Vec<PathBuf>>,
    /// Column whose extremum is fitted.
    #[arg(long)]
    pub column: Option<String>,
    /// min or max.
    #[arg(long)]
    pub extremum: Option<String>,
    /// Restrict the search to lo:hi.
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct ValidateArgs {
    /// Ring sizes compared.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Random coupling draws per size.
    #[arg(long)]
    pub draws: Option<usize>,
    /// Largest tolerated absolute deviation.
    #[arg(long)]
    pub validate_tol: Option<f64>,
    /// Extra couplings gamma,lambda,alpha,beta checked at every size.
    #[arg(long, allow_hyphen_values = true)]
    pub points: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct OutputArgs {
    /// Main output file (CSV, or JSON for fss and validate); stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON report.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// SVG plot.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

/// Every key a run can carry.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub model: ModelArgs,
    #[serde(flatten)]
    pub sweep: SweepArgs,
    #[serde(flatten)]
    pub phase: PhaseArgs,
    #[serde(flatten)]
    pub fss: FssArgs,
    #[serde(flatten)]
    pub validate: ValidateArgs,
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Scan,
    Fss,
    PhaseDiag,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Scan => "scan",
            Command::Fss => "fss",
            Command::PhaseDiag => "phasediag",
            Command::Validate => "validate",
        }
    }
}

/// Reads a TOML config, or the echoed config in the header of a `qpt` CSV.
pub fn read_config_file(path: &Path) -> CliResult<toml::Table> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let toml_text = if text.starts_with("# qpt") {
        text.lines()
            .skip(1)
            .take_while(|l| l.starts_with('#'))
            .map(|l| l.strip_prefix("# ").unwrap_or(&l[1..]))
            .collect::<Vec<_>>()
            .join("\n")
    } else {
        text
    };
    toml_text.parse::<toml::Table>().map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

/// Layers `flags` over the file table and rejects keys no run understands.
pub fn merge(file: Option<toml::Table>, flags: &impl Serialize) -> CliResult<RunConfig> {
    let mut table = file.unwrap_or_default();
    let flag_table = toml::Table::try_from(flags).map_err(|e| CliError::usage(e.to_string()))?;
    table.extend(flag_table);
    let cfg: RunConfig = table.clone().try_into().map_err(|e: toml::de::Error| CliError::usage(e.message()))?;
    let known = toml::Table::try_from(&cfg).map_err(|e| CliError::usage(e.to_string()))?;
    if let Some(key) = table.keys().find(|k| !known.contains_key(*k)) {
        return Err(CliError::usage(format!("unknown config key '{key}'")));
    }
    Ok(cfg)
}

fn require<T: Clone>(value: &Option<T>, key: &str) -> CliResult<T> {
    value.clone().ok_or_else(|| CliError::usage(format!("missing required key '{key}'")))
}

fn parse_grid(text: &str, key: &str) -> CliResult<Grid> {
    text.parse::<Grid>().map_err(|e| CliError::usage(format!("{key}: {e}")))
}

impl RunConfig {
    /// Fills every key the command reads with its default, so the echo is
    /// complete enough to replay the run.
    pub fn resolve_defaults(&mut self, cmd: Command) {
        let m = &mut self.model;
        m.seed.get_or_insert(DEFAULT_SEED);
        match cmd {
            Command::Scan | Command::PhaseDiag => {
                let engine = m.engine.get_or_insert_with(|| "ed".into()).clone();
                if engine == "ff" {
                    m.k_offset.get_or_insert_with(|| "auto".into());
                } else {
                    m.sector.get_or_insert_with(|| "auto".into());
                    m.tol.get_or_insert(SolverOptions::default().tol);
                }
                m.anchor.get_or_insert(1);
                self.sweep.half_step.get_or_insert(false);
                if cmd == Command::Scan {
                    self.sweep.timings.get_or_insert(false);
                } else {
                    let r = RidgeOptions::default();
                    self.phase.ridge_jump.get_or_insert(r.max_jump_steps);
                    self.phase.ridge_prominence.get_or_insert(r.min_relative_prominence);
                }
            }
            Command::Fss => {
                self.fss.column.get_or_insert_with(|| "tau_sef".into());
                self.fss.extremum.get_or_insert_with(|| "min".into());
            }
            Command::Validate => {
                m.k_offset.get_or_insert_with(|| "auto".into());
                m.tol.get_or_insert(1e-12);
                self.validate.sizes.get_or_insert_with(|| vec![7, 9, 11]);
                self.validate.draws.get_or_insert(20);
                self.validate.validate_tol.get_or_insert(1e-6);
            }
        }
    }

    /// The effective configuration as TOML, without the worker count (which
    /// does not affect results).
    pub fn echo(&self) -> String {
        let mut shown = self.clone();
        shown.model.threads = None;
        toml::to_string(&shown).unwrap_or_default()
    }

    pub fn family(&self) -> CliResult<Family> {
        require(&self.model.model, "model")?.parse::<Family>().map_err(CliError::from)
    }

    pub fn model_spec(&self) -> CliResult<ModelSpec> {
        let family = self.family()?;
        let n = require(&self.model.size, "size")?;
        let m = &self.model;
        let mut params = ModelParams::zeros(family);
        let couplings = [
            ("delta", m.delta),
            ("eta", m.eta),
            ("gamma1", m.gamma1),
            ("gamma2", m.gamma2),
            ("gamma", m.gamma),
            ("lambda", m.lambda),
            ("alpha", m.alpha),
            ("beta", m.beta),
        ];
        for (name, value) in couplings {
            if let Some(v) = value {
                params.set(name, v)?;
            }
        }
        Ok(ModelSpec::new(params, n)?)
    }

    pub fn engine(&self) -> CliResult<Engine> {
        let m = &self.model;
        match m.engine.as_deref().unwrap_or("ed") {
            "ed" => {
                let sector: SectorChoice = m.sector.as_deref().unwrap_or("auto").parse()?;
                let mut solver = SolverOptions { seed: m.seed.unwrap_or(DEFAULT_SEED), ..SolverOptions::default() };
                if let Some(tol) = m.tol {
                    solver.tol = tol;
                }
                Ok(Engine::Ed { sector, solver })
            }
            "ff" => Ok(Engine::FreeFermion { k_offset: self.k_offset()? }),
            other => Err(CliError::usage(format!("engine: unknown engine '{other}' (expected ed or ff)"))),
        }
    }

    pub fn k_offset(&self) -> CliResult<KOffset> {
        Ok(self.model.k_offset.as_deref().unwrap_or("auto").parse()?)
    }

    pub fn settings(&self, engine: &Engine) -> CliResult<MeasureSettings> {
        let m = &self.model;
        let mut s = MeasureSettings::default();
        let anchor = m.anchor.unwrap_or(1);
        if anchor == 0 {
            return Err(CliError::usage("anchor: sites are numbered from 1"));
        }
        s.tau.anchor = anchor - 1;
        s.ff_tau.anchor = anchor - 1;
        let tau = match engine {
            Engine::Ed { .. } => &mut s.tau,
            Engine::FreeFermion { .. } => &mut s.ff_tau,
        };
        if let Some(r) = m.tau_r_max {
            tau.r_max = Some(r);
        }
        if let Some(t) = m.tau_tail_tol {
            tau.tail_tol = t;
        }
        let d = &mut s.discord;
        d.n_theta = m.qd_theta.unwrap_or(d.n_theta);
        d.n_phi = m.qd_phi.unwrap_or(d.n_phi);
        d.levels = m.qd_levels.unwrap_or(d.levels);
        d.shrink = m.qd_shrink.unwrap_or(d.shrink);
        Ok(s)
    }

    /// Worker pool from the `threads` key, else `QPT_THREADS`, else all cores.
    pub fn execution(&self) -> CliResult<Execution> {
        let threads = match self.model.threads {
            Some(t) => t,
            None => match std::env::var(THREADS_ENV) {
                Ok(v) => v
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::usage(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?,
                Err(_) => return Ok(Execution::default()),
            },
        };
        if threads == 0 {
            return Err(CliError::usage("threads must be at least 1"));
        }
        Ok(Execution::threads(threads))
    }

    pub fn y_grid(&self) -> CliResult<Grid> {
        let grid = parse_grid(&require(&self.sweep.range, "range")?, "range")?;
        Ok(if self.sweep.half_step == Some(true) { grid.half_step_offset() } else { grid })
    }

    pub fn x_grid(&self) -> CliResult<Grid> {
        let grid = parse_grid(&require(&self.phase.x_range, "x_range")?, "x_range")?;
        Ok(if self.sweep.half_step == Some(true) { grid.half_step_offset() } else { grid })
    }

    pub fn ridge_options(&self) -> RidgeOptions {
        let d = RidgeOptions::default();
        RidgeOptions {
            max_jump_steps: self.phase.ridge_jump.unwrap_or(d.max_jump_steps),
            min_relative_prominence: self.phase.ridge_prominence.unwrap_or(d.min_relative_prominence),
        }
    }

    pub fn scan_plan(&self) -> CliResult<ScanPlan> {
        let template = self.model_spec()?;
        let axis = require(&self.sweep.param, "param")?;
        let measures = Measure::parse_list(&require(&self.sweep.measures, "measures")?)
            .map_err(|e| CliError::usage(format!("measures: {e}")))?;
        let engine = self.engine()?;
        let mut plan = ScanPlan::new(template, &axis, self.y_grid()?, measures, engine);
        plan.settings = self.settings(&engine)?;
        plan.execution = self.execution()?;
        plan.validate()?;
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_keys() {
        let file: toml::Table = "model = \"xxz\"\nsize = 8\ndelta = 0.5\n".parse().unwrap();
        let flags = ModelArgs { size: Some(10), ..Default::default() };
        let cfg = merge(Some(file), &flags).unwrap();
        assert_eq!(cfg.model.size, Some(10));
        assert_eq!(cfg.model.delta, Some(0.5));
        assert_eq!(cfg.model_spec().unwrap().n_sites, 10);
    }

    #[test]
    fn unknown_keys_are_named() {
        let file: toml::Table = "model = \"xxz\"\nsizes_typo = 8\n".parse().unwrap();
        let err = merge(Some(file), &ModelArgs::default()).unwrap_err();
        assert!(err.to_string().contains("sizes_typo"), "{err}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn echo_replays_to_the_same_config() {
        let mut cfg = RunConfig::default();
        cfg.model.model = Some("xymi".into());
        cfg.model.size = Some(101);
        cfg.model.gamma = Some(0.1);
        cfg.model.engine = Some("ff".into());
        cfg.model.threads = Some(3);
        cfg.sweep.range = Some("-2:3:0.01".into());
        cfg.resolve_defaults(Command::Scan);
        let echoed: toml::Table = cfg.echo().parse().unwrap();
        let mut back = merge(Some(echoed), &ModelArgs::default()).unwrap();
        back.model.threads = Some(3);
        assert_eq!(back, cfg);
    }

    #[test]
    fn foreign_couplings_are_rejected() {
        let mut cfg = RunConfig::default();
        cfg.model.model = Some("xxz".into());
        cfg.model.size = Some(8);
        cfg.model.lambda = Some(1.0);
        assert!(cfg.model_spec().is_err());
    }
}
