use crate::config::{
    merge, read_config_file, Command, FssArgs, ModelArgs, OutputArgs, PhaseArgs, RunConfig, SweepArgs, ValidateArgs,
};
use crate::csvio::{fmt_f64, header, parse_f64, read_scan_file, ScanWriter, VERSION};
use crate::error::{CliError, CliResult};
use crate::svg;
use crate::validate::{self, OffsetChoice, ValidateOptions};
use clap::{Args, Parser, Subcommand};
use qpt_core::analysis::{
    dominant_extremum, finite_size_scaling, phase_diagram, scan_with_sink, series, ExtremumKind, ScanRecord,
};
use serde::Serialize;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "qpt", version, about = "Residual multipartite entanglement as a phase-transition detector")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Sweep one coupling and write the measures at every grid point.
    Scan(ScanCmd),
    /// Fit extremum values of several scans against 1/N^2.
    Fss(FssCmd),
    /// Map d tau_SEF / d y over two couplings and trace its ridges.
    Phasediag(PhaseCmd),
    /// Check the free-fermion solution against exact diagonalization.
    Validate(ValidateCmd),
}

#[derive(Debug, Args, Serialize)]
struct ScanCmd {
    /// TOML file, or an earlier qpt CSV, supplying defaults for every flag.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    sweep: SweepArgs,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
struct FssCmd {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    fss: FssArgs,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
struct PhaseCmd {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    sweep: SweepArgs,
    #[command(flatten)]
    #[serde(flatten)]
    phase: PhaseArgs,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
struct ValidateCmd {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    validate: ValidateArgs,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputArgs,
}

fn load(path: &Option<PathBuf>, flags: &impl Serialize, cmd: Command) -> CliResult<RunConfig> {
    let file = path.as_deref().map(read_config_file).transpose()?;
    let mut cfg = merge(file, flags)?;
    cfg.resolve_defaults(cmd);
    Ok(cfg)
}

/// Parses the arguments, runs the subcommand and returns the exit status.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let res = match cli.cmd {
        Cmd::Scan(c) => load(&c.config, &c, Command::Scan).and_then(|cfg| cmd_scan(&cfg)),
        Cmd::Fss(c) => load(&c.config, &c, Command::Fss).and_then(|cfg| cmd_fss(&cfg)),
        Cmd::Phasediag(c) => load(&c.config, &c, Command::PhaseDiag).and_then(|cfg| cmd_phasediag(&cfg)),
        Cmd::Validate(c) => load(&c.config, &c, Command::Validate).and_then(|cfg| cmd_validate(&cfg)),
    };
    match res {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("qpt: {e}");
            e.exit_code()
        }
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn sink(path: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_json(path: &Option<PathBuf>, value: &impl Serialize) -> CliResult<()> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// The config as a table, leaving out unset keys.
fn config_table(cfg: &RunConfig) -> toml::Table {
    toml::Table::try_from(cfg).unwrap_or_default()
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct ScanReport<'a> {
    version: &'static str,
    command: &'static str,
    config: toml::Table,
    columns: Vec<String>,
    records: &'a [ScanRecord],
}

pub fn cmd_scan(cfg: &RunConfig) -> CliResult<()> {
    let plan = cfg.scan_plan()?;
    let mut writer = ScanWriter::new(
        sink(&cfg.output.out)?,
        &header(Command::Scan, cfg),
        &plan.axis,
        &plan.measures,
        cfg.sweep.timings == Some(true),
    )?;
    let mut records = Vec::new();
    let mut io_error = None;
    scan_with_sink(&plan, |rec| {
        if let Err(e) = writer.write(rec) {
            io_error = Some(e);
            return Err(qpt_core::QptError::InvalidConfig("output failed".into()));
        }
        records.push(rec.clone());
        Ok(())
    })
    .map_err(|e| io_error.take().unwrap_or_else(|| e.into()))?;

    if cfg.output.json.is_some() {
        let columns = plan.measures.iter().map(|m| m.column()).collect();
        let report =
            ScanReport { version: VERSION, command: "scan", config: config_table(cfg), columns, records: &records };
        write_json(&cfg.output.json, &report)?;
    }
    if let Some(path) = &cfg.output.svg {
        let panels: Vec<(String, Vec<(f64, f64)>)> = plan
            .measures
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let (xs, ys) = series(&records, i);
                (m.to_string(), xs.into_iter().zip(ys).collect())
            })
            .collect();
        let title = format!("{} N = {}", plan.template.family(), plan.template.n_sites);
        write_text(path, &svg::line_panels(&title, &plan.axis, &panels))?;
    }
    let failed: Vec<&ScanRecord> = records.iter().filter(|r| !r.is_ok()).collect();
    if let Some(first) = failed.first() {
        return Err(CliError::Numerical(format!(
            "{} of {} points failed; first at {} = {}: {}",
            failed.len(),
            records.len(),
            plan.axis,
            first.value,
            first.error.as_deref().unwrap_or("")
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct FssPoint {
    n_sites: usize,
    location: f64,
    value: f64,
}

#[derive(Serialize)]
struct FssReport {
    version: &'static str,
    command: &'static str,
    config: toml::Table,
    column: String,
    extremum: ExtremumKind,
    points: Vec<FssPoint>,
    slope: f64,
    intercept: f64,
    residual: f64,
    extrapolated: f64,
}

fn parse_window(s: &str) -> CliResult<(f64, f64)> {
    match s.split_once(':') {
        Some((a, b)) => Ok((parse_f64(a)?, parse_f64(b)?)),
        None => Err(CliError::usage(format!("window: expected lo:hi, got '{s}'"))),
    }
}

pub fn cmd_fss(cfg: &RunConfig) -> CliResult<()> {
    let inputs = cfg.fss.inputs.clone().unwrap_or_default();
    let column = cfg.fss.column.clone().unwrap_or_else(|| "tau_sef".into());
    let kind = match cfg.fss.extremum.as_deref().unwrap_or("min") {
        "min" => ExtremumKind::Min,
        "max" => ExtremumKind::Max,
        other => return Err(CliError::usage(format!("extremum: expected min or max, got '{other}'"))),
    };
    let window = cfg.fss.window.as_deref().map(parse_window).transpose()?;
    let mut points = Vec::new();
    for path in &inputs {
        let scan = read_scan_file(path)?;
        let idx = scan.column(&column)?;
        let n = scan.records.first().map(|r| r.n_sites).ok_or_else(|| CliError::usage("empty scan file"))?;
        if scan.records.iter().any(|r| r.n_sites != n) {
            return Err(CliError::usage(format!("{}: mixed sizes in one file", path.display())));
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = {
            let (xs, ys) = series(&scan.records, idx);
            xs.into_iter().zip(ys).filter(|(x, _)| window.is_none_or(|(lo, hi)| *x >= lo && *x <= hi)).unzip()
        };
        let e = dominant_extremum(&xs, &ys, kind).ok_or_else(|| {
            CliError::Numerical(format!("{}: no interior {kind:?} of {column}", path.display()).to_lowercase())
        })?;
        points.push((n, e.location, e.value));
    }
    let fit = finite_size_scaling(&points)?;
    let report = FssReport {
        version: VERSION,
        command: "fss",
        config: config_table(cfg),
        column: column.clone(),
        extremum: kind,
        points: points.iter().map(|&(n, location, value)| FssPoint { n_sites: n, location, value }).collect(),
        slope: fit.slope,
        intercept: fit.intercept,
        residual: fit.residual,
        extrapolated: fit.extrapolated,
    };
    write_json(if cfg.output.json.is_some() { &cfg.output.json } else { &cfg.output.out }, &report)?;
    if let Some(path) = &cfg.output.svg {
        write_text(path, &svg::scaling_plot(&format!("{column} extremum vs 1/N^2"), &fit))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct PhaseReport<'a> {
    version: &'static str,
    command: &'static str,
    config: toml::Table,
    x_name: &'a str,
    y_name: &'a str,
    xs: &'a [f64],
    ys: &'a [f64],
    ridges: &'a [Vec<(f64, f64)>],
    long_ridges: usize,
    region_count: usize,
}

pub fn cmd_phasediag(cfg: &RunConfig) -> CliResult<()> {
    let template = cfg.model_spec()?;
    let x_name = cfg.phase.x_param.clone().ok_or_else(|| CliError::usage("missing required key 'x_param'"))?;
    let y_name = cfg.sweep.param.clone().ok_or_else(|| CliError::usage("missing required key 'param'"))?;
    let engine = cfg.engine()?;
    let settings = cfg.settings(&engine)?;
    let pd = phase_diagram(
        &template,
        (&x_name, cfg.x_grid()?),
        (&y_name, cfg.y_grid()?),
        engine,
        &settings,
        cfg.execution()?,
        &cfg.ridge_options(),
    )?;

    let mut out = sink(&cfg.output.out)?;
    out.write_all(header(Command::PhaseDiag, cfg).as_bytes())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([x_name.as_str(), y_name.as_str(), &format!("dtau_sef_d{y_name}")])?;
    for (ix, x) in pd.xs.iter().enumerate() {
        for (iy, y) in pd.ys.iter().enumerate() {
            w.write_record([fmt_f64(*x), fmt_f64(*y), fmt_f64(pd.values[ix][iy])])?;
        }
    }
    w.flush()?;
    if cfg.output.json.is_some() {
        let report = PhaseReport {
            version: VERSION,
            command: "phasediag",
            config: config_table(cfg),
            x_name: &pd.x_name,
            y_name: &pd.y_name,
            xs: &pd.xs,
            ys: &pd.ys,
            ridges: &pd.ridges,
            long_ridges: pd.long_ridges().len(),
            region_count: pd.region_count(),
        };
        write_json(&cfg.output.json, &report)?;
    }
    if let Some(path) = &cfg.output.svg {
        let title = format!("d tau_SEF / d {y_name}, {} N = {}", template.family(), template.n_sites);
        write_text(path, &svg::heat_map(&title, &pd))?;
    }
    let bad = pd.values.iter().flatten().filter(|v| !v.is_finite()).count();
    if bad > 0 && pd.ys.len() >= 3 {
        return Err(CliError::Numerical(format!("{bad} grid cells have no finite derivative")));
    }
    Ok(())
}

pub fn validate_options(cfg: &RunConfig) -> CliResult<ValidateOptions> {
    let d = ValidateOptions::default();
    let points = cfg
        .validate
        .points
        .as_deref()
        .unwrap_or_default()
        .iter()
        .map(|s| validate::parse_point(s))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(ValidateOptions {
        sizes: cfg.validate.sizes.clone().unwrap_or(d.sizes),
        draws: cfg.validate.draws.unwrap_or(d.draws),
        tol: cfg.validate.validate_tol.unwrap_or(d.tol),
        seed: cfg.model.seed.unwrap_or(d.seed),
        k_offset: cfg.model.k_offset.as_deref().map(str::parse::<OffsetChoice>).transpose()?.unwrap_or(d.k_offset),
        solver_tol: cfg.model.tol.unwrap_or(d.solver_tol),
        points,
        execution: cfg.execution()?,
    })
}

pub fn cmd_validate(cfg: &RunConfig) -> CliResult<()> {
    let report = validate::run(&validate_options(cfg)?)?;
    write_json(if cfg.output.json.is_some() { &cfg.output.json } else { &cfg.output.out }, &report)?;
    if report.passed {
        Ok(())
    } else {
        let worst: Vec<String> =
            report.failing.iter().take(5).map(|k| format!("{k} = {:.3e}", report.max_deviation[k])).collect();
        Err(CliError::Validation(format!(
            "{} quantities above {:e}: {}",
            report.failing.len(),
            report.tolerance,
            worst.join(", ")
        )))
    }
}
