//! Batch entry points: forward scattering, inversion, round trip and self-test.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::marchenko::{
    composition_defect, kernel_bound_check, kernel_inverse_pair, reconstruct, roundtrip_errors, FMethod, InverseOptions, Reconstruction,
};
use crate::potentials::{eval_q, signed_tail, Deviation, MomentOptions, Potential};
use crate::spectral::{band_edges, default_mu_floor, fmt_real, forward_scatter, BandGrids, ScatteringData};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SELFTEST: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "d_data")]
    pub data: PathBuf,
    #[serde(default = "d_s_table")]
    pub s_table: PathBuf,
    #[serde(default = "d_q")]
    pub q: PathBuf,
    #[serde(default = "d_report")]
    pub report: PathBuf,
}

fn d_data() -> PathBuf {
    "scattering.json".into()
}
fn d_s_table() -> PathBuf {
    "s_table.csv".into()
}
fn d_q() -> PathBuf {
    "q.csv".into()
}
fn d_report() -> PathBuf {
    "report.json".into()
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs { data: d_data(), s_table: d_s_table(), q: d_q(), report: d_report() }
    }
}

/// Run configuration. `mu_max` defaults to μ₂ + 100. `tol` is the agreement
/// required between methods A and B when both run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub potential: Potential,
    #[serde(default)]
    pub mu_max: Option<f64>,
    #[serde(default = "d_band_samples")]
    pub band_samples: usize,
    #[serde(default = "d_x_min")]
    pub x_min: f64,
    #[serde(default = "d_x_max")]
    pub x_max: f64,
    #[serde(default = "d_x_step")]
    pub x_step: f64,
    #[serde(default = "d_tol")]
    pub tol: f64,
    #[serde(default)]
    pub method_b_enabled: bool,
    #[serde(default)]
    pub outputs: Outputs,
}

fn d_band_samples() -> usize {
    64
}
fn d_x_min() -> f64 {
    -4.0
}
fn d_x_max() -> f64 {
    4.0
}
fn d_x_step() -> f64 {
    0.05
}
fn d_tol() -> f64 {
    5e-3
}

impl RunConfig {
    pub fn new(potential: Potential) -> Self {
        serde_json::from_value(serde_json::json!({ "potential": potential })).expect("defaults deserialize")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let c: RunConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.potential.validate().map_err(|e| e.to_string())?;
        if !(self.x_step > 0.0) || !self.x_step.is_finite() {
            return Err(format!("x_step must be positive, got {}", self.x_step));
        }
        if !(self.x_max > self.x_min) || !self.x_min.is_finite() || !self.x_max.is_finite() {
            return Err(format!("need x_min < x_max, got [{}, {}]", self.x_min, self.x_max));
        }
        let n = (self.x_max - self.x_min) / self.x_step;
        if (n - n.round()).abs() > 1e-6 {
            return Err("x_max - x_min must be a multiple of x_step".into());
        }
        if self.band_samples < 16 {
            return Err(format!("band_samples must be at least 16, got {}", self.band_samples));
        }
        if !(self.tol > 0.0) {
            return Err(format!("tol must be positive, got {}", self.tol));
        }
        if let Some(m) = self.mu_max {
            let (_, m2) = band_edges(&self.potential);
            if !(m > m2) || !m.is_finite() {
                return Err(format!("mu_max {m} must exceed the upper threshold {m2}"));
            }
        }
        Ok(())
    }

    pub fn mu_max(&self) -> f64 {
        self.mu_max.unwrap_or_else(|| band_edges(&self.potential).1 + 100.0)
    }

    pub fn inverse_options(&self) -> InverseOptions {
        InverseOptions {
            x_min: self.x_min,
            x_max: self.x_max,
            h: self.x_step,
            f_method: if self.method_b_enabled {
                FMethod::CrossChecked { tol: self.tol }
            } else {
                FMethod::DifferenceQuotient
            },
            ..InverseOptions::default()
        }
    }
}

/// Failure of a subcommand, mapped onto the exit codes.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Config(m) => format!("ConfigError: {m}"),
            CliError::Io(m) => format!("IoError: {m}"),
            CliError::Numeric(e) => e.to_string(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Numeric(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

pub fn forward(c: &RunConfig) -> CliResult<ScatteringData> {
    let grids = BandGrids::with_samples(&c.potential, c.band_samples, c.mu_max())?;
    Ok(forward_scatter(&c.potential, &grids, default_mu_floor(&c.potential))?)
}

pub fn invert(d: &ScatteringData, c: &RunConfig, reference: Option<&Potential>) -> CliResult<Reconstruction> {
    Ok(reconstruct(d, &c.inverse_options(), reference)?)
}

pub fn q_csv(x: &[f64], q: &[f64]) -> String {
    let mut out = String::from("x,q\n");
    for (a, b) in x.iter().zip(q) {
        out.push_str(&format!("{},{}\n", fmt_real(*a), fmt_real(*b)));
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct InvertReport {
    pub a_plus_estimate: f64,
    pub marchenko_residual: f64,
    pub max_condition: f64,
    pub t_max: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub x_step: f64,
    pub method_b_enabled: bool,
}

impl InvertReport {
    pub fn new(r: &Reconstruction, c: &RunConfig) -> Self {
        InvertReport {
            a_plus_estimate: r.report.a_plus_estimate,
            marchenko_residual: r.report.marchenko_residual,
            max_condition: r.stats.max_cond,
            t_max: r.t_max,
            x_min: c.x_min,
            x_max: c.x_max,
            x_step: c.x_step,
            method_b_enabled: c.method_b_enabled,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, threshold, pass: value <= threshold }
    }
    fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, threshold, pass: value >= threshold }
    }
    fn below(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, threshold, pass: value < threshold }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundtripReport {
    pub sup_error: f64,
    pub l1_error: f64,
    pub a_plus_error: f64,
    pub excluded_half_width: f64,
    pub invariants: Vec<Check>,
}

/// Potential described by a recovered q on its grid: asymptotes from the
/// data, deviation tabulated relative to the step background. The background
/// jumps at 0, so the deviation gets a node on either side of it and q itself
/// stays piecewise linear across the grid.
pub fn recovered_potential(d: &ScatteringData, x: &[f64], q: &[f64]) -> Potential {
    let p0 = Potential::step(d.a_minus, d.a_plus);
    let mut xs = Vec::with_capacity(x.len() + 2);
    let mut values = Vec::with_capacity(x.len() + 2);
    let split = x.windows(2).position(|w| w[0] < 0.0 && w[1] >= 0.0);
    for (i, (&xi, &qi)) in x.iter().zip(q).enumerate() {
        if Some(i) == split.map(|s| s + 1) {
            let (x0, x1) = (x[i - 1], xi);
            let q0 = q[i - 1] + (qi - q[i - 1]) * (0.0 - x0) / (x1 - x0);
            let eps = 1e-9 * (x1 - x0);
            xs.push(-eps);
            values.push(q0 - d.a_minus);
            if x1 > 0.0 {
                xs.push(0.0);
                values.push(q0 - d.a_plus);
            }
        }
        xs.push(xi);
        values.push(qi - p0.background(xi));
    }
    p0.with_deviation(Deviation::Tabulated { x: xs, values })
}

/// sup |ΔS₁₁| between two data sets sampled on the same μ nodes.
pub fn s11_distance(a: &ScatteringData, b: &ScatteringData) -> f64 {
    a.all_samples().zip(b.all_samples()).map(|((_, s), (_, t))| (s.s[(0, 0)] - t.s[(0, 0)]).norm()).fold(0.0, f64::max)
}

fn probe_vector(n: usize) -> Vec<f64> {
    (0..n).map(|i| (1.7 * i as f64 + 0.3).sin()).collect()
}

/// (I + K)(I + H) − I on a probe vector for the coarse trapezoid level, where
/// H is the exact discrete inverse of K.
fn raw_composition_defect(r: &Reconstruction) -> CliResult<f64> {
    let k = &r.levels[0].1;
    Ok(composition_defect(k, &kernel_inverse_pair(k)?, &probe_vector(k.x_grid.len()))?)
}

pub fn roundtrip(c: &RunConfig) -> CliResult<RoundtripReport> {
    let p = &c.potential;
    let d = forward(c)?;
    let r = invert(&d, c, Some(p))?;
    let x = &r.report.x_grid;
    let exclude = 2.0 * c.x_step;
    let (sup_error, l1_error) = roundtrip_errors(p, x, &r.report.q_recovered, exclude);
    let a_plus_error = (r.report.a_plus_estimate - p.a_plus).abs();

    let mut inv = Vec::new();
    let st = d.structure();
    inv.push(Check::at_most("s_hermitian_defect", st.hermitian_defect, 1e-12));
    inv.push(Check::at_least("s_min_eigenvalue", st.min_eigenvalue, -1e-12));
    inv.push(Check::at_most("s_rank_violations", st.rank_violations as f64, 0.0));
    inv.push(Check::at_most("s_unitarity_defect", st.unitarity_defect, 1e-6));
    inv.push(Check::at_most("f_symmetry_defect", r.f.symmetry_defect(), 1e-6));
    inv.push(Check::below("marchenko_condition", r.stats.max_cond, 1e8));
    inv.push(Check::at_most("marchenko_residual", r.stats.max_residual, 1e-8));
    let comp = raw_composition_defect(&r)?;
    inv.push(Check::at_most("composition_defect", comp, 1e-8));
    inv.push(Check::at_most("factorization_residual", r.factorization_residual()?, 1e-4));
    let hk = r.h()?;
    let bounds = kernel_bound_check(
        &r.k.rows_within(c.x_min, c.x_max),
        &hk.rows_within(c.x_min, c.x_max),
        Some(&r.f),
        p,
        0.05,
        1e-6,
    )?;
    inv.push(Check::at_most("kernel_bound_violations", (bounds.k_violations + bounds.h_violations) as f64, 0.0));
    let mo = MomentOptions::default();
    let jumps: Vec<f64> =
        p.breakpoints().into_iter().filter(|&b| (eval_q(p, b + 1e-9) - eval_q(p, b - 1e-9)).abs() > 1e-6).collect();
    let mut trace: f64 = 0.0;
    for (xi, kd) in x.iter().zip(r.k_diagonal()) {
        if jumps.iter().any(|&b| (xi - b).abs() <= exclude + 1e-12) {
            continue;
        }
        trace = trace.max((kd - 0.5 * signed_tail(p, *xi, mo)?).abs());
    }
    inv.push(Check::at_most("trace_formula", trace, 1e-4));
    let back = recovered_potential(&d, x, &r.report.q_recovered);
    let again = forward(&RunConfig { potential: back, ..c.clone() })?;
    inv.push(Check::at_most("idempotence_s11", s11_distance(&d, &again), 5e-3));
    Ok(RoundtripReport { sup_error, l1_error, a_plus_error, excluded_half_width: exclude, invariants: inv })
}

/// Deliberate corruption used to show that the self-test notices broken data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fault {
    /// Break the Hermitian symmetry of one S⁺ sample.
    SHermitian,
    /// Break the symmetry of F at one node pair.
    FSymmetry,
}

/// Invariant suite over built-in potentials. Returns every check made.
pub fn selftest(fault: Option<Fault>) -> CliResult<Vec<Check>> {
    let cases = [
        ("free", Potential::free(0.0)),
        ("step", Potential::step(0.0, 3.0)),
        (
            "step_well",
            Potential::step(0.0, 2.0).with_deviation(Deviation::Square { x0: 0.0, width: 1.0, height: -8.0 }),
        ),
    ];
    let mut out = Vec::new();
    for (name, p) in cases {
        let c = RunConfig { band_samples: 32, x_min: -1.0, x_max: 1.0, x_step: 0.1, ..RunConfig::new(p.clone()) };
        let mut d = forward(&c)?;
        if fault == Some(Fault::SHermitian) {
            let s = &mut d.bands[1].samples[0].s;
            s[(0, 1)] += num_complex::Complex64::new(1e-3, 0.0);
        }
        let st = d.structure();
        out.push(Check::at_most(&format!("{name}: s_hermitian_defect"), st.hermitian_defect, 1e-12));
        out.push(Check::at_least(&format!("{name}: s_min_eigenvalue"), st.min_eigenvalue, -1e-12));
        out.push(Check::at_most(&format!("{name}: s_rank_violations"), st.rank_violations as f64, 0.0));
        out.push(Check::at_most(&format!("{name}: s_unitarity_defect"), st.unitarity_defect, 1e-6));
        if fault == Some(Fault::SHermitian) {
            // The corrupted sample cannot feed the inverse solver.
            continue;
        }
        let mut r = invert(&d, &c, Some(&p))?;
        if fault == Some(Fault::FSymmetry) {
            r.f.values[(0, 1)] += 1e-3;
        }
        out.push(Check::at_most(&format!("{name}: f_symmetry_defect"), r.f.symmetry_defect(), 1e-6));
        out.push(Check::below(&format!("{name}: marchenko_condition"), r.stats.max_cond, 1e8));
        out.push(Check::at_most(&format!("{name}: marchenko_residual"), r.stats.max_residual, 1e-8));
        let comp = raw_composition_defect(&r)?;
        out.push(Check::at_most(&format!("{name}: composition_defect"), comp, 1e-8));
        if name != "step_well" {
            // Pure steps and the free case reconstruct exactly away from the jump.
            let (sup, _) = roundtrip_errors(&p, &r.report.x_grid, &r.report.q_recovered, 2.0 * c.x_step);
            out.push(Check::at_most(&format!("{name}: roundtrip_sup"), sup, 1e-3));
        }
    }
    Ok(out)
}

#[derive(Debug, Parser)]
#[command(name = "stepscat", about = "Scattering data and Marchenko inversion for step-like potentials")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Overrides {
    /// Run configuration (JSON).
    pub config: PathBuf,
    #[arg(long)]
    pub mu_max: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Directory that relative output paths are resolved against.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute scattering data; writes the data JSON and the S⁺ table.
    Forward(Overrides),
    /// Recover q from a scattering-data file.
    Invert {
        #[command(flatten)]
        o: Overrides,
        /// Scattering-data JSON produced by `forward`.
        data: PathBuf,
    },
    /// Forward then invert in memory and report the errors.
    Roundtrip(Overrides),
    /// Run the built-in invariant suite.
    Selftest {
        #[arg(long, hide = true, value_enum)]
        inject: Option<Fault>,
    },
}

fn load_config(o: &Overrides) -> CliResult<RunConfig> {
    let text = fs::read_to_string(&o.config).map_err(|e| CliError::Config(format!("{}: {e}", o.config.display())))?;
    let mut c: RunConfig = serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
    if o.mu_max.is_some() {
        c.mu_max = o.mu_max;
    }
    if let Some(t) = o.tol {
        c.tol = t;
    }
    c.validate().map_err(CliError::Config)?;
    Ok(c)
}

fn write(dir: &Path, rel: &Path, text: &str) -> CliResult<()> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
    }
    fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn execute(cmd: Command) -> CliResult<i32> {
    match cmd {
        Command::Forward(o) => {
            let c = load_config(&o)?;
            let d = forward(&c)?;
            write(&o.out_dir, &c.outputs.data, &d.to_json())?;
            write(&o.out_dir, &c.outputs.s_table, &d.to_csv())?;
            Ok(EXIT_OK)
        }
        Command::Invert { o, data } => {
            let c = load_config(&o)?;
            let text = fs::read_to_string(&data).map_err(|e| CliError::Config(format!("{}: {e}", data.display())))?;
            let d = ScatteringData::from_json(&text).map_err(|e| CliError::Config(e.to_string()))?;
            let r = invert(&d, &c, None)?;
            write(&o.out_dir, &c.outputs.q, &q_csv(&r.report.x_grid, &r.report.q_recovered))?;
            write(&o.out_dir, &c.outputs.report, &to_json(&InvertReport::new(&r, &c)))?;
            Ok(EXIT_OK)
        }
        Command::Roundtrip(o) => {
            let c = load_config(&o)?;
            let rep = roundtrip(&c)?;
            write(&o.out_dir, &c.outputs.report, &to_json(&rep))?;
            Ok(EXIT_OK)
        }
        Command::Selftest { inject } => {
            let checks = selftest(inject)?;
            let failed: Vec<&Check> = checks.iter().filter(|c| !c.pass).collect();
            for c in &checks {
                println!("{} {} = {:.3e} (limit {:.1e})", if c.pass { "ok  " } else { "FAIL" }, c.name, c.value, c.threshold);
            }
            if failed.is_empty() {
                println!("selftest: all {} checks passed", checks.len());
                Ok(EXIT_OK)
            } else {
                eprintln!("selftest failed: {}", failed.iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join(", "));
                Ok(EXIT_SELFTEST)
            }
        }
    }
}

/// Parse `args` and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
