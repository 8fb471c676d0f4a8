//! Command-line front end.
//!
//! A run is described by a manifest: an optional TOML file whose top-level
//! keys `scenario`, `scheme`, `level`, `mode`, `model`, `voltage`, `out` and
//! `seed` select the experiment, with all remaining keys read as
//! [`ScenarioOverrides`]. Flags override the file.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, TimeSeriesRecord};
use crate::mesh::TriMesh;
use crate::model::{self, SpeciesSystem};
use crate::output::{self, Field};
use crate::scenarios::{self, Scenario, ScenarioOverrides};
use crate::studies::{self, RunOptions, Scheme, Solver, SolverState};
use crate::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "ionflux",
    version,
    about = "Finite-element and finite-volume solvers for size-exclusion ion transport"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Time-step a scenario and write the time series, final fields and a summary.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Applied voltage on the right bath.
        #[arg(long, allow_hyphen_values = true)]
        voltage: Option<f64>,
        /// Skip the stationary solve; `entropy_rel` and `l1_dist` are then NaN.
        #[arg(long)]
        no_steady: bool,
    },
    /// Nested-mesh convergence study against the finest level.
    Converge {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3")]
        levels: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "600,6000")]
        checkpoints: Vec<usize>,
    },
    /// Stationary current for a list of applied voltages.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-1,-0.5,0.5,1")]
        voltage: Vec<f64>,
    },
    /// Mesh statistics and admissibility.
    Meshinfo {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Invariant checks on a scenario.
    Check {
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// Manifest file (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// calcium, bipolar, bipolar-crowded or manufactured.
    #[arg(long)]
    pub scenario: Option<String>,
    /// fe, fv or fv-semi.
    #[arg(long)]
    pub scheme: Option<Scheme>,
    /// Number of regular refinements of the base mesh.
    #[arg(long)]
    pub level: Option<usize>,
    /// Time step
    #[arg(long)]
    pub tau: Option<f64>,
    /// Number of time steps
    #[arg(long)]
    pub steps: Option<usize>,
    /// Regularization of the FE mass matrix.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Time discretization of the FV scheme.
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long, value_enum)]
    pub model: Option<Model>,
    /// Seed for the randomized checks.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Implicit,
    SemiImplicit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Nonlinear,
    Linear,
}

/// A fully resolved experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunManifest {
    pub scenario: String,
    pub scheme: Scheme,
    pub level: usize,
    pub mode: Option<Mode>,
    pub model: Model,
    pub voltage: Option<f64>,
    pub out: PathBuf,
    pub seed: u64,
    #[serde(skip)]
    pub overrides: ScenarioOverrides,
}

impl Default for RunManifest {
    fn default() -> Self {
        RunManifest {
            scenario: "calcium".into(),
            scheme: Scheme::Fe,
            level: 0,
            mode: None,
            model: Model::Nonlinear,
            voltage: None,
            out: PathBuf::from("out"),
            seed: 0,
            overrides: ScenarioOverrides::default(),
        }
    }
}

const MANIFEST_KEYS: [&str; 8] = ["scenario", "scheme", "level", "mode", "model", "voltage", "out", "seed"];

impl RunManifest {
    /// Splits a manifest file into the experiment keys and scenario overrides.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut head = toml::Table::new();
        for k in MANIFEST_KEYS {
            if let Some(v) = table.remove(k) {
                head.insert(k.to_string(), v);
            }
        }
        let mut m: RunManifest = head.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        m.overrides = ScenarioOverrides::parse(&toml::to_string(&table).map_err(|e| Error::Config(e.to_string()))?)?;
        if let (Some(dir), Some(mesh)) = (base, &m.overrides.mesh_file) {
            if mesh.is_relative() {
                m.overrides.mesh_file = Some(dir.join(mesh));
            }
        }
        Ok(m)
    }

    pub fn resolve(args: &CommonArgs) -> Result<Self> {
        let mut m = match &args.config {
            Some(p) => Self::parse(&std::fs::read_to_string(p)?, p.parent())?,
            None => Self::default(),
        };
        if let Some(v) = &args.scenario {
            m.scenario = v.clone();
        }
        if let Some(v) = args.scheme {
            m.scheme = v;
        }
        if let Some(v) = args.level {
            m.level = v;
        }
        if let Some(v) = &args.out {
            m.out = v.clone();
        }
        if args.mode.is_some() {
            m.mode = args.mode;
        }
        if let Some(v) = args.model {
            m.model = v;
        }
        if let Some(v) = args.seed {
            m.seed = v;
        }
        if args.tau.is_some() {
            m.overrides.tau = args.tau;
        }
        if args.steps.is_some() {
            m.overrides.steps = args.steps;
        }
        if args.eps.is_some() {
            m.overrides.eps = args.eps;
        }
        m.scheme = m.effective_scheme()?;
        Ok(m)
    }

    /// Folds `mode` into the scheme; `fe` has no semi-implicit variant.
    pub fn effective_scheme(&self) -> Result<Scheme> {
        match (self.scheme, self.mode) {
            (s, None) => Ok(s),
            (Scheme::Fe, Some(Mode::Implicit)) => Ok(Scheme::Fe),
            (Scheme::Fe, Some(Mode::SemiImplicit)) => {
                Err(Error::Config("the fe scheme has no semi-implicit mode".into()))
            }
            (Scheme::Fv, Some(Mode::Implicit)) => Ok(Scheme::Fv),
            (Scheme::Fv | Scheme::FvSemi, Some(Mode::SemiImplicit)) => Ok(Scheme::FvSemi),
            (Scheme::FvSemi, Some(Mode::Implicit)) => {
                Err(Error::Config("scheme fv-semi conflicts with mode implicit".into()))
            }
        }
    }

    pub fn scenario_at(&self, level: usize) -> Result<Scenario> {
        let mut s = scenarios::by_name(&self.scenario, level)?;
        if self.model == Model::Linear {
            s.system = s.system.clone().with_linear_pnp(true);
        }
        self.overrides.apply(&mut s)?;
        if let Some(u) = self.voltage {
            s.set_voltage(u)?;
        }
        Ok(s)
    }

    pub fn build_scenario(&self) -> Result<Scenario> {
        self.scenario_at(self.level)
    }
}

/// Failures of a command: usage errors exit with 2, everything else with 1
/// after printing one JSON error line.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failed(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(msg) => CliError::Usage(msg),
            e => CliError::Failed(e),
        }
    }
}

/// JSON line reported on solver failure.
pub fn error_json(e: &Error) -> String {
    serde_json::json!({ "error": e.kind(), "message": e.to_string() }).to_string()
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Failed(e)) => {
            eprintln!("{}", error_json(&e));
            1
        }
    }
}

pub fn execute(cmd: &Command) -> std::result::Result<(), CliError> {
    match cmd {
        Command::Run { common, voltage, no_steady } => {
            let mut m = RunManifest::resolve(common)?;
            if voltage.is_some() {
                m.voltage = *voltage;
            }
            let summary = run_command(&m, !no_steady)?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
        }
        Command::Converge { common, levels, checkpoints } => {
            let m = RunManifest::resolve(common)?;
            let tables = studies::convergence_study(|l| m.scenario_at(l), m.scheme, levels, checkpoints)?;
            for (k, table) in tables {
                let csv = output::convergence_csv(&table);
                output::write_file(&m.out.join(format!("convergence_k{k}.csv")), &csv)?;
                println!("# checkpoint {k}\n{csv}");
            }
        }
        Command::Sweep { common, voltage } => {
            let m = RunManifest::resolve(common)?;
            if voltage.is_empty() {
                return Err(CliError::Usage("empty voltage list".into()));
            }
            let s = m.build_scenario()?;
            let points = studies::cv_sweep(&s, m.scheme, voltage);
            let ok: Vec<(f64, f64)> =
                points.iter().filter_map(|p| p.current.as_ref().ok().map(|&i| (p.voltage, i))).collect();
            let rect: Vec<(f64, f64)> = ok
                .iter()
                .filter(|(u, _)| *u > 0.0)
                .filter_map(|&p| {
                    let pair: Vec<(f64, f64)> = ok.iter().copied().filter(|q| q.0 == p.0 || q.0 == -p.0).collect();
                    diagnostics::rectification(&pair).ok().and_then(|r| r.first().copied())
                })
                .collect();
            let csv = output::sweep_csv(&points, &rect);
            output::write_file(&m.out.join("sweep.csv"), &csv)?;
            print!("{csv}");
        }
        Command::Meshinfo { common } => {
            let m = RunManifest::resolve(common)?;
            let s = m.build_scenario()?;
            println!("{}", serde_json::to_string_pretty(&mesh_info(&s.mesh)).expect("info serializes"));
            if common.out.is_some() {
                crate::mesh::write_mesh(&m.out.join("mesh.txt"), &s.mesh)?;
                output::write_file(&m.out.join("mesh.vtk"), &output::vtk_string(&s.mesh, &[], &[]))?;
            }
        }
        Command::Check { common } => {
            let m = RunManifest::resolve(common)?;
            let s = m.build_scenario()?;
            let results = check_scenario(&s, m.scheme, m.seed)?;
            let mut failed = 0;
            for c in &results {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                return Err(CliError::Failed(Error::InvalidParameter(format!("{failed} checks failed"))));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeshInfo {
    pub vertices: usize,
    pub cells: usize,
    pub edges: usize,
    pub area: f64,
    pub diameter: f64,
    pub min_angle_deg: f64,
    pub max_angle_deg: f64,
    pub dirichlet_regions: Vec<String>,
    pub admissible: bool,
    pub min_dist: f64,
}

pub fn mesh_info(mesh: &TriMesh) -> MeshInfo {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for c in 0..mesh.n_cells() {
        let p = mesh.triangle_points(c);
        for k in 0..3 {
            let (a, b, o) = (p[(k + 1) % 3], p[(k + 2) % 3], p[k]);
            let u = [a[0] - o[0], a[1] - o[1]];
            let v = [b[0] - o[0], b[1] - o[1]];
            let ang = (u[0] * v[1] - u[1] * v[0]).abs().atan2(u[0] * v[0] + u[1] * v[1]).to_degrees();
            lo = lo.min(ang);
            hi = hi.max(ang);
        }
    }
    MeshInfo {
        vertices: mesh.n_vertices(),
        cells: mesh.n_cells(),
        edges: mesh.edges().len(),
        area: mesh.total_area(),
        diameter: mesh.diameter(),
        min_angle_deg: lo,
        max_angle_deg: hi,
        dirichlet_regions: mesh.dirichlet_names().to_vec(),
        admissible: mesh.check_admissibility(1e-12).is_admissible(),
        min_dist: mesh.edges().iter().map(|e| e.dual.dist).fold(f64::INFINITY, f64::min),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub scheme: String,
    pub level: usize,
    pub vertices: usize,
    pub cells: usize,
    pub tau: f64,
    pub steps: usize,
    pub newton_iterations: usize,
    pub initial: TimeSeriesRecord,
    #[serde(rename = "final")]
    pub last: TimeSeriesRecord,
    pub current: Option<f64>,
}

/// `run`: writes `timeseries.csv`, `final.vtk` and `summary.json` under `out`.
pub fn run_command(m: &RunManifest, steady: bool) -> Result<RunSummary> {
    let s = m.build_scenario()?;
    let r = studies::run(&s, m.scheme, &RunOptions { steady, checkpoints: Vec::new() })?;
    let solver = Solver::new(&s, m.scheme)?;
    output::write_file(&m.out.join("timeseries.csv"), &output::time_series_csv(&r.records))?;
    output::write_file(&m.out.join("final.vtk"), &final_fields_vtk(&solver, &r.final_state)?)?;
    let current = match s.cross_section {
        Some(x0) => solver.current(&r.final_state, x0).ok(),
        None => None,
    };
    let summary = RunSummary {
        scenario: m.scenario.clone(),
        scheme: m.scheme.to_string(),
        level: m.level,
        vertices: s.mesh.n_vertices(),
        cells: s.mesh.n_cells(),
        tau: s.tau,
        steps: s.steps,
        newton_iterations: r.records.iter().map(|x| x.newton_iters).sum(),
        last: r.records.last().cloned().unwrap_or_else(|| r.initial.clone()),
        initial: r.initial,
        current,
    };
    output::write_file(
        &m.out.join("summary.json"),
        &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"),
    )?;
    Ok(summary)
}

/// Nodal (FE) and cell fields `u1..un`, `u0`, `phi`.
pub fn final_fields_vtk(solver: &Solver, state: &SolverState) -> Result<String> {
    let s = solver.scenario();
    let n = s.system.n();
    let mesh = &s.mesh;
    let cells = solver.cells(state)?;
    let names: Vec<String> = studies::quantity_names(n);
    let mut cell_cols: Vec<Vec<f64>> = (0..n).map(|i| cells.species(i)).collect();
    let c_cell = crate::fvm::cell_average(mesh, |p| s.immobile.density(p));
    cell_cols.push((0..mesh.n_cells()).map(|k| s.system.solvent(cells.u(k), c_cell[k])).collect());
    cell_cols.push(cells.phi_vec());
    let mut cell_names: Vec<String> = names[..n].to_vec();
    cell_names.push("u0".into());
    cell_names.push("phi".into());
    let cell_fields: Vec<Field> =
        cell_names.iter().zip(&cell_cols).map(|(name, v)| Field { name, values: v }).collect();
    let mut point_cols = Vec::new();
    if let (Solver::Fe(fem, _), SolverState::Fe(ns)) = (solver, state) {
        let (u, u0) = fem.nodal_u(ns);
        for i in 0..n {
            point_cols.push(u.iter().skip(i).step_by(n).copied().collect::<Vec<f64>>());
        }
        point_cols.push(u0);
        point_cols.push(ns.phi_vec());
    }
    let point_fields: Vec<Field> =
        cell_names.iter().zip(&point_cols).map(|(name, v)| Field { name, values: v }).collect();
    Ok(output::vtk_string(mesh, &point_fields, &cell_fields))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name: name.into(), passed, detail }
}

/// Mesh admissibility, transform round trip on random states and the
/// box constraints over the scenario's time steps.
pub fn check_scenario(s: &Scenario, scheme: Scheme, seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let rep = s.mesh.check_admissibility(1e-12);
    out.push(check("mesh admissible", rep.is_admissible(), format!("{} offending edges", rep.issues.len())));
    out.push(check_round_trip(&s.system, seed));
    let r = studies::run(s, scheme, &RunOptions::default())?;
    let min_u = r.records.iter().flat_map(|x| x.min_u.iter().copied()).fold(f64::INFINITY, f64::min);
    let min_u0 = r.records.iter().map(|x| x.min_u0).fold(f64::INFINITY, f64::min);
    out.push(check("positivity", min_u > 0.0, format!("min u_i = {min_u:e}")));
    out.push(check("solvent positive", min_u0 > 0.0, format!("min u_0 = {min_u0:e}")));
    if !s.mesh.has_dirichlet() {
        let m0 = &r.initial.mass;
        let drift =
            r.records.iter().flat_map(|x| x.mass.iter().zip(m0).map(|(a, b)| ((a - b) / b).abs())).fold(0.0, f64::max);
        out.push(check("mass conservation", drift <= 1e-10, format!("max relative drift {drift:e}")));
    }
    Ok(out)
}

fn check_round_trip(sys: &SpeciesSystem, seed: u64) -> CheckResult {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = sys.n();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let c = [0.0, 0.3, 0.7][rng.gen_range(0..3)];
        let mut u: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let scale = (1.0 - c) * rng.gen_range(0.05..0.95) / u.iter().sum::<f64>();
        u.iter_mut().for_each(|x| *x *= scale);
        let phi = rng.gen_range(-2.0..2.0);
        let Ok(w) = model::to_entropy(sys, &u, phi, c) else {
            return check("entropy round trip", false, "to_entropy rejected an interior state".into());
        };
        let (back, _) = model::from_entropy(sys, &w, phi, c);
        for (a, b) in u.iter().zip(&back) {
            worst = worst.max((a - b).abs());
        }
    }
    check("entropy round trip", worst <= 1e-12, format!("max error {worst:e}"))
}
