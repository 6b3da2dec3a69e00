//! Configuration-driven runner for the verification suites: a JSON config
//! with flag overrides, checks grouped by acceptance criterion, a versioned
//! JSON report and CSV plot data.

mod checks;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub use checks::run_criterion;

pub const SCHEMA_VERSION: u32 = 1;
/// Overrides `--out` when set.
pub const OUT_ENV: &str = "NECK_LAB_OUT";
pub const DEFAULT_OUT: &str = "neck-lab-out";
pub const CRITERIA: std::ops::RangeInclusive<u8> = 1..=10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Curvature,
    Cones4d,
    Warped,
    Bryant,
    Heat,
    Lichnerowicz,
    Cmc,
    Symmetry,
    All,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::Curvature,
        Suite::Cones4d,
        Suite::Warped,
        Suite::Bryant,
        Suite::Heat,
        Suite::Lichnerowicz,
        Suite::Cmc,
        Suite::Symmetry,
        Suite::All,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Curvature => "curvature",
            Suite::Cones4d => "cones4d",
            Suite::Warped => "warped",
            Suite::Bryant => "bryant",
            Suite::Heat => "heat",
            Suite::Lichnerowicz => "lichnerowicz",
            Suite::Cmc => "cmc",
            Suite::Symmetry => "symmetry",
            Suite::All => "all",
        }
    }

    /// Acceptance criteria executed by the suite.
    pub fn criteria(self) -> Vec<u8> {
        match self {
            Suite::Warped => vec![1],
            Suite::Lichnerowicz => vec![2, 3, 10],
            Suite::Curvature => vec![4],
            Suite::Cones4d => vec![5],
            Suite::Bryant => vec![6],
            Suite::Heat => vec![7],
            Suite::Cmc => vec![8],
            Suite::Symmetry => vec![9],
            Suite::All => CRITERIA.collect(),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .iter()
            .copied()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Suite::ALL.iter().map(|x| x.name()).collect();
                LabError::Invalid(format!("unknown suite '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

/// Pass thresholds; defaults are the acceptance-criteria values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub cylinder: f64,
    pub convergence_ratio: f64,
    pub neutral_residual: f64,
    pub exponent_fit: f64,
    pub slope_margin: f64,
    pub min_pic: f64,
    pub pic_threshold: f64,
    pub trace_identity: f64,
    pub cone_margin: f64,
    pub log_derivative: f64,
    pub normalization: f64,
    pub soliton_residual: f64,
    pub kernel_boundary: f64,
    pub representation: f64,
    pub newton: f64,
    pub leaf_spread: f64,
    pub constant_h: f64,
    pub jacobi: f64,
    pub decade_slope: f64,
    pub structure_canonical: f64,
    pub structure_random: f64,
    pub deficits: f64,
    pub gauge: f64,
    pub procrustes: f64,
    pub glue: f64,
    pub improvement_margin: f64,
    pub lie_residual: f64,
    pub heat_flow: f64,
    pub subsolution: f64,
    pub pinch: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            cylinder: 1e-12,
            convergence_ratio: 0.3,
            neutral_residual: 1e-10,
            exponent_fit: 1e-6,
            slope_margin: 0.1,
            min_pic: 1e-3,
            pic_threshold: 1e-6,
            trace_identity: 1e-10,
            cone_margin: 1e-8,
            log_derivative: 1e-8,
            normalization: 1e-8,
            soliton_residual: 1e-6,
            kernel_boundary: 1e-14,
            representation: 1e-5,
            newton: 1e-10,
            leaf_spread: 1e-8,
            constant_h: 1e-8,
            jacobi: 1e-6,
            decade_slope: 0.1,
            structure_canonical: 1e-14,
            structure_random: 1e-12,
            deficits: 1e-10,
            gauge: 1e-10,
            procrustes: 1e-12,
            glue: 0.05,
            improvement_margin: 0.02,
            lie_residual: 1e-6,
            heat_flow: 1e-10,
            subsolution: 1e-8,
            pinch: 1e-10,
        }
    }
}

/// Sample counts and grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grids {
    pub pic_oracle_samples: usize,
    pub pic_budget: usize,
    pub random_operators: usize,
    pub random_operator_budget: usize,
    pub cone_starts: usize,
    pub trace_trajectories: usize,
    pub pinch_pairs: usize,
    pub bryant_z_max: f64,
    pub bryant_dz: f64,
    pub heat_nz: usize,
    pub cmc_starts: usize,
}

impl Default for Grids {
    fn default() -> Self {
        Self {
            pic_oracle_samples: 1_000_000,
            pic_budget: 2000,
            random_operators: 1000,
            random_operator_budget: 200,
            cone_starts: 1000,
            trace_trajectories: 100,
            pinch_pairs: 1000,
            bryant_z_max: 100.0,
            bryant_dz: 1e-3,
            heat_nz: 2000,
            cmc_starts: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub suite: Suite,
    /// dimension for the checks that take one
    pub n: usize,
    pub seed: u64,
    /// largest window length of the residual-vs-L ladder `(L/4, L/2, L)`
    #[serde(rename = "L")]
    pub l: f64,
    pub out: PathBuf,
    /// worker threads, 0 for all cores
    pub jobs: usize,
    /// multiplies every tolerance
    pub tol_scale: f64,
    pub tolerances: Tolerances,
    pub grids: Grids,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            suite: Suite::All,
            n: 4,
            seed: 0,
            l: 80.0,
            out: PathBuf::from(DEFAULT_OUT),
            jobs: 0,
            tol_scale: 1.0,
            tolerances: Tolerances::default(),
            grids: Grids::default(),
        }
    }
}

/// Command-line values; `None` leaves the config value in place.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub suite: Option<Suite>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub l: Option<f64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub tol_scale: Option<f64>,
}

impl SuiteConfig {
    /// Defaults, then the JSON config, then flags, then the output directory
    /// from the environment.
    pub fn resolve(config_json: Option<&str>, flags: &Overrides, env_out: Option<&str>) -> Result<Self> {
        let mut cfg: SuiteConfig = match config_json {
            Some(s) => serde_json::from_str(s).map_err(|e| LabError::Invalid(format!("config: {e}")))?,
            None => SuiteConfig::default(),
        };
        if let Some(v) = flags.suite {
            cfg.suite = v;
        }
        if let Some(v) = flags.n {
            cfg.n = v;
        }
        if let Some(v) = flags.seed {
            cfg.seed = v;
        }
        if let Some(v) = flags.l {
            cfg.l = v;
        }
        if let Some(v) = &flags.out {
            cfg.out = v.clone();
        }
        if let Some(v) = flags.jobs {
            cfg.jobs = v;
        }
        if let Some(v) = flags.tol_scale {
            cfg.tol_scale = v;
        }
        if let Some(dir) = env_out.filter(|s| !s.is_empty()) {
            cfg.out = PathBuf::from(dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(4..=7).contains(&self.n) {
            return Err(LabError::Invalid(format!("n = {} outside the supported range 4..=7", self.n)));
        }
        if !(self.l.is_finite() && self.l >= 8.0) {
            return Err(LabError::Invalid(format!("L = {} must be finite and at least 8", self.l)));
        }
        if !(self.tol_scale.is_finite() && self.tol_scale > 0.0) {
            return Err(LabError::Invalid("tol-scale must be positive".into()));
        }
        let g = &self.grids;
        let counts = [
            g.pic_oracle_samples,
            g.pic_budget,
            g.random_operators,
            g.random_operator_budget,
            g.cone_starts,
            g.pinch_pairs,
            g.cmc_starts,
        ];
        if counts.contains(&0) || g.heat_nz < 10 {
            return Err(LabError::Invalid("grid counts must be positive".into()));
        }
        if g.trace_trajectories > g.cone_starts {
            return Err(LabError::Invalid("trace_trajectories exceeds cone_starts".into()));
        }
        if !(g.bryant_z_max >= 20.0 && g.bryant_dz > 0.0 && g.bryant_dz <= 0.01) {
            return Err(LabError::Invalid("bryant grid needs z_max >= 20 and 0 < dz <= 0.01".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

/// How `measured` is compared with `expected` and `tolerance`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `|measured − expected| ≤ tolerance`
    Within,
    /// `measured ≤ expected + tolerance`
    AtMost,
    /// `measured ≥ expected − tolerance`
    AtLeast,
    /// `measured > expected`
    Above,
    /// `measured < expected`
    Below,
}

impl Relation {
    pub fn holds(self, measured: f64, expected: f64, tolerance: f64) -> bool {
        match self {
            Relation::Within => (measured - expected).abs() <= tolerance,
            Relation::AtMost => measured <= expected + tolerance,
            Relation::AtLeast => measured >= expected - tolerance,
            Relation::Above => measured > expected,
            Relation::Below => measured < expected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Case {
    pub name: String,
    pub criterion: u8,
    pub status: Status,
    /// `null` in JSON when the computation failed
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub relation: Relation,
    /// what the case checks, or "plumbing"
    pub anchor: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Case {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// One CSV file: header plus numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl PlotData {
    pub fn new(file: &str, header: &[&str], rows: Vec<Vec<f64>>) -> Self {
        Self {
            file: file.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

/// Cases and plot data of one criterion.
#[derive(Debug, Clone, Default)]
pub struct CriterionRun {
    pub cases: Vec<Case>,
    pub plots: Vec<PlotData>,
}

impl CriterionRun {
    pub fn passed(&self) -> bool {
        !self.cases.is_empty() && self.cases.iter().all(Case::passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub suite: Suite,
    pub n: usize,
    pub seed: u64,
    #[serde(rename = "L")]
    pub l: f64,
    pub tol_scale: f64,
    pub passed: usize,
    pub failed: usize,
    pub cases: Vec<Case>,
}

impl Report {
    pub fn ok(&self) -> bool {
        self.failed == 0
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Wall-clock data, kept apart from the report so reports stay reproducible.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub suite: Suite,
    pub wall_time_s: f64,
    pub criteria: Vec<CriterionTime>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionTime {
    pub criterion: u8,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub plots: Vec<PlotData>,
    pub timing: Timing,
}

/// Runs the configured suite, criteria in parallel on `jobs` threads.
pub fn run(cfg: &SuiteConfig) -> Result<Outcome> {
    cfg.validate()?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| LabError::Invalid(format!("thread pool: {e}")))?;
    let criteria = cfg.suite.criteria();
    let runs: Vec<(CriterionRun, f64)> = pool.install(|| {
        criteria
            .par_iter()
            .map(|&k| {
                let t = Instant::now();
                let r = run_criterion(k, cfg);
                (r, t.elapsed().as_secs_f64())
            })
            .collect()
    });
    let mut cases = Vec::new();
    let mut plots = Vec::new();
    let mut times = Vec::new();
    for (&k, (r, secs)) in criteria.iter().zip(runs) {
        cases.extend(r.cases);
        plots.extend(r.plots);
        times.push(CriterionTime { criterion: k, seconds: secs });
    }
    let failed = cases.iter().filter(|c| !c.passed()).count();
    Ok(Outcome {
        report: Report {
            schema_version: SCHEMA_VERSION,
            suite: cfg.suite,
            n: cfg.n,
            seed: cfg.seed,
            l: cfg.l,
            tol_scale: cfg.tol_scale,
            passed: cases.len() - failed,
            failed,
            cases,
        },
        plots,
        timing: Timing {
            suite: cfg.suite,
            wall_time_s: start.elapsed().as_secs_f64(),
            criteria: times,
        },
    })
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| LabError::Io(e.error.to_string()))?;
    Ok(())
}

/// Writes `report.json`, `timing.json` and the CSVs; returns the paths written.
pub fn write_outputs(outcome: &Outcome, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let report = dir.join("report.json");
    write_atomic(&report, outcome.report.to_json().as_bytes())?;
    written.push(report);
    let timing = dir.join("timing.json");
    let body = serde_json::to_string_pretty(&outcome.timing).expect("timing serializes");
    write_atomic(&timing, body.as_bytes())?;
    written.push(timing);
    for p in &outcome.plots {
        let path = dir.join(&p.file);
        write_atomic(&path, p.to_csv().as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
