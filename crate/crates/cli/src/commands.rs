//! `simulate`, `sweep` and `reproduce`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use certilind::fockspace::{self, TruncationShape};
use certilind::solver::{run, run_fixed, RunOutput};
use certilind::DenseOperator;
use rayon::prelude::*;

use crate::model_file::Scenario;
use crate::output::{csv_text, num, write_atomic, write_run, Summary};
use crate::presets::{self, Action};

/// Failure of a command, mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid model file, bad flags: exit 1.
    Input(anyhow::Error),
    /// The run needed more than `max_dimension` basis states: exit 2.
    Certification(String),
    /// Numerical or I/O failure during a run: exit 1.
    Run(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Certification(_) => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(e) => write!(f, "error: {e:#}"),
            CliError::Certification(m) => write!(f, "certification failed: {m}"),
            CliError::Run(e) => write!(f, "run failed: {e:#}"),
        }
    }
}

fn solver_error(e: certilind::Error) -> CliError {
    match e {
        certilind::Error::MaxDimensionExceeded { .. } => CliError::Certification(e.to_string()),
        other => CliError::Run(other.into()),
    }
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub space_tol: Option<f64>,
    pub time_tol: Option<f64>,
}

impl Overrides {
    fn apply(&self, s: &mut Scenario) -> Result<(), CliError> {
        if let Some(x) = self.space_tol {
            s.config.space_tol = x;
        }
        if let Some(x) = self.time_tol {
            s.config.time_tol = x;
        }
        s.config.validate().map_err(|e| CliError::Input(e.into()))
    }
}

pub fn load(path: &Path, overrides: &Overrides) -> Result<Scenario, CliError> {
    let mut s = Scenario::load(path).map_err(CliError::Input)?;
    overrides.apply(&mut s)?;
    Ok(s)
}

/// Runs a scenario and writes its four output files into `out`.
pub fn simulate_scenario(s: &Scenario, out: &Path) -> Result<(RunOutput, Summary), CliError> {
    let rho0 = s.initial_state().map_err(CliError::Input)?;
    let start = Instant::now();
    let result = run(&s.model, &rho0, &s.config, s.adaptive_space).map_err(solver_error)?;
    let summary = Summary::of(&result, &s.config, s.adaptive_space, start.elapsed().as_secs_f64());
    write_run(out, &result, &summary).map_err(CliError::Run)?;
    Ok((result, summary))
}

pub fn simulate(path: &Path, out: &Path, overrides: &Overrides) -> Result<Summary, CliError> {
    let s = load(path, overrides)?;
    Ok(simulate_scenario(&s, out)?.1)
}

/// Reads `8x4`, `12` and inclusive single-mode ranges `4..30`, separated by commas.
pub fn parse_shapes(text: &str, modes: usize) -> Result<Vec<TruncationShape>> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((lo, hi)) = item.split_once("..") {
            if modes != 1 {
                bail!("range '{item}' is only supported for single-mode models");
            }
            let lo: usize = lo.trim().parse().map_err(|_| anyhow!("bad range start in '{item}'"))?;
            let hi: usize = hi.trim().trim_start_matches('=').parse().map_err(|_| anyhow!("bad range end in '{item}'"))?;
            if lo > hi {
                bail!("empty range '{item}'");
            }
            out.extend((lo..=hi).map(|n| TruncationShape::Rect(vec![n])));
        } else {
            let caps: Vec<usize> = item
                .split('x')
                .map(|c| c.trim().parse().map_err(|_| anyhow!("bad shape '{item}'")))
                .collect::<Result<_>>()?;
            if caps.len() != modes {
                bail!("shape '{item}' has {} mode(s), the model has {modes}", caps.len());
            }
            out.push(TruncationShape::Rect(caps));
        }
    }
    if out.is_empty() {
        bail!("no shapes given");
    }
    Ok(out)
}

/// One truncation of a sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub shape: TruncationShape,
    pub dim: usize,
    pub xi: f64,
    pub dist_to_ref: f64,
}

fn enclosing_box(a: &TruncationShape, b: &TruncationShape) -> TruncationShape {
    let (x, y) = (a.bounding_box(), b.bounding_box());
    TruncationShape::Rect(x.iter().zip(&y).map(|(p, q)| *p.max(q)).collect())
}

fn distance(a: &DenseOperator, b: &DenseOperator) -> Result<f64> {
    let big = enclosing_box(a.shape(), b.shape());
    let d = &fockspace::embed(a, &big)? - &fockspace::embed(b, &big)?;
    Ok(d.herm_part().hermitian_trace_norm()?)
}

/// Fixed-shape runs over `shapes`, compared with the largest one.
pub fn sweep_scenario(s: &Scenario, shapes: &[TruncationShape], out: &Path, jobs: usize) -> Result<Vec<SweepPoint>, CliError> {
    let rho0 = s.initial_state().map_err(CliError::Input)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Run(e.into()))?;
    let runs: Vec<Result<RunOutput, CliError>> = pool.install(|| {
        shapes
            .par_iter()
            .map(|shape| {
                let start = Instant::now();
                let r = run_fixed(&s.model, &rho0, shape, &s.config).map_err(solver_error)?;
                let summary = Summary::of(&r, &s.config, false, start.elapsed().as_secs_f64());
                let dir = out.join("points").join(shape.size_label());
                write_run(&dir, &r, &summary).map_err(CliError::Run)?;
                Ok(r)
            })
            .collect()
    });
    let runs: Vec<RunOutput> = runs.into_iter().collect::<Result<_, _>>()?;
    let reference = runs.iter().max_by_key(|r| r.state.rho.dim()).expect("at least one shape");
    let mut points = Vec::new();
    for r in &runs {
        points.push(SweepPoint {
            shape: r.shape().clone(),
            dim: r.state.rho.dim(),
            xi: r.xi(),
            dist_to_ref: distance(&r.state.rho, &reference.state.rho).map_err(CliError::Run)?,
        });
    }
    let modes = s.model.modes;
    let mut header: Vec<String> = (0..modes).map(|j| format!("N{j}")).collect();
    header.extend(["dim", "xi_T", "dist_to_ref"].map(String::from));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = points.iter().map(|p| {
        let mut row: Vec<String> = p.shape.bounding_box().iter().map(|n| n.to_string()).collect();
        row.extend([p.dim.to_string(), num(p.xi), num(p.dist_to_ref)]);
        row
    });
    let bytes = csv_text(&header, rows).map_err(CliError::Run)?;
    write_atomic(&out.join("error_vs_N.csv"), &bytes).map_err(CliError::Run)?;
    Ok(points)
}

pub fn sweep(path: &Path, shapes: &str, out: &Path, jobs: usize, overrides: &Overrides) -> Result<Vec<SweepPoint>, CliError> {
    let s = load(path, overrides)?;
    if !matches!(s.shape, TruncationShape::Rect(_)) {
        return Err(CliError::Input(anyhow!("sweeps are defined over rectangular shapes")));
    }
    let shapes = parse_shapes(shapes, s.model.modes).map_err(CliError::Input)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Run(e.into()))?;
    sweep_scenario(&s, &shapes, out, jobs)
}

pub fn list_presets() -> String {
    let mut s = String::new();
    for p in presets::PRESETS {
        s.push_str(&format!("{:<12} {}\n", p.name, p.about));
    }
    s
}

pub fn preset_model(name: &str) -> Result<&'static str, CliError> {
    presets::find(name).map(|p| p.model).ok_or_else(|| {
        CliError::Input(anyhow!("unknown preset '{name}'; available: {}", presets::names().join(", ")))
    })
}

/// Runs a preset; returns the directory holding its outputs.
pub fn reproduce(name: &str, out: &Path, jobs: usize) -> Result<PathBuf, CliError> {
    let p = presets::find(name).ok_or_else(|| {
        CliError::Input(anyhow!("unknown preset '{name}'; available: {}", presets::names().join(", ")))
    })?;
    let s = Scenario::from_toml(p.model, Path::new(".")).map_err(CliError::Input)?;
    let dir = out.join(p.name);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Run(e.into()))?;
    write_atomic(&dir.join("model.toml"), p.model.as_bytes()).map_err(CliError::Run)?;
    match &p.action {
        Action::Simulate => {
            simulate_scenario(&s, &dir)?;
        }
        Action::Sweep(shapes) => {
            let shapes = parse_shapes(shapes, s.model.modes).map_err(CliError::Input)?;
            sweep_scenario(&s, &shapes, &dir, jobs)?;
        }
        Action::Starts(starts) => {
            for start in *starts {
                let caps = parse_shapes(start, s.model.modes).map_err(CliError::Input)?;
                let mut t = s.clone();
                t.shape = caps[0].clone();
                simulate_scenario(&t, &dir.join(format!("start_{}", t.shape.size_label())))?;
            }
        }
    }
    Ok(dir)
}

/// Model file of a scenario, as TOML text.
pub fn dump(s: &Scenario) -> Result<String> {
    s.to_file().to_toml().context("serializing the model")
}
