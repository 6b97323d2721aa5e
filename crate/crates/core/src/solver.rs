//! Time steppers and the space-adaptive driver.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::estimators::{
    euler_timedep_step_bound, taylor_step_bound, xi_step, EstimatorLedger, LedgerKind, SpaceEstimator,
};
use crate::fockspace::{self, Basis, ShapeStep, TruncationShape};
use crate::lindblad::{DensityState, Generator, LindbladModel};
use crate::operators::DenseOperator;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Dormand-Prince 5(4) with step-size control.
    AdaptiveRk,
    Rk4,
    Taylor(usize),
    Euler,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::AdaptiveRk => write!(f, "adaptive_rk"),
            Scheme::Rk4 => write!(f, "rk4"),
            Scheme::Taylor(k) => write!(f, "taylor({k})"),
            Scheme::Euler => write!(f, "euler"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub t_final: f64,
    pub scheme: Scheme,
    pub time_tol: f64,
    /// Fixed step for `rk4`, `taylor` and `euler`.
    pub dt: Option<f64>,
    pub space_tol: f64,
    pub downsize_factor: f64,
    pub grow_step: ShapeStep,
    pub shrink_step: ShapeStep,
    pub max_dimension: usize,
    pub enable_time_certificate: bool,
}

impl SolverConfig {
    pub fn adaptive(t_final: f64, time_tol: f64) -> Self {
        SolverConfig {
            t_final,
            scheme: Scheme::AdaptiveRk,
            time_tol,
            dt: None,
            space_tol: 1e-6,
            downsize_factor: 5.0,
            grow_step: ShapeStep::PerMode(vec![4]),
            shrink_step: ShapeStep::PerMode(vec![4]),
            max_dimension: 5000,
            enable_time_certificate: false,
        }
    }

    pub fn fixed(t_final: f64, scheme: Scheme, dt: f64) -> Self {
        SolverConfig { scheme, dt: Some(dt), ..Self::adaptive(t_final, 1e-10) }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return bad("final time must be positive");
        }
        if !(self.space_tol > 0.0) {
            return bad("space tolerance must be positive");
        }
        if !(self.downsize_factor > 1.0) {
            return bad("downsize factor must exceed 1");
        }
        if !(self.time_tol > 0.0) {
            return bad("time tolerance must be positive");
        }
        if let Scheme::Taylor(0) = self.scheme {
            return bad("Taylor order must be at least 1");
        }
        if self.scheme != Scheme::AdaptiveRk {
            match self.dt {
                Some(dt) if dt > 0.0 => {}
                _ => return bad("fixed-step schemes need a positive dt"),
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResizeEvent {
    None,
    Grow,
    Shrink,
}

impl ResizeEvent {
    pub fn as_str(&self) -> &'static str {
        match self {
            ResizeEvent::None => "none",
            ResizeEvent::Grow => "grow",
            ResizeEvent::Shrink => "shrink",
        }
    }
}

/// One attempted step (or resize) of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub time: f64,
    pub shape: TruncationShape,
    pub dim: usize,
    pub trace: f64,
    pub xi: f64,
    pub defect_rate: f64,
    pub accepted: bool,
    pub resize: ResizeEvent,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: DensityState,
    pub ledger: EstimatorLedger,
    pub trajectory: Vec<TrajectoryRecord>,
    pub warnings: Vec<String>,
}

impl RunOutput {
    pub fn xi(&self) -> f64 {
        self.ledger.xi()
    }

    pub fn shape(&self) -> &TruncationShape {
        self.state.rho.shape()
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B_ERR: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// Accepted step of the embedded Runge-Kutta pair.
#[derive(Debug, Clone)]
pub struct AdaptiveStep {
    pub rho: DenseOperator,
    pub dt: f64,
    /// `L_N(t + dt, rho)` at the new state, reused by the next step.
    pub derivative: DenseOperator,
}

/// Dormand-Prince 5(4) stepper with the standard step-size controller.
#[derive(Debug, Clone)]
pub struct AdaptiveStepper {
    h: Option<f64>,
    fsal: Option<DenseOperator>,
    t_final: f64,
}

impl AdaptiveStepper {
    pub fn new(t_final: f64) -> Self {
        AdaptiveStepper { h: None, fsal: None, t_final }
    }

    /// Forgets the cached derivative (needed after the state is reshaped).
    pub fn reset_derivative(&mut self) {
        self.fsal = None;
    }

    /// Mixed absolute/relative error in the max norm over real and imaginary parts, so that
    /// zero padding of the state never changes the controller's decisions.
    fn err_norm(y0: &DenseOperator, y1: &DenseOperator, err: &DenseOperator, tol: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for ((a, b), e) in y0.as_slice().iter().zip(y1.as_slice()).zip(err.as_slice()) {
            let sr = tol + tol * a.re.abs().max(b.re.abs());
            let si = tol + tol * a.im.abs().max(b.im.abs());
            worst = worst.max((e.re / sr).abs()).max((e.im / si).abs());
        }
        worst
    }

    fn initial_step(&self, gen: &Generator, t: f64, y: &DenseOperator, f0: &DenseOperator, tol: f64, hmax: f64) -> Result<f64> {
        let scale = |v: &DenseOperator| {
            let mut worst: f64 = 0.0;
            for (x, y0) in v.as_slice().iter().zip(y.as_slice()) {
                let sr = tol + tol * y0.re.abs();
                let si = tol + tol * y0.im.abs();
                worst = worst.max((x.re / sr).abs()).max((x.im / si).abs());
            }
            worst
        };
        let d0 = scale(y);
        let d1 = scale(f0);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(hmax);
        let mut y1 = y.clone();
        y1.axpy(C64::new(h0, 0.0), f0);
        let f1 = gen.apply(t + h0, &y1)?;
        let d2 = scale(&(&f1 - f0)) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 5.0)
        };
        Ok((100.0 * h0).min(h1).min(hmax))
    }

    /// Takes one accepted step from `t`, never beyond `t_end`.
    pub fn step(&mut self, gen: &Generator, t: f64, rho: &DenseOperator, t_end: f64, tol: f64) -> Result<AdaptiveStep> {
        let hmax = t_end - t;
        if !(hmax > 0.0) {
            return Err(Error::InvalidInput(format!("no time left to integrate at t = {t}")));
        }
        let k1 = match self.fsal.take() {
            Some(k) if k.shape() == rho.shape() => k,
            _ => gen.apply(t, rho)?,
        };
        if k1.max_abs() == 0.0 {
            self.fsal = Some(k1.clone());
            self.h = Some(hmax);
            return Ok(AdaptiveStep { rho: rho.clone(), dt: hmax, derivative: k1 });
        }
        let mut h = match self.h {
            Some(h) => h.min(hmax),
            None => self.initial_step(gen, t, rho, &k1, tol, hmax)?,
        };
        let mut rejected = false;
        loop {
            if h < 1e-14 * self.t_final {
                return Err(Error::StepUnderflow { t, h });
            }
            let mut ks: Vec<DenseOperator> = Vec::with_capacity(7);
            ks.push(k1.clone());
            let mut y_new = rho.clone();
            for s in 1..7 {
                let mut y = rho.clone();
                for (j, kj) in ks.iter().enumerate() {
                    let a = A[s][j];
                    if a != 0.0 {
                        y.axpy(C64::new(h * a, 0.0), kj);
                    }
                }
                let k = gen.apply(t + C[s] * h, &y)?;
                if s == 6 {
                    y_new = y;
                }
                ks.push(k);
            }
            let mut err = DenseOperator::zeros(rho.basis().clone());
            for (j, kj) in ks.iter().enumerate() {
                if B_ERR[j] != 0.0 {
                    err.axpy(C64::new(h * B_ERR[j], 0.0), kj);
                }
            }
            let e = Self::err_norm(rho, &y_new, &err, tol);
            if !e.is_finite() {
                h *= 0.2;
                rejected = true;
                continue;
            }
            if e <= 1.0 {
                let fac = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
                let fac = if rejected { fac.min(1.0) } else { fac };
                self.h = Some(h * fac);
                let derivative = ks.pop().unwrap();
                self.fsal = Some(derivative.clone());
                let dt = if (hmax - h).abs() <= 1e-14 * self.t_final { hmax } else { h };
                return Ok(AdaptiveStep { rho: y_new, dt, derivative });
            }
            h *= (0.9 * e.powf(-0.2)).max(0.2);
            rejected = true;
        }
    }
}

/// One Dormand-Prince step of `d rho/dt = L_shape(rho)` from `t`; returns `(delta rho, dt)`.
pub fn adaptive_solve_one_step(
    model: &LindbladModel,
    shape: &TruncationShape,
    rho: &DenseOperator,
    t: f64,
    t_final: f64,
    time_tol: f64,
) -> Result<(DenseOperator, f64)> {
    if rho.shape() != shape {
        return Err(Error::ShapeMismatch(format!("state on {}, requested {shape}", rho.shape())));
    }
    let gen = Generator::new(model, rho.basis())?;
    let mut stepper = AdaptiveStepper::new(t_final);
    let s = stepper.step(&gen, t, rho, t_final, time_tol)?;
    Ok((&s.rho - rho, s.dt))
}

fn rk4_step(gen: &Generator, t: f64, rho: &DenseOperator, dt: f64) -> Result<DenseOperator> {
    let k1 = gen.apply(t, rho)?;
    let mut y = rho.clone();
    y.axpy(C64::new(0.5 * dt, 0.0), &k1);
    let k2 = gen.apply(t + 0.5 * dt, &y)?;
    let mut y = rho.clone();
    y.axpy(C64::new(0.5 * dt, 0.0), &k2);
    let k3 = gen.apply(t + 0.5 * dt, &y)?;
    let mut y = rho.clone();
    y.axpy(C64::new(dt, 0.0), &k3);
    let k4 = gen.apply(t + dt, &y)?;
    let mut out = rho.clone();
    out.axpy(C64::new(dt / 6.0, 0.0), &k1);
    out.axpy(C64::new(dt / 3.0, 0.0), &k2);
    out.axpy(C64::new(dt / 3.0, 0.0), &k3);
    out.axpy(C64::new(dt / 6.0, 0.0), &k4);
    Ok(out)
}

fn taylor_with(gen: &Generator, t: f64, rho: &DenseOperator, dt: f64, k: usize) -> Result<DenseOperator> {
    let mut out = rho.clone();
    let mut term = rho.clone();
    for j in 1..=k {
        term = gen.apply(t, &term)?.scale_real(dt / j as f64);
        out += &term;
    }
    Ok(out)
}

/// `F_dt(rho) = sum_{j<=k} dt^j/j! L_N^j(rho)`.
pub fn taylor_stepper(model: &LindbladModel, rho: &DenseOperator, dt: f64, k: usize) -> Result<DenseOperator> {
    let gen = Generator::new(model, rho.basis())?;
    taylor_with(&gen, 0.0, rho, dt, k)
}

/// `rho + dt L_N(t, rho)`.
pub fn euler_stepper(model: &LindbladModel, t: f64, rho: &DenseOperator, dt: f64) -> Result<DenseOperator> {
    let gen = Generator::new(model, rho.basis())?;
    taylor_with(&gen, t, rho, dt, 1)
}

struct Workspace {
    generators: HashMap<TruncationShape, Arc<Generator>>,
}

impl Workspace {
    fn new() -> Self {
        Workspace { generators: HashMap::new() }
    }

    fn generator(&mut self, model: &LindbladModel, basis: &Arc<Basis>) -> Result<Arc<Generator>> {
        if let Some(g) = self.generators.get(basis.shape()) {
            return Ok(g.clone());
        }
        let g = Arc::new(Generator::new(model, basis)?);
        if self.generators.len() > 32 {
            self.generators.clear();
        }
        self.generators.insert(basis.shape().clone(), g.clone());
        Ok(g)
    }
}

fn record(t: f64, rho: &DenseOperator, xi: f64, defect: f64, accepted: bool, resize: ResizeEvent) -> TrajectoryRecord {
    TrajectoryRecord {
        time: t,
        shape: rho.shape().clone(),
        dim: rho.dim(),
        trace: rho.trace().re,
        xi,
        defect_rate: defect,
        accepted,
        resize,
    }
}

fn check_state(rho: &DenseOperator, t: f64, expected_trace: f64, psd: bool, warnings: &mut Vec<String>) {
    warnings.extend(DensityState::new(rho.clone(), t).check(expected_trace, psd));
}

/// Integrates to `T` on a fixed shape, accumulating the space estimator (and, for Taylor or
/// Euler with the time certificate enabled, the per-step time bounds).
///
/// A state given on a larger shape is projected first and the discarded norm opens the ledger.
pub fn run_fixed(model: &LindbladModel, rho0: &DenseOperator, shape: &TruncationShape, config: &SolverConfig) -> Result<RunOutput> {
    config.validate()?;
    model.validate()?;
    let mut ledger = EstimatorLedger::new();
    let mut rho = if rho0.shape() == shape {
        rho0.clone()
    } else if rho0.shape().contained_in(shape)? {
        fockspace::embed(rho0, shape)?
    } else {
        let (p, lost) = fockspace::project(rho0, shape)?;
        ledger.push(0.0, LedgerKind::InitProjection, lost)?;
        p
    };
    let basis = rho.basis().clone();
    let gen = Generator::new(model, &basis)?;
    let mut estimator = SpaceEstimator::new(model)?;
    let t_final = config.t_final;
    let mut t = 0.0;
    let mut trajectory = Vec::new();
    let mut warnings = Vec::new();
    let trace0 = rho.trace().re;
    let mut stepper = AdaptiveStepper::new(t_final);
    while t < t_final {
        let (next, dt, derivative) = match config.scheme {
            Scheme::AdaptiveRk => {
                let s = stepper.step(&gen, t, &rho, t_final, config.time_tol)?;
                (s.rho, s.dt, Some(s.derivative))
            }
            scheme => {
                let dt0 = config.dt.unwrap();
                let dt = if t + dt0 >= t_final * (1.0 - 1e-12) { t_final - t } else { dt0 };
                if config.enable_time_certificate {
                    match scheme {
                        Scheme::Taylor(k) => {
                            let b = taylor_step_bound(model, &rho, dt, k)?;
                            ledger.push(t + dt, LedgerKind::TimeTaylor, b)?;
                        }
                        Scheme::Euler => {
                            let b = euler_timedep_step_bound(model, &rho, t, dt)?;
                            ledger.push(t + dt, LedgerKind::TimeEuler, b)?;
                        }
                        _ => {}
                    }
                }
                let next = match scheme {
                    Scheme::Rk4 => rk4_step(&gen, t, &rho, dt)?,
                    Scheme::Taylor(k) => taylor_with(&gen, t, &rho, dt, k)?,
                    Scheme::Euler => taylor_with(&gen, t, &rho, dt, 1)?,
                    Scheme::AdaptiveRk => unreachable!(),
                };
                (next, dt, None)
            }
        };
        let t_new = if (t_final - (t + dt)).abs() <= 1e-14 * t_final { t_final } else { t + dt };
        let defect = estimator.defect(t_new, &next, derivative.as_ref())?;
        xi_step(&mut ledger, t_new, defect, dt)?;
        rho = next;
        t = t_new;
        trajectory.push(record(t, &rho, ledger.xi(), defect, true, ResizeEvent::None));
    }
    check_state(&rho, t, trace0, true, &mut warnings);
    Ok(RunOutput { state: DensityState::new(rho, t), ledger, trajectory, warnings })
}

/// Space-adaptive solver: steps are accepted only while `xi` stays within the linear budget
/// `(t/T) space_tol`; otherwise the shape grows and the step is recomputed. After each
/// accepted step the shape shrinks when the discarded tail fits in `(t/T) space_tol / w`.
pub fn run_adaptive(model: &LindbladModel, rho0: &DenseOperator, config: &SolverConfig) -> Result<RunOutput> {
    config.validate()?;
    model.validate()?;
    if rho0.dim() > config.max_dimension {
        return Err(Error::InvalidInput("initial state exceeds the maximum dimension".into()));
    }
    let t_final = config.t_final;
    let mut ledger = EstimatorLedger::new();
    let mut rho = rho0.clone();
    let mut t = 0.0;
    let mut trajectory = Vec::new();
    let mut warnings = Vec::new();
    let mut estimator = SpaceEstimator::new(model)?;
    let mut ws = Workspace::new();
    let mut stepper = AdaptiveStepper::new(t_final);
    let trace0 = rho.trace().re;
    let mut shrunk = false;
    while t < t_final {
        let (next, dt, defect) = loop {
            let gen = ws.generator(model, rho.basis())?;
            let s = stepper.step(&gen, t, &rho, t_final, config.time_tol)?;
            let t_new = if (t_final - (t + s.dt)).abs() <= 1e-14 * t_final { t_final } else { t + s.dt };
            let defect = estimator.defect(t_new, &s.rho, Some(&s.derivative))?;
            let dxi = s.dt * defect;
            if ledger.xi() + dxi < (t_new / t_final) * config.space_tol {
                break (s.rho, s.dt, defect);
            }
            trajectory.push(record(t_new, &s.rho, ledger.xi(), defect, false, ResizeEvent::None));
            let bigger = rho.shape().grow(&config.grow_step)?;
            let dim = bigger.dimension();
            if dim > config.max_dimension {
                return Err(Error::MaxDimensionExceeded { t, max: config.max_dimension, needed: dim });
            }
            rho = fockspace::embed(&rho, &bigger)?;
            stepper.reset_derivative();
            trajectory.push(record(t, &rho, ledger.xi(), defect, false, ResizeEvent::Grow));
            check_state(&rho, t, trace0 - if shrunk { ledger.total(LedgerKind::ShrinkJump) } else { 0.0 }, false, &mut warnings);
        };
        let t_new = if (t_final - (t + dt)).abs() <= 1e-14 * t_final { t_final } else { t + dt };
        xi_step(&mut ledger, t_new, defect, dt)?;
        rho = next;
        t = t_new;
        trajectory.push(record(t, &rho, ledger.xi(), defect, true, ResizeEvent::None));

        if let Ok(smaller) = rho.shape().shrink(&config.shrink_step) {
            let budget = (t / t_final) * config.space_tol / config.downsize_factor;
            if ledger.xi() < budget {
                let (p, tail) = fockspace::project(&rho, &smaller)?;
                if ledger.xi() + tail < budget {
                    ledger.push(t, LedgerKind::ShrinkJump, tail)?;
                    rho = p;
                    shrunk = true;
                    stepper.reset_derivative();
                    trajectory.push(record(t, &rho, ledger.xi(), defect, true, ResizeEvent::Shrink));
                }
            }
        }
    }
    let expected = rho.trace().re;
    check_state(&rho, t, expected, true, &mut warnings);
    if !shrunk && (expected - trace0).abs() > 1e-10 {
        warnings.push(format!("trace drifted from {trace0} to {expected}"));
    }
    Ok(RunOutput { state: DensityState::new(rho, t), ledger, trajectory, warnings })
}

/// Runs the configured scheme: the adaptive driver for `adaptive_rk`, a fixed-shape run otherwise.
pub fn run(model: &LindbladModel, rho0: &DenseOperator, config: &SolverConfig, adaptive_space: bool) -> Result<RunOutput> {
    if adaptive_space {
        run_adaptive(model, rho0, config)
    } else {
        run_fixed(model, rho0, rho0.shape(), config)
    }
}
