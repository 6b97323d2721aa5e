//! TOML model files.
//!
//! ```toml
//! modes = 1
//!
//! [params]
//! alpha = 1.0
//! eta = "2*sqrt(pi)"          # strings are scalar expressions
//!
//! [shape]
//! rect = [20]                 # or: weighted = { w = ["1/2", "1"], cap = "6" }
//!
//! [[hamiltonian]]
//! coeff = { expr = "sin(t)", sup = 1.0, dsup = 1.0 }   # or a number
//! op = "a + ad"
//!
//! [[dissipators]]
//! op = "a^2 - alpha^2*id"     # or gkp = { A = 1, eta = "eta", eps = 0.15, k = 0 }
//!                             # or cosine = { q = ["eta"], p = [0] }
//!
//! [initial]
//! fock = [0]                  # or: matrix = "state.json"
//!
//! [solver]
//! t_final = 1.0
//! scheme = "adaptive_rk"      # rk4, euler, taylor1, taylor2, ...
//! time_tol = 1e-10
//! ```
//!
//! Unknown keys are rejected everywhere. A `gkp` entry without `k` expands to
//! the four rotated dissipators `k = 0..3`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use certilind::fockspace::{Basis, ShapeStep, TruncationShape};
use certilind::lindblad::{CoefficientFn, HamiltonianTerm, LindbladModel, OperatorExpr};
use certilind::solver::{Scheme, SolverConfig};
use certilind::{DenseOperator, LinearForm, Rational, C64};
use serde::{Deserialize, Serialize};

use crate::expr::{eval_constant, ScalarExpr};
use crate::poly::parse_poly;

/// A real number or a scalar expression over the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Value(f64),
    Expr(String),
}

impl Number {
    fn eval(&self, params: &BTreeMap<String, f64>) -> Result<f64> {
        match self {
            Number::Value(v) => Ok(*v),
            Number::Expr(s) => eval_constant(s, params).with_context(|| format!("in '{s}'")),
        }
    }
}

/// Exact rational written as an integer or a `"p/q"` string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RationalSpec {
    Int(i64),
    Text(String),
}

impl RationalSpec {
    fn value(&self) -> Result<Rational> {
        match self {
            RationalSpec::Int(n) => Ok(Rational::from_integer(*n)),
            RationalSpec::Text(s) => {
                Rational::from_str(s.trim()).map_err(|_| anyhow!("'{s}' is not an exact rational like \"3/2\""))
            }
        }
    }

    fn of(r: &Rational) -> Self {
        if r.is_integer() {
            RationalSpec::Int(r.to_integer())
        } else {
            RationalSpec::Text(r.to_string())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
pub enum ShapeSpec {
    Rect(Vec<usize>),
    Weighted { w: Vec<RationalSpec>, cap: RationalSpec },
}

impl ShapeSpec {
    pub fn to_shape(&self) -> Result<TruncationShape> {
        Ok(match self {
            ShapeSpec::Rect(caps) => TruncationShape::rect(caps.clone())?,
            ShapeSpec::Weighted { w, cap } => {
                TruncationShape::weighted(w.iter().map(|x| x.value()).collect::<Result<_>>()?, cap.value()?)?
            }
        })
    }

    pub fn of(shape: &TruncationShape) -> Self {
        match shape {
            TruncationShape::Rect(caps) => ShapeSpec::Rect(caps.clone()),
            TruncationShape::WeightedTotal { weights, cap } => ShapeSpec::Weighted {
                w: weights.iter().map(RationalSpec::of).collect(),
                cap: RationalSpec::of(cap),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoeffSpec {
    Constant(Number),
    Expr {
        expr: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sup: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dsup: Option<f64>,
    },
}

impl Default for CoeffSpec {
    fn default() -> Self {
        CoeffSpec::Constant(Number::Value(1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GkpSpec {
    #[serde(rename = "A")]
    pub amplitude: Number,
    pub eta: Number,
    pub eps: Number,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosineSpec {
    pub q: Vec<Number>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub p: Vec<Number>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, untagged)]
pub enum OpSpec {
    Poly { op: String },
    Gkp { gkp: GkpSpec },
    Cosine { cosine: CosineSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSpec {
    #[serde(default)]
    pub coeff: CoeffSpec,
    pub op: HamOpSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HamOpSpec {
    Poly(String),
    Builtin { cosine: CosineSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, untagged)]
pub enum InitialSpec {
    Fock { fock: Vec<usize> },
    Matrix { matrix: String },
}

/// `4` (every mode / the cap), `[4, 2]` (per mode) or `"1/2"` (weighted cap step).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepSpec {
    Uniform(usize),
    PerMode(Vec<usize>),
    Cap(String),
}

impl StepSpec {
    fn to_step(&self, shape: &TruncationShape) -> Result<ShapeStep> {
        Ok(match self {
            StepSpec::Uniform(n) => ShapeStep::uniform(shape, *n),
            StepSpec::PerMode(v) => ShapeStep::PerMode(v.clone()),
            StepSpec::Cap(s) => ShapeStep::Cap(RationalSpec::Text(s.clone()).value()?),
        })
    }

    fn of(step: &ShapeStep) -> Self {
        match step {
            ShapeStep::PerMode(v) => StepSpec::PerMode(v.clone()),
            ShapeStep::Cap(r) => StepSpec::Cap(r.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub t_final: Number,
    #[serde(default = "default_scheme")]
    pub scheme: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<Number>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub downsize_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grow_step: Option<StepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shrink_step: Option<StepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_dimension: Option<usize>,
    #[serde(default)]
    pub adaptive_space: bool,
    #[serde(default)]
    pub time_certificate: bool,
}

fn default_scheme() -> String {
    "adaptive_rk".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub modes: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, Number>,
    pub shape: ShapeSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hamiltonian: Vec<HamiltonianSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dissipators: Vec<OpSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSpec>,
    pub solver: SolverSpec,
}

impl ModelFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| anyhow!("{}", e.to_string().trim_end()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

/// Initial state of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    Fock(Vec<usize>),
    /// Dense matrix read from `path`, on the scenario shape.
    Matrix { path: String, rho: DenseOperator },
}

/// A fully validated model file: the model, where it starts and how to run it.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub model: LindbladModel,
    pub shape: TruncationShape,
    pub initial: Initial,
    pub config: SolverConfig,
    pub adaptive_space: bool,
}

const RESERVED: [&str; 12] = ["t", "pi", "i", "id", "b", "bd", "sin", "cos", "exp", "sqrt", "step", "e"];

fn check_param_name(name: &str) -> Result<()> {
    let ident = name.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_alphanumeric() || c == '_');
    let operator_like = ["ad", "a", "q", "p", "n"]
        .iter()
        .any(|k| name.strip_prefix(k).is_some_and(|r| r.chars().all(|c| c.is_ascii_digit())));
    if !ident || operator_like || RESERVED.contains(&name) {
        bail!("'{name}' cannot be used as a parameter name");
    }
    Ok(())
}

/// Parameters in declaration-independent order; each may refer to the ones
/// resolved before it, so a few passes settle any acyclic set.
fn resolve_params(raw: &BTreeMap<String, Number>) -> Result<BTreeMap<String, f64>> {
    let mut done = BTreeMap::new();
    for name in raw.keys() {
        check_param_name(name)?;
    }
    while done.len() < raw.len() {
        let before = done.len();
        let mut last_err = None;
        for (name, v) in raw {
            if done.contains_key(name) {
                continue;
            }
            match v.eval(&done) {
                Ok(x) => {
                    done.insert(name.clone(), x);
                }
                Err(e) => last_err = Some((name.clone(), e)),
            }
        }
        if done.len() == before {
            let (name, e) = last_err.expect("unresolved parameter");
            return Err(e.context(format!("parameter '{name}'")));
        }
    }
    Ok(done)
}

fn parse_scheme(s: &str) -> Result<Scheme> {
    Ok(match s {
        "adaptive_rk" => Scheme::AdaptiveRk,
        "rk4" => Scheme::Rk4,
        "euler" => Scheme::Euler,
        _ => match s.strip_prefix("taylor").and_then(|k| k.parse::<usize>().ok()) {
            Some(k) if k >= 1 => Scheme::Taylor(k),
            _ => bail!("unknown scheme '{s}' (expected adaptive_rk, rk4, euler or taylorK)"),
        },
    })
}

fn scheme_name(s: Scheme) -> String {
    match s {
        Scheme::Taylor(k) => format!("taylor{k}"),
        other => other.to_string(),
    }
}

fn linear_form(spec: &CosineSpec, modes: usize, params: &BTreeMap<String, f64>) -> Result<LinearForm> {
    let q: Vec<f64> = spec.q.iter().map(|x| x.eval(params)).collect::<Result<_>>()?;
    let p: Vec<f64> = if spec.p.is_empty() {
        vec![0.0; q.len()]
    } else {
        spec.p.iter().map(|x| x.eval(params)).collect::<Result<_>>()?
    };
    if q.len() != modes || p.len() != modes {
        bail!("cosine needs one q and one p coefficient per mode ({modes})");
    }
    Ok(LinearForm::new(q, p)?)
}

fn coefficient(spec: &CoeffSpec, params: &BTreeMap<String, f64>) -> Result<CoefficientFn> {
    match spec {
        CoeffSpec::Constant(n) => Ok(CoefficientFn::constant(n.eval(params)?)),
        CoeffSpec::Expr { expr, sup, dsup } => {
            let e = ScalarExpr::parse(expr, params, true).with_context(|| format!("in coefficient '{expr}'"))?;
            Ok(CoefficientFn::new(expr.clone(), move |t| e.eval(t), *sup, *dsup))
        }
    }
}

fn load_matrix(path: &Path, basis: &std::sync::Arc<Basis>) -> Result<DenseOperator> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let m: crate::output::MatrixJson =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if m.dim != basis.dim() || m.data.len() != m.dim * m.dim {
        bail!("{}: matrix has dimension {} but the shape needs {}", path.display(), m.dim, basis.dim());
    }
    let data: Vec<C64> = m.data.iter().map(|[re, im]| C64::new(*re, *im)).collect();
    Ok(DenseOperator::from_row_major(basis.clone(), &data)?)
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base)
    }

    /// Parses model-file text; relative matrix paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        Self::from_file(&ModelFile::from_toml(text)?, base)
    }

    pub fn from_file(f: &ModelFile, base: &Path) -> Result<Self> {
        let modes = f.modes;
        if modes == 0 {
            bail!("modes must be at least 1");
        }
        let params = resolve_params(&f.params)?;
        let shape = f.shape.to_shape().context("in [shape]")?;
        if shape.mode_count() != modes {
            bail!("shape has {} mode(s) but modes = {modes}", shape.mode_count());
        }

        let mut hamiltonian = Vec::new();
        for (i, h) in f.hamiltonian.iter().enumerate() {
            let ctx = || format!("in hamiltonian term {}", i + 1);
            let op = match &h.op {
                HamOpSpec::Poly(s) => OperatorExpr::Poly(parse_poly(s, modes, &params).with_context(ctx)?),
                HamOpSpec::Builtin { cosine } => {
                    OperatorExpr::Cosine(linear_form(cosine, modes, &params).with_context(ctx)?)
                }
            };
            hamiltonian.push(HamiltonianTerm::new(coefficient(&h.coeff, &params).with_context(ctx)?, op));
        }

        let mut dissipators = Vec::new();
        for (i, d) in f.dissipators.iter().enumerate() {
            let ctx = || format!("in dissipator {}", i + 1);
            match d {
                OpSpec::Poly { op } => dissipators.push(OperatorExpr::Poly(parse_poly(op, modes, &params).with_context(ctx)?)),
                OpSpec::Cosine { cosine } => {
                    dissipators.push(OperatorExpr::Cosine(linear_form(cosine, modes, &params).with_context(ctx)?))
                }
                OpSpec::Gkp { gkp } => {
                    let amplitude = gkp.amplitude.eval(&params).with_context(ctx)?;
                    let eta = gkp.eta.eval(&params).with_context(ctx)?;
                    let eps = gkp.eps.eval(&params).with_context(ctx)?;
                    let ks: Vec<i64> = gkp.k.map_or_else(|| (0..4).collect(), |k| vec![k]);
                    for k in ks {
                        dissipators.push(OperatorExpr::GkpGamma { k, amplitude, eta, eps });
                    }
                }
            }
        }
        let model = LindbladModel::new(modes, hamiltonian, dissipators)?.with_params(params.clone());

        let basis = Basis::of(&shape);
        let initial = match &f.initial {
            None => Initial::Fock(vec![0; modes]),
            Some(InitialSpec::Fock { fock }) => {
                DenseOperator::fock_projector(basis.clone(), fock).context("in [initial]")?;
                Initial::Fock(fock.clone())
            }
            Some(InitialSpec::Matrix { matrix }) => {
                let p = PathBuf::from(matrix);
                let full = if p.is_absolute() { p } else { base.join(p) };
                Initial::Matrix { path: matrix.clone(), rho: load_matrix(&full, &basis)? }
            }
        };

        let s = &f.solver;
        let t_final = s.t_final.eval(&params).context("in solver.t_final")?;
        let scheme = parse_scheme(&s.scheme)?;
        let mut config = SolverConfig::adaptive(t_final, s.time_tol.unwrap_or(1e-10));
        config.scheme = scheme;
        config.dt = s.dt.as_ref().map(|d| d.eval(&params)).transpose().context("in solver.dt")?;
        if let Some(x) = s.space_tol {
            config.space_tol = x;
        }
        if let Some(x) = s.downsize_factor {
            config.downsize_factor = x;
        }
        config.grow_step = s.grow_step.as_ref().unwrap_or(&StepSpec::Uniform(4)).to_step(&shape)?;
        config.shrink_step = s.shrink_step.as_ref().unwrap_or(&StepSpec::Uniform(4)).to_step(&shape)?;
        if let Some(x) = s.max_dimension {
            config.max_dimension = x;
        }
        config.enable_time_certificate = s.time_certificate;
        config.validate()?;
        for term in &model.hamiltonian {
            term.coeff.validate_bounds(t_final)?;
        }
        Ok(Scenario { model, shape, initial, config, adaptive_space: s.adaptive_space })
    }

    pub fn initial_state(&self) -> Result<DenseOperator> {
        match &self.initial {
            Initial::Fock(k) => Ok(DenseOperator::fock_projector(Basis::of(&self.shape), k)?),
            Initial::Matrix { rho, .. } => Ok(rho.clone()),
        }
    }

    /// Writes the scenario back out; parsing the result gives an identical scenario.
    pub fn to_file(&self) -> ModelFile {
        let m = &self.model;
        let cosine = |f: &LinearForm| CosineSpec {
            q: f.q.iter().map(|x| Number::Value(*x)).collect(),
            p: f.p.iter().map(|x| Number::Value(*x)).collect(),
        };
        let hamiltonian = m
            .hamiltonian
            .iter()
            .map(|h| HamiltonianSpec {
                coeff: match h.coeff.as_constant() {
                    Some(c) => CoeffSpec::Constant(Number::Value(c)),
                    None => CoeffSpec::Expr { expr: h.coeff.label().to_string(), sup: h.coeff.sup(), dsup: h.coeff.dsup() },
                },
                op: match &h.op {
                    OperatorExpr::Poly(p) => HamOpSpec::Poly(p.to_string()),
                    OperatorExpr::Cosine(f) => HamOpSpec::Builtin { cosine: cosine(f) },
                    OperatorExpr::GkpGamma { .. } => unreachable!("rejected by model validation"),
                },
            })
            .collect();
        let dissipators = m
            .dissipators
            .iter()
            .map(|d| match d {
                OperatorExpr::Poly(p) => OpSpec::Poly { op: p.to_string() },
                OperatorExpr::Cosine(f) => OpSpec::Cosine { cosine: cosine(f) },
                OperatorExpr::GkpGamma { k, amplitude, eta, eps } => OpSpec::Gkp {
                    gkp: GkpSpec {
                        amplitude: Number::Value(*amplitude),
                        eta: Number::Value(*eta),
                        eps: Number::Value(*eps),
                        k: Some(*k),
                    },
                },
            })
            .collect();
        let c = &self.config;
        ModelFile {
            modes: m.modes,
            params: m.params.iter().map(|(k, v)| (k.clone(), Number::Value(*v))).collect(),
            shape: ShapeSpec::of(&self.shape),
            hamiltonian,
            dissipators,
            initial: Some(match &self.initial {
                Initial::Fock(k) => InitialSpec::Fock { fock: k.clone() },
                Initial::Matrix { path, .. } => InitialSpec::Matrix { matrix: path.clone() },
            }),
            solver: SolverSpec {
                t_final: Number::Value(c.t_final),
                scheme: scheme_name(c.scheme),
                time_tol: Some(c.time_tol),
                dt: c.dt.map(Number::Value),
                space_tol: Some(c.space_tol),
                downsize_factor: Some(c.downsize_factor),
                grow_step: Some(StepSpec::of(&c.grow_step)),
                shrink_step: Some(StepSpec::of(&c.shrink_step)),
                max_dimension: Some(c.max_dimension),
                adaptive_space: self.adaptive_space,
                time_certificate: c.enable_time_certificate,
            },
        }
    }
}
