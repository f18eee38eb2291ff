//! Measurement pipelines: smoothness probes and the dichotomy sweep, slope
//! fits, timing, and the training studies (anisotropy, robustness, joint
//! count, method comparison, SE(3) divergence).
//!
//! Every study is a deterministic function of its configuration and seeds.
//! Wall-clock columns are the only exception. Seeds run in parallel and are
//! collected in input order.

use std::fmt;
use std::hint::black_box;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::algebra::{make_descriptor, skew_symmetrize_blocks, sl_spectral_ceiling, AlgebraDescriptor, AlgebraElement, AlgebraKind};
use crate::envs::{
    exp_residual_gradient, witness_g, witness_g1, witness_g2, witness_objective, AnisotropyMode, LieGroupMdp, PerturbationConfig, Se3Env,
    So3JointsEnv, DEFAULT_HORIZON,
};
use crate::error::{Error, Result};
use crate::estimation::{alignment, fisher_from_scores, kantorovich_bound};
use crate::expmap::{frechet_adjoint, mat_exp, mat_exp_frechet, theoretical_lipschitz, SmoothnessParams};
use crate::optim::{oracle_run, train, Method, OptimizerConfig, Quadratic, RunRecord, Schedule};
use crate::policy::{AmbientPolicy, GaussianLiePolicy};
use crate::rng::{normal, normal_vec, stream, Stream};

/// A single table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::Float(v) => Some(*v),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    /// Floats use 17 significant digits so that a round trip is exact.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) if v.is_finite() => write!(f, "{v:.16e}"),
            Value::Float(v) if v.is_nan() => write!(f, "nan"),
            Value::Float(v) => write!(f, "{}", if *v > 0.0 { "inf" } else { "-inf" }),
            Value::Text(v) => write!(f, "{v}"),
            Value::Bool(v) => write!(f, "{v}"),
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Int(v as i64)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_owned())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

/// Long-format result table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.to_owned(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the {} columns of {}", self.columns.len(), self.name);
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric values of a column; non-numeric cells are skipped.
    pub fn floats(&self, name: &str) -> Vec<f64> {
        match self.column_index(name) {
            Some(i) => self.rows.iter().filter_map(|r| r[i].as_f64()).collect(),
            None => Vec::new(),
        }
    }
}

// ---------------------------------------------------------------- fits

/// Least-squares line through `points`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Sum of squared residuals.
    pub residual_ss: f64,
    /// Inputs dropped because they could not be logged.
    pub dropped: usize,
}

/// Ordinary least squares of `y` on `x`.
pub fn linear_fit(points: Vec<(f64, f64)>) -> Result<SlopeFit> {
    let n = points.len();
    if n < 2 {
        return Err(Error::Argument(format!("a line fit needs at least 2 points, got {n}")));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Argument("all x values coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual_ss: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - residual_ss / syy } else { 1.0 };
    Ok(SlopeFit { points, slope, intercept, r_squared, residual_ss, dropped: 0 })
}

/// Fit of `log y` against `log x`. Pairs with a non-positive coordinate are
/// dropped and counted; at least five must remain.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(Error::Argument(format!("{} x values but {} y values", xs.len(), ys.len())));
    }
    let points: Vec<_> = xs.iter().zip(ys).filter(|(x, y)| **x > 0.0 && **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    let dropped = xs.len() - points.len();
    if points.len() < 5 {
        return Err(Error::Argument(format!("only {} positive points remain; a slope fit needs 5", points.len())));
    }
    let mut fit = linear_fit(points)?;
    fit.dropped = dropped;
    Ok(fit)
}

/// Log-log slope of a per-iteration metric (iterations counted from 1)
/// after discarding the first `burn_in_fraction` of the trace.
pub fn convergence_slope(trace: &[f64], burn_in_fraction: f64) -> Result<SlopeFit> {
    if trace.len() < 50 {
        return Err(Error::Argument(format!("trace has {} entries; at least 50 are required", trace.len())));
    }
    if !(0.0..1.0).contains(&burn_in_fraction) {
        return Err(Error::Argument(format!("burn-in fraction must lie in [0, 1) (got {burn_in_fraction})")));
    }
    let start = (burn_in_fraction * trace.len() as f64).floor() as usize;
    let xs: Vec<f64> = (start..trace.len()).map(|t| (t + 1) as f64).collect();
    fit_loglog(&xs, &trace[start..])
}

/// `(1/t) Σ_{s ≤ t} x_s`.
pub fn running_average(xs: &[f64]) -> Vec<f64> {
    let mut total = 0.0;
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            total += x;
            total / (i + 1) as f64
        })
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

// ---------------------------------------------------------------- probes

/// Objectives with an exact coordinate gradient.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbeObjective {
    /// `⟨c, θ⟩`.
    Linear(DVector<f64>),
    /// `−‖θ‖²`.
    NegQuadratic,
    /// `−½‖exp(θ) − I‖_F²`; the witness objective on non-compact algebras.
    ExpResidual,
}

impl ProbeObjective {
    pub fn gradient(&self, theta: &AlgebraElement) -> Result<DVector<f64>> {
        match self {
            ProbeObjective::Linear(c) => {
                if c.len() != theta.coords().len() {
                    return Err(Error::Argument(format!(
                        "linear coefficients have length {}, algebra dimension is {}",
                        c.len(),
                        theta.coords().len()
                    )));
                }
                Ok(c.clone())
            }
            ProbeObjective::NegQuadratic => Ok(theta.coords() * -2.0),
            ProbeObjective::ExpResidual => Ok(exp_residual_gradient(theta)?.coords().clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzProbeResult {
    pub kind: AlgebraKind,
    pub radius: f64,
    pub sample_pairs: usize,
    /// Largest `‖∇J(θ) − ∇J(θ′)‖ / ‖θ − θ′‖` over the sampled pairs.
    pub l_emp: f64,
    pub l_theory: f64,
}

/// Smoothness constants used for probe comparisons: every reward and
/// feature constant set to one, `γ = 0`, `σ = 1`.
pub fn probe_smoothness(descriptor: &AlgebraDescriptor, radius: f64) -> SmoothnessParams {
    SmoothnessParams {
        r_max: 1.0,
        b_phi: 1.0,
        b_a: 1.0,
        c_d: 1.0,
        gamma: 0.0,
        sigma: 1.0,
        radius,
        n: descriptor.n(),
        compact: descriptor.is_compact(),
    }
}

/// Uniform draw from the coordinate ball of radius `r`.
pub fn uniform_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize, r: f64) -> DVector<f64> {
    let mut v = DVector::from_vec(normal_vec(rng, dim));
    while v.norm() == 0.0 {
        v = DVector::from_vec(normal_vec(rng, dim));
    }
    let u: f64 = rng.random();
    let scale = r * u.powf(1.0 / dim as f64) / v.norm();
    v * scale
}

/// Empirical gradient Lipschitz constant on the radius-`R` ball from `m`
/// independent uniform pairs.
pub fn lipschitz_probe(
    objective: &ProbeObjective,
    descriptor: &Arc<AlgebraDescriptor>,
    radius: f64,
    m: usize,
    seed: u64,
) -> Result<LipschitzProbeResult> {
    if m < 2 {
        return Err(Error::Argument(format!("a probe needs at least 2 pairs (got {m})")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Argument(format!("probe radius must be positive and finite (got {radius})")));
    }
    let mut rng = stream(seed, Stream::Probe);
    let d = descriptor.dim();
    let mut l_emp: f64 = 0.0;
    for _ in 0..m {
        let a = AlgebraElement::from_coords(descriptor, uniform_ball(&mut rng, d, radius))?;
        let b = AlgebraElement::from_coords(descriptor, uniform_ball(&mut rng, d, radius))?;
        let dist = (a.coords() - b.coords()).norm();
        if dist == 0.0 {
            continue;
        }
        let diff = (objective.gradient(&a)? - objective.gradient(&b)?).norm();
        l_emp = l_emp.max(diff / dist);
    }
    let l_theory = theoretical_lipschitz(&probe_smoothness(descriptor, radius))?;
    Ok(LipschitzProbeResult { kind: descriptor.kind(), radius, sample_pairs: m, l_emp, l_theory })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthClass {
    Flat,
    Polynomial,
    Exponential,
}

impl fmt::Display for GrowthClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GrowthClass::Flat => "flat",
            GrowthClass::Polynomial => "polynomial",
            GrowthClass::Exponential => "exponential",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthFit {
    pub class: GrowthClass,
    /// `log L` against `R`; the slope is the exponential rate.
    pub exponential: SlopeFit,
    /// `log L` against `log R`; the slope is the polynomial degree.
    pub polynomial: SlopeFit,
    /// `L(R_max) / L(R_min)`.
    pub flat_ratio: f64,
}

/// Classifies a Lipschitz curve. Flat when `L(R_max)/L(R_min) ≤ 2`;
/// otherwise exponential when the `log L` vs `R` fit has `r² ≥ 0.98` and at
/// most half the residual of the `log L` vs `log R` fit; otherwise
/// polynomial. The flat test runs first because a nearly constant curve is
/// fitted well by any line, including a slowly decaying exponential.
pub fn classify_growth(radii: &[f64], l: &[f64]) -> Result<GrowthFit> {
    if radii.len() != l.len() || radii.len() < 4 {
        return Err(Error::Argument("growth classification needs at least 4 matching radii and constants".into()));
    }
    if radii.windows(2).any(|w| !(w[0] < w[1])) || radii[0] <= 0.0 {
        return Err(Error::Argument("radii must be positive and strictly ascending".into()));
    }
    if l.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Argument("Lipschitz estimates must be positive and finite".into()));
    }
    let exponential = linear_fit(radii.iter().zip(l).map(|(r, v)| (*r, v.ln())).collect())?;
    let polynomial = linear_fit(radii.iter().zip(l).map(|(r, v)| (r.ln(), v.ln())).collect())?;
    let flat_ratio = l[l.len() - 1] / l[0];
    let class = if flat_ratio <= 2.0 {
        GrowthClass::Flat
    } else if exponential.r_squared >= 0.98 && 2.0 * exponential.residual_ss <= polynomial.residual_ss {
        GrowthClass::Exponential
    } else {
        GrowthClass::Polynomial
    };
    Ok(GrowthFit { class, exponential, polynomial, flat_ratio })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DichotomyConfig {
    pub radii: Vec<f64>,
    pub pairs: usize,
    /// Joint count of the compact row.
    pub joints: usize,
    pub seeds: Vec<u64>,
}

impl Default for DichotomyConfig {
    fn default() -> Self {
        Self { radii: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0], pairs: 100, joints: 10, seeds: vec![0, 1, 2] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DichotomyRow {
    pub label: String,
    pub probes: Vec<LipschitzProbeResult>,
    pub fit: GrowthFit,
}

/// Probes `−½‖exp(θ) − I‖²` on `so(3)^J`, `se(3)` and `gl(2)` across radii.
/// `L_emp(R)` is the maximum over all seeds' pairs.
pub fn dichotomy_sweep(cfg: &DichotomyConfig) -> Result<Vec<DichotomyRow>> {
    if cfg.radii.len() < 4 || cfg.radii.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config("radii must be strictly ascending with at least 4 values".into()));
    }
    if cfg.seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let algebras = [
        (format!("so(3)^{}", cfg.joints), make_descriptor(AlgebraKind::So3Product(cfg.joints), 3)?),
        ("se(3)".to_owned(), make_descriptor(AlgebraKind::Se3, 4)?),
        ("gl(2)".to_owned(), make_descriptor(AlgebraKind::GlN, 2)?),
    ];
    let mut rows = Vec::new();
    for (label, descriptor) in algebras {
        let probes = cfg
            .radii
            .par_iter()
            .map(|&r| {
                let per_seed = cfg
                    .seeds
                    .iter()
                    .map(|&s| lipschitz_probe(&ProbeObjective::ExpResidual, &descriptor, r, cfg.pairs, s))
                    .collect::<Result<Vec<_>>>()?;
                let l_emp = per_seed.iter().map(|p| p.l_emp).fold(0.0, f64::max);
                Ok(LipschitzProbeResult { l_emp, sample_pairs: cfg.pairs * cfg.seeds.len(), ..per_seed[0].clone() })
            })
            .collect::<Result<Vec<_>>>()?;
        let l: Vec<f64> = probes.iter().map(|p| p.l_emp).collect();
        let fit = classify_growth(&cfg.radii, &l)?;
        rows.push(DichotomyRow { label, probes, fit });
    }
    Ok(rows)
}

pub fn dichotomy_table(rows: &[DichotomyRow]) -> Table {
    let mut t = Table::new(
        "dichotomy",
        &["algebra", "radius", "pairs", "l_emp", "l_theory", "class", "exp_rate", "exp_r2", "poly_degree", "poly_r2", "flat_ratio"],
    );
    for row in rows {
        for p in &row.probes {
            t.push(vec![
                row.label.as_str().into(),
                p.radius.into(),
                p.sample_pairs.into(),
                p.l_emp.into(),
                p.l_theory.into(),
                row.fit.class.to_string().into(),
                row.fit.exponential.slope.into(),
                row.fit.exponential.r_squared.into(),
                row.fit.polynomial.slope.into(),
                row.fit.polynomial.r_squared.into(),
                row.fit.flat_ratio.into(),
            ]);
        }
    }
    t
}

// ---------------------------------------------------------------- witness

/// Closed-form ray values `g, g′, g″` next to Monte Carlo estimates.
///
/// The estimates run the witness objective on `diag(2)` along `t·E₁₁` with
/// common random numbers across `t ± h`, so the second diagonal entry cancels
/// in the differences. `objective` is the full two-entry closed form
/// `g(t, σ) + g(0, σ)`.
pub fn witness_table(ts: &[f64], sigmas: &[f64], n_mc: usize, seed: u64) -> Result<Table> {
    const H: f64 = 1e-3;
    let descriptor = make_descriptor(AlgebraKind::DiagN, 2)?;
    let at = |t: f64, sigma: f64| -> Result<f64> {
        let theta = AlgebraElement::from_coords(&descriptor, DVector::from_vec(vec![t, 0.0]))?;
        witness_objective(&theta, sigma, n_mc, seed)
    };
    let mut table =
        Table::new("witness", &["t", "sigma", "g", "g1", "g2", "objective", "objective_mc", "g1_mc", "g2_mc", "abs_g2_ge_exp2t"]);
    for &sigma in sigmas {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Argument(format!("sigma must be nonnegative and finite (got {sigma})")));
        }
        for &t in ts {
            let (lo, mid, hi) = (at(t - H, sigma)?, at(t, sigma)?, at(t + H, sigma)?);
            let g2 = witness_g2(t, sigma);
            table.push(vec![
                t.into(),
                sigma.into(),
                witness_g(t, sigma).into(),
                witness_g1(t, sigma).into(),
                g2.into(),
                (witness_g(t, sigma) + witness_g(0.0, sigma)).into(),
                mid.into(),
                ((hi - lo) / (2.0 * H)).into(),
                ((hi - 2.0 * mid + lo) / (H * H)).into(),
                (g2.abs() >= (2.0 * t).exp()).into(),
            ]);
        }
    }
    Ok(table)
}

// ---------------------------------------------------------------- slopes

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeStudyConfig {
    pub joints: usize,
    /// Base step size; the schedule is `η/√T`.
    pub eta: f64,
    pub deterministic_iterations: usize,
    pub burn_in_fraction: f64,
    pub noise_sigma: f64,
    pub horizons: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl Default for SlopeStudyConfig {
    fn default() -> Self {
        Self {
            joints: 10,
            eta: 1.0,
            deterministic_iterations: 1000,
            burn_in_fraction: 0.2,
            noise_sigma: 1.0,
            horizons: vec![100, 200, 400, 800, 1600, 3200, 6400],
            seeds: vec![0, 1, 2, 3, 4],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeStudy {
    /// Running average of the optimality gap of a noiseless run.
    pub deterministic: SlopeFit,
    /// Mean over iterations of `‖∇f‖²` against the horizon `T`, averaged over seeds.
    pub stochastic: SlopeFit,
    pub stochastic_means: Vec<f64>,
}

fn slope_problem(joints: usize, seed: u64) -> Result<(Arc<AlgebraDescriptor>, DVector<f64>)> {
    let descriptor = make_descriptor(AlgebraKind::So3Product(joints), 3)?;
    let mut rng = stream(seed, Stream::Targets);
    let center = DVector::from_vec(normal_vec(&mut rng, descriptor.dim()));
    Ok((descriptor, center))
}

/// Convergence-rate fits for LPG on `f(θ) = −‖θ − θ*‖²` over `so(3)^J`.
pub fn convergence_study(cfg: &SlopeStudyConfig) -> Result<SlopeStudy> {
    if cfg.seeds.is_empty() || cfg.horizons.len() < 5 {
        return Err(Error::Config("the slope study needs seeds and at least 5 horizons".into()));
    }
    let (descriptor, center) = slope_problem(cfg.joints, cfg.seeds[0])?;
    let d = descriptor.dim();
    let oracle = Quadratic::isotropic(center);
    let trace = oracle_run(
        &oracle,
        &descriptor,
        DVector::zeros(d),
        cfg.eta,
        Schedule::ConstantOverSqrtT,
        cfg.deterministic_iterations,
        f64::INFINITY,
        cfg.seeds[0],
    )?;
    // The optimum is 0, so the gap is −f.
    let gaps: Vec<f64> = trace.values.iter().map(|v| -v).collect();
    let deterministic = convergence_slope(&running_average(&gaps), cfg.burn_in_fraction)?;

    let per_horizon = cfg
        .horizons
        .par_iter()
        .map(|&horizon| {
            let runs = cfg
                .seeds
                .iter()
                .map(|&seed| {
                    let (descriptor, center) = slope_problem(cfg.joints, seed)?;
                    let oracle = Quadratic { center, curvature: None, noise_sigma: cfg.noise_sigma };
                    let trace = oracle_run(
                        &oracle,
                        &descriptor,
                        DVector::zeros(d),
                        cfg.eta,
                        Schedule::ConstantOverSqrtT,
                        horizon,
                        f64::INFINITY,
                        seed,
                    )?;
                    Ok(mean(&trace.grad_norms_sq))
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(mean(&runs))
        })
        .collect::<Result<Vec<f64>>>()?;
    let xs: Vec<f64> = cfg.horizons.iter().map(|&h| h as f64).collect();
    let stochastic = fit_loglog(&xs, &per_horizon)?;
    Ok(SlopeStudy { deterministic, stochastic, stochastic_means: per_horizon })
}

/// Per-iteration slack of the ascent inequality
/// `f(θ_{t+1}) ≥ f(θ_t) + (η_t/2)‖∇f(θ_t)‖²` for a noiseless oracle run.
pub fn progress_slacks(values: &[f64], final_value: f64, grad_norms_sq: &[f64], step_sizes: &[f64]) -> Vec<f64> {
    (0..values.len())
        .map(|t| {
            let next = if t + 1 < values.len() { values[t + 1] } else { final_value };
            next - values[t] - 0.5 * step_sizes[t] * grad_norms_sq[t]
        })
        .collect()
}

// ---------------------------------------------------------------- timing

#[derive(Debug, Clone, PartialEq)]
pub struct TimingConfig {
    pub joints: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self { joints: vec![10, 30, 50, 100, 200], trials: 50, seed: 0 }
    }
}

/// Timed trials discarded before measuring.
pub const WARMUP_TRIALS: usize = 10;
/// Each trial repeats the operation until at least this long has elapsed.
const MIN_TRIAL_MICROS: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub joints: usize,
    pub dim: usize,
    pub factor_median_us: f64,
    pub factor_mean_us: f64,
    pub project_median_us: f64,
    pub project_mean_us: f64,
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingStudy {
    pub rows: Vec<TimingRow>,
    /// Fitted exponent of the factorization median against `J`.
    pub factor_exponent: f64,
    pub project_exponent: f64,
    pub speedup_monotone: bool,
}

/// Median and mean microseconds per call of `op` over `trials` trials.
fn time_op(mut op: impl FnMut(), trials: usize) -> (f64, f64) {
    let mut reps = 1usize;
    loop {
        let start = Instant::now();
        for _ in 0..reps {
            op();
        }
        if start.elapsed().as_secs_f64() * 1e6 >= MIN_TRIAL_MICROS || reps >= 1 << 24 {
            break;
        }
        reps *= 2;
    }
    let mut samples = Vec::with_capacity(trials);
    for i in 0..WARMUP_TRIALS + trials {
        let start = Instant::now();
        for _ in 0..reps {
            op();
        }
        let per_call = start.elapsed().as_secs_f64() * 1e6 / reps as f64;
        if i >= WARMUP_TRIALS {
            samples.push(per_call);
        }
    }
    let m = mean(&samples);
    (median(&mut samples), m)
}

/// Times a Cholesky factor-and-solve on a random SPD `3J × 3J` matrix
/// against blockwise skew-symmetrization of `J` blocks. Single-threaded.
pub fn timing_bench(cfg: &TimingConfig) -> Result<TimingStudy> {
    if cfg.trials < 50 {
        return Err(Error::Config(format!("timing needs at least 50 trials (got {})", cfg.trials)));
    }
    if cfg.joints.len() < 2 || cfg.joints.contains(&0) {
        return Err(Error::Config("timing needs at least two positive joint counts".into()));
    }
    let mut rng = stream(cfg.seed, Stream::Matrix);
    let mut rows = Vec::new();
    for &j in &cfg.joints {
        let d = 3 * j;
        let a = DMatrix::from_fn(d, d, |_, _| normal(&mut rng));
        let f = &a * a.transpose() + DMatrix::<f64>::identity(d, d) * d as f64;
        let g = DVector::from_vec(normal_vec(&mut rng, d));
        let (factor_median_us, factor_mean_us) = time_op(
            || {
                let chol = black_box(&f).clone().cholesky().expect("SPD by construction");
                black_box(chol.solve(black_box(&g)));
            },
            cfg.trials,
        );
        let blocks: Vec<f64> = (0..9 * j).map(|_| normal(&mut rng)).collect();
        let mut out = vec![0.0; 9 * j];
        let (project_median_us, project_mean_us) = time_op(
            || {
                skew_symmetrize_blocks(black_box(&blocks), black_box(&mut out));
            },
            cfg.trials,
        );
        rows.push(TimingRow {
            joints: j,
            dim: d,
            factor_median_us,
            factor_mean_us,
            project_median_us,
            project_mean_us,
            speedup: factor_median_us / project_median_us,
        });
    }
    let js: Vec<f64> = rows.iter().map(|r| r.joints as f64).collect();
    let fit = |ys: Vec<f64>| linear_fit(js.iter().zip(&ys).map(|(x, y)| (x.ln(), y.ln())).collect());
    let factor_exponent = fit(rows.iter().map(|r| r.factor_median_us).collect())?.slope;
    let project_exponent = fit(rows.iter().map(|r| r.project_median_us).collect())?.slope;
    let speedup_monotone = rows.windows(2).all(|w| w[1].speedup >= w[0].speedup);
    Ok(TimingStudy { rows, factor_exponent, project_exponent, speedup_monotone })
}

pub fn timing_table(study: &TimingStudy) -> Table {
    let mut t = Table::new(
        "timing",
        &[
            "joints",
            "dim",
            "factor_median_us",
            "factor_mean_us",
            "project_median_us",
            "project_mean_us",
            "speedup",
            "factor_exponent",
            "project_exponent",
        ],
    );
    for r in &study.rows {
        t.push(vec![
            r.joints.into(),
            r.dim.into(),
            r.factor_median_us.into(),
            r.factor_mean_us.into(),
            r.project_median_us.into(),
            r.project_mean_us.into(),
            r.speedup.into(),
            study.factor_exponent.into(),
            study.project_exponent.into(),
        ]);
    }
    t
}

// ---------------------------------------------------------------- training studies

/// Settings shared by the `SO(3)^J` training studies.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub joints: usize,
    pub sigma: f64,
    pub eta: f64,
    pub schedule: Schedule,
    pub iterations: usize,
    pub episodes_per_iter: usize,
    pub gamma: f64,
    pub b_theta: f64,
    pub horizon: usize,
    /// Weight-space size of the ambient baseline as a multiple of `d`.
    pub ambient_factor: usize,
    pub seeds: Vec<u64>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            joints: 10,
            sigma: 0.1,
            eta: 0.25,
            schedule: Schedule::ConstantOverSqrtT,
            iterations: 40,
            episodes_per_iter: 8,
            gamma: 0.99,
            b_theta: 10.0,
            horizon: DEFAULT_HORIZON,
            ambient_factor: 3,
            seeds: vec![0, 1, 2, 3, 4],
        }
    }
}

impl StudyConfig {
    /// Settings for the 200-iteration method comparison.
    pub fn comparison() -> Self {
        Self { iterations: 200, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.joints == 0 {
            bad.push("joints must be positive".to_owned());
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            bad.push(format!("sigma must be positive and finite (got {})", self.sigma));
        }
        if self.horizon == 0 {
            bad.push("horizon must be positive".to_owned());
        }
        if self.ambient_factor == 0 {
            bad.push("ambient_factor must be positive".to_owned());
        }
        if self.seeds.is_empty() {
            bad.push("seeds must be nonempty".to_owned());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            bad.push("seeds must be distinct".to_owned());
        }
        if let Err(Error::Config(msg)) = self.optimizer(Method::Lpg, 0, false).validate() {
            bad.push(msg);
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }

    pub fn optimizer(&self, method: Method, seed: u64, log_fisher: bool) -> OptimizerConfig {
        OptimizerConfig {
            method,
            eta: self.eta,
            schedule: self.schedule,
            b_theta: self.b_theta,
            iterations: self.iterations,
            episodes_per_iter: self.episodes_per_iter,
            gamma: self.gamma,
            seed,
            log_fisher,
        }
    }

    /// Final return is averaged over the last `max(1, T/20)` iterations.
    pub fn tail_window(&self) -> usize {
        (self.iterations / 20).max(1)
    }

    fn env(&self, seed: u64, perturbation: PerturbationConfig) -> Result<So3JointsEnv> {
        Ok(So3JointsEnv::new(self.joints, seed, perturbation)?.with_horizon(self.horizon))
    }
}

/// Per-run aggregates of a training record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub final_return: f64,
    pub kappa: f64,
    pub epsilon_f: f64,
    pub alignment: f64,
    /// Smallest `alignment − 2√κ̂/(κ̂+1)` over logged iterations.
    pub min_slack: f64,
    pub precondition_us: f64,
    pub max_theta_norm: f64,
    pub projection_rate: f64,
    pub aborted: bool,
}

pub fn summarize_run(record: &RunRecord, tail: usize) -> Result<RunSummary> {
    let rows = &record.rows;
    let n = rows.len();
    let tail_rows = &rows[n.saturating_sub(tail.max(1))..];
    let final_return = mean(&tail_rows.iter().map(|r| r.mean_return).collect::<Vec<_>>());
    let mut kappas = Vec::new();
    let mut eps = Vec::new();
    let mut aligns = Vec::new();
    let mut min_slack = f64::INFINITY;
    for r in rows {
        if let Some(k) = r.kappa {
            kappas.push(k);
        }
        if let Some(e) = r.epsilon_f {
            eps.push(e);
        }
        if let (Some(a), Some(k)) = (r.alignment, r.kappa) {
            aligns.push(a);
            min_slack = min_slack.min(a - kantorovich_bound(k)?);
        }
    }
    Ok(RunSummary {
        final_return,
        kappa: mean(&kappas),
        epsilon_f: mean(&eps),
        alignment: mean(&aligns),
        min_slack,
        precondition_us: record.mean_micros().precondition,
        max_theta_norm: record.max_theta_norm(),
        projection_rate: record.projection_rate(),
        aborted: record.aborted.is_some(),
    })
}

fn run_lie(
    cfg: &StudyConfig,
    seed: u64,
    method: Method,
    perturbation: PerturbationConfig,
    anisotropy: AnisotropyMode,
    log_fisher: bool,
) -> Result<RunRecord> {
    let mut env = cfg.env(seed, perturbation)?;
    let policy = GaussianLiePolicy::new(env.descriptor(), cfg.sigma)?.with_anisotropy(anisotropy)?;
    Ok(train(&mut env, policy, &cfg.optimizer(method, seed, log_fisher))?.1)
}

fn run_method(cfg: &StudyConfig, seed: u64, method: Method) -> Result<RunRecord> {
    if method == Method::AmbientPg {
        let mut env = cfg.env(seed, PerturbationConfig::default())?;
        let policy = AmbientPolicy::new(env.descriptor(), cfg.ambient_factor, cfg.sigma, seed)?;
        return Ok(train(&mut env, policy, &cfg.optimizer(method, seed, false))?.1);
    }
    run_lie(cfg, seed, method, PerturbationConfig::default(), AnisotropyMode::Uniform, false)
}

/// Seed-averaged summary of one study condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionSummary {
    pub label: String,
    pub runs: Vec<RunSummary>,
    pub kappa: f64,
    pub epsilon_f: f64,
    pub alignment: f64,
    pub min_slack: f64,
    pub final_return: f64,
    pub final_return_std: f64,
    pub precondition_us: f64,
}

impl ConditionSummary {
    fn from_runs(label: String, runs: Vec<RunSummary>) -> Self {
        let pick = |f: fn(&RunSummary) -> f64| runs.iter().map(f).collect::<Vec<_>>();
        let finals = pick(|r| r.final_return);
        Self {
            label,
            kappa: mean(&pick(|r| r.kappa)),
            epsilon_f: mean(&pick(|r| r.epsilon_f)),
            alignment: mean(&pick(|r| r.alignment)),
            min_slack: pick(|r| r.min_slack).into_iter().fold(f64::INFINITY, f64::min),
            final_return: mean(&finals),
            final_return_std: sample_std(&finals),
            precondition_us: mean(&pick(|r| r.precondition_us)),
            runs,
        }
    }
}

pub fn condition_table(name: &str, key: &str, rows: &[ConditionSummary]) -> Table {
    let mut t = Table::new(
        name,
        &[
            key,
            "kappa_hat",
            "epsilon_f",
            "alignment",
            "kantorovich_bound",
            "min_slack",
            "final_return",
            "final_return_std",
            "precondition_us",
        ],
    );
    for r in rows {
        let bound = if r.kappa >= 1.0 { kantorovich_bound(r.kappa).unwrap_or(f64::NAN) } else { f64::NAN };
        t.push(vec![
            r.label.as_str().into(),
            r.kappa.into(),
            r.epsilon_f.into(),
            r.alignment.into(),
            bound.into(),
            r.min_slack.into(),
            r.final_return.into(),
            r.final_return_std.into(),
            r.precondition_us.into(),
        ]);
    }
    t
}

pub fn anisotropy_label(mode: AnisotropyMode) -> String {
    match mode {
        AnisotropyMode::Uniform => "UNIFORM".to_owned(),
        AnisotropyMode::AxisBiased => "AXIS_BIASED".to_owned(),
        AnisotropyMode::Correlated(k) => format!("CORRELATED({k})"),
    }
}

/// Conditions of the anisotropy ablation.
pub fn default_anisotropy_conditions() -> Vec<AnisotropyMode> {
    vec![AnisotropyMode::Uniform, AnisotropyMode::AxisBiased, AnisotropyMode::Correlated(5.0), AnisotropyMode::Correlated(10.0)]
}

/// LPG with the Fisher logged at every iteration, per exploration condition.
pub fn anisotropy_ablation(cfg: &StudyConfig, conditions: &[AnisotropyMode]) -> Result<Vec<ConditionSummary>> {
    cfg.validate()?;
    conditions
        .iter()
        .map(|&mode| {
            mode.scales(3 * cfg.joints)?;
            let runs = cfg
                .seeds
                .par_iter()
                .map(|&seed| summarize_run(&run_lie(cfg, seed, Method::Lpg, PerturbationConfig::default(), mode, true)?, cfg.tail_window()))
                .collect::<Result<Vec<_>>>()?;
            Ok(ConditionSummary::from_runs(anisotropy_label(mode), runs))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessCondition {
    pub label: String,
    pub perturbation: PerturbationConfig,
}

/// Baseline, three transition-noise levels, observation noise and reward noise.
pub fn default_robustness_conditions() -> Vec<RobustnessCondition> {
    let base = PerturbationConfig::default();
    let mut out = vec![RobustnessCondition { label: "BASELINE".into(), perturbation: base }];
    for s in [0.01, 0.05, 0.1] {
        out.push(RobustnessCondition {
            label: format!("TRANSITION({s})"),
            perturbation: PerturbationConfig { transition_noise_sigma: s, ..base },
        });
    }
    out.push(RobustnessCondition {
        label: "OBSERVATION(0.05)".into(),
        perturbation: PerturbationConfig { observation_noise_sigma: 0.05, ..base },
    });
    out.push(RobustnessCondition { label: "REWARD(0.1)".into(), perturbation: PerturbationConfig { reward_noise_sigma: 0.1, ..base } });
    out
}

/// LPG with the Fisher logged, per perturbation.
pub fn robustness_sweep(cfg: &StudyConfig, conditions: &[RobustnessCondition]) -> Result<Vec<ConditionSummary>> {
    cfg.validate()?;
    conditions
        .iter()
        .map(|c| {
            c.perturbation.validate()?;
            let runs = cfg
                .seeds
                .par_iter()
                .map(|&seed| {
                    summarize_run(&run_lie(cfg, seed, Method::Lpg, c.perturbation, AnisotropyMode::Uniform, true)?, cfg.tail_window())
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ConditionSummary::from_runs(c.label.clone(), runs))
        })
        .collect()
}

/// LPG with the Fisher logged, per joint count.
pub fn joints_sweep(cfg: &StudyConfig, joints: &[usize]) -> Result<Vec<ConditionSummary>> {
    cfg.validate()?;
    joints
        .iter()
        .map(|&j| {
            let c = StudyConfig { joints: j, ..cfg.clone() };
            c.validate()?;
            let runs = c
                .seeds
                .par_iter()
                .map(|&seed| {
                    summarize_run(
                        &run_lie(&c, seed, Method::Lpg, PerturbationConfig::default(), AnisotropyMode::Uniform, true)?,
                        c.tail_window(),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ConditionSummary::from_runs(j.to_string(), runs))
        })
        .collect()
}

/// Methods of the comparison study.
pub fn default_methods() -> Vec<Method> {
    vec![Method::Lpg, Method::AmbientPg, Method::NatGradChol]
}

/// Paired comparison: every method sees the same environment targets and the
/// same exploration stream for a given seed.
pub fn method_comparison(cfg: &StudyConfig, methods: &[Method]) -> Result<Vec<ConditionSummary>> {
    cfg.validate()?;
    methods
        .iter()
        .map(|&method| {
            let runs = cfg
                .seeds
                .par_iter()
                .map(|&seed| summarize_run(&run_method(cfg, seed, method)?, cfg.tail_window()))
                .collect::<Result<Vec<_>>>()?;
            Ok(ConditionSummary::from_runs(method.to_string(), runs))
        })
        .collect()
}

/// Per-seed long-format rows of a set of condition summaries.
pub fn per_seed_table(name: &str, key: &str, seeds: &[u64], rows: &[ConditionSummary]) -> Table {
    let mut t = Table::new(
        name,
        &[
            key,
            "seed",
            "final_return",
            "kappa_hat",
            "epsilon_f",
            "alignment",
            "min_slack",
            "precondition_us",
            "max_theta_norm",
            "projection_rate",
            "aborted",
        ],
    );
    for r in rows {
        for (seed, run) in seeds.iter().zip(&r.runs) {
            t.push(vec![
                r.label.as_str().into(),
                (*seed).into(),
                run.final_return.into(),
                run.kappa.into(),
                run.epsilon_f.into(),
                run.alignment.into(),
                run.min_slack.into(),
                run.precondition_us.into(),
                run.max_theta_norm.into(),
                run.projection_rate.into(),
                run.aborted.into(),
            ]);
        }
    }
    t
}

// ---------------------------------------------------------------- SE(3)

#[derive(Debug, Clone, PartialEq)]
pub struct Se3StudyConfig {
    pub b_values: Vec<f64>,
    pub iterations: usize,
    pub eta: f64,
    pub schedule: Schedule,
    pub sigma: f64,
    pub episodes_per_iter: usize,
    pub gamma: f64,
    pub control_period: f64,
    pub seeds: Vec<u64>,
}

impl Default for Se3StudyConfig {
    fn default() -> Self {
        Self {
            b_values: vec![f64::INFINITY, 2.0],
            iterations: 200,
            eta: 0.25,
            schedule: Schedule::Constant,
            sigma: 0.1,
            episodes_per_iter: 8,
            gamma: 0.99,
            control_period: crate::envs::SE3_CONTROL_PERIOD,
            seeds: vec![0, 1, 2, 3, 4],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Se3Run {
    pub b_theta: f64,
    pub seed: u64,
    pub max_theta_norm: f64,
    pub final_theta_norm: f64,
    pub final_return: f64,
    /// `(max ‖θ‖ / 1)²`.
    pub l_growth: f64,
    pub aborted: bool,
    /// `‖θ_t‖` per iteration.
    pub norms: Vec<f64>,
}

/// LPG on `SE(3)` with and without radius projection.
pub fn se3_divergence_study(cfg: &Se3StudyConfig) -> Result<Vec<Se3Run>> {
    if cfg.seeds.is_empty() || cfg.b_values.is_empty() {
        return Err(Error::Config("the SE(3) study needs seeds and radius values".into()));
    }
    let jobs: Vec<(f64, u64)> = cfg.b_values.iter().flat_map(|&b| cfg.seeds.iter().map(move |&s| (b, s))).collect();
    jobs.par_iter()
        .map(|&(b, seed)| {
            let mut env = Se3Env::new(seed, PerturbationConfig::default())?.with_control_period(cfg.control_period)?;
            let policy = GaussianLiePolicy::new(env.descriptor(), cfg.sigma)?;
            let opt = OptimizerConfig {
                method: Method::Lpg,
                eta: cfg.eta,
                schedule: cfg.schedule,
                b_theta: b,
                iterations: cfg.iterations,
                episodes_per_iter: cfg.episodes_per_iter,
                gamma: cfg.gamma,
                seed,
                log_fisher: false,
            };
            let record = train(&mut env, policy, &opt)?.1;
            let max = record.max_theta_norm();
            let tail = (cfg.iterations / 20).max(1);
            let n = record.rows.len();
            Ok(Se3Run {
                b_theta: b,
                seed,
                max_theta_norm: max,
                final_theta_norm: record.rows.last().map_or(0.0, |r| r.theta_norm),
                final_return: mean(&record.rows[n.saturating_sub(tail)..].iter().map(|r| r.mean_return).collect::<Vec<_>>()),
                l_growth: max * max,
                aborted: record.aborted.is_some(),
                norms: record.rows.iter().map(|r| r.theta_norm).collect(),
            })
        })
        .collect()
}

pub fn se3_table(runs: &[Se3Run]) -> Table {
    let mut t = Table::new(
        "se3",
        &["b_theta", "seed", "max_theta_norm", "final_theta_norm", "final_return", "l_growth", "reached_10", "bound_respected", "aborted"],
    );
    for r in runs {
        t.push(vec![
            r.b_theta.into(),
            r.seed.into(),
            r.max_theta_norm.into(),
            r.final_theta_norm.into(),
            r.final_return.into(),
            r.l_growth.into(),
            (r.max_theta_norm >= 10.0).into(),
            (r.max_theta_norm <= r.b_theta).into(),
            r.aborted.into(),
        ]);
    }
    t
}

/// Norm trajectories in long format.
pub fn se3_trajectory_table(runs: &[Se3Run]) -> Table {
    let mut t = Table::new("se3_trajectory", &["b_theta", "seed", "iteration", "theta_norm"]);
    for r in runs {
        for (i, v) in r.norms.iter().enumerate() {
            t.push(vec![r.b_theta.into(), r.seed.into(), i.into(), (*v).into()]);
        }
    }
    t
}

// ---------------------------------------------------------------- validation

/// Outcome of one invariant check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.to_owned(), passed, detail }
    }
}

fn random_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| scale * normal(rng))
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

fn check_projectors(seed: u64) -> Result<Check> {
    let kinds = [
        (AlgebraKind::SoN, 4),
        (AlgebraKind::SlN, 3),
        (AlgebraKind::Se3, 4),
        (AlgebraKind::GlN, 3),
        (AlgebraKind::DiagN, 3),
        (AlgebraKind::So3Product(3), 3),
    ];
    let mut rng = stream(seed, Stream::Custom(11));
    let mut worst: f64 = 0.0;
    for (kind, n) in kinds {
        let d = make_descriptor(kind, n)?;
        let size = d.n();
        for _ in 0..20 {
            let (a, b) = (random_matrix(&mut rng, size, 1.0), random_matrix(&mut rng, size, 1.0));
            let (pa, pb) = (d.project(&a)?, d.project(&b)?);
            let c = normal(&mut rng);
            worst = worst.max((d.project(&(&a * c + &b))? - (&pa * c + &pb)).norm());
            worst = worst.max((d.project(&pa)? - &pa).norm());
            worst = worst.max((inner(&pa, &b) - inner(&a, &pb)).abs());
            worst = worst.max((pa.norm() - a.norm()).max(0.0));
            worst = worst.max((d.project_by_basis(&a)? - &pa).norm());
        }
    }
    Ok(Check::new("projector properties", worst <= 1e-10, format!("max violation {worst:.3e}")))
}

fn check_frechet(seed: u64) -> Result<Check> {
    let mut rng = stream(seed, Stream::Custom(12));
    let (mut worst_fd, mut worst_adj): (f64, f64) = (0.0, 0.0);
    for _ in 0..10 {
        let a = random_matrix(&mut rng, 4, 1.0);
        let a = &a * (rng.random::<f64>() * 3.0 / a.norm());
        let h = random_matrix(&mut rng, 4, 1.0);
        let w = random_matrix(&mut rng, 4, 1.0);
        let (_, da) = mat_exp_frechet(&a, &h)?;
        let eps = 1e-5;
        let fd = (mat_exp(&(&a + &h * eps))? - mat_exp(&(&a - &h * eps))?) / (2.0 * eps);
        worst_fd = worst_fd.max((&fd - &da).norm() / da.norm());
        let adj = frechet_adjoint(&a, &w)?;
        worst_adj = worst_adj.max((inner(&da, &w) - inner(&h, &adj)).abs());
    }
    Ok(Check::new(
        "Frechet derivative and adjoint",
        worst_fd <= 1e-6 && worst_adj <= 1e-8,
        format!("finite-difference relative error {worst_fd:.3e}, adjoint error {worst_adj:.3e}"),
    ))
}

fn check_witness() -> Result<Check> {
    let d = make_descriptor(AlgebraKind::DiagN, 2)?;
    let f = |t: f64| -> Result<f64> { witness_objective(&AlgebraElement::from_coords(&d, DVector::from_vec(vec![t, 0.0]))?, 0.0, 0, 0) };
    let h = 1e-3;
    let mut worst: f64 = 0.0;
    for t in [0.0, 1.0, 2.0] {
        let second = (f(t + h)? - 2.0 * f(t)? + f(t - h)?) / (h * h);
        worst = worst.max(((second - witness_g2(t, 0.0)) / witness_g2(t, 0.0)).abs());
    }
    let bound_ok = [0.0, 0.5, 1.0, 2.0].iter().all(|&r| [0.0, 0.1].iter().all(|&s| witness_g2(r, s).abs() >= (2.0 * r).exp()));
    Ok(Check::new(
        "witness curvature",
        worst <= 1e-3 && bound_ok,
        format!("second-difference relative error {worst:.3e}, |g''| ≥ e^(2R): {bound_ok}"),
    ))
}

fn check_kantorovich(seed: u64) -> Result<Check> {
    let mut rng = stream(seed, Stream::Custom(13));
    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        let d = rng.random_range(2..8);
        let a = random_matrix(&mut rng, d, 1.0);
        let f = &a * a.transpose() + DMatrix::<f64>::identity(d, d) * 0.05;
        let g = DVector::from_vec(normal_vec(&mut rng, d));
        let ev = f.clone().symmetric_eigen().eigenvalues;
        let kappa = ev.max() / ev.min();
        worst = worst.min(alignment(&g, &f)? - kantorovich_bound(kappa)?);
    }
    let (m, big) = (1.0f64, 9.0f64);
    let f = DMatrix::from_diagonal(&DVector::from_vec(vec![m, big]));
    let g = DVector::from_vec(vec![m.sqrt(), big.sqrt()]) / 2f64.sqrt();
    let tight = (alignment(&g, &f)? - kantorovich_bound(big / m)?).abs();
    Ok(Check::new("Kantorovich bound", worst >= -1e-10 && tight <= 1e-10, format!("min slack {worst:.3e}, tight-case gap {tight:.3e}")))
}

fn check_fisher_isotropy(seed: u64) -> Result<Check> {
    let d = make_descriptor(AlgebraKind::So3Product(3), 3)?;
    let policy = GaussianLiePolicy::new(&d, 0.1)?.with_clip(f64::INFINITY)?;
    let state = crate::envs::EnvState { group_elements: Vec::new(), step_index: 0 };
    let mut rng = stream(seed, Stream::Custom(14));
    let scores: Vec<_> = (0..20_000)
        .map(|_| {
            use crate::policy::Policy;
            let a = policy.sample_action(&state, &mut rng);
            Ok(policy.score(&state, &a))
        })
        .collect::<Result<_>>()?;
    let f = fisher_from_scores(&scores)?.matrix;
    let target = DMatrix::<f64>::identity(9, 9) * 100.0;
    let rel = (&f - &target).norm() / target.norm();
    let block = crate::estimation::block_structure_check(&f, 3)?;
    Ok(Check::new("isotropic Fisher", rel <= 0.05 && block <= 0.05, format!("relative error {rel:.3e}, off-block ratio {block:.3e}")))
}

fn check_sl_ceiling() -> Result<Check> {
    let mut worst: f64 = 0.0;
    for n in [2, 3, 5] {
        let d = make_descriptor(AlgebraKind::SlN, n)?;
        let w = crate::algebra::hyperbolic_witness(&d)?;
        let lam = w.ambient().clone().symmetric_eigen().eigenvalues.max();
        worst = worst.max((lam - sl_spectral_ceiling(n)).abs()).max((w.norm() - 1.0).abs());
    }
    Ok(Check::new("sl(n) spectral ceiling", worst <= 1e-10, format!("max error {worst:.3e}")))
}

fn check_progress(seed: u64) -> Result<Check> {
    let d = make_descriptor(AlgebraKind::So3Product(10), 3)?;
    let mut rng = stream(seed, Stream::Custom(15));
    let q = random_matrix(&mut rng, 30, 1.0).qr().q();
    let lam = DVector::from_fn(30, |i, _| 0.1 + 0.9 * i as f64 / 29.0);
    let oracle = Quadratic {
        center: DVector::from_vec(normal_vec(&mut rng, 30)),
        curvature: Some(&q * DMatrix::from_diagonal(&lam) * q.transpose()),
        noise_sigma: 0.0,
    };
    let eta = 1.0 / (2.0 * oracle.lipschitz());
    let trace = oracle_run(&oracle, &d, DVector::zeros(30), eta, Schedule::Constant, 200, f64::INFINITY, seed)?;
    let worst = progress_slacks(&trace.values, trace.final_value, &trace.grad_norms_sq, &trace.step_sizes)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(Check::new("progress inequality", worst >= -1e-12, format!("min slack {worst:.3e}")))
}

/// Fast invariant checks across all modules.
pub fn validation_suite(seed: u64) -> Vec<Check> {
    let runs: Vec<(&str, Result<Check>)> = vec![
        ("projector properties", check_projectors(seed)),
        ("Frechet derivative and adjoint", check_frechet(seed)),
        ("witness curvature", check_witness()),
        ("Kantorovich bound", check_kantorovich(seed)),
        ("isotropic Fisher", check_fisher_isotropy(seed)),
        ("sl(n) spectral ceiling", check_sl_ceiling()),
        ("progress inequality", check_progress(seed)),
    ];
    runs.into_iter().map(|(name, r)| r.unwrap_or_else(|e| Check::new(name, false, format!("error: {e}")))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_laws() {
        let inv: Vec<f64> = (1..=200).map(|t| 1.0 / t as f64).collect();
        assert!((convergence_slope(&inv, 0.0).unwrap().slope + 1.0).abs() < 1e-6);
        let inv_sqrt: Vec<f64> = (1..=200).map(|t| 1.0 / (t as f64).sqrt()).collect();
        assert!((convergence_slope(&inv_sqrt, 0.2).unwrap().slope + 0.5).abs() < 1e-6);
    }

    #[test]
    fn slope_drops_nonpositive_points() {
        let mut xs: Vec<f64> = (1..=100).map(|t| 1.0 / t as f64).collect();
        xs[60] = 0.0;
        xs[70] = -1.0;
        let fit = convergence_slope(&xs, 0.0).unwrap();
        assert_eq!(fit.dropped, 2);
        assert!((fit.slope + 1.0).abs() < 1e-9);
        assert!(convergence_slope(&xs[..40], 0.0).is_err());
    }

    #[test]
    fn linear_fit_recovers_a_line() {
        let fit = linear_fit((0..10).map(|i| (i as f64, 3.0 - 2.0 * i as f64)).collect()).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-12 && (fit.intercept - 3.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_probe_is_zero_and_quadratic_probe_is_two() {
        let d = make_descriptor(AlgebraKind::GlN, 3).unwrap();
        let c = DVector::from_fn(9, |i, _| i as f64);
        assert_eq!(lipschitz_probe(&ProbeObjective::Linear(c), &d, 2.0, 20, 0).unwrap().l_emp, 0.0);
        for r in [0.1, 1.0, 7.0] {
            let p = lipschitz_probe(&ProbeObjective::NegQuadratic, &d, r, 20, 1).unwrap();
            assert!((p.l_emp - 2.0).abs() < 1e-10, "R = {r}: {}", p.l_emp);
        }
        assert!(lipschitz_probe(&ProbeObjective::NegQuadratic, &d, 1.0, 1, 0).is_err());
    }

    #[test]
    fn uniform_ball_radius_distribution() {
        // P(‖x‖ ≤ R/2) = 2^{-d} for a uniform ball.
        let mut rng = stream(3, Stream::Custom(0));
        let d = 3;
        let n = 40_000;
        let inside = (0..n).filter(|_| uniform_ball(&mut rng, d, 2.0).norm() <= 1.0).count() as f64 / n as f64;
        let p = 0.125;
        assert!((inside - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt(), "{inside}");
        assert!((0..100).all(|_| uniform_ball(&mut rng, d, 2.0).norm() <= 2.0));
    }

    #[test]
    fn witness_probe_stays_below_theory() {
        let d = make_descriptor(AlgebraKind::GlN, 2).unwrap();
        for r in [0.5, 1.5, 2.5] {
            let p = lipschitz_probe(&ProbeObjective::ExpResidual, &d, r, 30, 4).unwrap();
            assert!(p.l_emp > 0.0 && p.l_emp <= p.l_theory, "R = {r}: {} vs {}", p.l_emp, p.l_theory);
        }
    }

    #[test]
    fn classification_rule() {
        let radii = [0.5, 1.0, 1.5, 2.0, 2.5];
        let exp: Vec<f64> = radii.iter().map(|r: &f64| (2.0 * r).exp()).collect();
        let fit = classify_growth(&radii, &exp).unwrap();
        assert_eq!(fit.class, GrowthClass::Exponential);
        assert!((fit.exponential.slope - 2.0).abs() < 1e-12);
        let flat = [1.0, 1.2, 1.1, 1.3, 1.25];
        assert_eq!(classify_growth(&radii, &flat).unwrap().class, GrowthClass::Flat);
        // A slow, perfectly exponential decay is still flat.
        let decay: Vec<f64> = radii.iter().map(|r| (-0.01 * r).exp()).collect();
        assert_eq!(classify_growth(&radii, &decay).unwrap().class, GrowthClass::Flat);
        let poly: Vec<f64> = radii.iter().map(|r| r * r).collect();
        assert_eq!(classify_growth(&radii, &poly).unwrap().class, GrowthClass::Polynomial);
        assert!(classify_growth(&radii[..3], &poly[..3]).is_err());
        assert!(classify_growth(&[1.0, 0.5, 2.0, 3.0], &[1.0; 4]).is_err());
    }

    #[test]
    fn witness_table_matches_closed_forms() {
        let t = witness_table(&[0.0, 1.0], &[0.0, 0.1], 4000, 7).unwrap();
        assert_eq!(t.rows.len(), 4);
        let g2 = t.floats("g2");
        let g2_mc = t.floats("g2_mc");
        let g1 = t.floats("g1");
        let g1_mc = t.floats("g1_mc");
        // σ = 0 rows are exact up to the difference step.
        assert_eq!(g2[0], -1.0);
        for i in 0..2 {
            assert!(((g2_mc[i] - g2[i]) / g2[i]).abs() < 1e-4);
            assert!(((g1_mc[i] - g1[i]) / g1[i].abs().max(1.0)).abs() < 1e-5);
        }
        // σ = 0.1: Monte Carlo of a lognormal mean; a loose relative tolerance.
        for i in 2..4 {
            assert!(((g2_mc[i] - g2[i]) / g2[i]).abs() < 0.05, "{} vs {}", g2_mc[i], g2[i]);
        }
    }

    #[test]
    fn progress_slack_is_zero_on_an_exact_identity() {
        // f(θ) = −θ², one step from θ = 1 with η = 1/4: θ' = 0.5.
        let slacks = progress_slacks(&[-1.0], -0.25, &[4.0], &[0.25]);
        assert!((slacks[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn table_rejects_wrong_width_and_reads_columns() {
        let mut t = Table::new("x", &["a", "b"]);
        t.push(vec![1usize.into(), 2.5.into()]);
        assert_eq!(t.floats("b"), vec![2.5]);
        assert!(std::panic::catch_unwind(move || t.push(vec![1usize.into()])).is_err());
        assert_eq!(Value::Float(0.1).to_string().parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn study_config_lists_every_problem() {
        let cfg = StudyConfig { joints: 0, sigma: -1.0, seeds: vec![1, 1], eta: -1.0, ..StudyConfig::default() };
        let msg = cfg.validate().unwrap_err().to_string();
        for needle in ["joints", "sigma", "distinct", "eta"] {
            assert!(msg.contains(needle), "{msg}");
        }
    }

    #[test]
    fn summaries_are_deterministic_and_respect_the_bound() {
        let cfg = StudyConfig { joints: 3, iterations: 6, seeds: vec![0, 1], ..StudyConfig::default() };
        let a = anisotropy_ablation(&cfg, &[AnisotropyMode::Uniform]).unwrap();
        let b = anisotropy_ablation(&cfg, &[AnisotropyMode::Uniform]).unwrap();
        assert_eq!(a[0].final_return, b[0].final_return);
        assert_eq!(a[0].alignment, b[0].alignment);
        assert!(a[0].min_slack >= -1e-10);
    }

    #[test]
    fn validation_suite_passes() {
        for c in validation_suite(0) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
