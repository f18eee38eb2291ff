//! Projected policy-gradient training loops and step-size schedules.
//!
//! Every method follows the same iteration: roll out a batch, estimate the
//! REINFORCE gradient, turn it into an update direction, take a step and
//! rescale the parameters back into the radius ball. The methods differ only
//! in the direction:
//!
//! - `Lpg`: the gradient projected onto the algebra.
//! - `AmbientPg`: the raw gradient of the ambient weights.
//! - `NatGradChol` / `NatGradCg(k)`: `F̃⁻¹g` with `F̃` the batch Fisher
//!   estimate divided by its mean eigenvalue, solved by Cholesky or by `k`
//!   conjugate-gradient iterations.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::algebra::AlgebraDescriptor;
use crate::envs::LieGroupMdp;
use crate::error::{Error, Result};
use crate::estimation::{alignment, batch_scores, fisher_from_scores, reinforce_gradient, rollout, spd_solve};
use crate::policy::Policy;
use crate::rng::{normal, stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Lpg,
    AmbientPg,
    NatGradChol,
    NatGradCg(usize),
}

impl Method {
    pub fn is_natural(self) -> bool {
        matches!(self, Method::NatGradChol | Method::NatGradCg(_))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Lpg => write!(f, "LPG"),
            Method::AmbientPg => write!(f, "AMBIENT_PG"),
            Method::NatGradChol => write!(f, "NATGRAD_CHOL"),
            Method::NatGradCg(k) => write!(f, "NATGRAD_CG({k})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// `η/√T` at every iteration.
    ConstantOverSqrtT,
    /// `η/√(t+1)`.
    Diminishing,
    /// `η` at every iteration.
    Constant,
}

/// Step size at iteration `t` of a `T`-iteration run.
pub fn step_size(schedule: Schedule, eta: f64, t: usize, horizon: usize) -> f64 {
    match schedule {
        Schedule::ConstantOverSqrtT => eta / (horizon.max(1) as f64).sqrt(),
        Schedule::Diminishing => eta / ((t + 1) as f64).sqrt(),
        Schedule::Constant => eta,
    }
}

/// Rescales `theta` onto the sphere of radius `b` when it lies outside.
pub fn radius_project(theta: &DVector<f64>, b: f64) -> (DVector<f64>, bool) {
    let norm = theta.norm();
    if norm <= b {
        (theta.clone(), false)
    } else {
        (theta * (b / norm), true)
    }
}

/// `k` conjugate-gradient iterations on `F v = g` from `v₀ = 0`.
pub fn conjugate_gradient(f: &DMatrix<f64>, g: &DVector<f64>, k: usize) -> DVector<f64> {
    let mut v = DVector::zeros(g.len());
    let mut r = g.clone();
    let mut p = r.clone();
    let mut rr = r.dot(&r);
    let tol = 1e-30 * g.norm_squared().max(f64::MIN_POSITIVE);
    for _ in 0..k {
        if rr <= tol {
            break;
        }
        let fp = f * &p;
        let denom = p.dot(&fp);
        if denom <= 0.0 {
            break;
        }
        let alpha = rr / denom;
        v.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &fp, 1.0);
        let rr_next = r.dot(&r);
        p = &r + &p * (rr_next / rr);
        rr = rr_next;
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub method: Method,
    pub eta: f64,
    pub schedule: Schedule,
    /// `f64::INFINITY` disables the radius projection.
    pub b_theta: f64,
    pub iterations: usize,
    pub episodes_per_iter: usize,
    pub gamma: f64,
    pub seed: u64,
    /// Estimate the Fisher matrix and alignment at every iteration.
    pub log_fisher: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: Method::Lpg,
            eta: 0.25,
            schedule: Schedule::ConstantOverSqrtT,
            b_theta: 10.0,
            iterations: 200,
            episodes_per_iter: 8,
            gamma: 0.99,
            seed: 0,
            log_fisher: false,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            bad.push(format!("eta must be > 0 (got {})", self.eta));
        }
        if self.iterations == 0 {
            bad.push("T must be ≥ 1".to_string());
        }
        if self.episodes_per_iter == 0 {
            bad.push("episodes_per_iter must be ≥ 1".to_string());
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            bad.push(format!("gamma must lie in [0, 1] (got {})", self.gamma));
        }
        if !(self.b_theta > 0.0) {
            bad.push(format!("B_theta must be > 0 or infinite (got {})", self.b_theta));
        }
        if self.method == Method::NatGradCg(0) {
            bad.push("NATGRAD_CG needs k ≥ 1".to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }
}

/// Wall-clock microseconds spent in each phase of an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseMicros {
    pub rollout: f64,
    pub gradient: f64,
    pub precondition: f64,
    pub update: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub mean_return: f64,
    pub grad_norm: f64,
    pub theta_norm: f64,
    pub projection_triggered: bool,
    /// `‖P_g(g) − g‖ / ‖g‖` for Lie policies; zero otherwise.
    pub projection_residual: f64,
    pub alignment: Option<f64>,
    pub kappa: Option<f64>,
    pub epsilon_f: Option<f64>,
    /// The Cholesky solve failed and CG was used instead.
    pub fallback: bool,
    pub micros: PhaseMicros,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunRecord {
    pub rows: Vec<IterationRecord>,
    /// Set when the run stopped early.
    pub aborted: Option<Error>,
}

impl RunRecord {
    pub fn final_return(&self) -> Option<f64> {
        self.rows.last().map(|r| r.mean_return)
    }

    pub fn max_theta_norm(&self) -> f64 {
        self.rows.iter().map(|r| r.theta_norm).fold(0.0, f64::max)
    }

    pub fn projection_rate(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().filter(|r| r.projection_triggered).count() as f64 / self.rows.len() as f64
    }

    pub fn mean_micros(&self) -> PhaseMicros {
        let n = self.rows.len().max(1) as f64;
        let mut m = PhaseMicros::default();
        for r in &self.rows {
            m.rollout += r.micros.rollout / n;
            m.gradient += r.micros.gradient / n;
            m.precondition += r.micros.precondition / n;
            m.update += r.micros.update / n;
        }
        m
    }
}

fn micros_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e6
}

/// Projects a coordinate-space direction through the ambient matrix space.
fn project_direction(descriptor: &AlgebraDescriptor, g: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let m = descriptor.matrix_of(g)?;
    let projected = descriptor.project(&m)?;
    let v = descriptor.coords_of(&projected)?;
    let gn = g.norm();
    let residual = if gn > 0.0 { (&v - g).norm() / gn } else { 0.0 };
    Ok((v, residual))
}

/// Trains `policy` on `env` with the method in `cfg`.
///
/// Non-finite gradient estimates stop the run; the record keeps the rows
/// completed so far and the reason in `aborted`.
pub fn train<E, P>(env: &mut E, policy: P, cfg: &OptimizerConfig) -> Result<(P, RunRecord)>
where
    E: LieGroupMdp + ?Sized,
    P: Policy,
{
    cfg.validate()?;
    let (pd, ed) = (policy.descriptor(), env.descriptor());
    if pd.kind() != ed.kind() || pd.n() != ed.n() {
        return Err(Error::Argument(format!("policy algebra {} does not match environment algebra {}", pd.kind(), ed.kind())));
    }
    let descriptor = pd.clone();
    let mut policy = policy;
    let mut rng = stream(cfg.seed, Stream::Exploration);
    let mut record = RunRecord { rows: Vec::with_capacity(cfg.iterations), aborted: None };

    for t in 0..cfg.iterations {
        let start = Instant::now();
        let batch = (0..cfg.episodes_per_iter).map(|_| rollout(env, &policy, &mut rng)).collect::<Result<Vec<_>>>()?;
        let rollout_us = micros_since(start);
        let mean_return = batch.iter().map(|t| t.total_reward()).sum::<f64>() / batch.len() as f64;

        let start = Instant::now();
        let g = reinforce_gradient(&policy, &batch, cfg.gamma)?;
        let gradient_us = micros_since(start);
        if g.iter().any(|v| !v.is_finite()) {
            record.aborted = Some(Error::NonFiniteGradient { iteration: t });
            break;
        }

        let start = Instant::now();
        let mut fallback = false;
        let mut projection_residual = 0.0;
        let mut fisher = None;
        let direction = match cfg.method {
            Method::Lpg => {
                let (v, residual) = project_direction(&descriptor, &g)?;
                projection_residual = residual;
                v
            }
            Method::AmbientPg => g.clone(),
            Method::NatGradChol | Method::NatGradCg(_) => {
                let est = fisher_from_scores(&batch_scores(&policy, &batch))?;
                let scale = est.matrix.trace() / est.matrix.nrows() as f64;
                let f = &est.matrix / scale;
                let v = match cfg.method {
                    Method::NatGradCg(k) => conjugate_gradient(&f, &g, k),
                    _ => match spd_solve(&f, &g) {
                        Some(v) => v,
                        None => {
                            fallback = true;
                            conjugate_gradient(&f, &g, f.nrows())
                        }
                    },
                };
                fisher = Some(est);
                v
            }
        };
        let precondition_us = micros_since(start);
        if cfg.log_fisher && fisher.is_none() {
            fisher = Some(fisher_from_scores(&batch_scores(&policy, &batch))?);
        }

        let start = Instant::now();
        let eta = step_size(cfg.schedule, cfg.eta, t, cfg.iterations);
        let (theta, triggered) = radius_project(&(policy.params() + &direction * eta), cfg.b_theta);
        let theta_norm = theta.norm();
        policy.set_params(theta)?;
        let update_us = micros_since(start);

        let (mut align, mut kappa, mut epsilon_f) = (None, None, None);
        if let Some(est) = fisher {
            align = alignment(&g, &est.matrix).ok();
            kappa = Some(est.kappa);
            epsilon_f = Some(est.epsilon_f);
        }

        record.rows.push(IterationRecord {
            iteration: t,
            mean_return,
            grad_norm: g.norm(),
            theta_norm,
            projection_triggered: triggered,
            projection_residual,
            alignment: align,
            kappa,
            epsilon_f,
            fallback,
            micros: PhaseMicros { rollout: rollout_us, gradient: gradient_us, precondition: precondition_us, update: update_us },
        });
    }
    Ok((policy, record))
}

/// Plain projected policy gradient (Lie policy, `Method::Lpg`).
pub fn lpg_run<E, P>(env: &mut E, policy: P, cfg: &OptimizerConfig) -> Result<(P, RunRecord)>
where
    E: LieGroupMdp + ?Sized,
    P: Policy,
{
    let cfg = OptimizerConfig { method: if cfg.method.is_natural() { Method::Lpg } else { cfg.method }, ..*cfg };
    train(env, policy, &cfg)
}

/// Natural-gradient baseline; `cfg.method` must be a natural-gradient method.
pub fn natural_gradient_run<E, P>(env: &mut E, policy: P, cfg: &OptimizerConfig) -> Result<(P, RunRecord)>
where
    E: LieGroupMdp + ?Sized,
    P: Policy,
{
    if !cfg.method.is_natural() {
        return Err(Error::Config(format!("{} is not a natural-gradient method", cfg.method)));
    }
    train(env, policy, cfg)
}

/// An objective with an exact or noisy gradient, for runs without rollouts.
pub trait GradientOracle {
    fn value(&self, theta: &DVector<f64>) -> f64;
    fn exact_gradient(&self, theta: &DVector<f64>) -> DVector<f64>;
    /// Gradient as seen by the optimizer; defaults to the exact gradient.
    fn sample_gradient<R: Rng + ?Sized>(&self, theta: &DVector<f64>, _rng: &mut R) -> DVector<f64> {
        self.exact_gradient(theta)
    }
}

/// `f(θ) = −(θ − θ*)ᵀ A (θ − θ*)`, optionally with additive gradient noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    pub center: DVector<f64>,
    /// `None` means `A = I`.
    pub curvature: Option<DMatrix<f64>>,
    pub noise_sigma: f64,
}

impl Quadratic {
    pub fn isotropic(center: DVector<f64>) -> Self {
        Self { center, curvature: None, noise_sigma: 0.0 }
    }

    /// Gradient Lipschitz constant `2 λ_max(A)`.
    pub fn lipschitz(&self) -> f64 {
        match &self.curvature {
            None => 2.0,
            Some(a) => 2.0 * a.clone().symmetric_eigen().eigenvalues.max(),
        }
    }
}

impl GradientOracle for Quadratic {
    fn value(&self, theta: &DVector<f64>) -> f64 {
        let e = theta - &self.center;
        match &self.curvature {
            None => -e.norm_squared(),
            Some(a) => -e.dot(&(a * &e)),
        }
    }

    fn exact_gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        let e = theta - &self.center;
        match &self.curvature {
            None => e * -2.0,
            Some(a) => (a * e) * -2.0,
        }
    }

    fn sample_gradient<R: Rng + ?Sized>(&self, theta: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        let g = self.exact_gradient(theta);
        if self.noise_sigma == 0.0 {
            return g;
        }
        g.map(|v| v + self.noise_sigma * normal(rng))
    }
}

/// Per-iteration values of an oracle run, measured at the iterate before the step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OracleTrace {
    pub values: Vec<f64>,
    /// Squared norm of the projected exact gradient.
    pub grad_norms_sq: Vec<f64>,
    pub step_sizes: Vec<f64>,
    pub final_theta: DVector<f64>,
    pub final_value: f64,
}

/// LPG on a gradient oracle over the coordinates of `descriptor`.
#[allow(clippy::too_many_arguments)]
pub fn oracle_run<O: GradientOracle>(
    oracle: &O,
    descriptor: &AlgebraDescriptor,
    theta0: DVector<f64>,
    eta: f64,
    schedule: Schedule,
    iterations: usize,
    b_theta: f64,
    seed: u64,
) -> Result<OracleTrace> {
    if theta0.len() != descriptor.dim() {
        return Err(Error::Argument(format!("θ₀ has length {}, algebra dimension is {}", theta0.len(), descriptor.dim())));
    }
    let mut rng = stream(seed, Stream::Gradient);
    let mut theta = theta0;
    let mut trace = OracleTrace::default();
    for t in 0..iterations {
        let exact = project_direction(descriptor, &oracle.exact_gradient(&theta))?.0;
        trace.values.push(oracle.value(&theta));
        trace.grad_norms_sq.push(exact.norm_squared());
        let g = oracle.sample_gradient(&theta, &mut rng);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { iteration: t });
        }
        let v = project_direction(descriptor, &g)?.0;
        let eta_t = step_size(schedule, eta, t, iterations);
        trace.step_sizes.push(eta_t);
        theta = radius_project(&(theta + v * eta_t), b_theta).0;
    }
    trace.final_value = oracle.value(&theta);
    trace.final_theta = theta;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{make_descriptor, AlgebraElement, AlgebraKind};
    use crate::envs::{EnvState, PerturbationConfig, So3JointsEnv, StepResult};
    use crate::policy::{AmbientPolicy, GaussianLiePolicy};
    use std::sync::Arc;

    #[derive(Debug, Clone)]
    struct ZeroReward {
        descriptor: Arc<AlgebraDescriptor>,
    }

    impl LieGroupMdp for ZeroReward {
        fn descriptor(&self) -> &Arc<AlgebraDescriptor> {
            &self.descriptor
        }
        fn horizon(&self) -> usize {
            5
        }
        fn reset(&mut self) -> EnvState {
            EnvState { group_elements: Vec::new(), step_index: 0 }
        }
        fn step(&mut self, state: &EnvState, _action: &AlgebraElement) -> Result<StepResult> {
            let s = EnvState { group_elements: Vec::new(), step_index: state.step_index + 1 };
            Ok(StepResult { next_state: s.clone(), reward: 0.0, observation: s })
        }
    }

    #[test]
    fn schedules() {
        assert!((step_size(Schedule::ConstantOverSqrtT, 1.0, 37, 100) - 0.1).abs() < 1e-15);
        assert_eq!(step_size(Schedule::ConstantOverSqrtT, 0.3, 0, 1), 0.3);
        assert_eq!(step_size(Schedule::Diminishing, 0.3, 0, 1), 0.3);
        let (mut s1, mut s2) = (0.0, 0.0);
        let mut checkpoints = Vec::new();
        for t in 0..1_000_000 {
            let e = step_size(Schedule::Diminishing, 1.0, t, 1_000_000);
            s1 += e;
            s2 += e * e;
            if (t + 1) % 250_000 == 0 {
                checkpoints.push(s1);
            }
        }
        // Partial sums keep growing like √T; the sum of squares grows only like log T.
        assert!(checkpoints.windows(2).all(|w| w[1] - w[0] > 200.0));
        assert!(s2 < 1.0 + (1e6f64).ln());
    }

    #[test]
    fn radius_projection_examples() {
        let (v, hit) = radius_project(&DVector::from_vec(vec![0.3, 0.4]), 1.0);
        assert_eq!((v, hit), (DVector::from_vec(vec![0.3, 0.4]), false));
        let (v, hit) = radius_project(&DVector::from_vec(vec![3.0, 4.0]), 1.0);
        assert!(hit && (v - DVector::from_vec(vec![0.6, 0.8])).norm() < 1e-15);
        let big = DVector::from_vec(vec![1e9, -3e9]);
        assert_eq!(radius_project(&big, f64::INFINITY), (big, false));
    }

    #[test]
    fn cg_at_full_iterations_matches_cholesky() {
        let mut rng = stream(1, Stream::Custom(1));
        for d in [3, 10, 30] {
            let a = DMatrix::from_fn(d, d, |_, _| normal(&mut rng));
            let f = &a * a.transpose() + DMatrix::identity(d, d);
            let g = DVector::from_fn(d, |_, _| normal(&mut rng));
            let exact = f.clone().cholesky().unwrap().solve(&g);
            // Exact in d steps in exact arithmetic; rounding needs a few more.
            let cg = conjugate_gradient(&f, &g, 2 * d);
            assert!((cg - &exact).norm() <= 1e-8 * exact.norm());
        }
        let f = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 10.0]));
        let v = spd_solve(&f, &DVector::from_vec(vec![1.0, 1.0])).unwrap().normalize();
        assert!((v - DVector::from_vec(vec![1.0, 0.1]).normalize()).norm() < 1e-15);
    }

    #[test]
    fn zero_reward_leaves_theta_unchanged() {
        let d = make_descriptor(AlgebraKind::So3Product(2), 3).unwrap();
        let mut env = ZeroReward { descriptor: d.clone() };
        let theta = DVector::from_element(6, 0.2);
        let p = GaussianLiePolicy::new(&d, 0.1).unwrap().with_theta(theta.clone()).unwrap();
        let cfg = OptimizerConfig { iterations: 10, ..Default::default() };
        let (p, rec) = lpg_run(&mut env, p, &cfg).unwrap();
        assert_eq!(p.params(), &theta);
        assert_eq!(rec.rows.len(), 10);
        assert!(rec.rows.iter().enumerate().all(|(i, r)| r.iteration == i));
    }

    #[test]
    fn small_radius_is_enforced_every_iteration() {
        let mut env = So3JointsEnv::new(2, 3, PerturbationConfig::default()).unwrap();
        let p = GaussianLiePolicy::new(env.descriptor(), 0.1).unwrap();
        let cfg = OptimizerConfig { iterations: 15, eta: 100.0, b_theta: 0.5, schedule: Schedule::Constant, ..Default::default() };
        let (p, rec) = lpg_run(&mut env, p, &cfg).unwrap();
        assert!(rec.rows.iter().all(|r| r.projection_triggered && (r.theta_norm - 0.5).abs() < 1e-12));
        assert!((p.params().norm() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn lpg_direction_is_already_in_the_algebra() {
        let mut env = So3JointsEnv::new(3, 4, PerturbationConfig::default()).unwrap();
        let p = GaussianLiePolicy::new(env.descriptor(), 0.1).unwrap();
        let cfg = OptimizerConfig { iterations: 20, ..Default::default() };
        let (_, rec) = lpg_run(&mut env, p, &cfg).unwrap();
        assert!(rec.rows.iter().all(|r| r.projection_residual <= 1e-10));
    }

    #[test]
    fn natural_gradient_with_isotropic_fisher_matches_lpg() {
        // A huge batch makes the Fisher estimate nearly isotropic, so the two
        // methods take nearly the same first step from the same rollouts.
        let d = make_descriptor(AlgebraKind::So3Product(1), 3).unwrap();
        let run = |method| {
            let mut env = So3JointsEnv::new(1, 5, PerturbationConfig::default()).unwrap();
            let p = GaussianLiePolicy::new(&d, 0.1).unwrap().with_clip(f64::INFINITY).unwrap();
            let cfg = OptimizerConfig { method, iterations: 1, episodes_per_iter: 4000, ..Default::default() };
            train(&mut env, p, &cfg).unwrap().0.params().clone()
        };
        let a = run(Method::Lpg);
        let b = run(Method::NatGradChol);
        let c = run(Method::NatGradCg(3));
        assert!((&a - &b).norm() <= 0.05 * a.norm());
        assert!((&b - &c).norm() <= 1e-8 * b.norm());
    }

    #[test]
    fn exact_identity_preconditioner_reproduces_lpg() {
        let f = DMatrix::<f64>::identity(4, 4) * 7.0;
        let g = DVector::from_vec(vec![0.1, -2.0, 0.5, 3.0]);
        let scale = f.trace() / 4.0;
        assert!((spd_solve(&(&f / scale), &g).unwrap() - &g).norm() < 1e-14);
        assert!((conjugate_gradient(&(&f / scale), &g, 4) - &g).norm() < 1e-14);
    }

    #[test]
    fn ambient_runs_and_respects_radius() {
        let mut env = So3JointsEnv::new(2, 6, PerturbationConfig::default()).unwrap();
        let p = AmbientPolicy::new(env.descriptor(), 3, 0.1, 6).unwrap();
        let cfg = OptimizerConfig { method: Method::AmbientPg, iterations: 10, b_theta: 0.3, eta: 10.0, ..Default::default() };
        let (p, rec) = train(&mut env, p, &cfg).unwrap();
        assert_eq!(p.params().len(), 18);
        assert!(rec.rows.iter().all(|r| r.theta_norm <= 0.3 + 1e-12));
    }

    #[test]
    fn runs_are_deterministic() {
        let run = || {
            let mut env = So3JointsEnv::new(2, 7, PerturbationConfig::default()).unwrap();
            let p = GaussianLiePolicy::new(env.descriptor(), 0.1).unwrap();
            let cfg = OptimizerConfig { iterations: 5, log_fisher: true, ..Default::default() };
            let (p, rec) = train(&mut env, p, &cfg).unwrap();
            (p.params().clone(), rec.rows.iter().map(|r| (r.mean_return, r.alignment)).collect::<Vec<_>>())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn invalid_configs_list_every_problem() {
        let cfg = OptimizerConfig { eta: -1.0, iterations: 0, method: Method::NatGradCg(0), ..Default::default() };
        let Err(Error::Config(msg)) = cfg.validate() else { panic!("expected config error") };
        assert!(msg.contains("eta") && msg.contains("T ") && msg.contains("k ≥ 1"));
    }

    #[test]
    fn mismatched_algebras_are_rejected() {
        let mut env = So3JointsEnv::new(2, 0, PerturbationConfig::default()).unwrap();
        let other = make_descriptor(AlgebraKind::So3Product(3), 3).unwrap();
        let p = GaussianLiePolicy::new(&other, 0.1).unwrap();
        assert!(matches!(lpg_run(&mut env, p, &OptimizerConfig::default()), Err(Error::Argument(_))));
    }

    #[test]
    fn progress_inequality_on_a_quadratic() {
        let d = make_descriptor(AlgebraKind::So3Product(10), 3).unwrap();
        let mut rng = stream(8, Stream::Custom(2));
        let q = DMatrix::from_fn(30, 30, |_, _| normal(&mut rng)).qr().q();
        let lam = DVector::from_fn(30, |i, _| 0.1 + 0.9 * i as f64 / 29.0);
        let a = &q * DMatrix::from_diagonal(&lam) * q.transpose();
        let oracle = Quadratic { center: DVector::from_fn(30, |_, _| normal(&mut rng)), curvature: Some(a), noise_sigma: 0.0 };
        let eta = 1.0 / (2.0 * oracle.lipschitz());
        let trace = oracle_run(&oracle, &d, DVector::zeros(30), eta, Schedule::Constant, 200, f64::INFINITY, 0).unwrap();
        let mut values = trace.values.clone();
        values.push(trace.final_value);
        for t in 0..200 {
            let slack = values[t + 1] - values[t] - 0.5 * eta * trace.grad_norms_sq[t];
            assert!(slack >= -1e-12, "t = {t}: slack {slack}");
        }
    }
}
