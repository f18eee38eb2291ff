//! Lie group MDPs driven by algebra-valued actions.
//!
//! States are group elements updated by right multiplication with the
//! exponential of the action, `g ← g·exp(a)`. Three environments are
//! provided:
//!
//! - [`So3JointsEnv`]: `J` independent rotations tracking targets, rewarded
//!   by the negative summed squared geodesic error.
//! - [`Se3Env`]: a rigid body in SE(3) rewarded by rotation and translation
//!   pose error against a goal.
//! - [`WitnessBandit`]: the single-state bandit with reward
//!   `−½‖exp(a) − I‖_F²`, whose objective along `tH` has a closed form.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector3};
use rand::Rng;

use crate::algebra::{make_descriptor, AlgebraDescriptor, AlgebraElement, AlgebraKind};
use crate::error::{Error, Result};
use crate::expmap::{frechet_adjoint, mat_exp, so3_exp, so3_log_vec};
use crate::rng::{normal, stream, Stream, StreamRng};

/// Episode length shared by the tracking environments.
pub const DEFAULT_HORIZON: usize = 20;
/// Per-step reward clip.
pub const DEFAULT_R_MAX: f64 = 1e3;
/// Steps between forced polar re-orthonormalizations.
pub const REORTHONORMALIZE_EVERY: usize = 50;
/// Drift in `‖RᵀR − I‖_F` that forces an immediate re-orthonormalization.
pub const ORTHOGONALITY_DRIFT_TOL: f64 = 1e-6;

/// How exploration noise is distributed over algebra coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnisotropyMode {
    Uniform,
    /// `√1.5 ×` noise on the z coordinate of each rotation block.
    AxisBiased,
    /// Per-coordinate scales spread log-uniformly from 1 to `√κ_M`.
    Correlated(f64),
}

impl AnisotropyMode {
    /// Per-coordinate multipliers of the base exploration scale.
    pub fn scales(&self, dim: usize) -> Result<DVector<f64>> {
        match *self {
            AnisotropyMode::Uniform => Ok(DVector::from_element(dim, 1.0)),
            AnisotropyMode::AxisBiased => Ok(DVector::from_fn(dim, |i, _| if i % 3 == 2 { 1.5f64.sqrt() } else { 1.0 })),
            AnisotropyMode::Correlated(kappa) => {
                if !(kappa >= 1.0 && kappa.is_finite()) {
                    return Err(Error::Config(format!("kappa_M must be ≥ 1 (got {kappa})")));
                }
                let top = kappa.sqrt().ln();
                let denom = (dim.max(2) - 1) as f64;
                Ok(DVector::from_fn(dim, |i, _| (top * i as f64 / denom).exp()))
            }
        }
    }
}

/// Controlled violations of the environment's symmetry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationConfig {
    pub transition_noise_sigma: f64,
    pub observation_noise_sigma: f64,
    pub reward_noise_sigma: f64,
    pub anisotropy: AnisotropyMode,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self { transition_noise_sigma: 0.0, observation_noise_sigma: 0.0, reward_noise_sigma: 0.0, anisotropy: AnisotropyMode::Uniform }
    }
}

impl PerturbationConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        for (name, v) in [
            ("transition_noise_sigma", self.transition_noise_sigma),
            ("observation_noise_sigma", self.observation_noise_sigma),
            ("reward_noise_sigma", self.reward_noise_sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                bad.push(format!("{name} must be ≥ 0 (got {v})"));
            }
        }
        if let AnisotropyMode::Correlated(k) = self.anisotropy {
            if !(k >= 1.0) {
                bad.push(format!("kappa_M must be ≥ 1 (got {k})"));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }
}

/// Group-valued state.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    /// `J` rotations (3×3) for SO(3)^J, one 4×4 transform for SE(3), or the
    /// single bandit state (empty).
    pub group_elements: Vec<DMatrix<f64>>,
    pub step_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_state: EnvState,
    pub reward: f64,
    /// What the agent observes; equals `next_state` without observation noise.
    pub observation: EnvState,
}

/// An episodic MDP whose actions live in a matrix Lie algebra.
pub trait LieGroupMdp {
    fn descriptor(&self) -> &Arc<AlgebraDescriptor>;
    fn horizon(&self) -> usize;
    /// Starts a new episode and returns its initial state.
    fn reset(&mut self) -> EnvState;
    fn step(&mut self, state: &EnvState, action: &AlgebraElement) -> Result<StepResult>;
}

fn check_action(expected: &Arc<AlgebraDescriptor>, action: &AlgebraElement) -> Result<()> {
    if action.descriptor().kind() != expected.kind() || action.descriptor().n() != expected.n() {
        return Err(Error::Argument(format!(
            "action lies in {} but the environment expects {}",
            action.descriptor().kind(),
            expected.kind()
        )));
    }
    Ok(())
}

fn to_m3(m: &DMatrix<f64>) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[(i, j)])
}

fn from_m3(m: &Matrix3<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(3, 3, |i, j| m[(i, j)])
}

fn to_m4(m: &DMatrix<f64>) -> Matrix4<f64> {
    Matrix4::from_fn(|i, j| m[(i, j)])
}

fn from_m4(m: &Matrix4<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(4, 4, |i, j| m[(i, j)])
}

fn gaussian3<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> Vector3<f64> {
    Vector3::new(normal(rng), normal(rng), normal(rng)) * sigma
}

/// Polar factor of `m`, the closest rotation in Frobenius norm.
pub fn polar_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u2 = u;
        u2.column_mut(2).neg_mut();
        r = u2 * v_t;
    }
    r
}

/// Rotation with axis uniform on the sphere and angle uniform on `[0, max_angle]`.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R, max_angle: f64) -> Matrix3<f64> {
    let axis = loop {
        let v = gaussian3(rng, 1.0);
        let n = v.norm();
        if n > 1e-12 {
            break v / n;
        }
    };
    let angle = rng.random_range(0.0..=max_angle);
    so3_exp(&(axis * angle))
}

/// Squared geodesic error `‖log(Rᵀ R*)‖_F²` (twice the squared angle).
pub fn geodesic_error_sq(r: &Matrix3<f64>, target: &Matrix3<f64>) -> Result<f64> {
    let w = so3_log_vec(&(r.transpose() * target))?;
    Ok(2.0 * w.norm_squared())
}

/// Where tracking targets come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetMode {
    /// Drawn once from the environment seed and reused by every episode.
    FixedPerSeed,
    /// Redrawn at every reset.
    PerEpisode,
}

/// Noise generators, one per channel.
#[derive(Debug, Clone)]
struct NoiseStreams {
    targets: StreamRng,
    transition: StreamRng,
    observation: StreamRng,
    reward: StreamRng,
}

impl NoiseStreams {
    fn new(seed: u64) -> Self {
        Self {
            targets: stream(seed, Stream::Targets),
            transition: stream(seed, Stream::Transition),
            observation: stream(seed, Stream::Observation),
            reward: stream(seed, Stream::Reward),
        }
    }
}

/// `J` rotational joints tracking per-joint target rotations.
#[derive(Debug, Clone)]
pub struct So3JointsEnv {
    descriptor: Arc<AlgebraDescriptor>,
    joints: usize,
    horizon: usize,
    r_max: f64,
    max_target_angle: f64,
    target_mode: TargetMode,
    perturbation: PerturbationConfig,
    targets: Vec<Matrix3<f64>>,
    noise: NoiseStreams,
}

impl So3JointsEnv {
    pub fn new(joints: usize, seed: u64, perturbation: PerturbationConfig) -> Result<Self> {
        perturbation.validate()?;
        let descriptor = make_descriptor(AlgebraKind::So3Product(joints), 3)?;
        let mut env = Self {
            descriptor,
            joints,
            horizon: DEFAULT_HORIZON,
            r_max: DEFAULT_R_MAX,
            max_target_angle: 0.75 * std::f64::consts::PI,
            target_mode: TargetMode::FixedPerSeed,
            perturbation,
            targets: Vec::new(),
            noise: NoiseStreams::new(seed),
        };
        env.draw_targets();
        Ok(env)
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon.max(1);
        self
    }

    pub fn with_target_mode(mut self, mode: TargetMode) -> Self {
        self.target_mode = mode;
        self
    }

    pub fn with_r_max(mut self, r_max: f64) -> Self {
        self.r_max = r_max;
        self
    }

    pub fn joints(&self) -> usize {
        self.joints
    }

    pub fn targets(&self) -> &[Matrix3<f64>] {
        &self.targets
    }

    /// Replaces the targets; used to set up exact reference configurations.
    pub fn set_targets(&mut self, targets: Vec<Matrix3<f64>>) -> Result<()> {
        if targets.len() != self.joints {
            return Err(Error::Argument(format!("expected {} targets, got {}", self.joints, targets.len())));
        }
        self.targets = targets;
        Ok(())
    }

    fn draw_targets(&mut self) {
        let max_angle = self.max_target_angle;
        let rng = &mut self.noise.targets;
        self.targets = (0..self.joints).map(|_| random_rotation(rng, max_angle)).collect();
    }

    /// Unperturbed reward `−Σ_j ‖log(R_jᵀ R_j*)‖_F²`.
    pub fn tracking_reward(&self, rotations: &[Matrix3<f64>]) -> Result<f64> {
        let mut total = 0.0;
        for (r, t) in rotations.iter().zip(&self.targets) {
            total -= geodesic_error_sq(r, t)?;
        }
        Ok(total)
    }
}

/// A fresh SO(3)^J environment and its first state.
pub fn so3j_reset(joints: usize, seed: u64) -> Result<(So3JointsEnv, EnvState)> {
    let mut env = So3JointsEnv::new(joints, seed, PerturbationConfig::default())?;
    let state = env.reset();
    Ok((env, state))
}

impl LieGroupMdp for So3JointsEnv {
    fn descriptor(&self) -> &Arc<AlgebraDescriptor> {
        &self.descriptor
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reset(&mut self) -> EnvState {
        if self.target_mode == TargetMode::PerEpisode {
            self.draw_targets();
        }
        EnvState { group_elements: vec![DMatrix::identity(3, 3); self.joints], step_index: 0 }
    }

    fn step(&mut self, state: &EnvState, action: &AlgebraElement) -> Result<StepResult> {
        check_action(&self.descriptor, action)?;
        if state.group_elements.len() != self.joints {
            return Err(Error::Argument(format!("state has {} joints, environment has {}", state.group_elements.len(), self.joints)));
        }
        let step_index = state.step_index + 1;
        let p = self.perturbation;
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let mut next = Vec::with_capacity(self.joints);
        for (j, r) in state.group_elements.iter().enumerate() {
            let [x, y, z] = action.joint(j);
            // Coordinates are in the unit-Frobenius basis hat(e)/√2.
            let omega = Vector3::new(x, y, z) * inv_sqrt2;
            let mut r_next = to_m3(r) * so3_exp(&omega);
            if p.transition_noise_sigma > 0.0 {
                let eps = gaussian3(&mut self.noise.transition, p.transition_noise_sigma);
                r_next *= so3_exp(&eps);
            }
            let drift = (r_next.transpose() * r_next - Matrix3::identity()).norm();
            if step_index.is_multiple_of(REORTHONORMALIZE_EVERY) || drift > ORTHOGONALITY_DRIFT_TOL {
                r_next = polar_rotation(&r_next);
            }
            next.push(r_next);
        }
        let mut reward = self.tracking_reward(&next)?;
        if p.reward_noise_sigma > 0.0 {
            reward += p.reward_noise_sigma * normal(&mut self.noise.reward);
        }
        reward = reward.clamp(-self.r_max, self.r_max);

        let observation = if p.observation_noise_sigma > 0.0 {
            let observed =
                next.iter().map(|r| from_m3(&(r * so3_exp(&gaussian3(&mut self.noise.observation, p.observation_noise_sigma))))).collect();
            EnvState { group_elements: observed, step_index }
        } else {
            EnvState { group_elements: next.iter().map(from_m3).collect(), step_index }
        };
        let next_state = EnvState { group_elements: next.iter().map(from_m3).collect(), step_index };
        Ok(StepResult { next_state, reward, observation })
    }
}

/// `exp` of an `se(3)` twist with rotation vector `w` and translation part `v`.
pub fn se3_exp(w: &Vector3<f64>, v: &Vector3<f64>) -> Matrix4<f64> {
    let angle2 = w.norm_squared();
    let k = crate::expmap::hat(w);
    let (b, c) = if angle2 < 1e-12 {
        (0.5 - angle2 / 24.0, 1.0 / 6.0 - angle2 / 120.0)
    } else {
        let angle = angle2.sqrt();
        ((1.0 - angle.cos()) / angle2, (angle - angle.sin()) / (angle2 * angle))
    };
    let rot = so3_exp(w);
    let jac = Matrix3::identity() + k * b + k * k * c;
    let t = jac * v;
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rot);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
    m
}

/// Rigid-body pose control on SE(3).
///
/// The goal pose is drawn from the environment seed and held fixed; every
/// episode starts at the identity pose. The reward is
/// `−(‖log(Rᵀ R*)‖_F² + ‖p − p*‖²)`.
#[derive(Debug, Clone)]
pub struct Se3Env {
    descriptor: Arc<AlgebraDescriptor>,
    horizon: usize,
    r_max: f64,
    perturbation: PerturbationConfig,
    goal: Matrix4<f64>,
    control_period: f64,
    noise: NoiseStreams,
}

/// Default control period of the SE(3) environment.
pub const SE3_CONTROL_PERIOD: f64 = 1.0;
/// Distance range of the goal translation from the origin.
pub const SE3_GOAL_DISTANCE: (f64, f64) = (2.0, 4.0);

impl Se3Env {
    pub fn new(seed: u64, perturbation: PerturbationConfig) -> Result<Self> {
        perturbation.validate()?;
        let descriptor = make_descriptor(AlgebraKind::Se3, 4)?;
        let mut noise = NoiseStreams::new(seed);
        let rot = random_rotation(&mut noise.targets, 0.75 * std::f64::consts::PI);
        let dir = loop {
            let v = gaussian3(&mut noise.targets, 1.0);
            if v.norm() > 1e-12 {
                break v.normalize();
            }
        };
        let dist = noise.targets.random_range(SE3_GOAL_DISTANCE.0..=SE3_GOAL_DISTANCE.1);
        let mut goal = Matrix4::identity();
        goal.fixed_view_mut::<3, 3>(0, 0).copy_from(&rot);
        goal.fixed_view_mut::<3, 1>(0, 3).copy_from(&(dir * dist));
        Ok(Self {
            descriptor,
            horizon: DEFAULT_HORIZON,
            r_max: DEFAULT_R_MAX,
            perturbation,
            goal,
            control_period: SE3_CONTROL_PERIOD,
            noise,
        })
    }

    /// Duration over which each twist is applied: `T ← T·exp(dt·ξ)`.
    pub fn with_control_period(mut self, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("control period must be > 0 (got {dt})")));
        }
        self.control_period = dt;
        Ok(self)
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon.max(1);
        self
    }

    pub fn goal(&self) -> &Matrix4<f64> {
        &self.goal
    }

    pub fn set_goal(&mut self, goal: Matrix4<f64>) {
        self.goal = goal;
    }

    /// Unperturbed pose-error reward.
    pub fn pose_reward(&self, pose: &Matrix4<f64>) -> Result<f64> {
        let r: Matrix3<f64> = pose.fixed_view::<3, 3>(0, 0).into_owned();
        let r_goal: Matrix3<f64> = self.goal.fixed_view::<3, 3>(0, 0).into_owned();
        let p: Vector3<f64> = pose.fixed_view::<3, 1>(0, 3).into_owned();
        let p_goal: Vector3<f64> = self.goal.fixed_view::<3, 1>(0, 3).into_owned();
        Ok(-(geodesic_error_sq(&r, &r_goal)? + (p - p_goal).norm_squared()))
    }
}

/// A fresh SE(3) environment and its first state.
pub fn se3_reset(seed: u64) -> Result<(Se3Env, EnvState)> {
    let mut env = Se3Env::new(seed, PerturbationConfig::default())?;
    let state = env.reset();
    Ok((env, state))
}

impl LieGroupMdp for Se3Env {
    fn descriptor(&self) -> &Arc<AlgebraDescriptor> {
        &self.descriptor
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reset(&mut self) -> EnvState {
        EnvState { group_elements: vec![DMatrix::identity(4, 4)], step_index: 0 }
    }

    fn step(&mut self, state: &EnvState, action: &AlgebraElement) -> Result<StepResult> {
        check_action(&self.descriptor, action)?;
        let pose = state
            .group_elements
            .first()
            .filter(|m| m.nrows() == 4 && m.ncols() == 4)
            .ok_or_else(|| Error::Argument("SE(3) state must hold one 4×4 transform".into()))?;
        let c = action.coords();
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let dt = self.control_period;
        let w = Vector3::new(c[0], c[1], c[2]) * (inv_sqrt2 * dt);
        let v = Vector3::new(c[3], c[4], c[5]) * dt;
        let p = self.perturbation;
        let mut next = to_m4(pose) * se3_exp(&w, &v);
        if p.transition_noise_sigma > 0.0 {
            let eps = gaussian3(&mut self.noise.transition, p.transition_noise_sigma);
            next *= se3_exp(&eps, &Vector3::zeros());
        }
        let step_index = state.step_index + 1;
        let rot: Matrix3<f64> = next.fixed_view::<3, 3>(0, 0).into_owned();
        let drift = (rot.transpose() * rot - Matrix3::identity()).norm();
        if step_index.is_multiple_of(REORTHONORMALIZE_EVERY) || drift > ORTHOGONALITY_DRIFT_TOL {
            next.fixed_view_mut::<3, 3>(0, 0).copy_from(&polar_rotation(&rot));
        }
        let mut reward = self.pose_reward(&next)?;
        if p.reward_noise_sigma > 0.0 {
            reward += p.reward_noise_sigma * normal(&mut self.noise.reward);
        }
        reward = reward.clamp(-self.r_max, self.r_max);
        let observed = if p.observation_noise_sigma > 0.0 {
            let delta = gaussian3(&mut self.noise.observation, p.observation_noise_sigma);
            next * se3_exp(&delta, &Vector3::zeros())
        } else {
            next
        };
        Ok(StepResult {
            next_state: EnvState { group_elements: vec![from_m4(&next)], step_index },
            reward,
            observation: EnvState { group_elements: vec![from_m4(&observed)], step_index },
        })
    }
}

fn check_witness_kind(descriptor: &AlgebraDescriptor) -> Result<()> {
    match descriptor.kind() {
        AlgebraKind::GlN | AlgebraKind::DiagN | AlgebraKind::SlN => Ok(()),
        other => Err(Error::Unsupported(format!("the witness bandit is defined on gl(n), diag(n), sl(n); got {other}"))),
    }
}

/// Witness reward `−½‖exp(a) − I‖_F²`.
pub fn witness_reward(a: &DMatrix<f64>) -> Result<f64> {
    let n = a.nrows();
    let e = mat_exp(a)? - DMatrix::<f64>::identity(n, n);
    Ok(-0.5 * e.norm_squared())
}

/// `J(θ) = E_ξ[r(θ + ι(ξ))]` with `ξ ~ N(0, σ² I_d)`, estimated from `n_mc`
/// draws (exact when `sigma == 0`).
pub fn witness_objective(theta: &AlgebraElement, sigma: f64, n_mc: usize, seed: u64) -> Result<f64> {
    let descriptor = theta.descriptor();
    check_witness_kind(descriptor)?;
    if sigma == 0.0 {
        return witness_reward(theta.ambient());
    }
    if n_mc == 0 {
        return Err(Error::Argument("n_mc must be ≥ 1 when sigma > 0".into()));
    }
    let mut rng = stream(seed, Stream::Exploration);
    let d = descriptor.dim();
    let mut total = 0.0;
    for _ in 0..n_mc {
        let xi = DVector::from_fn(d, |_, _| sigma * normal(&mut rng));
        let a = theta.ambient() + descriptor.matrix_of(&xi)?;
        total += witness_reward(&a)?;
    }
    Ok(total / n_mc as f64)
}

/// Closed form of the ray-restricted objective `g(t) = J(tH)` on the
/// diagonal algebra, `(1,1)` entry only.
pub fn witness_g(t: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    -0.5 * ((2.0 * t + 2.0 * s2).exp() - 2.0 * (t + 0.5 * s2).exp() + 1.0)
}

/// `g'(t) = −(e^{2t+2σ²} − e^{t+σ²/2})`.
pub fn witness_g1(t: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    -((2.0 * t + 2.0 * s2).exp() - (t + 0.5 * s2).exp())
}

/// `g''(t) = −(2e^{2t+2σ²} − e^{t+σ²/2})`.
pub fn witness_g2(t: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    -(2.0 * (2.0 * t + 2.0 * s2).exp() - (t + 0.5 * s2).exp())
}

/// Exact gradient of the deterministic witness objective in coordinates:
/// `−P_g(D_θ*[exp(θ) − I])`.
pub fn witness_gradient(theta: &AlgebraElement) -> Result<AlgebraElement> {
    check_witness_kind(theta.descriptor())?;
    exp_residual_gradient(theta)
}

/// `−½‖exp(θ) − I‖_F²` on any algebra. On `gl(n)`, `diag(n)` and `sl(n)`
/// this is the deterministic witness objective.
pub fn exp_residual_objective(theta: &AlgebraElement) -> Result<f64> {
    witness_reward(theta.ambient())
}

/// Coordinates-space gradient of [`exp_residual_objective`], returned as an
/// algebra element.
pub fn exp_residual_gradient(theta: &AlgebraElement) -> Result<AlgebraElement> {
    let descriptor = theta.descriptor();
    let a = theta.ambient();
    let n = a.nrows();
    let residual = mat_exp(a)? - DMatrix::<f64>::identity(n, n);
    let ambient_grad = -frechet_adjoint(a, &residual)?;
    let projected = descriptor.project(&ambient_grad)?;
    AlgebraElement::from_matrix(descriptor, &projected)
}

/// The witness bandit as a one-step episodic MDP.
#[derive(Debug, Clone)]
pub struct WitnessBandit {
    descriptor: Arc<AlgebraDescriptor>,
}

impl WitnessBandit {
    pub fn new(descriptor: Arc<AlgebraDescriptor>) -> Result<Self> {
        check_witness_kind(&descriptor)?;
        Ok(Self { descriptor })
    }
}

impl LieGroupMdp for WitnessBandit {
    fn descriptor(&self) -> &Arc<AlgebraDescriptor> {
        &self.descriptor
    }

    fn horizon(&self) -> usize {
        1
    }

    fn reset(&mut self) -> EnvState {
        EnvState { group_elements: Vec::new(), step_index: 0 }
    }

    fn step(&mut self, state: &EnvState, action: &AlgebraElement) -> Result<StepResult> {
        check_action(&self.descriptor, action)?;
        let reward = witness_reward(action.ambient())?;
        let next = EnvState { group_elements: Vec::new(), step_index: state.step_index + 1 };
        Ok(StepResult { next_state: next.clone(), reward, observation: next })
    }
}
