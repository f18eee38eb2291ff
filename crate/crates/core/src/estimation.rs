//! Policy-gradient and Fisher estimation, plus the alignment diagnostics.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::algebra::AlgebraElement;
use crate::envs::{EnvState, LieGroupMdp};
use crate::error::{Error, Result};
use crate::policy::Policy;

/// Relative ridge added to Fisher estimates: `RIDGE · tr(F)/d · I`.
pub const RIDGE: f64 = 1e-8;
/// Advantages with a smaller batch standard deviation are treated as zero.
pub const ADVANTAGE_STD_FLOOR: f64 = 1e-8;

/// One episode. `states[t]` is the observation the action `actions[t]` was
/// drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<EnvState>,
    pub actions: Vec<AlgebraElement>,
    pub rewards: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    fn check(&self) -> Result<()> {
        if self.states.len() != self.rewards.len() || self.actions.len() != self.rewards.len() {
            return Err(Error::Argument("trajectory lists have different lengths".into()));
        }
        if let Some(r) = self.rewards.iter().find(|r| !r.is_finite()) {
            return Err(Error::Argument(format!("non-finite reward {r}")));
        }
        Ok(())
    }
}

/// Runs one episode of `policy` in `env`.
pub fn rollout<E, P, R>(env: &mut E, policy: &P, rng: &mut R) -> Result<Trajectory>
where
    E: LieGroupMdp + ?Sized,
    P: Policy,
    R: Rng + ?Sized,
{
    let horizon = env.horizon();
    let mut traj =
        Trajectory { states: Vec::with_capacity(horizon), actions: Vec::with_capacity(horizon), rewards: Vec::with_capacity(horizon) };
    let mut state = env.reset();
    let mut observation = state.clone();
    for _ in 0..horizon {
        let action = policy.sample_action(&observation, rng);
        let out = env.step(&state, &action)?;
        traj.states.push(observation);
        traj.actions.push(action);
        traj.rewards.push(out.reward);
        state = out.next_state;
        observation = out.observation;
    }
    Ok(traj)
}

/// Discounted returns-to-go `G_t = Σ_{k≥t} γ^{k−t} r_k`.
pub fn returns_to_go(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

/// Normalized advantages for every `(episode, step)`.
///
/// Returns-to-go are centred by their mean across episodes at the same time
/// step, then scaled by the batch standard deviation of the centred values.
/// A batch whose spread is below the floor yields all-zero advantages.
pub fn normalized_advantages(trajectories: &[Trajectory], gamma: f64) -> Result<Vec<Vec<f64>>> {
    if trajectories.is_empty() {
        return Err(Error::Argument("empty trajectory batch".into()));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Argument(format!("gamma must lie in [0, 1] (got {gamma})")));
    }
    for t in trajectories {
        t.check()?;
    }
    let mut adv: Vec<Vec<f64>> = trajectories.iter().map(|t| returns_to_go(&t.rewards, gamma)).collect();
    let horizon = adv.iter().map(Vec::len).max().unwrap_or(0);
    for step in 0..horizon {
        let (sum, count) = adv.iter().filter_map(|a| a.get(step)).fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        let mean = sum / count as f64;
        for a in adv.iter_mut() {
            if let Some(v) = a.get_mut(step) {
                *v -= mean;
            }
        }
    }
    let n: usize = adv.iter().map(Vec::len).sum();
    let var = adv.iter().flatten().map(|v| v * v).sum::<f64>() / n.max(1) as f64;
    let std = var.sqrt();
    for v in adv.iter_mut().flatten() {
        *v = if std < ADVANTAGE_STD_FLOOR { 0.0 } else { *v / std };
    }
    Ok(adv)
}

/// REINFORCE estimate: the mean over all steps of normalized advantage times score.
pub fn reinforce_gradient<P: Policy>(policy: &P, trajectories: &[Trajectory], gamma: f64) -> Result<DVector<f64>> {
    let adv = normalized_advantages(trajectories, gamma)?;
    let mut g = DVector::zeros(policy.params().len());
    let mut n = 0usize;
    for (traj, a) in trajectories.iter().zip(&adv) {
        for ((s, action), &w) in traj.states.iter().zip(&traj.actions).zip(a) {
            n += 1;
            if w != 0.0 {
                g.axpy(w, &policy.score(s, action), 1.0);
            }
        }
    }
    if n == 0 {
        return Err(Error::Argument("trajectory batch has no steps".into()));
    }
    Ok(g / n as f64)
}

/// Every score in the batch, in trajectory order.
pub fn batch_scores<P: Policy>(policy: &P, trajectories: &[Trajectory]) -> Vec<DVector<f64>> {
    trajectories.iter().flat_map(|t| t.states.iter().zip(&t.actions).map(|(s, a)| policy.score(s, a))).collect()
}

/// Spectral summary of a Fisher matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherStats {
    /// `λ_max / max(λ_min, floor)`.
    pub kappa: f64,
    /// `‖F − λ̄I‖_F / ‖F‖_F` with `λ̄ = tr(F)/d`.
    pub epsilon_f: f64,
    /// Participation ratio `(Σλ)² / Σλ²`.
    pub effective_rank: f64,
    /// True when `λ_min` fell below the ridge floor.
    pub floor_hit: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FisherEstimate {
    /// Symmetrized mean of score outer products, ridge included.
    pub matrix: DMatrix<f64>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub kappa: f64,
    pub epsilon_f: f64,
    pub effective_rank: f64,
    pub sample_count: usize,
    pub floor_hit: bool,
    /// Fewer samples than dimensions; the ridge dominates the small eigenvalues.
    pub undersampled: bool,
}

fn ascending_eigenvalues(f: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(f.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn stats_from_eigenvalues(f: &DMatrix<f64>, eigenvalues: &[f64]) -> Result<FisherStats> {
    let d = f.nrows();
    if d == 0 {
        return Err(Error::Argument("empty Fisher matrix".into()));
    }
    let trace = f.trace();
    let mean = trace / d as f64;
    let floor = (RIDGE * mean).max(f64::MIN_POSITIVE);
    let lam_min = eigenvalues[0];
    let lam_max = eigenvalues[d - 1];
    if lam_max <= 0.0 {
        return Err(Error::Argument("Fisher matrix has no positive eigenvalue".into()));
    }
    let floor_hit = lam_min < floor;
    let kappa = lam_max / lam_min.max(floor);
    let fnorm = f.norm();
    let epsilon_f = (f - DMatrix::<f64>::identity(d, d) * mean).norm() / fnorm;
    let clamped: Vec<f64> = eigenvalues.iter().map(|l| l.max(0.0)).collect();
    let s1: f64 = clamped.iter().sum();
    let s2: f64 = clamped.iter().map(|l| l * l).sum();
    Ok(FisherStats { kappa, epsilon_f, effective_rank: s1 * s1 / s2, floor_hit })
}

/// Statistics of a symmetric PSD matrix.
pub fn fisher_stats(f: &DMatrix<f64>) -> Result<FisherStats> {
    if !f.is_square() {
        return Err(Error::Argument(format!("Fisher matrix must be square, got {}×{}", f.nrows(), f.ncols())));
    }
    stats_from_eigenvalues(f, &ascending_eigenvalues(f))
}

/// Fisher estimate from precomputed score vectors.
pub fn fisher_from_scores(scores: &[DVector<f64>]) -> Result<FisherEstimate> {
    let first = scores.first().ok_or_else(|| Error::Argument("no score samples".into()))?;
    let d = first.len();
    let mut f = DMatrix::<f64>::zeros(d, d);
    for s in scores {
        if s.len() != d {
            return Err(Error::Argument("score vectors have different lengths".into()));
        }
        f.ger(1.0, s, s, 1.0);
    }
    f /= scores.len() as f64;
    let f = (&f + f.transpose()) * 0.5;
    let ridge = RIDGE * f.trace() / d as f64;
    let f = f + DMatrix::<f64>::identity(d, d) * ridge;
    let eigenvalues = ascending_eigenvalues(&f);
    let stats = stats_from_eigenvalues(&f, &eigenvalues)?;
    Ok(FisherEstimate {
        matrix: f,
        eigenvalues,
        kappa: stats.kappa,
        epsilon_f: stats.epsilon_f,
        effective_rank: stats.effective_rank,
        sample_count: scores.len(),
        floor_hit: stats.floor_hit,
        undersampled: scores.len() < d,
    })
}

/// Mean of score outer products over on-policy `(state, action)` pairs.
pub fn estimate_fisher<P: Policy>(policy: &P, samples: &[(EnvState, AlgebraElement)]) -> Result<FisherEstimate> {
    let scores: Vec<_> = samples.iter().map(|(s, a)| policy.score(s, a)).collect();
    fisher_from_scores(&scores)
}

/// Worst-case cosine `2√κ/(κ+1)` between `g` and `F⁻¹g`.
pub fn kantorovich_bound(kappa: f64) -> Result<f64> {
    if !(kappa >= 1.0) {
        return Err(Error::Argument(format!("kappa must be ≥ 1 (got {kappa})")));
    }
    if kappa.is_infinite() {
        return Ok(0.0);
    }
    Ok(2.0 * kappa.sqrt() / (kappa + 1.0))
}

/// Solves `F v = g` by Cholesky, retrying once with the ridge floor added.
pub fn spd_solve(f: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(chol) = f.clone().cholesky() {
        return Some(chol.solve(g));
    }
    let d = f.nrows();
    let ridge = RIDGE * f.trace().abs().max(f64::MIN_POSITIVE) / d as f64;
    (f + DMatrix::<f64>::identity(d, d) * ridge).cholesky().map(|c| c.solve(g))
}

/// Cosine between `g` and the natural-gradient direction `F⁻¹g`.
pub fn alignment(g: &DVector<f64>, f: &DMatrix<f64>) -> Result<f64> {
    if f.nrows() != g.len() || !f.is_square() {
        return Err(Error::Argument(format!("gradient length {} does not match Fisher {}×{}", g.len(), f.nrows(), f.ncols())));
    }
    let gn = g.norm();
    if gn == 0.0 {
        return Err(Error::ZeroGradient);
    }
    let v = spd_solve(f, g).ok_or_else(|| Error::Argument("Fisher matrix is not positive definite".into()))?;
    Ok((v.dot(g) / (v.norm() * gn)).clamp(-1.0, 1.0))
}

/// Largest off-block entry over the mean diagonal entry, for `J` blocks of 3.
pub fn block_structure_check(f: &DMatrix<f64>, joints: usize) -> Result<f64> {
    if f.nrows() != 3 * joints || f.ncols() != 3 * joints {
        return Err(Error::Argument(format!("expected a {0}×{0} matrix for J = {joints}, got {1}×{2}", 3 * joints, f.nrows(), f.ncols())));
    }
    let mean_diag = f.trace() / f.nrows() as f64;
    let mut worst: f64 = 0.0;
    for i in 0..f.nrows() {
        for j in 0..f.ncols() {
            if i / 3 != j / 3 {
                worst = worst.max(f[(i, j)].abs());
            }
        }
    }
    Ok(worst / mean_diag)
}
