//! Gaussian policies whose mean lives in a matrix Lie algebra.
//!
//! A [`GaussianLiePolicy`] has mean `μ_θ(s) = Σ_k θ_k Φ_k(s)` and adds
//! coordinate noise `ξ ~ N(0, σ² diag(s_i²))`, where the per-coordinate
//! multipliers `s_i` default to one. The score with respect to `θ` is
//! `M(s)ᵀ Σ⁻¹ (x − m)` with `M(s)` the feature coordinates, which reduces to
//! `(1/σ²)⟨a − μ, Φ_k⟩_F` in the isotropic case.
//!
//! [`AmbientPolicy`] is the over-parameterized baseline: weights in
//! `R^{factor·d}` mapped to algebra coordinates by a fixed random matrix.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::algebra::{AlgebraDescriptor, AlgebraElement, AlgebraKind};
use crate::envs::{AnisotropyMode, EnvState};
use crate::error::{Error, Result};
use crate::rng::{normal, stream, Stream};

/// Default clip bound in units of the exploration scale.
pub const DEFAULT_CLIP_MULTIPLIER: f64 = 3.0;
/// Resampling attempts per clip block before giving up on the bound.
const MAX_REJECTIONS: usize = 10_000;

/// Maps a state to the algebra coordinates of its features.
pub trait FeatureMap: Send + Sync + std::fmt::Debug {
    /// Matrix whose column `k` holds the coordinates of `Φ_k(s)`.
    fn feature_coords(&self, state: &EnvState) -> DMatrix<f64>;
    /// Number of features (policy parameters).
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// True when `feature_coords` is the identity for every state.
    fn is_identity(&self) -> bool {
        false
    }
}

/// `Φ_k(s) = E_k`, the orthonormal basis itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstantBasis {
    pub dim: usize,
}

impl FeatureMap for ConstantBasis {
    fn feature_coords(&self, _state: &EnvState) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim)
    }

    fn len(&self) -> usize {
        self.dim
    }

    fn is_identity(&self) -> bool {
        true
    }
}

/// Interface shared by the policies the optimizers train.
pub trait Policy: Clone + Send + Sync {
    fn descriptor(&self) -> &Arc<AlgebraDescriptor>;
    /// Trainable parameters.
    fn params(&self) -> &DVector<f64>;
    fn set_params(&mut self, params: DVector<f64>) -> Result<()>;
    fn mean_action(&self, state: &EnvState) -> AlgebraElement;
    fn sample_action<R: Rng + ?Sized>(&self, state: &EnvState, rng: &mut R) -> AlgebraElement;
    /// `∇_params log π(a|s)` of the unclipped Gaussian density.
    fn score(&self, state: &EnvState, action: &AlgebraElement) -> DVector<f64>;
    /// Unclipped log-density, up to the normalizing constant.
    fn log_density(&self, state: &EnvState, action: &AlgebraElement) -> f64;
}

/// Gaussian exploration in algebra coordinates with optional per-block clipping.
#[derive(Debug, Clone, PartialEq)]
struct Exploration {
    sigma: f64,
    scales: DVector<f64>,
    clip_multiplier: f64,
    block: usize,
}

impl Exploration {
    fn new(descriptor: &AlgebraDescriptor, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be > 0 (got {sigma})")));
        }
        let d = descriptor.dim();
        // Rotation joints are clipped independently, anything else as one vector.
        let block = match descriptor.kind() {
            AlgebraKind::So3Product(_) => 3,
            _ => d,
        };
        Ok(Self { sigma, scales: DVector::from_element(d, 1.0), clip_multiplier: DEFAULT_CLIP_MULTIPLIER, block })
    }

    fn std(&self, i: usize) -> f64 {
        self.sigma * self.scales[i]
    }

    /// One noise draw; each block is resampled until its whitened norm is
    /// within the clip bound.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let d = self.scales.len();
        let mut z = DVector::zeros(d);
        let bound2 = self.clip_multiplier * self.clip_multiplier;
        let mut start = 0;
        while start < d {
            let end = (start + self.block).min(d);
            for _ in 0..MAX_REJECTIONS {
                let mut norm2 = 0.0;
                for i in start..end {
                    z[i] = normal(rng);
                    norm2 += z[i] * z[i];
                }
                if norm2 <= bound2 {
                    break;
                }
            }
            start = end;
        }
        DVector::from_fn(d, |i, _| z[i] * self.std(i))
    }

    /// `Σ⁻¹ (x − m)`.
    fn whiten(&self, diff: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(diff.len(), |i, _| diff[i] / (self.std(i) * self.std(i)))
    }

    fn log_density(&self, diff: &DVector<f64>) -> f64 {
        -0.5 * (0..diff.len()).map(|i| (diff[i] / self.std(i)).powi(2)).sum::<f64>()
    }
}

/// The Lie-algebraic Gaussian policy.
#[derive(Debug, Clone)]
pub struct GaussianLiePolicy {
    descriptor: Arc<AlgebraDescriptor>,
    theta: DVector<f64>,
    features: Arc<dyn FeatureMap>,
    exploration: Exploration,
}

impl GaussianLiePolicy {
    /// Constant-basis policy at `θ = 0`.
    pub fn new(descriptor: &Arc<AlgebraDescriptor>, sigma: f64) -> Result<Self> {
        let features = Arc::new(ConstantBasis { dim: descriptor.dim() });
        Self::with_features(descriptor, features, sigma)
    }

    pub fn with_features(descriptor: &Arc<AlgebraDescriptor>, features: Arc<dyn FeatureMap>, sigma: f64) -> Result<Self> {
        let exploration = Exploration::new(descriptor, sigma)?;
        Ok(Self { descriptor: descriptor.clone(), theta: DVector::zeros(features.len()), features, exploration })
    }

    pub fn with_theta(mut self, theta: DVector<f64>) -> Result<Self> {
        self.set_params(theta)?;
        Ok(self)
    }

    /// Sets the clip multiplier; `f64::INFINITY` disables clipping.
    pub fn with_clip(mut self, clip_multiplier: f64) -> Result<Self> {
        if !(clip_multiplier > 0.0) {
            return Err(Error::Config(format!("clip_multiplier must be > 0 (got {clip_multiplier})")));
        }
        self.exploration.clip_multiplier = clip_multiplier;
        Ok(self)
    }

    pub fn with_anisotropy(mut self, mode: AnisotropyMode) -> Result<Self> {
        self.exploration.scales = mode.scales(self.descriptor.dim())?;
        Ok(self)
    }

    pub fn sigma(&self) -> f64 {
        self.exploration.sigma
    }

    pub fn clip_multiplier(&self) -> f64 {
        self.exploration.clip_multiplier
    }

    /// Per-coordinate exploration standard deviations.
    pub fn exploration_std(&self) -> DVector<f64> {
        DVector::from_fn(self.descriptor.dim(), |i, _| self.exploration.std(i))
    }

    /// Exact Fisher information `MᵀΣ⁻¹M` at `state`.
    pub fn exact_fisher(&self, state: &EnvState) -> DMatrix<f64> {
        let m = self.features.feature_coords(state);
        let w = DMatrix::from_diagonal(&DVector::from_fn(m.nrows(), |i, _| 1.0 / self.exploration.std(i).powi(2)));
        m.transpose() * w * m
    }

    fn mean_coords(&self, state: &EnvState) -> DVector<f64> {
        if self.features.is_identity() {
            self.theta.clone()
        } else {
            self.features.feature_coords(state) * &self.theta
        }
    }

    fn diff(&self, state: &EnvState, action: &AlgebraElement) -> DVector<f64> {
        action.coords() - self.mean_coords(state)
    }
}

impl Policy for GaussianLiePolicy {
    fn descriptor(&self) -> &Arc<AlgebraDescriptor> {
        &self.descriptor
    }

    fn params(&self) -> &DVector<f64> {
        &self.theta
    }

    fn set_params(&mut self, params: DVector<f64>) -> Result<()> {
        if params.len() != self.features.len() {
            return Err(Error::Argument(format!("expected {} parameters, got {}", self.features.len(), params.len())));
        }
        self.theta = params;
        Ok(())
    }

    fn mean_action(&self, state: &EnvState) -> AlgebraElement {
        AlgebraElement::from_coords(&self.descriptor, self.mean_coords(state)).expect("feature dimension matches algebra")
    }

    fn sample_action<R: Rng + ?Sized>(&self, state: &EnvState, rng: &mut R) -> AlgebraElement {
        let coords = self.mean_coords(state) + self.exploration.sample(rng);
        AlgebraElement::from_coords(&self.descriptor, coords).expect("dimension fixed at construction")
    }

    fn score(&self, state: &EnvState, action: &AlgebraElement) -> DVector<f64> {
        let w = self.exploration.whiten(&self.diff(state, action));
        if self.features.is_identity() {
            w
        } else {
            self.features.feature_coords(state).transpose() * w
        }
    }

    fn log_density(&self, state: &EnvState, action: &AlgebraElement) -> f64 {
        self.exploration.log_density(&self.diff(state, action))
    }
}

/// Over-parameterized baseline: `μ = P w` with a fixed random `P`.
#[derive(Debug, Clone)]
pub struct AmbientPolicy {
    descriptor: Arc<AlgebraDescriptor>,
    weights: DVector<f64>,
    projection: Arc<DMatrix<f64>>,
    exploration: Exploration,
}

impl AmbientPolicy {
    /// Projection entries are i.i.d. `N(0, 1/d_source)` drawn from `seed`.
    pub fn new(descriptor: &Arc<AlgebraDescriptor>, factor: usize, sigma: f64, seed: u64) -> Result<Self> {
        if factor == 0 {
            return Err(Error::Config("ambient factor must be ≥ 1".into()));
        }
        let d = descriptor.dim();
        let source = factor * d;
        let mut rng = stream(seed, Stream::Projection);
        let scale = 1.0 / (source as f64).sqrt();
        let projection = DMatrix::from_fn(d, source, |_, _| scale * normal(&mut rng));
        Self::with_projection(descriptor, projection, sigma)
    }

    pub fn with_projection(descriptor: &Arc<AlgebraDescriptor>, projection: DMatrix<f64>, sigma: f64) -> Result<Self> {
        if projection.nrows() != descriptor.dim() {
            return Err(Error::Argument(format!("projection has {} rows, algebra dimension is {}", projection.nrows(), descriptor.dim())));
        }
        let exploration = Exploration::new(descriptor, sigma)?;
        Ok(Self {
            descriptor: descriptor.clone(),
            weights: DVector::zeros(projection.ncols()),
            projection: Arc::new(projection),
            exploration,
        })
    }

    pub fn projection(&self) -> &DMatrix<f64> {
        &self.projection
    }

    fn mean_coords(&self) -> DVector<f64> {
        &*self.projection * &self.weights
    }
}

impl Policy for AmbientPolicy {
    fn descriptor(&self) -> &Arc<AlgebraDescriptor> {
        &self.descriptor
    }

    fn params(&self) -> &DVector<f64> {
        &self.weights
    }

    fn set_params(&mut self, params: DVector<f64>) -> Result<()> {
        if params.len() != self.weights.len() {
            return Err(Error::Argument(format!("expected {} weights, got {}", self.weights.len(), params.len())));
        }
        self.weights = params;
        Ok(())
    }

    fn mean_action(&self, _state: &EnvState) -> AlgebraElement {
        AlgebraElement::from_coords(&self.descriptor, self.mean_coords()).expect("projection rows match algebra")
    }

    fn sample_action<R: Rng + ?Sized>(&self, _state: &EnvState, rng: &mut R) -> AlgebraElement {
        let coords = self.mean_coords() + self.exploration.sample(rng);
        AlgebraElement::from_coords(&self.descriptor, coords).expect("projection rows match algebra")
    }

    fn score(&self, _state: &EnvState, action: &AlgebraElement) -> DVector<f64> {
        let w = self.exploration.whiten(&(action.coords() - self.mean_coords()));
        self.projection.transpose() * w
    }

    fn log_density(&self, _state: &EnvState, action: &AlgebraElement) -> f64 {
        self.exploration.log_density(&(action.coords() - self.mean_coords()))
    }
}
