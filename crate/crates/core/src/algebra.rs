//! Matrix Lie algebras with orthonormal bases and closed-form projectors.
//!
//! Every algebra is a linear subspace of `R^{n×n}` with the Frobenius inner
//! product. A descriptor fixes an orthonormal basis `E_1..E_d`, which gives
//! the coordinate isometry `x ↦ Σ_k x_k E_k` between `R^d` and the algebra.
//!
//! Basis ordering:
//!
//! - `so(n)`: index pairs `i < j` in row-major order, `E = (e_i e_jᵀ − e_j e_iᵀ)/√2`.
//! - `sl(n)`: off-diagonal units `e_i e_jᵀ` (`i ≠ j`) in row-major order,
//!   followed by the `n − 1` Helmert diagonals
//!   `(e_1 + … + e_k − k e_{k+1}) / √(k(k+1))`.
//! - `gl(n)`: all units `e_i e_jᵀ` in row-major order.
//! - `diag(n)`: `e_i e_iᵀ`.
//! - `se(3)`: the three rotation generators `hat(e_x)/√2, hat(e_y)/√2,
//!   hat(e_z)/√2` in the top-left block, then the translations `e_i e_4ᵀ`.
//! - `so(3)^J`: per joint, contiguous `hat(e_x)/√2, hat(e_y)/√2, hat(e_z)/√2`
//!   placed in the joint's diagonal 3×3 block.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance for algebra membership in [`AlgebraDescriptor::coords_of`].
pub const MEMBERSHIP_TOL: f64 = 1e-10;

/// The supported real matrix Lie algebras.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlgebraKind {
    /// Skew-symmetric matrices.
    SoN,
    /// Traceless matrices.
    SlN,
    /// Rigid-body twists `[[Ω, v], [0, 0]]` in `R^{4×4}`.
    Se3,
    /// All matrices.
    GlN,
    /// Diagonal matrices; hosts the witness bandit restriction.
    DiagN,
    /// `J` independent `so(3)` blocks on the diagonal of a `3J × 3J` matrix.
    So3Product(usize),
}

impl AlgebraKind {
    /// Whether every element exponentiates to an orthogonal matrix.
    pub fn is_compact(self) -> bool {
        matches!(self, AlgebraKind::SoN | AlgebraKind::So3Product(_))
    }
}

impl fmt::Display for AlgebraKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgebraKind::SoN => write!(f, "so(n)"),
            AlgebraKind::SlN => write!(f, "sl(n)"),
            AlgebraKind::Se3 => write!(f, "se(3)"),
            AlgebraKind::GlN => write!(f, "gl(n)"),
            AlgebraKind::DiagN => write!(f, "diag(n)"),
            AlgebraKind::So3Product(j) => write!(f, "so(3)^{j}"),
        }
    }
}

/// Sparse storage for one basis matrix: `(row, col, value)` triples.
#[derive(Debug, Clone, PartialEq)]
struct SparseBasis(Vec<(usize, usize, f64)>);

/// An algebra together with a fixed orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraDescriptor {
    kind: AlgebraKind,
    n: usize,
    basis: Vec<SparseBasis>,
}

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// `hat(e_axis)/√2` as triples offset to the block starting at `o`.
fn so3_generator(axis: usize, o: usize) -> SparseBasis {
    let (a, b) = match axis {
        0 => (2, 1),
        1 => (0, 2),
        _ => (1, 0),
    };
    SparseBasis(vec![(o + a, o + b, INV_SQRT2), (o + b, o + a, -INV_SQRT2)])
}

/// Builds the descriptor for `kind` with ambient size parameter `n`.
///
/// For [`AlgebraKind::So3Product`] `n` may be given either as the block size
/// 3 or as the full ambient size `3J`; for [`AlgebraKind::Se3`] it must be 4.
pub fn make_descriptor(kind: AlgebraKind, n: usize) -> Result<Arc<AlgebraDescriptor>> {
    AlgebraDescriptor::new(kind, n).map(Arc::new)
}

impl AlgebraDescriptor {
    pub fn new(kind: AlgebraKind, n: usize) -> Result<Self> {
        let unsupported = || Error::Config(format!("unsupported algebra {kind} with n = {n}"));
        let (ambient, basis) = match kind {
            AlgebraKind::SoN => {
                if n < 2 {
                    return Err(unsupported());
                }
                let mut basis = Vec::with_capacity(n * (n - 1) / 2);
                for i in 0..n {
                    for j in (i + 1)..n {
                        basis.push(SparseBasis(vec![(i, j, INV_SQRT2), (j, i, -INV_SQRT2)]));
                    }
                }
                (n, basis)
            }
            AlgebraKind::SlN => {
                if n < 2 {
                    return Err(unsupported());
                }
                let mut basis = Vec::with_capacity(n * n - 1);
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            basis.push(SparseBasis(vec![(i, j, 1.0)]));
                        }
                    }
                }
                for k in 1..n {
                    let scale = 1.0 / ((k * (k + 1)) as f64).sqrt();
                    let mut entries: Vec<_> = (0..k).map(|i| (i, i, scale)).collect();
                    entries.push((k, k, -(k as f64) * scale));
                    basis.push(SparseBasis(entries));
                }
                (n, basis)
            }
            AlgebraKind::GlN => {
                if n < 2 {
                    return Err(unsupported());
                }
                let basis = (0..n).flat_map(|i| (0..n).map(move |j| SparseBasis(vec![(i, j, 1.0)]))).collect();
                (n, basis)
            }
            AlgebraKind::DiagN => {
                if n < 2 {
                    return Err(unsupported());
                }
                (n, (0..n).map(|i| SparseBasis(vec![(i, i, 1.0)])).collect())
            }
            AlgebraKind::Se3 => {
                if n != 4 {
                    return Err(unsupported());
                }
                let mut basis: Vec<_> = (0..3).map(|a| so3_generator(a, 0)).collect();
                basis.extend((0..3).map(|i| SparseBasis(vec![(i, 3, 1.0)])));
                (4, basis)
            }
            AlgebraKind::So3Product(joints) => {
                if joints == 0 || (n != 3 && n != 3 * joints) {
                    return Err(unsupported());
                }
                let basis = (0..joints).flat_map(|j| (0..3).map(move |a| so3_generator(a, 3 * j))).collect();
                (3 * joints, basis)
            }
        };
        Ok(Self { kind, n: ambient, basis })
    }

    pub fn kind(&self) -> AlgebraKind {
        self.kind
    }

    /// Ambient matrix size.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Intrinsic dimension `d_g`.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn is_compact(&self) -> bool {
        self.kind.is_compact()
    }

    /// Dense copy of basis element `k`.
    pub fn basis_matrix(&self, k: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for &(i, j, v) in &self.basis[k].0 {
            m[(i, j)] += v;
        }
        m
    }

    /// All basis elements as dense matrices.
    pub fn basis(&self) -> Vec<DMatrix<f64>> {
        (0..self.dim()).map(|k| self.basis_matrix(k)).collect()
    }

    fn check_square(&self, m: &DMatrix<f64>) -> Result<()> {
        if m.nrows() != self.n || m.ncols() != self.n {
            return Err(Error::Argument(format!(
                "expected {n}×{n} matrix for {kind}, got {r}×{c}",
                n = self.n,
                kind = self.kind,
                r = m.nrows(),
                c = m.ncols()
            )));
        }
        Ok(())
    }

    /// Orthogonal projection onto the algebra using the closed form for the kind.
    pub fn project(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_square(m)?;
        let n = self.n;
        let out = match self.kind {
            AlgebraKind::SoN => (m - m.transpose()) * 0.5,
            AlgebraKind::SlN => {
                let shift = m.trace() / n as f64;
                let mut out = m.clone();
                for i in 0..n {
                    out[(i, i)] -= shift;
                }
                out
            }
            AlgebraKind::GlN => m.clone(),
            AlgebraKind::DiagN => DMatrix::from_diagonal(&m.diagonal()),
            AlgebraKind::Se3 => {
                let mut out = DMatrix::zeros(4, 4);
                for i in 0..3 {
                    for j in 0..3 {
                        out[(i, j)] = 0.5 * (m[(i, j)] - m[(j, i)]);
                    }
                    out[(i, 3)] = m[(i, 3)];
                }
                out
            }
            AlgebraKind::So3Product(joints) => {
                let mut out = DMatrix::zeros(n, n);
                for b in 0..joints {
                    let o = 3 * b;
                    for i in 0..3 {
                        for j in 0..3 {
                            out[(o + i, o + j)] = 0.5 * (m[(o + i, o + j)] - m[(o + j, o + i)]);
                        }
                    }
                }
                out
            }
        };
        Ok(out)
    }

    /// Projection through the basis expansion `Σ_k ⟨M, E_k⟩ E_k`.
    pub fn project_by_basis(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_square(m)?;
        Ok(self.expand(&self.inner_products(m)))
    }

    fn inner_products(&self, m: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.basis.iter().map(|e| e.0.iter().map(|&(i, j, v)| m[(i, j)] * v).sum::<f64>()))
    }

    fn expand(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (e, &xk) in self.basis.iter().zip(x.iter()) {
            for &(i, j, v) in &e.0 {
                m[(i, j)] += xk * v;
            }
        }
        m
    }

    /// `‖M − P(M)‖_F`.
    pub fn membership_residual(&self, m: &DMatrix<f64>) -> Result<f64> {
        Ok((m - self.project(m)?).norm())
    }

    /// Coordinates of `M ∈ g` in the basis.
    ///
    /// Fails when `M` is farther than `1e-10·‖M‖_F` from the algebra.
    pub fn coords_of(&self, m: &DMatrix<f64>) -> Result<DVector<f64>> {
        let residual = self.membership_residual(m)?;
        if residual > MEMBERSHIP_TOL * m.norm() {
            return Err(Error::NotInAlgebra { residual });
        }
        Ok(self.inner_products(m))
    }

    /// The matrix `Σ_k x_k E_k`.
    pub fn matrix_of(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Argument(format!("expected {} coordinates for {}, got {}", self.dim(), self.kind, x.len())));
        }
        Ok(self.expand(x))
    }
}

/// An algebra element carried both as coordinates and as its ambient matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement {
    descriptor: Arc<AlgebraDescriptor>,
    coords: DVector<f64>,
    ambient: DMatrix<f64>,
}

impl AlgebraElement {
    pub fn from_coords(descriptor: &Arc<AlgebraDescriptor>, coords: DVector<f64>) -> Result<Self> {
        let ambient = descriptor.matrix_of(&coords)?;
        Ok(Self { descriptor: Arc::clone(descriptor), coords, ambient })
    }

    /// Checked construction from an ambient matrix.
    pub fn from_matrix(descriptor: &Arc<AlgebraDescriptor>, m: &DMatrix<f64>) -> Result<Self> {
        let coords = descriptor.coords_of(m)?;
        Self::from_coords(descriptor, coords)
    }

    pub fn zero(descriptor: &Arc<AlgebraDescriptor>) -> Self {
        let d = descriptor.dim();
        let n = descriptor.n();
        Self { descriptor: Arc::clone(descriptor), coords: DVector::zeros(d), ambient: DMatrix::zeros(n, n) }
    }

    pub fn descriptor(&self) -> &Arc<AlgebraDescriptor> {
        &self.descriptor
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn ambient(&self) -> &DMatrix<f64> {
        &self.ambient
    }

    /// Frobenius norm, equal to the coordinate 2-norm.
    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }

    /// Coordinates of joint `j` for `so(3)^J` elements.
    pub fn joint(&self, j: usize) -> [f64; 3] {
        let c = &self.coords;
        [c[3 * j], c[3 * j + 1], c[3 * j + 2]]
    }
}

/// Unit-Frobenius-norm element with the largest real eigenvalue.
///
/// `gl(n)` and `diag(n)` give `diag(1, 0, …, 0)`; `sl(n)` gives the traceless
/// diagonal `diag(c_n, −1/√(n(n−1)), …)` with `c_n = √((n−1)/n)`. Compact
/// algebras and `se(3)` have no such element.
pub fn hyperbolic_witness(descriptor: &Arc<AlgebraDescriptor>) -> Result<AlgebraElement> {
    let n = descriptor.n();
    let diagonal: Vec<f64> = match descriptor.kind() {
        AlgebraKind::GlN | AlgebraKind::DiagN => {
            let mut d = vec![0.0; n];
            d[0] = 1.0;
            d
        }
        AlgebraKind::SlN => {
            let nf = n as f64;
            let mut d = vec![-1.0 / (nf * (nf - 1.0)).sqrt(); n];
            d[0] = ((nf - 1.0) / nf).sqrt();
            d
        }
        other => {
            return Err(Error::Unsupported(format!("{other} has no hyperbolic element")));
        }
    };
    let m = DMatrix::from_diagonal(&DVector::from_vec(diagonal));
    AlgebraElement::from_matrix(descriptor, &m)
}

/// `c_n = √((n−1)/n)`, the largest eigenvalue of a unit-norm element of `sl(n)`.
pub fn sl_spectral_ceiling(n: usize) -> f64 {
    ((n as f64 - 1.0) / n as f64).sqrt()
}

/// Blockwise skew-symmetrization of `J` row-major 3×3 blocks stored
/// contiguously in `blocks`, written into `out`. This is the `so(3)^J`
/// projector without the surrounding `3J × 3J` zero padding.
pub fn skew_symmetrize_blocks(blocks: &[f64], out: &mut [f64]) {
    debug_assert_eq!(blocks.len(), out.len());
    debug_assert_eq!(blocks.len() % 9, 0);
    for (b, o) in blocks.chunks_exact(9).zip(out.chunks_exact_mut(9)) {
        let x = 0.5 * (b[7] - b[5]);
        let y = 0.5 * (b[2] - b[6]);
        let z = 0.5 * (b[3] - b[1]);
        o[0] = 0.0;
        o[1] = -z;
        o[2] = y;
        o[3] = z;
        o[4] = 0.0;
        o[5] = -x;
        o[6] = -y;
        o[7] = x;
        o[8] = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    use crate::rng::{normal, stream, Stream};

    fn all_kinds() -> Vec<(AlgebraKind, usize)> {
        vec![
            (AlgebraKind::SoN, 3),
            (AlgebraKind::SoN, 5),
            (AlgebraKind::SlN, 2),
            (AlgebraKind::SlN, 4),
            (AlgebraKind::Se3, 4),
            (AlgebraKind::GlN, 3),
            (AlgebraKind::DiagN, 4),
            (AlgebraKind::So3Product(3), 3),
        ]
    }

    fn random_matrix(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |_, _| normal(rng))
    }

    #[test]
    fn dimensions_match_kind() {
        let expect = |k, n| make_descriptor(k, n).unwrap().dim();
        assert_eq!(expect(AlgebraKind::SoN, 3), 3);
        assert_eq!(expect(AlgebraKind::SoN, 6), 15);
        assert_eq!(expect(AlgebraKind::SlN, 2), 3);
        assert_eq!(expect(AlgebraKind::SlN, 5), 24);
        assert_eq!(expect(AlgebraKind::Se3, 4), 6);
        assert_eq!(expect(AlgebraKind::GlN, 4), 16);
        assert_eq!(expect(AlgebraKind::DiagN, 7), 7);
        assert_eq!(expect(AlgebraKind::So3Product(10), 3), 30);
        assert_eq!(make_descriptor(AlgebraKind::So3Product(10), 30).unwrap().n(), 30);
    }

    #[test]
    fn unsupported_sizes_are_config_errors() {
        for (k, n) in [(AlgebraKind::SoN, 1), (AlgebraKind::Se3, 3), (AlgebraKind::So3Product(0), 3), (AlgebraKind::So3Product(2), 4)] {
            assert!(matches!(make_descriptor(k, n), Err(Error::Config(_))), "{k} {n}");
        }
    }

    #[test]
    fn bases_are_orthonormal_and_inside() {
        for (kind, n) in all_kinds() {
            let d = make_descriptor(kind, n).unwrap();
            let basis = d.basis();
            for (i, ei) in basis.iter().enumerate() {
                assert!(d.membership_residual(ei).unwrap() < 1e-14);
                for (j, ej) in basis.iter().enumerate() {
                    let ip = ei.dot(ej);
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((ip - want).abs() < 1e-12, "{kind}: <E{i},E{j}> = {ip}");
                }
            }
        }
    }

    #[test]
    fn so3_first_generator_is_unit_skew() {
        let d = make_descriptor(AlgebraKind::SoN, 3).unwrap();
        let e0 = d.basis_matrix(0);
        assert!((e0.norm() - 1.0).abs() < 1e-15);
        assert!((&e0 + e0.transpose()).norm() < 1e-15);
        let x = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        assert_eq!(d.matrix_of(&x).unwrap(), e0);
    }

    #[test]
    fn se3_basis_has_zero_bottom_row() {
        let d = make_descriptor(AlgebraKind::Se3, 4).unwrap();
        for e in d.basis() {
            assert!(e.row(3).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn projector_examples() {
        let so3 = make_descriptor(AlgebraKind::SoN, 3).unwrap();
        assert_eq!(so3.project(&DMatrix::identity(3, 3)).unwrap(), DMatrix::zeros(3, 3));
        let k = DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 2.0, 1.0, 0.0, -3.0, -2.0, 3.0, 0.0]);
        assert_eq!(so3.project(&k).unwrap(), k);

        let sl2 = make_descriptor(AlgebraKind::SlN, 2).unwrap();
        let p = sl2.project(&DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0]))).unwrap();
        assert_eq!(p, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0])));
    }

    #[test]
    fn projector_size_mismatch() {
        let d = make_descriptor(AlgebraKind::SoN, 3).unwrap();
        assert!(matches!(d.project(&DMatrix::zeros(4, 4)), Err(Error::Argument(_))));
        assert!(matches!(d.matrix_of(&DVector::zeros(2)), Err(Error::Argument(_))));
    }

    #[test]
    fn closed_form_matches_basis_expansion() {
        let mut rng = stream(11, Stream::Custom(0));
        for (kind, n) in all_kinds() {
            let d = make_descriptor(kind, n).unwrap();
            for _ in 0..100 {
                let m = random_matrix(&mut rng, d.n());
                let a = d.project(&m).unwrap();
                let b = d.project_by_basis(&m).unwrap();
                assert!((a - b).norm() < 1e-10, "{kind}");
            }
        }
    }

    #[test]
    fn coords_roundtrip_and_isometry() {
        let mut rng = stream(12, Stream::Custom(0));
        for (kind, n) in all_kinds() {
            let d = make_descriptor(kind, n).unwrap();
            for _ in 0..100 {
                let x = DVector::from_fn(d.dim(), |_, _| normal(&mut rng));
                let m = d.matrix_of(&x).unwrap();
                assert!((m.norm() - x.norm()).abs() < 1e-12);
                let back = d.coords_of(&m).unwrap();
                assert!((back - &x).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn coords_of_rejects_outside_matrices() {
        let d = make_descriptor(AlgebraKind::SoN, 3).unwrap();
        match d.coords_of(&DMatrix::identity(3, 3)) {
            Err(Error::NotInAlgebra { residual }) => assert!((residual - 3f64.sqrt()).abs() < 1e-12),
            other => panic!("expected NotInAlgebra, got {other:?}"),
        }
    }

    #[test]
    fn witness_elements() {
        let gl3 = make_descriptor(AlgebraKind::GlN, 3).unwrap();
        let h = hyperbolic_witness(&gl3).unwrap();
        assert!((h.norm() - 1.0).abs() < 1e-15);
        assert_eq!(h.ambient()[(0, 0)], 1.0);

        for (n, want) in [(2, std::f64::consts::FRAC_1_SQRT_2), (3, (2.0f64 / 3.0).sqrt())] {
            let sl = make_descriptor(AlgebraKind::SlN, n).unwrap();
            let h = hyperbolic_witness(&sl).unwrap();
            let top = h.ambient().diagonal().max();
            assert!((top - want).abs() < 1e-12);
            assert!((h.ambient().norm() - 1.0).abs() < 1e-12);
            assert!(h.ambient().trace().abs() < 1e-12);
        }

        let so3 = make_descriptor(AlgebraKind::SoN, 3).unwrap();
        assert!(matches!(hyperbolic_witness(&so3), Err(Error::Unsupported(_))));
    }

    #[test]
    fn block_skew_matches_descriptor_projection() {
        let joints = 4;
        let d = make_descriptor(AlgebraKind::So3Product(joints), 3).unwrap();
        let mut rng = stream(13, Stream::Custom(0));
        let m = random_matrix(&mut rng, d.n());
        let full = d.project(&m).unwrap();
        let mut blocks = vec![0.0; 9 * joints];
        for b in 0..joints {
            for i in 0..3 {
                for j in 0..3 {
                    blocks[9 * b + 3 * i + j] = m[(3 * b + i, 3 * b + j)];
                }
            }
        }
        let mut out = vec![0.0; blocks.len()];
        skew_symmetrize_blocks(&blocks, &mut out);
        for b in 0..joints {
            for i in 0..3 {
                for j in 0..3 {
                    assert!((out[9 * b + 3 * i + j] - full[(3 * b + i, 3 * b + j)]).abs() < 1e-15);
                }
            }
        }
    }
}
