//! Matrix exponential, its Fréchet derivative, and smoothness constants.
//!
//! [`mat_exp`] is a scaling-and-squaring Padé approximant (orders 3 to 13,
//! chosen from the 1-norm). [`mat_exp_frechet`] reads `D_A[H]` off the
//! top-right block of `exp([[A, H], [0, A]])`.

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::error::{Error, Result};

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.53939833006323e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0, 2162160.0, 110880.0, 3960.0, 90.0, 1.0];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn check_finite(a: &DMatrix<f64>) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Argument("matrix has non-finite entries".into()))
    }
}

fn check_square(a: &DMatrix<f64>) -> Result<()> {
    if a.is_square() {
        Ok(())
    } else {
        Err(Error::Argument(format!("expected a square matrix, got {}×{}", a.nrows(), a.ncols())))
    }
}

/// Low-order Padé numerator/denominator pieces `(U, V)` with `exp(A) ≈ (V − U)⁻¹(V + U)`.
fn pade_low(a: &DMatrix<f64>, b: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let m = b.len() - 1;
    // Even powers of A up to A^{m-1}.
    let mut powers = vec![ident.clone(), a2.clone()];
    while powers.len() * 2 <= m {
        let next = powers.last().unwrap() * &a2;
        powers.push(next);
    }
    let mut u = DMatrix::zeros(n, n);
    let mut v = DMatrix::zeros(n, n);
    for (k, p) in powers.iter().enumerate() {
        if 2 * k < m {
            u += p * b[2 * k + 1];
        }
        if 2 * k <= m {
            v += p * b[2 * k];
        }
    }
    (a * u, v)
}

fn pade13(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let b = &B13;
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = a * (inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1]);
    let inner_v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];
    (u, v)
}

fn pade_solve(u: DMatrix<f64>, v: DMatrix<f64>) -> DMatrix<f64> {
    let p = &v + &u;
    let q = v - u;
    // Q is well conditioned for the norms admitted by the theta thresholds.
    q.lu().solve(&p).expect("Padé denominator is nonsingular")
}

/// Matrix exponential `exp(A) = Σ_k A^k/k!`.
pub fn mat_exp(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(a)?;
    check_finite(a)?;
    let norm = one_norm(a);
    let low = [(THETA_3, &B3[..]), (THETA_5, &B5[..]), (THETA_7, &B7[..]), (THETA_9, &B9[..])];
    for (theta, b) in low {
        if norm <= theta {
            let (u, v) = pade_low(a, b);
            return Ok(pade_solve(u, v));
        }
    }
    let s = if norm > THETA_13 { (norm / THETA_13).log2().ceil() as i32 } else { 0 };
    let scaled = a * 2f64.powi(-s);
    let (u, v) = pade13(&scaled);
    let mut x = pade_solve(u, v);
    for _ in 0..s {
        x = &x * &x;
    }
    Ok(x)
}

/// `(exp(A), D_A[H])` where `D_A[H] = ∫₀¹ exp((1−t)A) H exp(tA) dt`.
pub fn mat_exp_frechet(a: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_square(a)?;
    if a.shape() != h.shape() {
        return Err(Error::Argument(format!(
            "Fréchet direction is {}×{} but base point is {}×{}",
            h.nrows(),
            h.ncols(),
            a.nrows(),
            a.ncols()
        )));
    }
    check_finite(h)?;
    let n = a.nrows();
    let mut block = DMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(a);
    block.view_mut((n, n), (n, n)).copy_from(a);
    block.view_mut((0, n), (n, n)).copy_from(h);
    let e = mat_exp(&block)?;
    Ok((e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, n)).into_owned()))
}

/// Adjoint of `H ↦ D_A[H]` under the Frobenius inner product.
///
/// Computed as `D_{Aᵀ}[W]`, which satisfies `⟨D_A[H], W⟩ = ⟨H, D_{Aᵀ}[W]⟩`.
pub fn frechet_adjoint(a: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (_, d) = mat_exp_frechet(&a.transpose(), w)?;
    Ok(d)
}

/// `hat(w)`: the skew matrix with `hat(w) v = w × v`.
pub fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Inverse of [`hat`] on the skew part of `m`.
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(0.5 * (m[(2, 1)] - m[(1, 2)]), 0.5 * (m[(0, 2)] - m[(2, 0)]), 0.5 * (m[(1, 0)] - m[(0, 1)]))
}

/// Rodrigues formula for `exp(hat(w))`.
pub fn so3_exp(w: &Vector3<f64>) -> Matrix3<f64> {
    let angle2 = w.norm_squared();
    let k = hat(w);
    let (a, b) = if angle2 < 1e-12 {
        (1.0 - angle2 / 6.0, 0.5 - angle2 / 24.0)
    } else {
        let angle = angle2.sqrt();
        (angle.sin() / angle, (1.0 - angle.cos()) / angle2)
    };
    Matrix3::identity() + k * a + k * k * b
}

/// Rotation vector `w` with `exp(hat(w)) = R` and `|w| ∈ [0, π]`.
///
/// Near the identity a series is used; within `1e-6` of angle π the axis
/// comes from the symmetric part `(R + Rᵀ)/2`.
pub fn so3_log_vec(r: &Matrix3<f64>) -> Result<Vector3<f64>> {
    if !r.iter().all(|v| v.is_finite()) {
        return Err(Error::Argument("rotation has non-finite entries".into()));
    }
    let orth = (r.transpose() * r - Matrix3::identity()).norm();
    if orth > 1e-8 || r.determinant() <= 0.0 {
        return Err(Error::Argument(format!("not a rotation: ‖RᵀR − I‖_F = {orth:.3e}, det = {:.6}", r.determinant())));
    }
    let skew = vee(r);
    let s = skew.norm();
    let c = 0.5 * (r.trace() - 1.0);
    let angle = s.atan2(c);
    if angle < 1e-4 {
        // angle / (2 sin angle) ≈ 1/2 (1 + angle²/6 + 7 angle⁴/360)
        let a2 = angle * angle;
        return Ok(skew * (1.0 + a2 / 6.0 + 7.0 * a2 * a2 / 360.0));
    }
    if std::f64::consts::PI - angle < 1e-6 {
        let sym = (r + r.transpose()) * 0.5;
        let outer = (sym - Matrix3::identity() * c) / (1.0 - c);
        let k = (0..3).max_by(|&i, &j| outer[(i, i)].total_cmp(&outer[(j, j)])).unwrap();
        let mut axis: Vector3<f64> = outer.column(k).into_owned();
        axis /= axis.norm();
        if axis.dot(&skew) < 0.0 {
            axis = -axis;
        }
        return Ok(axis * angle);
    }
    Ok(skew * (angle / s))
}

/// Skew matrix `log(R)` for a rotation `R`.
pub fn so3_log(r: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    so3_log_vec(r).map(|w| hat(&w))
}

/// Constants entering the gradient Lipschitz bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessParams {
    pub r_max: f64,
    pub b_phi: f64,
    pub b_a: f64,
    /// Concentrability constant; a configured input, never estimated.
    pub c_d: f64,
    pub gamma: f64,
    pub sigma: f64,
    /// Parameter radius `R₀`.
    pub radius: f64,
    pub n: usize,
    pub compact: bool,
}

impl SmoothnessParams {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        for (name, v) in [("r_max", self.r_max), ("b_phi", self.b_phi), ("b_a", self.b_a), ("c_d", self.c_d), ("sigma", self.sigma)] {
            if !(v > 0.0 && v.is_finite()) {
                bad.push(format!("{name} must be positive and finite (got {v})"));
            }
        }
        if !(0.0..1.0).contains(&self.gamma) {
            bad.push(format!("gamma must lie in [0, 1) (got {})", self.gamma));
        }
        if !(self.radius >= 0.0) {
            bad.push(format!("radius must be nonnegative (got {})", self.radius));
        }
        if self.n == 0 {
            bad.push("n must be positive".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }

    /// `4 R_max B_Φ B_a C_d / ((1−γ)³ σ²)`.
    pub fn prefactor(&self) -> f64 {
        4.0 * self.r_max * self.b_phi * self.b_a * self.c_d / ((1.0 - self.gamma).powi(3) * self.sigma * self.sigma)
    }

    /// The exponential factor: `2 + √n` for compact algebras, `n e^{2R₀}` otherwise.
    ///
    /// The compact constant is used as stated in the source bound; its
    /// additive 2 is not derived there.
    pub fn exp_factor(&self) -> f64 {
        let n = self.n as f64;
        if self.compact {
            2.0 + n.sqrt()
        } else {
            n * (2.0 * self.radius).exp()
        }
    }
}

/// Gradient Lipschitz bound `prefactor · L_exp(R₀)`.
pub fn theoretical_lipschitz(p: &SmoothnessParams) -> Result<f64> {
    p.validate()?;
    Ok(p.prefactor() * p.exp_factor())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{normal, stream, Stream};
    use rand::Rng;

    fn random(rng: &mut impl Rng, n: usize, scale: f64) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| normal(rng));
        let norm = m.norm();
        m * (scale / norm)
    }

    /// Taylor series on `A/2^s` with `‖A/2^s‖ ≤ 1/2`, squared back up.
    /// Used as an independent reference.
    fn taylor_exp(a: &DMatrix<f64>) -> DMatrix<f64> {
        let n = a.nrows();
        let mut s = 0;
        while a.norm() / 2f64.powi(s) > 0.5 {
            s += 1;
        }
        let b = a / 2f64.powi(s);
        let mut term = DMatrix::identity(n, n);
        let mut sum = term.clone();
        for k in 1..60 {
            term = &term * &b / k as f64;
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn exp_of_zero_and_diagonal() {
        assert_eq!(mat_exp(&DMatrix::zeros(3, 3)).unwrap(), DMatrix::identity(3, 3));
        let e = mat_exp(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 0.0]))).unwrap();
        assert!((e[(0, 0)] - std::f64::consts::E).abs() < 1e-14);
        assert!((e[(1, 1)] - 1.0).abs() < 1e-15);
        assert!(e[(0, 1)].abs() < 1e-15 && e[(1, 0)].abs() < 1e-15);
    }

    #[test]
    fn exp_quarter_turn() {
        let t = std::f64::consts::FRAC_PI_2;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -t, t, 0.0]);
        let e = mat_exp(&a).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!((e - want).norm() < 1e-14);
    }

    #[test]
    fn exp_matches_taylor_across_norms() {
        let mut rng = stream(1, Stream::Custom(1));
        for scale in [1e-3, 0.1, 0.5, 1.5, 3.0, 6.0, 10.0] {
            for n in [2, 4, 7] {
                let a = random(&mut rng, n, scale);
                let e = mat_exp(&a).unwrap();
                let r = taylor_exp(&a);
                assert!((&e - &r).norm() <= 1e-12 * r.norm(), "scale {scale} n {n}");
            }
        }
    }

    #[test]
    fn exp_rejects_non_finite() {
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 1)] = f64::NAN;
        assert!(matches!(mat_exp(&a), Err(Error::Argument(_))));
    }

    #[test]
    fn skew_exponentials_are_rotations() {
        let mut rng = stream(2, Stream::Custom(1));
        for _ in 0..20 {
            let m = random(&mut rng, 5, 4.0);
            let k = (&m - m.transpose()) * 0.5;
            let e = mat_exp(&k).unwrap();
            assert!((e.transpose() * &e - DMatrix::identity(5, 5)).norm() < 1e-10);
            assert!((e.determinant() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn frechet_trivial_cases() {
        let mut rng = stream(3, Stream::Custom(1));
        let h = random(&mut rng, 3, 1.0);
        let (e, d) = mat_exp_frechet(&DMatrix::zeros(3, 3), &h).unwrap();
        assert!((e - DMatrix::identity(3, 3)).norm() < 1e-15);
        assert!((d - &h).norm() < 1e-14);
        let a = random(&mut rng, 3, 1.0);
        let (_, d0) = mat_exp_frechet(&a, &DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(d0.norm(), 0.0);
    }

    #[test]
    fn frechet_shape_mismatch() {
        let r = mat_exp_frechet(&DMatrix::zeros(3, 3), &DMatrix::zeros(2, 2));
        assert!(matches!(r, Err(Error::Argument(_))));
        assert!(matches!(frechet_adjoint(&DMatrix::zeros(3, 3), &DMatrix::zeros(2, 3)), Err(Error::Argument(_))));
    }

    #[test]
    fn frechet_norm_bound() {
        let mut rng = stream(4, Stream::Custom(1));
        for _ in 0..50 {
            let n = 4;
            let scale = rng.random_range(0.0..2.0);
            let a = random(&mut rng, n, scale);
            let h = random(&mut rng, n, 1.0);
            let (_, d) = mat_exp_frechet(&a, &h).unwrap();
            let bound = (n as f64).sqrt() * a.norm().exp() * h.norm();
            assert!(d.norm() <= bound);
        }
    }

    #[test]
    fn adjoint_for_diagonal_base_uses_divided_differences() {
        let diag = [0.3, -1.2, 0.3, 2.0];
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag.to_vec()));
        let mut rng = stream(5, Stream::Custom(1));
        let w = random(&mut rng, 4, 2.0);
        let adj = frechet_adjoint(&a, &w).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let (ai, aj) = (diag[i], diag[j]);
                let dd = if (ai - aj).abs() < 1e-14 { ai.exp() } else { (ai.exp() - aj.exp()) / (ai - aj) };
                assert!((adj[(i, j)] - w[(i, j)] * dd).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn adjoint_at_zero_is_identity() {
        let mut rng = stream(6, Stream::Custom(1));
        let w = random(&mut rng, 3, 1.0);
        assert!((frechet_adjoint(&DMatrix::zeros(3, 3), &w).unwrap() - &w).norm() < 1e-14);
    }

    #[test]
    fn so3_log_identity_and_quarter_turn() {
        assert_eq!(so3_log(&Matrix3::identity()).unwrap(), Matrix3::zeros());
        let r = so3_exp(&Vector3::new(0.0, 0.0, std::f64::consts::FRAC_PI_2));
        let l = so3_log(&r).unwrap();
        assert!((l.norm() - std::f64::consts::FRAC_PI_2 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn so3_log_roundtrip_including_near_pi() {
        let mut rng = stream(7, Stream::Custom(1));
        for _ in 0..200 {
            let axis = Vector3::new(normal(&mut rng), normal(&mut rng), normal(&mut rng)).normalize();
            for angle in [1e-9, 1e-5, 0.3, 2.0, 3.0, std::f64::consts::PI - 1e-7, std::f64::consts::PI] {
                let r = so3_exp(&(axis * angle));
                let w = so3_log_vec(&r).unwrap();
                assert!(w.norm() <= std::f64::consts::PI + 1e-12);
                assert!((so3_exp(&w) - r).norm() < 1e-8, "angle {angle}");
                if angle < 3.0 {
                    assert!((w - axis * angle).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn so3_log_rejects_non_rotations() {
        assert!(so3_log(&(Matrix3::identity() * 2.0)).is_err());
        assert!(so3_log(&Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0))).is_err());
    }

    #[test]
    fn so3_exp_matches_general_exp() {
        let w = Vector3::new(0.4, -1.3, 2.2);
        let k = hat(&w);
        let general = mat_exp(&DMatrix::from_column_slice(3, 3, k.as_slice())).unwrap();
        let fast = so3_exp(&w);
        assert!((general - DMatrix::from_column_slice(3, 3, fast.as_slice())).norm() < 1e-13);
    }

    fn params(compact: bool, radius: f64, gamma: f64) -> SmoothnessParams {
        SmoothnessParams { r_max: 1.0, b_phi: 1.0, b_a: 0.3, c_d: 2.0, gamma, sigma: 0.1, radius, n: 3, compact }
    }

    #[test]
    fn lipschitz_compact_is_radius_free() {
        let a = theoretical_lipschitz(&params(true, 1.0, 0.9)).unwrap();
        let b = theoretical_lipschitz(&params(true, 10.0, 0.9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lipschitz_noncompact_grows_by_e_squared() {
        let a = theoretical_lipschitz(&params(false, 1.5, 0.5)).unwrap();
        let b = theoretical_lipschitz(&params(false, 2.5, 0.5)).unwrap();
        assert!((b / a - std::f64::consts::E.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_diverges_as_gamma_approaches_one() {
        let mut last = 0.0;
        for gamma in [0.0, 0.5, 0.9, 0.99, 0.999, 0.9999] {
            let l = theoretical_lipschitz(&params(true, 1.0, gamma)).unwrap();
            assert!(l > last);
            last = l;
        }
        assert!(last > 1e12);
    }

    #[test]
    fn invalid_params_list_all_violations() {
        let mut p = params(true, 1.0, 1.0);
        p.sigma = 0.0;
        match theoretical_lipschitz(&p) {
            Err(Error::Config(msg)) => {
                assert!(msg.contains("sigma") && msg.contains("gamma"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }
}
