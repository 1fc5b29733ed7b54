//! Truncated Laurent loops of 2x2 complex matrices and the su(2) dictionary.
//!
//! A loop is stored as a contiguous run of coefficients `A_n` for
//! `n = lo..=hi`. Products are hard-truncated to `[-n_trunc, n_trunc]` and the
//! discarded mass is kept on the result.

use nalgebra::{Matrix2, Vector3};
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;
pub type Mat2 = Matrix2<C64>;

pub const IM: C64 = C64::new(0.0, 1.0);
const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LoopError {
    #[error("spectral parameter must be nonzero")]
    ZeroSpectralParameter,
    #[error("loop is not twisted: off-pattern entry of size {violation:e} at power {power}")]
    NotTwisted { power: i32, violation: f64 },
    #[error("matrix is not in su(2): defect {defect:e}")]
    NotSu2 { defect: f64 },
    #[error("loop has no coefficients")]
    Empty,
}

/// `e1 = 1/2 [[0,-i],[-i,0]]`.
pub fn e1() -> Mat2 {
    Mat2::new(ZERO, -IM * 0.5, -IM * 0.5, ZERO)
}

/// `e2 = 1/2 [[0,1],[-1,0]]`.
pub fn e2() -> Mat2 {
    Mat2::new(ZERO, ONE * 0.5, -ONE * 0.5, ZERO)
}

/// `e3 = 1/2 [[i,0],[0,-i]]`.
pub fn e3() -> Mat2 {
    Mat2::new(IM * 0.5, ZERO, ZERO, -IM * 0.5)
}

pub fn basis() -> [Mat2; 3] {
    [e1(), e2(), e3()]
}

pub fn mat_norm(m: &Mat2) -> f64 {
    m.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

pub fn det2(m: &Mat2) -> C64 {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

/// Inverse through the adjugate; callers guarantee `det != 0`.
pub fn inv2(m: &Mat2) -> Mat2 {
    let d = det2(m);
    Mat2::new(m[(1, 1)] / d, -m[(0, 1)] / d, -m[(1, 0)] / d, m[(0, 0)] / d)
}

/// Coordinates of `x1 e1 + x2 e2 + x3 e3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Su2Vector {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl Su2Vector {
    pub fn new(x1: f64, x2: f64, x3: f64) -> Self {
        Self { x1, x2, x3 }
    }

    pub fn to_matrix(self) -> Mat2 {
        e1() * C64::from(self.x1) + e2() * C64::from(self.x2) + e3() * C64::from(self.x3)
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x1, self.x2, self.x3)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

/// Distance of `x` from su(2): trace plus anti-hermitian defect.
pub fn su2_defect(x: &Mat2) -> f64 {
    let tr = (x[(0, 0)] + x[(1, 1)]).norm();
    tr + mat_norm(&(x + x.adjoint()))
}

/// `x_k = -2 tr(X e_k)`, rejecting matrices further than `tol` from su(2).
pub fn su2_to_r3(x: &Mat2, tol: f64) -> Result<Su2Vector, LoopError> {
    let defect = su2_defect(x);
    if defect > tol * (1.0 + mat_norm(x)) {
        return Err(LoopError::NotSu2 { defect });
    }
    Ok(su2_to_r3_unchecked(x))
}

pub fn su2_to_r3_unchecked(x: &Mat2) -> Su2Vector {
    let c = |e: Mat2| -2.0 * (x * e).trace().re;
    Su2Vector::new(c(e1()), c(e2()), c(e3()))
}

/// `<X,Y> = -2 tr(XY)`.
pub fn su2_inner(x: &Mat2, y: &Mat2) -> f64 {
    -2.0 * (x * y).trace().re
}

/// Report of the twisting check: the largest off-pattern entry and where it sits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwistReport {
    pub max_violation: f64,
    pub worst_power: i32,
}

impl TwistReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_violation <= tol
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LaurentMatrix {
    lo: i32,
    coeffs: Vec<Mat2>,
    twisted: bool,
    tail: f64,
}

impl LaurentMatrix {
    /// Untwisted loop with coefficients for powers `lo, lo+1, ...`.
    pub fn new(lo: i32, coeffs: Vec<Mat2>) -> Result<Self, LoopError> {
        if coeffs.is_empty() {
            return Err(LoopError::Empty);
        }
        Ok(Self { lo, coeffs, twisted: false, tail: 0.0 })
    }

    /// Validates the twisted pattern before setting the flag.
    pub fn new_twisted(lo: i32, coeffs: Vec<Mat2>, tol: f64) -> Result<Self, LoopError> {
        Self::new(lo, coeffs)?.into_twisted(tol)
    }

    pub fn into_twisted(mut self, tol: f64) -> Result<Self, LoopError> {
        let r = self.check_twisted();
        if !r.passes(tol) {
            return Err(LoopError::NotTwisted { power: r.worst_power, violation: r.max_violation });
        }
        self.twisted = true;
        Ok(self)
    }

    /// Twisted loop whose pattern the caller guarantees structurally.
    pub(crate) fn twisted_unchecked(lo: i32, coeffs: Vec<Mat2>) -> Self {
        Self { lo, coeffs, twisted: true, tail: 0.0 }
    }

    pub fn identity() -> Self {
        Self { lo: 0, coeffs: vec![Mat2::identity()], twisted: true, tail: 0.0 }
    }

    pub fn zero() -> Self {
        Self { lo: 0, coeffs: vec![Mat2::zeros()], twisted: true, tail: 0.0 }
    }

    pub fn monomial(power: i32, m: Mat2) -> Self {
        Self { lo: power, coeffs: vec![m], twisted: false, tail: 0.0 }
    }

    pub fn lo(&self) -> i32 {
        self.lo
    }

    pub fn hi(&self) -> i32 {
        self.lo + self.coeffs.len() as i32 - 1
    }

    pub fn coeffs(&self) -> &[Mat2] {
        &self.coeffs
    }

    /// Coefficient of `lambda^n`, zero outside the stored range.
    pub fn coeff(&self, n: i32) -> Mat2 {
        if n < self.lo || n > self.hi() {
            Mat2::zeros()
        } else {
            self.coeffs[(n - self.lo) as usize]
        }
    }

    pub fn is_twisted(&self) -> bool {
        self.twisted
    }

    /// Mass discarded by the truncation that produced this loop.
    pub fn tail(&self) -> f64 {
        self.tail
    }

    /// Tail mass relative to the retained mass.
    pub fn tail_ratio(&self) -> f64 {
        let n = self.norm();
        if n == 0.0 {
            self.tail
        } else {
            self.tail / n
        }
    }

    /// Sum of Frobenius norms of the coefficients.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(mat_norm).sum()
    }

    pub fn eval(&self, lambda: C64) -> Result<Mat2, LoopError> {
        if lambda == ZERO {
            return Err(LoopError::ZeroSpectralParameter);
        }
        Ok(self.eval_nonzero(lambda))
    }

    pub(crate) fn eval_nonzero(&self, lambda: C64) -> Mat2 {
        let mut acc = Mat2::zeros();
        for c in self.coeffs.iter().rev() {
            acc = acc * lambda + c;
        }
        acc * lambda.powi(self.lo)
    }

    pub fn check_twisted(&self) -> TwistReport {
        let mut rep = TwistReport { max_violation: 0.0, worst_power: self.lo };
        for (k, c) in self.coeffs.iter().enumerate() {
            let n = self.lo + k as i32;
            let v = if n.rem_euclid(2) == 0 {
                c[(0, 1)].norm().max(c[(1, 0)].norm())
            } else {
                c[(0, 0)].norm().max(c[(1, 1)].norm())
            };
            if v > rep.max_violation {
                rep = TwistReport { max_violation: v, worst_power: n };
            }
        }
        rep
    }

    /// Product truncated to `[-n_trunc, n_trunc]`.
    pub fn multiply(&self, other: &Self, n_trunc: usize) -> Self {
        let n = n_trunc as i32;
        let lo_full = self.lo + other.lo;
        let hi_full = self.hi() + other.hi();
        let lo = lo_full.max(-n);
        let hi = hi_full.min(n);
        if lo > hi {
            let tail = self.norm() * other.norm();
            return Self { lo: 0, coeffs: vec![Mat2::zeros()], twisted: self.twisted && other.twisted, tail };
        }
        let mut coeffs = vec![Mat2::zeros(); (hi - lo + 1) as usize];
        let mut tail = 0.0;
        for (ka, a) in self.coeffs.iter().enumerate() {
            let pa = self.lo + ka as i32;
            for (kb, b) in other.coeffs.iter().enumerate() {
                let p = pa + other.lo + kb as i32;
                if p < lo || p > hi {
                    tail += mat_norm(a) * mat_norm(b);
                } else {
                    coeffs[(p - lo) as usize] += a * b;
                }
            }
        }
        Self { lo, coeffs, twisted: self.twisted && other.twisted, tail }
    }

    /// `A*(lambda) = A(1/conj(lambda))^H`, i.e. `coeff[n] -> coeff[-n]^H`.
    pub fn circle_adjoint(&self) -> Self {
        let coeffs = self.coeffs.iter().rev().map(|c| c.adjoint()).collect();
        Self { lo: -self.hi(), coeffs, twisted: self.twisted, tail: self.tail }
    }

    /// Termwise `d/dlambda`; the twisted flag is not preserved.
    pub fn lambda_derivative(&self) -> Self {
        let coeffs: Vec<Mat2> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * C64::from((self.lo + k as i32) as f64))
            .collect();
        Self { lo: self.lo - 1, coeffs, twisted: false, tail: 0.0 }
    }

    /// `sum_n n A_n`, the value of `lambda d/dlambda` at `lambda = 1`.
    pub fn lambda_derivative_at_one(&self) -> Mat2 {
        let mut acc = Mat2::zeros();
        for (k, c) in self.coeffs.iter().enumerate() {
            acc += c * C64::from((self.lo + k as i32) as f64);
        }
        acc
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            lo: self.lo,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
            twisted: self.twisted,
            tail: self.tail * s.norm(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.axpy(ONE, other)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(-ONE, other)
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: C64, other: &Self) -> Self {
        let lo = self.lo.min(other.lo);
        let hi = self.hi().max(other.hi());
        let mut coeffs = vec![Mat2::zeros(); (hi - lo + 1) as usize];
        for (k, c) in self.coeffs.iter().enumerate() {
            coeffs[(self.lo - lo) as usize + k] += c;
        }
        for (k, c) in other.coeffs.iter().enumerate() {
            coeffs[(other.lo - lo) as usize + k] += c * s;
        }
        Self { lo, coeffs, twisted: self.twisted && other.twisted, tail: 0.0 }
    }

    /// Restricts to `[lo, hi]`, padding with zeros where needed.
    pub fn restrict(&self, lo: i32, hi: i32) -> Self {
        let coeffs = (lo..=hi).map(|n| self.coeff(n)).collect();
        let dropped: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let n = self.lo + *k as i32;
                n < lo || n > hi
            })
            .map(|(_, c)| mat_norm(c))
            .sum();
        Self { lo, coeffs, twisted: self.twisted, tail: dropped }
    }

    /// Largest coefficient distance to `other`.
    pub fn max_coeff_distance(&self, other: &Self) -> f64 {
        let lo = self.lo.min(other.lo);
        let hi = self.hi().max(other.hi());
        (lo..=hi)
            .map(|n| mat_norm(&(self.coeff(n) - other.coeff(n))))
            .fold(0.0, f64::max)
    }

    /// Summed coefficient distance to `other`.
    pub fn distance(&self, other: &Self) -> f64 {
        let lo = self.lo.min(other.lo);
        let hi = self.hi().max(other.hi());
        (lo..=hi).map(|n| mat_norm(&(self.coeff(n) - other.coeff(n)))).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn arb_c64() -> impl Strategy<Value = C64> {
        (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b)| c(a, b))
    }

    fn arb_twisted(lo: i32, len: usize) -> impl Strategy<Value = LaurentMatrix> {
        proptest::collection::vec((arb_c64(), arb_c64()), len).prop_map(move |v| {
            let coeffs = v
                .into_iter()
                .enumerate()
                .map(|(k, (a, b))| {
                    if (lo + k as i32).rem_euclid(2) == 0 {
                        Mat2::new(a, ZERO, ZERO, b)
                    } else {
                        Mat2::new(ZERO, a, b, ZERO)
                    }
                })
                .collect();
            LaurentMatrix::new_twisted(lo, coeffs, 0.0).unwrap()
        })
    }

    fn arb_loop(lo: i32, len: usize) -> impl Strategy<Value = LaurentMatrix> {
        proptest::collection::vec((arb_c64(), arb_c64(), arb_c64(), arb_c64()), len).prop_map(move |v| {
            let coeffs = v.into_iter().map(|(a, b, cc, d)| Mat2::new(a, b, cc, d)).collect();
            LaurentMatrix::new(lo, coeffs).unwrap()
        })
    }

    #[test]
    fn basis_commutators_follow_cross_product() {
        let [a, b, cc] = basis();
        assert!(mat_norm(&(a * b - b * a - cc)) < 1e-15);
        assert!(mat_norm(&(b * cc - cc * b - a)) < 1e-15);
        assert!(mat_norm(&(cc * a - a * cc - b)) < 1e-15);
    }

    #[test]
    fn inner_product_is_orthonormal_on_basis() {
        let b = basis();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((su2_inner(&b[i], &b[j]) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn su2_to_r3_examples() {
        let v = su2_to_r3(&e1(), 1e-12).unwrap();
        assert_eq!((v.x1, v.x2, v.x3), (1.0, 0.0, 0.0));
        let x = e1() * c(2.0, 0.0) - e3() * c(3.0, 0.0);
        let v = su2_to_r3(&x, 1e-12).unwrap();
        assert!((v.x1 - 2.0).abs() < 1e-15 && v.x2.abs() < 1e-15 && (v.x3 + 3.0).abs() < 1e-15);
        assert!(su2_to_r3(&Mat2::identity(), 1e-12).is_err());
    }

    #[test]
    fn multiply_example() {
        let a = LaurentMatrix::monomial(1, e1());
        let b = LaurentMatrix::monomial(-1, e1());
        let p = a.multiply(&b, 16);
        assert_eq!((p.lo(), p.hi()), (0, 0));
        let expect = Mat2::identity() * c(-0.25, 0.0);
        assert!(mat_norm(&(p.coeff(0) - expect)) < 1e-15);
    }

    #[test]
    fn eval_at_zero_is_rejected() {
        assert_eq!(LaurentMatrix::identity().eval(ZERO), Err(LoopError::ZeroSpectralParameter));
    }

    #[test]
    fn twisting_violation_is_reported() {
        let m = Mat2::new(ONE, ONE, ZERO, ONE);
        let err = LaurentMatrix::new_twisted(0, vec![m], 1e-12).unwrap_err();
        assert!(matches!(err, LoopError::NotTwisted { power: 0, .. }));
    }

    #[test]
    fn truncation_records_tail() {
        let a = LaurentMatrix::monomial(2, Mat2::identity());
        let p = a.multiply(&a, 3);
        assert!(p.tail() > 1.0);
        assert_eq!(mat_norm(&p.coeff(4)), 0.0);
    }

    #[test]
    fn lambda_derivative_of_monomial() {
        let a = LaurentMatrix::monomial(-2, e2());
        let d = a.lambda_derivative();
        assert_eq!(d.lo(), -3);
        assert!(mat_norm(&(d.coeff(-3) + e2() * c(2.0, 0.0))) < 1e-15);
    }

    proptest! {
        #[test]
        fn multiply_agrees_with_pointwise(a in arb_loop(-3, 5), b in arb_loop(-2, 4),
                                          r in 0.5..1.5f64, t in 0.0..6.3f64) {
            let lam = C64::from_polar(r, t);
            let p = a.multiply(&b, 16);
            let lhs = p.eval(lam).unwrap();
            let rhs = a.eval(lam).unwrap() * b.eval(lam).unwrap();
            prop_assert!(mat_norm(&(lhs - rhs)) <= 1e-10 * (1.0 + mat_norm(&rhs)));
        }

        #[test]
        fn adjoint_is_an_involution(a in arb_loop(-4, 7)) {
            prop_assert_eq!(a.circle_adjoint().circle_adjoint(), a);
        }

        #[test]
        fn adjoint_on_circle_is_hermitian_adjoint(a in arb_loop(-3, 6), t in 0.0..6.3f64) {
            let lam = C64::from_polar(1.0, t);
            let lhs = a.circle_adjoint().eval(lam).unwrap();
            let rhs = a.eval(lam).unwrap().adjoint();
            prop_assert!(mat_norm(&(lhs - rhs)) < 1e-12 * (1.0 + mat_norm(&rhs)));
        }

        #[test]
        fn twisted_loops_are_closed(a in arb_twisted(-3, 7), b in arb_twisted(-2, 5)) {
            let p = a.multiply(&b, 16);
            prop_assert!(p.is_twisted());
            prop_assert_eq!(p.check_twisted().max_violation, 0.0);
            prop_assert_eq!(a.circle_adjoint().check_twisted().max_violation, 0.0);
        }

        #[test]
        fn su2_dictionary_is_isometric(x in -3.0..3.0f64, y in -3.0..3.0f64, z in -3.0..3.0f64,
                                       u in -3.0..3.0f64, v in -3.0..3.0f64, w in -3.0..3.0f64) {
            let a = Su2Vector::new(x, y, z);
            let b = Su2Vector::new(u, v, w);
            let ip = su2_inner(&a.to_matrix(), &b.to_matrix());
            prop_assert!((ip - a.to_vector().dot(&b.to_vector())).abs() < 1e-12);
            let back = su2_to_r3(&a.to_matrix(), 1e-12).unwrap();
            prop_assert!((back.to_vector() - a.to_vector()).norm() < 1e-12);
        }
    }
}
