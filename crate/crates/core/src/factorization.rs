//! Iwasawa splitting `Phi = F B` of twisted loops and positive spectral factors.
//!
//! Both rest on the same Wiener-Hopf step. For a Hermitian loop `P = B* B`
//! that is positive on the unit circle, the finite section of the block
//! Toeplitz operator `T_{nk} = P_{n-k}` is solved against the first unit
//! block column. The solution `X_k` gives `X_0 = (B_0^H B_0)^{-1}` and
//! `B^{-1} = sum_k X_k B_0^H lambda^k`; `B` itself follows by series
//! inversion. For twisted `P` the block system splits into two scalar
//! Hermitian systems of half the size.

use crate::laurent::{det2, inv2, mat_norm, LaurentMatrix, LoopError, Mat2, C64};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IwasawaConfig {
    pub n_trunc: usize,
    /// Finite-section size in blocks; `0` means `4 * n_trunc`.
    pub section: usize,
    pub iwasawa_tol: f64,
    pub det_tol: f64,
    pub cond_floor: f64,
    pub twist_tol: f64,
}

impl Default for IwasawaConfig {
    fn default() -> Self {
        Self {
            n_trunc: 16,
            section: 0,
            iwasawa_tol: 1e-8,
            det_tol: 1e-10,
            cond_floor: 1e-10,
            twist_tol: 1e-10,
        }
    }
}

impl IwasawaConfig {
    pub fn section_size(&self) -> usize {
        if self.section == 0 {
            4 * self.n_trunc
        } else {
            self.section
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IwasawaResidual {
    pub reconstruction: f64,
    pub unitarity: f64,
    pub determinant: f64,
    pub twisting: f64,
}

impl IwasawaResidual {
    pub fn max(&self) -> f64 {
        self.reconstruction.max(self.unitarity).max(self.determinant).max(self.twisting)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IwasawaResult {
    pub unitary_part: LaurentMatrix,
    pub plus_part: LaurentMatrix,
    /// `B_0 = diag(rho, 1/rho)`.
    pub rho: f64,
    pub residual: IwasawaResidual,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FactorizationError {
    #[error("input loop is not twisted: {0}")]
    NotTwisted(LoopError),
    #[error("determinant defect {defect:e} exceeds tolerance")]
    Determinant { defect: f64 },
    #[error("input is ill conditioned: smallest eigenvalue {min_eig:e} of the circle Gram matrix")]
    IllConditioned { min_eig: f64 },
    #[error("positive definiteness lost at section index {index}")]
    LostDefiniteness { index: usize },
    #[error("input is not hermitian on the circle: defect {defect:e}")]
    NotHermitian { defect: f64 },
    #[error("residual {} exceeds tolerance", .0.residual.max())]
    Residual(Box<IwasawaResult>),
}

/// Hermitian banded matrix stored by its lower band.
struct Banded {
    n: usize,
    w: usize,
    data: Vec<C64>,
}

impl Banded {
    fn new(n: usize, w: usize) -> Self {
        Self { n, w, data: vec![C64::new(0.0, 0.0); n * (w + 1)] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.w + 1) + (i - j)
    }

    fn set(&mut self, i: usize, j: usize, v: C64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    /// In-place Cholesky `A = L L^H`; pivots at or below `floor` abort.
    fn cholesky(&mut self, floor: f64) -> Result<(), usize> {
        let w = self.w;
        for i in 0..self.n {
            let start = i.saturating_sub(w);
            for j in start..=i {
                let mut s = self.data[self.idx(i, j)];
                let ri = self.idx(i, 0);
                let rj = self.idx(j, 0);
                for k in start..j {
                    s -= self.data[ri - k] * self.data[rj - k].conj();
                }
                if i == j {
                    if s.re <= floor || !s.re.is_finite() {
                        return Err(i);
                    }
                    let k = self.idx(i, i);
                    self.data[k] = C64::new(s.re.sqrt(), 0.0);
                } else {
                    let d = self.data[self.idx(j, j)].re;
                    let k = self.idx(i, j);
                    self.data[k] = s / d;
                }
            }
        }
        Ok(())
    }

    #[allow(clippy::needless_range_loop)]
    fn solve(&self, b: &mut [C64]) {
        let w = self.w;
        for i in 0..self.n {
            let mut s = b[i];
            for k in i.saturating_sub(w)..i {
                s -= self.data[self.idx(i, k)] * b[k];
            }
            b[i] = s / self.data[self.idx(i, i)].re;
        }
        for i in (0..self.n).rev() {
            let mut s = b[i];
            for k in i + 1..(i + w + 1).min(self.n) {
                s -= self.data[self.idx(k, i)].conj() * b[k];
            }
            b[i] = s / self.data[self.idx(i, i)].re;
        }
    }
}

fn pivot_floor(p0: &Mat2, cond_floor: f64) -> f64 {
    cond_floor * p0[(0, 0)].re.abs().max(p0[(1, 1)].re.abs()).max(1.0)
}

/// Solves the block system for twisted `P`; returns `X_0..X_{m-1}`.
fn twisted_section_solve(p: &LaurentMatrix, m: usize, cond_floor: f64) -> Result<Vec<Mat2>, FactorizationError> {
    let deg = p.hi().max(-p.lo()).max(0) as usize;
    let w = deg.min(m - 1);
    let floor = pivot_floor(&p.coeff(0), cond_floor);
    let par = |k: usize| k % 2;
    let mut cols = Vec::with_capacity(2);
    for col in 0..2 {
        let mut s = Banded::new(m, w);
        for n in 0..m {
            for k in n.saturating_sub(w)..=n {
                let (r, c) = if col == 0 { (par(n), par(k)) } else { (1 - par(n), 1 - par(k)) };
                s.set(n, k, p.coeff(n as i32 - k as i32)[(r, c)]);
            }
        }
        s.cholesky(floor).map_err(|index| FactorizationError::LostDefiniteness { index })?;
        let mut rhs = vec![C64::new(0.0, 0.0); m];
        rhs[0] = C64::new(1.0, 0.0);
        s.solve(&mut rhs);
        cols.push(rhs);
    }
    let z = C64::new(0.0, 0.0);
    Ok((0..m)
        .map(|k| {
            let (u, v) = (cols[0][k], cols[1][k]);
            if k % 2 == 0 {
                Mat2::new(u, z, z, v)
            } else {
                Mat2::new(z, v, u, z)
            }
        })
        .collect())
}

/// Solves the block system for general Hermitian `P`.
fn block_section_solve(p: &LaurentMatrix, m: usize, cond_floor: f64) -> Result<Vec<Mat2>, FactorizationError> {
    let deg = p.hi().max(-p.lo()).max(0) as usize;
    let n = 2 * m;
    let w = (2 * deg + 1).min(n - 1);
    let floor = pivot_floor(&p.coeff(0), cond_floor);
    let mut t = Banded::new(n, w);
    for i in 0..n {
        for j in i.saturating_sub(w)..=i {
            let (bi, bj) = (i / 2, j / 2);
            t.set(i, j, p.coeff(bi as i32 - bj as i32)[(i % 2, j % 2)]);
        }
    }
    t.cholesky(floor).map_err(|index| FactorizationError::LostDefiniteness { index: index / 2 })?;
    let mut cols = Vec::with_capacity(2);
    for col in 0..2 {
        let mut rhs = vec![C64::new(0.0, 0.0); n];
        rhs[col] = C64::new(1.0, 0.0);
        t.solve(&mut rhs);
        cols.push(rhs);
    }
    Ok((0..m)
        .map(|k| Mat2::new(cols[0][2 * k], cols[1][2 * k], cols[0][2 * k + 1], cols[1][2 * k + 1]))
        .collect())
}

/// Upper triangular `R` with positive diagonal and `R^H R = A` for Hermitian positive `A`.
fn upper_cholesky(a: &Mat2) -> Option<Mat2> {
    let a11 = a[(0, 0)].re;
    if a11 <= 0.0 {
        return None;
    }
    let r11 = a11.sqrt();
    let r12 = a[(0, 1)] / r11;
    let d = a[(1, 1)].re - r12.norm_sqr();
    if d <= 0.0 {
        return None;
    }
    let z = C64::new(0.0, 0.0);
    Some(Mat2::new(C64::new(r11, 0.0), r12, z, C64::new(d.sqrt(), 0.0)))
}

/// Inverse of a plus-loop `G` (constant term invertible) up to degree `deg`.
fn series_inverse(g: &[Mat2], deg: usize) -> Vec<Mat2> {
    let g0inv = inv2(&g[0]);
    let mut b: Vec<Mat2> = Vec::with_capacity(deg + 1);
    b.push(g0inv);
    for k in 1..=deg {
        let mut s = Mat2::zeros();
        for j in 0..k {
            if k - j < g.len() {
                s += b[j] * g[k - j];
            }
        }
        b.push(-s * g0inv);
    }
    b
}

/// Plus factor `B` of a Hermitian loop `P = B* B` positive on the unit circle.
///
/// `B` has nonnegative powers up to `n_trunc` and an upper triangular
/// constant term with positive real diagonal.
pub fn spectral_factor_positive(p: &LaurentMatrix, cfg: &IwasawaConfig) -> Result<LaurentMatrix, FactorizationError> {
    let herm = p.distance(&p.circle_adjoint());
    if herm > cfg.iwasawa_tol * (1.0 + p.norm()) {
        return Err(FactorizationError::NotHermitian { defect: herm });
    }
    let m = cfg.section_size();
    check_circle_positive(p, m, cfg.cond_floor)?;
    let x = if p.is_twisted() {
        twisted_section_solve(p, m, cfg.cond_floor)?
    } else {
        block_section_solve(p, m, cfg.cond_floor)?
    };
    let b0 = upper_cholesky(&inv2(&x[0])).ok_or(FactorizationError::LostDefiniteness { index: 0 })?;
    let g: Vec<Mat2> = x.iter().map(|xk| xk * b0.adjoint()).collect();
    let b = series_inverse(&g, cfg.n_trunc);
    let out = LaurentMatrix::new(0, b).expect("nonempty");
    Ok(if p.is_twisted() { out.into_twisted(f64::INFINITY).expect("infinite tolerance") } else { out })
}

fn circle_points(m: usize) -> Vec<C64> {
    (0..m).map(|j| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / m as f64)).collect()
}

fn min_eig_hermitian(p: &Mat2) -> f64 {
    let a = p[(0, 0)].re;
    let d = p[(1, 1)].re;
    let b = p[(0, 1)].norm();
    0.5 * (a + d) - (0.25 * (a - d) * (a - d) + b * b).sqrt()
}

fn check_circle_positive(p: &LaurentMatrix, m: usize, cond_floor: f64) -> Result<(), FactorizationError> {
    let mut min_eig = f64::INFINITY;
    for lam in circle_points(m) {
        min_eig = min_eig.min(min_eig_hermitian(&p.eval_nonzero(lam)));
    }
    if min_eig < cond_floor {
        return Err(FactorizationError::IllConditioned { min_eig });
    }
    Ok(())
}

/// `Phi = F B` with `F` unitary on the circle and `B` a plus-loop with
/// constant term `diag(rho, 1/rho)`, `rho > 0`.
pub fn iwasawa(phi: &LaurentMatrix, cfg: &IwasawaConfig) -> Result<IwasawaResult, FactorizationError> {
    let n = cfg.n_trunc;
    let nn = n as i32;
    if !phi.is_twisted() {
        let rep = phi.check_twisted();
        return Err(FactorizationError::NotTwisted(LoopError::NotTwisted {
            power: rep.worst_power,
            violation: rep.max_violation,
        }));
    }
    let rep = phi.check_twisted();
    if !rep.passes(cfg.twist_tol) {
        return Err(FactorizationError::NotTwisted(LoopError::NotTwisted {
            power: rep.worst_power,
            violation: rep.max_violation,
        }));
    }
    let m = cfg.section_size();
    let pts = circle_points(m);
    let phi_vals: Vec<Mat2> = pts.iter().map(|&l| phi.eval_nonzero(l)).collect();
    let mut det_defect: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    for v in &phi_vals {
        let scale = mat_norm(v).powi(2).max(1.0);
        det_defect = det_defect.max((det2(v) - 1.0).norm() / scale);
        min_eig = min_eig.min(min_eig_hermitian(&(v.adjoint() * v)));
    }
    if det_defect > cfg.det_tol {
        return Err(FactorizationError::Determinant { defect: det_defect });
    }
    if min_eig < cfg.cond_floor {
        return Err(FactorizationError::IllConditioned { min_eig });
    }

    let p = phi.circle_adjoint().multiply(phi, 2 * n);
    let x = twisted_section_solve(&p, m, cfg.cond_floor)?;
    let (x00, x11) = (x[0][(0, 0)].re, x[0][(1, 1)].re);
    if x00 <= 0.0 || x11 <= 0.0 {
        return Err(FactorizationError::LostDefiniteness { index: 0 });
    }
    let (b00, b11) = (1.0 / x00.sqrt(), 1.0 / x11.sqrt());
    let g: Vec<Mat2> = x
        .iter()
        .take(2 * n + 1)
        .map(|xk| {
            let mut gk = *xk;
            gk.column_mut(0).scale_mut(b00);
            gk.column_mut(1).scale_mut(b11);
            gk
        })
        .collect();
    let g_loop = LaurentMatrix::new_twisted(0, g.clone(), f64::INFINITY).expect("nonempty");
    let f = phi.multiply(&g_loop, 3 * n).restrict(-nn, nn).into_twisted(f64::INFINITY).expect("infinite tolerance");
    let b = LaurentMatrix::new_twisted(0, series_inverse(&g, n), f64::INFINITY).expect("nonempty");
    let rho = (b00 / b11).sqrt();

    let mut reconstruction: f64 = 0.0;
    let mut unitarity: f64 = 0.0;
    let mut determinant: f64 = 0.0;
    for (lam, pv) in pts.iter().zip(&phi_vals) {
        let fv = f.eval_nonzero(*lam);
        let bv = b.eval_nonzero(*lam);
        reconstruction = reconstruction.max(mat_norm(&(fv * bv - pv)) / mat_norm(pv).max(1.0));
        unitarity = unitarity.max(mat_norm(&(fv.adjoint() * fv - Mat2::identity())));
        determinant = determinant.max((det2(&fv) - 1.0).norm()).max((det2(&bv) - 1.0).norm());
    }
    let twisting = f.check_twisted().max_violation.max(b.check_twisted().max_violation);
    let out = IwasawaResult {
        unitary_part: f,
        plus_part: b,
        rho,
        residual: IwasawaResidual { reconstruction, unitarity, determinant, twisting },
    };
    if out.residual.max() > cfg.iwasawa_tol {
        return Err(FactorizationError::Residual(Box::new(out)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laurent::{e1, e2, e3};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn z() -> C64 {
        c(0.0, 0.0)
    }

    fn unipotent_upper(power: i32, a: C64) -> LaurentMatrix {
        let mut l = LaurentMatrix::identity();
        l = l.add(&LaurentMatrix::monomial(power, Mat2::new(z(), a, z(), z())));
        l.into_twisted(0.0).unwrap()
    }

    fn unipotent_lower(power: i32, a: C64) -> LaurentMatrix {
        let l = LaurentMatrix::identity().add(&LaurentMatrix::monomial(power, Mat2::new(z(), z(), a, z())));
        l.into_twisted(0.0).unwrap()
    }

    #[test]
    fn closed_form_unipotent_splitting() {
        let zz = c(0.3, -0.4);
        let phi = unipotent_upper(-1, zz);
        let r = iwasawa(&phi, &IwasawaConfig::default()).unwrap();
        let s = 1.0 / (1.0 + zz.norm_sqr()).sqrt();
        let f_expect = LaurentMatrix::new(
            -1,
            vec![
                Mat2::new(z(), zz * s, z(), z()),
                Mat2::identity() * c(s, 0.0),
                Mat2::new(z(), z(), -zz.conj() * s, z()),
            ],
        )
        .unwrap();
        let b_expect = LaurentMatrix::new(
            0,
            vec![Mat2::new(c(s, 0.0), z(), z(), c(1.0 / s, 0.0)), Mat2::new(z(), z(), zz.conj() * s, z())],
        )
        .unwrap();
        assert!(r.unitary_part.max_coeff_distance(&f_expect) < 1e-12);
        assert!(r.plus_part.max_coeff_distance(&b_expect) < 1e-12);
        assert!((r.rho - s).abs() < 1e-12);
    }

    #[test]
    fn identity_splits_trivially() {
        let r = iwasawa(&LaurentMatrix::identity(), &IwasawaConfig::default()).unwrap();
        assert!(r.unitary_part.max_coeff_distance(&LaurentMatrix::identity()) < 1e-14);
        assert!((r.rho - 1.0).abs() < 1e-14);
    }

    #[test]
    fn constant_diagonal_is_absorbed_in_plus_part() {
        let d = Mat2::new(c(2.0, 0.0), z(), z(), c(0.5, 0.0));
        let phi = LaurentMatrix::new_twisted(0, vec![d], 0.0).unwrap();
        let r = iwasawa(&phi, &IwasawaConfig::default()).unwrap();
        assert!((r.rho - 2.0).abs() < 1e-14);
        assert!(r.unitary_part.max_coeff_distance(&LaurentMatrix::identity()) < 1e-14);
    }

    #[test]
    fn untwisted_input_is_rejected() {
        let phi = LaurentMatrix::monomial(0, Mat2::identity());
        assert!(matches!(iwasawa(&phi, &IwasawaConfig::default()), Err(FactorizationError::NotTwisted(_))));
    }

    #[test]
    fn determinant_defect_is_rejected() {
        let phi = LaurentMatrix::new_twisted(0, vec![Mat2::identity() * c(2.0, 0.0)], 0.0).unwrap();
        assert!(matches!(iwasawa(&phi, &IwasawaConfig::default()), Err(FactorizationError::Determinant { .. })));
    }

    #[test]
    fn spectral_factor_of_diagonal_constant() {
        let p = LaurentMatrix::new_twisted(0, vec![Mat2::new(c(4.0, 0.0), z(), z(), c(0.25, 0.0))], 0.0).unwrap();
        let b = spectral_factor_positive(&p, &IwasawaConfig::default()).unwrap();
        assert!((b.coeff(0)[(0, 0)].re - 2.0).abs() < 1e-14);
        assert!((b.coeff(0)[(1, 1)].re - 0.5).abs() < 1e-14);
        assert!(mat_norm(&b.coeff(1)) < 1e-14);
    }

    #[test]
    fn spectral_factor_rejects_indefinite_input() {
        let p = LaurentMatrix::new(0, vec![Mat2::new(c(1.0, 0.0), z(), z(), c(-1.0, 0.0))]).unwrap();
        assert!(spectral_factor_positive(&p, &IwasawaConfig::default()).is_err());
    }

    #[test]
    fn general_and_twisted_solvers_agree() {
        let phi = unipotent_upper(-1, c(0.7, 0.2))
            .multiply(&unipotent_lower(1, c(-0.4, 0.9)), 16)
            .multiply(&unipotent_upper(1, c(0.3, 0.3)), 16);
        let p = phi.circle_adjoint().multiply(&phi, 32);
        let cfg = IwasawaConfig::default();
        let bt = spectral_factor_positive(&p, &cfg).unwrap();
        let mut untwisted = LaurentMatrix::new(p.lo(), p.coeffs().to_vec()).unwrap();
        untwisted = untwisted.restrict(p.lo(), p.hi());
        assert!(!untwisted.is_twisted());
        let bg = spectral_factor_positive(&untwisted, &cfg).unwrap();
        assert!(bt.max_coeff_distance(&bg) < 1e-10);
        let recon = bt.circle_adjoint().multiply(&bt, 32);
        assert!(recon.max_coeff_distance(&p) < 1e-9);
    }

    #[test]
    fn general_spectral_factor_of_untwisted_loop() {
        let q = LaurentMatrix::new(
            0,
            vec![Mat2::new(c(1.5, 0.0), c(0.2, 0.1), z(), c(0.8, 0.0)), Mat2::new(c(0.3, 0.0), c(0.0, 0.1), c(0.2, 0.0), c(-0.1, 0.0))],
        )
        .unwrap();
        let p = q.circle_adjoint().multiply(&q, 16);
        let b = spectral_factor_positive(&p, &IwasawaConfig::default()).unwrap();
        let b0 = b.coeff(0);
        assert!(b0[(1, 0)].norm() < 1e-12 && b0[(0, 0)].im.abs() < 1e-12 && b0[(0, 0)].re > 0.0);
        assert!(b.circle_adjoint().multiply(&b, 32).max_coeff_distance(&p) < 1e-9);
    }

    fn arb_c() -> impl Strategy<Value = C64> {
        (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| c(a, b))
    }

    fn random_loop(a: C64, b: C64, cc: C64, d: C64, r: f64) -> LaurentMatrix {
        let diag = LaurentMatrix::new_twisted(0, vec![Mat2::new(c(r, 0.0), z(), z(), c(1.0 / r, 0.0))], 0.0).unwrap();
        unipotent_upper(-1, a)
            .multiply(&unipotent_lower(1, b), 16)
            .multiply(&unipotent_upper(1, cc), 16)
            .multiply(&unipotent_lower(-1, d), 16)
            .multiply(&diag, 16)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn splitting_invariants(a in arb_c(), b in arb_c(), cc in arb_c(), d in arb_c(), r in 0.5..2.0f64) {
            let phi = random_loop(a, b, cc, d, r);
            let cfg = IwasawaConfig::default();
            let res = iwasawa(&phi, &cfg).unwrap();
            prop_assert!(res.residual.max() <= 1e-8);
            prop_assert!(res.rho > 0.0);
            let b0 = res.plus_part.coeff(0);
            prop_assert!((b0[(0, 0)].re - res.rho).abs() < 1e-10 && (b0[(1, 1)].re - 1.0 / res.rho).abs() < 1e-10);
            prop_assert!(res.plus_part.lo() >= 0);

            // uniqueness: factoring F returns (F, I)
            let again = iwasawa(&res.unitary_part, &cfg).unwrap();
            prop_assert!(again.unitary_part.max_coeff_distance(&res.unitary_part) < 2e-8);
            prop_assert!(again.plus_part.max_coeff_distance(&LaurentMatrix::identity()) < 2e-8);

            // equivariance under constant diagonal SU(2)
            let u = LaurentMatrix::new_twisted(0, vec![Mat2::new(C64::from_polar(1.0, 0.7), z(), z(), C64::from_polar(1.0, -0.7))], 0.0).unwrap();
            let eq = iwasawa(&u.multiply(&phi, 16), &cfg).unwrap();
            prop_assert!(eq.unitary_part.max_coeff_distance(&u.multiply(&res.unitary_part, 16)) < 1e-9);
            prop_assert!(eq.plus_part.max_coeff_distance(&res.plus_part) < 1e-9);
        }
    }

    #[test]
    fn basis_elements_are_twisted_as_loops() {
        for (p, m) in [(1, e1()), (1, e2()), (0, e3())] {
            assert!(LaurentMatrix::new_twisted(p, vec![m], 0.0).is_ok());
        }
    }
}
