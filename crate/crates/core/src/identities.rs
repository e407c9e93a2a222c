//! Numerical checks of the divergence-free property of cofactor fields and
//! its integrated consequences.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bodies::SupportBody;
use crate::sphere::{q_matrix, tangent_frame, Integral, QuadratureGrid, SphericalFunction};
use crate::symfun::{cofactor, cofactor2, trace_pair};
use crate::{Error, Result};

/// Two integrals that should agree, and their difference.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IbpReport {
    pub lhs: Integral,
    pub rhs: Integral,
    pub residual: f64,
    /// `error(lhs) + error(rhs)`.
    pub combined_error: f64,
    /// Error estimate of the difference rule itself.
    pub difference_error: f64,
}

impl IbpReport {
    fn new(lhs: Integral, rhs: Integral) -> Self {
        let diff = lhs.lin_comb(1.0, &rhs, -1.0);
        IbpReport {
            lhs,
            rhs,
            residual: diff.value.abs(),
            combined_error: lhs.error_estimate + rhs.error_estimate,
            difference_error: diff.error_estimate,
        }
    }

    /// `5 × combined_error` plus a round-off floor relative to the integrals.
    pub fn tolerance(&self) -> f64 {
        let floor = 1e-11 * (1.0 + self.lhs.value.abs() + self.rhs.value.abs());
        crate::sphere::grid::TOLERANCE_FACTOR * self.combined_error + floor
    }

    pub fn passes(&self) -> bool {
        self.residual <= self.tolerance()
    }
}

fn check_inputs(f: &SphericalFunction, phi: &SphericalFunction, k: &SupportBody, i: usize) -> Result<()> {
    let n = k.dim();
    if f.dim() != n || phi.dim() != n {
        return Err(Error::domain("dimension mismatch"));
    }
    if i < 1 || i + 1 > n {
        return Err(Error::domain(format!("order must lie in 1..={}, got {i}", n - 1)));
    }
    k.require_certified()
}

/// `∫ f S^{kj}(Q(h)) q_kj(φ)` against `∫ φ S^{kj}(Q(h)) q_kj(f)`.
pub fn ibp_symmetry_residual(
    f: &SphericalFunction,
    phi: &SphericalFunction,
    k: &SupportBody,
    i: usize,
    grid: &QuadratureGrid,
) -> Result<IbpReport> {
    check_inputs(f, phi, k, i)?;
    let field = grid.map(|u| {
        let qh = k.q(u)?;
        Ok(vec![
            f.value(u) * trace_pair(&qh, &q_matrix(phi, u)?, i)?,
            phi.value(u) * trace_pair(&qh, &q_matrix(f, u)?, i)?,
        ])
    })?;
    let parts = grid.integrate_vec(&field)?;
    Ok(IbpReport::new(parts[0], parts[1]))
}

/// Same with the matrix `m_jk = S^{jk,rs}(Q(h)) q_rs(φ)` in place of the cofactor.
pub fn ibp_second_order_residual(
    f: &SphericalFunction,
    phi: &SphericalFunction,
    k: &SupportBody,
    i: usize,
    grid: &QuadratureGrid,
) -> Result<IbpReport> {
    check_inputs(f, phi, k, i)?;
    let field = grid.map(|u| {
        let t = cofactor2(&k.q(u)?, i)?;
        let qphi = q_matrix(phi, u)?;
        let qf = q_matrix(f, u)?;
        Ok(vec![f.value(u) * t.contract_both(&qphi, &qphi), phi.value(u) * t.contract_both(&qf, &qphi)])
    })?;
    let parts = grid.integrate_vec(&field)?;
    Ok(IbpReport::new(parts[0], parts[1]))
}

/// Point of the stereographic chart from `-u`, scaled so the differential
/// at the origin is the tangent frame.
fn chart_point(u: &DVector<f64>, frame: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let r2 = y.norm_squared() / 4.0;
    (u * (1.0 - r2) + frame * y) / (1.0 + r2)
}

/// Cofactor field as an ambient `n × n` matrix `E S_i^{jk}(Q(φ)) Eᵀ`; this is
/// independent of the frame chosen at `x`.
fn ambient_cofactor(phi: &SphericalFunction, i: usize, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    let frame = tangent_frame(x)?;
    let e = frame.matrix();
    let c = cofactor(&q_matrix(phi, x)?, i)?;
    Ok(e * c.as_matrix() * e.transpose())
}

/// Divergence of the cofactor field `S_i^{jk}(Q(φ))` at `u`, one component
/// per frame direction.
///
/// For a tangent tensor field `T` written as an ambient matrix, the
/// covariant divergence is `w ↦ Σ_j wᵀ (D_{e_j} T) e_j`; the directional
/// derivatives are central differences along the chart axes.
pub fn cheng_yau_pointwise(phi: &SphericalFunction, i: usize, u: &DVector<f64>, step: f64) -> Result<Vec<f64>> {
    let n = phi.dim();
    if i < 1 || i + 1 > n {
        return Err(Error::domain(format!("order must lie in 1..={}, got {i}", n - 1)));
    }
    if !(step > 0.0 && step < 0.5) {
        return Err(Error::domain("step must lie in (0, 0.5)"));
    }
    let frame = tangent_frame(u)?;
    let e = frame.matrix();
    let m = n - 1;
    let mut div = DVector::<f64>::zeros(n);
    for j in 0..m {
        let mut y = DVector::zeros(m);
        y[j] = step;
        let plus = ambient_cofactor(phi, i, &chart_point(u, e, &y))?;
        let minus = ambient_cofactor(phi, i, &chart_point(u, e, &(-y)))?;
        let d = (plus - minus) / (2.0 * step);
        div += d * e.column(j);
    }
    let comps = e.transpose() * div;
    if comps.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluation { node: u.iter().copied().collect(), msg: "non-finite divergence".into() });
    }
    Ok(comps.iter().copied().collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerReport {
    /// `max_u ‖S^{kj,rs}(Q) q_rs − (i−1) S^{kj}(Q)‖ / ‖S^{kj}(Q)‖`.
    pub max_relative_residual: f64,
    /// Least-squares `c` in `S^{kj,rs}(Q) q_rs = c S^{kj}(Q)` over all nodes.
    pub fitted_constant: f64,
}

pub fn euler_homogeneity_residual(k: &SupportBody, i: usize, grid: &QuadratureGrid) -> Result<EulerReport> {
    k.require_certified()?;
    let n = k.dim();
    if i < 1 || i + 1 > n {
        return Err(Error::domain(format!("order must lie in 1..={}, got {i}", n - 1)));
    }
    let c = i as f64 - 1.0;
    let rows = grid.map(|u| {
        let q = k.q(u)?;
        let contracted = cofactor2(&q, i)?.contract(&q);
        let cof = cofactor(&q, i)?;
        let (cm, sm) = (contracted.as_matrix(), cof.as_matrix());
        let rel = (cm - sm * c).norm() / sm.norm();
        Ok((rel, cm.dot(sm), sm.dot(sm)))
    })?;
    let max_relative_residual = rows.fine.iter().map(|r| r.0).fold(0.0, f64::max);
    let (num, den) = rows.fine.iter().fold((0.0, 0.0), |acc, r| (acc.0 + r.1, acc.1 + r.2));
    Ok(EulerReport { max_relative_residual, fitted_constant: num / den })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::{ball, ellipsoid};
    use crate::sphere::grid::spiral;
    use crate::sphere::{unit_vector, Polynomial};

    #[test]
    fn equal_functions_give_zero_residual() {
        let grid = spiral(512);
        let f = SphericalFunction::polynomial(Polynomial::parse("1 + 0.3*x1*x2", 3).unwrap());
        let r = ibp_symmetry_residual(&f, &f, &ellipsoid(&[1.0, 2.0, 3.0]).unwrap(), 2, &grid).unwrap();
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn weak_form_holds_on_ellipsoid() {
        let grid = spiral(8192);
        let f = SphericalFunction::polynomial(Polynomial::parse("1 + 0.3*x1*x2 - 0.2*x3^3", 3).unwrap());
        let phi = SphericalFunction::polynomial(Polynomial::parse("x1^2 - 0.5*x2*x3 + 0.1", 3).unwrap());
        let k = ellipsoid(&[1.0, 2.0, 3.0]).unwrap();
        for i in 1..=2 {
            let r = ibp_symmetry_residual(&f, &phi, &k, i, &grid).unwrap();
            assert!(r.passes(), "i={i} {r:?}");
        }
        let r2 = ibp_second_order_residual(&f, &phi, &k, 2, &grid).unwrap();
        assert!(r2.passes(), "{r2:?}");
        let r1 = ibp_second_order_residual(&f, &phi, &k, 1, &grid).unwrap();
        assert_eq!((r1.lhs.value, r1.rhs.value), (0.0, 0.0));
    }

    #[test]
    fn divergence_vanishes_pointwise() {
        let k = ellipsoid(&[1.0, 2.0, 3.0]).unwrap();
        let d = cheng_yau_pointwise(k.h(), 2, &unit_vector(3, 2), 1e-3).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-3), "{d:?}");
        let p = SphericalFunction::polynomial(Polynomial::parse("x1^3 - x1*x2*x4 + 0.5*x3^2", 4).unwrap());
        let u = DVector::from_vec(vec![0.5, -0.5, 0.5, 0.5]);
        for i in 1..=3 {
            let d = cheng_yau_pointwise(&p, i, &u, 1e-3).unwrap();
            assert!(d.iter().all(|v| v.abs() < 1e-3), "i={i} {d:?}");
        }
    }

    #[test]
    fn euler_constant_is_order_minus_one() {
        let grid = spiral(256);
        let r = euler_homogeneity_residual(&ball(3, 1.0).unwrap(), 2, &grid).unwrap();
        assert!(r.max_relative_residual < 1e-14);
        let g5 = crate::sphere::grid::monte_carlo(5, 64, 1);
        let r = euler_homogeneity_residual(&ellipsoid(&[1.0, 2.0, 0.5, 3.0, 1.5]).unwrap(), 3, &g5).unwrap();
        assert!(r.max_relative_residual < 1e-8);
        assert!((r.fitted_constant - 2.0).abs() < 1e-8);
    }
}
