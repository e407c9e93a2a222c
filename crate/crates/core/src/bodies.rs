//! Smooth convex bodies given by support functions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::sphere::{q_matrix, tangent_frame, NodeField, QuadratureGrid, SphericalFunction};
use crate::symfun::SymMatrix;
use crate::{Error, Result};

/// Default certification margin.
pub const DEFAULT_MARGIN: f64 = 1e-6;

/// Evidence that `Q(h, u)` is positive definite.
///
/// `grid` is `"analytic"` when the bound comes from a closed form (balls,
/// ellipsoids, positive combinations of certified bodies).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub grid: String,
    pub min_eigenvalue: f64,
    pub worst_node: Option<Vec<f64>>,
    pub margin: f64,
}

impl Certificate {
    pub(crate) fn analytic(min_eigenvalue: f64) -> Self {
        Certificate { grid: "analytic".into(), min_eigenvalue, worst_node: None, margin: DEFAULT_MARGIN }
    }
}

#[derive(Clone, Debug)]
pub struct SupportBody {
    h: SphericalFunction,
    label: String,
    certificate: Option<Certificate>,
}

impl SupportBody {
    /// An uncertified body; call [`certify_c2plus`] before using it in functionals.
    pub fn new(h: SphericalFunction, label: impl Into<String>) -> Self {
        SupportBody { h, label: label.into(), certificate: None }
    }

    pub fn h(&self) -> &SphericalFunction {
        &self.h
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        self.certificate.as_ref()
    }

    pub fn is_certified(&self) -> bool {
        self.certificate.is_some()
    }

    /// Attaches a certificate obtained outside this module (e.g. a patch scan
    /// combined with a closed-form bound).
    pub(crate) fn with_certificate(mut self, certificate: Certificate) -> Self {
        self.certificate = Some(certificate);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn q(&self, u: &DVector<f64>) -> Result<SymMatrix> {
        q_matrix(&self.h, u)
    }

    pub fn require_certified(&self) -> Result<()> {
        if self.is_certified() {
            Ok(())
        } else {
            Err(Error::domain(format!("body `{}` has no C2+ certificate", self.label)))
        }
    }

    /// `rK` for `r > 0`.
    pub fn scaled(&self, r: f64) -> Result<SupportBody> {
        if !(r > 0.0) {
            return Err(Error::domain(format!("scale factor must be positive, got {r}")));
        }
        let certificate = self.certificate.clone().map(|c| Certificate { min_eigenvalue: r * c.min_eigenvalue, ..c });
        Ok(SupportBody { h: self.h.scale(r), label: format!("{r}*({})", self.label), certificate })
    }

    /// `K + v`; `Q` is unchanged, so the certificate carries over.
    pub fn translated(&self, v: &DVector<f64>) -> Result<SupportBody> {
        if v.len() != self.dim() {
            return Err(Error::domain("translation dimension mismatch"));
        }
        Ok(SupportBody {
            h: self.h.add(&SphericalFunction::linear(v.clone())),
            label: format!("({}) + v", self.label),
            certificate: self.certificate.clone(),
        })
    }

    /// Rotated body `ρK`, with support function `u ↦ h(ρᵀu)`.
    pub fn rotated(&self, rot: &DMatrix<f64>) -> SupportBody {
        SupportBody {
            h: self.h.compose_rotation(rot.transpose()),
            label: format!("rot({})", self.label),
            certificate: self.certificate.clone(),
        }
    }
}

pub fn ball(n: usize, r: f64) -> Result<SupportBody> {
    if !(r > 0.0) || n < 2 {
        return Err(Error::domain(format!("ball needs n >= 2 and r > 0, got ({n}, {r})")));
    }
    Ok(SupportBody {
        h: SphericalFunction::constant(n, r),
        label: format!("ball:{r}"),
        certificate: Some(Certificate::analytic(r)),
    })
}

/// Support function of `{x : Σ x_k² / A_k ≤ 1}`, i.e. `h(u) = √(Σ A_k u_k²)`.
pub fn ellipsoid(a: &[f64]) -> Result<SupportBody> {
    if a.len() < 2 || a.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::domain(format!("ellipsoid parameters must be positive, got {a:?}")));
    }
    let label = format!("ellipsoid:{}", a.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
    quadratic_body(DMatrix::from_diagonal(&DVector::from_row_slice(a)), label)
}

/// Body with support `√(xᵀ M x)` for `M > 0`; its principal radii are bounded
/// below by `λ_min(M) / √λ_max(M)`.
pub fn quadratic_body(m: DMatrix<f64>, label: impl Into<String>) -> Result<SupportBody> {
    let sym = SymMatrix::new(m)?;
    let eig = sym.eigenvalues();
    let (lo, hi) = (eig[0], eig[eig.len() - 1]);
    if !(lo > 0.0) {
        return Err(Error::domain("quadratic support needs a positive definite matrix"));
    }
    Ok(SupportBody {
        h: SphericalFunction::quadratic_support(sym.into_matrix()),
        label: label.into(),
        certificate: Some(Certificate::analytic(lo / hi.sqrt())),
    })
}

/// An ellipsoid with `Q(h, u) = A`: support `√(xᵀ M x)` with
/// `M = E A Eᵀ + u uᵀ`, `E` the tangent frame at `u`.
pub fn realize_q(a: &SymMatrix, u: &DVector<f64>) -> Result<SupportBody> {
    let frame = tangent_frame(u)?;
    if a.dim() + 1 != u.len() {
        return Err(Error::domain("realize_q: A must have dimension n-1"));
    }
    if !(a.min_eigenvalue() > 0.0) {
        return Err(Error::domain("realize_q: A must be positive definite"));
    }
    let e = frame.matrix();
    let m = e * a.as_matrix() * e.transpose() + u * u.transpose();
    quadratic_body(SymMatrix::symmetrized(m).into_matrix(), "realize_q")
}

/// `αK + βL` with `α, β ≥ 0`, `α + β > 0`.
pub fn combine(alpha: f64, k: &SupportBody, beta: f64, l: &SupportBody) -> Result<SupportBody> {
    if k.dim() != l.dim() {
        return Err(Error::domain("combine: dimension mismatch"));
    }
    if !(alpha >= 0.0 && beta >= 0.0 && alpha + beta > 0.0) {
        return Err(Error::domain(format!("combine needs α, β ≥ 0 with α + β > 0, got ({alpha}, {beta})")));
    }
    let h = SphericalFunction::combination(vec![(alpha, k.h.clone()), (beta, l.h.clone())]);
    // Weyl: λ_min(αQ_K + βQ_L) ≥ α λ_min(Q_K) + β λ_min(Q_L).
    let bound = |w: f64, b: &SupportBody| {
        if w == 0.0 {
            Some(0.0)
        } else {
            b.certificate.as_ref().map(|c| w * c.min_eigenvalue)
        }
    };
    let certificate = match (bound(alpha, k), bound(beta, l)) {
        (Some(x), Some(y)) if x + y > 0.0 => Some(Certificate::analytic(x + y)),
        _ => None,
    };
    Ok(SupportBody { h, label: format!("{alpha}*({}) + {beta}*({})", k.label, l.label), certificate })
}

/// Node-wise smallest eigenvalue of `Q(f, ·)`.
pub fn min_eigenvalue_field(f: &SphericalFunction, grid: &QuadratureGrid) -> Result<NodeField<f64>> {
    grid.map(|u| Ok(q_matrix(f, u)?.min_eigenvalue()))
}

/// Grid minimum of `λ_min(Q(f, ·))` and its node.
pub fn grid_min_eigenvalue(f: &SphericalFunction, grid: &QuadratureGrid) -> Result<(f64, DVector<f64>)> {
    let field = min_eigenvalue_field(f, grid)?;
    let (k, v) = field
        .fine
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, &v)| if v < acc.1 { (k, v) } else { acc });
    Ok((v, grid.nodes()[k].clone()))
}

/// Scans the grid; certifies when the minimum eigenvalue is at least `margin`.
pub fn certify_c2plus(body: &SupportBody, grid: &QuadratureGrid, margin: f64) -> Result<Certificate> {
    let (min, node) = grid_min_eigenvalue(&body.h, grid)?;
    let node: Vec<f64> = node.iter().copied().collect();
    if min >= margin {
        Ok(Certificate { grid: grid.id(), min_eigenvalue: min, worst_node: Some(node), margin })
    } else {
        Err(Error::Certification { label: body.label.clone(), node, min_eigenvalue: min })
    }
}

/// Certifies on the grid and attaches the certificate.
pub fn certified(body: SupportBody, grid: &QuadratureGrid, margin: f64) -> Result<SupportBody> {
    let cert = certify_c2plus(&body, grid, margin)?;
    Ok(SupportBody { certificate: Some(cert), ..body })
}

/// `h_s = h + sφ` for `|s| ≤ ε`.
#[derive(Clone, Debug)]
pub struct PerturbationFamily {
    base: SupportBody,
    phi: SphericalFunction,
    epsilon: f64,
    grid_id: String,
    min_eigenvalue: f64,
}

impl PerturbationFamily {
    pub fn base(&self) -> &SupportBody {
        &self.base
    }

    pub fn phi(&self) -> &SphericalFunction {
        &self.phi
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Lower bound for `λ_min(Q(h_s))` over the certification grid, `|s| ≤ ε`.
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    /// `K_s`. The certificate follows from concavity of `s ↦ λ_min(Q(h + sφ))`.
    pub fn body_at(&self, s: f64) -> Result<SupportBody> {
        if s.abs() > self.epsilon * (1.0 + 1e-12) {
            return Err(Error::domain(format!("|s| = {} exceeds ε = {}", s.abs(), self.epsilon)));
        }
        let h = SphericalFunction::combination(vec![(1.0, self.base.h.clone()), (s, self.phi.clone())]);
        Ok(SupportBody {
            h,
            label: format!("({}) + {s}*phi", self.base.label),
            certificate: Some(Certificate {
                grid: self.grid_id.clone(),
                min_eigenvalue: self.min_eigenvalue,
                worst_node: None,
                margin: self.min_eigenvalue,
            }),
        })
    }
}

/// Largest `ε ≤ 1` (bisection to 1e-3 relative) such that `h ± εφ` keep at
/// least half of the base margin on the grid.
pub fn perturbation_family(
    base: &SupportBody,
    phi: &SphericalFunction,
    grid: &QuadratureGrid,
) -> Result<PerturbationFamily> {
    base.require_certified()?;
    if phi.dim() != base.dim() {
        return Err(Error::domain("perturbation direction dimension mismatch"));
    }
    let qh = grid.map(|u| base.q(u))?;
    let qphi = grid.map(|u| q_matrix(phi, u))?;
    let base_margin = qh.fine.iter().map(|q| q.min_eigenvalue()).fold(f64::INFINITY, f64::min);
    if !(base_margin > 0.0) {
        return Err(Error::Certification {
            label: base.label.clone(),
            node: vec![],
            min_eigenvalue: base_margin,
        });
    }
    let target = base_margin / 2.0;
    let worst = |s: f64| -> f64 {
        qh.fine
            .iter()
            .zip(&qphi.fine)
            .map(|(a, b)| a.lin_comb(1.0, b, s).min_eigenvalue())
            .fold(f64::INFINITY, f64::min)
    };
    let ok = |s: f64| worst(s) >= target && worst(-s) >= target;
    let phi_scale = qphi.fine.iter().map(|q| q.norm()).fold(0.0, f64::max);
    let epsilon = if phi_scale < 1e-14 || ok(1.0) {
        1.0
    } else {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while hi - lo > 1e-3 * hi.max(1e-300) {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi < 1e-9 {
                break;
            }
        }
        lo
    };
    if epsilon < 1e-6 {
        return Err(Error::Search(format!(
            "no admissible ε ≥ 1e-6 for perturbing `{}` (base margin {base_margin:e})",
            base.label
        )));
    }
    let min_eigenvalue = worst(epsilon).min(worst(-epsilon));
    Ok(PerturbationFamily { base: base.clone(), phi: phi.clone(), epsilon, grid_id: grid.id(), min_eigenvalue })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::grid::spiral;
    use crate::sphere::{unit_vector, Polynomial};

    #[test]
    fn ball_has_radius_curvature() {
        let b = ball(3, 2.0).unwrap();
        let q = b.q(&DVector::from_vec(vec![0.0, 0.6, 0.8])).unwrap();
        assert!((q.as_matrix() - DMatrix::<f64>::identity(2, 2) * 2.0).amax() < 1e-12);
        assert_eq!(b.certificate().unwrap().min_eigenvalue, 2.0);
        assert!(ball(3, 0.0).is_err());
    }

    #[test]
    fn ellipsoid_q_at_pole() {
        let e = ellipsoid(&[2.0, 3.0, 1.0]).unwrap();
        let q = e.q(&unit_vector(3, 2)).unwrap();
        assert!((q.as_matrix() - DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]))).amax() < 1e-12);
        assert!(ellipsoid(&[1.0, -1.0, 1.0]).is_err());
    }

    #[test]
    fn realize_q_diagonal_case_is_ellipsoid() {
        let a = SymMatrix::from_diagonal(&[2.0, 3.0]);
        let k = realize_q(&a, &unit_vector(3, 2)).unwrap();
        let e = ellipsoid(&[2.0, 3.0, 1.0]).unwrap();
        let u = DVector::from_vec(vec![0.36, 0.48, 0.8]);
        assert!((k.h().value(&u) - e.h().value(&u)).abs() < 1e-14);
        assert!(realize_q(&SymMatrix::from_diagonal(&[1.0, -1.0]), &unit_vector(3, 2)).is_err());
    }

    #[test]
    fn combine_adds_balls() {
        let k = combine(1.0, &ball(3, 1.0).unwrap(), 1.0, &ball(3, 2.0).unwrap()).unwrap();
        let u = unit_vector(3, 0);
        assert!((k.h().value(&u) - 3.0).abs() < 1e-14);
        assert_eq!(k.certificate().unwrap().min_eigenvalue, 3.0);
        assert!(combine(0.0, &ball(3, 1.0).unwrap(), 0.0, &ball(3, 1.0).unwrap()).is_err());
        assert!(combine(1.0, &ball(3, 1.0).unwrap(), 1.0, &ball(4, 1.0).unwrap()).is_err());
    }

    #[test]
    fn certification_succeeds_and_fails() {
        let grid = spiral(2048);
        let e = SupportBody::new(ellipsoid(&[1.0, 4.0, 9.0]).unwrap().h().clone(), "e");
        assert!(certify_c2plus(&e, &grid, DEFAULT_MARGIN).unwrap().min_eigenvalue > 0.0);
        let bad = SupportBody::new(
            SphericalFunction::polynomial(Polynomial::parse("x1^2 - x2^2", 3).unwrap()),
            "saddle",
        );
        match certify_c2plus(&bad, &grid, DEFAULT_MARGIN) {
            Err(Error::Certification { min_eigenvalue, .. }) => assert!(min_eigenvalue < 0.0),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn perturbation_epsilon_bounds() {
        let grid = spiral(1024);
        let b = ball(3, 1.0).unwrap();
        let zero = SphericalFunction::constant(3, 0.0);
        assert_eq!(perturbation_family(&b, &zero, &grid).unwrap().epsilon(), 1.0);
        // Q(φ) for φ = 2 x1² has eigenvalues in [-4, 4]; keeping λ ≥ 1/2 needs ε ≈ 1/8.
        let phi = SphericalFunction::polynomial(Polynomial::parse("2*x1^2", 3).unwrap());
        let fam = perturbation_family(&b, &phi, &grid).unwrap();
        assert!(fam.epsilon() >= 0.5 / 4.0 * (1.0 - 1e-2), "{}", fam.epsilon());
        assert!(fam.body_at(2.0 * fam.epsilon()).is_err());
        assert!(fam.min_eigenvalue() >= 0.5 - 1e-9);
    }
}
