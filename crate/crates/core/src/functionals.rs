//! Area-measure densities, the functional `F(K) = ∫ f S_i(Q(h_K))`, mixed
//! volumes of smooth bodies and the first and second variations of `F`.
//!
//! Densities follow the unnormalized convention: the `i`-th area measure of
//! a smooth body has density `S_i(Q(h))`. The usual normalized mixed area
//! measure differs by `C(n-1, i)`; records that compare with classical
//! mixed volumes report that factor as `convention_factor`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::bodies::{PerturbationFamily, SupportBody};
use crate::sphere::{q_matrix, Integral, QuadratureGrid, SphericalFunction};
use crate::symfun::{binomial, cofactor2, elem_sym, mixed_discriminant, trace_pair, SymMatrix};
use crate::{Error, Result};

/// Integrand `f`, order `i`, and optional companion bodies `K_1..K_{n-i-1}`.
#[derive(Clone, Debug)]
pub struct FunctionalSpec {
    pub f: SphericalFunction,
    pub order: usize,
    pub companions: Option<Vec<SupportBody>>,
}

impl FunctionalSpec {
    pub fn new(f: SphericalFunction, order: usize) -> Result<Self> {
        let n = f.dim();
        if order < 1 || order + 1 > n {
            return Err(Error::domain(format!("order must lie in 1..={}, got {order}", n - 1)));
        }
        Ok(FunctionalSpec { f, order, companions: None })
    }

    /// Mixed form `∫ f dS(K[i], K_1, …, K_{n-i-1})`.
    pub fn mixed(f: SphericalFunction, order: usize, companions: Vec<SupportBody>) -> Result<Self> {
        let mut spec = Self::new(f, order)?;
        let n = spec.dim();
        if companions.len() != n - 1 - order {
            return Err(Error::domain(format!(
                "mixed form needs {} companions, got {}",
                n - 1 - order,
                companions.len()
            )));
        }
        for c in &companions {
            if c.dim() != n {
                return Err(Error::domain("companion dimension mismatch"));
            }
            c.require_certified()?;
        }
        spec.companions = Some(companions);
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    fn check_body(&self, k: &SupportBody) -> Result<()> {
        if k.dim() != self.dim() {
            return Err(Error::domain("body and integrand dimensions differ"));
        }
        k.require_certified()
    }

    /// Density of the (mixed) area measure of `K` at `u`.
    pub fn density(&self, k: &SupportBody, u: &DVector<f64>) -> Result<f64> {
        let qk = k.q(u)?;
        match &self.companions {
            None => elem_sym(&qk, self.order),
            Some(comp) => {
                let others = comp.iter().map(|c| c.q(u)).collect::<Result<Vec<_>>>()?;
                mixed_density(&qk, self.order, &others)
            }
        }
    }
}

/// `C(N, i) · D(A[i], B_1, …, B_{N-i})`; equals `S_i(A)` when every `B_k = I`.
pub fn mixed_density(a: &SymMatrix, i: usize, others: &[SymMatrix]) -> Result<f64> {
    let n = a.dim();
    if i + others.len() != n {
        return Err(Error::domain("mixed density needs N matrices in total"));
    }
    let mut mats: Vec<SymMatrix> = std::iter::repeat_n(a.clone(), i).collect();
    mats.extend(others.iter().cloned());
    Ok(binomial(n, i) * mixed_discriminant(&mats)?)
}

/// `S_i(Q(h_K, u))`.
pub fn area_density(k: &SupportBody, i: usize, u: &DVector<f64>) -> Result<f64> {
    k.require_certified()?;
    elem_sym(&k.q(u)?, i)
}

/// `F(K)` by quadrature, with the grid-doubling error estimate.
pub fn functional_f(spec: &FunctionalSpec, k: &SupportBody, grid: &QuadratureGrid) -> Result<Integral> {
    spec.check_body(k)?;
    grid.integrate(|u| Ok(spec.f.value(u) * spec.density(k, u)?))
}

/// Mixed-volume output record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedVolumeRecord {
    /// `(1/n) ∫ h_L S_i(Q(h_K)) dH^{n-1}`.
    pub value: f64,
    pub error_estimate: f64,
    pub grid: String,
    /// `C(n-1, i)`: `value = convention_factor · V(K[i], B[n-1-i], L)`.
    pub convention_factor: f64,
    pub mixed_volume: f64,
}

pub fn mixed_volume_smooth(l: &SupportBody, k: &SupportBody, i: usize, grid: &QuadratureGrid) -> Result<MixedVolumeRecord> {
    let n = k.dim();
    l.require_certified()?;
    let spec = FunctionalSpec::new(l.h().clone(), i)?;
    let int = functional_f(&spec, k, grid)?.scaled(1.0 / n as f64);
    let factor = binomial(n - 1, i);
    Ok(MixedVolumeRecord {
        value: int.value,
        error_estimate: int.error_estimate,
        grid: grid.id(),
        convention_factor: factor,
        mixed_volume: int.value / factor,
    })
}

/// `F(K)`, `H'(0)` and both forms of `H''(0)` for `H(s) = F(K + sφ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variations {
    pub value: Integral,
    pub first: Integral,
    /// `∫ f S^{kj,rs}(Q(h)) q_kj(φ) q_rs(φ)`.
    pub second_direct: Integral,
    /// `∫ φ S^{kj,rs}(Q(h)) q_kj(f) q_rs(φ)`, after integrating by parts twice.
    pub second_by_parts: Integral,
}

impl Variations {
    /// `H(0)H''(0) - ((i-1)/i) H'(0)²` using the direct second variation.
    pub fn concavity_defect(&self, order: usize) -> Integral {
        let c = (order as f64 - 1.0) / order as f64;
        let f = |v: f64, d1: f64, d2: f64| v * d2 - c * d1 * d1;
        Integral::new(
            f(self.value.value, self.first.value, self.second_direct.value),
            f(self.value.coarse_value, self.first.coarse_value, self.second_direct.coarse_value),
        )
    }
}

/// All variation integrals in one pass over the grid.
pub fn variations(
    spec: &FunctionalSpec,
    k: &SupportBody,
    phi: &SphericalFunction,
    grid: &QuadratureGrid,
) -> Result<Variations> {
    spec.check_body(k)?;
    if spec.companions.is_some() {
        return Err(Error::domain("variations are implemented for the plain (non-mixed) functional"));
    }
    let i = spec.order;
    let field = grid.map(|u| {
        let qh = k.q(u)?;
        let qphi = q_matrix(phi, u)?;
        let qf = q_matrix(&spec.f, u)?;
        let (fv, pv) = (spec.f.value(u), phi.value(u));
        let t2 = cofactor2(&qh, i)?;
        Ok(vec![
            fv * elem_sym(&qh, i)?,
            fv * trace_pair(&qh, &qphi, i)?,
            fv * t2.contract_both(&qphi, &qphi),
            pv * t2.contract_both(&qf, &qphi),
        ])
    })?;
    let parts = grid.integrate_vec(&field)?;
    Ok(Variations { value: parts[0], first: parts[1], second_direct: parts[2], second_by_parts: parts[3] })
}

/// `H'(0) = ∫ f S^{kj}(Q(h)) q_kj(φ)`.
pub fn first_variation(spec: &FunctionalSpec, family: &PerturbationFamily, grid: &QuadratureGrid) -> Result<Integral> {
    spec.check_body(family.base())?;
    let i = spec.order;
    let phi = family.phi();
    let k = family.base();
    grid.integrate(|u| Ok(spec.f.value(u) * trace_pair(&k.q(u)?, &q_matrix(phi, u)?, i)?))
}

/// Both forms of `H''(0)`; they agree up to quadrature error.
pub fn second_variation(
    spec: &FunctionalSpec,
    family: &PerturbationFamily,
    grid: &QuadratureGrid,
) -> Result<(Integral, Integral)> {
    let v = variations(spec, family.base(), family.phi(), grid)?;
    Ok((v.second_direct, v.second_by_parts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::{ball, ellipsoid};
    use crate::sphere::grid::{spiral, super_fibonacci};
    use crate::sphere::sphere_area;

    #[test]
    fn ball_density_and_functional() {
        let grid = spiral(2048);
        let b = ball(3, 2.0).unwrap();
        let u = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        assert!((area_density(&b, 2, &u).unwrap() - 4.0).abs() < 1e-12);
        let spec = FunctionalSpec::new(SphericalFunction::constant(3, 1.0), 1).unwrap();
        let f = functional_f(&spec, &ball(3, 1.0).unwrap(), &grid).unwrap();
        assert!((f.value - 2.0 * sphere_area(3)).abs() < 1e-9);
    }

    #[test]
    fn companions_of_balls_match_plain_form() {
        let k = ellipsoid(&[1.0, 2.0, 3.0, 1.5]).unwrap();
        let f = SphericalFunction::constant(4, 1.0);
        let plain = FunctionalSpec::new(f.clone(), 1).unwrap();
        let mixed = FunctionalSpec::mixed(f, 1, vec![ball(4, 1.0).unwrap(), ball(4, 1.0).unwrap()]).unwrap();
        let grid4 = super_fibonacci(512, 0);
        let a = functional_f(&plain, &k, &grid4).unwrap().value;
        let b = functional_f(&mixed, &k, &grid4).unwrap().value;
        assert!((a - b).abs() < 1e-10 * a.abs());
        assert!(FunctionalSpec::mixed(SphericalFunction::constant(4, 1.0), 1, vec![]).is_err());
    }

    #[test]
    fn ball_mixed_volume_is_ball_volume() {
        let grid = spiral(8192);
        let b = ball(3, 1.0).unwrap();
        let rec = mixed_volume_smooth(&b, &b, 2, &grid).unwrap();
        assert!((rec.mixed_volume - 4.0 / 3.0 * std::f64::consts::PI).abs() < 5e-3 * rec.mixed_volume);
        assert_eq!(rec.convention_factor, 1.0);
    }

    #[test]
    fn uncertified_body_is_rejected() {
        let grid = spiral(64);
        let k = SupportBody::new(SphericalFunction::constant(3, 1.0), "raw");
        let spec = FunctionalSpec::new(SphericalFunction::constant(3, 1.0), 1).unwrap();
        assert!(functional_f(&spec, &k, &grid).is_err());
    }
}
