//! Cylinder decomposition of mixed area measures in R³ and the limit of
//! the rescaled functional as the cylinder grows.
//!
//! Flat bodies are replaced by thin ellipsoids: a planar ellipse with
//! semi-axes `(a, b)` becomes `ellipsoid(a², b², δ²)` and the unit segment
//! `[-e₃/2, e₃/2]` becomes `ellipsoid(δ², δ², 1/4)`. Quantities are computed
//! at several `δ` and extrapolated linearly to `δ = 0`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::bodies::{combine, ellipsoid, SupportBody};
use crate::sphere::grid::polar_graded;
use crate::sphere::{Integral, QuadratureGrid, SphericalFunction};
use crate::symfun::mixed_discriminant;
use crate::{Error, Result};

/// Thickness values used by default, largest first.
pub const DEFAULT_DELTAS: [f64; 3] = [0.05, 0.02, 0.01];

/// Nodes of the periodic trapezoid rule on the equator circle.
const CIRCLE_NODES: usize = 4096;

/// A planar ellipse in `E = {u₃ = 0}` thickened to a smooth body.
#[derive(Clone, Debug)]
pub struct FlattenedBody {
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    pub body3d: SupportBody,
}

impl FlattenedBody {
    pub fn new(a: f64, b: f64, delta: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::domain(format!("ellipse semi-axes must be positive, got ({a}, {b})")));
        }
        check_delta(delta)?;
        let body3d = ellipsoid(&[a * a, b * b, delta * delta])?.with_label(format!("flat:{a},{b};δ={delta}"));
        Ok(FlattenedBody { a, b, delta, body3d })
    }

    pub fn disc(r: f64, delta: f64) -> Result<Self> {
        Self::new(r, r, delta)
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(self.a, self.b, delta)
    }

    /// Support function of the planar ellipse at angle `θ`.
    pub fn planar_h(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        (self.a * self.a * c * c + self.b * self.b * s * s).sqrt()
    }

    /// `h'' + h` at angle `θ`, the density of the planar area measure.
    pub fn planar_density(&self, theta: f64) -> f64 {
        let h = self.planar_h(theta);
        (self.a * self.b).powi(2) / (h * h * h)
    }
}

/// `B + R·[-e₃/2, e₃/2]` with `B` the unit disc, both thickened by `δ`.
#[derive(Clone, Debug)]
pub struct CylinderApprox {
    pub radius: f64,
    pub delta: f64,
    pub body3d: SupportBody,
}

impl CylinderApprox {
    pub fn new(radius: f64, delta: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::domain(format!("cylinder length must be positive, got {radius}")));
        }
        check_delta(delta)?;
        let body3d = combine(1.0, &FlattenedBody::disc(1.0, delta)?.body3d, radius, &needle(delta)?)?
            .with_label(format!("cylinder:R={radius};δ={delta}"));
        Ok(CylinderApprox { radius, delta, body3d })
    }
}

/// The unit segment `[-e₃/2, e₃/2]` thickened by `δ`.
pub fn needle(delta: f64) -> Result<SupportBody> {
    check_delta(delta)?;
    Ok(ellipsoid(&[delta * delta, delta * delta, 0.25])?.with_label(format!("needle:δ={delta}")))
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta >= 1e-3 && delta <= 0.5) {
        return Err(Error::domain(format!("thickness δ must lie in [1e-3, 0.5], got {delta}")));
    }
    Ok(())
}

/// Grid resolving densities concentrated within `δ_min` of the poles and the equator.
pub fn reduction_grid(delta_min: f64) -> Result<QuadratureGrid> {
    polar_graded(128, delta_min / 4.0, 8)
}

fn require_s2(f: &SphericalFunction, grid: &QuadratureGrid) -> Result<()> {
    if f.dim() != 3 || grid.dim() != 3 {
        return Err(Error::domain("the cylinder reduction is implemented for n = 3 only"));
    }
    Ok(())
}

/// `∫_{S²} f D(Q(h_K), Q(h_L))` with `D(A, A) = det A`.
pub fn mixed_integral(f: &SphericalFunction, k: &SupportBody, l: &SupportBody, grid: &QuadratureGrid) -> Result<Integral> {
    k.require_certified()?;
    l.require_certified()?;
    grid.integrate(|u| Ok(f.value(u) * mixed_discriminant(&[k.q(u)?, l.q(u)?])?))
}

/// `∫_{S¹} g(θ) dθ` by the periodic trapezoid rule.
fn circle_integral(g: impl Fn(f64) -> f64) -> f64 {
    let step = std::f64::consts::TAU / CIRCLE_NODES as f64;
    (0..CIRCLE_NODES).map(|j| g(step * j as f64)).sum::<f64>() * step
}

fn equator(theta: f64) -> DVector<f64> {
    DVector::from_vec(vec![theta.cos(), theta.sin(), 0.0])
}

/// `∫_{S¹} f|_E dS^E(K)` for the planar ellipse.
pub fn planar_functional(f: &SphericalFunction, k: &FlattenedBody) -> f64 {
    circle_integral(|t| f.value(&equator(t)) * k.planar_density(t))
}

/// `V^E(L|_E, K) = (1/2) ∫_{S¹} h_L|_E dS^E(K)`.
pub fn planar_mixed_area(l: &SphericalFunction, k: &FlattenedBody) -> f64 {
    0.5 * planar_functional(l, k)
}

/// Linear extrapolation to `δ = 0` through the two last samples.
fn extrapolate(deltas: &[f64], values: &[f64]) -> f64 {
    let n = deltas.len();
    let (d1, d2) = (deltas[n - 2], deltas[n - 1]);
    let (v1, v2) = (values[n - 2], values[n - 1]);
    v2 - d2 * (v1 - v2) / (d1 - d2)
}

fn check_deltas(deltas: &[f64]) -> Result<()> {
    if deltas.len() < 2 || deltas.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::domain("need at least two thickness values in decreasing order"));
    }
    deltas.iter().try_for_each(|&d| check_delta(d))
}

/// Both sides of the cylinder decomposition, integrated against `f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderRecord {
    pub radius: f64,
    pub deltas: Vec<f64>,
    /// `∫ f D(Q(h_{K₁,δ}), Q(h_{cyl,δ}))` for each `δ`.
    pub lhs: Vec<Integral>,
    /// Extrapolation through the two smallest `δ`.
    pub extrapolated: f64,
    /// Extrapolation through the two largest `δ`; a stability check.
    pub extrapolated_coarse: f64,
    /// `(R/2) ∫_{S¹} f|_E dS^E(K₁)`.
    pub rhs_equatorial: f64,
    /// `V^E(K₁, B) (f(e₃) + f(-e₃))`.
    pub rhs_polar: f64,
    pub rhs: f64,
    pub residual: f64,
    /// `residual` over the right-hand side computed with `|f|`.
    pub relative_residual: f64,
}

/// `|LHS(δ → 0) − RHS|` for `∫ f dS(K₁, B + R[-e₃/2, e₃/2])`.
pub fn cylinder_lemma_residual(
    f: &SphericalFunction,
    k1: &FlattenedBody,
    radius: f64,
    deltas: &[f64],
    grid: &QuadratureGrid,
) -> Result<CylinderRecord> {
    require_s2(f, grid)?;
    check_deltas(deltas)?;
    let lhs = deltas
        .iter()
        .map(|&d| mixed_integral(f, &k1.with_delta(d)?.body3d, &CylinderApprox::new(radius, d)?.body3d, grid))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = lhs.iter().map(|v| v.value).collect();
    let extrapolated = extrapolate(deltas, &values);
    let extrapolated_coarse = extrapolate(&deltas[..2], &values[..2]);

    // V^E(K₁, B) = (1/2) ∫ h_B dS^E(K₁), half the perimeter of K₁.
    let v_e = planar_mixed_area(&SphericalFunction::constant(3, 1.0), k1);
    let (north, south) = (DVector::from_vec(vec![0.0, 0.0, 1.0]), DVector::from_vec(vec![0.0, 0.0, -1.0]));
    let rhs_equatorial = 0.5 * radius * planar_functional(f, k1);
    let rhs_polar = v_e * (f.value(&north) + f.value(&south));
    let rhs = rhs_equatorial + rhs_polar;
    let abs_f = circle_integral(|t| f.value(&equator(t)).abs() * k1.planar_density(t));
    let scale = 0.5 * radius * abs_f + v_e * (f.value(&north).abs() + f.value(&south).abs());
    let residual = (extrapolated - rhs).abs();
    Ok(CylinderRecord {
        radius,
        deltas: deltas.to_vec(),
        lhs,
        extrapolated,
        extrapolated_coarse,
        rhs_equatorial,
        rhs_polar,
        rhs,
        residual,
        relative_residual: residual / rhs.abs().max(scale).max(f64::MIN_POSITIVE),
    })
}

/// `(1/R) ∫ f dS(K, cylinder_R)` at each `R`, extrapolated in `δ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionRecord {
    pub radii: Vec<f64>,
    pub scaled: Vec<f64>,
    /// `(1/2) ∫_{S¹} f|_E dS^E(K)`.
    pub limit: f64,
    pub errors: Vec<f64>,
    pub relative_errors: Vec<f64>,
    /// Least-squares slope of `log |error|` against `log R`; `-1` for `O(1/R)`.
    pub observed_rate: Option<f64>,
    /// Limit estimate with the `1/R` term eliminated between the two largest radii.
    pub richardson: Option<f64>,
}

/// Convergence of the rescaled functional to the planar one as `R → ∞`.
pub fn dimension_reduction_limit(
    f: &SphericalFunction,
    k: &FlattenedBody,
    radii: &[f64],
    deltas: &[f64],
    grid: &QuadratureGrid,
) -> Result<ReductionRecord> {
    if radii.is_empty() || radii.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::domain("radii must be increasing"));
    }
    let scaled = radii
        .iter()
        .map(|&r| Ok(cylinder_lemma_residual(f, k, r, deltas, grid)?.extrapolated / r))
        .collect::<Result<Vec<f64>>>()?;
    let limit = 0.5 * planar_functional(f, k);
    let errors: Vec<f64> = scaled.iter().map(|v| v - limit).collect();
    let relative_errors = errors.iter().map(|e| e.abs() / limit.abs().max(f64::MIN_POSITIVE)).collect();
    let pts: Vec<(f64, f64)> =
        radii.iter().zip(&errors).filter(|(_, e)| e.abs() > 0.0).map(|(r, e)| (r.ln(), e.abs().ln())).collect();
    let observed_rate = (pts.len() >= 2).then(|| {
        let m = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let (mx, my) = (sx / m, sy / m);
        let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        num / den
    });
    let richardson = (radii.len() >= 2).then(|| {
        let n = radii.len();
        let (r1, r2) = (radii[n - 2], radii[n - 1]);
        (r2 * scaled[n - 1] - r1 * scaled[n - 2]) / (r2 - r1)
    });
    Ok(ReductionRecord { radii: radii.to_vec(), scaled, limit, errors, relative_errors, observed_rate, richardson })
}

/// `3 V(L, K₁, [-e₃/2, e₃/2])` against `V^E(L|_E, K₁)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentFactorRecord {
    pub deltas: Vec<f64>,
    pub lhs: Vec<Integral>,
    pub extrapolated: f64,
    pub rhs: f64,
    pub residual: f64,
    pub relative_residual: f64,
}

pub fn segment_factor_identity(
    k1: &FlattenedBody,
    l: &SupportBody,
    deltas: &[f64],
    grid: &QuadratureGrid,
) -> Result<SegmentFactorRecord> {
    require_s2(l.h(), grid)?;
    check_deltas(deltas)?;
    let lhs = deltas
        .iter()
        .map(|&d| mixed_integral(l.h(), &k1.with_delta(d)?.body3d, &needle(d)?, grid))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = lhs.iter().map(|v| v.value).collect();
    let extrapolated = extrapolate(deltas, &values);
    let rhs = planar_mixed_area(l.h(), k1);
    let residual = (extrapolated - rhs).abs();
    Ok(SegmentFactorRecord {
        deltas: deltas.to_vec(),
        lhs,
        extrapolated,
        rhs,
        residual,
        relative_residual: residual / rhs.abs().max(f64::MIN_POSITIVE),
    })
}

/// `(1/R) ∫ f dS(K, cylinder_R)` for a single thickened body `K`.
pub fn scaled_functional(f: &SphericalFunction, k: &SupportBody, radius: f64, delta: f64, grid: &QuadratureGrid) -> Result<Integral> {
    require_s2(f, grid)?;
    Ok(mixed_integral(f, k, &CylinderApprox::new(radius, delta)?.body3d, grid)?.scaled(1.0 / radius))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::ball;
    use crate::sphere::Polynomial;
    use std::f64::consts::PI;

    fn poly(src: &str) -> SphericalFunction {
        SphericalFunction::polynomial(Polynomial::parse(src, 3).unwrap())
    }

    #[test]
    fn planar_quantities_match_closed_forms() {
        let disc = FlattenedBody::disc(1.0, 0.05).unwrap();
        let one = SphericalFunction::constant(3, 1.0);
        assert!((planar_functional(&one, &disc) - 2.0 * PI).abs() < 1e-12);
        let e = FlattenedBody::new(2.0, 1.0, 0.05).unwrap();
        // ∫ h'' + h = perimeter; ∫ h_B dS^E(E) / 2 with h = 1 gives half of it.
        let perimeter = circle_integral(|t| (4.0 * t.sin().powi(2) + t.cos().powi(2)).sqrt());
        assert!((planar_functional(&one, &e) - perimeter).abs() < 1e-9);
        // V^E(E, E) = area = πab.
        let h_e = ellipsoid(&[4.0, 1.0, 1.0]).unwrap().h().clone();
        assert!((planar_mixed_area(&h_e, &e) - 2.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn disc_with_unit_integrand() {
        let grid = reduction_grid(0.01).unwrap();
        let one = SphericalFunction::constant(3, 1.0);
        let disc = FlattenedBody::disc(1.0, 0.05).unwrap();
        for r in [1.0, 2.0] {
            let rec = cylinder_lemma_residual(&one, &disc, r, &DEFAULT_DELTAS, &grid).unwrap();
            assert!((rec.rhs - (PI * r + 2.0 * PI)).abs() < 1e-9);
            assert!(rec.relative_residual < 0.02, "{rec:?}");
            assert!((rec.extrapolated - rec.extrapolated_coarse).abs() < 0.04 * rec.rhs, "{rec:?}");
        }
    }

    #[test]
    fn odd_integrand_and_general_ellipse() {
        let grid = reduction_grid(0.01).unwrap();
        let e = FlattenedBody::new(1.5, 0.8, 0.05).unwrap();
        let odd = cylinder_lemma_residual(&poly("x3"), &e, 1.0, &DEFAULT_DELTAS, &grid).unwrap();
        assert_eq!(odd.rhs, 0.0);
        assert!(odd.relative_residual < 0.02, "{odd:?}");
        let g = poly("1 + 0.5*x1^2 - 0.3*x2 + 0.4*x3^2");
        let rec = cylinder_lemma_residual(&g, &e, 2.0, &DEFAULT_DELTAS, &grid).unwrap();
        assert!(rec.relative_residual < 0.02, "{rec:?}");
    }

    #[test]
    fn segment_factor_for_disc_and_ball() {
        let grid = reduction_grid(0.01).unwrap();
        let disc = FlattenedBody::disc(1.0, 0.05).unwrap();
        for l in [disc.body3d.clone(), ball(3, 1.0).unwrap()] {
            let rec = segment_factor_identity(&disc, &l, &DEFAULT_DELTAS, &grid).unwrap();
            assert!((rec.rhs - PI).abs() < 1e-9);
            assert!(rec.relative_residual < 0.02, "{rec:?}");
        }
    }

    #[test]
    fn scaled_functional_approaches_planar_limit() {
        let grid = reduction_grid(0.01).unwrap();
        let one = SphericalFunction::constant(3, 1.0);
        let disc = FlattenedBody::disc(1.0, 0.05).unwrap();
        let rec = dimension_reduction_limit(&one, &disc, &[2.0, 8.0, 32.0], &DEFAULT_DELTAS, &grid).unwrap();
        assert!((rec.limit - PI).abs() < 1e-9);
        // (1/R)(πR + 2π) - π = 2π/R
        for (r, e) in rec.radii.iter().zip(&rec.errors) {
            assert!((e - 2.0 * PI / r).abs() < 0.02 * PI, "{rec:?}");
        }
        assert!((rec.observed_rate.unwrap() + 1.0).abs() < 0.1);
        assert!((rec.richardson.unwrap() - PI).abs() < 0.02 * PI);
    }
}
