//! Oscillating test functions on a tangent patch and the odd extension of
//! hemisphere-supported functions.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use crate::sphere::function::{smoothstep, AmbientFn, Lifted, SphereFn};
use crate::sphere::{aligned_frame, QuadratureGrid, SphericalFunction, TangentFrame};
use crate::{Error, Result};

/// Triangle wave `ε·g(x/ε)` with `g(t) = 1 - |t|` on `[-1, 1]`, period 2.
fn hat_wave(x: f64, eps: f64) -> (f64, f64, f64) {
    let t = (x / eps + 1.0).rem_euclid(2.0) - 1.0;
    (eps * (1.0 - t.abs()), -t.signum(), 0.0)
}

/// Gaussian-smoothed hat wave (standard deviation `eta`), from its cosine series.
fn smooth_hat_wave(x: f64, eps: f64, eta: f64) -> (f64, f64, f64) {
    let (mut v, mut d1, mut d2) = (0.5 * eps, 0.0, 0.0);
    let mut k = 1.0;
    loop {
        let freq = k * PI / eps;
        let damp = (-0.5 * (freq * eta).powi(2)).exp();
        let c = eps * 4.0 / (PI * PI * k * k) * damp;
        if c < 1e-18 * eps || k > 1e5 {
            break;
        }
        let (s, co) = (freq * x).sin_cos();
        v += c * co;
        d1 -= c * freq * s;
        d2 -= c * freq * freq * co;
        k += 2.0;
    }
    (v, d1, d2)
}

/// Trapezoid `G`: 1 on `[-1/2, 1/2]`, 0 outside `[-1, 1]`, linear in between.
fn trapezoid(t: f64) -> (f64, f64, f64) {
    let a = t.abs();
    if a <= 0.5 {
        (1.0, 0.0, 0.0)
    } else if a < 1.0 {
        (2.0 * (1.0 - a), -2.0 * t.signum(), 0.0)
    } else {
        (0.0, 0.0, 0.0)
    }
}

/// `C³` version of the trapezoid with the same plateau and support.
fn smooth_trapezoid(t: f64) -> (f64, f64, f64) {
    let a = t.abs();
    let (v, d1, d2) = smoothstep(2.0 * (1.0 - a));
    (v, -2.0 * t.signum() * d1, 4.0 * d2)
}

/// `Φ_ε(x) = g_ε(x_1) G(x_1/ρ) ⋯ G(x_{n-1}/ρ)` in the orthographic chart at
/// `u₀` whose first axis is `v`, zero off the patch.
///
/// After [`smoothed`](Self::smoothed) the wave is convolved with a Gaussian of
/// deviation `η` (chart units) and each trapezoid is replaced by a `C³`
/// smoothstep profile with the same plateau and support, so the result is
/// `C³` with support in the patch.
#[derive(Clone, Debug)]
pub struct OscillatingTestFunction {
    frame: TangentFrame,
    rho: f64,
    eps: f64,
    smoothing: Option<f64>,
}

impl OscillatingTestFunction {
    pub fn new(u0: &DVector<f64>, v: &DVector<f64>, rho: f64, eps: f64) -> Result<Self> {
        let m = (u0.len() as f64 - 1.0).max(1.0);
        if !(rho > 0.0 && rho < 1.0) || rho * m.sqrt() >= 1.0 {
            return Err(Error::domain(format!("patch half-width ρ = {rho} must satisfy 0 < ρ√(n-1) < 1")));
        }
        if !(eps > 0.0) {
            return Err(Error::domain("oscillation scale ε must be positive"));
        }
        Ok(OscillatingTestFunction { frame: aligned_frame(u0, v)?, rho, eps, smoothing: None })
    }

    /// Chart-level mollification at scale `eta`.
    pub fn smoothed(&self, eta: f64) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::domain("smoothing scale must be positive"));
        }
        Ok(OscillatingTestFunction { smoothing: Some(eta), ..self.clone() })
    }

    pub fn frame(&self) -> &TangentFrame {
        &self.frame
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn smoothing(&self) -> Option<f64> {
        self.smoothing
    }

    fn wave(&self, x: f64) -> (f64, f64, f64) {
        match self.smoothing {
            None => hat_wave(x, self.eps),
            Some(eta) => smooth_hat_wave(x, self.eps, eta),
        }
    }

    fn cutoff(&self, x: f64) -> (f64, f64, f64) {
        let (v, d1, d2) = match self.smoothing {
            None => trapezoid(x / self.rho),
            Some(_) => smooth_trapezoid(x / self.rho),
        };
        (v, d1 / self.rho, d2 / (self.rho * self.rho))
    }

    /// `Φ`, `∇Φ` and `∇²Φ` at chart coordinates `x`.
    pub fn chart_jet(&self, x: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let m = x.len();
        let mut factors: Vec<(f64, f64, f64)> = x.iter().map(|&xj| self.cutoff(xj)).collect();
        let (w, w1, w2) = self.wave(x[0]);
        let (c, c1, c2) = factors[0];
        factors[0] = (w * c, w1 * c + w * c1, w2 * c + 2.0 * w1 * c1 + w * c2);
        let value: f64 = factors.iter().map(|f| f.0).product();
        let others = |skip: &[usize]| -> f64 {
            factors.iter().enumerate().filter(|(j, _)| !skip.contains(j)).map(|(_, f)| f.0).product()
        };
        let grad = DVector::from_fn(m, |j, _| factors[j].1 * others(&[j]));
        let hess = DMatrix::from_fn(m, m, |j, k| {
            if j == k {
                factors[j].2 * others(&[j])
            } else {
                factors[j].1 * factors[k].1 * others(&[j, k])
            }
        });
        (value, grad, hess)
    }

    pub fn to_function(&self) -> SphericalFunction {
        SphericalFunction::from_repr(Lifted::new(self.clone()))
    }
}

impl AmbientFn for OscillatingTestFunction {
    fn dim(&self) -> usize {
        self.frame.base().len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        if x.dot(self.frame.base()) <= 0.0 {
            return 0.0;
        }
        let y = self.frame.matrix().transpose() * x;
        self.chart_jet(y.as_slice()).0
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        if x.dot(self.frame.base()) <= 0.0 {
            return DVector::zeros(x.len());
        }
        let b = self.frame.matrix();
        let y = b.transpose() * x;
        b * self.chart_jet(y.as_slice()).1
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = x.len();
        if x.dot(self.frame.base()) <= 0.0 {
            return DMatrix::zeros(n, n);
        }
        let b = self.frame.matrix();
        let y = b.transpose() * x;
        b * self.chart_jet(y.as_slice()).2 * b.transpose()
    }
}

/// The Lipschitz test function `φ_ε` at `u0` oscillating along `v`.
pub fn oscillating_phi(u0: &DVector<f64>, v: &DVector<f64>, rho: f64, eps: f64, n: usize) -> Result<SphericalFunction> {
    if u0.len() != n || v.len() != n {
        return Err(Error::domain("oscillating_phi: dimension mismatch"));
    }
    Ok(OscillatingTestFunction::new(u0, v, rho, eps)?.to_function())
}

/// Collar half-width `|⟨u, p⟩| ≤ COLLAR` on which the odd extension requires
/// the input to vanish.
pub const COLLAR: f64 = 1e-2;

#[derive(Debug)]
struct OddExtension {
    psi: SphericalFunction,
    pole: DVector<f64>,
}

impl SphereFn for OddExtension {
    fn dim(&self) -> usize {
        self.psi.dim()
    }

    fn ext_value(&self, x: &DVector<f64>) -> f64 {
        if x.dot(&self.pole) > 0.0 {
            self.psi.value(x)
        } else {
            -self.psi.value(&(-x))
        }
    }

    fn ext_gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        Some(if x.dot(&self.pole) > 0.0 { self.psi.gradient(x) } else { self.psi.gradient(&(-x)) })
    }

    fn ext_hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(if x.dot(&self.pole) > 0.0 { self.psi.hessian(x) } else { -self.psi.hessian(&(-x)) })
    }
}

/// `φ̄(u) = ψ(u)` on `{⟨u, p⟩ > 0}` and `-ψ(-u)` elsewhere.
///
/// The support condition is checked on the nodes of `grid` with
/// `⟨u, p⟩ ≤ COLLAR`.
pub fn odd_extension(psi: &SphericalFunction, pole: &DVector<f64>, grid: &QuadratureGrid) -> Result<SphericalFunction> {
    if pole.len() != psi.dim() || grid.dim() != psi.dim() {
        return Err(Error::domain("odd_extension: dimension mismatch"));
    }
    let pole = pole.normalize();
    for u in grid.nodes().iter().chain(grid.coarse_only_nodes()) {
        let v = psi.value(u);
        if u.dot(&pole) <= COLLAR && v.abs() > 1e-12 {
            return Err(Error::domain(format!(
                "odd_extension: ψ = {v:e} at a node with ⟨u, p⟩ = {:.3e}; support must stay inside the open hemisphere",
                u.dot(&pole)
            )));
        }
    }
    Ok(SphericalFunction::from_repr(OddExtension { psi: psi.clone(), pole }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::grid::{patch_box, spiral};
    use crate::sphere::unit_vector;

    fn setup() -> (DVector<f64>, DVector<f64>) {
        (unit_vector(3, 2), unit_vector(3, 0))
    }

    #[test]
    fn smooth_wave_matches_hat_away_from_kinks() {
        let (eps, eta) = (0.1, 0.002);
        for x in [0.05, 0.13, -0.27] {
            let a = hat_wave(x, eps);
            let b = smooth_hat_wave(x, eps, eta);
            assert!((a.0 - b.0).abs() < 1e-6 && (a.1 - b.1).abs() < 1e-4, "{x}: {a:?} {b:?}");
        }
        assert!((smooth_hat_wave(0.0, 1.0, 1e-3).0 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn smooth_trapezoid_keeps_plateau_and_support() {
        for t in [-0.5, 0.0, 0.3, 0.5] {
            assert_eq!(smooth_trapezoid(t), (1.0, 0.0, 0.0));
        }
        for t in [-1.2, -1.0, 1.0, 3.0] {
            assert_eq!(smooth_trapezoid(t).0, 0.0);
        }
        assert!((smooth_trapezoid(0.75).0 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn amplitude_and_gradient_bounds() {
        let (u0, v) = setup();
        let (rho, eps) = (0.3, 0.02);
        let phi = OscillatingTestFunction::new(&u0, &v, rho, eps).unwrap();
        let frame = phi.frame().clone();
        let grid = patch_box(&frame, &[0.4, 0.4], &[40, 40], 4).unwrap();
        for u in grid.nodes() {
            let x = frame.matrix().transpose() * u;
            let (val, grad, _) = phi.chart_jet(x.as_slice());
            assert!((0.0..=eps + 1e-15).contains(&val));
            assert!(grad[1].abs() <= 2.0 * eps / rho + 1e-12);
            if x[0].abs() > rho || x[1].abs() > rho {
                assert_eq!(val, 0.0);
            }
        }
        let f = phi.to_function();
        let far = DVector::from_vec(vec![0.0, 0.0, -1.0]);
        assert_eq!(f.value(&far), 0.0);
    }

    #[test]
    fn odd_extension_is_odd() {
        let north = unit_vector(3, 2);
        let psi = SphericalFunction::bump(north.clone(), 30.0);
        let grid = spiral(2048);
        let odd = odd_extension(&psi, &north, &grid).unwrap();
        let worst = grid.nodes().iter().map(|u| (odd.value(u) + odd.value(&(-u))).abs()).fold(0.0, f64::max);
        assert_eq!(worst, 0.0);
        assert!((odd.value(&(-&north)) + 1.0).abs() < 1e-12);
        let wide = SphericalFunction::bump(north.clone(), 2.0);
        assert!(odd_extension(&wide, &north, &grid).is_err());
    }
}
