//! Mollification of spherical functions by averaging over rotations close to
//! the identity, `f_k(u) = ∫ f(ρu) ω_k(ρ) dν(ρ)` with
//! `ω_k(ρ) ∝ ψ(k² ‖ρ - id‖²)`.
//!
//! The integral is replaced by a fixed, seeded sample of rotations drawn
//! from the `ω_k`-weighted Haar law, so `f_k` is a finite rotation average
//! and inherits closed-form derivatives from `f`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::conditions::{check_mi, ConditionReport};
use crate::sphere::{QuadratureGrid, SphericalFunction};
use crate::{Error, Result};

/// Minimum sample count accepted by [`mollify`].
pub const MIN_SAMPLES: usize = 100;
/// Acceptance rate below which the sampler gives up.
pub const MIN_ACCEPTANCE: f64 = 1e-4;

/// `ψ(t) = exp(1/(t-1))` on `[0, 1)`, zero elsewhere.
pub fn psi(t: f64) -> f64 {
    if (0.0..1.0).contains(&t) {
        (1.0 / (t - 1.0)).exp()
    } else {
        0.0
    }
}

/// A seeded sample of rotations distributed according to `ω_k dν`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MollifierKernel {
    pub dim: usize,
    pub k: f64,
    pub seed: u64,
    pub rotations: Vec<DMatrix<f64>>,
    /// Equal weights `1/M`; the discrete normalization replaces `c_k`.
    pub weights: Vec<f64>,
    pub acceptance_rate: f64,
}

/// Skew matrix from its upper-triangle coordinates.
fn skew(n: usize, coords: &[f64]) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(n, n);
    let mut c = coords.iter();
    for a in 0..n {
        for b in a + 1..n {
            let v = *c.next().expect("one coordinate per pair");
            x[(a, b)] = v;
            x[(b, a)] = -v;
        }
    }
    x
}

/// Matrix of `Y ↦ [X, Y]` on skew matrices in upper-triangle coordinates.
fn adjoint(n: usize, x: &DMatrix<f64>) -> DMatrix<f64> {
    let d = n * (n - 1) / 2;
    let mut ad = DMatrix::zeros(d, d);
    let mut e = vec![0.0; d];
    for col in 0..d {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[col] = 1.0;
        let y = skew(n, &e);
        let br = x * &y - &y * x;
        let mut row = 0;
        for a in 0..n {
            for b in a + 1..n {
                ad[(row, col)] = br[(a, b)];
                row += 1;
            }
        }
    }
    ad
}

/// Density of Haar measure in exponential coordinates relative to its value
/// at the identity, `det((1 - e^{-ad X}) / ad X)`.
fn haar_density(n: usize, x: &DMatrix<f64>) -> f64 {
    let ad = adjoint(n, x);
    let d = ad.nrows();
    let mut term = DMatrix::<f64>::identity(d, d);
    let mut sum = term.clone();
    for j in 1..60 {
        term = -(&term * &ad) / (j as f64 + 1.0);
        sum += &term;
        if term.amax() < 1e-17 {
            break;
        }
    }
    sum.determinant().abs()
}

impl MollifierKernel {
    /// Draws `samples` rotations by rejection: a uniform proposal in a ball of
    /// exponential coordinates covering `‖ρ - id‖ < 1/k`, accepted with
    /// probability `ψ(k²‖ρ - id‖²)/ψ(0)` times the Haar density ratio.
    pub fn new(dim: usize, k: f64, samples: usize, seed: u64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::domain("mollifier needs dimension at least 2"));
        }
        if !(k >= 1.0) {
            return Err(Error::domain(format!("mollifier scale k must be at least 1, got {k}")));
        }
        if samples < MIN_SAMPLES {
            return Err(Error::domain(format!("mollifier needs at least {MIN_SAMPLES} samples, got {samples}")));
        }
        let d = dim * (dim - 1) / 2;
        // ‖X‖_F ≤ (π/2) ‖e^X - id‖_F, and ‖X‖_F² is twice the coordinate norm.
        let radius = std::f64::consts::FRAC_PI_2 / k / std::f64::consts::SQRT_2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rotations = Vec::with_capacity(samples);
        let mut trials = 0usize;
        let budget = ((samples as f64) / MIN_ACCEPTANCE).ceil() as usize;
        let id = DMatrix::<f64>::identity(dim, dim);
        while rotations.len() < samples {
            trials += 1;
            if trials > budget {
                return Err(Error::Kernel(format!(
                    "rejection sampler starved: {} of {trials} proposals accepted at k = {k}; use a smaller k window",
                    rotations.len()
                )));
            }
            let dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
            let coords: Vec<f64> = dir.iter().map(|v| v * r / norm).collect();
            let x = skew(dim, &coords);
            let rot = x.clone().exp();
            let dist2 = (&rot - &id).norm_squared();
            let accept = psi(k * k * dist2) / psi(0.0) * haar_density(dim, &x);
            if rng.random::<f64>() < accept {
                rotations.push(rot);
            }
        }
        let acceptance_rate = samples as f64 / trials as f64;
        if acceptance_rate < MIN_ACCEPTANCE {
            return Err(Error::Kernel(format!("acceptance rate {acceptance_rate:e} below {MIN_ACCEPTANCE:e} at k = {k}")));
        }
        let weights = vec![1.0 / samples as f64; samples];
        Ok(MollifierKernel { dim, k, seed, rotations, weights, acceptance_rate })
    }

    /// The kernel re-based by `rot`: every sample `ρ` becomes `rot⁻¹ ρ rot`.
    pub fn conjugated(&self, rot: &DMatrix<f64>) -> Self {
        let inv = rot.transpose();
        MollifierKernel {
            rotations: self.rotations.iter().map(|r| &inv * r * rot).collect(),
            ..self.clone()
        }
    }

    pub fn max_distance(&self) -> f64 {
        let id = DMatrix::<f64>::identity(self.dim, self.dim);
        self.rotations.iter().map(|r| (r - &id).norm()).fold(0.0, f64::max)
    }

    pub fn apply(&self, f: &SphericalFunction) -> Result<SphericalFunction> {
        if f.dim() != self.dim {
            return Err(Error::domain("mollifier dimension mismatch"));
        }
        let terms = self.weights.iter().copied().zip(self.rotations.iter().cloned()).collect();
        Ok(f.rotation_average(terms))
    }
}

/// `f_k(u) = Σ_m w_m f(ρ_m u)` over a fresh kernel.
pub fn mollify(f: &SphericalFunction, k: f64, samples: usize, seed: u64) -> Result<SphericalFunction> {
    MollifierKernel::new(f.dim(), k, samples, seed)?.apply(f)
}

/// `max_u |g(u) - f(u)|` over grid nodes.
pub fn sup_distance(f: &SphericalFunction, g: &SphericalFunction, grid: &QuadratureGrid) -> Result<f64> {
    let diffs = grid.map(|u| Ok((f.value(u) - g.value(u)).abs()))?;
    Ok(diffs.fine.iter().copied().fold(0.0, f64::max))
}

/// `check_mi` on the mollified function.
pub fn mollify_preserves_monotone(
    f: &SphericalFunction,
    i: usize,
    kernel: &MollifierKernel,
    grid: &QuadratureGrid,
    tol: f64,
) -> Result<ConditionReport> {
    check_mi(&kernel.apply(f)?, i, grid, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use crate::bodies::ellipsoid;
    use crate::conditions::Verdict;
    use crate::sphere::grid::spiral;
    use crate::sphere::{random_rotation, unit_vector, Polynomial};

    #[test]
    fn samples_lie_in_kernel_support() {
        for (n, k) in [(3, 4.0), (3, 16.0), (4, 8.0)] {
            let kern = MollifierKernel::new(n, k, 200, 1).unwrap();
            assert!(kern.max_distance() < 1.0 / k);
            assert!((kern.weights.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert!(kern.acceptance_rate > MIN_ACCEPTANCE);
            for r in &kern.rotations {
                assert!((r.determinant() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn haar_density_matches_closed_form_on_so3() {
        // On SO(3) the density is 2(1 - cos θ)/θ² for rotation angle θ.
        let theta: f64 = 0.7;
        let x = skew(3, &[theta, 0.0, 0.0]);
        let expect = 2.0 * (1.0 - theta.cos()) / (theta * theta);
        assert!((haar_density(3, &x) - expect).abs() < 1e-12);
    }

    #[test]
    fn constants_are_fixed_and_linear_maps_stay_linear() {
        let c = SphericalFunction::constant(3, 2.5);
        let ck = mollify(&c, 4.0, 100, 7).unwrap();
        let u = unit_vector(3, 1);
        assert!((ck.value(&u) - 2.5).abs() < 1e-12);

        let v = DVector::from_vec(vec![0.3, -0.2, 0.9]);
        let lin = SphericalFunction::linear(v.clone());
        let lk = mollify(&lin, 4.0, 300, 7).unwrap();
        // ∑ w ⟨ρx, v⟩ = ⟨x, (∑ w ρᵀ) v⟩
        let grid = spiral(64);
        let mut a = DMatrix::<f64>::zeros(3, 3);
        let kern = MollifierKernel::new(3, 4.0, 300, 7).unwrap();
        for (w, r) in kern.weights.iter().zip(&kern.rotations) {
            a += r.transpose() * *w;
        }
        let contracted = a * &v;
        for u in grid.nodes() {
            assert!((lk.value(u) - u.dot(&contracted)).abs() < 1e-12);
        }
        assert!(contracted.norm() < v.norm());
    }

    #[test]
    fn sup_distance_decreases_with_k() {
        let grid = spiral(512);
        let f = SphericalFunction::polynomial(Polynomial::parse("x1^3 - 2*x1*x2 + 0.5*x3^2", 3).unwrap());
        let d: Vec<f64> = [4.0, 8.0, 16.0]
            .iter()
            .map(|&k| sup_distance(&f, &mollify(&f, k, 1000, 3).unwrap(), &grid).unwrap())
            .collect();
        assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
    }

    #[test]
    fn equivariance_and_linearity() {
        let f = SphericalFunction::polynomial(Polynomial::parse("x1*x2 + x3^3", 3).unwrap());
        let g = SphericalFunction::polynomial(Polynomial::parse("x2^2 - x1", 3).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rot = random_rotation(3, &mut rng);
        let kern = MollifierKernel::new(3, 8.0, 150, 5).unwrap();
        let lhs = kern.conjugated(&rot).apply(&f.compose_rotation(rot.clone())).unwrap();
        let rhs = kern.apply(&f).unwrap().compose_rotation(rot);
        let combo = kern.apply(&f.scale(2.0).add(&g.scale(-3.0))).unwrap();
        let (fk, gk) = (kern.apply(&f).unwrap(), kern.apply(&g).unwrap());
        for u in spiral(32).nodes() {
            assert!((lhs.value(u) - rhs.value(u)).abs() < 1e-12);
            assert!((combo.value(u) - (2.0 * fk.value(u) - 3.0 * gk.value(u))).abs() < 1e-12);
        }
    }

    #[test]
    fn support_functions_stay_admissible() {
        let grid = spiral(1024);
        let h = ellipsoid(&[1.0, 2.0, 3.0]).unwrap().h().clone();
        let kern = MollifierKernel::new(3, 8.0, 100, 2).unwrap();
        let r = mollify_preserves_monotone(&h, 2, &kern, &grid, 1e-9).unwrap();
        assert_ne!(r.verdict, Verdict::Violated);
    }

    #[test]
    fn small_sample_counts_are_rejected() {
        assert!(MollifierKernel::new(3, 4.0, 10, 0).is_err());
    }
}
