//! Functions on the unit sphere, handled through their 1-homogeneous
//! extension `f̄(x) = ‖x‖·f(x/‖x‖)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::poly::Polynomial;

/// Derivative source for a [`SphericalFunction`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum DerivativeMode {
    /// Closed-form derivatives where the representation provides them.
    Analytic,
    /// Central differences on the extension.
    FiniteDifference,
}

/// Gradient step for central differences.
pub const FD_GRADIENT_STEP: f64 = 1e-5;
/// Hessian step for central differences.
pub const FD_HESSIAN_STEP: f64 = 1e-4;

/// A representation of a 1-homogeneous function on `R^n \ {0}`.
pub trait SphereFn: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// `f̄(x)` for `x ≠ 0`.
    fn ext_value(&self, x: &DVector<f64>) -> f64;

    fn ext_gradient(&self, _x: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }

    fn ext_hessian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }
}

/// A smooth function on `S^{n-1}` with access to the gradient and Hessian
/// of its 1-homogeneous extension.
#[derive(Clone)]
pub struct SphericalFunction {
    inner: Arc<dyn SphereFn>,
    mode: DerivativeMode,
}

impl fmt::Debug for SphericalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SphericalFunction({:?}, {:?})", self.mode, self.inner)
    }
}

impl SphericalFunction {
    pub fn from_repr(repr: impl SphereFn + 'static) -> Self {
        SphericalFunction { inner: Arc::new(repr), mode: DerivativeMode::Analytic }
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn mode(&self) -> DerivativeMode {
        self.mode
    }

    /// Same function, derivatives by finite differences.
    pub fn finite_difference(&self) -> Self {
        SphericalFunction { inner: self.inner.clone(), mode: DerivativeMode::FiniteDifference }
    }

    pub fn with_mode(&self, mode: DerivativeMode) -> Self {
        SphericalFunction { inner: self.inner.clone(), mode }
    }

    /// `f(u)`; also `f̄(x)` for arbitrary `x ≠ 0`.
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.inner.ext_value(x)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        if self.mode == DerivativeMode::Analytic {
            if let Some(g) = self.inner.ext_gradient(x) {
                return g;
            }
        }
        fd_gradient(&*self.inner, x)
    }

    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        if self.mode == DerivativeMode::Analytic {
            if let Some(h) = self.inner.ext_hessian(x) {
                return h;
            }
        }
        fd_hessian(&*self.inner, x)
    }

    /// Whether the Hessian comes from a closed form.
    pub fn has_analytic_hessian(&self) -> bool {
        let probe = DVector::from_fn(self.dim(), |k, _| if k + 1 == self.dim() { 1.0 } else { 0.0 });
        self.mode == DerivativeMode::Analytic && self.inner.ext_hessian(&probe).is_some()
    }

    // ---- constructors ----

    /// The constant function `c` (support function of the ball of radius `c`).
    pub fn constant(n: usize, c: f64) -> Self {
        Self::from_repr(Lifted::new(Polynomial::constant(n, c)))
    }

    /// `u ↦ ⟨u, v⟩`.
    pub fn linear(v: DVector<f64>) -> Self {
        Self::from_repr(Linear { v })
    }

    /// Restriction of a polynomial to the sphere.
    pub fn polynomial(p: Polynomial) -> Self {
        Self::from_repr(Lifted::new(p))
    }

    /// `u ↦ exp(-κ‖u-u₀‖²)` with a C³ cutoff at chord distance `4/√κ`.
    pub fn bump(u0: DVector<f64>, kappa: f64) -> Self {
        Self::from_repr(Lifted::new(Bump::new(u0, kappa)))
    }

    /// Support function `u ↦ √(uᵀMu)` of the ellipsoid with shape matrix `M > 0`.
    pub fn quadratic_support(m: DMatrix<f64>) -> Self {
        Self::from_repr(QuadraticSupport { m })
    }

    /// `Σ c_k f_k`.
    pub fn combination(terms: Vec<(f64, SphericalFunction)>) -> Self {
        assert!(!terms.is_empty(), "empty combination");
        let n = terms[0].1.dim();
        assert!(terms.iter().all(|(_, f)| f.dim() == n), "dimension mismatch in combination");
        Self::from_repr(Combination { terms })
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::combination(vec![(c, self.clone())])
    }

    pub fn add(&self, other: &SphericalFunction) -> Self {
        Self::combination(vec![(1.0, self.clone()), (1.0, other.clone())])
    }

    /// `u ↦ f(R u)` for an orthogonal `R`.
    pub fn compose_rotation(&self, rot: DMatrix<f64>) -> Self {
        Self::from_repr(Rotated { f: self.clone(), rot })
    }

    /// `u ↦ Σ_m w_m f(R_m u)`.
    pub fn rotation_average(&self, terms: Vec<(f64, DMatrix<f64>)>) -> Self {
        Self::from_repr(RotationAverage { f: self.clone(), terms })
    }
}

// ---- finite differences ----

fn fd_gradient(f: &dyn SphereFn, x: &DVector<f64>) -> DVector<f64> {
    let h = FD_GRADIENT_STEP;
    DVector::from_fn(x.len(), |k, _| {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += h;
        xm[k] -= h;
        (f.ext_value(&xp) - f.ext_value(&xm)) / (2.0 * h)
    })
}

fn fd_hessian(f: &dyn SphereFn, x: &DVector<f64>) -> DMatrix<f64> {
    let h = FD_HESSIAN_STEP;
    let n = x.len();
    let eval = |dj: (usize, f64), dk: (usize, f64)| {
        let mut y = x.clone();
        y[dj.0] += dj.1;
        y[dk.0] += dk.1;
        f.ext_value(&y)
    };
    let mut out = DMatrix::zeros(n, n);
    let f0 = f.ext_value(x);
    for j in 0..n {
        out[(j, j)] = (eval((j, h), (j, 0.0)) - 2.0 * f0 + eval((j, -h), (j, 0.0))) / (h * h);
        for k in j + 1..n {
            let v = (eval((j, h), (k, h)) - eval((j, h), (k, -h)) - eval((j, -h), (k, h))
                + eval((j, -h), (k, -h)))
                / (4.0 * h * h);
            out[(j, k)] = v;
            out[(k, j)] = v;
        }
    }
    out
}

// ---- ambient functions lifted to the sphere ----

/// A smooth function on (a neighbourhood of the sphere in) `R^n`. Its
/// restriction to the sphere defines a spherical function.
pub trait AmbientFn: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

/// 1-homogeneous extension of the restriction of an ambient function:
/// `F(x) = r·g(x/r)`. With `y = x/r` and `P = I - yyᵀ`,
/// `∇F = g·y + P∇g` and `D²F = (P∇²gP + (g - ⟨y,∇g⟩)P)/r`.
#[derive(Debug)]
pub struct Lifted<G> {
    g: G,
}

impl<G: AmbientFn> Lifted<G> {
    pub fn new(g: G) -> Self {
        Lifted { g }
    }
}

impl<G: AmbientFn> SphereFn for Lifted<G> {
    fn dim(&self) -> usize {
        self.g.dim()
    }

    fn ext_value(&self, x: &DVector<f64>) -> f64 {
        let r = x.norm();
        r * self.g.value(&(x / r))
    }

    fn ext_gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        let y = x / x.norm();
        let g = self.g.value(&y);
        let dg = self.g.gradient(&y);
        let radial = y.dot(&dg);
        Some(&y * g + dg - &y * radial)
    }

    fn ext_hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let r = x.norm();
        let y = x / r;
        let n = y.len();
        let p = DMatrix::identity(n, n) - &y * y.transpose();
        let g = self.g.value(&y);
        let dg = self.g.gradient(&y);
        let hg = self.g.hessian(&y);
        let h = &p * hg * &p + &p * (g - y.dot(&dg));
        Some(h / r)
    }
}

impl AmbientFn for Polynomial {
    fn dim(&self) -> usize {
        Polynomial::dim(self)
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.eval(x.as_slice())
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(self.gradient(x.as_slice()))
    }
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = Polynomial::dim(self);
        DMatrix::from_vec(n, n, self.hessian(x.as_slice()))
    }
}

/// Septic smoothstep on `[0,1]` (C³), with first and second derivatives.
pub(crate) fn smoothstep(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let v = t4 * (35.0 - 84.0 * t + 70.0 * t2 - 20.0 * t3);
    let d1 = 140.0 * t3 * (1.0 - t).powi(3);
    let d2 = 420.0 * t2 * (1.0 - t).powi(2) * (1.0 - 2.0 * t);
    (v, d1, d2)
}

/// Gaussian bump in the chord distance, cut off smoothly to zero.
#[derive(Debug, Clone)]
pub struct Bump {
    center: DVector<f64>,
    kappa: f64,
    cutoff_sq: f64,
}

impl Bump {
    pub fn new(center: DVector<f64>, kappa: f64) -> Self {
        let rc = 4.0 / kappa.sqrt();
        Bump { center, kappa, cutoff_sq: rc * rc }
    }

    /// Chord radius outside which the bump vanishes.
    pub fn support_radius(&self) -> f64 {
        self.cutoff_sq.sqrt()
    }

    /// `G(d)` with `d = ‖x-c‖²`, plus `G'` and `G''`.
    fn profile(&self, d: f64) -> (f64, f64, f64) {
        let e = (-self.kappa * d).exp();
        let (de, dde) = (-self.kappa * e, self.kappa * self.kappa * e);
        // χ(d) = 1 - smoothstep((d/c - 1/2)·2)
        let c = self.cutoff_sq;
        let (s, s1, s2) = smoothstep((d / c - 0.5) * 2.0);
        let (chi, dchi, ddchi) = (1.0 - s, -s1 * 2.0 / c, -s2 * 4.0 / (c * c));
        (e * chi, de * chi + e * dchi, dde * chi + 2.0 * de * dchi + e * ddchi)
    }
}

impl AmbientFn for Bump {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.profile((x - &self.center).norm_squared()).0
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let diff = x - &self.center;
        let (_, d1, _) = self.profile(diff.norm_squared());
        diff * (2.0 * d1)
    }
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let diff = x - &self.center;
        let n = diff.len();
        let (_, d1, d2) = self.profile(diff.norm_squared());
        &diff * diff.transpose() * (4.0 * d2) + DMatrix::identity(n, n) * (2.0 * d1)
    }
}

// ---- directly homogeneous representations ----

#[derive(Debug)]
struct Linear {
    v: DVector<f64>,
}

impl SphereFn for Linear {
    fn dim(&self) -> usize {
        self.v.len()
    }
    fn ext_value(&self, x: &DVector<f64>) -> f64 {
        self.v.dot(x)
    }
    fn ext_gradient(&self, _x: &DVector<f64>) -> Option<DVector<f64>> {
        Some(self.v.clone())
    }
    fn ext_hessian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let n = self.v.len();
        Some(DMatrix::zeros(n, n))
    }
}

#[derive(Debug)]
struct QuadraticSupport {
    m: DMatrix<f64>,
}

impl SphereFn for QuadraticSupport {
    fn dim(&self) -> usize {
        self.m.nrows()
    }
    fn ext_value(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.m * x)).sqrt()
    }
    fn ext_gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        let mx = &self.m * x;
        let h = x.dot(&mx).sqrt();
        Some(mx / h)
    }
    fn ext_hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let mx = &self.m * x;
        let h = x.dot(&mx).sqrt();
        Some(&self.m / h - &mx * mx.transpose() / (h * h * h))
    }
}

#[derive(Debug)]
struct Combination {
    terms: Vec<(f64, SphericalFunction)>,
}

impl SphereFn for Combination {
    fn dim(&self) -> usize {
        self.terms[0].1.dim()
    }
    fn ext_value(&self, x: &DVector<f64>) -> f64 {
        self.terms.iter().map(|(c, f)| c * f.value(x)).sum()
    }
    fn ext_gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        let mut acc = DVector::zeros(x.len());
        for (c, f) in &self.terms {
            acc += f.gradient(x) * *c;
        }
        Some(acc)
    }
    fn ext_hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let n = x.len();
        let mut acc = DMatrix::zeros(n, n);
        for (c, f) in &self.terms {
            acc += f.hessian(x) * *c;
        }
        Some(acc)
    }
}

#[derive(Debug)]
struct Rotated {
    f: SphericalFunction,
    rot: DMatrix<f64>,
}

impl SphereFn for Rotated {
    fn dim(&self) -> usize {
        self.f.dim()
    }
    fn ext_value(&self, x: &DVector<f64>) -> f64 {
        self.f.value(&(&self.rot * x))
    }
    fn ext_gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        Some(self.rot.transpose() * self.f.gradient(&(&self.rot * x)))
    }
    fn ext_hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let h = self.f.hessian(&(&self.rot * x));
        Some(self.rot.transpose() * h * &self.rot)
    }
}

#[derive(Debug)]
struct RotationAverage {
    f: SphericalFunction,
    terms: Vec<(f64, DMatrix<f64>)>,
}

impl SphereFn for RotationAverage {
    fn dim(&self) -> usize {
        self.f.dim()
    }
    fn ext_value(&self, x: &DVector<f64>) -> f64 {
        self.terms.iter().map(|(w, r)| w * self.f.value(&(r * x))).sum()
    }
    fn ext_gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        let mut acc = DVector::zeros(x.len());
        for (w, r) in &self.terms {
            acc += r.transpose() * self.f.gradient(&(r * x)) * *w;
        }
        Some(acc)
    }
    fn ext_hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let n = x.len();
        let mut acc = DMatrix::zeros(n, n);
        for (w, r) in &self.terms {
            acc += r.transpose() * self.f.hessian(&(r * x)) * r * *w;
        }
        Some(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(n: usize, k: usize) -> DVector<f64> {
        DVector::from_fn(n, |j, _| if j == k { 1.0 } else { 0.0 })
    }

    #[test]
    fn constant_extension_is_scaled_norm() {
        let f = SphericalFunction::constant(3, 2.0);
        let x = DVector::from_vec(vec![1.0, 2.0, 2.0]);
        assert!((f.value(&x) - 6.0).abs() < 1e-14);
    }

    #[test]
    fn lifted_hessian_matches_fd() {
        let p = Polynomial::parse("x1^2*x3 - 2*x2*x3 + 0.5*x1 + 1.5", 3).unwrap();
        let f = SphericalFunction::polynomial(p);
        let x = DVector::from_vec(vec![0.3, -0.5, 0.81]);
        let a = f.hessian(&x);
        let b = f.finite_difference().hessian(&x);
        assert!((a - b).amax() < 1e-6);
        let ga = f.gradient(&x);
        let gb = f.finite_difference().gradient(&x);
        assert!((ga - gb).amax() < 1e-8);
    }

    #[test]
    fn bump_derivatives_match_fd() {
        let u0 = DVector::from_vec(vec![0.0, 0.6, 0.8]);
        let f = SphericalFunction::bump(u0, 12.0);
        for x in [vec![0.1, 0.5, 0.86], vec![0.5, 0.5, 0.7], vec![-0.2, 0.9, 0.1]] {
            let x = DVector::from_vec(x).normalize();
            let a = f.hessian(&x);
            let b = f.finite_difference().hessian(&x);
            assert!((&a - &b).amax() < 1e-5 * (1.0 + a.amax()), "{a} vs {b}");
        }
    }

    #[test]
    fn bump_has_compact_support() {
        let f = SphericalFunction::bump(e(3, 2), 100.0);
        assert_eq!(f.value(&e(3, 0)), 0.0);
        assert!((f.value(&e(3, 2)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn smoothstep_derivatives() {
        for &t in &[0.1, 0.37, 0.5, 0.9] {
            let h = 1e-6;
            let (_, d1, d2) = smoothstep(t);
            let fd1 = (smoothstep(t + h).0 - smoothstep(t - h).0) / (2.0 * h);
            let fd2 = (smoothstep(t + h).1 - smoothstep(t - h).1) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-6);
            assert!((d2 - fd2).abs() < 1e-5);
        }
    }
}
