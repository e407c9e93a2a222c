//! Sphere geometry: tangent frames, the matrix `Q(f, u)`, quadrature.

pub mod function;
pub mod grid;
pub mod poly;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub use function::{DerivativeMode, SphericalFunction};
pub use grid::{GridKind, Integral, NodeField, QuadratureGrid};
pub use poly::Polynomial;

use crate::symfun::SymMatrix;
use crate::{Error, Result};

/// Unit-norm tolerance accepted by frame and `Q` evaluation.
pub const UNIT_TOLERANCE: f64 = 1e-8;

/// Orthonormal basis of the tangent space at `base`, stored as the columns
/// of an `n × (n-1)` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentFrame {
    base: DVector<f64>,
    vectors: DMatrix<f64>,
}

impl TangentFrame {
    pub fn base(&self) -> &DVector<f64> {
        &self.base
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn vector(&self, j: usize) -> DVector<f64> {
        self.vectors.column(j).into_owned()
    }

    /// Tangent vector `Σ_j c_j e_j`.
    pub fn embed(&self, coords: &DVector<f64>) -> DVector<f64> {
        &self.vectors * coords
    }

    /// Same base point, frame rotated by the orthogonal `(n-1) × (n-1)` matrix.
    pub fn rotated(&self, rot: &DMatrix<f64>) -> TangentFrame {
        TangentFrame { base: self.base.clone(), vectors: &self.vectors * rot }
    }
}

/// Tangent frame at `u` whose first vector is the unit tangent `v`.
pub fn aligned_frame(u: &DVector<f64>, v: &DVector<f64>) -> Result<TangentFrame> {
    let frame = tangent_frame(u)?;
    let w = frame.matrix().transpose() * v;
    if (w.norm() - 1.0).abs() > 1e-8 || u.dot(v).abs() > 1e-8 {
        return Err(Error::domain("aligned_frame: v must be a unit tangent vector at u"));
    }
    let m = w.len();
    // Householder map of the first coordinate vector onto w.
    let mut e1 = DVector::zeros(m);
    e1[0] = 1.0;
    let d = &e1 - &w;
    let rot = if d.norm() < 1e-14 {
        DMatrix::identity(m, m)
    } else {
        DMatrix::identity(m, m) - &d * d.transpose() * (2.0 / d.norm_squared())
    };
    Ok(frame.rotated(&rot))
}

fn check_unit(u: &DVector<f64>) -> Result<()> {
    let norm = u.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::domain(format!("expected a unit vector, got norm {norm}")));
    }
    Ok(())
}

/// Householder frame at `u`.
///
/// For `u_n >= 0` the reflection along `u + e_n` swaps `e_n` and `-u`; for
/// `u_n < 0` the reflection along `u - e_n` swaps `e_n` and `u`. In both
/// cases the images of `e_1..e_{n-1}` span the tangent space, and `u = e_n`
/// gives back `e_1..e_{n-1}`.
pub fn tangent_frame(u: &DVector<f64>) -> Result<TangentFrame> {
    check_unit(u)?;
    let n = u.len();
    if n < 2 {
        return Err(Error::domain("sphere dimension must be at least 2"));
    }
    let mut w = u.clone();
    if u[n - 1] >= 0.0 {
        w[n - 1] += 1.0;
    } else {
        w[n - 1] -= 1.0;
    }
    let wn2 = w.norm_squared();
    let vectors = DMatrix::from_fn(n, n - 1, |r, c| {
        let delta = if r == c { 1.0 } else { 0.0 };
        delta - 2.0 * w[r] * w[c] / wn2
    });
    Ok(TangentFrame { base: u.clone(), vectors })
}

/// `Q(f, u)`: the Hessian of the 1-homogeneous extension restricted to the
/// tangent frame. For a support function its eigenvalues are the principal
/// radii of curvature.
pub fn q_matrix(f: &SphericalFunction, u: &DVector<f64>) -> Result<SymMatrix> {
    let frame = tangent_frame(u)?;
    q_matrix_in_frame(f, &frame)
}

pub fn q_matrix_in_frame(f: &SphericalFunction, frame: &TangentFrame) -> Result<SymMatrix> {
    let hess = f.hessian(&frame.base);
    let e = &frame.vectors;
    let q = e.transpose() * hess * e;
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluation {
            node: frame.base.iter().copied().collect(),
            msg: "non-finite Q matrix".into(),
        });
    }
    Ok(SymMatrix::symmetrized(q))
}

/// `|S^{n-1}| = 2 π^{n/2} / Γ(n/2)`.
pub fn sphere_area(n: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(n as f64 / 2.0) / statrs::function::gamma::gamma(n as f64 / 2.0)
}

pub fn unit_vector(n: usize, k: usize) -> DVector<f64> {
    DVector::from_fn(n, |j, _| if j == k { 1.0 } else { 0.0 })
}

pub fn random_unit_vector(n: usize, rng: &mut impl Rng) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 1e-8 {
            return v / norm;
        }
    }
}

/// Haar-random rotation (determinant +1) via QR of a Gaussian matrix.
pub fn random_rotation(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q
}
