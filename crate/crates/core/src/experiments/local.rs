//! Functional increments for perturbations supported in a patch.
//!
//! When `φ` vanishes outside a patch, `F(K + sφ) - F(K)` and the variations
//! of `s ↦ F(K + sφ)` are integrals over the patch alone, so they can be
//! computed with a rule that resolves `φ` instead of a global grid.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

use crate::bodies::SupportBody;
use crate::par;
use crate::sphere::{q_matrix, Integral, NodeField, QuadratureGrid, SphericalFunction};
use crate::symfun::{cofactor2, elem_sym, trace_pair, SymMatrix};
use crate::{Error, Result};

#[derive(Clone, Debug)]
struct NodeData {
    f: f64,
    phi: f64,
    qk: SymMatrix,
    qphi: SymMatrix,
    qf: SymMatrix,
    base_density: f64,
}

/// Precomputed node data of `f`, `K` and `φ` on a patch rule covering `supp φ`.
#[derive(Clone, Debug)]
pub struct LocalPerturbation {
    order: usize,
    grid: QuadratureGrid,
    data: NodeField<NodeData>,
}

impl LocalPerturbation {
    pub fn new(f: &SphericalFunction, i: usize, k: &SupportBody, phi: &SphericalFunction, grid: QuadratureGrid) -> Result<Self> {
        let n = k.dim();
        if f.dim() != n || phi.dim() != n || grid.dim() != n {
            return Err(Error::domain("local perturbation: dimension mismatch"));
        }
        if i < 1 || i + 1 > n {
            return Err(Error::domain(format!("order must lie in 1..={}, got {i}", n - 1)));
        }
        k.require_certified()?;
        let data = grid.map(|u| {
            let qk = k.q(u)?;
            Ok(NodeData {
                f: f.value(u),
                phi: phi.value(u),
                base_density: elem_sym(&qk, i)?,
                qk,
                qphi: q_matrix(phi, u)?,
                qf: q_matrix(f, u)?,
            })
        })?;
        Ok(LocalPerturbation { order: i, grid, data })
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    fn integrate(&self, g: impl Fn(&NodeData) -> Result<f64> + Sync + Send) -> Result<Integral> {
        let field = self.grid.map_with(&self.data, |_, d| g(d))?;
        self.grid.integrate_values(&field)
    }

    /// `min λ(Q(h_K + sφ))` over all patch nodes.
    pub fn min_eigenvalue(&self, s: f64) -> f64 {
        let exec = self.grid.exec();
        let scan = |nodes: &[NodeData]| {
            par::map_slice(exec, nodes, |d| d.qk.lin_comb(1.0, &d.qphi, s).min_eigenvalue())
                .into_iter()
                .fold(f64::INFINITY, f64::min)
        };
        scan(&self.data.fine).min(scan(&self.data.coarse))
    }

    /// `F(K + sφ) - F(K)`.
    pub fn increment(&self, s: f64) -> Result<Integral> {
        let i = self.order;
        self.integrate(move |d| Ok(d.f * (elem_sym(&d.qk.lin_comb(1.0, &d.qphi, s), i)? - d.base_density)))
    }

    /// `F(K + sφ) - F(K)` for several `s` in one pass.
    pub fn increments(&self, steps: &[f64]) -> Result<Vec<Integral>> {
        let i = self.order;
        let field = self.grid.map_with(&self.data, |_, d| {
            steps
                .iter()
                .map(|&s| Ok(d.f * (elem_sym(&d.qk.lin_comb(1.0, &d.qphi, s), i)? - d.base_density)))
                .collect::<Result<Vec<f64>>>()
        })?;
        self.grid.integrate_vec(&field)
    }

    /// `F(K + sφ) - F(K)` from `d/dσ F(K + σφ) = ∫ φ S^{kj}(Q(h_K + σφ)) q_kj(f)`.
    ///
    /// The σ-integrand is a polynomial of degree `i - 1`, integrated exactly
    /// by Gauss-Legendre. Only one factor of `q(φ)` is lost relative to the
    /// direct form, which keeps oscillating `φ` well conditioned.
    pub fn increments_by_parts(&self, steps: &[f64]) -> Result<Vec<Integral>> {
        let i = self.order;
        let rule: Vec<(f64, f64)> = GaussLegendre::new(NonZeroUsize::new(i.div_ceil(2).max(2)).expect("rule order is positive"))
            .iter()
            .map(|(x, w)| ((x + 1.0) / 2.0, w / 2.0))
            .collect();
        let field = self.grid.map_with(&self.data, |_, d| {
            steps
                .iter()
                .map(|&s| {
                    rule.iter().try_fold(0.0, |acc, &(x, w)| {
                        Ok(acc + w * s * d.phi * trace_pair(&d.qk.lin_comb(1.0, &d.qphi, s * x), &d.qf, i)?)
                    })
                })
                .collect::<Result<Vec<f64>>>()
        })?;
        self.grid.integrate_vec(&field)
    }

    /// `∫_patch |f| S_i(Q(h_K + sφ))`, a scale for round-off floors.
    pub fn abs_scale(&self, s: f64) -> Result<f64> {
        let i = self.order;
        Ok(self.integrate(move |d| Ok(d.f.abs() * elem_sym(&d.qk.lin_comb(1.0, &d.qphi, s), i)?.abs()))?.value)
    }

    /// `H'(0)` in direct form, `∫ f S^{kj}(Q(h)) q_kj(φ)`.
    pub fn first_variation(&self) -> Result<Integral> {
        let i = self.order;
        self.integrate(move |d| Ok(d.f * trace_pair(&d.qk, &d.qphi, i)?))
    }

    /// `H'(0)` after integration by parts, `∫ φ S^{kj}(Q(h)) q_kj(f)`.
    pub fn first_variation_by_parts(&self) -> Result<Integral> {
        let i = self.order;
        self.integrate(move |d| Ok(d.phi * trace_pair(&d.qk, &d.qf, i)?))
    }

    /// `H''(0)` in direct and by-parts form.
    ///
    /// For oscillating `φ` the direct integrand carries two factors of
    /// `q(φ)` and needs much finer rules than the by-parts one.
    pub fn second_variation(&self) -> Result<(Integral, Integral)> {
        let i = self.order;
        let field = self.grid.map_with(&self.data, |_, d| {
            let t = cofactor2(&d.qk, i)?;
            Ok(vec![d.f * t.contract_both(&d.qphi, &d.qphi), d.phi * t.contract_both(&d.qf, &d.qphi)])
        })?;
        let parts = self.grid.integrate_vec(&field)?;
        Ok((parts[0], parts[1]))
    }

    /// Largest `s` in `steps` with `λ_min(Q(h_K ± sφ)) ≥ λ_min(Q(h_K)) / 2` on the patch.
    pub fn admissible_step(&self, steps: &[f64], symmetric: bool) -> Option<f64> {
        let target = self.min_eigenvalue(0.0) / 2.0;
        steps
            .iter()
            .copied()
            .filter(|&s| self.min_eigenvalue(s) >= target && (!symmetric || self.min_eigenvalue(-s) >= target))
            .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.max(s))))
    }

    /// Largest `s ≤ 1` (bisection, 1e-3 relative) with
    /// `λ_min(Q(h_K ± sφ)) ≥ λ_min(Q(h_K)) / 2` on the patch.
    pub fn max_step(&self) -> f64 {
        let target = self.min_eigenvalue(0.0) / 2.0;
        let ok = |s: f64| self.min_eigenvalue(s) >= target && self.min_eigenvalue(-s) >= target;
        if ok(1.0) {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while hi - lo > 1e-3 * hi {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}
