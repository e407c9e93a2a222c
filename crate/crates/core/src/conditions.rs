//! Condition (M)_i: every sum of `n - i` eigenvalues of `Q(f, u)` is
//! non-negative. Equivalent forms and the `i`-convexity sufficient condition.

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::sphere::{q_matrix, sphere_area, tangent_frame, DerivativeMode, QuadratureGrid, SphericalFunction};
use crate::symfun::{elem_sym_values, subsets_of_size, trace_pair, SymMatrix};
use crate::{Error, Result};

pub const DEFAULT_TOL_ANALYTIC: f64 = 1e-7;
pub const DEFAULT_TOL_FD: f64 = 1e-4;
const REFINE_ITERATIONS: u64 = 50;
const REFINE_CANDIDATES: usize = 3;

pub fn default_tolerance(f: &SphericalFunction) -> f64 {
    match f.mode() {
        DerivativeMode::Analytic => DEFAULT_TOL_ANALYTIC,
        DerivativeMode::FiniteDifference => DEFAULT_TOL_FD,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Satisfied,
    /// `|worst_value| < tolerance`; counts as satisfied in theorem tests.
    Marginal,
    Violated,
}

impl Verdict {
    pub fn from_value(worst: f64, tol: f64) -> Self {
        if worst < -tol {
            Verdict::Violated
        } else if worst < tol {
            Verdict::Marginal
        } else {
            Verdict::Satisfied
        }
    }

    pub fn holds(self) -> bool {
        self != Verdict::Violated
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub verdict: Verdict,
    pub order: usize,
    pub worst_node: Vec<f64>,
    pub worst_value: f64,
    pub grid: String,
    pub tolerance: f64,
}

impl ConditionReport {
    pub fn worst_node_vector(&self) -> DVector<f64> {
        DVector::from_vec(self.worst_node.clone())
    }
}

/// Sum of the `count` smallest of the ascending `eigenvalues`.
fn smallest_sum(eigenvalues: &[f64], count: usize) -> f64 {
    eigenvalues.iter().take(count).sum()
}

/// `min` over `|I| = n - i` of `Σ_{I} λ(Q(f, u))`.
pub fn eigen_sum(f: &SphericalFunction, i: usize, u: &DVector<f64>) -> Result<f64> {
    let n = f.dim();
    Ok(smallest_sum(&q_matrix(f, u)?.eigenvalues(), n - i))
}

struct ChartObjective<'a> {
    f: &'a SphericalFunction,
    order: usize,
    base: DVector<f64>,
    frame: DMatrix<f64>,
}

impl ChartObjective<'_> {
    fn point(&self, x: &[f64]) -> DVector<f64> {
        let v = &self.base + &self.frame * DVector::from_row_slice(x);
        let norm = v.norm();
        v / norm
    }
}

impl CostFunction for ChartObjective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        eigen_sum(self.f, self.order, &self.point(x)).map_err(|e| argmin::core::Error::msg(e.to_string()))
    }
}

/// Nelder-Mead descent of the eigenvalue sum in the tangent chart at `u0`.
fn refine(f: &SphericalFunction, order: usize, u0: &DVector<f64>, step: f64) -> Result<(f64, DVector<f64>)> {
    let frame = tangent_frame(u0)?;
    let m = u0.len() - 1;
    let objective = ChartObjective { f, order, base: u0.clone(), frame: frame.matrix().clone() };
    let mut simplex = vec![vec![0.0; m]];
    for j in 0..m {
        let mut v = vec![0.0; m];
        v[j] = step;
        simplex.push(v);
    }
    let start = eigen_sum(f, order, u0)?;
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-14)
        .map_err(|e| Error::Search(e.to_string()))?;
    let run = Executor::new(objective, solver)
        .configure(|s| s.max_iters(REFINE_ITERATIONS))
        .run()
        .map_err(|e| Error::Search(e.to_string()))?;
    let best = run.state.best_param.clone().unwrap_or_else(|| vec![0.0; m]);
    let value = run.state.best_cost;
    let ChartObjective { base, frame, .. } = run.problem.problem.expect("problem is returned");
    let point = {
        let v = &base + &frame * DVector::from_row_slice(&best);
        let norm = v.norm();
        v / norm
    };
    if value < start {
        Ok((value, point))
    } else {
        Ok((start, u0.clone()))
    }
}

fn typical_spacing(grid: &QuadratureGrid) -> f64 {
    let n = grid.dim();
    (sphere_area(n) / grid.len() as f64).powf(1.0 / (n as f64 - 1.0))
}

fn report_from_scan(
    f: &SphericalFunction,
    i: usize,
    grid: &QuadratureGrid,
    tol: f64,
    values: &[f64],
) -> Result<ConditionReport> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let step = 0.5 * typical_spacing(grid);
    let mut best = (values[order[0]], grid.nodes()[order[0]].clone());
    for &k in order.iter().take(REFINE_CANDIDATES) {
        let (v, u) = refine(f, i, &grid.nodes()[k], step)?;
        if v < best.0 {
            best = (v, u);
        }
    }
    Ok(ConditionReport {
        verdict: Verdict::from_value(best.0, tol),
        order: i,
        worst_node: best.1.iter().copied().collect(),
        worst_value: best.0,
        grid: grid.id(),
        tolerance: tol,
    })
}

fn check_order(f: &SphericalFunction, i: usize) -> Result<()> {
    let n = f.dim();
    if i < 1 || i + 1 > n {
        return Err(Error::domain(format!("order must lie in 1..={}, got {i}", n - 1)));
    }
    Ok(())
}

/// Grid scan plus local refinement of the worst nodes.
pub fn check_mi(f: &SphericalFunction, i: usize, grid: &QuadratureGrid, tol: f64) -> Result<ConditionReport> {
    check_order(f, i)?;
    let n = f.dim();
    let field = grid.map(|u| Ok(smallest_sum(&q_matrix(f, u)?.eigenvalues(), n - i)))?;
    report_from_scan(f, i, grid, tol, &field.fine)
}

/// Reports for `i = 1..n-1`, sharing one eigenvalue scan.
pub fn mi_monotone_in_i(f: &SphericalFunction, grid: &QuadratureGrid, tol: f64) -> Result<Vec<ConditionReport>> {
    let n = f.dim();
    let eig = grid.map(|u| Ok(q_matrix(f, u)?.eigenvalues()))?;
    (1..n)
        .map(|i| {
            let values: Vec<f64> = eig.fine.iter().map(|e| smallest_sum(e, n - i)).collect();
            report_from_scan(f, i, grid, tol, &values)
        })
        .collect()
}

/// Whether "holds at `i`" implies "holds at every `j ≤ i`".
pub fn is_downward_closed(reports: &[ConditionReport]) -> bool {
    let holds: Vec<bool> = reports.iter().map(|r| r.verdict.holds()).collect();
    holds.windows(2).all(|w| w[0] || !w[1])
}

/// `S_{i-1}` of `λ` with entry `j` removed.
fn deleted_elem_sym(lambda: &[f64], j: usize, order: usize) -> f64 {
    let rest: Vec<f64> = lambda.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, v)| *v).collect();
    elem_sym_values(&rest)[order]
}

/// `Σ_j μ_j S_{i-1}(diag λ̂_j)`.
fn weighted_deleted_sum(mu: &[f64], lambda: &[f64], i: usize) -> f64 {
    (0..mu.len()).map(|j| mu[j] * deleted_elem_sym(lambda, j, i - 1)).sum()
}

/// Both sides of the subset/trace equivalence for a spectrum `μ`.
///
/// Returns `(trace_form, subset_form)`: the first tests
/// `Σ_j μ_j S_{i-1}(λ̂_j) ≥ 0` over all 0/1 diagonals and 1000 random
/// non-negative ones, the second tests every `(N-i+1)`-subset sum of `μ`.
pub fn lemma_equiv_bruteforce(mu: &[f64], i: usize) -> Result<(bool, bool)> {
    let n = mu.len();
    if n == 0 || n > 8 {
        return Err(Error::domain(format!("brute force needs 1 <= N <= 8, got {n}")));
    }
    if i < 1 || i > n {
        return Err(Error::domain(format!("order must lie in 1..={n}, got {i}")));
    }
    let thresh = -1e-12 * (1.0 + mu.iter().map(|v| v.abs()).sum::<f64>());
    let subset_ok = subsets_of_size(n, n - i + 1)
        .iter()
        .all(|s| s.iter().map(|&j| mu[j]).sum::<f64>() >= thresh);
    let mut trace_ok = (0u32..(1 << n)).all(|mask| {
        let lambda: Vec<f64> = (0..n).map(|k| f64::from((mask >> k) & 1)).collect();
        weighted_deleted_sum(mu, &lambda, i) >= thresh
    });
    if trace_ok {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ n as u64 ^ ((i as u64) << 8));
        trace_ok = (0..1000).all(|_| {
            let lambda: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            weighted_deleted_sum(mu, &lambda, i) >= thresh
        });
    }
    Ok((trace_ok, subset_ok))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointwiseReport {
    pub verdict: Verdict,
    /// Minimum of `trace_pair(A, Q, i)` over random `A > 0`.
    pub sampled_min: f64,
    /// Value at the 0/1-diagonal witness in the eigenbasis of `Q`.
    pub witness_value: f64,
    /// Sum of the `n - i` smallest eigenvalues of `Q`.
    pub subset_min: f64,
    /// The witness matrix when it exposes a violation.
    pub witness: Option<SymMatrix>,
    pub agrees: bool,
}

/// Witness `A > 0` for the trace form: `1` on the eigenvectors of the `i-1`
/// largest eigenvalues of `q`, `delta` on the rest.
pub fn subset_witness(q: &SymMatrix, i: usize, delta: f64) -> SymMatrix {
    let (values, vectors) = q.eigen();
    let n = values.len();
    let lambda = DVector::from_fn(n, |k, _| if k + i > n { 1.0 } else { delta });
    SymMatrix::symmetrized(&vectors * DMatrix::from_diagonal(&lambda) * vectors.transpose())
}

/// Trace form at one point: `tr(S_i^{kj}(A) Q(f, u)) ≥ 0` for all `A > 0`,
/// tested by sampling and by the explicit witness, against the subset form.
pub fn check_pointwise_ii25(
    f: &SphericalFunction,
    i: usize,
    u: &DVector<f64>,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<PointwiseReport> {
    check_order(f, i)?;
    let q = q_matrix(f, u)?;
    let m = q.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampled_min = f64::INFINITY;
    for _ in 0..trials {
        let g = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let a = SymMatrix::symmetrized(g.transpose() * &g + DMatrix::identity(m, m) * 1e-6);
        sampled_min = sampled_min.min(trace_pair(&a, &q, i)?);
    }
    let witness = subset_witness(&q, i, 1e-9);
    let witness_value = trace_pair(&witness, &q, i)?;
    let subset_min = smallest_sum(&q.eigenvalues(), m - i + 1);
    let trace_verdict = Verdict::from_value(sampled_min.min(witness_value), tol);
    let subset_verdict = Verdict::from_value(subset_min, tol);
    Ok(PointwiseReport {
        verdict: trace_verdict,
        sampled_min,
        witness_value,
        subset_min,
        witness: (witness_value < -tol).then_some(witness),
        agrees: trace_verdict.holds() == subset_verdict.holds(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub order: usize,
    /// `min_u min_{j ≤ i} S_j(D²f̄(u))`.
    pub worst_value: f64,
    pub worst_node: Vec<f64>,
    pub i_convex: bool,
    /// `None` when `f` is not `i`-convex (nothing to imply).
    pub mi_holds: Option<bool>,
}

/// `S_j` of the Hessian spectrum `{λ(Q), 0}` for `j = 1..i`; when all are
/// non-negative, (M)_i must hold.
pub fn i_convexity_check(f: &SphericalFunction, i: usize, grid: &QuadratureGrid, tol: f64) -> Result<ConvexityReport> {
    check_order(f, i)?;
    let worst = grid.map(|u| {
        let e = elem_sym_values(&q_matrix(f, u)?.eigenvalues());
        Ok(e[1..=i].iter().copied().fold(f64::INFINITY, f64::min))
    })?;
    let (k, v) = worst
        .fine
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, &v)| if v < acc.1 { (k, v) } else { acc });
    let i_convex = v >= -tol;
    let mi_holds = if i_convex { Some(check_mi(f, i, grid, tol)?.verdict.holds()) } else { None };
    Ok(ConvexityReport {
        order: i,
        worst_value: v,
        worst_node: grid.nodes()[k].iter().copied().collect(),
        i_convex,
        mi_holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::grid::spiral;
    use crate::sphere::Polynomial;

    fn poly(s: &str, n: usize) -> SphericalFunction {
        SphericalFunction::polynomial(Polynomial::parse(s, n).unwrap())
    }

    #[test]
    fn constant_satisfies_everything() {
        let grid = spiral(512);
        let reports = mi_monotone_in_i(&SphericalFunction::constant(3, 1.0), &grid, 1e-7).unwrap();
        assert!(reports.iter().all(|r| r.verdict == Verdict::Satisfied));
        assert!((reports[0].worst_value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn saddle_violates_trace_condition() {
        // Q(1 + c(x1² - x2²)) at e1 has eigenvalues 1 - 3c, 1 - c (n = 3).
        let grid = spiral(2048);
        let f = poly("1 + 0.8*x1^2 - 0.8*x2^2", 3);
        let r = check_mi(&f, 1, &grid, 1e-7).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        assert!(r.worst_value <= 2.0 - 4.0 * 0.8 + 1e-9 + 0.1);
        let mild = poly("1 + 0.2*x1^2 - 0.2*x2^2", 3);
        let all = mi_monotone_in_i(&mild, &grid, 1e-7).unwrap();
        assert!(all[0].verdict.holds());
        assert!(is_downward_closed(&all));
    }

    #[test]
    fn lemma_examples() {
        assert_eq!(lemma_equiv_bruteforce(&[1.0, 1.0, 1.0], 2).unwrap(), (true, true));
        assert_eq!(lemma_equiv_bruteforce(&[-1.0, 0.4, 0.4], 2).unwrap(), (false, false));
        assert!(lemma_equiv_bruteforce(&[1.0; 9], 2).is_err());
    }

    #[test]
    fn witness_exposes_violation() {
        // For p(x) = xᵀPx with P diagonal, Q(p, e_n) = 2 P' - p(e_n) I.
        let f = poly("-0.5*x1^2 + 0.2*x2^2 + 0.2*x3^2", 4);
        let u = DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0]);
        let eig = q_matrix(&f, &u).unwrap().eigenvalues();
        assert!((eig[0] + 1.0).abs() < 1e-12 && (eig[2] - 0.4).abs() < 1e-12, "{eig:?}");
        let r = check_pointwise_ii25(&f, 2, &u, 200, 1, 1e-7).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        assert!(r.agrees);
        assert!((r.witness_value + 0.6).abs() < 1e-6);
        let psd = check_pointwise_ii25(&SphericalFunction::constant(4, 1.0), 2, &u, 200, 1, 1e-7).unwrap();
        assert!(psd.verdict.holds() && psd.sampled_min > 0.0);
    }
}
