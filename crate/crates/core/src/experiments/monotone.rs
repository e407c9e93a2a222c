//! Monotonicity under inclusion: nested-pair tests and the counterexample
//! construction for functions violating (M)_i.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::local::LocalPerturbation;
use crate::bodies::{combine, quadratic_body, realize_q, Certificate, SupportBody};
use crate::conditions::{check_mi, subset_witness, ConditionReport, Verdict};
use crate::functionals::{functional_f, FunctionalSpec};
use crate::sphere::grid::patch;
use crate::sphere::{q_matrix, random_rotation, Integral, QuadratureGrid, SphericalFunction};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub inner: String,
    pub outer: String,
    pub f_inner: Integral,
    pub f_outer: Integral,
    /// `F(K) - F(L)`; positive values contradict monotonicity.
    pub gap: f64,
    pub tolerance: f64,
    pub violation: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub order: usize,
    pub condition: ConditionReport,
    pub pairs: Vec<PairRecord>,
    pub violations: usize,
    pub worst_gap: f64,
}

impl MonotonicityReport {
    /// No violations, as required whenever (M)_i holds.
    pub fn consistent(&self) -> bool {
        !self.condition.verdict.holds() || self.violations == 0
    }
}

/// `F(K) ≤ F(L) + tol` over nested pairs `K ⊂ L`.
///
/// The per-pair tolerance is `tol` plus both quadrature tolerances.
pub fn monotonicity_test(
    f: &SphericalFunction,
    i: usize,
    pairs: &[(SupportBody, SupportBody)],
    grid: &QuadratureGrid,
    tol: f64,
) -> Result<MonotonicityReport> {
    let spec = FunctionalSpec::new(f.clone(), i)?;
    let condition = check_mi(f, i, grid, tol)?;
    let mut records = Vec::with_capacity(pairs.len());
    for (k, l) in pairs {
        let excess = grid.map(|u| Ok(k.h().value(u) - l.h().value(u)))?;
        let worst = excess.fine.iter().chain(&excess.coarse).copied().fold(f64::NEG_INFINITY, f64::max);
        if worst > 1e-12 {
            return Err(Error::domain(format!(
                "pair ({}, {}) is not nested: h_K - h_L reaches {worst:e}",
                k.label(),
                l.label()
            )));
        }
        let fk = functional_f(&spec, k, grid)?;
        let fl = functional_f(&spec, l, grid)?;
        let gap = fk.value - fl.value;
        let tolerance = tol + fk.tolerance() + fl.tolerance();
        records.push(PairRecord {
            inner: k.label().to_string(),
            outer: l.label().to_string(),
            f_inner: fk,
            f_outer: fl,
            gap,
            tolerance,
            violation: gap > tolerance,
        });
    }
    let violations = records.iter().filter(|r| r.violation).count();
    let worst_gap = records.iter().map(|r| r.gap).fold(f64::NEG_INFINITY, f64::max);
    Ok(MonotonicityReport { order: i, condition, pairs: records, violations, worst_gap })
}

fn random_quadratic(n: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng, label: String) -> Result<SupportBody> {
    let rot = random_rotation(n, rng);
    let axes = DVector::from_fn(n, |_, _| rng.random_range(lo..hi));
    quadratic_body(&rot * DMatrix::from_diagonal(&axes) * rot.transpose(), label)
}

/// Nested pairs `K ⊂ L`: rotated ellipsoids `K`, with `L = K + M` for a small
/// centred ellipsoid `M` or `L = λK` with `λ > 1`, alternately.
pub fn random_nested_pairs(n: usize, count: usize, seed: u64) -> Result<Vec<(SupportBody, SupportBody)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|j| {
            let k = random_quadratic(n, 0.5, 2.0, &mut rng, format!("pair{j}-inner"))?;
            let l = if j % 2 == 0 {
                let m = random_quadratic(n, 0.02, 0.5, &mut rng, format!("pair{j}-summand"))?;
                combine(1.0, &k, 1.0, &m)?
            } else {
                let lambda = rng.random_range(1.05..1.5);
                combine(lambda, &k, 0.0, &k)?
            };
            Ok((k, l.with_label(format!("pair{j}-outer"))))
        })
        .collect()
}

/// Sweep ranges for the counterexample construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HuntConfig {
    /// Regularization of the 0/1 witness matrix.
    pub deltas: Vec<f64>,
    /// Bump concentrations.
    pub kappas: Vec<f64>,
    /// Perturbation strengths `s`.
    pub steps: Vec<f64>,
    pub panels: usize,
    pub order: usize,
}

impl Default for HuntConfig {
    fn default() -> Self {
        HuntConfig {
            deltas: vec![1e-3, 1e-2, 5e-2, 0.1, 0.2],
            kappas: vec![10.0, 30.0, 100.0, 300.0, 1000.0],
            steps: vec![1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2, 1e-1, 0.2],
            panels: 8,
            order: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub delta: f64,
    pub kappa: f64,
    pub step: Option<f64>,
    pub first_variation: Option<f64>,
    pub gap: Option<f64>,
    pub tolerance: Option<f64>,
    pub note: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Counterexample {
    pub node: Vec<f64>,
    pub delta: f64,
    pub kappa: f64,
    pub step: f64,
    /// `F(K)` on the global grid.
    pub f_inner: Integral,
    /// `F(L) = F(K) - gap`.
    pub f_outer: Integral,
    /// `F(K) - F(L)`, integrated over the bump patch.
    pub gap: Integral,
    pub tolerance: f64,
    pub sweep: Vec<SweepPoint>,
    #[serde(skip)]
    pub inner: Option<SupportBody>,
    #[serde(skip)]
    pub outer: Option<SupportBody>,
}

/// Tangent half-width of the cap where a bump of concentration `κ` lives.
fn bump_half_width(kappa: f64) -> Option<f64> {
    let chord_sq = 16.0 / kappa;
    (chord_sq < 2.0).then(|| (1.0 - (1.0 - chord_sq / 2.0).powi(2)).sqrt() * 1.0001)
}

/// Builds `K ⊂ L` with `F(K) > F(L)` from a violation of (M)_i.
///
/// `K = realize_q(A, u*)` where `A` is the regularized 0/1 witness in the
/// eigenbasis of `Q(f, u*)`, so `tr(S_i^{kj}(A) Q(f,u*)) < 0`; `L = K + sφ`
/// for a nonnegative bump `φ` at `u*` of amplitude `1/κ`. Since `sφ ≥ 0`, `K ⊂ L`. The gap is
/// integrated over the bump's patch (or the global grid for wide bumps), where
/// all of `F(K) - F(L)` lives, in by-parts form; the direct form must agree
/// within both tolerances.
pub fn monotonicity_counterexample(
    f: &SphericalFunction,
    i: usize,
    grid: &QuadratureGrid,
    tol: f64,
    config: &HuntConfig,
) -> Result<Counterexample> {
    let report = check_mi(f, i, grid, tol)?;
    if report.verdict != Verdict::Violated || report.worst_value >= -10.0 * tol {
        return Err(Error::Search(format!(
            "precondition: (M)_{i} is {:?} with worst value {:e}; no counterexample attempted",
            report.verdict, report.worst_value
        )));
    }
    let u_star = report.worst_node_vector();
    let qf = q_matrix(f, &u_star)?;
    let spec = FunctionalSpec::new(f.clone(), i)?;
    let n = f.dim();
    let mut sweep = Vec::new();
    let mut found: Option<(f64, f64, f64, Integral, f64, SupportBody, SupportBody)> = None;
    let point = |delta, kappa, note: &str| SweepPoint {
        delta,
        kappa,
        step: None,
        first_variation: None,
        gap: None,
        tolerance: None,
        note: note.to_string(),
    };
    'outer: for &delta in &config.deltas {
        // Normalized so the smallest radius of curvature at u* is 1: F is
        // homogeneous, and this keeps the admissible steps of order one.
        let k = realize_q(&subset_witness(&qf, i, delta).scaled(1.0 / delta), &u_star)?;
        for &kappa in &config.kappas {
            // Amplitude 1/κ keeps ‖Q(φ)‖ of order one, so the step sweep is κ-independent.
            let phi = SphericalFunction::bump(u_star.clone(), kappa).scale(1.0 / kappa);
            // Narrow bumps get a Gauss patch; wide ones, whose support does not
            // fit a tangent chart, are integrated on the global grid.
            let rule = match bump_half_width(kappa).filter(|w| w * ((n - 1) as f64).sqrt() < 1.0) {
                Some(width) => patch(&u_star, width, config.panels, config.order)?,
                None => grid.clone(),
            };
            let local = LocalPerturbation::new(f, i, &k, &phi, rule)?;
            let first = local.first_variation()?.value;
            let base_min = local.min_eigenvalue(0.0);
            let mut any = false;
            for &s in config.steps.iter().rev() {
                if local.min_eigenvalue(s) < base_min / 2.0 {
                    continue;
                }
                any = true;
                let inc = local.increments_by_parts(&[s])?[0];
                let direct = local.increment(s)?;
                let gap = inc.scaled(-1.0);
                let tolerance = gap.tolerance() + tol + 1e-12 * local.abs_scale(s)?;
                let consistent = (direct.value - inc.value).abs() <= direct.tolerance() + tolerance;
                let ok = consistent && gap.value > 10.0 * tolerance;
                sweep.push(SweepPoint {
                    step: Some(s),
                    first_variation: Some(first),
                    gap: Some(gap.value),
                    tolerance: Some(tolerance),
                    ..point(
                        delta,
                        kappa,
                        match (ok, consistent) {
                            (true, _) => "counterexample",
                            (false, false) => "direct and by-parts increments disagree",
                            (false, true) => "gap below 10x tolerance",
                        },
                    )
                });
                if ok {
                    let cert = Certificate {
                        grid: format!("analytic+{}", local.grid().id()),
                        min_eigenvalue: local.min_eigenvalue(s).min(k.certificate().map_or(0.0, |c| c.min_eigenvalue)),
                        worst_node: None,
                        margin: base_min / 2.0,
                    };
                    let h = SphericalFunction::combination(vec![(1.0, k.h().clone()), (s, phi.clone())]);
                    let l = SupportBody::new(h, format!("realize_q + {s}*bump({kappa})")).with_certificate(cert);
                    found = Some((delta, kappa, s, gap, tolerance, k.clone(), l));
                    break 'outer;
                }
            }
            if !any {
                sweep.push(point(delta, kappa, "no step keeps K + sφ certified"));
            }
        }
    }
    let Some((delta, kappa, step, gap, tolerance, k, l)) = found else {
        return Err(Error::Search(format!(
            "no counterexample after {} sweep points at u* = {:?}: {}",
            sweep.len(),
            report.worst_node,
            sweep_summary(&sweep)
        )));
    };
    let f_inner = functional_f(&spec, &k, grid)?;
    let f_outer = f_inner.lin_comb(1.0, &gap, -1.0);
    Ok(Counterexample {
        node: report.worst_node.clone(),
        delta,
        kappa,
        step,
        f_inner,
        f_outer,
        gap,
        tolerance,
        sweep,
        inner: Some(k),
        outer: Some(l),
    })
}

fn sweep_summary(sweep: &[SweepPoint]) -> String {
    sweep
        .iter()
        .map(|p| format!("(δ={}, κ={}, s={:?}, gap={:?}, tol={:?}: {})", p.delta, p.kappa, p.step, p.gap, p.tolerance, p.note))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Outcome of the empirical monotonicity check used in the round trip
/// against (M)_i.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmpiricalMonotonicity {
    pub condition: Verdict,
    pub monotone: bool,
    pub pair_violations: usize,
    pub counterexample: Option<Counterexample>,
    pub hunt_error: Option<String>,
}

impl EmpiricalMonotonicity {
    /// Marginal verdicts are excluded from the comparison.
    pub fn agrees(&self) -> Option<bool> {
        match self.condition {
            Verdict::Marginal => None,
            v => Some(v.holds() == self.monotone),
        }
    }
}

/// Nested-pair test plus, when (M)_i is violated, the counterexample hunt.
pub fn empirical_monotonicity(
    f: &SphericalFunction,
    i: usize,
    pairs: &[(SupportBody, SupportBody)],
    grid: &QuadratureGrid,
    tol: f64,
    config: &HuntConfig,
) -> Result<EmpiricalMonotonicity> {
    let report = monotonicity_test(f, i, pairs, grid, tol)?;
    let (counterexample, hunt_error) = if report.condition.verdict == Verdict::Violated {
        match monotonicity_counterexample(f, i, grid, tol, config) {
            Ok(c) => (Some(c), None),
            Err(Error::Search(msg)) => (None, Some(msg)),
            Err(e) => return Err(e),
        }
    } else {
        (None, None)
    };
    Ok(EmpiricalMonotonicity {
        condition: report.condition.verdict,
        monotone: report.violations == 0 && counterexample.is_none(),
        pair_violations: report.violations,
        counterexample,
        hunt_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::ball;
    use crate::sphere::grid::{spiral, super_fibonacci};
    use crate::sphere::Polynomial;

    #[test]
    fn balls_are_monotone() {
        let grid = spiral(1024);
        let pairs = vec![(ball(3, 0.5).unwrap(), ball(3, 1.5).unwrap())];
        let r = monotonicity_test(&SphericalFunction::constant(3, 1.0), 2, &pairs, &grid, 1e-7).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.worst_gap < 0.0);
        let bad = vec![(ball(3, 2.0).unwrap(), ball(3, 1.0).unwrap())];
        assert!(monotonicity_test(&SphericalFunction::constant(3, 1.0), 2, &bad, &grid, 1e-7).is_err());
    }

    #[test]
    fn support_function_integrand_has_no_violations() {
        let grid = spiral(4096);
        let f = crate::bodies::ellipsoid(&[1.0, 2.0, 3.0]).unwrap().h().clone();
        let pairs = random_nested_pairs(3, 10, 7).unwrap();
        let r = monotonicity_test(&f, 2, &pairs, &grid, 1e-7).unwrap();
        assert_eq!(r.violations, 0, "{:?}", r.pairs);
    }

    #[test]
    fn saddle_yields_counterexample() {
        let grid = spiral(2048);
        let f = SphericalFunction::polynomial(Polynomial::parse("x1^2 - x2^2", 3).unwrap());
        let c = monotonicity_counterexample(&f, 1, &grid, 1e-7, &HuntConfig::default()).unwrap();
        assert!(c.gap.value > 10.0 * c.tolerance);
        assert!(c.f_inner.value > c.f_outer.value);
    }

    #[test]
    fn order_two_pattern_yields_counterexample() {
        let grid = super_fibonacci(4096, 3);
        let f = SphericalFunction::polynomial(Polynomial::parse("-0.5*x1^2 + 0.2*x2^2 + 0.2*x3^2", 4).unwrap());
        let c = monotonicity_counterexample(&f, 2, &grid, 1e-7, &HuntConfig::default()).unwrap();
        assert!(c.gap.value > 10.0 * c.tolerance, "{c:?}");
        let support = crate::bodies::ellipsoid(&[1.0, 2.0, 3.0]).unwrap().h().clone();
        let s = spiral(1024);
        assert!(matches!(
            monotonicity_counterexample(&support, 1, &s, 1e-7, &HuntConfig::default()),
            Err(Error::Search(_))
        ));
    }
}
