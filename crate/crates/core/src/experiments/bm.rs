//! Brunn-Minkowski concavity of `F^{1/i}` along Minkowski segments, its
//! second-order criterion, and the search for violations when (M)_i fails.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::local::LocalPerturbation;
use super::oscillating::OscillatingTestFunction;
use crate::bodies::{combine, realize_q, SupportBody};
use crate::conditions::{check_mi, subset_witness, Verdict};
use crate::functionals::{functional_f, FunctionalSpec};
use crate::sphere::grid::{patch_box, TOLERANCE_FACTOR};
use crate::sphere::{q_matrix, tangent_frame, Integral, QuadratureGrid, SphericalFunction};
use crate::symfun::cofactor2;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BmForm {
    /// Concavity of `F^{1/i}`.
    Power,
    /// `F((1-t)K + tL) ≥ min{F(K), F(L)}` only; used when some `F ≤ 0`.
    Min,
}

/// Samples of `F` along a segment and the concavity checks on them.
///
/// Each check compares a derived quantity on the fine rule with the same
/// quantity on the coarse rule; the tolerance is `5×` that difference plus
/// the user tolerance and a round-off floor. An `*_excess` above zero is a
/// violation beyond tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentProbe {
    pub inner: String,
    pub outer: String,
    pub order: usize,
    pub power: f64,
    pub t_samples: Vec<f64>,
    pub values: Vec<Integral>,
    pub form: BmForm,
    /// `max_t (chord(t) - G(t))`.
    pub max_chord_deficit: f64,
    pub chord_excess: f64,
    /// `max_k (G_{k-1} - 2G_k + G_{k+1})`.
    pub max_second_difference: f64,
    pub second_difference_excess: f64,
    /// `max_t (min{F(0), F(1)} - F(t))`.
    pub max_min_deficit: f64,
    pub min_excess: f64,
    pub concave: Option<bool>,
    pub bm_min: bool,
}

impl SegmentProbe {
    /// Some sampled second difference of `G` is positive beyond tolerance.
    pub fn non_concave(&self) -> bool {
        self.form == BmForm::Power && self.second_difference_excess > 0.0
    }
}

/// Uniform samples `t_k = k/(count-1)`.
pub fn uniform_samples(count: usize) -> Vec<f64> {
    let m = (count.max(3) - 1) as f64;
    (0..count.max(3)).map(|k| k as f64 / m).collect()
}

/// Verdicts from `F(t_k) = base + increments[k]` on uniform `t_k`.
///
/// `noise` is the absolute round-off level of the increments. Working with
/// increments keeps second differences accurate when `F` barely changes.
pub fn segment_probe(
    labels: (&str, &str),
    order: usize,
    base: Integral,
    increments: &[Integral],
    tol: f64,
    noise: f64,
) -> SegmentProbe {
    let count = increments.len();
    let t = uniform_samples(count);
    let power = 1.0 / order as f64;
    let values: Vec<Integral> = increments.iter().map(|d| base.lin_comb(1.0, d, 1.0)).collect();
    let positive = values.iter().all(|v| v.value > 0.0 && v.coarse_value > 0.0);
    let form = if positive { BmForm::Power } else { BmForm::Min };

    // min form on increments
    let min_check = |inc: &[f64]| -> Vec<f64> {
        let floor = inc[0].min(inc[count - 1]);
        inc.iter().map(|d| floor - d).collect()
    };
    let fine: Vec<f64> = increments.iter().map(|d| d.value).collect();
    let coarse: Vec<f64> = increments.iter().map(|d| d.coarse_value).collect();
    let (mf, mc) = (min_check(&fine), min_check(&coarse));
    let max_min_deficit = mf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_excess = mf
        .iter()
        .zip(&mc)
        .map(|(a, b)| a - (TOLERANCE_FACTOR * (a - b).abs() + tol + 2.0 * noise))
        .fold(f64::NEG_INFINITY, f64::max);
    let bm_min = min_excess <= 0.0;

    let mut probe = SegmentProbe {
        inner: labels.0.to_string(),
        outer: labels.1.to_string(),
        order,
        power,
        t_samples: t.clone(),
        values,
        form,
        max_chord_deficit: f64::NAN,
        chord_excess: f64::NAN,
        max_second_difference: f64::NAN,
        second_difference_excess: f64::NAN,
        max_min_deficit,
        min_excess,
        concave: None,
        bm_min,
    };
    if !positive {
        return probe;
    }

    // G(t) - G_base = base^{1/i} · expm1(ln1p(inc/base)/i)
    let offsets = |b: f64, inc: &[f64]| -> Vec<f64> {
        inc.iter().map(|d| b.powf(power) * ((d / b).ln_1p() * power).exp_m1()).collect()
    };
    let slope = |b: f64| power * b.powf(power - 1.0);
    let (gf, gc) = (offsets(base.value, &fine), offsets(base.coarse_value, &coarse));
    let g_tol = slope(base.value) * (tol + noise);
    let chord = |g: &[f64]| -> Vec<f64> {
        t.iter().zip(g).map(|(&tk, gk)| (1.0 - tk) * g[0] + tk * g[count - 1] - gk).collect()
    };
    let (cf, cc) = (chord(&gf), chord(&gc));
    probe.max_chord_deficit = cf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    probe.chord_excess = cf
        .iter()
        .zip(&cc)
        .map(|(a, b)| a - (TOLERANCE_FACTOR * (a - b).abs() + 3.0 * g_tol))
        .fold(f64::NEG_INFINITY, f64::max);
    let second = |g: &[f64]| -> Vec<f64> { (1..count - 1).map(|k| g[k - 1] - 2.0 * g[k] + g[k + 1]).collect() };
    let (sf, sc) = (second(&gf), second(&gc));
    probe.max_second_difference = sf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    probe.second_difference_excess = sf
        .iter()
        .zip(&sc)
        .enumerate()
        .map(|(k, (a, b))| {
            let roundoff = 64.0 * f64::EPSILON * (gf[k].abs() + 2.0 * gf[k + 1].abs() + gf[k + 2].abs());
            a - (TOLERANCE_FACTOR * (a - b).abs() + 4.0 * g_tol + roundoff)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    probe.concave = Some(probe.chord_excess <= 0.0 && probe.second_difference_excess <= 0.0);
    probe
}

/// `G(t) = F((1-t)K + tL)^{1/i}` on `t_count` uniform samples.
pub fn bm_segment_test(
    f: &SphericalFunction,
    i: usize,
    k: &SupportBody,
    l: &SupportBody,
    grid: &QuadratureGrid,
    t_count: usize,
    tol: f64,
) -> Result<SegmentProbe> {
    let spec = FunctionalSpec::new(f.clone(), i)?;
    k.require_certified()?;
    l.require_certified()?;
    let values = uniform_samples(t_count)
        .into_iter()
        .map(|t| functional_f(&spec, &combine(1.0 - t, k, t, l)?, grid))
        .collect::<Result<Vec<_>>>()?;
    let base = values[0];
    let increments: Vec<Integral> = values.iter().map(|v| v.lin_comb(1.0, &base, -1.0)).collect();
    let scale = values.iter().map(|v| v.value.abs()).fold(0.0, f64::max);
    Ok(segment_probe((k.label(), l.label()), i, base, &increments, tol, 16.0 * f64::EPSILON * scale))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderReport {
    pub order: usize,
    /// `H(0) = F(K)`.
    pub value: Integral,
    /// `H'(0) = ∫ φ S^{kj}(Q(h)) q_kj(f)`.
    pub first: Integral,
    /// `H''(0) = ∫ φ S^{kj,rs}(Q(h)) q_kj(f) q_rs(φ)`.
    pub second: Integral,
    pub first_direct: Integral,
    pub second_direct: Integral,
    /// `F(K) H''(0) - ((i-1)/i) H'(0)²` from the by-parts variations.
    pub criterion: Integral,
    /// The same from the direct variations; a cross-check that needs finer
    /// rules when `φ` oscillates.
    pub criterion_direct: Integral,
    pub tolerance: f64,
}

impl SecondOrderReport {
    fn from_local(order: usize, value: Integral, lp: &LocalPerturbation, tol: f64) -> Result<Self> {
        let c = (order as f64 - 1.0) / order as f64;
        let crit = |h1: &Integral, h2: &Integral| {
            Integral::new(
                value.value * h2.value - c * h1.value * h1.value,
                value.coarse_value * h2.coarse_value - c * h1.coarse_value * h1.coarse_value,
            )
        };
        let first = lp.first_variation_by_parts()?;
        let first_direct = lp.first_variation()?;
        let (second_direct, second) = lp.second_variation()?;
        let criterion = crit(&first, &second);
        let roundoff = 1e-12 * (value.value * second.value).abs().max(first.value * first.value);
        Ok(SecondOrderReport {
            order,
            value,
            first,
            second,
            first_direct,
            second_direct,
            criterion,
            criterion_direct: crit(&first_direct, &second_direct),
            tolerance: criterion.tolerance() + tol + roundoff,
        })
    }

    /// The necessary condition for concavity at `s = 0`.
    pub fn holds(&self) -> bool {
        self.criterion.value <= self.tolerance
    }
}

/// The second-order Brunn-Minkowski criterion along `K + sφ`.
///
/// With `local = Some(patch)` the variations are integrated over the patch
/// (for `φ` supported in it) while `F(K)` uses `grid`.
pub fn bm_second_order_test(
    f: &SphericalFunction,
    i: usize,
    k: &SupportBody,
    phi: &SphericalFunction,
    grid: &QuadratureGrid,
    local: Option<QuadratureGrid>,
    tol: f64,
) -> Result<SecondOrderReport> {
    let spec = FunctionalSpec::new(f.clone(), i)?;
    let value = functional_f(&spec, k, grid)?;
    if !(value.value > 0.0) {
        return Err(Error::domain(format!("F(K) = {:e} must be positive for the power form", value.value)));
    }
    let lp = LocalPerturbation::new(f, i, k, phi, local.unwrap_or_else(|| grid.clone()))?;
    SecondOrderReport::from_local(i, value, &lp, tol)
}

/// Sweep of the violation search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmSearchConfig {
    pub deltas: Vec<f64>,
    /// Patch half-widths `ρ`.
    pub rhos: Vec<f64>,
    /// Oscillation scales as fractions `ε/ρ`.
    pub eps_ratios: Vec<f64>,
    /// Wave smoothing as a fraction `η/ε`.
    pub smoothing_ratio: f64,
    pub t_count: usize,
    /// Patch panels per oscillation period `ε` along the wave.
    pub panels_per_eps: usize,
    /// Patch panels across the wave; a multiple of 8 keeps the coarse rule
    /// aligned with the cutoff plateau.
    pub transverse_panels: usize,
    pub order: usize,
}

impl Default for BmSearchConfig {
    fn default() -> Self {
        BmSearchConfig {
            deltas: vec![0.2, 0.1, 0.5],
            rhos: vec![0.1, 0.2, 0.05],
            eps_ratios: vec![0.25, 0.125],
            smoothing_ratio: 0.25,
            t_count: 21,
            panels_per_eps: 8,
            transverse_panels: 8,
            order: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmSweepPoint {
    pub delta: f64,
    pub rho: f64,
    pub eps: f64,
    pub f_value: Option<f64>,
    pub criterion: Option<f64>,
    pub tolerance: Option<f64>,
    pub non_concave: Option<bool>,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmViolation {
    pub node: Vec<f64>,
    pub direction: Vec<f64>,
    pub delta: f64,
    pub rho: f64,
    pub eps: f64,
    pub eta: f64,
    pub step: f64,
    pub report: SecondOrderReport,
    pub probe: SegmentProbe,
    pub sweep: Vec<BmSweepPoint>,
}

/// Patch rule resolving a smoothed oscillating function, with panel edges
/// on the kinks of the wave and of the cutoffs.
fn oscillation_patch(phi: &OscillatingTestFunction, per_eps: usize, across: usize, order: usize) -> Result<QuadratureGrid> {
    let m = phi.frame().base().len() - 1;
    let rho = phi.rho();
    let along = per_eps * ((2.0 * rho / phi.eps()).ceil() as usize).max(1);
    let along = along.div_ceil(8) * 8;
    let across = across.div_ceil(8) * 8;
    let mut panels = vec![across; m];
    panels[0] = along;
    patch_box(phi.frame(), &vec![rho; m], &panels, order)
}

/// Searches for a positive second-order criterion when (M)_i fails.
///
/// `K = realize_q(A, u*)` with the witness `A`; the oscillation direction is
/// the most negative eigenvector of `(S_i^{kj,rs}(A) q_kj(f, u*))_{rs}`.
/// A hit is confirmed by a non-concave `G` on `K ± s_max φ`.
pub fn bm_violation_search(
    f: &SphericalFunction,
    i: usize,
    grid: &QuadratureGrid,
    tol: f64,
    config: &BmSearchConfig,
) -> Result<BmViolation> {
    if i < 2 {
        return Err(Error::domain("the second-order criterion is trivial for i = 1"));
    }
    let report = check_mi(f, i, grid, tol)?;
    if report.verdict != Verdict::Violated {
        return Err(Error::Search(format!("precondition: (M)_{i} is {:?}", report.verdict)));
    }
    let u_star = report.worst_node_vector();
    let frame = tangent_frame(&u_star)?;
    let qf = q_matrix(f, &u_star)?;
    let spec = FunctionalSpec::new(f.clone(), i)?;
    let n = f.dim();
    let mut sweep = Vec::new();
    for &delta in &config.deltas {
        let a = subset_witness(&qf, i, delta);
        let k = realize_q(&a, &u_star)?;
        let f_k = functional_f(&spec, &k, grid)?;
        let mix = cofactor2(&a, i)?.contract(&qf);
        let (vals, vecs) = mix.eigen();
        let direction: DVector<f64> = frame.matrix() * vecs.column(0);
        let skip = |note: String| BmSweepPoint {
            delta,
            rho: f64::NAN,
            eps: f64::NAN,
            f_value: Some(f_k.value),
            criterion: None,
            tolerance: None,
            non_concave: None,
            note,
        };
        if !(f_k.value > 0.0) {
            sweep.push(skip(format!("F(K) = {:e} is not positive", f_k.value)));
            continue;
        }
        if vals[0] >= 0.0 {
            sweep.push(skip(format!("contracted cofactor matrix is positive semidefinite (λ_min = {:e})", vals[0])));
            continue;
        }
        for &rho in &config.rhos {
            if rho * ((n - 1) as f64).sqrt() >= 1.0 {
                continue;
            }
            for &ratio in &config.eps_ratios {
                let eps = ratio * rho;
                let eta = config.smoothing_ratio * eps;
                let osc = OscillatingTestFunction::new(&u_star, &direction, rho, eps)?.smoothed(eta)?;
                let phi = osc.to_function();
                let patch = oscillation_patch(&osc, config.panels_per_eps, config.transverse_panels, config.order)?;
                let lp = LocalPerturbation::new(f, i, &k, &phi, patch)?;
                let rep = SecondOrderReport::from_local(i, f_k, &lp, tol)?;
                let mut point = BmSweepPoint {
                    delta,
                    rho,
                    eps,
                    f_value: Some(f_k.value),
                    criterion: Some(rep.criterion.value),
                    tolerance: Some(rep.tolerance),
                    non_concave: None,
                    note: String::new(),
                };
                if rep.criterion.value <= rep.tolerance {
                    point.note = "criterion within tolerance".into();
                    sweep.push(point);
                    continue;
                }
                let step = lp.max_step();
                let steps: Vec<f64> =
                    uniform_samples(config.t_count).iter().map(|t| (2.0 * t - 1.0) * step).collect();
                let incs = lp.increments_by_parts(&steps)?;
                let center = incs[steps.len() / 2];
                let shifted: Vec<Integral> = incs.iter().map(|d| d.lin_comb(1.0, &center, -1.0)).collect();
                let noise = 16.0 * f64::EPSILON * lp.abs_scale(step)?;
                let base = f_k.lin_comb(1.0, &center, 1.0);
                let probe = segment_probe(("K - s·phi", "K + s·phi"), i, base, &shifted, 0.0, noise);
                point.non_concave = Some(probe.non_concave());
                point.note = if probe.non_concave() { "confirmed".into() } else { "G concave on samples".into() };
                sweep.push(point);
                if probe.non_concave() {
                    return Ok(BmViolation {
                        node: report.worst_node.clone(),
                        direction: direction.iter().copied().collect(),
                        delta,
                        rho,
                        eps,
                        eta,
                        step,
                        report: rep,
                        probe,
                        sweep,
                    });
                }
            }
        }
    }
    let summary: Vec<String> = sweep
        .iter()
        .map(|p| format!("(δ={}, ρ={}, ε={}, crit={:?}, tol={:?}: {})", p.delta, p.rho, p.eps, p.criterion, p.tolerance, p.note))
        .collect();
    Err(Error::Search(format!("no confirmed violation at u* = {:?}: {}", report.worst_node, summary.join("; "))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::{ball, ellipsoid};
    use crate::sphere::grid::{spiral, super_fibonacci};
    use crate::sphere::Polynomial;

    fn poly(src: &str, n: usize) -> SphericalFunction {
        SphericalFunction::polynomial(Polynomial::parse(src, n).unwrap())
    }

    #[test]
    fn support_function_gives_concave_segment() {
        let grid = spiral(4096);
        let f = ellipsoid(&[1.0, 2.0, 3.0]).unwrap().h().clone();
        let k = ball(3, 1.0).unwrap();
        let l = ellipsoid(&[1.0, 1.0, 4.0]).unwrap();
        let p = bm_segment_test(&f, 2, &k, &l, &grid, 11, 1e-9).unwrap();
        assert_eq!(p.concave, Some(true), "{p:?}");
        assert!(p.bm_min);
        let same = bm_segment_test(&f, 2, &k, &k, &grid, 5, 1e-9).unwrap();
        assert!(same.values.iter().all(|v| (v.value - same.values[0].value).abs() < 1e-12));
    }

    #[test]
    fn order_one_criterion_vanishes() {
        let grid = spiral(2048);
        let f = poly("1 + x1*x2", 3);
        let phi = poly("x1^3 + 0.2*x2", 3);
        let r = bm_second_order_test(&f, 1, &ball(3, 1.0).unwrap(), &phi, &grid, None, 1e-9).unwrap();
        assert_eq!(r.criterion.value, 0.0);
        assert!(r.holds());
    }

    #[test]
    fn support_function_satisfies_second_order_criterion() {
        let grid = spiral(8192);
        let f = ellipsoid(&[1.0, 2.0, 3.0]).unwrap().h().clone();
        let phi = poly("0.3*x1^2*x3 - 0.2*x2 + 0.1*x1*x2", 3);
        let r = bm_second_order_test(&f, 2, &ball(3, 1.0).unwrap(), &phi, &grid, None, 1e-9).unwrap();
        assert!(r.holds(), "{r:?}");
    }

    #[test]
    fn violation_found_and_confirmed() {
        let grid = super_fibonacci(8192, 1);
        let f = poly("0.5 - x1^2 + 0.4*x2^2 + 0.4*x3^2", 4);
        let v = bm_violation_search(&f, 2, &grid, 1e-7, &BmSearchConfig::default()).unwrap();
        assert!(v.report.criterion.value > v.report.tolerance);
        assert!(v.probe.non_concave());
    }
}
