//! Quadrature on `S^{n-1}` with a built-in coarse companion for error estimates.
//!
//! Every grid carries a coarse rule of roughly half the resolution. An
//! [`Integral`] reports the fine value together with `|I(N) - I(N/2)|`.
//! Node evaluation may run in parallel; sums are always accumulated
//! sequentially in node order.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{random_rotation, random_unit_vector, sphere_area, tangent_frame, TangentFrame};
use crate::par::{self, Exec};
use crate::{Error, Result};

pub const DEFAULT_RESOLUTION_S2: usize = 8192;
pub const DEFAULT_RESOLUTION_S3: usize = 65536;
/// Multiple of the doubling estimate used as an integration tolerance.
pub const TOLERANCE_FACTOR: f64 = 5.0;

const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;
const SUPER_FIB_PSI: f64 = 1.533_751_168_755_204_3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    /// Equispaced points on the circle.
    Circle,
    /// Fibonacci spiral on `S^2`, equal weights.
    Spiral,
    /// Randomly rotated super-Fibonacci points on `S^3`, equal weights.
    SuperFibonacci,
    /// Seeded uniform points, equal weights.
    MonteCarlo,
    /// Gauss-Legendre in `cos θ` times the trapezoid rule in longitude, on `S^2`.
    GaussProduct,
    /// Tensor Gauss-Legendre rule on a tangent chart around one point.
    Patch,
    /// Longitude-uniform, latitude Gauss-Legendre on `S^2` with panels
    /// refined towards the poles and the equator.
    PolarGraded,
    Custom,
}

impl fmt::Display for GridKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GridKind::Circle => "circle",
            GridKind::Spiral => "spiral",
            GridKind::SuperFibonacci => "super-fibonacci",
            GridKind::MonteCarlo => "monte-carlo",
            GridKind::GaussProduct => "gauss-product",
            GridKind::Patch => "patch",
            GridKind::PolarGraded => "polar-graded",
            GridKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
enum Coarse {
    /// Reuses fine nodes with new weights.
    Subset { indices: Vec<usize>, weights: Vec<f64> },
    Separate { nodes: Vec<DVector<f64>>, weights: Vec<f64> },
}

#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    dim: usize,
    kind: GridKind,
    seed: u64,
    nodes: Vec<DVector<f64>>,
    weights: Vec<f64>,
    coarse: Coarse,
    exec: Exec,
}

/// Values at the fine nodes and at the separate coarse nodes (if any).
#[derive(Clone, Debug, PartialEq)]
pub struct NodeField<T> {
    pub fine: Vec<T>,
    pub coarse: Vec<T>,
}

impl<T> NodeField<T> {
    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> NodeField<U> {
        NodeField { fine: self.fine.iter().map(&f).collect(), coarse: self.coarse.iter().map(&f).collect() }
    }

    pub fn zip_map<S, U>(&self, other: &NodeField<S>, f: impl Fn(&T, &S) -> U) -> NodeField<U> {
        assert_eq!(self.fine.len(), other.fine.len());
        assert_eq!(self.coarse.len(), other.coarse.len());
        NodeField {
            fine: self.fine.iter().zip(&other.fine).map(|(a, b)| f(a, b)).collect(),
            coarse: self.coarse.iter().zip(&other.coarse).map(|(a, b)| f(a, b)).collect(),
        }
    }
}

/// A quadrature value with its coarse-grid companion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    pub coarse_value: f64,
    pub error_estimate: f64,
}

impl Integral {
    pub fn new(value: f64, coarse_value: f64) -> Self {
        Integral { value, coarse_value, error_estimate: (value - coarse_value).abs() }
    }

    /// Like [`Integral::new`] with the estimate raised to at least `floor`.
    ///
    /// Monte Carlo rules use this with the sample standard error: the
    /// half-sample difference alone has the same spread as the error itself.
    /// Combinations via [`Integral::lin_comb`] fall back to the difference.
    pub fn with_floor(value: f64, coarse_value: f64, floor: f64) -> Self {
        Integral { value, coarse_value, error_estimate: (value - coarse_value).abs().max(floor) }
    }

    pub fn exact(value: f64) -> Self {
        Self::new(value, value)
    }

    pub fn tolerance(&self) -> f64 {
        TOLERANCE_FACTOR * self.error_estimate
    }

    /// `a·self + b·other`, with the estimate of the combined rule.
    pub fn lin_comb(&self, a: f64, other: &Integral, b: f64) -> Integral {
        Integral::new(a * self.value + b * other.value, a * self.coarse_value + b * other.coarse_value)
    }

    pub fn scaled(&self, a: f64) -> Integral {
        Integral::new(a * self.value, a * self.coarse_value)
    }

    /// Applies a smooth scalar map to both the fine and coarse values.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Integral {
        Integral::new(f(self.value), f(self.coarse_value))
    }
}

impl QuadratureGrid {
    /// Assembles a grid from explicit fine and coarse rules.
    pub fn from_parts(
        kind: GridKind,
        seed: u64,
        nodes: Vec<DVector<f64>>,
        weights: Vec<f64>,
        coarse_nodes: Vec<DVector<f64>>,
        coarse_weights: Vec<f64>,
    ) -> Result<Self> {
        let dim = nodes.first().map(|u| u.len()).ok_or_else(|| Error::domain("empty grid"))?;
        if nodes.len() != weights.len() || coarse_nodes.len() != coarse_weights.len() || coarse_nodes.is_empty() {
            return Err(Error::domain("grid node and weight counts differ"));
        }
        for u in nodes.iter().chain(&coarse_nodes) {
            if u.len() != dim || (u.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::domain("grid nodes must be unit vectors of one dimension"));
            }
        }
        if weights.iter().chain(&coarse_weights).any(|w| !(*w > 0.0)) {
            return Err(Error::domain("grid weights must be positive"));
        }
        Ok(QuadratureGrid {
            dim,
            kind,
            seed,
            nodes,
            weights,
            coarse: Coarse::Separate { nodes: coarse_nodes, weights: coarse_weights },
            exec: Exec::default(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[DVector<f64>] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn exec(&self) -> Exec {
        self.exec
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    /// Short identifier recorded in certificates and reports.
    pub fn id(&self) -> String {
        format!("{}-n{}-N{}-seed{}", self.kind, self.dim, self.len(), self.seed)
    }

    /// Coarse nodes that are not shared with the fine rule.
    pub fn coarse_only_nodes(&self) -> &[DVector<f64>] {
        match &self.coarse {
            Coarse::Subset { .. } => &[],
            Coarse::Separate { nodes, .. } => nodes,
        }
    }

    /// Evaluates `f` at every node (fine and coarse-only).
    pub fn map<T, F>(&self, f: F) -> Result<NodeField<T>>
    where
        T: Send,
        F: Fn(&DVector<f64>) -> Result<T> + Sync + Send,
    {
        let fine = par::try_map_indexed(self.exec, self.nodes.len(), |k| f(&self.nodes[k]))?;
        let extra = self.coarse_only_nodes();
        let coarse = par::try_map_indexed(self.exec, extra.len(), |k| f(&extra[k]))?;
        Ok(NodeField { fine, coarse })
    }

    /// Combines an existing field with node positions.
    pub fn map_with<S, T, F>(&self, field: &NodeField<S>, f: F) -> Result<NodeField<T>>
    where
        S: Sync,
        T: Send,
        F: Fn(&DVector<f64>, &S) -> Result<T> + Sync + Send,
    {
        let extra = self.coarse_only_nodes();
        let fine = par::try_map_indexed(self.exec, self.nodes.len(), |k| f(&self.nodes[k], &field.fine[k]))?;
        let coarse = par::try_map_indexed(self.exec, extra.len(), |k| f(&extra[k], &field.coarse[k]))?;
        Ok(NodeField { fine, coarse })
    }

    pub fn integrate<F>(&self, f: F) -> Result<Integral>
    where
        F: Fn(&DVector<f64>) -> Result<f64> + Sync + Send,
    {
        let field = self.map(f)?;
        self.integrate_values(&field)
    }

    /// Sums a precomputed scalar field; non-finite values are reported with
    /// their node.
    pub fn integrate_values(&self, field: &NodeField<f64>) -> Result<Integral> {
        self.check_finite(field)?;
        let fine = self.weights.iter().zip(&field.fine).map(|(w, v)| w * v).sum::<f64>();
        let coarse = match &self.coarse {
            Coarse::Subset { indices, weights } => {
                indices.iter().zip(weights).map(|(&k, w)| w * field.fine[k]).sum::<f64>()
            }
            Coarse::Separate { weights, .. } => weights.iter().zip(&field.coarse).map(|(w, v)| w * v).sum(),
        };
        if self.kind == GridKind::MonteCarlo {
            return Ok(Integral::with_floor(fine, coarse, self.standard_error(&field.fine, fine)));
        }
        Ok(Integral::new(fine, coarse))
    }

    /// Component-wise integration of a vector-valued field.
    pub fn integrate_vec(&self, field: &NodeField<Vec<f64>>) -> Result<Vec<Integral>> {
        let width = field.fine.first().map_or(0, |v| v.len());
        (0..width).map(|c| self.integrate_values(&field.map(|v| v[c]))).collect()
    }

    /// Sample standard error of an equal-weight rule.
    fn standard_error(&self, values: &[f64], integral: f64) -> f64 {
        let count = values.len() as f64;
        let area = self.total_weight();
        let mean_sq = values.iter().map(|v| (area * v).powi(2)).sum::<f64>() / count;
        ((mean_sq - integral * integral).max(0.0) / (count - 1.0).max(1.0)).sqrt()
    }

    fn check_finite(&self, field: &NodeField<f64>) -> Result<()> {
        let bad = |node: &DVector<f64>, v: f64| Error::Evaluation {
            node: node.iter().copied().collect(),
            msg: format!("integrand is {v}"),
        };
        if let Some(k) = field.fine.iter().position(|v| !v.is_finite()) {
            return Err(bad(&self.nodes[k], field.fine[k]));
        }
        if let Some(k) = field.coarse.iter().position(|v| !v.is_finite()) {
            return Err(bad(&self.coarse_only_nodes()[k], field.coarse[k]));
        }
        Ok(())
    }

    /// Writes one row per fine node: coordinates then weight.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.dim).map(|k| format!("x{k}")).collect();
        header.push("weight".into());
        w.write_record(&header)?;
        for (u, wt) in self.nodes.iter().zip(&self.weights) {
            let mut row: Vec<String> = u.iter().map(|v| format!("{v:.17e}")).collect();
            row.push(format!("{wt:.17e}"));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Default grid: circle for `n = 2`, spiral for `n = 3`, super-Fibonacci for
/// `n = 4`, Monte Carlo otherwise.
pub fn make_grid(n: usize, resolution: usize, seed: u64) -> Result<QuadratureGrid> {
    if n < 2 || resolution < 1 {
        return Err(Error::domain(format!("make_grid needs n >= 2 and resolution >= 1, got ({n}, {resolution})")));
    }
    match n {
        2 => Ok(circle(resolution)),
        3 => Ok(spiral(resolution)),
        4 => Ok(super_fibonacci(resolution, seed)),
        _ => Ok(monte_carlo(n, resolution, seed)),
    }
}

/// The default grid at the default resolution for `n`.
pub fn default_grid(n: usize, seed: u64) -> Result<QuadratureGrid> {
    let res = if n <= 3 { DEFAULT_RESOLUTION_S2 } else { DEFAULT_RESOLUTION_S3 };
    make_grid(n, res, seed)
}

fn half(n: usize) -> usize {
    (n / 2).max(1)
}

fn equal_weights(n: usize, count: usize) -> Vec<f64> {
    vec![sphere_area(n) / count as f64; count]
}

pub fn circle(count: usize) -> QuadratureGrid {
    let nodes: Vec<DVector<f64>> = (0..count)
        .map(|k| {
            let t = 2.0 * PI * (k as f64 + 0.5) / count as f64;
            DVector::from_vec(vec![t.cos(), t.sin()])
        })
        .collect();
    let coarse = if count >= 2 && count % 2 == 0 {
        let indices: Vec<usize> = (0..count).step_by(2).collect();
        Coarse::Subset { weights: equal_weights(2, indices.len()), indices }
    } else {
        let c = circle(half(count));
        Coarse::Separate { nodes: c.nodes, weights: c.weights }
    };
    QuadratureGrid { dim: 2, kind: GridKind::Circle, seed: 0, weights: equal_weights(2, count), nodes, coarse, exec: Exec::default() }
}

fn spiral_nodes(count: usize) -> Vec<DVector<f64>> {
    (0..count)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = GOLDEN_ANGLE * k as f64;
            DVector::from_vec(vec![r * phi.cos(), r * phi.sin(), z])
        })
        .collect()
}

pub fn spiral(count: usize) -> QuadratureGrid {
    let c = half(count);
    QuadratureGrid {
        dim: 3,
        kind: GridKind::Spiral,
        seed: 0,
        nodes: spiral_nodes(count),
        weights: equal_weights(3, count),
        coarse: Coarse::Separate { nodes: spiral_nodes(c), weights: equal_weights(3, c) },
        exec: Exec::default(),
    }
}

fn super_fibonacci_nodes(count: usize, rot: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let phi = 2f64.sqrt();
    (0..count)
        .map(|i| {
            let s = i as f64 + 0.5;
            let t = s / count as f64;
            let (r, big_r) = (t.sqrt(), (1.0 - t).sqrt());
            let alpha = 2.0 * PI * s / phi;
            let beta = 2.0 * PI * s / SUPER_FIB_PSI;
            let q = DVector::from_vec(vec![r * alpha.sin(), r * alpha.cos(), big_r * beta.sin(), big_r * beta.cos()]);
            let v = rot * q;
            let norm = v.norm();
            v / norm
        })
        .collect()
}

/// Super-Fibonacci lattice on `S^3` under a seeded random rotation.
pub fn super_fibonacci(count: usize, seed: u64) -> QuadratureGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rot = random_rotation(4, &mut rng);
    let c = half(count);
    QuadratureGrid {
        dim: 4,
        kind: GridKind::SuperFibonacci,
        seed,
        nodes: super_fibonacci_nodes(count, &rot),
        weights: equal_weights(4, count),
        coarse: Coarse::Separate { nodes: super_fibonacci_nodes(c, &rot), weights: equal_weights(4, c) },
        exec: Exec::default(),
    }
}

/// Seeded uniform sampling; the coarse rule is the first half of the nodes.
pub fn monte_carlo(n: usize, count: usize, seed: u64) -> QuadratureGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes: Vec<DVector<f64>> = (0..count).map(|_| random_unit_vector(n, &mut rng)).collect();
    let c = half(count);
    QuadratureGrid {
        dim: n,
        kind: GridKind::MonteCarlo,
        seed,
        nodes,
        weights: equal_weights(n, count),
        coarse: Coarse::Subset { indices: (0..c).collect(), weights: equal_weights(n, c) },
        exec: Exec::default(),
    }
}

fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    let order = NonZeroUsize::new(order.max(2)).expect("order is at least 2");
    GaussLegendre::new(order).iter().map(|(x, w)| (*x, *w)).collect()
}

/// Composite Gauss-Legendre nodes and weights over the panel edges.
fn composite_rule(edges: &[f64], order: usize) -> Vec<(f64, f64)> {
    let base = gauss_legendre(order);
    let mut out = Vec::with_capacity((edges.len() - 1) * base.len());
    for win in edges.windows(2) {
        let (a, b) = (win[0], win[1]);
        let (mid, half_len) = ((a + b) / 2.0, (b - a) / 2.0);
        out.extend(base.iter().map(|(x, w)| (mid + half_len * x, half_len * w)));
    }
    out
}

fn uniform_edges(a: f64, b: f64, panels: usize) -> Vec<f64> {
    (0..=panels).map(|k| a + (b - a) * k as f64 / panels as f64).collect()
}

fn patch_rule(frame: &TangentFrame, half_widths: &[f64], panels: &[usize], order: usize) -> (Vec<DVector<f64>>, Vec<f64>) {
    let center = frame.base();
    let m = half_widths.len();
    let axes: Vec<Vec<(f64, f64)>> = half_widths
        .iter()
        .zip(panels)
        .map(|(&a, &p)| composite_rule(&uniform_edges(-a, a, p), order))
        .collect();
    let total: usize = axes.iter().map(|a| a.len()).product();
    let mut nodes = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    let mut idx = vec![0usize; m];
    for _ in 0..total {
        let coords = DVector::from_fn(m, |j, _| axes[j][idx[j]].0);
        let w: f64 = idx.iter().enumerate().map(|(j, &k)| axes[j][k].1).product();
        let c = (1.0 - coords.norm_squared()).sqrt();
        let u = center * c + frame.embed(&coords);
        let norm = u.norm();
        nodes.push(u / norm);
        weights.push(w / c);
        for (j, slot) in idx.iter_mut().enumerate() {
            *slot += 1;
            if *slot < axes[j].len() {
                break;
            }
            *slot = 0;
        }
    }
    (nodes, weights)
}

/// Gauss-Legendre rule over the cap-like region `{√(1-|x|²) u* + E x : x ∈ [-a, a]^{n-1}}`.
///
/// Integrals over this grid only see the region; use it for integrands
/// supported inside it.
pub fn patch(center: &DVector<f64>, half_width: f64, panels: usize, order: usize) -> Result<QuadratureGrid> {
    let m = center.len() - 1;
    patch_box(&tangent_frame(center)?, &vec![half_width; m], &vec![panels; m], order)
}

/// Patch over the box `∏_j [-a_j, a_j]` in the coordinates of `frame`, with
/// its own panel count per axis. The coarse rule halves every panel count.
pub fn patch_box(frame: &TangentFrame, half_widths: &[f64], panels: &[usize], order: usize) -> Result<QuadratureGrid> {
    let m = frame.base().len() - 1;
    if half_widths.len() != m || panels.len() != m {
        return Err(Error::domain("patch needs one half-width and panel count per tangent axis"));
    }
    let corner = half_widths.iter().map(|a| a * a).sum::<f64>().sqrt();
    if half_widths.iter().any(|a| !(*a > 0.0)) || corner >= 1.0 {
        return Err(Error::domain(format!("patch half-widths {half_widths:?} leave the hemisphere")));
    }
    if panels.iter().any(|&p| p == 0) || order < 2 {
        return Err(Error::domain("patch needs at least one panel and order 2"));
    }
    let (nodes, weights) = patch_rule(frame, half_widths, panels, order);
    let (cn, cw) = if panels.iter().all(|&p| p >= 2) {
        let half: Vec<usize> = panels.iter().map(|p| p / 2).collect();
        patch_rule(frame, half_widths, &half, order)
    } else {
        patch_rule(frame, half_widths, panels, (order / 2).max(2))
    };
    QuadratureGrid::from_parts(GridKind::Patch, 0, nodes, weights, cn, cw)
}

/// Panel edges on `[0, π]` refined geometrically, by factor 2, towards
/// `0`, `π/2` and `π`, with smallest panel `width`.
fn graded_edges(width: f64) -> Vec<f64> {
    let quarter = PI / 4.0;
    let mut left = vec![0.0];
    let mut d = width;
    while d < quarter {
        left.push(d);
        d *= 2.0;
    }
    left.push(quarter);
    let mut edges = left.clone();
    edges.extend(left.iter().rev().skip(1).map(|x| PI / 2.0 - x));
    let lower = edges.clone();
    edges.extend(lower.iter().rev().skip(1).map(|x| PI - x));
    edges
}

fn polar_rule(n_phi: usize, width: f64, order: usize) -> (Vec<DVector<f64>>, Vec<f64>) {
    let theta = composite_rule(&graded_edges(width), order);
    let dphi = 2.0 * PI / n_phi as f64;
    let mut nodes = Vec::with_capacity(theta.len() * n_phi);
    let mut weights = Vec::with_capacity(theta.len() * n_phi);
    for (t, wt) in &theta {
        let (st, ct) = t.sin_cos();
        for k in 0..n_phi {
            let p = dphi * (k as f64 + 0.5);
            nodes.push(DVector::from_vec(vec![st * p.cos(), st * p.sin(), ct]));
            weights.push(wt * st * dphi);
        }
    }
    (nodes, weights)
}

fn gauss_product_rule(n_lat: usize) -> (Vec<DVector<f64>>, Vec<f64>) {
    let n_lon = 2 * n_lat;
    let dphi = 2.0 * PI / n_lon as f64;
    let mut nodes = Vec::with_capacity(n_lat * n_lon);
    let mut weights = Vec::with_capacity(n_lat * n_lon);
    for (z, w) in gauss_legendre(n_lat) {
        let r = (1.0 - z * z).max(0.0).sqrt();
        for k in 0..n_lon {
            let p = dphi * k as f64;
            nodes.push(DVector::from_vec(vec![r * p.cos(), r * p.sin(), z]));
            weights.push(w * dphi);
        }
    }
    (nodes, weights)
}

/// Product rule on `S^2` with about `count` nodes (`m` latitudes, `2m`
/// longitudes); the coarse rule halves both. Exact for polynomials of degree
/// below `2m` in `cos θ` and `m` in longitude, so its doubling estimate is
/// dependable for smooth integrands.
pub fn gauss_product(count: usize) -> QuadratureGrid {
    let m = ((count as f64 / 2.0).sqrt().round() as usize).max(2);
    let (nodes, weights) = gauss_product_rule(m);
    let (cn, cw) = gauss_product_rule((m / 2).max(2));
    QuadratureGrid::from_parts(GridKind::GaussProduct, 0, nodes, weights, cn, cw)
        .expect("gauss product parts are consistent")
}

/// Product grid on `S^2` for integrands concentrated within `width` of the
/// poles or the equator.
pub fn polar_graded(n_phi: usize, width: f64, order: usize) -> Result<QuadratureGrid> {
    if n_phi < 4 || !(width > 0.0) || order < 2 {
        return Err(Error::domain("polar grid needs n_phi >= 4, width > 0, order >= 2"));
    }
    let (nodes, weights) = polar_rule(n_phi, width, order);
    let (cn, cw) = polar_rule(n_phi / 2, width, (order * 2 / 3).max(2));
    QuadratureGrid::from_parts(GridKind::PolarGraded, 0, nodes, weights, cn, cw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spiral_integrates_constants_exactly() {
        let g = spiral(10_000);
        let i = g.integrate(|_| Ok(1.0)).unwrap();
        assert!((i.value - 4.0 * PI).abs() < 1e-9);
        assert!(g.nodes().iter().all(|u| (u.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn second_moment_and_odd_functions() {
        for g in [spiral(8192), super_fibonacci(65536, 1), monte_carlo(5, 4096, 2), circle(64)] {
            let n = g.dim();
            let m2 = g.integrate(|u| Ok(u[0] * u[0])).unwrap();
            let want = sphere_area(n) / n as f64;
            assert!((m2.value - want).abs() <= m2.tolerance().max(1e-12), "{} {m2:?} vs {want}", g.id());
            let odd = g.integrate(|u| Ok(u[0].powi(3))).unwrap();
            assert!(odd.value.abs() <= odd.tolerance().max(1e-12), "{} {odd:?}", g.id());
        }
    }

    #[test]
    fn nan_is_reported_with_node() {
        let g = spiral(16);
        let err = g.integrate(|u| Ok(if u[2] > 0.9 { f64::NAN } else { 1.0 })).unwrap_err();
        assert!(matches!(err, Error::Evaluation { .. }));
    }

    #[test]
    fn patch_integrates_concentrated_function() {
        let center = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let g = patch(&center, 0.5, 4, 8).unwrap();
        // ∫ exp(-200(1 - u_3)) over the sphere is 2π/200 up to e^{-400}; the
        // mass outside the patch is below e^{-26}.
        let i = g.integrate(|u| Ok((-200.0 * (1.0 - u[2])).exp())).unwrap();
        let want = 2.0 * PI / 200.0;
        assert!((i.value - want).abs() < 1e-6 * want, "{i:?}");
        assert!((i.value - want).abs() <= i.tolerance());
        assert!(patch(&center, 0.8, 4, 8).is_err());
    }

    #[test]
    fn gauss_product_is_exact_for_low_degree() {
        let g = gauss_product(8192);
        assert_eq!(g.len(), 8192);
        let m4 = g.integrate(|u| Ok(u[0].powi(4))).unwrap();
        assert!((m4.value - 4.0 * PI / 5.0).abs() < 1e-12);
        assert!(m4.error_estimate < 1e-12);
    }

    #[test]
    fn monte_carlo_estimate_covers_standard_error() {
        let g = monte_carlo(4, 4096, 9);
        let i = g.integrate(|u| Ok(u[0] * u[0])).unwrap();
        // Var(u_1²) on S³ is 1/8 - 1/16, scaled by the area 2π².
        let se = 2.0 * PI * PI * (1.0f64 / 16.0).sqrt() / 4096f64.sqrt();
        assert!(i.error_estimate >= 0.9 * se, "{i:?} vs {se}");
    }

    #[test]
    fn polar_grid_total_weight() {
        let g = polar_graded(64, 1e-3, 6).unwrap();
        assert!((g.total_weight() - 4.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let g = super_fibonacci(4096, 3);
        let f = |u: &DVector<f64>| Ok((u[0] * 3.0).sin() + u[3]);
        let a = g.clone().with_exec(Exec::Parallel).integrate(f).unwrap();
        let b = g.with_exec(Exec::Sequential).integrate(f).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut buf = Vec::new();
        circle(4).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("x1,x2,weight"));
    }
}
