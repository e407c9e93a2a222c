use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Numerical experiments on area-measure functionals of smooth convex bodies.
///
/// Defaults: grid 8192 nodes, tolerance 1e-7 (1e-4 for finite-difference
/// functions), seed 0 (0xC0FFEE for `corpus`). A `--config` file of `key = value` lines may set
/// grid, tol, seed, t, k, samples, pairs, size, deltas and R; flags win.
///
/// Exit codes: 0 passed (or a hunt found its target), 1 violation found,
/// 2 usage or config error, 3 numerical failure.
#[derive(Parser, Debug)]
#[command(name = "mixedarea", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Function spec, e.g. `poly:"x1^2 - x2^2"`, `support:ball:1`, `bump:0,0,1,30`.
    #[arg(long = "f")]
    pub function: Option<String>,
    /// Ambient dimension (functions live on S^{n-1}).
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// Order of the area measure.
    #[arg(long)]
    pub i: Option<usize>,
    /// Quadrature grid resolution [default: 8192].
    #[arg(long)]
    pub grid: Option<usize>,
    /// Verdict tolerance [default: 1e-7, or 1e-4 for finite differences].
    #[arg(long)]
    pub tol: Option<f64>,
    /// Seed, decimal or 0x-hex [default: 0].
    #[arg(long)]
    pub seed: Option<String>,
    /// Write the JSON summary here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write a CSV detail table here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check the pointwise eigenvalue condition (M)_i on a grid.
    MiCheck {
        #[command(flatten)]
        common: Common,
    },
    /// F(K) <= F(L) over random nested pairs K ⊂ L.
    MonoTest {
        #[command(flatten)]
        common: Common,
        /// Number of nested pairs [default: 20].
        #[arg(long)]
        pairs: Option<usize>,
    },
    /// Construct K ⊂ L with F(K) > F(L) from a violation of (M)_i.
    MonoHunt {
        #[command(flatten)]
        common: Common,
    },
    /// Concavity of F^{1/i} along the Minkowski segment from K to L
    /// (falls back to the min form when F is not positive).
    BmTest {
        #[command(flatten)]
        common: Common,
        #[arg(long = "K")]
        inner: String,
        #[arg(long = "L")]
        outer: String,
        /// Samples on [0, 1] [default: 21].
        #[arg(long)]
        t: Option<usize>,
    },
    /// Second-order Brunn-Minkowski criterion at K in direction φ.
    Bm2Test {
        #[command(flatten)]
        common: Common,
        #[arg(long = "K")]
        body: Option<String>,
        /// Perturbation direction φ (a function spec).
        #[arg(long)]
        phi: Option<String>,
        /// Search for a violation with oscillating perturbations instead.
        #[arg(long)]
        search: bool,
    },
    /// F(K) with its quadrature error estimate.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long = "K")]
        body: String,
    },
    /// Rotation mollification f_k and optionally (M)_i for it.
    Mollify {
        #[command(flatten)]
        common: Common,
        /// Scale index k [default: 8].
        #[arg(long)]
        k: Option<f64>,
        /// Rotation samples [default: 400].
        #[arg(long)]
        samples: Option<usize>,
        /// Check (M)_i for the mollified function.
        #[arg(long)]
        check_mi: Option<usize>,
    },
    /// Integration-by-parts symmetry residual at K in direction φ.
    IbpCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long = "K")]
        body: String,
        #[arg(long)]
        phi: String,
    },
    /// Cylinder decomposition of mixed area measures (n = 3).
    CylinderCheck {
        #[command(flatten)]
        common: Common,
        /// Planar body: `disc:<r>` or `ellipse:<a>,<b>`.
        #[arg(long = "K1", default_value = "disc:1")]
        planar: String,
        /// Half-length R [default: 1].
        #[arg(long = "R")]
        radius: Option<f64>,
        /// Thicknesses δ [default: 0.05,0.02,0.01].
        #[arg(long)]
        deltas: Option<String>,
    },
    /// Rescaled functional as R grows (n = 3).
    Dimred {
        #[command(flatten)]
        common: Common,
        /// Planar body: `disc:<r>` or `ellipse:<a>,<b>`.
        #[arg(long = "K", default_value = "disc:1")]
        planar: String,
        /// Half-lengths [default: 2,8,32].
        #[arg(long = "R")]
        radii: Option<String>,
        #[arg(long)]
        deltas: Option<String>,
    },
    /// (M)_i against empirical monotonicity over the seeded probe corpus.
    Corpus {
        #[command(flatten)]
        common: Common,
        /// Corpus size [default: 30].
        #[arg(long)]
        size: Option<usize>,
        /// Nested pairs per function [default: 10].
        #[arg(long)]
        pairs: Option<usize>,
    },
}
