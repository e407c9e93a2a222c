use mixedarea::conditions::default_tolerance;
use mixedarea::specs::{parse_function, parse_list, parse_seed};
use mixedarea::sphere::grid::make_grid;
use mixedarea::{QuadratureGrid, SphericalFunction};
use serde_json::{json, Value};

use crate::args::Common;
use crate::config::Config;
use crate::output::Failure;

pub const DEFAULT_GRID: usize = 8192;

/// Common flags merged with the config file.
pub struct Context {
    pub common: Common,
    pub config: Config,
    pub n: usize,
    pub grid_size: usize,
    pub seed: u64,
    /// Whether the seed came from a flag or the config file.
    pub seed_given: bool,
}

impl Context {
    pub fn new(common: Common) -> Result<Self, Failure> {
        let config = match &common.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        let grid_size = config.pick(common.grid, "grid", DEFAULT_GRID)?;
        let seed_src = common.seed.clone().or_else(|| config.get("seed").map(str::to_string));
        let seed = seed_src.as_deref().map(parse_seed).transpose()?.unwrap_or(0);
        if common.n < 2 {
            return Err(Failure::Usage(format!("--n must be at least 2, got {}", common.n)));
        }
        Ok(Context { n: common.n, config, grid_size, seed, seed_given: seed_src.is_some(), common })
    }

    pub fn function_or(&self, default: &str) -> Result<SphericalFunction, Failure> {
        let src = self.common.function.as_deref().unwrap_or(default);
        Ok(parse_function(src, self.n)?)
    }

    pub fn function(&self) -> Result<SphericalFunction, Failure> {
        let src = self.common.function.as_deref().ok_or_else(|| Failure::Usage("missing --f".into()))?;
        Ok(parse_function(src, self.n)?)
    }

    /// `--i`, checked against `1 ≤ i ≤ n-1`.
    pub fn order(&self) -> Result<usize, Failure> {
        let i = self.common.i.ok_or_else(|| Failure::Usage("missing --i".into()))?;
        if i < 1 || i >= self.n {
            return Err(Failure::Usage(format!("--i must lie in 1..={}, got {i}", self.n - 1)));
        }
        Ok(i)
    }

    pub fn grid(&self) -> Result<QuadratureGrid, Failure> {
        Ok(make_grid(self.n, self.grid_size, self.seed)?)
    }

    pub fn tol(&self, f: &SphericalFunction) -> Result<f64, Failure> {
        Ok(self.config.pick(self.common.tol, "tol", default_tolerance(f))?)
    }

    pub fn pick<T: std::str::FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, Failure> {
        Ok(self.config.pick(flag, key, default)?)
    }

    /// A comma-separated list from a flag, the config file, or `default`.
    pub fn list(&self, flag: Option<&str>, key: &str, default: &[f64]) -> Result<Vec<f64>, Failure> {
        match flag.or_else(|| self.config.get(key)) {
            Some(src) => Ok(parse_list(src)?),
            None => Ok(default.to_vec()),
        }
    }

    /// Echo of the resolved inputs for the JSON summary.
    pub fn inputs(&self, extra: Value) -> Value {
        let mut v = json!({
            "f": self.common.function,
            "n": self.n,
            "i": self.common.i,
            "grid": self.grid_size,
            "tol": self.common.tol.or_else(|| self.config.get("tol").and_then(|s| s.parse().ok())),
            "seed": self.seed,
        });
        if let (Value::Object(map), Value::Object(more)) = (&mut v, extra) {
            map.extend(more);
        }
        v
    }
}
