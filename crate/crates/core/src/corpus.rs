//! The seeded probe corpus: polynomial integrands of degree at most 4 on
//! `S^2` and `S^3`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::specs::parse_function;
use crate::sphere::SphericalFunction;
use crate::Result;

pub const DEFAULT_SEED: u64 = 0xC0FFEE;
pub const DEFAULT_SIZE: usize = 30;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub name: String,
    pub dim: usize,
    /// Function specification accepted by [`parse_function`].
    pub spec: String,
    #[serde(skip)]
    pub function: Option<SphericalFunction>,
}

impl CorpusEntry {
    pub fn function(&self) -> &SphericalFunction {
        self.function.as_ref().expect("corpus entries carry their function")
    }
}

fn monomial(rng: &mut ChaCha8Rng, n: usize, degree: u32) -> String {
    let mut exps = vec![0u32; n];
    for _ in 0..degree {
        exps[rng.random_range(0..n)] += 1;
    }
    exps.iter()
        .enumerate()
        .filter(|(_, e)| **e > 0)
        .map(|(j, e)| if *e == 1 { format!("x{}", j + 1) } else { format!("x{}^{e}", j + 1) })
        .collect::<Vec<_>>()
        .join("*")
}

/// `c + Σ a_m x^{α_m}` with `c ∈ [0, 2.5]`, two to four monomials of degree
/// 1 to 4, coefficients in `[-1.5, 1.5]`; dimensions alternate 3, 4.
pub fn corpus(seed: u64, size: usize) -> Result<Vec<CorpusEntry>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..size)
        .map(|idx| {
            let n = if idx % 2 == 0 { 3 } else { 4 };
            let c: f64 = rng.random_range(0.0..2.5);
            let mut spec = format!("{c:.3}");
            for _ in 0..rng.random_range(2..=4) {
                let degree = rng.random_range(1..=4);
                let a: f64 = rng.random_range(-1.5..1.5);
                let sign = if a < 0.0 { '-' } else { '+' };
                spec.push_str(&format!(" {sign} {:.3}*{}", a.abs(), monomial(&mut rng, n, degree)));
            }
            let spec = format!("poly:{spec}");
            let function = parse_function(&spec, n)?;
            Ok(CorpusEntry { name: format!("corpus-{idx:02}"), dim: n, spec, function: Some(function) })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_reproducible() {
        let a = corpus(DEFAULT_SEED, 6).unwrap();
        let b = corpus(DEFAULT_SEED, 6).unwrap();
        assert_eq!(a.iter().map(|e| &e.spec).collect::<Vec<_>>(), b.iter().map(|e| &e.spec).collect::<Vec<_>>());
        assert_eq!(a[1].dim, 4);
        let c = corpus(1, 6).unwrap();
        assert_ne!(a[0].spec, c[0].spec);
    }
}
