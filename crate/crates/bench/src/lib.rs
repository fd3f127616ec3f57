//! Fixtures shared by the benchmarks in `benches/`.

use uvm_core::rng::{self, Stream};
use uvm_core::{HeadConfig, IndexDistribution, Representation, UvmHead, ValuePosterior};

fn gaussian(n: usize, rng: &mut Stream) -> Vec<f64> {
    IndexDistribution::Gaussian { m: n }.sample(rng).as_slice().to_vec()
}

/// Untrained head with a random mean branch.
pub fn head(d: usize, m: usize, seed: u64) -> UvmHead {
    let mut rng = rng::stream(seed);
    let base = UvmHead::new(HeadConfig {
        d,
        m,
        prior_seed: seed,
        ..HeadConfig::default()
    })
    .expect("valid config");
    UvmHead::from_parts(
        *base.config(),
        gaussian(d, &mut rng),
        gaussian(d * m, &mut rng),
        base.prior_matrix().to_vec(),
    )
    .expect("finite parameters")
}

pub fn representations(d: usize, n: usize, seed: u64) -> Vec<Representation> {
    let mut rng = rng::stream(seed);
    (0..n)
        .map(|_| Representation::new(gaussian(d, &mut rng)).expect("finite"))
        .collect()
}

/// `k` candidate posteriors projected through a random head.
pub fn posteriors(d: usize, m: usize, k: usize, seed: u64) -> Vec<ValuePosterior> {
    let h = head(d, m, seed);
    representations(d, k, seed + 1)
        .iter()
        .map(|x| h.project(x).expect("matching dimension"))
        .collect()
}
