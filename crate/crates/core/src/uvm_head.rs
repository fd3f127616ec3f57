//! The dual-branch uncertainty-aware value head.
//!
//! A posterior value sample for representation `x` and index `zeta` is
//!
//! ```text
//! v = x·b + x·(u·W + p0·W0)·zetaᵀ
//! ```
//!
//! where `b` (mean weights) and `W` (posterior matrix) are learned and `W0`
//! (prior matrix) is random and frozen. The zero index recovers the mean
//! branch, i.e. the plain outcome value model.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Default number of ensemble components (index dimension).
pub const DEFAULT_INDEX_DIM: usize = 10;

fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Feature vector `x` produced by an encoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Representation(Vec<f64>);

impl Representation {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_finite(&values, "representation")?;
        Ok(Representation(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Representation {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Representation::new(v)
    }
}

impl From<Representation> for Vec<f64> {
    fn from(r: Representation) -> Self {
        r.0
    }
}

/// Index vector `zeta`.
#[derive(Clone, Debug, PartialEq)]
pub struct IndexVector(Vec<f64>);

impl IndexVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_finite(&values, "index vector")?;
        Ok(IndexVector(values))
    }

    pub fn zeros(m: usize) -> Self {
        IndexVector(vec![0.0; m])
    }

    /// `+e_i` when `negative` is false, `-e_i` otherwise.
    pub fn signed_unit(m: usize, i: usize, negative: bool) -> Self {
        let mut v = vec![0.0; m];
        v[i] = if negative { -1.0 } else { 1.0 };
        IndexVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Distribution the index is drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IndexDistribution {
    /// Always the zero vector; recovers the mean branch.
    ZeroPoint { m: usize },
    /// Uniform over the `2m` signed one-hots `±e_1..±e_m`. Used for training.
    CoordinateSigned { m: usize },
    /// `N(0, I_m)`. Used at inference.
    Gaussian { m: usize },
}

impl IndexDistribution {
    pub fn dim(&self) -> usize {
        match *self {
            IndexDistribution::ZeroPoint { m }
            | IndexDistribution::CoordinateSigned { m }
            | IndexDistribution::Gaussian { m } => m,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> IndexVector {
        match *self {
            IndexDistribution::ZeroPoint { m } => IndexVector::zeros(m),
            IndexDistribution::CoordinateSigned { m } => {
                let k = rng.random_range(0..2 * m);
                IndexVector::signed_unit(m, k % m, k >= m)
            }
            IndexDistribution::Gaussian { m } => IndexVector(gaussian_index(m, rng)),
        }
    }

    /// The support of [`IndexDistribution::CoordinateSigned`] in order
    /// `e_1..e_m, e_{m+1}..e_{2m}` where `e_{m+i} = -e_i`.
    pub fn coordinate_support(m: usize) -> Vec<IndexVector> {
        (0..2 * m)
            .map(|k| IndexVector::signed_unit(m, k % m, k >= m))
            .collect()
    }
}

pub(crate) fn gaussian_index<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<f64> {
    (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Mean and uncertainty loading of one candidate: the result of encoding
/// once. Any number of posterior samples can be mapped from it.
///
/// `value(zeta) = mean + loading · zeta`, where `loading = x·(u·W + p0·W0)`.
/// An empty loading is a zero-variance posterior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValuePosterior {
    pub mean: f64,
    pub loading: Vec<f64>,
}

impl ValuePosterior {
    pub fn point(mean: f64) -> Self {
        ValuePosterior {
            mean: mean + 0.0,
            loading: Vec::new(),
        }
    }

    #[inline]
    pub fn value_at(&self, zeta: &[f64]) -> f64 {
        let spread = self
            .loading
            .iter()
            .zip(zeta)
            .fold(0.0, |acc, (l, z)| acc + l * z);
        self.mean + spread
    }

    /// Exact standard deviation under a standard Gaussian index: `|loading|`.
    pub fn gaussian_std(&self) -> f64 {
        self.loading.iter().map(|l| l * l).sum::<f64>().sqrt()
    }

    pub fn index_dim(&self) -> usize {
        self.loading.len()
    }
}

/// Sample statistics of a value distribution. `mean` is exact (zero index).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueDistributionSummary {
    pub mean: f64,
    pub std: f64,
    pub sample_count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeadConfig {
    pub d: usize,
    pub m: usize,
    pub u: f64,
    pub p0: f64,
    pub prior_seed: u64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig {
            d: 1,
            m: DEFAULT_INDEX_DIM,
            u: 1.0,
            p0: 1.0,
            prior_seed: 0,
        }
    }
}

impl HeadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.m == 0 {
            return Err(Error::InvalidConfig(format!(
                "head dimensions must be positive (d = {}, m = {})",
                self.d, self.m
            )));
        }
        if !(self.u.is_finite() && self.u >= 0.0 && self.p0.is_finite() && self.p0 >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "u and p0 must be finite and non-negative (u = {}, p0 = {})",
                self.u, self.p0
            )));
        }
        Ok(())
    }
}

/// The uncertainty-aware value head.
#[derive(Clone, Debug, PartialEq)]
pub struct UvmHead {
    config: HeadConfig,
    mean_weights: Vec<f64>,
    /// `d × m`, row-major.
    posterior_matrix: Vec<f64>,
    /// `d × m`, row-major. Never written after construction.
    prior_matrix: Vec<f64>,
}

impl UvmHead {
    /// Fresh head: zero mean weights, zero posterior matrix and a prior matrix
    /// with i.i.d. `N(0, 1/m)` entries drawn from `config.prior_seed`.
    pub fn new(config: HeadConfig) -> Result<Self> {
        config.validate()?;
        let HeadConfig { d, m, .. } = config;
        let normal = Normal::new(0.0, 1.0 / (m as f64).sqrt())
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let mut rng = rng::stream(config.prior_seed);
        let prior_matrix = (0..d * m).map(|_| normal.sample(&mut rng)).collect();
        Ok(UvmHead {
            config,
            mean_weights: vec![0.0; d],
            posterior_matrix: vec![0.0; d * m],
            prior_matrix,
        })
    }

    /// Builds a head from explicit parameters. Matrices are row-major `d × m`.
    pub fn from_parts(
        config: HeadConfig,
        mean_weights: Vec<f64>,
        posterior_matrix: Vec<f64>,
        prior_matrix: Vec<f64>,
    ) -> Result<Self> {
        config.validate()?;
        let (d, m) = (config.d, config.m);
        for (what, len, want) in [
            ("mean weights", mean_weights.len(), d),
            ("posterior matrix", posterior_matrix.len(), d * m),
            ("prior matrix", prior_matrix.len(), d * m),
        ] {
            if len != want {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: want,
                    actual: len,
                });
            }
        }
        check_finite(&mean_weights, "mean weights")?;
        check_finite(&posterior_matrix, "posterior matrix")?;
        check_finite(&prior_matrix, "prior matrix")?;
        Ok(UvmHead {
            config,
            mean_weights,
            posterior_matrix,
            prior_matrix,
        })
    }

    pub fn config(&self) -> &HeadConfig {
        &self.config
    }

    pub fn d(&self) -> usize {
        self.config.d
    }

    pub fn m(&self) -> usize {
        self.config.m
    }

    pub fn mean_weights(&self) -> &[f64] {
        &self.mean_weights
    }

    pub fn posterior_matrix(&self) -> &[f64] {
        &self.posterior_matrix
    }

    pub fn prior_matrix(&self) -> &[f64] {
        &self.prior_matrix
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.mean_weights, &mut self.posterior_matrix)
    }

    /// FNV-1a over the prior matrix bits.
    pub fn prior_fingerprint(&self) -> u64 {
        self.prior_matrix.iter().fold(0xcbf2_9ce4_8422_2325, |h, v| {
            v.to_bits()
                .to_le_bytes()
                .iter()
                .fold(h, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
        })
    }

    /// `M = u·W + p0·W0`, row-major `d × m`.
    pub fn effective_matrix(&self) -> Vec<f64> {
        let HeadConfig { u, p0, .. } = self.config;
        self.posterior_matrix
            .iter()
            .zip(&self.prior_matrix)
            .map(|(w, w0)| u * w + p0 * w0)
            .collect()
    }

    /// A copy with the uncertainty branch switched off (`u = p0 = 0`).
    pub fn zero_variance(&self) -> UvmHead {
        let mut h = self.clone();
        h.config.u = 0.0;
        h.config.p0 = 0.0;
        h
    }

    fn check_x(&self, x: &Representation) -> Result<()> {
        if x.dim() != self.config.d {
            return Err(Error::DimensionMismatch {
                what: "representation",
                expected: self.config.d,
                actual: x.dim(),
            });
        }
        Ok(())
    }

    fn mean_unchecked(&self, x: &[f64]) -> f64 {
        // `+ 0.0` maps -0.0 to 0.0 so the zero-index identity is bitwise.
        x.iter()
            .zip(&self.mean_weights)
            .fold(0.0, |acc, (a, b)| acc + a * b)
            + 0.0
    }

    /// `x·(u·W + p0·W0)`, length `m`.
    pub fn uncertainty_loading(&self, x: &Representation) -> Result<Vec<f64>> {
        self.check_x(x)?;
        let HeadConfig { m, u, p0, .. } = self.config;
        let mut loading = vec![0.0; m];
        for (k, &xk) in x.as_slice().iter().enumerate() {
            let row = k * m..(k + 1) * m;
            for ((l, w), w0) in loading
                .iter_mut()
                .zip(&self.posterior_matrix[row.clone()])
                .zip(&self.prior_matrix[row])
            {
                *l += xk * (u * w + p0 * w0);
            }
        }
        Ok(loading)
    }

    /// Encodes `x` once into a reusable [`ValuePosterior`].
    pub fn project(&self, x: &Representation) -> Result<ValuePosterior> {
        let loading = self.uncertainty_loading(x)?;
        Ok(ValuePosterior {
            mean: self.mean_unchecked(x.as_slice()),
            loading,
        })
    }

    pub fn posterior_value(&self, x: &Representation, zeta: &IndexVector) -> Result<f64> {
        if zeta.dim() != self.config.m {
            return Err(Error::DimensionMismatch {
                what: "index vector",
                expected: self.config.m,
                actual: zeta.dim(),
            });
        }
        Ok(self.project(x)?.value_at(zeta.as_slice()))
    }

    /// The mean branch `x·b`; identical to [`posterior_value`](Self::posterior_value) at the zero index.
    pub fn mean_value(&self, x: &Representation) -> Result<f64> {
        self.check_x(x)?;
        Ok(self.mean_unchecked(x.as_slice()))
    }

    /// `n` i.i.d. posterior values under the Gaussian index. `x` is projected once.
    pub fn sample_posterior_values<R: Rng + ?Sized>(
        &self,
        x: &Representation,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample count must be at least 1".into()));
        }
        let post = self.project(x)?;
        let m = self.config.m;
        let mut zeta = vec![0.0; m];
        Ok((0..n)
            .map(|_| {
                zeta.iter_mut()
                    .for_each(|z| *z = rng.sample::<f64, _>(StandardNormal));
                post.value_at(&zeta)
            })
            .collect())
    }

    /// Exact mean plus the sample standard deviation of `n` Gaussian-index draws.
    pub fn posterior_summary<R: Rng + ?Sized>(
        &self,
        x: &Representation,
        n: usize,
        rng: &mut R,
    ) -> Result<ValueDistributionSummary> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "posterior summary needs at least 2 samples, got {n}"
            )));
        }
        let samples = self.sample_posterior_values(x, n, rng)?;
        Ok(ValueDistributionSummary {
            mean: self.mean_value(x)?,
            std: sample_std(&samples),
            sample_count: n,
        })
    }

    pub fn to_checkpoint(&self) -> HeadCheckpoint {
        let m = self.config.m;
        let rows = |v: &[f64]| v.chunks(m).map(<[f64]>::to_vec).collect();
        HeadCheckpoint {
            d: self.config.d,
            m,
            u: self.config.u,
            p0: self.config.p0,
            prior_seed: self.config.prior_seed,
            mean_weights: self.mean_weights.clone(),
            posterior_matrix: rows(&self.posterior_matrix),
            prior_matrix: rows(&self.prior_matrix),
        }
    }

    pub fn from_checkpoint(c: HeadCheckpoint) -> Result<Self> {
        let config = HeadConfig {
            d: c.d,
            m: c.m,
            u: c.u,
            p0: c.p0,
            prior_seed: c.prior_seed,
        };
        let flatten = |rows: Vec<Vec<f64>>, what: &'static str| -> Result<Vec<f64>> {
            if rows.len() != c.d {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: c.d,
                    actual: rows.len(),
                });
            }
            if let Some(r) = rows.iter().find(|r| r.len() != c.m) {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: c.m,
                    actual: r.len(),
                });
            }
            Ok(rows.concat())
        };
        let w = flatten(c.posterior_matrix, "posterior matrix rows")?;
        let w0 = flatten(c.prior_matrix, "prior matrix rows")?;
        UvmHead::from_parts(config, c.mean_weights, w, w0)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_checkpoint())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        UvmHead::from_checkpoint(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        UvmHead::from_json(&s)
    }
}

/// Unbiased sample standard deviation (Welford). Identical samples give exactly 0.
pub fn sample_std(samples: &[f64]) -> f64 {
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for (k, &v) in samples.iter().enumerate() {
        let delta = v - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (v - mean);
    }
    if samples.len() < 2 {
        0.0
    } else {
        (m2 / (samples.len() - 1) as f64).sqrt()
    }
}

/// On-disk form of a head. Floats are written in shortest round-trip form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadCheckpoint {
    pub d: usize,
    pub m: usize,
    pub u: f64,
    pub p0: f64,
    pub prior_seed: u64,
    pub mean_weights: Vec<f64>,
    pub posterior_matrix: Vec<Vec<f64>>,
    pub prior_matrix: Vec<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar_head(b: f64, w: f64, w0: f64) -> UvmHead {
        let cfg = HeadConfig {
            d: 1,
            m: 1,
            ..HeadConfig::default()
        };
        UvmHead::from_parts(cfg, vec![b], vec![w], vec![w0]).unwrap()
    }

    fn rep(v: &[f64]) -> Representation {
        Representation::new(v.to_vec()).unwrap()
    }

    #[test]
    fn hand_evaluated_scalar_head() {
        let h = scalar_head(0.5, 0.2, 0.1);
        let x = rep(&[1.0]);
        let up = h.posterior_value(&x, &IndexVector::new(vec![2.0]).unwrap()).unwrap();
        let down = h.posterior_value(&x, &IndexVector::new(vec![-2.0]).unwrap()).unwrap();
        assert!((up - 1.1).abs() < 1e-12);
        assert!((down + 0.1).abs() < 1e-12);
        assert!(((up + down) / 2.0 - 0.5).abs() < 1e-12);
        assert_eq!(h.mean_value(&x).unwrap(), 0.5);
    }

    #[test]
    fn mean_is_dot_product() {
        let cfg = HeadConfig {
            d: 2,
            m: 3,
            ..HeadConfig::default()
        };
        let h = UvmHead::from_parts(cfg, vec![0.3, -0.1], vec![0.0; 6], vec![0.5; 6]).unwrap();
        assert!((h.mean_value(&rep(&[1.0, 2.0])).unwrap() - 0.1).abs() < 1e-15);

        let zero = UvmHead::new(HeadConfig { d: 4, ..HeadConfig::default() }).unwrap();
        assert_eq!(zero.mean_value(&rep(&[1.0, -3.0, 2.0, 9.0])).unwrap(), 0.0);
    }

    #[test]
    fn fresh_head_has_zero_posterior_and_seeded_prior() {
        let cfg = HeadConfig {
            d: 5,
            m: 4,
            prior_seed: 11,
            ..HeadConfig::default()
        };
        let a = UvmHead::new(cfg).unwrap();
        let b = UvmHead::new(cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.posterior_matrix().iter().all(|&w| w == 0.0));
        assert!(a.prior_matrix().iter().any(|&w| w != 0.0));
        let c = UvmHead::new(HeadConfig { prior_seed: 12, ..cfg }).unwrap();
        assert_ne!(a.prior_fingerprint(), c.prior_fingerprint());
    }

    #[test]
    fn dimension_and_finiteness_errors() {
        let h = scalar_head(0.5, 0.2, 0.1);
        assert!(matches!(
            h.mean_value(&rep(&[1.0, 2.0])),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            h.posterior_value(&rep(&[1.0]), &IndexVector::zeros(2)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            Representation::new(vec![f64::NAN]),
            Err(Error::NonFinite(_))
        ));
        assert!(IndexVector::new(vec![f64::INFINITY]).is_err());
        assert!(UvmHead::new(HeadConfig { m: 0, ..HeadConfig::default() }).is_err());
        assert!(UvmHead::new(HeadConfig { u: -1.0, ..HeadConfig::default() }).is_err());
    }

    #[test]
    fn zero_variance_head_samples_are_the_mean() {
        let h = scalar_head(0.7, 0.0, 0.0);
        let x = rep(&[2.0]);
        let mut rng = rng::stream(3);
        let vals = h.sample_posterior_values(&x, 50, &mut rng).unwrap();
        assert!(vals.iter().all(|&v| v == 1.4));
        let s = h.posterior_summary(&x, 50, &mut rng).unwrap();
        assert_eq!(s.std, 0.0);
        assert_eq!(s.mean, 1.4);
    }

    #[test]
    fn single_sample_matches_one_gaussian_draw() {
        let h = scalar_head(0.1, 0.3, -0.2);
        let x = rep(&[1.5]);
        let got = h.sample_posterior_values(&x, 1, &mut rng::stream(9)).unwrap();
        let zeta = IndexDistribution::Gaussian { m: 1 }.sample(&mut rng::stream(9));
        assert_eq!(got, vec![h.posterior_value(&x, &zeta).unwrap()]);
    }

    #[test]
    fn summary_rejects_small_n_and_mean_ignores_n() {
        let h = scalar_head(0.2, 0.6, 0.8);
        let x = rep(&[1.0]);
        let mut rng = rng::stream(1);
        assert!(h.posterior_summary(&x, 1, &mut rng).is_err());
        assert!(h.sample_posterior_values(&x, 0, &mut rng).is_err());
        let a = h.posterior_summary(&x, 2, &mut rng).unwrap();
        let b = h.posterior_summary(&x, 500, &mut rng).unwrap();
        assert_eq!(a.mean, b.mean);
    }

    #[test]
    fn coordinate_support_layout() {
        let s = IndexDistribution::coordinate_support(2);
        let v: Vec<&[f64]> = s.iter().map(|z| z.as_slice()).collect();
        assert_eq!(v, vec![&[1.0, 0.0][..], &[0.0, 1.0], &[-1.0, 0.0], &[0.0, -1.0]]);
        assert_eq!(IndexDistribution::ZeroPoint { m: 3 }.sample(&mut rng::stream(0)).as_slice(), &[0.0; 3]);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let mut h = UvmHead::new(HeadConfig {
            d: 3,
            m: 2,
            u: 0.75,
            p0: 1.0 / 3.0,
            prior_seed: 99,
        })
        .unwrap();
        {
            let (b, w) = h.params_mut();
            b.copy_from_slice(&[0.1, -2.0 / 7.0, 1e-300]);
            w[3] = std::f64::consts::PI;
        }
        let back = UvmHead::from_json(&h.to_json().unwrap()).unwrap();
        assert_eq!(back, h);
        for (a, b) in back.prior_matrix().iter().zip(h.prior_matrix()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn checkpoint_rejects_ragged_rows() {
        let mut c = UvmHead::new(HeadConfig { d: 2, m: 2, ..HeadConfig::default() })
            .unwrap()
            .to_checkpoint();
        c.prior_matrix[1].pop();
        assert!(UvmHead::from_checkpoint(c).is_err());
    }

    fn arb_head() -> impl Strategy<Value = (UvmHead, Representation)> {
        (1usize..6, 1usize..6).prop_flat_map(|(d, m)| {
            (
                prop::collection::vec(-3.0f64..3.0, d),
                prop::collection::vec(-3.0f64..3.0, d * m),
                prop::collection::vec(-3.0f64..3.0, d * m),
                prop::collection::vec(-3.0f64..3.0, d),
                0.0f64..2.0,
                0.0f64..2.0,
            )
                .prop_map(move |(b, w, w0, x, u, p0)| {
                    let cfg = HeadConfig { d, m, u, p0, prior_seed: 0 };
                    (
                        UvmHead::from_parts(cfg, b, w, w0).unwrap(),
                        Representation::new(x).unwrap(),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn linear_in_index((h, x) in arb_head(), alpha in -4.0f64..4.0, seed in any::<u64>()) {
            let zeta = IndexDistribution::Gaussian { m: h.m() }.sample(&mut rng::stream(seed));
            let scaled = IndexVector::new(zeta.as_slice().iter().map(|z| alpha * z).collect()).unwrap();
            let mean = h.mean_value(&x).unwrap();
            let lhs = h.posterior_value(&x, &scaled).unwrap() - mean;
            let rhs = alpha * (h.posterior_value(&x, &zeta).unwrap() - mean);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        }

        #[test]
        fn zero_index_is_the_mean((h, x) in arb_head()) {
            let v = h.posterior_value(&x, &IndexVector::zeros(h.m())).unwrap();
            prop_assert_eq!(v.to_bits(), h.mean_value(&x).unwrap().to_bits());
        }
    }
}
