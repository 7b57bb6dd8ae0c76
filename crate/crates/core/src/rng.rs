//! Counter-based random sources derived from a root seed and a labelled path.
//!
//! Every sampling site in the generator owns a [`SeedPath`] such as
//! `subseq/2 -> tile/157 -> populate/3`. The path is hashed together with the
//! root seed into a 64-bit key, and the source produces `mix(key + k * GAMMA)`
//! for its k-th draw (the SplitMix64 output function). Adding or removing a
//! sampling site therefore never shifts the draws of any other site.
//!
//! Transcendental functions go through `libm` so that the normal transform is
//! bit-reproducible across platforms.

use std::borrow::Cow;
use std::fmt;

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const PATH_SALT: u64 = 0xD1B5_4A32_D192_ED03;
const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label
        .bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Ordered `(label, index)` segments naming one sampling site.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct SeedPath {
    segments: Vec<(Cow<'static, str>, u64)>,
}

impl SeedPath {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn root(label: impl Into<Cow<'static, str>>, index: u64) -> Self {
        Self::new().child(label, index)
    }

    /// Returns a copy of this path extended by one segment.
    pub fn child(&self, label: impl Into<Cow<'static, str>>, index: u64) -> Self {
        let mut segments = self.segments.clone();
        segments.push((label.into(), index));
        Self { segments }
    }

    pub fn push(&mut self, label: impl Into<Cow<'static, str>>, index: u64) {
        self.segments.push((label.into(), index));
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn segments(&self) -> impl Iterator<Item = (&str, u64)> {
        self.segments.iter().map(|(l, i)| (l.as_ref(), *i))
    }

    fn key(&self, root_seed: u64) -> u64 {
        let mut h = mix64(root_seed ^ PATH_SALT);
        for (label, index) in &self.segments {
            h = mix64(h ^ fnv1a(label));
            h = mix64(h.wrapping_add(index.wrapping_mul(GAMMA)) ^ PATH_SALT);
        }
        h
    }
}

impl fmt::Debug for SeedPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .segments
            .iter()
            .map(|(l, i)| format!("{l}/{i}"))
            .collect();
        write!(f, "SeedPath({})", parts.join(" -> "))
    }
}

/// A value-like random stream. Cloning a source forks it at the current counter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomSource {
    key: u64,
    counter: u64,
}

/// Derives the source for `path` under `root_seed`.
///
/// The path must be non-empty; the root seed alone is never used as a stream.
pub fn derive_source(root_seed: u64, path: &SeedPath) -> RandomSource {
    debug_assert!(!path.is_empty(), "sampling sites need a non-empty seed path");
    RandomSource {
        key: path.key(root_seed),
        counter: 0,
    }
}

impl RandomSource {
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GAMMA)))
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n` (Lemire's multiply-shift; bias below 2^-32 for small n).
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((u128::from(self.next_u64()) * u128::from(n)) >> 64) as u64
    }

    /// Number of draws consumed so far.
    pub fn draws(&self) -> u64 {
        self.counter
    }
}

/// Non-negative, unnormalized weights over outcome indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalWeights(Vec<f64>);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WeightsError {
    #[error("categorical weights need at least one outcome")]
    Empty,
    #[error("weight {index} is {value}; weights must be finite and non-negative")]
    Invalid { index: usize, value: f64 },
}

impl CategoricalWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self, WeightsError> {
        if weights.is_empty() {
            return Err(WeightsError::Empty);
        }
        if let Some((index, &value)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(WeightsError::Invalid { index, value });
        }
        Ok(Self(weights))
    }

    /// `n` equal weights.
    pub fn uniform(n: usize) -> Self {
        assert!(n > 0);
        Self(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Normalized probabilities; all-zero weights put all mass on outcome 0.
    pub fn probabilities(&self) -> Vec<f64> {
        let total = self.total();
        if total > 0.0 {
            self.0.iter().map(|w| w / total).collect()
        } else {
            let mut p = vec![0.0; self.0.len()];
            p[0] = 1.0;
            p
        }
    }
}

/// Draws an outcome index with probability `w_i / sum(w)`.
///
/// All-zero weights fall back to outcome 0, i.e. the first asset entry.
pub fn sample_categorical(src: &mut RandomSource, w: &CategoricalWeights) -> usize {
    let u = src.next_f64();
    let total = w.total();
    if total <= 0.0 {
        return 0;
    }
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &wi) in w.as_slice().iter().enumerate() {
        if wi <= 0.0 {
            continue;
        }
        acc += wi;
        last_positive = i;
        if target < acc {
            return i;
        }
    }
    // rounding in the running sum can leave target == acc at the very end
    last_positive
}

/// True with probability `p`. Always consumes one draw.
pub fn sample_bernoulli(src: &mut RandomSource, p: f64) -> bool {
    debug_assert!((0.0..=1.0).contains(&p));
    src.next_f64() < p
}

/// Uniform on `[lo, hi]`. A collapsed interval returns `lo` exactly.
pub fn sample_uniform(src: &mut RandomSource, lo: f64, hi: f64) -> f64 {
    debug_assert!(lo <= hi);
    let u = src.next_f64();
    (lo + (hi - lo) * u).clamp(lo, hi)
}

/// Gaussian draw via the cosine branch of Box-Muller over two uniforms:
/// `mean + sd * sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`.
pub fn sample_normal(src: &mut RandomSource, mean: f64, sd: f64) -> f64 {
    debug_assert!(sd >= 0.0);
    let u1 = 1.0 - src.next_f64(); // (0, 1]
    let u2 = src.next_f64();
    let radius = libm::sqrt(-2.0 * libm::log(u1));
    let z = radius * libm::cos(2.0 * std::f64::consts::PI * u2);
    if sd == 0.0 {
        mean
    } else {
        mean + sd * z
    }
}
