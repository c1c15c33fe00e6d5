//! Random inputs, reproducible sample streams and the map between physical space and
//! standard-normal (u) space.
//!
//! Every estimator and every surrogate in this crate works on u-space vectors; physical
//! realizations are always produced through [`RandomInput::from_u`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Marginal distribution of one uncertain parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RandomVariable<T> {
    StandardNormal,
    Normal { mean: T, std: T },
    /// Parameterized by the mean and standard deviation of the variable itself, not of its log.
    Lognormal { mean: T, std: T },
}

impl<T: Real> RandomVariable<T> {
    pub fn normal(mean: T, std: T) -> Result<Self> {
        if !(std > T::zero()) || !mean.is_finite() || !std.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "normal variable needs finite mean and std > 0 (got mean {mean}, std {std})"
            )));
        }
        Ok(Self::Normal { mean, std })
    }

    pub fn lognormal(mean: T, std: T) -> Result<Self> {
        if !(mean > T::zero()) || !(std > T::zero()) || !mean.is_finite() || !std.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lognormal variable needs mean > 0 and std > 0 (got mean {mean}, std {std})"
            )));
        }
        Ok(Self::Lognormal { mean, std })
    }

    /// `(mu, sigma)` of the underlying normal for a lognormal variable, matched to the
    /// physical mean and standard deviation.
    pub fn log_parameters(mean: T, std: T) -> (T, T) {
        let cov = std / mean;
        let var = (T::one() + cov * cov).ln();
        (mean.ln() - var / T::of(2.0), var.sqrt())
    }

    pub fn from_u(&self, u: T) -> T {
        match *self {
            Self::StandardNormal => u,
            Self::Normal { mean, std } => mean + std * u,
            Self::Lognormal { mean, std } => {
                let (mu, sigma) = Self::log_parameters(mean, std);
                (mu + sigma * u).exp()
            }
        }
    }

    pub fn to_u(&self, x: T) -> Result<T> {
        match *self {
            Self::StandardNormal => Ok(x),
            Self::Normal { mean, std } => Ok((x - mean) / std),
            Self::Lognormal { mean, std } => {
                if !(x > T::zero()) {
                    return Err(Error::Domain(format!(
                        "lognormal realization must be positive, got {x}"
                    )));
                }
                let (mu, sigma) = Self::log_parameters(mean, std);
                Ok((x.ln() - mu) / sigma)
            }
        }
    }
}

/// Ordered vector of independent uncertain parameters. The component order is the one used
/// for sampling, for the u-space transform and for the polynomial-chaos basis.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomInput<T> {
    components: Vec<RandomVariable<T>>,
}

impl<T: Real> RandomInput<T> {
    pub fn new(components: Vec<RandomVariable<T>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter(
                "random input needs at least one component".into(),
            ));
        }
        Ok(Self { components })
    }

    pub fn standard_normal(dim: usize) -> Result<Self> {
        Self::new(vec![RandomVariable::StandardNormal; dim])
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[RandomVariable<T>] {
        &self.components
    }

    pub fn from_u(&self, u: &[T]) -> Vec<T> {
        let mut x = vec![T::zero(); self.dim()];
        self.from_u_into(u, &mut x);
        x
    }

    pub fn from_u_into(&self, u: &[T], out: &mut [T]) {
        debug_assert_eq!(u.len(), self.dim());
        for ((o, v), &ui) in out.iter_mut().zip(&self.components).zip(u) {
            *o = v.from_u(ui);
        }
    }

    pub fn to_u(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.dim() {
            return Err(Error::InvalidParameter(format!(
                "expected {} components, got {}",
                self.dim(),
                x.len()
            )));
        }
        self.components
            .iter()
            .zip(x)
            .map(|(v, &xi)| v.to_u(xi))
            .collect()
    }

    /// `n` i.i.d. draws in u-space.
    pub fn sample_u(&self, n: usize, stream: &SampleStream) -> SampleMatrix<T> {
        stream.standard_normal_matrix(n, self.dim())
    }

    /// `n` i.i.d. physical-space realizations; row `i` equals `from_u` of row `i` of
    /// [`sample_u`](Self::sample_u) on the same stream.
    pub fn sample(&self, n: usize, stream: &SampleStream) -> SampleMatrix<T> {
        let mut m = self.sample_u(n, stream);
        let d = self.dim();
        let mut buf = vec![T::zero(); d];
        for row in m.data.chunks_exact_mut(d) {
            self.from_u_into(row, &mut buf);
            row.copy_from_slice(&buf);
        }
        m
    }
}

/// Standard-normal log density summed over components.
pub fn log_pdf_u<T: Real>(u: &[T]) -> T {
    let half_ln_2pi = T::of(0.5) * (T::of(2.0) * T::PI()).ln();
    u.iter()
        .map(|&x| -x * x / T::of(2.0) - half_ln_2pi)
        .sum()
}

/// Dense row-major sample matrix (`rows × cols`).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix<T> {
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> SampleMatrix<T> {
    pub fn from_rows(cols: usize, data: Vec<T>) -> Self {
        assert!(cols > 0 && data.len().is_multiple_of(cols), "ragged sample matrix");
        Self { cols, data }
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.cols
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> std::slice::ChunksExact<'_, T> {
        self.data.chunks_exact(self.cols)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

/// One component of a stream path.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StreamLabel {
    Index(u64),
    Name(String),
}

impl From<u64> for StreamLabel {
    fn from(i: u64) -> Self {
        Self::Index(i)
    }
}

impl From<usize> for StreamLabel {
    fn from(i: usize) -> Self {
        Self::Index(i as u64)
    }
}

impl From<&str> for StreamLabel {
    fn from(s: &str) -> Self {
        Self::Name(s.to_owned())
    }
}

/// Addressable source of randomness. Two streams with the same root seed and path produce
/// the same draws; any two distinct paths are independent substreams.
///
/// Draws are generated in fixed-size blocks, each block keyed by its index, so sample `i`
/// depends only on `(seed, path, i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleStream {
    seed: u64,
    path: Vec<StreamLabel>,
    key: u64,
}

const BLOCK_ROWS: usize = 1024;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn label_hash(label: &StreamLabel) -> u64 {
    match label {
        StreamLabel::Index(i) => splitmix64(*i ^ 0x1D8E_4E27_C47D_124F),
        StreamLabel::Name(s) => {
            // FNV-1a, stable across platforms and releases.
            let mut h: u64 = 0xcbf2_9ce4_8422_2325;
            for b in s.bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
            splitmix64(h)
        }
    }
}

impl SampleStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            path: Vec::new(),
            key: splitmix64(seed),
        }
    }

    pub fn child(&self, label: impl Into<StreamLabel>) -> Self {
        let label = label.into();
        let key = splitmix64(self.key ^ label_hash(&label).rotate_left(17));
        let mut path = self.path.clone();
        path.push(label);
        Self {
            seed: self.seed,
            path,
            key,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> &[StreamLabel] {
        &self.path
    }

    /// Sequential generator for this stream (used by Markov chains, where draws are
    /// consumed in order anyway).
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.key)
    }

    fn block_rng(&self, block: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(self.key ^ 0xA5A5_5A5A_0F0F_F0F0));
        rng.set_stream(block as u64);
        rng
    }

    pub fn standard_normal_matrix<T: Real>(&self, rows: usize, cols: usize) -> SampleMatrix<T> {
        assert!(cols > 0);
        let mut data = Vec::with_capacity(rows * cols);
        let mut block = 0;
        while data.len() < rows * cols {
            let mut rng = self.block_rng(block);
            let remaining_rows = rows - data.len() / cols;
            for _ in 0..remaining_rows.min(BLOCK_ROWS) * cols {
                let z: f64 = rng.sample(StandardNormal);
                data.push(T::of(z));
            }
            block += 1;
        }
        SampleMatrix { cols, data }
    }

    pub fn standard_normals<T: Real>(&self, n: usize) -> Vec<T> {
        self.standard_normal_matrix(n, 1).data
    }
}
