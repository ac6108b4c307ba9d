//! Sparse channels and the forward model `y = h ⊗ Ax + ν`.

use rand::seq::index::sample;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::seeded;

/// A sparse impulse response of length `m`.
///
/// `support` is strictly increasing and every tap is finite and nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    m: usize,
    support: Vec<usize>,
    taps: Vec<f64>,
}

impl Channel {
    pub fn new(m: usize, support: Vec<usize>, taps: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidArgument(
                "channel needs at least one tap".into(),
            ));
        }
        if support.len() != taps.len() {
            return Err(Error::DimensionMismatch {
                expected: support.len(),
                got: taps.len(),
            });
        }
        if support.windows(2).any(|w| w[0] >= w[1]) || support.iter().any(|&i| i >= m) {
            return Err(Error::InvalidArgument(
                "channel support must be strictly increasing and inside [0, m)".into(),
            ));
        }
        if taps.iter().any(|t| !t.is_finite() || *t == 0.0) {
            return Err(Error::InvalidArgument(
                "channel taps must be finite and nonzero".into(),
            ));
        }
        Ok(Self { m, support, taps })
    }

    /// The unit impulse delayed by `d`.
    pub fn delta(m: usize, d: usize) -> Result<Self> {
        Self::new(m, vec![d], vec![1.0])
    }

    /// Keeps the nonzero entries of a dense response. Fails when all are zero.
    pub fn from_dense(h: &[f64]) -> Result<Self> {
        let (support, taps): (Vec<usize>, Vec<f64>) = h
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i, v))
            .unzip();
        Self::new(h.len(), support, taps)
    }

    /// Draws `k` distinct delays uniformly and `N(0,1)` gains.
    pub fn generate(m: usize, k: usize, seed: u64) -> Result<Self> {
        if k == 0 || k > m {
            return Err(Error::InvalidArgument(format!(
                "channel sparsity must satisfy 1 <= k <= m, got k={k}, m={m}"
            )));
        }
        let mut rng = seeded(seed);
        let mut support = sample(&mut rng, m, k).into_vec();
        support.sort_unstable();
        let taps = (0..k)
            .map(|_| loop {
                let t: f64 = StandardNormal.sample(&mut rng);
                if t != 0.0 {
                    break t;
                }
            })
            .collect();
        Self::new(m, support, taps)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of taps.
    pub fn k(&self) -> usize {
        self.support.len()
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn dense(&self) -> Vec<f64> {
        let mut h = vec![0.0; self.m];
        for (&i, &t) in self.support.iter().zip(&self.taps) {
            h[i] = t;
        }
        h
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(
            self.m,
            self.support.clone(),
            self.taps.iter().map(|t| t * s).collect(),
        )
    }

    /// Circular convolution of `v` with this response, evaluated tap by tap.
    pub fn convolve(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                got: v.len(),
            });
        }
        let m = self.m;
        let mut out = vec![0.0; m];
        for (&d, &t) in self.support.iter().zip(&self.taps) {
            for (j, o) in out.iter_mut().enumerate() {
                *o += t * v[(j + m - d) % m];
            }
        }
        Ok(out)
    }
}

/// Output of the channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Received {
    pub y: Vec<f64>,
    pub noise_sigma: f64,
}

/// `y = h ⊗ codeword + ν` with `ν ~ N(0, σ²I)` drawn from `noise_seed`.
pub fn apply_channel(
    codeword: &[f64],
    h: &Channel,
    noise_sigma: f64,
    noise_seed: u64,
) -> Result<Received> {
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise sigma must be finite and nonnegative, got {noise_sigma}"
        )));
    }
    let mut y = h.convolve(codeword)?;
    if noise_sigma > 0.0 {
        let normal =
            Normal::new(0.0, noise_sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut rng = seeded(noise_seed);
        for v in &mut y {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(Received { y, noise_sigma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{circconv, circshift, norm2, rel_error};
    use crate::rng::normal_vec;

    fn direct_conv(a: &[f64], b: &[f64]) -> Vec<f64> {
        let m = a.len();
        (0..m)
            .map(|j| (0..m).map(|t| a[t] * b[(j + m - t) % m]).sum())
            .collect()
    }

    #[test]
    fn generate_counts_and_bounds() {
        let h = Channel::generate(16, 3, 4).unwrap();
        assert_eq!(h.k(), 3);
        assert_eq!(h.dense().iter().filter(|v| **v != 0.0).count(), 3);
        assert_eq!(Channel::generate(16, 1, 4).unwrap().k(), 1);
        let full = Channel::generate(8, 8, 4).unwrap();
        assert_eq!(full.support(), &[0, 1, 2, 3, 4, 5, 6, 7]);
        assert!(Channel::generate(8, 9, 0).is_err());
        assert!(Channel::generate(8, 0, 0).is_err());
        assert_eq!(
            Channel::generate(64, 5, 11).unwrap(),
            Channel::generate(64, 5, 11).unwrap()
        );
    }

    #[test]
    fn dense_examples() {
        assert_eq!(
            Channel::delta(4, 0).unwrap().dense(),
            vec![1.0, 0.0, 0.0, 0.0]
        );
        let h = Channel::new(4, vec![1, 3], vec![2.0, -1.0]).unwrap();
        assert_eq!(h.dense(), vec![0.0, 2.0, 0.0, -1.0]);
        assert_eq!(Channel::from_dense(&h.dense()).unwrap(), h);
        assert!(Channel::from_dense(&[0.0; 4]).is_err());
    }

    #[test]
    fn invalid_channels_rejected() {
        assert!(Channel::new(4, vec![2, 1], vec![1.0, 1.0]).is_err());
        assert!(Channel::new(4, vec![4], vec![1.0]).is_err());
        assert!(Channel::new(4, vec![1], vec![0.0]).is_err());
    }

    #[test]
    fn identity_and_delay_channels() {
        let c = normal_vec(&mut seeded(1), 10);
        let r = apply_channel(&c, &Channel::delta(10, 0).unwrap(), 0.0, 0).unwrap();
        assert_eq!(r.y, c);
        let r = apply_channel(&c, &Channel::delta(10, 3).unwrap(), 0.0, 0).unwrap();
        assert_eq!(r.y, circshift(&c, 3));
        assert!(apply_channel(&c[..9], &Channel::delta(10, 3).unwrap(), 0.0, 0).is_err());
        assert!(apply_channel(&c, &Channel::delta(10, 3).unwrap(), -1.0, 0).is_err());
    }

    #[test]
    fn sparse_matches_dense_and_direct() {
        for seed in 0..20 {
            let c = normal_vec(&mut seeded(seed), 32);
            let h = Channel::generate(32, 3, seed + 100).unwrap();
            let y = apply_channel(&c, &h, 0.0, 0).unwrap().y;
            let direct = direct_conv(&c, &h.dense());
            assert!(rel_error(&y, &direct) <= 1e-10);
            assert!(rel_error(&circconv(&c, &h.dense()).unwrap(), &direct) <= 1e-10);
            let l1: f64 = h.taps().iter().map(|t| t.abs()).sum();
            assert!(norm2(&y) <= l1 * norm2(&c) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn noise_is_seeded_and_separate() {
        let c = normal_vec(&mut seeded(1), 16);
        let h = Channel::generate(16, 2, 2).unwrap();
        let a = apply_channel(&c, &h, 0.1, 5).unwrap();
        let b = apply_channel(&c, &h, 0.1, 5).unwrap();
        let d = apply_channel(&c, &h, 0.1, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.y, d.y);
        let clean = apply_channel(&c, &h, 0.0, 5).unwrap();
        assert!(rel_error(&a.y, &clean.y) > 0.0);
    }
}
