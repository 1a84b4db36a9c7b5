//! Slowly varying MIMO channel from the sensors to the fusion centre.

use num_complex::Complex64;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::problem::{Sample, Vector};
use crate::rng::standard_normal;
use crate::wsn::model::CMatrix;

/// `Ξ_t = Ξ₀ + σ_c Z_t` where `Ξ₀` and `Z_t` have i.i.d. circular Gaussian
/// entries of variance `1/(N_F N)`, so `E‖Ξ₀‖²_F = 1` and `E‖Ξ_t − Ξ₀‖²_F = σ_c²`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelProcess {
    base: CMatrix,
    sigma: f64,
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut dyn RngCore) -> CMatrix {
    let s = (0.5 / (rows * cols) as f64).sqrt();
    CMatrix::from_fn(rows, cols, |_, _| {
        let re = standard_normal(rng);
        let im = standard_normal(rng);
        Complex64::new(s * re, s * im)
    })
}

impl ChannelProcess {
    pub fn new(base: CMatrix, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("channel deviation must be non-negative, got {sigma}")));
        }
        Ok(Self { base, sigma })
    }

    /// Draws a fresh base channel.
    pub fn draw(fc_antennas: usize, antennas: usize, sigma: f64, rng: &mut dyn RngCore) -> Result<Self> {
        Self::new(gaussian_matrix(fc_antennas, antennas, rng), sigma)
    }

    pub fn base(&self) -> &CMatrix {
        &self.base
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> CMatrix {
        let (r, c) = self.base.shape();
        let z = gaussian_matrix(r, c, rng);
        &self.base + z * Complex64::new(self.sigma, 0.0)
    }

    pub fn sample_context(&self, rng: &mut dyn RngCore) -> Sample {
        channel_to_sample(&self.sample(rng))
    }
}

/// Column-major real parts followed by column-major imaginary parts.
pub fn channel_to_sample(xi: &CMatrix) -> Sample {
    let n = xi.len();
    let mut v = Vector::zeros(2 * n);
    for (k, z) in xi.iter().enumerate() {
        v[k] = z.re;
        v[n + k] = z.im;
    }
    Sample(v)
}

pub fn sample_to_channel(s: &Sample, rows: usize, cols: usize) -> Result<CMatrix> {
    let n = rows * cols;
    if s.0.len() != 2 * n {
        return Err(Error::InvalidArgument(format!(
            "channel sample has length {}, expected {}",
            s.0.len(),
            2 * n
        )));
    }
    Ok(CMatrix::from_iterator(rows, cols, (0..n).map(|k| Complex64::new(s.0[k], s.0[n + k]))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{SeedTree, Stream};

    #[test]
    fn zero_deviation_freezes_the_channel() {
        let mut rng = SeedTree::new(1).rng(Stream::Channel, 0);
        let c = ChannelProcess::draw(2, 4, 0.0, &mut rng).unwrap();
        for _ in 0..5 {
            assert_eq!(c.sample(&mut rng), *c.base());
        }
    }

    #[test]
    fn perturbation_scale_matches_deviation() {
        let mut rng = SeedTree::new(2).rng(Stream::Channel, 0);
        let c = ChannelProcess::draw(2, 4, 0.05, &mut rng).unwrap();
        let n = 10_000;
        let norms: Vec<f64> = (0..n).map(|_| (c.sample(&mut rng) - c.base()).norm()).collect();
        let rms = (norms.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        assert!((0.04..=0.06).contains(&rms), "{rms}");
    }

    #[test]
    fn base_channel_has_unit_norm_on_average() {
        let mut rng = SeedTree::new(3).rng(Stream::Channel, 0);
        let n = 10_000;
        let mean = (0..n)
            .map(|_| ChannelProcess::draw(2, 4, 0.0, &mut rng).unwrap().base().norm())
            .sum::<f64>()
            / n as f64;
        assert!((0.95..=1.05).contains(&mean), "{mean}");
    }

    #[test]
    fn sample_round_trip() {
        let mut rng = SeedTree::new(4).rng(Stream::Channel, 0);
        let xi = ChannelProcess::draw(2, 3, 0.1, &mut rng).unwrap().sample(&mut rng);
        assert_eq!(sample_to_channel(&channel_to_sample(&xi), 2, 3).unwrap(), xi);
        assert!(sample_to_channel(&channel_to_sample(&xi), 3, 3).is_err());
    }
}
