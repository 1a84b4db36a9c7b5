//! Convergence-rate benchmark on the synthetic quadratic with `γ = ρ = T^{-1/2}`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::experiment::montecarlo::{summarize, Summary};
use crate::harness::{draw_samples, run_asynchronous, DelayModel, RunOptions, RunSetup};
use crate::problem::Vector;
use crate::rng::{SeedTree, Stream};
use crate::sca::HyperParams;
use crate::synthetic::QuadraticProblem;

#[derive(Debug, Clone, PartialEq)]
pub struct RateBenchmark {
    pub dim: usize,
    pub noise_variance: f64,
    pub horizons: Vec<usize>,
    pub seeds: usize,
    pub master_seed: u64,
    pub cores: usize,
    pub delay_min: u32,
    pub delay_max: u32,
    pub tau: usize,
    /// Roughly this many logged slots per run.
    pub log_points: usize,
    pub diag_batch: usize,
}

impl Default for RateBenchmark {
    fn default() -> Self {
        Self {
            dim: 20,
            noise_variance: 1.0,
            horizons: vec![100, 1_000, 10_000],
            seeds: 20,
            master_seed: 7,
            cores: 4,
            delay_min: 1,
            delay_max: 5,
            tau: 10,
            log_points: 100,
            diag_batch: 1_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    pub horizon: usize,
    /// Smallest logged stationarity estimate of each seed.
    pub min_pi: Vec<f64>,
}

impl RatePoint {
    pub fn summary(&self) -> Summary {
        summarize(&self.min_pi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateResult {
    pub points: Vec<RatePoint>,
    /// Least-squares slope of `log(mean min Π)` against `log T`.
    pub slope: f64,
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

impl RateBenchmark {
    /// Minimum logged `Π` of one asynchronous run. Slots of the initial wave are skipped.
    pub fn min_pi(&self, horizon: usize, seed: usize) -> Result<f64> {
        let tree = SeedTree::new(self.master_seed);
        let problem = QuadraticProblem::random(self.dim, self.noise_variance, &mut tree.rng(Stream::Model, seed as u64))?;
        let samples = draw_samples(&problem, horizon, &mut tree.rng(Stream::Channel, seed as u64));
        let step = (horizon as f64).powf(-0.5);
        let hyper = HyperParams::new(step, step, 1.0, self.tau)?;
        let options = RunOptions {
            log_interval: (horizon / self.log_points).max(1),
            diag_batch: self.diag_batch,
            ..RunOptions::default()
        };
        let setup = RunSetup::new(&problem, hyper, Vector::zeros(self.dim), &samples, horizon).with_options(options);
        let delays = DelayModel::uniform(self.delay_min, self.delay_max)?;
        let (traj, _) = run_asynchronous(
            &setup,
            self.cores,
            &delays,
            &mut tree.rng(Stream::Delays, seed as u64),
            &mut tree.rng(Stream::Diagnostics, seed as u64),
        )?;
        traj.slots
            .iter()
            .filter(|s| s.slot > self.tau)
            .filter_map(|s| s.update.as_ref().and_then(|u| u.metrics.pi))
            .reduce(f64::min)
            .ok_or_else(|| Error::InvalidArgument(format!("no logged slots at horizon {horizon}")))
    }

    pub fn run(&self) -> Result<RateResult> {
        if self.horizons.len() < 2 || self.seeds == 0 {
            return Err(Error::InvalidArgument("need two horizons and at least one seed".into()));
        }
        let jobs: Vec<(usize, usize)> = self
            .horizons
            .iter()
            .flat_map(|&t| (0..self.seeds).map(move |s| (t, s)))
            .collect();
        let values = jobs
            .par_iter()
            .map(|&(t, s)| self.min_pi(t, s))
            .collect::<Result<Vec<_>>>()?;
        let points: Vec<RatePoint> = self
            .horizons
            .iter()
            .enumerate()
            .map(|(i, &t)| RatePoint {
                horizon: t,
                min_pi: values[i * self.seeds..(i + 1) * self.seeds].to_vec(),
            })
            .collect();
        let xs: Vec<f64> = points.iter().map(|p| (p.horizon as f64).ln()).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.summary().mean.ln()).collect();
        Ok(RateResult {
            slope: fit_slope(&xs, &ys),
            points,
        })
    }
}

pub const RATE_COLUMNS: [&str; 4] = ["horizon", "mean_min_pi", "se", "seeds"];

pub fn write_rate<W: std::io::Write>(result: &RateResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RATE_COLUMNS)?;
    for p in &result.points {
        let s = p.summary();
        w.write_record([p.horizon.to_string(), s.mean.to_string(), s.se.to_string(), s.n.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_power_law() {
        let xs: Vec<f64> = [1.0f64, 10.0, 100.0].iter().map(|v| v.ln()).collect();
        let ys: Vec<f64> = [1.0f64, 10.0, 100.0].iter().map(|v| (3.0 * v.powf(-0.5)).ln()).collect();
        assert!((fit_slope(&xs, &ys) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn noiseless_runs_reach_stationarity() {
        let b = RateBenchmark {
            noise_variance: 0.0,
            diag_batch: 1,
            ..RateBenchmark::default()
        };
        assert!(b.min_pi(10_000, 0).unwrap() <= 1e-8);
    }
}
