//! Monte-Carlo evaluation of the precoder designs on shared channel sequences.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::experiment::config::{ExperimentConfig, Mode, Variant};
use crate::harness::{
    hash_samples, run_asynchronous, run_practical_synchronous, run_synchronous_genie, DelayModel, RunOptions,
    RunSetup, Trajectory,
};
use crate::problem::{Sample, StochasticProblem};
use crate::rng::{SeedTree, Stream};
use crate::wsn::baselines::{evaluate_fixed, fixed_design, instantaneous_design, static_hindsight, OnlineSgd};
use crate::wsn::channel::{channel_to_sample, ChannelProcess};
use crate::wsn::hybrid::{make_hybrid_problem, DeployedMse, HybridConfig, HybridProblem, HybridVariant};
use crate::wsn::model::{CMatrix, SensingModel};

/// Per-slot deployed MSE of every series in one Monte-Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSeries {
    pub run: usize,
    /// `mse[k][s - 1]` is the MSE of series `k` in slot `s`.
    pub mse: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    pub series: Vec<String>,
    pub horizon: usize,
    pub runs: Vec<RunSeries>,
    /// Runs dropped after a solver failure, with the reason.
    pub excluded: Vec<(usize, String)>,
}

/// Mean and standard error of the mean over runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

/// Summation in the given order keeps results byte-identical across thread counts.
pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len();
    if n == 0 {
        return Summary {
            mean: f64::NAN,
            se: f64::NAN,
            n,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let se = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 / n as f64).sqrt()
    } else {
        0.0
    };
    Summary { mean, se, n }
}

impl MonteCarloResult {
    pub fn series_index(&self, name: &str) -> Option<usize> {
        self.series.iter().position(|s| s == name)
    }

    /// Per-slot summary of one series.
    pub fn aggregate(&self, k: usize) -> Vec<Summary> {
        (0..self.horizon)
            .map(|s| summarize(&self.runs.iter().map(|r| r.mse[k][s]).collect::<Vec<_>>()))
            .collect()
    }

    /// Mean over slots `first..=last` for each included run.
    pub fn window_means(&self, k: usize, first: usize, last: usize) -> Vec<f64> {
        let w = (last + 1 - first) as f64;
        self.runs
            .iter()
            .map(|r| r.mse[k][first - 1..last].iter().sum::<f64>() / w)
            .collect()
    }

    pub fn window_summary(&self, name: &str, first: usize, last: usize) -> Option<Summary> {
        self.series_index(name).map(|k| summarize(&self.window_means(k, first, last)))
    }

    pub fn excluded_fraction(&self) -> f64 {
        let total = self.runs.len() + self.excluded.len();
        self.excluded.len() as f64 / total.max(1) as f64
    }

    /// `t, <series>_mean, <series>_se, ..., runs`.
    pub fn aggregate_header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        for s in &self.series {
            h.push(format!("{s}_mean"));
            h.push(format!("{s}_se"));
        }
        h.push("runs".into());
        h
    }

    pub fn write_aggregate<W: std::io::Write>(&self, out: W) -> Result<()> {
        let aggs: Vec<Vec<Summary>> = (0..self.series.len()).map(|k| self.aggregate(k)).collect();
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.aggregate_header())?;
        for s in 0..self.horizon {
            let mut row = vec![(s + 1).to_string()];
            for a in &aggs {
                row.push(a[s].mean.to_string());
                row.push(a[s].se.to_string());
            }
            row.push(self.runs.len().to_string());
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `run, t, mse` for one series over all included runs.
    pub fn write_series<W: std::io::Write>(&self, k: usize, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["run", "t", "mse"])?;
        for r in &self.runs {
            for (s, v) in r.mse[k].iter().enumerate() {
                w.write_record([r.run.to_string(), (s + 1).to_string(), v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Everything one Monte-Carlo run shares between the designs.
pub struct RunContext {
    pub model: SensingModel,
    pub channel: ChannelProcess,
    /// Channels of slots `1..=T + 1`. The last one is only read as the sample of
    /// the job dispatched in the final slot.
    pub channels: Vec<CMatrix>,
    pub samples: Vec<Sample>,
    pub warm: Vec<CMatrix>,
    pub sample_hash: u64,
}

impl RunContext {
    pub fn new(cfg: &ExperimentConfig, run: usize) -> Result<Self> {
        let e = &cfg.experiment;
        let seeds = SeedTree::new(e.seed);
        let model = SensingModel::build(cfg.dims(), e.power, e.noise_db, &mut seeds.rng(Stream::Model, run as u64))?;
        let mut rng = seeds.rng(Stream::Channel, run as u64);
        let channel = ChannelProcess::draw(e.fc_antennas, model.layout.shape().0, e.channel_std, &mut rng)?;
        let channels: Vec<CMatrix> = (0..=e.horizon).map(|_| channel.sample(&mut rng)).collect();
        let mut init = seeds.rng(Stream::Init, run as u64);
        let warm = (0..e.warm_start_draws).map(|_| channel.sample(&mut init)).collect();
        let samples: Vec<Sample> = channels.iter().map(channel_to_sample).collect();
        let sample_hash = hash_samples(&samples);
        Ok(Self {
            model,
            channel,
            channels,
            samples,
            warm,
            sample_hash,
        })
    }
}

pub fn hybrid_config(cfg: &ExperimentConfig, v: Variant) -> HybridConfig {
    let h = cfg.hybrid(v).expect("hybrid variant");
    let mut c = match v {
        Variant::HybridConvex => HybridConfig::convex(h.eps, h.mu, h.upsilon),
        _ => HybridConfig::envelope(h.eps, h.mu),
    };
    c.upsilon = h.upsilon;
    c.correction = h.correction;
    c.shrink_norm = h.shrink_norm;
    c
}

/// Learns a hybrid design over slots `w + 1..=T` after deploying the warm start
/// in the first `w` slots. Returns the per-slot MSE and the harness trajectory.
pub fn run_hybrid(
    cfg: &ExperimentConfig,
    ctx: &RunContext,
    problem: &HybridProblem,
    mode: Mode,
    run: usize,
) -> Result<(Vec<f64>, Trajectory)> {
    let e = &cfg.experiment;
    let w = cfg.warmup();
    let x0 = fixed_design(&ctx.model, &ctx.warm, problem.shrink().budget)?;
    let mut mse = Vec::with_capacity(e.horizon);
    for s in &ctx.samples[..w] {
        mse.push(problem.deploy(&x0, s)?.mse);
    }
    let hyper = cfg.hyper(problem_variant(problem)).expect("hybrid variant");
    let samples = &ctx.samples[w..];
    let observer = DeployedMse(problem);
    let setup = RunSetup::new(problem, hyper, x0, samples, e.horizon - w)
        .with_options(RunOptions {
            log_interval: e.log_interval,
            diag_batch: e.diag_batch,
            ..RunOptions::default()
        })
        .with_observer(&observer);
    let seeds = SeedTree::new(e.seed);
    let mut diag = seeds.rng(Stream::Diagnostics, run as u64);
    let mut delay_rng = seeds.rng(Stream::Delays, run as u64);
    let delays = DelayModel::uniform(e.delay_min, e.delay_max)?;
    let traj = match mode {
        Mode::Asynchronous => run_asynchronous(&setup, e.cores, &delays, &mut delay_rng, &mut diag)?.0,
        Mode::Genie => run_synchronous_genie(&setup, &mut diag)?,
        Mode::Practical => run_practical_synchronous(&setup, &delays, &mut delay_rng, &mut diag)?,
    };
    if traj.sample_hash != hash_samples(&samples[..e.horizon - w]) {
        return Err(Error::ContractViolation("hybrid run consumed a different channel sequence".into()));
    }
    mse.extend(traj.observable("deployed_mse").expect("observer is attached"));
    Ok((mse, traj))
}

fn problem_variant(p: &HybridProblem) -> Variant {
    match p.config().variant {
        HybridVariant::Envelope => Variant::HybridEnvelope,
        HybridVariant::Convex => Variant::HybridConvex,
    }
}

/// All series of one run. Configuration errors are returned as such so the
/// caller can abort instead of excluding the run.
pub fn simulate_run(cfg: &ExperimentConfig, run: usize) -> Result<RunSeries> {
    let e = &cfg.experiment;
    let ctx = RunContext::new(cfg, run)?;
    let t = e.horizon;
    let slots = &ctx.channels[..t];
    let mut out = Vec::new();
    let mut hybrids: Vec<(Variant, HybridProblem)> = Vec::new();
    for (v, mode, _) in cfg.series() {
        let series = match (v, mode) {
            (Variant::Instantaneous, _) => slots
                .iter()
                .map(|c| instantaneous_design(&ctx.model, c).map(|d| d.mse))
                .collect::<Result<Vec<_>>>()?,
            (Variant::StaticHindsight, _) => {
                let x = static_hindsight(&ctx.model, slots)?;
                evaluate_fixed(&ctx.model, &x, slots)?.into_iter().map(|d| d.mse).collect()
            }
            (Variant::StaticOnlineSgd, _) => {
                let w = cfg.warmup();
                let x0 = fixed_design(&ctx.model, &ctx.warm, ctx.model.power)?;
                let sgd = OnlineSgd::new(&ctx.model, cfg.static_online_sgd.eta)?;
                let mut m: Vec<f64> = evaluate_fixed(&ctx.model, &x0, &slots[..w])?.into_iter().map(|d| d.mse).collect();
                m.extend(sgd.run(&ctx.model, &x0, &slots[w..])?.into_iter().map(|d| d.mse));
                m
            }
            (v, Some(mode)) => {
                if !hybrids.iter().any(|(hv, _)| *hv == v) {
                    let p = make_hybrid_problem(ctx.model.clone(), ctx.channel.clone(), hybrid_config(cfg, v))?;
                    if run == 0 {
                        let c = p.constants();
                        cfg.warn_on_margins(c.lipschitz, v, c.surrogate_lipschitz);
                    }
                    hybrids.push((v, p));
                }
                let p = &hybrids.iter().find(|(hv, _)| *hv == v).expect("just inserted").1;
                run_hybrid(cfg, &ctx, p, mode, run)?.0
            }
            (v, None) => unreachable!("hybrid {} without a mode", v.name()),
        };
        debug_assert_eq!(series.len(), t);
        out.push(series);
    }
    if hash_samples(&ctx.samples) != ctx.sample_hash {
        return Err(Error::ContractViolation("channel sequence changed during the run".into()));
    }
    Ok(RunSeries { run, mse: out })
}

/// Runs every Monte-Carlo repetition in parallel. A configuration error aborts
/// the whole experiment; any other failure only drops the affected run.
pub fn run_monte_carlo(cfg: &ExperimentConfig) -> Result<MonteCarloResult> {
    cfg.validate()?;
    let results: Vec<Result<RunSeries>> = (0..cfg.experiment.runs)
        .into_par_iter()
        .map(|r| simulate_run(cfg, r))
        .collect();
    let mut runs = Vec::new();
    let mut excluded = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(s) => runs.push(s),
            Err(e @ Error::Config(_)) => return Err(e),
            Err(e) => {
                log::warn!("run {r} excluded: {e}");
                excluded.push((r, e.to_string()));
            }
        }
    }
    Ok(MonteCarloResult {
        series: cfg.series().into_iter().map(|s| s.2).collect(),
        horizon: cfg.experiment.horizon,
        runs,
        excluded,
    })
}

/// One row of a channel-variation sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub channel_std: f64,
    pub series: String,
    pub summary: Summary,
}

/// Window-averaged MSE of every series at each channel deviation. With
/// `exact_slot` only the final slot is used.
pub fn run_sweep(cfg: &ExperimentConfig, stds: &[f64], exact_slot: bool) -> Result<(Vec<SweepRow>, Vec<MonteCarloResult>)> {
    if stds.is_empty() {
        return Err(Error::Config("empty channel deviation list".into()));
    }
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for &s in stds {
        let mut c = cfg.clone();
        c.experiment.channel_std = s;
        if exact_slot {
            c.experiment.window = 1;
        }
        let res = run_monte_carlo(&c)?;
        let (a, b) = c.window_range();
        for (k, name) in res.series.iter().enumerate() {
            rows.push(SweepRow {
                channel_std: s,
                series: name.clone(),
                summary: summarize(&res.window_means(k, a, b)),
            });
        }
        results.push(res);
    }
    Ok((rows, results))
}

pub const SWEEP_COLUMNS: [&str; 5] = ["channel_std", "series", "mean", "se", "runs"];

pub fn write_sweep<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.channel_std.to_string(),
            r.series.clone(),
            r.summary.mean.to_string(),
            r.summary.se.to_string(),
            r.summary.n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
