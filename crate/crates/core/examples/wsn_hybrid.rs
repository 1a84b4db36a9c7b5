//! Hybrid precoding for one network: the long-term precoder is learned asynchronously
//! from channel samples and corrected in every slot with the current channel.
//! Compares the deployed MSE with the per-slot optimum and the best fixed precoder.

use asysca::experiment::montecarlo::{hybrid_config, run_hybrid, RunContext};
use asysca::experiment::{ExperimentConfig, Mode, Variant};
use asysca::wsn::baselines::evaluate_fixed;
use asysca::wsn::{instantaneous_design, make_hybrid_problem, static_hindsight};

fn main() -> asysca::Result<()> {
    let cfg = ExperimentConfig::default();
    let run = 0;
    let ctx = RunContext::new(&cfg, run)?;
    let t = cfg.experiment.horizon;
    let channels = &ctx.channels[..t];

    let inst: Vec<f64> = channels
        .iter()
        .map(|h| instantaneous_design(&ctx.model, h).map(|d| d.mse))
        .collect::<asysca::Result<_>>()?;
    let fixed = static_hindsight(&ctx.model, channels)?;
    let stat: Vec<f64> = evaluate_fixed(&ctx.model, &fixed, channels)?.iter().map(|d| d.mse).collect();

    let (a, b) = cfg.window_range();
    let tail = |v: &[f64]| v[a - 1..b].iter().sum::<f64>() / (b - a + 1) as f64;
    println!("slots {a}-{b}, channel std {}", cfg.experiment.channel_std);
    println!("{:<40}{:.5}", "instantaneous", tail(&inst));
    println!("{:<40}{:.5}", "static hindsight", tail(&stat));
    for v in [Variant::HybridEnvelope, Variant::HybridConvex] {
        let problem = make_hybrid_problem(ctx.model.clone(), ctx.channel.clone(), hybrid_config(&cfg, v))?;
        for mode in [Mode::Asynchronous, Mode::Genie, Mode::Practical] {
            let (mse, traj) = run_hybrid(&cfg, &ctx, &problem, mode, run)?;
            let label = format!("{}{} ({} updates)", v.name(), mode.suffix(), traj.update_count());
            println!("{label:<40}{:.5}", tail(&mse));
        }
    }
    Ok(())
}
