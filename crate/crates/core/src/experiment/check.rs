//! Property suite run by the `check` command.

use rand::{Rng, RngCore};

use crate::ellipsoid::Ellipsoid;
use crate::error::Result;
use crate::experiment::montecarlo::SWEEP_COLUMNS;
use crate::experiment::quadratic::RATE_COLUMNS;
use crate::harness::{
    draw_samples, run_asynchronous, validate_anchor_log, DelayModel, RunSetup, Trajectory, CSV_COLUMNS,
};
use crate::problem::{
    central_difference, check_tangent, ConstraintSet, ProblemConstants, Sample, StochasticProblem, Surrogate, Vector,
};
use crate::rng::{standard_normal, SeedTree, Stream};
use crate::sca::{update_tracker, CombinedSurrogate, HyperParams};
use crate::synthetic::QuadraticProblem;
use crate::wsn::channel::{channel_to_sample, ChannelProcess};
use crate::wsn::hybrid::{make_hybrid_problem, DeployedMse, HybridConfig, HybridProblem};
use crate::wsn::model::{SensingDims, SensingModel};
use crate::wsn::mse::{mse, mse_gradient, mse_quadratic, nonconvex_part, transmit_power};
use crate::wsn::power::CorrectionMode;

pub const TANGENT_TOL: f64 = 1e-10;
pub const GRADIENT_REL_TOL: f64 = 1e-4;
pub const KKT_TOL: f64 = 1e-10;
pub const IDEMPOTENCE_TOL: f64 = 1e-12;
pub const POWER_TRIALS: usize = 10_000;
pub const ANCHOR_RUNS: usize = 100;

/// Header every trajectory file starts with.
pub const GOLDEN_HEADER: &str = "t,anchor_t,delta_sq,phi_sq,pi,objective";

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CheckOptions {
    pub seed: u64,
    /// Relative error injected into the synthetic problem's gradient. Only used
    /// to confirm that the suite catches a broken gradient.
    pub gradient_perturbation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Synthetic problem whose gradient is scaled by `1 + δ`.
struct Perturbed {
    inner: QuadraticProblem,
    delta: f64,
}

impl StochasticProblem for Perturbed {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn draw_sample(&self, rng: &mut dyn RngCore) -> Sample {
        self.inner.draw_sample(rng)
    }
    fn loss(&self, x: &Vector, xi: &Sample) -> Result<f64> {
        self.inner.loss(x, xi)
    }
    fn gradient(&self, x: &Vector, xi: &Sample) -> Result<Vector> {
        Ok(self.inner.gradient(x, xi)? * (1.0 + self.delta))
    }
    fn surrogate(&self, anchor: &Vector, xi: &Sample) -> Result<Box<dyn Surrogate>> {
        self.inner.surrogate(anchor, xi)
    }
    fn constraint(&self) -> &ConstraintSet {
        self.inner.constraint()
    }
    fn constants(&self) -> ProblemConstants {
        self.inner.constants()
    }
}

fn gaussian(n: usize, scale: f64, rng: &mut dyn RngCore) -> Vector {
    Vector::from_iterator(n, (0..n).map(|_| scale * standard_normal(rng)))
}

fn rel_err(a: &Vector, b: &Vector) -> f64 {
    (a - b).norm() / b.norm().max(1e-8)
}

struct Fixtures {
    synthetic: Perturbed,
    models: Vec<(SensingModel, ChannelProcess)>,
}

impl Fixtures {
    fn new(opts: &CheckOptions) -> Result<Self> {
        let tree = SeedTree::new(opts.seed);
        let synthetic = Perturbed {
            inner: QuadraticProblem::random(6, 1.0, &mut tree.rng(Stream::Check, 0))?,
            delta: opts.gradient_perturbation,
        };
        let mut models = Vec::new();
        for (i, dims) in [SensingDims::uniform(2, 2, 2, 2, 2), SensingDims::uniform(2, 3, 2, 1, 2)]
            .into_iter()
            .enumerate()
        {
            let mut rng = tree.rng(Stream::Check, 1 + i as u64);
            let n = dims.total_antennas();
            let model = SensingModel::build(dims, 10.0, 30.0, &mut rng)?;
            let channel = ChannelProcess::draw(2, n, 0.1, &mut rng)?;
            models.push((model, channel));
        }
        Ok(Self { synthetic, models })
    }

    fn hybrids(&self) -> Result<Vec<(String, HybridProblem)>> {
        let mut out = Vec::new();
        for (i, (m, c)) in self.models.iter().enumerate() {
            let mut exact = HybridConfig::envelope(0.05, 0.2);
            exact.correction = CorrectionMode::Exact;
            for (name, cfg) in [
                ("envelope", HybridConfig::envelope(0.05, 0.2)),
                ("envelope_exact", exact),
                ("convex", HybridConfig::convex(0.02, 0.01, 1e-4)),
            ] {
                out.push((format!("{name}[{i}]"), make_hybrid_problem(m.clone(), c.clone(), cfg)?));
            }
        }
        Ok(out)
    }
}

fn random_feasible(p: &dyn StochasticProblem, rng: &mut dyn RngCore) -> Result<Vector> {
    let x = gaussian(p.dim(), 2.0, rng);
    p.constraint().project(&x)
}

fn tangent(fx: &Fixtures, rng: &mut dyn RngCore) -> Result<(f64, String)> {
    let mut worst = (0.0f64, String::new());
    let mut probe = |name: &str, p: &dyn StochasticProblem, rng: &mut dyn RngCore| -> Result<()> {
        for _ in 0..100 {
            let a = random_feasible(p, rng)?;
            let xi = p.draw_sample(rng);
            let gap = check_tangent(p, &a, &xi)? / (1.0 + p.gradient(&a, &xi)?.norm());
            if gap > worst.0 || worst.1.is_empty() {
                worst = (gap.max(worst.0), name.to_string());
            }
        }
        Ok(())
    };
    probe("synthetic", &fx.synthetic, rng)?;
    for (name, h) in fx.hybrids()? {
        probe(&name, &h, rng)?;
    }
    Ok(worst)
}

fn gradients(fx: &Fixtures, rng: &mut dyn RngCore) -> Result<(f64, String)> {
    let h = 1e-6;
    let mut worst = (0.0f64, String::new());
    let mut record = |name: &str, e: f64| {
        if e > worst.0 || worst.1.is_empty() {
            worst = (e.max(worst.0), name.to_string());
        }
    };
    for _ in 0..20 {
        let p = &fx.synthetic;
        let x = gaussian(p.dim(), 1.0, rng);
        let xi = p.draw_sample(rng);
        let fd = central_difference(&|v| p.loss(v, &xi).unwrap_or(f64::NAN), &x, h);
        record("synthetic loss", rel_err(&p.gradient(&x, &xi)?, &fd));

        let s = p.surrogate(&x, &xi)?;
        let y = gaussian(p.dim(), 1.0, rng);
        let c = CombinedSurrogate::new(s.as_ref(), &y, 0.3, 0.7)?;
        let z = gaussian(p.dim(), 1.0, rng);
        let fd = central_difference(&|v| c.value(v), &z, h);
        record("combined surrogate", rel_err(&c.gradient(&z), &fd));
    }
    for (m, ch) in &fx.models {
        for _ in 0..20 {
            let xi = ch.sample(rng);
            let x = gaussian(m.real_dim(), 0.5, rng);
            let direct = |v: &Vector| {
                m.layout
                    .to_matrix(v)
                    .and_then(|g| mse(m, &g, &xi))
                    .unwrap_or(f64::NAN)
            };
            record("mse", rel_err(&mse_gradient(m, &x, &xi)?, &central_difference(&direct, &x, h)));
            let quad = mse_quadratic(m, &xi)?;
            let fd = central_difference(&|v| nonconvex_part(&quad, v, 0.05, 1e-4).0, &x, h);
            record("nonconvex part", rel_err(&nonconvex_part(&quad, &x, 0.05, 1e-4).1, &fd));
        }
    }
    for (name, p) in fx.hybrids()? {
        // With the linearised correction the loss is not differentiable along the
        // correction direction, so only the exact envelope and the convex split are checked.
        if name.starts_with("envelope[") {
            continue;
        }
        for _ in 0..20 {
            let x = random_feasible(&p, rng)?;
            let xi = p.draw_sample(rng);
            let fd = central_difference(&|v| p.loss(v, &xi).unwrap_or(f64::NAN), &x, h);
            record(&name, rel_err(&p.gradient(&x, &xi)?, &fd));
        }
    }
    Ok(worst)
}

fn projection(rng: &mut dyn RngCore) -> Result<(f64, f64)> {
    let (mut kkt, mut idem) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let n = rng.random_range(1..=12);
        let b = nalgebra::DMatrix::from_fn(n, n, |_, _| standard_normal(rng));
        let q = &b * b.transpose() + nalgebra::DMatrix::identity(n, n) * 0.1;
        let e = Ellipsoid::new(q.clone(), rng.random_range(0.1..5.0))?;
        let x = gaussian(n, 3.0, rng);
        let p = e.project(&x)?;
        let z = &p.point;
        let scale = 1.0 + x.norm();
        let stat = (z - &x + &q * z * p.multiplier).norm() / scale;
        let slack = if p.multiplier > 0.0 {
            (e.quad(z) - e.budget()).abs() / e.budget()
        } else {
            (e.quad(z) - e.budget()).max(0.0) / e.budget()
        };
        kkt = kkt.max(stat).max(slack);
        idem = idem.max((&e.project(z)?.point - z).norm() / scale);
    }
    Ok((kkt, idem))
}

fn power_guarantee(fx: &Fixtures, rng: &mut dyn RngCore) -> Result<usize> {
    let problems = fx.hybrids()?;
    let per = POWER_TRIALS.div_ceil(problems.len());
    let mut violations = 0;
    for (_, p) in &problems {
        let ConstraintSet::Ellipsoid(set) = p.constraint() else {
            unreachable!("hybrid problems are power constrained")
        };
        for k in 0..per {
            let x = gaussian(p.dim(), 1.0, rng);
            // Half the trials sit exactly on the shrunk boundary.
            let target = if k % 2 == 0 { set.budget() } else { set.budget() * rng.random::<f64>() };
            let x = &x * (target / set.quad(&x)).sqrt();
            let sigma = rng.random_range(0.0..0.3);
            let ch = ChannelProcess::new(p.channel().base().clone(), sigma)?.sample(rng);
            let quad = mse_quadratic(p.model(), &ch)?;
            let e = crate::wsn::power::instantaneous_correction(&quad, &x, p.config().eps, p.config().correction)?;
            let g = p.model().layout.to_matrix(&(&x + &e.e))?;
            if transmit_power(p.model(), &g) > p.model().power * (1.0 + 1e-9) {
                violations += 1;
            }
        }
    }
    Ok(violations)
}

fn anchor_logs(opts: &CheckOptions) -> Result<usize> {
    let tree = SeedTree::new(opts.seed);
    let mut failures = 0;
    for run in 0..ANCHOR_RUNS as u64 {
        let mut rng = tree.rng(Stream::Check, 100 + run);
        let p = QuadraticProblem::random(4, 1.0, &mut rng)?;
        let cores = rng.random_range(1..=4);
        let samples = draw_samples(&p, 200, &mut rng);
        let hyper = HyperParams::new(0.05, 0.1, 1.0, 5)?;
        let setup = RunSetup::new(&p, hyper, Vector::zeros(4), &samples, 200);
        let delays = DelayModel::uniform(1, 5)?;
        let mut delay_rng = tree.rng(Stream::Delays, run);
        let mut diag = tree.rng(Stream::Diagnostics, run);
        let ok = run_asynchronous(&setup, cores, &delays, &mut delay_rng, &mut diag)
            .and_then(|(_, log)| validate_anchor_log(&log, cores, hyper.tau));
        if let Err(e) = ok {
            log::error!("anchor run {run} with {cores} cores: {e}");
            failures += 1;
        }
    }
    Ok(failures)
}

/// Worst ratio of the steady-state tracking error at a frozen point to `ρσ²`.
fn tracking(opts: &CheckOptions) -> Result<f64> {
    let tree = SeedTree::new(opts.seed);
    let sigma2 = 1.0;
    let mut worst = 0.0f64;
    for (i, rho) in [0.01, 0.1].into_iter().enumerate() {
        let mut rng = tree.rng(Stream::Check, 500 + i as u64);
        let p = QuadraticProblem::random(10, sigma2, &mut rng)?;
        let x = Vector::zeros(10);
        let truth = p.expected_gradient(&x);
        let mut y = p.gradient(&x, &p.draw_sample(&mut rng))?;
        let burn = (20.0 / rho) as usize;
        let steps = (400.0 / rho) as usize;
        let mut acc = 0.0;
        for k in 0..burn + steps {
            y = update_tracker(&y, &p.gradient(&x, &p.draw_sample(&mut rng))?, rho)?;
            if k >= burn {
                acc += (&y - &truth).norm_squared();
            }
        }
        worst = worst.max(acc / steps as f64 / (rho * sigma2));
    }
    Ok(worst)
}

fn csv_schema(fx: &Fixtures) -> Result<Option<String>> {
    if CSV_COLUMNS.join(",") != GOLDEN_HEADER {
        return Ok(Some(format!("trajectory header is {}", CSV_COLUMNS.join(","))));
    }
    let (model, channel) = &fx.models[0];
    let p = make_hybrid_problem(model.clone(), channel.clone(), HybridConfig::envelope(0.05, 0.2))?;
    let samples: Vec<Sample> = (0..4).map(|_| channel_to_sample(channel.base())).collect();
    let obs = DeployedMse(&p);
    let setup = RunSetup::new(&p, HyperParams::new(0.1, 0.1, 0.2, 0)?, Vector::zeros(p.dim()), &samples, 3)
        .with_observer(&obs);
    let traj: Trajectory = crate::harness::run_synchronous_genie(&setup, &mut SeedTree::new(0).rng(Stream::Check, 0))?;
    let header = traj.header().join(",");
    let want = format!("{GOLDEN_HEADER},deployed_mse,deployed_power");
    if header != want {
        return Ok(Some(format!("observed trajectory header is {header}")));
    }
    if SWEEP_COLUMNS.join(",") != "channel_std,series,mean,se,runs" {
        return Ok(Some("sweep header changed".into()));
    }
    if RATE_COLUMNS.join(",") != "horizon,mean_min_pi,se,seeds" {
        return Ok(Some("rate header changed".into()));
    }
    Ok(None)
}

fn outcome(name: &'static str, r: Result<(bool, String)>) -> CheckOutcome {
    match r {
        Ok((passed, detail)) => CheckOutcome { name, passed, detail },
        Err(e) => CheckOutcome {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Runs every property and reports one outcome per property.
pub fn run_checks(opts: &CheckOptions) -> Vec<CheckOutcome> {
    let fx = match Fixtures::new(opts) {
        Ok(f) => f,
        Err(e) => {
            return vec![CheckOutcome {
                name: "fixtures",
                passed: false,
                detail: e.to_string(),
            }]
        }
    };
    let tree = SeedTree::new(opts.seed);
    let mut rng = tree.rng(Stream::Check, 1000);
    vec![
        outcome(
            "tangent_conditions",
            tangent(&fx, &mut rng).map(|(w, n)| (w <= TANGENT_TOL, format!("worst relative gap {w:.2e} ({n})"))),
        ),
        outcome(
            "finite_difference_gradients",
            gradients(&fx, &mut rng)
                .map(|(w, n)| (w <= GRADIENT_REL_TOL, format!("worst relative error {w:.2e} ({n})"))),
        ),
        outcome(
            "projection_kkt",
            projection(&mut rng).map(|(k, i)| {
                (
                    k <= KKT_TOL && i <= IDEMPOTENCE_TOL,
                    format!("KKT residual {k:.2e}, idempotence {i:.2e}"),
                )
            }),
        ),
        outcome(
            "power_guarantee",
            power_guarantee(&fx, &mut rng).map(|v| (v == 0, format!("{v} violations in {POWER_TRIALS} trials"))),
        ),
        outcome(
            "anchor_log_invariants",
            anchor_logs(opts).map(|f| (f == 0, format!("{f} of {ANCHOR_RUNS} runs failed"))),
        ),
        outcome(
            "tracking_steady_state",
            tracking(opts).map(|r| (r <= 3.0, format!("worst steady-state error {r:.3} ρσ² (bound 3)"))),
        ),
        outcome(
            "csv_schema",
            csv_schema(&fx).map(|m| match m {
                None => (true, "headers match".into()),
                Some(m) => (false, m),
            }),
        ),
    ]
}
