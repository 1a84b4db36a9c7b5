//! Discrete-time simulation of a master with `M` workers.
//!
//! Time advances in slots. Slot `s` reveals the sample `ξ_s`. A job dispatched at
//! slot `s` carries the master's current iterate and tracker together with the
//! sample of slot `s + 1`, and becomes ready `d` slots later where `d` is drawn from
//! the [`DelayModel`]. Every worker starts with the job built from `x₁`, `y₁`, `ξ₁`,
//! ready at slot 1. In each slot the master applies at most one ready job, picking
//! the one with the oldest anchor, and hands the freed worker a new job at once.
//! Slots without a ready job hold the iterate.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::Write;

use rand::{Rng, RngCore};

use crate::error::{ensure_dim, Error, Result};
use crate::problem::{estimate_objective, estimate_true_gradient, Sample, StochasticProblem, Vector};
use crate::sca::{
    solve_subproblem, stationarity_residual, update_iterate, update_tracker, CombinedSurrogate,
    HyperParams, IterationMetrics, StepSchedule,
};

/// Column names that precede the observables in exported trajectories.
pub const CSV_COLUMNS: [&str; 6] = ["t", "anchor_t", "delta_sq", "phi_sq", "pi", "objective"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayKind {
    Deterministic(u32),
    Uniform { lo: u32, hi: u32 },
}

/// Distribution of worker service times in slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DelayModel {
    kind: DelayKind,
    max: u32,
}

impl DelayModel {
    pub fn deterministic(d: u32) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("service time must be at least one slot".into()));
        }
        Ok(Self {
            kind: DelayKind::Deterministic(d),
            max: d,
        })
    }

    /// Uniform on `{lo, …, hi}`.
    pub fn uniform(lo: u32, hi: u32) -> Result<Self> {
        if lo == 0 || hi < lo {
            return Err(Error::InvalidArgument(format!("invalid service range [{lo}, {hi}]")));
        }
        Ok(Self {
            kind: DelayKind::Uniform { lo, hi },
            max: hi,
        })
    }

    /// Overrides the declared maximum service time.
    pub fn with_max(mut self, max: u32) -> Self {
        self.max = max;
        self
    }

    pub fn kind(&self) -> DelayKind {
        self.kind
    }

    pub fn max_service(&self) -> u32 {
        self.max
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> Result<u32> {
        let d = match self.kind {
            DelayKind::Deterministic(d) => d,
            DelayKind::Uniform { lo, hi } => rng.random_range(lo..=hi),
        };
        if d > self.max {
            return Err(Error::ServiceTime {
                service: d,
                max: self.max,
            });
        }
        Ok(d)
    }
}

/// Per-slot quantities recorded alongside the optimizer state, such as the MSE
/// of the currently deployed design.
pub trait Observer: Sync {
    fn names(&self) -> Vec<String>;
    fn observe(&self, slot: usize, x: &Vector, xi: &Sample) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Diagnostics are estimated on slots that are multiples of this value. Zero disables them.
    pub log_interval: usize,
    /// Fresh samples per diagnostic estimate.
    pub diag_batch: usize,
    /// Tolerance handed to iterative subproblem solvers.
    pub tol: f64,
    /// Keep a copy of the iterate in every slot record.
    pub record_iterates: bool,
    /// Step schedule of the synchronous genie run.
    pub schedule: StepSchedule,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            log_interval: 0,
            diag_batch: 100,
            tol: 1e-10,
            record_iterates: false,
            schedule: StepSchedule::Constant,
        }
    }
}

/// Everything a run needs apart from the timing model.
pub struct RunSetup<'a> {
    pub problem: &'a dyn StochasticProblem,
    pub hyper: HyperParams,
    pub initial: Vector,
    /// `samples[s - 1]` is revealed in slot `s`. Needs `horizon + 1` entries.
    pub samples: &'a [Sample],
    pub horizon: usize,
    pub options: RunOptions,
    pub observer: Option<&'a dyn Observer>,
}

impl<'a> RunSetup<'a> {
    pub fn new(
        problem: &'a dyn StochasticProblem,
        hyper: HyperParams,
        initial: Vector,
        samples: &'a [Sample],
        horizon: usize,
    ) -> Self {
        Self {
            problem,
            hyper,
            initial,
            samples,
            horizon,
            options: RunOptions::default(),
            observer: None,
        }
    }

    pub fn with_options(mut self, options: RunOptions) -> Self {
        self.options = options;
        self
    }

    pub fn with_observer(mut self, observer: &'a dyn Observer) -> Self {
        self.observer = Some(observer);
        self
    }

    fn check(&self) -> Result<()> {
        self.hyper.validate()?;
        ensure_dim("initial point", self.initial.len(), self.problem.dim())?;
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        if self.samples.len() < self.horizon + 1 {
            return Err(Error::InvalidArgument(format!(
                "need {} samples for horizon {}, got {}",
                self.horizon + 1,
                self.horizon,
                self.samples.len()
            )));
        }
        if !self.problem.constraint().contains(&self.initial, 1e-9) {
            return Err(Error::InvalidArgument("initial point is infeasible".into()));
        }
        Ok(())
    }

    fn observe(&self, slot: usize, x: &Vector) -> Result<Vec<f64>> {
        match self.observer {
            Some(o) => o.observe(slot, x, &self.samples[slot - 1]),
            None => Ok(Vec::new()),
        }
    }

    fn logged(&self, slot: usize) -> bool {
        self.options.log_interval > 0 && slot % self.options.log_interval == 0
    }

    fn solve(&self, x: &Vector, y: &Vector, xi: &Sample, rho: f64) -> Result<Vector> {
        let s = self.problem.surrogate(x, xi)?;
        let c = CombinedSurrogate::new(s.as_ref(), y, rho, self.hyper.mu)?;
        solve_subproblem(&c, self.problem.regularizer(), self.problem.constraint(), self.options.tol)
    }
}

/// Draws the per-slot samples for a run of the given horizon.
pub fn draw_samples(problem: &dyn StochasticProblem, horizon: usize, rng: &mut dyn RngCore) -> Vec<Sample> {
    (0..=horizon).map(|_| problem.draw_sample(rng)).collect()
}

/// Order-sensitive fingerprint of a sample sequence.
pub fn hash_samples(samples: &[Sample]) -> u64 {
    let mut h = DefaultHasher::new();
    for s in samples {
        s.0.len().hash(&mut h);
        for v in s.0.iter() {
            v.to_bits().hash(&mut h);
        }
    }
    h.finish()
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateRecord {
    /// Index `t` of the iterate produced by this update minus one.
    pub iteration: usize,
    /// Index `[t]` of the iterate the applied job was built from.
    pub anchor: usize,
    pub metrics: IterationMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: usize,
    pub update: Option<UpdateRecord>,
    pub observables: Vec<f64>,
    /// Iterate in force during the slot, when recording is enabled.
    pub iterate: Option<Vector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub observable_names: Vec<String>,
    pub slots: Vec<SlotRecord>,
    pub final_iterate: Vector,
    pub final_tracker: Vector,
    pub sample_hash: u64,
}

impl Trajectory {
    fn new(setup: &RunSetup<'_>) -> Self {
        Self {
            observable_names: setup.observer.map(|o| o.names()).unwrap_or_default(),
            slots: Vec::with_capacity(setup.horizon),
            final_iterate: setup.initial.clone(),
            final_tracker: setup.initial.clone(),
            sample_hash: hash_samples(&setup.samples[..setup.horizon]),
        }
    }

    pub fn updates(&self) -> impl Iterator<Item = &UpdateRecord> {
        self.slots.iter().filter_map(|s| s.update.as_ref())
    }

    pub fn update_count(&self) -> usize {
        self.updates().count()
    }

    pub fn anchor_log(&self) -> AnchorLog {
        AnchorLog {
            anchors: self.updates().map(|u| u.anchor).collect(),
        }
    }

    /// Per-slot series of a named observable.
    pub fn observable(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.observable_names.iter().position(|n| n == name)?;
        Some(self.slots.iter().map(|s| s.observables[k]).collect())
    }

    pub fn header(&self) -> Vec<String> {
        CSV_COLUMNS
            .iter()
            .map(|s| s.to_string())
            .chain(self.observable_names.iter().cloned())
            .collect()
    }

    /// One row per slot. Quantities that were not computed are left empty.
    pub fn rows(&self) -> Vec<Vec<String>> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        self.slots
            .iter()
            .map(|s| {
                let mut row = vec![s.slot.to_string()];
                match &s.update {
                    Some(u) => {
                        row.push(u.anchor.to_string());
                        row.push(opt(u.metrics.delta_sq));
                        row.push(opt(u.metrics.phi_sq));
                        row.push(opt(u.metrics.pi));
                        row.push(opt(u.metrics.objective));
                    }
                    None => row.extend(std::iter::repeat_n(String::new(), 5)),
                }
                row.extend(s.observables.iter().map(|v| v.to_string()));
                row
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        for row in self.rows() {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Anchors `[t]` of the applied updates in order, so `anchors[t - 1] = [t]`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnchorLog {
    pub anchors: Vec<usize>,
}

impl AnchorLog {
    pub fn max_delay(&self) -> usize {
        self.anchors
            .iter()
            .enumerate()
            .map(|(i, a)| i + 1 - a)
            .max()
            .unwrap_or(0)
    }
}

/// Checks the bounded-delay schedule: `0 ≤ t − [t] ≤ τ`, `[t] = 1` for the first
/// `cores` updates, and distinct anchors other than 1 afterwards.
pub fn validate_anchor_log(log: &AnchorLog, cores: usize, tau: usize) -> Result<()> {
    let mut seen = std::collections::HashSet::from([1]);
    for (i, &a) in log.anchors.iter().enumerate() {
        let t = i + 1;
        if a == 0 || a > t {
            return Err(Error::ContractViolation(format!("anchor {a} at iteration {t} is not in [1, t]")));
        }
        if t - a > tau {
            return Err(Error::ContractViolation(format!(
                "delay {} at iteration {t} exceeds {tau}",
                t - a
            )));
        }
        if t <= cores {
            if a != 1 {
                return Err(Error::ContractViolation(format!(
                    "iteration {t} of the initial wave has anchor {a}"
                )));
            }
        } else if !seen.insert(a) {
            return Err(Error::ContractViolation(format!("anchor {a} reused at iteration {t}")));
        }
    }
    Ok(())
}

struct Diagnostics<'r> {
    rng: &'r mut dyn RngCore,
}

impl Diagnostics<'_> {
    #[allow(clippy::too_many_arguments)]
    fn metrics(
        &mut self,
        setup: &RunSetup<'_>,
        slot: usize,
        x: &Vector,
        x_prev: Option<&Vector>,
        y: &Vector,
        x_hat: &Vector,
        anchor: (&Vector, &Vector, &Sample),
        hyper: &HyperParams,
    ) -> Result<IterationMetrics> {
        let mut m = IterationMetrics {
            delta_sq: Some((x_hat - x).norm_squared()),
            ..Default::default()
        };
        if !setup.logged(slot) {
            return Ok(m);
        }
        let p = setup.problem;
        let b = setup.options.diag_batch;
        let reference = match x_prev {
            Some(xp) => estimate_true_gradient(p, xp, b, self.rng)?,
            None => Vector::zeros(y.len()),
        };
        m.phi_sq = Some((y - reference).norm_squared());
        m.pi = Some(stationarity_residual(
            p,
            x_hat,
            anchor.0,
            anchor.1,
            anchor.2,
            hyper,
            b,
            self.rng,
            setup.options.tol,
        )?);
        m.objective = Some(estimate_objective(p, x, b, self.rng)?);
        Ok(m)
    }
}

fn ensure_feasible(setup: &RunSetup<'_>, x: &Vector, t: usize) -> Result<()> {
    if setup.problem.constraint().contains(x, 1e-8) {
        Ok(())
    } else {
        Err(Error::ContractViolation(format!("iterate {t} left the feasible set")))
    }
}

struct Job {
    core: usize,
    anchor: usize,
    ready: usize,
    x: Vector,
    y: Vector,
    sample: usize,
    x_hat: Vector,
}

/// Asynchronous run with `cores` workers. Fails if a delay exceeds `hyper.tau`
/// or a service time exceeds the delay model's maximum.
pub fn run_asynchronous(
    setup: &RunSetup<'_>,
    cores: usize,
    delays: &DelayModel,
    delay_rng: &mut dyn RngCore,
    diag_rng: &mut dyn RngCore,
) -> Result<(Trajectory, AnchorLog)> {
    setup.check()?;
    if cores == 0 {
        return Err(Error::InvalidArgument("at least one worker is required".into()));
    }
    let p = setup.problem;
    let hyper = setup.hyper;
    let mut diag = Diagnostics { rng: diag_rng };
    let mut traj = Trajectory::new(setup);

    let mut x = setup.initial.clone();
    let mut y = p.gradient(&x, &setup.samples[0])?;
    let first = setup.solve(&x, &y, &setup.samples[0], hyper.rho)?;
    let mut jobs: Vec<Job> = (0..cores)
        .map(|core| Job {
            core,
            anchor: 1,
            ready: 1,
            x: x.clone(),
            y: y.clone(),
            sample: 0,
            x_hat: first.clone(),
        })
        .collect();
    let mut x_prev: Option<Vector> = None;
    let mut t = 0usize;

    for slot in 1..=setup.horizon {
        let observables = setup.observe(slot, &x)?;
        let iterate = setup.options.record_iterates.then(|| x.clone());
        let pick = jobs
            .iter()
            .enumerate()
            .filter(|(_, j)| j.ready <= slot)
            .min_by_key(|(_, j)| (j.anchor, j.ready, j.core))
            .map(|(i, _)| i);
        let Some(i) = pick else {
            traj.slots.push(SlotRecord {
                slot,
                update: None,
                observables,
                iterate,
            });
            continue;
        };
        let job = jobs.swap_remove(i);
        t += 1;
        let delay = t - job.anchor;
        if delay > hyper.tau {
            return Err(Error::DelayBound {
                iteration: t,
                delay,
                bound: hyper.tau,
            });
        }
        let xi = &setup.samples[slot - 1];
        let g = p.gradient(&x, xi)?;
        let metrics = diag.metrics(
            setup,
            slot,
            &x,
            x_prev.as_ref(),
            &y,
            &job.x_hat,
            (&job.x, &job.y, &setup.samples[job.sample]),
            &hyper,
        )?;
        let x_next = update_iterate(&x, &job.x_hat, hyper.gamma)?;
        let y_next = update_tracker(&y, &g, hyper.rho)?;
        ensure_feasible(setup, &x_next, t + 1)?;
        x_prev = Some(std::mem::replace(&mut x, x_next));
        y = y_next;
        traj.slots.push(SlotRecord {
            slot,
            update: Some(UpdateRecord {
                iteration: t,
                anchor: job.anchor,
                metrics,
            }),
            observables,
            iterate,
        });

        let service = delays.sample(delay_rng)? as usize;
        let x_hat = setup.solve(&x, &y, &setup.samples[slot], hyper.rho)?;
        jobs.push(Job {
            core: job.core,
            anchor: t + 1,
            ready: slot + service,
            x: x.clone(),
            y: y.clone(),
            sample: slot,
            x_hat,
        });
    }
    traj.final_iterate = x;
    traj.final_tracker = y;
    let log = traj.anchor_log();
    Ok((traj, log))
}

/// Single worker whose solves complete within the slot. Honours the step schedule.
pub fn run_synchronous_genie(setup: &RunSetup<'_>, diag_rng: &mut dyn RngCore) -> Result<Trajectory> {
    setup.check()?;
    let p = setup.problem;
    let mut diag = Diagnostics { rng: diag_rng };
    let mut traj = Trajectory::new(setup);
    let mut x = setup.initial.clone();
    let mut y = p.gradient(&x, &setup.samples[0])?;
    let mut x_prev: Option<Vector> = None;

    for slot in 1..=setup.horizon {
        let observables = setup.observe(slot, &x)?;
        let iterate = setup.options.record_iterates.then(|| x.clone());
        let (gamma, rho) = setup.options.schedule.at(&setup.hyper, slot);
        let hyper = HyperParams { gamma, rho, ..setup.hyper };
        let xi = &setup.samples[slot - 1];
        let x_hat = setup.solve(&x, &y, xi, rho)?;
        let g = p.gradient(&x, xi)?;
        let metrics = diag.metrics(setup, slot, &x, x_prev.as_ref(), &y, &x_hat, (&x, &y, xi), &hyper)?;
        let x_next = update_iterate(&x, &x_hat, gamma)?;
        let y_next = update_tracker(&y, &g, rho)?;
        ensure_feasible(setup, &x_next, slot + 1)?;
        x_prev = Some(std::mem::replace(&mut x, x_next));
        y = y_next;
        traj.slots.push(SlotRecord {
            slot,
            update: Some(UpdateRecord {
                iteration: slot,
                anchor: slot,
                metrics,
            }),
            observables,
            iterate,
        });
    }
    traj.final_iterate = x;
    traj.final_tracker = y;
    Ok(traj)
}

/// Single worker that processes the samples strictly in order. Update `k` uses
/// `ξ_k` and completes `d_k` slots after update `k − 1`, so the deployed iterate
/// lags further behind as the run goes on.
pub fn run_practical_synchronous(
    setup: &RunSetup<'_>,
    delays: &DelayModel,
    delay_rng: &mut dyn RngCore,
    diag_rng: &mut dyn RngCore,
) -> Result<Trajectory> {
    setup.check()?;
    let p = setup.problem;
    let hyper = setup.hyper;
    let mut diag = Diagnostics { rng: diag_rng };
    let mut traj = Trajectory::new(setup);
    let mut x = setup.initial.clone();
    let mut y = p.gradient(&x, &setup.samples[0])?;
    let mut x_prev: Option<Vector> = None;
    let mut k = 0usize;
    let mut next_completion = delays.sample(delay_rng)? as usize;

    for slot in 1..=setup.horizon {
        let observables = setup.observe(slot, &x)?;
        let iterate = setup.options.record_iterates.then(|| x.clone());
        let update = if slot == next_completion {
            k += 1;
            let xi = &setup.samples[k - 1];
            let x_hat = setup.solve(&x, &y, xi, hyper.rho)?;
            let g = p.gradient(&x, xi)?;
            let metrics = diag.metrics(setup, slot, &x, x_prev.as_ref(), &y, &x_hat, (&x, &y, xi), &hyper)?;
            let x_next = update_iterate(&x, &x_hat, hyper.gamma)?;
            let y_next = update_tracker(&y, &g, hyper.rho)?;
            ensure_feasible(setup, &x_next, k + 1)?;
            x_prev = Some(std::mem::replace(&mut x, x_next));
            y = y_next;
            next_completion += delays.sample(delay_rng)? as usize;
            Some(UpdateRecord {
                iteration: k,
                anchor: k,
                metrics,
            })
        } else {
            None
        };
        traj.slots.push(SlotRecord {
            slot,
            update,
            observables,
            iterate,
        });
    }
    traj.final_iterate = x;
    traj.final_tracker = y;
    Ok(traj)
}
