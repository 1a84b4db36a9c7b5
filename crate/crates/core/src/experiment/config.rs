//! Experiment configuration, read from a flat TOML file with one section per variant.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sca::{validate_hyperparams, HyperParams};
use crate::wsn::model::SensingDims;
use crate::wsn::power::{CorrectionMode, ShrinkNorm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Instantaneous,
    StaticHindsight,
    StaticOnlineSgd,
    HybridEnvelope,
    HybridConvex,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Instantaneous,
        Variant::StaticHindsight,
        Variant::StaticOnlineSgd,
        Variant::HybridEnvelope,
        Variant::HybridConvex,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Instantaneous => "instantaneous",
            Variant::StaticHindsight => "static_hindsight",
            Variant::StaticOnlineSgd => "static_online_sgd",
            Variant::HybridEnvelope => "hybrid_envelope",
            Variant::HybridConvex => "hybrid_convex",
        }
    }

    pub fn is_hybrid(self) -> bool {
        matches!(self, Variant::HybridEnvelope | Variant::HybridConvex)
    }
}

/// How the hybrid precoders are learned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// `cores` workers with random service times.
    Asynchronous,
    /// One worker whose solves finish within the slot.
    Genie,
    /// One worker that waits for each solve before starting the next.
    Practical,
}

impl Mode {
    /// Suffix appended to a hybrid variant's name. The asynchronous run carries none.
    pub fn suffix(self) -> &'static str {
        match self {
            Mode::Asynchronous => "",
            Mode::Genie => "_genie",
            Mode::Practical => "_practical",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub parameters: usize,
    pub sensors: usize,
    pub fc_antennas: usize,
    pub antennas: usize,
    pub observations: usize,
    pub power: f64,
    pub noise_db: f64,
    pub channel_std: f64,
    pub horizon: usize,
    pub runs: usize,
    pub seed: u64,
    pub variants: Vec<Variant>,
    pub modes: Vec<Mode>,
    pub cores: usize,
    pub delay_min: u32,
    pub delay_max: u32,
    pub tau: usize,
    /// Channel draws used for the initial precoder of the learned designs.
    pub warm_start_draws: usize,
    /// Number of final slots averaged for sweep points.
    pub window: usize,
    /// Diagnostics cadence in slots. Zero disables them.
    pub log_interval: usize,
    pub diag_batch: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            parameters: 2,
            sensors: 2,
            fc_antennas: 2,
            antennas: 2,
            observations: 2,
            power: 10.0,
            noise_db: 30.0,
            channel_std: 0.05,
            horizon: 500,
            runs: 50,
            seed: 2024,
            variants: Variant::ALL.to_vec(),
            modes: vec![Mode::Asynchronous],
            cores: 4,
            delay_min: 1,
            delay_max: 5,
            tau: 5,
            warm_start_draws: 5,
            window: 50,
            log_interval: 0,
            diag_batch: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HybridSection {
    pub eps: f64,
    pub mu: f64,
    pub rho: f64,
    pub gamma: f64,
    pub upsilon: f64,
    pub correction: CorrectionMode,
    pub shrink_norm: ShrinkNorm,
}

impl HybridSection {
    pub fn envelope() -> Self {
        Self {
            eps: 0.05,
            mu: 0.2,
            rho: 0.1,
            gamma: 0.001,
            upsilon: 1e-4,
            correction: CorrectionMode::Linearized,
            shrink_norm: ShrinkNorm::Spectral,
        }
    }

    pub fn convex() -> Self {
        Self {
            eps: 0.02,
            mu: 0.01,
            rho: 0.01,
            gamma: 0.001,
            ..Self::envelope()
        }
    }
}

impl Default for HybridSection {
    fn default() -> Self {
        Self::envelope()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SgdSection {
    pub eta: f64,
}

impl Default for SgdSection {
    fn default() -> Self {
        Self { eta: 0.01 }
    }
}

fn default_convex() -> HybridSection {
    HybridSection::convex()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub hybrid_envelope: HybridSection,
    #[serde(default = "default_convex")]
    pub hybrid_convex: HybridSection,
    #[serde(default)]
    pub static_online_sgd: SgdSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentSection::default(),
            hybrid_envelope: HybridSection::envelope(),
            hybrid_convex: HybridSection::convex(),
            static_online_sgd: SgdSection::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let bad = |e: &dyn std::fmt::Display| Error::Config(e.to_string());
        let mut table: toml::Table = toml::from_str(text).map_err(|e| bad(&e))?;
        // Missing convex keys fall back to the convex defaults, not the envelope ones.
        if let Some(toml::Value::Table(user)) = table.remove("hybrid_convex") {
            let mut merged = toml::Table::try_from(HybridSection::convex()).map_err(|e| bad(&e))?;
            merged.extend(user);
            table.insert("hybrid_convex".into(), toml::Value::Table(merged));
        }
        let cfg: Self = table.try_into().map_err(|e| bad(&e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serialises")
    }

    /// SHA-256 of the canonical serialisation.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn dims(&self) -> SensingDims {
        let e = &self.experiment;
        SensingDims::uniform(e.parameters, e.sensors, e.fc_antennas, e.antennas, e.observations)
    }

    pub fn hybrid(&self, v: Variant) -> Option<&HybridSection> {
        match v {
            Variant::HybridEnvelope => Some(&self.hybrid_envelope),
            Variant::HybridConvex => Some(&self.hybrid_convex),
            _ => None,
        }
    }

    pub fn hyper(&self, v: Variant) -> Option<HyperParams> {
        self.hybrid(v).map(|h| HyperParams {
            gamma: h.gamma,
            rho: h.rho,
            mu: h.mu,
            tau: self.experiment.tau,
        })
    }

    /// Slots warm-started before learning begins.
    pub fn warmup(&self) -> usize {
        self.experiment.warm_start_draws
    }

    /// First and last slot of the averaging window.
    pub fn window_range(&self) -> (usize, usize) {
        let t = self.experiment.horizon;
        (t + 1 - self.experiment.window, t)
    }

    /// Series names in output order: each variant, hybrids once per mode.
    pub fn series(&self) -> Vec<(Variant, Option<Mode>, String)> {
        let mut out = Vec::new();
        for &v in &self.experiment.variants {
            if v.is_hybrid() {
                for &m in &self.experiment.modes {
                    out.push((v, Some(m), format!("{}{}", v.name(), m.suffix())));
                }
            } else {
                out.push((v, None, v.name().to_string()));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        self.dims().validate().map_err(|err| Error::Config(err.to_string()))?;
        positive("power", e.power)?;
        if !(e.channel_std >= 0.0 && e.channel_std.is_finite()) {
            return Err(Error::Config(format!("channel_std must be non-negative, got {}", e.channel_std)));
        }
        if e.runs == 0 || e.cores == 0 || e.diag_batch == 0 {
            return Err(Error::Config("runs, cores and diag_batch must be positive".into()));
        }
        if e.variants.is_empty() {
            return Err(Error::Config("no variants selected".into()));
        }
        let mut v = e.variants.clone();
        v.sort();
        v.dedup();
        if v.len() != e.variants.len() {
            return Err(Error::Config("variants are listed twice".into()));
        }
        let mut m = e.modes.clone();
        m.sort();
        m.dedup();
        if m.len() != e.modes.len() {
            return Err(Error::Config("modes are listed twice".into()));
        }
        if e.variants.iter().any(|v| v.is_hybrid()) && e.modes.is_empty() {
            return Err(Error::Config("hybrid variants need at least one mode".into()));
        }
        if e.delay_min == 0 || e.delay_min > e.delay_max {
            return Err(Error::Config(format!("invalid delay range {}..={}", e.delay_min, e.delay_max)));
        }
        if e.warm_start_draws == 0 || e.horizon <= e.warm_start_draws {
            return Err(Error::Config("horizon must exceed the warm-start length".into()));
        }
        if e.window == 0 || e.window > e.horizon {
            return Err(Error::Config(format!("window {} does not fit in horizon {}", e.window, e.horizon)));
        }
        positive("static_online_sgd.eta", self.static_online_sgd.eta)?;
        for v in [Variant::HybridEnvelope, Variant::HybridConvex] {
            let h = self.hybrid(v).expect("hybrid variant");
            if !(h.eps >= 0.0 && h.eps.is_finite()) {
                return Err(Error::Config(format!("{}.eps must be non-negative", v.name())));
            }
            positive(&format!("{}.upsilon", v.name()), h.upsilon)?;
            self.hyper(v)
                .expect("hybrid variant")
                .validate()
                .map_err(|err| Error::Config(format!("{}: {err}", v.name())))?;
        }
        Ok(())
    }

    /// Logs a warning for every selected hybrid whose stability margin is not positive.
    pub fn warn_on_margins(&self, lipschitz: f64, variant: Variant, l_hat: f64) {
        if let Some(h) = self.hyper(variant) {
            if let Ok(c) = validate_hyperparams(lipschitz, l_hat, h.mu, h.gamma, h.rho, h.tau) {
                if !c.feasible {
                    log::warn!(
                        "{}: stability margin {:.4} is not positive, convergence is not guaranteed",
                        variant.name(),
                        c.margin
                    );
                }
            }
        }
    }
}
