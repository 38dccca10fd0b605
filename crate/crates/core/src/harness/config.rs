//! Flat `key = value` experiment configuration.

use std::fmt::Write as _;

use crate::policy::DEFAULT_LEARNING_RATE;
use crate::substrate::{Domain, SubstrateConfig};
use crate::vnr::VnrConfig;

use super::HarnessError;

/// How a virtual node's target segment is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainWeighting {
    /// Proportional to each segment's substrate node count.
    Proportional,
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub substrate: SubstrateConfig,
    /// Request generation; `count` is the combined training and test size
    /// and `delay_cap` applies to the test set.
    pub vnr: VnrConfig,
    pub train_count: usize,
    pub train_delay_cap: f64,
    pub domain_weighting: DomainWeighting,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Reconstruction period: requests arriving later within a set are dropped.
    pub period: f64,
    pub sample_interval: f64,
    pub seed: u64,
    /// Test-set delay caps swept by `compare`.
    pub delay_caps: Vec<f64>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            substrate: SubstrateConfig::default(),
            vnr: VnrConfig::default(),
            train_count: 1000,
            train_delay_cap: 50.0,
            domain_weighting: DomainWeighting::Proportional,
            epochs: 50,
            batch_size: 100,
            learning_rate: DEFAULT_LEARNING_RATE,
            period: 50_000.0,
            sample_interval: 100.0,
            seed: 1,
            delay_caps: vec![50.0, 40.0, 30.0, 20.0],
        }
    }
}

const DOMAIN_FIELDS: [&str; 8] = [
    "nodes", "links", "cpu_min", "cpu_max", "bw_min", "bw_max", "delay_min", "delay_max",
];

const OTHER_KEYS: [&str; 27] = [
    "inter_domain_links",
    "inter_bw_min",
    "inter_bw_max",
    "inter_delay_min",
    "inter_delay_max",
    "vnr_count",
    "train_count",
    "vnodes_min",
    "vnodes_max",
    "vcpu_min",
    "vcpu_max",
    "vbw_min",
    "vbw_max",
    "vdelay_min",
    "delay_cap",
    "train_delay_cap",
    "arrival_rate",
    "mean_lifetime",
    "vlink_probability",
    "domain_weighting",
    "epochs",
    "batch_size",
    "learning_rate",
    "period",
    "sample_interval",
    "seed",
    "delay_caps",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, HarnessError> {
    value
        .trim()
        .parse()
        .map_err(|_| HarnessError::Config(format!("invalid value `{value}` for `{key}`")))
}

impl SimulationConfig {
    /// Every recognized key, in a stable order.
    pub fn keys() -> Vec<String> {
        let mut keys: Vec<String> = Domain::ALL
            .iter()
            .flat_map(|d| DOMAIN_FIELDS.iter().map(move |f| format!("{d}_{f}")))
            .collect();
        keys.extend(OTHER_KEYS.iter().map(|k| k.to_string()));
        keys
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        for domain in Domain::ALL {
            if let Some(field) = key.strip_prefix(domain.as_str()).and_then(|r| r.strip_prefix('_')) {
                let d = self.substrate.domain_mut(domain);
                match field {
                    "nodes" => d.nodes = parse(key, value)?,
                    "links" => d.links = parse(key, value)?,
                    "cpu_min" => d.cpu.min = parse(key, value)?,
                    "cpu_max" => d.cpu.max = parse(key, value)?,
                    "bw_min" => d.bw.min = parse(key, value)?,
                    "bw_max" => d.bw.max = parse(key, value)?,
                    "delay_min" => d.delay.min = parse(key, value)?,
                    "delay_max" => d.delay.max = parse(key, value)?,
                    _ => return Err(HarnessError::Config(format!("unknown key `{key}`"))),
                }
                return Ok(());
            }
        }
        match key {
            "inter_domain_links" => self.substrate.inter_links_per_pair = parse(key, value)?,
            "inter_bw_min" => self.substrate.inter_bw.min = parse(key, value)?,
            "inter_bw_max" => self.substrate.inter_bw.max = parse(key, value)?,
            "inter_delay_min" => self.substrate.inter_delay.min = parse(key, value)?,
            "inter_delay_max" => self.substrate.inter_delay.max = parse(key, value)?,
            "vnr_count" => self.vnr.count = parse(key, value)?,
            "train_count" => self.train_count = parse(key, value)?,
            "vnodes_min" => self.vnr.nodes.min = parse(key, value)?,
            "vnodes_max" => self.vnr.nodes.max = parse(key, value)?,
            "vcpu_min" => self.vnr.cpu.min = parse(key, value)?,
            "vcpu_max" => self.vnr.cpu.max = parse(key, value)?,
            "vbw_min" => self.vnr.bw.min = parse(key, value)?,
            "vbw_max" => self.vnr.bw.max = parse(key, value)?,
            "vdelay_min" => self.vnr.delay_min = parse(key, value)?,
            "delay_cap" => self.vnr.delay_cap = parse(key, value)?,
            "train_delay_cap" => self.train_delay_cap = parse(key, value)?,
            "arrival_rate" => self.vnr.arrival_rate = parse(key, value)?,
            "mean_lifetime" => self.vnr.mean_lifetime = parse(key, value)?,
            "vlink_probability" => self.vnr.link_probability = parse(key, value)?,
            "domain_weighting" => {
                self.domain_weighting = match value.trim() {
                    "proportional" => DomainWeighting::Proportional,
                    "uniform" => DomainWeighting::Uniform,
                    other => {
                        return Err(HarnessError::Config(format!(
                            "domain_weighting must be `proportional` or `uniform`, got `{other}`"
                        )))
                    }
                }
            }
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "period" => self.period = parse(key, value)?,
            "sample_interval" => self.sample_interval = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "delay_caps" => {
                self.delay_caps = value
                    .split(',')
                    .map(|v| parse(key, v))
                    .collect::<Result<_, _>>()?
            }
            _ => return Err(HarnessError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        for domain in Domain::ALL {
            if let Some(field) = key.strip_prefix(domain.as_str()).and_then(|r| r.strip_prefix('_')) {
                let d = self.substrate.domain(domain);
                return Some(match field {
                    "nodes" => d.nodes.to_string(),
                    "links" => d.links.to_string(),
                    "cpu_min" => d.cpu.min.to_string(),
                    "cpu_max" => d.cpu.max.to_string(),
                    "bw_min" => d.bw.min.to_string(),
                    "bw_max" => d.bw.max.to_string(),
                    "delay_min" => d.delay.min.to_string(),
                    "delay_max" => d.delay.max.to_string(),
                    _ => return None,
                });
            }
        }
        Some(match key {
            "inter_domain_links" => self.substrate.inter_links_per_pair.to_string(),
            "inter_bw_min" => self.substrate.inter_bw.min.to_string(),
            "inter_bw_max" => self.substrate.inter_bw.max.to_string(),
            "inter_delay_min" => self.substrate.inter_delay.min.to_string(),
            "inter_delay_max" => self.substrate.inter_delay.max.to_string(),
            "vnr_count" => self.vnr.count.to_string(),
            "train_count" => self.train_count.to_string(),
            "vnodes_min" => self.vnr.nodes.min.to_string(),
            "vnodes_max" => self.vnr.nodes.max.to_string(),
            "vcpu_min" => self.vnr.cpu.min.to_string(),
            "vcpu_max" => self.vnr.cpu.max.to_string(),
            "vbw_min" => self.vnr.bw.min.to_string(),
            "vbw_max" => self.vnr.bw.max.to_string(),
            "vdelay_min" => self.vnr.delay_min.to_string(),
            "delay_cap" => self.vnr.delay_cap.to_string(),
            "train_delay_cap" => self.train_delay_cap.to_string(),
            "arrival_rate" => self.vnr.arrival_rate.to_string(),
            "mean_lifetime" => self.vnr.mean_lifetime.to_string(),
            "vlink_probability" => self.vnr.link_probability.to_string(),
            "domain_weighting" => match self.domain_weighting {
                DomainWeighting::Proportional => "proportional".to_string(),
                DomainWeighting::Uniform => "uniform".to_string(),
            },
            "epochs" => self.epochs.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "learning_rate" => self.learning_rate.to_string(),
            "period" => self.period.to_string(),
            "sample_interval" => self.sample_interval.to_string(),
            "seed" => self.seed.to_string(),
            "delay_caps" => self
                .delay_caps
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(","),
            _ => return None,
        })
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), HarnessError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HarnessError::Config(format!("line {}: expected `key = value`", i + 1))
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| HarnessError::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, HarnessError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in Self::keys() {
            let _ = writeln!(out, "{key} = {}", self.get(&key).expect("known key"));
        }
        out
    }

    pub fn domain_weights(&self) -> [f64; 3] {
        match self.domain_weighting {
            DomainWeighting::Proportional => {
                Domain::ALL.map(|d| self.substrate.domain(d).nodes as f64)
            }
            DomainWeighting::Uniform => [1.0; 3],
        }
    }

    /// Request generation parameters under the given delay cap.
    pub fn vnr_config(&self, delay_cap: f64) -> VnrConfig {
        VnrConfig {
            delay_cap,
            domain_weights: self.domain_weights(),
            ..self.vnr.clone()
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.substrate.validate()?;
        for cap in std::iter::once(self.vnr.delay_cap)
            .chain(std::iter::once(self.train_delay_cap))
            .chain(self.delay_caps.iter().copied())
        {
            self.vnr_config(cap).validate()?;
        }
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.train_count == 0 || self.train_count >= self.vnr.count {
            return bad("train_count must be positive and leave a non-empty test set");
        }
        if self.batch_size == 0 || self.batch_size > self.train_count {
            return bad("batch_size must lie in 1..=train_count");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be a finite non-negative number");
        }
        if !(self.period > 0.0 && self.sample_interval > 0.0) {
            return bad("period and sample_interval must be positive");
        }
        if self.delay_caps.is_empty() {
            return bad("delay_caps must not be empty");
        }
        Ok(())
    }

    /// Scales substrate node and link counts by `factor`.
    pub fn with_substrate_scale(&self, factor: usize) -> Self {
        Self {
            substrate: self.substrate.scaled(factor),
            ..self.clone()
        }
    }
}
