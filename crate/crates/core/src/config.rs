//! Run configuration: a flat key-value text format with dotted section keys.
//!
//! Every knob has a fixed default; `dump` lists the complete effective
//! configuration so any run can be reproduced from its dumped config plus
//! the seed.

use crate::arbitration::{MutexModel, MutexPolicy, Topology, TreeDelays};
use crate::click::PipelineConfig;
use crate::error::Error;
use crate::model::Variant;
use crate::time_domain::{CotmMode, DcDecode, TimeDomainConfig};

/// Simulation mode selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Untimed golden model driven through the digital pipeline.
    DigitalOracle,
    /// Hamming-distance race classification (multiclass models).
    HammingTd,
    /// Coalesced race path fed by exact class sums.
    CotmIdeal,
    /// Full coalesced race path: split, LOD, TDC, DCDE.
    CotmArchitectural,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::DigitalOracle => "digital-oracle",
            Mode::HammingTd => "hamming-td",
            Mode::CotmIdeal => "cotm-ideal",
            Mode::CotmArchitectural => "cotm-architectural",
        }
    }

    pub fn parse(s: &str) -> Result<Mode, Error> {
        Ok(match s {
            "digital-oracle" => Mode::DigitalOracle,
            "hamming-td" => Mode::HammingTd,
            "cotm-ideal" => Mode::CotmIdeal,
            "cotm-architectural" => Mode::CotmArchitectural,
            other => {
                return Err(Error::Config(format!(
                    "unknown mode '{other}' (digital-oracle | hamming-td | cotm-ideal | cotm-architectural)"
                )))
            }
        })
    }

    /// Check model-variant compatibility.
    pub fn check_variant(self, variant: Variant) -> Result<(), Error> {
        let ok = match self {
            Mode::DigitalOracle => true,
            Mode::HammingTd => variant == Variant::Multiclass,
            Mode::CotmIdeal | Mode::CotmArchitectural => variant == Variant::Coalesced,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "mode {} is incompatible with a {} model",
                self.as_str(),
                variant.as_str()
            )))
        }
    }

    pub fn cotm_mode(self) -> Option<CotmMode> {
        match self {
            Mode::CotmIdeal => Some(CotmMode::Ideal),
            Mode::CotmArchitectural => Some(CotmMode::Architectural),
            _ => None,
        }
    }
}

/// Complete run configuration; see `dump` for the key listing.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: Option<String>,
    pub data: Option<String>,
    pub mode: Mode,
    pub arbiter: Topology,
    pub seed: u64,
    pub out: Option<String>,
    pub vcd: bool,
    /// Average power in watts for the energy-efficiency cross-check.
    pub power: Option<f64>,

    pub stages: usize,
    pub stage_forward_delay: u64,
    pub fire_to_phase_delay: u64,
    pub datapath_delay: u64,
    pub source_delay: u64,
    pub sink_delay: u64,
    pub serialize: bool,
    pub timeout: u64,
    pub bridge_delay: u64,

    pub tau: u64,
    pub e: u32,
    pub tdc_resolution: u64,
    pub dcde_step: u64,
    pub dcde_base: u64,
    pub tau_hamming: u64,
    pub launch_skew: i64,
    pub decode: DcDecode,

    pub d_mutex: u64,
    pub delta_meta: u64,
    pub meta_penalty: u64,
    pub policy: MutexPolicy,
    pub d_or: u64,
    pub d_celement: u64,

    pub delivery_cap: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let pipe = PipelineConfig::default();
        let td = TimeDomainConfig::default();
        let mx = MutexModel::default();
        let tree = TreeDelays::default();
        RunConfig {
            model: None,
            data: None,
            mode: Mode::DigitalOracle,
            arbiter: Topology::Tba,
            seed: 1,
            out: None,
            vcd: false,
            power: None,
            stages: pipe.stages,
            stage_forward_delay: pipe.stage_forward_delay,
            fire_to_phase_delay: pipe.fire_to_phase_delay,
            datapath_delay: pipe.datapath_delays[0],
            source_delay: pipe.source_delay,
            sink_delay: pipe.sink_delay,
            serialize: pipe.serialize,
            timeout: pipe.timeout,
            bridge_delay: pipe.bridge_delay,
            tau: td.tau,
            e: td.e,
            tdc_resolution: td.tdc_resolution,
            dcde_step: td.dcde_step,
            dcde_base: td.dcde_base,
            tau_hamming: td.tau_hamming,
            launch_skew: td.launch_skew,
            decode: td.decode,
            d_mutex: mx.d_mutex,
            delta_meta: mx.delta_meta,
            meta_penalty: mx.meta_penalty,
            policy: mx.policy,
            d_or: tree.d_or,
            d_celement: tree.d_celement,
            delivery_cap: 1_000_000,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, Error> {
    value
        .parse::<T>()
        .map_err(|_| Error::Config(format!("key '{key}': cannot parse '{value}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, Error> {
    match value {
        "true" | "1" | "on" => Ok(true),
        "false" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!(
            "key '{key}': expected true/false, got '{value}'"
        ))),
    }
}

impl RunConfig {
    /// Apply one `key = value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Error> {
        match key {
            "model" => self.model = non_empty(value),
            "data" => self.data = non_empty(value),
            "mode" => self.mode = Mode::parse(value)?,
            "arbiter" => {
                self.arbiter = match value {
                    "tba" => Topology::Tba,
                    "mesh" => Topology::Mesh,
                    _ => {
                        return Err(Error::Config(format!(
                            "key 'arbiter': expected tba or mesh, got '{value}'"
                        )))
                    }
                }
            }
            "seed" => self.seed = parse_num(key, value)?,
            "out" => self.out = non_empty(value),
            "vcd" => self.vcd = parse_bool(key, value)?,
            "power" => {
                self.power = if value.is_empty() {
                    None
                } else {
                    Some(parse_num(key, value)?)
                }
            }
            "pipeline.stages" => self.stages = parse_num(key, value)?,
            "pipeline.stage_forward_delay" => self.stage_forward_delay = parse_num(key, value)?,
            "pipeline.fire_to_phase_delay" => self.fire_to_phase_delay = parse_num(key, value)?,
            "pipeline.datapath_delay" => self.datapath_delay = parse_num(key, value)?,
            "pipeline.source_delay" => self.source_delay = parse_num(key, value)?,
            "pipeline.sink_delay" => self.sink_delay = parse_num(key, value)?,
            "pipeline.serialize" => self.serialize = parse_bool(key, value)?,
            "pipeline.timeout" => self.timeout = parse_num(key, value)?,
            "pipeline.bridge_delay" => self.bridge_delay = parse_num(key, value)?,
            "time_domain.tau" => self.tau = parse_num(key, value)?,
            "time_domain.e" => self.e = parse_num(key, value)?,
            "time_domain.tdc_resolution" => self.tdc_resolution = parse_num(key, value)?,
            "time_domain.dcde_step" => self.dcde_step = parse_num(key, value)?,
            "time_domain.dcde_base" => self.dcde_base = parse_num(key, value)?,
            "time_domain.tau_hamming" => self.tau_hamming = parse_num(key, value)?,
            "time_domain.launch_skew" => self.launch_skew = parse_num(key, value)?,
            "time_domain.decode" => {
                self.decode = match value {
                    "linear" => DcDecode::Linear,
                    "lod" => DcDecode::Lod,
                    _ => {
                        return Err(Error::Config(format!(
                            "key 'time_domain.decode': expected linear or lod, got '{value}'"
                        )))
                    }
                }
            }
            "arbiter.d_mutex" => self.d_mutex = parse_num(key, value)?,
            "arbiter.delta_meta" => self.delta_meta = parse_num(key, value)?,
            "arbiter.meta_penalty" => self.meta_penalty = parse_num(key, value)?,
            "arbiter.policy" => {
                self.policy = match value {
                    "low-index" => MutexPolicy::LowIndex,
                    "random" => MutexPolicy::SeededRandom,
                    _ => {
                        return Err(Error::Config(format!(
                            "key 'arbiter.policy': expected low-index or random, got '{value}'"
                        )))
                    }
                }
            }
            "arbiter.d_or" => self.d_or = parse_num(key, value)?,
            "arbiter.d_celement" => self.d_celement = parse_num(key, value)?,
            "kernel.delivery_cap" => self.delivery_cap = parse_num(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Apply a config file body: one `key = value` per line, `#` comments.
    pub fn apply_text(&mut self, text: &str) -> Result<(), Error> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("config line {}: expected key = value", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Apply a `key=value` override string (the `--set` flag).
    pub fn apply_override(&mut self, kv: &str) -> Result<(), Error> {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{kv}': expected key=value")))?;
        self.set(key.trim(), value.trim())
    }

    /// The complete effective configuration, parseable by `apply_text`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("model", self.model.clone().unwrap_or_default());
        kv("data", self.data.clone().unwrap_or_default());
        kv("mode", self.mode.as_str().to_string());
        kv("arbiter", self.arbiter.as_str().to_string());
        kv("seed", self.seed.to_string());
        kv("out", self.out.clone().unwrap_or_default());
        kv("vcd", self.vcd.to_string());
        kv(
            "power",
            self.power.map(|p| format!("{p:e}")).unwrap_or_default(),
        );
        kv("pipeline.stages", self.stages.to_string());
        kv(
            "pipeline.stage_forward_delay",
            self.stage_forward_delay.to_string(),
        );
        kv(
            "pipeline.fire_to_phase_delay",
            self.fire_to_phase_delay.to_string(),
        );
        kv("pipeline.datapath_delay", self.datapath_delay.to_string());
        kv("pipeline.source_delay", self.source_delay.to_string());
        kv("pipeline.sink_delay", self.sink_delay.to_string());
        kv("pipeline.serialize", self.serialize.to_string());
        kv("pipeline.timeout", self.timeout.to_string());
        kv("pipeline.bridge_delay", self.bridge_delay.to_string());
        kv("time_domain.tau", self.tau.to_string());
        kv("time_domain.e", self.e.to_string());
        kv(
            "time_domain.tdc_resolution",
            self.tdc_resolution.to_string(),
        );
        kv("time_domain.dcde_step", self.dcde_step.to_string());
        kv("time_domain.dcde_base", self.dcde_base.to_string());
        kv("time_domain.tau_hamming", self.tau_hamming.to_string());
        kv("time_domain.launch_skew", self.launch_skew.to_string());
        kv(
            "time_domain.decode",
            match self.decode {
                DcDecode::Linear => "linear".to_string(),
                DcDecode::Lod => "lod".to_string(),
            },
        );
        kv("arbiter.d_mutex", self.d_mutex.to_string());
        kv("arbiter.delta_meta", self.delta_meta.to_string());
        kv("arbiter.meta_penalty", self.meta_penalty.to_string());
        kv(
            "arbiter.policy",
            match self.policy {
                MutexPolicy::LowIndex => "low-index".to_string(),
                MutexPolicy::SeededRandom => "random".to_string(),
            },
        );
        kv("arbiter.d_or", self.d_or.to_string());
        kv("arbiter.d_celement", self.d_celement.to_string());
        kv("kernel.delivery_cap", self.delivery_cap.to_string());
        s
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            stages: self.stages,
            stage_forward_delay: self.stage_forward_delay,
            fire_to_phase_delay: self.fire_to_phase_delay,
            datapath_delays: vec![self.datapath_delay; self.stages],
            source_delay: self.source_delay,
            sink_delay: self.sink_delay,
            serialize: self.serialize,
            timeout: self.timeout,
            bridge_delay: self.bridge_delay,
        }
    }

    pub fn td_config(&self) -> TimeDomainConfig {
        TimeDomainConfig {
            tau: self.tau,
            e: self.e,
            tdc_resolution: self.tdc_resolution,
            dcde_step: self.dcde_step,
            dcde_base: self.dcde_base,
            tau_hamming: self.tau_hamming,
            launch_skew: self.launch_skew,
            decode: self.decode,
        }
    }

    pub fn mutex_model(&self) -> MutexModel {
        MutexModel {
            d_mutex: self.d_mutex,
            delta_meta: self.delta_meta,
            meta_penalty: self.meta_penalty,
            policy: self.policy,
        }
    }

    pub fn tree_delays(&self) -> TreeDelays {
        TreeDelays {
            d_or: self.d_or,
            d_celement: self.d_celement,
        }
    }
}

fn non_empty(value: &str) -> Option<String> {
    if value.is_empty() {
        None
    } else {
        Some(value.to_string())
    }
}
