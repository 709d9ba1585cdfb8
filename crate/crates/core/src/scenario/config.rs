//! Scenario configuration and its `key = value` file format.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::aodv::AodvConfig;
use crate::dsdv::DsdvConfig;
use crate::mac::MacParams;
use crate::phy::RadioParams;
use crate::sim::SimTime;
use crate::video::reconstruct::Concealment;
use crate::video::trace::{SizeModel, TraceParams};
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    Aodv,
    Dsdv,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Aodv => "AODV",
            Protocol::Dsdv => "DSDV",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "aodv" => Ok(Protocol::Aodv),
            "dsdv" => Ok(Protocol::Dsdv),
            other => Err(format!("unknown protocol {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mobility {
    Static,
    /// Grid spacing grows linearly from `d_start` to `d_end` over the clip.
    Outward {
        d_start: f64,
        d_end: f64,
    },
    /// Grid spacing shrinks linearly from `d_start` to `d_end` over the clip.
    Inward {
        d_start: f64,
        d_end: f64,
    },
}

impl Mobility {
    pub const OUTWARD: Mobility = Mobility::Outward { d_start: 20.0, d_end: 150.0 };
    pub const INWARD: Mobility = Mobility::Inward { d_start: 150.0, d_end: 20.0 };

    pub fn as_str(&self) -> &'static str {
        match self {
            Mobility::Static => "static",
            Mobility::Outward { .. } => "outward",
            Mobility::Inward { .. } => "inward",
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, Mobility::Static)
    }

    /// `(d_start, d_end)` for mobile modes.
    pub fn span(&self) -> Option<(f64, f64)> {
        match *self {
            Mobility::Static => None,
            Mobility::Outward { d_start, d_end } | Mobility::Inward { d_start, d_end } => Some((d_start, d_end)),
        }
    }
}

impl FromStr for Mobility {
    type Err = String;
    /// `static`, or `outward`/`inward` with the default 20 m / 150 m span.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "static" => Ok(Mobility::Static),
            "outward" => Ok(Mobility::OUTWARD),
            "inward" => Ok(Mobility::INWARD),
            other => Err(format!("unknown mobility {other:?}")),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("n_nodes = {0} is not a perfect square")]
    NotPerfectSquare(usize),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub protocol: Protocol,
    pub n_nodes: usize,
    /// Grid spacing in meters; for mobile modes this is the starting spacing.
    pub spacing: f64,
    pub mobility: Mobility,
    pub fps: f64,
    pub n_frames: usize,
    pub mtu: u32,
    pub gop_len: u32,
    /// Defaults to node 0.
    pub sender: Option<NodeId>,
    /// Defaults to the opposite corner, node `n_nodes - 1`.
    pub receiver: Option<NodeId>,
    pub seed: u64,
    pub drain_time: SimTime,
    pub data_ttl: u8,
    pub concealment: Concealment,
    pub radio: RadioParams,
    pub mac: MacParams,
    pub aodv: AodvConfig,
    /// Overrides the grid-derived RREQ TTL when set.
    pub aodv_ttl: Option<u8>,
    pub dsdv: DsdvConfig,
    pub size_model: SizeModel,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            protocol: Protocol::Aodv,
            n_nodes: 4,
            spacing: 20.0,
            mobility: Mobility::Static,
            fps: 30.0,
            n_frames: 2000,
            mtu: 1024,
            gop_len: 30,
            sender: None,
            receiver: None,
            seed: 1,
            drain_time: SimTime::from_secs(5),
            data_ttl: 64,
            concealment: Concealment::RepeatLast,
            radio: RadioParams::default(),
            mac: MacParams::default(),
            aodv: AodvConfig::default(),
            aodv_ttl: None,
            dsdv: DsdvConfig::default(),
            size_model: SizeModel::default(),
        }
    }
}

fn grid_side(n: usize) -> Option<usize> {
    let side = (n as f64).sqrt().round() as usize;
    (side * side == n).then_some(side)
}

impl ScenarioConfig {
    pub fn side(&self) -> usize {
        grid_side(self.n_nodes).unwrap_or(0)
    }

    pub fn sender(&self) -> NodeId {
        self.sender.unwrap_or(0)
    }

    pub fn receiver(&self) -> NodeId {
        self.receiver.unwrap_or(self.n_nodes.saturating_sub(1))
    }

    /// Video duration `n_frames / fps`.
    pub fn clip_duration(&self) -> SimTime {
        SimTime::from_secs_f64(self.n_frames as f64 / self.fps)
    }

    pub fn horizon(&self) -> SimTime {
        self.clip_duration() + self.drain_time
    }

    pub fn trace_params(&self) -> TraceParams {
        TraceParams { fps: self.fps, gop_len: self.gop_len, mtu: self.mtu, size_model: self.size_model.clone() }
    }

    pub fn aodv_config(&self) -> AodvConfig {
        AodvConfig { ttl: self.aodv_ttl.unwrap_or_else(|| AodvConfig::ttl_for_grid(self.n_nodes)), ..self.aodv.clone() }
    }

    /// Starting spacing: `spacing` for static runs, `d_start` for mobile ones.
    pub fn initial_spacing(&self) -> f64 {
        self.mobility.span().map_or(self.spacing, |(a, _)| a)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.n_nodes < 2 {
            return invalid("n_nodes must be at least 2");
        }
        if grid_side(self.n_nodes).is_none() {
            return Err(ConfigError::NotPerfectSquare(self.n_nodes));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return invalid("spacing must be positive");
        }
        if let Some((a, b)) = self.mobility.span() {
            if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
                return invalid("mobility spacings must be positive");
            }
            if a == b {
                return invalid("d_start and d_end must differ for mobile scenarios");
            }
            match self.mobility {
                Mobility::Outward { .. } if b < a => return invalid("outward mobility needs d_end > d_start"),
                Mobility::Inward { .. } if b > a => return invalid("inward mobility needs d_end < d_start"),
                _ => {}
            }
        }
        let (s, r) = (self.sender(), self.receiver());
        if s >= self.n_nodes || r >= self.n_nodes {
            return invalid("sender and receiver must be node ids below n_nodes");
        }
        if s == r {
            return invalid("sender and receiver must differ");
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return invalid("fps must be positive");
        }
        if self.mtu == 0 || self.gop_len == 0 {
            return invalid("mtu and gop_len must be positive");
        }
        if self.data_ttl == 0 {
            return invalid("data_ttl must be positive");
        }
        self.radio.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.mac.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.dsdv.update_period == SimTime::ZERO {
            return invalid("dsdv.update_period must be positive");
        }
        Ok(())
    }

    /// Parses a config file: one `key = value` per line, `#` starts a comment.
    /// Keys not present keep their defaults; unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ScenarioConfig::default();
        let mut mob: Option<String> = None;
        let mut d_start: Option<f64> = None;
        let mut d_end: Option<f64> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Parse { line: line_no, msg: "expected `key = value`".into() });
            };
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| ConfigError::Parse { line: line_no, msg: format!("bad value {value:?} for {what}") };
            macro_rules! num {
                ($t:ty) => {
                    value.parse::<$t>().map_err(|_| bad(key))?
                };
            }
            let secs = || -> Result<SimTime, ConfigError> {
                let v: f64 = value.parse().map_err(|_| bad(key))?;
                if !(v.is_finite() && v >= 0.0) {
                    return Err(bad(key));
                }
                Ok(SimTime::from_secs_f64(v))
            };
            let micros = || -> Result<SimTime, ConfigError> {
                let v: f64 = value.parse().map_err(|_| bad(key))?;
                if !(v.is_finite() && v >= 0.0) {
                    return Err(bad(key));
                }
                Ok(SimTime::from_secs_f64(v * 1e-6))
            };
            match key {
                "protocol" => cfg.protocol = value.parse().map_err(|_| bad(key))?,
                "n_nodes" => cfg.n_nodes = num!(usize),
                "spacing" => cfg.spacing = num!(f64),
                "mobility" => mob = Some(value.to_ascii_lowercase()),
                "d_start" => d_start = Some(num!(f64)),
                "d_end" => d_end = Some(num!(f64)),
                "fps" => cfg.fps = num!(f64),
                "n_frames" => cfg.n_frames = num!(usize),
                "mtu" => cfg.mtu = num!(u32),
                "gop_len" => cfg.gop_len = num!(u32),
                "sender" => cfg.sender = Some(num!(usize)),
                "receiver" => cfg.receiver = Some(num!(usize)),
                "seed" => cfg.seed = num!(u64),
                "drain_time" => cfg.drain_time = secs()?,
                "data_ttl" => cfg.data_ttl = num!(u8),
                "concealment" => cfg.concealment = value.parse().map_err(|_| bad(key))?,
                "radio.tx_power" => cfg.radio.tx_power = num!(f64),
                "radio.gain_tx" => cfg.radio.gain_tx = num!(f64),
                "radio.gain_rx" => cfg.radio.gain_rx = num!(f64),
                "radio.antenna_height" => {
                    cfg.radio.antenna_height_tx = num!(f64);
                    cfg.radio.antenna_height_rx = cfg.radio.antenna_height_tx;
                }
                "radio.frequency" => cfg.radio.frequency = num!(f64),
                "radio.system_loss" => cfg.radio.system_loss = num!(f64),
                "radio.rx_threshold" => cfg.radio.rx_threshold = num!(f64),
                "radio.bitrate" => cfg.radio.bitrate = num!(f64),
                "mac.slot_us" => cfg.mac.slot = micros()?,
                "mac.sifs_us" => cfg.mac.sifs = micros()?,
                "mac.difs_us" => cfg.mac.difs = micros()?,
                "mac.overhead_us" => cfg.mac.overhead = micros()?,
                "mac.cw_min" => cfg.mac.cw_min = num!(u32),
                "mac.cw_max" => cfg.mac.cw_max = num!(u32),
                "mac.retry_limit" => cfg.mac.retry_limit = num!(u32),
                "mac.queue_limit" => cfg.mac.queue_limit = num!(usize),
                "mac.ack_bytes" => cfg.mac.ack_bytes = num!(u32),
                "aodv.active_route_timeout" => cfg.aodv.active_route_timeout = secs()?,
                "aodv.rrep_wait" => cfg.aodv.rrep_wait = secs()?,
                "aodv.rreq_retries" => cfg.aodv.rreq_retries = num!(u32),
                "aodv.ttl" => cfg.aodv_ttl = Some(num!(u8)),
                "aodv.buffer_limit" => cfg.aodv.buffer_limit = num!(usize),
                "aodv.buffer_timeout" => cfg.aodv.buffer_timeout = secs()?,
                "aodv.rebroadcast_jitter" => cfg.aodv.rebroadcast_jitter = secs()?,
                "dsdv.update_period" => cfg.dsdv.update_period = secs()?,
                "dsdv.settling_time" => cfg.dsdv.settling_time = secs()?,
                "dsdv.start_jitter" => cfg.dsdv.start_jitter = secs()?,
                "video.base_i" => cfg.size_model.base_i = num!(f64),
                "video.base_p" => cfg.size_model.base_p = num!(f64),
                "video.alpha" => cfg.size_model.alpha = num!(f64),
                "video.beta" => cfg.size_model.beta = num!(f64),
                "video.min_bytes" => cfg.size_model.min_bytes = num!(u32),
                "video.max_bytes" => cfg.size_model.max_bytes = num!(u32),
                _ => return Err(ConfigError::UnknownKey { line: line_no, key: key.to_string() }),
            }
        }
        cfg.mobility = match mob.as_deref() {
            None | Some("static") => {
                if d_start.is_some() || d_end.is_some() {
                    return Err(ConfigError::Invalid("d_start/d_end need a mobile mode".into()));
                }
                Mobility::Static
            }
            Some("outward") => Mobility::Outward { d_start: d_start.unwrap_or(20.0), d_end: d_end.unwrap_or(150.0) },
            Some("inward") => Mobility::Inward { d_start: d_start.unwrap_or(150.0), d_end: d_end.unwrap_or(20.0) },
            Some(other) => return Err(ConfigError::Invalid(format!("unknown mobility {other:?}"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Scenario-level fields in the parse format. Radio, MAC and protocol
    /// parameters are left out.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("protocol", self.protocol.as_str().to_ascii_lowercase());
        kv("n_nodes", self.n_nodes.to_string());
        kv("spacing", self.spacing.to_string());
        kv("mobility", self.mobility.as_str().to_string());
        if let Some((a, b)) = self.mobility.span() {
            kv("d_start", a.to_string());
            kv("d_end", b.to_string());
        }
        kv("fps", self.fps.to_string());
        kv("n_frames", self.n_frames.to_string());
        kv("mtu", self.mtu.to_string());
        kv("gop_len", self.gop_len.to_string());
        kv("sender", self.sender().to_string());
        kv("receiver", self.receiver().to_string());
        kv("seed", self.seed.to_string());
        kv("drain_time", self.drain_time.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_minimal() {
        let cfg = ScenarioConfig::parse("protocol = dsdv\nn_nodes = 25 # grid\nspacing = 100\n").unwrap();
        assert_eq!(cfg.protocol, Protocol::Dsdv);
        assert_eq!(cfg.n_nodes, 25);
        assert_eq!(cfg.side(), 5);
        assert_eq!(cfg.receiver(), 24);
        assert_eq!(cfg.aodv_config().ttl, 10);
    }

    #[test]
    fn unknown_key_rejected() {
        let e = ScenarioConfig::parse("n_nodes = 4\ncolour = blue\n").unwrap_err();
        assert_eq!(e, ConfigError::UnknownKey { line: 2, key: "colour".into() });
    }

    #[test]
    fn non_square_rejected() {
        assert_eq!(ScenarioConfig::parse("n_nodes = 5").unwrap_err(), ConfigError::NotPerfectSquare(5));
    }

    #[test]
    fn mobility_parsing() {
        let c = ScenarioConfig::parse("n_nodes = 25\nmobility = inward\n").unwrap();
        assert_eq!(c.mobility, Mobility::INWARD);
        assert!(ScenarioConfig::parse("mobility = outward\nd_start = 50\nd_end = 50\n").is_err());
        assert!(ScenarioConfig::parse("mobility = inward\nd_start = 20\nd_end = 150\n").is_err());
        assert!(ScenarioConfig::parse("d_start = 20\n").is_err());
    }

    #[test]
    fn same_endpoints_rejected() {
        assert!(ScenarioConfig::parse("n_nodes = 4\nsender = 2\nreceiver = 2\n").is_err());
        assert!(ScenarioConfig::parse("n_nodes = 4\nreceiver = 4\n").is_err());
    }

    #[test]
    fn text_roundtrip() {
        let c = ScenarioConfig { protocol: Protocol::Dsdv, n_nodes: 9, spacing: 50.0, seed: 7, ..Default::default() };
        assert_eq!(
            ScenarioConfig::parse(&c.to_text()).unwrap(),
            ScenarioConfig { sender: Some(0), receiver: Some(8), ..c }
        );
    }
}
