//! One complete scenario: trace, network run, reconstruction and metrics.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::mac::StatKind;
use crate::packet::PacketKind;
use crate::routing::ROUTE_EVENT_HEADER;
use crate::scenario::config::{ConfigError, ScenarioConfig};
use crate::scenario::net::{NetOutcome, Network};
use crate::video::metrics::{moving_average, MetricSeries, MetricsError, PsnrConfig};
use crate::video::reconstruct::{reconstruct, ReconstructError, ReconstructedVideo};
use crate::video::trace::{trace_from_frames, TraceError, VideoTrace};
use crate::video::yuv::YuvSequence;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("source has {have} frames, the scenario needs {need}")]
    SourceTooShort { have: usize, need: usize },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Reconstruct(#[from] ReconstructError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Minimum decodable-frame ratio for a run to count as extractable.
    pub theta: f64,
    pub psnr: PsnrConfig,
    pub event_log: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { theta: 0.05, psnr: PsnrConfig::default(), event_log: false }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: ScenarioConfig,
    pub trace: VideoTrace,
    pub net: NetOutcome,
    pub recon: ReconstructedVideo,
    pub metrics: MetricSeries,
    /// Time the first complete frame reached the receiver.
    pub first_frame_s: Option<f64>,
}

pub fn run_scenario(cfg: &ScenarioConfig, source: &YuvSequence) -> Result<RunResult, RunError> {
    run_scenario_with(cfg, source, &RunOptions::default())
}

pub fn run_scenario_with(cfg: &ScenarioConfig, source: &YuvSequence, opts: &RunOptions) -> Result<RunResult, RunError> {
    cfg.validate()?;
    if source.len() < cfg.n_frames {
        return Err(RunError::SourceTooShort { have: source.len(), need: cfg.n_frames });
    }
    let trace = trace_from_frames(&source.frames[..cfg.n_frames], &cfg.trace_params())?;
    let mut net = Network::new(cfg, &trace, opts.event_log);
    net.start();
    net.run_until(cfg.horizon());
    let net = net.finish();
    let recon = reconstruct(&trace, &net.sender_log, &net.receiver_log, source, cfg.concealment)?;
    let metrics =
        MetricSeries::compute(&trace, &net.sender_log, &net.receiver_log, source, &recon, &opts.psnr, opts.theta)?;
    let first_frame_s = metrics.first_delivery(&trace);
    Ok(RunResult { config: cfg.clone(), trace, net, recon, metrics, first_frame_s })
}

fn f6(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl RunResult {
    pub fn psnr_smooth_csv(&self, window: usize) -> String {
        let smooth = moving_average(&self.metrics.psnr_db, window);
        let mut s = String::from("frame,psnr_db,psnr_smooth_db\n");
        for (i, (p, m)) in self.metrics.psnr_db.iter().zip(&smooth).enumerate() {
            let _ = writeln!(s, "{i},{p:.6},{m:.6}");
        }
        s
    }

    /// Jitter of received frames with its moving average.
    pub fn jitter_csv(&self, window: usize) -> String {
        let pts: Vec<(usize, f64)> =
            self.metrics.jitter_s.iter().enumerate().filter_map(|(i, j)| j.map(|j| (i, j))).collect();
        let vals: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let smooth = moving_average(&vals, window);
        let mut s = String::from("frame,jitter_s,jitter_smooth_s\n");
        for ((i, j), m) in pts.iter().zip(&smooth) {
            let _ = writeln!(s, "{i},{j:.9},{m:.9}");
        }
        s
    }

    pub fn route_events_csv(&self) -> String {
        let mut s = String::from(ROUTE_EVENT_HEADER);
        s.push('\n');
        for e in &self.net.route_events {
            let _ = writeln!(s, "{e}");
        }
        s
    }

    pub fn summary(&self) -> String {
        let c = &self.config;
        let m = &self.metrics;
        let data = self.net.channel.get(StatKind::Packet(PacketKind::Data));
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("protocol", c.protocol.to_string());
        kv("n_nodes", c.n_nodes.to_string());
        kv("spacing", c.spacing.to_string());
        kv("mobility", c.mobility.as_str().to_string());
        kv("seed", c.seed.to_string());
        kv("frames", self.recon.len().to_string());
        kv("delivered_frames", self.recon.delivered_count().to_string());
        kv("decodable_frames", self.recon.decodable_count().to_string());
        kv("loss_rate", format!("{:.6}", m.loss_rate));
        kv("decodable_ratio", format!("{:.6}", m.decodable_ratio));
        kv("extractable", if m.extractable { "Y" } else { "N" }.to_string());
        kv("mean_psnr_db", format!("{:.6}", m.mean_psnr()));
        kv("mean_abs_jitter_s", f6(m.mean_abs_jitter()));
        kv("first_frame_s", f6(self.first_frame_s));
        kv("segments_sent", self.net.sender_log.len().to_string());
        kv("segments_received", self.net.receiver_log.len().to_string());
        kv("data_mac_dropped_queue", data.dropped_queue.to_string());
        kv("data_mac_dropped_retry", data.dropped_retry.to_string());
        for (reason, n) in &self.net.routing_drops {
            kv(&format!("data_routing_drop_{}", reason.as_str()), n.to_string());
        }
        kv("seq_regressions", self.net.seq_regressions.to_string());
        kv("events", self.net.events.to_string());
        s
    }

    /// Writes every per-run artifact into `dir`, creating it if needed.
    pub fn write_outputs(&self, dir: &Path, window: usize) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.txt"), self.config.to_text())?;
        fs::write(dir.join("trace.txt"), self.trace.to_text())?;
        fs::write(dir.join("sender.log"), self.net.sender_log.to_text())?;
        fs::write(dir.join("receiver.log"), self.net.receiver_log.to_text())?;
        fs::write(dir.join("metrics.csv"), self.metrics.to_csv())?;
        fs::write(dir.join("psnr_smooth.csv"), self.psnr_smooth_csv(window))?;
        fs::write(dir.join("jitter.csv"), self.jitter_csv(window))?;
        fs::write(dir.join("channel.csv"), self.net.channel.to_csv())?;
        fs::write(dir.join("routes.csv"), self.route_events_csv())?;
        fs::write(dir.join("summary.txt"), self.summary())?;
        if let Some(log) = &self.net.event_log {
            let mut text = log.join("\n");
            text.push('\n');
            fs::write(dir.join("events.log"), text)?;
        }
        Ok(())
    }
}
