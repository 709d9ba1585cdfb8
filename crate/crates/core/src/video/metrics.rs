//! PSNR, delay, loss, jitter and smoothing.

use std::fmt::Write as _;

use thiserror::Error;

use crate::sim::SimTime;
use crate::video::logs::SegmentLog;
use crate::video::reconstruct::ReconstructedVideo;
use crate::video::trace::VideoTrace;
use crate::video::yuv::{YuvFrame, YuvSequence};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsnrConfig {
    pub v_peak: f64,
    pub cap_db: f64,
}

impl Default for PsnrConfig {
    fn default() -> Self {
        PsnrConfig { v_peak: 255.0, cap_db: 100.0 }
    }
}

impl PsnrConfig {
    pub fn for_bit_depth(k: u8) -> Self {
        PsnrConfig { v_peak: f64::from((1u32 << k) - 1), cap_db: 100.0 }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("frame dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
}

/// Luma-only PSNR in dB; `cfg.cap_db` for identical frames.
pub fn psnr_frame(src: &YuvFrame, dst: &YuvFrame, cfg: &PsnrConfig) -> Result<f64, MetricsError> {
    if src.width != dst.width || src.height != dst.height || src.y.len() != dst.y.len() {
        return Err(MetricsError::DimensionMismatch(src.width, src.height, dst.width, dst.height));
    }
    let sse: u64 = src
        .y
        .iter()
        .zip(&dst.y)
        .map(|(&a, &b)| {
            let d = u64::from(a.abs_diff(b));
            d * d
        })
        .sum();
    if sse == 0 {
        return Ok(cfg.cap_db);
    }
    let mse = sse as f64 / src.y.len() as f64;
    Ok(20.0 * (cfg.v_peak / mse.sqrt()).log10())
}

/// PSNR of every reconstructed frame against its source frame.
pub fn psnr_sequence(
    source: &YuvSequence,
    recon: &ReconstructedVideo,
    cfg: &PsnrConfig,
) -> Result<Vec<f64>, MetricsError> {
    (0..recon.len())
        .map(|i| match recon.output[i] {
            crate::video::reconstruct::OutputFrame::Source(j) if j == i => Ok(cfg.cap_db),
            _ => psnr_frame(&source.frames[i], &recon.frame(i, source), cfg),
        })
        .collect()
}

/// Time of the last logged segment of each frame, if all `n_segments[f]` are present.
fn frame_times(log: &SegmentLog, n_segments: &[u32]) -> Vec<Option<SimTime>> {
    let mut count = vec![0u32; n_segments.len()];
    let mut last = vec![SimTime::ZERO; n_segments.len()];
    for r in log.records() {
        let f = r.frame_id as usize;
        if f < count.len() {
            count[f] += 1;
            last[f] = last[f].max(r.time);
        }
    }
    count.iter().zip(n_segments).zip(last).map(|((&c, &n), t)| (c == n && n > 0).then_some(t)).collect()
}

fn frames_in(log: &SegmentLog) -> Vec<u32> {
    let n = log.records().iter().map(|r| r.frame_id + 1).max().unwrap_or(0) as usize;
    let mut segs = vec![0u32; n];
    for r in log.records() {
        segs[r.frame_id as usize] = segs[r.frame_id as usize].max(r.segment_index + 1);
    }
    segs
}

/// Per-frame jitter over consecutively received frames, as `(frame_id, seconds)`.
///
/// A frame is received when all the segments the sender logged for it arrived;
/// its send and receive times are those of its last segment. Entry `i` is
/// `(r_i - r_prev) - (s_i - s_prev)`; `cumulative` emits the running sum.
pub fn jitter_series(sender: &SegmentLog, receiver: &SegmentLog, cumulative: bool) -> Vec<(u32, f64)> {
    let segs = frames_in(sender);
    let sent = frame_times(sender, &segs);
    let recv = frame_times(receiver, &segs);
    let mut out = Vec::new();
    let mut prev: Option<(SimTime, SimTime)> = None;
    let mut acc: i128 = 0;
    for (f, (s, r)) in sent.iter().zip(&recv).enumerate() {
        let (Some(s), Some(r)) = (s, r) else { continue };
        if let Some((ps, pr)) = prev {
            let j = i128::from(r.signed_diff(pr)) - i128::from(s.signed_diff(ps));
            let v = if cumulative {
                acc += j;
                acc
            } else {
                j
            };
            out.push((f as u32, v as f64 / 1e9));
        }
        prev = Some((*s, *r));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayLoss {
    /// `(frame_id, seconds)` for delivered frames.
    pub delays: Vec<(u32, f64)>,
    pub loss_rate: f64,
}

pub fn delay_and_loss(trace: &VideoTrace, _sender: &SegmentLog, receiver: &SegmentLog) -> DelayLoss {
    let segs: Vec<u32> = trace.entries.iter().map(|e| e.n_segments).collect();
    let recv = frame_times(receiver, &segs);
    let delays: Vec<(u32, f64)> = recv
        .iter()
        .zip(&trace.entries)
        .filter_map(|(r, e)| r.map(|t| (e.frame_id, t.signed_diff(e.gen_time) as f64 / 1e9)))
        .collect();
    let loss_rate = if trace.is_empty() { 0.0 } else { 1.0 - delays.len() as f64 / trace.len() as f64 };
    DelayLoss { delays, loss_rate }
}

/// Trailing moving average; the first `window - 1` outputs average the available prefix.
pub fn moving_average(series: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be at least 1");
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for i in 0..series.len() {
        sum += series[i];
        if i >= window {
            sum -= series[i - window];
        }
        let n = (i + 1).min(window);
        out.push(sum / n as f64);
    }
    out
}

pub fn extractability(recon: &ReconstructedVideo, theta: f64) -> bool {
    !recon.is_empty() && recon.decodable_count() as f64 >= theta * recon.len() as f64
}

/// Per-frame metrics for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub delivered: Vec<bool>,
    pub decodable: Vec<bool>,
    pub psnr_db: Vec<f64>,
    pub delay_s: Vec<Option<f64>>,
    pub jitter_s: Vec<Option<f64>>,
    pub loss_rate: f64,
    pub decodable_ratio: f64,
    pub extractable: bool,
}

impl MetricSeries {
    pub const CSV_HEADER: &'static str = "frame,delivered,decodable,psnr_db,delay_s,jitter_s";

    pub fn compute(
        trace: &VideoTrace,
        sender: &SegmentLog,
        receiver: &SegmentLog,
        source: &YuvSequence,
        recon: &ReconstructedVideo,
        psnr: &PsnrConfig,
        theta: f64,
    ) -> Result<Self, MetricsError> {
        let n = recon.len();
        let dl = delay_and_loss(trace, sender, receiver);
        let mut delay_s = vec![None; n];
        for (f, d) in &dl.delays {
            delay_s[*f as usize] = Some(*d);
        }
        let mut jitter_s = vec![None; n];
        for (f, j) in jitter_series(sender, receiver, false) {
            if let Some(slot) = jitter_s.get_mut(f as usize) {
                *slot = Some(j);
            }
        }
        Ok(MetricSeries {
            delivered: recon.statuses.iter().map(|s| s.is_delivered()).collect(),
            decodable: recon.statuses.iter().map(|s| s.is_decodable()).collect(),
            psnr_db: psnr_sequence(source, recon, psnr)?,
            delay_s,
            jitter_s,
            loss_rate: dl.loss_rate,
            decodable_ratio: recon.decodable_ratio(),
            extractable: extractability(recon, theta),
        })
    }

    pub fn len(&self) -> usize {
        self.psnr_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psnr_db.is_empty()
    }

    pub fn mean_psnr(&self) -> f64 {
        mean(&self.psnr_db)
    }

    pub fn mean_abs_jitter(&self) -> Option<f64> {
        let v: Vec<f64> = self.jitter_s.iter().flatten().map(|j| j.abs()).collect();
        (!v.is_empty()).then(|| mean(&v))
    }

    /// Arrival time of the earliest complete frame.
    pub fn first_delivery(&self, trace: &VideoTrace) -> Option<f64> {
        self.delay_s
            .iter()
            .enumerate()
            .filter_map(|(i, d)| d.map(|d| trace.entries[i].gen_time.as_secs_f64() + d))
            .min_by(f64::total_cmp)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(48 * (self.len() + 1));
        s.push_str(Self::CSV_HEADER);
        s.push('\n');
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.9}")).unwrap_or_default();
        for i in 0..self.len() {
            let _ = writeln!(
                s,
                "{},{},{},{:.6},{},{}",
                i,
                u8::from(self.delivered[i]),
                u8::from(self.decodable[i]),
                self.psnr_db[i],
                opt(self.delay_s[i]),
                opt(self.jitter_s[i])
            );
        }
        s
    }
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::video::logs::LogRecord;
    use proptest::prelude::*;

    fn brute(src: &YuvFrame, dst: &YuvFrame, peak: f64, cap: f64) -> f64 {
        let mut sum = 0.0;
        for r in 0..src.height {
            for c in 0..src.width {
                let d = f64::from(src.y[r * src.width + c]) - f64::from(dst.y[r * src.width + c]);
                sum += d * d;
            }
        }
        if sum == 0.0 {
            return cap;
        }
        let mse = sum / (src.width * src.height) as f64;
        20.0 * (peak / mse.sqrt()).log10()
    }

    #[test]
    fn analytic_cases() {
        let cfg = PsnrConfig::default();
        let a = YuvFrame::filled(8, 8, 17, 1, 2);
        assert_eq!(psnr_frame(&a, &a, &cfg).unwrap(), 100.0);
        let z = YuvFrame::filled(4, 4, 0, 0, 0);
        let f = YuvFrame::filled(4, 4, 255, 0, 0);
        assert_eq!(psnr_frame(&z, &f, &cfg).unwrap(), 0.0);
        let mut one = YuvFrame::filled(2, 2, 0, 0, 0);
        one.y[3] = 255;
        let p = psnr_frame(&YuvFrame::filled(2, 2, 0, 0, 0), &one, &cfg).unwrap();
        assert!((p - 20.0 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn chroma_is_ignored() {
        let a = YuvFrame::filled(4, 4, 9, 0, 0);
        let b = YuvFrame::filled(4, 4, 9, 200, 50);
        assert_eq!(psnr_frame(&a, &b, &PsnrConfig::default()).unwrap(), 100.0);
    }

    #[test]
    fn dimension_mismatch() {
        let r = psnr_frame(&YuvFrame::black(2, 2), &YuvFrame::black(4, 2), &PsnrConfig::default());
        assert!(matches!(r, Err(MetricsError::DimensionMismatch(..))));
    }

    fn log_of(frames: &[(u32, f64)]) -> SegmentLog {
        let mut l = SegmentLog::new();
        for (i, (f, t)) in frames.iter().enumerate() {
            l.record(LogRecord {
                time: SimTime::from_secs_f64(*t),
                packet_uid: i as u64,
                frame_id: *f,
                segment_index: 0,
            });
        }
        l
    }

    #[test]
    fn jitter_worked_example() {
        let s = log_of(&[(0, 0.0), (1, 1.0 / 30.0), (2, 2.0 / 30.0)]);
        let r = log_of(&[(0, 0.5), (1, 0.5 + 1.0 / 30.0), (2, 0.5 + 3.0 / 30.0)]);
        let j = jitter_series(&s, &r, false);
        assert_eq!(j.len(), 2);
        assert_eq!(j[0], (1, 0.0));
        assert_eq!(j[1].0, 2);
        assert!((j[1].1 - 1.0 / 30.0).abs() < 2e-9);
        let c = jitter_series(&s, &r, true);
        assert_eq!(c[1].1, j[0].1 + j[1].1);
    }

    #[test]
    fn jitter_constant_offset_and_single_frame() {
        let s = log_of(&[(0, 0.0), (1, 0.1), (2, 0.2), (3, 0.3)]);
        let r = log_of(&[(0, 0.25), (1, 0.35), (2, 0.45), (3, 0.55)]);
        assert!(jitter_series(&s, &r, false).iter().all(|(_, j)| *j == 0.0));
        let r1 = log_of(&[(2, 0.45)]);
        assert!(jitter_series(&s, &r1, false).is_empty());
    }

    #[test]
    fn jitter_skips_lost_frames() {
        let s = log_of(&[(0, 0.0), (1, 0.1), (2, 0.2)]);
        let r = log_of(&[(0, 0.05), (2, 0.30)]);
        let j = jitter_series(&s, &r, false);
        assert_eq!(j.len(), 1);
        assert_eq!(j[0].0, 2);
        assert!((j[0].1 - 0.05).abs() < 1e-9);
    }

    #[test]
    fn moving_average_examples() {
        assert_eq!(moving_average(&[0.0, 100.0], 2), vec![0.0, 50.0]);
        assert_eq!(moving_average(&[3.0, 1.0, 4.0], 1), vec![3.0, 1.0, 4.0]);
        assert_eq!(moving_average(&[7.0; 5], 3), vec![7.0; 5]);
        assert_eq!(moving_average(&[1.0, 2.0, 3.0, 4.0], 2), vec![1.0, 1.5, 2.5, 3.5]);
    }

    proptest! {
        #[test]
        fn psnr_matches_brute_force(w in 1usize..33, h in 1usize..33, seed in any::<u64>()) {
            let (w, h) = (w * 2, h * 2);
            let mut x = seed | 1;
            let mut next = || { x ^= x << 13; x ^= x >> 7; x ^= x << 17; (x >> 24) as u8 };
            let mut a = YuvFrame::black(w, h);
            let mut b = YuvFrame::black(w, h);
            for v in a.y.iter_mut() { *v = next(); }
            for v in b.y.iter_mut() { *v = next(); }
            let cfg = PsnrConfig::default();
            let p = psnr_frame(&a, &b, &cfg).unwrap();
            prop_assert!((p - brute(&a, &b, 255.0, 100.0)).abs() < 1e-9);
            prop_assert_eq!(p, psnr_frame(&b, &a, &cfg).unwrap());
        }

        #[test]
        fn moving_average_preserves_length(v in proptest::collection::vec(-1e3f64..1e3, 0..50), w in 1usize..10) {
            let m = moving_average(&v, w);
            prop_assert_eq!(m.len(), v.len());
        }
    }
}
