//! Frame trace generation with a content-driven frame-size model.
//!
//! There is no real encoder: decodable frames are reproduced losslessly and
//! the trace only decides how many bytes each frame costs on the network.
//! I frames grow with spatial activity, P frames with the temporal difference
//! to the previous frame, so dark or static content yields smaller frames.

use std::fmt::Write as _;

use thiserror::Error;

use crate::sim::SimTime;
use crate::video::yuv::{YuvFrame, YuvSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameType {
    I,
    P,
}

impl FrameType {
    pub fn as_str(self) -> &'static str {
        match self {
            FrameType::I => "I",
            FrameType::P => "P",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeModel {
    pub base_i: f64,
    pub base_p: f64,
    /// Bytes per unit of mean absolute luma deviation.
    pub alpha: f64,
    /// Bytes per unit of mean absolute luma change.
    pub beta: f64,
    pub min_bytes: u32,
    pub max_bytes: u32,
}

impl Default for SizeModel {
    fn default() -> Self {
        SizeModel { base_i: 6000.0, base_p: 1500.0, alpha: 60.0, beta: 140.0, min_bytes: 200, max_bytes: 30_000 }
    }
}

impl SizeModel {
    fn clamp(&self, bytes: f64) -> u32 {
        let b = bytes.round();
        if b <= f64::from(self.min_bytes) {
            self.min_bytes
        } else if b >= f64::from(self.max_bytes) {
            self.max_bytes
        } else {
            b as u32
        }
    }

    pub fn i_size(&self, activity: f64) -> u32 {
        self.clamp(self.base_i + self.alpha * activity)
    }

    pub fn p_size(&self, diff: f64) -> u32 {
        self.clamp(self.base_p + self.beta * diff)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceParams {
    pub fps: f64,
    pub gop_len: u32,
    pub mtu: u32,
    pub size_model: SizeModel,
}

impl Default for TraceParams {
    fn default() -> Self {
        TraceParams { fps: 30.0, gop_len: 30, mtu: 1024, size_model: SizeModel::default() }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("cannot build a trace from an empty sequence")]
    EmptySequence,
    #[error("invalid trace parameter {0}")]
    InvalidParam(&'static str),
    #[error("trace line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub frame_id: u32,
    pub frame_type: FrameType,
    pub size: u32,
    pub n_segments: u32,
    pub gen_time: SimTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoTrace {
    pub mtu: u32,
    pub entries: Vec<TraceEntry>,
}

/// Mean absolute deviation of luma from its mean.
pub fn spatial_activity(frame: &YuvFrame) -> f64 {
    if frame.y.is_empty() {
        return 0.0;
    }
    let n = frame.y.len() as f64;
    let mean = frame.y.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    frame.y.iter().map(|&v| (f64::from(v) - mean).abs()).sum::<f64>() / n
}

/// Mean absolute luma difference between two frames of equal size.
pub fn temporal_diff(cur: &YuvFrame, prev: &YuvFrame) -> f64 {
    if cur.y.is_empty() {
        return 0.0;
    }
    let total: u64 = cur.y.iter().zip(&prev.y).map(|(&a, &b)| u64::from(a.abs_diff(b))).sum();
    total as f64 / cur.y.len() as f64
}

pub fn segment_count(size: u32, mtu: u32) -> u32 {
    size.div_ceil(mtu)
}

pub fn generate_trace(seq: &YuvSequence, params: &TraceParams) -> Result<VideoTrace, TraceError> {
    trace_from_frames(&seq.frames, params)
}

/// Trace over a slice of frames, e.g. the first `n` frames of a longer clip.
pub fn trace_from_frames(frames: &[YuvFrame], params: &TraceParams) -> Result<VideoTrace, TraceError> {
    if frames.is_empty() {
        return Err(TraceError::EmptySequence);
    }
    if !(params.fps.is_finite() && params.fps > 0.0) {
        return Err(TraceError::InvalidParam("fps"));
    }
    if params.gop_len == 0 {
        return Err(TraceError::InvalidParam("gop_len"));
    }
    if params.mtu == 0 {
        return Err(TraceError::InvalidParam("mtu"));
    }
    let model = &params.size_model;
    let entries = frames
        .iter()
        .enumerate()
        .map(|(i, frame)| {
            let frame_id = i as u32;
            let (frame_type, size) = if frame_id.is_multiple_of(params.gop_len) {
                (FrameType::I, model.i_size(spatial_activity(frame)))
            } else {
                (FrameType::P, model.p_size(temporal_diff(frame, &frames[i - 1])))
            };
            TraceEntry {
                frame_id,
                frame_type,
                size,
                n_segments: segment_count(size, params.mtu),
                gen_time: SimTime::from_secs_f64(f64::from(frame_id) / params.fps),
            }
        })
        .collect();
    Ok(VideoTrace { mtu: params.mtu, entries })
}

impl VideoTrace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_segments(&self) -> u64 {
        self.entries.iter().map(|e| u64::from(e.n_segments)).sum()
    }

    /// Payload bytes of each segment of a frame: full MTUs then the remainder.
    pub fn segment_sizes(&self, frame_id: u32) -> Vec<u32> {
        let e = &self.entries[frame_id as usize];
        (0..e.n_segments)
            .map(|k| if k + 1 < e.n_segments { self.mtu } else { e.size - self.mtu * (e.n_segments - 1) })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.entries.len() * 32);
        for e in &self.entries {
            let _ = writeln!(
                s,
                "{} {} {} {} {}",
                e.frame_id,
                e.frame_type.as_str(),
                e.size,
                e.n_segments,
                e.gen_time.fmt_decimals(6)
            );
        }
        s
    }

    pub fn parse(text: &str, mtu: u32) -> Result<Self, TraceError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let err = |msg: &str| TraceError::Parse { line: line_no, msg: msg.to_string() };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 5 {
                return Err(err("expected 5 fields"));
            }
            let frame_id: u32 = f[0].parse().map_err(|_| err("bad frame id"))?;
            if frame_id as usize != entries.len() {
                return Err(err("frame ids must be consecutive from 0"));
            }
            let frame_type = match f[1] {
                "I" => FrameType::I,
                "P" => FrameType::P,
                _ => return Err(err("frame type must be I or P")),
            };
            let size: u32 = f[2].parse().map_err(|_| err("bad size"))?;
            let n_segments: u32 = f[3].parse().map_err(|_| err("bad segment count"))?;
            if size == 0 || n_segments != segment_count(size, mtu) {
                return Err(err("segment count does not match size and mtu"));
            }
            let gen_time = SimTime::parse_secs(f[4]).ok_or_else(|| err("bad time"))?;
            entries.push(TraceEntry { frame_id, frame_type, size, n_segments, gen_time });
        }
        Ok(VideoTrace { mtu, entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq_of(frames: Vec<YuvFrame>) -> YuvSequence {
        let mut s = YuvSequence::new(frames[0].width, frames[0].height).unwrap();
        for f in frames {
            s.push(f).unwrap();
        }
        s
    }

    #[test]
    fn black_sequence_uses_base_sizes() {
        let s = seq_of(vec![YuvFrame::black(16, 16); 3]);
        let t = generate_trace(&s, &TraceParams::default()).unwrap();
        let sizes: Vec<u32> = t.entries.iter().map(|e| e.size).collect();
        assert_eq!(sizes, vec![6000, 1500, 1500]);
        let segs: Vec<u32> = t.entries.iter().map(|e| e.n_segments).collect();
        assert_eq!(segs, vec![6, 2, 2]);
        assert_eq!(t.entries[0].frame_type, FrameType::I);
        assert_eq!(t.entries[1].gen_time, SimTime::from_nanos(33_333_333));
    }

    #[test]
    fn gop_periodicity() {
        let s = seq_of(vec![YuvFrame::black(4, 4); 61]);
        let t = generate_trace(&s, &TraceParams::default()).unwrap();
        for e in &t.entries {
            let expect = if e.frame_id % 30 == 0 { FrameType::I } else { FrameType::P };
            assert_eq!(e.frame_type, expect, "frame {}", e.frame_id);
        }
    }

    #[test]
    fn motion_costs_bytes() {
        let w = 16;
        let mut f0 = YuvFrame::black(w, 4);
        for (i, v) in f0.y.iter_mut().enumerate() {
            *v = ((i % w) * 16) as u8;
        }
        let mut f1 = f0.clone();
        for row in 0..4 {
            f1.y[row * w..(row + 1) * w].rotate_right(1);
        }
        // direct computation of the mean absolute difference of the shifted ramp
        let mut total = 0u64;
        for (a, b) in f1.y.iter().zip(&f0.y) {
            total += u64::from(a.abs_diff(*b));
        }
        let diff = total as f64 / 64.0;
        assert!(diff > 0.0);
        let moved = generate_trace(&seq_of(vec![f0.clone(), f1]), &TraceParams::default()).unwrap();
        let still = generate_trace(&seq_of(vec![f0.clone(), f0]), &TraceParams::default()).unwrap();
        assert_eq!(moved.entries[1].size, (1500.0 + 140.0 * diff).round() as u32);
        assert!(moved.entries[1].size > still.entries[1].size);
    }

    #[test]
    fn sizes_clamp() {
        let m = SizeModel::default();
        assert_eq!(m.i_size(1e9), 30_000);
        let m2 = SizeModel { base_p: 0.0, ..SizeModel::default() };
        assert_eq!(m2.p_size(0.0), 200);
    }

    #[test]
    fn segmentation() {
        assert_eq!(segment_count(2500, 1024), 3);
        let t = VideoTrace {
            mtu: 1024,
            entries: vec![TraceEntry {
                frame_id: 0,
                frame_type: FrameType::I,
                size: 2500,
                n_segments: 3,
                gen_time: SimTime::ZERO,
            }],
        };
        assert_eq!(t.segment_sizes(0), vec![1024, 1024, 452]);
    }

    #[test]
    fn empty_sequence_rejected() {
        let s = YuvSequence::new(4, 4).unwrap();
        assert_eq!(generate_trace(&s, &TraceParams::default()), Err(TraceError::EmptySequence));
    }

    #[test]
    fn text_roundtrip() {
        let s = seq_of(vec![YuvFrame::black(4, 4); 4]);
        let t = generate_trace(&s, &TraceParams::default()).unwrap();
        let text = t.to_text();
        assert_eq!(text.lines().next().unwrap(), "0 I 6000 6 0.000000");
        assert_eq!(text.lines().nth(1).unwrap(), "1 P 1500 2 0.033333");
        let back = VideoTrace::parse(&text, 1024).unwrap();
        assert_eq!(back.entries.len(), 4);
        assert_eq!(back.entries[3].size, 1500);
        assert!(VideoTrace::parse("0 X 10 1 0.0\n", 1024).is_err());
        assert!(VideoTrace::parse("1 I 10 1 0.0\n", 1024).is_err());
    }
}
