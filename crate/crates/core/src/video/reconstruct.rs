//! Rebuilds the received video from the trace and the receive log.
//!
//! A frame is delivered when every one of its segments was received. It is
//! decodable when delivered and either an I frame or the successor of a
//! decodable frame. Everything else is concealed.

use std::borrow::Cow;
use std::str::FromStr;

use thiserror::Error;

use crate::video::logs::SegmentLog;
use crate::video::trace::{FrameType, VideoTrace};
use crate::video::yuv::{YuvFrame, YuvSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameStatus {
    DeliveredDecodable,
    DeliveredUndecodable,
    Lost,
}

impl FrameStatus {
    pub fn is_delivered(self) -> bool {
        !matches!(self, FrameStatus::Lost)
    }

    pub fn is_decodable(self) -> bool {
        matches!(self, FrameStatus::DeliveredDecodable)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Concealment {
    /// Repeat the most recent decodable frame (black before the first one).
    #[default]
    RepeatLast,
    /// Emit all-zero planes.
    ZeroFill,
}

impl FromStr for Concealment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "repeat" | "repeat_last" => Ok(Concealment::RepeatLast),
            "zero" | "zero_fill" => Ok(Concealment::ZeroFill),
            other => Err(format!("unknown concealment mode {other:?}")),
        }
    }
}

/// Where an output frame's pixels come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFrame {
    Source(usize),
    Black,
    Zero,
}

#[derive(Debug, Error, PartialEq)]
pub enum ReconstructError {
    #[error("{log} log references frame {frame_id} segment {segment_index}, which is not in the trace")]
    InconsistentLogs { log: &'static str, frame_id: u32, segment_index: u32 },
    #[error("source has {source_frames} frames but the trace has {trace_frames}")]
    SourceTooShort { source_frames: usize, trace_frames: usize },
}

/// Received video: per-frame status plus, for each output frame, which
/// source frame (or synthetic fill) it shows.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructedVideo {
    pub statuses: Vec<FrameStatus>,
    pub output: Vec<OutputFrame>,
    pub mode: Concealment,
    pub width: usize,
    pub height: usize,
}

impl ReconstructedVideo {
    pub fn len(&self) -> usize {
        self.statuses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statuses.is_empty()
    }

    pub fn decodable_count(&self) -> usize {
        self.statuses.iter().filter(|s| s.is_decodable()).count()
    }

    pub fn delivered_count(&self) -> usize {
        self.statuses.iter().filter(|s| s.is_delivered()).count()
    }

    pub fn decodable_ratio(&self) -> f64 {
        if self.statuses.is_empty() {
            return 0.0;
        }
        self.decodable_count() as f64 / self.statuses.len() as f64
    }

    pub fn frame<'a>(&self, index: usize, source: &'a YuvSequence) -> Cow<'a, YuvFrame> {
        match self.output[index] {
            OutputFrame::Source(i) => Cow::Borrowed(&source.frames[i]),
            OutputFrame::Black => Cow::Owned(YuvFrame::black(self.width, self.height)),
            OutputFrame::Zero => Cow::Owned(YuvFrame::zero(self.width, self.height)),
        }
    }

    /// Materializes the received sequence.
    pub fn to_sequence(&self, source: &YuvSequence) -> YuvSequence {
        YuvSequence {
            width: self.width,
            height: self.height,
            bit_depth: source.bit_depth,
            frames: (0..self.len()).map(|i| self.frame(i, source).into_owned()).collect(),
        }
    }
}

fn check_log(trace: &VideoTrace, log: &SegmentLog, name: &'static str) -> Result<(), ReconstructError> {
    for r in log.records() {
        let ok = trace.entries.get(r.frame_id as usize).is_some_and(|e| r.segment_index < e.n_segments);
        if !ok {
            return Err(ReconstructError::InconsistentLogs {
                log: name,
                frame_id: r.frame_id,
                segment_index: r.segment_index,
            });
        }
    }
    Ok(())
}

/// Per-frame delivery and decodability from the receive log alone.
pub fn frame_statuses(trace: &VideoTrace, receiver_log: &SegmentLog) -> Vec<FrameStatus> {
    let mut received = vec![0u32; trace.len()];
    for r in receiver_log.records() {
        if let Some(c) = received.get_mut(r.frame_id as usize) {
            *c += 1;
        }
    }
    let mut out = Vec::with_capacity(trace.len());
    let mut prev_decodable = false;
    for (e, &got) in trace.entries.iter().zip(&received) {
        let delivered = got == e.n_segments;
        let decodable = delivered && (e.frame_type == FrameType::I || prev_decodable);
        out.push(match (delivered, decodable) {
            (true, true) => FrameStatus::DeliveredDecodable,
            (true, false) => FrameStatus::DeliveredUndecodable,
            _ => FrameStatus::Lost,
        });
        prev_decodable = decodable;
    }
    out
}

pub fn reconstruct(
    trace: &VideoTrace,
    sender_log: &SegmentLog,
    receiver_log: &SegmentLog,
    source: &YuvSequence,
    mode: Concealment,
) -> Result<ReconstructedVideo, ReconstructError> {
    check_log(trace, sender_log, "sender")?;
    check_log(trace, receiver_log, "receiver")?;
    if source.len() < trace.len() {
        return Err(ReconstructError::SourceTooShort { source_frames: source.len(), trace_frames: trace.len() });
    }
    let statuses = frame_statuses(trace, receiver_log);
    let mut last_good: Option<usize> = None;
    let output = statuses
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if s.is_decodable() {
                last_good = Some(i);
                return OutputFrame::Source(i);
            }
            match mode {
                Concealment::RepeatLast => last_good.map_or(OutputFrame::Black, OutputFrame::Source),
                Concealment::ZeroFill => OutputFrame::Zero,
            }
        })
        .collect();
    Ok(ReconstructedVideo { statuses, output, mode, width: source.width, height: source.height })
}
