//! Per-segment send and receive timestamp logs.

use std::collections::HashSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::sim::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogRecord {
    pub time: SimTime,
    pub packet_uid: u64,
    pub frame_id: u32,
    pub segment_index: u32,
}

#[derive(Debug, Error, PartialEq)]
#[error("log line {line}: {msg}")]
pub struct LogParseError {
    pub line: usize,
    pub msg: String,
}

/// Ordered segment records. At most one record per `(frame_id, segment_index)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SegmentLog {
    records: Vec<LogRecord>,
    seen: HashSet<(u32, u32)>,
}

pub type SenderLog = SegmentLog;
pub type ReceiverLog = SegmentLog;

impl SegmentLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record unless that segment is already logged. Returns whether it was added.
    pub fn record(&mut self, rec: LogRecord) -> bool {
        if !self.seen.insert((rec.frame_id, rec.segment_index)) {
            return false;
        }
        self.records.push(rec);
        true
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn contains(&self, frame_id: u32, segment_index: u32) -> bool {
        self.seen.contains(&(frame_id, segment_index))
    }

    /// Copy without the record at `index`.
    pub fn without(&self, index: usize) -> SegmentLog {
        let mut out = SegmentLog::new();
        for (i, r) in self.records.iter().enumerate() {
            if i != index {
                out.record(*r);
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.records.len() * 32);
        for r in &self.records {
            let _ = writeln!(s, "{} {} {} {}", r.time.fmt_decimals(9), r.packet_uid, r.frame_id, r.segment_index);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, LogParseError> {
        let mut log = SegmentLog::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |msg: &str| LogParseError { line: i + 1, msg: msg.to_string() };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(err("expected 4 fields"));
            }
            let rec = LogRecord {
                time: SimTime::parse_secs(f[0]).ok_or_else(|| err("bad time"))?,
                packet_uid: f[1].parse().map_err(|_| err("bad packet uid"))?,
                frame_id: f[2].parse().map_err(|_| err("bad frame id"))?,
                segment_index: f[3].parse().map_err(|_| err("bad segment index"))?,
            };
            if !log.record(rec) {
                return Err(err("duplicate segment"));
            }
        }
        Ok(log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t_ms: u64, uid: u64, f: u32, s: u32) -> LogRecord {
        LogRecord { time: SimTime::from_millis(t_ms), packet_uid: uid, frame_id: f, segment_index: s }
    }

    #[test]
    fn duplicates_are_ignored() {
        let mut log = SegmentLog::new();
        assert!(log.record(rec(1, 1, 0, 0)));
        assert!(!log.record(rec(2, 1, 0, 0)));
        assert_eq!(log.len(), 1);
        assert_eq!(log.records()[0].time, SimTime::from_millis(1));
    }

    #[test]
    fn out_of_order_segments_keep_arrival_order() {
        let mut log = SegmentLog::new();
        log.record(rec(5, 2, 0, 1));
        log.record(rec(7, 1, 0, 0));
        let text = log.to_text();
        assert_eq!(text, "0.005000000 2 0 1\n0.007000000 1 0 0\n");
        assert_eq!(SegmentLog::parse(&text).unwrap(), log);
    }

    #[test]
    fn empty_log() {
        assert!(SegmentLog::parse("").unwrap().is_empty());
        assert_eq!(SegmentLog::new().to_text(), "");
    }

    #[test]
    fn bad_lines_rejected() {
        assert!(SegmentLog::parse("1.0 2 3\n").is_err());
        assert!(SegmentLog::parse("1.0 1 0 0\n2.0 2 0 0\n").is_err());
    }
}
