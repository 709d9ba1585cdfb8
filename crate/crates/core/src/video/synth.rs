//! Deterministic synthetic test clip.
//!
//! A horizontally drifting triangle-wave luma gradient with two dark
//! stretches where the picture is dimmed to an eighth of its brightness.

use crate::video::yuv::{YuvError, YuvFrame, YuvSequence};

/// Dark stretches as fractions of the clip length, `[start, end)`.
pub const DARK_INTERVALS: [(f64, f64); 2] = [(0.30, 0.35), (0.65, 0.725)];

const PERIOD: usize = 128;
const AMPLITUDE: usize = 100;

fn triangle(x: usize) -> usize {
    let p = x % PERIOD;
    let half = PERIOD / 2;
    let up = if p < half { p } else { PERIOD - p };
    up * AMPLITUDE / half
}

pub fn is_dark(frame: usize, n_frames: usize) -> bool {
    DARK_INTERVALS.iter().any(|&(a, b)| {
        let (a, b) = ((a * n_frames as f64) as usize, (b * n_frames as f64) as usize);
        (a..b).contains(&frame)
    })
}

pub fn synth_frame(t: usize, n_frames: usize, width: usize, height: usize) -> YuvFrame {
    let mut f = YuvFrame::filled(width, height, 0, 128, 128);
    let dark = is_dark(t, n_frames);
    for row in 0..height {
        let shade = 40 + row * 40 / height;
        for col in 0..width {
            let v = shade + triangle(col + t);
            f.y[row * width + col] = if dark { (v / 8) as u8 } else { v as u8 };
        }
    }
    let cw = width / 2;
    for row in 0..height / 2 {
        for col in 0..cw {
            f.u[row * cw + col] = 112 + (col * 32 / cw.max(1)) as u8;
        }
    }
    f
}

pub fn synth_sequence(n_frames: usize, width: usize, height: usize) -> Result<YuvSequence, YuvError> {
    let mut seq = YuvSequence::new(width, height)?;
    for t in 0..n_frames {
        seq.push(synth_frame(t, n_frames, width, height))?;
    }
    Ok(seq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::video::trace::{generate_trace, TraceParams};

    #[test]
    fn deterministic_and_sized() {
        let a = synth_sequence(5, 32, 16).unwrap();
        let b = synth_sequence(5, 32, 16).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_bytes().len(), 5 * YuvFrame::byte_len(32, 16));
        assert!(synth_sequence(0, 32, 16).unwrap().is_empty());
    }

    #[test]
    fn dark_frames_are_cheaper() {
        let seq = synth_sequence(200, 64, 32).unwrap();
        let t = generate_trace(&seq, &TraceParams::default()).unwrap();
        assert!(is_dark(60, 200) && !is_dark(59, 200) && is_dark(130, 200));
        // frame 60 is an I frame inside the first dark stretch
        assert!(t.entries[60].size < t.entries[30].size);
        assert!(t.entries[61].size < t.entries[31].size);
    }
}
