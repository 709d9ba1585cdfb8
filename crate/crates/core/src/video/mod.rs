pub mod logs;
pub mod metrics;
pub mod reconstruct;
pub mod synth;
pub mod trace;
pub mod yuv;

pub use logs::{LogRecord, ReceiverLog, SegmentLog, SenderLog};
pub use metrics::{
    delay_and_loss, extractability, jitter_series, moving_average, psnr_frame, psnr_sequence, MetricSeries,
    MetricsError, PsnrConfig,
};
pub use reconstruct::{reconstruct, Concealment, FrameStatus, OutputFrame, ReconstructError, ReconstructedVideo};
pub use trace::{generate_trace, trace_from_frames, FrameType, SizeModel, TraceEntry, TraceParams, VideoTrace};
pub use yuv::{load_yuv, store_yuv, YuvError, YuvFrame, YuvSequence};
