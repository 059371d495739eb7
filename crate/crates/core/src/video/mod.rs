//! Raw video I/O, the GoP data model, and reconstruction quality metrics.

mod frame;
mod io;
mod metrics;

pub use frame::{concat_gops, segment_gops, Frame, Gop, CHANNELS, GOP_LEN};
pub use io::{
    decode_rgb24, decode_y4m, encode_rgb24, encode_y4m_444, load_raw_video, rgb_to_ycbcr, ycbcr_to_rgb,
    StreamMeta, VideoFormat, Y4mHeader,
};
pub use metrics::{
    boundary_flicker, boundary_flicker_with, consistency_delta, frame_set_distance, mse, psnr,
    psnr_from_mse, sequence_mse, FlickerNorm, QualityReport, PSNR_CAP_DB,
};
