//! Row packetization of token matrices, the residual packet, and
//! receiver-side reassembly with the hybrid loss policy.

mod assembly;
mod packetize;
mod wire;

pub use assembly::{loss_policy, GopAssembly, LossAction, LossPolicyConfig};
pub use packetize::{
    dequantize, packetize_tokens, reassemble, residual_from_packet, residual_packet, MatrixAssembler,
    ReassemblyStats,
};
pub use wire::{
    BwReport, NackPacket, Packet, PacketKind, ResidualPacket, TokenPacket, MAGIC, RESIDUAL_FIXED_BYTES,
    TOKEN_FIXED_BYTES, VERSION,
};
