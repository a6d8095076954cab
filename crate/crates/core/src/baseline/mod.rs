//! Classical digital chain: block-DCT source codec, LDPC, Gray QAM.

mod bits;
mod chain;
mod dct;
mod ldpc;
mod qam;

pub use bits::{BitReader, Bitstream};
pub use chain::{
    ber_block, ber_point, calibrate_quality, chain_budget, deinterleave, interleave, interleaver, run_digital_chain,
    BerPoint, BlockStats, ChainBudget, ChainDiagnostics, ChainOutcome, DigitalChain, Modulation, DEFAULT_BP_ITERS,
    FAILURE_GRAY,
};
pub use dct::{dct2, dct_decode, dct_encode, idct2, CodecQuality, EncodedImage, BLOCK, HEADER_BITS};
pub use ldpc::{ldpc_build, ldpc_decode_bp, ldpc_encode, BpOutcome, LdpcCode, LLR_CAP};
pub use qam::{
    hard_decisions, qam_demodulate_llr, qam_demodulate_llr_varying, qam_modulate, qam_modulate_bits, Demapper,
    Modulated, QamConstellation,
};
