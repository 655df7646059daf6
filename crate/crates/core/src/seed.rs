//! Seed splitting.
//!
//! Every random stream in a run is derived from one master seed by
//! `derive_seed(master, stream, index)`: the stream tag and index are mixed
//! into the master with SplitMix64 finalisers, so streams are independent of
//! the order in which jobs are scheduled.

/// Stream tags used across the crate.
pub mod stream {
    pub const ABSENT_BACKGROUND: u64 = 1;
    pub const PRESENT_BACKGROUND: u64 = 2;
    pub const TEST_SPLIT: u64 = 3;
    pub const READER_TRAIN: u64 = 4;
    pub const MC_PERCEPTION: u64 = 5;
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(stream)).wrapping_add(index))
}
