//! Per-replication random streams derived from one master seed.

/// What a derived stream is used for. Distinct roles never share a stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StreamRole {
    Sample = 1,
    Perturbation = 2,
    /// Reserved for resampling schemes; not drawn from by the built-in runs.
    Bootstrap = 3,
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, replication: u64, role: StreamRole) -> u64 {
    let a = splitmix64(master);
    let b = splitmix64(a ^ replication.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    splitmix64(b ^ (role as u64).wrapping_mul(0xA076_1D64_78BD_642F))
}
