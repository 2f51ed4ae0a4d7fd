use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Design;

/// Independent stream role within one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRole {
    Covariates = 1,
    Outcomes = 2,
    Assignment = 3,
    Policy = 4,
}

/// ChaCha8 keyed by `(master seed, design, replication)`; the role selects
/// the 64-bit stream. Generation order inside one stream never depends on
/// the thread a replication runs on.
pub fn substream(master_seed: u64, design: Design, rep: u64, role: StreamRole) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&(design as u64).to_le_bytes());
    key[16..24].copy_from_slice(&rep.to_le_bytes());
    key[24..].copy_from_slice(b"snaipw\x00\x01");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(role as u64);
    rng
}

/// Stream for quantities computed once per run rather than per replication.
pub fn fixed_stream(seed: u64, tag: &[u8; 8]) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[24..].copy_from_slice(tag);
    ChaCha8Rng::from_seed(key)
}
