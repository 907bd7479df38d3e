//! Seed derivation for replicas and independent random streams.

use serde::{Deserialize, Serialize};

use crate::env::normal::{mix64, stream_bits, stream_key};

/// Purpose of a derived random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamTag {
    Environment,
    Dynamics,
    PointProcess,
    KProcess,
    Visits,
    Renewal,
}

impl StreamTag {
    fn code(self) -> u64 {
        match self {
            StreamTag::Environment => 0x454E_5649,
            StreamTag::Dynamics => 0x4459_4E41,
            StreamTag::PointProcess => 0x5050_5052,
            StreamTag::KProcess => 0x4B50_524F,
            StreamTag::Visits => 0x5649_5349,
            StreamTag::Renewal => 0x5245_4E45,
        }
    }
}

/// Mixes `(master, index, tag)` into a 64-bit seed.
///
/// For fixed `master` and `tag` the map `index -> seed` is a bijection, so
/// derived seeds never collide across replicas.
pub fn seed_derivation(master: u64, index: u64, tag: StreamTag) -> u64 {
    stream_bits(stream_key(mix64(master), tag.code()), index)
}
