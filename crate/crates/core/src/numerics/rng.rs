use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded random stream. Child streams are derived from `(seed, label)` so
/// that independent consumers never share draws.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives an independent stream keyed by `label`. Depends only on the
    /// seed this stream was created with, never on how much of it was consumed.
    pub fn child(&self, label: &str) -> RngStream {
        RngStream::new(splitmix64(self.seed ^ fnv1a(label.as_bytes()).rotate_left(17)))
    }

    /// Same as [`child`](Self::child) with an additional integer key.
    pub fn child_indexed(&self, label: &str, index: u64) -> RngStream {
        let keyed = splitmix64(fnv1a(label.as_bytes()) ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)));
        RngStream::new(splitmix64(self.seed ^ keyed))
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}
