//! Labeled random substreams derived from one root seed.
//!
//! Every random draw in a simulation comes from a stream identified by
//! `(root seed, purpose, trial, block)`, so two schemes that consume the same
//! truth see bitwise-identical realizations regardless of execution order.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SimRng = ChaCha8Rng;

/// Purpose of a random substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Stream {
    Pilots = 1,
    Placement = 2,
    Activity = 3,
    Channels = 4,
    Noise = 5,
    StateEvolution = 7,
    Probe = 8,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic generator for `(root, purpose, trial, block)`.
pub fn substream(root: u64, stream: Stream, trial: u64, block: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    let id = splitmix64(splitmix64(splitmix64(stream as u64) ^ trial) ^ block.rotate_left(32));
    rng.set_stream(id);
    rng
}

/// One draw from `CN(0, variance)`.
#[inline]
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}
