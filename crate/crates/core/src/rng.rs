//! Seeded random streams.
//!
//! Every random draw in the simulator comes from a [`SimRng`] built by
//! [`stream_rng`]. A run is identified by one master seed; independent
//! pieces of work (scan points, time bins, partitions of a gate run) each
//! take their own stream index, so their results do not depend on the
//! order they are evaluated in.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn stream_rng(master_seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}
