//! Rate coding of input pixels.
//!
//! Poisson spikes come from a counter-based stream: ChaCha8 keyed by the run
//! seed, with the image index as stream id and `(t, pixel)` as the word
//! position. Any single draw can be reproduced in isolation, so results never
//! depend on how images are scheduled across workers.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    /// One Bernoulli spike per step with probability `pixel * max_rate`.
    Poisson,
    /// A steady analog current `pixel * max_rate` every step.
    ConstantCurrent,
}

const UNIT: f64 = 1.0 / (1u64 << 53) as f64;

#[inline]
fn unit_draw(x: u64) -> f64 {
    (x >> 11) as f64 * UNIT
}

#[inline]
fn word_pos(t: usize, pixel_index: usize) -> u128 {
    // each draw consumes two 32-bit words
    (((t as u128) << 32) | pixel_index as u128) << 1
}

/// Input drive of one pixel at timestep `t`: `0.0`/`1.0` for a Poisson
/// spike, or the analog current in constant-current mode.
pub fn encode_input(
    pixel: f64,
    t: usize,
    mode: InputMode,
    max_rate: f64,
    seed: u64,
    image_index: usize,
    pixel_index: usize,
) -> f64 {
    let p = pixel * max_rate;
    match mode {
        InputMode::ConstantCurrent => p,
        InputMode::Poisson => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(image_index as u64);
            rng.set_word_pos(word_pos(t, pixel_index));
            if unit_draw(rng.next_u64()) < p {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Encodes a whole image frame by frame; equivalent to calling
/// [`encode_input`] for every pixel.
pub struct FrameEncoder {
    rng: ChaCha8Rng,
    mode: InputMode,
    rates: Vec<f64>,
}

impl FrameEncoder {
    pub fn new(image: &[f64], mode: InputMode, max_rate: f64, seed: u64, image_index: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(image_index as u64);
        Self {
            rng,
            mode,
            rates: image.iter().map(|&p| p * max_rate).collect(),
        }
    }

    /// Appends the non-zero input events of timestep `t` in ascending pixel order.
    pub fn frame(&mut self, t: usize, events: &mut Vec<(usize, f64)>) {
        events.clear();
        match self.mode {
            InputMode::ConstantCurrent => {
                events.extend(
                    self.rates
                        .iter()
                        .enumerate()
                        .filter(|(_, &r)| r != 0.0)
                        .map(|(i, &r)| (i, r)),
                );
            }
            InputMode::Poisson => {
                self.rng.set_word_pos(word_pos(t, 0));
                for (i, &r) in self.rates.iter().enumerate() {
                    let u = unit_draw(self.rng.next_u64());
                    if u < r {
                        events.push((i, 1.0));
                    }
                }
            }
        }
    }
}
