// SPDX-License-Identifier: Apache-2.0

//! Known flash image and memory layout shared by the payloads.
//!
//! Flash layout (byte offsets):
//!
//! | offset  | length | content                                   |
//! |---------|--------|-------------------------------------------|
//! | 0x0000  | 0x400  | seeded pattern read by the flash payload  |
//! | 0x0400  | 0x40   | matrix A, row-major `i8`                  |
//! | 0x0440  | 0x40   | matrix B, row-major `i8`                  |
//! | 0x0480  | 0x10   | MD5 of the pattern region                 |
//! | 0x0490  | 0x10   | MD5 of the RAM read/write pattern         |
//! | 0x04A0  | 0x10   | det(A·B) as little-endian `i128`          |
//!
//! The remainder is erased flash (0xFF).

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::{self, SquareMatrix, DIM, ENTRY_BOUND};
use super::md5::{md5, Digest};
use super::PayloadError;

pub const PATTERN_BASE: usize = 0x0000;
pub const PATTERN_LEN: usize = 0x400;
pub const MATRIX_A_BASE: usize = 0x400;
pub const MATRIX_B_BASE: usize = 0x440;
pub const MATRIX_BYTES: usize = DIM * DIM;
pub const PATTERN_DIGEST_BASE: usize = 0x480;
pub const RAM_DIGEST_BASE: usize = 0x490;
pub const DETERMINANT_BASE: usize = 0x4A0;
pub const FLASH_MIN_BYTES: usize = 0x4B0;

/// SRAM test regions.
pub const MARCH_BASE: usize = 0x000;
pub const MARCH_LEN: usize = 0x200;
pub const RAM_RW_BASE: usize = 0x200;
pub const RAM_RW_LEN: usize = 0x400;
pub const MATRIX_SRAM_BASE: usize = 0x600;
/// A and B as bytes, then the product as little-endian `i32`.
pub const MATRIX_SRAM_LEN: usize = 2 * MATRIX_BYTES + 4 * MATRIX_BYTES;
pub const SRAM_MIN_BYTES: usize = 0x1000;

const _: () = {
    assert!(MARCH_BASE + MARCH_LEN <= RAM_RW_BASE);
    assert!(RAM_RW_BASE + RAM_RW_LEN <= MATRIX_SRAM_BASE);
    assert!(MATRIX_SRAM_BASE + MATRIX_SRAM_LEN <= SRAM_MIN_BYTES);
};

pub fn ram_pattern_byte(i: usize) -> u8 {
    ((i * 151 + 17) % 256) as u8
}

pub fn ram_pattern(len: usize) -> Vec<u8> {
    (0..len).map(ram_pattern_byte).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlashImage {
    pub seed: u64,
    pub bytes: Arc<[u8]>,
    pub matrix_a: SquareMatrix,
    pub matrix_b: SquareMatrix,
    pub determinant: i128,
}

fn random_matrix(rng: &mut ChaCha8Rng) -> SquareMatrix {
    (0..DIM)
        .map(|_| {
            (0..DIM)
                .map(|_| i128::from(rng.random_range(-ENTRY_BOUND..=ENTRY_BOUND)))
                .collect()
        })
        .collect()
}

/// Draws a non-singular matrix; the product determinant must stay in range.
fn nonsingular_matrix(rng: &mut ChaCha8Rng) -> SquareMatrix {
    loop {
        let m = random_matrix(rng);
        if matches!(matrix::determinant(&m), Some(d) if d != 0) {
            return m;
        }
    }
}

impl FlashImage {
    pub fn generate(seed: u64, size: usize) -> Result<Self, PayloadError> {
        if size < FLASH_MIN_BYTES {
            return Err(PayloadError::FlashTooSmall {
                size,
                required: FLASH_MIN_BYTES,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bytes = vec![0xFFu8; size];
        rng.fill(&mut bytes[PATTERN_BASE..PATTERN_BASE + PATTERN_LEN]);

        let (a, b, det) = loop {
            let a = nonsingular_matrix(&mut rng);
            let b = nonsingular_matrix(&mut rng);
            if let Some(det) = matrix::determinant(&matrix::multiply(&a, &b)) {
                break (a, b, det);
            }
        };
        for (base, m) in [(MATRIX_A_BASE, &a), (MATRIX_B_BASE, &b)] {
            for (k, v) in m.iter().flatten().enumerate() {
                bytes[base + k] = *v as i8 as u8;
            }
        }
        let pattern_digest = md5(&bytes[PATTERN_BASE..PATTERN_BASE + PATTERN_LEN]);
        bytes[PATTERN_DIGEST_BASE..PATTERN_DIGEST_BASE + 16].copy_from_slice(&pattern_digest);
        bytes[RAM_DIGEST_BASE..RAM_DIGEST_BASE + 16].copy_from_slice(&md5(&ram_pattern(RAM_RW_LEN)));
        bytes[DETERMINANT_BASE..DETERMINANT_BASE + 16].copy_from_slice(&det.to_le_bytes());

        Ok(Self {
            seed,
            bytes: Arc::from(bytes),
            matrix_a: a,
            matrix_b: b,
            determinant: det,
        })
    }

    pub fn pattern(&self) -> &[u8] {
        &self.bytes[PATTERN_BASE..PATTERN_BASE + PATTERN_LEN]
    }

    pub fn pattern_digest(&self) -> Digest {
        read_digest(&self.bytes, PATTERN_DIGEST_BASE)
    }

    pub fn ram_digest(&self) -> Digest {
        read_digest(&self.bytes, RAM_DIGEST_BASE)
    }
}

pub(crate) fn read_digest(bytes: &[u8], base: usize) -> Digest {
    bytes[base..base + 16].try_into().unwrap()
}

pub(crate) fn read_i128(bytes: &[u8], base: usize) -> i128 {
    i128::from_le_bytes(bytes[base..base + 16].try_into().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let a = FlashImage::generate(7, 0x2000).unwrap();
        let b = FlashImage::generate(7, 0x2000).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.bytes, FlashImage::generate(8, 0x2000).unwrap().bytes);
    }

    #[test]
    fn stored_references_are_consistent() {
        let img = FlashImage::generate(3, FLASH_MIN_BYTES).unwrap();
        assert_eq!(img.pattern_digest(), md5(img.pattern()));
        assert_eq!(img.ram_digest(), md5(&ram_pattern(RAM_RW_LEN)));
        assert_eq!(read_i128(&img.bytes, DETERMINANT_BASE), img.determinant);
        assert_ne!(img.determinant, 0);
        for (base, m) in [(MATRIX_A_BASE, &img.matrix_a), (MATRIX_B_BASE, &img.matrix_b)] {
            for (k, v) in m.iter().flatten().enumerate() {
                assert_eq!(img.bytes[base + k] as i8 as i128, *v);
                assert!((-8..=8).contains(v));
            }
        }
    }

    #[test]
    fn too_small_flash_rejected() {
        assert!(FlashImage::generate(1, FLASH_MIN_BYTES - 1).is_err());
    }
}
