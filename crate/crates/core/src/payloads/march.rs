// SPDX-License-Identifier: Apache-2.0

//! March C- over a byte-wide memory with solid 0x00 / 0xFF backgrounds.

use std::fmt;

use crate::device::WordMemory;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Read(u8),
    Write(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MarchElement {
    pub order: Order,
    pub ops: &'static [Op],
}

const ZERO: u8 = 0x00;
const ONE: u8 = 0xFF;

/// ⇑(w0); ⇑(r0,w1); ⇑(r1,w0); ⇓(r0,w1); ⇓(r1,w0); ⇓(r0)
pub const MARCH_C_MINUS: [MarchElement; 6] = [
    MarchElement {
        order: Order::Up,
        ops: &[Op::Write(ZERO)],
    },
    MarchElement {
        order: Order::Up,
        ops: &[Op::Read(ZERO), Op::Write(ONE)],
    },
    MarchElement {
        order: Order::Up,
        ops: &[Op::Read(ONE), Op::Write(ZERO)],
    },
    MarchElement {
        order: Order::Down,
        ops: &[Op::Read(ZERO), Op::Write(ONE)],
    },
    MarchElement {
        order: Order::Down,
        ops: &[Op::Read(ONE), Op::Write(ZERO)],
    },
    MarchElement {
        order: Order::Down,
        ops: &[Op::Read(ZERO)],
    },
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MarchFailure {
    pub address: usize,
    pub element: usize,
    pub expected: u8,
    pub found: u8,
}

impl fmt::Display for MarchFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "march element {} at address {:#x}: expected {:#04x}, read {:#04x}",
            self.element, self.address, self.expected, self.found
        )
    }
}

/// Runs March C-; stops at the first mismatching read.
pub fn march_c<M: WordMemory + ?Sized>(memory: &mut M) -> Result<(), MarchFailure> {
    run_march(memory, &MARCH_C_MINUS)
}

pub fn run_march<M: WordMemory + ?Sized>(
    memory: &mut M,
    elements: &[MarchElement],
) -> Result<(), MarchFailure> {
    let n = memory.len();
    for (index, element) in elements.iter().enumerate() {
        for step in 0..n {
            let address = match element.order {
                Order::Up => step,
                Order::Down => n - 1 - step,
            };
            for op in element.ops {
                match *op {
                    Op::Write(v) => memory.write(address, v),
                    Op::Read(expected) => {
                        let found = memory.read(address);
                        if found != expected {
                            return Err(MarchFailure {
                                address,
                                element: index,
                                expected,
                                found,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(())
}
