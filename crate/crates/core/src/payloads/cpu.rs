// SPDX-License-Identifier: Apache-2.0

//! Modeled ALU and the CPU self-test battery run against it.
//!
//! Flag semantics follow a 32-bit ARM-style core: C is carry-out for
//! additions and NOT borrow for subtractions.
// NOTE: representative battery, not a reproduction of any certified class-B
// CPU test library.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Flags {
    pub n: bool,
    pub z: bool,
    pub c: bool,
    pub v: bool,
}

impl Flags {
    pub const fn new(n: bool, z: bool, c: bool, v: bool) -> Self {
        Self { n, z, c, v }
    }
}

impl fmt::Display for Flags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bit = |b: bool, c: char| if b { c } else { '-' };
        write!(
            f,
            "{}{}{}{}",
            bit(self.n, 'N'),
            bit(self.z, 'Z'),
            bit(self.c, 'C'),
            bit(self.v, 'V')
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AluOp {
    Add,
    Adc,
    Sub,
    Sbc,
    And,
    Orr,
    Eor,
    Bic,
    Mvn,
    Lsl,
    Lsr,
    Asr,
    Ror,
    Mul,
}

/// Executes one operation. `carry_in` feeds ADC/SBC; logical ops keep C and V.
pub fn alu(op: AluOp, a: u32, b: u32, flags_in: Flags) -> (u32, Flags) {
    let nz = |r: u32, c: bool, v: bool| Flags {
        n: r & 0x8000_0000 != 0,
        z: r == 0,
        c,
        v,
    };
    let add_with_carry = |x: u32, y: u32, carry: bool| {
        let wide = u64::from(x) + u64::from(y) + u64::from(carry);
        let r = wide as u32;
        let overflow = ((x ^ r) & (y ^ r)) & 0x8000_0000 != 0;
        (r, nz(r, wide > u64::from(u32::MAX), overflow))
    };
    match op {
        AluOp::Add => add_with_carry(a, b, false),
        AluOp::Adc => add_with_carry(a, b, flags_in.c),
        AluOp::Sub => add_with_carry(a, !b, true),
        AluOp::Sbc => add_with_carry(a, !b, flags_in.c),
        AluOp::And => (a & b, nz(a & b, flags_in.c, flags_in.v)),
        AluOp::Orr => (a | b, nz(a | b, flags_in.c, flags_in.v)),
        AluOp::Eor => (a ^ b, nz(a ^ b, flags_in.c, flags_in.v)),
        AluOp::Bic => (a & !b, nz(a & !b, flags_in.c, flags_in.v)),
        AluOp::Mvn => (!a, nz(!a, flags_in.c, flags_in.v)),
        AluOp::Lsl => {
            let s = b & 0xFF;
            let (r, c) = match s {
                0 => (a, flags_in.c),
                1..=31 => (a << s, (a >> (32 - s)) & 1 != 0),
                32 => (0, a & 1 != 0),
                _ => (0, false),
            };
            (r, nz(r, c, flags_in.v))
        }
        AluOp::Lsr => {
            let s = b & 0xFF;
            let (r, c) = match s {
                0 => (a, flags_in.c),
                1..=31 => (a >> s, (a >> (s - 1)) & 1 != 0),
                32 => (0, a & 0x8000_0000 != 0),
                _ => (0, false),
            };
            (r, nz(r, c, flags_in.v))
        }
        AluOp::Asr => {
            let s = (b & 0xFF).min(32);
            let (r, c) = match s {
                0 => (a, flags_in.c),
                1..=31 => (((a as i32) >> s) as u32, (a >> (s - 1)) & 1 != 0),
                _ => {
                    let sign = a & 0x8000_0000 != 0;
                    (if sign { u32::MAX } else { 0 }, sign)
                }
            };
            (r, nz(r, c, flags_in.v))
        }
        AluOp::Ror => {
            let s = b & 0x1F;
            if b & 0xFF == 0 {
                (a, nz(a, flags_in.c, flags_in.v))
            } else {
                let r = a.rotate_right(s);
                (r, nz(r, r & 0x8000_0000 != 0, flags_in.v))
            }
        }
        AluOp::Mul => {
            let r = a.wrapping_mul(b);
            (r, nz(r, flags_in.c, flags_in.v))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AluCase {
    pub name: &'static str,
    pub op: AluOp,
    pub a: u32,
    pub b: u32,
    pub flags_in: Flags,
    pub result: u32,
    pub flags_out: Flags,
}

const CLEAR: Flags = Flags::new(false, false, false, false);
const CARRY: Flags = Flags::new(false, false, true, false);

/// Expected values computed by hand; cross-checked against wide integer
/// arithmetic in the tests.
pub const BATTERY: &[AluCase] = &[
    AluCase { name: "add signed overflow", op: AluOp::Add, a: 0x7FFF_FFFF, b: 1, flags_in: CLEAR, result: 0x8000_0000, flags_out: Flags::new(true, false, false, true) },
    AluCase { name: "add unsigned wrap", op: AluOp::Add, a: 0xFFFF_FFFF, b: 1, flags_in: CLEAR, result: 0, flags_out: Flags::new(false, true, true, false) },
    AluCase { name: "add both overflow", op: AluOp::Add, a: 0x8000_0000, b: 0x8000_0000, flags_in: CLEAR, result: 0, flags_out: Flags::new(false, true, true, true) },
    AluCase { name: "add plain", op: AluOp::Add, a: 0x1234_5678, b: 0x1111_1111, flags_in: CLEAR, result: 0x2345_6789, flags_out: CLEAR },
    AluCase { name: "adc carry chain", op: AluOp::Adc, a: 0xFFFF_FFFE, b: 1, flags_in: CARRY, result: 0, flags_out: Flags::new(false, true, true, false) },
    AluCase { name: "sub borrow", op: AluOp::Sub, a: 0, b: 1, flags_in: CLEAR, result: 0xFFFF_FFFF, flags_out: Flags::new(true, false, false, false) },
    AluCase { name: "sub signed overflow", op: AluOp::Sub, a: 0x8000_0000, b: 1, flags_in: CLEAR, result: 0x7FFF_FFFF, flags_out: Flags::new(false, false, true, true) },
    AluCase { name: "sub equal", op: AluOp::Sub, a: 5, b: 5, flags_in: CLEAR, result: 0, flags_out: Flags::new(false, true, true, false) },
    AluCase { name: "sbc with borrow", op: AluOp::Sbc, a: 10, b: 3, flags_in: CLEAR, result: 6, flags_out: CARRY },
    AluCase { name: "and", op: AluOp::And, a: 0xF0F0_F0F0, b: 0x0FF0_0FF0, flags_in: CLEAR, result: 0x00F0_00F0, flags_out: CLEAR },
    AluCase { name: "orr", op: AluOp::Orr, a: 0xF0F0_F0F0, b: 0x0F0F_0F0F, flags_in: CLEAR, result: 0xFFFF_FFFF, flags_out: Flags::new(true, false, false, false) },
    AluCase { name: "eor self", op: AluOp::Eor, a: 0xAAAA_AAAA, b: 0xAAAA_AAAA, flags_in: CLEAR, result: 0, flags_out: Flags::new(false, true, false, false) },
    AluCase { name: "bic", op: AluOp::Bic, a: 0xFFFF_FFFF, b: 0x0000_FFFF, flags_in: CLEAR, result: 0xFFFF_0000, flags_out: Flags::new(true, false, false, false) },
    AluCase { name: "mvn", op: AluOp::Mvn, a: 0, b: 0, flags_in: CLEAR, result: 0xFFFF_FFFF, flags_out: Flags::new(true, false, false, false) },
    AluCase { name: "lsl carry out", op: AluOp::Lsl, a: 0x8000_0001, b: 1, flags_in: CLEAR, result: 2, flags_out: CARRY },
    AluCase { name: "lsr carry out", op: AluOp::Lsr, a: 3, b: 1, flags_in: CLEAR, result: 1, flags_out: CARRY },
    AluCase { name: "asr sign fill", op: AluOp::Asr, a: 0x8000_0000, b: 4, flags_in: CLEAR, result: 0xF800_0000, flags_out: Flags::new(true, false, false, false) },
    AluCase { name: "ror wrap", op: AluOp::Ror, a: 1, b: 1, flags_in: CLEAR, result: 0x8000_0000, flags_out: Flags::new(true, false, true, false) },
    AluCase { name: "mul low word", op: AluOp::Mul, a: 0x0001_0001, b: 0x0001_0001, flags_in: CLEAR, result: 0x0002_0001, flags_out: CLEAR },
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CpuFailure {
    Alu {
        case: &'static str,
        expected: (u32, Flags),
        found: (u32, Flags),
    },
    Register {
        index: usize,
        expected: u32,
        found: u32,
    },
}

impl fmt::Display for CpuFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CpuFailure::Alu {
                case,
                expected,
                found,
            } => write!(
                f,
                "ALU case `{case}`: expected {:#010x} {}, got {:#010x} {}",
                expected.0, expected.1, found.0, found.1
            ),
            CpuFailure::Register {
                index,
                expected,
                found,
            } => write!(f, "register r{index}: expected {expected:#010x}, got {found:#010x}"),
        }
    }
}

/// General-purpose registers exercised by the move round trip (r0..r12).
pub const GP_REGISTERS: usize = 13;

fn register_pattern(i: usize) -> u32 {
    0x0101_0101u32.wrapping_mul(i as u32 + 1) ^ 0xA5A5_0000
}

/// Runs the battery. `glitch` selects a case whose result gets one bit
/// flipped, modeling a late-arriving ALU output.
pub fn cpu_test(registers: &mut [u32; 16], glitch: Option<(usize, u8)>) -> Result<(), CpuFailure> {
    for (index, case) in BATTERY.iter().enumerate() {
        let (mut result, flags) = alu(case.op, case.a, case.b, case.flags_in);
        if let Some((target, bit)) = glitch {
            if target % BATTERY.len() == index {
                result ^= 1 << (bit % 32);
            }
        }
        if (result, flags) != (case.result, case.flags_out) {
            return Err(CpuFailure::Alu {
                case: case.name,
                expected: (case.result, case.flags_out),
                found: (result, flags),
            });
        }
    }

    // Rotate r0..r12 by one position through register moves.
    for (i, r) in registers.iter_mut().take(GP_REGISTERS).enumerate() {
        *r = register_pattern(i);
    }
    let saved = registers[GP_REGISTERS - 1];
    for i in (1..GP_REGISTERS).rev() {
        registers[i] = registers[i - 1];
    }
    registers[0] = saved;
    for (i, &found) in registers.iter().take(GP_REGISTERS).enumerate() {
        let expected = register_pattern((i + GP_REGISTERS - 1) % GP_REGISTERS);
        if found != expected {
            return Err(CpuFailure::Register {
                index: i,
                expected,
                found,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Independent wide-integer model of the arithmetic cases.
    fn reference(case: &AluCase) -> Option<(u32, Flags)> {
        let (a, b) = (case.a, case.b);
        let (sa, sb) = (i64::from(a as i32), i64::from(b as i32));
        let (wide_u, wide_s) = match case.op {
            AluOp::Add => (u64::from(a) + u64::from(b), sa + sb),
            AluOp::Adc => {
                let c = u64::from(case.flags_in.c);
                (u64::from(a) + u64::from(b) + c, sa + sb + c as i64)
            }
            AluOp::Sub => (u64::from(a).wrapping_sub(u64::from(b)), sa - sb),
            AluOp::Sbc => {
                let borrow = u64::from(!case.flags_in.c);
                (
                    u64::from(a).wrapping_sub(u64::from(b)).wrapping_sub(borrow),
                    sa - sb - borrow as i64,
                )
            }
            _ => return None,
        };
        let r = wide_u as u32;
        let c = match case.op {
            AluOp::Add | AluOp::Adc => wide_u > u64::from(u32::MAX),
            _ => {
                let borrow = u64::from(case.op == AluOp::Sbc && !case.flags_in.c);
                u64::from(a) >= u64::from(b) + borrow
            }
        };
        let v = wide_s != i64::from(r as i32);
        Some((r, Flags::new(r >> 31 == 1, r == 0, c, v)))
    }

    #[test]
    fn battery_expectations_match_wide_model() {
        for case in BATTERY {
            if let Some(expected) = reference(case) {
                assert_eq!(expected, (case.result, case.flags_out), "{}", case.name);
            }
        }
    }

    #[test]
    fn signed_overflow_boundary() {
        let (r, f) = alu(AluOp::Add, 0x7FFF_FFFF, 1, Flags::default());
        assert_eq!(r, 0x8000_0000);
        assert!(f.v && f.n && !f.c && !f.z);
    }

    #[test]
    fn full_battery_passes() {
        let mut regs = [0u32; 16];
        assert_eq!(cpu_test(&mut regs, None), Ok(()));
    }

    #[test]
    fn every_glitch_is_caught() {
        for target in 0..BATTERY.len() {
            for bit in 0..32 {
                let mut regs = [0u32; 16];
                assert!(cpu_test(&mut regs, Some((target, bit))).is_err());
            }
        }
    }

    proptest! {
        #[test]
        fn xor_self_is_zero(x: u32) {
            let (r, f) = alu(AluOp::Eor, x, x, Flags::default());
            prop_assert_eq!(r, 0);
            prop_assert!(f.z);
        }

        #[test]
        fn add_sub_match_wide_model(a: u32, b: u32, carry: bool) {
            for op in [AluOp::Add, AluOp::Adc, AluOp::Sub, AluOp::Sbc] {
                let flags_in = Flags { c: carry, ..Flags::default() };
                let case = AluCase { name: "p", op, a, b, flags_in, result: 0, flags_out: Flags::default() };
                prop_assert_eq!(Some(alu(op, a, b, flags_in)), reference(&case));
            }
        }
    }
}
