// SPDX-License-Identifier: Apache-2.0

//! Byte-wide simulated memories with single-cell fault models.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::DeviceError;

/// Anything a march or pattern test can walk over.
pub trait WordMemory {
    fn len(&self) -> usize;
    fn read(&mut self, address: usize) -> u8;
    fn write(&mut self, address: usize, value: u8);

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One bit of one word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitCell {
    pub address: usize,
    pub bit: u8,
}

impl BitCell {
    pub fn new(address: usize, bit: u8) -> Self {
        Self { address, bit }
    }

    fn mask(&self) -> u8 {
        1 << self.bit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edge {
    Rising,
    Falling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingTrigger {
    Rising,
    Falling,
    Any,
}

impl CouplingTrigger {
    fn fires(self, before: bool, after: bool) -> bool {
        match self {
            CouplingTrigger::Rising => !before && after,
            CouplingTrigger::Falling => before && !after,
            CouplingTrigger::Any => before != after,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MemoryFault {
    StuckAt0 { cell: BitCell },
    StuckAt1 { cell: BitCell },
    /// The cell cannot make the `blocked` transition.
    Transition { cell: BitCell, blocked: Edge },
    /// Accesses to `address` land on `alias`.
    AddressDecoder { address: usize, alias: usize },
    /// A transition of the aggressor inverts the victim.
    Coupling {
        aggressor: BitCell,
        victim: BitCell,
        trigger: CouplingTrigger,
    },
}

impl MemoryFault {
    pub fn kind_name(&self) -> &'static str {
        match self {
            MemoryFault::StuckAt0 { .. } => "stuck-at-0",
            MemoryFault::StuckAt1 { .. } => "stuck-at-1",
            MemoryFault::Transition { .. } => "transition",
            MemoryFault::AddressDecoder { .. } => "address-decoder",
            MemoryFault::Coupling { .. } => "coupling",
        }
    }

    pub(crate) fn validate(&self, size: usize) -> Result<(), DeviceError> {
        let check_cell = |cell: &BitCell| {
            if cell.address >= size || cell.bit >= 8 {
                Err(DeviceError::FaultOutOfBounds {
                    address: cell.address,
                    bit: cell.bit,
                    size,
                })
            } else {
                Ok(())
            }
        };
        match self {
            MemoryFault::StuckAt0 { cell }
            | MemoryFault::StuckAt1 { cell }
            | MemoryFault::Transition { cell, .. } => check_cell(cell),
            MemoryFault::AddressDecoder { address, alias } => {
                check_cell(&BitCell::new(*address, 0))?;
                check_cell(&BitCell::new(*alias, 0))?;
                if address == alias {
                    return Err(DeviceError::InvalidFault(
                        "address decoder alias must differ from the address".into(),
                    ));
                }
                Ok(())
            }
            MemoryFault::Coupling {
                aggressor, victim, ..
            } => {
                check_cell(aggressor)?;
                check_cell(victim)?;
                if aggressor.address == victim.address {
                    return Err(DeviceError::InvalidFault(
                        "coupling aggressor and victim must be distinct addresses".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

/// Volatile RAM. Power-on content is all zeros; faults model the silicon
/// and survive power cycles.
#[derive(Debug, Clone, PartialEq)]
pub struct Sram {
    cells: Vec<u8>,
    faults: Vec<MemoryFault>,
}

impl Sram {
    pub fn new(size: usize) -> Self {
        Self {
            cells: vec![0; size],
            faults: Vec::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.cells.len()
    }

    pub fn faults(&self) -> &[MemoryFault] {
        &self.faults
    }

    pub fn inject(&mut self, fault: MemoryFault) -> Result<(), DeviceError> {
        fault.validate(self.cells.len())?;
        self.faults.push(fault);
        self.apply_stuck_bits_to_storage();
        Ok(())
    }

    pub fn clear_faults(&mut self) {
        self.faults.clear();
    }

    pub fn power_on(&mut self) {
        self.cells.fill(0);
        self.apply_stuck_bits_to_storage();
    }

    fn apply_stuck_bits_to_storage(&mut self) {
        for fault in &self.faults {
            match fault {
                MemoryFault::StuckAt0 { cell } => self.cells[cell.address] &= !cell.mask(),
                MemoryFault::StuckAt1 { cell } => self.cells[cell.address] |= cell.mask(),
                _ => {}
            }
        }
    }

    fn decode(&self, address: usize) -> usize {
        for fault in &self.faults {
            if let MemoryFault::AddressDecoder { address: a, alias } = fault {
                if *a == address {
                    return *alias;
                }
            }
        }
        address
    }

    pub fn read(&self, address: usize) -> u8 {
        if self.faults.is_empty() {
            return self.cells[address];
        }
        self.cells[self.decode(address)]
    }

    pub fn write(&mut self, address: usize, value: u8) {
        if self.faults.is_empty() {
            self.cells[address] = value;
            return;
        }
        let physical = self.decode(address);
        let before = self.cells[physical];
        let mut after = value;
        for fault in &self.faults {
            match fault {
                MemoryFault::StuckAt0 { cell } if cell.address == physical => after &= !cell.mask(),
                MemoryFault::StuckAt1 { cell } if cell.address == physical => after |= cell.mask(),
                MemoryFault::Transition { cell, blocked } if cell.address == physical => {
                    let m = cell.mask();
                    let was = before & m != 0;
                    let wants = after & m != 0;
                    let blocked_edge = match blocked {
                        Edge::Rising => !was && wants,
                        Edge::Falling => was && !wants,
                    };
                    if blocked_edge {
                        after = (after & !m) | (before & m);
                    }
                }
                _ => {}
            }
        }
        self.cells[physical] = after;
        let victims: Vec<BitCell> = self
            .faults
            .iter()
            .filter_map(|fault| match fault {
                MemoryFault::Coupling {
                    aggressor,
                    victim,
                    trigger,
                } if aggressor.address == physical => {
                    let m = aggressor.mask();
                    trigger.fires(before & m != 0, after & m != 0).then_some(*victim)
                }
                _ => None,
            })
            .collect();
        for victim in victims {
            self.flip(victim);
        }
    }

    fn flip(&mut self, cell: BitCell) {
        let m = cell.mask();
        let stuck = self.faults.iter().any(|f| {
            matches!(f, MemoryFault::StuckAt0 { cell: c } | MemoryFault::StuckAt1 { cell: c } if *c == cell)
        });
        if !stuck {
            self.cells[cell.address] ^= m;
        }
    }

    pub fn region(&mut self, base: usize, len: usize) -> Result<SramRegion<'_>, DeviceError> {
        if base.checked_add(len).is_none_or(|end| end > self.cells.len()) {
            return Err(DeviceError::RegionOutOfBounds {
                base,
                len,
                size: self.cells.len(),
            });
        }
        Ok(SramRegion {
            sram: self,
            base,
            len,
        })
    }
}

impl WordMemory for Sram {
    fn len(&self) -> usize {
        self.cells.len()
    }

    fn read(&mut self, address: usize) -> u8 {
        Sram::read(self, address)
    }

    fn write(&mut self, address: usize, value: u8) {
        Sram::write(self, address, value)
    }
}

/// A window onto part of an [`Sram`], addressed from zero.
#[derive(Debug)]
pub struct SramRegion<'a> {
    sram: &'a mut Sram,
    base: usize,
    len: usize,
}

impl SramRegion<'_> {
    pub fn base(&self) -> usize {
        self.base
    }
}

impl WordMemory for SramRegion<'_> {
    fn len(&self) -> usize {
        self.len
    }

    fn read(&mut self, address: usize) -> u8 {
        assert!(address < self.len, "region read out of bounds");
        self.sram.read(self.base + address)
    }

    fn write(&mut self, address: usize, value: u8) {
        assert!(address < self.len, "region write out of bounds");
        self.sram.write(self.base + address, value)
    }
}

/// Read-only program/data flash.
#[derive(Debug, Clone, PartialEq)]
pub struct Flash {
    image: Arc<[u8]>,
}

impl Flash {
    pub fn new(image: Arc<[u8]>) -> Self {
        Self { image }
    }

    pub fn size(&self) -> usize {
        self.image.len()
    }

    pub fn read(&self, address: usize) -> u8 {
        self.image[address]
    }

    pub fn slice(&self, base: usize, len: usize) -> Option<&[u8]> {
        self.image.get(base..base.checked_add(len)?)
    }

    pub fn image(&self) -> &Arc<[u8]> {
        &self.image
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ideal_ram_identity() {
        let mut ram = Sram::new(64);
        for a in 0..64 {
            ram.write(a, (a * 7 + 3) as u8);
        }
        for a in 0..64 {
            assert_eq!(ram.read(a), (a * 7 + 3) as u8);
        }
    }

    #[test]
    fn stuck_at_zero_masks_bit() {
        let mut ram = Sram::new(16);
        ram.inject(MemoryFault::StuckAt0 {
            cell: BitCell::new(5, 3),
        })
        .unwrap();
        ram.write(5, 0xFF);
        assert_eq!(ram.read(5), 0xF7);
        ram.write(4, 0xFF);
        assert_eq!(ram.read(4), 0xFF);
    }

    #[test]
    fn stuck_at_one_visible_after_power_on() {
        let mut ram = Sram::new(16);
        ram.inject(MemoryFault::StuckAt1 {
            cell: BitCell::new(2, 0),
        })
        .unwrap();
        ram.power_on();
        assert_eq!(ram.read(2), 1);
        ram.write(2, 0);
        assert_eq!(ram.read(2), 1);
    }

    #[test]
    fn transition_fault_blocks_one_edge() {
        let mut ram = Sram::new(8);
        ram.inject(MemoryFault::Transition {
            cell: BitCell::new(1, 7),
            blocked: Edge::Rising,
        })
        .unwrap();
        ram.write(1, 0x80);
        assert_eq!(ram.read(1), 0x00);
        ram.write(1, 0x01);
        assert_eq!(ram.read(1), 0x01);

        let mut ram = Sram::new(8);
        ram.inject(MemoryFault::Transition {
            cell: BitCell::new(1, 0),
            blocked: Edge::Falling,
        })
        .unwrap();
        ram.write(1, 0x01);
        ram.write(1, 0x00);
        assert_eq!(ram.read(1), 0x01);
    }

    #[test]
    fn address_decoder_aliases() {
        let mut ram = Sram::new(16);
        ram.inject(MemoryFault::AddressDecoder { address: 3, alias: 7 })
            .unwrap();
        ram.write(3, 0xAA);
        assert_eq!(ram.read(7), 0xAA);
        ram.write(7, 0x55);
        assert_eq!(ram.read(3), 0x55);
    }

    #[test]
    fn coupling_flips_victim() {
        let mut ram = Sram::new(16);
        ram.inject(MemoryFault::Coupling {
            aggressor: BitCell::new(2, 1),
            victim: BitCell::new(9, 4),
            trigger: CouplingTrigger::Rising,
        })
        .unwrap();
        ram.write(2, 0x02);
        assert_eq!(ram.read(9), 0x10);
        // falling edge does not fire
        ram.write(2, 0x00);
        assert_eq!(ram.read(9), 0x10);
        // unrelated bit of the aggressor word does not fire
        ram.write(2, 0x01);
        assert_eq!(ram.read(9), 0x10);
    }

    #[test]
    fn invalid_faults_rejected() {
        let mut ram = Sram::new(16);
        assert!(ram
            .inject(MemoryFault::StuckAt0 {
                cell: BitCell::new(16, 0)
            })
            .is_err());
        assert!(ram
            .inject(MemoryFault::StuckAt0 {
                cell: BitCell::new(0, 8)
            })
            .is_err());
        assert!(ram
            .inject(MemoryFault::AddressDecoder { address: 3, alias: 3 })
            .is_err());
        assert!(ram
            .inject(MemoryFault::Coupling {
                aggressor: BitCell::new(1, 0),
                victim: BitCell::new(1, 1),
                trigger: CouplingTrigger::Any
            })
            .is_err());
        assert!(ram.faults().is_empty());
    }

    #[test]
    fn region_bounds() {
        let mut ram = Sram::new(32);
        assert!(ram.region(16, 16).is_ok());
        assert!(ram.region(16, 17).is_err());
        let mut r = ram.region(8, 4).unwrap();
        r.write(0, 9);
        assert_eq!(ram.read(8), 9);
    }
}
