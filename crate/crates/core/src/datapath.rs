//! Functional and event-counting models of the MAC datapath variants.
//!
//! Five units, all computing the same 8-element dot product against a
//! 32-bit accumulator:
//!
//! - `dp8_dense`   — dense 8-MAC vector dot product (DP8)
//! - `dp8_zvcg`    — DP8 with zero-value clock gating
//! - `dp4m8`       — 4/8 W-DBB, 4 MACs behind 8:1 muxes
//! - `dp4m4`       — fixed 4/8 A/W-DBB, 4 MACs behind 4:1 muxes
//! - `dp1m4`       — time-unrolled A/W-DBB, one MAC and a 4:1 mux,
//!   serializing the activation block over `nnz_a` cycles
//!
//! A gated MAC never alters the accumulator and never saves a cycle; it
//! only draws the cheaper gated energy coefficient. Mask intersection is
//! free control logic and charges no event.

use crate::dbb::DbbBlock;
use crate::error::{Error, Result};

const LANES: usize = 8;
const WEIGHT_MACS: u64 = 4;

/// Per-invocation event tallies.
///
/// For the spatial units, `active_macs + gated_macs` equals the unit's
/// physical MAC count times `cycles`; for DP1M4 it equals `cycles`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MacEventCounts {
    pub cycles: u64,
    /// Multiplies actually performed.
    pub active_macs: u64,
    /// MAC slots suppressed by a zero operand or a mask miss.
    pub gated_macs: u64,
    /// Operand-mux activations.
    pub mux_selects: u64,
    /// Accumulator read-modify-writes.
    pub acc_updates: u64,
}

impl MacEventCounts {
    pub fn merge(&mut self, other: &MacEventCounts) {
        self.cycles += other.cycles;
        self.active_macs += other.active_macs;
        self.gated_macs += other.gated_macs;
        self.mux_selects += other.mux_selects;
        self.acc_updates += other.acc_updates;
    }
}

fn check_block(block: &DbbBlock, what: &str) -> Result<()> {
    if block.mask() >> LANES != 0 {
        return Err(Error::WrongBlockShape(format!(
            "{what} mask {:#x} exceeds an 8-element block",
            block.mask()
        )));
    }
    Ok(())
}

fn dot(a: &[i8; LANES], w: &[i8; LANES]) -> i32 {
    a.iter().zip(w).map(|(&x, &y)| x as i32 * y as i32).sum()
}

fn scatter(block: &DbbBlock) -> [i8; LANES] {
    let mut dense = [0i8; LANES];
    for (pos, v) in block.entries() {
        dense[pos as usize] = v;
    }
    dense
}

/// Dense 8-MAC dot product: one cycle, all eight MACs do the work whether
/// or not operands are zero.
pub fn dp8_dense(a: &[i8; LANES], w: &[i8; LANES], acc: i32) -> (i32, MacEventCounts) {
    let events = MacEventCounts {
        cycles: 1,
        active_macs: LANES as u64,
        gated_macs: 0,
        mux_selects: 0,
        acc_updates: 1,
    };
    (acc + dot(a, w), events)
}

/// DP8 with zero-value clock gating: same result and cycle count as
/// [`dp8_dense`]; lanes with a zero operand are gated instead of active.
pub fn dp8_zvcg(a: &[i8; LANES], w: &[i8; LANES], acc: i32) -> (i32, MacEventCounts) {
    let gated = a.iter().zip(w).filter(|(&x, &y)| x == 0 || y == 0).count() as u64;
    let active = LANES as u64 - gated;
    let events = MacEventCounts {
        cycles: 1,
        active_macs: active,
        gated_macs: gated,
        mux_selects: 0,
        acc_updates: (active > 0) as u64,
    };
    (acc + dot(a, w), events)
}

/// W-DBB dot product: four MACs, each steered by an 8:1 mux from the
/// weight block's positional bitmask. Consumes a dense 8-element
/// activation vector per cycle. ZVCG applies inside: kept-position lanes
/// whose activation is zero are gated. Blocks storing fewer than four
/// values leave the remaining MAC lanes gated.
pub fn dp4m8(a: &[i8; LANES], w: &DbbBlock, acc: i32) -> Result<(i32, MacEventCounts)> {
    check_block(w, "weight")?;
    if w.stored() > WEIGHT_MACS as usize {
        return Err(Error::WrongBlockShape(format!(
            "weight block stores {} values, the unit has 4 MACs",
            w.stored()
        )));
    }
    let mut active = 0u64;
    let mut sum = acc;
    for (pos, wv) in w.entries() {
        let av = a[pos as usize];
        sum += av as i32 * wv as i32;
        if av != 0 {
            active += 1;
        }
    }
    let events = MacEventCounts {
        cycles: 1,
        active_macs: active,
        gated_macs: WEIGHT_MACS - active,
        mux_selects: w.stored() as u64,
        acc_updates: (active > 0) as u64,
    };
    Ok((sum, events))
}

/// Fixed A/W-DBB: both operands are 4/8 blocks; one multiply fires per
/// kept weight position that also appears in the activation mask, the
/// rest of the four MACs are gated.
pub fn dp4m4(a: &DbbBlock, w: &DbbBlock, acc: i32) -> Result<(i32, MacEventCounts)> {
    check_block(a, "activation")?;
    check_block(w, "weight")?;
    if a.stored() > WEIGHT_MACS as usize || w.stored() > WEIGHT_MACS as usize {
        return Err(Error::WrongBlockShape(format!(
            "dp4m4 wants 4/8 blocks, got {}/{} stored values",
            a.stored(),
            w.stored()
        )));
    }
    let hits = (a.mask() & w.mask()).count_ones() as u64;
    let ad = scatter(a);
    let wd = scatter(w);
    let events = MacEventCounts {
        cycles: 1,
        active_macs: hits,
        gated_macs: WEIGHT_MACS - hits,
        mux_selects: hits,
        acc_updates: (hits > 0) as u64,
    };
    Ok((acc + dot(&ad, &wd), events))
}

/// Time-unrolled A/W-DBB: the activation block's stored elements are
/// serialized one per cycle onto a single MAC, so `cycles == nnz_a`
/// independent of the operand values and of the weight mask. A cycle whose
/// position misses the weight mask is gated. Weight blocks storing more
/// than four values fall back to dense operation as two 4-element
/// half-blocks over twice the cycles.
pub fn dp1m4(a: &DbbBlock, w: &DbbBlock, acc: i32) -> Result<(i32, MacEventCounts)> {
    check_block(a, "activation")?;
    check_block(w, "weight")?;
    let nnz_a = a.stored() as u64;
    let dense_fallback = w.stored() > WEIGHT_MACS as usize;
    let cycles = if dense_fallback { 2 * nnz_a } else { nnz_a };
    let hits = (a.mask() & w.mask()).count_ones() as u64;
    let ad = scatter(a);
    let wd = scatter(w);
    let events = MacEventCounts {
        cycles,
        active_macs: hits,
        gated_macs: cycles - hits,
        mux_selects: hits,
        acc_updates: hits,
    };
    Ok((acc + dot(&ad, &wd), events))
}
