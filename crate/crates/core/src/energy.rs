//! Event-driven relative energy estimation.
//!
//! Energy is a linear combination of event counts and a per-event
//! coefficient table (picojoules). Absolute silicon power is out of scope;
//! the shipped default table is calibrated so that a dense systolic array
//! running a typical 50%-sparse INT8 convolution spends about 20% of its
//! energy in the MAC datapath, with the operand/result buffers dominating.
//! Ratios between modes are meaningful under any non-negative table with
//! `gated_mac < active_mac`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arch::parse_kv;
use crate::error::{Error, Result};
use crate::sim::{EventCounts, SimReport};

/// Per-event energies in picojoules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyCoefficients {
    /// One INT8 multiply that fires.
    pub active_mac: f64,
    /// One clock-gated MAC slot (zero operand or mask miss).
    pub gated_mac: f64,
    /// One operand register byte latched in the TPE grid.
    pub operand_reg_write: f64,
    /// One accumulator read-modify-write.
    pub acc_update: f64,
    pub sram_read_per_byte_w: f64,
    pub sram_read_per_byte_a: f64,
    pub sram_write_per_byte: f64,
    /// One DAP magnitude comparison.
    pub dap_compare: f64,
    /// One MCU cycle of non-GEMM work.
    pub mcu_per_cycle: f64,
    /// Whole-array leakage per runtime cycle.
    pub leakage_per_cycle: f64,
}

impl Default for EnergyCoefficients {
    fn default() -> Self {
        EnergyCoefficients {
            active_mac: 1.0,
            gated_mac: 0.1,
            operand_reg_write: 0.9,
            acc_update: 2.0,
            sram_read_per_byte_w: 4.0,
            sram_read_per_byte_a: 4.0,
            sram_write_per_byte: 4.0,
            dap_compare: 0.2,
            mcu_per_cycle: 10.0,
            leakage_per_cycle: 50.0,
        }
    }
}

impl EnergyCoefficients {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.entries() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::NegativeCoefficient(name.to_string()));
            }
        }
        if self.gated_mac >= self.active_mac {
            return Err(Error::InvalidConfig(format!(
                "gated_mac ({}) must be cheaper than active_mac ({})",
                self.gated_mac, self.active_mac
            )));
        }
        Ok(())
    }

    fn entries(&self) -> [(&'static str, f64); 10] {
        [
            ("active_mac", self.active_mac),
            ("gated_mac", self.gated_mac),
            ("operand_reg_write", self.operand_reg_write),
            ("acc_update", self.acc_update),
            ("sram_read_per_byte_w", self.sram_read_per_byte_w),
            ("sram_read_per_byte_a", self.sram_read_per_byte_a),
            ("sram_write_per_byte", self.sram_write_per_byte),
            ("dap_compare", self.dap_compare),
            ("mcu_per_cycle", self.mcu_per_cycle),
            ("leakage_per_cycle", self.leakage_per_cycle),
        ]
    }

    /// Parse a key-value coefficient file; unspecified keys keep the
    /// default table's values.
    pub fn parse(text: &str) -> Result<EnergyCoefficients> {
        let map: BTreeMap<String, String> = parse_kv(text, "coefficient table")?;
        let mut co = EnergyCoefficients::default();
        for (key, value) in &map {
            let v: f64 = value.parse().map_err(|_| {
                Error::InvalidConfig(format!("coefficient '{key}': cannot parse '{value}'"))
            })?;
            match key.as_str() {
                "active_mac" => co.active_mac = v,
                "gated_mac" => co.gated_mac = v,
                "operand_reg_write" => co.operand_reg_write = v,
                "acc_update" => co.acc_update = v,
                "sram_read_per_byte_w" => co.sram_read_per_byte_w = v,
                "sram_read_per_byte_a" => co.sram_read_per_byte_a = v,
                "sram_write_per_byte" => co.sram_write_per_byte = v,
                "dap_compare" => co.dap_compare = v,
                "mcu_per_cycle" => co.mcu_per_cycle = v,
                "leakage_per_cycle" => co.leakage_per_cycle = v,
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown coefficient '{other}'"
                    )));
                }
            }
        }
        co.validate()?;
        Ok(co)
    }

    pub fn load(path: &Path) -> Result<EnergyCoefficients> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Dump in the same key-value format [`EnergyCoefficients::parse`]
    /// reads (picojoules).
    pub fn dump(&self) -> String {
        let mut out = String::from("# per-event energies, picojoules\n");
        for (name, v) in self.entries() {
            out.push_str(&format!("{name} = {v}\n"));
        }
        out
    }
}

/// Energy split by component. `total` is the exact sum of the parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// Active plus gated MAC energy.
    pub datapath: f64,
    /// Operand registers and accumulators in the TPE grid.
    pub pe_buffers: f64,
    pub sram: f64,
    pub dap: f64,
    pub mcu: f64,
    pub leakage: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn zero() -> Self {
        EnergyBreakdown {
            datapath: 0.0,
            pe_buffers: 0.0,
            sram: 0.0,
            dap: 0.0,
            mcu: 0.0,
            leakage: 0.0,
            total: 0.0,
        }
    }
}

/// Linear event-to-energy map.
pub fn estimate(ev: &EventCounts, co: &EnergyCoefficients) -> EnergyBreakdown {
    let datapath = ev.active_macs as f64 * co.active_mac + ev.gated_macs as f64 * co.gated_mac;
    let pe_buffers =
        ev.operand_reg_bytes as f64 * co.operand_reg_write + ev.acc_updates as f64 * co.acc_update;
    let sram = ev.weight_bytes_read as f64 * co.sram_read_per_byte_w
        + ev.activation_bytes_read as f64 * co.sram_read_per_byte_a
        + ev.output_bytes_written as f64 * co.sram_write_per_byte;
    let dap = ev.dap_compare_ops as f64 * co.dap_compare;
    let mcu = ev.mcu_cycles as f64 * co.mcu_per_cycle;
    let leakage = ev.cycles as f64 * co.leakage_per_cycle;
    EnergyBreakdown {
        datapath,
        pe_buffers,
        sram,
        dap,
        mcu,
        leakage,
        total: datapath + pe_buffers + sram + dap + mcu + leakage,
    }
}

/// One row of a normalized comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub cycles: u64,
    pub cycle_ratio: f64,
    pub energy_pj: f64,
    pub energy_ratio: f64,
    pub datapath_ratio: f64,
    pub pe_buffers_ratio: f64,
    pub sram_ratio: f64,
}

/// Energies and cycles of several reports normalized to a named baseline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub baseline: String,
    pub rows: Vec<ComparisonRow>,
}

/// Normalize a set of labeled reports to the report labeled `baseline`.
/// Ratios are invariant under uniform coefficient rescaling.
pub fn compare(reports: &[(String, SimReport)], baseline: &str) -> Result<ComparisonTable> {
    let base = reports
        .iter()
        .find(|(label, _)| label == baseline)
        .map(|(_, r)| r)
        .ok_or_else(|| Error::UnknownBaseline(baseline.to_string()))?;
    let base_cycles = base.total.events.cycles.max(1) as f64;
    let base_energy = base.total.energy;
    let safe = |x: f64| if x == 0.0 { 1.0 } else { x };
    let rows = reports
        .iter()
        .map(|(label, r)| ComparisonRow {
            label: label.clone(),
            cycles: r.total.events.cycles,
            cycle_ratio: r.total.events.cycles as f64 / base_cycles,
            energy_pj: r.total.energy.total,
            energy_ratio: r.total.energy.total / safe(base_energy.total),
            datapath_ratio: r.total.energy.datapath / safe(base_energy.datapath),
            pe_buffers_ratio: r.total.energy.pe_buffers / safe(base_energy.pe_buffers),
            sram_ratio: r.total.energy.sram / safe(base_energy.sram),
        })
        .collect();
    Ok(ComparisonTable {
        baseline: baseline.to_string(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_events_zero_energy() {
        let e = estimate(&EventCounts::default(), &EnergyCoefficients::default());
        assert_eq!(e.total, 0.0);
    }

    #[test]
    fn linearity_under_event_doubling() {
        let ev = EventCounts {
            cycles: 100,
            compute_cycles: 90,
            fill_cycles: 10,
            active_macs: 500,
            gated_macs: 300,
            acc_updates: 400,
            operand_reg_bytes: 1000,
            weight_bytes_read: 64,
            activation_bytes_read: 128,
            output_bytes_written: 32,
            dap_compare_ops: 21,
            mcu_cycles: 0,
            mux_selects: 77,
            extra_passes: 0,
        };
        let mut doubled = ev;
        doubled.cycles *= 2;
        doubled.compute_cycles *= 2;
        doubled.fill_cycles *= 2;
        doubled.active_macs *= 2;
        doubled.gated_macs *= 2;
        doubled.acc_updates *= 2;
        doubled.operand_reg_bytes *= 2;
        doubled.weight_bytes_read *= 2;
        doubled.activation_bytes_read *= 2;
        doubled.output_bytes_written *= 2;
        doubled.dap_compare_ops *= 2;
        let co = EnergyCoefficients::default();
        let e1 = estimate(&ev, &co);
        let e2 = estimate(&doubled, &co);
        for (a, b) in [
            (e1.datapath, e2.datapath),
            (e1.pe_buffers, e2.pe_buffers),
            (e1.sram, e2.sram),
            (e1.dap, e2.dap),
            (e1.leakage, e2.leakage),
            (e1.total, e2.total),
        ] {
            assert_eq!(2.0 * a, b);
        }
    }

    #[test]
    fn total_is_component_sum() {
        let ev = EventCounts {
            cycles: 7,
            active_macs: 3,
            gated_macs: 2,
            acc_updates: 3,
            operand_reg_bytes: 11,
            weight_bytes_read: 5,
            activation_bytes_read: 6,
            output_bytes_written: 4,
            dap_compare_ops: 14,
            mcu_cycles: 2,
            ..EventCounts::default()
        };
        let e = estimate(&ev, &EnergyCoefficients::default());
        assert_eq!(
            e.total,
            e.datapath + e.pe_buffers + e.sram + e.dap + e.mcu + e.leakage
        );
    }

    #[test]
    fn coefficient_table_round_trip_and_validation() {
        let co = EnergyCoefficients::default();
        co.validate().unwrap();
        let parsed = EnergyCoefficients::parse(&co.dump()).unwrap();
        assert_eq!(parsed, co);

        assert!(matches!(
            EnergyCoefficients::parse("active_mac = -1\n"),
            Err(Error::NegativeCoefficient(_))
        ));
        assert!(EnergyCoefficients::parse("nonsense = 1\n").is_err());
        // Gated must stay cheaper than active.
        assert!(EnergyCoefficients::parse("gated_mac = 2.0\n").is_err());
    }
}
