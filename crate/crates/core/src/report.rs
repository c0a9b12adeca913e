//! Report serialization: JSON via serde, flat CSV with one row per layer.

use crate::energy::ComparisonTable;
use crate::error::Result;
use crate::sim::{LayerReport, SimReport};

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub const LAYER_CSV_HEADER: &str = "network,layer,kind,mode,rows,cols,k,tiles,cycles,\
fill_cycles,compute_cycles,mcu_cycles,active_macs,gated_macs,mux_selects,acc_updates,\
operand_reg_bytes,weight_bytes,activation_bytes,output_bytes,dap_compares,extra_passes,\
utilization,effective_tops,energy_datapath_pj,energy_pe_buffers_pj,energy_sram_pj,\
energy_dap_pj,energy_mcu_pj,energy_leakage_pj,energy_total_pj,seed";

fn layer_csv_row(r: &SimReport, l: &LayerReport) -> String {
    let ev = &l.events;
    let en = &l.energy;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.6},{:.6},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{}",
        csv_field(&r.network),
        csv_field(&l.name),
        l.kind,
        r.mode,
        l.rows,
        l.cols,
        l.k,
        l.tile_count,
        ev.cycles,
        ev.fill_cycles,
        ev.compute_cycles,
        ev.mcu_cycles,
        ev.active_macs,
        ev.gated_macs,
        ev.mux_selects,
        ev.acc_updates,
        ev.operand_reg_bytes,
        ev.weight_bytes_read,
        ev.activation_bytes_read,
        ev.output_bytes_written,
        ev.dap_compare_ops,
        ev.extra_passes,
        l.utilization,
        l.effective_tops,
        en.datapath,
        en.pe_buffers,
        en.sram,
        en.dap,
        en.mcu,
        en.leakage,
        en.total,
        r.seed,
    )
}

/// One CSV row per layer plus a trailing `total` row.
pub fn report_to_csv(report: &SimReport) -> String {
    let mut out = String::from(LAYER_CSV_HEADER);
    out.push('\n');
    for layer in &report.layers {
        out.push_str(&layer_csv_row(report, layer));
        out.push('\n');
    }
    let total = LayerReport {
        name: "total".into(),
        kind: "aggregate".into(),
        rows: 0,
        cols: 0,
        k: 0,
        tile_count: report.layers.iter().map(|l| l.tile_count).sum(),
        events: report.total.events,
        utilization: report.total.utilization,
        effective_ops: report.total.effective_ops,
        effective_tops: report.total.effective_tops,
        energy: report.total.energy,
    };
    out.push_str(&layer_csv_row(report, &total));
    out.push('\n');
    out
}

pub fn report_to_json(report: &SimReport) -> Result<String> {
    serde_json::to_string_pretty(report)
        .map_err(|e| crate::error::Error::InvalidConfig(format!("report serialization: {e}")))
}

pub fn report_from_json(text: &str) -> Result<SimReport> {
    serde_json::from_str(text)
        .map_err(|e| crate::error::Error::InvalidConfig(format!("report parse: {e}")))
}

pub fn comparison_to_csv(table: &ComparisonTable) -> String {
    let mut out = String::from(
        "label,baseline,cycles,cycle_ratio,energy_pj,energy_ratio,datapath_ratio,\
         pe_buffers_ratio,sram_ratio\n",
    );
    for row in &table.rows {
        out.push_str(&format!(
            "{},{},{},{:.6},{:.3},{:.6},{:.6},{:.6},{:.6}\n",
            csv_field(&row.label),
            csv_field(&table.baseline),
            row.cycles,
            row.cycle_ratio,
            row.energy_pj,
            row.energy_ratio,
            row.datapath_ratio,
            row.pe_buffers_ratio,
            row.sram_ratio,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_escaping() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("q\"q"), "\"q\"\"q\"");
    }
}
