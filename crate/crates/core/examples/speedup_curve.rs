//! Chart the mode speedup and energy curves on a synthetic GEMM.
//!
//! Run with `cargo run --release --example speedup_curve`.

use s2ta_core::arch::{ArrayConfig, Mode};
use s2ta_core::energy::EnergyCoefficients;
use s2ta_core::sim::run_gemm;
use s2ta_core::workloads::synth_microbench;

fn main() {
    let coeffs = EnergyCoefficients::default();
    let run = |mode: Mode, a_nnz: u8| {
        let problem = synth_microbench(64, 64, 4096, Some(4), a_nnz, 0).unwrap();
        let mut cfg = ArrayConfig::reference(mode);
        cfg.dap_max_stages = cfg.block_size; // chart the full density range
        run_gemm(&problem, &cfg, &coeffs).unwrap().report
    };

    let baseline = run(Mode::SaZvcg, 8);
    println!("4/8 weights, 64x64x4096 GEMM, normalized to sa-zvcg at dense activations\n");
    println!("{:<8}  {:>6}  {:>9}  {:>8}  {:>7}  {:>6}", "mode", "a_nnz", "cycles", "speedup", "energy", "tops");
    for mode in Mode::ALL {
        for a_nnz in 1..=8u8 {
            let r = run(mode, a_nnz);
            println!(
                "{:<8}  {:>6}  {:>9}  {:>7.2}x  {:>6.3}  {:>6.2}",
                mode.as_str(),
                a_nnz,
                r.events.cycles,
                baseline.events.cycles as f64 / r.events.cycles as f64,
                r.energy.total / baseline.energy.total,
                r.effective_tops,
            );
        }
    }
}
