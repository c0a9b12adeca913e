//! Density Bound Block (DBB) structured sparsity and the S2TA systolic
//! tensor array model.
//!
//! Three layers:
//!
//! - **Format** ([`dbb`], [`pruning`]): the lossless NNZ/BZ block
//!   compression, offline Top-NNZ weight pruning, and the hardware
//!   Dynamic Activation Pruning (DAP) cascade.
//! - **Datapaths** ([`datapath`]): functional + event-counting models of
//!   the dense, clock-gated, W-DBB and time-unrolled A/W-DBB MAC units.
//! - **Simulator** ([`arch`], [`sim`], [`energy`], [`workloads`]):
//!   output-stationary GEMM tiling over a TPE array in four modes
//!   (`sa`, `sa-zvcg`, `s2ta-w`, `s2ta-aw`), with cycle, utilization,
//!   SRAM-traffic and buffer accounting, and a coefficient-driven
//!   relative energy model.
//!
//! Every mode computes bit-identical GEMM results; they differ only in
//! time and energy. The `s2ta` binary exposes compression, pruning,
//! simulation, sweeps and report post-processing.

pub mod arch;
pub mod datapath;
pub mod dbb;
pub mod energy;
pub mod error;
pub mod pruning;
pub mod report;
pub mod sim;
pub mod workloads;

pub use arch::{buffer_account, ArrayConfig, BufferAccount, Mode};
pub use dbb::{
    block_tensor, compress_block, decompress_block, storage_bytes_per_block, unblock_tensor,
    DbbBlock, DbbConfig, DbbTensor, DenseTensor,
};
pub use error::{Error, Result};
pub use pruning::{
    dap_prune_block, nnz_for_coverage, prune_activation_tile, prune_weight_tensor, DapArrayConfig,
    DapEventCounts, RankHistogram,
};
pub use sim::{run_gemm, run_network, EventCounts, GemmProblem, SimReport, WeightOperand};
pub use workloads::{builtin, parse_network, synth_microbench, LayerSpec, NetworkSpec};
