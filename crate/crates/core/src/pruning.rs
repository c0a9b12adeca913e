//! Top-NNZ magnitude pruning.
//!
//! Two paths share the same selection rule: offline DBB-aware weight
//! pruning, and the hardware Dynamic Activation Pruning (DAP) array that
//! compresses activation blocks at runtime through cascaded magnitude
//! maxpool stages. Each stage extracts one survivor with `BZ - 1`
//! comparators; the cascade is capped (5 stages in the reference design),
//! so hardware-strict NNZ is 1..=5 or the dense passthrough `BZ`.
//!
//! Ties on equal magnitude keep the lowest index, modeling first-match
//! priority in the comparator tree. `|-128|` is taken in widened
//! arithmetic.

use crate::dbb::{DbbBlock, DbbConfig, DbbTensor, DenseTensor};
use crate::error::{Error, Result};

/// DAP array geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DapArrayConfig {
    block_size: u8,
    max_stages: u8,
}

impl DapArrayConfig {
    pub fn new(block_size: u8, max_stages: u8) -> Result<Self> {
        DbbConfig::new(block_size, block_size)?;
        if max_stages == 0 || max_stages > block_size {
            return Err(Error::InvalidConfig(format!(
                "max_stages {max_stages} outside 1..={block_size}"
            )));
        }
        Ok(Self {
            block_size,
            max_stages,
        })
    }

    /// Reference hardware: BZ=8, five cascaded maxpool stages.
    pub fn reference() -> Self {
        Self {
            block_size: 8,
            max_stages: 5,
        }
    }

    /// Library mode: any NNZ up to the block size (no hardware cap).
    pub fn unrestricted(block_size: u8) -> Result<Self> {
        Self::new(block_size, block_size)
    }

    pub fn block_size(&self) -> u8 {
        self.block_size
    }

    pub fn max_stages(&self) -> u8 {
        self.max_stages
    }
}

impl Default for DapArrayConfig {
    fn default() -> Self {
        Self::reference()
    }
}

/// Comparison work performed by the DAP array.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DapEventCounts {
    /// Magnitude comparisons: `stages_used * (block_size - 1)`.
    pub compare_ops: u64,
    /// Maxpool stages not bypassed.
    pub stages_used: u64,
}

impl DapEventCounts {
    pub fn merge(&mut self, other: &DapEventCounts) {
        self.compare_ops += other.compare_ops;
        self.stages_used += other.stages_used;
    }
}

fn magnitude(v: i8) -> u16 {
    (v as i16).unsigned_abs()
}

/// Select the `nnz` largest-magnitude positions of `dense`, lowest index
/// winning ties. Returns the selection as a mask.
fn top_nnz_mask(dense: &[i8], nnz: usize) -> u64 {
    debug_assert!(nnz <= dense.len());
    // Positions stable-sorted by descending magnitude; stability gives the
    // lowest-index tie-break.
    let mut order: Vec<usize> = (0..dense.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(magnitude(dense[i])));
    let mut mask = 0u64;
    for &pos in order.iter().take(nnz) {
        mask |= 1 << pos;
    }
    mask
}

/// Prune one dense block to its Top-NNZ elements by magnitude, modeling the
/// cascaded maxpool DAP array.
///
/// `nnz == block_size` is the dense passthrough and bypasses every stage;
/// other NNZ above the stage cap fail with `StageCapExceeded`. Kept values
/// are preserved exactly and the result mask population equals `nnz`.
pub fn dap_prune_block(
    dense: &[i8],
    nnz: u8,
    config: &DapArrayConfig,
) -> Result<(DbbBlock, DapEventCounts)> {
    let bz = config.block_size as usize;
    if dense.len() != bz {
        return Err(Error::LengthMismatch {
            expected: bz,
            got: dense.len(),
        });
    }
    if nnz == 0 || nnz > config.block_size {
        return Err(Error::InvalidNnz {
            nnz,
            block_size: config.block_size,
        });
    }
    if nnz == config.block_size {
        // Dense passthrough: all positions stored, no comparisons.
        let mask = if bz == 64 { u64::MAX } else { (1u64 << bz) - 1 };
        let block = DbbBlock::new(dense.to_vec(), mask)?;
        return Ok((block, DapEventCounts::default()));
    }
    if nnz > config.max_stages {
        return Err(Error::StageCapExceeded {
            nnz,
            max_stages: config.max_stages,
        });
    }
    let mask = top_nnz_mask(dense, nnz as usize);
    let values: Vec<i8> = {
        let mut out = Vec::with_capacity(nnz as usize);
        let mut m = mask;
        while m != 0 {
            let pos = m.trailing_zeros() as usize;
            out.push(dense[pos]);
            m &= m - 1;
        }
        out
    };
    let events = DapEventCounts {
        compare_ops: nnz as u64 * (config.block_size as u64 - 1),
        stages_used: nnz as u64,
    };
    Ok((DbbBlock::new(values, mask)?, events))
}

/// Offline magnitude-based DBB-aware weight pruning: every block along the
/// reduction axis keeps its Top-NNZ elements. Idempotent on tensors that
/// already satisfy the bound.
pub fn prune_weight_tensor(
    tensor: &DenseTensor,
    axis: usize,
    config: &DbbConfig,
) -> Result<DbbTensor> {
    prune_tensor(
        tensor,
        axis,
        config.nnz(),
        &DapArrayConfig::unrestricted(config.block_size())?,
    )
    .map(|(t, _)| t)
}

/// Prune a dense activation tile blockwise with a single per-layer NNZ,
/// summing the DAP comparison work over all blocks.
pub fn prune_activation_tile(
    tile: &DenseTensor,
    axis: usize,
    layer_nnz: u8,
    config: &DapArrayConfig,
) -> Result<(DbbTensor, DapEventCounts)> {
    prune_tensor(tile, axis, layer_nnz, config)
}

fn prune_tensor(
    tensor: &DenseTensor,
    axis: usize,
    nnz: u8,
    dap: &DapArrayConfig,
) -> Result<(DbbTensor, DapEventCounts)> {
    if axis >= tensor.shape().len() {
        return Err(Error::ShapeMismatch(format!(
            "reduction axis {axis} out of range for shape {:?}",
            tensor.shape()
        )));
    }
    let bz = dap.block_size as usize;
    let config = DbbConfig::new(dap.block_size, nnz)?;
    let shape = tensor.shape();
    let extent = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product();
    let inner = stride;
    let outer: usize = shape[..axis].iter().product();
    let bpf = extent.div_ceil(bz);
    let mut blocks = Vec::with_capacity(outer * inner * bpf);
    let mut events = DapEventCounts::default();
    let mut scratch = vec![0i8; bz];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * extent * stride + i;
            for bi in 0..bpf {
                let start = bi * bz;
                let valid = bz.min(extent - start);
                for (j, slot) in scratch.iter_mut().enumerate() {
                    *slot = if j < valid {
                        tensor.data()[base + (start + j) * stride]
                    } else {
                        0
                    };
                }
                let (block, ev) = dap_prune_block(&scratch, nnz, dap)?;
                events.merge(&ev);
                blocks.push(block);
            }
        }
    }
    let tensor = DbbTensor::from_parts(config, shape.to_vec(), axis, blocks)?;
    Ok((tensor, events))
}

/// Magnitude mass per block-position rank, accumulated over a sample of
/// blocks. Partial histograms merge, so accumulation can be parallelized.
#[derive(Debug, Clone)]
pub struct RankHistogram {
    block_size: u8,
    blocks: u64,
    mass: Vec<u64>,
}

impl RankHistogram {
    pub fn new(block_size: u8) -> Result<Self> {
        DbbConfig::new(block_size, block_size)?;
        Ok(Self {
            block_size,
            blocks: 0,
            mass: vec![0; block_size as usize],
        })
    }

    pub fn block_size(&self) -> u8 {
        self.block_size
    }

    pub fn blocks(&self) -> u64 {
        self.blocks
    }

    /// Fold one dense block into the histogram.
    pub fn accumulate(&mut self, dense: &[i8]) -> Result<()> {
        if dense.len() != self.block_size as usize {
            return Err(Error::LengthMismatch {
                expected: self.block_size as usize,
                got: dense.len(),
            });
        }
        let mut mags: Vec<u16> = dense.iter().map(|&v| magnitude(v)).collect();
        mags.sort_unstable_by(|a, b| b.cmp(a));
        for (rank, &m) in mags.iter().enumerate() {
            self.mass[rank] += m as u64;
        }
        self.blocks += 1;
        Ok(())
    }

    /// Fold every aligned block of a tensor along `axis`.
    pub fn accumulate_tensor(&mut self, tensor: &DenseTensor, axis: usize) -> Result<()> {
        let shape = tensor.shape();
        if axis >= shape.len() {
            return Err(Error::ShapeMismatch(format!(
                "reduction axis {axis} out of range for shape {shape:?}"
            )));
        }
        let bz = self.block_size as usize;
        let extent = shape[axis];
        let stride: usize = shape[axis + 1..].iter().product();
        let inner = stride;
        let outer: usize = shape[..axis].iter().product();
        let mut scratch = vec![0i8; bz];
        for o in 0..outer {
            for i in 0..inner {
                let base = o * extent * stride + i;
                for start in (0..extent).step_by(bz) {
                    let valid = bz.min(extent - start);
                    for (j, slot) in scratch.iter_mut().enumerate() {
                        *slot = if j < valid {
                            tensor.data()[base + (start + j) * stride]
                        } else {
                            0
                        };
                    }
                    self.accumulate(&scratch)?;
                }
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &RankHistogram) -> Result<()> {
        if other.block_size != self.block_size {
            return Err(Error::ShapeMismatch(format!(
                "histogram block sizes differ: {} vs {}",
                self.block_size, other.block_size
            )));
        }
        self.blocks += other.blocks;
        for (a, b) in self.mass.iter_mut().zip(&other.mass) {
            *a += b;
        }
        Ok(())
    }
}

/// Smallest per-layer NNZ whose kept-magnitude mass reaches
/// `coverage_fraction` of the sample total.
///
/// With coverage 1.0 this is the maximum observed per-block nonzero count
/// (ranks past it carry no mass). An all-zero sample suggests NNZ 1.
pub fn nnz_for_coverage(hist: &RankHistogram, coverage_fraction: f64) -> Result<u8> {
    if hist.blocks == 0 {
        return Err(Error::EmptySample);
    }
    if !(coverage_fraction > 0.0 && coverage_fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "coverage fraction {coverage_fraction} outside (0, 1]"
        )));
    }
    let total: u64 = hist.mass.iter().sum();
    if total == 0 {
        return Ok(1);
    }
    let mut kept = 0u64;
    for (rank, &m) in hist.mass.iter().enumerate() {
        kept += m;
        // Integer-exact comparison: kept/total >= coverage.
        if kept as f64 >= coverage_fraction * total as f64 {
            return Ok((rank + 1) as u8);
        }
    }
    Ok(hist.block_size)
}
