//! Accelerator instance description.
//!
//! A TPE (tensor processing element) consumes operand blocks instead of
//! scalars. Configurations are written `AxBxC_MxN`: A activation block
//! inputs per cycle, B the weight-block width (stored NNZ for the
//! time-unrolled design, the dense block size for the W-DBB dot-product
//! design), C weight block inputs per cycle, on an MxN grid of TPEs.
//!
//! Reference instances, all 2048 physical INT8 MACs at 1 GHz:
//!
//! | mode     | TPE        | grid  | datapath |
//! |----------|------------|-------|----------|
//! | sa       | 1x1x1      | 64x32 | scalar MAC |
//! | sa-zvcg  | 1x1x1      | 64x32 | scalar MAC + ZVCG |
//! | s2ta-w   | 4x8x4      | 8x4   | DP4M8 |
//! | s2ta-aw  | 8x4x4      | 8x8   | DP1M4, time-unrolled |

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_WEIGHT_BUFFER_BYTES: u64 = 512 * 1024;
pub const DEFAULT_ACTIVATION_BUFFER_BYTES: u64 = 2 * 1024 * 1024;

/// Array operating mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Dense systolic array.
    Sa,
    /// Systolic array with zero-value clock gating: same cycles as `Sa`,
    /// lower switching energy.
    SaZvcg,
    /// W-DBB only (dense activations), fixed 2x speedup.
    S2taW,
    /// Joint A/W-DBB with time-unrolled variable activation density.
    S2taAw,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Sa, Mode::SaZvcg, Mode::S2taW, Mode::S2taAw];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Sa => "sa",
            Mode::SaZvcg => "sa-zvcg",
            Mode::S2taW => "s2ta-w",
            Mode::S2taAw => "s2ta-aw",
        }
    }

    pub fn parse(s: &str) -> Result<Mode> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sa" => Ok(Mode::Sa),
            "sa-zvcg" | "sa_zvcg" | "zvcg" => Ok(Mode::SaZvcg),
            "s2ta-w" | "s2ta_w" => Ok(Mode::S2taW),
            "s2ta-aw" | "s2ta_aw" => Ok(Mode::S2taAw),
            other => Err(Error::InvalidConfig(format!(
                "unknown mode '{other}' (expected sa | sa-zvcg | s2ta-w | s2ta-aw)"
            ))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One accelerator instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub mode: Mode,
    /// Activation block inputs per TPE per cycle.
    pub a: u32,
    /// Weight block width seen by the TPE datapath.
    pub b: u32,
    /// Weight block inputs per TPE per cycle.
    pub c: u32,
    /// TPE grid rows (output-row direction).
    pub m: u32,
    /// TPE grid columns (output-column direction).
    pub n: u32,
    pub block_size: u8,
    /// W-DBB bound the datapath is provisioned for.
    pub weight_nnz: u8,
    pub clock_hz: f64,
    pub wb_bytes: u64,
    pub ab_bytes: u64,
    /// Cascaded DAP maxpool stage cap (hardware-strict NNZ bound).
    pub dap_max_stages: u8,
    /// MCU overhead per output element for non-GEMM work
    /// (activation functions, pooling); 0 disables the hook.
    pub non_gemm_cycles_per_elem: f64,
    /// Write 1 output byte per element instead of a 4-byte accumulator.
    pub requantize_output: bool,
}

impl ArrayConfig {
    /// Reference instance for `mode` (see module table).
    pub fn reference(mode: Mode) -> ArrayConfig {
        let (a, b, c, m, n) = match mode {
            Mode::Sa | Mode::SaZvcg => (1, 1, 1, 64, 32),
            Mode::S2taW => (4, 8, 4, 8, 4),
            Mode::S2taAw => (8, 4, 4, 8, 8),
        };
        ArrayConfig {
            mode,
            a,
            b,
            c,
            m,
            n,
            block_size: 8,
            weight_nnz: 4,
            clock_hz: 1e9,
            wb_bytes: DEFAULT_WEIGHT_BUFFER_BYTES,
            ab_bytes: DEFAULT_ACTIVATION_BUFFER_BYTES,
            dap_max_stages: 5,
            non_gemm_cycles_per_elem: 0.0,
            requantize_output: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.a == 0 || self.b == 0 || self.c == 0 || self.m == 0 || self.n == 0 {
            return fail(format!(
                "TPE dims must be positive, got {}x{}x{}_{}x{}",
                self.a, self.b, self.c, self.m, self.n
            ));
        }
        if self.block_size == 0 || self.block_size > 64 {
            return fail(format!("block_size {} outside 1..=64", self.block_size));
        }
        if self.weight_nnz == 0 || self.weight_nnz > self.block_size {
            return fail(format!(
                "weight_nnz {} outside 1..={}",
                self.weight_nnz, self.block_size
            ));
        }
        if self.dap_max_stages == 0 || self.dap_max_stages > self.block_size {
            return fail(format!(
                "dap_max_stages {} outside 1..={}",
                self.dap_max_stages, self.block_size
            ));
        }
        if self.clock_hz <= 0.0 || self.clock_hz.is_nan() {
            return fail(format!("clock_hz {} must be positive", self.clock_hz));
        }
        if self.non_gemm_cycles_per_elem < 0.0 {
            return fail("non_gemm_cycles_per_elem must be non-negative".into());
        }
        match self.mode {
            Mode::Sa | Mode::SaZvcg => {
                if self.a != 1 || self.b != 1 || self.c != 1 {
                    return fail(format!(
                        "mode {} requires a 1x1x1 TPE, got {}x{}x{}",
                        self.mode, self.a, self.b, self.c
                    ));
                }
            }
            Mode::S2taW => {
                if self.b != self.block_size as u32 {
                    return fail(format!(
                        "s2ta-w wants b == block_size (dense activation width), got b={} bz={}",
                        self.b, self.block_size
                    ));
                }
            }
            Mode::S2taAw => {
                if self.b != self.weight_nnz as u32 {
                    return fail(format!(
                        "s2ta-aw wants b == weight_nnz, got b={} weight_nnz={}",
                        self.b, self.weight_nnz
                    ));
                }
            }
        }
        Ok(())
    }

    /// Physical INT8 multipliers in the array.
    pub fn physical_macs(&self) -> u64 {
        let grid = self.m as u64 * self.n as u64;
        match self.mode {
            Mode::Sa | Mode::SaZvcg => grid,
            Mode::S2taW => self.a as u64 * self.weight_nnz as u64 * self.c as u64 * grid,
            Mode::S2taAw => self.a as u64 * self.c as u64 * grid,
        }
    }

    /// Output rows covered by one tile.
    pub fn tile_rows(&self) -> usize {
        self.a as usize * self.m as usize
    }

    /// Output columns covered by one tile.
    pub fn tile_cols(&self) -> usize {
        self.c as usize * self.n as usize
    }

    /// Systolic pipeline skew charged per tile.
    pub fn skew_cycles(&self) -> u64 {
        (self.m - 1) as u64 + (self.n - 1) as u64
    }

    /// Operand register bytes latched per TPE per compute cycle
    /// (masks excluded).
    pub fn operand_bytes_per_tpe(&self) -> u64 {
        self.a as u64 + self.b as u64 * self.c as u64
    }

    fn macs_per_tpe(&self) -> u64 {
        match self.mode {
            Mode::Sa | Mode::SaZvcg => 1,
            Mode::S2taW => self.a as u64 * self.weight_nnz as u64 * self.c as u64,
            Mode::S2taAw => self.a as u64 * self.c as u64,
        }
    }

    /// Dot-product units (accumulator owners) per TPE.
    fn accumulators_per_tpe(&self) -> u64 {
        match self.mode {
            // One accumulator per scalar MAC / per DP1M4 MAC.
            Mode::Sa | Mode::SaZvcg | Mode::S2taAw => self.macs_per_tpe(),
            // One accumulator per DP4M8 dot-product unit.
            Mode::S2taW => self.a as u64 * self.c as u64,
        }
    }
}

/// PE buffer bytes per INT8 MAC: operand registers and 4-byte
/// output-stationary accumulators, divided by physical MACs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BufferAccount {
    pub operand_bytes_per_mac: f64,
    pub accumulator_bytes_per_mac: f64,
    pub total_bytes_per_mac: f64,
    /// Set for the W-DBB dot-product design: the published per-MAC figures
    /// for that row (0.375 / 0.5 / 0.875 B, quoted for a 4x4x4_4x8
    /// instance) cannot be reconciled with the stated TPE geometry or with
    /// this formula, so the formula-based figure is reported and flagged.
    pub reference_discrepancy: bool,
}

/// Compute the per-MAC buffer account for an instance.
pub fn buffer_account(config: &ArrayConfig) -> BufferAccount {
    let macs = config.macs_per_tpe() as f64;
    let operands = config.operand_bytes_per_tpe() as f64;
    let accumulators = 4.0 * config.accumulators_per_tpe() as f64;
    let operand_bytes_per_mac = operands / macs;
    let accumulator_bytes_per_mac = accumulators / macs;
    BufferAccount {
        operand_bytes_per_mac,
        accumulator_bytes_per_mac,
        total_bytes_per_mac: operand_bytes_per_mac + accumulator_bytes_per_mac,
        reference_discrepancy: config.mode == Mode::S2taW,
    }
}

/// Parse `key = value` lines; `#` starts a comment.
pub(crate) fn parse_kv(text: &str, what: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::InvalidConfig(format!(
                "{what} line {}: expected 'key = value', got '{raw}'",
                lineno + 1
            )));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if value.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "{what} line {}: empty value for '{key}'",
                lineno + 1
            )));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(Error::InvalidConfig(format!(
                "{what} line {}: duplicate key '{key}'",
                lineno + 1
            )));
        }
    }
    Ok(map)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("key '{key}': cannot parse '{value}'")))
}

/// Parse an architecture config from key-value text. `mode` is required;
/// every other key defaults from the mode's reference instance.
pub fn parse_array_config(text: &str) -> Result<ArrayConfig> {
    let map = parse_kv(text, "arch config")?;
    let mode = Mode::parse(
        map.get("mode")
            .ok_or_else(|| Error::InvalidConfig("arch config: missing 'mode'".into()))?,
    )?;
    let mut cfg = ArrayConfig::reference(mode);
    for (key, value) in &map {
        match key.as_str() {
            "mode" => {}
            "a" => cfg.a = parse_num(key, value)?,
            "b" => cfg.b = parse_num(key, value)?,
            "c" => cfg.c = parse_num(key, value)?,
            "m" => cfg.m = parse_num(key, value)?,
            "n" => cfg.n = parse_num(key, value)?,
            "block_size" => cfg.block_size = parse_num(key, value)?,
            "weight_nnz" => cfg.weight_nnz = parse_num(key, value)?,
            "clock_hz" => cfg.clock_hz = parse_num(key, value)?,
            "wb_bytes" => cfg.wb_bytes = parse_num(key, value)?,
            "ab_bytes" => cfg.ab_bytes = parse_num(key, value)?,
            "dap_max_stages" => cfg.dap_max_stages = parse_num(key, value)?,
            "non_gemm_cycles_per_elem" => cfg.non_gemm_cycles_per_elem = parse_num(key, value)?,
            "requantize_output" => cfg.requantize_output = parse_num(key, value)?,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "arch config: unknown key '{other}'"
                )))
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_array_config(path: &Path) -> Result<ArrayConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_array_config(&text)
}

/// Dump a config in the same key-value format `parse_array_config` reads.
pub fn dump_array_config(cfg: &ArrayConfig) -> String {
    format!(
        "mode = {}\na = {}\nb = {}\nc = {}\nm = {}\nn = {}\nblock_size = {}\n\
         weight_nnz = {}\nclock_hz = {}\nwb_bytes = {}\nab_bytes = {}\n\
         dap_max_stages = {}\nnon_gemm_cycles_per_elem = {}\nrequantize_output = {}\n",
        cfg.mode,
        cfg.a,
        cfg.b,
        cfg.c,
        cfg.m,
        cfg.n,
        cfg.block_size,
        cfg.weight_nnz,
        cfg.clock_hz,
        cfg.wb_bytes,
        cfg.ab_bytes,
        cfg.dap_max_stages,
        cfg.non_gemm_cycles_per_elem,
        cfg.requantize_output,
    )
}
