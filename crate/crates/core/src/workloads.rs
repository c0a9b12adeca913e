//! Network and layer descriptions.
//!
//! Layers are lowered to GEMM: convolutions via im2col
//! (`rows = out_H*out_W`, `cols = out_channels`, `k = kh*kw*in_C` with the
//! channel index innermost so K-blocking matches channel blocking),
//! pointwise and FC with their natural dims, depthwise as per-channel
//! GEMMs with `k = kh*kw` (memory/skew bound by construction).
//!
//! Weight values are synthetic: the simulator is a timing/energy model, so
//! seeded random tensors at the declared densities stand in for trained
//! parameters. The microbenchmark generator enforces *exact* per-block
//! sparsity, not statistical sparsity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arch::ArrayConfig;
use crate::dbb::{block_tensor, DbbConfig, DenseTensor};
use crate::error::{Error, Result};
use crate::sim::{GemmProblem, WeightOperand, MAX_REDUCTION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    Pointwise,
    Depthwise,
    Fc,
}

impl LayerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LayerKind::Conv => "conv",
            LayerKind::Pointwise => "pointwise",
            LayerKind::Depthwise => "depthwise",
            LayerKind::Fc => "fc",
        }
    }
}

/// Weight density: dense or an NNZ/BZ bound, written `"4/8"` in files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum WeightDensity {
    Dense,
    Dbb { nnz: u8, block_size: u8 },
}

impl WeightDensity {
    pub fn dbb_4_8() -> Self {
        WeightDensity::Dbb {
            nnz: 4,
            block_size: 8,
        }
    }
}

impl TryFrom<String> for WeightDensity {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("dense") {
            return Ok(WeightDensity::Dense);
        }
        let (nnz, bz) = t.split_once('/').ok_or_else(|| {
            Error::InvalidConfig(format!("weight density '{t}' is neither 'dense' nor 'N/B'"))
        })?;
        let nnz: u8 = nnz
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("weight density '{t}': bad NNZ")))?;
        let bz: u8 = bz
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("weight density '{t}': bad block size")))?;
        DbbConfig::new(bz, nnz)?;
        Ok(WeightDensity::Dbb {
            nnz,
            block_size: bz,
        })
    }
}

impl From<WeightDensity> for String {
    fn from(d: WeightDensity) -> String {
        match d {
            WeightDensity::Dense => "dense".to_string(),
            WeightDensity::Dbb { nnz, block_size } => format!("{nnz}/{block_size}"),
        }
    }
}

fn default_kernel() -> [usize; 2] {
    [1, 1]
}

fn default_stride() -> usize {
    1
}

fn default_a_nnz() -> u8 {
    8
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    /// Input dims `[H, W, C]`.
    #[serde(rename = "in")]
    pub in_dims: [usize; 3],
    #[serde(default = "default_kernel")]
    pub kernel: [usize; 2],
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Spatial zero padding `[ph, pw]`; defaults to `(k-1)/2` per side.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub padding: Option<[usize; 2]>,
    pub out_channels: usize,
    pub w_dbb: WeightDensity,
    /// Per-layer activation NNZ (DAP setting); 8 is dense passthrough.
    #[serde(default = "default_a_nnz")]
    pub a_nnz: u8,
}

impl LayerSpec {
    pub fn padding(&self) -> [usize; 2] {
        self.padding
            .unwrap_or([(self.kernel[0] - 1) / 2, (self.kernel[1] - 1) / 2])
    }

    /// Output spatial dims.
    pub fn out_hw(&self) -> Result<(usize, usize)> {
        match self.kind {
            LayerKind::Fc => Ok((1, 1)),
            _ => {
                let [h, w, _] = self.in_dims;
                let [kh, kw] = self.kernel;
                let [ph, pw] = self.padding();
                let oh = (h + 2 * ph).checked_sub(kh).map(|x| x / self.stride + 1);
                let ow = (w + 2 * pw).checked_sub(kw).map(|x| x / self.stride + 1);
                match (oh, ow) {
                    (Some(oh), Some(ow)) if oh > 0 && ow > 0 => Ok((oh, ow)),
                    _ => Err(Error::UnsupportedLayer(format!(
                        "{}: kernel {:?} does not fit input {:?} with padding {:?}",
                        self.name,
                        self.kernel,
                        self.in_dims,
                        self.padding()
                    ))),
                }
            }
        }
    }

    /// GEMM dims `(rows, cols, k)` of one group.
    pub fn gemm_dims(&self) -> Result<(usize, usize, usize)> {
        let [h, w, c] = self.in_dims;
        let [kh, kw] = self.kernel;
        let (oh, ow) = self.out_hw()?;
        Ok(match self.kind {
            LayerKind::Conv => (oh * ow, self.out_channels, kh * kw * c),
            LayerKind::Pointwise => (oh * ow, self.out_channels, c),
            LayerKind::Depthwise => (oh * ow, 1, kh * kw),
            LayerKind::Fc => (1, self.out_channels, h * w * c),
        })
    }

    pub fn output_elements(&self) -> Result<usize> {
        let (oh, ow) = self.out_hw()?;
        Ok(match self.kind {
            LayerKind::Depthwise => oh * ow * self.in_dims[2],
            _ => oh * ow * self.out_channels,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::UnsupportedLayer(msg));
        if self.in_dims.contains(&0) || self.out_channels == 0 {
            return fail(format!("{}: zero dimension", self.name));
        }
        if self.stride == 0 {
            return fail(format!("{}: zero stride", self.name));
        }
        if self.kernel[0] == 0 || self.kernel[1] == 0 {
            return fail(format!("{}: zero kernel", self.name));
        }
        if self.a_nnz == 0 || self.a_nnz > 8 {
            return fail(format!("{}: a_nnz {} outside 1..=8", self.name, self.a_nnz));
        }
        match self.kind {
            LayerKind::Pointwise if self.kernel != [1, 1] => {
                return fail(format!("{}: pointwise wants a 1x1 kernel", self.name));
            }
            LayerKind::Depthwise if self.out_channels != self.in_dims[2] => {
                return fail(format!(
                    "{}: depthwise wants out_channels == in channels",
                    self.name
                ));
            }
            _ => {}
        }
        let (_, _, k) = self.gemm_dims()?;
        if k > MAX_REDUCTION {
            return fail(format!(
                "{}: reduction {k} exceeds {MAX_REDUCTION}",
                self.name
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub name: String,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    /// Per-layer validation plus a relaxed channel chain: each layer's
    /// input channels must match the previous layer's output channels or,
    /// for residual branches, the previous layer's input channels.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::UnsupportedLayer(format!(
                "network '{}' has no layers",
                self.name
            )));
        }
        for layer in &self.layers {
            layer.validate()?;
        }
        for pair in self.layers.windows(2) {
            let (prev, cur) = (&pair[0], &pair[1]);
            let prev_out = if prev.kind == LayerKind::Depthwise {
                prev.in_dims[2]
            } else {
                prev.out_channels
            };
            if cur.in_dims[2] != prev_out && cur.in_dims[2] != prev.in_dims[2] {
                return Err(Error::UnsupportedLayer(format!(
                    "layer '{}' expects {} input channels but '{}' produces {}",
                    cur.name, cur.in_dims[2], prev.name, prev_out
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serialization")
    }
}

/// Parse a network description from JSON.
pub fn parse_network(text: &str) -> Result<NetworkSpec> {
    let net: NetworkSpec = serde_json::from_str(text)
        .map_err(|e| Error::UnsupportedLayer(format!("network file: {e}")))?;
    net.validate()?;
    Ok(net)
}

pub fn load_network(path: &std::path::Path) -> Result<NetworkSpec> {
    parse_network(&std::fs::read_to_string(path)?)
}

struct LayerBuilder {
    w_default: WeightDensity,
    a_nnz: u8,
    layers: Vec<LayerSpec>,
}

impl LayerBuilder {
    fn new(w_default: WeightDensity) -> Self {
        LayerBuilder {
            w_default,
            a_nnz: 4,
            layers: Vec::new(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        name: &str,
        kind: LayerKind,
        in_dims: [usize; 3],
        kernel: [usize; 2],
        stride: usize,
        padding: Option<[usize; 2]>,
        out_channels: usize,
        w_dbb: WeightDensity,
    ) {
        self.layers.push(LayerSpec {
            name: name.to_string(),
            kind,
            in_dims,
            kernel,
            stride,
            padding,
            out_channels,
            w_dbb,
            a_nnz: self.a_nnz,
        });
    }

    fn conv(&mut self, name: &str, hw: usize, c: usize, k: usize, s: usize, out: usize) {
        self.push(
            name,
            LayerKind::Conv,
            [hw, hw, c],
            [k, k],
            s,
            None,
            out,
            self.w_default,
        );
    }

    fn pw(&mut self, name: &str, hw: usize, c: usize, out: usize) {
        self.push(
            name,
            LayerKind::Pointwise,
            [hw, hw, c],
            [1, 1],
            1,
            None,
            out,
            self.w_default,
        );
    }

    fn pw_s(&mut self, name: &str, hw: usize, c: usize, s: usize, out: usize) {
        self.push(
            name,
            LayerKind::Pointwise,
            [hw, hw, c],
            [1, 1],
            s,
            None,
            out,
            self.w_default,
        );
    }

    fn dw(&mut self, name: &str, hw: usize, c: usize, s: usize) {
        self.push(
            name,
            LayerKind::Depthwise,
            [hw, hw, c],
            [3, 3],
            s,
            None,
            c,
            self.w_default,
        );
    }

    fn fc(&mut self, name: &str, in_dims: [usize; 3], out: usize) {
        self.push(
            name,
            LayerKind::Fc,
            in_dims,
            [1, 1],
            1,
            None,
            out,
            self.w_default,
        );
    }
}

fn alexnet() -> NetworkSpec {
    let mut b = LayerBuilder::new(WeightDensity::dbb_4_8());
    b.push(
        "conv1",
        LayerKind::Conv,
        [224, 224, 3],
        [11, 11],
        4,
        Some([2, 2]),
        96,
        WeightDensity::Dense,
    );
    b.push(
        "conv2",
        LayerKind::Conv,
        [27, 27, 96],
        [5, 5],
        1,
        None,
        256,
        b.w_default,
    );
    b.conv("conv3", 13, 256, 3, 1, 384);
    b.conv("conv4", 13, 384, 3, 1, 384);
    b.conv("conv5", 13, 384, 3, 1, 256);
    b.fc("fc6", [6, 6, 256], 4096);
    b.fc("fc7", [1, 1, 4096], 4096);
    b.fc("fc8", [1, 1, 4096], 1000);
    NetworkSpec {
        name: "alexnet".into(),
        layers: b.layers,
    }
}

fn vgg16() -> NetworkSpec {
    let mut b = LayerBuilder::new(WeightDensity::Dbb {
        nnz: 3,
        block_size: 8,
    });
    b.push(
        "conv1_1",
        LayerKind::Conv,
        [224, 224, 3],
        [3, 3],
        1,
        None,
        64,
        WeightDensity::Dense,
    );
    b.conv("conv1_2", 224, 64, 3, 1, 64);
    b.conv("conv2_1", 112, 64, 3, 1, 128);
    b.conv("conv2_2", 112, 128, 3, 1, 128);
    b.conv("conv3_1", 56, 128, 3, 1, 256);
    b.conv("conv3_2", 56, 256, 3, 1, 256);
    b.conv("conv3_3", 56, 256, 3, 1, 256);
    b.conv("conv4_1", 28, 256, 3, 1, 512);
    b.conv("conv4_2", 28, 512, 3, 1, 512);
    b.conv("conv4_3", 28, 512, 3, 1, 512);
    b.conv("conv5_1", 14, 512, 3, 1, 512);
    b.conv("conv5_2", 14, 512, 3, 1, 512);
    b.conv("conv5_3", 14, 512, 3, 1, 512);
    b.fc("fc6", [7, 7, 512], 4096);
    b.fc("fc7", [1, 1, 4096], 4096);
    b.fc("fc8", [1, 1, 4096], 1000);
    NetworkSpec {
        name: "vgg16".into(),
        layers: b.layers,
    }
}

fn mobilenet_v1() -> NetworkSpec {
    let mut b = LayerBuilder::new(WeightDensity::dbb_4_8());
    b.push(
        "conv0",
        LayerKind::Conv,
        [224, 224, 3],
        [3, 3],
        2,
        None,
        32,
        WeightDensity::Dense,
    );
    // (input hw, channels, dw stride, pw output channels)
    let blocks: [(usize, usize, usize, usize); 13] = [
        (112, 32, 1, 64),
        (112, 64, 2, 128),
        (56, 128, 1, 128),
        (56, 128, 2, 256),
        (28, 256, 1, 256),
        (28, 256, 2, 512),
        (14, 512, 1, 512),
        (14, 512, 1, 512),
        (14, 512, 1, 512),
        (14, 512, 1, 512),
        (14, 512, 1, 512),
        (14, 512, 2, 1024),
        (7, 1024, 1, 1024),
    ];
    for (i, &(hw, c, s, out)) in blocks.iter().enumerate() {
        let n = i + 1;
        b.dw(&format!("dw{n}"), hw, c, s);
        b.pw(&format!("pw{n}"), hw / s, c, out);
    }
    b.fc("fc", [1, 1, 1024], 1000);
    NetworkSpec {
        name: "mobilenetv1".into(),
        layers: b.layers,
    }
}

fn resnet50_v1() -> NetworkSpec {
    let mut b = LayerBuilder::new(WeightDensity::dbb_4_8());
    b.push(
        "conv1",
        LayerKind::Conv,
        [224, 224, 3],
        [7, 7],
        2,
        None,
        64,
        WeightDensity::Dense,
    );
    // (stage input hw after pooling/downsample, unit count, bottleneck
    // width, output channels); the first unit of stages 2-4 downsamples.
    let stages: [(usize, usize, usize, usize); 4] = [
        (56, 3, 64, 256),
        (56, 4, 128, 512),
        (28, 6, 256, 1024),
        (14, 3, 512, 2048),
    ];
    let mut in_c = 64;
    for (si, &(hw_in, units, width, out_c)) in stages.iter().enumerate() {
        let stage = si + 1;
        for u in 1..=units {
            let downsample = stage > 1 && u == 1;
            let s = if downsample { 2 } else { 1 };
            let hw = if u == 1 {
                hw_in
            } else {
                hw_in / if stage > 1 { 2 } else { 1 }
            };
            let hw_out = hw / s;
            let p = format!("s{stage}u{u}");
            if u == 1 {
                b.pw_s(&format!("{p}_shortcut"), hw, in_c, s, out_c);
            }
            b.pw_s(&format!("{p}_conv1"), hw, in_c, s, width);
            b.conv(&format!("{p}_conv2"), hw_out, width, 3, 1, width);
            b.pw(&format!("{p}_conv3"), hw_out, width, out_c);
            in_c = out_c;
        }
    }
    b.fc("fc", [1, 1, 2048], 1000);
    NetworkSpec {
        name: "resnet50v1".into(),
        layers: b.layers,
    }
}

/// Built-in network shapes. Defaults: 4/8 weight DBB (3/8 for VGG-16),
/// dense first-layer weights, per-layer activation NNZ 4 (override per
/// layer in a network file to reproduce published per-layer profiles,
/// which are not part of the shipped defaults).
pub fn builtin(name: &str) -> Result<NetworkSpec> {
    let net = match name.trim().to_ascii_lowercase().as_str() {
        "alexnet" => alexnet(),
        "vgg16" | "vgg-16" => vgg16(),
        "mobilenetv1" | "mobilenet-v1" | "mobilenet" => mobilenet_v1(),
        "resnet50v1" | "resnet-50v1" | "resnet50" => resnet50_v1(),
        other => return Err(Error::UnknownNetwork(other.to_string())),
    };
    debug_assert!(net.validate().is_ok());
    Ok(net)
}

pub const BUILTIN_NETWORKS: [&str; 4] = ["alexnet", "vgg16", "mobilenetv1", "resnet50v1"];

fn random_nonzero(rng: &mut ChaCha8Rng) -> i8 {
    loop {
        let v = rng.random::<i8>();
        if v != 0 {
            return v;
        }
    }
}

/// Fill `fibers x k` with exactly `nnz` nonzeros at uniformly random
/// positions in every aligned 8-block (partial tail blocks hold
/// `min(nnz, tail)` nonzeros).
fn exact_block_sparse(rng: &mut ChaCha8Rng, fibers: usize, k: usize, nnz: u8) -> Vec<i8> {
    const BZ: usize = 8;
    let mut data = vec![0i8; fibers * k];
    let mut positions: [usize; BZ] = [0; BZ];
    for f in 0..fibers {
        for start in (0..k).step_by(BZ) {
            let extent = BZ.min(k - start);
            let take = (nnz as usize).min(extent);
            for (i, p) in positions.iter_mut().enumerate() {
                *p = i;
            }
            // Partial Fisher-Yates over the block's real extent.
            for i in 0..take {
                let j = rng.random_range(i..extent);
                positions.swap(i, j);
            }
            for &p in &positions[..take] {
                data[f * k + start + p] = random_nonzero(rng);
            }
        }
    }
    data
}

fn random_dense(rng: &mut ChaCha8Rng, len: usize) -> Vec<i8> {
    (0..len).map(|_| rng.random::<i8>()).collect()
}

/// ReLU-flavored natural sparsity: roughly half the entries are exact
/// zeros, the rest uniform nonzero INT8.
fn random_relu(rng: &mut ChaCha8Rng, len: usize) -> Vec<i8> {
    (0..len)
        .map(|_| {
            if rng.random::<bool>() {
                0
            } else {
                random_nonzero(rng)
            }
        })
        .collect()
}

/// Synthetic GEMM with exact controlled sparsity (BZ = 8).
///
/// `weight_nnz = None` generates raw dense weights; `Some(n)` generates a
/// DBB weight tensor in which every K-block holds exactly `n` nonzeros.
/// Activations hold exactly `a_nnz` nonzeros per K-block, so DAP at that
/// setting is lossless.
pub fn synth_microbench(
    rows: usize,
    cols: usize,
    k: usize,
    weight_nnz: Option<u8>,
    a_nnz: u8,
    seed: u64,
) -> Result<GemmProblem> {
    if rows == 0 || cols == 0 || k == 0 {
        return Err(Error::ShapeMismatch(format!(
            "microbenchmark dims must be positive: {rows}x{cols}x{k}"
        )));
    }
    if a_nnz == 0 || a_nnz > 8 {
        return Err(Error::InvalidNnz {
            nnz: a_nnz,
            block_size: 8,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = match weight_nnz {
        None => WeightOperand::Dense(random_dense(&mut rng, cols * k)),
        Some(nnz) => {
            let cfg = DbbConfig::new(8, nnz)?;
            let data = exact_block_sparse(&mut rng, cols, k, nnz);
            let dense = DenseTensor::new(vec![cols, k], data)?;
            WeightOperand::Dbb(block_tensor(&dense, 1, &cfg)?)
        }
    };
    let activations = exact_block_sparse(&mut rng, rows, k, a_nnz);
    Ok(GemmProblem {
        rows,
        cols,
        k,
        weights,
        activations,
        a_nnz,
    })
}

/// Independent GEMM groups in one layer (channels for depthwise).
pub fn layer_group_count(layer: &LayerSpec) -> usize {
    match layer.kind {
        LayerKind::Depthwise => layer.in_dims[2],
        _ => 1,
    }
}

/// Synthesize the operands of one layer group with seeded randomness.
/// Identical `(layer, seed, group)` always produce identical operands,
/// independent of the array mode, so cross-mode outputs stay comparable.
pub fn synthesize_group(
    layer: &LayerSpec,
    cfg: &ArrayConfig,
    seed: u64,
    group: usize,
) -> Result<GemmProblem> {
    layer.validate()?;
    let (rows, cols, k) = layer.gemm_dims()?;
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ (group as u64).wrapping_mul(0x517C_C1B7_2722_0A95));
    let weights = match layer.w_dbb {
        WeightDensity::Dense => WeightOperand::Dense(random_dense(&mut rng, cols * k)),
        WeightDensity::Dbb { nnz, block_size } => {
            if block_size != cfg.block_size {
                return Err(Error::InvalidConfig(format!(
                    "layer '{}' uses BZ={block_size} but the array runs BZ={}",
                    layer.name, cfg.block_size
                )));
            }
            let dbb = DbbConfig::new(block_size, nnz)?;
            let data = exact_block_sparse(&mut rng, cols, k, nnz);
            let dense = DenseTensor::new(vec![cols, k], data)?;
            WeightOperand::Dbb(block_tensor(&dense, 1, &dbb)?)
        }
    };
    let activations = random_relu(&mut rng, rows * k);
    Ok(GemmProblem {
        rows,
        cols,
        k,
        weights,
        activations,
        a_nnz: layer.a_nnz,
    })
}
