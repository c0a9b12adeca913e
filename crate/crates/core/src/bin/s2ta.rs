//! Command-line front end: compress, prune, simulate, sweep, report.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use s2ta_core::arch::{load_array_config, ArrayConfig, Mode};
use s2ta_core::buffer_account;
use s2ta_core::dbb::{block_tensor, read_raw_tensor, write_tensor, DbbConfig, DbbTensor};
use s2ta_core::energy::{compare, EnergyCoefficients};
use s2ta_core::error::{Error, Result};
use s2ta_core::pruning::prune_weight_tensor;
use s2ta_core::report::{comparison_to_csv, report_from_json, report_to_csv, report_to_json};
use s2ta_core::sim::{run_gemm, run_network, SimReport};
use s2ta_core::workloads::{builtin, load_network, synth_microbench, NetworkSpec};

#[derive(Parser)]
#[command(
    name = "s2ta",
    version,
    about = "DBB sparse tensors and the S2TA systolic tensor array model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Losslessly compress a raw INT8 tensor into the DBB container.
    Compress(CompressArgs),
    /// Top-NNZ magnitude pruning into the DBB container (lossy).
    Prune(PruneArgs),
    /// Simulate a network on one array instance.
    Simulate(SimulateArgs),
    /// Sweep modes and activation densities on a synthetic GEMM.
    Sweep(SweepArgs),
    /// Post-process reports: normalized comparisons, coefficient dump,
    /// buffer accounting.
    Report(ReportArgs),
}

#[derive(Args)]
struct CompressArgs {
    /// Input tensor (RAWI container).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Block size (BZ).
    #[arg(long, default_value_t = 8)]
    bz: u8,
    /// Stored values per block (NNZ).
    #[arg(long, default_value_t = 4)]
    nnz: u8,
    /// Reduction axis; defaults to the innermost (channel) axis.
    #[arg(long)]
    axis: Option<usize>,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct PruneArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 8)]
    bz: u8,
    #[arg(long, default_value_t = 4)]
    nnz: u8,
    #[arg(long)]
    axis: Option<usize>,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct ArchSelect {
    /// Architecture config file (key = value text).
    #[arg(long, conflicts_with = "mode")]
    arch: Option<PathBuf>,
    /// Reference instance to use instead of a config file.
    #[arg(long)]
    mode: Option<String>,
}

impl ArchSelect {
    fn resolve(&self, default_mode: Mode) -> Result<ArrayConfig> {
        let cfg = match (&self.arch, &self.mode) {
            (Some(path), _) => load_array_config(path)?,
            (None, Some(mode)) => ArrayConfig::reference(Mode::parse(mode)?),
            (None, None) => ArrayConfig::reference(default_mode),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Network description file (JSON).
    #[arg(long, conflicts_with = "builtin")]
    network: Option<PathBuf>,
    /// Built-in network: alexnet | vgg16 | mobilenetv1 | resnet50v1.
    #[arg(long)]
    builtin: Option<String>,
    #[command(flatten)]
    arch: ArchSelect,
    /// Override every layer's activation NNZ.
    #[arg(long = "a-nnz")]
    a_nnz: Option<u8>,
    /// Energy coefficient file; defaults to the embedded table.
    #[arg(long)]
    coeffs: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "json", value_parser = ["json", "csv"])]
    format: String,
    /// Append every layer's raw little-endian i32 outputs to this file.
    #[arg(long = "dump-output")]
    dump_output: Option<PathBuf>,
    /// Label recorded in the report (defaults to the mode name).
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    arch: ArchSelect,
    /// Modes to sweep (comma separated); default all four.
    #[arg(long, value_delimiter = ',')]
    modes: Vec<String>,
    /// Activation NNZ points, e.g. `1-8` or `1,2,4,8`.
    #[arg(long = "a-nnz", default_value = "1-8")]
    a_nnz: String,
    /// Weight density: `4/8`-style bound or `dense`.
    #[arg(long = "w-nnz", default_value = "4")]
    w_nnz: String,
    #[arg(long, default_value_t = 64)]
    rows: usize,
    #[arg(long, default_value_t = 64)]
    cols: usize,
    #[arg(long, default_value_t = 4096)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Report JSON files to compare.
    inputs: Vec<PathBuf>,
    /// Baseline label; defaults to the first report's label.
    #[arg(long)]
    baseline: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv", value_parser = ["json", "csv"])]
    format: String,
    /// Print the embedded energy coefficient table and exit.
    #[arg(long = "dump-default-coeffs")]
    dump_default_coeffs: bool,
    /// Print the per-MAC buffer account of an array instance and exit.
    #[arg(long = "buffer-account")]
    buffer_account: bool,
    #[command(flatten)]
    arch: ArchSelect,
    #[arg(long)]
    force: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Compress(args) => cmd_compress(args),
        Command::Prune(args) => cmd_prune(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(e.category().exit_code() as u8)
        }
    }
}

fn guarded_write(path: &Path, force: bool, bytes: &[u8]) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::AlreadyExists,
            format!("{} exists; pass --force to overwrite", path.display()),
        )));
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn write_or_stdout(path: &Option<PathBuf>, force: bool, text: &str) -> Result<()> {
    match path {
        Some(p) => guarded_write(p, force, text.as_bytes()),
        None => {
            print!("{text}");
            std::io::stdout().flush()?;
            Ok(())
        }
    }
}

fn describe_dbb(tensor: &DbbTensor) {
    let cfg = tensor.config();
    let dense_bytes = cfg.block_size() as usize;
    let ratio = cfg.storage_bytes_per_block() as f64 / dense_bytes as f64;
    println!(
        "blocks={} bound={}/{} max_block_nonzeros={} storage_ratio={:.3}",
        tensor.blocks().len(),
        cfg.nnz(),
        cfg.block_size(),
        tensor.max_block_nonzeros(),
        ratio
    );
}

fn resolve_axis(axis: Option<usize>, rank: usize) -> usize {
    axis.unwrap_or(rank - 1)
}

fn cmd_compress(args: CompressArgs) -> Result<()> {
    let dense = read_raw_tensor(fs::File::open(&args.input)?)?;
    let cfg = DbbConfig::new(args.bz, args.nnz)?;
    let axis = resolve_axis(args.axis, dense.shape().len());
    let tensor = block_tensor(&dense, axis, &cfg)?;
    if args.out.exists() && !args.force {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::AlreadyExists,
            format!("{} exists; pass --force to overwrite", args.out.display()),
        )));
    }
    write_tensor(&tensor, fs::File::create(&args.out)?)?;
    describe_dbb(&tensor);
    Ok(())
}

fn cmd_prune(args: PruneArgs) -> Result<()> {
    let dense = read_raw_tensor(fs::File::open(&args.input)?)?;
    let cfg = DbbConfig::new(args.bz, args.nnz)?;
    let axis = resolve_axis(args.axis, dense.shape().len());
    let tensor = prune_weight_tensor(&dense, axis, &cfg)?;
    if args.out.exists() && !args.force {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::AlreadyExists,
            format!("{} exists; pass --force to overwrite", args.out.display()),
        )));
    }
    write_tensor(&tensor, fs::File::create(&args.out)?)?;
    describe_dbb(&tensor);
    Ok(())
}

fn load_coeffs(path: &Option<PathBuf>) -> Result<EnergyCoefficients> {
    match path {
        Some(p) => EnergyCoefficients::load(p),
        None => Ok(EnergyCoefficients::default()),
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let cfg = args.arch.resolve(Mode::S2taAw)?;
    let coeffs = load_coeffs(&args.coeffs)?;
    let mut network: NetworkSpec = match (&args.network, &args.builtin) {
        (Some(path), None) => load_network(path)?,
        (None, Some(name)) => builtin(name)?,
        _ => {
            return Err(Error::InvalidConfig(
                "pass exactly one of --network or --builtin".into(),
            ))
        }
    };
    if let Some(nnz) = args.a_nnz {
        for layer in &mut network.layers {
            layer.a_nnz = nnz;
        }
    }
    let mut dump_file = match &args.dump_output {
        Some(p) => {
            if p.exists() && !args.force {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::AlreadyExists,
                    format!("{} exists; pass --force to overwrite", p.display()),
                )));
            }
            Some(std::io::BufWriter::new(fs::File::create(p)?))
        }
        None => None,
    };
    let dump: Option<&mut dyn Write> = dump_file.as_mut().map(|f| f as &mut dyn Write);
    let mut report = run_network(&network, &cfg, &coeffs, args.seed, dump)?;
    if let Some(mut f) = dump_file {
        f.flush()?;
    }
    if let Some(label) = args.label {
        report.label = label;
    }
    let text = match args.format.as_str() {
        "csv" => report_to_csv(&report),
        _ => report_to_json(&report)?,
    };
    write_or_stdout(&args.out, args.force, &text)?;
    Ok(())
}

fn parse_nnz_points(s: &str) -> Result<Vec<u8>> {
    let mut points = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if let Some((lo, hi)) = part.split_once('-') {
            let lo: u8 = lo.trim().parse().map_err(|_| bad_points(s))?;
            let hi: u8 = hi.trim().parse().map_err(|_| bad_points(s))?;
            if lo == 0 || hi < lo || hi > 8 {
                return Err(bad_points(s));
            }
            points.extend(lo..=hi);
        } else {
            let v: u8 = part.parse().map_err(|_| bad_points(s))?;
            if v == 0 || v > 8 {
                return Err(bad_points(s));
            }
            points.push(v);
        }
    }
    if points.is_empty() {
        return Err(bad_points(s));
    }
    Ok(points)
}

fn bad_points(s: &str) -> Error {
    Error::InvalidConfig(format!(
        "cannot parse NNZ points '{s}' (want e.g. '1-8' or '1,2,4,8')"
    ))
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let modes: Vec<Mode> = if args.modes.is_empty() {
        Mode::ALL.to_vec()
    } else {
        args.modes
            .iter()
            .map(|m| Mode::parse(m))
            .collect::<Result<_>>()?
    };
    let points = parse_nnz_points(&args.a_nnz)?;
    let weight_nnz = match args.w_nnz.trim() {
        "dense" => None,
        s => {
            let v: u8 = s
                .trim_end_matches("/8")
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad --w-nnz '{s}'")))?;
            Some(v)
        }
    };
    let base_cfg = args.arch.resolve(Mode::S2taAw)?;
    let coeffs = EnergyCoefficients::default();
    let problem_of =
        |a_nnz: u8| synth_microbench(args.rows, args.cols, args.k, weight_nnz, a_nnz, args.seed);

    // Baseline: SA-ZVCG on the dense-activation point.
    let baseline_cfg = sweep_cfg(&base_cfg, Mode::SaZvcg);
    let baseline = run_gemm(&problem_of(8)?, &baseline_cfg, &coeffs)?.report;
    let base_cycles = baseline.events.cycles as f64;
    let base_energy = baseline.energy.total;

    let grid: Vec<(Mode, u8)> = modes
        .iter()
        .flat_map(|&m| points.iter().map(move |&n| (m, n)))
        .collect();
    // Sweep points are independent deterministic simulations; row order is
    // fixed by the grid regardless of completion order.
    let rows: Vec<Result<String>> = grid
        .par_iter()
        .map(|&(mode, a_nnz)| {
            let cfg = sweep_cfg(&base_cfg, mode);
            let problem = problem_of(a_nnz)?;
            let report = run_gemm(&problem, &cfg, &coeffs)?.report;
            let cycles = report.events.cycles;
            Ok(format!(
                "{},{},{},{:.6},{:.3},{:.6}",
                mode,
                a_nnz,
                cycles,
                base_cycles / cycles as f64,
                report.energy.total,
                report.energy.total / base_energy,
            ))
        })
        .collect();
    let mut out = String::from("mode,a_nnz,cycles,speedup,energy_pj,energy_ratio\n");
    for row in rows {
        out.push_str(&row?);
        out.push('\n');
    }
    write_or_stdout(&args.out, args.force, &out)?;
    Ok(())
}

/// Reference geometry for `mode`, inheriting the sweep's shared knobs and
/// lifting the DAP stage cap so the full 1..=8 density range is reachable
/// (the hardware cascade itself stops at 5).
fn sweep_cfg(base: &ArrayConfig, mode: Mode) -> ArrayConfig {
    let mut cfg = if base.mode == mode {
        base.clone()
    } else {
        ArrayConfig::reference(mode)
    };
    cfg.clock_hz = base.clock_hz;
    cfg.wb_bytes = base.wb_bytes;
    cfg.ab_bytes = base.ab_bytes;
    cfg.dap_max_stages = cfg.block_size;
    cfg
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    if args.dump_default_coeffs {
        let text = EnergyCoefficients::default().dump();
        return write_or_stdout(&args.out, args.force, &text);
    }
    if args.buffer_account {
        let cfg = args.arch.resolve(Mode::S2taAw)?;
        let acct = buffer_account(&cfg);
        let mut text = format!(
            "mode = {}\noperand_bytes_per_mac = {}\naccumulator_bytes_per_mac = {}\n\
             total_bytes_per_mac = {}\n",
            cfg.mode,
            acct.operand_bytes_per_mac,
            acct.accumulator_bytes_per_mac,
            acct.total_bytes_per_mac
        );
        if acct.reference_discrepancy {
            text.push_str(
                "# note: published per-MAC figures for the W-DBB dot-product design\n\
                 # (0.375/0.5/0.875 B) do not follow from its stated geometry; the\n\
                 # formula-based account is reported instead.\n",
            );
        }
        return write_or_stdout(&args.out, args.force, &text);
    }
    if args.inputs.len() < 2 {
        return Err(Error::InvalidConfig(
            "report comparison wants at least two report files".into(),
        ));
    }
    let mut reports: Vec<(String, SimReport)> = Vec::with_capacity(args.inputs.len());
    for path in &args.inputs {
        let report = report_from_json(&fs::read_to_string(path)?)?;
        let label = report.label.clone();
        if reports.iter().any(|(l, _)| *l == label) {
            return Err(Error::InvalidConfig(format!(
                "duplicate report label '{label}'; set --label when simulating"
            )));
        }
        reports.push((label, report));
    }
    let baseline = args
        .baseline
        .clone()
        .unwrap_or_else(|| reports[0].0.clone());
    let table = compare(&reports, &baseline)?;
    let text = match args.format.as_str() {
        "json" => serde_json::to_string_pretty(&table)
            .map_err(|e| Error::InvalidConfig(format!("comparison serialization: {e}")))?,
        _ => comparison_to_csv(&table),
    };
    write_or_stdout(&args.out, args.force, &text)?;
    Ok(())
}
