//! End-to-end CLI behavior: round trips, exit codes, overwrite guards,
//! cross-mode output equivalence.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use s2ta_core::dbb::{read_tensor, write_raw_tensor, DenseTensor};

fn s2ta(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_s2ta"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn s2ta")
}

fn write_raw(path: &Path, shape: Vec<usize>, data: Vec<i8>) {
    let t = DenseTensor::new(shape, data).unwrap();
    let mut bytes = Vec::new();
    write_raw_tensor(&t, &mut bytes).unwrap();
    fs::write(path, bytes).unwrap();
}

#[test]
fn compress_reports_ratio_and_respects_density() {
    let dir = tempfile::tempdir().unwrap();
    // 2 fibers x 16: at most 4 nonzeros per 8-block.
    let mut data = vec![0i8; 32];
    for (i, v) in [(0, 4), (2, 5), (3, -7), (6, 6), (16, 1), (25, -2)] {
        data[i] = v;
    }
    write_raw(&dir.path().join("w.rawi"), vec![2, 16], data);

    let out = s2ta(
        &["compress", "--in", "w.rawi", "--out", "w.dbbt"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("storage_ratio=0.625"), "stdout: {stdout}");
    let tensor = read_tensor(fs::File::open(dir.path().join("w.dbbt")).unwrap()).unwrap();
    assert_eq!(tensor.blocks()[0].mask(), 0x4D);

    // Five nonzeros in one block cannot compress losslessly at 4/8.
    let mut dense = vec![0i8; 16];
    for v in &mut dense[..5] {
        *v = 1;
    }
    write_raw(&dir.path().join("toodense.rawi"), vec![2, 8], dense);
    let out = s2ta(
        &["compress", "--in", "toodense.rawi", "--out", "x.dbbt"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("density-exceeded"), "stderr: {stderr}");

    // Missing input: i/o exit code.
    let out = s2ta(
        &["compress", "--in", "nope.rawi", "--out", "y.dbbt"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn prune_then_compress_equals_prune_alone() {
    let dir = tempfile::tempdir().unwrap();
    let data: Vec<i8> = (0..64).map(|i| (i as i8).wrapping_mul(7)).collect();
    write_raw(&dir.path().join("t.rawi"), vec![4, 16], data);

    let out = s2ta(
        &["prune", "--in", "t.rawi", "--nnz", "3", "--out", "p.dbbt"],
        dir.path(),
    );
    assert!(out.status.success());
    let pruned = read_tensor(fs::File::open(dir.path().join("p.dbbt")).unwrap()).unwrap();
    for b in pruned.blocks() {
        assert_eq!(b.mask().count_ones(), 3);
    }

    // Re-compressing the pruned tensor must be a fixed point.
    let dense = s2ta_core::dbb::unblock_tensor(&pruned).unwrap();
    let mut bytes = Vec::new();
    write_raw_tensor(&dense, &mut bytes).unwrap();
    fs::write(dir.path().join("p.rawi"), bytes).unwrap();
    let out = s2ta(
        &[
            "compress", "--in", "p.rawi", "--nnz", "3", "--out", "pc.dbbt",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let again = read_tensor(fs::File::open(dir.path().join("pc.dbbt")).unwrap()).unwrap();
    assert_eq!(again, pruned);

    // nnz=8 pruning is a no-op plus mask bytes.
    let out = s2ta(
        &["prune", "--in", "t.rawi", "--nnz", "8", "--out", "d.dbbt"],
        dir.path(),
    );
    assert!(out.status.success());
    let full = read_tensor(fs::File::open(dir.path().join("d.dbbt")).unwrap()).unwrap();
    let rt = s2ta_core::dbb::unblock_tensor(&full).unwrap();
    let orig: Vec<i8> = (0..64).map(|i| (i as i8).wrapping_mul(7)).collect();
    assert_eq!(rt.data(), &orig[..]);
}

#[test]
fn overwrite_requires_force() {
    let dir = tempfile::tempdir().unwrap();
    write_raw(
        &dir.path().join("t.rawi"),
        vec![1, 8],
        vec![1, 0, 0, 0, 0, 0, 0, 0],
    );
    let args = [
        "compress", "--in", "t.rawi", "--nnz", "1", "--out", "t.dbbt",
    ];
    assert!(s2ta(&args, dir.path()).status.success());
    let out = s2ta(&args, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--force"));
    let mut forced = args.to_vec();
    forced.push("--force");
    assert!(s2ta(&forced, dir.path()).status.success());
}

#[test]
fn simulate_outputs_are_mode_independent() {
    let dir = tempfile::tempdir().unwrap();
    for mode in ["sa", "s2ta-aw"] {
        let out = s2ta(
            &[
                "simulate",
                "--builtin",
                "mobilenetv1",
                "--mode",
                mode,
                "--seed",
                "11",
                "--out",
                &format!("{mode}.json"),
                "--dump-output",
                &format!("{mode}.bin"),
            ],
            dir.path(),
        );
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let sa = fs::read(dir.path().join("sa.bin")).unwrap();
    let aw = fs::read(dir.path().join("s2ta-aw.bin")).unwrap();
    assert!(!sa.is_empty());
    assert_eq!(sa, aw, "numeric outputs must not depend on the mode");
}

#[test]
fn report_compares_against_named_baseline() {
    let dir = tempfile::tempdir().unwrap();
    for mode in ["sa-zvcg", "s2ta-aw"] {
        let out = s2ta(
            &[
                "simulate",
                "--builtin",
                "alexnet",
                "--mode",
                mode,
                "--a-nnz",
                "4",
                "--seed",
                "3",
                "--out",
                &format!("{mode}.json"),
            ],
            dir.path(),
        );
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let out = s2ta(
        &[
            "report",
            "sa-zvcg.json",
            "s2ta-aw.json",
            "--baseline",
            "sa-zvcg",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("sa-zvcg,sa-zvcg,"));
    assert!(lines[1].contains(",1.000000,"));

    // Unknown baseline is a config error.
    let out = s2ta(
        &[
            "report",
            "sa-zvcg.json",
            "s2ta-aw.json",
            "--baseline",
            "bogus",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn report_dumps_coefficients_and_buffer_account() {
    let dir = tempfile::tempdir().unwrap();
    let out = s2ta(&["report", "--dump-default-coeffs"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("active_mac = 1"));

    // The dumped table parses back.
    fs::write(dir.path().join("co.txt"), &text).unwrap();
    let out = s2ta(
        &[
            "simulate",
            "--builtin",
            "alexnet",
            "--mode",
            "sa",
            "--coeffs",
            "co.txt",
            "--out",
            "r.json",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let out = s2ta(
        &["report", "--buffer-account", "--mode", "s2ta-w"],
        dir.path(),
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("total_bytes_per_mac = 1.5625"));
    assert!(text.contains("note"));
}

#[test]
fn simulate_rejects_unknown_network_with_workload_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = s2ta(&["simulate", "--builtin", "lenet"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown-network"));

    // Strict DAP bound: 6/8 activations are not reachable in hardware.
    let out = s2ta(
        &[
            "simulate",
            "--builtin",
            "alexnet",
            "--mode",
            "s2ta-aw",
            "--a-nnz",
            "6",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage-cap-exceeded"));
}

#[test]
fn network_files_round_trip_through_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let net = s2ta_core::workloads::builtin("alexnet").unwrap();
    fs::write(dir.path().join("net.json"), net.to_json()).unwrap();
    let out = s2ta(
        &[
            "simulate",
            "--network",
            "net.json",
            "--mode",
            "s2ta-aw",
            "--seed",
            "5",
            "--out",
            "from_file.json",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = s2ta(
        &[
            "simulate",
            "--builtin",
            "alexnet",
            "--mode",
            "s2ta-aw",
            "--seed",
            "5",
            "--out",
            "from_builtin.json",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    assert_eq!(
        fs::read(dir.path().join("from_file.json")).unwrap(),
        fs::read(dir.path().join("from_builtin.json")).unwrap()
    );
}

#[test]
fn sweep_emits_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = s2ta(
        &[
            "sweep",
            "--modes",
            "s2ta-aw,sa-zvcg",
            "--a-nnz",
            "1,4,8",
            "--k",
            "512",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 2 * 3);
    assert!(lines[0].starts_with("mode,a_nnz,cycles,speedup"));
    // SA-ZVCG holds speedup 1.0 at every density point.
    for line in lines.iter().filter(|l| l.starts_with("sa-zvcg")) {
        let speedup: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert_eq!(speedup, 1.0);
    }
}

#[test]
fn simulate_emits_one_csv_row_per_layer() {
    let dir = tempfile::tempdir().unwrap();
    let out = s2ta(
        &[
            "simulate",
            "--builtin",
            "alexnet",
            "--mode",
            "sa",
            "--format",
            "csv",
            "--out",
            "r.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    // Header, 8 layers, one aggregate row.
    assert_eq!(lines.len(), 10);
    assert!(lines[0].starts_with("network,layer,kind,mode,rows,cols,k"));
    let columns = lines[0].split(',').count();
    for line in &lines[1..] {
        assert_eq!(line.split(',').count(), columns, "ragged row: {line}");
    }
    assert!(lines[1].starts_with("alexnet,conv1,conv,sa,3025,96,363,"));
    assert!(lines[9].starts_with("alexnet,total,aggregate,"));
}
