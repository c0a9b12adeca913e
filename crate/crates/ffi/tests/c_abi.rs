//! Compile and run the C smoke client against the built static library.

use std::path::PathBuf;
use std::process::Command;

fn static_lib() -> PathBuf {
    // target/<profile>/libs2ta_ffi.a next to this test binary's deps dir.
    let mut dir = std::env::current_exe().expect("test exe path");
    dir.pop(); // the test binary
    if dir.ends_with("deps") {
        dir.pop();
    }
    dir.join("libs2ta_ffi.a")
}

#[test]
fn c_client_compiles_links_and_runs() {
    let lib = static_lib();
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let out_dir = tempfile::tempdir().unwrap();
    let exe = out_dir.path().join("smoke");

    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let compile = Command::new(&cc)
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .expect("spawn the C compiler");
    assert!(
        compile.status.success(),
        "cc failed:\n{}",
        String::from_utf8_lossy(&compile.stderr)
    );

    let run = Command::new(&exe).output().expect("run the C client");
    assert!(
        run.status.success(),
        "smoke client failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&run.stdout),
        String::from_utf8_lossy(&run.stderr)
    );
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.contains("c abi smoke: ok"), "stdout: {stdout}");
}
