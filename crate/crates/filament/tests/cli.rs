//! End-to-end checks of the command-line interface: the generate → segment
//! round trip with its on-disk outputs, one-shot denoising, energy audits,
//! and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn filament(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_filament"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn generate_then_segment_round_trip_writes_the_run_outputs() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let dir = tmp.path();

    let gen_img = filament(
        &["generate", "tworegion", "--size", "48", "--shape", "disk", "--noise", "0.05",
          "--seed", "9", "--out", "img.pgm"],
        dir,
    );
    assert!(gen_img.status.success(), "generate tworegion failed: {}", stderr(&gen_img));

    let gen_seeds = filament(
        &["generate", "seeds", "--kind", "circle", "--size", "48", "--radius", "15",
          "--nodes", "20", "--out", "seeds.txt"],
        dir,
    );
    assert!(gen_seeds.status.success(), "generate seeds failed: {}", stderr(&gen_seeds));

    fs::write(
        dir.join("run.conf"),
        "# round-trip segmentation\n\
         image = img.pgm\n\
         curves = seeds.txt\n\
         sigma = 0.001\n\
         lambda = 0.5\n\
         dt = 0.05\n\
         max_steps = 40\n\
         h_target = 2.4\n\
         snapshot_every = 20\n\
         output_dir = run_out\n",
    )
    .expect("write config");

    let seg = filament(&["segment", "--config", "run.conf"], dir);
    let text = stdout(&seg);
    assert!(
        seg.status.success(),
        "segment failed: stdout `{text}` stderr `{}`",
        stderr(&seg)
    );
    assert!(text.contains("status:"), "missing status line in `{text}`");
    assert!(text.contains("energy:"), "missing energy line in `{text}`");

    let out_dir = dir.join("run_out");
    for name in ["energy.csv", "events.log", "u_final.pgm", "config.echo"] {
        assert!(out_dir.join(name).exists(), "{name} missing from the run directory");
    }
    let snapshots: Vec<String> = fs::read_dir(&out_dir)
        .expect("run dir readable")
        .map(|e| e.expect("dir entry").file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with("curves_") && n.ends_with(".txt"))
        .collect();
    assert!(!snapshots.is_empty(), "no curve snapshots despite snapshot_every = 20");

    let energy = fs::read_to_string(out_dir.join("energy.csv")).expect("energy.csv readable");
    let mut lines = energy.lines();
    assert_eq!(
        lines.next(),
        Some("step,length_term,gradient_term,fidelity_term,total"),
        "unexpected energy.csv header"
    );
    assert!(lines.count() >= 2, "energy.csv has fewer than 2 data rows");
}

#[test]
fn denoise_writes_a_pgm_and_reports_the_energy_drop() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let dir = tmp.path();
    filament(
        &["generate", "tworegion", "--size", "32", "--shape", "halfplane", "--noise", "0.08",
          "--seed", "4", "--out", "img.pgm"],
        dir,
    );
    filament(
        &["generate", "seeds", "--kind", "circle", "--size", "32", "--radius", "10",
          "--nodes", "16", "--out", "seeds.txt"],
        dir,
    );

    let den = filament(
        &["denoise", "--image", "img.pgm", "--curves", "seeds.txt", "--lambda", "0.5",
          "--out", "den.pgm"],
        dir,
    );
    let text = stdout(&den);
    assert!(den.status.success(), "denoise failed: {}", stderr(&den));
    assert!(text.contains("energy:") && text.contains("->"), "missing energy report in `{text}`");

    let pgm = fs::read(dir.join("den.pgm")).expect("denoised image written");
    assert!(pgm.starts_with(b"P5"), "denoise output is not binary PGM");

    // The solve minimizes the masked energy, so it can only improve on u0.
    let nums: Vec<f64> = text
        .split_whitespace()
        .filter_map(|t| t.parse().ok())
        .collect();
    assert_eq!(nums.len(), 2, "expected `energy: <before> -> <after>` in `{text}`");
    assert!(
        nums[1] <= nums[0],
        "denoise increased the energy: {} -> {}",
        nums[0],
        nums[1]
    );
}

#[test]
fn energy_audit_reports_terms_that_sum_to_the_total() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let dir = tmp.path();
    filament(
        &["generate", "tworegion", "--size", "32", "--noise", "0.05", "--seed", "2",
          "--out", "img.pgm"],
        dir,
    );
    filament(
        &["generate", "seeds", "--kind", "circle", "--size", "32", "--radius", "8",
          "--nodes", "12", "--out", "seeds.txt"],
        dir,
    );
    filament(
        &["denoise", "--image", "img.pgm", "--curves", "seeds.txt", "--lambda", "1.0",
          "--out", "u.pgm"],
        dir,
    );

    let audit = filament(
        &["energy", "--image", "img.pgm", "--curves", "seeds.txt", "--u", "u.pgm",
          "--sigma", "0.01", "--lambda", "1.0"],
        dir,
    );
    let text = stdout(&audit);
    assert!(audit.status.success(), "energy audit failed: {}", stderr(&audit));

    let value = |key: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{key} = ")))
            .unwrap_or_else(|| panic!("missing `{key}` in `{text}`"))
            .parse()
            .expect("numeric energy value")
    };
    let (len, grad, fid, total) =
        (value("length_term"), value("gradient_term"), value("fidelity_term"), value("total"));
    let sum = len + grad + fid;
    assert!(
        (sum - total).abs() <= 1e-12 * total.max(1.0),
        "terms {len} + {grad} + {fid} = {sum} do not add up to the total {total}"
    );
    assert!(len > 0.0 && fid > 0.0, "length {len} and fidelity {fid} should be positive here");
}

#[test]
fn usage_errors_exit_with_code_one() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let dir = tmp.path();

    let missing = filament(&["segment", "--config", "no_such.conf"], dir);
    assert_eq!(missing.status.code(), Some(1), "missing config should be a usage error");
    assert!(
        stderr(&missing).contains("error:"),
        "expected an error line, got `{}`",
        stderr(&missing)
    );

    filament(
        &["generate", "tworegion", "--size", "16", "--out", "img.pgm"],
        dir,
    );
    filament(
        &["generate", "seeds", "--kind", "circle", "--size", "16", "--radius", "5",
          "--nodes", "8", "--out", "seeds.txt"],
        dir,
    );
    let bad_lambda = filament(
        &["denoise", "--image", "img.pgm", "--curves", "seeds.txt", "--lambda=-1",
          "--out", "den.pgm"],
        dir,
    );
    assert_eq!(bad_lambda.status.code(), Some(1), "negative lambda should be a usage error");
    assert!(
        stderr(&bad_lambda).contains("must be positive"),
        "expected the positivity message, got `{}`",
        stderr(&bad_lambda)
    );

    let unknown = filament(&["frobnicate"], dir);
    assert_eq!(unknown.status.code(), Some(1), "unknown subcommand should be a usage error");
}

#[test]
fn help_and_version_succeed() {
    let tmp = tempfile::tempdir().expect("tempdir");
    for flag in ["--help", "--version"] {
        let out = filament(&[flag], tmp.path());
        assert!(out.status.success(), "{flag} should exit 0");
    }
    let out = filament(&["generate", "--help"], tmp.path());
    assert!(out.status.success(), "subcommand --help should exit 0");
}
