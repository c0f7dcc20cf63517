use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use s2k_core::dataset::MANIFEST_HEADER;
use s2k_core::evaluation::RESULTS_HEADER;
use s2k_core::kernels::GAUSSIAN_SIGMA_RANGE;

fn s2k(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_s2k"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn manifest_rows(dir: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(dir.join("manifest.csv")).unwrap();
    text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

fn column(name: &str) -> usize {
    MANIFEST_HEADER.iter().position(|h| *h == name).unwrap()
}

#[test]
fn synth_writes_count_rows_within_family_ranges() {
    let tmp = tempfile::tempdir().unwrap();
    let out = s2k(
        &["synth", "--family", "gaussian", "--count", "10", "--spec-size", "32", "--out", "ds", "--seed", "4"],
        tmp.path(),
    );
    ok(&out);
    let rows = manifest_rows(&tmp.path().join("ds"));
    assert_eq!(rows.len(), 10);
    for row in &rows {
        assert_eq!(row[column("family")], "gaussian");
        for key in ["sigma_x", "sigma_y"] {
            let s: f64 = row[column(key)].parse().unwrap();
            assert!((GAUSSIAN_SIGMA_RANGE.0..=GAUSSIAN_SIGMA_RANGE.1).contains(&s), "{s}");
        }
        assert!(tmp.path().join("ds").join(&row[column("file")]).is_file());
    }
}

#[test]
fn synth_is_reproducible_under_seed() {
    let tmp = tempfile::tempdir().unwrap();
    for dir in ["a", "b"] {
        ok(&s2k(
            &["synth", "--family", "motion", "--count", "4", "--spec-size", "32", "--out", dir, "--seed", "9"],
            tmp.path(),
        ));
    }
    let a = fs::read(tmp.path().join("a/manifest.csv")).unwrap();
    assert_eq!(a, fs::read(tmp.path().join("b/manifest.csv")).unwrap());
    let sa = fs::read(tmp.path().join("a/samples/00003.s2k1")).unwrap();
    assert_eq!(sa, fs::read(tmp.path().join("b/samples/00003.s2k1")).unwrap());
    ok(&s2k(
        &["synth", "--family", "motion", "--count", "4", "--spec-size", "32", "--out", "c", "--seed", "10"],
        tmp.path(),
    ));
    assert_ne!(a, fs::read(tmp.path().join("c/manifest.csv")).unwrap());
}

#[test]
fn synth_reads_hr_directory_and_rejects_empty_one() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&s2k(&["scenes", "--count", "2", "--size", "96", "--out", "hr"], tmp.path()));
    assert!(tmp.path().join("hr/scene_0001.png").is_file());
    ok(&s2k(
        &["synth", "--count", "3", "--spec-size", "32", "--hr-dir", "hr", "--out", "ds", "--family", "disk"],
        tmp.path(),
    ));
    assert_eq!(manifest_rows(&tmp.path().join("ds")).len(), 3);
    fs::create_dir(tmp.path().join("empty")).unwrap();
    let out = s2k(&["synth", "--count", "3", "--hr-dir", "empty", "--out", "x"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(!out.stderr.is_empty());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(s2k(&["synth", "--count", "3"], tmp.path()).status.code(), Some(2));
    assert_eq!(s2k(&["bogus"], tmp.path()).status.code(), Some(2));
    assert_eq!(
        s2k(&["synth", "--count", "3", "--out", "x", "--spec-size", "48"], tmp.path()).status.code(),
        Some(2)
    );
    assert_eq!(s2k(&["synth", "--count", "3", "--out", "x", "--scale", "5"], tmp.path()).status.code(), Some(2));
    assert_eq!(
        s2k(&["verify-theory", "--dataset", "missing", "--out", "r.csv"], tmp.path()).status.code(),
        Some(3)
    );
    assert_eq!(s2k(&["--help"], tmp.path()).status.code(), Some(0));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("synth.conf"),
        "# dataset settings\nfamily = disk\ncount = 5\nspec_size = 32\nout = from_file\n",
    )
    .unwrap();
    ok(&s2k(&["synth", "--config", "synth.conf", "--count", "2"], tmp.path()));
    let rows = manifest_rows(&tmp.path().join("from_file"));
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r[column("family")] == "disk"));
    fs::write(tmp.path().join("bad.conf"), "count 5\n").unwrap();
    assert_eq!(
        s2k(&["synth", "--config", "bad.conf", "--out", "y"], tmp.path()).status.code(),
        Some(2)
    );
}

#[test]
fn verify_theory_reports_every_pair() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&s2k(&["synth", "--count", "4", "--spec-size", "32", "--out", "ds"], tmp.path()));
    let out = s2k(
        &["verify-theory", "--dataset", "ds", "--tau", "1e-3", "--norm", "energy1", "--out", "rep.csv"],
        tmp.path(),
    );
    ok(&out);
    let text = fs::read_to_string(tmp.path().join("rep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("id,family,phi_freq,phi_spatial,upper_bound_freq,lower_bound_spatial,ratio"));
    assert!(lines[1..].iter().all(|l| l.contains(",energy1,")));
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(summary.starts_with("pairs=4 fraction_ratio_below_1="), "{summary}");
}

#[test]
fn train_estimate_evaluate_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    ok(&s2k(&["synth", "--count", "6", "--spec-size", "32", "--out", "ds", "--seed", "3"], p));
    let train = |out: &str| {
        s2k(
            &[
                "train", "--dataset", "ds", "--arch", "unet-3-4", "--epochs", "2", "--batch", "2", "--seed", "1",
                "--out", out, "--loss-weights", "100,1,1", "--checkpoint-every", "1",
            ],
            p,
        )
    };
    ok(&train("ck1"));
    ok(&train("ck2"));
    let log = fs::read_to_string(p.join("ck1/losses.csv")).unwrap();
    assert_eq!(log, fs::read_to_string(p.join("ck2/losses.csv")).unwrap());
    assert_eq!(log.lines().count(), 3);
    assert_eq!(
        fs::read(p.join("ck1/generator.s2k1")).unwrap(),
        fs::read(p.join("ck2/generator.s2k1")).unwrap()
    );
    assert!(p.join("ck1/generator_epoch0002.s2k1").is_file());

    // Datasets are relocatable.
    fs::rename(p.join("ds"), p.join("moved")).unwrap();
    ok(&s2k(
        &["evaluate", "--dataset", "moved", "--ckpt", "ck1/generator.s2k1", "--nsr", "1e-3", "--out", "res.csv"],
        p,
    ));
    let text = fs::read_to_string(p.join("res.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), RESULTS_HEADER.join(","));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6 + 2);
    assert_eq!(rows[6][0], "mean");
    assert_eq!(rows[7][0], "median");
    let dv_gt = RESULTS_HEADER.iter().position(|h| *h == "dv_gt").unwrap();
    assert!(rows.iter().all(|r| r[dv_gt] == "0"));

    ok(&s2k(&["scenes", "--count", "1", "--size", "64", "--out", "imgs"], p));
    ok(&s2k(
        &["estimate", "--ckpt", "ck1/generator.s2k1", "--input", "imgs", "--native-size", "15", "--out", "est"],
        p,
    ));
    assert!(p.join("est/scene_0000_kernel.s2k1").is_file());
    assert!(p.join("est/scene_0000_kernel.png").is_file());
    assert_eq!(
        s2k(&["estimate", "--input", "imgs", "--out", "est"], p).status.code(),
        Some(2),
        "either a checkpoint or the baseline is required"
    );
}

#[test]
fn spectral_baseline_estimates_blurred_image() {
    use s2k_core::degradation::{convolve2d, Boundary};
    use s2k_core::imaging::save_image;
    use s2k_core::kernels::KernelParams;
    use s2k_core::nn::load_tensors;
    use s2k_core::scenes::dead_leaves;

    let tmp = tempfile::tempdir().unwrap();
    let k = KernelParams::gaussian(2.0, 2.0, 0.0).unwrap().synthesize().unwrap();
    let img = convolve2d(&dead_leaves(128, 5), &k, Boundary::Circular).unwrap();
    save_image(tmp.path().join("blurred.png"), &img).unwrap();
    ok(&s2k(
        &["estimate", "--baseline", "spectral", "--input", "blurred.png", "--out", "est"],
        tmp.path(),
    ));
    let records = load_tensors(tmp.path().join("est/blurred_kernel.s2k1")).unwrap();
    assert_eq!(records[0].dims, vec![15, 15]);
    let sum: f32 = records[0].values.iter().sum();
    assert!((sum - 1.0).abs() < 1e-5);
}
