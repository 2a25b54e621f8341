use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_blockcirc"))
}

fn arch(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("archs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn accuracy(o: &Output) -> f64 {
    stdout(o).trim().strip_prefix("accuracy ").unwrap().parse().unwrap()
}

fn small_arch(dir: &Path) -> PathBuf {
    let path = dir.join("small.arch");
    std::fs::write(&path, "input shape=8\nfc out=16 k=4 act=relu\nfc out=4 k=4 act=identity\n").unwrap();
    path
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["bench", "--frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["bench", "--arch", "/no/such/file.arch"]).status.code(), Some(1));
    assert_eq!(run(&["eval", "--model", "/no/such/model.bcm", "--data", "synth"]).status.code(), Some(1));
    assert_eq!(run(&["explore", "--arch", arch("toy.arch").to_str().unwrap(), "--metric", "fastest"]).status.code(), Some(1));
}

#[test]
fn corrupt_inputs_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.bcm");
    std::fs::write(&junk, b"not a model").unwrap();
    assert_eq!(run(&["bench", "--model", junk.to_str().unwrap()]).status.code(), Some(2));
    let bad = dir.path().join("bad.arch");
    std::fs::write(&bad, "input shape=4\nfc out=3 k=banana\n").unwrap();
    assert_eq!(run(&["bench", "--arch", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn toy_layer_compresses_three_times() {
    let o = run(&["compress-report", "--arch", arch("toy.arch").to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    let total = text.lines().last().unwrap();
    assert_eq!(total.rsplit(',').next().unwrap(), "3");
    let halved = stdout(&run(&["compress-report", "--arch", arch("toy.arch").to_str().unwrap(), "--bits", "16"]));
    assert_eq!(halved.lines().last().unwrap().rsplit(',').next().unwrap(), "6");
}

#[test]
fn grad_check_passes_on_the_default_architecture() {
    let o = run(&["grad-check", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("max_rel_error"));
}

#[test]
fn grad_check_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let a = small_arch(dir.path());
    let o = run(&["grad-check", "--arch", a.to_str().unwrap(), "--tolerance", "1e-30"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn untrained_model_scores_chance_on_structureless_data() {
    let dir = tempfile::tempdir().unwrap();
    let a = small_arch(dir.path());
    let model = dir.path().join("m.bcm");
    let trained = run(&[
        "train", "--data", "synth", "--arch", a.to_str().unwrap(), "--epochs", "1", "--lr", "0", "--seed", "5", "--out",
        model.to_str().unwrap(),
    ]);
    assert!(trained.status.success(), "{}", String::from_utf8_lossy(&trained.stderr));
    let o = run(&[
        "eval", "--model", model.to_str().unwrap(), "--data", "synth", "--synth-separation", "0", "--synth-per-class", "1000",
    ]);
    assert!(o.status.success());
    let acc = accuracy(&o);
    assert!((acc - 0.25).abs() <= 0.05, "{acc}");
}

#[test]
fn training_is_reproducible_and_reports_parse() {
    let dir = tempfile::tempdir().unwrap();
    let a = small_arch(dir.path());
    let train = |name: &str| {
        let out = dir.path().join(name);
        let o = run(&[
            "train", "--data", "synth", "--arch", a.to_str().unwrap(), "--epochs", "3", "--lr", "0.05", "--seed", "2",
            "--synth-separation", "6", "--quantize", "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        (std::fs::read(&out).unwrap(), out.with_extension("csv"), accuracy(&o))
    };
    let (m1, csv1, acc1) = train("a.bcm");
    let (m2, csv2, acc2) = train("b.bcm");
    assert_eq!(m1, m2);
    assert_eq!(acc1, acc2);
    assert!(acc1 > 0.9, "{acc1}");

    let rows = |p: &Path| {
        let mut r = csv::Reader::from_path(p).unwrap();
        assert_eq!(r.headers().unwrap(), vec!["epoch", "loss", "accuracy", "wall_seconds", "real_mults"]);
        r.records()
            .map(|row| {
                let row = row.unwrap();
                // Wall time is the one column that differs between runs.
                (row[0].to_string(), row[1].parse::<f64>().unwrap(), row[2].parse::<f64>().unwrap(), row[4].parse::<u64>().unwrap())
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(rows(&csv1), rows(&csv2));
    assert_eq!(rows(&csv1).len(), 3);

    let model = dir.path().join("a.bcm");
    let q = run(&["eval", "--model", model.to_str().unwrap(), "--data", "synth", "--synth-separation", "6", "--quantized"]);
    assert!((accuracy(&q) - acc1).abs() <= 0.01);
}

#[test]
fn explore_writes_the_full_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("grid.csv");
    let o = run(&[
        "explore", "--arch", arch("mnist-mlp.arch").to_str().unwrap(), "--p-max", "16", "--d-max", "3", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("chosen p="));
    let mut r = csv::Reader::from_path(&out).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["p", "d", "cycles", "gops", "power_w", "gops_per_w", "feasible", "fallback_used"]);
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 16 * 3);
    for row in &rows {
        let (gops, power, eff): (f64, f64, f64) = (row[3].parse().unwrap(), row[4].parse().unwrap(), row[5].parse().unwrap());
        assert_eq!(eff, gops / power);
    }
    let capped = run(&["explore", "--arch", arch("toy.arch").to_str().unwrap(), "--metric", "perf-capped:0.1"]);
    assert_eq!(capped.status.code(), Some(2));
}

#[test]
fn bench_reports_fewer_multiplies_for_large_blocks() {
    let o = run(&["bench", "--arch", arch("mnist-mlp.arch").to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    let total = text.lines().last().unwrap();
    let cols: Vec<&str> = total.split(',').collect();
    assert_eq!(cols[1], (784 * 256 + 256 * 10).to_string());
    assert!(cols[3].parse::<f64>().unwrap() > 4.0, "{total}");
}
