use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgnn-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = lab(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

/// Drops the named columns so that wall-clock fields can be ignored.
fn without_columns(csv: &str, drop: &[&str]) -> Vec<Vec<String>> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let keep: Vec<usize> = (0..header.len())
        .filter(|&i| !drop.contains(&header[i]))
        .collect();
    std::iter::once(header.join(","))
        .chain(lines.map(str::to_string))
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            keep.iter()
                .map(|&i| cells.get(i).unwrap_or(&"").to_string())
                .collect()
        })
        .collect()
}

#[test]
fn train_is_deterministic_apart_from_timing() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&[
            "train",
            "--model",
            "sgnn",
            "--fn",
            "3",
            "--dim",
            "2",
            "--neurons",
            "8",
            "--data",
            "400",
            "--batch",
            "32",
            "--seed",
            "1",
            "--max-epochs",
            "6",
            "--out",
            out.to_str().unwrap(),
        ]);
        (
            read(&out.join("train_log.csv")),
            read(&out.join("model.txt")),
        )
    };
    let (log_a, model_a) = run("a");
    let (log_b, model_b) = run("b");
    assert!(log_a.starts_with("epoch,train_mse,val_mse,val_rss,seconds\n"));
    assert_eq!(log_a.lines().count(), 7);
    assert_eq!(
        without_columns(&log_a, &["seconds"]),
        without_columns(&log_b, &["seconds"])
    );
    assert_eq!(model_a, model_b);
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        &["train", "--model", "transformer"][..],
        &["train", "--fn", "0"],
        &["train", "--batch", "0"],
        &["compare-grbfnn", "--dim", "5"],
        &["train", "--fn", "1,2"],
        &[],
    ] {
        let out = lab(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn missing_model_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.txt");
    let out = lab(&[
        "surface",
        "--model-file",
        missing.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn surface_of_a_constant_function() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    ok(&[
        "train",
        "--fn",
        "10",
        "--neurons",
        "4",
        "--data",
        "200",
        "--max-epochs",
        "3",
        "--out",
        d,
    ]);
    let model = dir.path().join("model.txt");
    ok(&[
        "surface",
        "--model-file",
        model.to_str().unwrap(),
        "--fn",
        "10",
        "--grid",
        "64",
        "--out",
        d,
    ]);
    let csv = read(&dir.path().join("surface.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x1,x2,prediction,truth"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4096);
    assert!(rows
        .iter()
        .all(|r| r.split(',').nth(3) == Some("1.0000000000000000e0")));

    ok(&["surface", "--fn", "9", "--grid", "5", "--out", d]);
    let grid = read(&dir.path().join("grid.csv"));
    // f9 along x2 = 0 (the middle row) equals x1
    for line in grid.lines().skip(1 + 2 * 5).take(5) {
        let v: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(v[1], 0.0);
        assert!((v[2] - v[0]).abs() < 1e-12);
    }
}

#[test]
fn scale_dim_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "scale-dim",
        "--fn",
        "1,3",
        "--dim",
        "2,3",
        "--neurons",
        "4",
        "--data",
        "200",
        "--batch",
        "64",
        "--reps",
        "2",
        "--max-epochs",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let csv = read(&dir.path().join("scale_dim.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "dim,sec_per_epoch,final_loss,fn,rep");
    assert_eq!(lines.len(), 1 + 2 * 2 * 2 + 2);
    assert!(lines[9].starts_with("summary,") && lines[9].ends_with(",1,median"));
    assert!(lines[10].ends_with(",3,median"));
}

#[test]
fn compare_grbfnn_row_counts() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "compare-grbfnn",
        "--fn",
        "4",
        "--dim",
        "2",
        "--neurons",
        "3",
        "--data",
        "100",
        "--reps",
        "1",
        "--max-epochs",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let agg = read(&dir.path().join("compare_grbfnn.csv"));
    let rows: Vec<&str> = agg.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("4,sgnn,2,3,21,1,"));
    assert!(rows[1].starts_with("4,grbfnn,2,3,36,1,"));
    assert_eq!(
        read(&dir.path().join("compare_grbfnn_runs.csv"))
            .lines()
            .count(),
        3
    );
}

#[test]
fn compare_mlp_reports_parameter_counts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    ok(&[
        "compare-mlp",
        "--model",
        "sgnn,relu",
        "--neurons",
        "20,40",
        "--layers",
        "4",
        "--data",
        "100",
        "--reps",
        "2",
        "--max-epochs",
        "2",
        "--out",
        d,
    ]);
    let csv = read(&dir.path().join("compare_mlp.csv"));
    let rows: Vec<Vec<&str>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 4 * 2);
    let params = |model: &str, n: &str| {
        rows.iter()
            .find(|r| r[1] == model && r[3] == n)
            .map(|r| r[5].to_string())
            .unwrap()
    };
    assert_eq!(params("sgnn", "20"), "1360");
    assert_eq!(params("sgnn", "40"), "5120");
    assert_eq!(params("relu", "20"), "1381");
    assert_eq!(params("relu", "40"), "5161");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("out");
    std::fs::write(
        &cfg,
        format!(
            "command=train\nmodel=relu\nlayers=2\nneurons=5\ndata=100\nmax_epochs=9\nout={}\n",
            out.display()
        ),
    )
    .unwrap();
    ok(&["--config", cfg.to_str().unwrap(), "--max-epochs", "2"]);
    assert_eq!(read(&out.join("train_log.csv")).lines().count(), 3);
    assert!(read(&out.join("model.txt")).contains("activation=relu"));
}

#[test]
fn verification_commands_pass() {
    let dir = tempfile::tempdir().unwrap();
    assert!(ok(&["gradcheck", "--reps", "5"])
        .lines()
        .all(|l| l.starts_with("PASS")));
    assert!(
        ok(&["equivalence", "--dim", "3", "--neurons", "4", "--reps", "3"]).starts_with("PASS")
    );
    let text = ok(&["hessian", "--out", dir.path().to_str().unwrap()]);
    assert!(text.trim_end().ends_with("PASS"));
    let spectrum = read(&dir.path().join("spectrum.csv"));
    assert!(spectrum.starts_with("rank,eigenvalue_source,eigenvalue_projected\n"));
    assert_eq!(spectrum.lines().count(), 1 + 27);
}
