//! The `sgnn-lab` commands. Each writes its CSV files under `--out` and a
//! short human-readable summary to `log`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use sgnn_core::candidates::{grid_points, grid_slice, make_candidate};
use sgnn_core::io::{fmt_f64, read_model, write_model};
use sgnn_core::Matrix;

use crate::cli::{Cli, CommandKind};
use crate::error::{read_file, write_file, LabError, LabResult};
use crate::runs::{run_once, ModelArg, RunResult, RunSpec, DOMAIN};
use crate::stats::{linear_fit, mean, median, min};
use crate::suites::{equivalence_suite, gradcheck_suite, hessian_study};

pub const DEFAULT_OUT: &str = "sgnn-lab-out";

fn single<T: Copy + std::fmt::Debug>(values: &[T], default: T, flag: &str) -> LabResult<T> {
    match values {
        [] => Ok(default),
        [v] => Ok(*v),
        _ => Err(LabError::usage(format!(
            "--{flag} takes one value for this command, got {values:?}"
        ))),
    }
}

fn list_or<T: Clone>(values: &[T], default: &[T]) -> Vec<T> {
    if values.is_empty() {
        default.to_vec()
    } else {
        values.to_vec()
    }
}

fn cell(v: Option<f64>) -> String {
    v.filter(|x| !x.is_nan()).map(fmt_f64).unwrap_or_default()
}

fn io_err(e: std::io::Error) -> LabError {
    LabError::Io {
        path: PathBuf::from("<output>"),
        source: e,
    }
}

/// Shared training knobs with their per-command defaults applied.
struct Knobs {
    data: usize,
    batch: usize,
    reps: usize,
    seed: u64,
    max_epochs: usize,
    patience: usize,
    out: PathBuf,
}

impl Knobs {
    fn new(cli: &Cli, data: usize, batch: usize) -> LabResult<Self> {
        let k = Knobs {
            data: cli.data.unwrap_or(data),
            batch: cli.batch.unwrap_or(batch),
            reps: cli.reps.unwrap_or(5),
            seed: cli.seed.unwrap_or(0),
            max_epochs: cli.max_epochs.unwrap_or(2000),
            patience: cli.patience.unwrap_or(4),
            out: cli
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        };
        if k.batch == 0 || k.reps == 0 || k.patience == 0 {
            return Err(LabError::usage(
                "--batch, --reps and --patience must be >= 1",
            ));
        }
        if k.data < 10 {
            return Err(LabError::usage("--data must be >= 10"));
        }
        Ok(k)
    }

    #[allow(clippy::too_many_arguments)]
    fn spec(
        &self,
        model: ModelArg,
        fn_id: u8,
        dim: usize,
        neurons: usize,
        layers: usize,
        rep: usize,
    ) -> RunSpec {
        RunSpec {
            model,
            fn_id,
            dim,
            neurons,
            layers,
            data: self.data,
            batch: self.batch,
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed: self.seed,
            rep: rep as u64,
        }
    }
}

fn run_logged(spec: &RunSpec, log: &mut dyn Write) -> LabResult<RunResult> {
    let r = run_once(spec)?;
    writeln!(
        log,
        "  {} fn={} d={} N={} rep={}: epochs={} final={:.3e} sec/epoch={}",
        spec.model,
        spec.fn_id,
        spec.dim,
        spec.neurons,
        spec.rep,
        r.report.epochs_run,
        r.final_loss(),
        r.sec_per_epoch()
            .map(|s| format!("{s:.4}"))
            .unwrap_or_else(|| "-".into())
    )
    .map_err(io_err)?;
    Ok(r)
}

pub fn execute(cli: &Cli, log: &mut dyn Write) -> LabResult<()> {
    match cli
        .command
        .ok_or_else(|| LabError::usage("missing <COMMAND>"))?
    {
        CommandKind::Train => cmd_train(cli, log),
        CommandKind::ScaleDim => cmd_scale_dim(cli, log),
        CommandKind::CompareGrbfnn => cmd_compare_grbfnn(cli, log),
        CommandKind::CompareMlp => cmd_compare_mlp(cli, log),
        CommandKind::Surface => cmd_surface(cli, log),
        CommandKind::Gradcheck => cmd_gradcheck(cli, log),
        CommandKind::Equivalence => cmd_equivalence(cli, log),
        CommandKind::Hessian => cmd_hessian(cli, log),
    }
}

fn wrote(log: &mut dyn Write, path: &Path) -> LabResult<()> {
    writeln!(log, "wrote {}", path.display()).map_err(io_err)
}

fn cmd_train(cli: &Cli, log: &mut dyn Write) -> LabResult<()> {
    let k = Knobs::new(cli, 2048, 64)?;
    let spec = k.spec(
        single(&cli.model, ModelArg::Sgnn, "model")?,
        single(&cli.fns, 3, "fn")?,
        single(&cli.dim, 2, "dim")?,
        single(&cli.neurons, 20, "neurons")?,
        single(&cli.layers, 4, "layers")?,
        0,
    );
    let r = run_once(&spec)?;
    let log_path = k.out.join("train_log.csv");
    write_file(&log_path, &r.report.to_csv())?;
    let model_path = k.out.join("model.txt");
    write_file(&model_path, &write_model(&r.model))?;
    writeln!(
        log,
        "{} on f{} (d={}): {} params, {} epochs ({}), final train MSE {}, final validation MSE {}, best validation MSE {} at epoch {}",
        spec.model,
        spec.fn_id,
        spec.dim,
        r.params,
        r.report.epochs_run,
        r.report.stop_reason,
        cell(r.report.train_mse.last().copied()),
        cell(r.report.final_val_loss()),
        cell(Some(r.best_loss())),
        r.report.best_epoch
    )
    .map_err(io_err)?;
    wrote(log, &log_path)?;
    wrote(log, &model_path)
}

/// Per-dimension median sec/epoch for one function, in dimension order.
pub fn median_sec_per_epoch(results: &[RunResult], fn_id: u8) -> Vec<(usize, f64)> {
    let mut by_dim: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in results.iter().filter(|r| r.spec.fn_id == fn_id) {
        by_dim
            .entry(r.spec.dim)
            .or_default()
            .push(r.sec_per_epoch().unwrap_or(f64::NAN));
    }
    by_dim
        .into_iter()
        .filter_map(|(d, v)| median(&v).map(|m| (d, m)))
        .collect()
}

/// `dim,sec_per_epoch,final_loss,fn,rep`, one row per run, then one row
/// per function `summary,<slope>,<r²>,<fn>,median` fitted to the
/// per-dimension median sec/epoch.
pub fn scale_dim_csv(results: &[RunResult]) -> String {
    let mut s = String::from("dim,sec_per_epoch,final_loss,fn,rep\n");
    let mut fns = Vec::new();
    for r in results {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.spec.dim,
            cell(r.sec_per_epoch()),
            cell(Some(r.final_loss())),
            r.spec.fn_id,
            r.spec.rep
        ));
        if !fns.contains(&r.spec.fn_id) {
            fns.push(r.spec.fn_id);
        }
    }
    for f in fns {
        let pts = median_sec_per_epoch(results, f);
        let xs: Vec<f64> = pts.iter().map(|p| p.0 as f64).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let fit = linear_fit(&xs, &ys);
        s.push_str(&format!(
            "summary,{},{},{},median\n",
            cell(fit.map(|f| f.slope)),
            cell(fit.map(|f| f.r_squared)),
            f
        ));
    }
    s
}

fn cmd_scale_dim(cli: &Cli, log: &mut dyn Write) -> LabResult<()> {
    let k = Knobs::new(cli, 16384, 256)?;
    let model = single(&cli.model, ModelArg::Sgnn, "model")?;
    let neurons = single(&cli.neurons, 20, "neurons")?;
    let layers = single(&cli.layers, 4, "layers")?;
    let fns = list_or(&cli.fns, &[3]);
    let dims = list_or(&cli.dim, &[2, 3, 4, 5]);
    let mut results = Vec::new();
    for &f in &fns {
        for &d in &dims {
            for rep in 0..k.reps {
                results.push(run_logged(&k.spec(model, f, d, neurons, layers, rep), log)?);
            }
        }
    }
    let csv = scale_dim_csv(&results);
    for line in csv.lines().filter(|l| l.starts_with("summary")) {
        writeln!(log, "{line}").map_err(io_err)?;
    }
    let path = k.out.join("scale_dim.csv");
    write_file(&path, &csv)?;
    wrote(log, &path)
}

const RAW_HEADER: &str =
    "fn,model,dim,neurons,layers,params,rep,epochs,sec_per_epoch,final_loss,best_loss\n";

fn raw_row(r: &RunResult) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}\n",
        r.spec.fn_id,
        r.spec.model,
        r.spec.dim,
        r.spec.neurons,
        layers_column(r),
        r.params,
        r.spec.rep,
        r.report.epochs_run,
        cell(r.sec_per_epoch()),
        cell(Some(r.final_loss())),
        cell(Some(r.best_loss()))
    )
}

fn layers_column(r: &RunResult) -> usize {
    match r.spec.model {
        ModelArg::Sgnn => r.spec.dim,
        ModelArg::Grbfnn => 1,
        ModelArg::Relu | ModelArg::Sigmoid => r.spec.layers,
    }
}

/// Raw per-run rows with the common header.
pub fn runs_csv(results: &[RunResult]) -> String {
    let mut s = String::from(RAW_HEADER);
    for r in results {
        s.push_str(&raw_row(r));
    }
    s
}

/// One row per (function, model): mean epochs, median sec/epoch, and the
/// mean and minimum over repetitions of both the final and the best
/// validation MSE.
pub fn compare_grbfnn_csv(results: &[RunResult]) -> String {
    let mut s = String::from(
        "fn,model,dim,neurons,params,reps,epochs,sec_per_epoch,ave_loss,min_loss,ave_best_loss,min_best_loss\n",
    );
    let mut groups: Vec<((u8, ModelArg), Vec<&RunResult>)> = Vec::new();
    for r in results {
        let key = (r.spec.fn_id, r.spec.model);
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => g.1.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    for ((f, model), runs) in groups {
        let epochs: Vec<f64> = runs.iter().map(|r| r.report.epochs_run as f64).collect();
        let spe: Vec<f64> = runs
            .iter()
            .map(|r| r.sec_per_epoch().unwrap_or(f64::NAN))
            .collect();
        let fin: Vec<f64> = runs.iter().map(|r| r.final_loss()).collect();
        let best: Vec<f64> = runs.iter().map(|r| r.best_loss()).collect();
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            f,
            model,
            runs[0].spec.dim,
            runs[0].spec.neurons,
            runs[0].params,
            runs.len(),
            cell(mean(&epochs)),
            cell(median(&spe)),
            cell(mean(&fin)),
            cell(min(&fin)),
            cell(mean(&best)),
            cell(min(&best))
        ));
    }
    s
}

fn cmd_compare_grbfnn(cli: &Cli, log: &mut dyn Write) -> LabResult<()> {
    let dim = single(&cli.dim, 3, "dim")?;
    if !(2..=3).contains(&dim) {
        return Err(LabError::usage("compare-grbfnn runs at --dim 2 or 3"));
    }
    let k = Knobs::new(cli, if dim == 2 { 1024 } else { 2048 }, 64)?;
    let neurons = single(&cli.neurons, 10, "neurons")?;
    let models = list_or(&cli.model, &[ModelArg::Sgnn, ModelArg::Grbfnn]);
    let fns = list_or(&cli.fns, &(1..=10).collect::<Vec<u8>>());
    let mut results = Vec::new();
    for &f in &fns {
        for rep in 0..k.reps {
            for &m in &models {
                results.push(run_logged(&k.spec(m, f, dim, neurons, 4, rep), log)?);
            }
        }
    }
    let path = k.out.join("compare_grbfnn.csv");
    write_file(&path, &compare_grbfnn_csv(&results))?;
    wrote(log, &path)?;
    let raw = k.out.join("compare_grbfnn_runs.csv");
    write_file(&raw, &runs_csv(&results))?;
    wrote(log, &raw)
}

fn cmd_compare_mlp(cli: &Cli, log: &mut dyn Write) -> LabResult<()> {
    let k = Knobs::new(cli, 16384, 256)?;
    let dim = single(&cli.dim, 4, "dim")?;
    let f = single(&cli.fns, 5, "fn")?;
    let models = list_or(&cli.model, &[ModelArg::Sgnn, ModelArg::Relu]);
    let layers = list_or(&cli.layers, &[4]);
    let neurons = list_or(&cli.neurons, &[20, 40]);
    let mut configs = Vec::new();
    for &m in &models {
        for &n in &neurons {
            match m {
                ModelArg::Sgnn | ModelArg::Grbfnn => configs.push((m, n, layers[0])),
                ModelArg::Relu | ModelArg::Sigmoid => {
                    configs.extend(layers.iter().map(|&l| (m, n, l)));
                }
            }
        }
    }
    let mut results = Vec::new();
    for &(m, n, l) in &configs {
        for rep in 0..k.reps {
            results.push(run_logged(&k.spec(m, f, dim, n, l, rep), log)?);
        }
    }
    let path = k.out.join("compare_mlp.csv");
    write_file(&path, &runs_csv(&results))?;
    wrote(log, &path)
}

/// `x1,x2,value` rows of `f` on an `n × n` grid, other coordinates zero.
pub fn grid_csv(fn_id: u8, dim: usize, n: usize) -> LabResult<String> {
    let f = make_candidate(fn_id, dim)?;
    let g = grid_points(n, DOMAIN.0, DOMAIN.1);
    let values = grid_slice(&f, n, DOMAIN.0, DOMAIN.1)?;
    let mut s = String::from("x1,x2,value\n");
    for r in 0..n {
        for c in 0..n {
            s.push_str(&format!(
                "{},{},{}\n",
                fmt_f64(g[c]),
                fmt_f64(g[r]),
                fmt_f64(values[(r, c)])
            ));
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub csv: String,
    pub max_error: f64,
    /// Whether the largest error sits on the outermost ring of grid points.
    pub max_on_boundary: bool,
}

pub fn surface(model_text: &str, fn_id: u8, n: usize) -> LabResult<Surface> {
    let model = read_model(model_text)?;
    let dim = model.dim();
    if dim < 2 {
        return Err(LabError::usage("surface needs a model with d >= 2"));
    }
    let f = make_candidate(fn_id, dim)?;
    let truth = grid_slice(&f, n, DOMAIN.0, DOMAIN.1)?;
    let g = grid_points(n, DOMAIN.0, DOMAIN.1);
    let pts = Matrix::from_fn(n * n, dim, |i, c| match c {
        0 => g[i % n],
        1 => g[i / n],
        _ => 0.0,
    });
    let pred = model.predict(&pts)?;
    let mut s = String::from("x1,x2,prediction,truth\n");
    let (mut max_error, mut at) = (-1.0, (0, 0));
    for r in 0..n {
        for c in 0..n {
            let p = pred[r * n + c];
            let t = truth[(r, c)];
            if (p - t).abs() > max_error {
                max_error = (p - t).abs();
                at = (r, c);
            }
            s.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(g[c]),
                fmt_f64(g[r]),
                fmt_f64(p),
                fmt_f64(t)
            ));
        }
    }
    let edge = |i: usize| i == 0 || i + 1 == n;
    Ok(Surface {
        csv: s,
        max_error,
        max_on_boundary: edge(at.0) || edge(at.1),
    })
}

fn cmd_surface(cli: &Cli, log: &mut dyn Write) -> LabResult<()> {
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let n = cli.grid.unwrap_or(64);
    if n < 2 {
        return Err(LabError::usage("--grid must be >= 2"));
    }
    let f = single(&cli.fns, 3, "fn")?;
    match &cli.model_file {
        None => {
            let path = out.join("grid.csv");
            write_file(&path, &grid_csv(f, single(&cli.dim, 2, "dim")?, n)?)?;
            wrote(log, &path)
        }
        Some(file) => {
            let s = surface(&read_file(file)?, f, n)?;
            writeln!(
                log,
                "max |prediction - truth| = {:.3e} ({})",
                s.max_error,
                if s.max_on_boundary {
                    "on the boundary ring"
                } else {
                    "in the interior"
                }
            )
            .map_err(io_err)?;
            let path = out.join("surface.csv");
            write_file(&path, &s.csv)?;
            wrote(log, &path)
        }
    }
}

fn cmd_gradcheck(cli: &Cli, log: &mut dyn Write) -> LabResult<()> {
    let checks = gradcheck_suite(cli.seed.unwrap_or(0), cli.reps.unwrap_or(20))?;
    let mut failed = Vec::new();
    for c in &checks {
        writeln!(log, "{} {c}", if c.passed() { "PASS" } else { "FAIL" }).map_err(io_err)?;
        if !c.passed() {
            failed.push(c.family);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(LabError::Verification(format!(
            "gradient mismatch in {failed:?}"
        )))
    }
}

fn cmd_equivalence(cli: &Cli, log: &mut dyn Write) -> LabResult<()> {
    let dims = list_or(&cli.dim, &[2, 3, 4]);
    let neurons = list_or(&cli.neurons, &[2, 3, 4, 5]);
    let s = equivalence_suite(
        &dims,
        &neurons,
        cli.reps.unwrap_or(50),
        cli.data.unwrap_or(1000),
        cli.seed.unwrap_or(0),
    )?;
    writeln!(
        log,
        "{} models={} points={} max_rel_error={:.3e} worst widths {:?}",
        if s.passed() { "PASS" } else { "FAIL" },
        s.models,
        s.points,
        s.max_rel_error,
        s.worst_widths
    )
    .map_err(io_err)?;
    if s.passed() {
        Ok(())
    } else {
        Err(LabError::Verification(format!(
            "SGNN and converted GRBFNN differ by {:e} (widths {:?})",
            s.max_rel_error, s.worst_widths
        )))
    }
}

fn cmd_hessian(cli: &Cli, log: &mut dyn Write) -> LabResult<()> {
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let h = hessian_study(
        single(&cli.dim, 3, "dim")?,
        single(&cli.neurons, 3, "neurons")?,
        cli.data.unwrap_or(200),
        cli.seed.unwrap_or(0),
    )?;
    let w = |log: &mut dyn Write, s: String| writeln!(log, "{s}").map_err(io_err);
    w(
        log,
        format!(
            "units K={} weights P={}",
            h.bundle.q.rows(),
            h.bundle.q.cols()
        ),
    )?;
    w(
        log,
        format!("triple-product residual {:.3e}", h.triple_product_residual),
    )?;
    w(log, format!("split residual {:.3e}", h.split_residual))?;
    w(
        log,
        format!("lambda_min/lambda_max of H {:.3e}", h.min_eigen_ratio),
    )?;
    w(
        log,
        format!(
            "dominant block (top {} eigenpairs of the GRBFNN Hessian) carries {:.6} of ||H||_F",
            h.dominance.k, h.dominance.fraction
        ),
    )?;
    for (name, hist) in [
        ("GRBFNN", &h.dominance.source_histogram),
        ("SGNN", &h.dominance.projected_histogram),
    ] {
        let bins: Vec<String> = hist
            .iter()
            .filter(|b| b.count > 0)
            .map(|b| format!("[{:.1},{:.1}):{}", b.lo, b.hi, b.count))
            .collect();
        w(
            log,
            format!("log10|eigenvalue| histogram {name}: {}", bins.join(" ")),
        )?;
    }
    let path = out.join("spectrum.csv");
    write_file(&path, &h.bundle.spectrum_csv())?;
    wrote(log, &path)?;
    if h.passed() {
        w(log, "PASS".into())
    } else {
        Err(LabError::Verification(format!(
            "triple product {:e}, split {:e}, min eigen ratio {:e}",
            h.triple_product_residual, h.split_residual, h.min_eigen_ratio
        )))
    }
}
