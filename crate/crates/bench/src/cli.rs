//! Flag parsing. A `--config` file holds `key=value` lines using the long
//! flag names (`max-epochs` or `max_epochs`); flags on the command line win.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};

use crate::error::{read_file, LabError, LabResult};
use crate::runs::ModelArg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CommandKind {
    /// Train one model; writes train_log.csv and model.txt.
    Train,
    /// Seconds per epoch against input dimension.
    ScaleDim,
    /// SGNN against a GRBFNN with N^d units on each function.
    CompareGrbfnn,
    /// SGNN against ReLU / sigmoid MLPs.
    CompareMlp,
    /// Evaluate a saved model on an x1-x2 grid (other coordinates zero).
    Surface,
    /// Analytic gradients against central differences.
    Gradcheck,
    /// SGNN forward against its converted GRBFNN.
    Equivalence,
    /// Projected Hessian of a small SGNN.
    Hessian,
}

#[derive(Debug, Clone, Default, Parser)]
#[command(
    name = "sgnn-lab",
    version,
    about = "Separable Gaussian network experiments"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Option<CommandKind>,

    #[arg(long, value_enum, value_delimiter = ',')]
    pub model: Vec<ModelArg>,
    /// Candidate function ids, 1..10.
    #[arg(long = "fn", value_delimiter = ',', value_parser = clap::value_parser!(u8).range(1..=10))]
    pub fns: Vec<u8>,
    #[arg(long, value_delimiter = ',')]
    pub dim: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub neurons: Vec<usize>,
    /// Hidden layers of MLP models.
    #[arg(long, value_delimiter = ',')]
    pub layers: Vec<usize>,
    /// Number of samples (80% train, 20% validation) or evaluation points.
    #[arg(long)]
    pub data: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Grid points per axis for `surface`.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub model_file: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn pick<T>(a: Vec<T>, b: Vec<T>) -> Vec<T> {
    if a.is_empty() {
        b
    } else {
        a
    }
}

impl Cli {
    /// Fills every option left unset in `self` from `file`.
    pub fn merged(self, file: Cli) -> Cli {
        Cli {
            command: self.command.or(file.command),
            model: pick(self.model, file.model),
            fns: pick(self.fns, file.fns),
            dim: pick(self.dim, file.dim),
            neurons: pick(self.neurons, file.neurons),
            layers: pick(self.layers, file.layers),
            data: self.data.or(file.data),
            batch: self.batch.or(file.batch),
            reps: self.reps.or(file.reps),
            seed: self.seed.or(file.seed),
            out: self.out.or(file.out),
            max_epochs: self.max_epochs.or(file.max_epochs),
            patience: self.patience.or(file.patience),
            grid: self.grid.or(file.grid),
            model_file: self.model_file.or(file.model_file),
            config: self.config,
        }
    }
}

/// Turns `key=value` lines into `--key value` arguments.
pub fn config_args(text: &str) -> LabResult<Vec<String>> {
    let mut args = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            LabError::usage(format!("config line {}: expected key=value", no + 1))
        })?;
        let key = k.trim().replace('_', "-");
        if key == "config" {
            return Err(LabError::usage(
                "config files cannot include other config files",
            ));
        }
        if key == "command" {
            args.insert(0, v.trim().to_string());
        } else {
            args.push(format!("--{key}"));
            args.push(v.trim().to_string());
        }
    }
    Ok(args)
}

fn parse_config(path: &Path) -> LabResult<Cli> {
    let mut argv = vec!["sgnn-lab".to_string()];
    argv.extend(config_args(&read_file(path)?)?);
    Cli::try_parse_from(argv).map_err(|e| {
        LabError::usage(format!(
            "{}: {}",
            path.display(),
            e.render().to_string().trim()
        ))
    })
}

pub enum Parsed {
    Run(Box<Cli>),
    /// Help, version or a flag error; clap renders and exits.
    Clap(clap::Error),
}

pub fn parse<I, T>(args: I) -> LabResult<Parsed>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => return Ok(Parsed::Clap(e)),
    };
    let cli = match &cli.config {
        Some(path) => {
            let file = parse_config(path)?;
            cli.merged(file)
        }
        None => cli,
    };
    if cli.command.is_none() {
        return Err(LabError::usage("missing <COMMAND>; see --help"));
    }
    Ok(Parsed::Run(Box::new(cli)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> Cli {
        match parse(std::iter::once("sgnn-lab").chain(args.iter().copied())).unwrap() {
            Parsed::Run(c) => *c,
            Parsed::Clap(e) => panic!("{e}"),
        }
    }

    #[test]
    fn comma_lists() {
        let c = run(&[
            "scale-dim",
            "--fn",
            "1,3",
            "--dim",
            "2,3,4,5",
            "--max-epochs",
            "3",
        ]);
        assert_eq!(c.command, Some(CommandKind::ScaleDim));
        assert_eq!(c.fns, vec![1, 3]);
        assert_eq!(c.dim, vec![2, 3, 4, 5]);
        assert_eq!(c.max_epochs, Some(3));
    }

    #[test]
    fn bad_values_are_clap_errors() {
        for args in [
            &["train", "--model", "cnn"][..],
            &["train", "--fn", "11"],
            &["fly"],
        ] {
            let parsed = parse(std::iter::once("sgnn-lab").chain(args.iter().copied())).unwrap();
            match parsed {
                Parsed::Clap(e) => assert_eq!(e.exit_code(), 2),
                Parsed::Run(_) => panic!("{args:?} accepted"),
            }
        }
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(
            &path,
            "# comment\ncommand=train\nmax_epochs=7\nfn=2,3\nseed=9\n",
        )
        .unwrap();
        let c = run(&["--config", path.to_str().unwrap(), "--seed", "4"]);
        assert_eq!(c.command, Some(CommandKind::Train));
        assert_eq!(c.max_epochs, Some(7));
        assert_eq!(c.fns, vec![2, 3]);
        assert_eq!(c.seed, Some(4));
    }

    #[test]
    fn config_errors_are_usage_errors() {
        assert!(config_args("seed 4").is_err());
        assert!(config_args("config=x").is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.cfg");
        std::fs::write(&path, "colour=blue\n").unwrap();
        let err = parse(["sgnn-lab", "train", "--config", path.to_str().unwrap()])
            .err()
            .unwrap();
        assert_eq!(err.exit_code(), 2);
    }
}
