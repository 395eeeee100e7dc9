//! Plain-text model files.
//!
//! A file is a run of `key=value` metadata lines followed by tensor blocks.
//! Each block starts with `@tensor <name> <rows> <cols>` and holds `rows`
//! lines of `cols` comma-separated values. Floats are written in scientific
//! notation with 17 significant digits, which round-trips every `f64`
//! exactly. Blank lines and lines starting with `#` are ignored.
//!
//! ```text
//! kind=sgnn
//! dim=2
//! widths=3,3
//! sigma_min=1.0000000000000000e-3
//! @tensor weights.1 3 3
//! ...
//! @tensor centers.0 1 3
//! ...
//! ```
//!
//! | kind        | metadata                         | tensors                                                      |
//! |-------------|----------------------------------|--------------------------------------------------------------|
//! | `sgnn`      | `dim`, `widths`, `sigma_min`     | `weights.<ℓ>` (ℓ = 1..d-1) or `output_weights`, `centers.<ℓ>`, `sigmas.<ℓ>` |
//! | `grbfnn`    | `dim`, `units`, `sigma_min`      | `centers` (K×d), `widths` (K×1), `out_weights` (K×1)         |
//! | `grbfnn_aniso` | `dim`, `units`                | `centers` (K×d), `widths` (K×d), `out_weights` (K×1)         |
//! | `mlp`       | `sizes`, `activation`            | `weights.<ℓ>`, `biases.<ℓ>` (1×n)                             |

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grbfnn::{AnisotropicGrbfnn, GaussianUnits, GrbfnnModel};
use crate::linalg::Matrix;
use crate::mlp::MlpModel;
use crate::sgnn::SgnnModel;

/// 17 significant digits in scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Sgnn(SgnnModel),
    Grbfnn(GrbfnnModel),
    GrbfnnAniso(AnisotropicGrbfnn),
    Mlp(MlpModel),
}

impl AnyModel {
    pub fn dim(&self) -> usize {
        match self {
            AnyModel::Sgnn(m) => m.dim(),
            AnyModel::Grbfnn(m) => m.dim(),
            AnyModel::GrbfnnAniso(m) => m.dim(),
            AnyModel::Mlp(m) => m.dim(),
        }
    }

    pub fn predict(&self, batch: &Matrix) -> Result<Vec<f64>> {
        match self {
            AnyModel::Sgnn(m) => m.predict(batch),
            AnyModel::Grbfnn(m) => GaussianUnits::predict(m, batch),
            AnyModel::GrbfnnAniso(m) => m.predict(batch),
            AnyModel::Mlp(m) => m.predict(batch),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AnyModel::Sgnn(_) => "sgnn",
            AnyModel::Grbfnn(_) => "grbfnn",
            AnyModel::GrbfnnAniso(_) => "grbfnn_aniso",
            AnyModel::Mlp(_) => "mlp",
        }
    }
}

fn push_tensor(out: &mut String, name: &str, rows: usize, cols: usize, data: &[f64]) {
    let _ = writeln!(out, "@tensor {name} {rows} {cols}");
    for r in 0..rows {
        let line: Vec<String> = data[r * cols..(r + 1) * cols]
            .iter()
            .map(|&v| fmt_f64(v))
            .collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
}

fn join_usize(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

pub fn write_model(model: &AnyModel) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "kind={}", model.kind());
    match model {
        AnyModel::Sgnn(m) => {
            let _ = writeln!(s, "dim={}", m.dim());
            let _ = writeln!(s, "widths={}", join_usize(m.widths()));
            let _ = writeln!(s, "sigma_min={}", fmt_f64(m.sigma_min()));
            match m.output_weights() {
                Some(ow) => push_tensor(&mut s, "output_weights", 1, ow.len(), ow),
                None => {
                    for (l, w) in m.weights().iter().enumerate() {
                        push_tensor(
                            &mut s,
                            &format!("weights.{}", l + 1),
                            w.rows(),
                            w.cols(),
                            w.as_slice(),
                        );
                    }
                }
            }
            for (l, c) in m.centers().iter().enumerate() {
                push_tensor(&mut s, &format!("centers.{l}"), 1, c.len(), c);
            }
            for (l, c) in m.sigmas().iter().enumerate() {
                push_tensor(&mut s, &format!("sigmas.{l}"), 1, c.len(), c);
            }
        }
        AnyModel::Grbfnn(m) => {
            let k = m.unit_count();
            let _ = writeln!(s, "dim={}", m.dim());
            let _ = writeln!(s, "units={k}");
            let _ = writeln!(s, "sigma_min={}", fmt_f64(m.sigma_min()));
            push_tensor(&mut s, "centers", k, m.dim(), m.centers().as_slice());
            push_tensor(&mut s, "widths", k, 1, m.widths());
            push_tensor(&mut s, "out_weights", k, 1, m.out_weights());
        }
        AnyModel::GrbfnnAniso(m) => {
            let k = m.unit_count();
            let _ = writeln!(s, "dim={}", m.dim());
            let _ = writeln!(s, "units={k}");
            push_tensor(&mut s, "centers", k, m.dim(), m.centers().as_slice());
            push_tensor(&mut s, "widths", k, m.dim(), m.widths().as_slice());
            push_tensor(&mut s, "out_weights", k, 1, m.out_weights());
        }
        AnyModel::Mlp(m) => {
            let _ = writeln!(s, "sizes={}", join_usize(m.sizes()));
            let _ = writeln!(s, "activation={}", m.activation());
            for (l, (w, b)) in m.weights().iter().zip(m.biases()).enumerate() {
                push_tensor(
                    &mut s,
                    &format!("weights.{l}"),
                    w.rows(),
                    w.cols(),
                    w.as_slice(),
                );
                push_tensor(&mut s, &format!("biases.{l}"), 1, b.len(), b);
            }
        }
    }
    s
}

struct Parsed {
    meta: BTreeMap<String, String>,
    tensors: BTreeMap<String, Matrix>,
}

impl Parsed {
    fn meta(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Parse {
                line: 0,
                msg: format!("missing key {key:?}"),
            })
    }

    fn usize_list(&self, key: &str) -> Result<Vec<usize>> {
        self.meta(key)?
            .split(',')
            .map(|t| {
                t.trim().parse().map_err(|_| Error::Parse {
                    line: 0,
                    msg: format!("bad integer in {key}: {t:?}"),
                })
            })
            .collect()
    }

    fn f64_meta(&self, key: &str) -> Result<f64> {
        let v = self.meta(key)?;
        v.parse().map_err(|_| Error::Parse {
            line: 0,
            msg: format!("bad number for {key}: {v:?}"),
        })
    }

    fn take(&mut self, name: &str) -> Result<Matrix> {
        self.tensors.remove(name).ok_or_else(|| Error::Parse {
            line: 0,
            msg: format!("missing tensor {name:?}"),
        })
    }

    fn take_vec(&mut self, name: &str) -> Result<Vec<f64>> {
        self.take(name).map(Matrix::into_vec)
    }
}

fn parse(text: &str) -> Result<Parsed> {
    let mut meta = BTreeMap::new();
    let mut tensors = BTreeMap::new();
    let mut lines = text.lines().enumerate().peekable();
    while let Some((no, raw)) = lines.next() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse { line: no + 1, msg };
        if let Some(header) = line.strip_prefix("@tensor ") {
            let parts: Vec<&str> = header.split_whitespace().collect();
            let [name, rows, cols] = parts[..] else {
                return Err(err(format!("bad tensor header {line:?}")));
            };
            let rows: usize = rows.parse().map_err(|_| err("bad row count".into()))?;
            let cols: usize = cols.parse().map_err(|_| err("bad column count".into()))?;
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (rno, row) = lines
                    .next()
                    .ok_or_else(|| err(format!("tensor {name} truncated")))?;
                let before = data.len();
                for tok in row.trim().split(',') {
                    data.push(tok.trim().parse::<f64>().map_err(|_| Error::Parse {
                        line: rno + 1,
                        msg: format!("bad number {tok:?}"),
                    })?);
                }
                if data.len() - before != cols {
                    return Err(Error::Parse {
                        line: rno + 1,
                        msg: format!("expected {cols} values"),
                    });
                }
            }
            tensors.insert(name.to_string(), Matrix::from_vec(rows, cols, data)?);
        } else if let Some((k, v)) = line.split_once('=') {
            meta.insert(k.trim().to_string(), v.trim().to_string());
        } else {
            return Err(err(format!("unrecognised line {line:?}")));
        }
    }
    Ok(Parsed { meta, tensors })
}

pub fn read_model(text: &str) -> Result<AnyModel> {
    let mut p = parse(text)?;
    let kind = p.meta("kind")?.to_string();
    match kind.as_str() {
        "sgnn" => {
            let widths = p.usize_list("widths")?;
            let d = widths.len();
            let sigma_min = p.f64_meta("sigma_min")?;
            let centers = (0..d)
                .map(|l| p.take_vec(&format!("centers.{l}")))
                .collect::<Result<Vec<_>>>()?;
            let sigmas = (0..d)
                .map(|l| p.take_vec(&format!("sigmas.{l}")))
                .collect::<Result<Vec<_>>>()?;
            let (weights, output) = if d == 1 {
                (Vec::new(), Some(p.take_vec("output_weights")?))
            } else {
                let w = (1..d)
                    .map(|l| p.take(&format!("weights.{l}")))
                    .collect::<Result<Vec<_>>>()?;
                (w, None)
            };
            let mut m = SgnnModel::from_parts(centers, sigmas, weights, output)?;
            if m.widths() != widths.as_slice() {
                return Err(Error::dims("widths metadata disagrees with tensors"));
            }
            m.set_sigma_min(sigma_min);
            Ok(AnyModel::Sgnn(m))
        }
        "grbfnn" => {
            let centers = p.take("centers")?;
            let widths = p.take_vec("widths")?;
            let out = p.take_vec("out_weights")?;
            Ok(AnyModel::Grbfnn(GrbfnnModel::from_parts(
                centers, widths, out,
            )?))
        }
        "grbfnn_aniso" => {
            let centers = p.take("centers")?;
            let widths = p.take("widths")?;
            let out = p.take_vec("out_weights")?;
            Ok(AnyModel::GrbfnnAniso(AnisotropicGrbfnn::from_parts(
                centers, widths, out,
            )?))
        }
        "mlp" => {
            let sizes = p.usize_list("sizes")?;
            let activation = p.meta("activation")?.parse()?;
            let n = sizes.len().saturating_sub(1);
            let weights = (0..n)
                .map(|l| p.take(&format!("weights.{l}")))
                .collect::<Result<Vec<_>>>()?;
            let biases = (0..n)
                .map(|l| p.take_vec(&format!("biases.{l}")))
                .collect::<Result<Vec<_>>>()?;
            let m = MlpModel::from_parts(weights, biases, activation)?;
            if m.sizes() != sizes.as_slice() {
                return Err(Error::dims("sizes metadata disagrees with tensors"));
            }
            Ok(AnyModel::Mlp(m))
        }
        other => Err(Error::Parse {
            line: 0,
            msg: format!("unknown model kind {other:?}"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grbfnn::sgnn_to_grbfnn;
    use crate::mlp::{mlp_sizes, Activation};
    use crate::rng::Rng;
    use proptest::prelude::*;

    #[test]
    fn every_kind_round_trips() {
        let mut rng = Rng::new(21);
        let sgnn = SgnnModel::init(3, 3, -8.0, 8.0, &mut rng).unwrap();
        let models = vec![
            AnyModel::Sgnn(SgnnModel::init(1, 4, -8.0, 8.0, &mut rng).unwrap()),
            AnyModel::GrbfnnAniso(sgnn_to_grbfnn(&sgnn, 1000).unwrap()),
            AnyModel::Sgnn(sgnn),
            AnyModel::Grbfnn(GrbfnnModel::init(2, 6, -8.0, 8.0, &mut rng).unwrap()),
            AnyModel::Mlp(
                MlpModel::init(&mlp_sizes(3, 2, 5), Activation::Sigmoid, &mut rng).unwrap(),
            ),
        ];
        for m in models {
            let text = write_model(&m);
            assert_eq!(read_model(&text).unwrap(), m, "{}", m.kind());
        }
    }

    #[test]
    fn malformed_input() {
        assert!(read_model("kind=banana\n").is_err());
        assert!(read_model("dim=2\n").is_err());
        let truncated = "kind=grbfnn\n@tensor centers 2 2\n1,2\n";
        assert!(matches!(read_model(truncated), Err(Error::Parse { .. })));
        let short_row = "kind=grbfnn\n@tensor centers 1 2\n1\n";
        assert!(matches!(
            read_model(short_row),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    proptest! {
        #[test]
        fn seventeen_digits_round_trip(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            prop_assume!(v.is_finite());
            let back: f64 = fmt_f64(v).parse().unwrap();
            prop_assert_eq!(back.to_bits(), v.to_bits());
        }
    }
}
