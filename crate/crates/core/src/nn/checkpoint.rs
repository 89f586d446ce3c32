//! Plain-text parameter checkpoints.
//!
//! ```text
//! drrl-mlp v1
//! layers <count>
//! <out> <in>
//! <weights, one row per line>
//! <bias>
//! ...
//! ```

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Layer, Mlp};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const HEADER: &str = "drrl-mlp v1";

impl<T: Real> Mlp<T> {
    pub fn to_checkpoint(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{HEADER}").unwrap();
        writeln!(s, "layers {}", self.layers.len()).unwrap();
        for l in &self.layers {
            writeln!(s, "{} {}", l.out_dim(), l.in_dim()).unwrap();
            for row in l.weights.rows() {
                let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                writeln!(s, "{}", line.join(" ")).unwrap();
            }
            let line: Vec<String> = l.bias.iter().map(|v| v.to_string()).collect();
            writeln!(s, "{}", line.join(" ")).unwrap();
        }
        s
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, &str)> {
            lines
                .next()
                .ok_or_else(|| Error::parse("checkpoint", format!("unexpected end of file, expected {what}")))
        };
        let (_, header) = next("header")?;
        if header.trim() != HEADER {
            return Err(Error::parse("checkpoint line 1", format!("unsupported header {header:?}")));
        }
        let (ln, count) = next("layer count")?;
        let count: usize = count
            .trim()
            .strip_prefix("layers ")
            .and_then(|c| c.trim().parse().ok())
            .ok_or_else(|| Error::parse(format!("checkpoint line {}", ln + 1), "expected `layers <n>`"))?;
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let (ln, dims) = next("layer dimensions")?;
            let dims: Vec<usize> = dims
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(format!("checkpoint line {}", ln + 1), format!("{e}")))?;
            let [out, inp] = dims[..] else {
                return Err(Error::parse(format!("checkpoint line {}", ln + 1), "expected `<out> <in>`"));
            };
            let mut weights = Vec::with_capacity(out * inp);
            for _ in 0..out {
                let (ln, row) = next("weight row")?;
                let row = parse_row::<T>(row, inp, ln)?;
                weights.extend(row);
            }
            let (ln, bias) = next("bias row")?;
            let bias = parse_row::<T>(bias, out, ln)?;
            layers.push(Layer {
                weights: Array2::from_shape_vec((out, inp), weights).expect("shape checked"),
                bias: Array1::from(bias),
            });
        }
        Mlp::from_layers(layers)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_checkpoint()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint(&text)
    }
}

fn parse_row<T: Real>(line: &str, expected: usize, line_no: usize) -> Result<Vec<T>> {
    let key = || format!("checkpoint line {}", line_no + 1);
    let values: Vec<T> = line
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map(T::of)
                .map_err(|e| Error::parse(key(), format!("{tok:?}: {e}")))
        })
        .collect::<Result<_>>()?;
    if values.len() != expected {
        return Err(Error::parse(key(), format!("expected {expected} values, found {}", values.len())));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::rng_from_seed;

    #[test]
    fn round_trips_bit_exactly() {
        let net = Mlp::<f64>::new(&[3, 4, 2], &mut rng_from_seed(11));
        let back = Mlp::<f64>::from_checkpoint(&net.to_checkpoint()).unwrap();
        assert_eq!(back.layers(), net.layers());
    }

    #[test]
    fn rejects_bad_header_and_truncation() {
        assert!(Mlp::<f64>::from_checkpoint("drrl-mlp v0\nlayers 0\n").is_err());
        let net = Mlp::<f64>::new(&[2, 2], &mut rng_from_seed(1));
        let text = net.to_checkpoint();
        let cut: String = text.lines().take(3).collect::<Vec<_>>().join("\n");
        assert!(Mlp::<f64>::from_checkpoint(&cut).is_err());
    }
}
