//! Plain-text network checkpoints.
//!
//! Format, one token group per line:
//!
//! ```text
//! net <n_layers>
//! layer <out> <in> <activation>
//! <out lines of in weights, row-major>
//! <one line of out biases>
//! ...repeated per layer...
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! write/read cycle reproduces every parameter bit-exactly.

use std::io::{BufRead, Write};

use super::{Activation, DenseNet, Layer};
use crate::error::{Error, Result};
use crate::mat::Matrix;

pub fn write_net<W: Write>(net: &DenseNet, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "net {}", net.layers().len())?;
    for layer in net.layers() {
        writeln!(
            out,
            "layer {} {} {}",
            layer.out_dim(),
            layer.in_dim(),
            layer.activation.name()
        )?;
        for r in 0..layer.out_dim() {
            let row: Vec<String> = layer.weights.row(r).iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        let bias: Vec<String> = layer.bias.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", bias.join(" "))?;
    }
    Ok(())
}

fn parse_floats(line: &str, expected: usize) -> Result<Vec<f64>> {
    let vals: Vec<f64> = line
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Checkpoint(format!("bad float `{t}`")))
        })
        .collect::<Result<_>>()?;
    if vals.len() != expected {
        return Err(Error::Checkpoint(format!(
            "expected {expected} values, got {}",
            vals.len()
        )));
    }
    Ok(vals)
}

pub fn read_net<R: BufRead>(input: &mut R) -> Result<DenseNet> {
    let mut lines = input.lines();
    let mut next_line = |what: &str| -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Checkpoint(format!("unexpected end of file, wanted {what}")))?
            .map_err(|e| Error::Checkpoint(format!("read failure: {e}")))
    };

    let header = next_line("header")?;
    let n_layers: usize = header
        .strip_prefix("net ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Checkpoint(format!("bad header `{header}`")))?;

    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let spec = next_line("layer spec")?;
        let parts: Vec<&str> = spec.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "layer" {
            return Err(Error::Checkpoint(format!("bad layer spec `{spec}`")));
        }
        let out_dim: usize = parts[1]
            .parse()
            .map_err(|_| Error::Checkpoint(format!("bad out dim `{}`", parts[1])))?;
        let in_dim: usize = parts[2]
            .parse()
            .map_err(|_| Error::Checkpoint(format!("bad in dim `{}`", parts[2])))?;
        let activation = match parts[3] {
            "relu" => Activation::Relu,
            "sigmoid" => Activation::Sigmoid,
            "identity" => Activation::Identity,
            other => return Err(Error::Checkpoint(format!("unknown activation `{other}`"))),
        };

        let mut weights = Matrix::zeros(out_dim, in_dim);
        for r in 0..out_dim {
            let row = parse_floats(&next_line("weight row")?, in_dim)?;
            weights.row_mut(r).copy_from_slice(&row);
        }
        let bias = parse_floats(&next_line("bias row")?, out_dim)?;
        layers.push(Layer {
            weights,
            bias,
            activation,
        });
    }
    DenseNet::from_layers(layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, streams};

    #[test]
    fn roundtrip_is_bit_exact() {
        let mut rng = stream_rng(9, streams::MODEL_INIT);
        let net = DenseNet::new(
            &[5, 7, 3, 1],
            &[Activation::Relu, Activation::Sigmoid, Activation::Sigmoid],
            &mut rng,
        );
        let mut buf = Vec::new();
        write_net(&net, &mut buf).unwrap();
        let back = read_net(&mut buf.as_slice()).unwrap();
        let a: Vec<f64> = net.iter_params().collect();
        let b: Vec<f64> = back.iter_params().collect();
        assert_eq!(a, b);
        assert_eq!(net, back);
    }

    #[test]
    fn rejects_truncated_input() {
        let mut rng = stream_rng(9, streams::MODEL_INIT);
        let net = DenseNet::new(&[2, 2], &[Activation::Relu], &mut rng);
        let mut buf = Vec::new();
        write_net(&net, &mut buf).unwrap();
        buf.truncate(buf.len() / 2);
        assert!(read_net(&mut buf.as_slice()).is_err());
    }
}
