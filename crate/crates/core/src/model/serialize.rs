//! Versioned text dump of a network: an architecture header followed by
//! every parameter tensor in shortest round-trip decimal form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{LayerKind, LayerSpec, Network, Params};
use crate::tensor::Tensor;

pub const FORMAT_HEADER: &str = "eeg-roar network v1";

fn join<T: ToString>(v: &[T], sep: &str) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(sep)
}

fn write_tensor(out: &mut String, name: &str, t: &Tensor) {
    writeln!(out, "{name} {}", join(t.shape(), ",")).expect("write to string");
    let values: Vec<String> = t.data().iter().map(|v| format!("{v:?}")).collect();
    out.push_str(&values.join(" "));
    out.push('\n');
}

pub fn network_to_string(net: &Network) -> String {
    let mut out = String::new();
    writeln!(out, "{FORMAT_HEADER}").expect("write to string");
    writeln!(out, "input {}", join(net.input_shape(), ",")).expect("write to string");
    writeln!(out, "layers {}", net.layers().len()).expect("write to string");
    for layer in net.layers() {
        let s = &layer.spec;
        writeln!(
            out,
            "{} kernel={},{} filters={} stride={},{} dropout={:?}",
            s.kind, s.kernel.0, s.kernel.1, s.filters, s.stride.0, s.stride.1, s.dropout_p
        )
        .expect("write to string");
        if let Some(p) = &layer.params {
            write_tensor(&mut out, "weights", &p.weights);
            write_tensor(&mut out, "bias", &p.bias);
        }
    }
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    source: &'a Path,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        self.iter
            .next()
            .map(|(i, l)| (i + 1, l.trim_end()))
            .ok_or_else(|| Error::parse(self.source, 0, "unexpected end of file"))
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::parse(self.source, line, msg)
    }

    fn keyed(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (n, line) = self.next()?;
        match line.strip_prefix(key).and_then(|r| r.strip_prefix(' ')) {
            Some(rest) => Ok((n, rest)),
            None => Err(self.err(n, format!("expected `{key} ...`, got {line:?}"))),
        }
    }

    fn usizes(&self, n: usize, text: &str) -> Result<Vec<usize>> {
        text.split(',')
            .map(|v| v.trim().parse().map_err(|_| self.err(n, format!("bad integer {v:?}"))))
            .collect()
    }

    fn tensor(&mut self, key: &str) -> Result<Tensor> {
        let (n, shape) = self.keyed(key)?;
        let shape = self.usizes(n, shape)?;
        let (m, values) = self.next()?;
        let data: Vec<f64> = values
            .split(' ')
            .filter(|s| !s.is_empty())
            .map(|v| v.parse().map_err(|_| self.err(m, format!("bad number {v:?}"))))
            .collect::<Result<_>>()?;
        Tensor::new(&shape, data).map_err(|e| self.err(m, e.to_string()))
    }
}

/// Parses [`network_to_string`] output; `source` only labels errors.
pub fn network_from_str(text: &str, source: &Path) -> Result<Network> {
    let mut lines = Lines {
        iter: text.lines().enumerate(),
        source,
    };
    let (n, header) = lines.next()?;
    if header != FORMAT_HEADER {
        return Err(lines.err(n, format!("expected header {FORMAT_HEADER:?}, got {header:?}")));
    }
    let (n, input) = lines.keyed("input")?;
    let input = lines.usizes(n, input)?;
    let (n, count) = lines.keyed("layers")?;
    let count: usize = count.parse().map_err(|_| lines.err(n, "bad layer count"))?;
    let mut specs = Vec::with_capacity(count);
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let (n, line) = lines.next()?;
        let mut fields = line.split(' ');
        let kind_name = fields.next().unwrap_or_default();
        let kind = LayerKind::from_name(kind_name).ok_or_else(|| lines.err(n, format!("unknown layer {kind_name:?}")))?;
        let mut spec = LayerSpec::relu();
        spec.kind = kind;
        for field in fields {
            let (key, value) = field.split_once('=').ok_or_else(|| lines.err(n, format!("bad field {field:?}")))?;
            let pair = |v: &str| -> Result<(usize, usize)> {
                match lines.usizes(n, v)?.as_slice() {
                    [a, b] => Ok((*a, *b)),
                    _ => Err(lines.err(n, format!("{key} needs two values"))),
                }
            };
            match key {
                "kernel" => spec.kernel = pair(value)?,
                "stride" => spec.stride = pair(value)?,
                "filters" => spec.filters = value.parse().map_err(|_| lines.err(n, "bad filter count"))?,
                "dropout" => spec.dropout_p = value.parse().map_err(|_| lines.err(n, "bad dropout"))?,
                _ => return Err(lines.err(n, format!("unknown field {key:?}"))),
            }
        }
        params.push(if kind.has_params() {
            Some(Params {
                weights: lines.tensor("weights")?,
                bias: lines.tensor("bias")?,
            })
        } else {
            None
        });
        specs.push(spec);
    }
    let (n, end) = lines.next()?;
    if end != "end" {
        return Err(lines.err(n, "expected `end`"));
    }
    Network::from_parts(&input, &specs, params)
}

pub fn save_network(net: &Network, path: &Path) -> Result<()> {
    fs::write(path, network_to_string(net)).map_err(|e| Error::io(path, e))
}

pub fn load_network(path: &Path) -> Result<Network> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    network_from_str(&text, path)
}
