//! Little-endian binary weight format.
//!
//! ```text
//! "SPLN" | version u32 | layer count u32 | per layer:
//!   D_out u32 | D_in u32 | activation u8 (0 relu, 1 leaky + f64 slope, 2 gelu, 3 identity)
//!   bn flag u8 (1 => mu, sigma, gamma, beta as f64[D_out] each)
//!   weight f64[D_out * D_in] row-major | bias f64[D_out]
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Activation, BnParams, Layer, Network};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SPLN";
pub const FORMAT_VERSION: u32 = 1;

/// Refuse absurd headers before allocating.
const MAX_ELEMENTS: usize = 1 << 31;

pub fn save_weights(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = BufWriter::new(file);
    write_weights(net, &mut w)?;
    w.flush().map_err(|e| Error::file(path, e))?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    read_weights(BufReader::new(file))
}

pub fn write_weights(net: &Network, w: &mut impl Write) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(net.depth() as u32).to_le_bytes())?;
    for layer in net.layers() {
        w.write_all(&(layer.out_dim() as u32).to_le_bytes())?;
        w.write_all(&(layer.in_dim() as u32).to_le_bytes())?;
        w.write_all(&[layer.activation.tag()])?;
        if let Activation::LeakyRelu { slope } = layer.activation {
            w.write_all(&slope.to_le_bytes())?;
        }
        match &layer.bn {
            None => w.write_all(&[0])?,
            Some(bn) => {
                w.write_all(&[1])?;
                for v in [&bn.mu, &bn.sigma, &bn.gamma, &bn.beta] {
                    write_f64s(w, v.iter())?;
                }
            }
        }
        write_f64s(w, layer.weight.iter())?;
        write_f64s(w, layer.bias.iter())?;
    }
    Ok(())
}

fn write_f64s<'a>(w: &mut impl Write, values: impl Iterator<Item = &'a f64>) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn parse_err(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Parse {
        what: "weight file",
        field: field.into(),
        reason: reason.into(),
    }
}

struct Cursor<R> {
    inner: R,
}

impl<R: Read> Cursor<R> {
    fn bytes<const N: usize>(&mut self, field: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                parse_err(field, "truncated")
            } else {
                Error::Io(e)
            }
        })?;
        Ok(buf)
    }

    fn u8(&mut self, field: &str) -> Result<u8> {
        Ok(self.bytes::<1>(field)?[0])
    }

    fn u32(&mut self, field: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(field)?))
    }

    fn f64(&mut self, field: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(field)?))
    }

    fn f64s(&mut self, n: usize, field: &str) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64(field)).collect()
    }
}

pub fn read_weights(reader: impl Read) -> Result<Network> {
    let mut c = Cursor { inner: reader };
    if &c.bytes::<4>("magic")? != MAGIC {
        return Err(parse_err("magic", "expected \"SPLN\""));
    }
    let version = c.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(parse_err("version", format!("unsupported version {version}")));
    }
    let count = c.u32("layer_count")? as usize;
    if count == 0 {
        return Err(parse_err("layer_count", "must be at least 1"));
    }
    let mut layers = Vec::with_capacity(count.min(4096));
    let mut input_dim = 0;
    for k in 0..count {
        let f = |name: &str| format!("layers[{k}].{name}");
        let d_out = c.u32(&f("d_out"))? as usize;
        let d_in = c.u32(&f("d_in"))? as usize;
        if d_out == 0 || d_in == 0 || d_out.saturating_mul(d_in) > MAX_ELEMENTS {
            return Err(parse_err(f("d_out"), format!("invalid shape {d_out}x{d_in}")));
        }
        if k == 0 {
            input_dim = d_in;
        } else if layers.last().map(Layer::out_dim) != Some(d_in) {
            return Err(parse_err(f("d_in"), "does not match previous layer's d_out"));
        }
        let activation = match c.u8(&f("activation"))? {
            0 => Activation::Relu,
            1 => Activation::LeakyRelu {
                slope: c.f64(&f("slope"))?,
            },
            2 => Activation::Gelu,
            3 => Activation::Identity,
            t => return Err(parse_err(f("activation"), format!("unknown tag {t}"))),
        };
        activation
            .validate()
            .map_err(|e| parse_err(f("slope"), e.to_string()))?;
        let bn = match c.u8(&f("bn_flag"))? {
            0 => None,
            1 => {
                let mu = Array1::from(c.f64s(d_out, &f("bn.mu"))?);
                let sigma = Array1::from(c.f64s(d_out, &f("bn.sigma"))?);
                let gamma = Array1::from(c.f64s(d_out, &f("bn.gamma"))?);
                let beta = Array1::from(c.f64s(d_out, &f("bn.beta"))?);
                let min_sigma = sigma.iter().copied().fold(f64::INFINITY, f64::min);
                if !(min_sigma > 0.0) {
                    return Err(parse_err(f("bn.sigma"), "entries must be positive"));
                }
                Some(BnParams {
                    mu,
                    sigma,
                    gamma,
                    beta,
                    epsilon: BnParams::DEFAULT_EPSILON.min(min_sigma),
                })
            }
            t => return Err(parse_err(f("bn_flag"), format!("expected 0 or 1, got {t}"))),
        };
        let weight = Array2::from_shape_vec((d_out, d_in), c.f64s(d_out * d_in, &f("weight"))?)
            .map_err(|e| parse_err(f("weight"), e.to_string()))?;
        let bias = Array1::from(c.f64s(d_out, &f("bias"))?);
        let layer = Layer {
            weight,
            bias,
            activation,
            bn,
        };
        layer.validate().map_err(|e| parse_err(format!("layers[{k}]"), e.to_string()))?;
        layers.push(layer);
    }
    let mut rest = [0u8; 1];
    if c.inner.read(&mut rest)? != 0 {
        return Err(parse_err("trailer", "unexpected bytes after the last layer"));
    }
    Network::new(input_dim, layers)
}
