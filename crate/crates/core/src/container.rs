//! Portable binary container, one object per file.
//!
//! Layout (little-endian):
//!
//! ```text
//! b"AINV"  u32 version  u32 record tag  u32 tensor count
//! per tensor: u32 rank, rank x u32 dims, prod(dims) x f64
//! ```

use std::fs;
use std::path::Path;

use crate::adapt::{NetRegressor, SampleSet};
use crate::error::{Error, Result};
use crate::fields::{FieldGrid, Grid, SineCoeffs};
use crate::nn::{NetConfig, NetWeights, Network, NormStats, TargetStats};
use crate::scatter::{Measurement, C64};

pub const MAGIC: [u8; 4] = *b"AINV";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum RecordType {
    Field = 1,
    Measurement = 2,
    Model = 3,
    Dataset = 4,
    Coeffs = 5,
}

impl RecordType {
    fn from_u32(v: u32) -> Option<Self> {
        Some(match v {
            1 => RecordType::Field,
            2 => RecordType::Measurement,
            3 => RecordType::Model,
            4 => RecordType::Dataset,
            5 => RecordType::Coeffs,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len: usize = dims.iter().product();
        if len != data.len() {
            return Err(Error::shape(format!("{dims:?} = {len} values"), data.len()));
        }
        Ok(Self { dims, data })
    }
}

pub fn encode(tag: RecordType, tensors: &[Tensor]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(tag as u32).to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
        for &d in &t.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Cursor<'_> {
    fn fail(&self, message: impl Into<String>) -> Error {
        Error::Format { path: self.path.to_path_buf(), message: message.into() }
    }

    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.fail(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

/// Parses a container; `path` is only used in error messages.
pub fn decode(bytes: &[u8], path: &Path) -> Result<(RecordType, Vec<Tensor>)> {
    let mut c = Cursor { buf: bytes, pos: 0, path };
    if c.take(4)? != MAGIC {
        return Err(c.fail("bad magic"));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(c.fail(format!("container version {version} is not supported (expected {VERSION})")));
    }
    let raw = c.u32()?;
    let tag = RecordType::from_u32(raw).ok_or_else(|| c.fail(format!("unknown record tag {raw}")))?;
    let count = c.u32()? as usize;
    let mut tensors = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let rank = c.u32()? as usize;
        let mut dims = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            dims.push(c.u32()? as usize);
        }
        let len = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| c.fail("tensor size overflows"))?;
        let bytes = c.take(len.checked_mul(8).ok_or_else(|| c.fail("tensor size overflows"))?)?;
        let data = bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
        tensors.push(Tensor { dims, data });
    }
    if c.pos != bytes.len() {
        return Err(c.fail(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    Ok((tag, tensors))
}

/// Objects stored as one record.
pub trait Record: Sized {
    const TAG: RecordType;
    fn to_tensors(&self) -> Vec<Tensor>;
    fn from_tensors(tensors: Vec<Tensor>) -> std::result::Result<Self, String>;

    fn to_bytes(&self) -> Vec<u8> {
        encode(Self::TAG, &self.to_tensors())
    }

    fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let (tag, tensors) = decode(bytes, path)?;
        let fail = |message: String| Error::Format { path: path.to_path_buf(), message };
        if tag != Self::TAG {
            return Err(fail(format!("expected a {:?} record, found {:?}", Self::TAG, tag)));
        }
        Self::from_tensors(tensors).map_err(fail)
    }

    fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?, path)
    }
}

fn expect_count(t: &[Tensor], n: usize) -> std::result::Result<(), String> {
    if t.len() != n {
        return Err(format!("expected {n} tensors, found {}", t.len()));
    }
    Ok(())
}

fn expect_rank(t: &Tensor, rank: usize, what: &str) -> std::result::Result<(), String> {
    if t.dims.len() != rank {
        return Err(format!("{what}: expected rank {rank}, found {:?}", t.dims));
    }
    Ok(())
}

impl Record for FieldGrid {
    const TAG: RecordType = RecordType::Field;

    fn to_tensors(&self) -> Vec<Tensor> {
        let n = self.grid().n();
        vec![Tensor { dims: vec![n, n], data: self.values().to_vec() }]
    }

    fn from_tensors(mut t: Vec<Tensor>) -> std::result::Result<Self, String> {
        expect_count(&t, 1)?;
        let t = t.remove(0);
        expect_rank(&t, 2, "field")?;
        if t.dims[0] != t.dims[1] {
            return Err(format!("field must be square, found {:?}", t.dims));
        }
        let grid = Grid::new(t.dims[0]).map_err(|e| e.to_string())?;
        FieldGrid::from_values(grid, t.data).map_err(|e| e.to_string())
    }
}

impl Record for Measurement {
    const TAG: RecordType = RecordType::Measurement;

    fn to_tensors(&self) -> Vec<Tensor> {
        let data = self.data().iter().flat_map(|z| [z.re, z.im]).collect();
        vec![Tensor { dims: vec![self.n_dirs(), self.n_recv(), 2], data }]
    }

    fn from_tensors(mut t: Vec<Tensor>) -> std::result::Result<Self, String> {
        expect_count(&t, 1)?;
        let t = t.remove(0);
        expect_rank(&t, 3, "measurement")?;
        if t.dims[2] != 2 {
            return Err("measurement: last dimension must be 2 (re, im)".into());
        }
        let data = t.data.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect();
        Measurement::from_data(t.dims[0], t.dims[1], data).map_err(|e| e.to_string())
    }
}

impl Record for SineCoeffs {
    const TAG: RecordType = RecordType::Coeffs;

    fn to_tensors(&self) -> Vec<Tensor> {
        let n = self.order();
        vec![Tensor { dims: vec![n, n], data: self.as_slice().to_vec() }]
    }

    fn from_tensors(mut t: Vec<Tensor>) -> std::result::Result<Self, String> {
        expect_count(&t, 1)?;
        let t = t.remove(0);
        expect_rank(&t, 2, "coefficients")?;
        if t.dims[0] != t.dims[1] {
            return Err(format!("coefficients must be square, found {:?}", t.dims));
        }
        SineCoeffs::new(t.dims[0], t.data).map_err(|e| e.to_string())
    }
}

/// Inputs `[N, input_len]` and targets `[N, order^2]`. Prior points are not
/// stored.
impl Record for SampleSet {
    const TAG: RecordType = RecordType::Dataset;

    fn to_tensors(&self) -> Vec<Tensor> {
        let pack = |rows: &[Vec<f64>]| Tensor {
            dims: vec![rows.len(), rows.first().map_or(0, Vec::len)],
            data: rows.concat(),
        };
        vec![pack(&self.inputs), pack(&self.targets)]
    }

    fn from_tensors(t: Vec<Tensor>) -> std::result::Result<Self, String> {
        expect_count(&t, 2)?;
        let unpack = |t: &Tensor, what: &str| -> std::result::Result<Vec<Vec<f64>>, String> {
            expect_rank(t, 2, what)?;
            if t.dims[1] == 0 {
                return Ok(vec![Vec::new(); t.dims[0]]);
            }
            Ok(t.data.chunks_exact(t.dims[1]).map(<[f64]>::to_vec).collect())
        };
        let inputs = unpack(&t[0], "inputs")?;
        let targets = unpack(&t[1], "targets")?;
        if inputs.len() != targets.len() {
            return Err(format!("{} inputs but {} targets", inputs.len(), targets.len()));
        }
        Ok(SampleSet { inputs, targets, points: Vec::new() })
    }
}

fn arch_tensor(c: &NetConfig) -> Tensor {
    let mut v = vec![c.input[0], c.input[1], c.conv_layers, c.channels, c.kernel, c.padding, c.pool_kernel, c.pool_stride];
    v.extend(&c.fc);
    Tensor { dims: vec![v.len()], data: v.into_iter().map(|x| x as f64).collect() }
}

fn arch_from(t: &Tensor) -> std::result::Result<NetConfig, String> {
    expect_rank(t, 1, "architecture")?;
    if t.data.len() < 9 || t.data.iter().any(|&x| x < 0.0 || x.fract() != 0.0 || x > u32::MAX as f64) {
        return Err("architecture: malformed".into());
    }
    let u: Vec<usize> = t.data.iter().map(|&x| x as usize).collect();
    Ok(NetConfig {
        input: [u[0], u[1]],
        conv_layers: u[2],
        channels: u[3],
        kernel: u[4],
        padding: u[5],
        pool_kernel: u[6],
        pool_stride: u[7],
        fc: u[8..].to_vec(),
    })
}

/// Architecture, input statistics `[2, 2]` (mean, std per channel), target
/// statistics `[outputs + 1]` (means, then the shared scale) and the flat
/// parameter vector.
impl Record for NetRegressor {
    const TAG: RecordType = RecordType::Model;

    fn to_tensors(&self) -> Vec<Tensor> {
        let mut s = self.stats.mean.to_vec();
        s.extend(self.stats.std);
        vec![
            arch_tensor(self.net.config()),
            Tensor { dims: vec![2, 2], data: s },
            Tensor {
                dims: vec![self.target_stats.mean.len() + 1],
                data: self.target_stats.mean.iter().copied().chain([self.target_stats.scale]).collect(),
            },
            Tensor { dims: vec![self.weights.params.len()], data: self.weights.params.clone() },
        ]
    }

    fn from_tensors(t: Vec<Tensor>) -> std::result::Result<Self, String> {
        expect_count(&t, 4)?;
        let net = Network::new(arch_from(&t[0])?).map_err(|e| e.to_string())?;
        if t[1].dims != [2, 2] {
            return Err(format!("statistics: expected [2, 2], found {:?}", t[1].dims));
        }
        let stats = NormStats { mean: [t[1].data[0], t[1].data[1]], std: [t[1].data[2], t[1].data[3]] };
        let outputs = net.config().output_len();
        if t[2].dims != [outputs + 1] {
            return Err(format!("target statistics: expected [{}], found {:?}", outputs + 1, t[2].dims));
        }
        let target_stats = TargetStats { mean: t[2].data[..outputs].to_vec(), scale: t[2].data[outputs] };
        let weights = NetWeights { params: t[3].data.clone() };
        net.check(&weights).map_err(|e| e.to_string())?;
        Ok(NetRegressor { net, weights, stats, target_stats })
    }
}
