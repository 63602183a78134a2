//! Synthetic regression datasets for variable selection, plus file IO.

use std::io::{Read as _, Write as _};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BvsDataset {
    /// Design matrix, n rows by p columns.
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl BvsDataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 || x.nrows() != y.len() {
            return Err(Error::InvalidConfig(format!(
                "design is {}x{} with {} responses",
                x.nrows(),
                x.ncols(),
                y.len()
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::MalformedFile("non-finite entry in dataset".into()));
        }
        Ok(BvsDataset { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

/// Row covariance structure of the design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BvsDesign {
    /// Independent standard normal columns.
    Independent,
    /// Cov(x_j, x_k) = exp(-|j-k|), a geometric decay across all columns.
    Banded,
    /// Block-diagonal, 20-column blocks with within-block decay
    /// exp(-|j-k|/3).
    BlockBanded,
}

/// True-coefficient layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalSpec {
    /// Ten fixed coefficients (2,-3,2,2,-3,3,-2,3,-2,3) at the first ten
    /// coordinates, scaled by snr * sqrt(log(p)/n).
    ScaledPattern { snr: f64 },
    /// `count` coordinates drawn without replacement, coefficients iid
    /// N(0, sigma_beta^2). Yields a multimodal posterior.
    RandomNormal { sigma_beta: f64, count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BvsGenSpec {
    pub n: usize,
    pub p: usize,
    pub design: BvsDesign,
    pub signal: SignalSpec,
}

const PATTERN: [f64; 10] = [2.0, -3.0, 2.0, 2.0, -3.0, 3.0, -2.0, 3.0, -2.0, 3.0];

/// Draws a dataset `y = X beta + eps`, `eps ~ N(0, I)`, and returns it with
/// the indices of the nonzero coefficients and the coefficients themselves.
pub fn generate_dataset<R: Rng + ?Sized>(
    spec: &BvsGenSpec,
    rng: &mut R,
) -> Result<(BvsDataset, Vec<usize>, Vec<f64>)> {
    let (n, p) = (spec.n, spec.p);
    if n == 0 || p == 0 {
        return Err(Error::InvalidConfig("dataset dimensions must be positive".into()));
    }
    if matches!(spec.signal, SignalSpec::ScaledPattern { .. }) && p < 10 {
        return Err(Error::InvalidConfig("pattern signal needs p >= 10".into()));
    }
    let mut x = DMatrix::zeros(n, p);
    match spec.design {
        BvsDesign::Independent => {
            for v in x.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
        }
        BvsDesign::Banded => fill_ar_rows(&mut x, rng, (-1.0f64).exp(), p),
        // AR(1) restarted every 20 columns realizes the block-diagonal
        // covariance exactly.
        BvsDesign::BlockBanded => fill_ar_rows(&mut x, rng, (-1.0f64 / 3.0).exp(), 20),
    }
    let mut beta = vec![0.0; p];
    let support: Vec<usize> = match spec.signal {
        SignalSpec::ScaledPattern { snr } => {
            let scale = snr * ((p as f64).ln() / n as f64).sqrt();
            for (j, c) in PATTERN.iter().enumerate() {
                beta[j] = scale * c;
            }
            (0..10).collect()
        }
        SignalSpec::RandomNormal { sigma_beta, count } => {
            let mut idx: Vec<usize> = (0..p).collect();
            for i in 0..count.min(p) {
                let j = rng.random_range(i..p);
                idx.swap(i, j);
            }
            let mut support: Vec<usize> = idx[..count.min(p)].to_vec();
            support.sort_unstable();
            for &j in &support {
                let draw: f64 = StandardNormal.sample(rng);
                beta[j] = sigma_beta * draw;
            }
            support
        }
    };
    let beta_v = DVector::from_column_slice(&beta);
    let mut y = &x * beta_v;
    for v in y.iter_mut() {
        let noise: f64 = StandardNormal.sample(rng);
        *v += noise;
    }
    Ok((BvsDataset::new(x, y)?, support, beta))
}

/// Fills rows with a stationary AR(1) sequence restarted every `period`
/// columns, giving Cov(x_j, x_k) = rho^|j-k| within a block and zero across.
fn fill_ar_rows<R: Rng + ?Sized>(x: &mut DMatrix<f64>, rng: &mut R, rho: f64, period: usize) {
    let innov = (1.0 - rho * rho).sqrt();
    for i in 0..x.nrows() {
        let mut prev = 0.0;
        for j in 0..x.ncols() {
            let e: f64 = StandardNormal.sample(rng);
            prev = if j % period == 0 { e } else { rho * prev + innov * e };
            x[(i, j)] = prev;
        }
    }
}

/// CSV layout: header `y,x1,...,xp`, one row per observation.
pub fn write_csv(data: &BvsDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["y".to_string()];
    header.extend((1..=data.p()).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut row = vec![format!("{:.17e}", data.y[i])];
        row.extend((0..data.p()).map(|j| format!("{:.17e}", data.x[(i, j)])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<BvsDataset> {
    let mut r = csv::Reader::from_path(path)?;
    let p = r.headers()?.len().checked_sub(1).filter(|&p| p > 0).ok_or_else(|| {
        Error::MalformedFile("expected a y column followed by design columns".into())
    })?;
    let mut ys = Vec::new();
    let mut xs = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != p + 1 {
            return Err(Error::MalformedFile(format!(
                "row has {} fields, expected {}",
                rec.len(),
                p + 1
            )));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::MalformedFile(format!("bad numeric field {s:?}")))
        };
        ys.push(parse(&rec[0])?);
        for f in rec.iter().skip(1) {
            xs.push(parse(f)?);
        }
    }
    let n = ys.len();
    let x = DMatrix::from_row_slice(n, p, &xs);
    BvsDataset::new(x, DVector::from_vec(ys))
}

const BIN_MAGIC: &[u8; 8] = b"BVSDATA1";

/// Binary layout: magic, u64 n, u64 p, then y and X (row major), all 64-bit
/// little endian floats.
pub fn write_bin(data: &BvsDataset, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(BIN_MAGIC)?;
    w.write_all(&(data.n() as u64).to_le_bytes())?;
    w.write_all(&(data.p() as u64).to_le_bytes())?;
    for i in 0..data.n() {
        w.write_all(&data.y[i].to_le_bytes())?;
    }
    for i in 0..data.n() {
        for j in 0..data.p() {
            w.write_all(&data.x[(i, j)].to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_bin(path: &Path) -> Result<BvsDataset> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != BIN_MAGIC {
        return Err(Error::MalformedFile("bad magic in binary dataset".into()));
    }
    let mut buf8 = [0u8; 8];
    r.read_exact(&mut buf8)?;
    let n = u64::from_le_bytes(buf8) as usize;
    r.read_exact(&mut buf8)?;
    let p = u64::from_le_bytes(buf8) as usize;
    let read_f64 = |r: &mut dyn std::io::Read| -> Result<f64> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    };
    let mut y = DVector::zeros(n);
    for i in 0..n {
        y[i] = read_f64(&mut r)?;
    }
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            x[(i, j)] = read_f64(&mut r)?;
        }
    }
    BvsDataset::new(x, y)
}
