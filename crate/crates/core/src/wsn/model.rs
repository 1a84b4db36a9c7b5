//! Sensing model of a coherent multiple-access WSN and the block-diagonal precoder layout.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::problem::Vector;

pub type CMatrix = DMatrix<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorDims {
    /// Observation dimension `l_i`.
    pub observations: usize,
    /// Transmit antennas `N_i`.
    pub antennas: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensingDims {
    /// Parameter dimension `p`.
    pub parameters: usize,
    /// Antennas at the fusion centre `N_F`.
    pub fc_antennas: usize,
    pub sensors: Vec<SensorDims>,
}

impl SensingDims {
    /// `k` identical sensors.
    pub fn uniform(parameters: usize, k: usize, fc_antennas: usize, antennas: usize, observations: usize) -> Self {
        Self {
            parameters,
            fc_antennas,
            sensors: vec![SensorDims { observations, antennas }; k],
        }
    }

    /// `l = Σ l_i`.
    pub fn total_observations(&self) -> usize {
        self.sensors.iter().map(|s| s.observations).sum()
    }

    /// `N = Σ N_i`.
    pub fn total_antennas(&self) -> usize {
        self.sensors.iter().map(|s| s.antennas).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.parameters == 0 || self.sensors.is_empty() {
            return Err(Error::InvalidArgument("need at least one parameter and one sensor".into()));
        }
        if self.sensors.iter().any(|s| s.observations == 0 || s.antennas == 0) {
            return Err(Error::InvalidArgument("sensor dimensions must be positive".into()));
        }
        if self.parameters > self.total_antennas() {
            return Err(Error::InvalidArgument(format!(
                "p = {} exceeds the total number of sensor antennas {}",
                self.parameters,
                self.total_antennas()
            )));
        }
        if self.fc_antennas != self.parameters {
            return Err(Error::InvalidArgument(format!(
                "the MSE objective needs as many fusion-centre antennas as parameters (N_F = {}, p = {})",
                self.fc_antennas, self.parameters
            )));
        }
        Ok(())
    }
}

/// Free entries of the block-diagonal precoder `G = G¹ ⊕ … ⊕ G^K` (`N × l`).
///
/// Free entries are ordered block by block, row-major inside a block. The real
/// embedding stacks all real parts and then all imaginary parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize)>,
    /// Block index of every free entry.
    block_of: Vec<usize>,
    /// Column ranges `[start, end)` of each block.
    col_ranges: Vec<(usize, usize)>,
    row_block: Vec<usize>,
    col_block: Vec<usize>,
}

impl BlockLayout {
    pub fn new(dims: &SensingDims) -> Self {
        let mut entries = Vec::new();
        let mut block_of = Vec::new();
        let mut col_ranges = Vec::new();
        let mut row_block = Vec::new();
        let mut col_block = Vec::new();
        let (mut r0, mut c0) = (0, 0);
        for (i, s) in dims.sensors.iter().enumerate() {
            row_block.extend(std::iter::repeat_n(i, s.antennas));
            col_block.extend(std::iter::repeat_n(i, s.observations));
            for r in r0..r0 + s.antennas {
                for c in c0..c0 + s.observations {
                    entries.push((r, c));
                    block_of.push(i);
                }
            }
            col_ranges.push((c0, c0 + s.observations));
            r0 += s.antennas;
            c0 += s.observations;
        }
        Self {
            rows: r0,
            cols: c0,
            entries,
            block_of,
            col_ranges,
            row_block,
            col_block,
        }
    }

    /// Number of complex free entries `m`.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Length `2m` of the real embedding.
    pub fn real_dim(&self) -> usize {
        2 * self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    pub fn block_of(&self, k: usize) -> usize {
        self.block_of[k]
    }

    pub fn col_ranges(&self) -> &[(usize, usize)] {
        &self.col_ranges
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Precoder matrix from its real embedding.
    pub fn to_matrix(&self, x: &Vector) -> Result<CMatrix> {
        ensure_dim("precoder vector", x.len(), self.real_dim())?;
        let m = self.len();
        let mut g = CMatrix::zeros(self.rows, self.cols);
        for (k, &(r, c)) in self.entries.iter().enumerate() {
            g[(r, c)] = Complex64::new(x[k], x[m + k]);
        }
        Ok(g)
    }

    /// Real embedding of a block-patterned precoder. Entries outside the blocks must be zero.
    pub fn to_vector(&self, g: &CMatrix) -> Result<Vector> {
        if g.shape() != (self.rows, self.cols) {
            return Err(Error::InvalidArgument(format!(
                "precoder has shape {:?}, expected {:?}",
                g.shape(),
                (self.rows, self.cols)
            )));
        }
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.row_block[r] != self.col_block[c] && g[(r, c)].norm_sqr() != 0.0 {
                    return Err(Error::ContractViolation(format!("precoder entry ({r}, {c}) lies outside its blocks")));
                }
            }
        }
        let m = self.len();
        let mut x = Vector::zeros(2 * m);
        for (k, &(r, c)) in self.entries.iter().enumerate() {
            x[k] = g[(r, c)].re;
            x[m + k] = g[(r, c)].im;
        }
        Ok(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensingModel {
    pub dims: SensingDims,
    pub layout: BlockLayout,
    /// Observation matrix `H` (`l × p`).
    pub h: CMatrix,
    /// Parameter covariance `R_θ` (`p × p`).
    pub r_theta: CMatrix,
    /// Sensor noise covariance `R_nr` (`l × l`).
    pub r_noise: CMatrix,
    /// `Γ = H R_θ Hᴴ + R_nr`, the covariance of the stacked observations.
    pub gamma: CMatrix,
    /// Total transmit power budget `P`.
    pub power: f64,
}

fn is_hermitian(m: &CMatrix) -> bool {
    let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
    m.is_square() && (m - m.adjoint()).iter().all(|z| z.norm() <= 1e-12 * scale)
}

impl SensingModel {
    pub fn from_parts(dims: SensingDims, h: CMatrix, r_theta: CMatrix, r_noise: CMatrix, power: f64) -> Result<Self> {
        dims.validate()?;
        let (l, p) = (dims.total_observations(), dims.parameters);
        if h.shape() != (l, p) || r_theta.shape() != (p, p) || r_noise.shape() != (l, l) {
            return Err(Error::InvalidArgument("model matrices do not match the dimensions".into()));
        }
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::InvalidArgument(format!("power budget must be positive, got {power}")));
        }
        if !is_hermitian(&r_theta) || !is_hermitian(&r_noise) {
            return Err(Error::InvalidArgument("covariances must be Hermitian".into()));
        }
        let gamma = &h * &r_theta * h.adjoint() + &r_noise;
        let gamma = (&gamma + gamma.adjoint()).map(|z| z * 0.5);
        if gamma.clone().cholesky().is_none() {
            return Err(Error::InvalidArgument("observation covariance is not positive definite".into()));
        }
        let layout = BlockLayout::new(&dims);
        Ok(Self {
            dims,
            layout,
            h,
            r_theta,
            r_noise,
            gamma,
            power,
        })
    }

    /// Random `±1 ± j` observation matrix, unit parameter covariance and white
    /// sensor noise `noise_db` below the mean received signal power.
    pub fn build(dims: SensingDims, power: f64, noise_db: f64, rng: &mut dyn RngCore) -> Result<Self> {
        dims.validate()?;
        let (l, p) = (dims.total_observations(), dims.parameters);
        let mut sign = || if rng.random::<bool>() { 1.0 } else { -1.0 };
        let h = CMatrix::from_fn(l, p, |_, _| Complex64::new(sign(), sign()));
        let r_theta = CMatrix::identity(p, p);
        let signal = (&h * &r_theta * h.adjoint()).trace().re;
        let sigma2 = 10f64.powf(-noise_db / 10.0) * signal / l as f64;
        let r_noise = CMatrix::identity(l, l) * Complex64::new(sigma2, 0.0);
        Self::from_parts(dims, h, r_theta, r_noise, power)
    }

    /// Sensor noise variance when `R_nr` is white.
    pub fn noise_variance(&self) -> f64 {
        self.r_noise[(0, 0)].re
    }

    /// Real embedding dimension of the free precoder entries.
    pub fn real_dim(&self) -> usize {
        self.layout.real_dim()
    }

    pub fn to_file(&self) -> ModelFile {
        let split = |m: &CMatrix| -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
            let re = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].re).collect()).collect();
            let im = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].im).collect()).collect();
            (re, im)
        };
        let (h_re, h_im) = split(&self.h);
        let (r_theta_re, r_theta_im) = split(&self.r_theta);
        let (r_noise_re, r_noise_im) = split(&self.r_noise);
        ModelFile {
            dims: self.dims.clone(),
            power: self.power,
            h_re,
            h_im,
            r_theta_re,
            r_theta_im,
            r_noise_re,
            r_noise_im,
        }
    }

    pub fn from_file(f: &ModelFile) -> Result<Self> {
        let join = |re: &[Vec<f64>], im: &[Vec<f64>]| -> Result<CMatrix> {
            let rows = re.len();
            let cols = re.first().map_or(0, |r| r.len());
            if im.len() != rows || re.iter().chain(im.iter()).any(|r| r.len() != cols) {
                return Err(Error::Config("ragged matrix in model file".into()));
            }
            Ok(CMatrix::from_fn(rows, cols, |i, j| Complex64::new(re[i][j], im[i][j])))
        };
        Self::from_parts(
            f.dims.clone(),
            join(&f.h_re, &f.h_im)?,
            join(&f.r_theta_re, &f.r_theta_im)?,
            join(&f.r_noise_re, &f.r_noise_im)?,
            f.power,
        )
    }

    pub fn save_toml(&self) -> Result<String> {
        toml::to_string(&self.to_file()).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load_toml(text: &str) -> Result<Self> {
        let f: ModelFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_file(&f)
    }
}

/// Text form of a [`SensingModel`]. `Γ` is rebuilt on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub dims: SensingDims,
    pub power: f64,
    pub h_re: Vec<Vec<f64>>,
    pub h_im: Vec<Vec<f64>>,
    pub r_theta_re: Vec<Vec<f64>>,
    pub r_theta_im: Vec<Vec<f64>>,
    pub r_noise_re: Vec<Vec<f64>>,
    pub r_noise_im: Vec<Vec<f64>>,
}
