//! Scenario generation: signature sequences, activity ground truth,
//! channels, noise, the received signal and its sample covariance.
//!
//! The received `L × M` signal is `Y = QΓ^{1/2}H + N`, where `Q` holds one
//! length-`L` signature column per (device, message) pair, `Γ^{1/2}` is the
//! diagonal of active amplitudes, `H` stacks i.i.d. Rayleigh rows and `N` is
//! circularly-symmetric Gaussian noise. All draws come from named substreams
//! of [`RngHub`] so scenarios are bit-reproducible given a master seed.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{RngHub, Stream};

/// Default pathloss intercept in dB at 1 km.
pub const DEFAULT_PATHLOSS_CONST_DB: f64 = -128.1;
/// Default pathloss slope in dB per decade of distance.
pub const DEFAULT_PATHLOSS_SLOPE: f64 = 37.6;

/// Device placement model determining per-device distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "distances_km")]
pub enum Placement {
    /// Every device at the cell radius (the default).
    CellEdge,
    /// Uniform over the disk of the cell radius.
    UniformDisk,
    /// Explicit per-device distances in km.
    Explicit(Vec<f64>),
}

/// All scenario and physical-layer parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Number of devices `N`.
    pub num_devices: usize,
    /// Bits per message `J`; each device owns `R = 2^J` signature columns.
    pub bits_per_message: u32,
    /// Signature sequence length `L`.
    pub seq_len: usize,
    /// Number of base-station antennas `M`.
    pub num_antennas: usize,
    /// Number of active devices `K`.
    pub num_active: usize,
    /// Device transmit power in dBm.
    pub tx_power_dbm: f64,
    /// Background noise power in dBm.
    pub noise_power_dbm: f64,
    /// Pathloss intercept in dB (distance in km).
    pub pathloss_const_db: f64,
    /// Pathloss slope in dB/decade.
    pub pathloss_slope: f64,
    /// Cell radius in km; also the reference distance for normalization.
    pub cell_radius_km: f64,
    /// Device placement model.
    pub placement: Placement,
    /// Rescale powers by the reference pathloss so active `γ` entries are
    /// 1 and the noise floor is the inverse per-device SNR. Avoids
    /// 1e-13-scale conditioning problems in log-det computations without
    /// changing the minimizing support.
    pub normalize_power: bool,
    /// Master seed for all substreams.
    pub master_seed: u64,
}

impl SystemConfig {
    /// Desk-scale preset: `N = 100, K = 10, J = 1, L = 40, M = 16`.
    pub fn desk_scale(master_seed: u64) -> Self {
        SystemConfig {
            num_devices: 100,
            bits_per_message: 1,
            seq_len: 40,
            num_antennas: 16,
            num_active: 10,
            tx_power_dbm: 40.0,
            noise_power_dbm: -99.0,
            pathloss_const_db: DEFAULT_PATHLOSS_CONST_DB,
            pathloss_slope: DEFAULT_PATHLOSS_SLOPE,
            cell_radius_km: 1.0,
            placement: Placement::CellEdge,
            normalize_power: true,
            master_seed,
        }
    }

    /// Full-scale preset: `N = 1500, K = 50, J = 1, L = 300, M = 16`.
    pub fn full_scale(master_seed: u64) -> Self {
        SystemConfig {
            num_devices: 1500,
            num_active: 50,
            seq_len: 300,
            ..Self::desk_scale(master_seed)
        }
    }

    /// Messages per device, `R = 2^J`.
    pub fn num_messages(&self) -> usize {
        1usize << self.bits_per_message
    }

    /// Total number of coordinates, `N·R`.
    pub fn num_coords(&self) -> usize {
        self.num_devices * self.num_messages()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_devices == 0 {
            return Err(Error::Config("num_devices must be positive".into()));
        }
        if self.bits_per_message == 0 {
            return Err(Error::Config("bits_per_message must be at least 1".into()));
        }
        if self.seq_len == 0 {
            return Err(Error::Config("seq_len must be positive".into()));
        }
        if self.num_antennas == 0 {
            return Err(Error::Config("num_antennas must be positive".into()));
        }
        if self.num_active > self.num_devices {
            return Err(Error::Config(format!(
                "num_active ({}) exceeds num_devices ({})",
                self.num_active, self.num_devices
            )));
        }
        for v in [
            self.tx_power_dbm,
            self.noise_power_dbm,
            self.pathloss_const_db,
            self.pathloss_slope,
        ] {
            if !v.is_finite() {
                return Err(Error::Config(
                    "power/pathloss parameters must be finite".into(),
                ));
            }
        }
        if !(self.cell_radius_km > 0.0) {
            return Err(Error::Config("cell_radius_km must be positive".into()));
        }
        if let Placement::Explicit(d) = &self.placement {
            if d.len() != self.num_devices {
                return Err(Error::Config(format!(
                    "explicit placement lists {} distances for {} devices",
                    d.len(),
                    self.num_devices
                )));
            }
            if d.iter().any(|&x| !(x > 0.0)) {
                return Err(Error::Config("device distances must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Linear pathloss power gain at `distance_km`.
///
/// Evaluates `10^((C - S·log10(d))/10)` with the distance in kilometers.
/// Under `normalize_power` the value is divided by the gain at the cell
/// radius, so a device at the cell edge has unit gain.
pub fn pathloss_linear(distance_km: f64, config: &SystemConfig) -> Result<f64> {
    if !(distance_km > 0.0) {
        return Err(Error::Domain(format!(
            "pathloss distance must be positive, got {distance_km}"
        )));
    }
    let raw = pathloss_raw(distance_km, config);
    if config.normalize_power {
        Ok(raw / pathloss_raw(config.cell_radius_km, config))
    } else {
        Ok(raw)
    }
}

fn pathloss_raw(distance_km: f64, config: &SystemConfig) -> f64 {
    let db = config.pathloss_const_db - config.pathloss_slope * distance_km.log10();
    10f64.powf(db / 10.0)
}

/// Noise variance per received entry, relative to the device transmit power.
///
/// Under `normalize_power` the variance is divided by the reference pathloss
/// at the cell radius, matching the scaling applied to `γ`.
pub fn effective_noise_var(config: &SystemConfig) -> f64 {
    let raw = 10f64.powf((config.noise_power_dbm - config.tx_power_dbm) / 10.0);
    if config.normalize_power {
        raw / pathloss_raw(config.cell_radius_km, config)
    } else {
        raw
    }
}

/// The `L × NR` signature matrix with i.i.d. `CN(0, 1/L)` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceMatrix {
    mat: DMatrix<Complex64>,
}

impl SequenceMatrix {
    pub fn from_matrix(mat: DMatrix<Complex64>) -> Self {
        SequenceMatrix { mat }
    }

    pub fn seq_len(&self) -> usize {
        self.mat.nrows()
    }

    pub fn num_coords(&self) -> usize {
        self.mat.ncols()
    }

    /// The signature column for coordinate `k = device·R + message`.
    pub fn column(&self, k: usize) -> nalgebra::DVectorView<'_, Complex64> {
        self.mat.column(k)
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    /// A copy with every column scaled by `scale` (used by the quantized
    /// surrogate model).
    pub fn scaled(&self, scale: f64) -> SequenceMatrix {
        SequenceMatrix {
            mat: &self.mat * Complex64::new(scale, 0.0),
        }
    }
}

/// One active device and its transmitted message (0-based index in `[0, R)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveDevice {
    pub device: usize,
    pub message: usize,
}

/// Ground-truth activity pattern behind a generated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Active devices sorted by device index.
    pub active: Vec<ActiveDevice>,
    /// True power vector of length `N·R`; at most one nonzero per device
    /// block, equal to the (normalized) linear pathloss power.
    pub gamma: Vec<f64>,
    /// Per-device linear pathloss power (normalized if enabled).
    pub pathloss: Vec<f64>,
}

impl GroundTruth {
    pub fn num_devices(&self) -> usize {
        self.pathloss.len()
    }

    pub fn num_messages(&self) -> usize {
        self.gamma.len() / self.pathloss.len()
    }

    pub fn num_active(&self) -> usize {
        self.active.len()
    }
}

/// The received `L × M` baseband signal.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedSignal {
    mat: DMatrix<Complex64>,
}

impl ReceivedSignal {
    pub fn from_matrix(mat: DMatrix<Complex64>) -> Self {
        ReceivedSignal { mat }
    }

    pub fn seq_len(&self) -> usize {
        self.mat.nrows()
    }

    pub fn num_antennas(&self) -> usize {
        self.mat.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }
}

/// The Hermitian `L × L` sample covariance `(1/M)·YY^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCovariance {
    mat: DMatrix<Complex64>,
}

impl SampleCovariance {
    /// Wrap an explicitly constructed Hermitian matrix.
    pub fn from_matrix(mat: DMatrix<Complex64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::Domain("sample covariance must be square".into()));
        }
        let dev = hermitian_deviation(&mat);
        if dev > 1e-12 * (1.0 + matrix_max_abs(&mat)) {
            return Err(Error::Domain(format!(
                "matrix is not Hermitian (max deviation {dev:.3e})"
            )));
        }
        Ok(SampleCovariance { mat })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    /// Mean of the (real) diagonal.
    pub fn mean_diag(&self) -> f64 {
        let n = self.mat.nrows();
        (0..n).map(|i| self.mat[(i, i)].re).sum::<f64>() / n as f64
    }
}

/// A complete generated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: SystemConfig,
    pub noise_var: f64,
    pub sequences: SequenceMatrix,
    pub truth: GroundTruth,
    pub received: ReceivedSignal,
}

/// Draws one scenario from the hub's substreams.
///
/// Draw order is part of the reproducibility contract: sequences (row-major),
/// placement (if uniform-in-disk), activity (subset, then one message per
/// active device in ascending device order), channels (per active device),
/// noise (row-major).
pub fn generate_scenario(config: &SystemConfig, hub: &RngHub) -> Result<Scenario> {
    config.validate()?;
    let l = config.seq_len;
    let m = config.num_antennas;
    let n = config.num_devices;
    let r = config.num_messages();
    let nr = config.num_coords();

    let sequences = SequenceMatrix {
        mat: complex_gaussian(l, nr, 1.0 / l as f64, &mut hub.stream(Stream::Sequences)),
    };

    let distances: Vec<f64> = match &config.placement {
        Placement::CellEdge => vec![config.cell_radius_km; n],
        Placement::UniformDisk => {
            let mut rng = hub.stream(Stream::Placement);
            (0..n)
                .map(|_| {
                    let u: f64 = rng.gen();
                    config.cell_radius_km * (1.0 - u).sqrt()
                })
                .collect()
        }
        Placement::Explicit(d) => d.clone(),
    };
    let pathloss: Vec<f64> = distances
        .iter()
        .map(|&d| pathloss_linear(d, config))
        .collect::<Result<_>>()?;

    let mut activity_rng = hub.stream(Stream::Activity);
    let mut devices: Vec<usize> =
        rand::seq::index::sample(&mut activity_rng, n, config.num_active).into_vec();
    devices.sort_unstable();
    let active: Vec<ActiveDevice> = devices
        .into_iter()
        .map(|device| ActiveDevice {
            device,
            message: activity_rng.gen_range(0..r),
        })
        .collect();

    let mut gamma = vec![0.0; nr];
    for a in &active {
        gamma[a.device * r + a.message] = pathloss[a.device];
    }

    let noise_var = effective_noise_var(config);
    let mut y = complex_gaussian(l, m, noise_var, &mut hub.stream(Stream::Noise));
    let mut channels_rng = hub.stream(Stream::Channels);
    for a in &active {
        let h = complex_gaussian(m, 1, 1.0, &mut channels_rng);
        let col = sequences.column(a.device * r + a.message);
        let amp = Complex64::new(pathloss[a.device].sqrt(), 0.0);
        // Y += amp · a·h^T (unconjugated outer product).
        y.ger(amp, &col, &h.column(0), Complex64::new(1.0, 0.0));
    }

    Ok(Scenario {
        config: config.clone(),
        noise_var,
        sequences,
        truth: GroundTruth {
            active,
            gamma,
            pathloss,
        },
        received: ReceivedSignal { mat: y },
    })
}

/// `(1/M)·YY^H`, exactly Hermitian by construction.
pub fn sample_covariance(y: &ReceivedSignal) -> SampleCovariance {
    let m = y.num_antennas() as f64;
    let mut s = &y.mat * y.mat.adjoint();
    s /= Complex64::new(m, 0.0);
    hermitianize(&mut s);
    SampleCovariance { mat: s }
}

/// Fill `rows × cols` with i.i.d. `CN(0, per_entry_var)` in row-major order.
fn complex_gaussian(
    rows: usize,
    cols: usize,
    per_entry_var: f64,
    rng: &mut impl Rng,
) -> DMatrix<Complex64> {
    let sd = (per_entry_var / 2.0).sqrt();
    let mut out = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            out[(i, j)] = Complex64::new(re * sd, im * sd);
        }
    }
    out
}

/// Force exact Hermitian symmetry by averaging conjugate pairs.
pub(crate) fn hermitianize(m: &mut DMatrix<Complex64>) {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    for i in 0..n {
        m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

pub(crate) fn hermitian_deviation(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub(crate) fn matrix_max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

// ---------------------------------------------------------------------------
// Scenario container (JSON, complex matrices as interleaved re/im f64).
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    rows: usize,
    cols: usize,
    /// Row-major interleaved `[re, im, re, im, ...]`.
    data: Vec<f64>,
}

impl MatrixJson {
    fn pack(m: &DMatrix<Complex64>) -> Self {
        let mut data = Vec::with_capacity(2 * m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)].re);
                data.push(m[(i, j)].im);
            }
        }
        MatrixJson {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    fn unpack(&self) -> Result<DMatrix<Complex64>> {
        if self.data.len() != 2 * self.rows * self.cols {
            return Err(Error::Serialization(format!(
                "matrix payload holds {} floats, expected {}",
                self.data.len(),
                2 * self.rows * self.cols
            )));
        }
        let mut m = DMatrix::zeros(self.rows, self.cols);
        let mut it = self.data.iter();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let re = *it.next().unwrap();
                let im = *it.next().unwrap();
                m[(i, j)] = Complex64::new(re, im);
            }
        }
        Ok(m)
    }
}

#[derive(Serialize, Deserialize)]
struct ScenarioJson {
    format: String,
    version: u32,
    config: SystemConfig,
    noise_var: f64,
    sequences: MatrixJson,
    active: Vec<ActiveDevice>,
    gamma_true: Vec<f64>,
    pathloss: Vec<f64>,
    received: MatrixJson,
}

const SCENARIO_FORMAT: &str = "scenario";
const SCENARIO_VERSION: u32 = 1;

impl Scenario {
    /// Serialize to the self-describing JSON container used by golden-trace
    /// tests.
    pub fn to_json(&self) -> Result<String> {
        let doc = ScenarioJson {
            format: SCENARIO_FORMAT.into(),
            version: SCENARIO_VERSION,
            config: self.config.clone(),
            noise_var: self.noise_var,
            sequences: MatrixJson::pack(&self.sequences.mat),
            active: self.truth.active.clone(),
            gamma_true: self.truth.gamma.clone(),
            pathloss: self.truth.pathloss.clone(),
            received: MatrixJson::pack(&self.received.mat),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Scenario> {
        let doc: ScenarioJson = serde_json::from_str(text)?;
        if doc.format != SCENARIO_FORMAT {
            return Err(Error::Serialization(format!(
                "unexpected container format {:?}",
                doc.format
            )));
        }
        if doc.version != SCENARIO_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported scenario container version {}",
                doc.version
            )));
        }
        Ok(Scenario {
            config: doc.config,
            noise_var: doc.noise_var,
            sequences: SequenceMatrix {
                mat: doc.sequences.unpack()?,
            },
            truth: GroundTruth {
                active: doc.active,
                gamma: doc.gamma_true,
                pathloss: doc.pathloss,
            },
            received: ReceivedSignal {
                mat: doc.received.unpack()?,
            },
        })
    }
}

/// Convenience: gamma vector as a DVector.
pub fn gamma_vector(truth: &GroundTruth) -> DVector<f64> {
    DVector::from_column_slice(&truth.gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk(seed: u64) -> SystemConfig {
        SystemConfig::desk_scale(seed)
    }

    #[test]
    fn pathloss_at_1km_unnormalized() {
        let mut cfg = desk(0);
        cfg.normalize_power = false;
        let g = pathloss_linear(1.0, &cfg).unwrap();
        let expected = 10f64.powf(-12.81);
        assert!((g - expected).abs() <= 1e-13 * expected);
        assert!((g - 1.549e-13).abs() < 2e-16);
    }

    #[test]
    fn pathloss_normalization_fixed_point() {
        let cfg = desk(0);
        let g = pathloss_linear(cfg.cell_radius_km, &cfg).unwrap();
        assert_eq!(g, 1.0);
    }

    #[test]
    fn pathloss_half_km_matches_db_arithmetic() {
        let mut cfg = desk(0);
        cfg.normalize_power = false;
        let g = pathloss_linear(0.5, &cfg).unwrap();
        // Independent route in the dB domain.
        let db = -128.1 + 37.6 * 2f64.log10();
        let expected = (db / 10.0 * std::f64::consts::LN_10).exp();
        assert!((g - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn pathloss_rejects_nonpositive_distance() {
        let cfg = desk(0);
        assert!(pathloss_linear(0.0, &cfg).is_err());
        assert!(pathloss_linear(-1.0, &cfg).is_err());
    }

    #[test]
    fn noise_var_unnormalized() {
        let mut cfg = desk(0);
        cfg.normalize_power = false;
        let v = effective_noise_var(&cfg);
        let expected = 10f64.powf(-13.9);
        assert!((v - expected).abs() <= 1e-15 * expected);
    }

    #[test]
    fn noise_var_normalized_reference_ratio() {
        let cfg = desk(0);
        let v = effective_noise_var(&cfg);
        let expected = 10f64.powf(-1.09);
        assert!((v - expected).abs() <= 1e-12 * expected);
        assert!((v - 0.0813).abs() < 5e-4);
    }

    #[test]
    fn noise_var_zero_db_gap() {
        let mut cfg = desk(0);
        cfg.normalize_power = false;
        cfg.noise_power_dbm = 40.0;
        cfg.tx_power_dbm = 40.0;
        assert_eq!(effective_noise_var(&cfg), 1.0);
    }

    #[test]
    fn zero_active_devices_gives_pure_noise() {
        let mut cfg = desk(3);
        cfg.num_active = 0;
        let hub = RngHub::new(cfg.master_seed);
        let sc = generate_scenario(&cfg, &hub).unwrap();
        assert!(sc.truth.gamma.iter().all(|&g| g == 0.0));
        assert!(sc.truth.active.is_empty());
        // Pure noise: matches the noise stream draw exactly.
        let noise = complex_gaussian(
            cfg.seq_len,
            cfg.num_antennas,
            sc.noise_var,
            &mut hub.stream(Stream::Noise),
        );
        assert_eq!(sc.received.mat, noise);
    }

    #[test]
    fn noiseless_single_device_is_rank_one() {
        let mut cfg = desk(4);
        cfg.num_active = 1;
        // Zero noise via -inf dBm is not expressible; set equal powers and
        // scale by constructing the scenario, then checking span directly
        // with noise removed.
        cfg.noise_power_dbm = -10_000.0; // variance 10^{-1000} underflows to 0
        let hub = RngHub::new(cfg.master_seed);
        let sc = generate_scenario(&cfg, &hub).unwrap();
        assert_eq!(sc.noise_var, 0.0);
        let a = sc.truth.active[0];
        let col = sc
            .sequences
            .column(a.device * cfg.num_messages() + a.message);
        // Every received column must be proportional to the active signature.
        for j in 0..cfg.num_antennas {
            let y = sc.received.as_matrix().column(j);
            // Least-squares coefficient of y on col.
            let denom: Complex64 = col.dotc(&col);
            let coef = col.dotc(&y) / denom;
            let mut resid = 0.0;
            for i in 0..cfg.seq_len {
                resid += (y[i] - coef * col[i]).norm_sqr();
            }
            assert!(resid < 1e-20, "residual {resid} not negligible");
        }
    }

    #[test]
    fn scenario_is_reproducible() {
        let cfg = desk(99);
        let hub = RngHub::new(cfg.master_seed);
        let a = generate_scenario(&cfg, &hub).unwrap();
        let b = generate_scenario(&cfg, &hub).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gamma_block_structure() {
        let mut cfg = desk(11);
        cfg.bits_per_message = 2;
        cfg.num_active = 25;
        let sc = generate_scenario(&cfg, &RngHub::new(cfg.master_seed)).unwrap();
        let r = cfg.num_messages();
        let mut nonzero_devices = 0;
        for dev in 0..cfg.num_devices {
            let block = &sc.truth.gamma[dev * r..(dev + 1) * r];
            let nz = block.iter().filter(|&&g| g != 0.0).count();
            assert!(nz <= 1, "device {dev} has {nz} nonzero entries");
            nonzero_devices += (nz == 1) as usize;
        }
        assert_eq!(nonzero_devices, cfg.num_active);
    }

    #[test]
    fn sample_covariance_identity() {
        let l = 5;
        let y = ReceivedSignal::from_matrix(DMatrix::identity(l, l));
        let s = sample_covariance(&y);
        for i in 0..l {
            for j in 0..l {
                let expected = if i == j { 1.0 / l as f64 } else { 0.0 };
                assert!((s.as_matrix()[(i, j)] - Complex64::new(expected, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn sample_covariance_single_column() {
        let mut y = DMatrix::zeros(4, 1);
        y[(0, 0)] = Complex64::new(1.0, 0.0);
        let s = sample_covariance(&ReceivedSignal::from_matrix(y));
        assert_eq!(s.as_matrix()[(0, 0)], Complex64::new(1.0, 0.0));
        for i in 0..4 {
            for j in 0..4 {
                if (i, j) != (0, 0) {
                    assert_eq!(s.as_matrix()[(i, j)], Complex64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn sample_covariance_matches_triple_loop() {
        let cfg = SystemConfig {
            seq_len: 6,
            num_antennas: 4,
            ..desk(5)
        };
        let sc = generate_scenario(&cfg, &RngHub::new(5)).unwrap();
        let s = sample_covariance(&sc.received);
        let y = sc.received.as_matrix();
        for i in 0..6 {
            for j in 0..6 {
                let mut acc = Complex64::new(0.0, 0.0);
                for m in 0..4 {
                    acc += y[(i, m)] * y[(j, m)].conj();
                }
                acc /= Complex64::new(4.0, 0.0);
                assert!(
                    (s.as_matrix()[(i, j)] - acc).norm() < 1e-12,
                    "entry ({i},{j}) differs"
                );
            }
        }
    }

    #[test]
    fn sample_covariance_is_hermitian_and_psd() {
        let cfg = desk(17);
        let sc = generate_scenario(&cfg, &RngHub::new(17)).unwrap();
        let s = sample_covariance(&sc.received);
        assert!(hermitian_deviation(s.as_matrix()) <= 1e-12);
        let tr: f64 = (0..s.dim()).map(|i| s.as_matrix()[(i, i)].re).sum();
        let shifted =
            s.as_matrix() + DMatrix::identity(s.dim(), s.dim()) * Complex64::new(1e-10 * tr, 0.0);
        assert!(nalgebra::linalg::Cholesky::new(shifted).is_some());
    }

    #[test]
    fn scenario_json_round_trip() {
        let cfg = SystemConfig {
            num_devices: 6,
            seq_len: 5,
            num_antennas: 3,
            num_active: 2,
            ..desk(23)
        };
        let sc = generate_scenario(&cfg, &RngHub::new(23)).unwrap();
        let text = sc.to_json().unwrap();
        let back = Scenario::from_json(&text).unwrap();
        assert_eq!(sc, back);
    }

    #[test]
    fn uniform_disk_distances_within_radius() {
        let mut cfg = desk(31);
        cfg.placement = Placement::UniformDisk;
        let sc = generate_scenario(&cfg, &RngHub::new(31)).unwrap();
        // Normalized pathloss at d <= radius is >= 1.
        assert!(sc.truth.pathloss.iter().all(|&g| g >= 1.0));
    }

    #[test]
    fn rejects_too_many_active() {
        let mut cfg = desk(0);
        cfg.num_active = cfg.num_devices + 1;
        assert!(matches!(
            generate_scenario(&cfg, &RngHub::new(0)),
            Err(Error::Config(_))
        ));
    }
}
