//! Maintains `Σ(γ) = QΓQ^H + σ²I`, its inverse and log-determinant under
//! rank-one coordinate updates, and evaluates the objective
//! `F(γ) = log|Σ| + tr(Σ⁻¹Σ̂)`, the closed-form coordinate step and the
//! exact per-coordinate reward.
//!
//! For coordinate `k` with signature column `a`, write `c = a^H Σ⁻¹ a` and
//! `g = a^H Σ⁻¹ Σ̂ Σ⁻¹ a`. The one-dimensional restriction
//! `F_k(d) = F(γ + d·e_k)` has its unconstrained minimizer at
//! `d* = (g − c)/c²`, clamped to the feasible set at `−γ_k`, and the exact
//! decrease achieved by the clamped step `δ` is
//! `r = g·δ/(1 + δ·c) − log(1 + δ·c)`, which is what the bandit policies
//! consume as a reward. Applying a step updates `Σ` by `δ·aa^H`, the inverse
//! by the rank-one inverse identity and the log-determinant by
//! `log(1 + δ·c)`; a periodic dense refactorization bounds floating-point
//! drift.

use nalgebra::linalg::Cholesky;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{hermitian_deviation, hermitianize, SampleCovariance, SequenceMatrix};

/// Updates between dense refactorizations of `Σ⁻¹` and `log|Σ|`.
pub const DEFAULT_REFACTOR_PERIOD: u32 = 500;

/// One evaluated coordinate step.
#[derive(Debug, Clone)]
pub struct UpdateStep {
    /// Coordinate index in `[0, NR)`.
    pub coordinate: usize,
    /// Step `δ = max{(g − c)/c², −γ_k}`.
    pub delta: f64,
    /// Exact objective decrease at the clamped step.
    pub reward: f64,
    /// `c = a^H Σ⁻¹ a`.
    pub quad_seq: f64,
    /// `g = a^H Σ⁻¹ Σ̂ Σ⁻¹ a`.
    pub quad_data: f64,
    /// Cached `Σ⁻¹ a` for the rank-one inverse update.
    sigma_inv_ak: DVector<Complex64>,
}

/// Delta and reward for one coordinate of a full scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanEntry {
    pub delta: f64,
    pub reward: f64,
}

/// Solver state: the decision vector and the maintained covariance model.
#[derive(Debug, Clone)]
pub struct SolverState {
    gamma: Vec<f64>,
    sigma: DMatrix<Complex64>,
    sigma_inv: DMatrix<Complex64>,
    logdet_sigma: f64,
    objective_f: f64,
    noise_var: f64,
    iter_count: u64,
    updates_since_refactor: u32,
    refactor_period: u32,
}

impl SolverState {
    /// Initial state: `γ = 0`, `Σ = σ²I`, `F = L·log σ² + tr(Σ̂)/σ²`.
    pub fn init(q: &SequenceMatrix, sigma_hat: &SampleCovariance, noise_var: f64) -> Result<Self> {
        if !(noise_var > 0.0) {
            return Err(Error::Domain(format!(
                "noise variance must be positive, got {noise_var}"
            )));
        }
        let l = q.seq_len();
        if sigma_hat.dim() != l {
            return Err(Error::Config(format!(
                "sample covariance is {}x{} but sequences have length {}",
                sigma_hat.dim(),
                sigma_hat.dim(),
                l
            )));
        }
        let sigma = DMatrix::identity(l, l) * Complex64::new(noise_var, 0.0);
        let sigma_inv = DMatrix::identity(l, l) * Complex64::new(1.0 / noise_var, 0.0);
        let logdet_sigma = l as f64 * noise_var.ln();
        let objective_f = logdet_sigma + trace_product_re(&sigma_inv, sigma_hat.as_matrix());
        Ok(SolverState {
            gamma: vec![0.0; q.num_coords()],
            sigma,
            sigma_inv,
            logdet_sigma,
            objective_f,
            noise_var,
            iter_count: 0,
            updates_since_refactor: 0,
            refactor_period: DEFAULT_REFACTOR_PERIOD,
        })
    }

    /// Build a consistent state at an arbitrary feasible `γ` via a dense
    /// factorization (warm starts and validation).
    pub fn from_gamma(
        q: &SequenceMatrix,
        sigma_hat: &SampleCovariance,
        noise_var: f64,
        gamma: Vec<f64>,
    ) -> Result<Self> {
        if gamma.len() != q.num_coords() {
            return Err(Error::Config(format!(
                "gamma has length {}, expected {}",
                gamma.len(),
                q.num_coords()
            )));
        }
        if gamma.iter().any(|&g| !(g >= 0.0)) {
            return Err(Error::Domain(
                "gamma must be elementwise non-negative".into(),
            ));
        }
        let mut state = Self::init(q, sigma_hat, noise_var)?;
        for (k, &g) in gamma.iter().enumerate() {
            if g != 0.0 {
                let col = q.column(k);
                state
                    .sigma
                    .gerc(Complex64::new(g, 0.0), &col, &col, Complex64::new(1.0, 0.0));
            }
        }
        hermitianize(&mut state.sigma);
        state.gamma = gamma;
        state.refactor(sigma_hat)?;
        Ok(state)
    }

    pub fn with_refactor_period(mut self, period: u32) -> Self {
        self.refactor_period = period.max(1);
        self
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn num_coords(&self) -> usize {
        self.gamma.len()
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// Cached objective `F(γ)`, maintained incrementally.
    pub fn cached_objective(&self) -> f64 {
        self.objective_f
    }

    pub fn logdet(&self) -> f64 {
        self.logdet_sigma
    }

    pub fn iter_count(&self) -> u64 {
        self.iter_count
    }

    pub fn sigma(&self) -> &DMatrix<Complex64> {
        &self.sigma
    }

    pub fn sigma_inv(&self) -> &DMatrix<Complex64> {
        &self.sigma_inv
    }

    /// `F(γ) = log|Σ| + tr(Σ⁻¹Σ̂)` evaluated from the cached inverse.
    pub fn objective(&self, sigma_hat: &SampleCovariance) -> f64 {
        self.logdet_sigma + trace_product_re(&self.sigma_inv, sigma_hat.as_matrix())
    }

    /// `‖ΣΣ⁻¹ − I‖_max`, the inverse-maintenance drift.
    pub fn inverse_drift(&self) -> f64 {
        let prod = &self.sigma * &self.sigma_inv;
        let n = prod.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                worst = worst.max((prod[(i, j)] - target).norm());
            }
        }
        worst
    }

    /// Shared inner computation of `(c, g)` for coordinate `k`, writing the
    /// intermediate `Σ⁻¹a` into `v`.
    fn quad_forms(
        &self,
        q: &SequenceMatrix,
        sigma_hat: &SampleCovariance,
        k: usize,
        v: &mut DVector<Complex64>,
        w: &mut DVector<Complex64>,
    ) -> Result<(f64, f64)> {
        let a = q.column(k);
        v.gemv(
            Complex64::new(1.0, 0.0),
            &self.sigma_inv,
            &a,
            Complex64::new(0.0, 0.0),
        );
        let c = a.dotc(v).re;
        if !(c > 0.0) {
            return Err(Error::LostDefiniteness(format!(
                "quadratic form a^H Σ⁻¹ a = {c} at coordinate {k}"
            )));
        }
        w.gemv(
            Complex64::new(1.0, 0.0),
            sigma_hat.as_matrix(),
            v,
            Complex64::new(0.0, 0.0),
        );
        let g = v.dotc(w).re.max(0.0);
        Ok((c, g))
    }

    /// Evaluate the coordinate step for index `k` without mutating state.
    pub fn coordinate_step(
        &self,
        q: &SequenceMatrix,
        sigma_hat: &SampleCovariance,
        k: usize,
    ) -> Result<UpdateStep> {
        if k >= self.gamma.len() {
            return Err(Error::Domain(format!(
                "coordinate {k} out of range (NR = {})",
                self.gamma.len()
            )));
        }
        let l = self.dim();
        let mut v = DVector::zeros(l);
        let mut w = DVector::zeros(l);
        let (c, g) = self.quad_forms(q, sigma_hat, k, &mut v, &mut w)?;
        let (delta, reward) = delta_reward(c, g, self.gamma[k])?;
        Ok(UpdateStep {
            coordinate: k,
            delta,
            reward,
            quad_seq: c,
            quad_data: g,
            sigma_inv_ak: v,
        })
    }

    /// Apply a step produced from the current state: update `γ_k`, `Σ`,
    /// `Σ⁻¹`, `log|Σ|` and `F` in `O(L²)`; refactorize on schedule.
    pub fn apply_update(
        &mut self,
        q: &SequenceMatrix,
        sigma_hat: &SampleCovariance,
        step: &UpdateStep,
    ) -> Result<()> {
        let k = step.coordinate;
        if k >= self.gamma.len() {
            return Err(Error::Domain(format!(
                "coordinate {k} out of range (NR = {})",
                self.gamma.len()
            )));
        }
        debug_assert_eq!(step.sigma_inv_ak.len(), self.dim());
        let delta = step.delta;
        let one_plus = 1.0 + delta * step.quad_seq;
        if one_plus <= 1e-12 {
            return Err(Error::Numerical(format!(
                "singular update at coordinate {k}: 1 + δc = {one_plus}"
            )));
        }
        if delta != 0.0 {
            self.gamma[k] += delta;
            if self.gamma[k] < 0.0 {
                // Only reachable through rounding; the clamp itself lands
                // exactly on zero.
                self.gamma[k] = 0.0;
            }
            let one = Complex64::new(1.0, 0.0);
            let a = q.column(k);
            self.sigma.gerc(Complex64::new(delta, 0.0), &a, &a, one);
            hermitianize(&mut self.sigma);
            // Rank-one inverse identity:
            // (Σ + δaa^H)⁻¹ = Σ⁻¹ − δ/(1+δc) · (Σ⁻¹a)(Σ⁻¹a)^H.
            let u = &step.sigma_inv_ak;
            self.sigma_inv
                .gerc(Complex64::new(-delta / one_plus, 0.0), u, u, one);
            hermitianize(&mut self.sigma_inv);
            self.logdet_sigma += (delta * step.quad_seq).ln_1p();
            self.objective_f -= step.reward;
            self.updates_since_refactor += 1;
        }
        self.iter_count += 1;
        if self.updates_since_refactor >= self.refactor_period {
            self.refactor(sigma_hat)?;
        }
        Ok(())
    }

    /// Rewards and steps for every coordinate at the current state, without
    /// mutating it. Cost `O(NR·L²)`. Entry `k` equals
    /// `coordinate_step(.., k)` exactly.
    pub fn full_reward_scan(
        &self,
        q: &SequenceMatrix,
        sigma_hat: &SampleCovariance,
    ) -> Result<Vec<ScanEntry>> {
        let l = self.dim();
        let mut v = DVector::zeros(l);
        let mut w = DVector::zeros(l);
        let mut out = Vec::with_capacity(self.gamma.len());
        for k in 0..self.gamma.len() {
            let (c, g) = self.quad_forms(q, sigma_hat, k, &mut v, &mut w)?;
            let (delta, reward) = delta_reward(c, g, self.gamma[k])?;
            out.push(ScanEntry { delta, reward });
        }
        Ok(out)
    }

    /// Recompute `Σ⁻¹`, `log|Σ|` and `F` from a dense factorization of `Σ`.
    pub fn refactor(&mut self, sigma_hat: &SampleCovariance) -> Result<()> {
        hermitianize(&mut self.sigma);
        let chol = Cholesky::new(self.sigma.clone()).ok_or_else(|| {
            Error::Numerical("covariance lost positive definiteness during refactor".into())
        })?;
        let l_factor = chol.l();
        let mut logdet = 0.0;
        for i in 0..l_factor.nrows() {
            logdet += l_factor[(i, i)].re.ln();
        }
        self.logdet_sigma = 2.0 * logdet;
        self.sigma_inv = chol.inverse();
        hermitianize(&mut self.sigma_inv);
        self.objective_f =
            self.logdet_sigma + trace_product_re(&self.sigma_inv, sigma_hat.as_matrix());
        self.updates_since_refactor = 0;
        Ok(())
    }

    /// Max deviation from Hermitian symmetry over `Σ` and `Σ⁻¹`.
    pub fn hermitian_drift(&self) -> f64 {
        hermitian_deviation(&self.sigma).max(hermitian_deviation(&self.sigma_inv))
    }
}

/// Clamped step and exact decrease from the quadratic forms.
fn delta_reward(c: f64, g: f64, gamma_k: f64) -> Result<(f64, f64)> {
    let d_star = (g - c) / (c * c);
    let delta = d_star.max(-gamma_k);
    let dc = delta * c;
    if 1.0 + dc <= 1e-12 {
        return Err(Error::Numerical(format!(
            "infeasible step: 1 + δc = {} (c = {c}, γ_k = {gamma_k})",
            1.0 + dc
        )));
    }
    let reward = (g * delta / (1.0 + dc) - dc.ln_1p()).max(0.0);
    Ok((delta, reward))
}

/// `Re tr(A·B)` for Hermitian `A`, `B`.
pub(crate) fn trace_product_re(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    debug_assert_eq!(a.nrows(), b.ncols());
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let x = a[(i, j)];
            let y = b[(j, i)];
            acc += x.re * y.re - x.im * y.im;
        }
    }
    acc
}
