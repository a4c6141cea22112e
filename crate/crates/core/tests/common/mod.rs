#![allow(dead_code)] // shared across test binaries with different usage

//! Shared oracles for the acceptance suite. Everything here recomputes
//! quantities from scratch, independently of the incremental solver path it
//! is used to check.

use nalgebra::linalg::Cholesky;
use nalgebra::DMatrix;
use num_complex::Complex64;

use actdet_core::model::{SampleCovariance, SequenceMatrix};

/// Dense model covariance `Σ(γ) = QΓQ^H + σ²I` built entry by entry.
pub fn dense_sigma(q: &SequenceMatrix, gamma: &[f64], noise_var: f64) -> DMatrix<Complex64> {
    let l = q.seq_len();
    let mut sigma = DMatrix::zeros(l, l);
    for i in 0..l {
        sigma[(i, i)] = Complex64::new(noise_var, 0.0);
    }
    for (k, &g) in gamma.iter().enumerate() {
        if g != 0.0 {
            let col = q.column(k);
            for i in 0..l {
                for j in 0..l {
                    sigma[(i, j)] += Complex64::new(g, 0.0) * col[i] * col[j].conj();
                }
            }
        }
    }
    sigma
}

/// From-scratch `F(γ) = log|Σ| + tr(Σ⁻¹Σ̂)` via a dense factorization.
pub fn dense_objective(
    q: &SequenceMatrix,
    sigma_hat: &SampleCovariance,
    noise_var: f64,
    gamma: &[f64],
) -> f64 {
    let sigma = dense_sigma(q, gamma, noise_var);
    let (logdet, inv) = dense_logdet_inverse(&sigma);
    logdet + dense_trace_product(&inv, sigma_hat.as_matrix())
}

pub fn dense_logdet_inverse(sigma: &DMatrix<Complex64>) -> (f64, DMatrix<Complex64>) {
    let chol = Cholesky::new(sigma.clone()).expect("dense oracle: Σ must be PD");
    let lf = chol.l();
    let logdet: f64 = (0..lf.nrows()).map(|i| lf[(i, i)].re.ln()).sum::<f64>() * 2.0;
    (logdet, chol.inverse())
}

pub fn dense_trace_product(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

/// Independent quadratic forms `c = a^H Σ⁻¹ a`, `g = a^H Σ⁻¹ Σ̂ Σ⁻¹ a`
/// from a dense inverse, written as explicit loops.
pub fn dense_quad_forms(
    q: &SequenceMatrix,
    sigma_hat: &SampleCovariance,
    sigma_inv: &DMatrix<Complex64>,
    k: usize,
) -> (f64, f64) {
    let l = q.seq_len();
    let a = q.column(k);
    let mut v = vec![Complex64::new(0.0, 0.0); l];
    for i in 0..l {
        for j in 0..l {
            v[i] += sigma_inv[(i, j)] * a[j];
        }
    }
    let mut c = Complex64::new(0.0, 0.0);
    for i in 0..l {
        c += a[i].conj() * v[i];
    }
    let sh = sigma_hat.as_matrix();
    let mut g = Complex64::new(0.0, 0.0);
    for i in 0..l {
        for j in 0..l {
            g += v[i].conj() * sh[(i, j)] * v[j];
        }
    }
    (c.re, g.re)
}

/// Golden-section search for the minimizer of a unimodal function on
/// `[lo, hi]`.
pub fn golden_section(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    assert!(hi > lo);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..300 {
        if hi - lo <= 1e-12 * (1.0 + lo.abs() + hi.abs()) {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - ratio * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + ratio * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Two-sided Kolmogorov–Smirnov statistic against Uniform(0,1).
pub fn ks_uniform(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let hi = (i as f64 + 1.0) / n - x;
        let lo = x - i as f64 / n;
        d = d.max(hi.max(lo));
    }
    d
}

/// Median of a sample (average of the central pair for even sizes).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
