//! Link metrics: achievable sum rate under linear precoding and harvested
//! power at the energy receivers.

use num_complex::Complex64;

use crate::channel::ChannelSet;
use crate::errors::MetricError;
use crate::linalg::{frob_norm_sq, hermitize, lndet_hpd, CMat};

fn shape_err(context: impl Into<String>) -> MetricError {
    MetricError::ShapeMismatch {
        context: context.into(),
    }
}

/// Achievable sum rate in bits/s/Hz, treating inter-user streams as noise:
/// `sum_k log2 det(I + H_k W_k W_k^H H_k^H C_k^{-1})` with interference-
/// plus-noise covariance `C_k = sigma2 I + sum_{i != k} H_k W_i W_i^H H_k^H`.
/// Evaluated as `lndet(C_k + S_k) - lndet(C_k)` through Cholesky factors.
pub fn sum_rate(h: &[CMat], w: &[CMat], sigma2: f64) -> Result<f64, MetricError> {
    if h.len() != w.len() {
        return Err(shape_err(format!(
            "{} channels vs {} precoders",
            h.len(),
            w.len()
        )));
    }
    if !(sigma2 > 0.0) {
        return Err(shape_err("noise power must be positive"));
    }
    let mut total = 0.0;
    for (k, hk) in h.iter().enumerate() {
        let nr = hk.nrows();
        let mut c = CMat::identity(nr, nr) * Complex64::new(sigma2, 0.0);
        let mut s = CMat::zeros(nr, nr);
        for (i, wi) in w.iter().enumerate() {
            if wi.nrows() != hk.ncols() {
                return Err(shape_err(format!(
                    "precoder {i} has {} rows, channel {k} has {} columns",
                    wi.nrows(),
                    hk.ncols()
                )));
            }
            let hw = hk * wi;
            let outer = &hw * hw.adjoint();
            if i == k {
                s += outer;
            } else {
                c += outer;
            }
        }
        let c = hermitize(&c);
        let t = hermitize(&(&c + s));
        let ld_c = lndet_hpd(&c).ok_or_else(|| shape_err("interference covariance not PD"))?;
        let ld_t = lndet_hpd(&t).ok_or_else(|| shape_err("signal covariance not PD"))?;
        total += (ld_t - ld_c) / std::f64::consts::LN_2;
    }
    Ok(total.max(0.0))
}

/// Power harvested by one energy receiver with channel `g_j`:
/// `zeta * sum_k ||g_j W_k||_F^2`.
pub fn harvested_energy(g_j: &CMat, w: &[CMat], zeta: f64) -> Result<f64, MetricError> {
    let mut acc = 0.0;
    for (k, wk) in w.iter().enumerate() {
        if wk.nrows() != g_j.ncols() {
            return Err(shape_err(format!(
                "precoder {k} has {} rows, harvest channel has {} columns",
                wk.nrows(),
                g_j.ncols()
            )));
        }
        acc += frob_norm_sq(&(g_j * wk));
    }
    Ok(zeta * acc)
}

/// Total transmit power `sum_k ||W_k||_F^2`.
pub fn total_power(w: &[CMat]) -> f64 {
    w.iter().map(frob_norm_sq).sum()
}

/// Harvested power at every energy receiver of a drop.
pub fn harvested_all(ch: &ChannelSet, w: &[CMat], zeta: f64) -> Result<Vec<f64>, MetricError> {
    ch.g.iter().map(|g| harvested_energy(g, w, zeta)).collect()
}
