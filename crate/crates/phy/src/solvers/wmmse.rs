//! Weighted MMSE sum-rate maximization under a total power budget.
//!
//! Classic three-block alternation: MMSE receive filters
//! `U_k = R_k^{-1} H_k W_k`, MSE weights `V_k = E_k^{-1}` with
//! `E_k = I - U_k^H H_k W_k`, and precoders
//! `W_k = (A + mu I)^{-1} H_k^H U_k V_k` where
//! `A = sum_i H_i^H U_i V_i U_i^H H_i` and `mu >= 0` is the water level
//! found by bisection so the power budget holds. Each block solves its
//! subproblem exactly, so the sum rate never decreases across iterations.

use num_complex::Complex64;

use crate::channel::ChannelSet;
use crate::config::ScenarioConfig;
use crate::errors::SolverError;
use crate::linalg::{hermitize, CMat};
use crate::metrics::{harvested_all, sum_rate};
use crate::solvers::zf::zf_bd;
use crate::solvers::{BeamformerSolution, SolverId};

pub const DEFAULT_MAX_ITERS: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-6;

/// Matched-filter style fallback start: strongest right singular vectors
/// of each channel with the budget split evenly across users and streams.
fn svd_init(ch: &ChannelSet, cfg: &ScenarioConfig) -> Vec<CMat> {
    let k_users = ch.h.len();
    let d = cfg.streams_per_ir;
    ch.h.iter()
        .map(|hk| {
            let svd = hk.clone().svd(false, true);
            let v = svd
                .v_t
                .expect("requested V^T")
                .rows(0, d.min(hk.nrows()))
                .adjoint();
            let mut w = CMat::zeros(cfg.bs_antennas, d);
            w.columns_mut(0, v.ncols()).copy_from(&v);
            for extra in v.ncols()..d {
                w[(extra % cfg.bs_antennas, extra)] = Complex64::new(1.0, 0.0);
            }
            let per_col = cfg.max_power_w / (k_users * d) as f64;
            w * Complex64::new(per_col.sqrt(), 0.0)
        })
        .collect()
}

fn solve_hpd(a: &CMat, b: &CMat) -> Option<CMat> {
    hermitize(a).cholesky().map(|c| c.solve(b))
}

/// Precoder update: with `A = Q diag(lambda) Q^H` and `Bt_k = Q^H B_k`,
/// the candidate at water level `mu` is `Q diag(1/(lambda + mu)) Bt_k` and
/// its total power is `sum_k sum_m ||Bt_k[m, :]||^2 / (lambda_m + mu)^2`.
fn precoders_at_mu(q: &CMat, lambda: &[f64], bt: &[CMat], mu: f64) -> Vec<CMat> {
    bt.iter()
        .map(|btk| {
            let mut scaled = btk.clone();
            for (m, &lm) in lambda.iter().enumerate() {
                let row_zero = btk.row(m).iter().all(|z| z.norm_sqr() == 0.0);
                let s = if row_zero { 0.0 } else { 1.0 / (lm + mu) };
                scaled.row_mut(m).scale_mut(s);
            }
            q * scaled
        })
        .collect()
}

fn power_at_mu(lambda: &[f64], bt: &[CMat], mu: f64) -> f64 {
    bt.iter()
        .map(|btk| {
            (0..btk.nrows())
                .map(|m| {
                    let r: f64 = btk.row(m).iter().map(|z| z.norm_sqr()).sum();
                    if r == 0.0 {
                        0.0
                    } else {
                        r / (lambda[m] + mu).powi(2)
                    }
                })
                .sum::<f64>()
        })
        .sum()
}

pub fn wmmse(
    ch: &ChannelSet,
    cfg: &ScenarioConfig,
    max_iters: usize,
    tol: f64,
) -> Result<BeamformerSolution, SolverError> {
    let sigma2 = cfg.noise_power_w;
    let p_max = cfg.max_power_w;
    let k_users = ch.h.len();
    let mut w = match zf_bd(ch, cfg) {
        Ok(sol)
            if sol
                .precoders
                .iter()
                .all(|wk| wk.ncols() == cfg.streams_per_ir) =>
        {
            sol.precoders
        }
        _ => svd_init(ch, cfg),
    };

    let mut trace = Vec::new();
    let mut best_rate = sum_rate(&ch.h, &w, sigma2)?;
    let mut best_w = w.clone();
    let mut prev_rate = best_rate;

    for _ in 0..max_iters {
        // Receive filters and weights.
        let mut u = Vec::with_capacity(k_users);
        let mut v = Vec::with_capacity(k_users);
        for (k, hk) in ch.h.iter().enumerate() {
            let nr = hk.nrows();
            let mut r = CMat::identity(nr, nr) * Complex64::new(sigma2, 0.0);
            for wi in &w {
                let hw = hk * wi;
                r += &hw * hw.adjoint();
            }
            let hwk = hk * &w[k];
            let uk = solve_hpd(&r, &hwk).ok_or_else(|| SolverError::ShapeMismatch {
                context: "covariance not PD".into(),
            })?;
            let d = w[k].ncols();
            let ek = hermitize(&(CMat::identity(d, d) - uk.adjoint() * &hwk));
            let vk = solve_hpd(&ek, &CMat::identity(d, d)).ok_or_else(|| {
                SolverError::ShapeMismatch {
                    context: "MSE matrix not PD".into(),
                }
            })?;
            u.push(uk);
            v.push(hermitize(&vk));
        }

        // Precoder block.
        let m = cfg.bs_antennas;
        let mut a = CMat::zeros(m, m);
        let mut b = Vec::with_capacity(k_users);
        for (k, hk) in ch.h.iter().enumerate() {
            let hu = hk.adjoint() * &u[k];
            a += &hu * &v[k] * hu.adjoint();
            b.push(hu * &v[k]);
        }
        let eig = hermitize(&a).symmetric_eigen();
        let lambda: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
        let q = eig.eigenvectors;
        let bt: Vec<CMat> = b.iter().map(|bk| q.adjoint() * bk).collect();

        let lambda_floor = lambda.iter().cloned().fold(0.0f64, f64::max) * 1e-14;
        let unconstrained_ok = lambda.iter().enumerate().all(|(mrow, &lm)| {
            lm > lambda_floor
                || bt
                    .iter()
                    .all(|btk| btk.row(mrow).iter().all(|z| z.norm_sqr() == 0.0))
        });
        let mu = if unconstrained_ok && power_at_mu(&lambda, &bt, 0.0) <= p_max {
            0.0
        } else {
            let mut hi = 1.0;
            while power_at_mu(&lambda, &bt, hi) > p_max {
                hi *= 2.0;
            }
            let mut lo = 0.0;
            for _ in 0..300 {
                let mid = 0.5 * (lo + hi);
                if power_at_mu(&lambda, &bt, mid) > p_max {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 * hi {
                    break;
                }
            }
            hi
        };
        w = precoders_at_mu(&q, &lambda, &bt, mu);

        let rate = sum_rate(&ch.h, &w, sigma2)?;
        trace.push(rate);
        if rate > best_rate {
            best_rate = rate;
            best_w = w.clone();
        }
        if (rate - prev_rate).abs() < tol {
            break;
        }
        prev_rate = rate;
    }

    let harvested = harvested_all(ch, &best_w, cfg.eh_efficiency)?;
    let feasible_eh = harvested.iter().all(|&e| e >= cfg.min_harvest_w - 1e-12);
    Ok(BeamformerSolution {
        solver: SolverId::Wmmse,
        iterations: trace.len(),
        objective_trace: trace,
        precoders: best_w,
        feasible_eh,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_scenario, sample_channel};
    use crate::metrics::total_power;

    fn default_drop(seed: u64) -> (ChannelSet, ScenarioConfig) {
        let cfg = ScenarioConfig::default();
        let scn = generate_scenario(&cfg, seed);
        (sample_channel(&scn, seed.wrapping_add(1)), cfg)
    }

    #[test]
    fn rate_is_monotone_and_within_budget() {
        for seed in 0..10 {
            let (ch, cfg) = default_drop(seed);
            let sol = wmmse(&ch, &cfg, DEFAULT_MAX_ITERS, DEFAULT_TOL).unwrap();
            for pair in sol.objective_trace.windows(2) {
                assert!(
                    pair[1] >= pair[0] - 1e-8,
                    "seed {seed}: {} -> {}",
                    pair[0],
                    pair[1]
                );
            }
            assert!(total_power(&sol.precoders) <= cfg.max_power_w * (1.0 + 1e-6));
        }
    }

    #[test]
    fn improves_on_zero_forcing_start() {
        for seed in 0..10 {
            let (ch, cfg) = default_drop(seed);
            let zf = zf_bd(&ch, &cfg).unwrap();
            let sol = wmmse(&ch, &cfg, DEFAULT_MAX_ITERS, DEFAULT_TOL).unwrap();
            let zf_rate = zf.objective_trace[0];
            let last = *sol.objective_trace.last().unwrap();
            assert!(last >= zf_rate - 1e-9, "seed {seed}: {last} < {zf_rate}");
        }
    }

    #[test]
    fn single_user_matches_waterfilling_capacity() {
        // One user, no interference: WMMSE should reach the waterfilled
        // capacity of the point-to-point MIMO link.
        let cfg = ScenarioConfig {
            num_ir: 1,
            num_er: 0,
            streams_per_ir: 3,
            ..ScenarioConfig::default()
        };
        let scn = generate_scenario(&cfg, 4);
        let ch = sample_channel(&scn, 4);
        let sol = wmmse(&ch, &cfg, 2000, 1e-12).unwrap();
        let achieved = *sol.objective_trace.last().unwrap();

        let svd = ch.h[0].clone().svd(false, false);
        let gains: Vec<f64> = svd
            .singular_values
            .iter()
            .map(|s| s * s / cfg.noise_power_w)
            .collect();
        let capacity = waterfill(&gains, cfg.max_power_w);
        assert!(
            (achieved - capacity).abs() <= 1e-4 * capacity,
            "achieved {achieved}, capacity {capacity}"
        );
    }

    fn waterfill(gains: &[f64], budget: f64) -> f64 {
        let mut order: Vec<f64> = gains.to_vec();
        order.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for active in (1..=order.len()).rev() {
            let inv_sum: f64 = order[..active].iter().map(|g| 1.0 / g).sum();
            let level = (budget + inv_sum) / active as f64;
            if order[..active].iter().all(|&g| level - 1.0 / g >= -1e-15) {
                return order[..active].iter().map(|&g| (level * g).log2()).sum();
            }
        }
        0.0
    }

    #[test]
    fn zero_channels_yield_zero_rate_without_panicking() {
        let cfg = ScenarioConfig::default();
        let scn = generate_scenario(&cfg, 1);
        let mut ch = sample_channel(&scn, 1);
        for h in ch.h.iter_mut() {
            h.fill(Complex64::new(0.0, 0.0));
        }
        for g in ch.g.iter_mut() {
            g.fill(Complex64::new(0.0, 0.0));
        }
        let sol = wmmse(&ch, &cfg, 50, 1e-9).unwrap();
        assert!(sol.objective_trace.iter().all(|&r| r == 0.0));
    }
}
