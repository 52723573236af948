//! Zero-forcing block diagonalization: each user's precoder lives in the
//! null space of every other user's channel, removing inter-user
//! interference entirely, with equal power split across users and streams.

use num_complex::Complex64;

use crate::channel::ChannelSet;
use crate::config::ScenarioConfig;
use crate::errors::SolverError;
use crate::linalg::{null_space_basis, CMat};
use crate::metrics::{harvested_all, sum_rate};
use crate::solvers::{BeamformerSolution, SolverId};

/// Checks the dimensional precondition `M > (K - 1) N_r`.
pub fn zf_feasible(cfg: &ScenarioConfig) -> bool {
    cfg.bs_antennas > (cfg.num_ir - 1) * cfg.ir_antennas
}

pub fn zf_bd(ch: &ChannelSet, cfg: &ScenarioConfig) -> Result<BeamformerSolution, SolverError> {
    let k_users = ch.h.len();
    let m = cfg.bs_antennas;
    let total_rows: usize = ch.h.iter().map(|h| h.nrows()).sum();
    let min_rows = ch.h.iter().map(|h| h.nrows()).min().unwrap_or(0);
    let interfering_rows = total_rows - min_rows;
    if k_users > 1 && interfering_rows >= m {
        return Err(SolverError::NullSpaceEmpty {
            antennas: m,
            interfering_rows,
        });
    }

    let mut precoders = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let other_rows: usize =
            ch.h.iter()
                .enumerate()
                .filter(|(i, _)| *i != k)
                .map(|(_, h)| h.nrows())
                .sum();
        let mut stacked = CMat::zeros(other_rows, m);
        let mut row = 0;
        for (i, hi) in ch.h.iter().enumerate() {
            if i == k {
                continue;
            }
            stacked.rows_mut(row, hi.nrows()).copy_from(hi);
            row += hi.nrows();
        }
        let basis = null_space_basis(&stacked, m);
        if basis.ncols() == 0 {
            return Err(SolverError::NullSpaceEmpty {
                antennas: m,
                interfering_rows: other_rows,
            });
        }

        // Align streams with the strongest directions of the effective
        // channel H_k B_k; the columns of B_k V_d stay orthonormal.
        let eff = &ch.h[k] * &basis;
        let d = cfg.streams_per_ir.min(basis.ncols());
        let svd = eff.svd(false, true);
        let v_d = svd.v_t.expect("requested V^T").rows(0, d).adjoint();
        let unscaled = basis * v_d;
        let per_col = cfg.max_power_w / (k_users * d) as f64;
        precoders.push(unscaled * Complex64::new(per_col.sqrt(), 0.0));
    }

    let rate = sum_rate(&ch.h, &precoders, cfg.noise_power_w)?;
    let harvested = harvested_all(ch, &precoders, cfg.eh_efficiency)?;
    let feasible_eh = harvested.iter().all(|&e| e >= cfg.min_harvest_w - 1e-12);
    Ok(BeamformerSolution {
        solver: SolverId::Zf,
        precoders,
        iterations: 1,
        objective_trace: vec![rate],
        feasible_eh,
    })
}
