//! Monte-Carlo performance sweeps over transmit power and array size.
//!
//! Each grid point is averaged over independent drops with common random
//! numbers: drop i uses seed `base_seed * 1_000_000 + i` for placement and
//! a fixed offset of that seed for fading, so every grid point sees the
//! same channel realizations and curves differ only through the swept
//! parameter.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};

use crate::channel::{generate_scenario, sample_channel, ChannelSet};
use crate::config::{dbm_to_watts, ScenarioConfig};
use crate::errors::SolverError;
use crate::metrics::sum_rate;
use crate::solvers::sca::{sca_swipt, DEFAULT_MAX_INNER, DEFAULT_MAX_OUTER};
use crate::solvers::wmmse::{wmmse, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use crate::solvers::zf::{zf_bd, zf_feasible};
use crate::solvers::SolverId;

pub const DEFAULT_POWER_GRID_DBM: [f64; 14] = [
    30.0, 31.0, 32.0, 33.0, 34.0, 35.0, 36.0, 37.0, 38.0, 39.0, 40.0, 41.0, 42.0, 43.0,
];
pub const DEFAULT_ANTENNA_GRID: [usize; 5] = [4, 5, 6, 7, 8];
pub const SOLVERS: [SolverId; 3] = [SolverId::Zf, SolverId::Wmmse, SolverId::Sca];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Power,
    Antennas,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::Power => "power",
            SweepAxis::Antennas => "antennas",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverStat {
    pub solver: SolverId,
    pub mean_rate_bps_hz: f64,
    pub std_err: f64,
    /// Fraction of drops where the harvest target was not met (including
    /// drops certified infeasible).
    pub eh_violation_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub axis_value: f64,
    pub stats: Vec<SolverStat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub drops: usize,
    pub base_seed: u64,
    pub points: Vec<SweepPoint>,
}

fn drop_channels(cfg: &ScenarioConfig, base_seed: u64, drop: usize) -> ChannelSet {
    let drop_seed = base_seed.wrapping_mul(1_000_000).wrapping_add(drop as u64);
    let scn = generate_scenario(cfg, drop_seed);
    sample_channel(&scn, drop_seed.wrapping_add(0x5EED))
}

#[derive(Clone, Copy)]
struct DropOutcome {
    rate: f64,
    violated: bool,
}

fn solve_drop(ch: &ChannelSet, cfg: &ScenarioConfig, solver: SolverId) -> DropOutcome {
    match solver {
        SolverId::Zf => {
            let sol = zf_bd(ch, cfg).expect("grid checked against the ZF precondition");
            DropOutcome {
                rate: sol.objective_trace[0],
                violated: !sol.feasible_eh,
            }
        }
        SolverId::Wmmse => {
            let sol = wmmse(ch, cfg, DEFAULT_MAX_ITERS, DEFAULT_TOL)
                .expect("channel shapes come from the same config");
            let rate = sum_rate(&ch.h, &sol.precoders, cfg.noise_power_w).unwrap_or(0.0);
            DropOutcome {
                rate,
                violated: !sol.feasible_eh,
            }
        }
        SolverId::Sca => match sca_swipt(ch, cfg, None, DEFAULT_MAX_OUTER, DEFAULT_MAX_INNER) {
            Ok(sol) => {
                let rate = sum_rate(&ch.h, &sol.precoders, cfg.noise_power_w).unwrap_or(0.0);
                DropOutcome {
                    rate,
                    violated: !sol.feasible_eh,
                }
            }
            // A certified-infeasible drop keeps the unconstrained rate and
            // counts as a harvest violation.
            Err(SolverError::Infeasible { .. }) => {
                let sol = wmmse(ch, cfg, DEFAULT_MAX_ITERS, DEFAULT_TOL)
                    .expect("channel shapes come from the same config");
                let rate = sum_rate(&ch.h, &sol.precoders, cfg.noise_power_w).unwrap_or(0.0);
                DropOutcome {
                    rate,
                    violated: true,
                }
            }
            Err(e) => panic!("sweep config invariants violated: {e}"),
        },
    }
}

fn run_grid(
    configs: Vec<(f64, ScenarioConfig)>,
    drops: usize,
    base_seed: u64,
    axis: SweepAxis,
) -> SweepResult {
    assert!(drops >= 1, "at least one drop per grid point");
    let points = configs
        .par_iter()
        .map(|(axis_value, cfg)| {
            let per_solver: Vec<Vec<DropOutcome>> = (0..drops)
                .into_par_iter()
                .map(|drop| {
                    let ch = drop_channels(cfg, base_seed, drop);
                    SOLVERS
                        .iter()
                        .map(|&s| solve_drop(&ch, cfg, s))
                        .collect::<Vec<_>>()
                })
                .collect::<Vec<_>>()
                .into_iter()
                .fold(
                    vec![Vec::with_capacity(drops); SOLVERS.len()],
                    |mut acc, row| {
                        for (slot, outcome) in acc.iter_mut().zip(row) {
                            slot.push(outcome);
                        }
                        acc
                    },
                );
            let stats = SOLVERS
                .iter()
                .zip(per_solver)
                .map(|(&solver, outcomes)| summarize(solver, &outcomes))
                .collect();
            SweepPoint {
                axis_value: *axis_value,
                stats,
            }
        })
        .collect();
    SweepResult {
        axis,
        drops,
        base_seed,
        points,
    }
}

fn summarize(solver: SolverId, outcomes: &[DropOutcome]) -> SolverStat {
    let n = outcomes.len() as f64;
    let mean = outcomes.iter().map(|o| o.rate).sum::<f64>() / n;
    let std_err = if outcomes.len() > 1 {
        let var = outcomes
            .iter()
            .map(|o| (o.rate - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    let violations = outcomes.iter().filter(|o| o.violated).count() as f64;
    SolverStat {
        solver,
        mean_rate_bps_hz: mean,
        std_err,
        eh_violation_rate: violations / n,
    }
}

/// Sweeps transmit power over `grid_dbm` (default 30..=43 dBm in 1 dB
/// steps) with `drops` Monte-Carlo drops per point.
pub fn sweep_power(
    cfg: &ScenarioConfig,
    grid_dbm: &[f64],
    drops: usize,
    base_seed: u64,
) -> Result<SweepResult, SolverError> {
    if !zf_feasible(cfg) {
        return Err(SolverError::NullSpaceEmpty {
            antennas: cfg.bs_antennas,
            interfering_rows: (cfg.num_ir - 1) * cfg.ir_antennas,
        });
    }
    let configs = grid_dbm
        .iter()
        .map(|&p| {
            (
                p,
                ScenarioConfig {
                    max_power_w: dbm_to_watts(p),
                    ..cfg.clone()
                },
            )
        })
        .collect();
    Ok(run_grid(configs, drops, base_seed, SweepAxis::Power))
}

/// Sweeps the base-station antenna count over `grid_m` (default 4..=8) at
/// the default 43 dBm budget.
pub fn sweep_antennas(
    cfg: &ScenarioConfig,
    grid_m: &[usize],
    drops: usize,
    base_seed: u64,
) -> Result<SweepResult, SolverError> {
    for &m in grid_m {
        let probe = ScenarioConfig {
            bs_antennas: m,
            ..cfg.clone()
        };
        if !zf_feasible(&probe) {
            return Err(SolverError::NullSpaceEmpty {
                antennas: m,
                interfering_rows: (cfg.num_ir - 1) * cfg.ir_antennas,
            });
        }
    }
    let configs = grid_m
        .iter()
        .map(|&m| {
            let cfg_m = ScenarioConfig {
                bs_antennas: m,
                max_power_w: dbm_to_watts(43.0),
                ..cfg.clone()
            };
            (m as f64, cfg_m)
        })
        .collect();
    Ok(run_grid(configs, drops, base_seed, SweepAxis::Antennas))
}

impl SweepResult {
    /// Writes `axis,value,solver,mean_rate_bps_hz,stderr,eh_violation_rate,drops`
    /// rows, one per (grid point, solver).
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "axis,value,solver,mean_rate_bps_hz,stderr,eh_violation_rate,drops"
        )?;
        for point in &self.points {
            for stat in &point.stats {
                writeln!(
                    out,
                    "{},{},{},{:.6},{:.6},{:.4},{}",
                    self.axis.label(),
                    point.axis_value,
                    stat.solver.label(),
                    stat.mean_rate_bps_hz,
                    stat.std_err,
                    stat.eh_violation_rate,
                    self.drops
                )?;
            }
        }
        Ok(())
    }
}
