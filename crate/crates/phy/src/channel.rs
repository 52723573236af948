//! Geometric channel model: uniform linear arrays, log-distance path loss
//! with lognormal shadowing, and Rician small-scale fading.
//!
//! A link at distance d carries large-scale gain
//! `beta = 10^(-(L(d) + X) / 10)` with `L(d) = L0 + 10 alpha log10(d / d0)`
//! and `X ~ N(0, sigma_sh^2)` in dB. The N_r x M channel is
//! `H = sqrt(beta) (sqrt(kappa / (1 + kappa)) a_rx a_tx^H
//!      + sqrt(1 / (1 + kappa)) H_w)`
//! where `kappa` is the linear Rician factor and `H_w` has i.i.d. unit
//! CN(0, 1) entries, so `E ||H||_F^2 = beta N_r M`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

use crate::config::ScenarioConfig;
use crate::errors::ChannelError;
use crate::linalg::CMat;

/// Steering vector of a half-wavelength-spaced uniform linear array with
/// `n` elements toward azimuth `theta`: entry m is
/// `exp(i 2 pi 0.5 m sin(theta))`.
pub fn steering_vector(n: usize, theta: f64) -> nalgebra::DVector<Complex64> {
    nalgebra::DVector::from_fn(n, |m, _| {
        let phase = 2.0 * PI * 0.5 * (m as f64) * theta.sin();
        Complex64::new(phase.cos(), phase.sin())
    })
}

/// Log-distance path loss in dB at distance `d_m`.
pub fn path_loss_db(cfg: &ScenarioConfig, d_m: f64) -> Result<f64, ChannelError> {
    if d_m < cfg.ref_distance_m {
        return Err(ChannelError::DistanceBelowReference {
            distance_m: d_m,
            ref_distance_m: cfg.ref_distance_m,
        });
    }
    Ok(cfg.ref_loss_db + 10.0 * cfg.pathloss_exp * (d_m / cfg.ref_distance_m).log10())
}

/// A positioned drop: receiver ground coordinates relative to the base
/// station at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub ir_positions: Vec<[f64; 2]>,
    pub er_positions: Vec<[f64; 2]>,
}

/// Channel realizations for one drop: `h[k]` is the N_r x M matrix of
/// information receiver k, `g[j]` the N_e x M matrix of energy receiver j.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub h: Vec<CMat>,
    pub g: Vec<CMat>,
    pub seed: u64,
}

/// Places receivers for one drop. Fixed positions from the config are used
/// verbatim; otherwise positions are drawn uniformly over the region with a
/// ChaCha stream seeded by `seed` (IRs first, then ERs, x before y).
pub fn generate_scenario(cfg: &ScenarioConfig, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [wx, wy] = cfg.region_halfwidth_m;
    let mut draw = |n: usize| -> Vec<[f64; 2]> {
        (0..n)
            .map(|_| [rng.random_range(-wx..=wx), rng.random_range(-wy..=wy)])
            .collect()
    };
    let (ir_positions, er_positions) = match &cfg.positions {
        Some(fixed) => (
            fixed[..cfg.num_ir].to_vec(),
            fixed[cfg.num_ir..cfg.num_ir + cfg.num_er].to_vec(),
        ),
        None => {
            let irs = draw(cfg.num_ir);
            let ers = draw(cfg.num_er);
            (irs, ers)
        }
    };
    Scenario {
        config: cfg.clone(),
        ir_positions,
        er_positions,
    }
}

impl Scenario {
    /// Slant distance from the base station to a ground position.
    pub fn link_distance(&self, pos: [f64; 2]) -> f64 {
        (pos[0] * pos[0] + pos[1] * pos[1] + self.config.bs_height_m.powi(2)).sqrt()
    }
}

fn sample_link(scn: &Scenario, pos: [f64; 2], n_rx: usize, rng: &mut ChaCha8Rng) -> CMat {
    let cfg = &scn.config;
    let d = scn.link_distance(pos).max(cfg.ref_distance_m);
    let loss_db = path_loss_db(cfg, d).expect("distance clamped to reference");
    let shadow_db: f64 = {
        let z: f64 = StandardNormal.sample(rng);
        z * cfg.shadowing_std_db
    };
    let beta = 10f64.powf(-(loss_db + shadow_db) / 10.0);

    let kappa = cfg.rician_k_linear();
    let los_w = (kappa / (1.0 + kappa)).sqrt();
    let nlos_w = (1.0 / (1.0 + kappa)).sqrt();

    // Departure azimuth at the array, arrival azimuth back toward the BS.
    let phi = pos[1].atan2(pos[0]);
    let theta = (-pos[1]).atan2(-pos[0]);
    let a_tx = steering_vector(cfg.bs_antennas, phi);
    let a_rx = steering_vector(n_rx, theta);
    let los = &a_rx * a_tx.adjoint();

    let scatter = DMatrix::from_fn(n_rx, cfg.bs_antennas, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im) * Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)
    });

    (los * Complex64::new(los_w, 0.0) + scatter * Complex64::new(nlos_w, 0.0))
        * Complex64::new(beta.sqrt(), 0.0)
}

/// Draws small-scale fading and shadowing for every link of a drop. The
/// ChaCha stream seeded by `seed` is consumed in a fixed order (IR links
/// first, then ER links; per link one shadowing draw, then the scatter
/// matrix row-major), so equal seeds give bit-identical channels.
pub fn sample_channel(scn: &Scenario, seed: u64) -> ChannelSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = &scn.config;
    let h = scn
        .ir_positions
        .iter()
        .map(|&p| sample_link(scn, p, cfg.ir_antennas, &mut rng))
        .collect();
    let g = scn
        .er_positions
        .iter()
        .map(|&p| sample_link(scn, p, cfg.er_antennas, &mut rng))
        .collect();
    ChannelSet { h, g, seed }
}
