//! Fundamental-diagram computation: exact finite-size flux for all three
//! models, Monte Carlo and exact-chain overlays, and the infinite-size PBCA
//! limit (see [`gkz`]).
//!
//! All partition sums are evaluated in the log domain with compensated
//! accumulation; `lambda^k N(k)` leaves `f64` range near `L = 100` at
//! `alpha = 0.8`.

pub mod gkz;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::conjecture::pattern_tally;
use crate::error::{Error, Result};
use crate::markov::{build_matrix, stationary};
use crate::model::{Model, ModelParams};
use crate::numeric::{log_sum_exp, LnFactorial};
use crate::ring::{ConfigSpace, Counts, PatternTally};
use crate::scalar::HopProbs;
use crate::sim::{random_binary_ring, random_species_ring, run_on_stream, SimStats};

/// How a flux value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    MonteCarlo,
    ExactChain,
    ClosedForm,
    Limit,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::MonteCarlo => "monte-carlo",
            Provenance::ExactChain => "exact-chain",
            Provenance::ClosedForm => "closed-form",
            Provenance::Limit => "limit",
        })
    }
}

/// One `(density, flux)` point of a fundamental diagram. Serializes with
/// the same field names the CSV schema uses.
#[derive(Debug, Clone, Serialize)]
pub struct FluxPoint {
    pub model: Model,
    /// `None` for the infinite-size limit.
    #[serde(rename = "L")]
    pub ring_len: Option<usize>,
    pub alpha: f64,
    pub beta: Option<f64>,
    #[serde(rename = "rho")]
    pub density: f64,
    #[serde(rename = "rhoA")]
    pub density_a: Option<f64>,
    #[serde(rename = "rhoB")]
    pub density_b: Option<f64>,
    pub flux: f64,
    pub provenance: Provenance,
}

impl FluxPoint {
    fn closed_form(model: Model, l: usize, alpha: f64, beta: Option<f64>, density: f64) -> Self {
        Self {
            model,
            ring_len: Some(l),
            alpha,
            beta,
            density,
            density_a: None,
            density_b: None,
            flux: 0.0,
            provenance: Provenance::ClosedForm,
        }
    }
}

fn require_interior(value: f64, name: &'static str) -> Result<()> {
    if value <= 0.0 || value >= 1.0 {
        return Err(Error::EndpointParameter { name, value });
    }
    Ok(())
}

/// Exact finite-size PBCA flux
/// `(alpha/L) * sum_k k N(k) lambda^k / sum_k N(k) lambda^k`, `lambda = 1/(1-alpha)`.
pub fn flux_pbca(l: usize, m: usize, alpha: f64) -> Result<FluxPoint> {
    if m == 0 || m >= l {
        return Err(Error::Parameter(format!(
            "flux needs 0 < m < L, got m = {m}, L = {l}"
        )));
    }
    require_interior(alpha, "alpha")?;
    let lf = LnFactorial::up_to(l);
    let ln_lambda = -(1.0 - alpha).ln();
    let kmax = m.min(l - m);
    let mut den = Vec::with_capacity(kmax);
    let mut num = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        let ln_n = (l as f64).ln() + lf.get(m - 1) + lf.get(l - m - 1)
            - lf.get(m - k)
            - lf.get(k - 1)
            - lf.get(k)
            - lf.get(l - m - k);
        let t = ln_n + k as f64 * ln_lambda;
        den.push(t);
        num.push(t + (k as f64).ln());
    }
    let flux = alpha / l as f64 * (log_sum_exp(&num) - log_sum_exp(&den)).exp();
    let mut point = FluxPoint::closed_form(Model::Pbca, l, alpha, None, m as f64 / l as f64);
    point.flux = flux;
    Ok(point)
}

/// Exact finite-size EPBCA1 flux: the double sum over `(#100, #101)` tallies,
/// augmented by the `#100 = 0` family of alternating-gap configurations that
/// the closed-form count misses.
pub fn flux_epbca1(l: usize, m: usize, alpha: f64, beta: f64) -> Result<FluxPoint> {
    if m == 0 || m >= l {
        return Err(Error::Parameter(format!(
            "flux needs 0 < m < L, got m = {m}, L = {l}"
        )));
    }
    if l < 3 {
        return Err(Error::RingTooShort { min: 3, got: l });
    }
    require_interior(alpha, "alpha")?;
    require_interior(beta, "beta")?;

    let lf = LnFactorial::up_to(l);
    let ln_w1 = alpha.ln() + (1.0 - beta).ln() - 2.0 * (1.0 - alpha).ln() - beta.ln();
    let ln_w2 = alpha.ln() - (1.0 - alpha).ln() - beta.ln();

    let mut den = Vec::new();
    let mut num = Vec::new();
    for k1 in 1..=m {
        if 2 * k1 > l - m {
            break;
        }
        for k2 in 0..=(m - k1).min(l - m - 2 * k1) {
            let ln_n = (l as f64).ln() + lf.get(l - m - k1 - k2 - 1) + lf.get(m - 1)
                - lf.get(k1)
                - lf.get(k2)
                - lf.get(l - m - 2 * k1 - k2)
                - lf.get(k1 - 1)
                - lf.get(m - k1 - k2);
            let t = ln_n + k1 as f64 * ln_w1 + k2 as f64 * ln_w2;
            den.push(t);
            num.push(t + (alpha * k1 as f64 + beta * k2 as f64).ln());
        }
    }
    if l - m <= m {
        // zero-runs all of length one: #100 = 0, #101 = L - m
        let z = l - m;
        let ln_n0 = (l as f64).ln() + lf.get(m - 1) - lf.get(z) - lf.get(2 * m - l);
        let t = ln_n0 + z as f64 * ln_w2;
        den.push(t);
        if z > 0 {
            num.push(t + (beta * z as f64).ln());
        }
    }

    let flux = (log_sum_exp(&num) - log_sum_exp(&den)).exp() / l as f64;
    let mut point =
        FluxPoint::closed_form(Model::Epbca1, l, alpha, Some(beta), m as f64 / l as f64);
    point.flux = flux;
    Ok(point)
}

/// Exact EPBCA2 flux by tally census: the sum over realizable
/// `(k_A, k_B, n_A, n_B)` with per-tally counts known up to a constant that
/// cancels between numerator and denominator.
pub fn flux_epbca2(l: usize, m_a: usize, m_b: usize, alpha: f64, beta: f64) -> Result<FluxPoint> {
    if m_a + m_b > l || m_a + m_b == 0 {
        return Err(Error::Parameter(format!(
            "flux needs 0 < m_a + m_b <= L, got {m_a} + {m_b} vs L = {l}"
        )));
    }
    require_interior(alpha, "alpha")?;
    require_interior(beta, "beta")?;

    let z = l - m_a - m_b;
    let mut den = Vec::new();
    let mut num = Vec::new();
    for n_a in 0..=z {
        let n_b = z - n_a;
        for k_a in 0..=n_a.min(m_a) {
            for k_b in 0..=n_b.min(m_b) {
                let count = crate::conjecture::census_epbca2(m_a, m_b, k_a, k_b, n_a, n_b);
                let count = match num_traits::ToPrimitive::to_f64(&count) {
                    Some(c) if c > 0.0 => c,
                    _ => continue,
                };
                let tally = PatternTally::Epbca2 {
                    k_a,
                    k_b,
                    n_a,
                    n_b,
                    m_a,
                    m_b,
                };
                let t = count.ln() + log_weight_of_tally(&tally, alpha, beta);
                den.push(t);
                let rate = alpha * k_a as f64 + beta * k_b as f64;
                if rate > 0.0 {
                    num.push(t + rate.ln());
                }
            }
        }
    }

    let flux = (log_sum_exp(&num) - log_sum_exp(&den)).exp() / l as f64;
    let mut point = FluxPoint::closed_form(
        Model::Epbca2,
        l,
        alpha,
        Some(beta),
        (m_a + m_b) as f64 / l as f64,
    );
    point.density_a = Some(m_a as f64 / l as f64);
    point.density_b = Some(m_b as f64 / l as f64);
    point.flux = flux;
    Ok(point)
}

/// EPBCA2 flux as a direct sum over an enumerated space, grouped by tally.
/// Agrees with [`flux_epbca2`] whenever the census is faithful to the space.
pub fn flux_epbca2_over_space(space: &ConfigSpace, alpha: f64, beta: f64) -> Result<FluxPoint> {
    require_interior(alpha, "alpha")?;
    require_interior(beta, "beta")?;
    let (m_a, m_b) = match space.counts() {
        Counts::Species { m_a, m_b } => (m_a, m_b),
        Counts::Binary { .. } => {
            return Err(Error::AlphabetMismatch {
                expected: "species",
            })
        }
    };
    let l = space.ring_len();

    let mut census: HashMap<PatternTally, u64> = HashMap::new();
    for x in space.configs() {
        *census
            .entry(pattern_tally(x, Model::Epbca2)?)
            .or_insert(0) += 1;
    }
    let mut den = Vec::with_capacity(census.len());
    let mut num = Vec::with_capacity(census.len());
    for (tally, count) in census {
        let t = (count as f64).ln() + log_weight_of_tally(&tally, alpha, beta);
        den.push(t);
        let PatternTally::Epbca2 { k_a, k_b, .. } = tally else {
            unreachable!()
        };
        let rate = alpha * k_a as f64 + beta * k_b as f64;
        if rate > 0.0 {
            num.push(t + rate.ln());
        }
    }

    let flux = (log_sum_exp(&num) - log_sum_exp(&den)).exp() / l as f64;
    let mut point = FluxPoint::closed_form(
        Model::Epbca2,
        l,
        alpha,
        Some(beta),
        (m_a + m_b) as f64 / l as f64,
    );
    point.density_a = Some(m_a as f64 / l as f64);
    point.density_b = Some(m_b as f64 / l as f64);
    point.flux = flux;
    Ok(point)
}

fn log_weight_of_tally(tally: &PatternTally, alpha: f64, beta: f64) -> f64 {
    match *tally {
        PatternTally::Pbca { c10 } => -(c10 as f64) * (1.0 - alpha).ln(),
        PatternTally::Epbca1 { c100, c101 } => {
            c100 as f64 * (alpha.ln() + (1.0 - beta).ln() - 2.0 * (1.0 - alpha).ln() - beta.ln())
                + c101 as f64 * (alpha.ln() - (1.0 - alpha).ln() - beta.ln())
        }
        PatternTally::Epbca2 {
            k_a, k_b, n_b, ..
        } => {
            (n_b - k_b) as f64 * (1.0 - beta).ln() - (k_a + n_b) as f64 * (1.0 - alpha).ln()
                + n_b as f64 * (alpha.ln() - beta.ln())
        }
    }
}

/// Steady-state flux straight from the exact stationary distribution:
/// the expectation of the per-step hop rate over `pi`.
pub fn flux_exact_chain(space: &Arc<ConfigSpace>, params: &ModelParams) -> Result<FluxPoint> {
    let probs = HopProbs::from_params(params);
    let mat = build_matrix(Arc::clone(space), params.model, probs)?;
    let pi = stationary(&mat)?;
    let l = space.ring_len();
    let mut flux = 0.0;
    for (id, p) in pi.probabilities.iter().enumerate() {
        let rate = match pattern_tally(space.config(id), params.model)? {
            PatternTally::Pbca { c10 } => params.alpha * c10 as f64,
            PatternTally::Epbca1 { c100, c101 } => {
                params.alpha * c100 as f64 + params.beta * c101 as f64
            }
            PatternTally::Epbca2 { k_a, k_b, .. } => {
                params.alpha * k_a as f64 + params.beta * k_b as f64
            }
        };
        flux += p * rate / l as f64;
    }

    let (density, density_a, density_b) = match space.counts() {
        Counts::Binary { m } => (m as f64 / l as f64, None, None),
        Counts::Species { m_a, m_b } => (
            (m_a + m_b) as f64 / l as f64,
            Some(m_a as f64 / l as f64),
            Some(m_b as f64 / l as f64),
        ),
    };
    Ok(FluxPoint {
        model: params.model,
        ring_len: Some(l),
        alpha: params.alpha,
        beta: params.model.uses_beta().then_some(params.beta),
        density,
        density_a,
        density_b,
        flux,
        provenance: Provenance::ExactChain,
    })
}

/// Monte Carlo flux estimate from a seeded run on a random initial
/// configuration with the given particle content. Returns the point and the
/// batch-means standard error. Stream `2*stream` drives the run and
/// `2*stream + 1` the initial configuration, so grid points never share
/// random numbers.
pub fn flux_monte_carlo(
    params: &ModelParams,
    l: usize,
    counts: Counts,
    steps: u64,
    seed: u64,
    stream: u64,
) -> Result<(FluxPoint, f64)> {
    let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
    init_rng.set_stream(2 * stream + 1);
    let x0 = match counts {
        Counts::Binary { m } => random_binary_ring(l, m, &mut init_rng)?,
        Counts::Species { m_a, m_b } => random_species_ring(l, m_a, m_b, &mut init_rng)?,
    };
    let stats = run_on_stream(&x0, params, steps, 0, seed, 2 * stream)?;
    Ok((monte_carlo_point(&stats), stats.flux_std_error))
}

/// Flux point read off a finished simulation run.
pub fn monte_carlo_point(stats: &SimStats) -> FluxPoint {
    let l = stats.ring_len as f64;
    let (density_a, density_b) = match stats.counts {
        Counts::Binary { .. } => (None, None),
        Counts::Species { m_a, m_b } => (Some(m_a as f64 / l), Some(m_b as f64 / l)),
    };
    FluxPoint {
        model: stats.params.model,
        ring_len: Some(stats.ring_len),
        alpha: stats.params.alpha,
        beta: stats.params.model.uses_beta().then_some(stats.params.beta),
        density: stats.empirical_density,
        density_a,
        density_b,
        flux: stats.empirical_flux,
        provenance: Provenance::MonteCarlo,
    }
}

/// Infinite-size PBCA flux, `Q = (1 - sqrt(1 - 4 alpha rho (1 - rho))) / 2`.
/// At `alpha = 1` this degenerates to the deterministic diagram
/// `min(rho, 1 - rho)`.
pub fn flux_limit_pbca(rho: f64, alpha: f64) -> Result<FluxPoint> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Parameter(format!("density {rho} outside [0,1]")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Parameter(format!("alpha {alpha} outside [0,1]")));
    }
    let flux = (1.0 - (1.0 - 4.0 * alpha * rho * (1.0 - rho)).sqrt()) / 2.0;
    Ok(FluxPoint {
        model: Model::Pbca,
        ring_len: None,
        alpha,
        beta: None,
        density: rho,
        density_a: None,
        density_b: None,
        flux,
        provenance: Provenance::Limit,
    })
}

/// Closed-form fundamental diagram over every density `m/L`, `m = 1..L-1`.
pub fn fd_sweep(model: Model, l: usize, alpha: f64, beta: f64) -> Result<Vec<FluxPoint>> {
    (1..l)
        .into_par_iter()
        .map(|m| match model {
            Model::Pbca => flux_pbca(l, m, alpha),
            Model::Epbca1 => flux_epbca1(l, m, alpha, beta),
            Model::Epbca2 => Err(Error::Parameter(
                "two-species sweeps fix m_b; use fd_sweep_epbca2".into(),
            )),
        })
        .collect()
}

/// EPBCA2 fundamental-diagram slice at fixed `m_b`, sweeping `m_a`.
pub fn fd_sweep_epbca2(l: usize, m_b: usize, alpha: f64, beta: f64) -> Result<Vec<FluxPoint>> {
    if m_b > l {
        return Err(Error::Parameter(format!("m_b = {m_b} exceeds L = {l}")));
    }
    (0..=(l - m_b))
        .into_par_iter()
        .filter(|m_a| m_a + m_b > 0)
        .map(|m_a| flux_epbca2(l, m_a, m_b, alpha, beta))
        .collect()
}

/// Full EPBCA2 surface over `(m_a, m_b)`.
pub fn fd_surface_epbca2(l: usize, alpha: f64, beta: f64) -> Result<Vec<FluxPoint>> {
    let grid: Vec<(usize, usize)> = (0..=l)
        .flat_map(|m_a| (0..=(l - m_a)).map(move |m_b| (m_a, m_b)))
        .filter(|&(m_a, m_b)| m_a + m_b > 0)
        .collect();
    grid.into_par_iter()
        .map(|(m_a, m_b)| flux_epbca2(l, m_a, m_b, alpha, beta))
        .collect()
}

/// Samples of the infinite-size limit curve on an evenly spaced interior
/// density grid.
pub fn fd_limit_curve(alpha: f64, grid_points: usize) -> Result<Vec<FluxPoint>> {
    (1..=grid_points)
        .map(|i| flux_limit_pbca(i as f64 / (grid_points + 1) as f64, alpha))
        .collect()
}
