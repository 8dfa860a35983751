//! Seeded Monte Carlo simulator with parallel update.
//!
//! All hop decisions in a step are made from the same current configuration.
//! One uniform variate is drawn per *movable* particle, in ascending site
//! order; immovable particles consume no randomness. This convention is part
//! of the reproducibility contract: identical inputs, seed and stream give
//! bit-identical runs.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{apply_moves, movable_particles, Model, ModelParams, Mover};
use crate::ring::{same_particle_sequence, ConfigSpace, Counts, RingConfig};

/// Outcome of a single run.
#[derive(Debug, Clone)]
pub struct SimStats {
    pub params: ModelParams,
    pub ring_len: usize,
    pub counts: Counts,
    pub steps: u64,
    pub burn_in: u64,
    pub seed: u64,
    pub stream: u64,
    /// Visit counts of the configurations seen after each post-burn-in step;
    /// the counts sum to `steps - burn_in`. Keyed by the packed configuration
    /// itself, so keying is exact at any ring length.
    pub histogram: HashMap<RingConfig, u64>,
    /// Post-burn-in hops.
    pub total_moves: u64,
    /// Mean hops per site per step, post burn-in.
    pub empirical_flux: f64,
    /// Batch-means standard error of the flux estimator.
    pub flux_std_error: f64,
    /// Particles per site (constant over the run).
    pub empirical_density: f64,
}

impl SimStats {
    /// Total-variation distance between the empirical distribution and a
    /// reference distribution over `space`.
    pub fn total_variation(&self, space: &ConfigSpace, reference: &[f64]) -> f64 {
        let n = (self.steps - self.burn_in) as f64;
        let mut dist = 0.0;
        let mut seen_mass = 0.0;
        for (id, pi) in reference.iter().enumerate() {
            let emp = self
                .histogram
                .get(space.config(id))
                .map_or(0.0, |&c| c as f64 / n);
            dist += (emp - pi).abs();
            seen_mass += emp;
        }
        // histogram mass outside the reference space, if any
        dist += (1.0 - seen_mass).max(0.0);
        dist / 2.0
    }
}

/// One parallel update. Returns the successor and the number of hops.
pub fn step<R: Rng>(
    x: &RingConfig,
    params: &ModelParams,
    rng: &mut R,
) -> Result<(RingConfig, u64)> {
    params.check_ring(x)?;
    let movers = movable_particles(x, params.model)?;
    let mut chosen: Vec<Mover> = Vec::with_capacity(movers.len());
    for mv in movers {
        let p = if mv.beta_coin {
            params.beta
        } else {
            params.alpha
        };
        if rng.random::<f64>() < p {
            chosen.push(mv);
        }
    }
    let y = apply_moves(x, &chosen);
    if params.model == Model::Epbca2 {
        debug_assert!(same_particle_sequence(x, &y), "species sequence changed");
    }
    debug_assert_eq!(x.particle_count(), y.particle_count());
    Ok((y, chosen.len() as u64))
}

/// Runs `steps` parallel updates from `x0` on RNG stream 0.
pub fn run(
    x0: &RingConfig,
    params: &ModelParams,
    steps: u64,
    burn_in: u64,
    seed: u64,
) -> Result<SimStats> {
    run_on_stream(x0, params, steps, burn_in, seed, 0)
}

/// Runs on a dedicated RNG stream, so sweeps can hand each grid point an
/// independent, individually reproducible stream of one shared seed.
pub fn run_on_stream(
    x0: &RingConfig,
    params: &ModelParams,
    steps: u64,
    burn_in: u64,
    seed: u64,
    stream: u64,
) -> Result<SimStats> {
    params.check_ring(x0)?;
    if steps <= burn_in {
        return Err(Error::Parameter(format!(
            "steps = {steps} must exceed burn_in = {burn_in}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);

    let l = x0.len();
    let measured = steps - burn_in;
    let batches = measured.min(100);
    let batch_len = measured / batches;

    let mut x = x0.clone();
    let mut histogram: HashMap<RingConfig, u64> = HashMap::new();
    let mut total_moves = 0u64;
    let mut batch_sums: Vec<f64> = Vec::with_capacity(batches as usize);
    let mut batch_acc = 0u64;
    let mut in_batch = 0u64;

    for n in 0..steps {
        let (y, moves) = step(&x, params, &mut rng)?;
        x = y;
        if n >= burn_in {
            *histogram.entry(x.clone()).or_insert(0) += 1;
            total_moves += moves;
            if (batch_sums.len() as u64) < batches {
                batch_acc += moves;
                in_batch += 1;
                if in_batch == batch_len {
                    batch_sums.push(batch_acc as f64 / (batch_len * l as u64) as f64);
                    batch_acc = 0;
                    in_batch = 0;
                }
            }
        }
    }

    let empirical_flux = total_moves as f64 / (l as u64 * measured) as f64;
    let flux_std_error = if batch_sums.len() >= 2 {
        let nb = batch_sums.len() as f64;
        let mean = batch_sums.iter().sum::<f64>() / nb;
        let var = batch_sums.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (nb - 1.0);
        (var / nb).sqrt()
    } else {
        0.0
    };

    let counts = match params.model {
        Model::Epbca2 => {
            let (m_a, m_b) = x0.species_counts();
            Counts::Species { m_a, m_b }
        }
        _ => Counts::Binary {
            m: x0.particle_count(),
        },
    };

    Ok(SimStats {
        params: *params,
        ring_len: l,
        counts,
        steps,
        burn_in,
        seed,
        stream,
        histogram,
        total_moves,
        empirical_flux,
        flux_std_error,
        empirical_density: x0.particle_count() as f64 / l as f64,
    })
}

/// Random binary ring with exactly `m` particles (seeded by the caller's RNG).
pub fn random_binary_ring<R: Rng>(l: usize, m: usize, rng: &mut R) -> Result<RingConfig> {
    if m > l {
        return Err(Error::Parameter(format!("m = {m} exceeds L = {l}")));
    }
    let sites = sample_sites(l, m, rng);
    let mut cells = vec![0u8; l];
    for s in sites {
        cells[s] = 1;
    }
    RingConfig::from_cells(crate::ring::Alphabet::Binary, &cells)
}

/// Random species ring with `m_a` A-particles and `m_b` B-particles.
pub fn random_species_ring<R: Rng>(
    l: usize,
    m_a: usize,
    m_b: usize,
    rng: &mut R,
) -> Result<RingConfig> {
    if m_a + m_b > l {
        return Err(Error::Parameter(format!(
            "m_a + m_b = {} exceeds L = {l}",
            m_a + m_b
        )));
    }
    let sites = sample_sites(l, m_a + m_b, rng);
    let mut cells = vec![0u8; l];
    for (i, s) in sites.into_iter().enumerate() {
        cells[s] = if i < m_a { 1 } else { 2 };
    }
    RingConfig::from_cells(crate::ring::Alphabet::Species, &cells)
}

fn sample_sites<R: Rng>(l: usize, k: usize, rng: &mut R) -> Vec<usize> {
    // partial Fisher-Yates
    let mut sites: Vec<usize> = (0..l).collect();
    for i in 0..k {
        let j = i + rng.random_range(0..l - i);
        sites.swap(i, j);
    }
    sites.truncate(k);
    sites
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(s: &str) -> RingConfig {
        RingConfig::parse(s).unwrap()
    }

    fn pbca(alpha: f64) -> ModelParams {
        ModelParams::new(Model::Pbca, alpha, 0.0).unwrap()
    }

    #[test]
    fn frozen_ring_never_moves() {
        let params = pbca(0.9);
        let x = ring("1111");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (y, moves) = step(&x, &params, &mut rng).unwrap();
        assert_eq!(y, x);
        assert_eq!(moves, 0);

        let stats = run(&x, &params, 2, 1, 7).unwrap();
        assert_eq!(stats.empirical_flux, 0.0);
    }

    #[test]
    fn particle_count_conserved() {
        let params = ModelParams::new(Model::Epbca2, 0.7, 0.4).unwrap();
        let mut x = ring("A0B0AB00");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let (y, _) = step(&x, &params, &mut rng).unwrap();
            assert_eq!(y.species_counts(), (2, 2));
            assert!(same_particle_sequence(&x, &y));
            x = y;
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let params = ModelParams::new(Model::Epbca1, 0.8, 0.1).unwrap();
        let x0 = ring("00010111");
        let a = run(&x0, &params, 500, 50, 42).unwrap();
        let b = run(&x0, &params, 500, 50, 42).unwrap();
        assert_eq!(a.empirical_flux, b.empirical_flux);
        assert_eq!(a.histogram, b.histogram);
        let c = run(&x0, &params, 500, 50, 43).unwrap();
        assert!(a.histogram != c.histogram);
        // distinct streams differ too
        let d = run_on_stream(&x0, &params, 500, 50, 42, 1).unwrap();
        assert!(a.histogram != d.histogram);
    }

    #[test]
    fn histogram_mass_equals_measured_steps() {
        let params = pbca(0.5);
        let stats = run(&ring("10100100"), &params, 1000, 100, 5).unwrap();
        assert_eq!(stats.histogram.values().sum::<u64>(), 900);
        assert!((0.0..=1.0).contains(&stats.empirical_flux));
        assert_eq!(stats.empirical_density, 3.0 / 8.0);
    }

    #[test]
    fn successor_frequencies_follow_the_law() {
        // 1010 at alpha = 1/2: all four outcomes equally likely
        let params = pbca(0.5);
        let x = ring("1010");
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts: HashMap<String, u64> = HashMap::new();
        let trials = 40_000;
        for _ in 0..trials {
            let (y, _) = step(&x, &params, &mut rng).unwrap();
            *counts.entry(y.to_string()).or_insert(0) += 1;
        }
        assert_eq!(counts.len(), 4);
        for &c in counts.values() {
            let freq = c as f64 / trials as f64;
            assert!((freq - 0.25).abs() < 0.01, "freq {freq}");
        }
    }

    #[test]
    fn step_rejects_mismatched_ring() {
        let params = ModelParams::new(Model::Epbca2, 0.5, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(step(&ring("1010"), &params, &mut rng).is_err());
        assert!(run(&ring("1010"), &params, 10, 0, 0).is_err());
        assert!(run(&ring("A0"), &params, 10, 10, 0).is_err());
    }

    #[test]
    fn random_rings_have_requested_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_binary_ring(100, 37, &mut rng).unwrap();
        assert_eq!(x.particle_count(), 37);
        let y = random_species_ring(30, 7, 15, &mut rng).unwrap();
        assert_eq!(y.species_counts(), (7, 15));
        assert!(random_binary_ring(4, 5, &mut rng).is_err());
    }
}
