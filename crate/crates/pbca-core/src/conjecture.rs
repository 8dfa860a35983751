//! Closed-form steady-state weights, the combinatorial counting functions
//! behind them, and conjecture-vs-exact verification.
//!
//! Each model's stationary probability depends on its configuration only
//! through a local pattern tally: `#10` for PBCA, `(#100, #101)` for EPBCA1,
//! and `(k_A, k_B, n_A, n_B)` for EPBCA2. The weight functions below
//! evaluate the unnormalized weights; [`verify_conjecture`] normalizes them
//! over an enumerated space and compares against the exact stationary
//! distribution, which makes it a falsification hook rather than a
//! restatement.

use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::Zero;
use serde::Serialize;

use crate::error::Result;
use crate::markov::{build_matrix, stationary};
use crate::model::Model;
use crate::numeric::{binomial_big, binomial_gamma, factorial_big};
use crate::ring::{
    count_10, count_100_101, tally_species, ConfigSpace, Counts, PatternTally, RingConfig,
};
use crate::scalar::{pow_usize, HopProbs, Scalar};

/// Unnormalized steady-state weight of one configuration.
///
/// `log_weight` is robust at any ring size; `weight` is the same quantity in
/// the active numeric mode (exact in rational mode).
#[derive(Debug, Clone)]
pub struct ConjectureWeight<S: Scalar> {
    pub log_weight: f64,
    pub weight: S,
}

/// Pattern tally of `x` under the given model's sufficient statistic.
pub fn pattern_tally(x: &RingConfig, model: Model) -> Result<PatternTally> {
    match model {
        Model::Pbca => Ok(PatternTally::Pbca { c10: count_10(x)? }),
        Model::Epbca1 => {
            let (c100, c101) = count_100_101(x)?;
            Ok(PatternTally::Epbca1 { c100, c101 })
        }
        Model::Epbca2 => tally_species(x),
    }
}

/// PBCA weight `(1/(1-alpha))^#10`.
pub fn weight_pbca<S: Scalar>(x: &RingConfig, alpha: &S) -> Result<ConjectureWeight<S>> {
    let c10 = count_10(x)?;
    weight_from_tally(&PatternTally::Pbca { c10 }, alpha, &S::zero())
}

/// EPBCA1 weight
/// `(alpha(1-beta)/((1-alpha)^2 beta))^#100 * (alpha/((1-alpha) beta))^#101`.
pub fn weight_epbca1<S: Scalar>(
    x: &RingConfig,
    alpha: &S,
    beta: &S,
) -> Result<ConjectureWeight<S>> {
    let (c100, c101) = count_100_101(x)?;
    weight_from_tally(&PatternTally::Epbca1 { c100, c101 }, alpha, beta)
}

/// EPBCA2 weight
/// `(1-beta)^(n_B-k_B) / (1-alpha)^(k_A+n_B) * (alpha/beta)^n_B`.
pub fn weight_epbca2<S: Scalar>(
    x: &RingConfig,
    alpha: &S,
    beta: &S,
) -> Result<ConjectureWeight<S>> {
    let tally = tally_species(x)?;
    weight_from_tally(&tally, alpha, beta)
}

/// Weight of any model's tally; the endpoint checks live here so every route
/// into the conjectures rejects degenerate parameters.
pub fn weight_from_tally<S: Scalar>(
    tally: &PatternTally,
    alpha: &S,
    beta: &S,
) -> Result<ConjectureWeight<S>> {
    let probs = HopProbs::new(alpha.clone(), beta.clone())?;
    let uses_beta = !matches!(tally, PatternTally::Pbca { .. });
    probs.require_interior(uses_beta)?;
    let one = S::one;
    let (a, b) = (alpha, beta);
    let (af, bf) = (alpha.to_f64(), beta.to_f64());
    match *tally {
        PatternTally::Pbca { c10 } => {
            let weight = one() / pow_usize(&(one() - a.clone()), c10);
            let log_weight = -(c10 as f64) * (1.0 - af).ln();
            Ok(ConjectureWeight { log_weight, weight })
        }
        PatternTally::Epbca1 { c100, c101 } => {
            let na = one() - a.clone();
            let nb = one() - b.clone();
            let w1 = a.clone() * nb.clone() / (na.clone() * na.clone() * b.clone());
            let w2 = a.clone() / (na.clone() * b.clone());
            let weight = pow_usize(&w1, c100) * pow_usize(&w2, c101);
            let ln_w1 = af.ln() + (1.0 - bf).ln() - 2.0 * (1.0 - af).ln() - bf.ln();
            let ln_w2 = af.ln() - (1.0 - af).ln() - bf.ln();
            let log_weight = c100 as f64 * ln_w1 + c101 as f64 * ln_w2;
            Ok(ConjectureWeight { log_weight, weight })
        }
        PatternTally::Epbca2 {
            k_a, k_b, n_a, n_b, ..
        } => {
            debug_assert!(k_a <= n_a && k_b <= n_b);
            let na = one() - a.clone();
            let nb = one() - b.clone();
            let weight = pow_usize(&nb, n_b - k_b) / pow_usize(&na, k_a + n_b)
                * pow_usize(&(a.clone() / b.clone()), n_b);
            let log_weight = (n_b - k_b) as f64 * (1.0 - bf).ln()
                - (k_a + n_b) as f64 * (1.0 - af).ln()
                + n_b as f64 * (af.ln() - bf.ln());
            Ok(ConjectureWeight { log_weight, weight })
        }
    }
}

/// Number of PBCA configurations of `(L, m)` with `#10 = k`:
/// `L (m-1)! (L-m-1)! / ((m-k)! (k-1)! k! (L-m-k)!)`; zero outside
/// `1 <= k <= min(m, L-m)`.
pub fn count_n_pbca(l: usize, m: usize, k: usize) -> BigUint {
    if m == 0 || m >= l || k == 0 || k > m || k > l - m {
        return BigUint::zero();
    }
    let (l, m, k) = (l as u64, m as u64, k as u64);
    let num = BigUint::from(l) * factorial_big(m - 1) * factorial_big(l - m - 1);
    let den = factorial_big(m - k)
        * factorial_big(k - 1)
        * factorial_big(k)
        * factorial_big(l - m - k);
    num / den
}

/// Number of EPBCA1 configurations of `(L, m)` with `#100 = k1 >= 1` and
/// `#101 = k2`; zero outside the region where all factorial arguments are
/// nonnegative. The `k1 = 0` family is not covered by this closed form (the
/// reciprocal-gamma pole makes it vanish); see [`count_k1_zero_epbca1`].
pub fn count_n_epbca1(l: usize, m: usize, k1: usize, k2: usize) -> BigUint {
    if m == 0 || m >= l || k1 == 0 || k1 + k2 > m || 2 * k1 + k2 > l - m {
        return BigUint::zero();
    }
    let (l, m, k1, k2) = (l as u64, m as u64, k1 as u64, k2 as u64);
    let num = BigUint::from(l) * factorial_big(l - m - k1 - k2 - 1) * factorial_big(m - 1);
    let den = factorial_big(k1)
        * factorial_big(k2)
        * factorial_big(l - m - 2 * k1 - k2)
        * factorial_big(k1 - 1)
        * factorial_big(m - k1 - k2);
    num / den
}

/// Size of the `#100 = 0` family: configurations whose zero-runs all have
/// length one, `(L/m) C(m, L-m)`. All of them have `#101 = L-m`. Empty when
/// `L-m > m` (some zero-run would have length two or more).
pub fn count_k1_zero_epbca1(l: usize, m: usize) -> BigUint {
    if m == 0 || l < m || l - m > m {
        return BigUint::zero();
    }
    let (l, m) = (l as u64, m as u64);
    BigUint::from(l) * binomial_big(m, l - m) / BigUint::from(m)
}

/// EPBCA2 tally census up to the per-space constant:
/// `C(m_A,k_A) C(n_A-1,k_A-1) C(m_B,k_B) C(n_B-1,k_B-1)`, with the
/// reciprocal-gamma convention making the `k = n = 0` factor equal one and
/// any inconsistent tally vanish. Ratios of these values equal ratios of
/// configuration counts, so the unknown constant cancels in every consumer.
pub fn census_epbca2(
    m_a: usize,
    m_b: usize,
    k_a: usize,
    k_b: usize,
    n_a: usize,
    n_b: usize,
) -> BigUint {
    let c = |n: i64, k: i64| binomial_gamma(n, k);
    c(m_a as i64, k_a as i64)
        * c(n_a as i64 - 1, k_a as i64 - 1)
        * c(m_b as i64, k_b as i64)
        * c(n_b as i64 - 1, k_b as i64 - 1)
}

/// Outcome of one conjecture-vs-exact comparison.
#[derive(Debug, Clone, Serialize)]
pub struct DeviationReport {
    pub model: Model,
    pub ring_len: usize,
    pub m: Option<usize>,
    pub m_a: Option<usize>,
    pub m_b: Option<usize>,
    pub alpha: f64,
    pub beta: Option<f64>,
    pub states: usize,
    /// Max over states of `|conjecture - exact| / exact`.
    pub max_rel_dev: f64,
    pub argmax_state: String,
    pub exact_mode: bool,
}

/// Normalizes the conjecture weights over `space` and reports the maximum
/// relative deviation from the exact stationary distribution.
pub fn verify_conjecture<S: Scalar>(
    space: &Arc<ConfigSpace>,
    model: Model,
    probs: &HopProbs<S>,
) -> Result<DeviationReport> {
    probs.require_interior(model.uses_beta())?;
    let mat = build_matrix(Arc::clone(space), model, probs.clone())?;
    let pi = stationary(&mat)?;

    let weights: Vec<S> = space
        .configs()
        .iter()
        .map(|x| {
            let tally = pattern_tally(x, model)?;
            Ok(weight_from_tally(&tally, &probs.alpha, &probs.beta)?.weight)
        })
        .collect::<Result<_>>()?;
    let z = weights.iter().fold(S::zero(), |acc, w| acc + w.clone());

    let mut max_rel_dev = 0.0f64;
    let mut argmax = 0usize;
    for (id, w) in weights.iter().enumerate() {
        let q = w.clone() / z.clone();
        let p = &pi.probabilities[id];
        let dev = if S::EXACT {
            if q == *p {
                0.0
            } else {
                let (qf, pf) = (q.to_f64(), p.to_f64());
                ((qf - pf) / pf).abs().max(f64::MIN_POSITIVE)
            }
        } else {
            let (qf, pf) = (q.to_f64(), p.to_f64());
            ((qf - pf) / pf).abs()
        };
        if dev > max_rel_dev {
            max_rel_dev = dev;
            argmax = id;
        }
    }

    let (m, m_a, m_b) = match space.counts() {
        Counts::Binary { m } => (Some(m), None, None),
        Counts::Species { m_a, m_b } => (None, Some(m_a), Some(m_b)),
    };
    Ok(DeviationReport {
        model,
        ring_len: space.ring_len(),
        m,
        m_a,
        m_b,
        alpha: probs.alpha.to_f64(),
        beta: model.uses_beta().then(|| probs.beta.to_f64()),
        states: space.size(),
        max_rel_dev,
        argmax_state: space.config(argmax).to_string(),
        exact_mode: S::EXACT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::ring::{enumerate_binary, enumerate_species_reachable};
    use num_rational::BigRational;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn ring(s: &str) -> RingConfig {
        RingConfig::parse(s).unwrap()
    }

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    #[test]
    fn pbca_weight_normalizes_to_reference_probability() {
        // p(0011) = (1-a) / (4(1-a)+2), p(0101) = 1 / (4(1-a)+2)
        let a = rat(1, 3);
        let na = BigRational::from_integer(1.into()) - a.clone();
        let space = enumerate_binary(4, 2).unwrap();
        let z = space
            .configs()
            .iter()
            .fold(BigRational::from_integer(0.into()), |acc, x| {
                acc + weight_pbca(x, &a).unwrap().weight
            });
        let w0011 = weight_pbca(&ring("0011"), &a).unwrap().weight;
        let w0101 = weight_pbca(&ring("0101"), &a).unwrap().weight;
        let denom = rat(4, 1) * na.clone() + rat(2, 1);
        assert_eq!(w0011.clone() / z.clone(), na.clone() / denom.clone());
        assert_eq!(
            w0101 / z,
            BigRational::from_integer(1.into()) / denom
        );
    }

    #[test]
    fn pbca_weight_at_one_half() {
        let space = enumerate_binary(4, 2).unwrap();
        let z: f64 = space
            .configs()
            .iter()
            .map(|x| weight_pbca(x, &0.5f64).unwrap().weight)
            .sum();
        let p0011 = weight_pbca(&ring("0011"), &0.5).unwrap().weight / z;
        let p0101 = weight_pbca(&ring("0101"), &0.5).unwrap().weight / z;
        assert!((p0011 - 0.125).abs() < 1e-14);
        assert!((p0101 - 0.25).abs() < 1e-14);
    }

    #[test]
    fn weights_are_rotation_invariant() {
        let x = ring("0010110100");
        let w = weight_epbca1(&x, &0.8f64, &0.1).unwrap();
        for r in 0..x.len() {
            let wr = weight_epbca1(&x.rotate(r), &0.8, &0.1).unwrap();
            assert_eq!(w.weight, wr.weight);
            assert_eq!(w.log_weight, wr.log_weight);
        }
    }

    #[test]
    fn endpoint_parameters_rejected() {
        assert!(matches!(
            weight_pbca(&ring("0011"), &1.0f64),
            Err(Error::EndpointParameter { .. })
        ));
        assert!(weight_epbca1(&ring("0011"), &0.5f64, &0.0).is_err());
        // all-empty species ring has no tally
        let empty = RingConfig::from_cells(crate::ring::Alphabet::Species, &[0, 0]).unwrap();
        assert!(matches!(
            weight_epbca2(&empty, &0.5f64, &0.5),
            Err(Error::UndefinedTally)
        ));
    }

    #[test]
    fn log_weight_tracks_weight() {
        for s in ["0011", "0101", "00101101"] {
            let w = weight_pbca(&ring(s), &0.8f64).unwrap();
            assert!((w.log_weight.exp() - w.weight).abs() < 1e-12 * w.weight);
        }
    }

    #[test]
    fn count_n_pbca_small_values() {
        assert_eq!(count_n_pbca(4, 2, 1), big(4));
        assert_eq!(count_n_pbca(4, 2, 2), big(2));
        let row: Vec<BigUint> = (1..=4).map(|k| count_n_pbca(8, 4, k)).collect();
        assert_eq!(row, vec![big(8), big(36), big(24), big(2)]);
        assert_eq!(row.iter().sum::<BigUint>(), big(70));
        assert_eq!(count_n_pbca(8, 4, 5), BigUint::zero());
        assert_eq!(count_n_pbca(8, 4, 0), BigUint::zero());
    }

    #[test]
    fn count_n_pbca_census_oracle() {
        // brute-force #10 census over enumerated spaces
        for l in 2..=9usize {
            for m in 1..l {
                let space = enumerate_binary(l, m).unwrap();
                let mut census = vec![0u64; l + 1];
                for x in space.configs() {
                    census[count_10(x).unwrap()] += 1;
                }
                for (k, &count) in census.iter().enumerate() {
                    assert_eq!(
                        count_n_pbca(l, m, k),
                        big(count),
                        "L={l} m={m} k={k}"
                    );
                }
            }
        }
    }

    #[test]
    fn count_n_epbca1_small_values() {
        assert_eq!(count_n_epbca1(8, 4, 1, 0), big(8));
        assert_eq!(count_n_epbca1(8, 4, 1, 1), big(24));
        assert_eq!(count_n_epbca1(8, 4, 1, 2), big(24));
        assert_eq!(count_n_epbca1(8, 4, 2, 0), big(12));
        assert_eq!(count_n_epbca1(8, 4, 0, 4), BigUint::zero());
        // 68 formula configurations plus the two alternating rings
        let total: BigUint = (1..=4)
            .flat_map(|k1| (0..=4).map(move |k2| count_n_epbca1(8, 4, k1, k2)))
            .sum();
        assert_eq!(total, big(68));
        assert_eq!(count_k1_zero_epbca1(8, 4), big(2));
    }

    #[test]
    fn count_k1_zero_values() {
        assert_eq!(count_k1_zero_epbca1(9, 6), big(30));
        assert_eq!(count_k1_zero_epbca1(8, 3), BigUint::zero()); // L-m > m
        let space = enumerate_binary(9, 6).unwrap();
        let brute = space
            .configs()
            .iter()
            .filter(|x| count_100_101(x).unwrap().0 == 0)
            .count();
        assert_eq!(count_k1_zero_epbca1(9, 6), big(brute as u64));
        // all such configurations carry #101 = L - m
        for x in space.configs() {
            let (c100, c101) = count_100_101(x).unwrap();
            if c100 == 0 {
                assert_eq!(c101, 3);
            }
        }
    }

    #[test]
    fn epbca1_weight_reduces_to_pbca_at_equal_probabilities() {
        let a = rat(3, 7);
        for s in ["00101101", "01010101", "00011101"] {
            let x = ring(s);
            let w1 = weight_epbca1(&x, &a, &a).unwrap().weight;
            let w2 = weight_pbca(&x, &a).unwrap().weight;
            assert_eq!(w1, w2, "{s}");
        }
    }

    #[test]
    fn epbca2_weight_matches_reference_grouping() {
        // (1-b)^(nB-kB)/(1-a)^(kA+nB) * (a/b)^nB for 00AABAAB:
        // tally kA=0, kB=1, nA=0, nB=2
        let (a, b) = (rat(2, 5), rat(4, 5));
        let one = BigRational::from_integer(1.into());
        let x = ring("00AABAAB");
        assert_eq!(
            pattern_tally(&x, Model::Epbca2).unwrap(),
            PatternTally::Epbca2 {
                k_a: 0,
                k_b: 1,
                n_a: 0,
                n_b: 2,
                m_a: 4,
                m_b: 2
            }
        );
        let w = weight_epbca2(&x, &a, &b).unwrap().weight;
        let na = one.clone() - a.clone();
        let nb = one.clone() - b.clone();
        let expected = nb.clone() * a.clone() * a.clone()
            / (b.clone() * b.clone() * na.clone() * na.clone());
        assert_eq!(w, expected);
    }

    #[test]
    fn epbca2_weight_b_free_reduces_to_pbca() {
        let (a, b) = (rat(2, 5), rat(4, 5));
        let species = ring("A0A0A000");
        let binary = ring("10101000");
        let ws = weight_epbca2(&species, &a, &b).unwrap().weight;
        let wb = weight_pbca(&binary, &a).unwrap().weight;
        assert_eq!(ws, wb);
    }

    #[test]
    fn verify_small_instances() {
        // float mode
        let space = Arc::new(enumerate_binary(6, 3).unwrap());
        let probs = HopProbs::new(0.8f64, 0.0).unwrap();
        let report = verify_conjecture(&space, Model::Pbca, &probs).unwrap();
        assert!(report.max_rel_dev <= 1e-9, "dev {}", report.max_rel_dev);
        assert!(!report.exact_mode);

        // rational mode is exact
        let probs = HopProbs::new(rat(4, 5), rat(0, 1)).unwrap();
        let report = verify_conjecture(&space, Model::Pbca, &probs).unwrap();
        assert_eq!(report.max_rel_dev, 0.0);
        assert!(report.exact_mode);

        let space = Arc::new(enumerate_species_reachable(&ring("AABAAB00")).unwrap());
        let probs = HopProbs::new(rat(2, 5), rat(4, 5)).unwrap();
        let report = verify_conjecture(&space, Model::Epbca2, &probs).unwrap();
        assert_eq!(report.max_rel_dev, 0.0);
    }

    #[test]
    fn census_epbca2_gamma_convention() {
        // kA = nA = 0 contributes a unit factor
        assert_eq!(census_epbca2(4, 2, 0, 1, 0, 2), big(2)); // C(2,1)*C(1,0)
        assert_eq!(census_epbca2(4, 2, 1, 1, 0, 2), BigUint::zero()); // kA>0, nA=0
        assert_eq!(census_epbca2(4, 2, 0, 0, 0, 2), BigUint::zero()); // nB>0 needs kB>=1
        assert_eq!(census_epbca2(3, 1, 1, 1, 2, 1), big(3)); // C(3,1)C(1,0)C(1,1)C(0,0)
    }
}
