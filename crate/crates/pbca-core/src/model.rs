//! The three models and their parallel-update motion rules.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ring::{Alphabet, RingConfig, CELL_B};

/// Which particle system is being run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// `10` hops with probability `alpha`.
    Pbca,
    /// `100` hops with probability `alpha`, `101` with probability `beta`.
    Epbca1,
    /// `A0` hops with probability `alpha`, `B0` with probability `beta`.
    Epbca2,
}

impl Model {
    pub fn alphabet(self) -> Alphabet {
        match self {
            Model::Pbca | Model::Epbca1 => Alphabet::Binary,
            Model::Epbca2 => Alphabet::Species,
        }
    }

    /// Whether the model's law depends on `beta` at all.
    pub fn uses_beta(self) -> bool {
        !matches!(self, Model::Pbca)
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::Pbca => "pbca",
            Model::Epbca1 => "epbca1",
            Model::Epbca2 => "epbca2",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pbca" => Ok(Model::Pbca),
            "epbca1" => Ok(Model::Epbca1),
            "epbca2" => Ok(Model::Epbca2),
            other => Err(Error::Parse(format!("unknown model {other:?}"))),
        }
    }
}

/// Model choice plus hopping probabilities (float mode).
///
/// `beta` is carried but ignored for PBCA. Construction accepts the closed
/// interval `[0,1]`; engines whose formulas require interior values reject
/// endpoints themselves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub model: Model,
    pub alpha: f64,
    pub beta: f64,
}

impl ModelParams {
    pub fn new(model: Model, alpha: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Parameter(format!("{name} = {v} outside [0,1]")));
            }
        }
        Ok(Self { model, alpha, beta })
    }

    /// Rejects endpoint probabilities for the parameters the model uses.
    pub fn require_interior(&self) -> Result<()> {
        let mut named = vec![("alpha", self.alpha)];
        if self.model.uses_beta() {
            named.push(("beta", self.beta));
        }
        for (name, value) in named {
            if value <= 0.0 || value >= 1.0 {
                return Err(Error::EndpointParameter { name, value });
            }
        }
        Ok(())
    }

    pub fn check_ring(&self, x: &RingConfig) -> Result<()> {
        if x.alphabet() != self.model.alphabet() {
            return Err(Error::AlphabetMismatch {
                expected: self.model.alphabet().name(),
            });
        }
        if self.model == Model::Epbca1 && x.len() < 3 {
            return Err(Error::RingTooShort {
                min: 3,
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// A particle that may hop in the current step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mover {
    /// Site of the particle (0-based).
    pub site: usize,
    /// Draws against `beta` instead of `alpha`.
    pub beta_coin: bool,
}

/// Movable particles of `x` under the model's rule, ascending by site.
///
/// Every mover has an empty right neighbour; movers therefore have pairwise
/// distinct sources and targets and any subset can hop simultaneously.
pub fn movable_particles(x: &RingConfig, model: Model) -> Result<Vec<Mover>> {
    if x.alphabet() != model.alphabet() {
        return Err(Error::AlphabetMismatch {
            expected: model.alphabet().name(),
        });
    }
    let l = x.len();
    if model == Model::Epbca1 && l < 3 {
        return Err(Error::RingTooShort { min: 3, got: l });
    }
    let mut movers = Vec::new();
    for j in 0..l {
        let c = x.get(j);
        if c == 0 || x.get_cyclic(j + 1) != 0 {
            continue;
        }
        let beta_coin = match model {
            Model::Pbca => false,
            Model::Epbca1 => x.get_cyclic(j + 2) != 0,
            Model::Epbca2 => c == CELL_B,
        };
        movers.push(Mover { site: j, beta_coin });
    }
    Ok(movers)
}

/// Shifts each selected mover one site to the right. The callers guarantee
/// the movers come from [`movable_particles`] on `x`, so targets are empty
/// and pairwise distinct.
pub fn apply_moves(x: &RingConfig, chosen: &[Mover]) -> RingConfig {
    let l = x.len();
    let mut y = x.clone();
    for mv in chosen {
        let c = x.get(mv.site);
        debug_assert!(c != 0 && x.get_cyclic(mv.site + 1) == 0);
        y.set(mv.site, 0);
        y.set((mv.site + 1) % l, c);
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(s: &str) -> RingConfig {
        RingConfig::parse(s).unwrap()
    }

    #[test]
    fn movers_pbca() {
        let ms = movable_particles(&ring("1010"), Model::Pbca).unwrap();
        assert_eq!(
            ms,
            vec![
                Mover {
                    site: 0,
                    beta_coin: false
                },
                Mover {
                    site: 2,
                    beta_coin: false
                }
            ]
        );
        assert!(movable_particles(&ring("1111"), Model::Pbca)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn movers_epbca1_distinguish_patterns() {
        // 00010111: particle at index 3 heads 101 (beta), index 7 heads 100 (alpha)
        let ms = movable_particles(&ring("00010111"), Model::Epbca1).unwrap();
        assert_eq!(
            ms,
            vec![
                Mover {
                    site: 3,
                    beta_coin: true
                },
                Mover {
                    site: 7,
                    beta_coin: false
                }
            ]
        );
    }

    #[test]
    fn movers_epbca2_by_species() {
        let ms = movable_particles(&ring("A0B0"), Model::Epbca2).unwrap();
        assert_eq!(
            ms,
            vec![
                Mover {
                    site: 0,
                    beta_coin: false
                },
                Mover {
                    site: 2,
                    beta_coin: true
                }
            ]
        );
        assert!(movable_particles(&ring("A0B0"), Model::Pbca).is_err());
    }

    #[test]
    fn apply_moves_shifts_right() {
        let x = ring("1010");
        let ms = movable_particles(&x, Model::Pbca).unwrap();
        assert_eq!(apply_moves(&x, &ms).to_string(), "0101");
        assert_eq!(apply_moves(&x, &ms[..1]).to_string(), "0110");
        assert_eq!(apply_moves(&x, &ms[1..]).to_string(), "1001");
        assert_eq!(apply_moves(&x, &[]).to_string(), "1010");
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(Model::Pbca, 0.5, 0.0).is_ok());
        assert!(ModelParams::new(Model::Pbca, -0.1, 0.0).is_err());
        let p = ModelParams::new(Model::Pbca, 1.0, 0.5).unwrap();
        assert!(p.require_interior().is_err());
        // beta endpoint is fine for a model that ignores beta
        let p = ModelParams::new(Model::Pbca, 0.5, 0.0).unwrap();
        assert!(p.require_interior().is_ok());
        let p = ModelParams::new(Model::Epbca1, 0.5, 0.0).unwrap();
        assert!(p.require_interior().is_err());
    }
}
