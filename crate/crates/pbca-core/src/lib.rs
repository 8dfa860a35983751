//! A three-engine laboratory for probabilistic Burgers cellular automata (PBCA)
//! and two extensions.
//!
//! The same particle system can be studied three independent ways, and the
//! engines cross-validate each other at desk scale:
//!
//! * [`sim`]: a seeded Monte Carlo simulator applying the parallel-update
//!   motion rules and collecting histograms and empirical flux;
//! * [`markov`]: an exact finite Markov chain: transition matrices over an
//!   enumerated configuration space, stationary distributions, and rotation
//!   lumping, in either `f64` or exact big-rational arithmetic;
//! * [`conjecture`] / [`flux`]: closed-form steady-state weights keyed to
//!   local pattern counts, combinatorial counting functions, finite-size flux
//!   formulas, and the infinite-size flux limit obtained through a
//!   hypergeometric contiguous-relation argument ([`flux::gkz`]).
//!
//! Three models share the machinery:
//!
//! * **PBCA**: particles on a periodic binary ring; a particle with an empty
//!   right neighbour hops right with probability `alpha`, all particles
//!   updated simultaneously.
//! * **EPBCA1**: the hop probability depends on the next-nearest site:
//!   a particle heading `100` hops with probability `alpha`, heading `101`
//!   with probability `beta`.
//! * **EPBCA2**: two species `A` and `B` on the same ring; `A0` hops with
//!   probability `alpha`, `B0` with probability `beta`. Particles never pass
//!   one another, so the cyclic species sequence is conserved.

pub mod conjecture;
pub mod error;
pub mod flux;
pub mod markov;
pub mod model;
pub mod numeric;
pub mod ring;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use model::{Model, ModelParams};
pub use ring::{Alphabet, ConfigSpace, PatternTally, RingConfig};
