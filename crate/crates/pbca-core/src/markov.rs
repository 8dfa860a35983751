//! Exact transition matrices over an enumerated configuration space and
//! stationary-distribution computation.
//!
//! Everything here is generic over [`Scalar`], so the same code runs in `f64`
//! and in exact big-rational arithmetic. Rational mode reproduces the
//! known closed-form eigenvectors with no rounding
//! (symbolically-by-substitution at rational parameter values).
//!
//! Ergodicity is checked, not assumed: `stationary` rejects endpoint
//! parameters and requires exactly one recurrent communicating class.
//! Aperiodicity then comes for free, since with interior probabilities every
//! state either has a lazy self-loop (some mover may stay put) or is a
//! frozen singleton class.

use std::collections::HashMap;
use std::sync::Arc;

use petgraph::graph::DiGraph;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{apply_moves, movable_particles, Model};
use crate::ring::{ConfigSpace, RingConfig, StateId};
use crate::scalar::{HopProbs, Scalar};

/// Hard cap on movable particles per configuration: successor laws are built
/// by enumerating all `2^v` hop subsets.
pub const MAX_MOVERS: usize = 62;

/// Dense linear solve up to this many states, power iteration beyond.
pub const DENSE_LIMIT: usize = 4096;

/// Residual target for power iteration.
pub const POWER_TOL: f64 = 1e-13;

/// Row-stochastic transition matrix over a configuration space.
#[derive(Debug, Clone)]
pub struct TransitionMatrix<S: Scalar> {
    space: Arc<ConfigSpace>,
    model: Model,
    probs: HopProbs<S>,
    /// Per state, sparse `(successor id, probability)` sorted by id.
    rows: Vec<Vec<(StateId, S)>>,
}

/// Stationary distribution `pi` with `pi P = pi`.
#[derive(Debug, Clone)]
pub struct StationaryDist<S: Scalar> {
    pub probabilities: Vec<S>,
    /// `max_i |(pi P - pi)_i|`, evaluated in `f64`; exactly zero in
    /// rational mode.
    pub residual: f64,
}

/// Quotient of a transition matrix by cyclic rotation; rows and columns are
/// indexed by the rotation classes of the underlying space.
#[derive(Debug, Clone)]
pub struct LumpedChain<S: Scalar> {
    space: Arc<ConfigSpace>,
    rows: Vec<Vec<(usize, S)>>,
}

/// Full successor law of one configuration: each subset of the movable
/// particles hops with the product of its coin probabilities. Distinct
/// subsets always yield distinct successors (hop origins cannot be refilled
/// within a step), so the returned probabilities are the atom masses.
pub fn successor_distribution<S: Scalar>(
    x: &RingConfig,
    model: Model,
    probs: &HopProbs<S>,
) -> Result<Vec<(RingConfig, S)>> {
    let movers = movable_particles(x, model)?;
    let v = movers.len();
    if v > MAX_MOVERS {
        return Err(Error::TooManyMovers { movers: v });
    }
    let stay: Vec<S> = movers
        .iter()
        .map(|m| S::one() - probs.prob(m.beta_coin).clone())
        .collect();
    let hop: Vec<S> = movers
        .iter()
        .map(|m| probs.prob(m.beta_coin).clone())
        .collect();

    let mut out: HashMap<RingConfig, S> = HashMap::with_capacity(1 << v);
    let mut chosen = Vec::with_capacity(v);
    for mask in 0u64..(1u64 << v) {
        chosen.clear();
        let mut p = S::one();
        for i in 0..v {
            if mask >> i & 1 == 1 {
                chosen.push(movers[i]);
                p = p * hop[i].clone();
            } else {
                p = p * stay[i].clone();
            }
        }
        let y = apply_moves(x, &chosen);
        let prev = out.insert(y, p);
        debug_assert!(prev.is_none(), "two hop subsets produced one successor");
    }
    let mut out: Vec<(RingConfig, S)> = out.into_iter().collect();
    out.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

/// Builds the transition matrix of `space`; errors if any successor escapes
/// the space.
pub fn build_matrix<S: Scalar>(
    space: Arc<ConfigSpace>,
    model: Model,
    probs: HopProbs<S>,
) -> Result<TransitionMatrix<S>> {
    if space.alphabet() != model.alphabet() {
        return Err(Error::AlphabetMismatch {
            expected: model.alphabet().name(),
        });
    }
    let rows: Vec<Vec<(StateId, S)>> = space
        .configs()
        .par_iter()
        .map(|x| {
            let dist = successor_distribution(x, model, &probs)?;
            dist.into_iter()
                .map(|(y, p)| {
                    let id = space.id_of(&y).ok_or_else(|| Error::Closure {
                        config: y.to_string(),
                    })?;
                    Ok((id, p))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TransitionMatrix {
        space,
        model,
        probs,
        rows,
    })
}

impl<S: Scalar> TransitionMatrix<S> {
    pub fn space(&self) -> &Arc<ConfigSpace> {
        &self.space
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn probs(&self) -> &HopProbs<S> {
        &self.probs
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<(StateId, S)>] {
        &self.rows
    }

    pub fn row(&self, id: StateId) -> &[(StateId, S)] {
        &self.rows[id]
    }

    /// Checks that every row sums to one (exactly in rational mode, within
    /// `tol` in float mode).
    pub fn validate_stochastic(&self, tol: f64) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            let sum = row
                .iter()
                .fold(S::zero(), |acc, (_, p)| acc + p.clone());
            if !sum.close_to(&S::one(), tol) {
                return Err(Error::Parameter(format!(
                    "row {i} sums to {} instead of 1",
                    sum.to_f64()
                )));
            }
        }
        Ok(())
    }
}

/// Stationary distribution of the full chain.
pub fn stationary<S: Scalar>(mat: &TransitionMatrix<S>) -> Result<StationaryDist<S>> {
    mat.probs.require_interior(mat.model.uses_beta())?;
    stationary_of_rows(&mat.rows)
}

/// Lumps the chain by cyclic rotation, verifying lumpability: within each
/// class, every member must send identical mass to every target class
/// (exactly in rational mode, within 1e-12 in float mode).
pub fn lump_by_rotation<S: Scalar>(mat: &TransitionMatrix<S>) -> Result<LumpedChain<S>> {
    let space = &mat.space;
    let n_classes = space.classes().len();
    let mut rows: Vec<Vec<(usize, S)>> = Vec::with_capacity(n_classes);
    for (k, class) in space.classes().iter().enumerate() {
        let mut reference: Option<Vec<S>> = None;
        for &member in &class.members {
            let mut mass = vec![S::zero(); n_classes];
            for (target, p) in &mat.rows[member] {
                let c = space.class_of(*target);
                mass[c] = mass[c].clone() + p.clone();
            }
            match &reference {
                None => reference = Some(mass),
                Some(reference) => {
                    for (target, (a, b)) in reference.iter().zip(mass.iter()).enumerate() {
                        if !a.close_to(b, 1e-12) {
                            return Err(Error::Lumpability {
                                class: k,
                                target,
                                deviation: (a.to_f64() - b.to_f64()).abs(),
                            });
                        }
                    }
                }
            }
        }
        let reference = reference.expect("classes are nonempty");
        rows.push(
            reference
                .into_iter()
                .enumerate()
                .filter(|(_, p)| !p.is_zero())
                .collect(),
        );
    }
    Ok(LumpedChain {
        space: Arc::clone(space),
        rows,
    })
}

impl<S: Scalar> LumpedChain<S> {
    pub fn space(&self) -> &Arc<ConfigSpace> {
        &self.space
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<(usize, S)>] {
        &self.rows
    }
}

/// Stationary vector of the lumped chain: one mass per rotation class.
pub fn stationary_class_vector<S: Scalar>(lumped: &LumpedChain<S>) -> Result<StationaryDist<S>> {
    stationary_of_rows(&lumped.rows)
}

// ---------------------------------------------------------------------------
// solver core, shared by the full and the lumped chain
// ---------------------------------------------------------------------------

fn stationary_of_rows<S: Scalar>(rows: &[Vec<(usize, S)>]) -> Result<StationaryDist<S>> {
    check_ergodic(rows)?;
    let n = rows.len();
    let mut pi = if S::EXACT || n <= DENSE_LIMIT {
        solve_dense(rows)?
    } else {
        solve_power(rows, POWER_TOL)?
    };
    normalize_in_place(&mut pi)?;
    let residual = residual_of(rows, &pi);
    Ok(StationaryDist {
        probabilities: pi,
        residual,
    })
}

/// Exactly one recurrent strongly connected component, else an ergodicity
/// error naming the counts.
fn check_ergodic<S: Scalar>(rows: &[Vec<(usize, S)>]) -> Result<()> {
    let mut graph = DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..rows.len()).map(|_| graph.add_node(())).collect();
    for (r, row) in rows.iter().enumerate() {
        for (t, p) in row {
            if !p.is_zero() && *t != r {
                graph.add_edge(nodes[r], nodes[*t], ());
            }
        }
    }
    let sccs = petgraph::algo::tarjan_scc(&graph);
    let mut scc_of = vec![0usize; rows.len()];
    for (k, scc) in sccs.iter().enumerate() {
        for node in scc {
            scc_of[node.index()] = k;
        }
    }
    let mut has_exit = vec![false; sccs.len()];
    for (r, row) in rows.iter().enumerate() {
        for (t, p) in row {
            if !p.is_zero() && scc_of[r] != scc_of[*t] {
                has_exit[scc_of[r]] = true;
            }
        }
    }
    let recurrent = has_exit.iter().filter(|e| !**e).count();
    if recurrent != 1 {
        return Err(Error::Ergodicity {
            recurrent,
            scc_count: sccs.len(),
        });
    }
    Ok(())
}

/// Dense solve of `pi P = pi` with one equation replaced by normalization.
/// Float mode polishes the solution with two rounds of iterative
/// refinement (residuals from the sparse rows), which keeps the relative
/// error of small stationary masses near machine precision.
fn solve_dense<S: Scalar>(rows: &[Vec<(usize, S)>]) -> Result<Vec<S>> {
    let n = rows.len();
    // a = P^T - I, then last equation -> sum(pi) = 1
    let mut a = vec![vec![S::zero(); n]; n];
    for (r, row) in rows.iter().enumerate() {
        for (t, p) in row {
            a[*t][r] = a[*t][r].clone() + p.clone();
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = row[i].clone() - S::one();
    }
    for v in a[n - 1].iter_mut() {
        *v = S::one();
    }
    let mut b = vec![S::zero(); n];
    b[n - 1] = S::one();

    let perm = lu_factor(&mut a)?;
    let mut x = lu_solve(&a, &perm, b);
    if !S::EXACT {
        for _ in 0..2 {
            let r = replaced_system_residual(rows, &x);
            let d = lu_solve(&a, &perm, r);
            for (xi, di) in x.iter_mut().zip(d) {
                *xi = xi.clone() + di;
            }
        }
    }
    Ok(x)
}

/// In-place LU with partial pivoting; returns the row permutation.
fn lu_factor<S: Scalar>(a: &mut [Vec<S>]) -> Result<Vec<usize>> {
    let n = a.len();
    let mut perm = Vec::with_capacity(n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r1, &r2| {
                a[r1][col]
                    .pivot_score()
                    .total_cmp(&a[r2][col].pivot_score())
            })
            .expect("nonempty range");
        if a[pivot][col].pivot_score() == 0.0 {
            return Err(Error::SingularSystem);
        }
        a.swap(col, pivot);
        perm.push(pivot);
        let pivot_row = a[col].clone();
        for row in a.iter_mut().skip(col + 1) {
            if row[col].is_zero() {
                continue;
            }
            let f = row[col].clone() / pivot_row[col].clone();
            for c in col + 1..n {
                row[c] = row[c].clone() - f.clone() * pivot_row[c].clone();
            }
            row[col] = f; // store the multiplier
        }
    }
    Ok(perm)
}

fn lu_solve<S: Scalar>(lu: &[Vec<S>], perm: &[usize], mut b: Vec<S>) -> Vec<S> {
    let n = lu.len();
    // stored multipliers live in their final (post-swap) rows, so the whole
    // permutation is applied before the triangular solves
    for (col, &p) in perm.iter().enumerate() {
        b.swap(col, p);
    }
    for col in 0..n {
        let head = b[col].clone();
        if head.is_zero() {
            continue;
        }
        for r in col + 1..n {
            if !lu[r][col].is_zero() {
                b[r] = b[r].clone() - lu[r][col].clone() * head.clone();
            }
        }
    }
    for i in (0..n).rev() {
        let mut acc = b[i].clone();
        for j in i + 1..n {
            acc = acc - lu[i][j].clone() * b[j].clone();
        }
        b[i] = acc / lu[i][i].clone();
    }
    b
}

/// Residual of the normalized system: `0 - ((P^T - I) x)_i` for the first
/// `n-1` equations and `1 - sum(x)` for the last, computed from the sparse
/// rows rather than the factored matrix.
fn replaced_system_residual<S: Scalar>(rows: &[Vec<(usize, S)>], x: &[S]) -> Vec<S> {
    let n = rows.len();
    let mut r = multiply(rows, x);
    for (i, ri) in r.iter_mut().enumerate() {
        *ri = x[i].clone() - ri.clone();
    }
    r[n - 1] = S::one() - x.iter().fold(S::zero(), |acc, v| acc + v.clone());
    r
}

/// Power iteration to `tol`, with a Cesaro-averaging fallback if the residual
/// stalls (not expected: interior parameters make the chain lazy).
fn solve_power<S: Scalar>(rows: &[Vec<(usize, S)>], tol: f64) -> Result<Vec<S>> {
    let n = rows.len();
    let uniform = S::one() / S::from_u64(n as u64);
    let mut pi = vec![uniform; n];
    let mut best = f64::INFINITY;
    let mut since_best = 0usize;
    for _ in 0..200_000 {
        let next = multiply(rows, &pi);
        let residual = max_abs_diff(&next, &pi);
        pi = next;
        if residual <= tol {
            return Ok(pi);
        }
        if residual < best * 0.999 {
            best = residual;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > 1_000 {
                return cesaro(rows, pi, tol);
            }
        }
    }
    Err(Error::NoConvergence { residual: best })
}

fn cesaro<S: Scalar>(rows: &[Vec<(usize, S)>], mut pi: Vec<S>, tol: f64) -> Result<Vec<S>> {
    let n = pi.len();
    let window = 2_000u64;
    let mut acc = vec![S::zero(); n];
    for _ in 0..window {
        for (a, p) in acc.iter_mut().zip(pi.iter()) {
            *a = a.clone() + p.clone();
        }
        pi = multiply(rows, &pi);
    }
    let w = S::from_u64(window);
    let avg: Vec<S> = acc.into_iter().map(|a| a / w.clone()).collect();
    let residual = max_abs_diff(&multiply(rows, &avg), &avg);
    if residual <= tol {
        Ok(avg)
    } else {
        Err(Error::NoConvergence { residual })
    }
}

fn multiply<S: Scalar>(rows: &[Vec<(usize, S)>], pi: &[S]) -> Vec<S> {
    let mut next = vec![S::zero(); pi.len()];
    for (r, row) in rows.iter().enumerate() {
        for (t, p) in row {
            next[*t] = next[*t].clone() + pi[r].clone() * p.clone();
        }
    }
    next
}

fn max_abs_diff<S: Scalar>(a: &[S], b: &[S]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x.to_f64() - y.to_f64()).abs())
        .fold(0.0, f64::max)
}

fn residual_of<S: Scalar>(rows: &[Vec<(usize, S)>], pi: &[S]) -> f64 {
    max_abs_diff(&multiply(rows, pi), pi)
}

fn normalize_in_place<S: Scalar>(pi: &mut [S]) -> Result<()> {
    if !S::EXACT {
        for p in pi.iter_mut() {
            let f = p.to_f64();
            if f < -1e-10 {
                return Err(Error::SingularSystem);
            }
            if f < 0.0 {
                *p = S::zero();
            }
        }
    }
    let sum = pi.iter().fold(S::zero(), |acc, p| acc + p.clone());
    if sum.is_zero() {
        return Err(Error::SingularSystem);
    }
    for p in pi.iter_mut() {
        *p = p.clone() / sum.clone();
    }
    Ok(())
}
