//! Virtual comb for the complex conjugate of an unknown channel.
//!
//! The comb is the affine combination
//!
//! ```text
//! C = (d_B+1)/2 W+ (x) W+  +  (d_A-1)(d_B-1)/2 W- (x) W-  -  d_A(d_B-1)/2 W+ (x) W-
//! ```
//!
//! of Werner-Holevo pre-processing (on `A'A`) and post-processing (on `BB'`)
//! channels. Its l1 weight `gamma = d_A d_B - d_A + 1` is the sampling
//! overhead of the Monte Carlo estimator.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::channels::{
    dual_maps, werner_holevo_apply, werner_holevo_choi, DensityOperator, Observable, QuantumChannel, WhSign,
};
use crate::error::{Error, Result};
use crate::linalg::{partial_trace, swap_operator, ComplexMatrix, SystemDims, ZERO};
use crate::sampling::{run_rounds, sample_index, Moments, Tally};

/// One term of the quasi-probability decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub probability: f64,
    /// `+1` or `-1`.
    pub sign: f64,
    pub pre: WhSign,
    pub post: WhSign,
}

/// Sampling weights of the virtual comb.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiSampler {
    pub d_a: usize,
    pub d_b: usize,
    pub gamma: f64,
    pub branches: [Branch; 3],
}

impl QuasiSampler {
    pub fn probabilities(&self) -> [f64; 3] {
        self.branches.map(|b| b.probability)
    }

    /// Signed coefficient `s_i gamma p_i` of each branch.
    pub fn weights(&self) -> [f64; 3] {
        self.branches.map(|b| b.sign * self.gamma * b.probability)
    }
}

/// `gamma = d_A d_B - d_A + 1` and the branch probabilities
/// `((d_B+1), (d_A-1)(d_B-1), d_A(d_B-1)) / (2 gamma)` for
/// `(x, y) = (+,+), (-,-), (+,-)`.
pub fn quasiprob_weights(d_a: usize, d_b: usize) -> QuasiSampler {
    let (a, b) = (d_a as f64, d_b as f64);
    let gamma = a * b - a + 1.0;
    let branch = |num: f64, sign: f64, pre, post| Branch {
        probability: num / (2.0 * gamma),
        sign,
        pre,
        post,
    };
    QuasiSampler {
        d_a,
        d_b,
        gamma,
        branches: [
            branch(b + 1.0, 1.0, WhSign::Plus, WhSign::Plus),
            branch((a - 1.0) * (b - 1.0), 1.0, WhSign::Minus, WhSign::Minus),
            branch(a * (b - 1.0), -1.0, WhSign::Plus, WhSign::Minus),
        ],
    }
}

/// Choi operator of the comb on `A' A B B'` with its three weighted terms.
#[derive(Clone, Debug)]
pub struct VirtualCombChoi {
    pub d_a: usize,
    pub d_b: usize,
    pub choi: ComplexMatrix,
    /// `(signed weight, W^x_{A'A} (x) W^y_{BB'})` per branch.
    pub terms: Vec<(f64, ComplexMatrix)>,
}

impl VirtualCombChoi {
    pub fn dims(&self) -> SystemDims {
        comb_dims(self.d_a, self.d_b)
    }

    /// `max |tr_{AB'} C - I_{A'B}|`.
    pub fn normalization_violation(&self) -> f64 {
        let m = partial_trace(&self.choi, &self.dims(), &[0, 2]).expect("comb dims");
        m.max_abs_diff(&ComplexMatrix::identity(self.d_a * self.d_b))
    }

    /// `max |tr_{B'} C - tr_{BB'} C (x) I_B / d_B|`.
    pub fn causality_violation(&self) -> f64 {
        causality_violation(&self.choi, self.d_a, self.d_b)
    }

    /// Sum of `|w_i|` over the decomposition.
    pub fn l1_weight(&self) -> f64 {
        self.terms.iter().map(|(w, _)| w.abs()).sum()
    }
}

pub(crate) fn comb_dims(d_a: usize, d_b: usize) -> SystemDims {
    SystemDims::new([d_a, d_a, d_b, d_b]).expect("positive dims")
}

pub(crate) fn causality_violation(choi: &ComplexMatrix, d_a: usize, d_b: usize) -> f64 {
    let dims = comb_dims(d_a, d_b);
    let lhs = partial_trace(choi, &dims, &[0, 1, 2]).expect("comb dims");
    let rhs = partial_trace(choi, &dims, &[0, 1])
        .expect("comb dims")
        .kron(&ComplexMatrix::identity(d_b).scale_real(1.0 / d_b as f64));
    lhs.max_abs_diff(&rhs)
}

/// Weighted sum of `W^x_{d_A} (x) W^y_{d_B}` Choi operators.
pub fn virtual_comb_choi(d_a: usize, d_b: usize) -> VirtualCombChoi {
    let sampler = quasiprob_weights(d_a, d_b);
    let n = d_a * d_a * d_b * d_b;
    let mut choi = ComplexMatrix::zeros(n, n);
    let mut terms = Vec::with_capacity(3);
    for (branch, w) in sampler.branches.iter().zip(sampler.weights()) {
        let term = werner_holevo_choi(d_a, branch.pre).kron(&werner_holevo_choi(d_b, branch.post));
        choi += &term.scale_real(w);
        terms.push((w, term));
    }
    VirtualCombChoi {
        d_a,
        d_b,
        choi,
        terms,
    }
}

/// `F_{A'A} (x) F_{BB'} + I/(d_A+1) - d_A (F_{A'A} (x) I_{BB'})/(d_A+1)`.
pub fn virtual_comb_closed_form(d_a: usize, d_b: usize) -> ComplexMatrix {
    let fa = swap_operator(d_a, d_a);
    let fb = swap_operator(d_b, d_b);
    let a = d_a as f64;
    let n = d_a * d_a * d_b * d_b;
    let mut m = fa.kron(&fb);
    m += &ComplexMatrix::identity(n).scale_real(1.0 / (a + 1.0));
    m -= &fa.kron(&ComplexMatrix::identity(d_b * d_b)).scale_real(a / (a + 1.0));
    m
}

/// Link product `tr_{AB}[C_{A'ABB'} (X_{AB}^T (x) I_{A'B'})]` of a one-slot
/// comb Choi operator with an operator on `AB`; the result lives on `A'B'`.
pub fn link_product(comb: &ComplexMatrix, d_a: usize, d_b: usize, x: &ComplexMatrix) -> Result<ComplexMatrix> {
    let side = d_a * d_a * d_b * d_b;
    if comb.rows() != side || !comb.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "comb Choi of side {} for dims ({d_a}, {d_b})",
            comb.rows()
        )));
    }
    if x.rows() != d_a * d_b || !x.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "slot operator of side {} for dims ({d_a}, {d_b})",
            x.rows()
        )));
    }
    let idx = |ap: usize, a: usize, b: usize, bp: usize| ((ap * d_a + a) * d_b + b) * d_b + bp;
    let mut out = ComplexMatrix::zeros(d_a * d_b, d_a * d_b);
    for ap in 0..d_a {
        for bp in 0..d_b {
            for ap2 in 0..d_a {
                for bp2 in 0..d_b {
                    let mut acc = ZERO;
                    for a in 0..d_a {
                        for b in 0..d_b {
                            let r = idx(ap, a, b, bp);
                            for a2 in 0..d_a {
                                for b2 in 0..d_b {
                                    // (X^T)[(a2,b2),(a,b)] = X[(a,b),(a2,b2)]
                                    let xv = x[(a * d_b + b, a2 * d_b + b2)];
                                    acc += comb[(r, idx(ap2, a2, b2, bp2))] * xv;
                                }
                            }
                        }
                    }
                    out[(ap * d_b + bp, ap2 * d_b + bp2)] = acc;
                }
            }
        }
    }
    Ok(out)
}

/// Choi operator of the comb's output map `A' -> B'` when `n` is plugged in.
pub fn apply_comb(comb: &VirtualCombChoi, n: &QuantumChannel) -> Result<ComplexMatrix> {
    if n.d_in() != comb.d_a || n.d_out() != comb.d_b {
        return Err(Error::DimensionMismatch(format!(
            "comb for ({}, {}) given a {} -> {} channel",
            comb.d_a,
            comb.d_b,
            n.d_in(),
            n.d_out()
        )));
    }
    link_product(&comb.choi, comb.d_a, comb.d_b, n.choi())
}

/// Outcome of an estimator run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub estimate: f64,
    pub std_error: f64,
    pub rounds: u64,
    pub accepted: u64,
    pub seed: u64,
    pub oracle_value: f64,
    pub gamma: f64,
    /// Largest `|X|` observed.
    pub max_abs_sample: f64,
    pub elapsed_seconds: f64,
}

#[derive(Default)]
struct ConjTally {
    moments: Moments,
    max_abs: f64,
}

impl Tally for ConjTally {
    fn merge(&mut self, other: Self) {
        self.moments.merge(other.moments);
        self.max_abs = self.max_abs.max(other.max_abs);
    }
}

/// Exact `tr[O N^*(rho)]`.
pub fn conjugate_oracle(n: &QuantumChannel, rho: &DensityOperator, o: &Observable) -> Result<f64> {
    let out = dual_maps(n).conjugate.apply(rho.matrix())?;
    Ok(o.expectation(&out))
}

pub(crate) fn clipped_spectrum(o: &Observable) -> Vec<f64> {
    o.eigenvalues().iter().map(|v| v.clamp(-1.0, 1.0)).collect()
}

/// Quasi-probability Monte Carlo estimate of `tr[O N^*(rho)]`.
pub fn estimate_conjugate(
    n: &QuantumChannel,
    rho: &DensityOperator,
    o: &Observable,
    rounds: u64,
    seed: u64,
) -> Result<EstimationReport> {
    estimate_conjugate_with_workers(n, rho, o, rounds, seed, 1)
}

pub fn estimate_conjugate_with_workers(
    n: &QuantumChannel,
    rho: &DensityOperator,
    o: &Observable,
    rounds: u64,
    seed: u64,
    workers: usize,
) -> Result<EstimationReport> {
    let start = Instant::now();
    if rounds == 0 {
        return Err(Error::NoData);
    }
    if rho.dim() != n.d_in() || o.dim() != n.d_out() {
        return Err(Error::DimensionMismatch(format!(
            "state dim {} / observable dim {} for a {} -> {} channel",
            rho.dim(),
            o.dim(),
            n.d_in(),
            n.d_out()
        )));
    }
    o.check_unit_range()?;
    let sampler = quasiprob_weights(n.d_in(), n.d_out());
    let values = clipped_spectrum(o);
    // Output state of each branch, W^y ∘ N ∘ W^x (rho), in O's eigenbasis.
    let mut outcome_weights = Vec::with_capacity(3);
    for branch in &sampler.branches {
        let pre = werner_holevo_apply(rho.matrix(), branch.pre);
        let mid = n.apply_operator(&pre)?;
        let out = werner_holevo_apply(&mid, branch.post);
        let w = o.born_weights(&out);
        let total: f64 = w.iter().sum();
        outcome_weights.push((w, total));
    }
    let probs = sampler.probabilities();
    let gamma = sampler.gamma;
    let tally: ConjTally = run_rounds(rounds, seed, workers, |rng, t: &mut ConjTally| {
        let i = sample_index(rng, &probs, 1.0);
        let (w, total) = &outcome_weights[i];
        let s = sample_index(rng, w, *total);
        let x = sampler.branches[i].sign * gamma * values[s];
        t.moments.push(x);
        t.max_abs = t.max_abs.max(x.abs());
    });
    Ok(EstimationReport {
        estimate: tally.moments.mean(),
        std_error: tally.moments.std_error(),
        rounds,
        accepted: rounds,
        seed,
        oracle_value: conjugate_oracle(n, rho, o)?,
        gamma,
        max_abs_sample: tally.max_abs,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}
