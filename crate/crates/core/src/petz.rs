//! Petz recovery map and a quasi-sampling estimator of its expectation values.
//!
//! `P(w) = s^{1/2} N^dag(N(s)^{-1/2} w N(s)^{-1/2}) s^{1/2}`. The adjoint is
//! realized as the transpose (postselected teleportation) of the conjugate
//! (virtual comb), so every attempt runs three postselected stages:
//!
//! 1. the block encoding of `N(s)^{-1/2}/c1` on the input;
//! 2. teleportation through `W^x ∘ N^T ∘ W^y` for a sampled branch;
//! 3. the block encoding of `s^{1/2}/c2`.
//!
//! An attempt that passes all three is measured in the observable's
//! eigenbasis and contributes `s_i gamma d_A d_B c1^2 c2^2 A(s)`; any other
//! attempt contributes zero. The mean over attempts is unbiased.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::channels::{
    dual_maps, werner_holevo_apply, ChoiMap, DensityOperator, Observable, QuantumChannel, WhSign,
};
use crate::conjugate::{clipped_spectrum, quasiprob_weights};
use crate::error::{Error, Result};
use crate::linalg::{psd_power, ComplexMatrix, PsdExponent};
use crate::sampling::{bernstein_rounds, chernoff_attempts, hoeffding_rounds, run_rounds, sample_index, Moments, Tally};

/// Default eigenvalue threshold defining the support of `N(sigma)`.
pub const SUPPORT_TOL: f64 = 1e-10;

/// Below this `tr K` the estimator cannot accept anything.
const MIN_OVERLAP: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct PetzInstance {
    pub channel: QuantumChannel,
    pub sigma: DensityOperator,
    pub omega: DensityOperator,
    pub observable: Observable,
    pub support_tol: f64,
}

impl PetzInstance {
    pub fn new(
        channel: QuantumChannel,
        sigma: DensityOperator,
        omega: DensityOperator,
        observable: Observable,
    ) -> Result<Self> {
        if channel.d_in() < 2 || channel.d_out() < 2 {
            return Err(Error::InvalidArgument(format!(
                "Petz estimation needs d_A, d_B >= 2, got {} -> {}",
                channel.d_in(),
                channel.d_out()
            )));
        }
        if sigma.dim() != channel.d_in() || observable.dim() != channel.d_in() || omega.dim() != channel.d_out() {
            return Err(Error::DimensionMismatch(format!(
                "sigma {} / observable {} on A and omega {} on B for a {} -> {} channel",
                sigma.dim(),
                observable.dim(),
                omega.dim(),
                channel.d_in(),
                channel.d_out()
            )));
        }
        Ok(Self {
            channel,
            sigma,
            omega,
            observable,
            support_tol: SUPPORT_TOL,
        })
    }

    pub fn with_support_tol(mut self, tol: f64) -> Self {
        self.support_tol = tol;
        self
    }
}

/// The recovery map `B -> A` together with its support diagnostics.
#[derive(Clone, Debug)]
pub struct PetzMap {
    pub map: ChoiMap,
    /// `N(sigma)` has eigenvalues at or below the support tolerance.
    pub support_restricted: bool,
    pub support_rank: usize,
}

/// Builds the Petz map as `sqrt(s) · N^dag(M (·) M) · sqrt(s)` with
/// `M = N(s)^{-1/2}`, using the pseudo-inverse when `N(s)` is singular.
pub fn exact_petz(n: &QuantumChannel, sigma: &DensityOperator, tol: f64) -> Result<PetzMap> {
    if sigma.dim() != n.d_in() {
        return Err(Error::DimensionMismatch(format!(
            "prior of dimension {} for input dimension {}",
            sigma.dim(),
            n.d_in()
        )));
    }
    let n_sigma = n.apply_operator(sigma.matrix())?.hermitian_part();
    let values = n_sigma.eigvalsh(f64::INFINITY)?;
    let support_rank = values.iter().filter(|&&v| v > tol).count();
    let inv_sqrt = psd_power(&n_sigma, PsdExponent::InvSqrt, tol)?;
    let sqrt_sigma = psd_power(sigma.matrix(), PsdExponent::Sqrt, tol)?;
    let (da, db) = (n.d_in(), n.d_out());
    let pre = ChoiMap::from_action(db, db, |x| &(&inv_sqrt * x) * &inv_sqrt);
    let post = ChoiMap::from_action(da, da, |x| &(&sqrt_sigma * x) * &sqrt_sigma);
    let map = pre.then(&dual_maps(n).adjoint)?.then(&post)?;
    Ok(PetzMap {
        map,
        support_restricted: support_rank < db,
        support_rank,
    })
}

/// Exact `tr[O P(w)]`.
pub fn petz_expectation_oracle(inst: &PetzInstance) -> Result<f64> {
    let p = exact_petz(&inst.channel, &inst.sigma, inst.support_tol)?;
    let out = p.map.apply(inst.omega.matrix())?;
    Ok(inst.observable.expectation(&out))
}

/// Spectral data of `N(I/d_A)` and the per-branch teleportation acceptance
/// bounds that follow from it.
///
/// Given that the first block encoding succeeded, branch `(x, y)` teleports
/// with probability `(1 + y z)/(d_B (d_B + y))` where
/// `z = tr[N(I/d_A) K]/tr K` lies in `[zeta_min, zeta_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceBound {
    pub eta: f64,
    pub zeta_max: f64,
    pub zeta_min: f64,
    /// Lower and upper bound for branches with `y = +`.
    pub plus_lower: f64,
    pub plus_upper: f64,
    /// Lower and upper bound for branches with `y = -`.
    pub minus_lower: f64,
    pub minus_upper: f64,
}

impl AcceptanceBound {
    pub fn lower(&self, y: WhSign) -> f64 {
        match y {
            WhSign::Plus => self.plus_lower,
            WhSign::Minus => self.minus_lower,
        }
    }

    pub fn upper(&self, y: WhSign) -> f64 {
        match y {
            WhSign::Plus => self.plus_upper,
            WhSign::Minus => self.minus_upper,
        }
    }
}

pub fn acceptance_bound(n: &QuantumChannel) -> Result<AcceptanceBound> {
    let (da, db) = (n.d_in(), n.d_out() as f64);
    let mixed = ComplexMatrix::identity(da).scale_real(1.0 / da as f64);
    let values = n.apply_operator(&mixed)?.hermitian_part().eigvalsh(f64::INFINITY)?;
    let zeta_min = values[0].max(0.0);
    let zeta_max = values[values.len() - 1];
    let plus_lower = 1.0 / (db * (db + 1.0));
    let plus_upper = (1.0 + zeta_max) / (db * (db + 1.0));
    let minus_lower = ((1.0 - zeta_max) / (db * (db - 1.0))).max(0.0);
    let minus_upper = (1.0 - zeta_min) / (db * (db - 1.0));
    Ok(AcceptanceBound {
        eta: plus_lower.min(minus_lower),
        zeta_max,
        zeta_min,
        plus_lower,
        plus_upper,
        minus_lower,
        minus_upper,
    })
}

/// Attempt count for a target accuracy and how it was reached.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttemptBudget {
    /// Bernstein count for the unconditional estimator, at `delta/2`.
    pub bernstein: u64,
    /// Accepted-sample target: Hoeffding rounds for range `gamma` at `delta/2`.
    pub accepted_target: u64,
    /// Chernoff attempts to collect `accepted_target` at rate `eta`, at `delta/2`.
    pub chernoff: u64,
    /// `max(bernstein, chernoff)`.
    pub attempts: u64,
    /// `|X|` bound `gamma d_A d_B c1^2 c2^2`.
    pub range: f64,
    /// Upper bound on the second moment of `X`.
    pub second_moment: f64,
}

/// Per-branch precomputation shared by all attempts.
#[derive(Clone, Debug)]
struct BranchPlan {
    sign: f64,
    y: WhSign,
    /// Conditional teleportation success given stage 1.
    teleport: f64,
    /// Conditional stage-3 success given stages 1 and 2.
    recover: f64,
    /// Overall acceptance `q_i`.
    accept: f64,
    weights: Vec<f64>,
    weight_total: f64,
}

#[derive(Clone, Debug)]
struct PetzPlan {
    scale: f64,
    probabilities: [f64; 3],
    stage_one: f64,
    branches: Vec<BranchPlan>,
    values: Vec<f64>,
    support_restricted: bool,
    c1_sq: f64,
    c2_sq: f64,
}

/// `1/lambda_min` on the support of `N(sigma)` and `||sigma||_inf`.
fn normalizations(inst: &PetzInstance) -> Result<(ComplexMatrix, f64, bool, f64)> {
    let n_sigma = inst.channel.apply_operator(inst.sigma.matrix())?.hermitian_part();
    let values = n_sigma.eigvalsh(f64::INFINITY)?;
    let support: Vec<f64> = values.iter().copied().filter(|&v| v > inst.support_tol).collect();
    let lam_min = support.first().copied().ok_or_else(|| {
        Error::ZeroAcceptance("N(sigma) has no eigenvalue above the support tolerance".into())
    })?;
    let c2_sq = inst.sigma.matrix().max_eigenvalue(f64::INFINITY)?;
    Ok((n_sigma, 1.0 / lam_min, support.len() < values.len(), c2_sq))
}

fn plan(inst: &PetzInstance) -> Result<PetzPlan> {
    inst.observable.check_unit_range()?;
    let (da, db) = (inst.channel.d_in(), inst.channel.d_out());
    let (n_sigma, c1_sq, support_restricted, c2_sq) = normalizations(inst)?;
    let inv_sqrt = psd_power(&n_sigma, PsdExponent::InvSqrt, inst.support_tol)?;
    let sqrt_sigma = psd_power(inst.sigma.matrix(), PsdExponent::Sqrt, inst.support_tol)?;
    let k = &(&inv_sqrt * inst.omega.matrix()) * &inv_sqrt;
    let tr_k = k.trace().re;
    if tr_k <= MIN_OVERLAP {
        return Err(Error::ZeroAcceptance(format!(
            "omega has overlap tr K = {tr_k:.3e} with the support of N(sigma)"
        )));
    }
    let stage_one = (tr_k / c1_sq).min(1.0);
    let transpose = dual_maps(&inst.channel).transpose;
    let sampler = quasiprob_weights(da, db);
    let tele_norm = (da * db) as f64;
    let mut branches = Vec::with_capacity(3);
    for b in &sampler.branches {
        let m = werner_holevo_apply(&transpose.apply(&werner_holevo_apply(&k, b.post))?, b.pre);
        let teleport = m.trace().re / (tele_norm * tr_k);
        let t = (&(&sqrt_sigma * &m) * &sqrt_sigma).scale_real(1.0 / (c1_sq * c2_sq * tele_norm));
        let accept = t.trace().re.max(0.0);
        let through = stage_one * teleport;
        let recover = if through > 0.0 { (accept / through).clamp(0.0, 1.0) } else { 0.0 };
        let weights = inst.observable.born_weights(&t);
        let weight_total = weights.iter().sum();
        branches.push(BranchPlan {
            sign: b.sign,
            y: b.post,
            teleport: teleport.clamp(0.0, 1.0),
            recover,
            accept,
            weights,
            weight_total,
        });
    }
    Ok(PetzPlan {
        scale: sampler.gamma * tele_norm * c1_sq * c2_sq,
        probabilities: sampler.probabilities(),
        stage_one,
        branches,
        values: clipped_spectrum(&inst.observable),
        support_restricted,
        c1_sq,
        c2_sq,
    })
}

/// Budget `max(Bernstein, Chernoff)` for `|estimate - oracle| <= eps` with
/// probability at least `1 - delta`.
pub fn attempt_budget(inst: &PetzInstance, epsilon: f64, delta: f64) -> Result<AttemptBudget> {
    if !(epsilon > 0.0 && epsilon < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon = {epsilon}, delta = {delta}; both must lie in (0, 1)"
        )));
    }
    let (da, db) = (inst.channel.d_in(), inst.channel.d_out());
    let (_, c1_sq, _, c2_sq) = normalizations(inst)?;
    let sampler = quasiprob_weights(da, db);
    let bound = acceptance_bound(&inst.channel)?;
    let range = sampler.gamma * (da * db) as f64 * c1_sq * c2_sq;
    let second_moment = range
        * range
        * sampler
            .branches
            .iter()
            .map(|b| b.probability * bound.upper(b.post).min(1.0))
            .sum::<f64>();
    let bernstein = bernstein_rounds(epsilon, delta / 2.0, range, second_moment)?;
    let accepted_target = hoeffding_rounds(epsilon, delta / 2.0, sampler.gamma)?;
    let chernoff = chernoff_attempts(accepted_target, delta / 2.0, bound.eta)?;
    Ok(AttemptBudget {
        bernstein,
        accepted_target,
        chernoff,
        attempts: bernstein.max(chernoff),
        range,
        second_moment,
    })
}

/// Counts for one branch of the quasi-probability decomposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchStats {
    pub x: WhSign,
    pub y: WhSign,
    pub probability: f64,
    pub sampled: u64,
    /// Passed the `N(sigma)^{-1/2}` block encoding.
    pub stage_one_passed: u64,
    /// Passed the teleportation projection as well.
    pub teleport_passed: u64,
    /// Passed all three stages.
    pub accepted: u64,
    /// Exact conditional teleportation probability for this instance.
    pub teleport_probability: f64,
    /// Instance-independent lower bound on it.
    pub teleport_lower_bound: f64,
    /// Exact overall acceptance `q_i`.
    pub acceptance_probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PetzEstimationReport {
    pub estimate: f64,
    pub std_error: f64,
    pub attempts: u64,
    pub accepted: u64,
    pub empirical_acceptance: f64,
    pub eta_bound: f64,
    pub seed: u64,
    pub oracle_value: f64,
    /// `|X|` on acceptance.
    pub scale: f64,
    pub c1_squared: f64,
    pub c2_squared: f64,
    pub support_restricted: bool,
    pub budget: Option<AttemptBudget>,
    pub branches: Vec<BranchStats>,
    pub elapsed_seconds: f64,
}

#[derive(Default)]
struct PetzTally {
    moments: Moments,
    sampled: [u64; 3],
    stage_one: [u64; 3],
    teleport: [u64; 3],
    accepted: [u64; 3],
}

impl Tally for PetzTally {
    fn merge(&mut self, other: Self) {
        self.moments.merge(other.moments);
        for i in 0..3 {
            self.sampled[i] += other.sampled[i];
            self.stage_one[i] += other.stage_one[i];
            self.teleport[i] += other.teleport[i];
            self.accepted[i] += other.accepted[i];
        }
    }
}

/// Runs a fixed number of attempts.
pub fn run_petz_attempts(inst: &PetzInstance, attempts: u64, seed: u64, workers: usize) -> Result<PetzEstimationReport> {
    let start = Instant::now();
    if attempts == 0 {
        return Err(Error::NoData);
    }
    let plan = plan(inst)?;
    let bound = acceptance_bound(&inst.channel)?;
    let tally: PetzTally = run_rounds(attempts, seed, workers, |rng, t: &mut PetzTally| {
        use rand::Rng;
        let i = sample_index(rng, &plan.probabilities, 1.0);
        let b = &plan.branches[i];
        t.sampled[i] += 1;
        let u: [f64; 3] = [rng.random(), rng.random(), rng.random()];
        if u[0] >= plan.stage_one {
            t.moments.push(0.0);
            return;
        }
        t.stage_one[i] += 1;
        if u[1] >= b.teleport {
            t.moments.push(0.0);
            return;
        }
        t.teleport[i] += 1;
        if u[2] >= b.recover {
            t.moments.push(0.0);
            return;
        }
        t.accepted[i] += 1;
        let s = sample_index(rng, &b.weights, b.weight_total);
        t.moments.push(b.sign * plan.scale * plan.values[s]);
    });
    let sampler = quasiprob_weights(inst.channel.d_in(), inst.channel.d_out());
    let branches = sampler
        .branches
        .iter()
        .zip(&plan.branches)
        .enumerate()
        .map(|(i, (sb, pb))| BranchStats {
            x: sb.pre,
            y: sb.post,
            probability: sb.probability,
            sampled: tally.sampled[i],
            stage_one_passed: tally.stage_one[i],
            teleport_passed: tally.teleport[i],
            accepted: tally.accepted[i],
            teleport_probability: pb.teleport,
            teleport_lower_bound: bound.lower(pb.y),
            acceptance_probability: pb.accept,
        })
        .collect();
    let accepted: u64 = tally.accepted.iter().sum();
    Ok(PetzEstimationReport {
        estimate: tally.moments.mean(),
        std_error: tally.moments.std_error(),
        attempts,
        accepted,
        empirical_acceptance: accepted as f64 / attempts as f64,
        eta_bound: bound.eta,
        seed,
        oracle_value: petz_expectation_oracle(inst)?,
        scale: plan.scale,
        c1_squared: plan.c1_sq,
        c2_squared: plan.c2_sq,
        support_restricted: plan.support_restricted,
        budget: None,
        branches,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Estimates `tr[O P(w)]` to accuracy `epsilon` with confidence `1 - delta`.
pub fn estimate_petz(inst: &PetzInstance, epsilon: f64, delta: f64, seed: u64) -> Result<PetzEstimationReport> {
    estimate_petz_with_workers(inst, epsilon, delta, seed, 1)
}

pub fn estimate_petz_with_workers(
    inst: &PetzInstance,
    epsilon: f64,
    delta: f64,
    seed: u64,
    workers: usize,
) -> Result<PetzEstimationReport> {
    let start = Instant::now();
    let budget = attempt_budget(inst, epsilon, delta)?;
    let mut report = run_petz_attempts(inst, budget.attempts, seed, workers)?;
    report.budget = Some(budget);
    report.elapsed_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Exact mean of the per-attempt estimator, `sum_i p_i s_i R tr[O T_i]`.
/// Equals the oracle up to the clipping of the observable's spectrum.
pub fn estimator_mean(inst: &PetzInstance) -> Result<f64> {
    let plan = plan(inst)?;
    Ok(plan
        .branches
        .iter()
        .zip(plan.probabilities)
        .map(|(b, p)| {
            let v: f64 = b.weights.iter().zip(&plan.values).map(|(w, a)| w * a).sum();
            p * b.sign * plan.scale * v
        })
        .sum())
}
