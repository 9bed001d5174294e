//! Acceptance criteria, one line per criterion.

use std::process::ExitCode;
use std::time::Instant;

use dualchan::certificates::{certify_base_norm, FEASIBILITY_TOL};
use dualchan::channels::{
    dual_maps, random_channel, random_observable, random_state, random_unital_channel, DensityOperator,
    QuantumChannel,
};
use dualchan::conjugate::{apply_comb, estimate_conjugate, virtual_comb_choi};
use dualchan::petz::{
    acceptance_bound, attempt_budget, estimate_petz_with_workers, run_petz_attempts, PetzInstance,
};
use dualchan::sampling::{chernoff_attempts, hoeffding_rounds, run_rounds, Tally};
use dualchan::transpose::simulate_transpose;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (da, db) in [(2, 2), (2, 3), (3, 2), (3, 3)] {
        let comb = virtual_comb_choi(da, db);
        for k in 0..50u64 {
            let rank = 1 + (k as usize % (da * db));
            let rank = rank.max(da.div_ceil(db));
            let n = random_channel(da, db, rank, 10_000 + 97 * k + (da * 10 + db) as u64).unwrap();
            let out = apply_comb(&comb, &n).unwrap();
            worst = worst.max(out.max_abs_diff(&dual_maps(&n).conjugate.choi));
            count += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        count == 200 && worst < 1e-9 && secs < 10.0,
        format!("{count} channels, max deviation {worst:.2e} (< 1e-9), {secs:.2}s (< 10s)"),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut values = Vec::new();
    let mut worst: f64 = 0.0;
    for da in 2..=4 {
        for db in 2..=4 {
            let r = certify_base_norm(da, db, FEASIBILITY_TOL);
            let expected = (da * db - da + 1) as f64;
            pass &= r.pass
                && (r.primal_objective - expected).abs() < 1e-9
                && (r.dual_objective - expected).abs() < 1e-9;
            worst = worst.max(r.violations.max());
            values.push(format!("{}", r.primal_objective.round()));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        pass && secs < 60.0,
        format!(
            "objectives [{}], max violation {worst:.2e}, {secs:.2}s (< 60s)",
            values.join(", ")
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut worst_p: f64 = 0.0;
    let mut worst_state: f64 = 0.0;
    for k in 0..100u64 {
        let n = random_unital_channel(2, 1 + (k as usize % 4), 20_000 + k).unwrap();
        let rho = random_state(2, 30_000 + k);
        let out = simulate_transpose(&n, &rho).unwrap();
        worst_p = worst_p.max((out.p_suc - 0.25).abs());
        let exact = dual_maps(&n).transpose.apply(rho.matrix()).unwrap();
        let exact = exact.scale_real(1.0 / exact.trace().re);
        worst_state = worst_state.max(out.conditional_state.unwrap().matrix().max_abs_diff(&exact));
    }
    outcome(
        worst_p < 1e-12 && worst_state < 1e-10,
        format!("100 unital channels, |p_suc - 1/4| <= {worst_p:.2e}, state deviation {worst_state:.2e}"),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let (eps, delta, rounds) = (0.1, 0.05, 6641);
    let computed = hoeffding_rounds(eps, delta, 3.0).unwrap();
    let n = random_channel(2, 2, 4, 40_000).unwrap();
    let rho = random_state(2, 40_001);
    let o = random_observable(2, 40_002);
    let mut within = 0;
    for seed in 0..100 {
        let r = estimate_conjugate(&n, &rho, &o, rounds, seed).unwrap();
        if (r.estimate - r.oracle_value).abs() <= eps {
            within += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        within >= 95 && computed <= rounds && secs < 60.0,
        format!(
            "{within}/100 runs within eps with M = {rounds} (Hoeffding count {computed}), {secs:.2}s (< 60s)"
        ),
    )
}

fn unital_instance(seed: u64) -> PetzInstance {
    PetzInstance::new(
        random_unital_channel(2, 3, seed).unwrap(),
        random_state(2, seed + 1),
        random_state(2, seed + 2),
        random_observable(2, seed + 3),
    )
    .unwrap()
}

fn criterion_5() -> Outcome {
    let (runs, attempts) = (50u64, 10_000u64);
    let mut worst_z: f64 = 0.0;
    let mut worst_accept_z: f64 = f64::NEG_INFINITY;
    let mut eta_exact = true;
    for i in 0..20u64 {
        let inst = unital_instance(50_000 + 10 * i);
        let bound = acceptance_bound(&inst.channel).unwrap();
        eta_exact &= bound.eta == 1.0 / 6.0;
        let mut sum = 0.0;
        let mut se_sq = 0.0;
        let mut oracle = 0.0;
        let mut stage_one = [0u64; 3];
        let mut teleported = [0u64; 3];
        let mut lower = [0.0; 3];
        for r in 0..runs {
            let rep = run_petz_attempts(&inst, attempts, 1_000 * i + r, 1).unwrap();
            sum += rep.estimate;
            se_sq += rep.std_error * rep.std_error;
            oracle = rep.oracle_value;
            for (k, b) in rep.branches.iter().enumerate() {
                stage_one[k] += b.stage_one_passed;
                teleported[k] += b.teleport_passed;
                lower[k] = b.teleport_lower_bound;
            }
        }
        let mean = sum / runs as f64;
        let pooled = se_sq.sqrt() / runs as f64;
        worst_z = worst_z.max((mean - oracle).abs() / pooled);
        for k in 0..3 {
            let n = stage_one[k] as f64;
            let sigma = (lower[k] * (1.0 - lower[k]) / n).sqrt();
            let rate = teleported[k] as f64 / n;
            // How many binomial sigmas the observed rate sits below the bound.
            worst_accept_z = worst_accept_z.max((lower[k] - rate) / sigma);
        }
    }
    outcome(
        worst_z < 4.0 && worst_accept_z < 4.0 && eta_exact,
        format!(
            "20 unital instances x 50 runs x 1e4 attempts: max |mean - oracle| = {worst_z:.2} pooled SE (< 4); \
             worst branch acceptance {worst_accept_z:.2} sigma below its bound (< 4); eta = 1/6 exactly: {eta_exact}"
        ),
    )
}

#[derive(Default)]
struct Count(u64);

impl Tally for Count {
    fn merge(&mut self, other: Self) {
        self.0 += other.0;
    }
}

fn criterion_6() -> Outcome {
    let eta = 1.0 / 6.0;
    let m = chernoff_attempts(1000, 0.05, eta).unwrap();
    // Petz attempts on a unital (2,2) instance with a maximally mixed prior.
    let inst = PetzInstance::new(
        random_unital_channel(2, 3, 60_000).unwrap(),
        DensityOperator::maximally_mixed(2),
        random_state(2, 60_001),
        random_observable(2, 60_002),
    )
    .unwrap();
    let mut short_petz = 0;
    let mut short_eta = 0;
    for run in 0..200u64 {
        let rep = run_petz_attempts(&inst, m, 70_000 + run, 1).unwrap();
        if rep.accepted < 1000 {
            short_petz += 1;
        }
        // Acceptance at exactly the bound eta.
        let c: Count = run_rounds(m, 80_000 + run, 1, |rng, c: &mut Count| {
            if rng.random::<f64>() < eta {
                c.0 += 1;
            }
        });
        if c.0 < 1000 {
            short_eta += 1;
        }
    }
    outcome(
        m == 6538 && short_petz <= 10 && short_eta <= 10,
        format!(
            "M = {m} (= 6538); runs with fewer than 1000 accepted: {short_petz}/200 for the estimator, \
             {short_eta}/200 at rate eta (<= 10)"
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 0..100u64 {
        let (din, dout) = (2 + (k as usize % 2), 2 + (k as usize / 2 % 2));
        let n = random_channel(din, dout, din, 90_000 + k).unwrap();
        let rho = random_state(din, 91_000 + k);
        let o = random_observable(dout, 92_000 + k);
        let lhs = o.expectation(&n.apply_operator(rho.matrix()).unwrap());
        let rhs = dual_maps(&n).adjoint.apply(o.matrix()).unwrap().trace_product(rho.matrix());
        worst = worst.max((rhs.re - lhs).abs()).max(rhs.im.abs());
    }
    outcome(worst < 1e-9, format!("100 triples, max |tr[O N(rho)] - tr[N^dag(O) rho]| = {worst:.2e}"))
}

fn criterion_8() -> Outcome {
    let (eps, delta) = (0.1, 0.1);
    let mut normalized = Vec::new();
    let mut accurate = true;
    let mut parts = Vec::new();
    for (k, (da, db)) in [(2usize, 2usize), (2, 3), (3, 2), (3, 3)].into_iter().enumerate() {
        let n = if da == db {
            random_unital_channel(da, 4, 100_000 + k as u64).unwrap()
        } else {
            QuantumChannel::fully_depolarizing(da, db)
        };
        let inst = PetzInstance::new(
            n,
            DensityOperator::maximally_mixed(da),
            random_state(db, 101_000 + k as u64),
            random_observable(da, 102_000 + k as u64),
        )
        .unwrap();
        let budget = attempt_budget(&inst, eps, delta).unwrap();
        let rep = estimate_petz_with_workers(&inst, eps, delta, 103_000 + k as u64, 4).unwrap();
        accurate &= (rep.estimate - rep.oracle_value).abs() <= eps;
        let x = budget.attempts as f64 / ((da * db) as f64).powi(3);
        parts.push(format!("({da},{db}): M = {} -> {x:.0}", budget.attempts));
        normalized.push(x);
    }
    let geo = (normalized.iter().map(|x| x.ln()).sum::<f64>() / normalized.len() as f64).exp();
    let spread = normalized
        .iter()
        .map(|x| (x / geo).max(geo / x))
        .fold(0.0, f64::max);
    outcome(
        spread <= 2.0 && accurate,
        format!(
            "M/(d_A^3 d_B^3): {}; worst ratio to geometric mean {spread:.2} (<= 2); estimates within eps: {accurate}",
            parts.join(", ")
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("virtual comb exactness", criterion_1),
        ("optimal overhead certificates", criterion_2),
        ("transpose protocol", criterion_3),
        ("conjugate estimator statistics", criterion_4),
        ("Petz estimator calibration", criterion_5),
        ("Chernoff budgeting", criterion_6),
        ("dual-map algebra", criterion_7),
        ("complexity shape", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {} [{tag}] {name}: {}", i + 1, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
