//! Primal and dual feasible points certifying that the minimum base norm of
//! a one-slot virtual comb for the complex conjugate is
//! `d_A d_B - d_A + 1`.
//!
//! Both certificates live on `A' A B B'`. The reproduction constraint asks
//! that `C1 - C2` maps `X^T` to `X^T` under the link product for
//! `X = I_{AB}/d_B` and every element of a basis of `ker tr_B`.
//!
//! The dual pairs each basis element `Delta_j` with `G_j = c_j Delta_j^T`,
//! for which `sum_j Delta_j^T (x) G_j = (F + I/d_B) (x) (F - I/d_B)/(d_A(d_B+1))`.

use serde::{Deserialize, Serialize};

use crate::channels::{random_channel, random_state, werner_holevo_choi, WhSign};
use crate::conjugate::{causality_violation, comb_dims, link_product};
use crate::linalg::{c, partial_trace, permute_systems, psd_power, ComplexMatrix, PsdExponent, SystemDims};

/// Default feasibility tolerance.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Number of random channels used to cross-check reproduction.
pub const RANDOM_CHECKS: usize = 20;

/// Orthonormal Hermitian operator basis.
#[derive(Clone, Debug)]
pub struct HermitianBasis {
    pub d: usize,
    pub elements: Vec<ComplexMatrix>,
}

impl HermitianBasis {
    /// `max |tr[L_i^dag L_j] - delta_ij|`.
    pub fn gram_deviation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.elements.iter().enumerate() {
            let ad = a.adjoint();
            for (j, b) in self.elements.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((ad.trace_product(b) - c(target, 0.0)).norm());
            }
        }
        worst
    }
}

/// Generalized Gell-Mann basis, 0-based.
///
/// Order: `L_0 = I/sqrt(d)`; the diagonal `L_m`, `1 <= m < d`, equal to
/// `(sum_{k<m} |k><k| - m |m><m|)/sqrt(m(m+1))`; the symmetric
/// `(|j><k| + |k><j|)/sqrt 2` for `j < k`; the antisymmetric
/// `(-i|j><k| + i|k><j|)/sqrt 2` for `j < k`.
pub fn gell_mann_basis(d: usize) -> HermitianBasis {
    assert!(d >= 1, "dimension must be positive");
    let mut elements = Vec::with_capacity(d * d);
    elements.push(ComplexMatrix::identity(d).scale_real(1.0 / (d as f64).sqrt()));
    for m in 1..d {
        let norm = 1.0 / ((m * (m + 1)) as f64).sqrt();
        let mut diag = vec![0.0; d];
        diag[..m].iter_mut().for_each(|v| *v = norm);
        diag[m] = -(m as f64) * norm;
        elements.push(ComplexMatrix::from_real_diag(&diag));
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|j| (j + 1..d).map(move |k| (j, k))).collect();
    for &(j, k) in &pairs {
        let mut m = ComplexMatrix::zeros(d, d);
        m[(j, k)] = c(h, 0.0);
        m[(k, j)] = c(h, 0.0);
        elements.push(m);
    }
    for &(j, k) in &pairs {
        let mut m = ComplexMatrix::zeros(d, d);
        m[(j, k)] = c(0.0, -h);
        m[(k, j)] = c(0.0, h);
        elements.push(m);
    }
    HermitianBasis { d, elements }
}

/// `L_A^(alpha) (x) L_B^(beta)` for `beta >= 1`, ordered with `alpha` major.
/// Element `alpha (d_B^2 - 1) + beta - 1` has `tr_A != 0` iff `alpha = 0`.
pub fn traceless_b_basis(d_a: usize, d_b: usize) -> Vec<ComplexMatrix> {
    let la = gell_mann_basis(d_a);
    let lb = gell_mann_basis(d_b);
    la.elements
        .iter()
        .flat_map(|a| lb.elements[1..].iter().map(move |b| a.kron(b)))
        .collect()
}

pub struct PrimalCertificate {
    pub d_a: usize,
    pub d_b: usize,
    pub c1: ComplexMatrix,
    pub c2: ComplexMatrix,
    pub p1: f64,
    pub p2: f64,
}

impl PrimalCertificate {
    pub fn objective(&self) -> f64 {
        self.p1 + self.p2
    }
}

pub fn primal_certificate(d_a: usize, d_b: usize) -> PrimalCertificate {
    let (a, b) = (d_a as f64, d_b as f64);
    let pp = werner_holevo_choi(d_a, WhSign::Plus).kron(&werner_holevo_choi(d_b, WhSign::Plus));
    let mm = werner_holevo_choi(d_a, WhSign::Minus).kron(&werner_holevo_choi(d_b, WhSign::Minus));
    let pm = werner_holevo_choi(d_a, WhSign::Plus).kron(&werner_holevo_choi(d_b, WhSign::Minus));
    PrimalCertificate {
        d_a,
        d_b,
        c1: &pp.scale_real((b + 1.0) / 2.0) + &mm.scale_real((a - 1.0) * (b - 1.0) / 2.0),
        c2: pm.scale_real(a * (b - 1.0) / 2.0),
        p1: (a * b - a + 2.0) / 2.0,
        p2: a * (b - 1.0) / 2.0,
    }
}

pub struct DualCertificate {
    pub d_a: usize,
    pub d_b: usize,
    /// On `A'B'`.
    pub x: ComplexMatrix,
    /// On `A'B`; `Z1 = Z2`.
    pub z: ComplexMatrix,
    /// On `A'AB`; `Y1 = Y2`.
    pub y: ComplexMatrix,
    /// Basis of `ker tr_B` on `AB`.
    pub deltas: Vec<ComplexMatrix>,
    /// `c_j`, with `G_j = c_j Delta_j^T` on `A'B'`.
    pub coefficients: Vec<f64>,
}

impl DualCertificate {
    pub fn g(&self, j: usize) -> ComplexMatrix {
        self.deltas[j].transpose().scale_real(self.coefficients[j])
    }

    /// `tr[X D^T] + sum_j tr[G_j Delta_j^T]` with `D = I/d_B`.
    pub fn objective(&self) -> f64 {
        let d = ComplexMatrix::identity(self.d_a * self.d_b).scale_real(1.0 / self.d_b as f64);
        let mut total = self.x.trace_product(&d).re;
        for (j, delta) in self.deltas.iter().enumerate() {
            total += self.g(j).trace_product(&delta.transpose()).re;
        }
        total
    }

    /// `sum_j Delta_j^T (x) G_j` on `A' A B B'`.
    pub fn coupling(&self) -> ComplexMatrix {
        let gs: Vec<ComplexMatrix> = (0..self.deltas.len()).map(|j| self.g(j)).collect();
        coupling_operator(self.d_a, self.d_b, &self.deltas, &gs)
    }

    /// The two slack operators that must be PSD.
    pub fn slacks(&self) -> (ComplexMatrix, ComplexMatrix) {
        let (da, db) = (self.d_a, self.d_b);
        let dims = comb_dims(da, db);
        let n = dims.total();
        // Y (x) I_{B'} - tr_B Y (x) I_{BB'} / d_B + Z (x) I_{AB'}, all orders A'ABB'.
        let y_full = self.y.kron(&ComplexMatrix::identity(db));
        let y_marg = partial_trace(&self.y, &SystemDims::new([da, da, db]).expect("dims"), &[0, 1])
            .expect("dims")
            .kron(&ComplexMatrix::identity(db * db))
            .scale_real(1.0 / db as f64);
        let z_full = permute_systems(
            &self.z.kron(&ComplexMatrix::identity(da * db)),
            &SystemDims::new([da, db, da, db]).expect("dims"),
            &[0, 2, 1, 3],
        )
        .expect("dims");
        let d_ab = ComplexMatrix::identity(da * db).scale_real(1.0 / db as f64);
        // D^T_{AB} (x) X_{A'B'} in order A B A' B', moved to A' A B B'.
        let dx = to_comb_order(da, db, &d_ab.transpose().kron(&self.x));
        let coupling = self.coupling();
        let base = &(&y_full - &y_marg) + &z_full;
        let slack1 = &(&base - &dx) - &coupling;
        let slack2 = &(&dx + &coupling) + &base;
        debug_assert_eq!(slack1.rows(), n);
        (slack1, slack2)
    }
}

fn to_comb_order(d_a: usize, d_b: usize, m: &ComplexMatrix) -> ComplexMatrix {
    let dims = SystemDims::new([d_a, d_b, d_a, d_b]).expect("dims");
    permute_systems(m, &dims, &[2, 0, 1, 3]).expect("dims")
}

/// `sum_j Delta_j^T (x) G_j` with `Delta_j` on `AB` and `G_j` on `A'B'`,
/// returned in the order `A' A B B'`.
pub fn coupling_operator(d_a: usize, d_b: usize, deltas: &[ComplexMatrix], gs: &[ComplexMatrix]) -> ComplexMatrix {
    let n = d_a * d_a * d_b * d_b;
    let mut acc = ComplexMatrix::zeros(n, n);
    for (delta, g) in deltas.iter().zip(gs) {
        acc += &delta.transpose().kron(g);
    }
    to_comb_order(d_a, d_b, &acc)
}

pub fn dual_certificate(d_a: usize, d_b: usize) -> DualCertificate {
    let (a, b) = (d_a as f64, d_b as f64);
    let deltas = traceless_b_basis(d_a, d_b);
    let per_alpha = d_b * d_b - 1;
    let coefficients = (0..deltas.len())
        .map(|j| {
            if j < per_alpha {
                (a + b) / (a * (b * b + b))
            } else {
                1.0 / (a * (b + 1.0))
            }
        })
        .collect();
    DualCertificate {
        d_a,
        d_b,
        x: ComplexMatrix::identity(d_a * d_b).scale_real(1.0 / (a * b)),
        z: ComplexMatrix::identity(d_a * d_b).scale_real(1.0 / (a * b)),
        y: ComplexMatrix::identity(d_a * d_a * d_b),
        deltas,
        coefficients,
    }
}

/// Extreme eigenvalues `(lambda_1, lambda_2)` of the dual coupling operator.
pub fn coupling_extremes(d_a: usize, d_b: usize) -> (f64, f64) {
    let (a, b) = (d_a as f64, d_b as f64);
    ((b - 1.0) / (a * b * b), -(b + 1.0) / (a * b * b))
}

/// Largest violation within each constraint family.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Violations {
    pub primal_psd: f64,
    pub primal_causality: f64,
    pub primal_normalization: f64,
    pub primal_reproduction: f64,
    pub primal_random_reproduction: f64,
    pub dual_trace: f64,
    pub dual_inequality_upper: f64,
    pub dual_inequality_lower: f64,
    pub dual_spectrum: f64,
}

impl Violations {
    pub fn max(&self) -> f64 {
        [
            self.primal_psd,
            self.primal_causality,
            self.primal_normalization,
            self.primal_reproduction,
            self.primal_random_reproduction,
            self.dual_trace,
            self.dual_inequality_upper,
            self.dual_inequality_lower,
            self.dual_spectrum,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub d_a: usize,
    pub d_b: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub expected: f64,
    pub tol: f64,
    pub violations: Violations,
    /// Smallest eigenvalues of the two dual slacks.
    pub dual_slack_min: [f64; 2],
    pub pass: bool,
}

/// `max |link(C, X) - X^T|`.
fn reproduction_error(comb: &ComplexMatrix, d_a: usize, d_b: usize, x: &ComplexMatrix) -> f64 {
    link_product(comb, d_a, d_b, x)
        .expect("dims")
        .max_abs_diff(&x.transpose())
}

fn psd_violation(m: &ComplexMatrix) -> f64 {
    (-m.min_eigenvalue(f64::INFINITY).expect("square")).max(0.0)
}

fn check_primal(p: &PrimalCertificate, v: &mut Violations) {
    let (da, db) = (p.d_a, p.d_b);
    let dims = comb_dims(da, db);
    v.primal_psd = psd_violation(&p.c1).max(psd_violation(&p.c2));
    v.primal_causality = causality_violation(&p.c1, da, db).max(causality_violation(&p.c2, da, db));
    let id = ComplexMatrix::identity(da * db);
    for (m, w) in [(&p.c1, p.p1), (&p.c2, p.p2)] {
        let marg = partial_trace(m, &dims, &[0, 2]).expect("dims");
        v.primal_normalization = v.primal_normalization.max(marg.max_abs_diff(&id.scale_real(w)));
    }
    let diff = &p.c1 - &p.c2;
    let d = id.scale_real(1.0 / db as f64);
    v.primal_reproduction = reproduction_error(&diff, da, db, &d);
    for delta in traceless_b_basis(da, db) {
        v.primal_reproduction = v.primal_reproduction.max(reproduction_error(&diff, da, db, &delta));
    }
    for k in 0..RANDOM_CHECKS {
        let n = random_channel(da, db, da, 0x5eed + k as u64).expect("valid rank");
        v.primal_random_reproduction = v
            .primal_random_reproduction
            .max(reproduction_error(&diff, da, db, n.choi()));
    }
}

fn check_dual(d: &DualCertificate, v: &mut Violations) -> [f64; 2] {
    v.dual_trace = (d.z.trace().re - 1.0).abs();
    let (s1, s2) = d.slacks();
    let m1 = s1.min_eigenvalue(f64::INFINITY).expect("square");
    let m2 = s2.min_eigenvalue(f64::INFINITY).expect("square");
    v.dual_inequality_upper = (-m1).max(0.0);
    v.dual_inequality_lower = (-m2).max(0.0);
    let spectrum = d.coupling().eigvalsh(f64::INFINITY).expect("square");
    let (l1, l2) = coupling_extremes(d.d_a, d.d_b);
    v.dual_spectrum = (spectrum[spectrum.len() - 1] - l1).abs().max((spectrum[0] - l2).abs());
    [m1, m2]
}

/// Builds and checks both certificates; failures are reported, not raised.
pub fn certify_base_norm(d_a: usize, d_b: usize, tol: f64) -> CertificateReport {
    assert!(d_a >= 2 && d_b >= 2, "certificates need d_A, d_B >= 2");
    let expected = (d_a * d_b - d_a + 1) as f64;
    let mut violations = Violations::default();
    let primal = primal_certificate(d_a, d_b);
    check_primal(&primal, &mut violations);
    let dual = dual_certificate(d_a, d_b);
    let dual_slack_min = check_dual(&dual, &mut violations);
    let primal_objective = primal.objective();
    let dual_objective = dual.objective();
    let pass = (primal_objective - expected).abs() < tol
        && (dual_objective - expected).abs() < tol
        && violations.max() < tol;
    CertificateReport {
        d_a,
        d_b,
        primal_objective,
        dual_objective,
        expected,
        tol,
        violations,
        dual_slack_min,
        pass,
    }
}

/// Values of a single-slot tester applied to a comb operator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TesterValue {
    /// `||(sqrt(X) (x) I_F) C (sqrt(X) (x) I_F)||_1` with `X = xi_P (x) J_IO`.
    pub trace_norm: f64,
    /// `sum_i |tr[(sqrt(X) (x) I_F) E_i (sqrt(X) (x) I_F) C]|` for a random POVM.
    pub povm_value: f64,
}

/// Evaluates a comb on `A' A B B'` against a tester built from a random
/// input state on `A'`, a random channel `A -> B` and a random POVM with
/// `outcomes` elements. Both values are bounded by the comb's base norm.
pub fn random_tester_value(comb: &ComplexMatrix, d_a: usize, d_b: usize, outcomes: usize, seed: u64) -> TesterValue {
    let xi = random_state(d_a, seed);
    let j = random_channel(d_a, d_b, d_a * d_b, seed.wrapping_add(1)).expect("valid rank");
    let root = psd_power(&xi.matrix().kron(j.choi()), PsdExponent::Sqrt, 1e-14)
        .expect("PSD")
        .kron(&ComplexMatrix::identity(d_b));
    let sandwiched = (&(&root * comb) * &root).hermitian_part();
    let trace_norm = sandwiched.trace_norm_hermitian(f64::INFINITY).expect("square");
    let dim = comb.rows();
    let elems: Vec<ComplexMatrix> = (0..outcomes.max(1))
        .map(|k| random_state(dim, seed.wrapping_add(10 + k as u64)).into_matrix())
        .collect();
    let mut total = ComplexMatrix::zeros(dim, dim);
    for e in &elems {
        total += e;
    }
    let norm = psd_power(&total, PsdExponent::InvSqrt, 1e-14).expect("PSD");
    let povm_value = elems
        .iter()
        .map(|e| {
            let povm = &(&norm * e) * &norm;
            (&(&root * &povm) * &root).trace_product(comb).re.abs()
        })
        .sum();
    TesterValue { trace_norm, povm_value }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conjugate::virtual_comb_choi;

    #[test]
    fn gell_mann_d2() {
        let b = gell_mann_basis(2);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let expect = [
            ComplexMatrix::identity(2).scale_real(h),
            ComplexMatrix::from_real_diag(&[h, -h]),
            ComplexMatrix::from_rows(&[vec![c(0.0, 0.0), c(h, 0.0)], vec![c(h, 0.0), c(0.0, 0.0)]]).unwrap(),
            ComplexMatrix::from_rows(&[vec![c(0.0, 0.0), c(0.0, -h)], vec![c(0.0, h), c(0.0, 0.0)]]).unwrap(),
        ];
        for (got, want) in b.elements.iter().zip(&expect) {
            assert!(got.max_abs_diff(want) < 1e-15);
        }
        assert!(b.gram_deviation() < 1e-12);
    }

    #[test]
    fn gell_mann_general() {
        for d in 2..=5 {
            let b = gell_mann_basis(d);
            assert_eq!(b.elements.len(), d * d);
            assert!(b.gram_deviation() < 1e-12);
            assert!(b.elements.iter().all(|m| m.is_hermitian(1e-15)));
            assert!(b.elements[1..].iter().all(|m| m.trace().norm() < 1e-12));
        }
    }

    #[test]
    fn traceless_basis_counts() {
        assert_eq!(traceless_b_basis(2, 2).len(), 12);
        assert_eq!(traceless_b_basis(2, 3).len(), 32);
        let dims = SystemDims::new([2, 3]).unwrap();
        for (j, delta) in traceless_b_basis(2, 3).iter().enumerate() {
            assert!(partial_trace(delta, &dims, &[0]).unwrap().max_abs() < 1e-12);
            let tr_a = partial_trace(delta, &dims, &[1]).unwrap().max_abs();
            assert_eq!(tr_a > 1e-12, j < 8);
        }
    }

    #[test]
    fn primal_examples() {
        let p = primal_certificate(2, 2);
        assert_eq!((p.p1, p.p2), (2.0, 1.0));
        assert!(p.c1.min_eigenvalue(f64::INFINITY).unwrap() >= -1e-12);
        assert!(p.c2.min_eigenvalue(f64::INFINITY).unwrap() >= -1e-12);
        assert_eq!(primal_certificate(3, 3).objective(), 7.0);
        for da in 2..=4 {
            for db in 2..=4 {
                let gamma = virtual_comb_choi(da, db).l1_weight();
                assert!((primal_certificate(da, db).objective() - gamma).abs() < 1e-12);
                let p = primal_certificate(da, db);
                assert!((&p.c1 - &p.c2).max_abs_diff(&virtual_comb_choi(da, db).choi) < 1e-12);
            }
        }
    }

    #[test]
    fn dual_examples() {
        assert_eq!(coupling_extremes(2, 2), (0.125, -0.375));
        let d = dual_certificate(2, 2);
        assert_eq!(d.z.trace().re, 1.0);
        let (a, b) = (2.0_f64, 2.0_f64);
        let chain = 1.0 / b + (a + b) * (b - 1.0) / (a * b) + (a * a - 1.0) * (b - 1.0) / a;
        assert!((chain - 3.0).abs() < 1e-15);
        assert!((d.objective() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn coupling_closed_form() {
        for (da, db) in [(2, 2), (2, 3), (3, 2)] {
            let d = dual_certificate(da, db);
            let fa = crate::linalg::swap_operator(da, da);
            let fb = crate::linalg::swap_operator(db, db);
            let left = &fa + &ComplexMatrix::identity(da * da).scale_real(1.0 / db as f64);
            let right = &fb - &ComplexMatrix::identity(db * db).scale_real(1.0 / db as f64);
            let expect = left.kron(&right).scale_real(1.0 / (da as f64 * (db as f64 + 1.0)));
            assert!(d.coupling().max_abs_diff(&expect) < 1e-12);
        }
    }

    #[test]
    fn untransposed_pairing_is_infeasible() {
        // G_j proportional to Delta_j instead of Delta_j^T.
        let d = dual_certificate(2, 2);
        let gs: Vec<ComplexMatrix> = d
            .deltas
            .iter()
            .zip(&d.coefficients)
            .map(|(m, &w)| m.scale_real(w))
            .collect();
        let coupling = coupling_operator(2, 2, &d.deltas, &gs);
        let (l1, _) = coupling_extremes(2, 2);
        let top = coupling.max_eigenvalue(f64::INFINITY).unwrap();
        assert!(top > l1 + 1e-3);
        let objective: f64 = 0.5
            + d.deltas
                .iter()
                .zip(&gs)
                .map(|(m, g)| g.trace_product(&m.transpose()).re)
                .sum::<f64>();
        assert!((objective - 3.0).abs() > 0.1);
    }

    #[test]
    fn certify_small_grid() {
        for (da, db, want) in [(2, 2, 3.0), (2, 3, 5.0), (4, 2, 5.0)] {
            let r = certify_base_norm(da, db, FEASIBILITY_TOL);
            assert!(r.pass, "{r:?}");
            assert_eq!(r.expected, want);
            assert!(r.violations.max() < 1e-9);
            assert!(r.dual_slack_min.iter().all(|m| m.abs() < 1e-9));
        }
    }

    #[test]
    fn testers_respect_base_norm() {
        let comb = virtual_comb_choi(2, 2).choi;
        for seed in 0..10 {
            let v = random_tester_value(&comb, 2, 2, 3, seed);
            assert!(v.trace_norm <= 3.0 + 1e-9);
            assert!(v.povm_value <= v.trace_norm + 1e-9);
        }
    }
}
