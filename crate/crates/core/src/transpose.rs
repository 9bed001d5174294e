//! Probabilistic channel transpose by postselected teleportation.
//!
//! Half of `Phi_{A'A}/d_A` is sent through `N_{A->B}`, the input `rho` sits on
//! `B'`, and `B B'` is projected onto `Phi_{BB'}/d_B`. On success the register
//! `A'` holds `N^T(rho)` up to normalization.

use crate::channels::{DensityOperator, QuantumChannel};
use crate::error::{Error, Result};
use crate::linalg::{max_entangled, partial_trace, ComplexMatrix, SystemDims};

/// Conditional states below this success probability are not formed.
pub const MIN_SUCCESS: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct TransposeOutcome {
    /// Unnormalized state on `A'` on the success branch.
    pub unnormalized: ComplexMatrix,
    pub p_suc: f64,
    /// `None` when `p_suc` is numerically zero.
    pub conditional_state: Option<DensityOperator>,
}

fn check_input(n: &QuantumChannel, rho: &DensityOperator) -> Result<()> {
    if rho.dim() != n.d_out() {
        return Err(Error::DimensionMismatch(format!(
            "transpose input lives on B' of dimension {}, got {}",
            n.d_out(),
            rho.dim()
        )));
    }
    Ok(())
}

/// Simulates the teleportation circuit on `A' B B'` at density-matrix level.
pub fn simulate_transpose(n: &QuantumChannel, rho: &DensityOperator) -> Result<TransposeOutcome> {
    check_input(n, rho)?;
    let (da, db) = (n.d_in(), n.d_out());
    // (id_{A'} (x) N)(Phi/d_A) (x) rho_{B'}
    let joint = n.choi().scale_real(1.0 / da as f64).kron(rho.matrix());
    let projector = ComplexMatrix::identity(da).kron(&max_entangled(db).scale_real(1.0 / db as f64));
    let post = &projector * &(&joint * &projector);
    let dims = SystemDims::new([da, db, db])?;
    let unnormalized = partial_trace(&post, &dims, &[0])?;
    let p_suc = unnormalized.trace().re;
    let conditional_state = if p_suc > MIN_SUCCESS {
        let m = unnormalized.scale_real(1.0 / p_suc).hermitian_part();
        Some(DensityOperator::with_tol(m, 1e-9)?)
    } else {
        None
    };
    Ok(TransposeOutcome {
        unnormalized,
        p_suc,
        conditional_state,
    })
}

/// `tr[N_{AB} (I_A (x) rho^T)] / (d_A d_B)`.
pub fn success_probability(n: &QuantumChannel, rho: &DensityOperator) -> Result<f64> {
    check_input(n, rho)?;
    let (da, db) = (n.d_in(), n.d_out());
    let op = ComplexMatrix::identity(da).kron(&rho.matrix().transpose());
    Ok(n.choi().trace_product(&op).re / (da * db) as f64)
}

/// Like [`simulate_transpose`] but an error instead of `None` on a
/// numerically zero success probability.
pub fn transpose_state(n: &QuantumChannel, rho: &DensityOperator) -> Result<(DensityOperator, f64)> {
    let out = simulate_transpose(n, rho)?;
    match out.conditional_state {
        Some(s) => Ok((s, out.p_suc)),
        None => Err(Error::ZeroAcceptance(format!(
            "teleportation success probability {:.3e}",
            out.p_suc
        ))),
    }
}
