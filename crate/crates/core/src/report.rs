//! Versioned JSON envelopes for reports.

use serde::{Deserialize, Serialize};

use crate::channels::{dual_maps, matrix_to_json, DensityOperator, QuantumChannel};
use crate::error::Result;
use crate::transpose::{simulate_transpose, success_probability};

pub const SCHEMA: &str = "dualchan/1";

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: &'static str,
    kind: &'a str,
    #[serde(flatten)]
    report: &'a T,
}

/// Pretty JSON with a top-level `"schema"` and `"kind"`.
pub fn to_json<T: Serialize>(kind: &str, report: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Envelope {
        schema: SCHEMA,
        kind,
        report,
    })?)
}

/// Outcome of the teleportation transpose on one input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransposeReport {
    pub d_in: usize,
    pub d_out: usize,
    /// Success probability from the simulated circuit.
    pub p_suc: f64,
    /// `tr[N (I (x) rho^T)] / (d_A d_B)`.
    pub p_suc_formula: f64,
    /// Conditional state on success; absent when `p_suc` vanishes.
    pub conditional_state: Option<Vec<Vec<[f64; 2]>>>,
    /// `max |conditional - N^T(rho)/tr N^T(rho)|`.
    pub max_deviation: Option<f64>,
}

pub fn transpose_report(n: &QuantumChannel, rho: &DensityOperator) -> Result<TransposeReport> {
    let out = simulate_transpose(n, rho)?;
    let exact = dual_maps(n).transpose.apply(rho.matrix())?;
    let tr = exact.trace().re;
    let max_deviation = out
        .conditional_state
        .as_ref()
        .map(|s| s.matrix().max_abs_diff(&exact.scale_real(1.0 / tr)));
    Ok(TransposeReport {
        d_in: n.d_in(),
        d_out: n.d_out(),
        p_suc: out.p_suc,
        p_suc_formula: success_probability(n, rho)?,
        conditional_state: out.conditional_state.as_ref().map(|s| matrix_to_json(s.matrix())),
        max_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_has_schema() {
        let r = transpose_report(&QuantumChannel::identity(2), &DensityOperator::basis(2, 0)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&to_json("transpose-sim", &r).unwrap()).unwrap();
        assert_eq!(v["schema"], SCHEMA);
        assert_eq!(v["kind"], "transpose-sim");
        assert!((v["p_suc"].as_f64().unwrap() - 0.25).abs() < 1e-14);
    }
}
