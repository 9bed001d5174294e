use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

use dualchan::channels::{matrix_from_json, ChannelFile, DensityOperator, Observable, QuantumChannel};
use dualchan::linalg::ComplexMatrix;
use dualchan::petz::{PetzInstance, SUPPORT_TOL};

type JsonMatrix = Vec<Vec<[f64; 2]>>;

/// A matrix given bare or as `{"matrix": ...}`.
#[derive(Deserialize)]
#[serde(untagged)]
enum MatrixSpec {
    Bare(JsonMatrix),
    Wrapped { matrix: JsonMatrix },
}

impl MatrixSpec {
    fn into_matrix(self) -> dualchan::Result<ComplexMatrix> {
        match self {
            MatrixSpec::Bare(m) | MatrixSpec::Wrapped { matrix: m } => matrix_from_json(&m),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ChannelSpec {
    Path(PathBuf),
    Inline(ChannelFile),
}

#[derive(Deserialize)]
struct InstanceFile {
    channel: ChannelSpec,
    sigma: MatrixSpec,
    omega: MatrixSpec,
    observable: MatrixSpec,
    #[serde(default)]
    support_tol: Option<f64>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read(path)?).with_context(|| format!("malformed JSON in {}", path.display()))
}

pub fn load_channel(path: &Path, tol: f64) -> Result<QuantumChannel> {
    let file: ChannelFile = parse(path)?;
    file.into_channel(tol)
        .with_context(|| format!("invalid channel in {}", path.display()))
}

fn state_from(spec: MatrixSpec, tol: f64, what: &str) -> Result<DensityOperator> {
    let m = spec.into_matrix().with_context(|| format!("invalid {what} matrix"))?;
    DensityOperator::with_tol(m, tol).with_context(|| format!("invalid {what}"))
}

fn observable_from(spec: MatrixSpec) -> Result<Observable> {
    let m = spec.into_matrix().context("invalid observable matrix")?;
    let o = Observable::new(m).context("invalid observable")?;
    o.check_unit_range().context("observable unsuitable for estimation")?;
    Ok(o)
}

pub fn load_state(path: &Path, tol: f64) -> Result<DensityOperator> {
    state_from(parse(path)?, tol, "state").with_context(|| format!("in {}", path.display()))
}

pub fn load_observable(path: &Path) -> Result<Observable> {
    observable_from(parse(path)?).with_context(|| format!("in {}", path.display()))
}

/// Loads a Petz instance; a channel given as a path is resolved relative to
/// the instance file.
pub fn load_instance(path: &Path, tol: f64) -> Result<PetzInstance> {
    let file: InstanceFile = parse(path)?;
    let channel = match file.channel {
        ChannelSpec::Path(p) => {
            let p = if p.is_relative() {
                path.parent().unwrap_or(Path::new(".")).join(p)
            } else {
                p
            };
            load_channel(&p, tol)?
        }
        ChannelSpec::Inline(f) => f.into_channel(tol).context("invalid inline channel")?,
    };
    let ctx = || format!("in {}", path.display());
    let sigma = state_from(file.sigma, tol, "sigma").with_context(ctx)?;
    let omega = state_from(file.omega, tol, "omega").with_context(ctx)?;
    let observable = observable_from(file.observable).with_context(ctx)?;
    let inst = PetzInstance::new(channel, sigma, omega, observable).with_context(ctx)?;
    Ok(inst.with_support_tol(file.support_tol.unwrap_or(SUPPORT_TOL)))
}
