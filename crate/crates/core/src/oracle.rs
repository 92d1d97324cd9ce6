//! Re-verification of SDP solutions against externally computed optima.

use serde::{Deserialize, Serialize};

use crate::anm::{solve, toeplitz_from_row, SolverOptions, ToeplitzSdpProblem, ToeplitzSdpSolution};
use crate::error::Result;
use crate::linalg::{herm_eigenvalues, hermitian_part, CMat};

pub const FIXTURE_KIND: &str = "sdp_oracle";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SdpCase {
    pub name: String,
    #[serde(with = "crate::io::cmat")]
    pub observations: CMat,
    #[serde(with = "crate::io::cmat")]
    pub sensing: CMat,
    pub reg: f64,
    pub scale: f64,
    /// Optimal value reported by the reference solver.
    pub objective: f64,
}

impl SdpCase {
    pub fn problem(&self) -> ToeplitzSdpProblem {
        ToeplitzSdpProblem {
            observations: self.observations.clone(),
            sensing: self.sensing.clone(),
            reg: self.reg,
            scale: self.scale,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SdpFixture {
    /// Free-form provenance of the reference values.
    pub source: String,
    /// Allowed relative objective gap.
    pub tolerance: f64,
    /// Most negative eigenvalue tolerated in the stacked block.
    pub psd_tolerance: f64,
    pub cases: Vec<SdpCase>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub name: String,
    pub reference: f64,
    pub achieved: f64,
    pub relative_gap: f64,
    pub min_eigenvalue: f64,
    pub iterations: usize,
    pub passed: bool,
}

/// Smallest eigenvalue of `[[Toep(u), U], [Uᴴ, Z]]`.
pub fn block_min_eigenvalue(sol: &ToeplitzSdpSolution) -> Result<f64> {
    let n = sol.u1.len();
    let c = sol.z_hat.nrows();
    let t = toeplitz_from_row(&sol.u1);
    let block = CMat::from_fn(n + c, n + c, |i, j| match (i < n, j < n) {
        (true, true) => t[(i, j)],
        (true, false) => sol.u_hat[(i, j - n)],
        (false, true) => sol.u_hat[(j, i - n)].conj(),
        (false, false) => sol.z_hat[(i - n, j - n)],
    });
    Ok(herm_eigenvalues(&hermitian_part(&block))?.into_iter().fold(f64::INFINITY, f64::min))
}

/// Options used for oracle comparisons: tighter than the defaults.
pub fn oracle_solver_options() -> SolverOptions {
    SolverOptions { max_iter: 20_000, eps_abs: 1e-9, eps_rel: 1e-9, ..SolverOptions::default() }
}

pub fn verify_case(case: &SdpCase, tolerance: f64, psd_tolerance: f64, opts: &SolverOptions) -> Result<CaseOutcome> {
    let sol = solve(&case.problem(), opts)?;
    let relative_gap = (sol.objective - case.objective).abs() / case.objective.abs().max(1e-12);
    let min_eigenvalue = block_min_eigenvalue(&sol)?;
    Ok(CaseOutcome {
        name: case.name.clone(),
        reference: case.objective,
        achieved: sol.objective,
        relative_gap,
        min_eigenvalue,
        iterations: sol.iterations,
        passed: relative_gap <= tolerance && min_eigenvalue >= -psd_tolerance,
    })
}

pub fn verify_fixture(fixture: &SdpFixture, opts: &SolverOptions) -> Result<Vec<CaseOutcome>> {
    fixture
        .cases
        .iter()
        .map(|c| verify_case(c, fixture.tolerance, fixture.psd_tolerance, opts))
        .collect()
}
