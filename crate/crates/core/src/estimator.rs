//! The two-stage estimator: decoupled MMV problems for the BS and MS angles,
//! then one SMV problem per (m, n) pair for the RIS frequency difference and
//! the gain product.

use faer::Mat;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anm::{regularization_weight, solve, RegKind, RegularizationConstants, SolverOptions, ToeplitzSdpProblem, ToeplitzSdpSolution};
use crate::channel::{pair_index, steering_matrix, ArrayGeometry, ArrayLayout, ChannelRealization};
use crate::error::{Error, Result};
use crate::linalg::{lstsq, CMat, CVec, C64, ZERO};
use crate::sounding::{gen_stage1_frame, gen_stage2_frames, stack_stage2_rows, SoundingConfig, SoundingFrame, Stage2Rows};
use crate::spectral::{extract_frequencies, ls_amplitudes, wrap_freq};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub sounding: SoundingConfig,
    pub solver: SolverOptions,
    pub reg: RegularizationConstants,
}

impl EstimatorConfig {
    pub fn new(sounding: SoundingConfig) -> Self {
        Self { sounding, solver: SolverOptions::default(), reg: RegularizationConstants::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimationMode {
    Full,
    Partial,
}

/// Convergence record of one SDP solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub label: String,
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
    pub feasibility_shift: f64,
}

impl SolveDiagnostics {
    fn from_solution(label: String, s: &ToeplitzSdpSolution) -> Self {
        Self {
            label,
            iterations: s.iterations,
            converged: s.converged,
            primal_residual: s.primal_residual,
            dual_residual: s.dual_residual,
            objective: s.objective,
            feasibility_shift: s.feasibility_shift,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateBundle {
    pub mode: EstimationMode,
    /// Stage-1 BS angles (radians), sorted by directional sine.
    pub theta_br_hat: Vec<f64>,
    /// Stage-1 MS angles (radians), sorted by directional sine.
    pub phi_rm_hat: Vec<f64>,
    /// Estimated `sin φ_br − sin θ_rm` per pair, wrapped to `[−1, 1)` at half
    /// wavelength spacing.
    pub freq_diff_hat: Vec<f64>,
    pub rho_hat: Vec<C64>,
    /// `(m, n)` into `phi_rm_hat` and `theta_br_hat` for each pair.
    pub index_map: Vec<(usize, usize)>,
    /// Pilot symbols spent, in symbol durations.
    pub overhead: usize,
    pub diagnostics: Vec<SolveDiagnostics>,
    /// Pair estimates that fell back to zero because the SDP output was empty.
    pub empty_pairs: usize,
}

impl EstimateBundle {
    pub fn validate(&self) -> Result<()> {
        let k = self.index_map.len();
        if self.freq_diff_hat.len() != k || self.rho_hat.len() != k {
            return Err(Error::Dimension(format!(
                "{} pairs with {} frequency differences and {} gains",
                k,
                self.freq_diff_hat.len(),
                self.rho_hat.len()
            )));
        }
        let (l_rm, l_br) = (self.phi_rm_hat.len(), self.theta_br_hat.len());
        let mut seen = std::collections::BTreeSet::new();
        for &(m, n) in &self.index_map {
            if m >= l_rm || n >= l_br || !seen.insert((m, n)) {
                return Err(Error::InvalidArgument(format!("bad or repeated pair ({m}, {n})")));
            }
        }
        Ok(())
    }
}

/// Stage-1 output including the latent MMV solutions used for pair ranking.
#[derive(Clone, Debug)]
pub struct Stage1Estimate {
    pub theta_br_hat: Vec<f64>,
    pub phi_rm_hat: Vec<f64>,
    /// `Ū` of the MS problem (`N_M × N0`).
    pub latent_ms: CMat,
    /// `Ũ` of the BS problem (`N_B × M0`).
    pub latent_bs: CMat,
    pub diagnostics: Vec<SolveDiagnostics>,
}

#[derive(Clone, Debug)]
pub struct Stage2Estimate {
    pub freq_diff_hat: Vec<f64>,
    pub rho_hat: Vec<C64>,
    pub diagnostics: Vec<SolveDiagnostics>,
    pub empty_pairs: usize,
}

/// Normalized frequency → directional sine (or sine difference).
fn freq_to_sine(f: f64, geom: &ArrayGeometry) -> f64 {
    f / geom.spacing_ratio
}

/// Angles from normalized frequencies; sines outside `[−1, 1]` (possible
/// only for spacings below half a wavelength) are clamped.
fn freqs_to_angles(freqs: &[f64], geom: &ArrayGeometry) -> Vec<f64> {
    freqs.iter().map(|&f| freq_to_sine(f, geom).clamp(-1.0, 1.0).asin()).collect()
}

fn angles_from_solution(sol: &ToeplitzSdpSolution, order: usize, geom: &ArrayGeometry) -> Result<Vec<f64>> {
    match extract_frequencies(&sol.toeplitz(), order) {
        Ok(freqs) => Ok(freqs_to_angles(&freqs, geom)),
        // No signal at all: spread the guesses over the grid so later stages stay defined.
        Err(Error::EmptySignal) => {
            let freqs: Vec<f64> = (0..order).map(|l| -0.5 + (l as f64 + 0.5) / order as f64).collect();
            Ok(freqs_to_angles(&freqs, geom))
        }
        Err(e) => Err(e),
    }
}

pub fn stage1_estimate(
    frame0: &SoundingFrame,
    layout: &ArrayLayout,
    cfg: &EstimatorConfig,
    l_br: usize,
    l_rm: usize,
) -> Result<Stage1Estimate> {
    let sigma2 = cfg.sounding.noise_var;
    let y0 = &frame0.received;

    // MS side: Y₀ ≈ W₀ᴴ Ū with Ū = A(φ_rm) C̄.
    let ms = ToeplitzSdpProblem {
        observations: y0.clone(),
        sensing: frame0.combiner.adjoint().to_owned(),
        reg: regularization_weight(RegKind::Stage1Ms, &cfg.reg, sigma2, layout.ms.element_count)?,
        scale: 1.0,
    };
    // BS side: Y₀ᴴ ≈ X₀ᴴ Ũ with Ũ = A(θ_br) C̃.
    let bs = ToeplitzSdpProblem {
        observations: y0.adjoint().to_owned(),
        sensing: frame0.pilots.adjoint().to_owned(),
        reg: regularization_weight(RegKind::Stage1Bs, &cfg.reg, sigma2, layout.bs.element_count)?,
        scale: 1.0,
    };
    let (ms_sol, bs_sol) = rayon::join(|| solve(&ms, &cfg.solver), || solve(&bs, &cfg.solver));
    let (ms_sol, bs_sol) = (ms_sol?, bs_sol?);
    let phi_rm_hat = angles_from_solution(&ms_sol, l_rm, &layout.ms)?;
    let theta_br_hat = angles_from_solution(&bs_sol, l_br, &layout.bs)?;
    Ok(Stage1Estimate {
        theta_br_hat,
        phi_rm_hat,
        diagnostics: vec![
            SolveDiagnostics::from_solution("stage1_ms".into(), &ms_sol),
            SolveDiagnostics::from_solution("stage1_bs".into(), &bs_sol),
        ],
        latent_ms: ms_sol.u_hat,
        latent_bs: bs_sol.u_hat,
    })
}

/// One SMV problem per row of the stacked stage-2 observations.
pub fn stage2_estimate(rows: &Stage2Rows, layout: &ArrayLayout, cfg: &EstimatorConfig) -> Result<Stage2Estimate> {
    let n_r = layout.ris.element_count;
    if rows.omega_bar.ncols() != n_r || rows.omega_bar.nrows() != rows.y.ncols() {
        return Err(Error::Dimension(format!(
            "measurement matrix {}x{} for {} blocks and {} RIS elements",
            rows.omega_bar.nrows(),
            rows.omega_bar.ncols(),
            rows.y.ncols(),
            n_r
        )));
    }
    let reg = regularization_weight(RegKind::Stage2, &cfg.reg, cfg.sounding.noise_var, n_r)?;
    let scale = ((layout.bs.element_count * layout.ms.element_count) as f64).sqrt();
    let results: Vec<Result<(f64, C64, SolveDiagnostics, bool)>> = (0..rows.y.nrows())
        .into_par_iter()
        .map(|i| {
            let problem = ToeplitzSdpProblem {
                observations: Mat::from_fn(rows.y.ncols(), 1, |t, _| rows.y[(i, t)]),
                sensing: rows.omega_bar.clone(),
                reg,
                scale,
            };
            let sol = solve(&problem, &cfg.solver)?;
            let diag = SolveDiagnostics::from_solution(format!("stage2_{i}"), &sol);
            match extract_frequencies(&sol.toeplitz(), 1) {
                Ok(f) => {
                    let h = CVec::from_fn(n_r, |k| sol.u_hat[(k, 0)]);
                    let rho = ls_amplitudes(&f, &h, None)?[0];
                    Ok((freq_to_sine(f[0], &layout.ris), rho, diag, false))
                }
                Err(Error::EmptySignal) => Ok((0.0, ZERO, diag, true)),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut out = Stage2Estimate { freq_diff_hat: Vec::new(), rho_hat: Vec::new(), diagnostics: Vec::new(), empty_pairs: 0 };
    for r in results {
        let (f, rho, diag, empty) = r?;
        out.freq_diff_hat.push(f);
        out.rho_hat.push(rho);
        out.diagnostics.push(diag);
        out.empty_pairs += usize::from(empty);
    }
    Ok(out)
}

/// Wraps a sine difference to `[−1, 1)` for half-wavelength spacing, or the
/// corresponding alias interval in general.
pub fn wrap_sine_diff(x: f64, geom: &ArrayGeometry) -> f64 {
    wrap_freq(x * geom.spacing_ratio) / geom.spacing_ratio
}

/// Full pipeline: stage-1 frame, MMV estimates, beam-aligned stage-2 frames,
/// SMV estimates.
pub fn run_full_pipeline<R: RngCore + ?Sized>(
    cfg: &EstimatorConfig,
    real: &ChannelRealization,
    rng: &mut R,
) -> Result<EstimateBundle> {
    let (l_br, l_rm) = (real.l_br(), real.l_rm());
    let frame0 = gen_stage1_frame(&cfg.sounding, real, rng)?;
    let s1 = stage1_estimate(&frame0, &real.layout, cfg, l_br, l_rm)?;
    let frames = gen_stage2_frames(&cfg.sounding, real, &s1.theta_br_hat, &s1.phi_rm_hat, rng)?;
    let rows = stack_stage2_rows(&frames)?;
    let s2 = stage2_estimate(&rows, &real.layout, cfg)?;
    let index_map = (0..l_br * l_rm).map(|i| pair_index(i, l_rm)).collect();
    let mut diagnostics = s1.diagnostics;
    diagnostics.extend(s2.diagnostics);
    Ok(EstimateBundle {
        mode: EstimationMode::Full,
        theta_br_hat: s1.theta_br_hat,
        phi_rm_hat: s1.phi_rm_hat,
        freq_diff_hat: s2.freq_diff_hat,
        rho_hat: s2.rho_hat,
        index_map,
        overhead: cfg.sounding.training_overhead(l_br, l_rm),
        diagnostics,
        empty_pairs: s2.empty_pairs,
    })
}

/// Picks the strongest `(m, n)` pair from the stage-1 block.
///
/// The beam-domain response `G₀` is fitted by least squares to
/// `Y₀ = W₀ᴴ A(φ̂) G₀ Aᴴ(θ̂) X₀`; the pair with the largest `|[G₀]ₘₙ|` wins.
pub fn strongest_pair(frame0: &SoundingFrame, layout: &ArrayLayout, theta_br_hat: &[f64], phi_rm_hat: &[f64]) -> (usize, usize) {
    let (l_rm, l_br) = (phi_rm_hat.len(), theta_br_hat.len());
    if l_rm * l_br == 1 {
        return (0, 0);
    }
    let left: CMat = frame0.combiner.adjoint() * steering_matrix(&layout.ms, phi_rm_hat);
    let right: CMat = steering_matrix(&layout.bs, theta_br_hat).adjoint() * &frame0.pilots;
    let y = &frame0.received;
    let (r, c) = (y.nrows(), y.ncols());
    // vec(L G R) = (Rᵀ ⊗ L) vec(G), pair i = m + n·L_rm.
    let design = Mat::from_fn(r * c, l_rm * l_br, |row, col| {
        let (a, b) = (row % r, row / r);
        let (m, n) = pair_index(col, l_rm);
        right[(n, b)] * left[(a, m)]
    });
    let obs = Mat::from_fn(r * c, 1, |row, _| y[(row % r, row / r)]);
    match lstsq(&design, &obs, 1e-10) {
        Ok(g) => {
            let best = (0..l_rm * l_br)
                .max_by(|&i, &j| g[(i, 0)].norm().total_cmp(&g[(j, 0)].norm()).then(j.cmp(&i)))
                .unwrap_or(0);
            pair_index(best, l_rm)
        }
        Err(_) => (0, 0),
    }
}

/// Partial pipeline: stage 2 sounds only the strongest pair.
pub fn run_partial_pipeline<R: RngCore + ?Sized>(
    cfg: &EstimatorConfig,
    real: &ChannelRealization,
    rng: &mut R,
) -> Result<EstimateBundle> {
    let (l_br, l_rm) = (real.l_br(), real.l_rm());
    let frame0 = gen_stage1_frame(&cfg.sounding, real, rng)?;
    let s1 = stage1_estimate(&frame0, &real.layout, cfg, l_br, l_rm)?;
    let (m, n) = strongest_pair(&frame0, &real.layout, &s1.theta_br_hat, &s1.phi_rm_hat);
    let frames = gen_stage2_frames(&cfg.sounding, real, &s1.theta_br_hat[n..=n], &s1.phi_rm_hat[m..=m], rng)?;
    let rows = stack_stage2_rows(&frames)?;
    let s2 = stage2_estimate(&rows, &real.layout, cfg)?;
    let mut diagnostics = s1.diagnostics;
    diagnostics.extend(s2.diagnostics);
    Ok(EstimateBundle {
        mode: EstimationMode::Partial,
        theta_br_hat: s1.theta_br_hat,
        phi_rm_hat: s1.phi_rm_hat,
        freq_diff_hat: s2.freq_diff_hat,
        rho_hat: s2.rho_hat,
        index_map: vec![(m, n)],
        overhead: cfg.sounding.training_overhead(1, 1),
        diagnostics,
        empty_pairs: s2.empty_pairs,
    })
}
