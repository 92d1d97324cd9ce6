//! Seeded Monte Carlo sweeps over SNR for the estimation schemes and the
//! genie-aided benchmarks.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anm::{RegularizationConstants, SolverOptions};
use crate::channel::{angle_difference_set, composite_channel, steering_vector, ArrayGeometry, ArrayLayout, ChannelRealization, GainProfile};
use crate::error::{Error, Result};
use crate::estimator::{run_full_pipeline, run_partial_pipeline, EstimateBundle, EstimatorConfig};
use crate::linalg::{CMat, C64};
use crate::metrics::{aggregate, aligned_mse_delta_and_rho, aligned_mse_sines, asd, LinkSample, MetricReport, RealizationRecord};
use crate::omp::{build_stage1_dictionary, run_omp_pipeline, KroneckerDictionary};
use crate::ris::{design_beamformers, design_omega, reconstruct_composite, ris_gain, BeamformerPair};
use crate::rng::{derive_seed, rng_from_seed};
use crate::sounding::SoundingConfig;

/// Seed tags.
const TAG_CHANNEL: u64 = 1;
const TAG_SOUNDING: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Proposed,
    Partial,
    Omp,
    PerfectCsi,
    LosOnly,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::Proposed, Scheme::Partial, Scheme::Omp, Scheme::PerfectCsi, Scheme::LosOnly];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Partial => "partial",
            Scheme::Omp => "omp",
            Scheme::PerfectCsi => "perfect_csi",
            Scheme::LosOnly => "los_only",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scheme `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub n_bs: usize,
    pub n_ms: usize,
    pub n_ris: usize,
    pub n_rf: usize,
    #[serde(default = "half")]
    pub spacing_ratio: f64,
}

fn half() -> f64 {
    0.5
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub l_br: usize,
    pub l_rm: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSpec {
    pub n0: usize,
    pub m0: usize,
    pub t_blocks: usize,
}

/// One experiment document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub config_id: String,
    pub geometry: GeometrySpec,
    pub paths: PathSpec,
    pub sounding: TrainingSpec,
    pub snr_grid_db: Vec<f64>,
    pub profile: GainProfile,
    pub schemes: Vec<Scheme>,
    pub realizations: usize,
    #[serde(default = "default_coherence")]
    pub coherence_time: usize,
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub regularization: RegularizationConstants,
    /// Directory receiving one `<scheme>.csv` per scheme.
    pub output: PathBuf,
}

fn default_coherence() -> usize {
    500
}

fn spec_err(field: &str, reason: impl Into<String>) -> Error {
    Error::Spec { field: field.to_string(), reason: reason.into() }
}

impl ExperimentSpec {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let spec: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            spec_err(&field, e.into_inner().to_string())
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        for (name, v) in [("geometry.n_bs", g.n_bs), ("geometry.n_ms", g.n_ms), ("geometry.n_ris", g.n_ris)] {
            if v < 2 {
                return Err(spec_err(name, format!("arrays need at least 2 elements, got {v}")));
            }
        }
        if g.n_rf == 0 {
            return Err(spec_err("geometry.n_rf", "at least one RF chain is required"));
        }
        if !(g.spacing_ratio > 0.0 && g.spacing_ratio <= 0.5) {
            return Err(spec_err("geometry.spacing_ratio", format!("must lie in (0, 0.5], got {}", g.spacing_ratio)));
        }
        if self.paths.l_br == 0 || self.paths.l_rm == 0 {
            return Err(spec_err("paths", "each hop needs at least one path"));
        }
        if self.paths.l_br >= g.n_bs.min(g.n_ris) || self.paths.l_rm >= g.n_ris.min(g.n_ms) {
            return Err(spec_err("paths", "path counts must be below the array sizes they are resolved on"));
        }
        let s = &self.sounding;
        if s.n0 == 0 || s.m0 == 0 || s.t_blocks == 0 {
            return Err(spec_err("sounding", "n0, m0 and t_blocks must be positive"));
        }
        if self.snr_grid_db.is_empty() {
            return Err(spec_err("snr_grid_db", "at least one SNR point is required"));
        }
        if let Some(i) = self.snr_grid_db.iter().position(|x| !x.is_finite()) {
            return Err(spec_err(&format!("snr_grid_db[{i}]"), "must be finite"));
        }
        if self.schemes.is_empty() {
            return Err(spec_err("schemes", "at least one scheme is required"));
        }
        if self.realizations == 0 {
            return Err(spec_err("realizations", "must be at least 1"));
        }
        let t_t = self.sounding_config(1.0).training_overhead(self.paths.l_br, self.paths.l_rm);
        if t_t > self.coherence_time {
            return Err(spec_err(
                "coherence_time",
                format!("training overhead {t_t} exceeds coherence time {}", self.coherence_time),
            ));
        }
        self.solver.validate().map_err(|e| spec_err("solver", e.to_string()))?;
        Ok(())
    }

    pub fn layout(&self) -> Result<ArrayLayout> {
        let g = &self.geometry;
        Ok(ArrayLayout {
            bs: ArrayGeometry::new(g.n_bs, g.spacing_ratio)?,
            ris: ArrayGeometry::new(g.n_ris, g.spacing_ratio)?,
            ms: ArrayGeometry::new(g.n_ms, g.spacing_ratio)?,
        })
    }

    pub fn sounding_config(&self, noise_var: f64) -> SoundingConfig {
        SoundingConfig {
            n0: self.sounding.n0,
            m0: self.sounding.m0,
            t_blocks: self.sounding.t_blocks,
            n_rf: self.geometry.n_rf,
            noise_var,
            seed: self.seed,
        }
    }

    pub fn estimator_config(&self, noise_var: f64) -> EstimatorConfig {
        EstimatorConfig { sounding: self.sounding_config(noise_var), solver: self.solver, reg: self.regularization }
    }

    pub fn channel_seed(&self, r: usize) -> u64 {
        derive_seed(self.seed, &[TAG_CHANNEL, r as u64])
    }

    /// Shared by every scheme and SNR point of realization `r`.
    pub fn sounding_seed(&self, r: usize) -> u64 {
        derive_seed(self.seed, &[TAG_SOUNDING, r as u64])
    }

    pub fn sample_channel(&self, r: usize) -> Result<ChannelRealization> {
        ChannelRealization::sample(
            &mut rng_from_seed(self.channel_seed(r)),
            self.layout()?,
            self.paths.l_br,
            self.paths.l_rm,
            self.profile,
        )
    }
}

/// Genie-aided optimum: phase design and SVD beamformers from the true
/// parameters.
#[derive(Clone, Debug)]
pub struct OptimalLink {
    pub omega: Vec<C64>,
    pub channel: CMat,
    pub beams: BeamformerPair,
}

pub fn optimal_link(real: &ChannelRealization) -> Result<OptimalLink> {
    let truth = angle_difference_set(real);
    let omega = design_omega(&truth.gains, &truth.freq_diffs, &real.layout.ris)?.omega;
    let channel = composite_channel(real, &omega)?;
    let beams = design_beamformers(&channel)?;
    Ok(OptimalLink { omega, channel, beams })
}

fn link_record(h_true: &CMat, h_hat: &CMat, beams: &BeamformerPair, opt: &OptimalLink) -> (LinkSample, f64, f64) {
    let err = h_true - h_hat;
    let link = LinkSample { signal: beams.gain(h_hat), error: beams.gain(&err) };
    let (asd_f, asd_w) = asd(&beams.f_vec(), &beams.w_vec(), &opt.beams.f_vec(), &opt.beams.w_vec());
    (link, asd_f, asd_w)
}

fn scaled_steering(geom: &ArrayGeometry, angle: f64) -> Vec<C64> {
    let a = steering_vector(geom, angle);
    let s = 1.0 / (geom.element_count as f64).sqrt();
    (0..a.nrows()).map(|i| a[i] * s).collect()
}

/// Beams toward the first stage-1 estimates, used only if the reconstructed
/// channel is identically zero.
fn fallback_beams(bundle: &EstimateBundle, layout: &ArrayLayout) -> BeamformerPair {
    BeamformerPair {
        f: scaled_steering(&layout.bs, bundle.theta_br_hat[0]),
        w: scaled_steering(&layout.ms, bundle.phi_rm_hat[0]),
    }
}

/// Scores an estimate bundle: parameter MSEs, then the link built from it.
pub fn evaluate_bundle(bundle: &EstimateBundle, real: &ChannelRealization, opt: &OptimalLink) -> Result<RealizationRecord> {
    let layout = &real.layout;
    let pair = aligned_mse_delta_and_rho(bundle, real)?;
    let omega = design_omega(&bundle.rho_hat, &bundle.freq_diff_hat, &layout.ris)?.omega;
    let h_hat = reconstruct_composite(bundle, &omega, layout)?;
    let h_true = composite_channel(real, &omega)?;
    let beams = match design_beamformers(&h_hat) {
        Ok(b) => b,
        Err(Error::EmptySignal) => fallback_beams(bundle, layout),
        Err(e) => return Err(e),
    };
    let (link, asd_f, asd_w) = link_record(&h_true, &h_hat, &beams, opt);
    Ok(RealizationRecord {
        mse_sin_theta_br: Some(aligned_mse_sines(&real.br.aod, &bundle.theta_br_hat, layout.bs.sine_period())?),
        mse_sin_phi_rm: Some(aligned_mse_sines(&real.rm.aoa, &bundle.phi_rm_hat, layout.ms.sine_period())?),
        mse_sin_delta: Some(pair.mse_sin_delta),
        mse_rho: Some(pair.mse_rho),
        link,
        asd_f,
        asd_w,
        ris_gain: ris_gain(real, &omega)?,
        overhead: bundle.overhead,
    })
}

fn genie_record(real: &ChannelRealization, omega: &[C64], beams: &BeamformerPair, opt: &OptimalLink) -> Result<RealizationRecord> {
    let h = composite_channel(real, omega)?;
    let (link, asd_f, asd_w) = link_record(&h, &h, beams, opt);
    Ok(RealizationRecord {
        mse_sin_theta_br: None,
        mse_sin_phi_rm: None,
        mse_sin_delta: None,
        mse_rho: None,
        link,
        asd_f,
        asd_w,
        ris_gain: ris_gain(real, omega)?,
        overhead: 0,
    })
}

/// Phase vector and beams aligned with path 0 of each hop only.
pub fn los_only_design(real: &ChannelRealization) -> Result<(Vec<C64>, BeamformerPair)> {
    let layout = &real.layout;
    let diff = real.br.aoa[0].sin() - real.rm.aod[0].sin();
    let omega = design_omega(&[C64::new(1.0, 0.0)], &[diff], &layout.ris)?.omega;
    let beams = BeamformerPair {
        f: scaled_steering(&layout.bs, real.br.aod[0]),
        w: scaled_steering(&layout.ms, real.rm.aoa[0]),
    };
    Ok((omega, beams))
}

/// Read-only state shared by all workers of one experiment.
pub struct ExperimentContext {
    pub spec: ExperimentSpec,
    pub dictionary: Option<KroneckerDictionary>,
}

impl ExperimentContext {
    pub fn new(spec: ExperimentSpec) -> Result<Self> {
        spec.validate()?;
        let dictionary = if spec.schemes.contains(&Scheme::Omp) {
            let layout = spec.layout()?;
            Some(build_stage1_dictionary(&layout.bs, &layout.ms))
        } else {
            None
        };
        Ok(Self { spec, dictionary })
    }

    /// Records of every configured scheme for realization `r` at one SNR.
    pub fn run_realization(&self, r: usize, snr_db: f64) -> Result<Vec<RealizationRecord>> {
        let spec = &self.spec;
        let noise_var = SoundingConfig::noise_var_from_snr_db(snr_db);
        let real = spec.sample_channel(r)?;
        let opt = optimal_link(&real)?;
        let cfg = spec.estimator_config(noise_var);
        let sounding_seed = spec.sounding_seed(r);
        spec.schemes
            .iter()
            .map(|&scheme| match scheme {
                Scheme::Proposed => {
                    let b = run_full_pipeline(&cfg, &real, &mut rng_from_seed(sounding_seed))?;
                    evaluate_bundle(&b, &real, &opt)
                }
                Scheme::Partial => {
                    let b = run_partial_pipeline(&cfg, &real, &mut rng_from_seed(sounding_seed))?;
                    evaluate_bundle(&b, &real, &opt)
                }
                Scheme::Omp => {
                    let dict = self.dictionary.as_ref().ok_or_else(|| Error::InvalidArgument("missing OMP dictionary".into()))?;
                    let b = run_omp_pipeline(&cfg.sounding, dict, &real, &mut rng_from_seed(sounding_seed))?;
                    evaluate_bundle(&b, &real, &opt)
                }
                Scheme::PerfectCsi => genie_record(&real, &opt.omega, &opt.beams, &opt),
                Scheme::LosOnly => {
                    let (omega, beams) = los_only_design(&real)?;
                    genie_record(&real, &omega, &beams, &opt)
                }
            })
            .collect()
    }
}

/// Runs every (SNR, realization) cell in parallel and reduces per scheme.
/// Rows come back ordered by scheme (spec order), then SNR (grid order).
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<MetricReport>> {
    let ctx = ExperimentContext::new(spec.clone())?;
    let n = spec.realizations;
    let cells: Vec<(usize, usize)> = (0..spec.snr_grid_db.len()).flat_map(|s| (0..n).map(move |r| (s, r))).collect();
    let results: Vec<Vec<RealizationRecord>> = cells
        .par_iter()
        .map(|&(s, r)| ctx.run_realization(r, spec.snr_grid_db[s]))
        .collect::<Result<_>>()?;
    let mut reports = Vec::new();
    for (k, scheme) in spec.schemes.iter().enumerate() {
        for (s, &snr_db) in spec.snr_grid_db.iter().enumerate() {
            let records: Vec<RealizationRecord> = results[s * n..(s + 1) * n].iter().map(|v| v[k]).collect();
            let noise_var = SoundingConfig::noise_var_from_snr_db(snr_db);
            reports.push(aggregate(scheme.name(), snr_db, &spec.config_id, &records, noise_var, spec.coherence_time)?);
        }
    }
    Ok(reports)
}

/// Writes `<dir>/<scheme>.csv` for each scheme present in `reports`.
pub fn write_reports(dir: &Path, reports: &[MetricReport]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut schemes: Vec<&str> = Vec::new();
    for r in reports {
        if !schemes.contains(&r.scheme.as_str()) {
            schemes.push(&r.scheme);
        }
    }
    for scheme in schemes {
        let path = dir.join(format!("{scheme}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        for r in reports.iter().filter(|r| r.scheme == scheme) {
            w.serialize(r)?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

/// Runs and writes; returns the CSV paths.
pub fn run_and_write(spec: &ExperimentSpec) -> Result<Vec<PathBuf>> {
    let reports = run_experiment(spec)?;
    write_reports(&spec.output, &reports)
}
