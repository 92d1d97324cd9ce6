//! Two-stage sounding: random stage-1 block, beam-aligned stage-2 blocks.
//!
//! Every block `t` is received as `Y_t = W_tᴴ (H(ω_t) X_t + Z_t)` with `Z_t`
//! i.i.d. CN(0, σ²).

use faer::Mat;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::channel::{composite_channel, steering_matrix, ChannelRealization};
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::rng::{child_rng, complex_normal, unit_phase};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoundingConfig {
    /// Stage-1 pilot count (columns of `X₀`).
    pub n0: usize,
    /// Stage-1 combiner width (columns of `W₀`).
    pub m0: usize,
    /// Number of stage-2 blocks.
    pub t_blocks: usize,
    /// RF chains at the MS.
    pub n_rf: usize,
    /// Noise variance σ² (linear).
    pub noise_var: f64,
    pub seed: u64,
}

impl SoundingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n0 == 0 || self.m0 == 0 || self.t_blocks == 0 {
            return Err(Error::InvalidArgument("N0, M0 and T must be at least 1".into()));
        }
        if self.n_rf == 0 {
            return Err(Error::InvalidArgument("at least one RF chain is required".into()));
        }
        if !(self.noise_var > 0.0 && self.noise_var.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be positive, got {}",
                self.noise_var
            )));
        }
        Ok(())
    }

    /// Pilot symbols spent on one full sounding with the given path counts.
    pub fn training_overhead(&self, l_br: usize, l_rm: usize) -> usize {
        training_overhead(self.n0, self.m0, self.t_blocks, l_br, l_rm, self.n_rf)
    }

    /// Noise variance for an SNR given in dB (SNR = 1/σ²).
    pub fn noise_var_from_snr_db(snr_db: f64) -> f64 {
        10f64.powf(-snr_db / 10.0)
    }
}

/// `N0·⌈M0/N_RF⌉ + T·L_br·⌈L_rm/N_RF⌉`.
pub fn training_overhead(n0: usize, m0: usize, t_blocks: usize, l_br: usize, l_rm: usize, n_rf: usize) -> usize {
    n0 * m0.div_ceil(n_rf) + t_blocks * l_br * l_rm.div_ceil(n_rf)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoundingFrame {
    pub block_index: usize,
    #[serde(with = "crate::io::cmat")]
    pub pilots: CMat,
    #[serde(with = "crate::io::cmat")]
    pub combiner: CMat,
    pub ris_phases: Vec<C64>,
    #[serde(with = "crate::io::cmat")]
    pub received: CMat,
}

fn random_phase_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    let s = 1.0 / (rows as f64).sqrt();
    let mut m = Mat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = unit_phase(rng) * s;
        }
    }
    m
}

fn noise_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, var: f64) -> CMat {
    let mut m = Mat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = complex_normal(rng, var);
        }
    }
    m
}

/// `W_tᴴ (H(ω) X_t + Z_t)`.
pub fn receive<R: Rng + ?Sized>(
    real: &ChannelRealization,
    pilots: &CMat,
    combiner: &CMat,
    omega: &[C64],
    noise_var: f64,
    rng: &mut R,
) -> Result<CMat> {
    let h = composite_channel(real, omega)?;
    if pilots.nrows() != h.ncols() || combiner.nrows() != h.nrows() {
        return Err(Error::Dimension(format!(
            "pilots with {} rows and combiner with {} rows for a {}x{} channel",
            pilots.nrows(),
            combiner.nrows(),
            h.nrows(),
            h.ncols()
        )));
    }
    let z = noise_matrix(rng, h.nrows(), pilots.ncols(), noise_var);
    let hx: CMat = &h * pilots + z;
    Ok(combiner.adjoint() * &hx)
}

/// Stage-1 block (`t = 0`): unit-modulus random pilots, combiner and RIS
/// phases, columns of `X₀` and `W₀` normalized to unit norm.
pub fn gen_stage1_frame<R: Rng + ?Sized>(
    cfg: &SoundingConfig,
    real: &ChannelRealization,
    rng: &mut R,
) -> Result<SoundingFrame> {
    cfg.validate()?;
    let layout = &real.layout;
    let pilots = random_phase_matrix(rng, layout.bs.element_count, cfg.n0);
    let combiner = random_phase_matrix(rng, layout.ms.element_count, cfg.m0);
    let ris_phases: Vec<C64> = (0..layout.ris.element_count).map(|_| unit_phase(rng)).collect();
    let received = receive(real, &pilots, &combiner, &ris_phases, cfg.noise_var, rng)?;
    Ok(SoundingFrame { block_index: 0, pilots, combiner, ris_phases, received })
}

/// Stage-2 blocks `t = 1..=T` with beams steered at the stage-1 estimates.
///
/// Each block draws one `u64` from `rng` and splits it into independent RIS
/// phase and noise streams, so the phase sequence does not depend on the
/// beam widths.
pub fn gen_stage2_frames<R: RngCore + ?Sized>(
    cfg: &SoundingConfig,
    real: &ChannelRealization,
    theta_br_hat: &[f64],
    phi_rm_hat: &[f64],
    rng: &mut R,
) -> Result<Vec<SoundingFrame>> {
    cfg.validate()?;
    if theta_br_hat.is_empty() || phi_rm_hat.is_empty() {
        return Err(Error::InvalidArgument("stage-2 beams need at least one angle per side".into()));
    }
    let layout = &real.layout;
    let pilots = stage2_beams(&layout.bs, theta_br_hat);
    let combiner = stage2_beams(&layout.ms, phi_rm_hat);
    let n_r = layout.ris.element_count;
    (1..=cfg.t_blocks)
        .map(|t| {
            let block_seed = rng.next_u64();
            let mut phase_rng = child_rng(block_seed, &[0]);
            let mut noise_rng = child_rng(block_seed, &[1]);
            let ris_phases: Vec<C64> = (0..n_r).map(|_| unit_phase(&mut phase_rng)).collect();
            let received = receive(real, &pilots, &combiner, &ris_phases, cfg.noise_var, &mut noise_rng)?;
            Ok(SoundingFrame {
                block_index: t,
                pilots: pilots.clone(),
                combiner: combiner.clone(),
                ris_phases,
                received,
            })
        })
        .collect()
}

/// `A(angles) / √N`.
pub fn stage2_beams(geom: &crate::channel::ArrayGeometry, angles: &[f64]) -> CMat {
    let a = steering_matrix(geom, angles);
    let s = 1.0 / (geom.element_count as f64).sqrt();
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

/// Stage-2 observations regrouped per unknown pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Stage2Rows {
    /// Row `i`, column `t` holds `vec(Y_t)[i]`.
    pub y: CMat,
    /// Row `t` is `ω_tᵀ`.
    pub omega_bar: CMat,
}

pub fn stack_stage2_rows(frames: &[SoundingFrame]) -> Result<Stage2Rows> {
    let first = frames
        .first()
        .ok_or_else(|| Error::InvalidArgument("no stage-2 frames".into()))?;
    let (r, c) = (first.received.nrows(), first.received.ncols());
    let n_r = first.ris_phases.len();
    for f in frames {
        if f.received.nrows() != r || f.received.ncols() != c || f.ris_phases.len() != n_r {
            return Err(Error::Dimension(format!(
                "frame {} has a {}x{} block and {} RIS phases, expected {r}x{c} and {n_r}",
                f.block_index,
                f.received.nrows(),
                f.received.ncols(),
                f.ris_phases.len()
            )));
        }
    }
    let y = Mat::from_fn(r * c, frames.len(), |i, t| frames[t].received[(i % r, i / r)]);
    let omega_bar = Mat::from_fn(frames.len(), n_r, |t, k| frames[t].ris_phases[k]);
    Ok(Stage2Rows { y, omega_bar })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{angle_difference_set, steering_vector_from_freq, ArrayLayout, GainProfile, PathSet};
    use crate::linalg::{frob, ZERO};
    use crate::rng::rng_from_seed;

    fn cfg(noise_var: f64) -> SoundingConfig {
        SoundingConfig { n0: 10, m0: 10, t_blocks: 10, n_rf: 8, noise_var, seed: 0 }
    }

    fn realization(seed: u64, l_br: usize, l_rm: usize) -> ChannelRealization {
        let mut rng = rng_from_seed(seed);
        ChannelRealization::sample(&mut rng, ArrayLayout::half_wavelength(16, 64, 16), l_br, l_rm, GainProfile::Homogeneous)
            .unwrap()
    }

    #[test]
    fn overhead_examples() {
        assert_eq!(training_overhead(10, 10, 10, 2, 2, 8), 40);
        assert_eq!(training_overhead(14, 14, 14, 2, 2, 8), 56);
        assert_eq!(training_overhead(1, 1, 0, 1, 1, 1), 1);
        assert_eq!(cfg(1.0).training_overhead(1, 1), 30);
    }

    #[test]
    fn overhead_is_monotone() {
        let base = [3, 5, 4, 2, 3, 2];
        let f = |v: [usize; 6]| training_overhead(v[0], v[1], v[2], v[3], v[4], v[5]);
        for k in 0..5 {
            let mut bumped = base;
            bumped[k] += 1;
            assert!(f(bumped) >= f(base));
        }
        // More RF chains never cost more.
        let mut more_rf = base;
        more_rf[5] += 1;
        assert!(f(more_rf) <= f(base));
    }

    #[test]
    fn stage1_frame_shapes_and_norms() {
        let real = realization(1, 2, 2);
        let mut rng = rng_from_seed(2);
        let f = gen_stage1_frame(&cfg(0.1), &real, &mut rng).unwrap();
        assert_eq!((f.received.nrows(), f.received.ncols()), (10, 10));
        for j in 0..10 {
            let nx: f64 = (0..16).map(|i| f.pilots[(i, j)].norm_sqr()).sum();
            let nw: f64 = (0..16).map(|i| f.combiner[(i, j)].norm_sqr()).sum();
            assert!((nx - 1.0).abs() < 1e-12 && (nw - 1.0).abs() < 1e-12);
        }
        assert!(f.ris_phases.iter().all(|w| (w.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn zero_channel_noiseless_gives_zero_block() {
        let mut real = realization(3, 1, 1);
        real.br = PathSet::new(real.br.aod.clone(), real.br.aoa.clone(), vec![ZERO]).unwrap();
        let mut rng = rng_from_seed(4);
        let f = gen_stage1_frame(&cfg(1e-300), &real, &mut rng).unwrap();
        assert!(frob(&f.received) < 1e-140);
    }

    #[test]
    fn stage1_block_matches_direct_product() {
        let real = realization(5, 2, 2);
        let mut rng = rng_from_seed(6);
        let f = gen_stage1_frame(&cfg(1e-300), &real, &mut rng).unwrap();
        let h_br = real.h_br().unwrap();
        let h_rm = real.h_rm().unwrap();
        // Y₀ = W₀ᴴ H_rm Ω₀ H_br X₀ entry by entry.
        for a in 0..10 {
            for b in 0..10 {
                let mut acc = ZERO;
                for i in 0..16 {
                    for k in 0..64 {
                        for j in 0..16 {
                            acc += f.combiner[(i, a)].conj() * h_rm[(i, k)] * f.ris_phases[k] * h_br[(k, j)] * f.pilots[(j, b)];
                        }
                    }
                }
                assert!((acc - f.received[(a, b)]).norm() < 1e-12 * (1.0 + acc.norm()));
            }
        }
    }

    #[test]
    fn stage2_rows_follow_per_pair_model_with_exact_beams() {
        // Orthogonal beams: sines exactly on the DFT grid of the 16-element arrays.
        let layout = ArrayLayout::half_wavelength(16, 64, 16);
        let g = |s: f64| s.asin();
        let real = ChannelRealization {
            br: PathSet::new(vec![g(-0.5), g(0.25)], vec![g(0.3), g(-0.6)], vec![C64::new(0.8, 0.3), C64::new(-0.4, 0.9)]).unwrap(),
            rm: PathSet::new(vec![g(0.1), g(-0.2)], vec![g(0.0), g(0.75)], vec![C64::new(1.1, -0.2), C64::new(0.2, 0.5)]).unwrap(),
            layout,
        };
        let mut rng = rng_from_seed(7);
        let frames = gen_stage2_frames(&cfg(1e-300), &real, &real.br.aod, &real.rm.aoa, &mut rng).unwrap();
        assert_eq!(frames.len(), 10);
        let rows = stack_stage2_rows(&frames).unwrap();
        assert_eq!((rows.y.nrows(), rows.y.ncols()), (4, 10));
        let diffs = angle_difference_set(&real);
        for i in 0..4 {
            let a = steering_vector_from_freq(&layout.ris, diffs.freq_diffs[i]);
            for t in 0..10 {
                let mut acc = ZERO;
                for k in 0..64 {
                    acc += rows.omega_bar[(t, k)] * a[k];
                }
                let expected = 16.0 * diffs.gains[i] * acc;
                assert!((rows.y[(i, t)] - expected).norm() < 1e-8 * (1.0 + expected.norm()));
            }
        }
    }

    #[test]
    fn stage2_pilots_are_fixed_and_phases_vary() {
        let real = realization(8, 2, 2);
        let mut rng = rng_from_seed(9);
        let frames = gen_stage2_frames(&cfg(0.1), &real, &real.br.aod, &real.rm.aoa, &mut rng).unwrap();
        for f in &frames[1..] {
            assert_eq!(f.pilots, frames[0].pilots);
            assert_eq!(f.combiner, frames[0].combiner);
        }
        for a in 0..frames.len() {
            for b in a + 1..frames.len() {
                assert_ne!(frames[a].ris_phases, frames[b].ris_phases);
            }
        }
        for j in 0..2 {
            let n: f64 = (0..16).map(|i| frames[0].pilots[(i, j)].norm_sqr()).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn stage2_phases_do_not_depend_on_beam_count() {
        let real = realization(10, 2, 2);
        let full = gen_stage2_frames(&cfg(0.1), &real, &real.br.aod, &real.rm.aoa, &mut rng_from_seed(11)).unwrap();
        let one = gen_stage2_frames(&cfg(0.1), &real, &real.br.aod[..1], &real.rm.aoa[..1], &mut rng_from_seed(11)).unwrap();
        for (a, b) in full.iter().zip(&one) {
            assert_eq!(a.ris_phases, b.ris_phases);
        }
    }

    #[test]
    fn permuting_beams_permutes_rows() {
        let real = realization(12, 2, 2);
        let fwd = gen_stage2_frames(&cfg(1e-300), &real, &real.br.aod, &real.rm.aoa, &mut rng_from_seed(13)).unwrap();
        let rev_theta: Vec<f64> = real.br.aod.iter().rev().copied().collect();
        let rev = gen_stage2_frames(&cfg(1e-300), &real, &rev_theta, &real.rm.aoa, &mut rng_from_seed(13)).unwrap();
        let a = stack_stage2_rows(&fwd).unwrap();
        let b = stack_stage2_rows(&rev).unwrap();
        // Row i = m + 2n; reversing n swaps rows {0,1} with {2,3}.
        for (i, j) in [(0, 2), (1, 3), (2, 0), (3, 1)] {
            for t in 0..10 {
                assert!((a.y[(i, t)] - b.y[(j, t)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn single_block_gives_single_column() {
        let real = realization(14, 1, 1);
        let c = SoundingConfig { t_blocks: 1, ..cfg(0.1) };
        let frames = gen_stage2_frames(&c, &real, &real.br.aod, &real.rm.aoa, &mut rng_from_seed(15)).unwrap();
        assert_eq!(stack_stage2_rows(&frames).unwrap().y.ncols(), 1);
    }

    #[test]
    fn noise_power_per_entry_matches_variance() {
        let mut real = realization(16, 1, 1);
        real.br = real.br.scaled(ZERO);
        let c = cfg(0.7);
        let mut rng = rng_from_seed(17);
        let mut acc = 0.0;
        let mut count = 0usize;
        while count < 100_000 {
            let f = gen_stage1_frame(&c, &real, &mut rng).unwrap();
            for j in 0..f.received.ncols() {
                for i in 0..f.received.nrows() {
                    acc += f.received[(i, j)].norm_sqr();
                    count += 1;
                }
            }
        }
        let p = acc / count as f64;
        assert!((p / 0.7 - 1.0).abs() < 0.05, "{p}");
    }

    #[test]
    fn stage2_rejects_empty_estimates() {
        let real = realization(18, 1, 1);
        let err = gen_stage2_frames(&cfg(0.1), &real, &[], &real.rm.aoa, &mut rng_from_seed(1));
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn frames_round_trip_through_json() {
        let real = realization(19, 1, 2);
        let f = gen_stage1_frame(&cfg(0.1), &real, &mut rng_from_seed(20)).unwrap();
        let text = serde_json::to_string(&f).unwrap();
        let back: SoundingFrame = serde_json::from_str(&text).unwrap();
        assert_eq!(back, f);
    }
}
