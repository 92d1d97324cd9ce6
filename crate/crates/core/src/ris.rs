//! RIS phase design, composite-channel reconstruction and SVD beamformers.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::channel::{
    angle_difference_set, check_unit_modulus, steering_matrix, steering_matrix_from_freqs, steering_vector_from_freq,
    ArrayGeometry, ArrayLayout, ChannelRealization,
};
use crate::error::{Error, Result};
use crate::estimator::EstimateBundle;
use crate::linalg::{cis, herm_eig, top_singular, CMat, CVec, C64, ONE, ZERO};

#[derive(Clone, Debug, PartialEq)]
pub struct OmegaDesign {
    pub omega: Vec<C64>,
    /// Set when every estimate was zero and the all-ones vector was used.
    pub fallback: bool,
}

/// Phase vector maximizing `Σᵢ |ρ̂ᵢ ωᵀ α(θ̃ᵢ)|²` before projection:
/// the dominant eigenvector `u` of `E Eᴴ`, `E = [α(θ̃₁) … ] diag(ρ̂)`, mapped
/// to `ω = exp(−j∠u)` and rotated so that `ω₀ = 1`.
pub fn design_omega(rho_hat: &[C64], freq_diff_hat: &[f64], geom_ris: &ArrayGeometry) -> Result<OmegaDesign> {
    if rho_hat.is_empty() || rho_hat.len() != freq_diff_hat.len() {
        return Err(Error::Dimension(format!(
            "{} gains and {} frequency differences",
            rho_hat.len(),
            freq_diff_hat.len()
        )));
    }
    let n = geom_ris.element_count;
    if rho_hat.iter().all(|r| *r == ZERO) {
        return Ok(OmegaDesign { omega: vec![ONE; n], fallback: true });
    }
    let a = steering_matrix_from_freqs(geom_ris, freq_diff_hat);
    let e = Mat::from_fn(n, rho_hat.len(), |k, i| a[(k, i)] * rho_hat[i]);
    let eig = herm_eig(&(&e * e.adjoint()))?;
    let top = n - 1;
    let mut omega: Vec<C64> = (0..n)
        .map(|k| {
            let u = eig.vectors[(k, top)];
            if u == ZERO { ONE } else { cis(-u.arg()) }
        })
        .collect();
    let rot = omega[0].conj();
    for w in &mut omega {
        *w = cis((*w * rot).arg());
    }
    Ok(OmegaDesign { omega, fallback: false })
}

/// Estimated effective channel `Ĝ` (`L_rm × L_br`) under `omega`; pairs
/// absent from `index_map` are zero.
pub fn estimated_effective_channel(bundle: &EstimateBundle, omega: &[C64], geom_ris: &ArrayGeometry) -> Result<CMat> {
    bundle.validate()?;
    check_unit_modulus(omega, geom_ris.element_count)?;
    let mut g = Mat::zeros(bundle.phi_rm_hat.len(), bundle.theta_br_hat.len());
    for (i, &(m, n)) in bundle.index_map.iter().enumerate() {
        let a = steering_vector_from_freq(geom_ris, bundle.freq_diff_hat[i]);
        let resp: C64 = omega.iter().enumerate().map(|(k, w)| w * a[k]).sum();
        g[(m, n)] = bundle.rho_hat[i] * resp;
    }
    Ok(g)
}

/// `Ĥ = A(φ̂_rm) Ĝ Aᴴ(θ̂_br)`.
pub fn reconstruct_composite(bundle: &EstimateBundle, omega: &[C64], layout: &ArrayLayout) -> Result<CMat> {
    let g = estimated_effective_channel(bundle, omega, &layout.ris)?;
    let a_ms = steering_matrix(&layout.ms, &bundle.phi_rm_hat);
    let a_bs = steering_matrix(&layout.bs, &bundle.theta_br_hat);
    Ok(&a_ms * &g * a_bs.adjoint())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamformerPair {
    /// BS precoder, unit norm.
    pub f: Vec<C64>,
    /// MS combiner, unit norm.
    pub w: Vec<C64>,
}

impl BeamformerPair {
    pub fn f_vec(&self) -> CVec {
        CVec::from_fn(self.f.len(), |i| self.f[i])
    }

    pub fn w_vec(&self) -> CVec {
        CVec::from_fn(self.w.len(), |i| self.w[i])
    }

    /// `wᴴ H f`.
    pub fn gain(&self, h: &CMat) -> C64 {
        let hf = h * self.f_vec();
        (0..self.w.len()).map(|i| self.w[i].conj() * hf[i]).sum()
    }
}

/// Rotates `v` so its first entry with magnitude above `1e−12·‖v‖∞` is real
/// and positive.
pub fn canonical_phase(v: &CVec) -> Vec<C64> {
    let peak = (0..v.nrows()).map(|i| v[i].norm()).fold(0.0, f64::max);
    let rot = (0..v.nrows())
        .map(|i| v[i])
        .find(|z| z.norm() > 1e-12 * peak)
        .map_or(ONE, |z| z.conj() / z.norm());
    (0..v.nrows()).map(|i| v[i] * rot).collect()
}

/// Dominant right (`f`) and left (`w`) singular vectors of `h`.
pub fn design_beamformers(h: &CMat) -> Result<BeamformerPair> {
    if h.nrows() == 0 || h.ncols() == 0 || (0..h.ncols()).all(|j| (0..h.nrows()).all(|i| h[(i, j)] == ZERO)) {
        return Err(Error::EmptySignal);
    }
    let (_, u, v) = top_singular(h)?;
    Ok(BeamformerPair { f: canonical_phase(&v), w: canonical_phase(&u) })
}

/// `‖Aᴴ(θ_rm) diag(ω) A(φ_br)‖_F² / N_R²` with the true RIS-side angles.
pub fn ris_gain(real: &ChannelRealization, omega: &[C64]) -> Result<f64> {
    let n = real.layout.ris.element_count;
    check_unit_modulus(omega, n)?;
    let diffs = angle_difference_set(real).freq_diffs;
    let total: f64 = diffs
        .iter()
        .map(|&f| {
            let a = steering_vector_from_freq(&real.layout.ris, f);
            omega.iter().enumerate().map(|(k, w)| w * a[k]).sum::<C64>().norm_sqr()
        })
        .sum();
    Ok(total / (n * n) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{composite_channel, ArrayLayout, GainProfile, PathSet};
    use crate::estimator::EstimationMode;
    use crate::linalg::{frob, singular_values};
    use crate::rng::{complex_normal, rng_from_seed, unit_phase};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn exact_bundle(real: &ChannelRealization) -> EstimateBundle {
        let d = angle_difference_set(real);
        EstimateBundle {
            mode: EstimationMode::Full,
            theta_br_hat: real.br.aod.clone(),
            phi_rm_hat: real.rm.aoa.clone(),
            freq_diff_hat: d.freq_diffs,
            rho_hat: d.gains,
            index_map: d.index_map,
            overhead: 0,
            diagnostics: Vec::new(),
            empty_pairs: 0,
        }
    }

    fn objective(rho: &[C64], freqs: &[f64], geom: &ArrayGeometry, omega: &[C64]) -> f64 {
        rho.iter()
            .zip(freqs)
            .map(|(r, &f)| {
                let a = steering_vector_from_freq(geom, f);
                (r * omega.iter().enumerate().map(|(k, w)| w * a[k]).sum::<C64>()).norm_sqr()
            })
            .sum()
    }

    #[test]
    fn single_pair_gives_conjugate_steering() {
        let g = ArrayGeometry::half_wavelength(64);
        let f = 0.37;
        let d = design_omega(&[c(0.3, -2.0)], &[f], &g).unwrap();
        assert!(!d.fallback);
        for (k, w) in d.omega.iter().enumerate() {
            let expect = cis(-std::f64::consts::PI * f * k as f64);
            assert!((w - expect).norm() < 1e-9, "{k}");
        }
        let a = steering_vector_from_freq(&g, f);
        let resp: C64 = d.omega.iter().enumerate().map(|(k, w)| w * a[k]).sum();
        assert!((resp.norm_sqr() - 64.0 * 64.0).abs() < 1e-6);
    }

    #[test]
    fn global_gain_phase_is_irrelevant() {
        let g = ArrayGeometry::half_wavelength(16);
        let rho = [c(1.0, 0.2), c(-0.4, 0.7), c(0.1, 0.1)];
        let freqs = [0.1, -0.45, 0.8];
        let a = design_omega(&rho, &freqs, &g).unwrap().omega;
        let rot: Vec<C64> = rho.iter().map(|r| r * cis(1.3) * 2.5).collect();
        let b = design_omega(&rot, &freqs, &g).unwrap().omega;
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).norm() < 1e-8));
        assert!(a.iter().all(|w| (w.norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn zero_estimates_fall_back_to_all_ones() {
        let d = design_omega(&[ZERO, ZERO], &[0.1, 0.2], &ArrayGeometry::half_wavelength(8)).unwrap();
        assert!(d.fallback);
        assert!(d.omega.iter().all(|w| *w == ONE));
    }

    #[test]
    fn two_pairs_near_random_search_optimum() {
        let g = ArrayGeometry::half_wavelength(8);
        let rho = [c(1.0, 0.3), c(-0.5, 0.6)];
        let freqs = [0.23, -0.61];
        let design = design_omega(&rho, &freqs, &g).unwrap().omega;
        let achieved = objective(&rho, &freqs, &g, &design);
        let mut rng = rng_from_seed(17);
        let mut best = 0.0f64;
        for _ in 0..1_000_000 {
            let cand: Vec<C64> = (0..8).map(|_| unit_phase(&mut rng)).collect();
            best = best.max(objective(&rho, &freqs, &g, &cand));
        }
        assert!(achieved >= 0.95 * best, "achieved {achieved}, search {best}");
    }

    #[test]
    fn exact_estimates_reconstruct_composite() {
        let layout = ArrayLayout::half_wavelength(8, 16, 6);
        let real = ChannelRealization::sample(&mut rng_from_seed(2), layout, 2, 2, GainProfile::Homogeneous).unwrap();
        let b = exact_bundle(&real);
        let omega = design_omega(&b.rho_hat, &b.freq_diff_hat, &layout.ris).unwrap().omega;
        let h_hat = reconstruct_composite(&b, &omega, &layout).unwrap();
        let h = composite_channel(&real, &omega).unwrap();
        assert!(frob(&(&h_hat - &h)) < 1e-8 * frob(&h));

        let mut zero = b.clone();
        zero.rho_hat = vec![ZERO; 4];
        assert_eq!(frob(&reconstruct_composite(&zero, &omega, &layout).unwrap()), 0.0);
    }

    #[test]
    fn beamformers_recover_rank_one_factors() {
        let mut rng = rng_from_seed(5);
        let f0 = CVec::from_fn(5, |_| complex_normal(&mut rng, 1.0));
        let w0 = CVec::from_fn(4, |_| complex_normal(&mut rng, 1.0));
        let (f0, w0) = (&f0 / f0.norm_l2(), &w0 / w0.norm_l2());
        let h = Mat::from_fn(4, 5, |i, j| w0[i] * f0[j].conj() * c(3.0, -1.0));
        let bf = design_beamformers(&h).unwrap();
        let (fv, wv) = (bf.f_vec(), bf.w_vec());
        assert!(((fv.adjoint() * &f0).norm() - 1.0).abs() < 1e-10);
        assert!(((wv.adjoint() * &w0).norm() - 1.0).abs() < 1e-10);
        assert!(bf.f[0].im.abs() < 1e-15 && bf.f[0].re > 0.0);
        assert!(matches!(design_beamformers(&Mat::zeros(3, 3)), Err(Error::EmptySignal)));
    }

    #[test]
    fn beamformers_match_power_iteration_and_scale_invariance() {
        let mut rng = rng_from_seed(6);
        let h = Mat::from_fn(6, 7, |_, _| complex_normal(&mut rng, 1.0));
        let bf = design_beamformers(&h).unwrap();
        let smax = singular_values(&h).unwrap()[0];
        assert!((bf.gain(&h).norm() - smax).abs() < 1e-10);
        // Power iteration on Hᴴ H.
        let hh = h.adjoint() * &h;
        let mut v = CVec::from_fn(7, |i| c(1.0, i as f64 * 0.1));
        for _ in 0..500 {
            let nv = &hh * &v;
            v = &nv / nv.norm_l2();
        }
        let v = canonical_phase(&v);
        assert!(bf.f.iter().zip(&v).all(|(a, b)| (a - b).norm() < 1e-8));
        let scaled = &h * faer::Scale(c(7.5, 0.0));
        assert_eq!(design_beamformers(&scaled).unwrap().f.len(), 7);
        let bs = design_beamformers(&scaled).unwrap();
        assert!(bs.f.iter().zip(&bf.f).all(|(a, b)| (a - b).norm() < 1e-10));
    }

    #[test]
    fn ris_gain_is_one_for_matched_single_path() {
        let layout = ArrayLayout::half_wavelength(4, 64, 4);
        let real = ChannelRealization {
            br: PathSet::new(vec![0.3], vec![0.7], vec![c(1.0, 0.0)]).unwrap(),
            rm: PathSet::new(vec![-0.2], vec![0.1], vec![c(0.0, 1.0)]).unwrap(),
            layout,
        };
        let b = exact_bundle(&real);
        let omega = design_omega(&b.rho_hat, &b.freq_diff_hat, &layout.ris).unwrap().omega;
        assert!((ris_gain(&real, &omega).unwrap() - 1.0).abs() < 1e-9);
        let mut rng = rng_from_seed(10);
        let draws = 10_000;
        let mut mean = 0.0;
        for _ in 0..draws {
            let w: Vec<C64> = (0..64).map(|_| unit_phase(&mut rng)).collect();
            let g = ris_gain(&real, &w).unwrap();
            assert!((0.0..=1.0).contains(&g));
            mean += g / draws as f64;
        }
        assert!((mean * 64.0 - 1.0).abs() < 0.1, "mean {mean}");
    }
}
