//! On-grid OMP baseline with the same two-stage sounding.

use faer::Mat;
use rand::RngCore;

use crate::channel::{pair_index, steering_matrix_from_freqs, ArrayGeometry, ArrayLayout, ChannelRealization};
use crate::error::{Error, Result};
use crate::estimator::{EstimateBundle, EstimationMode};
use crate::linalg::{lstsq, CMat, CVec, C64, ZERO};
use crate::sounding::{gen_stage1_frame, gen_stage2_frames, stack_stage2_rows, SoundingConfig, SoundingFrame, Stage2Rows};

/// Steering atoms on `2N` uniformly spaced normalized frequencies in
/// `[−1/2, 1/2)`. `grid_freqs` holds the matching directional sines (or
/// sine differences), so column `k` is `steering_vector_from_freq(grid_freqs[k])`.
#[derive(Clone, Debug)]
pub struct GridDictionary {
    pub atoms: CMat,
    pub grid_freqs: Vec<f64>,
    pub grid_size: usize,
}

impl GridDictionary {
    pub fn new(geom: &ArrayGeometry) -> Self {
        let grid_size = 2 * geom.element_count;
        let grid_freqs: Vec<f64> = (0..grid_size)
            .map(|k| (-0.5 + k as f64 / grid_size as f64) / geom.spacing_ratio)
            .collect();
        let atoms = steering_matrix_from_freqs(geom, &grid_freqs);
        Self { atoms, grid_freqs, grid_size }
    }
}

/// `conj(A_B) ⊗ A_M` over the BS and MS grids; column `p·G_M + q` pairs BS
/// grid point `p` with MS grid point `q`.
#[derive(Clone, Debug)]
pub struct KroneckerDictionary {
    pub bs: GridDictionary,
    pub ms: GridDictionary,
    pub atoms: CMat,
}

impl KroneckerDictionary {
    pub fn column_pair(&self, col: usize) -> (usize, usize) {
        (col / self.ms.grid_size, col % self.ms.grid_size)
    }
}

pub fn build_stage1_dictionary(geom_bs: &ArrayGeometry, geom_ms: &ArrayGeometry) -> KroneckerDictionary {
    let bs = GridDictionary::new(geom_bs);
    let ms = GridDictionary::new(geom_ms);
    let (nb, nm) = (geom_bs.element_count, geom_ms.element_count);
    let atoms = Mat::from_fn(nb * nm, bs.grid_size * ms.grid_size, |row, col| {
        let (p, q) = (col / ms.grid_size, col % ms.grid_size);
        bs.atoms[(row / nm, p)].conj() * ms.atoms[(row % nm, q)]
    });
    KroneckerDictionary { bs, ms, atoms }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OmpResult {
    /// Selected columns in selection order.
    pub support: Vec<usize>,
    pub coefficients: Vec<C64>,
    /// Residual norm after each iteration.
    pub residual_norms: Vec<f64>,
}

fn col_norms(d: &CMat) -> Vec<f64> {
    (0..d.ncols())
        .map(|j| (0..d.nrows()).map(|i| d[(i, j)].norm_sqr()).sum::<f64>().sqrt())
        .collect()
}

/// `|d_kᴴ r| / ‖d_k‖` for every column; zero columns score 0.
pub fn normalized_correlations(dict: &CMat, norms: &[f64], residual: &CVec) -> Vec<f64> {
    let corr = dict.adjoint() * residual;
    (0..dict.ncols())
        .map(|k| if norms[k] > 0.0 { corr[k].norm() / norms[k] } else { 0.0 })
        .collect()
}

/// OMP over an already-measured dictionary (`measurement · atoms`).
pub fn omp_effective(dict: &CMat, observation: &CVec, sparsity: usize) -> Result<OmpResult> {
    if sparsity == 0 {
        return Err(Error::InvalidArgument("OMP sparsity must be at least 1".into()));
    }
    if dict.nrows() != observation.nrows() {
        return Err(Error::Dimension(format!(
            "dictionary has {} rows, observation {}",
            dict.nrows(),
            observation.nrows()
        )));
    }
    let norms = col_norms(dict);
    let y = Mat::from_fn(observation.nrows(), 1, |i, _| observation[i]);
    let mut residual = observation.clone();
    let mut out = OmpResult { support: Vec::new(), coefficients: Vec::new(), residual_norms: Vec::new() };
    for _ in 0..sparsity.min(dict.ncols()) {
        let scores = normalized_correlations(dict, &norms, &residual);
        let mut best: Option<(usize, f64)> = None;
        for (k, &s) in scores.iter().enumerate() {
            if out.support.contains(&k) {
                continue;
            }
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((k, s));
            }
        }
        match best {
            Some((k, s)) if s > 0.0 => out.support.push(k),
            _ if out.support.is_empty() => return Err(Error::EmptySignal),
            _ => break,
        }
        let sub = Mat::from_fn(dict.nrows(), out.support.len(), |i, j| dict[(i, out.support[j])]);
        let coef = lstsq(&sub, &y, 1e-12)?;
        out.coefficients = (0..out.support.len()).map(|j| coef[(j, 0)]).collect();
        let fit = &sub * &coef;
        residual = CVec::from_fn(observation.nrows(), |i| observation[i] - fit[(i, 0)]);
        out.residual_norms.push(residual.norm_l2());
    }
    Ok(out)
}

/// Standard OMP of `observation ≈ measurement · atoms · c`.
pub fn omp_recover(measurement: &CMat, observation: &CVec, atoms: &CMat, sparsity: usize) -> Result<OmpResult> {
    if measurement.ncols() != atoms.nrows() {
        return Err(Error::Dimension(format!(
            "measurement has {} columns, atoms {} rows",
            measurement.ncols(),
            atoms.nrows()
        )));
    }
    omp_effective(&(measurement * atoms), observation, sparsity)
}

/// `(X₀ᵀ ⊗ W₀ᴴ) · (conj(A_B) ⊗ A_M)` built from its two factors.
pub fn stage1_effective_dictionary(frame0: &SoundingFrame, dict: &KroneckerDictionary) -> CMat {
    let left: CMat = frame0.pilots.transpose() * dict.bs.atoms.conjugate();
    let right: CMat = frame0.combiner.adjoint() * &dict.ms.atoms;
    let (r, gm) = (right.nrows(), dict.ms.grid_size);
    Mat::from_fn(left.nrows() * r, dict.atoms.ncols(), |row, col| {
        left[(row / r, col / gm)] * right[(row % r, col % gm)]
    })
}

/// Picks `count` distinct grid indices, highest coefficient energy first,
/// padding with the best-correlated unused indices.
fn pick_axis(energy: &[f64], fallback: &[f64], count: usize) -> Vec<usize> {
    let order = |score: &[f64]| {
        let mut idx: Vec<usize> = (0..score.len()).collect();
        idx.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
        idx
    };
    let mut picked: Vec<usize> = order(energy).into_iter().filter(|&k| energy[k] > 0.0).take(count).collect();
    for k in order(fallback) {
        if picked.len() >= count {
            break;
        }
        if !picked.contains(&k) {
            picked.push(k);
        }
    }
    picked
}

fn sines_to_sorted_angles(mut sines: Vec<f64>) -> Vec<f64> {
    sines.sort_by(f64::total_cmp);
    sines.into_iter().map(|s| s.clamp(-1.0, 1.0).asin()).collect()
}

/// Stage-1 angles `(theta_br_hat, phi_rm_hat)` from the Kronecker OMP.
pub fn omp_stage1(frame0: &SoundingFrame, dict: &KroneckerDictionary, l_br: usize, l_rm: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let eff = stage1_effective_dictionary(frame0, dict);
    let y0 = &frame0.received;
    let y = CVec::from_fn(y0.nrows() * y0.ncols(), |i| y0[(i % y0.nrows(), i / y0.nrows())]);
    let res = omp_effective(&eff, &y, l_br * l_rm)?;

    let (gb, gm) = (dict.bs.grid_size, dict.ms.grid_size);
    let (mut e_bs, mut e_ms) = (vec![0.0; gb], vec![0.0; gm]);
    for (&col, c) in res.support.iter().zip(&res.coefficients) {
        let (p, q) = dict.column_pair(col);
        e_bs[p] += c.norm_sqr();
        e_ms[q] += c.norm_sqr();
    }
    let scores = normalized_correlations(&eff, &col_norms(&eff), &y);
    let (mut f_bs, mut f_ms) = (vec![0.0f64; gb], vec![0.0f64; gm]);
    for (col, &s) in scores.iter().enumerate() {
        let (p, q) = dict.column_pair(col);
        f_bs[p] = f_bs[p].max(s);
        f_ms[q] = f_ms[q].max(s);
    }
    let theta = pick_axis(&e_bs, &f_bs, l_br).into_iter().map(|p| dict.bs.grid_freqs[p]).collect();
    let phi = pick_axis(&e_ms, &f_ms, l_rm).into_iter().map(|q| dict.ms.grid_freqs[q]).collect();
    Ok((sines_to_sorted_angles(theta), sines_to_sorted_angles(phi)))
}

/// Per-row single-atom OMP over the RIS difference grid.
/// Returns `(freq_diff_hat, rho_hat, empty_rows)`.
pub fn omp_stage2(rows: &Stage2Rows, layout: &ArrayLayout) -> Result<(Vec<f64>, Vec<C64>, usize)> {
    let grid = GridDictionary::new(&layout.ris);
    let scale = ((layout.bs.element_count * layout.ms.element_count) as f64).sqrt();
    let eff: CMat = (&rows.omega_bar * &grid.atoms) * faer::Scale(C64::new(scale, 0.0));
    let (mut freqs, mut rhos, mut empty) = (Vec::new(), Vec::new(), 0);
    for i in 0..rows.y.nrows() {
        let y = CVec::from_fn(rows.y.ncols(), |t| rows.y[(i, t)]);
        match omp_effective(&eff, &y, 1) {
            Ok(r) => {
                freqs.push(grid.grid_freqs[r.support[0]]);
                rhos.push(r.coefficients[0]);
            }
            Err(Error::EmptySignal) => {
                freqs.push(0.0);
                rhos.push(ZERO);
                empty += 1;
            }
            Err(e) => return Err(e),
        }
    }
    Ok((freqs, rhos, empty))
}

/// OMP counterpart of the full pipeline; draws the same frames from `rng`
/// as the atomic-norm pipeline up to the stage-2 beam directions.
pub fn run_omp_pipeline<R: RngCore + ?Sized>(
    sounding: &SoundingConfig,
    dict: &KroneckerDictionary,
    real: &ChannelRealization,
    rng: &mut R,
) -> Result<EstimateBundle> {
    let (l_br, l_rm) = (real.l_br(), real.l_rm());
    let frame0 = gen_stage1_frame(sounding, real, rng)?;
    let (theta, phi) = omp_stage1(&frame0, dict, l_br, l_rm)?;
    let frames = gen_stage2_frames(sounding, real, &theta, &phi, rng)?;
    let rows = stack_stage2_rows(&frames)?;
    let (freq_diff_hat, rho_hat, empty_pairs) = omp_stage2(&rows, &real.layout)?;
    Ok(EstimateBundle {
        mode: EstimationMode::Full,
        theta_br_hat: theta,
        phi_rm_hat: phi,
        freq_diff_hat,
        rho_hat,
        index_map: (0..l_br * l_rm).map(|i| pair_index(i, l_rm)).collect(),
        overhead: sounding.training_overhead(l_br, l_rm),
        diagnostics: Vec::new(),
        empty_pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{steering_vector_from_freq, PathSet};
    use crate::linalg::kron_vec;
    use crate::rng::{complex_normal, rng_from_seed};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn grid_sizes_and_atoms() {
        let d = build_stage1_dictionary(&ArrayGeometry::half_wavelength(16), &ArrayGeometry::half_wavelength(16));
        assert_eq!(d.atoms.ncols(), 1024);
        assert_eq!(d.bs.grid_size, 32);
        assert!((d.bs.grid_freqs[0] + 1.0).abs() < 1e-15);
        assert!((d.bs.grid_freqs[31] - (1.0 - 1.0 / 16.0)).abs() < 1e-15);
        for k in [0, 17, 1023] {
            let n: f64 = (0..256).map(|i| d.atoms[(i, k)].norm_sqr()).sum::<f64>().sqrt();
            assert!((n - 16.0).abs() < 1e-12);
        }
        let ris = GridDictionary::new(&ArrayGeometry::half_wavelength(64));
        assert_eq!(ris.atoms.ncols(), 128);
        let g = ArrayGeometry::half_wavelength(64);
        let a = steering_vector_from_freq(&g, ris.grid_freqs[77]);
        assert!((0..64).all(|i| (a[i] - ris.atoms[(i, 77)]).norm() < 1e-13));
    }

    #[test]
    fn kronecker_column_matches_direct_product() {
        let (gb, gm) = (ArrayGeometry::half_wavelength(4), ArrayGeometry::half_wavelength(3));
        let d = build_stage1_dictionary(&gb, &gm);
        let (p, q) = (5, 2);
        let col = p * d.ms.grid_size + q;
        assert_eq!(d.column_pair(col), (p, q));
        let ab = steering_vector_from_freq(&gb, d.bs.grid_freqs[p]);
        let am = steering_vector_from_freq(&gm, d.ms.grid_freqs[q]);
        let direct = kron_vec(&CVec::from_fn(4, |i| ab[i].conj()), &am);
        assert!((0..12).all(|i| (direct[i] - d.atoms[(i, col)]).norm() < 1e-14));
    }

    #[test]
    fn single_atom_is_exact() {
        let mut rng = rng_from_seed(3);
        let dict = GridDictionary::new(&ArrayGeometry::half_wavelength(8)).atoms;
        let meas = Mat::from_fn(6, 8, |_, _| complex_normal(&mut rng, 1.0));
        let coef = c(0.7, -1.2);
        let y = CVec::from_fn(6, |i| (0..8).map(|k| meas[(i, k)] * dict[(k, 9)]).sum::<C64>() * coef);
        let r = omp_recover(&meas, &y, &dict, 1).unwrap();
        assert_eq!(r.support, vec![9]);
        assert!((r.coefficients[0] - coef).norm() < 1e-10);
        assert!(omp_recover(&meas, &y, &dict, 0).is_err());
        assert!(matches!(omp_effective(&dict, &CVec::zeros(8), 1), Err(Error::EmptySignal)));
    }

    #[test]
    fn two_atoms_match_ls_oracle_and_residual_decreases() {
        let mut rng = rng_from_seed(4);
        let dict = GridDictionary::new(&ArrayGeometry::half_wavelength(16)).atoms;
        let meas = Mat::from_fn(12, 16, |_, _| complex_normal(&mut rng, 1.0));
        let eff = &meas * &dict;
        let mut y = CVec::from_fn(12, |i| eff[(i, 4)] * c(1.0, 0.5) + eff[(i, 20)] * c(-0.8, 0.3));
        for i in 0..12 {
            y[i] += complex_normal(&mut rng, 1e-6);
        }
        let r = omp_effective(&eff, &y, 2).unwrap();
        let mut s = r.support.clone();
        s.sort();
        assert_eq!(s, vec![4, 20]);
        let sub = Mat::from_fn(12, 2, |i, j| eff[(i, r.support[j])]);
        // Normal-equations oracle.
        let g = sub.adjoint() * &sub;
        let b = sub.adjoint() * &y;
        let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
        let x0 = (g[(1, 1)] * b[0] - g[(0, 1)] * b[1]) / det;
        let x1 = (g[(0, 0)] * b[1] - g[(1, 0)] * b[0]) / det;
        assert!((r.coefficients[0] - x0).norm() < 1e-9);
        assert!((r.coefficients[1] - x1).norm() < 1e-9);
        assert!(r.residual_norms.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn ties_break_to_lowest_index() {
        let dict = Mat::from_fn(2, 3, |i, j| if i == 0 && j != 1 { c(1.0, 0.0) } else { ZERO });
        let y = CVec::from_fn(2, |i| if i == 0 { c(1.0, 0.0) } else { ZERO });
        assert_eq!(omp_effective(&dict, &y, 1).unwrap().support, vec![0]);
    }

    fn on_grid_realization(layout: ArrayLayout, p: usize, q: usize, r_freq: f64) -> ChannelRealization {
        let bs = GridDictionary::new(&layout.bs);
        let ms = GridDictionary::new(&layout.ms);
        let theta = bs.grid_freqs[p].asin();
        let phi = ms.grid_freqs[q].asin();
        // RIS angles chosen so that sin φ_br − sin θ_rm = r_freq.
        let br = PathSet::new(vec![theta], vec![(r_freq / 2.0).asin()], vec![c(0.9, 0.4)]).unwrap();
        let rm = PathSet::new(vec![(-r_freq / 2.0).asin()], vec![phi], vec![c(-0.5, 1.1)]).unwrap();
        ChannelRealization { br, rm, layout }
    }

    #[test]
    fn noiseless_on_grid_pipeline_is_exact() {
        let layout = ArrayLayout::half_wavelength(16, 32, 16);
        let ris_grid = GridDictionary::new(&layout.ris);
        let real = on_grid_realization(layout, 7, 22, ris_grid.grid_freqs[40]);
        let dict = build_stage1_dictionary(&layout.bs, &layout.ms);
        let sounding = SoundingConfig { n0: 10, m0: 10, t_blocks: 10, n_rf: 1, noise_var: 1e-20, seed: 0 };
        let frame0 = gen_stage1_frame(&sounding, &real, &mut rng_from_seed(1)).unwrap();
        let generic = omp_recover(
            &crate::linalg::kron(&frame0.pilots.transpose().to_owned(), &frame0.combiner.adjoint().to_owned()),
            &CVec::from_fn(100, |i| frame0.received[(i % 10, i / 10)]),
            &dict.atoms,
            1,
        )
        .unwrap();
        assert_eq!(generic.support, vec![7 * 32 + 22]);

        let b = run_omp_pipeline(&sounding, &dict, &real, &mut rng_from_seed(1)).unwrap();
        assert!((b.theta_br_hat[0] - real.br.aod[0]).abs() < 1e-12);
        assert!((b.phi_rm_hat[0] - real.rm.aoa[0]).abs() < 1e-12);
        assert!((b.freq_diff_hat[0] - ris_grid.grid_freqs[40]).abs() < 1e-12);
        let rho = real.rm.gains[0] * real.br.gains[0];
        assert!((b.rho_hat[0] - rho).norm() < 1e-8 * rho.norm());
    }

    #[test]
    fn stage2_matches_exhaustive_grid_search() {
        let layout = ArrayLayout::half_wavelength(4, 16, 4);
        let mut rng = rng_from_seed(8);
        let rows = Stage2Rows {
            y: Mat::from_fn(3, 5, |_, _| complex_normal(&mut rng, 1.0)),
            omega_bar: Mat::from_fn(5, 16, |_, _| crate::rng::unit_phase(&mut rng)),
        };
        let (freqs, _, _) = omp_stage2(&rows, &layout).unwrap();
        let grid = GridDictionary::new(&layout.ris);
        for i in 0..3 {
            let best = (0..grid.grid_size)
                .map(|k| {
                    let d: Vec<C64> = (0..5).map(|t| (0..16).map(|j| rows.omega_bar[(t, j)] * grid.atoms[(j, k)]).sum()).collect();
                    let nd: f64 = d.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                    let corr: C64 = (0..5).map(|t| d[t].conj() * rows.y[(i, t)]).sum();
                    (k, corr.norm() / nd)
                })
                .fold((0, -1.0), |acc, (k, s)| if s > acc.1 { (k, s) } else { acc });
            assert_eq!(freqs[i], grid.grid_freqs[best.0]);
        }
    }

    #[test]
    fn axis_padding_uses_fallback_scores() {
        let picked = pick_axis(&[0.0, 3.0, 0.0, 0.0], &[0.1, 0.9, 0.5, 0.7], 3);
        assert_eq!(picked, vec![1, 3, 2]);
    }
}
