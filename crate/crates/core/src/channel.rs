//! Geometric two-hop channel model (BS → RIS → MS) on uniform linear arrays.
//!
//! Conventions used throughout the crate:
//!
//! * a steering vector has entries `exp(j·2π·(d/λ)·k·x)`, `k = 0..N`, where
//!   `x` is the directional sine of an angle (or a difference of sines);
//! * hop matrices follow `H = Σ ρₗ α_rx(aoaₗ) α_txᴴ(aodₗ)`;
//! * the pair index `i` of the effective channel runs over `vec(G)` in
//!   column-major order, so `i = m + n·L_rm` with `m` the RIS→MS path and `n`
//!   the BS→RIS path (all indices zero-based).

use faer::Mat;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cis, CMat, CVec, C64, ZERO};
use crate::rng::complex_normal;

/// Tolerance for the unit-modulus check on RIS phase vectors.
pub const UNIT_MODULUS_TOL: f64 = 1e-9;

/// Rejection budget when drawing a separated angle set.
pub const SAMPLING_ATTEMPTS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub element_count: usize,
    /// Element spacing over carrier wavelength, `d/λ`.
    pub spacing_ratio: f64,
}

impl ArrayGeometry {
    pub fn new(element_count: usize, spacing_ratio: f64) -> Result<Self> {
        if element_count == 0 {
            return Err(Error::InvalidArgument("array needs at least one element".into()));
        }
        if !(spacing_ratio > 0.0 && spacing_ratio.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "spacing ratio must be positive, got {spacing_ratio}"
            )));
        }
        Ok(Self { element_count, spacing_ratio })
    }

    pub fn half_wavelength(element_count: usize) -> Self {
        Self { element_count, spacing_ratio: 0.5 }
    }

    /// Sine shift that leaves the steering vector unchanged, `1/(d/λ)`.
    pub fn sine_period(&self) -> f64 {
        1.0 / self.spacing_ratio
    }

    /// Default minimum path separation in directional sine, `4/N`.
    pub fn default_separation(&self) -> f64 {
        4.0 / self.element_count as f64
    }
}

/// The three arrays of the link.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayLayout {
    pub bs: ArrayGeometry,
    pub ris: ArrayGeometry,
    pub ms: ArrayGeometry,
}

impl ArrayLayout {
    pub fn half_wavelength(n_bs: usize, n_ris: usize, n_ms: usize) -> Self {
        Self {
            bs: ArrayGeometry::half_wavelength(n_bs),
            ris: ArrayGeometry::half_wavelength(n_ris),
            ms: ArrayGeometry::half_wavelength(n_ms),
        }
    }
}

/// Resolvable paths of one hop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    /// Angles of departure at the transmitting array (radians).
    pub aod: Vec<f64>,
    /// Angles of arrival at the receiving array (radians).
    pub aoa: Vec<f64>,
    pub gains: Vec<C64>,
}

impl PathSet {
    pub fn new(aod: Vec<f64>, aoa: Vec<f64>, gains: Vec<C64>) -> Result<Self> {
        let set = Self { aod, aoa, gains };
        set.validate()?;
        Ok(set)
    }

    pub fn count(&self) -> usize {
        self.gains.len()
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.gains.len();
        if l == 0 || self.aod.len() != l || self.aoa.len() != l {
            return Err(Error::Dimension(format!(
                "path set with {} AoDs, {} AoAs and {} gains",
                self.aod.len(),
                self.aoa.len(),
                l
            )));
        }
        Ok(())
    }

    /// Copy with every gain multiplied by `c`.
    pub fn scaled(&self, c: C64) -> Self {
        Self {
            aod: self.aod.clone(),
            aoa: self.aoa.clone(),
            gains: self.gains.iter().map(|&g| g * c).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainProfile {
    /// Every path gain is CN(0, 1).
    Homogeneous,
    /// The first path is CN(0, 1); the others are CN(0, 0.01).
    Inhomogeneous,
}

impl GainProfile {
    pub fn variance(self, path_index: usize) -> f64 {
        match self {
            GainProfile::Homogeneous => 1.0,
            GainProfile::Inhomogeneous if path_index == 0 => 1.0,
            GainProfile::Inhomogeneous => 0.01,
        }
    }
}

/// Minimum pairwise directional-sine separation at each end of a hop,
/// measured on the circle of circumference `period` (sines `s` and `s ± 1/(d/λ)`
/// give the same steering vector).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Separation {
    pub tx: f64,
    pub rx: f64,
    pub tx_period: f64,
    pub rx_period: f64,
}

impl Separation {
    pub fn for_arrays(tx: &ArrayGeometry, rx: &ArrayGeometry) -> Self {
        Self {
            tx: tx.default_separation(),
            rx: rx.default_separation(),
            tx_period: tx.sine_period(),
            rx_period: rx.sine_period(),
        }
    }

    /// Both ends at half-wavelength spacing.
    pub fn half_wavelength(tx: f64, rx: f64) -> Self {
        Self { tx, rx, tx_period: 2.0, rx_period: 2.0 }
    }
}

/// Distance between two directional sines on the alias circle.
pub fn sine_distance(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    d.min(period - d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    /// BS → RIS hop: AoDs at the BS, AoAs at the RIS.
    pub br: PathSet,
    /// RIS → MS hop: AoDs at the RIS, AoAs at the MS.
    pub rm: PathSet,
    pub layout: ArrayLayout,
}

/// Frequency differences seen by the RIS, in `vec(G)` order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleDifferenceSet {
    /// `sin φ_br[n] − sin θ_rm[m]`, within `[−2, 2]`.
    pub freq_diffs: Vec<f64>,
    /// Zero-based `(m, n)` for each entry.
    pub index_map: Vec<(usize, usize)>,
    /// Gain products `ρ_rm[m] · ρ_br[n]`.
    pub gains: Vec<C64>,
}

/// Zero-based `(m, n)` of pair `i` for `l_rm` RIS→MS paths.
pub fn pair_index(i: usize, l_rm: usize) -> (usize, usize) {
    (i % l_rm, i / l_rm)
}

pub fn steering_vector(geom: &ArrayGeometry, angle: f64) -> CVec {
    steering_vector_from_freq(geom, angle.sin())
}

/// Steering vector evaluated at a directional sine (or a difference of sines).
pub fn steering_vector_from_freq(geom: &ArrayGeometry, freq: f64) -> CVec {
    let step = std::f64::consts::TAU * geom.spacing_ratio * freq;
    CVec::from_fn(geom.element_count, |k| cis(step * k as f64))
}

pub fn steering_matrix(geom: &ArrayGeometry, angles: &[f64]) -> CMat {
    let sines: Vec<f64> = angles.iter().map(|a| a.sin()).collect();
    steering_matrix_from_freqs(geom, &sines)
}

pub fn steering_matrix_from_freqs(geom: &ArrayGeometry, freqs: &[f64]) -> CMat {
    let two_pi_d = std::f64::consts::TAU * geom.spacing_ratio;
    Mat::from_fn(geom.element_count, freqs.len(), |k, l| cis(two_pi_d * k as f64 * freqs[l]))
}

fn draw_separated_angles<R: Rng + ?Sized>(rng: &mut R, count: usize, min_sep: f64, period: f64) -> Result<Vec<f64>> {
    use std::f64::consts::FRAC_PI_2;
    // Packing bound: count·sep < period on the alias circle, (count−1)·sep < 2
    // on the open sine interval when the circle is longer.
    let span = if period <= 2.0 { period / min_sep } else { 2.0 / min_sep + 1.0 };
    if count > 1 && count as f64 >= span {
        return Err(Error::InvalidArgument(format!(
            "{count} paths cannot be separated by {min_sep} in directional sine"
        )));
    }
    for _ in 0..SAMPLING_ATTEMPTS {
        let angles: Vec<f64> = (0..count)
            .map(|_| -FRAC_PI_2 + std::f64::consts::PI * rng.random::<f64>())
            .collect();
        let ok = (0..count).all(|a| {
            (a + 1..count).all(|b| sine_distance(angles[a].sin(), angles[b].sin(), period) > min_sep)
        });
        if ok {
            return Ok(angles);
        }
    }
    Err(Error::SamplingFailed { attempts: SAMPLING_ATTEMPTS })
}

/// Draws `count` paths with angles uniform on `(−π/2, π/2)`, separated at both
/// ends, and complex Gaussian gains following `profile`.
pub fn sample_paths<R: Rng + ?Sized>(
    rng: &mut R,
    count: usize,
    separation: Separation,
    profile: GainProfile,
) -> Result<PathSet> {
    if count == 0 {
        return Err(Error::InvalidArgument("a hop needs at least one path".into()));
    }
    let aod = draw_separated_angles(rng, count, separation.tx, separation.tx_period)?;
    let aoa = draw_separated_angles(rng, count, separation.rx, separation.rx_period)?;
    let gains = (0..count).map(|l| complex_normal(rng, profile.variance(l))).collect();
    Ok(PathSet { aod, aoa, gains })
}

impl ChannelRealization {
    pub fn sample<R: Rng + ?Sized>(
        rng: &mut R,
        layout: ArrayLayout,
        l_br: usize,
        l_rm: usize,
        profile: GainProfile,
    ) -> Result<Self> {
        let br = sample_paths(rng, l_br, Separation::for_arrays(&layout.bs, &layout.ris), profile)?;
        let rm = sample_paths(rng, l_rm, Separation::for_arrays(&layout.ris, &layout.ms), profile)?;
        Ok(Self { br, rm, layout })
    }

    pub fn l_br(&self) -> usize {
        self.br.count()
    }

    pub fn l_rm(&self) -> usize {
        self.rm.count()
    }

    pub fn validate(&self) -> Result<()> {
        self.br.validate()?;
        self.rm.validate()
    }

    /// `H_br` (N_R × N_B).
    pub fn h_br(&self) -> Result<CMat> {
        hop_matrix(&self.br, &self.layout.ris, &self.layout.bs)
    }

    /// `H_rm` (N_M × N_R).
    pub fn h_rm(&self) -> Result<CMat> {
        hop_matrix(&self.rm, &self.layout.ms, &self.layout.ris)
    }

    /// Directional sines `sin θ_br` at the BS.
    pub fn sin_theta_br(&self) -> Vec<f64> {
        self.br.aod.iter().map(|a| a.sin()).collect()
    }

    /// Directional sines `sin φ_rm` at the MS.
    pub fn sin_phi_rm(&self) -> Vec<f64> {
        self.rm.aoa.iter().map(|a| a.sin()).collect()
    }
}

/// `Σ ρₗ α_rx(aoaₗ) α_txᴴ(aodₗ)`, i.e. `A_rx diag(ρ) A_txᴴ`.
pub fn hop_matrix(paths: &PathSet, geom_rx: &ArrayGeometry, geom_tx: &ArrayGeometry) -> Result<CMat> {
    paths.validate()?;
    let a_rx = steering_matrix(geom_rx, &paths.aoa);
    let a_tx = steering_matrix(geom_tx, &paths.aod);
    let weighted = Mat::from_fn(a_rx.nrows(), paths.count(), |k, l| a_rx[(k, l)] * paths.gains[l]);
    Ok(&weighted * a_tx.adjoint())
}

pub fn check_unit_modulus(omega: &[C64], expected_len: usize) -> Result<()> {
    if omega.len() != expected_len {
        return Err(Error::Dimension(format!(
            "RIS phase vector of length {} for {} elements",
            omega.len(),
            expected_len
        )));
    }
    let worst = omega.iter().map(|w| (w.norm() - 1.0).abs()).fold(0.0, f64::max);
    if worst > UNIT_MODULUS_TOL {
        return Err(Error::NotUnitModulus(worst));
    }
    Ok(())
}

/// `G = diag(ρ_rm) Aᴴ(θ_rm) diag(ω) A(φ_br) diag(ρ_br)`, shape `L_rm × L_br`.
pub fn effective_channel(real: &ChannelRealization, omega: &[C64]) -> Result<CMat> {
    real.validate()?;
    check_unit_modulus(omega, real.layout.ris.element_count)?;
    let a_theta_rm = steering_matrix(&real.layout.ris, &real.rm.aod);
    let a_phi_br = steering_matrix(&real.layout.ris, &real.br.aoa);
    let n_r = real.layout.ris.element_count;
    let l_rm = real.l_rm();
    let l_br = real.l_br();
    Ok(Mat::from_fn(l_rm, l_br, |m, n| {
        let mut acc = ZERO;
        for k in 0..n_r {
            acc += a_theta_rm[(k, m)].conj() * omega[k] * a_phi_br[(k, n)];
        }
        real.rm.gains[m] * acc * real.br.gains[n]
    }))
}

/// Composite BS → MS channel `A(φ_rm) G Aᴴ(θ_br)`, shape `N_M × N_B`.
pub fn composite_channel(real: &ChannelRealization, omega: &[C64]) -> Result<CMat> {
    let g = effective_channel(real, omega)?;
    let a_phi_rm = steering_matrix(&real.layout.ms, &real.rm.aoa);
    let a_theta_br = steering_matrix(&real.layout.bs, &real.br.aod);
    Ok(&a_phi_rm * &g * a_theta_br.adjoint())
}

/// Composite channel through the hop matrices, `H_rm diag(ω) H_br`.
pub fn composite_via_hops(real: &ChannelRealization, omega: &[C64]) -> Result<CMat> {
    check_unit_modulus(omega, real.layout.ris.element_count)?;
    let h_rm = real.h_rm()?;
    let h_br = real.h_br()?;
    let scaled = Mat::from_fn(h_rm.nrows(), h_rm.ncols(), |i, k| h_rm[(i, k)] * omega[k]);
    Ok(&scaled * &h_br)
}

pub fn angle_difference_set(real: &ChannelRealization) -> AngleDifferenceSet {
    let l_rm = real.l_rm();
    let total = l_rm * real.l_br();
    let mut set = AngleDifferenceSet {
        freq_diffs: Vec::with_capacity(total),
        index_map: Vec::with_capacity(total),
        gains: Vec::with_capacity(total),
    };
    for i in 0..total {
        let (m, n) = pair_index(i, l_rm);
        set.freq_diffs.push(real.br.aoa[n].sin() - real.rm.aod[m].sin());
        set.index_map.push((m, n));
        set.gains.push(real.rm.gains[m] * real.br.gains[n]);
    }
    set
}
