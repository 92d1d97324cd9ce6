//! Estimation and link-level metrics with permutation-free alignment.

use serde::{Deserialize, Serialize};

use crate::channel::{angle_difference_set, sine_distance, ChannelRealization};
use crate::error::{Error, Result};
use crate::estimator::{EstimateBundle, EstimationMode};
use crate::linalg::{CVec, C64};

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method,
/// O(n³)). Returns `assign[row] = col`.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Result<Vec<usize>> {
    let n = cost.len();
    if cost.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension("assignment needs a square cost matrix".into()));
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite);
    }
    // Potentials and matching over 1-based columns; column 0 is a sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[matched[j] - 1] = j - 1;
    }
    Ok(assign)
}

/// Optimal matching of estimated angles to true angles on the alias circle of
/// circumference `period` (`1/(d/λ)`). Returns `assign[est] = truth`.
pub fn angle_assignment(true_angles: &[f64], est_angles: &[f64], period: f64) -> Result<Vec<usize>> {
    if true_angles.len() != est_angles.len() || true_angles.is_empty() {
        return Err(Error::Dimension(format!(
            "{} true angles and {} estimates",
            true_angles.len(),
            est_angles.len()
        )));
    }
    let cost: Vec<Vec<f64>> = est_angles
        .iter()
        .map(|e| true_angles.iter().map(|t| sine_distance(t.sin(), e.sin(), period).powi(2)).collect())
        .collect();
    min_cost_assignment(&cost)
}

/// Mean squared sine error after optimal matching of estimates to truth.
/// Errors are measured on the alias circle, since sines one period apart are
/// indistinguishable.
pub fn aligned_mse_sines(true_angles: &[f64], est_angles: &[f64], period: f64) -> Result<f64> {
    let assign = angle_assignment(true_angles, est_angles, period)?;
    Ok(assign
        .iter()
        .enumerate()
        .map(|(e, &t)| sine_distance(true_angles[t].sin(), est_angles[e].sin(), period).powi(2))
        .sum::<f64>()
        / true_angles.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairErrors {
    pub mse_sin_delta: f64,
    pub mse_rho: f64,
    /// Only the sounded pair was scored.
    pub partial: bool,
}

/// MSEs of the frequency difference and the gain product per estimated pair.
///
/// Estimated pair `(m, n)` was sounded with beams at `φ̂[m]` and `θ̂[n]`, so it
/// is scored against the true pair those angles match: the per-hop angle
/// assignments carry the labels over. A partial bundle is scored on its single
/// pair.
pub fn aligned_mse_delta_and_rho(bundle: &EstimateBundle, real: &ChannelRealization) -> Result<PairErrors> {
    let truth = angle_difference_set(real);
    let layout = &real.layout;
    let k = bundle.freq_diff_hat.len();
    let partial = bundle.mode == EstimationMode::Partial;
    if k == 0 || k != bundle.rho_hat.len() || k != bundle.index_map.len() || (!partial && k != truth.freq_diffs.len()) || k > truth.freq_diffs.len() {
        return Err(Error::Dimension(format!("{k} estimated pairs against {} true pairs", truth.freq_diffs.len())));
    }
    let to_bs = angle_assignment(&real.br.aod, &bundle.theta_br_hat, layout.bs.sine_period())?;
    let to_ms = angle_assignment(&real.rm.aoa, &bundle.phi_rm_hat, layout.ms.sine_period())?;
    let period = layout.ris.sine_period();
    let l_rm = real.l_rm();
    let (mut sq_delta, mut sq_rho) = (0.0, 0.0);
    for (i, &(m, n)) in bundle.index_map.iter().enumerate() {
        let j = to_ms[m] + to_bs[n] * l_rm;
        sq_delta += sine_distance(bundle.freq_diff_hat[i], truth.freq_diffs[j], period).powi(2);
        sq_rho += (bundle.rho_hat[i] - truth.gains[j]).norm_sqr();
    }
    Ok(PairErrors { mse_sin_delta: sq_delta / k as f64, mse_rho: sq_rho / k as f64, partial })
}

/// Phase-aligned squared distance `min_ψ ‖a − e^{jψ} b‖²`.
pub fn aligned_sq_distance(a: &CVec, b: &CVec) -> f64 {
    let inner = (b.adjoint() * a).norm();
    (a.squared_norm_l2() + b.squared_norm_l2() - 2.0 * inner).max(0.0)
}

/// Per-realization ASD terms for `(f, w)` against the optimal pair.
pub fn asd(f: &CVec, w: &CVec, f_opt: &CVec, w_opt: &CVec) -> (f64, f64) {
    (aligned_sq_distance(f, f_opt), aligned_sq_distance(w, w_opt))
}

/// `wᴴ Ĥ f` and `wᴴ (H − Ĥ) f` for one realization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkSample {
    pub signal: C64,
    pub error: C64,
}

/// Population variance `mean |x − x̄|²` of complex samples.
pub fn complex_variance(xs: &[C64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean: C64 = xs.iter().sum::<C64>() / n;
    xs.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>() / n
}

/// Per-realization rates `(T_c − T_t)/T_c · log₂(1 + |s|² / (σ² + var(e)))`,
/// with the error variance taken over the whole ensemble.
pub fn effective_se_rates(samples: &[LinkSample], noise_var: f64, t_t: usize, t_c: usize) -> Result<Vec<f64>> {
    if t_t > t_c || t_c == 0 {
        return Err(Error::OverheadExceedsCoherence { training: t_t, coherence: t_c });
    }
    if !(noise_var >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise variance {noise_var}")));
    }
    let errors: Vec<C64> = samples.iter().map(|s| s.error).collect();
    let denom = noise_var + complex_variance(&errors);
    let pre = (t_c - t_t) as f64 / t_c as f64;
    Ok(samples
        .iter()
        .map(|s| {
            let snr = s.signal.norm_sqr() / denom;
            // Zero noise and zero error: the rate is unbounded unless the signal vanishes.
            if snr.is_nan() { 0.0 } else { pre * (1.0 + snr).log2() }
        })
        .collect())
}

pub fn effective_se_bound(samples: &[LinkSample], noise_var: f64, t_t: usize, t_c: usize) -> Result<f64> {
    let rates = effective_se_rates(samples, noise_var, t_t, t_c)?;
    Ok(mean_std(&rates).0)
}

/// Mean and sample standard deviation (`n − 1`; 0 for fewer than two values).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Everything one scheme produces on one realization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub mse_sin_theta_br: Option<f64>,
    pub mse_sin_phi_rm: Option<f64>,
    pub mse_sin_delta: Option<f64>,
    pub mse_rho: Option<f64>,
    pub link: LinkSample,
    pub asd_f: f64,
    pub asd_w: f64,
    pub ris_gain: f64,
    pub overhead: usize,
}

/// One CSV row. Column order is the field order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub scheme: String,
    pub snr_db: f64,
    pub config_id: String,
    pub n_realizations: usize,
    pub overhead: usize,
    pub mse_sin_theta_br: Option<f64>,
    pub mse_sin_theta_br_std: Option<f64>,
    pub mse_sin_phi_rm: Option<f64>,
    pub mse_sin_phi_rm_std: Option<f64>,
    pub mse_sin_delta: Option<f64>,
    pub mse_sin_delta_std: Option<f64>,
    pub mse_rho: Option<f64>,
    pub mse_rho_std: Option<f64>,
    pub se_bound: f64,
    pub se_bound_std: f64,
    pub asd_f: f64,
    pub asd_f_std: f64,
    pub asd_w: f64,
    pub asd_w_std: f64,
    pub ris_gain_mean: f64,
    pub ris_gain_std: f64,
}

pub const REPORT_COLUMNS: [&str; 21] = [
    "scheme",
    "snr_db",
    "config_id",
    "n_realizations",
    "overhead",
    "mse_sin_theta_br",
    "mse_sin_theta_br_std",
    "mse_sin_phi_rm",
    "mse_sin_phi_rm_std",
    "mse_sin_delta",
    "mse_sin_delta_std",
    "mse_rho",
    "mse_rho_std",
    "se_bound",
    "se_bound_std",
    "asd_f",
    "asd_f_std",
    "asd_w",
    "asd_w_std",
    "ris_gain_mean",
    "ris_gain_std",
];

fn optional_stats(records: &[RealizationRecord], pick: impl Fn(&RealizationRecord) -> Option<f64>) -> (Option<f64>, Option<f64>) {
    let vals: Option<Vec<f64>> = records.iter().map(pick).collect();
    match vals {
        Some(v) if !v.is_empty() => {
            let (m, s) = mean_std(&v);
            (Some(m), Some(s))
        }
        _ => (None, None),
    }
}

/// Reduces per-realization records (in realization order) to one row.
/// Every record must report the same overhead.
pub fn aggregate(
    scheme: &str,
    snr_db: f64,
    config_id: &str,
    records: &[RealizationRecord],
    noise_var: f64,
    t_c: usize,
) -> Result<MetricReport> {
    let first = records.first().ok_or_else(|| Error::InvalidArgument("no realizations to aggregate".into()))?;
    let overhead = first.overhead;
    if records.iter().any(|r| r.overhead != overhead) {
        return Err(Error::InvalidArgument("records disagree on training overhead".into()));
    }
    let links: Vec<LinkSample> = records.iter().map(|r| r.link).collect();
    let rates = effective_se_rates(&links, noise_var, overhead, t_c)?;
    let (se_bound, se_bound_std) = mean_std(&rates);
    let col = |f: fn(&RealizationRecord) -> f64| mean_std(&records.iter().map(f).collect::<Vec<_>>());
    let (asd_f, asd_f_std) = col(|r| r.asd_f);
    let (asd_w, asd_w_std) = col(|r| r.asd_w);
    let (ris_gain_mean, ris_gain_std) = col(|r| r.ris_gain);
    let (mse_sin_theta_br, mse_sin_theta_br_std) = optional_stats(records, |r| r.mse_sin_theta_br);
    let (mse_sin_phi_rm, mse_sin_phi_rm_std) = optional_stats(records, |r| r.mse_sin_phi_rm);
    let (mse_sin_delta, mse_sin_delta_std) = optional_stats(records, |r| r.mse_sin_delta);
    let (mse_rho, mse_rho_std) = optional_stats(records, |r| r.mse_rho);
    Ok(MetricReport {
        scheme: scheme.to_string(),
        snr_db,
        config_id: config_id.to_string(),
        n_realizations: records.len(),
        overhead,
        mse_sin_theta_br,
        mse_sin_theta_br_std,
        mse_sin_phi_rm,
        mse_sin_phi_rm_std,
        mse_sin_delta,
        mse_sin_delta_std,
        mse_rho,
        mse_rho_std,
        se_bound,
        se_bound_std,
        asd_f,
        asd_f_std,
        asd_w,
        asd_w_std,
        ris_gain_mean,
        ris_gain_std,
    })
}
