//! Frequency retrieval from a PSD Toeplitz matrix and amplitude fitting.
//!
//! Frequencies here are normalized spatial frequencies in cycles per element,
//! `f = (d/λ)·sin θ`, wrapped to `[−1/2, 1/2)`.

use std::f64::consts::TAU;

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{cis, herm_eig, lstsq, poly_roots, CMat, CVec, C64, ZERO};

/// Wraps a normalized frequency to `[−1/2, 1/2)`.
pub fn wrap_freq(f: f64) -> f64 {
    let w = f - f.round();
    if w >= 0.5 {
        w - 1.0
    } else {
        w
    }
}

/// Vandermonde column `exp(j2π f k)`, `k = 0..n`.
pub fn freq_atom(n: usize, f: f64) -> CVec {
    CVec::from_fn(n, |k| cis(TAU * f * k as f64))
}

/// Correlation sums `c_k = Σ_{q−p=k} C[p, q]` for `k = −(n−1)..=(n−1)`,
/// stored at offset `k + n − 1`.
fn diagonal_sums(c: &CMat) -> Vec<C64> {
    let n = c.nrows();
    let mut out = vec![ZERO; 2 * n - 1];
    for q in 0..n {
        for p in 0..n {
            out[q + n - 1 - p] += c[(p, q)];
        }
    }
    out
}

/// `Q(f) = a(f)ᴴ C a(f)` and its first two derivatives.
fn null_spectrum(sums: &[C64], n: usize, f: f64) -> (f64, f64, f64) {
    let (mut q, mut dq, mut ddq) = (0.0, 0.0, 0.0);
    for (idx, &ck) in sums.iter().enumerate() {
        let k = idx as f64 - (n as f64 - 1.0);
        let e = ck * cis(TAU * f * k);
        q += e.re;
        dq += -(TAU * k) * e.im;
        ddq += -(TAU * k).powi(2) * e.re;
    }
    (q, dq, ddq)
}

fn polish(sums: &[C64], n: usize, f0: f64) -> f64 {
    let max_step = 0.25 / n as f64;
    let mut f = f0;
    let (mut q, _, _) = null_spectrum(sums, n, f);
    for _ in 0..20 {
        let (_, dq, ddq) = null_spectrum(sums, n, f);
        if !(ddq > 0.0) {
            break;
        }
        let step = (dq / ddq).clamp(-max_step, max_step);
        let cand = f - step;
        let (qc, _, _) = null_spectrum(sums, n, cand);
        if !(qc <= q) {
            break;
        }
        let done = step.abs() < 1e-15;
        f = cand;
        q = qc;
        if done {
            break;
        }
    }
    f
}

/// Root-MUSIC on a Hermitian PSD Toeplitz matrix with `order` known sources.
///
/// Returns `order` normalized frequencies sorted ascending.
pub fn extract_frequencies(toeplitz: &CMat, order: usize) -> Result<Vec<f64>> {
    let n = toeplitz.nrows();
    if toeplitz.ncols() != n {
        return Err(Error::Dimension(format!("{}x{} matrix is not square", n, toeplitz.ncols())));
    }
    if order == 0 || order >= n {
        return Err(Error::InvalidArgument(format!("model order {order} for a {n}x{n} matrix")));
    }
    let mut peak = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let v = toeplitz[(i, j)];
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NonFinite);
            }
            peak = peak.max(v.norm());
        }
    }
    if peak == 0.0 {
        return Err(Error::EmptySignal);
    }
    let scaled = Mat::from_fn(n, n, |i, j| toeplitz[(i, j)] / peak);
    let eig = herm_eig(&scaled)?;
    let noise_dim = n - order;
    // C = Eₙ Eₙᴴ over the eigenvectors of the smallest eigenvalues.
    let en = Mat::from_fn(n, noise_dim, |i, j| eig.vectors[(i, j)]);
    let c: CMat = &en * en.adjoint();
    let sums = diagonal_sums(&c);
    let roots = poly_roots(&sums)?;

    struct Candidate {
        freq: f64,
        dist: f64,
        pseudo: f64,
    }
    let mut cands: Vec<Candidate> = roots
        .iter()
        .filter(|z| z.norm() <= 1.0 + 1e-12 && z.norm() > 0.0)
        .map(|z| {
            let freq = wrap_freq(z.arg() / TAU);
            let (q, _, _) = null_spectrum(&sums, n, freq);
            Candidate { freq, dist: (1.0 - z.norm()).abs(), pseudo: 1.0 / q.max(f64::MIN_POSITIVE) }
        })
        .collect();
    cands.sort_by(|a, b| a.dist.total_cmp(&b.dist).then(b.pseudo.total_cmp(&a.pseudo)));

    let min_gap = 0.1 / n as f64;
    let mut chosen: Vec<f64> = Vec::with_capacity(order);
    for cand in &cands {
        if chosen.len() == order {
            break;
        }
        if chosen.iter().all(|&f| wrap_freq(f - cand.freq).abs() > min_gap) {
            chosen.push(cand.freq);
        }
    }
    // Defective spectra: accept near-duplicates rather than return too few.
    for cand in &cands {
        if chosen.len() == order {
            break;
        }
        if !chosen.contains(&cand.freq) {
            chosen.push(cand.freq);
        }
    }
    if chosen.len() < order {
        return Err(Error::Numerical(format!(
            "root-MUSIC produced {} candidate roots for order {order}",
            chosen.len()
        )));
    }
    let mut freqs: Vec<f64> = chosen.into_iter().map(|f| wrap_freq(polish(&sums, n, f))).collect();
    freqs.sort_by(f64::total_cmp);
    Ok(freqs)
}

/// `asin(freq / spacing_ratio)`.
pub fn freq_to_angle(freq: f64, spacing_ratio: f64) -> Result<f64> {
    let s = freq / spacing_ratio;
    if !(s.abs() <= 1.0) {
        return Err(Error::OutOfRange { freq, spacing_ratio });
    }
    Ok(s.asin())
}

/// Least-squares amplitudes of the atoms at `freqs` seen through
/// `measurement` (identity when `None`).
pub fn ls_amplitudes(freqs: &[f64], observations: &CVec, measurement: Option<&CMat>) -> Result<Vec<C64>> {
    let n = match measurement {
        Some(m) => m.ncols(),
        None => observations.nrows(),
    };
    let atoms = Mat::from_fn(n, freqs.len(), |k, l| cis(TAU * freqs[l] * k as f64));
    let design: CMat = match measurement {
        Some(m) => m * &atoms,
        None => atoms,
    };
    let obs = Mat::from_fn(observations.nrows(), 1, |i, _| observations[i]);
    let x = lstsq(&design, &obs, 1e-10)?;
    Ok((0..freqs.len()).map(|l| x[(l, 0)]).collect())
}
