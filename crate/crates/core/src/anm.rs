//! Atomic-norm denoising SDPs with a Toeplitz block, solved by ADMM.
//!
//! The problem family is
//!
//! ```text
//! minimize   reg/(2c)·Tr(Z) + reg/(2N)·Tr(Toep(u)) + ½‖Y − s·A·U‖²_F
//! subject to [[Toep(u), U], [Uᴴ, Z]] ⪰ 0
//! ```
//!
//! with `U` of size `N × c`. The splitting alternates a closed-form prox step
//! in `(u, U, Z)` with a projection of the stacked block onto the PSD cone.

use std::path::Path;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{herm_eig, herm_eigenvalues, hermitian_defect, hermitian_part, CMat, C64, ZERO};

#[derive(Clone, Debug)]
pub struct ToeplitzSdpProblem {
    /// Observations `Y` (`rows × c`).
    pub observations: CMat,
    /// Sensing matrix `A` (`rows × N`).
    pub sensing: CMat,
    pub reg: f64,
    /// Multiplier `s` on the sensing matrix.
    pub scale: f64,
}

impl ToeplitzSdpProblem {
    pub fn amb_dim(&self) -> usize {
        self.sensing.ncols()
    }

    pub fn cols(&self) -> usize {
        self.observations.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let (y, a) = (&self.observations, &self.sensing);
        if y.nrows() != a.nrows() {
            return Err(Error::Dimension(format!(
                "{} observation rows against a sensing matrix with {} rows",
                y.nrows(),
                a.nrows()
            )));
        }
        if a.ncols() == 0 || y.ncols() == 0 {
            return Err(Error::Dimension("empty Toeplitz block or observation".into()));
        }
        if !(self.reg > 0.0) || !self.scale.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "regularization must be positive (got {}) and scale finite (got {})",
                self.reg, self.scale
            )));
        }
        let finite = |m: &CMat| {
            (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].re.is_finite() && m[(i, j)].im.is_finite()))
        };
        if !self.reg.is_finite() || !finite(y) || !finite(a) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    /// Objective value at `(u, U, Z)`, ignoring feasibility.
    pub fn objective(&self, u: &[C64], u_hat: &CMat, z_hat: &CMat) -> f64 {
        let n = self.amb_dim() as f64;
        let c = self.cols() as f64;
        let tr_z: f64 = (0..z_hat.nrows()).map(|i| z_hat[(i, i)].re).sum();
        let fit: CMat = &self.observations - faer::Scale(C64::new(self.scale, 0.0)) * (&self.sensing * u_hat);
        self.reg / (2.0 * c) * tr_z + self.reg / (2.0 * n) * n * u[0].re + 0.5 * fit.squared_norm_l2()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
    /// Initial penalty parameter, relative to the regularization weight on
    /// the normalized data.
    pub step: f64,
    /// Iterations between penalty adaptations; 0 disables adaptation.
    pub adapt_interval: usize,
    /// Over-relaxation factor in `(0, 2)`.
    pub relaxation: f64,
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            eps_abs: 1e-6,
            eps_rel: 1e-6,
            step: 1.0,
            adapt_interval: 50,
            relaxation: 1.6,
            record_trace: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be positive".into()));
        }
        if !(self.eps_abs >= 0.0 && self.eps_rel >= 0.0 && self.eps_abs + self.eps_rel > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be nonnegative and not both zero".into()));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidArgument(format!("step must be positive, got {}", self.step)));
        }
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
            return Err(Error::InvalidArgument(format!(
                "relaxation must lie in (0, 2), got {}",
                self.relaxation
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub step: f64,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToeplitzSdpSolution {
    /// First row of the Toeplitz block.
    pub u1: Vec<C64>,
    pub u_hat: CMat,
    pub z_hat: CMat,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
    /// Diagonal shift added at the end to make the block exactly PSD.
    pub feasibility_shift: f64,
    pub trace: Vec<IterationRecord>,
}

impl ToeplitzSdpSolution {
    pub fn toeplitz(&self) -> CMat {
        toeplitz_from_row(&self.u1)
    }

    /// The stacked block `[[Toep(u), U], [Uᴴ, Z]]`.
    pub fn block(&self) -> CMat {
        stack_block(&self.toeplitz(), &self.u_hat, &self.z_hat)
    }

    pub fn write_trace_csv(&self, path: &Path) -> Result<()> {
        write_trace_csv(&self.trace, path)
    }
}

pub fn write_trace_csv(trace: &[IterationRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in trace {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Hermitian Toeplitz matrix with first row `u` (the diagonal uses `Re u[0]`).
pub fn toeplitz_from_row(u: &[C64]) -> CMat {
    let n = u.len();
    Mat::from_fn(n, n, |p, q| {
        if q > p {
            u[q - p]
        } else if p > q {
            u[p - q].conj()
        } else {
            C64::new(u[0].re, 0.0)
        }
    })
}

/// Adjoint of [`toeplitz_from_row`] under the real inner product `Re tr(Aᴴ B)`.
pub fn adjoint_toeplitz(m: &CMat) -> Vec<C64> {
    let n = m.nrows();
    let mut out = vec![ZERO; n];
    out[0] = C64::new((0..n).map(|p| m[(p, p)].re).sum(), 0.0);
    for (k, slot) in out.iter_mut().enumerate().skip(1) {
        let mut acc = ZERO;
        for p in 0..n - k {
            acc += m[(p, p + k)] + m[(p + k, p)].conj();
        }
        *slot = acc;
    }
    out
}

fn stack_block(t: &CMat, u: &CMat, z: &CMat) -> CMat {
    let n = t.nrows();
    let c = z.nrows();
    Mat::from_fn(n + c, n + c, |i, j| match (i < n, j < n) {
        (true, true) => t[(i, j)],
        (true, false) => u[(i, j - n)],
        (false, true) => u[(j, i - n)].conj(),
        (false, false) => z[(i - n, j - n)],
    })
}

/// Projection onto the PSD cone in Frobenius norm.
pub fn psd_project(m: &CMat) -> Result<CMat> {
    let scale = (0..m.ncols())
        .flat_map(|j| (0..m.nrows()).map(move |i| (i, j)))
        .map(|(i, j)| m[(i, j)].norm())
        .fold(1.0f64, f64::max);
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
    }
    let defect = hermitian_defect(m);
    if defect > 1e-10 * scale {
        return Err(Error::NotHermitian(defect));
    }
    project_psd_unchecked(m)
}

fn project_psd_unchecked(m: &CMat) -> Result<CMat> {
    let n = m.nrows();
    let eig = herm_eig(m)?;
    let keep: Vec<usize> = (0..n).filter(|&i| eig.values[i] > 0.0).collect();
    if keep.is_empty() {
        return Ok(Mat::zeros(n, n));
    }
    let half = Mat::from_fn(n, keep.len(), |i, j| eig.vectors[(i, keep[j])] * eig.values[keep[j]].sqrt());
    let p: CMat = &half * half.adjoint();
    // Exact Hermitian symmetry keeps later eigendecompositions on the lower triangle honest.
    Ok(Mat::from_fn(n, n, |i, j| 0.5 * (p[(i, j)] + p[(j, i)].conj())))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegKind {
    /// MMV problem over the MS array.
    Stage1Ms,
    /// MMV problem over the BS array.
    Stage1Bs,
    /// SMV problems over the RIS.
    Stage2,
}

/// Multipliers `c` in `c·√(σ²·N·ln N)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegularizationConstants {
    pub stage1_ms: f64,
    pub stage1_bs: f64,
    pub stage2: f64,
}

impl Default for RegularizationConstants {
    fn default() -> Self {
        Self { stage1_ms: 1.0, stage1_bs: 1.0, stage2: 1.0 }
    }
}

impl RegularizationConstants {
    pub fn get(&self, kind: RegKind) -> f64 {
        match kind {
            RegKind::Stage1Ms => self.stage1_ms,
            RegKind::Stage1Bs => self.stage1_bs,
            RegKind::Stage2 => self.stage2,
        }
    }
}

/// `c·√(σ²·dim·ln dim)`.
pub fn regularization_weight(kind: RegKind, consts: &RegularizationConstants, sigma2: f64, dim: usize) -> Result<f64> {
    if !(sigma2 > 0.0) || dim < 2 {
        return Err(Error::InvalidArgument(format!(
            "regularization needs σ² > 0 and dimension ≥ 2 (got {sigma2}, {dim})"
        )));
    }
    let d = dim as f64;
    Ok(consts.get(kind) * (sigma2 * d * d.ln()).sqrt())
}

fn zero_solution(n: usize, c: usize, objective: f64) -> ToeplitzSdpSolution {
    ToeplitzSdpSolution {
        u1: vec![ZERO; n],
        u_hat: Mat::zeros(n, c),
        z_hat: Mat::zeros(c, c),
        objective,
        iterations: 0,
        primal_residual: 0.0,
        dual_residual: 0.0,
        converged: true,
        feasibility_shift: 0.0,
        trace: Vec::new(),
    }
}

/// Solves the problem with ADMM on the scaled data.
///
/// `Y` is normalized to unit Frobenius norm and `s·A` to unit spectral norm
/// before iterating, so the default tolerances act relative to the data.
pub fn solve(problem: &ToeplitzSdpProblem, opts: &SolverOptions) -> Result<ToeplitzSdpSolution> {
    problem.validate()?;
    opts.validate()?;
    let n = problem.amb_dim();
    let c = problem.cols();
    let dim = n + c;

    let kappa = problem.observations.norm_l2();
    if kappa == 0.0 {
        return Ok(zero_solution(n, c, 0.0));
    }
    let sa: CMat = faer::Scale(C64::new(problem.scale, 0.0)) * &problem.sensing;
    let gram: CMat = sa.adjoint() * &sa;
    let gram_eig = herm_eig(&hermitian_part(&gram))?;
    let gamma2 = gram_eig.values.last().copied().unwrap_or(0.0).max(0.0);
    if gamma2 == 0.0 {
        return Ok(zero_solution(n, c, 0.5 * kappa * kappa));
    }
    let gamma = gamma2.sqrt();
    let d: Vec<f64> = gram_eig.values.iter().map(|v| (v / gamma2).max(0.0)).collect();
    let v = &gram_eig.vectors;
    // A'ᴴY' with A' = sA/γ and Y' = Y/κ.
    let aty: CMat = faer::Scale(C64::new(1.0 / (gamma * kappa), 0.0)) * (sa.adjoint() * &problem.observations);
    let reg = problem.reg / (kappa * gamma);
    let y_scaled: CMat = faer::Scale(C64::new(1.0 / kappa, 0.0)) * &problem.observations;
    let a_scaled: CMat = faer::Scale(C64::new(1.0 / gamma, 0.0)) * &sa;

    let scaled_objective = |u: &[C64], uu: &CMat, zz: &CMat| {
        let tr_z: f64 = (0..c).map(|i| zz[(i, i)].re).sum();
        let fit: CMat = &y_scaled - &a_scaled * uu;
        reg / (2.0 * c as f64) * tr_z + 0.5 * reg * u[0].re + 0.5 * fit.squared_norm_l2()
    };

    let mut rho = opts.step * reg;
    let mut s: CMat = Mat::zeros(dim, dim);
    let mut lam: CMat = Mat::zeros(dim, dim);
    let mut u = vec![ZERO; n];
    let mut uu: CMat = Mat::zeros(n, c);
    let mut zz: CMat = Mat::zeros(c, c);
    let mut theta: CMat = Mat::zeros(dim, dim);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut r_p = f64::INFINITY;
    let mut r_d = f64::INFINITY;
    let sqrt_dim = dim as f64;

    for it in 1..=opts.max_iter {
        iterations = it;
        let inv_rho = 1.0 / rho;
        let m = Mat::from_fn(dim, dim, |i, j| s[(i, j)] - lam[(i, j)] * inv_rho);

        // Toeplitz part.
        let mut adj0 = 0.0;
        for p in 0..n {
            adj0 += m[(p, p)].re;
        }
        u[0] = C64::new(adj0 / n as f64 - reg / (2.0 * rho * n as f64), 0.0);
        for (k, slot) in u.iter_mut().enumerate().skip(1) {
            let mut acc = ZERO;
            for p in 0..n - k {
                acc += m[(p, p + k)] + m[(p + k, p)].conj();
            }
            *slot = acc / (2.0 * (n - k) as f64);
        }

        // Z part.
        let shrink = reg / (2.0 * c as f64 * rho);
        for j in 0..c {
            for i in 0..c {
                let h = 0.5 * (m[(n + i, n + j)] + m[(n + j, n + i)].conj());
                zz[(i, j)] = if i == j { h - shrink } else { h };
            }
        }

        // U part: (A'ᴴA' + 2ρI) U = A'ᴴY' + 2ρ·M_U.
        let rhs = Mat::from_fn(n, c, |i, j| aty[(i, j)] + rho * (m[(i, n + j)] + m[(n + j, i)].conj()));
        let mut proj: CMat = v.adjoint() * &rhs;
        for j in 0..c {
            for i in 0..n {
                proj[(i, j)] /= d[i] + 2.0 * rho;
            }
        }
        uu = v * &proj;

        theta = stack_block(&toeplitz_from_row(&u), &uu, &zz);
        let alpha = opts.relaxation;
        // X = αΘ + (1−α)S + Λ/ρ, and the dual update collapses to Λ = ρ(X − S⁺).
        let x = Mat::from_fn(dim, dim, |i, j| {
            theta[(i, j)] * alpha + s[(i, j)] * (1.0 - alpha) + lam[(i, j)] * inv_rho
        });
        let s_new = project_psd_unchecked(&x)?;

        let (mut rp2, mut rd2, mut th2, mut s2, mut l2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for j in 0..dim {
            for i in 0..dim {
                let sn = s_new[(i, j)];
                let l = (x[(i, j)] - sn) * rho;
                lam[(i, j)] = l;
                rp2 += (theta[(i, j)] - sn).norm_sqr();
                rd2 += (sn - s[(i, j)]).norm_sqr();
                th2 += theta[(i, j)].norm_sqr();
                s2 += sn.norm_sqr();
                l2 += l.norm_sqr();
            }
        }
        s = s_new;
        r_p = rp2.sqrt();
        r_d = rho * rd2.sqrt();
        let (theta_norm, s_norm, lam_norm) = (th2.sqrt(), s2.sqrt(), l2.sqrt());

        if opts.record_trace {
            trace.push(IterationRecord {
                iteration: it,
                primal_residual: r_p,
                dual_residual: r_d,
                step: rho,
                objective: kappa * kappa * scaled_objective(&u, &uu, &zz),
            });
        }

        let eps_p = sqrt_dim * opts.eps_abs + opts.eps_rel * theta_norm.max(s_norm);
        // Multipliers live on the scale of the regularization weight.
        let eps_d = sqrt_dim * opts.eps_abs * reg + opts.eps_rel * lam_norm;
        if r_p <= eps_p && r_d <= eps_d {
            converged = true;
            break;
        }

        if opts.adapt_interval > 0 && it % opts.adapt_interval == 0 {
            let rel_p = r_p / theta_norm.max(s_norm).max(f64::MIN_POSITIVE);
            let rel_d = r_d / lam_norm.max(f64::MIN_POSITIVE);
            let ratio = rel_p / rel_d.max(f64::MIN_POSITIVE);
            if !(0.2..=5.0).contains(&ratio) && ratio.is_finite() {
                rho *= ratio.sqrt().clamp(1e-3, 1e3);
            }
        }
    }

    // Restore exact feasibility of the structured iterate.
    let lmin = herm_eigenvalues(&theta)?.first().copied().unwrap_or(0.0);
    let shift = if lmin < 0.0 { -lmin } else { 0.0 };
    u[0].re += shift;
    for i in 0..c {
        zz[(i, i)].re += shift;
    }

    let back = kappa / gamma;
    let u1: Vec<C64> = u.iter().map(|x| x * back).collect();
    let u_hat: CMat = faer::Scale(C64::new(back, 0.0)) * &uu;
    let z_hat: CMat = faer::Scale(C64::new(back, 0.0)) * &zz;
    let objective = problem.objective(&u1, &u_hat, &z_hat);
    Ok(ToeplitzSdpSolution {
        u1,
        u_hat,
        z_hat,
        objective,
        iterations,
        primal_residual: r_p * kappa / gamma,
        dual_residual: r_d * kappa / gamma,
        converged,
        feasibility_shift: shift * back,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cis, frob, identity};
    use crate::rng::{complex_normal, rng_from_seed};
    use crate::spectral::extract_frequencies;

    fn random_mat(seed: u64, r: usize, c: usize) -> CMat {
        let mut rng = rng_from_seed(seed);
        Mat::from_fn(r, c, |_, _| complex_normal(&mut rng, 1.0))
    }

    fn random_hermitian(seed: u64, n: usize) -> CMat {
        hermitian_part(&random_mat(seed, n, n))
    }

    fn inner(a: &CMat, b: &CMat) -> f64 {
        let mut acc = 0.0;
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                acc += (a[(i, j)].conj() * b[(i, j)]).re;
            }
        }
        acc
    }

    #[test]
    fn toeplitz_of_unit_row_is_identity() {
        let mut e1 = vec![ZERO; 5];
        e1[0] = C64::new(1.0, 0.0);
        assert_eq!(toeplitz_from_row(&e1), identity(5));
    }

    #[test]
    fn adjoint_identity_holds() {
        let mut rng = rng_from_seed(3);
        for trial in 0..20 {
            let n = 2 + trial % 7;
            let mut u: Vec<C64> = (0..n).map(|_| complex_normal(&mut rng, 1.0)).collect();
            u[0].im = 0.0;
            let m = random_mat(100 + trial as u64, n, n);
            let lhs = inner(&toeplitz_from_row(&u), &m);
            let adj = adjoint_toeplitz(&m);
            let rhs: f64 = u.iter().zip(&adj).map(|(a, b)| (a.conj() * b).re).sum();
            assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()), "{lhs} {rhs}");
        }
    }

    #[test]
    fn toeplitz_of_single_frequency_is_rank_one() {
        let f: f64 = 0.17;
        let u: Vec<C64> = (0..6).map(|k| cis(-std::f64::consts::TAU * f * k as f64)).collect();
        let ev = herm_eigenvalues(&toeplitz_from_row(&u)).unwrap();
        assert!((ev[5] - 6.0).abs() < 1e-12);
        assert!(ev[..5].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn psd_projection_examples() {
        assert_eq!(psd_project(&identity(3)).unwrap(), identity(3));
        let d = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => C64::new(1.0, 0.0),
            (1, 1) => C64::new(-1.0, 0.0),
            _ => ZERO,
        });
        let p = psd_project(&d).unwrap();
        assert!((p[(0, 0)].re - 1.0).abs() < 1e-14 && p[(1, 1)].norm() < 1e-14);
    }

    #[test]
    fn psd_projection_satisfies_moreau_conditions() {
        for seed in 0..10 {
            let m = random_hermitian(seed, 7);
            let p = psd_project(&m).unwrap();
            let r: CMat = &p - &m;
            // P ⪰ 0, P − M ⪰ 0 and ⟨P, P − M⟩ = 0 characterize the projection.
            assert!(herm_eigenvalues(&p).unwrap()[0] > -1e-12);
            assert!(herm_eigenvalues(&hermitian_part(&r)).unwrap()[0] > -1e-12);
            assert!(inner(&p, &r).abs() < 1e-11 * (1.0 + frob(&m).powi(2)));
            let again = psd_project(&p).unwrap();
            assert!(frob(&(&again - &p)) < 1e-12 * (1.0 + frob(&p)));
        }
    }

    #[test]
    fn psd_projection_rejects_non_hermitian() {
        let m = random_mat(1, 4, 4);
        assert!(matches!(psd_project(&m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn regularization_weight_examples() {
        let k = RegularizationConstants::default();
        let w = regularization_weight(RegKind::Stage1Ms, &k, 1.0, 16).unwrap();
        assert!((w - (16.0 * 16f64.ln()).sqrt()).abs() < 1e-12);
        assert!((w - 6.66).abs() < 0.01);
        let w4 = regularization_weight(RegKind::Stage1Ms, &k, 4.0, 16).unwrap();
        assert!((w4 / w - 2.0).abs() < 1e-12);
        let w2 = regularization_weight(RegKind::Stage2, &k, 1.0, 64).unwrap();
        assert!((w2 - (64.0 * 64f64.ln()).sqrt()).abs() < 1e-12);
        assert!(regularization_weight(RegKind::Stage2, &k, 1.0, 1).is_err());
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let p = ToeplitzSdpProblem { observations: Mat::zeros(4, 2), sensing: random_mat(2, 4, 6), reg: 1.0, scale: 1.0 };
        let s = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.objective, 0.0);
        assert!(s.u1.iter().all(|x| *x == ZERO) && frob(&s.u_hat) == 0.0 && frob(&s.z_hat) == 0.0);
    }

    #[test]
    fn huge_regularization_shrinks_to_zero() {
        let y = random_mat(4, 5, 2);
        let p = ToeplitzSdpProblem { observations: y.clone(), sensing: random_mat(5, 5, 6), reg: 1e6 * frob(&y), scale: 1.0 };
        let s = solve(&p, &SolverOptions::default()).unwrap();
        assert!(frob(&s.u_hat) < 1e-3 * frob(&y));
    }

    #[test]
    fn noiseless_single_atom_is_recovered() {
        let n = 8;
        let f: f64 = 0.1234;
        let a = CMat::from_fn(n, 1, |k, _| cis(std::f64::consts::TAU * f * k as f64));
        let coeffs = Mat::from_fn(1, 2, |_, j| C64::new(1.0 + j as f64, -0.5));
        let y: CMat = &a * &coeffs;
        let p = ToeplitzSdpProblem { observations: y, sensing: identity(n), reg: 1e-4, scale: 1.0 };
        let s = solve(&p, &SolverOptions { max_iter: 5000, ..SolverOptions::default() }).unwrap();
        let ev = herm_eigenvalues(&s.toeplitz()).unwrap();
        assert!(ev[n - 2] < 1e-3 * ev[n - 1], "{ev:?}");
        let got = extract_frequencies(&s.toeplitz(), 1).unwrap()[0];
        assert!((got - f).abs() < 1e-3, "{got}");
        assert!(herm_eigenvalues(&s.block()).unwrap()[0] >= -1e-7 * ev[n - 1]);
    }

    #[test]
    fn solver_is_deterministic_and_traces() {
        let p = ToeplitzSdpProblem { observations: random_mat(6, 4, 1), sensing: random_mat(7, 4, 8), reg: 0.3, scale: 2.0 };
        let opts = SolverOptions { record_trace: true, ..SolverOptions::default() };
        let a = solve(&p, &opts).unwrap();
        let b = solve(&p, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trace.len(), a.iterations);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        a.write_trace_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("iteration,primal_residual,dual_residual,step,objective"));
        assert_eq!(text.lines().count(), a.iterations + 1);
    }

    #[test]
    fn nan_input_is_rejected() {
        let mut y = random_mat(8, 3, 1);
        y[(0, 0)] = C64::new(f64::NAN, 0.0);
        let p = ToeplitzSdpProblem { observations: y, sensing: random_mat(9, 3, 4), reg: 1.0, scale: 1.0 };
        assert!(matches!(solve(&p, &SolverOptions::default()), Err(Error::NonFinite)));
    }
}
