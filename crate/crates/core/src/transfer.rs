//! Transfer matrices of the generalized eigenvalue equation `Uψ = zψ`.
//!
//! For rotation coins the equation is equivalent to
//! `[ψ_{n+1}⁺, ψ_n⁻]ᵀ = M(n; z) [ψ_n⁺, ψ_{n−1}⁻]ᵀ` with
//! `M(n; z) = sec γ_n · [[z⁻¹, −sin γ_n], [−sin γ_n, z]]`, a unimodular matrix.
//! Products `T(n, m; z) = M(n−1) ⋯ M(m)` propagate solution data across a block.

use std::f64::consts::{FRAC_PI_2, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{unimodular_norm_from_frobenius, Mat2, RealMat2, C64};
use crate::substitution::{angle_at, sequence_window, CoinAngles, SubshiftWindow, Word};
use crate::walk::WalkState;

/// Spectral parameter `z ≠ 0`, optionally recorded as `z = e^{iτ + η}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralParameter {
    z: C64,
    tau_eta: Option<(f64, f64)>,
}

impl SpectralParameter {
    pub fn new(z: C64) -> Result<Self> {
        if z.norm() == 0.0 || !z.is_finite() {
            return Err(Error::invalid(format!("spectral parameter {z} must be finite and nonzero")));
        }
        Ok(Self { z, tau_eta: None })
    }

    /// `z = e^{iτ + η}`.
    pub fn from_phase(tau: f64, eta: f64) -> Result<Self> {
        if !(tau.is_finite() && eta.is_finite()) {
            return Err(Error::invalid("phase and log-modulus must be finite"));
        }
        let z = C64::from_polar(eta.exp(), tau);
        Ok(Self { z, tau_eta: Some((tau, eta)) })
    }

    /// `z = e^{iτ + 1/L}`.
    pub fn off_circle(tau: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::invalid(format!("scale L = {scale} must be positive")));
        }
        Self::from_phase(tau, 1.0 / scale)
    }

    pub fn i() -> Self {
        Self { z: C64::new(0.0, 1.0), tau_eta: Some((FRAC_PI_2, 0.0)) }
    }

    pub fn z(&self) -> C64 {
        self.z
    }

    pub fn modulus(&self) -> f64 {
        self.z.norm()
    }

    pub fn phase_log_modulus(&self) -> Option<(f64, f64)> {
        self.tau_eta
    }
}

/// A 2×2 transfer matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix(pub Mat2);

impl TransferMatrix {
    pub fn identity() -> Self {
        Self(Mat2::identity())
    }

    pub fn det(&self) -> C64 {
        self.0.det()
    }

    pub fn norm(&self) -> f64 {
        operator_norm(self)
    }
}

fn check_angle(angle: f64) -> Result<()> {
    if !(angle > 0.0 && angle < FRAC_PI_2) {
        return Err(Error::invalid(format!("coin angle {angle} must lie in (0, pi/2)")));
    }
    Ok(())
}

/// `M = sec γ · [[z⁻¹, −sin γ], [−sin γ, z]]`.
pub fn one_step_matrix(angle: f64, z: &SpectralParameter) -> Result<TransferMatrix> {
    check_angle(angle)?;
    Ok(TransferMatrix(one_step_unchecked(angle, z.z())))
}

fn one_step_unchecked(angle: f64, z: C64) -> Mat2 {
    let (s, c) = angle.sin_cos();
    let sec = 1.0 / c;
    Mat2::new(z.inv() * sec, C64::from(-s * sec), C64::from(-s * sec), z * sec)
}

/// `T_x(n, m; z)`: identity for `n = m`, `M(n−1) ⋯ M(m)` for `n > m`, and the
/// inverse of `T_x(m, n; z)` for `n < m`.
pub fn product(
    x: &SubshiftWindow,
    n: i64,
    m: i64,
    angles: &CoinAngles,
    z: &SpectralParameter,
) -> Result<TransferMatrix> {
    if n == m {
        return Ok(TransferMatrix::identity());
    }
    let (lo, hi) = (n.min(m), n.max(m));
    if !(x.contains(lo) && x.contains(hi - 1)) {
        return Err(Error::invalid(format!(
            "sites [{lo}, {}] not covered by window [{}, {}]",
            hi - 1,
            x.n_min,
            x.n_max
        )));
    }
    let mut t = Mat2::identity();
    for k in lo..hi {
        t = one_step_unchecked(angle_at(x, k, angles)?, z.z()) * t;
    }
    if n > m {
        Ok(TransferMatrix(t))
    } else {
        // unimodular, so the adjugate is the exact inverse
        Ok(TransferMatrix(t.adjugate()))
    }
}

/// Largest singular value, closed form.
pub fn operator_norm(t: &TransferMatrix) -> f64 {
    t.0.operator_norm()
}

/// Deviations from the identity of the transfer products over the blocks
/// `0110` and `1001` at `z = i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutationResiduals {
    pub residual_0110: f64,
    pub residual_1001: f64,
}

impl CommutationResiduals {
    pub fn max(&self) -> f64 {
        self.residual_0110.max(self.residual_1001)
    }
}

pub fn check_commutation_identity(angles: &CoinAngles) -> Result<CommutationResiduals> {
    let residual = |block: &str| -> Result<f64> {
        let x = SubshiftWindow::from_symbols(0, 0, block.parse::<Word>()?)?;
        let t = product(&x, 4, 0, angles, &SpectralParameter::i())?;
        Ok(t.0.max_abs_diff(&Mat2::identity()))
    };
    Ok(CommutationResiduals { residual_0110: residual("0110")?, residual_1001: residual("1001")? })
}

/// `V A(i) V*` with `V = (I + iσ_x)/√2`, which is `[[0, −u], [1/u, 0]]` with
/// `u = sec γ + tan γ`. Written in closed form so the zero entries are exact:
/// products stay monomial and rounding grows only linearly with the span.
fn real_form_at_i(angle: f64) -> RealMat2 {
    let u = (1.0 + angle.sin()) / angle.cos();
    RealMat2([0.0, -u, 1.0 / u, 0.0])
}

/// Largest `‖T_x(n, m; i)‖` over `0 ≤ m < n ≤ max_span` and the Thue–Morse
/// windows starting at each offset (span 0 contributes the identity).
pub fn uniform_bound_scan(angles: &CoinAngles, max_span: usize, offsets: &[usize]) -> Result<f64> {
    if offsets.is_empty() {
        return Err(Error::invalid("at least one offset is required"));
    }
    let per_offset: Vec<Result<f64>> = offsets
        .par_iter()
        .map(|&j| {
            if max_span == 0 {
                return Ok(1.0);
            }
            let x = sequence_window(j, 0, max_span as i64 - 1)?;
            let mats: Vec<RealMat2> =
                x.symbols.symbols().iter().map(|&s| real_form_at_i(angles.for_symbol(s))).collect();
            // operator norm of a unimodular matrix is increasing in ‖·‖_F
            let mut best = 2.0f64;
            for m in 0..max_span {
                let mut t = RealMat2::IDENTITY;
                for mat in &mats[m..] {
                    t = mat.mul(&t);
                    best = best.max(t.frobenius_sqr());
                }
            }
            Ok(unimodular_norm_from_frobenius(best))
        })
        .collect();
    per_offset.into_iter().try_fold(1.0f64, |acc, r| Ok(acc.max(r?)))
}

/// Sup of `‖T_x(n, m; z)‖` over a z-grid inside `|z − i| < ε` and spans
/// `|n − m| ≤ 1/ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowBoundReport {
    pub epsilon: f64,
    pub max_norm: f64,
    pub n_z_samples: usize,
    pub offsets: Vec<usize>,
    pub max_span: usize,
}

/// Number of concentric rings in the z-grid of [`window_bound_scan`].
pub const Z_RINGS: usize = 5;

/// `i` plus `Z_RINGS` rings of `z_samples` points at radii `ε·k/Z_RINGS`,
/// the outermost pulled just inside the open disk.
pub fn disk_grid(epsilon: f64, z_samples: usize) -> Vec<C64> {
    let mut zs = vec![C64::new(0.0, 1.0)];
    for k in 1..=Z_RINGS {
        let r = epsilon * k as f64 / Z_RINGS as f64 * (1.0 - 1e-9);
        for a in 0..z_samples {
            zs.push(C64::new(0.0, 1.0) + C64::from_polar(r, TAU * a as f64 / z_samples as f64));
        }
    }
    zs
}

/// Window starts are drawn from `[0, RECURRENCE_MARGIN · span)` past each
/// offset so that every factor of length `span` is visited.
pub fn window_bound_scan(
    angles: &CoinAngles,
    epsilon: f64,
    z_samples: usize,
    offsets: &[usize],
) -> Result<WindowBoundReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("epsilon = {epsilon} must lie in (0, 1)")));
    }
    if z_samples == 0 || offsets.is_empty() {
        return Err(Error::invalid("need at least one z sample and one offset"));
    }
    let span = (1.0 / epsilon).floor() as usize;
    let starts = crate::substitution::RECURRENCE_MARGIN * span;
    let zs = disk_grid(epsilon, z_samples);
    let windows: Vec<SubshiftWindow> =
        offsets.iter().map(|&j| sequence_window(j, 0, (starts + span) as i64 - 1)).collect::<Result<_>>()?;
    Ok(WindowBoundReport {
        epsilon,
        max_norm: max_norm_over(angles, &zs, span, starts, &windows),
        n_z_samples: z_samples,
        offsets: offsets.to_vec(),
        max_span: span,
    })
}

/// Largest `‖T_x(m + k, m; z)‖`, `1 ≤ k ≤ span`, `0 ≤ m < starts`, over the
/// given spectral parameters and windows (at least the identity's norm 1).
fn max_norm_over(angles: &CoinAngles, zs: &[C64], span: usize, starts: usize, windows: &[SubshiftWindow]) -> f64 {
    let per_z: Vec<f64> = zs
        .par_iter()
        .map(|&z| {
            let mut best = 2.0f64;
            for x in windows {
                let mats: Vec<Mat2> =
                    x.symbols.symbols().iter().map(|&s| one_step_unchecked(angles.for_symbol(s), z)).collect();
                for m in 0..starts {
                    let mut t = Mat2::identity();
                    for mat in &mats[m..m + span] {
                        t = *mat * t;
                        best = best.max(t.frobenius_sqr());
                    }
                }
            }
            best
        })
        .collect();
    unimodular_norm_from_frobenius(per_z.into_iter().fold(2.0, f64::max))
}

/// Max over admissible sites of
/// `‖[ψ_{n+1}⁺, ψ_n⁻]ᵀ − M_x(n; z)[ψ_n⁺, ψ_{n−1}⁻]ᵀ‖`.
///
/// A site is checked when `n ± 1` lie in the state window, `n` lies in the
/// coin window, and `n` is not excluded.
pub fn verify_eigenrecursion(
    psi: &WalkState,
    x: &SubshiftWindow,
    angles: &CoinAngles,
    z: &SpectralParameter,
    excluded: &[i64],
) -> Result<f64> {
    let lo = (psi.n_min + 1).max(x.n_min);
    let hi = (psi.n_max() - 1).min(x.n_max);
    let mut worst = 0.0f64;
    for n in lo..=hi {
        if excluded.contains(&n) {
            continue;
        }
        let m = one_step_matrix(angle_at(x, n, angles)?, z)?;
        let (p_n, m_n) = psi.amplitude(n);
        let (_, m_prev) = psi.amplitude(n - 1);
        let (p_next, _) = psi.amplitude(n + 1);
        let predicted = m.0.apply([p_n, m_prev]);
        let r = ((p_next - predicted[0]).norm_sqr() + (m_n - predicted[1]).norm_sqr()).sqrt();
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Generalized eigenfunction built by propagating `[ψ_0⁺, ψ_{−1}⁻]` with the
/// transfer matrices across the window of `x`.
pub fn solution_from_seed(
    x: &SubshiftWindow,
    angles: &CoinAngles,
    z: &SpectralParameter,
    seed: [C64; 2],
) -> Result<WalkState> {
    if !(x.contains(0) && x.contains(-1)) {
        return Err(Error::invalid("window must contain sites -1 and 0"));
    }
    // v_n = [ψ_n⁺, ψ_{n−1}⁻], v_{n+1} = M(n) v_n, for n_min ≤ n ≤ n_max + 1
    let n_min = x.n_min - 1;
    let n_max = x.n_max + 1;
    let mut psi = WalkState::zeros(n_min, n_max)?;
    let idx = |n: i64| (n - n_min) as usize;
    let set = |psi: &mut WalkState, n: i64, v: [C64; 2]| {
        psi.plus[idx(n)] = v[0];
        psi.minus[idx(n - 1)] = v[1];
    };
    set(&mut psi, 0, seed);
    let mut v = seed;
    for n in 0..=x.n_max {
        v = one_step_matrix(angle_at(x, n, angles)?, z)?.0.apply(v);
        set(&mut psi, n + 1, v);
    }
    let mut v = seed;
    for n in (x.n_min..0).rev() {
        v = one_step_matrix(angle_at(x, n, angles)?, z)?.0.adjugate().apply(v);
        set(&mut psi, n, v);
    }
    Ok(psi)
}
