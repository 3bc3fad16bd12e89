//! Matrix elements of the resolvent `(U − z)⁻¹ δ_0⁺` off the unit circle.
//!
//! The walk is truncated to `[−N, N]` (amplitude leaving the window is
//! dropped, so the truncation is a contraction and `U_N − z` stays invertible
//! for `|z| > 1`). With `|z| = e^{1/L}` the Neumann series
//! `(U − z)⁻¹ = −Σ_ℓ z^{−ℓ−1} U^ℓ` and the light cone bound the truncation
//! error by a geometric tail in `N`.
//!
//! On top of the solver sit the damped Parseval identity
//! `Σ_ℓ e^{−2ℓ/L} |⟨ψ, U^ℓ φ⟩|² = e^{2/L} ∫ |⟨ψ, (U − e^{iτ+1/L})⁻¹ φ⟩|² dτ/2π`,
//! the resolvent lower-bound scan near `z = i`, and the moment certificate.

use std::f64::consts::{FRAC_PI_2, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pairwise_sum, trapezoid, BandedMatrix, C64, ONE, ZERO};
use crate::transfer::SpectralParameter;
use crate::walk::{least_squares_slope, moment, required_horizon, CoinBank, Evolution, WalkModel, WalkState};

/// Default tolerance behind the truncation radius rule.
pub const DEFAULT_SOLVER_TOL: f64 = 1e-10;

/// Extra sites added to every truncation radius.
pub const RADIUS_MARGIN: usize = 8;

/// Default number of trapezoid panels on the window `B_L`.
pub const DEFAULT_WINDOW_NODES: usize = 64;

/// Scale `L = 1/log|z|` of a parameter outside the unit circle.
pub fn scale_of(z: &SpectralParameter) -> Result<f64> {
    let r = z.modulus();
    if !(r > 1.0) {
        return Err(Error::IllPosed(format!("|z| = {r} must exceed 1 for the resolvent")));
    }
    Ok(1.0 / r.ln())
}

/// `N = max_target + ceil(L ln(1/tol)) + 8` with `L = 1/log|z|`.
pub fn truncation_radius(max_target: usize, z: &SpectralParameter, tol: f64) -> Result<usize> {
    let l = scale_of(z)?;
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::invalid(format!("solver tolerance {tol} must lie in (0, 1)")));
    }
    Ok(max_target + (l * (1.0 / tol).ln()).ceil() as usize + RADIUS_MARGIN)
}

/// Truncated resolvent problem on the coin window `[−N, N]`.
#[derive(Clone, Debug)]
pub struct TruncatedResolventProblem {
    coins: CoinBank,
    z: SpectralParameter,
    targets: Vec<i64>,
    tol: f64,
}

impl TruncatedResolventProblem {
    /// Validates `|z| > 1` and that the symmetric radius of `coins` meets the
    /// truncation rule for the largest target.
    pub fn new(coins: CoinBank, z: SpectralParameter, targets: Vec<i64>, tol: f64) -> Result<Self> {
        let max_target = targets.iter().map(|n| n.unsigned_abs() as usize).max().unwrap_or(0);
        let required = truncation_radius(max_target, &z, tol)?;
        let available = (-coins.n_min()).min(coins.n_max()).max(0) as usize;
        if available < required {
            return Err(Error::TruncationTooSmall { required, available });
        }
        Ok(Self { coins, z, targets, tol })
    }

    /// Builds coins of exactly the required radius from a walk model.
    pub fn from_model(model: &WalkModel, z: SpectralParameter, targets: Vec<i64>, tol: f64) -> Result<Self> {
        let max_target = targets.iter().map(|n| n.unsigned_abs() as usize).max().unwrap_or(0);
        let radius = truncation_radius(max_target, &z, tol)? as i64;
        let coins = model
            .coin_bank(-radius, radius)?
            .ok_or_else(|| Error::invalid("the identity operator has no coin bank"))?;
        Self::new(coins, z, targets, tol)
    }

    pub fn radius(&self) -> usize {
        (-self.coins.n_min()).min(self.coins.n_max()) as usize
    }

    pub fn z(&self) -> &SpectralParameter {
        &self.z
    }

    pub fn targets(&self) -> &[i64] {
        &self.targets
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }
}

#[derive(Clone, Debug)]
pub struct ResolventSolution {
    pub state: WalkState,
    /// `‖(U_N − z)ψ − δ_0⁺‖`.
    pub residual: f64,
}

impl ResolventSolution {
    /// `|⟨δ_n⁺, ψ⟩|² + |⟨δ_n⁻, ψ⟩|²` for each target.
    pub fn target_weights(&self, targets: &[i64]) -> Vec<f64> {
        targets.iter().map(|&n| self.state.site_weight(n)).collect()
    }
}

/// Assembles `U − z` on the coin window. Unknowns are interleaved
/// `(ψ_n⁺, ψ_n⁻)`, giving two sub- and two super-diagonals:
/// `(Uψ)_n⁺ = c¹¹_{n−1}ψ_{n−1}⁺ + c¹²_{n−1}ψ_{n−1}⁻` and
/// `(Uψ)_n⁻ = c²¹_{n+1}ψ_{n+1}⁺ + c²²_{n+1}ψ_{n+1}⁻`.
fn assemble(coins: &CoinBank, z: C64) -> BandedMatrix {
    let sites = coins.coins().len();
    let mut a = BandedMatrix::zeros(2 * sites, 2, 2);
    for (k, c) in coins.coins().iter().enumerate() {
        a.set(2 * k, 2 * k, -z);
        a.set(2 * k + 1, 2 * k + 1, -z);
        if k + 1 < sites {
            // site k feeds (k+1, +) and receives nothing else here
            a.set(2 * (k + 1), 2 * k, c[(0, 0)]);
            a.set(2 * (k + 1), 2 * k + 1, c[(0, 1)]);
        }
        if k > 0 {
            a.set(2 * (k - 1) + 1, 2 * k, c[(1, 0)]);
            a.set(2 * (k - 1) + 1, 2 * k + 1, c[(1, 1)]);
        }
    }
    a
}

/// `ψ = (U_N − z)⁻¹ δ_0⁺` on the coin window, with its residual.
fn solve_on_bank(coins: &CoinBank, z: C64) -> Result<ResolventSolution> {
    if !(coins.n_min() <= 0 && coins.n_max() >= 0) {
        return Err(Error::invalid("coin window must contain the origin"));
    }
    let a = assemble(coins, z);
    let dim = a.dim();
    let mut rhs = vec![ZERO; dim];
    rhs[2 * (-coins.n_min()) as usize] = ONE;
    let x = a.clone().factor()?.solve(&rhs);
    let ax = a.matvec(&x);
    let residual = ax.iter().zip(&rhs).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>().sqrt();
    let plus = x.iter().step_by(2).copied().collect();
    let minus = x.iter().skip(1).step_by(2).copied().collect();
    Ok(ResolventSolution { state: WalkState::new(coins.n_min(), plus, minus)?, residual })
}

/// Direct banded solve of the truncated problem.
pub fn solve_resolvent(problem: &TruncatedResolventProblem) -> Result<ResolventSolution> {
    solve_on_bank(&problem.coins, problem.z.z())
}

/// Largest change in the target weights when the truncation radius doubles.
pub fn truncation_change(model: &WalkModel, z: SpectralParameter, targets: &[i64], tol: f64) -> Result<f64> {
    let base = TruncatedResolventProblem::from_model(model, z, targets.to_vec(), tol)?;
    let r = 2 * base.radius() as i64;
    let wide = model.coin_bank(-r, r)?.ok_or_else(|| Error::invalid("the identity operator has no coin bank"))?;
    let a = solve_resolvent(&base)?;
    let b = solve_on_bank(&wide, z.z())?;
    Ok(targets
        .iter()
        .map(|&n| {
            let (p1, m1) = a.state.amplitude(n);
            let (p2, m2) = b.state.amplitude(n);
            (p1 - p2).norm().max((m1 - m2).norm())
        })
        .fold(0.0, f64::max))
}

/// Partial Neumann sum with its certified tail.
#[derive(Clone, Debug)]
pub struct NeumannSeries {
    pub state: WalkState,
    /// `Σ_{ℓ > ℓ_max} |z|^{−ℓ−1} = |z|^{−ℓ_max−2} / (1 − |z|⁻¹)`.
    pub tail_bound: f64,
}

/// `−Σ_{ℓ=0}^{ℓ_max} z^{−ℓ−1} U^ℓ δ_0⁺`, computed by exact evolution.
pub fn neumann_oracle(coins: &CoinBank, z: &SpectralParameter, l_max: usize) -> Result<NeumannSeries> {
    let r = z.modulus();
    if !(r > 1.0) {
        return Err(Error::IllPosed(format!("Neumann series diverges for |z| = {r}")));
    }
    let mut ev = Evolution::new(&WalkState::delta_plus(0, 0)?, coins, l_max)?;
    let n_min = ev.n_min();
    let len = ev.amplitudes().0.len();
    let mut plus = vec![ZERO; len];
    let mut minus = vec![ZERO; len];
    let zinv = z.z().inv();
    let mut weight = -zinv;
    for step in 0..=l_max {
        let (p, m) = ev.amplitudes();
        for k in 0..len {
            plus[k] += weight * p[k];
            minus[k] += weight * m[k];
        }
        weight *= zinv;
        if step < l_max {
            ev.advance();
        }
    }
    let tail_bound = r.powi(-(l_max as i32) - 2) / (1.0 - 1.0 / r);
    Ok(NeumannSeries { state: WalkState::new(n_min, plus, minus)?, tail_bound })
}

/// Both sides of the damped Parseval identity for `ψ = δ_n^±` (summed) and
/// `φ = δ_0⁺`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParsevalReport {
    #[serde(rename = "L")]
    pub scale: f64,
    pub n: i64,
    /// `Σ_{ℓ ≤ ℓ_max} e^{−2ℓ/L} a(n, ℓ)`.
    pub lhs: f64,
    /// `e^{2/L}` times the trapezoid mean of the squared resolvent element.
    pub rhs: f64,
    pub abs_diff: f64,
    pub rel_diff: f64,
    pub l_max: usize,
    /// `Σ_{ℓ > ℓ_max} e^{−2ℓ/L}`, an upper bound on the omitted time sum.
    pub lhs_tail_bound: f64,
    pub node_count: usize,
    /// Tolerance of the resolvent truncation radius rule.
    pub solver_tol: f64,
}

/// Smallest admissible trapezoid node count on the full circle.
pub fn node_floor(scale: f64) -> usize {
    64usize.max(16 * scale.ceil() as usize)
}

/// `|⟨δ_n, (U − z)⁻¹ δ_0⁺⟩|²` for each target.
pub fn resolvent_weights(model: &WalkModel, z: SpectralParameter, targets: &[i64], tol: f64) -> Result<Vec<f64>> {
    if let WalkModel::Identity = model {
        scale_of(&z)?;
        let w = (ONE - z.z()).inv().norm_sqr();
        return Ok(targets.iter().map(|&n| if n == 0 { w } else { 0.0 }).collect());
    }
    let problem = TruncatedResolventProblem::from_model(model, z, targets.to_vec(), tol)?;
    Ok(solve_resolvent(&problem)?.target_weights(targets))
}

fn time_sum(model: &WalkModel, n: i64, scale: f64, tail_tol: f64) -> Result<(f64, usize, f64)> {
    let l_max = required_horizon(scale, tail_tol)?;
    let q = (-2.0 / scale).exp();
    let terms: Vec<f64> = match model.evolution_bank(l_max)? {
        None => (0..=l_max).map(|l| if n == 0 { q.powi(l as i32) } else { 0.0 }).collect(),
        Some(bank) => Evolution::new(&WalkState::delta_plus(0, 0)?, &bank, l_max)?
            .map(|p| q.powi(p.time as i32) * p.at(n))
            .collect(),
    };
    let tail = q.powi(l_max as i32 + 1) / (1.0 - q);
    Ok((pairwise_sum(&terms), l_max, tail))
}

/// Compares the damped time sum with the circle integral of the resolvent.
pub fn parseval_check(
    model: &WalkModel,
    n: i64,
    scale: f64,
    tail_tol: f64,
    node_count: usize,
    solver_tol: f64,
) -> Result<ParsevalReport> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid(format!("scale L = {scale} must be positive")));
    }
    let floor = node_floor(scale);
    if node_count < floor {
        return Err(Error::invalid(format!("node count {node_count} below the floor {floor} for L = {scale}")));
    }
    let (lhs, l_max, lhs_tail_bound) = time_sum(model, n, scale, tail_tol)?;
    let samples: Vec<Result<f64>> = (0..node_count)
        .into_par_iter()
        .map(|k| {
            let tau = TAU * k as f64 / node_count as f64;
            let z = SpectralParameter::off_circle(tau, scale)?;
            Ok(resolvent_weights(model, z, &[n], solver_tol)?[0])
        })
        .collect();
    let samples: Vec<f64> = samples.into_iter().collect::<Result<_>>()?;
    let rhs = (2.0 / scale).exp() * pairwise_sum(&samples) / node_count as f64;
    let abs_diff = (lhs - rhs).abs();
    let denom = lhs.abs().max(rhs.abs());
    let rel_diff = if denom > 0.0 { abs_diff / denom } else { 0.0 };
    Ok(ParsevalReport { scale, n, lhs, rhs, abs_diff, rel_diff, l_max, lhs_tail_bound, node_count, solver_tol })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub tau: f64,
    pub n: i64,
    pub resolvent_sq: f64,
}

/// Squared resolvent elements over `|e^{iτ+η} − i| < ε` and the annulus
/// `ε⁻¹/2 < |n| < ε⁻¹`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolventScan {
    pub epsilon: f64,
    #[serde(rename = "L")]
    pub scale: f64,
    pub min_value: f64,
    pub min_left: f64,
    pub min_right: f64,
    pub rows: Vec<ScanRow>,
}

/// Half-width `δ` of the phase window `(π/2 − δ, π/2 + δ)` on which
/// `|e^{iτ+η} − i| < ε`, or `None` if it is empty.
pub fn phase_window(epsilon: f64, eta: f64) -> Option<f64> {
    let c = ((2.0 * eta).exp() + 1.0 - epsilon * epsilon) / (2.0 * eta.exp());
    (c < 1.0).then(|| c.max(-1.0).acos())
}

pub fn resolvent_window_scan(
    model: &WalkModel,
    epsilon: f64,
    scale: f64,
    tau_nodes: usize,
    solver_tol: f64,
) -> Result<ResolventScan> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("epsilon = {epsilon} must lie in (0, 1)")));
    }
    if tau_nodes == 0 {
        return Err(Error::invalid("need at least one phase node"));
    }
    let delta = phase_window(epsilon, 1.0 / scale).ok_or_else(|| {
        Error::invalid(format!("no phase satisfies |e^(i tau + 1/L) - i| < {epsilon} for L = {scale}"))
    })?;
    let inv = 1.0 / epsilon;
    let targets: Vec<i64> =
        (1..=inv.ceil() as i64).filter(|&k| (k as f64) > inv / 2.0 && (k as f64) < inv).flat_map(|k| [-k, k]).collect();
    if targets.is_empty() {
        return Err(Error::invalid(format!("annulus {inv}/2 < |n| < {inv} contains no sites")));
    }
    let per_tau: Vec<Result<Vec<ScanRow>>> = (0..tau_nodes)
        .into_par_iter()
        .map(|k| {
            let tau = FRAC_PI_2 - delta + 2.0 * delta * (k as f64 + 0.5) / tau_nodes as f64;
            let z = SpectralParameter::off_circle(tau, scale)?;
            let w = resolvent_weights(model, z, &targets, solver_tol)?;
            Ok(targets.iter().zip(w).map(|(&n, resolvent_sq)| ScanRow { tau, n, resolvent_sq }).collect())
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_tau {
        rows.extend(r?);
    }
    let min_of = |pred: &dyn Fn(i64) -> bool| {
        rows.iter().filter(|r| pred(r.n)).map(|r| r.resolvent_sq).fold(f64::INFINITY, f64::min)
    };
    Ok(ResolventScan {
        epsilon,
        scale,
        min_value: min_of(&|_| true),
        min_left: min_of(&|n| n < 0),
        min_right: min_of(&|n| n > 0),
        rows,
    })
}

/// One scale of the moment certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateRow {
    #[serde(rename = "L")]
    pub scale: f64,
    /// `Σ_{2L≤|n|≤4L} ∫_{B_L} |⟨δ_n, R⟩|² dτ/2π`.
    pub window_integral: f64,
    /// Contributions of `n < 0` and `n > 0` to `window_integral`.
    pub left_integral: f64,
    pub right_integral: f64,
    /// `L^{p−1} · window_integral`.
    pub lower_bound_functional: f64,
    /// `(2L + 1)^p (e^{2/L} − 1) · window_integral`, the chain with its
    /// constants kept.
    pub accounted_bound: f64,
    /// `Σ_{2L≤|n|≤4L} (|n|+1)^p ã(n, L)` from the time evolution.
    pub annulus_moment: f64,
    /// `⟨|X|^p⟩(L)` from the time evolution.
    pub moment: f64,
    /// `(4L + 1)^p` times the time-average tail weight.
    pub truncation_slack: f64,
    pub positive: bool,
    pub ordered: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub p: f64,
    pub tau_nodes: usize,
    pub rows: Vec<CertificateRow>,
    /// `min_L accounted_bound / L^{p−1}`: a certified `C` in `⟨|X|^p⟩ ≥ C L^{p−1}`.
    pub fitted_constant: f64,
    /// `min_L ⟨|X|^p⟩ / L^{p−1}` over the grid.
    pub moment_constant: f64,
    /// Least-squares slope of `log⟨|X|^p⟩` against `p log L`.
    pub moment_exponent: f64,
    /// Least-squares slope of `log accounted_bound` against `p log L`; the
    /// certified growth is `1 − 1/p`.
    pub certificate_exponent: f64,
    /// `p ≤ 1`: the bound `L^{p−1}` carries no growth.
    pub degenerate: bool,
    pub all_positive: bool,
    pub all_ordered: bool,
}

/// Evaluates the lower-bound chain `⟨|X|^p⟩(L) ≳ L^{p−1}` scale by scale.
pub fn moment_certificate(
    model: &WalkModel,
    p: f64,
    scales: &[f64],
    tau_nodes: usize,
    tail_tol: f64,
    solver_tol: f64,
) -> Result<CertificateReport> {
    if !(p > 0.0) {
        return Err(Error::invalid(format!("moment order p = {p} must be positive")));
    }
    if scales.is_empty() {
        return Err(Error::invalid("certificate needs at least one scale"));
    }
    if let Some(&l) = scales.iter().find(|&&l| !(l >= 10.0)) {
        return Err(Error::invalid(format!("certificate scales must be >= 10, got {l}")));
    }
    if tau_nodes < 2 {
        return Err(Error::invalid("need at least two panels on B_L"));
    }
    let mut rows = Vec::with_capacity(scales.len());
    for &scale in scales {
        let lo = (2.0 * scale).ceil() as i64;
        let hi = (4.0 * scale).floor() as i64;
        let targets: Vec<i64> = (lo..=hi).flat_map(|k| [-k, k]).collect();
        let a = FRAC_PI_2 - 1.0 / scale;
        let b = FRAC_PI_2 + 1.0 / scale;
        let samples: Vec<Result<(f64, f64)>> = (0..=tau_nodes)
            .into_par_iter()
            .map(|k| {
                let tau = a + (b - a) * k as f64 / tau_nodes as f64;
                let z = SpectralParameter::off_circle(tau, scale)?;
                let w = resolvent_weights(model, z, &targets, solver_tol)?;
                let (left, right): (Vec<_>, Vec<_>) = targets.iter().zip(&w).partition(|(&n, _)| n < 0);
                let sum = |v: Vec<(&i64, &f64)>| pairwise_sum(&v.into_iter().map(|(_, &x)| x).collect::<Vec<_>>());
                Ok((sum(left), sum(right)))
            })
            .collect();
        let samples: Vec<(f64, f64)> = samples.into_iter().collect::<Result<_>>()?;
        let left: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let right: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let left_integral = trapezoid(&left, a, b) / TAU;
        let right_integral = trapezoid(&right, a, b) / TAU;
        let window_integral = left_integral + right_integral;

        let avg = model.time_averaged(scale, tail_tol)?;
        let m = moment(&avg, p);
        let annulus_moment = pairwise_sum(
            &avg.rows()
                .filter(|(n, ..)| (lo..=hi).contains(&n.abs()))
                .map(|(n, _, _, a)| ((n.abs() + 1) as f64).powf(p) * a)
                .collect::<Vec<_>>(),
        );
        let lower_bound_functional = scale.powf(p - 1.0) * window_integral;
        let accounted_bound = (2.0 * scale + 1.0).powf(p) * (2.0 / scale).exp_m1() * window_integral;
        let truncation_slack = (4.0 * scale + 1.0).powf(p) * avg.tail_bound;
        let positive = window_integral > 0.0 && left_integral > 0.0 && right_integral > 0.0;
        let ordered = accounted_bound <= annulus_moment + truncation_slack
            && annulus_moment <= m * (1.0 + 1e-12)
            && lower_bound_functional <= accounted_bound;
        rows.push(CertificateRow {
            scale,
            window_integral,
            left_integral,
            right_integral,
            lower_bound_functional,
            accounted_bound,
            annulus_moment,
            moment: m,
            truncation_slack,
            positive,
            ordered,
        });
    }
    let ratio_min = |f: &dyn Fn(&CertificateRow) -> f64| {
        rows.iter().map(|r| f(r) / r.scale.powf(p - 1.0)).fold(f64::INFINITY, f64::min)
    };
    let logs: Vec<f64> = rows.iter().map(|r| p * r.scale.ln()).collect();
    let slope_of = |f: &dyn Fn(&CertificateRow) -> f64| -> f64 {
        if rows.len() < 2 {
            return f64::NAN;
        }
        let ys: Vec<f64> = rows.iter().map(|r| f(r).ln()).collect();
        least_squares_slope(&logs, &ys).unwrap_or(f64::NAN)
    };
    Ok(CertificateReport {
        p,
        tau_nodes,
        fitted_constant: ratio_min(&|r| r.accounted_bound),
        moment_constant: ratio_min(&|r| r.moment),
        moment_exponent: slope_of(&|r| r.moment),
        certificate_exponent: slope_of(&|r| r.accounted_bound),
        degenerate: p <= 1.0,
        all_positive: rows.iter().all(|r| r.positive),
        all_ordered: rows.iter().all(|r| r.ordered),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat2;
    use crate::substitution::CoinAngles;
    use std::f64::consts::PI;

    fn tm() -> WalkModel {
        WalkModel::thue_morse(CoinAngles::new(PI / 3.0, PI / 5.0).unwrap(), 0)
    }

    #[test]
    fn shift_resolvent_closed_form() {
        let z = SpectralParameter::from_phase(0.7, 0.2).unwrap();
        let problem = TruncatedResolventProblem::from_model(&WalkModel::shift(), z, vec![6], 1e-12).unwrap();
        let sol = solve_resolvent(&problem).unwrap();
        assert!(sol.residual < 1e-10);
        for n in -6i64..=6 {
            let (p, m) = sol.state.amplitude(n);
            let expected = if n >= 0 { -z.z().powi(-(n as i32) - 1) } else { ZERO };
            assert!((p - expected).norm() < 1e-12, "n = {n}");
            assert!(m.norm() < 1e-12);
        }
    }

    #[test]
    fn resolvent_norm_bound() {
        let z = SpectralParameter::new(C64::new(0.0, 2.0)).unwrap();
        let problem = TruncatedResolventProblem::from_model(&tm(), z, vec![0], 1e-10).unwrap();
        let sol = solve_resolvent(&problem).unwrap();
        assert!(sol.state.norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn ill_posed_and_small_radius() {
        let on_circle = SpectralParameter::from_phase(0.3, 0.0).unwrap();
        assert!(matches!(
            TruncatedResolventProblem::from_model(&tm(), on_circle, vec![0], 1e-10),
            Err(Error::IllPosed(_))
        ));
        let z = SpectralParameter::from_phase(0.3, 0.1).unwrap();
        let bank = CoinBank::shift(-20, 20).unwrap();
        assert!(matches!(
            TruncatedResolventProblem::new(bank, z, vec![0], 1e-10),
            Err(Error::TruncationTooSmall { required: 239, available: 20 })
        ));
    }

    #[test]
    fn neumann_zero_horizon() {
        let z = SpectralParameter::from_phase(1.0, 0.5).unwrap();
        let bank = CoinBank::constant(-2, 2, Mat2::rotation(0.4)).unwrap();
        let s = neumann_oracle(&bank, &z, 0).unwrap();
        assert!((s.state.amplitude(0).0 + z.z().inv()).norm() < 1e-15);
        assert_eq!(s.state.site_weight(1), 0.0);
        assert!(neumann_oracle(&bank, &SpectralParameter::i(), 0).is_err());
    }

    #[test]
    fn neumann_reproduces_shift_closed_form() {
        let z = SpectralParameter::from_phase(0.7, 0.3).unwrap();
        let l_max = 200;
        let bank = CoinBank::shift(-(l_max as i64) - 1, l_max as i64 + 1).unwrap();
        let s = neumann_oracle(&bank, &z, l_max).unwrap();
        for n in 0..10 {
            let expected = -z.z().powi(-(n as i32) - 1);
            assert!((s.state.amplitude(n).0 - expected).norm() <= s.tail_bound + 1e-14);
        }
    }

    #[test]
    fn truncation_converges() {
        let z = SpectralParameter::off_circle(1.4, 20.0).unwrap();
        let change = truncation_change(&tm(), z, &[0, 3, -7], 1e-10).unwrap();
        assert!(change < 1e-8, "change {change}");
    }

    #[test]
    fn parseval_shift_closed_form() {
        let l = 10.0;
        let r = parseval_check(&WalkModel::shift(), 3, l, 1e-12, node_floor(l), 1e-12).unwrap();
        let expected = (-6.0 / l).exp();
        assert!((r.lhs - expected).abs() < 1e-14);
        assert!((r.rhs - expected).abs() < 1e-6 * expected, "rhs {}", r.rhs);
    }

    #[test]
    fn parseval_node_floor() {
        assert!(parseval_check(&WalkModel::shift(), 0, 10.0, 1e-8, 100, 1e-10).is_err());
    }

    #[test]
    fn parseval_far_outside_light_cone() {
        let r = parseval_check(&tm(), 400, 2.0, 1e-10, node_floor(2.0), 1e-10).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.rhs < 1e-30);
    }

    #[test]
    fn phase_window_geometry() {
        assert!(phase_window(0.01, 0.1).is_none());
        let d = phase_window(0.1, 0.02).unwrap();
        let z = C64::from_polar(0.02f64.exp(), FRAC_PI_2 + 0.999 * d);
        assert!((z - C64::new(0.0, 1.0)).norm() < 0.1);
        let z = C64::from_polar(0.02f64.exp(), FRAC_PI_2 + 1.001 * d);
        assert!((z - C64::new(0.0, 1.0)).norm() > 0.1);
    }

    #[test]
    fn window_scan_shift_floor() {
        // |⟨δ_n⁺, (S − z)⁻¹δ_0⁺⟩|² = |z|^{−2n−2} for n ≥ 0 and 0 on the left
        let (eps, l) = (0.1, 40.0);
        let s = resolvent_window_scan(&WalkModel::shift(), eps, l, 8, 1e-10).unwrap();
        assert_eq!(s.min_left, 0.0);
        let expected = (-2.0 * 10.0 / l).exp();
        assert!((s.min_right - expected).abs() < 1e-9, "{} vs {expected}", s.min_right);
        assert!(s.rows.iter().all(|r| (r.n.abs() as f64) > 5.0 && (r.n.abs() as f64) < 10.0));
        assert!(resolvent_window_scan(&WalkModel::shift(), 0.01, 5.0, 8, 1e-10).is_err());
    }

    #[test]
    fn certificate_rejects_small_scales() {
        assert!(moment_certificate(&WalkModel::shift(), 2.0, &[5.0], 16, 1e-8, 1e-10).is_err());
    }
}
