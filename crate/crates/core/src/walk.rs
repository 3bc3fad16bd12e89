//! Exact time evolution of the coined walk `U = SC` on finite windows.
//!
//! One step sends `δ_n⁺ ↦ c¹¹ₙ δ_{n+1}⁺ + c²¹ₙ δ_{n−1}⁻` and
//! `δ_n⁻ ↦ c¹²ₙ δ_{n+1}⁺ + c²²ₙ δ_{n−1}⁻`. Mass moves by exactly one site per
//! step, so a window of radius `ℓ_max + r₀ + 1` around an initial state
//! supported in `[−r₀, r₀]` reproduces the infinite-lattice dynamics exactly
//! up to time `ℓ_max`.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pairwise_sum, Mat2, C64, ONE, ZERO};
use crate::substitution::{angle_at, CoinAngles, CoinSequence, SubshiftWindow};

/// Default truncation of the exponential time average.
pub const DEFAULT_TAIL_TOL: f64 = 1e-8;

/// Per-site coins `C_n` on the window `[n_min, n_max]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoinBank {
    n_min: i64,
    coins: Vec<Mat2>,
}

impl CoinBank {
    /// Coins supplied directly; no unitarity check is made here.
    pub fn from_matrices(n_min: i64, coins: Vec<Mat2>) -> Result<Self> {
        if coins.is_empty() {
            return Err(Error::invalid("coin bank must cover at least one site"));
        }
        Ok(Self { n_min, coins })
    }

    pub fn constant(n_min: i64, n_max: i64, coin: Mat2) -> Result<Self> {
        if n_min > n_max {
            return Err(Error::invalid(format!("empty coin window [{n_min}, {n_max}]")));
        }
        Self::from_matrices(n_min, vec![coin; (n_max - n_min + 1) as usize])
    }

    /// Identity coins everywhere: `U = S`.
    pub fn shift(n_min: i64, n_max: i64) -> Result<Self> {
        Self::constant(n_min, n_max, Mat2::identity())
    }

    pub fn n_min(&self) -> i64 {
        self.n_min
    }

    pub fn n_max(&self) -> i64 {
        self.n_min + self.coins.len() as i64 - 1
    }

    pub fn covers(&self, lo: i64, hi: i64) -> bool {
        lo >= self.n_min && hi <= self.n_max()
    }

    pub fn coin_at(&self, n: i64) -> Option<&Mat2> {
        if n < self.n_min {
            return None;
        }
        self.coins.get((n - self.n_min) as usize)
    }

    pub fn coins(&self) -> &[Mat2] {
        &self.coins
    }

    /// Largest `max |C*C − I|` over the bank.
    pub fn max_unitarity_defect(&self) -> f64 {
        self.coins.iter().map(Mat2::unitarity_defect).fold(0.0, f64::max)
    }

    /// Replaces the coin at site `n`.
    pub fn set_coin(&mut self, n: i64, coin: Mat2) -> Result<()> {
        let n_max = self.n_max();
        let slot = self
            .coins
            .get_mut(usize::try_from(n - self.n_min).unwrap_or(usize::MAX))
            .ok_or_else(|| Error::invalid(format!("site {n} outside coin window [.., {n_max}]")))?;
        *slot = coin;
        Ok(())
    }
}

/// Rotation coins `R_φ` on symbol 0 and `R_θ` on symbol 1.
pub fn build_coins(x: &SubshiftWindow, angles: &CoinAngles) -> CoinBank {
    let coins =
        (x.n_min..=x.n_max).map(|n| Mat2::rotation(angle_at(x, n, angles).expect("site inside window"))).collect();
    CoinBank { n_min: x.n_min, coins }
}

/// Spinor amplitudes `(ψ_n⁺, ψ_n⁻)` on `[n_min, n_max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkState {
    pub n_min: i64,
    pub plus: Vec<C64>,
    pub minus: Vec<C64>,
}

impl WalkState {
    pub fn new(n_min: i64, plus: Vec<C64>, minus: Vec<C64>) -> Result<Self> {
        if plus.len() != minus.len() || plus.is_empty() {
            return Err(Error::invalid("spin components must be nonempty and of equal length"));
        }
        Ok(Self { n_min, plus, minus })
    }

    pub fn zeros(n_min: i64, n_max: i64) -> Result<Self> {
        if n_min > n_max {
            return Err(Error::invalid(format!("empty window [{n_min}, {n_max}]")));
        }
        let len = (n_max - n_min + 1) as usize;
        Ok(Self { n_min, plus: vec![ZERO; len], minus: vec![ZERO; len] })
    }

    /// `δ_0⁺` embedded in `[n_min, n_max]`.
    pub fn delta_plus(n_min: i64, n_max: i64) -> Result<Self> {
        if !(n_min..=n_max).contains(&0) {
            return Err(Error::invalid("window must contain the origin"));
        }
        let mut s = Self::zeros(n_min, n_max)?;
        s.plus[(-n_min) as usize] = ONE;
        Ok(s)
    }

    pub fn n_max(&self) -> i64 {
        self.n_min + self.plus.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plus.is_empty()
    }

    pub fn contains(&self, n: i64) -> bool {
        (self.n_min..=self.n_max()).contains(&n)
    }

    /// `(ψ_n⁺, ψ_n⁻)`, zero outside the window.
    pub fn amplitude(&self, n: i64) -> (C64, C64) {
        if self.contains(n) {
            let k = (n - self.n_min) as usize;
            (self.plus[k], self.minus[k])
        } else {
            (ZERO, ZERO)
        }
    }

    /// `|ψ_n⁺|² + |ψ_n⁻|²`.
    pub fn site_weight(&self, n: i64) -> f64 {
        let (p, m) = self.amplitude(n);
        p.norm_sqr() + m.norm_sqr()
    }

    pub fn norm_sqr(&self) -> f64 {
        let w: Vec<f64> = self.plus.iter().zip(&self.minus).map(|(p, m)| p.norm_sqr() + m.norm_sqr()).collect();
        pairwise_sum(&w)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Largest `|n|` carrying a nonzero amplitude, or `None` for the zero state.
    pub fn support_radius(&self) -> Option<i64> {
        (0..self.len())
            .filter(|&k| self.plus[k] != ZERO || self.minus[k] != ZERO)
            .map(|k| (self.n_min + k as i64).abs())
            .max()
    }
}

/// One application of `U = SC`. The output window is one site wider on each
/// side; the coins must cover every input site.
pub fn apply_walk(state: &WalkState, coins: &CoinBank) -> Result<WalkState> {
    if !coins.covers(state.n_min, state.n_max()) {
        return Err(Error::invalid(format!(
            "coins cover [{}, {}] but the state needs [{}, {}]",
            coins.n_min(),
            coins.n_max(),
            state.n_min,
            state.n_max()
        )));
    }
    let mut out = WalkState::zeros(state.n_min - 1, state.n_max() + 1)?;
    for k in 0..state.len() {
        let n = state.n_min + k as i64;
        let c = coins.coin_at(n).expect("covered");
        let (p, m) = (state.plus[k], state.minus[k]);
        // input index k ↔ output index k + 1
        out.plus[k + 2] += c[(0, 0)] * p + c[(0, 1)] * m;
        out.minus[k] += c[(1, 0)] * p + c[(1, 1)] * m;
    }
    Ok(out)
}

/// `a(n, ℓ)` split by spin component over a window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityProfile {
    pub time: usize,
    pub n_min: i64,
    pub a_plus: Vec<f64>,
    pub a_minus: Vec<f64>,
}

impl ProbabilityProfile {
    pub fn from_state(time: usize, state: &WalkState) -> Self {
        Self {
            time,
            n_min: state.n_min,
            a_plus: state.plus.iter().map(|a| a.norm_sqr()).collect(),
            a_minus: state.minus.iter().map(|a| a.norm_sqr()).collect(),
        }
    }

    /// All mass on `δ_0⁺`.
    pub fn point_mass(time: usize) -> Self {
        Self { time, n_min: 0, a_plus: vec![1.0], a_minus: vec![0.0] }
    }

    pub fn n_max(&self) -> i64 {
        self.n_min + self.a_plus.len() as i64 - 1
    }

    /// `a(n, ℓ)`, zero outside the stored window.
    pub fn at(&self, n: i64) -> f64 {
        if n < self.n_min || n > self.n_max() {
            return 0.0;
        }
        let k = (n - self.n_min) as usize;
        self.a_plus[k] + self.a_minus[k]
    }

    pub fn total_mass(&self) -> f64 {
        let v: Vec<f64> = self.a_plus.iter().zip(&self.a_minus).map(|(p, m)| p + m).collect();
        pairwise_sum(&v)
    }

    /// Rows `(n, a_plus, a_minus, a_total)`.
    pub fn rows(&self) -> impl Iterator<Item = (i64, f64, f64, f64)> + '_ {
        self.a_plus.iter().zip(&self.a_minus).enumerate().map(move |(k, (&p, &m))| (self.n_min + k as i64, p, m, p + m))
    }
}

/// Lazy iterator over `a(·, ℓ)` for `ℓ = 0, …, ℓ_max`, stepping two fixed
/// buffers in place and touching only the active light cone.
pub struct Evolution<'a> {
    coins: &'a CoinBank,
    plus: Vec<C64>,
    minus: Vec<C64>,
    scratch_plus: Vec<C64>,
    scratch_minus: Vec<C64>,
    n_min: i64,
    // active index range (inclusive) holding all nonzero amplitudes
    lo: usize,
    hi: usize,
    time: usize,
    l_max: usize,
}

impl<'a> Evolution<'a> {
    /// Checks that `coins` has radius at least `ℓ_max + r₀ + 1` around the
    /// initial support and embeds `initial` in that window.
    pub fn new(initial: &WalkState, coins: &'a CoinBank, l_max: usize) -> Result<Self> {
        let r0 = initial.support_radius().unwrap_or(0);
        let radius = l_max as i64 + r0 + 1;
        if !coins.covers(-radius, radius) {
            return Err(Error::invalid(format!(
                "coin window [{}, {}] too small: evolution to l_max = {l_max} needs radius {radius}",
                coins.n_min(),
                coins.n_max()
            )));
        }
        let n_min = -radius;
        let len = (2 * radius + 1) as usize;
        let mut plus = vec![ZERO; len];
        let mut minus = vec![ZERO; len];
        for k in 0..initial.len() {
            let n = initial.n_min + k as i64;
            if n < -radius || n > radius {
                continue;
            }
            let idx = (n - n_min) as usize;
            plus[idx] = initial.plus[k];
            minus[idx] = initial.minus[k];
        }
        let centre = radius as usize;
        Ok(Self {
            coins,
            scratch_plus: vec![ZERO; len],
            scratch_minus: vec![ZERO; len],
            plus,
            minus,
            n_min,
            lo: centre - r0 as usize,
            hi: centre + r0 as usize,
            time: 0,
            l_max,
        })
    }

    pub fn state(&self) -> WalkState {
        WalkState { n_min: self.n_min, plus: self.plus.clone(), minus: self.minus.clone() }
    }

    /// Current `(ψ⁺, ψ⁻)` on the evolution window starting at [`Self::n_min`].
    pub fn amplitudes(&self) -> (&[C64], &[C64]) {
        (&self.plus, &self.minus)
    }

    pub fn n_min(&self) -> i64 {
        self.n_min
    }

    pub fn time(&self) -> usize {
        self.time
    }

    /// One step of `U`, independent of the iterator's horizon.
    pub fn advance(&mut self) {
        self.step();
    }

    fn step(&mut self) {
        let (lo, hi) = (self.lo, self.hi);
        let new_lo = lo.saturating_sub(1);
        let new_hi = (hi + 1).min(self.plus.len() - 1);
        for k in new_lo..=new_hi {
            self.scratch_plus[k] = ZERO;
            self.scratch_minus[k] = ZERO;
        }
        let first = self.coins.n_min();
        for k in lo..=hi {
            let n = self.n_min + k as i64;
            let c = &self.coins.coins[(n - first) as usize];
            let (p, m) = (self.plus[k], self.minus[k]);
            if k + 1 < self.plus.len() {
                self.scratch_plus[k + 1] += c[(0, 0)] * p + c[(0, 1)] * m;
            }
            if k > 0 {
                self.scratch_minus[k - 1] += c[(1, 0)] * p + c[(1, 1)] * m;
            }
        }
        for k in lo..=hi {
            self.plus[k] = ZERO;
            self.minus[k] = ZERO;
        }
        std::mem::swap(&mut self.plus, &mut self.scratch_plus);
        std::mem::swap(&mut self.minus, &mut self.scratch_minus);
        self.lo = new_lo;
        self.hi = new_hi;
        self.time += 1;
    }
}

impl Iterator for Evolution<'_> {
    type Item = ProbabilityProfile;

    fn next(&mut self) -> Option<ProbabilityProfile> {
        if self.time > self.l_max {
            return None;
        }
        let profile = ProbabilityProfile {
            time: self.time,
            n_min: self.n_min,
            a_plus: self.plus.iter().map(|a| a.norm_sqr()).collect(),
            a_minus: self.minus.iter().map(|a| a.norm_sqr()).collect(),
        };
        if self.time < self.l_max {
            self.step();
        } else {
            self.time += 1;
        }
        Some(profile)
    }
}

/// `a(·, ℓ)` for `ℓ = 0, …, ℓ_max`, exact on the infinite lattice.
pub fn evolve(initial: &WalkState, coins: &CoinBank, l_max: usize) -> Result<Vec<ProbabilityProfile>> {
    Ok(Evolution::new(initial, coins, l_max)?.collect())
}

/// Final state `U^ℓ ψ` on the evolution window.
pub fn evolve_state(initial: &WalkState, coins: &CoinBank, steps: usize) -> Result<WalkState> {
    let mut ev = Evolution::new(initial, coins, steps)?;
    for _ in 0..steps {
        ev.step();
    }
    Ok(ev.state())
}

/// `ã(n, L) = (1 − e^{−2/L}) Σ_ℓ e^{−2ℓ/L} a(n, ℓ)` truncated at `ℓ_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeAveragedProfile {
    pub scale: f64,
    pub n_min: i64,
    pub a_plus: Vec<f64>,
    pub a_minus: Vec<f64>,
    pub l_max: usize,
    /// Total weight `e^{−2(ℓ_max+1)/L}` of the omitted times.
    pub tail_bound: f64,
}

impl TimeAveragedProfile {
    pub fn n_max(&self) -> i64 {
        self.n_min + self.a_plus.len() as i64 - 1
    }

    pub fn at(&self, n: i64) -> f64 {
        if n < self.n_min || n > self.n_max() {
            return 0.0;
        }
        let k = (n - self.n_min) as usize;
        self.a_plus[k] + self.a_minus[k]
    }

    pub fn total_mass(&self) -> f64 {
        let v: Vec<f64> = self.a_plus.iter().zip(&self.a_minus).map(|(p, m)| p + m).collect();
        pairwise_sum(&v)
    }

    pub fn rows(&self) -> impl Iterator<Item = (i64, f64, f64, f64)> + '_ {
        self.a_plus.iter().zip(&self.a_minus).enumerate().map(move |(k, (&p, &m))| (self.n_min + k as i64, p, m, p + m))
    }
}

/// Smallest `ℓ_max` with `e^{−2ℓ_max/L} ≤ tail_tol`.
pub fn required_horizon(scale: f64, tail_tol: f64) -> Result<usize> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid(format!("time scale L = {scale} must be positive")));
    }
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(Error::invalid(format!("tail_tol = {tail_tol} must lie in (0, 1)")));
    }
    Ok((0.5 * scale * (1.0 / tail_tol).ln()).ceil() as usize)
}

/// Exponentially weighted time average of consecutive profiles `ℓ = 0, 1, …`.
pub fn time_averaged_profile<I, P>(profiles: I, scale: f64, tail_tol: f64) -> Result<TimeAveragedProfile>
where
    I: IntoIterator<Item = P>,
    P: std::borrow::Borrow<ProbabilityProfile>,
{
    let required = required_horizon(scale, tail_tol)?;
    let q = (-2.0 / scale).exp();
    let norm = -(-2.0 / scale).exp_m1();
    let mut n_min = 0i64;
    let mut plus: Vec<f64> = Vec::new();
    let mut minus: Vec<f64> = Vec::new();
    let mut count = 0usize;
    let mut weight = norm;
    for profile in profiles {
        let p = profile.borrow();
        if p.time != count {
            return Err(Error::invalid(format!("profile times must run 0, 1, …; got {} at position {count}", p.time)));
        }
        if plus.is_empty() {
            n_min = p.n_min;
            plus = vec![0.0; p.a_plus.len()];
            minus = vec![0.0; p.a_plus.len()];
        }
        if p.n_min < n_min || p.n_max() > n_min + plus.len() as i64 - 1 {
            // widen the accumulator to the union of windows
            let lo = n_min.min(p.n_min);
            let hi = (n_min + plus.len() as i64 - 1).max(p.n_max());
            let shift = (n_min - lo) as usize;
            let len = (hi - lo + 1) as usize;
            let mut np = vec![0.0; len];
            let mut nm = vec![0.0; len];
            np[shift..shift + plus.len()].copy_from_slice(&plus);
            nm[shift..shift + minus.len()].copy_from_slice(&minus);
            plus = np;
            minus = nm;
            n_min = lo;
        }
        let off = (p.n_min - n_min) as usize;
        for (k, (&ap, &am)) in p.a_plus.iter().zip(&p.a_minus).enumerate() {
            plus[off + k] += weight * ap;
            minus[off + k] += weight * am;
        }
        weight *= q;
        count += 1;
    }
    if count == 0 || count - 1 < required {
        return Err(Error::InsufficientHorizon { required, available: count.saturating_sub(1) });
    }
    let l_max = count - 1;
    Ok(TimeAveragedProfile { scale, n_min, a_plus: plus, a_minus: minus, l_max, tail_bound: q.powi(l_max as i32 + 1) })
}

/// `⟨|X|^p⟩(L) = Σ_n (|n| + 1)^p ã(n, L)`.
pub fn moment(profile: &TimeAveragedProfile, p: f64) -> f64 {
    let terms: Vec<f64> = profile.rows().map(|(n, _, _, a)| ((n.abs() + 1) as f64).powf(p) * a).collect();
    pairwise_sum(&terms)
}

/// Coins drawn from a coin sequence: `R_φ` on 0, `R_θ` on 1.
#[derive(Clone, Debug, PartialEq)]
pub struct PatternCoins {
    pub sequence: CoinSequence,
    pub offset: usize,
    pub angles: CoinAngles,
    pub cache_dir: Option<PathBuf>,
}

/// A walk operator that can produce coin banks on demand for any radius.
#[derive(Clone, Debug, PartialEq)]
pub enum WalkModel {
    /// `U = I`. Not a coined walk; kept as the localized baseline.
    Identity,
    /// The same coin at every site; the identity coin gives `U = S`.
    ConstantCoin(Mat2),
    Pattern(PatternCoins),
}

impl WalkModel {
    pub fn shift() -> Self {
        WalkModel::ConstantCoin(Mat2::identity())
    }

    pub fn thue_morse(angles: CoinAngles, offset: usize) -> Self {
        WalkModel::Pattern(PatternCoins { sequence: CoinSequence::ThueMorse, offset, angles, cache_dir: None })
    }

    pub fn pattern(sequence: CoinSequence, offset: usize, angles: CoinAngles) -> Self {
        WalkModel::Pattern(PatternCoins { sequence, offset, angles, cache_dir: None })
    }

    /// Coins on `[n_min, n_max]`; `None` for the identity operator.
    pub fn coin_bank(&self, n_min: i64, n_max: i64) -> Result<Option<CoinBank>> {
        match self {
            WalkModel::Identity => Ok(None),
            WalkModel::ConstantCoin(c) => CoinBank::constant(n_min, n_max, *c).map(Some),
            WalkModel::Pattern(pc) => {
                let x = pc.sequence.window_cached(pc.offset, n_min, n_max, pc.cache_dir.as_deref())?;
                Ok(Some(build_coins(&x, &pc.angles)))
            }
        }
    }

    /// Coins covering the exact-evolution window for `ℓ_max` steps from `δ_0⁺`.
    pub fn evolution_bank(&self, l_max: usize) -> Result<Option<CoinBank>> {
        let r = l_max as i64 + 1;
        self.coin_bank(-r, r)
    }

    /// `a(·, ℓ)` for `ℓ = 0..=ℓ_max` from `δ_0⁺`.
    pub fn profiles(&self, l_max: usize) -> Result<Vec<ProbabilityProfile>> {
        match self.evolution_bank(l_max)? {
            None => Ok((0..=l_max).map(ProbabilityProfile::point_mass).collect()),
            Some(bank) => evolve(&WalkState::delta_plus(0, 0)?, &bank, l_max),
        }
    }

    /// Streams the evolution straight into the time average without storing
    /// every profile.
    pub fn time_averaged(&self, scale: f64, tail_tol: f64) -> Result<TimeAveragedProfile> {
        let l_max = required_horizon(scale, tail_tol)?;
        match self.evolution_bank(l_max)? {
            // a(·, ℓ) = δ_0 for every ℓ, so the full series sums to δ_0 exactly
            None => Ok(TimeAveragedProfile {
                scale,
                n_min: 0,
                a_plus: vec![1.0],
                a_minus: vec![0.0],
                l_max,
                tail_bound: 0.0,
            }),
            Some(bank) => {
                let ev = Evolution::new(&WalkState::delta_plus(0, 0)?, &bank, l_max)?;
                time_averaged_profile(ev, scale, tail_tol)
            }
        }
    }
}

/// Geometric grid `start · ratio^k`, `k = 0..count`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleGrid {
    pub start: f64,
    pub ratio: f64,
    pub count: usize,
}

impl ScaleGrid {
    pub fn new(start: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(start > 0.0 && start.is_finite()) {
            return Err(Error::invalid(format!("grid start {start} must be positive")));
        }
        if !(ratio > 1.0 && ratio.is_finite()) {
            return Err(Error::invalid(format!("grid ratio {ratio} must exceed 1")));
        }
        if count == 0 {
            return Err(Error::invalid("grid needs at least one point"));
        }
        Ok(Self { start, ratio, count })
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.start * self.ratio.powi(k as i32)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentPoint {
    #[serde(rename = "L")]
    pub scale: f64,
    pub p: f64,
    pub moment: f64,
    pub log_moment: f64,
}

/// Moments for every `(L, p)` pair; time averages are computed once per `L`
/// and in parallel across `L`.
pub fn moment_series(model: &WalkModel, scales: &[f64], ps: &[f64], tail_tol: f64) -> Result<Vec<MomentPoint>> {
    let per_scale: Vec<Result<Vec<MomentPoint>>> = scales
        .par_iter()
        .map(|&l| {
            let avg = model.time_averaged(l, tail_tol)?;
            Ok(ps
                .iter()
                .map(|&p| {
                    let m = moment(&avg, p);
                    MomentPoint { scale: l, p, moment: m, log_moment: m.ln() }
                })
                .collect())
        })
        .collect();
    let mut out = Vec::with_capacity(scales.len() * ps.len());
    for r in per_scale {
        out.extend(r?);
    }
    Ok(out)
}

/// Finite-grid proxies for the transport exponents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentEstimate {
    pub p: f64,
    /// Least-squares slope of `log⟨|X|^p⟩` against `p log L`.
    pub slope: f64,
    /// Smallest consecutive slope (liminf proxy).
    pub slope_local_min: f64,
    /// Largest consecutive slope (limsup proxy).
    pub slope_local_max: f64,
    pub moments: Vec<MomentPoint>,
}

/// Slope fit of `log m` against `p log L`.
pub fn fit_exponents(p: f64, moments: Vec<MomentPoint>) -> Result<ExponentEstimate> {
    if moments.len() < 2 {
        return Err(Error::invalid("slope fit needs at least two scales"));
    }
    let xs: Vec<f64> = moments.iter().map(|m| p * m.scale.ln()).collect();
    let ys: Vec<f64> = moments.iter().map(|m| m.log_moment).collect();
    let slope = least_squares_slope(&xs, &ys)?;
    let local: Vec<f64> = xs.windows(2).zip(ys.windows(2)).map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0])).collect();
    Ok(ExponentEstimate {
        p,
        slope,
        slope_local_min: local.iter().copied().fold(f64::INFINITY, f64::min),
        slope_local_max: local.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        moments,
    })
}

pub(crate) fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return Err(Error::invalid("degenerate grid: all abscissae coincide"));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Transport-exponent proxies for one `p` over a grid of at least five scales.
pub fn transport_exponent_estimate(p: f64, grid: &[f64], model: &WalkModel, tail_tol: f64) -> Result<ExponentEstimate> {
    if !(p > 0.0) {
        return Err(Error::invalid(format!("moment order p = {p} must be positive")));
    }
    if grid.len() < 5 {
        return Err(Error::invalid(format!("scale grid has {} points; at least 5 are required", grid.len())));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("scale grid must be strictly increasing"));
    }
    let moments = moment_series(model, grid, &[p], tail_tol)?;
    fit_exponents(p, moments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::substitution::sequence_window;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn delta() -> WalkState {
        WalkState::delta_plus(0, 0).unwrap()
    }

    #[test]
    fn build_coins_examples() {
        let angles = CoinAngles::new(PI / 3.0, PI / 5.0).unwrap();
        let x = sequence_window(0, 0, 3).unwrap();
        let bank = build_coins(&x, &angles);
        assert_eq!(*bank.coin_at(0).unwrap(), Mat2::rotation(PI / 5.0));
        assert_eq!(*bank.coin_at(1).unwrap(), Mat2::rotation(PI / 3.0));
        assert_eq!(Mat2::rotation(0.0), Mat2::identity());
        let flat = build_coins(&x, &CoinAngles::new(0.7, 0.7).unwrap());
        assert!(flat.coins().windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn hadamard_like_single_step() {
        let coins = CoinBank::constant(-2, 2, Mat2::rotation(PI / 4.0)).unwrap();
        let s = apply_walk(&delta(), &coins).unwrap();
        assert!((s.amplitude(1).0.re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((s.amplitude(-1).1.re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(s.amplitude(1).1, ZERO);
        assert_eq!(s.amplitude(-1).0, ZERO);
        assert_eq!(s.site_weight(0), 0.0);
    }

    #[test]
    fn identity_coins_shift_right() {
        let coins = CoinBank::shift(-3, 3).unwrap();
        let s = apply_walk(&delta(), &coins).unwrap();
        assert_eq!(s.amplitude(1), (ONE, ZERO));
        assert_eq!(s.norm_sqr(), 1.0);
    }

    #[test]
    fn two_steps_of_pi_over_four() {
        let coins = CoinBank::constant(-4, 4, Mat2::rotation(PI / 4.0)).unwrap();
        let profiles = evolve(&delta(), &coins, 2).unwrap();
        let a = &profiles[2];
        assert!((a.at(2) - 0.25).abs() < 1e-15);
        assert!((a.at(0) - 0.5).abs() < 1e-15);
        assert!((a.at(-2) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn apply_walk_requires_coverage() {
        let coins = CoinBank::shift(0, 0).unwrap();
        let s = WalkState::delta_plus(-1, 1).unwrap();
        assert!(apply_walk(&s, &coins).is_err());
    }

    #[test]
    fn evolve_requires_radius() {
        let coins = CoinBank::shift(-3, 3).unwrap();
        assert!(evolve(&delta(), &coins, 3).is_err());
        assert!(evolve(&delta(), &coins, 2).is_ok());
    }

    #[test]
    fn shift_moves_ballistically() {
        let profiles = WalkModel::shift().profiles(10).unwrap();
        for p in &profiles {
            for n in -12..=12 {
                let expected = if n == p.time as i64 { 1.0 } else { 0.0 };
                assert_eq!(p.at(n), expected);
            }
        }
    }

    #[test]
    fn zero_horizon() {
        let profiles = WalkModel::shift().profiles(0).unwrap();
        assert_eq!(profiles.len(), 1);
        assert_eq!(profiles[0].at(0), 1.0);
    }

    #[test]
    fn identity_average_is_point_mass() {
        for l in [1.0, 7.5, 40.0] {
            let avg = WalkModel::Identity.time_averaged(l, 1e-8).unwrap();
            assert_eq!(avg.at(0), 1.0);
            assert_eq!(avg.tail_bound, 0.0);
            assert_eq!(moment(&avg, 3.0), 1.0);
            // the streamed truncated sum misses exactly the tail
            let streamed = time_averaged_profile((0..=avg.l_max).map(ProbabilityProfile::point_mass), l, 1e-8).unwrap();
            assert!((streamed.at(0) - (1.0 - streamed.tail_bound)).abs() < 1e-14);
        }
    }

    #[test]
    fn shift_average_is_geometric() {
        let l = 10.0;
        let avg = WalkModel::shift().time_averaged(l, 1e-10).unwrap();
        let q = (-2.0 / l).exp();
        for n in 0..50 {
            let expected = (1.0 - q) * q.powi(n);
            assert!((avg.at(n as i64) - expected).abs() < 1e-15, "n = {n}");
        }
        assert_eq!(avg.at(-1), 0.0);
        assert!((avg.total_mass() - 1.0).abs() <= avg.tail_bound + 1e-10);
    }

    #[test]
    fn horizon_is_enforced() {
        let profiles = WalkModel::shift().profiles(10).unwrap();
        let err = time_averaged_profile(&profiles, 10.0, 1e-8).unwrap_err();
        assert!(matches!(err, Error::InsufficientHorizon { required: 93, available: 10 }));
    }

    #[test]
    fn single_site_moment() {
        let avg = TimeAveragedProfile {
            scale: 1.0,
            n_min: 3,
            a_plus: vec![1.0],
            a_minus: vec![0.0],
            l_max: 0,
            tail_bound: 0.0,
        };
        assert_eq!(moment(&avg, 2.0), 16.0);
    }

    #[test]
    fn exponent_grid_validation() {
        let m = WalkModel::Identity;
        assert!(transport_exponent_estimate(2.0, &[1.0, 2.0, 3.0, 4.0], &m, 1e-8).is_err());
        assert!(transport_exponent_estimate(2.0, &[1.0, 2.0, 2.0, 4.0, 5.0], &m, 1e-8).is_err());
        let e = transport_exponent_estimate(2.0, &[2.0, 4.0, 8.0, 16.0, 32.0], &m, 1e-8).unwrap();
        assert!(e.slope.abs() < 1e-8);
    }

    #[test]
    fn shift_exponent_is_ballistic() {
        let grid = ScaleGrid::new(50.0, 2f64.sqrt(), 7).unwrap().values();
        let e = transport_exponent_estimate(2.0, &grid, &WalkModel::shift(), 1e-8).unwrap();
        assert!((e.slope - 1.0).abs() < 0.05, "slope {}", e.slope);
    }

    #[test]
    fn scale_grid_validation() {
        assert!(ScaleGrid::new(0.0, 2.0, 3).is_err());
        assert!(ScaleGrid::new(1.0, 1.0, 3).is_err());
        assert_eq!(ScaleGrid::new(25.0, 2.0, 5).unwrap().values(), vec![25.0, 50.0, 100.0, 200.0, 400.0]);
    }

    #[test]
    fn state_support_radius() {
        let mut s = WalkState::zeros(-5, 5).unwrap();
        assert_eq!(s.support_radius(), None);
        s.minus[1] = ONE;
        assert_eq!(s.support_radius(), Some(4));
    }
}
