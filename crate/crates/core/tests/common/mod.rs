#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use qwalk::{CoinBank, Mat2, WalkState, C64};

/// Index of `(n, spin)` in a window starting at `n_min`; spin 0 is `+`.
pub fn idx(n_min: i64, n: i64, spin: usize) -> usize {
    2 * (n - n_min) as usize + spin
}

/// `U = SC` on `[n_min, n_max]` written out entry by entry. Amplitude
/// leaving the window is dropped, or wrapped around when `periodic`.
pub fn dense_walk(n_min: i64, coins: &[Mat2], periodic: bool) -> DMatrix<C64> {
    let sites = coins.len() as i64;
    let dim = 2 * coins.len();
    let mut u = DMatrix::<C64>::zeros(dim, dim);
    let wrap = |n: i64| -> Option<i64> {
        let k = n - n_min;
        if (0..sites).contains(&k) {
            Some(n)
        } else if periodic {
            Some(n_min + k.rem_euclid(sites))
        } else {
            None
        }
    };
    for (k, c) in coins.iter().enumerate() {
        let n = n_min + k as i64;
        for spin in 0..2 {
            let col = idx(n_min, n, spin);
            if let Some(r) = wrap(n + 1) {
                u[(idx(n_min, r, 0), col)] += c[(0, spin)];
            }
            if let Some(l) = wrap(n - 1) {
                u[(idx(n_min, l, 1), col)] += c[(1, spin)];
            }
        }
    }
    u
}

pub fn dense_from_bank(bank: &CoinBank) -> DMatrix<C64> {
    dense_walk(bank.n_min(), bank.coins(), false)
}

pub fn to_vector(state: &WalkState, n_min: i64, n_max: i64) -> DVector<C64> {
    let mut v = DVector::zeros(2 * (n_max - n_min + 1) as usize);
    for n in n_min..=n_max {
        let (p, m) = state.amplitude(n);
        v[idx(n_min, n, 0)] = p;
        v[idx(n_min, n, 1)] = m;
    }
    v
}

pub fn from_vector(v: &DVector<C64>, n_min: i64) -> WalkState {
    let plus = v.iter().step_by(2).copied().collect();
    let minus = v.iter().skip(1).step_by(2).copied().collect();
    WalkState::new(n_min, plus, minus).unwrap()
}

/// `a(n)` read off a dense state vector.
pub fn dense_weights(v: &DVector<C64>) -> Vec<f64> {
    v.as_slice().chunks(2).map(|c| c[0].norm_sqr() + c[1].norm_sqr()).collect()
}
