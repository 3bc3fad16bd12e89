//! Substitution words over the binary alphabet, fixed-point prefixes, factor
//! legality, and finite windows of two-sided coin sequences.
//!
//! The Thue–Morse substitution `0 → 01, 1 → 10` is the main instance; the
//! Fibonacci substitution `0 → 01, 1 → 0` is available for comparison.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default cap on the number of symbols a generated word may hold.
pub const DEFAULT_SYMBOL_CAP: usize = 1 << 28;

/// Multiple of the factor length searched by the legality test.
pub const RECURRENCE_MARGIN: usize = 16;

/// Finite word over `{0, 1}`. Symbols are stored as the bytes `0` and `1`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn new(symbols: Vec<u8>) -> Result<Self> {
        if let Some(bad) = symbols.iter().find(|&&s| s > 1) {
            return Err(Error::invalid(format!("symbol {bad} outside alphabet {{0,1}}")));
        }
        Ok(Self(symbols))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn symbols(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_prefix_of(&self, other: &Word) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn truncated(&self, len: usize) -> Word {
        Word(self.0[..len.min(self.0.len())].to_vec())
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// True if `needle` occurs as a contiguous block of `self`.
    pub fn contains(&self, needle: &Word) -> bool {
        needle.is_empty() || memchr::memmem::find(&self.0, &needle.0).is_some()
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.0.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect();
        f.write_str(&s)
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::invalid(format!("invalid symbol {other:?} in word"))),
            })
            .collect::<Result<Vec<u8>>>()
            .map(Word)
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A substitution on `{0, 1}`, given by the images of both symbols.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubstitutionRule {
    image_of_0: Word,
    image_of_1: Word,
}

impl SubstitutionRule {
    pub fn new(image_of_0: Word, image_of_1: Word) -> Result<Self> {
        if image_of_0.is_empty() || image_of_1.is_empty() {
            return Err(Error::invalid("substitution images must be nonempty"));
        }
        Ok(Self { image_of_0, image_of_1 })
    }

    pub fn thue_morse() -> Self {
        Self { image_of_0: Word(vec![0, 1]), image_of_1: Word(vec![1, 0]) }
    }

    pub fn fibonacci() -> Self {
        Self { image_of_0: Word(vec![0, 1]), image_of_1: Word(vec![0]) }
    }

    pub fn image(&self, symbol: u8) -> &Word {
        if symbol == 0 {
            &self.image_of_0
        } else {
            &self.image_of_1
        }
    }

    /// Applies the substitution symbol by symbol and concatenates the images.
    pub fn apply(&self, w: &Word) -> Word {
        let mut out = Vec::with_capacity(w.len() * self.image_of_0.len().max(self.image_of_1.len()));
        for &s in w.symbols() {
            out.extend_from_slice(self.image(s).symbols());
        }
        Word(out)
    }

    /// `S^n(seed)`, refusing to build words longer than [`DEFAULT_SYMBOL_CAP`].
    pub fn iterate(&self, seed: u8, n: usize) -> Result<Word> {
        self.iterate_with_cap(seed, n, DEFAULT_SYMBOL_CAP)
    }

    pub fn iterate_with_cap(&self, seed: u8, n: usize, cap: usize) -> Result<Word> {
        if seed > 1 {
            return Err(Error::invalid(format!("seed symbol {seed} outside alphabet")));
        }
        // letter counts predict the final length without building the word
        let count = |w: &Word, s: u8| w.symbols().iter().filter(|&&x| x == s).count() as u128;
        let (z0, o0) = (count(&self.image_of_0, 0), count(&self.image_of_0, 1));
        let (z1, o1) = (count(&self.image_of_1, 0), count(&self.image_of_1, 1));
        let (mut zeros, mut ones) = if seed == 0 { (1u128, 0u128) } else { (0, 1) };
        for _ in 0..n {
            (zeros, ones) = (
                zeros.saturating_mul(z0).saturating_add(ones.saturating_mul(z1)),
                zeros.saturating_mul(o0).saturating_add(ones.saturating_mul(o1)),
            );
        }
        let requested = zeros.saturating_add(ones);
        if requested > cap as u128 {
            return Err(Error::ResourceCap { requested: usize::try_from(requested).unwrap_or(usize::MAX), cap });
        }
        let mut w = Word(vec![seed]);
        for _ in 0..n {
            w = self.apply(&w);
        }
        Ok(w)
    }

    fn check_prefix_compatible(&self) -> Result<()> {
        if self.image_of_0.symbols()[0] != 0 || self.image_of_0.len() < 2 {
            return Err(Error::invalid(
                "substitution has no fixed point starting with 0 (image of 0 must start with 0 and grow)",
            ));
        }
        Ok(())
    }

    /// Shortest iterate `S^n(0)` of length at least `min_length`; a prefix of the
    /// one-sided fixed point.
    pub fn fixed_point_prefix(&self, min_length: usize) -> Result<Word> {
        self.fixed_point_prefix_with_cap(min_length, DEFAULT_SYMBOL_CAP)
    }

    pub fn fixed_point_prefix_with_cap(&self, min_length: usize, cap: usize) -> Result<Word> {
        self.check_prefix_compatible()?;
        if min_length > cap {
            return Err(Error::ResourceCap { requested: min_length, cap });
        }
        let mut w = Word(vec![0]);
        while w.len() < min_length {
            let next_len: usize = w.symbols().iter().map(|&s| self.image(s).len()).sum();
            if next_len > cap {
                return Err(Error::ResourceCap { requested: next_len, cap });
            }
            w = self.apply(&w);
        }
        Ok(w)
    }

    /// Like [`fixed_point_prefix`](Self::fixed_point_prefix), memoized as text
    /// files under `cache_dir` when one is given.
    pub fn fixed_point_prefix_cached(&self, min_length: usize, cache_dir: Option<&Path>) -> Result<Word> {
        let Some(dir) = cache_dir else {
            return self.fixed_point_prefix(min_length);
        };
        let key = format!("{}-{}", self.image_of_0, self.image_of_1);
        // reuse any cached prefix that is long enough
        if let Ok(entries) = fs::read_dir(dir) {
            for entry in entries.flatten() {
                let name = entry.file_name().to_string_lossy().into_owned();
                let Some(len) = name
                    .strip_prefix(&format!("prefix-{key}-"))
                    .and_then(|r| r.strip_suffix(".txt"))
                    .and_then(|r| r.parse::<usize>().ok())
                else {
                    continue;
                };
                if len >= min_length {
                    if let Ok(text) = fs::read_to_string(entry.path()) {
                        if let Ok(w) = text.trim().parse::<Word>() {
                            if w.len() == len {
                                return Ok(w);
                            }
                        }
                    }
                }
            }
        }
        let w = self.fixed_point_prefix(min_length)?;
        fs::create_dir_all(dir)?;
        // write then rename so concurrent readers never see a partial file
        let name = format!("prefix-{key}-{}.txt", w.len());
        let tmp = dir.join(format!(".{name}.{}", std::process::id()));
        fs::write(&tmp, w.to_string())?;
        fs::rename(&tmp, dir.join(name))?;
        Ok(w)
    }

    /// True iff `w` is a factor of the fixed point, searched within a prefix of
    /// length `max(64, 16·|w|)`.
    pub fn is_legal_factor(&self, w: &Word) -> Result<bool> {
        if w.is_empty() {
            return Ok(true);
        }
        let prefix = self.fixed_point_prefix((RECURRENCE_MARGIN * w.len()).max(64))?;
        Ok(prefix.contains(w))
    }
}

/// Thue–Morse instance of [`SubstitutionRule::apply`].
pub fn apply_substitution(rule: &SubstitutionRule, w: &Word) -> Word {
    rule.apply(w)
}

/// Factor legality for the Thue–Morse subshift.
pub fn is_legal_factor(w: &Word) -> bool {
    SubstitutionRule::thue_morse().is_legal_factor(w).expect("thue-morse prefix within cap")
}

/// Finite window `x_{n_min} … x_{n_max}` of a two-sided coin sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubshiftWindow {
    pub offset: usize,
    pub n_min: i64,
    pub n_max: i64,
    pub symbols: Word,
}

impl SubshiftWindow {
    /// Builds a window from explicit symbols `x_{n_min}, x_{n_min+1}, …`.
    pub fn from_symbols(offset: usize, n_min: i64, symbols: Word) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::invalid("window must contain at least one site"));
        }
        let n_max = n_min + symbols.len() as i64 - 1;
        Ok(Self { offset, n_min, n_max, symbols })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn contains(&self, n: i64) -> bool {
        (self.n_min..=self.n_max).contains(&n)
    }

    pub fn symbol_at(&self, n: i64) -> Result<u8> {
        if !self.contains(n) {
            return Err(Error::invalid(format!("site {n} outside window [{}, {}]", self.n_min, self.n_max)));
        }
        Ok(self.symbols.symbols()[(n - self.n_min) as usize])
    }
}

fn check_range(n_min: i64, n_max: i64) -> Result<()> {
    if n_min > n_max {
        return Err(Error::invalid(format!("empty window [{n_min}, {n_max}]")));
    }
    Ok(())
}

/// Window `x_n = w[j + n]` of the one-sided fixed point of `rule`.
pub fn fixed_point_window(rule: &SubstitutionRule, j: usize, n_min: i64, n_max: i64) -> Result<SubshiftWindow> {
    check_range(n_min, n_max)?;
    if j as i64 + n_min < 0 {
        return Err(Error::invalid(format!(
            "window start j + n_min = {} lies left of the one-sided fixed point",
            j as i64 + n_min
        )));
    }
    let start = (j as i64 + n_min) as usize;
    let end = (j as i64 + n_max) as usize;
    let prefix = rule.fixed_point_prefix(end + 1)?;
    let symbols = Word(prefix.symbols()[start..=end].to_vec());
    SubshiftWindow::from_symbols(j, n_min, symbols)
}

/// Window `x_n = w_TM[j + n]` of the one-sided Thue–Morse fixed point.
pub fn sequence_window(j: usize, n_min: i64, n_max: i64) -> Result<SubshiftWindow> {
    fixed_point_window(&SubstitutionRule::thue_morse(), j, n_min, n_max)
}

/// Reads the reflected two-sided extension `y_k = w[k]` (k ≥ 0),
/// `y_k = w[−k−1]` (k < 0) over `j + n_min ..= j + n_max`.
fn reflected_symbols(prefix: &Word, j: usize, n_min: i64, n_max: i64) -> Word {
    let w = prefix.symbols();
    Word(
        (n_min..=n_max)
            .map(|n| {
                let k = j as i64 + n;
                let idx = if k >= 0 { k } else { -k - 1 } as usize;
                w[idx]
            })
            .collect(),
    )
}

fn reflected_prefix_len(j: usize, n_min: i64, n_max: i64) -> usize {
    let lo = j as i64 + n_min;
    let hi = j as i64 + n_max;
    let need = if lo < 0 { (-lo) as usize } else { 0 };
    need.max(if hi >= 0 { hi as usize + 1 } else { 0 }).max(1)
}

/// Coin-pattern families accepted by the walk builders.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoinSequence {
    ThueMorse,
    Fibonacci,
    /// Repeats the first `q` Thue–Morse symbols with period `q`.
    Periodic(usize),
    /// All sites carry symbol 0.
    Constant,
}

impl CoinSequence {
    /// Window `x_{n_min..=n_max}` of the two-sided sequence shifted by `offset`.
    ///
    /// Substitution sequences use the reflected extension of the fixed point
    /// to the left. For Thue–Morse this is the two-sided fixed point of `S²`
    /// seeded by `0.0`, hence legal; for Fibonacci every window is checked.
    pub fn window(&self, offset: usize, n_min: i64, n_max: i64) -> Result<SubshiftWindow> {
        self.window_cached(offset, n_min, n_max, None)
    }

    pub fn window_cached(
        &self,
        offset: usize,
        n_min: i64,
        n_max: i64,
        cache_dir: Option<&Path>,
    ) -> Result<SubshiftWindow> {
        check_range(n_min, n_max)?;
        let symbols = match *self {
            CoinSequence::ThueMorse | CoinSequence::Fibonacci => {
                let rule = self.rule().expect("substitution sequence");
                let prefix = rule.fixed_point_prefix_cached(reflected_prefix_len(offset, n_min, n_max), cache_dir)?;
                let symbols = reflected_symbols(&prefix, offset, n_min, n_max);
                if *self == CoinSequence::Fibonacci && offset as i64 + n_min < 0 && !rule.is_legal_factor(&symbols)? {
                    return Err(Error::invalid(format!(
                        "reflected fibonacci window at offset {offset} is not a legal factor; use a larger offset"
                    )));
                }
                symbols
            }
            CoinSequence::Periodic(q) => {
                if q == 0 {
                    return Err(Error::invalid("period must be positive"));
                }
                let base = SubstitutionRule::thue_morse().fixed_point_prefix_cached(q, cache_dir)?;
                let base = base.symbols();
                Word((n_min..=n_max).map(|n| base[(offset as i64 + n).rem_euclid(q as i64) as usize]).collect())
            }
            CoinSequence::Constant => Word(vec![0; (n_max - n_min + 1) as usize]),
        };
        SubshiftWindow::from_symbols(offset, n_min, symbols)
    }

    pub fn rule(&self) -> Option<SubstitutionRule> {
        match self {
            CoinSequence::ThueMorse => Some(SubstitutionRule::thue_morse()),
            CoinSequence::Fibonacci => Some(SubstitutionRule::fibonacci()),
            _ => None,
        }
    }
}

impl fmt::Display for CoinSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoinSequence::ThueMorse => f.write_str("thue-morse"),
            CoinSequence::Fibonacci => f.write_str("fibonacci"),
            CoinSequence::Periodic(q) => write!(f, "periodic:{q}"),
            CoinSequence::Constant => f.write_str("constant"),
        }
    }
}

impl FromStr for CoinSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "thue-morse" | "tm" => Ok(CoinSequence::ThueMorse),
            "fibonacci" => Ok(CoinSequence::Fibonacci),
            "constant" => Ok(CoinSequence::Constant),
            other => match other.strip_prefix("periodic:") {
                Some(q) => match q.parse::<usize>() {
                    Ok(q) if q > 0 => Ok(CoinSequence::Periodic(q)),
                    _ => Err(Error::invalid(format!("invalid period in {other:?}"))),
                },
                None => Err(Error::invalid(format!("unknown sequence {other:?}"))),
            },
        }
    }
}

impl Serialize for CoinSequence {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CoinSequence {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Rotation angles for the two coin types, both strictly inside `(0, π/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoinAngles {
    theta: f64,
    phi: f64,
}

impl CoinAngles {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        for (name, v) in [("theta", theta), ("phi", phi)] {
            if !(v > 0.0 && v < std::f64::consts::FRAC_PI_2) {
                return Err(Error::invalid(format!("{name} = {v} must lie in (0, pi/2)")));
            }
        }
        Ok(Self { theta, phi })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// `phi` for symbol 0, `theta` for symbol 1.
    pub fn for_symbol(&self, symbol: u8) -> f64 {
        if symbol == 0 {
            self.phi
        } else {
            self.theta
        }
    }
}

pub fn angle_at(x: &SubshiftWindow, n: i64, angles: &CoinAngles) -> Result<f64> {
    Ok(angles.for_symbol(x.symbol_at(n)?))
}
