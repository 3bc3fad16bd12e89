use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use qwalk::walk::{ScaleGrid, DEFAULT_TAIL_TOL};
use qwalk::{CoinAngles, CoinSequence, Error, Mat2, Result, WalkModel};
use serde::{Deserialize, Serialize};

use crate::Overrides;

/// Which operator to run. `coined` builds coins from the sequence and angles;
/// the other two are the baselines `U = S` and `U = I`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum WalkKind {
    Coined,
    Shift,
    Identity,
}

/// Replaces the coin at `site` by `scale` times itself in the checks that
/// inspect coins directly. Only `verify` reads it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptCoin {
    pub site: i64,
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<String>,
    pub walk: WalkKind,
    pub theta: f64,
    pub phi: f64,
    pub sequence: CoinSequence,
    pub offset: usize,
    pub p: Vec<f64>,
    #[serde(rename = "L_start")]
    pub l_start: f64,
    #[serde(rename = "L_ratio")]
    pub l_ratio: f64,
    #[serde(rename = "L_count")]
    pub l_count: usize,
    pub tail_tol: f64,
    pub solver_tol: f64,
    /// Steps stored by `simulate`.
    pub l_max: usize,
    /// Sites `n` compared by `parseval`.
    pub targets: Vec<i64>,
    /// Circle nodes are `max(min_nodes, node_factor · ceil(L))`.
    pub min_nodes: usize,
    pub node_factor: usize,
    /// Trapezoid panels on `B_L` and phase nodes in resolvent scans.
    pub tau_nodes: usize,
    pub epsilons: Vec<f64>,
    pub z_samples: usize,
    pub offsets: Vec<usize>,
    pub max_span: usize,
    /// `ε = c0 / L` in the resolvent scans.
    pub c0: f64,
    #[serde(skip_serializing)]
    pub out: PathBuf,
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corrupt_coin: Option<CorruptCoin>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            command: None,
            walk: WalkKind::Coined,
            theta: PI / 3.0,
            phi: PI / 5.0,
            sequence: CoinSequence::ThueMorse,
            offset: 0,
            p: vec![2.0, 4.0],
            l_start: 25.0,
            l_ratio: 2.0,
            l_count: 5,
            tail_tol: DEFAULT_TAIL_TOL,
            solver_tol: qwalk::resolvent::DEFAULT_SOLVER_TOL,
            l_max: 64,
            targets: vec![0, 1, 2, 5],
            min_nodes: 64,
            node_factor: 16,
            tau_nodes: qwalk::resolvent::DEFAULT_WINDOW_NODES,
            epsilons: vec![0.1, 0.05, 0.02, 0.01],
            z_samples: 8,
            offsets: vec![0, 1, 2, 3, 5, 8, 13, 21],
            max_span: 4096,
            c0: 4.0,
            out: PathBuf::from("out"),
            threads: None,
            corrupt_coin: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidArgument(format!("invalid config {}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(w) = o.walk {
            self.walk = w;
        }
        if let Some(v) = o.theta {
            self.theta = v;
        }
        if let Some(v) = o.phi {
            self.phi = v;
        }
        if let Some(v) = o.sequence {
            self.sequence = v;
        }
        if let Some(v) = o.offset {
            self.offset = v;
        }
        if let Some(v) = &o.p {
            self.p = v.clone();
        }
        if let Some(v) = o.l_start {
            self.l_start = v;
        }
        if let Some(v) = o.l_ratio {
            self.l_ratio = v;
        }
        if let Some(v) = o.l_count {
            self.l_count = v;
        }
        if let Some(v) = o.l_max {
            self.l_max = v;
        }
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
        if let Some(v) = o.threads {
            self.threads = Some(v);
        }
        if let Some(site) = o.corrupt_coin {
            self.corrupt_coin = Some(CorruptCoin { site, scale: 1.5 });
        }
    }

    pub fn angles(&self) -> Result<CoinAngles> {
        CoinAngles::new(self.theta, self.phi)
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        Ok(ScaleGrid::new(self.l_start, self.l_ratio, self.l_count)?.values())
    }

    pub fn model(&self, cache_dir: Option<PathBuf>) -> Result<WalkModel> {
        Ok(match self.walk {
            WalkKind::Shift => WalkModel::ConstantCoin(Mat2::identity()),
            WalkKind::Identity => WalkModel::Identity,
            WalkKind::Coined => {
                let mut m = WalkModel::pattern(self.sequence, self.offset, self.angles()?);
                if let WalkModel::Pattern(pc) = &mut m {
                    pc.cache_dir = cache_dir;
                }
                m
            }
        })
    }

    pub fn node_count(&self, scale: f64) -> usize {
        self.min_nodes.max(self.node_factor * scale.ceil() as usize)
    }

    /// Rejects values no command can use; command-specific limits are checked
    /// where they apply.
    pub fn validate(&self) -> Result<()> {
        self.angles()?;
        self.grid()?;
        if self.p.is_empty() || self.p.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidArgument("p values must be positive".into()));
        }
        for (name, tol) in [("tail_tol", self.tail_tol), ("solver_tol", self.solver_tol)] {
            if !(tol > 0.0 && tol < 1.0) {
                return Err(Error::InvalidArgument(format!("{name} = {tol} must lie in (0, 1)")));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidArgument("--threads must be at least 1".into()));
        }
        if let Some(c) = self.corrupt_coin {
            if !(c.scale.is_finite()) {
                return Err(Error::InvalidArgument("corrupt_coin.scale must be finite".into()));
            }
        }
        Ok(())
    }
}
