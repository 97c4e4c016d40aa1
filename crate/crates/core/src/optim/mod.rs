//! Matrix optimizers over explicit per-matrix state.

mod adamw;
mod muon;
mod sgd;
mod spectra;

use serde::{Deserialize, Serialize};

pub use adamw::{adamw_step, AdamWConfig, AdamWState};
pub use muon::{muon_step, MuonConfig, MuonState};
pub use sgd::{sgd_step, SgdConfig, SgdState};
pub use spectra::{shape_update, spectra_step, spike_rank, SpectraConfig, SpectraState, SpectraStepInfo};

use crate::checkpoint::Checkpoint;
use crate::error::{Result, SpectraError};
use crate::matrix::{DenseMatrix, FlopCounter};
use crate::spectral::SubspaceCache;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    AdamW,
    Muon,
    Spectra,
    Sgd,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::AdamW => "adamw",
            OptimizerKind::Muon => "muon",
            OptimizerKind::Spectra => "spectra",
            OptimizerKind::Sgd => "sgd",
        }
    }
}

/// Optimizer-state size in scalars for an `m x n` weight: `2mn` for AdamW,
/// `mn` for Muon and SGD, `mn + nk` for Spectra.
pub fn state_memory_scalars(kind: OptimizerKind, m: usize, n: usize, k: usize) -> u64 {
    let (m, n, k) = (m as u64, n as u64, k as u64);
    match kind {
        OptimizerKind::AdamW => 2 * m * n,
        OptimizerKind::Muon | OptimizerKind::Sgd => m * n,
        OptimizerKind::Spectra => m * n + n * k,
    }
}

/// Hyperparameters of any supported optimizer, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerConfig {
    Adamw(AdamWConfig),
    Muon(MuonConfig),
    Spectra(SpectraConfig),
    Sgd(SgdConfig),
}

impl OptimizerConfig {
    pub fn kind(&self) -> OptimizerKind {
        match self {
            OptimizerConfig::Adamw(_) => OptimizerKind::AdamW,
            OptimizerConfig::Muon(_) => OptimizerKind::Muon,
            OptimizerConfig::Spectra(_) => OptimizerKind::Spectra,
            OptimizerConfig::Sgd(_) => OptimizerKind::Sgd,
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind().name()
    }

    pub fn lr(&self) -> f64 {
        match self {
            OptimizerConfig::Adamw(c) => c.lr,
            OptimizerConfig::Muon(c) => c.lr,
            OptimizerConfig::Spectra(c) => c.lr,
            OptimizerConfig::Sgd(c) => c.lr,
        }
    }

    pub fn with_lr(&self, lr: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            OptimizerConfig::Adamw(c) => c.lr = lr,
            OptimizerConfig::Muon(c) => c.lr = lr,
            OptimizerConfig::Spectra(c) => c.lr = lr,
            OptimizerConfig::Sgd(c) => c.lr = lr,
        }
        out
    }

    /// Re-seed any internal randomness (Spectra's bootstrap sketch).
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        if let OptimizerConfig::Spectra(c) = &mut out {
            c.seed = seed;
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OptimizerConfig::Adamw(c) => c.validate(),
            OptimizerConfig::Muon(c) => c.validate(),
            OptimizerConfig::Spectra(c) => c.validate(),
            OptimizerConfig::Sgd(c) => c.validate(),
        }
    }

    pub fn init_state(&self, rows: usize, cols: usize) -> Result<OptimizerState> {
        self.validate()?;
        Ok(match self {
            OptimizerConfig::Adamw(_) => OptimizerState::AdamW(AdamWState::new(rows, cols)),
            OptimizerConfig::Muon(_) => OptimizerState::Muon(MuonState::new(rows, cols)),
            OptimizerConfig::Spectra(c) => OptimizerState::Spectra(SpectraState::new(rows, cols, c)?),
            OptimizerConfig::Sgd(_) => OptimizerState::Sgd(SgdState::new(rows, cols)),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerState {
    AdamW(AdamWState),
    Muon(MuonState),
    Spectra(SpectraState),
    Sgd(SgdState),
}

impl OptimizerState {
    pub fn kind(&self) -> OptimizerKind {
        match self {
            OptimizerState::AdamW(_) => OptimizerKind::AdamW,
            OptimizerState::Muon(_) => OptimizerKind::Muon,
            OptimizerState::Spectra(_) => OptimizerKind::Spectra,
            OptimizerState::Sgd(_) => OptimizerKind::Sgd,
        }
    }

    /// Scalars currently allocated in the state buffers.
    pub fn state_scalars(&self) -> usize {
        match self {
            OptimizerState::AdamW(s) => s.state_scalars(),
            OptimizerState::Muon(s) => s.state_scalars(),
            OptimizerState::Spectra(s) => s.state_scalars(),
            OptimizerState::Sgd(s) => s.state_scalars(),
        }
    }

    /// Apply one update. Panics if `cfg` is for a different optimizer.
    pub fn step(
        &mut self,
        cfg: &OptimizerConfig,
        w: &mut DenseMatrix,
        g: &DenseMatrix,
        flops: &FlopCounter,
    ) -> Result<()> {
        match (self, cfg) {
            (OptimizerState::AdamW(s), OptimizerConfig::Adamw(c)) => adamw_step(w, g, s, c),
            (OptimizerState::Muon(s), OptimizerConfig::Muon(c)) => muon_step(w, g, s, c, flops).map(|_| ()),
            (OptimizerState::Spectra(s), OptimizerConfig::Spectra(c)) => spectra_step(w, g, s, c, flops).map(|_| ()),
            (OptimizerState::Sgd(s), OptimizerConfig::Sgd(c)) => sgd_step(w, g, s, c),
            (s, c) => panic!("state {:?} stepped with {} config", s.kind(), c.name()),
        }
    }

    /// Store every buffer as `{prefix}.{name}` and the scalars under the
    /// manifest key `prefix`.
    pub fn save_to(&self, ck: &mut Checkpoint, prefix: &str) -> Result<()> {
        let key = |name: &str| format!("{prefix}.{name}");
        let scalars = match self {
            OptimizerState::AdamW(s) => {
                ck.insert(key("m"), s.m.clone());
                ck.insert(key("v"), s.v.clone());
                StateScalars { kind: OptimizerKind::AdamW, t: s.t, ..Default::default() }
            }
            OptimizerState::Muon(s) => {
                ck.insert(key("m"), s.m.clone());
                StateScalars { kind: OptimizerKind::Muon, ..Default::default() }
            }
            OptimizerState::Sgd(s) => {
                ck.insert(key("m"), s.m.clone());
                StateScalars { kind: OptimizerKind::Sgd, ..Default::default() }
            }
            OptimizerState::Spectra(s) => {
                ck.insert(key("m"), s.m.clone());
                if let Some(v) = &s.cache.v_cache {
                    ck.insert(key("v_cache"), v.clone());
                }
                StateScalars {
                    kind: OptimizerKind::Spectra,
                    t: s.step,
                    k: s.k,
                    bootstrap_count: s.cache.bootstrap_count,
                    refresh_count: s.cache.refresh_count,
                    calls: s.cache.calls,
                    has_cache: s.cache.v_cache.is_some(),
                }
            }
        };
        ck.set_meta(prefix, scalars)
    }

    pub fn load_from(ck: &Checkpoint, prefix: &str) -> Result<Self> {
        let sc: StateScalars = ck.meta_as(prefix)?;
        let tensor = |name: &str| ck.tensor(&format!("{prefix}.{name}")).cloned();
        Ok(match sc.kind {
            OptimizerKind::AdamW => {
                let (m, v) = (tensor("m")?, tensor("v")?);
                if m.shape() != v.shape() {
                    return Err(SpectraError::Format("AdamW moment shapes differ in checkpoint".into()));
                }
                OptimizerState::AdamW(AdamWState { m, v, t: sc.t })
            }
            OptimizerKind::Muon => OptimizerState::Muon(MuonState { m: tensor("m")? }),
            OptimizerKind::Sgd => OptimizerState::Sgd(SgdState { m: tensor("m")? }),
            OptimizerKind::Spectra => OptimizerState::Spectra(SpectraState {
                m: tensor("m")?,
                cache: SubspaceCache {
                    v_cache: if sc.has_cache { Some(tensor("v_cache")?) } else { None },
                    bootstrap_count: sc.bootstrap_count,
                    refresh_count: sc.refresh_count,
                    calls: sc.calls,
                },
                k: sc.k,
                step: sc.t,
            }),
        })
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct StateScalars {
    kind: OptimizerKind,
    #[serde(default)]
    t: u64,
    #[serde(default)]
    k: usize,
    #[serde(default)]
    bootstrap_count: u64,
    #[serde(default)]
    refresh_count: u64,
    #[serde(default)]
    calls: u64,
    #[serde(default)]
    has_cache: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::random_gaussian;

    #[test]
    fn memory_table() {
        assert_eq!(state_memory_scalars(OptimizerKind::AdamW, 4, 6, 0), 48);
        assert_eq!(state_memory_scalars(OptimizerKind::Spectra, 4096, 14336, 61), 4096 * 14336 + 14336 * 61);
        assert_eq!(state_memory_scalars(OptimizerKind::Muon, 7, 3, 0), 21);
    }

    #[test]
    fn introspected_state_matches_table() {
        for cfg in [
            OptimizerConfig::Adamw(AdamWConfig::default()),
            OptimizerConfig::Muon(MuonConfig::default()),
            OptimizerConfig::Spectra(SpectraConfig { rank_ratio: 0.1, ..Default::default() }),
        ] {
            let mut st = cfg.init_state(30, 20).unwrap();
            let mut w = DenseMatrix::zeros(30, 20);
            st.step(&cfg, &mut w, &random_gaussian(30, 20, 1), &FlopCounter::new()).unwrap();
            let k = spike_rank(0.1, 30, 20);
            assert_eq!(st.state_scalars() as u64, state_memory_scalars(cfg.kind(), 30, 20, k));
        }
    }

    #[test]
    fn checkpointed_state_resumes_bitwise() {
        for cfg in [
            OptimizerConfig::Adamw(AdamWConfig::default()),
            OptimizerConfig::Muon(MuonConfig::default()),
            OptimizerConfig::Sgd(SgdConfig::default()),
            OptimizerConfig::Spectra(SpectraConfig { rank_ratio: 0.1, ..Default::default() }),
        ] {
            let f = FlopCounter::new();
            let mut st = cfg.init_state(12, 10).unwrap();
            let mut w = DenseMatrix::zeros(12, 10);
            for s in 0..3 {
                st.step(&cfg, &mut w, &random_gaussian(12, 10, s), &f).unwrap();
            }
            let mut ck = Checkpoint::new();
            st.save_to(&mut ck, "opt").unwrap();
            let bytes = ck.to_bytes();
            let mut back = OptimizerState::load_from(&Checkpoint::read(&mut bytes.as_slice()).unwrap(), "opt").unwrap();
            assert_eq!(back, st);
            let mut w2 = w.clone();
            st.step(&cfg, &mut w, &random_gaussian(12, 10, 9), &f).unwrap();
            back.step(&cfg, &mut w2, &random_gaussian(12, 10, 9), &f).unwrap();
            assert_eq!(w, w2);
        }
    }

    #[test]
    fn fresh_state_round_trips() {
        let cfg = OptimizerConfig::Spectra(SpectraConfig { rank_ratio: 0.1, ..Default::default() });
        let st = cfg.init_state(12, 10).unwrap();
        let mut ck = Checkpoint::new();
        st.save_to(&mut ck, "opt").unwrap();
        assert_eq!(OptimizerState::load_from(&ck, "opt").unwrap(), st);
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = OptimizerConfig::Spectra(SpectraConfig { lr: 0.02, ..Default::default() });
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"kind\":\"spectra\""));
        let back: OptimizerConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let partial: OptimizerConfig = serde_json::from_str(r#"{"kind":"adamw","lr":0.5}"#).unwrap();
        assert_eq!(partial.lr(), 0.5);
        assert!(serde_json::from_str::<OptimizerConfig>(r#"{"kind":"adamw","bogus":1}"#).is_err());
    }
}
