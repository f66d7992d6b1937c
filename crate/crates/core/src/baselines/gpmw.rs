use rand::RngCore;

use crate::game::{Choice, Feedback, Learner, ProtocolError};
use crate::no_regret::{CgpmwConfig, CgpmwLearner, StrategyConfig};

/// Hides the observed context from the wrapped learner.
#[derive(Debug, Clone)]
pub struct ContextBlind<L> {
    inner: L,
}

impl<L> ContextBlind<L> {
    pub fn new(inner: L) -> Self {
        ContextBlind { inner }
    }

    pub fn inner(&self) -> &L {
        &self.inner
    }
}

impl<L: Learner> Learner for ContextBlind<L> {
    fn num_actions(&self) -> usize {
        self.inner.num_actions()
    }

    fn choose(&mut self, _context: &[f64], rng: &mut dyn RngCore) -> Result<Choice, ProtocolError> {
        self.inner.choose(&[], rng)
    }

    fn feedback(&mut self, fb: &Feedback<'_>) -> Result<(), ProtocolError> {
        self.inner.feedback(&Feedback { context: &[], ..*fb })
    }
}

/// GP-MW: the kernel learner with every round treated as the same context.
pub type Gpmw = ContextBlind<CgpmwLearner>;

/// Builds GP-MW from a kernel that must not read the context. The strategy
/// in `config` is replaced by the single-context MW recursion.
pub fn gpmw(config: CgpmwConfig, actions: Vec<Vec<f64>>) -> Result<Gpmw, ProtocolError> {
    if !config.kernel.ignores_context() {
        return Err(ProtocolError::Config(
            "GP-MW kernel must not depend on the context".into(),
        ));
    }
    let config = CgpmwConfig {
        strategy: StrategyConfig::FiniteContext,
        ..config
    };
    Ok(ContextBlind::new(CgpmwLearner::new(config, actions)?))
}
