use rand::RngCore;

use crate::game::{Choice, Feedback, Learner, ProtocolError};

/// Plays the same action every round; route 0 is the free-flow shortest one.
#[derive(Debug, Clone)]
pub struct NoLearning {
    num_actions: usize,
    action: usize,
    pending: bool,
}

impl NoLearning {
    pub fn new(num_actions: usize, action: usize) -> Result<Self, ProtocolError> {
        if num_actions == 0 {
            return Err(ProtocolError::Uninitialized);
        }
        if action >= num_actions {
            return Err(ProtocolError::Config(format!(
                "fixed action {action} out of range for {num_actions} actions"
            )));
        }
        Ok(NoLearning {
            num_actions,
            action,
            pending: false,
        })
    }
}

impl Learner for NoLearning {
    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn choose(&mut self, _context: &[f64], _rng: &mut dyn RngCore) -> Result<Choice, ProtocolError> {
        let mut distribution = vec![0.0; self.num_actions];
        distribution[self.action] = 1.0;
        self.pending = true;
        Ok(Choice {
            action: self.action,
            distribution,
        })
    }

    fn feedback(&mut self, fb: &Feedback<'_>) -> Result<(), ProtocolError> {
        if !std::mem::take(&mut self.pending) {
            return Err(ProtocolError::FeedbackWithoutChoose);
        }
        if fb.action != self.action {
            return Err(ProtocolError::Mismatch {
                expected: self.action,
                got: fb.action,
            });
        }
        Ok(())
    }
}
