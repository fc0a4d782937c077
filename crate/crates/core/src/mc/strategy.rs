use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

use super::sim::PathState;
use super::McError;
use crate::extremal::extremal_matrix;
use crate::model::{validate_rate_matrix, Interval, Monotonicity, RateBoxes, RateMatrix};

/// User-supplied feedback map. Receives the current path state and the
/// boxes for the current regime's up and down rates, returns `(up, down)`.
pub type FeedbackFn = Arc<dyn Fn(&PathState, Option<Interval>, Option<Interval>) -> (f64, f64) + Send + Sync>;

/// Rates as a function of the current time, level, regime and running
/// maximum only.
#[derive(Clone)]
pub enum FeedbackRule {
    /// Opposite-extremal rates while `x < pivot`, extremal rates otherwise.
    BelowLevel { pivot: f64, mono: Monotonicity },
    /// Opposite-extremal rates while `x < fraction * running_max`, extremal
    /// rates otherwise.
    Drawdown { fraction: f64, mono: Monotonicity },
    Custom { name: String, rule: FeedbackFn },
}

impl fmt::Debug for FeedbackRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeedbackRule::BelowLevel { pivot, mono } => {
                f.debug_struct("BelowLevel").field("pivot", pivot).field("mono", mono).finish()
            }
            FeedbackRule::Drawdown { fraction, mono } => {
                f.debug_struct("Drawdown").field("fraction", fraction).field("mono", mono).finish()
            }
            FeedbackRule::Custom { name, .. } => f.debug_struct("Custom").field("name", name).finish(),
        }
    }
}

/// Endpoint choice of the extremal matrix for `mono` (`true` = upper end).
fn extremal_ends(mono: Monotonicity) -> (bool, bool) {
    match mono {
        Monotonicity::Decreasing => (true, false),
        _ => (false, true),
    }
}

fn pick(iv: Option<Interval>, upper: bool) -> f64 {
    iv.map_or(0.0, |iv| if upper { iv.hi() } else { iv.lo() })
}

impl FeedbackRule {
    fn rates(&self, s: &PathState, up: Option<Interval>, down: Option<Interval>) -> (f64, f64) {
        let switch = |mono: Monotonicity, flip: bool| {
            let (u, d) = extremal_ends(mono);
            (pick(up, u ^ flip), pick(down, d ^ flip))
        };
        match self {
            FeedbackRule::BelowLevel { pivot, mono } => switch(*mono, s.x < *pivot),
            FeedbackRule::Drawdown { fraction, mono } => switch(*mono, s.x < fraction * s.running_max),
            FeedbackRule::Custom { rule, .. } => rule(s, up, down),
        }
    }

    fn describe(&self) -> String {
        match self {
            FeedbackRule::BelowLevel { pivot, .. } => format!("feedback(below-level {pivot})"),
            FeedbackRule::Drawdown { fraction, .. } => format!("feedback(drawdown {fraction})"),
            FeedbackRule::Custom { name, .. } => format!("feedback({name})"),
        }
    }
}

/// An adapted rate process for the chain.
#[derive(Debug, Clone)]
pub enum RateStrategy {
    Constant(RateMatrix),
    Extremal { boxes: RateBoxes, mono: Monotonicity },
    /// A constant matrix with every rate drawn uniformly from its box.
    RandomAdmissible { boxes: RateBoxes, seed: u64 },
    /// State feedback, clamped into the boxes.
    Feedback { boxes: RateBoxes, rule: FeedbackRule },
}

impl RateStrategy {
    pub fn m(&self) -> usize {
        match self {
            RateStrategy::Constant(q) => q.m(),
            RateStrategy::Extremal { boxes, .. }
            | RateStrategy::RandomAdmissible { boxes, .. }
            | RateStrategy::Feedback { boxes, .. } => boxes.m(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            RateStrategy::Constant(q) => format!("constant{:?}", q.rows()),
            RateStrategy::Extremal { mono, .. } => format!("extremal({mono})"),
            RateStrategy::RandomAdmissible { seed, .. } => format!("random-admissible(seed {seed})"),
            RateStrategy::Feedback { rule, .. } => rule.describe(),
        }
    }

    /// The matrix of a constant strategy, `None` for feedback.
    pub fn constant_matrix(&self) -> Result<Option<RateMatrix>, McError> {
        Ok(match self {
            RateStrategy::Constant(q) => {
                validate_rate_matrix(q).map_err(McError::RateMatrix)?;
                Some(q.clone())
            }
            RateStrategy::Extremal { boxes, mono } => Some(extremal_matrix(boxes, *mono)?),
            RateStrategy::RandomAdmissible { boxes, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Some(boxes.sample_matrix(&mut rng))
            }
            RateStrategy::Feedback { .. } => None,
        })
    }

    pub(crate) fn resolve(&self, dt: f64) -> Result<Resolved, McError> {
        Ok(match self.constant_matrix()? {
            Some(q) => {
                let m = q.m();
                let mut per_regime = Vec::with_capacity(m);
                for y in 0..m {
                    let (up, down) = (q.up(y), q.down(y));
                    let total = up + down;
                    let p_switch = -libm::expm1(-total * dt);
                    let p_up = if total > 0.0 { p_switch * up / total } else { 0.0 };
                    per_regime.push(ConstRates { up, down, p_switch, p_up });
                }
                Resolved::Constant(per_regime)
            }
            None => match self {
                RateStrategy::Feedback { boxes, rule } => Resolved::Feedback { boxes: boxes.clone(), rule: rule.clone() },
                _ => unreachable!("constant strategies resolved above"),
            },
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConstRates {
    pub up: f64,
    pub down: f64,
    pub p_switch: f64,
    pub p_up: f64,
}

#[derive(Debug, Clone)]
pub(crate) enum Resolved {
    Constant(Vec<ConstRates>),
    Feedback { boxes: RateBoxes, rule: FeedbackRule },
}

impl Resolved {
    /// `(up, down)` rates emitted at state `s`.
    pub fn rates(&self, s: &PathState) -> (f64, f64) {
        match self {
            Resolved::Constant(r) => (r[s.y].up, r[s.y].down),
            Resolved::Feedback { boxes, rule } => {
                let up = boxes.up(s.y);
                let down = boxes.down(s.y);
                let (a, b) = rule.rates(s, up, down);
                (up.map_or(0.0, |iv| iv.clamp(a)), down.map_or(0.0, |iv| iv.clamp(b)))
            }
        }
    }

    /// Probabilities of leaving and of leaving upwards over one step.
    pub fn switch_probabilities(&self, s: &PathState, dt: f64) -> (f64, f64) {
        match self {
            Resolved::Constant(r) => (r[s.y].p_switch, r[s.y].p_up),
            Resolved::Feedback { .. } => {
                let (up, down) = self.rates(s);
                let total = up + down;
                if total > 0.0 {
                    let p = -libm::expm1(-total * dt);
                    (p, p * up / total)
                } else {
                    (0.0, 0.0)
                }
            }
        }
    }
}
