use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

/// How a recommender turns its purchase history into a recommendation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RecommendationRule {
    /// Uniform over every past purchase, initial history included.
    UniformAll,
    /// Uniform over the `W` most recent purchases. Initial-history items count
    /// as the oldest entries.
    Window(usize),
    /// Uniform over the initial history, forever.
    FixedPast,
    /// Product `a` on odd global steps, product `b` on even ones.
    Periodic { a: usize, b: usize },
    /// Product `p` with probability proportional to `share(p)^beta`, where
    /// `share` counts the initial history.
    Superlinear(f64),
    /// Always product `p`.
    Always(usize),
}

impl RecommendationRule {
    /// Number of recent purchases each user must remember.
    pub fn window_bound(&self) -> usize {
        match *self {
            RecommendationRule::Window(w) => w,
            _ => 0,
        }
    }

    /// True when old purchases lose their weight over time.
    pub fn fades(&self) -> bool {
        matches!(
            self,
            RecommendationRule::UniformAll | RecommendationRule::Window(_) | RecommendationRule::Superlinear(_)
        )
    }

    pub(crate) fn check(&self, products: usize) -> Result<(), String> {
        match *self {
            RecommendationRule::Window(0) => Err("window must hold at least one purchase".into()),
            RecommendationRule::Periodic { a, b } if a >= products || b >= products => {
                Err(format!("periodic products {a},{b} out of range for {products} products"))
            }
            RecommendationRule::Always(p) if p >= products => {
                Err(format!("product {p} out of range for {products} products"))
            }
            RecommendationRule::Superlinear(beta) if !(beta >= 0.0) || !beta.is_finite() => {
                Err(format!("superlinear exponent {beta} must be a non-negative number"))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for RecommendationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecommendationRule::UniformAll => write!(f, "uniform"),
            RecommendationRule::Window(w) => write!(f, "window:{w}"),
            RecommendationRule::FixedPast => write!(f, "fixed-past"),
            RecommendationRule::Periodic { a, b } => write!(f, "periodic:{a},{b}"),
            RecommendationRule::Superlinear(beta) => write!(f, "superlinear:{beta}"),
            RecommendationRule::Always(p) => write!(f, "always:{p}"),
        }
    }
}

impl Serialize for RecommendationRule {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rule `{0}`: expected uniform | window:W | fixed-past | periodic:a,b | superlinear:beta | always:p")]
pub struct ParseRuleError(String);

impl FromStr for RecommendationRule {
    type Err = ParseRuleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseRuleError(s.to_owned());
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        match (name, arg) {
            ("uniform", None) => Ok(RecommendationRule::UniformAll),
            ("fixed-past", None) => Ok(RecommendationRule::FixedPast),
            ("window", Some(w)) => w.parse().map(RecommendationRule::Window).map_err(|_| err()),
            ("superlinear", Some(b)) => b.parse().map(RecommendationRule::Superlinear).map_err(|_| err()),
            ("always", Some(p)) => p.parse().map(RecommendationRule::Always).map_err(|_| err()),
            ("periodic", Some(ab)) => {
                let (a, b) = ab.split_once(',').ok_or_else(err)?;
                Ok(RecommendationRule::Periodic {
                    a: a.trim().parse().map_err(|_| err())?,
                    b: b.trim().parse().map_err(|_| err())?,
                })
            }
            _ => Err(err()),
        }
    }
}
