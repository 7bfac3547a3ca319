use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use super::{ModelError, PreferenceMatrix};

const MAX_ROW_ATTEMPTS: usize = 100;

/// Distribution of the raw (pre-normalization) preference draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PreferenceFamily {
    /// Uniform on [0, 1].
    Uniform01,
    /// Exponential with the given mean, restricted to [0, 1].
    Exponential { mean: f64 },
    /// Density proportional to `x^exponent` on (0, 1].
    PowerLaw { exponent: f64 },
    /// Normal, restricted to [0, 1].
    Normal { mean: f64, sd: f64 },
}

impl PreferenceFamily {
    pub const EXPONENTIAL: Self = Self::Exponential { mean: 0.5 };
    pub const POWER_LAW: Self = Self::PowerLaw { exponent: -0.01 };
    pub const NORMAL: Self = Self::Normal { mean: 0.5, sd: 1.0 / 6.0 };

    /// Parses `uniform`, `exponential`, `powerlaw` or `normal` with default
    /// parameters.
    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "uniform" | "uniform01" => Some(Self::Uniform01),
            "exponential" | "exp" => Some(Self::EXPONENTIAL),
            "powerlaw" | "power_law" | "power-law" => Some(Self::POWER_LAW),
            "normal" => Some(Self::NORMAL),
            _ => None,
        }
    }
}

/// How draws outside [0, 1] are brought back into the support.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    /// Redraw until the value lands in [0, 1].
    #[default]
    Reject,
    /// Clamp to [0, 1].
    Clip,
}

/// Recipe for a random preference matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreferenceSpec {
    #[serde(flatten)]
    pub family: PreferenceFamily,
    /// Imbalance: the focus product's raw draw is multiplied by `k` before the
    /// row is normalized.
    #[serde(default = "one")]
    pub k: f64,
    #[serde(default)]
    pub focus: usize,
    #[serde(default)]
    pub truncation: Truncation,
}

fn one() -> f64 {
    1.0
}

impl Default for PreferenceSpec {
    fn default() -> Self {
        Self {
            family: PreferenceFamily::Uniform01,
            k: 1.0,
            focus: 0,
            truncation: Truncation::Reject,
        }
    }
}

impl PreferenceSpec {
    pub fn new(family: PreferenceFamily) -> Self {
        Self {
            family,
            ..Self::default()
        }
    }

    pub fn with_imbalance(mut self, k: f64) -> Self {
        self.k = k;
        self
    }

    fn check(&self, products: usize) -> Result<(), ModelError> {
        if !(self.k >= 1.0) || !self.k.is_finite() {
            return Err(ModelError::InvalidSpec(format!("imbalance k = {} must be >= 1", self.k)));
        }
        if self.focus >= products {
            return Err(ModelError::InvalidSpec(format!(
                "focus product {} out of range for {products} products",
                self.focus
            )));
        }
        match self.family {
            PreferenceFamily::Exponential { mean } if !(mean > 0.0) => {
                Err(ModelError::InvalidSpec(format!("exponential mean {mean} must be positive")))
            }
            PreferenceFamily::PowerLaw { exponent } if !(exponent > -1.0) => Err(ModelError::InvalidSpec(
                format!("power-law exponent {exponent} must exceed -1 to be integrable on (0, 1]"),
            )),
            PreferenceFamily::Normal { sd, .. } if !(sd > 0.0) => {
                Err(ModelError::InvalidSpec(format!("normal sd {sd} must be positive")))
            }
            _ => Ok(()),
        }
    }
}

enum Sampler {
    Uniform,
    Exp(Exp<f64>),
    PowerLaw { inv: f64 },
    Normal(Normal<f64>),
}

impl Sampler {
    fn new(family: PreferenceFamily) -> Self {
        match family {
            PreferenceFamily::Uniform01 => Sampler::Uniform,
            PreferenceFamily::Exponential { mean } => Sampler::Exp(Exp::new(1.0 / mean).expect("checked")),
            PreferenceFamily::PowerLaw { exponent } => Sampler::PowerLaw {
                inv: 1.0 / (exponent + 1.0),
            },
            PreferenceFamily::Normal { mean, sd } => Sampler::Normal(Normal::new(mean, sd).expect("checked")),
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R, truncation: Truncation) -> f64 {
        let raw = |rng: &mut R| match self {
            Sampler::Uniform => rng.random::<f64>(),
            Sampler::Exp(d) => d.sample(rng),
            // CDF x^(e+1) on (0, 1]; 1 - U lies in (0, 1].
            Sampler::PowerLaw { inv } => (1.0 - rng.random::<f64>()).powf(*inv),
            Sampler::Normal(d) => d.sample(rng),
        };
        match truncation {
            Truncation::Clip => raw(rng).clamp(0.0, 1.0),
            Truncation::Reject => loop {
                let x = raw(rng);
                if (0.0..=1.0).contains(&x) {
                    break x;
                }
            },
        }
    }
}

/// Draws an `n x m` row-stochastic preference matrix.
///
/// Every entry is drawn independently from `spec.family` restricted to
/// [0, 1]; the focus column is multiplied by `spec.k`; each row is then
/// normalized. A row whose draws sum to zero is redrawn.
pub fn sample_preferences(
    n: usize,
    m: usize,
    spec: &PreferenceSpec,
    seed: u64,
) -> Result<PreferenceMatrix, ModelError> {
    if n == 0 || m == 0 {
        return Err(ModelError::Dimension(format!("need n, m >= 1, got {n} x {m}")));
    }
    spec.check(m)?;
    let sampler = Sampler::new(spec.family);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * m);
    let mut row = vec![0.0; m];
    for u in 0..n {
        let mut attempts = 0;
        let total = loop {
            for (p, x) in row.iter_mut().enumerate() {
                *x = sampler.draw(&mut rng, spec.truncation);
                if p == spec.focus {
                    *x *= spec.k;
                }
            }
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                break total;
            }
            attempts += 1;
            if attempts >= MAX_ROW_ATTEMPTS {
                return Err(ModelError::DegenerateRow { row: u, attempts });
            }
        };
        data.extend(row.iter().map(|x| x / total));
    }
    Ok(PreferenceMatrix::from_flat(n, m, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column_mean(p: &PreferenceMatrix, c: usize) -> f64 {
        p.column(c).iter().sum::<f64>() / p.users() as f64
    }

    #[test]
    fn single_product_rows_are_one() {
        for family in [
            PreferenceFamily::Uniform01,
            PreferenceFamily::EXPONENTIAL,
            PreferenceFamily::POWER_LAW,
            PreferenceFamily::NORMAL,
        ] {
            let p = sample_preferences(50, 1, &PreferenceSpec::new(family).with_imbalance(3.0), 1).unwrap();
            assert!(p.column(0).iter().all(|&x| x == 1.0));
        }
    }

    #[test]
    fn symmetric_columns_have_mean_one_half() {
        // Monte-Carlo oracle: with k = 1 the two columns are exchangeable.
        let p = sample_preferences(100_000, 2, &PreferenceSpec::default(), 42).unwrap();
        let mean = column_mean(&p, 0);
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn imbalance_shifts_focus_mean() {
        for family in [PreferenceFamily::Uniform01, PreferenceFamily::EXPONENTIAL] {
            let spec = PreferenceSpec::new(family).with_imbalance(5.0);
            let wins = (0..100u64)
                .filter(|&seed| {
                    let p = sample_preferences(10_000, 2, &spec, seed).unwrap();
                    column_mean(&p, 0) > column_mean(&p, 1)
                })
                .count();
            assert!(wins >= 99, "{family:?}: {wins}");
        }
    }

    #[test]
    fn rows_are_stochastic_for_all_families() {
        for family in [
            PreferenceFamily::Uniform01,
            PreferenceFamily::EXPONENTIAL,
            PreferenceFamily::POWER_LAW,
            PreferenceFamily::NORMAL,
        ] {
            for k in [1.0, 2.5, 5.0] {
                for truncation in [Truncation::Reject, Truncation::Clip] {
                    let spec = PreferenceSpec {
                        family,
                        k,
                        focus: 1,
                        truncation,
                    };
                    let p = sample_preferences(200, 4, &spec, 9).unwrap();
                    for u in 0..200 {
                        let s: f64 = p.row(u).iter().sum();
                        assert!((s - 1.0).abs() <= 1e-12);
                        assert!(p.row(u).iter().all(|&x| (0.0..=1.0).contains(&x)));
                    }
                }
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = PreferenceSpec::new(PreferenceFamily::NORMAL);
        assert_eq!(
            sample_preferences(30, 3, &spec, 5).unwrap(),
            sample_preferences(30, 3, &spec, 5).unwrap()
        );
        assert_ne!(
            sample_preferences(30, 3, &spec, 5).unwrap(),
            sample_preferences(30, 3, &spec, 6).unwrap()
        );
    }

    #[test]
    fn truncated_exponential_mean() {
        // Mean of Exp(rate 2) conditioned on [0, 1]:
        // 1/2 - e^{-2} / (1 - e^{-2}) = 0.34348...
        let sampler = Sampler::new(PreferenceFamily::EXPONENTIAL);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let mean = (0..n).map(|_| sampler.draw(&mut rng, Truncation::Reject)).sum::<f64>() / n as f64;
        let e2 = (-2.0f64).exp();
        let exact = 0.5 - e2 / (1.0 - e2);
        assert!((mean - exact).abs() < 3e-3, "{mean} vs {exact}");
    }

    #[test]
    fn power_law_mean() {
        // E[x] for density (1+e) x^e on (0,1] is (1+e)/(2+e).
        let sampler = Sampler::new(PreferenceFamily::POWER_LAW);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 200_000;
        let mean = (0..n).map(|_| sampler.draw(&mut rng, Truncation::Reject)).sum::<f64>() / n as f64;
        let exact = 0.99 / 1.99;
        assert!((mean - exact).abs() < 3e-3, "{mean} vs {exact}");
    }

    #[test]
    fn rejects_bad_specs() {
        let spec = PreferenceSpec::default().with_imbalance(0.5);
        assert!(matches!(sample_preferences(2, 2, &spec, 0), Err(ModelError::InvalidSpec(_))));
        let spec = PreferenceSpec {
            focus: 3,
            ..PreferenceSpec::default()
        };
        assert!(matches!(sample_preferences(2, 2, &spec, 0), Err(ModelError::InvalidSpec(_))));
        assert!(matches!(
            sample_preferences(0, 2, &PreferenceSpec::default(), 0),
            Err(ModelError::Dimension(_))
        ));
    }
}
