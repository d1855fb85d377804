use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sl2::IwasawaParams;

/// Distribution of one interaction parameter at one site.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SiteDistribution {
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, sd: f64 },
    Pointmass { value: f64 },
}

impl SiteDistribution {
    /// False only for point masses.
    pub fn is_continuous(&self) -> bool {
        !matches!(self, SiteDistribution::Pointmass { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            SiteDistribution::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            SiteDistribution::Gaussian { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
            SiteDistribution::Pointmass { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidEnsemble(format!("invalid distribution {self:?}")))
        }
    }

    fn can_be_nonpositive(&self) -> bool {
        match *self {
            SiteDistribution::Uniform { lo, .. } => lo <= 0.0,
            SiteDistribution::Gaussian { .. } => true,
            SiteDistribution::Pointmass { value } => value <= 0.0,
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            SiteDistribution::Uniform { lo, hi } => rng.random_range(lo..hi),
            SiteDistribution::Gaussian { mean, sd } => Normal::new(mean, sd)
                .expect("validated sd")
                .sample(rng),
            SiteDistribution::Pointmass { value } => value,
        }
    }
}

/// Which of the three Iwasawa parameter sequences is random.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Lambda,
    R,
    Theta,
}

impl Target {
    pub fn name(&self) -> &'static str {
        match self {
            Target::Lambda => "lambda",
            Target::R => "r",
            Target::Theta => "theta",
        }
    }
}

/// Independent per-site distributions for one parameter sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ensemble {
    pub target: Target,
    pub sites: Vec<SiteDistribution>,
    pub seed: u64,
}

/// Draws for non-positive dilations are retried at most this many times.
pub const MAX_REJECTIONS: usize = 64;

/// Generator for one `(seed, sample, site)` triple.
///
/// ChaCha is a counter-mode generator: the sample index selects the stream and
/// the site index a disjoint block of the keystream, so any draw can be
/// reproduced without touching the others, in any order, on any thread.
pub fn site_rng(seed: u64, sample_index: u64, site_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample_index);
    rng.set_word_pos((site_index as u128) << 20);
    rng
}

impl Ensemble {
    pub fn new(target: Target, sites: Vec<SiteDistribution>, seed: u64) -> Result<Self> {
        let e = Ensemble {
            target,
            sites,
            seed,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        for s in &self.sites {
            s.validate()?;
        }
        if self.target == Target::R {
            if let Some(i) = self
                .sites
                .iter()
                .position(|s| matches!(s, SiteDistribution::Pointmass { value } if *value <= 0.0))
            {
                return Err(Error::InvalidEnsemble(format!(
                    "site {i}: dilation point mass must be positive"
                )));
            }
            if let Some(i) = self.sites.iter().position(|s| {
                matches!(s, SiteDistribution::Uniform { hi, .. } if *hi <= 0.0)
            }) {
                return Err(Error::InvalidEnsemble(format!(
                    "site {i}: dilation distribution has no positive support"
                )));
            }
        }
        Ok(())
    }

    /// Parameter values of realization `sample_index`, one per site.
    pub fn sample_realization(&self, sample_index: u64) -> Result<Vec<f64>> {
        self.sites
            .iter()
            .enumerate()
            .map(|(site, dist)| {
                let mut rng = site_rng(self.seed, sample_index, site);
                if self.target != Target::R || !dist.can_be_nonpositive() {
                    return Ok(dist.draw(&mut rng));
                }
                for _ in 0..MAX_REJECTIONS {
                    let v = dist.draw(&mut rng);
                    if v > 0.0 {
                        return Ok(v);
                    }
                }
                Err(Error::UnsupportedSupport {
                    site,
                    reason: format!("{MAX_REJECTIONS} consecutive non-positive draws"),
                })
            })
            .collect()
    }

    /// Template parameters with the target sequence replaced by `values`.
    pub fn apply(&self, template: &[IwasawaParams], values: &[f64]) -> Result<Vec<IwasawaParams>> {
        template
            .iter()
            .zip(values)
            .map(|(p, &v)| match self.target {
                Target::Lambda => p.with_alpha(v),
                Target::R => p.with_r(v),
                Target::Theta => p.with_theta(v),
            })
            .collect()
    }
}
