//! Oblivious reward environments.
//!
//! A [`RewardModel`] holds the full `T x K` matrix of true means plus a noise
//! family per arm. It is immutable once built and can be shared between
//! concurrently running trials; every trial brings its own random stream.
//!
//! Rounds are 1-based (`1..=T`), arms are 0-based (`0..K`).

use std::io::Write;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arms::MAX_ARMS;
use crate::error::{Error, Result};
use crate::rng::{Purpose, StreamKey};

/// Reward distribution around a mean `mu`. Every family has mean exactly `mu`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseFamily {
    /// `Y ~ Bernoulli(mu)`.
    #[default]
    Bernoulli,
    /// `Y ~ U[mu - w, mu + w]` with `w = min(half_width, mu, 1 - mu)`, so the
    /// support never leaves `[0, 1]` and the mean is preserved.
    Uniform { half_width: f64 },
    /// `Y = mu`.
    Deterministic,
}

impl NoiseFamily {
    fn validate(&self) -> Result<()> {
        match *self {
            NoiseFamily::Uniform { half_width } if !(0.0..=0.5).contains(&half_width) => {
                Err(Error::Validation(format!(
                    "uniform half_width {half_width} must lie in [0, 0.5]"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, mu: f64, rng: &mut R) -> f64 {
        match *self {
            NoiseFamily::Bernoulli => {
                if rng.random::<f64>() < mu {
                    1.0
                } else {
                    0.0
                }
            }
            NoiseFamily::Uniform { half_width } => {
                let w = half_width.min(mu).min(1.0 - mu);
                let u: f64 = rng.random();
                (mu + w * (2.0 * u - 1.0)).clamp(0.0, 1.0)
            }
            NoiseFamily::Deterministic => mu,
        }
    }
}

/// One family for every arm, or one per arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSpec {
    All(NoiseFamily),
    PerArm(Vec<NoiseFamily>),
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::All(NoiseFamily::Bernoulli)
    }
}

impl NoiseSpec {
    fn expand(&self, num_arms: usize) -> Result<Vec<NoiseFamily>> {
        let families = match self {
            NoiseSpec::All(f) => vec![*f; num_arms],
            NoiseSpec::PerArm(v) => {
                if v.len() != num_arms {
                    return Err(Error::Validation(format!(
                        "noise lists {} families for {} arms",
                        v.len(),
                        num_arms
                    )));
                }
                v.clone()
            }
        };
        for f in &families {
            f.validate()?;
        }
        Ok(families)
    }
}

/// True means and noise of an oblivious adversary.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardModel {
    horizon: usize,
    num_arms: usize,
    /// Row-major, row `t - 1` holds the means of round `t`.
    means: Vec<f64>,
    noise: Vec<NoiseFamily>,
}

impl RewardModel {
    /// Build from a row-major `T x K` mean buffer.
    pub fn from_means(
        horizon: usize,
        num_arms: usize,
        means: Vec<f64>,
        noise: Vec<NoiseFamily>,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::range("T", horizon, ">= 1"));
        }
        if num_arms == 0 || num_arms > MAX_ARMS {
            return Err(Error::range("K", num_arms, format!("1..={MAX_ARMS}")));
        }
        if means.len() != horizon * num_arms {
            return Err(Error::Validation(format!(
                "mean buffer has {} entries, expected {}",
                means.len(),
                horizon * num_arms
            )));
        }
        if noise.len() != num_arms {
            return Err(Error::Validation(format!(
                "{} noise families for {} arms",
                noise.len(),
                num_arms
            )));
        }
        if let Some(i) = means.iter().position(|m| !(0.0..=1.0).contains(m)) {
            return Err(Error::Validation(format!(
                "mean at round {}, arm {} is {}, outside [0, 1]",
                i / num_arms + 1,
                i % num_arms,
                means[i]
            )));
        }
        for f in &noise {
            f.validate()?;
        }
        Ok(RewardModel {
            horizon,
            num_arms,
            means,
            noise,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn noise(&self) -> &[NoiseFamily] {
        &self.noise
    }

    fn check(&self, t: usize, arm: usize) -> Result<()> {
        if t == 0 || t > self.horizon {
            return Err(Error::range("round", t, format!("1..={}", self.horizon)));
        }
        if arm >= self.num_arms {
            return Err(Error::range("arm", arm, format!("0..{}", self.num_arms)));
        }
        Ok(())
    }

    /// `mu_t(arm)`.
    pub fn mean(&self, t: usize, arm: usize) -> Result<f64> {
        self.check(t, arm)?;
        Ok(self.means[(t - 1) * self.num_arms + arm])
    }

    /// All means of round `t`. Panics if `t` is out of range.
    pub fn row(&self, t: usize) -> &[f64] {
        let k = self.num_arms;
        &self.means[(t - 1) * k..t * k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.means.chunks_exact(self.num_arms)
    }

    /// Best mean of round `t`.
    pub fn best_mean(&self, t: usize) -> f64 {
        self.row(t)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Draw `Y_t(arm)`.
    pub fn sample<R: Rng + ?Sized>(&self, t: usize, arm: usize, rng: &mut R) -> Result<f64> {
        let mu = self.mean(t, arm)?;
        Ok(self.noise[arm].draw(mu, rng))
    }

    /// The first `horizon` rounds of this model.
    pub fn truncated(&self, horizon: usize) -> Result<RewardModel> {
        if horizon == 0 || horizon > self.horizon {
            return Err(Error::range(
                "horizon",
                horizon,
                format!("1..={}", self.horizon),
            ));
        }
        Ok(RewardModel {
            horizon,
            num_arms: self.num_arms,
            means: self.means[..horizon * self.num_arms].to_vec(),
            noise: self.noise.clone(),
        })
    }

    /// SHA-256 over shape, mean bits and noise families, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.horizon as u64).to_le_bytes());
        hasher.update((self.num_arms as u64).to_le_bytes());
        for m in &self.means {
            hasher.update(m.to_bits().to_le_bytes());
        }
        for f in &self.noise {
            match *f {
                NoiseFamily::Bernoulli => hasher.update([0u8]),
                NoiseFamily::Uniform { half_width } => {
                    hasher.update([1u8]);
                    hasher.update(half_width.to_bits().to_le_bytes());
                }
                NoiseFamily::Deterministic => hasher.update([2u8]),
            }
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Write the mean matrix as CSV with header `t,arm_1..arm_K`, 10 decimals.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.num_arms).map(|a| format!("arm_{a}")));
        w.write_record(&header)?;
        for (i, row) in self.rows().enumerate() {
            let mut rec = vec![(i + 1).to_string()];
            rec.extend(row.iter().map(|m| format!("{m:.10}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Piecewise-stationary model with randomly placed change points.
///
/// Boundary rounds belong to the new segment. Consecutive segments always
/// have different best arms (for `K >= 2`), and inside a segment the best arm
/// beats every other arm by at least `min_gap`.
pub fn gen_piecewise(
    seed: u64,
    horizon: usize,
    num_arms: usize,
    num_segments: usize,
    min_gap: f64,
    noise: Vec<NoiseFamily>,
) -> Result<RewardModel> {
    if num_segments == 0 || num_segments > horizon {
        return Err(Error::Config(format!(
            "num_segments = {num_segments} must lie in 1..=T ({horizon})"
        )));
    }
    if !(min_gap > 0.0 && min_gap <= 1.0) {
        return Err(Error::Config(format!(
            "min_gap = {min_gap} must lie in (0, 1]"
        )));
    }
    if num_arms == 0 || num_arms > MAX_ARMS {
        return Err(Error::range("K", num_arms, format!("1..={MAX_ARMS}")));
    }
    let mut rng = StreamKey::new(seed, 0, Purpose::EnvGeneration).rng();

    let mut starts: Vec<usize> = if num_segments > 1 {
        sample_indices(&mut rng, horizon - 1, num_segments - 1)
            .into_iter()
            .map(|i| i + 2)
            .collect()
    } else {
        Vec::new()
    };
    starts.push(1);
    starts.sort_unstable();

    let mut segments = Vec::with_capacity(num_segments);
    let mut prev_best = None;
    for _ in 0..num_segments {
        let best = loop {
            let b = rng.random_range(0..num_arms);
            if num_arms == 1 || Some(b) != prev_best {
                break b;
            }
        };
        prev_best = Some(best);
        let top = rng.random_range(min_gap..=1.0);
        let means: Vec<f64> = (0..num_arms)
            .map(|a| {
                if a == best {
                    top
                } else {
                    rng.random_range(0.0..=top - min_gap)
                }
            })
            .collect();
        segments.push(means);
    }
    expand_segments(horizon, num_arms, &starts, &segments, noise)
}

fn expand_segments(
    horizon: usize,
    num_arms: usize,
    starts: &[usize],
    segments: &[Vec<f64>],
    noise: Vec<NoiseFamily>,
) -> Result<RewardModel> {
    let mut means = Vec::with_capacity(horizon * num_arms);
    for (i, seg) in segments.iter().enumerate() {
        if seg.len() != num_arms {
            return Err(Error::Validation(format!(
                "segment {i} has {} means for {num_arms} arms",
                seg.len()
            )));
        }
        let end = starts.get(i + 1).copied().unwrap_or(horizon + 1);
        for _ in starts[i]..end {
            means.extend_from_slice(seg);
        }
    }
    RewardModel::from_means(horizon, num_arms, means, noise)
}

/// Drifting means whose total variation matches `tv_budget`.
///
/// Each arm follows a random walk reflected into `[0, 1]`. Step sizes are
/// rescaled until the realized variation is within 0.1% of the budget.
pub fn gen_drifting(
    seed: u64,
    horizon: usize,
    num_arms: usize,
    tv_budget: f64,
    noise: Vec<NoiseFamily>,
) -> Result<RewardModel> {
    if !tv_budget.is_finite() || tv_budget < 0.0 {
        return Err(Error::range("tv_budget", tv_budget, ">= 0"));
    }
    if horizon == 0 {
        return Err(Error::range("T", horizon, ">= 1"));
    }
    if tv_budget > (horizon - 1) as f64 {
        return Err(Error::Config(format!(
            "tv_budget = {tv_budget} cannot be realized in {horizon} rounds"
        )));
    }
    if num_arms == 0 || num_arms > MAX_ARMS {
        return Err(Error::range("K", num_arms, format!("1..={MAX_ARMS}")));
    }
    let mut rng = StreamKey::new(seed, 0, Purpose::EnvGeneration).rng();
    let start: Vec<f64> = (0..num_arms).map(|_| rng.random_range(0.2..0.8)).collect();
    let steps: Vec<f64> = (0..(horizon - 1) * num_arms)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();

    let build = |scale: f64| -> Vec<f64> {
        let mut means = Vec::with_capacity(horizon * num_arms);
        let mut raw = start.clone();
        means.extend(raw.iter().map(|&x| reflect_unit(x)));
        for t in 1..horizon {
            for a in 0..num_arms {
                raw[a] += scale * steps[(t - 1) * num_arms + a];
                means.push(reflect_unit(raw[a]));
            }
        }
        means
    };
    let variation = |means: &[f64]| -> f64 {
        means
            .chunks_exact(num_arms)
            .zip(means.chunks_exact(num_arms).skip(1))
            .map(|(p, c)| {
                p.iter()
                    .zip(c)
                    .map(|(x, y)| (y - x).abs())
                    .fold(0.0, f64::max)
            })
            .sum()
    };

    if tv_budget == 0.0 || horizon == 1 {
        return RewardModel::from_means(horizon, num_arms, build(0.0), noise);
    }

    let unit = variation(&build(1.0 / horizon as f64)) * horizon as f64;
    let mut scale = tv_budget / unit;
    let mut best = (f64::INFINITY, Vec::new());
    for _ in 0..200 {
        let means = build(scale);
        let v = variation(&means);
        let err = (v - tv_budget).abs() / tv_budget;
        if err < best.0 {
            best = (err, means);
        }
        if err <= 1e-3 || v == 0.0 {
            break;
        }
        scale *= tv_budget / v;
    }
    if best.0 > 0.01 {
        return Err(Error::Config(format!(
            "could not realize tv_budget = {tv_budget} within 1% (closest relative error {:.4})",
            best.0
        )));
    }
    RewardModel::from_means(horizon, num_arms, best.1, noise)
}

fn reflect_unit(x: f64) -> f64 {
    let y = x.rem_euclid(2.0);
    if y > 1.0 {
        2.0 - y
    } else {
        y
    }
}

/// Wrap an explicit `T x K` matrix (row `i` is round `i + 1`).
pub fn gen_custom(mean_matrix: &[Vec<f64>], noise: Vec<NoiseFamily>) -> Result<RewardModel> {
    let horizon = mean_matrix.len();
    let num_arms = mean_matrix.first().map_or(0, Vec::len);
    if let Some(i) = mean_matrix.iter().position(|r| r.len() != num_arms) {
        return Err(Error::Validation(format!(
            "row {} has {} entries, expected {num_arms}",
            i + 1,
            mean_matrix[i].len()
        )));
    }
    RewardModel::from_means(horizon, num_arms, mean_matrix.concat(), noise)
}

/// A segment of an explicit piecewise model. Exactly one of `start` (a round)
/// or `start_frac` (`start = floor(frac * T) + 1`) may be given; the first
/// segment defaults to round 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_frac: Option<f64>,
    pub means: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseSpec {
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "K")]
    pub num_arms: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise: NoiseSpec,
    /// Random generation: number of segments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_segments: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_gap: Option<f64>,
    /// Explicit segments; mutually exclusive with `num_segments`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<Vec<SegmentSpec>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftingSpec {
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "K")]
    pub num_arms: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub tv_budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSpec {
    /// Optional consistency checks against the matrix shape.
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub num_arms: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub means: Vec<Vec<f64>>,
}

/// Serializable description of an environment. Expanding the same spec
/// always yields the identical [`RewardModel`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    Piecewise(PiecewiseSpec),
    Drifting(DriftingSpec),
    Custom(CustomSpec),
}

// Written by hand so errors inside a variant keep their field path; the
// derived tagged form buffers the body and reports only the enclosing field.
impl<'de> Deserialize<'de> for EnvSpec {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;

        fn body<T: serde::de::DeserializeOwned, E: serde::de::Error>(
            map: serde_json::Map<String, serde_json::Value>,
        ) -> std::result::Result<T, E> {
            serde_path_to_error::deserialize(serde_json::Value::Object(map))
                .map_err(|e| E::custom(format!("at `{}`: {}", e.path(), e.inner())))
        }

        let mut map = serde_json::Map::deserialize(de)?;
        let kind = match map.remove("kind") {
            Some(serde_json::Value::String(k)) => k,
            Some(_) => return Err(D::Error::custom("`kind` must be a string")),
            None => return Err(D::Error::missing_field("kind")),
        };
        match kind.as_str() {
            "piecewise" => body(map).map(EnvSpec::Piecewise),
            "drifting" => body(map).map(EnvSpec::Drifting),
            "custom" => body(map).map(EnvSpec::Custom),
            other => Err(D::Error::unknown_variant(
                other,
                &["piecewise", "drifting", "custom"],
            )),
        }
    }
}

impl EnvSpec {
    pub fn from_json(text: &str) -> Result<EnvSpec> {
        crate::config::parse_json(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("EnvSpec serializes")
    }

    pub fn horizon(&self) -> usize {
        match self {
            EnvSpec::Piecewise(s) => s.horizon,
            EnvSpec::Drifting(s) => s.horizon,
            EnvSpec::Custom(s) => s.means.len(),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            EnvSpec::Piecewise(s) => s.seed,
            EnvSpec::Drifting(s) => s.seed,
            EnvSpec::Custom(s) => s.seed,
        }
    }

    /// The same environment family at another horizon. Custom matrices are
    /// truncated at expansion time, so their horizon may only shrink.
    pub fn with_horizon(&self, horizon: usize) -> Result<EnvSpec> {
        let mut spec = self.clone();
        match &mut spec {
            EnvSpec::Piecewise(s) => {
                if let Some(segs) = &s.segments {
                    if segs.iter().any(|g| g.start.is_some_and(|r| r > 1)) {
                        return Err(Error::Config(
                            "explicit segments with absolute `start` rounds cannot be rescaled; use `start_frac`".into(),
                        ));
                    }
                }
                s.horizon = horizon;
            }
            EnvSpec::Drifting(s) => s.horizon = horizon,
            EnvSpec::Custom(s) => {
                if horizon > s.means.len() {
                    return Err(Error::range(
                        "horizon",
                        horizon,
                        format!("<= {}", s.means.len()),
                    ));
                }
                s.means.truncate(horizon);
                s.horizon = Some(horizon);
            }
        }
        Ok(spec)
    }

    pub fn expand(&self) -> Result<RewardModel> {
        match self {
            EnvSpec::Piecewise(s) => {
                let noise = s.noise.expand(s.num_arms)?;
                match (&s.segments, s.num_segments) {
                    (Some(_), Some(_)) => Err(Error::Config(
                        "piecewise: give either `segments` or `num_segments`, not both".into(),
                    )),
                    (Some(segs), None) => {
                        let starts = resolve_starts(segs, s.horizon)?;
                        let means: Vec<Vec<f64>> = segs.iter().map(|g| g.means.clone()).collect();
                        expand_segments(s.horizon, s.num_arms, &starts, &means, noise)
                    }
                    (None, n) => gen_piecewise(
                        s.seed,
                        s.horizon,
                        s.num_arms,
                        n.unwrap_or(1),
                        s.min_gap.unwrap_or(0.1),
                        noise,
                    ),
                }
            }
            EnvSpec::Drifting(s) => {
                let noise = s.noise.expand(s.num_arms)?;
                gen_drifting(s.seed, s.horizon, s.num_arms, s.tv_budget, noise)
            }
            EnvSpec::Custom(s) => {
                let num_arms = s.means.first().map_or(0, Vec::len);
                if s.horizon.is_some_and(|h| h != s.means.len()) {
                    return Err(Error::Validation(format!(
                        "custom: T = {} but the matrix has {} rows",
                        s.horizon.unwrap(),
                        s.means.len()
                    )));
                }
                if s.num_arms.is_some_and(|k| k != num_arms) {
                    return Err(Error::Validation(format!(
                        "custom: K = {} but the matrix has {num_arms} columns",
                        s.num_arms.unwrap()
                    )));
                }
                gen_custom(&s.means, s.noise.expand(num_arms)?)
            }
        }
    }
}

fn resolve_starts(segs: &[SegmentSpec], horizon: usize) -> Result<Vec<usize>> {
    if segs.is_empty() {
        return Err(Error::Config("piecewise: `segments` is empty".into()));
    }
    let mut starts = Vec::with_capacity(segs.len());
    for (i, g) in segs.iter().enumerate() {
        let start = match (g.start, g.start_frac) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(format!(
                    "segment {i}: give either `start` or `start_frac`"
                )))
            }
            (Some(r), None) => r,
            (None, Some(f)) => {
                if !(0.0..1.0).contains(&f) {
                    return Err(Error::range("start_frac", f, "[0, 1)"));
                }
                (f * horizon as f64).floor() as usize + 1
            }
            (None, None) if i == 0 => 1,
            (None, None) => {
                return Err(Error::Config(format!("segment {i} needs a start")));
            }
        };
        starts.push(start);
    }
    if starts[0] != 1 {
        return Err(Error::Config(
            "the first segment must start at round 1".into(),
        ));
    }
    if starts.windows(2).any(|w| w[0] >= w[1]) || *starts.last().unwrap() > horizon {
        return Err(Error::Config(format!(
            "segment starts {starts:?} must be strictly increasing within 1..={horizon}"
        )));
    }
    Ok(starts)
}
