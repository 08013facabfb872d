//! Seeded injection of synthetic bona fide samples into a training pool.
//!
//! A scenario either leaves the training pool untouched (baseline), adds a
//! random sample of synthetic bona fide entries whose size is a percentage of
//! the pool's bona fide count (inject), or replaces the pool with the full
//! synthetic dataset (only synthetic).

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::{filter, merge, FilterSpec, Label, Manifest, Source};
use crate::round_half_up;

/// Percentages studied in the incremental injection experiments.
pub const STUDY_PERCENTAGES: [f64; 6] = [10.0, 20.0, 30.0, 50.0, 75.0, 100.0];

/// Published sample sizes for the FERET training pool, keyed by percentage.
pub const FERET_PUBLISHED_SIZES: [(f64, usize); 6] = [
    (10.0, 160),
    (20.0, 320),
    (30.0, 480),
    (50.0, 800),
    (75.0, 1_200),
    (100.0, 1_587),
];

/// Published sample sizes for the FRGCv2 training pool. The 100% entry is
/// printed as 5,904, twice the pool's bona fide count, and is kept verbatim.
pub const FRGC_PUBLISHED_SIZES: [(f64, usize); 6] = [
    (10.0, 300),
    (20.0, 600),
    (30.0, 900),
    (50.0, 1_500),
    (75.0, 2_250),
    (100.0, 5_904),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioKind {
    Baseline,
    Inject { percent: f64 },
    OnlySynthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeMode {
    /// `round(j / 100 * B)` with B the bona fide count of the training pool.
    #[default]
    Formula,
    Override(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    #[serde(flatten)]
    pub kind: ScenarioKind,
    #[serde(default)]
    pub size_mode: SizeMode,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn baseline() -> Self {
        ScenarioSpec {
            kind: ScenarioKind::Baseline,
            size_mode: SizeMode::Formula,
            seed: 0,
        }
    }

    pub fn inject(percent: f64, size_mode: SizeMode, seed: u64) -> Self {
        ScenarioSpec {
            kind: ScenarioKind::Inject { percent },
            size_mode,
            seed,
        }
    }

    pub fn only_synthetic() -> Self {
        ScenarioSpec {
            kind: ScenarioKind::OnlySynthetic,
            size_mode: SizeMode::Formula,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let ScenarioKind::Inject { percent } = self.kind {
            if !(percent > 0.0 && percent <= 100.0) {
                return Err(Error::InvalidArgument(format!(
                    "injection percentage must lie in (0, 100], got {percent}"
                )));
            }
        }
        Ok(())
    }

    /// Short filesystem-safe tag, e.g. `baseline`, `inject-75`, `only-synthetic`.
    pub fn tag(&self) -> String {
        match self.kind {
            ScenarioKind::Baseline => "baseline".into(),
            ScenarioKind::Inject { percent } => format!("inject-{}", fmt_percent(percent)),
            ScenarioKind::OnlySynthetic => "only-synthetic".into(),
        }
    }

    /// Value of the "additional data" column in result tables.
    pub fn additional_data(&self) -> String {
        match self.kind {
            ScenarioKind::Baseline => "0".into(),
            ScenarioKind::Inject { percent } => format!("{}%", fmt_percent(percent)),
            ScenarioKind::OnlySynthetic => "Only synthetic".into(),
        }
    }
}

impl fmt::Display for ScenarioSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())?;
        if let SizeMode::Override(m) = self.size_mode {
            write!(f, " (override {m})")?;
        }
        Ok(())
    }
}

fn fmt_percent(p: f64) -> String {
    if p.fract() == 0.0 {
        format!("{}", p as u64)
    } else {
        format!("{p}")
    }
}

/// Resolved sizes for one scenario against concrete manifests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub scenario: ScenarioSpec,
    /// Synthetic bona fide pool size.
    pub pool_size: usize,
    /// Bona fide count of the original training pool.
    pub base_bonafide: usize,
    pub resolved_m: usize,
}

impl SamplePlan {
    pub fn resolve(train_pool: &Manifest, smdd: &Manifest, spec: &ScenarioSpec) -> Result<Self> {
        spec.validate()?;
        let pool_size = smdd_bonafide_pool(smdd).len();
        let base_bonafide = train_pool.count_label(Label::Bonafide);
        let resolved_m = match spec.kind {
            ScenarioKind::Inject { percent } => {
                let m = sample_size(percent, base_bonafide, spec.size_mode)?;
                if m > pool_size {
                    return Err(Error::InvalidArgument(format!(
                        "sample size {m} exceeds the synthetic bona fide pool of {pool_size}"
                    )));
                }
                m
            }
            ScenarioKind::Baseline | ScenarioKind::OnlySynthetic => 0,
        };
        Ok(SamplePlan {
            scenario: *spec,
            pool_size,
            base_bonafide,
            resolved_m,
        })
    }
}

/// Number of synthetic samples to add for percentage `percent` of a pool with
/// `base_bonafide` bona fide entries.
pub fn sample_size(percent: f64, base_bonafide: usize, mode: SizeMode) -> Result<usize> {
    if !(percent > 0.0 && percent <= 100.0) {
        return Err(Error::InvalidArgument(format!(
            "injection percentage must lie in (0, 100], got {percent}"
        )));
    }
    match mode {
        SizeMode::Override(m) => Ok(m),
        SizeMode::Formula => {
            if base_bonafide == 0 {
                return Err(Error::InvalidArgument(
                    "training pool has no bona fide entries".into(),
                ));
            }
            Ok(round_half_up(percent * base_bonafide as f64 / 100.0) as usize)
        }
    }
}

fn smdd_bonafide_pool(smdd: &Manifest) -> Manifest {
    filter(
        smdd,
        &FilterSpec::all()
            .label(Label::Bonafide)
            .source(Source::Smdd),
    )
}

/// Uniform sample of `m` entries without replacement.
///
/// The pool is ordered by `sample_id` before a seeded partial Fisher-Yates
/// shuffle, so the selected set depends only on the pool's contents, `m` and
/// `seed`. Selected entries are returned in pool order.
pub fn draw_sample(pool: &Manifest, m: usize, seed: u64) -> Result<Manifest> {
    if let Some(bad) = pool
        .entries
        .iter()
        .find(|e| e.label != Label::Bonafide || e.source != Source::Smdd)
    {
        return Err(Error::InvalidArgument(format!(
            "sampling pool must hold only synthetic bona fide entries; `{}` is {} from {}",
            bad.sample_id, bad.label, bad.source
        )));
    }
    if m > pool.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot draw {m} samples from a pool of {}",
            pool.len()
        )));
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| pool.entries[a].sample_id.cmp(&pool.entries[b].sample_id));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (chosen, _) = order.partial_shuffle(&mut rng, m);
    let mut chosen = chosen.to_vec();
    chosen.sort_unstable();
    let entries = chosen
        .into_iter()
        .map(|i| pool.entries[i].clone())
        .collect();
    let mut provenance = pool.provenance.clone();
    provenance.push(format!("sample: m={m} seed={seed} pool={}", pool.len()));
    Ok(Manifest::new(entries, provenance))
}

/// Builds the training manifest for one scenario.
pub fn build_scenario(
    train_pool: &Manifest,
    smdd: &Manifest,
    spec: &ScenarioSpec,
) -> Result<Manifest> {
    build_scenario_with_plan(train_pool, smdd, spec).map(|(m, _)| m)
}

pub fn build_scenario_with_plan(
    train_pool: &Manifest,
    smdd: &Manifest,
    spec: &ScenarioSpec,
) -> Result<(Manifest, SamplePlan)> {
    let plan = SamplePlan::resolve(train_pool, smdd, spec)?;
    let manifest = apply_plan(train_pool, smdd, &plan)?;
    Ok((manifest, plan))
}

/// Applies a resolved plan to `target`. `target` is usually the pool the plan
/// was resolved against, but may be a subset of it (injection after a split).
pub fn apply_plan(target: &Manifest, smdd: &Manifest, plan: &SamplePlan) -> Result<Manifest> {
    let spec = &plan.scenario;
    Ok(match spec.kind {
        ScenarioKind::Baseline => {
            let mut m = target.clone();
            m.provenance.push("scenario: baseline".into());
            m
        }
        ScenarioKind::Inject { .. } => {
            let pool = smdd_bonafide_pool(smdd);
            let sample = draw_sample(&pool, plan.resolved_m, spec.seed)?;
            let mut m = merge(target, &sample)?;
            m.provenance.push(format!("scenario: {spec}"));
            m
        }
        ScenarioKind::OnlySynthetic => {
            if smdd.count_label(Label::Bonafide) == 0 || smdd.count_label(Label::Morph) == 0 {
                return Err(Error::InvalidArgument(
                    "only-synthetic scenario needs both bona fide and morph synthetic entries"
                        .into(),
                ));
            }
            let mut m = smdd.clone();
            m.provenance.push("scenario: only-synthetic".into());
            m
        }
    })
}
