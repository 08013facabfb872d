//! Error rates for morphing attack detection.
//!
//! Decision rule: a sample is classified as morph iff `score >= threshold`.
//!
//! * MACER: fraction of morphs classified as bona fide, `#{morph: s < t} / N_M`.
//! * BPCER: fraction of bona fide samples classified as morph,
//!   `#{bona fide: s >= t} / N_BF`.
//!
//! [`sweep`] evaluates both rates at every distinct observed score plus the
//! `-inf` and `+inf` sentinels. D-EER, BPCER at fixed MACER bounds and DET
//! coordinates are derived from that trade-off.

mod probit;
pub mod scores;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::Label;

pub use probit::{normal_cdf, probit};
pub use scores::{load_scores, parse_scores, scores_to_csv, write_scores, ScoreRecord, ScoreSet};

/// MACER bounds reported in result tables (BPCER5, BPCER10, BPCER20).
pub const OPERATING_ALPHAS: [f64; 3] = [0.05, 0.10, 0.20];

/// Rates are clamped into this interval before the probit transform.
pub const DET_CLAMP: f64 = 1e-6;

pub fn macer_at(s: &ScoreSet, t: f64) -> Result<f64> {
    let n = s.n_morph();
    if n == 0 {
        return Err(Error::Metric("at least one morph score".into()));
    }
    let missed = s.scores(Label::Morph).filter(|&x| x < t).count();
    Ok(missed as f64 / n as f64)
}

pub fn bpcer_at(s: &ScoreSet, t: f64) -> Result<f64> {
    let n = s.n_bonafide();
    if n == 0 {
        return Err(Error::Metric("at least one bona fide score".into()));
    }
    let rejected = s.scores(Label::Bonafide).filter(|&x| x >= t).count();
    Ok(rejected as f64 / n as f64)
}

/// Rates at each threshold of a sweep. `thresholds` is strictly increasing,
/// starts at `-inf` and ends at `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTradeoff {
    pub thresholds: Vec<f64>,
    pub bpcer: Vec<f64>,
    pub macer: Vec<f64>,
}

impl ErrorTradeoff {
    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    /// Indices of the observed-score thresholds (sentinels excluded).
    pub fn interior(&self) -> std::ops::Range<usize> {
        1..self.len().saturating_sub(1)
    }

    /// Rebuilds a trade-off from interior rows, adding the sentinel corners.
    pub fn from_interior(rows: impl IntoIterator<Item = (f64, f64, f64)>) -> Result<Self> {
        let mut e = ErrorTradeoff {
            thresholds: vec![f64::NEG_INFINITY],
            bpcer: vec![1.0],
            macer: vec![0.0],
        };
        for (t, macer, bpcer) in rows {
            if !(t.is_finite() && t > *e.thresholds.last().unwrap()) {
                return Err(Error::InvalidArgument(format!(
                    "thresholds must be finite and strictly increasing (at {t})"
                )));
            }
            e.thresholds.push(t);
            e.macer.push(macer);
            e.bpcer.push(bpcer);
        }
        e.thresholds.push(f64::INFINITY);
        e.bpcer.push(0.0);
        e.macer.push(1.0);
        Ok(e)
    }
}

/// Exact threshold sweep in one pass over the sorted scores. Equal scores
/// share one threshold.
pub fn sweep(s: &ScoreSet) -> Result<ErrorTradeoff> {
    let n_bf = s.n_bonafide();
    let n_m = s.n_morph();
    if n_bf == 0 || n_m == 0 {
        return Err(Error::Metric(
            "both bona fide and morph scores for a threshold sweep".into(),
        ));
    }
    let mut sorted: Vec<(f64, bool)> = s
        .records
        .iter()
        .map(|r| (r.score, r.label == Label::Morph))
        .collect();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("scores are finite"));

    let (nbf, nm) = (n_bf as f64, n_m as f64);
    let mut e = ErrorTradeoff {
        thresholds: Vec::with_capacity(sorted.len() + 2),
        bpcer: Vec::with_capacity(sorted.len() + 2),
        macer: Vec::with_capacity(sorted.len() + 2),
    };
    e.thresholds.push(f64::NEG_INFINITY);
    e.bpcer.push(1.0);
    e.macer.push(0.0);

    let (mut bona_below, mut morph_below) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].0;
        e.thresholds.push(t);
        e.bpcer.push((n_bf - bona_below) as f64 / nbf);
        e.macer.push(morph_below as f64 / nm);
        while i < sorted.len() && sorted[i].0 == t {
            if sorted[i].1 {
                morph_below += 1;
            } else {
                bona_below += 1;
            }
            i += 1;
        }
    }
    e.thresholds.push(f64::INFINITY);
    e.bpcer.push(0.0);
    e.macer.push(1.0);
    Ok(e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EerResult {
    pub eer: f64,
    #[serde(with = "threshold_serde")]
    pub threshold: f64,
    /// `[max_t min(BPCER, MACER), min_t max(BPCER, MACER)]` over the discrete
    /// thresholds.
    pub bracket: (f64, f64),
}

/// Detection equal error rate: crossing of the (BPCER, MACER) polyline with
/// the diagonal.
pub fn deer(e: &ErrorTradeoff) -> EerResult {
    let lower = e
        .bpcer
        .iter()
        .zip(&e.macer)
        .map(|(b, m)| b.min(*m))
        .fold(f64::NEG_INFINITY, f64::max);
    let upper = e
        .bpcer
        .iter()
        .zip(&e.macer)
        .map(|(b, m)| b.max(*m))
        .fold(f64::INFINITY, f64::min);

    // bpcer - macer is non-increasing along the sweep, from 1 down to -1.
    let k = e
        .bpcer
        .iter()
        .zip(&e.macer)
        .position(|(b, m)| b <= m)
        .expect("the +inf sentinel has bpcer 0 <= macer 1");
    let (eer, threshold) = if e.bpcer[k] == e.macer[k] {
        (e.bpcer[k], e.thresholds[k])
    } else {
        let j = k - 1;
        let d0 = e.bpcer[j] - e.macer[j];
        let d1 = e.bpcer[k] - e.macer[k];
        let lambda = d0 / (d0 - d1);
        let eer = e.bpcer[j] + lambda * (e.bpcer[k] - e.bpcer[j]);
        let (t0, t1) = (e.thresholds[j], e.thresholds[k]);
        let threshold = match (t0.is_finite(), t1.is_finite()) {
            (true, true) => t0 + lambda * (t1 - t0),
            (true, false) => t0,
            (false, true) => t1,
            (false, false) => 0.0,
        };
        (eer.clamp(lower, upper), threshold)
    };
    EerResult {
        eer,
        threshold,
        bracket: (lower, upper),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    /// MACER bound.
    pub alpha: f64,
    pub bpcer: f64,
    #[serde(with = "threshold_serde")]
    pub threshold: f64,
    #[serde(alias = "achieved_apcer")]
    pub achieved_macer: f64,
}

/// Lowest BPCER over the discrete thresholds subject to `MACER <= alpha`,
/// taken at the largest such threshold. No interpolation.
pub fn bpcer_at_macer(e: &ErrorTradeoff, alpha: f64) -> Result<OperatingPoint> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "MACER bound must lie in (0, 1), got {alpha}"
        )));
    }
    // MACER is non-decreasing, so the admissible thresholds form a prefix.
    let k = e.macer.partition_point(|&m| m <= alpha) - 1;
    Ok(OperatingPoint {
        alpha,
        bpcer: e.bpcer[k],
        threshold: e.thresholds[k],
        achieved_macer: e.macer[k],
    })
}

/// DET coordinates `(probit(MACER), probit(BPCER))` for each observed-score
/// threshold, with rates clamped to `[1e-6, 1 - 1e-6]`.
pub fn det_points(e: &ErrorTradeoff) -> Vec<(f64, f64)> {
    let z = |r: f64| probit(r.clamp(DET_CLAMP, 1.0 - DET_CLAMP)).expect("clamped into (0, 1)");
    e.interior()
        .map(|i| (z(e.macer[i]), z(e.bpcer[i])))
        .collect()
}

/// Metrics reported for one score set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub n_bonafide: usize,
    pub n_morph: usize,
    pub deer: EerResult,
    pub operating_points: Vec<OperatingPoint>,
}

impl Evaluation {
    pub fn bpcer_at(&self, alpha: f64) -> Option<f64> {
        self.operating_points
            .iter()
            .find(|p| p.alpha == alpha)
            .map(|p| p.bpcer)
    }
}

pub fn evaluate(s: &ScoreSet) -> Result<(Evaluation, ErrorTradeoff)> {
    let tradeoff = sweep(s)?;
    let operating_points = OPERATING_ALPHAS
        .iter()
        .map(|&a| bpcer_at_macer(&tradeoff, a))
        .collect::<Result<_>>()?;
    Ok((
        Evaluation {
            n_bonafide: s.n_bonafide(),
            n_morph: s.n_morph(),
            deer: deer(&tradeoff),
            operating_points,
        },
        tradeoff,
    ))
}

/// JSON has no infinities; sentinel thresholds are written as `"-inf"` and
/// `"inf"`.
mod threshold_serde {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(t: &f64, s: S) -> Result<S::Ok, S::Error> {
        if t.is_finite() {
            s.serialize_f64(*t)
        } else if *t > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(x) => Ok(x),
            Repr::Text(t) => match t.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(D::Error::custom(format!("invalid threshold `{other}`"))),
            },
        }
    }
}
