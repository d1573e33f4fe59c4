//! Detection error tradeoff metrics: FAR/FRR sweep, interpolated EER, and
//! the area under the DET curve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Labeled dissimilarity scores from a verification run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreSet {
    pub genuine: Vec<f32>,
    pub imposter: Vec<f32>,
}

impl ScoreSet {
    pub fn validate(&self) -> Result<()> {
        if self.genuine.is_empty() || self.imposter.is_empty() {
            return Err(Error::Input(
                "both genuine and imposter score lists must be non-empty".into(),
            ));
        }
        for s in self.genuine.iter().chain(self.imposter.iter()) {
            if !s.is_finite() || *s < 0.0 {
                return Err(Error::Input(format!("invalid score {s}")));
            }
        }
        Ok(())
    }

    /// CSV with header `kind,score`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("kind,score\n");
        for v in &self.genuine {
            s.push_str(&format!("genuine,{v}\n"));
        }
        for v in &self.imposter {
            s.push_str(&format!("imposter,{v}\n"));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some("kind,score") => {}
            other => {
                return Err(Error::Format {
                    offset: 0,
                    what: format!("expected header \"kind,score\", got {other:?}"),
                })
            }
        }
        let mut set = ScoreSet::default();
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (kind, score) = line.split_once(',').ok_or_else(|| Error::Format {
                offset: lineno + 2,
                what: "score line is not `kind,score`".into(),
            })?;
            let value: f32 = score.trim().parse().map_err(|_| Error::Format {
                offset: lineno + 2,
                what: format!("bad score {score:?}"),
            })?;
            match kind.trim() {
                "genuine" => set.genuine.push(value),
                "imposter" => set.imposter.push(value),
                other => {
                    return Err(Error::Format {
                        offset: lineno + 2,
                        what: format!("unknown score kind {other:?}"),
                    })
                }
            }
        }
        Ok(set)
    }
}

/// One operating point of the DET curve at acceptance rule `score <= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    pub threshold: f64,
    /// Fraction of imposter scores accepted.
    pub far: f64,
    /// Fraction of genuine scores rejected.
    pub frr: f64,
}

/// FAR/FRR tradeoff over every distinct score threshold, FAR non-decreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct DetCurve {
    pub points: Vec<DetPoint>,
}

impl DetCurve {
    /// CSV with header `threshold,far,frr`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,far,frr\n");
        for p in &self.points {
            s.push_str(&format!("{},{},{}\n", p.threshold, p.far, p.frr));
        }
        s
    }
}

/// DET curve with its two scalar summaries (lower is better for both).
#[derive(Debug, Clone)]
pub struct VerificationMetrics {
    pub curve: DetCurve,
    pub eer: f64,
    pub auc: f64,
}

/// Sweep all distinct scores as thresholds (accept iff `score <= t`),
/// interpolate the equal-error crossing, and integrate FRR over FAR by the
/// trapezoid rule.
pub fn det_metrics(scores: &ScoreSet) -> Result<VerificationMetrics> {
    scores.validate()?;
    let mut thresholds: Vec<f32> = scores
        .genuine
        .iter()
        .chain(scores.imposter.iter())
        .copied()
        .collect();
    thresholds.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    thresholds.dedup();

    let gn = scores.genuine.len() as f64;
    let inum = scores.imposter.len() as f64;

    // sorted copies let each count be a binary search
    let mut genuine = scores.genuine.clone();
    let mut imposter = scores.imposter.clone();
    genuine.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    imposter.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    let count_le = |sorted: &[f32], t: f32| sorted.partition_point(|&s| s <= t) as f64;

    // sentinel below every score: reject everything (FAR 0, FRR 1)
    let mut points = vec![DetPoint {
        threshold: thresholds[0] as f64 - 1.0,
        far: 0.0,
        frr: 1.0,
    }];
    for &t in &thresholds {
        let far = count_le(&imposter, t) / inum;
        let frr = (gn - count_le(&genuine, t)) / gn;
        points.push(DetPoint {
            threshold: t as f64,
            far,
            frr,
        });
    }

    // first index where FAR >= FRR; exists because the sweep ends at
    // (FAR 1, FRR 0) and starts at (FAR 0, FRR 1)
    let cross = points
        .iter()
        .position(|p| p.far >= p.frr)
        .expect("curve crosses by construction");
    let eer = if (points[cross].far - points[cross].frr).abs() < f64::EPSILON {
        points[cross].far
    } else {
        // linear interpolation in (FAR, FRR) space between the bracketing
        // points; depends only on the error fractions, not the thresholds,
        // so it is invariant under monotone score transformations
        let lo = points[cross - 1];
        let hi = points[cross];
        let denom = (hi.far - lo.far) - (hi.frr - lo.frr);
        let s = (lo.frr - lo.far) / denom;
        lo.far + s * (hi.far - lo.far)
    };

    let mut auc = 0.0f64;
    for pair in points.windows(2) {
        auc += (pair[1].far - pair[0].far) * (pair[0].frr + pair[1].frr) / 2.0;
    }

    Ok(VerificationMetrics {
        curve: DetCurve { points },
        eer,
        auc,
    })
}
