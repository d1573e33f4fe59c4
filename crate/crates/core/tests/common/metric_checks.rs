//! DET/EER/AUC oracle checks shared by the dedicated suite and the
//! acceptance suite; see `tests/metrics_oracle.rs`.

#![allow(dead_code)]

use super::rng;
use iristex::eval::{det_metrics, ScoreSet};
use rand::Rng;

/// Scores on a 1e-3 grid in [0, 2): distinct values stay distinct under
/// the monotone transforms below even in f32.
fn random_scores(r: &mut rand_chacha::ChaCha8Rng, max_len: usize) -> ScoreSet {
    let g = r.gen_range(1..=max_len);
    let i = r.gen_range(1..=max_len);
    ScoreSet {
        genuine: (0..g).map(|_| r.gen_range(0..2000) as f32 / 1000.0).collect(),
        imposter: (0..i).map(|_| r.gen_range(0..2000) as f32 / 1000.0).collect(),
    }
}

/// Brute-force reference: recount FAR/FRR per distinct threshold by direct
/// scans, then integrate FRR over FAR with the trapezoid rule in f64.
fn reference_metrics(s: &ScoreSet) -> (f64, Vec<(f64, f64)>) {
    let mut thresholds: Vec<f32> = s.genuine.iter().chain(s.imposter.iter()).copied().collect();
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thresholds.dedup();
    let mut pts: Vec<(f64, f64)> = vec![(0.0, 1.0)];
    for &t in &thresholds {
        let far = s.imposter.iter().filter(|&&v| v <= t).count() as f64 / s.imposter.len() as f64;
        let frr = s.genuine.iter().filter(|&&v| v > t).count() as f64 / s.genuine.len() as f64;
        pts.push((far, frr));
    }
    let mut auc = 0.0f64;
    for pair in pts.windows(2) {
        auc += (pair[1].0 - pair[0].0) * (pair[0].1 + pair[1].1) / 2.0;
    }
    (auc, pts)
}

/// Exhaustive-sweep discrete crossing: midpoint of (FAR, FRR) at the first
/// threshold where FAR >= FRR.
fn discrete_eer(s: &ScoreSet) -> f64 {
    let (_, pts) = reference_metrics(s);
    let p = pts.iter().find(|(far, frr)| far >= frr).expect("crossing");
    (p.0 + p.1) / 2.0
}

pub fn auc_oracle(trial: u64) {
    {
        let mut r = rng(3000 + trial);
        let s = random_scores(&mut r, 200);
        let m = det_metrics(&s).unwrap();
        let (want_auc, _) = reference_metrics(&s);
        assert!(
            (m.auc - want_auc).abs() < 1e-9,
            "trial {trial}: auc {} vs {}",
            m.auc,
            want_auc
        );
    }
}

pub fn eer_oracle(trial: u64) {
    {
        let mut r = rng(4000 + trial);
        let s = random_scores(&mut r, 200);
        let m = det_metrics(&s).unwrap();
        let step = (1.0 / s.genuine.len() as f64).max(1.0 / s.imposter.len() as f64);
        let disc = discrete_eer(&s);
        assert!(
            (m.eer - disc).abs() <= step + 1e-12,
            "trial {trial}: eer {} vs discrete {} (step {step})",
            m.eer,
            disc
        );
        assert!((0.0..=1.0).contains(&m.eer));
    }
}

pub fn monotone_invariance_oracle(trial: u64) {
    let transforms: [fn(f32) -> f32; 3] = [
        |x| 2.5 * x + 0.3,
        |x| x * x * x,
        |x| (x.exp() - 1.0) * 0.7,
    ];
    {
        let mut r = rng(5000 + trial);
        let s = random_scores(&mut r, 150);
        let base = det_metrics(&s).unwrap();
        for (ti, f) in transforms.iter().enumerate() {
            let mapped = ScoreSet {
                genuine: s.genuine.iter().map(|&v| f(v)).collect(),
                imposter: s.imposter.iter().map(|&v| f(v)).collect(),
            };
            let m = det_metrics(&mapped).unwrap();
            assert!(
                (m.eer - base.eer).abs() < 1e-9,
                "trial {trial} transform {ti}: eer {} vs {}",
                m.eer,
                base.eer
            );
            assert!(
                (m.auc - base.auc).abs() < 1e-9,
                "trial {trial} transform {ti}: auc {} vs {}",
                m.auc,
                base.auc
            );
        }
    }
}

pub fn curve_monotonicity_oracle(trial: u64) {
    {
        let mut r = rng(6000 + trial);
        let s = random_scores(&mut r, 120);
        let m = det_metrics(&s).unwrap();
        for pair in m.curve.points.windows(2) {
            assert!(pair[1].far >= pair[0].far, "trial {trial}");
            assert!(pair[1].frr <= pair[0].frr, "trial {trial}");
            assert!((0.0..=1.0).contains(&pair[1].far));
            assert!((0.0..=1.0).contains(&pair[1].frr));
        }
    }
}
