use nalgebra::{Matrix3, Vector3};

use super::Extrinsics;
use crate::error::{Error, Result};

/// Which relative pose pairs are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairSet {
    /// Every unordered pair `(i, j)`, `i < j`.
    #[default]
    All,
    /// Pairs `(0, k)` against the first (alignment) camera.
    Anchored,
}

impl PairSet {
    fn pairs(self, n: usize) -> Vec<(usize, usize)> {
        match self {
            PairSet::All => (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .collect(),
            PairSet::Anchored => (1..n).map(|k| (0, k)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseErrorReport {
    pub tau_deg: f64,
    /// Percentage of pairs with relative rotation error below `tau_deg`.
    pub rra: f64,
    /// Percentage of pairs with translation-direction error below `tau_deg`.
    pub rta: f64,
    /// Mean of the rotation and translation accuracy curves over 1..=30 degrees.
    pub auc_30: f64,
    pub pairs: Vec<(usize, usize)>,
    pub rotation_errors_deg: Vec<f64>,
    pub translation_errors_deg: Vec<f64>,
}

fn accuracy(errors: &[f64], threshold: f64) -> f64 {
    let hits = errors.iter().filter(|&&e| e < threshold).count();
    100.0 * hits as f64 / errors.len() as f64
}

fn auc(errors: &[f64], max_deg: u32) -> f64 {
    (1..=max_deg).map(|t| accuracy(errors, f64::from(t))).sum::<f64>() / f64::from(max_deg)
}

fn rotation_angle_deg(r: &Matrix3<f64>) -> f64 {
    let cos = (r.trace() - 1.0) / 2.0;
    let sin = 0.5
        * Vector3::new(
            r[(2, 1)] - r[(1, 2)],
            r[(0, 2)] - r[(2, 0)],
            r[(1, 0)] - r[(0, 1)],
        )
        .norm();
    sin.atan2(cos).to_degrees()
}

fn direction_angle_deg(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    const EPS: f64 = 1e-12;
    match (a.norm() < EPS, b.norm() < EPS) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 180.0,
        (false, false) => {
            let c = (a.dot(b) / (a.norm() * b.norm())).clamp(-1.0, 1.0);
            c.acos().to_degrees()
        }
    }
}

fn relative(poses: &[Extrinsics], i: usize, j: usize) -> Extrinsics {
    poses[j].compose(&poses[i].inverse())
}

/// Relative-pose accuracy of `pred` against `gt`.
///
/// `pred` is first rigidly re-anchored so its first camera coincides with
/// the first ground-truth camera; pose-free predictions live in an
/// arbitrary world frame.
pub fn pose_error_metrics(
    pred: &[Extrinsics],
    gt: &[Extrinsics],
    tau_deg: f64,
    pair_set: PairSet,
) -> Result<PoseErrorReport> {
    if pred.len() != gt.len() {
        return Err(Error::invalid(format!(
            "{} predicted poses vs {} ground-truth poses",
            pred.len(),
            gt.len()
        )));
    }
    if pred.len() < 2 {
        return Err(Error::invalid("pose metrics need at least 2 poses"));
    }
    if !(tau_deg > 0.0) {
        return Err(Error::invalid(format!("threshold {tau_deg} must be positive")));
    }

    let to_gt = pred[0].inverse().compose(&gt[0]);
    let aligned: Vec<Extrinsics> = pred.iter().map(|p| p.compose(&to_gt)).collect();

    let pairs = pair_set.pairs(pred.len());
    let mut rotation_errors_deg = Vec::with_capacity(pairs.len());
    let mut translation_errors_deg = Vec::with_capacity(pairs.len());
    for &(i, j) in &pairs {
        let p = relative(&aligned, i, j);
        let g = relative(gt, i, j);
        rotation_errors_deg.push(rotation_angle_deg(&(p.rotation() * g.rotation().transpose())));
        translation_errors_deg.push(direction_angle_deg(p.translation(), g.translation()));
    }

    Ok(PoseErrorReport {
        tau_deg,
        rra: accuracy(&rotation_errors_deg, tau_deg),
        rta: accuracy(&translation_errors_deg, tau_deg),
        auc_30: 0.5 * (auc(&rotation_errors_deg, 30) + auc(&translation_errors_deg, 30)),
        pairs,
        rotation_errors_deg,
        translation_errors_deg,
    })
}
