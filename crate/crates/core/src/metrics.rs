//! Detection evaluation: ellipse IoU, angle error, greedy matching, AP over
//! IoU thresholds and log-average miss rate over FPPI, with optional
//! angle-conditioned variants.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::geometry::{aa_box, wrap_half_turn, BoxRegion, Ellipse, GridSpec};

/// Default number of IoU grid cells along the longer side.
pub const DEFAULT_IOU_RESOLUTION: usize = 256;
/// Lower clamp on miss rates inside the geometric mean.
pub const MR_EPS: f64 = 1e-4;
/// Default `b / a` above which a GT counts as circular when the angle
/// exemption is enabled.
pub const DEFAULT_CIRCULAR_TAU: f64 = 0.95;

/// The nine FPPI reference points `10^(-2 + k/4)`, `k = 0..8`.
pub fn fppi_targets() -> [f64; 9] {
    std::array::from_fn(|k| 10f64.powf(-2.0 + k as f64 / 4.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub image_id: String,
    pub ellipse: Ellipse<f64>,
    pub score: f64,
}

impl DetectionRecord {
    pub fn new(image_id: impl Into<String>, ellipse: Ellipse<f64>, score: f64) -> Result<Self> {
        let d = Self {
            image_id: image_id.into(),
            ellipse,
            score,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.score) {
            return invalid(format!("detection score {} outside [0, 1]", self.score));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GtRecord {
    pub image_id: String,
    pub ellipse: Ellipse<f64>,
    pub visible_box: Option<BoxRegion<f64>>,
    pub visibility: f64,
}

impl GtRecord {
    pub fn new(
        image_id: impl Into<String>,
        ellipse: Ellipse<f64>,
        visible_box: Option<BoxRegion<f64>>,
        visibility: f64,
    ) -> Result<Self> {
        let g = Self {
            image_id: image_id.into(),
            ellipse,
            visible_box,
            visibility,
        };
        g.validate()?;
        Ok(g)
    }

    /// Fully visible GT without a visible box.
    pub fn whole(image_id: impl Into<String>, ellipse: Ellipse<f64>) -> Self {
        Self {
            image_id: image_id.into(),
            ellipse,
            visible_box: None,
            visibility: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.visibility > 0.0 && self.visibility <= 1.0) {
            return invalid(format!("visibility {} outside (0, 1]", self.visibility));
        }
        Ok(())
    }
}

/// Intersection over union of the filled ellipses, by sampling cell centers
/// of a shared square-cell grid over the union of both bounding boxes.
pub fn ellipse_iou(e1: &Ellipse<f64>, e2: &Ellipse<f64>, resolution: usize) -> Result<f64> {
    if resolution < 64 {
        return invalid("IoU resolution must be at least 64");
    }
    let (b1, b2) = (aa_box(e1), aa_box(e2));
    if b1.x_max() <= b2.x_min() || b2.x_max() <= b1.x_min() || b1.y_max() <= b2.y_min() || b2.y_max() <= b1.y_min() {
        return Ok(0.0);
    }
    let x0 = b1.x_min().min(b2.x_min());
    let y0 = b1.y_min().min(b2.y_min());
    let w = b1.x_max().max(b2.x_max()) - x0;
    let h = b1.y_max().max(b2.y_max()) - y0;
    let cell = w.max(h) / resolution as f64;
    let cols = ((w / cell).ceil() as usize).clamp(1, resolution);
    let rows = ((h / cell).ceil() as usize).clamp(1, resolution);
    let grid = GridSpec::new(x0, y0, cell, cols, rows)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for r in 0..rows {
        for c in 0..cols {
            let (u, v) = grid.cell_center(c, r);
            let in1 = e1.implicit(u, v) <= 1.0;
            let in2 = e2.implicit(u, v) <= 1.0;
            inter += (in1 && in2) as usize;
            union += (in1 || in2) as usize;
        }
    }
    Ok(if union == 0 { 0.0 } else { inter as f64 / union as f64 })
}

/// Orientation difference in degrees, modulo 180, in `[0, 90]`.
pub fn angle_error(e1: &Ellipse<f64>, e2: &Ellipse<f64>) -> f64 {
    wrap_half_turn(e1.theta() - e2.theta()).abs().to_degrees()
}

/// Matching thresholds for one evaluation pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchCriteria {
    pub iou_thr: f64,
    pub angle_thr: Option<f64>,
    /// When set, GTs with `b / a` above this ratio skip the angle test.
    pub circular_exempt: Option<f64>,
}

/// Outcome of greedy matching.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchResult {
    /// TP flag per detection, in input order.
    pub det_tp: Vec<bool>,
    /// Matched flag per GT, in input order.
    pub gt_matched: Vec<bool>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gt: usize,
    iou: f64,
    angle: f64,
    circular: f64,
}

/// Precomputed detection/GT overlaps for a whole dataset, reusable across
/// thresholds.
#[derive(Debug, Clone)]
pub struct PairTable {
    /// Detection indices sorted by descending score, ties by
    /// `(image_id, input index)`.
    order: Vec<usize>,
    candidates: Vec<Vec<Candidate>>,
    scores: Vec<f64>,
    n_gt: usize,
    n_images: usize,
}

/// Sort order used throughout: descending score, then `(image_id, index)`.
pub fn detection_order(dets: &[DetectionRecord]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| {
        dets[j]
            .score
            .partial_cmp(&dets[i].score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| dets[i].image_id.cmp(&dets[j].image_id))
            .then(i.cmp(&j))
    });
    order
}

impl PairTable {
    pub fn new(dets: &[DetectionRecord], gts: &[GtRecord], resolution: usize) -> Result<Self> {
        for d in dets {
            d.validate()?;
        }
        for g in gts {
            g.validate()?;
        }
        let mut by_image: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, g) in gts.iter().enumerate() {
            by_image.entry(g.image_id.as_str()).or_default().push(i);
        }
        let candidates = dets
            .par_iter()
            .map(|d| {
                let Some(idx) = by_image.get(d.image_id.as_str()) else {
                    return Ok(Vec::new());
                };
                let mut out = Vec::new();
                for &gi in idx {
                    let g = &gts[gi].ellipse;
                    let iou = ellipse_iou(&d.ellipse, g, resolution)?;
                    if iou > 0.0 {
                        out.push(Candidate {
                            gt: gi,
                            iou,
                            angle: angle_error(&d.ellipse, g),
                            circular: g.b() / g.a(),
                        });
                    }
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        let images: BTreeSet<&str> = dets
            .iter()
            .map(|d| d.image_id.as_str())
            .chain(gts.iter().map(|g| g.image_id.as_str()))
            .collect();
        Ok(Self {
            order: detection_order(dets),
            candidates,
            scores: dets.iter().map(|d| d.score).collect(),
            n_gt: gts.len(),
            n_images: images.len(),
        })
    }

    pub fn n_gt(&self) -> usize {
        self.n_gt
    }

    pub fn n_images(&self) -> usize {
        self.n_images
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Greedy one-to-one matching of the first `take` detections in sort
    /// order (all of them when `take` is `None`).
    pub fn match_prefix(&self, crit: &MatchCriteria, take: Option<usize>) -> MatchResult {
        let mut det_tp = vec![false; self.scores.len()];
        let mut gt_matched = vec![false; self.n_gt];
        let take = take.unwrap_or(self.order.len()).min(self.order.len());
        for &di in &self.order[..take] {
            let mut best: Option<(usize, f64)> = None;
            for c in &self.candidates[di] {
                if gt_matched[c.gt] || c.iou < crit.iou_thr {
                    continue;
                }
                if let Some(max_angle) = crit.angle_thr {
                    let exempt = crit.circular_exempt.is_some_and(|tau| c.circular > tau);
                    if !exempt && c.angle > max_angle {
                        continue;
                    }
                }
                // strict comparison keeps the lowest GT index on IoU ties
                if best.is_none_or(|(_, iou)| c.iou > iou) {
                    best = Some((c.gt, c.iou));
                }
            }
            if let Some((gi, _)) = best {
                gt_matched[gi] = true;
                det_tp[di] = true;
            }
        }
        MatchResult { det_tp, gt_matched }
    }

    /// Cumulative (TP, FP) counts at every distinct score threshold, from
    /// the highest score down; the first entry is the empty operating
    /// point.
    pub fn operating_points(&self, crit: &MatchCriteria) -> Vec<OperatingPoint> {
        let m = self.match_prefix(crit, None);
        let mut out = vec![OperatingPoint {
            threshold: f64::INFINITY,
            tp: 0,
            fp: 0,
        }];
        let (mut tp, mut fp) = (0, 0);
        for (k, &di) in self.order.iter().enumerate() {
            if m.det_tp[di] {
                tp += 1;
            } else {
                fp += 1;
            }
            let last_of_group = self
                .order
                .get(k + 1)
                .is_none_or(|&next| self.scores[next] != self.scores[di]);
            if last_of_group {
                out.push(OperatingPoint {
                    threshold: self.scores[di],
                    tp,
                    fp,
                });
            }
        }
        out
    }
}

/// Detections with score `>= threshold` give `tp` true and `fp` false
/// positives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
}

/// Greedy matching for one criteria set.
pub fn match_detections(
    dets: &[DetectionRecord],
    gts: &[GtRecord],
    crit: &MatchCriteria,
    resolution: usize,
) -> Result<MatchResult> {
    Ok(PairTable::new(dets, gts, resolution)?.match_prefix(crit, None))
}

/// All-point interpolated AP from operating points ordered by decreasing
/// threshold.
pub fn ap_from_points(points: &[OperatingPoint], n_gt: usize) -> Result<f64> {
    if n_gt == 0 {
        return Err(Error::UndefinedMetric("average precision with zero ground truth".into()));
    }
    let pr: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.tp + p.fp > 0)
        .map(|p| (p.tp as f64 / n_gt as f64, p.tp as f64 / (p.tp + p.fp) as f64))
        .collect();
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for i in 0..pr.len() {
        let envelope = pr[i..].iter().map(|&(_, p)| p).fold(0.0, f64::max);
        ap += (pr[i].0 - prev_recall) * envelope;
        prev_recall = pr[i].0;
    }
    Ok(ap)
}

/// Log-average miss rate: at each FPPI target, the miss rate of the
/// operating point with the most detections whose FPPI does not exceed
/// it, clamped at [`MR_EPS`], combined by geometric mean.
pub fn mr_from_points(points: &[OperatingPoint], n_gt: usize, n_images: usize) -> Result<f64> {
    if n_gt == 0 {
        return Err(Error::UndefinedMetric("miss rate with zero ground truth".into()));
    }
    if n_images == 0 {
        return Err(Error::UndefinedMetric("miss rate with zero images".into()));
    }
    let targets = fppi_targets();
    let mut log_sum = 0.0;
    for &f in &targets {
        let tp = points
            .iter()
            .filter(|p| p.fp as f64 / n_images as f64 <= f)
            .map(|p| p.tp)
            .max()
            .unwrap_or(0);
        let miss = 1.0 - tp as f64 / n_gt as f64;
        log_sum += miss.max(MR_EPS).ln();
    }
    Ok((log_sum / targets.len() as f64).exp())
}

/// Displays clamped miss rates as 0.
pub fn display_mr(mr: f64) -> f64 {
    if mr <= MR_EPS * (1.0 + 1e-9) {
        0.0
    } else {
        mr
    }
}

/// Named threshold grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// IoU 0.75..0.95, AP angles 10..2 step 2, MR angles 5..1 step 1.
    Soe,
    /// IoU 0.70..0.90, angles 45..5 step 10.
    Sof,
    /// IoU 0.75..0.95, angles 45..5 step 10.
    Default,
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "soe" => Ok(Self::Soe),
            "sof" | "rof" => Ok(Self::Sof),
            "default" => Ok(Self::Default),
            other => invalid(format!("unknown preset '{other}'")),
        }
    }
}

fn steps(start: f64, step: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| ((start + step * k as f64) * 1e6).round() / 1e6).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalCriteria {
    /// Strictly increasing, each in `(0, 1)`.
    pub iou_thresholds: Vec<f64>,
    /// Angle thresholds in degrees for AP^Θ.
    pub ap_angle_thresholds: Vec<f64>,
    /// Angle thresholds in degrees for MR^Θ.
    pub mr_angle_thresholds: Vec<f64>,
    /// IoU used together with the angle thresholds.
    pub default_iou: f64,
    pub iou_resolution: usize,
    /// Skip the angle test for GTs with `b / a` above this ratio.
    pub circular_angle_exempt: Option<f64>,
}

impl EvalCriteria {
    pub fn preset(p: Preset) -> Self {
        let (ious, ap_angles, mr_angles, default_iou) = match p {
            Preset::Soe => (steps(0.75, 0.05, 5), steps(10.0, -2.0, 5), steps(5.0, -1.0, 5), 0.75),
            Preset::Sof => (steps(0.70, 0.05, 5), steps(45.0, -10.0, 5), steps(45.0, -10.0, 5), 0.70),
            Preset::Default => (steps(0.75, 0.05, 5), steps(45.0, -10.0, 5), steps(45.0, -10.0, 5), 0.75),
        };
        Self {
            iou_thresholds: ious,
            ap_angle_thresholds: ap_angles,
            mr_angle_thresholds: mr_angles,
            default_iou,
            iou_resolution: DEFAULT_IOU_RESOLUTION,
            circular_angle_exempt: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if self.iou_thresholds.is_empty() || !self.iou_thresholds.iter().all(|&v| unit(v)) {
            return invalid("IoU thresholds must be non-empty and lie in (0, 1)");
        }
        if self.iou_thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("IoU thresholds must be strictly increasing");
        }
        if !unit(self.default_iou) {
            return invalid("default IoU must lie in (0, 1)");
        }
        let angle_ok = |v: &f64| (0.0..=90.0).contains(v);
        if !self.ap_angle_thresholds.iter().chain(&self.mr_angle_thresholds).all(angle_ok) {
            return invalid("angle thresholds must lie in [0, 90] degrees");
        }
        if self.iou_resolution < 64 {
            return invalid("IoU resolution must be at least 64");
        }
        if let Some(tau) = self.circular_angle_exempt {
            if !(tau > 0.0 && tau <= 1.0) {
                return invalid("circular exemption ratio must lie in (0, 1]");
            }
        }
        Ok(())
    }

    fn crit(&self, iou_thr: f64, angle_thr: Option<f64>) -> MatchCriteria {
        MatchCriteria {
            iou_thr,
            angle_thr,
            circular_exempt: self.circular_angle_exempt,
        }
    }
}

impl Default for EvalCriteria {
    fn default() -> Self {
        Self::preset(Preset::Default)
    }
}

/// A metric value at one threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtThreshold {
    pub threshold: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub ap: Vec<AtThreshold>,
    pub ap_star: f64,
    pub mr: Vec<AtThreshold>,
    pub mr_star: f64,
    pub ap_theta: Vec<AtThreshold>,
    pub ap_theta_star: f64,
    pub mr_theta: Vec<AtThreshold>,
    pub mr_theta_star: f64,
    pub n_gt: usize,
    pub n_det: usize,
    pub n_images: usize,
}

fn mean(v: &[AtThreshold]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().map(|t| t.value).sum::<f64>() / v.len() as f64
}

/// Fills every report field for the given criteria.
pub fn evaluate(dets: &[DetectionRecord], gts: &[GtRecord], criteria: &EvalCriteria) -> Result<EvalReport> {
    criteria.validate()?;
    let table = PairTable::new(dets, gts, criteria.iou_resolution)?;
    if table.n_gt() == 0 {
        return Err(Error::UndefinedMetric("no ground truth records".into()));
    }
    let (n_gt, n_img) = (table.n_gt(), table.n_images());
    let run = |thresholds: &[f64], f: &dyn Fn(f64) -> MatchCriteria, mr: bool| -> Result<Vec<AtThreshold>> {
        thresholds
            .iter()
            .map(|&t| {
                let pts = table.operating_points(&f(t));
                let value = if mr {
                    mr_from_points(&pts, n_gt, n_img)?
                } else {
                    ap_from_points(&pts, n_gt)?
                };
                Ok(AtThreshold { threshold: t, value })
            })
            .collect()
    };
    let by_iou = |t: f64| criteria.crit(t, None);
    let by_angle = |t: f64| criteria.crit(criteria.default_iou, Some(t));
    let ap = run(&criteria.iou_thresholds, &by_iou, false)?;
    let mr = run(&criteria.iou_thresholds, &by_iou, true)?;
    let ap_theta = run(&criteria.ap_angle_thresholds, &by_angle, false)?;
    let mr_theta = run(&criteria.mr_angle_thresholds, &by_angle, true)?;
    Ok(EvalReport {
        ap_star: mean(&ap),
        mr_star: mean(&mr),
        ap_theta_star: mean(&ap_theta),
        mr_theta_star: mean(&mr_theta),
        ap,
        mr,
        ap_theta,
        mr_theta,
        n_gt,
        n_det: dets.len(),
        n_images: n_img,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(x: f64, y: f64, a: f64, b: f64, t: f64) -> Ellipse<f64> {
        Ellipse::new(x, y, a, b, t).unwrap()
    }

    fn det(img: &str, el: Ellipse<f64>, s: f64) -> DetectionRecord {
        DetectionRecord::new(img, el, s).unwrap()
    }

    #[test]
    fn fppi_grid() {
        let t = fppi_targets();
        assert_eq!(t.len(), 9);
        assert!((t[0] - 0.01).abs() < 1e-15 && (t[8] - 1.0).abs() < 1e-15);
        assert!((t[4] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn iou_examples() {
        let c1 = Ellipse::circle(0.0, 0.0, 1.0).unwrap();
        let c2 = Ellipse::circle(0.0, 0.0, 2.0).unwrap();
        let iou = ellipse_iou(&c1, &c2, 256).unwrap();
        assert!((iou - 0.25).abs() < 0.005, "{iou}");
        assert_eq!(iou, ellipse_iou(&c2, &c1, 256).unwrap());
        let x = e(3.0, 4.0, 5.0, 2.0, 0.4);
        assert_eq!(ellipse_iou(&x, &x, 256).unwrap(), 1.0);
        let far = e(30.0, 4.0, 5.0, 2.0, 0.4);
        assert_eq!(ellipse_iou(&x, &far, 256).unwrap(), 0.0);
        assert!(ellipse_iou(&x, &x, 32).is_err());
    }

    #[test]
    fn angle_error_examples() {
        let d = |t1: f64, t2: f64| {
            angle_error(
                &e(0.0, 0.0, 2.0, 1.0, t1.to_radians()),
                &e(0.0, 0.0, 2.0, 1.0, t2.to_radians()),
            )
        };
        assert!((d(80.0, -80.0) - 20.0).abs() < 1e-12);
        assert!((d(45.0, -45.0) - 90.0).abs() < 1e-12);
        assert_eq!(d(30.0, 30.0), 0.0);
        assert!((d(10.0, 30.0) - 20.0).abs() < 1e-12);
    }

    #[test]
    fn matching_examples() {
        let g = e(10.0, 10.0, 4.0, 2.0, 0.0);
        let gts = vec![GtRecord::whole("a", g)];
        let crit = MatchCriteria {
            iou_thr: 0.5,
            angle_thr: None,
            circular_exempt: None,
        };
        let m = match_detections(&[det("a", g, 0.9)], &gts, &crit, 256).unwrap();
        assert_eq!(m.det_tp, vec![true]);

        let m = match_detections(&[det("a", g, 0.3), det("a", g, 0.8)], &gts, &crit, 256).unwrap();
        assert_eq!(m.det_tp, vec![false, true]);
        assert_eq!(m.gt_matched, vec![true]);

        // detections only match GTs of their own image
        let m = match_detections(&[det("b", g, 0.8)], &gts, &crit, 256).unwrap();
        assert_eq!(m.det_tp, vec![false]);

        let turned = e(10.0, 10.0, 4.0, 2.0, 8f64.to_radians());
        let angle = MatchCriteria {
            angle_thr: Some(5.0),
            ..crit
        };
        assert_eq!(match_detections(&[det("a", turned, 0.8)], &gts, &crit, 256).unwrap().det_tp, vec![true]);
        assert_eq!(match_detections(&[det("a", turned, 0.8)], &gts, &angle, 256).unwrap().det_tp, vec![false]);

        let round = e(10.0, 10.0, 4.0, 3.9, 0.0);
        let round_det = e(10.0, 10.0, 4.0, 3.9, 30f64.to_radians());
        let gts = vec![GtRecord::whole("a", round)];
        let exempt = MatchCriteria {
            circular_exempt: Some(0.95),
            ..angle
        };
        assert_eq!(match_detections(&[det("a", round_det, 0.8)], &gts, &angle, 256).unwrap().det_tp, vec![false]);
        assert_eq!(match_detections(&[det("a", round_det, 0.8)], &gts, &exempt, 256).unwrap().det_tp, vec![true]);
    }

    #[test]
    fn highest_iou_gt_wins() {
        let g1 = e(10.0, 10.0, 4.0, 2.0, 0.0);
        let g2 = e(10.5, 10.0, 4.0, 2.0, 0.0);
        let gts = vec![GtRecord::whole("a", g1), GtRecord::whole("a", g2)];
        let crit = MatchCriteria {
            iou_thr: 0.3,
            angle_thr: None,
            circular_exempt: None,
        };
        let m = match_detections(&[det("a", e(10.45, 10.0, 4.0, 2.0, 0.0), 0.9)], &gts, &crit, 256).unwrap();
        assert_eq!(m.gt_matched, vec![false, true]);
    }

    #[test]
    fn ap_and_mr_small_cases() {
        // perfect detector
        let pts = [
            OperatingPoint { threshold: f64::INFINITY, tp: 0, fp: 0 },
            OperatingPoint { threshold: 1.0, tp: 2, fp: 0 },
        ];
        assert_eq!(ap_from_points(&pts, 2).unwrap(), 1.0);
        assert!((mr_from_points(&pts, 2, 1).unwrap() - MR_EPS).abs() < 1e-18);
        assert_eq!(display_mr(mr_from_points(&pts, 2, 1).unwrap()), 0.0);

        // nothing detected
        let empty = [OperatingPoint { threshold: f64::INFINITY, tp: 0, fp: 0 }];
        assert_eq!(ap_from_points(&empty, 3).unwrap(), 0.0);
        assert_eq!(mr_from_points(&empty, 3, 2).unwrap(), 1.0);
        assert!(matches!(ap_from_points(&empty, 0), Err(Error::UndefinedMetric(_))));
        assert!(matches!(mr_from_points(&empty, 0, 1), Err(Error::UndefinedMetric(_))));

        // TP, FP, TP with 2 GT: envelope 1 on [0, 1/2], 2/3 on [1/2, 1]
        let pts = [
            OperatingPoint { threshold: f64::INFINITY, tp: 0, fp: 0 },
            OperatingPoint { threshold: 0.9, tp: 1, fp: 0 },
            OperatingPoint { threshold: 0.8, tp: 1, fp: 1 },
            OperatingPoint { threshold: 0.7, tp: 2, fp: 1 },
        ];
        assert!((ap_from_points(&pts, 2).unwrap() - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-15);
        // one image: FPPI 1 reached only at target 10^0, where all is found
        let expect = (0.5f64.ln() * 8.0 + MR_EPS.ln()) / 9.0;
        assert!((mr_from_points(&pts, 2, 1).unwrap() - expect.exp()).abs() < 1e-15);
    }

    #[test]
    fn tied_scores_form_one_operating_point() {
        let g = e(10.0, 10.0, 4.0, 2.0, 0.0);
        let gts = vec![GtRecord::whole("a", g)];
        let dets = vec![det("a", e(40.0, 40.0, 4.0, 2.0, 0.0), 0.5), det("a", g, 0.5)];
        let t = PairTable::new(&dets, &gts, 256).unwrap();
        let crit = MatchCriteria {
            iou_thr: 0.5,
            angle_thr: None,
            circular_exempt: None,
        };
        let pts = t.operating_points(&crit);
        assert_eq!(pts.len(), 2);
        assert_eq!((pts[1].tp, pts[1].fp), (1, 1));
    }

    #[test]
    fn self_evaluation_and_empty() {
        let gts: Vec<_> = (0..4)
            .map(|i| GtRecord::whole(format!("img{}", i % 2), e(10.0 + 20.0 * i as f64, 10.0, 5.0, 2.0, 0.3)))
            .collect();
        let dets: Vec<_> = gts.iter().map(|g| det(&g.image_id, g.ellipse, 1.0)).collect();
        for p in [Preset::Soe, Preset::Sof, Preset::Default] {
            let r = evaluate(&dets, &gts, &EvalCriteria::preset(p)).unwrap();
            assert!(r.ap.iter().chain(&r.ap_theta).all(|t| t.value == 1.0));
            assert!(r.mr.iter().chain(&r.mr_theta).all(|t| display_mr(t.value) == 0.0));
            assert_eq!(r.ap.len(), 5);
        }
        let r = evaluate(&[], &gts, &EvalCriteria::default()).unwrap();
        assert_eq!((r.ap_star, r.mr_star, r.ap_theta_star, r.mr_theta_star), (0.0, 1.0, 0.0, 1.0));
        assert!(matches!(evaluate(&dets, &[], &EvalCriteria::default()), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn presets() {
        let soe = EvalCriteria::preset(Preset::Soe);
        assert_eq!(soe.iou_thresholds, vec![0.75, 0.8, 0.85, 0.9, 0.95]);
        assert_eq!(soe.ap_angle_thresholds, vec![10.0, 8.0, 6.0, 4.0, 2.0]);
        assert_eq!(soe.mr_angle_thresholds, vec![5.0, 4.0, 3.0, 2.0, 1.0]);
        let sof = EvalCriteria::preset(Preset::Sof);
        assert_eq!(sof.iou_thresholds, vec![0.7, 0.75, 0.8, 0.85, 0.9]);
        assert_eq!(sof.ap_angle_thresholds, vec![45.0, 35.0, 25.0, 15.0, 5.0]);
        assert_eq!(sof.default_iou, 0.7);
        assert_eq!("ROF".parse::<Preset>().unwrap(), Preset::Sof);
        assert!("coco".parse::<Preset>().is_err());

        let mut bad = EvalCriteria {
            iou_thresholds: vec![0.8, 0.7],
            ..EvalCriteria::default()
        };
        assert!(bad.validate().is_err());
        bad.iou_thresholds = vec![0.5, 1.0];
        assert!(bad.validate().is_err());
    }

    #[test]
    fn record_validation() {
        let x = e(0.0, 0.0, 2.0, 1.0, 0.0);
        assert!(DetectionRecord::new("a", x, 1.2).is_err());
        assert!(DetectionRecord::new("a", x, f64::NAN).is_err());
        assert!(GtRecord::new("a", x, None, 0.0).is_err());
        assert!(GtRecord::new("a", x, None, 1.0).is_ok());
    }
}
