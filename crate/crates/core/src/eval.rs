//! Layout evaluation: IoU, mean IoU and recall at fixed thresholds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Layout;

/// Intersection over union of two `(x0, y0, x1, y1)` boxes. A box with
/// non-positive extent is degenerate and scores 0 against anything.
pub fn iou(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let area = |r: &[f64; 4]| (r[2] - r[0]).max(0.0) * (r[3] - r[1]).max(0.0);
    let area_a = area(a);
    let area_b = area(b);
    if area_a <= 0.0 || area_b <= 0.0 {
        return 0.0;
    }
    let ix = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let iy = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = ix * iy;
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Per-scene breakdown inside an [`EvalResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEval {
    pub ious: Vec<f64>,
    pub miou: f64,
}

/// Aggregate layout metrics. mIOU averages per object globally; recall at
/// threshold t counts objects with IoU strictly greater than t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub miou: f64,
    pub r03: f64,
    pub r05: f64,
    pub n_objects: usize,
    pub per_scene: Vec<SceneEval>,
}

/// Compare aligned prediction and ground-truth layout lists.
pub fn evaluate(pred: &[Layout], gt: &[Layout]) -> Result<EvalResult> {
    if pred.len() != gt.len() {
        return Err(Error::Shape(format!(
            "{} predicted scenes vs {} ground-truth scenes",
            pred.len(),
            gt.len()
        )));
    }
    let mut per_scene = Vec::with_capacity(pred.len());
    let mut sum = 0.0;
    let mut n = 0usize;
    let mut hits03 = 0usize;
    let mut hits05 = 0usize;
    for (scene, (p, g)) in pred.iter().zip(gt).enumerate() {
        if p.n_boxes() != g.n_boxes() {
            return Err(Error::Shape(format!(
                "scene {scene}: {} predicted boxes vs {} ground-truth boxes",
                p.n_boxes(),
                g.n_boxes()
            )));
        }
        let ious: Vec<f64> = p.boxes().iter().zip(g.boxes()).map(|(a, b)| iou(a, b)).collect();
        for &v in &ious {
            sum += v;
            n += 1;
            if v > 0.3 {
                hits03 += 1;
            }
            if v > 0.5 {
                hits05 += 1;
            }
        }
        let miou = if ious.is_empty() { 0.0 } else { ious.iter().sum::<f64>() / ious.len() as f64 };
        per_scene.push(SceneEval { ious, miou });
    }
    Ok(EvalResult {
        miou: if n == 0 { 0.0 } else { sum / n as f64 },
        r03: if n == 0 { 0.0 } else { hits03 as f64 / n as f64 },
        r05: if n == 0 { 0.0 } else { hits05 as f64 / n as f64 },
        n_objects: n,
        per_scene,
    })
}
