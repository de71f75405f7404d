//! Deterministic SVG rasterization of layouts.

use crate::error::Result;
use crate::graph::{Layout, SceneGraph};
use crate::vocab::RelationVocab;

const CANVAS: f64 = 512.0;

/// Deterministic per-category fill colors.
const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac",
];

pub fn category_color(category: usize) -> &'static str {
    PALETTE[category % PALETTE.len()]
}

/// Render one scene as a standalone SVG document: one rectangle per box
/// with a category/attribute label, colors keyed by category id.
pub fn rasterize(layout: &Layout, graph: &SceneGraph, vocab: &RelationVocab) -> Result<String> {
    layout.check_matches(graph.n_nodes())?;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{c}\" height=\"{c}\" \
         viewBox=\"0 0 {c} {c}\">\n",
        c = CANVAS
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{c}\" height=\"{c}\" fill=\"#ffffff\" \
         stroke=\"#000000\"/>\n",
        c = CANVAS
    ));
    for (obj, b) in graph.objects().iter().zip(layout.boxes()) {
        let name = vocab.category_name(obj.category)?;
        let (x, y) = (b[0] * CANVAS, b[1] * CANVAS);
        let (w, h) = ((b[2] - b[0]).max(0.0) * CANVAS, (b[3] - b[1]).max(0.0) * CANVAS);
        let color = category_color(obj.category);
        svg.push_str(&format!(
            "  <rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" \
             fill=\"{color}\" fill-opacity=\"0.45\" stroke=\"{color}\" stroke-width=\"2\"/>\n"
        ));
        let mut label = name.to_string();
        for (k, v) in &obj.attributes {
            label.push_str(&format!(" {k}={v}"));
        }
        svg.push_str(&format!(
            "  <text x=\"{tx:.2}\" y=\"{ty:.2}\" font-family=\"monospace\" font-size=\"12\" \
             fill=\"#000000\">{label}</text>\n",
            tx = x + 2.0,
            ty = y + 13.0,
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
