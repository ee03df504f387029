//! Standalone SVG scatter plots of labeled 2-D embeddings.

use ndarray::ArrayView2;

use crate::{Error, Result};

/// Fixed palette covering the 11 Spheres classes; labels beyond that wrap.
pub const PALETTE: [&str; 11] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#aec7e8",
];

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 800.0;
const MARGIN: f64 = 40.0;

/// Renders one circle per point, colored by label class, equal-aspect axes,
/// no external resources.
pub fn render_svg(positions: ArrayView2<f64>, labels: &[u32]) -> Result<String> {
    if positions.ncols() != 2 {
        return Err(Error::InvalidParameter(format!(
            "plot requires 2-D positions, got {} columns",
            positions.ncols()
        )));
    }
    if labels.len() != positions.nrows() {
        return Err(Error::InvalidParameter(format!(
            "label count {} does not match point count {}",
            labels.len(),
            positions.nrows()
        )));
    }

    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for row in positions.rows() {
        min_x = min_x.min(row[0]);
        max_x = max_x.max(row[0]);
        min_y = min_y.min(row[1]);
        max_y = max_y.max(row[1]);
    }
    let span_x = (max_x - min_x).max(1e-12);
    let span_y = (max_y - min_y).max(1e-12);
    // Equal aspect: one scale for both axes, centered.
    let scale = ((WIDTH - 2.0 * MARGIN) / span_x).min((HEIGHT - 2.0 * MARGIN) / span_y);
    let offset_x = (WIDTH - scale * span_x) / 2.0;
    let offset_y = (HEIGHT - scale * span_y) / 2.0;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for (row, &label) in positions.rows().into_iter().zip(labels.iter()) {
        let cx = offset_x + scale * (row[0] - min_x);
        // SVG y axis points down.
        let cy = HEIGHT - offset_y - scale * (row[1] - min_y);
        let color = PALETTE[label as usize % PALETTE.len()];
        svg.push_str(&format!(
            "<circle cx=\"{cx:.3}\" cy=\"{cy:.3}\" r=\"2\" fill=\"{color}\" fill-opacity=\"0.7\"/>\n"
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
