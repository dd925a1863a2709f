//! Matrix and figure export: the Granger-causality adjacency as CSV plus a
//! static SVG heatmap, and the exogenous intensity as CSV plus a bar chart.
//!
//! The SVG output is dependency-free and deterministic: a linear color
//! scale from white to a dark blue, with the minimum and maximum annotated.

use std::path::Path;

use crate::error::Result;
use crate::model::HawkesModel;

/// Render the C×C infectivity matrix as CSV with type-name headers.
/// Rows are influenced (target) types, columns are source types.
pub fn causality_csv_string(matrix: &[f64], type_names: &[String]) -> String {
    let c = type_names.len();
    debug_assert_eq!(matrix.len(), c * c);
    let mut out = String::from("type");
    for name in type_names {
        out.push(',');
        out.push_str(&csv_escape(name));
    }
    out.push('\n');
    for (i, name) in type_names.iter().enumerate() {
        out.push_str(&csv_escape(name));
        for j in 0..c {
            out.push(',');
            out.push_str(&format_float(matrix[i * c + j]));
        }
        out.push('\n');
    }
    out
}

/// Render the exogenous intensity vector as CSV.
pub fn exogenous_csv_string(mu: &[f64], type_names: &[String]) -> String {
    let mut out = String::from("type,mu\n");
    for (name, &v) in type_names.iter().zip(mu) {
        out.push_str(&format!("{},{}\n", csv_escape(name), format_float(v)));
    }
    out
}

fn csv_escape(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn format_float(v: f64) -> String {
    // shortest representation that round-trips
    let mut buf = ryu_like(v);
    if buf.is_empty() {
        buf = v.to_string();
    }
    buf
}

fn ryu_like(v: f64) -> String {
    // `to_string` on f64 already prints the shortest round-trip decimal
    v.to_string()
}

fn lerp_color(t: f64) -> String {
    // white → dark blue
    let t = t.clamp(0.0, 1.0);
    let from = (255.0, 255.0, 255.0);
    let to = (8.0, 48.0, 107.0);
    let r = (from.0 + (to.0 - from.0) * t) as u8;
    let g = (from.1 + (to.1 - from.1) * t) as u8;
    let b = (from.2 + (to.2 - from.2) * t) as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Static heatmap of a C×C matrix with a linear white→blue color scale.
pub fn heatmap_svg_string(matrix: &[f64], type_names: &[String], title: &str) -> String {
    let c = type_names.len();
    let cell = 36;
    let margin = 110;
    let width = margin + c * cell + 40;
    let height = margin + c * cell + 60;
    let lo = matrix.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = matrix.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        width / 2,
        xml_escape(title)
    ));
    for (i, _) in type_names.iter().enumerate() {
        for j in 0..c {
            let v = matrix[i * c + j];
            let t = (v - lo) / span;
            svg.push_str(&format!(
                "  <rect x=\"{}\" y=\"{}\" width=\"{cell}\" height=\"{cell}\" fill=\"{}\" \
                 stroke=\"#cccccc\"><title>{} ← {}: {}</title></rect>\n",
                margin + j * cell,
                margin + i * cell,
                lerp_color(t),
                xml_escape(&type_names[i]),
                xml_escape(&type_names[j]),
                format_float(v),
            ));
        }
    }
    for (i, name) in type_names.iter().enumerate() {
        // row labels (targets) on the left, column labels (sources) on top
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            margin - 6,
            margin + i * cell + cell / 2 + 4,
            xml_escape(name)
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"start\" transform=\"rotate(-60 {} {})\">{}</text>\n",
            margin + i * cell + cell / 2,
            margin - 8,
            margin + i * cell + cell / 2,
            margin - 8,
            xml_escape(name)
        ));
    }
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\">min = {}, max = {}</text>\n",
        margin,
        margin + c * cell + 30,
        format_float(lo),
        format_float(hi)
    ));
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\" transform=\"rotate(-90 20 {})\" x=\"20\" y=\"{}\">influenced type</text>\n",
        20,
        margin + (c * cell) / 2,
        margin + (c * cell) / 2,
        margin + (c * cell) / 2,
    ));
    svg.push_str("</svg>\n");
    svg
}

/// Static bar chart of the exogenous intensity vector.
pub fn bars_svg_string(mu: &[f64], type_names: &[String], title: &str) -> String {
    let c = mu.len();
    let bar_w = 42;
    let chart_h = 220.0;
    let margin = 60;
    let width = margin + c * bar_w + 40;
    let height = margin + chart_h as usize + 70;
    let hi = mu.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(0.0);
    let scale = if hi > 0.0 { chart_h / hi } else { 0.0 };

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        width / 2,
        xml_escape(title)
    ));
    let base_y = margin as f64 + chart_h;
    for (i, (&v, name)) in mu.iter().zip(type_names).enumerate() {
        let h = (v.max(0.0) * scale).max(0.0);
        let x = margin + i * bar_w;
        svg.push_str(&format!(
            "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#4292c6\" stroke=\"#08306b\">\
             <title>{}: {}</title></rect>\n",
            x + 4,
            base_y - h,
            bar_w - 8,
            h,
            xml_escape(name),
            format_float(v),
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            x + bar_w / 2,
            base_y + 16.0,
            xml_escape(name)
        ));
    }
    svg.push_str(&format!(
        "  <line x1=\"{margin}\" y1=\"{base_y}\" x2=\"{}\" y2=\"{base_y}\" stroke=\"#333333\"/>\n",
        margin + c * bar_w
    ));
    svg.push_str(&format!(
        "  <text x=\"{margin}\" y=\"{}\">max = {}</text>\n",
        base_y + 40.0,
        format_float(hi)
    ));
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Write the infectivity matrix as CSV and SVG heatmap.
pub fn export_causality(
    model: &HawkesModel,
    type_names: &[String],
    csv_path: impl AsRef<Path>,
    svg_path: impl AsRef<Path>,
) -> Result<()> {
    let matrix = model.infectivity_matrix();
    std::fs::write(csv_path, causality_csv_string(&matrix, type_names))?;
    std::fs::write(
        svg_path,
        heatmap_svg_string(&matrix, type_names, "Granger causality (infectivity)"),
    )?;
    Ok(())
}

/// Write the exogenous intensity as CSV and SVG bar chart.
pub fn export_exogenous(
    model: &HawkesModel,
    type_names: &[String],
    csv_path: impl AsRef<Path>,
    svg_path: impl AsRef<Path>,
) -> Result<()> {
    let mu = model.exo_vector_default()?;
    std::fs::write(csv_path, exogenous_csv_string(&mu, type_names))?;
    std::fs::write(
        svg_path,
        bars_svg_string(&mu, type_names, "Exogenous intensity"),
    )?;
    Ok(())
}
