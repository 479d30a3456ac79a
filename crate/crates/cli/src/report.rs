//! Plain-text rendering of reports and window tables.

use std::fmt::Write;

use covradar_core::engine::WindowRow;
use covradar_core::risk_model::GlyphEntry;
use covradar_core::Report;

fn glyph_row(out: &mut String, rank: &str, entry: &GlyphEntry) {
    let _ = writeln!(
        out,
        "{rank:>4}  {:<28} {:>12}  {:>10.4}",
        entry.city.as_str(),
        entry.window_total,
        entry.score.saturation
    );
}

pub fn render_report(r: &Report) -> String {
    let c = &r.curves;
    let w = c.window;
    let mut out = String::new();
    let _ = writeln!(out, "city: {}", c.city);
    let _ = writeln!(
        out,
        "window: {} .. {} ({} days), mode {}",
        w.a(),
        w.b(),
        w.len_days(),
        r.glyph.mode.as_str()
    );
    let _ = writeln!(out, "city window total: {}", c.city_window_total);
    let _ = writeln!(
        out,
        "neighborhood window total: {} ({} active neighbors)",
        c.neighborhood_window_total,
        c.neighbors.len()
    );
    let _ = writeln!(out, "city_dominates: {}", c.city_dominates);
    match &r.isolation {
        Some(iso) => {
            let _ = writeln!(
                out,
                "isolation: {} over {} days",
                iso.display, iso.sample_count
            );
        }
        None => {
            let _ = writeln!(out, "isolation: no data");
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:>4}  {:<28} {:>12}  {:>10}",
        "rank", "city", "window_total", "saturation"
    );
    glyph_row(&mut out, "*", &r.glyph.focus);
    for (i, seg) in r.glyph.segments.iter().enumerate() {
        glyph_row(&mut out, &(i + 1).to_string(), seg);
    }
    out
}

pub fn render_windows(rows: &[WindowRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10}  {:<10}  {:>6}  {:>6}  {:>9}  {:>10}  {:>6}  isolation",
        "a", "b", "city", "hood", "dominates", "saturation", "active"
    );
    for r in rows {
        let iso = r.isolation.as_ref().map_or("-", |i| i.display.as_str());
        let _ = writeln!(
            out,
            "{:<10}  {:<10}  {:>6}  {:>6}  {:>9}  {:>10.4}  {:>6}  {iso}",
            r.a.to_string(),
            r.b.to_string(),
            r.city_window_total,
            r.neighborhood_window_total,
            r.city_dominates,
            r.focus_saturation,
            r.active_neighbors
        );
    }
    out
}
