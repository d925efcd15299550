//! Dependency-free SVG summaries of a run.

use std::fmt::Write as _;

use crate::discriminator::FoldAccuracies;
use crate::network::{Partition, PracticeGraph};
use crate::rad::{RadModel, ThresholdSpec};

const W: f64 = 720.0;
const H: f64 = 420.0;
const MARGIN: f64 = 50.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn header(out: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        w / 2.0,
        escape(title)
    );
}

/// Observed per-fold maximum accuracies against the chance distribution
/// of the maximum, with the threshold marked.
///
/// Both series are normalized to their own peak so they share one axis.
pub fn accuracy_plot(accs: &[FoldAccuracies], model: &RadModel, thr: &ThresholdSpec) -> String {
    let n = model.n_test;
    let mut out = String::new();
    header(
        &mut out,
        W,
        H,
        &format!("Max validation accuracy vs. chance (n = {n}, k = {})", model.k_epochs),
    );
    let (x0, x1, y0, y1) = (MARGIN, W - MARGIN, H - MARGIN, MARGIN);
    let sx = |acc: f64| x0 + (acc - 0.5).clamp(0.0, 0.5) * 2.0 * (x1 - x0);
    let bin_w = (x1 - x0) / (n as f64 / 2.0 + 1.0);

    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    for t in 0..=5 {
        let acc = 0.5 + t as f64 * 0.1;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.0}%</text>"#,
            sx(acc),
            y0 + 16.0,
            acc * 100.0
        );
    }

    let peak = model.pmf_max.iter().cloned().fold(0.0, f64::max);
    if peak > 0.0 {
        let mut path = String::new();
        for (m, p) in model.pmf_max.iter().enumerate() {
            let acc = m as f64 / n as f64;
            if acc < 0.5 {
                continue;
            }
            let y = y0 - p / peak * (y0 - y1);
            let _ = write!(
                path,
                "{}{:.2},{:.2} ",
                if path.is_empty() { "M" } else { "L" },
                sx(acc),
                y
            );
        }
        let _ = writeln!(
            out,
            r#"<path d="{path}" fill="none" stroke="{}" stroke-width="2"/>"#,
            PALETTE[0]
        );
    }

    let mut hist = vec![0usize; n + 1];
    for a in accs {
        for v in &a.max_val_accuracies {
            hist[((v * n as f64).round() as usize).min(n)] += 1;
        }
    }
    let hpeak = hist.iter().copied().max().unwrap_or(0);
    if hpeak > 0 {
        for (m, c) in hist.iter().enumerate().filter(|(_, c)| **c > 0) {
            let acc = m as f64 / n as f64;
            let h = *c as f64 / hpeak as f64 * (y0 - y1);
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}" fill-opacity="0.5"/>"#,
                sx(acc) - bin_w / 2.0,
                y0 - h,
                bin_w,
                h,
                PALETTE[1]
            );
        }
    }

    let tx = sx(thr.threshold_accuracy);
    let _ = writeln!(
        out,
        r#"<line x1="{tx:.2}" y1="{y1}" x2="{tx:.2}" y2="{y0}" stroke="{}" stroke-dasharray="6 4"/>"#,
        PALETTE[3]
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.1}" fill="{}">threshold {:.2}%</text>"#,
        tx + 4.0,
        y1 + 12.0,
        PALETTE[3],
        thr.threshold_accuracy * 100.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{x1}" y="{:.1}" text-anchor="end" fill="{}">chance max-of-k pmf</text>"#,
        y1 + 28.0,
        PALETTE[0]
    );
    let _ = writeln!(
        out,
        r#"<text x="{x1}" y="{:.1}" text-anchor="end" fill="{}">observed fold maxima ({} pairs)</text>"#,
        y1 + 44.0,
        PALETTE[1],
        accs.len()
    );
    out.push_str("</svg>\n");
    out
}

/// Nodes on a circle, ordered by community, colored by community, with
/// edge opacity following uniqueness.
pub fn network_plot(g: &PracticeGraph, p: &Partition) -> String {
    let size = 640.0;
    let mut out = String::new();
    let q = p.modularity_q.map_or("undefined".to_string(), |q| format!("{q:.3}"));
    header(
        &mut out,
        size,
        size,
        &format!("{} communities, Q = {q}", p.n_communities()),
    );
    let mut order: Vec<usize> = (0..g.n_nodes()).collect();
    order.sort_by(|&a, &b| (p.community[a], &g.nodes[a]).cmp(&(p.community[b], &g.nodes[b])));
    let (cx, cy, r) = (size / 2.0, size / 2.0 + 10.0, size / 2.0 - 90.0);
    let mut pos = vec![(0.0, 0.0); g.n_nodes()];
    for (slot, &v) in order.iter().enumerate() {
        let t = std::f64::consts::TAU * slot as f64 / g.n_nodes().max(1) as f64;
        pos[v] = (cx + r * t.cos(), cy + r * t.sin());
    }
    for e in &g.edges {
        let ((xa, ya), (xb, yb)) = (pos[e.a], pos[e.b]);
        let _ = writeln!(
            out,
            r##"<line x1="{xa:.2}" y1="{ya:.2}" x2="{xb:.2}" y2="{yb:.2}" stroke="#444" stroke-opacity="{:.3}"/>"##,
            0.2 + 0.8 * e.uniqueness.clamp(0.0, 1.0)
        );
    }
    for (v, &(x, y)) in pos.iter().enumerate() {
        let color = PALETTE[p.community[v] % PALETTE.len()];
        let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="7" fill="{color}"/>"#);
        let (lx, ly) = (cx + (x - cx) * 1.12, cy + (y - cy) * 1.12);
        let anchor = if lx >= cx { "start" } else { "end" };
        let _ = writeln!(
            out,
            r#"<text x="{lx:.2}" y="{:.2}" text-anchor="{anchor}" font-size="10">{}</text>"#,
            ly + 3.0,
            escape(&g.nodes[v])
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rad::{max_pmf, threshold_from_model, DEFAULT_BOOTSTRAP_OFFSET, DEFAULT_P_REF};

    #[test]
    fn accuracy_plot_is_well_formed() {
        let model = max_pmf(40, 5).unwrap();
        let thr = threshold_from_model(&model, DEFAULT_P_REF, DEFAULT_BOOTSTRAP_OFFSET).unwrap();
        let acc = FoldAccuracies {
            pair_id: "a__b".into(),
            region_a: "a".into(),
            region_b: "b".into(),
            sample_size: 60,
            n_test: 40,
            folds: 3,
            max_val_accuracies: vec![0.55, 0.6, 1.0],
            producer: "test".into(),
        };
        let svg = accuracy_plot(&[acc], &model, &thr);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<rect").count(), 1 + 3);
        assert!(svg.contains("threshold"));
    }

    #[test]
    fn network_plot_draws_every_node_and_edge() {
        let g = PracticeGraph::from_edges(&["a", "b", "c<d"], &[("a", "b")]).unwrap();
        let p = Partition {
            community: vec![0, 0, 1],
            modularity_q: None,
            resolution: 1.0,
        };
        let svg = network_plot(&g, &p);
        assert_eq!(svg.matches("<circle").count(), 3);
        assert_eq!(svg.matches("<line").count(), 1);
        assert!(svg.contains("c&lt;d") && svg.contains("Q = undefined"));
    }
}
