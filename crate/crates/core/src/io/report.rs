//! CSV tables and SVG 1.1 plots for every stage's results.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::evaluation::{evaluate_predictions, EvalReport};
use crate::features::DescriptorId;
use crate::fusion::FusionTrace;
use crate::handswitch::{BinaryCounts, DetectionEvaluation, NeuronStats};
use crate::manifold::SomGrid;
use crate::selection::SweepCurve;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 50.0;

fn header_comment(seed: u64) -> String {
    format!("# seed={seed}\n")
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<PathBuf> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn svg_open(w: f64, h: f64, title: &str) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        w / 2.0,
        escape(title)
    )
}

/// Color for position `t` in [0, 1] along a blue-to-red ramp; the red
/// channel increases and the blue channel decreases monotonically.
pub fn ramp_color(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    [
        (40.0 + 215.0 * t).round() as u8,
        (60.0 + 80.0 * (1.0 - (2.0 * t - 1.0).abs())).round() as u8,
        (255.0 - 215.0 * t).round() as u8,
    ]
}

fn hex_color(c: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Axes {
    fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it
                .filter(|v| v.is_finite())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if lo == hi {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        let (x0, x1) = span(&mut xs.clone());
        let (y0, y1) = span(&mut ys.clone());
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * MARGIN)
    }

    fn frame(&self, out: &mut String, xlabel: &str, ylabel: &str) {
        let _ = write!(
            out,
            "<g stroke=\"black\" fill=\"none\"><line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\"/><line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{b}\"/></g>\n\
             <g font-family=\"sans-serif\" font-size=\"11\">\
             <text x=\"{m}\" y=\"{lb}\">{x0:.3}</text><text x=\"{r}\" y=\"{lb}\" text-anchor=\"end\">{x1:.3}</text>\
             <text x=\"{lm}\" y=\"{b}\" text-anchor=\"end\">{y0:.3}</text><text x=\"{lm}\" y=\"{m}\" text-anchor=\"end\">{y1:.3}</text>\
             <text x=\"{cx}\" y=\"{xl}\" text-anchor=\"middle\">{xlabel}</text>\
             <text x=\"14\" y=\"{cy}\" transform=\"rotate(-90 14 {cy})\" text-anchor=\"middle\">{ylabel}</text></g>\n",
            m = MARGIN,
            b = H - MARGIN,
            r = W - MARGIN,
            lb = H - MARGIN + 14.0,
            lm = MARGIN - 4.0,
            x0 = self.x0,
            x1 = self.x1,
            y0 = self.y0,
            y1 = self.y1,
            cx = W / 2.0,
            xl = H - 10.0,
            cy = H / 2.0,
            xlabel = escape(xlabel),
            ylabel = escape(ylabel),
        );
    }

    fn polyline(&self, out: &mut String, pts: &[(f64, f64)], color: &str) {
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect();
        let _ = writeln!(
            out,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>",
            coords.join(" ")
        );
        for &(x, y) in pts {
            let _ = writeln!(
                out,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>",
                self.px(x),
                self.py(y)
            );
        }
    }
}

fn legend(out: &mut String, names: &[String], x: f64, y: f64) {
    for (i, n) in names.iter().enumerate() {
        let yy = y + 16.0 * i as f64;
        let _ = writeln!(
            out,
            "<rect x=\"{x}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/><text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            yy - 9.0,
            PALETTE[i % PALETTE.len()],
            x + 14.0,
            yy,
            escape(n)
        );
    }
}

// ---- sweeps ----

/// Two columns: swept parameter and score. Flagged (disconnected) points are
/// listed in comments.
pub fn curve_csv(curve: &SweepCurve, seed: u64) -> String {
    let mut out = header_comment(seed);
    for (p, f) in curve.parameter_values.iter().zip(&curve.flagged) {
        if *f {
            let _ = writeln!(out, "# flagged: {p} (disconnected k-NN graph)");
        }
    }
    let param = if curve.metric.lower_is_better() {
        "k_neighbors"
    } else {
        "som_size"
    };
    let _ = writeln!(out, "{param},{}", curve.metric.as_str());
    for (p, s) in curve.parameter_values.iter().zip(&curve.scores) {
        let _ = writeln!(out, "{p},{s}");
    }
    out
}

pub fn curve_svg(curve: &SweepCurve, title: &str) -> String {
    let pts: Vec<(f64, f64)> = curve
        .parameter_values
        .iter()
        .zip(&curve.scores)
        .map(|(&p, &s)| (p as f64, s))
        .collect();
    let axes = Axes::fit(pts.iter().map(|p| p.0), pts.iter().map(|p| p.1));
    let mut out = svg_open(W, H, title);
    let xlabel = if curve.metric.lower_is_better() {
        "k neighbors"
    } else {
        "SOM side"
    };
    axes.frame(&mut out, xlabel, curve.metric.as_str());
    axes.polyline(&mut out, &pts, PALETTE[0]);
    for (i, f) in curve.flagged.iter().enumerate() {
        if *f {
            let _ = writeln!(
                out,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"6\" fill=\"none\" stroke=\"red\"/>",
                axes.px(pts[i].0),
                axes.py(pts[i].1)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

// ---- classification ----

/// Accuracy row, then the confusion block in row percentages.
pub fn eval_csv(report: &EvalReport, seed: u64) -> String {
    let mut out = header_comment(seed);
    let _ = writeln!(out, "accuracy,{}", report.accuracy);
    let _ = writeln!(out, "true\\predicted,{},support", report.classes.join(","));
    for (i, c) in report.classes.iter().enumerate() {
        let row: Vec<String> = report.confusion[i].iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{c},{},{}", row.join(","), report.support[i]);
    }
    out
}

/// Writes the evaluation CSV; an empty test split writes nothing and warns.
pub fn emit_eval(
    path: impl AsRef<Path>,
    truth: &[String],
    predicted: &[String],
    seed: u64,
) -> Result<Option<EvalReport>> {
    if truth.is_empty() {
        log::warn!("empty test split; no report written to {}", path.as_ref().display());
        return Ok(None);
    }
    let report = evaluate_predictions(truth, predicted)?;
    write_text(path, &eval_csv(&report, seed))?;
    Ok(Some(report))
}

/// 2-D embedding scatter, colored by label.
pub fn embedding_svg(points: &[Vec<f64>], labels: &[String], title: &str) -> String {
    let classes: Vec<String> = labels
        .iter()
        .cloned()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let axes = Axes::fit(
        points.iter().map(|p| p.first().copied().unwrap_or(0.0)),
        points.iter().map(|p| p.get(1).copied().unwrap_or(0.0)),
    );
    let mut out = svg_open(W, H, title);
    axes.frame(&mut out, "dim 1", "dim 2");
    for (p, l) in points.iter().zip(labels) {
        let c = classes.binary_search(l).unwrap_or(0);
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{}\" fill-opacity=\"0.8\"/>",
            axes.px(p.first().copied().unwrap_or(0.0)),
            axes.py(p.get(1).copied().unwrap_or(0.0)),
            PALETTE[c % PALETTE.len()]
        );
    }
    legend(&mut out, &classes, W - MARGIN - 60.0, MARGIN);
    out.push_str("</svg>\n");
    out
}

fn cell_size(grid: &SomGrid) -> f64 {
    ((W - 2.0 * MARGIN) / grid.grid_w as f64).min((H - 2.0 * MARGIN) / grid.grid_h as f64)
}

/// SOM grid with each neuron colored by its majority training label and
/// sized by hit count.
pub fn som_hitmap_svg(grid: &SomGrid, majority: &[Option<String>], hits: &[usize], title: &str) -> String {
    let classes: Vec<String> = majority
        .iter()
        .flatten()
        .cloned()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let cs = cell_size(grid);
    let max_hits = hits.iter().copied().max().unwrap_or(0).max(1) as f64;
    let mut out = svg_open(W, H, title);
    for n in 0..grid.neurons() {
        let (x, y) = grid.coords(n);
        let (px, py) = (MARGIN + x as f64 * cs, MARGIN + y as f64 * cs);
        let _ = writeln!(
            out,
            "<rect x=\"{px:.2}\" y=\"{py:.2}\" width=\"{cs:.2}\" height=\"{cs:.2}\" fill=\"none\" stroke=\"#ccc\"/>"
        );
        if let Some(l) = &majority[n] {
            let c = classes.binary_search(l).unwrap_or(0);
            let r = 0.5 * cs * (hits[n] as f64 / max_hits).sqrt();
            let _ = writeln!(
                out,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{r:.2}\" fill=\"{}\"/>",
                px + cs / 2.0,
                py + cs / 2.0,
                PALETTE[c % PALETTE.len()]
            );
        }
    }
    legend(&mut out, &classes, W - MARGIN + 4.0, MARGIN);
    out.push_str("</svg>\n");
    out
}

/// BMU path of a frame sequence over the SOM grid; segment color runs from
/// blue (first frame) to red (last frame).
pub fn trajectory_svg(grid: &SomGrid, bmus: &[usize], title: &str) -> String {
    let cs = cell_size(grid);
    let center = |n: usize| {
        let (x, y) = grid.coords(n);
        (MARGIN + (x as f64 + 0.5) * cs, MARGIN + (y as f64 + 0.5) * cs)
    };
    let mut out = svg_open(W, H, title);
    for n in 0..grid.neurons() {
        let (x, y) = grid.coords(n);
        let _ = writeln!(
            out,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{cs:.2}\" height=\"{cs:.2}\" fill=\"none\" stroke=\"#ddd\"/>",
            MARGIN + x as f64 * cs,
            MARGIN + y as f64 * cs
        );
    }
    let last = bmus.len().saturating_sub(1).max(1) as f64;
    for (i, w) in bmus.windows(2).enumerate() {
        let ((x1, y1), (x2, y2)) = (center(w[0]), center(w[1]));
        let _ = writeln!(
            out,
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"{}\" stroke-width=\"2\"/>",
            hex_color(ramp_color(i as f64 / last))
        );
    }
    for (i, &b) in bmus.iter().enumerate() {
        let (x, y) = center(b);
        let _ = writeln!(
            out,
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\" fill=\"{}\"/>",
            hex_color(ramp_color(i as f64 / last))
        );
    }
    out.push_str("</svg>\n");
    out
}

// ---- fusion ----

fn trace_families(trace: &FusionTrace) -> Vec<DescriptorId> {
    let mut f: Vec<DescriptorId> = trace
        .steps
        .iter()
        .flat_map(|s| s.family_counts.keys().copied())
        .collect();
    f.sort();
    f.dedup();
    f
}

fn trace_evaluators(trace: &FusionTrace) -> Vec<String> {
    let mut e: Vec<String> = trace
        .steps
        .iter()
        .flat_map(|s| s.evaluator_scores.keys().cloned())
        .collect();
    e.sort();
    e.dedup();
    e
}

/// One row per step: dims used, each evaluator's accuracy, each family's count.
pub fn trace_csv(trace: &FusionTrace, seed: u64) -> String {
    let families = trace_families(trace);
    let evaluators = trace_evaluators(trace);
    let mut out = header_comment(seed);
    let mut cols = vec!["dims_used".to_string()];
    cols.extend(evaluators.iter().cloned());
    cols.extend(families.iter().map(|f| format!("n_{}", f.as_str())));
    let _ = writeln!(out, "{}", cols.join(","));
    for s in &trace.steps {
        let mut row = vec![s.dims_used.to_string()];
        row.extend(
            evaluators
                .iter()
                .map(|e| s.evaluator_scores.get(e).map(|v| v.to_string()).unwrap_or_default()),
        );
        row.extend(
            families
                .iter()
                .map(|f| s.family_counts.get(f).copied().unwrap_or(0).to_string()),
        );
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// Accuracy lines over the top panel and a per-family composition heat strip
/// below, sharing the dims-used axis.
pub fn trace_svg(trace: &FusionTrace, title: &str) -> String {
    let families = trace_families(trace);
    let evaluators = trace_evaluators(trace);
    let strip_h = 18.0;
    let total_h = H + strip_h * families.len() as f64 + 20.0;
    let axes = Axes::fit(
        trace.steps.iter().map(|s| s.dims_used as f64),
        trace.steps.iter().flat_map(|s| s.evaluator_scores.values().copied()),
    );
    let mut out = svg_open(W, total_h, title);
    axes.frame(&mut out, "dimensions used", "accuracy");
    for (i, e) in evaluators.iter().enumerate() {
        let pts: Vec<(f64, f64)> = trace
            .steps
            .iter()
            .filter_map(|s| s.evaluator_scores.get(e).map(|v| (s.dims_used as f64, *v)))
            .collect();
        axes.polyline(&mut out, &pts, PALETTE[i % PALETTE.len()]);
    }
    legend(&mut out, &evaluators, W - MARGIN - 80.0, MARGIN + 10.0);
    let n = trace.steps.len().max(1);
    let cell_w = (W - 2.0 * MARGIN) / n as f64;
    for (fi, f) in families.iter().enumerate() {
        let y = H + fi as f64 * strip_h;
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{}</text>",
            MARGIN - 4.0,
            y + 12.0,
            f.as_str()
        );
        for (si, s) in trace.steps.iter().enumerate() {
            let share = s.family_counts.get(f).copied().unwrap_or(0) as f64 / s.dims_used.max(1) as f64;
            let _ = writeln!(
                out,
                "<rect x=\"{:.2}\" y=\"{y:.2}\" width=\"{cell_w:.2}\" height=\"{strip_h}\" fill=\"{}\"/>",
                MARGIN + si as f64 * cell_w,
                hex_color(ramp_color(share))
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

// ---- hand detection ----

fn rates(c: &BinaryCounts) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        c.tp,
        c.fp,
        c.tn,
        c.fn_,
        c.tpr(),
        c.tnr(),
        c.f1()
    )
}

/// Per-location and total TPR/TNR/F1 for the baseline and the multimodel detector.
pub fn detection_csv(eval: &DetectionEvaluation, seed: u64) -> String {
    let mut out = header_comment(seed);
    let cols = |p: &str| {
        ["tp", "fp", "tn", "fn", "tpr", "tnr", "f1"]
            .map(|c| format!("{p}_{c}"))
            .join(",")
    };
    let _ = writeln!(out, "location,{},{}", cols("baseline"), cols("multimodel"));
    for (loc, row) in &eval.per_location {
        let _ = writeln!(out, "{loc},{},{}", rates(&row.baseline), rates(&row.multimodel));
    }
    let _ = writeln!(
        out,
        "TOTAL,{},{}",
        rates(&eval.total.baseline),
        rates(&eval.total.multimodel)
    );
    out
}

pub fn neuron_csv(stats: &[NeuronStats], seed: u64) -> String {
    let mut out = header_comment(seed);
    out.push_str("neuron,activations,local_uses,global_uses,f1,degraded,train_count,local_f1\n");
    for s in stats {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            s.neuron, s.activations, s.local_uses, s.global_uses, s.f1, s.degraded, s.train_count, s.local_f1
        );
    }
    out
}

/// Grid heat map of one value per neuron; `None` cells are hatched gray.
pub fn neuron_grid_svg(grid: &SomGrid, values: &[Option<f64>], title: &str) -> String {
    let lo = values.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let cs = cell_size(grid);
    let mut out = svg_open(W, H, title);
    for (n, value) in values.iter().enumerate().take(grid.neurons()) {
        let (x, y) = grid.coords(n);
        let fill = match *value {
            Some(v) => hex_color(ramp_color((v - lo) / span)),
            None => "#bbbbbb".to_string(),
        };
        let _ = writeln!(
            out,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{cs:.2}\" height=\"{cs:.2}\" fill=\"{fill}\" stroke=\"white\"/>",
            MARGIN + x as f64 * cs,
            MARGIN + y as f64 * cs
        );
    }
    if lo.is_finite() {
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">min {lo:.3} (blue), max {hi:.3} (red)</text>",
            MARGIN,
            H - 15.0
        );
    }
    out.push_str("</svg>\n");
    out
}

/// The three per-neuron panels: activations, share of local decisions and F1.
pub fn neuron_panels(grid: &SomGrid, stats: &[NeuronStats]) -> BTreeMap<&'static str, String> {
    let activations: Vec<Option<f64>> = stats.iter().map(|s| Some(s.activations as f64)).collect();
    let local_share: Vec<Option<f64>> = stats
        .iter()
        .map(|s| (s.activations > 0).then(|| s.local_uses as f64 / s.activations as f64))
        .collect();
    let f1: Vec<Option<f64>> = stats.iter().map(|s| (s.activations > 0).then_some(s.f1)).collect();
    BTreeMap::from([
        (
            "activations",
            neuron_grid_svg(grid, &activations, "test activations per neuron"),
        ),
        (
            "local_share",
            neuron_grid_svg(grid, &local_share, "share of local-model decisions"),
        ),
        ("f1", neuron_grid_svg(grid, &f1, "F1 per neuron")),
    ])
}
