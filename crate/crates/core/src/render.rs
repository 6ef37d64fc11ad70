//! Static SVG charts for experiment records. Output depends only on the
//! input values, so identical records give byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiments::{cell_means, BoundaryFit, ExperimentRecord};
use crate::stats::quantile_sorted;

const MARGIN_LEFT: f64 = 70.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;
const PLOT_W: f64 = 560.0;
const PLOT_H: f64 = 420.0;
const LEGEND_W: f64 = 90.0;

/// Viridis anchor colors, evenly spaced on [0, 1].
const RAMP: [(u8, u8, u8); 5] = [(68, 1, 84), (59, 82, 139), (33, 145, 140), (94, 201, 98), (253, 231, 37)];

fn color(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let pos = t * (RAMP.len() - 1) as f64;
    let i = (pos.floor() as usize).min(RAMP.len() - 2);
    let f = pos - i as f64;
    let lerp = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * f).round() as u8;
    let (a, b) = (RAMP[i], RAMP[i + 1]);
    format!("#{:02x}{:02x}{:02x}", lerp(a.0, b.0), lerp(a.1, b.1), lerp(a.2, b.2))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{:.1}" y="24" font-size="15">{}</text>"#, MARGIN_LEFT, escape(title));
}

/// Cell means of `metric` on the `(n, p)` grid, n along x and p along y
/// (increasing upward), with an optional fitted boundary line.
pub fn heatmap_svg(records: &[ExperimentRecord], metric: &str, boundary: Option<&BoundaryFit>) -> Result<String> {
    let cells = cell_means(records, metric);
    if cells.is_empty() {
        return Err(Error::NoData(format!("no per-replicate rows for metric `{metric}`")));
    }
    let mut ns: Vec<usize> = cells.iter().map(|c| c.0).collect();
    let mut ps: Vec<usize> = cells.iter().map(|c| c.1).collect();
    ns.dedup();
    ps.sort_unstable();
    ps.dedup();
    let finite: Vec<f64> = cells.iter().map(|c| c.2).filter(|v| v.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };

    let cw = PLOT_W / ns.len() as f64;
    let ch = PLOT_H / ps.len() as f64;
    let col = |n: usize| ns.binary_search(&n).unwrap_or(0);
    let row = |p: usize| ps.binary_search(&p).unwrap_or(0);
    let x_of = |i: usize| MARGIN_LEFT + i as f64 * cw;
    let y_of = |j: usize| MARGIN_TOP + PLOT_H - (j + 1) as f64 * ch;

    let width = MARGIN_LEFT + PLOT_W + LEGEND_W;
    let height = MARGIN_TOP + PLOT_H + MARGIN_BOTTOM;
    let mut out = String::new();
    header(&mut out, width, height, &format!("mean {metric}"));
    out.push_str("<g class=\"cells\">\n");
    for &(n, p, v) in &cells {
        let _ = writeln!(
            out,
            r#"<rect class="cell" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}" data-n="{n}" data-p="{p}" data-value="{v:.6}"/>"#,
            x_of(col(n)),
            y_of(row(p)),
            cw,
            ch,
            color((v - lo) / span)
        );
    }
    out.push_str("</g>\n");

    for (i, n) in ns.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{n}</text>"#,
            x_of(i) + cw / 2.0,
            MARGIN_TOP + PLOT_H + 16.0
        );
    }
    for (j, p) in ps.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{p}</text>"#,
            MARGIN_LEFT - 6.0,
            y_of(j) + ch / 2.0 + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">sample size n</text>"#,
        MARGIN_LEFT + PLOT_W / 2.0,
        MARGIN_TOP + PLOT_H + 40.0
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">landmarks p</text>"#,
        MARGIN_TOP + PLOT_H / 2.0,
        MARGIN_TOP + PLOT_H / 2.0
    );

    let lx = MARGIN_LEFT + PLOT_W + 20.0;
    let steps = 20;
    for s in 0..steps {
        let t = s as f64 / (steps - 1) as f64;
        let h = PLOT_H / steps as f64;
        let _ = writeln!(
            out,
            r#"<rect class="legend" x="{lx:.2}" y="{:.2}" width="16" height="{:.2}" fill="{}"/>"#,
            MARGIN_TOP + PLOT_H - (s + 1) as f64 * h,
            h,
            color(t)
        );
    }
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{hi:.3}</text>"#, lx + 20.0, MARGIN_TOP + 10.0);
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{lo:.3}</text>"#, lx + 20.0, MARGIN_TOP + PLOT_H);

    if let Some(fit) = boundary {
        // linear axis through the first and last cell centers
        let scale = |v: f64, axis: &[usize], origin: f64, step: f64| -> f64 {
            if axis.len() < 2 {
                return origin;
            }
            let (a, b) = (axis[0] as f64, axis[axis.len() - 1] as f64);
            origin + (v - a) / (b - a) * step * (axis.len() - 1) as f64
        };
        let x_at = |n: f64| scale(n, &ns, MARGIN_LEFT + cw / 2.0, cw);
        let y_at = |p: f64| MARGIN_TOP + PLOT_H - scale(p, &ps, ch / 2.0, ch);
        let (n0, n1) = (ns[0] as f64, ns[ns.len() - 1] as f64);
        let _ = writeln!(
            out,
            r#"<clipPath id="plot"><rect x="{MARGIN_LEFT:.2}" y="{MARGIN_TOP:.2}" width="{PLOT_W:.2}" height="{PLOT_H:.2}"/></clipPath>"#
        );
        let _ = writeln!(
            out,
            r#"<line class="boundary" clip-path="url(#plot)" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="white" stroke-width="2" stroke-dasharray="6 4" data-slope="{:.4}" data-intercept="{:.4}"/>"#,
            x_at(n0),
            y_at(fit.slope * n0 + fit.intercept),
            x_at(n1),
            y_at(fit.slope * n1 + fit.intercept),
            fit.slope,
            fit.intercept
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn render_heatmap(records: &[ExperimentRecord], metric: &str, boundary: Option<&BoundaryFit>, out_path: &Path) -> Result<()> {
    fs::write(out_path, heatmap_svg(records, metric, boundary)?)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxStats {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Most extreme observations within 1.5 IQR of the box.
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub min: f64,
    pub max: f64,
}

pub fn box_stats(values: &[f64]) -> Result<BoxStats> {
    if values.is_empty() {
        return Err(Error::NoData("empty group".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&v, 0.25);
    let q3 = quantile_sorted(&v, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let whisker_low = v.iter().copied().find(|&x| x >= lo_fence).unwrap_or(v[0]);
    let whisker_high = v.iter().rev().copied().find(|&x| x <= hi_fence).unwrap_or(v[v.len() - 1]);
    Ok(BoxStats {
        median: quantile_sorted(&v, 0.5),
        q1,
        q3,
        whisker_low,
        whisker_high,
        min: v[0],
        max: v[v.len() - 1],
    })
}

/// Record field used to split values into boxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKey {
    Condition,
    N,
    P,
    K,
    Experiment,
}

impl GroupKey {
    fn label(&self, r: &ExperimentRecord) -> String {
        match self {
            GroupKey::Condition => r.condition.clone(),
            GroupKey::N => format!("n={}", r.n),
            GroupKey::P => format!("p={}", r.p),
            GroupKey::K => format!("k={}", r.k),
            GroupKey::Experiment => r.experiment.clone(),
        }
    }
}

impl std::str::FromStr for GroupKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "condition" => Ok(GroupKey::Condition),
            "n" => Ok(GroupKey::N),
            "p" => Ok(GroupKey::P),
            "k" => Ok(GroupKey::K),
            "experiment" => Ok(GroupKey::Experiment),
            _ => Err(Error::Config(format!("unknown group key `{s}`"))),
        }
    }
}

/// One box per group of per-replicate `metric` values, groups in sorted order.
pub fn boxplot_svg(records: &[ExperimentRecord], metric: &str, group: GroupKey) -> Result<String> {
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.metric == metric && r.replicate.is_some()) {
        groups.entry(group.label(r)).or_default().push(r.value);
    }
    if groups.is_empty() {
        return Err(Error::NoData(format!("no per-replicate rows for metric `{metric}`")));
    }
    let stats: Vec<(String, BoxStats)> = groups
        .iter()
        .map(|(g, v)| box_stats(v).map(|s| (g.clone(), s)))
        .collect::<Result<_>>()?;
    let lo = stats.iter().map(|s| s.1.min).fold(f64::INFINITY, f64::min);
    let hi = stats.iter().map(|s| s.1.max).fold(f64::NEG_INFINITY, f64::max);
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 1.0 };
    let (lo, hi) = (lo - pad, hi + pad);
    let y = |v: f64| MARGIN_TOP + PLOT_H - (v - lo) / (hi - lo) * PLOT_H;
    let slot = PLOT_W / stats.len() as f64;
    let box_w = (slot * 0.5).min(80.0);

    let width = MARGIN_LEFT + PLOT_W + 20.0;
    let height = MARGIN_TOP + PLOT_H + MARGIN_BOTTOM;
    let mut out = String::new();
    header(&mut out, width, height, metric);
    let _ = writeln!(
        out,
        r##"<line x1="{MARGIN_LEFT:.2}" y1="{MARGIN_TOP:.2}" x2="{MARGIN_LEFT:.2}" y2="{:.2}" stroke="#333"/>"##,
        MARGIN_TOP + PLOT_H
    );
    for t in 0..=4 {
        let v = lo + (hi - lo) * t as f64 / 4.0;
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.3}</text>"#, MARGIN_LEFT - 6.0, y(v) + 4.0);
    }
    for (i, (name, s)) in stats.iter().enumerate() {
        let cx = MARGIN_LEFT + (i as f64 + 0.5) * slot;
        let (l, r) = (cx - box_w / 2.0, cx + box_w / 2.0);
        let _ = writeln!(
            out,
            r#"<g class="box" data-group="{}" data-median="{:.6}" data-q1="{:.6}" data-q3="{:.6}" data-whisker-low="{:.6}" data-whisker-high="{:.6}">"#,
            escape(name),
            s.median,
            s.q1,
            s.q3,
            s.whisker_low,
            s.whisker_high
        );
        let _ = writeln!(
            out,
            r##"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="#333"/>"##,
            y(s.whisker_low),
            y(s.q1)
        );
        let _ = writeln!(
            out,
            r##"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="#333"/>"##,
            y(s.q3),
            y(s.whisker_high)
        );
        let _ = writeln!(
            out,
            r##"<rect x="{l:.2}" y="{:.2}" width="{box_w:.2}" height="{:.2}" fill="{}" stroke="#333"/>"##,
            y(s.q3),
            (y(s.q1) - y(s.q3)).max(0.0),
            color(0.3 + 0.4 * i as f64 / stats.len().max(2) as f64)
        );
        let my = y(s.median);
        let _ = writeln!(out, r#"<line x1="{l:.2}" y1="{my:.2}" x2="{r:.2}" y2="{my:.2}" stroke="white" stroke-width="2"/>"#);
        for wv in [s.whisker_low, s.whisker_high] {
            let (x1, x2, wy) = (cx - box_w / 4.0, cx + box_w / 4.0, y(wv));
            let _ = writeln!(out, r##"<line x1="{x1:.2}" y1="{wy:.2}" x2="{x2:.2}" y2="{wy:.2}" stroke="#333"/>"##);
        }
        for v in &groups[name] {
            if *v < s.whisker_low || *v > s.whisker_high {
                let _ = writeln!(out, r##"<circle cx="{cx:.2}" cy="{:.2}" r="2.5" fill="none" stroke="#333"/>"##, y(*v));
            }
        }
        out.push_str("</g>\n");
        let _ = writeln!(
            out,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            MARGIN_TOP + PLOT_H + 18.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn render_boxplot(records: &[ExperimentRecord], metric: &str, group: GroupKey, out_path: &Path) -> Result<()> {
    fs::write(out_path, boxplot_svg(records, metric, group)?)?;
    Ok(())
}
