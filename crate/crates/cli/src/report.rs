//! Static figures and tables from aggregate files.

use std::fmt::Write as _;

use aerisk_core::categories::{categorize, crosstab, CategoryCrosstab};
use aerisk_core::{Arm, Estimator, QuantileSpec};

use crate::error::CliError;
use crate::schema::{AggregateFile, Status};

pub const KDE_GRID: usize = 512;

/// Linear-interpolation sample quantile (type 7) of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Most extreme data points within 1.5 IQR of the box.
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&v, 0.25);
    let q3 = quantile_sorted(&v, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = v.iter().copied().filter(|&x| x >= lo_fence && x <= hi_fence).collect();
    Some(BoxStats {
        n: v.len(),
        median: quantile_sorted(&v, 0.5),
        q1,
        q3,
        whisker_low: inside[0],
        whisker_high: inside[inside.len() - 1],
        outliers: v.iter().copied().filter(|&x| x < lo_fence || x > hi_fence).collect(),
    })
}

fn sample_sd(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// Silverman's rule `0.9 min(sd, IQR/1.34) n^(-1/5)`, falling back to the
/// standard deviation, then to a fixed small width for constant data.
pub fn silverman_bandwidth(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let sd = sample_sd(&v);
    let iqr = quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25);
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        (false, true) => iqr / 1.34,
        (false, false) => 0.1,
    };
    0.9 * spread * (v.len() as f64).powf(-0.2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

/// Gaussian kernel density on an equally spaced grid spanning the data
/// plus three bandwidths on each side.
pub fn gaussian_kde(x: &[f64], points: usize) -> Option<Density> {
    if x.is_empty() || points < 2 {
        return None;
    }
    let h = silverman_bandwidth(x);
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let step = (hi - lo) / (points - 1) as f64;
    let norm = 1.0 / (x.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let grid: Vec<f64> = (0..points).map(|i| lo + step * i as f64).collect();
    let density = grid
        .iter()
        .map(|&g| norm * x.iter().map(|&xi| (-0.5 * ((g - xi) / h).powi(2)).exp()).sum::<f64>())
        .collect();
    Some(Density { bandwidth: h, grid, density })
}

/// Local maxima of a sampled curve.
pub fn modes(d: &Density) -> Vec<f64> {
    (1..d.density.len() - 1)
        .filter(|&i| d.density[i] > d.density[i - 1] && d.density[i] >= d.density[i + 1])
        .map(|i| d.grid[i])
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub tau: QuantileSpec,
    pub arm: Option<Arm>,
}

impl Default for Selection {
    fn default() -> Self {
        Self {
            tau: QuantileSpec::MaxFollowUp,
            arm: None,
        }
    }
}

/// Ratio values (not logs) per comparison estimator.
pub fn ratio_values(files: &[AggregateFile], sel: &Selection) -> Vec<(Estimator, Vec<f64>)> {
    Estimator::COMPARISONS
        .iter()
        .map(|&e| {
            let mut v = Vec::new();
            for_each_arm(files, sel, |_, _, arm| {
                if let Some(r) = arm.ratios.iter().find(|r| r.estimator == e && r.status == Status::Ok) {
                    v.push(r.ratio.0);
                }
            });
            (e, v)
        })
        .collect()
}

fn for_each_arm<'a>(
    files: &'a [AggregateFile],
    sel: &Selection,
    mut f: impl FnMut(&'a str, &'a str, &'a crate::schema::ArmBlock),
) {
    for file in files {
        for u in file.units.iter().filter(|u| u.tau_spec == sel.tau) {
            for a in u.arms.iter().filter(|a| sel.arm.is_none_or(|x| x == a.arm)) {
                f(&u.trial_id, &u.ae_type, a);
            }
        }
    }
}

fn require_values(groups: &[(Estimator, Vec<f64>)]) -> Result<(), CliError> {
    if groups.iter().all(|(_, v)| v.is_empty()) {
        Err(CliError::input("no ratios in the selection"))
    } else {
        Ok(())
    }
}

pub fn boxplot_csv(files: &[AggregateFile], sel: &Selection) -> Result<String, CliError> {
    let groups = ratio_values(files, sel);
    require_values(&groups)?;
    let mut s = String::from("estimator,n,whisker_low,q1,median,q3,whisker_high,n_outliers\n");
    for (e, v) in &groups {
        if let Some(b) = box_stats(v) {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                e, b.n, b.whisker_low, b.q1, b.median, b.q3, b.whisker_high, b.outliers.len()
            )
            .unwrap();
        }
    }
    Ok(s)
}

pub fn density_csv(files: &[AggregateFile], sel: &Selection) -> Result<String, CliError> {
    let groups = ratio_values(files, sel);
    require_values(&groups)?;
    let mut s = String::from("estimator,log_ratio,ratio,density,bandwidth\n");
    for (e, v) in &groups {
        let logs: Vec<f64> = v.iter().map(|x| x.ln()).collect();
        if let Some(d) = gaussian_kde(&logs, KDE_GRID) {
            for (g, y) in d.grid.iter().zip(&d.density) {
                writeln!(s, "{},{},{},{},{}", e, g, g.exp(), y, d.bandwidth).unwrap();
            }
        }
    }
    Ok(s)
}

pub fn frequencies_csv(files: &[AggregateFile], sel: &Selection) -> Result<String, CliError> {
    let mut s = String::from("trial_id,ae_type,arm,n,frac_ae,frac_death,frac_other_ce,frac_censored\n");
    let mut rows = 0;
    for_each_arm(files, sel, |t, ae, a| {
        let f = &a.frequencies;
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            t, ae, a.arm, a.n, f.frac_ae.0, f.frac_death.0, f.frac_other_ce.0, f.frac_censored.0
        )
        .unwrap();
        rows += 1;
    });
    if rows == 0 {
        return Err(CliError::input("no records in the selection"));
    }
    Ok(s)
}

/// Category pairs (comparison, reference) over the selected units.
pub fn category_crosstab(
    files: &[AggregateFile],
    sel: &Selection,
    comparison: Estimator,
    reference: Estimator,
) -> Result<CategoryCrosstab, CliError> {
    let mut pairs = Vec::new();
    let mut err = None;
    for_each_arm(files, sel, |_, _, a| {
        match (categorize(a.estimates.get(comparison)), categorize(a.estimates.get(reference))) {
            (Ok(c), Ok(r)) => pairs.push((c, r)),
            (Err(e), _) | (_, Err(e)) => {
                err.get_or_insert(e);
            }
        }
    });
    if let Some(e) = err {
        return Err(e.into());
    }
    if pairs.is_empty() {
        return Err(CliError::input("no records in the selection"));
    }
    Ok(crosstab(pairs))
}

const W: f64 = 720.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;

fn svg_open(title: &str) -> String {
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title)).unwrap();
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&s| s >= raw)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|i| i as f64 * step).collect()
}

/// Boxplots of log ratios, one per estimator; the axis is labelled in ratios.
pub fn boxplot_svg(files: &[AggregateFile], sel: &Selection) -> Result<String, CliError> {
    let groups = ratio_values(files, sel);
    require_values(&groups)?;
    let stats: Vec<(Estimator, Option<BoxStats>)> = groups
        .iter()
        .map(|(e, v)| (*e, box_stats(&v.iter().map(|x| x.ln()).collect::<Vec<_>>())))
        .collect();
    let all: Vec<f64> = groups.iter().flat_map(|(_, v)| v.iter().map(|x| x.ln())).collect();
    let lo = all.iter().copied().fold(0.0f64, f64::min);
    let hi = all.iter().copied().fold(0.0f64, f64::max);
    let pad = ((hi - lo) * 0.05).max(0.05);
    let (lo, hi) = (lo - pad, hi + pad);
    let y = |v: f64| TOP + (hi - v) / (hi - lo) * (H - TOP - BOTTOM);
    let slot = (W - LEFT - RIGHT) / stats.len() as f64;

    let mut s = svg_open("Ratio to Aalen-Johansen estimate");
    for t in nice_ticks(lo, hi, 6) {
        writeln!(
            s,
            r##"<line x1="{LEFT}" x2="{}" y1="{y:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">{:.3}</text>"##,
            W - RIGHT,
            LEFT - 6.0,
            y(t) + 4.0,
            t.exp(),
            y = y(t)
        )
        .unwrap();
    }
    writeln!(
        s,
        r##"<line x1="{LEFT}" x2="{}" y1="{y0:.2}" y2="{y0:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
        W - RIGHT,
        y0 = y(0.0)
    )
    .unwrap();
    for (i, (e, b)) in stats.iter().enumerate() {
        let cx = LEFT + slot * (i as f64 + 0.5);
        let half = slot * 0.25;
        writeln!(
            s,
            r#"<text x="{cx:.2}" y="{}" text-anchor="middle">{}</text>"#,
            H - BOTTOM + 18.0,
            escape(e.label())
        )
        .unwrap();
        let Some(b) = b else { continue };
        writeln!(
            s,
            r##"<line x1="{cx:.2}" x2="{cx:.2}" y1="{:.2}" y2="{:.2}" stroke="black"/>"##,
            y(b.whisker_high),
            y(b.q3)
        )
        .unwrap();
        writeln!(
            s,
            r##"<line x1="{cx:.2}" x2="{cx:.2}" y1="{:.2}" y2="{:.2}" stroke="black"/>"##,
            y(b.q1),
            y(b.whisker_low)
        )
        .unwrap();
        writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#cfe0f3" stroke="black"/>"##,
            cx - half,
            y(b.q3),
            2.0 * half,
            (y(b.q1) - y(b.q3)).max(0.0)
        )
        .unwrap();
        writeln!(
            s,
            r##"<line x1="{:.2}" x2="{:.2}" y1="{m:.2}" y2="{m:.2}" stroke="black" stroke-width="2"/>"##,
            cx - half,
            cx + half,
            m = y(b.median)
        )
        .unwrap();
        for o in &b.outliers {
            writeln!(s, r#"<circle cx="{cx:.2}" cy="{:.2}" r="2.5" fill="none" stroke="black"/>"#, y(*o)).unwrap();
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

const PALETTE: [&str; 5] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e"];

/// Kernel density curves of the log ratios, one per estimator.
pub fn density_svg(files: &[AggregateFile], sel: &Selection) -> Result<String, CliError> {
    let groups = ratio_values(files, sel);
    require_values(&groups)?;
    let curves: Vec<(Estimator, Density)> = groups
        .iter()
        .filter_map(|(e, v)| gaussian_kde(&v.iter().map(|x| x.ln()).collect::<Vec<_>>(), KDE_GRID).map(|d| (*e, d)))
        .collect();
    let lo = curves.iter().map(|(_, d)| d.grid[0]).fold(f64::INFINITY, f64::min);
    let hi = curves.iter().map(|(_, d)| d.grid[d.grid.len() - 1]).fold(f64::NEG_INFINITY, f64::max);
    let top = curves
        .iter()
        .flat_map(|(_, d)| d.density.iter().copied())
        .fold(0.0f64, f64::max)
        * 1.05;
    let x = |v: f64| LEFT + (v - lo) / (hi - lo) * (W - LEFT - RIGHT);
    let y = |v: f64| TOP + (top - v) / top * (H - TOP - BOTTOM);

    let mut s = svg_open("Density of log ratio to Aalen-Johansen estimate");
    for t in nice_ticks(lo, hi, 8) {
        writeln!(
            s,
            r##"<line x1="{xt:.2}" x2="{xt:.2}" y1="{TOP}" y2="{}" stroke="#eee"/><text x="{xt:.2}" y="{}" text-anchor="middle">{:.2}</text>"##,
            H - BOTTOM,
            H - BOTTOM + 16.0,
            t.exp(),
            xt = x(t)
        )
        .unwrap();
    }
    for (i, (e, d)) in curves.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let mut path = String::new();
        for (j, (g, v)) in d.grid.iter().zip(&d.density).enumerate() {
            write!(path, "{}{:.2},{:.2}", if j == 0 { "M" } else { " L" }, x(*g), y(*v)).unwrap();
        }
        writeln!(s, r#"<path d="{path}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#).unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{colour}">{}</text>"#,
            W - RIGHT - 200.0,
            TOP + 16.0 * (i as f64 + 1.0),
            escape(e.label())
        )
        .unwrap();
    }
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">ratio (log scale)</text>"#, W / 2.0, H - 20.0).unwrap();
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type7_quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(quantile_sorted(&v, 0.25), 1.75);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
    }

    #[test]
    fn single_value_box_is_degenerate() {
        let b = box_stats(&[1.3]).unwrap();
        for v in [b.q1, b.median, b.q3, b.whisker_low, b.whisker_high] {
            assert_eq!(v, 1.3);
        }
        assert!(b.outliers.is_empty());
    }

    #[test]
    fn whiskers_stop_at_fences() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0, 100.0];
        let b = box_stats(&v).unwrap();
        assert_eq!(b.whisker_high, 5.0);
        assert_eq!(b.outliers, vec![100.0]);
    }

    #[test]
    fn kde_integrates_to_one() {
        let x = [0.1, 0.2, 0.25, 0.5, 0.9, 1.4];
        let d = gaussian_kde(&x, KDE_GRID).unwrap();
        let step = d.grid[1] - d.grid[0];
        let area: f64 = d.density.iter().sum::<f64>() * step;
        assert!((area - 1.0).abs() < 0.01, "{area}");
    }

    #[test]
    fn silverman_matches_hand_value() {
        // sd = 1.2909944, IQR/1.34 = 1.119403, n^-0.2 = 0.757858
        let x = [1.0, 2.0, 3.0, 4.0];
        let h = silverman_bandwidth(&x);
        assert!((h - 0.9 * (1.5 / 1.34) * 4f64.powf(-0.2)).abs() < 1e-12);
    }
}
