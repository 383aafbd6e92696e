use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use plotters::prelude::*;
use ranksr_ranker::{LogRecord, SeparationReport};
use ranksr_srgan::TrainLogRecord;

use crate::{ExpError, Result};

/// Override for the font used in plot labels.
pub const FONT_ENV: &str = "RANKSR_FONT";
const FONT_CANDIDATES: [&str; 3] = [
    "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf",
    "/usr/share/fonts/dejavu/DejaVuSans.ttf",
    "/Library/Fonts/Arial.ttf",
];
const FAMILY: &str = "sans-serif";
const SIZE: (u32, u32) = (800, 500);
const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

/// Registers a system font once; plots are drawn without text when none loads.
fn have_font() -> bool {
    static LOADED: OnceLock<bool> = OnceLock::new();
    *LOADED.get_or_init(|| {
        let env = std::env::var_os(FONT_ENV).map(PathBuf::from);
        for p in env
            .into_iter()
            .chain(FONT_CANDIDATES.iter().map(PathBuf::from))
        {
            if let Ok(bytes) = std::fs::read(&p) {
                let bytes: &'static [u8] = Box::leak(bytes.into_boxed_slice());
                if plotters::style::register_font(FAMILY, FontStyle::Normal, bytes).is_ok() {
                    return true;
                }
            }
        }
        log::warn!("no font found; plots carry no text");
        false
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            points,
        }
    }
}

/// Path of the plain-data file that accompanies a plot.
pub fn sidecar(png: &Path) -> PathBuf {
    png.with_extension("csv")
}

fn plot_err(e: impl std::fmt::Display) -> ExpError {
    ExpError::Plot(e.to_string())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| ExpError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| ExpError::io(path, e))
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Line chart of `series` (e.g. iteration vs NIQE) as PNG, with every point
/// written to the `series,x,y` CSV sidecar.
pub fn line_plot(
    png: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
) -> Result<PathBuf> {
    if series.is_empty() {
        return Err(ExpError::EmptySeries(title.into()));
    }
    if let Some(s) = series.iter().find(|s| s.points.is_empty()) {
        return Err(ExpError::EmptySeries(format!("{title}: {}", s.name)));
    }
    if series
        .iter()
        .flat_map(|s| &s.points)
        .any(|(x, y)| !x.is_finite() || !y.is_finite())
    {
        return Err(ExpError::Plot(format!("{title}: non-finite point")));
    }
    let mut csv = String::from("series,x,y\n");
    for s in series {
        for (x, y) in &s.points {
            csv.push_str(&format!("{},{x},{y}\n", s.name));
        }
    }
    let data = sidecar(png);
    write_text(&data, &csv)?;

    let xr = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let yr = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let font = have_font();
    let root = BitMapBackend::new(png, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut builder = ChartBuilder::on(&root);
    builder.margin(15);
    if font {
        builder
            .caption(title, (FAMILY, 22))
            .x_label_area_size(40)
            .y_label_area_size(60);
    }
    let mut chart = builder
        .build_cartesian_2d(xr.0..xr.1, yr.0..yr.1)
        .map_err(plot_err)?;
    if font {
        chart
            .configure_mesh()
            .x_desc(x_label)
            .y_desc(y_label)
            .draw()
            .map_err(plot_err)?;
    }
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let drawn = chart
            .draw_series(LineSeries::new(
                s.points.iter().copied(),
                color.stroke_width(2),
            ))
            .map_err(plot_err)?;
        if font {
            drawn
                .label(s.name.clone())
                .legend(move |(x, y)| PathElement::new([(x, y), (x + 20, y)], color));
        }
    }
    if font {
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(plot_err)?;
    }
    root.present().map_err(plot_err)?;
    Ok(data)
}

/// Shared equal-width bins over every class's samples.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramData {
    pub edges: Vec<f64>,
    /// Per class, one count per bin.
    pub counts: Vec<(String, Vec<usize>)>,
}

impl HistogramData {
    /// Bins `[e_i, e_{i+1})`, the last one closed.
    pub fn compute(classes: &[(String, Vec<f64>)], bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(ExpError::Plot("at least one bin".into()));
        }
        if classes.is_empty() {
            return Err(ExpError::EmptySeries("histogram".into()));
        }
        if let Some((id, _)) = classes.iter().find(|(_, v)| v.is_empty()) {
            return Err(ExpError::EmptySeries(format!("histogram class {id}")));
        }
        let all = || classes.iter().flat_map(|(_, v)| v.iter().copied());
        if all().any(|v| !v.is_finite()) {
            return Err(ExpError::Plot("non-finite sample".into()));
        }
        let lo = all().fold(f64::INFINITY, f64::min);
        let hi = all().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        };
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins)
            .map(|i| if i == bins { hi } else { lo + width * i as f64 })
            .collect();
        let counts = classes
            .iter()
            .map(|(id, v)| {
                let mut c = vec![0; bins];
                for x in v {
                    let b = (((x - lo) / width) as usize).min(bins - 1);
                    c[b] += 1;
                }
                (id.clone(), c)
            })
            .collect();
        Ok(Self { edges, counts })
    }
}

/// Per-class score histogram as PNG plus a `class,bin_lo,bin_hi,count` CSV.
pub fn histogram_plot(
    png: &Path,
    title: &str,
    classes: &[(String, Vec<f64>)],
    bins: usize,
) -> Result<HistogramData> {
    let hist = HistogramData::compute(classes, bins)?;
    let mut csv = String::from("class,bin_lo,bin_hi,count\n");
    for (id, c) in &hist.counts {
        for (i, n) in c.iter().enumerate() {
            csv.push_str(&format!(
                "{id},{},{},{n}\n",
                hist.edges[i],
                hist.edges[i + 1]
            ));
        }
    }
    write_text(&sidecar(png), &csv)?;

    let (lo, hi) = (hist.edges[0], hist.edges[bins]);
    let top = hist
        .counts
        .iter()
        .flat_map(|(_, c)| c.iter().copied())
        .max()
        .unwrap_or(1) as f64
        * 1.1;
    let font = have_font();
    let root = BitMapBackend::new(png, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut builder = ChartBuilder::on(&root);
    builder.margin(15);
    if font {
        builder
            .caption(title, (FAMILY, 22))
            .x_label_area_size(40)
            .y_label_area_size(50);
    }
    let mut chart = builder
        .build_cartesian_2d(lo..hi, 0.0..top)
        .map_err(plot_err)?;
    if font {
        chart
            .configure_mesh()
            .x_desc("score")
            .y_desc("count")
            .draw()
            .map_err(plot_err)?;
    }
    for (k, (id, c)) in hist.counts.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let bars = c.iter().enumerate().map(|(i, n)| {
            Rectangle::new(
                [(hist.edges[i], 0.0), (hist.edges[i + 1], *n as f64)],
                color.mix(0.4).filled(),
            )
        });
        let drawn = chart.draw_series(bars).map_err(plot_err)?;
        if font {
            drawn.label(id.clone()).legend(move |(x, y)| {
                Rectangle::new([(x, y - 5), (x + 15, y + 5)], color.filled())
            });
        }
    }
    if font {
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(plot_err)?;
    }
    root.present().map_err(plot_err)?;
    Ok(hist)
}

/// Reads a line-plot sidecar back into series, in first-appearance order.
pub fn read_series_csv(path: &Path) -> Result<Vec<Series>> {
    let text = std::fs::read_to_string(path).map_err(|e| ExpError::io(path, e))?;
    let mut out: Vec<Series> = Vec::new();
    for line in text.lines().skip(1) {
        let bad = || ExpError::Format(format!("{}: bad row {line}", path.display()));
        let mut parts = line.rsplitn(3, ',');
        let y: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let x: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let name = parts.next().ok_or_else(bad)?;
        match out.iter_mut().find(|s| s.name == name) {
            Some(s) => s.points.push((x, y)),
            None => out.push(Series::new(name, vec![(x, y)])),
        }
    }
    Ok(out)
}

/// Validation NIQE and PSNR curves of one or more GAN runs, as
/// `niqe.png` and `psnr.png` in `dir`.
pub fn plot_training_curves(
    runs: &[(String, Vec<TrainLogRecord>)],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let pick = |f: fn(&TrainLogRecord) -> Option<f64>| -> Vec<Series> {
        runs.iter()
            .map(|(name, log)| {
                Series::new(
                    name.clone(),
                    log.iter()
                        .filter_map(|r| f(r).map(|v| (r.iter as f64, v)))
                        .collect(),
                )
            })
            .collect()
    };
    Ok(vec![
        line_plot(
            &dir.join("niqe.png"),
            "validation NIQE",
            "iteration",
            "NIQE",
            &pick(|r| r.val_niqe),
        )?,
        line_plot(
            &dir.join("psnr.png"),
            "validation PSNR",
            "iteration",
            "PSNR (dB)",
            &pick(|r| r.val_psnr),
        )?,
    ])
}

/// Training loss and validation SROCC of a ranker run.
pub fn plot_ranker_log(log: &[LogRecord], dir: &Path) -> Result<Vec<PathBuf>> {
    let loss = Series::new(
        "loss",
        log.iter().map(|r| (r.iter as f64, r.loss)).collect(),
    );
    let srocc = Series::new(
        "val_srocc",
        log.iter()
            .filter_map(|r| r.val_srocc.map(|s| (r.iter as f64, s)))
            .collect(),
    );
    Ok(vec![
        line_plot(
            &dir.join("ranker_loss.png"),
            "ranker loss",
            "iteration",
            "margin loss",
            &[loss],
        )?,
        line_plot(
            &dir.join("ranker_srocc.png"),
            "ranker validation SROCC",
            "iteration",
            "SROCC",
            &[srocc],
        )?,
    ])
}

/// Histogram of normalized ranker scores per class.
pub fn plot_separation(report: &SeparationReport, png: &Path) -> Result<HistogramData> {
    histogram_plot(png, "normalized ranker scores", &report.normalized, 20)
}
