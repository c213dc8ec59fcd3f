//! Raster rendering of line charts, histograms and image grids.
//!
//! Output is plain RGB drawn with integer geometry and an embedded 8x8
//! bitmap font, so a given spec always encodes to the same PNG bytes.

mod canvas;

pub use canvas::{Canvas, GrayImage, Rgb, BLACK, GLYPH, GREY, LIGHT, WHITE};

pub type Result<T, E = RenderError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error("nothing to draw: {0}")]
    Empty(String),
    #[error("invalid plot input: {0}")]
    Invalid(String),
    #[error("png encoding failed: {0}")]
    Encode(#[from] png::EncodingError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Series colours, cycled.
pub const PALETTE: [Rgb; 6] =
    [[31, 119, 180], [214, 39, 40], [44, 160, 44], [148, 103, 189], [255, 127, 14], [23, 190, 207]];

pub const CHART_WIDTH: usize = 640;
pub const CHART_HEIGHT: usize = 480;
const LEFT: usize = 72;
const RIGHT: usize = 20;
const TOP: usize = 36;
const BOTTOM: usize = 48;
const TICKS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChartSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Dashed `y = x` reference line, the ROC of a random guess.
    pub diagonal: bool,
    /// Fixed axis ranges; fitted to the data when absent.
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
}

impl ChartSpec {
    /// Axes fixed to the unit square with the chance diagonal.
    pub fn roc(title: impl Into<String>, series: Vec<Series>) -> Self {
        Self {
            title: title.into(),
            x_label: "false positive rate".into(),
            y_label: "true positive rate".into(),
            series,
            diagonal: true,
            x_range: Some((0.0, 1.0)),
            y_range: Some((0.0, 1.0)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistSeries {
    pub label: String,
    /// `counts.len() + 1` ascending bin edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HistSpec {
    pub title: String,
    pub x_label: String,
    pub series: Vec<HistSeries>,
}

fn check_range(lo: f64, hi: f64, what: &str) -> Result<(f64, f64)> {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(RenderError::Invalid(format!("{what} range [{lo}, {hi}]")));
    }
    if lo == hi {
        return Ok((lo - 0.5, hi + 0.5));
    }
    Ok((lo, hi))
}

fn fit_range<'a>(values: impl Iterator<Item = &'a f64>, what: &str) -> Result<(f64, f64)> {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    check_range(lo, hi, what)
}

fn tick_label(v: f64, span: f64) -> String {
    if span != 0.0 && (span.abs() < 1e-2 || span.abs() >= 1e5) {
        format!("{v:.1e}")
    } else if span.abs() >= 1.0 && v.fract() == 0.0 {
        format!("{v:.0}")
    } else if span.abs() < 1.0 {
        format!("{v:.2}")
    } else if span.abs() < 10.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.0}")
    }
}

/// Linear map of data coordinates into the plot rectangle.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    const PLOT_W: usize = CHART_WIDTH - LEFT - RIGHT;
    const PLOT_H: usize = CHART_HEIGHT - TOP - BOTTOM;

    fn px(&self, x: f64) -> i64 {
        LEFT as i64 + ((x - self.x.0) / (self.x.1 - self.x.0) * Self::PLOT_W as f64).round() as i64
    }

    fn py(&self, y: f64) -> i64 {
        (TOP + Self::PLOT_H) as i64 - ((y - self.y.0) / (self.y.1 - self.y.0) * Self::PLOT_H as f64).round() as i64
    }

    fn draw_axes(&self, c: &mut Canvas, title: &str, x_label: &str, y_label: &str) {
        let (l, t) = (LEFT as i64, TOP as i64);
        let (r, b) = ((LEFT + Self::PLOT_W) as i64, (TOP + Self::PLOT_H) as i64);
        for k in 0..=TICKS {
            let fx = self.x.0 + (self.x.1 - self.x.0) * k as f64 / TICKS as f64;
            let fy = self.y.0 + (self.y.1 - self.y.0) * k as f64 / TICKS as f64;
            let (gx, gy) = (self.px(fx), self.py(fy));
            c.line((gx, t), (gx, b), 1, LIGHT);
            c.line((l, gy), (r, gy), 1, LIGHT);
            c.line((gx, b), (gx, b + 4), 1, BLACK);
            c.line((l - 4, gy), (l, gy), 1, BLACK);
            let xs = tick_label(fx, self.x.1 - self.x.0);
            c.text(gx - (xs.len() * GLYPH / 2) as i64, b + 8, &xs, BLACK);
            let ys = tick_label(fy, self.y.1 - self.y.0);
            c.text(l - 8 - (ys.len() * GLYPH) as i64, gy - 4, &ys, BLACK);
        }
        c.line((l, t), (l, b), 1, BLACK);
        c.line((l, b), (r, b), 1, BLACK);
        c.line((l, t), (r, t), 1, BLACK);
        c.line((r, t), (r, b), 1, BLACK);
        c.text(centered(title, CHART_WIDTH), 10, title, BLACK);
        c.text(l + (Self::PLOT_W as i64 - (x_label.len() * GLYPH) as i64) / 2, b + 26, x_label, BLACK);
        c.text(4, t - 14, y_label, BLACK);
    }
}

fn centered(text: &str, width: usize) -> i64 {
    (width as i64 - (text.chars().count() * GLYPH) as i64) / 2
}

/// Legend in the lower-right corner of the plot area.
fn legend(c: &mut Canvas, labels: &[&str]) {
    let labels: Vec<&&str> = labels.iter().filter(|l| !l.is_empty()).collect();
    if labels.is_empty() {
        return;
    }
    let longest = labels.iter().map(|l| l.chars().count()).max().unwrap_or(0);
    let w = longest * GLYPH + 36;
    let h = labels.len() * 14 + 8;
    let x = (LEFT + Frame::PLOT_W - w - 8) as i64;
    let y = (TOP + Frame::PLOT_H - h - 8) as i64;
    c.fill_rect(x, y, w, h, WHITE);
    c.line((x, y), (x + w as i64, y), 1, GREY);
    c.line((x, y + h as i64), (x + w as i64, y + h as i64), 1, GREY);
    c.line((x, y), (x, y + h as i64), 1, GREY);
    c.line((x + w as i64, y), (x + w as i64, y + h as i64), 1, GREY);
    for (k, label) in labels.iter().enumerate() {
        let ly = y + 6 + 14 * k as i64;
        c.fill_rect(x + 6, ly + 2, 18, 4, PALETTE[k % PALETTE.len()]);
        c.text(x + 30, ly, label, BLACK);
    }
}

/// Line chart of every series, optionally with the chance diagonal.
pub fn render_chart(spec: &ChartSpec) -> Result<Canvas> {
    if spec.series.is_empty() || spec.series.iter().all(|s| s.points.is_empty()) {
        return Err(RenderError::Empty("chart has no points".into()));
    }
    if spec.series.iter().flat_map(|s| &s.points).any(|p| !(p.0.is_finite() && p.1.is_finite())) {
        return Err(RenderError::Invalid("non-finite point".into()));
    }
    let x = match spec.x_range {
        Some((lo, hi)) => check_range(lo, hi, "x")?,
        None => fit_range(spec.series.iter().flat_map(|s| s.points.iter().map(|p| &p.0)), "x")?,
    };
    let y = match spec.y_range {
        Some((lo, hi)) => check_range(lo, hi, "y")?,
        None => fit_range(spec.series.iter().flat_map(|s| s.points.iter().map(|p| &p.1)), "y")?,
    };
    let frame = Frame { x, y };
    let mut c = Canvas::new(CHART_WIDTH, CHART_HEIGHT, WHITE);
    frame.draw_axes(&mut c, &spec.title, &spec.x_label, &spec.y_label);
    if spec.diagonal {
        let lo = x.0.max(y.0);
        let hi = x.1.min(y.1);
        if lo < hi {
            c.dashed_line((frame.px(lo), frame.py(lo)), (frame.px(hi), frame.py(hi)), 6, 4, GREY);
        }
    }
    for (k, s) in spec.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<(i64, i64)> = s.points.iter().map(|&(a, b)| (frame.px(a), frame.py(b))).collect();
        match pts.as_slice() {
            [p] => c.fill_rect(p.0 - 2, p.1 - 2, 5, 5, color),
            _ => {
                for w in pts.windows(2) {
                    c.line(w[0], w[1], 2, color);
                }
            }
        }
    }
    let labels: Vec<&str> = spec.series.iter().map(|s| s.label.as_str()).collect();
    legend(&mut c, &labels);
    Ok(c)
}

/// Histograms drawn as outlined bars; every series shares one set of axes.
pub fn render_hist(spec: &HistSpec) -> Result<Canvas> {
    if spec.series.is_empty() {
        return Err(RenderError::Empty("histogram has no series".into()));
    }
    for s in &spec.series {
        if s.counts.is_empty() || s.edges.len() != s.counts.len() + 1 {
            return Err(RenderError::Invalid(format!(
                "series '{}' has {} edges for {} bins",
                s.label,
                s.edges.len(),
                s.counts.len()
            )));
        }
        if s.edges.windows(2).any(|w| !(w[0].is_finite() && w[1].is_finite() && w[0] <= w[1])) {
            return Err(RenderError::Invalid(format!("series '{}' has unordered edges", s.label)));
        }
    }
    let x = fit_range(spec.series.iter().flat_map(|s| s.edges.iter()), "x")?;
    let peak = spec.series.iter().flat_map(|s| s.counts.iter()).copied().max().unwrap_or(0).max(1);
    // Round the count axis up to a multiple of the tick count so every
    // tick lands on a whole number.
    let top = (peak + 1).div_ceil(TICKS) * TICKS;
    let frame = Frame { x, y: (0.0, top as f64) };
    let mut c = Canvas::new(CHART_WIDTH, CHART_HEIGHT, WHITE);
    frame.draw_axes(&mut c, &spec.title, &spec.x_label, "count");
    for (k, s) in spec.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let base = frame.py(0.0);
        for (i, &n) in s.counts.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let (x0, x1, top) = (frame.px(s.edges[i]), frame.px(s.edges[i + 1]), frame.py(n as f64));
            if k == 0 {
                let fill = [tint(color[0]), tint(color[1]), tint(color[2])];
                c.fill_rect(x0, top, (x1 - x0).max(1) as usize, (base - top) as usize, fill);
            }
            c.line((x0, base), (x0, top), 1, color);
            c.line((x0, top), (x1, top), 1, color);
            c.line((x1, top), (x1, base), 1, color);
        }
    }
    let labels: Vec<&str> = spec.series.iter().map(|s| s.label.as_str()).collect();
    legend(&mut c, &labels);
    Ok(c)
}

/// Two thirds of the way from `v` to white.
fn tint(v: u8) -> u8 {
    ((v as u16 + 2 * 255) / 3) as u8
}

pub const GRID_SCALE: usize = 3;
pub const GRID_PAD: usize = 6;

/// Canvas size of a grid of `rows` x `cols` cells of `w` x `h` images.
/// Labelled grids reserve a left margin wide enough for the longest label.
pub fn grid_dimensions(rows: usize, cols: usize, w: usize, h: usize, label_chars: usize) -> (usize, usize) {
    let margin = if label_chars > 0 { label_chars * GLYPH + GRID_PAD } else { 0 };
    (margin + cols * (w * GRID_SCALE + GRID_PAD) + GRID_PAD, rows * (h * GRID_SCALE + GRID_PAD) + GRID_PAD)
}

/// Lay `images` out row by row, `rows` rows, each row optionally labelled
/// at its left. All images must share one size.
pub fn render_grid(images: &[GrayImage], rows: usize, labels: &[String]) -> Result<Canvas> {
    let first = images.first().ok_or_else(|| RenderError::Empty("grid has no images".into()))?;
    if rows == 0 || rows > images.len() {
        return Err(RenderError::Invalid(format!("{rows} rows for {} images", images.len())));
    }
    if images.iter().any(|i| (i.width, i.height) != (first.width, first.height)) {
        return Err(RenderError::Invalid("grid images differ in size".into()));
    }
    if !labels.is_empty() && labels.len() != rows {
        return Err(RenderError::Invalid(format!("{} labels for {rows} rows", labels.len())));
    }
    let cols = images.len().div_ceil(rows);
    let label_chars = labels.iter().map(|l| l.chars().count()).max().unwrap_or(0);
    let (w, h) = grid_dimensions(rows, cols, first.width, first.height, label_chars);
    let mut c = Canvas::new(w, h, WHITE);
    let margin = if label_chars > 0 { label_chars * GLYPH + GRID_PAD } else { 0 };
    let (cw, ch) = (first.width * GRID_SCALE + GRID_PAD, first.height * GRID_SCALE + GRID_PAD);
    for (k, img) in images.iter().enumerate() {
        let (r, col) = (k / cols, k % cols);
        c.blit_gray((margin + GRID_PAD + col * cw) as i64, (GRID_PAD + r * ch) as i64, img, GRID_SCALE);
    }
    for (r, label) in labels.iter().enumerate() {
        let y = GRID_PAD + r * ch + (first.height * GRID_SCALE).saturating_sub(GLYPH) / 2;
        c.text(GRID_PAD as i64 / 2, y as i64, label, BLACK);
    }
    Ok(c)
}
