//! Turning experiment outputs into images.

use std::path::{Path, PathBuf};

use genattr::eval::{ExperimentKind, Histogram, RocCurve};
use genattr_render::{render_chart, render_grid, render_hist, ChartSpec, GrayImage, HistSeries, HistSpec, Series};

use crate::CliError;

/// Most probes shown in one example grid.
const GRID_COLUMNS: usize = 10;

enum Input {
    Roc(PathBuf),
    Hist(PathBuf),
    Examples(PathBuf),
}

fn classify(path: &Path) -> Result<Input, CliError> {
    if path.is_dir() {
        return Ok(Input::Examples(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    let header = text.lines().next().unwrap_or("");
    if header.starts_with("# fpr") {
        Ok(Input::Roc(path.to_path_buf()))
    } else if header.starts_with("# lower") {
        Ok(Input::Hist(path.to_path_buf()))
    } else {
        Err(CliError::Usage(format!("{}: not a curve, histogram or example directory", path.display())))
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn parent_name(path: &Path) -> String {
    path.parent().and_then(Path::file_name).map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Output name unique across trial directories, e.g. `trial0_hist_lmin.png`.
fn output_name(path: &Path, suffix: &str) -> String {
    match parent_name(path) {
        p if p.is_empty() => format!("{}{suffix}.png", stem(path)),
        p => format!("{p}_{}{suffix}.png", stem(path)),
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    Ok(std::fs::read_to_string(path)?)
}

/// Legend label of a curve file: its condition (`q90`), prefixed with the
/// trial directory when curves come from several.
fn curve_label(path: &Path, several_dirs: bool) -> String {
    let condition = stem(path).strip_prefix("roc").unwrap_or("").trim_start_matches('_').to_string();
    match (several_dirs, condition.is_empty()) {
        (true, true) | (false, true) => parent_name(path),
        (true, false) => format!("{} {condition}", parent_name(path)),
        (false, false) => condition,
    }
}

fn roc_chart(paths: &[PathBuf], title: &str, out: &Path) -> Result<PathBuf, CliError> {
    let dirs: std::collections::BTreeSet<String> = paths.iter().map(|p| parent_name(p)).collect();
    let mut series = Vec::new();
    for p in paths {
        let curve = RocCurve::from_tsv(&read_text(p)?)?;
        let label = format!("{} (AUC {:.3})", curve_label(p, dirs.len() > 1), curve.auc);
        series.push(Series { label: label.trim().to_string(), points: curve.points });
    }
    let file = if paths.len() == 1 { out.join(output_name(&paths[0], "")) } else { out.join("roc_overlay.png") };
    render_chart(&ChartSpec::roc(title, series))?.save_png(&file)?;
    Ok(file)
}

fn hist_chart(path: &Path, title: Option<&str>, out: &Path) -> Result<PathBuf, CliError> {
    let h = Histogram::from_tsv(&read_text(path)?)?;
    let name = stem(path);
    let x_label = if name.starts_with("hist_lmin") {
        "minimum reconstruction loss"
    } else if name.starts_with("hist_s") {
        "attribution score"
    } else {
        "value"
    };
    let spec = HistSpec {
        title: title.map(str::to_string).unwrap_or_else(|| format!("{} {name}", parent_name(path)).trim().to_string()),
        x_label: x_label.into(),
        series: vec![HistSeries { label: String::new(), edges: h.edges, counts: h.counts }],
    };
    let file = out.join(output_name(path, ""));
    render_hist(&spec)?.save_png(&file)?;
    Ok(file)
}

fn read_gray(path: &Path) -> Result<GrayImage, CliError> {
    let img = image::open(path).map_err(|source| CliError::Image { path: path.to_path_buf(), source })?.to_luma8();
    Ok(GrayImage::new(img.width() as usize, img.height() as usize, img.into_raw())?)
}

/// Probes along the top row, each generator's reconstruction below.
fn example_grid(dir: &Path, out: &Path) -> Result<PathBuf, CliError> {
    let mut stems: Vec<String> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix("_probe.png")).map(str::to_string))
        .collect();
    if stems.is_empty() {
        return Err(CliError::Usage(format!("{}: no *_probe.png files", dir.display())));
    }
    stems.sort();
    // Spread the shown probes over every generator's examples.
    if stems.len() > GRID_COLUMNS {
        let step = stems.len() as f64 / GRID_COLUMNS as f64;
        stems = (0..GRID_COLUMNS).map(|k| stems[(k as f64 * step) as usize].clone()).collect();
    }
    let mut gens = 0;
    while stems.iter().any(|s| dir.join(format!("{s}_rec{gens}.png")).exists()) {
        gens += 1;
    }
    let probes: Vec<GrayImage> =
        stems.iter().map(|s| read_gray(&dir.join(format!("{s}_probe.png")))).collect::<Result<_, _>>()?;
    let blank = GrayImage::new(probes[0].width, probes[0].height, vec![0; probes[0].data.len()])?;
    let mut images = probes;
    let mut labels = vec!["probe".to_string()];
    for g in 0..gens {
        for s in &stems {
            let p = dir.join(format!("{s}_rec{g}.png"));
            images.push(if p.exists() { read_gray(&p)? } else { blank.clone() });
        }
        labels.push(format!("gen {g}"));
    }
    let name = match parent_name(dir) {
        p if p.is_empty() => out.join(format!("{}_grid.png", stem(dir))),
        p => out.join(format!("{p}_{}_grid.png", stem(dir))),
    };
    render_grid(&images, gens + 1, &labels)?.save_png(&name)?;
    Ok(name)
}

/// Render every input into `out`; curve files given together are overlaid
/// on one chart.
pub fn plot(out: &Path, inputs: &[PathBuf], title: Option<&str>) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(out)?;
    let mut rocs = Vec::new();
    let mut written = Vec::new();
    for input in inputs {
        match classify(input)? {
            Input::Roc(p) => rocs.push(p),
            Input::Hist(p) => written.push(hist_chart(&p, title, out)?),
            Input::Examples(d) => written.push(example_grid(&d, out)?),
        }
    }
    if !rocs.is_empty() {
        written.insert(0, roc_chart(&rocs, title.unwrap_or("ROC"), out)?);
    }
    Ok(written)
}

fn sorted_files(dir: &Path, prefix: &str, ext: &str) -> Result<Vec<PathBuf>, CliError> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with(prefix) && n.ends_with(ext)))
        .collect();
    v.sort();
    Ok(v)
}

/// Standard figures of a finished experiment, written to `dir/plots`.
pub fn experiment_plots(dir: &Path, kind: ExperimentKind) -> Result<Vec<PathBuf>, CliError> {
    let out = dir.join("plots");
    std::fs::create_dir_all(&out)?;
    let trials = sorted_files(dir, "trial", "")?.into_iter().filter(|p| p.is_dir()).collect::<Vec<_>>();
    let mut written = Vec::new();
    let title = kind.name().replace('_', " ");
    if kind == ExperimentKind::Compression {
        for t in &trials {
            let curves = sorted_files(t, "roc", ".tsv")?;
            if !curves.is_empty() {
                let file = roc_chart(&curves, &format!("{title} {}", stem(t)), &out)?;
                let named = out.join(format!("{}_roc.png", stem(t)));
                std::fs::rename(&file, &named)?;
                written.push(named);
            }
        }
    } else {
        let curves: Vec<PathBuf> =
            trials.iter().map(|t| sorted_files(t, "roc", ".tsv")).collect::<Result<Vec<_>, _>>()?.concat();
        if !curves.is_empty() {
            let file = roc_chart(&curves, &title, &out)?;
            let named = out.join("roc.png");
            std::fs::rename(&file, &named)?;
            written.push(named);
        }
    }
    for t in &trials {
        for h in sorted_files(t, "hist", ".tsv")? {
            written.push(hist_chart(&h, None, &out)?);
        }
        let ex = t.join("examples");
        if ex.is_dir() {
            written.push(example_grid(&ex, &out)?);
        }
    }
    Ok(written)
}
