//! Comparison reports and phase-diagram rendering.
//!
//! `evaluate` compares two CSV tables of the same schema — either
//! shadow-estimate tables (joined on system, property, and sites) or
//! phase-diagram tables (joined on the sweep coordinates) — and reports
//! per-quantity error statistics. The PNG renderer rasterizes a phase
//! diagram as a flat-color heatmap, one panel per lattice shape.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use image::{ImageFormat, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::phases::{PhaseLabel, PhasePoint};

// ---------------------------------------------------------------------------
// CSV parsing

/// A parsed CSV table: header names plus rows of equal width.
#[derive(Debug)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    /// Parse comma-separated text (no quoting; none of the tables here ever
    /// contain commas inside fields). Blank lines are skipped.
    pub fn parse(text: &str, name: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header_line) = lines.next().ok_or_else(|| Error::Parse {
            path: name.to_string(),
            line: 1,
            msg: "empty file".into(),
        })?;
        let header: Vec<String> = header_line.split(',').map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (i, line) in lines {
            let row: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
            if row.len() != header.len() {
                return Err(Error::Parse {
                    path: name.to_string(),
                    line: i + 1,
                    msg: format!("{} fields, header has {}", row.len(), header.len()),
                });
            }
            rows.push(row);
        }
        Ok(Table { header, rows })
    }

    /// Column index of `name`.
    fn col(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn float(&self, name: &str, row: &[String], file: &str) -> Result<f64> {
        let idx = self.col(name).expect("checked by schema detection");
        row[idx].parse().map_err(|_| Error::Parse {
            path: file.to_string(),
            line: 0,
            msg: format!("column {name}: '{}' is not a number", row[idx]),
        })
    }
}

// ---------------------------------------------------------------------------
// Error accumulation

#[derive(Debug, Default, Clone, Copy)]
struct ErrStats {
    n: usize,
    sum_sq: f64,
    sum_abs: f64,
    max_abs: f64,
}

impl ErrStats {
    fn push(&mut self, err: f64) {
        self.n += 1;
        self.sum_sq += err * err;
        self.sum_abs += err.abs();
        self.max_abs = self.max_abs.max(err.abs());
    }

    fn rmse(&self) -> f64 {
        (self.sum_sq / self.n as f64).sqrt()
    }

    fn mean_abs(&self) -> f64 {
        self.sum_abs / self.n as f64
    }

    fn row(&self, quantity: &str, out: &mut String) {
        let _ = writeln!(
            out,
            "{quantity},{},{},{},{}",
            self.n,
            self.rmse(),
            self.mean_abs(),
            self.max_abs
        );
    }
}

/// Header of the report `evaluate` emits.
pub const REPORT_HEADER: &str = "quantity,n_pairs,rmse,mean_abs_err,max_abs_err";

const ESTIMATE_KEYS: [&str; 4] = ["system_id", "property", "sites", "estimate"];
const PHASE_KEYS: [&str; 12] = [
    "R0_over_a",
    "delta_over_omega",
    "T",
    "n_rows",
    "n_cols",
    "O_z2",
    "O_z3",
    "O_checkboard",
    "O_striated",
    "O_star",
    "O_staggered",
    "label",
];
const PHASE_VALUE_COLS: [&str; 6] = [
    "O_z2",
    "O_z3",
    "O_checkboard",
    "O_striated",
    "O_star",
    "O_staggered",
];

enum Schema {
    Estimates,
    Phase,
}

fn detect_schema(table: &Table, file: &str) -> Result<Schema> {
    fn missing<'a>(table: &Table, req: &[&'a str]) -> Vec<&'a str> {
        req.iter().copied().filter(|c| table.col(c).is_none()).collect()
    }
    let est_missing = missing(table, &ESTIMATE_KEYS);
    if est_missing.is_empty() {
        return Ok(Schema::Estimates);
    }
    let phase_missing = missing(table, &PHASE_KEYS);
    if phase_missing.is_empty() {
        return Ok(Schema::Phase);
    }
    Err(Error::Parse {
        path: file.to_string(),
        line: 1,
        msg: format!(
            "unrecognized table: an estimates table is missing columns [{}], a phase table is \
             missing columns [{}]; got header [{}]",
            est_missing.join(", "),
            phase_missing.join(", "),
            table.header.join(", ")
        ),
    })
}

/// Compare a predicted CSV against a reference CSV of the same schema.
///
/// Estimate tables join on `(system_id, property, sites)` and report error
/// statistics of the `estimate` column per property plus an `all` row.
/// Phase tables join on `(R0_over_a, delta_over_omega, T, n_rows, n_cols)`
/// and report error statistics per order-parameter column plus a
/// `label_mismatch` row whose per-pair error is 0 when the labels agree and
/// 1 when they differ (so `mean_abs_err` is the disagreement rate).
///
/// Returns the report CSV and the number of rows of either file that had no
/// partner (reported, not an error; zero joined pairs is an error).
pub fn evaluate_tables(
    pred: &Table,
    truth: &Table,
    pred_name: &str,
    truth_name: &str,
) -> Result<(String, usize)> {
    let schema = detect_schema(pred, pred_name)?;
    match (schema, detect_schema(truth, truth_name)?) {
        (Schema::Estimates, Schema::Estimates) => evaluate_estimates(pred, truth, pred_name),
        (Schema::Phase, Schema::Phase) => evaluate_phase(pred, truth, pred_name, truth_name),
        _ => Err(Error::Incompatible(
            "the two files have different schemas (one estimates table, one phase table)".into(),
        )),
    }
}

fn estimate_key(table: &Table, row: &[String]) -> (String, String, String) {
    let get = |name: &str| row[table.col(name).expect("schema")].clone();
    (get("system_id"), get("property"), get("sites"))
}

fn evaluate_estimates(pred: &Table, truth: &Table, pred_name: &str) -> Result<(String, usize)> {
    let mut truth_map: BTreeMap<(String, String, String), f64> = BTreeMap::new();
    for row in &truth.rows {
        let key = estimate_key(truth, row);
        let value = truth.float("estimate", row, "reference file")?;
        if truth_map.insert(key.clone(), value).is_some() {
            return Err(Error::Config(format!(
                "reference file has duplicate rows for {}/{}/{}",
                key.0, key.1, key.2
            )));
        }
    }
    let mut per_property: BTreeMap<String, ErrStats> = BTreeMap::new();
    let mut all = ErrStats::default();
    let mut matched = 0usize;
    let mut seen: BTreeMap<(String, String, String), ()> = BTreeMap::new();
    for row in &pred.rows {
        let key = estimate_key(pred, row);
        if seen.insert(key.clone(), ()).is_some() {
            return Err(Error::Config(format!(
                "predicted file has duplicate rows for {}/{}/{}",
                key.0, key.1, key.2
            )));
        }
        let Some(&reference) = truth_map.get(&key) else {
            continue;
        };
        matched += 1;
        let value = pred.float("estimate", row, pred_name)?;
        let err = value - reference;
        per_property.entry(key.1.clone()).or_default().push(err);
        all.push(err);
    }
    if all.n == 0 {
        return Err(Error::Estimation(
            "no rows with matching (system_id, property, sites) between the two files".into(),
        ));
    }
    let unmatched = (pred.rows.len() - matched) + (truth.rows.len() - matched);
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for (prop, stats) in &per_property {
        stats.row(prop, &mut out);
    }
    if per_property.len() > 1 {
        all.row("all", &mut out);
    }
    Ok((out, unmatched))
}

/// Phase join key: sweep coordinates with floats compared exactly by value.
type PhaseKey = (u64, u64, u64, String, String);

fn phase_key(table: &Table, row: &[String], file: &str) -> Result<PhaseKey> {
    let get = |name: &str| row[table.col(name).expect("schema")].clone();
    Ok((
        table.float("R0_over_a", row, file)?.to_bits(),
        table.float("delta_over_omega", row, file)?.to_bits(),
        table.float("T", row, file)?.to_bits(),
        get("n_rows"),
        get("n_cols"),
    ))
}

fn evaluate_phase(
    pred: &Table,
    truth: &Table,
    pred_name: &str,
    truth_name: &str,
) -> Result<(String, usize)> {
    let mut truth_map: BTreeMap<PhaseKey, &Vec<String>> = BTreeMap::new();
    for row in &truth.rows {
        if truth_map.insert(phase_key(truth, row, truth_name)?, row).is_some() {
            return Err(Error::Config(
                "reference file has duplicate rows for one sweep point".into(),
            ));
        }
    }
    let mut stats: BTreeMap<&str, ErrStats> = BTreeMap::new();
    let mut labels = ErrStats::default();
    let mut matched = 0usize;
    let mut seen: BTreeMap<PhaseKey, ()> = BTreeMap::new();
    for row in &pred.rows {
        let key = phase_key(pred, row, pred_name)?;
        if seen.insert(key.clone(), ()).is_some() {
            return Err(Error::Config(
                "predicted file has duplicate rows for one sweep point".into(),
            ));
        }
        let Some(truth_row) = truth_map.get(&key) else {
            continue;
        };
        matched += 1;
        for col in PHASE_VALUE_COLS {
            let p = pred.float(col, row, pred_name)?;
            let t = truth.float(col, truth_row, truth_name)?;
            stats.entry(col).or_default().push(p - t);
        }
        let pl = &row[pred.col("label").expect("schema")];
        let tl = &truth_row[truth.col("label").expect("schema")];
        labels.push(if pl == tl { 0.0 } else { 1.0 });
    }
    if matched == 0 {
        return Err(Error::Estimation(
            "no rows with matching sweep coordinates between the two files".into(),
        ));
    }
    let unmatched = (pred.rows.len() - matched) + (truth.rows.len() - matched);
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for col in PHASE_VALUE_COLS {
        stats[col].row(col, &mut out);
    }
    labels.row("label_mismatch", &mut out);
    Ok((out, unmatched))
}

/// [`evaluate_tables`] over raw CSV text.
pub fn evaluate_csv(
    pred_text: &str,
    truth_text: &str,
    pred_name: &str,
    truth_name: &str,
) -> Result<(String, usize)> {
    let pred = Table::parse(pred_text, pred_name)?;
    let truth = Table::parse(truth_text, truth_name)?;
    evaluate_tables(&pred, &truth, pred_name, truth_name)
}

// ---------------------------------------------------------------------------
// PNG rendering

/// Flat color for each phase label.
fn label_color(label: PhaseLabel) -> Rgb<u8> {
    match label {
        PhaseLabel::Disordered => Rgb([214, 214, 214]),
        PhaseLabel::Z2 => Rgb([31, 119, 180]),
        PhaseLabel::Z3 => Rgb([44, 160, 44]),
        PhaseLabel::Checkboard => Rgb([214, 39, 40]),
        PhaseLabel::Striated => Rgb([148, 103, 189]),
        PhaseLabel::Star => Rgb([255, 127, 14]),
        PhaseLabel::Staggered => Rgb([23, 190, 207]),
    }
}

const CELL: u32 = 24;
const FRAME: u32 = 2;
const GAP: u32 = 10;
const HOLE: Rgb<u8> = Rgb([255, 255, 255]);
const FRAME_COLOR: Rgb<u8> = Rgb([40, 40, 40]);
const BACKGROUND: Rgb<u8> = Rgb([255, 255, 255]);

/// Sorted distinct values (exact float comparison: sweep grids repeat the
/// same computed values).
fn distinct(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

struct Panel {
    /// Row/col shape plus the fixed third coordinate (when both R0/a and
    /// time vary, panels split by time).
    points: Vec<PhasePoint>,
    ys: Vec<f64>,
    y_is_time: bool,
}

/// Rasterize phase points as a heatmap: x is Δ/Ω (increasing left to
/// right), y is the evolution time when it is the axis that varies and
/// R0/a otherwise (increasing bottom to top). One panel per lattice shape
/// (and per time, when both R0/a and time vary), stacked vertically. Cells
/// are flat label colors; sweep points absent from `points` stay white.
pub fn render_phase_image(points: &[PhasePoint]) -> Result<RgbImage> {
    if points.is_empty() {
        return Err(Error::Estimation("no phase points to render".into()));
    }
    let times = distinct(points.iter().map(|p| p.time));
    let radii = distinct(points.iter().map(|p| p.r0_over_a));
    let y_is_time = times.len() > 1 && radii.len() == 1;
    let split_by_time = times.len() > 1 && radii.len() > 1;

    // Panel keys in deterministic order.
    let mut panels: BTreeMap<(usize, usize, u64), Panel> = BTreeMap::new();
    for p in points {
        let t_key = if split_by_time { p.time.to_bits() } else { 0 };
        let panel = panels
            .entry((p.n_rows, p.n_cols, t_key))
            .or_insert_with(|| Panel {
                points: Vec::new(),
                ys: Vec::new(),
                y_is_time,
            });
        panel.points.push(p.clone());
    }
    let xs = distinct(points.iter().map(|p| p.delta_over_omega));
    for panel in panels.values_mut() {
        panel.ys = if y_is_time {
            times.clone()
        } else {
            distinct(panel.points.iter().map(|p| p.r0_over_a))
        };
    }

    let nx = xs.len() as u32;
    let width = 2 * FRAME + nx * CELL;
    let height: u32 = panels
        .values()
        .map(|p| 2 * FRAME + p.ys.len() as u32 * CELL)
        .sum::<u32>()
        + GAP * (panels.len() as u32 - 1);
    let mut img = RgbImage::from_pixel(width, height, BACKGROUND);

    let mut top = 0u32;
    for panel in panels.values() {
        let ny = panel.ys.len() as u32;
        let panel_h = 2 * FRAME + ny * CELL;
        // Frame.
        for dy in 0..panel_h {
            for dx in 0..width {
                let edge = dy < FRAME || dy >= panel_h - FRAME || dx < FRAME || dx >= width - FRAME;
                if edge {
                    img.put_pixel(dx, top + dy, FRAME_COLOR);
                }
            }
        }
        // Cells (y increases upward).
        for (yi, &y) in panel.ys.iter().enumerate() {
            for (xi, &x) in xs.iter().enumerate() {
                let hit = panel.points.iter().find(|p| {
                    p.delta_over_omega == x
                        && if panel.y_is_time {
                            p.time == y
                        } else {
                            p.r0_over_a == y
                        }
                });
                let color = hit.map_or(HOLE, |p| label_color(p.label));
                let px0 = FRAME + xi as u32 * CELL;
                let py0 = top + FRAME + (ny - 1 - yi as u32) * CELL;
                for dy in 0..CELL {
                    for dx in 0..CELL {
                        img.put_pixel(px0 + dx, py0 + dy, color);
                    }
                }
            }
        }
        top += panel_h + GAP;
    }
    Ok(img)
}

/// Render and write a phase diagram PNG.
pub fn write_phase_png(points: &[PhasePoint], path: &Path) -> Result<()> {
    let img = render_phase_image(points)?;
    img.save_with_format(path, ImageFormat::Png).map_err(|e| {
        Error::io(
            path.display().to_string(),
            std::io::Error::other(e.to_string()),
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const EST: &str = "system_id,property,sites,estimate,raw,n,std_err\n\
                       s0,correlation,0-1,-0.5,-0.5,100,0.01\n\
                       s0,correlation,0-2,0.25,0.25,100,0.01\n\
                       s0,renyi2,0,0.693,0.7,100,0.02\n";

    #[test]
    fn identical_estimate_tables_report_zero_error() {
        let (report, unmatched) = evaluate_csv(EST, EST, "a.csv", "b.csv").unwrap();
        assert_eq!(unmatched, 0);
        let mut lines = report.lines();
        assert_eq!(lines.next().unwrap(), REPORT_HEADER);
        assert_eq!(lines.next().unwrap(), "correlation,2,0,0,0");
        assert_eq!(lines.next().unwrap(), "renyi2,1,0,0,0");
        assert_eq!(lines.next().unwrap(), "all,3,0,0,0");
    }

    #[test]
    fn constant_offset_has_that_rmse() {
        // Shift every estimate by +0.1: rmse, mean, and max all equal 0.1.
        let mut shifted = String::from("system_id,property,sites,estimate\n");
        for line in EST.lines().skip(1) {
            let mut f: Vec<&str> = line.split(',').collect();
            let v: f64 = f[3].parse::<f64>().unwrap() + 0.1;
            let v = v.to_string();
            f[3] = &v;
            shifted.push_str(&f[..4].join(","));
            shifted.push('\n');
        }
        let (report, _) = evaluate_csv(&shifted, EST, "pred.csv", "truth.csv").unwrap();
        for line in report.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            for v in &f[2..5] {
                assert!(
                    (v.parse::<f64>().unwrap() - 0.1).abs() < 1e-12,
                    "line {line}"
                );
            }
        }
    }

    #[test]
    fn unknown_headers_are_diagnosed() {
        let bad = "foo,bar\n1,2\n";
        let err = evaluate_csv(bad, EST, "bad.csv", "truth.csv").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bad.csv"), "{msg}");
        assert!(msg.contains("system_id"), "{msg}");
        assert!(msg.contains("R0_over_a"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn disjoint_tables_are_an_estimation_error() {
        let other = "system_id,property,sites,estimate\nzz,correlation,0-1,0.0\n";
        let err = evaluate_csv(other, EST, "p.csv", "t.csv").unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn phase_tables_join_on_coordinates_and_compare_labels() {
        let truth = "R0_over_a,delta_over_omega,T,n_rows,n_cols,O_z2,O_z3,O_checkboard,O_striated,O_star,O_staggered,label,source\n\
                     1.5,2,0,1,7,0.9,0.2,0,0,0,0,Z2,exact\n\
                     1.5,3,0,1,7,0.3,0.2,0,0,0,0,disordered,exact\n";
        let pred = "R0_over_a,delta_over_omega,T,n_rows,n_cols,O_z2,O_z3,O_checkboard,O_striated,O_star,O_staggered,label,source\n\
                    1.5,2,0,1,7,0.8,0.2,0,0,0,0,Z2,model\n\
                    1.5,3,0,1,7,0.75,0.2,0,0,0,0,Z2,model\n";
        let (report, unmatched) = evaluate_csv(pred, truth, "p.csv", "t.csv").unwrap();
        assert_eq!(unmatched, 0);
        let z2_line = report
            .lines()
            .find(|l| l.starts_with("O_z2,"))
            .unwrap()
            .to_string();
        let f: Vec<&str> = z2_line.split(',').collect();
        assert_eq!(f[1], "2");
        // errors -0.1 and 0.45.
        assert!((f[2].parse::<f64>().unwrap() - (0.5f64 * (0.01 + 0.2025)).sqrt()).abs() < 1e-12);
        let label_line = report.lines().find(|l| l.starts_with("label_mismatch,")).unwrap();
        let f: Vec<&str> = label_line.split(',').collect();
        // one of two labels disagrees.
        assert_eq!(f[3], "0.5");
    }

    #[test]
    fn mismatched_schemas_are_rejected() {
        let phase = "R0_over_a,delta_over_omega,T,n_rows,n_cols,O_z2,O_z3,O_checkboard,O_striated,O_star,O_staggered,label,source\n\
                     1.5,2,0,1,7,0.9,0.2,0,0,0,0,Z2,exact\n";
        let err = evaluate_csv(EST, phase, "p.csv", "t.csv").unwrap_err();
        assert!(matches!(err, Error::Incompatible(_)));
    }

    fn point(doa: f64, r0a: f64, label: PhaseLabel) -> PhasePoint {
        PhasePoint {
            r0_over_a: r0a,
            delta_over_omega: doa,
            time: 0.0,
            n_rows: 1,
            n_cols: 7,
            o_z2: 0.0,
            o_z3: 0.0,
            o_checkboard: 0.0,
            o_striated: 0.0,
            o_star: 0.0,
            o_staggered: 0.0,
            label,
            source: "exact".into(),
        }
    }

    #[test]
    fn phase_image_has_one_cell_per_grid_point() {
        // 3 x 2 grid with one hole.
        let mut points = Vec::new();
        for (doa, r0a, label) in [
            (0.0, 1.0, PhaseLabel::Disordered),
            (1.0, 1.0, PhaseLabel::Disordered),
            (2.0, 1.0, PhaseLabel::Z2),
            (0.0, 2.0, PhaseLabel::Disordered),
            (2.0, 2.0, PhaseLabel::Z2),
        ] {
            points.push(point(doa, r0a, label));
        }
        let img = render_phase_image(&points).unwrap();
        assert_eq!(img.width(), 2 * FRAME + 3 * CELL);
        assert_eq!(img.height(), 2 * FRAME + 2 * CELL);
        let center = |xi: u32, yi_from_top: u32| {
            *img.get_pixel(
                FRAME + xi * CELL + CELL / 2,
                FRAME + yi_from_top * CELL + CELL / 2,
            )
        };
        // Top row is the largest R0/a (2.0): disordered, hole, Z2.
        assert_eq!(center(0, 0), label_color(PhaseLabel::Disordered));
        assert_eq!(center(1, 0), HOLE);
        assert_eq!(center(2, 0), label_color(PhaseLabel::Z2));
        assert_eq!(center(2, 1), label_color(PhaseLabel::Z2));
    }

    #[test]
    fn rendering_nothing_is_an_error() {
        assert!(render_phase_image(&[]).is_err());
    }
}
