//! Per-vital SVG plots with threshold guides, plus the vision prompt.
//!
//! The x axis always spans the full calendar day (00:00 to 24:00). The y axis
//! covers both the data and the threshold band with 5% padding. Axis domains
//! are written to `data-*` attributes on the root element so the plotted
//! points can be mapped back to readings.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Modality, PatientDay, ThresholdConfig};
use crate::stats::PromptError;
use crate::templates;
use crate::util::write_atomic;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("cannot write {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotStyle {
    pub width: u32,
    pub height: u32,
    pub series_color: String,
    pub threshold_color: String,
    pub axis_color: String,
    pub sleep_color: String,
}

impl Default for PlotStyle {
    fn default() -> Self {
        Self {
            width: 800,
            height: 320,
            series_color: "#1f4e79".into(),
            threshold_color: "#c0392b".into(),
            axis_color: "#444444".into(),
            sleep_color: "#5b6abf".into(),
        }
    }
}

const MARGIN_LEFT: f64 = 56.0;
const MARGIN_RIGHT: f64 = 16.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 36.0;
const MINUTES_PER_DAY: f64 = 1440.0;

/// Maps (minute of day, value) to pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisTransform {
    pub left: f64,
    pub top: f64,
    pub plot_width: f64,
    pub plot_height: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl AxisTransform {
    pub fn x(&self, minute_of_day: f64) -> f64 {
        self.left + minute_of_day / MINUTES_PER_DAY * self.plot_width
    }

    pub fn y(&self, value: f64) -> f64 {
        self.top + (1.0 - (value - self.y_min) / (self.y_max - self.y_min)) * self.plot_height
    }

    pub fn minute_at(&self, x: f64) -> f64 {
        (x - self.left) / self.plot_width * MINUTES_PER_DAY
    }

    pub fn value_at(&self, y: f64) -> f64 {
        self.y_min + (1.0 - (y - self.top) / self.plot_height) * (self.y_max - self.y_min)
    }
}

fn minute_of_day(ts: NaiveDateTime) -> f64 {
    f64::from(ts.hour() * 60 + ts.minute())
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

pub fn plot_title(vital: Modality, day: &PatientDay) -> String {
    format!("{} — {} {}", vital.display_name(), day.patient_id, day.date.format("%Y-%m-%d"))
}

/// Contiguous sleep-stage runs as (start minute, end minute, stage).
fn sleep_bands(day: &PatientDay) -> Vec<(f64, f64, String)> {
    let mut bands: Vec<(f64, f64, String)> = Vec::new();
    for obs in day.observations_of(Modality::Sleep) {
        let stage = obs.value.to_string();
        let start = minute_of_day(obs.timestamp);
        let end = start + 1.0;
        match bands.last_mut() {
            Some(last) if last.2 == stage && start <= last.1 => last.1 = last.1.max(end),
            _ => bands.push((start, end, stage)),
        }
    }
    bands
}

/// SVG document for one vital, or `None` when the vital has no readings.
pub fn render_vital_svg(
    day: &PatientDay,
    vital: Modality,
    cfg: &ThresholdConfig,
    style: &PlotStyle,
) -> Option<String> {
    let bounds = cfg.bounds(vital)?;
    let series = day.numeric_series(vital);
    if series.is_empty() {
        return None;
    }
    let data_min = series.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let data_max = series.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let lo = data_min.min(bounds.lower);
    let hi = data_max.max(bounds.upper);
    let pad = (hi - lo) * 0.05;
    let (width, height) = (f64::from(style.width), f64::from(style.height));
    let t = AxisTransform {
        left: MARGIN_LEFT,
        top: MARGIN_TOP,
        plot_width: width - MARGIN_LEFT - MARGIN_RIGHT,
        plot_height: height - MARGIN_TOP - MARGIN_BOTTOM,
        y_min: lo - pad,
        y_max: hi + pad,
    };
    let bottom = t.top + t.plot_height;
    let right = t.left + t.plot_width;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" data-vital="{vital}" data-x-min="0" data-x-max="1440" data-y-min="{ymin}" data-y-max="{ymax}" data-plot-left="{l}" data-plot-top="{tp}" data-plot-width="{pw}" data-plot-height="{ph}">"#,
        w = style.width,
        h = style.height,
        vital = vital.name(),
        ymin = t.y_min,
        ymax = t.y_max,
        l = t.left,
        tp = t.top,
        pw = t.plot_width,
        ph = t.plot_height,
    );
    let title = escape(&plot_title(vital, day));
    let _ = writeln!(svg, "<title>{title}</title>");
    let _ = writeln!(svg, r##"<rect class="background" x="0" y="0" width="{}" height="{}" fill="#ffffff"/>"##, style.width, style.height);

    for (start, end, stage) in sleep_bands(day) {
        let opacity = match stage.as_str() {
            "deep" => 0.30,
            "rem" => 0.22,
            "light" => 0.15,
            _ => 0.06,
        };
        let _ = writeln!(
            svg,
            r#"<rect class="sleep-band" data-stage="{}" x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}" fill-opacity="{opacity}"/>"#,
            escape(&stage),
            t.x(start),
            t.top,
            t.x(end) - t.x(start),
            t.plot_height,
            style.sleep_color,
        );
    }

    let _ = writeln!(
        svg,
        r#"<line class="axis" x1="{l:.3}" y1="{b:.3}" x2="{r:.3}" y2="{b:.3}" stroke="{c}" stroke-width="1"/>"#,
        l = t.left,
        b = bottom,
        r = right,
        c = style.axis_color
    );
    let _ = writeln!(
        svg,
        r#"<line class="axis" x1="{l:.3}" y1="{tp:.3}" x2="{l:.3}" y2="{b:.3}" stroke="{c}" stroke-width="1"/>"#,
        l = t.left,
        tp = t.top,
        b = bottom,
        c = style.axis_color
    );
    for hour in (0..=24).step_by(3) {
        let x = t.x(f64::from(hour * 60));
        let _ = writeln!(
            svg,
            r#"<text class="tick" x="{x:.3}" y="{:.3}" font-size="10" text-anchor="middle">{hour:02}:00</text>"#,
            bottom + 14.0
        );
    }

    for (side, value) in [("lower", bounds.lower), ("upper", bounds.upper)] {
        let y = t.y(value);
        let _ = writeln!(
            svg,
            r#"<line class="threshold" data-bound="{side}" data-value="{value}" x1="{l:.3}" y1="{y:.3}" x2="{r:.3}" y2="{y:.3}" stroke="{c}" stroke-width="1" stroke-dasharray="6 4"/>"#,
            l = t.left,
            r = right,
            c = style.threshold_color
        );
        let _ = writeln!(
            svg,
            r#"<text class="tick" x="{:.3}" y="{:.3}" font-size="10" text-anchor="end">{}</text>"#,
            t.left - 4.0,
            y + 3.0,
            templates::format_reading(vital, value)
        );
    }

    let mut points = String::new();
    for (i, (ts, v)) in series.iter().enumerate() {
        if i > 0 {
            points.push(' ');
        }
        let _ = write!(points, "{:.3},{:.3}", t.x(minute_of_day(*ts)), t.y(*v));
    }
    let _ = writeln!(
        svg,
        r#"<polyline class="series" points="{points}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
        style.series_color
    );
    for (ts, v) in &series {
        let _ = writeln!(
            svg,
            r#"<circle class="point" cx="{:.3}" cy="{:.3}" r="2.5" fill="{}"/>"#,
            t.x(minute_of_day(*ts)),
            t.y(*v),
            style.series_color
        );
    }
    let _ = writeln!(
        svg,
        r#"<text class="title" x="{:.3}" y="20" font-size="14">{title}</text>"#,
        t.left
    );
    let _ = writeln!(
        svg,
        r#"<text class="unit" x="4" y="{:.3}" font-size="10">{}</text>"#,
        t.top - 6.0,
        escape(vital.unit())
    );
    svg.push_str("</svg>\n");
    Some(svg)
}

pub fn plot_file_name(day: &PatientDay, vital: Modality) -> String {
    format!("{}_{}_{}.svg", day.patient_id, day.date.format("%Y-%m-%d"), vital.name())
}

/// Writes one SVG per vital with readings; vitals without data are skipped.
pub fn render_day(day: &PatientDay, cfg: &ThresholdConfig, out_dir: &Path) -> Result<Vec<PathBuf>, PlotError> {
    render_day_with(day, cfg, out_dir, &PlotStyle::default())
}

pub fn render_day_with(
    day: &PatientDay,
    cfg: &ThresholdConfig,
    out_dir: &Path,
    style: &PlotStyle,
) -> Result<Vec<PathBuf>, PlotError> {
    let mut written = Vec::new();
    for vital in Modality::VITALS {
        let Some(svg) = render_vital_svg(day, vital, cfg, style) else {
            log::debug!("{} {}: no {} readings, plot skipped", day.patient_id, day.date, vital);
            continue;
        };
        let path = out_dir.join(plot_file_name(day, vital));
        write_atomic(&path, svg.as_bytes()).map_err(|source| PlotError::IoFailure {
            path: path.clone(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}

/// Vision prompt for one vital's plot.
pub fn render_vision_prompt(vital: Modality, cfg: &ThresholdConfig) -> Result<String, PromptError> {
    if !vital.is_vital() {
        return Err(PromptError::NonVitalModality(vital));
    }
    Ok(templates::VISION
        .replace("{reference_ranges}", &templates::reference_ranges(cfg, ""))
        .replace("{signal}", vital.display_name()))
}
