//! SVG view of an instance: start positions, initial velocity arrows and
//! straight-line trajectories, plus resolved arrows when a report is given.
//!
//! Every arrow is a `<line>` whose class is `initial` or `resolved` and whose
//! `data-aircraft` attribute holds the aircraft index. Coordinates are printed
//! with three decimals so output bytes depend only on the inputs.

use std::fmt::Write as _;
use std::path::Path;

use deconflict::{InstanceFile, ResolutionReport};

use crate::commands::load_instance;
use crate::{file_error, CliError, Result};

const SIZE: f64 = 800.0;
const MARGIN: f64 = 40.0;
/// Arrows show the distance flown in this many hours.
const ARROW_HOURS: f64 = 0.06;

struct Frame {
    scale: f64,
    half: f64,
}

impl Frame {
    fn new(file: &InstanceFile) -> Self {
        let reach = file
            .aircraft
            .iter()
            .map(|a| a.x_nm.abs().max(a.y_nm.abs()) + a.speed_kn * ARROW_HOURS * 1.2)
            .fold(file.d_nm, f64::max);
        let half = file
            .generator_params
            .map_or(reach, |g| reach.max(g.radius_nm))
            * 1.05;
        Self {
            scale: (SIZE - 2.0 * MARGIN) / (2.0 * half),
            half,
        }
    }

    fn x(&self, x: f64) -> f64 {
        MARGIN + (x + self.half) * self.scale
    }

    /// SVG y grows downwards.
    fn y(&self, y: f64) -> f64 {
        MARGIN + (self.half - y) * self.scale
    }
}

fn line(svg: &mut String, f: &Frame, class: &str, i: usize, from: (f64, f64), to: (f64, f64), extra: &str) {
    let _ = writeln!(
        svg,
        r#"  <line class="{class}" data-aircraft="{i}" x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"{extra}/>"#,
        f.x(from.0),
        f.y(from.1),
        f.x(to.0),
        f.y(to.1)
    );
}

pub fn render_svg(file: &InstanceFile, report: Option<&ResolutionReport>) -> Result<String> {
    let controls = match report {
        Some(r) if !r.controls.is_empty() => {
            if r.controls.len() != file.aircraft.len() {
                return Err(CliError::Input(format!(
                    "report has {} controls for {} aircraft",
                    r.controls.len(),
                    file.aircraft.len()
                )));
            }
            Some(&r.controls)
        }
        _ => None,
    };
    let f = Frame::new(file);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    svg.push_str(concat!(
        "  <defs>\n",
        r##"    <marker id="head-initial" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="6" markerHeight="6" orient="auto"><path d="M0,0 L10,5 L0,10 z" fill="#1f4e9c"/></marker>"##,
        "\n",
        r##"    <marker id="head-resolved" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="6" markerHeight="6" orient="auto"><path d="M0,0 L10,5 L0,10 z" fill="#c0392b"/></marker>"##,
        "\n  </defs>\n",
        r#"  <rect width="100%" height="100%" fill="white"/>"#,
        "\n"
    ));
    if let Some(g) = file.generator_params {
        let _ = writeln!(
            svg,
            r##"  <circle class="boundary" cx="{:.3}" cy="{:.3}" r="{:.3}" fill="none" stroke="#bbbbbb" stroke-dasharray="4 4"/>"##,
            f.x(0.0),
            f.y(0.0),
            g.radius_nm * f.scale
        );
    }
    let status = report.map_or(String::new(), |r| {
        format!(
            " | {} {}",
            r.status.label(),
            r.objective.map_or("-".to_string(), |o| format!("{o:.6}"))
        )
    });
    let _ = writeln!(
        svg,
        r#"  <text x="{MARGIN}" y="{:.3}" font-family="sans-serif" font-size="14">{} | d = {} NM{status}</text>"#,
        MARGIN * 0.6,
        file.id(),
        file.d_nm
    );

    for (i, a) in file.aircraft.iter().enumerate() {
        let start = (a.x_nm, a.y_nm);
        let (sin, cos) = a.heading_rad.sin_cos();
        // straight path across the drawing
        let span = 2.0 * f.half;
        let far = (a.x_nm + span * cos, a.y_nm + span * sin);
        line(&mut svg, &f, "path-initial", i, start, far, r##" stroke="#1f4e9c" stroke-opacity="0.25""##);
        if let Some(c) = controls {
            let h = a.heading_rad + c[i].theta_rad;
            let far = (a.x_nm + span * h.cos(), a.y_nm + span * h.sin());
            line(&mut svg, &f, "path-resolved", i, start, far, r##" stroke="#c0392b" stroke-opacity="0.25""##);
        }
        let len = a.speed_kn * ARROW_HOURS;
        let tip = (a.x_nm + len * cos, a.y_nm + len * sin);
        line(
            &mut svg,
            &f,
            "initial",
            i,
            start,
            tip,
            r##" stroke="#1f4e9c" stroke-width="2" marker-end="url(#head-initial)""##,
        );
        if let Some(c) = controls {
            let h = a.heading_rad + c[i].theta_rad;
            let len = len * c[i].q;
            let tip = (a.x_nm + len * h.cos(), a.y_nm + len * h.sin());
            line(
                &mut svg,
                &f,
                "resolved",
                i,
                start,
                tip,
                r##" stroke="#c0392b" stroke-width="2" marker-end="url(#head-resolved)""##,
            );
        }
        let _ = writeln!(
            svg,
            r#"  <circle class="aircraft" data-aircraft="{i}" cx="{:.3}" cy="{:.3}" r="{:.3}" fill="black"/>"#,
            f.x(a.x_nm),
            f.y(a.y_nm),
            (0.5 * file.d_nm * f.scale).max(2.0)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn cmd_plot(instance: &Path, report: Option<&Path>, out: &Path) -> Result<String> {
    let file = load_instance(instance)?;
    let report = match report {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(file_error(p))?;
            Some(
                serde_json::from_str::<ResolutionReport>(&text)
                    .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?,
            )
        }
        None => None,
    };
    let svg = render_svg(&file, report.as_ref())?;
    std::fs::write(out, &svg).map_err(file_error(out))?;
    Ok(svg)
}
