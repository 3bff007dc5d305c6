//! `generate`, `solve` and `verify`.

use std::path::{Path, PathBuf};

use deconflict::{
    resolve, verify, ControlBounds, EnvelopeMode, InstanceFile, InstanceSpec, RelaxConfig,
    ResolutionReport, ResolveConfig, VerifyReport,
};
use log::info;

use crate::{file_error, CliError, Result};

/// Settings shared by `solve` and `bench`.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub bounds: ControlBounds,
    pub time_limit_s: f64,
    pub envelope: EnvelopeMode,
    pub record_timing: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            bounds: ControlBounds::default(),
            time_limit_s: 300.0,
            envelope: EnvelopeMode::default(),
            record_timing: true,
        }
    }
}

impl SolveOptions {
    pub fn config(&self) -> ResolveConfig {
        ResolveConfig {
            time_limit_s: self.time_limit_s,
            relax: RelaxConfig {
                envelope: self.envelope,
                ..RelaxConfig::default()
            },
            record_timing: self.record_timing,
            ..ResolveConfig::default()
        }
    }
}

/// `q_lo,q_hi,th_lo,th_hi` with angles in radians.
pub fn parse_bounds(s: &str) -> Result<ControlBounds> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| CliError::Input(format!("bounds '{s}': {e}")))?;
    let [q_lo, q_hi, th_lo, th_hi] = parts[..] else {
        return Err(CliError::Input(format!(
            "bounds '{s}': expected q_lo,q_hi,th_lo,th_hi"
        )));
    };
    Ok(ControlBounds::new(q_lo, q_hi, th_lo, th_hi)?)
}

/// `4-20`, `10,20,30` or a mix such as `4-6,10`. An empty string gives no sizes.
pub fn parse_sizes(s: &str) -> Result<Vec<usize>> {
    let bad = |p: &str| CliError::Input(format!("sizes: cannot read '{p}'"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: usize = a.trim().parse().map_err(|_| bad(part))?;
                let b: usize = b.trim().parse().map_err(|_| bad(part))?;
                if a > b {
                    return Err(bad(part));
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad(part))?),
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

pub fn cmd_generate(spec: &InstanceSpec, out: &Path) -> Result<InstanceFile> {
    let file = spec.generate()?;
    std::fs::write(out, file.to_json()?).map_err(file_error(out))?;
    info!("wrote {} to {}", file.id(), out.display());
    Ok(file)
}

/// Writes `count` instances with seeds `spec.seed, spec.seed + 1, ...` into
/// `dir`, named after their ids.
pub fn cmd_generate_batch(spec: &InstanceSpec, count: usize, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(file_error(dir))?;
    let mut paths = Vec::with_capacity(count);
    for k in 0..count as u64 {
        let spec = InstanceSpec {
            seed: spec.seed + k,
            ..*spec
        };
        let path = dir.join(format!("{}.json", spec.id()));
        cmd_generate(&spec, &path)?;
        paths.push(path);
    }
    Ok(paths)
}

pub fn load_instance(path: &Path) -> Result<InstanceFile> {
    let text = std::fs::read_to_string(path).map_err(file_error(path))?;
    InstanceFile::from_json(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub(crate) fn report_json(report: &ResolutionReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

/// Resolves the instance at `path`. A global or local report is checked
/// again by [`verify`] before it is written.
pub fn cmd_solve(path: &Path, opts: &SolveOptions, out: Option<&Path>) -> Result<ResolutionReport> {
    let file = load_instance(path)?;
    let inst = file.to_problem(opts.bounds)?;
    let report = resolve(&inst, &opts.config())?;
    if report.is_feasible_status() {
        let check = verify(&inst, &report.decisions());
        if !check.feasible {
            return Err(CliError::Internal(format!(
                "{}: {} report fails verification (min margin {:.3e} NM)",
                file.id(),
                report.status.label(),
                check.min_margin
            )));
        }
    }
    if let Some(out) = out {
        std::fs::write(out, report_json(&report)?).map_err(file_error(out))?;
    }
    Ok(report)
}

/// Checks the controls of a saved report against the instance and bounds.
pub fn cmd_verify(instance: &Path, report: &Path, bounds: ControlBounds) -> Result<VerifyReport> {
    let file = load_instance(instance)?;
    let inst = file.to_problem(bounds)?;
    let text = std::fs::read_to_string(report).map_err(file_error(report))?;
    let report: ResolutionReport = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", report.display())))?;
    if report.controls.is_empty() {
        return Err(CliError::Input(format!(
            "report has status {} and carries no controls",
            report.status.label()
        )));
    }
    Ok(verify(&inst, &report.decisions()))
}
