//! Benchmark sweeps over the CP and RCP suites.
//!
//! A CP sweep writes one row per instance. An RCP sweep writes one summary
//! row per size, with a mean and a standard deviation column for every
//! averaged quantity and a count column for every status. The per-instance
//! rows of either suite can be written as well.
//!
//! Row columns, per step `s` in `lb_miqp`, `lb_miqcp`, `ub_nlp`:
//! `s_obj`, `s_time_s`, `s_gap_pct`, `s_status`, `s_n_v`. Cells of steps that
//! did not run are empty. Gaps are percentages with three decimals.

use std::io::Write;
use std::path::Path;

use deconflict::{
    InstanceSpec, ModelKind, PositionLaw, ResolutionReport, ResolutionStatus, StepRecord, StepStatus,
};
use rayon::prelude::*;

use crate::commands::SolveOptions;
use crate::{file_error, CliError, Result};

const STEPS: [(ModelKind, &str); 3] = [
    (ModelKind::LbMiqp, "lb_miqp"),
    (ModelKind::LbMiqcp, "lb_miqcp"),
    (ModelKind::UbNlp, "ub_nlp"),
];

const STEP_STATUSES: [StepStatus; 5] = [
    StepStatus::Global,
    StepStatus::Local,
    StepStatus::Viol,
    StepStatus::Infeas,
    StepStatus::Nosol,
];

const FINAL_STATUSES: [ResolutionStatus; 4] = [
    ResolutionStatus::Global,
    ResolutionStatus::Local,
    ResolutionStatus::Infeas,
    ResolutionStatus::Nosol,
];

pub const ROW_HEADER: &[&str] = &[
    "id",
    "n_aircraft",
    "n_c",
    "lb_miqp_obj",
    "lb_miqp_time_s",
    "lb_miqp_gap_pct",
    "lb_miqp_status",
    "lb_miqp_n_v",
    "lb_miqcp_obj",
    "lb_miqcp_time_s",
    "lb_miqcp_gap_pct",
    "lb_miqcp_status",
    "lb_miqcp_n_v",
    "ub_nlp_obj",
    "ub_nlp_time_s",
    "ub_nlp_gap_pct",
    "ub_nlp_status",
    "ub_nlp_n_v",
    "final_status",
    "final_obj",
    "best_lb",
    "total_time_s",
];

pub const SUMMARY_HEADER: &[&str] = &[
    "n_aircraft",
    "instances",
    "n_c_mean",
    "n_c_std",
    "lb_miqp_runs",
    "lb_miqp_obj_mean",
    "lb_miqp_obj_std",
    "lb_miqp_time_mean",
    "lb_miqp_time_std",
    "lb_miqp_gap_pct_mean",
    "lb_miqp_gap_pct_std",
    "lb_miqp_global",
    "lb_miqp_local",
    "lb_miqp_viol",
    "lb_miqp_infeas",
    "lb_miqp_nosol",
    "lb_miqp_n_v_mean",
    "lb_miqp_n_v_std",
    "lb_miqcp_runs",
    "lb_miqcp_obj_mean",
    "lb_miqcp_obj_std",
    "lb_miqcp_time_mean",
    "lb_miqcp_time_std",
    "lb_miqcp_gap_pct_mean",
    "lb_miqcp_gap_pct_std",
    "lb_miqcp_global",
    "lb_miqcp_local",
    "lb_miqcp_viol",
    "lb_miqcp_infeas",
    "lb_miqcp_nosol",
    "lb_miqcp_n_v_mean",
    "lb_miqcp_n_v_std",
    "ub_nlp_runs",
    "ub_nlp_obj_mean",
    "ub_nlp_obj_std",
    "ub_nlp_time_mean",
    "ub_nlp_time_std",
    "ub_nlp_gap_pct_mean",
    "ub_nlp_gap_pct_std",
    "ub_nlp_global",
    "ub_nlp_local",
    "ub_nlp_viol",
    "ub_nlp_infeas",
    "ub_nlp_nosol",
    "ub_nlp_n_v_mean",
    "ub_nlp_n_v_std",
    "final_global",
    "final_local",
    "final_infeas",
    "final_nosol",
    "total_time_mean",
    "total_time_std",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Cp,
    Rcp,
}

impl Suite {
    pub fn default_sizes(self) -> Vec<usize> {
        match self {
            Suite::Cp => (4..=20).collect(),
            Suite::Rcp => vec![10, 20, 30, 40],
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cp" => Ok(Suite::Cp),
            "rcp" => Ok(Suite::Rcp),
            _ => Err(CliError::Input(format!("unknown suite '{s}', expected cp or rcp"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub suite: Suite,
    pub sizes: Vec<usize>,
    /// RCP instances per size.
    pub count: usize,
    /// First RCP seed; instance `k` of a size uses `seed + k`.
    pub seed: u64,
    pub positions: PositionLaw,
    pub solve: SolveOptions,
    /// Worker threads; 1 runs in the calling thread.
    pub parallel: usize,
}

impl BenchOptions {
    pub fn new(suite: Suite) -> Self {
        Self {
            suite,
            sizes: suite.default_sizes(),
            count: 100,
            seed: 0,
            positions: PositionLaw::default(),
            solve: SolveOptions::default(),
            parallel: 1,
        }
    }

    /// Instance specs in row order: by size, then by seed.
    pub fn specs(&self) -> Vec<InstanceSpec> {
        let mut out = Vec::new();
        for &n in &self.sizes {
            match self.suite {
                Suite::Cp => out.push(InstanceSpec::cp(n)),
                Suite::Rcp => out.extend((0..self.count as u64).map(|k| InstanceSpec {
                    positions: self.positions,
                    ..InstanceSpec::rcp(n, self.seed + k)
                })),
            }
        }
        out
    }
}

/// One step's cells of a [`BenchRow`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepCells {
    pub objective: Option<f64>,
    pub time_s: f64,
    pub gap_pct: Option<f64>,
    pub status: StepStatus,
    pub n_v: usize,
}

impl From<&StepRecord> for StepCells {
    fn from(s: &StepRecord) -> Self {
        Self {
            objective: s.objective,
            time_s: s.time_s,
            gap_pct: s.gap.map(|g| 100.0 * g),
            status: s.status,
            n_v: s.n_v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub id: String,
    pub n_aircraft: usize,
    pub n_c: usize,
    /// LB-MIQP, LB-MIQCP and UB-NLP, `None` when the step did not run.
    pub steps: [Option<StepCells>; 3],
    pub final_status: ResolutionStatus,
    pub final_objective: Option<f64>,
    pub best_lower_bound: Option<f64>,
    pub total_time_s: f64,
}

impl BenchRow {
    pub fn from_report(id: String, report: &ResolutionReport) -> Self {
        let steps = STEPS.map(|(kind, _)| report.steps.iter().find(|s| s.step == kind).map(StepCells::from));
        Self {
            id,
            n_aircraft: report.n_aircraft,
            n_c: report.n_c,
            steps,
            final_status: report.status,
            final_objective: report.objective,
            best_lower_bound: report.best_lower_bound,
            total_time_s: report.total_time_s,
        }
    }

    fn record(&self) -> Vec<String> {
        let mut r = vec![self.id.clone(), self.n_aircraft.to_string(), self.n_c.to_string()];
        for step in &self.steps {
            match step {
                Some(c) => {
                    r.push(opt(c.objective));
                    r.push(format!("{:.3}", c.time_s));
                    r.push(c.gap_pct.map_or(String::new(), pct));
                    r.push(c.status.label().to_string());
                    r.push(c.n_v.to_string());
                }
                None => r.extend(std::iter::repeat_n(String::new(), 5)),
            }
        }
        r.push(self.final_status.label().to_string());
        r.push(opt(self.final_objective));
        r.push(opt(self.best_lower_bound));
        r.push(format!("{:.3}", self.total_time_s));
        r
    }
}

/// Three decimals; a tiny negative gap prints as zero, not `-0.000`.
fn pct(g: f64) -> String {
    let s = format!("{g:.3}");
    if s == "-0.000" {
        "0.000".to_string()
    } else {
        s
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

/// Mean and sample standard deviation; the deviation of one value is zero.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    Some((mean, var.sqrt()))
}

fn push_stats(r: &mut Vec<String>, values: &[f64]) {
    match mean_std(values) {
        Some((m, s)) => {
            r.push(m.to_string());
            r.push(s.to_string());
        }
        None => {
            r.push(String::new());
            r.push(String::new());
        }
    }
}

/// Summary row for all rows of one size.
fn summary_record(n: usize, rows: &[&BenchRow]) -> Vec<String> {
    let mut r = vec![n.to_string(), rows.len().to_string()];
    push_stats(&mut r, &rows.iter().map(|x| x.n_c as f64).collect::<Vec<_>>());
    for k in 0..STEPS.len() {
        let cells: Vec<&StepCells> = rows.iter().filter_map(|x| x.steps[k].as_ref()).collect();
        r.push(cells.len().to_string());
        push_stats(&mut r, &cells.iter().filter_map(|c| c.objective).collect::<Vec<_>>());
        push_stats(&mut r, &cells.iter().map(|c| c.time_s).collect::<Vec<_>>());
        push_stats(&mut r, &cells.iter().filter_map(|c| c.gap_pct).collect::<Vec<_>>());
        for st in STEP_STATUSES {
            r.push(cells.iter().filter(|c| c.status == st).count().to_string());
        }
        push_stats(&mut r, &cells.iter().map(|c| c.n_v as f64).collect::<Vec<_>>());
    }
    for st in FINAL_STATUSES {
        r.push(rows.iter().filter(|x| x.final_status == st).count().to_string());
    }
    push_stats(&mut r, &rows.iter().map(|x| x.total_time_s).collect::<Vec<_>>());
    r
}

#[derive(Debug, Clone)]
pub struct BenchOutput {
    pub rows: Vec<BenchRow>,
    pub reports: Vec<ResolutionReport>,
}

impl BenchOutput {
    pub fn write_rows<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(ROW_HEADER)?;
        for row in &self.rows {
            out.write_record(row.record())?;
        }
        out.flush().map_err(|e| CliError::Internal(e.to_string()))?;
        Ok(())
    }

    /// One row per distinct size, in increasing size.
    pub fn write_summary<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(SUMMARY_HEADER)?;
        let mut sizes: Vec<usize> = self.rows.iter().map(|r| r.n_aircraft).collect();
        sizes.dedup();
        for n in sizes {
            let group: Vec<&BenchRow> = self.rows.iter().filter(|r| r.n_aircraft == n).collect();
            out.write_record(summary_record(n, &group))?;
        }
        out.flush().map_err(|e| CliError::Internal(e.to_string()))?;
        Ok(())
    }

    /// The suite's main table: per-instance rows for CP, the summary for RCP.
    pub fn write_table<W: Write>(&self, suite: Suite, w: W) -> Result<()> {
        match suite {
            Suite::Cp => self.write_rows(w),
            Suite::Rcp => self.write_summary(w),
        }
    }
}

/// Generates and resolves every instance of the sweep. Rows follow
/// [`BenchOptions::specs`] whatever the number of workers.
pub fn cmd_bench(opts: &BenchOptions) -> Result<BenchOutput> {
    let specs = opts.specs();
    let cfg = opts.solve.config();
    let bounds = opts.solve.bounds;
    let run = |spec: &InstanceSpec| -> Result<(BenchRow, ResolutionReport)> {
        let file = spec.generate()?;
        let inst = file.to_problem(bounds)?;
        let report = deconflict::resolve(&inst, &cfg)?;
        log::info!("{}: {} {:?}", spec.id(), report.status.label(), report.objective);
        Ok((BenchRow::from_report(spec.id(), &report), report))
    };
    let results: Vec<Result<(BenchRow, ResolutionReport)>> = if opts.parallel > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.parallel)
            .build()
            .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
        pool.install(|| specs.par_iter().map(run).collect())
    } else {
        specs.iter().map(run).collect()
    };
    let mut rows = Vec::with_capacity(results.len());
    let mut reports = Vec::with_capacity(results.len());
    for r in results {
        let (row, report) = r?;
        rows.push(row);
        reports.push(report);
    }
    Ok(BenchOutput { rows, reports })
}

/// Writes `table` (and `rows` when given) for a finished sweep.
pub fn write_outputs(out: &BenchOutput, suite: Suite, table: &Path, rows: Option<&Path>) -> Result<()> {
    let f = std::fs::File::create(table).map_err(file_error(table))?;
    out.write_table(suite, f)?;
    if let Some(rows) = rows {
        let f = std::fs::File::create(rows).map_err(file_error(rows))?;
        out.write_rows(f)?;
    }
    Ok(())
}
