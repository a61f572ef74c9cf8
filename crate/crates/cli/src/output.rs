//! CSV and text outputs of a solve.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};

use resbasis::solver::{SolveOutcome, SolverConfig, StageReport};

pub const STAGES_HEADER: &str =
    "stage,width,estimator,residual_interior,residual_boundary,E_Linf,E_L2,wall_ms";

#[derive(Debug, Clone)]
pub struct OutputOptions {
    pub dir: PathBuf,
    pub fields: bool,
    pub timing: bool,
}

/// Scientific notation with 12 significant digits after the leading one.
pub fn sci(v: f64) -> String {
    format!("{v:.12e}")
}

fn write(opts: &OutputOptions, name: &str, text: &str) -> Result<()> {
    let path = opts.dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

/// `config_resolved.txt`: the problem name and every solver parameter.
pub fn write_config(opts: &OutputOptions, problem: &str, config: &SolverConfig) -> Result<()> {
    let text = format!("problem = {problem}\n{}", config.to_text());
    write(opts, "config_resolved.txt", &text)
}

pub fn stages_csv(reports: &[StageReport], timing: bool) -> String {
    let mut s = String::from(STAGES_HEADER);
    s.push('\n');
    for r in reports {
        let (linf, l2) = r
            .errors
            .map_or((String::new(), String::new()), |e| (sci(e.linf), sci(e.l2)));
        let wall = if timing {
            sci(r.wall_ms)
        } else {
            String::new()
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{linf},{l2},{wall}",
            r.stage,
            r.width,
            sci(r.estimator),
            sci(r.residual_interior),
            sci(r.residual_boundary)
        );
    }
    s
}

pub fn write_stages(opts: &OutputOptions, reports: &[StageReport]) -> Result<()> {
    write(opts, "stages.csv", &stages_csv(reports, opts.timing))
}

/// Field dump of stage `s >= 1` on the evaluation grid.
pub fn field_csv(outcome: &SolveOutcome, s: usize) -> String {
    let pts = outcome.grid.points.points();
    let two_d = outcome.grid.points.dim() == 2;
    let (u, prev) = (&outcome.fields[s], &outcome.fields[s - 1]);
    let mut out = String::from(if two_d {
        "x,y,u_s,abs_err,posteriori_err\n"
    } else {
        "x,u_s,abs_err,posteriori_err\n"
    });
    for (i, p) in pts.iter().enumerate() {
        out.push_str(&sci(p[0]));
        out.push(',');
        if two_d {
            out.push_str(&sci(p[1]));
            out.push(',');
        }
        out.push_str(&sci(u[i]));
        out.push(',');
        if let Some(ex) = &outcome.exact_on_grid {
            out.push_str(&sci((ex[i] - u[i]).abs()));
        }
        out.push(',');
        out.push_str(&sci((u[i] - prev[i]).abs()));
        out.push('\n');
    }
    out
}

pub fn write_fields(opts: &OutputOptions, outcome: &SolveOutcome) -> Result<()> {
    for s in 1..outcome.fields.len() {
        write(
            opts,
            &format!("field_stage_{s}.csv"),
            &field_csv(outcome, s),
        )?;
    }
    Ok(())
}
