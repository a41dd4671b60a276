//! File export: trajectory CSV, SVG polyline plot, annotated edge lists.
//! All writes go through a temp file + rename in the target directory.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use hthk::{step_with_digraph, MindClass, ProximityDigraph, ScenarioFile, StructureReport};

/// Dense per-step opinions: row t holds x(t), rows 0..=steps.
pub struct Trajectory {
    pub rows: Vec<Vec<f64>>,
}

/// Replays the scenario deterministically to collect every step (the
/// simulation report thins its snapshots on long runs).
pub fn replay(sc: &ScenarioFile, steps: usize) -> Trajectory {
    let mut cur = sc.state.clone();
    let frozen = hthk::build_digraph(&cur, sc.tie_tol);
    let mut rows = vec![cur.opinions().to_vec()];
    for _ in 0..steps {
        let digraph = match sc.mode {
            hthk::Mode::Free => hthk::build_digraph(&cur, sc.tie_tol),
            hthk::Mode::Frozen => frozen.clone(),
        };
        cur = step_with_digraph(&cur, &digraph);
        rows.push(cur.opinions().to_vec());
    }
    Trajectory { rows }
}

/// Columns `t,x_1..x_n`; 17 significant digits, locale-independent.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.rows[0].len();
    let mut out = String::from("t");
    for i in 1..=n {
        let _ = write!(out, ",x_{i}");
    }
    out.push('\n');
    for (t, row) in traj.rows.iter().enumerate() {
        let _ = write!(out, "{t}");
        for v in row {
            let _ = write!(out, ",{v:.16e}");
        }
        out.push('\n');
    }
    out
}

/// Step-vs-opinion polylines, one per agent.
pub fn trajectory_svg(traj: &Trajectory) -> String {
    const W: f64 = 800.0;
    const H: f64 = 500.0;
    const PAD: f64 = 40.0;
    let steps = traj.rows.len() - 1;
    let n = traj.rows[0].len();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for row in &traj.rows {
        for &v in row {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !(hi > lo) {
        hi = lo + 1.0;
    }
    let x = |t: usize| PAD + (W - 2.0 * PAD) * t as f64 / steps.max(1) as f64;
    let y = |v: f64| H - PAD - (H - 2.0 * PAD) * (v - lo) / (hi - lo);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <line x1=\"{PAD}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{}\" stroke=\"black\"/>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">t</text>\n\
         <text x=\"12\" y=\"{}\" transform=\"rotate(-90 12 {})\" text-anchor=\"middle\">x</text>\n",
        H - PAD,
        W - PAD,
        H - PAD,
        H - PAD,
        W / 2.0,
        H - 10.0,
        H / 2.0,
        H / 2.0,
    );
    for i in 0..n {
        let hue = 360.0 * i as f64 / n as f64;
        let points: Vec<String> = traj
            .rows
            .iter()
            .enumerate()
            .map(|(t, row)| format!("{:.2},{:.2}", x(t), y(row[i])))
            .collect();
        let _ = write!(
            svg,
            "<polyline fill=\"none\" stroke=\"hsl({hue:.0} 70% 45%)\" stroke-width=\"1.2\" points=\"{}\"/>\n",
            points.join(" ")
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Edges as `i -> j` (1-based) followed by a per-SCC class annotation block.
pub fn edge_list(digraph: &ProximityDigraph, st: &StructureReport) -> String {
    let mut out = String::new();
    for (i, j) in digraph.edges() {
        let _ = writeln!(out, "{} -> {}", i + 1, j + 1);
    }
    out.push('\n');
    for (k, scc) in st.sccs.iter().enumerate() {
        let class = match st.class_of[k] {
            MindClass::ClosedMinded => "closed-minded",
            MindClass::ModerateMinded => "moderate-minded",
            MindClass::OpenMinded => "open-minded",
        };
        let members: Vec<String> = scc.iter().map(|&i| (i + 1).to_string()).collect();
        let _ = writeln!(out, "# scc {k}: {class} {{{}}}", members.join(", "));
    }
    out
}

/// Atomic write: temp file in the target directory, then rename.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temp file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(dir.join(name))
        .with_context(|| format!("writing {}/{name}", dir.display()))?;
    Ok(())
}
