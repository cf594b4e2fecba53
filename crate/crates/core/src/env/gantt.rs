use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{EnvError, JsspInstance};
use crate::disruptions::ScenarioTrace;

/// One scheduled operation. `pauses` are the breakdown sub-intervals during
/// which the operation was frozen on its machine.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GanttEntry {
    pub job: usize,
    pub op: usize,
    pub machine: usize,
    pub start: u64,
    pub end: u64,
    pub pauses: Vec<(u64, u64)>,
}

impl GanttEntry {
    pub fn paused(&self) -> u64 {
        self.pauses.iter().map(|(a, b)| b - a).sum()
    }

    /// `[start, end)` with the pauses cut out.
    pub fn processing_segments(&self) -> Vec<(u64, u64)> {
        let mut out = Vec::new();
        let mut at = self.start;
        for &(a, b) in &self.pauses {
            if a > at {
                out.push((at, a));
            }
            at = at.max(b);
        }
        if self.end > at {
            out.push((at, self.end));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    /// Operation started before its predecessor ended.
    Precedence { job: usize, op: usize },
    /// Two operations process on one machine at the same time.
    MachineConflict {
        machine: usize,
        first: (usize, usize),
        second: (usize, usize),
    },
    /// Operation started while its machine was broken.
    StartInBreakdown { job: usize, op: usize, at: u64 },
    /// Completion time disagrees with duration plus overlapped downtime.
    EffectiveTime {
        job: usize,
        op: usize,
        expected_end: u64,
        end: u64,
    },
    /// Recorded pauses are malformed or differ from the machine's downtime.
    PauseMismatch { job: usize, op: usize },
    /// Operation started before its release step.
    EarlyStart { job: usize, op: usize, release: u64 },
}

/// Check a complete trace against the job-shop constraints with breakdowns and
/// releases. An empty result means the schedule is valid.
pub fn validate_schedule(
    trace: &[GanttEntry],
    instance: &JsspInstance,
    scenario: &ScenarioTrace,
) -> Result<Vec<Violation>, EnvError> {
    scenario.check_against(instance).map_err(EnvError::ScenarioMismatch)?;
    if trace.len() != instance.total_ops() {
        return Err(EnvError::TraceMismatch(format!(
            "{} entries for {} operations",
            trace.len(),
            instance.total_ops()
        )));
    }
    let mut grid: Vec<Vec<Option<&GanttEntry>>> = instance.jobs().iter().map(|ops| vec![None; ops.len()]).collect();
    for e in trace {
        let slot = grid
            .get_mut(e.job)
            .and_then(|row| row.get_mut(e.op))
            .ok_or_else(|| EnvError::TraceMismatch(format!("no operation ({}, {})", e.job, e.op)))?;
        if slot.replace(e).is_some() {
            return Err(EnvError::TraceMismatch(format!("duplicate entry ({}, {})", e.job, e.op)));
        }
        if instance.op(e.job, e.op).machine != e.machine {
            return Err(EnvError::TraceMismatch(format!("wrong machine for ({}, {})", e.job, e.op)));
        }
        if e.end < e.start {
            return Err(EnvError::TraceMismatch(format!("negative span for ({}, {})", e.job, e.op)));
        }
    }

    let mut out = Vec::new();
    for row in &grid {
        for pair in row.windows(2) {
            let (prev, next) = (pair[0].expect("filled"), pair[1].expect("filled"));
            if next.start < prev.end {
                out.push(Violation::Precedence { job: next.job, op: next.op });
            }
        }
    }

    for e in trace {
        let (job, op) = (e.job, e.op);
        let duration = u64::from(instance.op(job, op).duration);
        if scenario.is_broken(e.machine, e.start) {
            out.push(Violation::StartInBreakdown { job, op, at: e.start });
        }
        let release = scenario.release(job, op);
        if e.start < release {
            out.push(Violation::EarlyStart { job, op, release });
        }
        let windows: Vec<_> = scenario.overlapping(e.machine, e.start, e.end).collect();
        let downtime: u64 = windows.iter().map(|w| w.len()).sum();
        let expected_end = e.start + duration + downtime;
        if e.end != expected_end {
            out.push(Violation::EffectiveTime {
                job,
                op,
                expected_end,
                end: e.end,
            });
        }
        let well_formed = e.pauses.iter().all(|&(a, b)| a < b && e.start <= a && b <= e.end)
            && e.pauses.windows(2).all(|w| w[0].1 <= w[1].0);
        let matches_downtime = e.pauses.len() == windows.len()
            && e.pauses.iter().zip(&windows).all(|(&(a, b), w)| a == w.start && b == w.end);
        if !well_formed || !matches_downtime || e.end - e.start != duration + e.paused() {
            out.push(Violation::PauseMismatch { job, op });
        }
    }

    for m in 0..instance.n_machines() {
        let mut segs: Vec<(u64, u64, (usize, usize))> = trace
            .iter()
            .filter(|e| e.machine == m)
            .flat_map(|e| e.processing_segments().into_iter().map(move |(a, b)| (a, b, (e.job, e.op))))
            .collect();
        segs.sort_unstable();
        let mut seen = HashSet::new();
        for w in segs.windows(2) {
            if w[1].0 < w[0].1 && w[0].2 != w[1].2 && seen.insert((w[0].2, w[1].2)) {
                out.push(Violation::MachineConflict {
                    machine: m,
                    first: w[0].2,
                    second: w[1].2,
                });
            }
        }
    }
    Ok(out)
}

fn format_pauses(pauses: &[(u64, u64)]) -> String {
    pauses.iter().map(|(a, b)| format!("{a}-{b}")).collect::<Vec<_>>().join(";")
}

/// CSV with header `job,op,machine,start,end,pauses`; pauses as `a-b;c-d`.
pub fn gantt_csv(trace: &[GanttEntry]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["job", "op", "machine", "start", "end", "pauses"]).expect("in-memory write");
    for e in trace {
        w.write_record([
            e.job.to_string(),
            e.op.to_string(),
            e.machine.to_string(),
            e.start.to_string(),
            e.end.to_string(),
            format_pauses(&e.pauses),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("ascii")
}

pub fn parse_gantt_csv(text: &str) -> Result<Vec<GanttEntry>, EnvError> {
    let bad = |line: usize, msg: &str| EnvError::TraceMismatch(format!("csv line {line}: {msg}"));
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| bad(1, &e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != ["job", "op", "machine", "start", "end", "pauses"] {
        return Err(bad(1, "unexpected header"));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| bad(line, &e.to_string()))?;
        let num = |k: usize| -> Result<u64, EnvError> {
            rec.get(k)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| bad(line, "expected an unsigned integer"))
        };
        let mut pauses = Vec::new();
        for part in rec.get(5).unwrap_or("").split(';').filter(|p| !p.trim().is_empty()) {
            let (a, b) = part.split_once('-').ok_or_else(|| bad(line, "pause must look like a-b"))?;
            let a = a.trim().parse().map_err(|_| bad(line, "bad pause start"))?;
            let b = b.trim().parse().map_err(|_| bad(line, "bad pause end"))?;
            pauses.push((a, b));
        }
        out.push(GanttEntry {
            job: num(0)? as usize,
            op: num(1)? as usize,
            machine: num(2)? as usize,
            start: num(3)?,
            end: num(4)?,
            pauses,
        });
    }
    Ok(out)
}

pub fn gantt_json(trace: &[GanttEntry]) -> String {
    serde_json::to_string_pretty(trace).expect("trace serializes")
}

/// Rows are machines; hatched segments are pauses, grey bands are downtime.
pub fn gantt_svg(trace: &[GanttEntry], n_machines: usize, scenario: Option<&ScenarioTrace>) -> String {
    const ROW: f64 = 28.0;
    const LEFT: f64 = 60.0;
    let makespan = trace.iter().map(|e| e.end).max().unwrap_or(1).max(1);
    let scale = 900.0 / makespan as f64;
    let width = LEFT + 920.0;
    let height = ROW * n_machines as f64 + 30.0;
    let x = |t: u64| LEFT + t as f64 * scale;
    let palette = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"];

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#);
    s.push_str(r##"<defs><pattern id="hatch" width="6" height="6" patternUnits="userSpaceOnUse" patternTransform="rotate(45)"><rect width="6" height="6" fill="#fff"/><line x1="0" y1="0" x2="0" y2="6" stroke="#333" stroke-width="2"/></pattern></defs>"##);
    s.push('\n');
    for m in 0..n_machines {
        let y = ROW * m as f64 + 4.0;
        let _ = writeln!(s, r#"<text x="4" y="{:.1}">M{}</text>"#, y + ROW / 2.0, m + 1);
        if let Some(sc) = scenario {
            for w in sc.breakdowns.get(m).into_iter().flatten().filter(|w| w.start < makespan) {
                let _ = writeln!(
                    s,
                    r##"<rect x="{:.1}" y="{y:.1}" width="{:.1}" height="{:.1}" fill="#ccc" opacity="0.6"/>"##,
                    x(w.start),
                    (w.end.min(makespan) - w.start) as f64 * scale,
                    ROW - 4.0
                );
            }
        }
    }
    for e in trace {
        let y = ROW * e.machine as f64 + 6.0;
        let fill = palette[e.job % palette.len()];
        let _ = writeln!(
            s,
            r##"<rect x="{:.1}" y="{y:.1}" width="{:.1}" height="{:.1}" fill="{fill}" stroke="#222"><title>J{} O{} [{}, {})</title></rect>"##,
            x(e.start),
            (e.end - e.start) as f64 * scale,
            ROW - 8.0,
            e.job + 1,
            e.op + 1,
            e.start,
            e.end
        );
        for &(a, b) in &e.pauses {
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{y:.1}" width="{:.1}" height="{:.1}" fill="url(#hatch)"/>"#,
                x(a),
                (b - a) as f64 * scale,
                ROW - 8.0
            );
        }
        let _ = writeln!(
            s,
            r##"<text x="{:.1}" y="{:.1}" fill="#fff">J{}</text>"##,
            x(e.start) + 2.0,
            y + ROW / 2.0,
            e.job + 1
        );
    }
    let _ = writeln!(s, r#"<text x="{LEFT}" y="{:.1}">makespan {makespan}</text>"#, height - 6.0);
    s.push_str("</svg>\n");
    s
}
