//! Instance file formats.
//!
//! Taillard text: a line `n m`, then `n` lines of `m` processing times, then
//! `n` lines of `m` machine numbers (1-based). Blank lines are ignored.
//!
//! Small JSON: `{"jobs": [[[machine, duration], ...], ...]}` with 0-based
//! machines and an optional `"n_machines"` (default: highest machine + 1).

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::env::JsspInstance;

fn perr(line: usize, msg: impl Into<String>) -> BenchError {
    BenchError::Parse {
        line: Some(line),
        msg: msg.into(),
    }
}

fn numbers(line_no: usize, text: &str) -> Result<Vec<i64>, BenchError> {
    text.split_whitespace()
        .map(|t| t.parse::<i64>().map_err(|_| perr(line_no, format!("'{t}' is not an integer"))))
        .collect()
}

pub fn parse_taillard(text: &str) -> Result<JsspInstance, BenchError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hl, header) = lines.next().ok_or_else(|| perr(1, "empty file"))?;
    let dims = numbers(hl, header)?;
    let [n, m] = dims[..] else {
        return Err(perr(hl, "header must be `n m`"));
    };
    if n <= 0 || m <= 0 {
        return Err(perr(hl, "n and m must be positive"));
    }
    let (n, m) = (n as usize, m as usize);
    let mut rows = |what: &str| -> Result<Vec<(usize, Vec<i64>)>, BenchError> {
        (0..n)
            .map(|j| {
                let (ln, l) = lines
                    .next()
                    .ok_or_else(|| perr(text.lines().count(), format!("missing {what} row for job {j}")))?;
                let v = numbers(ln, l)?;
                if v.len() != m {
                    return Err(perr(ln, format!("expected {m} {what} values, found {}", v.len())));
                }
                Ok((ln, v))
            })
            .collect()
    };
    let times = rows("processing time")?;
    let machines = rows("machine")?;
    if let Some((ln, _)) = lines.next() {
        return Err(perr(ln, "unexpected trailing data"));
    }
    let mut jobs = Vec::with_capacity(n);
    for ((tl, t), (ml, mach)) in times.into_iter().zip(machines) {
        let mut ops = Vec::with_capacity(m);
        for (&d, &k) in t.iter().zip(&mach) {
            if d <= 0 || d > i64::from(u32::MAX) {
                return Err(perr(tl, format!("processing time {d} must be positive")));
            }
            if k < 1 || k as usize > m {
                return Err(perr(ml, format!("machine {k} outside 1..={m}")));
            }
            ops.push((k as usize - 1, d as u32));
        }
        jobs.push(ops);
    }
    JsspInstance::new(m, jobs).map_err(|e| BenchError::Parse {
        line: None,
        msg: e.to_string(),
    })
}

/// Taillard text for an instance whose jobs all have one op per machine.
pub fn export_taillard(inst: &JsspInstance) -> String {
    let mut s = format!("{} {}\n", inst.n_jobs(), inst.n_machines());
    for ops in inst.jobs() {
        s += &ops.iter().map(|o| o.duration.to_string()).collect::<Vec<_>>().join(" ");
        s.push('\n');
    }
    for ops in inst.jobs() {
        s += &ops.iter().map(|o| (o.machine + 1).to_string()).collect::<Vec<_>>().join(" ");
        s.push('\n');
    }
    s
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SmallFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_machines: Option<usize>,
    jobs: Vec<Vec<(i64, i64)>>,
}

pub fn parse_small_instance(text: &str) -> Result<JsspInstance, BenchError> {
    let f: SmallFile = serde_json::from_str(text).map_err(|e| perr(e.line(), e.to_string()))?;
    let mut jobs = Vec::with_capacity(f.jobs.len());
    let mut top = 0usize;
    for (j, ops) in f.jobs.iter().enumerate() {
        let mut out = Vec::with_capacity(ops.len());
        for (k, &(m, d)) in ops.iter().enumerate() {
            let bad = |msg: String| BenchError::Parse {
                line: None,
                msg: format!("job {j} op {k}: {msg}"),
            };
            if m < 0 {
                return Err(bad(format!("machine {m} is negative")));
            }
            if d <= 0 || d > i64::from(u32::MAX) {
                return Err(bad(format!("duration {d} must be positive")));
            }
            top = top.max(m as usize + 1);
            out.push((m as usize, d as u32));
        }
        jobs.push(out);
    }
    JsspInstance::new(f.n_machines.unwrap_or(top), jobs).map_err(|e| BenchError::Parse {
        line: None,
        msg: e.to_string(),
    })
}

pub fn export_small_instance(inst: &JsspInstance) -> String {
    let f = SmallFile {
        n_machines: Some(inst.n_machines()),
        jobs: inst
            .jobs()
            .iter()
            .map(|ops| ops.iter().map(|o| (o.machine as i64, i64::from(o.duration))).collect())
            .collect(),
    };
    serde_json::to_string(&f).expect("serializes")
}
