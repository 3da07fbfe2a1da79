//! `log.csv`: one row per update, evaluation columns empty between evaluations.

use std::path::Path;

use semexp_core::rl::LogRow;

use crate::error::{io_err, HarnessError, Result};
use crate::formats::write_file;

pub const LOG_FILE: &str = "log.csv";

pub const LOG_HEADER: [&str; 8] = [
    "update",
    "env_steps",
    "success_rate",
    "mean_intrinsic",
    "mean_return",
    "policy_loss",
    "value_loss",
    "entropy",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn encode_log(rows: &[LogRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let wrap = |e: csv::Error| HarnessError::Csv {
        path: LOG_FILE.into(),
        message: e.to_string(),
    };
    w.write_record(LOG_HEADER).map_err(wrap)?;
    for r in rows {
        w.write_record([
            r.update.to_string(),
            r.env_steps.to_string(),
            opt(r.success_rate),
            r.mean_intrinsic.to_string(),
            opt(r.mean_return),
            r.policy_loss.to_string(),
            r.value_loss.to_string(),
            r.entropy.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.into_inner().map_err(|e| HarnessError::Csv {
        path: LOG_FILE.into(),
        message: e.to_string(),
    })
}

pub fn write_log(path: &Path, rows: &[LogRow]) -> Result<()> {
    write_file(path, &encode_log(rows)?)
}

pub fn read_log(path: &Path) -> Result<Vec<LogRow>> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let fail = |message: String| HarnessError::Csv {
        path: path.to_path_buf(),
        message,
    };
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    let header = r.headers().map_err(|e| fail(e.to_string()))?;
    if header.iter().ne(LOG_HEADER) {
        return Err(fail(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| fail(e.to_string()))?;
        let line = i + 2;
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .parse::<f64>()
                .map_err(|_| fail(format!("line {line}: bad {} {:?}", LOG_HEADER[k], &rec[k])))
        };
        let opt_num = |k: usize| -> Result<Option<f64>> {
            if rec[k].is_empty() {
                Ok(None)
            } else {
                num(k).map(Some)
            }
        };
        let int = |k: usize| -> Result<u64> {
            rec[k]
                .parse::<u64>()
                .map_err(|_| fail(format!("line {line}: bad {} {:?}", LOG_HEADER[k], &rec[k])))
        };
        rows.push(LogRow {
            update: int(0)? as usize,
            env_steps: int(1)?,
            success_rate: opt_num(2)?,
            mean_intrinsic: num(3)?,
            mean_return: opt_num(4)?,
            policy_loss: num(5)?,
            value_loss: num(6)?,
            entropy: num(7)?,
        });
    }
    Ok(rows)
}
