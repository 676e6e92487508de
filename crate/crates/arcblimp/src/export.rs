//! Trajectory-log export and import.
//!
//! Two formats:
//!
//! * **Tabular** (comma-separated with a header row): one line per sample,
//!   25 numeric columns followed by 3 flag columns, in the fixed order of
//!   [`TABLE_COLUMNS`]. Numbers are printed in the shortest form that
//!   parses back to the same bits, so values survive a round trip exactly;
//!   the sample interval itself is not a column and is re-inferred from the
//!   first two timestamps on import.
//! * **Structured** (JSON): the whole [`TrajectoryLog`] including its
//!   sample interval, self-describing and bit-exact both ways. Identical
//!   logs serialize to identical bytes, so reruns of a deterministic
//!   scenario can be compared with a plain file diff.
//!
//! Logs hold only finite values (the integrator rejects non-finite states),
//! which both formats rely on.

use crate::sim::{LogRecord, TrajectoryLog};
use nalgebra::{Vector2, Vector3};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

/// Failure modes of log export and import.
#[derive(Debug, Error)]
pub enum ExportError {
    /// Filesystem failure.
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    /// Low-level tabular read/write failure.
    #[error("tabular format failure: {0}")]
    Csv(#[from] csv::Error),
    /// Structured serialization failure.
    #[error("structured format failure: {0}")]
    Json(#[from] serde_json::Error),
    /// The tabular content does not match the column contract.
    #[error("malformed table at line {line}: {detail}")]
    Malformed { line: usize, detail: String },
}

/// Column order of the tabular format: time, position, attitude, velocity,
/// body rotation rate, arm deviation, thrust, aerodynamic wrench, the
/// control energy value, the two energy counters, then the three flags.
pub const TABLE_COLUMNS: [&str; 28] = [
    "t",
    "px",
    "py",
    "pz",
    "roll",
    "pitch",
    "yaw",
    "vx",
    "vy",
    "vz",
    "wx",
    "wy",
    "wz",
    "dx",
    "dy",
    "thrust",
    "aero_fx",
    "aero_fy",
    "aero_fz",
    "aero_mx",
    "aero_my",
    "aero_mz",
    "lyapunov",
    "energy_mwh",
    "power_w",
    "flag_saturated",
    "flag_claw",
    "flag_warning",
];

/// Numeric columns preceding the flags in the tabular format.
pub const NUMERIC_COLUMNS: usize = 25;

/// Boolean flag columns closing each tabular row.
pub const FLAG_COLUMNS: usize = 3;

/// Which on-disk representation to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    /// Comma-separated table with a header row.
    Tabular,
    /// Self-describing JSON document.
    Structured,
}

fn fmt_f64(value: f64) -> String {
    // `Display` prints the fewest digits that parse back to the same bits.
    format!("{value}")
}

fn numeric_fields(record: &LogRecord) -> [f64; NUMERIC_COLUMNS] {
    [
        record.time,
        record.position.x,
        record.position.y,
        record.position.z,
        record.attitude.x,
        record.attitude.y,
        record.attitude.z,
        record.velocity.x,
        record.velocity.y,
        record.velocity.z,
        record.omega.x,
        record.omega.y,
        record.omega.z,
        record.delta.x,
        record.delta.y,
        record.thrust,
        record.aero_force.x,
        record.aero_force.y,
        record.aero_force.z,
        record.aero_moment.x,
        record.aero_moment.y,
        record.aero_moment.z,
        record.lyapunov,
        record.energy_mwh,
        record.power_w,
    ]
}

/// Writes the tabular form of a log: header row, then one row per record.
/// An empty log produces a header-only file.
pub fn write_tabular<W: Write>(log: &TrajectoryLog, writer: W) -> Result<(), ExportError> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(TABLE_COLUMNS)?;
    for record in &log.records {
        let mut row: Vec<String> = numeric_fields(record).iter().map(|v| fmt_f64(*v)).collect();
        for flag in [record.saturated, record.claw_closed, record.warning] {
            row.push(if flag { "1" } else { "0" }.to_string());
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

fn parse_f64(field: &str, column: &str, line: usize) -> Result<f64, ExportError> {
    field.trim().parse::<f64>().map_err(|_| ExportError::Malformed {
        line,
        detail: format!("column {column}: cannot parse {field:?} as a number"),
    })
}

fn parse_flag(field: &str, column: &str, line: usize) -> Result<bool, ExportError> {
    match field.trim() {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        other => Err(ExportError::Malformed {
            line,
            detail: format!("column {column}: flag must be 0/1/true/false, got {other:?}"),
        }),
    }
}

/// Reads the tabular form back into a log.
///
/// The header row must match [`TABLE_COLUMNS`] exactly. The sample interval
/// is inferred from the first two timestamps; a log with fewer than two
/// records comes back with interval 0, which downstream consumers treat as
/// "unknown".
pub fn read_tabular<R: Read>(reader: R) -> Result<TrajectoryLog, ExportError> {
    let mut input = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    {
        let headers = input.headers()?;
        let got: Vec<&str> = headers.iter().collect();
        if got != TABLE_COLUMNS {
            return Err(ExportError::Malformed {
                line: 1,
                detail: format!(
                    "header mismatch: expected {} columns starting {:?}, got {} starting {:?}",
                    TABLE_COLUMNS.len(),
                    &TABLE_COLUMNS[..3],
                    got.len(),
                    got.iter().take(3).collect::<Vec<_>>()
                ),
            });
        }
    }

    let mut records = Vec::new();
    for (index, row) in input.records().enumerate() {
        let line = index + 2; // 1-based, after the header row
        let row = row?;
        if row.len() != TABLE_COLUMNS.len() {
            return Err(ExportError::Malformed {
                line,
                detail: format!("expected {} fields, got {}", TABLE_COLUMNS.len(), row.len()),
            });
        }
        let mut numeric = [0.0; NUMERIC_COLUMNS];
        for (i, slot) in numeric.iter_mut().enumerate() {
            *slot = parse_f64(&row[i], TABLE_COLUMNS[i], line)?;
        }
        let mut flags = [false; FLAG_COLUMNS];
        for (i, slot) in flags.iter_mut().enumerate() {
            let column_index = NUMERIC_COLUMNS + i;
            *slot = parse_flag(&row[column_index], TABLE_COLUMNS[column_index], line)?;
        }
        records.push(LogRecord {
            time: numeric[0],
            position: Vector3::new(numeric[1], numeric[2], numeric[3]),
            attitude: Vector3::new(numeric[4], numeric[5], numeric[6]),
            velocity: Vector3::new(numeric[7], numeric[8], numeric[9]),
            omega: Vector3::new(numeric[10], numeric[11], numeric[12]),
            delta: Vector2::new(numeric[13], numeric[14]),
            thrust: numeric[15],
            aero_force: Vector3::new(numeric[16], numeric[17], numeric[18]),
            aero_moment: Vector3::new(numeric[19], numeric[20], numeric[21]),
            lyapunov: numeric[22],
            energy_mwh: numeric[23],
            power_w: numeric[24],
            saturated: flags[0],
            claw_closed: flags[1],
            warning: flags[2],
        });
    }

    let sample_interval = if records.len() >= 2 {
        records[1].time - records[0].time
    } else {
        0.0
    };
    Ok(TrajectoryLog {
        sample_interval,
        records,
    })
}

/// Writes the structured (JSON) form of a log.
pub fn write_structured<W: Write>(log: &TrajectoryLog, writer: W) -> Result<(), ExportError> {
    serde_json::to_writer_pretty(writer, log)?;
    Ok(())
}

/// Reads the structured form back into a log, bit-exactly.
pub fn read_structured<R: Read>(reader: R) -> Result<TrajectoryLog, ExportError> {
    Ok(serde_json::from_reader(reader)?)
}

/// Writes a log to a file in the requested format.
pub fn export_log(log: &TrajectoryLog, format: LogFormat, path: &Path) -> Result<(), ExportError> {
    let file = BufWriter::new(File::create(path)?);
    match format {
        LogFormat::Tabular => write_tabular(log, file),
        LogFormat::Structured => write_structured(log, file),
    }
}

/// Reads a log file, deciding the format by content: a document whose first
/// non-whitespace byte is `{` is structured, anything else is tabular.
pub fn import_log(path: &Path) -> Result<TrajectoryLog, ExportError> {
    let mut file = BufReader::new(File::open(path)?);
    let mut content = String::new();
    file.read_to_string(&mut content)?;
    match content.trim_start().as_bytes().first() {
        Some(b'{') => read_structured(content.as_bytes()),
        _ => read_tabular(content.as_bytes()),
    }
}
