//! Deterministic CSV and report writing.
//!
//! CSVs use '.' decimal separator, no locale, a single header row and a
//! fixed column order; floats print in shortest round-trip form. Identical
//! runs produce byte-identical files. Wall-clock timing goes only to the
//! summary, never into CSVs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::sim::StepRecord;

/// Requested output channels of a scenario run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    JointForces,
    Violations,
    Energies,
    Diagnostics,
}

pub const ALL_CHANNELS: [Channel; 4] = [
    Channel::JointForces,
    Channel::Violations,
    Channel::Energies,
    Channel::Diagnostics,
];

impl Channel {
    pub fn file_name(self) -> &'static str {
        match self {
            Channel::JointForces => "joint_forces.csv",
            Channel::Violations => "violations.csv",
            Channel::Energies => "energies.csv",
            Channel::Diagnostics => "diagnostics.csv",
        }
    }
}

fn fmt_f(x: f64) -> String {
    format!("{x:?}")
}

/// Render one channel of a record stream as CSV text.
pub fn channel_csv(channel: Channel, records: &[StepRecord]) -> String {
    let mut out = String::new();
    match channel {
        Channel::JointForces => {
            out.push_str("time");
            if let Some(first) = records.first() {
                for f in &first.forces {
                    for c in ["fx", "fy", "fz", "tx", "ty", "tz"] {
                        let _ = write!(out, ",{}.{}", f.joint, c);
                    }
                }
            }
            out.push('\n');
            for r in records {
                out.push_str(&fmt_f(r.time));
                for f in &r.forces {
                    for v in [
                        f.force_child.x,
                        f.force_child.y,
                        f.force_child.z,
                        f.torque_child.x,
                        f.torque_child.y,
                        f.torque_child.z,
                    ] {
                        out.push(',');
                        out.push_str(&fmt_f(v));
                    }
                }
                out.push('\n');
            }
        }
        Channel::Violations => {
            out.push_str("time");
            if let Some(first) = records.first() {
                for j in &first.violation.joints {
                    let _ = write!(out, ",{}.pos,{}.ang", j.joint, j.joint);
                }
            }
            out.push_str(",max_pos,rms_pos,max_ang,rms_ang\n");
            for r in records {
                out.push_str(&fmt_f(r.time));
                for j in &r.violation.joints {
                    let _ = write!(out, ",{},{}", fmt_f(j.position_error), fmt_f(j.angle_error));
                }
                let _ = write!(
                    out,
                    ",{},{},{},{}\n",
                    fmt_f(r.violation.max_position_error),
                    fmt_f(r.violation.rms_position_error),
                    fmt_f(r.violation.max_angle_error),
                    fmt_f(r.violation.rms_angle_error)
                );
            }
        }
        Channel::Energies => {
            out.push_str("time,kinetic,potential,total\n");
            for r in records {
                let _ = write!(
                    out,
                    "{},{},{},{}\n",
                    fmt_f(r.time),
                    fmt_f(r.kinetic),
                    fmt_f(r.potential),
                    fmt_f(r.kinetic + r.potential)
                );
            }
        }
        Channel::Diagnostics => {
            out.push_str("time,iterations,residual,rank,dropped,singular\n");
            for r in records {
                let _ = write!(
                    out,
                    "{},{},{},{},{},{}\n",
                    fmt_f(r.time),
                    r.diagnostics.iterations_used,
                    fmt_f(r.diagnostics.residual),
                    r.diagnostics.rank,
                    r.diagnostics.dropped_rows.len(),
                    u8::from(r.diagnostics.singular_flag)
                );
            }
        }
    }
    out
}

/// Write requested channels under `dir`, returning the file list.
pub fn write_channels(
    dir: &Path,
    channels: &[Channel],
    records: &[StepRecord],
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for &ch in channels {
        let path = dir.join(ch.file_name());
        std::fs::write(&path, channel_csv(ch, records))?;
        files.push(path);
    }
    Ok(files)
}

/// Deterministic run manifest: configuration echo and produced files.
pub fn write_manifest(dir: &Path, lines: &[(String, String)], files: &[PathBuf]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut out = String::new();
    for (k, v) in lines {
        let _ = writeln!(out, "{k} = {v}");
    }
    for f in files {
        let name = f.file_name().map(|s| s.to_string_lossy().to_string());
        if let Some(name) = name {
            let _ = writeln!(out, "file = {name}");
        }
    }
    let path = dir.join("manifest.txt");
    std::fs::write(&path, out)?;
    Ok(path)
}
