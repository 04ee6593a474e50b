//! Margin and spin file formats.
//!
//! Margins travel as long-format CSV with header `obs,group,margin`, one row
//! per observation/group pair. Raw spin files use `obs,group,spins` with a
//! `+`/`-` character per voter; on ingest they are reduced to margins, which
//! is all any estimator needs.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use curie_weiss::model::VotingSample;

use crate::CliError;

pub fn write_margins(path: &Path, sample: &VotingSample) -> Result<(), CliError> {
    let file = std::fs::File::create(path)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", path.display())))?;
    let mut out = BufWriter::new(file);
    let io_err = |e: std::io::Error| CliError::input(format!("write {}: {e}", path.display()));
    writeln!(out, "obs,group,margin").map_err(io_err)?;
    for (t, row) in sample.margins().iter().enumerate() {
        for (g, &s) in row.iter().enumerate() {
            writeln!(out, "{t},{g},{s}").map_err(io_err)?;
        }
    }
    out.flush().map_err(io_err)
}

pub fn write_spins(path: &Path, spins: &[Vec<Vec<i8>>]) -> Result<(), CliError> {
    let file = std::fs::File::create(path)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", path.display())))?;
    let mut out = BufWriter::new(file);
    let io_err = |e: std::io::Error| CliError::input(format!("write {}: {e}", path.display()));
    writeln!(out, "obs,group,spins").map_err(io_err)?;
    for (t, row) in spins.iter().enumerate() {
        for (g, voters) in row.iter().enumerate() {
            let encoded: String = voters
                .iter()
                .map(|&s| if s > 0 { '+' } else { '-' })
                .collect();
            writeln!(out, "{t},{g},{encoded}").map_err(io_err)?;
        }
    }
    out.flush().map_err(io_err)
}

/// Read a margins or raw-spins CSV into a validated sample. The header
/// decides the format; spin rows are reduced to margins on the spot.
pub fn read_sample(path: &Path, group_sizes: &[u64]) -> Result<VotingSample, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::input(format!("cannot open {}: {e}", path.display())))?;
    let reader = std::io::BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let header = match lines.next() {
        Some((_, Ok(h))) => h.trim_end().to_string(),
        Some((_, Err(e))) => return Err(CliError::input(format!("{}: {e}", path.display()))),
        None => return Err(CliError::input(format!("{}: empty file", path.display()))),
    };
    let spin_format = match header.as_str() {
        "obs,group,margin" => false,
        "obs,group,spins" => true,
        other => {
            return Err(CliError::input(format!(
                "{}: unrecognized header `{other}` (expected `obs,group,margin` or `obs,group,spins`)",
                path.display()
            )))
        }
    };

    let m = group_sizes.len();
    // cells[obs][group], filled as rows arrive (any order accepted)
    let mut cells: Vec<Vec<Option<i64>>> = Vec::new();
    for (line_no, line) in lines {
        let row = line.map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        if row.trim().is_empty() {
            continue;
        }
        let err = |msg: String| {
            CliError::input(format!("{} line {}: {msg}", path.display(), line_no + 1))
        };
        let mut fields = row.trim_end().splitn(3, ',');
        let obs: usize = fields
            .next()
            .ok_or_else(|| err("missing obs".into()))?
            .parse()
            .map_err(|e| err(format!("bad obs: {e}")))?;
        let group: usize = fields
            .next()
            .ok_or_else(|| err("missing group".into()))?
            .parse()
            .map_err(|e| err(format!("bad group: {e}")))?;
        let payload = fields.next().ok_or_else(|| err("missing value".into()))?;
        if group >= m {
            return Err(err(format!("group {group} out of range (model has {m} groups)")));
        }
        let margin = if spin_format {
            let mut sum: i64 = 0;
            for c in payload.chars() {
                match c {
                    '+' => sum += 1,
                    '-' => sum -= 1,
                    other => return Err(err(format!("bad spin character `{other}`"))),
                }
            }
            if payload.len() as u64 != group_sizes[group] {
                return Err(err(format!(
                    "{} spins for group of size {}",
                    payload.len(),
                    group_sizes[group]
                )));
            }
            sum
        } else {
            let s: i64 = payload
                .parse()
                .map_err(|e| err(format!("bad margin: {e}")))?;
            let n = group_sizes[group] as i64;
            if s.abs() > n || (s - n) % 2 != 0 {
                return Err(err(format!(
                    "margin {s} invalid for group size {n} (range or parity)"
                )));
            }
            s
        };
        if obs >= cells.len() {
            cells.resize_with(obs + 1, || vec![None; m]);
        }
        if cells[obs][group].is_some() {
            return Err(err(format!("duplicate cell for obs {obs}, group {group}")));
        }
        cells[obs][group] = Some(margin);
    }
    if cells.is_empty() {
        return Err(CliError::input(format!("{}: no data rows", path.display())));
    }
    let mut margins = Vec::with_capacity(cells.len());
    for (t, row) in cells.into_iter().enumerate() {
        let mut complete = Vec::with_capacity(m);
        for (g, cell) in row.into_iter().enumerate() {
            complete.push(cell.ok_or_else(|| {
                CliError::input(format!(
                    "{}: missing margin for obs {t}, group {g}",
                    path.display()
                ))
            })?);
        }
        margins.push(complete);
    }
    VotingSample::new(group_sizes.to_vec(), margins).map_err(CliError::Lib)
}
