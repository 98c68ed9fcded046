use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::distill::{EpochStats, TrainHistory};
use crate::error::{Error, Result};

const HEADER: &str = "epoch,train_mse,val_mse,val_normalized";
const FOOTER: &str = "chance_mse";

/// Values use the shortest decimal that parses back to the same `f64`.
pub fn write_history_csv<W: Write>(history: &TrainHistory, out: W) -> Result<()> {
    if history.epochs.is_empty() {
        return Err(Error::InvalidConfig("cannot export an empty training history".into()));
    }
    let mut out = BufWriter::new(out);
    writeln!(out, "{HEADER}")?;
    for e in &history.epochs {
        writeln!(out, "{},{},{},{}", e.epoch, e.train_mse, e.val_mse, e.val_normalized)?;
    }
    writeln!(out, "{FOOTER},{}", history.chance_mse)?;
    out.flush()?;
    Ok(())
}

pub fn export_history_csv(history: &TrainHistory, path: impl AsRef<Path>) -> Result<()> {
    write_history_csv(history, std::fs::File::create(path)?)
}

fn bad(line: usize, message: impl Into<String>) -> Error {
    Error::Schema { line, message: message.into() }
}

fn number<T: std::str::FromStr>(line: usize, field: &str) -> Result<T> {
    field.trim().parse().map_err(|_| bad(line, format!("bad number `{field}`")))
}

pub fn parse_history_csv<R: BufRead>(input: R) -> Result<TrainHistory> {
    let mut lines = input.lines().enumerate();
    let header = lines.next().map(|(_, l)| l).transpose()?;
    if header.as_deref().map(str::trim) != Some(HEADER) {
        return Err(bad(1, format!("expected header `{HEADER}`")));
    }
    let mut epochs = Vec::new();
    let mut chance = None;
    for (i, line) in lines {
        let line = line?;
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        if chance.is_some() {
            return Err(bad(n, "data after footer"));
        }
        let fields: Vec<&str> = line.split(',').collect();
        match fields.as_slice() {
            [FOOTER, v] => chance = Some(number(n, v)?),
            [epoch, train, val, norm] => epochs.push(EpochStats {
                epoch: number(n, epoch)?,
                train_mse: number(n, train)?,
                val_mse: number(n, val)?,
                val_normalized: number(n, norm)?,
            }),
            _ => return Err(bad(n, "expected 4 fields")),
        }
    }
    let chance_mse = chance.ok_or_else(|| bad(0, "missing chance_mse footer"))?;
    let best_epoch = TrainHistory::argmin_val(&epochs).ok_or_else(|| bad(0, "no epoch rows"))?;
    Ok(TrainHistory { epochs, best_epoch, chance_mse })
}

pub fn read_history_csv(path: impl AsRef<Path>) -> Result<TrainHistory> {
    parse_history_csv(BufReader::new(std::fs::File::open(path)?))
}
