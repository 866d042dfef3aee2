//! Logged-feedback CSV: `round,context_0..context_{d-1},action,reward,propensity`.

use std::io::{Read, Write};
use std::path::Path;

use crate::offpolicy::LoggedInteraction;
use crate::{Result, SimError};

fn csv_error(e: csv::Error) -> SimError {
    SimError::Config(format!("logged feedback: {e}"))
}

pub fn header(dim_context: usize) -> Vec<String> {
    let mut h = vec!["round".to_string()];
    h.extend((0..dim_context).map(|j| format!("context_{j}")));
    h.extend(["action", "reward", "propensity"].map(String::from));
    h
}

pub fn write_logged_feedback<W: Write>(out: W, rows: &[LoggedInteraction]) -> Result<()> {
    let dim = rows.first().map_or(0, |r| r.context.len());
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(header(dim)).map_err(csv_error)?;
    for row in rows {
        if row.context.len() != dim {
            return Err(SimError::DimensionMismatch { expected: dim, got: row.context.len() });
        }
        let mut record = Vec::with_capacity(dim + 4);
        record.push(row.round_index.to_string());
        record.extend(row.context.iter().map(f64::to_string));
        record.push(row.action.to_string());
        record.push(row.reward.to_string());
        record.push(row.logged_propensity.to_string());
        w.write_record(&record).map_err(csv_error)?;
    }
    w.flush().map_err(|e| SimError::Config(format!("logged feedback: {e}")))
}

pub fn read_logged_feedback<R: Read>(input: R) -> Result<Vec<LoggedInteraction>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(input);
    let columns = reader.headers().map_err(csv_error)?.clone();
    let dim = columns.len().checked_sub(4).ok_or_else(|| SimError::Config("logged feedback: too few columns".into()))?;
    if columns.iter().collect::<Vec<_>>() != header(dim) {
        return Err(SimError::Config(format!(
            "logged feedback: header must be {}",
            header(dim).join(",")
        )));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let field = |i: usize| &record[i];
        let bad = |i: usize| SimError::Config(format!("logged feedback row {line}: bad {} \"{}\"", &columns[i], &record[i]));
        let context = (1..=dim)
            .map(|i| field(i).parse::<f64>().map_err(|_| bad(i)))
            .collect::<Result<Vec<_>>>()?;
        let reward: u8 = field(dim + 2).parse().map_err(|_| bad(dim + 2))?;
        if reward > 1 {
            return Err(SimError::InvalidReward(reward));
        }
        rows.push(LoggedInteraction {
            round_index: field(0).parse().map_err(|_| bad(0))?,
            context,
            action: field(dim + 1).parse().map_err(|_| bad(dim + 1))?,
            reward,
            logged_propensity: field(dim + 3).parse().map_err(|_| bad(dim + 3))?,
        });
    }
    Ok(rows)
}

pub fn read_logged_feedback_file(path: &Path) -> Result<Vec<LoggedInteraction>> {
    let file = std::fs::File::open(path).map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
    read_logged_feedback(std::io::BufReader::new(file))
}
