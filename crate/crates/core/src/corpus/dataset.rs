use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, EncodedExample, RawRecord, Sentiment, PAD_INDEX};

pub fn load_dataset(path: &Path) -> Result<Vec<RawRecord>, CorpusError> {
    read_dataset(std::fs::File::open(path)?)
}

/// Reads a `label,text` CSV. Row numbers in errors are 1-based file lines,
/// so the first data row is row 2.
pub fn read_dataset<R: Read>(reader: R) -> Result<Vec<RawRecord>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let headers = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
    if headers.len() != 2 || &headers[0] != "label" || &headers[1] != "text" {
        return Err(CorpusError::MalformedRow {
            row: 1,
            message: format!("expected header `label,text`, found {headers:?}"),
        });
    }

    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let fallback_line = i as u64 + 2;
        let row = row.map_err(|e| csv_error(e, fallback_line))?;
        let line = row.position().map_or(fallback_line, |p| p.line());
        let value = &row[0];
        let label = value
            .parse::<Sentiment>()
            .map_err(|_| CorpusError::UnknownLabel {
                row: line,
                value: value.to_string(),
            })?;
        records.push(RawRecord::new(&row[1], label));
    }
    Ok(records)
}

fn csv_error(err: csv::Error, fallback_line: u64) -> CorpusError {
    let row = err.position().map_or(fallback_line, |p| p.line());
    match err.into_kind() {
        csv::ErrorKind::Io(e) => CorpusError::Io(e),
        kind => CorpusError::MalformedRow {
            row,
            message: format!("{kind:?}"),
        },
    }
}

/// Writes records as a `label,text` CSV with class names as labels.
pub fn write_dataset<W: Write>(writer: W, records: &[RawRecord]) -> Result<(), CorpusError> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| CorpusError::Io(e.into());
    w.write_record(["label", "text"]).map_err(io)?;
    for r in records {
        w.write_record([r.label.name(), r.text.as_str()])
            .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Encoded dataset CSV: `label,original_length,indices` with indices joined
/// by single spaces.
pub fn write_encoded<W: Write>(writer: W, examples: &[EncodedExample]) -> Result<(), CorpusError> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| CorpusError::Io(e.into());
    w.write_record(["label", "original_length", "indices"])
        .map_err(io)?;
    for ex in examples {
        let joined = ex
            .indices
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        w.write_record([ex.label.name(), &ex.original_length.to_string(), &joined])
            .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_encoded<R: Read>(reader: R) -> Result<Vec<EncodedExample>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(false)
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let row = row.map_err(|e| csv_error(e, line))?;
        let bad = |message: &str| CorpusError::MalformedRow {
            row: line,
            message: message.to_string(),
        };
        if row.len() != 3 {
            return Err(bad("expected 3 fields"));
        }
        let label = row[0]
            .parse::<Sentiment>()
            .map_err(|_| CorpusError::UnknownLabel {
                row: line,
                value: row[0].to_string(),
            })?;
        let original_length: usize = row[1].parse().map_err(|_| bad("bad original_length"))?;
        let indices = row[2]
            .split(' ')
            .map(|s| s.parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| bad("bad index list"))?;
        if original_length > indices.len()
            || indices[original_length..].iter().any(|&i| i != PAD_INDEX)
        {
            return Err(bad("padding does not match original_length"));
        }
        out.push(EncodedExample {
            indices,
            label,
            original_length,
        });
    }
    Ok(out)
}

pub fn class_counts<'a, I>(labels: I) -> [usize; Sentiment::COUNT]
where
    I: IntoIterator<Item = &'a Sentiment>,
{
    let mut counts = [0; Sentiment::COUNT];
    for l in labels {
        counts[l.index()] += 1;
    }
    counts
}

/// Per-class shuffled split. Each present class contributes
/// `round(n * test_fraction)` examples to the test side, clamped to
/// `[1, n - 1]`; classes absent from the input are skipped. Both sides keep
/// the input's relative order.
pub fn stratified_split<T, F>(
    records: &[T],
    label_of: F,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>), CorpusError>
where
    T: Clone,
    F: Fn(&T) -> Sentiment,
{
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(CorpusError::InvalidFraction(test_fraction));
    }
    let mut by_class: [Vec<usize>; Sentiment::COUNT] = Default::default();
    for (i, r) in records.iter().enumerate() {
        by_class[label_of(r).index()].push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_test = vec![false; records.len()];
    for (class, members) in Sentiment::ALL.iter().zip(by_class.iter_mut()) {
        let n = members.len();
        match n {
            0 => continue,
            1 => return Err(CorpusError::ClassTooSmall(*class)),
            _ => {}
        }
        let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
        members.shuffle(&mut rng);
        for &i in &members[..n_test] {
            in_test[i] = true;
        }
    }

    let mut train = Vec::with_capacity(records.len());
    let mut test = Vec::new();
    for (r, &t) in records.iter().zip(&in_test) {
        if t {
            test.push(r.clone());
        } else {
            train.push(r.clone());
        }
    }
    Ok((train, test))
}
