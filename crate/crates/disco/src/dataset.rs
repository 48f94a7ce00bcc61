//! Datasets as plain numeric CSV: one example per row, `x` columns then `y`
//! columns. Lines starting with `#` are skipped.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use disco_core::{Example, Tensor};

use crate::error::{CliError, CliResult};

pub fn load_csv(path: &Path, x_dim: usize, y_dim: usize) -> CliResult<Vec<Example>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_csv(file, x_dim, y_dim).map_err(|e| match e {
        CliError::Data(msg) => CliError::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn read_csv<R: std::io::Read>(input: R, x_dim: usize, y_dim: usize) -> CliResult<Vec<Example>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let width = x_dim + y_dim;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Data(format!("unreadable CSV: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != width {
            return Err(CliError::Data(format!(
                "schema mismatch on line {line}: expected {width} fields (x_dim {x_dim} + y_dim {y_dim}), found {}",
                record.len()
            )));
        }
        let values = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        CliError::Data(format!("line {line}: `{field}` is not a finite number"))
                    })
            })
            .collect::<CliResult<Vec<f64>>>()?;
        let x = Tensor::vector(values[..x_dim].to_vec())?;
        let y = Tensor::vector(values[x_dim..].to_vec())?;
        out.push(Example::new(x, y));
    }
    Ok(out)
}

pub fn write_csv(path: &Path, data: &[Example], config_hash: Option<&str>) -> CliResult<()> {
    let io = |e| CliError::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    if let Some(hash) = config_hash {
        writeln!(w, "# config_hash={hash}").map_err(io)?;
    }
    if let Some(first) = data.first() {
        let names: Vec<String> = (0..first.x.len())
            .map(|i| format!("x{i}"))
            .chain((0..first.y.len()).map(|i| format!("y{i}")))
            .collect();
        writeln!(w, "# {}", names.join(",")).map_err(io)?;
    }
    for ex in data {
        let row: Vec<String> =
            ex.x.data()
                .iter()
                .chain(ex.y.data())
                .map(|v| v.to_string())
                .collect();
        writeln!(w, "{}", row.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}
