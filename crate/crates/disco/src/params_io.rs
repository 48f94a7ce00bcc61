//! Text format for trained parameters, version 1:
//!
//! ```text
//! disco-params v1
//! config_hash <hex>
//! x_dim 1
//! y_dim 1
//! z_dim 4
//! noise true
//! encoder 32
//! decoder 32 32
//! count 2273
//! <one value per line, `count` lines>
//! ```
//!
//! Values are written in shortest round-trip form, so a save/load cycle is
//! exact. Layer order and layout follow [`NetworkParams`].

use std::fmt::Write as _;
use std::path::Path;

use disco_core::{NetConfig, NetworkParams};

use crate::error::{CliError, CliResult};

const MAGIC: &str = "disco-params v1";

pub fn params_to_string(params: &NetworkParams, config_hash: &str) -> String {
    let c = params.config();
    let join = |v: &[usize]| v.iter().map(|w| format!(" {w}")).collect::<String>();
    let mut s = String::new();
    writeln!(s, "{MAGIC}").unwrap();
    writeln!(s, "config_hash {config_hash}").unwrap();
    writeln!(s, "x_dim {}", c.x_dim).unwrap();
    writeln!(s, "y_dim {}", c.y_dim).unwrap();
    writeln!(s, "z_dim {}", c.z_dim).unwrap();
    writeln!(s, "noise {}", c.noise_enabled).unwrap();
    writeln!(s, "encoder{}", join(&c.encoder_widths)).unwrap();
    writeln!(s, "decoder{}", join(&c.decoder_widths)).unwrap();
    writeln!(s, "count {}", params.len()).unwrap();
    for v in params.flat() {
        writeln!(s, "{v}").unwrap();
    }
    s
}

/// Parsed parameters and the config hash recorded with them.
pub fn params_from_str(text: &str) -> CliResult<(NetworkParams, String)> {
    let bad = |line: usize, msg: &str| CliError::Data(format!("parameter file line {line}: {msg}"));
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut next = |key: &str| -> CliResult<(usize, Vec<String>)> {
        let (n, line) = lines
            .next()
            .ok_or_else(|| bad(0, &format!("missing `{key}`")))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(bad(n, &format!("expected `{key}`")));
        }
        Ok((n, parts.map(str::to_owned).collect()))
    };
    let one = |(n, v): (usize, Vec<String>)| -> CliResult<(usize, String)> {
        match <[String; 1]>::try_from(v) {
            Ok([s]) => Ok((n, s)),
            Err(_) => Err(bad(n, "expected exactly one value")),
        }
    };
    let usize_of = |(n, s): (usize, String)| {
        s.parse::<usize>()
            .map_err(|_| bad(n, "not an unsigned integer"))
    };
    let widths = |(n, v): (usize, Vec<String>)| -> CliResult<Vec<usize>> {
        v.iter()
            .map(|s| s.parse::<usize>().map_err(|_| bad(n, "bad layer width")))
            .collect()
    };

    let (n, header) = next("disco-params")?;
    if header != ["v1"] {
        return Err(bad(n, "unsupported format version"));
    }
    let (_, hash) = one(next("config_hash")?)?;
    let x_dim = usize_of(one(next("x_dim")?)?)?;
    let y_dim = usize_of(one(next("y_dim")?)?)?;
    let z_dim = usize_of(one(next("z_dim")?)?)?;
    let (n, noise) = one(next("noise")?)?;
    let noise_enabled = noise
        .parse::<bool>()
        .map_err(|_| bad(n, "noise must be true or false"))?;
    let encoder_widths = widths(next("encoder")?)?;
    let decoder_widths = widths(next("decoder")?)?;
    let (count_line, count) = one(next("count")?)?;
    let count = usize_of((count_line, count))?;
    let config = NetConfig {
        x_dim,
        y_dim,
        z_dim,
        encoder_widths,
        decoder_widths,
        noise_enabled,
    };
    config.validate()?;
    if config.param_count() != count {
        return Err(bad(
            count_line,
            &format!(
                "count {count} does not match the architecture ({})",
                config.param_count()
            ),
        ));
    }
    let mut flat = Vec::with_capacity(count);
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        let v = line.parse::<f64>().ok().filter(|v| v.is_finite());
        flat.push(v.ok_or_else(|| bad(n, "not a finite number"))?);
    }
    if flat.len() != count {
        return Err(bad(
            count_line,
            &format!("expected {count} values, found {}", flat.len()),
        ));
    }
    Ok((NetworkParams::from_flat(&config, flat)?, hash))
}

pub fn save_params(path: &Path, params: &NetworkParams, config_hash: &str) -> CliResult<()> {
    std::fs::write(path, params_to_string(params, config_hash)).map_err(|e| CliError::io(path, e))
}

pub fn load_params(path: &Path) -> CliResult<(NetworkParams, String)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    params_from_str(&text).map_err(|e| match e {
        CliError::Data(msg) => CliError::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}
