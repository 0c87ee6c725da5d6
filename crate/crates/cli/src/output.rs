//! File handling: atomic writes, data-directory resolution, config-file
//! flag substitution, and spectrum reading by extension.

use std::path::{Path, PathBuf};

use specfact_core::{io as core_io, Spectrum};

use crate::{CliError, CliResult};

/// Environment variable naming the default data directory for relative
/// output paths.
pub const DATA_DIR_ENV: &str = "SPECFACT_DATA_DIR";

/// Resolve an output path against `$SPECFACT_DATA_DIR` when relative.
pub fn resolve_output(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// Write-then-rename so failures never leave partial files behind.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut tmp = path.as_os_str().to_os_string();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Read a spectrum file, dispatching on the `.json` / `.csv` extension.
pub fn read_spectrum(path: &Path) -> CliResult<Spectrum> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let spectrum = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => core_io::spectrum_from_json(&text),
        _ => core_io::spectrum_from_csv(&text),
    };
    spectrum.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Write a spectrum file, dispatching on extension.
pub fn write_spectrum(path: &Path, s: &Spectrum) -> CliResult<()> {
    let text = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => core_io::spectrum_to_json(s),
        _ => core_io::spectrum_to_csv(s),
    };
    atomic_write(path, text.as_bytes())
}

/// Merge `--config file.json` into the argument list: each key/value pair in
/// the JSON object becomes `--key value` unless the flag was given
/// explicitly. Explicit flags always win.
pub fn apply_config(mut args: Vec<String>) -> CliResult<Vec<String>> {
    let pos = match args.iter().position(|a| a == "--config") {
        Some(p) => p,
        None => return Ok(args),
    };
    if pos + 1 >= args.len() {
        return Err(CliError::Usage("--config requires a file path".into()));
    }
    let path = args.remove(pos + 1);
    args.remove(pos);

    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Input(format!("config {path}: {e}")))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("config {path}: {e}")))?;
    let map = value
        .as_object()
        .ok_or_else(|| CliError::Input(format!("config {path}: expected a JSON object")))?;

    for (key, val) in map {
        let flag = format!("--{key}");
        let given = args
            .iter()
            .any(|a| *a == flag || a.starts_with(&format!("{flag}=")));
        if given {
            continue;
        }
        let rendered = match val {
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Bool(true) => {
                args.push(flag);
                continue;
            }
            serde_json::Value::Bool(false) => continue,
            other => other.to_string(),
        };
        args.push(flag);
        args.push(rendered);
    }
    Ok(args)
}
