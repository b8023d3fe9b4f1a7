//! `--config` files: one `key=value` per line, `#` comments, keys named
//! like the long flags (`data-dir` or `data_dir`). Each value is exported as
//! the flag's `SPIXEL_*` variable unless the flag or the variable is
//! already set, which gives flag > environment > file > default.

use std::collections::BTreeSet;
use std::ffi::{OsStr, OsString};
use std::path::{Path, PathBuf};

use spixel::Error;

fn syntax(path: &Path, line: usize, text: &str) -> Error {
    Error::Argument(format!("{}:{line}: expected key=value, got {text:?}", path.display()))
}

pub fn env_name(key: &str) -> String {
    format!("SPIXEL_{}", key.replace('-', "_").to_uppercase())
}

/// Every long flag of the command and its subcommands.
fn known_flags(cmd: &clap::Command) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = cmd.get_arguments().filter_map(|a| a.get_long().map(str::to_string)).collect();
    for sub in cmd.get_subcommands() {
        out.extend(known_flags(sub));
    }
    out
}

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    std::env::var_os("SPIXEL_CONFIG").map(PathBuf::from)
}

fn flag_given(argv: &[OsString], key: &str) -> bool {
    let flag = format!("--{key}");
    let with_value = format!("--{key}=");
    argv.iter().any(|a| {
        let s = a.to_string_lossy();
        s == flag || s.starts_with(&with_value)
    })
}

/// Parsed `(key, value, line)` entries.
pub fn parse(path: &Path, text: &str) -> Result<Vec<(String, String, usize)>, Error> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| syntax(path, i + 1, line))?;
        let key = k.trim().replace('_', "-").to_lowercase();
        if key.is_empty() {
            return Err(syntax(path, i + 1, line));
        }
        out.push((key, v.trim().to_string(), i + 1));
    }
    Ok(out)
}

pub fn inject(argv: &[OsString], cmd: &clap::Command) -> Result<(), Error> {
    let Some(path) = config_path(argv) else {
        return Ok(());
    };
    let text = std::fs::read_to_string(&path).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    let known = known_flags(cmd);
    for (key, value, line) in parse(&path, &text)? {
        if !known.contains(&key) || key == "config" {
            return Err(Error::Argument(format!("{}:{line}: unknown key {key:?}", path.display())));
        }
        let var = env_name(&key);
        if flag_given(argv, &key) || std::env::var_os(&var).is_some() {
            continue;
        }
        // still single-threaded: nothing else reads the environment yet
        std::env::set_var(&var, OsStr::new(&value));
    }
    Ok(())
}
