//! `key = value` config files.
//!
//! A config file is expanded into `--key value` arguments inserted right
//! after the subcommand name, so flags given on the command line win. Boolean
//! switches are written `key = true`. The resolved configuration of every run
//! is written back in the same format and can be replayed with `--config`.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::{ArgMatches, Command};

/// Arguments that never affect outputs and are left out of emitted configs.
const NOT_RECORDED: [&str; 4] = ["config", "threads", "verbose", "quiet"];

pub fn parse_config(text: &str, origin: &Path) -> Result<Vec<(String, String)>> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected 'key = value'", origin.display(), i + 1);
        };
        let key = key.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            bail!("{}:{}: invalid key '{key}'", origin.display(), i + 1);
        }
        entries.push((key.replace('_', "-"), value.trim().to_owned()));
    }
    Ok(entries)
}

/// Returns the path given to `--config`, if any.
fn config_path(args: &[OsString]) -> Result<Option<OsString>> {
    let mut iter = args.iter();
    while let Some(a) = iter.next() {
        if a == "--config" {
            return match iter.next() {
                Some(p) => Ok(Some(p.clone())),
                None => bail!("--config needs a path"),
            };
        }
        if let Some(p) = a.to_str().and_then(|s| s.strip_prefix("--config=")) {
            return Ok(Some(p.into()));
        }
    }
    Ok(None)
}

/// Splices config file entries into `args` after the subcommand token.
pub fn expand_args(args: Vec<OsString>, subcommands: &[&str]) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args)? else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let entries = parse_config(&text, path)?;
    let Some(pos) = args
        .iter()
        .position(|a| a.to_str().is_some_and(|s| subcommands.contains(&s)))
    else {
        return Ok(args);
    };
    let mut injected = Vec::new();
    for (key, value) in entries {
        match value.as_str() {
            "true" => injected.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                injected.push(format!("--{key}").into());
                injected.push(value.into());
            }
        }
    }
    let mut out = args;
    out.splice(pos + 1..pos + 1, injected);
    Ok(out)
}

/// Resolved values of every recorded argument of `cmd`, in definition order.
pub fn resolved(cmd: &Command, matches: &ArgMatches) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for arg in cmd.get_arguments() {
        let id = arg.get_id().as_str();
        if NOT_RECORDED.contains(&id) {
            continue;
        }
        let Ok(Some(raw)) = matches.try_get_raw(id) else {
            continue;
        };
        let values: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
        out.push((id.replace('_', "-"), values.join(",")));
    }
    out
}

pub fn write_config(
    path: impl AsRef<Path>,
    subcommand: &str,
    entries: &[(String, String)],
) -> Result<()> {
    let path = path.as_ref();
    let mut text = format!("# greed {subcommand}\n");
    for (k, v) in entries {
        text.push_str(&format!("{k} = {v}\n"));
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_entries() {
        let e = parse_config("# c\n\ntest_frac = 0.3\nout=dir\n", Path::new("c")).unwrap();
        assert_eq!(
            e,
            vec![
                ("test-frac".into(), "0.3".into()),
                ("out".into(), "dir".into())
            ]
        );
        assert!(parse_config("nonsense\n", Path::new("c")).is_err());
    }

    #[test]
    fn flags_follow_config_entries() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.config");
        fs::write(&cfg, "seed = 3\ngradcheck = true\nresume = false\n").unwrap();
        let args = os(&[
            "greed",
            "--config",
            cfg.to_str().unwrap(),
            "train-direction",
            "--seed",
            "9",
        ]);
        let out = expand_args(args, &["train-direction"]).unwrap();
        let tail: Vec<_> = out[4..].iter().map(|s| s.to_str().unwrap()).collect();
        assert_eq!(tail, ["--seed", "3", "--gradcheck", "--seed", "9"]);
    }
}
