//! `--config FILE`: extra flags read from a file; the command line wins
//! on conflict.

use std::ffi::OsString;
use std::path::Path;

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

/// Flags in a config file: whitespace separated, `#` starts a comment.
pub fn parse_config(text: &str) -> Vec<OsString> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split_whitespace())
        .map(OsString::from)
        .collect()
}

/// Rewrites `prog [pre] sub [post]` as `prog sub [config] [pre] [post]`.
/// Global flags are accepted after the subcommand, and later flags override
/// earlier ones, so anything on the command line beats the file.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path)).map_err(|e| format!("{}: {e}", path.to_string_lossy()))?;
    let extra = parse_config(&text);
    let mut it = args.into_iter();
    let prog = it.next().into_iter();
    let mut pre = Vec::new();
    let mut sub = None;
    let mut takes_value = false;
    for a in it.by_ref() {
        let s = a.to_string_lossy().into_owned();
        if takes_value {
            takes_value = false;
        } else if s.starts_with("--") {
            takes_value = !s.contains('=') && s != "--json";
        } else {
            sub = Some(a);
            break;
        }
        pre.push(a);
    }
    Ok(prog.chain(sub).chain(extra).chain(pre).chain(it).collect())
}
