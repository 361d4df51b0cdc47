//! `key = value` config files merged under command-line flags.
//!
//! Keys before any `[section]` header apply to every subcommand; keys under
//! `[name]` apply only to subcommand `name`. Each key becomes `--key value`
//! unless the flag already appears on the command line. `true` turns a key
//! into a bare switch and `false` drops it.

use std::path::Path;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub section: Option<String>,
    pub key: String,
    pub value: String,
}

pub fn parse(text: &str) -> Result<Vec<Entry>, CliError> {
    let mut section = None;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = Some(name.trim().to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {}: expected `key = value`, got `{line}`", i + 1)))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(CliError::Config(format!("config line {}: bad key `{key}`", i + 1)));
        }
        let value = value.trim().trim_matches('"').to_string();
        out.push(Entry { line: i + 1, section: section.clone(), key, value });
    }
    Ok(out)
}

fn flag_present(args: &[String], key: &str) -> bool {
    let flag = format!("--{key}");
    let eq = format!("--{key}=");
    args.iter().any(|a| a == &flag || a.starts_with(&eq))
}

/// Finds `--config FILE` in `argv` and appends the file's entries for the
/// chosen subcommand as flags.
pub fn merge(mut argv: Vec<String>) -> Result<Vec<String>, CliError> {
    let pos = argv.iter().position(|a| a == "--config" || a.starts_with("--config="));
    let Some(pos) = pos else { return Ok(argv) };
    let path = if let Some(p) = argv[pos].strip_prefix("--config=") {
        let p = p.to_string();
        argv.remove(pos);
        p
    } else {
        let p = argv.get(pos + 1).cloned().ok_or_else(|| CliError::Config("--config needs a file".into()))?;
        argv.drain(pos..pos + 2);
        p
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| CliError::Config(format!("cannot read config `{path}`: {e}")))?;
    let subcommand = argv.iter().skip(1).find(|a| !a.starts_with('-')).cloned();
    for e in parse(&text)? {
        if e.section.is_some() && e.section != subcommand {
            continue;
        }
        if flag_present(&argv, &e.key) {
            continue;
        }
        match e.value.as_str() {
            "true" => argv.push(format!("--{}", e.key)),
            "false" => {}
            v => {
                argv.push(format!("--{}", e.key));
                argv.push(v.to_string());
            }
        }
    }
    Ok(argv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn sections_and_comments() {
        let e = parse("seed = 3 # master\n\n[dims]\nsystem = prefix:8\ntree = true\n").unwrap();
        assert_eq!(e.len(), 3);
        assert_eq!(e[0].section, None);
        assert_eq!(e[1].section.as_deref(), Some("dims"));
        assert_eq!(e[1].value, "prefix:8");
    }

    #[test]
    fn malformed_line_names_position() {
        let err = parse("seed = 1\noops\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn flags_win() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.conf");
        std::fs::write(&path, "seed = 5\n[dims]\nsystem = prefix:4\ntree = true\n[disc]\nrounds = 8\n").unwrap();
        let argv = args(&format!("advstream dims --system prefix:8 --config {}", path.display()));
        let merged = merge(argv).unwrap();
        assert_eq!(merged, args("advstream dims --system prefix:8 --seed 5 --tree"));
    }

    #[test]
    fn underscores_become_dashes() {
        let e = parse("attack_rounds = 5").unwrap();
        assert_eq!(e[0].key, "attack-rounds");
    }
}
