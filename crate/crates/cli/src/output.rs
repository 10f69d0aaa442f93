use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use crate::CliError;

/// Reads a file, or stdin for `-`.
pub fn read_input(path: &str, flag: &str) -> Result<String, CliError> {
    let mut text = String::new();
    if path == "-" {
        io::stdin()
            .read_to_string(&mut text)
            .map_err(|e| CliError::validation(format!("{flag} -: {e}")))?;
    } else {
        text = fs::read_to_string(path).map_err(|e| CliError::validation(format!("{flag} {path}: {e}")))?;
    }
    Ok(text)
}

/// Output directory that refuses to replace existing files unless forced.
pub struct OutDir {
    root: PathBuf,
    force: bool,
}

impl OutDir {
    pub fn new(root: &Path, force: bool) -> Result<Self, CliError> {
        if root.exists() && !root.is_dir() {
            return Err(CliError::validation(format!("--out {}: not a directory", root.display())));
        }
        fs::create_dir_all(root).map_err(|e| CliError::other(format!("--out {}: {e}", root.display())))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            force,
        })
    }

    /// Fails before anything is written if one of `names` already exists.
    pub fn claim(&self, names: &[String]) -> Result<(), CliError> {
        if self.force {
            return Ok(());
        }
        for n in names {
            let p = self.root.join(n);
            if p.exists() {
                return Err(CliError::validation(format!(
                    "--out: {} exists; pass --force to overwrite",
                    p.display()
                )));
            }
        }
        Ok(())
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let p = self.root.join(name);
        fs::write(&p, contents).map_err(|e| CliError::other(format!("--out {}: {e}", p.display())))
    }
}

pub fn stdout(text: &str) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::other(format!("stdout: {e}")))
}

/// File-name fragment for a label; `-1` and `+1` stay distinct.
pub fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| match c {
            '+' => "p".to_string(),
            '-' => "m".to_string(),
            c if c.is_ascii_alphanumeric() || c == '_' => c.to_string(),
            _ => "_".to_string(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs_keep_signs_apart() {
        assert_eq!(slug("-1"), "m1");
        assert_eq!(slug("+1"), "p1");
        assert_eq!(slug("b0"), "b0");
        assert_eq!(slug("a b"), "a_b");
    }
}
