//! File naming and crash-safe writes.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use schelling_core::{Fraction, ModelParams};

/// Writes `bytes` to `dir/name.partial`, then renames to `dir/name`. A failed
/// write leaves the `.partial` file behind.
pub fn write_artifact(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let dest = dir.join(name);
    let partial = dir.join(format!("{name}.partial"));
    fs::write(&partial, bytes).with_context(|| format!("writing {}", partial.display()))?;
    fs::rename(&partial, &dest).with_context(|| format!("renaming {}", partial.display()))?;
    Ok(dest)
}

/// Marks an artifact as incomplete by moving it to `name.partial`.
pub fn mark_partial(path: &Path) {
    let mut flagged = path.as_os_str().to_owned();
    flagged.push(".partial");
    let _ = fs::rename(path, flagged);
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    let probe = dir.join(".schelling-write-probe");
    fs::write(&probe, b"").with_context(|| format!("output directory {} is not writable", dir.display()))?;
    fs::remove_file(&probe).ok();
    Ok(())
}

/// `0.44` for decimal fractions, `3o7` otherwise, so names stay path-safe.
pub fn tau_label(f: Fraction) -> String {
    let (mut num, den) = (*f.numer() as u128, *f.denom() as u128);
    let mut digits = 0u32;
    let mut scale = 1u128;
    while !scale.is_multiple_of(den) {
        scale *= 10;
        digits += 1;
        if digits > 18 {
            return format!("{}o{}", f.numer(), f.denom());
        }
    }
    num *= scale / den;
    let int = num / scale;
    if digits == 0 {
        return int.to_string();
    }
    let frac = format!("{:0width$}", num % scale, width = digits as usize);
    format!("{int}.{frac}")
}

/// Stem shared by all files of one run: parameters and seed.
pub fn run_stem(p: &ModelParams, seed: u64) -> String {
    format!("{}d_n{}_w{}_ta{}_tb{}_seed{}", p.dim.rank(), p.n, p.w, tau_label(p.tau_alpha), tau_label(p.tau_beta), seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels() {
        assert_eq!(tau_label(Fraction::new(11, 25)), "0.44");
        assert_eq!(tau_label(Fraction::new(1, 4)), "0.25");
        assert_eq!(tau_label(Fraction::new(1, 1)), "1");
        assert_eq!(tau_label(Fraction::new(0, 1)), "0");
        assert_eq!(tau_label(Fraction::new(1, 20)), "0.05");
        assert_eq!(tau_label(Fraction::new(3, 7)), "3o7");
    }

    #[test]
    fn artifact_replaces_partial() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_artifact(dir.path(), "a.txt", b"hi").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"hi");
        assert!(!dir.path().join("a.txt.partial").exists());
        mark_partial(&p);
        assert!(dir.path().join("a.txt.partial").exists());
    }
}
