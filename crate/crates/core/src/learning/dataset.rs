use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A binary pattern over the visible units, in visible order.
pub type Pattern = Vec<u8>;

/// `n_patterns` images of `side x side` pixels, flattened row-major. Each image picks
/// horizontal or vertical with equal probability, then includes each of the `side` bars of
/// that orientation independently with probability 0.5.
pub fn bars_dataset(n_patterns: usize, side: usize, seed: u64) -> Result<Vec<Pattern>> {
    if side == 0 {
        return Err(Error::Config("bars side must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_patterns);
    for _ in 0..n_patterns {
        let vertical = rng.random_bool(0.5);
        let bars: Vec<bool> = (0..side).map(|_| rng.random_bool(0.5)).collect();
        let mut img = vec![0u8; side * side];
        for r in 0..side {
            for c in 0..side {
                let on = if vertical { bars[c] } else { bars[r] };
                img[r * side + c] = u8::from(on);
            }
        }
        out.push(img);
    }
    Ok(out)
}

/// One pattern per line as a string of `0`/`1`; blank lines are skipped.
pub fn parse_dataset(text: &str) -> Result<Vec<Pattern>> {
    let mut out: Vec<Pattern> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let p = line
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::Parse(format!(
                    "line {}: unexpected character `{other}` in pattern",
                    lineno + 1
                ))),
            })
            .collect::<Result<Pattern>>()?;
        if let Some(first) = out.first() {
            if first.len() != p.len() {
                return Err(Error::Parse(format!(
                    "line {}: pattern length {} differs from {}",
                    lineno + 1,
                    p.len(),
                    first.len()
                )));
            }
        }
        out.push(p);
    }
    Ok(out)
}

pub fn format_dataset(patterns: &[Pattern]) -> String {
    let mut s = String::with_capacity(patterns.len() * (patterns.first().map_or(0, Vec::len) + 1));
    for p in patterns {
        for &b in p {
            s.push(if b != 0 { '1' } else { '0' });
        }
        let _ = writeln!(s);
    }
    s
}

pub fn read_dataset(path: &Path) -> Result<Vec<Pattern>> {
    parse_dataset(&std::fs::read_to_string(path)?)
}

pub fn write_dataset(path: &Path, patterns: &[Pattern]) -> Result<()> {
    std::fs::write(path, format_dataset(patterns))?;
    Ok(())
}
