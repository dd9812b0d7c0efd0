use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{Context, Result};
use sdaccel::pssa::CompressedSas;
use sdaccel::tips::SpotMask;
use sdaccel::QTensorF64;
use serde::Serialize;

pub fn read_qtf(path: &Path) -> Result<QTensorF64> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    QTensorF64::read_qtf(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

pub fn write_qtf(path: &Path, t: &QTensorF64) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    t.write_qtf(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_pssa(path: &Path) -> Result<CompressedSas> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    CompressedSas::from_bytes(&bytes).with_context(|| format!("parsing {}", path.display()))
}

pub fn read_mask(path: &Path) -> Result<SpotMask> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    SpotMask::read_mask(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

pub fn write_mask(path: &Path, m: &SpotMask) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    m.write_mask(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Writes to `out` when given, otherwise standard output.
pub fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                so.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

pub fn emit_json<T: Serialize>(out: Option<&Path>, v: &T) -> Result<()> {
    emit(out, &serde_json::to_string_pretty(v)?)
}
