//! Packed bitstream files: bits MSB-first within each byte, the last byte
//! zero-padded, with a sidecar text file listing one source round per line.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::quantize::Bitstream;

pub fn pack_bits(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | ((b & 1) << (7 - i))))
        .collect()
}

/// First `len` bits of `bytes`; `bytes` must hold at least that many.
pub fn unpack_bits(bytes: &[u8], len: usize) -> Vec<u8> {
    (0..len).map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1).collect()
}

/// Sidecar path: `<bits path>.rounds`.
pub fn sidecar_path(bits_path: &Path) -> PathBuf {
    let mut s = bits_path.as_os_str().to_owned();
    s.push(".rounds");
    PathBuf::from(s)
}

pub fn write_bitstream(path: &Path, stream: &Bitstream) -> Result<()> {
    fs::write(path, pack_bits(&stream.bits)).map_err(|e| Error::io(path, e))?;
    let mut rounds = String::with_capacity(stream.source_rounds.len() * 8);
    for r in &stream.source_rounds {
        rounds.push_str(&r.to_string());
        rounds.push('\n');
    }
    let side = sidecar_path(path);
    fs::write(&side, rounds).map_err(|e| Error::io(&side, e))
}

/// Reads a bitstream; its length comes from the sidecar, which must exist.
pub fn read_bitstream(path: &Path) -> Result<Bitstream> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let mut rounds = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        rounds.push(line.parse::<usize>().map_err(|e| Error::Parse {
            path: side.clone(),
            line: i + 1,
            msg: format!("invalid round index {line:?}: {e}"),
        })?);
    }
    if rounds.len().div_ceil(8) != bytes.len() {
        return Err(Error::Validation(format!(
            "{} holds {} bytes but the sidecar lists {} rounds",
            path.display(),
            bytes.len(),
            rounds.len()
        )));
    }
    let bits = unpack_bits(&bytes, rounds.len());
    if bits.len() % 8 != 0 && bytes.last().is_some_and(|b| b & (0xFF >> (bits.len() % 8)) != 0) {
        return Err(Error::Validation(format!("{}: nonzero padding bits", path.display())));
    }
    Bitstream::new(bits, rounds)
}

/// Reads packed bits without a sidecar; every bit of the file is used.
pub fn read_raw_bits(path: &Path) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(unpack_bits(&bytes, bytes.len() * 8))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packing_is_msb_first() {
        assert_eq!(pack_bits(&[1, 0, 0, 0, 0, 0, 0, 1, 1]), vec![0x81, 0x80]);
        assert_eq!(unpack_bits(&[0x81, 0x80], 9), vec![1, 0, 0, 0, 0, 0, 0, 1, 1]);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.bits");
        let s = Bitstream::new(vec![1, 1, 0, 1, 0, 0, 0, 0, 1, 0, 1], (0..11).map(|i| i * 3).collect()).unwrap();
        write_bitstream(&p, &s).unwrap();
        assert_eq!(std::fs::read(&p).unwrap().len(), 2);
        assert_eq!(read_bitstream(&p).unwrap(), s);
        std::fs::write(sidecar_path(&p), "0\n1\n").unwrap();
        assert!(read_bitstream(&p).is_err());
        std::fs::write(sidecar_path(&p), "0\nx\n").unwrap();
        assert!(matches!(read_bitstream(&p), Err(Error::Parse { line: 2, .. })));
    }
}
