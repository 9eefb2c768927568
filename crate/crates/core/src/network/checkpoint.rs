//! Binary checkpoint: magic, config text, vocabulary text, then one record
//! per parameter. Integers are little-endian `u32`, values little-endian
//! `f32`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use super::{AcousticModel, NetworkConfig};
use crate::error::{Error, Result};
use crate::textcodec::Vocabulary;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"NPASR001";

fn put_u32(w: &mut impl Write, v: usize) -> std::io::Result<()> {
    let v = u32::try_from(v).map_err(|_| std::io::Error::other("length exceeds u32"))?;
    w.write_all(&v.to_le_bytes())
}

fn put_block(w: &mut impl Write, bytes: &[u8]) -> std::io::Result<()> {
    put_u32(w, bytes.len())?;
    w.write_all(bytes)
}

pub fn write_checkpoint(
    model: &AcousticModel,
    vocab: &Vocabulary,
    w: &mut impl Write,
) -> std::io::Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    put_block(w, model.config().to_text().as_bytes())?;
    put_block(w, vocab.to_text().as_bytes())?;
    let store = model.params();
    for id in store.ids() {
        let entry = store.entry(id);
        put_block(w, entry.name.as_bytes())?;
        put_u32(w, entry.shape.len())?;
        for &d in &entry.shape {
            put_u32(w, d)?;
        }
        for &v in store.value(id) {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn save_checkpoint(
    model: &AcousticModel,
    vocab: &Vocabulary,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_checkpoint(model, vocab, &mut w)
        .and_then(|()| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Reads exactly `buf.len()` bytes. `Ok(false)` on a clean end of input
/// before the first byte when `eof_ok`.
fn fill(r: &mut impl Read, buf: &mut [u8], eof_ok: bool) -> Result<bool> {
    let mut read = 0;
    while read < buf.len() {
        match r.read(&mut buf[read..]) {
            Ok(0) if read == 0 && eof_ok => return Ok(false),
            Ok(0) => return Err(Error::Format("truncated checkpoint".into())),
            Ok(n) => read += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(Error::Format(format!("checkpoint read failed: {e}"))),
        }
    }
    Ok(true)
}

fn get_u32(r: &mut impl Read) -> Result<usize> {
    let mut b = [0u8; 4];
    fill(r, &mut b, false)?;
    Ok(u32::from_le_bytes(b) as usize)
}

fn get_string(r: &mut impl Read, what: &str) -> Result<String> {
    let len = get_u32(r)?;
    let mut buf = Vec::new();
    r.take(len as u64)
        .read_to_end(&mut buf)
        .map_err(|e| Error::Format(format!("checkpoint read failed: {e}")))?;
    if buf.len() != len {
        return Err(Error::Format("truncated checkpoint".into()));
    }
    String::from_utf8(buf).map_err(|_| Error::Format(format!("{what} is not UTF-8")))
}

/// Parses a checkpoint, checking every parameter against the shapes the
/// stored config implies.
pub fn read_checkpoint(r: &mut impl Read) -> Result<(AcousticModel, Vocabulary)> {
    let mut magic = [0u8; 8];
    fill(r, &mut magic, false)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let config = NetworkConfig::from_text(&get_string(r, "config")?)?;
    let vocab = Vocabulary::from_text(&get_string(r, "vocabulary")?)?;
    if vocab.len() != config.vocab_size {
        return Err(Error::DimensionMismatch(format!(
            "checkpoint config has vocab_size {} but its vocabulary has {} tokens",
            config.vocab_size,
            vocab.len()
        )));
    }
    let mut model = AcousticModel::new(config, 0)?;
    let mut seen = HashSet::new();
    loop {
        let mut len = [0u8; 4];
        if !fill(r, &mut len, true)? {
            break;
        }
        let mut name = vec![0u8; u32::from_le_bytes(len) as usize];
        fill(r, &mut name, false)?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::Format("parameter name is not UTF-8".into()))?;
        let rank = get_u32(r)?;
        let shape = (0..rank).map(|_| get_u32(r)).collect::<Result<Vec<_>>>()?;
        let id = model
            .params()
            .id(&name)
            .ok_or_else(|| Error::Format(format!("unknown parameter {name}")))?;
        let expected = &model.params().entry(id).shape;
        if *expected != shape {
            return Err(Error::DimensionMismatch(format!(
                "parameter {name} stored as {shape:?}, config implies {expected:?}"
            )));
        }
        let mut raw = vec![0u8; 4 * shape.iter().product::<usize>()];
        fill(r, &mut raw, false)?;
        for (dst, chunk) in model
            .params_mut()
            .value_mut(id)
            .iter_mut()
            .zip(raw.chunks_exact(4))
        {
            *dst = f32::from_le_bytes(chunk.try_into().expect("4 bytes")) as f64;
        }
        if !seen.insert(id) {
            return Err(Error::Format(format!("duplicate parameter {name}")));
        }
    }
    if seen.len() != model.params().len() {
        return Err(Error::Format(format!(
            "checkpoint holds {} of {} parameters",
            seen.len(),
            model.params().len()
        )));
    }
    Ok((model, vocab))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(AcousticModel, Vocabulary)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&mut BufReader::new(file))
}
