//! JSONL cache snapshots: one entry per line with `id`, `seq`,
//! `inserted_at`, `producer` and `embedding`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{CacheEntry, SemanticCache};
use crate::error::{Error, Result};

pub fn export_jsonl<W: Write>(cache: &SemanticCache, mut out: W) -> Result<()> {
    for e in cache.entries() {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n").map_err(|e| Error::io("<writer>", e))?;
    }
    Ok(())
}

pub fn import_jsonl<R: Read>(input: R) -> Result<Vec<CacheEntry>> {
    let mut entries = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line.map_err(|e| Error::Trace {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: CacheEntry = serde_json::from_str(&line).map_err(|e| Error::Trace {
            line: i + 1,
            message: e.to_string(),
        })?;
        entries.push(entry);
    }
    Ok(entries)
}

pub fn write_snapshot(cache: &SemanticCache, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    export_jsonl(cache, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<Vec<CacheEntry>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    import_jsonl(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocator::ModelClass;
    use crate::cache::{CachePolicy, Embedding};

    #[test]
    fn snapshot_round_trip() {
        let mut c = SemanticCache::new(8, CachePolicy::CacheAll).unwrap();
        c.insert(
            11,
            Embedding::normalize(&[0.3, 0.1, -0.7]).unwrap(),
            ModelClass::Large,
            1.5,
        )
        .unwrap();
        c.insert(
            12,
            Embedding::normalize(&[0.9, 0.2, 0.1]).unwrap(),
            ModelClass::Small,
            2.5,
        )
        .unwrap();
        let mut buf = Vec::new();
        export_jsonl(&c, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("\"producer\":\"small\""));

        let entries = import_jsonl(buf.as_slice()).unwrap();
        let mut restored = SemanticCache::new(8, CachePolicy::CacheAll).unwrap();
        restored.restore(entries).unwrap();
        assert_eq!(restored.entries().collect::<Vec<_>>(), c.entries().collect::<Vec<_>>());
        // new inserts continue the sequence
        restored
            .insert(
                13,
                Embedding::normalize(&[1.0, 0.0, 0.0]).unwrap(),
                ModelClass::Large,
                3.0,
            )
            .unwrap();
        assert_eq!(restored.entries().last().unwrap().seq, 2);
    }

    #[test]
    fn import_reports_line() {
        let text = "{\"id\":1,\"seq\":0,\"inserted_at\":0.0,\"producer\":\"large\",\"embedding\":[1.0]}\nnot json\n";
        match import_jsonl(text.as_bytes()) {
            Err(Error::Trace { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn restore_rejects_out_of_order_seq() {
        let e = |seq| CacheEntry {
            id: seq,
            seq,
            inserted_at: 0.0,
            producer: ModelClass::Large,
            embedding: Embedding::normalize(&[1.0, 0.0]).unwrap(),
        };
        let mut c = SemanticCache::new(8, CachePolicy::CacheAll).unwrap();
        assert!(c.restore(vec![e(2), e(1)]).is_err());
    }
}
