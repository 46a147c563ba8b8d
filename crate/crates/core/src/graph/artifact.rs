//! Versioned binary serialization of a built graph.
//!
//! Layout (little endian): magic `CGKG`, u32 version, u32 node count, nodes,
//! u32 edge count, edges. Strings are u32 length + UTF-8 bytes; sets are u32
//! count + strings; strengths are f64.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{GraphBuilder, KnowledgeGraph};
use crate::scalar::Scalar;
use crate::{Error, Result};

pub const ARTIFACT_MAGIC: [u8; 4] = *b"CGKG";
pub const ARTIFACT_VERSION: u32 = 1;

pub fn write_artifact<S: Scalar, W: Write>(graph: &KnowledgeGraph<S>, mut w: W) -> Result<()> {
    w.write_all(&ARTIFACT_MAGIC)?;
    w.write_u32::<LittleEndian>(ARTIFACT_VERSION)?;
    w.write_u32::<LittleEndian>(graph.node_count() as u32)?;
    for node in graph.nodes() {
        write_str(&mut w, &node.id)?;
        write_str(&mut w, &node.name)?;
        write_set(&mut w, node.semantic_types.iter())?;
        write_set(&mut w, node.aliases.iter())?;
    }
    w.write_u32::<LittleEndian>(graph.edge_count() as u32)?;
    for edge in graph.edges() {
        w.write_u32::<LittleEndian>(edge.subject.0)?;
        write_str(&mut w, &edge.predicate)?;
        w.write_u32::<LittleEndian>(edge.object.0)?;
        w.write_f64::<LittleEndian>(edge.strength.to_f64())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_artifact<S: Scalar, R: Read>(mut r: R) -> Result<KnowledgeGraph<S>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Artifact("truncated header".into()))?;
    if magic != ARTIFACT_MAGIC {
        return Err(Error::Artifact("not a graph artifact (bad magic)".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != ARTIFACT_VERSION {
        return Err(Error::Artifact(format!(
            "artifact version {version}, this build reads version {ARTIFACT_VERSION}"
        )));
    }
    let mut b = GraphBuilder::<S>::new();
    let n = r.read_u32::<LittleEndian>()? as usize;
    let mut ids = Vec::with_capacity(n);
    for _ in 0..n {
        let id = read_str(&mut r)?;
        let name = read_str(&mut r)?;
        let types = read_set(&mut r)?;
        let aliases = read_set(&mut r)?;
        b.add_node(&id, &name, types)?;
        for alias in aliases {
            b.add_alias(&id, &alias)?;
        }
        ids.push(id);
    }
    let m = r.read_u32::<LittleEndian>()? as usize;
    for _ in 0..m {
        let s = r.read_u32::<LittleEndian>()? as usize;
        let predicate = read_str(&mut r)?;
        let o = r.read_u32::<LittleEndian>()? as usize;
        let strength = r.read_f64::<LittleEndian>()?;
        let (Some(s), Some(o)) = (ids.get(s), ids.get(o)) else {
            return Err(Error::Artifact("edge endpoint out of range".into()));
        };
        let strength = S::from_f64(strength)
            .ok_or_else(|| Error::Artifact(format!("bad strength {strength}")))?;
        b.add_edge(s, &predicate, o, strength)?;
    }
    if b.node_count() != n || b.edge_count() != m {
        return Err(Error::Artifact("duplicate entries in artifact".into()));
    }
    Ok(b.build())
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn write_set<'a, W: Write>(
    w: &mut W,
    items: impl ExactSizeIterator<Item = &'a String>,
) -> Result<()> {
    w.write_u32::<LittleEndian>(items.len() as u32)?;
    for s in items {
        write_str(w, s)?;
    }
    Ok(())
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| Error::Artifact("invalid UTF-8 string".into()))
}

fn read_set<R: Read>(r: &mut R) -> Result<Vec<String>> {
    let n = r.read_u32::<LittleEndian>()? as usize;
    (0..n).map(|_| read_str(r)).collect()
}
