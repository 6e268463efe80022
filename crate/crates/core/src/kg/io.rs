//! Binary snapshots and canonical TSV dumps of a [`KnowledgeGraph`].
//!
//! Snapshot layout, all integers little-endian:
//!
//! ```text
//! magic        8 bytes  "KGLPSNAP"
//! version      u32      1
//! flags        u32      bit 0 set = lenient ambiguity mode
//! entities     u32 count, then per entity: u32 byte length + UTF-8 IRI
//! relations    u32 count, then per relation: u32 byte length + UTF-8 IRI
//! edges        per relation in id order: u64 count, then (u32 subject, u32 object)
//! types        u32 count, then per entry: u32 entity + string
//! schemas      u32 count, then per entry: u32 relation + domain string + range string
//! ```

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{AmbiguityMode, EntityId, Iri, KgError, KnowledgeGraph, RelationId};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"KGLPSNAP";
pub const SNAPSHOT_VERSION: u32 = 1;

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_str<R: Read>(r: &mut R) -> Result<String, KgError> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| KgError::Snapshot("string is not UTF-8".into()))
}

pub fn write_snapshot<W: Write>(kg: &KnowledgeGraph, mut w: W) -> Result<(), KgError> {
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_u32::<LittleEndian>(SNAPSHOT_VERSION)?;
    let flags = u32::from(kg.mode() == AmbiguityMode::Lenient);
    w.write_u32::<LittleEndian>(flags)?;

    w.write_u32::<LittleEndian>(kg.num_entities() as u32)?;
    for iri in kg.entities().names() {
        write_str(&mut w, iri.as_str())?;
    }
    w.write_u32::<LittleEndian>(kg.num_relations() as u32)?;
    for iri in kg.relations().names() {
        write_str(&mut w, iri.as_str())?;
    }
    for r in kg.relation_ids() {
        let edges = kg.edges(r);
        w.write_u64::<LittleEndian>(edges.len() as u64)?;
        for &(s, o) in edges {
            w.write_u32::<LittleEndian>(s.0)?;
            w.write_u32::<LittleEndian>(o.0)?;
        }
    }
    w.write_u32::<LittleEndian>(kg.entity_types().len() as u32)?;
    for (e, label) in kg.entity_types() {
        w.write_u32::<LittleEndian>(e.0)?;
        write_str(&mut w, label)?;
    }
    w.write_u32::<LittleEndian>(kg.schemas().len() as u32)?;
    for s in kg.schemas() {
        w.write_u32::<LittleEndian>(s.relation.0)?;
        write_str(&mut w, &s.domain_type)?;
        write_str(&mut w, &s.range_type)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<KnowledgeGraph, KgError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(KgError::Snapshot("bad magic".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != SNAPSHOT_VERSION {
        return Err(KgError::Snapshot(format!("unsupported version {version}")));
    }
    let flags = r.read_u32::<LittleEndian>()?;
    let mode = if flags & 1 == 1 {
        AmbiguityMode::Lenient
    } else {
        AmbiguityMode::Strict
    };
    let mut kg = KnowledgeGraph::new(mode);

    let n_entities = r.read_u32::<LittleEndian>()?;
    for _ in 0..n_entities {
        kg.register_entity(&Iri::new(read_str(&mut r)?)?);
    }
    let n_relations = r.read_u32::<LittleEndian>()?;
    for _ in 0..n_relations {
        kg.register_relation(&Iri::new(read_str(&mut r)?)?);
    }
    let check_entity = |id: u32| -> Result<EntityId, KgError> {
        if id < n_entities {
            Ok(EntityId(id))
        } else {
            Err(KgError::Snapshot(format!("entity id {id} out of range")))
        }
    };
    for rel in 0..n_relations {
        let n_edges = r.read_u64::<LittleEndian>()?;
        for _ in 0..n_edges {
            let s = check_entity(r.read_u32::<LittleEndian>()?)?;
            let o = check_entity(r.read_u32::<LittleEndian>()?)?;
            kg.insert_ids(RelationId(rel), (s, o));
        }
    }
    let n_types = r.read_u32::<LittleEndian>()?;
    for _ in 0..n_types {
        let e = check_entity(r.read_u32::<LittleEndian>()?)?;
        let label = read_str(&mut r)?;
        kg.assign_type(e, &label)?;
    }
    let n_schemas = r.read_u32::<LittleEndian>()?;
    for _ in 0..n_schemas {
        let rel = r.read_u32::<LittleEndian>()?;
        if rel >= n_relations {
            return Err(KgError::Snapshot(format!("relation id {rel} out of range")));
        }
        let domain = read_str(&mut r)?;
        let range = read_str(&mut r)?;
        let iri = kg.relation_iri(RelationId(rel)).clone();
        kg.declare_schema(&iri, &domain, &range)?;
    }
    Ok(kg)
}

/// Writes `relation<TAB>subject<TAB>object\n` rows sorted by
/// `(relation, subject, object)`.
pub fn write_tsv_dump<W: Write>(kg: &KnowledgeGraph, mut w: W) -> Result<(), KgError> {
    let mut rows: Vec<(&str, &str, &str)> = kg
        .relation_ids()
        .flat_map(|r| {
            kg.edges(r).iter().map(move |&(s, o)| {
                (
                    kg.relation_iri(r).as_str(),
                    kg.entity_iri(s).as_str(),
                    kg.entity_iri(o).as_str(),
                )
            })
        })
        .collect();
    rows.sort_unstable();
    for (r, s, o) in rows {
        writeln!(w, "{r}\t{s}\t{o}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::Triple;

    fn sample() -> KnowledgeGraph {
        let mut kg = KnowledgeGraph::default();
        for (s, p, o) in [("g2", "has-function", "f1"), ("g1", "has-function", "f1"), ("d1", "has-target", "g1")] {
            kg.add_triple(&Triple::parse(s, p, o).unwrap()).unwrap();
        }
        kg.declare_schema(&Iri::new("has-function").unwrap(), "Gene", "Function").unwrap();
        kg.infer_entity_types().unwrap();
        kg
    }

    #[test]
    fn snapshot_round_trip() {
        let kg = sample();
        let mut buf = Vec::new();
        write_snapshot(&kg, &mut buf).unwrap();
        assert_eq!(&buf[..8], SNAPSHOT_MAGIC);
        let back = read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(back, kg);
        assert_eq!(back.entity_type(back.entity_id("g1").unwrap()), Some("Gene"));
    }

    #[test]
    fn snapshot_rejects_bad_magic_and_truncation() {
        assert!(matches!(read_snapshot(&b"NOTASNAPxxxx"[..]), Err(KgError::Snapshot(_))));
        let mut buf = Vec::new();
        write_snapshot(&sample(), &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_snapshot(buf.as_slice()).is_err());
    }

    #[test]
    fn tsv_dump_is_sorted() {
        let mut out = Vec::new();
        write_tsv_dump(&sample(), &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "has-function\tg1\tf1\nhas-function\tg2\tf1\nhas-target\td1\tg1\n"
        );
    }
}
