//! The measurement dataset file format.
//!
//! Line-oriented UTF-8, written canonically so identical content produces
//! identical bytes:
//!
//! ```text
//! #qgdata v1
//! !meta {"label":"heis-2x3","basis":"pauli6","n_sites":6,"seed":42}
//! !system {"id":"sys000","family":"heisenberg","rows":2,"cols":3,"edges":[[0,1,1.25],...]}
//! sys000 401523
//! sys000 012345
//! ```
//!
//! One `!meta` line, then one `!system` line per system, then one record line
//! per shot: the system id, a space, and one digit per site. Parse errors
//! carry 1-based line numbers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::graph::CouplingGraph;
use crate::quantum::RydbergParams;
use crate::{Error, Result};

use super::povm::Basis;

const MAGIC: &str = "#qgdata v1";

/// Dataset-level metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    /// Free-form name of the generating run or preset.
    pub label: String,
    pub basis: Basis,
    pub n_sites: usize,
    /// Base seed the records were drawn under.
    pub seed: u64,
}

/// Physical description of one system, tagged by model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SystemDescriptor {
    Heisenberg {
        rows: usize,
        cols: usize,
        /// Canonical-order weighted edges `(a, b, w)`.
        edges: Vec<(usize, usize, f64)>,
    },
    Rydberg {
        n_rows: usize,
        n_cols: usize,
        /// Lattice spacing in µm.
        spacing: f64,
        /// Rabi frequency in rad/µs.
        omega: f64,
        /// Detuning in rad/µs.
        delta: f64,
        /// Evolution time in µs (0 = exact ground state).
        time: f64,
    },
}

impl SystemDescriptor {
    pub fn n_sites(&self) -> usize {
        match self {
            SystemDescriptor::Heisenberg { rows, cols, .. } => rows * cols,
            SystemDescriptor::Rydberg { n_rows, n_cols, .. } => n_rows * n_cols,
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            SystemDescriptor::Heisenberg { .. } => "heisenberg",
            SystemDescriptor::Rydberg { .. } => "rydberg",
        }
    }

    /// Coupling graph of a Heisenberg system.
    pub fn to_graph(&self) -> Result<CouplingGraph> {
        match self {
            SystemDescriptor::Heisenberg { rows, cols, edges } => {
                CouplingGraph::new(*rows, *cols, edges.clone())
            }
            other => Err(Error::Incompatible(format!(
                "expected a heisenberg system, found {}",
                other.family_name()
            ))),
        }
    }

    /// Physical parameters of a Rydberg system.
    pub fn to_rydberg(&self) -> Result<RydbergParams> {
        match self {
            SystemDescriptor::Rydberg {
                n_rows,
                n_cols,
                spacing,
                omega,
                delta,
                time,
            } => Ok(RydbergParams {
                n_rows: *n_rows,
                n_cols: *n_cols,
                spacing: *spacing,
                omega: *omega,
                delta: *delta,
                time: *time,
            }),
            other => Err(Error::Incompatible(format!(
                "expected a rydberg system, found {}",
                other.family_name()
            ))),
        }
    }

    pub fn from_graph(g: &CouplingGraph) -> Self {
        SystemDescriptor::Heisenberg {
            rows: g.rows(),
            cols: g.cols(),
            edges: g.edges().iter().map(|e| (e.a, e.b, e.w)).collect(),
        }
    }

    pub fn from_rydberg(p: &RydbergParams) -> Self {
        SystemDescriptor::Rydberg {
            n_rows: p.n_rows,
            n_cols: p.n_cols,
            spacing: p.spacing,
            omega: p.omega,
            delta: p.delta,
            time: p.time,
        }
    }
}

/// A system with its identifier, as serialized on a `!system` line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemEntry {
    pub id: String,
    #[serde(flatten)]
    pub descriptor: SystemDescriptor,
}

/// One measurement record: which system, and one token per site.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub system_id: String,
    pub tokens: Vec<u8>,
}

/// An in-memory measurement dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    systems: Vec<SystemEntry>,
    index: BTreeMap<String, usize>,
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn new(meta: DatasetMeta) -> Self {
        Dataset {
            meta,
            systems: Vec::new(),
            index: BTreeMap::new(),
            records: Vec::new(),
        }
    }

    pub fn systems(&self) -> &[SystemEntry] {
        &self.systems
    }

    pub fn system(&self, id: &str) -> Option<&SystemEntry> {
        self.index.get(id).map(|&k| &self.systems[k])
    }

    pub fn add_system(&mut self, entry: SystemEntry) -> Result<()> {
        if entry.descriptor.n_sites() != self.meta.n_sites {
            return Err(Error::Incompatible(format!(
                "system {} has {} sites, dataset expects {}",
                entry.id,
                entry.descriptor.n_sites(),
                self.meta.n_sites
            )));
        }
        if entry.id.is_empty() || entry.id.contains(char::is_whitespace) {
            return Err(Error::Config(format!("bad system id {:?}", entry.id)));
        }
        if self.index.contains_key(&entry.id) {
            return Err(Error::Config(format!("duplicate system id {}", entry.id)));
        }
        self.index.insert(entry.id.clone(), self.systems.len());
        self.systems.push(entry);
        Ok(())
    }

    /// Append records for a known system, validating token ranges.
    pub fn add_records(&mut self, system_id: &str, records: Vec<Vec<u8>>) -> Result<()> {
        if self.system(system_id).is_none() {
            return Err(Error::Config(format!("unknown system id {system_id}")));
        }
        super::sampling::validate_tokens(&records, self.meta.n_sites, self.meta.basis)?;
        self.records.extend(records.into_iter().map(|tokens| Record {
            system_id: system_id.to_string(),
            tokens,
        }));
        Ok(())
    }

    /// Records belonging to one system, in file order.
    pub fn records_for<'a>(&'a self, system_id: &'a str) -> impl Iterator<Item = &'a Record> {
        self.records.iter().filter(move |r| r.system_id == system_id)
    }

    /// A dataset containing only the named systems (meta shared).
    pub fn subset(&self, ids: &[&str]) -> Result<Dataset> {
        let mut out = Dataset::new(self.meta.clone());
        for &id in ids {
            let entry = self
                .system(id)
                .ok_or_else(|| Error::Config(format!("unknown system id {id}")))?;
            out.add_system(entry.clone())?;
        }
        for r in &self.records {
            if out.system(&r.system_id).is_some() {
                out.records.push(r.clone());
            }
        }
        Ok(out)
    }

    /// Serialize to the canonical text form.
    pub fn to_string_canonical(&self) -> String {
        let mut s = String::new();
        s.push_str(MAGIC);
        s.push('\n');
        let _ = writeln!(s, "!meta {}", serde_json::to_string(&self.meta).unwrap());
        for sys in &self.systems {
            let _ = writeln!(s, "!system {}", serde_json::to_string(sys).unwrap());
        }
        for r in &self.records {
            s.push_str(&r.system_id);
            s.push(' ');
            for &t in &r.tokens {
                s.push((b'0' + t) as char);
            }
            s.push('\n');
        }
        s
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        f.write_all(self.to_string_canonical().as_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::read(BufReader::new(f), &path.display().to_string())
    }

    /// Parse from any reader; `origin` names the source in errors.
    pub fn read<R: Read>(reader: BufReader<R>, origin: &str) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            path: origin.to_string(),
            line,
            msg,
        };
        let mut lines = reader.lines().enumerate();

        let (_, first) = lines
            .next()
            .ok_or_else(|| err(1, "empty file".into()))?;
        let first = first.map_err(|e| Error::io(origin, e))?;
        if first != MAGIC {
            return Err(err(1, format!("expected `{MAGIC}` header, found {first:?}")));
        }

        let mut ds: Option<Dataset> = None;
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.is_empty() {
                continue;
            }
            if let Some(json) = line.strip_prefix("!meta ") {
                if ds.is_some() {
                    return Err(err(lineno, "duplicate !meta line".into()));
                }
                let meta: DatasetMeta = serde_json::from_str(json)
                    .map_err(|e| err(lineno, format!("bad meta json: {e}")))?;
                ds = Some(Dataset::new(meta));
            } else if let Some(json) = line.strip_prefix("!system ") {
                let ds = ds
                    .as_mut()
                    .ok_or_else(|| err(lineno, "!system before !meta".into()))?;
                let entry: SystemEntry = serde_json::from_str(json)
                    .map_err(|e| err(lineno, format!("bad system json: {e}")))?;
                ds.add_system(entry)
                    .map_err(|e| err(lineno, e.to_string()))?;
            } else if let Some(stripped) = line.strip_prefix('!') {
                return Err(err(lineno, format!("unknown directive !{stripped}")));
            } else {
                let ds = ds
                    .as_mut()
                    .ok_or_else(|| err(lineno, "record before !meta".into()))?;
                let (id, toks) = line
                    .split_once(' ')
                    .ok_or_else(|| err(lineno, "record line needs `<id> <tokens>`".into()))?;
                if ds.system(id).is_none() {
                    return Err(err(lineno, format!("record for unknown system {id}")));
                }
                if toks.len() != ds.meta.n_sites {
                    return Err(err(
                        lineno,
                        format!("{} tokens, expected {}", toks.len(), ds.meta.n_sites),
                    ));
                }
                let vocab = ds.meta.basis.vocab_size() as u8;
                let mut tokens = Vec::with_capacity(toks.len());
                for ch in toks.chars() {
                    let t = ch
                        .to_digit(10)
                        .ok_or_else(|| err(lineno, format!("bad token char {ch:?}")))?
                        as u8;
                    if t >= vocab {
                        return Err(err(
                            lineno,
                            format!("token {t} outside {} vocabulary", ds.meta.basis.name()),
                        ));
                    }
                    tokens.push(t);
                }
                ds.records.push(Record {
                    system_id: id.to_string(),
                    tokens,
                });
            }
        }
        ds.ok_or_else(|| err(1, "missing !meta line".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_dataset() -> Dataset {
        let mut ds = Dataset::new(DatasetMeta {
            label: "test".into(),
            basis: Basis::Pauli6,
            n_sites: 2,
            seed: 7,
        });
        let g = CouplingGraph::chain(2, 1.5).unwrap();
        ds.add_system(SystemEntry {
            id: "sys000".into(),
            descriptor: SystemDescriptor::from_graph(&g),
        })
        .unwrap();
        ds.add_records("sys000", vec![vec![0, 5], vec![3, 2], vec![4, 4]])
            .unwrap();
        ds
    }

    #[test]
    fn round_trip_is_byte_exact() {
        let ds = sample_dataset();
        let text = ds.to_string_canonical();
        let back = Dataset::read(BufReader::new(text.as_bytes()), "mem").unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.to_string_canonical(), text);
    }

    #[test]
    fn rydberg_descriptor_round_trips() {
        let p = RydbergParams {
            n_rows: 1,
            n_cols: 7,
            spacing: 4.5551,
            omega: std::f64::consts::TAU * 4.0,
            delta: 50.0,
            time: 3.0,
        };
        let d = SystemDescriptor::from_rydberg(&p);
        let json = serde_json::to_string(&d).unwrap();
        let back: SystemDescriptor = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.to_rydberg().unwrap(), p);
        assert!(d.to_graph().is_err());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let ds = sample_dataset();
        let text = ds.to_string_canonical();

        // Corrupt a record token (line 4 = first record).
        let bad = text.replace("sys000 05", "sys000 09");
        let e = Dataset::read(BufReader::new(bad.as_bytes()), "mem").unwrap_err();
        match e {
            Error::Parse { line, ref msg, .. } => {
                assert_eq!(line, 4, "{msg}");
                assert!(msg.contains("vocabulary"), "{msg}");
            }
            other => panic!("unexpected error {other:?}"),
        }

        // Unknown system id.
        let bad = text.replace("sys000 32", "sysXXX 32");
        let e = Dataset::read(BufReader::new(bad.as_bytes()), "mem").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 5, .. }), "{e:?}");

        // Bad magic.
        let e = Dataset::read(BufReader::new(b"#wrong\n".as_slice()), "mem").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn add_system_validates() {
        let mut ds = sample_dataset();
        let g3 = CouplingGraph::chain(3, 1.0).unwrap();
        assert!(ds
            .add_system(SystemEntry {
                id: "bad".into(),
                descriptor: SystemDescriptor::from_graph(&g3),
            })
            .is_err());
        let g2 = CouplingGraph::chain(2, 1.0).unwrap();
        assert!(ds
            .add_system(SystemEntry {
                id: "sys000".into(),
                descriptor: SystemDescriptor::from_graph(&g2),
            })
            .is_err());
        assert!(ds.add_records("missing", vec![vec![0, 0]]).is_err());
    }

    #[test]
    fn subset_filters_systems_and_records() {
        let mut ds = sample_dataset();
        let g = CouplingGraph::chain(2, 0.5).unwrap();
        ds.add_system(SystemEntry {
            id: "sys001".into(),
            descriptor: SystemDescriptor::from_graph(&g),
        })
        .unwrap();
        ds.add_records("sys001", vec![vec![1, 1]]).unwrap();

        let sub = ds.subset(&["sys001"]).unwrap();
        assert_eq!(sub.systems().len(), 1);
        assert_eq!(sub.records.len(), 1);
        assert_eq!(sub.records[0].tokens, vec![1, 1]);
        assert!(ds.subset(&["nope"]).is_err());
    }
}
