//! Span text to memorised fragment table.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::graph::{is_isomorphic, parse_penman, print_penman, AmrGraph, PenmanError};

#[derive(Clone, Debug, PartialEq)]
pub struct DictEntry {
    pub graph: AmrGraph,
    pub penman: String,
    pub count: u64,
}

/// Lowercased span text to the fragments seen for it, with counts.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DictTable {
    entries: BTreeMap<String, Vec<DictEntry>>,
}

#[derive(Debug, Error)]
pub enum DictError {
    #[error("line {line}: expected `span TAB count TAB fragment`")]
    Shape { line: usize },
    #[error("line {line}: count must be a positive integer")]
    Count { line: usize },
    #[error("line {line}: {source}")]
    Penman {
        line: usize,
        #[source]
        source: PenmanError,
    },
}

fn ranked(list: &mut [DictEntry]) {
    list.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.penman.cmp(&b.penman)));
}

impl DictTable {
    /// Records one more occurrence of `graph` for `key`.
    pub fn add(&mut self, key: &str, graph: &AmrGraph) {
        self.add_count(key, graph, 1);
    }

    fn add_count(&mut self, key: &str, graph: &AmrGraph, count: u64) {
        let list = self.entries.entry(key.to_string()).or_default();
        match list.iter_mut().find(|e| is_isomorphic(&e.graph, graph)) {
            Some(e) => e.count += count,
            None => list.push(DictEntry {
                graph: graph.clone(),
                penman: print_penman(graph).expect("valid fragment prints"),
                count,
            }),
        }
        ranked(list);
    }

    /// Highest-count template; ties go to the smaller serialisation.
    pub fn lookup(&self, key: &str) -> Option<&AmrGraph> {
        self.entries.get(key)?.first().map(|e| &e.graph)
    }

    /// Lookup as if one occurrence of `held_out` had not been recorded.
    pub fn lookup_excluding(&self, key: &str, held_out: &AmrGraph) -> Option<&AmrGraph> {
        let list = self.entries.get(key)?;
        list.iter()
            .filter_map(|e| {
                let c = if is_isomorphic(&e.graph, held_out) {
                    e.count - 1
                } else {
                    e.count
                };
                (c > 0).then_some((c, e))
            })
            .min_by(|(ca, a), (cb, b)| cb.cmp(ca).then_with(|| a.penman.cmp(&b.penman)))
            .map(|(_, e)| &e.graph)
    }

    pub fn entries(&self, key: &str) -> &[DictEntry] {
        self.entries.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// One `span TAB count TAB fragment` line per entry, keys sorted.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (key, list) in &self.entries {
            for e in list {
                out.push_str(&format!("{key}\t{}\t{}\n", e.count, e.penman));
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<DictTable, DictError> {
        let mut t = DictTable::default();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.splitn(3, '\t').collect();
            let [key, count, penman] = fields.as_slice() else {
                return Err(DictError::Shape { line: line_no });
            };
            let count: u64 = count
                .parse()
                .ok()
                .filter(|&c| c > 0)
                .ok_or(DictError::Count { line: line_no })?;
            let g = parse_penman(penman).map_err(|source| DictError::Penman {
                line: line_no,
                source,
            })?;
            t.add_count(key, &g, count);
        }
        Ok(t)
    }
}
