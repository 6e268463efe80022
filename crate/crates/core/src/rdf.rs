//! Line-oriented reader for IRI-only N-Triples and its prefixed-name
//! shorthand (`gene:10155 obo:RO_0000085 obo:GO_0000122 .`), plus the
//! canonical TSV edge list.
//!
//! Parsing never fails on content: each physical line maps to exactly one
//! [`ParseEvent`]. Only I/O failures abort a document.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::Deserialize;
use thiserror::Error;

use crate::kg::{Insertion, Iri, KgError, KnowledgeGraph, Triple};

#[derive(Debug, Error)]
pub enum RdfError {
    #[error("I/O failure after {lines_consumed} lines: {source}")]
    Io {
        lines_consumed: u64,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid prefix binding {0:?}")]
    Prefix(String),
    #[error("prefix file: {0}")]
    PrefixFile(#[from] serde_json::Error),
    #[error("line {line}: expected 3 tab-separated columns, found {columns}")]
    MalformedRow { line: u64, columns: usize },
    #[error("line {line}: {source}")]
    Graph {
        line: u64,
        #[source]
        source: KgError,
    },
}

impl RdfError {
    pub fn code(&self) -> &'static str {
        match self {
            RdfError::Io { .. } => "rdf/io",
            RdfError::Prefix(_) => "rdf/prefix",
            RdfError::PrefixFile(_) => "rdf/prefix-file",
            RdfError::MalformedRow { .. } => "rdf/malformed-row",
            RdfError::Graph { .. } => "rdf/graph",
        }
    }
}

/// Prefix label to namespace bindings. Expansion is plain concatenation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PrefixMap {
    bindings: BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct PrefixFile {
    prefixes: BTreeMap<String, String>,
}

fn is_label_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

fn is_local_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | '/')
}

impl PrefixMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Binds `label` to `namespace`, replacing an earlier binding.
    pub fn insert(&mut self, label: &str, namespace: &str) -> Result<(), RdfError> {
        if namespace.is_empty() || namespace.chars().any(char::is_whitespace) || !label.chars().all(is_label_char) {
            return Err(RdfError::Prefix(format!("{label}={namespace}")));
        }
        self.bindings.insert(label.to_owned(), namespace.to_owned());
        Ok(())
    }

    /// Parses a `LABEL=IRI` command-line binding.
    pub fn insert_flag(&mut self, flag: &str) -> Result<(), RdfError> {
        let (label, ns) = flag
            .split_once('=')
            .ok_or_else(|| RdfError::Prefix(flag.to_owned()))?;
        self.insert(label, ns)
    }

    /// Reads `{ "prefixes": { "gene": "…" } }`.
    pub fn from_json(text: &str) -> Result<Self, RdfError> {
        let file: PrefixFile = serde_json::from_str(text)?;
        let mut map = PrefixMap::new();
        for (label, ns) in &file.prefixes {
            map.insert(label, ns)?;
        }
        Ok(map)
    }

    pub fn namespace(&self, label: &str) -> Option<&str> {
        self.bindings.get(label).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.bindings.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Payload {
    Triple(Triple),
    Comment(String),
    Blank,
    /// `column` is the 1-based character column of the first offending character.
    Error { message: String, column: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseEvent {
    pub line_number: u64,
    pub payload: Payload,
}

struct Cursor<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    line: &'a str,
}

type Fail = (String, usize);

impl<'a> Cursor<'a> {
    fn new(line: &'a str) -> Self {
        Cursor {
            chars: line.char_indices().collect(),
            pos: 0,
            line,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn column(&self) -> usize {
        self.pos + 1
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn byte_at(&self, pos: usize) -> usize {
        self.chars.get(pos).map_or(self.line.len(), |&(b, _)| b)
    }

    fn term(&mut self, prefixes: &PrefixMap) -> Result<Iri, Fail> {
        let start = self.pos;
        match self.peek() {
            None => Err(("missing term".into(), self.column())),
            Some('<') => {
                self.pos += 1;
                let body = self.pos;
                loop {
                    match self.peek() {
                        Some('>') => break,
                        Some(c) if c.is_whitespace() || c == '<' => {
                            return Err(("unterminated IRI".into(), start + 1))
                        }
                        None => return Err(("unterminated IRI".into(), start + 1)),
                        Some(_) => self.pos += 1,
                    }
                }
                if self.pos == body {
                    return Err(("empty IRI".into(), start + 1));
                }
                let text = &self.line[self.byte_at(body)..self.byte_at(self.pos)];
                self.pos += 1;
                Ok(Iri::new(text).expect("IRI body has no whitespace"))
            }
            Some('"') | Some('\'') => Err(("literal objects are not supported".into(), start + 1)),
            Some('_') if self.chars.get(self.pos + 1).map(|&(_, c)| c) == Some(':') => {
                Err(("blank node labels are not supported".into(), start + 1))
            }
            Some(_) => {
                while matches!(self.peek(), Some(c) if is_label_char(c)) {
                    self.pos += 1;
                }
                if self.peek() != Some(':') {
                    return Err(("expected IRI or prefixed name".into(), self.column()));
                }
                let label = &self.line[self.byte_at(start)..self.byte_at(self.pos)];
                self.pos += 1;
                let local_start = self.pos;
                while matches!(self.peek(), Some(c) if is_local_char(c)) {
                    self.pos += 1;
                }
                // the local part may not end with '.'; give it back as the terminator
                while self.pos > local_start && self.chars[self.pos - 1].1 == '.' {
                    self.pos -= 1;
                }
                let local = &self.line[self.byte_at(local_start)..self.byte_at(self.pos)];
                let ns = prefixes
                    .namespace(label)
                    .ok_or_else(|| (format!("unknown prefix {label:?}"), start + 1))?;
                Iri::new(format!("{ns}{local}")).map_err(|e| (e.to_string(), start + 1))
            }
        }
    }

    /// After a term: whitespace, end of line, or (after the object) a dot.
    fn separator(&mut self, allow_dot: bool) -> Result<(), Fail> {
        match self.peek() {
            None => Ok(()),
            Some(c) if c.is_whitespace() => Ok(()),
            Some('.') if allow_dot => Ok(()),
            Some(c) => Err((format!("unexpected character {c:?}"), self.column())),
        }
    }
}

fn parse_statement(line: &str, prefixes: &PrefixMap) -> Result<Triple, Fail> {
    let mut cur = Cursor::new(line);
    cur.skip_ws();
    let subject = cur.term(prefixes)?;
    cur.separator(false)?;
    cur.skip_ws();
    let predicate = cur.term(prefixes)?;
    cur.separator(false)?;
    cur.skip_ws();
    let object = cur.term(prefixes)?;
    cur.separator(true)?;
    cur.skip_ws();
    match cur.peek() {
        Some('.') => cur.pos += 1,
        None => return Err(("missing final '.'".into(), cur.column())),
        Some(c) => return Err((format!("expected '.', found {c:?}"), cur.column())),
    }
    cur.skip_ws();
    match cur.peek() {
        None | Some('#') => Ok(Triple::new(subject, predicate, object)),
        Some(c) => Err((format!("trailing character {c:?}"), cur.column())),
    }
}

/// Classifies one physical line (terminator already removed; a trailing
/// `\r` is tolerated).
pub fn parse_line(line: &str, prefixes: &PrefixMap) -> Payload {
    let line = line.strip_suffix('\r').unwrap_or(line);
    let trimmed = line.trim_start();
    if trimmed.is_empty() {
        return Payload::Blank;
    }
    if let Some(comment) = trimmed.strip_prefix('#') {
        return Payload::Comment(comment.trim().to_owned());
    }
    match parse_statement(line, prefixes) {
        Ok(t) => Payload::Triple(t),
        Err((message, column)) => Payload::Error { message, column },
    }
}

/// Full-IRI N-Triples form of a triple.
pub fn serialize_triple(t: &Triple) -> String {
    format!("<{}> <{}> <{}> .", t.subject, t.predicate, t.object)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ParseSummary {
    pub lines: u64,
    pub triples: u64,
    pub comments: u64,
    pub blanks: u64,
    pub errors: u64,
}

/// Streaming parser over a line source; memory is bounded by the longest line.
pub struct DocumentParser<'p, R> {
    reader: R,
    prefixes: &'p PrefixMap,
    buf: Vec<u8>,
    summary: ParseSummary,
    failed: bool,
}

pub fn parse_document<R: BufRead>(reader: R, prefixes: &PrefixMap) -> DocumentParser<'_, R> {
    DocumentParser {
        reader,
        prefixes,
        buf: Vec::new(),
        summary: ParseSummary::default(),
        failed: false,
    }
}

impl<R: BufRead> DocumentParser<'_, R> {
    pub fn summary(&self) -> ParseSummary {
        self.summary
    }
}

impl<R: BufRead> Iterator for DocumentParser<'_, R> {
    type Item = Result<ParseEvent, RdfError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        self.buf.clear();
        match self.reader.read_until(b'\n', &mut self.buf) {
            Ok(0) => return None,
            Ok(_) => {}
            Err(source) => {
                self.failed = true;
                return Some(Err(RdfError::Io {
                    lines_consumed: self.summary.lines,
                    source,
                }));
            }
        }
        if self.buf.last() == Some(&b'\n') {
            self.buf.pop();
        }
        self.summary.lines += 1;
        let payload = match std::str::from_utf8(&self.buf) {
            Ok(line) => parse_line(line, self.prefixes),
            Err(e) => Payload::Error {
                message: "invalid UTF-8".into(),
                column: String::from_utf8_lossy(&self.buf[..e.valid_up_to()]).chars().count() + 1,
            },
        };
        match payload {
            Payload::Triple(_) => self.summary.triples += 1,
            Payload::Comment(_) => self.summary.comments += 1,
            Payload::Blank => self.summary.blanks += 1,
            Payload::Error { .. } => self.summary.errors += 1,
        }
        Some(Ok(ParseEvent {
            line_number: self.summary.lines,
            payload,
        }))
    }
}

/// Outcome of loading a document into a graph.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub summary: ParseSummary,
    pub inserted: u64,
    pub duplicates: u64,
    /// `(line number, column, message)` of every rejected line.
    pub errors: Vec<(u64, usize, String)>,
}

/// Parses a triples document into `kg`. Malformed lines are collected in the
/// report; graph errors such as ambiguous pairs abort.
pub fn ingest_document<R: BufRead>(
    reader: R,
    prefixes: &PrefixMap,
    kg: &mut KnowledgeGraph,
) -> Result<IngestReport, RdfError> {
    let mut report = IngestReport::default();
    let mut parser = parse_document(reader, prefixes);
    for event in parser.by_ref() {
        let event = event?;
        match event.payload {
            Payload::Triple(t) => match kg.add_triple(&t) {
                Ok(Insertion::Inserted) => report.inserted += 1,
                Ok(Insertion::Duplicate) => report.duplicates += 1,
                Err(source) => {
                    return Err(RdfError::Graph {
                        line: event.line_number,
                        source,
                    })
                }
            },
            Payload::Error { message, column } => report.errors.push((event.line_number, column, message)),
            Payload::Comment(_) | Payload::Blank => {}
        }
    }
    report.summary = parser.summary();
    Ok(report)
}

/// Loads canonical `relation<TAB>subject<TAB>object` rows. Returns the
/// number of newly inserted edges.
pub fn read_tsv_edges<R: BufRead>(reader: R, kg: &mut KnowledgeGraph) -> Result<u64, RdfError> {
    let mut inserted = 0;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line.map_err(|source| RdfError::Io {
            lines_consumed: i as u64,
            source,
        })?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(RdfError::MalformedRow {
                line: line_no,
                columns: cols.len(),
            });
        }
        let graph_err = |source| RdfError::Graph { line: line_no, source };
        let t = Triple::parse(cols[1], cols[0], cols[2]).map_err(graph_err)?;
        match kg.add_triple(&t).map_err(graph_err)? {
            Insertion::Inserted => inserted += 1,
            Insertion::Duplicate => log::warn!("line {line_no}: duplicate edge {}", line),
        }
    }
    Ok(inserted)
}
