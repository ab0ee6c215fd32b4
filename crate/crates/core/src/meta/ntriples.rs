//! Canonical N-Triples text: one `<s> <p> <o> .` line per triple, literals
//! quoted and datatype-tagged, lines sorted lexicographically so equal graphs
//! always serialize to equal bytes. The parser accepts exactly this grammar
//! (plus blank lines and `#` comments) and reports the first offending line.

use super::triples::{Iri, Object, Triple, XSD_INTEGER, XSD_STRING};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct NtParseError {
    pub line: usize,
    pub message: String,
}

fn escape_literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out
}

fn render(triple: &Triple) -> String {
    let object = match &triple.object {
        Object::Iri(iri) => format!("<{iri}>"),
        Object::Str(s) => format!("\"{}\"^^<{XSD_STRING}>", escape_literal(s)),
        Object::Int(n) => format!("\"{n}\"^^<{XSD_INTEGER}>"),
    };
    format!("<{}> <{}> {object} .", triple.subject, triple.predicate)
}

/// Serialize a graph to canonical text. Duplicate triples collapse (graphs
/// are sets); the empty graph is the empty string.
pub fn serialize_ntriples(triples: &[Triple]) -> String {
    let mut lines: Vec<String> = triples.iter().map(render).collect();
    lines.sort();
    lines.dedup();
    let mut out = String::new();
    for line in lines {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

struct LineParser<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: usize,
}

impl<'a> LineParser<'a> {
    fn err(&self, message: impl Into<String>) -> NtParseError {
        NtParseError { line: self.line, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && (self.bytes[self.pos] == b' ' || self.bytes[self.pos] == b'\t') {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn iri(&mut self) -> Result<Iri, NtParseError> {
        if self.peek() != Some(b'<') {
            return Err(self.err("expected '<' opening an IRI"));
        }
        self.pos += 1;
        let start = self.pos;
        while let Some(b) = self.peek() {
            if b == b'>' {
                let raw = std::str::from_utf8(&self.bytes[start..self.pos])
                    .map_err(|_| self.err("IRI is not valid UTF-8"))?;
                self.pos += 1;
                return Iri::new(raw).map_err(|e| self.err(e.to_string()));
            }
            if b == b'<' || b == b'"' || b == b' ' || b < 0x21 {
                return Err(self.err("invalid character inside IRI"));
            }
            self.pos += 1;
        }
        Err(self.err("unterminated IRI (missing '>')"))
    }

    fn literal_body(&mut self) -> Result<String, NtParseError> {
        debug_assert_eq!(self.peek(), Some(b'"'));
        self.pos += 1;
        let mut out = Vec::new();
        loop {
            match self.peek() {
                None => return Err(self.err("unterminated literal (missing '\"')")),
                Some(b'"') => {
                    self.pos += 1;
                    return String::from_utf8(out).map_err(|_| self.err("literal is not valid UTF-8"));
                }
                Some(b'\\') => {
                    self.pos += 1;
                    let esc = self.peek().ok_or_else(|| self.err("dangling escape"))?;
                    let c = match esc {
                        b'\\' => b'\\',
                        b'"' => b'"',
                        b'n' => b'\n',
                        b'r' => b'\r',
                        b't' => b'\t',
                        other => {
                            return Err(self.err(format!("unsupported escape '\\{}'", other as char)))
                        }
                    };
                    out.push(c);
                    self.pos += 1;
                }
                Some(b'\n') | Some(b'\r') => return Err(self.err("raw newline inside literal")),
                Some(b) => {
                    out.push(b);
                    self.pos += 1;
                }
            }
        }
    }

    fn object(&mut self) -> Result<Object, NtParseError> {
        match self.peek() {
            Some(b'<') => Ok(Object::Iri(self.iri()?)),
            Some(b'"') => {
                let body = self.literal_body()?;
                if self.bytes.get(self.pos..self.pos + 2) != Some(b"^^") {
                    return Err(self.err("literal must carry a '^^<datatype>' tag"));
                }
                self.pos += 2;
                let datatype = self.iri()?;
                match datatype.as_str() {
                    XSD_STRING => Ok(Object::Str(body)),
                    XSD_INTEGER => body
                        .parse::<u64>()
                        .map(Object::Int)
                        .map_err(|_| self.err(format!("invalid integer literal {body:?}"))),
                    other => Err(self.err(format!("unsupported datatype <{other}>"))),
                }
            }
            _ => Err(self.err("expected an IRI or a literal object")),
        }
    }

    fn triple(&mut self) -> Result<Triple, NtParseError> {
        self.skip_ws();
        let subject = self.iri()?;
        self.skip_ws();
        let predicate = self.iri()?;
        self.skip_ws();
        let object = self.object()?;
        self.skip_ws();
        if self.peek() != Some(b'.') {
            return Err(self.err("missing terminal ' .'"));
        }
        self.pos += 1;
        self.skip_ws();
        if self.pos != self.bytes.len() {
            return Err(self.err("trailing content after '.'"));
        }
        Ok(Triple::new(subject, predicate, object))
    }
}

/// Parse N-Triples text, returning the triples or the first syntax error
/// with its 1-based line number. Blank lines and `#` comments are skipped.
pub fn parse_ntriples(text: &str) -> Result<Vec<Triple>, NtParseError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parser = LineParser { bytes: raw.as_bytes(), pos: 0, line: idx + 1 };
        out.push(parser.triple()?);
    }
    Ok(out)
}
