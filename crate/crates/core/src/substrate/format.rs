//! Line-oriented text encoding:
//!
//! ```text
//! nodes <n> links <m>
//! node <id> <domain> <cpu>
//! link <u> <v> <bw> <delay>
//! ```

use std::fmt::Write as _;

use thiserror::Error;

use super::{Domain, SubstrateNetwork};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

impl FormatError {
    pub(crate) fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

/// Iterator over non-blank, non-comment lines with 1-based numbers.
pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then(|| (i + 1, line.split_whitespace().collect()))
    })
}

pub(crate) fn field<T: std::str::FromStr>(
    tokens: &[&str],
    idx: usize,
    line: usize,
    what: &str,
) -> Result<T, FormatError> {
    let raw = tokens
        .get(idx)
        .ok_or_else(|| FormatError::new(line, format!("missing {what}")))?;
    raw.parse()
        .map_err(|_| FormatError::new(line, format!("invalid {what} `{raw}`")))
}

pub(crate) fn expect_keyword(
    tokens: &[&str],
    keyword: &str,
    arity: usize,
    line: usize,
) -> Result<(), FormatError> {
    if tokens.first() != Some(&keyword) {
        return Err(FormatError::new(
            line,
            format!("expected `{keyword}`, found `{}`", tokens.first().unwrap_or(&"")),
        ));
    }
    if tokens.len() != arity {
        return Err(FormatError::new(
            line,
            format!("`{keyword}` takes {} fields, found {}", arity - 1, tokens.len() - 1),
        ));
    }
    Ok(())
}

impl SubstrateNetwork {
    /// Encodes capacities (not the current ledger).
    pub fn write_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "nodes {} links {}", self.node_count(), self.link_count());
        for n in self.nodes() {
            let _ = writeln!(out, "node {} {} {}", n.id, n.domain, n.cpu_capacity);
        }
        for l in self.links() {
            let _ = writeln!(
                out,
                "link {} {} {} {}",
                l.endpoints.0, l.endpoints.1, l.bw_capacity, l.delay
            );
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self, FormatError> {
        let mut lines = content_lines(text);
        let (line, header) = lines
            .next()
            .ok_or_else(|| FormatError::new(0, "empty substrate file"))?;
        if header.len() != 4 || header[0] != "nodes" || header[2] != "links" {
            return Err(FormatError::new(line, "expected `nodes <n> links <m>`"));
        }
        let n: usize = field(&header, 1, line, "node count")?;
        let m: usize = field(&header, 3, line, "link count")?;

        let mut net = SubstrateNetwork::new();
        for expected in 0..n {
            let (line, t) = lines
                .next()
                .ok_or_else(|| FormatError::new(0, format!("expected {n} node lines")))?;
            expect_keyword(&t, "node", 4, line)?;
            let id: usize = field(&t, 1, line, "node id")?;
            if id != expected {
                return Err(FormatError::new(
                    line,
                    format!("node ids must be dense and ordered, expected {expected}"),
                ));
            }
            let domain: Domain = t[2].parse().map_err(|e: String| FormatError::new(line, e))?;
            net.add_node(domain, field(&t, 3, line, "cpu")?);
        }
        for _ in 0..m {
            let (line, t) = lines
                .next()
                .ok_or_else(|| FormatError::new(0, format!("expected {m} link lines")))?;
            expect_keyword(&t, "link", 5, line)?;
            net.add_link(
                field(&t, 1, line, "endpoint")?,
                field(&t, 2, line, "endpoint")?,
                field(&t, 3, line, "bandwidth")?,
                field(&t, 4, line, "delay")?,
            )
            .map_err(|e| FormatError::new(line, e.to_string()))?;
        }
        if let Some((line, _)) = lines.next() {
            return Err(FormatError::new(line, "trailing content"));
        }
        Ok(net)
    }
}
