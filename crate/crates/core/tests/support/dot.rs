//! Recursive-descent checker for the DOT language grammar as published
//! with Graphviz: keywords, IDs (identifiers, numerals, quoted and HTML
//! strings), attribute lists, ports, subgraphs and comments.

#![allow(dead_code)]

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Id(String),
    Quoted(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Eq,
    Semi,
    Comma,
    Colon,
    Edge(&'static str),
}

fn tokenize(src: &str) -> Result<Vec<Tok>, String> {
    let b = src.as_bytes();
    let mut i = 0;
    let mut out = Vec::new();
    let mut line_start = true;
    while i < b.len() {
        let c = b[i] as char;
        if c == '\n' {
            line_start = true;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' && line_start {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        line_start = false;
        if src[i..].starts_with("//") {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if src[i..].starts_with("/*") {
            let end = src[i + 2..].find("*/").ok_or("unterminated comment")?;
            i += end + 4;
            continue;
        }
        if src[i..].starts_with("--") || src[i..].starts_with("->") {
            out.push(Tok::Edge(if &src[i..i + 2] == "--" { "--" } else { "->" }));
            i += 2;
            continue;
        }
        let single = match c {
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            '=' => Some(Tok::Eq),
            ';' => Some(Tok::Semi),
            ',' => Some(Tok::Comma),
            ':' => Some(Tok::Colon),
            _ => None,
        };
        if let Some(t) = single {
            out.push(t);
            i += 1;
            continue;
        }
        if c == '"' {
            let mut s = String::new();
            i += 1;
            loop {
                match b.get(i) {
                    None => return Err("unterminated string".into()),
                    Some(b'"') => break,
                    Some(b'\\') if b.get(i + 1) == Some(&b'"') => {
                        s.push('"');
                        i += 2;
                    }
                    Some(_) => {
                        let ch = src[i..].chars().next().unwrap();
                        s.push(ch);
                        i += ch.len_utf8();
                    }
                }
            }
            i += 1;
            out.push(Tok::Quoted(s));
            continue;
        }
        if c == '<' {
            let mut depth = 0;
            let start = i;
            loop {
                match b.get(i) {
                    None => return Err("unterminated HTML string".into()),
                    Some(b'<') => depth += 1,
                    Some(b'>') => {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                    _ => {}
                }
                i += 1;
            }
            i += 1;
            out.push(Tok::Quoted(src[start..i].to_string()));
            continue;
        }
        let is_word = |ch: char| ch.is_ascii_alphanumeric() || ch == '_' || !ch.is_ascii();
        if c.is_ascii_digit() || c == '.' || c == '-' {
            let start = i;
            if c == '-' {
                i += 1;
            }
            let digits_start = i;
            while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
                i += 1;
            }
            let num = &src[digits_start..i];
            if num.is_empty() || num.matches('.').count() > 1 || num == "." {
                return Err(format!("bad numeral at byte {start}"));
            }
            if i < b.len() && is_word(b[i] as char) {
                return Err(format!("identifier may not start with a digit at byte {start}"));
            }
            out.push(Tok::Id(src[start..i].to_string()));
            continue;
        }
        if is_word(c) {
            let start = i;
            while i < b.len() {
                let ch = src[i..].chars().next().unwrap();
                if !is_word(ch) {
                    break;
                }
                i += ch.len_utf8();
            }
            out.push(Tok::Id(src[start..i].to_string()));
            continue;
        }
        return Err(format!("unexpected character {c:?} at byte {i}"));
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
    directed: bool,
    edges: usize,
}

fn keyword(t: Option<&Tok>, kw: &str) -> bool {
    matches!(t, Some(Tok::Id(s)) if s.eq_ignore_ascii_case(kw))
}

const KEYWORDS: [&str; 6] = ["strict", "graph", "digraph", "node", "edge", "subgraph"];

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok) -> Result<(), String> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(format!("expected {t:?}, found {:?} at token {}", self.peek(), self.pos))
        }
    }

    fn is_id(&self) -> bool {
        match self.peek() {
            Some(Tok::Id(s)) => !KEYWORDS.iter().any(|k| s.eq_ignore_ascii_case(k)),
            Some(Tok::Quoted(_)) => true,
            _ => false,
        }
    }

    fn id(&mut self) -> Result<(), String> {
        if self.is_id() {
            self.pos += 1;
            Ok(())
        } else {
            Err(format!("expected ID, found {:?} at token {}", self.peek(), self.pos))
        }
    }

    fn graph(&mut self) -> Result<(), String> {
        if keyword(self.peek(), "strict") {
            self.pos += 1;
        }
        if keyword(self.peek(), "graph") {
            self.directed = false;
        } else if keyword(self.peek(), "digraph") {
            self.directed = true;
        } else {
            return Err("expected `graph` or `digraph`".into());
        }
        self.pos += 1;
        if self.is_id() {
            self.pos += 1;
        }
        self.expect(&Tok::LBrace)?;
        self.stmt_list()?;
        self.expect(&Tok::RBrace)?;
        if self.pos != self.toks.len() {
            return Err(format!("trailing tokens after graph at token {}", self.pos));
        }
        Ok(())
    }

    fn stmt_list(&mut self) -> Result<(), String> {
        while !matches!(self.peek(), Some(Tok::RBrace) | None) {
            self.stmt()?;
            self.eat(&Tok::Semi);
        }
        Ok(())
    }

    fn stmt(&mut self) -> Result<(), String> {
        let t = self.peek();
        if keyword(t, "graph") || keyword(t, "node") || keyword(t, "edge") {
            self.pos += 1;
            return self.attr_list(true);
        }
        if self.is_id() && self.toks.get(self.pos + 1) == Some(&Tok::Eq) {
            self.pos += 2;
            return self.id();
        }
        if keyword(t, "subgraph") || t == Some(&Tok::LBrace) {
            self.subgraph()?;
        } else {
            self.node_id()?;
        }
        if matches!(self.peek(), Some(Tok::Edge(_))) {
            self.edge_rhs()?;
        }
        self.attr_list(false)
    }

    fn edge_rhs(&mut self) -> Result<(), String> {
        while let Some(Tok::Edge(op)) = self.peek().cloned() {
            let want = if self.directed { "->" } else { "--" };
            if op != want {
                return Err(format!("edge operator `{op}` in a {} graph", if self.directed { "directed" } else { "undirected" }));
            }
            self.pos += 1;
            self.edges += 1;
            if keyword(self.peek(), "subgraph") || self.peek() == Some(&Tok::LBrace) {
                self.subgraph()?;
            } else {
                self.node_id()?;
            }
        }
        Ok(())
    }

    fn attr_list(&mut self, required: bool) -> Result<(), String> {
        if required && self.peek() != Some(&Tok::LBracket) {
            return Err("expected attribute list".into());
        }
        while self.eat(&Tok::LBracket) {
            while self.is_id() {
                self.id()?;
                self.expect(&Tok::Eq)?;
                self.id()?;
                if !self.eat(&Tok::Semi) {
                    self.eat(&Tok::Comma);
                }
            }
            self.expect(&Tok::RBracket)?;
        }
        Ok(())
    }

    fn node_id(&mut self) -> Result<(), String> {
        self.id()?;
        if self.eat(&Tok::Colon) {
            self.id()?;
            if self.eat(&Tok::Colon) {
                self.id()?;
            }
        }
        Ok(())
    }

    fn subgraph(&mut self) -> Result<(), String> {
        if keyword(self.peek(), "subgraph") {
            self.pos += 1;
            if self.is_id() {
                self.pos += 1;
            }
        }
        self.expect(&Tok::LBrace)?;
        self.stmt_list()?;
        self.expect(&Tok::RBrace)
    }
}

/// Checks `src` against the DOT grammar. Returns the number of edge
/// operators and whether the graph is undirected.
pub fn check(src: &str) -> Result<(usize, bool), String> {
    let mut p = Parser {
        toks: tokenize(src)?,
        pos: 0,
        directed: false,
        edges: 0,
    };
    p.graph()?;
    Ok((p.edges, !p.directed))
}

#[test]
fn checker_accepts_and_rejects() {
    assert_eq!(check("graph G {\n  a -- b [label=\"x\"];\n  c;\n}"), Ok((1, true)));
    assert_eq!(check("strict digraph { a -> b -> c; node [shape=box]; x = y }"), Ok((2, false)));
    assert!(check("graph G { a -> b; }").is_err());
    assert!(check("graph G { a -- ; }").is_err());
    assert!(check("graph G { a -- b [label=]; }").is_err());
    assert!(check("graph G { 1abc -- b }").is_err());
    assert!(check("graph G { a -- b ").is_err());
    assert!(check("graph G { subgraph s { a -- b } -- c /* c */ }").is_ok());
}
