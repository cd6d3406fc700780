//! Penman notation reader and writer.
//!
//! Inverse roles (`:ARG0-of`) are normalised on reading: the edge is stored
//! in its forward direction. The writer re-inverts edges that point back
//! towards already-opened nodes, so reading a printed graph yields an
//! isomorphic graph.

use std::collections::{BTreeMap, HashSet};

use thiserror::Error;

use super::{compare_labels, var_letter, AmrGraph, GraphBuilder, GraphError, NodeId, NodeKind};

/// Roles ending in `-of` that are not inverses.
const NON_INVERTED: &[&str] = &["consist-of", "prep-out-of", "prep-on-behalf-of"];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PenmanError {
    #[error("unbalanced parentheses at byte {offset}")]
    Unbalanced { offset: usize },
    #[error("variable {var:?} redefined with title {second:?} (was {first:?}) at byte {offset}")]
    ConflictingTitle {
        var: String,
        first: String,
        second: String,
        offset: usize,
    },
    #[error("empty relation name at byte {offset}")]
    EmptyRelation { offset: usize },
    #[error("unterminated string at byte {offset}")]
    UnterminatedString { offset: usize },
    #[error("expected {expected} at byte {offset}")]
    Unexpected {
        expected: &'static str,
        offset: usize,
    },
    #[error("trailing input at byte {offset}")]
    Trailing { offset: usize },
    #[error("invalid graph: {0}")]
    Graph(#[from] GraphError),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Open,
    Close,
    Slash,
    Role(String),
    Str(String),
    Atom(String),
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, PenmanError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let is_delim = |c: u8| c.is_ascii_whitespace() || matches!(c, b'(' | b')' | b'"' | b'/');
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            _ if c.is_ascii_whitespace() => i += 1,
            b'(' => {
                out.push((Tok::Open, i));
                i += 1;
            }
            b')' => {
                out.push((Tok::Close, i));
                i += 1;
            }
            b'/' => {
                out.push((Tok::Slash, i));
                i += 1;
            }
            b'"' => {
                let start = i;
                i += 1;
                let mut s = String::new();
                let mut closed = false;
                while i < bytes.len() {
                    match bytes[i] {
                        b'\\' if i + 1 < bytes.len() => {
                            // Escapes are ASCII; copy the escaped char verbatim.
                            let ch = text[i + 1..].chars().next().unwrap();
                            s.push(ch);
                            i += 1 + ch.len_utf8();
                        }
                        b'"' => {
                            closed = true;
                            i += 1;
                            break;
                        }
                        _ => {
                            let ch = text[i..].chars().next().unwrap();
                            s.push(ch);
                            i += ch.len_utf8();
                        }
                    }
                }
                if !closed {
                    return Err(PenmanError::UnterminatedString { offset: start });
                }
                out.push((Tok::Str(s), start));
            }
            b':' => {
                let start = i;
                i += 1;
                while i < bytes.len() && !is_delim(bytes[i]) {
                    i += 1;
                }
                let name = &text[start + 1..i];
                if name.is_empty() {
                    return Err(PenmanError::EmptyRelation { offset: start });
                }
                out.push((Tok::Role(name.to_string()), start));
            }
            _ => {
                let start = i;
                while i < bytes.len() && !is_delim(bytes[i]) {
                    i += 1;
                }
                out.push((Tok::Atom(text[start..i].to_string()), start));
            }
        }
    }
    Ok(out)
}

enum Target {
    Node(NodeId),
    Str(String),
    Atom(String),
}

struct Pending {
    parent: NodeId,
    role: String,
    target: Target,
}

struct Parser<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    end: usize,
    builder: GraphBuilder,
    vars: BTreeMap<String, NodeId>,
    pending: Vec<Pending>,
}

impl<'a> Parser<'a> {
    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.1).unwrap_or(self.end)
    }

    fn node(&mut self) -> Result<NodeId, PenmanError> {
        match self.toks.get(self.pos) {
            Some((Tok::Open, _)) => self.pos += 1,
            _ => {
                return Err(PenmanError::Unexpected {
                    expected: "'('",
                    offset: self.offset(),
                })
            }
        }
        let var = match self.toks.get(self.pos) {
            Some((Tok::Atom(v), _)) => v.clone(),
            None => return Err(PenmanError::Unbalanced { offset: self.end }),
            _ => {
                return Err(PenmanError::Unexpected {
                    expected: "variable",
                    offset: self.offset(),
                })
            }
        };
        self.pos += 1;
        match self.toks.get(self.pos) {
            Some((Tok::Slash, _)) => self.pos += 1,
            None => return Err(PenmanError::Unbalanced { offset: self.end }),
            _ => {
                return Err(PenmanError::Unexpected {
                    expected: "'/'",
                    offset: self.offset(),
                })
            }
        }
        let (title, title_at) = match self.toks.get(self.pos) {
            Some((Tok::Atom(t), at)) | Some((Tok::Str(t), at)) => (t.clone(), *at),
            None => return Err(PenmanError::Unbalanced { offset: self.end }),
            _ => {
                return Err(PenmanError::Unexpected {
                    expected: "concept",
                    offset: self.offset(),
                })
            }
        };
        self.pos += 1;

        let id = match self.vars.get(&var) {
            Some(&existing) => {
                let first = &self.builder.nodes[existing.0].title;
                if *first != title {
                    return Err(PenmanError::ConflictingTitle {
                        var,
                        first: first.clone(),
                        second: title,
                        offset: title_at,
                    });
                }
                existing
            }
            None => {
                let id = self
                    .builder
                    .push(title, NodeKind::Concept, Some(var.clone()));
                self.vars.insert(var, id);
                id
            }
        };

        loop {
            match self.toks.get(self.pos) {
                Some((Tok::Close, _)) => {
                    self.pos += 1;
                    return Ok(id);
                }
                Some((Tok::Role(role), _)) => {
                    let role = role.clone();
                    self.pos += 1;
                    let target = match self.toks.get(self.pos) {
                        Some((Tok::Open, _)) => Target::Node(self.node()?),
                        Some((Tok::Str(s), _)) => {
                            self.pos += 1;
                            Target::Str(s.clone())
                        }
                        Some((Tok::Atom(a), _)) => {
                            self.pos += 1;
                            Target::Atom(a.clone())
                        }
                        None => return Err(PenmanError::Unbalanced { offset: self.end }),
                        _ => {
                            return Err(PenmanError::Unexpected {
                                expected: "relation value",
                                offset: self.offset(),
                            })
                        }
                    };
                    self.pending.push(Pending {
                        parent: id,
                        role,
                        target,
                    });
                }
                None => return Err(PenmanError::Unbalanced { offset: self.end }),
                _ => {
                    return Err(PenmanError::Unexpected {
                        expected: "relation or ')'",
                        offset: self.offset(),
                    })
                }
            }
        }
    }
}

fn inverse_of(role: &str) -> Option<&str> {
    if NON_INVERTED.contains(&role) {
        return None;
    }
    role.strip_suffix("-of").filter(|r| !r.is_empty())
}

/// Parses a single parenthesised Penman expression.
///
/// A lone constant (`5` or `"Rover"`) is read as a one-node graph.
pub fn parse_penman(text: &str) -> Result<AmrGraph, PenmanError> {
    let toks = lex(text)?;
    if let [(tok, _)] = toks.as_slice() {
        let mut b = GraphBuilder::new();
        let root = match tok {
            Tok::Str(s) => b.string(s),
            Tok::Atom(a) if a.parse::<i64>().is_ok() => {
                b.push(a.clone(), NodeKind::NumericConstant, None)
            }
            Tok::Atom(a) => b.string(a),
            _ => {
                return Err(PenmanError::Unexpected {
                    expected: "'('",
                    offset: 0,
                })
            }
        };
        return Ok(b.build(root)?);
    }
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        end: text.len(),
        builder: GraphBuilder::new(),
        vars: BTreeMap::new(),
        pending: Vec::new(),
    };
    let root = p.node()?;
    if let Some((tok, at)) = toks.get(p.pos) {
        return Err(match tok {
            Tok::Close => PenmanError::Unbalanced { offset: *at },
            _ => PenmanError::Trailing { offset: *at },
        });
    }
    let Parser {
        mut builder,
        vars,
        pending,
        ..
    } = p;
    for Pending {
        parent,
        role,
        target,
    } in pending
    {
        let child = match target {
            Target::Node(id) => id,
            Target::Atom(a) => match vars.get(&a) {
                Some(&id) => id,
                None => {
                    let kind = if a.parse::<i64>().is_ok() {
                        NodeKind::NumericConstant
                    } else {
                        NodeKind::StringConstant
                    };
                    let c = builder.push(a, kind, None);
                    builder.edge(parent, c, &role);
                    continue;
                }
            },
            Target::Str(s) => {
                let c = builder.push(s, NodeKind::StringConstant, None);
                builder.edge(parent, c, &role);
                continue;
            }
        };
        match inverse_of(&role) {
            Some(forward) => builder.edge(child, parent, forward),
            None => builder.edge(parent, child, &role),
        }
    }
    Ok(builder.build(root)?)
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

/// (printed role, other endpoint, edge index) for every edge at `id`.
fn incident(g: &AmrGraph, id: NodeId) -> Vec<(String, NodeId, usize)> {
    let mut out = Vec::new();
    for (i, e) in g.edges().iter().enumerate() {
        if e.source == id {
            out.push((e.label.clone(), e.target, i));
        } else if e.target == id {
            out.push((format!("{}-of", e.label), e.source, i));
        }
    }
    out.sort_by(|a, b| {
        compare_labels(&a.0, &b.0)
            .then_with(|| g.node(a.1).title.cmp(&g.node(b.1).title))
            .then_with(|| a.1.cmp(&b.1))
            .then_with(|| a.2.cmp(&b.2))
    });
    out
}

/// Chooses, for every node except the root, the edge under which it is
/// written out in full. Forward edges are preferred; nodes reachable only
/// against edge direction are attached through inverse roles.
fn spanning_edges(g: &AmrGraph) -> Vec<Option<usize>> {
    let mut intro: Vec<Option<usize>> = vec![None; g.len()];
    let mut seen = vec![false; g.len()];
    let mut order: Vec<NodeId> = Vec::new();

    fn forward(
        g: &AmrGraph,
        n: NodeId,
        seen: &mut Vec<bool>,
        intro: &mut Vec<Option<usize>>,
        order: &mut Vec<NodeId>,
    ) {
        seen[n.0] = true;
        order.push(n);
        for (_, other, i) in incident(g, n) {
            if g.edges()[i].source == n && !seen[other.0] {
                intro[other.0] = Some(i);
                forward(g, other, seen, intro, order);
            }
        }
    }

    forward(g, g.root(), &mut seen, &mut intro, &mut order);
    loop {
        let next = order.iter().find_map(|&n| {
            incident(g, n)
                .into_iter()
                .find(|(_, other, _)| !seen[other.0])
                .map(|(_, other, i)| (other, i))
        });
        match next {
            Some((other, i)) => {
                intro[other.0] = Some(i);
                forward(g, other, &mut seen, &mut intro, &mut order);
            }
            None => break,
        }
    }
    intro
}

/// Parent of every node in the tree the writer lays the graph out along
/// (`None` for the root).
pub fn layout_parents(g: &AmrGraph) -> Vec<Option<NodeId>> {
    spanning_edges(g)
        .iter()
        .enumerate()
        .map(|(n, intro)| {
            intro.map(|i| {
                let e = &g.edges()[i];
                if e.target.0 == n {
                    e.source
                } else {
                    e.target
                }
            })
        })
        .collect()
}

struct Printer<'g> {
    g: &'g AmrGraph,
    intro: Vec<Option<usize>>,
    vars: Vec<Option<String>>,
    used_edges: HashSet<usize>,
    out: String,
}

impl<'g> Printer<'g> {
    fn assign_vars(&mut self, id: NodeId, counters: &mut BTreeMap<char, usize>) {
        let letter = var_letter(&self.g.node(id).title);
        let k = counters.entry(letter).or_insert(0);
        *k += 1;
        self.vars[id.0] = Some(if *k == 1 {
            letter.to_string()
        } else {
            format!("{letter}{k}")
        });
        for (_, other, i) in incident(self.g, id) {
            if self.intro[other.0] == Some(i) && !self.g.node(other).kind.is_constant() {
                self.assign_vars(other, counters);
            }
        }
    }

    fn write(&mut self, id: NodeId) {
        let node = self.g.node(id);
        self.out.push('(');
        self.out.push_str(self.vars[id.0].as_deref().unwrap_or("x"));
        self.out.push_str(" / ");
        self.out.push_str(&node.title);

        // Outgoing edges are written at their source; incoming edges only
        // when they introduce the other endpoint (as an inverse role).
        let incident: Vec<_> = incident(self.g, id)
            .into_iter()
            .filter(|(_, other, i)| {
                !self.used_edges.contains(i)
                    && (self.g.edges()[*i].source == id || self.intro[other.0] == Some(*i))
            })
            .collect();
        for (_, _, i) in &incident {
            self.used_edges.insert(*i);
        }
        for (role, other, i) in incident {
            self.out.push_str(" :");
            self.out.push_str(&role);
            self.out.push(' ');
            let o = self.g.node(other);
            match o.kind {
                NodeKind::StringConstant => self.out.push_str(&quote(&o.title)),
                NodeKind::NumericConstant => self.out.push_str(&o.title),
                NodeKind::Concept if self.intro[other.0] == Some(i) => self.write(other),
                NodeKind::Concept => {
                    let v = self.vars[other.0].clone().unwrap_or_default();
                    self.out.push_str(&v);
                }
            }
        }
        self.out.push(')');
    }
}

/// Deterministic single-line Penman serialisation with generated variables.
///
/// Children are ordered by role (numeric-aware) and then by child title.
/// Re-entrant nodes are written once; other references reuse the variable.
pub fn print_penman(g: &AmrGraph) -> Result<String, GraphError> {
    let root = g.node(g.root());
    match root.kind {
        NodeKind::StringConstant => return Ok(quote(&root.title)),
        NodeKind::NumericConstant => return Ok(root.title.clone()),
        NodeKind::Concept => {}
    }
    let intro = spanning_edges(g);
    for n in g.nodes() {
        if n.id != g.root() && intro[n.id.0].is_none() {
            return Err(GraphError::Unreachable(n.id));
        }
    }
    let mut p = Printer {
        g,
        intro,
        vars: vec![None; g.len()],
        used_edges: HashSet::new(),
        out: String::new(),
    };
    p.assign_vars(g.root(), &mut BTreeMap::new());
    p.write(g.root());
    Ok(p.out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::is_isomorphic;

    #[test]
    fn parses_fig1_fragment() {
        let g = parse_penman("(r / run-01 :ARG0 (h / he))").unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.node(g.root()).title, "run-01");
        assert_eq!(g.edges().len(), 1);
        let e = &g.edges()[0];
        assert_eq!(g.node(e.source).title, "run-01");
        assert_eq!(g.node(e.target).title, "he");
        assert_eq!(e.label, "ARG0");
        assert_eq!(print_penman(&g).unwrap(), "(r / run-01 :ARG0 (h / he))");
    }

    #[test]
    fn minimal_expression() {
        let g = parse_penman("(d / dog)").unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.node(g.root()).title, "dog");
    }

    #[test]
    fn date_entity_has_numeric_children() {
        let g = parse_penman("(d / date-entity :year 2008 :month 1 :day 1)").unwrap();
        assert_eq!(g.len(), 4);
        let nums = g
            .nodes()
            .iter()
            .filter(|n| n.kind == NodeKind::NumericConstant)
            .count();
        assert_eq!(nums, 3);
        assert!(g
            .triples()
            .iter()
            .any(|t| t.relation == "year" && t.target.starts_with('v')));
    }

    #[test]
    fn quoted_and_numeric_constants_differ() {
        let g = parse_penman("(x / thing :quant 5 :value \"5\")").unwrap();
        let kinds: Vec<_> = g.nodes()[1..].iter().map(|n| n.kind).collect();
        assert_eq!(
            kinds,
            vec![NodeKind::NumericConstant, NodeKind::StringConstant]
        );
    }

    #[test]
    fn name_prints_quoted_constant() {
        let g = parse_penman("(n / name :op1 \"Rover\")").unwrap();
        assert_eq!(print_penman(&g).unwrap(), "(n / name :op1 \"Rover\")");
    }

    #[test]
    fn reentrancy_prints_bare_variable() {
        let text = "(r / run-01 :ARG0 (h / he) :destination (d / dog :poss h))";
        let g = parse_penman(text).unwrap();
        assert_eq!(g.len(), 3);
        let printed = print_penman(&g).unwrap();
        assert_eq!(
            printed,
            "(r / run-01 :ARG0 (h / he) :destination (d / dog :poss h))"
        );
        assert!(is_isomorphic(&g, &parse_penman(&printed).unwrap()));
    }

    #[test]
    fn forward_reference_resolves_to_variable() {
        let g = parse_penman("(a / and :op1 (x / go-02 :ARG0 p) :op2 (p / person))").unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.edges().len(), 3);
    }

    #[test]
    fn inverse_roles_are_normalised() {
        let g = parse_penman("(p / person :ARG0-of (s / sail-01))").unwrap();
        let e = &g.edges()[0];
        assert_eq!(g.node(e.source).title, "sail-01");
        assert_eq!(e.label, "ARG0");
        assert_eq!(
            print_penman(&g).unwrap(),
            "(p / person :ARG0-of (s / sail-01))"
        );
        let c = parse_penman("(a / x :consist-of (b / y))").unwrap();
        assert_eq!(c.edges()[0].label, "consist-of");
        assert_eq!(c.node(c.edges()[0].source).title, "x");
    }

    #[test]
    fn variable_suffixes_disambiguate() {
        let g = parse_penman("(a / and :op1 (a2 / apple) :op2 (a3 / apple))").unwrap();
        assert_eq!(
            print_penman(&g).unwrap(),
            "(a / and :op1 (a2 / apple) :op2 (a3 / apple))"
        );
    }

    #[test]
    fn error_cases_carry_offsets() {
        assert_eq!(
            parse_penman("(r / run-01 :ARG0 (h / he)"),
            Err(PenmanError::Unbalanced { offset: 26 })
        );
        assert_eq!(
            parse_penman("(r / run-01))"),
            Err(PenmanError::Unbalanced { offset: 12 })
        );
        assert!(matches!(
            parse_penman("(r / run-01 :ARG0 (r / walk-01))"),
            Err(PenmanError::ConflictingTitle { offset: 23, .. })
        ));
        assert_eq!(
            parse_penman("(r / run-01 : (h / he))"),
            Err(PenmanError::EmptyRelation { offset: 12 })
        );
        assert!(parse_penman("").is_err());
        assert!(parse_penman("(r / x :name \"open").is_err());
    }

    #[test]
    fn lone_constants_are_graphs() {
        let g = parse_penman("5").unwrap();
        assert_eq!(g.node(g.root()).kind, NodeKind::NumericConstant);
        assert_eq!(print_penman(&g).unwrap(), "5");
        let g = parse_penman("\"Rover\"").unwrap();
        assert_eq!(print_penman(&g).unwrap(), "\"Rover\"");
    }

    #[test]
    fn layout_follows_inverse_roles() {
        let g = parse_penman("(r / run-01 :ARG0 (p / person :ARG0-of (s / sail-01)))").unwrap();
        let parents = layout_parents(&g);
        assert_eq!(parents[0], None);
        assert_eq!(parents[1], Some(NodeId(0)));
        assert_eq!(parents[2], Some(NodeId(1)));
    }

    #[test]
    fn same_title_redefinition_is_reentrancy() {
        let g = parse_penman("(r / run-01 :ARG0 (h / he) :ARG1 (h / he))").unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.edges().len(), 2);
    }

    #[test]
    fn string_escapes_round_trip() {
        let g = parse_penman(r#"(n / name :op1 "say \"hi\" \\")"#).unwrap();
        assert_eq!(g.node(NodeId(1)).title, r#"say "hi" \"#);
        let back = parse_penman(&print_penman(&g).unwrap()).unwrap();
        assert!(is_isomorphic(&g, &back));
    }
}
