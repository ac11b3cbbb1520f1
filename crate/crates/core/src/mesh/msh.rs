//! Reader and writer for the ASCII Gmsh 2.2 subset: 3-node and 6-node
//! triangles plus 3-node boundary lines.

use super::Mesh;
use crate::error::{Error, Result};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

const TRI3: u32 = 2;
const TRI6: u32 = 9;
const LINE3: u32 = 8;

pub fn load_msh(path: &Path) -> Result<Mesh> {
    parse_msh(&std::fs::read_to_string(path)?)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Option<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            self.last = i + 1;
            let t = l.trim();
            if !t.is_empty() {
                return Some((i + 1, t));
            }
        }
        None
    }

    fn expect_line(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.next_line().ok_or_else(|| Error::Parse {
            line: self.last,
            msg: format!("unexpected end of file, expected {what}"),
        })
    }
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.and_then(|t| t.parse().ok()).ok_or_else(|| Error::Parse {
        line,
        msg: format!("expected {what}"),
    })
}

pub fn parse_msh(text: &str) -> Result<Mesh> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let mut coords: HashMap<u64, ([f64; 2], usize)> = HashMap::new();
    let mut node_order: Vec<u64> = Vec::new();
    // (element id, line, type, node tags)
    let mut elements: Vec<(u64, usize, u32, Vec<u64>)> = Vec::new();
    let mut saw_format = false;

    while let Some((ln, l)) = lines.next_line() {
        match l {
            "$MeshFormat" => {
                let (fl, f) = lines.expect_line("format line")?;
                let mut it = f.split_whitespace();
                let version: String = parse_num(it.next(), fl, "version")?;
                let file_type: u32 = parse_num(it.next(), fl, "file type")?;
                if !version.starts_with("2.") || file_type != 0 {
                    return Err(Error::Parse {
                        line: fl,
                        msg: format!("unsupported format '{f}', need ASCII 2.2"),
                    });
                }
                expect_end(&mut lines, "$EndMeshFormat")?;
                saw_format = true;
            }
            "$Nodes" => {
                let (cl, c) = lines.expect_line("node count")?;
                let count: usize = parse_num(Some(c), cl, "node count")?;
                for _ in 0..count {
                    let (nl, n) = lines.expect_line("node")?;
                    let mut it = n.split_whitespace();
                    let tag: u64 = parse_num(it.next(), nl, "node tag")?;
                    let x: f64 = parse_num(it.next(), nl, "x coordinate")?;
                    let y: f64 = parse_num(it.next(), nl, "y coordinate")?;
                    if coords.insert(tag, ([x, y], nl)).is_some() {
                        return Err(Error::Parse {
                            line: nl,
                            msg: format!("duplicate node tag {tag}"),
                        });
                    }
                    node_order.push(tag);
                }
                expect_end(&mut lines, "$EndNodes")?;
            }
            "$Elements" => {
                let (cl, c) = lines.expect_line("element count")?;
                let count: usize = parse_num(Some(c), cl, "element count")?;
                for _ in 0..count {
                    let (el, e) = lines.expect_line("element")?;
                    let mut it = e.split_whitespace();
                    let id: u64 = parse_num(it.next(), el, "element id")?;
                    let ty: u32 = parse_num(it.next(), el, "element type")?;
                    let ntags: usize = parse_num(it.next(), el, "tag count")?;
                    for _ in 0..ntags {
                        let _: i64 = parse_num(it.next(), el, "element tag")?;
                    }
                    let arity = match ty {
                        TRI3 => 3,
                        TRI6 => 6,
                        LINE3 => 3,
                        other => {
                            return Err(Error::Parse {
                                line: el,
                                msg: format!("element {id}: unsupported element type {other}"),
                            })
                        }
                    };
                    let tags = (0..arity)
                        .map(|_| parse_num(it.next(), el, "node tag"))
                        .collect::<Result<Vec<u64>>>()?;
                    elements.push((id, el, ty, tags));
                }
                expect_end(&mut lines, "$EndElements")?;
            }
            s if s.starts_with("$") && !s.starts_with("$End") => {
                let end = format!("$End{}", &s[1..]);
                loop {
                    let (_, l) = lines.expect_line(&end)?;
                    if l == end {
                        break;
                    }
                }
            }
            _ => {
                return Err(Error::Parse {
                    line: ln,
                    msg: format!("unexpected content '{l}'"),
                })
            }
        }
    }
    if !saw_format {
        return Err(Error::Parse {
            line: 1,
            msg: "missing $MeshFormat section".into(),
        });
    }

    let tris: Vec<&(u64, usize, u32, Vec<u64>)> =
        elements.iter().filter(|e| e.2 != LINE3).collect();
    if tris.is_empty() {
        return Err(Error::Parse {
            line: lines.last,
            msg: "no triangles".into(),
        });
    }
    let quadratic = tris[0].2 == TRI6;
    if let Some(e) = tris.iter().find(|e| (e.2 == TRI6) != quadratic) {
        return Err(Error::Parse {
            line: e.1,
            msg: format!("element {}: mixed linear and quadratic triangles", e.0),
        });
    }
    for (id, line, _, tags) in &elements {
        if let Some(t) = tags.iter().find(|t| !coords.contains_key(t)) {
            return Err(Error::Parse {
                line: *line,
                msg: format!("element {id} references undefined node {t}"),
            });
        }
    }
    for (id, line, _, tags) in &tris {
        let p: Vec<[f64; 2]> = tags[..3].iter().map(|t| coords[t].0).collect();
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        if !(det > 0.0) {
            return Err(Error::Parse {
                line: *line,
                msg: format!("element {id} is inverted or degenerate (signed area {:.3e})", 0.5 * det),
            });
        }
    }

    // Vertices first, each group in file order.
    let mut is_vertex: HashMap<u64, bool> = HashMap::new();
    for (_, _, _, tags) in &tris {
        for (k, t) in tags.iter().enumerate() {
            let v = is_vertex.entry(*t).or_insert(false);
            *v |= k < 3;
        }
    }
    let mut index: HashMap<u64, usize> = HashMap::new();
    let mut nodes = Vec::new();
    for want_vertex in [true, false] {
        for t in &node_order {
            if is_vertex.get(t) == Some(&want_vertex) {
                index.insert(*t, nodes.len());
                nodes.push(coords[t].0);
            }
        }
    }
    let vertex_count = is_vertex.values().filter(|v| **v).count();

    if quadratic {
        let triangles = tris
            .iter()
            .map(|e| std::array::from_fn(|k| index[&e.3[k]]))
            .collect();
        Mesh::assemble(nodes, triangles, vertex_count).map_err(|e| with_first_line(e, &tris))
    } else {
        let linear: Vec<[usize; 3]> = tris
            .iter()
            .map(|e| std::array::from_fn(|k| index[&e.3[k]]))
            .collect();
        Mesh::from_linear(nodes, &linear, |_, _| None).map_err(|e| with_first_line(e, &tris))
    }
}

fn with_first_line(e: Error, tris: &[&(u64, usize, u32, Vec<u64>)]) -> Error {
    match e {
        Error::Validation(msg) => match msg
            .strip_prefix("triangle ")
            .and_then(|r| r.split_whitespace().next())
            .and_then(|k| k.parse::<usize>().ok())
            .and_then(|k| tris.get(k))
        {
            Some(t) => Error::Parse {
                line: t.1,
                msg: format!("element {}: {msg}", t.0),
            },
            None => Error::Validation(msg),
        },
        other => other,
    }
}

fn expect_end(lines: &mut Lines<'_>, end: &str) -> Result<()> {
    let (l, s) = lines.expect_line(end)?;
    if s != end {
        return Err(Error::Parse {
            line: l,
            msg: format!("expected {end}, found '{s}'"),
        });
    }
    Ok(())
}

/// Serializes a mesh as Gmsh 2.2 ASCII with 6-node triangles and 3-node
/// boundary lines. Coordinates use shortest round-trip formatting.
pub fn write_msh(mesh: &Mesh) -> String {
    let mut out = String::new();
    out.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n");
    let _ = writeln!(out, "{}", mesh.nodes.len());
    for (i, p) in mesh.nodes.iter().enumerate() {
        let _ = writeln!(out, "{} {} {} 0", i + 1, p[0], p[1]);
    }
    out.push_str("$EndNodes\n$Elements\n");
    let _ = writeln!(out, "{}", mesh.boundary_edges.len() + mesh.triangles.len());
    let mut id = 1;
    for e in &mesh.boundary_edges {
        let _ = writeln!(out, "{id} 8 2 2 2 {} {} {}", e[0] + 1, e[1] + 1, e[2] + 1);
        id += 1;
    }
    for t in &mesh.triangles {
        let _ = write!(out, "{id} 9 2 1 1");
        for n in t {
            let _ = write!(out, " {}", n + 1);
        }
        out.push('\n');
        id += 1;
    }
    out.push_str("$EndElements\n");
    out
}
