//! Readers and writers for simple point cloud interchange formats.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::pointcloud::{Frame, Point3, Sequence};

/// Parses whitespace-separated `x y z` lines. Blank lines and lines starting
/// with `#` are skipped. An input with no data lines is a valid empty frame.
pub fn parse_xyz(text: &str) -> Result<Vec<Point3>> {
    let mut points = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let mut coord = |name: &str| -> Result<f64> {
            let field = fields.next().ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("missing {name} coordinate"),
            })?;
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line: i + 1,
                msg: format!("cannot parse {name} coordinate `{field}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("non-finite {name} coordinate `{field}`"),
                });
            }
            Ok(v)
        };
        let x = coord("x")?;
        let y = coord("y")?;
        let z = coord("z")?;
        if let Some(extra) = fields.next() {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("unexpected trailing field `{extra}`"),
            });
        }
        points.push(Point3 { x, y, z });
    }
    Ok(points)
}

/// Serializes points one per line. Uses the shortest round-trippable decimal
/// form, so write → parse reproduces each coordinate bit for bit.
pub fn write_xyz(points: &[Point3]) -> String {
    let mut out = String::new();
    for p in points {
        writeln!(out, "{} {} {}", p.x, p.y, p.z).expect("string write cannot fail");
    }
    out
}

/// Parses an ASCII 1.0 PLY file, reading only the vertex element's x, y, z
/// properties. Extra vertex properties and trailing elements are ignored.
pub fn parse_ply_ascii(text: &str) -> Result<Vec<Point3>> {
    let mut lines = text.lines().enumerate();

    let (_, magic) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    if magic.trim() != "ply" {
        return Err(Error::Parse {
            line: 1,
            msg: "missing `ply` magic line".into(),
        });
    }

    let mut vertex_count: Option<usize> = None;
    // Column index of x/y/z within a vertex data line.
    let mut cols: [Option<usize>; 3] = [None, None, None];
    let mut prop_index = 0usize;
    // Which element's properties we are currently reading.
    let mut in_vertex_element = false;
    let mut format_seen = false;
    let mut header_end_line = 0usize;

    for (i, raw) in lines.by_ref() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with("comment") {
            continue;
        }
        let mut words = line.split_whitespace();
        match words.next() {
            Some("format") => {
                let rest: Vec<&str> = words.collect();
                if rest != ["ascii", "1.0"] {
                    return Err(Error::UnsupportedFormat(format!(
                        "ply format `{}` (only ascii 1.0 is supported)",
                        rest.join(" ")
                    )));
                }
                format_seen = true;
            }
            Some("element") => {
                let name = words.next().unwrap_or("");
                let count: usize = words
                    .next()
                    .and_then(|w| w.parse().ok())
                    .ok_or_else(|| Error::Parse {
                        line: i + 1,
                        msg: format!("element `{name}` missing a count"),
                    })?;
                in_vertex_element = name == "vertex";
                if in_vertex_element {
                    if vertex_count.is_some() {
                        return Err(Error::Parse {
                            line: i + 1,
                            msg: "duplicate vertex element".into(),
                        });
                    }
                    vertex_count = Some(count);
                    prop_index = 0;
                }
            }
            Some("property") => {
                if in_vertex_element {
                    // `property <type> <name>`; list properties are not
                    // meaningful on vertices we care about.
                    let ty = words.next().unwrap_or("");
                    if ty == "list" {
                        return Err(Error::Parse {
                            line: i + 1,
                            msg: "list property on vertex element".into(),
                        });
                    }
                    match words.next() {
                        Some("x") => cols[0] = Some(prop_index),
                        Some("y") => cols[1] = Some(prop_index),
                        Some("z") => cols[2] = Some(prop_index),
                        _ => {}
                    }
                    prop_index += 1;
                }
            }
            Some("end_header") => {
                header_end_line = i + 1;
                break;
            }
            Some(other) => {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("unexpected header keyword `{other}`"),
                });
            }
            None => unreachable!("blank lines are skipped above"),
        }
    }

    if header_end_line == 0 {
        return Err(Error::Parse {
            line: text.lines().count(),
            msg: "header never terminated with end_header".into(),
        });
    }
    if !format_seen {
        return Err(Error::Parse {
            line: header_end_line,
            msg: "header missing format line".into(),
        });
    }
    let count = vertex_count.ok_or(Error::Parse {
        line: header_end_line,
        msg: "header missing vertex element".into(),
    })?;
    let [Some(xc), Some(yc), Some(zc)] = cols else {
        return Err(Error::Parse {
            line: header_end_line,
            msg: "vertex element missing x, y, or z property".into(),
        });
    };

    let mut points = Vec::with_capacity(count);
    for (i, raw) in lines {
        if points.len() == count {
            // Trailing elements (faces etc.) are ignored.
            break;
        }
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let max_col = xc.max(yc).max(zc);
        if fields.len() <= max_col {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!(
                    "vertex line has {} fields, need at least {}",
                    fields.len(),
                    max_col + 1
                ),
            });
        }
        let coord = |col: usize, name: &str| -> Result<f64> {
            let field = fields[col];
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line: i + 1,
                msg: format!("cannot parse {name} coordinate `{field}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("non-finite {name} coordinate `{field}`"),
                });
            }
            Ok(v)
        };
        let x = coord(xc, "x")?;
        let y = coord(yc, "y")?;
        let z = coord(zc, "z")?;
        points.push(Point3 { x, y, z });
    }

    if points.len() != count {
        return Err(Error::Parse {
            line: text.lines().count(),
            msg: format!("header promised {count} vertices, found {}", points.len()),
        });
    }
    Ok(points)
}

/// Loads the frame files in `dir` whose names match `pattern` (a filename
/// glob such as `*.xyz`) as one sequence.
///
/// Files are ordered lexicographically by name and assigned frame indices
/// 0..T-1 in that order; both ids default to the directory name. The format
/// is chosen by extension: `.xyz` or `.ply`.
pub fn load_sequence(dir: &Path, pattern: &str) -> Result<Sequence> {
    let matcher = glob::Pattern::new(pattern)
        .map_err(|e| Error::InvalidParam(format!("bad filename glob `{pattern}`: {e}")))?;

    let mut paths: Vec<std::path::PathBuf> = std::fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| {
            p.is_file()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| matcher.matches(n))
        })
        .collect();
    paths.sort();

    if paths.is_empty() {
        return Err(Error::EmptySequence {
            dir: dir.to_path_buf(),
            pattern: pattern.to_string(),
        });
    }

    let mut frames = Vec::with_capacity(paths.len());
    for (index, path) in paths.iter().enumerate() {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        let points = match path.extension().and_then(|e| e.to_str()) {
            Some("xyz") => parse_xyz(&text),
            Some("ply") => parse_ply_ascii(&text),
            other => Err(Error::UnsupportedFormat(format!(
                "frame file extension `{}`",
                other.unwrap_or("")
            ))),
        }
        .map_err(|e| e.in_file(path))?;
        frames.push(Frame::new(index, points));
    }

    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sequence".into());
    Ok(Sequence {
        identity_id: name.clone(),
        sequence_id: name,
        condition: None,
        frames,
    })
}
