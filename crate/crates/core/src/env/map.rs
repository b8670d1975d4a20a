//! Plain-text grid maps, one row per line.
//!
//! `#` obstacle, `.` free, `S` start, `G` goal, `~` puddle, `+` valuable
//! rock, `x` dangerous rock. Door cells print as `.`.

use super::grid::Layout;
use crate::error::{Error, Result};
use crate::mdp::GridShape;

pub fn render_map(layout: &Layout) -> String {
    let GridShape { width, height } = layout.shape;
    let mut out = String::with_capacity((width + 1) * height);
    for r in 0..height {
        for c in 0..width {
            let s = layout.shape.state(r, c);
            let glyph = if s == layout.start {
                'S'
            } else if s == layout.goal {
                'G'
            } else if layout.blocked[s] {
                '#'
            } else if layout.puddles.contains(&s) {
                '~'
            } else if layout.valuable.contains(&s) {
                '+'
            } else if layout.dangerous.contains(&s) {
                'x'
            } else {
                '.'
            };
            out.push(glyph);
        }
        out.push('\n');
    }
    out
}

pub fn parse_map(text: &str) -> Result<Layout> {
    let rows: Vec<&str> = text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect();
    let height = rows.len();
    let width = rows.first().map_or(0, |r| r.chars().count());
    if height == 0 || width == 0 {
        return Err(Error::InvalidModel("empty map".into()));
    }
    let shape = GridShape { width, height };
    let mut layout = Layout {
        shape,
        blocked: vec![false; width * height],
        doors: Vec::new(),
        puddles: Vec::new(),
        valuable: Vec::new(),
        dangerous: Vec::new(),
        start: usize::MAX,
        goal: usize::MAX,
    };
    for (r, row) in rows.iter().enumerate() {
        if row.chars().count() != width {
            return Err(Error::InvalidModel(format!("map row {r} has a different width")));
        }
        for (c, ch) in row.chars().enumerate() {
            let s = shape.state(r, c);
            match ch {
                '.' => {}
                '#' => layout.blocked[s] = true,
                '~' => layout.puddles.push(s),
                '+' => layout.valuable.push(s),
                'x' => layout.dangerous.push(s),
                'S' | 'G' => {
                    let slot = if ch == 'S' { &mut layout.start } else { &mut layout.goal };
                    if *slot != usize::MAX {
                        return Err(Error::InvalidModel(format!("map has more than one '{ch}'")));
                    }
                    *slot = s;
                }
                other => return Err(Error::InvalidModel(format!("unknown map glyph '{other}'"))),
            }
        }
    }
    if layout.start == usize::MAX || layout.goal == usize::MAX {
        return Err(Error::InvalidModel("map needs one 'S' and one 'G'".into()));
    }
    Ok(layout)
}
