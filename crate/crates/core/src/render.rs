//! ASCII frames for replays.
//!
//! A frame is the grid, one glyph per cell (agent digit over predator `P`
//! over tile), followed by one line per agent and per predator naming its
//! position and the tile beneath, so the full object state can be recovered
//! from the text.

use std::fmt::Write as _;

use crate::world::{Position, TileKind, WorldState};

pub const PREDATOR_GLYPH: char = 'P';

pub fn render_frame(state: &WorldState) -> String {
    let mut out = String::new();
    for row in 0..state.height() {
        for col in 0..state.width() {
            let p = Position::new(row, col);
            let glyph = match state.agent_at(p) {
                Some(id) => char::from_digit(id as u32 % 10, 10).unwrap_or('?'),
                None if state.predator_at(p) => PREDATOR_GLYPH,
                None => state.tile(p).glyph(),
            };
            out.push(glyph);
        }
        out.push('\n');
    }
    for a in state.agents() {
        let _ = writeln!(
            out,
            "agent {} {} {} on {}",
            a.id,
            a.position.row,
            a.position.col,
            state.tile(a.position).glyph()
        );
    }
    for p in state.predators() {
        let _ = writeln!(
            out,
            "predator {} {} {} on {}",
            p.id,
            p.position.row,
            p.position.col,
            state.tile(p.position).glyph()
        );
    }
    out
}

/// Object state recovered from a frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedFrame {
    pub width: usize,
    pub height: usize,
    pub tiles: Vec<TileKind>,
    pub agents: Vec<Position>,
    pub predators: Vec<Position>,
}

impl ParsedFrame {
    pub fn tile(&self, p: Position) -> TileKind {
        self.tiles[p.row * self.width + p.col]
    }
}

/// Inverse of [`render_frame`].
pub fn parse_frame(text: &str) -> Option<ParsedFrame> {
    let mut grid: Vec<Vec<char>> = Vec::new();
    let mut agents = Vec::new();
    let mut predators = Vec::new();
    let mut under = Vec::new();
    for line in text.lines() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            [kind @ ("agent" | "predator"), id, row, col, "on", tile] => {
                let id: usize = id.parse().ok()?;
                let p = Position::new(row.parse().ok()?, col.parse().ok()?);
                let tile = TileKind::from_glyph(tile.chars().next()?)?;
                let list = if *kind == "agent" {
                    &mut agents
                } else {
                    &mut predators
                };
                if id != list.len() {
                    return None;
                }
                list.push(p);
                under.push((p, tile));
            }
            _ if !line.is_empty() => grid.push(line.chars().collect()),
            _ => {}
        }
    }
    let height = grid.len();
    let width = grid.first()?.len();
    let mut tiles = Vec::with_capacity(width * height);
    for row in &grid {
        if row.len() != width {
            return None;
        }
        for &c in row {
            tiles.push(TileKind::from_glyph(c).unwrap_or(TileKind::Empty));
        }
    }
    for (p, tile) in under {
        *tiles.get_mut(p.row * width + p.col)? = tile;
    }
    Some(ParsedFrame {
        width,
        height,
        tiles,
        agents,
        predators,
    })
}
